//! Index sequences and set partitions.
//!
//! Partitions are enumerated as restricted growth strings (RGS): position `i`
//! carries a block label `a[i]` with `a[0] = 0` and `a[i] <= max(a[..i]) + 1`.
//! Lexicographic RGS order is the canonical order in which every enumerator
//! here yields its items, and blocks are always listed by smallest element.

use std::fmt;
use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::report::BoundReport;

/// Largest number of elements an enumeration accepts unless overridden.
/// Bell(14) is about 1.9e8.
pub const DEFAULT_MAX_ELEMENTS: usize = 14;

/// A point of the index set: a field component and a lattice coordinate.
///
/// Finite discrete fields use `comp = 0` and `x` as the variable number;
/// the two-field Gaussian model uses `comp = 0` for psi and `comp = 1` for phi.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Site {
    pub comp: u16,
    pub x: i64,
}

impl Site {
    pub const fn new(comp: u16, x: i64) -> Self {
        Site { comp, x }
    }
}

/// A site together with a conjugation flag: `conj = true` stands for `y(site)*`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SiteRef {
    pub site: Site,
    pub conj: bool,
}

impl SiteRef {
    pub const fn new(site: Site) -> Self {
        SiteRef { site, conj: false }
    }

    pub const fn at(comp: u16, x: i64) -> Self {
        SiteRef::new(Site::new(comp, x))
    }

    pub const fn conjugate(self) -> Self {
        SiteRef {
            site: self.site,
            conj: !self.conj,
        }
    }
}

impl fmt::Display for SiteRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.site.comp, self.site.x)?;
        if self.conj {
            f.write_str("*")?;
        }
        Ok(())
    }
}

/// An ordered sequence of site references. Positions are what partitions act
/// on, so the same site may appear more than once.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct IndexSequence(Vec<SiteRef>);

impl IndexSequence {
    pub fn new(refs: Vec<SiteRef>) -> Self {
        IndexSequence(refs)
    }

    pub fn empty() -> Self {
        IndexSequence(Vec::new())
    }

    /// Plain (unconjugated) references to `(comp, x)` for each `x`.
    pub fn sites(comp: u16, xs: &[i64]) -> Self {
        xs.iter().map(|&x| SiteRef::at(comp, x)).collect()
    }

    pub fn as_slice(&self) -> &[SiteRef] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<SiteRef> {
        self.0
    }

    /// Conjugates every entry.
    pub fn conjugate(&self) -> Self {
        self.0.iter().map(|r| r.conjugate()).collect()
    }

    /// Sorted copy, used as a permutation-invariant key.
    pub fn canonical(&self) -> Self {
        let mut v = self.0.clone();
        v.sort_unstable();
        IndexSequence(v)
    }

    /// Subsequence at the given positions, in the order given.
    pub fn select(&self, positions: &[usize]) -> Self {
        positions.iter().map(|&i| self.0[i]).collect()
    }

    /// Concatenation `J_1 + ... + J_L`.
    pub fn concat<'a>(parts: impl IntoIterator<Item = &'a IndexSequence>) -> Self {
        parts.into_iter().flat_map(|p| p.0.iter().copied()).collect()
    }
}

impl Deref for IndexSequence {
    type Target = [SiteRef];

    fn deref(&self) -> &[SiteRef] {
        &self.0
    }
}

impl From<Vec<SiteRef>> for IndexSequence {
    fn from(v: Vec<SiteRef>) -> Self {
        IndexSequence(v)
    }
}

impl From<&[SiteRef]> for IndexSequence {
    fn from(v: &[SiteRef]) -> Self {
        IndexSequence(v.to_vec())
    }
}

impl FromIterator<SiteRef> for IndexSequence {
    fn from_iter<T: IntoIterator<Item = SiteRef>>(iter: T) -> Self {
        IndexSequence(iter.into_iter().collect())
    }
}

impl fmt::Display for IndexSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, r) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{r}")?;
        }
        f.write_str(")")
    }
}

/// A partition of the positions `0..len` into nonempty disjoint blocks.
/// Blocks are sorted internally and ordered by their smallest element, so
/// equality is structural.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SetPartition {
    blocks: Vec<Vec<usize>>,
    len: usize,
}

impl SetPartition {
    /// Builds the partition encoded by a restricted growth string.
    pub fn from_rgs(codes: &[usize]) -> Self {
        let mut blocks: Vec<Vec<usize>> = Vec::new();
        for (i, &c) in codes.iter().enumerate() {
            if c == blocks.len() {
                blocks.push(Vec::new());
            }
            blocks[c].push(i);
        }
        SetPartition {
            blocks,
            len: codes.len(),
        }
    }

    /// Canonicalises an arbitrary list of blocks. Fails unless the blocks are
    /// nonempty, disjoint and cover `0..len`.
    pub fn from_blocks(mut blocks: Vec<Vec<usize>>, len: usize) -> Result<Self> {
        let mut seen = vec![false; len];
        for b in &mut blocks {
            if b.is_empty() {
                return Err(Error::InvalidArgument("empty block".into()));
            }
            b.sort_unstable();
            for &i in b.iter() {
                if i >= len || seen[i] {
                    return Err(Error::InvalidArgument(format!(
                        "position {i} out of range or repeated"
                    )));
                }
                seen[i] = true;
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::InvalidArgument("blocks do not cover all positions".into()));
        }
        blocks.sort_unstable_by_key(|b| b[0]);
        Ok(SetPartition { blocks, len })
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    /// Number of partitioned positions.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// The blocks applied to a concrete index sequence.
    pub fn apply(&self, seq: &[SiteRef]) -> Vec<IndexSequence> {
        debug_assert_eq!(seq.len(), self.len);
        self.blocks
            .iter()
            .map(|b| b.iter().map(|&i| seq[i]).collect())
            .collect()
    }
}

impl fmt::Display for SetPartition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in &self.blocks {
            f.write_str("{")?;
            for (j, i) in b.iter().enumerate() {
                if j > 0 {
                    f.write_str(",")?;
                }
                write!(f, "{}", i + 1)?;
            }
            f.write_str("}")?;
        }
        Ok(())
    }
}

/// Bell number via `B(n+1) = sum_k C(n,k) B(k)`. Saturates at `u128::MAX`.
pub fn bell_number(n: usize) -> u128 {
    let mut bells: Vec<u128> = vec![1];
    for m in 0..n {
        let mut binom: u128 = 1;
        let mut acc: u128 = 0;
        for (k, &b) in bells.iter().enumerate() {
            acc = acc.saturating_add(binom.saturating_mul(b));
            binom = binom.saturating_mul((m - k) as u128) / (k as u128 + 1);
        }
        bells.push(acc);
    }
    bells[n]
}

fn check_guard(n: usize, limit: usize) -> Result<()> {
    if n > limit {
        return Err(Error::CombinatorialBlowup {
            n,
            bell: bell_number(n),
            limit,
        });
    }
    Ok(())
}

/// Cursor over restricted growth strings of length `n` in lexicographic order.
/// Useful when only block labels are needed and allocation per item matters.
#[derive(Clone, Debug)]
pub struct RgsCursor {
    codes: Vec<usize>,
    // prefix_max[i] = max(codes[..i]) for i >= 1
    prefix_max: Vec<usize>,
    fresh: bool,
}

impl RgsCursor {
    pub fn new(n: usize, limit: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("partitions need n >= 1".into()));
        }
        check_guard(n, limit)?;
        Ok(RgsCursor {
            codes: vec![0; n],
            prefix_max: vec![0; n],
            fresh: true,
        })
    }

    /// Moves to the next string; the first call lands on `0...0`.
    pub fn advance(&mut self) -> Option<&[usize]> {
        if self.fresh {
            self.fresh = false;
            return Some(&self.codes);
        }
        let n = self.codes.len();
        for j in (1..n).rev() {
            if self.codes[j] <= self.prefix_max[j] {
                self.codes[j] += 1;
                let mx = self.prefix_max[j].max(self.codes[j]);
                for i in j + 1..n {
                    self.codes[i] = 0;
                    self.prefix_max[i] = mx;
                }
                return Some(&self.codes);
            }
        }
        None
    }
}

/// All partitions of `{0..n}` in canonical order.
#[derive(Clone, Debug)]
pub struct Partitions {
    cursor: RgsCursor,
}

impl Iterator for Partitions {
    type Item = SetPartition;

    fn next(&mut self) -> Option<SetPartition> {
        self.cursor.advance().map(SetPartition::from_rgs)
    }
}

/// Streams the Bell(n) partitions of `n` elements, refusing `n` above the
/// default guard.
pub fn enumerate_partitions(n: usize) -> Result<Partitions> {
    enumerate_partitions_with_limit(n, DEFAULT_MAX_ELEMENTS)
}

pub fn enumerate_partitions_with_limit(n: usize, limit: usize) -> Result<Partitions> {
    Ok(Partitions {
        cursor: RgsCursor::new(n, limit)?,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum WalkState {
    Fresh,
    Running,
    Done,
}

/// Partitions of `J_1 + ... + J_L + J'` in which no block lies entirely inside
/// a single group `J_l`. Blocks inside the tail `J'` are allowed.
///
/// This is a depth-first walk over growth strings that prunes a prefix as
/// soon as the blocks still confined to one group outnumber the positions
/// that could join them.
#[derive(Clone, Debug)]
pub struct RestrictedPartitions {
    group_of: Vec<Option<usize>>,
    group_end: Vec<usize>,
    codes: Vec<usize>,
    state: WalkState,
}

impl RestrictedPartitions {
    fn new(group_lens: &[usize], tail_len: usize) -> Self {
        let mut group_of = Vec::new();
        let mut group_end = Vec::new();
        let mut start = 0;
        for (g, &len) in group_lens.iter().enumerate() {
            for _ in 0..len {
                group_of.push(Some(g));
                group_end.push(start + len);
            }
            start += len;
        }
        let n = start + tail_len;
        for _ in 0..tail_len {
            group_of.push(None);
            group_end.push(n);
        }
        RestrictedPartitions {
            group_of,
            group_end,
            codes: Vec::with_capacity(n),
            state: WalkState::Fresh,
        }
    }

    fn n(&self) -> usize {
        self.group_of.len()
    }

    /// Necessary condition for the current prefix to extend to an admissible
    /// partition; exact once the prefix is complete.
    fn feasible(&self) -> bool {
        let k = self.codes.len();
        let n = self.n();
        let nblocks = self.codes.iter().max().map_or(0, |m| m + 1);
        // per block: Some(g) while every member lies in group g, None once mixed
        let mut confined: Vec<Option<Option<usize>>> = vec![None; nblocks];
        for (i, &c) in self.codes.iter().enumerate() {
            let g = self.group_of[i];
            confined[c] = match confined[c] {
                None => Some(g),
                Some(prev) if prev == g => Some(g),
                Some(_) => Some(None),
            };
        }
        let current_end = if k < n { self.group_end[k] } else { n };
        let current_group = if k < n { self.group_of[k] } else { None };
        let mut pending = 0usize;
        let mut pending_current = 0usize;
        for c in confined.into_iter().flatten().flatten() {
            pending += 1;
            if current_group == Some(c) {
                pending_current += 1;
            }
        }
        pending <= n - k && pending_current <= n - current_end
    }

    fn bump(&mut self) -> bool {
        while let Some(last) = self.codes.pop() {
            if self.codes.is_empty() {
                return false;
            }
            let limit = self.codes.iter().max().map_or(0, |m| m + 1);
            if last < limit {
                self.codes.push(last + 1);
                return true;
            }
        }
        false
    }
}

impl Iterator for RestrictedPartitions {
    type Item = SetPartition;

    fn next(&mut self) -> Option<SetPartition> {
        match self.state {
            WalkState::Done => return None,
            WalkState::Fresh => {
                self.state = WalkState::Running;
                if self.n() == 0 {
                    self.state = WalkState::Done;
                    return Some(SetPartition::from_rgs(&[]));
                }
                self.codes.push(0);
            }
            WalkState::Running => {
                if !self.bump() {
                    self.state = WalkState::Done;
                    return None;
                }
            }
        }
        loop {
            if self.feasible() {
                if self.codes.len() == self.n() {
                    return Some(SetPartition::from_rgs(&self.codes));
                }
                self.codes.push(0);
            } else if !self.bump() {
                self.state = WalkState::Done;
                return None;
            }
        }
    }
}

/// Restricted partitions of the concatenation `groups[0] + ... + tail`.
/// Positions are numbered by their place in the concatenation.
pub fn enumerate_restricted(
    groups: &[IndexSequence],
    tail: &IndexSequence,
) -> Result<RestrictedPartitions> {
    enumerate_restricted_with_limit(groups, tail, DEFAULT_MAX_ELEMENTS)
}

pub fn enumerate_restricted_with_limit(
    groups: &[IndexSequence],
    tail: &IndexSequence,
    limit: usize,
) -> Result<RestrictedPartitions> {
    let lens: Vec<usize> = groups.iter().map(|g| g.len()).collect();
    restricted_by_lengths(&lens, tail.len(), limit)
}

/// Same as [`enumerate_restricted`] when only the group sizes matter.
pub fn restricted_by_lengths(
    group_lens: &[usize],
    tail_len: usize,
    limit: usize,
) -> Result<RestrictedPartitions> {
    let n = group_lens.iter().sum::<usize>() + tail_len;
    check_guard(n, limit)?;
    Ok(RestrictedPartitions::new(group_lens, tail_len))
}

fn factorial_u128(k: usize) -> Result<u128> {
    (1..=k as u128).try_fold(1u128, |acc, i| acc.checked_mul(i).ok_or(Error::ArithmeticOverflow))
}

/// `sum over partitions pi of {1..n} of prod_{S in pi} |S|!`, exactly.
pub fn factorial_partition_sum(n: usize) -> Result<u128> {
    factorial_partition_sum_with_limit(n, DEFAULT_MAX_ELEMENTS)
}

pub fn factorial_partition_sum_with_limit(n: usize, limit: usize) -> Result<u128> {
    let facts: Vec<u128> = (0..=n).map(factorial_u128).collect::<Result<_>>()?;
    let mut cursor = RgsCursor::new(n, limit)?;
    let mut sizes = vec![0usize; n];
    let mut total: u128 = 0;
    while let Some(codes) = cursor.advance() {
        sizes.iter_mut().for_each(|s| *s = 0);
        let mut used = 0;
        for &c in codes {
            sizes[c] += 1;
            used = used.max(c + 1);
        }
        let mut prod: u128 = 1;
        for &s in &sizes[..used] {
            prod = prod.checked_mul(facts[s]).ok_or(Error::ArithmeticOverflow)?;
        }
        total = total.checked_add(prod).ok_or(Error::ArithmeticOverflow)?;
    }
    Ok(total)
}

/// Checks `sum_pi prod |S|! <= (2n)! e^{2n}` over partitions of `2n` elements.
pub fn verify_comb_est(n: usize) -> Result<BoundReport> {
    verify_comb_est_with_limit(n, DEFAULT_MAX_ELEMENTS)
}

pub fn verify_comb_est_with_limit(n: usize, limit: usize) -> Result<BoundReport> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be positive".into()));
    }
    let lhs = factorial_partition_sum_with_limit(2 * n, limit)?;
    let fact = factorial_u128(2 * n)? as f64;
    let rhs = fact * (2.0 * n as f64).exp();
    Ok(BoundReport::new("comb_est", lhs as f64, rhs)
        .with_order(None, Some(n))
        .with_witness("lhs_exact", lhs.to_string()))
}
