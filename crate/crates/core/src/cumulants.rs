//! Moments, cumulants and Wick polynomials over an abstract moment source.
//!
//! Cumulants follow the anchored recursion
//! `k[I] = E[y^I] - sum_{E: x in E, E != I} E[y^{I\E}] k[E]`
//! with the anchor `x` taken as the first entry of the canonically sorted
//! sequence, and Wick polynomials follow
//! `:y^I: = y^I - sum_{E != I} E[y^{I\E}] :y^E:`.

use std::collections::HashMap;
use std::sync::RwLock;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::partitions::{
    enumerate_partitions_with_limit, restricted_by_lengths, IndexSequence, SiteRef,
    DEFAULT_MAX_ELEMENTS,
};
use crate::report::BoundReport;

/// A source of joint moments `E[y^I]`.
///
/// Implementations must return `1` for the empty sequence, be invariant
/// under permutations of `I`, and satisfy `moment(I*) = moment(I)*`.
pub trait MomentProvider: Send + Sync {
    fn moment(&self, index: &[SiteRef]) -> Result<C64>;

    /// Largest `|I|` for which moments are available.
    fn max_order(&self) -> usize;

    /// Cumulant in closed form, when the model knows it.
    fn known_cumulant(&self, _index: &[SiteRef]) -> Option<C64> {
        None
    }

    /// True when every cumulant of this order is identically zero.
    fn cumulant_vanishes(&self, _order: usize) -> bool {
        false
    }

    /// Lattice distance beyond which any two arguments make a cumulant vanish.
    fn correlation_range(&self) -> Option<u64> {
        None
    }

    /// `ln E[exp(sum_j lambda_j y_{vars[j]})]`, when available in closed form.
    fn log_generating_function(&self, _vars: &[SiteRef], _lambda: &[f64]) -> Option<C64> {
        None
    }
}

impl<T: MomentProvider + ?Sized> MomentProvider for &T {
    fn moment(&self, index: &[SiteRef]) -> Result<C64> {
        (**self).moment(index)
    }
    fn max_order(&self) -> usize {
        (**self).max_order()
    }
    fn known_cumulant(&self, index: &[SiteRef]) -> Option<C64> {
        (**self).known_cumulant(index)
    }
    fn cumulant_vanishes(&self, order: usize) -> bool {
        (**self).cumulant_vanishes(order)
    }
    fn correlation_range(&self) -> Option<u64> {
        (**self).correlation_range()
    }
    fn log_generating_function(&self, vars: &[SiteRef], lambda: &[f64]) -> Option<C64> {
        (**self).log_generating_function(vars, lambda)
    }
}

/// Anything that hands out joint cumulants.
pub trait CumulantSource: Sync {
    fn cumulant(&self, index: &[SiteRef]) -> Result<C64>;
}

/// Cumulants given by a closure.
pub struct FnCumulants<F>(pub F);

impl<F> CumulantSource for FnCumulants<F>
where
    F: Fn(&[SiteRef]) -> C64 + Sync,
{
    fn cumulant(&self, index: &[SiteRef]) -> Result<C64> {
        Ok((self.0)(index))
    }
}

fn sorted(index: &[SiteRef]) -> Vec<SiteRef> {
    let mut v = index.to_vec();
    v.sort_unstable();
    v
}

/// Memoised cumulants of a [`MomentProvider`].
///
/// Values are stored under the sorted sequence, so lookups are permutation
/// invariant. Concurrent readers may race to fill the same key; the writes
/// are identical, so the race is benign.
pub struct CumulantTable<'p> {
    provider: &'p dyn MomentProvider,
    cumulants: RwLock<HashMap<Vec<SiteRef>, C64>>,
    moments: RwLock<HashMap<Vec<SiteRef>, C64>>,
    closed_forms: bool,
    max_elements: usize,
}

impl<'p> CumulantTable<'p> {
    /// Table that always runs the moment recursion.
    pub fn new(provider: &'p dyn MomentProvider) -> Self {
        CumulantTable {
            provider,
            cumulants: RwLock::new(HashMap::new()),
            moments: RwLock::new(HashMap::new()),
            closed_forms: false,
            max_elements: DEFAULT_MAX_ELEMENTS,
        }
    }

    /// Table that prefers the provider's closed-form cumulants and skips
    /// orders the provider declares identically zero.
    pub fn with_closed_forms(provider: &'p dyn MomentProvider) -> Self {
        CumulantTable {
            closed_forms: true,
            ..CumulantTable::new(provider)
        }
    }

    /// Overrides the partition size guard used by expansions over this table.
    pub fn with_max_elements(mut self, max_elements: usize) -> Self {
        self.max_elements = max_elements;
        self
    }

    pub fn provider(&self) -> &'p dyn MomentProvider {
        self.provider
    }

    pub fn max_elements(&self) -> usize {
        self.max_elements
    }

    /// Whether cumulants of `order` are known to vanish.
    pub fn vanishes(&self, order: usize) -> bool {
        self.closed_forms && self.provider.cumulant_vanishes(order)
    }

    pub fn uses_closed_forms(&self) -> bool {
        self.closed_forms
    }

    fn check_order(&self, order: usize) -> Result<()> {
        let max = self.provider.max_order();
        if order > max {
            return Err(Error::OrderOverflow { order, max });
        }
        Ok(())
    }

    /// Memoised moment `E[y^I]`.
    pub fn moment(&self, index: &[SiteRef]) -> Result<C64> {
        if index.is_empty() {
            return Ok(C64::new(1.0, 0.0));
        }
        self.check_order(index.len())?;
        self.moment_sorted(sorted(index))
    }

    fn moment_sorted(&self, key: Vec<SiteRef>) -> Result<C64> {
        if key.is_empty() {
            return Ok(C64::new(1.0, 0.0));
        }
        if let Some(v) = self.moments.read().unwrap().get(&key) {
            return Ok(*v);
        }
        let v = self.provider.moment(&key)?;
        self.moments.write().unwrap().insert(key, v);
        Ok(v)
    }

    /// Joint cumulant `k[y_I]`, `|I| >= 1`.
    pub fn cumulant(&self, index: &[SiteRef]) -> Result<C64> {
        if index.is_empty() {
            return Err(Error::InvalidArgument("cumulant of an empty sequence".into()));
        }
        self.check_order(index.len())?;
        if self.closed_forms {
            if self.provider.cumulant_vanishes(index.len()) {
                return Ok(C64::new(0.0, 0.0));
            }
            if let Some(v) = self.provider.known_cumulant(index) {
                return Ok(v);
            }
        }
        self.cumulant_sorted(sorted(index))
    }

    fn cumulant_sorted(&self, key: Vec<SiteRef>) -> Result<C64> {
        if let Some(v) = self.cumulants.read().unwrap().get(&key) {
            return Ok(*v);
        }
        let n = key.len();
        if n > 63 {
            return Err(Error::InvalidArgument("cumulant order too large".into()));
        }
        let anchor = key[0];
        let rest = &key[1..];
        let full: u64 = (1u64 << (n - 1)) - 1;
        let mut value = self.moment_sorted(key.clone())?;
        let mut inner = Vec::with_capacity(n);
        let mut outer = Vec::with_capacity(n);
        for mask in 0..full {
            inner.clear();
            outer.clear();
            inner.push(anchor);
            for (j, r) in rest.iter().enumerate() {
                if mask >> j & 1 == 1 {
                    inner.push(*r);
                } else {
                    outer.push(*r);
                }
            }
            let m = self.moment_sorted(outer.clone())?;
            if m == C64::new(0.0, 0.0) {
                continue;
            }
            value -= m * self.cumulant_sorted(inner.clone())?;
        }
        self.cumulants.write().unwrap().insert(key, value);
        Ok(value)
    }
}

impl CumulantSource for CumulantTable<'_> {
    fn cumulant(&self, index: &[SiteRef]) -> Result<C64> {
        CumulantTable::cumulant(self, index)
    }
}

/// Which entry the anchored recursion singles out.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Anchor {
    First,
    Last,
    /// Position taken modulo the current length.
    Position(usize),
}

impl Anchor {
    fn pick(self, len: usize) -> usize {
        match self {
            Anchor::First => 0,
            Anchor::Last => len - 1,
            Anchor::Position(p) => p % len,
        }
    }
}

/// Cumulant by the anchored recursion without memoisation or sorting, with
/// the anchor chosen by `anchor` at every level. Exponential cost; meant for
/// checking that the result does not depend on the anchor.
pub fn cumulant_with_anchor(
    provider: &dyn MomentProvider,
    index: &[SiteRef],
    anchor: Anchor,
) -> Result<C64> {
    let n = index.len();
    if n == 0 {
        return Err(Error::InvalidArgument("cumulant of an empty sequence".into()));
    }
    if n > provider.max_order() {
        return Err(Error::OrderOverflow {
            order: n,
            max: provider.max_order(),
        });
    }
    let a = anchor.pick(n);
    let others: Vec<usize> = (0..n).filter(|&i| i != a).collect();
    let full: u64 = (1u64 << (n - 1)) - 1;
    let mut value = provider.moment(index)?;
    for mask in 0..full {
        let mut inner = Vec::new();
        let mut outer = Vec::new();
        for (j, &i) in others.iter().enumerate() {
            if mask >> j & 1 == 1 {
                inner.push(i);
            } else {
                outer.push(i);
            }
        }
        inner.push(a);
        inner.sort_unstable();
        let inner_seq: Vec<SiteRef> = inner.iter().map(|&i| index[i]).collect();
        let outer_seq: Vec<SiteRef> = outer.iter().map(|&i| index[i]).collect();
        value -= provider.moment(&outer_seq)? * cumulant_with_anchor(provider, &inner_seq, anchor)?;
    }
    Ok(value)
}

/// `E[y^I] = sum over partitions pi of I of prod_{A in pi} k[y_A]`.
pub fn moments_from_cumulants(source: &dyn CumulantSource, index: &[SiteRef]) -> Result<C64> {
    moments_from_cumulants_with_limit(source, index, DEFAULT_MAX_ELEMENTS)
}

pub fn moments_from_cumulants_with_limit(
    source: &dyn CumulantSource,
    index: &[SiteRef],
    limit: usize,
) -> Result<C64> {
    if index.is_empty() {
        return Ok(C64::new(1.0, 0.0));
    }
    let mut total = C64::new(0.0, 0.0);
    let mut block = Vec::with_capacity(index.len());
    for p in enumerate_partitions_with_limit(index.len(), limit)? {
        let mut prod = C64::new(1.0, 0.0);
        for b in p.blocks() {
            block.clear();
            block.extend(b.iter().map(|&i| index[i]));
            prod *= source.cumulant(&block)?;
        }
        total += prod;
    }
    Ok(total)
}

/// A moment provider defined through its cumulants.
pub struct MomentsFromCumulants<S> {
    pub source: S,
    pub max_order: usize,
}

impl<S: CumulantSource + Send> MomentProvider for MomentsFromCumulants<S> {
    fn moment(&self, index: &[SiteRef]) -> Result<C64> {
        if index.len() > self.max_order {
            return Err(Error::OrderOverflow {
                order: index.len(),
                max: self.max_order,
            });
        }
        moments_from_cumulants(&self.source, index)
    }

    fn max_order(&self) -> usize {
        self.max_order
    }
}

/// The Wick polynomial `:y^I:` written out as `sum_j c_j y^{F_j}`.
#[derive(Clone, Debug, PartialEq)]
pub struct WickExpansion {
    /// First term is the leading monomial `y^I` with coefficient 1; the rest
    /// are sorted by decreasing degree. Monomials are canonical (sorted).
    pub terms: Vec<(C64, IndexSequence)>,
}

impl WickExpansion {
    pub fn degree(&self) -> usize {
        self.terms.first().map_or(0, |t| t.1.len())
    }

    /// Value on one realisation, `value(r)` giving `y_r`.
    pub fn evaluate(&self, value: impl Fn(SiteRef) -> C64) -> C64 {
        self.terms
            .iter()
            .map(|(c, mono)| mono.iter().fold(*c, |acc, &r| acc * value(r)))
            .sum()
    }

    /// Term-by-term expectation.
    pub fn expectation(&self, provider: &dyn MomentProvider) -> Result<C64> {
        let mut total = C64::new(0.0, 0.0);
        for (c, mono) in &self.terms {
            let m = if mono.is_empty() {
                C64::new(1.0, 0.0)
            } else {
                provider.moment(mono)?
            };
            total += c * m;
        }
        Ok(total)
    }

    /// Coefficient of the given monomial (in any order), zero if absent.
    pub fn coefficient(&self, monomial: &[SiteRef]) -> C64 {
        let key = sorted(monomial);
        self.terms
            .iter()
            .find(|(_, m)| m.as_slice() == key.as_slice())
            .map_or(C64::new(0.0, 0.0), |t| t.0)
    }
}

/// Expands `:y^I:` into monomials of the underlying variables.
pub fn wick_expansion(provider: &dyn MomentProvider, index: &[SiteRef]) -> Result<WickExpansion> {
    let n = index.len();
    if n > provider.max_order() {
        return Err(Error::OrderOverflow {
            order: n,
            max: provider.max_order(),
        });
    }
    if n > DEFAULT_MAX_ELEMENTS {
        return Err(Error::CombinatorialBlowup {
            n,
            bell: crate::partitions::bell_number(n),
            limit: DEFAULT_MAX_ELEMENTS,
        });
    }
    let size = 1usize << n;
    let subseq = |mask: usize| -> Vec<SiteRef> {
        (0..n).filter(|j| mask >> j & 1 == 1).map(|j| index[j]).collect()
    };
    let mut moments = vec![C64::new(0.0, 0.0); size];
    moments[0] = C64::new(1.0, 0.0);
    for (mask, m) in moments.iter_mut().enumerate().skip(1) {
        *m = provider.moment(&subseq(mask))?;
    }
    // expansions[mask] = sparse list (monomial mask, coefficient) of :y^mask:
    let mut expansions: Vec<Vec<(usize, C64)>> = vec![Vec::new(); size];
    let mut scratch = vec![C64::new(0.0, 0.0); size];
    let mut order: Vec<usize> = (0..size).collect();
    order.sort_by_key(|m| m.count_ones());
    for &mask in &order {
        let mut touched = vec![mask];
        scratch[mask] = C64::new(1.0, 0.0);
        // proper submasks of mask, including 0
        let mut sub = (mask.wrapping_sub(1)) & mask;
        loop {
            if sub != mask {
                let weight = moments[mask ^ sub];
                if weight != C64::new(0.0, 0.0) {
                    for &(mono, c) in &expansions[sub] {
                        if scratch[mono] == C64::new(0.0, 0.0) {
                            touched.push(mono);
                        }
                        scratch[mono] -= weight * c;
                    }
                }
            }
            if sub == 0 {
                break;
            }
            sub = (sub - 1) & mask;
        }
        touched.sort_unstable();
        touched.dedup();
        let mut terms = Vec::with_capacity(touched.len());
        for t in touched {
            let c = std::mem::replace(&mut scratch[t], C64::new(0.0, 0.0));
            if c != C64::new(0.0, 0.0) || t == mask {
                terms.push((t, c));
            }
        }
        expansions[mask] = terms;
        if mask == size - 1 {
            break;
        }
    }
    let full = size - 1;
    let mut merged: HashMap<Vec<SiteRef>, C64> = HashMap::new();
    for &(mono, c) in &expansions[full] {
        *merged.entry(sorted(&subseq(mono))).or_insert(C64::new(0.0, 0.0)) += c;
    }
    let leading_key = sorted(index);
    let leading = merged.remove(&leading_key).unwrap_or(C64::new(1.0, 0.0));
    let mut rest: Vec<(C64, IndexSequence)> = merged
        .into_iter()
        .filter(|(_, c)| *c != C64::new(0.0, 0.0))
        .map(|(k, c)| (c, IndexSequence::new(k)))
        .collect();
    rest.sort_by(|a, b| b.1.len().cmp(&a.1.len()).then_with(|| a.1.as_slice().cmp(b.1.as_slice())));
    let mut terms = vec![(leading, IndexSequence::new(leading_key))];
    terms.extend(rest);
    Ok(WickExpansion { terms })
}

/// `E[prod_l :y^{J_l}: y^{J'}]` as the cumulant expansion over partitions
/// with no block inside a single `J_l`.
pub fn wick_product_expectation(
    table: &CumulantTable<'_>,
    groups: &[IndexSequence],
    tail: &IndexSequence,
) -> Result<C64> {
    let seq = IndexSequence::concat(groups.iter().chain(std::iter::once(tail)));
    let max = table.provider().max_order();
    if seq.len() > max {
        return Err(Error::OrderOverflow {
            order: seq.len(),
            max,
        });
    }
    let lens: Vec<usize> = groups.iter().map(|g| g.len()).collect();
    let mut total = C64::new(0.0, 0.0);
    let mut block = Vec::with_capacity(seq.len());
    for p in restricted_by_lengths(&lens, tail.len(), table.max_elements())? {
        let mut prod = C64::new(1.0, 0.0);
        for b in p.blocks() {
            if table.vanishes(b.len()) {
                prod = C64::new(0.0, 0.0);
                break;
            }
            block.clear();
            block.extend(b.iter().map(|&i| seq[i]));
            prod *= table.cumulant(&block)?;
            if prod == C64::new(0.0, 0.0) {
                break;
            }
        }
        total += prod;
    }
    Ok(total)
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Compares the finite-difference derivative `d^I ln G_m(0)` with the
/// cumulant from the recursion. The report's `lhs` is the discrepancy and
/// `rhs` the budget `10 h^2 max(1,|k|) + 4 * 2^|I| * eps / h^|I|`.
pub fn generating_check(provider: &dyn MomentProvider, index: &[SiteRef], h: f64) -> Result<BoundReport> {
    if index.is_empty() {
        return Err(Error::InvalidArgument("empty index".into()));
    }
    if !(h > 0.0) {
        return Err(Error::InvalidArgument("step must be positive".into()));
    }
    let mut vars: Vec<SiteRef> = Vec::new();
    let mut mult: Vec<usize> = Vec::new();
    for r in index {
        match vars.iter().position(|v| v == r) {
            Some(i) => mult[i] += 1,
            None => {
                vars.push(*r);
                mult.push(1);
            }
        }
    }
    let zero = vec![0.0; vars.len()];
    provider
        .log_generating_function(&vars, &zero)
        .ok_or(Error::NoGeneratingFunction)?;

    // tensor product of central difference stencils, one per variable
    let mut stencils: Vec<Vec<(f64, f64)>> = Vec::new();
    for &k in &mult {
        let st = (0..=k)
            .map(|j| {
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                (sign * binomial(k, j), (k as f64 / 2.0 - j as f64) * h)
            })
            .collect();
        stencils.push(st);
    }
    let mut idx = vec![0usize; vars.len()];
    let mut lambda = vec![0.0; vars.len()];
    let mut acc = C64::new(0.0, 0.0);
    loop {
        let mut w = 1.0;
        for (v, &j) in idx.iter().enumerate() {
            let (c, off) = stencils[v][j];
            w *= c;
            lambda[v] = off;
        }
        let f = provider
            .log_generating_function(&vars, &lambda)
            .ok_or(Error::NoGeneratingFunction)?;
        acc += f * w;
        // odometer
        let mut v = 0;
        while v < idx.len() {
            idx[v] += 1;
            if idx[v] < stencils[v].len() {
                break;
            }
            idx[v] = 0;
            v += 1;
        }
        if v == idx.len() {
            break;
        }
    }
    let order = index.len() as i32;
    let fd = acc / h.powi(order);
    let kappa = CumulantTable::new(provider).cumulant(index)?;
    let budget = 10.0 * h * h * kappa.norm().max(1.0)
        + 4.0 * 2f64.powi(order) * f64::EPSILON / h.powi(order);
    Ok(BoundReport::new("generating_check", (fd - kappa).norm(), budget)
        .with_order(None, Some(index.len()))
        .with_witness("finite_difference", vec![fd.re, fd.im])
        .with_witness("cumulant", vec![kappa.re, kappa.im])
        .with_witness("index", IndexSequence::from(index).to_string())
        .with_constant("h", h))
}
