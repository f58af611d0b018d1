//! `l_p`-clustering norms and the joint-cumulant bounds built on them.
//!
//! Every sum over the countable index set runs over a finite [`IndexSet`];
//! suprema over anchor points run over its anchor list. For translation
//! invariant fields a single anchor gives the exact supremum.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cumulants::{wick_product_expectation, CumulantTable, MomentProvider};
use crate::error::{Error, Result};
use crate::fields::{FiniteDiscreteField, SpectralGaussianField};
use crate::partitions::{enumerate_partitions, IndexSequence, SiteRef};
use crate::report::BoundReport;

/// The constant `gamma = 2e` of the joint-cumulant bounds.
pub const GAMMA: f64 = 2.0 * std::f64::consts::E;

/// An exponent `p` in `[1, inf]`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "ExponentRepr", into = "ExponentRepr")]
pub struct Exponent(f64);

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum ExponentRepr {
    Num(f64),
    Text(String),
}

impl TryFrom<ExponentRepr> for Exponent {
    type Error = Error;
    fn try_from(r: ExponentRepr) -> Result<Self> {
        match r {
            ExponentRepr::Num(p) => Exponent::new(p),
            ExponentRepr::Text(s) => s.parse(),
        }
    }
}

impl From<Exponent> for ExponentRepr {
    fn from(p: Exponent) -> Self {
        if p.is_infinite() {
            ExponentRepr::Text("inf".into())
        } else {
            ExponentRepr::Num(p.0)
        }
    }
}

impl Exponent {
    pub const ONE: Exponent = Exponent(1.0);
    pub const TWO: Exponent = Exponent(2.0);
    pub const INFINITY: Exponent = Exponent(f64::INFINITY);

    pub fn new(p: f64) -> Result<Self> {
        if p >= 1.0 {
            Ok(Exponent(p))
        } else {
            Err(Error::InvalidArgument(format!("exponent {p} is below 1")))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_infinite(self) -> bool {
        self.0.is_infinite()
    }

    /// `|z|^p`, the summand of an `l_p` norm.
    fn power(self, v: f64) -> f64 {
        if self.0 == 1.0 {
            v
        } else if self.0 == 2.0 {
            v * v
        } else {
            v.powf(self.0)
        }
    }

    fn root(self, v: f64) -> f64 {
        if self.0 == 1.0 {
            v
        } else if self.0 == 2.0 {
            v.sqrt()
        } else {
            v.powf(1.0 / self.0)
        }
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_infinite() {
            f.write_str("inf")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

impl FromStr for Exponent {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "inf" | "infinity" | "Infinity" => Ok(Exponent::INFINITY),
            t => Exponent::new(
                t.parse()
                    .map_err(|_| Error::InvalidArgument(format!("bad exponent {t:?}")))?,
            ),
        }
    }
}

/// A finite stand-in for the index set of a field.
#[derive(Clone, Debug, PartialEq)]
pub struct IndexSet {
    /// Points summed over.
    pub refs: Vec<SiteRef>,
    /// Points the supremum is taken over.
    pub anchors: Vec<SiteRef>,
    /// True when `refs` is the whole index set, so sums are not truncated.
    pub exhaustive: bool,
    /// Lattice distance from every anchor to the edge of the box.
    pub reach: Option<u64>,
    pub desc: String,
}

impl IndexSet {
    pub fn new(refs: Vec<SiteRef>, anchors: Vec<SiteRef>, exhaustive: bool, desc: impl Into<String>) -> Self {
        IndexSet {
            refs,
            anchors,
            exhaustive,
            reach: None,
            desc: desc.into(),
        }
    }

    /// Every site of a finite field (restricted to component `comp` when
    /// given), with conjugates when the field is complex. All points are
    /// anchors.
    pub fn discrete(field: &FiniteDiscreteField, comp: Option<u16>) -> Self {
        let refs: Vec<SiteRef> = field
            .site_refs()
            .into_iter()
            .filter(|r| comp.is_none_or(|c| r.site.comp == c))
            .collect();
        let desc = match comp {
            Some(c) => format!("all {} points of component {c}", refs.len()),
            None => format!("all {} points", refs.len()),
        };
        IndexSet::new(refs.clone(), refs, true, desc)
    }

    /// The box `|x| <= radius` of the given components of a translation
    /// invariant field, anchored at the origin of each component.
    pub fn lattice(comps: &[u16], radius: u64, complex: bool) -> Self {
        let r = radius as i64;
        let mut refs = Vec::new();
        let mut anchors = Vec::new();
        for &c in comps {
            anchors.push(SiteRef::at(c, 0));
            if complex {
                anchors.push(SiteRef::at(c, 0).conjugate());
            }
            for x in -r..=r {
                refs.push(SiteRef::at(c, x));
                if complex {
                    refs.push(SiteRef::at(c, x).conjugate());
                }
            }
        }
        IndexSet {
            refs,
            anchors,
            exhaustive: false,
            reach: Some(radius),
            desc: format!("|x|<={radius}, components {comps:?}"),
        }
    }

    /// Whether sums of order-`n` cumulants over this set miss nothing.
    fn tail_for(&self, provider: &dyn MomentProvider, n: usize) -> Tail {
        if self.exhaustive || n <= 1 {
            return Tail::Exact;
        }
        match (provider.correlation_range(), self.reach) {
            (Some(range), Some(reach)) if range * (n as u64 - 1) <= reach => Tail::Exact,
            _ => Tail::Unquantified,
        }
    }
}

/// An anchor followed by any `k - 1` points of the set: every `k`-tuple up
/// to a lattice translation.
pub fn anchored_tuples(set: &IndexSet, k: usize) -> Vec<Vec<SiteRef>> {
    if k == 0 {
        return vec![vec![]];
    }
    let rest = all_tuples(&set.refs, k - 1);
    set.anchors
        .iter()
        .flat_map(|a| {
            rest.iter().map(move |t| {
                let mut v = Vec::with_capacity(k);
                v.push(*a);
                v.extend_from_slice(t);
                v
            })
        })
        .collect()
}

/// Sum (or maximum) of `f` over all `k`-tuples of `refs`. The outer
/// coordinate is spread over threads; partial results are combined in a
/// fixed order, so the value does not depend on scheduling.
fn tuple_reduce<F>(refs: &[SiteRef], k: usize, max: bool, f: F) -> Result<f64>
where
    F: Fn(&[SiteRef]) -> Result<f64> + Sync + Send,
{
    if k == 0 {
        return f(&[]);
    }
    let partials = refs
        .par_iter()
        .map(|&first| {
            let mut acc = 0.0f64;
            let mut idx = vec![0usize; k - 1];
            let mut tuple = vec![first; k];
            loop {
                for (j, &i) in idx.iter().enumerate() {
                    tuple[j + 1] = refs[i];
                }
                let v = f(&tuple)?;
                acc = if max { acc.max(v) } else { acc + v };
                let mut j = 0;
                while j < idx.len() {
                    idx[j] += 1;
                    if idx[j] < refs.len() {
                        break;
                    }
                    idx[j] = 0;
                    j += 1;
                }
                if j == idx.len() {
                    break;
                }
            }
            Ok(acc)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(if max {
        partials.into_iter().fold(0.0, f64::max)
    } else {
        partials.iter().sum()
    })
}

/// All `k`-tuples of `refs`, in odometer order.
pub fn all_tuples(refs: &[SiteRef], k: usize) -> Vec<Vec<SiteRef>> {
    let mut out = vec![Vec::new()];
    for _ in 0..k {
        out = out
            .into_iter()
            .flat_map(|t| {
                refs.iter().map(move |r| {
                    let mut u = t.clone();
                    u.push(*r);
                    u
                })
            })
            .collect();
    }
    out
}

fn describe(tuple: &[SiteRef]) -> Vec<String> {
    tuple.iter().map(|r| r.to_string()).collect()
}

fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |a, k| a * k as f64)
}

/// How much of an infinite sum a truncated norm accounts for.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tail {
    /// Nothing outside the box contributes.
    Exact,
    /// Contributions outside the box were dropped without an estimate.
    Unquantified,
}

/// One truncated clustering norm.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusteringReport {
    pub order: usize,
    pub p: Exponent,
    pub value: f64,
    pub tail: Tail,
    /// Anchor attaining the supremum.
    pub anchor: Option<SiteRef>,
    #[serde(rename = "box")]
    pub box_desc: String,
}

/// `||phi||_p^{(n)} = sup_{x0} [sum_{x in Z^{n-1}} |k[phi(x0), phi(x_1), ...]|^p]^{1/p}`,
/// truncated to `set`. For `n = 1` this is `sup |E phi(x0)|`.
pub fn clustering_norm(table: &CumulantTable<'_>, set: &IndexSet, n: usize, p: Exponent) -> Result<ClusteringReport> {
    if n == 0 {
        return Err(Error::InvalidArgument("clustering norms start at order 1".into()));
    }
    let provider = table.provider();
    if n > provider.max_order() {
        return Err(Error::OrderOverflow {
            order: n,
            max: provider.max_order(),
        });
    }
    let tail = set.tail_for(provider, n);
    let mut report = ClusteringReport {
        order: n,
        p,
        value: 0.0,
        tail,
        anchor: set.anchors.first().copied(),
        box_desc: set.desc.clone(),
    };
    if table.vanishes(n) {
        report.tail = Tail::Exact;
        return Ok(report);
    }
    let mut best = f64::NEG_INFINITY;
    for &anchor in &set.anchors {
        let term = |x: &[SiteRef]| -> Result<f64> {
            let mut idx = Vec::with_capacity(n);
            idx.push(anchor);
            idx.extend_from_slice(x);
            Ok(p.power(table.cumulant(&idx)?.norm()))
        };
        let v = if p.is_infinite() {
            tuple_reduce(&set.refs, n - 1, true, |x| {
                let mut idx = vec![anchor];
                idx.extend_from_slice(x);
                Ok(table.cumulant(&idx)?.norm())
            })?
        } else {
            p.root(tuple_reduce(&set.refs, n - 1, false, term)?)
        };
        if v > best {
            best = v;
            report.anchor = Some(anchor);
        }
    }
    report.value = best.max(0.0);
    Ok(report)
}

/// `M_N(phi; p) = max_{n <= N} (||phi||_p^{(n)} / n!)^{1/n}` for `N = 1..=max_order`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MagnitudeConstants {
    pub p: Exponent,
    /// `||phi||_p^{(n)}` for `n = 1..=N`.
    pub norms: Vec<f64>,
    /// `M_n` for `n = 1..=N`.
    pub values: Vec<f64>,
    pub tail: Tail,
}

impl MagnitudeConstants {
    /// Builds the constants from already computed norms.
    pub fn from_norms(p: Exponent, norms: Vec<f64>, tail: Tail) -> Self {
        let mut values = Vec::with_capacity(norms.len());
        let mut m = 0.0f64;
        for (i, &v) in norms.iter().enumerate() {
            let n = i + 1;
            m = m.max((v / factorial(n)).powf(1.0 / n as f64));
            values.push(m);
        }
        MagnitudeConstants { p, norms, values, tail }
    }

    /// `M_n`, 1-based.
    ///
    /// # Panics
    ///
    /// Panics if `n` is 0 or larger than the computed order.
    pub fn m(&self, n: usize) -> f64 {
        self.values[n - 1]
    }

    /// `||phi||_p^{(n)}`, 1-based.
    pub fn norm(&self, n: usize) -> f64 {
        self.norms[n - 1]
    }
}

pub fn magnitude_constants(
    table: &CumulantTable<'_>,
    set: &IndexSet,
    p: Exponent,
    max_order: usize,
) -> Result<MagnitudeConstants> {
    let mut norms = Vec::with_capacity(max_order);
    let mut tail = Tail::Exact;
    for n in 1..=max_order {
        let r = clustering_norm(table, set, n, p)?;
        if r.tail == Tail::Unquantified {
            tail = Tail::Unquantified;
        }
        norms.push(r.value);
    }
    Ok(MagnitudeConstants::from_norms(p, norms, tail))
}

/// `Phi_n(x', x) = E[:phi(x'_1)* ... phi(x'_n)*: :phi(x_1) ... phi(x_n):]`.
pub fn phi_entry(table: &CumulantTable<'_>, x_prime: &[SiteRef], x: &[SiteRef]) -> Result<C64> {
    if x_prime.len() != x.len() {
        return Err(Error::InvalidArgument("kernel arguments differ in length".into()));
    }
    let groups = [IndexSequence::from(x_prime).conjugate(), IndexSequence::from(x)];
    wick_product_expectation(table, &groups, &IndexSequence::empty())
}

/// One row `x -> Phi_n(x', x)` of the Wick kernel over a box.
#[derive(Clone, Debug, PartialEq)]
pub struct WickKernelRow {
    pub order: usize,
    pub x_prime: Vec<SiteRef>,
    pub entries: Vec<(Vec<SiteRef>, C64)>,
}

impl WickKernelRow {
    pub fn lp_norm(&self, p: Exponent) -> f64 {
        if p.is_infinite() {
            self.entries.iter().map(|e| e.1.norm()).fold(0.0, f64::max)
        } else {
            p.root(self.entries.iter().map(|e| p.power(e.1.norm())).sum())
        }
    }

    pub fn get(&self, x: &[SiteRef]) -> Option<C64> {
        self.entries.iter().find(|e| e.0 == x).map(|e| e.1)
    }
}

pub fn phi_kernel(table: &CumulantTable<'_>, x_prime: &[SiteRef], set: &IndexSet) -> Result<WickKernelRow> {
    let n = x_prime.len();
    let max = table.provider().max_order();
    if 2 * n > max {
        return Err(Error::OrderOverflow { order: 2 * n, max });
    }
    let entries = all_tuples(&set.refs, n)
        .into_par_iter()
        .map(|x| phi_entry(table, x_prime, &x).map(|v| (x, v)))
        .collect::<Result<Vec<_>>>()?;
    Ok(WickKernelRow {
        order: n,
        x_prime: x_prime.to_vec(),
        entries,
    })
}

fn row_norm(table: &CumulantTable<'_>, x_prime: &[SiteRef], set: &IndexSet, p: Exponent) -> Result<f64> {
    let n = x_prime.len();
    if p.is_infinite() {
        tuple_reduce(&set.refs, n, true, |x| Ok(phi_entry(table, x_prime, x)?.norm()))
    } else {
        Ok(p.root(tuple_reduce(&set.refs, n, false, |x| {
            Ok(p.power(phi_entry(table, x_prime, x)?.norm()))
        })?))
    }
}

/// The chain `||Phi_n(x', .)||_p <= sum_{pi in P(2n)} prod_S ||phi||_p^{(|S|)}
/// <= M_{2n}(phi;p)^{2n} e^{2n} (2n)!`, with the middle term reported as
/// `intermediate`.
pub fn kernel_row_check(
    table: &CumulantTable<'_>,
    set: &IndexSet,
    n: usize,
    p: Exponent,
    x_prime: &[SiteRef],
) -> Result<BoundReport> {
    if n == 0 || x_prime.len() != n {
        return Err(Error::InvalidArgument(format!(
            "need n >= 1 and an anchor tuple of length n, got n = {n}, |x'| = {}",
            x_prime.len()
        )));
    }
    let lhs = row_norm(table, x_prime, set, p)?;
    let mags = magnitude_constants(table, set, p, 2 * n)?;
    let mut middle = 0.0;
    for part in enumerate_partitions(2 * n)? {
        middle += part.blocks().iter().map(|b| mags.norm(b.len())).product::<f64>();
    }
    let m2n = mags.m(2 * n);
    let rhs = m2n.powi(2 * n as i32) * std::f64::consts::E.powi(2 * n as i32) * factorial(2 * n);
    Ok(BoundReport::new("kernel_row", lhs, rhs)
        .with_intermediate(middle)
        .with_order(None, Some(n))
        .with_p(p)
        .with_box(set.desc.clone())
        .with_witness("x_prime", describe(x_prime))
        .with_witness("truncation", tail_name(mags.tail.max_with(set.tail_for(table.provider(), 2 * n))))
        .with_constant("M_2n", m2n))
}

impl Tail {
    fn max_with(self, other: Tail) -> Tail {
        if self == Tail::Exact && other == Tail::Exact {
            Tail::Exact
        } else {
            Tail::Unquantified
        }
    }
}

fn tail_name(t: Tail) -> &'static str {
    match t {
        Tail::Exact => "exact",
        Tail::Unquantified => "unquantified",
    }
}

/// A finite polynomial `X = sum_j c_j y^{F_j}` in field variables.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observable {
    pub terms: Vec<(C64, IndexSequence)>,
}

impl Observable {
    pub fn new(terms: Vec<(C64, IndexSequence)>) -> Self {
        Observable { terms }
    }

    /// The field value at one point.
    pub fn site(r: SiteRef) -> Self {
        Observable::new(vec![(C64::new(1.0, 0.0), IndexSequence::new(vec![r]))])
    }

    pub fn conjugate(&self) -> Self {
        Observable::new(self.terms.iter().map(|(c, m)| (c.conj(), m.conjugate())).collect())
    }

    fn as_site(&self) -> Option<SiteRef> {
        match self.terms.as_slice() {
            [(c, m)] if *c == C64::new(1.0, 0.0) && m.len() == 1 => Some(m[0]),
            _ => None,
        }
    }

    pub fn degree(&self) -> usize {
        self.terms.iter().map(|t| t.1.len()).max().unwrap_or(0)
    }

    pub fn mean(&self, provider: &dyn MomentProvider) -> Result<C64> {
        let mut total = C64::new(0.0, 0.0);
        for (c, m) in &self.terms {
            total += c * provider.moment(m)?;
        }
        Ok(total)
    }

    /// `cov(X*, X) = E|X|^2 - |E X|^2`.
    pub fn covariance(&self, provider: &dyn MomentProvider) -> Result<f64> {
        let mut second = C64::new(0.0, 0.0);
        for (a, ma) in &self.terms {
            for (b, mb) in &self.terms {
                let idx = IndexSequence::concat([&ma.conjugate(), mb]);
                second += a.conj() * b * provider.moment(&idx)?;
            }
        }
        let v = second.re - self.mean(provider)?.norm_sqr();
        if !v.is_finite() {
            return Err(Error::InfiniteVariance);
        }
        if v < -1e-10 * (1.0 + second.re.abs()) {
            return Err(Error::InvalidArgument(format!("negative variance {v}")));
        }
        Ok(v.max(0.0))
    }

    /// `k[X, phi(x_1), ..., phi(x_n)]`, through `E[X :phi(x_1)...phi(x_n):]`
    /// unless `X` is a single field value.
    pub fn joint_cumulant(&self, table: &CumulantTable<'_>, x: &[SiteRef]) -> Result<C64> {
        if let Some(r) = self.as_site() {
            let mut idx = Vec::with_capacity(x.len() + 1);
            idx.push(r);
            idx.extend_from_slice(x);
            return table.cumulant(&idx);
        }
        let groups = [IndexSequence::from(x)];
        let mut total = C64::new(0.0, 0.0);
        for (c, m) in &self.terms {
            total += c * wick_product_expectation(table, &groups, m)?;
        }
        Ok(total)
    }
}

fn check_p(p: Exponent) -> Result<()> {
    if p == Exponent::ONE || p == Exponent::TWO {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("bound is stated for p = 1 or 2, got {p}")))
    }
}

/// Weighted sum `sum_x w(x) |k(x)|^2` over `set^n`, `w = 1` or `|Phi_n(y, x)|`.
fn weighted_square_sum(
    table: &CumulantTable<'_>,
    set: &IndexSet,
    n: usize,
    weight: Option<&[SiteRef]>,
    kappa: &(dyn Fn(&[SiteRef]) -> Result<C64> + Sync),
) -> Result<f64> {
    tuple_reduce(&set.refs, n, false, |x| {
        let k = kappa(x)?;
        if k == C64::new(0.0, 0.0) {
            return Ok(0.0);
        }
        let w = match weight {
            Some(y) => phi_entry(table, y, x)?.norm(),
            None => 1.0,
        };
        Ok(w * k.norm_sqr())
    })
}

/// Bounds on `x -> k[X, phi(x_1), ..., phi(x_n)]` for an observable `X`:
///
/// * `p = 1`: `[sum_x |k|^2]^{1/2} <= sqrt(cov(X*,X)) M_{2n}(phi;1)^n e^n sqrt((2n)!)`;
/// * `p = 2`: `sup_y [sum_x |Phi_n(y,x)| |k|^2]^{1/2} <= sqrt(cov(X*,X)) M_{2n}(phi;2)^{2n} e^{2n} (2n)!`,
///   with the supremum over `weights` (default [`anchored_tuples`]).
pub fn observable_check(
    table: &CumulantTable<'_>,
    phi_set: &IndexSet,
    x: &Observable,
    n: usize,
    p: Exponent,
    weights: &[Vec<SiteRef>],
) -> Result<BoundReport> {
    check_p(p)?;
    if n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    let provider = table.provider();
    let cov = x.covariance(provider)?;
    let mags = magnitude_constants(table, phi_set, p, 2 * n)?;
    let m2n = mags.m(2 * n);
    let e = std::f64::consts::E;
    let vanishing = x.as_site().is_some() && table.vanishes(n + 1);
    let kappa = |xs: &[SiteRef]| x.joint_cumulant(table, xs);
    let (lhs, rhs, id, witness) = if p == Exponent::ONE {
        let lhs = if vanishing {
            0.0
        } else {
            weighted_square_sum(table, phi_set, n, None, &kappa)?.sqrt()
        };
        let rhs = cov.sqrt() * m2n.powi(n as i32) * e.powi(n as i32) * factorial(2 * n).sqrt();
        (lhs, rhs, "observable_p1", None)
    } else {
        let ys = if weights.is_empty() {
            anchored_tuples(phi_set, n)
        } else {
            weights.to_vec()
        };
        let mut best = (0.0, ys.first().cloned());
        if !vanishing {
            for y in &ys {
                let v = weighted_square_sum(table, phi_set, n, Some(y), &kappa)?.sqrt();
                if v > best.0 {
                    best = (v, Some(y.clone()));
                }
            }
        }
        let rhs = cov.sqrt() * m2n.powi(2 * n as i32) * e.powi(2 * n as i32) * factorial(2 * n);
        (best.0, rhs, "observable_p2", best.1)
    };
    let mut report = BoundReport::new(id, lhs, rhs)
        .with_order(None, Some(n))
        .with_p(p)
        .with_box(phi_set.desc.clone())
        .with_witness("truncation", tail_name(mags.tail.max_with(phi_set.tail_for(provider, n + x.degree()))))
        .with_constant("cov", cov)
        .with_constant("M_2n", m2n);
    if let Some(y) = witness {
        report = report.with_witness("y", describe(&y));
    }
    Ok(report)
}

/// Joint-cumulant bound for `k[psi(x'_1..x'_m), phi(x_1..x_n)]`:
///
/// * `p = 1`: `sup_{x'} [sum_x |k|^2]^{1/2} <= (M gamma^m)^{n+m} (n+m)!`;
/// * `p = 2`: `sup_{x', y} [sum_x |Phi_n(y,x)| |k|^2]^{1/2} <= (M gamma^m)^{2(n+m)} ((n+m)!)^2`,
///
/// where `M = max(M_{2m}(psi; inf), M_{2n}(phi; p))` and `gamma = 2e`. The
/// supremum runs over `x_primes` and `ys`, by default the
/// [`anchored_tuples`] of `psi_set` and `phi_set`.
#[allow(clippy::too_many_arguments)]
pub fn joint_cumulant_check(
    table: &CumulantTable<'_>,
    psi_set: &IndexSet,
    phi_set: &IndexSet,
    m: usize,
    n: usize,
    p: Exponent,
    x_primes: &[Vec<SiteRef>],
    ys: &[Vec<SiteRef>],
) -> Result<BoundReport> {
    check_p(p)?;
    if m == 0 || n == 0 {
        return Err(Error::InvalidArgument("m and n must be at least 1".into()));
    }
    let provider = table.provider();
    let psi_mags = magnitude_constants(table, psi_set, Exponent::INFINITY, 2 * m)?;
    let phi_mags = magnitude_constants(table, phi_set, p, 2 * n)?;
    let big_m = psi_mags.m(2 * m).max(phi_mags.m(2 * n));
    let base = big_m * GAMMA.powi(m as i32);
    let k = n + m;
    let rhs = if p == Exponent::ONE {
        base.powi(k as i32) * factorial(k)
    } else {
        base.powi(2 * k as i32) * factorial(k).powi(2)
    };

    let x_primes = if x_primes.is_empty() {
        anchored_tuples(psi_set, m)
    } else {
        x_primes.to_vec()
    };
    let ys: Vec<Option<Vec<SiteRef>>> = if p == Exponent::ONE {
        vec![None]
    } else if ys.is_empty() {
        anchored_tuples(phi_set, n).into_iter().map(Some).collect()
    } else {
        ys.iter().cloned().map(Some).collect()
    };

    let mut best = 0.0;
    let mut arg_x = x_primes.first().cloned();
    let mut arg_y = ys.first().cloned().flatten();
    if !table.vanishes(k) {
        for xp in &x_primes {
            let kappa = |x: &[SiteRef]| {
                let mut idx = xp.clone();
                idx.extend_from_slice(x);
                table.cumulant(&idx)
            };
            for y in &ys {
                let v = weighted_square_sum(table, phi_set, n, y.as_deref(), &kappa)?.sqrt();
                if v > best {
                    best = v;
                    arg_x = Some(xp.clone());
                    arg_y = y.clone();
                }
            }
        }
    }
    let tail = psi_mags
        .tail
        .max_with(phi_mags.tail)
        .max_with(phi_set.tail_for(provider, k));
    let id = if p == Exponent::ONE { "joint_p1" } else { "joint_p2" };
    let mut report = BoundReport::new(id, best, rhs)
        .with_order(Some(m), Some(n))
        .with_p(p)
        .with_box(phi_set.desc.clone())
        .with_witness("truncation", tail_name(tail))
        .with_constant("M", big_m)
        .with_constant("gamma", GAMMA)
        .with_constant("M_2m_psi_inf", psi_mags.m(2 * m))
        .with_constant("M_2n_phi", phi_mags.m(2 * n));
    if let Some(x) = arg_x {
        report = report.with_witness("x_prime", describe(&x));
    }
    if let Some(y) = arg_y {
        report = report.with_witness("y", describe(&y));
    }
    Ok(report)
}

/// One partial sum `S_R = sum_{|x - x'| <= R} |k[psi(x'), phi(x)]|^q`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeRow {
    pub radius: u64,
    pub partial_sum: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DivergenceProbe {
    pub exponent: f64,
    pub x_prime: i64,
    pub rows: Vec<ProbeRow>,
    /// Least-squares slope of `S_R` against `ln R` (needs two radii `>= 1`).
    pub slope: Option<f64>,
    pub intercept: Option<f64>,
}

/// Partial `l_q` sums of the cross covariance of a two-field spectral model
/// around `x'`, for each radius in `radii`.
pub fn l1_divergence_probe(
    field: &SpectralGaussianField,
    x_prime: i64,
    radii: &[u64],
    exponent: f64,
) -> Result<DivergenceProbe> {
    if !(exponent > 0.0) {
        return Err(Error::InvalidArgument(format!("exponent {exponent} must be positive")));
    }
    let mut order: Vec<u64> = radii.to_vec();
    order.sort_unstable();
    order.dedup();
    let anchor = SiteRef::at(0, x_prime);
    let term = |d: i64| -> Result<f64> {
        Ok(field.pair(anchor, SiteRef::at(1, x_prime + d))?.abs().powf(exponent))
    };
    let mut rows = Vec::with_capacity(order.len());
    let mut sum = term(0)?;
    let mut done = 0u64;
    for &r in &order {
        while done < r {
            done += 1;
            let d = done as i64;
            sum += term(d)? + term(-d)?;
        }
        rows.push(ProbeRow { radius: r, partial_sum: sum });
    }
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.radius >= 1)
        .map(|r| ((r.radius as f64).ln(), r.partial_sum))
        .collect();
    let (slope, intercept) = if pts.len() >= 2 {
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        let s = sxy / sxx;
        (Some(s), Some(my - s * mx))
    } else {
        (None, None)
    };
    Ok(DivergenceProbe {
        exponent,
        x_prime,
        rows,
        slope,
        intercept,
    })
}
