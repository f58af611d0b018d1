//! Brute-force reference computations shared by the integration tests.
//! None of them go through the library's partition or cumulant code.

#![allow(dead_code)]

use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use wick_cluster::fields::FiniteDiscreteField;
use wick_cluster::{Site, SiteRef};

pub fn zero() -> C64 {
    C64::new(0.0, 0.0)
}

/// All set partitions of `items`, by inserting each element into an
/// existing block or a new one.
pub fn partitions(items: &[usize]) -> Vec<Vec<Vec<usize>>> {
    let Some((&first, rest)) = items.split_first() else {
        return vec![vec![]];
    };
    let mut out = Vec::new();
    for p in partitions(rest) {
        for i in 0..p.len() {
            let mut q = p.clone();
            q[i].insert(0, first);
            out.push(q);
        }
        let mut q = p.clone();
        q.insert(0, vec![first]);
        out.push(q);
    }
    out
}

/// `sum_{pi in P(n)} prod_{S in pi} |S|!` from the recursion on the block
/// containing the first point.
pub fn factorial_partition_sum(n: usize) -> u128 {
    let mut a = vec![1u128; n + 1];
    let mut binom = vec![vec![0u128; n + 1]; n + 1];
    for i in 0..=n {
        binom[i][0] = 1;
        for j in 1..=i {
            binom[i][j] = binom[i - 1][j - 1] + if j < i { binom[i - 1][j] } else { 0 };
        }
    }
    for m in 1..=n {
        let mut fact = 1u128;
        let mut s = 0u128;
        for k in 1..=m {
            fact *= k as u128;
            s += binom[m - 1][k - 1] * fact * a[m - k];
        }
        a[m] = s;
    }
    a[n]
}

pub fn value(field: &FiniteDiscreteField, atom: usize, r: SiteRef) -> C64 {
    let col = field.sites().iter().position(|s| *s == r.site).expect("site in field");
    let v = field.atoms()[atom].values[col];
    if r.conj {
        v.conj()
    } else {
        v
    }
}

pub fn moment(field: &FiniteDiscreteField, idx: &[SiteRef]) -> C64 {
    (0..field.atoms().len())
        .map(|a| {
            idx.iter()
                .fold(C64::new(field.atoms()[a].prob, 0.0), |acc, &r| acc * value(field, a, r))
        })
        .sum()
}

/// Moment-to-cumulant inversion `sum_pi (-1)^{|pi|-1} (|pi|-1)! prod E[block]`.
pub fn cumulant(field: &FiniteDiscreteField, idx: &[SiteRef]) -> C64 {
    let items: Vec<usize> = (0..idx.len()).collect();
    let mut total = zero();
    for p in partitions(&items) {
        let k = p.len();
        let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
        let fact: f64 = (1..k).map(|i| i as f64).product();
        let prod = p.iter().fold(C64::new(sign * fact, 0.0), |acc, b| {
            let sub: Vec<SiteRef> = b.iter().map(|&i| idx[i]).collect();
            acc * moment(field, &sub)
        });
        total += prod;
    }
    total
}

/// `:y^I:` on one outcome, from `:e^{l.y}: = e^{l.y} e^{-g(l)}` with `g`
/// the cumulant generating function:
/// `:y^I: = sum_{J subset I} y^J sum_{pi in P(I \ J)} prod_B (-k_B)`.
pub fn wick_value(field: &FiniteDiscreteField, atom: usize, idx: &[SiteRef]) -> C64 {
    let n = idx.len();
    let mut total = zero();
    for mask in 0u32..(1 << n) {
        let inside: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
        let outside: Vec<usize> = (0..n).filter(|i| mask & (1 << i) == 0).collect();
        let mono = inside.iter().fold(C64::new(1.0, 0.0), |acc, &i| acc * value(field, atom, idx[i]));
        let mut coef = zero();
        for p in partitions(&outside) {
            coef += p.iter().fold(C64::new(1.0, 0.0), |acc, b| {
                let sub: Vec<SiteRef> = b.iter().map(|&i| idx[i]).collect();
                acc * -cumulant(field, &sub)
            });
        }
        total += mono * coef;
    }
    total
}

/// `E[prod_l :y^{J_l}: y^{tail}]` by evaluating every factor on every outcome.
pub fn wick_product_direct(field: &FiniteDiscreteField, groups: &[Vec<SiteRef>], tail: &[SiteRef]) -> C64 {
    (0..field.atoms().len())
        .map(|a| {
            let w = groups
                .iter()
                .fold(C64::new(1.0, 0.0), |acc, g| acc * wick_value(field, a, g));
            let t = tail.iter().fold(C64::new(1.0, 0.0), |acc, &r| acc * value(field, a, r));
            field.atoms()[a].prob * w * t
        })
        .sum()
}

pub fn random_field(seed: u64, sites: usize, atoms: usize, complex: bool) -> FiniteDiscreteField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    FiniteDiscreteField::random(&mut rng, sites, atoms, complex)
}

/// Two components with `per` sites each: `(0, x)` and `(1, x)`.
pub fn random_two_field(seed: u64, per: usize, atoms: usize) -> FiniteDiscreteField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sites = [0u16, 1]
        .iter()
        .flat_map(|&c| (0..per as i64).map(move |x| Site::new(c, x)))
        .collect();
    FiniteDiscreteField::random_on(&mut rng, sites, atoms, false)
}

pub fn tuples(refs: &[SiteRef], k: usize) -> Vec<Vec<SiteRef>> {
    let mut out = vec![vec![]];
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

pub fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

/// `sup_a (sum_{x in refs^{n-1}} |k(a, x)|^p)^{1/p}`; `p = inf` gives the max.
pub fn clustering_norm(field: &FiniteDiscreteField, refs: &[SiteRef], n: usize, p: f64) -> f64 {
    let mut best: f64 = 0.0;
    for a in refs {
        let mut acc: f64 = 0.0;
        for t in tuples(refs, n - 1) {
            let mut idx = vec![*a];
            idx.extend(t);
            let k = cumulant(field, &idx).norm();
            if p.is_infinite() {
                acc = acc.max(k);
            } else {
                acc += k.powf(p);
            }
        }
        let v = if p.is_infinite() { acc } else { acc.powf(1.0 / p) };
        best = best.max(v);
    }
    best
}

pub fn magnitude(field: &FiniteDiscreteField, refs: &[SiteRef], big_n: usize, p: f64) -> f64 {
    (1..=big_n)
        .map(|n| (clustering_norm(field, refs, n, p) / factorial(n)).powf(1.0 / n as f64))
        .fold(0.0, f64::max)
}

/// `E[:phi^{y}:* :phi^{x}:]` through per-outcome Wick values.
pub fn phi_entry(field: &FiniteDiscreteField, y: &[SiteRef], x: &[SiteRef]) -> C64 {
    let yc: Vec<SiteRef> = y.iter().map(|r| r.conjugate()).collect();
    wick_product_direct(field, &[yc, x.to_vec()], &[])
}
