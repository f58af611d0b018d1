//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails, except those listed in `KNOWN_RED`,
//! which are reported as FAIL together with the measured values.

mod common;

use std::f64::consts::{E, PI};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use num_complex::Complex64 as C64;
use wick_cluster::clustering::{
    joint_cumulant_check, l1_divergence_probe, observable_check, Exponent, IndexSet, Observable, GAMMA,
};
use wick_cluster::cumulants::{
    cumulant_with_anchor, moments_from_cumulants, wick_expansion, wick_product_expectation, Anchor,
};
use wick_cluster::dnls::{run_demo, sample_one, DemoConfig, DnlsConfig, Integrator};
use wick_cluster::fields::SpectralGaussianField;
use wick_cluster::partitions::{enumerate_restricted, verify_comb_est};
use wick_cluster::{CumulantTable, IndexSequence, MomentProvider, SiteRef};

/// Criteria whose target is not attainable as stated; see the printed detail.
const KNOWN_RED: &[(u32, &str)] = &[(
    3,
    "partial l1 sums of |sin(pi x/2)/(pi x)| grow like (1/pi) ln R, half the 2/pi target",
)];

type Criterion = (u32, &'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn close(a: C64, b: C64, tol: f64) -> bool {
    (a - b).norm() <= tol
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut detail = Vec::new();
    let mut pass = true;
    for n in 1..=6 {
        let r = verify_comb_est(n).unwrap();
        let oracle = common::factorial_partition_sum(2 * n) as f64;
        let bound = common::factorial(2 * n) * E.powi(2 * n as i32);
        let ok = r.lhs == oracle && r.lhs <= bound && r.flag && (r.rhs - bound).abs() <= 1e-9 * bound;
        pass &= ok;
        if n <= 2 {
            detail.push(format!("n={n}: lhs={} rhs={:.5}", r.lhs, r.rhs));
        }
    }
    pass &= verify_comb_est(1).unwrap().lhs == 3.0 && verify_comb_est(2).unwrap().lhs == 73.0;
    let elapsed = start.elapsed();
    pass &= elapsed < Duration::from_secs(60);
    outcome(pass, format!("{}; 2n<=12 all bounded; {:.2?} (< 60 s)", detail.join(", "), elapsed))
}

fn criterion_2() -> Outcome {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    let providers = 60;
    for i in 0..providers {
        let sites = rng.random_range(1..=4usize);
        let complex = i % 2 == 1;
        let field = common::random_field(1000 + i, sites, rng.random_range(2..=4), complex);
        let refs = field.site_refs();
        let table = CumulantTable::new(&field);
        let total = rng.random_range(2..=6usize);
        let mut left = total;
        let mut groups: Vec<Vec<SiteRef>> = Vec::new();
        while left > 0 && groups.len() < 3 {
            let len = rng.random_range(1..=left.min(3));
            groups.push((0..len).map(|_| refs[rng.random_range(0..refs.len())]).collect());
            left -= len;
        }
        let tail: Vec<SiteRef> = (0..left).map(|_| refs[rng.random_range(0..refs.len())]).collect();
        let gs: Vec<IndexSequence> = groups.iter().cloned().map(IndexSequence::from).collect();
        let got = wick_product_expectation(&table, &gs, &IndexSequence::from(tail.clone())).unwrap();
        let want = common::wick_product_direct(&field, &groups, &tail);
        worst = worst.max((got - want).norm());
    }

    let field = common::random_field(77, 4, 4, false);
    let table = CumulantTable::new(&field);
    let y: Vec<SiteRef> = (0..4).map(|x| SiteRef::at(0, x)).collect();
    let mut terms: Vec<String> = enumerate_restricted(&[IndexSequence::from(vec![y[0], y[1]]), IndexSequence::from(vec![y[2], y[3]])], &IndexSequence::empty())
        .unwrap()
        .map(|p| format!("{:?}", p.blocks()))
        .collect();
    terms.sort();
    let expected_terms = ["[[0, 1, 2, 3]]", "[[0, 2], [1, 3]]", "[[0, 3], [1, 2]]"];
    let terms_ok = terms == expected_terms;
    let k = |idx: &[SiteRef]| common::cumulant(&field, idx);
    let identity = k(&[y[0], y[2]]) * k(&[y[1], y[3]]) + k(&[y[0], y[3]]) * k(&[y[1], y[2]]) + k(&y);
    let lhs = wick_product_expectation(
        &table,
        &[IndexSequence::from(vec![y[0], y[1]]), IndexSequence::from(vec![y[2], y[3]])],
        &IndexSequence::empty(),
    )
    .unwrap();
    let direct = common::wick_product_direct(&field, &[vec![y[0], y[1]], vec![y[2], y[3]]], &[]);
    let ident_ok = close(lhs, identity, 1e-12) && close(direct, identity, 1e-12);
    outcome(
        worst <= 1e-9 && terms_ok && ident_ok,
        format!(
            "{providers} providers, max |error| = {worst:.2e} (<= 1e-9); two-pair identity terms {terms:?}, value error {:.2e}",
            (lhs - identity).norm()
        ),
    )
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let field = SpectralGaussianField::sinc_coupling_example();
    let radii = [100, 1_000, 10_000];
    let l1 = l1_divergence_probe(&field, 0, &radii, 1.0).unwrap();
    let l2 = l1_divergence_probe(&field, 0, &radii, 2.0).unwrap();
    let g = |x: i64| if x == 0 { 0.5 } else { (PI * x as f64 / 2.0).sin() / (PI * x as f64) };
    let mut oracle_ok = true;
    for (row, r2) in l1.rows.iter().zip(&l2.rows) {
        let r = row.radius as i64;
        let s1: f64 = (-r..=r).map(|x| g(x).abs()).sum();
        let s2: f64 = (-r..=r).map(|x| g(x) * g(x)).sum();
        oracle_ok &= (row.partial_sum - s1).abs() <= 1e-9 * s1 && (r2.partial_sum - s2).abs() <= 1e-12;
    }
    let slope = l1.slope.unwrap();
    let target = 2.0 / PI;
    let rel = (slope - target).abs() / target;
    let sum_sq = l2.rows.last().unwrap().partial_sum;
    let elapsed = start.elapsed();
    let slope_ok = rel <= 0.05;
    let l2_ok = (sum_sq - 0.5).abs() <= 1e-3;
    outcome(
        slope_ok && l2_ok && oracle_ok && elapsed < Duration::from_secs(10),
        format!(
            "l1 slope {slope:.5} vs 2/pi = {target:.5} (rel err {:.1}%, tol 5%: {}); sum |G|^2 at R=1e4 = {sum_sq:.6} (0.5 +- 1e-3: {}); direct sums agree: {oracle_ok}; {:.2?} (< 10 s)",
            100.0 * rel,
            if slope_ok { "ok" } else { "FAIL" },
            if l2_ok { "ok" } else { "FAIL" },
            elapsed
        ),
    )
}

#[allow(clippy::approx_constant)]
fn criterion_4() -> Outcome {
    let sinc = SpectralGaussianField::sinc_coupling_example();
    let table = CumulantTable::with_closed_forms(&sinc);
    let set = IndexSet::lattice(&[1], 100_000, false);
    let r = observable_check(&table, &set, &Observable::site(SiteRef::at(0, 0)), 1, Exponent::ONE, &[]).unwrap();
    let item1 = (r.lhs - 0.70711).abs() <= 1e-5 && (r.rhs - E).abs() <= 1e-12 && r.flag;

    let iid = SpectralGaussianField::iid(1.0);
    let t = CumulantTable::with_closed_forms(&iid);
    let phi = IndexSet::lattice(&[1], 4, false);
    let mut item2 = true;
    let mut lhs2 = Vec::new();
    for n in 1..=2 {
        for x in [
            Observable::site(SiteRef::at(1, 0)),
            Observable::new(vec![(C64::new(1.0, 0.0), IndexSequence::sites(1, &[0, 1]))]),
            Observable::new(vec![
                (C64::new(1.0, 0.0), IndexSequence::sites(0, &[0])),
                (C64::new(0.5, 0.0), IndexSequence::sites(1, &[0])),
            ]),
        ] {
            let rep = observable_check(&t, &phi, &x, n, Exponent::TWO, &[]).unwrap();
            item2 &= rep.flag;
            lhs2.push(format!("{:.3}/{:.3}", rep.lhs, rep.rhs));
        }
    }
    let single = observable_check(&t, &phi, &Observable::site(SiteRef::at(1, 0)), 1, Exponent::TWO, &[]).unwrap();
    item2 &= (single.lhs - 1.0).abs() < 1e-12 && (single.rhs - E * E).abs() < 1e-9;
    // X = phi(0) phi(1), n = 2: weight 1 on x = (0,1) and (1,0), each with k = 1.
    let pair = Observable::new(vec![(C64::new(1.0, 0.0), IndexSequence::sites(1, &[0, 1]))]);
    let two = observable_check(&t, &phi, &pair, 2, Exponent::TWO, &[]).unwrap();
    item2 &= (two.lhs - 2f64.sqrt()).abs() < 1e-12;
    outcome(
        item1 && item2,
        format!(
            "item 1: lhs {:.7} (0.70711 +- 1e-5), rhs {:.5}, flag {}; item 2 on iid, n<=2: lhs/rhs {}",
            r.lhs,
            r.rhs,
            r.flag,
            lhs2.join(" ")
        ),
    )
}

fn discrete_joint_oracle(
    field: &wick_cluster::fields::FiniteDiscreteField,
    psi: &[SiteRef],
    phi: &[SiteRef],
    m: usize,
    n: usize,
    p: f64,
) -> (f64, f64) {
    let mut best: f64 = 0.0;
    let ys = if p == 1.0 { vec![vec![]] } else { common::tuples(phi, n) };
    for xp in common::tuples(psi, m) {
        for y in &ys {
            let mut s = 0.0;
            for x in common::tuples(phi, n) {
                let mut idx = xp.clone();
                idx.extend(&x);
                let k = common::cumulant(field, &idx).norm_sqr();
                let w = if p == 1.0 { 1.0 } else { common::phi_entry(field, y, &x).norm() };
                s += w * k;
            }
            best = best.max(s.sqrt());
        }
    }
    let big_m = common::magnitude(field, psi, 2 * m, f64::INFINITY).max(common::magnitude(field, phi, 2 * n, p));
    let base = big_m * GAMMA.powi(m as i32);
    let k = n + m;
    let rhs = if p == 1.0 {
        base.powi(k as i32) * common::factorial(k)
    } else {
        base.powi(2 * k as i32) * common::factorial(k).powi(2)
    };
    (best, rhs)
}

fn criterion_5() -> Outcome {
    let mut flags = 0;
    let mut total = 0;
    let mut worst_rel: f64 = 0.0;
    let mut max_ratio: f64 = 0.0;

    let sinc = SpectralGaussianField::sinc_coupling_example();
    let table = CumulantTable::with_closed_forms(&sinc);
    let radius = 300u64;
    let psi = IndexSet::lattice(&[0], radius, false);
    let phi = IndexSet::lattice(&[1], radius, false);
    let g = |x: i64| if x == 0 { 0.5 } else { (PI * x as f64 / 2.0).sin() / (PI * x as f64) };
    let l1_oracle = (-(radius as i64)..=radius as i64).map(|x| g(x) * g(x)).sum::<f64>().sqrt();
    for p in [Exponent::ONE, Exponent::TWO] {
        for m in 1..=2 {
            for n in 1..=2 {
                let r = joint_cumulant_check(&table, &psi, &phi, m, n, p, &[], &[]).unwrap();
                total += 1;
                flags += r.flag as usize;
                max_ratio = max_ratio.max(r.ratio);
                let want = match (m, n, p == Exponent::ONE) {
                    (1, 1, true) => l1_oracle,
                    (1, 1, false) => 0.5,
                    _ => 0.0,
                };
                worst_rel = worst_rel.max((r.lhs - want).abs() / want.max(1.0));
            }
        }
    }

    let providers = 20;
    for seed in 0..providers {
        let field = common::random_two_field(500 + seed, 2, 3);
        let table = CumulantTable::new(&field);
        let psi = IndexSet::discrete(&field, Some(0));
        let phi = IndexSet::discrete(&field, Some(1));
        for p in [1.0, 2.0] {
            let e = Exponent::new(p).unwrap();
            for m in 1..=2 {
                for n in 1..=2 {
                    let r = joint_cumulant_check(&table, &psi, &phi, m, n, e, &[], &[]).unwrap();
                    let (lhs, rhs) = discrete_joint_oracle(&field, &psi.refs, &phi.refs, m, n, p);
                    total += 1;
                    let agree = (r.lhs - lhs).abs() <= 1e-9 * lhs.max(1.0) && (r.rhs - rhs).abs() <= 1e-9 * rhs;
                    flags += (r.flag && agree && lhs <= rhs) as usize;
                    worst_rel = worst_rel.max((r.lhs - lhs).abs() / lhs.max(1.0)).max((r.rhs - rhs).abs() / rhs);
                    max_ratio = max_ratio.max(r.ratio);
                }
            }
        }
    }
    outcome(
        flags == total && worst_rel <= 1e-9,
        format!(
            "{flags}/{total} flags true (sinc box |x|<={radius} + {providers} discrete two-field providers); max oracle deviation {worst_rel:.1e}; max lhs/rhs {max_ratio:.3e}"
        ),
    )
}

fn criterion_6() -> Outcome {
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(6);
    let (mut round, mut perm, mut centred, mut anchor): (f64, f64, f64, f64) = (0.0, 0.0, 0.0, 0.0);
    for seed in 0..12 {
        let field = common::random_field(900 + seed, 3, 4, seed % 2 == 0);
        let refs = field.site_refs();
        let table = CumulantTable::new(&field);
        for order in 1..=6 {
            let idx: Vec<SiteRef> = (0..order).map(|_| refs[rng.random_range(0..refs.len())]).collect();
            let back = moments_from_cumulants(&table, &idx).unwrap();
            round = round.max((back - field.moment(&idx).unwrap()).norm());
            if order > 5 {
                continue;
            }
            let k = table.cumulant(&idx).unwrap();
            let mut shuffled = idx.clone();
            shuffled.shuffle(&mut rng);
            perm = perm.max((table.cumulant(&shuffled).unwrap() - k).norm());
            let w = wick_expansion(&field, &idx).unwrap();
            centred = centred.max(w.expectation(&field).unwrap().norm());
            for a in [Anchor::First, Anchor::Last, Anchor::Position(2), Anchor::Position(order / 2)] {
                let ka = cumulant_with_anchor(&field, &idx, a).unwrap();
                anchor = anchor.max((ka - k).norm()).max((ka - common::cumulant(&field, &idx)).norm());
            }
        }
    }
    outcome(
        round <= 1e-10 && perm <= 1e-10 && centred <= 1e-10 && anchor <= 1e-10,
        format!(
            "round trip (order<=6) {round:.1e}; permutation (<=5) {perm:.1e}; E[:y^I:] (<=5) {centred:.1e}; anchor choice (<=5) {anchor:.1e}; tol 1e-10"
        ),
    )
}

fn criterion_7() -> Outcome {
    let start = Instant::now();
    let demo = DemoConfig::default();
    let report = run_demo(&demo).unwrap();
    let elapsed = start.elapsed();
    let zero_ok = report.zero_coupling_ok()
        && report
            .rows
            .iter()
            .filter(|r| r.lambda == 0.0)
            .all(|r| r.t <= 50.0 && r.residual <= 3.0 * r.stderr + r.rounding);
    let fits: Vec<String> = report.fits.iter().map(|f| format!("C({})={:.4}", f.lambda, f.constant)).collect();
    let collapse_ok = report.collapse_ok() && report.fits.len() == 3;
    outcome(
        zero_ok && collapse_ok && elapsed < Duration::from_secs(600),
        format!(
            "L={} N={}: lambda=0 max residual/(3 se + rounding) = {:.3}; {}; spread {:.2}% (<= 25%); {:.1?} (< 10 min)",
            demo.base.side,
            demo.base.samples,
            report.zero_coupling_ratio.unwrap_or(0.0),
            fits.join(" "),
            100.0 * report.spread.unwrap_or(f64::NAN),
            elapsed
        ),
    )
}

fn criterion_8() -> Outcome {
    let mut drift: f64 = 0.0;
    let mut orders = Vec::new();
    for (i, lambda) in [0.05, 0.5, 1.0].into_iter().enumerate() {
        let cfg = DnlsConfig { lambda, ..DnlsConfig::default() };
        let lat = cfg.lattice().unwrap();
        let disp = lat.dispersion(&cfg.hopping());
        let s0 = sample_one(&cfg, i).unwrap();
        let mut s = s0.clone();
        Integrator::new(&lat, &disp, lambda, cfg.dt).evolve(&mut s, 50.0);
        drift = drift.max((s.norm_sqr() - s0.norm_sqr()).abs());
        if lambda == 1.0 {
            let run = |dt: f64| {
                let mut s = s0.clone();
                Integrator::new(&lat, &disp, lambda, dt).evolve(&mut s, 1.0);
                s
            };
            let (a, b, c) = (run(0.1), run(0.05), run(0.025));
            orders.push((a.distance(&b) / b.distance(&c)).log2());
        }
    }
    let order = orders[0];
    outcome(
        drift <= 1e-10 && (1.7..=2.3).contains(&order),
        format!("max l2 drift over t=50 {drift:.1e} (<= 1e-10); convergence order {order:.3} in [1.7, 2.3]"),
    )
}

fn main() {
    let criteria: [Criterion; 8] = [
        (1, "combinatorial estimate", criterion_1),
        (2, "restricted-partition expectation oracle", criterion_2),
        (3, "coupled Gaussian counterexample", criterion_3),
        (4, "observable bound on the sinc and iid examples", criterion_4),
        (5, "joint cumulant bounds", criterion_5),
        (6, "cumulant machinery", criterion_6),
        (7, "DNLS Duhamel residual", criterion_7),
        (8, "split-step integrator", criterion_8),
    ];
    let mut unexpected = Vec::new();
    for (id, name, f) in criteria {
        let result = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        let known = KNOWN_RED.iter().find(|k| k.0 == id);
        println!("{} criterion {id} ({name}): {}", if result.pass { "PASS" } else { "FAIL" }, result.detail);
        if !result.pass {
            match known {
                Some((_, why)) => println!("     known: {why}"),
                None => unexpected.push(id),
            }
        }
    }
    if !unexpected.is_empty() {
        eprintln!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}
