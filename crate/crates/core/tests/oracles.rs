mod common;

use num_complex::Complex64 as C64;
use proptest::prelude::*;
use wick_cluster::cumulants::{wick_expansion, wick_product_expectation};
use wick_cluster::partitions::{bell_number, enumerate_partitions, enumerate_restricted};
use wick_cluster::{CumulantTable, IndexSequence, MomentProvider, SiteRef};

#[test]
fn partition_counts_match_insertion_enumeration() {
    for n in 0..=8 {
        let items: Vec<usize> = (0..n).collect();
        let brute = common::partitions(&items).len() as u128;
        assert_eq!(bell_number(n), brute);
        if n > 0 {
            assert_eq!(enumerate_partitions(n).unwrap().count() as u128, brute);
        }
    }
}

#[test]
fn restricted_partitions_are_the_filtered_full_set() {
    for lens in [vec![2, 2], vec![1, 2, 1], vec![3], vec![2, 1, 2]] {
        for tail in 0..=2 {
            let mut offset = 0;
            let groups: Vec<std::ops::Range<usize>> = lens
                .iter()
                .map(|l| {
                    let r = offset..offset + l;
                    offset += l;
                    r
                })
                .collect();
            let total = offset + tail;
            let items: Vec<usize> = (0..total).collect();
            let mut want: Vec<Vec<Vec<usize>>> = common::partitions(&items)
                .into_iter()
                .filter(|p| !p.iter().any(|b| groups.iter().any(|g| b.iter().all(|i| g.contains(i)))))
                .map(|mut p| {
                    p.iter_mut().for_each(|b| b.sort());
                    p.sort();
                    p
                })
                .collect();
            want.sort();
            let seqs: Vec<IndexSequence> = lens.iter().map(|&l| IndexSequence::sites(0, &vec![0; l])).collect();
            let mut got: Vec<Vec<Vec<usize>>> = enumerate_restricted(&seqs, &IndexSequence::sites(0, &vec![0; tail]))
                .unwrap()
                .map(|p| {
                    let mut b = p.blocks().to_vec();
                    b.iter_mut().for_each(|x| x.sort());
                    b.sort();
                    b
                })
                .collect();
            got.sort();
            assert_eq!(got, want, "groups {lens:?} tail {tail}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn wick_polynomials_match_generating_function_oracle(
        seed in 0u64..1000,
        picks in proptest::collection::vec(0usize..6, 1..=4),
    ) {
        let field = common::random_field(seed, 3, 3, true);
        let refs = field.site_refs();
        let idx: Vec<SiteRef> = picks.iter().map(|&i| refs[i % refs.len()]).collect();
        let w = wick_expansion(&field, &idx).unwrap();
        for a in 0..field.atoms().len() {
            let got = w.evaluate(|r| common::value(&field, a, r));
            let want = common::wick_value(&field, a, &idx);
            prop_assert!((got - want).norm() < 1e-10);
        }
        prop_assert!(w.expectation(&field).unwrap().norm() < 1e-10);
    }

    #[test]
    fn cumulants_match_partition_inversion(
        seed in 0u64..1000,
        picks in proptest::collection::vec(0usize..8, 1..=5),
    ) {
        let field = common::random_field(seed, 4, 4, seed % 2 == 0);
        let refs = field.site_refs();
        let idx: Vec<SiteRef> = picks.iter().map(|&i| refs[i % refs.len()]).collect();
        let table = CumulantTable::new(&field);
        let got = table.cumulant(&idx).unwrap();
        prop_assert!((got - common::cumulant(&field, &idx)).norm() < 1e-10);
        prop_assert!((field.moment(&idx).unwrap() - common::moment(&field, &idx)).norm() < 1e-12);
    }

    #[test]
    fn products_of_wick_polynomials_match_direct_expectation(
        seed in 0u64..1000,
        a in proptest::collection::vec(0usize..4, 1..=3),
        b in proptest::collection::vec(0usize..4, 1..=2),
        tail in proptest::collection::vec(0usize..4, 0..=1),
    ) {
        let field = common::random_field(seed, 4, 3, false);
        let pick = |v: &[usize]| -> Vec<SiteRef> { v.iter().map(|&i| SiteRef::at(0, i as i64)).collect() };
        let (ga, gb, t) = (pick(&a), pick(&b), pick(&tail));
        let table = CumulantTable::new(&field);
        let got = wick_product_expectation(
            &table,
            &[IndexSequence::from(ga.clone()), IndexSequence::from(gb.clone())],
            &IndexSequence::from(t.clone()),
        ).unwrap();
        let want = common::wick_product_direct(&field, &[ga, gb], &t);
        prop_assert!((got - want).norm() < 1e-10, "{got} vs {want}");
        prop_assert!(want.is_finite() && got != C64::new(f64::NAN, 0.0));
    }
}
