use num_bigint::BigUint;
use perm1324::asymptotics::{fit_three_term, Real};
use perm1324::perms::{weight_exponents, weight_identity_check};
use perm1324::*;
use proptest::prelude::*;

fn permutation(max_len: usize) -> impl Strategy<Value = Permutation> {
    (0..=max_len)
        .prop_flat_map(|n| Just((1..=n as u32).collect::<Vec<_>>()).prop_shuffle())
        .prop_map(|v| Permutation::new(v).unwrap())
}

fn distinct_seq() -> impl Strategy<Value = Vec<i64>> {
    proptest::collection::btree_set(-1000i64..1000, 0..12)
        .prop_flat_map(|s| Just(s.into_iter().collect::<Vec<_>>()).prop_shuffle())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn reduce_is_idempotent(seq in distinct_seq()) {
        let once = reduce(&seq).unwrap();
        let as_i64: Vec<i64> = once.as_slice().iter().map(|&x| x as i64).collect();
        prop_assert_eq!(reduce(&as_i64).unwrap(), once.clone());
        for i in 0..seq.len() {
            for j in 0..seq.len() {
                prop_assert_eq!(seq[i] < seq[j], once.as_slice()[i] < once.as_slice()[j]);
            }
        }
    }

    #[test]
    fn inversions_of_reverse(pi in permutation(12)) {
        let n = pi.len() as u64;
        prop_assert_eq!(inversions(&pi) + inversions(&pi.reversed()), n * n.saturating_sub(1) / 2);
        let tau21 = Permutation::new(vec![2, 1]).unwrap();
        prop_assert_eq!(inversions(&pi), count_occurrences(&pi, &tau21));
    }

    #[test]
    fn longer_patterns_never_occur(pi in permutation(5), tau in permutation(8)) {
        prop_assume!(tau.len() > pi.len());
        prop_assert_eq!(count_occurrences(&pi, &tau), 0);
    }

    #[test]
    fn weight_tracks_occurrences(pi in permutation(7)) {
        prop_assert_eq!(weight_exponents(&pi).t_exp, count_occurrences(&pi, &Permutation::pattern_1324()));
    }

    #[test]
    fn substitution_identity_holds(pi in permutation(8)) {
        prop_assume!(!pi.is_empty());
        prop_assert!(weight_identity_check(&pi));
    }

    #[test]
    fn avoider_transitions_stay_triangular(n in 2usize..12, picks in proptest::collection::vec(0usize..64, 12)) {
        let mut state = AvoiderState::root(n).unwrap();
        for p in picks {
            if state.n() < 2 {
                break;
            }
            let branches = state.admissible_branches();
            prop_assert!(!branches.is_empty());
            let next = state.transition(branches[p % branches.len()]).unwrap();
            prop_assert!(next.b().iter().enumerate().all(|(j, &b)| b as usize > j));
            prop_assert!(next.k() <= state.k());
            state = next;
        }
    }

    #[test]
    fn exact_ansatz_is_recovered(c in 1u32..1000, mu in 2u32..40, theta in -6i32..6, n in 4usize..30) {
        // a_m = c * mu^m * m^theta as exact rationals
        let a: Vec<Real> = (1..=n as u32).map(|m| {
            let base = Real::from_biguint(&(BigUint::from(c) * BigUint::from(mu).pow(m)));
            let pw = Real::from_biguint(&BigUint::from(m).pow(theta.unsigned_abs()));
            if theta >= 0 { base.mul(&pw) } else { base.div(&pw).unwrap() }
        }).collect();
        let fit = fit_three_term(&a, n).unwrap();
        prop_assert!(((fit.mu - mu as f64) / mu as f64).abs() < 1e-9, "{:?}", fit);
        prop_assert!((fit.theta - theta as f64).abs() < 1e-9 * (1.0 + theta.abs() as f64), "{:?}", fit);
    }

    #[test]
    fn scaling_leaves_fit_unchanged(scale in 1u64..1_000_000, n in 3usize..31) {
        let a = perm1324::asymptotics::to_reals(&bundled_a1324());
        let s = Real::from_int(scale as i64);
        let scaled: Vec<Real> = a.iter().map(|x| x.mul(&s)).collect();
        let (p, q) = (fit_three_term(&a, n).unwrap(), fit_three_term(&scaled, n).unwrap());
        prop_assert!((p.mu - q.mu).abs() <= 1e-12 * p.mu.abs());
        prop_assert!((p.theta - q.theta).abs() <= 1e-12 * (1.0 + p.theta.abs()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn truncation_consistency(n in 0usize..9, r in 0usize..4, lower in 0usize..4) {
        prop_assume!(lower <= r);
        prop_assert_eq!(series_counts(n, lower).unwrap(), series_counts(n, r).unwrap().truncate(lower));
    }

    #[test]
    fn refined_rows_marginalize(n in 1usize..11) {
        let inv = avoiders_by_inversions(n).unwrap();
        prop_assert_eq!(inv.total(), count_avoiders(n).unwrap());
        prop_assert_eq!(inv.get(0), BigUint::from(1u8));
        prop_assert_eq!(avoiders_by_noninversions(n).unwrap(), inv.reversed());
    }
}
