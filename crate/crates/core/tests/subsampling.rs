use grokbench::sampler::{subsample_counts, Fraction};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Integer-only evaluation with f = a/b:
/// s_s = ⌈a·γ_D / (a·γ_s + b·γ_r)⌉, s_r = ⌊b·γ_D / (a·γ_s + b·γ_r)⌋.
fn oracle(a: u128, b: u128, gd: u128, gs: u128, gr: u128) -> (u64, u64) {
    let den = a * gs + b * gr;
    ((a * gd).div_ceil(den) as u64, (b * gd / den) as u64)
}

#[test]
fn ten_thousand_random_tuples_match_exact_integers() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..10_000 {
        let b: u64 = rng.random_range(1..=1000);
        let a: u64 = rng.random_range(0..=b);
        let gd: u64 = rng.random_range(1..=100_000);
        let gs: u64 = rng.random_range(0..=50);
        let gr: u64 = rng.random_range(1..=50);
        let f = Fraction::new(a, b).unwrap();
        let got = subsample_counts(f, gd, gs, gr).unwrap();
        assert_eq!(
            got,
            oracle(a.into(), b.into(), gd.into(), gs.into(), gr.into()),
            "f={a}/{b} gd={gd} gs={gs} gr={gr}"
        );
    }
}

#[test]
fn decimal_inputs_match_integer_oracle() {
    for (f, a, b) in [
        (0.2, 1u128, 5u128),
        (0.01, 1, 100),
        (0.05, 1, 20),
        (0.3, 3, 10),
        (0.125, 1, 8),
    ] {
        for gd in [400u64, 1000, 2000, 2400, 4000, 5000] {
            let got = subsample_counts(Fraction::from_f64(f).unwrap(), gd, 4, 4).unwrap();
            assert_eq!(got, oracle(a, b, gd.into(), 4, 4));
        }
    }
}

proptest! {
    #[test]
    fn monotone_in_f(b in 1u64..200, a1 in 0u64..200, a2 in 0u64..200, gd in 1u64..50_000, gs in 0u64..20, gr in 1u64..20) {
        let (lo, hi) = (a1.min(a2).min(b), a1.max(a2).min(b));
        let (ss_lo, sr_lo) = subsample_counts(Fraction::new(lo, b).unwrap(), gd, gs, gr).unwrap();
        let (ss_hi, sr_hi) = subsample_counts(Fraction::new(hi, b).unwrap(), gd, gs, gr).unwrap();
        prop_assert!(ss_lo <= ss_hi);
        prop_assert!(sr_lo >= sr_hi);
    }

    #[test]
    fn budget_within_rounding_slack(b in 1u64..200, a in 0u64..200, gd in 1u64..50_000, gs in 0u64..20, gr in 1u64..20) {
        let a = a.min(b);
        let (ss, sr) = subsample_counts(Fraction::new(a, b).unwrap(), gd, gs, gr).unwrap();
        let kept = (gs * ss + gr * sr) as i64;
        prop_assert!((kept - gd as i64).unsigned_abs() <= gs + gr);
    }

    #[test]
    fn endpoints(gd in 1u64..50_000, gs in 0u64..20, gr in 1u64..20) {
        let (ss0, _) = subsample_counts(Fraction::ZERO, gd, gs, gr).unwrap();
        prop_assert_eq!(ss0, 0);
        let (ss1, sr1) = subsample_counts(Fraction::ONE, gd, gs, gr).unwrap();
        prop_assert!(ss1.abs_diff(sr1) <= 1);
    }
}
