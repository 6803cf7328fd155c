use driftcheck_core::energy::{hybrid_score, mse_energy, EnergyError, HybridConfig};
use proptest::prelude::*;

/// Compensated (Neumaier) sum of exactly-split squares.
fn mse_oracle(a: &[f64], b: &[f64]) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    let mut add = |x: f64| {
        let t = sum + x;
        comp += if sum.abs() >= x.abs() { (sum - t) + x } else { (x - t) + sum };
        sum = t;
    };
    for (x, y) in a.iter().zip(b) {
        let d = x - y;
        let sq = d * d;
        add(sq);
        add(d.mul_add(d, -sq));
    }
    (sum + comp) / a.len() as f64
}

#[test]
fn hybrid_examples() {
    assert_eq!(hybrid_score(0.8, 0.2, 0.5).unwrap(), 0.8);
    assert_eq!(hybrid_score(0.3, 0.9, 1.0).unwrap(), 0.3);
    assert!((hybrid_score(0.3, 0.9, 0.0).unwrap() - 0.1).abs() < 1e-15);
}

#[test]
fn inputs_outside_the_unit_interval_are_rejected() {
    assert!(matches!(hybrid_score(1.1, 0.0, 0.5), Err(EnergyError::OutOfRange { name: "s_disc", .. })));
    assert!(matches!(hybrid_score(0.5, -0.1, 0.5), Err(EnergyError::OutOfRange { name: "e_sem", .. })));
    assert!(matches!(hybrid_score(0.5, 0.5, f64::NAN), Err(EnergyError::OutOfRange { name: "lambda", .. })));
    assert!(HybridConfig::new(1.5).is_err());
    assert_eq!(HybridConfig::default().lambda, 0.5);
}

#[test]
fn mse_needs_matching_dimensions() {
    assert_eq!(mse_energy(&[1.0], &[1.0, 2.0]), Err(EnergyError::DimensionMismatch { left: 1, right: 2 }));
    assert_eq!(mse_energy(&[0.5, -0.5], &[0.5, -0.5]).unwrap(), 0.0);
}

proptest! {
    #[test]
    fn hybrid_is_affine_in_lambda(s in 0.0f64..=1.0, e in 0.0f64..=1.0, l in 0.0f64..=1.0) {
        let h = hybrid_score(s, e, l).unwrap();
        let ends = l * hybrid_score(s, e, 1.0).unwrap() + (1.0 - l) * hybrid_score(s, e, 0.0).unwrap();
        prop_assert!((h - ends).abs() <= 1e-12);
        prop_assert!((0.0..=1.0).contains(&h));
    }

    #[test]
    fn hybrid_is_monotone(
        s in 0.0f64..=1.0, e in 0.0f64..=1.0, l in 0.0f64..=1.0,
        ds in 0.0f64..=1.0, de in 0.0f64..=1.0,
    ) {
        let h = hybrid_score(s, e, l).unwrap();
        let more_disc = hybrid_score((s + ds).min(1.0), e, l).unwrap();
        let more_energy = hybrid_score(s, (e + de).min(1.0), l).unwrap();
        prop_assert!(more_disc >= h - 1e-15);
        prop_assert!(more_energy <= h + 1e-15);
    }

    #[test]
    fn mse_matches_compensated_oracle(pairs in prop::collection::vec((-2.0f64..2.0, -2.0f64..2.0), 1..512)) {
        let (a, b): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let got = mse_energy(&a, &b).unwrap();
        let want = mse_oracle(&a, &b);
        prop_assert!((got - want).abs() <= 1e-12 * want.max(1e-300) + 1e-300, "{got} vs {want}");
        prop_assert!(got >= 0.0);
        prop_assert_eq!(mse_energy(&b, &a).unwrap(), got);
    }
}
