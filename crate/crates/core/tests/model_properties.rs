use momentum_entanglement::amplitude::{amplitude_at, dark_state_amplitude_at};
use momentum_entanglement::model::initial_amplitudes;
use momentum_entanglement::{derive, AtomParams, Error};
use num_complex::Complex64 as C64;
use proptest::prelude::*;

fn rel(a: C64, b: C64) -> f64 {
    (a - b).norm() / a.norm().max(b.norm()).max(1e-300)
}

fn params() -> impl Strategy<Value = AtomParams> {
    (
        0.2f64..5.0,
        0.2f64..5.0,
        0.0f64..3.0,
        prop_oneof![Just(1.0), 0.05f64..1.0],
        -3.0f64..3.0,
        -4.0f64..10.0,
        0.01f64..0.5,
    )
        .prop_map(|(gamma_a, gamma_b, omega_12, epsilon, r, theta, eta)| AtomParams {
            gamma_a,
            gamma_b,
            omega_12,
            epsilon,
            coherence_r: r,
            coherence_theta: theta,
            eta,
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn root_identities(p in params()) {
        let d = match derive(&p) {
            Ok(d) => d,
            Err(Error::DegenerateRoots) => return Ok(()),
            Err(e) => return Err(TestCaseError::fail(e.to_string())),
        };
        let x2 = p.epsilon * p.epsilon * p.gamma_a * p.gamma_b;
        prop_assert!(rel(d.s1 + d.s2, d.lambda) < 1e-12);
        prop_assert!(rel(d.s1 * d.s2, C64::new(-0.25 * x2, 0.0)) < 1e-12);
        prop_assert!(rel(d.c1 + d.c2, d.a10) < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2_000))]

    #[test]
    fn initial_amplitudes_are_normalized(r in -30.0f64..30.0, theta in -10.0f64..10.0) {
        let (a10, a20) = initial_amplitudes(r, theta);
        prop_assert!((a10.norm_sqr() + a20.norm_sqr() - 1.0).abs() < 1e-12);
        if r.abs() < 20.0 {
            prop_assert!(rel(a10 / a20, C64::from_polar(r.exp(), theta)) < 1e-12);
        }
    }

    #[test]
    fn derive_is_scale_covariant(p in params(), s in 0.1f64..10.0) {
        let Ok(d) = derive(&p) else { return Ok(()) };
        let q = AtomParams {
            gamma_a: p.gamma_a * s,
            gamma_b: p.gamma_b * s,
            omega_12: p.omega_12 * s,
            ..p
        };
        let e = derive(&q).unwrap();
        prop_assert!(rel(e.lambda, d.lambda * s) < 1e-12);
        prop_assert!(rel(e.s1, d.s1 * s) < 1e-12);
        prop_assert!(rel(e.s2, d.s2 * s) < 1e-12);
        prop_assert!(rel(e.c1, d.c1) < 1e-10);
        prop_assert!(rel(e.c2, d.c2) < 1e-10);
        match (d.delta, e.delta) {
            (Some(a), Some(b)) => prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0)),
            (None, None) => {}
            _ => prop_assert!(false, "delta defined for one scale only"),
        }
    }

    #[test]
    fn amplitude_is_constant_along_ridge_lines(
        p in params(),
        dq1 in -0.3f64..0.3,
        dq2 in -0.3f64..0.3,
        v in -0.5f64..0.5,
    ) {
        let Ok(d) = derive(&p) else { return Ok(()) };
        if d.is_trapped() {
            return Ok(());
        }
        let g = |dq: f64| (-(dq / p.eta) * (dq / p.eta)).exp();
        let (Ok(b1), Ok(b2)) = (amplitude_at(&d, &p, dq1, v - dq1), amplitude_at(&d, &p, dq2, v - dq2)) else {
            return Ok(());
        };
        if g(dq1) < 1e-200 || g(dq2) < 1e-200 {
            return Ok(());
        }
        prop_assert!(rel(b1 / g(dq1), b2 / g(dq2)) < 1e-12);
    }

    #[test]
    fn dark_state_reduces_to_single_lorentzian(delta in 0.01f64..0.3, dq in -0.2f64..0.2, t in -10.0f64..10.0) {
        // near the ridge v = -delta/2, within a few half-widths delta^2/4
        let p = AtomParams::dark_state(delta, 0.1);
        let d = derive(&p).unwrap();
        let w = 0.25 * delta * delta;
        let dk = -0.5 * delta + t * w - dq;
        let full = amplitude_at(&d, &p, dq, dk).unwrap();
        let shifted = dark_state_amplitude_at(delta, 0.1, dq, dk + 0.5 * delta);
        let reference = amplitude_at(&d, &p, 0.0, -0.5 * delta).unwrap()
            / dark_state_amplitude_at(delta, 0.1, 0.0, 0.0);
        let ratio = full / shifted / reference;
        prop_assert!((ratio - 1.0).norm() < 2.0 * delta, "ratio {ratio}");
    }
}

#[test]
fn delta_is_only_reported_for_equal_linewidths() {
    let mut p = AtomParams::dark_state(0.05, 0.1);
    assert_eq!(derive(&p).unwrap().delta, Some(0.05));
    p.gamma_b = 1.5;
    assert_eq!(derive(&p).unwrap().delta, None);
}

#[test]
fn exceptional_point_is_rejected() {
    let p = AtomParams::dark_state(1.0, 0.1);
    assert!(matches!(derive(&p), Err(Error::DegenerateRoots)));
}

#[test]
fn zero_splitting_dark_state_is_trapped() {
    let d = derive(&AtomParams::dark_state(0.0, 0.1)).unwrap();
    assert!(d.is_trapped());
}
