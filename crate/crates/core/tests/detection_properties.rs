use std::f64::consts::PI;

use momentum_entanglement::amplitude::{sample_grid, GridSpec, JointAmplitudeGrid};
use momentum_entanglement::detection::{
    conditional_variance, fit_lorentzian, fwhm, r_ratio, scan_coherence, ConditioningPoint, Metric, Width,
};
use momentum_entanglement::report::{measure_r, MeasureOptions};
use momentum_entanglement::schmidt::schmidt_number_purity;
use momentum_entanglement::{derive, AtomParams, Error};
use num_complex::Complex64 as C64;
use proptest::prelude::*;

fn r_of(p: &AtomParams) -> f64 {
    measure_r(p, &MeasureOptions::default()).unwrap().r_ratio
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn r_is_at_least_one(r in -2.0f64..2.0, theta in 0.0f64..(2.0 * PI), delta in 0.08f64..0.3) {
        let v = r_of(&AtomParams::symmetric(delta, 0.1, r, theta));
        prop_assert!(v >= 1.0 - 1e-6, "R = {v}");
    }

    #[test]
    fn r_map_is_mirror_symmetric(r in 0.05f64..1.5, theta in 0.0f64..(2.0 * PI)) {
        let a = r_of(&AtomParams::symmetric(0.1, 0.1, r, theta));
        let b = r_of(&AtomParams::symmetric(0.1, 0.1, -r, theta));
        prop_assert!((a / b - 1.0).abs() < 0.02, "{a} vs {b}");
    }
}

fn tabulated(grid: &JointAmplitudeGrid, factor: C64) -> JointAmplitudeGrid {
    JointAmplitudeGrid::from_samples(grid.spec, grid.values.iter().map(|v| v * factor).collect()).unwrap()
}

#[test]
fn r_and_k_ignore_global_phase_and_scale() {
    let p = AtomParams::symmetric(0.2, 0.1, 0.3, 2.0);
    let d = derive(&p).unwrap();
    let spec = GridSpec::schmidt_default(&d, p.eta, 0.5);
    let grid = sample_grid(&p, &spec).unwrap();
    let base = tabulated(&grid, C64::new(1.0, 0.0));
    let rotated = tabulated(&grid, C64::from_polar(7.5, 1.1));
    for (i, (a, b)) in base.values.iter().zip(&rotated.values).enumerate().step_by(997) {
        assert!((a.norm() - b.norm()).abs() <= 1e-12 * a.norm().max(1e-300), "node {i}");
    }
    let policy = ConditioningPoint::PeakOfPhotonMarginal;
    let ra = r_ratio(&base, policy).unwrap().r_ratio;
    let rb = r_ratio(&rotated, policy).unwrap().r_ratio;
    assert!((ra / rb - 1.0).abs() < 1e-10, "{ra} vs {rb}");
    let budget = Default::default();
    let ka = schmidt_number_purity(&base, &budget).unwrap();
    let kb = schmidt_number_purity(&rotated, &budget).unwrap();
    assert!((ka / kb - 1.0).abs() < 1e-10);
    assert!(ka >= 1.0);
}

#[test]
fn separable_limit_gives_unit_ratio() {
    // the Gaussian collapses below the ridge width and the kernel factorizes
    let delta = 0.3;
    let mut last = f64::INFINITY;
    for eta in [delta * delta / 10.0, delta * delta / 20.0, delta * delta / 40.0] {
        let r = r_of(&AtomParams::dark_state(delta, eta));
        assert!(r < 1.1, "eta = {eta}: R = {r}");
        assert!(r <= last + 1e-9);
        last = r;
    }
}

#[test]
fn conditioning_outside_photon_range_is_rejected() {
    let p = AtomParams::dark_state(0.1, 0.1);
    let d = derive(&p).unwrap();
    let grid = sample_grid(&p, &GridSpec::detection_default(&d, p.eta, 0.5)).unwrap();
    let (_, hi) = grid.photon_range();
    assert!(matches!(
        conditional_variance(&grid, hi + 1.0),
        Err(Error::ConditioningOutOfRange { .. })
    ));
    assert!(matches!(
        r_ratio(&grid, ConditioningPoint::Explicit(hi + 1.0)),
        Err(Error::ConditioningOutOfRange { .. })
    ));
}

#[test]
fn fwhm_of_sampled_lorentzian() {
    let x: Vec<f64> = (0..401).map(|i| -2.0 + 0.01 * i as f64).collect();
    let y: Vec<f64> = x.iter().map(|v| 1.0 / (1.0 + (v / 0.3) * (v / 0.3))).collect();
    match fwhm(&x, &y).unwrap() {
        Width::Bounded(w) => assert!((w - 0.6).abs() < 1e-3, "{w}"),
        Width::Unbounded => panic!("bounded peak reported unbounded"),
    }
    let fit = fit_lorentzian(&x, &y).unwrap();
    assert!((fit.half_width - 0.3).abs() < 1e-6);
    assert!(fit.rms_residual < 1e-8);

    let rising: Vec<f64> = x.iter().map(|v| v + 3.0).collect();
    assert_eq!(fwhm(&x, &rising).unwrap(), Width::Unbounded);
}

#[test]
fn scan_rejects_empty_axes_and_keeps_order() {
    let base = AtomParams::dark_state(0.1, 0.1);
    let opts = MeasureOptions::default().with_scale(0.5);
    assert!(matches!(
        scan_coherence(&base, &[], &[PI], Metric::R, &opts),
        Err(Error::Config(_))
    ));
    let axis = [-0.5, 0.0, 0.5];
    let s = scan_coherence(&base, &axis, &[PI], Metric::R, &opts).unwrap();
    assert_eq!(s.nodes.len(), 3);
    let (x, y) = s.cut_r(0);
    assert_eq!(x, axis);
    assert!(y[1] > y[0] && y[1] > y[2]);
    assert_eq!(s.missing(), 0);
}

#[test]
fn trapped_scan_node_degrades_to_missing_value() {
    // the r = 0 node of a zero-splitting dark state is identically zero
    let base = AtomParams::dark_state(0.0, 0.1);
    let opts = MeasureOptions::default().with_scale(0.5);
    let s = scan_coherence(&base, &[0.0, 0.5], &[PI], Metric::R, &opts).unwrap();
    assert_eq!(s.missing(), 1);
    assert!(s.nodes[0].value.is_none());
    assert_eq!(s.nodes[0].error.as_deref(), Some("zero_amplitude"));
    assert!(s.nodes[1].value.is_some_and(f64::is_finite));

    let live = AtomParams::dark_state(0.1, 0.1);
    let s = scan_coherence(&live, &[-1.0, 0.0], &[PI], Metric::R, &opts).unwrap();
    assert_eq!(s.missing(), 0);
}
