//! One PASS/FAIL line per acceptance criterion.
//!
//! Verdicts are printed, not asserted: a criterion the model cannot meet
//! is reported as FAIL while the suite still passes. Any computation that
//! errors out does fail the test.

use std::cell::Cell;
use std::f64::consts::PI;
use std::io::Write;

use momentum_entanglement::amplitude::{sample_grid, GridSpec, Kernel};
use momentum_entanglement::cli::recipes::{
    dark_state_sweep, fwhm_vs_delta, pair_at, phase_pair, symmetric_axis, theta_axis, PhasePair,
};
use momentum_entanglement::detection::{scan_coherence, Metric};
use momentum_entanglement::model::initial_amplitudes;
use momentum_entanglement::report::{measure_k, measure_k_kernel, measure_r, measure_r_kernel, KRoute, MeasureOptions};
use momentum_entanglement::schmidt::{
    phase_entanglement, reduced_density_atom, schmidt_decompose, schmidt_number_reduced, Method, SchmidtOptions,
};
use momentum_entanglement::{derive, AtomParams, Error};
use num_complex::Complex64 as C64;
use proptest::test_runner::{Config, TestRunner};

fn say(line: String) {
    // straight to the handle so the verdicts survive output capture
    let mut out = std::io::stdout().lock();
    writeln!(out, "{line}").unwrap();
    out.flush().unwrap();
}

struct Verdicts {
    failed: Vec<usize>,
    /// Grid-doubling changes: (label, relative change, tolerance).
    convergence: Vec<(String, f64, f64)>,
}

impl Verdicts {
    fn record(&mut self, id: usize, name: &str, pass: bool, detail: String) {
        if !pass {
            self.failed.push(id);
        }
        say(format!(
            "{} [{id}] {name}: {detail}",
            if pass { "PASS" } else { "FAIL" }
        ));
    }

    fn doubled(&mut self, label: &str, coarse: f64, fine: f64, tol: f64) {
        self.convergence
            .push((label.to_string(), (fine / coarse - 1.0).abs(), tol));
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a / b - 1.0).abs()
}

fn auto() -> MeasureOptions {
    MeasureOptions {
        k_route: KRoute::Auto,
        ..MeasureOptions::default()
    }
}

fn r_max_formula(delta: f64, eta: f64) -> f64 {
    (2.0 * PI).sqrt() * eta / (delta * delta)
}

fn k_max_formula(delta: f64, eta: f64) -> f64 {
    1.0 + 0.28 * (4.0 * eta / (delta * delta) - 1.0)
}

fn criterion_1(v: &mut Verdicts) -> Result<(), Error> {
    let opts = MeasureOptions::default();
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for (eta, delta) in [(0.1, 0.05), (0.05, 0.05), (0.1, 0.08)] {
        let p = AtomParams::dark_state(delta, eta);
        let r = measure_r(&p, &opts)?.r_ratio;
        let fine = measure_r(&p, &opts.refined(2.0))?.r_ratio;
        v.doubled(&format!("R(eta={eta}, delta={delta})"), r, fine, 0.01);
        let gap = rel(r, r_max_formula(delta, eta));
        worst = worst.max(gap);
        parts.push(format!("({eta}, {delta}) R={r:.2} vs {:.2}", r_max_formula(delta, eta)));
    }
    v.record(
        1,
        "R_max scaling",
        worst < 0.10,
        format!("{}; max rel gap {worst:.4} (tol 0.10)", parts.join(", ")),
    );
    Ok(())
}

fn criterion_2(v: &mut Verdicts) -> Result<(), Error> {
    let opts = MeasureOptions::default();
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for (eta, delta) in [(0.1, 0.1), (0.1, 0.05)] {
        let p = AtomParams::dark_state(delta, eta);
        let k = measure_k(&p, &opts)?;
        let fine = measure_k(&p, &opts.refined(2.0))?;
        v.doubled(&format!("K(eta={eta}, delta={delta})"), k, fine, 0.03);
        let gap = rel(k, k_max_formula(delta, eta));
        worst = worst.max(gap);
        parts.push(format!("({eta}, {delta}) K={k:.3} vs {:.3}", k_max_formula(delta, eta)));
    }
    v.record(
        2,
        "K_max formula",
        worst < 0.15,
        format!("{}; max rel gap {worst:.4} (tol 0.15)", parts.join(", ")),
    );
    Ok(())
}

fn criterion_3(v: &mut Verdicts) -> Result<(), Error> {
    let eta = 0.1;
    let deltas: Vec<f64> = [0.05, 0.075, 0.1, 0.125, 0.15]
        .into_iter()
        .filter(|d| eta / (d * d) >= 4.0)
        .collect();
    let sweep = dark_state_sweep(eta, &deltas, &auto())?;
    let fine = dark_state_sweep(eta, &deltas[..1], &auto().refined(2.0))?;
    v.doubled("R(delta=0.05) in sweep", sweep[0].r, fine[0].r, 0.01);
    v.doubled("K(delta=0.05) in sweep", sweep[0].k, fine[0].k, 0.03);
    let worst = sweep.iter().map(|s| s.gap).fold(0.0, f64::max);
    let gaps: Vec<String> = sweep.iter().map(|s| format!("{}:{:.3}", s.delta, s.gap)).collect();
    v.record(
        3,
        "K ~ R/2.2 at the dark state",
        worst < 0.20,
        format!("gaps |2.2K/R-1| {}; max {worst:.4} (tol 0.20)", gaps.join(" ")),
    );
    Ok(())
}

fn criterion_4(v: &mut Verdicts) -> Result<(), Error> {
    let eta = 0.1;
    let opts = MeasureOptions::default();
    let deltas = [0.01, 0.02, 0.03, 0.04, 0.05];
    let points = fwhm_vs_delta(eta, &deltas, 41, &opts)?;
    let at = points.iter().find(|p| p.delta == 0.02).unwrap();
    let (wr, wt) = (at.fwhm_r.unwrap_or(f64::NAN), at.fwhm_theta.unwrap_or(f64::NAN));
    let fixed = rel(wr, 0.4) <= 0.20 && rel(wt, 0.4) <= 0.20;

    let mut worst: f64 = 0.0;
    let mut tracked = true;
    let mut notes = Vec::new();
    for p in &points {
        match (p.fwhm_r, p.fwhm_theta) {
            (Some(a), Some(b)) => {
                let g = rel(a, p.reference).max(rel(b, p.reference));
                worst = worst.max(g);
                notes.push(format!("{}:{:.3}/{:.3}", p.delta, a / p.reference, b / p.reference));
            }
            _ if p.status.starts_with("skipped") => notes.push(format!("{}:{}", p.delta, p.status)),
            _ => {
                tracked = false;
                notes.push(format!("{}:unbounded", p.delta));
            }
        }
    }
    tracked &= worst <= 0.25;

    let coarse = fwhm_vs_delta(eta, &[0.05], 41, &opts)?;
    let fine = fwhm_vs_delta(eta, &[0.05], 41, &opts.refined(2.0))?;
    if let (Some(a), Some(b)) = (coarse[0].fwhm_r, fine[0].fwhm_r) {
        v.doubled("FWHM_r(delta=0.05)", a, b, 0.01);
    }

    v.record(
        4,
        "FWHM law",
        fixed && tracked,
        format!(
            "delta=0.02: FWHM_r={wr:.3} FWHM_theta={wt:.3} vs 0.4 (tol 20%); \
             ratio to 2delta/eta (r/theta) {}; max rel gap {worst:.3} (tol 0.25)",
            notes.join(" ")
        ),
    );
    Ok(())
}

fn describe(p: &PhasePair) -> String {
    format!(
        "r'={:.4} K={:.3} K'={:.3} R={:.3} R'={:.3} PE={:.3} PE'={:.3}",
        p.r_coherence_prime, p.k, p.k_prime, p.r, p.r_prime, p.pe, p.pe_prime
    )
}

fn criterion_5(v: &mut Verdicts) -> Result<(), Error> {
    // formula level at the original scale
    let r_small_delta = r_max_formula(0.002, 0.1);
    let k_small_delta = k_max_formula(0.002, 0.1);
    let formulas = rel(r_small_delta, 6.2e4) < 0.02 && rel(k_small_delta, 2.8e4) < 0.02;
    let k_free = schmidt_number_reduced(&AtomParams::dark_state(0.002, 0.1))?;

    let search = MeasureOptions {
        k_route: KRoute::Reduced,
        ..MeasureOptions::default()
    };
    let pair = phase_pair(0.05, 0.1, 0.2, &search, &auto())?;
    let fine = pair_at(0.05, 0.1, 0.2, pair.r_coherence_prime, &auto().refined(2.0))?;
    v.doubled("R'(delta=0.05 pair)", pair.r_prime, fine.r_prime, 0.01);
    v.doubled("K'(delta=0.05 pair)", pair.k_prime, fine.k_prime, 0.03);

    let k_match = rel(pair.k_prime, pair.k) <= 0.10;
    let r_drop = pair.r_prime < 0.6 * pair.r;
    let pe_gain = pair.pe_prime > 1.6 * pair.pe;
    v.record(
        5,
        "phase entanglement at equal K",
        formulas && pair.r_coherence_prime > 0.0 && k_match && r_drop && pe_gain,
        format!(
            "formulas R_max={r_small_delta:.0} K_max={k_small_delta:.1} (grid-free K={k_free:.0}); \
             analog {}; K'/K={:.4} (tol 0.10) R'/R={:.4} (need < 0.6) PE'/PE={:.3} (need > 1.6)",
            describe(&pair),
            pair.k_prime / pair.k,
            pair.r_prime / pair.r,
            pair.pe_prime / pair.pe
        ),
    );
    Ok(())
}

fn criterion_6(v: &mut Verdicts) -> Result<(), Error> {
    let pair = pair_at(0.02, 0.12, 0.2, 0.38, &auto())?;
    let fine = pair_at(0.02, 0.12, 0.2, 0.38, &auto().refined(2.0))?;
    v.doubled("R(delta=0.02, eta=0.12)", pair.r, fine.r, 0.01);
    v.doubled("R'(delta=0.02, eta'=0.2)", pair.r_prime, fine.r_prime, 0.01);
    let kk = pair.k_prime / pair.k;
    let rr = pair.r_prime / pair.r;
    v.record(
        6,
        "equal-K pair at delta=0.02",
        (0.85..=1.15).contains(&kk) && (0.25..=0.55).contains(&rr),
        format!(
            "{}; K'/K={kk:.4} in [0.85, 1.15], R'/R={rr:.4} in [0.25, 0.55]",
            describe(&pair)
        ),
    );
    Ok(())
}

fn criterion_7(v: &mut Verdicts) -> Result<(), Error> {
    let cases = [
        (AtomParams::dark_state(0.1, 0.1), 1.0),
        (AtomParams::symmetric(0.15, 0.08, 0.5, 2.0), 0.5),
        (AtomParams::symmetric(0.2, 0.12, -0.7, 1.0), 0.5),
    ];
    let mut worst: f64 = 0.0;
    let mut compared = 0;
    for (p, scale) in cases {
        let d = derive(&p)?;
        let grid = sample_grid(&p, &GridSpec::schmidt_default(&d, p.eta, scale))?;
        let svd = schmidt_decompose(
            &grid,
            &SchmidtOptions {
                method: Method::Svd,
                ..SchmidtOptions::default()
            },
        )?;
        let mut ev = reduced_density_atom(&p, grid.rows())?.eigenvalues()?;
        let total: f64 = ev.iter().filter(|l| **l > 0.0).sum();
        ev.iter_mut().for_each(|l| *l /= total);
        for n in 0..10.min(svd.eigenvalues.len()) {
            worst = worst.max(rel(svd.eigenvalues[n], ev[n]));
            compared += 1;
        }
    }
    v.record(
        7,
        "SVD vs reduced-density spectrum",
        worst < 0.01,
        format!("{compared} eigenvalues over 3 instances, max rel deviation {worst:.2e} (tol 0.01)"),
    );
    Ok(())
}

fn criterion_8(v: &mut Verdicts) -> Result<(), Error> {
    let tol = 1e-6;
    let base = AtomParams::dark_state(0.05, 0.1);
    let opts = MeasureOptions {
        k_route: KRoute::Reduced,
        ..MeasureOptions::default()
    };
    let r_axis = symmetric_axis(3.0, 21);
    let t_axis = theta_axis(21);
    let r_scan = scan_coherence(&base, &r_axis, &t_axis, Metric::R, &opts)?;
    let k_scan = scan_coherence(&base, &r_axis, &t_axis, Metric::K, &opts)?;
    let mut r_min = f64::INFINITY;
    let mut pe_min = (f64::INFINITY, 0.0, 0.0);
    let mut below = 0;
    for (i, &r) in r_axis.iter().enumerate() {
        for (j, &t) in t_axis.iter().enumerate() {
            let (Some(rv), Some(kv)) = (r_scan.value(i, j), k_scan.value(i, j)) else {
                continue;
            };
            r_min = r_min.min(rv);
            let pe = phase_entanglement(kv, rv);
            if pe < 1.0 - tol {
                below += 1;
            }
            if pe < pe_min.0 {
                pe_min = (pe, r, t);
            }
        }
    }
    let missing = r_scan.missing() + k_scan.missing();

    let mut runner = TestRunner::new(Config {
        cases: 10_000,
        failure_persistence: None,
        ..Config::default()
    });
    let root_err = Cell::new(0.0f64);
    let draws = Cell::new(0usize);
    let strategy = (
        0.2f64..5.0,
        0.2f64..5.0,
        0.0f64..3.0,
        0.05f64..1.0,
        -3.0f64..3.0,
        -4.0f64..10.0,
    );
    runner
        .run(&strategy, |(ga, gb, w, eps, r, th)| {
            let p = AtomParams {
                gamma_a: ga,
                gamma_b: gb,
                omega_12: w,
                epsilon: eps,
                coherence_r: r,
                coherence_theta: th,
                eta: 0.1,
            };
            let Ok(d) = derive(&p) else { return Ok(()) };
            let x2 = eps * eps * ga * gb;
            let (a10, _) = initial_amplitudes(r, th);
            let e1 = (d.c1 + d.c2 - a10).norm() / a10.norm().max(1e-300);
            let e2 = (d.s1 * d.s2 + C64::new(0.25 * x2, 0.0)).norm() / (0.25 * x2);
            root_err.set(root_err.get().max(e1).max(e2));
            draws.set(draws.get() + 1);
            Ok(())
        })
        .unwrap();

    let (root_err, draws) = (root_err.get(), draws.get());

    let sep = Kernel::SeparableGaussian {
        eta: 0.1,
        photon_width: 0.2,
    };
    let sep_r = measure_r_kernel(&sep, &MeasureOptions::default())?.0.r_ratio;
    let sep_k = measure_k_kernel(&sep, &MeasureOptions::default())?.0;
    let trapped = matches!(
        measure_r(&AtomParams::dark_state(0.0, 0.1), &MeasureOptions::default()),
        Err(Error::ZeroAmplitude)
    );

    let pass = missing == 0
        && r_min >= 1.0 - tol
        && below == 0
        && root_err < 1e-12
        && (sep_r - 1.0).abs() < 1e-9
        && (sep_k - 1.0).abs() < 1e-9
        && trapped;
    v.record(
        8,
        "invariant suite",
        pass,
        format!(
            "21x21 scan: min R={r_min:.4}, min PE={:.4} at (r={:.2}, theta={:.2}), {below}/441 nodes PE < 1-{tol:e}, \
             {missing} missing; roots over {draws} draws max rel err {root_err:.1e} (tol 1e-12); \
             separable R={sep_r:.12} K={sep_k:.12}; delta=0 zero-amplitude error: {trapped}",
            pe_min.0, pe_min.1, pe_min.2
        ),
    );
    Ok(())
}

#[test]
fn acceptance() {
    let mut v = Verdicts {
        failed: Vec::new(),
        convergence: Vec::new(),
    };
    // libtest has already written "test acceptance ... " on this line
    say(String::new());
    criterion_1(&mut v).unwrap();
    criterion_2(&mut v).unwrap();
    criterion_3(&mut v).unwrap();
    criterion_4(&mut v).unwrap();
    criterion_5(&mut v).unwrap();
    criterion_6(&mut v).unwrap();
    criterion_7(&mut v).unwrap();
    criterion_8(&mut v).unwrap();

    let unconverged: Vec<String> = v
        .convergence
        .iter()
        .filter(|(_, c, tol)| c >= tol)
        .map(|(l, c, tol)| format!("{l} {c:.2e} >= {tol}"))
        .collect();
    let worst = v
        .convergence
        .iter()
        .map(|(l, c, _)| format!("{l} {c:.1e}"))
        .collect::<Vec<_>>()
        .join(", ");
    v.record(
        9,
        "grid-doubling convergence",
        unconverged.is_empty(),
        if unconverged.is_empty() {
            format!("{} headline numbers stable: {worst}", v.convergence.len())
        } else {
            format!("not converged: {}", unconverged.join(", "))
        },
    );
    say(format!(
        "acceptance: {} of 9 criteria failed {:?}",
        v.failed.len(),
        v.failed
    ));
}
