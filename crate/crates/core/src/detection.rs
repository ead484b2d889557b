//! Momentum-detection entanglement: unconditional and conditional atomic
//! momentum variances, their ratio `R`, coherence scans and profile widths.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::amplitude::{Axis, JointAmplitudeGrid};
use crate::error::{Error, Result};
use crate::model::AtomParams;
use crate::report::{measure, MeasureOptions};

/// Slices carrying less than this fraction of the peak photon marginal are empty.
pub const EMPTY_SLICE_THRESHOLD: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", content = "dk0", rename_all = "snake_case")]
pub enum ConditioningPoint {
    PeakOfPhotonMarginal,
    Explicit(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceReport {
    pub var_single: f64,
    pub var_coin: f64,
    pub dk0: f64,
    pub r_ratio: f64,
    pub policy: ConditioningPoint,
    /// Ridge resolution check of the grid; absent for non-emission kernels.
    pub adequate: Option<bool>,
}

fn moments(nodes: &[f64], weights: &[f64], density: impl Fn(usize) -> f64) -> (f64, f64, f64) {
    let (mut m0, mut m1) = (0.0, 0.0);
    for (i, (x, w)) in nodes.iter().zip(weights).enumerate() {
        let p = density(i) * w;
        m0 += p;
        m1 += p * x;
    }
    if m0 <= 0.0 {
        return (m0, 0.0, 0.0);
    }
    let mean = m1 / m0;
    // central second moment in a second pass for stability
    let var = nodes
        .iter()
        .zip(weights)
        .enumerate()
        .map(|(i, (x, w))| density(i) * w * (x - mean) * (x - mean))
        .sum::<f64>()
        / m0;
    (m0, mean, var)
}

/// `<dq^2> - <dq>^2` under `|B|^2` over the whole grid.
pub fn unconditional_variance(grid: &JointAmplitudeGrid) -> Result<f64> {
    if grid.n_rows() < 2 || grid.n_cols() < 2 {
        return Err(Error::DegenerateGrid(format!(
            "{} x {} grid",
            grid.n_rows(),
            grid.n_cols()
        )));
    }
    let cols = grid.cols();
    let marginal: Vec<f64> = (0..grid.n_rows())
        .into_par_iter()
        .map(|i| {
            grid.row(i)
                .iter()
                .zip(&cols.weights)
                .map(|(b, w)| b.norm_sqr() * w)
                .sum()
        })
        .collect();
    let rows = grid.rows();
    let (mass, _, var) = moments(&rows.nodes, &rows.weights, |i| marginal[i]);
    if !(mass > 0.0) {
        return Err(Error::ZeroAmplitude);
    }
    Ok(var)
}

fn check_range(grid: &JointAmplitudeGrid, dk0: f64) -> Result<()> {
    let (min, max) = grid.photon_range();
    if !(dk0 >= min && dk0 <= max) {
        return Err(Error::ConditioningOutOfRange { dk0, min, max });
    }
    Ok(())
}

fn slice_density(grid: &JointAmplitudeGrid, dk0: f64) -> Result<(Axis, Vec<f64>)> {
    let (axis, values) = grid.slice(dk0)?;
    Ok((axis, values.iter().map(|b| b.norm_sqr()).collect()))
}

/// Photon marginal `int |B(dq, dk)|^2 d dq` at one photon coordinate.
pub fn photon_marginal(grid: &JointAmplitudeGrid, dk: f64) -> Result<f64> {
    let (axis, density) = slice_density(grid, dk)?;
    Ok(density.iter().zip(&axis.weights).map(|(p, w)| p * w).sum())
}

/// Location of the maximum of the photon marginal: a coarse scan over the
/// grid's photon range refined by golden-section search.
pub fn photon_marginal_peak(grid: &JointAmplitudeGrid) -> Result<(f64, f64)> {
    let (lo, hi) = grid.photon_range();
    let n = 129;
    let step = (hi - lo) / (n - 1) as f64;
    let candidates: Vec<f64> = (0..n).map(|i| lo + i as f64 * step).collect();
    let values = candidates
        .par_iter()
        .map(|&k| photon_marginal(grid, k))
        .collect::<Result<Vec<_>>>()?;
    let (best, _) = values
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("nonempty scan");

    let mut a = (candidates[best] - step).max(lo);
    let mut b = (candidates[best] + step).min(hi);
    let inv_phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = photon_marginal(grid, c)?;
    let mut fd = photon_marginal(grid, d)?;
    let resolution = grid.spec.ridge_spacing() * 1e-3;
    for _ in 0..200 {
        if b - a <= resolution {
            break;
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = photon_marginal(grid, c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = photon_marginal(grid, d)?;
        }
    }
    let (k, f) = if fc >= fd { (c, fc) } else { (d, fd) };
    if values[best] > f {
        return Ok((candidates[best], values[best]));
    }
    Ok((k, f))
}

fn conditional_with_peak(grid: &JointAmplitudeGrid, dk0: f64, peak_mass: f64) -> Result<f64> {
    check_range(grid, dk0)?;
    let (axis, density) = slice_density(grid, dk0)?;
    let (mass, _, var) = moments(&axis.nodes, &axis.weights, |i| density[i]);
    let relative_mass = if peak_mass > 0.0 { mass / peak_mass } else { 0.0 };
    if !(relative_mass > EMPTY_SLICE_THRESHOLD) {
        return Err(Error::EmptySlice { dk0, relative_mass });
    }
    Ok(var)
}

/// Variance of `dq` over the unit-mass slice `|B(dq, dk0)|^2`.
pub fn conditional_variance(grid: &JointAmplitudeGrid, dk0: f64) -> Result<f64> {
    check_range(grid, dk0)?;
    let (_, peak) = photon_marginal_peak(grid)?;
    conditional_with_peak(grid, dk0, peak)
}

pub fn r_ratio(grid: &JointAmplitudeGrid, policy: ConditioningPoint) -> Result<VarianceReport> {
    let var_single = unconditional_variance(grid)?;
    let (peak_k, peak_mass) = photon_marginal_peak(grid)?;
    let dk0 = match policy {
        ConditioningPoint::PeakOfPhotonMarginal => peak_k,
        ConditioningPoint::Explicit(k) => k,
    };
    let var_coin = conditional_with_peak(grid, dk0, peak_mass)?;
    if !(var_coin > 0.0) {
        return Err(Error::DegenerateGrid(format!(
            "conditional slice at dk0 = {dk0} is a single node"
        )));
    }
    Ok(VarianceReport {
        var_single,
        var_coin,
        dk0,
        r_ratio: var_single / var_coin,
        policy,
        adequate: grid.adequacy.map(|a| a.adequate),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Width {
    Bounded(f64),
    Unbounded,
}

impl Width {
    pub fn value(self) -> Option<f64> {
        match self {
            Width::Bounded(w) => Some(w),
            Width::Unbounded => None,
        }
    }
}

/// Full width at half maximum by linear interpolation between the samples
/// bracketing each half-maximum crossing.
pub fn fwhm(x: &[f64], y: &[f64]) -> Result<Width> {
    if x.len() != y.len() || x.len() < 3 {
        return Err(Error::InvalidParams(format!(
            "profile needs matching abscissae and at least 3 samples, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    let (peak, &top) = y
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("nonempty");
    let half = 0.5 * top;
    let crossing = |i: usize, j: usize| x[i] + (half - y[i]) * (x[j] - x[i]) / (y[j] - y[i]);
    let left = (1..=peak).rev().find(|&i| y[i - 1] < half).map(|i| crossing(i - 1, i));
    let right = (peak..y.len() - 1)
        .find(|&i| y[i + 1] < half)
        .map(|i| crossing(i, i + 1));
    Ok(match (left, right) {
        (Some(l), Some(r)) => Width::Bounded(r - l),
        _ => Width::Unbounded,
    })
}

/// `baseline + amplitude / (1 + ((x - center) / half_width)^2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LorentzFit {
    pub amplitude: f64,
    pub center: f64,
    pub half_width: f64,
    pub baseline: f64,
    /// Root-mean-square residual divided by the largest sample.
    pub rms_residual: f64,
    pub iterations: usize,
}

impl LorentzFit {
    pub fn eval(&self, x: f64) -> f64 {
        let t = (x - self.center) / self.half_width;
        self.baseline + self.amplitude / (1.0 + t * t)
    }
}

fn solve4(mut a: [[f64; 4]; 4], mut b: [f64; 4]) -> Option<[f64; 4]> {
    for col in 0..4 {
        let pivot = (col..4).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..4 {
            let f = a[row][col] / a[col][col];
            for k in col..4 {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 4];
    for row in (0..4).rev() {
        let s: f64 = (row + 1..4).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

/// Levenberg-Marquardt least-squares fit of a Lorentzian on a constant baseline.
pub fn fit_lorentzian(x: &[f64], y: &[f64]) -> Result<LorentzFit> {
    if x.len() != y.len() || x.len() < 5 {
        return Err(Error::Fit(format!("need at least 5 samples, got {}", x.len())));
    }
    let top = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let bottom = y.iter().copied().fold(f64::INFINITY, f64::min);
    if !(top.is_finite() && bottom.is_finite()) || top <= bottom {
        return Err(Error::Fit("flat or non-finite profile".into()));
    }
    let peak = y.iter().position(|&v| v == top).expect("max present");
    let span = x[x.len() - 1] - x[0];
    let guess = match fwhm(x, y)? {
        Width::Bounded(w) => 0.5 * w,
        Width::Unbounded => 0.25 * span.abs(),
    };
    let mut p = [bottom, top - bottom, x[peak], guess.max(1e-12)];

    let residuals = |p: &[f64; 4]| -> Vec<f64> {
        x.iter()
            .zip(y)
            .map(|(&xi, &yi)| {
                let t = (xi - p[2]) / p[3];
                yi - (p[0] + p[1] / (1.0 + t * t))
            })
            .collect()
    };
    let cost = |r: &[f64]| r.iter().map(|v| v * v).sum::<f64>();

    let mut r = residuals(&p);
    let mut c = cost(&r);
    let mut mu = 1e-3;
    let mut iterations = 0;
    for it in 0..500 {
        iterations = it + 1;
        let mut jtj = [[0.0; 4]; 4];
        let mut jtr = [0.0; 4];
        for (&xi, ri) in x.iter().zip(&r) {
            let t = (xi - p[2]) / p[3];
            let d = 1.0 + t * t;
            let j = [
                1.0,
                1.0 / d,
                2.0 * p[1] * t / (p[3] * d * d),
                2.0 * p[1] * t * t / (p[3] * d * d),
            ];
            for a in 0..4 {
                jtr[a] += j[a] * ri;
                for b in 0..4 {
                    jtj[a][b] += j[a] * j[b];
                }
            }
        }
        let mut improved = false;
        for _ in 0..30 {
            let mut damped = jtj;
            for (a, row) in damped.iter_mut().enumerate() {
                row[a] += mu * jtj[a][a].max(1e-300);
            }
            let Some(step) = solve4(damped, jtr) else {
                mu *= 4.0;
                continue;
            };
            let trial = [p[0] + step[0], p[1] + step[1], p[2] + step[2], p[3] + step[3]];
            if trial[3] == 0.0 || trial.iter().any(|v| !v.is_finite()) {
                mu *= 4.0;
                continue;
            }
            let rt = residuals(&trial);
            let ct = cost(&rt);
            if ct < c {
                let gain = (c - ct) / c.max(1e-300);
                p = trial;
                r = rt;
                c = ct;
                mu = (mu / 3.0).max(1e-12);
                improved = gain > 1e-14;
                break;
            }
            mu *= 4.0;
        }
        if !improved {
            break;
        }
    }
    let rms = (c / x.len() as f64).sqrt() / top.abs();
    Ok(LorentzFit {
        amplitude: p[1],
        center: p[2],
        half_width: p[3].abs(),
        baseline: p[0],
        rms_residual: rms,
        iterations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    R,
    K,
    PE,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::R => "R",
            Metric::K => "K",
            Metric::PE => "PE",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub r: f64,
    pub theta: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeOutcome {
    pub value: Option<f64>,
    pub adequate: bool,
    pub extrapolated: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanResult {
    pub metric: Metric,
    pub axis_r: Vec<f64>,
    pub axis_theta: Vec<f64>,
    /// Row-major over `(r, theta)`.
    pub nodes: Vec<NodeOutcome>,
    pub peak: Option<Peak>,
    pub fwhm_r: Width,
    pub fwhm_theta: Width,
    pub fit_r: Option<LorentzFit>,
    pub fit_theta: Option<LorentzFit>,
}

impl ScanResult {
    pub fn value(&self, i_r: usize, i_theta: usize) -> Option<f64> {
        self.nodes[i_r * self.axis_theta.len() + i_theta].value
    }

    /// Known samples along `r` at fixed `theta` index.
    pub fn cut_r(&self, i_theta: usize) -> (Vec<f64>, Vec<f64>) {
        self.axis_r
            .iter()
            .enumerate()
            .filter_map(|(i, &r)| self.value(i, i_theta).map(|v| (r, v)))
            .unzip()
    }

    /// Known samples along `theta` at fixed `r` index.
    pub fn cut_theta(&self, i_r: usize) -> (Vec<f64>, Vec<f64>) {
        self.axis_theta
            .iter()
            .enumerate()
            .filter_map(|(j, &t)| self.value(i_r, j).map(|v| (t, v)))
            .unzip()
    }

    pub fn missing(&self) -> usize {
        self.nodes.iter().filter(|n| n.value.is_none()).count()
    }
}

fn check_axis(name: &str, axis: &[f64]) -> Result<()> {
    if axis.is_empty() {
        return Err(Error::Config(format!("{name} axis is empty")));
    }
    if axis.iter().any(|v| !v.is_finite()) || axis.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config(format!(
            "{name} axis must be finite and strictly increasing"
        )));
    }
    Ok(())
}

fn cut_summary(x: &[f64], y: &[f64]) -> (Width, Option<LorentzFit>) {
    let width = fwhm(x, y).unwrap_or(Width::Unbounded);
    (width, fit_lorentzian(x, y).ok())
}

/// Evaluates `metric` at every `(r, theta)` node with the other parameters
/// of `base`. Node failures are recorded, not propagated.
pub fn scan_coherence(
    base: &AtomParams,
    r_axis: &[f64],
    theta_axis: &[f64],
    metric: Metric,
    opts: &MeasureOptions,
) -> Result<ScanResult> {
    check_axis("r", r_axis)?;
    check_axis("theta", theta_axis)?;
    let points: Vec<(f64, f64)> = r_axis
        .iter()
        .flat_map(|&r| theta_axis.iter().map(move |&t| (r, t)))
        .collect();
    let nodes: Vec<NodeOutcome> = points
        .par_iter()
        .map(|&(r, theta)| {
            let params = base.with_coherence(r, theta);
            let extrapolated = params.regime() == crate::model::Regime::Extrapolated;
            match measure(&params, metric, opts) {
                Ok(m) => NodeOutcome {
                    value: Some(m.value),
                    adequate: m.adequate,
                    extrapolated,
                    error: None,
                },
                Err(e) => NodeOutcome {
                    value: None,
                    adequate: false,
                    extrapolated,
                    error: Some(e.code().to_string()),
                },
            }
        })
        .collect();

    let n_theta = theta_axis.len();
    let peak_index = nodes
        .iter()
        .enumerate()
        .filter_map(|(i, n)| n.value.map(|v| (i, v)))
        .max_by(|a, b| a.1.total_cmp(&b.1));
    let mut result = ScanResult {
        metric,
        axis_r: r_axis.to_vec(),
        axis_theta: theta_axis.to_vec(),
        nodes,
        peak: None,
        fwhm_r: Width::Unbounded,
        fwhm_theta: Width::Unbounded,
        fit_r: None,
        fit_theta: None,
    };
    if let Some((index, value)) = peak_index {
        let (i_r, i_t) = (index / n_theta, index % n_theta);
        result.peak = Some(Peak {
            r: r_axis[i_r],
            theta: theta_axis[i_t],
            value,
        });
        let (xr, yr) = result.cut_r(i_t);
        let (xt, yt) = result.cut_theta(i_r);
        if xr.len() >= 3 {
            (result.fwhm_r, result.fit_r) = cut_summary(&xr, &yr);
        }
        if xt.len() >= 3 {
            (result.fwhm_theta, result.fit_theta) = cut_summary(&xt, &yt);
        }
    }
    Ok(result)
}
