//! Schmidt decomposition of the sampled joint amplitude, the Schmidt number,
//! an independent reduced-density-matrix route to the same spectrum, and
//! the phase-entanglement measure.

use std::f64::consts::PI;

use faer::{c64, Mat, Side};
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::amplitude::{Axis, Budget, JointAmplitudeGrid, Scheme};
use crate::error::{Error, Result};
use crate::model::{derive, AtomParams, DerivedParams, Pole, Regime};
use crate::quadrature::{integrate_real_line, QuadratureOptions};

/// Proportionality constant between `K` and `R` at the dark state.
pub const PE_CONSTANT: f64 = 2.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Thin SVD of the weighted kernel for small matrices, Gram eigendecomposition otherwise.
    Auto,
    Svd,
    Gram,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchmidtOptions {
    /// Retained-mass cutoff: modes are kept until `1 - tol` of the weight is covered.
    pub tol: f64,
    pub method: Method,
    /// Hard cap on the number of retained modes.
    pub max_modes: usize,
    pub budget: Budget,
}

impl Default for SchmidtOptions {
    fn default() -> Self {
        SchmidtOptions {
            tol: 1e-6,
            method: Method::Auto,
            max_modes: 4096,
            budget: Budget::default(),
        }
    }
}

/// Matrices up to this many entries go through the SVD under [`Method::Auto`].
pub const AUTO_SVD_ENTRIES: usize = 2_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Truncation {
    pub retained: usize,
    pub retained_mass: f64,
    /// True when `max_modes` or the matrix rank stopped the expansion early.
    pub rank_limited: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchmidtResult {
    /// Full nonincreasing spectrum, normalized to unit sum.
    pub eigenvalues: Vec<f64>,
    /// Retained atomic modes on `q_axis`, unit norm under its weights.
    pub atomic_modes: Vec<Vec<C64>>,
    /// Retained photonic modes on `k_axis`.
    pub photonic_modes: Vec<Vec<C64>>,
    pub q_axis: Axis,
    pub k_axis: Axis,
    pub k: f64,
    pub truncation: Truncation,
    pub method: Method,
}

impl SchmidtResult {
    /// `sum_n sqrt(lambda_n) psi_n(q_i) phi_n(k_j)` over the retained modes.
    pub fn reconstruct(&self, i: usize, j: usize) -> C64 {
        self.atomic_modes
            .iter()
            .zip(&self.photonic_modes)
            .zip(&self.eigenvalues)
            .map(|((psi, phi), l)| psi[i] * phi[j] * l.sqrt())
            .sum()
    }
}

/// `K = 1 / sum lambda_n^2` after normalizing the list to unit sum.
pub fn schmidt_number(eigenvalues: &[f64]) -> Result<f64> {
    if eigenvalues.iter().any(|l| !l.is_finite() || *l < 0.0) {
        return Err(Error::InvalidParams(
            "eigenvalues must be finite and nonnegative".into(),
        ));
    }
    let total: f64 = eigenvalues.iter().sum();
    if !(total > 0.0) {
        return Err(Error::InvalidParams("all eigenvalues are zero".into()));
    }
    let purity: f64 = eigenvalues.iter().map(|l| (l / total) * (l / total)).sum();
    Ok(1.0 / purity)
}

pub fn phase_entanglement(k: f64, r: f64) -> f64 {
    PE_CONSTANT * k / r
}

/// The `K ~ R / 2.2` relation is trusted for `eta / delta^2 >= 4` and
/// `eta <= 0.25` at equal linewidths.
pub fn pe_regime(params: &AtomParams) -> Regime {
    if ((params.gamma_a - params.gamma_b) / params.gamma_a).abs() >= 1e-9 {
        return Regime::Extrapolated;
    }
    let delta = params.omega_12 / params.gamma_a;
    if delta > 0.0 && params.eta / (delta * delta) >= 4.0 && params.eta <= 0.25 {
        Regime::Validated
    } else {
        Regime::Extrapolated
    }
}

fn check_product_grid(grid: &JointAmplitudeGrid, budget: &Budget) -> Result<(usize, usize)> {
    if grid.spec.scheme != Scheme::Uniform {
        return Err(Error::Unsupported(
            "Schmidt decomposition needs a product grid over (dq, dk)".into(),
        ));
    }
    let (m, n) = (grid.n_rows(), grid.n_cols());
    let entries = m.saturating_mul(n);
    if entries > budget.max_decomposition_entries {
        return Err(Error::BudgetExceeded {
            what: "decomposition matrix entries",
            needed: entries,
            budget: budget.max_decomposition_entries,
        });
    }
    Ok((m, n))
}

/// `sqrt(w_q) B sqrt(w_k)`: its singular values are those of the continuum kernel.
fn weighted_matrix(grid: &JointAmplitudeGrid) -> Mat<c64> {
    let sq: Vec<f64> = grid.rows().weights.iter().map(|w| w.sqrt()).collect();
    let sk: Vec<f64> = grid.cols().weights.iter().map(|w| w.sqrt()).collect();
    Mat::from_fn(grid.n_rows(), grid.n_cols(), |i, j| grid.value(i, j) * (sq[i] * sk[j]))
}

fn gram(m: &Mat<c64>) -> Mat<c64> {
    if m.nrows() <= m.ncols() {
        m * m.adjoint()
    } else {
        m.adjoint() * m
    }
}

/// Schmidt number from the purity `tr(rho^2)` of the reduced state, without
/// diagonalizing.
pub fn schmidt_number_purity(grid: &JointAmplitudeGrid, budget: &Budget) -> Result<f64> {
    check_product_grid(grid, budget)?;
    let g = gram(&weighted_matrix(grid));
    let n = g.nrows();
    let trace: f64 = (0..n).map(|i| g[(i, i)].re).sum();
    let frob: f64 = (0..n)
        .into_par_iter()
        .map(|j| (0..n).map(|i| g[(i, j)].norm_sqr()).sum::<f64>())
        .sum();
    if !(frob > 0.0) {
        return Err(Error::ZeroAmplitude);
    }
    Ok(trace * trace / frob)
}

/// Rotates a mode pair so that the photonic factor is real and positive at
/// column `anchor`; when it vanishes there the first significant atomic
/// sample is made real instead.
fn fix_phase(psi: &mut [C64], phi: &mut [C64], anchor: usize) {
    let scale = phi.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let rot = if phi[anchor].norm() > 1e-8 * scale {
        phi[anchor].conj() / phi[anchor].norm()
    } else {
        let max = psi.iter().map(|z| z.norm()).fold(0.0, f64::max);
        match psi.iter().find(|z| z.norm() > 1e-8 * max) {
            Some(first) => first / first.norm(),
            None => return,
        }
    };
    phi.iter_mut().for_each(|z| *z *= rot);
    let back = rot.conj();
    psi.iter_mut().for_each(|z| *z *= back);
}

/// Number of leading modes covering `1 - tol` of the weight, their mass,
/// and whether a cap cut the expansion short.
fn retain(sigma2: &[f64], opts: &SchmidtOptions) -> Result<(usize, f64, bool)> {
    let total: f64 = sigma2.iter().sum();
    if !(total > 0.0) {
        return Err(Error::ZeroAmplitude);
    }
    let mut retained = 0;
    let mut mass = 0.0;
    while retained < sigma2.len() && retained < opts.max_modes && mass < 1.0 - opts.tol {
        mass += sigma2[retained] / total;
        retained += 1;
    }
    Ok((retained, mass, mass < 1.0 - opts.tol))
}

pub fn schmidt_decompose(grid: &JointAmplitudeGrid, opts: &SchmidtOptions) -> Result<SchmidtResult> {
    if !(opts.tol > 0.0 && opts.tol < 1.0) {
        return Err(Error::InvalidParams(format!(
            "tolerance must lie in (0, 1), got {}",
            opts.tol
        )));
    }
    let (m, n) = check_product_grid(grid, &opts.budget)?;
    let method = match opts.method {
        Method::Auto if m * n <= AUTO_SVD_ENTRIES => Method::Svd,
        Method::Auto => Method::Gram,
        other => other,
    };
    let a = weighted_matrix(grid);
    let rank = m.min(n);

    // squared singular values plus unit factor columns (rows side, cols
    // side) for every mode that is retained
    let (sigma2, left, right): (Vec<f64>, Mat<c64>, Mat<c64>);
    let (retained, mass, rank_limited);
    match method {
        Method::Svd => {
            let svd = a.thin_svd().map_err(|e| Error::Eigensolver(format!("{e:?}")))?;
            sigma2 = (0..rank).map(|i| svd.S()[i].re.powi(2)).collect();
            (retained, mass, rank_limited) = retain(&sigma2, opts)?;
            left = svd.U().to_owned();
            right = svd.V().to_owned();
        }
        _ => {
            let g = gram(&a);
            let eig = g
                .self_adjoint_eigen(Side::Lower)
                .map_err(|e| Error::Eigensolver(format!("{e:?}")))?;
            let mut order: Vec<usize> = (0..rank).collect();
            order.sort_by(|&i, &j| eig.S()[j].re.total_cmp(&eig.S()[i].re));
            sigma2 = order.iter().map(|&i| eig.S()[i].re.max(0.0)).collect();
            (retained, mass, rank_limited) = retain(&sigma2, opts)?;
            let u = Mat::from_fn(rank, retained, |r, c| eig.U()[(r, order[c])]);
            // the opposite factor, scaled by sigma, from one product
            if m <= n {
                right = a.adjoint() * &u;
                left = u;
            } else {
                left = &a * &u;
                right = u;
            }
        }
    }

    let total: f64 = sigma2.iter().sum();
    let eigenvalues: Vec<f64> = sigma2.iter().map(|s| s / total).collect();
    let k = schmidt_number(&eigenvalues)?;

    let sq: Vec<f64> = grid.rows().weights.iter().map(|w| w.sqrt()).collect();
    let sk: Vec<f64> = grid.cols().weights.iter().map(|w| w.sqrt()).collect();
    // photon-marginal peak: with every photonic factor real there, the
    // coherent mode sum is the atomic slice conditioned on that momentum
    let anchor = (0..n)
        .into_par_iter()
        .map(|j| {
            (
                (0..m).map(|i| a[(i, j)].norm_sqr()).sum::<f64>() / grid.cols().weights[j],
                j,
            )
        })
        .reduce(|| (f64::NEG_INFINITY, 0), |x, y| if y.0 > x.0 { y } else { x })
        .1;
    let gram_side_rows = method == Method::Gram && m <= n;
    let gram_side_cols = method == Method::Gram && m > n;
    let modes: Vec<(Vec<C64>, Vec<C64>)> = (0..retained)
        .into_par_iter()
        .map(|c| {
            let sigma = sigma2[c].sqrt();
            // the factor obtained by multiplication carries sigma
            let lscale = if gram_side_cols && sigma > 0.0 {
                1.0 / sigma
            } else {
                1.0
            };
            let rscale = if gram_side_rows && sigma > 0.0 {
                1.0 / sigma
            } else {
                1.0
            };
            let mut psi: Vec<C64> = (0..m).map(|i| left[(i, c)] * (lscale / sq[i])).collect();
            let mut phi: Vec<C64> = (0..n).map(|j| right[(j, c)].conj() * (rscale / sk[j])).collect();
            fix_phase(&mut psi, &mut phi, anchor);
            (psi, phi)
        })
        .collect();
    let (atomic_modes, photonic_modes) = modes.into_iter().unzip();

    Ok(SchmidtResult {
        eigenvalues,
        atomic_modes,
        photonic_modes,
        q_axis: grid.rows().clone(),
        k_axis: grid.cols().clone(),
        k,
        truncation: Truncation {
            retained,
            retained_mass: mass,
            rank_limited,
        },
        method,
    })
}

/// Atomic reduced density `rho(q, q') = int B(q, k) B*(q', k) dk`, evaluated
/// by adaptive quadrature over the photon coordinate and scaled to unit
/// trace under the axis weights.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedDensity {
    pub q_axis: Axis,
    /// Row-major `n x n`.
    pub matrix: Vec<C64>,
    pub evaluations: usize,
}

impl ReducedDensity {
    pub fn len(&self) -> usize {
        self.q_axis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q_axis.is_empty()
    }

    pub fn at(&self, i: usize, j: usize) -> C64 {
        self.matrix[i * self.len() + j]
    }

    pub fn trace(&self) -> f64 {
        (0..self.len()).map(|i| self.at(i, i).re * self.q_axis.weights[i]).sum()
    }

    /// `max |rho(q, q') - conj(rho(q', q))|` relative to the largest entry.
    pub fn hermiticity_error(&self) -> f64 {
        let n = self.len();
        let top = self.matrix.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((self.at(i, j) - self.at(j, i).conj()).norm());
            }
        }
        worst / top
    }

    /// Eigenvalues of `sqrt(w) rho sqrt(w)`, nonincreasing.
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        let sw: Vec<f64> = self.q_axis.weights.iter().map(|w| w.sqrt()).collect();
        let n = self.len();
        // symmetrized so the solver sees an exactly Hermitian input
        let m = Mat::from_fn(n, n, |i, j| {
            (self.at(i, j) + self.at(j, i).conj()) * (0.5 * sw[i] * sw[j])
        });
        let values = m
            .self_adjoint_eigenvalues(Side::Lower)
            .map_err(|e| Error::Eigensolver(format!("{e:?}")))?;
        let mut values: Vec<f64> = values.into_iter().collect();
        values.sort_by(|a, b| b.total_cmp(a));
        Ok(values)
    }
}

pub fn reduced_density_atom(params: &AtomParams, q_axis: &Axis) -> Result<ReducedDensity> {
    if q_axis.len() < 2 {
        return Err(Error::DegenerateGrid("reduced density needs at least two nodes".into()));
    }
    let derived = derive(params)?;
    if derived.is_trapped() {
        return Err(Error::ZeroAmplitude);
    }
    let eta = params.eta;
    let features: Vec<(f64, f64)> = derived
        .poles
        .iter()
        .filter(|p| p.is_active())
        .map(|p| (p.center(), p.half_width()))
        .collect();

    // the k-integral depends on (q, q') only through d = q' - q:
    // I(d) = int F(v) conj(F(v + d)) dv
    let overlap = |d: f64, opts: QuadratureOptions| -> Result<(C64, usize)> {
        let mut points = Vec::with_capacity(features.len() * 6);
        for &(c, w) in &features {
            for base in [c, c - d] {
                points.extend_from_slice(&[base - w, base, base + w]);
            }
        }
        let f = |v: f64| {
            let a = derived.resonant(v).unwrap_or_default();
            let b = derived.resonant(v + d).unwrap_or_default();
            a * b.conj()
        };
        let q = integrate_real_line(f, &points, opts)?;
        Ok((q.value, q.evaluations))
    };

    let (scale, mut evaluations) = overlap(0.0, QuadratureOptions::default())?;
    let opts = QuadratureOptions {
        abs_tol: 1e-12 * scale.norm(),
        ..QuadratureOptions::default()
    };

    let n = q_axis.len();
    let span = q_axis.span();
    let key_tol = 1e-9 * (span.1 - span.0);
    let mut diffs: Vec<f64> = Vec::with_capacity(2 * n);
    for i in 0..n {
        for j in 0..n {
            diffs.push(q_axis.nodes[j] - q_axis.nodes[i]);
        }
    }
    let mut unique = diffs.clone();
    unique.sort_by(f64::total_cmp);
    unique.dedup_by(|a, b| (*a - *b).abs() <= key_tol);
    let table = unique
        .par_iter()
        .map(|&d| overlap(d, opts))
        .collect::<Result<Vec<_>>>()?;
    evaluations += table.iter().map(|t| t.1).sum::<usize>();
    let lookup = |d: f64| -> C64 {
        let idx = unique.partition_point(|&u| u < d - key_tol);
        table[idx.min(unique.len() - 1)].0
    };

    let envelope: Vec<f64> = q_axis.nodes.iter().map(|q| (-(q / eta) * (q / eta)).exp()).collect();
    let mut matrix: Vec<C64> = diffs
        .iter()
        .enumerate()
        .map(|(idx, &d)| lookup(d) * (envelope[idx / n] * envelope[idx % n]))
        .collect();
    let trace: f64 = (0..n).map(|i| matrix[i * n + i].re * q_axis.weights[i]).sum();
    if !(trace > 0.0) {
        return Err(Error::ZeroAmplitude);
    }
    matrix.iter_mut().for_each(|z| *z /= trace);
    Ok(ReducedDensity {
        q_axis: q_axis.clone(),
        matrix,
        evaluations,
    })
}

/// Photon overlap `int F(v) conj(F(v + d)) dv` in closed form by residues.
/// Pairs of poles on opposite sides of the real axis contribute nothing.
pub fn photon_overlap(derived: &DerivedParams, d: f64) -> Result<C64> {
    let poles: Vec<&Pole> = derived.poles.iter().filter(|p| p.is_active()).collect();
    if let Some(p) = poles.iter().find(|p| p.offset.re == 0.0) {
        return Err(Error::Unsupported(format!("undamped pole, offset {}", p.offset)));
    }
    let mut sum = C64::new(0.0, 0.0);
    for a in &poles {
        for b in &poles {
            if (a.offset.re > 0.0) == (b.offset.re > 0.0) {
                let side = a.offset.re.signum();
                sum +=
                    a.residue * b.residue.conj() * (side * 2.0 * PI) / (a.offset + b.offset.conj() - C64::new(0.0, d));
            }
        }
    }
    Ok(sum)
}

/// Schmidt number of the emission kernel without a joint grid.
///
/// With `B = G(dq) F(dq + dk)` the atomic reduced density is
/// `G(q) G(q') I(q' - q)`, so the purity collapses to one integral over `d`
/// of `|I(d)|^2` against the Gaussian autocorrelation of `G^2`.
pub fn schmidt_number_reduced(params: &AtomParams) -> Result<f64> {
    let derived = derive(params)?;
    if derived.is_trapped() {
        return Err(Error::ZeroAmplitude);
    }
    let eta = params.eta;
    let mut points = vec![0.0];
    let active: Vec<&Pole> = derived.poles.iter().filter(|p| p.is_active()).collect();
    for a in &active {
        for b in &active {
            let (c, w) = (a.offset.im - b.offset.im, (a.offset.re + b.offset.re).abs());
            for m in [0.0, 1.0, 4.0, 16.0, 64.0, 256.0] {
                points.extend_from_slice(&[c - m * w, c + m * w]);
            }
        }
    }
    let i0 = photon_overlap(&derived, 0.0)?.re;
    let f = |d: f64| {
        let i = photon_overlap(&derived, d).unwrap_or_default();
        C64::new(i.norm_sqr() * (-(d / eta) * (d / eta)).exp(), 0.0)
    };
    let opts = QuadratureOptions {
        abs_tol: 1e-14 * i0 * i0 * eta,
        ..QuadratureOptions::default()
    };
    let q = integrate_real_line(f, &points, opts)?;
    // int G^2(q) G^2(q + d) dq = sqrt(pi) eta / 2 exp(-d^2 / eta^2); trace = I(0) sqrt(pi / 2) eta
    let purity = q.value.re * (0.5 * PI.sqrt() * eta) / (i0 * i0 * 0.5 * PI * eta * eta);
    if !(purity > 0.0) {
        return Err(Error::ZeroAmplitude);
    }
    Ok(1.0 / purity)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeSuperpositions {
    pub q: Vec<f64>,
    /// `sum lambda_n |psi_n|^2`.
    pub e_incoherent: Vec<f64>,
    /// `|sum sqrt(lambda_n) psi_n|^2`.
    pub e_coherent: Vec<f64>,
    pub var_incoherent: f64,
    /// Variance under `E_c` normalized to unit mass.
    pub var_coherent: f64,
}

fn weighted_variance(x: &[f64], w: &[f64], p: &[f64]) -> f64 {
    let m0: f64 = p.iter().zip(w).map(|(p, w)| p * w).sum();
    let mean: f64 = p.iter().zip(w).zip(x).map(|((p, w), x)| p * w * x).sum::<f64>() / m0;
    p.iter()
        .zip(w)
        .zip(x)
        .map(|((p, w), x)| p * w * (x - mean) * (x - mean))
        .sum::<f64>()
        / m0
}

pub fn mode_superpositions(result: &SchmidtResult) -> ModeSuperpositions {
    let n = result.q_axis.len();
    let mut e_i = vec![0.0; n];
    let mut coherent = vec![C64::new(0.0, 0.0); n];
    for (psi, l) in result.atomic_modes.iter().zip(&result.eigenvalues) {
        let s = l.sqrt();
        for i in 0..n {
            e_i[i] += l * psi[i].norm_sqr();
            coherent[i] += psi[i] * s;
        }
    }
    let e_c: Vec<f64> = coherent.iter().map(|z| z.norm_sqr()).collect();
    let q = result.q_axis.nodes.clone();
    let w = &result.q_axis.weights;
    ModeSuperpositions {
        var_incoherent: weighted_variance(&q, w, &e_i),
        var_coherent: weighted_variance(&q, w, &e_c),
        q,
        e_incoherent: e_i,
        e_coherent: e_c,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeProfile {
    pub index: usize,
    pub eigenvalue: f64,
    pub atomic_abs: Vec<f64>,
    pub photonic_abs: Vec<f64>,
    pub atomic_peaks: usize,
    pub photonic_peaks: usize,
    pub atomic_rms_width: f64,
    pub photonic_rms_width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeProfiles {
    pub q: Vec<f64>,
    pub k: Vec<f64>,
    pub eigenvalues: Vec<f64>,
    pub requested: usize,
    /// Set when fewer modes than requested were available.
    pub clamped: bool,
    pub modes: Vec<ModeProfile>,
}

/// Local maxima at or above 5% of the profile maximum.
pub fn peak_count(profile: &[f64]) -> usize {
    let top = profile.iter().copied().fold(0.0, f64::max);
    let n = profile.len();
    (0..n)
        .filter(|&i| {
            let y = profile[i];
            let left = i == 0 || y > profile[i - 1];
            let right = i + 1 == n || y >= profile[i + 1];
            y >= 0.05 * top && left && right
        })
        .count()
}

pub fn mode_profiles_export(result: &SchmidtResult, n_modes: usize) -> ModeProfiles {
    let available = result.atomic_modes.len();
    let count = n_modes.min(available);
    let modes = (0..count)
        .map(|m| {
            let atomic_abs: Vec<f64> = result.atomic_modes[m].iter().map(|z| z.norm()).collect();
            let photonic_abs: Vec<f64> = result.photonic_modes[m].iter().map(|z| z.norm()).collect();
            let sq = |v: &[f64]| v.iter().map(|x| x * x).collect::<Vec<_>>();
            ModeProfile {
                index: m,
                eigenvalue: result.eigenvalues[m],
                atomic_peaks: peak_count(&atomic_abs),
                photonic_peaks: peak_count(&photonic_abs),
                atomic_rms_width: weighted_variance(&result.q_axis.nodes, &result.q_axis.weights, &sq(&atomic_abs))
                    .sqrt(),
                photonic_rms_width: weighted_variance(&result.k_axis.nodes, &result.k_axis.weights, &sq(&photonic_abs))
                    .sqrt(),
                atomic_abs,
                photonic_abs,
            }
        })
        .collect();
    ModeProfiles {
        q: result.q_axis.nodes.clone(),
        k: result.k_axis.nodes.clone(),
        eigenvalues: result.eigenvalues.iter().take(available).copied().collect(),
        requested: n_modes,
        clamped: n_modes > available,
        modes,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::amplitude::{sample_kernel, GridSpec, Kernel};
    use approx::assert_relative_eq;

    #[test]
    fn schmidt_number_of_small_lists() {
        assert_relative_eq!(schmidt_number(&[1.0]).unwrap(), 1.0);
        assert_relative_eq!(schmidt_number(&[0.5, 0.5]).unwrap(), 2.0);
        assert_relative_eq!(
            schmidt_number(&[0.7, 0.2, 0.1]).unwrap(),
            1.0 / 0.54,
            max_relative = 1e-14
        );
        assert!(schmidt_number(&[0.0, 0.0]).is_err());
        assert!(schmidt_number(&[]).is_err());
    }

    #[test]
    fn phase_entanglement_definition() {
        assert_relative_eq!(phase_entanglement(10.0, 22.0), 1.0, max_relative = 1e-15);
    }

    #[test]
    fn peak_counting() {
        assert_eq!(peak_count(&[0.0, 1.0, 0.0]), 1);
        assert_eq!(peak_count(&[0.0, 1.0, 0.2, 0.9, 0.0]), 2);
        assert_eq!(peak_count(&[0.0, 1.0, 0.0, 0.01, 0.0]), 1);
        assert_eq!(peak_count(&[1.0, 0.5, 0.2]), 1);
    }

    #[test]
    fn separable_kernel_is_rank_one() {
        let spec = GridSpec {
            q_min: -0.4,
            q_max: 0.4,
            k_min: -0.8,
            k_max: 0.8,
            n_q: 50,
            n_k: 70,
            scheme: Scheme::Uniform,
            photon_tail: None,
        };
        let grid = sample_kernel(
            &Kernel::SeparableGaussian {
                eta: 0.1,
                photon_width: 0.2,
            },
            &spec,
            &Budget::default(),
        )
        .unwrap();
        for method in [Method::Svd, Method::Gram] {
            let res = schmidt_decompose(
                &grid,
                &SchmidtOptions {
                    method,
                    ..Default::default()
                },
            )
            .unwrap();
            assert_relative_eq!(res.k, 1.0, epsilon = 1e-10);
            assert_eq!(res.truncation.retained, 1);
            assert_relative_eq!(res.eigenvalues[0], 1.0, epsilon = 1e-12);
        }
        assert_relative_eq!(
            schmidt_number_purity(&grid, &Budget::default()).unwrap(),
            1.0,
            epsilon = 1e-10
        );
    }

    #[test]
    fn closed_form_overlap_matches_quadrature() {
        let p = AtomParams::symmetric(0.05, 0.1, 0.4, 2.5);
        let d = derive(&p).unwrap();
        for shift in [0.0, 3e-4, -0.01, 0.2] {
            let numeric = integrate_real_line(
                |v| d.resonant(v).unwrap_or_default() * d.resonant(v + shift).unwrap_or_default().conj(),
                &[-0.025, 0.0, 0.025 - shift],
                QuadratureOptions::default(),
            )
            .unwrap()
            .value;
            let exact = photon_overlap(&d, shift).unwrap();
            assert!(
                (exact - numeric).norm() <= 1e-8 * exact.norm().max(1.0),
                "{shift}: {exact} vs {numeric}"
            );
        }
    }

    #[test]
    fn reduced_schmidt_number_at_dark_state() {
        let k = schmidt_number_reduced(&AtomParams::dark_state(0.1, 0.1)).unwrap();
        assert_relative_eq!(k, 11.903816, max_relative = 1e-5);
        assert!(matches!(
            schmidt_number_reduced(&AtomParams::dark_state(0.0, 0.1)),
            Err(Error::ZeroAmplitude)
        ));
    }

    #[test]
    fn rotated_grids_are_rejected() {
        let p = AtomParams::dark_state(0.1, 0.1);
        let d = derive(&p).unwrap();
        let grid = crate::amplitude::sample_grid(&p, &GridSpec::detection_default(&d, 0.1, 0.2)).unwrap();
        assert!(matches!(
            schmidt_decompose(&grid, &SchmidtOptions::default()),
            Err(Error::Unsupported(_))
        ));
    }
}
