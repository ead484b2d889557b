//! Steady-state joint atom-photon amplitude and its sampling onto
//! normalized quadrature grids.
//!
//! The amplitude is a Gaussian in `dq` times a sum of resonant terms in
//! `v = dq + dk`. Two grid layouts are supported: a product grid over
//! `(dq, dk)` (needed for Schmidt decompositions) and a rotated grid over
//! `(u, v) = (dq, dq + dk)`, on which the emission kernel factorizes.

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{derive, fingerprint_json, AtomParams, DerivedParams, Ridge};

/// Unnormalized amplitude `B(dq, dk)` for the given parameters.
pub fn amplitude_at(derived: &DerivedParams, params: &AtomParams, dq: f64, dk: f64) -> Result<C64> {
    let envelope = gaussian_envelope(dq, params.eta);
    let resonant = derived.resonant(dq + dk).ok_or(Error::PoleOnGrid { dq, dk })?;
    Ok(resonant * envelope)
}

/// Single-Lorentzian form of the amplitude at the dark-state coherence,
/// `exp(-(dq/eta)^2) / (i (dq + dk) - delta^2/4)`.
pub fn dark_state_amplitude_at(delta: f64, eta: f64, dq: f64, dk: f64) -> C64 {
    gaussian_envelope(dq, eta) / C64::new(-0.25 * delta * delta, dq + dk)
}

#[inline]
fn gaussian_envelope(dq: f64, eta: f64) -> f64 {
    let x = dq / eta;
    (-x * x).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Product grid over `(dq, dk)`.
    Uniform,
    /// Product grid over `(u, v) = (dq, dq + dk)`; `k_min..k_max` is the `v` range.
    Rotated,
}

/// Geometrically graded cells appended on both sides of the photon axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhotonTail {
    /// Distance beyond the core edge covered by the tail.
    pub extent: f64,
    /// Ratio between successive cell widths.
    pub growth: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub q_min: f64,
    pub q_max: f64,
    pub k_min: f64,
    pub k_max: f64,
    pub n_q: usize,
    pub n_k: usize,
    pub scheme: Scheme,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub photon_tail: Option<PhotonTail>,
}

/// Quadrature nodes (cell centers) and weights (cell widths).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Axis {
    pub fn midpoint(min: f64, max: f64, n: usize) -> Axis {
        let h = (max - min) / n as f64;
        Axis {
            nodes: (0..n).map(|i| min + (i as f64 + 0.5) * h).collect(),
            weights: vec![h; n],
        }
    }

    fn graded(min: f64, max: f64, n: usize, tail: PhotonTail) -> Axis {
        let core = Axis::midpoint(min, max, n);
        let h = (max - min) / n as f64;
        let mut widths = Vec::new();
        let mut covered = 0.0;
        let mut width = h;
        while covered < tail.extent {
            width *= tail.growth;
            widths.push(width);
            covered += width;
        }
        let mut nodes = Vec::with_capacity(n + 2 * widths.len());
        let mut weights = Vec::with_capacity(nodes.capacity());
        let mut edge = min;
        let mut left = Vec::with_capacity(widths.len());
        for &w in &widths {
            left.push((edge - 0.5 * w, w));
            edge -= w;
        }
        for &(x, w) in left.iter().rev() {
            nodes.push(x);
            weights.push(w);
        }
        nodes.extend_from_slice(&core.nodes);
        weights.extend_from_slice(&core.weights);
        let mut edge = max;
        for &w in &widths {
            nodes.push(edge + 0.5 * w);
            weights.push(w);
            edge += w;
        }
        Axis { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Outer edges of the first and last cells.
    pub fn span(&self) -> (f64, f64) {
        let n = self.len();
        (
            self.nodes[0] - 0.5 * self.weights[0],
            self.nodes[n - 1] + 0.5 * self.weights[n - 1],
        )
    }
}

/// Outcome of the ridge-resolution check: the spacing across the Lorentzian
/// ridge must not exceed a quarter of its half-width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Adequacy {
    pub ridge_spacing: f64,
    pub half_width: f64,
    pub adequate: bool,
}

/// Limits on allocations made on behalf of a single computation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Budget {
    pub max_grid_nodes: usize,
    /// Largest matrix (rows x columns) handed to a dense decomposition.
    pub max_decomposition_entries: usize,
}

impl Default for Budget {
    fn default() -> Self {
        Budget {
            max_grid_nodes: 1 << 25,
            max_decomposition_entries: 1 << 25,
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        let finite = [self.q_min, self.q_max, self.k_min, self.k_max]
            .iter()
            .all(|x| x.is_finite());
        if !finite {
            return Err(Error::InvalidGrid("ranges must be finite".into()));
        }
        if self.q_min >= self.q_max || self.k_min >= self.k_max {
            return Err(Error::InvalidGrid(format!(
                "empty range: q [{}, {}], k [{}, {}]",
                self.q_min, self.q_max, self.k_min, self.k_max
            )));
        }
        if self.n_q < 2 || self.n_k < 2 {
            return Err(Error::InvalidGrid(format!(
                "need at least 2 samples per axis, got {} x {}",
                self.n_q, self.n_k
            )));
        }
        if let Some(tail) = self.photon_tail {
            if self.scheme == Scheme::Rotated {
                return Err(Error::InvalidGrid(
                    "photon tails apply to the uniform scheme only".into(),
                ));
            }
            if !(tail.extent.is_finite() && tail.extent > 0.0 && tail.growth > 1.0 && tail.growth.is_finite()) {
                return Err(Error::InvalidGrid(format!("bad photon tail {tail:?}")));
            }
        }
        Ok(())
    }

    /// Atomic (`dq`, or `u` for the rotated scheme) axis.
    pub fn row_axis(&self) -> Axis {
        Axis::midpoint(self.q_min, self.q_max, self.n_q)
    }

    /// Photon (`dk`, or `v` for the rotated scheme) axis, tails included.
    pub fn col_axis(&self) -> Axis {
        match self.photon_tail {
            Some(tail) => Axis::graded(self.k_min, self.k_max, self.n_k, tail),
            None => Axis::midpoint(self.k_min, self.k_max, self.n_k),
        }
    }

    pub fn row_spacing(&self) -> f64 {
        (self.q_max - self.q_min) / self.n_q as f64
    }

    pub fn col_spacing(&self) -> f64 {
        (self.k_max - self.k_min) / self.n_k as f64
    }

    pub fn node_count(&self) -> usize {
        let bare = self.n_q.saturating_mul(self.n_k);
        if bare >= 1 << 40 {
            return bare;
        }
        self.n_q.saturating_mul(self.col_axis().len())
    }

    /// Grid step of `v = dq + dk` between neighbouring nodes.
    pub fn ridge_spacing(&self) -> f64 {
        match self.scheme {
            Scheme::Rotated => self.col_spacing(),
            Scheme::Uniform => self.row_spacing().max(self.col_spacing()),
        }
    }

    pub fn adequacy(&self, ridge: &Ridge) -> Adequacy {
        let ridge_spacing = self.ridge_spacing();
        Adequacy {
            ridge_spacing,
            half_width: ridge.half_width,
            adequate: ridge_spacing <= 0.25 * ridge.half_width,
        }
    }

    /// Rotated grid for variance measurements: `u` spans `+-4 eta` with 41
    /// samples, `v` spans `+-max(50 w, 5 eta)` around the ridge at spacing
    /// `min(w, eta) / 8`, `w` the ridge half-width. `scale` multiplies the
    /// sample density.
    pub fn detection_default(derived: &DerivedParams, eta: f64, scale: f64) -> GridSpec {
        let ridge = derived.ridge();
        let w = ridge.half_width;
        let u_span = 4.0 * eta;
        let v_span = (50.0 * w).max(5.0 * eta);
        let step = w.min(eta) / (8.0 * scale);
        let n_u = ((41.0 * scale).ceil() as usize).max(3) | 1;
        let n_v = (2.0 * v_span / step).ceil() as usize;
        GridSpec {
            q_min: -u_span,
            q_max: u_span,
            k_min: ridge.center - v_span,
            k_max: ridge.center + v_span,
            n_q: n_u,
            n_k: n_v.max(2),
            scheme: Scheme::Rotated,
            photon_tail: None,
        }
    }

    /// Product grid for Schmidt decompositions: `dq` spans `+-3 eta` at
    /// spacing `min(w / 2, eta / 8) / scale`; the `dk` core covers the ridge
    /// for every `dq` plus a `20 w` margin, followed by graded tails out to
    /// `1000 max(1, w_broad)`.
    pub fn schmidt_default(derived: &DerivedParams, eta: f64, scale: f64) -> GridSpec {
        let ridge = derived.ridge();
        let w = ridge.half_width;
        let broad = derived.poles.iter().map(|p| p.half_width()).fold(1.0_f64, f64::max);
        let span = 3.0 * eta;
        let h = (0.5 * w).min(eta / 8.0) / scale;
        let n_q = ((2.0 * span / h).ceil() as usize).max(2);
        let margin = 20.0 * w;
        let k_min = ridge.center - span - margin;
        let k_max = ridge.center + span + margin;
        let n_k = (((k_max - k_min) / h).ceil() as usize).max(2);
        GridSpec {
            q_min: -span,
            q_max: span,
            k_min,
            k_max,
            n_q,
            n_k,
            scheme: Scheme::Uniform,
            photon_tail: Some(PhotonTail {
                extent: 1000.0 * broad,
                growth: 1.08,
            }),
        }
    }
}

/// The function sampled onto a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Kernel {
    /// Steady-state emission amplitude.
    Emission { params: AtomParams },
    /// Product test kernel `exp(-(dq/eta)^2) exp(-(dk/photon_width)^2)`.
    SeparableGaussian { eta: f64, photon_width: f64 },
    /// Caller-supplied samples; no off-grid evaluation.
    Tabulated,
}

impl Kernel {
    pub fn fingerprint(&self) -> String {
        match self {
            Kernel::Emission { params } => params.fingerprint(),
            other => fingerprint_json(&serde_json::to_value(other).expect("kernel serializes")),
        }
    }

    pub fn params(&self) -> Option<&AtomParams> {
        match self {
            Kernel::Emission { params } => Some(params),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
enum Evaluator {
    Emission(AtomParams, DerivedParams),
    Separable { eta: f64, photon_width: f64 },
    Tabulated,
}

impl Evaluator {
    fn new(kernel: &Kernel) -> Result<Self> {
        match kernel {
            Kernel::Emission { params } => Ok(Evaluator::Emission(*params, derive(params)?)),
            &Kernel::SeparableGaussian { eta, photon_width } => {
                if !(eta > 0.0 && photon_width > 0.0 && eta.is_finite() && photon_width.is_finite()) {
                    return Err(Error::InvalidParams(format!(
                        "separable kernel widths must be positive, got {eta}, {photon_width}"
                    )));
                }
                Ok(Evaluator::Separable { eta, photon_width })
            }
            Kernel::Tabulated => Ok(Evaluator::Tabulated),
        }
    }

    fn eval(&self, dq: f64, dk: f64) -> Result<C64> {
        match self {
            Evaluator::Emission(params, derived) => amplitude_at(derived, params, dq, dk),
            &Evaluator::Separable { eta, photon_width } => Ok(C64::new(
                gaussian_envelope(dq, eta) * gaussian_envelope(dk, photon_width),
                0.0,
            )),
            Evaluator::Tabulated => Err(Error::Unsupported(
                "tabulated kernels cannot be evaluated off-grid".into(),
            )),
        }
    }
}

/// Kernel samples at cell centers, scaled so that `sum |B|^2 w_q w_k = 1`.
#[derive(Debug, Clone)]
pub struct JointAmplitudeGrid {
    pub spec: GridSpec,
    pub kernel: Kernel,
    /// Row-major `rows x cols` samples.
    pub values: Vec<C64>,
    /// Factor applied to the raw kernel.
    pub norm: f64,
    pub params_fingerprint: String,
    pub adequacy: Option<Adequacy>,
    rows: Axis,
    cols: Axis,
    evaluator: Evaluator,
    /// Resonant factor at the `v` nodes of a rotated emission grid.
    resonant: Option<Vec<C64>>,
}

pub fn sample_grid(params: &AtomParams, spec: &GridSpec) -> Result<JointAmplitudeGrid> {
    sample_kernel(&Kernel::Emission { params: *params }, spec, &Budget::default())
}

pub fn sample_kernel(kernel: &Kernel, spec: &GridSpec, budget: &Budget) -> Result<JointAmplitudeGrid> {
    spec.validate()?;
    let evaluator = Evaluator::new(kernel)?;
    if let Evaluator::Emission(_, derived) = &evaluator {
        if derived.is_trapped() {
            return Err(Error::ZeroAmplitude);
        }
    }
    let over = |nodes: usize| -> Result<()> {
        if nodes > budget.max_grid_nodes {
            return Err(Error::BudgetExceeded {
                what: "grid nodes",
                needed: nodes,
                budget: budget.max_grid_nodes,
            });
        }
        Ok(())
    };
    // tails only add columns, so this bounds the allocation from below
    over(spec.n_q.saturating_mul(spec.n_k))?;
    let rows = spec.row_axis();
    let cols = spec.col_axis();
    let nodes = rows.len().saturating_mul(cols.len());
    over(nodes)?;

    let n_cols = cols.len();
    let mut values = vec![C64::new(0.0, 0.0); nodes];
    let mut cached = None;
    match (&evaluator, spec.scheme) {
        (Evaluator::Emission(params, derived), Scheme::Rotated) => {
            // B(u, v) = G(u) F(v) exactly
            let resonant: Vec<C64> = cols
                .nodes
                .iter()
                .map(|&v| derived.resonant(v).ok_or(Error::PoleOnGrid { dq: 0.0, dk: v }))
                .collect::<Result<_>>()?;
            values
                .par_chunks_mut(n_cols)
                .zip(rows.nodes.par_iter())
                .for_each(|(row, &u)| {
                    let g = gaussian_envelope(u, params.eta);
                    for (out, f) in row.iter_mut().zip(&resonant) {
                        *out = f * g;
                    }
                });
            cached = Some(resonant);
        }
        _ => {
            let rotated = spec.scheme == Scheme::Rotated;
            values
                .par_chunks_mut(n_cols)
                .zip(rows.nodes.par_iter())
                .try_for_each(|(row, &q)| -> Result<()> {
                    for (out, &c) in row.iter_mut().zip(&cols.nodes) {
                        let dk = if rotated { c - q } else { c };
                        *out = evaluator.eval(q, dk)?;
                    }
                    Ok(())
                })?;
        }
    }

    let adequacy = match &evaluator {
        Evaluator::Emission(_, derived) => Some(spec.adequacy(&derived.ridge())),
        _ => None,
    };
    let mut grid = JointAmplitudeGrid::assemble(*spec, kernel.clone(), evaluator, rows, cols, values, adequacy)?;
    grid.resonant = cached;
    Ok(grid)
}

impl JointAmplitudeGrid {
    /// Wraps caller-supplied samples (row-major over the spec's axes).
    pub fn from_samples(spec: GridSpec, values: Vec<C64>) -> Result<Self> {
        spec.validate()?;
        let rows = spec.row_axis();
        let cols = spec.col_axis();
        if values.len() != rows.len() * cols.len() {
            return Err(Error::InvalidGrid(format!(
                "expected {} samples, got {}",
                rows.len() * cols.len(),
                values.len()
            )));
        }
        Self::assemble(spec, Kernel::Tabulated, Evaluator::Tabulated, rows, cols, values, None)
    }

    fn assemble(
        spec: GridSpec,
        kernel: Kernel,
        evaluator: Evaluator,
        rows: Axis,
        cols: Axis,
        mut values: Vec<C64>,
        adequacy: Option<Adequacy>,
    ) -> Result<Self> {
        if values.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::InvalidGrid("non-finite kernel samples".into()));
        }
        let mass: f64 = values
            .chunks(cols.len())
            .zip(&rows.weights)
            .map(|(row, wr)| {
                wr * row
                    .iter()
                    .zip(&cols.weights)
                    .map(|(b, wc)| b.norm_sqr() * wc)
                    .sum::<f64>()
            })
            .sum();
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(Error::ZeroAmplitude);
        }
        let norm = mass.sqrt().recip();
        values.iter_mut().for_each(|v| *v *= norm);
        Ok(JointAmplitudeGrid {
            params_fingerprint: kernel.fingerprint(),
            spec,
            kernel,
            values,
            norm,
            adequacy,
            rows,
            cols,
            evaluator,
            resonant: None,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.cols.len()
    }

    pub fn rows(&self) -> &Axis {
        &self.rows
    }

    pub fn cols(&self) -> &Axis {
        &self.cols
    }

    #[inline]
    pub fn value(&self, i: usize, j: usize) -> C64 {
        self.values[i * self.cols.len() + j]
    }

    pub fn row(&self, i: usize) -> &[C64] {
        let n = self.cols.len();
        &self.values[i * n..(i + 1) * n]
    }

    /// `(dq, dk)` of node `(i, j)`.
    pub fn coordinates(&self, i: usize, j: usize) -> (f64, f64) {
        let q = self.rows.nodes[i];
        let c = self.cols.nodes[j];
        match self.spec.scheme {
            Scheme::Uniform => (q, c),
            Scheme::Rotated => (q, c - q),
        }
    }

    /// `sum |B|^2 w`, unity after construction up to rounding.
    pub fn total_mass(&self) -> f64 {
        self.values
            .chunks(self.cols.len())
            .zip(&self.rows.weights)
            .map(|(row, wr)| {
                wr * row
                    .iter()
                    .zip(&self.cols.weights)
                    .map(|(b, wc)| b.norm_sqr() * wc)
                    .sum::<f64>()
            })
            .sum()
    }

    /// Normalized kernel at an arbitrary point.
    pub fn eval(&self, dq: f64, dk: f64) -> Result<C64> {
        Ok(self.evaluator.eval(dq, dk)? * self.norm)
    }

    pub fn is_analytic(&self) -> bool {
        !matches!(self.evaluator, Evaluator::Tabulated)
    }

    pub fn derived(&self) -> Option<&DerivedParams> {
        match &self.evaluator {
            Evaluator::Emission(_, d) => Some(d),
            _ => None,
        }
    }

    /// Range of `dk` covered by the grid.
    pub fn photon_range(&self) -> (f64, f64) {
        let (c0, c1) = self.cols.span();
        match self.spec.scheme {
            Scheme::Uniform => (c0, c1),
            Scheme::Rotated => {
                let (u0, u1) = self.rows.span();
                (c0 - u1, c1 - u0)
            }
        }
    }

    /// `dq` sample points for a slice at fixed `dk`: the atomic axis on a
    /// product grid, the finely resolved `v` axis shifted by `-dk` on a
    /// rotated grid.
    pub fn slice_axis(&self, dk: f64) -> Axis {
        match self.spec.scheme {
            Scheme::Uniform => self.rows.clone(),
            Scheme::Rotated => Axis {
                nodes: self.cols.nodes.iter().map(|v| v - dk).collect(),
                weights: self.cols.weights.clone(),
            },
        }
    }

    /// Normalized `B(dq, dk)` along [`slice_axis`](Self::slice_axis).
    /// Tabulated grids fall back to the nearest photon column.
    pub fn slice(&self, dk: f64) -> Result<(Axis, Vec<C64>)> {
        if let (Some(resonant), Some(params)) = (&self.resonant, self.kernel.params()) {
            let axis = self.slice_axis(dk);
            let values = axis
                .nodes
                .iter()
                .zip(resonant)
                .map(|(&q, f)| f * (gaussian_envelope(q, params.eta) * self.norm))
                .collect();
            return Ok((axis, values));
        }
        if self.is_analytic() {
            let axis = self.slice_axis(dk);
            let values = axis
                .nodes
                .iter()
                .map(|&q| self.eval(q, dk))
                .collect::<Result<Vec<_>>>()?;
            return Ok((axis, values));
        }
        if self.spec.scheme != Scheme::Uniform {
            return Err(Error::Unsupported("slices of tabulated rotated grids".into()));
        }
        let j = nearest(&self.cols.nodes, dk);
        let values = (0..self.n_rows()).map(|i| self.value(i, j)).collect();
        Ok((self.rows.clone(), values))
    }
}

fn nearest(nodes: &[f64], x: f64) -> usize {
    nodes
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - x).abs().total_cmp(&(b.1 - x).abs()))
        .map(|(i, _)| i)
        .unwrap_or(0)
}
