//! Headline measures for one parameter point: `R`, `K`, `PE`, with the grids
//! they were computed on and a grid-doubling convergence check.

use serde::{Deserialize, Serialize};

use crate::amplitude::{sample_kernel, Adequacy, Budget, GridSpec, JointAmplitudeGrid, Kernel, Scheme};
use crate::detection::{r_ratio, ConditioningPoint, Metric, VarianceReport};
use crate::error::{Error, Result};
use crate::model::{derive, AtomParams, DerivedParams, Regime, Ridge};
use crate::schmidt::{pe_regime, phase_entanglement, schmidt_number_purity, schmidt_number_reduced};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasureOptions {
    /// Multiplies the sample density of the default grids.
    pub grid_scale: f64,
    pub budget: Budget,
    pub conditioning: ConditioningPoint,
    /// Replaces the default rotated grid used for `R`.
    pub detection_grid: Option<GridSpec>,
    /// Replaces the default product grid used for `K`.
    pub schmidt_grid: Option<GridSpec>,
    #[serde(default)]
    pub k_route: KRoute,
}

/// How `measure` obtains `K` for emission kernels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KRoute {
    /// Purity of the sampled product grid.
    #[default]
    Decomposition,
    /// Grid-free purity of the atomic reduced density.
    Reduced,
    /// Decomposition when the product grid fits the budget, reduced otherwise.
    Auto,
}

impl Default for MeasureOptions {
    fn default() -> Self {
        MeasureOptions {
            grid_scale: 1.0,
            budget: Budget::default(),
            conditioning: ConditioningPoint::PeakOfPhotonMarginal,
            detection_grid: None,
            schmidt_grid: None,
            k_route: KRoute::Decomposition,
        }
    }
}

impl MeasureOptions {
    pub fn with_scale(mut self, scale: f64) -> Self {
        self.grid_scale = scale;
        self
    }

    /// Same options at `factor` times the sample density, overrides included.
    pub fn refined(&self, factor: f64) -> Self {
        let refine = |s: GridSpec| GridSpec {
            n_q: (s.n_q as f64 * factor).ceil() as usize,
            n_k: (s.n_k as f64 * factor).ceil() as usize,
            ..s
        };
        MeasureOptions {
            grid_scale: self.grid_scale * factor,
            detection_grid: self.detection_grid.map(refine),
            schmidt_grid: self.schmidt_grid.map(refine),
            ..*self
        }
    }

    fn check(&self) -> Result<()> {
        if !(self.grid_scale.is_finite() && self.grid_scale > 0.0) {
            return Err(Error::Config(format!(
                "grid scale must be positive, got {}",
                self.grid_scale
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measurement {
    pub value: f64,
    pub adequate: bool,
}

/// Default grids for a kernel: rotated for variances, product grid for the
/// Schmidt decomposition.
pub fn default_grids(kernel: &Kernel, scale: f64) -> Result<(GridSpec, GridSpec)> {
    match kernel {
        Kernel::Emission { params } => {
            let d = derive(params)?;
            Ok((
                GridSpec::detection_default(&d, params.eta, scale),
                GridSpec::schmidt_default(&d, params.eta, scale),
            ))
        }
        &Kernel::SeparableGaussian { eta, photon_width } => {
            let n = ((64.0 * scale).ceil() as usize).max(8);
            let spec = GridSpec {
                q_min: -4.0 * eta,
                q_max: 4.0 * eta,
                k_min: -4.0 * photon_width,
                k_max: 4.0 * photon_width,
                n_q: n,
                n_k: n,
                scheme: Scheme::Uniform,
                photon_tail: None,
            };
            Ok((spec, spec))
        }
        Kernel::Tabulated => Err(Error::Unsupported("tabulated kernels have no default grid".into())),
    }
}

fn detection_grid(kernel: &Kernel, opts: &MeasureOptions) -> Result<JointAmplitudeGrid> {
    opts.check()?;
    let spec = match opts.detection_grid {
        Some(spec) => spec,
        None => default_grids(kernel, opts.grid_scale)?.0,
    };
    sample_kernel(kernel, &spec, &opts.budget)
}

fn schmidt_grid(kernel: &Kernel, opts: &MeasureOptions) -> Result<JointAmplitudeGrid> {
    opts.check()?;
    let spec = match opts.schmidt_grid {
        Some(spec) => spec,
        None => default_grids(kernel, opts.grid_scale)?.1,
    };
    let entries = spec.node_count();
    if entries > opts.budget.max_decomposition_entries {
        return Err(Error::BudgetExceeded {
            what: "decomposition matrix entries",
            needed: entries,
            budget: opts.budget.max_decomposition_entries,
        });
    }
    sample_kernel(kernel, &spec, &opts.budget)
}

pub fn measure_r_kernel(kernel: &Kernel, opts: &MeasureOptions) -> Result<(VarianceReport, JointAmplitudeGrid)> {
    let grid = detection_grid(kernel, opts)?;
    let report = r_ratio(&grid, opts.conditioning)?;
    Ok((report, grid))
}

pub fn measure_k_kernel(kernel: &Kernel, opts: &MeasureOptions) -> Result<(f64, JointAmplitudeGrid)> {
    let grid = schmidt_grid(kernel, opts)?;
    let k = schmidt_number_purity(&grid, &opts.budget)?;
    Ok((k, grid))
}

/// `R` on the default detection grid.
pub fn measure_r(params: &AtomParams, opts: &MeasureOptions) -> Result<VarianceReport> {
    measure_r_kernel(&Kernel::Emission { params: *params }, opts).map(|(r, _)| r)
}

/// `K` by the route selected in `opts`, with the adequacy of the grid used
/// (always adequate for the grid-free route).
pub fn measure_k_routed(params: &AtomParams, opts: &MeasureOptions) -> Result<(f64, bool)> {
    opts.check()?;
    let kernel = Kernel::Emission { params: *params };
    let reduced = match opts.k_route {
        KRoute::Decomposition => false,
        KRoute::Reduced => true,
        KRoute::Auto => {
            let spec = match opts.schmidt_grid {
                Some(spec) => spec,
                None => default_grids(&kernel, opts.grid_scale)?.1,
            };
            spec.node_count() > opts.budget.max_decomposition_entries
        }
    };
    if reduced {
        return Ok((schmidt_number_reduced(params)?, true));
    }
    let (k, grid) = measure_k_kernel(&kernel, opts)?;
    Ok((k, adequate(&grid)))
}

/// `K` by the route selected in `opts`.
pub fn measure_k(params: &AtomParams, opts: &MeasureOptions) -> Result<f64> {
    measure_k_routed(params, opts).map(|(k, _)| k)
}

fn adequate(grid: &JointAmplitudeGrid) -> bool {
    grid.adequacy.map(|a| a.adequate).unwrap_or(true)
}

pub fn measure(params: &AtomParams, metric: Metric, opts: &MeasureOptions) -> Result<Measurement> {
    let kernel = Kernel::Emission { params: *params };
    match metric {
        Metric::R => {
            let (r, grid) = measure_r_kernel(&kernel, opts)?;
            Ok(Measurement {
                value: r.r_ratio,
                adequate: adequate(&grid),
            })
        }
        Metric::K => {
            let (value, adequate) = measure_k_routed(params, opts)?;
            Ok(Measurement { value, adequate })
        }
        Metric::PE => {
            let (r, rg) = measure_r_kernel(&kernel, opts)?;
            let (k, k_adequate) = measure_k_routed(params, opts)?;
            Ok(Measurement {
                value: phase_entanglement(k, r.r_ratio),
                adequate: adequate(&rg) && k_adequate,
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedSummary {
    pub s1: [f64; 2],
    pub s2: [f64; 2],
    pub c1: [f64; 2],
    pub c2: [f64; 2],
    pub delta: Option<f64>,
    pub g_ratio: f64,
    pub ridge: Ridge,
}

impl From<&DerivedParams> for DerivedSummary {
    fn from(d: &DerivedParams) -> Self {
        let pair = |z: num_complex::Complex64| [z.re, z.im];
        DerivedSummary {
            s1: pair(d.s1),
            s2: pair(d.s2),
            c1: pair(d.c1),
            c2: pair(d.c2),
            delta: d.delta,
            g_ratio: d.g_ratio,
            ridge: d.ridge(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSummary {
    pub spec: GridSpec,
    pub nodes: usize,
    pub adequacy: Option<Adequacy>,
}

impl From<&JointAmplitudeGrid> for GridSummary {
    fn from(g: &JointAmplitudeGrid) -> Self {
        GridSummary {
            spec: g.spec,
            nodes: g.n_rows() * g.n_cols(),
            adequacy: g.adequacy,
        }
    }
}

/// Relative change of the headline numbers when the grid density doubles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Convergence {
    pub refined_scale: f64,
    pub r_refined: f64,
    pub k_refined: Option<f64>,
    pub r_change: f64,
    pub k_change: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntanglementReport {
    pub schema_version: u32,
    pub kernel: Kernel,
    pub fingerprint: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regime: Option<Regime>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pe_regime: Option<Regime>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub derived: Option<DerivedSummary>,
    pub variances: VarianceReport,
    pub r: f64,
    pub k: f64,
    pub pe: f64,
    pub grid_scale: f64,
    pub detection_grid: GridSummary,
    pub schmidt_grid: GridSummary,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub convergence: Option<Convergence>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalyzeOptions {
    pub measure: MeasureOptions,
    /// Repeat at twice the grid density and record the change.
    pub convergence: bool,
}

impl Default for AnalyzeOptions {
    fn default() -> Self {
        AnalyzeOptions {
            measure: MeasureOptions::default(),
            convergence: false,
        }
    }
}

pub fn analyze(params: &AtomParams, opts: &AnalyzeOptions) -> Result<EntanglementReport> {
    analyze_kernel(&Kernel::Emission { params: *params }, opts)
}

pub fn analyze_kernel(kernel: &Kernel, opts: &AnalyzeOptions) -> Result<EntanglementReport> {
    let m = &opts.measure;
    let (variances, rgrid) = measure_r_kernel(kernel, m)?;
    let (k, kgrid) = measure_k_kernel(kernel, m)?;
    let r = variances.r_ratio;
    let pe = phase_entanglement(k, r);

    let mut warnings = Vec::new();
    for (name, grid) in [("detection", &rgrid), ("schmidt", &kgrid)] {
        if let Some(a) = grid.adequacy {
            if !a.adequate {
                warnings.push(format!(
                    "{name} grid spacing {:.3e} along the ridge exceeds a quarter of the half-width {:.3e}",
                    a.ridge_spacing, a.half_width
                ));
            }
        }
    }
    let params = kernel.params();
    let regime = params.map(|p| p.regime());
    let pe_regime = params.map(pe_regime);
    if regime == Some(Regime::Extrapolated) {
        warnings.push("parameters outside the strong-interference regime".into());
    }
    if pe_regime == Some(Regime::Extrapolated) {
        warnings.push("PE outside its validated regime (eta/delta^2 >= 4, eta <= 0.25)".into());
    }

    let convergence = if opts.convergence {
        let refined = m.refined(2.0);
        let (rv, _) = measure_r_kernel(kernel, &refined)?;
        let k_refined = match measure_k_kernel(kernel, &refined) {
            Ok((kv, _)) => Some(kv),
            Err(Error::BudgetExceeded { .. }) => {
                warnings.push("refined Schmidt grid exceeds the budget; K convergence not checked".into());
                None
            }
            Err(e) => return Err(e),
        };
        Some(Convergence {
            refined_scale: refined.grid_scale,
            r_refined: rv.r_ratio,
            k_refined,
            r_change: (rv.r_ratio - r).abs() / r,
            k_change: k_refined.map(|kv| (kv - k).abs() / k),
        })
    } else {
        None
    };

    Ok(EntanglementReport {
        schema_version: REPORT_SCHEMA_VERSION,
        fingerprint: kernel.fingerprint(),
        kernel: kernel.clone(),
        regime,
        pe_regime,
        derived: params
            .map(|p| derive(p).map(|d| DerivedSummary::from(&d)))
            .transpose()?,
        variances,
        r,
        k,
        pe,
        grid_scale: m.grid_scale,
        detection_grid: GridSummary::from(&rgrid),
        schmidt_grid: GridSummary::from(&kgrid),
        convergence,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn separable_fixture_report() {
        let kernel = Kernel::SeparableGaussian {
            eta: 0.1,
            photon_width: 0.3,
        };
        let rep = analyze_kernel(&kernel, &AnalyzeOptions::default()).unwrap();
        assert_relative_eq!(rep.r, 1.0, max_relative = 1e-9);
        assert_relative_eq!(rep.k, 1.0, max_relative = 1e-9);
        assert_relative_eq!(rep.pe, 2.2, max_relative = 1e-9);
        assert!(rep.regime.is_none());
    }

    #[test]
    fn bad_scale_is_a_config_error() {
        let p = AtomParams::dark_state(0.05, 0.1);
        let res = measure_r(&p, &MeasureOptions::default().with_scale(0.0));
        assert!(matches!(res, Err(Error::Config(_))));
    }
}
