//! Command implementations behind the `mentangle` binary. Every verb writes
//! its outputs into one directory together with a `manifest.json`.

pub mod config;
pub mod manifest;
pub mod plot;
pub mod recipes;
pub mod schema;

use std::fmt::Write as _;
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde_json::{json, Value};

use crate::amplitude::{sample_kernel, GridSpec, Kernel};
use crate::detection::{scan_coherence, Width};
use crate::error::{Error, Result};
use crate::gridfile;
use crate::report::{analyze_kernel, default_grids, AnalyzeOptions, MeasureOptions};
use crate::schmidt::{
    mode_profiles_export, mode_superpositions, phase_entanglement, schmidt_decompose, SchmidtOptions,
};
use config::{ExportGrid, Format, RunConfig};
use manifest::{AdequacyFlag, Headline, RunManifest, MANIFEST_SCHEMA};
use plot::{line_chart, Series};
use recipes::Recipe;

/// Collects the files written by one run.
pub struct Emitter {
    dir: PathBuf,
    files: Vec<PathBuf>,
    formats: config::OutputConfig,
}

impl Emitter {
    pub fn new(dir: &Path, formats: &config::OutputConfig) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Emitter {
            dir: dir.to_path_buf(),
            files: Vec::new(),
            formats: formats.clone(),
        })
    }

    pub fn wants(&self, f: Format) -> bool {
        self.formats.wants(f)
    }

    fn record(&mut self, name: &str) -> PathBuf {
        let rel = PathBuf::from(name);
        if let Some(parent) = self.dir.join(&rel).parent() {
            let _ = fs::create_dir_all(parent);
        }
        self.files.push(rel.clone());
        self.dir.join(rel)
    }

    pub fn json(&mut self, name: &str, value: &Value) -> Result<()> {
        if self.wants(Format::Json) {
            let path = self.record(name);
            fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
        }
        Ok(())
    }

    pub fn csv(&mut self, name: &str, text: &str) -> Result<()> {
        if self.wants(Format::Csv) {
            let path = self.record(name);
            fs::write(path, text)?;
        }
        Ok(())
    }

    pub fn svg(&mut self, name: &str, text: &str) -> Result<()> {
        if self.wants(Format::Svg) {
            let path = self.record(name);
            fs::write(path, text)?;
        }
        Ok(())
    }

    /// Binary outputs are written whatever the format selection.
    pub fn binary(&mut self, name: &str, write: impl FnOnce(&mut BufWriter<fs::File>) -> Result<()>) -> Result<()> {
        let path = self.record(name);
        let mut w = BufWriter::new(fs::File::create(path)?);
        write(&mut w)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }
}

/// Verb-specific results folded into the manifest.
#[derive(Default)]
pub struct Outcome {
    pub headline: Headline,
    pub adequacy: Vec<AdequacyFlag>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verb {
    Amplitude,
    Report,
    Scan,
    Modes,
    Reproduce(Recipe),
}

impl Verb {
    pub fn name(self) -> &'static str {
        match self {
            Verb::Amplitude => "amplitude",
            Verb::Report => "report",
            Verb::Scan => "scan",
            Verb::Modes => "modes",
            Verb::Reproduce(_) => "reproduce",
        }
    }

    pub fn parse(verb: &str, recipe: Option<&str>) -> Result<Self> {
        Ok(match verb {
            "amplitude" => Verb::Amplitude,
            "report" => Verb::Report,
            "scan" => Verb::Scan,
            "modes" => Verb::Modes,
            "reproduce" => Verb::Reproduce(
                recipe
                    .ok_or_else(|| Error::Format("reproduce manifest lacks a recipe".into()))?
                    .parse()?,
            ),
            other => return Err(Error::Format(format!("unknown verb {other}"))),
        })
    }
}

/// Runs `verb` with `cfg`, writing into `out`, and returns the manifest.
pub fn run(verb: Verb, cfg: &RunConfig, out: &Path) -> Result<RunManifest> {
    let started = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let clock = Instant::now();
    let mut em = Emitter::new(out, &cfg.output)?;
    let outcome = match verb {
        Verb::Amplitude => amplitude(cfg, &mut em)?,
        Verb::Report => report(cfg, &mut em)?,
        Verb::Scan => scan(cfg, &mut em)?,
        Verb::Modes => modes(cfg, &mut em)?,
        Verb::Reproduce(recipe) => recipes::run(recipe, cfg, &mut em)?,
    };
    let manifest = RunManifest {
        schema: MANIFEST_SCHEMA.into(),
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        verb: verb.name().into(),
        recipe: match verb {
            Verb::Reproduce(r) => Some(r.name().into()),
            _ => None,
        },
        config: cfg.clone(),
        adequacy: outcome.adequacy,
        started_unix: started,
        wall_clock_seconds: clock.elapsed().as_secs_f64(),
        outputs: RunManifest::digest_outputs(em.dir(), &em.files)?,
        headline: outcome.headline,
        warnings: outcome.warnings,
    };
    manifest.write(out)?;
    Ok(manifest)
}

/// Result of replaying a manifest.
#[derive(Debug, Clone)]
pub struct Rerun {
    pub original: RunManifest,
    pub replay: RunManifest,
    pub identical_headline: bool,
    /// Outputs whose digests differ between the two runs.
    pub changed_outputs: Vec<String>,
}

pub fn rerun(manifest_path: &Path, out: &Path) -> Result<Rerun> {
    let original = RunManifest::load(manifest_path)?;
    let verb = Verb::parse(&original.verb, original.recipe.as_deref())?;
    let replay = run(verb, &original.config, out)?;
    let same = |a: Option<f64>, b: Option<f64>| a.map(f64::to_bits) == b.map(f64::to_bits);
    let identical_headline = same(original.headline.r, replay.headline.r)
        && same(original.headline.k, replay.headline.k)
        && same(original.headline.pe, replay.headline.pe);
    let changed_outputs = original
        .outputs
        .iter()
        .filter(|o| !replay.outputs.iter().any(|n| n.path == o.path && n.sha256 == o.sha256))
        .map(|o| o.path.clone())
        .collect();
    Ok(Rerun {
        original,
        replay,
        identical_headline,
        changed_outputs,
    })
}

fn adequacy_flag(name: &str, grid: &crate::amplitude::JointAmplitudeGrid) -> Option<AdequacyFlag> {
    grid.adequacy.map(|a| AdequacyFlag {
        grid: name.into(),
        adequate: a.adequate,
    })
}

fn amplitude(cfg: &RunConfig, em: &mut Emitter) -> Result<Outcome> {
    let kernel = cfg.kernel()?;
    let opts = cfg.measure_options();
    let spec: GridSpec = match cfg.grid.export {
        ExportGrid::Detection => match cfg.grid.detection {
            Some(s) => s,
            None => default_grids(&kernel, cfg.grid.scale)?.0,
        },
        ExportGrid::Schmidt => match cfg.grid.schmidt {
            Some(s) => s,
            None => default_grids(&kernel, cfg.grid.scale)?.1,
        },
    };
    let grid = sample_kernel(&kernel, &spec, &opts.budget)?;
    em.binary("grid.megrid", |w| gridfile::write_binary(w, &grid))?;
    let mut warnings = Vec::new();
    if em.wants(Format::Csv) {
        if grid.n_rows() * grid.n_cols() <= gridfile::CSV_MAX_NODES {
            let mut buf = Vec::new();
            gridfile::write_csv(&mut buf, &grid)?;
            em.csv("grid.csv", &String::from_utf8_lossy(&buf))?;
        } else {
            warnings.push("grid too large for CSV; binary export only".into());
        }
    }
    let mut outcome = Outcome {
        warnings,
        ..Outcome::default()
    };
    outcome.adequacy.extend(adequacy_flag("export", &grid));
    Ok(outcome)
}

fn report(cfg: &RunConfig, em: &mut Emitter) -> Result<Outcome> {
    let kernel = cfg.kernel()?;
    let rep = analyze_kernel(
        &kernel,
        &AnalyzeOptions {
            measure: cfg.measure_options(),
            convergence: cfg.convergence,
        },
    )?;
    em.json("report.json", &schema::tagged(schema::REPORT, &rep)?)?;
    let mut adequacy = Vec::new();
    for (name, g) in [("detection", &rep.detection_grid), ("schmidt", &rep.schmidt_grid)] {
        if let Some(a) = g.adequacy {
            adequacy.push(AdequacyFlag {
                grid: name.into(),
                adequate: a.adequate,
            });
        }
    }
    Ok(Outcome {
        headline: Headline {
            r: Some(rep.r),
            k: Some(rep.k),
            pe: Some(rep.pe),
        },
        adequacy,
        warnings: rep.warnings,
    })
}

pub(crate) fn width_value(w: Width) -> Value {
    match w {
        Width::Bounded(v) => json!(v),
        Width::Unbounded => json!("unbounded"),
    }
}

fn scan(cfg: &RunConfig, em: &mut Emitter) -> Result<Outcome> {
    let params = cfg.params()?;
    let sc = cfg
        .scan
        .as_ref()
        .ok_or_else(|| Error::Config("scan needs a [scan] section with r and theta axes".into()))?;
    let r_axis = sc.r.points()?;
    let theta_axis = sc.theta.points()?;
    let result = scan_coherence(&params, &r_axis, &theta_axis, sc.metric, &cfg.measure_options())?;

    let mut csv = String::from("r,theta,metric,value,flags\n");
    for (idx, node) in result.nodes.iter().enumerate() {
        let (i, j) = (idx / theta_axis.len(), idx % theta_axis.len());
        let mut flags = Vec::new();
        if !node.adequate {
            flags.push("inadequate".to_string());
        }
        if node.extrapolated {
            flags.push("extrapolated".to_string());
        }
        if let Some(e) = &node.error {
            flags.push(format!("error={e}"));
        }
        let value = node.value.map(|v| format!("{v:e}")).unwrap_or_default();
        let _ = writeln!(
            csv,
            "{:e},{:e},{},{value},{}",
            r_axis[i],
            theta_axis[j],
            sc.metric.name(),
            flags.join(";")
        );
    }
    em.csv("scan.csv", &csv)?;
    let summary = json!({
        "schema": schema::SCAN,
        "metric": sc.metric,
        "axis_r": r_axis,
        "axis_theta": theta_axis,
        "peak": result.peak,
        "fwhm_r": width_value(result.fwhm_r),
        "fwhm_theta": width_value(result.fwhm_theta),
        "fit_r": result.fit_r,
        "fit_theta": result.fit_theta,
        "missing": result.missing(),
    });
    em.json("scan_summary.json", &summary)?;

    if em.wants(Format::Svg) {
        if let Some(peak) = result.peak {
            let i_t = theta_axis.iter().position(|&t| t == peak.theta).unwrap_or(0);
            let i_r = r_axis.iter().position(|&r| r == peak.r).unwrap_or(0);
            let (xr, yr) = result.cut_r(i_t);
            let (xt, yt) = result.cut_theta(i_r);
            let name = sc.metric.name();
            em.svg(
                "scan_r.svg",
                &line_chart(
                    &format!("{name}(r) at theta = {:.3}", peak.theta),
                    "r",
                    name,
                    &[Series {
                        label: name,
                        points: xr.into_iter().zip(yr).collect(),
                        dashed: false,
                        markers: false,
                    }],
                ),
            )?;
            em.svg(
                "scan_theta.svg",
                &line_chart(
                    &format!("{name}(theta) at r = {:.3}", peak.r),
                    "theta",
                    name,
                    &[Series {
                        label: name,
                        points: xt.into_iter().zip(yt).collect(),
                        dashed: false,
                        markers: false,
                    }],
                ),
            )?;
        }
    }
    let mut warnings = Vec::new();
    if result.missing() > 0 {
        warnings.push(format!("{} scan nodes failed", result.missing()));
    }
    Ok(Outcome {
        warnings,
        adequacy: vec![AdequacyFlag {
            grid: "scan".into(),
            adequate: result.nodes.iter().all(|n| n.adequate || n.value.is_none()),
        }],
        ..Outcome::default()
    })
}

/// Decomposes the kernel of `cfg` and writes mode tables, spectrum and plots
/// under `prefix`.
pub(crate) fn write_modes(
    kernel: &Kernel,
    opts: &MeasureOptions,
    n_modes: usize,
    tol: f64,
    prefix: &str,
    em: &mut Emitter,
) -> Result<(Outcome, crate::schmidt::ModeProfiles)> {
    let spec = match opts.schmidt_grid {
        Some(s) => s,
        None => default_grids(kernel, opts.grid_scale)?.1,
    };
    let grid = sample_kernel(kernel, &spec, &opts.budget)?;
    let res = schmidt_decompose(
        &grid,
        &SchmidtOptions {
            tol,
            budget: opts.budget,
            ..SchmidtOptions::default()
        },
    )?;
    let (rep, _) = crate::report::measure_r_kernel(kernel, opts)?;
    let pe = phase_entanglement(res.k, rep.r_ratio);
    let profiles = mode_profiles_export(&res, n_modes);
    let sup = mode_superpositions(&res);
    let mut warnings = Vec::new();
    if profiles.clamped {
        warnings.push(format!(
            "requested {} modes, only {} retained",
            n_modes,
            profiles.modes.len()
        ));
    }

    for m in &profiles.modes {
        let n = m.index + 1;
        let mut a = String::from("q,abs,re,im\n");
        for (i, q) in profiles.q.iter().enumerate() {
            let z = res.atomic_modes[m.index][i];
            let _ = writeln!(a, "{q:e},{:e},{:e},{:e}", m.atomic_abs[i], z.re, z.im);
        }
        em.csv(&format!("{prefix}mode_{n}_atomic.csv"), &a)?;
        let mut p = String::from("k,abs,re,im\n");
        for (j, k) in profiles.k.iter().enumerate() {
            let z = res.photonic_modes[m.index][j];
            let _ = writeln!(p, "{k:e},{:e},{:e},{:e}", m.photonic_abs[j], z.re, z.im);
        }
        em.csv(&format!("{prefix}mode_{n}_photonic.csv"), &p)?;
    }
    let marginal: Vec<f64> = (0..grid.n_rows())
        .map(|i| {
            grid.row(i)
                .iter()
                .zip(&grid.cols().weights)
                .map(|(b, w)| b.norm_sqr() * w)
                .sum()
        })
        .collect();
    let mut s = String::from("q,e_incoherent,e_coherent,atomic_marginal\n");
    for i in 0..sup.q.len() {
        let _ = writeln!(
            s,
            "{:e},{:e},{:e},{:e}",
            sup.q[i], sup.e_incoherent[i], sup.e_coherent[i], marginal[i]
        );
    }
    em.csv(&format!("{prefix}superpositions.csv"), &s)?;
    let mut e = String::from("index,eigenvalue\n");
    for (i, l) in res.eigenvalues.iter().take(res.truncation.retained).enumerate() {
        let _ = writeln!(e, "{},{l:e}", i + 1);
    }
    em.csv(&format!("{prefix}eigenvalues.csv"), &e)?;

    let modes_json: Vec<Value> = profiles
        .modes
        .iter()
        .map(|m| {
            json!({
                "index": m.index + 1,
                "eigenvalue": m.eigenvalue,
                "atomic_peaks": m.atomic_peaks,
                "photonic_peaks": m.photonic_peaks,
                "atomic_rms_width": m.atomic_rms_width,
                "photonic_rms_width": m.photonic_rms_width,
            })
        })
        .collect();
    let spectrum = json!({
        "schema": schema::SPECTRUM,
        "kernel": kernel,
        "eigenvalues": res.eigenvalues.iter().take(res.truncation.retained).collect::<Vec<_>>(),
        "k": res.k,
        "r": rep.r_ratio,
        "pe": pe,
        "truncation": res.truncation,
        "method": res.method,
        "requested_modes": n_modes,
        "clamped": profiles.clamped,
        "modes": modes_json,
        "var_incoherent": sup.var_incoherent,
        "var_coherent": sup.var_coherent,
        "var_single": rep.var_single,
        "var_coin": rep.var_coin,
        "grid": spec,
    });
    em.json(&format!("{prefix}spectrum.json"), &spectrum)?;

    if em.wants(Format::Svg) {
        let atomic: Vec<Series> = profiles
            .modes
            .iter()
            .map(|m| Series {
                label: ["mode 1", "mode 2", "mode 3", "mode 4", "mode 5", "mode 6"][m.index.min(5)],
                points: profiles.q.iter().copied().zip(m.atomic_abs.iter().copied()).collect(),
                dashed: false,
                markers: false,
            })
            .collect();
        em.svg(
            &format!("{prefix}atomic_modes.svg"),
            &line_chart("|psi_n(q)|", "dq", "|psi|", &atomic),
        )?;
        // photon modes plotted over the core window only
        let (lo, hi) = (spec.k_min, spec.k_max);
        let photonic: Vec<Series> = profiles
            .modes
            .iter()
            .map(|m| Series {
                label: ["mode 1", "mode 2", "mode 3", "mode 4", "mode 5", "mode 6"][m.index.min(5)],
                points: profiles
                    .k
                    .iter()
                    .copied()
                    .zip(m.photonic_abs.iter().copied())
                    .filter(|(k, _)| *k >= lo && *k <= hi)
                    .collect(),
                dashed: false,
                markers: false,
            })
            .collect();
        em.svg(
            &format!("{prefix}photonic_modes.svg"),
            &line_chart("|phi_n(k)|", "dk", "|phi|", &photonic),
        )?;
    }

    let mut adequacy = Vec::new();
    adequacy.extend(adequacy_flag(&format!("{prefix}schmidt"), &grid));
    Ok((
        Outcome {
            headline: Headline {
                r: Some(rep.r_ratio),
                k: Some(res.k),
                pe: Some(pe),
            },
            adequacy,
            warnings,
        },
        profiles,
    ))
}

fn modes(cfg: &RunConfig, em: &mut Emitter) -> Result<Outcome> {
    let kernel = cfg.kernel()?;
    let (outcome, _) = write_modes(
        &kernel,
        &cfg.measure_options(),
        cfg.modes.n_modes,
        cfg.modes.tol,
        "",
        em,
    )?;
    Ok(outcome)
}
