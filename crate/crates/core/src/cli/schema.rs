//! Schema tags for emitted files and a checker that validates a run directory.

use std::fs;
use std::path::Path;

use serde_json::Value;

use super::manifest::{RunManifest, MANIFEST_FILE};
use crate::error::Result;
use crate::gridfile::read_binary;

pub const REPORT: &str = "mentangle/report/v1";
pub const SCAN: &str = "mentangle/scan/v1";
pub const SPECTRUM: &str = "mentangle/spectrum/v1";
pub const RECIPE: &str = "mentangle/recipe/v1";

/// Known CSV column layouts.
pub const CSV_HEADERS: &[&str] = &[
    "dq,dk,weight,re,im",
    "r,theta,metric,value,flags",
    "q,abs,re,im",
    "k,abs,re,im",
    "q,e_incoherent,e_coherent,atomic_marginal",
    "index,eigenvalue",
    "r,theta,R",
    "r,theta,K",
    "delta,fwhm_r,fwhm_theta,reference_2delta_over_eta,status",
    "delta,eta,R,K,R_over_2.2,gap",
    "eta,r,theta,R,K,PE",
];

fn required(schema: &str) -> &'static [&'static str] {
    match schema {
        REPORT => &[
            "r",
            "k",
            "pe",
            "variances",
            "detection_grid",
            "schmidt_grid",
            "fingerprint",
        ],
        SCAN => &[
            "metric",
            "axis_r",
            "axis_theta",
            "peak",
            "fwhm_r",
            "fwhm_theta",
            "missing",
        ],
        SPECTRUM => &["eigenvalues", "k", "truncation", "modes"],
        RECIPE => &["recipe", "checks"],
        _ => &[],
    }
}

/// Attaches the schema tag to a serializable value.
pub fn tagged<T: serde::Serialize>(schema: &str, value: &T) -> Result<Value> {
    let mut v = serde_json::to_value(value)?;
    if let Value::Object(map) = &mut v {
        map.insert("schema".into(), Value::String(schema.into()));
    }
    Ok(v)
}

fn check_json(text: &str) -> std::result::Result<(), String> {
    let v: Value = serde_json::from_str(text).map_err(|e| format!("invalid JSON: {e}"))?;
    let schema = v.get("schema").and_then(Value::as_str).ok_or("missing schema tag")?;
    let keys = required(schema);
    if keys.is_empty() {
        return Err(format!("unknown schema {schema}"));
    }
    for key in keys {
        if v.get(key).is_none() {
            return Err(format!("{schema}: missing field {key}"));
        }
    }
    Ok(())
}

fn check_csv(text: &str) -> std::result::Result<(), String> {
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header = lines.next().ok_or("empty CSV")?;
    if !CSV_HEADERS.contains(&header) {
        return Err(format!("unknown CSV header {header:?}"));
    }
    let width = header.split(',').count();
    for (n, line) in lines.enumerate() {
        if line.split(',').count() != width {
            return Err(format!("row {} has the wrong number of fields", n + 1));
        }
    }
    Ok(())
}

fn check_svg(text: &str) -> std::result::Result<(), String> {
    if text.starts_with("<svg") && text.trim_end().ends_with("</svg>") {
        Ok(())
    } else {
        Err("not an SVG document".into())
    }
}

/// Validates the manifest of `dir`, the digests it records and the
/// structure of every listed output. Returns one message per problem.
pub fn validate_dir(dir: &Path) -> Result<Vec<String>> {
    let manifest = RunManifest::load(&dir.join(MANIFEST_FILE))?;
    let mut problems: Vec<String> = manifest
        .verify(dir)?
        .into_iter()
        .map(|p| format!("{p}: digest mismatch or missing"))
        .collect();
    for out in &manifest.outputs {
        let path = dir.join(&out.path);
        let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
        let outcome = match ext {
            "megrid" => fs::File::open(&path).map_err(|e| e.to_string()).and_then(|f| {
                read_binary(std::io::BufReader::new(f))
                    .map(|_| ())
                    .map_err(|e| e.to_string())
            }),
            "json" | "csv" | "svg" => match fs::read_to_string(&path) {
                Ok(text) => match ext {
                    "json" => check_json(&text),
                    "csv" => check_csv(&text),
                    _ => check_svg(&text),
                },
                Err(e) => Err(e.to_string()),
            },
            other => Err(format!("unexpected output type {other:?}")),
        };
        if let Err(msg) = outcome {
            problems.push(format!("{}: {msg}", out.path));
        }
    }
    Ok(problems)
}
