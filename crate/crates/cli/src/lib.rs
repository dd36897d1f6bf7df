//! File formats, trajectory CSV and run manifests for the `dqeflow` binary.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use dqeflow::complex::{parse_triangulation, Triangulation};
use dqeflow::curvature::{Geometry, PackingMetric};
use dqeflow::flows::{run_flow, FlowConfig, FlowResult, Verdict};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const TOOL_VERSION: &str = concat!("dqeflow ", env!("CARGO_PKG_VERSION"));

pub mod exit {
    pub const OK: u8 = 0;
    pub const INVALID: u8 = 1;
    pub const IO: u8 = 2;
    pub const INADMISSIBLE: u8 = 3;
    pub const DEGENERACY: u8 = 4;
    pub const MAX_STEPS: u8 = 5;
    pub const DIVERGED: u8 = 6;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },

    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Core(#[from] dqeflow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(
                dqeflow::Error::DegenerateTet(_) | dqeflow::Error::InadmissibleInitialMetric(_),
            ) => exit::INADMISSIBLE,
            _ => exit::IO,
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;

pub fn verdict_exit_code(v: Verdict) -> u8 {
    match v {
        Verdict::Converged => exit::OK,
        Verdict::HitDegeneracy => exit::DEGENERACY,
        Verdict::MaxSteps => exit::MAX_STEPS,
        Verdict::Diverged => exit::DIVERGED,
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_owned(),
        source,
    })
}

pub fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|source| CliError::Io {
        path: path.to_owned(),
        source,
    })
}

fn parse_json<T: serde::de::DeserializeOwned>(path: &Path, text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|source| CliError::Json {
        path: path.to_owned(),
        source,
    })
}

pub fn read_triangulation(path: &Path) -> Result<Triangulation> {
    let text = read(path)?;
    parse_triangulation(&text).map_err(|e| match e {
        dqeflow::Error::Malformed(msg) => CliError::Usage(format!("{}: {msg}", path.display())),
        other => other.into(),
    })
}

/// `{"r": [..]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricDoc {
    pub r: Vec<f64>,
}

pub fn read_metric(path: &Path, geometry: Geometry) -> Result<PackingMetric> {
    let doc: MetricDoc = parse_json(path, &read(path)?)?;
    Ok(PackingMetric::new(geometry, doc.r)?)
}

/// `{"K": [..]}` or `{"C": [..]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetDoc {
    #[serde(rename = "K", default, skip_serializing_if = "Option::is_none")]
    pub k: Option<Vec<f64>>,
    #[serde(rename = "C", default, skip_serializing_if = "Option::is_none")]
    pub c: Option<Vec<f64>>,
}

pub fn read_target(path: &Path) -> Result<TargetDoc> {
    let doc: TargetDoc = parse_json(path, &read(path)?)?;
    match (&doc.k, &doc.c) {
        (Some(_), Some(_)) | (None, None) => Err(CliError::Usage(format!(
            "{}: a target holds exactly one of `K` or `C`",
            path.display()
        ))),
        _ => Ok(doc),
    }
}

/// Loads the metric at `path`, or the all-ones metric when absent.
pub fn metric_or_unit(path: Option<&Path>, geometry: Geometry, n: usize) -> Result<PackingMetric> {
    match path {
        Some(p) => read_metric(p, geometry),
        None => Ok(PackingMetric::uniform(geometry, n, 1.0)),
    }
}

/// Seventeen significant digits, enough to round-trip any `f64`.
pub fn fmt_num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn csv_header(n: usize) -> String {
    let mut cols = vec!["step".to_string(), "t".to_string()];
    cols.extend((0..n).map(|i| format!("r_{i}")));
    cols.extend((0..n).map(|i| format!("K_{i}")));
    cols.extend(["S", "energy", "drift_product_r", "drift_norm_r_sq"].map(String::from));
    cols.join(",")
}

pub fn trajectory_csv(res: &FlowResult) -> String {
    let n = res.final_metric.len();
    let mut out = csv_header(n);
    out.push('\n');
    let opt = |x: Option<f64>| x.map(fmt_num).unwrap_or_default();
    for s in &res.samples {
        let mut row = vec![s.step.to_string(), fmt_num(s.t)];
        row.extend(s.r.iter().map(|&x| fmt_num(x)));
        row.extend(s.k.iter().map(|&x| fmt_num(x)));
        row.push(opt(s.total));
        row.push(fmt_num(s.energy));
        row.push(opt(s.drift_product_r));
        row.push(opt(s.drift_norm_r_sq));
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Row-major dump of a square matrix, one row per line.
pub fn matrix_dump(name: &str, m: &nalgebra::DMatrix<f64>) -> String {
    let mut out = format!("# {name} {}x{}\n", m.nrows(), m.ncols());
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| fmt_num(m[(i, j)])).collect();
        let _ = writeln!(out, "{}", row.join(" "));
    }
    out
}

/// Everything needed to repeat a flow run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub triangulation: PathBuf,
    pub metric: Option<PathBuf>,
    pub target: Option<PathBuf>,
    pub seed: u64,
    pub perturb: f64,
    /// Resolved configuration; `initial` is the metric after perturbation.
    pub config: FlowConfig,
    pub trajectory: Option<PathBuf>,
}

impl RunManifest {
    pub fn read(path: &Path) -> Result<Self> {
        parse_json(path, &read(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }

    /// Re-runs the flow. Relative paths resolve against `base`.
    pub fn replay(&self, base: &Path) -> Result<FlowResult> {
        let tri = read_triangulation(&resolve(base, &self.triangulation))?;
        Ok(run_flow(&tri, &self.config)?)
    }
}

pub fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_owned()
    } else {
        base.join(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        for x in [0.1, 1.0 / 3.0, 10.361_228_220_629_048, 1e-300, -2.5e17] {
            assert_eq!(fmt_num(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn header_layout() {
        assert_eq!(
            csv_header(2),
            "step,t,r_0,r_1,K_0,K_1,S,energy,drift_product_r,drift_norm_r_sq"
        );
    }

    #[test]
    fn target_doc_uses_capital_keys() {
        let doc: TargetDoc = serde_json::from_str(r#"{"C": [1.0, 2.0]}"#).unwrap();
        assert_eq!(doc.c.as_deref(), Some(&[1.0, 2.0][..]));
        assert!(doc.k.is_none());
        assert_eq!(serde_json::to_string(&doc).unwrap(), r#"{"C":[1.0,2.0]}"#);
    }
}
