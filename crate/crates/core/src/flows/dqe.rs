use serde::{Deserialize, Serialize};

use crate::complex::Triangulation;
use crate::curvature::{CurvatureState, Geometry, PackingMetric};
use crate::{Error, Result};

use super::{run_flow, FlowConfig, FlowKind, FlowOptions, FlowResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DqeClass {
    Flat,
    Positive,
    Negative,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DqeSummary {
    /// `S / |r|²`.
    pub lambda: f64,
    /// `‖K − λr‖_∞`.
    pub residual: f64,
    pub class: DqeClass,
}

impl DqeSummary {
    /// Reads `λ` off a Euclidean state. `λ` counts as zero when it is below
    /// round-off relative to the curvature.
    pub fn of(state: &CurvatureState, r: &[f64]) -> Self {
        let lambda = state.lambda.expect("euclidean state");
        let residual = state
            .k
            .iter()
            .zip(r)
            .fold(0.0f64, |acc, (k, r)| acc.max((k - lambda * r).abs()));
        let k_max = state.k.iter().fold(0.0f64, |acc, k| acc.max(k.abs()));
        let r_max = r.iter().fold(0.0f64, |acc, r| acc.max(*r));
        let class = if lambda.abs() * r_max <= 1e-12 * k_max {
            DqeClass::Flat
        } else if lambda > 0.0 {
            DqeClass::Positive
        } else {
            DqeClass::Negative
        };
        DqeSummary {
            lambda,
            residual,
            class,
        }
    }
}

/// Looks for a DQE metric near `initial` by descending `|K − λr|²` in `u`.
///
/// The descent conserves `Πr`, so the result keeps the scale of `initial`.
pub fn find_dqe(
    t: &Triangulation,
    initial: &PackingMetric,
    options: FlowOptions,
) -> Result<FlowResult> {
    if initial.geometry() != Geometry::Euclidean {
        return Err(Error::Unsupported(
            "DQE metrics are defined in Euclidean background",
        ));
    }
    let cfg = FlowConfig {
        kind: FlowKind::DqeResidual,
        initial: initial.clone(),
        options,
    };
    run_flow(t, &cfg)
}
