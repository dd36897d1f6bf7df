use serde::{Deserialize, Serialize};

use crate::complex::Triangulation;
use crate::curvature::PackingMetric;
use crate::linalg::{dot, sup_norm};
use crate::{Error, Result};

use super::fields::{Eval, VectorField};
use super::{
    run_flow, sup_diff, DqeSummary, DriftReport, FlowConfig, FlowKind, FlowOptions, FlowResult,
    Sample, Verdict,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    /// CR-curvature `K̄`.
    K(Vec<f64>),
    /// G-curvature `C̄` (Euclidean).
    C(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Flow,
    GradientDescent,
}

impl std::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "flow" => Ok(Strategy::Flow),
            "gradient_descent" => Ok(Strategy::GradientDescent),
            _ => Err(Error::Config(format!("unknown strategy `{s}`"))),
        }
    }
}

impl Target {
    fn kind(&self) -> FlowKind {
        match self {
            Target::K(k) => FlowKind::Cr4Prescribed { target: k.clone() },
            Target::C(c) => FlowKind::G4Prescribed { target: c.clone() },
        }
    }
}

const ARMIJO: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 60;

/// Finds a metric with curvature `target`, starting from `initial`.
///
/// `Flow` integrates the prescribed fourth-order flow (CR or G). Gradient
/// descent minimizes the same quadratic energy over `u` with Armijo
/// backtracking; trial steps come from the Barzilai–Borwein formula. In the
/// CR case both strategies keep `Πr` fixed, since `K` does not see scale.
pub fn prescribe_curvature(
    t: &Triangulation,
    target: &Target,
    initial: &PackingMetric,
    strategy: Strategy,
    options: FlowOptions,
) -> Result<FlowResult> {
    let cfg = FlowConfig {
        kind: target.kind(),
        initial: initial.clone(),
        options,
    };
    match strategy {
        Strategy::Flow => run_flow(t, &cfg),
        Strategy::GradientDescent => descend(t, &cfg),
    }
}

fn descend(t: &Triangulation, cfg: &FlowConfig) -> Result<FlowResult> {
    cfg.validate(t)?;
    let opts = cfg.options;
    let field = VectorField::new(
        t,
        cfg.kind.clone(),
        cfg.initial.geometry(),
        opts.admissibility_floor,
    );
    let mut x = field.to_chart(&cfg.initial);
    let mut cur = field.eval(&x).map_err(|e| match e {
        Error::DegenerateTet(d) => Error::InadmissibleInitialMetric(d),
        other => other,
    })?;
    let conserves = cfg.kind.conserves_chart_sum(cfg.initial.geometry());
    let chart_sum0: f64 = cfg.initial.radii().iter().map(|r| r.ln()).sum();
    let sample = |step: usize, t: f64, e: &Eval| Sample {
        step,
        t,
        r: e.metric.radii().to_vec(),
        k: e.state.k.clone(),
        total: e.state.total,
        energy: e.energy,
        drift_product_r: conserves
            .then(|| (e.metric.radii().iter().map(|r| r.ln()).sum::<f64>() - chart_sum0).exp_m1()),
        drift_norm_r_sq: None,
    };
    let mut samples = vec![sample(0, 0.0, &cur)];
    let mut drift = DriftReport {
        product_r: conserves.then_some(0.0),
        ..DriftReport::default()
    };
    let mut elapsed = 0.0;
    let mut steps = 0;
    let mut rejected = 0;
    let mut step = opts.step.dt0;
    let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;

    let verdict = loop {
        if sup_norm(&cur.v) <= opts.stop.tol {
            break Verdict::Converged;
        }
        if steps >= opts.stop.max_steps {
            break Verdict::MaxSteps;
        }
        // The energy's gradient is −2v; v is the descent direction.
        if let Some((dx, dv)) = &prev {
            // Barzilai–Borwein: s = ⟨Δx, Δx⟩ / ⟨Δx, Δg⟩ with g = −2v.
            let curv = -2.0 * dot(dx, dv);
            if curv > 0.0 {
                step = dot(dx, dx) / curv;
            }
        }
        let slope = 2.0 * dot(&cur.v, &cur.v);
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            let trial: Vec<f64> = x.iter().zip(&cur.v).map(|(x, v)| x + step * v).collect();
            match field.eval(&trial) {
                Ok(e) if e.energy <= cur.energy - ARMIJO * step * slope => {
                    accepted = Some((trial, e));
                    break;
                }
                _ => {
                    rejected += 1;
                    step *= 0.5;
                }
            }
        }
        let Some((next_x, next)) = accepted else {
            return Err(Error::LineSearchStalled {
                iteration: steps,
                residual: sup_norm(&cur.v),
            });
        };
        let dx: Vec<f64> = next_x.iter().zip(&x).map(|(a, b)| a - b).collect();
        let dv: Vec<f64> = next.v.iter().zip(&cur.v).map(|(a, b)| a - b).collect();
        prev = Some((dx, dv));
        elapsed += step;
        steps += 1;
        x = next_x;
        cur = next;
        let s = sample(steps, elapsed, &cur);
        if let (Some(max), Some(p)) = (drift.product_r.as_mut(), s.drift_product_r) {
            *max = max.max(p.abs());
        }
        if steps % opts.log_stride == 0 {
            samples.push(s);
        }
    };
    if samples.last().is_none_or(|s| s.step != steps) {
        samples.push(sample(steps, elapsed, &cur));
    }
    let target_residual = match &cfg.kind {
        FlowKind::Cr4Prescribed { target } => Some(sup_diff(&cur.state.k, target)),
        FlowKind::G4Prescribed { target } => Some(sup_diff(&cur.state.c, target)),
        _ => None,
    };
    let geometry = cfg.initial.geometry();
    Ok(FlowResult {
        kind: cfg.kind.clone(),
        geometry,
        verdict,
        steps,
        rejected_steps: rejected,
        t: elapsed,
        samples,
        dqe: (geometry == crate::curvature::Geometry::Euclidean)
            .then(|| DqeSummary::of(&cur.state, cur.metric.radii())),
        final_metric: cur.metric,
        final_state: cur.state,
        driving_norm: sup_norm(&cur.v),
        drift,
        target_residual,
        degeneracy: None,
    })
}
