//! Curvature flows.
//!
//! Every flow is integrated in its own chart: `u` (`ln r` or `ln tanh(r/2)`)
//! for the fourth-order and G-flows, `r` for the second-order flows and the
//! r-coordinate variant. Steps are classical RK4 with step doubling. A step
//! whose stages leave the admissible region is halved; repeated failures end
//! the run with [`Verdict::HitDegeneracy`] and the last admissible state.

mod dqe;
mod fields;
mod integrator;
mod prescribe;

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::complex::Triangulation;
use crate::curvature::{CurvatureState, Geometry, PackingMetric};
use crate::linalg::{dot, sup_norm};
use crate::{Degeneracy, Error, Result};

pub use dqe::{find_dqe, DqeClass, DqeSummary};
pub use fields::{Eval, VectorField};
pub use prescribe::{prescribe_curvature, Strategy, Target};

/// Consecutive inadmissible step attempts tolerated before giving up.
pub const MAX_DEGENERATE_REJECTIONS: usize = 40;
/// Radii outside `[RADIUS_FLOOR, RADIUS_CEILING]` end the run as diverged.
pub const RADIUS_FLOOR: f64 = 1e-8;
pub const RADIUS_CEILING: f64 = 1e8;
/// Per-step slack for the energy monitor, relative to the energy's scale.
pub const MONOTONICITY_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum FlowKind {
    /// `u̇ = −LᵀK`.
    Cr4,
    /// `u̇ = Lᵀ(K* − K)` towards the curvature `K*` of a DQE metric.
    Cr4Normalized { target: Vec<f64> },
    /// `u̇ = Lᵀ(K̄ − K)`.
    Cr4Prescribed { target: Vec<f64> },
    /// `ṙ = −ΛK`.
    Cr4Rcoord,
    /// `ṙ = −K`.
    Cr2,
    /// `ṙ = λr − K`, `λ = S/|r|²`.
    Cr2Normalized,
    /// `u̇ = −GC`.
    G4,
    /// `u̇ = G(C̄ − C)`.
    G4Prescribed { target: Vec<f64> },
    /// `u̇ = −R(Λ − λI)(K − λr)`: steepest descent of `|K − λr|²` in `u`.
    DqeResidual,
}

impl FlowKind {
    pub const NAMES: [&'static str; 9] = [
        "cr4",
        "cr4_normalized",
        "cr4_prescribed",
        "cr4_rcoord",
        "cr2",
        "cr2_normalized",
        "g4",
        "g4_prescribed",
        "dqe_residual",
    ];

    /// Builds a kind from its snake-case name; targeted kinds need `target`.
    pub fn from_name(name: &str, target: Option<Vec<f64>>) -> Result<Self> {
        let need = |target: Option<Vec<f64>>| {
            target.ok_or_else(|| Error::Config(format!("flow `{name}` needs a target")))
        };
        Ok(match name {
            "cr4" => FlowKind::Cr4,
            "cr4_normalized" => FlowKind::Cr4Normalized {
                target: need(target)?,
            },
            "cr4_prescribed" => FlowKind::Cr4Prescribed {
                target: need(target)?,
            },
            "cr4_rcoord" => FlowKind::Cr4Rcoord,
            "cr2" => FlowKind::Cr2,
            "cr2_normalized" => FlowKind::Cr2Normalized,
            "g4" => FlowKind::G4,
            "g4_prescribed" => FlowKind::G4Prescribed {
                target: need(target)?,
            },
            "dqe_residual" => FlowKind::DqeResidual,
            _ => return Err(Error::Config(format!("unknown flow kind `{name}`"))),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            FlowKind::Cr4 => "cr4",
            FlowKind::Cr4Normalized { .. } => "cr4_normalized",
            FlowKind::Cr4Prescribed { .. } => "cr4_prescribed",
            FlowKind::Cr4Rcoord => "cr4_rcoord",
            FlowKind::Cr2 => "cr2",
            FlowKind::Cr2Normalized => "cr2_normalized",
            FlowKind::G4 => "g4",
            FlowKind::G4Prescribed { .. } => "g4_prescribed",
            FlowKind::DqeResidual => "dqe_residual",
        }
    }

    pub fn target(&self) -> Option<&[f64]> {
        match self {
            FlowKind::Cr4Normalized { target }
            | FlowKind::Cr4Prescribed { target }
            | FlowKind::G4Prescribed { target } => Some(target),
            _ => None,
        }
    }

    /// True when the flow is integrated in the `u` chart.
    pub fn in_u_chart(&self) -> bool {
        !matches!(
            self,
            FlowKind::Cr4Rcoord | FlowKind::Cr2 | FlowKind::Cr2Normalized
        )
    }

    pub fn supports(&self, geometry: Geometry) -> bool {
        match geometry {
            Geometry::Euclidean => true,
            Geometry::Hyperbolic => {
                matches!(self, FlowKind::Cr2 | FlowKind::Cr4Rcoord | FlowKind::Cr4)
            }
        }
    }

    /// Whether `Σu` (equivalently `Πr`) is conserved.
    pub fn conserves_chart_sum(&self, geometry: Geometry) -> bool {
        geometry == Geometry::Euclidean
            && matches!(
                self,
                FlowKind::Cr4
                    | FlowKind::Cr4Normalized { .. }
                    | FlowKind::Cr4Prescribed { .. }
                    | FlowKind::DqeResidual
            )
    }

    /// Whether `|r|²` is conserved.
    pub fn conserves_norm(&self, geometry: Geometry) -> bool {
        geometry == Geometry::Euclidean
            && matches!(self, FlowKind::Cr2Normalized | FlowKind::Cr4Rcoord)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StepControl {
    pub dt0: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    pub rel_tol: f64,
}

impl Default for StepControl {
    fn default() -> Self {
        StepControl {
            dt0: 1e-3,
            dt_min: 1e-10,
            dt_max: 1.0,
            rel_tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StopCriteria {
    /// Sup-norm of the driving vector (times `max r` for r-flows).
    pub tol: f64,
    pub max_steps: usize,
    /// Seconds; leave unset for reproducible runs.
    pub max_wall_time: Option<f64>,
    /// Stop once this flow time is reached.
    pub t_end: Option<f64>,
}

impl Default for StopCriteria {
    fn default() -> Self {
        StopCriteria {
            tol: 1e-10,
            max_steps: 100_000,
            max_wall_time: None,
            t_end: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FlowOptions {
    pub step: StepControl,
    pub stop: StopCriteria,
    /// Floor on the per-tet margin (relative `Q` or hyperbolic arccos margin).
    pub admissibility_floor: f64,
    /// Record every `log_stride`-th accepted step (the first and last state
    /// are always recorded).
    pub log_stride: usize,
}

impl Default for FlowOptions {
    fn default() -> Self {
        FlowOptions {
            step: StepControl::default(),
            stop: StopCriteria::default(),
            admissibility_floor: 1e-12,
            log_stride: 1,
        }
    }
}

impl FlowOptions {
    pub fn validate(&self) -> Result<()> {
        let s = &self.step;
        let positive = [
            ("dt0", s.dt0),
            ("dt_min", s.dt_min),
            ("dt_max", s.dt_max),
            ("rel_tol", s.rel_tol),
            ("tol", self.stop.tol),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        if s.dt_min > s.dt_max {
            return Err(Error::Config(format!(
                "dt_min {} exceeds dt_max {}",
                s.dt_min, s.dt_max
            )));
        }
        if !(self.admissibility_floor >= 0.0) {
            return Err(Error::Config(
                "admissibility_floor must be nonnegative".into(),
            ));
        }
        if self.log_stride == 0 {
            return Err(Error::Config("log_stride must be at least 1".into()));
        }
        if let Some(t) = self.stop.t_end {
            if !(t > 0.0) {
                return Err(Error::Config(format!("t_end must be positive, got {t}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowConfig {
    pub kind: FlowKind,
    pub initial: PackingMetric,
    #[serde(default)]
    pub options: FlowOptions,
}

impl FlowConfig {
    pub fn new(kind: FlowKind, initial: PackingMetric) -> Self {
        FlowConfig {
            kind,
            initial,
            options: FlowOptions::default(),
        }
    }

    pub fn validate(&self, t: &Triangulation) -> Result<()> {
        self.initial.check_dimension(t)?;
        self.options.validate()?;
        let geometry = self.initial.geometry();
        if !self.kind.supports(geometry) {
            return Err(Error::Config(format!(
                "flow `{}` is not available in hyperbolic background",
                self.kind.name()
            )));
        }
        if let Some(target) = self.kind.target() {
            if target.len() != t.vertex_count() {
                return Err(Error::DimensionMismatch {
                    expected: t.vertex_count(),
                    got: target.len(),
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Converged,
    MaxSteps,
    HitDegeneracy,
    Diverged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub step: usize,
    pub t: f64,
    pub r: Vec<f64>,
    pub k: Vec<f64>,
    pub total: Option<f64>,
    pub energy: f64,
    /// `Πr / Πr₀ − 1`, when `Σu` is conserved.
    pub drift_product_r: Option<f64>,
    /// `|r|² / |r₀|² − 1`, when `|r|²` is conserved.
    pub drift_norm_r_sq: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DriftReport {
    /// Largest `|Πr / Πr₀ − 1|` over accepted steps.
    pub product_r: Option<f64>,
    /// Largest `|‖r‖² / ‖r₀‖² − 1|` over accepted steps.
    pub norm_r_sq: Option<f64>,
    /// Accepted steps whose energy rose beyond the slack.
    pub monotonicity_violations: Vec<usize>,
    /// Largest energy increase seen on any accepted step, relative to scale.
    pub max_relative_increase: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowResult {
    pub kind: FlowKind,
    pub geometry: Geometry,
    pub verdict: Verdict,
    pub steps: usize,
    pub rejected_steps: usize,
    pub t: f64,
    pub samples: Vec<Sample>,
    pub final_metric: PackingMetric,
    pub final_state: CurvatureState,
    /// Sup-norm of the driving vector at the final state.
    pub driving_norm: f64,
    pub drift: DriftReport,
    /// Euclidean only.
    pub dqe: Option<DqeSummary>,
    /// `‖K − K̄‖_∞` or `‖C − C̄‖_∞` for targeted kinds.
    pub target_residual: Option<f64>,
    /// Last refused stage when the run hit the admissibility boundary.
    pub degeneracy: Option<Degeneracy>,
}

impl FlowResult {
    pub fn energies(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|s| s.energy)
    }
}

/// Integrates `cfg.kind` from `cfg.initial`.
pub fn run_flow(t: &Triangulation, cfg: &FlowConfig) -> Result<FlowResult> {
    cfg.validate(t)?;
    let field = VectorField::new(
        t,
        cfg.kind.clone(),
        cfg.initial.geometry(),
        cfg.options.admissibility_floor,
    );
    let x0 = field.to_chart(&cfg.initial);
    let first = field.eval(&x0).map_err(|e| match e {
        Error::DegenerateTet(d) => Error::InadmissibleInitialMetric(d),
        other => other,
    })?;
    Runner::new(&field, cfg.options, x0, first).run()
}

/// One RK4 step of size `dt` (negative steps integrate backwards).
pub fn single_step(
    t: &Triangulation,
    kind: FlowKind,
    m: &PackingMetric,
    dt: f64,
) -> Result<PackingMetric> {
    let field = VectorField::new(
        t,
        kind,
        m.geometry(),
        FlowOptions::default().admissibility_floor,
    );
    let x = field.to_chart(m);
    let k1 = field.eval(&x)?;
    let y = integrator::rk4(&field, &x, &k1.v, dt)?;
    field.from_chart(&y)
}

struct Runner<'a> {
    field: &'a VectorField<'a>,
    opts: FlowOptions,
    x: Vec<f64>,
    cur: Eval,
    t: f64,
    steps: usize,
    rejected: usize,
    samples: Vec<Sample>,
    drift: DriftReport,
    chart_sum0: f64,
    norm0: f64,
    degeneracy: Option<Degeneracy>,
}

impl<'a> Runner<'a> {
    fn new(field: &'a VectorField<'a>, opts: FlowOptions, x: Vec<f64>, cur: Eval) -> Self {
        let r0 = cur.metric.radii();
        let chart_sum0 = r0.iter().map(|r| r.ln()).sum();
        let norm0 = dot(r0, r0);
        let geometry = field.geometry();
        let drift = DriftReport {
            product_r: field.kind().conserves_chart_sum(geometry).then_some(0.0),
            norm_r_sq: field.kind().conserves_norm(geometry).then_some(0.0),
            ..DriftReport::default()
        };
        let mut runner = Runner {
            field,
            opts,
            x,
            cur,
            t: 0.0,
            steps: 0,
            rejected: 0,
            samples: Vec::new(),
            drift,
            chart_sum0,
            norm0,
            degeneracy: None,
        };
        runner.record();
        runner
    }

    fn drifts(&self, m: &PackingMetric) -> (Option<f64>, Option<f64>) {
        let geometry = self.field.geometry();
        let r = m.radii();
        let kind = self.field.kind();
        let product = kind
            .conserves_chart_sum(geometry)
            .then(|| (r.iter().map(|r| r.ln()).sum::<f64>() - self.chart_sum0).exp_m1());
        let norm = kind
            .conserves_norm(geometry)
            .then(|| dot(r, r) / self.norm0 - 1.0);
        (product, norm)
    }

    fn record(&mut self) {
        let (drift_product_r, drift_norm_r_sq) = self.drifts(&self.cur.metric);
        self.samples.push(Sample {
            step: self.steps,
            t: self.t,
            r: self.cur.metric.radii().to_vec(),
            k: self.cur.state.k.clone(),
            total: self.cur.state.total,
            energy: self.cur.energy,
            drift_product_r,
            drift_norm_r_sq,
        });
    }

    fn converged(&self) -> bool {
        let scale = if self.field.kind().in_u_chart() {
            1.0
        } else {
            sup_norm(self.cur.metric.radii())
        };
        sup_norm(&self.cur.v) <= self.opts.stop.tol * scale
    }

    fn run(mut self) -> Result<FlowResult> {
        let started = Instant::now();
        let wall = self.opts.stop.max_wall_time.map(Duration::from_secs_f64);
        let s = self.opts.step;
        let mut dt = s.dt0.clamp(s.dt_min, s.dt_max);
        let mut degenerate_streak = 0;
        let verdict = loop {
            if self.converged() {
                break Verdict::Converged;
            }
            if self.steps >= self.opts.stop.max_steps {
                break Verdict::MaxSteps;
            }
            if wall.is_some_and(|w| started.elapsed() >= w) {
                break Verdict::MaxSteps;
            }
            let mut h = dt;
            if let Some(t_end) = self.opts.stop.t_end {
                let left = t_end - self.t;
                if left <= 1e-14 * t_end.max(1.0) {
                    break Verdict::MaxSteps;
                }
                h = h.min(left);
            }
            match integrator::attempt(self.field, &self.x, &self.cur, h, s.rel_tol) {
                integrator::Attempt::Accepted { x, eval, factor } => {
                    degenerate_streak = 0;
                    if !within_bounds(eval.metric.radii()) {
                        self.x = x;
                        self.cur = eval;
                        self.t += h;
                        self.steps += 1;
                        self.record();
                        break Verdict::Diverged;
                    }
                    let slack =
                        MONOTONICITY_SLACK * self.cur.energy_scale.max(self.cur.energy.abs());
                    let rise = eval.energy - self.cur.energy;
                    if slack > 0.0 {
                        self.drift.max_relative_increase = self
                            .drift
                            .max_relative_increase
                            .max(rise / (slack / MONOTONICITY_SLACK));
                    }
                    self.x = x;
                    self.cur = eval;
                    self.t += h;
                    self.steps += 1;
                    if rise > slack {
                        self.drift.monotonicity_violations.push(self.steps);
                    }
                    let (p, n) = self.drifts(&self.cur.metric);
                    if let (Some(max), Some(p)) = (self.drift.product_r.as_mut(), p) {
                        *max = max.max(p.abs());
                    }
                    if let (Some(max), Some(n)) = (self.drift.norm_r_sq.as_mut(), n) {
                        *max = max.max(n.abs());
                    }
                    if self.steps.is_multiple_of(self.opts.log_stride) {
                        self.record();
                    }
                    if h == dt {
                        dt = (dt * factor).clamp(s.dt_min, s.dt_max);
                    }
                }
                integrator::Attempt::Rejected { factor } => {
                    self.rejected += 1;
                    if h <= s.dt_min {
                        // The error test fails even at the smallest step: the
                        // field is blowing up, which only happens at the
                        // admissibility boundary.
                        let (tet, margin) = self.cur.metric.worst_tet(self.field.triangulation());
                        let vertices = self.field.triangulation().tets()[tet];
                        self.degeneracy = Some(Degeneracy::local(margin).at(tet, vertices));
                        break Verdict::HitDegeneracy;
                    }
                    dt = (h * factor).clamp(s.dt_min, s.dt_max);
                }
                integrator::Attempt::Inadmissible(d) => {
                    self.rejected += 1;
                    degenerate_streak += 1;
                    self.degeneracy = d.or(self.degeneracy);
                    if degenerate_streak >= MAX_DEGENERATE_REJECTIONS || h <= s.dt_min {
                        break Verdict::HitDegeneracy;
                    }
                    dt = (h * 0.5).max(s.dt_min);
                }
            }
        };
        if self.samples.last().is_none_or(|s| s.step != self.steps) {
            self.record();
        }
        self.finish(verdict)
    }

    fn finish(self, verdict: Verdict) -> Result<FlowResult> {
        let kind = self.field.kind().clone();
        let geometry = self.field.geometry();
        let dqe = (geometry == Geometry::Euclidean)
            .then(|| DqeSummary::of(&self.cur.state, self.cur.metric.radii()));
        let target_residual = match &kind {
            FlowKind::Cr4Normalized { target } | FlowKind::Cr4Prescribed { target } => {
                Some(sup_diff(&self.cur.state.k, target))
            }
            FlowKind::G4Prescribed { target } => Some(sup_diff(&self.cur.state.c, target)),
            _ => None,
        };
        Ok(FlowResult {
            kind,
            geometry,
            verdict,
            steps: self.steps,
            rejected_steps: self.rejected,
            t: self.t,
            samples: self.samples,
            final_metric: self.cur.metric.clone(),
            final_state: self.cur.state.clone(),
            driving_norm: sup_norm(&self.cur.v),
            drift: self.drift,
            dqe,
            target_residual,
            degeneracy: self.degeneracy,
        })
    }
}

fn within_bounds(r: &[f64]) -> bool {
    r.iter()
        .all(|&r| r.is_finite() && (RADIUS_FLOOR..=RADIUS_CEILING).contains(&r))
}

pub(crate) fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .fold(0.0f64, |acc, (x, y)| acc.max((x - y).abs()))
}

#[cfg(test)]
mod tests;
