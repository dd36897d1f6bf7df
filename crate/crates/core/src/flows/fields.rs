use nalgebra::{DMatrix, DVector};

use crate::complex::Triangulation;
use crate::curvature::{cr_curvature, CurvatureState, Geometry, PackingMetric};
use crate::linalg::dot;
use crate::operators::{assemble, sum_blocks, tet_blocks, AssemblyMethod};
use crate::{Degeneracy, Error, Result};

use super::FlowKind;

/// The right-hand side of a flow, in the flow's chart.
#[derive(Debug, Clone)]
pub struct VectorField<'a> {
    t: &'a Triangulation,
    kind: FlowKind,
    geometry: Geometry,
    floor: f64,
}

/// Everything known about one point of a trajectory.
#[derive(Debug, Clone)]
pub struct Eval {
    pub metric: PackingMetric,
    pub state: CurvatureState,
    /// Chart velocity; its sup-norm is the convergence measure.
    pub v: Vec<f64>,
    /// The monitored energy.
    pub energy: f64,
    /// Magnitude the energy's round-off is measured against.
    pub energy_scale: f64,
}

impl<'a> VectorField<'a> {
    pub fn new(t: &'a Triangulation, kind: FlowKind, geometry: Geometry, floor: f64) -> Self {
        VectorField {
            t,
            kind,
            geometry,
            floor,
        }
    }

    pub fn kind(&self) -> &FlowKind {
        &self.kind
    }

    pub fn triangulation(&self) -> &'a Triangulation {
        self.t
    }

    pub fn geometry(&self) -> Geometry {
        self.geometry
    }

    pub fn to_chart(&self, m: &PackingMetric) -> Vec<f64> {
        if self.kind.in_u_chart() {
            m.chart()
        } else {
            m.radii().to_vec()
        }
    }

    pub fn from_chart(&self, x: &[f64]) -> Result<PackingMetric> {
        if self.kind.in_u_chart() {
            PackingMetric::from_chart(self.geometry, x)
        } else {
            PackingMetric::new(self.geometry, x.to_vec())
        }
    }

    pub fn eval(&self, x: &[f64]) -> Result<Eval> {
        let metric = self.from_chart(x)?;
        let (worst, margin) = metric.worst_tet(self.t);
        if !(margin > self.floor) {
            let tet = self.t.tets()[worst];
            return Err(Error::DegenerateTet(
                Degeneracy::local(margin).at(worst, tet),
            ));
        }
        let needs_lambda = matches!(
            self.kind,
            FlowKind::Cr4
                | FlowKind::Cr4Normalized { .. }
                | FlowKind::Cr4Prescribed { .. }
                | FlowKind::Cr4Rcoord
                | FlowKind::G4
                | FlowKind::G4Prescribed { .. }
                | FlowKind::DqeResidual
        );
        // Euclidean: exact dual-geometry assembly. Hyperbolic: the exact
        // per-tet Jacobians summed; differencing the whole curvature map loses
        // accuracy next to the admissibility boundary.
        let (state, ops) = if !needs_lambda {
            (cr_curvature(self.t, &metric)?, None)
        } else if self.geometry == Geometry::Euclidean {
            let ops = assemble(self.t, &metric, AssemblyMethod::DualGeometry)?;
            let g = ops.g_laplacian.clone();
            (
                ops.curvature,
                Some(Operators {
                    lambda: ops.lambda,
                    laplacian: ops.laplacian,
                    g,
                }),
            )
        } else {
            let lambda = sum_blocks(self.t, &tet_blocks(self.t, &metric)?);
            let w = DMatrix::from_diagonal(&DVector::from_vec(metric.weights()));
            let laplacian = &lambda * w;
            (
                cr_curvature(self.t, &metric)?,
                Some(Operators {
                    lambda,
                    laplacian,
                    g: None,
                }),
            )
        };
        let r = metric.radii();
        let k = &state.k;
        let k_sq = dot(k, k);
        let (v, energy, energy_scale, state) = match &self.kind {
            FlowKind::Cr4 => {
                let ops = ops.as_ref().expect("assembled");
                let v = mat_t_vec(&ops.laplacian, k, -1.0);
                (v, k_sq, k_sq, state)
            }
            FlowKind::Cr4Normalized { target } | FlowKind::Cr4Prescribed { target } => {
                let ops = ops.as_ref().expect("assembled");
                let diff: Vec<f64> = target.iter().zip(k).map(|(a, b)| a - b).collect();
                let v = mat_t_vec(&ops.laplacian, &diff, 1.0);
                let state = state.with_targets(Some(target), None)?;
                let e = state.quadratic_energy;
                (v, e, k_sq, state)
            }
            FlowKind::Cr4Rcoord => {
                let ops = ops.as_ref().expect("assembled");
                (mat_t_vec(&ops.lambda, k, -1.0), k_sq, k_sq, state)
            }
            FlowKind::Cr2 => (k.iter().map(|k| -k).collect(), k_sq, k_sq, state),
            FlowKind::Cr2Normalized => {
                let lambda = state.lambda.expect("euclidean");
                let v = r.iter().zip(k).map(|(r, k)| lambda * r - k).collect();
                let s = state.total.expect("euclidean");
                let scale = r.iter().zip(k).map(|(r, k)| (r * k).abs()).sum();
                (v, s, scale, state)
            }
            FlowKind::G4 => {
                let ops = ops.as_ref().expect("assembled");
                let g = ops.g.as_ref().expect("euclidean");
                let c = &state.c;
                let c_sq = dot(c, c);
                (mat_t_vec(g, c, -1.0), c_sq, c_sq, state)
            }
            FlowKind::G4Prescribed { target } => {
                let ops = ops.as_ref().expect("assembled");
                let g = ops.g.as_ref().expect("euclidean");
                let c = &state.c;
                let c_sq = dot(c, c);
                let diff: Vec<f64> = target.iter().zip(c).map(|(a, b)| a - b).collect();
                let v = mat_t_vec(g, &diff, 1.0);
                let state = state.with_targets(None, Some(target))?;
                let e = state.g_energy;
                (v, e, c_sq, state)
            }
            FlowKind::DqeResidual => {
                let ops = ops.as_ref().expect("assembled");
                let lambda = state.lambda.expect("euclidean");
                let res: Vec<f64> = k.iter().zip(r).map(|(k, r)| k - lambda * r).collect();
                let mut v = mat_t_vec(&ops.lambda, &res, -1.0);
                for ((vi, ri), res_i) in v.iter_mut().zip(r).zip(&res) {
                    *vi = ri * (*vi + lambda * res_i);
                }
                (v, dot(&res, &res), k_sq, state)
            }
        };
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::DegenerateTet(Degeneracy::local(f64::NAN)));
        }
        Ok(Eval {
            metric,
            state,
            v,
            energy,
            energy_scale,
        })
    }
}

/// `sign · Aᵀx`.
fn mat_t_vec(a: &DMatrix<f64>, x: &[f64], sign: f64) -> Vec<f64> {
    (0..a.ncols())
        .map(|j| sign * (0..a.nrows()).map(|i| a[(i, j)] * x[i]).sum::<f64>())
        .collect()
}

struct Operators {
    lambda: DMatrix<f64>,
    laplacian: DMatrix<f64>,
    g: Option<DMatrix<f64>>,
}
