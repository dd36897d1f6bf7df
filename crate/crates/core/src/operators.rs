//! The Jacobian/Laplacian family of the curvature map.
//!
//! `Λ = ∂K/∂r` is symmetric. With `W = diag(dr/du)` (`R = diag(r)` in
//! Euclidean background, `R_h = diag(sinh r)` in hyperbolic) the discrete
//! dual-Laplacian is `L = ∂K/∂u = Λ W` and the weighted one is `L̃ = W Λ W`.
//! Edge weights are `B_ij = −L_ij`. In Euclidean background the G-Laplacian
//! is `G = Ω + R Λ R` with `Ω = diag(C)`.
//!
//! Two assembly routes exist. The dual-geometry route sums the dual areas of
//! the edge-tangent spheres (`l*_ij = Σ A_ijkl`) and sets
//! `B_ij = 2 l*_ij / (r_i l_ij)`, `L_ii = Σ_j B_ij`. The finite-difference
//! route differentiates the curvature map directly. They share nothing below
//! the solid-angle formulas, so each is an oracle for the other.

use nalgebra::{DMatrix, DVector, Matrix4};
use serde::{Deserialize, Serialize};

use crate::complex::{Triangulation, TET_EDGES};
use crate::curvature::{cr_curvature, curvature_vector, CurvatureState, Geometry, PackingMetric};
use crate::euclid::{self};
use crate::fd;
use crate::hyperbolic;
use crate::linalg::{self, dot, max_abs};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssemblyMethod {
    DualGeometry,
    FiniteDifference,
}

impl AssemblyMethod {
    /// Dual geometry for Euclidean metrics, finite differences otherwise.
    pub fn default_for(geometry: Geometry) -> Self {
        match geometry {
            Geometry::Euclidean => AssemblyMethod::DualGeometry,
            Geometry::Hyperbolic => AssemblyMethod::FiniteDifference,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeWeight {
    pub edge: [usize; 2],
    /// `B_ij` for `edge = [i, j]`.
    pub forward: f64,
    /// `B_ji`.
    pub backward: f64,
}

#[derive(Debug, Clone)]
pub struct OperatorSet {
    pub geometry: Geometry,
    pub method: AssemblyMethod,
    /// `Λ = ∂K/∂r`.
    pub lambda: DMatrix<f64>,
    /// `L = ∂K/∂u = Λ W`.
    pub laplacian: DMatrix<f64>,
    /// `L̃ = W Λ W`.
    pub weighted_laplacian: DMatrix<f64>,
    /// Diagonal of `W`: `r` or `sinh r`.
    pub weights: Vec<f64>,
    /// Diagonal of `Ω`: the G-curvatures.
    pub omega: Vec<f64>,
    /// `G = Ω + R Λ R`; Euclidean only.
    pub g_laplacian: Option<DMatrix<f64>>,
    pub edge_weights: Vec<EdgeWeight>,
    /// `l*_ij` per edge of the complex; dual-geometry route only.
    pub dual_lengths: Option<Vec<f64>>,
    /// `|Λ − Λᵀ|_max / |Λ|_max` before symmetrization.
    pub asymmetry: f64,
    /// Curvature at the assembly point.
    pub curvature: CurvatureState,
}

impl OperatorSet {
    pub fn n(&self) -> usize {
        self.weights.len()
    }
}

/// Per-tet blocks `Λ_ijkl = −∂(α_i, α_j, α_k, α_l)/∂(r_i, r_j, r_k, r_l)`.
pub fn tet_blocks(t: &Triangulation, m: &PackingMetric) -> Result<Vec<Matrix4<f64>>> {
    m.check_dimension(t)?;
    t.tets()
        .iter()
        .enumerate()
        .map(|(i, tet)| {
            let rad = m.tet_radii(tet);
            let block = match m.geometry() {
                Geometry::Euclidean => euclid::angle_jacobian(&rad),
                Geometry::Hyperbolic => hyperbolic::hyp_angle_jacobian(&rad),
            };
            block.map_err(|e| match e {
                Error::DegenerateTet(d) => Error::DegenerateTet(d.at(i, *tet)),
                other => other,
            })
        })
        .collect()
}

/// Sums the per-tet blocks into an `N × N` matrix.
pub fn sum_blocks(t: &Triangulation, blocks: &[Matrix4<f64>]) -> DMatrix<f64> {
    let n = t.vertex_count();
    let mut out = DMatrix::zeros(n, n);
    for (tet, block) in t.tets().iter().zip(blocks) {
        for (a, &va) in tet.iter().enumerate() {
            for (b, &vb) in tet.iter().enumerate() {
                out[(va, vb)] += block[(a, b)];
            }
        }
    }
    out
}

pub fn assemble(
    t: &Triangulation,
    m: &PackingMetric,
    method: AssemblyMethod,
) -> Result<OperatorSet> {
    let curvature = cr_curvature(t, m)?;
    let r = m.radii();
    let n = r.len();
    let (lambda, dual_lengths, asymmetry) = match method {
        AssemblyMethod::DualGeometry => {
            if m.geometry() != Geometry::Euclidean {
                return Err(Error::Unsupported(
                    "dual-geometry assembly is only available in Euclidean background",
                ));
            }
            let dual = dual_lengths(t, m)?;
            let mut lambda = DMatrix::zeros(n, n);
            for (e, &[i, j]) in t.edges().iter().enumerate() {
                let l = r[i] + r[j];
                let off = -2.0 * dual[e] / (l * r[i] * r[j]);
                lambda[(i, j)] = off;
                lambda[(j, i)] = off;
            }
            for i in 0..n {
                let s: f64 = (0..n)
                    .filter(|&j| j != i)
                    .map(|j| lambda[(i, j)] * r[j])
                    .sum();
                lambda[(i, i)] = -s / r[i];
            }
            (lambda, Some(dual), 0.0)
        }
        AssemblyMethod::FiniteDifference => {
            let geometry = m.geometry();
            let raw = fd::central_jacobian(r, fd::REL_STEP, |x| {
                curvature_vector(t, &PackingMetric::new(geometry, x.to_vec())?)
            })?;
            let scale = max_abs(&raw);
            let asym = if scale > 0.0 {
                max_abs(&(&raw - raw.transpose())) / scale
            } else {
                0.0
            };
            ((&raw + raw.transpose()) * 0.5, None, asym)
        }
    };

    let weights = m.weights();
    let w = DMatrix::from_diagonal(&DVector::from_column_slice(&weights));
    let laplacian = &lambda * &w;
    let weighted_laplacian = &w * &lambda * &w;
    let g_laplacian = (m.geometry() == Geometry::Euclidean).then(|| {
        let mut g = weighted_laplacian.clone();
        for i in 0..n {
            g[(i, i)] += curvature.c[i];
        }
        g
    });
    let edge_weights = t
        .edges()
        .iter()
        .map(|&[i, j]| EdgeWeight {
            edge: [i, j],
            forward: -laplacian[(i, j)],
            backward: -laplacian[(j, i)],
        })
        .collect();

    Ok(OperatorSet {
        geometry: m.geometry(),
        method,
        lambda,
        laplacian,
        weighted_laplacian,
        weights,
        omega: curvature.c.clone(),
        g_laplacian,
        edge_weights,
        dual_lengths,
        asymmetry,
        curvature,
    })
}

/// `l*_ij = Σ_{tets ⊇ {i,j}} A_ijkl`, indexed like [`Triangulation::edges`].
pub fn dual_lengths(t: &Triangulation, m: &PackingMetric) -> Result<Vec<f64>> {
    let mut dual = vec![0.0; t.edges().len()];
    for (ti, tet) in t.tets().iter().enumerate() {
        let cell = euclid::dual_cell(&m.tet_radii(tet)).map_err(|e| match e {
            Error::DegenerateTet(d) => Error::DegenerateTet(d.at(ti, *tet)),
            other => other,
        })?;
        for (le, &[a, b]) in TET_EDGES.iter().enumerate() {
            let e = t
                .edge_index(tet[a], tet[b])
                .expect("tet edges are in the complex");
            dual[e] += cell.areas[le];
        }
    }
    Ok(dual)
}

#[derive(Debug, Clone)]
pub struct Spectrum {
    /// Eigenvalues of `Λ`, ascending.
    pub eigenvalues: Vec<f64>,
    /// Matching unit eigenvectors as columns.
    pub eigenvectors: DMatrix<f64>,
    /// Smallest eigenvalue of `Λ` restricted to the complement of `r`.
    pub lambda1: f64,
    /// Angle (radians) between the lowest eigenvector and `r`.
    pub kernel_angle: f64,
}

pub fn spectrum(ops: &OperatorSet, m: &PackingMetric) -> Spectrum {
    let (eigenvalues, eigenvectors) = linalg::sorted_symmetric_eigen(&ops.lambda);
    let q = linalg::orthogonal_complement(m.radii());
    let restricted = q.transpose() * &ops.lambda * &q;
    let (inner, _) = linalg::sorted_symmetric_eigen(&restricted);
    let lambda1 = inner.first().copied().unwrap_or(f64::NAN);
    let r = DVector::from_column_slice(m.radii()).normalize();
    let cos = eigenvectors.column(0).dot(&r).abs().min(1.0);
    Spectrum {
        eigenvalues,
        eigenvectors,
        lambda1,
        kernel_angle: cos.acos(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttractorClass {
    /// `λ* ≤ 0` or `λ₁(Λ) > λ*`: a local attractor of the normalized
    /// second-order flow.
    Attractor,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub lambda_star: f64,
    pub lambda1: f64,
    pub residual: f64,
    pub class: AttractorClass,
    /// Eigenvalues of `λ*(I − r rᵀ/|r|²) − Λ`, ascending.
    pub jacobian_eigenvalues: Vec<f64>,
}

/// Spectral stability of a (near-)DQE metric under `ṙ = λr − K`.
pub fn dqe_stability_report(
    t: &Triangulation,
    m: &PackingMetric,
    tolerance: f64,
) -> Result<StabilityReport> {
    if m.geometry() != Geometry::Euclidean {
        return Err(Error::Unsupported(
            "DQE metrics are defined in Euclidean background",
        ));
    }
    let ops = assemble(t, m, AssemblyMethod::DualGeometry)?;
    let r = m.radii();
    let lambda_star = ops.curvature.lambda.expect("euclidean");
    let residual = ops
        .curvature
        .k
        .iter()
        .zip(r)
        .fold(0.0f64, |acc, (k, r)| acc.max((k - lambda_star * r).abs()));
    if residual > tolerance {
        return Err(Error::NotDqe {
            residual,
            tolerance,
        });
    }
    let spec = spectrum(&ops, m);
    let n = r.len();
    let rv = DVector::from_column_slice(r);
    let proj = DMatrix::identity(n, n) - &rv * rv.transpose() / dot(r, r);
    let jac = proj * lambda_star - &ops.lambda;
    let (jacobian_eigenvalues, _) = linalg::sorted_symmetric_eigen(&jac);
    let class = if lambda_star <= 0.0 || spec.lambda1 > lambda_star {
        AttractorClass::Attractor
    } else {
        AttractorClass::Inconclusive
    };
    Ok(StabilityReport {
        lambda_star,
        lambda1: spec.lambda1,
        residual,
        class,
        jacobian_eigenvalues,
    })
}
