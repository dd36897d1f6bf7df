//! Packing metrics and the curvature assembled over a whole complex.
//!
//! The CR-curvature at a vertex is the angle defect of solid angles,
//! `K_i = 4π − Σ_{tets ∋ i} α_i`. The G-curvature `C_i = K_i w_i` uses the
//! weight `w_i = r_i` (Euclidean) or `sinh r_i` (hyperbolic) and scales like
//! a length. In Euclidean background the total functional is
//! `S = Σ K_i r_i = Σ C_i` and `λ = S / |r|²`; both are left unset for
//! hyperbolic metrics, whose functional carries a volume term that is not
//! evaluated here.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::complex::Triangulation;
use crate::euclid::{self, SolidAngles, TetRadii};
use crate::hyperbolic;
use crate::linalg::dot;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Geometry {
    Euclidean,
    Hyperbolic,
}

impl std::str::FromStr for Geometry {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euclidean" => Ok(Geometry::Euclidean),
            "hyperbolic" => Ok(Geometry::Hyperbolic),
            _ => Err(Error::Malformed(format!("unknown geometry `{s}`"))),
        }
    }
}

impl Geometry {
    pub fn solid_angles(self, rad: &TetRadii) -> Result<SolidAngles> {
        match self {
            Geometry::Euclidean => euclid::solid_angles(rad),
            Geometry::Hyperbolic => hyperbolic::hyp_solid_angles(rad),
        }
    }

    /// Scale-free realizability measure of one tet: `Q / (Σ 1/r)²` or the
    /// hyperbolic arccos margin. Positive iff the tet is realizable.
    pub fn tet_margin(self, rad: &TetRadii) -> f64 {
        match self {
            Geometry::Euclidean => euclid::relative_realizability(rad),
            Geometry::Hyperbolic => hyperbolic::hyp_admissible(rad).margin,
        }
    }

    /// Chart `u(r)`: `ln r` or `ln tanh(r/2)`.
    pub fn to_chart(self, r: f64) -> f64 {
        match self {
            Geometry::Euclidean => r.ln(),
            Geometry::Hyperbolic => (0.5 * r).tanh().ln(),
        }
    }

    pub fn from_chart(self, u: f64) -> f64 {
        match self {
            Geometry::Euclidean => u.exp(),
            Geometry::Hyperbolic => 2.0 * u.exp().atanh(),
        }
    }

    /// `dr/du`, also the G-curvature weight: `r` or `sinh r`.
    pub fn weight(self, r: f64) -> f64 {
        match self {
            Geometry::Euclidean => r,
            Geometry::Hyperbolic => r.sinh(),
        }
    }
}

/// Radii on the vertices plus the background geometry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PackingMetric {
    geometry: Geometry,
    r: Vec<f64>,
}

impl PackingMetric {
    pub fn new(geometry: Geometry, r: Vec<f64>) -> Result<Self> {
        for (index, &value) in r.iter().enumerate() {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::NonPositiveRadius { index, value });
            }
        }
        Ok(PackingMetric { geometry, r })
    }

    pub fn uniform(geometry: Geometry, n: usize, value: f64) -> Self {
        Self::new(geometry, vec![value; n]).expect("uniform radius must be positive")
    }

    pub fn from_chart(geometry: Geometry, u: &[f64]) -> Result<Self> {
        Self::new(
            geometry,
            u.iter().map(|&x| geometry.from_chart(x)).collect(),
        )
    }

    pub fn geometry(&self) -> Geometry {
        self.geometry
    }

    pub fn radii(&self) -> &[f64] {
        &self.r
    }

    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    pub fn chart(&self) -> Vec<f64> {
        self.r.iter().map(|&r| self.geometry.to_chart(r)).collect()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.r.iter().map(|&r| self.geometry.weight(r)).collect()
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(self.geometry, self.r.iter().map(|r| r * c).collect())
    }

    /// Multiplies each radius by `exp(η_i)`, `η_i` uniform in `(−amplitude,
    /// amplitude)` from a ChaCha8 stream seeded with `seed`.
    pub fn perturbed(&self, amplitude: f64, seed: u64) -> Self {
        if amplitude <= 0.0 {
            return self.clone();
        }
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let r = self
            .r
            .iter()
            .map(|&r| r * rng.random_range(-amplitude..amplitude).exp())
            .collect();
        PackingMetric {
            geometry: self.geometry,
            r,
        }
    }

    pub fn tet_radii(&self, tet: &[usize; 4]) -> TetRadii {
        TetRadii(tet.map(|v| self.r[v]))
    }

    pub fn check_dimension(&self, t: &Triangulation) -> Result<()> {
        if self.r.len() != t.vertex_count() {
            return Err(Error::DimensionMismatch {
                expected: t.vertex_count(),
                got: self.r.len(),
            });
        }
        Ok(())
    }

    /// Smallest per-tet margin (see [`Geometry::tet_margin`]) and the tet
    /// attaining it.
    pub fn worst_tet(&self, t: &Triangulation) -> (usize, f64) {
        t.tets()
            .iter()
            .enumerate()
            .map(|(i, tet)| (i, self.geometry.tet_margin(&self.tet_radii(tet))))
            .fold(
                (0, f64::INFINITY),
                |best, cur| if cur.1 < best.1 { cur } else { best },
            )
    }
}

/// Per-vertex curvatures and scalar energies of one metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvatureState {
    pub geometry: Geometry,
    pub k: Vec<f64>,
    pub c: Vec<f64>,
    /// `S = Σ K_i r_i`; Euclidean only.
    pub total: Option<f64>,
    /// `S / |r|²`; Euclidean only.
    pub lambda: Option<f64>,
    pub k_target: Vec<f64>,
    pub c_target: Vec<f64>,
    /// `|K − K̄|²`.
    pub quadratic_energy: f64,
    /// `|C − C̄|²`.
    pub g_energy: f64,
}

impl CurvatureState {
    /// Replaces the stored targets and recomputes the energies.
    pub fn with_targets(
        mut self,
        k_target: Option<&[f64]>,
        c_target: Option<&[f64]>,
    ) -> Result<Self> {
        let n = self.k.len();
        for t in [k_target, c_target].into_iter().flatten() {
            if t.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: t.len(),
                });
            }
        }
        self.k_target = k_target.map_or_else(|| vec![0.0; n], <[f64]>::to_vec);
        self.c_target = c_target.map_or_else(|| vec![0.0; n], <[f64]>::to_vec);
        self.quadratic_energy = sq_dist(&self.k, &self.k_target);
        self.g_energy = sq_dist(&self.c, &self.c_target);
        Ok(self)
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Solid angles of every tet, in tet order.
pub fn tet_angles(t: &Triangulation, m: &PackingMetric) -> Result<Vec<SolidAngles>> {
    m.check_dimension(t)?;
    t.tets()
        .iter()
        .enumerate()
        .map(|(i, tet)| {
            m.geometry
                .solid_angles(&m.tet_radii(tet))
                .map_err(|e| match e {
                    Error::DegenerateTet(d) => Error::DegenerateTet(d.at(i, *tet)),
                    other => other,
                })
        })
        .collect()
}

/// Angle defects `K_i = 4π − Σ α_i`, reduced in tet order.
pub fn curvature_vector(t: &Triangulation, m: &PackingMetric) -> Result<Vec<f64>> {
    let angles = tet_angles(t, m)?;
    let mut k = vec![4.0 * PI; t.vertex_count()];
    for (tet, a) in t.tets().iter().zip(&angles) {
        for (slot, &v) in tet.iter().enumerate() {
            k[v] -= a[slot];
        }
    }
    Ok(k)
}

pub fn cr_curvature(t: &Triangulation, m: &PackingMetric) -> Result<CurvatureState> {
    let k = curvature_vector(t, m)?;
    let c: Vec<f64> = k.iter().zip(m.weights()).map(|(k, w)| k * w).collect();
    let n = k.len();
    let (total, lambda) = match m.geometry {
        Geometry::Euclidean => {
            let s = dot(&k, &m.r);
            (Some(s), Some(s / dot(&m.r, &m.r)))
        }
        Geometry::Hyperbolic => (None, None),
    };
    let quadratic_energy = dot(&k, &k);
    let g_energy = dot(&c, &c);
    Ok(CurvatureState {
        geometry: m.geometry,
        k,
        c,
        total,
        lambda,
        k_target: vec![0.0; n],
        c_target: vec![0.0; n],
        quadratic_energy,
        g_energy,
    })
}

/// `S_τ = S / |r|^τ` (Euclidean only).
pub fn total_functional_tau(t: &Triangulation, m: &PackingMetric, tau: f64) -> Result<f64> {
    if m.geometry != Geometry::Euclidean {
        return Err(Error::Unsupported(
            "the total functional is only evaluated in Euclidean background",
        ));
    }
    let state = cr_curvature(t, m)?;
    let norm = dot(&m.r, &m.r).sqrt();
    Ok(state.total.expect("euclidean") / norm.powf(tau))
}

/// `∇_r S_τ = (K − τ S r / |r|²) / |r|^τ`.
pub fn total_functional_tau_gradient(
    t: &Triangulation,
    m: &PackingMetric,
    tau: f64,
) -> Result<Vec<f64>> {
    if m.geometry != Geometry::Euclidean {
        return Err(Error::Unsupported(
            "the total functional is only evaluated in Euclidean background",
        ));
    }
    let state = cr_curvature(t, m)?;
    let s = state.total.expect("euclidean");
    let norm2 = dot(&m.r, &m.r);
    let scale = norm2.sqrt().powf(tau);
    Ok(state
        .k
        .iter()
        .zip(&m.r)
        .map(|(k, r)| (k - tau * s * r / norm2) / scale)
        .collect())
}

/// `|K − K̄|²`, with `K̄ = 0` when no target is given.
pub fn quadratic_energy(
    t: &Triangulation,
    m: &PackingMetric,
    target: Option<&[f64]>,
) -> Result<f64> {
    let state = cr_curvature(t, m)?.with_targets(target, None)?;
    Ok(state.quadratic_energy)
}
