use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Where and how badly a tetrahedron failed to be realizable.
///
/// `diagnostic` is the relative realizability value `Q / (Σ 1/r)²` for
/// Euclidean tetrahedra, the arccos margin for hyperbolic ones, or the
/// offending arccos argument when a clamp was refused.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Degeneracy {
    pub tet: Option<usize>,
    pub vertices: Option<[usize; 4]>,
    pub diagnostic: f64,
}

impl Degeneracy {
    pub(crate) fn local(diagnostic: f64) -> Self {
        Degeneracy {
            tet: None,
            vertices: None,
            diagnostic,
        }
    }

    pub(crate) fn at(self, tet: usize, vertices: [usize; 4]) -> Self {
        Degeneracy {
            tet: Some(tet),
            vertices: Some(vertices),
            ..self
        }
    }
}

impl fmt::Display for Degeneracy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.tet, self.vertices) {
            (Some(t), Some(v)) => write!(
                f,
                "tet {t} {{{}, {}, {}, {}}} (diagnostic {:e})",
                v[0], v[1], v[2], v[3], self.diagnostic
            ),
            _ => write!(f, "diagnostic {:e}", self.diagnostic),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed document: {0}")]
    Malformed(String),

    #[error("vertex index {index} in tet {tet} is out of range for {vertex_count} vertices")]
    VertexOutOfRange {
        tet: usize,
        index: usize,
        vertex_count: usize,
    },

    #[error("tet {tet} repeats vertex {vertex}")]
    DuplicateVertex { tet: usize, vertex: usize },

    #[error("unknown builtin triangulation `{0}`")]
    UnknownBuiltin(String),

    #[error("radius {index} must be positive and finite, got {value}")]
    NonPositiveRadius { index: usize, value: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("degenerate tetrahedron: {0}")]
    DegenerateTet(Degeneracy),

    #[error("inadmissible initial metric: {0}")]
    InadmissibleInitialMetric(Degeneracy),

    #[error("unsupported: {0}")]
    Unsupported(&'static str),

    #[error("metric is not a DQE metric: residual {residual:e} exceeds tolerance {tolerance:e}")]
    NotDqe { residual: f64, tolerance: f64 },

    #[error("invalid flow configuration: {0}")]
    Config(String),

    #[error("line search stalled at iteration {iteration} with residual {residual:e}")]
    LineSearchStalled { iteration: usize, residual: f64 },
}
