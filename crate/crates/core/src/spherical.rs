// Vertex links of Euclidean and hyperbolic tetrahedra are spherical
// triangles whose sides are the three face angles at the vertex. Both kernels
// feed face-angle cosines in here.

use std::f64::consts::PI;

use crate::{Degeneracy, Error, Result};

/// Arguments this far outside [-1, 1] are treated as round-off and clamped.
pub(crate) const CLAMP_SLACK: f64 = 1e-12;

pub(crate) fn clamped_acos(x: f64) -> Result<f64> {
    if !x.is_finite() || x.abs() > 1.0 + CLAMP_SLACK {
        return Err(Error::DegenerateTet(Degeneracy::local(x)));
    }
    Ok(x.clamp(-1.0, 1.0).acos())
}

/// Cosines of the three dihedral angles at a vertex, given the cosines of its
/// face angles `x = γ^{bc}`, `y = γ^{bd}`, `z = γ^{cd}`.
///
/// Returned in edge order `ab, ac, ad`.
pub(crate) fn dihedral_cosines(x: f64, y: f64, z: f64) -> [f64; 3] {
    let sx = (1.0 - x * x).max(0.0).sqrt();
    let sy = (1.0 - y * y).max(0.0).sqrt();
    let sz = (1.0 - z * z).max(0.0).sqrt();
    [
        (z - x * y) / (sx * sy),
        (y - x * z) / (sx * sz),
        (x - y * z) / (sy * sz),
    ]
}

/// Face-angle cosine lookup: `cos(a, b, c)` is the cosine of the angle at `a`
/// in face `{a, b, c}`.
pub(crate) fn solid_angles_from<F>(cos: F) -> Result<[f64; 4]>
where
    F: Fn(usize, usize, usize) -> f64,
{
    let mut out = [0.0; 4];
    for (a, slot) in out.iter_mut().enumerate() {
        let [b, c, d] = others(a);
        let dihedral = dihedral_cosines(cos(a, b, c), cos(a, b, d), cos(a, c, d));
        let mut sum = 0.0;
        for cz in dihedral {
            sum += clamped_acos(cz)?;
        }
        *slot = sum - PI;
    }
    Ok(out)
}

/// Smallest distance of any face-angle or dihedral arccos argument from ±1.
/// Non-finite arguments count as a margin of `-inf`.
pub(crate) fn link_margin<F>(cos: F) -> f64
where
    F: Fn(usize, usize, usize) -> f64,
{
    let mut margin = f64::INFINITY;
    let mut take = |x: f64| {
        let m = if x.is_finite() {
            1.0 - x.abs()
        } else {
            f64::NEG_INFINITY
        };
        margin = margin.min(m);
    };
    for a in 0..4 {
        let [b, c, d] = others(a);
        let (x, y, z) = (cos(a, b, c), cos(a, b, d), cos(a, c, d));
        take(x);
        take(y);
        take(z);
        if x.abs() < 1.0 && y.abs() < 1.0 && z.abs() < 1.0 {
            for cz in dihedral_cosines(x, y, z) {
                take(cz);
            }
        }
    }
    margin
}

pub(crate) fn others(a: usize) -> [usize; 3] {
    match a {
        0 => [1, 2, 3],
        1 => [0, 2, 3],
        2 => [0, 1, 3],
        _ => [0, 1, 2],
    }
}
