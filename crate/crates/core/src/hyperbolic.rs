//! Hyperbolic conformal tetrahedra.
//!
//! Edge `{a, b}` has hyperbolic length `r_a + r_b`. Face angles come from the
//! hyperbolic law of cosines; vertex links are spherical triangles, so the
//! dihedral and solid angles use the same link formulas as the Euclidean
//! kernel. Realizability is decided operationally: every face-angle and
//! dihedral arccos argument must lie strictly inside `(−1, 1)`.
//!
//! No volume is computed here.

use nalgebra::Matrix4;

use crate::euclid::{SolidAngles, TetRadii};
use crate::spherical;
use crate::{Degeneracy, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HypAdmissibility {
    pub admissible: bool,
    /// Smallest distance of any arccos argument from ±1.
    pub margin: f64,
}

/// Cosine of the face angle at `a` in face `{a, b, c}`:
/// `(cosh l_ab cosh l_ac − cosh l_bc) / (sinh l_ab sinh l_ac)`.
///
/// The numerator is evaluated as `2s_ab + 2s_ac − 2s_bc + 4 s_ab s_ac` with
/// `s = sinh²(l/2)`, which avoids cancellation for short edges.
pub fn face_angle_cos(rad: &TetRadii, a: usize, b: usize, c: usize) -> f64 {
    let (lab, lac, lbc) = (rad[a] + rad[b], rad[a] + rad[c], rad[b] + rad[c]);
    let half_sq = |l: f64| {
        let s = (0.5 * l).sinh();
        s * s
    };
    let (sab, sac, sbc) = (half_sq(lab), half_sq(lac), half_sq(lbc));
    let num = 2.0 * (sab + sac - sbc) + 4.0 * sab * sac;
    num / (lab.sinh() * lac.sinh())
}

pub fn hyp_admissible(rad: &TetRadii) -> HypAdmissibility {
    let margin = spherical::link_margin(|a, b, c| face_angle_cos(rad, a, b, c));
    HypAdmissibility {
        admissible: margin > 0.0,
        margin,
    }
}

pub fn hyp_solid_angles(rad: &TetRadii) -> Result<SolidAngles> {
    let check = hyp_admissible(rad);
    if !check.admissible {
        return Err(Error::DegenerateTet(Degeneracy::local(check.margin)));
    }
    spherical::solid_angles_from(|a, b, c| face_angle_cos(rad, a, b, c)).map(SolidAngles)
}

/// `−∂α/∂r` for one hyperbolic tet, differentiated exactly through the law
/// of cosines and the link formulas, then symmetrized.
pub fn hyp_angle_jacobian(rad: &TetRadii) -> Result<Matrix4<f64>> {
    let check = hyp_admissible(rad);
    if !check.admissible {
        return Err(Error::DegenerateTet(Degeneracy::local(check.margin)));
    }
    let r: [Dual; 4] = std::array::from_fn(|i| Dual::var(rad[i], i));
    let cos = |a: usize, b: usize, c: usize| {
        let (lab, lac, lbc) = (r[a] + r[b], r[a] + r[c], r[b] + r[c]);
        let half_sq = |l: Dual| {
            let s = (l * 0.5).sinh();
            s * s
        };
        let (sab, sac, sbc) = (half_sq(lab), half_sq(lac), half_sq(lbc));
        let num = (sab + sac - sbc) * 2.0 + sab * sac * 4.0;
        num / (lab.sinh() * lac.sinh())
    };
    let mut jac = Matrix4::zeros();
    for a in 0..4 {
        let [b, c, d] = spherical::others(a);
        let (x, y, z) = (cos(a, b, c), cos(a, b, d), cos(a, c, d));
        let (sx, sy, sz) = (
            (-(x * x) + 1.0).sqrt(),
            (-(y * y) + 1.0).sqrt(),
            (-(z * z) + 1.0).sqrt(),
        );
        for cz in [
            (z - x * y) / (sx * sy),
            (y - x * z) / (sx * sz),
            (x - y * z) / (sy * sz),
        ] {
            let theta = cz.acos();
            for j in 0..4 {
                jac[(a, j)] -= theta.d[j];
            }
        }
    }
    Ok((jac + jac.transpose()) * 0.5)
}

/// Forward-mode value with its gradient in the four radii.
#[derive(Debug, Clone, Copy)]
struct Dual {
    v: f64,
    d: [f64; 4],
}

impl Dual {
    fn var(v: f64, i: usize) -> Self {
        let mut d = [0.0; 4];
        d[i] = 1.0;
        Dual { v, d }
    }

    fn chain(self, v: f64, dv: f64) -> Self {
        Dual {
            v,
            d: self.d.map(|x| x * dv),
        }
    }

    fn sinh(self) -> Self {
        self.chain(self.v.sinh(), self.v.cosh())
    }

    fn sqrt(self) -> Self {
        let s = self.v.sqrt();
        self.chain(s, 0.5 / s)
    }

    fn acos(self) -> Self {
        self.chain(self.v.acos(), -1.0 / (1.0 - self.v * self.v).sqrt())
    }
}

impl std::ops::Add for Dual {
    type Output = Dual;
    fn add(self, o: Dual) -> Dual {
        Dual {
            v: self.v + o.v,
            d: std::array::from_fn(|i| self.d[i] + o.d[i]),
        }
    }
}

impl std::ops::Add<f64> for Dual {
    type Output = Dual;
    fn add(self, o: f64) -> Dual {
        Dual {
            v: self.v + o,
            ..self
        }
    }
}

impl std::ops::Sub for Dual {
    type Output = Dual;
    fn sub(self, o: Dual) -> Dual {
        self + (-o)
    }
}

impl std::ops::Neg for Dual {
    type Output = Dual;
    fn neg(self) -> Dual {
        Dual {
            v: -self.v,
            d: self.d.map(|x| -x),
        }
    }
}

#[allow(clippy::suspicious_arithmetic_impl)]
impl std::ops::Mul for Dual {
    type Output = Dual;
    fn mul(self, o: Dual) -> Dual {
        Dual {
            v: self.v * o.v,
            d: std::array::from_fn(|i| self.d[i] * o.v + self.v * o.d[i]),
        }
    }
}

impl std::ops::Mul<f64> for Dual {
    type Output = Dual;
    fn mul(self, o: f64) -> Dual {
        Dual {
            v: self.v * o,
            d: self.d.map(|x| x * o),
        }
    }
}

impl std::ops::Div for Dual {
    type Output = Dual;
    fn div(self, o: Dual) -> Dual {
        let inv = 1.0 / o.v;
        Dual {
            v: self.v * inv,
            d: std::array::from_fn(|i| (self.d[i] - self.v * inv * o.d[i]) * inv),
        }
    }
}
