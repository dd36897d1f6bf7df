// Classical RK4 with step doubling. The error estimate is the difference
// between one full step and two half steps; the two-half-step result is the
// one kept.

use crate::{Degeneracy, Error, Result};

use super::fields::{Eval, VectorField};

/// Largest accepted error estimate relative to the step displacement.
const STABILITY_RATIO: f64 = 1e-3;

/// Bound on `h·ρ`; RK4's stability interval on the negative axis ends near
/// 2.785.
const STIFFNESS_LIMIT: f64 = 2.5;

pub(crate) enum Attempt {
    Accepted {
        x: Vec<f64>,
        eval: Eval,
        factor: f64,
    },
    Rejected {
        factor: f64,
    },
    /// Some stage left the admissible region.
    Inadmissible(Option<Degeneracy>),
}

fn axpy(x: &[f64], a: f64, v: &[f64]) -> Vec<f64> {
    x.iter().zip(v).map(|(x, v)| x + a * v).collect()
}

/// One RK4 step given the slope `k1` at `x`.
pub(crate) fn rk4(field: &VectorField, x: &[f64], k1: &[f64], h: f64) -> Result<Vec<f64>> {
    let k2 = field.eval(&axpy(x, 0.5 * h, k1))?.v;
    let k3 = field.eval(&axpy(x, 0.5 * h, &k2))?.v;
    let k4 = field.eval(&axpy(x, h, &k3))?.v;
    Ok((0..x.len())
        .map(|i| x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect())
}

fn degeneracy(e: Error) -> Option<Degeneracy> {
    match e {
        Error::DegenerateTet(d) | Error::InadmissibleInitialMetric(d) => Some(d),
        _ => None,
    }
}

/// Tries a step of size `h`.
pub(crate) fn attempt(field: &VectorField, x: &[f64], cur: &Eval, h: f64, rel_tol: f64) -> Attempt {
    let run = || -> Result<(Vec<f64>, Vec<f64>, Eval)> {
        let full = rk4(field, x, &cur.v, h)?;
        let mid = rk4(field, x, &cur.v, 0.5 * h)?;
        let mid_slope = field.eval(&mid)?.v;
        let two = rk4(field, &mid, &mid_slope, 0.5 * h)?;
        let eval = field.eval(&two)?;
        Ok((full, two, eval))
    };
    let (full, two, eval) = match run() {
        Ok(v) => v,
        Err(e) => return Attempt::Inadmissible(degeneracy(e)),
    };
    // Componentwise mixed scale: the u chart sits near 0 for unit radii,
    // while radii of very different sizes each need relative control.
    let floor = if field.kind().in_u_chart() { 1.0 } else { 0.0 };
    let err = full
        .iter()
        .zip(&two)
        .zip(x)
        .fold(0.0f64, |acc, ((a, b), x)| {
            acc.max((a - b).abs() / 15.0 / (rel_tol * x.abs().max(floor)))
        });
    // Near a fixed point the absolute scale stops binding and the step would
    // drift to the edge of RK4's stability region; the error must also stay
    // small next to the step's own displacement.
    let displacement = two
        .iter()
        .zip(x)
        .fold(0.0f64, |acc, (a, b)| acc.max((a - b).abs()));
    let raw = full
        .iter()
        .zip(&two)
        .fold(0.0f64, |acc, (a, b)| acc.max((a - b).abs()))
        / 15.0;
    let err = if displacement > 0.0 {
        err.max(raw / (STABILITY_RATIO * displacement))
    } else {
        err
    };
    // Step doubling can be fooled when a stiff mode sits outside the
    // stability region and both estimates happen to agree. The slope change
    // across the step gives a lower bound on the local spectral radius.
    let dv = eval
        .v
        .iter()
        .zip(&cur.v)
        .fold(0.0f64, |acc, (a, b)| acc.max((a - b).abs()));
    let rho_h = if displacement > 0.0 {
        h.abs() * dv / displacement
    } else {
        0.0
    };
    let mut factor = if err == 0.0 {
        5.0
    } else {
        (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
    };
    if rho_h > 0.0 {
        factor = factor.min(0.9 * STIFFNESS_LIMIT / rho_h).max(0.1);
    }
    if err <= 1.0 && rho_h <= STIFFNESS_LIMIT {
        Attempt::Accepted {
            x: two,
            eval,
            factor,
        }
    } else {
        Attempt::Rejected { factor }
    }
}
