//! Geometry of a single Euclidean conformal tetrahedron.
//!
//! Radii `r_a` sit on the four vertices and edge `{a, b}` has length
//! `r_a + r_b`. Such a tetrahedron exists iff
//!
//! ```text
//! Q = (Σ 1/r)² − 2 Σ 1/r² > 0
//! ```
//!
//! and then it carries a unique sphere tangent to all six edges, touching
//! edge `{a, b}` at distance `r_a` from `a`. [`dual_cell`] builds that sphere
//! and the dual areas that give the off-diagonal derivatives of the solid
//! angles:
//!
//! ```text
//! r_a r_b ∂α_a/∂r_b = 2 A_ab / l_ab
//! ```
//!
//! with `A_ab` the signed area of the quadrilateral spanned by the sphere
//! center, the two face incenters and the tangency point on the edge.

use std::ops::Index;

use nalgebra::{Matrix4, Matrix5, OMatrix, OVector, Vector3, U3, U6};

use crate::complex::TET_EDGES;
use crate::spherical::{self, others};
use crate::{Degeneracy, Error, Result};

/// Below `DEGENERACY_RATIO · (Σ 1/r)²` a tetrahedron counts as degenerate.
pub const DEGENERACY_RATIO: f64 = 1e-12;

/// Radii on the four vertices of one tet, in the tet's canonical order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TetRadii(pub [f64; 4]);

impl TetRadii {
    pub fn new(r: [f64; 4]) -> Result<Self> {
        for (index, &value) in r.iter().enumerate() {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::NonPositiveRadius { index, value });
            }
        }
        Ok(TetRadii(r))
    }

    pub fn edge_lengths(&self) -> EdgeLengths {
        EdgeLengths(TET_EDGES.map(|[a, b]| self.0[a] + self.0[b]))
    }

    pub fn scaled(&self, c: f64) -> Self {
        TetRadii(self.0.map(|r| r * c))
    }

    /// `out[i] = self[perm[i]]`.
    pub fn permuted(&self, perm: [usize; 4]) -> Self {
        TetRadii(perm.map(|p| self.0[p]))
    }
}

impl Index<usize> for TetRadii {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Solid angles (steradians) at the four vertices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolidAngles(pub [f64; 4]);

impl Index<usize> for SolidAngles {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Six edge lengths in the order `ab, ac, ad, bc, bd, cd`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeLengths(pub [f64; 6]);

impl EdgeLengths {
    pub fn between(&self, a: usize, b: usize) -> f64 {
        let key = if a < b { [a, b] } else { [b, a] };
        let i = TET_EDGES
            .iter()
            .position(|e| *e == key)
            .expect("distinct local vertices");
        self.0[i]
    }
}

pub fn realizability(rad: &TetRadii) -> f64 {
    let inv: [f64; 4] = rad.0.map(|r| 1.0 / r);
    let s: f64 = inv.iter().sum();
    let sq: f64 = inv.iter().map(|x| x * x).sum();
    s * s - 2.0 * sq
}

/// `Q / (Σ 1/r)²`, which is invariant under `r → c·r`.
pub fn relative_realizability(rad: &TetRadii) -> f64 {
    let s: f64 = rad.0.iter().map(|r| 1.0 / r).sum();
    realizability(rad) / (s * s)
}

pub fn is_realizable(rad: &TetRadii) -> bool {
    relative_realizability(rad) > DEGENERACY_RATIO
}

fn require_realizable(rad: &TetRadii) -> Result<()> {
    let rel = relative_realizability(rad);
    if rel > DEGENERACY_RATIO {
        Ok(())
    } else {
        Err(Error::DegenerateTet(Degeneracy::local(rel)))
    }
}

/// Cosine of the face angle at `a` in face `{a, b, c}`.
///
/// With `l = r_a + r_b` the law of cosines collapses to
/// `1 − 2 r_b r_c / ((r_a + r_b)(r_a + r_c))`.
pub fn face_angle_cos(rad: &TetRadii, a: usize, b: usize, c: usize) -> f64 {
    let (ra, rb, rc) = (rad[a], rad[b], rad[c]);
    1.0 - 2.0 * rb * rc / ((ra + rb) * (ra + rc))
}

/// Solid angle at each vertex: sum of the three dihedral angles there minus π.
pub fn solid_angles(rad: &TetRadii) -> Result<SolidAngles> {
    require_realizable(rad)?;
    spherical::solid_angles_from(|a, b, c| face_angle_cos(rad, a, b, c)).map(SolidAngles)
}

/// Cayley–Menger determinant of the bordered squared-distance matrix;
/// equals `288 V²`.
pub fn cm_determinant(lengths: &EdgeLengths) -> f64 {
    let mut m = Matrix5::<f64>::zeros();
    for i in 1..5 {
        m[(0, i)] = 1.0;
        m[(i, 0)] = 1.0;
    }
    for (k, [a, b]) in TET_EDGES.iter().enumerate() {
        let d2 = lengths.0[k] * lengths.0[k];
        m[(a + 1, b + 1)] = d2;
        m[(b + 1, a + 1)] = d2;
    }
    m.determinant()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CmVolume {
    pub determinant: f64,
    /// `Some(V)` iff the determinant is positive.
    pub volume: Option<f64>,
}

pub fn cm_volume(lengths: &EdgeLengths) -> CmVolume {
    let determinant = cm_determinant(lengths);
    let volume = (determinant > 0.0).then(|| (determinant / 288.0).sqrt());
    CmVolume {
        determinant,
        volume,
    }
}

/// Places the tet with `a` at the origin, `b` on `+x`, `c` in the upper
/// half of the xy-plane and `d` above it (`z > 0`).
pub fn embed(lengths: &EdgeLengths) -> Result<[Vector3<f64>; 4]> {
    let det = cm_determinant(lengths);
    if !(det > 0.0) {
        return Err(Error::DegenerateTet(Degeneracy::local(det)));
    }
    let l = |a, b| lengths.between(a, b);
    let (ab, ac, ad) = (l(0, 1), l(0, 2), l(0, 3));
    let (bc, bd, cd) = (l(1, 2), l(1, 3), l(2, 3));

    let cx = (ab * ab + ac * ac - bc * bc) / (2.0 * ab);
    let cy2 = ac * ac - cx * cx;
    if !(cy2 > 0.0) {
        return Err(Error::DegenerateTet(Degeneracy::local(cy2)));
    }
    let cy = cy2.sqrt();
    let dx = (ab * ab + ad * ad - bd * bd) / (2.0 * ab);
    let dy = (ad * ad - cd * cd + cx * cx + cy * cy - 2.0 * dx * cx) / (2.0 * cy);
    let dz2 = ad * ad - dx * dx - dy * dy;
    if !(dz2 > 0.0) {
        return Err(Error::DegenerateTet(Degeneracy::local(dz2)));
    }
    Ok([
        Vector3::zeros(),
        Vector3::new(ab, 0.0, 0.0),
        Vector3::new(cx, cy, 0.0),
        Vector3::new(dx, dy, dz2.sqrt()),
    ])
}

/// The dual structure of a conformal tet in the [`embed`] frame.
///
/// Faces are indexed by the local vertex they omit; edges follow
/// [`TET_EDGES`].
#[derive(Debug, Clone, PartialEq)]
pub struct DualCell {
    pub vertices: [Vector3<f64>; 4],
    /// Center of the edge-tangent sphere.
    pub center: Vector3<f64>,
    pub tangent_radius: f64,
    /// Tangency point on each edge, at distance `r_a` from its first vertex.
    pub tangency: [Vector3<f64>; 6],
    pub incenters: [Vector3<f64>; 4],
    pub inradii: [f64; 4],
    /// Signed distance from the center to each face plane, positive toward
    /// the omitted vertex.
    pub face_heights: [f64; 4],
    /// Signed dual area of each edge.
    pub areas: [f64; 6],
    /// Least-squares residual of the six normality conditions.
    pub center_residual: f64,
}

impl DualCell {
    /// Distance from the center to the line through edge `e`.
    pub fn edge_line_distance(&self, e: usize) -> f64 {
        let [a, b] = TET_EDGES[e];
        let (p, q) = (self.vertices[a], self.vertices[b]);
        let dir = (q - p).normalize();
        let w = self.center - p;
        (w - dir * w.dot(&dir)).norm()
    }
}

/// Builds the edge-tangent sphere and the signed dual areas
/// `A_ab = ½(ρ₁h₁ + ρ₂h₂)` over the two faces containing `{a, b}`.
pub fn dual_cell(rad: &TetRadii) -> Result<DualCell> {
    require_realizable(rad)?;
    let lengths = rad.edge_lengths();
    let p = embed(&lengths)?;

    let mut tangency = [Vector3::zeros(); 6];
    let mut normals = OMatrix::<f64, U6, U3>::zeros();
    let mut rhs = OVector::<f64, U6>::zeros();
    for (e, &[a, b]) in TET_EDGES.iter().enumerate() {
        let dir = p[b] - p[a];
        let t = p[a] + dir * (rad[a] / lengths.0[e]);
        tangency[e] = t;
        normals.set_row(e, &dir.transpose());
        rhs[e] = dir.dot(&t);
    }
    let svd = normals.svd(true, true);
    let center: Vector3<f64> = svd
        .solve(&rhs, 1e-14)
        .map_err(|_| Error::DegenerateTet(Degeneracy::local(f64::NAN)))?;
    let l_max = lengths.0.iter().cloned().fold(0.0, f64::max);
    let center_residual = (0..6)
        .map(|e| {
            let dir = (p[TET_EDGES[e][1]] - p[TET_EDGES[e][0]]).normalize();
            (center - tangency[e]).dot(&dir).abs()
        })
        .fold(0.0, f64::max);
    if center_residual > 1e-9 * l_max {
        return Err(Error::DegenerateTet(Degeneracy::local(center_residual)));
    }
    let tangent_radius = (center - tangency[0]).norm();

    let mut incenters = [Vector3::zeros(); 4];
    let mut inradii = [0.0; 4];
    let mut face_heights = [0.0; 4];
    for omit in 0..4 {
        let [a, b, c] = others(omit);
        let (la, lb, lc) = (
            lengths.between(b, c),
            lengths.between(a, c),
            lengths.between(a, b),
        );
        incenters[omit] = (p[a] * la + p[b] * lb + p[c] * lc) / (la + lb + lc);
        inradii[omit] = (rad[a] * rad[b] * rad[c] / (rad[a] + rad[b] + rad[c])).sqrt();
        let mut n = (p[b] - p[a]).cross(&(p[c] - p[a])).normalize();
        if n.dot(&(p[omit] - p[a])) < 0.0 {
            n = -n;
        }
        face_heights[omit] = n.dot(&(center - p[a]));
    }

    let mut areas = [0.0; 6];
    for (e, &[a, b]) in TET_EDGES.iter().enumerate() {
        // The two faces through {a, b} omit the other two vertices.
        let (x, y) = other_pair(a, b);
        areas[e] = 0.5 * (inradii[x] * face_heights[x] + inradii[y] * face_heights[y]);
    }

    Ok(DualCell {
        vertices: p,
        center,
        tangent_radius,
        tangency,
        incenters,
        inradii,
        face_heights,
        areas,
        center_residual,
    })
}

fn other_pair(a: usize, b: usize) -> (usize, usize) {
    let mut rest = (0..4).filter(|&v| v != a && v != b);
    (rest.next().unwrap(), rest.next().unwrap())
}

/// `−∂α/∂r` for one tet, from the dual areas.
///
/// Off-diagonal entries are `−2 A_ab / (l_ab r_a r_b)`; the diagonal follows
/// from degree-zero homogeneity of the solid angles, so `Λ r = 0` holds by
/// construction and the matrix is exactly symmetric.
pub fn angle_jacobian(rad: &TetRadii) -> Result<Matrix4<f64>> {
    let cell = dual_cell(rad)?;
    Ok(angle_jacobian_from_areas(rad, &cell.areas))
}

pub(crate) fn angle_jacobian_from_areas(rad: &TetRadii, areas: &[f64; 6]) -> Matrix4<f64> {
    let mut m = Matrix4::zeros();
    for (e, &[a, b]) in TET_EDGES.iter().enumerate() {
        let l = rad[a] + rad[b];
        let off = -2.0 * areas[e] / (l * rad[a] * rad[b]);
        m[(a, b)] = off;
        m[(b, a)] = off;
    }
    for a in 0..4 {
        let s: f64 = (0..4).filter(|&b| b != a).map(|b| m[(a, b)] * rad[b]).sum();
        m[(a, a)] = -s / rad[a];
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fd;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    const REGULAR_ALPHA: f64 = 0.551_285_598_432_530_8;

    /// Solid angle of the cone spanned by three vectors (Van Oosterom–Strackee).
    fn cone_solid_angle(a: Vector3<f64>, b: Vector3<f64>, c: Vector3<f64>) -> f64 {
        let (la, lb, lc) = (a.norm(), b.norm(), c.norm());
        let num = a.dot(&b.cross(&c)).abs();
        let den = la * lb * lc + a.dot(&b) * lc + a.dot(&c) * lb + b.dot(&c) * la;
        2.0 * num.atan2(den)
    }

    fn oracle_angles(rad: &TetRadii) -> [f64; 4] {
        let p = embed(&rad.edge_lengths()).unwrap();
        std::array::from_fn(|a| {
            let [b, c, d] = others(a);
            cone_solid_angle(p[b] - p[a], p[c] - p[a], p[d] - p[a])
        })
    }

    fn sample_radii(seed: u64, count: usize) -> Vec<TetRadii> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::new();
        while out.len() < count {
            let r = TetRadii(std::array::from_fn(|_| rng.random_range(0.1..10.0)));
            if is_realizable(&r) && relative_realizability(&r) > 1e-3 {
                out.push(r);
            }
        }
        out
    }

    #[test]
    fn unit_radii_realizability() {
        assert_eq!(realizability(&TetRadii([1.0; 4])), 8.0);
    }

    #[test]
    fn small_radius_crosses_zero_at_the_quadratic_root() {
        // Q(1,1,1,t) · t² = 3t² + 6t − 1; bisect it independently.
        let poly = |t: f64| 3.0 * t * t + 6.0 * t - 1.0;
        let (mut lo, mut hi) = (1e-6, 1.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if poly(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let root = 0.5 * (lo + hi);
        assert_relative_eq!(root, 2.0 / 3f64.sqrt() - 1.0, epsilon = 1e-14);
        let q = |t| realizability(&TetRadii([1.0, 1.0, 1.0, t]));
        assert!(q(root * 0.99) < 0.0);
        assert!(q(root * 1.01) > 0.0);
        assert!(q(1e-3) < -1e5);
    }

    #[test]
    fn realizability_sign_matches_cayley_menger() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let mut disagreements = 0;
        for _ in 0..1000 {
            let r = TetRadii(std::array::from_fn(|_| rng.random_range(0.1..10.0)));
            let q = realizability(&r);
            let cm = cm_determinant(&r.edge_lengths());
            // Skip the thin shell where both are within round-off of zero.
            if relative_realizability(&r).abs() < 1e-9 {
                continue;
            }
            if (q > 0.0) != (cm > 0.0) {
                disagreements += 1;
            }
        }
        assert_eq!(disagreements, 0);
    }

    #[test]
    fn regular_tet_solid_angle() {
        let a = solid_angles(&TetRadii([1.0; 4])).unwrap();
        let expected = 3.0 * (1.0f64 / 3.0).acos() - PI;
        for x in a.0 {
            assert_relative_eq!(x, expected, max_relative = 1e-14);
            assert_relative_eq!(x, REGULAR_ALPHA, max_relative = 1e-12);
        }
        for x in oracle_angles(&TetRadii([1.0; 4])) {
            assert_relative_eq!(x, expected, max_relative = 1e-12);
        }
    }

    #[test]
    fn solid_angles_match_embedded_cone_oracle() {
        for r in sample_radii(3, 200) {
            let got = solid_angles(&r).unwrap();
            let want = oracle_angles(&r);
            for i in 0..4 {
                assert!(
                    (got[i] - want[i]).abs() <= 1e-10,
                    "{r:?}: {} vs {}",
                    got[i],
                    want[i]
                );
            }
        }
    }

    #[test]
    fn degenerate_tet_is_rejected() {
        let r = TetRadii([1.0, 1.0, 1.0, 0.1]);
        assert!(matches!(solid_angles(&r), Err(Error::DegenerateTet(_))));
        assert!(matches!(dual_cell(&r), Err(Error::DegenerateTet(_))));
    }

    #[test]
    fn regular_cm_volume() {
        let v = cm_volume(&EdgeLengths([2.0; 6]));
        assert_relative_eq!(
            v.volume.unwrap(),
            2.0 * 2f64.sqrt() / 3.0,
            max_relative = 1e-12
        );
    }

    #[test]
    fn flat_configuration_has_nonpositive_determinant() {
        // l_bc = l_ab + l_ac puts a, b, c on a line.
        let v = cm_volume(&EdgeLengths([1.0, 1.5, 1.2, 2.5, 1.3, 1.4]));
        assert!(v.determinant <= 1e-9);
    }

    #[test]
    fn regular_embedding_coordinates() {
        let p = embed(&EdgeLengths([2.0; 6])).unwrap();
        let s3 = 3f64.sqrt();
        let want = [
            Vector3::new(0.0, 0.0, 0.0),
            Vector3::new(2.0, 0.0, 0.0),
            Vector3::new(1.0, s3, 0.0),
            Vector3::new(1.0, 1.0 / s3, 2.0 * 2f64.sqrt() / s3),
        ];
        for (g, w) in p.iter().zip(&want) {
            assert!((g - w).norm() < 1e-14);
        }
    }

    #[test]
    fn embedding_reproduces_lengths_with_positive_height() {
        for r in sample_radii(5, 100) {
            let l = r.edge_lengths();
            let p = embed(&l).unwrap();
            assert!(p[3].z > 0.0 && p[2].y > 0.0);
            for (e, &[a, b]) in TET_EDGES.iter().enumerate() {
                assert_relative_eq!((p[a] - p[b]).norm(), l.0[e], max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn regular_dual_cell_is_centered() {
        let cell = dual_cell(&TetRadii([1.0; 4])).unwrap();
        let centroid = cell.vertices.iter().sum::<Vector3<f64>>() / 4.0;
        assert!((cell.center - centroid).norm() < 1e-13);
        let midpoint = (cell.vertices[0] + cell.vertices[1]) / 2.0;
        assert_relative_eq!(
            cell.tangent_radius,
            (centroid - midpoint).norm(),
            max_relative = 1e-12
        );
        assert_relative_eq!(cell.tangent_radius, 1.0 / 2f64.sqrt(), max_relative = 1e-12);
        for a in cell.areas {
            assert!(a > 0.0);
            assert_relative_eq!(a, cell.areas[0], max_relative = 1e-12);
        }
    }

    #[test]
    fn dual_cell_invariants() {
        for r in sample_radii(7, 100) {
            let cell = dual_cell(&r).unwrap();
            for e in 0..6 {
                assert_relative_eq!(
                    cell.edge_line_distance(e),
                    cell.tangent_radius,
                    max_relative = 1e-9
                );
            }
            // Incircle of face {a, b, c} touches {a, b} at distance r_a from a.
            for omit in 0..4 {
                let [a, b, _] = others(omit);
                let e = TET_EDGES.iter().position(|x| *x == [a, b]).unwrap();
                let foot = cell.tangency[e];
                assert_relative_eq!((foot - cell.vertices[a]).norm(), r[a], max_relative = 1e-12);
                assert_relative_eq!(
                    (foot - cell.incenters[omit]).norm(),
                    cell.inradii[omit],
                    max_relative = 1e-9
                );
            }
        }
    }

    #[test]
    fn dual_areas_match_finite_difference_derivatives() {
        for r in sample_radii(9, 60) {
            let cell = dual_cell(&r).unwrap();
            let jac = fd::central_jacobian(&r.0, fd::REL_STEP, |x| {
                solid_angles(&TetRadii([x[0], x[1], x[2], x[3]])).map(|a| a.0.to_vec())
            })
            .unwrap();
            for (e, &[a, b]) in TET_EDGES.iter().enumerate() {
                let l = r[a] + r[b];
                let from_area = 2.0 * cell.areas[e] / (l * r[a] * r[b]);
                let scale = jac.abs().max();
                assert!(
                    (from_area - jac[(a, b)]).abs() <= 1e-6 * scale,
                    "{r:?} edge {e}: {from_area} vs {}",
                    jac[(a, b)]
                );
                assert!((jac[(b, a)] - jac[(a, b)]).abs() <= 1e-6 * scale);
            }
        }
    }

    #[test]
    fn solid_angles_are_scale_invariant() {
        for r in sample_radii(13, 50) {
            let a = solid_angles(&r).unwrap();
            for c in [0.5, 2.0, 10.0] {
                let b = solid_angles(&r.scaled(c)).unwrap();
                for i in 0..4 {
                    assert!((a[i] - b[i]).abs() <= 1e-12 * a[i].abs().max(1.0));
                }
            }
        }
    }

    #[test]
    fn euler_identity_on_finite_differences() {
        for r in sample_radii(17, 100) {
            let jac = fd::central_jacobian(&r.0, fd::REL_STEP, |x| {
                solid_angles(&TetRadii([x[0], x[1], x[2], x[3]])).map(|a| a.0.to_vec())
            })
            .unwrap();
            let mut scale: f64 = 0.0;
            for w in 0..4 {
                for v in 0..4 {
                    scale = scale.max((r[v] * jac[(w, v)]).abs());
                }
            }
            for w in 0..4 {
                let s: f64 = (0..4).map(|v| r[v] * jac[(w, v)]).sum();
                assert!(s.abs() <= 1e-7 * scale, "{s}");
            }
        }
    }

    #[test]
    fn tet_jacobian_is_psd_rank_three_with_radius_kernel() {
        for r in sample_radii(19, 50) {
            let m = angle_jacobian(&r).unwrap();
            let eig = m.symmetric_eigenvalues();
            let mut ev: Vec<f64> = eig.iter().copied().collect();
            ev.sort_by(f64::total_cmp);
            let scale = ev[3];
            assert!(ev[0].abs() <= 1e-10 * scale, "{ev:?}");
            assert!(ev[1] > 1e-8 * scale, "{ev:?}");
            let rv = nalgebra::Vector4::from(r.0);
            assert!((m * rv).norm() <= 1e-12 * scale * rv.norm());
        }
    }

    #[test]
    fn permuting_radii_permutes_angles_and_areas() {
        let r = TetRadii([0.9, 1.3, 1.1, 0.7]);
        let perm = [2, 0, 3, 1];
        let a = solid_angles(&r).unwrap();
        let b = solid_angles(&r.permuted(perm)).unwrap();
        for i in 0..4 {
            assert_relative_eq!(b[i], a[perm[i]], max_relative = 1e-13);
        }
        let ca = dual_cell(&r).unwrap();
        let cb = dual_cell(&r.permuted(perm)).unwrap();
        for (e, &[x, y]) in TET_EDGES.iter().enumerate() {
            let (px, py) = (perm[x], perm[y]);
            let orig = TET_EDGES
                .iter()
                .position(|q| *q == [px.min(py), px.max(py)])
                .unwrap();
            assert_relative_eq!(cb.areas[e], ca.areas[orig], max_relative = 1e-9);
        }
    }
}
