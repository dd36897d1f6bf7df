//! Abstract tetrahedral complexes.
//!
//! A [`Triangulation`] is a list of tetrahedra over `0..N`. Edges and faces
//! are derived, deduplicated and stored as sorted index tuples in
//! lexicographic order, so operator assembly is deterministic. Orientation is
//! not tracked.
//!
//! The manifold check in [`Triangulation::validate`] is limited to "every
//! face lies in exactly two tets" plus connectivity of the 1-skeleton; link
//! conditions are not verified.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// On-disk form: `{"vertices": N, "tets": [[a, b, c, d], ...]}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TriangulationDoc {
    pub vertices: usize,
    pub tets: Vec<[usize; 4]>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Triangulation {
    vertex_count: usize,
    tets: Vec<[usize; 4]>,
    edges: Vec<[usize; 2]>,
    faces: Vec<[usize; 3]>,
    edge_index: BTreeMap<[usize; 2], usize>,
    vertex_tets: Vec<Vec<usize>>,
    edge_tets: Vec<Vec<usize>>,
    face_tets: Vec<Vec<usize>>,
}

/// Local edge order inside a tet: `ab, ac, ad, bc, bd, cd`.
pub const TET_EDGES: [[usize; 2]; 6] = [[0, 1], [0, 2], [0, 3], [1, 2], [1, 3], [2, 3]];

impl Triangulation {
    /// Builds the complex and its incidence maps.
    ///
    /// Each tet is stored with its vertices sorted ascending; tets keep their
    /// input order.
    pub fn new(vertex_count: usize, tets: Vec<[usize; 4]>) -> Result<Self> {
        if vertex_count == 0 {
            return Err(Error::Malformed(
                "a triangulation needs at least one vertex".into(),
            ));
        }
        let mut canonical = Vec::with_capacity(tets.len());
        for (ti, tet) in tets.iter().enumerate() {
            let mut sorted = *tet;
            sorted.sort_unstable();
            for &v in &sorted {
                if v >= vertex_count {
                    return Err(Error::VertexOutOfRange {
                        tet: ti,
                        index: v,
                        vertex_count,
                    });
                }
            }
            if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
                return Err(Error::DuplicateVertex {
                    tet: ti,
                    vertex: w[0],
                });
            }
            canonical.push(sorted);
        }

        let mut edge_map: BTreeMap<[usize; 2], Vec<usize>> = BTreeMap::new();
        let mut face_map: BTreeMap<[usize; 3], Vec<usize>> = BTreeMap::new();
        let mut vertex_tets = vec![Vec::new(); vertex_count];
        for (ti, t) in canonical.iter().enumerate() {
            for &v in t {
                vertex_tets[v].push(ti);
            }
            for [a, b] in TET_EDGES {
                edge_map.entry([t[a], t[b]]).or_default().push(ti);
            }
            for skip in 0..4 {
                let mut f = [0; 3];
                let mut k = 0;
                for (i, &v) in t.iter().enumerate() {
                    if i != skip {
                        f[k] = v;
                        k += 1;
                    }
                }
                face_map.entry(f).or_default().push(ti);
            }
        }

        let edges: Vec<[usize; 2]> = edge_map.keys().copied().collect();
        let edge_tets: Vec<Vec<usize>> = edge_map.into_values().collect();
        let edge_index = edges.iter().enumerate().map(|(i, e)| (*e, i)).collect();
        let faces: Vec<[usize; 3]> = face_map.keys().copied().collect();
        let face_tets: Vec<Vec<usize>> = face_map.into_values().collect();

        Ok(Triangulation {
            vertex_count,
            tets: canonical,
            edges,
            faces,
            edge_index,
            vertex_tets,
            edge_tets,
            face_tets,
        })
    }

    pub fn from_doc(doc: TriangulationDoc) -> Result<Self> {
        Self::new(doc.vertices, doc.tets)
    }

    pub fn to_doc(&self) -> TriangulationDoc {
        TriangulationDoc {
            vertices: self.vertex_count,
            tets: self.tets.clone(),
        }
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn tets(&self) -> &[[usize; 4]] {
        &self.tets
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    /// Tets containing vertex `v`, in tet order.
    pub fn vertex_tets(&self, v: usize) -> &[usize] {
        &self.vertex_tets[v]
    }

    /// Tets containing edge number `e`.
    pub fn edge_tets(&self, e: usize) -> &[usize] {
        &self.edge_tets[e]
    }

    pub fn face_tets(&self, f: usize) -> &[usize] {
        &self.face_tets[f]
    }

    /// Index of the edge `{a, b}` in [`Triangulation::edges`], in either order.
    pub fn edge_index(&self, a: usize, b: usize) -> Option<usize> {
        let key = if a < b { [a, b] } else { [b, a] };
        self.edge_index.get(&key).copied()
    }

    /// Vertices joined to `v` by an edge, ascending.
    pub fn neighbors(&self, v: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .edges
            .iter()
            .filter_map(|&[a, b]| {
                if a == v {
                    Some(b)
                } else if b == v {
                    Some(a)
                } else {
                    None
                }
            })
            .collect();
        out.sort_unstable();
        out
    }

    /// Connected components of the 1-skeleton, each sorted, ordered by
    /// smallest vertex.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let mut parent: Vec<usize> = (0..self.vertex_count).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for &[a, b] in &self.edges {
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            if ra != rb {
                parent[ra.max(rb)] = ra.min(rb);
            }
        }
        let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for v in 0..self.vertex_count {
            let root = find(&mut parent, v);
            groups.entry(root).or_default().push(v);
        }
        groups.into_values().collect()
    }

    pub fn validate(&self) -> ValidationReport {
        let mut violations = Vec::new();
        for (f, tets) in self.faces.iter().zip(&self.face_tets) {
            if tets.len() != 2 {
                violations.push(Violation::FaceMultiplicity {
                    face: *f,
                    count: tets.len(),
                });
            }
        }
        let mut seen: BTreeMap<[usize; 4], usize> = BTreeMap::new();
        for (ti, t) in self.tets.iter().enumerate() {
            if let Some(&first) = seen.get(t) {
                violations.push(Violation::DuplicateTet { first, second: ti });
            } else {
                seen.insert(*t, ti);
            }
        }
        let components = self.components();
        if components.len() > 1 {
            violations.push(Violation::Disconnected { components });
        }
        ValidationReport {
            vertices: self.vertex_count,
            edges: self.edges.len(),
            faces: self.faces.len(),
            tets: self.tets.len(),
            violations,
        }
    }
}

/// Parses the JSON triangulation document.
pub fn parse_triangulation(text: &str) -> Result<Triangulation> {
    let doc: TriangulationDoc =
        serde_json::from_str(text).map_err(|e| Error::Malformed(e.to_string()))?;
    Triangulation::from_doc(doc)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    /// A face lying in a number of tets other than two.
    FaceMultiplicity { face: [usize; 3], count: usize },
    /// Two tets on the same vertex set.
    DuplicateTet { first: usize, second: usize },
    /// The 1-skeleton splits into several components.
    Disconnected { components: Vec<Vec<usize>> },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::FaceMultiplicity { face, count } => write!(
                f,
                "face {{{}, {}, {}}} lies in {count} tet(s), expected 2",
                face[0], face[1], face[2]
            ),
            Violation::DuplicateTet { first, second } => {
                write!(f, "tets {first} and {second} share the same vertex set")
            }
            Violation::Disconnected { components } => {
                write!(f, "1-skeleton has {} components", components.len())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationReport {
    pub vertices: usize,
    pub edges: usize,
    pub faces: usize,
    pub tets: usize,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn counts(&self) -> (usize, usize, usize, usize) {
        (self.vertices, self.edges, self.faces, self.tets)
    }
}

/// Closed triangulated 3-spheres used as fixtures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Builtin {
    /// Boundary of the 4-simplex: all five 4-subsets of `{0..4}`.
    Pentachoron,
    /// Boundary of the 4-dimensional cross-polytope. Vertex `2i` is `+e_{i+1}`,
    /// vertex `2i + 1` is `-e_{i+1}`; tets pick one sign per axis.
    Cross16,
}

impl Builtin {
    pub fn build(self) -> Triangulation {
        let tets = match self {
            Builtin::Pentachoron => (0..5)
                .map(|skip| {
                    let mut t = [0; 4];
                    for (slot, v) in (0..5).filter(|&v| v != skip).enumerate() {
                        t[slot] = v;
                    }
                    t
                })
                .collect(),
            Builtin::Cross16 => (0..16usize)
                .map(|signs| std::array::from_fn(|axis| 2 * axis + ((signs >> axis) & 1)))
                .collect(),
        };
        let n = match self {
            Builtin::Pentachoron => 5,
            Builtin::Cross16 => 8,
        };
        Triangulation::new(n, tets).expect("builtin complexes are well formed")
    }

    pub fn name(self) -> &'static str {
        match self {
            Builtin::Pentachoron => "pentachoron",
            Builtin::Cross16 => "cross16",
        }
    }
}

impl FromStr for Builtin {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pentachoron" => Ok(Builtin::Pentachoron),
            "cross16" => Ok(Builtin::Cross16),
            other => Err(Error::UnknownBuiltin(other.to_string())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn binomial(n: usize, k: usize) -> usize {
        (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
    }

    #[test]
    fn pentachoron_counts_match_subsets_of_a_five_set() {
        let t = Builtin::Pentachoron.build();
        let report = t.validate();
        assert!(report.is_clean(), "{:?}", report.violations);
        assert_eq!(
            report.counts(),
            (5, binomial(5, 2), binomial(5, 3), binomial(5, 4))
        );
        for v in 0..5 {
            assert_eq!(t.vertex_tets(v).len(), 4);
        }
    }

    #[test]
    fn cross16_counts_and_incidence() {
        let t = Builtin::Cross16.build();
        let report = t.validate();
        assert!(report.is_clean(), "{:?}", report.violations);
        assert_eq!(report.counts(), (8, 24, 32, 16));
        for v in 0..8 {
            assert_eq!(t.vertex_tets(v).len(), 8);
        }
        for axis in 0..4 {
            assert_eq!(t.edge_index(2 * axis, 2 * axis + 1), None);
        }
        assert!(t.edge_index(0, 2).is_some());
    }

    #[test]
    fn builtin_edges_lie_in_at_least_three_tets() {
        for b in [Builtin::Pentachoron, Builtin::Cross16] {
            let t = b.build();
            for e in 0..t.edges().len() {
                assert!(t.edge_tets(e).len() >= 3);
            }
            for f in 0..t.faces().len() {
                assert_eq!(t.face_tets(f).len(), 2);
            }
        }
    }

    #[test]
    fn edge_incidence_agrees_with_scanning_tets() {
        let t = Builtin::Cross16.build();
        for (e, &[a, b]) in t.edges().iter().enumerate() {
            let scanned: Vec<usize> = t
                .tets()
                .iter()
                .enumerate()
                .filter(|(_, tet)| tet.contains(&a) && tet.contains(&b))
                .map(|(i, _)| i)
                .collect();
            assert_eq!(t.edge_tets(e), scanned.as_slice());
        }
    }

    #[test]
    fn edges_and_faces_are_sorted_and_unique() {
        let t = Builtin::Cross16.build();
        assert!(t.edges().windows(2).all(|w| w[0] < w[1]));
        assert!(t.faces().windows(2).all(|w| w[0] < w[1]));
        assert!(t.edges().iter().all(|e| e[0] < e[1]));
    }

    #[test]
    fn single_tet_has_four_open_faces() {
        let t = parse_triangulation(r#"{"vertices": 4, "tets": [[0, 1, 2, 3]]}"#).unwrap();
        let report = t.validate();
        let open = report
            .violations
            .iter()
            .filter(|v| matches!(v, Violation::FaceMultiplicity { count: 1, .. }))
            .count();
        assert_eq!(open, 4);
        assert_eq!(report.violations.len(), 4);
    }

    #[test]
    fn duplicate_vertex_is_rejected() {
        let err = parse_triangulation(r#"{"vertices": 3, "tets": [[0, 1, 2, 2]]}"#).unwrap_err();
        assert!(matches!(err, Error::DuplicateVertex { tet: 0, vertex: 2 }));
    }

    #[test]
    fn out_of_range_and_malformed_inputs() {
        let err = parse_triangulation(r#"{"vertices": 4, "tets": [[0, 1, 2, 4]]}"#).unwrap_err();
        assert!(matches!(err, Error::VertexOutOfRange { index: 4, .. }));
        assert!(matches!(
            parse_triangulation(r#"{"vertices": 4}"#),
            Err(Error::Malformed(_))
        ));
        assert!(matches!(
            parse_triangulation(r#"{"vertices": 4, "tets": [[0, 1, 2]]}"#),
            Err(Error::Malformed(_))
        ));
    }

    #[test]
    fn disconnected_union_is_reported() {
        let mut tets = Builtin::Pentachoron.build().tets().to_vec();
        tets.extend(
            Builtin::Pentachoron
                .build()
                .tets()
                .iter()
                .map(|t| t.map(|v| v + 5)),
        );
        let t = Triangulation::new(10, tets).unwrap();
        let report = t.validate();
        assert_eq!(report.violations.len(), 1);
        assert!(matches!(
            &report.violations[0],
            Violation::Disconnected { components } if components.len() == 2
        ));
    }

    #[test]
    fn unknown_builtin_name() {
        assert!(matches!(
            "torus".parse::<Builtin>(),
            Err(Error::UnknownBuiltin(_))
        ));
        assert_eq!("cross16".parse::<Builtin>().unwrap(), Builtin::Cross16);
    }
}
