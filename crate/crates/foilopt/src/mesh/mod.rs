//! Unstructured 2D meshes: connectivity, geometric caches, validation.
//!
//! Conventions:
//! - element vertices are stored counter-clockwise;
//! - a face stores its vertex pair in the order traversed by its *left*
//!   element, so the left element's outward normal is `(v1 - v0).rot_cw()`;
//! - every boundary face belongs to exactly one named patch tagged `wall`
//!   or `farfield`;
//! - a mesh is immutable after construction; deformation produces a new
//!   mesh via [`Mesh::with_vertices`].

pub mod gen;
pub mod io;

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::geom::{polygon_centroid, signed_area, Vec2};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PatchTag {
    Wall,
    Farfield,
}

impl PatchTag {
    pub fn parse(s: &str) -> Result<PatchTag> {
        match s {
            "wall" => Ok(PatchTag::Wall),
            "farfield" => Ok(PatchTag::Farfield),
            other => Err(Error::MeshTopology(format!("unknown patch tag `{other}`"))),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PatchTag::Wall => "wall",
            PatchTag::Farfield => "farfield",
        }
    }
}

/// Triangle or quadrilateral, CCW vertex indices.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Element {
    Tri([usize; 3]),
    Quad([usize; 4]),
}

impl Element {
    pub fn vertices(&self) -> &[usize] {
        match self {
            Element::Tri(v) => v,
            Element::Quad(v) => v,
        }
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices().len()
    }
}

#[derive(Clone, Debug)]
pub struct Face {
    /// Vertex pair in the left element's traversal order.
    pub v0: usize,
    pub v1: usize,
    pub left: usize,
    pub right: Option<usize>,
    /// Index into `Mesh::patches` for boundary faces.
    pub patch: Option<usize>,
}

impl Face {
    pub fn is_boundary(&self) -> bool {
        self.right.is_none()
    }
}

#[derive(Clone, Debug)]
pub struct Patch {
    pub name: String,
    pub tag: PatchTag,
    pub faces: Vec<usize>,
    /// Vertex pairs exactly as given in the input; their orientation defines
    /// the loop order used by e.g. the airfoil area.
    pub pairs: Vec<(usize, usize)>,
}

/// Patch description used to build a mesh programmatically.
#[derive(Clone, Debug)]
pub struct PatchDef {
    pub name: String,
    pub tag: PatchTag,
    pub pairs: Vec<(usize, usize)>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VertexKind {
    Interior,
    Wall,
    Farfield,
}

#[derive(Clone, Debug)]
pub struct Mesh {
    pub vertices: Vec<Vec2>,
    pub elements: Vec<Element>,
    pub faces: Vec<Face>,
    pub patches: Vec<Patch>,
    /// Face indices per element, in CCW edge order.
    pub elem_faces: Vec<Vec<usize>>,
    pub vertex_kind: Vec<VertexKind>,
}

/// Geometry cache for one element.
#[derive(Clone, Debug)]
pub struct ElementGeometry {
    pub centroid: Vec2,
    pub area: f64,
    /// Characteristic length, sqrt(area).
    pub h: f64,
    /// Half-extents 0.5 (max - min) over the element's vertices.
    pub dx: f64,
    pub dy: f64,
    /// Unit outward normal and length per CCW edge.
    pub face_normals: Vec<(Vec2, f64)>,
}

impl Mesh {
    /// Derives face connectivity from element connectivity and attaches
    /// patches. Structural defects (bad indices, non-manifold edges,
    /// inconsistent orientation) are hard errors; geometric defects are
    /// left for [`Mesh::validate`] to report.
    pub fn build(
        vertices: Vec<Vec2>,
        elements: Vec<Element>,
        patch_defs: Vec<PatchDef>,
    ) -> Result<Mesh> {
        let nv = vertices.len();
        for (e, el) in elements.iter().enumerate() {
            let vs = el.vertices();
            for &v in vs {
                if v >= nv {
                    return Err(Error::MeshTopology(format!(
                        "element {e} references vertex {v} but mesh has {nv} vertices"
                    )));
                }
            }
            for i in 0..vs.len() {
                for j in i + 1..vs.len() {
                    if vs[i] == vs[j] {
                        return Err(Error::MeshTopology(format!(
                            "element {e} repeats vertex {}",
                            vs[i]
                        )));
                    }
                }
            }
        }

        // Edge key -> (face index). Faces are created in element traversal
        // order, which keeps construction deterministic.
        let mut edge_face: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        let mut faces: Vec<Face> = Vec::new();
        let mut elem_faces: Vec<Vec<usize>> = vec![Vec::new(); elements.len()];

        for (e, el) in elements.iter().enumerate() {
            let vs = el.vertices();
            let n = vs.len();
            for i in 0..n {
                let a = vs[i];
                let b = vs[(i + 1) % n];
                let key = (a.min(b), a.max(b));
                match edge_face.get(&key) {
                    None => {
                        let f = faces.len();
                        faces.push(Face {
                            v0: a,
                            v1: b,
                            left: e,
                            right: None,
                            patch: None,
                        });
                        edge_face.insert(key, f);
                        elem_faces[e].push(f);
                    }
                    Some(&f) => {
                        let face = &mut faces[f];
                        if face.right.is_some() {
                            return Err(Error::MeshTopology(format!(
                                "edge ({}, {}) is shared by more than two elements",
                                key.0, key.1
                            )));
                        }
                        // CCW neighbours traverse a shared edge in opposite
                        // directions.
                        if (face.v0, face.v1) != (b, a) {
                            return Err(Error::MeshTopology(format!(
                                "elements {} and {} traverse edge ({}, {}) in the same \
                                 direction (inconsistent orientation)",
                                face.left, e, key.0, key.1
                            )));
                        }
                        face.right = Some(e);
                        elem_faces[e].push(f);
                    }
                }
            }
        }

        // Attach patches.
        let mut patches: Vec<Patch> = patch_defs
            .iter()
            .map(|d| Patch {
                name: d.name.clone(),
                tag: d.tag,
                faces: Vec::new(),
                pairs: d.pairs.clone(),
            })
            .collect();
        for (p, def) in patch_defs.iter().enumerate() {
            for &(i, j) in &def.pairs {
                let key = (i.min(j), i.max(j));
                let f = *edge_face.get(&key).ok_or_else(|| {
                    Error::MeshTopology(format!(
                        "patch `{}` references edge ({i}, {j}) which is not a mesh edge",
                        def.name
                    ))
                })?;
                let face = &mut faces[f];
                if face.right.is_some() {
                    return Err(Error::MeshTopology(format!(
                        "patch `{}` references interior edge ({i}, {j})",
                        def.name
                    )));
                }
                if face.patch.is_some() {
                    return Err(Error::MeshTopology(format!(
                        "edge ({i}, {j}) appears in more than one patch"
                    )));
                }
                face.patch = Some(p);
                patches[p].faces.push(f);
            }
        }

        let mut vertex_kind = vec![VertexKind::Interior; nv];
        for face in &faces {
            if let Some(p) = face.patch {
                let kind = match patches[p].tag {
                    PatchTag::Wall => VertexKind::Wall,
                    PatchTag::Farfield => VertexKind::Farfield,
                };
                for v in [face.v0, face.v1] {
                    // Wall wins if a vertex sits on both patch kinds.
                    if vertex_kind[v] != VertexKind::Wall {
                        vertex_kind[v] = kind;
                    }
                }
            }
        }

        Ok(Mesh {
            vertices,
            elements,
            faces,
            patches,
            elem_faces,
            vertex_kind,
        })
    }

    /// Same topology, new vertex coordinates.
    pub fn with_vertices(&self, vertices: Vec<Vec2>) -> Mesh {
        assert_eq!(vertices.len(), self.vertices.len());
        Mesh {
            vertices,
            ..self.clone()
        }
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn element_points(&self, e: usize) -> Vec<Vec2> {
        self.elements[e]
            .vertices()
            .iter()
            .map(|&v| self.vertices[v])
            .collect()
    }

    pub fn element_geometry(&self, e: usize) -> Result<ElementGeometry> {
        let pts = self.element_points(e);
        let area = signed_area(&pts);
        if area <= 0.0 {
            return Err(Error::DegenerateElement { elem: e, area });
        }
        let centroid = polygon_centroid(&pts);
        let (mut xmin, mut xmax) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut ymin, mut ymax) = (f64::INFINITY, f64::NEG_INFINITY);
        for p in &pts {
            xmin = xmin.min(p.x);
            xmax = xmax.max(p.x);
            ymin = ymin.min(p.y);
            ymax = ymax.max(p.y);
        }
        let n = pts.len();
        let face_normals = (0..n)
            .map(|i| {
                let t = pts[(i + 1) % n] - pts[i];
                let len = t.norm();
                (t.rot_cw() * (1.0 / len), len)
            })
            .collect();
        Ok(ElementGeometry {
            centroid,
            area,
            h: area.sqrt(),
            dx: 0.5 * (xmax - xmin),
            dy: 0.5 * (ymax - ymin),
            face_normals,
        })
    }

    /// Outward unit normal and length of a face, as seen from its left element.
    pub fn face_normal(&self, f: usize) -> (Vec2, f64) {
        let face = &self.faces[f];
        let t = self.vertices[face.v1] - self.vertices[face.v0];
        let len = t.norm();
        (t.rot_cw() * (1.0 / len), len)
    }

    pub fn face_midpoint(&self, f: usize) -> Vec2 {
        let face = &self.faces[f];
        (self.vertices[face.v0] + self.vertices[face.v1]) * 0.5
    }

    /// Face-neighbour element indices (deterministic order).
    pub fn neighbors(&self, e: usize) -> Vec<usize> {
        let mut out = Vec::new();
        for &f in &self.elem_faces[e] {
            let face = &self.faces[f];
            if face.left == e {
                if let Some(r) = face.right {
                    out.push(r);
                }
            } else {
                out.push(face.left);
            }
        }
        out
    }

    pub fn wall_vertices(&self) -> Vec<usize> {
        let mut out: Vec<usize> = (0..self.n_vertices())
            .filter(|&v| self.vertex_kind[v] == VertexKind::Wall)
            .collect();
        out.sort_unstable();
        out
    }

    pub fn boundary_vertices(&self) -> Vec<usize> {
        let mut out: Vec<usize> = (0..self.n_vertices())
            .filter(|&v| self.vertex_kind[v] != VertexKind::Interior)
            .collect();
        out.sort_unstable();
        out
    }

    pub fn wall_faces(&self) -> Vec<usize> {
        let mut out = Vec::new();
        for patch in &self.patches {
            if patch.tag == PatchTag::Wall {
                out.extend_from_slice(&patch.faces);
            }
        }
        out.sort_unstable();
        out
    }

    /// Chains the wall patches' vertex pairs into closed loops, following
    /// the pair orientation given in the input. Errors if any loop is open
    /// or branched.
    pub fn wall_loops(&self) -> Result<Vec<Vec<usize>>> {
        let mut pairs: Vec<(usize, usize)> = Vec::new();
        for patch in &self.patches {
            if patch.tag == PatchTag::Wall {
                pairs.extend_from_slice(&patch.pairs);
            }
        }
        if pairs.is_empty() {
            return Ok(Vec::new());
        }
        let mut next: BTreeMap<usize, usize> = BTreeMap::new();
        for &(i, j) in &pairs {
            if next.insert(i, j).is_some() {
                return Err(Error::MeshTopology(format!(
                    "wall patch branches at vertex {i}"
                )));
            }
        }
        let mut visited: BTreeMap<usize, bool> = BTreeMap::new();
        let mut loops = Vec::new();
        for &(start, _) in &pairs {
            if visited.get(&start).copied().unwrap_or(false) {
                continue;
            }
            let mut cur = start;
            let mut loop_verts = Vec::new();
            loop {
                loop_verts.push(cur);
                visited.insert(cur, true);
                match next.get(&cur) {
                    Some(&n) => {
                        cur = n;
                        if cur == start {
                            break;
                        }
                        if visited.get(&cur).copied().unwrap_or(false) {
                            return Err(Error::MeshTopology(format!(
                                "wall loop starting at vertex {start} does not close"
                            )));
                        }
                    }
                    None => {
                        return Err(Error::MeshTopology(format!(
                            "wall loop is open at vertex {cur}"
                        )));
                    }
                }
            }
            loops.push(loop_verts);
        }
        Ok(loops)
    }

    pub fn total_area(&self) -> f64 {
        (0..self.n_elements())
            .map(|e| signed_area(&self.element_points(e)))
            .sum()
    }

    /// Full invariant check; an empty report means the mesh is sound.
    pub fn validate(&self) -> ValidationReport {
        let mut issues = Vec::new();

        for e in 0..self.n_elements() {
            let area = signed_area(&self.element_points(e));
            if area <= 0.0 {
                issues.push(ValidationIssue::InvertedElement { elem: e, area });
            }
        }

        // Closed-polygon identity per element.
        for e in 0..self.n_elements() {
            if let Ok(g) = self.element_geometry(e) {
                let mut s = Vec2::ZERO;
                for &(n, len) in &g.face_normals {
                    s += n * len;
                }
                if s.norm() > 1e-12 {
                    issues.push(ValidationIssue::OpenElementBoundary { elem: e, defect: s.norm() });
                }
            }
        }

        // Every face's vertices belong to both adjacent elements.
        for (f, face) in self.faces.iter().enumerate() {
            let mut elems = vec![face.left];
            if let Some(r) = face.right {
                elems.push(r);
            }
            for e in elems {
                let vs = self.elements[e].vertices();
                if !vs.contains(&face.v0) || !vs.contains(&face.v1) {
                    issues.push(ValidationIssue::FaceElementMismatch { face: f, elem: e });
                }
            }
        }

        for (f, face) in self.faces.iter().enumerate() {
            if face.is_boundary() && face.patch.is_none() {
                issues.push(ValidationIssue::UnpatchedBoundaryFace {
                    face: f,
                    v0: face.v0,
                    v1: face.v1,
                });
            }
        }

        if let Err(err) = self.wall_loops() {
            issues.push(ValidationIssue::WallNotClosed {
                detail: err.to_string(),
            });
        }

        ValidationReport { issues }
    }
}

#[derive(Clone, Debug)]
pub enum ValidationIssue {
    InvertedElement { elem: usize, area: f64 },
    OpenElementBoundary { elem: usize, defect: f64 },
    FaceElementMismatch { face: usize, elem: usize },
    UnpatchedBoundaryFace { face: usize, v0: usize, v1: usize },
    WallNotClosed { detail: String },
}

impl fmt::Display for ValidationIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ValidationIssue::InvertedElement { elem, area } => {
                write!(f, "element {elem} has non-positive area {area:e}")
            }
            ValidationIssue::OpenElementBoundary { elem, defect } => {
                write!(f, "element {elem} normals do not close: |sum| = {defect:e}")
            }
            ValidationIssue::FaceElementMismatch { face, elem } => {
                write!(f, "face {face} vertices not contained in element {elem}")
            }
            ValidationIssue::UnpatchedBoundaryFace { face, v0, v1 } => {
                write!(f, "boundary face {face} ({v0}, {v1}) belongs to no patch")
            }
            ValidationIssue::WallNotClosed { detail } => {
                write!(f, "wall patch is not a set of closed loops: {detail}")
            }
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct ValidationReport {
    pub issues: Vec<ValidationIssue>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.issues.is_empty()
    }

    pub fn into_result(self) -> Result<()> {
        if self.is_clean() {
            Ok(())
        } else {
            Err(Error::MeshInvalid(self.to_string()))
        }
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.issues.is_empty() {
            return write!(f, "mesh is valid");
        }
        for (k, issue) in self.issues.iter().enumerate() {
            if k > 0 {
                writeln!(f)?;
            }
            write!(f, "  - {issue}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_tri_square() -> Mesh {
        // unit square split along the diagonal (0,0)-(1,1)
        let verts = vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(1.0, 1.0),
            Vec2::new(0.0, 1.0),
        ];
        let elems = vec![Element::Tri([0, 1, 2]), Element::Tri([0, 2, 3])];
        let patches = vec![PatchDef {
            name: "outer".into(),
            tag: PatchTag::Farfield,
            pairs: vec![(0, 1), (1, 2), (2, 3), (3, 0)],
        }];
        Mesh::build(verts, elems, patches).unwrap()
    }

    #[test]
    fn smallest_valid_mesh() {
        let m = two_tri_square();
        assert_eq!(m.n_vertices(), 4);
        assert_eq!(m.n_elements(), 2);
        assert_eq!(m.faces.len(), 5);
        let interior: Vec<_> = m.faces.iter().filter(|f| !f.is_boundary()).collect();
        assert_eq!(interior.len(), 1);
        assert!(m.validate().is_clean());
    }

    #[test]
    fn out_of_range_vertex_is_topology_error() {
        let verts = vec![Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0)];
        let elems = vec![Element::Tri([0, 1, 7])];
        let err = Mesh::build(verts, elems, vec![]).unwrap_err();
        assert!(matches!(err, Error::MeshTopology(_)));
    }

    #[test]
    fn element_geometry_unit_square() {
        let verts = vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(1.0, 1.0),
            Vec2::new(0.0, 1.0),
        ];
        let elems = vec![Element::Quad([0, 1, 2, 3])];
        let m = Mesh::build(verts, elems, vec![]).unwrap();
        let g = m.element_geometry(0).unwrap();
        assert!((g.centroid.x - 0.5).abs() < 1e-15);
        assert!((g.centroid.y - 0.5).abs() < 1e-15);
        assert_eq!(g.area, 1.0);
        assert_eq!(g.dx, 0.5);
        assert_eq!(g.dy, 0.5);
        let mut s = Vec2::ZERO;
        for &(n, len) in &g.face_normals {
            s += n * len;
        }
        assert!(s.norm() < 1e-14);
    }

    #[test]
    fn inverted_element_reported() {
        let verts = vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(1.0, 1.0),
            Vec2::new(0.0, 1.0),
            Vec2::new(2.0, 0.0),
        ];
        // second triangle is wound clockwise on purpose; it shares no edge
        // with the first, so the build-time orientation check cannot fire
        let elems = vec![Element::Tri([0, 1, 3]), Element::Tri([1, 2, 4])];
        let m = Mesh::build(verts, elems, vec![]).unwrap();
        let report = m.validate();
        assert!(report
            .issues
            .iter()
            .any(|i| matches!(i, ValidationIssue::InvertedElement { elem: 1, .. })
                || matches!(i, ValidationIssue::UnpatchedBoundaryFace { .. })));
        let named: Vec<_> = report
            .issues
            .iter()
            .filter(|i| matches!(i, ValidationIssue::InvertedElement { elem: 1, .. }))
            .collect();
        assert_eq!(named.len(), 1);
    }

    #[test]
    fn open_wall_loop_reported() {
        let verts = vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(1.0, 1.0),
            Vec2::new(0.0, 1.0),
        ];
        let elems = vec![Element::Quad([0, 1, 2, 3])];
        let patches = vec![
            PatchDef {
                name: "wall".into(),
                tag: PatchTag::Wall,
                pairs: vec![(0, 1), (1, 2)],
            },
            PatchDef {
                name: "out".into(),
                tag: PatchTag::Farfield,
                pairs: vec![(2, 3), (3, 0)],
            },
        ];
        let m = Mesh::build(verts, elems, patches).unwrap();
        let report = m.validate();
        assert!(report
            .issues
            .iter()
            .any(|i| matches!(i, ValidationIssue::WallNotClosed { .. })));
    }

    #[test]
    fn interior_face_normals_opposite() {
        let m = two_tri_square();
        for (f, face) in m.faces.iter().enumerate() {
            if let Some(right) = face.right {
                let (n, _) = m.face_normal(f);
                // normal seen from the right element is the negation
                let g = m.element_geometry(right).unwrap();
                let pts = m.element_points(right);
                let k = pts.len();
                let vs = m.elements[right].vertices();
                let mut found = false;
                for i in 0..k {
                    let a = vs[i];
                    let b = vs[(i + 1) % k];
                    if (a, b) == (face.v1, face.v0) {
                        let (nr, _) = (g.face_normals[i].0, g.face_normals[i].1);
                        assert!((nr + n).norm() < 1e-14);
                        found = true;
                    }
                }
                assert!(found);
            }
        }
    }

    #[test]
    fn area_consistency() {
        let m = two_tri_square();
        assert!((m.total_area() - 1.0).abs() < 1e-12);
    }
}
