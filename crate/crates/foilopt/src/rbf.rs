//! Compact-support RBF mesh deformation.
//!
//! Boundary nodes (wall and far-field) drive the interpolation; far-field
//! displacements are prescribed as zero so the outer boundary stays put.
//! The kernel is `phi(d) = (1 - d/r)^2` inside the support radius `r`.
//! The dense symmetric system is factored once per boundary-node set
//! (Cholesky with a small diagonal regularization) and iteratively refined
//! so the boundary interpolation residual reaches the solver tolerance
//! even for badly conditioned clustered node sets. The volume kernel
//! matrix is never materialized; application streams over interior nodes.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use crate::geom::Vec2;
use crate::mesh::{Mesh, VertexKind};
use crate::param::SurfaceDisplacement;

/// Kernel value at distance `d` with support radius `r`.
pub fn rbf_kernel(d: f64, r: f64) -> Result<f64> {
    if d < 0.0 {
        return Err(Error::RbfSolve(format!("negative distance {d}")));
    }
    debug_assert!(r > 0.0);
    if d >= r {
        Ok(0.0)
    } else {
        let t = 1.0 - d / r;
        Ok(t * t)
    }
}

/// Solved RBF system: driving nodes, factorization, per-component weights.
pub struct RbfSystem {
    pub nodes: Vec<Vec2>,
    pub radius: f64,
    pub alpha_x: Vec<f64>,
    pub alpha_y: Vec<f64>,
}

/// Factorization of the boundary kernel matrix, reusable across right-hand
/// sides (the boundary nodes of the undeformed mesh never move).
pub struct RbfFactor {
    pub nodes: Vec<Vec2>,
    pub radius: f64,
    phi: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
}

impl RbfFactor {
    pub fn new(nodes: Vec<Vec2>, radius: f64, regularization: f64) -> Result<Self> {
        let n = nodes.len();
        if n == 0 {
            return Err(Error::RbfSolve("no boundary nodes".into()));
        }
        let mut phi = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let v = rbf_kernel(nodes[i].dist(nodes[j]), radius)?;
                phi[(i, j)] = v;
                phi[(j, i)] = v;
            }
        }
        // escalate the regularization if the factorization fails outright
        let mut reg = regularization.max(0.0);
        for _ in 0..8 {
            let mut a = phi.clone();
            for i in 0..n {
                a[(i, i)] += reg;
            }
            if let Some(chol) = Cholesky::new(a) {
                return Ok(RbfFactor {
                    nodes,
                    radius,
                    phi,
                    chol,
                });
            }
            reg = if reg == 0.0 { 1e-14 } else { reg * 100.0 };
        }
        Err(Error::RbfSolve(
            "kernel matrix is not positive definite (coincident boundary nodes?)".into(),
        ))
    }

    /// Solves `Phi alpha = rhs` with iterative refinement until the residual
    /// drops below `tol * |rhs|` (exact zero rhs short-circuits).
    fn solve_refined(&self, rhs: &DVector<f64>, tol: f64) -> Result<DVector<f64>> {
        let rhs_norm = rhs.norm();
        if rhs_norm == 0.0 {
            return Ok(DVector::zeros(rhs.len()));
        }
        let mut x = self.chol.solve(rhs);
        for _ in 0..8 {
            let res = rhs - &self.phi * &x;
            if res.norm() <= tol * rhs_norm {
                return Ok(x);
            }
            x += self.chol.solve(&res);
        }
        let res = (rhs - &self.phi * &x).norm();
        if res <= tol * rhs_norm {
            Ok(x)
        } else {
            Err(Error::RbfSolve(format!(
                "refinement stalled at relative residual {:e}",
                res / rhs_norm
            )))
        }
    }

    /// Solves for the interpolation weights of both displacement components.
    pub fn solve(&self, dx: &[f64], dy: &[f64]) -> Result<RbfSystem> {
        let n = self.nodes.len();
        if dx.len() != n || dy.len() != n {
            return Err(Error::Dimension(format!(
                "displacement length {} vs {} boundary nodes",
                dx.len(),
                n
            )));
        }
        if dx.iter().chain(dy).any(|v| !v.is_finite()) {
            return Err(Error::RbfSolve("non-finite boundary displacement".into()));
        }
        let ax = self.solve_refined(&DVector::from_column_slice(dx), 1e-10)?;
        let ay = self.solve_refined(&DVector::from_column_slice(dy), 1e-10)?;
        Ok(RbfSystem {
            nodes: self.nodes.clone(),
            radius: self.radius,
            alpha_x: ax.as_slice().to_vec(),
            alpha_y: ay.as_slice().to_vec(),
        })
    }
}

impl RbfSystem {
    /// Displacement at an arbitrary point (streamed, no stored matrix).
    pub fn displacement(&self, p: Vec2) -> Vec2 {
        let mut d = Vec2::ZERO;
        for (b, node) in self.nodes.iter().enumerate() {
            let dist = p.dist(*node);
            if dist < self.radius {
                let t = 1.0 - dist / self.radius;
                let phi = t * t;
                d.x += self.alpha_x[b] * phi;
                d.y += self.alpha_y[b] * phi;
            }
        }
        d
    }

    /// Interpolation residual at the boundary nodes for a prescribed field.
    pub fn boundary_residual(&self, dx: &[f64], dy: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (b, node) in self.nodes.iter().enumerate() {
            let d = self.displacement(*node);
            worst = worst.max((d.x - dx[b]).abs()).max((d.y - dy[b]).abs());
        }
        worst
    }
}

/// One-shot solve over a node set (see [`RbfFactor`] for the cached path).
pub fn rbf_solve(
    nodes: Vec<Vec2>,
    dx: &[f64],
    dy: &[f64],
    radius: f64,
    regularization: f64,
) -> Result<RbfSystem> {
    RbfFactor::new(nodes, radius, regularization)?.solve(dx, dy)
}

/// Boundary nodes of a mesh in deterministic order: all wall vertices, then
/// all far-field vertices (each sorted by vertex id). Returns the vertex ids.
pub fn boundary_node_ids(mesh: &Mesh) -> Vec<usize> {
    let mut wall = Vec::new();
    let mut far = Vec::new();
    for v in 0..mesh.n_vertices() {
        match mesh.vertex_kind[v] {
            VertexKind::Wall => wall.push(v),
            VertexKind::Farfield => far.push(v),
            VertexKind::Interior => {}
        }
    }
    wall.extend(far);
    wall
}

/// Prepared deformation operator for a fixed base mesh.
pub struct MeshDeformer {
    pub node_ids: Vec<usize>,
    pub factor: RbfFactor,
}

impl MeshDeformer {
    pub fn new(mesh: &Mesh, radius: f64, regularization: f64) -> Result<Self> {
        let node_ids = boundary_node_ids(mesh);
        let nodes = node_ids.iter().map(|&v| mesh.vertices[v]).collect();
        Ok(MeshDeformer {
            node_ids,
            factor: RbfFactor::new(nodes, radius, regularization)?,
        })
    }

    /// Deforms `mesh` by the prescribed wall displacements (far field pinned
    /// at zero). Wall vertices move exactly by their prescribed values;
    /// interior vertices follow the RBF interpolant. The deformed mesh is
    /// validated and an inverted-element failure carries the element list.
    pub fn deform(&self, mesh: &Mesh, surf: &SurfaceDisplacement) -> Result<Mesh> {
        let n = self.node_ids.len();
        let mut dx = vec![0.0; n];
        let mut dy = vec![0.0; n];
        // map the prescribed wall displacements onto the driving-node slots
        for (k, &v) in surf.verts.iter().enumerate() {
            match self.node_ids.binary_search_by(|probe| {
                // wall block comes first and is sorted; farfield block sorted after
                order_key(mesh, *probe).cmp(&order_key(mesh, v))
            }) {
                Ok(slot) => {
                    dx[slot] = surf.disp[k][0];
                    dy[slot] = surf.disp[k][1];
                }
                Err(_) => {
                    return Err(Error::Dimension(format!(
                        "displacement prescribed for non-boundary vertex {v}"
                    )))
                }
            }
        }

        let all_zero = dx.iter().chain(dy.iter()).all(|&v| v == 0.0);
        let mut vertices = mesh.vertices.clone();
        if !all_zero {
            let system = self.factor.solve(&dx, &dy)?;
            // boundary vertices take their prescribed values exactly
            let mut is_boundary = vec![false; mesh.n_vertices()];
            for (slot, &v) in self.node_ids.iter().enumerate() {
                is_boundary[v] = true;
                vertices[v] += Vec2::new(dx[slot], dy[slot]);
            }
            for (v, vert) in vertices.iter_mut().enumerate() {
                if !is_boundary[v] {
                    *vert += system.displacement(mesh.vertices[v]);
                }
            }
        }

        let out = mesh.with_vertices(vertices);
        let inverted: Vec<usize> = (0..out.n_elements())
            .filter(|&e| crate::geom::signed_area(&out.element_points(e)) <= 0.0)
            .collect();
        if !inverted.is_empty() {
            return Err(Error::DeformedMeshInvalid {
                count: inverted.len(),
                first: inverted[0],
            });
        }
        Ok(out)
    }
}

fn order_key(mesh: &Mesh, v: usize) -> (u8, usize) {
    let block = match mesh.vertex_kind[v] {
        VertexKind::Wall => 0u8,
        VertexKind::Farfield => 1,
        VertexKind::Interior => 2,
    };
    (block, v)
}

/// Summary row for the deformation report.
#[derive(Clone, Copy, Debug)]
pub struct DeformationReport {
    pub max_displacement: f64,
    pub min_area_before: f64,
    pub min_area_after: f64,
}

pub fn deformation_report(before: &Mesh, after: &Mesh) -> DeformationReport {
    let max_displacement = before
        .vertices
        .iter()
        .zip(&after.vertices)
        .map(|(a, b)| a.dist(*b))
        .fold(0.0, f64::max);
    let min_area = |m: &Mesh| {
        (0..m.n_elements())
            .map(|e| crate::geom::signed_area(&m.element_points(e)))
            .fold(f64::INFINITY, f64::min)
    };
    DeformationReport {
        max_displacement,
        min_area_before: min_area(before),
        min_area_after: min_area(after),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::gen::{naca0012, omesh};
    use crate::param::{FfdParam, Parameterization};
    use crate::param::ffd::FfdAxes;

    #[test]
    fn kernel_values() {
        let r = 2.0;
        assert_eq!(rbf_kernel(0.0, r).unwrap(), 1.0);
        assert_eq!(rbf_kernel(r, r).unwrap(), 0.0);
        assert_eq!(rbf_kernel(0.5 * r, r).unwrap(), 0.25);
        assert_eq!(rbf_kernel(3.0 * r, r).unwrap(), 0.0);
        assert!(rbf_kernel(-1.0, r).is_err());
    }

    #[test]
    fn single_node_system() {
        let sys = rbf_solve(vec![Vec2::ZERO], &[0.1], &[0.0], 1.0, 0.0).unwrap();
        assert!((sys.alpha_x[0] - 0.1).abs() < 1e-14);
        assert_eq!(sys.alpha_y[0], 0.0);
    }

    #[test]
    fn zero_displacement_gives_zero_weights() {
        let nodes = vec![Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0)];
        let sys = rbf_solve(nodes, &[0.0; 3], &[0.0; 3], 2.0, 1e-12).unwrap();
        assert!(sys.alpha_x.iter().chain(&sys.alpha_y).all(|&a| a == 0.0));
    }

    #[test]
    fn three_collinear_nodes_match_direct_solve() {
        // spacing r/2 gives off-diagonal 0.25; unit dy at the center node.
        // Direct solve of [[1,.25,0],[.25,1,.25],[0,.25,1]] a = (0,1,0):
        // a = (-2/7, 8/7, -2/7)
        let r = 2.0;
        let nodes = vec![Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(2.0, 0.0)];
        let sys = rbf_solve(nodes, &[0.0; 3], &[0.0, 1.0, 0.0], r, 0.0).unwrap();
        let expect = [-2.0 / 7.0, 8.0 / 7.0, -2.0 / 7.0];
        for (a, e) in sys.alpha_y.iter().zip(expect) {
            assert!((a - e).abs() < 1e-10, "{a} vs {e}");
        }
    }

    #[test]
    fn interpolation_property_at_boundary_nodes() {
        let nodes = vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.3),
            Vec2::new(2.0, -0.2),
            Vec2::new(0.5, 1.0),
        ];
        let dx = [0.01, -0.02, 0.0, 0.005];
        let dy = [0.0, 0.01, -0.01, 0.02];
        let sys = rbf_solve(nodes.clone(), &dx, &dy, 3.0, 1e-12).unwrap();
        for (b, node) in nodes.iter().enumerate() {
            let d = sys.displacement(*node);
            assert!((d.x - dx[b]).abs() < 1e-10);
            assert!((d.y - dy[b]).abs() < 1e-10);
        }
    }

    #[test]
    fn compact_support_outside_radius() {
        let nodes = vec![Vec2::new(0.0, 0.0)];
        let sys = rbf_solve(nodes, &[0.5], &[0.5], 1.0, 0.0).unwrap();
        let d = sys.displacement(Vec2::new(5.0, 0.0));
        assert_eq!((d.x, d.y), (0.0, 0.0));
    }

    #[test]
    fn generic_point_matches_brute_force_sum() {
        let nodes = vec![Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.5)];
        let dx = [0.02, -0.01, 0.03];
        let dy = [0.0, 0.04, -0.02];
        let r = 2.5;
        let sys = rbf_solve(nodes.clone(), &dx, &dy, r, 1e-12).unwrap();
        let p = Vec2::new(0.4, 0.7);
        let d = sys.displacement(p);
        let mut expect = Vec2::ZERO;
        for (b, node) in nodes.iter().enumerate() {
            let phi = rbf_kernel(p.dist(*node), r).unwrap();
            expect.x += sys.alpha_x[b] * phi;
            expect.y += sys.alpha_y[b] * phi;
        }
        assert!((d.x - expect.x).abs() < 1e-15);
        assert!((d.y - expect.y).abs() < 1e-15);
    }

    #[test]
    fn mirror_symmetry() {
        // mirroring the prescribed field across the x-axis mirrors the result
        let nodes = vec![Vec2::new(0.0, 1.0), Vec2::new(0.0, -1.0), Vec2::new(1.0, 0.0)];
        let dy_up = [0.1, -0.1, 0.0];
        let sys = rbf_solve(nodes.clone(), &[0.0; 3], &dy_up, 3.0, 1e-12).unwrap();
        let p = Vec2::new(0.3, 0.4);
        let q = Vec2::new(0.3, -0.4);
        let dp = sys.displacement(p);
        let dq = sys.displacement(q);
        assert!((dp.x - dq.x).abs() < 1e-12);
        assert!((dp.y + dq.y).abs() < 1e-12);
    }

    fn airfoil_mesh() -> Mesh {
        omesh(&naca0012(48), 8, 15.0, 1.5).unwrap()
    }

    #[test]
    fn deform_zero_is_bit_identical() {
        let m = airfoil_mesh();
        let def = MeshDeformer::new(&m, 10.0, 1e-12).unwrap();
        let surf = SurfaceDisplacement::zeros(m.wall_vertices());
        let out = def.deform(&m, &surf).unwrap();
        for (a, b) in m.vertices.iter().zip(&out.vertices) {
            assert_eq!(a.x, b.x);
            assert_eq!(a.y, b.y);
        }
    }

    #[test]
    fn deform_wall_exact_farfield_pinned() {
        let m = airfoil_mesh();
        let def = MeshDeformer::new(&m, 10.0, 1e-12).unwrap();
        let walls = m.wall_vertices();
        let mut surf = SurfaceDisplacement::zeros(walls.clone());
        for (k, &v) in walls.iter().enumerate() {
            let x = m.vertices[v].x;
            surf.disp[k] = [0.0, 0.004 * (std::f64::consts::PI * x).sin()];
        }
        let out = def.deform(&m, &surf).unwrap();
        for (k, &v) in walls.iter().enumerate() {
            let moved = out.vertices[v] - m.vertices[v];
            assert!((moved.y - surf.disp[k][1]).abs() < 1e-9);
            assert!(moved.x.abs() < 1e-9);
        }
        for v in 0..m.n_vertices() {
            if m.vertex_kind[v] == VertexKind::Farfield {
                assert_eq!(m.vertices[v].x, out.vertices[v].x);
                assert_eq!(m.vertices[v].y, out.vertices[v].y);
            }
        }
    }

    #[test]
    fn quarter_bound_ffd_bump_keeps_mesh_valid() {
        let m = airfoil_mesh();
        let ffd = FfdParam::new(&m, 4, 2, [-0.05, -0.1, 1.05, 0.1], FfdAxes::Y, 0.25).unwrap();
        let (_, hi) = ffd.bounds();
        // alternating full-bound bumps, the harshest admissible morph
        let d: Vec<f64> = hi
            .iter()
            .enumerate()
            .map(|(i, &b)| if i % 2 == 0 { b } else { -b })
            .collect();
        let surf = ffd.surface_displacement(&d).unwrap();
        let def = MeshDeformer::new(&m, 10.0, 1e-12).unwrap();
        let out = def.deform(&m, &surf).unwrap();
        assert!(out.validate().is_clean());
        let report = deformation_report(&m, &out);
        assert!(report.min_area_after > 0.0);
        assert!(report.max_displacement > 0.0);
    }

    #[test]
    fn linearity_in_prescribed_displacements() {
        let m = airfoil_mesh();
        let def = MeshDeformer::new(&m, 10.0, 1e-12).unwrap();
        let walls = m.wall_vertices();
        let mut s1 = SurfaceDisplacement::zeros(walls.clone());
        let mut s2 = SurfaceDisplacement::zeros(walls.clone());
        let mut s12 = SurfaceDisplacement::zeros(walls.clone());
        for (k, &v) in walls.iter().enumerate() {
            let x = m.vertices[v].x;
            s1.disp[k] = [0.0, 0.002 * x];
            s2.disp[k] = [0.001 * (1.0 - x), 0.0];
            s12.disp[k] = [s1.disp[k][0] + s2.disp[k][0], s1.disp[k][1] + s2.disp[k][1]];
        }
        let m1 = def.deform(&m, &s1).unwrap();
        let m2 = def.deform(&m, &s2).unwrap();
        let m12 = def.deform(&m, &s12).unwrap();
        for v in 0..m.n_vertices() {
            let d1 = m1.vertices[v] - m.vertices[v];
            let d2 = m2.vertices[v] - m.vertices[v];
            let d12 = m12.vertices[v] - m.vertices[v];
            assert!((d1.x + d2.x - d12.x).abs() < 1e-12);
            assert!((d1.y + d2.y - d12.y).abs() < 1e-12);
        }
    }
}
