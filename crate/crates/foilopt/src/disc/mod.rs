//! Discretization caches: schemes, Taylor bases, quadrature data, states.
//!
//! A [`Disc`] precomputes everything geometry-dependent for one mesh and
//! scheme: element geometry, basis normalization and quadratic-mode means,
//! volume and face quadrature points with basis traces, and element mass
//! matrices. Deforming the mesh rebuilds the `Disc`; solution coefficient
//! vectors ([`State`]) carry no geometry and survive across rebuilds of the
//! same topology.

pub mod quadrature;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use crate::euler::N_VARS;
use crate::geom::Vec2;
use crate::mesh::{ElementGeometry, Mesh};
use quadrature::{gauss_1d, triangle_rule};

/// Spatial scheme: first/second-order finite volume, DG with p1/p2 Taylor
/// bases. FV stores one mode per variable; FV2 reconstructs gradients on
/// the fly rather than carrying them as unknowns.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scheme {
    Fv1,
    Fv2,
    DgP1,
    DgP2,
}

impl Scheme {
    pub fn parse(s: &str) -> Result<Scheme> {
        match s {
            "fv1" => Ok(Scheme::Fv1),
            "fv2" => Ok(Scheme::Fv2),
            "dgp1" => Ok(Scheme::DgP1),
            "dgp2" => Ok(Scheme::DgP2),
            other => Err(Error::Config(format!("unknown scheme `{other}`"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Fv1 => "fv1",
            Scheme::Fv2 => "fv2",
            Scheme::DgP1 => "dgp1",
            Scheme::DgP2 => "dgp2",
        }
    }

    /// Modes per variable.
    pub fn n_modes(self) -> usize {
        match self {
            Scheme::Fv1 | Scheme::Fv2 => 1,
            Scheme::DgP1 => 3,
            Scheme::DgP2 => 6,
        }
    }

    pub fn is_dg(self) -> bool {
        matches!(self, Scheme::DgP1 | Scheme::DgP2)
    }

    /// Face quadrature points (Gauss, exact to degree 2p + 1).
    pub fn face_points(self) -> usize {
        match self {
            Scheme::Fv1 => 1,
            Scheme::Fv2 | Scheme::DgP1 => 2,
            Scheme::DgP2 => 3,
        }
    }

    /// Volume rule polynomial degree (exact to 2p, with a floor of 2 so
    /// source terms and error norms integrate sensibly on FV meshes).
    pub fn volume_degree(self) -> usize {
        match self {
            Scheme::Fv1 | Scheme::Fv2 | Scheme::DgP1 => 2,
            Scheme::DgP2 => 4,
        }
    }
}

/// Basis normalization data for one element.
#[derive(Clone, Debug)]
pub struct BasisData {
    pub xc: f64,
    pub yc: f64,
    pub dx: f64,
    pub dy: f64,
    /// Element means of the raw quadratic monomials (xi^2, eta^2, xi*eta),
    /// subtracted so the p2 modes have zero element average.
    pub means: [f64; 3],
}

impl BasisData {
    /// Basis value phi_k at a physical point.
    pub fn value(&self, k: usize, x: f64, y: f64) -> f64 {
        let xi = (x - self.xc) / self.dx;
        let eta = (y - self.yc) / self.dy;
        match k {
            0 => 1.0,
            1 => xi,
            2 => eta,
            3 => xi * xi - self.means[0],
            4 => eta * eta - self.means[1],
            5 => xi * eta - self.means[2],
            _ => panic!("basis index {k} out of range"),
        }
    }

    /// Basis gradient at a physical point.
    pub fn grad(&self, k: usize, x: f64, y: f64) -> Vec2 {
        let xi = (x - self.xc) / self.dx;
        let eta = (y - self.yc) / self.dy;
        match k {
            0 => Vec2::ZERO,
            1 => Vec2::new(1.0 / self.dx, 0.0),
            2 => Vec2::new(0.0, 1.0 / self.dy),
            3 => Vec2::new(2.0 * xi / self.dx, 0.0),
            4 => Vec2::new(0.0, 2.0 * eta / self.dy),
            5 => Vec2::new(eta / self.dx, xi / self.dy),
            _ => panic!("basis index {k} out of range"),
        }
    }
}

/// One volume quadrature point with cached basis values.
#[derive(Clone, Debug)]
pub struct VolPoint {
    pub x: f64,
    pub y: f64,
    /// Physical weight (includes the Jacobian).
    pub w: f64,
    pub phi: Vec<f64>,
    pub grad: Vec<Vec2>,
    /// Vertex shape-function values for interpolating vertex fields.
    pub vw: Vec<f64>,
}

/// One face quadrature point with basis traces from both sides.
#[derive(Clone, Debug)]
pub struct FacePoint {
    pub x: f64,
    pub y: f64,
    /// Physical weight (includes the face length).
    pub w: f64,
    /// Arc parameter in [0, 1] from face.v0 to face.v1.
    pub s: f64,
    pub phi_left: Vec<f64>,
    /// Empty for boundary faces.
    pub phi_right: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct FaceData {
    pub normal: Vec2,
    pub len: f64,
    pub points: Vec<FacePoint>,
}

/// All geometry-derived data for one (mesh, scheme) pair.
pub struct Disc {
    pub scheme: Scheme,
    pub nk: usize,
    pub mesh: Mesh,
    pub geom: Vec<ElementGeometry>,
    pub basis: Vec<BasisData>,
    pub vol: Vec<Vec<VolPoint>>,
    pub face: Vec<FaceData>,
    pub mass: Vec<DMatrix<f64>>,
    mass_chol: Vec<Cholesky<f64, Dyn>>,
}

impl Disc {
    pub fn new(mesh: &Mesh, scheme: Scheme) -> Result<Disc> {
        let ne = mesh.n_elements();
        let nk = scheme.n_modes();

        let mut geom = Vec::with_capacity(ne);
        for e in 0..ne {
            geom.push(mesh.element_geometry(e)?);
        }

        // raw volume quadrature (positions, weights, vertex weights)
        let vol_deg = scheme.volume_degree();
        let mut raw_vol: Vec<Vec<(f64, f64, f64, Vec<f64>)>> = Vec::with_capacity(ne);
        for e in 0..ne {
            let pts = mesh.element_points(e);
            raw_vol.push(match pts.len() {
                3 => {
                    let area = geom[e].area;
                    triangle_rule(vol_deg)
                        .into_iter()
                        .map(|(l0, l1, l2, w)| {
                            let p = pts[0] * l0 + pts[1] * l1 + pts[2] * l2;
                            (p.x, p.y, w * area, vec![l0, l1, l2])
                        })
                        .collect()
                }
                4 => {
                    let n1d = vol_deg / 2 + 1;
                    let rule = gauss_1d(n1d);
                    let mut out = Vec::with_capacity(n1d * n1d);
                    for &(xi, wx) in &rule {
                        for &(eta, wy) in &rule {
                            let n = [
                                0.25 * (1.0 - xi) * (1.0 - eta),
                                0.25 * (1.0 + xi) * (1.0 - eta),
                                0.25 * (1.0 + xi) * (1.0 + eta),
                                0.25 * (1.0 - xi) * (1.0 + eta),
                            ];
                            let p = pts[0] * n[0] + pts[1] * n[1] + pts[2] * n[2] + pts[3] * n[3];
                            // bilinear map Jacobian
                            let dxi = (pts[1] - pts[0]) * (1.0 - eta) * 0.25
                                + (pts[2] - pts[3]) * (1.0 + eta) * 0.25;
                            let deta = (pts[3] - pts[0]) * (1.0 - xi) * 0.25
                                + (pts[2] - pts[1]) * (1.0 + xi) * 0.25;
                            let jac = dxi.cross(deta);
                            out.push((p.x, p.y, wx * wy * jac, n.to_vec()));
                        }
                    }
                    out
                }
                _ => unreachable!(),
            });
        }

        // basis data: quadratic-mode means via the raw rule
        let mut basis = Vec::with_capacity(ne);
        for e in 0..ne {
            let g = &geom[e];
            let (xc, yc, dx, dy) = (g.centroid.x, g.centroid.y, g.dx, g.dy);
            let mut means = [0.0; 3];
            if nk > 3 {
                let mut sums = [0.0; 3];
                for &(x, y, w, _) in &raw_vol[e] {
                    let xi = (x - xc) / dx;
                    let eta = (y - yc) / dy;
                    sums[0] += w * xi * xi;
                    sums[1] += w * eta * eta;
                    sums[2] += w * xi * eta;
                }
                for (m, s) in means.iter_mut().zip(sums) {
                    *m = s / g.area;
                }
            }
            basis.push(BasisData { xc, yc, dx, dy, means });
        }

        let mut vol = Vec::with_capacity(ne);
        for e in 0..ne {
            let b = &basis[e];
            let pts: Vec<VolPoint> = raw_vol[e]
                .iter()
                .map(|(x, y, w, vw)| VolPoint {
                    x: *x,
                    y: *y,
                    w: *w,
                    phi: (0..nk).map(|k| b.value(k, *x, *y)).collect(),
                    grad: (0..nk).map(|k| b.grad(k, *x, *y)).collect(),
                    vw: vw.clone(),
                })
                .collect();
            vol.push(pts);
        }

        let n_face_pts = scheme.face_points();
        let rule = gauss_1d(n_face_pts);
        let mut face = Vec::with_capacity(mesh.faces.len());
        for f in 0..mesh.faces.len() {
            let fc = &mesh.faces[f];
            let (normal, len) = mesh.face_normal(f);
            let p0 = mesh.vertices[fc.v0];
            let p1 = mesh.vertices[fc.v1];
            let points = rule
                .iter()
                .map(|&(xi, w)| {
                    let s = 0.5 * (1.0 + xi);
                    let p = p0 + (p1 - p0) * s;
                    let phi_left = (0..nk).map(|k| basis[fc.left].value(k, p.x, p.y)).collect();
                    let phi_right = match fc.right {
                        Some(r) => (0..nk).map(|k| basis[r].value(k, p.x, p.y)).collect(),
                        None => Vec::new(),
                    };
                    FacePoint {
                        x: p.x,
                        y: p.y,
                        w: w * 0.5 * len,
                        s,
                        phi_left,
                        phi_right,
                    }
                })
                .collect();
            face.push(FaceData { normal, len, points });
        }

        let mut mass = Vec::with_capacity(ne);
        let mut mass_chol = Vec::with_capacity(ne);
        for e in 0..ne {
            let mut m: DMatrix<f64> = DMatrix::zeros(nk, nk);
            for p in &vol[e] {
                for i in 0..nk {
                    for j in 0..=i {
                        m[(i, j)] += p.w * p.phi[i] * p.phi[j];
                    }
                }
            }
            for i in 0..nk {
                for j in 0..i {
                    m[(j, i)] = m[(i, j)];
                }
            }
            if nk == 1 {
                // FV mass is the element area; the quadrature sum equals it
                m[(0, 0)] = geom[e].area;
            }
            let chol = Cholesky::new(m.clone())
                .ok_or_else(|| Error::DegenerateElement { elem: e, area: geom[e].area })?;
            mass.push(m);
            mass_chol.push(chol);
        }

        Ok(Disc {
            scheme,
            nk,
            mesh: mesh.clone(),
            geom,
            basis,
            vol,
            face,
            mass,
            mass_chol,
        })
    }

    pub fn n_elements(&self) -> usize {
        self.geom.len()
    }

    /// Total degrees of freedom.
    pub fn n_dofs(&self) -> usize {
        self.n_elements() * N_VARS * self.nk
    }

    /// Solves `M_e x = rhs` for one element (per-variable projection).
    pub fn mass_solve(&self, e: usize, rhs: &DVector<f64>) -> DVector<f64> {
        self.mass_chol[e].solve(rhs)
    }

    /// L2 projection of a pointwise state function onto the DG space.
    pub fn project(&self, f: &dyn Fn(f64, f64) -> [f64; N_VARS]) -> State {
        let mut u = State::zeros(self.n_elements(), self.nk);
        for e in 0..self.n_elements() {
            let mut rhs = vec![DVector::zeros(self.nk); N_VARS];
            for p in &self.vol[e] {
                let val = f(p.x, p.y);
                for m in 0..N_VARS {
                    for k in 0..self.nk {
                        rhs[m][k] += p.w * val[m] * p.phi[k];
                    }
                }
            }
            for (m, r) in rhs.iter().enumerate() {
                let coef = self.mass_solve(e, r);
                for k in 0..self.nk {
                    *u.at_mut(e, m, k) = coef[k];
                }
            }
        }
        u
    }

    /// L2 norm of the difference between a state and a pointwise reference.
    pub fn l2_error(&self, u: &State, f: &dyn Fn(f64, f64) -> [f64; N_VARS]) -> f64 {
        let mut acc = 0.0;
        for e in 0..self.n_elements() {
            for p in &self.vol[e] {
                let uh = u.eval(e, &p.phi);
                let ex = f(p.x, p.y);
                for m in 0..N_VARS {
                    let d = uh[m] - ex[m];
                    acc += p.w * d * d;
                }
            }
        }
        acc.sqrt()
    }
}

/// Global coefficient vector, layout `[element][variable][mode]`.
#[derive(Clone, Debug, PartialEq)]
pub struct State {
    pub ne: usize,
    pub nk: usize,
    pub data: Vec<f64>,
}

impl State {
    pub fn zeros(ne: usize, nk: usize) -> State {
        State {
            ne,
            nk,
            data: vec![0.0; ne * N_VARS * nk],
        }
    }

    /// Uniform state (cell averages set, higher modes zero).
    pub fn uniform(ne: usize, nk: usize, u: [f64; N_VARS]) -> State {
        let mut s = State::zeros(ne, nk);
        for e in 0..ne {
            for m in 0..N_VARS {
                *s.at_mut(e, m, 0) = u[m];
            }
        }
        s
    }

    #[inline]
    pub fn idx(&self, e: usize, m: usize, k: usize) -> usize {
        (e * N_VARS + m) * self.nk + k
    }

    #[inline]
    pub fn at(&self, e: usize, m: usize, k: usize) -> f64 {
        self.data[self.idx(e, m, k)]
    }

    #[inline]
    pub fn at_mut(&mut self, e: usize, m: usize, k: usize) -> &mut f64 {
        let i = self.idx(e, m, k);
        &mut self.data[i]
    }

    /// Cell average: the constant mode (higher Taylor modes have zero mean).
    pub fn avg(&self, e: usize) -> [f64; N_VARS] {
        [
            self.at(e, 0, 0),
            self.at(e, 1, 0),
            self.at(e, 2, 0),
            self.at(e, 3, 0),
        ]
    }

    /// Evaluate the element polynomial at cached basis values.
    #[inline]
    pub fn eval(&self, e: usize, phi: &[f64]) -> [f64; N_VARS] {
        let mut out = [0.0; N_VARS];
        let base = e * N_VARS * self.nk;
        for m in 0..N_VARS {
            let row = &self.data[base + m * self.nk..base + (m + 1) * self.nk];
            let mut v = 0.0;
            for (c, p) in row.iter().zip(phi) {
                v += c * p;
            }
            out[m] = v;
        }
        out
    }

    /// Gradient of each variable at cached basis gradients.
    pub fn eval_grad(&self, e: usize, grad: &[Vec2]) -> [Vec2; N_VARS] {
        let mut out = [Vec2::ZERO; N_VARS];
        let base = e * N_VARS * self.nk;
        for m in 0..N_VARS {
            let row = &self.data[base + m * self.nk..base + (m + 1) * self.nk];
            let mut g = Vec2::ZERO;
            for (c, gr) in row.iter().zip(grad) {
                g += *gr * *c;
            }
            out[m] = g;
        }
        out
    }

    pub fn norm_l2(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn norm_inf(&self) -> f64 {
        self.data.iter().fold(0.0, |a: f64, &v| a.max(v.abs()))
    }

    /// Order-insensitive content checksum, used to assert a state is not
    /// mutated across frozen-state operations.
    pub fn checksum(&self) -> u64 {
        self.data
            .iter()
            .fold(0u64, |acc, v| acc.wrapping_mul(31).wrapping_add(v.to_bits()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::gen::{naca0012, omesh, rect_mesh, RectTags};

    #[test]
    fn constant_basis_is_one_everywhere() {
        let m = rect_mesh(2, 2, [0.0, 1.0, 0.0, 1.0], RectTags::all_farfield()).unwrap();
        let d = Disc::new(&m, Scheme::DgP2).unwrap();
        for e in 0..d.n_elements() {
            for p in &d.vol[e] {
                assert_eq!(p.phi[0], 1.0);
            }
        }
    }

    #[test]
    fn linear_mode_vanishes_at_centroid() {
        let m = rect_mesh(3, 2, [0.0, 2.0, 0.0, 1.0], RectTags::all_farfield()).unwrap();
        let d = Disc::new(&m, Scheme::DgP1).unwrap();
        for e in 0..d.n_elements() {
            let g = &d.geom[e];
            assert!(d.basis[e].value(1, g.centroid.x, g.centroid.y).abs() < 1e-14);
            assert!(d.basis[e].value(2, g.centroid.x, g.centroid.y).abs() < 1e-14);
        }
    }

    #[test]
    fn nonconstant_modes_have_zero_element_mean() {
        // quadrature over the element is the oracle
        let m = omesh(&naca0012(24), 3, 8.0, 1.5).unwrap();
        let d = Disc::new(&m, Scheme::DgP2).unwrap();
        for e in 0..d.n_elements() {
            for k in 1..6 {
                let mean: f64 = d.vol[e].iter().map(|p| p.w * p.phi[k]).sum();
                assert!(
                    mean.abs() < 1e-13 * d.geom[e].area.max(1e-30) / d.geom[e].area,
                    "element {e} mode {k}: mean {mean:e}"
                );
            }
        }
    }

    #[test]
    fn quad_volume_weights_sum_to_area() {
        let m = omesh(&naca0012(24), 3, 8.0, 1.5).unwrap();
        let d = Disc::new(&m, Scheme::DgP1).unwrap();
        for e in 0..d.n_elements() {
            let s: f64 = d.vol[e].iter().map(|p| p.w).sum();
            assert!((s - d.geom[e].area).abs() < 1e-12 * d.geom[e].area.max(1.0));
        }
    }

    #[test]
    fn face_weights_sum_to_length() {
        let m = rect_mesh(2, 2, [0.0, 1.0, 0.0, 1.0], RectTags::all_farfield()).unwrap();
        let d = Disc::new(&m, Scheme::DgP2).unwrap();
        for f in &d.face {
            let s: f64 = f.points.iter().map(|p| p.w).sum();
            assert!((s - f.len).abs() < 1e-14);
        }
    }

    #[test]
    fn projection_reproduces_polynomials() {
        let m = rect_mesh(2, 3, [0.0, 1.0, 0.0, 1.0], RectTags::all_farfield()).unwrap();
        let d = Disc::new(&m, Scheme::DgP2).unwrap();
        // a quadratic is exactly representable in the p2 space
        let f = |x: f64, y: f64| [1.0 + x + y, x * y, x * x, 2.0 + y * y];
        let u = d.project(&f);
        assert!(d.l2_error(&u, &f) < 1e-13);
    }

    #[test]
    fn projection_of_linear_exact_in_p1() {
        let m = omesh(&naca0012(24), 3, 8.0, 1.5).unwrap();
        let d = Disc::new(&m, Scheme::DgP1).unwrap();
        let f = |x: f64, y: f64| [1.0 + 2.0 * x + 3.0 * y, 0.5 * x - y, 0.1, 2.0 + x];
        let u = d.project(&f);
        assert!(d.l2_error(&u, &f) < 1e-12);
    }

    #[test]
    fn state_eval_matches_manual_sum() {
        let m = rect_mesh(1, 1, [0.0, 1.0, 0.0, 1.0], RectTags::all_farfield()).unwrap();
        let d = Disc::new(&m, Scheme::DgP1).unwrap();
        let mut u = State::zeros(1, 3);
        *u.at_mut(0, 0, 0) = 1.0;
        *u.at_mut(0, 0, 1) = 0.5;
        *u.at_mut(0, 0, 2) = -0.25;
        let p = &d.vol[0][0];
        let val = u.eval(0, &p.phi);
        let manual = 1.0 * p.phi[0] + 0.5 * p.phi[1] - 0.25 * p.phi[2];
        assert!((val[0] - manual).abs() < 1e-15);
    }
}
