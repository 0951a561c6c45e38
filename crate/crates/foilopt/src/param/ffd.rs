//! Free-form deformation with a 2D Bernstein tensor-product lattice.
//!
//! The 3D lattice form generalizes with a third Bernstein factor
//! `B_k^n(w)`; dropped here since the toolkit is 2D. Embedded local
//! coordinates `(u, v)` are computed once by damped Newton inversion of
//! the tensor map and stay fixed during deformation.

use crate::error::{Error, Result};
use crate::geom::Vec2;
use crate::mesh::Mesh;
use crate::param::{bernstein, bernstein_deriv, Parameterization, SurfaceDisplacement};

/// Which control-point displacement components are design variables.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FfdAxes {
    /// y-displacements only (default).
    Y,
    /// x then y displacements.
    Xy,
}

#[derive(Clone, Debug)]
pub struct FfdParam {
    /// Control points per direction: (l+1) x (m+1).
    pub nx: usize,
    pub ny: usize,
    /// Box corners.
    pub xmin: f64,
    pub ymin: f64,
    pub xmax: f64,
    pub ymax: f64,
    pub axes: FfdAxes,
    /// Bound as a fraction of the local lattice edge along the moved axis.
    pub bound_frac: f64,
    /// Baseline control-point coordinates, row-major `[i * ny + j]`.
    pub points: Vec<Vec2>,
    /// Embedded wall vertices and their fixed local coordinates.
    verts: Vec<usize>,
    local: Vec<(f64, f64)>,
}

impl FfdParam {
    /// Axis-aligned lattice around the wall vertices of `mesh`. All wall
    /// vertices must lie inside the box.
    pub fn new(
        mesh: &Mesh,
        nx: usize,
        ny: usize,
        corners: [f64; 4],
        axes: FfdAxes,
        bound_frac: f64,
    ) -> Result<Self> {
        if nx < 2 || ny < 2 {
            return Err(Error::Param("FFD lattice needs at least 2x2 control points".into()));
        }
        let [xmin, ymin, xmax, ymax] = corners;
        if xmax <= xmin || ymax <= ymin {
            return Err(Error::Param("FFD box corners are degenerate".into()));
        }
        let mut points = Vec::with_capacity(nx * ny);
        for i in 0..nx {
            for j in 0..ny {
                points.push(Vec2::new(
                    xmin + (xmax - xmin) * i as f64 / (nx - 1) as f64,
                    ymin + (ymax - ymin) * j as f64 / (ny - 1) as f64,
                ));
            }
        }
        let mut ffd = FfdParam {
            nx,
            ny,
            xmin,
            ymin,
            xmax,
            ymax,
            axes,
            bound_frac,
            points,
            verts: Vec::new(),
            local: Vec::new(),
        };
        let verts = mesh.wall_vertices();
        let mut local = Vec::with_capacity(verts.len());
        for &v in &verts {
            local.push(ffd.embed(mesh.vertices[v])?);
        }
        ffd.verts = verts;
        ffd.local = local;
        Ok(ffd)
    }

    /// Forward tensor map at local coordinates `(u, v)` with control points `p`.
    pub fn eval(&self, p: &[Vec2], u: f64, v: f64) -> Result<Vec2> {
        let (l, m) = (self.nx - 1, self.ny - 1);
        let mut out = Vec2::ZERO;
        for i in 0..self.nx {
            let bu = bernstein(i, l, u)?;
            if bu == 0.0 {
                continue;
            }
            for j in 0..self.ny {
                let bv = bernstein(j, m, v)?;
                out += p[i * self.ny + j] * (bu * bv);
            }
        }
        Ok(out)
    }

    fn eval_jacobian(&self, p: &[Vec2], u: f64, v: f64) -> Result<[[f64; 2]; 2]> {
        let (l, m) = (self.nx - 1, self.ny - 1);
        let mut du = Vec2::ZERO;
        let mut dv = Vec2::ZERO;
        for i in 0..self.nx {
            let bu = bernstein(i, l, u)?;
            let bu_d = bernstein_deriv(i, l, u)?;
            for j in 0..self.ny {
                let bv = bernstein(j, m, v)?;
                let bv_d = bernstein_deriv(j, m, v)?;
                let pt = p[i * self.ny + j];
                du += pt * (bu_d * bv);
                dv += pt * (bu * bv_d);
            }
        }
        Ok([[du.x, dv.x], [du.y, dv.y]])
    }

    /// Local coordinates of a physical point by damped Newton iteration.
    /// Converges to 1e-10 of the box diagonal; 50-iteration cap, step
    /// halving on residual increase.
    pub fn embed(&self, x: Vec2) -> Result<(f64, f64)> {
        let eps = 1e-12 * (self.xmax - self.xmin).max(self.ymax - self.ymin);
        if x.x < self.xmin - eps || x.x > self.xmax + eps || x.y < self.ymin - eps
            || x.y > self.ymax + eps
        {
            return Err(Error::PointOutsideBox { x: x.x, y: x.y });
        }
        let diag = Vec2::new(self.xmax - self.xmin, self.ymax - self.ymin).norm();
        let tol = 1e-10 * diag;

        let mut u = ((x.x - self.xmin) / (self.xmax - self.xmin)).clamp(0.0, 1.0);
        let mut v = ((x.y - self.ymin) / (self.ymax - self.ymin)).clamp(0.0, 1.0);
        let mut r = self.eval(&self.points, u, v)? - x;
        for _ in 0..50 {
            if r.norm() <= tol {
                return Ok((u, v));
            }
            let jac = self.eval_jacobian(&self.points, u, v)?;
            let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
            if det.abs() < 1e-30 {
                break;
            }
            let full = (
                (jac[1][1] * r.x - jac[0][1] * r.y) / det,
                (-jac[1][0] * r.x + jac[0][0] * r.y) / det,
            );
            // damp by halving while the residual grows
            let mut step = 1.0;
            loop {
                let (un, vn) = (
                    (u - step * full.0).clamp(0.0, 1.0),
                    (v - step * full.1).clamp(0.0, 1.0),
                );
                let rn = self.eval(&self.points, un, vn)? - x;
                if rn.norm() < r.norm() || step < 1e-8 {
                    u = un;
                    v = vn;
                    r = rn;
                    break;
                }
                step *= 0.5;
            }
        }
        if r.norm() <= tol {
            Ok((u, v))
        } else {
            Err(Error::EmbedNonConvergence {
                x: x.x,
                y: x.y,
                residual: r.norm(),
            })
        }
    }

    /// Design-variable count per axis block.
    fn per_axis(&self) -> usize {
        self.nx * self.ny
    }

    /// Control-point displacements from a design vector: y-block first in
    /// `FfdAxes::Xy` ordering is (x-block, y-block).
    pub fn control_displacements(&self, d: &[f64]) -> Result<Vec<Vec2>> {
        let n = self.per_axis();
        let mut dp = vec![Vec2::ZERO; n];
        match self.axes {
            FfdAxes::Y => {
                if d.len() != n {
                    return Err(Error::Dimension(format!(
                        "design vector has {} entries, expected {n}",
                        d.len()
                    )));
                }
                for (k, &dy) in d.iter().enumerate() {
                    dp[k].y = dy;
                }
            }
            FfdAxes::Xy => {
                if d.len() != 2 * n {
                    return Err(Error::Dimension(format!(
                        "design vector has {} entries, expected {}",
                        d.len(),
                        2 * n
                    )));
                }
                for k in 0..n {
                    dp[k].x = d[k];
                    dp[k].y = d[n + k];
                }
            }
        }
        Ok(dp)
    }

    /// Embedded local coordinates of the wall vertices, in `verts` order.
    pub fn local_coords(&self) -> &[(f64, f64)] {
        &self.local
    }

    pub fn wall_verts(&self) -> &[usize] {
        &self.verts
    }
}

impl Parameterization for FfdParam {
    fn n_design(&self) -> usize {
        match self.axes {
            FfdAxes::Y => self.per_axis(),
            FfdAxes::Xy => 2 * self.per_axis(),
        }
    }

    fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        // local lattice edge along the moved axis
        let ex = (self.xmax - self.xmin) / (self.nx - 1) as f64;
        let ey = (self.ymax - self.ymin) / (self.ny - 1) as f64;
        let n = self.per_axis();
        let mut upper = Vec::with_capacity(self.n_design());
        match self.axes {
            FfdAxes::Y => upper.extend(std::iter::repeat(self.bound_frac * ey).take(n)),
            FfdAxes::Xy => {
                upper.extend(std::iter::repeat(self.bound_frac * ex).take(n));
                upper.extend(std::iter::repeat(self.bound_frac * ey).take(n));
            }
        }
        let lower = upper.iter().map(|&b| -b).collect();
        (lower, upper)
    }

    fn surface_displacement(&self, d: &[f64]) -> Result<SurfaceDisplacement> {
        let dp = self.control_displacements(d)?;
        let mut out = SurfaceDisplacement::zeros(self.verts.clone());
        let (l, m) = (self.nx - 1, self.ny - 1);
        for (k, &(u, v)) in self.local.iter().enumerate() {
            let mut dx = Vec2::ZERO;
            for i in 0..self.nx {
                let bu = bernstein(i, l, u)?;
                if bu == 0.0 {
                    continue;
                }
                for j in 0..self.ny {
                    let bv = bernstein(j, m, v)?;
                    dx += dp[i * self.ny + j] * (bu * bv);
                }
            }
            out.disp[k] = [dx.x, dx.y];
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::gen::{naca0012, omesh};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn airfoil_box() -> [f64; 4] {
        [-0.05, -0.1, 1.05, 0.1]
    }

    fn small_mesh() -> Mesh {
        omesh(&naca0012(32), 4, 10.0, 1.6).unwrap()
    }

    #[test]
    fn embed_affine_lattice_midpoint() {
        let m = small_mesh();
        let ffd = FfdParam::new(&m, 2, 2, [0.0, -1.0, 2.0, 1.0], FfdAxes::Y, 0.25);
        // wall vertices must be inside; this box contains the airfoil
        let ffd = ffd.unwrap();
        let (u, v) = ffd.embed(Vec2::new(1.0, 0.0)).unwrap();
        assert!((u - 0.5).abs() < 1e-12);
        assert!((v - 0.5).abs() < 1e-12);
    }

    #[test]
    fn embed_corner_is_exact() {
        let m = small_mesh();
        let ffd = FfdParam::new(&m, 3, 2, [0.0, -1.0, 2.0, 1.0], FfdAxes::Y, 0.25).unwrap();
        let (u, v) = ffd.embed(Vec2::new(0.0, -1.0)).unwrap();
        assert_eq!((u, v), (0.0, 0.0));
        let (u, v) = ffd.embed(Vec2::new(2.0, 1.0)).unwrap();
        assert_eq!((u, v), (1.0, 1.0));
    }

    #[test]
    fn embed_roundtrip_random_points() {
        let m = small_mesh();
        let ffd = FfdParam::new(&m, 4, 3, airfoil_box(), FfdAxes::Y, 0.25).unwrap();
        let diag = Vec2::new(ffd.xmax - ffd.xmin, ffd.ymax - ffd.ymin).norm();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let p = Vec2::new(
                ffd.xmin + rng.gen::<f64>() * (ffd.xmax - ffd.xmin),
                ffd.ymin + rng.gen::<f64>() * (ffd.ymax - ffd.ymin),
            );
            let (u, v) = ffd.embed(p).unwrap();
            assert!((0.0..=1.0).contains(&u) && (0.0..=1.0).contains(&v));
            let q = ffd.eval(&ffd.points, u, v).unwrap();
            assert!(q.dist(p) < 1e-10 * diag, "roundtrip error {}", q.dist(p));
        }
    }

    #[test]
    fn point_outside_box_errors() {
        let m = small_mesh();
        let ffd = FfdParam::new(&m, 2, 2, airfoil_box(), FfdAxes::Y, 0.25).unwrap();
        assert!(matches!(
            ffd.embed(Vec2::new(5.0, 0.0)),
            Err(Error::PointOutsideBox { .. })
        ));
    }

    #[test]
    fn zero_displacement_is_identity() {
        let m = small_mesh();
        let ffd = FfdParam::new(&m, 4, 2, airfoil_box(), FfdAxes::Y, 0.25).unwrap();
        let s = ffd.surface_displacement(&vec![0.0; ffd.n_design()]).unwrap();
        assert_eq!(s.max_norm(), 0.0);
    }

    #[test]
    fn uniform_control_shift_translates_embedded_points() {
        // partition of unity: uniform dP = (0, c) moves every point by (0, c)
        let m = small_mesh();
        let ffd = FfdParam::new(&m, 4, 3, airfoil_box(), FfdAxes::Y, 0.25).unwrap();
        let c = 0.0123;
        let d = vec![c; ffd.n_design()];
        let s = ffd.surface_displacement(&d).unwrap();
        for disp in &s.disp {
            assert!(disp[0].abs() < 1e-14);
            assert!((disp[1] - c).abs() < 1e-13);
        }
    }

    #[test]
    fn single_control_point_matches_direct_summation() {
        let m = small_mesh();
        let ffd = FfdParam::new(&m, 4, 2, airfoil_box(), FfdAxes::Y, 0.25).unwrap();
        let mut d = vec![0.0; ffd.n_design()];
        let moved = 3; // control point (i=1, j=1)
        d[moved] = 0.02;
        let s = ffd.surface_displacement(&d).unwrap();
        let (l, mm) = (ffd.nx - 1, ffd.ny - 1);
        let (i, j) = (moved / ffd.ny, moved % ffd.ny);
        for (k, &(u, v)) in ffd.local_coords().iter().enumerate() {
            let expect = 0.02 * bernstein(i, l, u).unwrap() * bernstein(j, mm, v).unwrap();
            assert!((s.disp[k][1] - expect).abs() < 1e-14);
        }
    }

    #[test]
    fn linearity_in_design_vector() {
        let m = small_mesh();
        let ffd = FfdParam::new(&m, 3, 2, airfoil_box(), FfdAxes::Xy, 0.25).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let d1: Vec<f64> = (0..ffd.n_design()).map(|_| 0.01 * (rng.gen::<f64>() - 0.5)).collect();
        let d2: Vec<f64> = (0..ffd.n_design()).map(|_| 0.01 * (rng.gen::<f64>() - 0.5)).collect();
        let (a, b) = (2.0, -0.7);
        let comb: Vec<f64> = d1.iter().zip(&d2).map(|(x, y)| a * x + b * y).collect();
        let s1 = ffd.surface_displacement(&d1).unwrap();
        let s2 = ffd.surface_displacement(&d2).unwrap();
        let sc = ffd.surface_displacement(&comb).unwrap();
        for k in 0..s1.disp.len() {
            for c in 0..2 {
                let lin = a * s1.disp[k][c] + b * s2.disp[k][c];
                assert!((lin - sc.disp[k][c]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn bounds_scale_with_lattice_edge() {
        let m = small_mesh();
        let ffd = FfdParam::new(&m, 5, 3, [0.0, -0.2, 1.0, 0.2], FfdAxes::Y, 0.25).unwrap();
        let (lo, hi) = ffd.bounds();
        // y edge = 0.4 / 2 = 0.2; bound = 0.05
        for (&l, &u) in lo.iter().zip(&hi) {
            assert!((u - 0.05).abs() < 1e-15);
            assert!((l + 0.05).abs() < 1e-15);
        }
    }
}
