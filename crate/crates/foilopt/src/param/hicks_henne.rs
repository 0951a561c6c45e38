//! Hicks-Henne bump parameterization for 2D airfoils.
//!
//! Bump basis `b_i(x) = sin^t(pi x^{beta_i})` with `beta_i = ln 0.5 / ln p_i`,
//! so each bump peaks at `x = p_i` with unit value. Peaks are cosine-spaced:
//! `p_i = 0.5 (1 - cos(i pi / (N+1)))`, `i = 1..N`. The design vector holds
//! `N` upper-surface amplitudes followed by `N` lower-surface amplitudes;
//! displacements act on the y-coordinate only.

use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::param::{Parameterization, SurfaceDisplacement};

#[derive(Clone, Debug)]
pub struct HicksHenneParam {
    /// Bumps per side.
    pub n_bumps: usize,
    /// Width exponent; 3 by default.
    pub t: f64,
    /// Peak positions, strictly increasing in (0, 1).
    pub peaks: Vec<f64>,
    /// Derived exponents beta_i = ln 0.5 / ln p_i.
    pub betas: Vec<f64>,
    /// Amplitude bound (chord units), symmetric per variable.
    pub bound: f64,
    /// Wall vertex ids (sorted) with normalized chordwise coordinate and side.
    verts: Vec<usize>,
    xhat: Vec<f64>,
    upper: Vec<bool>,
}

impl HicksHenneParam {
    /// Builds the parameterization for the wall vertices of `mesh`.
    /// Chordwise coordinates are normalized by the wall's x-extent; the side
    /// assignment is by sign of y relative to the chord line y = 0.
    pub fn new(mesh: &Mesh, n_bumps: usize, t: f64, bound: f64) -> Result<Self> {
        if n_bumps == 0 {
            return Err(Error::Param("need at least one bump per side".into()));
        }
        let peaks: Vec<f64> = (1..=n_bumps)
            .map(|i| 0.5 * (1.0 - (i as f64 * std::f64::consts::PI / (n_bumps as f64 + 1.0)).cos()))
            .collect();
        let betas = peaks.iter().map(|&p| 0.5f64.ln() / p.ln()).collect();

        let verts = mesh.wall_vertices();
        if verts.is_empty() {
            return Err(Error::Param("mesh has no wall vertices".into()));
        }
        let (mut xmin, mut xmax) = (f64::INFINITY, f64::NEG_INFINITY);
        for &v in &verts {
            xmin = xmin.min(mesh.vertices[v].x);
            xmax = xmax.max(mesh.vertices[v].x);
        }
        let span = xmax - xmin;
        if span <= 0.0 {
            return Err(Error::Param("degenerate wall x-extent".into()));
        }
        let mut xhat = Vec::with_capacity(verts.len());
        let mut upper = Vec::with_capacity(verts.len());
        for &v in &verts {
            let x = (mesh.vertices[v].x - xmin) / span;
            if !(-1e-12..=1.0 + 1e-12).contains(&x) {
                return Err(Error::Param(format!(
                    "wall vertex {v} has chordwise coordinate {x} outside [0, 1]"
                )));
            }
            xhat.push(x.clamp(0.0, 1.0));
            upper.push(mesh.vertices[v].y >= 0.0);
        }
        Ok(HicksHenneParam {
            n_bumps,
            t,
            peaks,
            betas,
            bound,
            verts,
            xhat,
            upper,
        })
    }

    /// Basis value b_i(x) = sin^t(pi x^{beta_i}).
    pub fn basis(&self, x: f64, i: usize) -> f64 {
        debug_assert!(i < self.n_bumps);
        if x <= 0.0 || x >= 1.0 {
            return 0.0;
        }
        (std::f64::consts::PI * x.powf(self.betas[i])).sin().powf(self.t)
    }
}

impl Parameterization for HicksHenneParam {
    fn n_design(&self) -> usize {
        2 * self.n_bumps
    }

    fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        (
            vec![-self.bound; self.n_design()],
            vec![self.bound; self.n_design()],
        )
    }

    fn surface_displacement(&self, d: &[f64]) -> Result<SurfaceDisplacement> {
        if d.len() != self.n_design() {
            return Err(Error::Dimension(format!(
                "design vector has {} entries, expected {}",
                d.len(),
                self.n_design()
            )));
        }
        let mut out = SurfaceDisplacement::zeros(self.verts.clone());
        for (k, (&x, &up)) in self.xhat.iter().zip(&self.upper).enumerate() {
            let amps = if up {
                &d[..self.n_bumps]
            } else {
                &d[self.n_bumps..]
            };
            let mut dy = 0.0;
            for (i, &a) in amps.iter().enumerate() {
                if a != 0.0 {
                    dy += a * self.basis(x, i);
                }
            }
            out.disp[k] = [0.0, dy];
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::gen::{naca0012, omesh};

    fn small_airfoil_mesh() -> Mesh {
        omesh(&naca0012(32), 4, 10.0, 1.6).unwrap()
    }

    #[test]
    fn basis_peaks_at_unit_value() {
        let m = small_airfoil_mesh();
        let hh = HicksHenneParam::new(&m, 16, 3.0, 0.05).unwrap();
        for i in 0..16 {
            let b = hh.basis(hh.peaks[i], i);
            assert!((b - 1.0).abs() < 1e-12, "bump {i}: {b}");
        }
    }

    #[test]
    fn basis_vanishes_at_endpoints() {
        let m = small_airfoil_mesh();
        let hh = HicksHenneParam::new(&m, 4, 3.0, 0.05).unwrap();
        for i in 0..4 {
            assert_eq!(hh.basis(0.0, i), 0.0);
            assert_eq!(hh.basis(1.0, i), 0.0);
        }
    }

    #[test]
    fn peak_positions_cosine_spaced() {
        // t = 3, N = 16: p_i = 0.5 (1 - cos(i pi / 17))
        let m = small_airfoil_mesh();
        let hh = HicksHenneParam::new(&m, 16, 3.0, 0.05).unwrap();
        for i in 1..=16 {
            let expect = 0.5 * (1.0 - (i as f64 * std::f64::consts::PI / 17.0).cos());
            assert!((hh.peaks[i - 1] - expect).abs() < 1e-15);
        }
        for w in hh.peaks.windows(2) {
            assert!(w[0] < w[1]);
        }
    }

    #[test]
    fn zero_design_is_identity() {
        let m = small_airfoil_mesh();
        let hh = HicksHenneParam::new(&m, 8, 3.0, 0.05).unwrap();
        let d = vec![0.0; hh.n_design()];
        let s = hh.surface_displacement(&d).unwrap();
        assert_eq!(s.max_norm(), 0.0);
    }

    #[test]
    fn single_bump_profile_is_proportional_to_basis() {
        let m = small_airfoil_mesh();
        let hh = HicksHenneParam::new(&m, 8, 3.0, 0.05).unwrap();
        let mut d = vec![0.0; hh.n_design()];
        d[3] = 0.01;
        let s = hh.surface_displacement(&d).unwrap();
        for (k, &v) in s.verts.iter().enumerate() {
            let up = m.vertices[v].y >= 0.0;
            let expect = if up { 0.01 * hh.basis(hh.xhat[k], 3) } else { 0.0 };
            assert!((s.disp[k][1] - expect).abs() < 1e-15);
            assert_eq!(s.disp[k][0], 0.0);
        }
    }

    #[test]
    fn linearity_in_amplitudes() {
        let m = small_airfoil_mesh();
        let hh = HicksHenneParam::new(&m, 6, 3.0, 0.05).unwrap();
        let d1: Vec<f64> = (0..12).map(|i| 0.001 * (i as f64 + 1.0)).collect();
        let d2: Vec<f64> = (0..12).map(|i| -0.002 * (i as f64 - 5.0)).collect();
        let sum: Vec<f64> = d1.iter().zip(&d2).map(|(a, b)| a + b).collect();
        let s1 = hh.surface_displacement(&d1).unwrap();
        let s2 = hh.surface_displacement(&d2).unwrap();
        let s12 = hh.surface_displacement(&sum).unwrap();
        for k in 0..s1.verts.len() {
            assert!((s1.disp[k][1] + s2.disp[k][1] - s12.disp[k][1]).abs() < 1e-12);
        }
    }
}
