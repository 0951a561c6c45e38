//! Shape parameterization: maps a design vector to wall-vertex displacements.
//!
//! Both parameterizations are linear in the design vector and reproduce the
//! baseline exactly at `d = 0`.

pub mod ffd;
pub mod hicks_henne;

pub use ffd::FfdParam;
pub use hicks_henne::HicksHenneParam;

use crate::error::{Error, Result};

/// Wall-vertex displacements, indexed by mesh vertex id (sorted).
#[derive(Clone, Debug, Default)]
pub struct SurfaceDisplacement {
    pub verts: Vec<usize>,
    pub disp: Vec<[f64; 2]>,
}

impl SurfaceDisplacement {
    pub fn zeros(verts: Vec<usize>) -> Self {
        let n = verts.len();
        SurfaceDisplacement {
            verts,
            disp: vec![[0.0; 2]; n],
        }
    }

    pub fn max_norm(&self) -> f64 {
        self.disp
            .iter()
            .map(|d| (d[0] * d[0] + d[1] * d[1]).sqrt())
            .fold(0.0, f64::max)
    }
}

/// Binomial coefficient C(l, i) as f64.
fn binomial(l: usize, i: usize) -> f64 {
    let mut c = 1.0;
    for k in 0..i.min(l - i) {
        c = c * (l - k) as f64 / (k + 1) as f64;
    }
    c
}

/// Bernstein polynomial B_i^l(u) = C(l,i) u^i (1-u)^(l-i).
pub fn bernstein(i: usize, l: usize, u: f64) -> Result<f64> {
    if i > l {
        return Err(Error::Param(format!("bernstein index {i} out of range for degree {l}")));
    }
    Ok(binomial(l, i) * u.powi(i as i32) * (1.0 - u).powi((l - i) as i32))
}

/// d/du B_i^l(u) = l (B_{i-1}^{l-1} - B_i^{l-1}).
pub fn bernstein_deriv(i: usize, l: usize, u: f64) -> Result<f64> {
    if i > l {
        return Err(Error::Param(format!("bernstein index {i} out of range for degree {l}")));
    }
    if l == 0 {
        return Ok(0.0);
    }
    let lower = if i > 0 { bernstein(i - 1, l - 1, u)? } else { 0.0 };
    let upper = if i < l { bernstein(i, l - 1, u)? } else { 0.0 };
    Ok(l as f64 * (lower - upper))
}

/// The design-vector interface shared by parameterizations.
pub trait Parameterization {
    fn n_design(&self) -> usize;

    /// Per-variable box bounds (lower, upper).
    fn bounds(&self) -> (Vec<f64>, Vec<f64>);

    /// Wall displacements for the design vector `d` relative to the baseline.
    fn surface_displacement(&self, d: &[f64]) -> Result<SurfaceDisplacement>;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bernstein_endpoint() {
        assert_eq!(bernstein(0, 2, 0.0).unwrap(), 1.0);
        assert_eq!(bernstein(2, 2, 1.0).unwrap(), 1.0);
    }

    #[test]
    fn bernstein_midpoint() {
        assert!((bernstein(1, 2, 0.5).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn bernstein_partition_of_unity() {
        let u = 0.37;
        let s: f64 = (0..=5).map(|i| bernstein(i, 5, u).unwrap()).sum();
        assert!((s - 1.0).abs() < 1e-14);
    }

    #[test]
    fn bernstein_index_out_of_range() {
        assert!(bernstein(3, 2, 0.5).is_err());
    }

    #[test]
    fn bernstein_deriv_matches_fd() {
        for l in 1..=4 {
            for i in 0..=l {
                for &u in &[0.1, 0.33, 0.5, 0.9] {
                    let h = 1e-7;
                    let fd = (bernstein(i, l, u + h).unwrap() - bernstein(i, l, u - h).unwrap())
                        / (2.0 * h);
                    let an = bernstein_deriv(i, l, u).unwrap();
                    assert!((fd - an).abs() < 1e-7, "l={l} i={i} u={u}");
                }
            }
        }
    }
}
