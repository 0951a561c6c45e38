//! 2D compressible Euler: state conversions, fluxes, Riemann solvers.
//!
//! Conservative variables `u = (rho, rho v1, rho v2, rho E)`, ideal gas
//! `p = (gamma - 1)(rho E - 0.5 rho |v|^2)`. Nondimensionalization:
//! `rho_inf = 1`, `a_inf = 1`, chord = 1, so `|v_inf| = Ma` and
//! `p_inf = 1/gamma`.

use crate::error::{Error, Result};
use crate::geom::Vec2;

pub const N_VARS: usize = 4;

/// Free-stream definition.
#[derive(Clone, Copy, Debug)]
pub struct Freestream {
    pub mach: f64,
    /// Angle of attack in degrees.
    pub aoa_deg: f64,
    pub gamma: f64,
}

impl Freestream {
    pub fn new(mach: f64, aoa_deg: f64, gamma: f64) -> Self {
        assert!(mach > 0.0 && gamma > 1.0);
        Freestream { mach, aoa_deg, gamma }
    }

    pub fn aoa_rad(&self) -> f64 {
        self.aoa_deg.to_radians()
    }

    pub fn velocity(&self) -> Vec2 {
        let a = self.aoa_rad();
        Vec2::new(self.mach * a.cos(), self.mach * a.sin())
    }

    /// Conservative free-stream state.
    pub fn state(&self) -> [f64; 4] {
        let v = self.velocity();
        let p = 1.0 / self.gamma;
        let e = p / (self.gamma - 1.0) + 0.5 * (v.x * v.x + v.y * v.y);
        [1.0, v.x, v.y, e]
    }

    pub fn pressure(&self) -> f64 {
        1.0 / self.gamma
    }

    /// Dynamic pressure 0.5 rho |v|^2.
    pub fn dynamic_pressure(&self) -> f64 {
        0.5 * self.mach * self.mach
    }
}

/// Primitive variables from a conservative state.
pub fn primitive(u: &[f64; 4], gamma: f64) -> Result<(f64, f64, f64, f64)> {
    let rho = u[0];
    if rho <= 0.0 {
        return Err(Error::InvalidState(format!("non-positive density {rho:e}")));
    }
    let v1 = u[1] / rho;
    let v2 = u[2] / rho;
    let p = (gamma - 1.0) * (u[3] - 0.5 * rho * (v1 * v1 + v2 * v2));
    if p <= 0.0 {
        return Err(Error::InvalidState(format!("non-positive pressure {p:e}")));
    }
    Ok((rho, v1, v2, p))
}

/// Pressure without positivity checks (for limiter internals).
pub fn pressure_raw(u: &[f64; 4], gamma: f64) -> f64 {
    (gamma - 1.0) * (u[3] - 0.5 * (u[1] * u[1] + u[2] * u[2]) / u[0])
}

/// Conservative state from primitives.
pub fn conservative(rho: f64, v1: f64, v2: f64, p: f64, gamma: f64) -> [f64; 4] {
    [
        rho,
        rho * v1,
        rho * v2,
        p / (gamma - 1.0) + 0.5 * rho * (v1 * v1 + v2 * v2),
    ]
}

pub fn sound_speed(rho: f64, p: f64, gamma: f64) -> f64 {
    (gamma * p / rho).sqrt()
}

/// Inviscid flux tensor, columns F1 and F2.
pub fn euler_flux(u: &[f64; 4], gamma: f64) -> Result<[[f64; 4]; 2]> {
    let (rho, v1, v2, p) = primitive(u, gamma)?;
    let ep = u[3] + p;
    let _ = rho;
    Ok([
        [u[1], u[1] * v1 + p, u[1] * v2, v1 * ep],
        [u[2], u[2] * v1, u[2] * v2 + p, v2 * ep],
    ])
}

/// Projected flux F(u) . n.
pub fn flux_dot_n(u: &[f64; 4], n: Vec2, gamma: f64) -> Result<[f64; 4]> {
    let (_, v1, v2, p) = primitive(u, gamma)?;
    let vn = v1 * n.x + v2 * n.y;
    Ok([
        u[0] * vn,
        u[1] * vn + p * n.x,
        u[2] * vn + p * n.y,
        (u[3] + p) * vn,
    ])
}

/// Analytic flux Jacobians dF1/du, dF2/du (used by the artificial-viscosity
/// strong residual).
pub fn flux_jacobians(u: &[f64; 4], gamma: f64) -> Result<([[f64; 4]; 4], [[f64; 4]; 4])> {
    let (rho, v1, v2, p) = primitive(u, gamma)?;
    let g1 = gamma - 1.0;
    let q = 0.5 * (v1 * v1 + v2 * v2);
    let h = (u[3] + p) / rho;
    let a1 = [
        [0.0, 1.0, 0.0, 0.0],
        [g1 * q - v1 * v1, (3.0 - gamma) * v1, -g1 * v2, g1],
        [-v1 * v2, v2, v1, 0.0],
        [v1 * (g1 * q - h), h - g1 * v1 * v1, -g1 * v1 * v2, gamma * v1],
    ];
    let a2 = [
        [0.0, 0.0, 1.0, 0.0],
        [-v1 * v2, v2, v1, 0.0],
        [g1 * q - v2 * v2, -g1 * v1, (3.0 - gamma) * v2, g1],
        [v2 * (g1 * q - h), -g1 * v1 * v2, h - g1 * v2 * v2, gamma * v2],
    ];
    Ok((a1, a2))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RiemannSolver {
    /// Local Lax-Friedrichs (default).
    Llf,
    Hllc,
}

/// Numerical face flux between trace states `ul`, `ur` across unit normal `n`.
pub fn riemann_flux(
    solver: RiemannSolver,
    ul: &[f64; 4],
    ur: &[f64; 4],
    n: Vec2,
    gamma: f64,
) -> Result<[f64; 4]> {
    match solver {
        RiemannSolver::Llf => llf_flux(ul, ur, n, gamma),
        RiemannSolver::Hllc => hllc_flux(ul, ur, n, gamma),
    }
}

pub fn llf_flux(ul: &[f64; 4], ur: &[f64; 4], n: Vec2, gamma: f64) -> Result<[f64; 4]> {
    let (rl, v1l, v2l, pl) = primitive(ul, gamma)?;
    let (rr, v1r, v2r, pr) = primitive(ur, gamma)?;
    let vnl = v1l * n.x + v2l * n.y;
    let vnr = v1r * n.x + v2r * n.y;
    let lam = (vnl.abs() + sound_speed(rl, pl, gamma)).max(vnr.abs() + sound_speed(rr, pr, gamma));
    let fl = flux_dot_n(ul, n, gamma)?;
    let fr = flux_dot_n(ur, n, gamma)?;
    let mut out = [0.0; 4];
    for m in 0..4 {
        out[m] = 0.5 * (fl[m] + fr[m]) - 0.5 * lam * (ur[m] - ul[m]);
    }
    Ok(out)
}

/// HLLC with Einfeldt-style wave speed estimates.
pub fn hllc_flux(ul: &[f64; 4], ur: &[f64; 4], n: Vec2, gamma: f64) -> Result<[f64; 4]> {
    let (rl, v1l, v2l, pl) = primitive(ul, gamma)?;
    let (rr, v1r, v2r, pr) = primitive(ur, gamma)?;
    let vnl = v1l * n.x + v2l * n.y;
    let vnr = v1r * n.x + v2r * n.y;
    let al = sound_speed(rl, pl, gamma);
    let ar = sound_speed(rr, pr, gamma);

    let sl = (vnl - al).min(vnr - ar);
    let sr = (vnl + al).max(vnr + ar);
    let sm = (pr - pl + rl * vnl * (sl - vnl) - rr * vnr * (sr - vnr))
        / (rl * (sl - vnl) - rr * (sr - vnr));

    if sl >= 0.0 {
        return flux_dot_n(ul, n, gamma);
    }
    if sr <= 0.0 {
        return flux_dot_n(ur, n, gamma);
    }

    let star = |u: &[f64; 4], rho: f64, vn: f64, p: f64, s: f64| -> [f64; 4] {
        let c = rho * (s - vn) / (s - sm);
        let e_star = u[3] / rho + (sm - vn) * (sm + p / (rho * (s - vn)));
        [
            c,
            c * (u[1] / rho + (sm - vn) * n.x),
            c * (u[2] / rho + (sm - vn) * n.y),
            c * e_star,
        ]
    };

    if sm >= 0.0 {
        let f = flux_dot_n(ul, n, gamma)?;
        let us = star(ul, rl, vnl, pl, sl);
        let mut out = [0.0; 4];
        for m in 0..4 {
            out[m] = f[m] + sl * (us[m] - ul[m]);
        }
        Ok(out)
    } else {
        let f = flux_dot_n(ur, n, gamma)?;
        let us = star(ur, rr, vnr, pr, sr);
        let mut out = [0.0; 4];
        for m in 0..4 {
            out[m] = f[m] + sr * (us[m] - ur[m]);
        }
        Ok(out)
    }
}

/// Mirror state for a slip wall: normal velocity reflected, density and
/// pressure (hence energy) unchanged.
pub fn mirror_state(u: &[f64; 4], n: Vec2) -> [f64; 4] {
    let mn = u[1] * n.x + u[2] * n.y;
    [
        u[0],
        u[1] - 2.0 * mn * n.x,
        u[2] - 2.0 * mn * n.y,
        u[3],
    ]
}

/// Max wave speed |v.n| + a over the two states (the LLF dissipation rate).
pub fn max_wave_speed(u: &[f64; 4], gamma: f64) -> Result<f64> {
    let (rho, v1, v2, p) = primitive(u, gamma)?;
    Ok((v1 * v1 + v2 * v2).sqrt() + sound_speed(rho, p, gamma))
}

/// Rotate a conservative state's velocity by `theta` (test helper for
/// rotational-invariance checks).
pub fn rotate_state(u: &[f64; 4], theta: f64) -> [f64; 4] {
    let (c, s) = (theta.cos(), theta.sin());
    [
        u[0],
        c * u[1] - s * u[2],
        s * u[1] + c * u[2],
        u[3],
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    const GAMMA: f64 = 1.4;

    #[test]
    fn primitive_stationary_gas() {
        let (rho, v1, v2, p) = primitive(&[1.0, 0.0, 0.0, 2.5], GAMMA).unwrap();
        assert_eq!((rho, v1, v2), (1.0, 0.0, 0.0));
        assert!((p - 1.0).abs() < 1e-15);
    }

    #[test]
    fn primitive_moving_gas() {
        let (_, v1, _, p) = primitive(&[1.0, 1.0, 0.0, 3.0], GAMMA).unwrap();
        assert_eq!(v1, 1.0);
        assert!((p - 1.0).abs() < 1e-15); // 0.4 * (3.0 - 0.5)
    }

    #[test]
    fn primitive_negative_energy_errors() {
        assert!(primitive(&[1.0, 0.0, 0.0, -1.0], GAMMA).is_err());
        assert!(primitive(&[-1.0, 0.0, 0.0, 1.0], GAMMA).is_err());
    }

    #[test]
    fn primitive_roundtrip() {
        let u = conservative(1.2, 0.3, -0.1, 0.9, GAMMA);
        let (rho, v1, v2, p) = primitive(&u, GAMMA).unwrap();
        let u2 = conservative(rho, v1, v2, p, GAMMA);
        for m in 0..4 {
            assert!((u[m] - u2[m]).abs() < 1e-14);
        }
    }

    #[test]
    fn flux_stationary_gas_is_pressure_only() {
        let f = euler_flux(&[1.0, 0.0, 0.0, 2.5], GAMMA).unwrap();
        let expect = [[0.0, 1.0, 0.0, 0.0], [0.0, 0.0, 1.0, 0.0]];
        for c in 0..2 {
            for m in 0..4 {
                assert!((f[c][m] - expect[c][m]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn flux_direct_substitution() {
        // v = (1, 0), p = 1, rho = 1, E = 3 => F1 = (1, 2, 0, 4)
        let f = euler_flux(&[1.0, 1.0, 0.0, 3.0], GAMMA).unwrap();
        for (a, b) in f[0].iter().zip([1.0, 2.0, 0.0, 4.0]) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn flux_rotational_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let u = conservative(
                0.5 + rng.gen::<f64>(),
                rng.gen::<f64>() - 0.5,
                rng.gen::<f64>() - 0.5,
                0.5 + rng.gen::<f64>(),
                GAMMA,
            );
            let theta = rng.gen::<f64>() * std::f64::consts::TAU;
            let n = Vec2::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5).normalized();
            let (c, s) = (theta.cos(), theta.sin());
            let n_rot = Vec2::new(c * n.x - s * n.y, s * n.x + c * n.y);
            let u_rot = rotate_state(&u, theta);
            // flux of rotated state across rotated normal = rotated flux
            let f = flux_dot_n(&u, n, GAMMA).unwrap();
            let f_rot = flux_dot_n(&u_rot, n_rot, GAMMA).unwrap();
            let expect = rotate_state(&f, theta);
            for m in 0..4 {
                assert!((f_rot[m] - expect[m]).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn riemann_consistency_free_stream() {
        let fs = Freestream::new(0.8, 1.25, GAMMA);
        let u = fs.state();
        let n = Vec2::new(0.6, 0.8);
        for solver in [RiemannSolver::Llf, RiemannSolver::Hllc] {
            let f = riemann_flux(solver, &u, &u, n, GAMMA).unwrap();
            let exact = flux_dot_n(&u, n, GAMMA).unwrap();
            for m in 0..4 {
                assert!((f[m] - exact[m]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn riemann_flip_conservation() {
        let ul = conservative(1.0, 0.4, 0.1, 1.0, GAMMA);
        let ur = conservative(0.7, -0.2, 0.3, 0.8, GAMMA);
        let n = Vec2::new(0.6, 0.8);
        for solver in [RiemannSolver::Llf, RiemannSolver::Hllc] {
            let f = riemann_flux(solver, &ul, &ur, n, GAMMA).unwrap();
            let g = riemann_flux(solver, &ur, &ul, -n, GAMMA).unwrap();
            for m in 0..4 {
                assert!((f[m] + g[m]).abs() < 1e-14, "{solver:?} var {m}");
            }
        }
    }

    #[test]
    fn llf_sod_states_hand_value() {
        // hand evaluation of the LLF formula at the Sod states
        let ul = [1.0, 0.0, 0.0, 2.5];
        let ur = [0.125, 0.0, 0.0, 0.25];
        let n = Vec2::new(1.0, 0.0);
        let f = llf_flux(&ul, &ur, n, GAMMA).unwrap();
        // lambda = max(a_l, a_r) = sqrt(1.4)
        let lam = 1.4f64.sqrt();
        let expect = [
            -0.5 * lam * (0.125 - 1.0),
            0.5 * (1.0 + 0.1),
            0.0,
            -0.5 * lam * (0.25 - 2.5),
        ];
        for m in 0..4 {
            assert!((f[m] - expect[m]).abs() < 1e-14, "var {m}: {} vs {}", f[m], expect[m]);
        }
    }

    #[test]
    fn mirror_state_reflects_normal_velocity() {
        let u = conservative(1.0, 0.5, 0.2, 1.0, GAMMA);
        let n = Vec2::new(0.0, 1.0);
        let m = mirror_state(&u, n);
        assert_eq!(m[0], u[0]);
        assert_eq!(m[1], u[1]);
        assert_eq!(m[2], -u[2]);
        assert_eq!(m[3], u[3]);
    }

    #[test]
    fn flux_jacobians_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let u = conservative(
                0.5 + rng.gen::<f64>(),
                rng.gen::<f64>() - 0.5,
                rng.gen::<f64>() - 0.5,
                0.5 + rng.gen::<f64>(),
                GAMMA,
            );
            let (a1, a2) = flux_jacobians(&u, GAMMA).unwrap();
            let h = 1e-7;
            for j in 0..4 {
                let mut up = u;
                let mut um = u;
                up[j] += h;
                um[j] -= h;
                let fp = euler_flux(&up, GAMMA).unwrap();
                let fm = euler_flux(&um, GAMMA).unwrap();
                for i in 0..4 {
                    let d1 = (fp[0][i] - fm[0][i]) / (2.0 * h);
                    let d2 = (fp[1][i] - fm[1][i]) / (2.0 * h);
                    assert!((a1[i][j] - d1).abs() < 1e-5, "A1[{i}][{j}]");
                    assert!((a2[i][j] - d2).abs() < 1e-5, "A2[{i}][{j}]");
                }
            }
        }
    }

    #[test]
    fn freestream_state_is_unit_sound_speed() {
        let fs = Freestream::new(0.8, 1.25, GAMMA);
        let u = fs.state();
        let (rho, v1, v2, p) = primitive(&u, GAMMA).unwrap();
        assert!((sound_speed(rho, p, GAMMA) - 1.0).abs() < 1e-14);
        assert!(((v1 * v1 + v2 * v2).sqrt() - 0.8).abs() < 1e-14);
    }
}
