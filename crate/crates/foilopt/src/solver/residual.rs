//! Spatial residual assembly for all four schemes.
//!
//! The residual of element `e`, basis `i` is
//!
//! ```text
//! R_e^i = sum_faces  int F_hat(U-, U+, n) phi_i dGamma
//!       - int_elem   F(U_h) . grad phi_i dOmega
//!       + eps_e int_elem grad U_h . grad phi_i dOmega
//!       - int_elem   S phi_i dOmega
//! ```
//!
//! FV schemes have a constant basis, so only the face term and source
//! survive. FV2 reconstructs limited linear traces on the fly; the
//! reconstruction feeds the face fluxes only, the stored unknowns stay
//! cell averages. Boundary conditions enter through ghost states: mirror
//! state at walls, free stream at far fields, or a Dirichlet override used
//! by manufactured-solution tests.
//!
//! `Freeze` pins the artificial-viscosity coefficients and FV2 limiter
//! scalings at a linearization state so the finite-difference Jacobian
//! differentiates a smooth residual surrogate.

use crate::disc::{Disc, Scheme, State};
use crate::error::Result;
use crate::euler::{
    flux_jacobians, mirror_state, riemann_flux, Freestream, N_VARS,
};
use crate::geom::Vec2;
use crate::solver::{AvIndicator, AvVariant, SolverConfig};

/// Optional residual hooks: a volume source term and a Dirichlet ghost-state
/// override applied at every boundary face (both used by MMS tests).
#[derive(Default, Clone, Copy)]
pub struct Hooks<'a> {
    pub source: Option<&'a dyn Fn(f64, f64) -> [f64; N_VARS]>,
    pub dirichlet: Option<&'a dyn Fn(f64, f64) -> [f64; N_VARS]>,
    /// Pinned FV2 limiter scalings; when set, reconstruction never
    /// recomputes them (steady solves use this to escape limit cycles and
    /// the gradient chain to differentiate a fixed operator).
    pub fv2_limiter: Option<&'a [[f64; N_VARS]]>,
}

/// Frozen nonlinearities for Jacobian assembly.
#[derive(Clone, Debug)]
pub struct Freeze {
    /// Artificial-viscosity coefficient per element (zero for FV).
    pub av: Vec<f64>,
    /// FV2 Barth-Jespersen scaling per element and variable.
    pub limiter: Option<Vec<[f64; N_VARS]>>,
}

/// FV2 reconstruction data: Green-Gauss gradients and limiter scalings.
#[derive(Clone, Debug)]
pub struct Recon {
    pub grad: Vec<[Vec2; N_VARS]>,
    pub alpha: Vec<[f64; N_VARS]>,
}

/// Green-Gauss gradient of the cell averages for one element. Boundary
/// faces use the ghost-state average (mirror, free stream, or Dirichlet):
/// taking the cell average itself there is a first-order inflow error
/// that convects across the whole domain.
pub fn green_gauss(
    disc: &Disc,
    u: &State,
    e: usize,
    fs: &Freestream,
    hooks: &Hooks,
) -> [Vec2; N_VARS] {
    let ue = u.avg(e);
    let mut g = [Vec2::ZERO; N_VARS];
    for &f in &disc.mesh.elem_faces[e] {
        let face = &disc.mesh.faces[f];
        let fd = &disc.face[f];
        // fd.normal is outward for the left element
        let sign = if face.left == e { 1.0 } else { -1.0 };
        let n = fd.normal;
        let uf = match other_side(face.left, face.right, e) {
            Some(nb) => {
                let un = u.avg(nb);
                [
                    0.5 * (ue[0] + un[0]),
                    0.5 * (ue[1] + un[1]),
                    0.5 * (ue[2] + un[2]),
                    0.5 * (ue[3] + un[3]),
                ]
            }
            None => {
                // Dirichlet data IS the face value; wall/far-field faces use
                // the ghost average (the slip-wall projection is physical)
                let pure = hooks.dirichlet.is_some();
                let mut acc = [0.0; N_VARS];
                for p in &fd.points {
                    let ghost = ghost_state(disc, f, &ue, p.x, p.y, fs, hooks);
                    for m in 0..N_VARS {
                        acc[m] += p.w
                            * if pure {
                                ghost[m]
                            } else {
                                0.5 * (ue[m] + ghost[m])
                            };
                    }
                }
                for a in &mut acc {
                    *a /= fd.len;
                }
                acc
            }
        };
        for m in 0..N_VARS {
            g[m] += n * (sign * fd.len * uf[m]);
        }
    }
    let inv_a = 1.0 / disc.geom[e].area;
    for gm in &mut g {
        *gm = *gm * inv_a;
    }
    g
}

fn other_side(left: usize, right: Option<usize>, e: usize) -> Option<usize> {
    if left == e {
        right
    } else {
        Some(left)
    }
}

/// Barth-Jespersen scaling for one element given its gradient. Boundary
/// ghost states widen the bounds: without them every boundary cell with a
/// gradient clips its outward extrapolation, an O(1) flux inconsistency.
pub fn barth_jespersen(
    disc: &Disc,
    u: &State,
    e: usize,
    grad: &[Vec2; N_VARS],
    fs: &Freestream,
    hooks: &Hooks,
) -> [f64; N_VARS] {
    let ue = u.avg(e);
    let mut umin = ue;
    let mut umax = ue;
    for nb in disc.mesh.neighbors(e) {
        let un = u.avg(nb);
        for m in 0..N_VARS {
            umin[m] = umin[m].min(un[m]);
            umax[m] = umax[m].max(un[m]);
        }
    }
    for &f in &disc.mesh.elem_faces[e] {
        if disc.mesh.faces[f].right.is_none() {
            for p in &disc.face[f].points {
                let ghost = ghost_state(disc, f, &ue, p.x, p.y, fs, hooks);
                for m in 0..N_VARS {
                    umin[m] = umin[m].min(ghost[m]);
                    umax[m] = umax[m].max(ghost[m]);
                }
            }
        }
    }
    let xc = disc.geom[e].centroid;
    let mut alpha = [1.0f64; N_VARS];
    for &f in &disc.mesh.elem_faces[e] {
        for p in &disc.face[f].points {
            let r = Vec2::new(p.x, p.y) - xc;
            for m in 0..N_VARS {
                let d = grad[m].dot(r);
                let a = if d > 1e-14 {
                    ((umax[m] - ue[m]) / d).min(1.0)
                } else if d < -1e-14 {
                    ((umin[m] - ue[m]) / d).min(1.0)
                } else {
                    1.0
                };
                alpha[m] = alpha[m].min(a.max(0.0));
            }
        }
    }
    alpha
}

/// FV2 reconstruction for all elements; `frozen_alpha` reuses limiter
/// scalings from a linearization state.
pub fn reconstruct_fv2(
    disc: &Disc,
    u: &State,
    fs: &Freestream,
    hooks: &Hooks,
    frozen_alpha: Option<&[[f64; N_VARS]]>,
) -> Recon {
    let ne = disc.n_elements();
    let mut grad = Vec::with_capacity(ne);
    for e in 0..ne {
        grad.push(green_gauss(disc, u, e, fs, hooks));
    }
    let alpha = match frozen_alpha {
        Some(a) => a.to_vec(),
        None => (0..ne)
            .map(|e| barth_jespersen(disc, u, e, &grad[e], fs, hooks))
            .collect(),
    };
    Recon { grad, alpha }
}

/// Limited linear trace of element `e` at a point (FV2 only).
#[inline]
fn fv2_trace(disc: &Disc, u: &State, recon: &Recon, e: usize, x: f64, y: f64) -> [f64; N_VARS] {
    let ue = u.avg(e);
    let r = Vec2::new(x, y) - disc.geom[e].centroid;
    let mut out = [0.0; N_VARS];
    for m in 0..N_VARS {
        out[m] = ue[m] + recon.alpha[e][m] * recon.grad[e][m].dot(r);
    }
    out
}

/// Trace of the scheme's flux representation at a cached face point.
#[inline]
fn face_trace(
    disc: &Disc,
    u: &State,
    recon: Option<&Recon>,
    e: usize,
    phi: &[f64],
    x: f64,
    y: f64,
) -> [f64; N_VARS] {
    match recon {
        Some(rc) => fv2_trace(disc, u, rc, e, x, y),
        None => u.eval(e, phi),
    }
}

/// Strong-form divergence of the flux at a volume point.
fn strong_divergence(u_pt: &[f64; N_VARS], grads: &[Vec2; N_VARS], gamma: f64) -> Result<[f64; N_VARS]> {
    let (a1, a2) = flux_jacobians(u_pt, gamma)?;
    let mut div = [0.0; N_VARS];
    for i in 0..N_VARS {
        for j in 0..N_VARS {
            div[i] += a1[i][j] * grads[j].x + a2[i][j] * grads[j].y;
        }
    }
    Ok(div)
}

/// Artificial-viscosity coefficient of one element (DG schemes only).
/// A manufactured source is subtracted from the strong residual so the
/// coefficient measures the deviation from the governing equations, not
/// the source itself.
pub fn av_coefficient(
    disc: &Disc,
    u: &State,
    e: usize,
    cfg: &SolverConfig,
    gamma: f64,
    source: Option<&dyn Fn(f64, f64) -> [f64; N_VARS]>,
) -> Result<f64> {
    if !disc.scheme.is_dg() || cfg.av_c_eps == 0.0 {
        return Ok(0.0);
    }
    if let AvIndicator::ModalDecay { cutoff } = cfg.av_indicator {
        if modal_ratio(disc, u, e) <= cutoff {
            return Ok(0.0);
        }
    }
    let g = &disc.geom[e];
    let scale = cfg.av_c_eps * g.h.powf(2.0 - cfg.av_beta);
    match cfg.av_variant {
        AvVariant::VolumeResidual => {
            let mut acc = 0.0;
            for p in &disc.vol[e] {
                let u_pt = u.eval(e, &p.phi);
                let grads = u.eval_grad(e, &p.grad);
                let mut div = strong_divergence(&u_pt, &grads, gamma)?;
                if let Some(src) = source {
                    let sv = src(p.x, p.y);
                    for (d, sv) in div.iter_mut().zip(sv) {
                        *d -= sv;
                    }
                }
                let norm = div.iter().map(|d| d * d).sum::<f64>().sqrt();
                acc += p.w * norm;
            }
            Ok(scale * acc / g.area)
        }
        AvVariant::FaceFlux => {
            let mut acc = 0.0;
            let mut perimeter = 0.0;
            for &f in &disc.mesh.elem_faces[e] {
                let fd = &disc.face[f];
                perimeter += fd.len;
                let own_left = disc.mesh.faces[f].left == e;
                for p in &fd.points {
                    let phi = if own_left { &p.phi_left } else { &p.phi_right };
                    let u_pt = u.eval(e, phi);
                    let fl = crate::euler::euler_flux(&u_pt, gamma)?;
                    let norm = fl
                        .iter()
                        .flat_map(|col| col.iter())
                        .map(|v| v * v)
                        .sum::<f64>()
                        .sqrt();
                    acc += p.w * norm;
                }
            }
            Ok(scale * acc / perimeter)
        }
    }
}

/// Highest-mode energy fraction of the density (crude modal-decay gate).
fn modal_ratio(disc: &Disc, u: &State, e: usize) -> f64 {
    let nk = disc.nk;
    let top = match disc.scheme {
        Scheme::DgP1 => 1..3,
        Scheme::DgP2 => 3..6,
        _ => return 0.0,
    };
    let mut top_sum = 0.0;
    let mut all = 0.0;
    for k in 0..nk {
        let c = u.at(e, 0, k);
        all += c * c;
        if top.contains(&k) {
            top_sum += c * c;
        }
    }
    top_sum / (all + 1e-300)
}

/// Computes the frozen nonlinearities at a linearization state. A pinned
/// limiter in `hooks` takes precedence over the live scalings.
pub fn compute_freeze(
    disc: &Disc,
    u: &State,
    cfg: &SolverConfig,
    fs: &Freestream,
    hooks: &Hooks,
) -> Result<Freeze> {
    let ne = disc.n_elements();
    let mut av = vec![0.0; ne];
    if disc.scheme.is_dg() {
        for (e, slot) in av.iter_mut().enumerate() {
            *slot = av_coefficient(disc, u, e, cfg, fs.gamma, hooks.source)?;
        }
    }
    let limiter = if disc.scheme == Scheme::Fv2 {
        match hooks.fv2_limiter {
            Some(a) => Some(a.to_vec()),
            None => Some(reconstruct_fv2(disc, u, fs, hooks, None).alpha),
        }
    } else {
        None
    };
    Ok(Freeze { av, limiter })
}

/// Ghost state for a boundary face point.
#[inline]
fn ghost_state(
    disc: &Disc,
    f: usize,
    trace: &[f64; N_VARS],
    x: f64,
    y: f64,
    fs: &Freestream,
    hooks: &Hooks,
) -> [f64; N_VARS] {
    if let Some(dir) = hooks.dirichlet {
        return dir(x, y);
    }
    let face = &disc.mesh.faces[f];
    let patch = face.patch.expect("boundary face without patch");
    match disc.mesh.patches[patch].tag {
        crate::mesh::PatchTag::Wall => mirror_state(trace, disc.face[f].normal),
        crate::mesh::PatchTag::Farfield => fs.state(),
    }
}

/// Face flux rows for both adjacent elements. Returns `(left, right)` row
/// blocks of shape `[N_VARS][nk]` flattened; `right` is empty for boundary
/// faces.
pub fn face_rows(
    disc: &Disc,
    u: &State,
    f: usize,
    cfg: &SolverConfig,
    fs: &Freestream,
    hooks: &Hooks,
    recon: Option<&Recon>,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let nk = disc.nk;
    let face = &disc.mesh.faces[f];
    let fd = &disc.face[f];
    let mut left = vec![0.0; N_VARS * nk];
    let mut right = if face.right.is_some() {
        vec![0.0; N_VARS * nk]
    } else {
        Vec::new()
    };
    for p in &fd.points {
        let ul = face_trace(disc, u, recon, face.left, &p.phi_left, p.x, p.y);
        let ur = match face.right {
            Some(r) => face_trace(disc, u, recon, r, &p.phi_right, p.x, p.y),
            None => ghost_state(disc, f, &ul, p.x, p.y, fs, hooks),
        };
        let flux = riemann_flux(cfg.riemann, &ul, &ur, fd.normal, fs.gamma)?;
        for m in 0..N_VARS {
            for k in 0..nk {
                left[m * nk + k] += p.w * flux[m] * p.phi_left[k];
            }
        }
        if face.right.is_some() {
            for m in 0..N_VARS {
                for k in 0..nk {
                    right[m * nk + k] -= p.w * flux[m] * p.phi_right[k];
                }
            }
        }
    }
    Ok((left, right))
}

/// Volume rows of one element: `- int F . grad phi + eps int grad U . grad phi
/// - int S phi`. The AV coefficient can be frozen via `av_e`.
pub fn volume_rows(
    disc: &Disc,
    u: &State,
    e: usize,
    cfg: &SolverConfig,
    fs: &Freestream,
    hooks: &Hooks,
    av_e: Option<f64>,
) -> Result<Vec<f64>> {
    let nk = disc.nk;
    let mut rows = vec![0.0; N_VARS * nk];
    let is_dg = disc.scheme.is_dg();
    let eps = if is_dg {
        match av_e {
            Some(v) => v,
            None => av_coefficient(disc, u, e, cfg, fs.gamma, hooks.source)?,
        }
    } else {
        0.0
    };
    for p in &disc.vol[e] {
        if is_dg {
            let u_pt = u.eval(e, &p.phi);
            let fl = crate::euler::euler_flux(&u_pt, fs.gamma)?;
            let grads = if eps != 0.0 {
                u.eval_grad(e, &p.grad)
            } else {
                [Vec2::ZERO; N_VARS]
            };
            for m in 0..N_VARS {
                for k in 1..nk {
                    let gp = p.grad[k];
                    rows[m * nk + k] -= p.w * (fl[0][m] * gp.x + fl[1][m] * gp.y);
                    if eps != 0.0 {
                        rows[m * nk + k] += p.w * eps * grads[m].dot(gp);
                    }
                }
            }
        }
        if let Some(src) = hooks.source {
            let s = src(p.x, p.y);
            for m in 0..N_VARS {
                for k in 0..nk {
                    rows[m * nk + k] -= p.w * s[m] * p.phi[k];
                }
            }
        }
    }
    Ok(rows)
}

/// Full residual assembly.
pub fn residual(
    disc: &Disc,
    u: &State,
    cfg: &SolverConfig,
    fs: &Freestream,
    hooks: &Hooks,
    freeze: Option<&Freeze>,
) -> Result<State> {
    let nk = disc.nk;
    let ne = disc.n_elements();
    let mut r = State::zeros(ne, nk);

    let recon = if disc.scheme == Scheme::Fv2 {
        let frozen = freeze
            .and_then(|f| f.limiter.as_deref())
            .or(hooks.fv2_limiter);
        Some(reconstruct_fv2(disc, u, fs, hooks, frozen))
    } else {
        None
    };

    for e in 0..ne {
        let av_e = freeze.map(|f| f.av[e]);
        let rows = volume_rows(disc, u, e, cfg, fs, hooks, av_e)?;
        let base = e * N_VARS * nk;
        for (i, v) in rows.iter().enumerate() {
            r.data[base + i] += v;
        }
    }

    for f in 0..disc.mesh.faces.len() {
        let face = &disc.mesh.faces[f];
        let (left, right) = face_rows(disc, u, f, cfg, fs, hooks, recon.as_ref())?;
        let bl = face.left * N_VARS * nk;
        for (i, v) in left.iter().enumerate() {
            r.data[bl + i] += v;
        }
        if let Some(re) = face.right {
            let br = re * N_VARS * nk;
            for (i, v) in right.iter().enumerate() {
                r.data[br + i] += v;
            }
        }
    }

    Ok(r)
}
