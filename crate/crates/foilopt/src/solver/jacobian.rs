//! Block finite-difference Jacobian of the spatial residual.
//!
//! Columns are assembled element by element with forward differences,
//! step `fd_step * (1 + |u|)`. Artificial-viscosity coefficients and FV2
//! limiter scalings are frozen at the linearization state, so the
//! differentiated residual is the smooth surrogate the adjoint uses.
//!
//! Stencils: DG and FV1 couple an element to its face neighbors only.
//! FV2's reconstruction reads neighbor averages, which widens the stencil
//! to second neighbors.

use std::collections::BTreeSet;

use crate::disc::{Disc, Scheme, State};
use crate::error::Result;
use crate::euler::{Freestream, N_VARS};
use crate::solver::linear::BlockMatrix;
use crate::solver::residual::{face_rows, reconstruct_fv2, volume_rows, Freeze, Hooks, Recon};
use crate::solver::SolverConfig;

/// Sparsity pattern of the Jacobian for the given scheme.
pub fn jacobian_pattern(disc: &Disc) -> Vec<Vec<usize>> {
    let ne = disc.n_elements();
    let mut pattern = Vec::with_capacity(ne);
    for e in 0..ne {
        let mut cols: BTreeSet<usize> = BTreeSet::new();
        cols.insert(e);
        for nb in disc.mesh.neighbors(e) {
            cols.insert(nb);
            if disc.scheme == Scheme::Fv2 {
                for nb2 in disc.mesh.neighbors(nb) {
                    cols.insert(nb2);
                }
            }
        }
        pattern.push(cols.into_iter().collect());
    }
    pattern
}

/// Faces whose rows depend on the DoFs of element `c`.
fn affected_faces(disc: &Disc, c: usize) -> Vec<usize> {
    let mut faces: BTreeSet<usize> = disc.mesh.elem_faces[c].iter().copied().collect();
    if disc.scheme == Scheme::Fv2 {
        // perturbing c changes the gradients of c's neighbors too
        for nb in disc.mesh.neighbors(c) {
            faces.extend(disc.mesh.elem_faces[nb].iter().copied());
        }
    }
    faces.into_iter().collect()
}

/// Assembles `dR/dU` at state `u` with frozen nonlinearities. Columns use
/// central differences: forward differencing leaves O(h d2R) truncation
/// that is visible in adjoint-gradient verification for the p2 basis.
pub fn assemble_jacobian(
    disc: &Disc,
    u: &State,
    cfg: &SolverConfig,
    fs: &Freestream,
    hooks: &Hooks,
    freeze: &Freeze,
) -> Result<BlockMatrix> {
    let nk = disc.nk;
    let bs = N_VARS * nk;
    let ne = disc.n_elements();
    let mut jac = BlockMatrix::from_pattern(jacobian_pattern(disc), bs);

    let base_recon: Option<Recon> = if disc.scheme == Scheme::Fv2 {
        let frozen = freeze.limiter.as_deref().or(hooks.fv2_limiter);
        Some(reconstruct_fv2(disc, u, fs, hooks, frozen))
    } else {
        None
    };

    let mut u_pert = u.clone();
    for c in 0..ne {
        let faces = affected_faces(disc, c);

        for m in 0..N_VARS {
            for k in 0..nk {
                let col_dof = c * bs + m * nk + k;
                let idx = u.idx(c, m, k);
                let h = cfg.fd_step * (1.0 + u.data[idx].abs());

                let mut eval = |sign: f64| -> Result<(Option<Vec<f64>>, Vec<(Vec<f64>, Vec<f64>)>)> {
                    u_pert.data[idx] = u.data[idx] + sign * h;
                    // FV2: refresh the gradients of the touched elements;
                    // limiter scalings stay frozen
                    let recon: Option<Recon> = if disc.scheme == Scheme::Fv2 {
                        let mut rc = base_recon.clone().unwrap();
                        for t in std::iter::once(c).chain(disc.mesh.neighbors(c)) {
                            rc.grad[t] =
                                crate::solver::residual::green_gauss(disc, &u_pert, t, fs, hooks);
                        }
                        Some(rc)
                    } else {
                        None
                    };
                    let vol = if disc.scheme.is_dg() {
                        Some(volume_rows(disc, &u_pert, c, cfg, fs, hooks, Some(freeze.av[c]))?)
                    } else {
                        None
                    };
                    let mut face_vals = Vec::with_capacity(faces.len());
                    for &f in &faces {
                        face_vals.push(face_rows(disc, &u_pert, f, cfg, fs, hooks, recon.as_ref())?);
                    }
                    u_pert.data[idx] = u.data[idx];
                    Ok((vol, face_vals))
                };

                let (vol_p, faces_p) = eval(1.0)?;
                let (vol_m, faces_m) = eval(-1.0)?;
                let inv = 1.0 / (2.0 * h);

                if let (Some(vp), Some(vm)) = (&vol_p, &vol_m) {
                    for (i, (rp, rm)) in vp.iter().zip(vm).enumerate() {
                        let d = (rp - rm) * inv;
                        if d != 0.0 {
                            jac.add_entry(c * bs + i, col_dof, d);
                        }
                    }
                }
                for (fi, &f) in faces.iter().enumerate() {
                    let face = &disc.mesh.faces[f];
                    let (lp, rp) = &faces_p[fi];
                    let (lm, rm) = &faces_m[fi];
                    for (i, (a, b)) in lp.iter().zip(lm).enumerate() {
                        let d = (a - b) * inv;
                        if d != 0.0 {
                            jac.add_entry(face.left * bs + i, col_dof, d);
                        }
                    }
                    if let Some(re) = face.right {
                        for (i, (a, b)) in rp.iter().zip(rm).enumerate() {
                            let d = (a - b) * inv;
                            if d != 0.0 {
                                jac.add_entry(re * bs + i, col_dof, d);
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(jac)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::gen::{naca0012, omesh, rect_mesh, RectTags};
    use crate::solver::residual::{compute_freeze, residual};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    const GAMMA: f64 = 1.4;

    fn perturbed_state(disc: &Disc, fs: &Freestream, rng: &mut ChaCha8Rng) -> State {
        let mut u = State::uniform(disc.n_elements(), disc.nk, fs.state());
        for e in 0..disc.n_elements() {
            for m in 0..N_VARS {
                let base = u.at(e, m, 0);
                *u.at_mut(e, m, 0) = base * (1.0 + 0.05 * (rng.gen::<f64>() - 0.5));
                for k in 1..disc.nk {
                    *u.at_mut(e, m, k) = 0.01 * (rng.gen::<f64>() - 0.5) * base.abs().max(0.1);
                }
            }
        }
        u
    }

    #[test]
    fn matvec_matches_directional_difference_all_schemes() {
        let mesh = omesh(&naca0012(16), 3, 6.0, 1.5).unwrap();
        let fs = Freestream::new(0.5, 1.25, GAMMA);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for scheme in [Scheme::Fv1, Scheme::Fv2, Scheme::DgP1, Scheme::DgP2] {
            let disc = Disc::new(&mesh, scheme).unwrap();
            let cfg = SolverConfig::new(scheme);
            let u = perturbed_state(&disc, &fs, &mut rng);
            let freeze = compute_freeze(&disc, &u, &cfg, &fs, &Hooks::default()).unwrap();
            let jac = assemble_jacobian(&disc, &u, &cfg, &fs, &Hooks::default(), &freeze).unwrap();

            let n = disc.n_dofs();
            for _ in 0..5 {
                let w: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() - 0.5).collect();
                let mut jw = vec![0.0; n];
                jac.matvec(&w, &mut jw);

                // directional central difference of the frozen residual
                let eps = 1e-6;
                let mut up = u.clone();
                let mut um = u.clone();
                for i in 0..n {
                    up.data[i] += eps * w[i];
                    um.data[i] -= eps * w[i];
                }
                let rp = residual(&disc, &up, &cfg, &fs, &Hooks::default(), Some(&freeze)).unwrap();
                let rm = residual(&disc, &um, &cfg, &fs, &Hooks::default(), Some(&freeze)).unwrap();
                let mut fd = vec![0.0; n];
                for i in 0..n {
                    fd[i] = (rp.data[i] - rm.data[i]) / (2.0 * eps);
                }
                let num: f64 = jw
                    .iter()
                    .zip(&fd)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                let den: f64 = fd.iter().map(|v| v * v).sum::<f64>().sqrt();
                assert!(
                    num <= 1e-5 * den.max(1e-12),
                    "{}: rel err {:e}",
                    scheme.name(),
                    num / den.max(1e-300)
                );
            }
        }
    }

    #[test]
    fn sparsity_matches_stencil() {
        let mesh = rect_mesh(4, 3, [0.0, 4.0, 0.0, 3.0], RectTags::all_farfield()).unwrap();
        for scheme in [Scheme::Fv1, Scheme::DgP1] {
            let disc = Disc::new(&mesh, scheme).unwrap();
            let pattern = jacobian_pattern(&disc);
            for (e, cols) in pattern.iter().enumerate() {
                let mut expect: Vec<usize> = disc.mesh.neighbors(e);
                expect.push(e);
                expect.sort_unstable();
                assert_eq!(cols, &expect, "element {e}");
            }
        }
        // FV2 includes second neighbors
        let disc = Disc::new(&mesh, Scheme::Fv2).unwrap();
        let pattern = jacobian_pattern(&disc);
        let e = 5; // interior element
        let mut expect: BTreeSet<usize> = BTreeSet::new();
        expect.insert(e);
        for nb in disc.mesh.neighbors(e) {
            expect.insert(nb);
            for nb2 in disc.mesh.neighbors(nb) {
                expect.insert(nb2);
            }
        }
        assert_eq!(pattern[e], expect.into_iter().collect::<Vec<_>>());
    }

    #[test]
    fn free_stream_jacobian_finite_and_solvable_with_mass_shift() {
        let mesh = omesh(&naca0012(16), 3, 6.0, 1.5).unwrap();
        let fs = Freestream::new(0.8, 1.25, GAMMA);
        let disc = Disc::new(&mesh, Scheme::Fv1).unwrap();
        let cfg = SolverConfig::new(Scheme::Fv1);
        let u = State::uniform(disc.n_elements(), 1, fs.state());
        let freeze = compute_freeze(&disc, &u, &cfg, &fs, &Hooks::default()).unwrap();
        let mut jac = assemble_jacobian(&disc, &u, &cfg, &fs, &Hooks::default(), &freeze).unwrap();
        for b in &jac.blocks {
            assert!(b.iter().all(|v| v.is_finite()));
        }
        // M/dt shift makes it solvable
        for e in 0..disc.n_elements() {
            let dt = 1.0 * disc.geom[e].h / 2.0;
            let shift = disc.geom[e].area / dt;
            let blk = jac.block_mut(e, e).unwrap();
            for i in 0..4 {
                blk[(i, i)] += shift;
            }
        }
        let ilu = crate::solver::linear::BlockIlu0::new(&jac).unwrap();
        let b = vec![1.0; disc.n_dofs()];
        let (x, res, _) =
            crate::solver::linear::gmres(&jac, &b, &ilu, 1e-8, 60, 1000).unwrap();
        assert!(res <= 1e-8);
        assert!(x.iter().all(|v| v.is_finite()));
    }
}
