//! Solution remapping between a mesh and its deformed successor.
//!
//! The deformed mesh shares topology with the source; `c(x)` is the
//! vertex displacement field interpolated by the element shape functions.
//! New DoFs solve, per element and variable,
//!
//! ```text
//! M_new U_new = int U_h phi_i  -  oint H(U-, U+, n) phi_i  +  int (c . grad phi_i) U_h
//! ```
//!
//! with the upwind transport flux `H = c_n/2 (U- + U+) - |c_n|/2 (U+ - U-)`,
//! all right-hand-side integrals on the source mesh. The positivity limiter
//! runs on the remapped DoFs afterward.

use nalgebra::DVector;

use crate::disc::{Disc, State};
use crate::error::{Error, Result};
use crate::euler::N_VARS;
use crate::geom::Vec2;
use crate::solver::limiter::positivity_limit;

/// Transport flux value for a single variable.
#[inline]
fn transport_flux(cn: f64, um: f64, up: f64) -> f64 {
    0.5 * cn * (um + up) - 0.5 * cn.abs() * (up - um)
}

/// Remaps `u` from `old` onto `new` (same topology, displaced vertices).
pub fn remap_solution(old: &Disc, new: &Disc, u: &State, gamma: f64) -> Result<State> {
    let ne = old.n_elements();
    if new.n_elements() != ne
        || new.mesh.n_vertices() != old.mesh.n_vertices()
        || new.mesh.elements != old.mesh.elements
        || new.nk != old.nk
    {
        return Err(Error::Dimension(
            "remap requires meshes of identical topology and scheme".into(),
        ));
    }
    let nk = old.nk;

    // vertex displacement field
    let disp: Vec<Vec2> = old
        .mesh
        .vertices
        .iter()
        .zip(&new.mesh.vertices)
        .map(|(a, b)| *b - *a)
        .collect();

    let mut out = State::zeros(ne, nk);
    for e in 0..ne {
        let verts = old.mesh.elements[e].vertices();
        let mut rhs = vec![DVector::<f64>::zeros(nk); N_VARS];

        // volume terms: int U phi_i + int (c . grad phi_i) U
        for p in &old.vol[e] {
            let upt = u.eval(e, &p.phi);
            let mut c = Vec2::ZERO;
            for (w, &v) in p.vw.iter().zip(verts) {
                c += disp[v] * *w;
            }
            for m in 0..N_VARS {
                for k in 0..nk {
                    rhs[m][k] += p.w * upt[m] * p.phi[k];
                    if k > 0 {
                        rhs[m][k] += p.w * c.dot(p.grad[k]) * upt[m];
                    }
                }
            }
        }

        // face transport terms on the source mesh
        for &f in &old.mesh.elem_faces[e] {
            let face = &old.mesh.faces[f];
            let fd = &old.face[f];
            let own_left = face.left == e;
            let nb = if own_left { face.right } else { Some(face.left) };
            for p in &fd.points {
                let phi_own = if own_left { &p.phi_left } else { &p.phi_right };
                let u_own = u.eval(e, phi_own);
                let u_nb = match nb {
                    Some(o) => {
                        let phi_nb = if own_left { &p.phi_right } else { &p.phi_left };
                        u.eval(o, phi_nb)
                    }
                    None => u_own,
                };
                let n = if own_left { fd.normal } else { -fd.normal };
                let c = disp[face.v0] * (1.0 - p.s) + disp[face.v1] * p.s;
                let cn = c.dot(n);
                for m in 0..N_VARS {
                    let h = transport_flux(cn, u_own[m], u_nb[m]);
                    for k in 0..nk {
                        rhs[m][k] -= p.w * h * phi_own[k];
                    }
                }
            }
        }

        // solve with the deformed element's mass matrix
        for (m, r) in rhs.iter().enumerate() {
            let coef = new.mass_solve(e, r);
            for k in 0..nk {
                *out.at_mut(e, m, k) = coef[k];
            }
        }
    }

    positivity_limit(new, &mut out, gamma)?;
    Ok(out)
}
