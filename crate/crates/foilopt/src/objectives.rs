//! Optimization objective and constraints: drag, lift conservation, area
//! conservation, and their state partials.
//!
//! The objective is the drag coefficient. Constraints are inequalities in
//! the `c <= 0` feasible form: `Cl0 - Cl <= 0` and `A0 - A <= 0`, with the
//! reference values captured from the initial shape. The airfoil area is
//! the wall polygon area, so it depends on the surface geometry alone and
//! its design gradient flows purely through the parameterization.

use crate::disc::{Disc, State};
use crate::error::Result;
use crate::euler::Freestream;
use crate::mesh::Mesh;
use crate::solver::forces::{compute_forces, force_partial_du, wind_axes};

/// Signed-polygon area of the wall loop(s). Counter-clockwise loops are
/// positive; a net-negative orientation is folded to its absolute value
/// with a warning.
pub fn area(mesh: &Mesh) -> Result<f64> {
    let loops = mesh.wall_loops()?;
    let mut total = 0.0;
    for lp in &loops {
        let pts: Vec<crate::geom::Vec2> = lp.iter().map(|&v| mesh.vertices[v]).collect();
        total += crate::geom::signed_area(&pts);
    }
    if total < 0.0 {
        log::warn!("wall loop orientation is clockwise; taking |area| = {}", -total);
        total = -total;
    }
    Ok(total)
}

/// Reference values captured at the initial shape.
#[derive(Clone, Copy, Debug)]
pub struct ObjectiveSpec {
    pub cl0: f64,
    pub a0: f64,
}

impl ObjectiveSpec {
    /// Captures `Cl0` and `A0` from the converged initial shape.
    pub fn capture(disc: &Disc, u: &State, fs: &Freestream) -> Result<ObjectiveSpec> {
        let report = compute_forces(disc, u, fs)?;
        Ok(ObjectiveSpec {
            cl0: report.cl,
            a0: area(&disc.mesh)?,
        })
    }
}

/// Objective and constraint values at a converged state.
#[derive(Clone, Copy, Debug)]
pub struct ObjectiveValues {
    pub cd: f64,
    pub cl: f64,
    pub area: f64,
    /// Inequality constraints (feasible when <= 0): lift and area non-decrease.
    pub c_ineq: [f64; 2],
}

pub fn objective_value(
    disc: &Disc,
    u: &State,
    fs: &Freestream,
    spec: &ObjectiveSpec,
) -> Result<ObjectiveValues> {
    let report = compute_forces(disc, u, fs)?;
    let a = area(&disc.mesh)?;
    Ok(ObjectiveValues {
        cd: report.cd,
        cl: report.cl,
        area: a,
        c_ineq: [spec.cl0 - report.cl, spec.a0 - a],
    })
}

/// State partials of the drag objective and the lift constraint. The area
/// constraint has no state dependence. Support is exactly the wall-adjacent
/// blocks.
pub struct ObjectivePartials {
    pub d_cd_du: State,
    pub d_cl_du: State,
}

pub fn objective_partial_du(disc: &Disc, u: &State, fs: &Freestream) -> Result<ObjectivePartials> {
    let (drag_axis, lift_axis) = wind_axes(fs.aoa_rad());
    Ok(ObjectivePartials {
        d_cd_du: force_partial_du(disc, u, fs, drag_axis)?,
        d_cl_du: force_partial_du(disc, u, fs, lift_axis)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::disc::Scheme;
    use crate::geom::Vec2;
    use crate::mesh::gen::{naca0012, omesh};
    use crate::mesh::{Element, PatchDef, PatchTag};

    const GAMMA: f64 = 1.4;

    fn square_ring_mesh(reversed_wall: bool) -> Mesh {
        // a square annulus: outer boundary farfield, inner square wall
        let verts = vec![
            // inner square (wall), CCW
            Vec2::new(1.0, 1.0),
            Vec2::new(2.0, 1.0),
            Vec2::new(2.0, 2.0),
            Vec2::new(1.0, 2.0),
            // outer square, CCW
            Vec2::new(0.0, 0.0),
            Vec2::new(3.0, 0.0),
            Vec2::new(3.0, 3.0),
            Vec2::new(0.0, 3.0),
        ];
        let elements = vec![
            Element::Quad([4, 5, 1, 0]),
            Element::Quad([5, 6, 2, 1]),
            Element::Quad([6, 7, 3, 2]),
            Element::Quad([7, 4, 0, 3]),
        ];
        let wall_pairs = if reversed_wall {
            vec![(1, 0), (0, 3), (3, 2), (2, 1)]
        } else {
            vec![(0, 1), (1, 2), (2, 3), (3, 0)]
        };
        Mesh::build(
            verts,
            elements,
            vec![
                PatchDef {
                    name: "wall".into(),
                    tag: PatchTag::Wall,
                    pairs: wall_pairs,
                },
                PatchDef {
                    name: "outer".into(),
                    tag: PatchTag::Farfield,
                    pairs: vec![(5, 4), (6, 5), (7, 6), (4, 7)],
                },
            ],
        )
        .unwrap()
    }

    #[test]
    fn unit_square_wall_loop_area() {
        let m = square_ring_mesh(false);
        assert!((area(&m).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn reversed_loop_orientation_gives_absolute_value() {
        let m = square_ring_mesh(true);
        assert!((area(&m).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn naca0012_polygon_area_near_reference() {
        // reference value 8.24e-2; polygonization stays within 2%
        let m = omesh(&naca0012(96), 8, 10.0, 1.5).unwrap();
        let a = area(&m).unwrap();
        assert!((a - 8.24e-2).abs() / 8.24e-2 < 0.02, "area = {a}");
    }

    #[test]
    fn constraints_vanish_at_initial_shape() {
        let mesh = omesh(&naca0012(24), 4, 8.0, 1.5).unwrap();
        let fs = Freestream::new(0.8, 1.25, GAMMA);
        let disc = Disc::new(&mesh, Scheme::Fv1).unwrap();
        let u = State::uniform(disc.n_elements(), 1, fs.state());
        let spec = ObjectiveSpec::capture(&disc, &u, &fs).unwrap();
        let vals = objective_value(&disc, &u, &fs, &spec).unwrap();
        assert_eq!(vals.c_ineq, [0.0, 0.0]);
        // free stream on a closed body: baseline drag is zero
        assert!(vals.cd.abs() < 1e-12);
    }
}
