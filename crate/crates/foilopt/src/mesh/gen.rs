//! Fixture mesh generation: airfoil profiles, O-meshes, structured rectangles.
//!
//! The meshes used by tests and examples are generated here rather than
//! shipped as data files. Profiles are closed polylines oriented
//! counter-clockwise (trailing edge -> upper surface -> leading edge ->
//! lower surface).

use crate::error::Result;
use crate::geom::Vec2;
use crate::mesh::{Element, Mesh, PatchDef, PatchTag};

/// NACA 4-digit thickness polyline with a sharp (closed) trailing edge,
/// cosine-clustered, `n` points around the full loop (`n` even).
pub fn naca4(max_camber: f64, camber_pos: f64, thickness: f64, n: usize) -> Vec<Vec2> {
    assert!(n >= 8 && n % 2 == 0, "need an even point count >= 8");
    let yt = |x: f64| {
        // -0.1036 closes the trailing edge exactly
        5.0 * thickness
            * (0.2969 * x.sqrt() - 0.1260 * x - 0.3516 * x * x + 0.2843 * x * x * x
                - 0.1036 * x * x * x * x)
    };
    let camber = |x: f64| {
        if max_camber == 0.0 {
            (0.0, 0.0)
        } else if x < camber_pos {
            let yc = max_camber / (camber_pos * camber_pos) * (2.0 * camber_pos * x - x * x);
            let dy = 2.0 * max_camber / (camber_pos * camber_pos) * (camber_pos - x);
            (yc, dy)
        } else {
            let c1 = 1.0 - camber_pos;
            let yc = max_camber / (c1 * c1) * (1.0 - 2.0 * camber_pos + 2.0 * camber_pos * x - x * x);
            let dy = 2.0 * max_camber / (c1 * c1) * (camber_pos - x);
            (yc, dy)
        }
    };
    let mut pts = Vec::with_capacity(n);
    for k in 0..n {
        let phi = 2.0 * std::f64::consts::PI * (k as f64) / (n as f64);
        let x = 0.5 * (1.0 + phi.cos());
        let t = yt(x);
        let (yc, dyc) = camber(x);
        let theta = dyc.atan();
        if phi < std::f64::consts::PI {
            pts.push(Vec2::new(x - t * theta.sin(), yc + t * theta.cos()));
        } else if k == n / 2 {
            pts.push(Vec2::new(0.0, 0.0));
        } else {
            pts.push(Vec2::new(x + t * theta.sin(), yc - t * theta.cos()));
        }
    }
    pts
}

/// NACA-0012 profile, `n` points.
pub fn naca0012(n: usize) -> Vec<Vec2> {
    naca4(0.0, 0.0, 0.12, n)
}

/// O-mesh of quadrilaterals around a closed CCW profile.
///
/// `n_radial` layers grow geometrically (ratio `growth`) from the profile to
/// a circle of radius `radius` centred at the profile's bounding-box centre.
/// The wall patch pairs follow the profile orientation (CCW), so the
/// enclosed-area sign convention holds.
pub fn omesh(profile: &[Vec2], n_radial: usize, radius: f64, growth: f64) -> Result<Mesh> {
    let ns = profile.len();
    assert!(n_radial >= 2);

    let (mut xmin, mut xmax, mut ymin, mut ymax) =
        (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for p in profile {
        xmin = xmin.min(p.x);
        xmax = xmax.max(p.x);
        ymin = ymin.min(p.y);
        ymax = ymax.max(p.y);
    }
    let center = Vec2::new(0.5 * (xmin + xmax), 0.5 * (ymin + ymax));

    // geometric clustering in [0, 1]
    let mut t = Vec::with_capacity(n_radial + 1);
    if (growth - 1.0).abs() < 1e-12 {
        for j in 0..=n_radial {
            t.push(j as f64 / n_radial as f64);
        }
    } else {
        let total = (growth.powi(n_radial as i32) - 1.0) / (growth - 1.0);
        let mut acc = 0.0;
        t.push(0.0);
        for j in 0..n_radial {
            acc += growth.powi(j as i32);
            t.push(acc / total);
        }
    }

    let mut vertices = Vec::with_capacity(ns * (n_radial + 1));
    for j in 0..=n_radial {
        for (i, &p) in profile.iter().enumerate() {
            if j == 0 {
                vertices.push(p);
            } else {
                let dir = (p - center).normalized();
                let outer = center + dir * radius;
                vertices.push(p + (outer - p) * t[j]);
            }
            let _ = i;
        }
    }
    let vid = |j: usize, i: usize| j * ns + (i % ns);

    let mut elements = Vec::with_capacity(ns * n_radial);
    for j in 0..n_radial {
        for i in 0..ns {
            // inner_i -> outer_i -> outer_{i+1} -> inner_{i+1} is CCW when the
            // profile ring is CCW and the fluid lies outside it
            elements.push(Element::Quad([
                vid(j, i),
                vid(j + 1, i),
                vid(j + 1, i + 1),
                vid(j, i + 1),
            ]));
        }
    }

    let wall_pairs: Vec<(usize, usize)> = (0..ns).map(|i| (vid(0, i), vid(0, i + 1))).collect();
    let far_pairs: Vec<(usize, usize)> = (0..ns)
        .map(|i| (vid(n_radial, i), vid(n_radial, i + 1)))
        .collect();

    Mesh::build(
        vertices,
        elements,
        vec![
            PatchDef {
                name: "airfoil".into(),
                tag: PatchTag::Wall,
                pairs: wall_pairs,
            },
            PatchDef {
                name: "farfield".into(),
                tag: PatchTag::Farfield,
                pairs: far_pairs,
            },
        ],
    )
}

/// Per-side boundary tags for [`rect_mesh`], in bottom/right/top/left order.
#[derive(Clone, Copy, Debug)]
pub struct RectTags {
    pub bottom: PatchTag,
    pub right: PatchTag,
    pub top: PatchTag,
    pub left: PatchTag,
}

impl RectTags {
    pub fn all_farfield() -> Self {
        RectTags {
            bottom: PatchTag::Farfield,
            right: PatchTag::Farfield,
            top: PatchTag::Farfield,
            left: PatchTag::Farfield,
        }
    }

    /// Channel: solid walls top and bottom, in/outflow left and right.
    pub fn channel() -> Self {
        RectTags {
            bottom: PatchTag::Wall,
            right: PatchTag::Farfield,
            top: PatchTag::Wall,
            left: PatchTag::Farfield,
        }
    }
}

/// Structured quad mesh of `[x0, x1] x [y0, y1]`.
pub fn rect_mesh(nx: usize, ny: usize, bounds: [f64; 4], tags: RectTags) -> Result<Mesh> {
    let [x0, x1, y0, y1] = bounds;
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            vertices.push(Vec2::new(
                x0 + (x1 - x0) * i as f64 / nx as f64,
                y0 + (y1 - y0) * j as f64 / ny as f64,
            ));
        }
    }
    let vid = |i: usize, j: usize| j * (nx + 1) + i;
    let mut elements = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            elements.push(Element::Quad([
                vid(i, j),
                vid(i + 1, j),
                vid(i + 1, j + 1),
                vid(i, j + 1),
            ]));
        }
    }
    let side = |name: &str, tag: PatchTag, pairs: Vec<(usize, usize)>| PatchDef {
        name: name.into(),
        tag,
        pairs,
    };
    let bottom: Vec<_> = (0..nx).map(|i| (vid(i, 0), vid(i + 1, 0))).collect();
    let right: Vec<_> = (0..ny).map(|j| (vid(nx, j), vid(nx, j + 1))).collect();
    let top: Vec<_> = (0..nx).map(|i| (vid(i + 1, ny), vid(i, ny))).collect();
    let left: Vec<_> = (0..ny).map(|j| (vid(0, j + 1), vid(0, j))).collect();
    Mesh::build(
        vertices,
        elements,
        vec![
            side("bottom", tags.bottom, bottom),
            side("right", tags.right, right),
            side("top", tags.top, top),
            side("left", tags.left, left),
        ],
    )
}
