//! Native ASCII mesh format.
//!
//! ```text
//! mesh2d 1
//! vertices N
//! x y                  (N lines)
//! elements M
//! k i0 i1 ... i{k-1}   (M lines, k = 3 or 4, counter-clockwise)
//! patches P
//! patch <name> <tag> F
//! i j                  (F lines, vertex pairs)
//! ```
//!
//! Blank lines and `#` comments are allowed anywhere.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geom::Vec2;
use crate::mesh::{Element, Mesh, PatchDef, PatchTag};

struct Lines<'a> {
    iter: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        Lines {
            iter: text.lines().enumerate(),
        }
    }

    /// Next non-empty, non-comment line with its 1-based number.
    fn next(&mut self) -> Option<(usize, &'a str)> {
        for (i, raw) in self.iter.by_ref() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if !line.is_empty() {
                return Some((i + 1, line));
            }
        }
        None
    }

    fn expect(&mut self, what: &str) -> Result<(usize, &'a str)> {
        self.next().ok_or_else(|| Error::MeshParse {
            line: 0,
            msg: format!("unexpected end of file, expected {what}"),
        })
    }
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::MeshParse {
        line,
        msg: msg.into(),
    }
}

/// Parses and validates a mesh from the native format.
pub fn load_mesh(path: impl AsRef<Path>) -> Result<Mesh> {
    let text = fs::read_to_string(path)?;
    let mesh = parse_mesh(&text)?;
    mesh.validate().into_result()?;
    Ok(mesh)
}

/// Parses the native format without running validation.
pub fn parse_mesh(text: &str) -> Result<Mesh> {
    let mut lines = Lines::new(text);

    let (ln, header) = lines.expect("header")?;
    if header != "mesh2d 1" {
        return Err(parse_err(ln, format!("expected `mesh2d 1`, got `{header}`")));
    }

    let (ln, vh) = lines.expect("`vertices N`")?;
    let n_verts = parse_count(ln, vh, "vertices")?;
    let mut vertices = Vec::with_capacity(n_verts);
    for _ in 0..n_verts {
        let (ln, line) = lines.expect("vertex coordinates")?;
        let nums = parse_floats(ln, line, 2)?;
        vertices.push(Vec2::new(nums[0], nums[1]));
    }

    let (ln, eh) = lines.expect("`elements M`")?;
    let n_elems = parse_count(ln, eh, "elements")?;
    let mut elements = Vec::with_capacity(n_elems);
    for _ in 0..n_elems {
        let (ln, line) = lines.expect("element connectivity")?;
        let nums = parse_indices(ln, line)?;
        if nums.is_empty() {
            return Err(parse_err(ln, "empty element line"));
        }
        let k = nums[0];
        if nums.len() != k + 1 {
            return Err(parse_err(
                ln,
                format!("element line declares {k} vertices but lists {}", nums.len() - 1),
            ));
        }
        let el = match k {
            3 => Element::Tri([nums[1], nums[2], nums[3]]),
            4 => Element::Quad([nums[1], nums[2], nums[3], nums[4]]),
            other => return Err(parse_err(ln, format!("unsupported element size {other}"))),
        };
        elements.push(el);
    }

    let (ln, ph) = lines.expect("`patches P`")?;
    let n_patches = parse_count(ln, ph, "patches")?;
    let mut patch_defs = Vec::with_capacity(n_patches);
    for _ in 0..n_patches {
        let (ln, line) = lines.expect("`patch <name> <tag> F`")?;
        let parts: Vec<&str> = line.split_whitespace().collect();
        if parts.len() != 4 || parts[0] != "patch" {
            return Err(parse_err(ln, format!("expected `patch <name> <tag> F`, got `{line}`")));
        }
        let name = parts[1].to_string();
        let tag = PatchTag::parse(parts[2]).map_err(|e| parse_err(ln, e.to_string()))?;
        let n_faces: usize = parts[3]
            .parse()
            .map_err(|_| parse_err(ln, format!("bad face count `{}`", parts[3])))?;
        let mut pairs = Vec::with_capacity(n_faces);
        for _ in 0..n_faces {
            let (ln, line) = lines.expect("patch face vertex pair")?;
            let nums = parse_indices(ln, line)?;
            if nums.len() != 2 {
                return Err(parse_err(ln, "expected two vertex indices"));
            }
            pairs.push((nums[0], nums[1]));
        }
        patch_defs.push(PatchDef { name, tag, pairs });
    }

    Mesh::build(vertices, elements, patch_defs)
}

fn parse_count(ln: usize, line: &str, keyword: &str) -> Result<usize> {
    let parts: Vec<&str> = line.split_whitespace().collect();
    if parts.len() != 2 || parts[0] != keyword {
        return Err(parse_err(ln, format!("expected `{keyword} N`, got `{line}`")));
    }
    parts[1]
        .parse()
        .map_err(|_| parse_err(ln, format!("bad count `{}`", parts[1])))
}

fn parse_floats(ln: usize, line: &str, n: usize) -> Result<Vec<f64>> {
    let vals: std::result::Result<Vec<f64>, _> =
        line.split_whitespace().map(str::parse).collect();
    let vals = vals.map_err(|_| parse_err(ln, format!("bad number in `{line}`")))?;
    if vals.len() != n {
        return Err(parse_err(ln, format!("expected {n} numbers, got {}", vals.len())));
    }
    Ok(vals)
}

fn parse_indices(ln: usize, line: &str) -> Result<Vec<usize>> {
    line.split_whitespace()
        .map(|t| {
            t.parse()
                .map_err(|_| parse_err(ln, format!("bad index `{t}`")))
        })
        .collect()
}

/// Writes a mesh in the native format. Coordinates keep full precision.
pub fn write_mesh(mesh: &Mesh, path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::new();
    out.push_str("mesh2d 1\n");
    out.push_str(&format!("vertices {}\n", mesh.n_vertices()));
    for v in &mesh.vertices {
        out.push_str(&format!("{:.16e} {:.16e}\n", v.x, v.y));
    }
    out.push_str(&format!("elements {}\n", mesh.n_elements()));
    for el in &mesh.elements {
        let vs = el.vertices();
        out.push_str(&format!("{}", vs.len()));
        for v in vs {
            out.push_str(&format!(" {v}"));
        }
        out.push('\n');
    }
    out.push_str(&format!("patches {}\n", mesh.patches.len()));
    for p in &mesh.patches {
        out.push_str(&format!("patch {} {} {}\n", p.name, p.tag.as_str(), p.pairs.len()));
        for &(i, j) in &p.pairs {
            out.push_str(&format!("{i} {j}\n"));
        }
    }
    fs::write(path, out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO_TRI: &str = "\
mesh2d 1
# smallest valid mesh
vertices 4
0.0 0.0
1.0 0.0
1.0 1.0
0.0 1.0
elements 2
3 0 1 2
3 0 2 3
patches 1
patch outer farfield 4
0 1
1 2
2 3
3 0
";

    #[test]
    fn parses_two_triangle_square() {
        let m = parse_mesh(TWO_TRI).unwrap();
        assert_eq!(m.n_vertices(), 4);
        assert_eq!(m.n_elements(), 2);
        assert_eq!(m.faces.len(), 5);
        assert!(m.validate().is_clean());
    }

    #[test]
    fn out_of_range_index_is_topology_error() {
        let bad = TWO_TRI.replace("3 0 2 3", "3 0 2 9");
        let err = parse_mesh(&bad).unwrap_err();
        assert!(matches!(err, Error::MeshTopology(_)));
    }

    #[test]
    fn malformed_header_is_parse_error() {
        let err = parse_mesh("mesh3d 7\n").unwrap_err();
        assert!(matches!(err, Error::MeshParse { line: 1, .. }));
    }

    #[test]
    fn roundtrip_preserves_structure() {
        let m = parse_mesh(TWO_TRI).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("mesh.m2d");
        write_mesh(&m, &path).unwrap();
        let m2 = load_mesh(&path).unwrap();
        assert_eq!(m.n_vertices(), m2.n_vertices());
        assert_eq!(m.elements, m2.elements);
        assert_eq!(m.vertices[2].x, m2.vertices[2].x);
    }
}
