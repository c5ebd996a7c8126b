use std::fmt::Write;

use super::{parse_error, IoError};
use crate::mesh::{SurfaceMesh, Vec3};

const IGNORED: [&str; 8] = ["vt", "vn", "vp", "o", "g", "s", "usemtl", "mtllib"];

/// Parses `v` and `f` records. Indices are 1-based, negative indices count
/// back from the last vertex, and polygons are fan-triangulated.
pub fn read_obj(text: &str) -> Result<SurfaceMesh, IoError> {
    let mut vertices: Vec<Vec3> = Vec::new();
    let mut faces: Vec<[usize; 3]> = Vec::new();
    let mut line_start = 0;
    for (n, raw) in text.split_inclusive('\n').enumerate() {
        let line_no = n + 1;
        let start = line_start;
        line_start += raw.len();
        let content = raw.split('#').next().unwrap_or("");
        let mut tokens = tokens(content, start);
        let Some((keyword, _)) = tokens.next() else {
            continue;
        };
        match keyword {
            "v" => {
                let mut xyz = [0.0; 3];
                for c in &mut xyz {
                    let (tok, at) = tokens.next().ok_or_else(|| {
                        parse_error(
                            line_no,
                            start + content.trim_end().len(),
                            "vertex needs three coordinates",
                        )
                    })?;
                    *c = tok
                        .parse::<f64>()
                        .ok()
                        .filter(|x| x.is_finite())
                        .ok_or_else(|| parse_error(line_no, at, format!("bad coordinate {tok:?}")))?;
                }
                // Optional homogeneous weight.
                if let Some((tok, at)) = tokens.next() {
                    let w: f64 = tok
                        .parse()
                        .map_err(|_| parse_error(line_no, at, format!("bad weight {tok:?}")))?;
                    if !(w.is_finite() && w != 0.0) {
                        return Err(parse_error(line_no, at, "vertex weight must be nonzero"));
                    }
                    xyz.iter_mut().for_each(|c| *c /= w);
                }
                if let Some((tok, at)) = tokens.next() {
                    return Err(parse_error(line_no, at, format!("unexpected {tok:?}")));
                }
                vertices.push(Vec3::new(xyz[0], xyz[1], xyz[2]));
            }
            "f" => {
                let mut poly = Vec::new();
                for (tok, at) in tokens {
                    let idx = tok.split('/').next().unwrap_or("");
                    let i: i64 = idx
                        .parse()
                        .map_err(|_| parse_error(line_no, at, format!("bad face index {tok:?}")))?;
                    let resolved = match i {
                        0 => return Err(parse_error(line_no, at, "face index 0 (OBJ indices start at 1)")),
                        i if i > 0 => i as usize - 1,
                        i => vertices.len().checked_sub(i.unsigned_abs() as usize).ok_or_else(|| {
                            parse_error(line_no, at, format!("relative index {i} before the first vertex"))
                        })?,
                    };
                    if resolved >= vertices.len() {
                        return Err(parse_error(
                            line_no,
                            at,
                            format!("face index {i} but only {} vertices so far", vertices.len()),
                        ));
                    }
                    poly.push(resolved);
                }
                if poly.len() < 3 {
                    return Err(parse_error(line_no, start, "face needs at least three vertices"));
                }
                for k in 1..poly.len() - 1 {
                    faces.push([poly[0], poly[k], poly[k + 1]]);
                }
            }
            k if IGNORED.contains(&k) => {}
            k => return Err(parse_error(line_no, start, format!("unknown record {k:?}"))),
        }
    }
    Ok(SurfaceMesh::new(vertices, faces)?)
}

fn tokens(line: &str, base: usize) -> impl Iterator<Item = (&str, usize)> {
    line.split_ascii_whitespace()
        .map(move |t| (t, base + (t.as_ptr() as usize - line.as_ptr() as usize)))
}

/// Text OBJ with shortest round-trip float formatting.
pub fn write_obj(mesh: &SurfaceMesh) -> String {
    let mut s = String::new();
    for v in mesh.vertices() {
        let _ = writeln!(s, "v {:?} {:?} {:?}", v.x, v.y, v.z);
    }
    for f in mesh.faces() {
        let _ = writeln!(s, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1);
    }
    s
}
