use super::{parse_error, IoError};
use crate::mesh::{SurfaceMesh, Vec3};

#[derive(Debug, Clone, Copy, PartialEq)]
enum Scalar {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl Scalar {
    fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "char" | "int8" => Scalar::I8,
            "uchar" | "uint8" => Scalar::U8,
            "short" | "int16" => Scalar::I16,
            "ushort" | "uint16" => Scalar::U16,
            "int" | "int32" => Scalar::I32,
            "uint" | "uint32" => Scalar::U32,
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Scalar::I8 | Scalar::U8 => 1,
            Scalar::I16 | Scalar::U16 => 2,
            Scalar::I32 | Scalar::U32 | Scalar::F32 => 4,
            Scalar::F64 => 8,
        }
    }

    fn is_integer(self) -> bool {
        !matches!(self, Scalar::F32 | Scalar::F64)
    }

    fn decode(self, b: &[u8]) -> f64 {
        match self {
            Scalar::I8 => b[0] as i8 as f64,
            Scalar::U8 => b[0] as f64,
            Scalar::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::I32 => i32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::U32 => u32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::F32 => f32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::F64 => f64::from_le_bytes(b[..8].try_into().unwrap()),
        }
    }
}

#[derive(Debug, Clone)]
enum Property {
    Scalar(String, Scalar),
    List(String, Scalar, Scalar),
}

#[derive(Debug, Clone)]
struct Element {
    name: String,
    count: usize,
    properties: Vec<Property>,
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn take(&mut self, n: usize, what: &str) -> Result<&[u8], IoError> {
        if self.bytes.len() - self.pos < n {
            return Err(parse_error(0, self.pos, format!("truncated {what}")));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn scalar(&mut self, t: Scalar, what: &str) -> Result<f64, IoError> {
        Ok(t.decode(self.take(t.size(), what)?))
    }
}

fn parse_header(bytes: &[u8]) -> Result<(Vec<Element>, usize), IoError> {
    let mut elements: Vec<Element> = Vec::new();
    let mut pos = 0;
    let mut line_no = 0;
    let mut format_seen = false;
    loop {
        line_no += 1;
        let end = bytes[pos..]
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| parse_error(line_no, pos, "header is not terminated by end_header"))?;
        let raw = &bytes[pos..pos + end];
        let line = std::str::from_utf8(raw)
            .map_err(|_| parse_error(line_no, pos, "header is not ASCII"))?
            .trim_end_matches('\r');
        let at = pos;
        pos += end + 1;
        let words: Vec<&str> = line.split_ascii_whitespace().collect();
        match words.as_slice() {
            ["ply"] if line_no == 1 => {}
            _ if line_no == 1 => return Err(parse_error(1, 0, "missing ply magic")),
            ["format", "binary_little_endian", "1.0"] => format_seen = true,
            ["format", other, ..] => return Err(parse_error(line_no, at, format!("unsupported format {other:?}"))),
            ["comment", ..] | ["obj_info", ..] => {}
            ["element", name, count] => {
                let count = count
                    .parse()
                    .map_err(|_| parse_error(line_no, at, format!("bad element count {count:?}")))?;
                elements.push(Element {
                    name: name.to_string(),
                    count,
                    properties: vec![],
                });
            }
            ["property", "list", ct, it, name] => {
                let (Some(ct), Some(it)) = (Scalar::parse(ct), Scalar::parse(it)) else {
                    return Err(parse_error(line_no, at, "unknown list property type"));
                };
                if !ct.is_integer() || !it.is_integer() {
                    return Err(parse_error(line_no, at, "list properties must be integral"));
                }
                let e = elements
                    .last_mut()
                    .ok_or_else(|| parse_error(line_no, at, "property before any element"))?;
                e.properties.push(Property::List(name.to_string(), ct, it));
            }
            ["property", t, name] => {
                let t = Scalar::parse(t).ok_or_else(|| parse_error(line_no, at, format!("unknown type {t:?}")))?;
                let e = elements
                    .last_mut()
                    .ok_or_else(|| parse_error(line_no, at, "property before any element"))?;
                e.properties.push(Property::Scalar(name.to_string(), t));
            }
            ["end_header"] => break,
            _ => return Err(parse_error(line_no, at, format!("unrecognized header line {line:?}"))),
        }
    }
    if !format_seen {
        return Err(parse_error(line_no, 0, "missing format line"));
    }
    Ok((elements, pos))
}

/// Binary little-endian PLY with `x y z` vertex properties and a
/// `vertex_indices` (or `vertex_index`) face list. Other elements and
/// properties are skipped; polygons are fan-triangulated.
pub fn read_ply(bytes: &[u8]) -> Result<SurfaceMesh, IoError> {
    let (elements, data) = parse_header(bytes)?;
    let mut cur = Cursor { bytes, pos: data };
    let mut vertices: Option<Vec<Vec3>> = None;
    let mut faces: Option<Vec<[usize; 3]>> = None;
    for e in &elements {
        match e.name.as_str() {
            "vertex" => {
                let slot = |axis: &str| {
                    e.properties
                        .iter()
                        .position(|p| matches!(p, Property::Scalar(n, _) if n == axis))
                        .ok_or_else(|| parse_error(0, data, format!("vertex element lacks {axis}")))
                };
                let (ix, iy, iz) = (slot("x")?, slot("y")?, slot("z")?);
                let mut vs = Vec::with_capacity(e.count.min(1 << 20));
                let mut row = vec![0.0; e.properties.len()];
                for _ in 0..e.count {
                    for (k, p) in e.properties.iter().enumerate() {
                        row[k] = match p {
                            Property::Scalar(_, t) => cur.scalar(*t, "vertex")?,
                            Property::List(_, ct, it) => {
                                let n = cur.scalar(*ct, "vertex")? as usize;
                                cur.take(n * it.size(), "vertex")?;
                                0.0
                            }
                        };
                    }
                    let v = Vec3::new(row[ix], row[iy], row[iz]);
                    if !(v.x.is_finite() && v.y.is_finite() && v.z.is_finite()) {
                        return Err(parse_error(0, cur.pos, "non-finite vertex coordinate"));
                    }
                    vs.push(v);
                }
                vertices = Some(vs);
            }
            "face" => {
                let nv = vertices.as_ref().map_or(0, Vec::len);
                let mut fs = Vec::with_capacity(e.count.min(1 << 20));
                for _ in 0..e.count {
                    for p in &e.properties {
                        match p {
                            Property::List(name, ct, it) if name == "vertex_indices" || name == "vertex_index" => {
                                let at = cur.pos;
                                let n = cur.scalar(*ct, "face")?;
                                if !(3.0..=1e6).contains(&n) {
                                    return Err(parse_error(0, at, format!("face with {n} vertices")));
                                }
                                let mut poly = Vec::with_capacity(n as usize);
                                for _ in 0..n as usize {
                                    let at = cur.pos;
                                    let i = cur.scalar(*it, "face")?;
                                    if i < 0.0 || i as usize >= nv {
                                        return Err(parse_error(0, at, format!("face index {i} out of range")));
                                    }
                                    poly.push(i as usize);
                                }
                                for k in 1..poly.len() - 1 {
                                    fs.push([poly[0], poly[k], poly[k + 1]]);
                                }
                            }
                            Property::List(_, ct, it) => {
                                let n = cur.scalar(*ct, "face")? as usize;
                                cur.take(n * it.size(), "face")?;
                            }
                            Property::Scalar(_, t) => {
                                cur.take(t.size(), "face")?;
                            }
                        }
                    }
                }
                faces = Some(fs);
            }
            _ => {
                for _ in 0..e.count {
                    for p in &e.properties {
                        match p {
                            Property::Scalar(_, t) => {
                                cur.take(t.size(), &e.name)?;
                            }
                            Property::List(_, ct, it) => {
                                let n = cur.scalar(*ct, &e.name)? as usize;
                                cur.take(n * it.size(), &e.name)?;
                            }
                        }
                    }
                }
            }
        }
    }
    if cur.pos != bytes.len() {
        return Err(parse_error(0, cur.pos, "trailing bytes after the last element"));
    }
    let vertices = vertices.ok_or_else(|| parse_error(0, data, "no vertex element"))?;
    let faces = faces.ok_or_else(|| parse_error(0, data, "no face element"))?;
    Ok(SurfaceMesh::new(vertices, faces)?)
}

/// Binary little-endian PLY with double coordinates, so vertices survive a
/// round trip bit for bit.
pub fn write_ply(mesh: &SurfaceMesh) -> Vec<u8> {
    let header = format!(
        "ply\nformat binary_little_endian 1.0\nelement vertex {}\nproperty double x\nproperty double y\nproperty double z\nelement face {}\nproperty list uchar uint vertex_indices\nend_header\n",
        mesh.num_vertices(),
        mesh.num_faces()
    );
    let mut out = header.into_bytes();
    out.reserve(mesh.num_vertices() * 24 + mesh.num_faces() * 13);
    for v in mesh.vertices() {
        for c in [v.x, v.y, v.z] {
            out.extend_from_slice(&c.to_le_bytes());
        }
    }
    for f in mesh.faces() {
        out.push(3);
        for &i in f {
            out.extend_from_slice(&(i as u32).to_le_bytes());
        }
    }
    out
}
