//! ASCII OBJ and PLY (binary little-endian on write; binary or ASCII on
//! read) triangle meshes.

use std::io::Write;

use nalgebra::Vector3;

use super::pnm::HeaderReader;
use crate::error::{Error, Result};
use crate::meshing::{Source, TriangleMesh};

/// `v`/`f` records with 1-based indices. Coordinates use the shortest
/// decimal form that parses back to the same `f64`.
pub fn write_obj(out: &mut impl Write, mesh: &TriangleMesh) -> Result<()> {
    let mut s = String::with_capacity(32 * (mesh.vertices.len() + mesh.triangles.len()));
    s.push_str("# depthscan mesh: meters, camera frame (+z forward, y down)\n");
    for v in &mesh.vertices {
        s.push_str(&format!("v {} {} {}\n", v.x, v.y, v.z));
    }
    for t in &mesh.triangles {
        s.push_str(&format!("f {} {} {}\n", t[0] + 1, t[1] + 1, t[2] + 1));
    }
    out.write_all(s.as_bytes())?;
    Ok(())
}

/// Reads `v` and `f` records; faces with more than three corners are fanned.
/// Texture/normal references (`f 1/2/3`) and negative indices are accepted.
/// All vertices are tagged front.
pub fn read_obj(bytes: &[u8]) -> Result<TriangleMesh> {
    let text = std::str::from_utf8(bytes).map_err(|e| Error::Parse {
        offset: e.valid_up_to(),
        message: "OBJ is not UTF-8".into(),
    })?;
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    let mut offset = 0;
    for line in text.split_inclusive('\n') {
        let line_start = offset;
        offset += line.len();
        let err = |message: String| Error::Parse {
            offset: line_start,
            message,
        };
        let mut parts = line.split_whitespace();
        match parts.next() {
            Some("v") => {
                let c: Vec<f64> = parts
                    .take(3)
                    .map(|p| {
                        p.parse::<f64>()
                            .map_err(|_| err(format!("bad coordinate {p:?}")))
                    })
                    .collect::<Result<_>>()?;
                if c.len() != 3 {
                    return Err(err("vertex needs three coordinates".into()));
                }
                vertices.push(Vector3::new(c[0], c[1], c[2]));
            }
            Some("f") => {
                let n = vertices.len() as i64;
                let idx: Vec<u32> = parts
                    .map(|p| {
                        let first = p.split('/').next().unwrap_or("");
                        let i: i64 = first
                            .parse()
                            .map_err(|_| err(format!("bad face index {p:?}")))?;
                        let resolved = if i < 0 { n + i } else { i - 1 };
                        if resolved < 0 || resolved >= n {
                            return Err(err(format!("face index {i} out of range")));
                        }
                        Ok(resolved as u32)
                    })
                    .collect::<Result<_>>()?;
                if idx.len() < 3 {
                    return Err(err("face needs at least three corners".into()));
                }
                for k in 1..idx.len() - 1 {
                    triangles.push([idx[0], idx[k], idx[k + 1]]);
                }
            }
            _ => {}
        }
    }
    TriangleMesh::from_front(vertices, triangles)
}

/// Binary little-endian PLY with `double` coordinates, a `uchar source`
/// property (0 front, 1 back) and `uint` face indices.
pub fn write_ply(out: &mut impl Write, mesh: &TriangleMesh) -> Result<()> {
    let header = format!(
        "ply\n\
         format binary_little_endian 1.0\n\
         comment depthscan mesh: meters, camera frame (+z forward, y down)\n\
         element vertex {}\n\
         property double x\n\
         property double y\n\
         property double z\n\
         property uchar source\n\
         element face {}\n\
         property list uchar uint vertex_indices\n\
         end_header\n",
        mesh.vertices.len(),
        mesh.triangles.len()
    );
    let mut buf =
        Vec::with_capacity(header.len() + 25 * mesh.vertices.len() + 13 * mesh.triangles.len());
    buf.extend_from_slice(header.as_bytes());
    for (v, s) in mesh.vertices.iter().zip(&mesh.sources) {
        for k in 0..3 {
            buf.extend_from_slice(&v[k].to_le_bytes());
        }
        buf.push(match s {
            Source::Front => 0,
            Source::Back => 1,
        });
    }
    for t in &mesh.triangles {
        buf.push(3);
        for i in t {
            buf.extend_from_slice(&i.to_le_bytes());
        }
    }
    out.write_all(&buf)?;
    Ok(())
}

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

    fn decode_le(self, b: &[u8]) -> f64 {
        match self {
            Scalar::I8 => b[0] as i8 as f64,
            Scalar::U8 => b[0] as f64,
            Scalar::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::I32 => i32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::U32 => u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::F32 => f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::F64 => f64::from_le_bytes(b[..8].try_into().expect("8 bytes")),
        }
    }
}

#[derive(Debug, Clone)]
enum PropKind {
    Scalar(Scalar),
    List { count: Scalar, item: Scalar },
}

#[derive(Debug, Clone)]
struct Property {
    name: String,
    kind: PropKind,
}

#[derive(Debug, Clone)]
struct Element {
    name: String,
    count: usize,
    props: Vec<Property>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Format {
    Ascii,
    BinaryLe,
}

/// Sequential value source over the PLY body.
trait Body {
    fn next(&mut self, ty: Scalar) -> Result<f64>;
}

struct BinBody<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Body for BinBody<'_> {
    fn next(&mut self, ty: Scalar) -> Result<f64> {
        let n = ty.size();
        let b = self.bytes.get(self.pos..self.pos + n).ok_or(Error::Parse {
            offset: self.pos,
            message: "unexpected end of PLY body".into(),
        })?;
        self.pos += n;
        Ok(ty.decode_le(b))
    }
}

struct AsciiBody<'a> {
    reader: HeaderReader<'a>,
    base: usize,
}

impl Body for AsciiBody<'_> {
    fn next(&mut self, _ty: Scalar) -> Result<f64> {
        self.reader.number("PLY value").map_err(|e| match e {
            Error::Parse { offset, message } => Error::Parse {
                offset: offset + self.base,
                message,
            },
            other => other,
        })
    }
}

fn parse_header(bytes: &[u8]) -> Result<(Format, Vec<Element>, usize)> {
    let end_marker = b"end_header";
    let end = bytes
        .windows(end_marker.len())
        .position(|w| w == end_marker)
        .ok_or(Error::Parse {
            offset: 0,
            message: "missing end_header".into(),
        })?;
    let mut body = end + end_marker.len();
    if bytes.get(body) == Some(&b'\r') {
        body += 1;
    }
    if bytes.get(body) != Some(&b'\n') {
        return Err(Error::Parse {
            offset: body,
            message: "end_header must end its line".into(),
        });
    }
    body += 1;

    let text = std::str::from_utf8(&bytes[..end]).map_err(|e| Error::Parse {
        offset: e.valid_up_to(),
        message: "PLY header is not ASCII".into(),
    })?;
    if !text.starts_with("ply") {
        return Err(Error::Parse {
            offset: 0,
            message: "not a PLY file".into(),
        });
    }
    let mut format = None;
    let mut elements: Vec<Element> = Vec::new();
    let mut offset = 0;
    for line in text.split_inclusive('\n') {
        let at = offset;
        offset += line.len();
        let err = |m: String| Error::Parse {
            offset: at,
            message: m,
        };
        let tok: Vec<&str> = line.split_whitespace().collect();
        match tok.as_slice() {
            ["ply"] | [] => {}
            ["comment", ..] | ["obj_info", ..] => {}
            ["format", f, _version] => {
                format = Some(match *f {
                    "ascii" => Format::Ascii,
                    "binary_little_endian" => Format::BinaryLe,
                    other => return Err(err(format!("unsupported PLY format {other}"))),
                })
            }
            ["element", name, count] => elements.push(Element {
                name: name.to_string(),
                count: count
                    .parse()
                    .map_err(|_| err(format!("bad element count {count:?}")))?,
                props: Vec::new(),
            }),
            ["property", "list", count, item, name] => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| err("property before element".into()))?;
                let (Some(count), Some(item)) = (Scalar::parse(count), Scalar::parse(item)) else {
                    return Err(err(format!("bad list types in {:?}", line.trim())));
                };
                el.props.push(Property {
                    name: name.to_string(),
                    kind: PropKind::List { count, item },
                });
            }
            ["property", ty, name] => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| err("property before element".into()))?;
                let ty = Scalar::parse(ty).ok_or_else(|| err(format!("unknown type {ty:?}")))?;
                el.props.push(Property {
                    name: name.to_string(),
                    kind: PropKind::Scalar(ty),
                });
            }
            _ => return Err(err(format!("unrecognized header line {:?}", line.trim()))),
        }
    }
    let format = format.ok_or(Error::Parse {
        offset: 0,
        message: "missing format line".into(),
    })?;
    Ok((format, elements, body))
}

pub fn read_ply(bytes: &[u8]) -> Result<TriangleMesh> {
    let (format, elements, start) = parse_header(bytes)?;
    let mut bin;
    let mut ascii;
    let body: &mut dyn Body = match format {
        Format::BinaryLe => {
            bin = BinBody { bytes, pos: start };
            &mut bin
        }
        Format::Ascii => {
            ascii = AsciiBody {
                reader: HeaderReader::new(&bytes[start..]),
                base: start,
            };
            &mut ascii
        }
    };

    let mut vertices = Vec::new();
    let mut sources = Vec::new();
    let mut triangles = Vec::new();
    for el in &elements {
        let is_vertex = el.name == "vertex";
        let is_face = el.name == "face";
        if is_vertex {
            for axis in ["x", "y", "z"] {
                if !el.props.iter().any(|p| p.name == axis) {
                    return Err(Error::Parse {
                        offset: 0,
                        message: format!("vertex element lacks property {axis}"),
                    });
                }
            }
        }
        for _ in 0..el.count {
            let mut v = Vector3::zeros();
            let mut source = Source::Front;
            for p in &el.props {
                match p.kind {
                    PropKind::Scalar(ty) => {
                        let x = body.next(ty)?;
                        if is_vertex {
                            match p.name.as_str() {
                                "x" => v.x = x,
                                "y" => v.y = x,
                                "z" => v.z = x,
                                "source" if x != 0.0 => source = Source::Back,
                                _ => {}
                            }
                        }
                    }
                    PropKind::List { count, item } => {
                        let n = body.next(count)? as usize;
                        let mut idx = Vec::with_capacity(n);
                        for _ in 0..n {
                            idx.push(body.next(item)?);
                        }
                        if is_face && (p.name == "vertex_indices" || p.name == "vertex_index") {
                            if n < 3 {
                                return Err(Error::Parse {
                                    offset: 0,
                                    message: format!("face with {n} corners"),
                                });
                            }
                            let idx: Vec<u32> = idx.into_iter().map(|i| i as u32).collect();
                            for k in 1..n - 1 {
                                triangles.push([idx[0], idx[k], idx[k + 1]]);
                            }
                        }
                    }
                }
            }
            if is_vertex {
                vertices.push(v);
                sources.push(source);
            }
        }
    }
    TriangleMesh::new(vertices, triangles, sources)
}
