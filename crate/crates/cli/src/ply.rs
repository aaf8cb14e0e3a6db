//! Binary little-endian PLY: Gaussian cloud checkpoints in the common 3D-GS
//! vertex layout, and triangle meshes.

use std::io::Write;
use std::path::Path;

use csd_core::gaussian::{Gaussian, GaussianCloud, ROTATION_NORM_TOLERANCE};
use csd_core::mesh::Mesh;

use crate::error::{CliError, Result};
use crate::files::{read_bytes, write_bytes};

/// Vertex properties of a cloud checkpoint, in file order.
pub const CLOUD_PROPERTIES: [&str; 14] = [
    "x", "y", "z", "f_dc_0", "f_dc_1", "f_dc_2", "opacity", "scale_0", "scale_1", "scale_2", "rot_0", "rot_1", "rot_2",
    "rot_3",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scalar {
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
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PropertyKind {
    Scalar(Scalar),
    List { count: Scalar, item: Scalar },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Property {
    pub name: String,
    pub kind: PropertyKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Element {
    pub name: String,
    pub count: usize,
    pub properties: Vec<Property>,
}

impl Element {
    fn find(&self, name: &str) -> Option<usize> {
        self.properties.iter().position(|p| p.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Header {
    pub elements: Vec<Element>,
    /// Byte offset of the first body byte.
    pub body: usize,
}

fn format_error(path: &Path, offset: usize, message: impl Into<String>) -> CliError {
    CliError::Format { path: path.to_path_buf(), offset: offset as u64, message: message.into() }
}

/// Parses the ASCII header of a binary little-endian PLY file.
pub fn parse_header(bytes: &[u8], path: &Path) -> Result<Header> {
    if !(bytes.starts_with(b"ply\n") || bytes.starts_with(b"ply\r\n")) {
        return Err(format_error(path, 0, "missing ply magic"));
    }
    let mut offset = 0;
    let mut lines = Vec::new();
    loop {
        let Some(end) = bytes[offset..].iter().position(|b| *b == b'\n') else {
            return Err(format_error(path, offset, "header is not terminated by end_header"));
        };
        let line = std::str::from_utf8(&bytes[offset..offset + end])
            .map_err(|_| format_error(path, offset, "header is not ASCII"))?
            .trim_end_matches('\r')
            .to_string();
        lines.push((offset, line.clone()));
        offset += end + 1;
        if line == "end_header" {
            break;
        }
    }
    let iter = lines.into_iter().skip(1);
    let mut elements: Vec<Element> = Vec::new();
    let mut format_seen = false;
    for (at, line) in iter {
        let words: Vec<&str> = line.split_whitespace().collect();
        match words.as_slice() {
            ["format", "binary_little_endian", "1.0"] => format_seen = true,
            ["format", other, ..] => return Err(format_error(path, at, format!("unsupported format {other}"))),
            ["comment", ..] | ["obj_info", ..] | ["end_header"] => {}
            ["element", name, count] => {
                let count = count.parse().map_err(|_| format_error(path, at, format!("bad element count {count}")))?;
                elements.push(Element { name: name.to_string(), count, properties: Vec::new() });
            }
            ["property", "list", count, item, name] => {
                let (Some(count), Some(item)) = (Scalar::parse(count), Scalar::parse(item)) else {
                    return Err(format_error(path, at, format!("unknown list types for {name}")));
                };
                let el = elements.last_mut().ok_or_else(|| format_error(path, at, "property before any element"))?;
                el.properties.push(Property { name: name.to_string(), kind: PropertyKind::List { count, item } });
            }
            ["property", ty, name] => {
                let ty = Scalar::parse(ty).ok_or_else(|| format_error(path, at, format!("unknown property type {ty}")))?;
                let el = elements.last_mut().ok_or_else(|| format_error(path, at, "property before any element"))?;
                el.properties.push(Property { name: name.to_string(), kind: PropertyKind::Scalar(ty) });
            }
            _ => return Err(format_error(path, at, format!("unrecognized header line `{line}`"))),
        }
    }
    if !format_seen {
        return Err(format_error(path, 0, "missing format line"));
    }
    Ok(Header { elements, body: offset })
}

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Scalar(f64),
    List(Vec<f64>),
}

impl Value {
    fn scalar(&self) -> Option<f64> {
        match self {
            Value::Scalar(v) => Some(*v),
            Value::List(_) => None,
        }
    }
}

struct Body<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl Body<'_> {
    fn scalar(&mut self, s: Scalar) -> Result<f64> {
        let n = s.size();
        let Some(raw) = self.bytes.get(self.pos..self.pos + n) else {
            return Err(format_error(self.path, self.pos, "unexpected end of file"));
        };
        self.pos += n;
        Ok(match s {
            Scalar::I8 => raw[0] as i8 as f64,
            Scalar::U8 => raw[0] as f64,
            Scalar::I16 => i16::from_le_bytes([raw[0], raw[1]]) as f64,
            Scalar::U16 => u16::from_le_bytes([raw[0], raw[1]]) as f64,
            Scalar::I32 => i32::from_le_bytes(raw.try_into().expect("4 bytes")) as f64,
            Scalar::U32 => u32::from_le_bytes(raw.try_into().expect("4 bytes")) as f64,
            Scalar::F32 => f32::from_le_bytes(raw.try_into().expect("4 bytes")) as f64,
            Scalar::F64 => f64::from_le_bytes(raw.try_into().expect("8 bytes")),
        })
    }

    fn row(&mut self, el: &Element) -> Result<Vec<Value>> {
        el.properties
            .iter()
            .map(|p| match p.kind {
                PropertyKind::Scalar(s) => self.scalar(s).map(Value::Scalar),
                PropertyKind::List { count, item } => {
                    let at = self.pos;
                    let n = self.scalar(count)?;
                    if !(n >= 0.0) {
                        return Err(format_error(self.path, at, "negative list length"));
                    }
                    (0..n as usize).map(|_| self.scalar(item)).collect::<Result<Vec<_>>>().map(Value::List)
                }
            })
            .collect()
    }
}

/// Every row of every element, in file order.
fn read_elements<'h>(bytes: &[u8], path: &Path, header: &'h Header) -> Result<Vec<(&'h Element, Vec<Vec<Value>>)>> {
    let mut body = Body { bytes, pos: header.body, path };
    let mut out = Vec::with_capacity(header.elements.len());
    for el in &header.elements {
        let rows = (0..el.count).map(|_| body.row(el)).collect::<Result<Vec<_>>>()?;
        out.push((el, rows));
    }
    if body.pos != bytes.len() {
        return Err(format_error(path, body.pos, format!("{} trailing bytes after the last element", bytes.len() - body.pos)));
    }
    Ok(out)
}

fn scalar_columns(el: &Element, names: &[&str], path: &Path, header_end: usize) -> Result<Vec<usize>> {
    names
        .iter()
        .map(|n| match el.find(n) {
            Some(i) if matches!(el.properties[i].kind, PropertyKind::Scalar(_)) => Ok(i),
            Some(_) => Err(format_error(path, header_end, format!("property {n} of {} must be a scalar", el.name))),
            None => Err(format_error(path, header_end, format!("element {} lacks property {n}", el.name))),
        })
        .collect()
}

/// Serializes a cloud as float32 vertices: position, raw color, opacity
/// logit, log scale and the (w, x, y, z) rotation.
pub fn encode_cloud(cloud: &GaussianCloud) -> Vec<u8> {
    let mut out = Vec::with_capacity(256 + cloud.len() * CLOUD_PROPERTIES.len() * 4);
    writeln!(out, "ply\nformat binary_little_endian 1.0\nelement vertex {}", cloud.len()).expect("write to vec");
    for name in CLOUD_PROPERTIES {
        writeln!(out, "property float {name}").expect("write to vec");
    }
    out.extend_from_slice(b"end_header\n");
    for g in &cloud.gaussians {
        let row = g.position.iter().chain(&g.color).chain([&g.opacity_logit]).chain(&g.log_scale).chain(&g.rotation);
        for v in row {
            out.extend_from_slice(&(*v as f32).to_le_bytes());
        }
    }
    out
}

pub fn decode_cloud(bytes: &[u8], path: &Path) -> Result<GaussianCloud> {
    let header = parse_header(bytes, path)?;
    let elements = read_elements(bytes, path, &header)?;
    let Some((el, rows)) = elements.iter().find(|(el, _)| el.name == "vertex") else {
        return Err(format_error(path, header.body, "no vertex element"));
    };
    let cols = scalar_columns(el, &CLOUD_PROPERTIES, path, header.body)?;
    let row_bytes: usize = el
        .properties
        .iter()
        .map(|p| match p.kind {
            PropertyKind::Scalar(s) => s.size(),
            PropertyKind::List { .. } => 0,
        })
        .sum();
    let mut gaussians = Vec::with_capacity(rows.len());
    for (i, row) in rows.iter().enumerate() {
        let v: Vec<f64> = cols.iter().map(|c| row[*c].scalar().expect("scalar column")).collect();
        let at = header.body + i * row_bytes;
        if v.iter().any(|x| !x.is_finite()) {
            return Err(format_error(path, at, format!("vertex {i} has a non-finite value")));
        }
        let mut rotation = [v[10], v[11], v[12], v[13]];
        let norm = rotation.iter().map(|q| q * q).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(format_error(path, at, format!("vertex {i} has a zero rotation quaternion")));
        }
        if (norm - 1.0).abs() > ROTATION_NORM_TOLERANCE {
            rotation.iter_mut().for_each(|q| *q /= norm);
        }
        gaussians.push(Gaussian {
            position: [v[0], v[1], v[2]],
            color: [v[3], v[4], v[5]],
            opacity_logit: v[6],
            log_scale: [v[7], v[8], v[9]],
            rotation,
        });
    }
    Ok(GaussianCloud::new(gaussians))
}

pub fn write_cloud(path: &Path, cloud: &GaussianCloud) -> Result<()> {
    write_bytes(path, &encode_cloud(cloud))
}

pub fn read_cloud(path: &Path) -> Result<GaussianCloud> {
    decode_cloud(&read_bytes(path)?, path)
}

/// Serializes a mesh with float32 positions, optional uchar colors and
/// uchar-counted int face lists.
pub fn encode_mesh(mesh: &Mesh) -> Vec<u8> {
    let mut out = Vec::new();
    writeln!(out, "ply\nformat binary_little_endian 1.0\nelement vertex {}", mesh.vertices.len()).expect("write to vec");
    out.extend_from_slice(b"property float x\nproperty float y\nproperty float z\n");
    if mesh.colors.is_some() {
        out.extend_from_slice(b"property uchar red\nproperty uchar green\nproperty uchar blue\n");
    }
    writeln!(out, "element face {}\nproperty list uchar int vertex_indices\nend_header", mesh.faces.len())
        .expect("write to vec");
    for (i, v) in mesh.vertices.iter().enumerate() {
        for x in v {
            out.extend_from_slice(&(*x as f32).to_le_bytes());
        }
        if let Some(colors) = &mesh.colors {
            out.extend(colors[i].iter().map(|c| quantize(*c)));
        }
    }
    for f in &mesh.faces {
        out.push(3);
        for i in f {
            out.extend_from_slice(&(*i as i32).to_le_bytes());
        }
    }
    out
}

pub fn quantize(c: f64) -> u8 {
    (c.clamp(0.0, 1.0) * 255.0).round() as u8
}

pub fn decode_mesh(bytes: &[u8], path: &Path) -> Result<Mesh> {
    let header = parse_header(bytes, path)?;
    let elements = read_elements(bytes, path, &header)?;
    let mut mesh = Mesh::default();
    for (el, rows) in &elements {
        match el.name.as_str() {
            "vertex" => {
                let cols = scalar_columns(el, &["x", "y", "z"], path, header.body)?;
                mesh.vertices = rows.iter().map(|r| [0, 1, 2].map(|k| r[cols[k]].scalar().expect("scalar"))).collect();
                if let Ok(cc) = scalar_columns(el, &["red", "green", "blue"], path, header.body) {
                    let byte = matches!(el.properties[cc[0]].kind, PropertyKind::Scalar(Scalar::U8));
                    let scale = if byte { 1.0 / 255.0 } else { 1.0 };
                    mesh.colors =
                        Some(rows.iter().map(|r| [0, 1, 2].map(|k| r[cc[k]].scalar().expect("scalar") * scale)).collect());
                }
            }
            "face" => {
                let Some(col) = el.find("vertex_indices").or_else(|| el.find("vertex_index")) else {
                    return Err(format_error(path, header.body, "face element lacks vertex_indices"));
                };
                for (i, r) in rows.iter().enumerate() {
                    let Value::List(ids) = &r[col] else {
                        return Err(format_error(path, header.body, "vertex_indices must be a list"));
                    };
                    if ids.len() != 3 {
                        return Err(format_error(path, header.body, format!("face {i} has {} corners, expected 3", ids.len())));
                    }
                    mesh.faces.push([ids[0] as u32, ids[1] as u32, ids[2] as u32]);
                }
            }
            _ => {}
        }
    }
    mesh.validate().map_err(|e| format_error(path, header.body, e.to_string()))?;
    Ok(mesh)
}

pub fn write_mesh(path: &Path, mesh: &Mesh) -> Result<()> {
    write_bytes(path, &encode_mesh(mesh))
}

pub fn read_mesh(path: &Path) -> Result<Mesh> {
    decode_mesh(&read_bytes(path)?, path)
}
