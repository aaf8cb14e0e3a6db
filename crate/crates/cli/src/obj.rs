//! Wavefront OBJ meshes with optional `v x y z r g b` vertex colors.

use std::fmt::Write;
use std::path::Path;

use csd_core::mesh::Mesh;

use crate::error::{CliError, Result};
use crate::files::{read_text, write_bytes};

pub fn encode_obj(mesh: &Mesh) -> String {
    let mut out = String::new();
    for (i, v) in mesh.vertices.iter().enumerate() {
        write!(out, "v {} {} {}", v[0] as f32, v[1] as f32, v[2] as f32).expect("write to string");
        if let Some(colors) = &mesh.colors {
            let c = colors[i];
            write!(out, " {} {} {}", c[0] as f32, c[1] as f32, c[2] as f32).expect("write to string");
        }
        out.push('\n');
    }
    for f in &mesh.faces {
        writeln!(out, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1).expect("write to string");
    }
    out
}

fn line_error(path: &Path, offset: usize, message: String) -> CliError {
    CliError::Format { path: path.to_path_buf(), offset: offset as u64, message }
}

/// Parses `v` and triangular `f` lines; other statements are ignored.
pub fn decode_obj(text: &str, path: &Path) -> Result<Mesh> {
    let mut mesh = Mesh::default();
    let mut colors = Vec::new();
    let mut offset = 0;
    for (n, line) in text.split_inclusive('\n').enumerate() {
        let at = offset;
        offset += line.len();
        let mut words = line.split_whitespace();
        match words.next() {
            Some("v") => {
                let nums: Vec<f64> = words
                    .map(|w| w.parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|e| line_error(path, at, format!("line {}: {e}", n + 1)))?;
                match nums.len() {
                    3 => mesh.vertices.push([nums[0], nums[1], nums[2]]),
                    6 => {
                        mesh.vertices.push([nums[0], nums[1], nums[2]]);
                        colors.push([nums[3], nums[4], nums[5]]);
                    }
                    k => return Err(line_error(path, at, format!("line {}: vertex with {k} values", n + 1))),
                }
            }
            Some("f") => {
                let ids: Vec<i64> = words
                    .map(|w| w.split('/').next().unwrap_or("").parse::<i64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|e| line_error(path, at, format!("line {}: {e}", n + 1)))?;
                if ids.len() != 3 {
                    return Err(line_error(path, at, format!("line {}: face with {} corners, expected 3", n + 1, ids.len())));
                }
                let count = mesh.vertices.len() as i64;
                let mut face = [0u32; 3];
                for (slot, id) in face.iter_mut().zip(&ids) {
                    // negative indices count back from the latest vertex
                    let i = if *id < 0 { count + id } else { id - 1 };
                    if i < 0 || i >= count {
                        return Err(line_error(path, at, format!("line {}: vertex index {id} out of range", n + 1)));
                    }
                    *slot = i as u32;
                }
                mesh.faces.push(face);
            }
            _ => {}
        }
    }
    if !colors.is_empty() {
        if colors.len() != mesh.vertices.len() {
            return Err(line_error(path, 0, "only some vertices carry colors".into()));
        }
        mesh.colors = Some(colors);
    }
    Ok(mesh)
}

pub fn write_obj(path: &Path, mesh: &Mesh) -> Result<()> {
    write_bytes(path, encode_obj(mesh).as_bytes())
}

pub fn read_obj(path: &Path) -> Result<Mesh> {
    decode_obj(&read_text(path)?, path)
}
