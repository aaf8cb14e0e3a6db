//! Round trips and malformed-input handling for the file formats.

use std::path::Path;

use csd::error::CliError;
use csd::{obj, ply, png_io, tensors};
use csd_core::adapter::{AdapterConfig, AdapterModel, Tensor};
use csd_core::gaussian::{Gaussian, GaussianCloud};
use csd_core::image::Image;
use csd_core::mesh::Mesh;
use proptest::prelude::*;

const P: &str = "test.bin";

fn gaussian() -> impl Strategy<Value = Gaussian> {
    (
        prop::array::uniform3(-2.0..2.0f64),
        prop::array::uniform3(0.001..0.5f64),
        prop::array::uniform3(-0.5..1.5f64),
        0.01..0.99f64,
        prop::array::uniform4(-1.0..1.0f64),
    )
        .prop_filter("non-degenerate rotation", |(.., q)| q.iter().map(|v| v * v).sum::<f64>() > 0.01)
        .prop_map(|(p, s, c, o, q)| {
            let mut g = Gaussian::new(p, s, c, o);
            let n = q.iter().map(|v| v * v).sum::<f64>().sqrt();
            g.rotation = q.map(|v| v / n);
            g
        })
}

fn f32_exact(cloud: &GaussianCloud) -> GaussianCloud {
    ply::decode_cloud(&ply::encode_cloud(cloud), Path::new(P)).unwrap()
}

proptest! {
    #[test]
    fn cloud_round_trip_is_float32_faithful(gs in prop::collection::vec(gaussian(), 0..20)) {
        let cloud = GaussianCloud::new(gs);
        let once = f32_exact(&cloud);
        prop_assert_eq!(once.len(), cloud.len());
        for (a, b) in once.gaussians.iter().zip(&cloud.gaussians) {
            for (x, y) in a.position.iter().zip(&b.position) {
                prop_assert!((x - y).abs() <= 1e-6 * y.abs().max(1.0));
            }
            for (x, y) in a.color.iter().zip(&b.color) {
                prop_assert!((x - y).abs() <= 1e-6);
            }
            for (x, y) in a.rotation.iter().zip(&b.rotation) {
                prop_assert!((x - y).abs() <= 1e-6);
            }
        }
        // float32 values survive a second pass bit for bit
        prop_assert_eq!(ply::encode_cloud(&once), ply::encode_cloud(&f32_exact(&once)));
    }

    #[test]
    fn tensors_round_trip_exactly(shapes in prop::collection::vec(prop::collection::vec(1usize..4, 0..3), 0..5), seed in any::<u64>()) {
        let mut x = seed;
        let ts: Vec<Tensor> = shapes.iter().enumerate().map(|(i, shape)| {
            let n = shape.iter().product();
            let data = (0..n).map(|_| { x = x.wrapping_mul(6364136223846793005).wrapping_add(1); f64::from_bits(x >> 2) }).collect();
            Tensor { name: format!("t{i}"), shape: shape.clone(), data }
        }).collect();
        let back = tensors::decode_tensors(&tensors::encode_tensors(&ts), Path::new(P)).unwrap();
        prop_assert_eq!(back.len(), ts.len());
        for (a, b) in back.iter().zip(&ts) {
            prop_assert_eq!(&a.name, &b.name);
            prop_assert_eq!(&a.shape, &b.shape);
            prop_assert!(a.data.iter().zip(&b.data).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
    }
}

fn offset_of(e: CliError) -> u64 {
    match e {
        CliError::Format { offset, .. } => offset,
        other => panic!("expected a format error, got {other}"),
    }
}

#[test]
fn truncated_cloud_reports_the_offset() {
    let cloud = GaussianCloud::new(vec![Gaussian::new([0.1, 0.2, 0.3], [0.05; 3], [0.5; 3], 0.5); 3]);
    let bytes = ply::encode_cloud(&cloud);
    let header_len = bytes.len() - 3 * 14 * 4;
    let err = ply::decode_cloud(&bytes[..bytes.len() - 5], Path::new(P)).unwrap_err();
    let offset = offset_of(err);
    assert!(offset >= header_len as u64 && offset <= bytes.len() as u64, "offset {offset}");
}

#[test]
fn malformed_clouds_are_format_errors() {
    let cloud = GaussianCloud::new(vec![Gaussian::new([0.0; 3], [0.05; 3], [0.5; 3], 0.5)]);
    let good = ply::encode_cloud(&cloud);
    assert_eq!(offset_of(ply::decode_cloud(b"plx\n", Path::new(P)).unwrap_err()), 0);
    let mut trailing = good.clone();
    trailing.push(0);
    assert!(matches!(ply::decode_cloud(&trailing, Path::new(P)), Err(CliError::Format { .. })));
    let text = String::from_utf8_lossy(&good[..good.len() - 56]).replace("rot_3", "rot_9");
    let mut renamed = text.into_bytes();
    renamed.extend_from_slice(&good[good.len() - 56..]);
    assert!(matches!(ply::decode_cloud(&renamed, Path::new(P)), Err(CliError::Format { .. })));
    let mut nan = good.clone();
    let n = nan.len();
    nan[n - 56..n - 52].copy_from_slice(&f32::NAN.to_le_bytes());
    assert!(matches!(ply::decode_cloud(&nan, Path::new(P)), Err(CliError::Format { .. })));
}

#[test]
fn unnormalized_rotation_is_renormalized() {
    let mut g = Gaussian::new([0.0; 3], [0.05; 3], [0.5; 3], 0.5);
    g.rotation = [2.0, 0.0, 0.0, 0.0];
    let back = f32_exact(&GaussianCloud::new(vec![g]));
    assert_eq!(back.gaussians[0].rotation, [1.0, 0.0, 0.0, 0.0]);
}

fn tetrahedron(colored: bool) -> Mesh {
    Mesh {
        vertices: vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
        faces: vec![[0, 2, 1], [0, 1, 3], [0, 3, 2], [1, 2, 3]],
        colors: colored.then(|| vec![[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [0.2, 0.4, 0.6]]),
    }
}

fn assert_same_mesh(a: &Mesh, b: &Mesh, color_tol: f64) {
    assert_eq!(a.faces, b.faces);
    assert_eq!(a.vertices, b.vertices);
    match (&a.colors, &b.colors) {
        (Some(x), Some(y)) => {
            for (p, q) in x.iter().zip(y) {
                for k in 0..3 {
                    assert!((p[k] - q[k]).abs() <= color_tol);
                }
            }
        }
        (None, None) => {}
        _ => panic!("color presence differs"),
    }
}

#[test]
fn meshes_round_trip_through_obj_and_ply() {
    for colored in [false, true] {
        let m = tetrahedron(colored);
        let via_ply = ply::decode_mesh(&ply::encode_mesh(&m), Path::new(P)).unwrap();
        assert_same_mesh(&via_ply, &m, 0.5 / 255.0);
        let via_obj = obj::decode_obj(&obj::encode_obj(&m), Path::new(P)).unwrap();
        assert_same_mesh(&via_obj, &m, 1e-6);
        assert!(via_obj.is_watertight());
    }
}

#[test]
fn obj_accepts_slashes_and_negative_indices() {
    let text = "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1/1/1 2//2 -1\n";
    let m = obj::decode_obj(text, Path::new(P)).unwrap();
    assert_eq!(m.faces, vec![[0, 1, 2]]);
    assert!(obj::decode_obj("v 0 0 0\nf 1 2 3\n", Path::new(P)).is_err());
    assert!(obj::decode_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nv 1 1 0\nf 1 2 3 4\n", Path::new(P)).is_err());
}

#[test]
fn mesh_with_bad_index_is_rejected() {
    let mut m = tetrahedron(false);
    m.faces[0] = [0, 1, 7];
    assert!(ply::decode_mesh(&ply::encode_mesh(&m), Path::new(P)).is_err());
}

#[test]
fn png_round_trip_is_8_bit_faithful() {
    let mut img = Image::new(5, 3);
    for (i, v) in img.data.iter_mut().enumerate() {
        *v = (i * 37 % 256) as f64 / 255.0;
    }
    let back = png_io::decode_png(&png_io::encode_png(&img, None).unwrap(), Path::new(P)).unwrap();
    assert_eq!(back, img);
    let alpha = vec![0.5; 15];
    let with_alpha = png_io::decode_png(&png_io::encode_png(&img, Some(&alpha)).unwrap(), Path::new(P)).unwrap();
    assert_eq!(with_alpha, img);
    assert!(png_io::decode_png(b"not a png", Path::new(P)).is_err());
}

#[test]
fn adapter_checkpoint_round_trips() {
    let model = AdapterModel::new(AdapterConfig { hidden: 8, grid: 4, ..Default::default() }).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("adapter.bin");
    tensors::write_tensors(&path, &model.tensors()).unwrap();
    assert_eq!(tensors::read_tensors(&path).unwrap(), model.tensors());
    let bytes = std::fs::read(&path).unwrap();
    assert!(matches!(tensors::decode_tensors(&bytes[..bytes.len() - 1], Path::new(P)), Err(CliError::Format { .. })));
}
