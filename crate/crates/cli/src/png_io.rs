//! 8-bit sRGB PNG export of rendered images and import of target images.

use std::path::Path;

use csd_core::image::Image;
use csd_core::render::RenderedImage;

use crate::error::{CliError, Result};
use crate::files::{read_bytes, write_bytes};
use crate::ply::quantize;

fn png_error(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Format { path: path.to_path_buf(), offset: 0, message: e.to_string() }
}

/// Encodes `rgb` (values clamped to [0, 1]) with an optional straight alpha
/// channel.
pub fn encode_png(rgb: &Image, alpha: Option<&[f64]>) -> std::result::Result<Vec<u8>, png::EncodingError> {
    let (w, h) = (rgb.width, rgb.height);
    let channels = if alpha.is_some() { 4 } else { 3 };
    let mut data = Vec::with_capacity(w * h * channels);
    for p in 0..w * h {
        data.extend(rgb.data[p * 3..p * 3 + 3].iter().map(|c| quantize(*c)));
        if let Some(a) = alpha {
            data.push(quantize(a[p]));
        }
    }
    let mut out = Vec::new();
    let mut encoder = png::Encoder::new(&mut out, w as u32, h as u32);
    encoder.set_color(if alpha.is_some() { png::ColorType::Rgba } else { png::ColorType::Rgb });
    encoder.set_depth(png::BitDepth::Eight);
    encoder.set_source_srgb(png::SrgbRenderingIntent::Perceptual);
    let mut writer = encoder.write_header()?;
    writer.write_image_data(&data)?;
    writer.finish()?;
    Ok(out)
}

pub fn write_png(path: &Path, rgb: &Image, alpha: Option<&[f64]>) -> Result<()> {
    let bytes = encode_png(rgb, alpha).map_err(|e| png_error(path, e))?;
    write_bytes(path, &bytes)
}

pub fn write_render(path: &Path, img: &RenderedImage, with_alpha: bool) -> Result<()> {
    write_png(path, &img.rgb, with_alpha.then_some(img.alpha.as_slice()))
}

/// Decodes any 8- or 16-bit PNG into RGB values in [0, 1]; alpha is dropped.
pub fn decode_png(bytes: &[u8], path: &Path) -> Result<Image> {
    let mut decoder = png::Decoder::new(bytes);
    decoder.set_transformations(png::Transformations::normalize_to_color8());
    let mut reader = decoder.read_info().map_err(|e| png_error(path, e))?;
    let mut buf = vec![0; reader.output_buffer_size()];
    let info = reader.next_frame(&mut buf).map_err(|e| png_error(path, e))?;
    let (w, h) = (info.width as usize, info.height as usize);
    let channels = info.color_type.samples();
    let mut img = Image::new(w, h);
    for p in 0..w * h {
        let px = &buf[p * channels..(p + 1) * channels];
        let rgb = if channels >= 3 { [px[0], px[1], px[2]] } else { [px[0]; 3] };
        for k in 0..3 {
            img.data[p * 3 + k] = rgb[k] as f64 / 255.0;
        }
    }
    Ok(img)
}

pub fn read_png(path: &Path) -> Result<Image> {
    decode_png(&read_bytes(path)?, path)
}
