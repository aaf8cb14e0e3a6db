//! Procedural target images.

use csd_core::image::Image;

pub const PATTERN_SIZE: usize = 32;
const BACKGROUND: [f64; 3] = [1.0, 1.0, 1.0];

fn draw(size: usize, paint: impl Fn(f64, f64) -> Option<[f64; 3]>) -> Image {
    let mut img = Image::filled(size, size, BACKGROUND);
    for y in 0..size {
        for x in 0..size {
            // pixel centre in [-1, 1]², y pointing down
            let u = (x as f64 + 0.5) / size as f64 * 2.0 - 1.0;
            let v = (y as f64 + 0.5) / size as f64 * 2.0 - 1.0;
            if let Some(c) = paint(u, v) {
                img.set_pixel(x, y, c);
            }
        }
    }
    img
}

fn inside(u: f64, v: f64, cu: f64, cv: f64, ru: f64, rv: f64) -> bool {
    let (a, b) = ((u - cu) / ru, (v - cv) / rv);
    a * a + b * b <= 1.0
}

/// A skin-toned head with dark eyes and a red mouth.
pub fn face(size: usize) -> Image {
    draw(size, |u, v| {
        if !inside(u, v, 0.0, 0.0, 0.6, 0.7) {
            return None;
        }
        if inside(u, v, -0.25, -0.2, 0.12, 0.1) || inside(u, v, 0.25, -0.2, 0.12, 0.1) {
            return Some([0.1, 0.1, 0.15]);
        }
        if inside(u, v, 0.0, 0.32, 0.28, 0.08) {
            return Some([0.8, 0.1, 0.1]);
        }
        Some([0.95, 0.75, 0.6])
    })
}

/// The same head outline covered in dark hair.
pub fn back(size: usize) -> Image {
    draw(size, |u, v| inside(u, v, 0.0, 0.0, 0.6, 0.7).then_some([0.3, 0.18, 0.08]))
}

pub fn by_name(name: &str, size: usize) -> Option<Image> {
    match name {
        "face" => Some(face(size)),
        "back" => Some(back(size)),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn patterns_differ_only_inside_the_head() {
        let (f, b) = (face(PATTERN_SIZE), back(PATTERN_SIZE));
        assert_eq!(f.pixel(0, 0), BACKGROUND);
        assert_eq!(b.pixel(0, 0), BACKGROUND);
        assert!(f.l2_distance(&b) > 5.0);
        assert_eq!(b.pixel(16, 16), [0.3, 0.18, 0.08]);
    }
}
