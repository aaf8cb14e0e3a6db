//! Orbit cameras looking at the origin, random viewpoint sampling and
//! view-direction buckets.
//!
//! World frame: right-handed, `+y` up, azimuth 0 on the `+z` axis, positive
//! elevation above the horizon. View frame: `x` right, `y` down, `z` forward
//! (depth), so pixel coordinates follow the usual raster orientation.

use rand::Rng;

use crate::error::{Error, Result};
use crate::math::{self, cos, sin, tan, Mat3, Vec3};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Camera {
    /// Degrees in `[-180, 180)`.
    pub azimuth: f64,
    /// Degrees.
    pub elevation: f64,
    pub radius: f64,
    /// Vertical field of view in degrees.
    pub fov_y: f64,
    pub width: usize,
    pub height: usize,
    position: Vec3,
    world_to_view: Mat3,
    focal: f64,
}

impl Camera {
    pub fn new(azimuth: f64, elevation: f64, radius: f64, fov_y: f64, width: usize, height: usize) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::InvalidParameter("camera radius must be positive".into()));
        }
        if !(fov_y > 0.0 && fov_y < 180.0) {
            return Err(Error::InvalidParameter("camera fov_y must lie in (0, 180)".into()));
        }
        if !azimuth.is_finite() || !elevation.is_finite() {
            return Err(Error::InvalidParameter("camera angles must be finite".into()));
        }
        if width == 0 || height == 0 {
            return Err(Error::InvalidParameter("image size must be non-zero".into()));
        }
        let azimuth = wrap_azimuth(azimuth);
        let (az, el) = (azimuth.to_radians(), elevation.to_radians());
        let (sa, ca, se, ce) = (sin(az), cos(az), sin(el), cos(el));
        let position = [radius * ce * sa, radius * se, radius * ce * ca];
        let forward = [-ce * sa, -se, -ce * ca];
        // Right vector in closed form so the basis stays defined straight up/down.
        let right = [ca, 0.0, -sa];
        let down = math::cross3(&forward, &right);
        let focal = 0.5 * height as f64 / tan(0.5 * fov_y.to_radians());
        Ok(Self {
            azimuth,
            elevation,
            radius,
            fov_y,
            width,
            height,
            position,
            world_to_view: [right, down, forward],
            focal,
        })
    }

    /// Same viewpoint, different image resolution.
    pub fn with_resolution(&self, width: usize, height: usize) -> Result<Self> {
        Camera::new(self.azimuth, self.elevation, self.radius, self.fov_y, width, height)
    }

    pub fn with_azimuth(&self, azimuth: f64) -> Result<Self> {
        Camera::new(azimuth, self.elevation, self.radius, self.fov_y, self.width, self.height)
    }

    #[inline]
    pub fn position(&self) -> Vec3 {
        self.position
    }

    /// Rows are the view-frame axes (right, down, forward) in world coordinates.
    #[inline]
    pub fn rotation(&self) -> &Mat3 {
        &self.world_to_view
    }

    #[inline]
    pub fn focal(&self) -> (f64, f64) {
        (self.focal, self.focal)
    }

    #[inline]
    pub fn principal_point(&self) -> (f64, f64) {
        (0.5 * self.width as f64, 0.5 * self.height as f64)
    }

    #[inline]
    pub fn world_to_view(&self, p: &Vec3) -> Vec3 {
        math::mat3_vec(&self.world_to_view, &math::sub3(p, &self.position))
    }

    /// Pixel coordinates of a world point, `None` behind the near plane.
    pub fn project(&self, p: &Vec3) -> Option<[f64; 2]> {
        let v = self.world_to_view(p);
        if v[2] <= crate::render::NEAR_PLANE {
            return None;
        }
        let (cx, cy) = self.principal_point();
        Some([self.focal * v[0] / v[2] + cx, self.focal * v[1] / v[2] + cy])
    }
}

/// Wraps degrees into `[-180, 180)`.
pub fn wrap_azimuth(deg: f64) -> f64 {
    let mut x = (deg + 180.0) % 360.0;
    if x < 0.0 {
        x += 360.0;
    }
    x - 180.0
}

/// Four cameras 90° apart in azimuth sharing every other parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraQuad {
    pub cameras: [Camera; 4],
}

impl CameraQuad {
    pub fn new(base: Camera) -> Result<Self> {
        let at = |k: f64| base.with_azimuth(base.azimuth + 90.0 * k);
        Ok(Self { cameras: [base, at(1.0)?, at(2.0)?, at(3.0)?] })
    }

    /// Quad at azimuths {0, 90, 180, 270}.
    pub fn canonical(elevation: f64, radius: f64, fov_y: f64, width: usize, height: usize) -> Result<Self> {
        Self::new(Camera::new(0.0, elevation, radius, fov_y, width, height)?)
    }

    pub fn with_resolution(&self, width: usize, height: usize) -> Result<Self> {
        Self::new(self.cameras[0].with_resolution(width, height)?)
    }
}

/// Closed sampling interval `[min, max]` (azimuth is half-open when wide).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Range {
    pub min: f64,
    pub max: f64,
}

impl Range {
    pub const fn new(min: f64, max: f64) -> Self {
        Self { min, max }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.min == self.max {
            // still consume a draw so the stream position does not depend on the range
            let _: f64 = rng.random();
            self.min
        } else {
            rng.random_range(self.min..self.max)
        }
    }

    fn is_valid(&self) -> bool {
        self.min.is_finite() && self.max.is_finite() && self.min <= self.max
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraRanges {
    pub azimuth: Range,
    pub elevation: Range,
    pub radius: Range,
    pub fov_y: Range,
}

impl Default for CameraRanges {
    fn default() -> Self {
        Self {
            azimuth: Range::new(-180.0, 180.0),
            elevation: Range::new(-90.0, 30.0),
            radius: Range::new(2.0, 2.5),
            fov_y: Range::new(40.0, 70.0),
        }
    }
}

impl CameraRanges {
    pub fn validate(&self) -> Result<()> {
        let ok = self.azimuth.is_valid()
            && self.elevation.is_valid()
            && self.radius.is_valid()
            && self.fov_y.is_valid()
            && self.elevation.min >= -90.0
            && self.elevation.max <= 90.0
            && self.radius.min > 0.0
            && self.fov_y.min > 0.0
            && self.fov_y.max < 180.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter("camera ranges must satisfy min <= max within the camera invariants".into()))
        }
    }
}

pub fn sample_camera<R: Rng + ?Sized>(rng: &mut R, ranges: &CameraRanges, width: usize, height: usize) -> Result<Camera> {
    ranges.validate()?;
    let azimuth = ranges.azimuth.sample(rng);
    let elevation = ranges.elevation.sample(rng);
    let radius = ranges.radius.sample(rng);
    let fov_y = ranges.fov_y.sample(rng);
    Camera::new(azimuth, elevation, radius, fov_y, width, height)
}

/// Samples a base camera and completes it to an orthogonal quad.
pub fn sample_orthogonal_quad<R: Rng + ?Sized>(
    rng: &mut R,
    ranges: &CameraRanges,
    width: usize,
    height: usize,
) -> Result<CameraQuad> {
    CameraQuad::new(sample_camera(rng, ranges, width, height)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ViewBucket {
    Front,
    Side,
    Back,
    Overhead,
}

impl ViewBucket {
    pub const ALL: [ViewBucket; 4] = [ViewBucket::Front, ViewBucket::Side, ViewBucket::Back, ViewBucket::Overhead];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            ViewBucket::Front => "front",
            ViewBucket::Side => "side",
            ViewBucket::Back => "back",
            ViewBucket::Overhead => "overhead",
        }
    }
}

/// Azimuth/elevation thresholds, in degrees, of the view buckets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BucketBoundaries {
    pub front: f64,
    pub back: f64,
    pub overhead: f64,
}

impl Default for BucketBoundaries {
    fn default() -> Self {
        Self { front: 45.0, back: 135.0, overhead: 60.0 }
    }
}

pub fn view_bucket(cam: &Camera) -> ViewBucket {
    view_bucket_with(cam, &BucketBoundaries::default())
}

pub fn view_bucket_with(cam: &Camera, b: &BucketBoundaries) -> ViewBucket {
    if cam.elevation.abs() > b.overhead {
        return ViewBucket::Overhead;
    }
    let az = cam.azimuth;
    if az > -b.front && az <= b.front {
        ViewBucket::Front
    } else if az.abs() <= b.back {
        // includes az = -front exactly, which the front interval leaves open
        ViewBucket::Side
    } else {
        ViewBucket::Back
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn origin_projects_to_image_center() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..500 {
            let cam = sample_camera(&mut rng, &CameraRanges::default(), 64, 48).unwrap();
            let p = cam.project(&[0.0; 3]).unwrap();
            assert!((p[0] - 32.0).abs() < 1e-6 && (p[1] - 24.0).abs() < 1e-6, "{p:?} for {cam:?}");
        }
    }

    #[test]
    fn view_axes_are_orthonormal() {
        for &(az, el) in &[(0.0, 0.0), (37.0, -90.0), (-120.0, 30.0), (90.0, 89.0)] {
            let cam = Camera::new(az, el, 2.0, 50.0, 8, 8).unwrap();
            let r = cam.rotation();
            for i in 0..3 {
                for j in 0..3 {
                    let d = math::dot3(&r[i], &r[j]);
                    assert!((d - if i == j { 1.0 } else { 0.0 }).abs() < 1e-12);
                }
            }
            assert!((math::mat3_det(r) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn front_camera_frame() {
        let cam = Camera::new(0.0, 0.0, 2.0, 60.0, 10, 10).unwrap();
        assert_eq!(cam.position(), [0.0, 0.0, 2.0]);
        // +x world appears to the right, +y world appears above the center
        let right = cam.project(&[0.1, 0.0, 0.0]).unwrap();
        let up = cam.project(&[0.0, 0.1, 0.0]).unwrap();
        assert!(right[0] > 5.0 && up[1] < 5.0);
    }

    #[test]
    fn default_ranges_hold() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10_000 {
            let c = sample_camera(&mut rng, &CameraRanges::default(), 4, 4).unwrap();
            assert!((-90.0..=30.0).contains(&c.elevation));
            assert!((2.0..=2.5).contains(&c.radius));
            assert!((40.0..=70.0).contains(&c.fov_y));
            assert!((-180.0..180.0).contains(&c.azimuth));
        }
    }

    #[test]
    fn point_range_is_constant_and_seed_reproducible() {
        let ranges = CameraRanges {
            azimuth: Range::new(10.0, 10.0),
            elevation: Range::new(5.0, 5.0),
            radius: Range::new(2.2, 2.2),
            fov_y: Range::new(45.0, 45.0),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = sample_camera(&mut rng, &ranges, 4, 4).unwrap();
        let b = sample_camera(&mut rng, &ranges, 4, 4).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.azimuth, 10.0);

        let seq = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..20).map(|_| sample_camera(&mut rng, &CameraRanges::default(), 4, 4).unwrap()).collect::<alloc::vec::Vec<_>>()
        };
        assert_eq!(seq(3), seq(3));
    }

    #[test]
    fn invalid_ranges_rejected() {
        let mut ranges = CameraRanges::default();
        ranges.radius = Range::new(2.5, 2.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(sample_camera(&mut rng, &ranges, 4, 4).is_err());
        ranges.radius = Range::new(0.0, 1.0);
        assert!(sample_camera(&mut rng, &ranges, 4, 4).is_err());
    }

    #[test]
    fn quad_azimuths_wrap() {
        let quad = CameraQuad::new(Camera::new(37.0, 10.0, 2.2, 50.0, 4, 4).unwrap()).unwrap();
        let az: alloc::vec::Vec<f64> = quad.cameras.iter().map(|c| c.azimuth).collect();
        assert_eq!(az, [37.0, 127.0, -143.0, -53.0]);
        for c in &quad.cameras {
            assert_eq!((c.elevation, c.radius, c.fov_y), (10.0, 2.2, 50.0));
        }
    }

    #[test]
    fn bucket_table() {
        let b = |az, el| view_bucket(&Camera::new(az, el, 2.0, 50.0, 4, 4).unwrap());
        assert_eq!(b(0.0, 0.0), ViewBucket::Front);
        assert_eq!(b(180.0, 0.0), ViewBucket::Back);
        assert_eq!(b(90.0, -70.0), ViewBucket::Overhead);
        assert_eq!(b(45.0, 0.0), ViewBucket::Front);
        assert_eq!(b(-45.0, 0.0), ViewBucket::Side);
        assert_eq!(b(135.0, 0.0), ViewBucket::Side);
        assert_eq!(b(-135.0, 0.0), ViewBucket::Side);
        assert_eq!(b(136.0, 0.0), ViewBucket::Back);
        assert_eq!(b(0.0, 60.0), ViewBucket::Front);
        assert_eq!(b(0.0, -60.0), ViewBucket::Front);
        assert_eq!(b(0.0, -60.5), ViewBucket::Overhead);

        let quad = CameraQuad::canonical(0.0, 2.0, 50.0, 4, 4).unwrap();
        let buckets: alloc::vec::Vec<_> = quad.cameras.iter().map(view_bucket).collect();
        assert_eq!(buckets, [ViewBucket::Front, ViewBucket::Side, ViewBucket::Back, ViewBucket::Side]);
    }
}
