use alloc::format;
use alloc::vec::Vec;

use nalgebra::{Point3, Unit, Vector3};
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::camera::{CameraModel, Intrinsics};
use crate::error::{Error, Result};

use super::raycast::{segment_distance, Ray};

/// Axis-aligned ellipsoid (world frame).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ellipsoid {
    pub center: Point3<f64>,
    pub semi_axes: Vector3<f64>,
}

impl Ellipsoid {
    /// `<1` inside, `1` on the surface.
    pub fn level(&self, p: &Point3<f64>) -> f64 {
        (p - self.center).component_div(&self.semi_axes).norm_squared()
    }

    pub fn contains(&self, p: &Point3<f64>) -> bool {
        self.level(p) < 1.0
    }

    /// Lower surface point above `(x, y)`, if the vertical line meets the
    /// ellipsoid.
    pub fn bottom_at(&self, x: f64, y: f64) -> Option<Point3<f64>> {
        let dx = (x - self.center.x) / self.semi_axes.x;
        let dy = (y - self.center.y) / self.semi_axes.y;
        let rest = 1.0 - dx * dx - dy * dy;
        (rest > 0.0).then(|| Point3::new(x, y, self.center.z - self.semi_axes.z * libm::sqrt(rest)))
    }
}

/// A teat: a cylinder from `base_mm` along `axis` ending in a hemisphere.
/// `length` runs from the base to the apex of the cap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TeatSpec {
    pub base_mm: Point3<f64>,
    /// Unit vector from the base toward the tip.
    pub axis: Unit<Vector3<f64>>,
    pub length: f64,
    pub radius: f64,
}

impl TeatSpec {
    pub const DEFAULT_LENGTH: f64 = 50.0;
    pub const DEFAULT_RADIUS: f64 = 14.0;

    pub fn new(base_mm: Point3<f64>, axis: Vector3<f64>) -> Self {
        Self {
            base_mm,
            axis: Unit::new_normalize(axis),
            length: Self::DEFAULT_LENGTH,
            radius: Self::DEFAULT_RADIUS,
        }
    }

    pub fn apex(&self) -> Point3<f64> {
        self.base_mm + self.axis.as_ref() * self.length
    }

    pub fn cap_center(&self) -> Point3<f64> {
        self.apex() - self.axis.as_ref() * self.radius
    }

    /// Distance from `p` to the lateral surface or the cap, whichever part
    /// the axial position of `p` falls on. Zero on the rendered surface.
    pub fn surface_residual(&self, p: &Point3<f64>) -> f64 {
        let d = p - self.base_mm;
        let h = d.dot(&self.axis);
        if h > self.length - self.radius {
            ((p - self.cap_center()).norm() - self.radius).abs()
        } else {
            ((d - self.axis.as_ref() * h).norm() - self.radius).abs()
        }
    }

    /// Whether `p` is inside the solid (open at the base plane).
    pub fn contains(&self, p: &Point3<f64>) -> bool {
        let d = p - self.base_mm;
        let h = d.dot(&self.axis);
        if h < 0.0 {
            return false;
        }
        if h > self.length - self.radius {
            return (p - self.cap_center()).norm() < self.radius;
        }
        (d - self.axis.as_ref() * h).norm() < self.radius
    }

    fn validate(&self, k: usize) -> Result<()> {
        let ok = self.length.is_finite()
            && self.radius.is_finite()
            && self.radius > 0.0
            && self.length >= self.radius
            && self.base_mm.coords.iter().all(|c| c.is_finite())
            && (self.axis.norm() - 1.0).abs() < 1e-9;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidScene(format!(
                "teat {k}: need finite base, unit axis, radius > 0 and length >= radius"
            )))
        }
    }
}

/// Depth sensor noise: per-point depth `sigma(z) = a + b * (z / 1000)^2`
/// (mm, z in mm), applied along the pixel ray, plus dropout and lateral
/// pixel jitter.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NoiseModel {
    /// Constant depth sigma, mm.
    pub a: f64,
    /// Quadratic coefficient, mm per m^2.
    pub b: f64,
    pub dropout_rate: f64,
    /// Standard deviation of the lateral jitter, pixels.
    pub lateral_jitter: f64,
}

impl NoiseModel {
    pub const fn zero() -> Self {
        Self { a: 0.0, b: 0.0, dropout_rate: 0.0, lateral_jitter: 0.0 }
    }

    /// 0.2 mm floor and 3 mm sigma at 1 m.
    pub const fn orbbec_like() -> Self {
        Self { a: 0.2, b: 2.8, dropout_rate: 0.01, lateral_jitter: 0.1 }
    }

    /// Depth noise only, no dropout or jitter.
    pub const fn quadratic(a: f64, b: f64) -> Self {
        Self { a, b, dropout_rate: 0.0, lateral_jitter: 0.0 }
    }

    /// Preset by name: `zero`, `orbbec-like`, `a1b3`.
    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "zero" | "none" => Some(Self::zero()),
            "orbbec-like" | "orbbec" => Some(Self::orbbec_like()),
            "a1b3" => Some(Self::quadratic(1.0, 3.0)),
            _ => None,
        }
    }

    pub fn sigma_at(&self, depth_mm: f64) -> f64 {
        let d = depth_mm / 1000.0;
        self.a + self.b * d * d
    }

    pub fn is_zero(&self) -> bool {
        self.a == 0.0 && self.b == 0.0 && self.dropout_rate == 0.0 && self.lateral_jitter == 0.0
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.a >= 0.0
            && self.b >= 0.0
            && self.lateral_jitter >= 0.0
            && (0.0..1.0).contains(&self.dropout_rate)
            && self.a.is_finite()
            && self.b.is_finite()
            && self.lateral_jitter.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidScene(format!("invalid noise model {self:?}")))
        }
    }
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self::orbbec_like()
    }
}

/// Image-space rectangle hiding whatever is behind it from segmentation.
/// Covers pixels with `u0 <= u < u1` and `v0 <= v < v1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Occluder {
    pub u0: i32,
    pub v0: i32,
    pub u1: i32,
    pub v1: i32,
}

impl Occluder {
    pub fn covers(&self, u: i32, v: i32) -> bool {
        (self.u0..self.u1).contains(&u) && (self.v0..self.v1).contains(&v)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub udder: Ellipsoid,
    pub teats: Vec<TeatSpec>,
    pub camera: CameraModel,
    pub noise: NoiseModel,
    pub seed: u64,
    /// Applied by [`occlude`](super::occlude).
    pub occluders: Vec<Occluder>,
}

pub const MAX_TEATS: usize = 6;

/// Default working distance of [`SceneSpec::default_four_teat`], mm.
pub const WORKING_DISTANCE_MM: f64 = 600.0;

impl SceneSpec {
    /// Udder with four teats tilted 8 degrees outward, seen from the front
    /// and below at [`WORKING_DISTANCE_MM`] with orbbec-like noise.
    pub fn default_four_teat() -> Self {
        let udder = default_udder();
        let teats = [(-65.0, -50.0), (65.0, -50.0), (-45.0, 50.0), (45.0, 50.0)]
            .iter()
            .map(|&(x, y)| attached_teat(&udder, x, y, 8.0))
            .collect();
        Self {
            udder,
            teats,
            camera: default_camera(),
            noise: NoiseModel::orbbec_like(),
            seed: 0,
            occluders: Vec::new(),
        }
    }

    /// One teat hanging from the udder at `(x, y)` with the given tilt from
    /// vertical (degrees) toward azimuth `azimuth_deg`.
    pub fn single_teat(x: f64, y: f64, tilt_deg: f64, azimuth_deg: f64) -> Self {
        let udder = default_udder();
        let teat = attached_teat_dir(&udder, x, y, tilt_deg, azimuth_deg);
        Self {
            udder,
            teats: alloc::vec![teat],
            camera: default_camera(),
            noise: NoiseModel::zero(),
            seed: 0,
            occluders: Vec::new(),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_noise(mut self, noise: NoiseModel) -> Self {
        self.noise = noise;
        self
    }

    pub fn teat_id(k: usize) -> alloc::string::String {
        format!("T{}", k + 1)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.teats.len();
        if !(1..=MAX_TEATS).contains(&n) {
            return Err(Error::InvalidScene(format!("teat count must be 1..={MAX_TEATS}, got {n}")));
        }
        self.noise.validate()?;
        self.camera.intrinsics().validate()?;
        let u = &self.udder;
        if !(u.semi_axes.iter().all(|s| *s > 0.0 && s.is_finite()) && u.center.coords.iter().all(|c| c.is_finite())) {
            return Err(Error::InvalidScene("udder semi-axes must be positive".into()));
        }
        for (k, t) in self.teats.iter().enumerate() {
            t.validate(k)?;
            if !u.contains(&t.base_mm) {
                return Err(Error::InvalidScene(format!("teat {k}: base is not inside the udder")));
            }
            if u.contains(&t.apex()) {
                return Err(Error::InvalidScene(format!("teat {k}: apex is inside the udder")));
            }
        }
        for i in 0..n {
            for j in i + 1..n {
                let (a, b) = (&self.teats[i], &self.teats[j]);
                let d = segment_distance(&a.base_mm, &a.cap_center(), &b.base_mm, &b.cap_center());
                if d <= a.radius + b.radius {
                    return Err(Error::InvalidScene(format!("teats {i} and {j} interpenetrate")));
                }
            }
        }
        let eye = self.camera.origin();
        if u.contains(&eye) || self.teats.iter().any(|t| t.contains(&eye)) {
            return Err(Error::InvalidScene("camera is inside the scene geometry".into()));
        }
        Ok(())
    }

    /// Point the camera looks at: where its optical axis passes closest to
    /// the mean teat apex.
    pub fn view_target(&self) -> Point3<f64> {
        let n = self.teats.len().max(1) as f64;
        let mean = self.teats.iter().fold(Vector3::zeros(), |acc, t| acc + t.apex().coords) / n;
        let eye = self.camera.origin();
        let z = self.camera.rotation_matrix().column(2).into_owned();
        eye + z * (Point3::from(mean) - eye).dot(&z)
    }

    /// Same scene seen from a camera whose position moves by up to
    /// `eye_mm` and whose view target moves by up to `target_mm` per axis
    /// (uniform), keeping world up.
    pub fn with_perturbed_camera(&self, rng_seed: u64, eye_mm: f64, target_mm: f64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
        let mut jitter = |s: f64| Vector3::new(uniform(&mut rng, s), uniform(&mut rng, s), uniform(&mut rng, s));
        let eye = self.camera.origin() + jitter(eye_mm);
        let target = self.view_target() + jitter(target_mm);
        let camera = CameraModel::look_at(*self.camera.intrinsics(), eye, target, Vector3::z())?;
        Ok(Self { camera, ..self.clone() })
    }

    /// Camera-frame ray through a pixel center, in world coordinates.
    pub(crate) fn world_ray(&self, u: f64, v: f64) -> Ray {
        let i = self.camera.intrinsics();
        let d_cam = Vector3::new((u - i.cx) / i.fx, (v - i.cy) / i.fy, 1.0);
        Ray { origin: self.camera.origin(), dir: self.camera.extrinsic().rotation * d_cam }
    }
}

fn uniform(rng: &mut ChaCha8Rng, half_width: f64) -> f64 {
    let unit = (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
    (2.0 * unit - 1.0) * half_width
}

fn default_udder() -> Ellipsoid {
    Ellipsoid { center: Point3::new(0.0, 0.0, 120.0), semi_axes: Vector3::new(180.0, 140.0, 90.0) }
}

/// Camera in front of and below the udder, [`WORKING_DISTANCE_MM`] from
/// the teat region.
pub fn default_camera() -> CameraModel {
    let target = Point3::new(0.0, 0.0, 15.0);
    let elevation = 40f64.to_radians();
    let eye = target + Vector3::new(0.0, -libm::cos(elevation), -libm::sin(elevation)) * WORKING_DISTANCE_MM;
    CameraModel::look_at(Intrinsics::default(), eye, target, Vector3::z()).expect("valid default camera")
}

/// Teat at `(x, y)` tilted `tilt_deg` away from the udder center.
fn attached_teat(udder: &Ellipsoid, x: f64, y: f64, tilt_deg: f64) -> TeatSpec {
    let azimuth = libm::atan2(y - udder.center.y, x - udder.center.x).to_degrees();
    attached_teat_dir(udder, x, y, tilt_deg, azimuth)
}

/// Base sunk 8 mm into the udder along the teat axis below `(x, y)`.
fn attached_teat_dir(udder: &Ellipsoid, x: f64, y: f64, tilt_deg: f64, azimuth_deg: f64) -> TeatSpec {
    let (t, a) = (tilt_deg.to_radians(), azimuth_deg.to_radians());
    let axis = Vector3::new(libm::sin(t) * libm::cos(a), libm::sin(t) * libm::sin(a), -libm::cos(t));
    let surface = udder.bottom_at(x, y).unwrap_or(Point3::new(x, y, udder.center.z - udder.semi_axes.z));
    TeatSpec::new(surface - axis * 8.0, axis)
}
