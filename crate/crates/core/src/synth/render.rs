use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::{Point3, Unit, Vector3};
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use rand_distr::{Distribution, StandardNormal};

use crate::camera::Intrinsics;
use crate::cloud::{Frame, PointCloud};
use crate::error::Result;
use crate::mask::TeatMask;

use super::contour::{trace_outer_contour, PixelSet};
use super::raycast::{hit_ellipsoid, hit_teat, near_sphere};
use super::scene::{NoiseModel, SceneSpec};

/// Masks with fewer visible pixels are not emitted.
pub const MIN_MASK_PIXELS: usize = 50;

pub const LABEL_BACKGROUND: u8 = 0;
pub const LABEL_UDDER: u8 = 1;

/// Label of teat `k`.
pub const fn teat_label(k: usize) -> u8 {
    2 + k as u8
}

const UDDER_RGB: [u8; 3] = [214, 170, 160];
const TEAT_RGB: [u8; 3] = [188, 118, 112];

/// Per-pixel nearest-hit labels, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelImage {
    pub width: u32,
    pub height: u32,
    pub labels: Vec<u8>,
}

impl LabelImage {
    pub fn get(&self, u: u32, v: u32) -> u8 {
        self.labels[v as usize * self.width as usize + u as usize]
    }

    pub fn pixels_of(&self, label: u8) -> PixelSet {
        PixelSet { width: self.width, height: self.height, data: self.labels.iter().map(|&l| l == label).collect() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TeatTruth {
    pub teat_id: String,
    pub label: u8,
    /// Apex of the cap, world frame.
    pub tip_mm: Point3<f64>,
    /// Unit vector from the tip toward the base.
    pub axis: Unit<Vector3<f64>>,
    pub radius: f64,
    pub length: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub teats: Vec<TeatTruth>,
    pub labels: LabelImage,
}

impl GroundTruth {
    pub fn teat(&self, teat_id: &str) -> Option<&TeatTruth> {
        self.teats.iter().find(|t| t.teat_id == teat_id)
    }
}

/// One rendered camera frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Rendered {
    pub stamp_us: u64,
    /// Camera frame, with colors.
    pub cloud: PointCloud,
    /// Hit label of each cloud point.
    pub point_labels: Vec<u8>,
    /// Source pixel of each cloud point.
    pub point_pixels: Vec<[u32; 2]>,
    /// Oracle masks in teat order, only for visible teats.
    pub masks: Vec<TeatMask>,
    pub truth: GroundTruth,
}

pub fn render(scene: &SceneSpec) -> Result<Rendered> {
    render_frame(scene, 0)
}

/// Ray casts one pixel-center ray per pixel against the udder and the
/// teats, keeping the nearest hit. Noise is drawn from one ChaCha stream
/// per image row seeded by `scene.seed`, so the output depends only on the
/// scene.
pub fn render_frame(scene: &SceneSpec, stamp_us: u64) -> Result<Rendered> {
    scene.validate()?;
    let intr = *scene.camera.intrinsics();
    let (w, h) = (intr.width, intr.height);
    let noise = scene.noise;
    let bounds: Vec<(Point3<f64>, f64)> = scene
        .teats
        .iter()
        .map(|t| (nalgebra::center(&t.base_mm, &t.apex()), t.length / 2.0 + t.radius + 1e-6))
        .collect();

    let mut labels = Vec::with_capacity(w as usize * h as usize);
    let mut points = Vec::new();
    let mut colors = Vec::new();
    let mut point_labels = Vec::new();
    let mut point_pixels = Vec::new();

    for v in 0..h {
        let mut rng = row_rng(scene.seed, v);
        for u in 0..w {
            let ray = scene.world_ray(f64::from(u), f64::from(v));
            let mut best = hit_ellipsoid(&ray, &scene.udder).map(|t| (t, LABEL_UDDER));
            for (k, teat) in scene.teats.iter().enumerate() {
                if !near_sphere(&ray, &bounds[k].0, bounds[k].1) {
                    continue;
                }
                if let Some(t) = hit_teat(&ray, teat) {
                    if best.map_or(true, |(b, _)| t < b) {
                        best = Some((t, teat_label(k)));
                    }
                }
            }
            let Some((depth, label)) = best else {
                labels.push(LABEL_BACKGROUND);
                continue;
            };
            labels.push(label);

            let Some(p) = sensor_point(&intr, &noise, &mut rng, u, v, depth) else { continue };
            points.push(p);
            colors.push(if label == LABEL_UDDER { UDDER_RGB } else { TEAT_RGB });
            point_labels.push(label);
            point_pixels.push([u, v]);
        }
    }

    let labels = LabelImage { width: w, height: h, labels };
    let masks = masks_from_labels(&labels, scene.teats.len(), stamp_us);
    let teats = scene
        .teats
        .iter()
        .enumerate()
        .map(|(k, t)| TeatTruth {
            teat_id: SceneSpec::teat_id(k),
            label: teat_label(k),
            tip_mm: t.apex(),
            axis: -t.axis,
            radius: t.radius,
            length: t.length,
        })
        .collect();
    Ok(Rendered {
        stamp_us,
        cloud: PointCloud::from_parts(Frame::Camera, points, Some(colors)),
        point_labels,
        point_pixels,
        masks,
        truth: GroundTruth { teats, labels },
    })
}

/// One mask per teat label: the outer contour of its largest 4-connected
/// visible region, if that region has at least [`MIN_MASK_PIXELS`] pixels.
pub fn masks_from_labels(labels: &LabelImage, n_teats: usize, stamp_us: u64) -> Vec<TeatMask> {
    (0..n_teats)
        .filter_map(|k| {
            let region = labels.pixels_of(teat_label(k)).components().into_iter().next()?;
            mask_from_region(&region, &SceneSpec::teat_id(k), stamp_us)
        })
        .collect()
}

pub(crate) fn mask_from_region(region: &PixelSet, teat_id: &str, stamp_us: u64) -> Option<TeatMask> {
    if region.count() < MIN_MASK_PIXELS {
        return None;
    }
    let contour = trace_outer_contour(region);
    Some(TeatMask::new(teat_id, stamp_us, contour, region.width, region.height).expect("traced contours are valid"))
}

/// Camera-frame point measured for a pixel whose ray hits at `depth`, or
/// `None` for a dropout. Draws nothing from `rng` for a zero noise model.
pub(crate) fn sensor_point(
    intr: &Intrinsics,
    noise: &NoiseModel,
    rng: &mut ChaCha8Rng,
    u: u32,
    v: u32,
    depth: f64,
) -> Option<Point3<f64>> {
    let (mut pu, mut pv, mut z) = (f64::from(u), f64::from(v), depth);
    if !noise.is_zero() {
        let drop = unit_uniform(rng) < noise.dropout_rate;
        let n_depth: f64 = StandardNormal.sample(rng);
        let n_u: f64 = StandardNormal.sample(rng);
        let n_v: f64 = StandardNormal.sample(rng);
        if drop {
            return None;
        }
        z += noise.sigma_at(depth) * n_depth;
        pu += noise.lateral_jitter * n_u;
        pv += noise.lateral_jitter * n_v;
        if !(z > 0.0) {
            return None;
        }
    }
    Some(Point3::new((pu - intr.cx) / intr.fx * z, (pv - intr.cy) / intr.fy * z, z))
}

pub(crate) fn row_rng(seed: u64, row: u32) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::from(row));
    rng
}

fn unit_uniform(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64
}
