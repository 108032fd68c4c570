use alloc::vec::Vec;

use nalgebra::Point2;

use crate::mask::TeatMask;

use super::contour::PixelSet;
use super::render::mask_from_region;
use super::scene::{Occluder, SceneSpec};

/// Applies the scene's occluders to `masks`, see [`occlude_with`].
pub fn occlude(scene: &SceneSpec, masks: &[TeatMask]) -> Vec<TeatMask> {
    let intr = scene.camera.intrinsics();
    occlude_with(masks, &scene.occluders, intr.width, intr.height)
}

/// Removes the occluded pixels from each mask. A mask no occluder touches
/// is returned unchanged; otherwise every remaining 4-connected piece of
/// at least [`MIN_MASK_PIXELS`](super::MIN_MASK_PIXELS) pixels becomes a
/// mask with the same id and stamp, largest first.
pub fn occlude_with(masks: &[TeatMask], occluders: &[Occluder], width: u32, height: u32) -> Vec<TeatMask> {
    let mut out = Vec::with_capacity(masks.len());
    for mask in masks {
        let mut region = rasterize(mask, width, height);
        let mut touched = false;
        for v in 0..height {
            for u in 0..width {
                if region.get(i64::from(u), i64::from(v)) && occluders.iter().any(|o| o.covers(u as i32, v as i32)) {
                    region.set(u, v, false);
                    touched = true;
                }
            }
        }
        if !touched {
            out.push(mask.clone());
            continue;
        }
        out.extend(
            region.components().iter().filter_map(|c| mask_from_region(c, mask.teat_id(), mask.stamp_us())),
        );
    }
    out
}

/// Pixels whose centers the mask polygon contains.
pub fn rasterize(mask: &TeatMask, width: u32, height: u32) -> PixelSet {
    let mut set = PixelSet::new(width, height);
    let Ok(poly) = mask.polygon(1) else { return set };
    let (lo, hi) = poly.bounds();
    let u0 = libm::floor(lo.x).max(0.0) as u32;
    let v0 = libm::floor(lo.y).max(0.0) as u32;
    let u1 = (libm::ceil(hi.x).max(0.0) as u32).min(width.saturating_sub(1));
    let v1 = (libm::ceil(hi.y).max(0.0) as u32).min(height.saturating_sub(1));
    for v in v0..=v1 {
        for u in u0..=u1 {
            if poly.contains(&Point2::new(f64::from(u), f64::from(v))) {
                set.set(u, v, true);
            }
        }
    }
    set
}
