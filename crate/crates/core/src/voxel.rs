use alloc::vec::Vec;

use nalgebra::{Point3, Vector3};

use crate::cloud::PointCloud;
use crate::error::{Error, Result};

/// Uniform cubic voxel grid.
///
/// A point belongs to voxel `floor((p - origin) / leaf_size)` per axis, so a
/// point exactly on a voxel boundary falls in the higher-index voxel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VoxelGrid {
    leaf_size: f64,
    origin: Point3<f64>,
}

impl VoxelGrid {
    pub fn new(leaf_size: f64, origin: Point3<f64>) -> Result<Self> {
        if !(leaf_size > 0.0) || !leaf_size.is_finite() {
            return Err(Error::InvalidParameter(alloc::format!("leaf size must be > 0, got {leaf_size}")));
        }
        if !origin.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite grid origin".into()));
        }
        Ok(Self { leaf_size, origin })
    }

    /// Grid anchored at the frame origin.
    pub fn with_leaf(leaf_size: f64) -> Result<Self> {
        Self::new(leaf_size, Point3::origin())
    }

    pub fn leaf_size(&self) -> f64 {
        self.leaf_size
    }

    pub fn origin(&self) -> Point3<f64> {
        self.origin
    }

    #[inline]
    pub fn voxel_of(&self, p: &Point3<f64>) -> [i64; 3] {
        let d = (p - self.origin) / self.leaf_size;
        [libm::floor(d.x) as i64, libm::floor(d.y) as i64, libm::floor(d.z) as i64]
    }
}

/// Replaces the points of every occupied voxel by their centroid.
///
/// Output is ordered by voxel index (lexicographic `[ix, iy, iz]`); within a
/// voxel, points are accumulated in input order. Colors, when present, are
/// averaged per channel and rounded.
pub fn voxel_downsample(cloud: &PointCloud, grid: &VoxelGrid) -> PointCloud {
    let mut keyed: Vec<([i64; 3], usize)> =
        cloud.points().iter().enumerate().map(|(i, p)| (grid.voxel_of(p), i)).collect();
    // stable: equal keys keep input order
    keyed.sort_by_key(|&(k, _)| k);

    let pts = cloud.points();
    let colors = cloud.colors();
    let mut out_pts = Vec::new();
    let mut out_colors = colors.map(|_| Vec::new());

    let mut start = 0;
    while start < keyed.len() {
        let key = keyed[start].0;
        let mut end = start;
        let mut sum = Vector3::zeros();
        let mut rgb = [0u32; 3];
        while end < keyed.len() && keyed[end].0 == key {
            let i = keyed[end].1;
            sum += pts[i].coords;
            if let Some(c) = colors {
                for ch in 0..3 {
                    rgb[ch] += u32::from(c[i][ch]);
                }
            }
            end += 1;
        }
        let n = (end - start) as f64;
        out_pts.push(Point3::from(sum / n));
        if let Some(oc) = out_colors.as_mut() {
            let n = (end - start) as u32;
            oc.push(rgb.map(|s| ((s + n / 2) / n) as u8));
        }
        start = end;
    }
    PointCloud::from_parts(cloud.frame(), out_pts, out_colors)
}
