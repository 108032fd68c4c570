//! Teat masks transported as contour polygons.
//!
//! Contour vertices live on the pixel-corner lattice: vertex `[i, j]` is the
//! image point `(i - 0.5, j - 0.5)`, the top-left corner of pixel `(i, j)`.
//! A contour traced along pixel edges therefore encloses exactly the centers
//! of the pixels it outlines, with no pixel center on the boundary. Valid
//! vertices satisfy `0 <= i <= width` and `0 <= j <= height`.

use alloc::string::String;
use alloc::vec::Vec;
use alloc::format;

use nalgebra::Point2;

use crate::error::{Error, Result};

/// Per-teat segmentation result: a closed, simple contour polygon.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TeatMask {
    teat_id: String,
    stamp_us: u64,
    contour: Vec<[i32; 2]>,
}

impl TeatMask {
    /// Validates vertex count, image bounds and simplicity.
    pub fn new(
        teat_id: impl Into<String>,
        stamp_us: u64,
        contour: Vec<[i32; 2]>,
        width: u32,
        height: u32,
    ) -> Result<Self> {
        if contour.len() < 3 {
            return Err(Error::InvalidMask(format!("contour has {} vertices, need >= 3", contour.len())));
        }
        let (w, h) = (width as i64, height as i64);
        if let Some(v) = contour
            .iter()
            .find(|v| !(0..=w).contains(&i64::from(v[0])) || !(0..=h).contains(&i64::from(v[1])))
        {
            return Err(Error::InvalidMask(format!(
                "vertex ({}, {}) outside {width}x{height} image",
                v[0], v[1]
            )));
        }
        if !contour_is_simple(&contour) {
            return Err(Error::InvalidMask("contour self-intersects".into()));
        }
        Ok(Self { teat_id: teat_id.into(), stamp_us, contour })
    }

    pub fn teat_id(&self) -> &str {
        &self.teat_id
    }

    pub fn stamp_us(&self) -> u64 {
        self.stamp_us
    }

    pub fn contour(&self) -> &[[i32; 2]] {
        &self.contour
    }

    pub fn with_stamp(mut self, stamp_us: u64) -> Self {
        self.stamp_us = stamp_us;
        self
    }

    /// Image-plane polygon using every `stride`-th vertex, starting at the
    /// first. Errors with [`Error::EmptyMask`] when fewer than three vertices
    /// survive or the result has zero area.
    pub fn polygon(&self, stride: usize) -> Result<ImagePolygon> {
        if stride == 0 {
            return Err(Error::InvalidParameter("contour stride must be >= 1".into()));
        }
        let vertices: Vec<Point2<f64>> = self
            .contour
            .iter()
            .step_by(stride)
            .map(|v| Point2::new(f64::from(v[0]) - 0.5, f64::from(v[1]) - 0.5))
            .collect();
        let poly = ImagePolygon { vertices };
        if poly.vertices.len() < 3 || poly.signed_area() == 0.0 {
            return Err(Error::EmptyMask { stride });
        }
        Ok(poly)
    }
}

/// Closed polygon in image coordinates (pixel-center convention).
#[derive(Debug, Clone, PartialEq)]
pub struct ImagePolygon {
    vertices: Vec<Point2<f64>>,
}

impl ImagePolygon {
    pub fn new(vertices: Vec<Point2<f64>>) -> Self {
        Self { vertices }
    }

    pub fn vertices(&self) -> &[Point2<f64>] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Shoelace area; positive for clockwise polygons in image (y-down)
    /// coordinates.
    pub fn signed_area(&self) -> f64 {
        let n = self.vertices.len();
        let mut acc = 0.0;
        for i in 0..n {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            acc += a.x * b.y - b.x * a.y;
        }
        acc / 2.0
    }

    /// Axis-aligned bounds `(min, max)`.
    pub fn bounds(&self) -> (Point2<f64>, Point2<f64>) {
        let mut lo = Point2::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for v in &self.vertices {
            lo.x = lo.x.min(v.x);
            lo.y = lo.y.min(v.y);
            hi.x = hi.x.max(v.x);
            hi.y = hi.y.max(v.y);
        }
        (lo, hi)
    }

    /// Even-odd membership with the half-open crossing rule: an edge counts
    /// when exactly one endpoint is strictly below the query row, and the
    /// crossing must lie strictly right of the query point.
    #[inline]
    pub fn contains(&self, p: &Point2<f64>) -> bool {
        let n = self.vertices.len();
        let mut inside = false;
        let mut j = n - 1;
        for i in 0..n {
            let a = self.vertices[i];
            let b = self.vertices[j];
            if (a.y > p.y) != (b.y > p.y) {
                let x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
                if p.x < x {
                    inside = !inside;
                }
            }
            j = i;
        }
        inside
    }

    /// Strict convexity test ignoring collinear vertices.
    pub fn is_convex(&self) -> bool {
        let n = self.vertices.len();
        if n < 3 {
            return false;
        }
        let mut sign = 0.0f64;
        for i in 0..n {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            let c = self.vertices[(i + 2) % n];
            let cross = (b - a).perp(&(c - b));
            if cross != 0.0 {
                if sign == 0.0 {
                    sign = cross.signum();
                } else if cross.signum() != sign {
                    return false;
                }
            }
        }
        sign != 0.0 && !self_intersects_f64(&self.vertices)
    }
}

fn self_intersects_f64(v: &[Point2<f64>]) -> bool {
    // a convex-turning polygon can still wind around more than once
    let n = v.len();
    let mut total = 0.0;
    for i in 0..n {
        let a = v[i];
        let b = v[(i + 1) % n];
        let c = v[(i + 2) % n];
        let d1 = b - a;
        let d2 = c - b;
        total += libm::atan2(d1.perp(&d2), d1.dot(&d2));
    }
    libm::fabs(total) > 2.0 * core::f64::consts::PI + 1e-6
}

/// `true` if no two edges of the closed integer polygon cross or overlap.
///
/// Touching at a shared vertex (as happens when a traced pixel contour
/// passes through a diagonal pinch point twice) is allowed; proper crossings,
/// collinear overlaps and edge reversals are not.
pub fn contour_is_simple(contour: &[[i32; 2]]) -> bool {
    let n = contour.len();
    if n < 3 {
        return false;
    }
    let p = |i: usize| -> [i64; 2] { [i64::from(contour[i % n][0]), i64::from(contour[i % n][1])] };
    for i in 0..n {
        let (a, b) = (p(i), p(i + 1));
        // reversal onto the previous edge
        let prev = p(i + n - 1);
        if orient(prev, a, b) == 0 && dot(sub(prev, a), sub(b, a)) > 0 {
            return false;
        }
        let (bx0, bx1) = (a[0].min(b[0]), a[0].max(b[0]));
        let (by0, by1) = (a[1].min(b[1]), a[1].max(b[1]));
        for j in (i + 2)..n {
            if i == 0 && j == n - 1 {
                continue; // adjacent through wrap-around
            }
            let (c, d) = (p(j), p(j + 1));
            if c[0].max(d[0]) < bx0 || c[0].min(d[0]) > bx1 || c[1].max(d[1]) < by0 || c[1].min(d[1]) > by1 {
                continue;
            }
            if segments_conflict(a, b, c, d) {
                return false;
            }
        }
    }
    true
}

fn sub(a: [i64; 2], b: [i64; 2]) -> [i64; 2] {
    [a[0] - b[0], a[1] - b[1]]
}

fn dot(a: [i64; 2], b: [i64; 2]) -> i64 {
    a[0] * b[0] + a[1] * b[1]
}

fn orient(a: [i64; 2], b: [i64; 2], c: [i64; 2]) -> i64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

fn on_segment(a: [i64; 2], b: [i64; 2], p: [i64; 2]) -> bool {
    p[0] >= a[0].min(b[0]) && p[0] <= a[0].max(b[0]) && p[1] >= a[1].min(b[1]) && p[1] <= a[1].max(b[1])
}

/// Non-adjacent segments conflict unless they are disjoint or meet only at
/// a common endpoint.
fn segments_conflict(a: [i64; 2], b: [i64; 2], c: [i64; 2], d: [i64; 2]) -> bool {
    let o1 = orient(a, b, c).signum();
    let o2 = orient(a, b, d).signum();
    let o3 = orient(c, d, a).signum();
    let o4 = orient(c, d, b).signum();

    if o1 == 0 && o2 == 0 {
        // collinear: conflict if the overlap is longer than a point
        let axis = if a[0] != b[0] { 0 } else { 1 };
        let (s0, s1) = (a[axis].min(b[axis]), a[axis].max(b[axis]));
        let (t0, t1) = (c[axis].min(d[axis]), c[axis].max(d[axis]));
        let lo = s0.max(t0);
        let hi = s1.min(t1);
        return hi > lo;
    }

    let intersects = (o1 != o2 && o3 != o4)
        || (o1 == 0 && on_segment(a, b, c))
        || (o2 == 0 && on_segment(a, b, d))
        || (o3 == 0 && on_segment(c, d, a))
        || (o4 == 0 && on_segment(c, d, b));
    if !intersects {
        return false;
    }
    let shared = a == c || a == d || b == c || b == d;
    if !shared {
        return true;
    }
    // sharing an endpoint: fine unless some other endpoint also touches
    let touches_interior = |s0: [i64; 2], s1: [i64; 2], q: [i64; 2]| {
        q != s0 && q != s1 && orient(s0, s1, q) == 0 && on_segment(s0, s1, q)
    };
    touches_interior(a, b, c) || touches_interior(a, b, d) || touches_interior(c, d, a) || touches_interior(c, d, b)
}
