//! Ray intersection with the analytic scene primitives.

use nalgebra::{Point3, Vector3};

use super::scene::{Ellipsoid, TeatSpec};

/// `origin + t * dir`. Scene rays use a direction with unit camera-z
/// component, so `t` is the camera-frame depth of the hit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub origin: Point3<f64>,
    pub dir: Vector3<f64>,
}

impl Ray {
    pub fn at(&self, t: f64) -> Point3<f64> {
        self.origin + self.dir * t
    }
}

const T_MIN: f64 = 1e-9;

/// Roots of `a t^2 + 2 h t + c = 0`, ascending.
fn quadratic_roots(a: f64, h: f64, c: f64) -> Option<(f64, f64)> {
    if a <= 0.0 {
        return None;
    }
    let disc = h * h - a * c;
    if disc < 0.0 {
        return None;
    }
    let sq = libm::sqrt(disc);
    // numerically stable pair
    let q = if h >= 0.0 { -(h + sq) } else { -h + sq };
    let (t0, t1) = if q == 0.0 { (0.0, 0.0) } else { (q / a, c / q) };
    Some(if t0 <= t1 { (t0, t1) } else { (t1, t0) })
}

pub fn hit_ellipsoid(ray: &Ray, e: &Ellipsoid) -> Option<f64> {
    let o = (ray.origin - e.center).component_div(&e.semi_axes);
    let d = ray.dir.component_div(&e.semi_axes);
    let (t0, t1) = quadratic_roots(d.norm_squared(), o.dot(&d), o.norm_squared() - 1.0)?;
    [t0, t1].into_iter().find(|&t| t > T_MIN)
}

fn hit_sphere(ray: &Ray, center: &Point3<f64>, r: f64) -> Option<(f64, f64)> {
    let o = ray.origin - center;
    quadratic_roots(ray.dir.norm_squared(), o.dot(&ray.dir), o.norm_squared() - r * r)
}

/// Nearest hit with the teat surface: the lateral cylinder between the
/// base and the cap center, and the outer cap hemisphere.
pub fn hit_teat(ray: &Ray, teat: &TeatSpec) -> Option<f64> {
    let u = teat.axis.as_ref();
    let r = teat.radius;
    let body = teat.length - r;
    let mut best: Option<f64> = None;
    let mut take = |t: f64| {
        if t > T_MIN && best.map_or(true, |b| t < b) {
            best = Some(t);
        }
    };

    let w = ray.origin - teat.base_mm;
    let d_perp = ray.dir - u * ray.dir.dot(u);
    let w_perp = w - u * w.dot(u);
    if let Some((t0, t1)) = quadratic_roots(d_perp.norm_squared(), w_perp.dot(&d_perp), w_perp.norm_squared() - r * r) {
        for t in [t0, t1] {
            let h = (w + ray.dir * t).dot(u);
            if (0.0..=body).contains(&h) {
                take(t);
            }
        }
    }

    let c = teat.cap_center();
    if let Some((t0, t1)) = hit_sphere(ray, &c, r) {
        for t in [t0, t1] {
            if (ray.at(t) - c).dot(u) >= 0.0 {
                take(t);
            }
        }
    }
    best
}

/// Whether the ray can come within `r` of a point, a cheap rejection test.
pub fn near_sphere(ray: &Ray, center: &Point3<f64>, r: f64) -> bool {
    let o = center - ray.origin;
    let dd = ray.dir.norm_squared();
    let t = o.dot(&ray.dir) / dd;
    if t < 0.0 {
        return o.norm_squared() <= r * r;
    }
    (o - ray.dir * t).norm_squared() <= r * r
}

/// Shortest distance between segments `p0-p1` and `q0-q1`.
pub fn segment_distance(p0: &Point3<f64>, p1: &Point3<f64>, q0: &Point3<f64>, q1: &Point3<f64>) -> f64 {
    let d1 = p1 - p0;
    let d2 = q1 - q0;
    let r = p0 - q0;
    let a = d1.norm_squared();
    let e = d2.norm_squared();
    let f = d2.dot(&r);
    let clamp = |x: f64| x.clamp(0.0, 1.0);
    let (s, t) = if a <= 1e-18 && e <= 1e-18 {
        (0.0, 0.0)
    } else if a <= 1e-18 {
        (0.0, clamp(f / e))
    } else {
        let c = d1.dot(&r);
        if e <= 1e-18 {
            (clamp(-c / a), 0.0)
        } else {
            let b = d1.dot(&d2);
            let denom = a * e - b * b;
            let mut s = if denom > 1e-18 { clamp((b * f - c * e) / denom) } else { 0.0 };
            let mut t = (b * s + f) / e;
            if t < 0.0 {
                t = 0.0;
                s = clamp(-c / a);
            } else if t > 1.0 {
                t = 1.0;
                s = clamp((b - c) / a);
            }
            (s, t)
        }
    };
    ((p0 + d1 * s) - (q0 + d2 * t)).norm()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ellipsoid_front_hit() {
        let e = Ellipsoid { center: Point3::new(0.0, 0.0, 100.0), semi_axes: Vector3::new(10.0, 20.0, 30.0) };
        let ray = Ray { origin: Point3::origin(), dir: Vector3::z() };
        assert!((hit_ellipsoid(&ray, &e).unwrap() - 70.0).abs() < 1e-12);
        let miss = Ray { origin: Point3::new(11.0, 0.0, 0.0), dir: Vector3::z() };
        assert_eq!(hit_ellipsoid(&miss, &e), None);
    }

    #[test]
    fn teat_side_and_cap_hits() {
        let teat = TeatSpec::new(Point3::new(0.0, 0.0, 100.0), -Vector3::z());
        // side: horizontal ray at mid height
        let side = Ray { origin: Point3::new(-100.0, 0.0, 80.0), dir: Vector3::x() };
        assert!((hit_teat(&side, &teat).unwrap() - 86.0).abs() < 1e-9);
        // from straight below: the apex at z = 50
        let below = Ray { origin: Point3::new(0.0, 0.0, -100.0), dir: Vector3::z() };
        assert!((hit_teat(&below, &teat).unwrap() - 150.0).abs() < 1e-9);
        // above the base plane nothing is rendered
        let above = Ray { origin: Point3::new(-100.0, 0.0, 110.0), dir: Vector3::x() };
        assert_eq!(hit_teat(&above, &teat), None);
    }

    #[test]
    fn segment_distances() {
        let o = Point3::origin();
        let x = Point3::new(10.0, 0.0, 0.0);
        let d = segment_distance(&o, &x, &Point3::new(5.0, 3.0, -4.0), &Point3::new(5.0, 3.0, 4.0));
        assert!((d - 3.0).abs() < 1e-12);
        let d = segment_distance(&o, &x, &Point3::new(12.0, 0.0, 0.0), &Point3::new(20.0, 0.0, 0.0));
        assert!((d - 2.0).abs() < 1e-12);
    }
}
