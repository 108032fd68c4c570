use std::f64::consts::PI;

use nalgebra::Rotation3;
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use rand_distr::{Distribution, StandardNormal};

use teatpose_core::frame::{estimate_frame, GeometryConfig};
use teatpose_core::synth::{render, NoiseModel, SceneSpec};
use teatpose_core::*;

fn unit(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64
}

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * unit(rng)
}

fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Capped cylinder with its apex at `tip` and `axis` pointing from the tip
/// toward the base: surface points on a ~`step` mm grid with their outward
/// normals. With `eye`, only the camera-facing half (the shape is convex,
/// so that is exactly the visible surface).
struct Capped {
    tip: Point3<f64>,
    axis: Unit<Vector3<f64>>,
    radius: f64,
    length: f64,
}

impl Capped {
    fn sample(&self, step: f64, eye: Option<&Point3<f64>>) -> Vec<(Point3<f64>, Vector3<f64>)> {
        let a = self.axis.into_inner();
        let (e1, e2) = orthonormal_completion(&self.axis);
        let (e1, e2) = (e1.into_inner(), e2.into_inner());
        let r = self.radius;
        let center = self.tip + a * r;
        let mut out = Vec::new();
        let n_theta = ((2.0 * PI * r) / step).ceil() as usize;
        let n_s = ((self.length - r) / step).ceil() as usize;
        for i in 0..=n_s {
            let s = r + (self.length - r) * i as f64 / n_s as f64;
            for j in 0..n_theta {
                let th = 2.0 * PI * j as f64 / n_theta as f64;
                let n = e1 * th.cos() + e2 * th.sin();
                out.push((self.tip + a * s + n * r, n));
            }
        }
        let n_phi = ((PI / 2.0 * r) / step).ceil() as usize;
        for i in 1..=n_phi {
            let phi = PI / 2.0 * i as f64 / n_phi as f64;
            let ring = ((2.0 * PI * r * phi.sin()) / step).ceil().max(1.0) as usize;
            for j in 0..ring {
                let th = 2.0 * PI * j as f64 / ring as f64;
                let n = -a * phi.cos() + (e1 * th.cos() + e2 * th.sin()) * phi.sin();
                out.push((center + n * r, n));
            }
        }
        out.push((self.tip, -a));
        match eye {
            Some(eye) => out.into_iter().filter(|(p, n)| n.dot(&(eye - p)) > 0.0).collect(),
            None => out,
        }
    }

    fn cloud(&self, step: f64, eye: Option<&Point3<f64>>) -> PointCloud {
        PointCloud::new(Frame::World, self.sample(step, eye).into_iter().map(|(p, _)| p).collect()).unwrap()
    }
}

fn random_axis(rng: &mut ChaCha8Rng, max_tilt_deg: f64) -> Unit<Vector3<f64>> {
    let tilt = uniform(rng, 0.0, max_tilt_deg).to_radians();
    let az = uniform(rng, 0.0, 2.0 * PI);
    // tip below the base: the axis toward the base has a positive z
    Unit::new_normalize(Vector3::new(tilt.sin() * az.cos(), tilt.sin() * az.sin(), tilt.cos()))
}

fn random_cloud(rng: &mut ChaCha8Rng, n: usize) -> Vec<Point3<f64>> {
    let scale = Vector3::new(uniform(rng, 1.0, 40.0), uniform(rng, 1.0, 40.0), uniform(rng, 1.0, 40.0));
    (0..n)
        .map(|_| Point3::new(gauss(rng) * scale.x + 3.0 * scale.y, gauss(rng) * scale.y, gauss(rng) * scale.z + gauss(rng) * 5.0))
        .collect()
}

fn power_iteration(points: &[Point3<f64>]) -> (Vector3<f64>, f64, f64) {
    let n = points.len() as f64;
    let mean = points.iter().fold(Vector3::zeros(), |acc, p| acc + p.coords) / n;
    let mut cov = Matrix3::zeros();
    for p in points {
        let d = p.coords - mean;
        cov += d * d.transpose();
    }
    cov /= n;
    let mut v = Vector3::new(1.0, 0.7, 0.3).normalize();
    for _ in 0..20_000 {
        v = (cov * v).normalize();
    }
    let lambda = v.dot(&(cov * v));
    // second eigenvalue by deflation
    let deflated = cov - v * v.transpose() * lambda;
    let mut w = Vector3::new(0.2, -0.5, 0.9).normalize();
    for _ in 0..20_000 {
        w = (deflated * w).normalize();
    }
    (v, lambda, w.dot(&(deflated * w)))
}

#[test]
fn pca_matches_power_iteration_on_random_clouds() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut checked = 0;
    for _ in 0..200 {
        let pts = random_cloud(&mut rng, 200);
        let (v, l1, l2) = power_iteration(&pts);
        // power iteration converges slowly for nearly tied eigenvalues
        if l1 / l2 < 1.2 {
            continue;
        }
        let axis = pca_axis(&PointCloud::new(Frame::World, pts).unwrap()).unwrap();
        let err = (axis.into_inner() - v).norm().min((axis.into_inner() + v).norm());
        assert!(err < 1e-6, "{err}");
        checked += 1;
    }
    assert!(checked >= 100);
}

#[test]
fn pca_on_noiseless_cylinder() {
    let c = Capped { tip: Point3::new(10.0, -20.0, 5.0), axis: Unit::new_normalize(Vector3::y()), radius: 15.0, length: 60.0 };
    let axis = pca_axis(&c.cloud(1.0, None)).unwrap();
    assert!(angle_between_axes_deg(&axis, &Vector3::y()) < 0.1);
}

#[test]
fn pca_is_scale_invariant_and_rotation_equivariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..50 {
        let pts = random_cloud(&mut rng, 150);
        let Ok(axis) = pca_axis(&PointCloud::new(Frame::World, pts.clone()).unwrap()) else { continue };
        let c = pts.iter().fold(Vector3::zeros(), |acc, p| acc + p.coords) / pts.len() as f64;
        let s = uniform(&mut rng, 0.01, 100.0);
        let scaled: Vec<_> = pts.iter().map(|p| Point3::from(c + (p.coords - c) * s)).collect();
        let axis_s = pca_axis(&PointCloud::new(Frame::World, scaled).unwrap()).unwrap();
        assert!((axis.dot(&axis_s).abs() - 1.0).abs() < 1e-9);

        let rot = Rotation3::from_axis_angle(&random_axis(&mut rng, 180.0), uniform(&mut rng, 0.0, 2.0 * PI));
        let rotated: Vec<_> = pts.iter().map(|p| rot * p).collect();
        let axis_r = pca_axis(&PointCloud::new(Frame::World, rotated).unwrap()).unwrap();
        assert!(angle_between_axes_deg(&axis_r, &(rot * axis.into_inner())) < 0.2);
    }
}

#[test]
fn cylinder_normals_are_orthogonal_to_axis() {
    let axis = Unit::new_normalize(Vector3::new(0.2, -0.1, 1.0));
    let c = Capped { tip: Point3::origin(), axis, radius: 14.0, length: 60.0 };
    let eye = Point3::new(0.0, -500.0, -300.0);
    let samples = c.sample(1.5, Some(&eye));
    let cloud = PointCloud::new(Frame::World, samples.iter().map(|s| s.0).collect()).unwrap();
    let field = estimate_normals(&cloud, 12, &eye).unwrap();
    let (mut side, mut bad) = (0, 0);
    for ((p, _), n) in samples.iter().zip(field.normals()) {
        assert!((n.norm() - 1.0).abs() < 1e-9);
        assert!(n.dot(&(eye - p)) >= 0.0);
        // body points away from the cap seam and the far rim
        let s = (p - c.tip).dot(&axis);
        if s > c.radius + 5.0 && s < c.length - 5.0 {
            side += 1;
            let deg = 90.0 - n.dot(&axis).abs().acos().to_degrees().min(90.0);
            if deg >= 3.0 {
                bad += 1;
            }
        }
    }
    assert!(side > 200);
    assert_eq!(bad, 0, "{bad} of {side} body normals off by >= 3 degrees");
    let a = normals_axis(&field.select(
        &samples
            .iter()
            .enumerate()
            .filter(|(_, (p, _))| (p - c.tip).dot(&axis) > c.radius + 5.0 && (p - c.tip).dot(&axis) < c.length - 5.0)
            .map(|(i, _)| i)
            .collect::<Vec<_>>(),
    ))
    .unwrap();
    assert!(angle_between_axes_deg(&a, &axis) < 1.0);
}

fn fibonacci_sphere(n: usize) -> impl Iterator<Item = Vector3<f64>> {
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..n).map(move |i| {
        let y = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
        let r = (1.0 - y * y).sqrt();
        let th = golden * i as f64;
        Vector3::new(r * th.cos(), y, r * th.sin())
    })
}

#[test]
fn normals_axis_matches_sphere_grid_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let grid: Vec<Vector3<f64>> = fibonacci_sphere(100_000).collect();
    for _ in 0..5 {
        let axis = random_axis(&mut rng, 90.0);
        let (e1, e2) = orthonormal_completion(&axis);
        let normals: Vec<Unit<Vector3<f64>>> = (0..200)
            .map(|_| {
                let th = uniform(&mut rng, 0.0, PI);
                let tilt = gauss(&mut rng) * 0.1;
                Unit::new_normalize(e1.into_inner() * th.cos() + e2.into_inner() * th.sin() + axis.into_inner() * tilt)
            })
            .collect();
        let field = SurfaceNormalField::from_normals(normals.clone(), 12);
        let got = normals_axis(&field).unwrap();
        let cost = |a: &Vector3<f64>| normals.iter().map(|n| n.dot(a).powi(2)).sum::<f64>();
        let best = grid.iter().min_by(|a, b| cost(a).total_cmp(&cost(b))).unwrap();
        assert!(angle_between_axes_deg(&got, best) < 1.0);
        assert!(cost(&got) <= cost(best) + 1e-9);
    }
}

#[test]
fn disambiguation_over_tilted_teats() {
    let camera = synth::default_camera();
    let eye = camera.origin();
    let mut rng = ChaCha8Rng::seed_from_u64(29);
    for trial in 0..1000 {
        let axis = random_axis(&mut rng, 30.0);
        let tip = Point3::new(uniform(&mut rng, -80.0, 80.0), uniform(&mut rng, -60.0, 60.0), uniform(&mut rng, -40.0, 10.0));
        let c = Capped { tip, axis, radius: uniform(&mut rng, 9.0, 15.0), length: uniform(&mut rng, 35.0, 65.0) };
        let cloud = c.cloud(3.0, Some(&eye));
        let raw = pca_axis(&cloud).unwrap();
        let raw = if unit(&mut rng) < 0.5 { -raw } else { raw };
        let out = disambiguate_direction(&raw, &cloud, &camera);
        assert!(out.dot(&axis) > 0.0, "trial {trial}");
        // the same rule in camera frame
        let cam_cloud = cloud.to_camera(&camera);
        let raw_cam = Unit::new_normalize(camera.extrinsic().rotation.inverse() * raw.into_inner());
        let out_cam = disambiguate_direction(&raw_cam, &cam_cloud, &camera);
        assert!((camera.extrinsic().rotation * out_cam.into_inner()).dot(&axis) > 0.0);
    }
}

#[test]
fn sign_rule_holds_for_arbitrary_axes() {
    let camera = synth::default_camera();
    let mut rng = ChaCha8Rng::seed_from_u64(30);
    let cloud = PointCloud::new(Frame::World, random_cloud(&mut rng, 50)).unwrap();
    for _ in 0..1000 {
        let raw = random_axis(&mut rng, 180.0);
        let out = disambiguate_direction(&raw, &cloud, &camera);
        assert!((out.dot(&raw).abs() - 1.0).abs() < 1e-12);
        if raw.z.abs() >= 0.1 {
            assert!(out.z > 0.0);
        }
    }
}

#[test]
fn tip_of_noiseless_capped_cylinder() {
    let c = Capped { tip: Point3::origin(), axis: Unit::new_normalize(Vector3::z()), radius: 14.0, length: 50.0 };
    let eye = Point3::new(0.0, -460.0, -385.0);
    for cloud in [c.cloud(1.0, None), c.cloud(1.0, Some(&eye)), c.cloud(4.0, Some(&eye))] {
        let tip = locate_tip(&cloud, &c.axis).unwrap();
        assert!(tip.coords.norm() < 1.0, "{tip}");
    }
}

#[test]
fn tip_under_one_mm_noise() {
    let eye = Point3::new(0.0, -460.0, -385.0);
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let axis = random_axis(&mut rng, 20.0);
        let tip = Point3::new(uniform(&mut rng, -50.0, 50.0), uniform(&mut rng, -50.0, 50.0), 0.0);
        let c = Capped { tip, axis, radius: 14.0, length: 50.0 };
        let pts: Vec<Point3<f64>> = c
            .sample(2.0, Some(&eye))
            .into_iter()
            .map(|(p, _)| p + Vector3::new(gauss(&mut rng), gauss(&mut rng), gauss(&mut rng)))
            .collect();
        let cloud = PointCloud::new(Frame::World, pts).unwrap();
        let found = locate_tip(&cloud, &axis).unwrap();
        worst = worst.max((found - tip).norm());
    }
    assert!(worst <= 2.0, "worst tip error {worst}");
}

#[test]
fn methods_agree_on_noisy_cylinders() {
    let camera = synth::default_camera();
    let eye = camera.origin();
    let grid = VoxelGrid::with_leaf(5.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(37);
    for trial in 0..100 {
        let axis = random_axis(&mut rng, 30.0);
        let tip = Point3::new(uniform(&mut rng, -80.0, 80.0), uniform(&mut rng, -60.0, 60.0), uniform(&mut rng, -30.0, 10.0));
        let radius = uniform(&mut rng, 10.0, 15.0);
        // length / diameter >= 1.5
        let c = Capped { tip, axis, radius, length: uniform(&mut rng, 3.0 * radius, 4.5 * radius) };
        let pts: Vec<Point3<f64>> = c
            .sample(1.5, Some(&eye))
            .into_iter()
            .map(|(p, _)| p + (p - eye).normalize() * (2.0 * gauss(&mut rng)))
            .collect();
        let cloud = voxel_downsample(&PointCloud::new(Frame::World, pts).unwrap(), &grid);
        let cfg = PoseConfig::default();
        let a = estimate_teat_pose(&cloud, &camera, Method::Pca, &cfg).unwrap();
        let b = estimate_teat_pose(&cloud, &camera, Method::Normals, &cfg).unwrap();
        let d = angle_between_axes_deg(&a.axis, &b.axis);
        assert!(d < 5.0, "trial {trial}: methods differ by {d}");
    }
}

fn single_teat_truth(scene: &SceneSpec, stride: usize, method: Method) -> (TeatPose, Point3<f64>, Unit<Vector3<f64>>) {
    let r = render(scene).unwrap();
    let cfg = GeometryConfig { method, contour_stride: stride, ..GeometryConfig::default() };
    let est = estimate_frame(0, &r.cloud, &r.masks, &scene.camera, &cfg).unwrap();
    assert!(est.failures.is_empty(), "{:?}", est.failures);
    let t = &r.truth.teats[0];
    (est.poses[0].clone(), t.tip_mm, t.axis)
}

#[test]
fn rendered_vertical_teat_is_accurate() {
    let scene = SceneSpec::single_teat(0.0, 0.0, 0.0, 0.0);
    let (pca, tip, axis) = single_teat_truth(&scene, 1, Method::Pca);
    assert!((pca.tip_mm - tip).norm() < 0.5, "tip error {}", (pca.tip_mm - tip).norm());
    assert!(angle_between_axes_deg(&pca.axis, &axis) < 0.5);
    assert!(pca.axis.dot(&axis) > 0.0);
    let (normals, ..) = single_teat_truth(&scene, 1, Method::Normals);
    assert!(angle_between_axes_deg(&normals.axis, &pca.axis) < 5.0);
}

#[test]
fn rendered_tilted_teats_are_accurate() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    for _ in 0..10 {
        let scene = SceneSpec::single_teat(
            uniform(&mut rng, -50.0, 50.0),
            uniform(&mut rng, -40.0, 40.0),
            uniform(&mut rng, 0.0, 25.0),
            uniform(&mut rng, 0.0, 360.0),
        );
        let (pose, tip, axis) = single_teat_truth(&scene, 1, Method::Pca);
        assert!((pose.tip_mm - tip).norm() < 1.0, "tip error {}", (pose.tip_mm - tip).norm());
        assert!(angle_between_axes_deg(&pose.axis, &axis) < 1.0);
    }
}

#[test]
fn estimation_is_deterministic() {
    let scene = SceneSpec::default_four_teat().with_seed(4);
    let r = render(&scene).unwrap();
    for method in [Method::Pca, Method::Normals] {
        let cfg = GeometryConfig { method, ..GeometryConfig::default() };
        let a = estimate_frame(0, &r.cloud, &r.masks, &scene.camera, &cfg).unwrap();
        let b = estimate_frame(0, &r.cloud, &r.masks, &scene.camera, &cfg).unwrap();
        assert_eq!(a, b);
        for p in &a.poses {
            assert!((p.axis.norm() - 1.0).abs() < 1e-9);
        }
    }
}

#[test]
fn default_scene_under_noise_finds_all_teats() {
    let scene = SceneSpec::default_four_teat().with_noise(NoiseModel::orbbec_like()).with_seed(2);
    let r = render(&scene).unwrap();
    let est = estimate_frame(0, &r.cloud, &r.masks, &scene.camera, &GeometryConfig::default()).unwrap();
    assert_eq!(est.poses.len(), 4);
    for p in &est.poses {
        let t = r.truth.teat(&p.teat_id).unwrap();
        assert!((p.tip_mm - t.tip_mm).norm() < 5.0);
    }
}
