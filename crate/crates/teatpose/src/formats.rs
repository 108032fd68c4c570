//! JSON forms of cameras, masks, poses, scenes and ground truth.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use teatpose_core::synth::{Ellipsoid, GroundTruth, NoiseModel, Occluder, SceneSpec, TeatSpec, TeatTruth};
use teatpose_core::{CameraModel, Intrinsics, Matrix3, Method, Point3, TeatMask, TeatPose, Unit, Vector3};

use crate::error::{Error, IoContext, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtrinsicJson {
    pub rotation_rowmajor: [f64; 9],
    pub translation_mm: [f64; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraJson {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
    pub extrinsic: ExtrinsicJson,
}

impl From<&CameraModel> for CameraJson {
    fn from(camera: &CameraModel) -> Self {
        let i = camera.intrinsics();
        let r = camera.rotation_matrix();
        let mut rotation_rowmajor = [0.0; 9];
        for row in 0..3 {
            for col in 0..3 {
                rotation_rowmajor[row * 3 + col] = r[(row, col)];
            }
        }
        let t = camera.extrinsic().translation.vector;
        Self {
            fx: i.fx,
            fy: i.fy,
            cx: i.cx,
            cy: i.cy,
            width: i.width,
            height: i.height,
            extrinsic: ExtrinsicJson { rotation_rowmajor, translation_mm: [t.x, t.y, t.z] },
        }
    }
}

impl CameraJson {
    pub fn to_camera(&self) -> Result<CameraModel> {
        let intr = Intrinsics { fx: self.fx, fy: self.fy, cx: self.cx, cy: self.cy, width: self.width, height: self.height };
        let rotation = Matrix3::from_row_slice(&self.extrinsic.rotation_rowmajor);
        Ok(CameraModel::from_rotation(intr, rotation, Vector3::from(self.extrinsic.translation_mm))?)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskJson {
    pub teat_id: String,
    pub stamp_us: u64,
    pub contour: Vec<[i32; 2]>,
}

impl From<&TeatMask> for MaskJson {
    fn from(m: &TeatMask) -> Self {
        Self { teat_id: m.teat_id().into(), stamp_us: m.stamp_us(), contour: m.contour().to_vec() }
    }
}

impl MaskJson {
    /// Validates the contour against a `width` x `height` image.
    pub fn to_mask(&self, width: u32, height: u32) -> Result<TeatMask> {
        Ok(TeatMask::new(self.teat_id.clone(), self.stamp_us, self.contour.clone(), width, height)?)
    }
}

/// One line of a pose log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoseJson {
    pub teat_id: String,
    pub stamp_us: u64,
    pub tip_mm: [f64; 3],
    pub axis: [f64; 3],
    pub method: Method,
    pub n_points: usize,
}

impl From<&TeatPose> for PoseJson {
    fn from(p: &TeatPose) -> Self {
        Self {
            teat_id: p.teat_id.clone(),
            stamp_us: p.stamp_us,
            tip_mm: p.tip_mm.coords.into(),
            axis: p.axis.into_inner().into(),
            method: p.method,
            n_points: p.n_points,
        }
    }
}

impl PoseJson {
    pub fn to_pose(&self) -> Result<TeatPose> {
        Ok(TeatPose {
            teat_id: self.teat_id.clone(),
            stamp_us: self.stamp_us,
            tip_mm: Point3::from(self.tip_mm),
            axis: unit(self.axis, "pose axis")?,
            method: self.method,
            n_points: self.n_points,
        })
    }
}

fn unit(v: [f64; 3], what: &str) -> Result<Unit<Vector3<f64>>> {
    let v = Vector3::from(v);
    let n = v.norm();
    if !(n > 0.0) || !n.is_finite() {
        return Err(Error::Config(format!("{what} must be a non-zero finite vector")));
    }
    Ok(Unit::new_normalize(v))
}

/// A noise model given inline or by preset name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NoiseJson {
    Preset(String),
    Model(NoiseModel),
}

impl NoiseJson {
    pub fn resolve(&self) -> Result<NoiseModel> {
        match self {
            NoiseJson::Preset(name) => preset(name),
            NoiseJson::Model(m) => {
                m.validate()?;
                Ok(*m)
            }
        }
    }
}

pub fn preset(name: &str) -> Result<NoiseModel> {
    NoiseModel::preset(name).ok_or_else(|| Error::Config(format!("unknown noise preset {name:?}")))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UdderJson {
    pub center_mm: [f64; 3],
    pub semi_axes_mm: [f64; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TeatJson {
    pub base_mm: [f64; 3],
    /// Base toward tip; normalized on load.
    pub axis: [f64; 3],
    #[serde(default = "default_length")]
    pub length_mm: f64,
    #[serde(default = "default_radius")]
    pub radius_mm: f64,
}

fn default_length() -> f64 {
    TeatSpec::DEFAULT_LENGTH
}

fn default_radius() -> f64 {
    TeatSpec::DEFAULT_RADIUS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneJson {
    pub udder: UdderJson,
    pub teats: Vec<TeatJson>,
    pub camera: CameraJson,
    pub noise: NoiseJson,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub occluders: Vec<Occluder>,
}

impl From<&SceneSpec> for SceneJson {
    fn from(s: &SceneSpec) -> Self {
        Self {
            udder: UdderJson { center_mm: s.udder.center.coords.into(), semi_axes_mm: s.udder.semi_axes.into() },
            teats: s
                .teats
                .iter()
                .map(|t| TeatJson {
                    base_mm: t.base_mm.coords.into(),
                    axis: t.axis.into_inner().into(),
                    length_mm: t.length,
                    radius_mm: t.radius,
                })
                .collect(),
            camera: CameraJson::from(&s.camera),
            noise: NoiseJson::Model(s.noise),
            seed: s.seed,
            occluders: s.occluders.clone(),
        }
    }
}

impl SceneJson {
    /// Builds and validates the scene.
    pub fn to_scene(&self) -> Result<SceneSpec> {
        let teats = self
            .teats
            .iter()
            .map(|t| {
                Ok(TeatSpec {
                    base_mm: Point3::from(t.base_mm),
                    axis: unit(t.axis, "teat axis")?,
                    length: t.length_mm,
                    radius: t.radius_mm,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let scene = SceneSpec {
            udder: Ellipsoid {
                center: Point3::from(self.udder.center_mm),
                semi_axes: Vector3::from(self.udder.semi_axes_mm),
            },
            teats,
            camera: self.camera.to_camera()?,
            noise: self.noise.resolve()?,
            seed: self.seed,
            occluders: self.occluders.clone(),
        };
        scene.validate()?;
        Ok(scene)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TeatTruthJson {
    pub teat_id: String,
    pub label: u8,
    pub tip_mm: [f64; 3],
    /// Tip toward base.
    pub axis: [f64; 3],
    pub radius_mm: f64,
    pub length_mm: f64,
}

impl From<&TeatTruth> for TeatTruthJson {
    fn from(t: &TeatTruth) -> Self {
        Self {
            teat_id: t.teat_id.clone(),
            label: t.label,
            tip_mm: t.tip_mm.coords.into(),
            axis: t.axis.into_inner().into(),
            radius_mm: t.radius,
            length_mm: t.length,
        }
    }
}

/// Ground truth without the label image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthJson {
    pub teats: Vec<TeatTruthJson>,
}

impl From<&GroundTruth> for GroundTruthJson {
    fn from(g: &GroundTruth) -> Self {
        Self { teats: g.teats.iter().map(TeatTruthJson::from).collect() }
    }
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let file = File::open(path).at(path)?;
    serde_json::from_reader(BufReader::new(file)).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut out = BufWriter::new(File::create(path).at(path)?);
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n").at(path)?;
    out.flush().at(path)
}

pub fn load_scene(path: &Path) -> Result<SceneSpec> {
    read_json::<SceneJson>(path)?.to_scene()
}
