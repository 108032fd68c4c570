//! Point clouds as PLY: `x y z` float32 in mm, optional `red green blue`
//! uchar. The frame tag travels in a `comment frame camera|world` header
//! line; files without it are read as camera frame.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ply_rs_bw::parser::{Parser, Reader};
use ply_rs_bw::ply::{
    ElementDef, Encoding, Ply, Property, PropertyAccess, PropertyAccessResult, PropertyDef, PropertyType, ScalarType,
};
use ply_rs_bw::writer::Writer;
use teatpose_core::{Frame, Point3, PointCloud};

use crate::error::{Error, IoContext, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PlyEncoding {
    Ascii,
    #[default]
    BinaryLittleEndian,
}

#[derive(Debug, Clone, Copy, Default)]
struct Vertex {
    xyz: [f32; 3],
    rgb: [u8; 3],
}

fn axis_index(name: &str) -> Option<usize> {
    ["x", "y", "z"].iter().position(|n| *n == name)
}

fn color_index(name: &str) -> Option<usize> {
    ["red", "green", "blue"].iter().position(|n| *n == name)
}

impl PropertyAccess for Vertex {
    fn new() -> Self {
        Self::default()
    }

    fn set_property(&mut self, name: &str, property: Property) -> PropertyAccessResult {
        if let Some(i) = axis_index(name) {
            match property.to_f32_lossy() {
                Some(v) => self.xyz[i] = v,
                None => return PropertyAccessResult::UnsupportedType,
            }
        } else if let Some(i) = color_index(name) {
            match property.to_u8_color_lossy() {
                Some(v) => self.rgb[i] = v,
                None => return PropertyAccessResult::UnsupportedType,
            }
        } else {
            return PropertyAccessResult::Ignored;
        }
        PropertyAccessResult::Set
    }

    fn get_float(&self, name: &str) -> Option<f32> {
        axis_index(name).map(|i| self.xyz[i])
    }

    fn get_uchar(&self, name: &str) -> Option<u8> {
        color_index(name).map(|i| self.rgb[i])
    }
}

fn frame_comment(frame: Frame) -> String {
    match frame {
        Frame::Camera => "frame camera".into(),
        Frame::World => "frame world".into(),
    }
}

/// Coordinates are narrowed to f32.
pub fn write_ply<W: Write>(out: &mut W, cloud: &PointCloud, encoding: PlyEncoding) -> Result<()> {
    let mut ply = Ply::<Vertex>::new();
    ply.header.encoding = match encoding {
        PlyEncoding::Ascii => Encoding::Ascii,
        PlyEncoding::BinaryLittleEndian => Encoding::BinaryLittleEndian,
    };
    ply.header.comments.push(frame_comment(cloud.frame()));
    let mut element = ElementDef::new("vertex".into());
    for name in ["x", "y", "z"] {
        element.properties.insert(name.into(), PropertyDef::new(name.into(), PropertyType::Scalar(ScalarType::Float)));
    }
    if cloud.colors().is_some() {
        for name in ["red", "green", "blue"] {
            element
                .properties
                .insert(name.into(), PropertyDef::new(name.into(), PropertyType::Scalar(ScalarType::UChar)));
        }
    }
    ply.header.elements.insert("vertex".into(), element);
    let colors = cloud.colors();
    let vertices = cloud
        .iter()
        .enumerate()
        .map(|(i, p)| Vertex {
            xyz: [p.x as f32, p.y as f32, p.z as f32],
            rgb: colors.map_or([0; 3], |c| c[i]),
        })
        .collect();
    ply.payload.insert("vertex".into(), vertices);
    Writer::new().write_ply(out, &mut ply).map_err(|e| Error::Ply(e.to_string()))?;
    Ok(())
}

pub fn read_ply<R: Read>(input: R) -> Result<PointCloud> {
    let mut reader = Reader::new(BufReader::new(input));
    let parser = Parser::<Vertex>::new();
    let header = parser.read_header(&mut reader).map_err(|e| Error::Ply(e.to_string()))?;
    let frame = if header.comments.iter().any(|c| c.trim() == "frame world") { Frame::World } else { Frame::Camera };

    let mut vertices = None;
    let mut has_color = false;
    for (name, element) in &header.elements {
        // every element has to be consumed in order to reach the next one
        let payload =
            parser.read_payload_for_element(&mut reader, element, &header).map_err(|e| Error::Ply(e.to_string()))?;
        if name == "vertex" {
            for axis in ["x", "y", "z"] {
                if !element.properties.contains_key(axis) {
                    return Err(Error::Ply(format!("vertex element has no {axis} property")));
                }
            }
            has_color = ["red", "green", "blue"].iter().all(|c| element.properties.contains_key(*c));
            vertices = Some(payload);
        }
    }
    let vertices = vertices.ok_or_else(|| Error::Ply("no vertex element".into()))?;
    let points = vertices.iter().map(|v| Point3::new(f64::from(v.xyz[0]), f64::from(v.xyz[1]), f64::from(v.xyz[2])));
    let cloud = if has_color {
        PointCloud::with_colors(frame, points.collect(), vertices.iter().map(|v| v.rgb).collect())?
    } else {
        PointCloud::new(frame, points.collect())?
    };
    Ok(cloud)
}

pub fn save_ply(path: &Path, cloud: &PointCloud, encoding: PlyEncoding) -> Result<()> {
    let mut out = BufWriter::new(File::create(path).at(path)?);
    write_ply(&mut out, cloud, encoding)?;
    out.flush().at(path)
}

pub fn load_ply(path: &Path) -> Result<PointCloud> {
    read_ply(File::open(path).at(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cloud(colors: bool) -> PointCloud {
        let pts = vec![Point3::new(1.5, -2.25, 600.0), Point3::new(0.0, 0.125, 1e3), Point3::new(-40.0, 3.0, 250.5)];
        if colors {
            PointCloud::with_colors(Frame::World, pts, vec![[1, 2, 3], [255, 0, 7], [9, 9, 9]]).unwrap()
        } else {
            PointCloud::new(Frame::Camera, pts).unwrap()
        }
    }

    #[test]
    fn round_trips_both_encodings() {
        for enc in [PlyEncoding::Ascii, PlyEncoding::BinaryLittleEndian] {
            for colors in [false, true] {
                let c = cloud(colors);
                let mut buf = Vec::new();
                write_ply(&mut buf, &c, enc).unwrap();
                assert_eq!(read_ply(buf.as_slice()).unwrap(), c, "{enc:?} colors={colors}");
            }
        }
    }

    #[test]
    fn ascii_header_is_plain() {
        let mut buf = Vec::new();
        write_ply(&mut buf, &cloud(true), PlyEncoding::Ascii).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("ply\nformat ascii 1.0\n"));
        assert!(text.contains("comment frame world\n"));
        assert!(text.contains("element vertex 3\nproperty float x\n"));
        assert!(text.contains("property uchar red\n"));
    }

    #[test]
    fn reads_double_coordinates_and_extra_elements() {
        let text = "ply\nformat ascii 1.0\nelement vertex 2\nproperty double x\nproperty double y\n\
                    property double z\nproperty float intensity\nelement face 1\n\
                    property list uchar int vertex_indices\nend_header\n1 2 3 0.5\n4 5 6 0.5\n3 0 1 0\n";
        let c = read_ply(text.as_bytes()).unwrap();
        assert_eq!(c.frame(), Frame::Camera);
        assert_eq!(c.points()[1], Point3::new(4.0, 5.0, 6.0));
        assert!(c.colors().is_none());
    }

    #[test]
    fn missing_axis_is_an_error() {
        let text = "ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nproperty float y\nend_header\n1 2\n";
        assert!(matches!(read_ply(text.as_bytes()), Err(Error::Ply(_))));
    }
}
