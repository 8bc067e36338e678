//! Layout data model: rooms, top-down (BEV) object footprints and lifted 3D
//! placements, plus the line-oriented layout DSL and chain-of-thought records.
//!
//! All coordinates are layout pixels. The x axis runs along the room length,
//! the y axis along the room width and z is up.

mod cot;
mod dsl;
mod scene_file;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cot::{
    check_cot_consistency, parse_cot_record, parse_cot_value, ConsistencyFinding, CotRecord,
};
pub use dsl::{
    format_number, parse_bev_layout, parse_bev_line, parse_scene3d, parse_scene3d_lines,
    parse_scene3d_value, scene3d_payload, serialize_bev_layout, serialize_bev_object,
    serialize_scene3d, serialize_scene3d_object,
};
pub use scene_file::{parse_room_header, parse_scene_file, serialize_scene_file, SceneBody, SceneFile};

/// Largest room extent accepted on any axis.
pub const MAX_ROOM_EXTENT: u32 = 256;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LayoutError {
    #[error("malformed layout line {line}: {reason}")]
    MalformedLine { line: usize, reason: String },
    #[error("layout contains no objects")]
    EmptyLayout,
    #[error("layout has {layout} lines but {prompts} object prompts")]
    LengthMismatch { layout: usize, prompts: usize },
    #[error("missing field `{0}`")]
    MissingField(String),
    #[error("answer organization does not parse as a layout: {0}")]
    AnswerUnparseable(String),
    #[error("invalid payload: {0}")]
    InvalidPayload(String),
    #[error("invalid room: {0}")]
    InvalidRoom(String),
    #[error("invalid object: {0}")]
    InvalidObject(String),
}

/// Room extents in layout pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Room {
    pub max_length: u32,
    pub max_width: u32,
    pub max_height: u32,
}

impl Room {
    pub fn new(max_length: u32, max_width: u32, max_height: u32) -> Result<Self, LayoutError> {
        for (name, v) in [
            ("length", max_length),
            ("width", max_width),
            ("height", max_height),
        ] {
            if v == 0 || v > MAX_ROOM_EXTENT {
                return Err(LayoutError::InvalidRoom(format!(
                    "{name} {v} outside 1..={MAX_ROOM_EXTENT}"
                )));
            }
        }
        Ok(Self {
            max_length,
            max_width,
            max_height,
        })
    }

    /// Parses `LxWxH`, e.g. `256x171x160`.
    pub fn parse_dims(text: &str) -> Result<Self, LayoutError> {
        let parts: Vec<&str> = text.trim().split(['x', 'X']).collect();
        if parts.len() != 3 {
            return Err(LayoutError::InvalidRoom(format!(
                "expected LxWxH, got `{text}`"
            )));
        }
        let mut dims = [0u32; 3];
        for (slot, part) in dims.iter_mut().zip(&parts) {
            *slot = part
                .trim()
                .parse()
                .map_err(|_| LayoutError::InvalidRoom(format!("bad dimension `{part}`")))?;
        }
        Self::new(dims[0], dims[1], dims[2])
    }
}

/// Maps any finite angle in degrees into `[0, 360)`.
pub fn normalize_degrees(deg: f64) -> f64 {
    let r = deg.rem_euclid(360.0);
    // rem_euclid of a tiny negative value rounds up to exactly 360
    if r >= 360.0 {
        0.0
    } else {
        r + 0.0
    }
}

/// One object's top-down footprint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BevObject {
    pub label: String,
    pub length: f64,
    pub width: f64,
    pub center_x: f64,
    pub center_y: f64,
    /// Degrees in `[0, 360)`, counterclockwise from the +x axis.
    pub orientation: f64,
}

fn check_label(label: &str) -> Result<(), String> {
    if label.trim().is_empty() {
        return Err("empty label".into());
    }
    if label.contains(['{', '}', ';', '\n', '\r']) {
        return Err(format!("label `{label}` contains a reserved character"));
    }
    Ok(())
}

fn check_positive(name: &str, v: f64) -> Result<(), String> {
    if !v.is_finite() || v <= 0.0 {
        return Err(format!("{name} must be a positive finite number, got {v}"));
    }
    Ok(())
}

fn check_finite(name: &str, v: f64) -> Result<(), String> {
    if !v.is_finite() {
        return Err(format!("{name} must be finite, got {v}"));
    }
    Ok(())
}

impl BevObject {
    pub fn new(
        label: impl Into<String>,
        length: f64,
        width: f64,
        center_x: f64,
        center_y: f64,
        orientation: f64,
    ) -> Result<Self, LayoutError> {
        let label = label.into().trim().to_string();
        Self::validate_fields(&label, length, width, center_x, center_y, orientation)
            .map_err(LayoutError::InvalidObject)?;
        Ok(Self {
            label,
            length,
            width,
            center_x,
            center_y,
            orientation: normalize_degrees(orientation),
        })
    }

    fn validate_fields(
        label: &str,
        length: f64,
        width: f64,
        center_x: f64,
        center_y: f64,
        orientation: f64,
    ) -> Result<(), String> {
        check_label(label)?;
        check_positive("length", length)?;
        check_positive("width", width)?;
        check_finite("center_x", center_x)?;
        check_finite("center_y", center_y)?;
        check_finite("orientation", orientation)
    }

    /// Lowercased, trimmed label used to group instances into classes.
    pub fn class_key(&self) -> String {
        class_key(&self.label)
    }
}

/// Normalizes an object label or evaluator class name for matching.
pub fn class_key(label: &str) -> String {
    label.trim().to_lowercase()
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct BevLayout {
    pub objects: Vec<BevObject>,
}

impl BevLayout {
    pub fn new(objects: Vec<BevObject>) -> Self {
        Self { objects }
    }

    pub fn len(&self) -> usize {
        self.objects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }

    /// Instance count per class key, in first-appearance order.
    pub fn class_counts(&self) -> Vec<(String, usize)> {
        let mut counts: Vec<(String, usize)> = Vec::new();
        for obj in &self.objects {
            let key = obj.class_key();
            match counts.iter_mut().find(|(k, _)| *k == key) {
                Some((_, n)) => *n += 1,
                None => counts.push((key, 1)),
            }
        }
        counts
    }
}

/// A lifted object: footprint plus vertical extent and an asset prompt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneObject3D {
    pub label: String,
    pub length: f64,
    pub width: f64,
    pub height: f64,
    pub center_x: f64,
    pub center_y: f64,
    pub center_z: f64,
    pub orientation: f64,
    pub asset_prompt: String,
}

impl SceneObject3D {
    pub fn from_bev(bev: &BevObject, height: f64, center_z: f64) -> Result<Self, LayoutError> {
        check_positive("height", height).map_err(LayoutError::InvalidObject)?;
        check_finite("center_z", center_z).map_err(LayoutError::InvalidObject)?;
        Ok(Self {
            label: bev.label.clone(),
            length: bev.length,
            width: bev.width,
            height,
            center_x: bev.center_x,
            center_y: bev.center_y,
            center_z,
            orientation: bev.orientation,
            asset_prompt: String::new(),
        })
    }

    pub fn bev(&self) -> BevObject {
        BevObject {
            label: self.label.clone(),
            length: self.length,
            width: self.width,
            center_x: self.center_x,
            center_y: self.center_y,
            orientation: self.orientation,
        }
    }

    pub fn z_lo(&self) -> f64 {
        self.center_z - self.height / 2.0
    }

    pub fn z_hi(&self) -> f64 {
        self.center_z + self.height / 2.0
    }

    /// Checks `0 <= z_lo` and `z_hi <= room.max_height`.
    pub fn check_vertical_bounds(&self, room: &Room) -> Result<(), LayoutError> {
        if self.z_lo() < 0.0 || self.z_hi() > f64::from(room.max_height) {
            return Err(LayoutError::InvalidObject(format!(
                "`{}` occupies z in [{}, {}], outside [0, {}]",
                self.label,
                format_number(self.z_lo()),
                format_number(self.z_hi()),
                room.max_height
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene3D {
    pub room: Room,
    pub objects: Vec<SceneObject3D>,
}

impl Scene3D {
    pub fn new(room: Room, objects: Vec<SceneObject3D>) -> Self {
        Self { room, objects }
    }

    pub fn len(&self) -> usize {
        self.objects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }

    /// Top-down projection, object order preserved.
    pub fn bev(&self) -> BevLayout {
        BevLayout::new(self.objects.iter().map(SceneObject3D::bev).collect())
    }

    /// Treats a bare footprint layout as full-height boxes so 3D predicates
    /// reduce to their 2D counterparts.
    pub fn from_bev_full_height(room: Room, layout: &BevLayout) -> Self {
        let h = f64::from(room.max_height);
        let objects = layout
            .objects
            .iter()
            .map(|o| SceneObject3D {
                label: o.label.clone(),
                length: o.length,
                width: o.width,
                height: h,
                center_x: o.center_x,
                center_y: o.center_y,
                center_z: h / 2.0,
                orientation: o.orientation,
                asset_prompt: String::new(),
            })
            .collect();
        Self { room, objects }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn room_bounds() {
        assert!(Room::new(256, 171, 160).is_ok());
        assert!(Room::new(0, 10, 10).is_err());
        assert!(Room::new(257, 10, 10).is_err());
        assert_eq!(
            Room::parse_dims("256x171x160").unwrap(),
            Room::new(256, 171, 160).unwrap()
        );
        assert!(Room::parse_dims("256x171").is_err());
    }

    #[test]
    fn orientation_is_normalized() {
        assert_eq!(normalize_degrees(-90.0), 270.0);
        assert_eq!(normalize_degrees(360.0), 0.0);
        assert_eq!(normalize_degrees(725.5), 5.5);
        assert!(normalize_degrees(-1e-20) < 360.0);
        assert!(normalize_degrees(-0.0).is_sign_positive());
    }

    #[test]
    fn degenerate_objects_rejected() {
        assert!(BevObject::new("desk", 0.0, 10.0, 1.0, 1.0, 0.0).is_err());
        assert!(BevObject::new("desk", 10.0, -1.0, 1.0, 1.0, 0.0).is_err());
        assert!(BevObject::new("", 10.0, 10.0, 1.0, 1.0, 0.0).is_err());
        assert!(BevObject::new("a;b", 10.0, 10.0, 1.0, 1.0, 0.0).is_err());
        assert!(BevObject::new("desk", 10.0, 10.0, f64::NAN, 1.0, 0.0).is_err());
    }

    #[test]
    fn vertical_bounds() {
        let room = Room::new(256, 171, 160).unwrap();
        let bed = BevObject::new("bed", 88.0, 40.0, 120.0, 60.0, 0.0).unwrap();
        let lifted = SceneObject3D::from_bev(&bed, 36.0, 18.0).unwrap();
        assert_eq!(lifted.z_lo(), 0.0);
        assert_eq!(lifted.z_hi(), 36.0);
        assert!(lifted.check_vertical_bounds(&room).is_ok());
        let high = SceneObject3D::from_bev(&bed, 36.0, 150.0).unwrap();
        assert!(high.check_vertical_bounds(&room).is_err());
    }
}
