//! Scene files: a `room {length: Npx; width: Npx; height: Npx;}` header line
//! followed by either footprint lines or 3D lines (not mixed).

use super::dsl::{parse_bev_line, parse_scene3d_lines, serialize_scene3d};
use super::{serialize_bev_layout, BevLayout, LayoutError, Room, Scene3D};

#[derive(Debug, Clone, PartialEq)]
pub enum SceneBody {
    Bev(BevLayout),
    Lifted(Scene3D),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneFile {
    pub room: Room,
    pub body: SceneBody,
}

impl SceneFile {
    /// Lifted scene; footprint-only files become full-height boxes.
    pub fn scene3d(&self) -> Scene3D {
        match &self.body {
            SceneBody::Lifted(scene) => scene.clone(),
            SceneBody::Bev(layout) => Scene3D::from_bev_full_height(self.room, layout),
        }
    }

    pub fn bev(&self) -> BevLayout {
        match &self.body {
            SceneBody::Lifted(scene) => scene.bev(),
            SceneBody::Bev(layout) => layout.clone(),
        }
    }
}

fn room_field(body: &str, key: &str) -> Result<u32, LayoutError> {
    for field in body.split(';') {
        if let Some((k, v)) = field.split_once(':') {
            if k.trim() == key {
                let v = v.trim();
                let num = v.strip_suffix("px").unwrap_or(v).trim();
                return num
                    .parse()
                    .map_err(|_| LayoutError::InvalidRoom(format!("bad {key} `{v}`")));
            }
        }
    }
    Err(LayoutError::InvalidRoom(format!("room header lacks `{key}`")))
}

/// Parses `room {length: 256px; width: 171px; height: 160px;}`.
pub fn parse_room_header(line: &str) -> Result<Room, LayoutError> {
    let line = line.trim();
    let rest = line
        .strip_prefix("room")
        .map(str::trim_start)
        .and_then(|r| r.strip_prefix('{'))
        .and_then(|r| r.trim_end().strip_suffix('}'))
        .ok_or_else(|| LayoutError::InvalidRoom(format!("not a room header: `{line}`")))?;
    Room::new(
        room_field(rest, "length")?,
        room_field(rest, "width")?,
        room_field(rest, "height")?,
    )
}

pub fn parse_scene_file(text: &str) -> Result<SceneFile, LayoutError> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'));
    let (_, header) = lines
        .next()
        .ok_or_else(|| LayoutError::InvalidRoom("scene file is empty".into()))?;
    let room = parse_room_header(header)?;
    let body: Vec<(usize, &str)> = lines.map(|(i, l)| (i + 1, l)).collect();
    let Some((_, first)) = body.first() else {
        return Err(LayoutError::EmptyLayout);
    };
    if first.contains("center_z") {
        // keep original line numbers by padding with blank lines
        let mut padded = String::new();
        let mut at = 1;
        for (n, l) in &body {
            while at < *n {
                padded.push('\n');
                at += 1;
            }
            padded.push_str(l);
        }
        let objects = parse_scene3d_lines(&padded)?;
        Ok(SceneFile {
            room,
            body: SceneBody::Lifted(Scene3D::new(room, objects)),
        })
    } else {
        let objects = body
            .iter()
            .map(|(n, l)| parse_bev_line(l, *n))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(SceneFile {
            room,
            body: SceneBody::Bev(BevLayout::new(objects)),
        })
    }
}

pub fn serialize_scene_file(file: &SceneFile) -> Result<String, LayoutError> {
    let header = format!(
        "room {{length: {}px; width: {}px; height: {}px;}}",
        file.room.max_length, file.room.max_width, file.room.max_height
    );
    let body = match &file.body {
        SceneBody::Bev(layout) => {
            if layout.is_empty() {
                return Err(LayoutError::EmptyLayout);
            }
            serialize_bev_layout(layout)
        }
        SceneBody::Lifted(scene) => serialize_scene3d(scene)?,
    };
    Ok(format!("{header}\n{body}\n"))
}
