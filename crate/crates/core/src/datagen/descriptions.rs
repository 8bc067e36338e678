use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::gateway::{extract_json, DecodeParams, ModelRole, Oracle, OracleRequest};
use crate::layout::{class_key, Room, MAX_ROOM_EXTENT};
use crate::pipeline::prompts;

use super::DatagenError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Granularity {
    Coarse,
    Medium,
    Fine,
}

impl Granularity {
    fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "coarse" => Some(Granularity::Coarse),
            "medium" => Some(Granularity::Medium),
            "fine" | "fine-grained" | "fine grained" | "fine_grained" => Some(Granularity::Fine),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescriptionRecord {
    pub scene_type: String,
    pub granularity: Granularity,
    pub description: String,
    pub room: Room,
}

/// How many descriptions of each granularity every scene type gets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DescriptionQuota {
    pub num_scene_types: usize,
    pub coarse: usize,
    pub medium: usize,
    pub fine: usize,
}

impl Default for DescriptionQuota {
    fn default() -> Self {
        Self {
            num_scene_types: 1,
            coarse: 2,
            medium: 2,
            fine: 1,
        }
    }
}

impl DescriptionQuota {
    fn check(&self) -> Result<(), DatagenError> {
        if self.num_scene_types == 0 || self.coarse + self.medium + self.fine == 0 {
            return Err(DatagenError::InvalidQuota(
                "need at least one scene type and one description per type".into(),
            ));
        }
        Ok(())
    }

    fn wanted(&self, g: Granularity) -> usize {
        match g {
            Granularity::Coarse => self.coarse,
            Granularity::Medium => self.medium,
            Granularity::Fine => self.fine,
        }
    }
}

fn room_dim(size: &serde_json::Map<String, Value>, key: &str, index: usize) -> Result<u32, DatagenError> {
    let violation = |detail: String| DatagenError::RoomBoundViolation { index, detail };
    let v = size.get(key).ok_or_else(|| violation(format!("room_size lacks `{key}`")))?;
    let n = v
        .as_u64()
        .ok_or_else(|| violation(format!("room {key} {v} is not a positive integer")))?;
    if n == 0 || n > u64::from(MAX_ROOM_EXTENT) {
        return Err(violation(format!("room {key} {n} outside 1..={MAX_ROOM_EXTENT}")));
    }
    Ok(n as u32)
}

fn parse_record(index: usize, value: &Value) -> Result<DescriptionRecord, DatagenError> {
    let schema = |m: &str| DatagenError::Schema(format!("record {index}: {m}"));
    let map = value.as_object().ok_or_else(|| schema("not an object"))?;
    let text = |key: &str| {
        map.get(key)
            .and_then(Value::as_str)
            .filter(|s| !s.trim().is_empty())
            .map(str::to_string)
            .ok_or_else(|| schema(&format!("missing `{key}`")))
    };
    let scene_type = text("scene_type")?;
    let description = text("description")?;
    let granularity = Granularity::parse(&text("granularity")?)
        .ok_or_else(|| schema("granularity must be coarse, medium or fine"))?;
    let size = map
        .get("room_size")
        .and_then(Value::as_object)
        .ok_or_else(|| schema("missing `room_size` object"))?;
    let room = Room {
        max_length: room_dim(size, "length", index)?,
        max_width: room_dim(size, "width", index)?,
        max_height: room_dim(size, "height", index)?,
    };
    Ok(DescriptionRecord {
        scene_type,
        granularity,
        description,
        room,
    })
}

/// Parses the description generator's JSON array (or a reply containing it).
pub fn parse_descriptions(reply: &str) -> Result<Vec<DescriptionRecord>, DatagenError> {
    let value = extract_json(reply)?;
    let items = value
        .as_array()
        .ok_or_else(|| DatagenError::Schema("expected a list of description records".into()))?;
    items.iter().enumerate().map(|(i, v)| parse_record(i, v)).collect()
}

/// Checks the number of scene types and the per-type granularity counts.
pub fn validate_descriptions(records: &[DescriptionRecord], quota: &DescriptionQuota) -> Result<(), DatagenError> {
    quota.check()?;
    let mut types: Vec<(String, [usize; 3])> = Vec::new();
    for r in records {
        let key = class_key(&r.scene_type);
        let slot = r.granularity as usize;
        match types.iter_mut().find(|(k, _)| *k == key) {
            Some((_, counts)) => counts[slot] += 1,
            None => {
                let mut counts = [0; 3];
                counts[slot] = 1;
                types.push((key, counts));
            }
        }
    }
    for (scene_type, counts) in &types {
        for g in [Granularity::Coarse, Granularity::Medium, Granularity::Fine] {
            let (got, wanted) = (counts[g as usize], quota.wanted(g));
            if got != wanted {
                return Err(DatagenError::QuotaViolation {
                    scene_type: scene_type.clone(),
                    detail: format!("{got} {g:?} descriptions, expected {wanted}").to_lowercase(),
                });
            }
        }
    }
    if types.len() != quota.num_scene_types {
        return Err(DatagenError::QuotaViolation {
            scene_type: "*".into(),
            detail: format!("{} scene types, expected {}", types.len(), quota.num_scene_types),
        });
    }
    Ok(())
}

pub fn generate_descriptions(
    quota: &DescriptionQuota,
    oracle: &dyn Oracle,
    decode: DecodeParams,
) -> Result<Vec<DescriptionRecord>, DatagenError> {
    quota.check()?;
    let prompt = prompts::description_gen(quota.num_scene_types, quota.coarse, quota.medium, quota.fine)?;
    let request = OracleRequest::new(ModelRole::Descriptor, prompt, None, decode)?;
    let records = parse_descriptions(&oracle.complete(&request)?)?;
    validate_descriptions(&records, quota)?;
    Ok(records)
}
