use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::layout::{format_number, BevLayout};
use crate::reward::{CriterionId, VerdictMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aspect {
    Position,
    Size,
    Orientation,
    Height,
    Count,
}

impl Aspect {
    pub fn name(self) -> &'static str {
        match self {
            Aspect::Position => "position",
            Aspect::Size => "size",
            Aspect::Orientation => "orientation",
            Aspect::Height => "height",
            Aspect::Count => "count",
        }
    }

    /// Height suggestions go to the lifter; everything else changes the
    /// footprint layout.
    pub fn is_vertical(self) -> bool {
        self == Aspect::Height
    }
}

impl FromStr for Aspect {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "position" => Ok(Aspect::Position),
            "size" => Ok(Aspect::Size),
            "orientation" => Ok(Aspect::Orientation),
            "height" | "center_z" => Ok(Aspect::Height),
            "count" | "quantity" => Ok(Aspect::Count),
            other => Err(format!("unknown aspect `{other}`")),
        }
    }
}

/// Partial numeric record attached to a suggestion.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ProposedValues {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub length: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub width: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub height: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub center_x: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub center_y: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub center_z: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub orientation: Option<f64>,
}

impl ProposedValues {
    fn fields(&self) -> [(&'static str, Option<f64>); 7] {
        [
            ("length", self.length),
            ("width", self.width),
            ("height", self.height),
            ("center_x", self.center_x),
            ("center_y", self.center_y),
            ("center_z", self.center_z),
            ("orientation", self.orientation),
        ]
    }

    pub fn is_empty(&self) -> bool {
        self.fields().iter().all(|(_, v)| v.is_none())
    }

    fn from_value(value: &Value) -> Result<Self, String> {
        let map = value
            .as_object()
            .ok_or_else(|| "proposed_values must be an object".to_string())?;
        let mut out = Self::default();
        for (key, v) in map {
            let slot = match key.as_str() {
                "length" => &mut out.length,
                "width" => &mut out.width,
                "height" => &mut out.height,
                "center_x" => &mut out.center_x,
                "center_y" => &mut out.center_y,
                "center_z" => &mut out.center_z,
                "orientation" => &mut out.orientation,
                _ => continue,
            };
            let n = v
                .as_f64()
                .filter(|n| n.is_finite())
                .ok_or_else(|| format!("proposed `{key}` is not a number"))?;
            *slot = Some(n);
        }
        Ok(out)
    }
}

impl fmt::Display for ProposedValues {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .fields()
            .iter()
            .filter_map(|(k, v)| v.map(|v| format!("{k}: {}", format_number(v))))
            .collect();
        f.write_str(&parts.join("; "))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Suggestion {
    pub object_index: usize,
    pub label: String,
    pub criterion: CriterionId,
    pub aspect: Aspect,
    pub instruction: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub proposed_values: Option<ProposedValues>,
}

impl Suggestion {
    /// One line of revision context.
    pub fn describe(&self) -> String {
        let mut line = format!(
            "- object {} ({}), {} {}: {}",
            self.object_index,
            self.label,
            self.criterion,
            self.aspect.name(),
            self.instruction.trim()
        );
        if let Some(p) = self.proposed_values.as_ref().filter(|p| !p.is_empty()) {
            line.push_str(&format!(" [proposed {p}]"));
        }
        line
    }
}

/// Object-level suggestions collected from both evaluators in one round.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Feedback {
    pub suggestions: Vec<Suggestion>,
}

impl Feedback {
    pub fn is_empty(&self) -> bool {
        self.suggestions.is_empty()
    }

    pub fn len(&self) -> usize {
        self.suggestions.len()
    }

    /// Suggestions routed to footprint regeneration.
    pub fn footprint(&self) -> Vec<Suggestion> {
        self.suggestions.iter().filter(|s| !s.aspect.is_vertical()).cloned().collect()
    }

    /// Suggestions routed to the lifter.
    pub fn vertical(&self) -> Vec<Suggestion> {
        self.suggestions.iter().filter(|s| s.aspect.is_vertical()).cloned().collect()
    }
}

fn parse_entry(
    entry: &Value,
    layout: &BevLayout,
    verdicts: &VerdictMatrix,
    owned: &[CriterionId],
) -> Result<Option<Suggestion>, String> {
    let map = entry.as_object().ok_or("suggestion is not an object")?;
    let index = map
        .get("object_index")
        .and_then(Value::as_u64)
        .ok_or("missing object_index")? as usize;
    let object = layout
        .objects
        .get(index)
        .ok_or_else(|| format!("object_index {index} out of range"))?;
    let criterion: CriterionId = map
        .get("criterion")
        .and_then(Value::as_str)
        .ok_or("missing criterion")?
        .trim()
        .to_ascii_uppercase()
        .parse()
        .map_err(|_| "unknown criterion".to_string())?;
    if !owned.contains(&criterion) {
        return Err(format!("criterion {criterion} belongs to the other evaluator"));
    }
    let aspect: Aspect = map.get("aspect").and_then(Value::as_str).ok_or("missing aspect")?.parse()?;
    let instruction = map
        .get("instruction")
        .and_then(Value::as_str)
        .unwrap_or_default()
        .to_string();
    let proposed_values = match map.get("proposed_values") {
        None | Some(Value::Null) => None,
        Some(v) => Some(ProposedValues::from_value(v)?).filter(|p| !p.is_empty()),
    };
    if verdicts.verdict(&object.label, criterion) {
        return Ok(None);
    }
    Ok(Some(Suggestion {
        object_index: index,
        label: object.label.clone(),
        criterion,
        aspect,
        instruction,
        proposed_values,
    }))
}

/// Reads the `suggestions` list of an alignment-mode evaluator reply,
/// keeping only entries on criteria judged No for the object's class.
/// Unusable entries are dropped with a warning.
pub(crate) fn parse_suggestions(
    payload: &Value,
    layout: &BevLayout,
    verdicts: &VerdictMatrix,
    owned: &[CriterionId],
    warnings: &mut Vec<String>,
) -> Vec<Suggestion> {
    let Some(list) = payload.get("suggestions") else {
        return Vec::new();
    };
    let Some(items) = list.as_array() else {
        warnings.push("`suggestions` is not a list; ignored".into());
        return Vec::new();
    };
    let mut out = Vec::new();
    for (i, entry) in items.iter().enumerate() {
        match parse_entry(entry, layout, verdicts, owned) {
            Ok(Some(s)) => out.push(s),
            Ok(None) => warnings.push(format!("suggestion {i} targets a criterion judged Yes; dropped")),
            Err(reason) => warnings.push(format!("suggestion {i} dropped: {reason}")),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use serde_json::json;

    use super::*;
    use crate::layout::parse_bev_layout;
    use crate::reward::{parse_quant_verdicts_value, CriterionId};

    fn layout() -> BevLayout {
        parse_bev_layout(
            "desk {length: 60px; width: 30px; center_x: 50px; center_y: 20px; orientation: 0 degrees;}\n\
             chair {length: 20px; width: 20px; center_x: 50px; center_y: 45px; orientation: 180 degrees;}",
        )
        .unwrap()
    }

    #[test]
    fn keeps_only_no_criteria() {
        let payload = json!({
            "verdicts": {"desk": ["Yes", "Yes", "No", "Yes"], "chair": ["Yes", "Yes", "Yes", "Yes"]},
            "suggestions": [
                {"object_index": 0, "criterion": "C5", "aspect": "size", "instruction": "shorter desk", "proposed_values": {"length": 48}},
                {"object_index": 1, "criterion": "C6", "aspect": "orientation", "instruction": "turn"},
                {"object_index": 7, "criterion": "C5", "aspect": "size", "instruction": "?"},
                {"object_index": 0, "criterion": "C1", "aspect": "position", "instruction": "wrong owner"}
            ]
        });
        let l = layout();
        let v = parse_quant_verdicts_value(&payload, &l).unwrap();
        let mut warnings = Vec::new();
        let s = parse_suggestions(&payload, &l, &v, &CriterionId::QUANT_ORDER, &mut warnings);
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].label, "desk");
        assert_eq!(s[0].criterion, CriterionId::C5);
        assert_eq!(s[0].aspect, Aspect::Size);
        assert_eq!(s[0].proposed_values.as_ref().unwrap().length, Some(48.0));
        assert_eq!(warnings.len(), 3);
        assert_eq!(
            s[0].describe(),
            "- object 0 (desk), C5 size: shorter desk [proposed length: 48]"
        );
    }

    #[test]
    fn routing() {
        let mk = |aspect| Suggestion {
            object_index: 0,
            label: "lamp".into(),
            criterion: CriterionId::C4,
            aspect,
            instruction: String::new(),
            proposed_values: None,
        };
        let f = Feedback {
            suggestions: vec![mk(Aspect::Height), mk(Aspect::Position), mk(Aspect::Count)],
        };
        assert_eq!(f.vertical().len(), 1);
        assert_eq!(f.footprint().len(), 2);
    }
}
