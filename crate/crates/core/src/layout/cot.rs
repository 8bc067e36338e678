//! Four-step chain-of-thought records and a cheap reasoning/answer
//! consistency heuristic.

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::dsl::{lines_from_value, lookup};
use super::{class_key, parse_bev_layout, BevLayout, LayoutError};

pub const ENTITY_EXTRACTION: &str = "Entity Extraction";
pub const ORDER_DECISION: &str = "Order Decision";
pub const SPATIAL_REASONING: &str = "Spatial Reasoning";
pub const ANSWER_ORGANIZATION: &str = "Answer Organization";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CotRecord {
    pub prompt: String,
    pub entity_extraction: String,
    pub order_decision: String,
    pub spatial_reasoning: String,
    pub answer_organization: String,
}

impl CotRecord {
    pub fn new(
        prompt: impl Into<String>,
        entity_extraction: impl Into<String>,
        order_decision: impl Into<String>,
        spatial_reasoning: impl Into<String>,
        answer_organization: impl Into<String>,
    ) -> Result<Self, LayoutError> {
        let record = Self {
            prompt: prompt.into(),
            entity_extraction: entity_extraction.into(),
            order_decision: order_decision.into(),
            spatial_reasoning: spatial_reasoning.into(),
            answer_organization: answer_organization.into(),
        };
        for (name, field) in [
            ("prompt", &record.prompt),
            (ENTITY_EXTRACTION, &record.entity_extraction),
            (ORDER_DECISION, &record.order_decision),
            (SPATIAL_REASONING, &record.spatial_reasoning),
            (ANSWER_ORGANIZATION, &record.answer_organization),
        ] {
            if field.trim().is_empty() {
                return Err(LayoutError::MissingField(name.to_string()));
            }
        }
        record.layout()?;
        Ok(record)
    }

    /// The answer section parsed as a footprint layout.
    pub fn layout(&self) -> Result<BevLayout, LayoutError> {
        parse_bev_layout(&self.answer_organization)
            .map_err(|e| LayoutError::AnswerUnparseable(e.to_string()))
    }

    /// The reasoning steps without the prompt, in the response schema.
    pub fn response_value(&self) -> Value {
        json!({
            ENTITY_EXTRACTION: self.entity_extraction,
            ORDER_DECISION: self.order_decision,
            SPATIAL_REASONING: self.spatial_reasoning,
            ANSWER_ORGANIZATION: self.answer_organization,
        })
    }

    pub fn to_value(&self) -> Value {
        json!({ "prompt": self.prompt, "response": self.response_value() })
    }

    /// Compact plain-text rendering used as evaluator context.
    pub fn transcript(&self) -> String {
        format!(
            "{ENTITY_EXTRACTION}: {}\n{ORDER_DECISION}: {}\n{SPATIAL_REASONING}: {}\n{ANSWER_ORGANIZATION}:\n{}",
            self.entity_extraction,
            self.order_decision,
            self.spatial_reasoning,
            self.answer_organization
        )
    }
}

fn text_field(map: &serde_json::Map<String, Value>, name: &str) -> Result<String, LayoutError> {
    let value = lookup(map, name).ok_or_else(|| LayoutError::MissingField(name.to_string()))?;
    match value {
        Value::String(s) => Ok(s.clone()),
        other => Ok(other.to_string()),
    }
}

/// Reads `{"prompt": .., "response": {"Entity Extraction": .., ...}}`. The
/// step fields may also sit at the top level.
pub fn parse_cot_value(payload: &Value) -> Result<CotRecord, LayoutError> {
    let top = payload
        .as_object()
        .ok_or_else(|| LayoutError::InvalidPayload("CoT payload must be an object".into()))?;
    let steps = match lookup(top, "response") {
        Some(Value::Object(inner)) => inner,
        _ => top,
    };
    let prompt = text_field(top, "prompt")?;
    let entity = text_field(steps, ENTITY_EXTRACTION)?;
    let order = text_field(steps, ORDER_DECISION)?;
    let spatial = text_field(steps, SPATIAL_REASONING)?;
    let answer = lookup(steps, ANSWER_ORGANIZATION)
        .ok_or_else(|| LayoutError::MissingField(ANSWER_ORGANIZATION.to_string()))
        .and_then(|v| {
            lines_from_value(v, ANSWER_ORGANIZATION)
                .map_err(|e| LayoutError::AnswerUnparseable(e.to_string()))
        })?;
    for (name, field) in [
        ("prompt", &prompt),
        (ENTITY_EXTRACTION, &entity),
        (ORDER_DECISION, &order),
        (SPATIAL_REASONING, &spatial),
    ] {
        if field.trim().is_empty() {
            return Err(LayoutError::MissingField(name.to_string()));
        }
    }
    CotRecord::new(prompt, entity, order, spatial, answer)
}

pub fn parse_cot_record(payload: &str) -> Result<CotRecord, LayoutError> {
    let value: Value = serde_json::from_str(payload)
        .map_err(|e| LayoutError::InvalidPayload(format!("CoT payload is not JSON: {e}")))?;
    parse_cot_value(&value)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConsistencyFinding {
    /// A class placed in the answer that entity extraction never names.
    UnmentionedLabel(String),
    CountMismatch {
        label: String,
        expected: usize,
        got: usize,
    },
}

const NUMBER_WORDS: [&str; 13] = [
    "zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten",
    "eleven", "twelve",
];

fn count_word(word: &str) -> Option<usize> {
    let word = word.trim_matches(|c: char| !c.is_alphanumeric());
    if let Ok(n) = word.parse::<usize>() {
        return Some(n);
    }
    match word {
        "a" | "an" | "single" => None,
        w => NUMBER_WORDS.iter().position(|n| *n == w),
    }
}

/// Count stated immediately before the first word-aligned mention of `label`.
fn stated_count(entities: &str, label: &str) -> Option<usize> {
    let mut from = 0;
    while let Some(rel) = entities[from..].find(label) {
        let start = from + rel;
        let boundary = entities[..start]
            .chars()
            .next_back()
            .is_none_or(|c| !c.is_alphanumeric());
        if boundary {
            let before = entities[..start].trim_end();
            if let Some(word) = before.split_whitespace().next_back() {
                if let Some(n) = count_word(word) {
                    return Some(n);
                }
            }
        }
        from = start + label.len();
    }
    None
}

/// Flags answer classes the entity step never mentions, and explicit
/// entity counts that disagree with the answer. Findings are advisory.
pub fn check_cot_consistency(record: &CotRecord) -> Vec<ConsistencyFinding> {
    let Ok(layout) = record.layout() else {
        return Vec::new();
    };
    let entities = record.entity_extraction.to_lowercase();
    let mut findings = Vec::new();
    for (label, got) in layout.class_counts() {
        let label = class_key(&label);
        if !entities.contains(&label) {
            findings.push(ConsistencyFinding::UnmentionedLabel(label));
            continue;
        }
        if let Some(expected) = stated_count(&entities, &label) {
            if expected != got {
                findings.push(ConsistencyFinding::CountMismatch {
                    label,
                    expected,
                    got,
                });
            }
        }
    }
    findings
}
