use serde::{Deserialize, Serialize};

use crate::gateway::{extract_json, DecodeParams, ModelRole, Oracle, OracleRequest};
use crate::layout::{class_key, parse_cot_value, BevLayout, CotRecord, Room};
use crate::pipeline::prompts;

use super::DatagenError;

pub const SFT_VERSION: u32 = 1;

/// One supervised fine-tuning line. `instruction` is exactly the prompt the
/// generator receives at inference time; `output` is the reply it should
/// give (the four-step JSON object); `input` is unused and empty.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SftRecord {
    pub version: u32,
    pub instruction: String,
    pub input: String,
    pub output: String,
}

fn footprint_keys(layout: &BevLayout) -> Vec<(String, i64, i64)> {
    let mut keys: Vec<_> = layout
        .objects
        .iter()
        .map(|o| (class_key(&o.label), o.length.round() as i64, o.width.round() as i64))
        .collect();
    keys.sort();
    keys
}

fn describe(key: &(String, i64, i64)) -> String {
    format!("{} {}x{}", key.0, key.1, key.2)
}

/// The answer must contain the same multiset of (label, rounded length,
/// rounded width) as the ground truth.
pub fn check_answer_matches(answer: &BevLayout, truth: &BevLayout) -> Result<(), DatagenError> {
    let mut extra = footprint_keys(answer);
    let mut missing = Vec::new();
    for key in footprint_keys(truth) {
        match extra.iter().position(|k| *k == key) {
            Some(i) => {
                extra.remove(i);
            }
            None => missing.push(describe(&key)),
        }
    }
    if missing.is_empty() && extra.is_empty() {
        Ok(())
    } else {
        Err(DatagenError::AnswerMismatch {
            missing,
            extra: extra.iter().map(describe).collect(),
        })
    }
}

/// Asks the annotation model for a description and reasoning transcript of
/// a ground-truth layout. Returns the prompt sent and the checked record.
pub fn build_cot_sft_record(
    gt: &BevLayout,
    room: &Room,
    oracle: &dyn Oracle,
    decode: DecodeParams,
) -> Result<(String, CotRecord), DatagenError> {
    if gt.is_empty() {
        return Err(crate::layout::LayoutError::EmptyLayout.into());
    }
    let prompt = prompts::cot_datagen(gt, room)?;
    let request = OracleRequest::new(ModelRole::Descriptor, prompt.clone(), None, decode)?;
    let value = extract_json(&oracle.complete(&request)?)?;
    let cot = parse_cot_value(&value)?;
    check_answer_matches(&cot.layout()?, gt)?;
    Ok((prompt, cot))
}

pub fn sft_record(cot: &CotRecord, room: &Room) -> Result<SftRecord, DatagenError> {
    Ok(SftRecord {
        version: SFT_VERSION,
        instruction: prompts::bev_generate(&cot.prompt, room)?,
        input: String::new(),
        output: cot.to_value().to_string(),
    })
}

pub fn write_sft_jsonl(records: &[SftRecord]) -> String {
    records
        .iter()
        .map(|r| serde_json::to_string(r).expect("record serializes") + "\n")
        .collect()
}

pub fn read_sft_jsonl(text: &str) -> Result<Vec<SftRecord>, DatagenError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let r: SftRecord = serde_json::from_str(l).map_err(|e| DatagenError::InvalidLine {
                line: i + 1,
                reason: e.to_string(),
            })?;
            if r.version != SFT_VERSION {
                return Err(DatagenError::InvalidLine {
                    line: i + 1,
                    reason: format!("unsupported version {}", r.version),
                });
            }
            Ok(r)
        })
        .collect()
}
