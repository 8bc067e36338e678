use serde::{Deserialize, Serialize};

use crate::pipeline::prompts;

use super::{DatagenError, SampleBatch};

/// A preference pair; `chosen` and `rejected` are generator replies in the
/// four-step JSON schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferencePair {
    pub prompt: String,
    pub chosen: String,
    pub rejected: String,
    pub reward_chosen: f64,
    pub reward_rejected: f64,
}

/// All ordered `(i, j)` with `rewards[i] - rewards[j] > threshold`, in
/// lexicographic order.
pub fn qualifying_pairs(rewards: &[f64], threshold: f64) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for (i, ri) in rewards.iter().enumerate() {
        for (j, rj) in rewards.iter().enumerate() {
            if i != j && ri - rj > threshold {
                out.push((i, j));
            }
        }
    }
    out
}

/// Pairs from one batch, rewards weighted by that batch alone. With `cap`,
/// only the widest-margin pairs are kept (ties broken by index order).
pub fn build_dpo_pairs(batch: &SampleBatch, threshold: f64, cap: Option<usize>) -> Vec<PreferencePair> {
    let report = match batch.reward_report() {
        Ok(r) => r,
        Err(e) => {
            log::warn!("batch {}: no rewards ({e}); no pairs", batch.prompt_id);
            return Vec::new();
        }
    };
    let rewards = &report.rewards;
    let mut pairs = qualifying_pairs(rewards, threshold);
    if let Some(cap) = cap {
        pairs.sort_by(|a, b| {
            let (ma, mb) = (rewards[a.0] - rewards[a.1], rewards[b.0] - rewards[b.1]);
            mb.total_cmp(&ma).then(a.cmp(b))
        });
        pairs.truncate(cap);
        pairs.sort();
    }
    let prompt = prompts::bev_generate(&batch.description, &batch.room)
        .unwrap_or_else(|_| batch.description.clone());
    pairs
        .into_iter()
        .map(|(i, j)| PreferencePair {
            prompt: prompt.clone(),
            chosen: batch.samples[i].cot.to_value().to_string(),
            rejected: batch.samples[j].cot.to_value().to_string(),
            reward_chosen: rewards[i],
            reward_rejected: rewards[j],
        })
        .collect()
}

pub fn write_dpo_jsonl(pairs: &[PreferencePair]) -> String {
    pairs
        .iter()
        .map(|p| serde_json::to_string(p).expect("pair serializes") + "\n")
        .collect()
}

/// Reads pairs back, rejecting any line whose rewards do not clear
/// `threshold`.
pub fn read_dpo_jsonl(text: &str, threshold: f64) -> Result<Vec<PreferencePair>, DatagenError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let invalid = |reason: String| DatagenError::InvalidLine { line: i + 1, reason };
        let pair: PreferencePair = serde_json::from_str(line).map_err(|e| invalid(e.to_string()))?;
        let margin = pair.reward_chosen - pair.reward_rejected;
        if margin.is_nan() || margin <= threshold {
            return Err(invalid(format!(
                "reward margin {margin} does not exceed {threshold}"
            )));
        }
        out.push(pair);
    }
    Ok(out)
}
