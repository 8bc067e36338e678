//! Corpus builders: scene descriptions, chain-of-thought fine-tuning
//! records, sampled layout batches with rewards, and preference pairs.

mod descriptions;
mod pairs;
mod sampling;
mod sft;

use thiserror::Error;

use crate::gateway::GatewayError;
use crate::layout::LayoutError;
use crate::pipeline::PipelineError;
use crate::reward::RewardError;

pub use descriptions::{
    generate_descriptions, parse_descriptions, validate_descriptions, DescriptionQuota, DescriptionRecord,
    Granularity,
};
pub use pairs::{build_dpo_pairs, qualifying_pairs, read_dpo_jsonl, write_dpo_jsonl, PreferencePair};
pub use sampling::{sample_layout_batch, Sample, SampleBatch, SampleFailure, BATCH_VERSION};
pub use sft::{
    build_cot_sft_record, check_answer_matches, read_sft_jsonl, sft_record, write_sft_jsonl, SftRecord,
    SFT_VERSION,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DatagenError {
    #[error("quota violated for scene type `{scene_type}`: {detail}")]
    QuotaViolation { scene_type: String, detail: String },
    #[error("record {index}: {detail}")]
    RoomBoundViolation { index: usize, detail: String },
    #[error("invalid quota: {0}")]
    InvalidQuota(String),
    #[error("malformed record: {0}")]
    Schema(String),
    #[error("answer does not reproduce the ground truth (missing: [{}], extra: [{}])", missing.join(", "), extra.join(", "))]
    AnswerMismatch { missing: Vec<String>, extra: Vec<String> },
    #[error("a batch needs at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("only {survivors} of {requested} samples survived")]
    BatchCollapsed { survivors: usize, requested: usize },
    #[error("line {line}: {reason}")]
    InvalidLine { line: usize, reason: String },
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Layout(#[from] LayoutError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Reward(#[from] RewardError),
}
