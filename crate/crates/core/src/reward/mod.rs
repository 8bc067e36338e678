//! Object-level evaluator verdicts turned into per-criterion validity ratios,
//! entropy-weighted across a prompt's samples into one scalar reward each.

mod verdicts;
mod weights;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use verdicts::{
    criterion_ratios, parse_quant_verdicts, parse_quant_verdicts_value, parse_spatial_verdicts,
    parse_spatial_verdicts_value, quantity_alignment_ratio, ratio_vector, verdict_object,
    ClassVerdicts, VerdictMatrix,
};
pub use weights::{
    aggregate_rewards, entropy_weights, reward_report, uniform_weights, EntropyWeights,
    RewardReport,
};

pub const CRITERIA: usize = 7;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RewardError {
    #[error("verdict schema error: {0}")]
    SchemaError(String),
    #[error("layout contains no objects")]
    EmptyLayout,
    #[error("expected counts sum to zero")]
    ZeroExpectedTotal,
    #[error("entropy weighting needs at least two samples")]
    SingleSample,
    #[error("no samples")]
    NoSamples,
    #[error("weights must be non-negative and sum to 1, got sum {0}")]
    WeightSumError(f64),
    #[error("ratio {value} for {criterion} outside [0, 1]")]
    RatioOutOfRange { criterion: CriterionId, value: f64 },
}

/// The seven object-level criteria. C1-C3 belong to the spatial evaluator,
/// C4-C7 to the quantitative evaluator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CriterionId {
    /// Relative alignment with related objects.
    C1,
    /// Global position within the room.
    C2,
    /// Consistency with the chain of thought.
    C3,
    /// Inter-object distance.
    C4,
    /// Size proportion.
    C5,
    /// Orientation validity.
    C6,
    /// Quantity alignment.
    C7,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Evaluator {
    Spatial,
    Quantitative,
}

impl CriterionId {
    pub const ALL: [CriterionId; CRITERIA] = [
        CriterionId::C1,
        CriterionId::C2,
        CriterionId::C3,
        CriterionId::C4,
        CriterionId::C5,
        CriterionId::C6,
        CriterionId::C7,
    ];

    /// Order of the spatial evaluator's three judgments.
    pub const SPATIAL_ORDER: [CriterionId; 3] = [CriterionId::C1, CriterionId::C2, CriterionId::C3];

    /// Order of the quantitative evaluator's four judgments: distance,
    /// quantity, size, orientation.
    pub const QUANT_ORDER: [CriterionId; 4] = [
        CriterionId::C4,
        CriterionId::C7,
        CriterionId::C5,
        CriterionId::C6,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn owner(self) -> Evaluator {
        match self {
            CriterionId::C1 | CriterionId::C2 | CriterionId::C3 => Evaluator::Spatial,
            _ => Evaluator::Quantitative,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            CriterionId::C1 => "relative alignment",
            CriterionId::C2 => "global positioning",
            CriterionId::C3 => "consistency with CoT",
            CriterionId::C4 => "inter-object distance",
            CriterionId::C5 => "size proportion",
            CriterionId::C6 => "orientation validity",
            CriterionId::C7 => "quantity alignment",
        }
    }
}

impl fmt::Display for CriterionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "C{}", self.index() + 1)
    }
}

impl FromStr for CriterionId {
    type Err = RewardError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        let digits = t.strip_prefix(['C', 'c']).unwrap_or(t);
        match digits.parse::<usize>() {
            Ok(n @ 1..=7) => Ok(CriterionId::ALL[n - 1]),
            _ => Err(RewardError::SchemaError(format!("unknown criterion `{s}`"))),
        }
    }
}

/// Validity ratios `r_1..r_7`, each in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; CRITERIA]", into = "[f64; CRITERIA]")]
pub struct RatioVector([f64; CRITERIA]);

impl RatioVector {
    pub fn new(values: [f64; CRITERIA]) -> Result<Self, RewardError> {
        for (criterion, &value) in CriterionId::ALL.iter().zip(values.iter()) {
            if !(0.0..=1.0).contains(&value) {
                return Err(RewardError::RatioOutOfRange {
                    criterion: *criterion,
                    value,
                });
            }
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64; CRITERIA] {
        &self.0
    }

    pub fn get(&self, criterion: CriterionId) -> f64 {
        self.0[criterion.index()]
    }
}

impl TryFrom<[f64; CRITERIA]> for RatioVector {
    type Error = RewardError;

    fn try_from(values: [f64; CRITERIA]) -> Result<Self, Self::Error> {
        Self::new(values)
    }
}

impl From<RatioVector> for [f64; CRITERIA] {
    fn from(r: RatioVector) -> Self {
        r.0
    }
}
