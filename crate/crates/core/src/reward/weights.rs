use serde::{Deserialize, Serialize};

use super::{RatioVector, RewardError, CRITERIA};

/// Entropy within this distance of 1 is treated as exactly 1, so rounding
/// noise on a constant criterion cannot attract all the weight.
const ENTROPY_SNAP: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyWeights {
    pub entropies: [f64; CRITERIA],
    pub weights: [f64; CRITERIA],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardReport {
    pub ratios: Vec<RatioVector>,
    pub entropies: [f64; CRITERIA],
    pub weights: [f64; CRITERIA],
    pub rewards: Vec<f64>,
}

pub fn uniform_weights() -> [f64; CRITERIA] {
    [1.0 / CRITERIA as f64; CRITERIA]
}

/// Normalized entropy of each criterion across `T >= 2` samples and the
/// derived weights `w_k = (1 - H_k) / sum (1 - H_k)`.
///
/// A criterion whose ratios are all zero gets `H_k = 1`. When every
/// criterion is uninformative the weights fall back to uniform.
pub fn entropy_weights(ratios: &[RatioVector]) -> Result<EntropyWeights, RewardError> {
    let t = ratios.len();
    match t {
        0 => return Err(RewardError::NoSamples),
        1 => return Err(RewardError::SingleSample),
        _ => {}
    }
    let ln_t = (t as f64).ln();
    let mut entropies = [1.0; CRITERIA];
    for (k, entropy) in entropies.iter_mut().enumerate() {
        let total: f64 = ratios.iter().map(|r| r.values()[k]).sum();
        if total <= 0.0 {
            continue;
        }
        let sum: f64 = ratios
            .iter()
            .map(|r| r.values()[k] / total)
            .filter(|&p| p > 0.0)
            .map(|p| p * p.ln())
            .sum();
        let h = (-sum / ln_t).clamp(0.0, 1.0);
        *entropy = if 1.0 - h < ENTROPY_SNAP { 1.0 } else { h };
    }
    let divergence: f64 = entropies.iter().map(|h| 1.0 - h).sum();
    let weights = if divergence <= 0.0 {
        uniform_weights()
    } else {
        entropies.map(|h| (1.0 - h) / divergence)
    };
    Ok(EntropyWeights { entropies, weights })
}

/// `R_j = sum_k w_k r_k^(j)`, clamped into `[0, 1]` against rounding.
pub fn aggregate_rewards(ratios: &[RatioVector], weights: &[f64; CRITERIA]) -> Result<Vec<f64>, RewardError> {
    let sum: f64 = weights.iter().sum();
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) || (sum - 1.0).abs() > 1e-6 {
        return Err(RewardError::WeightSumError(sum));
    }
    Ok(ratios
        .iter()
        .map(|r| {
            r.values()
                .iter()
                .zip(weights)
                .map(|(r, w)| r * w)
                .sum::<f64>()
                .clamp(0.0, 1.0)
        })
        .collect())
}

/// Weights from this batch alone, then per-sample rewards.
pub fn reward_report(ratios: &[RatioVector]) -> Result<RewardReport, RewardError> {
    let EntropyWeights { entropies, weights } = entropy_weights(ratios)?;
    let rewards = aggregate_rewards(ratios, &weights)?;
    Ok(RewardReport {
        ratios: ratios.to_vec(),
        entropies,
        weights,
        rewards,
    })
}
