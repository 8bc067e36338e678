use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{CriterionId, RatioVector, RewardError, CRITERIA};
use crate::layout::{class_key, BevLayout};

/// Keys in an evaluator payload that are not object classes.
const RESERVED_KEYS: [&str; 4] = ["expected_counts", "suggestions", "verdicts", "explanation"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassVerdicts {
    pub class: String,
    /// Instances of this class in the layout.
    pub instances: usize,
    /// Indexed by criterion; `None` where the owning evaluator has not answered.
    pub verdicts: [Option<bool>; CRITERIA],
}

/// Class-keyed evaluator verdicts aligned to a layout's classes.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct VerdictMatrix {
    pub classes: Vec<ClassVerdicts>,
    pub expected_counts: Option<BTreeMap<String, usize>>,
    pub warnings: Vec<String>,
}

impl VerdictMatrix {
    fn for_layout(layout: &BevLayout) -> Self {
        Self {
            classes: layout
                .class_counts()
                .into_iter()
                .map(|(class, instances)| ClassVerdicts {
                    class,
                    instances,
                    verdicts: [None; CRITERIA],
                })
                .collect(),
            expected_counts: None,
            warnings: Vec::new(),
        }
    }

    pub fn class(&self, class: &str) -> Option<&ClassVerdicts> {
        let key = class_key(class);
        self.classes.iter().find(|c| c.class == key)
    }

    /// Verdict for `class` on `criterion`; unanswered counts as No.
    pub fn verdict(&self, class: &str, criterion: CriterionId) -> bool {
        self.class(class)
            .and_then(|c| c.verdicts[criterion.index()])
            .unwrap_or(false)
    }

    /// Combines the spatial and quantitative halves.
    pub fn merge(mut self, other: VerdictMatrix) -> Self {
        for theirs in other.classes {
            match self.classes.iter_mut().find(|c| c.class == theirs.class) {
                Some(ours) => {
                    for (slot, v) in ours.verdicts.iter_mut().zip(theirs.verdicts) {
                        if v.is_some() {
                            *slot = v;
                        }
                    }
                }
                None => self.classes.push(theirs),
            }
        }
        if other.expected_counts.is_some() {
            self.expected_counts = other.expected_counts;
        }
        self.warnings.extend(other.warnings);
        self
    }

    /// True when every answered verdict is Yes.
    pub fn all_yes(&self) -> bool {
        self.classes
            .iter()
            .all(|c| c.verdicts.iter().all(|v| v.unwrap_or(true)))
    }
}

fn parse_token(token: &Value, class: &str) -> Result<bool, RewardError> {
    match token.as_str().map(|s| s.trim().to_ascii_lowercase()) {
        Some(s) if s == "yes" => Ok(true),
        Some(s) if s == "no" => Ok(false),
        _ => Err(RewardError::SchemaError(format!(
            "class `{class}` has non Yes/No judgment {token}"
        ))),
    }
}

fn verdict_map(payload: &Value) -> Result<&serde_json::Map<String, Value>, RewardError> {
    let top = payload
        .as_object()
        .ok_or_else(|| RewardError::SchemaError("verdict payload must be an object".into()))?;
    match top.get("verdicts") {
        Some(Value::Object(inner)) => Ok(inner),
        Some(_) => Err(RewardError::SchemaError("`verdicts` must be an object".into())),
        None => Ok(top),
    }
}

fn parse_partial(
    payload: &Value,
    layout: &BevLayout,
    order: &[CriterionId],
) -> Result<VerdictMatrix, RewardError> {
    let mut matrix = VerdictMatrix::for_layout(layout);
    let map = verdict_map(payload)?;
    let mut seen = vec![false; matrix.classes.len()];
    for (name, value) in map {
        if RESERVED_KEYS.contains(&name.as_str()) {
            continue;
        }
        let items = value.as_array().ok_or_else(|| {
            RewardError::SchemaError(format!("class `{name}` must map to a list of judgments"))
        })?;
        if items.len() != order.len() {
            return Err(RewardError::SchemaError(format!(
                "class `{name}` has {} judgments, expected {}",
                items.len(),
                order.len()
            )));
        }
        let parsed = items
            .iter()
            .map(|t| parse_token(t, name))
            .collect::<Result<Vec<_>, _>>()?;
        let key = class_key(name);
        match matrix.classes.iter().position(|c| c.class == key) {
            Some(i) => {
                seen[i] = true;
                for (criterion, v) in order.iter().zip(parsed) {
                    matrix.classes[i].verdicts[criterion.index()] = Some(v);
                }
            }
            None => matrix
                .warnings
                .push(format!("dropped verdicts for `{name}`: class not in layout")),
        }
    }
    for (class, seen) in matrix.classes.iter_mut().zip(seen) {
        if !seen {
            matrix
                .warnings
                .push(format!("no verdicts for `{}`: defaulting to No", class.class));
            for criterion in order {
                class.verdicts[criterion.index()] = Some(false);
            }
        }
    }
    Ok(matrix)
}

pub fn parse_spatial_verdicts_value(
    payload: &Value,
    layout: &BevLayout,
) -> Result<VerdictMatrix, RewardError> {
    parse_partial(payload, layout, &CriterionId::SPATIAL_ORDER)
}

fn parse_expected_counts(value: &Value) -> Result<BTreeMap<String, usize>, RewardError> {
    let map = value
        .as_object()
        .ok_or_else(|| RewardError::SchemaError("`expected_counts` must be an object".into()))?;
    map.iter()
        .map(|(k, v)| {
            v.as_u64()
                .map(|n| (class_key(k), n as usize))
                .ok_or_else(|| {
                    RewardError::SchemaError(format!(
                        "expected count for `{k}` must be a non-negative integer"
                    ))
                })
        })
        .collect()
}

/// Quantitative verdicts. Judgment order is distance, quantity, size,
/// orientation, mapped onto C4, C7, C5, C6. An optional `expected_counts`
/// object supplies per-class counts for the quantity ratio.
pub fn parse_quant_verdicts_value(
    payload: &Value,
    layout: &BevLayout,
) -> Result<VerdictMatrix, RewardError> {
    let mut matrix = parse_partial(payload, layout, &CriterionId::QUANT_ORDER)?;
    let top = payload.as_object();
    let counts = top
        .and_then(|m| m.get("expected_counts"))
        .or_else(|| {
            top.and_then(|m| m.get("verdicts"))
                .and_then(|v| v.get("expected_counts"))
        });
    if let Some(counts) = counts {
        matrix.expected_counts = Some(parse_expected_counts(counts)?);
    }
    Ok(matrix)
}

fn json(payload: &str) -> Result<Value, RewardError> {
    serde_json::from_str(payload)
        .map_err(|e| RewardError::SchemaError(format!("verdict payload is not JSON: {e}")))
}

pub fn parse_spatial_verdicts(payload: &str, layout: &BevLayout) -> Result<VerdictMatrix, RewardError> {
    parse_spatial_verdicts_value(&json(payload)?, layout)
}

pub fn parse_quant_verdicts(payload: &str, layout: &BevLayout) -> Result<VerdictMatrix, RewardError> {
    parse_quant_verdicts_value(&json(payload)?, layout)
}

/// `r_k = O_k / N` for C1..C6, where a class verdict applies to every
/// instance of the class.
pub fn criterion_ratios(verdicts: &VerdictMatrix, layout: &BevLayout) -> Result<[f64; 6], RewardError> {
    if layout.is_empty() {
        return Err(RewardError::EmptyLayout);
    }
    let n = layout.len() as f64;
    let mut out = [0.0; 6];
    for (slot, criterion) in out.iter_mut().zip(&CriterionId::ALL[..6]) {
        let satisfied = layout
            .objects
            .iter()
            .filter(|o| verdicts.verdict(&o.label, *criterion))
            .count();
        *slot = satisfied as f64 / n;
    }
    Ok(out)
}

/// `r_7 = max(0, 1 - sum |actual - expected| / sum expected)` over the union
/// of classes.
pub fn quantity_alignment_ratio(
    expected: &BTreeMap<String, usize>,
    actual: &BTreeMap<String, usize>,
) -> Result<f64, RewardError> {
    let mut exp: BTreeMap<String, usize> = BTreeMap::new();
    for (k, v) in expected {
        *exp.entry(class_key(k)).or_default() += v;
    }
    let mut act: BTreeMap<String, usize> = BTreeMap::new();
    for (k, v) in actual {
        *act.entry(class_key(k)).or_default() += v;
    }
    let total: usize = exp.values().sum();
    if total == 0 {
        return Err(RewardError::ZeroExpectedTotal);
    }
    let mut deviation = 0usize;
    for class in exp.keys().chain(act.keys().filter(|k| !exp.contains_key(*k))) {
        let e = exp.get(class).copied().unwrap_or(0);
        let a = act.get(class).copied().unwrap_or(0);
        deviation += e.abs_diff(a);
    }
    // one division keeps fractions like 2/3 exact
    Ok(total.saturating_sub(deviation) as f64 / total as f64)
}

/// All seven ratios. Without expected counts, `r_7` falls back to the
/// fraction of layout classes judged Yes on quantity.
pub fn ratio_vector(verdicts: &VerdictMatrix, layout: &BevLayout) -> Result<RatioVector, RewardError> {
    let first = criterion_ratios(verdicts, layout)?;
    let r7 = match &verdicts.expected_counts {
        Some(expected) => {
            let actual: BTreeMap<String, usize> = layout.class_counts().into_iter().collect();
            quantity_alignment_ratio(expected, &actual)?
        }
        None => {
            let classes = layout.class_counts();
            let yes = classes
                .iter()
                .filter(|(c, _)| verdicts.verdict(c, CriterionId::C7))
                .count();
            yes as f64 / classes.len() as f64
        }
    };
    let mut all = [0.0; CRITERIA];
    all[..6].copy_from_slice(&first);
    all[6] = r7;
    RatioVector::new(all)
}

/// Convenience for tests and fixtures: `{"class": ["Yes", ...]}`.
pub fn verdict_object(entries: &[(&str, &[bool])]) -> Value {
    let map: serde_json::Map<String, Value> = entries
        .iter()
        .map(|(class, vs)| {
            let tokens = vs
                .iter()
                .map(|v| Value::String(if *v { "Yes" } else { "No" }.into()))
                .collect();
            (class.to_string(), Value::Array(tokens))
        })
        .collect();
    Value::Object(map)
}
