//! Prompt templates with `{name}` slots.
//!
//! A slot is `{` + identifier + `}`; any other brace text (JSON examples,
//! DSL samples) is literal. Substitution is single pass, so bound values
//! are never re-scanned for slots.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::GatewayError;

/// Version tag of the in-repo inference templates.
pub const TEMPLATE_VERSION: &str = "v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateId {
    CotDatagen,
    Lifting,
    QuantEval,
    SpatialEval,
    DescriptionGen,
    SimpleReward,
    BevGenerate,
    AlignmentFeedback,
    RevisionContext,
}

impl TemplateId {
    pub const ALL: [TemplateId; 9] = [
        TemplateId::CotDatagen,
        TemplateId::Lifting,
        TemplateId::QuantEval,
        TemplateId::SpatialEval,
        TemplateId::DescriptionGen,
        TemplateId::SimpleReward,
        TemplateId::BevGenerate,
        TemplateId::AlignmentFeedback,
        TemplateId::RevisionContext,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TemplateId::CotDatagen => "cot_datagen",
            TemplateId::Lifting => "lifting",
            TemplateId::QuantEval => "quant_eval",
            TemplateId::SpatialEval => "spatial_eval",
            TemplateId::DescriptionGen => "description_gen",
            TemplateId::SimpleReward => "simple_reward",
            TemplateId::BevGenerate => "bev_generate",
            TemplateId::AlignmentFeedback => "alignment_feedback",
            TemplateId::RevisionContext => "revision_context",
        }
    }

    fn raw(self) -> &'static str {
        match self {
            TemplateId::CotDatagen => include_str!("templates/cot_datagen.txt"),
            TemplateId::Lifting => include_str!("templates/lifting.txt"),
            TemplateId::QuantEval => include_str!("templates/quant_eval.txt"),
            TemplateId::SpatialEval => include_str!("templates/spatial_eval.txt"),
            TemplateId::DescriptionGen => include_str!("templates/description_gen.txt"),
            TemplateId::SimpleReward => include_str!("templates/simple_reward.txt"),
            TemplateId::BevGenerate => include_str!("templates/bev_generate.v1.txt"),
            TemplateId::AlignmentFeedback => include_str!("templates/alignment_feedback.v1.txt"),
            TemplateId::RevisionContext => include_str!("templates/revision_context.v1.txt"),
        }
    }

    pub fn template(self) -> PromptTemplate {
        let raw = self.raw();
        PromptTemplate {
            id: self,
            body: raw.strip_suffix('\n').unwrap_or(raw),
        }
    }
}

impl fmt::Display for TemplateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TemplateId {
    type Err = GatewayError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TemplateId::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| GatewayError::Config(format!("unknown template `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PromptTemplate {
    pub id: TemplateId,
    pub body: &'static str,
}

enum Piece<'a> {
    Text(&'a str),
    Slot(&'a str),
}

fn is_ident(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn pieces(body: &str) -> Vec<Piece<'_>> {
    let mut out = Vec::new();
    let mut text_start = 0;
    let mut i = 0;
    let bytes = body.as_bytes();
    while i < bytes.len() {
        if bytes[i] == b'{' {
            if let Some(rel) = body[i + 1..].find('}') {
                let name = &body[i + 1..i + 1 + rel];
                if is_ident(name) {
                    if text_start < i {
                        out.push(Piece::Text(&body[text_start..i]));
                    }
                    out.push(Piece::Slot(name));
                    i += rel + 2;
                    text_start = i;
                    continue;
                }
            }
        }
        i += 1;
    }
    if text_start < body.len() {
        out.push(Piece::Text(&body[text_start..]));
    }
    out
}

impl PromptTemplate {
    /// Distinct slot names in order of first appearance.
    pub fn placeholders(&self) -> Vec<&'static str> {
        let mut names: Vec<&'static str> = Vec::new();
        for piece in pieces(self.body) {
            if let Piece::Slot(name) = piece {
                if !names.contains(&name) {
                    names.push(name);
                }
            }
        }
        names
    }

    pub fn render(&self, bindings: &BTreeMap<&str, String>) -> Result<String, GatewayError> {
        let mut out = String::with_capacity(self.body.len() + 256);
        for piece in pieces(self.body) {
            match piece {
                Piece::Text(t) => out.push_str(t),
                Piece::Slot(name) => {
                    let value = bindings
                        .get(name)
                        .ok_or_else(|| GatewayError::UnboundPlaceholder(name.to_string()))?;
                    out.push_str(value);
                }
            }
        }
        Ok(out)
    }
}

pub fn render_prompt(id: TemplateId, bindings: &BTreeMap<&str, String>) -> Result<String, GatewayError> {
    id.template().render(bindings)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bind(pairs: &[(&'static str, &str)]) -> BTreeMap<&'static str, String> {
        pairs.iter().map(|(k, v)| (*k, v.to_string())).collect()
    }

    #[test]
    fn placeholder_sets() {
        assert_eq!(
            TemplateId::Lifting.template().placeholders(),
            vec!["max_length", "max_width", "max_height", "text_description", "bev_layout"]
        );
        assert_eq!(
            TemplateId::SpatialEval.template().placeholders(),
            vec!["scene_description", "max_length", "max_width", "bev_layout", "CoT"]
        );
        assert_eq!(
            TemplateId::CotDatagen.template().placeholders(),
            vec!["max_length", "max_width"]
        );
    }

    #[test]
    fn lifting_render() {
        let b = bind(&[
            ("max_length", "256"),
            ("max_width", "171"),
            ("max_height", "160"),
            ("text_description", "A bedroom."),
            ("bev_layout", "bed {length: 1px;}"),
        ]);
        let out = render_prompt(TemplateId::Lifting, &b).unwrap();
        assert!(out.contains("The space is 256px long"));
        assert!(out.contains("lifting a 2D layout to a 3D layout"));
        assert!(out.ends_with("BEV layout:\nbed {length: 1px;}"));
        assert_eq!(out, render_prompt(TemplateId::Lifting, &b).unwrap());
    }

    #[test]
    fn missing_binding() {
        let b = bind(&[
            ("max_length", "256"),
            ("max_width", "171"),
            ("max_height", "160"),
            ("text_description", "A bedroom."),
        ]);
        assert_eq!(
            render_prompt(TemplateId::Lifting, &b),
            Err(GatewayError::UnboundPlaceholder("bev_layout".into()))
        );
    }

    #[test]
    fn values_are_not_rescanned() {
        let b = bind(&[("max_length", "{max_width}"), ("max_width", "9")]);
        let out = render_prompt(TemplateId::CotDatagen, &b).unwrap();
        assert!(out.contains("The image is {max_width}px long and 9px wide."));
    }

    #[test]
    fn ids_round_trip() {
        for id in TemplateId::ALL {
            assert_eq!(id.name().parse::<TemplateId>().unwrap(), id);
            assert!(!id.template().body.ends_with('\n'));
        }
    }
}
