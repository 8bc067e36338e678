//! Chat-completion wire format. This is the only place that knows field
//! names of the remote API.
//!
//! Request (POST, `Content-Type: application/json`, optional
//! `Authorization: Bearer <key>`):
//!
//! ```json
//! {"model": "<name>",
//!  "messages": [{"role": "user", "content": "<prompt>"}],
//!  "temperature": 1.0, "max_tokens": 4096, "seed": 0}
//! ```
//!
//! With an image, `content` becomes a list:
//! `[{"type": "text", "text": "<prompt>"},
//!   {"type": "image_url", "image_url": {"url": "data:image/png;base64,<...>"}}]`.
//!
//! Response: the text at `choices[0].message.content`.

use base64::engine::general_purpose::STANDARD;
use base64::Engine as _;
use serde_json::{json, Value};

use super::{GatewayError, OracleRequest};

pub fn request_body(model: &str, request: &OracleRequest) -> Value {
    let content = match request.image() {
        Some(png) => json!([
            {"type": "text", "text": request.prompt()},
            {"type": "image_url", "image_url": {"url": format!("data:image/png;base64,{}", STANDARD.encode(png))}}
        ]),
        None => Value::String(request.prompt().to_string()),
    };
    let d = request.decode();
    json!({
        "model": model,
        "messages": [{"role": "user", "content": content}],
        "temperature": d.temperature,
        "max_tokens": d.max_tokens,
        "seed": d.seed,
    })
}

pub fn response_text(body: &str) -> Result<String, GatewayError> {
    let value: Value = serde_json::from_str(body)
        .map_err(|e| GatewayError::TransportError(format!("response is not JSON: {e}")))?;
    value
        .pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| GatewayError::TransportError("response lacks choices[0].message.content".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::{DecodeParams, ModelRole};

    #[test]
    fn text_only_body() {
        let r = OracleRequest::new(ModelRole::QuantEvaluator, "judge this", None, DecodeParams::default()).unwrap();
        let body = request_body("m", &r);
        assert_eq!(body["messages"][0]["content"], "judge this");
        assert_eq!(body["model"], "m");
        assert_eq!(body["seed"], 0);
    }

    #[test]
    fn image_body() {
        let r = OracleRequest::new(ModelRole::SpatialEvaluator, "look", Some(vec![0x89, b'P']), DecodeParams::default())
            .unwrap();
        let body = request_body("vlm", &r);
        let url = body["messages"][0]["content"][1]["image_url"]["url"].as_str().unwrap();
        assert_eq!(url, "data:image/png;base64,iVA=");
    }

    #[test]
    fn parses_choice() {
        let body = r#"{"choices":[{"message":{"role":"assistant","content":"hi"}}]}"#;
        assert_eq!(response_text(body).unwrap(), "hi");
        assert!(response_text("{}").is_err());
    }
}
