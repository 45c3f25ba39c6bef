//! Line codec for protocol messages.
//!
//! A message is one line of JSON: `v` first, then `type`, then the payload
//! fields in a fixed order. Floats use the shortest decimal that reads back
//! to the same value.

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::problem::ActionSpec;

pub const PROTOCOL_VERSION: u64 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Message {
    Hello {
        features: Vec<String>,
        action: ActionSpec,
    },
    Reset {
        seed: u64,
        start: NaiveDateTime,
        end: NaiveDateTime,
    },
    Obs {
        timestamp: NaiveDateTime,
        features: Vec<f64>,
        #[serde(rename = "cooling_W")]
        cooling_w: f64,
        #[serde(rename = "baseline_W")]
        baseline_w: f64,
        done: bool,
    },
    Act {
        action: Vec<f64>,
    },
    Error {
        code: String,
        message: String,
    },
    Close,
}

impl Message {
    pub fn error(code: &str, message: impl Into<String>) -> Self {
        Message::Error {
            code: code.to_string(),
            message: message.into(),
        }
    }

    pub fn type_name(&self) -> &'static str {
        match self {
            Message::Hello { .. } => "hello",
            Message::Reset { .. } => "reset",
            Message::Obs { .. } => "obs",
            Message::Act { .. } => "act",
            Message::Error { .. } => "error",
            Message::Close => "close",
        }
    }
}

/// Error codes carried by `error` messages.
pub mod code {
    pub const BAD_MESSAGE: &str = "bad_message";
    pub const BAD_VERSION: &str = "bad_version";
    pub const UNKNOWN_TYPE: &str = "unknown_type";
    pub const UNEXPECTED: &str = "unexpected_message";
    pub const NOT_RESET: &str = "not_reset";
    pub const BAD_ACTION: &str = "bad_action";
    pub const BAD_WINDOW: &str = "bad_window";
    pub const SIM_ERROR: &str = "sim_error";
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DecodeError {
    #[error("invalid JSON at column {column}: {message}")]
    Syntax { column: usize, message: String },
    #[error("message must be a JSON object")]
    NotObject,
    #[error("missing protocol version `v`")]
    MissingVersion,
    #[error("unsupported protocol version {0}")]
    Version(String),
    #[error("missing message `type`")]
    MissingType,
    #[error("unknown message type `{0}`")]
    UnknownType(String),
    #[error("bad `{kind}` message: {message}")]
    Payload { kind: String, message: String },
}

impl DecodeError {
    /// Error code a server answers with.
    pub fn code(&self) -> &'static str {
        match self {
            DecodeError::Version(_) | DecodeError::MissingVersion => code::BAD_VERSION,
            DecodeError::UnknownType(_) => code::UNKNOWN_TYPE,
            _ => code::BAD_MESSAGE,
        }
    }

    /// Whether the connection can carry on after this error.
    pub fn recoverable(&self) -> bool {
        matches!(self, DecodeError::UnknownType(_))
    }
}

const TYPES: [&str; 6] = ["hello", "reset", "obs", "act", "error", "close"];

#[derive(Serialize)]
struct Envelope<'a> {
    v: u64,
    #[serde(flatten)]
    message: &'a Message,
}

/// Canonical single-line form, without the trailing newline.
pub fn encode(message: &Message) -> String {
    serde_json::to_string(&Envelope {
        v: PROTOCOL_VERSION,
        message,
    })
    .expect("protocol messages serialize")
}

pub fn decode(line: &str) -> Result<Message, DecodeError> {
    let line = line.strip_suffix('\n').unwrap_or(line);
    let line = line.strip_suffix('\r').unwrap_or(line);
    let value: serde_json::Value = serde_json::from_str(line).map_err(|e| DecodeError::Syntax {
        column: e.column(),
        message: e.to_string(),
    })?;
    let obj = value.as_object().ok_or(DecodeError::NotObject)?;
    match obj.get("v") {
        None => return Err(DecodeError::MissingVersion),
        Some(v) if v.as_u64() == Some(PROTOCOL_VERSION) => {}
        Some(v) => return Err(DecodeError::Version(v.to_string())),
    }
    let kind = match obj.get("type") {
        None => return Err(DecodeError::MissingType),
        Some(serde_json::Value::String(t)) if TYPES.contains(&t.as_str()) => t.clone(),
        Some(serde_json::Value::String(t)) => return Err(DecodeError::UnknownType(t.clone())),
        Some(other) => return Err(DecodeError::UnknownType(other.to_string())),
    };
    serde_json::from_value(value).map_err(|e| DecodeError::Payload {
        kind,
        message: e.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;

    fn t(h: u32, m: u32) -> NaiveDateTime {
        NaiveDate::from_ymd_opt(2023, 8, 1).unwrap().and_hms_opt(h, m, 0).unwrap()
    }

    #[test]
    fn close_has_canonical_form() {
        assert_eq!(encode(&Message::Close), r#"{"v":1,"type":"close"}"#);
    }

    #[test]
    fn obs_fields_come_in_fixed_order() {
        let m = Message::Obs {
            timestamp: t(8, 10),
            features: vec![30.5, 0.1],
            cooling_w: 1234.5,
            baseline_w: 1e4,
            done: false,
        };
        assert_eq!(
            encode(&m),
            r#"{"v":1,"type":"obs","timestamp":"2023-08-01T08:10:00","features":[30.5,0.1],"cooling_W":1234.5,"baseline_W":10000.0,"done":false}"#
        );
    }

    #[test]
    fn decode_tolerates_extra_fields() {
        let m = decode(r#"{"type":"act","extra":{"x":1},"v":1,"action":[0.25]}"#).unwrap();
        assert_eq!(m, Message::Act { action: vec![0.25] });
    }

    #[test]
    fn decode_errors_are_structured() {
        assert!(matches!(decode(r#"{"v":2,"type":"close"}"#), Err(DecodeError::Version(_))));
        assert!(matches!(decode(r#"{"v":1,"type":"ping"}"#), Err(DecodeError::UnknownType(_))));
        assert!(matches!(decode(r#"{"v":1,"type":"act"}"#), Err(DecodeError::Payload { .. })));
        match decode(r#"{"v":1,"type":}"#) {
            Err(DecodeError::Syntax { column, .. }) => assert_eq!(column, 15),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn floats_round_trip_exactly() {
        for x in [0.1, 1.0 / 3.0, -2.5e-308, f64::MAX, 5e-324] {
            let m = Message::Act { action: vec![x] };
            assert_eq!(decode(&encode(&m)).unwrap(), m);
        }
    }
}
