//! Wire format of the operator bridge: one JSON object per text message,
//! discriminated by its `type` field.

use pvp_core::runner::Telemetry;
use pvp_core::HumanOverride;
use serde::{Deserialize, Serialize};
use serde_json::Value;

/// Close code for any protocol violation, including unknown message types.
pub const CLOSE_PROTOCOL: u16 = 4000;
/// Close code sent to a second client while an operator is connected.
pub const CLOSE_SINGLE_OPERATOR: u16 = 4001;
pub const SINGLE_OPERATOR_REASON: &str = "single-operator";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlFrame {
    pub takeover: bool,
    pub steer: f64,
    pub accel: f64,
    pub client_time_ms: i64,
}

impl From<ControlFrame> for HumanOverride {
    fn from(c: ControlFrame) -> Self {
        HumanOverride {
            takeover: c.takeover,
            steer: c.steer.clamp(-1.0, 1.0),
            accel: c.accel.clamp(-1.0, 1.0),
            client_time_ms: c.client_time_ms,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Inbound {
    Control(ControlFrame),
    Ping { client_time_ms: Option<i64> },
    Pong,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub code: u16,
    pub reason: String,
}

impl Violation {
    fn new(reason: impl Into<String>) -> Self {
        let mut reason = reason.into();
        // Close reasons are limited to 123 bytes.
        while reason.len() > 120 {
            reason.pop();
        }
        Violation {
            code: CLOSE_PROTOCOL,
            reason,
        }
    }
}

pub fn parse_inbound(text: &str) -> Result<Inbound, Violation> {
    let mut value: Value = serde_json::from_str(text).map_err(|e| Violation::new(format!("malformed frame: {e}")))?;
    let obj = value
        .as_object_mut()
        .ok_or_else(|| Violation::new("frame is not an object"))?;
    let kind = match obj.remove("type") {
        Some(Value::String(s)) => s,
        _ => return Err(Violation::new("frame has no type")),
    };
    match kind.as_str() {
        "control" => {
            let c: ControlFrame =
                serde_json::from_value(value).map_err(|e| Violation::new(format!("bad control frame: {e}")))?;
            if !(c.steer.is_finite() && c.accel.is_finite()) {
                return Err(Violation::new("non-finite control value"));
            }
            Ok(Inbound::Control(c))
        }
        "ping" => Ok(Inbound::Ping {
            client_time_ms: obj.get("client_time_ms").and_then(Value::as_i64),
        }),
        "pong" => Ok(Inbound::Pong),
        other => Err(Violation::new(format!("unknown type '{other}'"))),
    }
}

#[derive(Debug, Serialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Outbound<'a> {
    State(&'a Telemetry),
    Pong {
        #[serde(skip_serializing_if = "Option::is_none")]
        client_time_ms: Option<i64>,
    },
}

impl Outbound<'_> {
    pub fn to_text(&self) -> String {
        serde_json::to_string(self).expect("outbound frames always serialize")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn control_frames_parse_and_clamp() {
        let m = parse_inbound(r#"{"type":"control","takeover":true,"steer":1.5,"accel":-1,"client_time_ms":7}"#).unwrap();
        let Inbound::Control(c) = m else { panic!("{m:?}") };
        let o = HumanOverride::from(c);
        assert_eq!((o.steer, o.accel, o.client_time_ms), (1.0, -1.0, 7));
    }

    #[test]
    fn violations_carry_code_4000() {
        for text in [
            r#"{"type":"teleport"}"#,
            r#"{"takeover":true}"#,
            "not json",
            "[1,2]",
            r#"{"type":"control","takeover":true}"#,
            r#"{"type":"control","takeover":true,"steer":0,"accel":0,"client_time_ms":1,"extra":2}"#,
        ] {
            assert_eq!(parse_inbound(text).unwrap_err().code, CLOSE_PROTOCOL, "{text}");
        }
    }

    #[test]
    fn ping_echoes_time() {
        assert_eq!(
            parse_inbound(r#"{"type":"ping","client_time_ms":42}"#).unwrap(),
            Inbound::Ping { client_time_ms: Some(42) }
        );
        let pong = Outbound::Pong { client_time_ms: Some(42) }.to_text();
        assert_eq!(pong, r#"{"type":"pong","client_time_ms":42}"#);
    }

    #[test]
    fn long_reasons_are_truncated() {
        let v = parse_inbound(&format!(r#"{{"type":"{}"}}"#, "x".repeat(300))).unwrap_err();
        assert!(v.reason.len() <= 123);
    }
}
