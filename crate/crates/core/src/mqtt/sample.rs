//! Telemetry payload format: compact `t=<seconds> v=<value> ok=<0|1>` text.
//! The channel name travels in the topic, not the payload.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SampleError {
    #[error("bad telemetry payload: {0}")]
    BadPayload(String),
}

/// One telemetry point as carried over MQTT.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TelemetrySample {
    pub t_s: f64,
    pub channel: String,
    pub value: f64,
    pub ok: bool,
}

impl TelemetrySample {
    pub fn new(t_s: f64, channel: impl Into<String>, value: f64, ok: bool) -> Self {
        Self {
            t_s,
            channel: channel.into(),
            value,
            ok,
        }
    }

    /// Wire payload. Fixed precision: milliseconds on `t`, six decimals on
    /// `v`; values already at that precision round-trip losslessly.
    pub fn to_payload(&self) -> String {
        format!(
            "t={:.3} v={:.6} ok={}",
            self.t_s,
            self.value,
            u8::from(self.ok)
        )
    }

    /// Parse a payload received on `channel`'s topic.
    pub fn parse_payload(channel: &str, payload: &[u8]) -> Result<Self, SampleError> {
        let text = std::str::from_utf8(payload)
            .map_err(|_| SampleError::BadPayload("not UTF-8".into()))?;
        let mut t_s = None;
        let mut value = None;
        let mut ok = None;
        for field in text.split_ascii_whitespace() {
            let (key, raw) = field
                .split_once('=')
                .ok_or_else(|| SampleError::BadPayload(format!("field `{field}` has no `=`")))?;
            match key {
                "t" => {
                    t_s = Some(
                        raw.parse::<f64>()
                            .map_err(|e| SampleError::BadPayload(format!("bad t `{raw}`: {e}")))?,
                    )
                }
                "v" => {
                    value = Some(
                        raw.parse::<f64>()
                            .map_err(|e| SampleError::BadPayload(format!("bad v `{raw}`: {e}")))?,
                    )
                }
                "ok" => {
                    ok = Some(match raw {
                        "0" => false,
                        "1" => true,
                        other => return Err(SampleError::BadPayload(format!("bad ok `{other}`"))),
                    })
                }
                other => return Err(SampleError::BadPayload(format!("unknown key `{other}`"))),
            }
        }
        let missing = |name| SampleError::BadPayload(format!("missing `{name}`"));
        Ok(Self {
            t_s: t_s.ok_or_else(|| missing("t"))?,
            channel: channel.to_string(),
            value: value.ok_or_else(|| missing("v"))?,
            ok: ok.ok_or_else(|| missing("ok"))?,
        })
    }
}
