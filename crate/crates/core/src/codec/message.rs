//! Canonical newline-delimited JSON encoding of protocol messages.
//!
//! Every message is one JSON object on one line: `"type"` first, `"session"`
//! second, then the remaining fields in declaration order, with no
//! insignificant whitespace and a single trailing `\n`.

use serde_json::{Map, Value};
use thiserror::Error;

use crate::domain::{is_token, FactForm, Magnitude};
use crate::protocol::{ProtocolMode, SessionStatus};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodecError {
    #[error("unknown message type {0:?}")]
    UnknownType(String),
    #[error("missing field {0:?}")]
    MissingField(&'static str),
    #[error("field {0:?} has the wrong type or an invalid value")]
    TypeMismatch(&'static str),
    #[error("unexpected bytes after the message at offset {0}")]
    TrailingGarbage(usize),
    #[error("not a JSON object: {0}")]
    InvalidJson(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Message {
    Hello {
        session_id: String,
        user_id: String,
        mode: ProtocolMode,
        i_threshold: u64,
        j_threshold: u64,
        r_max: u64,
        /// Wire name of the combiner, see [`crate::comparison::Combiner::wire_name`].
        combiner: String,
    },
    HelloAck {
        session_id: String,
        user_id: String,
    },
    Fact {
        session_id: String,
        round: u64,
        form: FactForm,
        fact_id: String,
        domain_id: String,
        label: String,
        magnitude: Magnitude,
    },
    RoundResult {
        session_id: String,
        round: u64,
        matched: bool,
        c_i: u64,
        c_j: u64,
    },
    Final {
        session_id: String,
        status: SessionStatus,
        c_i: u64,
        c_j: u64,
        rounds: u64,
    },
}

impl Message {
    pub fn kind(&self) -> &'static str {
        match self {
            Message::Hello { .. } => "HELLO",
            Message::HelloAck { .. } => "HELLO_ACK",
            Message::Fact { .. } => "FACT",
            Message::RoundResult { .. } => "ROUND_RESULT",
            Message::Final { .. } => "FINAL",
        }
    }

    pub fn session_id(&self) -> &str {
        match self {
            Message::Hello { session_id, .. }
            | Message::HelloAck { session_id, .. }
            | Message::Fact { session_id, .. }
            | Message::RoundResult { session_id, .. }
            | Message::Final { session_id, .. } => session_id,
        }
    }

    pub fn fact(session_id: &str, round: u64, fact: &crate::domain::Fact) -> Message {
        Message::Fact {
            session_id: session_id.to_owned(),
            round,
            form: fact.form,
            fact_id: fact.fact_id.clone(),
            domain_id: fact.domain_id.clone(),
            label: fact.label.clone(),
            magnitude: fact.magnitude,
        }
    }
}

/// Valid wire names are `DIFFERENCE`, `SUM` and `MAP_THEN_DIFFERENCE:<mapping id>`.
pub fn is_combiner_name(s: &str) -> bool {
    match s.strip_prefix("MAP_THEN_DIFFERENCE:") {
        Some(id) => is_token(id),
        None => s == "DIFFERENCE" || s == "SUM",
    }
}

pub(crate) struct LineWriter {
    buf: String,
}

impl LineWriter {
    pub(crate) fn new(kind: &str) -> Self {
        let mut w = LineWriter {
            buf: String::from("{"),
        };
        w.str("type", kind);
        w
    }

    fn key(&mut self, key: &str) {
        if self.buf.len() > 1 {
            self.buf.push(',');
        }
        self.buf.push('"');
        self.buf.push_str(key);
        self.buf.push_str("\":");
    }

    pub(crate) fn str(&mut self, key: &str, value: &str) -> &mut Self {
        self.key(key);
        // serializing a str cannot fail
        self.buf
            .push_str(&serde_json::to_string(value).expect("string serialization"));
        self
    }

    pub(crate) fn uint(&mut self, key: &str, value: u64) -> &mut Self {
        self.key(key);
        self.buf.push_str(&value.to_string());
        self
    }

    pub(crate) fn int(&mut self, key: &str, value: i64) -> &mut Self {
        self.key(key);
        self.buf.push_str(&value.to_string());
        self
    }

    pub(crate) fn bool(&mut self, key: &str, value: bool) -> &mut Self {
        self.key(key);
        self.buf.push_str(if value { "true" } else { "false" });
        self
    }

    pub(crate) fn finish(&mut self) -> Vec<u8> {
        let mut line = std::mem::take(&mut self.buf);
        line.push_str("}\n");
        line.into_bytes()
    }
}

pub fn encode_message(msg: &Message) -> Vec<u8> {
    let mut w = LineWriter::new(msg.kind());
    w.str("session", msg.session_id());
    match msg {
        Message::Hello {
            user_id,
            mode,
            i_threshold,
            j_threshold,
            r_max,
            combiner,
            ..
        } => w
            .str("user_id", user_id)
            .str("mode", mode.as_str())
            .uint("i_threshold", *i_threshold)
            .uint("j_threshold", *j_threshold)
            .uint("r_max", *r_max)
            .str("combiner", combiner),
        Message::HelloAck { user_id, .. } => w.str("user_id", user_id),
        Message::Fact {
            round,
            form,
            fact_id,
            domain_id,
            label,
            magnitude,
            ..
        } => w
            .uint("round", *round)
            .str("form", form.as_str())
            .str("fact_id", fact_id)
            .str("domain_id", domain_id)
            .str("label", label)
            .int("magnitude", magnitude.value()),
        Message::RoundResult {
            round,
            matched,
            c_i,
            c_j,
            ..
        } => w
            .uint("round", *round)
            .bool("matched", *matched)
            .uint("c_i", *c_i)
            .uint("c_j", *c_j),
        Message::Final {
            status,
            c_i,
            c_j,
            rounds,
            ..
        } => w
            .str("status", status.as_str())
            .uint("c_i", *c_i)
            .uint("c_j", *c_j)
            .uint("rounds", *rounds),
    };
    w.finish()
}

/// Parses one line (with or without its trailing newline) into a JSON object.
pub(crate) fn parse_object(line: &[u8]) -> Result<Map<String, Value>, CodecError> {
    let body = line.strip_suffix(b"\n").unwrap_or(line);
    let mut stream = serde_json::Deserializer::from_slice(body).into_iter::<Value>();
    let value = match stream.next() {
        Some(Ok(v)) => v,
        Some(Err(e)) => return Err(CodecError::InvalidJson(e.to_string())),
        None => return Err(CodecError::InvalidJson("empty line".into())),
    };
    let offset = stream.byte_offset();
    if offset != body.len() {
        return Err(CodecError::TrailingGarbage(offset));
    }
    match value {
        Value::Object(map) => Ok(map),
        other => Err(CodecError::InvalidJson(format!(
            "expected an object, found {other}"
        ))),
    }
}

pub(crate) struct Fields<'a>(pub(crate) &'a Map<String, Value>);

impl Fields<'_> {
    fn get(&self, key: &'static str) -> Result<&Value, CodecError> {
        self.0.get(key).ok_or(CodecError::MissingField(key))
    }

    pub(crate) fn str(&self, key: &'static str) -> Result<&str, CodecError> {
        self.get(key)?.as_str().ok_or(CodecError::TypeMismatch(key))
    }

    pub(crate) fn token(&self, key: &'static str) -> Result<String, CodecError> {
        let s = self.str(key)?;
        if is_token(s) {
            Ok(s.to_owned())
        } else {
            Err(CodecError::TypeMismatch(key))
        }
    }

    pub(crate) fn uint(&self, key: &'static str) -> Result<u64, CodecError> {
        self.get(key)?.as_u64().ok_or(CodecError::TypeMismatch(key))
    }

    fn bool(&self, key: &'static str) -> Result<bool, CodecError> {
        self.get(key)?
            .as_bool()
            .ok_or(CodecError::TypeMismatch(key))
    }

    fn magnitude(&self, key: &'static str) -> Result<Magnitude, CodecError> {
        self.get(key)?
            .as_i64()
            .and_then(|v| Magnitude::new(v).ok())
            .ok_or(CodecError::TypeMismatch(key))
    }

    fn parsed<T>(
        &self,
        key: &'static str,
        parse: impl Fn(&str) -> Option<T>,
    ) -> Result<T, CodecError> {
        parse(self.str(key)?).ok_or(CodecError::TypeMismatch(key))
    }
}

pub fn decode_message(line: &[u8]) -> Result<Message, CodecError> {
    let map = parse_object(line)?;
    let f = Fields(&map);
    let kind = f.str("type")?;
    let msg = match kind {
        "HELLO" => Message::Hello {
            session_id: f.token("session")?,
            user_id: f.token("user_id")?,
            mode: f.parsed("mode", ProtocolMode::parse)?,
            i_threshold: f.uint("i_threshold")?,
            j_threshold: f.uint("j_threshold")?,
            r_max: f.uint("r_max")?,
            combiner: f.parsed("combiner", |s| is_combiner_name(s).then(|| s.to_owned()))?,
        },
        "HELLO_ACK" => Message::HelloAck {
            session_id: f.token("session")?,
            user_id: f.token("user_id")?,
        },
        "FACT" => Message::Fact {
            session_id: f.token("session")?,
            round: f.uint("round")?,
            form: f.parsed("form", |s| match s {
                "QUESTION" => Some(FactForm::Question),
                "ANSWER" => Some(FactForm::Answer),
                _ => None,
            })?,
            fact_id: f.token("fact_id")?,
            domain_id: f.token("domain_id")?,
            label: f.str("label")?.to_owned(),
            magnitude: f.magnitude("magnitude")?,
        },
        "ROUND_RESULT" => Message::RoundResult {
            session_id: f.token("session")?,
            round: f.uint("round")?,
            matched: f.bool("matched")?,
            c_i: f.uint("c_i")?,
            c_j: f.uint("c_j")?,
        },
        "FINAL" => Message::Final {
            session_id: f.token("session")?,
            status: f.parsed("status", SessionStatus::parse)?,
            c_i: f.uint("c_i")?,
            c_j: f.uint("c_j")?,
            rounds: f.uint("rounds")?,
        },
        other => return Err(CodecError::UnknownType(other.to_owned())),
    };
    Ok(msg)
}
