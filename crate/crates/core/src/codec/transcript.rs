//! Transcript files: a `TRANSCRIPT` header line followed by every message of
//! one session in order, one encoded message per line.

use thiserror::Error;

use super::message::{
    decode_message, encode_message, parse_object, CodecError, Fields, LineWriter, Message,
};

pub const TRANSCRIPT_VERSION: u64 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {error}")]
pub struct TranscriptFileError {
    /// 1-based line number.
    pub line: usize,
    pub error: CodecError,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TranscriptFile {
    pub session_id: String,
    pub messages: Vec<Message>,
}

pub fn encode_transcript(session_id: &str, messages: &[Message]) -> Vec<u8> {
    let mut out = LineWriter::new("TRANSCRIPT")
        .uint("version", TRANSCRIPT_VERSION)
        .str("session", session_id)
        .finish();
    for m in messages {
        out.extend_from_slice(&encode_message(m));
    }
    out
}

pub fn decode_transcript(bytes: &[u8]) -> Result<TranscriptFile, TranscriptFileError> {
    let mut lines = bytes.split_inclusive(|b| *b == b'\n').enumerate();
    let at = |line: usize| {
        move |error| TranscriptFileError {
            line: line + 1,
            error,
        }
    };
    let (_, header) = lines.next().ok_or(TranscriptFileError {
        line: 1,
        error: CodecError::InvalidJson("empty transcript".into()),
    })?;
    let session_id = parse_header(header).map_err(at(0))?;
    let messages = lines
        .map(|(n, line)| decode_message(line).map_err(at(n)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(TranscriptFile {
        session_id,
        messages,
    })
}

fn parse_header(line: &[u8]) -> Result<String, CodecError> {
    let map = parse_object(line)?;
    let f = Fields(&map);
    match f.str("type")? {
        "TRANSCRIPT" => {}
        other => return Err(CodecError::UnknownType(other.to_owned())),
    }
    if f.uint("version")? != TRANSCRIPT_VERSION {
        return Err(CodecError::TypeMismatch("version"));
    }
    f.token("session")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::SessionStatus;

    fn msgs() -> Vec<Message> {
        vec![
            Message::HelloAck {
                session_id: "s1".into(),
                user_id: "mary".into(),
            },
            Message::Final {
                session_id: "s1".into(),
                status: SessionStatus::Done,
                c_i: 4,
                c_j: 4,
                rounds: 4,
            },
        ]
    }

    #[test]
    fn header_line_is_canonical() {
        let bytes = encode_transcript("s1", &msgs());
        let text = String::from_utf8(bytes.clone()).unwrap();
        assert!(text.starts_with("{\"type\":\"TRANSCRIPT\",\"version\":1,\"session\":\"s1\"}\n"));
        assert_eq!(text.lines().count(), 3);
        assert_eq!(
            decode_transcript(&bytes).unwrap(),
            TranscriptFile {
                session_id: "s1".into(),
                messages: msgs()
            }
        );
    }

    #[test]
    fn errors_carry_line_numbers() {
        assert_eq!(decode_transcript(b"").unwrap_err().line, 1);
        let mut bytes = encode_transcript("s1", &msgs());
        bytes.extend_from_slice(b"{\"type\":\"NOPE\"}\n");
        let err = decode_transcript(&bytes).unwrap_err();
        assert_eq!(err.line, 4);
        assert_eq!(err.error, CodecError::UnknownType("NOPE".into()));
        let v2 = b"{\"type\":\"TRANSCRIPT\",\"version\":2,\"session\":\"s1\"}\n";
        assert_eq!(
            decode_transcript(v2).unwrap_err().error,
            CodecError::TypeMismatch("version")
        );
    }
}
