//! Wire format, loopback transport and transcript files.

mod loopback;
mod message;
mod transcript;

pub use loopback::{open_loopback_pair, Endpoint, TransportError};
pub use message::{decode_message, encode_message, is_combiner_name, CodecError, Message};
pub use transcript::{
    decode_transcript, encode_transcript, TranscriptFile, TranscriptFileError, TRANSCRIPT_VERSION,
};
