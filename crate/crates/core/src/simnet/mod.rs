//! Simulated sensor-to-fusion-center sessions over rate-limited links.

mod codec;
mod session;

pub use codec::{decode_index, encode_index, MessageFrame, HEADER_LEN};
pub use session::{run_session, AppliedEvent, SessionTranscript, StepRecord};
