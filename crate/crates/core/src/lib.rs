//! Multiple-short-code transmission over BPSK/AWGN with ordered statistics
//! decoding, semantic error correction, semantic list decoding and
//! confidence-guided HARQ, plus the analytical BLER tools used to evaluate
//! them.

pub mod analysis;
pub mod bp;
pub mod channel;
pub mod code;
pub mod confidence;
pub mod crc;
pub mod error;
pub mod gf2;
pub mod harq;
pub mod metrics;
pub mod osd;
pub mod pipeline;
pub mod semantic;
pub mod textcodec;

pub use channel::{SimRng, SoftObservation};
pub use code::{LinearCode, MotherCodeSchedule};
pub use error::{Error, Result};
pub use gf2::{BitVec, Gf2Matrix};
