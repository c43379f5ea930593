//! Wire layer: packet codec, framing, buffering and fault injection.

pub mod faults;
pub mod fifo;
pub mod framing;
pub mod packet;

pub use faults::{inject_faults, ExpectedCounts, FaultKind, FaultPlan, Injection};
pub use fifo::{Fifo, FifoStats, PushStatus};
pub use framing::{FrameEvent, Framer, FramerConfig, FramerStats};
pub use packet::{decode_packet, encode_packet, SyndromePacket};
