//! Group secret-key generation for a three-node wireless network.
//!
//! The library simulates the coherence-block protocols that distribute a
//! common source of randomness (including the ring-based exchange whose
//! phase-4 broadcast provably leaks nothing), estimates leakage empirically,
//! designs multi-level quantizers matched to the joint distribution of two
//! nodes' observations, and runs the excursion-based consensus that turns
//! quantized observations into shared keys.

pub mod consensus;
pub mod constellation;
pub mod leakage;
pub mod math;
pub mod protocol;
pub mod quantizer;
pub mod ring;

pub use constellation::{QamPoint, RegularQam, SourceConstellation, SourcePoint};
pub use protocol::{BlockRealization, CsrTriple, NoiseParams, ProtocolKind, ProtocolTrace};
pub use quantizer::{DesignReport, JointDistribution, MultiLevelQuantizer, QuantizedSymbol};
pub use ring::RingElement;
