//! Bit-exact key distillation: Winnow error correction, CRC-64 error
//! verification, Toeplitz privacy amplification, and LFSR-Toeplitz
//! authentication, with leakage accounting.
//!
//! Distinct blocks are independent and may process in parallel; within a
//! block the stages run strictly in order. Transcript objects are immutable
//! once a stage completes.

pub mod auth;
pub mod crc64;
pub mod distill;
pub mod toeplitz;
pub mod transcript;
pub mod winnow;

pub use auth::{lfsr_toeplitz_auth, AuthError, AuthKey, AuthKeyStore, AuthTag, TAG_WIDTH};
pub use crc64::{crc64, crc64_bits, crc64_verify};
pub use distill::{distill, BlockLedger, DiscardReason, DistillError, DistillOutcome, DistillParams};
pub use toeplitz::{compute_pa_factor, toeplitz_pa, PaError, PaSpec};
pub use transcript::{Message, Transcript, TranscriptError};
pub use winnow::{winnow_correct, CorrectedBlock, WinnowError, WinnowOutcome};
