//! LFSR-Toeplitz message authentication.
//!
//! The 64-bit tag is a Toeplitz-family universal hash whose columns are the
//! consecutive 64-bit windows of an LFSR bit stream, XOR-masked with a
//! one-time pad: `tag = (sum over set message bits j of column_j) ^ pad`.
//! Each 128-bit key (LFSR initial state + pad) is consumed from a pre-stored
//! pool and used exactly once per epoch.
//!
//! LFSR recurrence (primitive polynomial x^64 + x^4 + x^3 + x + 1):
//! `s[t+64] = s[t+4] ^ s[t+3] ^ s[t+1] ^ s[t]`; the register state after `t`
//! steps holds the stream window `s[t..t+64]` in bits 0..63, which is
//! exactly column `t`.

use crate::bits::Bits;
use crate::rng::{self};
use alloc::collections::BTreeSet;
use alloc::string::String;
use core::fmt;
use rand_chacha::rand_core::RngCore;

/// Tag width in bits.
pub const TAG_WIDTH: u32 = 64;
/// Key material consumed per tag: LFSR seed + one-time pad.
pub const KEY_BITS: u32 = 2 * TAG_WIDTH;

#[derive(Clone, Debug, PartialEq)]
pub enum AuthError {
    /// Single-use contract: the key id was already consumed this epoch.
    KeyReuse { key_id: u64 },
    Invalid(String),
}

impl fmt::Display for AuthError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AuthError::KeyReuse { key_id } => {
                write!(f, "authentication key {key_id} already used this epoch")
            }
            AuthError::Invalid(msg) => write!(f, "authentication: {msg}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for AuthError {}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AuthKey {
    pub key_id: u64,
    /// LFSR initial state; never zero.
    pub lfsr_init: u64,
    /// One-time pad segment.
    pub otp_pad: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AuthTag {
    pub tag: u64,
    pub key_id: u64,
}

#[inline]
fn lfsr_step(state: u64) -> u64 {
    let new = (state ^ (state >> 1) ^ (state >> 3) ^ (state >> 4)) & 1;
    (state >> 1) | (new << 63)
}

/// Tag a message with a single-use key.
pub fn lfsr_toeplitz_auth(message: &Bits, key: &AuthKey) -> Result<AuthTag, AuthError> {
    if key.lfsr_init == 0 {
        return Err(AuthError::Invalid("LFSR initial state must be nonzero".into()));
    }
    let mut state = key.lfsr_init;
    let mut acc = 0u64;
    for j in 0..message.len() {
        if message.get(j) {
            acc ^= state;
        }
        state = lfsr_step(state);
    }
    Ok(AuthTag { tag: acc ^ key.otp_pad, key_id: key.key_id })
}

/// Pre-stored authentication key pool for one epoch, refreshed from final
/// QKD keys. Keys derive deterministically from the epoch seed; consumption
/// is tracked so a key id can never tag twice within the epoch.
#[derive(Clone, Debug)]
pub struct AuthKeyStore {
    epoch_seed: u64,
    epoch: u64,
    used: BTreeSet<u64>,
    next_id: u64,
    consumed_bits: u64,
}

impl AuthKeyStore {
    pub fn new(epoch_seed: u64) -> Self {
        AuthKeyStore { epoch_seed, epoch: 0, used: BTreeSet::new(), next_id: 0, consumed_bits: 0 }
    }

    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    /// Authentication key bits consumed so far (ledger bookkeeping).
    pub fn consumed_bits(&self) -> u64 {
        self.consumed_bits
    }

    /// Advance to the next epoch with fresh key material; the used-set
    /// resets because the underlying keys are all new.
    pub fn roll_epoch(&mut self) {
        self.epoch += 1;
        self.used.clear();
        self.next_id = 0;
    }

    /// Consume the next unused key of the epoch.
    pub fn next_key(&mut self) -> Result<AuthKey, AuthError> {
        let id = self.next_id;
        self.next_id += 1;
        self.use_key(id)
    }

    /// Derive key `key_id` of the current epoch. Pure; does not consume.
    pub fn derive(&self, key_id: u64) -> AuthKey {
        let mut rng = rng::stream_rng(
            self.epoch_seed ^ 0x6b65_7973_746f_7265,
            self.epoch.wrapping_mul(0x1_0000_0001).wrapping_add(key_id),
        );
        let mut init = rng.next_u64();
        if init == 0 {
            init = 1;
        }
        AuthKey { key_id, lfsr_init: init, otp_pad: rng.next_u64() }
    }

    /// Consume a key for tagging; errors on reuse within the epoch.
    pub fn use_key(&mut self, key_id: u64) -> Result<AuthKey, AuthError> {
        if !self.used.insert(key_id) {
            return Err(AuthError::KeyReuse { key_id });
        }
        self.consumed_bits += KEY_BITS as u64;
        Ok(self.derive(key_id))
    }
}
