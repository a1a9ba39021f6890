//! End-to-end key distillation for one block: authenticated framing, Winnow
//! error correction, CRC-64 error verification, PA-factor computation, and
//! Toeplitz privacy amplification, with a per-block ledger.

use crate::bits::Bits;
use crate::keyrate::DecoyParams;
use crate::postproc::auth::{lfsr_toeplitz_auth, AuthError, AuthKeyStore};
use crate::postproc::crc64::crc64_verify;
use crate::postproc::toeplitz::{compute_pa_factor, toeplitz_pa, PaSpec};
use crate::postproc::transcript::{kind, Transcript};
use crate::postproc::winnow::{winnow_correct, WinnowError};
use crate::rng::{self};
use alloc::string::String;
use core::fmt;
use rand_chacha::rand_core::RngCore;

#[derive(Clone, Debug, PartialEq)]
pub enum DistillError {
    /// Block shorter than the protocol's parameter-estimation size.
    InsufficientBlock { have: usize, need: u64 },
    /// Authentication failure aborts the session (not just the block).
    Auth(AuthError),
    Invalid(String),
}

impl fmt::Display for DistillError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DistillError::InsufficientBlock { have, need } => {
                write!(f, "sifted block of {have} bits is below the {need}-bit block size")
            }
            DistillError::Auth(e) => write!(f, "{e}"),
            DistillError::Invalid(msg) => write!(f, "distill: {msg}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for DistillError {}

impl From<AuthError> for DistillError {
    fn from(e: AuthError) -> Self {
        DistillError::Auth(e)
    }
}

/// Why a block produced no key.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DiscardReason {
    /// Measured QBER above the redundancy-control cap.
    QberCap,
    /// Winnow hit its round cap.
    EcNonConvergence,
    /// CRC-64 digests disagreed after correction.
    VerifyFailed,
    /// PA factor reached zero (no extractable key).
    NoKey,
}

impl fmt::Display for DiscardReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DiscardReason::QberCap => "qber-cap",
            DiscardReason::EcNonConvergence => "ec-nonconvergence",
            DiscardReason::VerifyFailed => "verify-failed",
            DiscardReason::NoKey => "no-key",
        })
    }
}

/// Per-block accounting.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockLedger {
    pub input_bits: usize,
    pub qber_measured: f64,
    pub leaked_bits: u64,
    pub ec_rounds: u32,
    pub pa_factor: f64,
    pub final_bits: usize,
    pub auth_bits_consumed: u64,
    pub verified: bool,
}

#[derive(Clone, Debug)]
pub enum DistillOutcome {
    Keys { alice: Bits, bob: Bits, ledger: BlockLedger, transcript: Transcript },
    Discarded { reason: DiscardReason, ledger: BlockLedger },
}

/// Rates and seeds the distillation step needs besides the raw blocks.
#[derive(Clone, Debug)]
pub struct DistillParams<'a> {
    pub protocol: &'a DecoyParams,
    /// QBER estimate controlling the Winnow schedule and the cap check.
    pub qber_hint: f64,
    /// Decoy-method estimated final key rate, bps.
    pub estimated_final_rate_bps: f64,
    /// Sifted key rate feeding this pipeline, bps.
    pub sifted_rate_bps: f64,
    /// Shared randomness for permutations and the PA seed.
    pub session_seed: u64,
}

/// Distill one block. Both key stores must hold the same pre-shared
/// material; two keys are consumed per block (one tag per direction).
pub fn distill(
    alice_sifted: &Bits,
    bob_sifted: &Bits,
    params: &DistillParams<'_>,
    store_alice: &mut AuthKeyStore,
    store_bob: &mut AuthKeyStore,
) -> Result<DistillOutcome, DistillError> {
    if alice_sifted.len() != bob_sifted.len() {
        return Err(DistillError::Invalid(alloc::format!(
            "sifted blocks differ in length: {} vs {}",
            alice_sifted.len(),
            bob_sifted.len()
        )));
    }
    if (alice_sifted.len() as u64) < params.protocol.block_size_bits {
        return Err(DistillError::InsufficientBlock {
            have: alice_sifted.len(),
            need: params.protocol.block_size_bits,
        });
    }

    let measured_qber = alice_sifted.hamming_distance(bob_sifted) as f64
        / alice_sifted.len().max(1) as f64;
    let mut ledger = BlockLedger {
        input_bits: alice_sifted.len(),
        qber_measured: measured_qber,
        leaked_bits: 0,
        ec_rounds: 0,
        pa_factor: 0.0,
        final_bits: 0,
        auth_bits_consumed: 0,
        verified: false,
    };

    // Redundancy control: refuse blocks whose error rate breaches the cap.
    if params.qber_hint > params.protocol.qber_cap
        || measured_qber > params.protocol.qber_cap
    {
        return Ok(DistillOutcome::Discarded { reason: DiscardReason::QberCap, ledger });
    }

    // Error correction. The hint drives the schedule; clamp into Winnow's
    // accepted range.
    let hint = params.qber_hint.clamp(1e-4, 0.1);
    let winnow = match winnow_correct(alice_sifted, bob_sifted, hint, params.session_seed) {
        Ok(w) => w,
        Err(WinnowError::NonConvergence { rounds }) => {
            ledger.ec_rounds = rounds;
            return Ok(DistillOutcome::Discarded {
                reason: DiscardReason::EcNonConvergence,
                ledger,
            });
        }
        Err(e) => {
            return Err(DistillError::Invalid(alloc::format!("{e}")));
        }
    };
    ledger.leaked_bits = winnow.alice.leaked_bits;
    ledger.ec_rounds = winnow.alice.ec_rounds;

    // Error verification.
    let verified = crc64_verify(&winnow.alice.bits, &winnow.bob.bits);
    ledger.verified = verified;
    let mut transcript = winnow.transcript;

    // Alice tags the transcript with the next pre-stored key; Bob recomputes
    // the tag from his copy of the same key. Disagreement means the parties
    // do not share the pool (or the transcript was tampered with) and the
    // session aborts.
    let encoded = transcript.encode();
    let snapshot = Bits::from_bytes(&encoded, encoded.len() * 8);
    let key_a = store_alice.next_key()?;
    let tag_a = lfsr_toeplitz_auth(&snapshot, &key_a)?;
    let key_b_check = store_bob.next_key()?;
    let tag_b = lfsr_toeplitz_auth(&snapshot, &key_b_check)?;
    ledger.auth_bits_consumed = store_alice.consumed_bits();
    let mut payload = tag_a.key_id.to_le_bytes().to_vec();
    payload.extend_from_slice(&tag_a.tag.to_le_bytes());
    transcript.push(kind::AUTH_TAG_A, payload);
    let mut payload = tag_b.key_id.to_le_bytes().to_vec();
    payload.extend_from_slice(&tag_b.tag.to_le_bytes());
    transcript.push(kind::AUTH_TAG_B, payload);
    if tag_a.tag != tag_b.tag {
        return Err(DistillError::Auth(AuthError::Invalid(
            "transcript tags disagree; session aborted".into(),
        )));
    }

    if !verified {
        return Ok(DistillOutcome::Discarded { reason: DiscardReason::VerifyFailed, ledger });
    }

    // PA factor from the estimated final rate against the corrected rate.
    let n_corrected = winnow.alice.bits.len();
    let corrected_rate_bps = params.sifted_rate_bps
        * (n_corrected as f64 / alice_sifted.len().max(1) as f64);
    let pa_factor = compute_pa_factor(corrected_rate_bps, params.estimated_final_rate_bps);
    ledger.pa_factor = pa_factor;
    let m = (pa_factor * n_corrected as f64) as usize;
    if m == 0 {
        return Ok(DistillOutcome::Discarded { reason: DiscardReason::NoKey, ledger });
    }

    // Toeplitz extraction with a seed drawn from the shared session stream.
    let seed_id = params.session_seed ^ 0x7061_7365_6564; // distinct PA stream
    let mut seed_rng = rng::stream_rng(seed_id, 1);
    let mut seed_bits = Bits::zeros(n_corrected + m - 1);
    for i in 0..seed_bits.len() {
        if seed_rng.next_u64() & 1 == 1 {
            seed_bits.set(i, true);
        }
    }
    let mut payload = pa_factor.to_le_bytes().to_vec();
    payload.extend_from_slice(&(m as u64).to_le_bytes());
    payload.extend_from_slice(&seed_id.to_le_bytes());
    transcript.push(kind::PA_SPEC, payload);
    let spec = PaSpec {
        pa_factor,
        input_len: n_corrected,
        output_len: m,
        seed: seed_bits,
    };
    let final_alice = toeplitz_pa(&winnow.alice.bits, &spec)
        .map_err(|e| DistillError::Invalid(alloc::format!("{e}")))?;
    let final_bob = toeplitz_pa(&winnow.bob.bits, &spec)
        .map_err(|e| DistillError::Invalid(alloc::format!("{e}")))?;
    ledger.final_bits = final_alice.len();

    Ok(DistillOutcome::Keys { alice: final_alice, bob: final_bob, ledger, transcript })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;

    fn correlated_pair(n: usize, qber: f64, seed: u64) -> (Bits, Bits) {
        let mut rng = rng::seed_rng(seed);
        let mut a = Bits::zeros(n);
        let mut b = Bits::zeros(n);
        for i in 0..n {
            let bit = rng::bernoulli(&mut rng, 0.5);
            a.set(i, bit);
            b.set(i, bit ^ rng::bernoulli(&mut rng, qber));
        }
        (a, b)
    }

    fn small_protocol(block: u64) -> DecoyParams {
        DecoyParams { block_size_bits: block, ..DecoyParams::default() }
    }

    fn params(protocol: &DecoyParams, qber: f64, seed: u64) -> DistillParams<'_> {
        DistillParams {
            protocol,
            qber_hint: qber,
            estimated_final_rate_bps: 4_500.0,
            sifted_rate_bps: 40_000.0,
            session_seed: seed,
        }
    }

    #[test]
    fn noiseless_block_distills_identical_keys() {
        let protocol = small_protocol(8192);
        let (a, _) = correlated_pair(8192, 0.0, 1);
        let mut sa = AuthKeyStore::new(77);
        let mut sb = AuthKeyStore::new(77);
        let p = params(&protocol, 0.005, 11);
        match distill(&a, &a.clone(), &p, &mut sa, &mut sb).unwrap() {
            DistillOutcome::Keys { alice, bob, ledger, .. } => {
                assert_eq!(alice, bob);
                assert!(ledger.verified);
                assert!(ledger.final_bits > 0);
                assert!(ledger.pa_factor > 0.0);
            }
            other => panic!("expected keys, got {other:?}"),
        }
    }

    #[test]
    fn realistic_block_distills_and_is_deterministic() {
        let protocol = small_protocol(8192);
        let (a, b) = correlated_pair(8192, 0.025, 5);
        let run = |seed| {
            let mut sa = AuthKeyStore::new(42);
            let mut sb = AuthKeyStore::new(42);
            let p = params(&protocol, 0.025, seed);
            distill(&a, &b, &p, &mut sa, &mut sb).unwrap()
        };
        match (run(9), run(9)) {
            (
                DistillOutcome::Keys { alice: a1, bob: b1, .. },
                DistillOutcome::Keys { alice: a2, bob: b2, .. },
            ) => {
                assert_eq!(a1, b1);
                assert_eq!(a1, a2);
                assert_eq!(b1, b2);
            }
            other => panic!("expected keys twice, got {other:?}"),
        }
    }

    #[test]
    fn qber_above_cap_refused() {
        let protocol = small_protocol(4096);
        let (a, b) = correlated_pair(4096, 0.08, 3);
        let mut sa = AuthKeyStore::new(1);
        let mut sb = AuthKeyStore::new(1);
        let p = params(&protocol, 0.08, 2);
        match distill(&a, &b, &p, &mut sa, &mut sb).unwrap() {
            DistillOutcome::Discarded { reason, ledger } => {
                assert_eq!(reason, DiscardReason::QberCap);
                assert_eq!(ledger.final_bits, 0);
            }
            other => panic!("expected discard, got {other:?}"),
        }
    }

    #[test]
    fn short_block_is_an_error() {
        let protocol = small_protocol(500_000);
        let (a, b) = correlated_pair(1000, 0.02, 3);
        let mut sa = AuthKeyStore::new(1);
        let mut sb = AuthKeyStore::new(1);
        let p = params(&protocol, 0.02, 2);
        assert!(matches!(
            distill(&a, &b, &p, &mut sa, &mut sb),
            Err(DistillError::InsufficientBlock { .. })
        ));
    }

    #[test]
    fn mismatched_key_stores_abort() {
        let protocol = small_protocol(4096);
        let (a, b) = correlated_pair(4096, 0.02, 3);
        let mut sa = AuthKeyStore::new(1);
        let mut sb = AuthKeyStore::new(2); // different pre-shared material
        let p = params(&protocol, 0.02, 2);
        assert!(matches!(
            distill(&a, &b, &p, &mut sa, &mut sb),
            Err(DistillError::Auth(_))
        ));
    }

    #[test]
    fn final_keys_differ_across_blocks() {
        let protocol = small_protocol(4096);
        let mut outs: Vec<Bits> = Vec::new();
        for blk in 0..3 {
            let (a, b) = correlated_pair(4096, 0.02, 100 + blk);
            let mut sa = AuthKeyStore::new(9);
            let mut sb = AuthKeyStore::new(9);
            let p = params(&protocol, 0.02, 200 + blk);
            if let DistillOutcome::Keys { alice, .. } =
                distill(&a, &b, &p, &mut sa, &mut sb).unwrap()
            {
                outs.push(alice);
            }
        }
        assert_eq!(outs.len(), 3);
        assert_ne!(outs[0], outs[1]);
        assert_ne!(outs[1], outs[2]);
    }
}
