//! Winnow error reconciliation.
//!
//! Iterative protocol on identically permuted key copies:
//!
//! 1. partition into blocks of 2^k bits;
//! 2. exchange block parities; blocks with differing parity undergo a
//!    Hamming-syndrome exchange that corrects one error per block;
//! 3. discard the parity position of every compared block and the Hamming
//!    positions (local 1, 2, 4, ..) of every syndrome block, which removes
//!    the disclosed information from the key instead of tracking it;
//! 4. shuffle with a transcript-shared permutation, double the block size
//!    and repeat until a round exchanges zero mismatched parities.
//!
//! `leaked_bits` counts the discarded positions. All messages both
//! directions are recorded in a [`Transcript`] so a party implementation
//! can be replayed against the serialized session (see [`replay_bob`]).

use crate::bits::Bits;
use crate::postproc::transcript::{kind, Transcript};
use crate::rng::{self};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

#[derive(Clone, Debug, PartialEq)]
pub enum WinnowError {
    LengthMismatch { alice: usize, bob: usize },
    QberHintOutOfRange(f64),
    /// Parity mismatches persisted past the round cap; the block should be
    /// discarded upstream.
    NonConvergence { rounds: u32 },
    Replay(String),
}

impl fmt::Display for WinnowError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WinnowError::LengthMismatch { alice, bob } => {
                write!(f, "winnow inputs differ in length: {alice} vs {bob}")
            }
            WinnowError::QberHintOutOfRange(q) => {
                write!(f, "winnow qber hint {q} outside (0, 0.1]")
            }
            WinnowError::NonConvergence { rounds } => {
                write!(f, "winnow did not converge after {rounds} rounds")
            }
            WinnowError::Replay(msg) => write!(f, "winnow replay: {msg}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for WinnowError {}

/// Reconciled key with leakage accounting.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrectedBlock {
    pub bits: Bits,
    /// Bits discarded for privacy maintenance.
    pub leaked_bits: u64,
    pub ec_rounds: u32,
    /// Set by the error-verification stage.
    pub verified: bool,
}

#[derive(Clone, Debug)]
pub struct WinnowOutcome {
    pub alice: CorrectedBlock,
    pub bob: CorrectedBlock,
    pub transcript: Transcript,
}

const ROUND_CAP: u32 = 10;
const MAX_BLOCK_BITS: usize = 1024;

/// Starting block size keeps the expected errors per block around 0.2 so
/// that most mismatched blocks hold exactly one error and the Hamming
/// decode is valid.
fn initial_block_bits(qber_hint: f64) -> usize {
    if qber_hint >= 0.015 {
        8
    } else if qber_hint >= 0.007 {
        16
    } else {
        32
    }
}

/// Round 1 clears the bulk error mass at the small block size; the residual
/// density afterwards is an order of magnitude lower, so the size jumps by
/// 8x once and then doubles, keeping the per-round parity disclosure cost
/// proportionate to the remaining errors.
fn next_block_bits(block: usize, rounds_done: u32) -> usize {
    let grown = if rounds_done == 1 { block * 8 } else { block * 2 };
    grown.min(MAX_BLOCK_BITS)
}

fn block_parities(bits: &Bits, block: usize) -> Vec<bool> {
    let n = bits.len();
    let mut out = Vec::with_capacity(n.div_ceil(block));
    let mut at = 0;
    while at < n {
        let end = (at + block).min(n);
        out.push(bits.parity_range(at, end));
        at = end;
    }
    out
}

fn pack_parities(parities: &[bool]) -> Vec<u8> {
    Bits::from_bools(parities).to_bytes()
}

/// Hamming syndrome of a block: XOR of the 1-based local labels of set bits,
/// labels 1..N-1 (the final position carries no syndrome weight).
fn hamming_syndrome(bits: &Bits, start: usize, end: usize) -> u32 {
    let mut s = 0u32;
    let n = end - start;
    for local in 0..n.saturating_sub(1) {
        if bits.get(start + local) {
            s ^= (local + 1) as u32;
        }
    }
    s
}

/// Local position flipped for a syndrome difference `e` in a block of `n`
/// bits: label e, or the weightless final position when e = 0.
fn flip_position(e: u32, n: usize) -> usize {
    if e == 0 {
        n - 1
    } else {
        (e - 1) as usize
    }
}

/// Positions discarded from a syndrome-corrected block: the Hamming label
/// powers 1, 2, 4, ... (local label-1 indices).
fn syndrome_discard_positions(n: usize) -> impl Iterator<Item = usize> {
    (0..).map(|k| 1usize << k).take_while(move |&p| p < n).map(|p| p - 1)
}

struct RoundPlan {
    block: usize,
    n_blocks: usize,
}

fn round_blocks(len: usize, block: usize) -> RoundPlan {
    RoundPlan { block, n_blocks: len.div_ceil(block) }
}

/// Run Winnow between two in-memory parties. Bob's bits are corrected toward
/// Alice's; both sides apply identical discards, so the outputs have equal
/// length and (after convergence) match except for residual even-weight
/// error patterns that the verification stage catches.
pub fn winnow_correct(
    alice: &Bits,
    bob: &Bits,
    qber_hint: f64,
    seed: u64,
) -> Result<WinnowOutcome, WinnowError> {
    if alice.len() != bob.len() {
        return Err(WinnowError::LengthMismatch { alice: alice.len(), bob: bob.len() });
    }
    if !(qber_hint > 0.0 && qber_hint <= 0.1) {
        return Err(WinnowError::QberHintOutOfRange(qber_hint));
    }
    let mut transcript = Transcript::new();
    let mut init = Vec::new();
    init.extend_from_slice(&qber_hint.to_le_bytes());
    init.extend_from_slice(&seed.to_le_bytes());
    init.extend_from_slice(&(alice.len() as u64).to_le_bytes());
    transcript.push(kind::WINNOW_INIT, init);

    let mut a = alice.clone();
    let mut b = bob.clone();
    let mut leaked = 0u64;
    let mut rng = rng::seed_rng(seed);
    let mut block = initial_block_bits(qber_hint);
    let mut rounds = 0u32;

    loop {
        if rounds >= ROUND_CAP {
            return Err(WinnowError::NonConvergence { rounds });
        }
        rounds += 1;
        let plan = round_blocks(a.len(), block);

        let pa = block_parities(&a, plan.block);
        let pb = block_parities(&b, plan.block);
        let mut msg = Vec::new();
        msg.extend_from_slice(&rounds.to_le_bytes());
        msg.extend_from_slice(&(pa.len() as u32).to_le_bytes());
        msg.extend_from_slice(&pack_parities(&pa));
        transcript.push(kind::PARITIES_A, msg);

        let mismatched: Vec<u32> = (0..plan.n_blocks)
            .filter(|&i| pa[i] != pb[i])
            .map(|i| i as u32)
            .collect();
        let mut msg = Vec::new();
        msg.extend_from_slice(&rounds.to_le_bytes());
        msg.extend_from_slice(&(mismatched.len() as u32).to_le_bytes());
        for &i in &mismatched {
            msg.extend_from_slice(&i.to_le_bytes());
        }
        transcript.push(kind::MISMATCH_B, msg);

        if mismatched.is_empty() {
            // converged: no parity disclosed anything new this round beyond
            // the parity bits themselves, which are still discarded
            let drops: Vec<u32> = (0..plan.n_blocks)
                .map(|i| (((i + 1) * plan.block).min(a.len()) - 1) as u32)
                .collect();
            leaked += drops.len() as u64;
            a = a.drop_sorted(&drops);
            b = b.drop_sorted(&drops);
            break;
        }

        // Syndromes for mismatched full blocks (the tail block corrects in a
        // later round once the shuffle folds it into a full block).
        let mut msg = Vec::new();
        msg.extend_from_slice(&rounds.to_le_bytes());
        msg.extend_from_slice(&(mismatched.len() as u32).to_le_bytes());
        let mut drops: Vec<u32> = Vec::new();
        for &bi in &mismatched {
            let start = bi as usize * plan.block;
            let end = (start + plan.block).min(a.len());
            let full = end - start == plan.block;
            let syndrome_a = if full { hamming_syndrome(&a, start, end) } else { u32::MAX };
            msg.extend_from_slice(&syndrome_a.to_le_bytes());
            if full {
                let syndrome_b = hamming_syndrome(&b, start, end);
                let e = syndrome_a ^ syndrome_b;
                if e != u32::MAX {
                    b.flip(start + flip_position(e, plan.block));
                }
                for p in syndrome_discard_positions(plan.block) {
                    drops.push((start + p) as u32);
                }
            }
        }
        transcript.push(kind::SYNDROMES_A, msg);

        // parity-position discard for every compared block
        for i in 0..plan.n_blocks {
            let last = ((i + 1) * plan.block).min(a.len()) - 1;
            drops.push(last as u32);
        }
        drops.sort_unstable();
        drops.dedup();
        leaked += drops.len() as u64;
        a = a.drop_sorted(&drops);
        b = b.drop_sorted(&drops);

        // transcript-shared shuffle between rounds
        let mut perm: Vec<u32> = (0..a.len() as u32).collect();
        rng::shuffle(&mut rng, &mut perm);
        a = a.gather(&perm);
        b = b.gather(&perm);

        block = next_block_bits(block, rounds);
    }

    let make = |bits: Bits| CorrectedBlock {
        bits,
        leaked_bits: leaked,
        ec_rounds: rounds,
        verified: false,
    };
    Ok(WinnowOutcome { alice: make(a), bob: make(b), transcript })
}

/// Re-run Bob's side of a recorded session from his raw bits and the
/// serialized transcript alone. Returns Bob's corrected bits; errors if the
/// transcript disagrees with what this Bob would have sent.
pub fn replay_bob(bob: &Bits, transcript: &Transcript) -> Result<Bits, WinnowError> {
    let fail = |msg: &str| WinnowError::Replay(format!("{msg}"));
    let msgs = transcript.messages();
    let mut at = 0usize;
    let next = |at: &mut usize, want: u8| -> Result<&[u8], WinnowError> {
        let m = msgs.get(*at).ok_or_else(|| fail("unexpected end of transcript"))?;
        if m.kind != want {
            return Err(WinnowError::Replay(format!(
                "expected message kind {want}, found {}",
                m.kind
            )));
        }
        *at += 1;
        Ok(&m.payload)
    };

    let init = next(&mut at, kind::WINNOW_INIT)?;
    if init.len() != 24 {
        return Err(fail("bad init payload"));
    }
    let qber_hint = f64::from_le_bytes(init[0..8].try_into().unwrap());
    let seed = u64::from_le_bytes(init[8..16].try_into().unwrap());
    let len = u64::from_le_bytes(init[16..24].try_into().unwrap()) as usize;
    if len != bob.len() {
        return Err(fail("length disagrees with init"));
    }

    let mut b = bob.clone();
    let mut rng = rng::seed_rng(seed);
    let mut block = initial_block_bits(qber_hint);
    let mut rounds_done = 0u32;
    loop {
        let pa_payload = next(&mut at, kind::PARITIES_A)?;
        if pa_payload.len() < 8 {
            return Err(fail("short parities payload"));
        }
        let n_blocks = u32::from_le_bytes(pa_payload[4..8].try_into().unwrap()) as usize;
        let plan = round_blocks(b.len(), block);
        if n_blocks != plan.n_blocks {
            return Err(fail("parity block count disagrees"));
        }
        let pa_bits = Bits::from_bytes(&pa_payload[8..], n_blocks);
        let pb = block_parities(&b, plan.block);
        let mismatched: Vec<u32> = (0..plan.n_blocks)
            .filter(|&i| pa_bits.get(i) != pb[i])
            .map(|i| i as u32)
            .collect();

        let mm_payload = next(&mut at, kind::MISMATCH_B)?;
        let recorded: Vec<u32> = mm_payload[8..]
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        if recorded != mismatched {
            return Err(fail("recorded mismatch list disagrees with replay"));
        }

        if mismatched.is_empty() {
            let drops: Vec<u32> = (0..plan.n_blocks)
                .map(|i| (((i + 1) * plan.block).min(b.len()) - 1) as u32)
                .collect();
            b = b.drop_sorted(&drops);
            break;
        }

        let sy_payload = next(&mut at, kind::SYNDROMES_A)?;
        let syndromes: Vec<u32> = sy_payload[8..]
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        if syndromes.len() != mismatched.len() {
            return Err(fail("syndrome count disagrees"));
        }
        let mut drops: Vec<u32> = Vec::new();
        for (&bi, &syndrome_a) in mismatched.iter().zip(&syndromes) {
            let start = bi as usize * plan.block;
            let end = (start + plan.block).min(b.len());
            if end - start == plan.block {
                let syndrome_b = hamming_syndrome(&b, start, end);
                let e = syndrome_a ^ syndrome_b;
                if e != u32::MAX {
                    b.flip(start + flip_position(e, plan.block));
                }
                for p in syndrome_discard_positions(plan.block) {
                    drops.push((start + p) as u32);
                }
            }
        }
        for i in 0..plan.n_blocks {
            drops.push((((i + 1) * plan.block).min(b.len()) - 1) as u32);
        }
        drops.sort_unstable();
        drops.dedup();
        b = b.drop_sorted(&drops);

        let mut perm: Vec<u32> = (0..b.len() as u32).collect();
        rng::shuffle(&mut rng, &mut perm);
        b = b.gather(&perm);
        rounds_done += 1;
        block = next_block_bits(block, rounds_done);
    }
    Ok(b)
}
