//! Seeded Monte Carlo simulation of the decoy-state BB84 quantum layer:
//! state emission, lossy/noisy channel sampling, detection with dead time and
//! afterpulsing, and sifting.
//!
//! Two equivalent sampling paths are provided:
//!
//! - [`transmit_detect`] walks every pulse slot with per-slot Bernoulli
//!   draws (the reference semantics);
//! - [`simulate_block`] samples click events directly (binomial counts,
//!   uniform positions), which is distribution-equivalent and fast enough
//!   for full parameter-estimation blocks where almost every slot is empty.
//!
//! Detection events carry ground-truth cause labels that never feed back
//! into sifting; they exist so oracle tests can compare certified bounds
//! against the true channel.

use crate::bits::Bits;
use crate::channel::NoiseBudget;
use crate::detector::DetectorSpec;
use crate::keyrate::{BlockTallies, ChannelExpectation, ClassTally, DecoyParams};
use crate::math;
use crate::rng::{self, Rng};
use alloc::collections::BinaryHeap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Reverse;
use core::fmt;

#[derive(Clone, Debug, PartialEq)]
pub enum SimError {
    Invalid(String),
}

impl fmt::Display for SimError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SimError::Invalid(msg) => write!(f, "invalid simulation input: {msg}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for SimError {}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Basis {
    Rectilinear,
    Diagonal,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum IntensityClass {
    Signal,
    Decoy,
    Vacuum,
}

impl IntensityClass {
    pub fn index(self) -> usize {
        match self {
            IntensityClass::Signal => 0,
            IntensityClass::Decoy => 1,
            IntensityClass::Vacuum => 2,
        }
    }

    pub fn from_index(i: usize) -> IntensityClass {
        match i {
            0 => IntensityClass::Signal,
            1 => IntensityClass::Decoy,
            _ => IntensityClass::Vacuum,
        }
    }
}

/// Ground-truth click origin (hidden from sifting).
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum ClickCause {
    Signal,
    Dark,
    Srs,
    Afterpulse,
    Crosstalk,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PulseRecord {
    pub index: u64,
    pub basis: Basis,
    pub bit: bool,
    pub intensity: IntensityClass,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DetectionRecord {
    pub index: u64,
    /// Detector 0..3: basis * 2 + bit.
    pub detector: u8,
    pub cause: ClickCause,
    pub basis_bob: Basis,
    pub bit: bool,
}

/// Basis-matched key material for one intensity class.
#[derive(Clone, Debug, PartialEq)]
pub struct SiftedBlock {
    pub intensity: IntensityClass,
    pub alice_bits: Bits,
    pub bob_bits: Bits,
    pub positions: Vec<u64>,
    pub measured_qber: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SiftOutcome {
    pub blocks: [SiftedBlock; 3],
    pub tallies: BlockTallies,
}

/// i.i.d. pulse train: intensity by emission ratio, basis and bit uniform.
/// Deterministic under a fixed seed.
pub fn emit_pulses(n: u64, protocol: &DecoyParams, seed: u64) -> Vec<PulseRecord> {
    let mut rng = rng::seed_rng(seed);
    let mut out = Vec::with_capacity(n as usize);
    for index in 0..n {
        let u = rng::uniform(&mut rng);
        let intensity = if u < protocol.p_mu {
            IntensityClass::Signal
        } else if u < protocol.p_mu + protocol.p_nu {
            IntensityClass::Decoy
        } else {
            IntensityClass::Vacuum
        };
        let basis = if rng::bernoulli(&mut rng, 0.5) {
            Basis::Rectilinear
        } else {
            Basis::Diagonal
        };
        let bit = rng::bernoulli(&mut rng, 0.5);
        out.push(PulseRecord { index, basis, bit, intensity });
    }
    out
}

/// Per-slot click probabilities derived from a working point. The noise
/// budget entries are detected rates at the SPDs.
#[derive(Clone, Copy, Debug)]
struct SlotModel {
    /// P(signal click) per intensity class.
    p_sig: [f64; 3],
    /// P(noise click) per slot, all causes.
    p_bg: f64,
    /// Cumulative cause split within a noise click: dark, srs, crosstalk.
    cause_cdf: [f64; 3],
    dead_slots: u64,
    p_after: f64,
    e_d: f64,
}

fn slot_model(
    loss_db: f64,
    noise: &NoiseBudget,
    det: &DetectorSpec,
    protocol: &DecoyParams,
) -> Result<SlotModel, SimError> {
    if det.num_detectors != 4 {
        return Err(SimError::Invalid(format!(
            "simulation models a 4-detector receiver (got {})",
            det.num_detectors
        )));
    }
    let eta_tot = det.efficiency * math::db_to_linear(-loss_db);
    let p_sig = [
        -math::expm1(-protocol.mu * eta_tot),
        -math::expm1(-protocol.nu * eta_tot),
        -math::expm1(-protocol.omega * eta_tot),
    ];
    // Afterpulses are injected dynamically; the static budget entry would
    // double-count them here.
    let bg_total = noise.n_srs_cps + noise.n_dark_cps + noise.n_crosstalk_cps;
    let p_bg = bg_total / protocol.rep_rate_hz;
    let worst = p_sig[0] + p_bg;
    if worst >= 1.0 {
        return Err(SimError::Invalid(format!(
            "per-slot click probability {worst:.3} >= 1; lower the rates or shorten the slot"
        )));
    }
    let cause_cdf = if bg_total > 0.0 {
        let dark = noise.n_dark_cps / bg_total;
        let srs = noise.n_srs_cps / bg_total;
        [dark, dark + srs, 1.0]
    } else {
        [1.0, 1.0, 1.0]
    };
    Ok(SlotModel {
        p_sig,
        p_bg,
        cause_cdf,
        dead_slots: math::round(det.dead_time_s * protocol.rep_rate_hz) as u64,
        p_after: det.afterpulse_prob,
        e_d: protocol.e_d,
    })
}

fn noise_cause(model: &SlotModel, rng: &mut Rng) -> ClickCause {
    let u = rng::uniform(rng);
    if u < model.cause_cdf[0] {
        ClickCause::Dark
    } else if u < model.cause_cdf[1] {
        ClickCause::Srs
    } else {
        ClickCause::Crosstalk
    }
}

/// Detection bookkeeping shared by both sampling paths: non-paralyzable
/// per-detector dead time and afterpulse scheduling.
struct DetectorBank {
    last_click: [Option<u64>; 4],
    pending_afterpulse: BinaryHeap<Reverse<(u64, u8)>>,
    dead_slots: u64,
    p_after: f64,
}

impl DetectorBank {
    fn new(model: &SlotModel) -> Self {
        DetectorBank {
            last_click: [None; 4],
            pending_afterpulse: BinaryHeap::new(),
            dead_slots: model.dead_slots,
            p_after: model.p_after,
        }
    }

    fn is_dead(&self, det: u8, slot: u64) -> bool {
        match self.last_click[det as usize] {
            Some(last) => slot > last && slot - last <= self.dead_slots,
            None => false,
        }
    }

    /// Register a surviving click; maybe schedule an afterpulse at the first
    /// gate after dead-time release.
    fn register(&mut self, det: u8, slot: u64, rng: &mut Rng) {
        self.last_click[det as usize] = Some(slot);
        if self.p_after > 0.0 && rng::bernoulli(rng, self.p_after) {
            self.pending_afterpulse
                .push(Reverse((slot + self.dead_slots + 1, det)));
        }
    }

    fn pop_afterpulse_at_or_before(&mut self, slot: u64) -> Option<(u64, u8)> {
        if let Some(&Reverse((s, d))) = self.pending_afterpulse.peek() {
            if s <= slot {
                self.pending_afterpulse.pop();
                return Some((s, d));
            }
        }
        None
    }
}

fn detector_for(basis: Basis, bit: bool) -> u8 {
    let b = match basis {
        Basis::Rectilinear => 0u8,
        Basis::Diagonal => 1u8,
    };
    b * 2 + bit as u8
}

fn basis_of_detector(det: u8) -> Basis {
    if det / 2 == 0 {
        Basis::Rectilinear
    } else {
        Basis::Diagonal
    }
}

/// Reference slot-walk detection: Bernoulli draws per slot, misalignment
/// flips, uniform noise clicks, non-paralyzable per-detector dead time, and
/// afterpulse injection. Double-click slots (signal and noise together) are
/// squashed by discarding the slot.
pub fn transmit_detect(
    pulses: &[PulseRecord],
    loss_db: f64,
    noise: &NoiseBudget,
    det: &DetectorSpec,
    protocol: &DecoyParams,
    seed: u64,
) -> Result<Vec<DetectionRecord>, SimError> {
    let model = slot_model(loss_db, noise, det, protocol)?;
    let mut rng = rng::seed_rng(seed);
    let mut bank = DetectorBank::new(&model);
    let mut out = Vec::new();
    for pulse in pulses {
        let slot = pulse.index;
        while let Some((ap_slot, ap_det)) = bank.pop_afterpulse_at_or_before(slot) {
            emit_afterpulse(&mut out, &mut bank, ap_slot, ap_det, &mut rng);
        }
        let signal_click = rng::bernoulli(&mut rng, model.p_sig[pulse.intensity.index()]);
        let noise_click = rng::bernoulli(&mut rng, model.p_bg);
        if signal_click && noise_click {
            continue; // squash rule: discard double-click slots
        }
        if signal_click {
            let basis_bob = if rng::bernoulli(&mut rng, 0.5) {
                Basis::Rectilinear
            } else {
                Basis::Diagonal
            };
            let bit = if basis_bob == pulse.basis {
                pulse.bit ^ rng::bernoulli(&mut rng, model.e_d)
            } else {
                rng::bernoulli(&mut rng, 0.5)
            };
            let d = detector_for(basis_bob, bit);
            if !bank.is_dead(d, slot) {
                bank.register(d, slot, &mut rng);
                out.push(DetectionRecord {
                    index: slot,
                    detector: d,
                    cause: ClickCause::Signal,
                    basis_bob,
                    bit,
                });
            }
        } else if noise_click {
            let cause = noise_cause(&model, &mut rng);
            let d = rng::gen_index(&mut rng, 4) as u8;
            if !bank.is_dead(d, slot) {
                bank.register(d, slot, &mut rng);
                out.push(DetectionRecord {
                    index: slot,
                    detector: d,
                    cause,
                    basis_bob: basis_of_detector(d),
                    bit: d % 2 == 1,
                });
            }
        }
    }
    Ok(out)
}

fn emit_afterpulse(
    out: &mut Vec<DetectionRecord>,
    bank: &mut DetectorBank,
    slot: u64,
    det: u8,
    rng: &mut Rng,
) {
    if bank.is_dead(det, slot) {
        return;
    }
    bank.register(det, slot, rng);
    out.push(DetectionRecord {
        index: slot,
        detector: det,
        cause: ClickCause::Afterpulse,
        basis_bob: basis_of_detector(det),
        bit: det % 2 == 1,
    });
}

/// Result of an event-driven block simulation.
#[derive(Clone, Debug)]
pub struct BlockSim {
    pub tallies: BlockTallies,
    /// Basis-matched signal-class key bits, Alice's side.
    pub alice_mu: Bits,
    /// Bob's corresponding bits.
    pub bob_mu: Bits,
    /// Surviving detections by cause: signal, dark, srs, afterpulse, crosstalk.
    pub cause_counts: [u64; 5],
    pub n_slots: u64,
}

impl BlockSim {
    pub fn detections(&self) -> u64 {
        self.cause_counts.iter().sum()
    }
}

#[derive(Clone, Copy)]
enum EventKind {
    Signal(usize),
    Noise,
}

/// Event-driven equivalent of [`transmit_detect`] + [`sift`] for large slot
/// counts: click candidates are sampled directly and empty slots are never
/// visited. Slot collisions between a signal and a noise candidate squash
/// (as in the slot walk); same-kind collisions keep the first candidate.
pub fn simulate_block(
    loss_db: f64,
    noise: &NoiseBudget,
    det: &DetectorSpec,
    protocol: &DecoyParams,
    n_slots: u64,
    rng: &mut Rng,
) -> Result<BlockSim, SimError> {
    let model = slot_model(loss_db, noise, det, protocol)?;

    // Emission split across intensity classes.
    let n_mu = rng::binomial(rng, n_slots, protocol.p_mu);
    let rest = n_slots - n_mu;
    let p_nu_given_rest = if protocol.p_mu < 1.0 {
        protocol.p_nu / (1.0 - protocol.p_mu)
    } else {
        0.0
    };
    let n_nu = rng::binomial(rng, rest, p_nu_given_rest);
    let n_om = rest - n_nu;
    let sent = [n_mu, n_nu, n_om];

    // Candidate click events with uniform slot positions.
    let mut events: Vec<(u64, EventKind)> = Vec::new();
    for (class, &sent_count) in sent.iter().enumerate() {
        let k = rng::binomial(rng, sent_count, model.p_sig[class]);
        for _ in 0..k {
            events.push((rng::gen_index(rng, n_slots), EventKind::Signal(class)));
        }
    }
    let k_bg = rng::binomial(rng, n_slots, model.p_bg);
    for _ in 0..k_bg {
        events.push((rng::gen_index(rng, n_slots), EventKind::Noise));
    }
    events.sort_unstable_by_key(|&(slot, _)| slot);

    let mut bank = DetectorBank::new(&model);
    let mut sink = SiftSink {
        tallies: BlockTallies {
            mu: ClassTally { sent: sent[0], ..Default::default() },
            nu: ClassTally { sent: sent[1], ..Default::default() },
            omega: ClassTally { sent: sent[2], ..Default::default() },
        },
        alice_mu: Bits::new(),
        bob_mu: Bits::new(),
        cause_counts: [0u64; 5],
    };

    let mut i = 0usize;
    while i < events.len() {
        let (slot, _) = events[i];
        let mut j = i + 1;
        while j < events.len() && events[j].0 == slot {
            j += 1;
        }
        let group = &events[i..j];
        i = j;

        while let Some((ap_slot, ap_det)) = bank.pop_afterpulse_at_or_before(slot) {
            if !bank.is_dead(ap_det, ap_slot) {
                bank.register(ap_det, ap_slot, rng);
                sink.record_detector_click(ap_det, 3, protocol, rng);
            }
        }

        let has_signal = group.iter().any(|(_, k)| matches!(k, EventKind::Signal(_)));
        let has_noise = group.iter().any(|(_, k)| matches!(k, EventKind::Noise));
        if has_signal && has_noise {
            continue; // squash rule
        }
        match group[0].1 {
            EventKind::Signal(class) => {
                let alice_basis_rect = rng::bernoulli(rng, 0.5);
                let alice_bit = rng::bernoulli(rng, 0.5);
                let bob_basis_rect = rng::bernoulli(rng, 0.5);
                let bit = if bob_basis_rect == alice_basis_rect {
                    alice_bit ^ rng::bernoulli(rng, model.e_d)
                } else {
                    rng::bernoulli(rng, 0.5)
                };
                let basis = if bob_basis_rect {
                    Basis::Rectilinear
                } else {
                    Basis::Diagonal
                };
                let d = detector_for(basis, bit);
                if bank.is_dead(d, slot) {
                    continue;
                }
                bank.register(d, slot, rng);
                sink.cause_counts[0] += 1;
                sink.record_sift(class, alice_basis_rect, alice_bit, bob_basis_rect, bit);
            }
            EventKind::Noise => {
                let cause = noise_cause(&model, rng);
                let d = rng::gen_index(rng, 4) as u8;
                if bank.is_dead(d, slot) {
                    continue;
                }
                bank.register(d, slot, rng);
                let cause_idx = match cause {
                    ClickCause::Dark => 1,
                    ClickCause::Srs => 2,
                    _ => 4,
                };
                sink.record_detector_click(d, cause_idx, protocol, rng);
            }
        }
    }

    Ok(BlockSim {
        tallies: sink.tallies,
        alice_mu: sink.alice_mu,
        bob_mu: sink.bob_mu,
        cause_counts: sink.cause_counts,
        n_slots,
    })
}

/// Shared sifting bookkeeping for the event-driven path.
struct SiftSink {
    tallies: BlockTallies,
    alice_mu: Bits,
    bob_mu: Bits,
    cause_counts: [u64; 5],
}

impl SiftSink {
    fn record_sift(
        &mut self,
        class: usize,
        alice_basis_rect: bool,
        alice_bit: bool,
        bob_basis_rect: bool,
        bit: bool,
    ) {
        let tally = match class {
            0 => &mut self.tallies.mu,
            1 => &mut self.tallies.nu,
            _ => &mut self.tallies.omega,
        };
        tally.detected += 1;
        if bob_basis_rect == alice_basis_rect {
            tally.sifted += 1;
            if bit != alice_bit {
                tally.errors += 1;
            }
            if class == 0 {
                self.alice_mu.push(alice_bit);
                self.bob_mu.push(bit);
            }
        }
    }

    /// A click pinned to a detector (noise or afterpulse): the slot's pulse
    /// class and Alice's choices sample lazily, Bob's basis and bit are the
    /// detector's.
    fn record_detector_click(
        &mut self,
        detector: u8,
        cause_idx: usize,
        protocol: &DecoyParams,
        rng: &mut Rng,
    ) {
        self.cause_counts[cause_idx] += 1;
        let u = rng::uniform(rng);
        let class = if u < protocol.p_mu {
            0
        } else if u < protocol.p_mu + protocol.p_nu {
            1
        } else {
            2
        };
        let alice_basis_rect = rng::bernoulli(rng, 0.5);
        let alice_bit = rng::bernoulli(rng, 0.5);
        let bob_basis_rect = detector / 2 == 0;
        let bit = detector % 2 == 1;
        self.record_sift(class, alice_basis_rect, alice_bit, bob_basis_rect, bit);
    }
}

/// Basis sifting: keep basis-matched single-click slots; tally gains and
/// errors per intensity class for parameter estimation.
pub fn sift(pulses: &[PulseRecord], detections: &[DetectionRecord]) -> SiftOutcome {
    let mut sent = [0u64; 3];
    for p in pulses {
        sent[p.intensity.index()] += 1;
    }
    let mut tallies = BlockTallies::default();
    let mut alice_bits: [Vec<bool>; 3] = Default::default();
    let mut bob_bits: [Vec<bool>; 3] = Default::default();
    let mut positions: [Vec<u64>; 3] = Default::default();
    let mut errors = [0u64; 3];
    let mut detected = [0u64; 3];

    for d in detections {
        let pulse = &pulses[d.index as usize];
        debug_assert_eq!(pulse.index, d.index);
        let class = pulse.intensity.index();
        detected[class] += 1;
        if d.basis_bob == pulse.basis {
            alice_bits[class].push(pulse.bit);
            bob_bits[class].push(d.bit);
            positions[class].push(d.index);
            if d.bit != pulse.bit {
                errors[class] += 1;
            }
        }
    }

    let mut blocks: Vec<SiftedBlock> = Vec::with_capacity(3);
    for class in 0..3 {
        let sifted = alice_bits[class].len() as u64;
        let tally = ClassTally {
            sent: sent[class],
            detected: detected[class],
            sifted,
            errors: errors[class],
        };
        match class {
            0 => tallies.mu = tally,
            1 => tallies.nu = tally,
            _ => tallies.omega = tally,
        }
        blocks.push(SiftedBlock {
            intensity: IntensityClass::from_index(class),
            alice_bits: Bits::from_bools(&alice_bits[class]),
            bob_bits: Bits::from_bools(&bob_bits[class]),
            positions: core::mem::take(&mut positions[class]),
            measured_qber: if sifted == 0 {
                0.0
            } else {
                errors[class] as f64 / sifted as f64
            },
        });
    }
    let blocks: [SiftedBlock; 3] = match blocks.try_into() {
        Ok(b) => b,
        Err(_) => unreachable!(),
    };
    SiftOutcome { blocks, tallies }
}

/// Tallies sampled directly from channel expectations (no per-event walk).
/// Used for statistical soundness checks and long stability sequences where
/// only the counting statistics matter.
pub fn sample_tallies(
    exp: &ChannelExpectation,
    protocol: &DecoyParams,
    n_pulses: u64,
    rng: &mut Rng,
) -> BlockTallies {
    let s = exp.dead_time_factor;
    let n_mu = rng::binomial(rng, n_pulses, protocol.p_mu);
    let rest = n_pulses - n_mu;
    let p_nu_given_rest = if protocol.p_mu < 1.0 {
        protocol.p_nu / (1.0 - protocol.p_mu)
    } else {
        0.0
    };
    let n_nu = rng::binomial(rng, rest, p_nu_given_rest);
    let n_om = rest - n_nu;
    let mut out = BlockTallies::default();
    for (tally, sent, q, e) in [
        (&mut out.mu, n_mu, exp.gains.q_mu, exp.e_mu),
        (&mut out.nu, n_nu, exp.gains.q_nu, exp.e_nu),
        (&mut out.omega, n_om, exp.gains.q_omega, 0.5),
    ] {
        tally.sent = sent;
        tally.detected = rng::binomial(rng, sent, (q * s).min(1.0));
        tally.sifted = rng::binomial(rng, tally.detected, protocol.sift_factor);
        tally.errors = rng::binomial(rng, tally.sifted, e.min(1.0));
    }
    out
}

/// Bit-packed block dump with a fixed-layout header. All integers are
/// little-endian; bit `i` of the payload sits at byte `i/8`, bit `i%8`.
pub mod dump {
    use super::*;

    pub const MAGIC: &[u8; 4] = b"QBLK";
    pub const VERSION: u16 = 1;
    const HEADER_LEN: usize = 44;

    #[derive(Clone, Debug, PartialEq)]
    pub struct BlockDump {
        pub scenario_hash: u64,
        /// Sifted counts per intensity class (signal, decoy, vacuum).
        pub tallies: [u64; 3],
        pub bits: Bits,
    }

    /// Layout: magic(4) version(u16) reserved(u16) scenario_hash(u64)
    /// bit_len(u32) tallies(3 x u64) packed bits.
    pub fn encode(dump: &BlockDump) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&0u16.to_le_bytes());
        out.extend_from_slice(&dump.scenario_hash.to_le_bytes());
        out.extend_from_slice(&(dump.bits.len() as u32).to_le_bytes());
        for t in dump.tallies {
            out.extend_from_slice(&t.to_le_bytes());
        }
        out.extend_from_slice(&dump.bits.to_bytes());
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<BlockDump, SimError> {
        let fail = |msg: &str| SimError::Invalid(alloc::format!("block dump: {msg}"));
        if bytes.len() < HEADER_LEN {
            return Err(fail("truncated header"));
        }
        if &bytes[0..4] != MAGIC {
            return Err(fail("bad magic"));
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != VERSION {
            return Err(fail("unsupported version"));
        }
        let scenario_hash = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
        let bit_len = u32::from_le_bytes(bytes[16..20].try_into().unwrap()) as usize;
        let mut tallies = [0u64; 3];
        for (i, t) in tallies.iter_mut().enumerate() {
            *t = u64::from_le_bytes(bytes[20 + 8 * i..28 + 8 * i].try_into().unwrap());
        }
        let payload = &bytes[HEADER_LEN..];
        if payload.len() < bit_len.div_ceil(8) {
            return Err(fail("truncated payload"));
        }
        Ok(BlockDump {
            scenario_hash,
            tallies,
            bits: Bits::from_bytes(payload, bit_len),
        })
    }
}
