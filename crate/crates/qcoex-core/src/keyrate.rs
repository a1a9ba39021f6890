//! QSNR, QBER, decoy-state bounds, finite-size adjustment, and the secure
//! key rate.
//!
//! The per-slot channel expectation model used throughout (and realized by
//! the Monte Carlo layer in [`crate::sim`]):
//!
//! - background click probability per pulse slot `Y0 = N_noise / rep_rate`,
//!   where the detected noise rate applies detector efficiency to the
//!   receiver-input SRS flux and adds dark, crosstalk, and afterpulse rates;
//! - gain of intensity `a`: `Q_a = 1 - (1 - Y0) * e^(-a * eta)`;
//! - error gain: `E_a * Q_a = e_d * (1 - e^(-a * eta)) * (1 - Y0) + Y0 / 2`
//!   (signal clicks err with the misalignment rate, background clicks are
//!   random).
//!
//! Single-photon yield and error are bounded with the vacuum+weak two-decoy
//! method, worst-cased by `n_sigma` standard deviations of the block-size
//! statistics, and fed to the GLLP-style rate formula.

use crate::channel::NoiseBudget;
use crate::detector::{self, DetectorSpec};
use crate::math;
use alloc::string::String;

use core::fmt;

#[derive(Clone, Debug, PartialEq)]
pub enum KeyRateError {
    /// Fewer sifted bits than the parameter-estimation block requires.
    InsufficientStatistics { have: u64, need: u64 },
    Invalid(String),
}

impl fmt::Display for KeyRateError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KeyRateError::InsufficientStatistics { have, need } => {
                write!(f, "insufficient statistics: {have} sifted bits, block needs {need}")
            }
            KeyRateError::Invalid(msg) => write!(f, "invalid key-rate parameter: {msg}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for KeyRateError {}

/// Decoy-state BB84 protocol parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct DecoyParams {
    /// Signal mean photon number.
    pub mu: f64,
    /// Decoy mean photon number.
    pub nu: f64,
    /// Vacuum mean photon number (0).
    pub omega: f64,
    pub p_mu: f64,
    pub p_nu: f64,
    pub p_omega: f64,
    pub rep_rate_hz: f64,
    /// Optical misalignment error rate.
    pub e_d: f64,
    /// Error-correction inefficiency.
    pub f_ec: f64,
    /// Basis-sift survival fraction.
    pub sift_factor: f64,
    /// Parameter-estimation block, sifted signal bits.
    pub block_size_bits: u64,
    /// Statistical-fluctuation margin, standard deviations.
    pub n_sigma: f64,
    /// Redundancy-control QBER ceiling.
    pub qber_cap: f64,
    /// Lumped real-time system overhead (post-processing stalls,
    /// polarization recalibration, estimation windows) applied to the
    /// effective clock. Calibrated once against the measured 66 km key
    /// rates.
    pub duty_factor: f64,
}

impl Default for DecoyParams {
    fn default() -> Self {
        DecoyParams {
            mu: 0.6,
            nu: 0.2,
            omega: 0.0,
            p_mu: 0.75,
            p_nu: 0.125,
            p_omega: 0.125,
            rep_rate_hz: 625e6,
            e_d: 0.007,
            f_ec: 1.35,
            sift_factor: 0.5,
            block_size_bits: 500_000,
            n_sigma: 7.0,
            qber_cap: 0.04,
            duty_factor: 0.30,
        }
    }
}

impl DecoyParams {
    pub fn validate(&self) -> Result<(), KeyRateError> {
        if !(self.mu > self.nu && self.nu > self.omega && self.omega == 0.0) {
            return Err(KeyRateError::Invalid(alloc::format!(
                "intensities must satisfy mu > nu > omega = 0 (got {} / {} / {})",
                self.mu, self.nu, self.omega
            )));
        }
        let psum = self.p_mu + self.p_nu + self.p_omega;
        if (psum - 1.0).abs() > 1e-9 {
            return Err(KeyRateError::Invalid(alloc::format!(
                "emission probabilities sum to {psum}, expected 1"
            )));
        }
        if !(self.f_ec >= 1.0 && self.f_ec <= 2.0) {
            return Err(KeyRateError::Invalid(alloc::format!(
                "protocol.f_ec = {} (must be in [1, 2])",
                self.f_ec
            )));
        }
        if !(self.sift_factor > 0.0 && self.sift_factor <= 1.0) {
            return Err(KeyRateError::Invalid(alloc::format!(
                "protocol.sift_factor = {} (must be in (0, 1])",
                self.sift_factor
            )));
        }
        if !(self.duty_factor > 0.0 && self.duty_factor <= 1.0) {
            return Err(KeyRateError::Invalid(alloc::format!(
                "protocol.duty_factor = {} (must be in (0, 1])",
                self.duty_factor
            )));
        }
        if !(self.e_d >= 0.0 && self.e_d < 0.5) {
            return Err(KeyRateError::Invalid(alloc::format!(
                "protocol.e_d = {} (must be in [0, 0.5))",
                self.e_d
            )));
        }
        Ok(())
    }
}

/// Full evaluation result for one scenario point.
#[derive(Clone, Debug, PartialEq)]
pub struct KeyRateReport {
    pub qsnr_db: f64,
    /// Sifted signal-state QBER expectation (the quantity the 4% redundancy
    /// cap tests).
    pub qber: f64,
    pub gain_mu: f64,
    pub y1_lower: f64,
    pub e1_upper: f64,
    pub rate_bps: f64,
    pub feasible: bool,
    pub noise: NoiseBudget,
    /// Detection rate after dead time, cps.
    pub n_actual_cps: f64,
}

/// QSNR in dB:
///
/// `10 log10( N_actual (1 - P_after - e_d) / (N_SRS + N_dark + N_after + N_xt) )`
///
/// Crosstalk is included in the denominator sum; it is negligible against
/// dark counts but strictly conservative. A zero denominator returns
/// `f64::INFINITY` (check with `is_infinite`), not a panic.
pub fn qsnr(
    n_actual_cps: f64,
    noise: &NoiseBudget,
    det: &DetectorSpec,
    protocol: &DecoyParams,
) -> f64 {
    let numer = n_actual_cps * (1.0 - det.afterpulse_prob - protocol.e_d);
    let denom = noise.total_cps();
    if denom <= 0.0 {
        return f64::INFINITY;
    }
    10.0 * math::log10(numer / denom)
}

/// Signal/noise error mixing: `QBER = (e_d * S + N/2) / (S + N)` with
/// `S/N = 10^(qsnr/10)`. Monotone decreasing in QSNR; tends to `e_d` as the
/// channel becomes noiseless and to `(e_d + 0.5)/2` at 0 dB.
pub fn qber_from_qsnr(qsnr_db: f64, protocol: &DecoyParams) -> f64 {
    if qsnr_db.is_infinite() && qsnr_db > 0.0 {
        return protocol.e_d;
    }
    let snr = math::db_to_linear(qsnr_db);
    (protocol.e_d * snr + 0.5) / (snr + 1.0)
}

/// Measured (or expected) gains per intensity class.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GainObservations {
    pub q_mu: f64,
    pub q_nu: f64,
    /// Vacuum gain, i.e. the background yield Y0.
    pub q_omega: f64,
}

/// Measured (or expected) error rates per intensity class.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErrorObservations {
    pub e_mu: f64,
    pub e_nu: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecoyBounds {
    pub y1_lower: f64,
    pub e1_upper: f64,
    /// False when no positive single-photon yield is certified.
    pub feasible: bool,
}

/// Vacuum+weak two-decoy bounds:
///
/// `Y1 >= mu/(mu nu - nu^2) * [Q_nu e^nu - Q_mu e^mu nu^2/mu^2 - (mu^2-nu^2)/mu^2 * Y0]`
/// `e1 <= (E_nu Q_nu e^nu - Y0/2) / (Y1_lower * nu)`
///
/// both clamped to [0, 1].
pub fn decoy_bounds(
    gains: &GainObservations,
    errors: &ErrorObservations,
    protocol: &DecoyParams,
) -> DecoyBounds {
    let (mu, nu) = (protocol.mu, protocol.nu);
    let y0 = gains.q_omega;
    let y1 = mu / (mu * nu - nu * nu)
        * (gains.q_nu * math::exp(nu)
            - gains.q_mu * math::exp(mu) * (nu * nu) / (mu * mu)
            - ((mu * mu - nu * nu) / (mu * mu)) * y0);
    let feasible = y1 > 0.0;
    let y1_lower = y1.clamp(0.0, 1.0);
    let e1_upper = if feasible {
        let e1 = (errors.e_nu * gains.q_nu * math::exp(nu) - 0.5 * y0) / (y1_lower * nu);
        e1.clamp(0.0, 1.0)
    } else {
        1.0
    };
    DecoyBounds { y1_lower, e1_upper, feasible }
}

/// Raw tallies for one intensity class over an estimation window.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ClassTally {
    /// Pulses emitted in this class.
    pub sent: u64,
    /// Detections attributed to this class (post dead time).
    pub detected: u64,
    /// Basis-matched sifted bits.
    pub sifted: u64,
    /// Errors among the sifted bits.
    pub errors: u64,
}

impl ClassTally {
    pub fn gain(&self) -> f64 {
        if self.sent == 0 { 0.0 } else { self.detected as f64 / self.sent as f64 }
    }

    pub fn error_rate(&self) -> f64 {
        if self.sifted == 0 { 0.0 } else { self.errors as f64 / self.sifted as f64 }
    }
}

/// Tallies for all three intensity classes.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct BlockTallies {
    pub mu: ClassTally,
    pub nu: ClassTally,
    pub omega: ClassTally,
}

/// Observations worst-cased by `n_sigma` binomial deviations, directions
/// chosen adversarially per term of the decoy bounds: gains that certify
/// yield shift down, the signal gain and error terms shift up, and the
/// vacuum yield carries both one-sided values because it enters the yield
/// bound and the error bound with opposite signs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdjustedObservations {
    pub q_mu_high: f64,
    pub q_nu_low: f64,
    pub y0_high: f64,
    pub y0_low: f64,
    /// Error gain `E_nu * Q_nu`, shifted up.
    pub m_nu_high: f64,
    /// Measured values pass through for the rate formula.
    pub q_mu_measured: f64,
    pub e_mu_measured: f64,
}

fn binomial_sigma(p: f64, n: f64) -> f64 {
    if n <= 0.0 {
        return 0.0;
    }
    math::sqrt((p * (1.0 - p)).max(0.0) / n)
}

/// Replace measured gains/errors with their worst-case `n_sigma` deviations.
///
/// With `n_sigma = 0` the adjusted values equal the measured ones. Errors out
/// when the window holds fewer sifted signal bits than the protocol block
/// size.
pub fn finite_size_adjust(
    tallies: &BlockTallies,
    protocol: &DecoyParams,
) -> Result<AdjustedObservations, KeyRateError> {
    if tallies.mu.sifted < protocol.block_size_bits {
        return Err(KeyRateError::InsufficientStatistics {
            have: tallies.mu.sifted,
            need: protocol.block_size_bits,
        });
    }
    Ok(adjust_from_expectations(
        &GainObservations {
            q_mu: tallies.mu.gain(),
            q_nu: tallies.nu.gain(),
            q_omega: tallies.omega.gain(),
        },
        tallies.mu.error_rate(),
        tallies.nu.error_rate(),
        tallies.mu.sent as f64,
        tallies.nu.sent as f64,
        tallies.omega.sent as f64,
        protocol.n_sigma,
    ))
}

/// Worst-case adjustment from expected rates and per-class trial counts.
/// Shared by the measured-tally path and the analytic evaluation path.
pub fn adjust_from_expectations(
    gains: &GainObservations,
    e_mu: f64,
    e_nu: f64,
    n_mu: f64,
    n_nu: f64,
    n_omega: f64,
    n_sigma: f64,
) -> AdjustedObservations {
    let m_nu = e_nu * gains.q_nu;
    let s_qmu = binomial_sigma(gains.q_mu, n_mu);
    let s_qnu = binomial_sigma(gains.q_nu, n_nu);
    let s_y0 = binomial_sigma(gains.q_omega, n_omega);
    let s_mnu = binomial_sigma(m_nu, n_nu);
    AdjustedObservations {
        q_mu_high: (gains.q_mu + n_sigma * s_qmu).min(1.0),
        q_nu_low: (gains.q_nu - n_sigma * s_qnu).max(0.0),
        y0_high: (gains.q_omega + n_sigma * s_y0).min(1.0),
        y0_low: (gains.q_omega - n_sigma * s_y0).max(0.0),
        m_nu_high: (m_nu + n_sigma * s_mnu).min(1.0),
        q_mu_measured: gains.q_mu,
        e_mu_measured: e_mu,
    }
}

/// Decoy bounds from worst-cased observations. The yield bound uses the high
/// vacuum yield; the error bound subtracts the low one.
pub fn worst_case_bounds(adj: &AdjustedObservations, protocol: &DecoyParams) -> DecoyBounds {
    let base = decoy_bounds(
        &GainObservations {
            q_mu: adj.q_mu_high,
            q_nu: adj.q_nu_low,
            q_omega: adj.y0_high,
        },
        &ErrorObservations { e_mu: adj.e_mu_measured, e_nu: 0.0 },
        protocol,
    );
    if !base.feasible {
        return base;
    }
    let e1 = (adj.m_nu_high * math::exp(protocol.nu) - 0.5 * adj.y0_low)
        / (base.y1_lower * protocol.nu);
    DecoyBounds {
        y1_lower: base.y1_lower,
        e1_upper: e1.clamp(0.0, 1.0),
        feasible: true,
    }
}

/// Inputs to the rate formula besides the protocol constants.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateInputs {
    pub q_mu: f64,
    pub e_mu: f64,
    pub y1_lower: f64,
    pub e1_upper: f64,
    /// `N_actual / N_mu` saturation factor from the detector model.
    pub dead_time_factor: f64,
}

/// Secure key rate, bps:
///
/// `R = sift * rep_eff * P_mu * [ -Q_mu f_ec H2(E_mu) + Q1_lower (1 - H2(e1_upper)) ]`
///
/// with `Q1_lower = Y1_lower * mu * e^(-mu)` and
/// `rep_eff = rep_rate * dead_time_factor * duty_factor`. Negative rates
/// clamp to zero.
pub fn secure_key_rate(inputs: &RateInputs, protocol: &DecoyParams) -> f64 {
    let q1_lower = inputs.y1_lower * protocol.mu * math::exp(-protocol.mu);
    let pa_term = if inputs.e1_upper >= 0.5 {
        0.0
    } else {
        q1_lower * (1.0 - math::binary_entropy(inputs.e1_upper))
    };
    let ec_term = inputs.q_mu * protocol.f_ec * math::binary_entropy(inputs.e_mu.min(0.5));
    let rep_eff = protocol.rep_rate_hz * inputs.dead_time_factor * protocol.duty_factor;
    let rate = protocol.sift_factor * rep_eff * protocol.p_mu * (pa_term - ec_term);
    rate.max(0.0)
}

/// Per-slot channel expectations for a loss/noise working point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChannelExpectation {
    /// Combined transmittance * detector efficiency.
    pub eta_tot: f64,
    /// Background click probability per pulse slot.
    pub y0: f64,
    pub gains: GainObservations,
    pub e_mu: f64,
    pub e_nu: f64,
    /// Pooled detection rate before dead time, cps.
    pub n_mu_cps: f64,
    /// Pooled detection rate after dead time, cps.
    pub n_actual_cps: f64,
    pub dead_time_factor: f64,
}

/// Expected gains and error rates for a link with the given detected noise.
pub fn channel_expectation(
    loss_db: f64,
    detected_noise_cps: f64,
    det: &DetectorSpec,
    protocol: &DecoyParams,
) -> ChannelExpectation {
    let eta_tot = det.efficiency * math::db_to_linear(-loss_db);
    let y0 = detected_noise_cps / protocol.rep_rate_hz;
    let p_mu = -math::expm1(-protocol.mu * eta_tot);
    let p_nu = -math::expm1(-protocol.nu * eta_tot);
    let q_mu = 1.0 - (1.0 - y0) * (1.0 - p_mu);
    let q_nu = 1.0 - (1.0 - y0) * (1.0 - p_nu);
    let e_mu = if q_mu > 0.0 {
        (protocol.e_d * p_mu * (1.0 - y0) + 0.5 * y0) / q_mu
    } else {
        0.0
    };
    let e_nu = if q_nu > 0.0 {
        (protocol.e_d * p_nu * (1.0 - y0) + 0.5 * y0) / q_nu
    } else {
        0.0
    };
    let n_mu_cps = detector::expected_signal_rate(loss_db, protocol, det);
    let n_actual_cps = detector::apply_dead_time(n_mu_cps, det);
    let dead_time_factor = if n_mu_cps > 0.0 { n_actual_cps / n_mu_cps } else { 1.0 };
    ChannelExpectation {
        eta_tot,
        y0,
        gains: GainObservations { q_mu, q_nu, q_omega: y0 },
        e_mu,
        e_nu,
        n_mu_cps,
        n_actual_cps,
        dead_time_factor,
    }
}

/// Ground-truth single-photon yield of the expectation channel.
pub fn y1_true(exp: &ChannelExpectation) -> f64 {
    1.0 - (1.0 - exp.y0) * (1.0 - exp.eta_tot)
}

/// Ground-truth single-photon error rate of the expectation channel.
pub fn e1_true(exp: &ChannelExpectation, protocol: &DecoyParams) -> f64 {
    let y1 = y1_true(exp);
    (protocol.e_d * exp.eta_tot * (1.0 - exp.y0) + 0.5 * exp.y0) / y1
}

/// Trial counts per class for an estimation window sized to accumulate the
/// protocol block of sifted signal bits.
pub fn estimation_window_trials(exp: &ChannelExpectation, protocol: &DecoyParams) -> (f64, f64, f64) {
    let sifted_per_pulse =
        protocol.p_mu * exp.gains.q_mu * exp.dead_time_factor * protocol.sift_factor;
    let n_pulse = protocol.block_size_bits as f64 / sifted_per_pulse;
    (
        n_pulse * protocol.p_mu * exp.dead_time_factor,
        n_pulse * protocol.p_nu * exp.dead_time_factor,
        n_pulse * protocol.p_omega * exp.dead_time_factor,
    )
}

/// Analytic evaluation of one working point: expectations -> worst-case
/// bounds -> rate and feasibility.
pub fn evaluate_point(
    loss_db: f64,
    detected_noise_without_afterpulse_cps: f64,
    noise_budget: NoiseBudget,
    det: &DetectorSpec,
    protocol: &DecoyParams,
) -> KeyRateReport {
    // Afterpulse feedback: rate depends on N_actual, which is noise-free
    // to first order (signal dominates detections).
    let n_mu = detector::expected_signal_rate(loss_db, protocol, det);
    let n_actual = detector::apply_dead_time(n_mu, det);
    let n_after = detector::afterpulse_rate(n_actual, det);
    let detected_noise = detected_noise_without_afterpulse_cps + n_after;
    let exp = channel_expectation(loss_db, detected_noise, det, protocol);

    let budget = NoiseBudget {
        n_after_cps: n_after,
        ..noise_budget
    };
    let qsnr_db = qsnr(exp.n_actual_cps, &budget, det, protocol);

    let (n_mu_trials, n_nu_trials, n_om_trials) = estimation_window_trials(&exp, protocol);
    let adj = adjust_from_expectations(
        &exp.gains,
        exp.e_mu,
        exp.e_nu,
        n_mu_trials,
        n_nu_trials,
        n_om_trials,
        protocol.n_sigma,
    );
    let bounds = worst_case_bounds(&adj, protocol);
    let rate = secure_key_rate(
        &RateInputs {
            q_mu: exp.gains.q_mu,
            e_mu: exp.e_mu,
            y1_lower: bounds.y1_lower,
            e1_upper: bounds.e1_upper,
            dead_time_factor: exp.dead_time_factor,
        },
        protocol,
    );
    let feasible = rate > 0.0 && exp.e_mu <= protocol.qber_cap && bounds.feasible;
    KeyRateReport {
        qsnr_db,
        qber: exp.e_mu,
        gain_mu: exp.gains.q_mu,
        y1_lower: bounds.y1_lower,
        e1_upper: bounds.e1_upper,
        rate_bps: rate,
        feasible,
        noise: budget,
        n_actual_cps: exp.n_actual_cps,
    }
}

/// Convenience: bounds from exact expectations at asymptotic statistics.
pub fn asymptotic_bounds(exp: &ChannelExpectation, protocol: &DecoyParams) -> DecoyBounds {
    let adj = adjust_from_expectations(&exp.gains, exp.e_mu, exp.e_nu, 0.0, 0.0, 0.0, 0.0);
    worst_case_bounds(&adj, protocol)
}

pub use sweeps::{sweep_distance_losses, SweepPoint};

mod sweeps {
    use alloc::vec::Vec;

    /// One sweep coordinate with its evaluated report.
    #[derive(Clone, Debug)]
    pub struct SweepPoint<T> {
        pub coordinate: T,
        pub report: super::KeyRateReport,
    }

    /// Losses for a list of lengths given dB/km plus fixed component loss.
    pub fn sweep_distance_losses(att_db_km: f64, fixed_db: f64, lengths: &[f64]) -> Vec<f64> {
        lengths.iter().map(|l| att_db_km * l + fixed_db).collect()
    }
}
