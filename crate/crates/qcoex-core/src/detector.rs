//! Single-photon detector model: efficiency, gated dark counts, afterpulsing,
//! and dead-time saturation for a pooled bank of detectors.

use crate::keyrate::DecoyParams;
use crate::math;
use alloc::format;
use alloc::string::{String, ToString};
use core::fmt;

#[derive(Clone, Debug, PartialEq)]
pub enum DetectorError {
    Invalid(String),
}

impl fmt::Display for DetectorError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DetectorError::Invalid(msg) => write!(f, "invalid detector parameter: {msg}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for DetectorError {}

/// Detector bank parameters. Dark counts may be specified per gate (gated
/// InGaAs/InP) or as a free-running cps per detector (SNSPD); at least one
/// must be present.
#[derive(Clone, Debug, PartialEq)]
pub struct DetectorSpec {
    pub name: String,
    /// Detection efficiency at 1310 nm.
    pub efficiency: f64,
    pub dark_per_gate: Option<f64>,
    /// Dark rate per detector, cps (free-running detectors).
    pub dark_cps_per_detector: Option<f64>,
    pub gate_rate_hz: f64,
    pub gate_width_ps: f64,
    pub dead_time_s: f64,
    pub afterpulse_prob: f64,
    pub num_detectors: u32,
}

impl DetectorSpec {
    /// Gated InGaAs/InP bank: 1.25 GHz gating, 11% efficiency, 3e-7 dark
    /// counts per gate, 180 ps effective gate, 1 us dead time, 0.5%
    /// afterpulse probability.
    pub fn ingaas_2017() -> Self {
        DetectorSpec {
            name: "ingaas-2017".to_string(),
            efficiency: 0.11,
            dark_per_gate: Some(3e-7),
            dark_cps_per_detector: None,
            gate_rate_hz: 1.25e9,
            gate_width_ps: 180.0,
            dead_time_s: 1e-6,
            afterpulse_prob: 0.005,
            num_detectors: 4,
        }
    }

    /// Free-running SNSPD bank: 45% efficiency at 1310 nm, 30 cps dark rate
    /// per detector, negligible dead time and afterpulsing.
    pub fn snspd_lab() -> Self {
        DetectorSpec {
            name: "snspd-lab".to_string(),
            efficiency: 0.45,
            dark_per_gate: None,
            dark_cps_per_detector: Some(30.0),
            gate_rate_hz: 0.0,
            gate_width_ps: 0.0,
            dead_time_s: 0.0,
            afterpulse_prob: 0.0,
            num_detectors: 4,
        }
    }

    pub fn preset(name: &str) -> Option<DetectorSpec> {
        match name {
            "ingaas-2017" => Some(Self::ingaas_2017()),
            "snspd-lab" => Some(Self::snspd_lab()),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<(), DetectorError> {
        if !(self.efficiency > 0.0 && self.efficiency <= 1.0) {
            return Err(DetectorError::Invalid(format!(
                "detector.efficiency = {} (must be in (0, 1])",
                self.efficiency
            )));
        }
        if !(self.afterpulse_prob >= 0.0 && self.afterpulse_prob < 1.0) {
            return Err(DetectorError::Invalid(format!(
                "detector.afterpulse_prob = {} (must be in [0, 1))",
                self.afterpulse_prob
            )));
        }
        if self.dead_time_s < 0.0 {
            return Err(DetectorError::Invalid(format!(
                "detector.dead_time_s = {} (must be >= 0)",
                self.dead_time_s
            )));
        }
        if self.num_detectors == 0 {
            return Err(DetectorError::Invalid("detector.num_detectors = 0".to_string()));
        }
        if self.dark_per_gate.is_none() && self.dark_cps_per_detector.is_none() {
            return Err(DetectorError::Invalid(
                "one of detector.dark_per_gate / detector.dark_cps must be given".to_string(),
            ));
        }
        if self.dark_per_gate.is_some() && self.gate_rate_hz <= 0.0 {
            return Err(DetectorError::Invalid(
                "detector.gate_rate_hz must be > 0 when dark_per_gate is used".to_string(),
            ));
        }
        Ok(())
    }

    /// Total dark count rate of the bank, cps, summed over all detectors.
    pub fn dark_rate_cps(&self) -> f64 {
        match (self.dark_per_gate, self.dark_cps_per_detector) {
            (Some(per_gate), _) => per_gate * self.gate_rate_hz * self.num_detectors as f64,
            (None, Some(cps)) => cps * self.num_detectors as f64,
            (None, None) => 0.0,
        }
    }
}

/// Expected pooled detection rate before dead time, cps:
///
/// `N_mu = rep_rate * sum_state P_state * (1 - e^(-intensity * T * eta))`
///
/// with `T = 10^(-loss/10)` the channel transmittance.
pub fn expected_signal_rate(loss_db: f64, protocol: &DecoyParams, det: &DetectorSpec) -> f64 {
    debug_assert!(loss_db >= 0.0);
    let eta = det.efficiency * math::db_to_linear(-loss_db);
    let mut rate = 0.0;
    for (p_state, intensity) in [
        (protocol.p_mu, protocol.mu),
        (protocol.p_nu, protocol.nu),
        (protocol.p_omega, protocol.omega),
    ] {
        rate += p_state * (-math::expm1(-intensity * eta));
    }
    protocol.rep_rate_hz * rate
}

/// Dead-time saturation: `N_actual = N_mu / (1 + N_mu * t_dead / num_detectors)`.
pub fn apply_dead_time(n_mu_cps: f64, det: &DetectorSpec) -> f64 {
    debug_assert!(n_mu_cps >= 0.0);
    n_mu_cps / (1.0 + n_mu_cps * det.dead_time_s / det.num_detectors as f64)
}

/// Afterpulse count rate: `N_after = N_actual * P_after`.
pub fn afterpulse_rate(n_actual_cps: f64, det: &DetectorSpec) -> f64 {
    debug_assert!(n_actual_cps >= 0.0);
    n_actual_cps * det.afterpulse_prob
}
