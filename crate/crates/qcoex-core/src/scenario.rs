//! Full coexistence experiment description and evaluation drivers.

use crate::channel::{
    self, CalibrationDirection, ChannelError, ClassicalTrafficSpec, FiberSpec,
    FilterSpec, MuxSpec, NoiseBudget, Wavelength,
};
use crate::detector::{DetectorError, DetectorSpec};
use crate::keyrate::{self, DecoyParams, KeyRateError, KeyRateReport, SweepPoint};
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

/// Which SRS model drives the noise budget.
///
/// The measured-coefficient model is the default at the 66 km reference
/// length; the physical model resolves propagation direction and extrapolates
/// over distance.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Default)]
pub enum SrsModel {
    #[default]
    Paper,
    Physical,
}

impl fmt::Display for SrsModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SrsModel::Paper => "paper",
            SrsModel::Physical => "physical",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ScenarioError {
    Channel(ChannelError),
    Detector(DetectorError),
    KeyRate(KeyRateError),
}

impl fmt::Display for ScenarioError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScenarioError::Channel(e) => write!(f, "{e}"),
            ScenarioError::Detector(e) => write!(f, "{e}"),
            ScenarioError::KeyRate(e) => write!(f, "{e}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for ScenarioError {}

impl From<ChannelError> for ScenarioError {
    fn from(e: ChannelError) -> Self {
        ScenarioError::Channel(e)
    }
}
impl From<DetectorError> for ScenarioError {
    fn from(e: DetectorError) -> Self {
        ScenarioError::Detector(e)
    }
}
impl From<KeyRateError> for ScenarioError {
    fn from(e: KeyRateError) -> Self {
        ScenarioError::KeyRate(e)
    }
}

/// One complete experiment description.
#[derive(Clone, Debug, PartialEq)]
pub struct CoexistenceScenario {
    pub name: String,
    pub fiber: FiberSpec,
    pub traffic: ClassicalTrafficSpec,
    pub filter: FilterSpec,
    pub mux: MuxSpec,
    pub detector: DetectorSpec,
    pub protocol: DecoyParams,
    pub srs_model: SrsModel,
    /// Physical-model coefficient; `None` auto-calibrates the
    /// direction-averaged fit against the fiber's `beta_srs`.
    pub raman_coeff: Option<f64>,
    pub seed: u64,
}

impl CoexistenceScenario {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        self.fiber.validate()?;
        self.traffic.validate()?;
        self.filter.validate()?;
        self.mux.validate()?;
        self.detector.validate()?;
        self.protocol.validate()?;
        Ok(())
    }

    /// End-to-end 1310 nm link loss, dB.
    pub fn link_loss_db(&self) -> Result<f64, ScenarioError> {
        Ok(channel::link_loss(&self.fiber, &self.mux, &self.filter, Wavelength::Q1310)?)
    }

    /// Physical-model coefficient: explicit override or direction-averaged
    /// calibration against the fiber's measured beta.
    pub fn raman_coefficient(&self) -> f64 {
        self.raman_coeff.unwrap_or_else(|| {
            channel::calibrate_raman_coeff(&self.fiber, CalibrationDirection::Averaged)
        })
    }

    /// SRS rate reaching the receiver input, cps, per the selected model.
    /// A zero-length link scatters nothing regardless of model.
    pub fn srs_receiver_rate_cps(&self) -> Result<f64, ScenarioError> {
        if self.fiber.length_km == 0.0 {
            return Ok(0.0);
        }
        Ok(match self.srs_model {
            SrsModel::Paper => channel::srs_rate_paper(&self.fiber, &self.traffic, &self.filter)?,
            SrsModel::Physical => channel::srs_rate_physical(
                &self.fiber,
                &self.traffic,
                &self.filter,
                self.raman_coefficient(),
            )?,
        })
    }

    /// Noise budget as seen at the detectors: the receiver-input SRS flux is
    /// scaled by detector efficiency; dark counts and the measured crosstalk
    /// floor are detected rates already. The afterpulse entry is filled by
    /// the evaluation (it depends on the detection rate).
    pub fn detected_noise_budget(&self) -> Result<NoiseBudget, ScenarioError> {
        let srs = self.srs_receiver_rate_cps()?;
        Ok(NoiseBudget::new(
            srs * self.detector.efficiency,
            self.detector.dark_rate_cps(),
            0.0,
            channel::crosstalk_rate(&self.mux),
        ))
    }

    /// Evaluate this scenario into a key-rate report.
    pub fn evaluate(&self) -> Result<KeyRateReport, ScenarioError> {
        self.validate()?;
        let loss = self.link_loss_db()?;
        let budget = self.detected_noise_budget()?;
        Ok(keyrate::evaluate_point(
            loss,
            budget.total_cps(),
            budget,
            &self.detector,
            &self.protocol,
        ))
    }

    /// Copy with a different launch power.
    pub fn with_power(&self, launch_power_dbm: f64) -> CoexistenceScenario {
        let mut s = self.clone();
        s.traffic.launch_power_dbm = launch_power_dbm;
        s
    }

    /// Copy with a different fiber length. Measured loss totals apply only
    /// to the deployed span and are dropped in favor of coefficient * length.
    pub fn with_length(&self, length_km: f64) -> CoexistenceScenario {
        let mut s = self.clone();
        s.fiber = self.fiber.with_length(length_km);
        s
    }
}

/// One report per launch power, ordered as given.
pub fn sweep_power(
    scenario: &CoexistenceScenario,
    powers_dbm: &[f64],
) -> Result<Vec<SweepPoint<f64>>, ScenarioError> {
    powers_dbm
        .iter()
        .map(|&p| {
            let report = scenario.with_power(p).evaluate()?;
            Ok(SweepPoint { coordinate: p, report })
        })
        .collect()
}

/// One report per fiber length, ordered as given. `srs_model` overrides the
/// scenario's model (the physical model is the meaningful choice away from
/// the calibration length).
pub fn sweep_distance(
    scenario: &CoexistenceScenario,
    lengths_km: &[f64],
    srs_model: SrsModel,
) -> Result<Vec<SweepPoint<f64>>, ScenarioError> {
    // Pin the coefficient at the reference geometry once so every sweep
    // point shares one calibration.
    let mut base = scenario.clone();
    base.srs_model = srs_model;
    if srs_model == SrsModel::Physical && base.raman_coeff.is_none() {
        base.raman_coeff = Some(base.raman_coefficient());
    }
    lengths_km
        .iter()
        .map(|&l| {
            let report = base.with_length(l).evaluate()?;
            Ok(SweepPoint { coordinate: l, report })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::Direction;

    pub(crate) fn scenario(
        fiber: &str,
        power: f64,
        direction: Direction,
        model: SrsModel,
    ) -> CoexistenceScenario {
        CoexistenceScenario {
            name: alloc::format!("{fiber}-{direction}-{power}dBm"),
            fiber: FiberSpec::preset(fiber).unwrap(),
            traffic: ClassicalTrafficSpec::new(power, direction),
            filter: FilterSpec::fbg_20ghz(),
            mux: MuxSpec::default_backbone(),
            detector: DetectorSpec::ingaas_2017(),
            protocol: DecoyParams::default(),
            srs_model: model,
            raman_coeff: None,
            seed: 42,
        }
    }

    #[test]
    fn g654_110_co_headline_band() {
        let r = scenario("g654-110-1", 21.0, Direction::Co, SrsModel::Paper)
            .evaluate()
            .unwrap();
        assert!(r.feasible);
        assert!(r.rate_bps >= 2250.0 && r.rate_bps <= 9000.0, "rate = {}", r.rate_bps);
    }

    #[test]
    fn g652_counter_19dbm_infeasible_physical() {
        let r = scenario("g652-2", 19.0, Direction::Counter, SrsModel::Physical)
            .evaluate()
            .unwrap();
        assert!(!r.feasible, "qber = {}", r.qber);
        let r18 = scenario("g652-2", 18.0, Direction::Counter, SrsModel::Physical)
            .evaluate()
            .unwrap();
        assert!(r18.feasible, "qber = {}", r18.qber);
    }

    #[test]
    fn sweep_power_empty_and_monotone() {
        let s = scenario("g652-1", 21.0, Direction::Co, SrsModel::Paper);
        assert!(sweep_power(&s, &[]).unwrap().is_empty());
        let powers: Vec<f64> = (8..=21).map(|p| p as f64).collect();
        let reports = sweep_power(&s, &powers).unwrap();
        for w in reports.windows(2) {
            assert!(w[1].report.rate_bps <= w[0].report.rate_bps + 1e-9);
        }
    }

    #[test]
    fn sweep_distance_zero_length_is_maximal() {
        let mut s = scenario("g654-110-2", 21.0, Direction::Co, SrsModel::Physical);
        s.mux = MuxSpec::lossless();
        let pts = sweep_distance(&s, &[0.0, 10.0, 40.0, 66.0], SrsModel::Physical).unwrap();
        for w in pts.windows(2) {
            assert!(w[0].report.rate_bps > w[1].report.rate_bps);
        }
        assert!(pts[0].report.noise.n_srs_cps == 0.0);
    }

    #[test]
    fn sweep_distance_uses_coefficient_loss() {
        let s = scenario("g654-110-2", 21.0, Direction::Co, SrsModel::Physical);
        let pts = sweep_distance(&s, &[66.0], SrsModel::Physical).unwrap();
        // coefficient * length (19.008) + 2.80, not the measured 19.03 + 2.80
        let loss = s.with_length(66.0).link_loss_db().unwrap();
        assert!((loss - 21.808).abs() < 1e-9);
        assert!(pts[0].report.feasible);
    }

    #[test]
    fn invalid_scenario_gives_named_diagnostic() {
        let mut s = scenario("g652-1", 21.0, Direction::Co, SrsModel::Paper);
        s.traffic.launch_power_dbm = 30.0;
        let err = s.evaluate().unwrap_err();
        let msg = alloc::format!("{err}");
        assert!(msg.contains("launch_power_dbm"), "{msg}");
    }
}
