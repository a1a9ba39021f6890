//! Shared-fiber link model: wavelength-dependent attenuation, WDM component
//! losses, pass-band filtering, and spontaneous Raman scattering (SRS) noise.
//!
//! Two SRS models are provided:
//!
//! - [`srs_rate_paper`]: the measured-coefficient model `beta * P_dBm * L`,
//!   normalized to a 20 GHz pass-band. It is direction-symmetric (the
//!   coefficients were fitted as an average over both propagation directions)
//!   and is the default at the 66 km reference length.
//! - [`srs_rate_physical`]: pump-depletion geometry with distinct
//!   co-propagation (`K * P_mW * L * e^(-aL)`) and counter-propagation
//!   (`K * P_mW * (1 - e^(-2aL)) / 2a`) shapes, where `a` averages the pump
//!   (1550 nm) and scattered-photon (1310 nm) attenuation coefficients. Use
//!   this one for direction-dependent effects and distance extrapolation;
//!   calibrate `K` against the measured coefficients with
//!   [`calibrate_raman_coeff`].

use crate::math;
use alloc::format;
use alloc::string::{String, ToString};
use core::fmt;

/// Wavelengths carried on the shared fiber that this model resolves.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Wavelength {
    /// 1310 nm quantum channel.
    Q1310,
    /// 1550 nm band classical data channels.
    C1550,
}

/// Classical traffic propagation direction relative to the QKD signal.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Direction {
    Co,
    Counter,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Co => "co",
            Direction::Counter => "counter",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ChannelError {
    /// Field failed a model invariant; carries the field name and constraint.
    Invalid(String),
}

impl fmt::Display for ChannelError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ChannelError::Invalid(msg) => write!(f, "invalid channel parameter: {msg}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for ChannelError {}

/// Per-fiber optical constants.
///
/// `measured_total_*` are end-to-end loss measurements of the deployed link
/// (splices and connectors included) and override `att * length` when the
/// fiber is used at its reference length.
#[derive(Clone, Debug, PartialEq)]
pub struct FiberSpec {
    pub name: String,
    /// dB/km at 1310 nm.
    pub att_1310_db_km: f64,
    /// dB/km at 1550 nm.
    pub att_1550_db_km: f64,
    pub length_km: f64,
    pub measured_total_1310_db: Option<f64>,
    pub measured_total_1550_db: Option<f64>,
    /// Effective core area, um^2.
    pub aeff_um2: f64,
    /// SRS coefficient, cps/(dBm km) per 20 GHz pass-band.
    pub beta_srs: f64,
}

/// Splice/connector allowance for measured totals vs coefficient * length.
pub const SPLICE_ALLOWANCE_DB: f64 = 0.5;

impl FiberSpec {
    pub fn validate(&self) -> Result<(), ChannelError> {
        if !(self.length_km >= 0.0) {
            return Err(ChannelError::Invalid(format!(
                "fiber.length_km = {} (must be >= 0)",
                self.length_km
            )));
        }
        if !(self.att_1310_db_km > self.att_1550_db_km && self.att_1550_db_km > 0.0) {
            return Err(ChannelError::Invalid(format!(
                "fiber attenuation must satisfy att_1310 > att_1550 > 0 (got {} / {})",
                self.att_1310_db_km, self.att_1550_db_km
            )));
        }
        if !(self.beta_srs > 0.0) {
            return Err(ChannelError::Invalid(format!(
                "fiber.beta_srs = {} (must be > 0)",
                self.beta_srs
            )));
        }
        for (field, measured, att) in [
            ("total_loss_1310", self.measured_total_1310_db, self.att_1310_db_km),
            ("total_loss_1550", self.measured_total_1550_db, self.att_1550_db_km),
        ] {
            if let Some(m) = measured {
                let coeff = att * self.length_km;
                if (m - coeff).abs() > SPLICE_ALLOWANCE_DB {
                    return Err(ChannelError::Invalid(format!(
                        "fiber.{field} = {m} dB deviates from att*length = {coeff:.3} dB by more \
                         than the {SPLICE_ALLOWANCE_DB} dB splice allowance"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Fiber-only loss at `wavelength`: measured override when present,
    /// otherwise coefficient * length.
    pub fn fiber_loss_db(&self, wavelength: Wavelength) -> f64 {
        match wavelength {
            Wavelength::Q1310 => self
                .measured_total_1310_db
                .unwrap_or(self.att_1310_db_km * self.length_km),
            Wavelength::C1550 => self
                .measured_total_1550_db
                .unwrap_or(self.att_1550_db_km * self.length_km),
        }
    }

    /// Copy rescaled to a different length for distance sweeps. Measured
    /// totals apply to the deployed span only, so they are dropped and the
    /// loss reverts to coefficient * length.
    pub fn with_length(&self, length_km: f64) -> FiberSpec {
        FiberSpec {
            length_km,
            measured_total_1310_db: None,
            measured_total_1550_db: None,
            name: self.name.clone(),
            ..*self
        }
    }

    /// Mean of pump (1550 nm) and scattered (1310 nm) attenuation, nepers/km.
    pub fn mean_attenuation_nepers(&self) -> f64 {
        0.5 * (self.att_1310_db_km + self.att_1550_db_km) / math::DB_PER_NEPER
    }

    /// Bundled field-fiber presets plus the synthetic fibers used by the
    /// simulation matrix (`table2-std-*`, `table2-lowloss-*`).
    pub fn preset(name: &str) -> Option<FiberSpec> {
        let f = |name: &str, a1550, a1310, t1550, t1310, aeff, beta| FiberSpec {
            name: name.to_string(),
            att_1310_db_km: a1310,
            att_1550_db_km: a1550,
            length_km: 66.0,
            measured_total_1310_db: Some(t1310),
            measured_total_1550_db: Some(t1550),
            aeff_um2: aeff,
            beta_srs: beta,
        };
        Some(match name {
            "g652-1" => f("g652-1", 0.197, 0.337, 13.01, 22.21, 80.0, 18.0),
            "g652-2" => f("g652-2", 0.196, 0.338, 12.94, 22.29, 80.0, 18.0),
            "g654-110-1" => f("g654-110-1", 0.184, 0.300, 12.13, 19.83, 110.0, 10.0),
            "g654-110-2" => f("g654-110-2", 0.174, 0.288, 11.51, 19.03, 110.0, 10.0),
            "g654-130-1" => f("g654-130-1", 0.210, 0.347, 13.84, 22.88, 130.0, 8.0),
            "g654-130-2" => f("g654-130-2", 0.208, 0.348, 13.73, 22.95, 130.0, 8.0),
            _ => {
                // synthetic fibers: "table2-<class>-<aeff>"
                let rest = name.strip_prefix("table2-")?;
                let (class, aeff_s) = rest.split_once('-')?;
                let aeff: f64 = aeff_s.parse().ok()?;
                let beta = beta_for_aeff(aeff)?;
                let (a1550, a1310) = match class {
                    "std" => (0.197, 0.337),
                    "lowloss" => (0.174, 0.288),
                    _ => return None,
                };
                FiberSpec {
                    name: name.to_string(),
                    att_1310_db_km: a1310,
                    att_1550_db_km: a1550,
                    length_km: 66.0,
                    measured_total_1310_db: None,
                    measured_total_1550_db: None,
                    aeff_um2: aeff,
                    beta_srs: beta,
                }
            }
        })
    }

    pub fn preset_names() -> &'static [&'static str] {
        &[
            "g652-1",
            "g652-2",
            "g654-110-1",
            "g654-110-2",
            "g654-130-1",
            "g654-130-2",
        ]
    }
}

/// Measured SRS coefficient for each effective core area class.
pub fn beta_for_aeff(aeff_um2: f64) -> Option<f64> {
    match aeff_um2 as u64 {
        80 => Some(18.0),
        110 => Some(10.0),
        130 => Some(8.0),
        _ => None,
    }
}

/// Classical channel description. Launch power is the total aggregate power
/// across all WDM data channels.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassicalTrafficSpec {
    pub launch_power_dbm: f64,
    pub direction: Direction,
    /// Data band, nm.
    pub band_nm: (f64, f64),
    /// Informational label, e.g. "3.6 Tbps".
    pub aggregate_rate: String,
}

pub const LAUNCH_POWER_MIN_DBM: f64 = 8.0;
pub const LAUNCH_POWER_MAX_DBM: f64 = 21.0;

impl ClassicalTrafficSpec {
    pub fn new(launch_power_dbm: f64, direction: Direction) -> Self {
        ClassicalTrafficSpec {
            launch_power_dbm,
            direction,
            band_nm: (1528.0, 1538.0),
            aggregate_rate: "3.6 Tbps".to_string(),
        }
    }

    pub fn validate(&self) -> Result<(), ChannelError> {
        if self.launch_power_dbm < LAUNCH_POWER_MIN_DBM
            || self.launch_power_dbm > LAUNCH_POWER_MAX_DBM
        {
            return Err(ChannelError::Invalid(format!(
                "traffic.launch_power_dbm = {} (valid range {}..{})",
                self.launch_power_dbm, LAUNCH_POWER_MIN_DBM, LAUNCH_POWER_MAX_DBM
            )));
        }
        Ok(())
    }
}

/// Receiver pass-band filter in front of the detectors.
///
/// For the bundled receiver the filter sits inside the De-MUL module and its
/// insertion loss is already part of `MuxSpec::demul_loss_1310_db`, so
/// `insertion_loss_db` here is informational; the pass-band only scales the
/// accepted SRS noise.
#[derive(Clone, Debug, PartialEq)]
pub struct FilterSpec {
    pub passband_ghz: f64,
    pub insertion_loss_db: f64,
    pub center_wavelength_nm: f64,
}

impl FilterSpec {
    /// 20 GHz temperature-compensated FBG + circulator.
    pub fn fbg_20ghz() -> Self {
        FilterSpec {
            passband_ghz: 20.0,
            insertion_loss_db: 1.9,
            center_wavelength_nm: 1310.0,
        }
    }

    /// 100 GHz DWDM-style filter.
    pub fn dwdm_100ghz() -> Self {
        FilterSpec {
            passband_ghz: 100.0,
            insertion_loss_db: 0.5,
            center_wavelength_nm: 1310.0,
        }
    }

    pub fn validate(&self) -> Result<(), ChannelError> {
        if !(self.passband_ghz > 0.0) {
            return Err(ChannelError::Invalid(format!(
                "filter.passband_ghz = {} (must be > 0)",
                self.passband_ghz
            )));
        }
        if self.insertion_loss_db < 0.0 {
            return Err(ChannelError::Invalid(format!(
                "filter.insertion_loss_db = {} (must be >= 0)",
                self.insertion_loss_db
            )));
        }
        Ok(())
    }
}

/// WDM multiplexing (transmitter) and de-multiplexing (receiver) modules.
///
/// `demul_loss_1310_db` is the complete receiver-side 1310 nm loss including
/// the pass-band filter and circulator.
#[derive(Clone, Debug, PartialEq)]
pub struct MuxSpec {
    pub mul_loss_1310_db: f64,
    pub mul_loss_1550_db: f64,
    pub demul_loss_1310_db: f64,
    pub demul_loss_1550_db: f64,
    pub isolation_mul_db: f64,
    pub isolation_demul_db: f64,
    /// Residual classical-to-quantum crosstalk floor at the detectors, cps.
    pub crosstalk_floor_cps: f64,
}

impl MuxSpec {
    /// Backbone coexistence modules.
    pub fn default_backbone() -> Self {
        MuxSpec {
            mul_loss_1310_db: 0.30,
            mul_loss_1550_db: 0.86,
            demul_loss_1310_db: 2.50,
            demul_loss_1550_db: 0.87,
            isolation_mul_db: 50.0,
            isolation_demul_db: 120.0,
            crosstalk_floor_cps: 60.0,
        }
    }

    /// Ideal components for boundary tests.
    pub fn lossless() -> Self {
        MuxSpec {
            mul_loss_1310_db: 0.0,
            mul_loss_1550_db: 0.0,
            demul_loss_1310_db: 0.0,
            demul_loss_1550_db: 0.0,
            isolation_mul_db: f64::INFINITY,
            isolation_demul_db: f64::INFINITY,
            crosstalk_floor_cps: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), ChannelError> {
        for (name, v) in [
            ("mul_loss_1310_db", self.mul_loss_1310_db),
            ("mul_loss_1550_db", self.mul_loss_1550_db),
            ("demul_loss_1310_db", self.demul_loss_1310_db),
            ("demul_loss_1550_db", self.demul_loss_1550_db),
        ] {
            if v < 0.0 {
                return Err(ChannelError::Invalid(format!("mux.{name} = {v} (must be >= 0)")));
            }
        }
        if self.crosstalk_floor_cps < 0.0 {
            return Err(ChannelError::Invalid(format!(
                "mux.crosstalk_floor_cps = {} (must be >= 0)",
                self.crosstalk_floor_cps
            )));
        }
        Ok(())
    }
}

/// Per-source noise count rates at the QKD detectors, cps.
///
/// Four-wave mixing and Brillouin scattering are negligible for a 1310/1550
/// channel plan and are carried only as a fixed zero placeholder.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct NoiseBudget {
    pub n_srs_cps: f64,
    pub n_dark_cps: f64,
    pub n_after_cps: f64,
    pub n_crosstalk_cps: f64,
    pub n_fwm_brillouin_cps: f64,
}

impl NoiseBudget {
    pub fn new(n_srs_cps: f64, n_dark_cps: f64, n_after_cps: f64, n_crosstalk_cps: f64) -> Self {
        NoiseBudget {
            n_srs_cps,
            n_dark_cps,
            n_after_cps,
            n_crosstalk_cps,
            n_fwm_brillouin_cps: 0.0,
        }
    }

    pub fn total_cps(&self) -> f64 {
        self.n_srs_cps + self.n_dark_cps + self.n_after_cps + self.n_crosstalk_cps
            + self.n_fwm_brillouin_cps
    }

    pub fn validate(&self) -> Result<(), ChannelError> {
        for (name, v) in [
            ("n_srs_cps", self.n_srs_cps),
            ("n_dark_cps", self.n_dark_cps),
            ("n_after_cps", self.n_after_cps),
            ("n_crosstalk_cps", self.n_crosstalk_cps),
        ] {
            if !(v >= 0.0) {
                return Err(ChannelError::Invalid(format!("noise.{name} = {v} (must be >= 0)")));
            }
        }
        if self.n_fwm_brillouin_cps != 0.0 {
            return Err(ChannelError::Invalid(
                "noise.n_fwm_brillouin_cps must stay 0 (placeholder)".to_string(),
            ));
        }
        Ok(())
    }
}

/// End-to-end link loss at `wavelength`: fiber total + MUL + De-MUL.
///
/// The pass-band filter is not added separately: its insertion loss is part
/// of the De-MUL composite figure (see [`FilterSpec`]). `filter` participates
/// for validation only.
pub fn link_loss(
    fiber: &FiberSpec,
    mux: &MuxSpec,
    filter: &FilterSpec,
    wavelength: Wavelength,
) -> Result<f64, ChannelError> {
    fiber.validate()?;
    mux.validate()?;
    filter.validate()?;
    let (mul, demul) = match wavelength {
        Wavelength::Q1310 => (mux.mul_loss_1310_db, mux.demul_loss_1310_db),
        Wavelength::C1550 => (mux.mul_loss_1550_db, mux.demul_loss_1550_db),
    };
    Ok(fiber.fiber_loss_db(wavelength) + mul + demul)
}

/// Measured-coefficient SRS model: `beta * P_dBm * L * (passband / 20 GHz)`,
/// clamped at zero. Direction-symmetric by construction.
pub fn srs_rate_paper(
    fiber: &FiberSpec,
    traffic: &ClassicalTrafficSpec,
    filter: &FilterSpec,
) -> Result<f64, ChannelError> {
    traffic.validate()?;
    filter.validate()?;
    let rate = fiber.beta_srs * traffic.launch_power_dbm * fiber.length_km
        * (filter.passband_ghz / 20.0);
    Ok(rate.max(0.0))
}

/// Co-propagation geometry factor `L * e^(-aL)`, km.
pub fn srs_geometry_co_km(mean_att_nepers: f64, length_km: f64) -> f64 {
    length_km * math::exp(-mean_att_nepers * length_km)
}

/// Counter-propagation geometry factor `(1 - e^(-2aL)) / 2a`, km.
pub fn srs_geometry_counter_km(mean_att_nepers: f64, length_km: f64) -> f64 {
    let x = 2.0 * mean_att_nepers * length_km;
    if x < 1e-9 {
        // Series limit: equals L as attenuation vanishes.
        length_km * (1.0 - 0.5 * x)
    } else {
        -math::expm1(-x) / (2.0 * mean_att_nepers)
    }
}

/// Pump-geometry SRS model with mW-linear power dependence.
///
/// `raman_coeff` has units cps/(mW km); forward noise decays with the far
/// span while backward noise integrates to a saturating level, so
/// counter >= co for every length at fixed coefficient.
pub fn srs_rate_physical(
    fiber: &FiberSpec,
    traffic: &ClassicalTrafficSpec,
    filter: &FilterSpec,
    raman_coeff: f64,
) -> Result<f64, ChannelError> {
    traffic.validate()?;
    filter.validate()?;
    if !(raman_coeff > 0.0) {
        return Err(ChannelError::Invalid(format!(
            "raman_coeff = {raman_coeff} (must be > 0)"
        )));
    }
    if !(fiber.length_km > 0.0) {
        return Err(ChannelError::Invalid(format!(
            "fiber.length_km = {} (physical SRS model needs length > 0)",
            fiber.length_km
        )));
    }
    let abar = fiber.mean_attenuation_nepers();
    let geometry = match traffic.direction {
        Direction::Co => srs_geometry_co_km(abar, fiber.length_km),
        Direction::Counter => srs_geometry_counter_km(abar, fiber.length_km),
    };
    Ok(raman_coeff * math::dbm_to_mw(traffic.launch_power_dbm) * geometry
        * (filter.passband_ghz / 20.0))
}

/// Residual classical-to-quantum crosstalk, cps. Much lower than typical
/// dark count rates; kept in the budget for completeness.
pub fn crosstalk_rate(mux: &MuxSpec) -> f64 {
    mux.crosstalk_floor_cps
}

/// Geometry choice for [`calibrate_raman_coeff`].
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum CalibrationDirection {
    Co,
    Counter,
    /// Both directions weighted equally, matching how the measured
    /// coefficients were fitted. This is what scenario evaluation uses.
    Averaged,
}

/// Launch powers (integer dBm grid) over which the coefficient fit averages.
pub fn calibration_power_grid_dbm() -> impl Iterator<Item = f64> {
    (8..=21).map(|p| p as f64)
}

/// Fit the physical model's coefficient `K` so that its power-and-length
/// normalized average over the 8..21 dBm grid equals the fiber's measured
/// `beta_srs`:
///
/// `mean_P [ K * 10^(P/10) * g(L) / (P * L) ] = beta`
pub fn calibrate_raman_coeff(fiber: &FiberSpec, direction: CalibrationDirection) -> f64 {
    let abar = fiber.mean_attenuation_nepers();
    let l = fiber.length_km;
    let g = match direction {
        CalibrationDirection::Co => srs_geometry_co_km(abar, l),
        CalibrationDirection::Counter => srs_geometry_counter_km(abar, l),
        CalibrationDirection::Averaged => {
            0.5 * (srs_geometry_co_km(abar, l) + srs_geometry_counter_km(abar, l))
        }
    };
    let mut sum = 0.0;
    let mut n = 0u32;
    for p in calibration_power_grid_dbm() {
        sum += math::dbm_to_mw(p) / p;
        n += 1;
    }
    let mean = sum / n as f64;
    fiber.beta_srs * l / (g * mean)
}

/// Residual of a calibrated coefficient against the target beta, relative.
pub fn calibration_residual(fiber: &FiberSpec, direction: CalibrationDirection, k: f64) -> f64 {
    let traffic_dir = match direction {
        CalibrationDirection::Counter => Direction::Counter,
        _ => Direction::Co,
    };
    let filter = FilterSpec::fbg_20ghz();
    let mut sum = 0.0;
    let mut n = 0u32;
    for p in calibration_power_grid_dbm() {
        let traffic = ClassicalTrafficSpec::new(p, traffic_dir);
        let rate = match direction {
            CalibrationDirection::Averaged => {
                let co = srs_rate_physical(fiber, &ClassicalTrafficSpec::new(p, Direction::Co), &filter, k)
                    .unwrap_or(0.0);
                let cnt = srs_rate_physical(
                    fiber,
                    &ClassicalTrafficSpec::new(p, Direction::Counter),
                    &filter,
                    k,
                )
                .unwrap_or(0.0);
                0.5 * (co + cnt)
            }
            _ => srs_rate_physical(fiber, &traffic, &filter, k).unwrap_or(0.0),
        };
        sum += rate / (p * fiber.length_km);
        n += 1;
    }
    let mean_beta = sum / n as f64;
    (mean_beta - fiber.beta_srs) / fiber.beta_srs
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fbg() -> FilterSpec {
        FilterSpec::fbg_20ghz()
    }

    #[test]
    fn presets_validate_and_order() {
        for name in FiberSpec::preset_names() {
            let f = FiberSpec::preset(name).unwrap();
            f.validate().unwrap();
            assert!(f.att_1310_db_km > f.att_1550_db_km);
            assert!([80.0, 110.0, 130.0].contains(&f.aeff_um2));
        }
    }

    #[test]
    fn link_loss_g654_110_2_at_1310() {
        let fiber = FiberSpec::preset("g654-110-2").unwrap();
        let loss = link_loss(&fiber, &MuxSpec::default_backbone(), &fbg(), Wavelength::Q1310)
            .unwrap();
        // 19.03 + 0.30 + 2.50
        assert!((loss - 21.83).abs() < 1e-12, "loss = {loss}");
    }

    #[test]
    fn link_loss_g652_1_at_1550() {
        let fiber = FiberSpec::preset("g652-1").unwrap();
        let loss = link_loss(&fiber, &MuxSpec::default_backbone(), &fbg(), Wavelength::C1550)
            .unwrap();
        // 13.01 + 0.86 + 0.87
        assert!((loss - 14.74).abs() < 1e-12, "loss = {loss}");
    }

    #[test]
    fn link_loss_zero_length_lossless() {
        let mut fiber = FiberSpec::preset("g652-1").unwrap().with_length(0.0);
        fiber.measured_total_1310_db = None;
        fiber.measured_total_1550_db = None;
        let loss = link_loss(&fiber, &MuxSpec::lossless(), &fbg(), Wavelength::Q1310).unwrap();
        assert_eq!(loss, 0.0);
    }

    #[test]
    fn link_loss_rejects_negative_length() {
        let fiber = FiberSpec::preset("g652-1").unwrap().with_length(-1.0);
        assert!(link_loss(&fiber, &MuxSpec::default_backbone(), &fbg(), Wavelength::Q1310).is_err());
    }

    #[test]
    fn link_loss_additive_in_length() {
        let base = FiberSpec::preset("g654-110-1").unwrap();
        let total = base.with_length(66.0);
        let a = base.with_length(25.0);
        let b = base.with_length(41.0);
        let mux = MuxSpec::lossless();
        let whole = link_loss(&total, &mux, &fbg(), Wavelength::Q1310).unwrap();
        let split = a.fiber_loss_db(Wavelength::Q1310) + b.fiber_loss_db(Wavelength::Q1310);
        assert!((whole - split).abs() < 1e-12);
    }

    #[test]
    fn srs_paper_g652_21dbm() {
        let fiber = FiberSpec::preset("g652-1").unwrap();
        let traffic = ClassicalTrafficSpec::new(21.0, Direction::Co);
        let rate = srs_rate_paper(&fiber, &traffic, &fbg()).unwrap();
        assert!((rate - 24_948.0).abs() < 1e-9, "rate = {rate}");
    }

    #[test]
    fn srs_paper_zero_beta_scaled() {
        let mut fiber = FiberSpec::preset("g652-1").unwrap();
        fiber.beta_srs = 1e-300; // beta must stay > 0; scaled to negligible
        let traffic = ClassicalTrafficSpec::new(21.0, Direction::Co);
        let rate = srs_rate_paper(&fiber, &traffic, &fbg()).unwrap();
        assert!(rate < 1e-290);
    }

    #[test]
    fn srs_paper_aeff_reduction_ratio() {
        let g652 = FiberSpec::preset("g652-1").unwrap();
        let mut g654_130 = FiberSpec::preset("g654-130-1").unwrap();
        // equal power/length comparison
        g654_130.length_km = g652.length_km;
        let traffic = ClassicalTrafficSpec::new(18.0, Direction::Co);
        let a = srs_rate_paper(&g652, &traffic, &fbg()).unwrap();
        let b = srs_rate_paper(&g654_130, &traffic, &fbg()).unwrap();
        let ratio = b / a;
        assert!((ratio - 8.0 / 18.0).abs() < 1e-12);
        let reduction = 1.0 - ratio;
        assert!(reduction > 0.50 && reduction < 0.70, "reduction = {reduction}");
    }

    #[test]
    fn srs_paper_out_of_range_power() {
        let fiber = FiberSpec::preset("g652-1").unwrap();
        for p in [7.9, 21.1] {
            let traffic = ClassicalTrafficSpec::new(p, Direction::Co);
            assert!(srs_rate_paper(&fiber, &traffic, &fbg()).is_err());
        }
    }

    #[test]
    fn srs_physical_zero_length_limit() {
        let fiber = FiberSpec::preset("g654-110-2").unwrap().with_length(1e-9);
        for dir in [Direction::Co, Direction::Counter] {
            let traffic = ClassicalTrafficSpec::new(21.0, dir);
            let r = srs_rate_physical(&fiber, &traffic, &fbg(), 50.0).unwrap();
            assert!(r < 1e-4, "dir {dir}: {r}");
        }
    }

    #[test]
    fn srs_physical_lossless_limit_directions_agree() {
        // As attenuation -> 0 both geometries reduce to K*P*L.
        for l in [5.0, 66.0] {
            let co = srs_geometry_co_km(1e-12, l);
            let cnt = srs_geometry_counter_km(1e-12, l);
            assert!((co - l).abs() / l < 1e-9);
            assert!((cnt - l).abs() / l < 1e-9);
        }
    }

    #[test]
    fn srs_physical_counter_dominates_at_66km() {
        for name in FiberSpec::preset_names() {
            let fiber = FiberSpec::preset(name).unwrap();
            let k = 40.0;
            let co = srs_rate_physical(
                &fiber,
                &ClassicalTrafficSpec::new(18.0, Direction::Co),
                &fbg(),
                k,
            )
            .unwrap();
            let cnt = srs_rate_physical(
                &fiber,
                &ClassicalTrafficSpec::new(18.0, Direction::Counter),
                &fbg(),
                k,
            )
            .unwrap();
            assert!(cnt >= co, "{name}: counter {cnt} < co {co}");
        }
    }

    #[test]
    fn srs_filter_scaling_exact_both_models() {
        let fiber = FiberSpec::preset("g654-110-1").unwrap();
        let traffic = ClassicalTrafficSpec::new(15.0, Direction::Co);
        let f20 = FilterSpec::fbg_20ghz();
        let f100 = FilterSpec::dwdm_100ghz();
        let p20 = srs_rate_paper(&fiber, &traffic, &f20).unwrap();
        let p100 = srs_rate_paper(&fiber, &traffic, &f100).unwrap();
        assert_eq!(p100, 5.0 * p20);
        let k = calibrate_raman_coeff(&fiber, CalibrationDirection::Averaged);
        let q20 = srs_rate_physical(&fiber, &traffic, &f20, k).unwrap();
        let q100 = srs_rate_physical(&fiber, &traffic, &f100, k).unwrap();
        assert_eq!(q100, 5.0 * q20);
    }

    #[test]
    fn srs_monotone_in_power_length_passband() {
        let fiber = FiberSpec::preset("g652-1").unwrap();
        let k = calibrate_raman_coeff(&fiber, CalibrationDirection::Averaged);
        let mut prev_paper = 0.0;
        let mut prev_phys = 0.0;
        for p in 8..=21 {
            let traffic = ClassicalTrafficSpec::new(p as f64, Direction::Co);
            let a = srs_rate_paper(&fiber, &traffic, &fbg()).unwrap();
            let b = srs_rate_physical(&fiber, &traffic, &fbg(), k).unwrap();
            assert!(a > prev_paper && b > prev_phys);
            prev_paper = a;
            prev_phys = b;
        }
        // co-propagation geometry grows with length below the turnover
        let mut prev = 0.0;
        for l in [1.0, 4.0, 8.0, 12.0, 15.0] {
            let f = fiber.with_length(l);
            let traffic = ClassicalTrafficSpec::new(10.0, Direction::Co);
            let r = srs_rate_physical(&f, &traffic, &fbg(), k).unwrap();
            assert!(r > prev);
            prev = r;
        }
    }

    #[test]
    fn crosstalk_examples() {
        assert_eq!(crosstalk_rate(&MuxSpec::default_backbone()), 60.0);
        assert_eq!(crosstalk_rate(&MuxSpec::lossless()), 0.0);
        let budget = NoiseBudget::new(0.0, 1500.0, 0.0, 60.0);
        assert!((budget.n_crosstalk_cps / budget.n_dark_cps - 0.04).abs() < 1e-12);
    }

    #[test]
    fn calibration_linearity_and_residual() {
        let fiber = FiberSpec::preset("g654-110-1").unwrap();
        let k1 = calibrate_raman_coeff(&fiber, CalibrationDirection::Co);
        let mut doubled = fiber.clone();
        doubled.beta_srs *= 2.0;
        let k2 = calibrate_raman_coeff(&doubled, CalibrationDirection::Co);
        assert!((k2 / k1 - 2.0).abs() < 1e-12);
        for dir in [
            CalibrationDirection::Co,
            CalibrationDirection::Counter,
            CalibrationDirection::Averaged,
        ] {
            let k = calibrate_raman_coeff(&fiber, dir);
            let res = calibration_residual(&fiber, dir, k);
            assert!(res.abs() < 0.01, "{dir:?}: residual {res}");
        }
    }

    #[test]
    fn measured_totals_within_splice_allowance() {
        for name in FiberSpec::preset_names() {
            let f = FiberSpec::preset(name).unwrap();
            let d1310 =
                (f.measured_total_1310_db.unwrap() - f.att_1310_db_km * f.length_km).abs();
            let d1550 =
                (f.measured_total_1550_db.unwrap() - f.att_1550_db_km * f.length_km).abs();
            assert!(d1310 <= SPLICE_ALLOWANCE_DB && d1550 <= SPLICE_ALLOWANCE_DB);
        }
    }

    proptest::proptest! {
        #[test]
        fn physical_counter_geq_co(l in 20.0f64..200.0, att in 0.15f64..0.40) {
            let co = srs_geometry_co_km(att / 4.342944819032518, l);
            let cnt = srs_geometry_counter_km(att / 4.342944819032518, l);
            proptest::prop_assert!(cnt >= co * 0.999999);
        }
    }
}
