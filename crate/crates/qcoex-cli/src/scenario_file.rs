//! Flat key/value scenario files.
//!
//! One `key = value` pair per line, `#` comments, dotted section names.
//! Unknown keys and duplicate keys are errors that name the offending key.
//! Units are part of every key name (dB, dBm, km, GHz, Hz, s, ps).
//!
//! ```text
//! name = g654-110-co-21dBm
//! fiber.preset = g654-110-1        # or fiber.att_1310_db_km etc.
//! traffic.launch_power_dbm = 21
//! traffic.direction = co           # co | counter
//! filter.preset = fbg-20ghz        # fbg-20ghz | dwdm-100ghz
//! mux.preset = backbone
//! detector.preset = ingaas-2017    # ingaas-2017 | snspd-lab
//! srs_model = paper                # paper | physical
//! seed = 42
//! protocol.f_ec = 1.35             # optional overrides
//! raman_coeff = 46.9               # optional, physical model
//! ```
//!
//! Custom fibers spell out `fiber.name`, `fiber.att_1310_db_km`,
//! `fiber.att_1550_db_km`, `fiber.length_km`, `fiber.aeff_um2`,
//! `fiber.beta_srs`, and optionally `fiber.total_loss_1310_db` /
//! `fiber.total_loss_1550_db`.

use anyhow::{anyhow, bail, Context, Result};
use qcoex_core::channel::{
    ClassicalTrafficSpec, Direction, FiberSpec, FilterSpec, MuxSpec,
};
use qcoex_core::detector::DetectorSpec;
use qcoex_core::keyrate::DecoyParams;
use qcoex_core::scenario::{CoexistenceScenario, SrsModel};
use std::collections::BTreeMap;
use std::fmt::Write as _;

/// Default seed used when a file does not pin one.
pub const DEFAULT_SEED: u64 = 42;

fn parse_entries(text: &str) -> Result<BTreeMap<String, String>> {
    let mut entries = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(i) => &raw[..i],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| anyhow!("line {}: expected `key = value`", lineno + 1))?;
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if entries.insert(key.clone(), value).is_some() {
            bail!("line {}: duplicate key `{key}`", lineno + 1);
        }
    }
    Ok(entries)
}

struct Fields {
    entries: BTreeMap<String, String>,
    taken: std::collections::BTreeSet<String>,
}

impl Fields {
    fn take(&mut self, key: &str) -> Option<String> {
        self.taken.insert(key.to_string());
        self.entries.get(key).cloned()
    }

    fn take_f64(&mut self, key: &str) -> Result<Option<f64>> {
        match self.take(key) {
            None => Ok(None),
            Some(v) => Ok(Some(v.parse::<f64>().with_context(|| {
                format!("field `{key}`: `{v}` is not a number")
            })?)),
        }
    }

    fn take_u64(&mut self, key: &str) -> Result<Option<u64>> {
        match self.take(key) {
            None => Ok(None),
            Some(v) => Ok(Some(v.parse::<u64>().with_context(|| {
                format!("field `{key}`: `{v}` is not an integer")
            })?)),
        }
    }

    fn require_f64(&mut self, key: &str) -> Result<f64> {
        self.take_f64(key)?
            .ok_or_else(|| anyhow!("missing required field `{key}`"))
    }

    fn finish(self) -> Result<()> {
        for key in self.entries.keys() {
            if !self.taken.contains(key) {
                bail!("unknown field `{key}`");
            }
        }
        Ok(())
    }
}

fn parse_fiber(fields: &mut Fields) -> Result<FiberSpec> {
    if let Some(preset) = fields.take("fiber.preset") {
        let mut fiber = FiberSpec::preset(&preset)
            .ok_or_else(|| anyhow!("field `fiber.preset`: unknown preset `{preset}`"))?;
        // optional length override reverts to coefficient * length
        if let Some(l) = fields.take_f64("fiber.length_km")? {
            if l != fiber.length_km {
                fiber = fiber.with_length(l);
            }
        }
        return Ok(fiber);
    }
    let name = fields
        .take("fiber.name")
        .unwrap_or_else(|| "custom".to_string());
    let att_1310 = fields.require_f64("fiber.att_1310_db_km")?;
    let att_1550 = fields.require_f64("fiber.att_1550_db_km")?;
    let length = fields.require_f64("fiber.length_km")?;
    let aeff = fields.require_f64("fiber.aeff_um2")?;
    let beta = fields.require_f64("fiber.beta_srs")?;
    Ok(FiberSpec {
        name,
        att_1310_db_km: att_1310,
        att_1550_db_km: att_1550,
        length_km: length,
        measured_total_1310_db: fields.take_f64("fiber.total_loss_1310_db")?,
        measured_total_1550_db: fields.take_f64("fiber.total_loss_1550_db")?,
        aeff_um2: aeff,
        beta_srs: beta,
    })
}

fn parse_filter(fields: &mut Fields) -> Result<FilterSpec> {
    if let Some(preset) = fields.take("filter.preset") {
        return match preset.as_str() {
            "fbg-20ghz" => Ok(FilterSpec::fbg_20ghz()),
            "dwdm-100ghz" => Ok(FilterSpec::dwdm_100ghz()),
            other => bail!("field `filter.preset`: unknown preset `{other}`"),
        };
    }
    let mut filter = FilterSpec::fbg_20ghz();
    if let Some(v) = fields.take_f64("filter.passband_ghz")? {
        filter.passband_ghz = v;
    }
    if let Some(v) = fields.take_f64("filter.insertion_loss_db")? {
        filter.insertion_loss_db = v;
    }
    if let Some(v) = fields.take_f64("filter.center_wavelength_nm")? {
        filter.center_wavelength_nm = v;
    }
    Ok(filter)
}

fn parse_mux(fields: &mut Fields) -> Result<MuxSpec> {
    if let Some(preset) = fields.take("mux.preset") {
        return match preset.as_str() {
            "backbone" => Ok(MuxSpec::default_backbone()),
            "lossless" => Ok(MuxSpec::lossless()),
            other => bail!("field `mux.preset`: unknown preset `{other}`"),
        };
    }
    let mut mux = MuxSpec::default_backbone();
    if let Some(v) = fields.take_f64("mux.mul_loss_1310_db")? {
        mux.mul_loss_1310_db = v;
    }
    if let Some(v) = fields.take_f64("mux.mul_loss_1550_db")? {
        mux.mul_loss_1550_db = v;
    }
    if let Some(v) = fields.take_f64("mux.demul_loss_1310_db")? {
        mux.demul_loss_1310_db = v;
    }
    if let Some(v) = fields.take_f64("mux.demul_loss_1550_db")? {
        mux.demul_loss_1550_db = v;
    }
    if let Some(v) = fields.take_f64("mux.isolation_mul_db")? {
        mux.isolation_mul_db = v;
    }
    if let Some(v) = fields.take_f64("mux.isolation_demul_db")? {
        mux.isolation_demul_db = v;
    }
    if let Some(v) = fields.take_f64("mux.crosstalk_floor_cps")? {
        mux.crosstalk_floor_cps = v;
    }
    Ok(mux)
}

fn parse_detector(fields: &mut Fields) -> Result<DetectorSpec> {
    if let Some(preset) = fields.take("detector.preset") {
        return DetectorSpec::preset(&preset)
            .ok_or_else(|| anyhow!("field `detector.preset`: unknown preset `{preset}`"));
    }
    let mut det = DetectorSpec::ingaas_2017();
    if let Some(name) = fields.take("detector.name") {
        det.name = name;
    }
    if let Some(v) = fields.take_f64("detector.efficiency")? {
        det.efficiency = v;
    }
    if let Some(v) = fields.take_f64("detector.dark_per_gate")? {
        det.dark_per_gate = Some(v);
        det.dark_cps_per_detector = None;
    }
    if let Some(v) = fields.take_f64("detector.dark_cps_per_detector")? {
        det.dark_cps_per_detector = Some(v);
        det.dark_per_gate = None;
    }
    if let Some(v) = fields.take_f64("detector.gate_rate_hz")? {
        det.gate_rate_hz = v;
    }
    if let Some(v) = fields.take_f64("detector.gate_width_ps")? {
        det.gate_width_ps = v;
    }
    if let Some(v) = fields.take_f64("detector.dead_time_s")? {
        det.dead_time_s = v;
    }
    if let Some(v) = fields.take_f64("detector.afterpulse_prob")? {
        det.afterpulse_prob = v;
    }
    if let Some(v) = fields.take_u64("detector.num_detectors")? {
        det.num_detectors = v as u32;
    }
    Ok(det)
}

fn parse_protocol(fields: &mut Fields) -> Result<DecoyParams> {
    let mut p = DecoyParams::default();
    if let Some(v) = fields.take_f64("protocol.mu")? {
        p.mu = v;
    }
    if let Some(v) = fields.take_f64("protocol.nu")? {
        p.nu = v;
    }
    if let Some(v) = fields.take_f64("protocol.omega")? {
        p.omega = v;
    }
    if let Some(v) = fields.take_f64("protocol.p_mu")? {
        p.p_mu = v;
    }
    if let Some(v) = fields.take_f64("protocol.p_nu")? {
        p.p_nu = v;
    }
    if let Some(v) = fields.take_f64("protocol.p_omega")? {
        p.p_omega = v;
    }
    if let Some(v) = fields.take_f64("protocol.rep_rate_hz")? {
        p.rep_rate_hz = v;
    }
    if let Some(v) = fields.take_f64("protocol.e_d")? {
        p.e_d = v;
    }
    if let Some(v) = fields.take_f64("protocol.f_ec")? {
        p.f_ec = v;
    }
    if let Some(v) = fields.take_f64("protocol.sift_factor")? {
        p.sift_factor = v;
    }
    if let Some(v) = fields.take_u64("protocol.block_size_bits")? {
        p.block_size_bits = v;
    }
    if let Some(v) = fields.take_f64("protocol.n_sigma")? {
        p.n_sigma = v;
    }
    if let Some(v) = fields.take_f64("protocol.qber_cap")? {
        p.qber_cap = v;
    }
    if let Some(v) = fields.take_f64("protocol.duty_factor")? {
        p.duty_factor = v;
    }
    Ok(p)
}

/// Parse a scenario document.
pub fn parse_scenario(text: &str) -> Result<CoexistenceScenario> {
    let entries = parse_entries(text)?;
    let mut fields = Fields { entries, taken: Default::default() };

    let name = fields.take("name").unwrap_or_else(|| "scenario".to_string());
    let fiber = parse_fiber(&mut fields)?;
    let power = fields.require_f64("traffic.launch_power_dbm")?;
    let direction = match fields
        .take("traffic.direction")
        .unwrap_or_else(|| "co".to_string())
        .as_str()
    {
        "co" => Direction::Co,
        "counter" => Direction::Counter,
        other => bail!("field `traffic.direction`: `{other}` is not co|counter"),
    };
    let filter = parse_filter(&mut fields)?;
    let mux = parse_mux(&mut fields)?;
    let detector = parse_detector(&mut fields)?;
    let protocol = parse_protocol(&mut fields)?;
    let srs_model = match fields
        .take("srs_model")
        .unwrap_or_else(|| "paper".to_string())
        .as_str()
    {
        "paper" => SrsModel::Paper,
        "physical" => SrsModel::Physical,
        other => bail!("field `srs_model`: `{other}` is not paper|physical"),
    };
    let raman_coeff = fields.take_f64("raman_coeff")?;
    let seed = fields.take_u64("seed")?.unwrap_or(DEFAULT_SEED);
    fields.finish()?;

    let scenario = CoexistenceScenario {
        name,
        fiber,
        traffic: ClassicalTrafficSpec::new(power, direction),
        filter,
        mux,
        detector,
        protocol,
        srs_model,
        raman_coeff,
        seed,
    };
    scenario
        .validate()
        .map_err(|e| anyhow!("{e}"))
        .context("scenario validation failed")?;
    Ok(scenario)
}

/// Canonical serialization: every field spelled out, fixed ordering, so that
/// `parse(serialize(s)) == s`.
pub fn serialize_scenario(s: &CoexistenceScenario) -> String {
    let mut out = String::new();
    let mut kv = |k: &str, v: String| {
        let _ = writeln!(out, "{k} = {v}");
    };
    kv("name", s.name.clone());
    kv("fiber.name", s.fiber.name.clone());
    kv("fiber.att_1310_db_km", format!("{}", s.fiber.att_1310_db_km));
    kv("fiber.att_1550_db_km", format!("{}", s.fiber.att_1550_db_km));
    kv("fiber.length_km", format!("{}", s.fiber.length_km));
    if let Some(v) = s.fiber.measured_total_1310_db {
        kv("fiber.total_loss_1310_db", format!("{v}"));
    }
    if let Some(v) = s.fiber.measured_total_1550_db {
        kv("fiber.total_loss_1550_db", format!("{v}"));
    }
    kv("fiber.aeff_um2", format!("{}", s.fiber.aeff_um2));
    kv("fiber.beta_srs", format!("{}", s.fiber.beta_srs));
    kv("traffic.launch_power_dbm", format!("{}", s.traffic.launch_power_dbm));
    kv("traffic.direction", s.traffic.direction.to_string());
    kv("filter.passband_ghz", format!("{}", s.filter.passband_ghz));
    kv("filter.insertion_loss_db", format!("{}", s.filter.insertion_loss_db));
    kv(
        "filter.center_wavelength_nm",
        format!("{}", s.filter.center_wavelength_nm),
    );
    kv("mux.mul_loss_1310_db", format!("{}", s.mux.mul_loss_1310_db));
    kv("mux.mul_loss_1550_db", format!("{}", s.mux.mul_loss_1550_db));
    kv("mux.demul_loss_1310_db", format!("{}", s.mux.demul_loss_1310_db));
    kv("mux.demul_loss_1550_db", format!("{}", s.mux.demul_loss_1550_db));
    kv("mux.isolation_mul_db", format!("{}", s.mux.isolation_mul_db));
    kv("mux.isolation_demul_db", format!("{}", s.mux.isolation_demul_db));
    kv("mux.crosstalk_floor_cps", format!("{}", s.mux.crosstalk_floor_cps));
    kv("detector.name", s.detector.name.clone());
    kv("detector.efficiency", format!("{}", s.detector.efficiency));
    if let Some(v) = s.detector.dark_per_gate {
        kv("detector.dark_per_gate", format!("{v}"));
    }
    if let Some(v) = s.detector.dark_cps_per_detector {
        kv("detector.dark_cps_per_detector", format!("{v}"));
    }
    kv("detector.gate_rate_hz", format!("{}", s.detector.gate_rate_hz));
    kv("detector.gate_width_ps", format!("{}", s.detector.gate_width_ps));
    kv("detector.dead_time_s", format!("{}", s.detector.dead_time_s));
    kv("detector.afterpulse_prob", format!("{}", s.detector.afterpulse_prob));
    kv("detector.num_detectors", format!("{}", s.detector.num_detectors));
    kv("protocol.mu", format!("{}", s.protocol.mu));
    kv("protocol.nu", format!("{}", s.protocol.nu));
    kv("protocol.omega", format!("{}", s.protocol.omega));
    kv("protocol.p_mu", format!("{}", s.protocol.p_mu));
    kv("protocol.p_nu", format!("{}", s.protocol.p_nu));
    kv("protocol.p_omega", format!("{}", s.protocol.p_omega));
    kv("protocol.rep_rate_hz", format!("{}", s.protocol.rep_rate_hz));
    kv("protocol.e_d", format!("{}", s.protocol.e_d));
    kv("protocol.f_ec", format!("{}", s.protocol.f_ec));
    kv("protocol.sift_factor", format!("{}", s.protocol.sift_factor));
    kv("protocol.block_size_bits", format!("{}", s.protocol.block_size_bits));
    kv("protocol.n_sigma", format!("{}", s.protocol.n_sigma));
    kv("protocol.qber_cap", format!("{}", s.protocol.qber_cap));
    kv("protocol.duty_factor", format!("{}", s.protocol.duty_factor));
    kv("srs_model", s.srs_model.to_string());
    if let Some(k) = s.raman_coeff {
        kv("raman_coeff", format!("{k}"));
    }
    kv("seed", format!("{}", s.seed));
    out
}
