//! CSV writers with deterministic formatting (fixed decimal places), so
//! fixed inputs and seeds produce byte-identical artifacts.

use anyhow::{Context, Result};
use qcoex_core::keyrate::KeyRateReport;
use qcoex_core::scenario::CoexistenceScenario;
use std::fmt::Write as _;
use std::path::Path;

pub struct Csv {
    buf: String,
}

impl Csv {
    pub fn new(header: &str) -> Self {
        let mut buf = String::new();
        let _ = writeln!(buf, "{header}");
        Csv { buf }
    }

    pub fn row(&mut self, fields: &[String]) {
        let _ = writeln!(self.buf, "{}", fields.join(","));
    }

    pub fn write(&self, path: Option<&Path>) -> Result<()> {
        if let Some(path) = path {
            std::fs::write(path, self.buf.as_bytes())
                .with_context(|| format!("writing {}", path.display()))?;
        }
        Ok(())
    }
}

pub fn f(v: f64) -> String {
    format!("{v:.6}")
}

pub fn f3(v: f64) -> String {
    format!("{v:.3}")
}

pub const REPORT_HEADER: &str = "name,fiber,length_km,direction,launch_power_dbm,\
passband_ghz,detector,srs_model,seed,loss_db,srs_receiver_cps,n_actual_cps,qsnr_db,\
qber,gain_mu,y1_lower,e1_upper,rate_bps,feasible";

/// One CSV row per scenario point: inputs echoed, then the report.
pub fn report_row(s: &CoexistenceScenario, r: &KeyRateReport) -> Vec<String> {
    let loss = s.link_loss_db().map(f3).unwrap_or_else(|_| "nan".into());
    let srs = s
        .srs_receiver_rate_cps()
        .map(f3)
        .unwrap_or_else(|_| "nan".into());
    vec![
        s.name.clone(),
        s.fiber.name.clone(),
        f3(s.fiber.length_km),
        s.traffic.direction.to_string(),
        f3(s.traffic.launch_power_dbm),
        f3(s.filter.passband_ghz),
        s.detector.name.clone(),
        s.srs_model.to_string(),
        s.seed.to_string(),
        loss,
        srs,
        f3(r.n_actual_cps),
        f(r.qsnr_db),
        f(r.qber),
        format!("{:.9}", r.gain_mu),
        format!("{:.9}", r.y1_lower),
        f(r.e1_upper),
        f3(r.rate_bps),
        r.feasible.to_string(),
    ]
}

pub fn summarize(s: &CoexistenceScenario, r: &KeyRateReport) -> String {
    format!(
        "{}: loss {} dB, SRS {} cps at receiver input, QSNR {} dB, QBER {:.3}%, \
         y1>={:.6}, e1<={:.4}, rate {:.1} bps, {}",
        s.name,
        s.link_loss_db().map(|v| format!("{v:.2}")).unwrap_or_default(),
        s.srs_receiver_rate_cps()
            .map(|v| format!("{v:.0}"))
            .unwrap_or_default(),
        if r.qsnr_db.is_infinite() { "inf".into() } else { format!("{:.2}", r.qsnr_db) },
        r.qber * 100.0,
        r.y1_lower,
        r.e1_upper,
        r.rate_bps,
        if r.feasible { "feasible" } else { "infeasible" },
    )
}
