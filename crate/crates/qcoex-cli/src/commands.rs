//! Command implementations: single evaluation, sweeps, reproduction suites
//! with ordering checks, coefficient calibration, and end-to-end
//! distillation.

use crate::output::{f, f3, report_row, summarize, Csv, REPORT_HEADER};
use crate::{EXIT_CHECK_FAILED, EXIT_INFEASIBLE, EXIT_OK};
use anyhow::{anyhow, Result};
use qcoex_core::bits::Bits;
use qcoex_core::channel::{
    calibrate_raman_coeff, calibration_residual, CalibrationDirection, ClassicalTrafficSpec,
    Direction, FiberSpec, FilterSpec, MuxSpec,
};
use qcoex_core::detector::DetectorSpec;
use qcoex_core::keyrate::{DecoyParams, KeyRateReport};
use qcoex_core::postproc::{
    crc64, distill as distill_block, AuthKeyStore, DiscardReason, DistillOutcome, DistillParams,
};
use qcoex_core::scenario::{self, CoexistenceScenario, SrsModel};
use qcoex_core::sim;
use qcoex_core::rng;
use std::path::Path;

pub fn evaluate(scenario: &CoexistenceScenario, out: Option<&Path>) -> Result<u8> {
    let report = scenario.evaluate().map_err(|e| anyhow!("{e}"))?;
    let mut csv = Csv::new(REPORT_HEADER);
    csv.row(&report_row(scenario, &report));
    csv.write(out)?;
    println!("{}", summarize(scenario, &report));
    Ok(if report.feasible { EXIT_OK } else { EXIT_INFEASIBLE })
}

pub fn sweep_power(
    scenario: &CoexistenceScenario,
    powers: &[f64],
    out: Option<&Path>,
) -> Result<u8> {
    let points = scenario::sweep_power(scenario, powers).map_err(|e| anyhow!("{e}"))?;
    let mut csv = Csv::new(REPORT_HEADER);
    for p in &points {
        let s = scenario.with_power(p.coordinate);
        csv.row(&report_row(&s, &p.report));
        println!("{}", summarize(&s, &p.report));
    }
    csv.write(out)?;
    Ok(EXIT_OK)
}

pub fn sweep_distance(
    scenario: &CoexistenceScenario,
    lengths: &[f64],
    out: Option<&Path>,
) -> Result<u8> {
    let points = scenario::sweep_distance(scenario, lengths, scenario.srs_model)
        .map_err(|e| anyhow!("{e}"))?;
    let mut csv = Csv::new(REPORT_HEADER);
    for p in &points {
        let s = scenario.with_length(p.coordinate);
        csv.row(&report_row(&s, &p.report));
        println!("{}", summarize(&s, &p.report));
    }
    csv.write(out)?;
    Ok(EXIT_OK)
}

pub fn calibrate(fiber: &str, direction: CalibrationDirection, out: Option<&Path>) -> Result<u8> {
    let spec = FiberSpec::preset(fiber)
        .ok_or_else(|| anyhow!("unknown fiber preset `{fiber}`"))?;
    let k = calibrate_raman_coeff(&spec, direction);
    let residual = calibration_residual(&spec, direction, k);
    println!(
        "{fiber} {direction:?}: K = {k:.6} cps/(mW km), residual {residual:+.3e} of beta = {}",
        spec.beta_srs
    );
    let mut csv = Csv::new("fiber,direction,raman_coeff,beta_srs,residual");
    csv.row(&[
        fiber.to_string(),
        format!("{direction:?}").to_lowercase(),
        format!("{k:.9}"),
        format!("{}", spec.beta_srs),
        format!("{residual:.3e}"),
    ]);
    csv.write(out)?;
    Ok(EXIT_OK)
}

// ---------------------------------------------------------------------------
// reproduction suites
// ---------------------------------------------------------------------------

struct Checks {
    lines: Vec<(bool, String)>,
}

impl Checks {
    fn new() -> Self {
        Checks { lines: Vec::new() }
    }

    fn check(&mut self, ok: bool, label: String) {
        println!("{} {}", if ok { "PASS" } else { "FAIL" }, label);
        self.lines.push((ok, label));
    }

    fn exit_code(&self) -> u8 {
        if self.lines.iter().all(|(ok, _)| *ok) {
            EXIT_OK
        } else {
            EXIT_CHECK_FAILED
        }
    }
}

fn table2_scenario(
    fiber_class: &str,
    aeff: u32,
    passband_ghz: f64,
    direction: Direction,
) -> CoexistenceScenario {
    let fiber = FiberSpec::preset(&format!("table2-{fiber_class}-{aeff}")).unwrap();
    let mut filter = if passband_ghz == 20.0 {
        FilterSpec::fbg_20ghz()
    } else {
        FilterSpec::dwdm_100ghz()
    };
    filter.passband_ghz = passband_ghz;
    CoexistenceScenario {
        name: format!("table2-{fiber_class}-{}ghz-{direction}-{aeff}", passband_ghz as u32),
        fiber,
        traffic: ClassicalTrafficSpec::new(21.0, direction),
        filter,
        mux: MuxSpec::default_backbone(),
        detector: DetectorSpec::ingaas_2017(),
        // simulation matrix runs at asymptotic statistics
        protocol: DecoyParams { n_sigma: 0.0, ..DecoyParams::default() },
        srs_model: SrsModel::Physical,
        raman_coeff: None,
        seed: 42,
    }
}

/// Published simulation matrix: (fiber class, filter GHz, direction, Aeff)
/// -> (QSNR dB, key rate kbps or None for no key).
pub const TABLE2_REFERENCE: &[(&str, u32, &str, u32, f64, Option<f64>)] = &[
    ("lowloss", 20, "co", 80, 50.5, Some(5.5)),
    ("lowloss", 20, "co", 110, 65.8, Some(5.9)),
    ("lowloss", 20, "co", 130, 71.1, Some(6.0)),
    ("lowloss", 20, "counter", 80, 18.3, Some(3.2)),
    ("lowloss", 20, "counter", 110, 29.5, Some(4.9)),
    ("lowloss", 20, "counter", 130, 34.5, Some(5.2)),
    ("std", 20, "co", 80, 36.0, Some(2.2)),
    ("std", 20, "co", 110, 45.8, Some(2.3)),
    ("std", 20, "co", 130, 49.2, Some(2.4)),
    ("std", 20, "counter", 80, 10.0, None),
    ("std", 20, "counter", 110, 16.6, Some(1.2)),
    ("std", 20, "counter", 130, 19.8, Some(1.5)),
    ("lowloss", 100, "co", 80, 14.0, Some(1.8)),
    ("lowloss", 100, "co", 110, 23.5, Some(3.6)),
    ("lowloss", 100, "co", 130, 28.1, Some(4.1)),
    ("lowloss", 100, "counter", 80, 2.8, None),
    ("lowloss", 100, "counter", 110, 5.8, None),
    ("lowloss", 100, "counter", 130, 7.5, None),
    ("std", 100, "co", 80, 10.4, None),
    ("std", 100, "co", 110, 17.5, Some(1.1)),
    ("std", 100, "co", 130, 20.8, Some(1.4)),
    ("std", 100, "counter", 80, 1.0, None),
    ("std", 100, "counter", 110, 2.7, None),
    ("std", 100, "counter", 130, 3.6, None),
];

pub fn reproduce_table2(out: Option<&Path>) -> Result<u8> {
    let mut csv = Csv::new(
        "fiber_class,passband_ghz,direction,aeff_um2,qsnr_db,rate_bps,qber,feasible,\
         ref_qsnr_db,qsnr_deviation_db,ref_rate_kbps,ref_feasible,feasibility_match",
    );
    let mut checks = Checks::new();
    let mut reports: Vec<(usize, KeyRateReport)> = Vec::new();

    for (idx, &(class, ghz, dir_s, aeff, ref_qsnr, ref_rate)) in
        TABLE2_REFERENCE.iter().enumerate()
    {
        let direction = if dir_s == "co" { Direction::Co } else { Direction::Counter };
        let s = table2_scenario(class, aeff, ghz as f64, direction);
        let r = s.evaluate().map_err(|e| anyhow!("{e}"))?;
        let ref_feasible = ref_rate.is_some();
        let matches = r.feasible == ref_feasible;
        csv.row(&[
            class.to_string(),
            ghz.to_string(),
            dir_s.to_string(),
            aeff.to_string(),
            f(r.qsnr_db),
            f3(r.rate_bps),
            f(r.qber),
            r.feasible.to_string(),
            f3(ref_qsnr),
            f(r.qsnr_db - ref_qsnr),
            ref_rate.map(f3).unwrap_or_else(|| "-".into()),
            ref_feasible.to_string(),
            matches.to_string(),
        ]);
        checks.check(
            matches,
            format!(
                "feasibility {class} {ghz} GHz {dir_s} Aeff {aeff}: got {}, published {}",
                r.feasible,
                if ref_feasible { "key" } else { "-" }
            ),
        );
        reports.push((idx, r));
    }

    // Aeff monotonicity of QSNR and rate within every (class, filter, dir)
    for group in reports.chunks(3) {
        let (i0, a) = &group[0];
        let (_, b) = &group[1];
        let (_, c) = &group[2];
        let label = {
            let (class, ghz, dir_s, ..) = TABLE2_REFERENCE[*i0];
            format!("{class} {ghz} GHz {dir_s}")
        };
        checks.check(
            a.qsnr_db <= b.qsnr_db && b.qsnr_db <= c.qsnr_db,
            format!("QSNR non-decreasing in Aeff: {label}"),
        );
        checks.check(
            a.rate_bps <= b.rate_bps + 1e-9 && b.rate_bps <= c.rate_bps + 1e-9,
            format!("rate non-decreasing in Aeff: {label}"),
        );
    }

    // 20 GHz beats 100 GHz at matching coordinates
    for i in 0..12 {
        let (_, narrow) = &reports[i];
        let (_, wide) = &reports[i + 12];
        let (class, _, dir_s, aeff, ..) = TABLE2_REFERENCE[i];
        checks.check(
            narrow.qsnr_db >= wide.qsnr_db && narrow.rate_bps >= wide.rate_bps - 1e-9,
            format!("20 GHz >= 100 GHz: {class} {dir_s} Aeff {aeff}"),
        );
    }

    // co-propagation QSNR dominates counter-propagation at equal settings
    for base in [0usize, 6, 12, 18] {
        for k in 0..3 {
            let (_, co) = &reports[base + k];
            let (_, cnt) = &reports[base + 3 + k];
            let (class, ghz, _, aeff, ..) = TABLE2_REFERENCE[base + k];
            checks.check(
                co.qsnr_db >= cnt.qsnr_db,
                format!("co >= counter QSNR: {class} {ghz} GHz Aeff {aeff}"),
            );
        }
    }

    csv.write(out)?;
    Ok(checks.exit_code())
}

fn experiment_scenario(
    fiber: &str,
    power: f64,
    direction: Direction,
    srs_model: SrsModel,
    detector: DetectorSpec,
) -> CoexistenceScenario {
    CoexistenceScenario {
        name: format!("{fiber}-{direction}-{power}dBm"),
        fiber: FiberSpec::preset(fiber).unwrap(),
        traffic: ClassicalTrafficSpec::new(power, direction),
        filter: FilterSpec::fbg_20ghz(),
        mux: MuxSpec::default_backbone(),
        detector,
        protocol: DecoyParams::default(),
        srs_model,
        raman_coeff: None,
        seed: 42,
    }
}

/// Launch-power sweep: co-propagation on G652-1 (measured-coefficient SRS)
/// and counter-propagation on G652-2 (directional physical SRS), 8..21 dBm.
pub fn reproduce_fig2(out: Option<&Path>) -> Result<u8> {
    let powers: Vec<f64> = (8..=21).map(|p| p as f64).collect();
    let co = experiment_scenario(
        "g652-1",
        21.0,
        Direction::Co,
        SrsModel::Paper,
        DetectorSpec::ingaas_2017(),
    );
    let cnt = experiment_scenario(
        "g652-2",
        21.0,
        Direction::Counter,
        SrsModel::Physical,
        DetectorSpec::ingaas_2017(),
    );
    let co_pts = scenario::sweep_power(&co, &powers).map_err(|e| anyhow!("{e}"))?;
    let cnt_pts = scenario::sweep_power(&cnt, &powers).map_err(|e| anyhow!("{e}"))?;

    let mut csv = Csv::new(REPORT_HEADER);
    for p in co_pts.iter() {
        csv.row(&report_row(&co.with_power(p.coordinate), &p.report));
    }
    for p in cnt_pts.iter() {
        csv.row(&report_row(&cnt.with_power(p.coordinate), &p.report));
    }
    csv.write(out)?;

    let mut checks = Checks::new();
    checks.check(
        co_pts.iter().all(|p| p.report.feasible),
        "co-propagation generates keys across 8..21 dBm on G652".into(),
    );
    checks.check(
        co_pts.windows(2).all(|w| w[1].report.rate_bps <= w[0].report.rate_bps + 1e-9),
        "co-propagation rate non-increasing in launch power".into(),
    );
    checks.check(
        cnt_pts.windows(2).all(|w| w[1].report.rate_bps <= w[0].report.rate_bps + 1e-9),
        "counter-propagation rate non-increasing in launch power".into(),
    );
    let at = |dbm: f64| cnt_pts.iter().find(|p| p.coordinate == dbm).unwrap();
    checks.check(
        !at(19.0).report.feasible && !at(20.0).report.feasible && !at(21.0).report.feasible,
        "counter-propagation collapses at 19 dBm and above (QBER over the 4% cap)".into(),
    );
    checks.check(
        at(18.0).report.feasible,
        "counter-propagation still generates keys at 18 dBm".into(),
    );
    Ok(checks.exit_code())
}

/// Noise-only SRS rates per fiber class and launch power (the coefficient
/// model the measured fit came from), with the dark/crosstalk floor listed.
pub fn reproduce_fig3(out: Option<&Path>) -> Result<u8> {
    let det = DetectorSpec::ingaas_2017();
    let filter = FilterSpec::fbg_20ghz();
    let mux = MuxSpec::default_backbone();
    let mut csv =
        Csv::new("fiber,aeff_um2,launch_power_dbm,srs_receiver_cps,dark_cps,crosstalk_cps");
    let fibers = ["g652-1", "g654-110-1", "g654-130-1"];
    let mut at_18 = Vec::new();
    for name in fibers {
        let fiber = FiberSpec::preset(name).unwrap();
        for p in 8..=21 {
            let traffic = ClassicalTrafficSpec::new(p as f64, Direction::Co);
            let srs = qcoex_core::channel::srs_rate_paper(&fiber, &traffic, &filter)
                .map_err(|e| anyhow!("{e}"))?;
            if p == 18 {
                at_18.push(srs);
            }
            csv.row(&[
                name.to_string(),
                format!("{}", fiber.aeff_um2),
                p.to_string(),
                f3(srs),
                f3(det.dark_rate_cps()),
                f3(mux.crosstalk_floor_cps),
            ]);
        }
    }
    csv.write(out)?;
    let reduction = 1.0 - at_18[2] / at_18[0];
    let mut checks = Checks::new();
    checks.check(
        (0.50..=0.70).contains(&reduction),
        format!("G654-130 SRS reduction vs G652 in the 50..70% band: {:.1}%", reduction * 100.0),
    );
    Ok(checks.exit_code())
}

/// Distance sweeps on G654-110-2 coefficients at 21 dBm with the physical
/// SRS model, for the deployed detectors and the SNSPD upgrade.
pub fn reproduce_fig4(out: Option<&Path>) -> Result<u8> {
    let lengths: Vec<f64> = (40..=170).map(|l| l as f64).collect();
    let mut csv = Csv::new(REPORT_HEADER);
    let mut checks = Checks::new();

    let mut crossings = Vec::new();
    let rate_at = |detector: DetectorSpec,
                       direction: Direction,
                       csv: &mut Csv|
     -> Result<(Option<f64>, f64, f64)> {
        let base = experiment_scenario(
            "g654-110-2",
            21.0,
            direction,
            SrsModel::Physical,
            detector,
        );
        let pts = scenario::sweep_distance(&base, &lengths, SrsModel::Physical)
            .map_err(|e| anyhow!("{e}"))?;
        let mut last_feasible = None;
        let mut rate66 = 0.0;
        let mut rate80 = 0.0;
        for p in &pts {
            if p.report.feasible {
                last_feasible = Some(p.coordinate);
            }
            if p.coordinate == 66.0 {
                rate66 = p.report.rate_bps;
            }
            if p.coordinate == 80.0 {
                rate80 = p.report.rate_bps;
            }
            csv.row(&report_row(&base.with_length(p.coordinate), &p.report));
        }
        Ok((last_feasible, rate66, rate80))
    };

    let (ingaas_co_cross, _ingaas_66, ingaas_80) =
        rate_at(DetectorSpec::ingaas_2017(), Direction::Co, &mut csv)?;
    let (snspd_co_cross, snspd_co_66, _) =
        rate_at(DetectorSpec::snspd_lab(), Direction::Co, &mut csv)?;
    let (snspd_cnt_cross, snspd_cnt_66, _) =
        rate_at(DetectorSpec::snspd_lab(), Direction::Counter, &mut csv)?;
    crossings.push(("ingaas co", ingaas_co_cross));
    crossings.push(("snspd co", snspd_co_cross));
    crossings.push(("snspd counter", snspd_cnt_cross));
    csv.write(out)?;

    for (label, cross) in &crossings {
        println!(
            "zero crossing {label}: {}",
            cross.map(|c| format!("{c} km")).unwrap_or_else(|| "none".into())
        );
    }
    checks.check(
        matches!(snspd_co_cross, Some(c) if (135.0..=155.0).contains(&c)),
        format!("SNSPD co-propagation crossing in 145 +/- 10 km: {snspd_co_cross:?}"),
    );
    // The saturating backward-scatter geometry keeps counter-propagation
    // noise at its 66 km level over distance, so this crossing sits far
    // below the published 130 km; see the README reproduction notes.
    checks.check(
        matches!(snspd_cnt_cross, Some(c) if (120.0..=140.0).contains(&c)),
        format!("SNSPD counter-propagation crossing in 130 +/- 10 km: {snspd_cnt_cross:?}"),
    );
    checks.check(
        (16_350.0..=49_050.0).contains(&snspd_co_66),
        format!("SNSPD co rate at 66 km within 50% of 32.7 kbps: {snspd_co_66:.0} bps"),
    );
    checks.check(
        (16_150.0..=48_450.0).contains(&snspd_cnt_66),
        format!("SNSPD counter rate at 66 km within 50% of 32.3 kbps: {snspd_cnt_66:.0} bps"),
    );
    checks.check(
        (950.0..=2_850.0).contains(&ingaas_80),
        format!("InGaAs co rate at 80 km within 50% of 1.9 kbps: {ingaas_80:.0} bps"),
    );
    Ok(checks.exit_code())
}

/// Stability sequences: a 3-hour-equivalent run of parameter-estimation
/// blocks at 18 dBm co-propagation for the three field fibers; per-block
/// statistics are sampled from the channel expectations.
pub fn reproduce_fig5(out: Option<&Path>, seed: u64) -> Result<u8> {
    let anchors = [("g654-110-1", 6_200.0), ("g652-1", 3_000.0), ("g654-130-1", 2_000.0)];
    let mut csv = Csv::new("fiber,block,rate_bps,qber,feasible");
    let mut checks = Checks::new();
    for (stream, (fiber, anchor)) in anchors.iter().enumerate() {
        let s = experiment_scenario(
            fiber,
            18.0,
            Direction::Co,
            SrsModel::Paper,
            DetectorSpec::ingaas_2017(),
        );
        let loss = s.link_loss_db().map_err(|e| anyhow!("{e}"))?;
        let budget = s.detected_noise_budget().map_err(|e| anyhow!("{e}"))?;
        let exp = qcoex_core::keyrate::channel_expectation(
            loss,
            budget.total_cps(),
            &s.detector,
            &s.protocol,
        );
        // blocks produced in 3 hours at the expected sifted rate
        let sifted_rate = s.protocol.rep_rate_hz
            * exp.dead_time_factor
            * s.protocol.p_mu
            * exp.gains.q_mu
            * s.protocol.sift_factor;
        let n_blocks =
            ((3.0 * 3600.0 * sifted_rate) / s.protocol.block_size_bits as f64).ceil() as u64;
        // acquisition runs until the block fills; a 2% window margin keeps
        // the sampled sifted count above the block size (>10 sigma)
        let pulses_per_block = (s.protocol.block_size_bits as f64 * 1.02
            / (s.protocol.p_mu * exp.gains.q_mu * exp.dead_time_factor * s.protocol.sift_factor))
            as u64;
        let mut rng = rng::stream_rng(seed, stream as u64);
        let mut rates = Vec::new();
        for block in 0..n_blocks {
            let tallies = sim::sample_tallies(&exp, &s.protocol, pulses_per_block, &mut rng);
            let adj = qcoex_core::keyrate::finite_size_adjust(&tallies, &s.protocol)
                .map_err(|e| anyhow!("{e}"))?;
            let bounds = qcoex_core::keyrate::worst_case_bounds(&adj, &s.protocol);
            let rate = qcoex_core::keyrate::secure_key_rate(
                &qcoex_core::keyrate::RateInputs {
                    q_mu: tallies.mu.gain(),
                    e_mu: tallies.mu.error_rate(),
                    y1_lower: bounds.y1_lower,
                    e1_upper: bounds.e1_upper,
                    dead_time_factor: exp.dead_time_factor,
                },
                &s.protocol,
            );
            let qber = tallies.mu.error_rate();
            csv.row(&[
                fiber.to_string(),
                block.to_string(),
                f3(rate),
                f(qber),
                (rate > 0.0 && qber <= s.protocol.qber_cap).to_string(),
            ]);
            rates.push(rate);
        }
        let mean = rates.iter().sum::<f64>() / rates.len().max(1) as f64;
        println!(
            "{fiber}: {} blocks over 3 h equivalent, mean rate {:.1} bps \
             (published stability anchor {:.1} bps, ratio {:.2})",
            rates.len(),
            mean,
            anchor,
            mean / anchor
        );
        checks.check(
            !rates.is_empty() && mean > 0.0,
            format!("{fiber}: stability sequence produced keys"),
        );
    }
    csv.write(out)?;
    Ok(checks.exit_code())
}

// ---------------------------------------------------------------------------
// distill
// ---------------------------------------------------------------------------

pub fn distill(
    scenario: &CoexistenceScenario,
    blocks: u64,
    block_bits: Option<u64>,
    dump_dir: Option<&Path>,
    out: Option<&Path>,
) -> Result<u8> {
    let mut protocol = scenario.protocol.clone();
    if let Some(bits) = block_bits {
        protocol.block_size_bits = bits;
    }
    let report = scenario.evaluate().map_err(|e| anyhow!("{e}"))?;
    let loss = scenario.link_loss_db().map_err(|e| anyhow!("{e}"))?;
    let budget = scenario.detected_noise_budget().map_err(|e| anyhow!("{e}"))?;
    let exp = qcoex_core::keyrate::channel_expectation(
        loss,
        budget.total_cps(),
        &scenario.detector,
        &protocol,
    );
    let sifted_rate = protocol.rep_rate_hz
        * exp.dead_time_factor
        * protocol.p_mu
        * exp.gains.q_mu
        * protocol.sift_factor;
    // 5% slot margin so fluctuations still fill the block
    let slots_per_block = (protocol.block_size_bits as f64
        / (protocol.p_mu * exp.gains.q_mu * exp.dead_time_factor * protocol.sift_factor)
        * 1.05) as u64;
    let scenario_hash = crc64(crate::scenario_file::serialize_scenario(scenario).as_bytes());

    let mut csv = Csv::new(
        "block,input_bits,qber,leaked_bits,ec_rounds,pa_factor,final_bits,verified,\
         outcome,auth_bits_consumed,throughput_bps_estimate",
    );
    let mut store_alice = AuthKeyStore::new(scenario.seed ^ 0xA117);
    let mut store_bob = AuthKeyStore::new(scenario.seed ^ 0xA117);
    let mut total_final = 0u64;
    let mut emitted = 0u64;

    for block in 0..blocks {
        let mut block_rng = rng::stream_rng(scenario.seed, 0x1000 + block);
        let simmed = sim::simulate_block(
            loss,
            &budget,
            &scenario.detector,
            &protocol,
            slots_per_block,
            &mut block_rng,
        )
        .map_err(|e| anyhow!("{e}"))?;
        let have = simmed.alice_mu.len().min(simmed.bob_mu.len());
        if (have as u64) < protocol.block_size_bits {
            return Err(anyhow!(
                "block {block}: only {have} sifted bits for a {}-bit block",
                protocol.block_size_bits
            ));
        }
        let take = protocol.block_size_bits as usize;
        let alice = truncate_bits(&simmed.alice_mu, take);
        let bob = truncate_bits(&simmed.bob_mu, take);
        if let Some(dir) = dump_dir {
            std::fs::create_dir_all(dir)?;
            let d = sim::dump::BlockDump {
                scenario_hash,
                tallies: [
                    simmed.tallies.mu.sifted,
                    simmed.tallies.nu.sifted,
                    simmed.tallies.omega.sifted,
                ],
                bits: alice.clone(),
            };
            std::fs::write(dir.join(format!("block-{block:04}.qblk")), sim::dump::encode(&d))?;
        }

        let params = DistillParams {
            protocol: &protocol,
            qber_hint: report.qber,
            estimated_final_rate_bps: report.rate_bps,
            sifted_rate_bps: sifted_rate,
            session_seed: scenario.seed ^ (0x5e55 + block),
        };
        let outcome = distill_block(&alice, &bob, &params, &mut store_alice, &mut store_bob)
            .map_err(|e| anyhow!("{e}"))?;
        match outcome {
            DistillOutcome::Keys { alice: ka, bob: kb, ledger, .. } => {
                debug_assert_eq!(ka, kb);
                total_final += ledger.final_bits as u64;
                emitted += 1;
                let throughput = sifted_rate * ledger.final_bits as f64
                    / ledger.input_bits as f64;
                csv.row(&[
                    block.to_string(),
                    ledger.input_bits.to_string(),
                    f(ledger.qber_measured),
                    ledger.leaked_bits.to_string(),
                    ledger.ec_rounds.to_string(),
                    f(ledger.pa_factor),
                    ledger.final_bits.to_string(),
                    ledger.verified.to_string(),
                    "keys".to_string(),
                    ledger.auth_bits_consumed.to_string(),
                    f3(throughput),
                ]);
            }
            DistillOutcome::Discarded { reason, ledger } => {
                csv.row(&[
                    block.to_string(),
                    ledger.input_bits.to_string(),
                    f(ledger.qber_measured),
                    ledger.leaked_bits.to_string(),
                    ledger.ec_rounds.to_string(),
                    f(ledger.pa_factor),
                    "0".to_string(),
                    ledger.verified.to_string(),
                    discard_label(reason).to_string(),
                    ledger.auth_bits_consumed.to_string(),
                    "0.000".to_string(),
                ]);
            }
        }
    }
    csv.write(out)?;
    println!(
        "distilled {emitted}/{blocks} blocks, {total_final} final bits \
         (predicted qber {:.3}%, predicted rate {:.1} bps)",
        report.qber * 100.0,
        report.rate_bps
    );
    Ok(EXIT_OK)
}

fn discard_label(reason: DiscardReason) -> &'static str {
    match reason {
        DiscardReason::QberCap => "discard:qber-cap",
        DiscardReason::EcNonConvergence => "discard:ec",
        DiscardReason::VerifyFailed => "discard:verify",
        DiscardReason::NoKey => "discard:no-key",
    }
}

fn truncate_bits(bits: &Bits, len: usize) -> Bits {
    let mut out = Bits::zeros(len);
    for i in 0..len {
        if bits.get(i) {
            out.set(i, true);
        }
    }
    out
}
