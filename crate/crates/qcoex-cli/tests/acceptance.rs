//! Acceptance suite: one test per release criterion, each printing a
//! PASS/FAIL line (run with `cargo test --test acceptance -- --nocapture`).
//!
//! Criterion 5's counter-propagation zero-crossing check encodes the
//! published 130 +/- 10 km anchor verbatim. The backward-scatter geometry
//! saturates with distance, which pins counter-propagation noise at its
//! 66 km level and moves the model's crossing far earlier; the check is
//! kept faithful to the anchor and fails. See the repository README for the
//! reproduction notes.

use qcoex_cli::scenario_file::parse_scenario;
use qcoex_core::bits::Bits;
use qcoex_core::channel::Direction;
use qcoex_core::detector::{apply_dead_time, DetectorSpec};
use qcoex_core::keyrate::{
    adjust_from_expectations, channel_expectation, e1_true, finite_size_adjust, qber_from_qsnr,
    secure_key_rate, worst_case_bounds, y1_true, DecoyParams, RateInputs,
};
use qcoex_core::postproc::{
    crc64_bits, distill, toeplitz_pa, AuthKeyStore, DistillOutcome, DistillParams, PaSpec,
};
use qcoex_core::scenario::{sweep_distance, CoexistenceScenario, SrsModel};
use qcoex_core::{math, rng, sim};
use std::path::{Path, PathBuf};
use std::process::Command;

fn scenario_file(name: &str) -> CoexistenceScenario {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name);
    parse_scenario(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn verdict(criterion: &str, ok: bool, detail: String) -> bool {
    println!(
        "ACCEPTANCE {criterion}: {} ({detail})",
        if ok { "PASS" } else { "FAIL" }
    );
    ok
}

#[test]
fn acceptance_01_dead_time_formula() {
    let det = DetectorSpec::ingaas_2017();
    let n = apply_dead_time(4e5, &det);
    let ok = (n - 363_636.0).abs() <= 1.0;
    assert!(verdict("01 dead-time formula", ok, format!("N_actual(4e5) = {n:.2} cps")));
}

#[test]
fn acceptance_02_qsnr_qber_anchor() {
    let p = DecoyParams::default();
    let q = qber_from_qsnr(11.0, &p);
    let ok = (0.038..=0.047).contains(&q);
    assert!(verdict("02 QSNR/QBER anchor", ok, format!("QBER(11 dB) = {:.3}%", q * 100.0)));
}

#[test]
fn acceptance_03_headline_rates() {
    let cases = [
        ("g654-110-co-21dBm.scn", 2_250.0, 9_000.0, 4_500.0),
        ("g654-110-counter-21dBm.scn", 2_550.0, 10_200.0, 5_100.0),
        ("g652-co-21dBm.scn", 1_500.0, 6_000.0, 3_000.0),
    ];
    let mut all = true;
    for (file, lo, hi, anchor) in cases {
        let s = scenario_file(file);
        let r = s.evaluate().unwrap();
        let ok = r.feasible && (lo..=hi).contains(&r.rate_bps);
        all &= verdict(
            "03 headline rate",
            ok,
            format!("{}: {:.1} bps vs published {anchor:.0} bps, band [{lo}, {hi}]", s.name, r.rate_bps),
        );
    }
    assert!(all);
}

#[test]
fn acceptance_04_table2_structure() {
    let output = Command::new(env!("CARGO_BIN_EXE_qcoex"))
        .args(["reproduce", "table2"])
        .output()
        .unwrap();
    let stdout = String::from_utf8_lossy(&output.stdout);
    let fails = stdout.lines().filter(|l| l.starts_with("FAIL")).count();
    let passes = stdout.lines().filter(|l| l.starts_with("PASS")).count();
    let ok = output.status.code() == Some(0) && fails == 0 && passes >= 60;
    assert!(verdict(
        "04 Table 2 structure",
        ok,
        format!("{passes} ordering/feasibility checks pass, {fails} fail, exit {:?}", output.status.code()),
    ));
}

struct Fig4 {
    ingaas_co_80: f64,
    snspd_co_66: f64,
    snspd_cnt_66: f64,
    snspd_co_crossing: Option<f64>,
    snspd_cnt_crossing: Option<f64>,
}

fn fig4_sweeps() -> Fig4 {
    let lengths: Vec<f64> = (40..=170).map(|l| l as f64).collect();
    let sweep = |detector: DetectorSpec, direction: Direction| {
        let mut s = scenario_file("snspd-distance.scn");
        s.detector = detector;
        s.traffic.direction = direction;
        s.srs_model = SrsModel::Physical;
        sweep_distance(&s, &lengths, SrsModel::Physical).unwrap()
    };
    let at = |pts: &[qcoex_core::keyrate::SweepPoint<f64>], l: f64| {
        pts.iter().find(|p| p.coordinate == l).unwrap().report.rate_bps
    };
    let crossing = |pts: &[qcoex_core::keyrate::SweepPoint<f64>]| {
        pts.iter().filter(|p| p.report.feasible).map(|p| p.coordinate).last()
    };
    let ingaas_co = sweep(DetectorSpec::ingaas_2017(), Direction::Co);
    let snspd_co = sweep(DetectorSpec::snspd_lab(), Direction::Co);
    let snspd_cnt = sweep(DetectorSpec::snspd_lab(), Direction::Counter);
    Fig4 {
        ingaas_co_80: at(&ingaas_co, 80.0),
        snspd_co_66: at(&snspd_co, 66.0),
        snspd_cnt_66: at(&snspd_cnt, 66.0),
        snspd_co_crossing: crossing(&snspd_co),
        snspd_cnt_crossing: crossing(&snspd_cnt),
    }
}

#[test]
fn acceptance_05_fig4_anchors() {
    let f = fig4_sweeps();
    let mut all = true;
    all &= verdict(
        "05 SNSPD co crossing 145 +/- 10 km",
        matches!(f.snspd_co_crossing, Some(c) if (135.0..=155.0).contains(&c)),
        format!("{:?} km", f.snspd_co_crossing),
    );
    all &= verdict(
        "05 SNSPD co 66 km rate within 50% of 32.7 kbps",
        (16_350.0..=49_050.0).contains(&f.snspd_co_66),
        format!("{:.0} bps", f.snspd_co_66),
    );
    all &= verdict(
        "05 SNSPD counter 66 km rate within 50% of 32.3 kbps",
        (16_150.0..=48_450.0).contains(&f.snspd_cnt_66),
        format!("{:.0} bps", f.snspd_cnt_66),
    );
    all &= verdict(
        "05 InGaAs co 80 km rate within 50% of 1.9 kbps",
        (950.0..=2_850.0).contains(&f.ingaas_co_80),
        format!("{:.0} bps", f.ingaas_co_80),
    );
    assert!(all);
}

#[test]
fn acceptance_05_fig4_counter_crossing() {
    // Faithful encoding of the published 130 +/- 10 km counter-propagation
    // anchor. The saturating backward-scatter geometry cannot reach it; this
    // red check documents the model/publication gap (see README).
    let f = fig4_sweeps();
    let ok = matches!(f.snspd_cnt_crossing, Some(c) if (120.0..=140.0).contains(&c));
    assert!(verdict(
        "05 SNSPD counter crossing 130 +/- 10 km",
        ok,
        format!("{:?} km", f.snspd_cnt_crossing),
    ));
}

#[test]
fn acceptance_06_decoy_bound_soundness() {
    let p = DecoyParams::default();
    let det = DetectorSpec::ingaas_2017();

    // exact expectations: zero violations allowed
    let mut rng = rng::seed_rng(0x60de);
    let mut feasible = 0u32;
    let mut violations = 0u32;
    for _ in 0..1000 {
        let loss = 5.0 + 35.0 * rng::uniform(&mut rng);
        let noise = math::exp(math::ln(10.0) * (1.0 + 4.0 * rng::uniform(&mut rng)));
        let exp = channel_expectation(loss, noise, &det, &p);
        let adj = adjust_from_expectations(&exp.gains, exp.e_mu, exp.e_nu, 0.0, 0.0, 0.0, 0.0);
        let b = worst_case_bounds(&adj, &p);
        if !b.feasible {
            continue;
        }
        feasible += 1;
        if b.y1_lower > y1_true(&exp) + 1e-15 || b.e1_upper < e1_true(&exp, &p) - 1e-15 {
            violations += 1;
        }
    }
    let exact_ok = violations == 0 && feasible >= 900;
    let detail_exact = format!("exact: {violations} violations over {feasible} feasible draws");

    // Monte Carlo statistics at 5e5 sifted bits with +/- 7 sigma adjustment
    let mut mc_violations = 0u32;
    let mut mc_checked = 0u32;
    let mut rng = rng::seed_rng(0x60df);
    for trial in 0..1000u64 {
        let loss = 15.0 + 12.0 * rng::uniform(&mut rng);
        let noise = 1_000.0 + 20_000.0 * rng::uniform(&mut rng);
        let exp = channel_expectation(loss, noise, &det, &p);
        let sifted_per_pulse = p.p_mu * exp.gains.q_mu * exp.dead_time_factor * p.sift_factor;
        let n_pulses = (p.block_size_bits as f64 * 1.05 / sifted_per_pulse) as u64;
        let mut trial_rng = rng::stream_rng(0xabcd, trial);
        let tallies = sim::sample_tallies(&exp, &p, n_pulses, &mut trial_rng);
        let adj = match finite_size_adjust(&tallies, &p) {
            Ok(a) => a,
            Err(_) => continue,
        };
        let b = worst_case_bounds(&adj, &p);
        if !b.feasible {
            continue;
        }
        mc_checked += 1;
        // measured gains carry the dead-time factor; the certified yield
        // bounds the same-scale ground truth
        let y1_scaled = y1_true(&exp) * exp.dead_time_factor;
        if b.y1_lower > y1_scaled || b.e1_upper < e1_true(&exp, &p) {
            mc_violations += 1;
        }
    }
    let mc_ok = mc_checked >= 900 && (mc_violations as f64) <= 0.001 * mc_checked as f64;
    let ok = exact_ok && mc_ok;
    assert!(verdict(
        "06 decoy-bound soundness",
        ok,
        format!("{detail_exact}; MC: {mc_violations} violations over {mc_checked} blocks"),
    ));
}

#[test]
fn acceptance_07_winnow_efficiency_and_residual() {
    let n = 500_000usize;
    let q = 0.025f64;
    let started = std::time::Instant::now();
    let h2 = math::binary_entropy(q);
    let mut in_band = 0u32;
    let mut residual_bits = 0u64;
    let trials = 100u64;
    for seed in 0..trials {
        let mut r = rng::seed_rng(7_000 + seed);
        let mut a = Bits::zeros(n);
        let mut b = Bits::zeros(n);
        for i in 0..n {
            let bit = rng::bernoulli(&mut r, 0.5);
            a.set(i, bit);
            b.set(i, bit ^ rng::bernoulli(&mut r, q));
        }
        let out = qcoex_core::postproc::winnow_correct(&a, &b, q, 77_000 + seed).unwrap();
        residual_bits += out.alice.bits.hamming_distance(&out.bob.bits);
        let eff = out.alice.leaked_bits as f64 / (n as f64 * h2);
        if (1.2..=1.5).contains(&eff) {
            in_band += 1;
        }
    }
    let per_bit = residual_bits as f64 / (n as f64 * trials as f64);
    let ok = in_band >= 95 && per_bit < 1e-6 && started.elapsed().as_secs() < 300;
    assert!(verdict(
        "07 Winnow efficiency/residual",
        ok,
        format!(
            "{in_band}/100 runs in [1.2, 1.5], residual {per_bit:.2e}/bit, {:.1} s",
            started.elapsed().as_secs_f64()
        ),
    ));
}

#[test]
fn acceptance_08_toeplitz_oracle_equivalence() {
    // naive GF(2) product with the documented orientation
    fn naive(input: &Bits, spec: &PaSpec) -> Bits {
        let (n, m) = (spec.input_len, spec.output_len);
        let mut out = Bits::zeros(m);
        for i in 0..m {
            let mut acc = false;
            for j in 0..n {
                let t_ij = if j >= i {
                    spec.seed.get(j - i)
                } else {
                    spec.seed.get(n - 1 + i - j)
                };
                acc ^= t_ij && input.get(j);
            }
            out.set(i, acc);
        }
        out
    }
    let mut rng = rng::seed_rng(88);
    let mut ok = true;
    for _ in 0..100 {
        let n = 1 + rng::gen_index(&mut rng, 1024) as usize;
        let m = 1 + rng::gen_index(&mut rng, n as u64) as usize;
        let mut seed = Bits::zeros(n + m - 1);
        for i in 0..seed.len() {
            if rng::bernoulli(&mut rng, 0.5) {
                seed.set(i, true);
            }
        }
        let spec = PaSpec { pa_factor: m as f64 / n as f64, input_len: n, output_len: m, seed };
        let mut x = Bits::zeros(n);
        for i in 0..n {
            if rng::bernoulli(&mut rng, 0.5) {
                x.set(i, true);
            }
        }
        if toeplitz_pa(&x, &spec).unwrap() != naive(&x, &spec) {
            ok = false;
            break;
        }
    }
    assert!(verdict("08 Toeplitz PA oracle equivalence", ok, "100 random (n, m, seed) triples".into()));
}

#[test]
fn acceptance_09_crc64_exhaustive_flip_detection() {
    let mut rng = rng::seed_rng(0xc4c);
    let n = 4096;
    let mut reference = Bits::zeros(n);
    for i in 0..n {
        if rng::bernoulli(&mut rng, 0.5) {
            reference.set(i, true);
        }
    }
    let base = crc64_bits(&reference);
    let mut detected = 0usize;
    for i in 0..n {
        let mut flipped = reference.clone();
        flipped.flip(i);
        if crc64_bits(&flipped) != base {
            detected += 1;
        }
    }
    let ok = detected == n;
    assert!(verdict(
        "09 CRC-64 single-bit detection",
        ok,
        format!("{detected}/{n} flips detected"),
    ));
}

fn erfc(x: f64) -> f64 {
    // Abramowitz-Stegun 7.1.26, |error| < 1.5e-7
    let sign_negative = x < 0.0;
    let x = x.abs();
    let t = 1.0 / (1.0 + 0.3275911 * x);
    let poly = t
        * (0.254829592
            + t * (-0.284496736 + t * (1.421413741 + t * (-1.453152027 + t * 1.061405429))));
    let erfc_pos = poly * (-x * x).exp();
    if sign_negative {
        2.0 - erfc_pos
    } else {
        erfc_pos
    }
}

fn monobit_p(bits: &Bits) -> f64 {
    let n = bits.len() as f64;
    let ones = bits.count_ones() as f64;
    let s = (2.0 * ones - n).abs() / n.sqrt();
    erfc(s / core::f64::consts::SQRT_2)
}

fn runs_p(bits: &Bits) -> f64 {
    let n = bits.len();
    let pi = bits.count_ones() as f64 / n as f64;
    let mut v = 1u64;
    for i in 1..n {
        if bits.get(i) != bits.get(i - 1) {
            v += 1;
        }
    }
    let expected = 2.0 * n as f64 * pi * (1.0 - pi);
    erfc((v as f64 - expected).abs() / (2.0 * (2.0 * n as f64).sqrt() * pi * (1.0 - pi)))
}

#[test]
fn acceptance_10_end_to_end_distill() {
    let presets = [
        ("g652-1", Direction::Co),
        ("g652-2", Direction::Counter),
        ("g654-110-1", Direction::Co),
        ("g654-110-2", Direction::Counter),
        ("g654-130-1", Direction::Co),
        ("g654-130-2", Direction::Counter),
    ];
    let blocks_per_preset = 167u64; // 1002 blocks total
    let block_bits = 32_768u64;
    let mut aggregated = Bits::new();
    let mut emitted = 0u64;
    let mut identical = true;

    for (idx, (fiber, direction)) in presets.iter().enumerate() {
        let mut s = scenario_file("g654-110-co-21dBm.scn");
        s.name = format!("{fiber}-{direction}");
        s.fiber = qcoex_core::channel::FiberSpec::preset(fiber).unwrap();
        s.traffic.direction = *direction;
        // parameter estimation runs on the full protocol window; the
        // distillation pipeline processes smaller hardware blocks
        let report = s.evaluate().unwrap();
        assert!(report.feasible, "{fiber} must be feasible at the reference point");
        let distill_protocol =
            DecoyParams { block_size_bits: block_bits, ..s.protocol.clone() };
        let loss = s.link_loss_db().unwrap();
        let budget = s.detected_noise_budget().unwrap();
        let exp = channel_expectation(loss, budget.total_cps(), &s.detector, &s.protocol);
        let sifted_rate = s.protocol.rep_rate_hz
            * exp.dead_time_factor
            * s.protocol.p_mu
            * exp.gains.q_mu
            * s.protocol.sift_factor;
        let slots = (block_bits as f64 * 1.05
            / (s.protocol.p_mu * exp.gains.q_mu * exp.dead_time_factor * s.protocol.sift_factor))
            as u64;
        let mut store_a = AuthKeyStore::new(500 + idx as u64);
        let mut store_b = AuthKeyStore::new(500 + idx as u64);
        for block in 0..blocks_per_preset {
            let mut block_rng = rng::stream_rng(9_000 + idx as u64, block);
            let simmed =
                sim::simulate_block(loss, &budget, &s.detector, &s.protocol, slots, &mut block_rng)
                    .unwrap();
            let take = block_bits as usize;
            assert!(simmed.alice_mu.len() >= take, "{fiber} block {block} under-filled");
            let mut alice = Bits::zeros(take);
            let mut bob = Bits::zeros(take);
            for i in 0..take {
                alice.set(i, simmed.alice_mu.get(i));
                bob.set(i, simmed.bob_mu.get(i));
            }
            let params = DistillParams {
                protocol: &distill_protocol,
                qber_hint: report.qber,
                estimated_final_rate_bps: report.rate_bps,
                sifted_rate_bps: sifted_rate,
                session_seed: 31_000 + idx as u64 * 1_000 + block,
            };
            match distill(&alice, &bob, &params, &mut store_a, &mut store_b).unwrap() {
                DistillOutcome::Keys { alice, bob, .. } => {
                    emitted += 1;
                    if alice != bob {
                        identical = false;
                    }
                    aggregated.extend_from(&alice);
                }
                DistillOutcome::Discarded { .. } => {}
            }
        }
    }

    let monobit = monobit_p(&aggregated);
    let runs = runs_p(&aggregated);
    let ok = identical
        && emitted >= 990
        && aggregated.len() >= 1_000_000
        && monobit > 0.01
        && runs > 0.01;
    assert!(verdict(
        "10 end-to-end distill",
        ok,
        format!(
            "{emitted}/1002 blocks emitted identical keys, {} aggregated bits, \
             monobit p = {monobit:.4}, runs p = {runs:.4}",
            aggregated.len()
        ),
    ));
}

#[test]
fn acceptance_11_deterministic_csv() {
    let scn = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios/g654-110-co-21dBm.scn");
    let run = |out: &PathBuf, args: &[&str]| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_qcoex"));
        cmd.arg("--scenario").arg(&scn).arg("--seed").arg("11").arg("--out").arg(out);
        for a in args {
            cmd.arg(a);
        }
        let status = cmd.status().unwrap();
        assert!(status.code() == Some(0) || status.code() == Some(2));
        std::fs::read(out).unwrap()
    };
    let dir = std::env::temp_dir().join(format!("qcoex-accept-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let mut ok = true;
    for (name, args) in [
        ("evaluate", vec!["evaluate"]),
        ("sweep-power", vec!["sweep-power", "--powers", "8,12,16,21"]),
        ("sweep-distance", vec!["sweep-distance", "--lengths", "50,66,80"]),
        ("distill", vec!["distill", "--blocks", "3", "--block-bits", "8192"]),
    ] {
        let a = run(&dir.join(format!("{name}-a.csv")), &args);
        let b = run(&dir.join(format!("{name}-b.csv")), &args);
        if a != b {
            ok = false;
        }
    }
    assert!(verdict("11 deterministic CSV", ok, "evaluate/sweeps/distill byte-identical".into()));
}
