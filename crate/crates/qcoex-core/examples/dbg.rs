// scratch probe for winnow efficiency tuning (not shipped)
use qcoex_core::bits::Bits;
use qcoex_core::math;
use qcoex_core::postproc::winnow::winnow_correct;
use qcoex_core::rng;

fn main() {
    let n = 500_000usize;
    let q = 0.025f64;
    let h2 = math::binary_entropy(q);
    let mut effs = Vec::new();
    let mut residual_total = 0u64;
    let mut in_band = 0;
    let trials = 100u64;
    for seed in 0..trials {
        let mut r = rng::seed_rng(40_000 + seed);
        let mut a = Bits::zeros(n);
        let mut b = Bits::zeros(n);
        for i in 0..n {
            let bit = rng::bernoulli(&mut r, 0.5);
            a.set(i, bit);
            b.set(i, bit ^ rng::bernoulli(&mut r, q));
        }
        let out = winnow_correct(&a, &b, q, 90_000 + seed).unwrap();
        let resid = out.alice.bits.hamming_distance(&out.bob.bits);
        residual_total += resid;
        let eff = out.alice.leaked_bits as f64 / (n as f64 * h2);
        if (1.2..=1.5).contains(&eff) {
            in_band += 1;
        }
        effs.push((eff, out.alice.ec_rounds, resid));
    }
    effs.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
    println!("min {:?}", effs.first().unwrap());
    println!("med {:?}", effs[effs.len() / 2]);
    println!("max {:?}", effs.last().unwrap());
    println!("in-band [1.2,1.5]: {in_band}/{trials}");
    println!(
        "residual: {} bits over {} -> {:.2e}/bit",
        residual_total,
        n as u64 * trials,
        residual_total as f64 / (n as f64 * trials as f64)
    );
}
