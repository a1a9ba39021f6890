//! Toeplitz privacy amplification over GF(2).
//!
//! Matrix orientation (fixed for cross-implementation compatibility): for an
//! m x n matrix with seed bits s[0..n+m-1),
//!
//! - first row:    T[0][j] = s[j]
//! - first column: T[i][0] = s[n-1+i]
//! - generally:    T[i][j] = s[j-i] for j >= i, s[n-1+i-j] for j < i
//!
//! The fast path evaluates the product as a sliding windowed AND/parity; it
//! is bit-for-bit identical to the naive matrix product.

use crate::bits::Bits;
use crate::math;
use alloc::format;
use alloc::string::String;
use core::fmt;

#[derive(Clone, Debug, PartialEq)]
pub enum PaError {
    Invalid(String),
}

impl fmt::Display for PaError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PaError::Invalid(msg) => write!(f, "privacy amplification: {msg}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for PaError {}

/// Privacy-amplification geometry: compress `input_len` bits to
/// `output_len = floor(pa_factor * input_len)` with an `n + m - 1` bit seed.
#[derive(Clone, Debug, PartialEq)]
pub struct PaSpec {
    pub pa_factor: f64,
    pub input_len: usize,
    pub output_len: usize,
    pub seed: Bits,
}

impl PaSpec {
    /// Geometry from a PA factor; the seed must hold `n + m - 1` bits.
    pub fn from_factor(pa_factor: f64, input_len: usize, seed: Bits) -> Result<PaSpec, PaError> {
        if !(0.0..=1.0).contains(&pa_factor) {
            return Err(PaError::Invalid(format!(
                "pa_factor = {pa_factor} (must be in [0, 1])"
            )));
        }
        let output_len = math::floor(pa_factor * input_len as f64) as usize;
        let spec = PaSpec { pa_factor, input_len, output_len, seed };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), PaError> {
        if self.output_len > self.input_len {
            return Err(PaError::Invalid(format!(
                "output_len {} > input_len {}",
                self.output_len, self.input_len
            )));
        }
        let need = self.input_len + self.output_len - 1;
        if self.output_len > 0 && self.seed.len() != need {
            return Err(PaError::Invalid(format!(
                "seed length {} != n + m - 1 = {need}",
                self.seed.len()
            )));
        }
        Ok(())
    }
}

/// `T * input` over GF(2).
pub fn toeplitz_pa(input: &Bits, spec: &PaSpec) -> Result<Bits, PaError> {
    spec.validate()?;
    if input.len() != spec.input_len {
        return Err(PaError::Invalid(format!(
            "input length {} != spec input_len {}",
            input.len(),
            spec.input_len
        )));
    }
    let (n, m) = (spec.input_len, spec.output_len);
    if m == 0 {
        return Ok(Bits::new());
    }
    // Diagonal sequence C[k]: reverse of the first row followed by the first
    // column, so that T[i][j] = C[(n-1) + i - j]. Reversing C gives windows
    // D[(m-1-i) + j] aligned with the input for a word-sliding AND/parity.
    let mut d = Bits::zeros(n + m - 1);
    for k in 0..(n + m - 1) {
        let c_k = if k < n { spec.seed.get(n - 1 - k) } else { spec.seed.get(k) };
        // D[t] = C[n + m - 2 - t]
        d.set(n + m - 2 - k, c_k);
    }
    let mut out = Bits::zeros(m);
    for i in 0..m {
        if input.window_and_parity(&d, m - 1 - i, n) {
            out.set(i, true);
        }
    }
    Ok(out)
}

/// PA factor from the estimated final and corrected key rates, clamped to
/// [0, 1]. Non-positive corrected rates yield 0 (no key, block dropped).
pub fn compute_pa_factor(corrected_rate_bps: f64, estimated_final_rate_bps: f64) -> f64 {
    if corrected_rate_bps <= 0.0 {
        return 0.0;
    }
    (estimated_final_rate_bps / corrected_rate_bps).clamp(0.0, 1.0)
}
