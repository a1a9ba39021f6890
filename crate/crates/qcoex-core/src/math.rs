//! Float math shims (std intrinsics or `libm` under `no_std`) and small
//! numeric helpers shared across the crate.

pub(crate) const LN_10: f64 = core::f64::consts::LN_10;
/// dB per neper: 10/ln(10).
pub(crate) const DB_PER_NEPER: f64 = 10.0 / LN_10;

macro_rules! shim1 {
    ($name:ident, $libm:ident) => {
        #[cfg(feature = "std")]
        #[inline]
        pub fn $name(x: f64) -> f64 {
            x.$name()
        }
        #[cfg(not(feature = "std"))]
        #[inline]
        pub fn $name(x: f64) -> f64 {
            libm::$libm(x)
        }
    };
}

shim1!(exp, exp);
shim1!(ln, log);
shim1!(log2, log2);
shim1!(log10, log10);
shim1!(sqrt, sqrt);
shim1!(floor, floor);
shim1!(round, round);
shim1!(cos, cos);

/// e^x - 1, accurate near zero.
#[cfg(feature = "std")]
#[inline]
pub fn expm1(x: f64) -> f64 {
    x.exp_m1()
}
#[cfg(not(feature = "std"))]
#[inline]
pub fn expm1(x: f64) -> f64 {
    libm::expm1(x)
}

/// 10^(x/10): dB ratio to linear.
#[inline]
pub fn db_to_linear(db: f64) -> f64 {
    exp(db * (LN_10 / 10.0))
}

/// Linear power ratio to dB.
#[inline]
pub fn linear_to_db(lin: f64) -> f64 {
    10.0 * log10(lin)
}

/// dBm to mW.
#[inline]
pub fn dbm_to_mw(dbm: f64) -> f64 {
    db_to_linear(dbm)
}

/// Binary entropy H2(x) in bits. Zero outside (0, 1).
pub fn binary_entropy(x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        return 0.0;
    }
    -x * log2(x) - (1.0 - x) * log2(1.0 - x)
}
