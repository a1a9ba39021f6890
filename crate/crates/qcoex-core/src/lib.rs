//! Modeling and simulation of decoy-state BB84 QKD coexisting with strong
//! classical WDM traffic in a shared fiber.
//!
//! The crate covers the full chain from link budgets to final secret keys:
//!
//! - [`channel`] — fiber attenuation, WDM component losses, and spontaneous
//!   Raman scattering noise models with field-fiber presets.
//! - [`detector`] — gated InGaAs/InP and SNSPD single-photon detector models
//!   (efficiency, dark counts, afterpulsing, dead-time saturation).
//! - [`keyrate`] — QSNR, QBER, vacuum+weak decoy-state bounds, finite-size
//!   adjustment, and the secure key rate.
//! - [`scenario`] — a full coexistence experiment description and the
//!   evaluation/sweep drivers.
//! - [`sim`] — seeded Monte Carlo simulation of the quantum layer producing
//!   correlated raw key material with ground-truth statistics.
//! - [`postproc`] — bit-exact post-processing: Winnow error correction,
//!   CRC-64 error verification, Toeplitz privacy amplification, and
//!   LFSR-Toeplitz authentication.
//!
//! The crate is `no_std`-compatible (requires `alloc`); the `std` feature
//! (default) only switches the float math backend. All randomized paths take
//! explicit seeds and are bit-reproducible.

#![cfg_attr(not(feature = "std"), no_std)]
#![deny(unsafe_code)]

extern crate alloc;

pub mod bits;
pub mod channel;
pub mod detector;
pub mod keyrate;
pub mod math;
pub mod postproc;
pub mod rng;
pub mod scenario;
pub mod sim;

pub use channel::{
    ClassicalTrafficSpec, Direction, FiberSpec, FilterSpec, MuxSpec, NoiseBudget, Wavelength,
};
pub use detector::DetectorSpec;
pub use keyrate::{DecoyParams, KeyRateReport};
pub use scenario::{CoexistenceScenario, SrsModel};
