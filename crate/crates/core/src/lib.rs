//! Simulation of Hong-Ou-Mandel interference between heralded single photons
//! from two independent pair sources.
//!
//! The pipeline runs from filter and pump parameters ([`spectral`]) through
//! joint spectra and heralded density matrices ([`sources`]) to the two-photon
//! dip ([`interference`]), emulated four-fold counting ([`counting`]) and dip
//! fits ([`fitting`]). [`presets`] holds the reference two-source setup.
//!
//! ```
//! use homsim::{interference, presets, DurationRule};
//!
//! let p = interference::predict(&presets::ppln_source(), &presets::mf_source(), DurationRule::Quadrature)?;
//! assert!((p.coherence_time_ps - 13.41).abs() < 0.01);
//! assert!((p.visibility - 0.8536).abs() < 1e-3);
//! # Ok::<(), homsim::Error>(())
//! ```

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod counting;
mod error;
pub mod fitting;
pub mod interference;
pub mod presets;
pub mod sources;
pub mod spectral;

pub use counting::{ExperimentConfig, TallyResult};
pub use error::{Error, Result};
pub use fitting::{fit_dip, fwhm_numeric, DipFit, DipModel};
pub use interference::{eq1_visibility, hom_dip, overlap, HomScan, ScanKind};
pub use sources::{heralded_pair, heralded_state, DurationRule, HeraldedPhoton, SourceSpec};
pub use spectral::{coherence_time, FilterSpec, FrequencyGrid, PumpPulse};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/spectral.md")]
    mod spectral {}
    #[doc = include_str!("../../../book/src/sources.md")]
    mod sources {}
    #[doc = include_str!("../../../book/src/interference.md")]
    mod interference {}
    #[doc = include_str!("../../../book/src/counting.md")]
    mod counting {}
    #[doc = include_str!("../../../book/src/fitting.md")]
    mod fitting {}
}
