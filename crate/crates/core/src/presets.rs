//! Operating point of the two-source experiment: a 1064 nm picosecond pump
//! shared by a 2 cm PPLN waveguide (TWM) and a 20 cm microstructured fibre
//! (FWM), both heralding 1553.3 nm idlers through 600 pm FBGs.

use crate::counting::{
    calibrate_efficiencies, DetectorSpec, ExperimentConfig, PhotonStatistics, SourceRates,
};
use crate::sources::{Process, SourceSpec};
use crate::spectral::{FilterSpec, PumpPulse};

pub const IDLER_WAVELENGTH_NM: f64 = 1553.3;
pub const SIGNAL_WAVELENGTH_NM: f64 = 809.2;
pub const IDLER_FBG_PM: f64 = 600.0;
pub const PAIRS_PER_PULSE: f64 = 0.05;

/// 0.3 ps/mm, i.e. 6 ps over the 2 cm waveguide.
pub const PPLN_WALKOFF_PS_PER_CM: f64 = 3.0;

/// Raman photons per pulse in the fibre idler band; brings the fibre
/// source's coincidence-to-accidental ratio down to 20 (see
/// [`crate::counting::calibrate_noise_for_car`]).
pub const MF_RAMAN_PHOTONS_PER_PULSE: f64 = 1.6e-3;

/// Dark-count probability of a Si APD per coincidence window.
pub const SI_DARK_PER_GATE: f64 = 1e-6;
/// Dark-count probability of a gated InGaAs APD per gate.
pub const INGAAS_DARK_PER_GATE: f64 = 1e-5;

pub const ACQUISITION_MINUTES: f64 = 56.0;
/// Duration of each single-source background run.
pub const BACKGROUND_MINUTES: f64 = 210.0;
pub const BACKGROUND_COUNTS_PER_MINUTE: f64 = 0.145;

pub fn pump() -> PumpPulse {
    PumpPulse {
        center_wavelength_nm: 1064.0,
        duration_fwhm_ps: 7.0,
        bandwidth_fwhm_nm: 0.7,
        repetition_rate_mhz: 80.0,
    }
}

fn filter(center: f64, pm: f64) -> FilterSpec {
    FilterSpec::rectangular(center, pm).expect("preset filter is valid")
}

pub fn ppln_source() -> SourceSpec {
    SourceSpec {
        name: "PPLN/W".into(),
        process: Process::Twm,
        medium_length_cm: 2.0,
        pump: pump(),
        signal_filter: filter(SIGNAL_WAVELENGTH_NM, 500.0),
        idler_filter: filter(IDLER_WAVELENGTH_NM, IDLER_FBG_PM),
        pairs_per_pulse: PAIRS_PER_PULSE,
        walkoff_ps_per_cm: PPLN_WALKOFF_PS_PER_CM,
        noise_photons_per_pulse: 0.0,
    }
}

pub fn mf_source() -> SourceSpec {
    SourceSpec {
        name: "MF".into(),
        process: Process::Fwm,
        medium_length_cm: 20.0,
        pump: pump(),
        signal_filter: filter(SIGNAL_WAVELENGTH_NM, 150.0),
        idler_filter: filter(IDLER_WAVELENGTH_NM, IDLER_FBG_PM),
        pairs_per_pulse: PAIRS_PER_PULSE,
        walkoff_ps_per_cm: 0.0,
        noise_photons_per_pulse: MF_RAMAN_PHOTONS_PER_PULSE,
    }
}

/// Separable source with Gaussian filters, a broad flat pump envelope and no
/// walk-off. Its heralded photon has a Gaussian spectrum and Gaussian arrival
/// jitter of FWHM `duration_ps`, the case the closed form describes exactly.
pub fn gaussian_source(duration_ps: f64, idler_pm: f64) -> SourceSpec {
    SourceSpec {
        name: "gaussian".into(),
        process: Process::Fwm,
        medium_length_cm: 1.0,
        pump: PumpPulse {
            duration_fwhm_ps: duration_ps,
            bandwidth_fwhm_nm: 200.0,
            ..pump()
        },
        signal_filter: FilterSpec::gaussian(SIGNAL_WAVELENGTH_NM, 300.0)
            .expect("preset filter is valid"),
        idler_filter: FilterSpec::gaussian(IDLER_WAVELENGTH_NM, idler_pm)
            .expect("preset filter is valid"),
        pairs_per_pulse: PAIRS_PER_PULSE,
        walkoff_ps_per_cm: 0.0,
        noise_photons_per_pulse: 0.0,
    }
}

/// Trigger and coincidence rates measured on each source alone.
pub fn ppln_rates() -> SourceRates {
    SourceRates {
        trigger_khz: 80.0,
        coincidence_khz: 0.5,
    }
}

pub fn mf_rates() -> SourceRates {
    SourceRates {
        trigger_khz: 100.0,
        coincidence_khz: 1.0,
    }
}

/// 41 delays over ±40 ps.
pub fn delays() -> Vec<f64> {
    (0..41).map(|k| -40.0 + 2.0 * k as f64).collect()
}

/// Full four-fold experiment with efficiencies calibrated from the
/// single-source rates. Source A is the waveguide, source B the fibre.
pub fn experiment() -> ExperimentConfig {
    let a = ppln_source();
    let b = mf_source();
    let rep = a.pump.repetition_rate_mhz;
    let (sig_a, idl_a) = calibrate_efficiencies(&ppln_rates(), a.pairs_per_pulse, rep)
        .expect("preset rates are consistent");
    let (sig_b, idl_b) = calibrate_efficiencies(&mf_rates(), b.pairs_per_pulse, rep)
        .expect("preset rates are consistent");
    let si = |efficiency| DetectorSpec {
        efficiency,
        dark_prob_per_gate: SI_DARK_PER_GATE,
        gated: false,
    };
    let ingaas = |efficiency| DetectorSpec {
        efficiency,
        dark_prob_per_gate: INGAAS_DARK_PER_GATE,
        gated: true,
    };
    ExperimentConfig {
        source_a: a,
        source_b: b,
        det_signal_a: si(sig_a),
        det_signal_b: si(sig_b),
        det_idler_a: ingaas(idl_a),
        det_idler_b: ingaas(idl_b),
        splitter_reflectivity: 0.5,
        acquisition_minutes: ACQUISITION_MINUTES,
        background_minutes: BACKGROUND_MINUTES,
        delays: delays(),
        rng_seed: 0,
        statistics: PhotonStatistics::Poisson,
        max_pairs: crate::counting::DEFAULT_MAX_PAIRS,
    }
}
