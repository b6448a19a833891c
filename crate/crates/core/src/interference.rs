//! Two-photon interference at a beam splitter.
//!
//! Two routes to the dip visibility live here: the closed form
//! [`eq1_visibility`] in terms of wavepacket durations and coherence time, and
//! the numerical route through [`overlap`] of two spectral density matrices.
//! The normalised coincidence probability at relative delay δ is
//! `p(δ) = 1 - Tr(ρ_a D(δ) ρ_b D(δ)†)` with `D(δ) = diag(e^{iωδ})`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::sources::{effective_duration, DurationRule, SourceSpec, SpectralDensityMatrix};
use crate::spectral::coherence_time;

/// Far-delay threshold for [`visibility_of`], in coherence times.
pub const BASELINE_COHERENCE_TIMES: f64 = 5.0;

/// Values slightly above 1 are tolerated in probability scans.
pub const PROBABILITY_SLACK: f64 = 1.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScanKind {
    /// Coincidence probability normalised to a far-delay baseline of 1.
    Probability,
    /// Raw or background-corrected counts.
    Counts,
}

/// Coincidence signal versus relative delay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomScan {
    pub kind: ScanKind,
    /// ps, strictly increasing.
    pub delays: Vec<f64>,
    pub values: Vec<f64>,
    pub errors: Option<Vec<f64>>,
}

impl HomScan {
    pub fn new(
        kind: ScanKind,
        delays: Vec<f64>,
        values: Vec<f64>,
        errors: Option<Vec<f64>>,
    ) -> Result<Self> {
        let scan = Self {
            kind,
            delays,
            values,
            errors,
        };
        scan.validate()?;
        Ok(scan)
    }

    pub fn validate(&self) -> Result<()> {
        ensure(!self.delays.is_empty(), || "scan has no points".into())?;
        ensure(self.delays.len() == self.values.len(), || {
            format!(
                "scan has {} delays but {} values",
                self.delays.len(),
                self.values.len()
            )
        })?;
        if let Some(e) = &self.errors {
            ensure(e.len() == self.values.len(), || {
                "scan error column length differs from values".into()
            })?;
        }
        ensure(self.delays.windows(2).all(|w| w[1] > w[0]), || {
            "scan delays must be strictly increasing".into()
        })?;
        ensure(self.values.iter().all(|v| v.is_finite()), || {
            "scan values must be finite".into()
        })?;
        if self.kind == ScanKind::Probability {
            ensure(
                self.values
                    .iter()
                    .all(|&v| (-1e-9..=PROBABILITY_SLACK).contains(&v)),
                || "probability scan values must lie in [0, 1.05]".into(),
            )?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.delays.len()
    }

    pub fn is_empty(&self) -> bool {
        self.delays.is_empty()
    }

    /// Index and value of the smallest sample.
    pub fn minimum(&self) -> (usize, f64) {
        self.values
            .iter()
            .copied()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("validated scan is non-empty")
    }
}

/// Closed-form dip visibility for two wavepackets of effective durations
/// `dt_a`, `dt_b` filtered to coherence time `dtau`:
///
/// `V = 1 / √(1 + dt_a² / (2 dtau²) + dt_b² / (2 dtau²))`
pub fn eq1_visibility(dt_a: f64, dt_b: f64, dtau: f64) -> Result<f64> {
    ensure(dtau.is_finite() && dtau > 0.0, || {
        format!("coherence time must be > 0, got {dtau}")
    })?;
    ensure(dt_a >= 0.0 && dt_b >= 0.0, || {
        format!("wavepacket durations must be >= 0, got {dt_a}, {dt_b}")
    })?;
    let two_tau2 = 2.0 * dtau * dtau;
    Ok(1.0 / (1.0 + (dt_a * dt_a + dt_b * dt_b) / two_tau2).sqrt())
}

/// Closed-form prediction for a pair of sources.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Eq1Prediction {
    pub rule: DurationRule,
    pub coherence_time_ps: f64,
    pub duration_a_ps: f64,
    pub duration_b_ps: f64,
    pub visibility: f64,
}

/// Evaluates the closed form with Δτ from source A's idler filter.
pub fn predict(a: &SourceSpec, b: &SourceSpec, rule: DurationRule) -> Result<Eq1Prediction> {
    predict_with_filter(a, b, rule, a.idler_filter.bandwidth_pm)
}

fn predict_with_filter(
    a: &SourceSpec,
    b: &SourceSpec,
    rule: DurationRule,
    idler_bandwidth_pm: f64,
) -> Result<Eq1Prediction> {
    let filter = a.idler_filter.with_bandwidth_pm(idler_bandwidth_pm)?;
    let dtau = coherence_time(&filter)?;
    let dt_a = effective_duration(a, rule);
    let dt_b = effective_duration(b, rule);
    Ok(Eq1Prediction {
        rule,
        coherence_time_ps: dtau,
        duration_a_ps: dt_a,
        duration_b_ps: dt_b,
        visibility: eq1_visibility(dt_a, dt_b, dtau)?,
    })
}

/// Closed-form visibility after swapping both idler filters for ones of
/// `idler_bandwidth_pm`; the wavepacket durations are unchanged.
pub fn predict_narrowband(
    a: &SourceSpec,
    b: &SourceSpec,
    rule: DurationRule,
    idler_bandwidth_pm: f64,
) -> Result<f64> {
    ensure(idler_bandwidth_pm > 0.0, || {
        format!("idler bandwidth must be > 0 pm, got {idler_bandwidth_pm}")
    })?;
    Ok(predict_with_filter(a, b, rule, idler_bandwidth_pm)?.visibility)
}

/// `Tr(ρ_a · D(δ) ρ_b D(δ)†)`, the mode overlap of two photons offset by
/// `delay` ps.
pub fn overlap(
    rho_a: &SpectralDensityMatrix,
    rho_b: &SpectralDensityMatrix,
    delay: f64,
) -> Result<f64> {
    if !rho_a.grid.same_as(&rho_b.grid) {
        return Err(Error::GridMismatch);
    }
    let phases: Vec<Complex64> = rho_a
        .grid
        .detunings()
        .map(|w| Complex64::from_polar(1.0, w * delay))
        .collect();
    Ok(overlap_with_phases(rho_a, rho_b, &phases).re)
}

fn overlap_with_phases(
    rho_a: &SpectralDensityMatrix,
    rho_b: &SpectralDensityMatrix,
    phases: &[Complex64],
) -> Complex64 {
    // Σ_jk a_jk · b_kj · e^{iω_k δ} e^{-iω_j δ}
    let a = &rho_a.elements;
    let b = &rho_b.elements;
    let n = phases.len();
    let mut total = Complex64::new(0.0, 0.0);
    for k in 0..n {
        let mut col = Complex64::new(0.0, 0.0);
        for j in 0..n {
            col += a[(j, k)] * b[(k, j)] * phases[j].conj();
        }
        total += col * phases[k];
    }
    total
}

/// Normalised coincidence probability `1 - overlap(δ)` at each delay.
/// Delays are evaluated in parallel and returned in input order.
pub fn hom_dip(
    rho_a: &SpectralDensityMatrix,
    rho_b: &SpectralDensityMatrix,
    delays: &[f64],
) -> Result<HomScan> {
    if !rho_a.grid.same_as(&rho_b.grid) {
        return Err(Error::GridMismatch);
    }
    let values = delays
        .par_iter()
        .map(|&d| overlap(rho_a, rho_b, d).map(|o| (1.0 - o).max(0.0)))
        .collect::<Result<Vec<_>>>()?;
    HomScan::new(ScanKind::Probability, delays.to_vec(), values, None)
}

/// `n` delays evenly spaced over `[-half_range, half_range]`.
pub fn symmetric_delays(half_range: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..n)
            .map(|k| -half_range + 2.0 * half_range * k as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// Dip visibility `(baseline - minimum) / baseline`, with the baseline taken
/// as the mean of all samples at `|δ| >= far_delay`.
pub fn visibility_of(scan: &HomScan, far_delay: f64) -> Result<f64> {
    scan.validate()?;
    let far: Vec<f64> = scan
        .delays
        .iter()
        .zip(&scan.values)
        .filter(|(d, _)| d.abs() >= far_delay)
        .map(|(_, &v)| v)
        .collect();
    if far.is_empty() {
        return Err(Error::InsufficientBaseline {
            threshold_ps: far_delay,
        });
    }
    let baseline = far.iter().sum::<f64>() / far.len() as f64;
    ensure(baseline > 0.0, || "scan baseline must be positive".into())?;
    let (_, min) = scan.minimum();
    Ok((baseline - min) / baseline)
}

/// [`visibility_of`] with the far-delay threshold at
/// `BASELINE_COHERENCE_TIMES` coherence times.
pub fn visibility_with_coherence_time(scan: &HomScan, coherence_time: f64) -> Result<f64> {
    visibility_of(scan, BASELINE_COHERENCE_TIMES * coherence_time)
}
