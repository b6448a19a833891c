//! Photon-pair sources and the heralded single photons they deliver.
//!
//! A source is described by its nonlinear process, the pump that drives it,
//! and the filters on its two arms. [`joint_spectral_amplitude`] builds the
//! filtered two-photon spectrum; [`heralded_state`] traces out the herald
//! (signal) photon together with the emission-time record to obtain the
//! idler's spectral density matrix.
//!
//! Emission-time record: a pair is born at a random instant inside the pump
//! pulse and, for a medium with pump-signal walk-off, at a random depth in the
//! medium. Neither instant is resolved by pulse-level heralding, so the
//! heralded idler is a mixture of time-translated wavepackets whose arrival
//! time is uncertain by the effective duration Δt. The jitter is taken as
//! Gaussian with FWHM Δt, so tracing it out multiplies ρ by
//! `exp(-(ω - ω')² σ² / 2)` with `σ = Δt / FWHM_PER_SIGMA`.

use std::f64::consts::SQRT_2;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::spectral::{
    coherence_time, filter_amplitude, gaussian_amplitude, sampled_fwhm, wavelength_bandwidth,
    FilterSpec, FrequencyGrid, PumpPulse, FWHM_PER_SIGMA,
};

/// Pair rate above which the multi-pair contribution is no longer small.
pub const MAX_PAIRS_PER_PULSE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Process {
    /// Three-wave mixing (χ²): one second-harmonic pump photon per pair.
    Twm,
    /// Four-wave mixing (χ³): two fundamental pump photons per pair.
    Fwm,
}

/// How the pulse duration and the walk-off broadening add up.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DurationRule {
    /// `√(a² + b²)`
    #[default]
    Quadrature,
    /// `a + b`
    Linear,
}

impl DurationRule {
    pub fn combine(self, a: f64, b: f64) -> f64 {
        match self {
            DurationRule::Quadrature => a.hypot(b),
            DurationRule::Linear => a + b,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            DurationRule::Quadrature => "quadrature",
            DurationRule::Linear => "linear",
        }
    }
}

impl std::str::FromStr for DurationRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "quadrature" => Ok(Self::Quadrature),
            "linear" => Ok(Self::Linear),
            other => Err(Error::InvalidInput(format!(
                "unknown duration rule {other:?} (expected quadrature or linear)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSpec {
    pub name: String,
    pub process: Process,
    pub medium_length_cm: f64,
    pub pump: PumpPulse,
    pub signal_filter: FilterSpec,
    pub idler_filter: FilterSpec,
    /// Mean number of pairs created per pump pulse.
    pub pairs_per_pulse: f64,
    /// Pump–signal group-velocity mismatch in ps per cm of medium.
    pub walkoff_ps_per_cm: f64,
    /// Uncorrelated photons per pulse inside the idler filter band (Raman).
    #[serde(default)]
    pub noise_photons_per_pulse: f64,
}

impl SourceSpec {
    pub fn validate(&self) -> Result<()> {
        self.pump.validate()?;
        self.signal_filter.validate()?;
        self.idler_filter.validate()?;
        let name = &self.name;
        ensure(
            self.pairs_per_pulse.is_finite() && self.pairs_per_pulse > 0.0,
            || format!("source {name}: pairs_per_pulse must be > 0"),
        )?;
        ensure(
            self.medium_length_cm.is_finite() && self.medium_length_cm > 0.0,
            || format!("source {name}: medium_length_cm must be > 0"),
        )?;
        ensure(
            self.walkoff_ps_per_cm.is_finite() && self.walkoff_ps_per_cm >= 0.0,
            || format!("source {name}: walkoff_ps_per_cm must be >= 0"),
        )?;
        ensure(
            self.noise_photons_per_pulse.is_finite() && self.noise_photons_per_pulse >= 0.0,
            || format!("source {name}: noise_photons_per_pulse must be >= 0"),
        )?;
        if self.pairs_per_pulse > MAX_PAIRS_PER_PULSE {
            log::warn!(
                "source {name}: {} pairs per pulse is above the low-gain regime ({MAX_PAIRS_PER_PULSE})",
                self.pairs_per_pulse
            );
        }
        Ok(())
    }

    /// Centre (rad/ps) of the pump envelope seen by the pair:
    /// `ω_s + ω_i = 2 ω_p` for both processes.
    pub fn envelope_center(&self) -> f64 {
        2.0 * self.pump.center_frequency()
    }

    /// Intensity FWHM (rad/ps) of the energy-conservation envelope in
    /// `ω_s + ω_i`. The second-harmonic pump of TWM is √2 narrower than the
    /// fundamental; the self-convolved pump of FWM is √2 wider.
    pub fn envelope_bandwidth(&self) -> f64 {
        let w = self.pump.angular_bandwidth();
        match self.process {
            Process::Twm => w / SQRT_2,
            Process::Fwm => w * SQRT_2,
        }
    }
}

/// Temporal broadening (ps) of the idler from walk-off over the full medium.
pub fn walkoff_broadening(src: &SourceSpec) -> f64 {
    src.walkoff_ps_per_cm * src.medium_length_cm
}

/// Effective wavepacket duration Δt (ps) in the pulsed regime: the pump pulse
/// duration combined with the walk-off broadening.
pub fn effective_duration(src: &SourceSpec, rule: DurationRule) -> f64 {
    rule.combine(src.pump.duration_fwhm_ps, walkoff_broadening(src))
}

/// Phase-matching amplitude `sinc(Δk L / 2)` with `Δk L` linearised in the
/// signal detuning through the walk-off delay.
pub fn phase_matching(src: &SourceSpec, signal_detuning: f64) -> f64 {
    let x = 0.5 * walkoff_broadening(src) * signal_detuning;
    if x.abs() < 1e-8 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// Signal and idler sampling for one source.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceGrids {
    pub signal: FrequencyGrid,
    pub idler: FrequencyGrid,
}

/// Grid shared by the idler photons of all `sources`: centred on the first
/// idler filter, spanning `GRID_SPAN_FACTOR` × the widest idler bandwidth.
pub fn shared_idler_grid(sources: &[&SourceSpec], points: usize) -> Result<FrequencyGrid> {
    let first = sources
        .first()
        .ok_or_else(|| Error::InvalidInput("no sources given".into()))?;
    let widths: Vec<f64> = sources
        .iter()
        .map(|s| s.idler_filter.angular_bandwidth())
        .collect();
    FrequencyGrid::centered_on(&first.idler_filter, &widths, points)
}

pub fn signal_grid(src: &SourceSpec, points: usize) -> Result<FrequencyGrid> {
    FrequencyGrid::centered_on(&src.signal_filter, &[], points)
}

impl SourceGrids {
    pub fn new(src: &SourceSpec, idler: FrequencyGrid, points: usize) -> Result<Self> {
        Ok(Self {
            signal: signal_grid(src, points)?,
            idler,
        })
    }
}

/// Filtered joint spectral amplitude on a signal × idler grid.
#[derive(Debug, Clone)]
pub struct JointSpectrum {
    pub signal_grid: FrequencyGrid,
    pub idler_grid: FrequencyGrid,
    /// Rows index signal frequency, columns idler frequency. Normalised so that
    /// `Σ |J|² · Δω_s · Δω_i = 1`.
    pub amplitude: DMatrix<Complex64>,
}

impl JointSpectrum {
    /// Marginal idler spectrum `Σ_s |J(s, i)|²`, normalised to unit sum.
    pub fn idler_marginal(&self) -> Vec<f64> {
        let mut m: Vec<f64> = self
            .amplitude
            .column_iter()
            .map(|c| c.iter().map(|z| z.norm_sqr()).sum())
            .collect();
        let total: f64 = m.iter().sum();
        m.iter_mut().for_each(|v| *v /= total);
        m
    }
}

/// `J(ω_s, ω_i) = envelope(ω_s + ω_i) · phase_matching(ω_s) · f_s(ω_s) · f_i(ω_i)`.
pub fn joint_spectral_amplitude(
    src: &SourceSpec,
    signal_grid: &FrequencyGrid,
    idler_grid: &FrequencyGrid,
) -> Result<JointSpectrum> {
    src.validate()?;
    let fs = filter_amplitude(&src.signal_filter, signal_grid)?;
    let fi = filter_amplitude(&src.idler_filter, idler_grid)?;
    let env_center = src.envelope_center();
    let env_width = src.envelope_bandwidth();
    let signal_center = src.signal_filter.center_frequency();

    let signal: Vec<(f64, f64)> = signal_grid
        .frequencies()
        .zip(&fs)
        .map(|(ws, &a)| (ws, a * phase_matching(src, ws - signal_center)))
        .collect();
    let idler: Vec<f64> = idler_grid.frequencies().collect();

    let mut amplitude = DMatrix::from_fn(signal.len(), idler.len(), |s, i| {
        let (ws, a_s) = signal[s];
        if a_s == 0.0 || fi[i] == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        let env = gaussian_amplitude(ws + idler[i] - env_center, env_width);
        Complex64::new(env * a_s * fi[i], 0.0)
    });

    let norm_sqr: f64 = amplitude.iter().map(|z| z.norm_sqr()).sum::<f64>()
        * signal_grid.step()
        * idler_grid.step();
    if !(norm_sqr > f64::MIN_POSITIVE) {
        return Err(Error::EmptyState);
    }
    amplitude /= Complex64::new(norm_sqr.sqrt(), 0.0);
    Ok(JointSpectrum {
        signal_grid: *signal_grid,
        idler_grid: *idler_grid,
        amplitude,
    })
}

/// Spectral density matrix of a single photon on a discrete grid, with unit
/// trace in the discrete sense (`Σ_k ρ_kk = 1`).
#[derive(Debug, Clone)]
pub struct SpectralDensityMatrix {
    pub grid: FrequencyGrid,
    pub elements: DMatrix<Complex64>,
}

impl SpectralDensityMatrix {
    /// Wraps `elements` after rescaling them to unit trace.
    pub fn normalized(grid: FrequencyGrid, mut elements: DMatrix<Complex64>) -> Result<Self> {
        ensure(
            elements.is_square() && elements.nrows() == grid.len(),
            || {
                format!(
                    "density matrix is {}x{}, grid has {} points",
                    elements.nrows(),
                    elements.ncols(),
                    grid.len()
                )
            },
        )?;
        let tr = elements.trace().re;
        if !(tr > f64::MIN_POSITIVE) {
            return Err(Error::EmptyState);
        }
        elements /= Complex64::new(tr, 0.0);
        Ok(Self { grid, elements })
    }

    /// Pure state `|ψ⟩⟨ψ|` from a sampled amplitude.
    pub fn pure(grid: FrequencyGrid, amplitude: &[Complex64]) -> Result<Self> {
        let v = nalgebra::DVector::from_column_slice(amplitude);
        Self::normalized(grid, &v * v.adjoint())
    }

    pub fn dim(&self) -> usize {
        self.elements.nrows()
    }

    pub fn trace(&self) -> Complex64 {
        self.elements.trace()
    }

    /// `Tr(ρ²)`
    pub fn purity(&self) -> f64 {
        // Tr(ρ²) = Σ_jk ρ_jk ρ_kj = Σ |ρ_jk|² for Hermitian ρ
        self.elements.iter().map(|z| z.norm_sqr()).sum()
    }

    /// `max |ρ - ρ†|`
    pub fn hermiticity_error(&self) -> f64 {
        let n = self.dim();
        let mut worst = 0.0_f64;
        for j in 0..n {
            for k in j..n {
                worst = worst.max((self.elements[(j, k)] - self.elements[(k, j)].conj()).norm());
            }
        }
        worst
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = self
            .elements
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    /// Diagonal of ρ (spectral probability per grid cell).
    pub fn spectrum(&self) -> Vec<f64> {
        self.elements.diagonal().iter().map(|z| z.re).collect()
    }

    /// FWHM of the spectrum converted to a wavelength width (pm) around
    /// `center_nm`.
    pub fn spectral_fwhm_pm(&self, center_nm: f64) -> Option<f64> {
        let w = sampled_fwhm(&self.grid, &self.spectrum())?;
        Some(1e3 * wavelength_bandwidth(center_nm, w))
    }

    /// Checks Hermiticity, unit trace and positivity at the given tolerances.
    pub fn check(&self, hermitian_tol: f64, trace_tol: f64, eigen_tol: f64) -> Result<()> {
        let herm = self.hermiticity_error();
        ensure(herm <= hermitian_tol, || {
            format!("density matrix not Hermitian: max |ρ - ρ†| = {herm:e}")
        })?;
        let tr = self.trace();
        ensure((tr - 1.0).norm() <= trace_tol, || {
            format!("density matrix trace {tr} differs from 1")
        })?;
        let min = self.eigenvalues().first().copied().unwrap_or(0.0);
        ensure(min >= -eigen_tol, || {
            format!("density matrix has negative eigenvalue {min:e}")
        })
    }
}

/// Heralded idler photon together with the durations that enter the
/// closed-form visibility.
#[derive(Debug, Clone)]
pub struct HeraldedPhoton {
    pub rho: SpectralDensityMatrix,
    /// Δt (ps), also the FWHM of the arrival-time jitter folded into `rho`.
    pub effective_duration: f64,
    /// Δτ (ps)
    pub coherence_time: f64,
}

/// Multiplies `rho` elementwise by the characteristic function of a Gaussian
/// emission-time jitter of the given FWHM.
pub fn apply_emission_jitter(rho: &mut DMatrix<Complex64>, grid: &FrequencyGrid, window_fwhm: f64) {
    if window_fwhm <= 0.0 {
        return;
    }
    let sigma = window_fwhm / FWHM_PER_SIGMA;
    let w: Vec<f64> = grid.detunings().collect();
    for ((j, k), z) in rho
        .iter_mut()
        .enumerate()
        .map(|(idx, z)| ((idx % w.len(), idx / w.len()), z))
    {
        let u = w[j] - w[k];
        *z *= (-0.5 * u * u * sigma * sigma).exp();
    }
}

/// `ρ(ω, ω′) = Σ_s J(s, ω) J*(s, ω′)` on the idler grid.
pub fn reduced_idler_state(jsa: &JointSpectrum) -> DMatrix<Complex64> {
    let j = &jsa.amplitude;
    // Jᵀ J* computed as real products; the JSA is usually real, so the cross
    // terms are skipped when the imaginary part vanishes.
    let re = j.map(|z| z.re);
    let im = j.map(|z| z.im);
    let has_im = im.iter().any(|&x| x != 0.0);
    let rr = re.tr_mul(&re);
    if !has_im {
        return rr.map(|x| Complex64::new(x, 0.0));
    }
    let ii = im.tr_mul(&im);
    let ri = re.tr_mul(&im);
    let ir = im.tr_mul(&re);
    // (Jᵀ J*)_{ab} = Σ_s (re_sa + i im_sa)(re_sb - i im_sb)
    DMatrix::from_fn(rr.nrows(), rr.ncols(), |a, b| {
        Complex64::new(rr[(a, b)] + ii[(a, b)], ir[(a, b)] - ri[(a, b)])
    })
}

/// Heralded idler state of `src` on `grids`.
pub fn heralded_state(
    src: &SourceSpec,
    grids: &SourceGrids,
    rule: DurationRule,
) -> Result<HeraldedPhoton> {
    let jsa = joint_spectral_amplitude(src, &grids.signal, &grids.idler)?;
    let mut rho = reduced_idler_state(&jsa);
    let window = effective_duration(src, rule);
    apply_emission_jitter(&mut rho, &grids.idler, window);
    Ok(HeraldedPhoton {
        rho: SpectralDensityMatrix::normalized(grids.idler, rho)?,
        effective_duration: window,
        coherence_time: coherence_time(&src.idler_filter)?,
    })
}

/// Default number of grid points per axis.
pub const DEFAULT_GRID_POINTS: usize = 512;

/// Heralded states of two sources on a shared idler grid.
pub fn heralded_pair(
    a: &SourceSpec,
    b: &SourceSpec,
    points: usize,
    rule: DurationRule,
) -> Result<(HeraldedPhoton, HeraldedPhoton)> {
    let idler = shared_idler_grid(&[a, b], points)?;
    let ga = SourceGrids::new(a, idler, points)?;
    let gb = SourceGrids::new(b, idler, points)?;
    let (ra, rb) = rayon::join(
        || heralded_state(a, &ga, rule),
        || heralded_state(b, &gb, rule),
    );
    Ok((ra?, rb?))
}

/// Purity of the heralded idler from the Schmidt coefficients of the
/// amplitude extended by the arrival-time record, `√p(t) J(s, ω) e^{iωt}`.
///
/// The jitter `p(t)` is a Gaussian of FWHM `jitter_fwhm`, sampled at
/// `time_points` instants over ±8σ with trapezoid weights. This is a dense
/// SVD of an `(Ns·Nt) × Ni` matrix, meant for grids of at most 64 points.
pub fn schmidt_purity(
    src: &SourceSpec,
    grids: &SourceGrids,
    jitter_fwhm: f64,
    time_points: usize,
) -> Result<f64> {
    ensure(time_points >= 2, || {
        format!("need at least 2 time points, got {time_points}")
    })?;
    let jsa = joint_spectral_amplitude(src, &grids.signal, &grids.idler)?;
    let (times, weights) = if jitter_fwhm > 0.0 {
        let sigma = jitter_fwhm / FWHM_PER_SIGMA;
        let last = (time_points - 1) as f64;
        let times: Vec<f64> = (0..time_points)
            .map(|k| -8.0 * sigma + 16.0 * sigma * k as f64 / last)
            .collect();
        let mut weights: Vec<f64> = times
            .iter()
            .enumerate()
            .map(|(k, t)| {
                let end = if k == 0 || k == time_points - 1 {
                    0.5
                } else {
                    1.0
                };
                end * (-0.5 * t * t / (sigma * sigma)).exp()
            })
            .collect();
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        (times, weights)
    } else {
        (vec![0.0], vec![1.0])
    };
    let ns = grids.signal.len();
    let detunings: Vec<f64> = grids.idler.detunings().collect();
    let ext = DMatrix::from_fn(ns * times.len(), detunings.len(), |row, col| {
        let (s, t) = (row % ns, row / ns);
        jsa.amplitude[(s, col)]
            * Complex64::from_polar(weights[t].sqrt(), detunings[col] * times[t])
    });
    let norm: f64 = ext.iter().map(|z| z.norm_sqr()).sum();
    if norm <= 0.0 {
        return Err(Error::EmptyState);
    }
    Ok(ext
        .singular_values()
        .iter()
        .map(|s| (s * s / norm).powi(2))
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;
    use crate::spectral::FilterShape;
    use approx::assert_relative_eq;

    #[test]
    fn ppln_walkoff_is_six_ps() {
        let s = presets::ppln_source();
        assert_eq!(walkoff_broadening(&s), 6.0);
        let mut short = s.clone();
        short.medium_length_cm = 1.0;
        assert_eq!(walkoff_broadening(&short), 3.0);
        let mut none = s;
        none.walkoff_ps_per_cm = 0.0;
        assert_eq!(walkoff_broadening(&none), 0.0);
        assert_eq!(walkoff_broadening(&presets::mf_source()), 0.0);
    }

    #[test]
    fn effective_durations() {
        let mf = presets::mf_source();
        let ppln = presets::ppln_source();
        assert_eq!(effective_duration(&mf, DurationRule::Quadrature), 7.0);
        assert_eq!(effective_duration(&mf, DurationRule::Linear), 7.0);
        assert_relative_eq!(
            effective_duration(&ppln, DurationRule::Quadrature),
            85.0_f64.sqrt(),
            max_relative = 1e-15
        );
        assert!((effective_duration(&ppln, DurationRule::Quadrature) - 9.22).abs() < 0.005);
        assert_eq!(effective_duration(&ppln, DurationRule::Linear), 13.0);
    }

    #[test]
    fn zero_length_limit_removes_phase_matching() {
        let mut s = presets::ppln_source();
        s.medium_length_cm = 1e-12;
        for det in [-3.0, -0.5, 0.0, 0.7, 4.0] {
            assert_relative_eq!(phase_matching(&s, det), 1.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn twm_idler_confined_to_fbg_band() {
        let s = presets::ppln_source();
        let idler = shared_idler_grid(&[&s], 256).unwrap();
        let jsa = joint_spectral_amplitude(&s, &signal_grid(&s, 256).unwrap(), &idler).unwrap();
        let marginal = jsa.idler_marginal();
        let half = 0.5 * s.idler_filter.angular_bandwidth();
        let outside: f64 = idler
            .detunings()
            .zip(&marginal)
            .filter(|(w, _)| w.abs() > half)
            .map(|(_, m)| m)
            .sum();
        assert_eq!(outside, 0.0);
    }

    #[test]
    fn open_filters_show_anticorrelation_ridge() {
        let mut s = presets::ppln_source();
        s.walkoff_ps_per_cm = 0.0;
        s.signal_filter = s.signal_filter.with_bandwidth_pm(20_000.0).unwrap();
        s.idler_filter = s.idler_filter.with_bandwidth_pm(60_000.0).unwrap();
        let sg = FrequencyGrid::small(s.signal_filter.center_frequency(), 4.0, 64).unwrap();
        let ig = FrequencyGrid::small(s.idler_filter.center_frequency(), 4.0, 64).unwrap();
        let jsa = joint_spectral_amplitude(&s, &sg, &ig).unwrap();
        let svd = jsa.amplitude.clone().svd(false, false);
        let sv = &svd.singular_values;
        // not rank one: the envelope in ω_s + ω_i couples the two photons
        assert!(sv[1] / sv[0] > 0.1, "{}", sv[1] / sv[0]);
        // and |J| is constant along the anti-diagonal ω_s + ω_i = const
        let a = jsa.amplitude[(20, 40)].norm();
        let b = jsa.amplitude[(30, 30)].norm();
        assert_relative_eq!(a, b, max_relative = 1e-3);
    }

    #[test]
    fn disjoint_filters_give_empty_state() {
        let mut s = presets::ppln_source();
        // signal filter far from energy conservation with the idler band
        s.signal_filter = FilterSpec::rectangular(790.0, 500.0).unwrap();
        let sg = signal_grid(&s, 128).unwrap();
        let ig = shared_idler_grid(&[&s], 128).unwrap();
        assert!(matches!(
            joint_spectral_amplitude(&s, &sg, &ig),
            Err(Error::EmptyState)
        ));
    }

    #[test]
    fn separable_spectrum_gives_pure_state() {
        // narrow Gaussian idler filter inside a broad flat envelope, no jitter
        let mut s = presets::mf_source();
        s.pump.duration_fwhm_ps = 1e-3;
        s.pump.bandwidth_fwhm_nm = 5e3;
        s.signal_filter = FilterSpec::new(FilterShape::Gaussian, 809.2, 150.0).unwrap();
        let grids = SourceGrids::new(&s, shared_idler_grid(&[&s], 128).unwrap(), 128).unwrap();
        let h = heralded_state(&s, &grids, DurationRule::Quadrature).unwrap();
        assert!((h.rho.purity() - 1.0).abs() < 1e-6, "{}", h.rho.purity());
    }

    #[test]
    fn heralded_mf_marginal_matches_fbg() {
        let s = presets::mf_source();
        let grids = SourceGrids::new(&s, shared_idler_grid(&[&s], 512).unwrap(), 512).unwrap();
        let h = heralded_state(&s, &grids, DurationRule::Quadrature).unwrap();
        let fwhm = h.rho.spectral_fwhm_pm(1553.3).unwrap();
        assert!((fwhm / 600.0 - 1.0).abs() < 0.05, "{fwhm}");
        h.rho.check(1e-10, 1e-9, 1e-10).unwrap();
        assert_relative_eq!(h.coherence_time, 13.413_395_532, max_relative = 1e-9);
        assert_eq!(h.effective_duration, 7.0);
    }

    #[test]
    fn complex_reduction_matches_direct_product() {
        let s = presets::ppln_source();
        let sg = FrequencyGrid::small(s.signal_filter.center_frequency(), 12.0, 16).unwrap();
        let ig = FrequencyGrid::small(s.idler_filter.center_frequency(), 4.0, 16).unwrap();
        let mut jsa = joint_spectral_amplitude(&s, &sg, &ig).unwrap();
        for (k, z) in jsa.amplitude.iter_mut().enumerate() {
            *z *= Complex64::from_polar(1.0, 0.37 * k as f64);
        }
        let fast = reduced_idler_state(&jsa);
        let direct = jsa.amplitude.transpose() * jsa.amplitude.map(|z| z.conj());
        assert!((fast - direct).norm() < 1e-9);
    }

    #[test]
    fn rule_parsing() {
        assert_eq!(
            "linear".parse::<DurationRule>().unwrap(),
            DurationRule::Linear
        );
        assert!("cubic".parse::<DurationRule>().is_err());
    }
}
