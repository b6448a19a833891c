//! Spectral and temporal primitives: pump pulses, filters, frequency grids.
//!
//! Units used throughout the crate: wavelength in nm, time in ps, angular
//! frequency in rad/ps. Filter bandwidths are configured in pm because that is
//! how fibre Bragg gratings are specified; everything is converted to rad/ps
//! through [`angular_bandwidth`] before it touches a grid.

use std::f64::consts::{LN_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};

/// Speed of light in nm/ps.
pub const SPEED_OF_LIGHT: f64 = 299_792.458;

/// Time-bandwidth product of a transform-limited Gaussian pulse, `2 ln 2 / π`
/// (≈ 0.441). Gaussian coherence times are `GAUSSIAN_TBP · λ² / (c Δλ)`.
pub const GAUSSIAN_TBP: f64 = 2.0 * LN_2 / PI;

/// Lower sanity bound on the pump time-bandwidth product.
pub const MIN_PUMP_TBP: f64 = 0.3;

/// Ratio between a Gaussian's FWHM and its standard deviation, `2 √(2 ln 2)`.
pub const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949;

/// Minimum number of points for a production grid.
pub const MIN_GRID_POINTS: usize = 128;

/// Grid span as a multiple of the widest filter bandwidth it has to hold.
pub const GRID_SPAN_FACTOR: f64 = 8.0;

pub fn angular_frequency(wavelength_nm: f64) -> f64 {
    2.0 * PI * SPEED_OF_LIGHT / wavelength_nm
}

pub fn wavelength(angular_frequency: f64) -> f64 {
    2.0 * PI * SPEED_OF_LIGHT / angular_frequency
}

/// Angular-frequency width (rad/ps) of a wavelength interval `bandwidth_nm`
/// centred on `center_nm`, to first order.
pub fn angular_bandwidth(center_nm: f64, bandwidth_nm: f64) -> f64 {
    2.0 * PI * SPEED_OF_LIGHT * bandwidth_nm / (center_nm * center_nm)
}

/// Inverse of [`angular_bandwidth`].
pub fn wavelength_bandwidth(center_nm: f64, angular_bandwidth: f64) -> f64 {
    angular_bandwidth * center_nm * center_nm / (2.0 * PI * SPEED_OF_LIGHT)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PumpPulse {
    pub center_wavelength_nm: f64,
    pub duration_fwhm_ps: f64,
    pub bandwidth_fwhm_nm: f64,
    pub repetition_rate_mhz: f64,
}

impl PumpPulse {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("center_wavelength_nm", self.center_wavelength_nm),
            ("duration_fwhm_ps", self.duration_fwhm_ps),
            ("bandwidth_fwhm_nm", self.bandwidth_fwhm_nm),
            ("repetition_rate_mhz", self.repetition_rate_mhz),
        ] {
            ensure(v.is_finite() && v > 0.0, || {
                format!("pump {name} must be strictly positive, got {v}")
            })?;
        }
        let tbp = self.time_bandwidth_product();
        ensure(tbp >= MIN_PUMP_TBP, || {
            format!("pump time-bandwidth product {tbp:.3} is below {MIN_PUMP_TBP}")
        })
    }

    pub fn center_frequency(&self) -> f64 {
        angular_frequency(self.center_wavelength_nm)
    }

    /// FWHM of the spectral intensity in rad/ps.
    pub fn angular_bandwidth(&self) -> f64 {
        angular_bandwidth(self.center_wavelength_nm, self.bandwidth_fwhm_nm)
    }

    /// `Δν · Δt` with `Δν` in THz and `Δt` in ps.
    pub fn time_bandwidth_product(&self) -> f64 {
        self.angular_bandwidth() / (2.0 * PI) * self.duration_fwhm_ps
    }

    /// Pulses per second.
    pub fn repetition_rate_hz(&self) -> f64 {
        self.repetition_rate_mhz * 1e6
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FilterShape {
    Rectangular,
    Gaussian,
}

/// A spectral filter. The amplitude transmission peaks at exactly 1; for the
/// Gaussian shape `bandwidth_pm` is the FWHM of the intensity transmission.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterSpec {
    pub shape: FilterShape,
    pub center_wavelength_nm: f64,
    pub bandwidth_pm: f64,
}

impl FilterSpec {
    pub fn new(shape: FilterShape, center_wavelength_nm: f64, bandwidth_pm: f64) -> Result<Self> {
        let filter = Self {
            shape,
            center_wavelength_nm,
            bandwidth_pm,
        };
        filter.validate()?;
        Ok(filter)
    }

    pub fn rectangular(center_wavelength_nm: f64, bandwidth_pm: f64) -> Result<Self> {
        Self::new(FilterShape::Rectangular, center_wavelength_nm, bandwidth_pm)
    }

    pub fn gaussian(center_wavelength_nm: f64, bandwidth_pm: f64) -> Result<Self> {
        Self::new(FilterShape::Gaussian, center_wavelength_nm, bandwidth_pm)
    }

    pub fn validate(&self) -> Result<()> {
        ensure(
            self.bandwidth_pm.is_finite() && self.bandwidth_pm > 0.0,
            || format!("filter bandwidth must be > 0 pm, got {}", self.bandwidth_pm),
        )?;
        ensure(
            self.center_wavelength_nm.is_finite() && self.center_wavelength_nm > 0.0,
            || {
                format!(
                    "filter center wavelength must be > 0 nm, got {}",
                    self.center_wavelength_nm
                )
            },
        )
    }

    pub fn bandwidth_nm(&self) -> f64 {
        self.bandwidth_pm * 1e-3
    }

    pub fn center_frequency(&self) -> f64 {
        angular_frequency(self.center_wavelength_nm)
    }

    pub fn angular_bandwidth(&self) -> f64 {
        angular_bandwidth(self.center_wavelength_nm, self.bandwidth_nm())
    }

    /// Frequency interval that has to be on a grid for the filter to be
    /// represented: the FWHM band for rectangular filters, ±1 FWHM for
    /// Gaussian ones (transmission 2⁻⁴ at the edges).
    pub fn support(&self) -> (f64, f64) {
        let half = match self.shape {
            FilterShape::Rectangular => 0.5 * self.angular_bandwidth(),
            FilterShape::Gaussian => self.angular_bandwidth(),
        };
        let c = self.center_frequency();
        (c - half, c + half)
    }

    /// Amplitude transmission at angular frequency `omega` (rad/ps).
    pub fn amplitude_at(&self, omega: f64) -> f64 {
        let detuning = omega - self.center_frequency();
        let width = self.angular_bandwidth();
        match self.shape {
            FilterShape::Rectangular => {
                if detuning.abs() <= 0.5 * width {
                    1.0
                } else {
                    0.0
                }
            }
            // |t|² = exp(-4 ln2 (Δ/W)²)
            FilterShape::Gaussian => (-2.0 * LN_2 * (detuning / width).powi(2)).exp(),
        }
    }

    pub fn with_bandwidth_pm(&self, bandwidth_pm: f64) -> Result<Self> {
        Self::new(self.shape, self.center_wavelength_nm, bandwidth_pm)
    }
}

/// Coherence time (ps) set by a filter.
///
/// Rectangular filters give `λ² / (c Δλ)`, i.e. the inverse of the passband in
/// Hz. Gaussian filters give the FWHM duration of the transform-limited pulse
/// with the same intensity spectrum, `GAUSSIAN_TBP · λ² / (c Δλ)`.
pub fn coherence_time(filter: &FilterSpec) -> Result<f64> {
    filter.validate()?;
    let lambda = filter.center_wavelength_nm;
    let inverse_bandwidth = lambda * lambda / (SPEED_OF_LIGHT * filter.bandwidth_nm());
    Ok(match filter.shape {
        FilterShape::Rectangular => inverse_bandwidth,
        FilterShape::Gaussian => GAUSSIAN_TBP * inverse_bandwidth,
    })
}

/// Uniform, cell-centred sampling of angular frequency.
///
/// Sample `k` sits at `center + (k - points/2 + ½)·step`, so the grid edges
/// are cell boundaries. A rectangular passband of width `span / 8` centred on
/// the grid therefore covers exactly `points / 8` cells at every power-of-two
/// resolution, which keeps grid refinement free of edge-sampling jumps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    center: f64,
    span: f64,
    points: usize,
}

impl FrequencyGrid {
    pub fn new(center: f64, span: f64, points: usize) -> Result<Self> {
        ensure(points >= MIN_GRID_POINTS, || {
            format!("grid needs at least {MIN_GRID_POINTS} points, got {points}")
        })?;
        Self::small(center, span, points)
    }

    /// Same as [`FrequencyGrid::new`] without the production minimum on the
    /// number of points. Meant for brute-force cross-checks on tiny grids.
    pub fn small(center: f64, span: f64, points: usize) -> Result<Self> {
        ensure(points.is_power_of_two() && points >= 2, || {
            format!("grid points must be a power of two, got {points}")
        })?;
        ensure(span.is_finite() && span > 0.0, || {
            format!("grid span must be > 0, got {span}")
        })?;
        ensure(center.is_finite() && center > 0.0, || {
            format!("grid center must be > 0, got {center}")
        })?;
        Ok(Self {
            center,
            span,
            points,
        })
    }

    /// Grid centred on `filter` spanning `GRID_SPAN_FACTOR` × the widest
    /// bandwidth in `widths` (rad/ps).
    pub fn centered_on(filter: &FilterSpec, widths: &[f64], points: usize) -> Result<Self> {
        let widest = widths
            .iter()
            .copied()
            .fold(filter.angular_bandwidth(), f64::max);
        Self::new(filter.center_frequency(), GRID_SPAN_FACTOR * widest, points)
    }

    pub fn center(&self) -> f64 {
        self.center
    }

    pub fn span(&self) -> f64 {
        self.span
    }

    pub fn len(&self) -> usize {
        self.points
    }

    pub fn is_empty(&self) -> bool {
        self.points == 0
    }

    pub fn step(&self) -> f64 {
        self.span / self.points as f64
    }

    pub fn min(&self) -> f64 {
        self.center - 0.5 * self.span
    }

    pub fn max(&self) -> f64 {
        self.center + 0.5 * self.span
    }

    pub fn detuning(&self, k: usize) -> f64 {
        (k as f64 - self.points as f64 / 2.0 + 0.5) * self.step()
    }

    pub fn frequency(&self, k: usize) -> f64 {
        self.center + self.detuning(k)
    }

    pub fn detunings(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.points).map(|k| self.detuning(k))
    }

    pub fn frequencies(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.points).map(|k| self.frequency(k))
    }

    pub fn contains_band(&self, lo: f64, hi: f64) -> bool {
        // one part in 1e9 of slack for band edges that coincide with grid edges
        let tol = 1e-9 * self.span;
        lo >= self.min() - tol && hi <= self.max() + tol
    }

    /// A band is representable when it lies inside the grid, or when it
    /// covers the whole grid (a filter that is wide open over the samples).
    pub fn represents_band(&self, lo: f64, hi: f64) -> bool {
        self.contains_band(lo, hi) || (lo <= self.min() && hi >= self.max())
    }

    /// Same spacing and sample positions (within floating-point noise).
    pub fn same_as(&self, other: &FrequencyGrid) -> bool {
        self.points == other.points
            && (self.center - other.center).abs() <= 1e-9 * self.center
            && (self.span - other.span).abs() <= 1e-9 * self.span
    }
}

/// Amplitude transmission of `filter` sampled on `grid`.
pub fn filter_amplitude(filter: &FilterSpec, grid: &FrequencyGrid) -> Result<Vec<f64>> {
    filter.validate()?;
    let (lo, hi) = filter.support();
    if !grid.represents_band(lo, hi) {
        return Err(Error::Coverage(format!(
            "filter passband [{lo:.4}, {hi:.4}] rad/ps is outside grid [{:.4}, {:.4}]",
            grid.min(),
            grid.max()
        )));
    }
    Ok(grid.frequencies().map(|w| filter.amplitude_at(w)).collect())
}

/// Gaussian spectral amplitude of the pump sampled on `grid`, normalised so
/// that `Σ |a|² · step = 1`. The FWHM of `|a|²` equals the pump bandwidth.
pub fn pump_spectral_amplitude(pump: &PumpPulse, grid: &FrequencyGrid) -> Result<Vec<f64>> {
    pump.validate()?;
    let width = pump.angular_bandwidth();
    let center = pump.center_frequency();
    if !grid.contains_band(center - width, center + width) {
        return Err(Error::Coverage(format!(
            "pump spectrum ±1 FWHM around {center:.4} rad/ps is outside grid [{:.4}, {:.4}]",
            grid.min(),
            grid.max()
        )));
    }
    let mut amp: Vec<f64> = grid
        .frequencies()
        .map(|w| gaussian_amplitude(w - center, width))
        .collect();
    let norm = (amp.iter().map(|a| a * a).sum::<f64>() * grid.step()).sqrt();
    amp.iter_mut().for_each(|a| *a /= norm);
    Ok(amp)
}

/// Unnormalised Gaussian amplitude whose square has the given FWHM.
pub(crate) fn gaussian_amplitude(detuning: f64, intensity_fwhm: f64) -> f64 {
    (-2.0 * LN_2 * (detuning / intensity_fwhm).powi(2)).exp()
}

/// Full width at half maximum of sampled non-negative `values` on `grid`,
/// with linear interpolation between samples. Returns `None` when the half
/// level is not crossed on both sides of the peak.
pub fn sampled_fwhm(grid: &FrequencyGrid, values: &[f64]) -> Option<f64> {
    let (peak_idx, peak) = values
        .iter()
        .copied()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(&b.1))?;
    let half = 0.5 * peak;
    let x = |k: usize| grid.detuning(k);
    let mut left = None;
    for k in (0..peak_idx).rev() {
        if values[k] < half {
            let t = (half - values[k]) / (values[k + 1] - values[k]);
            left = Some(x(k) + t * grid.step());
            break;
        }
    }
    let mut right = None;
    for k in peak_idx + 1..values.len() {
        if values[k] < half {
            let t = (values[k - 1] - half) / (values[k - 1] - values[k]);
            right = Some(x(k - 1) + t * grid.step());
            break;
        }
    }
    Some(right? - left?)
}
