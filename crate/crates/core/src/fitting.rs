//! Least-squares fits of the dip lineshape
//! `m(δ) = B · (1 - V · s((δ - δ0) / w))`.
//!
//! `w` is the full width at half depth in both models. For the sinc² model
//! `s(u) = sinc²(SINC_FWHM_SCALE · u)` with `sinc(x) = sin(πx) / (πx)`, so
//! `s(±½) = ½`.

use std::f64::consts::{LN_2, PI};

use nalgebra::{Matrix4, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::interference::{HomScan, ScanKind};

/// Solution of `sinc²(x) = ½` for the normalised sinc, doubled.
pub const SINC_FWHM_SCALE: f64 = 0.885_892_941_378_904_7;

pub const MIN_FIT_POINTS: usize = 6;

/// Search range for the fitted visibility.
pub const VISIBILITY_BOUNDS: (f64, f64) = (-0.1, 1.1);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DipModel {
    #[default]
    SincSquared,
    Gaussian,
}

impl DipModel {
    /// Normalised dip shape, 1 at the centre and ½ at `u = ±½`.
    pub fn shape(self, u: f64) -> f64 {
        match self {
            DipModel::SincSquared => {
                let x = PI * SINC_FWHM_SCALE * u;
                if x.abs() < 1e-6 {
                    1.0 - x * x / 3.0
                } else {
                    (x.sin() / x).powi(2)
                }
            }
            DipModel::Gaussian => (-4.0 * LN_2 * u * u).exp(),
        }
    }

    pub fn evaluate(self, params: &DipParams, delay: f64) -> f64 {
        params.baseline
            * (1.0 - params.visibility * self.shape((delay - params.center) / params.width_fwhm))
    }
}

impl std::str::FromStr for DipModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sinc_squared" | "sinc2" | "sinc" => Ok(DipModel::SincSquared),
            "gaussian" => Ok(DipModel::Gaussian),
            other => Err(Error::InvalidInput(format!(
                "unknown dip model '{other}' (expected sinc_squared or gaussian)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DipParams {
    pub baseline: f64,
    pub visibility: f64,
    pub center: f64,
    pub width_fwhm: f64,
}

impl DipParams {
    fn to_vector(self) -> Vector4<f64> {
        Vector4::new(self.baseline, self.visibility, self.center, self.width_fwhm)
    }

    fn from_vector(v: &Vector4<f64>) -> Self {
        Self {
            baseline: v[0],
            visibility: v[1],
            center: v[2],
            width_fwhm: v[3],
        }
    }
}

/// Fitted dip. Visibility may fall slightly outside `[0, 1]` on noisy data,
/// but never outside `VISIBILITY_BOUNDS`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DipFit {
    pub model: DipModel,
    pub baseline: f64,
    pub visibility: f64,
    /// ps
    pub width_fwhm: f64,
    /// ps
    pub center: f64,
    /// `√(Σ w_k r_k²)` at the optimum.
    pub residual_norm: f64,
    pub param_errors: DipParamErrors,
    /// Half-depth width of the data by interpolation, when defined.
    pub numeric_fwhm: Option<f64>,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DipParamErrors {
    pub baseline: f64,
    pub visibility: f64,
    pub width_fwhm: f64,
    pub center: f64,
}

impl DipParamErrors {
    const UNKNOWN: DipParamErrors = DipParamErrors {
        baseline: f64::INFINITY,
        visibility: f64::INFINITY,
        width_fwhm: f64::INFINITY,
        center: f64::INFINITY,
    };
}

impl DipFit {
    /// A dipless fit at `baseline`.
    pub fn flat(baseline: f64) -> Self {
        Self {
            model: DipModel::SincSquared,
            baseline,
            visibility: 0.0,
            width_fwhm: 1.0,
            center: 0.0,
            residual_norm: 0.0,
            param_errors: DipParamErrors::UNKNOWN,
            numeric_fwhm: None,
            iterations: 0,
        }
    }

    pub fn params(&self) -> DipParams {
        DipParams {
            baseline: self.baseline,
            visibility: self.visibility,
            center: self.center,
            width_fwhm: self.width_fwhm,
        }
    }

    pub fn evaluate(&self, delay: f64) -> f64 {
        self.model.evaluate(&self.params(), delay)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub max_iterations: usize,
    /// Stop once the objective changes by less than this fraction.
    pub relative_tolerance: f64,
    /// Starting point; heuristics are used when `None`.
    pub initial: Option<DipParams>,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            relative_tolerance: 1e-10,
            initial: None,
        }
    }
}

/// Objective value after the initial guess and after every accepted step.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FitTrace {
    pub objective: Vec<f64>,
}

pub fn fit_dip(scan: &HomScan, model: DipModel) -> Result<DipFit> {
    fit_dip_with(scan, model, &FitOptions::default()).map(|(fit, _)| fit)
}

/// Initial parameters from the data: baseline from the outer quarters of the
/// scan, depth and centre from the lowest sample, width from
/// [`fwhm_numeric`] or a quarter of the scan range.
pub fn initial_guess(scan: &HomScan) -> DipParams {
    let (imin, min) = scan.minimum();
    let baseline = outer_quartile_mean(scan);
    let visibility = if baseline != 0.0 {
        (1.0 - min / baseline).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let range = scan.delays[scan.len() - 1] - scan.delays[0];
    let width_fwhm = fwhm_numeric(scan)
        .ok()
        .filter(|w| *w > 0.0)
        .unwrap_or(range / 4.0);
    DipParams {
        baseline,
        visibility,
        center: scan.delays[imin],
        width_fwhm,
    }
}

fn outer_quartile_mean(scan: &HomScan) -> f64 {
    let n = scan.len();
    let q = (n / 4).max(1);
    let outer: Vec<f64> = scan.values[..q]
        .iter()
        .chain(&scan.values[n - q..])
        .copied()
        .collect();
    outer.iter().sum::<f64>() / outer.len() as f64
}

struct Problem<'a> {
    model: DipModel,
    delays: &'a [f64],
    values: &'a [f64],
    sigma: Vec<f64>,
    lower: Vector4<f64>,
    upper: Vector4<f64>,
}

impl Problem<'_> {
    /// Visibility within `VISIBILITY_BOUNDS`, centre inside the scan, width
    /// between two delay steps (narrower dips are not resolved) and twice the
    /// scan range.
    fn new<'a>(model: DipModel, scan: &'a HomScan, sigma: Vec<f64>) -> Problem<'a> {
        let d = &scan.delays;
        let range = d[d.len() - 1] - d[0];
        let step = d
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min);
        Problem {
            model,
            delays: d,
            values: &scan.values,
            sigma,
            lower: Vector4::new(f64::NEG_INFINITY, VISIBILITY_BOUNDS.0, d[0], 2.0 * step),
            upper: Vector4::new(
                f64::INFINITY,
                VISIBILITY_BOUNDS.1,
                d[d.len() - 1],
                2.0 * range,
            ),
        }
    }

    fn project(&self, p: Vector4<f64>) -> Vector4<f64> {
        p.zip_zip_map(&self.lower, &self.upper, |x, lo, hi| x.clamp(lo, hi))
    }

    fn residuals(&self, p: &Vector4<f64>) -> Vec<f64> {
        let params = DipParams::from_vector(p);
        self.delays
            .iter()
            .zip(self.values)
            .zip(&self.sigma)
            .map(|((&d, &y), &s)| (y - self.model.evaluate(&params, d)) / s)
            .collect()
    }

    fn objective(&self, p: &Vector4<f64>) -> f64 {
        self.residuals(p).iter().map(|r| r * r).sum()
    }

    /// Central-difference Jacobian of the weighted residuals, `n × 4`.
    fn jacobian(&self, p: &Vector4<f64>) -> Vec<[f64; 4]> {
        let scale = [
            p[0].abs().max(f64::MIN_POSITIVE),
            1.0,
            p[3].abs(),
            p[3].abs(),
        ];
        let mut jac = vec![[0.0; 4]; self.delays.len()];
        for i in 0..4 {
            let h = 1e-6 * scale[i];
            let mut up = *p;
            let mut down = *p;
            up[i] += h;
            down[i] -= h;
            let ru = self.residuals(&up);
            let rd = self.residuals(&down);
            for (row, (a, b)) in jac.iter_mut().zip(ru.iter().zip(&rd)) {
                row[i] = (a - b) / (2.0 * h);
            }
        }
        jac
    }

    fn normal_equations(&self, p: &Vector4<f64>) -> (Matrix4<f64>, Vector4<f64>) {
        let jac = self.jacobian(p);
        let r = self.residuals(p);
        let mut jtj = Matrix4::zeros();
        let mut jtr = Vector4::zeros();
        for (row, ri) in jac.iter().zip(&r) {
            for a in 0..4 {
                jtr[a] += row[a] * ri;
                for b in 0..4 {
                    jtj[(a, b)] += row[a] * row[b];
                }
            }
        }
        (jtj, jtr)
    }
}

/// Damped Gauss-Newton fit with a numerical Jacobian. Returns the fit and the
/// objective history; [`Error::FitFailure`] carries the best parameters when
/// the iteration budget runs out.
pub fn fit_dip_with(
    scan: &HomScan,
    model: DipModel,
    options: &FitOptions,
) -> Result<(DipFit, FitTrace)> {
    scan.validate()?;
    ensure(scan.len() >= MIN_FIT_POINTS, || {
        format!(
            "a dip fit needs at least {MIN_FIT_POINTS} points, got {}",
            scan.len()
        )
    })?;
    let sigma = match &scan.errors {
        Some(errors) => errors
            .iter()
            .map(|&e| match scan.kind {
                // zero-count points carry unit weight
                ScanKind::Counts => Ok(e.max(1.0)),
                ScanKind::Probability if e > 0.0 => Ok(e),
                ScanKind::Probability => Err(Error::InvalidInput(format!(
                    "probability scan errors must be > 0, got {e}"
                ))),
            })
            .collect::<Result<Vec<_>>>()?,
        None => vec![1.0; scan.len()],
    };
    let problem = Problem::new(model, scan, sigma);

    let start = options.initial.unwrap_or_else(|| initial_guess(scan));
    ensure(start.width_fwhm > 0.0, || {
        "initial width must be > 0".into()
    })?;
    let mut p = problem.project(start.to_vector());
    let mut obj = problem.objective(&p);
    let mut trace = FitTrace {
        objective: vec![obj],
    };
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < options.max_iterations {
        iterations += 1;
        if obj == 0.0 {
            converged = true;
            break;
        }
        let (jtj, jtr) = problem.normal_equations(&p);
        let mut accepted = false;
        while lambda < 1e16 {
            let mut damped = jtj;
            for k in 0..4 {
                damped[(k, k)] += lambda * jtj[(k, k)].max(1e-12);
            }
            let step = damped.lu().solve(&(-jtr));
            let Some(step) = step else {
                lambda *= 10.0;
                continue;
            };
            let trial = problem.project(p + step);
            let trial_obj = problem.objective(&trial);
            if trial_obj <= obj {
                let change = (obj - trial_obj) / obj;
                p = trial;
                obj = trial_obj;
                trace.objective.push(obj);
                lambda = (lambda / 3.0).max(1e-12);
                accepted = true;
                converged = change < options.relative_tolerance;
                break;
            }
            lambda *= 4.0;
        }
        // no downhill step at any damping: already at the minimum
        if !accepted || converged {
            converged = true;
            break;
        }
    }

    let fit = finish(scan, &problem, &p, obj, iterations);
    if !converged {
        return Err(Error::FitFailure {
            iterations,
            best: Box::new(fit),
        });
    }
    Ok((fit, trace))
}

fn finish(
    scan: &HomScan,
    problem: &Problem,
    p: &Vector4<f64>,
    obj: f64,
    iterations: usize,
) -> DipFit {
    let n = scan.len();
    let (jtj, _) = problem.normal_equations(p);
    // without measured errors the scatter sets the noise scale
    let scale = if scan.errors.is_some() {
        1.0
    } else {
        obj / (n - 4).max(1) as f64
    };
    let param_errors = match jtj.try_inverse() {
        Some(cov) if (0..4).all(|k| cov[(k, k)] >= 0.0 && cov[(k, k)].is_finite()) => {
            let e = |k: usize| (cov[(k, k)] * scale).sqrt();
            DipParamErrors {
                baseline: e(0),
                visibility: e(1),
                center: e(2),
                width_fwhm: e(3),
            }
        }
        _ => DipParamErrors::UNKNOWN,
    };
    let params = DipParams::from_vector(p);
    DipFit {
        model: problem.model,
        baseline: params.baseline,
        visibility: params.visibility,
        width_fwhm: params.width_fwhm,
        center: params.center,
        residual_norm: obj.sqrt(),
        param_errors,
        numeric_fwhm: fwhm_numeric(scan).ok(),
        iterations,
    }
}

/// Full width at half dip depth, linearly interpolated between samples. The
/// baseline is the mean of the outer quarters of the scan.
pub fn fwhm_numeric(scan: &HomScan) -> Result<f64> {
    scan.validate()?;
    let (imin, min) = scan.minimum();
    let baseline = outer_quartile_mean(scan);
    let depth = baseline - min;
    if !(depth > 1e-12 * baseline.abs().max(f64::MIN_POSITIVE)) {
        return Err(Error::NoDip);
    }
    if imin == 0 || imin == scan.len() - 1 {
        return Err(Error::DipAtEdge);
    }
    let half = min + 0.5 * depth;
    let d = &scan.delays;
    let v = &scan.values;
    let crossing = |k: usize, j: usize| d[k] + (half - v[k]) * (d[j] - d[k]) / (v[j] - v[k]);

    let mut k = imin;
    while v[k] < half {
        if k == 0 {
            return Err(Error::DipAtEdge);
        }
        k -= 1;
    }
    let left = crossing(k, k + 1);
    let mut k = imin;
    while v[k] < half {
        if k == scan.len() - 1 {
            return Err(Error::DipAtEdge);
        }
        k += 1;
    }
    let right = crossing(k - 1, k);
    Ok(right - left)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interference::symmetric_delays;
    use approx::assert_relative_eq;

    fn synthetic(model: DipModel, p: DipParams, delays: Vec<f64>) -> HomScan {
        let values = delays.iter().map(|&d| model.evaluate(&p, d)).collect();
        HomScan::new(ScanKind::Counts, delays, values, None).unwrap()
    }

    #[test]
    fn sinc_scale_constant() {
        assert_relative_eq!(DipModel::SincSquared.shape(0.5), 0.5, max_relative = 1e-15);
        assert_relative_eq!(DipModel::SincSquared.shape(-0.5), 0.5, max_relative = 1e-15);
        assert_relative_eq!(DipModel::Gaussian.shape(0.5), 0.5, max_relative = 1e-15);
        assert_eq!(DipModel::SincSquared.shape(0.0), 1.0);
        // first zero of the sinc² lobe
        assert!(DipModel::SincSquared.shape(1.0 / SINC_FWHM_SCALE) < 1e-30);
    }

    #[test]
    fn triangle_fwhm() {
        let a = 6.0;
        let delays = symmetric_delays(30.0, 61);
        let values = delays
            .iter()
            .map(|&d: &f64| 10.0 - 8.0 * (1.0 - d.abs() / a).max(0.0))
            .collect();
        let scan = HomScan::new(ScanKind::Counts, delays, values, None).unwrap();
        assert_relative_eq!(fwhm_numeric(&scan).unwrap(), a, max_relative = 1e-12);
    }

    #[test]
    fn fwhm_errors() {
        let delays = symmetric_delays(10.0, 11);
        let flat = HomScan::new(ScanKind::Counts, delays.clone(), vec![3.0; 11], None).unwrap();
        assert!(matches!(fwhm_numeric(&flat), Err(Error::NoDip)));
        let ramp = delays.iter().map(|d| d + 20.0).collect();
        let edge = HomScan::new(ScanKind::Counts, delays.clone(), ramp, None).unwrap();
        assert!(matches!(fwhm_numeric(&edge), Err(Error::DipAtEdge)));
        let wide = synthetic(
            DipModel::Gaussian,
            DipParams {
                baseline: 1.0,
                visibility: 0.9,
                center: 9.0,
                width_fwhm: 8.0,
            },
            delays,
        );
        assert!(matches!(fwhm_numeric(&wide), Err(Error::DipAtEdge)));
    }

    #[test]
    fn exact_recovery() {
        let truth = DipParams {
            baseline: 1.0,
            visibility: 0.8,
            center: 0.0,
            width_fwhm: 17.0,
        };
        for model in [DipModel::SincSquared, DipModel::Gaussian] {
            let fit = fit_dip(&synthetic(model, truth, symmetric_delays(40.0, 41)), model).unwrap();
            assert_relative_eq!(fit.baseline, 1.0, max_relative = 1e-4);
            assert_relative_eq!(fit.visibility, 0.8, max_relative = 1e-4);
            assert_relative_eq!(fit.width_fwhm, 17.0, max_relative = 1e-4);
            assert!(fit.center.abs() < 1e-4);
        }
    }

    #[test]
    fn flat_data_is_not_an_error() {
        let delays = symmetric_delays(40.0, 41);
        let values: Vec<f64> = (0..41)
            .map(|k| 50.0 + if k % 2 == 0 { 1.0 } else { -1.0 })
            .collect();
        let scan = HomScan::new(ScanKind::Counts, delays, values, None).unwrap();
        let fit = match fit_dip(&scan, DipModel::SincSquared) {
            Ok(f) => f,
            Err(Error::FitFailure { best, .. }) => *best,
            Err(e) => panic!("{e}"),
        };
        assert!(fit.visibility.abs() < 0.1, "{fit:?}");
    }

    #[test]
    fn too_few_points() {
        let scan = synthetic(
            DipModel::SincSquared,
            DipParams {
                baseline: 1.0,
                visibility: 0.5,
                center: 0.0,
                width_fwhm: 2.0,
            },
            symmetric_delays(3.0, 5),
        );
        assert!(matches!(
            fit_dip(&scan, DipModel::SincSquared),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn iteration_budget_reports_best() {
        let truth = DipParams {
            baseline: 40.0,
            visibility: 0.7,
            center: 1.0,
            width_fwhm: 15.0,
        };
        let mut scan = synthetic(DipModel::SincSquared, truth, symmetric_delays(40.0, 41));
        scan.values[3] += 5.0;
        let options = FitOptions {
            max_iterations: 1,
            initial: Some(DipParams {
                baseline: 30.0,
                visibility: 0.2,
                center: -5.0,
                width_fwhm: 30.0,
            }),
            ..FitOptions::default()
        };
        match fit_dip_with(&scan, DipModel::SincSquared, &options) {
            Err(Error::FitFailure { iterations, best }) => {
                assert_eq!(iterations, 1);
                assert!(best.width_fwhm > 0.0);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn model_parsing() {
        assert_eq!("gaussian".parse::<DipModel>().unwrap(), DipModel::Gaussian);
        assert_eq!(
            "sinc_squared".parse::<DipModel>().unwrap(),
            DipModel::SincSquared
        );
        assert!("lorentzian".parse::<DipModel>().is_err());
    }
}
