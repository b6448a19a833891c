//! Four-fold coincidence counting, emulated pulse by pulse or in aggregate.
//!
//! Each source emits `n` pairs per pulse (Poissonian or single-mode thermal)
//! plus `r` uncorrelated noise photons in its idler band. Signal photons are
//! detected by the herald APD with arm efficiency `η_s`; idler photons reach
//! the splitter with the conditional arm efficiency `η_i`. Source A enters
//! splitter port 1, source B port 2. A photon from A leaves towards detector 1
//! with probability `T = 1 - R` and towards detector 2 with `R`; for B the
//! roles are swapped. When exactly one pair photon from each source reaches
//! the splitter the two interfere, otherwise photons are routed
//! independently. A four-fold event needs both heralds and both idler
//! detectors to click in the same pulse.
//!
//! The aggregated path enumerates photon numbers up to `max_pairs` to get the
//! per-pulse four-fold probability and draws the total for a point from a
//! Poisson distribution; the per-pulse path plays every pulse. Both use the
//! same truncated photon-number distributions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::fitting::{fit_dip, DipFit, DipModel};
use crate::interference::{self, HomScan, ScanKind, BASELINE_COHERENCE_TIMES};
use crate::sources::{HeraldedPhoton, SourceSpec};

/// Photon-number cutoff per source and per pulse.
pub const DEFAULT_MAX_PAIRS: usize = 6;

const BACKGROUND_STREAM: u64 = 1 << 32;
const CAR_STREAM: u64 = 2 << 32;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorSpec {
    /// End-to-end arm efficiency (channel loss and quantum efficiency).
    pub efficiency: f64,
    /// Dark-count probability per gate or coincidence window.
    pub dark_prob_per_gate: f64,
    /// Armed only by the herald of its own source. Four-fold and two-fold
    /// events are conditioned on the herald either way, so this only matters
    /// for unconditioned idler singles.
    #[serde(default)]
    pub gated: bool,
}

impl DetectorSpec {
    pub fn validate(&self, what: &str) -> Result<()> {
        ensure((0.0..=1.0).contains(&self.efficiency), || {
            format!(
                "{what}: efficiency must lie in [0, 1], got {}",
                self.efficiency
            )
        })?;
        ensure((0.0..1.0).contains(&self.dark_prob_per_gate), || {
            format!(
                "{what}: dark_prob_per_gate must lie in [0, 1), got {}",
                self.dark_prob_per_gate
            )
        })
    }

    pub fn ideal(efficiency: f64) -> Self {
        Self {
            efficiency,
            dark_prob_per_gate: 0.0,
            gated: false,
        }
    }
}

/// Single-source count rates used to calibrate arm efficiencies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceRates {
    pub trigger_khz: f64,
    pub coincidence_khz: f64,
}

/// `η_s = trigger / (rep · μ)` and `η_i = coincidence / trigger`.
pub fn calibrate_efficiencies(
    rates: &SourceRates,
    pairs_per_pulse: f64,
    repetition_rate_mhz: f64,
) -> Result<(f64, f64)> {
    if !(rates.trigger_khz > 0.0) {
        return Err(Error::Calibration(format!(
            "trigger rate must be > 0 kHz, got {}",
            rates.trigger_khz
        )));
    }
    if !(rates.coincidence_khz >= 0.0) || !(pairs_per_pulse > 0.0) || !(repetition_rate_mhz > 0.0) {
        return Err(Error::Calibration(
            "coincidence rate must be >= 0, pair rate and repetition rate > 0".into(),
        ));
    }
    let signal = rates.trigger_khz * 1e3 / (repetition_rate_mhz * 1e6 * pairs_per_pulse);
    let idler = rates.coincidence_khz / rates.trigger_khz;
    if signal > 1.0 || idler > 1.0 {
        return Err(Error::Calibration(format!(
            "rates imply efficiencies above 1 (signal {signal:.3}, idler {idler:.3})"
        )));
    }
    Ok((signal, idler))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhotonStatistics {
    /// Multimode limit.
    #[default]
    Poisson,
    /// Single spectral mode.
    Thermal,
}

/// Truncated, renormalised photon-number distribution `P(0..=max)`.
pub fn photon_number_pmf(stats: PhotonStatistics, mean: f64, max: usize) -> Vec<f64> {
    let mut p: Vec<f64> = match stats {
        PhotonStatistics::Poisson => {
            let mut term = (-mean).exp();
            (0..=max)
                .map(|n| {
                    let v = term;
                    term *= mean / (n + 1) as f64;
                    v
                })
                .collect()
        }
        PhotonStatistics::Thermal => {
            let ratio = mean / (1.0 + mean);
            (0..=max)
                .map(|n| ratio.powi(n as i32) / (1.0 + mean))
                .collect()
        }
    };
    let total: f64 = p.iter().sum();
    p.iter_mut().for_each(|v| *v /= total);
    p
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Which {
    A,
    B,
}

/// Which idler paths are blocked before the splitter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Blocking {
    pub idler_a: bool,
    pub idler_b: bool,
}

impl Blocking {
    pub const NONE: Blocking = Blocking {
        idler_a: false,
        idler_b: false,
    };

    /// Background run for `source`: the other source's idler is blocked.
    pub fn background_of(source: Which) -> Self {
        match source {
            Which::A => Blocking {
                idler_a: false,
                idler_b: true,
            },
            Which::B => Blocking {
                idler_a: true,
                idler_b: false,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub source_a: SourceSpec,
    pub source_b: SourceSpec,
    pub det_signal_a: DetectorSpec,
    pub det_signal_b: DetectorSpec,
    /// Efficiency is the conditional idler-arm efficiency of source A; the dark
    /// probability belongs to the detector on splitter output 1.
    pub det_idler_a: DetectorSpec,
    pub det_idler_b: DetectorSpec,
    pub splitter_reflectivity: f64,
    pub acquisition_minutes: f64,
    /// Duration of each single-source background run.
    pub background_minutes: f64,
    pub delays: Vec<f64>,
    #[serde(default)]
    pub rng_seed: u64,
    #[serde(default)]
    pub statistics: PhotonStatistics,
    pub max_pairs: usize,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.source_a.validate()?;
        self.source_b.validate()?;
        self.det_signal_a.validate("det_signal_a")?;
        self.det_signal_b.validate("det_signal_b")?;
        self.det_idler_a.validate("det_idler_a")?;
        self.det_idler_b.validate("det_idler_b")?;
        ensure((0.0..=1.0).contains(&self.splitter_reflectivity), || {
            format!(
                "splitter_reflectivity must lie in [0, 1], got {}",
                self.splitter_reflectivity
            )
        })?;
        ensure(self.acquisition_minutes > 0.0, || {
            format!(
                "acquisition_minutes must be > 0, got {}",
                self.acquisition_minutes
            )
        })?;
        ensure(self.background_minutes > 0.0, || {
            format!(
                "background_minutes must be > 0, got {}",
                self.background_minutes
            )
        })?;
        ensure(!self.delays.is_empty(), || {
            "delays must not be empty".into()
        })?;
        ensure(self.delays.windows(2).all(|w| w[1] > w[0]), || {
            "delays must be strictly increasing".into()
        })?;
        ensure(self.max_pairs >= 1, || "max_pairs must be >= 1".into())
    }

    pub fn pulses_per_minute(&self) -> f64 {
        self.source_a.pump.repetition_rate_hz() * 60.0
    }

    fn arm(&self, which: Which) -> Arm {
        let (src, sig, idl) = match which {
            Which::A => (&self.source_a, &self.det_signal_a, &self.det_idler_a),
            Which::B => (&self.source_b, &self.det_signal_b, &self.det_idler_b),
        };
        Arm {
            pairs: photon_number_pmf(self.statistics, src.pairs_per_pulse, self.max_pairs),
            noise: photon_number_pmf(
                PhotonStatistics::Poisson,
                src.noise_photons_per_pulse,
                self.max_pairs,
            ),
            signal_efficiency: sig.efficiency,
            herald_dark: sig.dark_prob_per_gate,
            idler_efficiency: idl.efficiency,
            idler_dark: idl.dark_prob_per_gate,
        }
    }
}

/// Photon-number tables and efficiencies of one source and its detectors.
#[derive(Debug, Clone)]
struct Arm {
    pairs: Vec<f64>,
    noise: Vec<f64>,
    signal_efficiency: f64,
    herald_dark: f64,
    idler_efficiency: f64,
    idler_dark: f64,
}

fn binomial(n: usize, k: usize, p: f64) -> f64 {
    let mut c = 1.0;
    for i in 0..k {
        c = c * (n - i) as f64 / (i + 1) as f64;
    }
    c * p.powi(k as i32) * (1.0 - p).powi((n - k) as i32)
}

impl Arm {
    fn herald_prob(&self, pairs: usize) -> f64 {
        1.0 - (1.0 - self.herald_dark) * (1.0 - self.signal_efficiency).powi(pairs as i32)
    }

    /// `P(herald clicks, N photons reach the splitter)` for every N, and the
    /// part of `N = 1` where that photon is a pair photon.
    fn heralded_photon_weights(&self, blocked: bool) -> (Vec<f64>, f64) {
        let max = self.pairs.len() + self.noise.len();
        let mut weights = vec![0.0; max];
        let mut single_pair = 0.0;
        let eta = if blocked { 0.0 } else { self.idler_efficiency };
        for (n, &pn) in self.pairs.iter().enumerate() {
            let h = pn * self.herald_prob(n);
            if h == 0.0 {
                continue;
            }
            for j in 0..=n {
                let pj = binomial(n, j, eta);
                for (r, &pr) in self.noise.iter().enumerate() {
                    for q in 0..=r {
                        let w = h * pj * pr * binomial(r, q, eta);
                        weights[j + q] += w;
                        if j == 1 && q == 0 {
                            single_pair += w;
                        }
                    }
                }
            }
        }
        (weights, single_pair)
    }

    fn herald_probability(&self) -> f64 {
        self.pairs
            .iter()
            .enumerate()
            .map(|(n, p)| p * self.herald_prob(n))
            .sum()
    }

    /// Probability that an idler detector facing this source alone clicks,
    /// given `n` pairs (noise and dark counts included).
    fn idler_click_given_pairs(&self, n: usize) -> f64 {
        let no_noise: f64 = self
            .noise
            .iter()
            .enumerate()
            .map(|(r, p)| p * (1.0 - self.idler_efficiency).powi(r as i32))
            .sum();
        1.0 - (1.0 - self.idler_dark) * (1.0 - self.idler_efficiency).powi(n as i32) * no_noise
    }

    fn idler_probability(&self) -> f64 {
        self.pairs
            .iter()
            .enumerate()
            .map(|(n, p)| p * self.idler_click_given_pairs(n))
            .sum()
    }

    fn herald_idler_probability(&self) -> f64 {
        self.pairs
            .iter()
            .enumerate()
            .map(|(n, p)| p * self.herald_prob(n) * self.idler_click_given_pairs(n))
            .sum()
    }
}

/// Splitter and idler detectors.
#[derive(Debug, Clone, Copy)]
struct Splitter {
    reflectivity: f64,
    dark_1: f64,
    dark_2: f64,
}

impl Splitter {
    fn of(cfg: &ExperimentConfig) -> Self {
        Self {
            reflectivity: cfg.splitter_reflectivity,
            dark_1: cfg.det_idler_a.dark_prob_per_gate,
            dark_2: cfg.det_idler_b.dark_prob_per_gate,
        }
    }

    /// `P(both idler detectors click)` for `na`, `nb` independently routed
    /// photons.
    fn both_click(&self, na: usize, nb: usize) -> f64 {
        let r = self.reflectivity;
        let t = 1.0 - r;
        let empty_1 = r.powi(na as i32) * t.powi(nb as i32);
        let empty_2 = t.powi(na as i32) * r.powi(nb as i32);
        let empty_both = if na + nb == 0 { 1.0 } else { 0.0 };
        1.0 - (1.0 - self.dark_1) * empty_1 - (1.0 - self.dark_2) * empty_2
            + (1.0 - self.dark_1) * (1.0 - self.dark_2) * empty_both
    }

    /// Same for one photon per port with mode overlap `m`: both photons leave
    /// through the same output with probability `RT(1 + m)` each way.
    fn both_click_interfering(&self, m: f64) -> f64 {
        let r = self.reflectivity;
        let bunch = r * (1.0 - r) * (1.0 + m);
        1.0 - (1.0 - self.dark_1) * bunch - (1.0 - self.dark_2) * bunch
    }

    /// Probability that one photon per port exits through different outputs.
    fn split_probability(&self, m: f64) -> f64 {
        let r = self.reflectivity;
        let t = 1.0 - r;
        r * r + t * t - 2.0 * r * t * m
    }
}

fn check_overlap(mandel_overlap: f64) -> Result<f64> {
    ensure(
        mandel_overlap.is_finite() && (-1e-9..=1.0 + 1e-9).contains(&mandel_overlap),
        || format!("mode overlap must lie in [0, 1], got {mandel_overlap}"),
    )?;
    Ok(mandel_overlap.clamp(0.0, 1.0))
}

/// Per-pulse four-fold probability.
pub fn fourfold_probability(
    cfg: &ExperimentConfig,
    mandel_overlap: f64,
    blocking: Blocking,
) -> Result<f64> {
    let m = check_overlap(mandel_overlap)?;
    let (wa, sa) = cfg.arm(Which::A).heralded_photon_weights(blocking.idler_a);
    let (wb, sb) = cfg.arm(Which::B).heralded_photon_weights(blocking.idler_b);
    let bs = Splitter::of(cfg);
    let mut p = 0.0;
    for (na, &x) in wa.iter().enumerate() {
        if x == 0.0 {
            continue;
        }
        for (nb, &y) in wb.iter().enumerate() {
            if y != 0.0 {
                p += x * y * bs.both_click(na, nb);
            }
        }
    }
    p += sa * sb * (bs.both_click_interfering(m) - bs.both_click(1, 1));
    Ok(p)
}

/// Expected four-folds in one acquisition window.
pub fn expected_fourfolds(
    cfg: &ExperimentConfig,
    mandel_overlap: f64,
    blocking: Blocking,
    minutes: f64,
) -> Result<f64> {
    Ok(fourfold_probability(cfg, mandel_overlap, blocking)? * cfg.pulses_per_minute() * minutes)
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn draw_poisson(rng: &mut ChaCha8Rng, mean: f64) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean)
        .expect("positive finite mean")
        .sample(rng) as u64
}

/// Raw four-fold count at delay point `index` (aggregated path). The random
/// stream is derived from `(rng_seed, index)` only.
pub fn simulate_point(cfg: &ExperimentConfig, index: usize, mandel_overlap: f64) -> Result<u64> {
    let mean = expected_fourfolds(cfg, mandel_overlap, Blocking::NONE, cfg.acquisition_minutes)?;
    Ok(draw_poisson(&mut rng_for(cfg.rng_seed, index as u64), mean))
}

fn sample_pmf(rng: &mut ChaCha8Rng, pmf: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (k, p) in pmf.iter().enumerate() {
        acc += p;
        if u < acc {
            return k;
        }
    }
    pmf.len() - 1
}

fn count_successes(rng: &mut ChaCha8Rng, n: usize, p: f64) -> usize {
    (0..n).filter(|_| rng.random::<f64>() < p).count()
}

/// Plays `pulses` pulses one at a time and counts four-fold events.
pub fn simulate_pulses(
    cfg: &ExperimentConfig,
    mandel_overlap: f64,
    blocking: Blocking,
    pulses: u64,
    rng: &mut ChaCha8Rng,
) -> Result<u64> {
    let m = check_overlap(mandel_overlap)?;
    let arm_a = cfg.arm(Which::A);
    let arm_b = cfg.arm(Which::B);
    let bs = Splitter::of(cfg);
    let r = bs.reflectivity;
    let mut count = 0;

    // (herald clicked, pair photons at splitter, noise photons at splitter)
    let emit = |arm: &Arm, blocked: bool, rng: &mut ChaCha8Rng| {
        let n = sample_pmf(rng, &arm.pairs);
        let noise = sample_pmf(rng, &arm.noise);
        let detected = count_successes(rng, n, arm.signal_efficiency);
        let herald = detected > 0 || rng.random::<f64>() < arm.herald_dark;
        let eta = if blocked { 0.0 } else { arm.idler_efficiency };
        let j = count_successes(rng, n, eta);
        let q = count_successes(rng, noise, eta);
        (herald, j, q)
    };

    for _ in 0..pulses {
        let (ha, ja, qa) = emit(&arm_a, blocking.idler_a, rng);
        let (hb, jb, qb) = emit(&arm_b, blocking.idler_b, rng);
        if !(ha && hb) {
            continue;
        }
        let (out1, out2) = if ja == 1 && qa == 0 && jb == 1 && qb == 0 {
            if rng.random::<f64>() < bs.split_probability(m) {
                (1, 1)
            } else if rng.random::<f64>() < 0.5 {
                (2, 0)
            } else {
                (0, 2)
            }
        } else {
            let mut o1 = 0;
            let mut o2 = 0;
            for _ in 0..ja + qa {
                // photon from A goes to output 1 with probability T
                if rng.random::<f64>() < r {
                    o2 += 1;
                } else {
                    o1 += 1;
                }
            }
            for _ in 0..jb + qb {
                if rng.random::<f64>() < r {
                    o1 += 1;
                } else {
                    o2 += 1;
                }
            }
            (o1, o2)
        };
        let click_1 = out1 > 0 || rng.random::<f64>() < bs.dark_1;
        let click_2 = out2 > 0 || rng.random::<f64>() < bs.dark_2;
        if click_1 && click_2 {
            count += 1;
        }
    }
    Ok(count)
}

/// Net counts and their error: `net = raw - background`, `error = √raw`.
/// The background's own uncertainty is neglected; negative nets are kept.
pub fn subtract_background(raw: f64, background: f64) -> (f64, f64) {
    (raw - background, raw.max(0.0).sqrt())
}

/// Background counts accumulated over `minutes` at `rate_per_minute`.
pub fn background_counts(rate_per_minute: f64, minutes: f64) -> f64 {
    rate_per_minute * minutes
}

/// Expected single-source background rate (counts/min).
pub fn expected_background_rate(cfg: &ExperimentConfig, source: Which) -> Result<f64> {
    Ok(fourfold_probability(cfg, 0.0, Blocking::background_of(source))? * cfg.pulses_per_minute())
}

/// Background rate (counts/min) of `source`, measured by blocking the other
/// source's idler for `background_minutes`.
pub fn measure_background(cfg: &ExperimentConfig, source: Which) -> Result<f64> {
    let mean = expected_fourfolds(
        cfg,
        0.0,
        Blocking::background_of(source),
        cfg.background_minutes,
    )?;
    let stream = BACKGROUND_STREAM
        + match source {
            Which::A => 0,
            Which::B => 1,
        };
    let counts = draw_poisson(&mut rng_for(cfg.rng_seed, stream), mean);
    Ok(counts as f64 / cfg.background_minutes)
}

/// Expected single-source rates per pulse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwofoldRates {
    pub herald: f64,
    pub idler: f64,
    /// Herald and idler in the same pulse.
    pub coincidence: f64,
    /// Herald and idler in adjacent pulses.
    pub accidental: f64,
}

impl TwofoldRates {
    pub fn car(&self) -> f64 {
        self.coincidence / self.accidental
    }
}

pub fn twofold_rates(cfg: &ExperimentConfig, source: Which) -> TwofoldRates {
    let arm = cfg.arm(source);
    let herald = arm.herald_probability();
    let idler = arm.idler_probability();
    TwofoldRates {
        herald,
        idler,
        coincidence: arm.herald_idler_probability(),
        accidental: herald * idler,
    }
}

/// Coincidence-to-accidental ratio measured over one acquisition window:
/// coincidences at zero pulse offset over the mean at ±1 pulse offset.
pub fn car(cfg: &ExperimentConfig, source: Which) -> Result<f64> {
    let rates = twofold_rates(cfg, source);
    let pulses = cfg.pulses_per_minute() * cfg.acquisition_minutes;
    let base = CAR_STREAM
        + match source {
            Which::A => 0,
            Which::B => 3,
        };
    let coinc = draw_poisson(&mut rng_for(cfg.rng_seed, base), rates.coincidence * pulses);
    let before = draw_poisson(
        &mut rng_for(cfg.rng_seed, base + 1),
        rates.accidental * pulses,
    );
    let after = draw_poisson(
        &mut rng_for(cfg.rng_seed, base + 2),
        rates.accidental * pulses,
    );
    let accidental = 0.5 * (before + after) as f64;
    if accidental == 0.0 {
        return Err(Error::UndefinedCar {
            lower_bound: coinc as f64,
        });
    }
    Ok(coinc as f64 / accidental)
}

/// Raman photon rate that brings `source`'s expected CAR down to `target`.
/// Fails when the target is already above the noiseless CAR.
pub fn calibrate_noise_for_car(cfg: &ExperimentConfig, source: Which, target: f64) -> Result<f64> {
    let with_noise = |nu: f64| {
        let mut c = cfg.clone();
        match source {
            Which::A => c.source_a.noise_photons_per_pulse = nu,
            Which::B => c.source_b.noise_photons_per_pulse = nu,
        }
        twofold_rates(&c, source).car()
    };
    if with_noise(0.0) < target {
        return Err(Error::Calibration(format!(
            "noiseless CAR {:.2} is already below the target {target}",
            with_noise(0.0)
        )));
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    if with_noise(hi) > target {
        return Err(Error::Calibration(
            "target CAR needs more than one noise photon per pulse".into(),
        ));
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if with_noise(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointTally {
    pub delay_ps: f64,
    pub mode_overlap: f64,
    pub raw: u64,
    pub background: f64,
    pub net: f64,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceTally {
    pub name: String,
    pub trigger_khz: f64,
    pub twofold_khz: f64,
    /// Measured CAR, or its lower bound when no accidentals were recorded.
    pub car: f64,
    pub car_is_lower_bound: bool,
    /// Background rate with the other idler blocked (counts/min).
    pub background_per_minute: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TallyResult {
    pub points: Vec<PointTally>,
    pub sources: [SourceTally; 2],
    /// Combined background rate of both sources (counts/min).
    pub background_per_minute: f64,
    /// Sinc² fit of the net counts.
    pub net_fit: DipFit,
    /// Sinc² fit of the raw counts.
    pub raw_fit: DipFit,
    /// Fitted visibility of the net counts.
    pub net_visibility: f64,
    /// Fitted relative depth of the raw dip.
    pub raw_reduction: f64,
    /// Visibility with a far-delay mean baseline, when the scan reaches five
    /// coherence times.
    pub far_baseline_visibility: Option<f64>,
}

impl TallyResult {
    pub fn net_scan(&self) -> Result<HomScan> {
        HomScan::new(
            ScanKind::Counts,
            self.points.iter().map(|p| p.delay_ps).collect(),
            self.points.iter().map(|p| p.net).collect(),
            Some(self.points.iter().map(|p| p.error).collect()),
        )
    }

    pub fn raw_scan(&self) -> Result<HomScan> {
        HomScan::new(
            ScanKind::Counts,
            self.points.iter().map(|p| p.delay_ps).collect(),
            self.points.iter().map(|p| p.raw as f64).collect(),
            Some(self.points.iter().map(|p| p.error).collect()),
        )
    }
}

fn fit_or_best(scan: &HomScan) -> Result<DipFit> {
    match fit_dip(scan, DipModel::SincSquared) {
        Ok(fit) => Ok(fit),
        Err(Error::FitFailure { best, iterations }) => {
            log::warn!("dip fit stopped after {iterations} iterations; using best parameters");
            Ok(*best)
        }
        Err(e) => Err(e),
    }
}

fn source_tally(cfg: &ExperimentConfig, which: Which, background: f64) -> SourceTally {
    let rates = twofold_rates(cfg, which);
    let rep_khz = cfg.source_a.pump.repetition_rate_hz() * 1e-3;
    let (car, bound) = match car(cfg, which) {
        Ok(v) => (v, false),
        Err(Error::UndefinedCar { lower_bound }) => (lower_bound, true),
        Err(_) => unreachable!("car only fails with UndefinedCar"),
    };
    SourceTally {
        name: match which {
            Which::A => cfg.source_a.name.clone(),
            Which::B => cfg.source_b.name.clone(),
        },
        trigger_khz: rates.herald * rep_khz,
        twofold_khz: rates.coincidence * rep_khz,
        car,
        car_is_lower_bound: bound,
        background_per_minute: background,
    }
}

/// Runs the delay scan with the given mode overlap at each configured delay.
pub fn run_with_overlaps(
    cfg: &ExperimentConfig,
    overlaps: &[f64],
    coherence_time: Option<f64>,
) -> Result<TallyResult> {
    cfg.validate()?;
    ensure(overlaps.len() == cfg.delays.len(), || {
        format!(
            "{} overlaps for {} delays",
            overlaps.len(),
            cfg.delays.len()
        )
    })?;
    let raws = overlaps
        .par_iter()
        .enumerate()
        .map(|(k, &m)| simulate_point(cfg, k, m))
        .collect::<Result<Vec<_>>>()?;

    let bg_a = measure_background(cfg, Which::A)?;
    let bg_b = measure_background(cfg, Which::B)?;
    let bg_rate = bg_a + bg_b;
    let background = background_counts(bg_rate, cfg.acquisition_minutes);

    let points: Vec<PointTally> = cfg
        .delays
        .iter()
        .zip(overlaps)
        .zip(&raws)
        .map(|((&delay_ps, &mode_overlap), &raw)| {
            let (net, error) = subtract_background(raw as f64, background);
            PointTally {
                delay_ps,
                mode_overlap,
                raw,
                background,
                net,
                error,
            }
        })
        .collect();

    let sources = [
        source_tally(cfg, Which::A, bg_a),
        source_tally(cfg, Which::B, bg_b),
    ];
    let mut tally = TallyResult {
        points,
        sources,
        background_per_minute: bg_rate,
        net_fit: DipFit::flat(0.0),
        raw_fit: DipFit::flat(0.0),
        net_visibility: 0.0,
        raw_reduction: 0.0,
        far_baseline_visibility: None,
    };
    let net_scan = tally.net_scan()?;
    let raw_scan = tally.raw_scan()?;
    tally.net_fit = fit_or_best(&net_scan)?;
    tally.raw_fit = fit_or_best(&raw_scan)?;
    tally.net_visibility = tally.net_fit.visibility;
    tally.raw_reduction = tally.raw_fit.visibility;
    tally.far_baseline_visibility = coherence_time
        .and_then(|tc| interference::visibility_of(&net_scan, BASELINE_COHERENCE_TIMES * tc).ok());
    Ok(tally)
}

/// Full experiment: mode overlaps from the two heralded photons, then the
/// counting run.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    photon_a: &HeraldedPhoton,
    photon_b: &HeraldedPhoton,
) -> Result<TallyResult> {
    let overlaps = cfg
        .delays
        .par_iter()
        .map(|&d| interference::overlap(&photon_a.rho, &photon_b.rho, d).map(|o| o.clamp(0.0, 1.0)))
        .collect::<Result<Vec<_>>>()?;
    run_with_overlaps(cfg, &overlaps, Some(photon_a.coherence_time))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;
    use approx::assert_relative_eq;

    fn ideal_config() -> ExperimentConfig {
        let mut cfg = presets::experiment();
        for d in [
            &mut cfg.det_signal_a,
            &mut cfg.det_signal_b,
            &mut cfg.det_idler_a,
            &mut cfg.det_idler_b,
        ] {
            d.dark_prob_per_gate = 0.0;
        }
        cfg.source_a.noise_photons_per_pulse = 0.0;
        cfg.source_b.noise_photons_per_pulse = 0.0;
        cfg
    }

    #[test]
    fn calibration_arithmetic() {
        let (s, i) = calibrate_efficiencies(&presets::mf_rates(), 0.05, 80.0).unwrap();
        assert_relative_eq!(s, 0.025, max_relative = 1e-12);
        assert_relative_eq!(i, 0.01, max_relative = 1e-12);
        let (s, i) = calibrate_efficiencies(&presets::ppln_rates(), 0.05, 80.0).unwrap();
        assert_relative_eq!(s, 0.020, max_relative = 1e-12);
        assert_relative_eq!(i, 0.00625, max_relative = 1e-12);
    }

    #[test]
    fn calibration_errors() {
        let zero = SourceRates {
            trigger_khz: 0.0,
            coincidence_khz: 1.0,
        };
        assert!(matches!(
            calibrate_efficiencies(&zero, 0.05, 80.0),
            Err(Error::Calibration(_))
        ));
        let too_fast = SourceRates {
            trigger_khz: 5000.0,
            coincidence_khz: 1.0,
        };
        assert!(matches!(
            calibrate_efficiencies(&too_fast, 0.05, 80.0),
            Err(Error::Calibration(_))
        ));
    }

    #[test]
    fn pmf_normalised() {
        for stats in [PhotonStatistics::Poisson, PhotonStatistics::Thermal] {
            let p = photon_number_pmf(stats, 0.05, 6);
            assert_relative_eq!(p.iter().sum::<f64>(), 1.0, max_relative = 1e-14);
            assert!(p[1] > p[2]);
        }
        let t = photon_number_pmf(PhotonStatistics::Thermal, 1e-3, 20);
        let p = photon_number_pmf(PhotonStatistics::Poisson, 1e-3, 20);
        // thermal light has twice the two-pair probability at low gain
        assert!((t[2] / p[2] - 2.0).abs() < 0.01);
    }

    #[test]
    fn perfect_coalescence_gives_no_fourfolds() {
        let mut cfg = ideal_config();
        cfg.max_pairs = 1;
        let p = fourfold_probability(&cfg, 1.0, Blocking::NONE).unwrap();
        assert_eq!(p, 0.0);
        assert_eq!(simulate_point(&cfg, 3, 1.0).unwrap(), 0);
    }

    #[test]
    fn distinguishable_limit_matches_product_rate() {
        let mut cfg = ideal_config();
        cfg.max_pairs = 1;
        let p = fourfold_probability(&cfg, 0.0, Blocking::NONE).unwrap();
        // one pair per source, both heralded, both idlers through, split ½
        let pair = |mu: f64| mu * (-mu).exp() / ((-mu).exp() * (1.0 + mu));
        let expected = pair(0.05)
            * cfg.det_signal_a.efficiency
            * cfg.det_idler_a.efficiency
            * pair(0.05)
            * cfg.det_signal_b.efficiency
            * cfg.det_idler_b.efficiency
            * 0.5;
        assert_relative_eq!(p, expected, max_relative = 1e-12);
    }

    #[test]
    fn invalid_overlap_rejected() {
        let cfg = presets::experiment();
        assert!(simulate_point(&cfg, 0, 1.5).is_err());
        assert!(simulate_point(&cfg, 0, -0.2).is_err());
        assert!(simulate_point(&cfg, 0, f64::NAN).is_err());
    }

    #[test]
    fn background_bookkeeping() {
        assert_relative_eq!(background_counts(0.145, 56.0), 8.12, max_relative = 1e-14);
        let (net, err) = subtract_background(50.0, 8.12);
        assert_relative_eq!(net, 41.88, max_relative = 1e-14);
        assert_eq!(err, 50.0_f64.sqrt());
        assert_eq!(subtract_background(0.0, 8.12), (-8.12, 0.0));
        assert_eq!(subtract_background(17.0, 0.0), (17.0, 17.0_f64.sqrt()));
    }

    #[test]
    fn both_idlers_blocked_leaves_dark_residue() {
        let cfg = presets::experiment();
        let both = Blocking {
            idler_a: true,
            idler_b: true,
        };
        let p = fourfold_probability(&cfg, 0.0, both).unwrap();
        let h = twofold_rates(&cfg, Which::A).herald * twofold_rates(&cfg, Which::B).herald;
        assert_relative_eq!(
            p,
            h * presets::INGAAS_DARK_PER_GATE * presets::INGAAS_DARK_PER_GATE,
            max_relative = 1e-9
        );
        let dark_free = ideal_config();
        assert_eq!(fourfold_probability(&dark_free, 0.0, both).unwrap(), 0.0);
    }

    #[test]
    fn car_scaling_with_pair_rate() {
        let mut cfg = ideal_config();
        cfg.source_a.pairs_per_pulse = 0.001;
        let low = twofold_rates(&cfg, Which::A).car();
        assert!(low >= 100.0, "{low}");
        cfg.source_a.pairs_per_pulse = 0.02;
        let c1 = twofold_rates(&cfg, Which::A).car();
        cfg.source_a.pairs_per_pulse = 0.04;
        let c2 = twofold_rates(&cfg, Which::A).car();
        // CAR - 1 ∝ 1/μ
        assert!(((c1 - 1.0) / (c2 - 1.0) - 2.0).abs() < 0.1, "{c1} {c2}");
    }

    #[test]
    fn undefined_car_reports_bound() {
        let mut cfg = ideal_config();
        cfg.acquisition_minutes = 1e-9;
        match car(&cfg, Which::A) {
            Err(Error::UndefinedCar { lower_bound }) => assert!(lower_bound >= 0.0),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn noise_calibration_hits_target() {
        let cfg = presets::experiment();
        let nu = calibrate_noise_for_car(&cfg, Which::B, 20.0).unwrap();
        let mut c = cfg.clone();
        c.source_b.noise_photons_per_pulse = nu;
        assert_relative_eq!(twofold_rates(&c, Which::B).car(), 20.0, max_relative = 1e-9);
        // the preset is this value rounded
        assert!(
            (nu - presets::MF_RAMAN_PHOTONS_PER_PULSE).abs() < 2e-4,
            "{nu}"
        );
        assert!(calibrate_noise_for_car(&cfg, Which::A, 1e4).is_err());
    }
}
