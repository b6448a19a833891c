use homsim::counting::{fourfold_probability, photon_number_pmf, Blocking, PhotonStatistics};
use homsim::fitting::{fit_dip_with, DipParams, FitOptions};
use homsim::interference::{overlap, symmetric_delays};
use homsim::sources::SpectralDensityMatrix;
use homsim::spectral::{FilterSpec, FrequencyGrid};
use homsim::{coherence_time, eq1_visibility, fit_dip, presets, DipModel, HomScan, ScanKind};
use num_complex::Complex64;
use proptest::prelude::*;

fn synthetic(model: DipModel, p: DipParams, delays: Vec<f64>) -> HomScan {
    let values = delays.iter().map(|&d| model.evaluate(&p, d)).collect();
    HomScan::new(ScanKind::Counts, delays, values, None).unwrap()
}

fn dip_params() -> impl Strategy<Value = DipParams> {
    (1.0..1e4f64, 0.2..0.95f64, -5.0..5.0f64, 8.0..25.0f64).prop_map(
        |(baseline, visibility, center, width_fwhm)| DipParams {
            baseline,
            visibility,
            center,
            width_fwhm,
        },
    )
}

fn random_state(grid: FrequencyGrid, amps: &[(f64, f64)]) -> SpectralDensityMatrix {
    let a: Vec<Complex64> = amps.iter().map(|&(r, i)| Complex64::new(r, i)).collect();
    SpectralDensityMatrix::pure(grid, &a).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn eq1_is_symmetric_and_bounded(a in 0.0..50.0f64, b in 0.0..50.0f64, tau in 0.1..100.0f64) {
        let v = eq1_visibility(a, b, tau).unwrap();
        prop_assert!(v > 0.0 && v <= 1.0);
        prop_assert_eq!(v, eq1_visibility(b, a, tau).unwrap());
        prop_assert!(eq1_visibility(a, b, 1.5 * tau).unwrap() >= v);
    }

    #[test]
    fn coherence_time_falls_with_bandwidth(pm in 10.0..5000.0f64, factor in 1.01..10.0f64) {
        let narrow = FilterSpec::rectangular(1553.3, pm).unwrap();
        let wide = FilterSpec::rectangular(1553.3, pm * factor).unwrap();
        prop_assert!(coherence_time(&wide).unwrap() < coherence_time(&narrow).unwrap());
    }

    #[test]
    fn overlap_is_a_bounded_symmetric_real(
        a in prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 16),
        b in prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 16),
        delay in -20.0..20.0f64,
    ) {
        prop_assume!(a.iter().any(|z| z.0 != 0.0 || z.1 != 0.0));
        prop_assume!(b.iter().any(|z| z.0 != 0.0 || z.1 != 0.0));
        let grid = FrequencyGrid::small(1212.0, 2.0, 16).unwrap();
        let (ra, rb) = (random_state(grid, &a), random_state(grid, &b));
        let m = overlap(&ra, &rb, delay).unwrap();
        prop_assert!((-1e-12..=1.0 + 1e-12).contains(&m));
        prop_assert!((m - overlap(&rb, &ra, -delay).unwrap()).abs() < 1e-12);
        prop_assert!((overlap(&ra, &ra, 0.0).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fit_round_trip(p in dip_params()) {
        let scan = synthetic(DipModel::SincSquared, p, symmetric_delays(60.0, 61));
        let fit = fit_dip(&scan, DipModel::SincSquared).unwrap();
        prop_assert!((fit.baseline / p.baseline - 1.0).abs() < 1e-4);
        prop_assert!((fit.visibility / p.visibility - 1.0).abs() < 1e-4);
        prop_assert!((fit.width_fwhm / p.width_fwhm - 1.0).abs() < 1e-4);
        prop_assert!((fit.center - p.center).abs() < 1e-4 * p.width_fwhm);
    }

    #[test]
    fn fit_is_scale_invariant(p in dip_params(), c in 0.01..100.0f64, seed in 0u64..1000) {
        let mut scan = synthetic(DipModel::SincSquared, p, symmetric_delays(40.0, 41));
        // deterministic pseudo-noise so the fit has a nonzero residual
        for (k, v) in scan.values.iter_mut().enumerate() {
            *v *= 1.0 + 0.05 * (((k as u64 * 7919 + seed) % 13) as f64 / 13.0 - 0.5);
        }
        let base = fit_dip(&scan, DipModel::SincSquared).unwrap();
        let mut scaled = scan.clone();
        scaled.values.iter_mut().for_each(|v| *v *= c);
        let fit = fit_dip(&scaled, DipModel::SincSquared).unwrap();
        prop_assert!((fit.baseline / (c * base.baseline) - 1.0).abs() < 1e-6);
        prop_assert!((fit.visibility - base.visibility).abs() < 1e-6);
        prop_assert!((fit.width_fwhm - base.width_fwhm).abs() < 1e-6 * base.width_fwhm);
        prop_assert!((fit.center - base.center).abs() < 1e-6 * base.width_fwhm);
    }

    #[test]
    fn fit_is_translation_equivariant(p in dip_params(), shift in -100.0..100.0f64) {
        let scan = synthetic(DipModel::SincSquared, p, symmetric_delays(40.0, 41));
        let mut moved = scan.clone();
        moved.delays.iter_mut().for_each(|d| *d += shift);
        let a = fit_dip(&scan, DipModel::SincSquared).unwrap();
        let b = fit_dip(&moved, DipModel::SincSquared).unwrap();
        prop_assert!((b.center - a.center - shift).abs() < 1e-6);
        prop_assert!((b.visibility - a.visibility).abs() < 1e-6);
    }

    #[test]
    fn objective_never_increases(p in dip_params(), seed in 0u64..1000) {
        let mut scan = synthetic(DipModel::SincSquared, p, symmetric_delays(40.0, 41));
        for (k, v) in scan.values.iter_mut().enumerate() {
            *v *= 1.0 + 0.2 * (((k as u64 * 104_729 + seed) % 17) as f64 / 17.0 - 0.5);
        }
        let options = FitOptions {
            initial: Some(DipParams { width_fwhm: 2.0 * p.width_fwhm, visibility: 0.3, ..p }),
            ..FitOptions::default()
        };
        let (_, trace) = fit_dip_with(&scan, DipModel::SincSquared, &options).unwrap();
        prop_assert!(trace.objective.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn fourfolds_fall_with_overlap(m1 in 0.0..1.0f64, m2 in 0.0..1.0f64) {
        let cfg = presets::experiment();
        let (lo, hi) = if m1 < m2 { (m1, m2) } else { (m2, m1) };
        let p_lo = fourfold_probability(&cfg, lo, Blocking::NONE).unwrap();
        let p_hi = fourfold_probability(&cfg, hi, Blocking::NONE).unwrap();
        prop_assert!(p_hi <= p_lo);
    }

    #[test]
    fn photon_numbers_are_distributions(mean in 0.0..2.0f64, max in 1usize..12) {
        for stats in [PhotonStatistics::Poisson, PhotonStatistics::Thermal] {
            let p = photon_number_pmf(stats, mean, max);
            prop_assert_eq!(p.len(), max + 1);
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(p.iter().all(|&x| x >= 0.0));
        }
    }
}
