use homsim::counting::{
    car, expected_background_rate, expected_fourfolds, fourfold_probability, measure_background,
    run_with_overlaps, simulate_point, simulate_pulses, twofold_rates, Blocking, DetectorSpec,
    ExperimentConfig, PhotonStatistics, Which,
};
use homsim::fitting::DipParams;
use homsim::interference::symmetric_delays;
use homsim::{fit_dip, presets, DipModel, HomScan, ScanKind};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn noiseless(mut cfg: ExperimentConfig) -> ExperimentConfig {
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

/// Efficient detectors so that a per-pulse run collects hundreds of events.
fn bright(pairs: f64, dark: f64, noise: f64) -> ExperimentConfig {
    let mut cfg = presets::experiment();
    let det = |efficiency| DetectorSpec {
        efficiency,
        dark_prob_per_gate: dark,
        gated: true,
    };
    cfg.det_signal_a = det(0.6);
    cfg.det_signal_b = det(0.5);
    cfg.det_idler_a = det(0.4);
    cfg.det_idler_b = det(0.55);
    cfg.source_a.pairs_per_pulse = pairs;
    cfg.source_b.pairs_per_pulse = pairs;
    cfg.source_b.noise_photons_per_pulse = noise;
    cfg
}

#[test]
fn per_pulse_and_aggregated_paths_agree() {
    let pulses = 2_000_000;
    let cases = [
        (bright(0.1, 0.0, 0.0), 0.0),
        (bright(0.1, 0.0, 0.0), 0.9),
        (bright(0.3, 1e-3, 0.05), 0.5),
        (
            ExperimentConfig {
                statistics: PhotonStatistics::Thermal,
                splitter_reflectivity: 0.3,
                ..bright(0.2, 1e-4, 0.02)
            },
            0.7,
        ),
    ];
    for (k, (cfg, m)) in cases.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + k as u64);
        let counted = simulate_pulses(cfg, *m, Blocking::NONE, pulses, &mut rng).unwrap() as f64;
        let mean = fourfold_probability(cfg, *m, Blocking::NONE).unwrap() * pulses as f64;
        assert!(mean > 100.0, "case {k}: only {mean} expected events");
        assert!(
            (counted - mean).abs() <= 2.0 * mean.sqrt(),
            "case {k}: per-pulse {counted}, aggregated {mean}"
        );
    }
}

#[test]
fn distinguishable_photons_give_classical_rate() {
    let mut cfg = noiseless(bright(0.1, 0.0, 0.0));
    cfg.max_pairs = 1;
    cfg.acquisition_minutes = 0.1;
    // one pair per source with probability μ/(1+μ) after truncation
    let one = 0.1 / 1.1;
    let per_pulse = one * 0.6 * 0.4 * one * 0.5 * 0.55 * 0.5;
    let expected = per_pulse * cfg.pulses_per_minute() * cfg.acquisition_minutes;
    let counted = simulate_point(&cfg, 0, 0.0).unwrap() as f64;
    assert!((counted - expected).abs() <= 3.0 * expected.sqrt());
}

#[test]
fn counts_are_poissonian() {
    let cfg = presets::experiment();
    let counts: Vec<f64> = (0..1000)
        .map(|seed| {
            let c = ExperimentConfig {
                rng_seed: seed,
                ..cfg.clone()
            };
            simulate_point(&c, 5, 0.2).unwrap() as f64
        })
        .collect();
    let mean = counts.iter().sum::<f64>() / counts.len() as f64;
    let var = counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (counts.len() - 1) as f64;
    let ratio = var / mean;
    assert!((0.8..=1.2).contains(&ratio), "variance/mean = {ratio}");
}

// With ~12 counts per point the √N-weighted fit latches onto downward
// fluctuations, so this check runs with a hundredfold acquisition time.
#[test]
fn no_interference_means_no_dip() {
    let cfg = ExperimentConfig {
        acquisition_minutes: 5600.0,
        ..presets::experiment()
    };
    let overlaps = vec![0.0; cfg.delays.len()];
    let tally = run_with_overlaps(&cfg, &overlaps, None).unwrap();
    let v = tally.net_fit.visibility;
    let sigma = tally.net_fit.param_errors.visibility;
    assert!(v.abs() <= 3.0 * sigma, "V = {v} ± {sigma}");
}

#[test]
fn error_bars_follow_square_root_law() {
    let base = presets::experiment();
    let relative_error = |minutes: f64| {
        let cfg = ExperimentConfig {
            acquisition_minutes: minutes,
            ..base.clone()
        };
        let tally = run_with_overlaps(&cfg, &vec![0.0; cfg.delays.len()], None).unwrap();
        let (err, raw) = tally
            .points
            .iter()
            .fold((0.0, 0.0), |(e, r), p| (e + p.error, r + p.raw as f64));
        err / raw
    };
    let one = relative_error(56.0);
    let two = relative_error(112.0);
    let four = relative_error(224.0);
    assert!(
        ((two / one) / (1.0 / 2f64.sqrt()) - 1.0).abs() < 0.2,
        "{}",
        two / one
    );
    assert!(((four / one) / 0.5 - 1.0).abs() < 0.2, "{}", four / one);
}

#[test]
fn background_lowers_raw_visibility() {
    let cfg = presets::experiment();
    let delays = symmetric_delays(40.0, 41);
    let truth = DipParams {
        baseline: 1.0,
        visibility: 0.8,
        center: 0.0,
        width_fwhm: 17.0,
    };
    let overlaps: Vec<f64> = delays
        .iter()
        .map(|&d| 1.0 - DipModel::SincSquared.evaluate(&truth, d))
        .collect();
    let minutes = cfg.acquisition_minutes;
    let raw: Vec<f64> = overlaps
        .iter()
        .map(|&m| expected_fourfolds(&cfg, m, Blocking::NONE, minutes).unwrap())
        .collect();
    let background = (expected_background_rate(&cfg, Which::A).unwrap()
        + expected_background_rate(&cfg, Which::B).unwrap())
        * minutes;
    assert!(background > 0.0);
    let net: Vec<f64> = raw.iter().map(|r| r - background).collect();
    let fit = |values: Vec<f64>| {
        let scan = HomScan::new(ScanKind::Counts, delays.clone(), values, None).unwrap();
        fit_dip(&scan, DipModel::SincSquared).unwrap().visibility
    };
    let (v_raw, v_net) = (fit(raw), fit(net));
    assert!(v_raw < v_net, "raw {v_raw}, net {v_net}");
}

#[test]
fn background_measurement_matches_expectation() {
    let cfg = presets::experiment();
    for which in [Which::A, Which::B] {
        let expected = expected_background_rate(&cfg, which).unwrap() * cfg.background_minutes;
        let measured = measure_background(&cfg, which).unwrap() * cfg.background_minutes;
        assert!((measured - expected).abs() <= 3.0 * expected.sqrt().max(1.0));
    }
}

#[test]
fn reference_car_near_twenty() {
    let cfg = presets::experiment();
    for which in [Which::A, Which::B] {
        let expected = twofold_rates(&cfg, which).car();
        let measured = car(&cfg, which).unwrap();
        assert!((15.0..=25.0).contains(&expected), "{which:?}: {expected}");
        assert!((15.0..=25.0).contains(&measured), "{which:?}: {measured}");
    }
}

#[test]
fn runs_are_reproducible() {
    let cfg = ExperimentConfig {
        rng_seed: 42,
        ..presets::experiment()
    };
    let overlaps: Vec<f64> = cfg
        .delays
        .iter()
        .map(|d| 0.7 * (-d * d / 200.0).exp())
        .collect();
    let a = run_with_overlaps(&cfg, &overlaps, None).unwrap();
    let b = run_with_overlaps(&cfg, &overlaps, None).unwrap();
    assert_eq!(a, b);
    let other = ExperimentConfig {
        rng_seed: 43,
        ..cfg.clone()
    };
    assert_ne!(
        a.points,
        run_with_overlaps(&other, &overlaps, None).unwrap().points
    );
}

#[test]
fn short_acquisition_still_fits() {
    let cfg = ExperimentConfig {
        acquisition_minutes: 0.1,
        ..presets::experiment()
    };
    let overlaps: Vec<f64> = cfg
        .delays
        .iter()
        .map(|d| 0.7 * (-d * d / 200.0).exp())
        .collect();
    let tally = run_with_overlaps(&cfg, &overlaps, None).unwrap();
    assert!(tally.net_fit.width_fwhm > 0.0);
}
