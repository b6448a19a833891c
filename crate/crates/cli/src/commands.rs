use homsim::counting::{background_counts, SourceTally, TallyResult};
use homsim::interference::{self, predict_narrowband, Eq1Prediction};
use homsim::sources::walkoff_broadening;
use homsim::{
    coherence_time, fit_dip, heralded_pair, hom_dip, DipFit, DipModel, DurationRule, HomScan,
    SourceSpec,
};
use serde::Serialize;

use crate::config::RunConfig;
use crate::table::write_csv;
use crate::CliError;

/// Visibility expected for the reference setup, shown next to the two
/// closed-form values it should fall between.
pub const REFERENCE_VISIBILITY: f64 = 0.83;

pub const DEFAULT_EXTRAPOLATION_PM: f64 = 200.0;

#[derive(Debug, Clone, Serialize)]
pub struct SourceDurations {
    pub name: String,
    pub walkoff_ps: f64,
    pub duration_quadrature_ps: f64,
    pub duration_linear_ps: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Narrowband {
    pub bandwidth_pm: f64,
    pub coherence_time_ps: f64,
    pub quadrature_visibility: f64,
    pub linear_visibility: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PredictReport {
    pub rule: DurationRule,
    pub coherence_time_ps: f64,
    pub sources: [SourceDurations; 2],
    pub quadrature_visibility: f64,
    pub linear_visibility: f64,
    /// Visibility under `rule`.
    pub visibility: f64,
    pub reference_visibility: f64,
    /// Whether the reference value lies between the two rules.
    pub reference_bracketed: bool,
    pub narrowband: Narrowband,
}

fn durations(src: &SourceSpec) -> SourceDurations {
    SourceDurations {
        name: src.name.clone(),
        walkoff_ps: walkoff_broadening(src),
        duration_quadrature_ps: homsim::sources::effective_duration(src, DurationRule::Quadrature),
        duration_linear_ps: homsim::sources::effective_duration(src, DurationRule::Linear),
    }
}

pub fn predict(
    cfg: &RunConfig,
    rule: DurationRule,
    target_pm: f64,
) -> Result<PredictReport, CliError> {
    let (a, b) = (&cfg.experiment.source_a, &cfg.experiment.source_b);
    let quad: Eq1Prediction = interference::predict(a, b, DurationRule::Quadrature)?;
    let lin = interference::predict(a, b, DurationRule::Linear)?;
    let (lo, hi) = if lin.visibility <= quad.visibility {
        (lin.visibility, quad.visibility)
    } else {
        (quad.visibility, lin.visibility)
    };
    let narrow_filter = a.idler_filter.with_bandwidth_pm(target_pm)?;
    Ok(PredictReport {
        rule,
        coherence_time_ps: quad.coherence_time_ps,
        sources: [durations(a), durations(b)],
        quadrature_visibility: quad.visibility,
        linear_visibility: lin.visibility,
        visibility: match rule {
            DurationRule::Quadrature => quad.visibility,
            DurationRule::Linear => lin.visibility,
        },
        reference_visibility: REFERENCE_VISIBILITY,
        reference_bracketed: (lo..=hi).contains(&REFERENCE_VISIBILITY),
        narrowband: Narrowband {
            bandwidth_pm: target_pm,
            coherence_time_ps: coherence_time(&narrow_filter)?,
            quadrature_visibility: predict_narrowband(a, b, DurationRule::Quadrature, target_pm)?,
            linear_visibility: predict_narrowband(a, b, DurationRule::Linear, target_pm)?,
        },
    })
}

pub fn render_predict(r: &PredictReport) -> String {
    let mark = |rule| if r.rule == rule { "*" } else { " " };
    let mut s = String::new();
    s += &format!("coherence time          {:.3} ps\n", r.coherence_time_ps);
    for src in &r.sources {
        s += &format!(
            "{:<10} walk-off {:.2} ps, dt quadrature {:.3} ps, dt linear {:.3} ps\n",
            src.name, src.walkoff_ps, src.duration_quadrature_ps, src.duration_linear_ps
        );
    }
    s += &format!(
        "{}visibility quadrature   {:.3}\n",
        mark(DurationRule::Quadrature),
        r.quadrature_visibility
    );
    s += &format!(
        "{}visibility linear       {:.3}\n",
        mark(DurationRule::Linear),
        r.linear_visibility
    );
    s += &format!(
        "reference {:.2} {} the two rules\n",
        r.reference_visibility,
        if r.reference_bracketed {
            "lies between"
        } else {
            "lies outside"
        }
    );
    s += &format!(
        "at {} pm: coherence time {:.3} ps, visibility quadrature {:.3}, linear {:.3}\n",
        r.narrowband.bandwidth_pm,
        r.narrowband.coherence_time_ps,
        r.narrowband.quadrature_visibility,
        r.narrowband.linear_visibility
    );
    s
}

pub fn predict_csv(r: &PredictReport) -> Result<Vec<u8>, CliError> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let rows: Vec<(String, f64)> = vec![
        ("coherence_time_ps".into(), r.coherence_time_ps),
        (
            format!("{}_duration_quadrature_ps", r.sources[0].name),
            r.sources[0].duration_quadrature_ps,
        ),
        (
            format!("{}_duration_linear_ps", r.sources[0].name),
            r.sources[0].duration_linear_ps,
        ),
        (
            format!("{}_duration_quadrature_ps", r.sources[1].name),
            r.sources[1].duration_quadrature_ps,
        ),
        (
            format!("{}_duration_linear_ps", r.sources[1].name),
            r.sources[1].duration_linear_ps,
        ),
        ("visibility_quadrature".into(), r.quadrature_visibility),
        ("visibility_linear".into(), r.linear_visibility),
        ("reference_visibility".into(), r.reference_visibility),
        ("narrowband_bandwidth_pm".into(), r.narrowband.bandwidth_pm),
        (
            "narrowband_visibility_quadrature".into(),
            r.narrowband.quadrature_visibility,
        ),
        (
            "narrowband_visibility_linear".into(),
            r.narrowband.linear_visibility,
        ),
    ];
    let io = |e: csv::Error| CliError::Io(format!("csv: {e}"));
    w.write_record(["quantity", "value"]).map_err(io)?;
    for (name, value) in rows {
        w.write_record([name, value.to_string()]).map_err(io)?;
    }
    w.into_inner()
        .map_err(|e| CliError::Io(format!("csv: {}", e.error())))
}

/// Noise-free normalised dip at the configured delays.
pub fn scan(cfg: &RunConfig) -> Result<HomScan, CliError> {
    let e = &cfg.experiment;
    let (a, b) = heralded_pair(&e.source_a, &e.source_b, cfg.grid_points, cfg.rule)?;
    Ok(hom_dip(&a.rho, &b.rho, &e.delays)?)
}

pub fn scan_csv(scan: &HomScan) -> Result<Vec<u8>, CliError> {
    let rows: Vec<Vec<f64>> = scan
        .delays
        .iter()
        .zip(&scan.values)
        .map(|(&d, &v)| vec![d, v])
        .collect();
    write_csv(&["delay_ps", "coincidence_probability"], &rows)
}

#[derive(Debug, Clone, Serialize)]
pub struct ScanPoint {
    pub delay_ps: f64,
    pub coincidence_probability: f64,
}

pub fn scan_points(scan: &HomScan) -> Vec<ScanPoint> {
    scan.delays
        .iter()
        .zip(&scan.values)
        .map(|(&delay_ps, &coincidence_probability)| ScanPoint {
            delay_ps,
            coincidence_probability,
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct MonteCarloSummary {
    pub seed: u64,
    pub rule: DurationRule,
    pub acquisition_minutes: f64,
    /// Fitted visibility of the background-corrected counts.
    pub net_visibility: f64,
    /// Fitted relative depth of the raw counts.
    pub raw_reduction: f64,
    pub far_baseline_visibility: Option<f64>,
    pub net_fit: DipFit,
    pub raw_fit: DipFit,
    pub background_per_minute: f64,
    pub background_per_point: f64,
    pub sources: [SourceTally; 2],
}

pub fn montecarlo(cfg: &RunConfig) -> Result<(TallyResult, MonteCarloSummary), CliError> {
    let e = &cfg.experiment;
    let (a, b) = heralded_pair(&e.source_a, &e.source_b, cfg.grid_points, cfg.rule)?;
    let tally = homsim::counting::run_experiment(e, &a, &b)?;
    let summary = MonteCarloSummary {
        seed: e.rng_seed,
        rule: cfg.rule,
        acquisition_minutes: e.acquisition_minutes,
        net_visibility: tally.net_visibility,
        raw_reduction: tally.raw_reduction,
        far_baseline_visibility: tally.far_baseline_visibility,
        net_fit: tally.net_fit.clone(),
        raw_fit: tally.raw_fit.clone(),
        background_per_minute: tally.background_per_minute,
        background_per_point: background_counts(tally.background_per_minute, e.acquisition_minutes),
        sources: tally.sources.clone(),
    };
    Ok((tally, summary))
}

pub const MONTECARLO_COLUMNS: [&str; 5] = [
    "delay_ps",
    "raw_counts",
    "background",
    "net_counts",
    "error",
];

pub fn montecarlo_csv(tally: &TallyResult) -> Result<Vec<u8>, CliError> {
    let rows: Vec<Vec<f64>> = tally
        .points
        .iter()
        .map(|p| vec![p.delay_ps, p.raw as f64, p.background, p.net, p.error])
        .collect();
    write_csv(&MONTECARLO_COLUMNS, &rows)
}

pub fn fit(scan: &HomScan, model: DipModel) -> Result<DipFit, CliError> {
    fit_dip(scan, model).map_err(|e| match e {
        homsim::Error::FitFailure { iterations, best } => CliError::Failure(format!(
            "fit did not converge in {iterations} iterations; best: V = {:.4}, width = {:.3} ps",
            best.visibility, best.width_fwhm
        )),
        homsim::Error::InvalidInput(msg) => CliError::Parse(msg),
        other => CliError::Failure(other.to_string()),
    })
}
