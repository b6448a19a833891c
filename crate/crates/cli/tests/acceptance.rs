//! One PASS/FAIL line per acceptance criterion on the reference setup.
//! Criterion 11 runs the built binary twice and compares the CSV bytes.

use std::process::{Command, ExitCode};

use homsim::{heralded_pair, DurationRule};
use homsim_cli::commands::DEFAULT_EXTRAPOLATION_PM;
use homsim_cli::config::RunConfig;
use homsim_cli::reproduce::{self, Check};

fn montecarlo_bytes(dir: &std::path::Path, name: &str) -> Vec<u8> {
    let status = Command::new(env!("CARGO_BIN_EXE_homsim"))
        .args(["--seed", "11", "montecarlo", "--out", name])
        .current_dir(dir)
        .status()
        .expect("binary runs");
    assert!(status.success());
    std::fs::read(dir.join(name)).expect("output written")
}

fn determinism() -> Check {
    let dir = tempfile::tempdir().expect("temporary directory");
    let first = montecarlo_bytes(dir.path(), "first.csv");
    let second = montecarlo_bytes(dir.path(), "second.csv");
    Check {
        id: 11,
        name: "determinism",
        value: format!(
            "{} bytes, {}",
            first.len(),
            if first == second {
                "identical"
            } else {
                "differ"
            }
        ),
        target: "byte-identical CSV".into(),
        pass: !first.is_empty() && first == second,
    }
}

fn all_checks() -> Result<Vec<Check>, homsim_cli::CliError> {
    let run = RunConfig::reference();
    let rule = DurationRule::Quadrature;
    let e = &run.experiment;
    let pair = heralded_pair(&e.source_a, &e.source_b, run.grid_points, rule)?;
    Ok(vec![
        reproduce::coherence(&run)?,
        reproduce::closed_form(&run, rule)?,
        reproduce::dip_width(&pair)?,
        reproduce::narrowband(&run, rule, DEFAULT_EXTRAPOLATION_PM)?,
        reproduce::walkoff(&run),
        reproduce::background_arithmetic(),
        reproduce::monte_carlo(e, &pair)?,
        reproduce::gaussian_sweep()?,
        reproduce::density_matrices(&run, rule, &pair)?,
        reproduce::fit_round_trip()?,
        determinism(),
    ])
}

fn main() -> ExitCode {
    let checks = match all_checks() {
        Ok(c) => c,
        Err(e) => {
            println!("acceptance: error before all criteria ran: {e}");
            return ExitCode::FAILURE;
        }
    };
    for c in &checks {
        println!(
            "criterion {:>2}: {}  {} | {} | target {}",
            c.id,
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            c.value,
            c.target
        );
    }
    let failed = checks.iter().filter(|c| !c.pass).count();
    println!(
        "acceptance: {} passed, {failed} failed",
        checks.len() - failed
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
