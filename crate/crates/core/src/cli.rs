//! Command-line front end.
//!
//! Every command writes its primary result to the supplied writer (stdout in
//! the binary) and files only where an output path is given. Exit codes: 0
//! success, 1 domain error, 2 usage error.

use std::fmt::Write as _;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::io;
use crate::linalg::RVector;
use crate::measurements::{
    optimal_pair, projective_from_direction, random_measurement_set, MeasurementSet, Side,
};
use crate::simulator::{bootstrap_ci, estimate, run, ExperimentConfig};
use crate::states::{
    bloch_data, classical_quantum, random_density, random_density_with, random_unitary, werner,
    DensityMatrix,
};
use crate::witness::{max_witness_bound, witness_from_bloch, witness_value};
use crate::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "discord-witness", version, about = "Quantum-discord witness from uncharacterized measurements")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a state file.
    State(StateArgs),
    /// Evaluate the witness of a state under given measurements.
    Witness(WitnessArgs),
    /// Synthesize the two-qubit witness-maximizing measurements.
    Optimize(OptimizeArgs),
    /// Simulate the experiment and estimate the witness with a bootstrap interval.
    Simulate(SimulateArgs),
    /// Werner-state sweep of the ideal and lossy witness as CSV.
    Sweep(SweepArgs),
    /// Run the built-in invariant checks.
    Selftest(SelftestArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum StateKind {
    Werner,
    ClassicalQuantum,
    Random,
}

#[derive(Debug, Args)]
pub struct StateArgs {
    #[arg(long, value_enum)]
    pub kind: StateKind,
    /// Werner weight, or the comma-separated mixture weights for classical-quantum.
    #[arg(long, value_delimiter = ',')]
    pub p: Vec<f64>,
    #[arg(long, default_value_t = 2)]
    pub da: usize,
    #[arg(long, default_value_t = 2)]
    pub db: usize,
    /// Rank of a random state (full rank when omitted).
    #[arg(long)]
    pub rank: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Use a random orthonormal basis on Alice's side for classical-quantum states.
    #[arg(long)]
    pub random_basis: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct WitnessArgs {
    #[arg(long)]
    pub state: PathBuf,
    #[arg(long)]
    pub alice: PathBuf,
    #[arg(long)]
    pub bob: PathBuf,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    #[arg(long)]
    pub state: PathBuf,
    #[arg(long)]
    pub alice_out: PathBuf,
    #[arg(long)]
    pub bob_out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub state: PathBuf,
    #[arg(long)]
    pub alice: PathBuf,
    #[arg(long)]
    pub bob: PathBuf,
    /// Detection efficiency per Alice setting (default: all 1).
    #[arg(long, value_delimiter = ',')]
    pub alpha: Vec<f64>,
    /// Detection efficiency per Bob setting (default: all 1).
    #[arg(long, value_delimiter = ',')]
    pub beta: Vec<f64>,
    #[arg(long, default_value_t = 1_000_000)]
    pub rounds: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub tally_out: Option<PathBuf>,
    #[arg(long, default_value_t = 1000)]
    pub resamples: usize,
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// `start:stop:step` or a comma-separated list of p values.
    #[arg(long, default_value = "0:1:0.05")]
    pub grid: String,
    #[arg(long, value_delimiter = ',', default_value = "0.75,0.8")]
    pub alpha: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "0.8,0.625")]
    pub beta: Vec<f64>,
    /// Simulated rounds per grid point; adds estimate and interval columns.
    #[arg(long)]
    pub rounds: Option<u64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 500)]
    pub resamples: usize,
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SelftestArgs {
    #[arg(long, default_value_t = 2024)]
    pub seed: u64,
}

pub fn execute(cli: Cli, out: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::State(a) => cmd_state(&a, out),
        Command::Witness(a) => cmd_witness(&a, out),
        Command::Optimize(a) => cmd_optimize(&a, out),
        Command::Simulate(a) => cmd_simulate(&a, out),
        Command::Sweep(a) => cmd_sweep_werner(&a, out),
        Command::Selftest(a) => {
            let checks = cmd_selftest(&a, out)?;
            match checks.iter().filter(|c| !c.passed).count() {
                0 => Ok(()),
                n => Err(Error::InvalidParams(format!("{n} self-test check(s) failed"))),
            }
        }
    }
}

fn emit(out: &mut dyn Write, text: &str) -> Result<()> {
    out.write_all(text.as_bytes())?;
    Ok(())
}

pub fn build_state(args: &StateArgs) -> Result<DensityMatrix> {
    match args.kind {
        StateKind::Werner => match args.p.as_slice() {
            [p] => werner(*p),
            _ => Err(Error::InvalidParams("werner needs exactly one --p value".into())),
        },
        StateKind::ClassicalQuantum => {
            let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
            let locals = (0..args.p.len())
                .map(|_| random_density_with(args.db, 1, args.db, &mut rng))
                .collect::<Result<Vec<_>>>()?;
            let basis = args.random_basis.then(|| random_unitary(args.p.len(), &mut rng));
            classical_quantum(&args.p, &locals, basis.as_ref())
        }
        StateKind::Random => {
            let rank = args.rank.unwrap_or(args.da * args.db);
            random_density(args.da, args.db, rank, args.seed)
        }
    }
}

pub fn cmd_state(args: &StateArgs, out: &mut dyn Write) -> Result<()> {
    let rho = build_state(args)?;
    match &args.out {
        Some(path) => io::write_state(path, &rho),
        None => emit(out, &io::to_json(&io::StateFile::from(&rho))?),
    }
}

pub fn cmd_witness(args: &WitnessArgs, out: &mut dyn Write) -> Result<()> {
    let rho = io::read_state(&args.state)?;
    let alice = io::read_measurements(&args.alice, Side::A)?;
    let bob = io::read_measurements(&args.bob, Side::B)?;
    let report = witness_value(&rho, &alice, &bob)?;
    emit(out, &io::to_json(&report)?)
}

#[derive(Serialize)]
struct OptimizeOutput {
    w_max: f64,
}

pub fn cmd_optimize(args: &OptimizeArgs, out: &mut dyn Write) -> Result<()> {
    let rho = io::read_state(&args.state)?;
    if rho.d_a() != 2 || rho.d_b() != 2 {
        return Err(Error::UnsupportedDimension {
            d_a: rho.d_a(),
            d_b: rho.d_b(),
        });
    }
    let pair = optimal_pair(&bloch_data(&rho)?.s_hat)?;
    io::write_measurements(&args.alice_out, &pair.alice)?;
    io::write_measurements(&args.bob_out, &pair.bob)?;
    emit(out, &io::to_json(&OptimizeOutput { w_max: pair.w_max })?)
}

#[derive(Serialize)]
struct IntervalOutput {
    low: f64,
    high: f64,
    sigma: f64,
    level: f64,
    resamples: usize,
}

#[derive(Serialize)]
struct SimulateOutput {
    report: crate::witness::WitnessReport,
    ci: IntervalOutput,
}

fn efficiencies(given: &[f64], settings: usize) -> Vec<f64> {
    if given.is_empty() {
        vec![1.0; settings]
    } else {
        given.to_vec()
    }
}

pub fn cmd_simulate(args: &SimulateArgs, out: &mut dyn Write) -> Result<()> {
    let state = io::read_state(&args.state)?;
    let alice = io::read_measurements(&args.alice, Side::A)?;
    let bob = io::read_measurements(&args.bob, Side::B)?;
    let (d_a, d_b) = (state.d_a(), state.d_b());
    let config = ExperimentConfig {
        alpha: efficiencies(&args.alpha, alice.len()),
        beta: efficiencies(&args.beta, bob.len()),
        state,
        alice,
        bob,
        rounds: args.rounds,
        seed: args.seed,
    };
    let tally = run(&config)?;
    if let Some(path) = &args.tally_out {
        io::write_tally(path, &tally)?;
    }
    let report = estimate(&tally, d_a, d_b)?;
    let ci = bootstrap_ci(&tally, args.resamples, args.level, args.seed)?;
    let output = SimulateOutput {
        report,
        ci: IntervalOutput {
            low: ci.low,
            high: ci.high,
            sigma: ci.sigma,
            level: args.level,
            resamples: args.resamples,
        },
    };
    emit(out, &io::to_json(&output)?)
}

/// Decimal grid values, rounded to 12 places so `0.15` prints as `0.15`.
pub fn parse_grid(grid: &str) -> Result<Vec<f64>> {
    let bad = |msg: String| Error::InvalidParams(format!("invalid grid {grid:?}: {msg}"));
    let values: Vec<f64> = if grid.contains(':') {
        let parts: Vec<f64> = grid
            .split(':')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| bad(e.to_string()))?;
        let [start, stop, step] = parts[..] else {
            return Err(bad("expected start:stop:step".into()));
        };
        if !(step > 0.0) || stop < start {
            return Err(bad("step must be positive and stop >= start".into()));
        }
        let n = ((stop - start) / step + 1e-9).floor() as usize;
        (0..=n).map(|i| start + i as f64 * step).collect()
    } else {
        grid.split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| bad(e.to_string()))?
    };
    let values: Vec<f64> = values.into_iter().map(|v| (v * 1e12).round() / 1e12).collect();
    if values.is_empty() || values.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(bad("all values must lie in [0, 1]".into()));
    }
    Ok(values)
}

fn axis(i: usize) -> Result<crate::measurements::DichotomicObservable> {
    let mut v = [0.0; 3];
    v[i] = 1.0;
    projective_from_direction(&v)
}

/// `X` then `Z` measurements, the settings used for the Werner sweep.
pub fn xz_settings(side: Side) -> Result<MeasurementSet> {
    MeasurementSet::new(side, vec![axis(0)?, axis(2)?])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub p: f64,
    pub w_max: f64,
    pub w_imp: f64,
    /// `(estimate, ci_low, ci_high)` when simulated.
    pub estimated: Option<(f64, f64, f64)>,
}

pub fn sweep_rows(args: &SweepArgs) -> Result<Vec<SweepRow>> {
    let grid = parse_grid(&args.grid)?;
    let alice = xz_settings(Side::A)?;
    let bob = xz_settings(Side::B)?;
    let lossy_a = alice.with_efficiencies(&args.alpha)?;
    let lossy_b = bob.with_efficiencies(&args.beta)?;
    grid.iter()
        .enumerate()
        .map(|(i, &p)| {
            let state = werner(p)?;
            let w_max = witness_value(&state, &alice, &bob)?.w;
            let w_imp = witness_value(&state, &lossy_a, &lossy_b)?.w;
            let estimated = match args.rounds {
                Some(rounds) => {
                    let seed = args.seed.wrapping_add(i as u64);
                    let config = ExperimentConfig {
                        state,
                        alice: alice.clone(),
                        bob: bob.clone(),
                        alpha: args.alpha.clone(),
                        beta: args.beta.clone(),
                        rounds,
                        seed,
                    };
                    let tally = run(&config)?;
                    let w = estimate(&tally, 2, 2)?.w;
                    let ci = bootstrap_ci(&tally, args.resamples, args.level, seed)?;
                    Some((w, ci.low, ci.high))
                }
                None => None,
            };
            Ok(SweepRow { p, w_max, w_imp, estimated })
        })
        .collect()
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let simulated = rows.iter().any(|r| r.estimated.is_some());
    let mut csv = String::from(if simulated {
        "p,w_max,w_imp,w_est,ci_low,ci_high\n"
    } else {
        "p,w_max,w_imp\n"
    });
    for r in rows {
        let _ = write!(csv, "{},{},{}", r.p, r.w_max, r.w_imp);
        if let Some((w, lo, hi)) = r.estimated {
            let _ = write!(csv, ",{w},{lo},{hi}");
        }
        csv.push('\n');
    }
    csv
}

pub fn cmd_sweep_werner(args: &SweepArgs, out: &mut dyn Write) -> Result<()> {
    let csv = sweep_csv(&sweep_rows(args)?);
    match &args.out {
        Some(path) => Ok(std::fs::write(path, csv)?),
        None => emit(out, &csv),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, body: impl FnOnce() -> Result<(bool, String)>) -> CheckResult {
    match body() {
        Ok((passed, detail)) => CheckResult { name, passed, detail },
        Err(e) => CheckResult {
            name,
            passed: false,
            detail: format!("error: {e}"),
        },
    }
}

fn random_probs(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let mut p: Vec<f64> = raw.iter().map(|x| x / total).collect();
    let drift = 1.0 - p.iter().sum::<f64>();
    p[0] += drift;
    p
}

pub fn selftest_checks(seed: u64) -> Vec<CheckResult> {
    let mut checks = Vec::new();

    checks.push(check("zero-discord vanishing", || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst = 0.0f64;
        let mut evaluations = 0;
        for da in 2..=4 {
            for db in 2..=4 {
                for _ in 0..4 {
                    let locals = (0..da)
                        .map(|_| random_density_with(db, 1, db, &mut rng))
                        .collect::<Result<Vec<_>>>()?;
                    let u = random_unitary(da, &mut rng);
                    let cq = classical_quantum(&random_probs(da, &mut rng), &locals, Some(&u))?;
                    for _ in 0..5 {
                        let a = random_measurement_set(Side::A, da, da, &mut rng)?;
                        let b = random_measurement_set(Side::B, db, da, &mut rng)?;
                        worst = worst.max(witness_value(&cq, &a, &b)?.w.abs());
                        evaluations += 1;
                    }
                }
            }
        }
        Ok((worst < 1e-8, format!("{evaluations} evaluations, max |w| = {worst:.3e}")))
    }));

    checks.push(check("loss scaling", || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
        let (alpha, beta) = ([0.75, 0.8], [0.8, 0.625]);
        let mut worst = 0.0f64;
        for _ in 0..50 {
            let rho = random_density_with(2, 2, 4, &mut rng)?;
            let a = random_measurement_set(Side::A, 2, 2, &mut rng)?;
            let b = random_measurement_set(Side::B, 2, 2, &mut rng)?;
            let w = witness_value(&rho, &a, &b)?.w;
            let lossy = witness_value(&rho, &a.with_efficiencies(&alpha)?, &b.with_efficiencies(&beta)?)?.w;
            worst = worst.max((lossy - 0.3 * w).abs());
        }
        Ok((worst < 1e-12, format!("50 instances, max deviation {worst:.3e}")))
    }));

    checks.push(check("bound tightness", || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(2));
        let mut max_excess = f64::NEG_INFINITY;
        let mut max_gap = 0.0f64;
        for _ in 0..20 {
            let rho = random_density_with(2, 2, 4, &mut rng)?;
            let bound = max_witness_bound(&rho)?;
            for _ in 0..500 {
                let a = random_measurement_set(Side::A, 2, 2, &mut rng)?;
                let b = random_measurement_set(Side::B, 2, 2, &mut rng)?;
                max_excess = max_excess.max(witness_value(&rho, &a, &b)?.w - bound);
            }
            let pair = optimal_pair(&bloch_data(&rho)?.s_hat)?;
            max_gap = max_gap.max((witness_value(&rho, &pair.alice, &pair.bob)?.w - bound).abs());
        }
        Ok((
            max_excess <= 1e-9 && max_gap <= 1e-9,
            format!("max sampled excess {max_excess:.3e}, optimum gap {max_gap:.3e}"),
        ))
    }));

    checks.push(check("dual-path agreement", || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(3));
        let mut worst = 0.0f64;
        for (da, db) in [(2, 2), (2, 3), (3, 3), (4, 2)] {
            for _ in 0..25 {
                let rho = random_density_with(da, db, da * db, &mut rng)?;
                let a = random_measurement_set(Side::A, da, da, &mut rng)?;
                let b = random_measurement_set(Side::B, db, da, &mut rng)?;
                let direct = witness_value(&rho, &a, &b)?.w;
                let bloch: Vec<RVector> = a.blochs();
                let via_bloch = witness_from_bloch(&bloch_data(&rho)?.s_hat, &bloch, &b.blochs(), da, db)?;
                worst = worst.max((direct - via_bloch).abs());
            }
        }
        Ok((worst < 1e-9, format!("100 instances, max deviation {worst:.3e}")))
    }));

    checks.push(check("werner curve", || {
        let mut worst = 0.0f64;
        for i in 0..=20 {
            let p = i as f64 / 20.0;
            let rho = werner(p)?;
            let pair = optimal_pair(&bloch_data(&rho)?.s_hat)?;
            worst = worst.max((witness_value(&rho, &pair.alice, &pair.bob)?.w - p * p).abs());
        }
        Ok((worst < 1e-9, format!("21 grid points, max |w - p^2| = {worst:.3e}")))
    }));

    checks.push(check("corrupted state rejected", || {
        let corrupted = r#"{"d_a": 2, "d_b": 2, "matrix": [
            [[0.25, 0], [0.2, 0], [0, 0], [0, 0]],
            [[0.0, 0], [0.25, 0], [0, 0], [0, 0]],
            [[0, 0], [0, 0], [0.25, 0], [0, 0]],
            [[0, 0], [0, 0], [0, 0], [0.25, 0]]]}"#;
        Ok(match io::parse_state(corrupted) {
            Err(Error::InvalidState { invariant, .. }) => {
                (invariant == "hermitian", format!("reader reported the {invariant} invariant"))
            }
            Err(e) => (false, format!("unexpected error {e}")),
            Ok(_) => (false, "corrupted state was accepted".into()),
        })
    }));

    checks.push(check("simulation determinism", || {
        let config = ExperimentConfig {
            state: werner(0.8)?,
            alice: xz_settings(Side::A)?,
            bob: xz_settings(Side::B)?,
            alpha: vec![0.75, 0.8],
            beta: vec![0.8, 0.625],
            rounds: 200_000,
            seed,
        };
        let first = run(&config)?;
        let second = run(&config)?;
        Ok((first == second, format!("{} rounds tallied twice", first.total_rounds())))
    }));

    checks
}

pub fn cmd_selftest(args: &SelftestArgs, out: &mut dyn Write) -> Result<Vec<CheckResult>> {
    let checks = selftest_checks(args.seed);
    let mut text = String::new();
    for c in &checks {
        let status = if c.passed { "PASS" } else { "FAIL" };
        let _ = writeln!(text, "[{status}] {}: {}", c.name, c.detail);
    }
    let passed = checks.iter().filter(|c| c.passed).count();
    let _ = writeln!(text, "{passed}/{} checks passed", checks.len());
    emit(out, &text)?;
    Ok(checks)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_parsing() {
        let g = parse_grid("0:1:0.05").unwrap();
        assert_eq!(g.len(), 21);
        assert_eq!(g[3], 0.15);
        assert_eq!(g[20], 1.0);
        assert_eq!(parse_grid("0.1, 0.5").unwrap(), vec![0.1, 0.5]);
        assert!(parse_grid("0:1.5:0.5").is_err());
        assert!(parse_grid("0:1:0").is_err());
        assert!(parse_grid("a,b").is_err());
        assert!(parse_grid("0:1").is_err());
    }

    #[test]
    fn sweep_csv_format() {
        let args = SweepArgs {
            grid: "0,0.5".into(),
            alpha: vec![0.75, 0.8],
            beta: vec![0.8, 0.625],
            rounds: None,
            seed: 0,
            resamples: 200,
            level: 0.95,
            out: None,
        };
        let csv = sweep_csv(&sweep_rows(&args).unwrap());
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "p,w_max,w_imp");
        assert_eq!(lines[1], "0,0,0");
        let row: Vec<f64> = lines[2].split(',').map(|v| v.parse().unwrap()).collect();
        assert_eq!(row[0], 0.5);
        assert!((row[1] - 0.25).abs() < 1e-12 && (row[2] - 0.075).abs() < 1e-12);
        assert!(csv.ends_with('\n') && !csv.contains('\r'));
    }
}
