//! `covaoi`: single runs, parameter sweeps and the oracle battery.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use covaoi::harness::{self, exit, SweepParam, SweepSeries, SweepSpec};
use covaoi::orchestrator::BaselineKind;
use covaoi::Error;

#[derive(Parser, Debug)]
#[command(name = "covaoi", version, about = "Covert UAV downlink AoI optimizer")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Args, Debug)]
struct ScenarioArgs {
    /// Scenario JSON; omitted keys take their defaults.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Overrides the scenario seed (user placement and randomization).
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Optimize one scenario with one scheme.
    Run {
        #[command(flatten)]
        common: ScenarioArgs,
        /// noma_full, oma, straight_line_path, random_path or no_covertness.
        #[arg(long, default_value = "noma_full")]
        baseline: BaselineKind,
        /// Append every assembled conic problem to this file.
        #[arg(long)]
        dump_problems: Option<PathBuf>,
    },
    /// Run one optimization per sweep point.
    Sweep {
        #[command(flatten)]
        common: ScenarioArgs,
        /// Sweep description as JSON; replaces the flags below.
        #[arg(long, conflicts_with_all = ["param", "values", "series_param", "series_values", "baselines", "repetitions"])]
        spec: Option<PathBuf>,
        /// M, epsilon, Gamma or S_b.
        #[arg(long, required_unless_present = "spec")]
        param: Option<SweepParam>,
        #[arg(long, value_delimiter = ',', num_args = 1.., required_unless_present = "spec")]
        values: Vec<f64>,
        #[arg(long, requires = "series_values")]
        series_param: Option<SweepParam>,
        #[arg(long, value_delimiter = ',', num_args = 1.., requires = "series_param")]
        series_values: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "noma_full")]
        baselines: Vec<BaselineKind>,
        #[arg(long, default_value_t = 1)]
        repetitions: usize,
        /// Concurrent sweep points (defaults to the available cores).
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Run the oracle battery and write verify.csv.
    Verify {
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn fail(e: &Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(harness::exit_code(e) as u8)
}

fn run(common: &ScenarioArgs, kind: BaselineKind, dump: Option<&Path>) -> Result<(), Error> {
    let s = harness::load_with_seed(common.scenario.as_deref(), common.seed)?;
    let r = harness::cmd_run(&s, kind, &common.out, dump)?;
    println!(
        "{}: total AoI {:.6} s, {} outer iterations, {}",
        kind,
        r.best.objective(),
        r.log.len().saturating_sub(1),
        r.status.name()
    );
    Ok(())
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { exit::USAGE } else { exit::OK };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match cli.cmd {
        Command::Run {
            common,
            baseline,
            dump_problems,
        } => match run(&common, baseline, dump_problems.as_deref()) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => fail(&e),
        },
        Command::Sweep {
            common,
            spec,
            param,
            values,
            series_param,
            series_values,
            baselines,
            repetitions,
            jobs,
        } => {
            let res = (|| {
                let base = harness::load_with_seed(common.scenario.as_deref(), common.seed)?;
                let spec = match spec {
                    Some(path) => {
                        let mut sp = SweepSpec::from_json(&std::fs::read_to_string(path)?)?;
                        if let Some(seed) = common.seed {
                            sp.seed = seed;
                        }
                        sp
                    }
                    None => SweepSpec {
                        param: param.expect("required by clap"),
                        values,
                        series: series_param.map(|p| SweepSeries { param: p, values: series_values }),
                        baselines,
                        seed: base.seed,
                        repetitions,
                    },
                };
                let jobs = jobs.unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1));
                harness::cmd_sweep(&base, &spec, &common.out, jobs)
            })();
            match res {
                Ok(rows) => {
                    let failed = rows.iter().filter(|(_, (_, r))| r.is_err()).count();
                    println!("{} sweep points, {failed} failed", rows.len());
                    ExitCode::SUCCESS
                }
                Err(e) => fail(&e),
            }
        }
        Command::Verify { out, seed } => match harness::cmd_verify(&out, seed) {
            Ok((all, checks)) => {
                for c in &checks {
                    println!("{} {} ({:.3e} vs {:.1e})", if c.passed { "PASS" } else { "FAIL" }, c.name, c.value, c.tolerance);
                }
                if all {
                    ExitCode::SUCCESS
                } else {
                    let names: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
                    eprintln!("failing checks: {}", names.join(", "));
                    ExitCode::from(exit::VERIFY_FAILED as u8)
                }
            }
            Err(e) => fail(&e),
        },
    }
}
