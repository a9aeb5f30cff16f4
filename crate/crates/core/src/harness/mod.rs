//! Command implementations behind the `covaoi` binary: single runs, sweeps
//! and the oracle battery, all writing CSV.
//!
//! Every CSV starts with one `# covaoi <table> v<N>` comment line, then a
//! header row. Reals are written as `{:.12e}`; nothing time-dependent is
//! written, so identical inputs give identical bytes.

pub mod sweep;
pub mod verify;

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::orchestrator::{run_baseline, slot_detection, BaselineKind, OptimizationResult, RunOptions};
use crate::scenario::{default_with_seed, parse_scenario, Scenario};

pub use sweep::{cmd_sweep, SweepParam, SweepSeries, SweepSpec};
pub use verify::{cmd_verify, run_checks, Check};

pub const SCHEMA_VERSION: u32 = 1;

pub const RESULT_COLUMNS: [&str; 12] = [
    "n", "q_x", "q_y", "delta_b", "delta_c", "r_b", "r_c", "p_b", "p_c", "upsilon", "xi_star", "serving",
];

pub const ITERS_COLUMNS: [&str; 9] = [
    "iter",
    "objective",
    "traj_gain",
    "bf_gain",
    "accepted",
    "flagged_extractions",
    "max_residual",
    "max_upsilon",
    "min_xi_star",
];

pub const SUMMARY_COLUMNS: [&str; 11] = [
    "baseline",
    "seed",
    "status",
    "total_aoi",
    "sum_r_b",
    "sum_r_c",
    "aggregate_rate",
    "mean_xi_star",
    "serving_slots",
    "outer_iters",
    "max_residual",
];

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const VERIFY_FAILED: i32 = 1;
    pub const INFEASIBLE: i32 = 2;
    pub const USAGE: i32 = 3;
}

/// Exit code for an error surfaced by a command.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Infeasible(_) | Error::Solver(_) | Error::Anchor(_) => exit::INFEASIBLE,
        Error::Parse(_) | Error::Invalid { .. } | Error::Geometry(_) | Error::Io(_) => exit::USAGE,
    }
}

pub fn num(v: f64) -> String {
    format!("{v:.12e}")
}

/// CSV writer with the schema comment already in place.
pub(crate) fn open_csv(path: &Path, table: &str, header: &[&str]) -> Result<csv::Writer<BufWriter<File>>> {
    let mut f = BufWriter::new(File::create(path)?);
    writeln!(f, "# covaoi {table} v{SCHEMA_VERSION}")?;
    let mut w = csv::Writer::from_writer(f);
    w.write_record(header).map_err(csv_err)?;
    Ok(w)
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Io(std::io::Error::other(format!("{other:?}"))),
    }
}

/// Per-run aggregates written to `summary.csv` and to sweep rows.
#[derive(Clone, Debug, PartialEq)]
pub struct Summary {
    pub total_aoi: f64,
    pub sum_r_b: f64,
    pub sum_r_c: f64,
    /// `sum_r_b + sum_r_c`.
    pub aggregate_rate: f64,
    /// Mean ξ* over serving slots (1 when Bob is never served).
    pub mean_xi_star: f64,
    pub serving_slots: usize,
    /// Outer iterations after the initial point.
    pub outer_iters: usize,
    pub max_residual: f64,
}

pub fn summarize(r: &OptimizationResult) -> Summary {
    let it = &r.best;
    let sum_r_b: f64 = it.rates.r_b.iter().sum();
    let sum_r_c: f64 = it.rates.r_c.iter().sum();
    let xs: Vec<f64> = it.serving.slots().map(|i| slot_detection(&it.plan, i).1).collect();
    let mean_xi_star = if xs.is_empty() { 1.0 } else { xs.iter().sum::<f64>() / xs.len() as f64 };
    Summary {
        total_aoi: it.objective(),
        sum_r_b,
        sum_r_c,
        aggregate_rate: sum_r_b + sum_r_c,
        mean_xi_star,
        serving_slots: it.serving.count(),
        outer_iters: r.log.len().saturating_sub(1),
        max_residual: r.log.last().map(|l| l.max_residual).unwrap_or(0.0),
    }
}

/// Writes `result.csv`, `iters.csv` and `summary.csv` for a finished run.
pub fn write_run(r: &OptimizationResult, s: &Scenario, out: &Path) -> Result<()> {
    fs::create_dir_all(out)?;
    let it = &r.best;
    let mut w = open_csv(&out.join("result.csv"), "result", &RESULT_COLUMNS)?;
    for n in 0..s.n {
        let (u, x) = slot_detection(&it.plan, n);
        w.write_record([
            (n + 1).to_string(),
            num(it.q[n].x),
            num(it.q[n].y),
            num(it.aoi.delta_b[n]),
            num(it.aoi.delta_c[n]),
            num(it.rates.r_b[n]),
            num(it.rates.r_c[n]),
            num(it.plan.p_b(n)),
            num(it.plan.p_c(n)),
            num(u),
            num(x),
            u8::from(it.serving.contains(n)).to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;

    let mut w = open_csv(&out.join("iters.csv"), "iters", &ITERS_COLUMNS)?;
    for l in &r.log {
        w.write_record([
            l.iter.to_string(),
            num(l.objective),
            num(l.traj_gain),
            num(l.bf_gain),
            l.accepted.to_string(),
            l.flagged_extractions.to_string(),
            num(l.max_residual),
            num(l.max_upsilon),
            num(l.min_xi_star),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;

    let sm = summarize(r);
    let mut w = open_csv(&out.join("summary.csv"), "summary", &SUMMARY_COLUMNS)?;
    w.write_record([
        r.kind.name().to_string(),
        s.seed.to_string(),
        r.status.name().to_string(),
        num(sm.total_aoi),
        num(sm.sum_r_b),
        num(sm.sum_r_c),
        num(sm.aggregate_rate),
        num(sm.mean_xi_star),
        sm.serving_slots.to_string(),
        sm.outer_iters.to_string(),
        num(sm.max_residual),
    ])
    .map_err(csv_err)?;
    w.flush()?;
    fs::write(out.join("scenario.json"), s.to_json() + "\n")?;
    Ok(())
}

/// Scenario from an optional JSON file, with `seed` overriding the file's
/// own seed (and so the drawn users, unless the file places them).
pub fn load_with_seed(path: Option<&Path>, seed: Option<u64>) -> Result<Scenario> {
    let Some(path) = path else {
        return Ok(default_with_seed(seed.unwrap_or(0)));
    };
    let text = fs::read_to_string(path)?;
    let Some(seed) = seed else {
        return parse_scenario(&text);
    };
    let mut v: serde_json::Value = serde_json::from_str(&text).map_err(|e| Error::Parse(e.to_string()))?;
    match v.as_object_mut() {
        Some(obj) => {
            obj.insert("seed".into(), seed.into());
        }
        None => return Err(Error::Parse("scenario must be a JSON object".into())),
    }
    parse_scenario(&v.to_string())
}

/// One optimization of `kind` on `s`, written to `out`.
pub fn cmd_run(s: &Scenario, kind: BaselineKind, out: &Path, dump: Option<&Path>) -> Result<OptimizationResult> {
    s.validate()?;
    if let Some(d) = dump {
        // the dump describes this run only
        File::create(d)?;
    }
    let ro = RunOptions {
        dump: dump.map(Path::to_path_buf),
    };
    let r = run_baseline(s, kind, &ro)?;
    write_run(&r, s, out)?;
    Ok(r)
}
