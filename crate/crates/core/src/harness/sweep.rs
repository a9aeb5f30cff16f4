//! Parameter sweeps: one optimization per (value, series value, scheme,
//! repetition), run concurrently and collected in input order.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{csv_err, num, open_csv, summarize, Summary};
use crate::error::{Error, Result};
use crate::orchestrator::{run_baseline, BaselineKind, RunOptions};
use crate::scenario::{draw_users, Scenario};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SweepParam {
    #[serde(rename = "M")]
    Antennas,
    #[serde(rename = "epsilon", alias = "eps")]
    Epsilon,
    #[serde(rename = "Gamma")]
    Gamma,
    #[serde(rename = "S_b")]
    CovertBits,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::Antennas => "M",
            SweepParam::Epsilon => "epsilon",
            SweepParam::Gamma => "Gamma",
            SweepParam::CovertBits => "S_b",
        }
    }

    pub fn apply(self, s: &mut Scenario, v: f64) -> Result<()> {
        match self {
            SweepParam::Antennas => {
                if !(v >= 1.0 && v.fract() == 0.0) {
                    return Err(Error::invalid("M", format!("{v} is not a positive integer")));
                }
                s.m = v as usize;
            }
            SweepParam::Epsilon => s.epsilon = v,
            SweepParam::Gamma => s.gamma = v,
            SweepParam::CovertBits => s.s_b = v,
        }
        s.validate()
    }
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "M" | "m" => Ok(SweepParam::Antennas),
            "epsilon" | "eps" => Ok(SweepParam::Epsilon),
            "Gamma" | "gamma" => Ok(SweepParam::Gamma),
            "S_b" | "s_b" => Ok(SweepParam::CovertBits),
            other => Err(Error::invalid("param", format!("unknown sweep parameter `{other}` (M, epsilon, Gamma, S_b)"))),
        }
    }
}

/// Second axis crossed with the main one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSeries {
    pub param: SweepParam,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub param: SweepParam,
    pub values: Vec<f64>,
    #[serde(default)]
    pub series: Option<SweepSeries>,
    #[serde(default = "default_baselines")]
    pub baselines: Vec<BaselineKind>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one")]
    pub repetitions: usize,
}

fn default_baselines() -> Vec<BaselineKind> {
    vec![BaselineKind::NomaFull]
}

fn one() -> usize {
    1
}

impl SweepSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::invalid("values", "empty value list"));
        }
        if let Some(sr) = &self.series {
            if sr.values.is_empty() {
                return Err(Error::invalid("series.values", "empty value list"));
            }
            if sr.param == self.param {
                return Err(Error::invalid("series.param", "same as the swept parameter"));
            }
        }
        if self.baselines.is_empty() {
            return Err(Error::invalid("baselines", "no scheme selected"));
        }
        if self.repetitions == 0 {
            return Err(Error::invalid("repetitions", "must be at least 1"));
        }
        Ok(())
    }
}

/// One sweep point. Repetition `r` uses seed `spec.seed + r`; for `r > 0`
/// the users are redrawn from that seed.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepPoint {
    pub value: f64,
    pub series_value: Option<f64>,
    pub baseline: BaselineKind,
    pub repetition: usize,
    pub seed: u64,
}

pub fn sweep_points(spec: &SweepSpec) -> Vec<SweepPoint> {
    let series: Vec<Option<f64>> = match &spec.series {
        Some(sr) => sr.values.iter().map(|&v| Some(v)).collect(),
        None => vec![None],
    };
    let mut out = Vec::new();
    for &sv in &series {
        for &v in &spec.values {
            for &b in &spec.baselines {
                for r in 0..spec.repetitions {
                    out.push(SweepPoint {
                        value: v,
                        series_value: sv,
                        baseline: b,
                        repetition: r,
                        seed: spec.seed.wrapping_add(r as u64),
                    });
                }
            }
        }
    }
    out
}

pub fn point_scenario(base: &Scenario, spec: &SweepSpec, p: &SweepPoint) -> Result<Scenario> {
    let mut s = base.clone();
    s.seed = p.seed;
    if p.repetition > 0 {
        let (ub, uc) = draw_users(p.seed);
        s.u_b = ub;
        s.u_c = uc;
    }
    spec.param.apply(&mut s, p.value)?;
    if let (Some(sr), Some(v)) = (&spec.series, p.series_value) {
        sr.param.apply(&mut s, v)?;
    }
    Ok(s)
}

/// Status word and either the aggregates or the failure message.
pub type PointOutcome = (String, std::result::Result<Summary, String>);

pub fn run_point(base: &Scenario, spec: &SweepSpec, p: &SweepPoint) -> PointOutcome {
    let res = point_scenario(base, spec, p).and_then(|s| run_baseline(&s, p.baseline, &RunOptions::default()));
    match res {
        Ok(r) => (r.status.name().to_string(), Ok(summarize(&r))),
        Err(e) => {
            let word = if e.is_infeasible() { "infeasible" } else { "error" };
            (word.to_string(), Err(e.to_string()))
        }
    }
}

pub const SWEEP_COLUMNS: [&str; 17] = [
    "param",
    "value",
    "series_param",
    "series_value",
    "baseline",
    "repetition",
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
    "message",
];

pub const MEAN_COLUMNS: [&str; 12] = [
    "param",
    "value",
    "series_param",
    "series_value",
    "baseline",
    "runs",
    "runs_ok",
    "mean_total_aoi",
    "mean_sum_r_b",
    "mean_sum_r_c",
    "mean_aggregate_rate",
    "mean_xi_star",
];

/// Runs every point on at most `jobs` threads and writes `sweep.csv` (one
/// row per point) and `sweep_mean.csv` (means over repetitions). Failed
/// points are recorded and the sweep continues. Returns the outcomes in
/// point order.
pub fn cmd_sweep(base: &Scenario, spec: &SweepSpec, out: &Path, jobs: usize) -> Result<Vec<(SweepPoint, PointOutcome)>> {
    spec.validate()?;
    base.validate()?;
    let points = sweep_points(spec);
    // reject bad values before spending time on the others
    for p in &points {
        point_scenario(base, spec, p)?;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::invalid("jobs", e.to_string()))?;
    let outcomes: Vec<PointOutcome> = pool.install(|| points.par_iter().map(|p| run_point(base, spec, p)).collect());

    fs::create_dir_all(out)?;
    let series_name = spec.series.as_ref().map(|s| s.param.name()).unwrap_or("");
    let opt = |v: Option<f64>| v.map(num).unwrap_or_default();
    let mut w = open_csv(&out.join("sweep.csv"), "sweep", &SWEEP_COLUMNS)?;
    for (p, (status, res)) in points.iter().zip(&outcomes) {
        let mut row = vec![
            spec.param.name().to_string(),
            num(p.value),
            series_name.to_string(),
            opt(p.series_value),
            p.baseline.name().to_string(),
            p.repetition.to_string(),
            p.seed.to_string(),
            status.clone(),
        ];
        match res {
            Ok(sm) => {
                row.extend([
                    num(sm.total_aoi),
                    num(sm.sum_r_b),
                    num(sm.sum_r_c),
                    num(sm.aggregate_rate),
                    num(sm.mean_xi_star),
                    sm.serving_slots.to_string(),
                    sm.outer_iters.to_string(),
                    num(sm.max_residual),
                    String::new(),
                ]);
            }
            Err(msg) => {
                row.extend(std::iter::repeat(String::new()).take(8));
                row.push(msg.clone());
            }
        }
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;

    // means keyed by (series value, value, scheme) in first-seen order
    let mut groups: BTreeMap<usize, (usize, Vec<&Summary>)> = BTreeMap::new();
    let mut keys: Vec<&SweepPoint> = Vec::new();
    for (p, (_, res)) in points.iter().zip(&outcomes) {
        let idx = match keys.iter().position(|k| k.value == p.value && k.series_value == p.series_value && k.baseline == p.baseline) {
            Some(i) => i,
            None => {
                keys.push(p);
                keys.len() - 1
            }
        };
        let g = groups.entry(idx).or_insert((0, Vec::new()));
        g.0 += 1;
        if let Ok(sm) = res {
            g.1.push(sm);
        }
    }
    let mut w = open_csv(&out.join("sweep_mean.csv"), "sweep_mean", &MEAN_COLUMNS)?;
    for (idx, (runs, ok)) in &groups {
        let p = keys[*idx];
        let mean = |f: fn(&Summary) -> f64| {
            if ok.is_empty() {
                String::new()
            } else {
                num(ok.iter().map(|s| f(s)).sum::<f64>() / ok.len() as f64)
            }
        };
        w.write_record([
            spec.param.name().to_string(),
            num(p.value),
            series_name.to_string(),
            opt(p.series_value),
            p.baseline.name().to_string(),
            runs.to_string(),
            ok.len().to_string(),
            mean(|s| s.total_aoi),
            mean(|s| s.sum_r_b),
            mean(|s| s.sum_r_c),
            mean(|s| s.aggregate_rate),
            mean(|s| s.mean_xi_star),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(points.into_iter().zip(outcomes).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::default_scenario;

    fn spec(values: Vec<f64>) -> SweepSpec {
        SweepSpec {
            param: SweepParam::Antennas,
            values,
            series: Some(SweepSeries {
                param: SweepParam::Gamma,
                values: vec![10.0, 20.0, 30.0],
            }),
            baselines: vec![BaselineKind::NomaFull],
            seed: 0,
            repetitions: 1,
        }
    }

    #[test]
    fn antenna_and_power_grid_has_twelve_points() {
        let sp = spec(vec![4.0, 6.0, 8.0, 10.0]);
        let pts = sweep_points(&sp);
        assert_eq!(pts.len(), 12);
        assert!(pts.iter().all(|p| p.baseline == BaselineKind::NomaFull));
        let s = point_scenario(&default_scenario(), &sp, &pts[5]).unwrap();
        assert_eq!((s.m, s.gamma), (6, 20.0));
    }

    #[test]
    fn empty_values_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let e = cmd_sweep(&default_scenario(), &spec(vec![]), dir.path(), 1).unwrap_err();
        assert!(matches!(e, Error::Invalid { .. }), "{e}");
    }

    #[test]
    fn spec_json_round_trip() {
        let text = r#"{"param": "S_b", "values": [25e6, 45e6], "baselines": ["noma_full", "oma"], "repetitions": 2}"#;
        let sp = SweepSpec::from_json(text).unwrap();
        assert_eq!(sp.param, SweepParam::CovertBits);
        assert_eq!(sp.baselines, vec![BaselineKind::NomaFull, BaselineKind::Oma]);
        assert_eq!(sweep_points(&sp).len(), 8);
        assert!(SweepSpec::from_json(r#"{"param": "N", "values": [1]}"#).is_err());
    }

    #[test]
    fn repetitions_redraw_users() {
        let mut sp = spec(vec![4.0]);
        sp.series = None;
        sp.repetitions = 2;
        let pts = sweep_points(&sp);
        let base = default_scenario();
        let a = point_scenario(&base, &sp, &pts[0]).unwrap();
        let b = point_scenario(&base, &sp, &pts[1]).unwrap();
        assert_eq!(a.u_b, base.u_b);
        assert_ne!(b.u_b, base.u_b);
        assert_eq!(b.seed, 1);
    }
}
