//! The oracle battery behind `covaoi verify`: every closed form is compared
//! against an independent numeric reference.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{csv_err, num, open_csv};
use crate::channel::{channel_gain, gain, CVec, Position2D};
use crate::conic::{self, AffExpr, ConicProblem, SolveStatus, SolverSettings};
use crate::covertness::{mc_detection_oracle, optimal_tau, p_fa, p_md, upsilon, upsilon_grad, xi, xi_star, EveModel};
use crate::error::Result;
use crate::scenario::default_scenario;
use crate::subproblems::{solve_aoi_lp, Rates, ServingSchedule};
use crate::surrogate::{
    aligned_power_bound, sinr_rate, sinr_rate_surrogate, slack_distance_bound, traj_rate_surrogates, RateLinearization, TrajectoryLinearization,
};

/// One row of `verify.csv`. `value` is the worst observed error (or count
/// of violations) and passes when it is at most `tolerance`.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub tolerance: f64,
    pub detail: String,
}

impl Check {
    fn new(name: &str, value: f64, tolerance: f64, detail: impl Into<String>) -> Self {
        Self {
            name: name.to_string(),
            passed: value <= tolerance,
            value,
            tolerance,
            detail: detail.into(),
        }
    }
}

pub const MC_TUPLES: usize = 20;
pub const MC_TRIALS: usize = 100_000;
pub const MC_G: usize = 10_000;
pub const TAU_GRID: usize = 100_000;
pub const SAMPLES: usize = 1000;

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// Worst `|closed form − MC| / SE` over random `(ϖ_b, ϖ_c, σ_e², τ)`
/// tuples, SE from the closed-form probability.
pub fn check_mc_agreement(seed: u64, tuples: usize, trials: usize, g: usize) -> Check {
    let mut r = rng(seed, 1);
    let mut worst = 0.0f64;
    let mut at = String::new();
    for k in 0..tuples {
        let vb: f64 = r.gen_range(0.2..3.0);
        let vc = r.gen_range(0.5..4.0);
        let s2 = r.gen_range(0.5..2.0);
        // keep τ clear of the noise floor, where the finite-G statistic
        // smooths the kink of the closed forms
        let tau = s2 * 1.1 + r.gen_range(0.1..2.0) * vb.max(vc);
        let eve = EveModel::from_varpi(vb, vc, s2);
        let est = mc_detection_oracle(&eve, tau, trials, g, seed.wrapping_mul(1000).wrapping_add(k as u64));
        for (name, p, hat) in [("p_fa", p_fa(tau, &eve), est.p_fa), ("p_md", p_md(tau, &eve), est.p_md)] {
            let se = (p * (1.0 - p) / trials as f64).sqrt().max(1.0 / trials as f64);
            let z = (hat - p).abs() / se;
            if z > worst {
                worst = z;
                at = format!("{name} tuple {k}: closed {p:.6}, sampled {hat:.6}");
            }
        }
    }
    Check::new("mc_detection_agreement", worst, 3.0, format!("{tuples} tuples, {trials} trials, G={g}; worst at {at}"))
}

/// Optimal threshold against a dense τ grid, and the closed-form minimum.
pub fn check_threshold(seed: u64) -> Vec<Check> {
    let mut r = rng(seed, 2);
    let mut over = f64::NEG_INFINITY;
    let mut gap = 0.0f64;
    for _ in 0..MC_TUPLES {
        let b: f64 = r.gen_range(0.05..5.0);
        let c = r.gen_range(0.05..5.0);
        let eve = EveModel::new(b, c, r.gen_range(1e-4..1e-2), r.gen_range(50.0..500.0), r.gen_range(1e-9..1e-6));
        let t = optimal_tau(&eve);
        let hi = 30.0 * eve.varpi_b.max(eve.varpi_c);
        let grid_min = (0..TAU_GRID)
            .map(|i| xi(eve.sigma_e2 + hi * i as f64 / (TAU_GRID - 1) as f64, &eve))
            .fold(f64::INFINITY, f64::min);
        let at = xi(t, &eve);
        over = over.max(at - grid_min);
        gap = gap.max((at - xi_star(b, c)).abs());
    }
    let exact = xi_star(1.0, 2.0);
    vec![
        Check::new("tau_star_vs_grid", over, 1e-6, format!("{MC_TUPLES} models, {TAU_GRID}-point grid; max ξ(τ*) − grid min")),
        Check::new("xi_star_closed_form", gap, 1e-9, "max |ξ(τ*) − xi_star(B, C)|"),
        Check::new("xi_star_1_2", (exact - 0.75).abs(), 0.0, format!("xi_star(1, 2) = {exact:.17}")),
    ]
}

/// Minimum detection error at `d_min`, `2 d_min`, `10 d_min`.
pub fn check_distance_independence(seed: u64) -> Check {
    let s = default_scenario();
    let d_min = s.eve_distance();
    let mut r = rng(seed, 3);
    let mut worst = 0.0f64;
    for _ in 0..MC_TUPLES {
        let (b, c) = (r.gen_range(0.01..5.0), r.gen_range(0.01..5.0));
        let vals: Vec<f64> = [1.0, 2.0, 10.0]
            .iter()
            .map(|k| {
                let eve = EveModel::new(b, c, s.mu0, k * d_min, s.sigma2_e);
                1.0 - xi(optimal_tau(&eve), &eve)
            })
            .collect();
        let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        worst = worst.max(hi - lo);
    }
    Check::new("xi_star_distance_independent", worst, 1e-12, format!("d_e ∈ {{1, 2, 10}}·{d_min:.3} m"))
}

fn off_diagonal_pair(r: &mut ChaCha8Rng) -> (f64, f64) {
    loop {
        let p_c = 10f64.powf(r.gen_range(-2.0..1.0));
        let s = 10f64.powf(r.gen_range(-2.0..2.0));
        if (s - 1.0).abs() > 1e-2 {
            return (s * p_c, p_c);
        }
    }
}

/// `Υ = 1 − min_τ ξ` with the minimum taken from the detection model.
pub fn check_upsilon_identity(seed: u64) -> Check {
    let mut r = rng(seed, 4);
    let mut worst = 0.0f64;
    for _ in 0..SAMPLES {
        let (pb, pc) = off_diagonal_pair(&mut r);
        let eve = EveModel::from_varpi(pb, pc, r.gen_range(0.1..2.0));
        let direct = 1.0 - xi(optimal_tau(&eve), &eve);
        worst = worst.max((upsilon(pb, pc) - direct).abs());
    }
    Check::new("upsilon_identity", worst, 1e-12, format!("{SAMPLES} pairs"))
}

/// Gradient of Υ against central differences with step `1e-6·p`.
pub fn check_gradient_with(seed: u64, grad: impl Fn(f64, f64) -> (f64, f64)) -> Check {
    let mut r = rng(seed, 5);
    let mut worst = 0.0f64;
    let mut at = (0.0, 0.0);
    for _ in 0..SAMPLES {
        let (pb, pc) = off_diagonal_pair(&mut r);
        let (gb, gc) = grad(pb, pc);
        let hb = 1e-6 * pb;
        let hc = 1e-6 * pc;
        let fb = (upsilon(pb + hb, pc) - upsilon(pb - hb, pc)) / (2.0 * hb);
        let fc = (upsilon(pb, pc + hc) - upsilon(pb, pc - hc)) / (2.0 * hc);
        let e = ((gb - fb).abs() / fb.abs()).max((gc - fc).abs() / fc.abs());
        if !(e <= worst) {
            worst = e;
            at = (pb, pc);
        }
    }
    Check::new(
        "upsilon_gradient",
        worst,
        1e-6,
        format!("{SAMPLES} points off the diagonal; worst at ({:.4e}, {:.4e})", at.0, at.1),
    )
}

fn random_cvec(r: &mut ChaCha8Rng, m: usize) -> CVec {
    CVec::from_fn(m, |_, _| Complex64::new(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0)))
}

fn random_pos(r: &mut ChaCha8Rng, half: f64) -> Position2D {
    Position2D::new(r.gen_range(-half..half), r.gen_range(-half..half))
}

/// Surrogate suites: violations counted, plus the error at expansion points.
pub fn check_surrogates(seed: u64) -> Vec<Check> {
    let s = default_scenario();
    let mut r = rng(seed, 6);
    let mut out = Vec::new();

    // aligned power over-estimates the beam gain
    let (mut viol, mut tight) = (0usize, 0.0f64);
    for _ in 0..SAMPLES {
        let m = r.gen_range(2..=10);
        let q = random_pos(&mut r, 500.0);
        let u = random_pos(&mut r, 500.0);
        let h = channel_gain(q, u, s.h_uav, m, s.spacing_ratio, s.mu0).expect("positive altitude");
        let w = random_cvec(&mut r, m);
        let d = h.source_distance;
        let exact = gain(&h, &w);
        if aligned_power_bound(&w, d, s.mu0) < exact * (1.0 - 1e-12) {
            viol += 1;
        }
        // a beam matched to the channel phases meets the bound
        let mag: Vec<f64> = (0..m).map(|_| r.gen_range(0.1..1.0)).collect();
        let wa = CVec::from_fn(m, |i, _| h.entries[i] / Complex64::new(h.entries[i].norm(), 0.0) * mag[i]);
        let e = gain(&h, &wa);
        tight = tight.max((aligned_power_bound(&wa, d, s.mu0) - e).abs() / e);
    }
    out.push(Check::new("aligned_power_bound", viol as f64, 0.0, format!("{SAMPLES} random beams; violations")));
    out.push(Check::new("aligned_power_tight", tight, 1e-9, "relative gap for phase-matched beams"));

    // trajectory rate surrogates under-estimate the aligned-power rates
    let (mut viol, mut tight) = (0usize, 0.0f64);
    let eta = s.mu0 / s.sigma2_b;
    for _ in 0..SAMPLES {
        let q = vec![random_pos(&mut r, 500.0)];
        let ub = random_pos(&mut r, 500.0);
        let uc = random_pos(&mut r, 500.0);
        let z = (r.gen_range(0.1..10.0) * s.gamma, r.gen_range(0.1..10.0) * s.gamma, r.gen_range(0.0..1.0) * s.gamma);
        let lin = TrajectoryLinearization::with_gains(&q, ub, uc, &[z], eta, eta, s.h_uav);
        let sl = lin.slots[0];
        let (jb, jc) = (r.gen_range(0.0..1e6), r.gen_range(0.0..1e6));
        let (rb, rc) = traj_rate_surrogates(&lin, 0, jb, jc);
        let (hb, hc) = lin.rate_hat(0, jb, jc);
        if rb > hb + 1e-12 * hb.abs().max(1.0) || rc > hc + 1e-12 * hc.abs().max(1.0) {
            viol += 1;
        }
        let (rb, rc) = traj_rate_surrogates(&lin, 0, sl.j_b0, sl.j_c0);
        let (hb, hc) = lin.rate_hat(0, sl.j_b0, sl.j_c0);
        tight = tight.max((rb - hb).abs()).max((rc - hc).abs());
    }
    out.push(Check::new("trajectory_rate_surrogate", viol as f64, 0.0, format!("{SAMPLES} random points; violations")));
    out.push(Check::new("trajectory_rate_tight", tight, 1e-9, "error at the anchor distances"));

    // first-order distance bound under-estimates ‖q − u‖²
    let (mut viol, mut tight) = (0usize, 0.0f64);
    for _ in 0..SAMPLES {
        let (q, qz, u) = (random_pos(&mut r, 1000.0), random_pos(&mut r, 1000.0), random_pos(&mut r, 1000.0));
        if slack_distance_bound(q, qz, u) > q.dist2(u) * (1.0 + 1e-12) + 1e-9 {
            viol += 1;
        }
        let d = qz.dist2(u);
        tight = tight.max((slack_distance_bound(qz, qz, u) - d).abs() / d.max(1.0));
    }
    out.push(Check::new("slack_distance_bound", viol as f64, 0.0, format!("{SAMPLES} random triples; violations")));
    out.push(Check::new("slack_distance_tight", tight, 1e-9, "relative error at the anchor"));

    // tangent plane of log2(1 + 1/(fg)) under-estimates it
    let (mut viol, mut tight) = (0usize, 0.0f64);
    for _ in 0..SAMPLES {
        let a = RateLinearization {
            f: 10f64.powf(r.gen_range(-3.0..2.0)),
            g: 10f64.powf(r.gen_range(0.0..2.0)),
        };
        let (f, g) = (10f64.powf(r.gen_range(-3.0..2.0)), 10f64.powf(r.gen_range(0.0..2.0)));
        let exact = sinr_rate(f, g);
        if sinr_rate_surrogate(f, g, a) > exact + 1e-12 * exact.max(1.0) {
            viol += 1;
        }
        tight = tight.max((sinr_rate_surrogate(a.f, a.g, a) - sinr_rate(a.f, a.g)).abs());
    }
    out.push(Check::new("sinr_rate_tangent", viol as f64, 0.0, format!("{SAMPLES} random points; violations")));
    out.push(Check::new("sinr_rate_tight", tight, 1e-9, "error at the anchor"));
    out
}

/// Exhaustive grid over the freshness values of one- and two-slot
/// instances. Returns `(LP total, grid total, grid step)`.
pub fn aoi_grid_case(rates: &Rates, s_b: f64, s_c: f64, bandwidth: f64, delta: f64, steps: usize) -> (f64, f64, f64) {
    let mut s = default_scenario().scaled_to(rates.r_b.len());
    s.q_end = s.q_start;
    s.bandwidth = bandwidth;
    s.slot_len = delta;
    s.s_b = s_b;
    s.s_c = vec![s_c; s.n];
    let n = s.n;
    let serving = ServingSchedule { serving: vec![true; n] };
    let lp = solve_aoi_lp(rates, &s, &serving, None, false).map(|a| a.total()).unwrap_or(f64::INFINITY);

    let h = delta / steps as f64;
    let grid = |k: usize| k as f64 * h;
    // Carol's rows are per slot: the smallest grid value that delivers
    let mut carol = 0.0;
    for i in 0..n {
        match (0..=steps).map(grid).find(|&d| d * rates.r_c[i] >= s_c / bandwidth) {
            Some(d) => carol += d,
            None => return (lp, f64::INFINITY, h),
        }
    }
    let need = s_b / bandwidth;
    let mut best = f64::INFINITY;
    if n == 1 {
        for k in 0..=steps {
            let d = grid(k);
            if d * rates.r_b[0] >= need {
                best = best.min(d);
            }
        }
    } else {
        for k0 in 0..=steps {
            for k1 in 0..=steps {
                let (d0, d1) = (grid(k0), grid(k1));
                if d0 * rates.r_b[0] + d1 * rates.r_b[1] >= need {
                    best = best.min(d0 + d1);
                }
            }
        }
    }
    (lp, carol + best, h)
}

pub fn check_aoi_lp(seed: u64) -> Check {
    let mut r = rng(seed, 7);
    let steps = 1000;
    let mut worst = 0.0f64;
    let mut cases = 0;
    // the worked single-slot instance first
    let mut inst = vec![(Rates { r_b: vec![5.0], r_c: vec![10.0] }, 2.5e6, 5e6)];
    for _ in 0..20 {
        let n = r.gen_range(1..=2);
        let rb: Vec<f64> = (0..n).map(|_| r.gen_range(1.0..12.0)).collect();
        let rc: Vec<f64> = (0..n).map(|_| r.gen_range(6.0..12.0)).collect();
        let cap: f64 = rb.iter().sum::<f64>() * 1e6;
        inst.push((Rates { r_b: rb, r_c: rc }, r.gen_range(0.05..0.95) * cap, 5e6));
    }
    for (rates, sb, sc) in &inst {
        let n = rates.r_b.len();
        let (lp, grid, h) = aoi_grid_case(rates, *sb, *sc, 1e6, 1.0, steps);
        // every grid coordinate rounds up by less than one step
        let allow = (2 * n) as f64 * h + 1e-9;
        worst = worst.max((grid - lp).abs() - allow);
        cases += 1;
    }
    Check::new(
        "aoi_lp_brute_force",
        worst.max(0.0),
        0.0,
        format!("{cases} instances with N ≤ 2, grid step {}; excess over 2N steps", 1.0 / steps as f64),
    )
}

/// Minimum of `cᵀx` over `{A x ≤ b}` by enumerating vertices.
fn enumerate_lp(c: &[f64], a: &[Vec<f64>], b: &[f64]) -> Option<f64> {
    let n = c.len();
    let m = a.len();
    let mut best: Option<f64> = None;
    let mut idx: Vec<usize> = (0..n).collect();
    loop {
        let am = DMatrix::from_fn(n, n, |i, j| a[idx[i]][j]);
        let bm = DVector::from_fn(n, |i, _| b[idx[i]]);
        if let Some(x) = am.lu().solve(&bm) {
            let ok = (0..m).all(|k| (0..n).map(|j| a[k][j] * x[j]).sum::<f64>() <= b[k] + 1e-9);
            if ok {
                let v: f64 = (0..n).map(|j| c[j] * x[j]).sum();
                best = Some(best.map_or(v, |b: f64| b.min(v)));
            }
        }
        // next combination
        let mut i = n;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            if idx[i] < m - n + i {
                break;
            }
        }
        idx[i] += 1;
        for j in i + 1..n {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// The default gap target is relative; the checks compare absolute values.
fn tight() -> SolverSettings {
    SolverSettings {
        tol_obj: 1e-9,
        ..SolverSettings::default()
    }
}

/// Random bounded LPs through the conic solver against vertex enumeration.
pub fn check_conic_lp(seed: u64) -> Check {
    let mut r = rng(seed, 8);
    let mut worst = 0.0f64;
    let cases = 100;
    let mut solved = 0;
    for _ in 0..cases {
        let n = r.gen_range(2..=4);
        let extra = r.gen_range(2..=6);
        let c: Vec<f64> = (0..n).map(|_| r.gen_range(-1.0..1.0)).collect();
        let mut a = Vec::new();
        let mut b = Vec::new();
        for j in 0..n {
            let mut lo = vec![0.0; n];
            lo[j] = -1.0;
            a.push(lo);
            b.push(1.0);
            let mut hi = vec![0.0; n];
            hi[j] = 1.0;
            a.push(hi);
            b.push(1.0);
        }
        // rows through a point strictly inside the box keep it feasible
        let x0: Vec<f64> = (0..n).map(|_| r.gen_range(-0.5..0.5)).collect();
        for _ in 0..extra {
            let row: Vec<f64> = (0..n).map(|_| r.gen_range(-1.0..1.0)).collect();
            let v: f64 = row.iter().zip(&x0).map(|(p, q)| p * q).sum();
            b.push(v + r.gen_range(0.05..0.5));
            a.push(row);
        }
        let Some(reference) = enumerate_lp(&c, &a, &b) else { continue };
        let mut p = ConicProblem::new();
        let xs: Vec<_> = (0..n).map(|j| p.add_var(format!("x{j}"), None, None)).collect();
        for (k, (row, &rhs)) in a.iter().zip(&b).enumerate() {
            let mut e = AffExpr::zero();
            for (j, &v) in row.iter().enumerate() {
                e.add_term(xs[j], v);
            }
            p.add_le(format!("r{k}"), e, AffExpr::constant(rhs));
        }
        let mut obj = AffExpr::zero();
        for (j, &v) in c.iter().enumerate() {
            obj.add_term(xs[j], v);
        }
        p.minimize(obj);
        let sol = conic::solve(&p, &tight());
        let err = if sol.status == SolveStatus::Optimal {
            (sol.objective - reference).abs()
        } else {
            f64::INFINITY
        };
        worst = worst.max(err);
        solved += 1;
    }
    Check::new("conic_lp_enumeration", worst, 1e-6, format!("{solved} random LPs, up to 4 variables"))
}

/// `min Tr W` s.t. `Tr(h hᴴ W) ≥ 1`, `W ⪰ 0` has value `1/‖h‖²`.
pub fn check_single_constraint_sdp(seed: u64) -> Check {
    let mut r = rng(seed, 9);
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let m = r.gen_range(2..=6);
        let h = random_cvec(&mut r, m);
        let mut p = ConicProblem::new();
        let w = p.add_hermitian_psd("W", m);
        let hh = &h * h.adjoint();
        let g = p.trace_with(w, &hh);
        let tr = p.trace(w);
        p.add_ge("gain", g, AffExpr::constant(1.0));
        p.minimize(tr);
        let sol = conic::solve(&p, &tight());
        let exact = 1.0 / h.norm_squared();
        let err = if sol.status == SolveStatus::Optimal {
            (sol.objective - exact).abs()
        } else {
            f64::INFINITY
        };
        worst = worst.max(err);
    }
    Check::new("single_constraint_sdp", worst, 1e-6, "10 random channels, M ≤ 6")
}

/// The full battery at one seed.
pub fn run_checks(seed: u64) -> Vec<Check> {
    let mut out = vec![check_mc_agreement(seed, MC_TUPLES, MC_TRIALS, MC_G)];
    out.extend(check_threshold(seed));
    out.push(check_distance_independence(seed));
    out.push(check_upsilon_identity(seed));
    out.push(check_gradient_with(seed, upsilon_grad));
    out.extend(check_surrogates(seed));
    out.push(check_aoi_lp(seed));
    out.push(check_conic_lp(seed));
    out.push(check_single_constraint_sdp(seed));
    out
}

pub const VERIFY_COLUMNS: [&str; 5] = ["check", "passed", "value", "tolerance", "detail"];

/// Writes `verify.csv`; `Ok(true)` when every check passed.
pub fn cmd_verify(out: &Path, seed: u64) -> Result<(bool, Vec<Check>)> {
    std::fs::create_dir_all(out)?;
    let checks = run_checks(seed);
    let mut w = open_csv(&out.join("verify.csv"), "verify", &VERIFY_COLUMNS)?;
    for c in &checks {
        w.write_record([c.name.clone(), u8::from(c.passed).to_string(), num(c.value), num(c.tolerance), c.detail.clone()])
            .map_err(csv_err)?;
    }
    w.flush()?;
    Ok((checks.iter().all(|c| c.passed), checks))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sign_flip_is_caught() {
        let good = check_gradient_with(0, upsilon_grad);
        assert!(good.passed, "{good:?}");
        let bad = check_gradient_with(0, |b, c| {
            let (gb, gc) = upsilon_grad(b, c);
            (-gb, gc)
        });
        assert!(!bad.passed);
    }

    #[test]
    fn enumeration_matches_known_vertex() {
        // min −x − y on the unit box with x + y ≤ 1.5
        let a = vec![vec![-1.0, 0.0], vec![1.0, 0.0], vec![0.0, -1.0], vec![0.0, 1.0], vec![1.0, 1.0]];
        let b = vec![0.0, 1.0, 0.0, 1.0, 1.5];
        assert!((enumerate_lp(&[-1.0, -1.0], &a, &b).unwrap() + 1.5).abs() < 1e-12);
    }

    #[test]
    fn aoi_grid_reproduces_worked_case() {
        let (lp, grid, _) = aoi_grid_case(&Rates { r_b: vec![5.0], r_c: vec![10.0] }, 2.5e6, 5e6, 1e6, 1.0, 1000);
        assert!((lp - 1.0).abs() < 1e-12 && (grid - 1.0).abs() < 1e-9);
    }
}
