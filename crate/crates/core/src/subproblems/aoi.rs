//! Freshness block: minimize Σ Δ subject to per-slot and total packet
//! delivery at fixed rates.

use super::{AoiSchedule, Rates, ServingSchedule};
use crate::channel::Position2D;
use crate::conic::{self, AffExpr, ConicProblem, SolveStatus, SolverSettings, Var};
use crate::error::{Error, Result};
use crate::scenario::Scenario;

// accepts the give left by the other blocks
const REL: f64 = 1e-7;

/// Carol is served in every slot except Bob's slots under orthogonal access.
fn carol_active(serving: &ServingSchedule, oma: bool, n: usize) -> bool {
    !(oma && serving.contains(n))
}

fn check_speed(s: &Scenario, q: &[Position2D]) -> Result<()> {
    let lim = s.v_max * s.slot_len;
    for n in 0..q.len().saturating_sub(1) {
        let step = q[n].dist(q[n + 1]);
        if step > lim * (1.0 + REL) + 1e-9 {
            return Err(Error::Infeasible(format!(
                "speed limit between slots {} and {}: {step:.6} m > {lim:.6} m",
                n + 1,
                n + 2
            )));
        }
    }
    Ok(())
}

/// Optimal schedule. The program separates by user: Carol's slots are
/// independent and Bob's part is a fractional knapsack filled in order of
/// decreasing rate (lower slot first on ties). The speed rows only require
/// each hop to fit in one slot at `V_max`.
pub fn solve_aoi_lp(rates: &Rates, s: &Scenario, serving: &ServingSchedule, q: Option<&[Position2D]>, oma: bool) -> Result<AoiSchedule> {
    let n = s.n;
    let delta = s.slot_len;
    if let Some(q) = q {
        check_speed(s, q)?;
    }
    let mut delta_c = vec![0.0; n];
    for i in 0..n {
        if !carol_active(serving, oma, i) {
            continue;
        }
        let need = s.demand_c(i);
        let cap = rates.r_c[i] * delta;
        if cap < need * (1.0 - REL) {
            return Err(Error::Infeasible(format!(
                "Carol's packet in slot {} needs {need:.6} b/Hz, the slot carries {cap:.6}",
                i + 1
            )));
        }
        delta_c[i] = (need / rates.r_c[i]).min(delta);
    }

    let mut delta_b = vec![0.0; n];
    let mut left = s.demand_b();
    if left > 0.0 {
        let mut order: Vec<usize> = serving.slots().filter(|&i| rates.r_b[i] > 0.0).collect();
        order.sort_by(|&a, &b| rates.r_b[b].partial_cmp(&rates.r_b[a]).unwrap().then(a.cmp(&b)));
        let cap: f64 = order.iter().map(|&i| rates.r_b[i] * delta).sum();
        if cap < left * (1.0 - REL) {
            return Err(Error::Infeasible(format!(
                "Bob's total packet needs {left:.6} b/Hz, serving slots carry {cap:.6}"
            )));
        }
        for i in order {
            if left <= 0.0 {
                break;
            }
            let full = rates.r_b[i] * delta;
            if full >= left {
                delta_b[i] = (left / rates.r_b[i]).min(delta);
                left = 0.0;
            } else {
                delta_b[i] = delta;
                left -= full;
            }
        }
    }
    Ok(AoiSchedule { delta_b, delta_c })
}

/// Handles for mapping a conic solution back to a schedule.
pub struct AoiVars {
    pub delta_b: Vec<Option<Var>>,
    pub delta_c: Vec<Option<Var>>,
    pub delta_max: Vec<Var>,
}

/// The program as a conic problem, with the per-hop maximum linearized by an
/// auxiliary `Δ̄[n] ≥ Δ_k[n]`, `Δ̄[n] ≤ δ`, `‖q[n+1] − q[n]‖ ≤ Δ̄[n]·V_max`.
pub fn aoi_lp_problem(rates: &Rates, s: &Scenario, serving: &ServingSchedule, q: &[Position2D], oma: bool) -> (ConicProblem, AoiVars) {
    let n = s.n;
    let delta = s.slot_len;
    let mut p = ConicProblem::new();
    let mut obj = AffExpr::zero();
    let mut vb = vec![None; n];
    let mut vc = vec![None; n];
    for i in 0..n {
        if carol_active(serving, oma, i) {
            let v = p.add_var(format!("dc{i}"), Some(0.0), Some(delta));
            obj.add_term(v, 1.0);
            let need = s.demand_c(i);
            p.add_ge(format!("qos_c{i}"), AffExpr::term(v, rates.r_c[i] / need), AffExpr::constant(1.0));
            vc[i] = Some(v);
        }
        if serving.contains(i) && s.s_b > 0.0 {
            let v = p.add_var(format!("db{i}"), Some(0.0), Some(delta));
            obj.add_term(v, 1.0);
            vb[i] = Some(v);
        }
    }
    if s.s_b > 0.0 {
        let d = s.demand_b();
        let mut sum = AffExpr::zero();
        for i in 0..n {
            if let Some(v) = vb[i] {
                sum.add_term(v, rates.r_b[i] / d);
            }
        }
        p.add_ge("qos_b", sum, AffExpr::constant(1.0));
    }
    let mut dmax = Vec::new();
    for i in 0..n.saturating_sub(1) {
        let m = p.add_var(format!("dmax{i}"), Some(0.0), Some(delta));
        for v in [vb[i], vc[i]].into_iter().flatten() {
            p.add_ge(format!("dmax_ge{i}"), m.expr(), v.expr());
        }
        let lim = s.v_max * delta;
        if lim > 0.0 {
            // tolerance so a hop at exactly V_max·δ keeps an interior
            let step = q[i].dist(q[i + 1]) / lim;
            p.add_ge(format!("speed{i}"), AffExpr::term(m, 1.0 / delta), AffExpr::constant(step - 1e-7));
        }
        dmax.push(m);
    }
    p.minimize(obj);
    (
        p,
        AoiVars {
            delta_b: vb,
            delta_c: vc,
            delta_max: dmax,
        },
    )
}

/// Same program solved numerically by the conic solver.
pub fn solve_aoi_lp_conic(rates: &Rates, s: &Scenario, serving: &ServingSchedule, q: &[Position2D], oma: bool) -> Result<AoiSchedule> {
    let (p, vars) = aoi_lp_problem(rates, s, serving, q, oma);
    let set = SolverSettings {
        tol_feas: s.tol_feas,
        tol_obj: 1e-9,
        ..SolverSettings::default()
    };
    let sol = conic::solve(&p, &set);
    match sol.status {
        SolveStatus::Optimal => {}
        SolveStatus::Infeasible => {
            return Err(Error::Infeasible(sol.witness.unwrap_or_default()));
        }
        SolveStatus::MaxIters => return Err(Error::Solver(sol.witness.unwrap_or_default())),
    }
    let get = |v: &Option<Var>| v.map(|v| sol.value(v).max(0.0)).unwrap_or(0.0);
    Ok(AoiSchedule {
        delta_b: vars.delta_b.iter().map(get).collect(),
        delta_c: vars.delta_c.iter().map(get).collect(),
    })
}
