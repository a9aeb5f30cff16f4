//! Fixtures shared by the benchmarks.

use covaoi::conic::{AffExpr, ConicProblem};
use covaoi::orchestrator::{init_point, BaselineKind, Iterate};
use covaoi::subproblems::{all_channels, aoi_lp_problem, SlotChannels};
use covaoi::{default_scenario, Scenario};
use nalgebra::DVector;
use num_complex::Complex64;

/// Default scenario cut to `n` slots with `m` antennas.
pub fn scenario(n: usize, m: usize) -> Scenario {
    let mut s = default_scenario().scaled_to(n);
    s.m = m;
    s
}

/// Feasible starting point of the proposed scheme and its channels.
pub fn start(s: &Scenario) -> (Iterate, Vec<SlotChannels>) {
    let it = init_point(s, BaselineKind::NomaFull).expect("feasible start");
    let ch = all_channels(s, &it.q).expect("valid geometry");
    (it, ch)
}

/// `min Tr W` s.t. `Tr(h hᴴ W) ≥ 1` for a fixed `m`-antenna channel.
pub fn single_constraint_sdp(m: usize) -> ConicProblem {
    let h = DVector::from_fn(m, |i, _| Complex64::from_polar(1.0 + 0.1 * i as f64, 0.7 * i as f64));
    let mut p = ConicProblem::new();
    let w = p.add_hermitian_psd("W", m);
    let g = p.trace_with(w, &(&h * h.adjoint()));
    let tr = p.trace(w);
    p.add_ge("gain", g, AffExpr::constant(1.0));
    p.minimize(tr);
    p
}

/// The freshness program at the start point, in conic form.
pub fn aoi_problem(s: &Scenario) -> ConicProblem {
    let (it, _) = start(s);
    aoi_lp_problem(&it.rates, s, &it.serving, &it.q, false).0
}
