//! Beamforming block: semidefinite relaxation of the per-slot beams with the
//! trajectory and freshness fixed.

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{QOS_RELAX, AoiSchedule, BeamformerPlan, ServingSchedule, SlotChannels, StepOptions};
use crate::channel::{gain, CVec};
use crate::conic::{self, AffExpr, ConicProblem, PsdVar, SolverSettings, SolveStatus, Var};
use crate::covertness::max_covert_ratio;
use crate::error::{Error, Result};
use crate::scenario::Scenario;
use crate::surrogate::{covertness_halfspace, RateLinearization};

pub type CMat = DMatrix<Complex64>;

/// Anchor values of one slot, in watts and noise-normalized gains.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SlotAnchor {
    pub p_b: f64,
    pub p_c: f64,
    /// `|h_bᴴw_b|²/σ_b²`
    pub s_b: f64,
    /// `|h_cᴴw_c|²/σ_c²`
    pub s_c: f64,
    /// `|h_cᴴw_b|²/σ_c² + 1`
    pub g_c: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BeamAnchors {
    pub slots: Vec<SlotAnchor>,
}

impl BeamAnchors {
    pub fn from_plan(s: &Scenario, ch: &[SlotChannels], plan: &BeamformerPlan) -> Self {
        let slots = ch
            .iter()
            .enumerate()
            .map(|(n, c)| SlotAnchor {
                p_b: plan.p_b(n),
                p_c: plan.p_c(n),
                s_b: gain(&c.h_b, &plan.w_b[n]) / s.sigma2_b,
                s_c: gain(&c.h_c, &plan.w_c[n]) / s.sigma2_c,
                g_c: gain(&c.h_c, &plan.w_b[n]) / s.sigma2_c + 1.0,
            })
            .collect();
        Self { slots }
    }
}

/// Relaxed beams of one slot (watts).
#[derive(Clone, Debug)]
pub struct SlotLift {
    pub w_c: CMat,
    /// `None` when Bob has no beam in this slot.
    pub w_b: Option<CMat>,
}

#[derive(Clone, Debug)]
pub struct LiftedPlan {
    pub slots: Vec<SlotLift>,
    /// Aggregate surrogate QoS slack (b/Hz) of the relaxed solution.
    pub slack: f64,
    /// Same quantity at the anchor.
    pub anchor_slack: f64,
    pub solver_iterations: usize,
    /// False when the anchor was returned because the solve did not improve.
    pub improved: bool,
}

/// Bob gets a beam in serving slots that carry part of his packet.
pub(crate) fn bob_active(s: &Scenario, aoi: &AoiSchedule, serving: &ServingSchedule, n: usize) -> bool {
    s.s_b > 0.0 && serving.contains(n) && aoi.delta_b[n] > 0.0
}

fn outer(w: &CVec) -> CMat {
    w * w.adjoint()
}

fn start_matrix(w: &CVec, scale: f64) -> CMat {
    let m = w.len();
    let p = w.norm_squared() * scale;
    let kappa = 1e-3;
    let floor = if p > 0.0 { p } else { 1e-3 };
    outer(w) * Complex64::new((1.0 - kappa) * scale, 0.0) + CMat::identity(m, m) * Complex64::new(kappa * floor / m as f64, 0.0)
}

struct SlotVars {
    w_c: PsdVar,
    w_b: Option<PsdVar>,
}

/// `R̃ = R0 − c(F + G − 2)` with `F = f/f^ι` tied to the normalized signal by
/// `F·Y ≥ 1`, and `G = g/g^ι` either a variable or the constant `g_fixed`.
fn rate_expr(p: &mut ConicProblem, tag: &str, lin: RateLinearization, signal: AffExpr, g: Option<Var>, g_fixed: f64) -> AffExpr {
    let (r0, c) = lin.coefficients();
    let f = p.add_var(format!("f{tag}"), None, None);
    p.set_start(f, 1.0 + 1e-6);
    p.add_hyperbolic(format!("sinr{tag}"), f.expr(), signal);
    let mut e = AffExpr::constant(r0 + 2.0 * c).plus(&AffExpr::term(f, -c));
    match g {
        Some(gv) => {
            e.add_term(gv, -c);
        }
        None => e.constant -= c * g_fixed,
    }
    e
}

/// Maximizes the aggregate QoS slack of the rate tangents over the relaxed
/// beams. Returns the anchor itself if the solve cannot improve on it.
pub fn beamforming_sdr_step(
    s: &Scenario,
    aoi: &AoiSchedule,
    ch: &[SlotChannels],
    anchor: &BeamformerPlan,
    serving: &ServingSchedule,
    opts: &StepOptions,
) -> Result<LiftedPlan> {
    let n = s.n;
    let m = s.m;
    let gamma = s.gamma;
    let mut masked = anchor.clone();
    for i in 0..n {
        if !bob_active(s, aoi, serving, i) {
            masked.w_b[i] = CVec::zeros(m);
        }
    }
    let anc = BeamAnchors::from_plan(s, ch, &masked);
    let covert = !opts.no_covertness && s.epsilon < 1.0;
    let ratio = max_covert_ratio(s.epsilon);

    let mut p = ConicProblem::new();
    let mut vars = Vec::with_capacity(n);
    let mut obj = AffExpr::zero();
    let mut bob_sum = AffExpr::zero();
    let mut anchor_slack = 0.0;
    let mut demand_total = 0.0;
    for i in 0..n {
        let a = anc.slots[i];
        let bob = bob_active(s, aoi, serving, i);
        let carol = opts.carol_active(serving, i) && aoi.delta_c[i] > 0.0;
        let hb = &ch[i].h_b.entries;
        let hc = &ch[i].h_c.entries;
        // beams in units of Γ
        let w_c = p.add_hermitian_psd(format!("Wc{i}"), m);
        p.set_psd_start(w_c, &start_matrix(&masked.w_c[i], 1.0 / gamma));
        let w_b = if bob {
            let v = p.add_hermitian_psd(format!("Wb{i}"), m);
            p.set_psd_start(v, &start_matrix(&masked.w_b[i], 1.0 / gamma));
            Some(v)
        } else {
            None
        };
        let tr_c = p.trace(w_c);
        let tr_b = w_b.map(|v| p.trace(v)).unwrap_or_default();
        p.add_le(format!("power{i}"), tr_c.clone().plus(&tr_b), AffExpr::constant(1.0));

        if let Some(wb) = w_b {
            if a.s_b <= 0.0 {
                return Err(Error::Anchor(format!("Bob's anchor beam in slot {} has no gain", i + 1)));
            }
            if !opts.oma {
                // decoding order at both users
                for (k, h) in [("b", hb), ("c", hc)] {
                    let u = h / Complex64::new(h.norm(), 0.0);
                    let hh = outer(&u);
                    let e = p.trace_with(w_c, &hh).minus(&p.trace_with(wb, &hh));
                    p.add_ge(format!("fair_{k}{i}"), e, AffExpr::constant(1e-9));
                }
            }
            if covert {
                if a.p_c <= 0.0 {
                    return Err(Error::Anchor(format!("no public power to cover Bob in slot {}", i + 1)));
                }
                let hs = covertness_halfspace(a.p_b, a.p_c, s.epsilon);
                let (ab, ac, rhs) = hs.affine();
                let k = 1.0 / (ab.abs().max(ac.abs()) * gamma);
                let lhs = tr_b.scaled(ab * gamma * k).plus(&tr_c.scaled(ac * gamma * k));
                p.add_le(format!("covert{i}"), lhs, AffExpr::constant(rhs * k));
                p.add_le(format!("ratio{i}"), tr_b.clone(), tr_c.scaled(ratio));
            }
            // Bob decodes his stream after removing the public one: g_b = 1
            let lin = RateLinearization { f: 1.0 / a.s_b, g: 1.0 };
            let hh = outer(hb) * Complex64::new(gamma / (s.sigma2_b * a.s_b), 0.0);
            let signal = p.trace_with(wb, &hh);
            let e = rate_expr(&mut p, &format!("b{i}"), lin, signal, None, 1.0);
            anchor_slack += aoi.delta_b[i] * lin.coefficients().0;
            bob_sum = bob_sum.plus(&e.scaled(aoi.delta_b[i] / s.demand_b()));
            obj = obj.plus(&e.scaled(aoi.delta_b[i]));
        }
        if carol {
            if a.s_c <= 0.0 {
                return Err(Error::Anchor(format!("Carol's anchor beam in slot {} has no gain", i + 1)));
            }
            let lin = RateLinearization { f: 1.0 / a.s_c, g: a.g_c };
            let hh = outer(hc) * Complex64::new(gamma / (s.sigma2_c * a.s_c), 0.0);
            let signal = p.trace_with(w_c, &hh);
            let g = match w_b {
                Some(wb) => {
                    let gv = p.add_var(format!("gc{i}"), None, None);
                    let hi = outer(hc) * Complex64::new(gamma / (s.sigma2_c * a.g_c), 0.0);
                    let rhs = p.trace_with(wb, &hi).plus_const(1.0 / a.g_c);
                    p.add_ge(format!("intf_c{i}"), gv.expr(), rhs);
                    p.set_start(gv, 1.0 + 1e-6);
                    Some(gv)
                }
                None => None,
            };
            // without Bob's beam the interference term is just the noise
            let e = rate_expr(&mut p, &format!("c{i}"), lin, signal, g, 1.0 / a.g_c);
            let need = s.demand_c(i);
            demand_total += need;
            anchor_slack += aoi.delta_c[i] * lin.coefficients().0;
            p.add_ge(format!("qos_c{i}"), e.scaled(aoi.delta_c[i] / need), AffExpr::constant(1.0 - QOS_RELAX));
            obj = obj.plus(&e.scaled(aoi.delta_c[i]));
        }
        vars.push(SlotVars { w_c, w_b });
    }
    if !bob_sum.terms.is_empty() {
        p.add_ge("qos_b", bob_sum, AffExpr::constant(1.0 - QOS_RELAX));
        demand_total += s.demand_b();
    }
    anchor_slack -= demand_total;
    p.maximize(obj.clone());
    opts.dump("beamforming", &p)?;

    let set = SolverSettings {
        tol_feas: s.tol_feas,
        tol_obj: 1e-9,
        ..SolverSettings::default()
    };
    let sol = conic::solve(&p, &set);
    match sol.status {
        SolveStatus::Optimal => {}
        SolveStatus::Infeasible => return Err(Error::Infeasible(format!("beamforming relaxation: {}", sol.witness.unwrap_or_default()))),
        SolveStatus::MaxIters => return Err(Error::Solver(format!("beamforming relaxation: {}", sol.witness.unwrap_or_default()))),
    }
    let slack = sol.eval(&obj) - demand_total;
    let scale = Complex64::new(gamma, 0.0);
    if !(slack >= anchor_slack) {
        return Ok(LiftedPlan {
            slots: (0..n)
                .map(|i| SlotLift {
                    w_c: outer(&masked.w_c[i]),
                    w_b: vars[i].w_b.map(|_| outer(&masked.w_b[i])),
                })
                .collect(),
            slack: anchor_slack,
            anchor_slack,
            solver_iterations: sol.iterations,
            improved: false,
        });
    }
    let slots = vars
        .iter()
        .map(|v| SlotLift {
            w_c: sol.matrix(&p, v.w_c) * scale,
            w_b: v.w_b.map(|b| sol.matrix(&p, b) * scale),
        })
        .collect();
    Ok(LiftedPlan {
        slots,
        slack,
        anchor_slack,
        solver_iterations: sol.iterations,
        improved: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{mrt, Position2D};
    use crate::covertness::upsilon;
    use crate::scenario::default_scenario;
    use crate::subproblems::{all_channels, exact_rates, solve_aoi_lp};

    fn setup(n: usize, eps: f64) -> (Scenario, Vec<SlotChannels>, BeamformerPlan, ServingSchedule, AoiSchedule) {
        let mut s = default_scenario().scaled_to(n);
        s.m = 4;
        s.s_b = 2e6;
        s.epsilon = eps;
        let q: Vec<Position2D> = (0..n).map(|i| s.q_start.lerp(s.q_end, i as f64 / (n.max(2) - 1) as f64)).collect();
        let ch = all_channels(&s, &q).unwrap();
        let pb = 0.02 * s.gamma;
        let w_b = ch.iter().map(|c| mrt(&c.h_b, pb)).collect();
        let w_c = ch.iter().map(|c| mrt(&c.h_c, s.gamma - pb)).collect();
        let plan = BeamformerPlan { w_b, w_c };
        let serving = ServingSchedule { serving: vec![true; n] };
        let rates = exact_rates(&s, &ch, &plan, &serving, false);
        let aoi = solve_aoi_lp(&rates, &s, &serving, None, false).unwrap();
        (s, ch, plan, serving, aoi)
    }

    #[test]
    fn improves_and_keeps_constraints() {
        let (s, ch, plan, serving, aoi) = setup(3, 0.1);
        let lp = beamforming_sdr_step(&s, &aoi, &ch, &plan, &serving, &StepOptions::default()).unwrap();
        assert!(lp.slack >= lp.anchor_slack - 1e-9);
        for (i, sl) in lp.slots.iter().enumerate() {
            let pc = sl.w_c.trace().re;
            let pb = sl.w_b.as_ref().map(|w| w.trace().re).unwrap_or(0.0);
            assert!(pc + pb <= s.gamma * (1.0 + 1e-6));
            if sl.w_b.is_some() {
                assert!(upsilon(pb, pc) <= s.epsilon + 1e-6, "slot {i}: {}", upsilon(pb, pc));
            }
        }
    }

    #[test]
    fn loose_covertness_matches_dropped() {
        let (s, ch, plan, serving, aoi) = setup(2, 1.0 - 1e-12);
        let with = beamforming_sdr_step(&s, &aoi, &ch, &plan, &serving, &StepOptions::default()).unwrap();
        let opts = StepOptions {
            no_covertness: true,
            ..StepOptions::default()
        };
        let without = beamforming_sdr_step(&s, &aoi, &ch, &plan, &serving, &opts).unwrap();
        assert!((with.slack - without.slack).abs() <= 1e-4 * without.slack.abs().max(1.0), "{} {}", with.slack, without.slack);
    }

    #[test]
    fn idle_bob_has_no_beam() {
        let (s, ch, plan, _, aoi) = setup(2, 0.1);
        let none = ServingSchedule::none(2);
        let aoi = AoiSchedule {
            delta_b: vec![0.0; 2],
            ..aoi
        };
        let lp = beamforming_sdr_step(&s, &aoi, &ch, &plan, &none, &StepOptions::default()).unwrap();
        assert!(lp.slots.iter().all(|sl| sl.w_b.is_none()));
    }
}
