//! Trajectory block: SCA restriction in the UAV positions with beams and
//! freshness fixed.

use std::f64::consts::{LN_2, LOG2_E};

use super::{slot_channels, QOS_RELAX, AoiSchedule, BeamformerPlan, ServingSchedule, StepOptions, Trajectory};
use crate::channel::{gain, Position2D};
use crate::conic::{self, AffExpr, ConicProblem, SolverSettings, SolveStatus};
use crate::error::{Error, Result};
use crate::scenario::Scenario;
use crate::surrogate::TrajectoryLinearization;

/// Length unit of the conic program (m).
const L: f64 = 100.0;

#[derive(Clone, Debug)]
pub struct TrajectoryStep {
    pub q: Trajectory,
    /// Aggregate surrogate QoS slack (b/Hz) at `q`.
    pub slack: f64,
    /// Same quantity at the anchor.
    pub anchor_slack: f64,
    pub linearization: TrajectoryLinearization,
    pub solver_iterations: usize,
}

/// One concave term `log₂(a + j) − log₂ d − log₂e (j − j0)/d`.
#[derive(Clone, Copy, Debug)]
struct Term {
    a: f64,
    d: f64,
    j0: f64,
}

impl Term {
    fn value(&self, j: f64) -> f64 {
        (self.a + j).log2() - self.d.log2() - LOG2_E * (j - self.j0) / self.d
    }

    /// Best value over `j ≥ jmin` (the maximizer is `d − a`).
    fn best(&self, jmin: f64) -> f64 {
        self.value(jmin.max(self.d - self.a))
    }
}

struct Slot {
    carol: bool,
    weight: f64,
    u: Position2D,
    term: Term,
}

/// Exact gains at the anchor, expressed as aligned-power scalars so the
/// surrogate rates equal the exact rates there.
fn calibrate(s: &Scenario, plan: &BeamformerPlan, q: &[Position2D]) -> Result<TrajectoryLinearization> {
    let mut z = Vec::with_capacity(q.len());
    for (n, &p) in q.iter().enumerate() {
        let ch = slot_channels(s, p)?;
        let db2 = ch.h_b.source_distance.powi(2) / s.mu0;
        let dc2 = ch.h_c.source_distance.powi(2) / s.mu0;
        z.push((
            gain(&ch.h_b, &plan.w_b[n]) * db2,
            gain(&ch.h_c, &plan.w_c[n]) * dc2,
            gain(&ch.h_c, &plan.w_b[n]) * dc2,
        ));
    }
    Ok(TrajectoryLinearization::with_gains(
        q,
        s.u_b,
        s.u_c,
        &z,
        s.mu0 / s.sigma2_b,
        s.mu0 / s.sigma2_c,
        s.h_uav,
    ))
}

fn terms(s: &Scenario, aoi: &AoiSchedule, serving: &ServingSchedule, opts: &StepOptions, lin: &TrajectoryLinearization) -> Vec<Vec<Slot>> {
    let h2 = lin.h2;
    (0..s.n)
        .map(|n| {
            let z = lin.slots[n];
            let mut v = Vec::new();
            if opts.carol_active(serving, n) && aoi.delta_c[n] > 0.0 && z.z_c > 0.0 {
                v.push(Slot {
                    carol: true,
                    weight: aoi.delta_c[n],
                    u: s.u_c,
                    term: Term {
                        a: lin.eta_c * (z.z_i + z.z_c) + h2,
                        d: lin.eta_c * z.z_i + z.j_c0 + h2,
                        j0: z.j_c0,
                    },
                });
            }
            if serving.contains(n) && aoi.delta_b[n] > 0.0 && z.z_b > 0.0 {
                v.push(Slot {
                    carol: false,
                    weight: aoi.delta_b[n],
                    u: s.u_b,
                    term: Term {
                        a: lin.eta_b * z.z_b + h2,
                        d: z.j_b0 + h2,
                        j0: z.j_b0,
                    },
                });
            }
            v
        })
        .collect()
}

/// Restriction value of `q`: `Σ Δ·Ř − demands`, each `Ř` maximized over
/// its slack `j ≥ ‖q − u‖²`.
fn slack_of(s: &Scenario, slots: &[Vec<Slot>], q: &[Position2D]) -> f64 {
    let mut total = -s.demand_b() - (0..s.n).filter(|&n| slots[n].iter().any(|t| t.carol)).map(|n| s.demand_c(n)).sum::<f64>();
    for (n, list) in slots.iter().enumerate() {
        for t in list {
            total += t.weight * t.term.best(q[n].dist2(t.u));
        }
    }
    total
}

/// Maximizes the aggregate surrogate QoS slack over the interior waypoints.
/// Endpoints are those of the anchor. Falls back to the anchor whenever the
/// solver's point would lower the slack.
pub fn trajectory_sca_step(
    s: &Scenario,
    aoi: &AoiSchedule,
    plan: &BeamformerPlan,
    q_anchor: &[Position2D],
    serving: &ServingSchedule,
    opts: &StepOptions,
) -> Result<TrajectoryStep> {
    let n = s.n;
    let lin = calibrate(s, plan, q_anchor)?;
    let slots = terms(s, aoi, serving, opts, &lin);
    let anchor_slack = slack_of(s, &slots, q_anchor);
    let hop = s.v_max * s.slot_len;
    let unchanged = |lin: TrajectoryLinearization| TrajectoryStep {
        q: q_anchor.to_vec(),
        slack: anchor_slack,
        anchor_slack,
        linearization: lin,
        solver_iterations: 0,
    };
    if n <= 2 || hop <= 0.0 {
        return Ok(unchanged(lin));
    }

    let mut p = ConicProblem::new();
    let mut pos: Vec<(AffExpr, AffExpr)> = Vec::with_capacity(n);
    for (i, &a) in q_anchor.iter().enumerate() {
        if i == 0 || i == n - 1 {
            pos.push((AffExpr::constant(a.x / L), AffExpr::constant(a.y / L)));
        } else {
            let x = p.add_var(format!("x{i}"), None, None);
            let y = p.add_var(format!("y{i}"), None, None);
            p.set_start(x, a.x / L);
            p.set_start(y, a.y / L);
            pos.push((x.expr(), y.expr()));
        }
    }
    let lim = hop * (1.0 + 1e-7) / L;
    for i in 0..n - 1 {
        let dx = pos[i + 1].0.clone().minus(&pos[i].0);
        let dy = pos[i + 1].1.clone().minus(&pos[i].1);
        p.add_soc(format!("speed{i}"), AffExpr::constant(lim), vec![dx, dy]);
    }

    let mut obj = AffExpr::zero();
    let mut bob_sum = AffExpr::zero();
    let l2 = L * L;
    for (i, list) in slots.iter().enumerate() {
        for t in list {
            if i == 0 || i == n - 1 {
                // fixed waypoint: the term is a constant, Carol's row holds
                let v = t.weight * t.term.best(q_anchor[i].dist2(t.u));
                obj.constant += v;
                if !t.carol {
                    bob_sum.constant += v / s.demand_b();
                }
                continue;
            }
            let who = if t.carol { "c" } else { "b" };
            let j = p.add_var(format!("j{who}{i}"), None, None);
            let r = p.add_var(format!("r{who}{i}"), None, None);
            // ‖q − u‖² ≤ j as a rotated cone: ‖(2(q − u), j − 1)‖ ≤ j + 1
            let ex = pos[i].0.clone().plus_const(-t.u.x / L).scaled(2.0);
            let ey = pos[i].1.clone().plus_const(-t.u.y / L).scaled(2.0);
            p.add_soc(
                format!("dist{who}{i}"),
                j.expr().plus_const(1.0),
                vec![ex, ey, j.expr().plus_const(-1.0)],
            );
            // r ≤ log₂(a + L²j) − log₂ d − log₂e (L²j − j0)/d
            let rest = AffExpr::constant(l2.log2() - t.term.d.log2() + LOG2_E * t.term.j0 / t.term.d)
                .plus(&AffExpr::term(j, -LOG2_E * l2 / t.term.d))
                .plus(&AffExpr::term(r, -1.0));
            p.add_log_ge(format!("rate{who}{i}"), vec![(1.0 / LN_2, AffExpr::term(j, 1.0).plus_const(t.term.a / l2))], rest);
            let j0 = q_anchor[i].dist2(t.u) / l2;
            let js = j0 * (1.0 + 1e-6) + 1e-6;
            p.set_start(j, js);
            let rs = t.term.value(js * l2);
            p.set_start(r, rs - 1e-6 * rs.abs().max(1.0));
            obj.add_term(r, t.weight);
            if t.carol {
                let need = s.demand_c(i);
                p.add_ge(format!("qos_c{i}"), AffExpr::term(r, t.weight / need), AffExpr::constant(1.0 - QOS_RELAX));
            } else {
                bob_sum.add_term(r, t.weight / s.demand_b());
            }
        }
    }
    if !bob_sum.terms.is_empty() {
        p.add_ge("qos_b", bob_sum, AffExpr::constant(1.0 - QOS_RELAX));
    }
    p.maximize(obj);
    opts.dump("trajectory", &p)?;

    let set = SolverSettings {
        tol_feas: s.tol_feas,
        tol_obj: 1e-9,
        ..SolverSettings::default()
    };
    let sol = conic::solve(&p, &set);
    match sol.status {
        SolveStatus::Optimal => {}
        SolveStatus::Infeasible => return Err(Error::Infeasible(format!("trajectory restriction: {}", sol.witness.unwrap_or_default()))),
        SolveStatus::MaxIters => return Err(Error::Solver(format!("trajectory restriction: {}", sol.witness.unwrap_or_default()))),
    }
    let q: Trajectory = pos
        .iter()
        .map(|(x, y)| Position2D::new(sol.eval(x) * L, sol.eval(y) * L))
        .collect();
    let slack = slack_of(s, &slots, &q);
    if !(slack >= anchor_slack) {
        return Ok(unchanged(lin));
    }
    Ok(TrajectoryStep {
        q,
        slack,
        anchor_slack,
        linearization: lin,
        solver_iterations: sol.iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::mrt;
    use crate::scenario::default_scenario;
    use crate::subproblems::{all_channels, exact_rates, solve_aoi_lp};

    fn setup(n: usize) -> (Scenario, Trajectory, BeamformerPlan, ServingSchedule) {
        let mut s = default_scenario().scaled_to(n);
        s.s_b = 5e6;
        let q: Trajectory = (0..n).map(|i| s.q_start.lerp(s.q_end, i as f64 / (n - 1) as f64)).collect();
        let ch = all_channels(&s, &q).unwrap();
        let w_b = ch.iter().map(|c| mrt(&c.h_b, 0.5)).collect();
        let w_c = ch.iter().map(|c| mrt(&c.h_c, 20.0)).collect();
        let serving = ServingSchedule { serving: vec![true; n] };
        (s, q, BeamformerPlan { w_b, w_c }, serving)
    }

    #[test]
    fn slack_never_drops_and_speed_holds() {
        let (s, q, plan, serving) = setup(6);
        let ch = all_channels(&s, &q).unwrap();
        let rates = exact_rates(&s, &ch, &plan, &serving, false);
        let aoi = solve_aoi_lp(&rates, &s, &serving, Some(&q), false).unwrap();
        let st = trajectory_sca_step(&s, &aoi, &plan, &q, &serving, &StepOptions::default()).unwrap();
        assert!(st.slack >= st.anchor_slack - 1e-9);
        assert!(st.slack > st.anchor_slack + 1e-3, "{} vs {}", st.slack, st.anchor_slack);
        assert_eq!(st.q[0], q[0]);
        assert_eq!(st.q[5], q[5]);
        for w in st.q.windows(2) {
            assert!(w[0].dist(w[1]) <= s.v_max * s.slot_len * (1.0 + 1e-6));
        }
    }

    #[test]
    fn frozen_without_speed() {
        let (mut s, q, plan, serving) = setup(4);
        s.v_max = 0.0;
        let ch = all_channels(&s, &q).unwrap();
        let rates = exact_rates(&s, &ch, &plan, &serving, false);
        let aoi = solve_aoi_lp(&rates, &s, &serving, None, false).unwrap();
        let st = trajectory_sca_step(&s, &aoi, &plan, &q, &serving, &StepOptions::default()).unwrap();
        assert_eq!(st.q, q);
    }

    #[test]
    fn repeated_steps_settle() {
        let (s, mut q, plan, serving) = setup(5);
        let ch = all_channels(&s, &q).unwrap();
        let rates = exact_rates(&s, &ch, &plan, &serving, false);
        let aoi = solve_aoi_lp(&rates, &s, &serving, Some(&q), false).unwrap();
        let mut gains = Vec::new();
        for _ in 0..4 {
            let st = trajectory_sca_step(&s, &aoi, &plan, &q, &serving, &StepOptions::default()).unwrap();
            assert!(st.slack >= st.anchor_slack - 1e-9);
            gains.push(st.slack - st.anchor_slack);
            q = st.q;
        }
        assert!(gains[3] <= gains[0] + 1e-9, "{gains:?}");
    }
}
