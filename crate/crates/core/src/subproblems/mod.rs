//! The three blocks of the alternating scheme and their shared state.

mod aoi;
mod beamforming;
mod extract;
mod serving;
mod trajectory;

pub use aoi::{aoi_lp_problem, solve_aoi_lp, solve_aoi_lp_conic};
pub use beamforming::{beamforming_sdr_step, BeamAnchors, CMat, LiftedPlan, SlotAnchor, SlotLift};
pub use extract::{extract_rank_one, Extraction, Target};
pub use serving::select_serving_slots;
pub use trajectory::{trajectory_sca_step, TrajectoryStep};

use std::path::PathBuf;

use crate::channel::{channel_gain, gain, rate_bob, rate_carol, CVec, ChannelVector, Position2D};
use crate::error::Result;
use crate::scenario::Scenario;

/// Relative give on packet-delivery rows, so that rows tight at the anchor
/// still leave the restrictions an interior.
pub(crate) const QOS_RELAX: f64 = 1e-6;

pub type Trajectory = Vec<Position2D>;

/// Switches shared by the trajectory and beamforming blocks.
#[derive(Clone, Debug, Default)]
pub struct StepOptions {
    /// Orthogonal access: Carol is idle in Bob's slots.
    pub oma: bool,
    /// Drop the covertness constraint.
    pub no_covertness: bool,
    /// Append every assembled problem to this file.
    pub dump: Option<PathBuf>,
    /// Prefix for dumped problem labels.
    pub tag: String,
}

impl StepOptions {
    pub(crate) fn carol_active(&self, serving: &ServingSchedule, n: usize) -> bool {
        !(self.oma && serving.contains(n))
    }

    pub(crate) fn dump(&self, name: &str, p: &crate::conic::ConicProblem) -> Result<()> {
        if let Some(path) = &self.dump {
            crate::conic::dump::append_to(path, &format!("{}{name}", self.tag), p)?;
        }
        Ok(())
    }
}

/// Per-slot freshness values (seconds).
#[derive(Clone, Debug, PartialEq)]
pub struct AoiSchedule {
    pub delta_b: Vec<f64>,
    pub delta_c: Vec<f64>,
}

impl AoiSchedule {
    pub fn total(&self) -> f64 {
        self.delta_b.iter().sum::<f64>() + self.delta_c.iter().sum::<f64>()
    }
}

/// Slots in which Bob may receive a nonzero beam.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ServingSchedule {
    pub serving: Vec<bool>,
}

impl ServingSchedule {
    pub fn none(n: usize) -> Self {
        Self { serving: vec![false; n] }
    }

    pub fn contains(&self, n: usize) -> bool {
        self.serving[n]
    }

    pub fn count(&self) -> usize {
        self.serving.iter().filter(|&&s| s).count()
    }

    pub fn slots(&self) -> impl Iterator<Item = usize> + '_ {
        self.serving.iter().enumerate().filter(|(_, &s)| s).map(|(i, _)| i)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BeamformerPlan {
    pub w_b: Vec<CVec>,
    pub w_c: Vec<CVec>,
}

impl BeamformerPlan {
    pub fn p_b(&self, n: usize) -> f64 {
        self.w_b[n].norm_squared()
    }

    pub fn p_c(&self, n: usize) -> f64 {
        self.w_c[n].norm_squared()
    }
}

/// Channels toward both users in one slot.
#[derive(Clone, Debug)]
pub struct SlotChannels {
    pub h_b: ChannelVector,
    pub h_c: ChannelVector,
}

pub fn slot_channels(s: &Scenario, q: Position2D) -> Result<SlotChannels> {
    Ok(SlotChannels {
        h_b: channel_gain(q, s.u_b, s.h_uav, s.m, s.spacing_ratio, s.mu0)?,
        h_c: channel_gain(q, s.u_c, s.h_uav, s.m, s.spacing_ratio, s.mu0)?,
    })
}

pub fn all_channels(s: &Scenario, q: &[Position2D]) -> Result<Vec<SlotChannels>> {
    q.iter().map(|&p| slot_channels(s, p)).collect()
}

/// Exact per-slot rates in bits/s/Hz.
#[derive(Clone, Debug, PartialEq)]
pub struct Rates {
    pub r_b: Vec<f64>,
    pub r_c: Vec<f64>,
}

/// Exact rates for the given beams. With `oma`, Carol is idle (rate 0) in
/// Bob's slots and the public stream there is a known cover signal that Bob
/// cancels.
pub fn exact_rates(s: &Scenario, ch: &[SlotChannels], plan: &BeamformerPlan, serving: &ServingSchedule, oma: bool) -> Rates {
    let n = ch.len();
    let mut r_b = vec![0.0; n];
    let mut r_c = vec![0.0; n];
    for i in 0..n {
        if serving.contains(i) {
            r_b[i] = rate_bob(&ch[i].h_b, &plan.w_b[i], s.sigma2_b);
        }
        if !(oma && serving.contains(i)) {
            r_c[i] = rate_carol(&ch[i].h_c, &plan.w_c[i], &plan.w_b[i], s.sigma2_c);
        }
    }
    Rates { r_b, r_c }
}

/// Margin used for the strict fairness inequality, expressed as a fraction
/// of the budget radiated with the full array gain toward user `k`.
pub fn fairness_margin(s: &Scenario, h: &ChannelVector) -> f64 {
    1e-9 * s.gamma * h.entries.norm_squared()
}

/// `|h_kᴴw_c|² − |h_kᴴw_b|² − margin` for both users (positive when fair).
pub fn fairness_slack(s: &Scenario, ch: &SlotChannels, w_b: &CVec, w_c: &CVec) -> (f64, f64) {
    let fb = gain(&ch.h_b, w_c) - gain(&ch.h_b, w_b) - fairness_margin(s, &ch.h_b);
    let fc = gain(&ch.h_c, w_c) - gain(&ch.h_c, w_b) - fairness_margin(s, &ch.h_c);
    (fb, fc)
}
