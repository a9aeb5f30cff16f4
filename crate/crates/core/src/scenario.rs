//! Physical and algorithmic parameters, their defaults, and the JSON file
//! format.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channel::Position2D;
use crate::error::{Error, Result};

/// Order of the trajectory and beamforming blocks inside one outer iteration.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BlockOrder {
    #[default]
    TrajectoryFirst,
    BeamformingFirst,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Scenario {
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "N")]
    pub n: usize,
    /// Seconds per slot.
    pub slot_len: f64,
    /// UAV altitude (m).
    #[serde(rename = "H")]
    pub h_uav: f64,
    /// Warden altitude (m).
    #[serde(rename = "h")]
    pub h_eve: f64,
    pub d_min: f64,
    #[serde(rename = "V_max")]
    pub v_max: f64,
    /// Per-slot total transmit power (W).
    #[serde(rename = "Gamma")]
    pub gamma: f64,
    #[serde(rename = "P_max")]
    pub p_max: f64,
    pub epsilon: f64,
    pub mu0: f64,
    pub sigma2_b: f64,
    pub sigma2_c: f64,
    pub sigma2_e: f64,
    #[serde(rename = "B_hz")]
    pub bandwidth: f64,
    /// Bob's total packet size (bits).
    #[serde(rename = "S_b")]
    pub s_b: f64,
    /// Carol's per-slot packet sizes (bits).
    #[serde(rename = "S_c")]
    pub s_c: Vec<f64>,
    pub u_b: Position2D,
    pub u_c: Position2D,
    pub q_start: Position2D,
    pub q_end: Position2D,
    pub spacing_ratio: f64,
    /// 1-based inclusive slot range in which Bob may be served.
    pub bob_request_window: [usize; 2],
    pub tol_feas: f64,
    pub tol_obj: f64,
    pub max_outer_iters: usize,
    pub mc_trials: usize,
    #[serde(rename = "mc_G")]
    pub mc_g: usize,
    /// Seeds the user placement and every randomized step.
    pub seed: u64,
    pub block_order: BlockOrder,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum PerSlot {
    Scalar(f64),
    List(Vec<f64>),
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    #[serde(rename = "M")]
    m: Option<usize>,
    #[serde(rename = "N")]
    n: Option<usize>,
    slot_len: Option<f64>,
    #[serde(rename = "H")]
    h_uav: Option<f64>,
    #[serde(rename = "h")]
    h_eve: Option<f64>,
    d_min: Option<f64>,
    #[serde(rename = "V_max")]
    v_max: Option<f64>,
    #[serde(rename = "Gamma")]
    gamma: Option<f64>,
    #[serde(rename = "Gamma_db")]
    gamma_db: Option<f64>,
    #[serde(rename = "P_max")]
    p_max: Option<f64>,
    #[serde(rename = "P_max_db")]
    p_max_db: Option<f64>,
    epsilon: Option<f64>,
    mu0: Option<f64>,
    mu0_db: Option<f64>,
    sigma2_b: Option<f64>,
    sigma2_b_db: Option<f64>,
    sigma2_c: Option<f64>,
    sigma2_c_db: Option<f64>,
    sigma2_e: Option<f64>,
    sigma2_e_db: Option<f64>,
    #[serde(rename = "B_hz")]
    bandwidth: Option<f64>,
    #[serde(rename = "S_b")]
    s_b: Option<f64>,
    #[serde(rename = "S_c")]
    s_c: Option<PerSlot>,
    u_b: Option<Position2D>,
    u_c: Option<Position2D>,
    q_start: Option<Position2D>,
    q_end: Option<Position2D>,
    spacing_ratio: Option<f64>,
    bob_request_window: Option<[usize; 2]>,
    tol_feas: Option<f64>,
    tol_obj: Option<f64>,
    max_outer_iters: Option<usize>,
    mc_trials: Option<usize>,
    #[serde(rename = "mc_G")]
    mc_g: Option<usize>,
    seed: Option<u64>,
    block_order: Option<BlockOrder>,
}

fn from_db(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

fn pick(field: &str, lin: Option<f64>, db: Option<f64>, default: f64) -> Result<f64> {
    match (lin, db) {
        (Some(_), Some(_)) => Err(Error::invalid(field, "given both linear and `_db` forms")),
        (Some(v), None) => Ok(v),
        (None, Some(d)) => Ok(from_db(d)),
        (None, None) => Ok(default),
    }
}

/// Two users placed uniformly in the 1 km square.
pub fn draw_users(seed: u64) -> (Position2D, Position2D) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = || Position2D::new(rng.gen_range(0.0..1000.0), rng.gen_range(0.0..1000.0));
    let b = draw();
    let c = draw();
    (b, c)
}

pub fn default_scenario() -> Scenario {
    default_with_seed(0)
}

/// Defaults with users drawn from `seed`.
pub fn default_with_seed(seed: u64) -> Scenario {
    let (u_b, u_c) = draw_users(seed);
    let n = 50;
    Scenario {
        m: 10,
        n,
        slot_len: 1.0,
        h_uav: 100.0,
        h_eve: 50.0,
        d_min: 20.0,
        v_max: 30.0,
        gamma: 10.0,
        p_max: 30.0,
        epsilon: 0.1,
        mu0: 1e-3,
        sigma2_b: 1e-10,
        sigma2_c: 1e-10,
        sigma2_e: 1e-10,
        bandwidth: 1e6,
        s_b: 45e6,
        s_c: vec![5e6; n],
        u_b,
        u_c,
        q_start: Position2D::new(0.0, 0.0),
        q_end: Position2D::new(1000.0, 1000.0),
        spacing_ratio: 0.5,
        bob_request_window: [1, n],
        tol_feas: 1e-6,
        tol_obj: 1e-4,
        max_outer_iters: 30,
        mc_trials: 100_000,
        mc_g: 10_000,
        seed,
        block_order: BlockOrder::TrajectoryFirst,
    }
}

pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let raw: RawScenario = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    let seed = raw.seed.unwrap_or(0);
    let d = default_with_seed(seed);
    let n = raw.n.unwrap_or(d.n);
    let s_c = match raw.s_c {
        None => vec![d.s_c[0]; n],
        Some(PerSlot::Scalar(v)) => vec![v; n],
        Some(PerSlot::List(v)) => {
            if v.len() != n {
                return Err(Error::invalid("S_c", format!("has {} entries, expected N = {n}", v.len())));
            }
            v
        }
    };
    let s = Scenario {
        m: raw.m.unwrap_or(d.m),
        n,
        slot_len: raw.slot_len.unwrap_or(d.slot_len),
        h_uav: raw.h_uav.unwrap_or(d.h_uav),
        h_eve: raw.h_eve.unwrap_or(d.h_eve),
        d_min: raw.d_min.unwrap_or(d.d_min),
        v_max: raw.v_max.unwrap_or(d.v_max),
        gamma: pick("Gamma", raw.gamma, raw.gamma_db, d.gamma)?,
        p_max: pick("P_max", raw.p_max, raw.p_max_db, d.p_max)?,
        epsilon: raw.epsilon.unwrap_or(d.epsilon),
        mu0: pick("mu0", raw.mu0, raw.mu0_db, d.mu0)?,
        sigma2_b: pick("sigma2_b", raw.sigma2_b, raw.sigma2_b_db, d.sigma2_b)?,
        sigma2_c: pick("sigma2_c", raw.sigma2_c, raw.sigma2_c_db, d.sigma2_c)?,
        sigma2_e: pick("sigma2_e", raw.sigma2_e, raw.sigma2_e_db, d.sigma2_e)?,
        bandwidth: raw.bandwidth.unwrap_or(d.bandwidth),
        s_b: raw.s_b.unwrap_or(d.s_b),
        s_c,
        u_b: raw.u_b.unwrap_or(d.u_b),
        u_c: raw.u_c.unwrap_or(d.u_c),
        q_start: raw.q_start.unwrap_or(d.q_start),
        q_end: raw.q_end.unwrap_or(d.q_end),
        spacing_ratio: raw.spacing_ratio.unwrap_or(d.spacing_ratio),
        bob_request_window: raw.bob_request_window.unwrap_or([1, n]),
        tol_feas: raw.tol_feas.unwrap_or(d.tol_feas),
        tol_obj: raw.tol_obj.unwrap_or(d.tol_obj),
        max_outer_iters: raw.max_outer_iters.unwrap_or(d.max_outer_iters),
        mc_trials: raw.mc_trials.unwrap_or(d.mc_trials),
        mc_g: raw.mc_g.unwrap_or(d.mc_g),
        seed,
        block_order: raw.block_order.unwrap_or(d.block_order),
    };
    s.validate()?;
    Ok(s)
}

pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path)?;
    parse_scenario(&text)
}

fn positive(field: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(field, format!("must be positive and finite, got {v}")))
    }
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if self.m < 2 {
            return Err(Error::invalid("M", "needs at least 2 antennas"));
        }
        if self.n < 1 {
            return Err(Error::invalid("N", "needs at least one slot"));
        }
        positive("slot_len", self.slot_len)?;
        positive("H", self.h_uav)?;
        positive("h", self.h_eve)?;
        if self.h_eve >= self.h_uav {
            return Err(Error::invalid("h", "warden must fly below the UAV (h < H)"));
        }
        positive("d_min", self.d_min)?;
        if !(self.v_max >= 0.0 && self.v_max.is_finite()) {
            return Err(Error::invalid("V_max", "must be non-negative"));
        }
        positive("Gamma", self.gamma)?;
        positive("P_max", self.p_max)?;
        if self.gamma > self.p_max {
            return Err(Error::invalid("Gamma", format!("exceeds P_max = {}", self.p_max)));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::invalid("epsilon", format!("must lie in (0, 1), got {}", self.epsilon)));
        }
        positive("mu0", self.mu0)?;
        positive("sigma2_b", self.sigma2_b)?;
        positive("sigma2_c", self.sigma2_c)?;
        positive("sigma2_e", self.sigma2_e)?;
        positive("B_hz", self.bandwidth)?;
        if !(self.s_b >= 0.0 && self.s_b.is_finite()) {
            return Err(Error::invalid("S_b", "must be non-negative"));
        }
        if self.s_c.len() != self.n {
            return Err(Error::invalid("S_c", format!("has {} entries, expected N = {}", self.s_c.len(), self.n)));
        }
        for &v in &self.s_c {
            positive("S_c", v)?;
        }
        positive("spacing_ratio", self.spacing_ratio)?;
        for (name, p) in [("u_b", self.u_b), ("u_c", self.u_c), ("q_start", self.q_start), ("q_end", self.q_end)] {
            if !p.is_finite() {
                return Err(Error::invalid(name, "must be finite"));
            }
        }
        let [a, b] = self.bob_request_window;
        if a < 1 || b > self.n || a > b {
            return Err(Error::invalid("bob_request_window", format!("[{a}, {b}] is not inside [1, {}]", self.n)));
        }
        positive("tol_feas", self.tol_feas)?;
        positive("tol_obj", self.tol_obj)?;
        if self.mc_trials < 1000 {
            return Err(Error::invalid("mc_trials", "needs at least 1000 trials"));
        }
        if self.mc_g < 1 {
            return Err(Error::invalid("mc_G", "must be at least 1"));
        }
        // Carol must fit in one slot even at the best conceivable rate
        let best = self.best_case_rate_c();
        for (i, &s) in self.s_c.iter().enumerate() {
            if s / self.bandwidth > self.slot_len * best {
                return Err(Error::invalid(
                    "S_c",
                    format!("slot {} needs {:.3} b/s/Hz over one slot, best case is {best:.3}", i + 1, s / (self.bandwidth * self.slot_len)),
                ));
            }
        }
        Ok(())
    }

    /// Rate with all power beamformed from directly overhead and no
    /// interference.
    pub fn best_case_rate_c(&self) -> f64 {
        let m = self.m as f64;
        (1.0 + self.mu0 * m * m * self.gamma / (self.h_uav * self.h_uav * self.sigma2_c)).log2()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    /// Bits per Hz Carol needs in slot `i` (0-based).
    pub fn demand_c(&self, i: usize) -> f64 {
        self.s_c[i] / self.bandwidth
    }

    pub fn demand_b(&self) -> f64 {
        self.s_b / self.bandwidth
    }

    /// Vertical offset between UAV and warden.
    pub fn eve_dalt(&self) -> f64 {
        self.h_uav - self.h_eve
    }

    /// Warden distance used for reporting: as close as allowed, but never
    /// closer than the altitude gap.
    pub fn eve_distance(&self) -> f64 {
        self.d_min.max(self.eve_dalt())
    }

    /// 0-based slots in Bob's request window.
    pub fn window(&self) -> std::ops::Range<usize> {
        (self.bob_request_window[0] - 1)..self.bob_request_window[1]
    }

    /// Copy with `n` slots. The endpoint separation shrinks with the flight
    /// time so the required cruise speed is unchanged; per-slot sizes and the
    /// request window are truncated or padded.
    pub fn scaled_to(&self, n: usize) -> Scenario {
        let mut s = self.clone();
        let frac = if self.n > 1 { (n.max(1) - 1) as f64 / (self.n - 1) as f64 } else { 1.0 };
        s.q_end = self.q_start.lerp(self.q_end, frac.min(1.0));
        let last = *self.s_c.last().unwrap_or(&5e6);
        s.s_c = (0..n).map(|i| self.s_c.get(i).copied().unwrap_or(last)).collect();
        let [a, b] = self.bob_request_window;
        let b2 = if b == self.n { n } else { b.min(n) };
        s.bob_request_window = [a.min(b2).max(1), b2];
        s.n = n;
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let s = default_scenario();
        assert_eq!(s.m, 10);
        assert_eq!(s.mu0, 1e-3);
        assert_eq!(s.sigma2_b, 1e-10);
        assert_eq!(s.s_b, 45e6);
        assert!(s.s_c.iter().all(|&v| v == 5e6));
        s.validate().unwrap();
    }

    #[test]
    fn every_seed_validates() {
        for seed in 0..200 {
            let s = default_with_seed(seed);
            s.validate().unwrap();
            for p in [s.u_b, s.u_c] {
                assert!((0.0..1000.0).contains(&p.x) && (0.0..1000.0).contains(&p.y));
            }
        }
    }

    #[test]
    fn empty_object_is_default() {
        assert_eq!(parse_scenario("{}").unwrap(), default_scenario());
    }

    #[test]
    fn overrides() {
        let s = parse_scenario(r#"{"M": 4, "Gamma": 20}"#).unwrap();
        let mut d = default_scenario();
        d.m = 4;
        d.gamma = 20.0;
        assert_eq!(s, d);
    }

    #[test]
    fn epsilon_out_of_range() {
        let e = parse_scenario(r#"{"epsilon": 1.5}"#).unwrap_err();
        assert!(e.to_string().contains("epsilon"), "{e}");
    }

    #[test]
    fn db_keys() {
        let s = parse_scenario(r#"{"mu0_db": -30, "sigma2_e_db": -90}"#).unwrap();
        assert!((s.mu0 - 1e-3).abs() < 1e-15);
        assert!((s.sigma2_e - 1e-9).abs() < 1e-21);
        assert!(parse_scenario(r#"{"mu0": 1e-3, "mu0_db": -30}"#).is_err());
    }

    #[test]
    fn unknown_key_rejected() {
        let e = parse_scenario(r#"{"Gama": 3}"#).unwrap_err();
        assert!(e.to_string().contains("Gama"));
    }

    #[test]
    fn per_slot_sizes() {
        let s = parse_scenario(r#"{"N": 3, "S_c": [1e6, 2e6, 3e6]}"#).unwrap();
        assert_eq!(s.s_c, vec![1e6, 2e6, 3e6]);
        assert!(parse_scenario(r#"{"N": 3, "S_c": [1e6]}"#).is_err());
        let s = parse_scenario(r#"{"N": 4, "S_c": 2e6}"#).unwrap();
        assert_eq!(s.s_c, vec![2e6; 4]);
    }

    #[test]
    fn carol_bound_checked() {
        let e = parse_scenario(r#"{"S_c": 1e9}"#).unwrap_err();
        assert!(e.to_string().contains("S_c"));
    }

    #[test]
    fn round_trip() {
        let mut s = default_with_seed(7);
        s.s_c[3] = 1.25e6;
        s.block_order = BlockOrder::BeamformingFirst;
        let back = parse_scenario(&s.to_json()).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn scaling_keeps_speed() {
        let d = default_scenario();
        let s = d.scaled_to(20);
        s.validate().unwrap();
        let step = |s: &Scenario| s.q_start.dist(s.q_end) / (s.n - 1) as f64;
        assert!((step(&s) - step(&d)).abs() < 1e-9);
        assert_eq!(s.bob_request_window, [1, 20]);
        assert_eq!(s.s_c.len(), 20);
    }
}
