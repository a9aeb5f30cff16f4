//! Radiometer detection at the warden: false-alarm and miss-detection
//! probabilities, the optimal threshold, the minimum total error rate, the
//! covertness function Υ and its gradient, and a sampling oracle.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use rayon::prelude::*;

/// Received-power model at the warden for one slot.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EveModel {
    pub varpi_b: f64,
    pub varpi_c: f64,
    pub sigma_e2: f64,
    pub d_e: f64,
    pub mu0: f64,
    /// Σ_m σ²_{b,m}, the covert beamformer power.
    pub b_sum: f64,
    /// Σ_m σ²_{c,m}, the public beamformer power.
    pub c_sum: f64,
}

impl EveModel {
    pub fn new(b_sum: f64, c_sum: f64, mu0: f64, d_e: f64, sigma_e2: f64) -> Self {
        let g = mu0 / (d_e * d_e);
        Self {
            varpi_b: g * b_sum,
            varpi_c: g * c_sum,
            sigma_e2,
            d_e,
            mu0,
            b_sum,
            c_sum,
        }
    }

    /// Model with the given scale parameters at unit distance and gain.
    pub fn from_varpi(varpi_b: f64, varpi_c: f64, sigma_e2: f64) -> Self {
        Self::new(varpi_b, varpi_c, 1.0, 1.0, sigma_e2)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DetectionReport {
    pub tau_star: f64,
    pub xi_star: f64,
    pub p_fa: f64,
    pub p_md: f64,
}

/// Relative band around ϖ_b = ϖ_c where the analytic limit replaces the
/// two-exponential form.
const DIAG_BAND: f64 = 1e-6;

fn near_diag(a: f64, c: f64) -> bool {
    (c - a).abs() <= DIAG_BAND * a.max(c)
}

/// `ln(1+d)/d`, equal to 1 at `d = 0`.
fn log1p_ratio(d: f64) -> f64 {
    if d == 0.0 {
        1.0
    } else {
        d.ln_1p() / d
    }
}

pub fn p_fa(tau: f64, eve: &EveModel) -> f64 {
    if tau <= eve.sigma_e2 {
        return 1.0;
    }
    ((eve.sigma_e2 - tau) / eve.varpi_c).exp()
}

pub fn p_md(tau: f64, eve: &EveModel) -> f64 {
    if tau <= eve.sigma_e2 {
        return 0.0;
    }
    let (a, c) = (eve.varpi_b, eve.varpi_c);
    let x = tau - eve.sigma_e2;
    if near_diag(a, c) {
        let w = 0.5 * (a + c);
        return 1.0 - (-x / w).exp() * (1.0 + x / w);
    }
    let ea = if a > 0.0 { a * (-x / a).exp() } else { 0.0 };
    let ec = if c > 0.0 { c * (-x / c).exp() } else { 0.0 };
    ((ea - ec) / (c - a) + 1.0).clamp(0.0, 1.0)
}

/// Total detection error `P_FA + P_MD`.
pub fn xi(tau: f64, eve: &EveModel) -> f64 {
    p_fa(tau, eve) + p_md(tau, eve)
}

/// Threshold minimizing `xi`.
pub fn optimal_tau(eve: &EveModel) -> f64 {
    let (a, c) = (eve.varpi_b, eve.varpi_c);
    if a == c {
        return eve.sigma_e2 + a;
    }
    if a <= 0.0 || c <= 0.0 {
        // one hypothesis carries no power: the error is minimized at the noise floor
        return eve.sigma_e2;
    }
    // a·c·ln(c/a)/(c−a), written to stay accurate as c → a
    eve.sigma_e2 + c * log1p_ratio((c - a) / a)
}

/// `Υ(p_b, p_c) = (p_b/p_c)^{1/(1 − p_b/p_c)}`, the warden's detection
/// advantage `1 − ξ*`.
pub fn upsilon(p_b: f64, p_c: f64) -> f64 {
    if p_b <= 0.0 {
        return 0.0;
    }
    if p_c <= 0.0 {
        return 1.0;
    }
    let s = p_b / p_c;
    // ln(s)/(1−s) = −ln(1+d)/d with d = s−1
    (-log1p_ratio(s - 1.0)).exp()
}

/// Minimum total detection error over the warden's threshold; depends only
/// on the power ratio.
pub fn xi_star(b_sum: f64, c_sum: f64) -> f64 {
    1.0 - upsilon(b_sum, c_sum)
}

/// `(r − 1 − ln r)/(r − 1)²` with a series near `r = 1`.
fn curvature_term(r: f64) -> f64 {
    let d = r - 1.0;
    if d.abs() < 1e-3 {
        // d²/2 − d³/3 + d⁴/4 − … divided by d²
        let mut sum = 0.0;
        let mut p = 1.0;
        for k in 2..12 {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            sum += sign * p / k as f64;
            p *= d;
        }
        sum
    } else {
        (d - d.ln_1p()) / (d * d)
    }
}

/// `(∂Υ/∂p_b, ∂Υ/∂p_c)`.
pub fn upsilon_grad(p_b: f64, p_c: f64) -> (f64, f64) {
    if p_c <= 0.0 {
        return (0.0, 0.0);
    }
    if p_b <= 0.0 {
        return (1.0 / p_c, 0.0);
    }
    let r = p_c / p_b;
    let k = upsilon(p_b, p_c) * curvature_term(r);
    (p_c / (p_b * p_b) * k, -k / p_b)
}

/// Largest `p_b/p_c` with `Υ ≤ ε` (Υ is increasing in the ratio).
pub fn max_covert_ratio(eps: f64) -> f64 {
    if eps <= 0.0 {
        return 0.0;
    }
    if eps >= 1.0 {
        return f64::INFINITY;
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    // Υ(s) → 1 as s → ∞, so grow the bracket first
    while upsilon(hi, 1.0) <= eps {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if upsilon(mid, 1.0) <= eps {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    lo
}

pub fn report(eve: &EveModel) -> DetectionReport {
    let tau_star = optimal_tau(eve);
    let p_fa = p_fa(tau_star, eve);
    let p_md = p_md(tau_star, eve);
    DetectionReport {
        tau_star,
        xi_star: xi_star(eve.b_sum, eve.c_sum),
        p_fa,
        p_md,
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct McEstimate {
    pub p_fa: f64,
    pub p_md: f64,
    pub se_fa: f64,
    pub se_md: f64,
    pub trials: usize,
}

/// Antennas used by the oracle; the law of `h_eᴴw` does not depend on it.
const ORACLE_ANTENNAS: usize = 4;
const CHUNKS: usize = 64;

fn cn(rng: &mut ChaCha8Rng, var: f64) -> Complex64 {
    let s = (0.5 * var).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(s * re, s * im)
}

/// Sampling estimate of `(P_FA, P_MD)` at threshold `tau`.
///
/// Each trial draws beamformer entries with per-antenna variance
/// `B/M`, `C/M`, then the average received power over `g` channel uses.
/// With Gaussian unit-power symbols and noise, `Σ|y_i|²` given the
/// beamformers is exactly `v·Gamma(g, 1)` with `v` the per-use variance, so
/// the `g` uses are drawn in one step.
pub fn mc_detection_oracle(eve: &EveModel, tau: f64, trials: usize, g: usize, seed: u64) -> McEstimate {
    let m = ORACLE_ANTENNAS;
    let amp = (eve.mu0 / (eve.d_e * eve.d_e)).sqrt();
    let h: Vec<Complex64> = (0..m).map(|i| Complex64::from_polar(amp, 0.7 * i as f64)).collect();
    let gamma = Gamma::new(g as f64, 1.0).expect("valid shape");
    let per_chunk = trials.div_ceil(CHUNKS);
    let counts: Vec<(usize, usize, usize)> = (0..CHUNKS)
        .into_par_iter()
        .map(|chunk| {
            let start = chunk * per_chunk;
            let n = per_chunk.min(trials.saturating_sub(start));
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(chunk as u64);
            let (mut fa, mut md) = (0usize, 0usize);
            let alpha = |rng: &mut ChaCha8Rng, total: f64| -> f64 {
                let mut a = Complex64::new(0.0, 0.0);
                for hm in &h {
                    a += hm.conj() * cn(rng, total / m as f64);
                }
                a.norm_sqr()
            };
            for _ in 0..n {
                // H0: public stream only
                let v0 = alpha(&mut rng, eve.c_sum) + eve.sigma_e2;
                let t0 = v0 * gamma.sample(&mut rng) / g as f64;
                if t0 > tau {
                    fa += 1;
                }
                // H1: public and covert streams
                let v1 = alpha(&mut rng, eve.c_sum) + alpha(&mut rng, eve.b_sum) + eve.sigma_e2;
                let t1 = v1 * gamma.sample(&mut rng) / g as f64;
                if t1 <= tau {
                    md += 1;
                }
            }
            (fa, md, n)
        })
        .collect();
    let (fa, md, n) = counts
        .iter()
        .fold((0, 0, 0), |acc, c| (acc.0 + c.0, acc.1 + c.1, acc.2 + c.2));
    let nf = n as f64;
    let p_fa = fa as f64 / nf;
    let p_md = md as f64 / nf;
    McEstimate {
        p_fa,
        p_md,
        se_fa: (p_fa * (1.0 - p_fa) / nf).sqrt(),
        se_md: (p_md * (1.0 - p_md) / nf).sqrt(),
        trials: n,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::LN_2;

    fn eve12() -> EveModel {
        EveModel::from_varpi(1.0, 2.0, 1.0)
    }

    #[test]
    fn false_alarm_values() {
        let e = eve12();
        assert_eq!(p_fa(1.0, &e), 1.0);
        assert!((p_fa(3.0, &e) - (-1f64).exp()).abs() < 1e-15);
        assert!(p_fa(1e6, &e) < 1e-300);
    }

    #[test]
    fn miss_values() {
        let e = eve12();
        assert_eq!(p_md(1.0, &e), 0.0);
        assert!((p_md(1e4, &e) - 1.0).abs() < 1e-12);
        let t = 1.0 + 2.0 * LN_2;
        assert!((p_md(t, &e) - 0.25).abs() < 1e-12);
        assert!((p_fa(t, &e) - 0.5).abs() < 1e-12);
        assert!((xi(t, &e) - 0.75).abs() < 1e-12);
        assert_eq!(xi(0.5, &e), 1.0);
    }

    #[test]
    fn miss_continuous_across_diagonal() {
        let a = EveModel::from_varpi(1.0, 1.0, 0.0);
        let b = EveModel::from_varpi(1.0, 1.0 + 2e-6, 0.0);
        assert!((p_md(1.3, &a) - p_md(1.3, &b)).abs() < 1e-6);
    }

    #[test]
    fn threshold() {
        let e = eve12();
        assert!((optimal_tau(&e) - (1.0 + 2.0 * LN_2)).abs() < 1e-12);
        let e2 = EveModel::new(1.0, 2.0, 1.0, 2.0, 1.0);
        assert!(((optimal_tau(&e2) - 1.0) - 2.0 * LN_2 / 4.0).abs() < 1e-12);
        let sw = EveModel::from_varpi(2.0, 1.0, 1.0);
        assert!((optimal_tau(&sw) - optimal_tau(&e)).abs() < 1e-12);
        let eq = EveModel::from_varpi(1.5, 1.5, 1.0);
        assert!((optimal_tau(&eq) - 2.5).abs() < 1e-12);
    }

    #[test]
    fn xi_star_values() {
        assert!((xi_star(1.0, 2.0) - 0.75).abs() < 1e-15);
        assert!((xi_star(3.0, 3.0) - (1.0 - (-1f64).exp())).abs() < 1e-15);
        assert!(xi_star(1e-12, 1.0) > 1.0 - 1e-10);
        assert_eq!(upsilon(0.0, 1.0), 0.0);
        assert!((upsilon(1.0, 2.0) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn gradient_signs_and_homogeneity() {
        let (gb, gc) = upsilon_grad(1.0, 2.0);
        assert!(gb > 0.0 && gc < 0.0);
        let (hb, hc) = upsilon_grad(2.0, 4.0);
        assert!((hb - gb / 2.0).abs() < 1e-15 && (hc - gc / 2.0).abs() < 1e-15);
        // Euler: degree-0 homogeneity means ∇Υ·p = 0
        assert!((gb * 1.0 + gc * 2.0).abs() < 1e-15);
    }

    #[test]
    fn gradient_near_diagonal_is_smooth() {
        let (a, _) = upsilon_grad(1.0, 1.0 + 1e-4);
        let (b, _) = upsilon_grad(1.0, 1.0 + 2e-3);
        let (c, _) = upsilon_grad(1.0, 1.0);
        assert!((a - c).abs() < 1e-3 && (b - c).abs() < 2e-3);
    }

    #[test]
    fn covert_ratio() {
        let s = max_covert_ratio(0.1);
        assert!((upsilon(s, 1.0) - 0.1).abs() < 1e-12);
        assert!((max_covert_ratio(0.25) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn oracle_limits() {
        let e = eve12();
        let est = mc_detection_oracle(&e, 1e3, 2000, 100, 1);
        assert_eq!(est.p_fa, 0.0);
        assert_eq!(est.p_md, 1.0);
    }

    #[test]
    fn oracle_deterministic() {
        let e = eve12();
        let a = mc_detection_oracle(&e, 2.4, 5000, 1000, 9);
        let b = mc_detection_oracle(&e, 2.4, 5000, 1000, 9);
        assert_eq!(a, b);
    }
}
