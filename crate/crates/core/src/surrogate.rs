//! First-order surrogates used by the trajectory and beamforming blocks.

use std::f64::consts::LOG2_E;

use crate::channel::{CVec, Position2D};
use crate::covertness::{upsilon, upsilon_grad};

/// `μ0 (Σ_m |w_m|)² / d²`, the gain a phase-aligned channel would give.
pub fn aligned_power_bound(w: &CVec, d: f64, mu0: f64) -> f64 {
    mu0 * aligned_power(w) / (d * d)
}

/// `(Σ_m |w_m|)²`.
pub fn aligned_power(w: &CVec) -> f64 {
    let s: f64 = w.iter().map(|v| v.norm()).sum();
    s * s
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SlotLinearization {
    /// Bob's signal at Bob.
    pub z_b: f64,
    /// Carol's signal at Carol.
    pub z_c: f64,
    /// Bob's signal at Carol.
    pub z_i: f64,
    /// `‖q^ζ − u_b‖²`
    pub j_b0: f64,
    /// `‖q^ζ − u_c‖²`
    pub j_c0: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryLinearization {
    pub q_anchor: Vec<Position2D>,
    pub slots: Vec<SlotLinearization>,
    /// `μ0/σ_b²`
    pub eta_b: f64,
    /// `μ0/σ_c²`
    pub eta_c: f64,
    /// `H²`
    pub h2: f64,
}

impl TrajectoryLinearization {
    /// Aligned powers `(z_b, z_c)` per slot; Bob's interference at Carol is
    /// bounded by the same `z_b`.
    pub fn new(q: &[Position2D], u_b: Position2D, u_c: Position2D, z: &[(f64, f64)], eta_b: f64, eta_c: f64, h: f64) -> Self {
        let z3: Vec<(f64, f64, f64)> = z.iter().map(|&(b, c)| (b, c, b)).collect();
        Self::with_gains(q, u_b, u_c, &z3, eta_b, eta_c, h)
    }

    /// Explicit `(z_b, z_c, z_i)` per slot.
    pub fn with_gains(q: &[Position2D], u_b: Position2D, u_c: Position2D, z: &[(f64, f64, f64)], eta_b: f64, eta_c: f64, h: f64) -> Self {
        let slots = q
            .iter()
            .zip(z)
            .map(|(&p, &(z_b, z_c, z_i))| SlotLinearization {
                z_b,
                z_c,
                z_i,
                j_b0: p.dist2(u_b),
                j_c0: p.dist2(u_c),
            })
            .collect();
        Self {
            q_anchor: q.to_vec(),
            slots,
            eta_b,
            eta_c,
            h2: h * h,
        }
    }

    /// Aligned-power rates `(R̂_b, R̂_c)` at squared horizontal distances
    /// `(j_b, j_c)`.
    pub fn rate_hat(&self, n: usize, j_b: f64, j_c: f64) -> (f64, f64) {
        let s = &self.slots[n];
        let rb = (1.0 + self.eta_b * s.z_b / (j_b + self.h2)).log2();
        let rc = (1.0 + self.eta_c * s.z_c / (self.eta_c * s.z_i + j_c + self.h2)).log2();
        (rb, rc)
    }
}

/// Concave lower surrogates `(Ř_b, Ř_c)` of the aligned-power rates,
/// linearizing the subtracted log at the anchor distances.
pub fn traj_rate_surrogates(lin: &TrajectoryLinearization, n: usize, j_b: f64, j_c: f64) -> (f64, f64) {
    let s = &lin.slots[n];
    let h2 = lin.h2;
    let db = s.j_b0 + h2;
    let rb = (lin.eta_b * s.z_b + j_b + h2).log2() - db.log2() - LOG2_E * (j_b - s.j_b0) / db;
    let dc = lin.eta_c * s.z_i + s.j_c0 + h2;
    let rc = (lin.eta_c * (s.z_i + s.z_c) + j_c + h2).log2() - dc.log2() - LOG2_E * (j_c - s.j_c0) / dc;
    (rb, rc)
}

/// `‖q^ζ − u‖² + 2(q^ζ − u)ᵀ(q − q^ζ)`, a global under-estimate of
/// `‖q − u‖²`.
pub fn slack_distance_bound(q: Position2D, q_anchor: Position2D, u: Position2D) -> f64 {
    let (ax, ay) = (q_anchor.x - u.x, q_anchor.y - u.y);
    ax * ax + ay * ay + 2.0 * (ax * (q.x - q_anchor.x) + ay * (q.y - q_anchor.y))
}

/// `log₂(1 + 1/(f g))`.
pub fn sinr_rate(f: f64, g: f64) -> f64 {
    (1.0 + 1.0 / (f * g)).log2()
}

/// Anchors for the SINR-rate tangent.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateLinearization {
    pub f: f64,
    pub g: f64,
}

impl RateLinearization {
    /// Value and the common slope factor `c = log₂e/(1 + f g)` so that
    /// `R̃ = R0 − c (f/f^ι + g/g^ι − 2)`.
    pub fn coefficients(&self) -> (f64, f64) {
        let fg = self.f * self.g;
        (sinr_rate(self.f, self.g), LOG2_E / (1.0 + fg))
    }
}

/// Tangent plane of `log₂(1 + 1/(f g))` at the anchors (a global
/// under-estimate since the function is jointly convex).
pub fn sinr_rate_surrogate(f: f64, g: f64, anchor: RateLinearization) -> f64 {
    let (f0, g0) = (anchor.f, anchor.g);
    let d = 1.0 + f0 * g0;
    sinr_rate(f0, g0) - LOG2_E * (f - f0) / (f0 * d) - LOG2_E * (g - g0) / (g0 * d)
}

/// Linearized covertness constraint
/// `Υ(p^ι) + ∂_bΥ·(p_b − p_b^ι) + ∂_cΥ·(p_c − p_c^ι) ≤ ε`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CovertHalfspace {
    pub anchor: (f64, f64),
    pub value: f64,
    pub grad: (f64, f64),
    pub eps: f64,
}

impl CovertHalfspace {
    pub fn lhs(&self, p_b: f64, p_c: f64) -> f64 {
        self.value + self.grad.0 * (p_b - self.anchor.0) + self.grad.1 * (p_c - self.anchor.1)
    }

    pub fn holds(&self, p_b: f64, p_c: f64) -> bool {
        self.lhs(p_b, p_c) <= self.eps
    }

    /// `(a_b, a_c, rhs)` with the constraint written `a_b p_b + a_c p_c ≤ rhs`.
    pub fn affine(&self) -> (f64, f64, f64) {
        let rhs = self.eps - self.value + self.grad.0 * self.anchor.0 + self.grad.1 * self.anchor.1;
        (self.grad.0, self.grad.1, rhs)
    }
}

pub fn covertness_halfspace(p_b0: f64, p_c0: f64, eps: f64) -> CovertHalfspace {
    CovertHalfspace {
        anchor: (p_b0, p_c0),
        value: upsilon(p_b0, p_c0),
        grad: upsilon_grad(p_b0, p_c0),
        eps,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{channel_gain, gain, mrt};
    use num_complex::Complex64;

    #[test]
    fn aligned_bound_tight_for_mrt() {
        let q = Position2D::new(120.0, -40.0);
        let u = Position2D::new(0.0, 10.0);
        let h = channel_gain(q, u, 100.0, 6, 0.5, 1e-3).unwrap();
        let w = mrt(&h, 2.0);
        let d = h.source_distance;
        let exact = gain(&h, &w);
        assert!((aligned_power_bound(&w, d, 1e-3) - exact).abs() < 1e-12 * exact);
        let mut single = CVec::zeros(6);
        single[2] = Complex64::new(0.3, -1.1);
        assert!((aligned_power_bound(&single, d, 1e-3) - gain(&h, &single)).abs() < 1e-15);
    }

    #[test]
    fn expansion_points() {
        let q = vec![Position2D::new(10.0, 20.0)];
        let lin = TrajectoryLinearization::new(&q, Position2D::new(300.0, 0.0), Position2D::new(0.0, 500.0), &[(2.0, 9.0)], 1e7, 1e7, 100.0);
        let s = lin.slots[0];
        let (rb, rc) = traj_rate_surrogates(&lin, 0, s.j_b0, s.j_c0);
        let (hb, hc) = lin.rate_hat(0, s.j_b0, s.j_c0);
        assert!((rb - hb).abs() < 1e-12 && (rc - hc).abs() < 1e-12);
        let a = RateLinearization { f: 0.3, g: 2.0 };
        assert!((sinr_rate_surrogate(0.3, 2.0, a) - sinr_rate(0.3, 2.0)).abs() < 1e-15);
        let hs = covertness_halfspace(1.0, 2.0, 0.25);
        assert!((hs.lhs(1.0, 2.0) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn slack_bound_at_anchor() {
        let u = Position2D::new(3.0, -2.0);
        let qz = Position2D::new(7.0, 1.0);
        assert_eq!(slack_distance_bound(qz, qz, u), qz.dist2(u));
        assert_eq!(slack_distance_bound(Position2D::new(9.0, 9.0), u, u), 0.0);
    }

    #[test]
    fn rate_coefficients_match_tangent() {
        let a = RateLinearization { f: 0.2, g: 3.0 };
        let (r0, c) = a.coefficients();
        let (f, g) = (0.35, 2.2);
        let via = r0 - c * (f / a.f + g / a.g - 2.0);
        assert!((via - sinr_rate_surrogate(f, g, a)).abs() < 1e-14);
    }

    #[test]
    fn halfspace_concavity_probe() {
        // Υ is constant along rays, so its tangent cannot over-estimate it
        // everywhere; the beamforming block pairs the halfspace with the
        // exact ratio cut instead of relying on it alone
        let (mut viol, mut total) = (0usize, 0usize);
        let eps = 0.1;
        let rho = crate::covertness::max_covert_ratio(eps);
        let mut worst_cut = f64::NEG_INFINITY;
        for i in 0..20 {
            for j in 0..20 {
                let b = 10f64.powf(-2.0 + 3.0 * i as f64 / 19.0);
                let c = 10f64.powf(-2.0 + 3.0 * j as f64 / 19.0);
                if (b / c - 1.0).abs() < 1e-3 {
                    continue;
                }
                let hs = covertness_halfspace(b, c, eps);
                for k in 0..100 {
                    let t = k as f64 / 99.0;
                    let pb = b * (0.4 * t - 0.2).exp();
                    let pc = c * (0.2 - 0.4 * ((7 * k) % 100) as f64 / 99.0).exp();
                    total += 1;
                    if hs.lhs(pb, pc) < upsilon(pb, pc) - 1e-12 {
                        viol += 1;
                    }
                    if pb <= rho * pc {
                        worst_cut = worst_cut.max(upsilon(pb, pc) - eps);
                    }
                }
            }
        }
        eprintln!("covertness tangent below Υ at {viol} of {total} probe points");
        assert!(total == 38_000 && viol > 0);
        assert!(worst_cut <= 1e-12, "{worst_cut}");
    }

    #[test]
    fn surrogate_gradients_match_differences() {
        let q = vec![Position2D::new(40.0, -70.0)];
        let lin = TrajectoryLinearization::with_gains(&q, Position2D::new(300.0, 20.0), Position2D::new(-50.0, 400.0), &[(3.0, 8.0, 0.5)], 1e7, 1e7, 100.0);
        let s = lin.slots[0];
        let fd = |f: &dyn Fn(f64) -> f64, x: f64| {
            let h = 1e-6 * x;
            (f(x + h) - f(x - h)) / (2.0 * h)
        };
        let rel = |a: f64, b: f64| (a - b).abs() / b.abs();
        for (idx, j0) in [(0, s.j_b0), (1, s.j_c0)] {
            let sur = |j: f64| {
                let (rb, rc) = if idx == 0 { traj_rate_surrogates(&lin, 0, j, s.j_c0) } else { traj_rate_surrogates(&lin, 0, s.j_b0, j) };
                [rb, rc][idx]
            };
            let hat = |j: f64| {
                let (rb, rc) = if idx == 0 { lin.rate_hat(0, j, s.j_c0) } else { lin.rate_hat(0, s.j_b0, j) };
                [rb, rc][idx]
            };
            assert!(rel(fd(&sur, j0), fd(&hat, j0)) < 1e-6);
        }
        let a = RateLinearization { f: 0.02, g: 1.7 };
        let f_sur = |f: f64| sinr_rate_surrogate(f, a.g, a);
        let f_ex = |f: f64| sinr_rate(f, a.g);
        assert!(rel(fd(&f_sur, a.f), fd(&f_ex, a.f)) < 1e-6);
        let g_sur = |g: f64| sinr_rate_surrogate(a.f, g, a);
        let g_ex = |g: f64| sinr_rate(a.f, g);
        assert!(rel(fd(&g_sur, a.g), fd(&g_ex, a.g)) < 1e-6);
    }
}
