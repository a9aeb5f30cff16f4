//! Geometry, ULA steering vectors, free-space LoS channels and the two
//! downlink rates.

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type CVec = DVector<Complex64>;

/// Horizontal position in meters. Serialized as `[x, y]`.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Position2D {
    pub x: f64,
    pub y: f64,
}

impl From<[f64; 2]> for Position2D {
    fn from(v: [f64; 2]) -> Self {
        Self { x: v[0], y: v[1] }
    }
}

impl From<Position2D> for [f64; 2] {
    fn from(p: Position2D) -> Self {
        [p.x, p.y]
    }
}

impl Position2D {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dist2(self, o: Position2D) -> f64 {
        let (dx, dy) = (self.x - o.x, self.y - o.y);
        dx * dx + dy * dy
    }

    pub fn dist(self, o: Position2D) -> f64 {
        self.dist2(o).sqrt()
    }

    pub fn lerp(self, o: Position2D, t: f64) -> Position2D {
        Position2D::new(self.x + t * (o.x - self.x), self.y + t * (o.y - self.y))
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SteeringVector {
    pub entries: CVec,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChannelVector {
    pub entries: CVec,
    pub source_distance: f64,
}

/// 3-D distance with vertical offset `dalt`.
pub fn distance(q: Position2D, u: Position2D, dalt: f64) -> f64 {
    (q.dist2(u) + dalt * dalt).sqrt()
}

fn steering_from_sin(sin_theta: f64, m: usize, ratio: f64) -> CVec {
    let step = -2.0 * std::f64::consts::PI * ratio * sin_theta;
    CVec::from_fn(m, |i, _| Complex64::from_polar(1.0, step * i as f64))
}

pub fn steering_vector(q: Position2D, target: Position2D, dalt: f64, m: usize, ratio: f64) -> Result<SteeringVector> {
    let d = distance(q, target, dalt);
    if !(d > 0.0) {
        return Err(Error::Geometry("transmitter and target coincide".into()));
    }
    Ok(SteeringVector {
        entries: steering_from_sin(dalt / d, m, ratio),
    })
}

pub fn channel_gain(q: Position2D, target: Position2D, dalt: f64, m: usize, ratio: f64, mu0: f64) -> Result<ChannelVector> {
    let a = steering_vector(q, target, dalt, m, ratio)?;
    let d = distance(q, target, dalt);
    Ok(ChannelVector {
        entries: a.entries * Complex64::new(mu0.sqrt() / d, 0.0),
        source_distance: d,
    })
}

/// `|hᴴw|²`.
pub fn gain(h: &ChannelVector, w: &CVec) -> f64 {
    h.entries.dotc(w).norm_sqr()
}

pub fn rate_bob(h_b: &ChannelVector, w_b: &CVec, sigma2_b: f64) -> f64 {
    (1.0 + gain(h_b, w_b) / sigma2_b).log2()
}

pub fn rate_carol(h_c: &ChannelVector, w_c: &CVec, w_b: &CVec, sigma2_c: f64) -> f64 {
    (1.0 + gain(h_c, w_c) / (gain(h_c, w_b) + sigma2_c)).log2()
}

/// Maximum-ratio beam of total power `p` toward `h`.
pub fn mrt(h: &ChannelVector, p: f64) -> CVec {
    let n = h.entries.norm();
    if n == 0.0 || p <= 0.0 {
        return CVec::zeros(h.entries.len());
    }
    &h.entries * Complex64::new(p.sqrt() / n, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const O: Position2D = Position2D::new(0.0, 0.0);

    #[test]
    fn distances() {
        assert_eq!(distance(O, O, 100.0), 100.0);
        assert!((distance(Position2D::new(300.0, 400.0), O, 0.0) - 500.0).abs() < 1e-12);
        assert!((distance(Position2D::new(300.0, 400.0), O, 100.0) - 260000f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn overhead_steering_alternates() {
        let a = steering_vector(O, O, 100.0, 4, 0.5).unwrap().entries;
        for (i, v) in a.iter().enumerate() {
            let want = if i % 2 == 0 { 1.0 } else { -1.0 };
            assert!((v.re - want).abs() < 1e-12 && v.im.abs() < 1e-12);
        }
        let flat = steering_vector(Position2D::new(500.0, 0.0), O, 0.0, 5, 0.5).unwrap().entries;
        assert!(flat.iter().all(|v| (v - Complex64::new(1.0, 0.0)).norm() < 1e-12));
        let one = steering_vector(Position2D::new(3.0, 7.0), O, 12.0, 1, 0.5).unwrap().entries;
        assert_eq!(one.len(), 1);
        assert_eq!(one[0], Complex64::new(1.0, 0.0));
        assert!(steering_vector(O, O, 0.0, 3, 0.5).is_err());
    }

    #[test]
    fn gain_moduli() {
        let h = channel_gain(Position2D::new(0.6, 0.8), O, 0.0, 3, 0.5, 1.0).unwrap();
        assert!(h.entries.iter().all(|v| (v.norm() - 1.0).abs() < 1e-12));
        let h = channel_gain(O, O, 100.0, 10, 0.5, 1e-3).unwrap();
        assert!(h.entries.iter().all(|v| (v.norm() - 3.1623e-4).abs() < 1e-8));
        let near = channel_gain(Position2D::new(30.0, 40.0), O, 0.0, 2, 0.5, 1e-3).unwrap();
        let far = channel_gain(Position2D::new(60.0, 80.0), O, 0.0, 2, 0.5, 1e-3).unwrap();
        assert!((near.entries[1].norm() - 2.0 * far.entries[1].norm()).abs() < 1e-15);
    }

    #[test]
    fn rates() {
        let h = channel_gain(O, O, 100.0, 10, 0.5, 1e-3).unwrap();
        assert_eq!(rate_bob(&h, &CVec::zeros(10), 1e-10), 0.0);
        // unit power per antenna: the aligned product is M√μ0/H
        let w = mrt(&h, 10.0);
        let want = (1.0f64 + 1e-3 * 100.0 / (1e4 * 1e-10)).log2();
        assert!((rate_bob(&h, &w, 1e-10) - want).abs() < 1e-9);

        let s2 = gain(&h, &w);
        assert!((rate_bob(&h, &w, s2 / 3.0) - 2.0).abs() < 1e-12);
        assert!((rate_carol(&h, &w, &w, s2) - 1.5f64.log2()).abs() < 1e-12);
        assert_eq!(rate_carol(&h, &CVec::zeros(10), &w, 1e-10), 0.0);
        assert_eq!(rate_carol(&h, &w, &CVec::zeros(10), 1e-10), rate_bob(&h, &w, 1e-10));
    }

    fn pos() -> impl Strategy<Value = Position2D> {
        (-1e3..1e3f64, -1e3..1e3f64).prop_map(|(x, y)| Position2D::new(x, y))
    }

    proptest! {
        #[test]
        fn steering_unit_modulus(q in pos(), u in pos(), dalt in 1.0..200.0f64, m in 1usize..16) {
            let a = steering_vector(q, u, dalt, m, 0.5).unwrap().entries;
            prop_assert!((a[0] - Complex64::new(1.0, 0.0)).norm() < 1e-12);
            for v in a.iter() {
                prop_assert!((v.norm() - 1.0).abs() < 1e-12);
            }
        }

        #[test]
        fn interference_only_hurts(q in pos(), u in pos(), re in prop::collection::vec(-1.0..1.0f64, 8)) {
            let h = channel_gain(q, u, 100.0, 4, 0.5, 1e-3).unwrap();
            let wc = CVec::from_fn(4, |i, _| Complex64::new(re[i], re[i + 4]));
            let wb = CVec::from_fn(4, |i, _| Complex64::new(re[7 - i], re[i]));
            prop_assert!(rate_carol(&h, &wc, &wb, 1e-10) <= rate_carol(&h, &wc, &CVec::zeros(4), 1e-10));
        }
    }
}
