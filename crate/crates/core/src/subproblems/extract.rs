//! Recovery of a beam vector from a relaxed matrix.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::channel::CVec;

const RANK_ONE_GAP: f64 = 1e-6;
const DRAWS: usize = 1000;
const TOLERANCE: f64 = 0.05;

/// One induced quantity `|hᴴw|²`; `favor_high` says which direction helps.
#[derive(Clone, Debug)]
pub struct Target {
    pub h: CVec,
    pub favor_high: bool,
}

#[derive(Clone, Debug)]
pub struct Extraction {
    pub w: CVec,
    /// The matrix was numerically rank one.
    pub rank_one: bool,
    /// Some target moved against its favored direction by more than 5 %.
    pub flagged: bool,
    /// `|hᴴw|² / Re Tr(hhᴴW)` per target.
    pub ratios: Vec<f64>,
}

fn induced(h: &CVec, w: &CVec) -> f64 {
    h.dotc(w).norm_sqr()
}

fn lifted(h: &CVec, m: &DMatrix<Complex64>) -> f64 {
    (h.adjoint() * m * h)[(0, 0)].re
}

fn score(ratios: &[f64], targets: &[Target]) -> f64 {
    ratios
        .iter()
        .zip(targets)
        .map(|(&r, t)| if t.favor_high { r } else { 1.0 / r.max(1e-300) })
        .fold(f64::INFINITY, f64::min)
}

/// Principal eigenvector when `λ₂/λ₁ ≤ 10⁻⁶`, otherwise the best of 1000
/// Gaussian draws shaped by `W` and rescaled to `Tr W`, scored by the worst
/// target ratio.
pub fn extract_rank_one(w: &DMatrix<Complex64>, targets: &[Target], seed: u64) -> Extraction {
    let m = w.nrows();
    let herm = (w + w.adjoint()) * Complex64::new(0.5, 0.0);
    let trace = herm.trace().re;
    if !(trace > 0.0) {
        return Extraction {
            w: CVec::zeros(m),
            rank_one: true,
            flagged: false,
            ratios: vec![1.0; targets.len()],
        };
    }
    let eig = herm.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());
    let l1 = eig.eigenvalues[order[0]].max(0.0);
    let l2 = if m > 1 { eig.eigenvalues[order[1]].max(0.0) } else { 0.0 };
    let denom: Vec<f64> = targets.iter().map(|t| lifted(&t.h, &herm)).collect();
    let ratios_of = |v: &CVec| -> Vec<f64> {
        targets
            .iter()
            .zip(&denom)
            .map(|(t, &d)| if d > 0.0 { induced(&t.h, v) / d } else { 1.0 })
            .collect()
    };

    let (best, rank_one) = if l2 <= RANK_ONE_GAP * l1 {
        let u = eig.eigenvectors.column(order[0]).into_owned();
        (u * Complex64::new(l1.sqrt(), 0.0), true)
    } else {
        // W^{1/2} from the eigen-decomposition
        let mut half = DMatrix::<Complex64>::zeros(m, m);
        for k in 0..m {
            let l = eig.eigenvalues[k].max(0.0).sqrt();
            let col = eig.eigenvectors.column(k);
            for r in 0..m {
                half[(r, k)] = col[r] * l;
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scale = std::f64::consts::FRAC_1_SQRT_2;
        let mut best = CVec::zeros(m);
        let mut best_score = f64::NEG_INFINITY;
        for _ in 0..DRAWS {
            let r = CVec::from_fn(m, |_, _| {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                Complex64::new(re * scale, im * scale)
            });
            let mut v = &half * r;
            let p = v.norm_squared();
            if !(p > 0.0) {
                continue;
            }
            v *= Complex64::new((trace / p).sqrt(), 0.0);
            let sc = score(&ratios_of(&v), targets);
            if sc > best_score {
                best_score = sc;
                best = v;
            }
        }
        (best, false)
    };
    let ratios = ratios_of(&best);
    let flagged = ratios
        .iter()
        .zip(targets)
        .any(|(&r, t)| if t.favor_high { r < 1.0 - TOLERANCE } else { r > 1.0 + TOLERANCE });
    Extraction {
        w: best,
        rank_one,
        flagged,
        ratios,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cv(v: &[(f64, f64)]) -> CVec {
        CVec::from_iterator(v.len(), v.iter().map(|&(a, b)| Complex64::new(a, b)))
    }

    #[test]
    fn rank_one_recovered_up_to_phase() {
        let w = cv(&[(1.0, 0.5), (-0.3, 2.0), (0.0, -1.0)]);
        let m = &w * w.adjoint();
        let e = extract_rank_one(&m, &[], 1);
        assert!(e.rank_one && !e.flagged);
        let phase = w.dotc(&e.w);
        assert!((phase.norm() - w.norm_squared()).abs() < 1e-9);
        assert!((&e.w * (phase.conj() / phase.norm()) - &w).norm() < 1e-9);
    }

    #[test]
    fn zero_gives_zero() {
        let e = extract_rank_one(&DMatrix::zeros(3, 3), &[], 0);
        assert_eq!(e.w, CVec::zeros(3));
    }

    #[test]
    fn identity_keeps_power() {
        let t = Target {
            h: cv(&[(1.0, 0.0), (0.0, 1.0)]),
            favor_high: true,
        };
        let e = extract_rank_one(&DMatrix::identity(2, 2), &[t], 7);
        assert!(!e.rank_one);
        assert!((e.w.norm_squared() - 2.0).abs() < 1e-12);
        // the best draw nearly aligns with h, doubling the lifted value
        assert!(e.ratios[0] > 1.9);
    }
}
