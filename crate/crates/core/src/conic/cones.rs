//! Logarithmic barriers for each constraint kind, evaluated in the
//! constraint's own row coordinates.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use num_complex::Complex64;

use super::problem::{ConeKind, PsdBlock};

pub(crate) struct BarrierEval {
    pub grad: DVector<f64>,
    pub hess: DMatrix<f64>,
}

/// Barrier parameter contributed by one constraint.
pub(crate) fn degree(kind: &ConeKind, block: Option<&PsdBlock>) -> f64 {
    match kind {
        ConeKind::NonNeg => 1.0,
        ConeKind::Soc => 2.0,
        ConeKind::LogHypo { gammas } => 1.0 + gammas.len() as f64,
        ConeKind::Psd { .. } => block.map(|b| b.dim as f64).unwrap_or(0.0),
    }
}

/// Signed interior margin: positive iff `y` is strictly inside the cone.
/// Used for feasibility reporting and for choosing the phase-I shift.
pub(crate) fn margin(kind: &ConeKind, y: &[f64], block: Option<&PsdBlock>) -> f64 {
    match kind {
        ConeKind::NonNeg => y[0],
        ConeKind::Soc => {
            let nu = y[1..].iter().map(|v| v * v).sum::<f64>().sqrt();
            y[0] - nu
        }
        ConeKind::LogHypo { gammas } => {
            let k = gammas.len();
            let umin = y[..k].iter().cloned().fold(f64::INFINITY, f64::min);
            if umin <= 0.0 {
                return umin;
            }
            let phi: f64 = gammas.iter().zip(&y[..k]).map(|(g, u)| g * u.ln()).sum::<f64>() + y[k];
            phi.min(umin)
        }
        ConeKind::Psd { .. } => {
            let b = block.expect("psd block");
            let m = b.assemble(y);
            min_eigenvalue(&m)
        }
    }
}

/// Cholesky factor of a Hermitian positive definite matrix. The complex
/// factorization happily takes square roots of negative pivots, so the
/// diagonal of the factor is checked to be real and positive.
pub(crate) fn hermitian_cholesky(m: DMatrix<Complex64>) -> Option<Cholesky<Complex64, Dyn>> {
    let ch = m.cholesky()?;
    let l = ch.l_dirty();
    for i in 0..l.nrows() {
        let d = l[(i, i)];
        if !(d.re > 0.0 && d.re.is_finite() && d.im.abs() <= 1e-8 * d.re) {
            return None;
        }
    }
    Some(ch)
}

pub(crate) fn min_eigenvalue(m: &DMatrix<Complex64>) -> f64 {
    let eig = nalgebra::SymmetricEigen::new(m.clone());
    eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
}

/// `t² − ‖u‖²` in factored form, so its sign agrees with `t − ‖u‖`.
fn soc_gap(y: &[f64]) -> f64 {
    let nu = y[1..].iter().map(|v| v * v).sum::<f64>().sqrt();
    (y[0] - nu) * (y[0] + nu)
}

/// True iff `y` lies in the open domain of the barrier.
pub(crate) fn in_domain(kind: &ConeKind, y: &[f64], block: Option<&PsdBlock>) -> bool {
    match kind {
        ConeKind::Psd { .. } => {
            let b = block.expect("psd block");
            hermitian_cholesky(b.assemble(y)).is_some()
        }
        _ => {
            let m = margin(kind, y, block);
            m > 0.0 && m.is_finite()
        }
    }
}

/// Barrier value only; `None` outside the domain.
pub(crate) fn value(kind: &ConeKind, y: &[f64], block: Option<&PsdBlock>) -> Option<f64> {
    match kind {
        ConeKind::NonNeg => (y[0] > 0.0).then(|| -y[0].ln()),
        ConeKind::Soc => {
            let s = soc_gap(y);
            (y[0] > 0.0 && s > 0.0).then(|| -s.ln())
        }
        ConeKind::LogHypo { gammas } => {
            let k = gammas.len();
            if y[..k].iter().any(|&u| u <= 0.0) {
                return None;
            }
            let phi: f64 = gammas.iter().zip(&y[..k]).map(|(g, u)| g * u.ln()).sum::<f64>() + y[k];
            (phi > 0.0).then(|| -phi.ln() - y[..k].iter().map(|u| u.ln()).sum::<f64>())
        }
        ConeKind::Psd { .. } => {
            let b = block.expect("psd block");
            let ch = hermitian_cholesky(b.assemble(y))?;
            let l = ch.l_dirty();
            let mut v = 0.0;
            for i in 0..b.dim {
                v -= 2.0 * l[(i, i)].re.ln();
            }
            Some(v)
        }
    }
}

/// Gradient and Hessian; `None` outside the domain.
pub(crate) fn evaluate(kind: &ConeKind, y: &[f64], block: Option<&PsdBlock>) -> Option<BarrierEval> {
    let r = y.len();
    match kind {
        ConeKind::NonNeg => {
            let v = y[0];
            if v <= 0.0 {
                return None;
            }
            Some(BarrierEval {
                grad: DVector::from_element(1, -1.0 / v),
                hess: DMatrix::from_element(1, 1, 1.0 / (v * v)),
            })
        }
        ConeKind::Soc => {
            // J = diag(1, -I), s = yᵀJy
            let t = y[0];
            let s = soc_gap(y);
            if t <= 0.0 || s <= 0.0 {
                return None;
            }
            let jy = DVector::from_fn(r, |i, _| if i == 0 { y[0] } else { -y[i] });
            let grad = &jy * (-2.0 / s);
            let mut hess = &jy * jy.transpose() * (4.0 / (s * s));
            hess[(0, 0)] -= 2.0 / s;
            for i in 1..r {
                hess[(i, i)] += 2.0 / s;
            }
            Some(BarrierEval {
                grad,
                hess,
            })
        }
        ConeKind::LogHypo { gammas } => {
            let k = gammas.len();
            if y[..k].iter().any(|&u| u <= 0.0) {
                return None;
            }
            let phi: f64 = gammas.iter().zip(&y[..k]).map(|(g, u)| g * u.ln()).sum::<f64>() + y[k];
            if phi <= 0.0 {
                return None;
            }
            let mut dphi = DVector::zeros(r);
            for i in 0..k {
                dphi[i] = gammas[i] / y[i];
            }
            dphi[k] = 1.0;
            let mut grad = &dphi * (-1.0 / phi);
            let mut hess = &dphi * dphi.transpose() * (1.0 / (phi * phi));
            for i in 0..k {
                let u2 = y[i] * y[i];
                grad[i] -= 1.0 / y[i];
                hess[(i, i)] += gammas[i] / (u2 * phi) + 1.0 / u2;
            }
            Some(BarrierEval { grad, hess })
        }
        ConeKind::Psd { .. } => {
            let b = block.expect("psd block");
            let x = b.assemble(y);
            let ch = hermitian_cholesky(x.clone())?;
            let s = ch.inverse();
            let nb = b.len();
            let mut grad = DVector::zeros(nb);
            // P_a = S E_a S, stored per coordinate
            let mut p: Vec<DMatrix<Complex64>> = Vec::with_capacity(nb);
            for (a, e) in b.basis.iter().enumerate() {
                let mut g = Complex64::new(0.0, 0.0);
                let mut pa = DMatrix::<Complex64>::zeros(b.dim, b.dim);
                for &(rr, ss, c) in &e.entries {
                    g += c * s[(ss, rr)];
                    for i in 0..b.dim {
                        let sir = s[(i, rr)] * c;
                        for j in 0..b.dim {
                            pa[(i, j)] += sir * s[(ss, j)];
                        }
                    }
                }
                grad[a] = -g.re;
                p.push(pa);
            }
            let mut hess = DMatrix::zeros(nb, nb);
            for a in 0..nb {
                for (bi, e) in b.basis.iter().enumerate().skip(a) {
                    let mut h = Complex64::new(0.0, 0.0);
                    for &(rr, ss, c) in &e.entries {
                        h += c * p[a][(ss, rr)];
                    }
                    hess[(a, bi)] = h.re;
                    hess[(bi, a)] = h.re;
                }
            }
            Some(BarrierEval { grad, hess })
        }
    }
}
