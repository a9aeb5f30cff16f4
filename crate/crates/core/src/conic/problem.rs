use nalgebra::DMatrix;
use num_complex::Complex64;

/// Index of a scalar coordinate in the flat variable vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(pub(crate) usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }

    pub fn expr(self) -> AffExpr {
        AffExpr::var(self)
    }
}

/// Handle to a PSD matrix block.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PsdVar(pub(crate) usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PsdKind {
    /// Real symmetric, `dim(dim+1)/2` coordinates.
    Real,
    /// Complex Hermitian, `dim²` real coordinates (diagonal, then re/im pairs).
    Hermitian,
}

/// One coordinate direction of a matrix block: `X = Σ x_a E_a`, where each
/// `E_a` is a short list of `(row, col, coeff)` unit entries.
#[derive(Clone, Debug)]
pub(crate) struct BasisElem {
    pub entries: Vec<(usize, usize, Complex64)>,
}

#[derive(Clone, Debug)]
pub(crate) struct PsdBlock {
    pub name: String,
    pub kind: PsdKind,
    pub dim: usize,
    pub offset: usize,
    pub basis: Vec<BasisElem>,
}

impl PsdBlock {
    fn new(name: String, kind: PsdKind, dim: usize, offset: usize) -> Self {
        let one = Complex64::new(1.0, 0.0);
        let i = Complex64::new(0.0, 1.0);
        let mut basis = Vec::new();
        for p in 0..dim {
            basis.push(BasisElem {
                entries: vec![(p, p, one)],
            });
        }
        for p in 0..dim {
            for q in (p + 1)..dim {
                basis.push(BasisElem {
                    entries: vec![(p, q, one), (q, p, one)],
                });
                if kind == PsdKind::Hermitian {
                    basis.push(BasisElem {
                        entries: vec![(p, q, i), (q, p, -i)],
                    });
                }
            }
        }
        Self {
            name,
            kind,
            dim,
            offset,
            basis,
        }
    }

    pub fn len(&self) -> usize {
        self.basis.len()
    }

    /// Assemble the matrix from its coordinates.
    pub fn assemble(&self, coords: &[f64]) -> DMatrix<Complex64> {
        let mut m = DMatrix::<Complex64>::zeros(self.dim, self.dim);
        for (a, e) in self.basis.iter().enumerate() {
            let v = coords[a];
            if v == 0.0 {
                continue;
            }
            for &(r, s, c) in &e.entries {
                m[(r, s)] += c * v;
            }
        }
        m
    }

    /// Coordinates of the given Hermitian matrix (inverse of `assemble`).
    pub fn coords_of(&self, m: &DMatrix<Complex64>) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        for p in 0..self.dim {
            out.push(m[(p, p)].re);
        }
        for p in 0..self.dim {
            for q in (p + 1)..self.dim {
                let z = (m[(p, q)] + m[(q, p)].conj()) * 0.5;
                out.push(z.re);
                if self.kind == PsdKind::Hermitian {
                    out.push(z.im);
                }
            }
        }
        out
    }
}

/// Sparse affine expression `Σ coeff·x_i + constant`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct AffExpr {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl AffExpr {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        Self {
            terms: Vec::new(),
            constant: c,
        }
    }

    pub fn var(v: Var) -> Self {
        Self {
            terms: vec![(v.0, 1.0)],
            constant: 0.0,
        }
    }

    pub fn term(v: Var, c: f64) -> Self {
        Self {
            terms: vec![(v.0, c)],
            constant: 0.0,
        }
    }

    pub fn add_term(&mut self, v: Var, c: f64) -> &mut Self {
        self.terms.push((v.0, c));
        self
    }

    pub(crate) fn add_raw(&mut self, idx: usize, c: f64) {
        self.terms.push((idx, c));
    }

    pub fn plus(mut self, other: &AffExpr) -> Self {
        self.terms.extend_from_slice(&other.terms);
        self.constant += other.constant;
        self
    }

    pub fn minus(self, other: &AffExpr) -> Self {
        self.plus(&other.scaled(-1.0))
    }

    pub fn plus_const(mut self, c: f64) -> Self {
        self.constant += c;
        self
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self {
            terms: self.terms.iter().map(|&(i, c)| (i, c * k)).collect(),
            constant: self.constant * k,
        }
    }

    /// Merge duplicate indices and drop zero coefficients; keeps index order.
    pub fn normalized(&self) -> Self {
        let mut terms = self.terms.clone();
        terms.sort_by_key(|t| t.0);
        let mut out: Vec<(usize, f64)> = Vec::with_capacity(terms.len());
        for (i, c) in terms {
            match out.last_mut() {
                Some(last) if last.0 == i => last.1 += c,
                _ => out.push((i, c)),
            }
        }
        out.retain(|t| t.1 != 0.0);
        Self {
            terms: out,
            constant: self.constant,
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .fold(self.constant, |acc, &(i, c)| acc + c * x[i])
    }
}

#[derive(Clone, Debug)]
pub(crate) enum ConeKind {
    /// `y ≥ 0` for a single row.
    NonNeg,
    /// rows `(t, u…)`: `‖u‖ ≤ t`.
    Soc,
    /// rows `(u_1…u_k, v)`: `Σ γ_i ln u_i + v ≥ 0`.
    LogHypo { gammas: Vec<f64> },
    /// rows are the coordinates of block `block` (identity map).
    Psd { block: usize },
}

#[derive(Clone, Debug)]
pub(crate) struct Constraint {
    pub name: String,
    pub kind: ConeKind,
    pub rows: Vec<AffExpr>,
}

/// A convex problem: minimize an affine objective over scalar variables and
/// PSD matrix blocks, subject to affine, second-order-cone, concave-log and
/// PSD constraints.
#[derive(Clone, Debug, Default)]
pub struct ConicProblem {
    pub(crate) n: usize,
    pub(crate) var_names: Vec<String>,
    pub(crate) blocks: Vec<PsdBlock>,
    pub(crate) constraints: Vec<Constraint>,
    pub(crate) equalities: Vec<(String, AffExpr)>,
    pub(crate) objective: AffExpr,
    pub(crate) start: Vec<Option<f64>>,
    pub(crate) bounds: Vec<(Option<f64>, Option<f64>)>,
}

impl ConicProblem {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn num_vars(&self) -> usize {
        self.n
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len() + self.equalities.len()
    }

    fn push_var(&mut self, name: String, lo: Option<f64>, hi: Option<f64>) -> Var {
        let v = Var(self.n);
        self.n += 1;
        self.var_names.push(name);
        self.start.push(None);
        self.bounds.push((lo, hi));
        v
    }

    /// Scalar variable with optional bounds. Bounds become ordinary affine
    /// inequalities.
    pub fn add_var(&mut self, name: impl Into<String>, lo: Option<f64>, hi: Option<f64>) -> Var {
        let name = name.into();
        let v = self.push_var(name.clone(), lo, hi);
        if let Some(l) = lo {
            self.add_ge(format!("{name}.lo"), v.expr(), AffExpr::constant(l));
        }
        if let Some(h) = hi {
            self.add_le(format!("{name}.hi"), v.expr(), AffExpr::constant(h));
        }
        v
    }

    pub fn add_psd(&mut self, name: impl Into<String>, kind: PsdKind, dim: usize) -> PsdVar {
        let name = name.into();
        let offset = self.n;
        let block = PsdBlock::new(name.clone(), kind, dim, offset);
        for a in 0..block.len() {
            self.push_var(format!("{name}[{a}]"), None, None);
        }
        let id = self.blocks.len();
        let rows = (0..block.len())
            .map(|a| AffExpr {
                terms: vec![(offset + a, 1.0)],
                constant: 0.0,
            })
            .collect();
        self.blocks.push(block);
        self.constraints.push(Constraint {
            name: format!("{name}.psd"),
            kind: ConeKind::Psd { block: id },
            rows,
        });
        PsdVar(id)
    }

    pub fn add_hermitian_psd(&mut self, name: impl Into<String>, dim: usize) -> PsdVar {
        self.add_psd(name, PsdKind::Hermitian, dim)
    }

    pub fn psd_dim(&self, w: PsdVar) -> usize {
        self.blocks[w.0].dim
    }

    /// `Re Tr(C·X)` as an affine expression in the block coordinates. `C`
    /// must be Hermitian (only its Hermitian part contributes).
    pub fn trace_with(&self, w: PsdVar, c: &DMatrix<Complex64>) -> AffExpr {
        let b = &self.blocks[w.0];
        let mut e = AffExpr::zero();
        for (a, basis) in b.basis.iter().enumerate() {
            let mut v = 0.0;
            for &(r, s, k) in &basis.entries {
                v += (k * c[(s, r)]).re;
            }
            if v != 0.0 {
                e.add_raw(b.offset + a, v);
            }
        }
        e
    }

    /// `Tr(X)`.
    pub fn trace(&self, w: PsdVar) -> AffExpr {
        let b = &self.blocks[w.0];
        let mut e = AffExpr::zero();
        for p in 0..b.dim {
            e.add_raw(b.offset + p, 1.0);
        }
        e
    }

    pub fn minimize(&mut self, obj: AffExpr) {
        self.objective = obj;
    }

    pub fn maximize(&mut self, obj: AffExpr) {
        self.objective = obj.scaled(-1.0);
    }

    /// `lhs ≤ rhs`.
    pub fn add_le(&mut self, name: impl Into<String>, lhs: AffExpr, rhs: AffExpr) {
        self.add_nonneg(name, rhs.minus(&lhs));
    }

    /// `lhs ≥ rhs`.
    pub fn add_ge(&mut self, name: impl Into<String>, lhs: AffExpr, rhs: AffExpr) {
        self.add_nonneg(name, lhs.minus(&rhs));
    }

    /// `e ≥ 0`.
    pub fn add_nonneg(&mut self, name: impl Into<String>, e: AffExpr) {
        self.constraints.push(Constraint {
            name: name.into(),
            kind: ConeKind::NonNeg,
            rows: vec![e.normalized()],
        });
    }

    pub fn add_eq(&mut self, name: impl Into<String>, lhs: AffExpr, rhs: AffExpr) {
        self.equalities
            .push((name.into(), lhs.minus(&rhs).normalized()));
    }

    /// `‖u‖₂ ≤ t`.
    pub fn add_soc(&mut self, name: impl Into<String>, t: AffExpr, u: Vec<AffExpr>) {
        let mut rows = vec![t.normalized()];
        rows.extend(u.into_iter().map(|e| e.normalized()));
        self.constraints.push(Constraint {
            name: name.into(),
            kind: ConeKind::Soc,
            rows,
        });
    }

    /// `x·y ≥ 1`, `x, y > 0`, as a second-order cone.
    pub fn add_hyperbolic(&mut self, name: impl Into<String>, x: AffExpr, y: AffExpr) {
        let t = x.clone().plus(&y);
        let d = x.minus(&y);
        self.add_soc(name, t, vec![AffExpr::constant(2.0), d]);
    }

    /// `Σ γ_i·ln(args_i) + rest ≥ 0` with every `γ_i > 0`.
    pub fn add_log_ge(&mut self, name: impl Into<String>, terms: Vec<(f64, AffExpr)>, rest: AffExpr) {
        let gammas: Vec<f64> = terms.iter().map(|t| t.0).collect();
        assert!(gammas.iter().all(|&g| g > 0.0), "log weights must be positive");
        let mut rows: Vec<AffExpr> = terms.into_iter().map(|t| t.1.normalized()).collect();
        rows.push(rest.normalized());
        self.constraints.push(Constraint {
            name: name.into(),
            kind: ConeKind::LogHypo { gammas },
            rows,
        });
    }

    pub fn set_start(&mut self, v: Var, value: f64) {
        self.start[v.0] = Some(value);
    }

    pub fn set_psd_start(&mut self, w: PsdVar, m: &DMatrix<Complex64>) {
        let b = &self.blocks[w.0];
        let coords = b.coords_of(m);
        let off = b.offset;
        for (a, c) in coords.into_iter().enumerate() {
            self.start[off + a] = Some(c);
        }
    }

    /// Starting point: user hints where given, bound midpoints for scalars,
    /// identity for PSD blocks.
    pub(crate) fn initial_point(&self) -> Vec<f64> {
        let mut x = vec![0.0; self.n];
        for (i, b) in self.bounds.iter().enumerate() {
            x[i] = match *b {
                (Some(l), Some(h)) => 0.5 * (l + h),
                (Some(l), None) => l + 1.0,
                (None, Some(h)) => h - 1.0,
                (None, None) => 0.0,
            };
        }
        for b in &self.blocks {
            for p in 0..b.dim {
                x[b.offset + p] = 1.0;
            }
        }
        for (i, s) in self.start.iter().enumerate() {
            if let Some(v) = s {
                x[i] = *v;
            }
        }
        x
    }
}
