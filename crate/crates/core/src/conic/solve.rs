//! Primal log-barrier interior-point method.
//!
//! The Newton system is assembled as a block-diagonal matrix (one dense block
//! per group of variables linked by local constraints) plus low-rank terms for
//! constraints that would merge groups past a size cap, plus an arrow for
//! global variables (the phase-I shift). Blocks are factored independently and
//! the low-rank part is folded in with the Woodbury identity, which keeps
//! per-slot problems with a handful of coupling rows cheap.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, LU};

use super::cones::{self, BarrierEval};
use num_complex::Complex64;

use super::problem::{AffExpr, ConeKind, ConicProblem, PsdBlock, PsdVar, Var};

/// Newton steps allowed for one centering before it counts as stalled.
const STALL_STEPS: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverSettings {
    /// Maximum constraint violation accepted at termination.
    pub tol_feas: f64,
    /// Relative duality-gap target.
    pub tol_obj: f64,
    /// Newton-step budget over both phases.
    pub max_iters: usize,
    /// Barrier growth factor.
    pub mu: f64,
    /// Largest dense block before linking constraints go low-rank.
    pub dense_cap: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            tol_feas: 1e-6,
            tol_obj: 1e-6,
            max_iters: 800,
            mu: 20.0,
            dense_cap: 320,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    MaxIters,
}

#[derive(Clone, Debug)]
pub struct ConicSolution {
    pub status: SolveStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    /// Lower bound on the optimal value (objective minus barrier gap).
    pub bound: f64,
    pub max_violation: f64,
    pub iterations: usize,
    /// Most-violated constraint for infeasible/max-iter exits.
    pub witness: Option<String>,
}

impl ConicSolution {
    pub fn value(&self, v: Var) -> f64 {
        self.x[v.index()]
    }

    pub fn eval(&self, e: &AffExpr) -> f64 {
        e.eval(&self.x)
    }

    /// The solved matrix of block `w`.
    pub fn matrix(&self, prob: &ConicProblem, w: PsdVar) -> DMatrix<Complex64> {
        let b = &prob.blocks[w.0];
        b.assemble(&self.x[b.offset..b.offset + b.len()])
    }

    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }
}

/// Working copy of a constraint with rows split into local and global parts.
struct WorkCon {
    origin: Option<usize>,
    kind: ConeKind,
    block: Option<usize>,
    rows: Vec<AffExpr>,
    coupling: bool,
    comp: usize,
}

struct Structure {
    n: usize,
    is_global: Vec<bool>,
    globals: Vec<usize>,
    comps: Vec<Vec<usize>>,
    pos_of: Vec<usize>,
}

struct Phase<'a> {
    prob: &'a ConicProblem,
    cons: Vec<WorkCon>,
    eq: Vec<AffExpr>,
    c: Vec<f64>,
    st: Structure,
    nu: f64,
}

fn block_of<'a>(prob: &'a ConicProblem, kind: &ConeKind) -> Option<&'a PsdBlock> {
    match kind {
        ConeKind::Psd { block } => Some(&prob.blocks[*block]),
        _ => None,
    }
}

fn eval_rows(rows: &[AffExpr], x: &[f64]) -> Vec<f64> {
    rows.iter().map(|r| r.eval(x)).collect()
}

struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }
    fn find(&mut self, mut i: usize) -> usize {
        while self.parent[i] != i {
            self.parent[i] = self.parent[self.parent[i]];
            i = self.parent[i];
        }
        i
    }
    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        let (big, small) = if self.size[ra] >= self.size[rb] { (ra, rb) } else { (rb, ra) };
        self.parent[small] = big;
        self.size[big] += self.size[small];
    }
}

impl<'a> Phase<'a> {
    fn new(prob: &'a ConicProblem, cons: Vec<WorkCon>, c: Vec<f64>, n: usize, globals: Vec<usize>, cap: usize) -> Self {
        let mut cons = cons;
        let mut is_global = vec![false; n];
        for &g in &globals {
            is_global[g] = true;
        }
        let mut uf = UnionFind::new(n);
        let supports: Vec<Vec<usize>> = cons
            .iter()
            .map(|c| {
                let mut s: Vec<usize> = c
                    .rows
                    .iter()
                    .flat_map(|r| r.terms.iter().map(|t| t.0))
                    .filter(|&i| !is_global[i])
                    .collect();
                s.sort_unstable();
                s.dedup();
                s
            })
            .collect();
        // large constraints first: they define the natural blocks, and short
        // rows that link many blocks end up as the coupling ones
        let mut order: Vec<usize> = (0..cons.len()).collect();
        order.sort_by_key(|&i| std::cmp::Reverse(supports[i].len()));
        let cap = cap.max(
            prob.blocks.iter().map(|b| b.len()).max().unwrap_or(0) * 2 + 16,
        );
        for &ci in &order {
            let sup = &supports[ci];
            if sup.is_empty() {
                continue;
            }
            let mut roots: Vec<usize> = sup.iter().map(|&v| uf.find(v)).collect();
            roots.sort_unstable();
            roots.dedup();
            let total: usize = roots.iter().map(|&r| uf.size[r]).sum();
            if roots.len() > 1 && total > cap {
                cons[ci].coupling = true;
                continue;
            }
            for w in roots.windows(2) {
                uf.union(w[0], w[1]);
            }
        }
        let mut comp_id = vec![usize::MAX; n];
        let mut comps: Vec<Vec<usize>> = Vec::new();
        let mut comp_of = vec![usize::MAX; n];
        let mut pos_of = vec![usize::MAX; n];
        for v in 0..n {
            if is_global[v] {
                continue;
            }
            let r = uf.find(v);
            if comp_id[r] == usize::MAX {
                comp_id[r] = comps.len();
                comps.push(Vec::new());
            }
            let cid = comp_id[r];
            comp_of[v] = cid;
            pos_of[v] = comps[cid].len();
            comps[cid].push(v);
        }
        for (ci, con) in cons.iter_mut().enumerate() {
            if !con.coupling {
                con.comp = supports[ci].first().map(|&v| comp_of[v]).unwrap_or(usize::MAX);
            }
        }
        let nu = cons
            .iter()
            .map(|c| cones::degree(&c.kind, block_of(prob, &c.kind)))
            .sum();
        let eq = prob.equalities.iter().map(|e| e.1.clone()).collect();
        Self {
            prob,
            cons,
            eq,
            c,
            st: Structure {
                n,
                is_global,
                globals,
                comps,
                pos_of,
            },
            nu,
        }
    }

    fn objective(&self, x: &[f64]) -> f64 {
        self.c.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    fn barrier_value(&self, x: &[f64]) -> Option<f64> {
        let mut v = 0.0;
        for c in &self.cons {
            let y = eval_rows(&c.rows, x);
            v += cones::value(&c.kind, &y, c.block.map(|b| &self.prob.blocks[b]))?;
        }
        Some(v)
    }

    fn eq_residual(&self, x: &[f64]) -> DVector<f64> {
        DVector::from_iterator(self.eq.len(), self.eq.iter().map(|e| e.eval(x)))
    }

    /// Gradient of `t·cᵀx + Φ(x)` and the factored Hessian.
    fn assemble(&self, x: &[f64], t: f64) -> Option<(DVector<f64>, Newton<'_>)> {
        let n = self.st.n;
        let mut grad = DVector::from_iterator(n, self.c.iter().map(|c| c * t));
        let mut blocks: Vec<DMatrix<f64>> = self
            .st
            .comps
            .iter()
            .map(|c| DMatrix::zeros(c.len(), c.len()))
            .collect();
        let ng = self.st.globals.len();
        let gpos = |i: usize| self.st.globals.iter().position(|&g| g == i).unwrap();
        let mut h_lg = DMatrix::<f64>::zeros(n, ng);
        let mut h_gg = DMatrix::<f64>::zeros(ng, ng);
        let mut coupling: Vec<(Vec<Vec<(usize, f64)>>, DMatrix<f64>)> = Vec::new();

        for con in &self.cons {
            let y = eval_rows(&con.rows, x);
            let BarrierEval { grad: gy, hess: k, .. } =
                cones::evaluate(&con.kind, &y, con.block.map(|b| &self.prob.blocks[b]))?;
            let r = con.rows.len();
            let mut local: Vec<Vec<(usize, f64)>> = Vec::with_capacity(r);
            let mut glob: Vec<Vec<(usize, f64)>> = Vec::with_capacity(r);
            for (i, row) in con.rows.iter().enumerate() {
                let mut lo = Vec::new();
                let mut gl = Vec::new();
                for &(v, cf) in &row.terms {
                    grad[v] += gy[i] * cf;
                    if self.st.is_global[v] {
                        gl.push((gpos(v), cf));
                    } else {
                        lo.push((v, cf));
                    }
                }
                local.push(lo);
                glob.push(gl);
            }
            // global-global and local-global parts
            for i in 0..r {
                for j in 0..r {
                    let kij = k[(i, j)];
                    if kij == 0.0 {
                        continue;
                    }
                    for &(gj, cj) in &glob[j] {
                        for &(gi, ci) in &glob[i] {
                            h_gg[(gi, gj)] += kij * ci * cj;
                        }
                        for &(v, ci) in &local[i] {
                            h_lg[(v, gj)] += kij * ci * cj;
                        }
                    }
                }
            }
            if con.coupling {
                coupling.push((local, k));
            } else if con.comp != usize::MAX {
                let blk = &mut blocks[con.comp];
                for i in 0..r {
                    if local[i].is_empty() {
                        continue;
                    }
                    for j in 0..r {
                        let kij = k[(i, j)];
                        if kij == 0.0 || local[j].is_empty() {
                            continue;
                        }
                        for &(vi, ci) in &local[i] {
                            let pi = self.st.pos_of[vi];
                            for &(vj, cj) in &local[j] {
                                blk[(pi, self.st.pos_of[vj])] += kij * ci * cj;
                            }
                        }
                    }
                }
            }
        }
        let newton = Newton::factor(&self.st, blocks, coupling, h_lg, h_gg)?;
        Some((grad, newton))
    }
}

/// Factored Newton matrix with `solve` for arbitrary right-hand sides.
struct Newton<'s> {
    st: &'s Structure,
    chol: Vec<Cholesky<f64, Dyn>>,
    // Woodbury pieces
    // H + VVᵀ with V = U·chol(K), so the capacitance matrix stays symmetric
    v_cols: Vec<Vec<(usize, f64)>>,
    z: DMatrix<f64>,
    m_chol: Option<Cholesky<f64, Dyn>>,
    // arrow pieces
    y_glob: DMatrix<f64>,
    schur_g: Option<LU<f64, Dyn, Dyn>>,
    z_arrow_c: Option<DMatrix<f64>>,
}

fn robust_cholesky(mut m: DMatrix<f64>) -> Option<Cholesky<f64, Dyn>> {
    let n = m.nrows();
    if n == 0 {
        return Cholesky::new(m);
    }
    let scale = (0..n).map(|i| m[(i, i)].abs()).fold(0.0, f64::max).max(1e-300);
    if let Some(c) = Cholesky::new(m.clone()) {
        return Some(c);
    }
    let mut reg = 1e-12 * scale.max(1.0);
    for _ in 0..12 {
        for i in 0..n {
            m[(i, i)] += reg;
        }
        if let Some(c) = Cholesky::new(m.clone()) {
            return Some(c);
        }
        reg *= 10.0;
    }
    None
}

impl<'s> Newton<'s> {
    fn factor(
        st: &'s Structure,
        blocks: Vec<DMatrix<f64>>,
        coupling: Vec<(Vec<Vec<(usize, f64)>>, DMatrix<f64>)>,
        h_lg: DMatrix<f64>,
        h_gg: DMatrix<f64>,
    ) -> Option<Newton<'s>> {
        let mut chol = Vec::with_capacity(blocks.len());
        for b in blocks {
            chol.push(robust_cholesky(b)?);
        }
        let mut nw = Newton {
            st,
            chol,
            v_cols: Vec::new(),
            z: DMatrix::zeros(st.n, 0),
            m_chol: None,
            y_glob: DMatrix::zeros(st.n, 0),
            schur_g: None,
            z_arrow_c: None,
        };
        for (rows, k) in coupling {
            let l = robust_cholesky(k)?;
            let l = l.l();
            for j in 0..rows.len() {
                let mut col: Vec<(usize, f64)> = Vec::new();
                for (i, row) in rows.iter().enumerate().skip(j) {
                    let lij = l[(i, j)];
                    if lij == 0.0 {
                        continue;
                    }
                    for &(v, c) in row {
                        match col.iter_mut().find(|e| e.0 == v) {
                            Some(e) => e.1 += c * lij,
                            None => col.push((v, c * lij)),
                        }
                    }
                }
                nw.v_cols.push(col);
            }
        }
        let r = nw.v_cols.len();
        if r > 0 {
            let mut z = DMatrix::zeros(st.n, r);
            for (j, col) in nw.v_cols.iter().enumerate() {
                let mut v = DVector::zeros(st.n);
                for &(i, c) in col {
                    v[i] += c;
                }
                let s = nw.block_solve(&v);
                z.set_column(j, &s);
            }
            // M = I + VᵀH⁻¹V
            let mut m = DMatrix::identity(r, r);
            for (i, col) in nw.v_cols.iter().enumerate() {
                for j in 0..r {
                    m[(i, j)] += col.iter().map(|&(v, c)| c * z[(v, j)]).sum::<f64>();
                }
            }
            let m = (&m + m.transpose()) * 0.5;
            nw.z = z;
            nw.m_chol = Some(robust_cholesky(m)?);
        }
        let ng = st.globals.len();
        if ng > 0 {
            let mut y = DMatrix::zeros(st.n, ng);
            for g in 0..ng {
                let col = h_lg.column(g).into_owned();
                y.set_column(g, &nw.local_solve(&col)?);
            }
            let mut s = h_gg.clone();
            s -= h_lg.transpose() * &y;
            nw.y_glob = y;
            nw.schur_g = Some(s.lu());
            nw.z_arrow_c = Some(h_lg);
        }
        Some(nw)
    }

    fn block_solve(&self, v: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.st.n);
        for (ci, comp) in self.st.comps.iter().enumerate() {
            let rhs = DVector::from_iterator(comp.len(), comp.iter().map(|&i| v[i]));
            let s = self.chol[ci].solve(&rhs);
            for (p, &i) in comp.iter().enumerate() {
                out[i] = s[p];
            }
        }
        out
    }

    /// `H_LL⁻¹ v` on local coordinates (global entries of `v` ignored).
    fn local_solve(&self, v: &DVector<f64>) -> Option<DVector<f64>> {
        let y = self.block_solve(v);
        let Some(mc) = &self.m_chol else {
            return Some(y);
        };
        let r = self.v_cols.len();
        let w = DVector::from_iterator(
            r,
            self.v_cols.iter().map(|col| col.iter().map(|&(i, c)| c * y[i]).sum()),
        );
        let q = mc.solve(&w);
        Some(y - &self.z * q)
    }

    fn solve(&self, v: &DVector<f64>) -> Option<DVector<f64>> {
        let ng = self.st.globals.len();
        if ng == 0 {
            return self.local_solve(v);
        }
        let c = self.z_arrow_c.as_ref().unwrap();
        let a0 = self.local_solve(v)?;
        let rg = DVector::from_iterator(ng, self.st.globals.iter().map(|&g| v[g]));
        let rhs = rg - c.transpose() * &a0;
        let b = self.schur_g.as_ref().unwrap().solve(&rhs)?;
        let mut out = a0 - &self.y_glob * &b;
        for (k, &g) in self.st.globals.iter().enumerate() {
            out[g] = b[k];
        }
        Some(out)
    }
}

#[derive(Debug)]
enum Center {
    Converged,
    Stopped,
    MaxIters,
    Failed,
}

impl<'a> Phase<'a> {
    fn in_domain(&self, x: &[f64]) -> bool {
        self.cons.iter().all(|c| {
            let y = eval_rows(&c.rows, x);
            cones::in_domain(&c.kind, &y, c.block.map(|b| &self.prob.blocks[b]))
        })
    }

    fn merit(&self, x: &[f64], t: f64) -> Option<f64> {
        Some(t * self.objective(x) + self.barrier_value(x)?)
    }

    fn center(&self, x: &mut [f64], t: f64, iters: &mut usize, max_iters: usize, stop: &dyn Fn(&[f64]) -> bool) -> Center {
        let n = self.st.n;
        let p = self.eq.len();
        let mut local = 0usize;
        loop {
            if *iters >= max_iters {
                return Center::MaxIters;
            }
            local += 1;
            let Some((g, nw)) = self.assemble(x, t) else {
                return Center::Failed;
            };
            let Some(hg) = nw.solve(&g) else {
                return Center::Failed;
            };
            let rp = self.eq_residual(x);
            let eq_ok = rp.amax() <= 1e-10 * (1.0 + x.iter().fold(0.0f64, |m, v| m.max(v.abs())));
            let dx = if p == 0 {
                -hg
            } else {
                let mut hat = DMatrix::zeros(n, p);
                let mut amat = DMatrix::zeros(p, n);
                for (k, e) in self.eq.iter().enumerate() {
                    let mut col = DVector::zeros(n);
                    for &(i, c) in &e.terms {
                        col[i] += c;
                        amat[(k, i)] += c;
                    }
                    let Some(sol) = nw.solve(&col) else {
                        return Center::Failed;
                    };
                    hat.set_column(k, &sol);
                }
                let sa = &amat * &hat;
                let rhs = &rp - &amat * &hg;
                let Some(w) = sa.lu().solve(&rhs) else {
                    return Center::Failed;
                };
                -(hg + hat * w)
            };
            let slope = g.dot(&dx);
            let lambda2 = -slope;
            if local > STALL_STEPS {
                // ill-conditioned: accept an approximate center or give up
                return if eq_ok && lambda2 * 0.5 <= 1e-3 { Center::Converged } else { Center::Failed };
            }
            if lambda2 < -1e-10 {
                // not a descent direction: the factorization lost definiteness
                return Center::Failed;
            }
            if eq_ok && lambda2 * 0.5 <= 1e-10 {
                return Center::Converged;
            }
            let mut alpha = 1.0;
            let mut trial: Vec<f64> = x.to_vec();
            let mut ok = false;
            for _ in 0..80 {
                for i in 0..n {
                    trial[i] = x[i] + alpha * dx[i];
                }
                if self.in_domain(&trial) {
                    ok = true;
                    break;
                }
                alpha *= 0.5;
            }
            if !ok {
                return Center::Failed;
            }
            if eq_ok {
                let Some(f0) = self.merit(x, t) else {
                    return Center::Failed;
                };
                let slack = 1e-13 * f0.abs().max(1.0);
                let mut accepted = false;
                for _ in 0..60 {
                    if let Some(f1) = self.merit(&trial, t) {
                        if f1 <= f0 + 0.25 * alpha * slope + slack {
                            accepted = true;
                            break;
                        }
                    }
                    alpha *= 0.5;
                    for i in 0..n {
                        trial[i] = x[i] + alpha * dx[i];
                    }
                }
                if !accepted {
                    // no progress possible at working precision
                    return Center::Converged;
                }
            }
            x.copy_from_slice(&trial);
            *iters += 1;
            if stop(x) {
                return Center::Stopped;
            }
        }
    }

    /// Smallest interior margin over the original constraints, with its name.
    fn worst(&self, x: &[f64]) -> (f64, Option<usize>) {
        let mut worst = (f64::INFINITY, None);
        for c in &self.cons {
            let y = eval_rows(&c.rows, x);
            let m = cones::margin(&c.kind, &y, c.block.map(|b| &self.prob.blocks[b]));
            if m < worst.0 {
                worst = (m, c.origin);
            }
        }
        worst
    }
}

fn base_constraints(prob: &ConicProblem) -> Vec<WorkCon> {
    prob.constraints
        .iter()
        .enumerate()
        .map(|(i, c)| WorkCon {
            origin: Some(i),
            block: match c.kind {
                ConeKind::Psd { block } => Some(block),
                _ => None,
            },
            kind: c.kind.clone(),
            rows: c.rows.clone(),
            coupling: false,
            comp: usize::MAX,
        })
        .collect()
}

/// Relax every constraint by the shift variable at index `s`.
fn shifted(cons: &[WorkCon], prob: &ConicProblem, s: usize) -> Vec<WorkCon> {
    cons.iter()
        .map(|c| {
            let mut rows = c.rows.clone();
            match &c.kind {
                ConeKind::NonNeg | ConeKind::Soc => rows[0].add_raw(s, 1.0),
                ConeKind::LogHypo { gammas } => rows[gammas.len()].add_raw(s, 1.0),
                ConeKind::Psd { block } => {
                    for p in 0..prob.blocks[*block].dim {
                        rows[p].add_raw(s, 1.0);
                    }
                }
            }
            WorkCon {
                origin: c.origin,
                kind: c.kind.clone(),
                block: c.block,
                rows,
                coupling: false,
                comp: usize::MAX,
            }
        })
        .collect()
}

fn witness_name(prob: &ConicProblem, origin: Option<usize>, margin: f64) -> String {
    match origin {
        Some(i) => format!("{} (margin {:.3e})", prob.constraints[i].name, margin),
        None => format!("<internal> (margin {margin:.3e})"),
    }
}

enum PhaseOne {
    Feasible(Vec<f64>),
    Infeasible(String),
    MaxIters(String),
}

/// Find a strictly feasible point for `cons` starting from `x0`.
fn phase_one(prob: &ConicProblem, cons: &[WorkCon], x0: &[f64], set: &SolverSettings, iters: &mut usize) -> PhaseOne {
    let n = prob.n;
    let probe = Phase::new(prob, base_like(cons), vec![0.0; n], n, Vec::new(), set.dense_cap);
    let (worst, _) = probe.worst(x0);
    let s0 = (-worst).max(0.0) + 0.1 * (-worst).abs().max(1.0);
    let lb = s0.max(1.0);
    let mut relaxed = shifted(cons, prob, n);
    relaxed.push(WorkCon {
        origin: None,
        kind: ConeKind::NonNeg,
        block: None,
        rows: vec![AffExpr {
            terms: vec![(n, 1.0)],
            constant: lb,
        }],
        coupling: false,
        comp: usize::MAX,
    });
    let mut c = vec![0.0; n + 1];
    c[n] = 1.0;
    let ph = Phase::new(prob, relaxed, c, n + 1, vec![n], set.dense_cap);
    let mut x: Vec<f64> = x0.to_vec();
    x.push(s0);
    let eq_ok = |x: &[f64]| {
        prob.equalities.iter().all(|e| e.1.eval(x).abs() <= 1e-9 * (1.0 + e.1.constant.abs()))
    };
    // any strictly feasible point will do; some restrictions have only a
    // sliver of interior
    let stop = |x: &[f64]| x[n] < 0.0 && eq_ok(x);
    let mut t = 1.0 / lb;
    loop {
        let before = *iters;
        let out = ph.center(&mut x, t, iters, set.max_iters, &stop);
        let s = x[n];
        log::trace!("phase one t={t:e} s={s:e} steps={} {:?}", *iters - before, out);
        let finish = |x: &[f64]| {
            let (m, o) = probe.worst(&x[..n]);
            witness_name(prob, o, m)
        };
        match out {
            Center::Stopped => return PhaseOne::Feasible(x[..n].to_vec()),
            Center::MaxIters => return PhaseOne::MaxIters(finish(&x)),
            Center::Failed => {
                if s < 0.0 && eq_ok(&x) {
                    return PhaseOne::Feasible(x[..n].to_vec());
                }
                return PhaseOne::MaxIters(finish(&x));
            }
            Center::Converged => {
                let gap = ph.nu / t;
                if s < 0.0 && eq_ok(&x) {
                    return PhaseOne::Feasible(x[..n].to_vec());
                }
                if s - gap > 0.0 || gap < 1e-3 * set.tol_feas {
                    return PhaseOne::Infeasible(finish(&x));
                }
            }
        }
        t *= set.mu;
    }
}

fn base_like(cons: &[WorkCon]) -> Vec<WorkCon> {
    cons.iter()
        .map(|c| WorkCon {
            origin: c.origin,
            kind: c.kind.clone(),
            block: c.block,
            rows: c.rows.clone(),
            coupling: false,
            comp: usize::MAX,
        })
        .collect()
}

/// Solve `prob` to the requested tolerances.
pub fn solve(prob: &ConicProblem, set: &SolverSettings) -> ConicSolution {
    let n = prob.n;
    let base = base_constraints(prob);
    let mut x = prob.initial_point();
    let mut iters = 0usize;
    let fail = |status, x: Vec<f64>, w: String, iters| ConicSolution {
        status,
        objective: prob.objective.eval(&x),
        bound: f64::NEG_INFINITY,
        max_violation: f64::INFINITY,
        x,
        iterations: iters,
        witness: Some(w),
    };

    let probe = Phase::new(prob, base_like(&base), vec![0.0; n], n, Vec::new(), set.dense_cap);
    if !probe.in_domain(&x) {
        // log arguments must be positive before the shifted problem is defined
        let needs_domain = base.iter().any(|c| match &c.kind {
            ConeKind::LogHypo { gammas } => c.rows[..gammas.len()].iter().any(|r| r.eval(&x) <= 0.0),
            _ => false,
        });
        if needs_domain {
            let mut dom = Vec::new();
            for c in &base {
                match &c.kind {
                    ConeKind::LogHypo { gammas } => {
                        for r in &c.rows[..gammas.len()] {
                            dom.push(WorkCon {
                                origin: c.origin,
                                kind: ConeKind::NonNeg,
                                block: None,
                                rows: vec![r.clone()],
                                coupling: false,
                                comp: usize::MAX,
                            });
                        }
                    }
                    _ => dom.push(WorkCon {
                        origin: c.origin,
                        kind: c.kind.clone(),
                        block: c.block,
                        rows: c.rows.clone(),
                        coupling: false,
                        comp: usize::MAX,
                    }),
                }
            }
            match phase_one(prob, &dom, &x, set, &mut iters) {
                PhaseOne::Feasible(p) => x = p,
                PhaseOne::Infeasible(w) => return fail(SolveStatus::Infeasible, x, w, iters),
                PhaseOne::MaxIters(w) => return fail(SolveStatus::MaxIters, x, w, iters),
            }
        }
        if !probe.in_domain(&x) {
            match phase_one(prob, &base, &x, set, &mut iters) {
                PhaseOne::Feasible(p) => x = p,
                PhaseOne::Infeasible(w) => return fail(SolveStatus::Infeasible, x, w, iters),
                PhaseOne::MaxIters(w) => return fail(SolveStatus::MaxIters, x, w, iters),
            }
        }
    }

    let c: Vec<f64> = {
        let mut c = vec![0.0; n];
        for &(i, v) in &prob.objective.normalized().terms {
            c[i] += v;
        }
        c
    };
    let ph = Phase::new(prob, base, c, n, Vec::new(), set.dense_cap);
    let obj0 = ph.objective(&x);
    let mut t = (ph.nu / (10.0 * obj0.abs().max(1.0))).max(1e-8);
    let no_stop = |_: &[f64]| false;
    let status = loop {
        let before = iters;
        let out = ph.center(&mut x, t, &mut iters, set.max_iters, &no_stop);
        log::trace!("t={t:e} objective={:e} steps={} {:?}", prob.objective.eval(&x), iters - before, out);
        match out {
            Center::Converged | Center::Stopped => {}
            Center::MaxIters => break SolveStatus::MaxIters,
            Center::Failed => break SolveStatus::MaxIters,
        }
        let obj = prob.objective.eval(&x);
        if ph.nu / t <= set.tol_obj * obj.abs().max(1.0) {
            break SolveStatus::Optimal;
        }
        t *= set.mu;
    };
    let (m, o) = ph.worst(&x);
    let eqr = ph.eq_residual(&x).amax();
    let max_violation = (-m).max(0.0).max(eqr);
    let objective = prob.objective.eval(&x);
    let witness = (status != SolveStatus::Optimal).then(|| witness_name(prob, o, m));
    let status = if status == SolveStatus::Optimal && max_violation > set.tol_feas {
        SolveStatus::MaxIters
    } else {
        status
    };
    ConicSolution {
        status,
        x,
        objective,
        bound: objective - ph.nu / t,
        max_violation,
        iterations: iters,
        witness,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn default_solve(p: &ConicProblem) -> ConicSolution {
        solve(p, &SolverSettings::default())
    }

    #[test]
    fn bound_lp() {
        let mut p = ConicProblem::new();
        let x = p.add_var("x", Some(1.0), None);
        p.minimize(x.expr());
        let s = default_solve(&p);
        assert_eq!(s.status, SolveStatus::Optimal);
        assert!((s.value(x) - 1.0).abs() < 1e-6, "{}", s.value(x));
    }

    #[test]
    fn single_constraint_sdp() {
        let mut p = ConicProblem::new();
        let w = p.add_hermitian_psd("W", 2);
        let h = nalgebra::DVector::from_vec(vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0)]);
        let hh = &h * h.adjoint();
        let tr = p.trace(w);
        let th = p.trace_with(w, &hh);
        p.minimize(tr);
        p.add_ge("gain", th, AffExpr::constant(1.0));
        let s = default_solve(&p);
        assert_eq!(s.status, SolveStatus::Optimal);
        assert!((s.objective - 0.5).abs() < 1e-6, "{}", s.objective);
        let m = s.matrix(&p, w);
        let eig = nalgebra::SymmetricEigen::new(m);
        let mut ev: Vec<f64> = eig.eigenvalues.iter().cloned().collect();
        ev.sort_by(|a, b| b.partial_cmp(a).unwrap());
        assert!(ev[1] < 1e-5 * ev[0]);
    }

    #[test]
    fn log_hypograph() {
        let mut p = ConicProblem::new();
        let x = p.add_var("x", Some(0.0), Some(3.0));
        let t = p.add_var("t", None, None);
        // t ≤ log2(1+x)  ⇔  ln(1+x)/ln2 − t ≥ 0
        p.add_log_ge(
            "rate",
            vec![(1.0 / std::f64::consts::LN_2, x.expr().plus_const(1.0))],
            AffExpr::term(t, -1.0),
        );
        p.maximize(t.expr());
        let s = default_solve(&p);
        assert_eq!(s.status, SolveStatus::Optimal);
        assert!((s.value(t) - 2.0).abs() < 1e-5, "{}", s.value(t));
    }

    #[test]
    fn infeasible_reports_witness() {
        let mut p = ConicProblem::new();
        let x = p.add_var("x", Some(0.0), Some(1.0));
        p.add_ge("too_big", x.expr(), AffExpr::constant(2.0));
        p.minimize(x.expr());
        let s = default_solve(&p);
        assert_eq!(s.status, SolveStatus::Infeasible);
        assert!(s.witness.is_some());
    }

    #[test]
    fn equality_and_soc() {
        // min x+y s.t. ‖(x,y)‖ ≤ 1, x = y  →  x = y = −1/√2
        let mut p = ConicProblem::new();
        let x = p.add_var("x", Some(-5.0), Some(5.0));
        let y = p.add_var("y", Some(-5.0), Some(5.0));
        p.add_soc("ball", AffExpr::constant(1.0), vec![x.expr(), y.expr()]);
        p.add_eq("diag", x.expr(), y.expr());
        p.minimize(x.expr().plus(&y.expr()));
        let s = default_solve(&p);
        assert_eq!(s.status, SolveStatus::Optimal);
        let r = -std::f64::consts::FRAC_1_SQRT_2;
        assert!((s.value(x) - r).abs() < 1e-5 && (s.value(y) - r).abs() < 1e-5, "{:?}", s.x);
    }

    #[test]
    fn phase_one_from_infeasible_start() {
        let mut p = ConicProblem::new();
        let x = p.add_var("x", None, None);
        let y = p.add_var("y", None, None);
        p.add_ge("a", x.expr().plus(&y.expr()), AffExpr::constant(10.0));
        p.add_le("b", x.expr(), AffExpr::constant(7.0));
        p.add_le("c", y.expr(), AffExpr::constant(4.0));
        p.minimize(x.expr().scaled(2.0).plus(&y.expr()));
        let s = default_solve(&p);
        assert_eq!(s.status, SolveStatus::Optimal);
        assert!((s.objective - 16.0).abs() < 1e-5, "{}", s.objective);
    }

    #[test]
    fn deterministic() {
        let build = || {
            let mut p = ConicProblem::new();
            let w = p.add_hermitian_psd("W", 3);
            let tr = p.trace(w);
            let mut c = DMatrix::<Complex64>::identity(3, 3);
            c[(0, 1)] = Complex64::new(0.3, 0.2);
            c[(1, 0)] = Complex64::new(0.3, -0.2);
            let g = p.trace_with(w, &c);
            p.add_ge("g", g, AffExpr::constant(1.0));
            p.minimize(tr);
            p
        };
        let a = default_solve(&build());
        let b = default_solve(&build());
        assert_eq!(a.x, b.x);
    }

    #[test]
    fn coupling_via_low_rank() {
        // many small groups joined by one dense row
        let mut p = ConicProblem::new();
        let n = 40;
        let xs: Vec<Var> = (0..n).map(|i| p.add_var(format!("x{i}"), Some(0.0), Some(1.0))).collect();
        let mut sum = AffExpr::zero();
        let mut obj = AffExpr::zero();
        for (i, &x) in xs.iter().enumerate() {
            sum.add_term(x, 1.0);
            obj.add_term(x, 1.0 + i as f64 * 0.01);
        }
        p.add_ge("total", sum, AffExpr::constant(10.5));
        p.minimize(obj);
        let set = SolverSettings {
            dense_cap: 4,
            ..SolverSettings::default()
        };
        let s = solve(&p, &set);
        assert_eq!(s.status, SolveStatus::Optimal);
        // cheapest ten at 1, the eleventh at 0.5
        let expect: f64 = (0..10).map(|i| 1.0 + i as f64 * 0.01).sum::<f64>() + 0.5 * 1.10;
        assert!((s.objective - expect).abs() < 1e-5 * expect, "{} vs {expect}", s.objective);
    }
}
