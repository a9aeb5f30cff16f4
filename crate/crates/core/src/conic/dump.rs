//! Plain-text rendering of a problem, for debugging.
//!
//! ```text
//! problem <label>
//! vars <n> blocks <k> cones <m> equalities <p>
//! var <index> <name> lo=<f|-> hi=<f|->
//! psd <name> <real|hermitian> dim=<d> offset=<o>
//! minimize <expr>
//! nonneg <name> : <expr>
//! soc <name> : <t> | <u1> | <u2> ...
//! log <name> gammas=<g1,g2,...> : <u1> | ... | <rest>
//! psdcon <name> block=<b>
//! eq <name> : <expr> = 0
//! end
//! ```
//!
//! `<expr>` is a constant followed by signed `coef*x<index>` terms, all in
//! `{:e}` notation, e.g. `1e0 +2.5e-1*x3 -1e0*x7`.

use std::fmt::Write as _;
use std::io;
use std::path::Path;

use super::problem::{AffExpr, ConeKind, ConicProblem, PsdKind};

fn expr(e: &AffExpr) -> String {
    let mut s = format!("{:e}", e.constant);
    for &(i, c) in &e.normalized().terms {
        let sign = if c < 0.0 { '-' } else { '+' };
        let _ = write!(s, " {sign}{:e}*x{i}", c.abs());
    }
    s
}

fn bound(b: Option<f64>) -> String {
    b.map(|v| format!("{v:e}")).unwrap_or_else(|| "-".into())
}

pub fn render(label: &str, p: &ConicProblem) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "problem {label}");
    let _ = writeln!(
        s,
        "vars {} blocks {} cones {} equalities {}",
        p.n,
        p.blocks.len(),
        p.constraints.len(),
        p.equalities.len()
    );
    for i in 0..p.n {
        let (lo, hi) = p.bounds[i];
        let _ = writeln!(s, "var {i} {} lo={} hi={}", p.var_names[i], bound(lo), bound(hi));
    }
    for b in &p.blocks {
        let kind = match b.kind {
            PsdKind::Real => "real",
            PsdKind::Hermitian => "hermitian",
        };
        let _ = writeln!(s, "psd {} {kind} dim={} offset={}", b.name, b.dim, b.offset);
    }
    let _ = writeln!(s, "minimize {}", expr(&p.objective));
    for c in &p.constraints {
        let rows: Vec<String> = c.rows.iter().map(expr).collect();
        let _ = match &c.kind {
            ConeKind::NonNeg => writeln!(s, "nonneg {} : {}", c.name, rows[0]),
            ConeKind::Soc => writeln!(s, "soc {} : {}", c.name, rows.join(" | ")),
            ConeKind::LogHypo { gammas } => {
                let g: Vec<String> = gammas.iter().map(|g| format!("{g:e}")).collect();
                writeln!(s, "log {} gammas={} : {}", c.name, g.join(","), rows.join(" | "))
            }
            ConeKind::Psd { block } => writeln!(s, "psdcon {} block={block}", c.name),
        };
    }
    for (name, e) in &p.equalities {
        let _ = writeln!(s, "eq {name} : {} = 0", expr(e));
    }
    s.push_str("end\n");
    s
}

/// Append the rendered problem to `path`.
pub fn append_to(path: &Path, label: &str, p: &ConicProblem) -> io::Result<()> {
    use std::io::Write;
    let mut f = std::fs::OpenOptions::new().create(true).append(true).open(path)?;
    f.write_all(render(label, p).as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_problem_text() {
        let mut p = ConicProblem::new();
        let x = p.add_var("x", Some(1.0), None);
        p.minimize(x.expr());
        let out = render("t", &p);
        assert_eq!(
            out,
            "problem t\nvars 1 blocks 0 cones 1 equalities 0\nvar 0 x lo=1e0 hi=-\n\
             minimize 0e0 +1e0*x0\nnonneg x.lo : -1e0 +1e0*x0\nend\n"
        );
    }
}
