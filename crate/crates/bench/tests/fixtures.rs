use covaoi::conic::{solve, SolveStatus, SolverSettings};
use covaoi_bench::{aoi_problem, scenario, single_constraint_sdp, start};

#[test]
fn fixtures_solve() {
    let p = single_constraint_sdp(4);
    let sol = solve(&p, &SolverSettings::default());
    assert_eq!(sol.status, SolveStatus::Optimal);
    let s = scenario(10, 4);
    let (it, ch) = start(&s);
    assert_eq!((it.q.len(), ch.len()), (10, 10));
    let lp = solve(&aoi_problem(&s), &SolverSettings::default());
    assert_eq!(lp.status, SolveStatus::Optimal);
    assert!((lp.objective - it.aoi.total()).abs() < 1e-4 * it.aoi.total(), "{} {}", lp.objective, it.aoi.total());
}
