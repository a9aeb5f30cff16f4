use criterion::{black_box, criterion_group, criterion_main, Criterion};

use covaoi::conic::{solve, SolverSettings};
use covaoi::subproblems::{beamforming_sdr_step, solve_aoi_lp, trajectory_sca_step, StepOptions};
use covaoi_bench::{aoi_problem, scenario, single_constraint_sdp, start};

fn conic(c: &mut Criterion) {
    let set = SolverSettings::default();
    for m in [2, 4, 10] {
        let p = single_constraint_sdp(m);
        c.bench_function(&format!("sdp_single_constraint_m{m}"), |b| b.iter(|| solve(black_box(&p), &set)));
    }
    let s = scenario(20, 10);
    let p = aoi_problem(&s);
    c.bench_function("aoi_lp_conic_n20", |b| b.iter(|| solve(black_box(&p), &set)));
}

fn blocks(c: &mut Criterion) {
    let mut g = c.benchmark_group("blocks");
    g.sample_size(10);
    for (n, m) in [(10, 4), (20, 10)] {
        let s = scenario(n, m);
        let (it, ch) = start(&s);
        let opts = StepOptions::default();
        g.bench_function(format!("aoi_lp_closed_n{n}"), |b| {
            b.iter(|| solve_aoi_lp(black_box(&it.rates), &s, &it.serving, Some(&it.q), false))
        });
        g.bench_function(format!("trajectory_step_n{n}_m{m}"), |b| {
            b.iter(|| trajectory_sca_step(&s, &it.aoi, &it.plan, black_box(&it.q), &it.serving, &opts))
        });
        g.bench_function(format!("beamforming_step_n{n}_m{m}"), |b| {
            b.iter(|| beamforming_sdr_step(&s, &it.aoi, &ch, black_box(&it.plan), &it.serving, &opts))
        });
    }
    g.finish();
}

criterion_group!(benches, conic, blocks);
criterion_main!(benches);
