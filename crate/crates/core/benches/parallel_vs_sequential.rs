use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ddctl_core::lti::{uniform_times, StateSpace};
use ddctl_core::numkit::{spectral_abscissa, Mat, C64};
use ddctl_core::par::{map_slice, Parallelism};
use ddctl_core::pipeline::{
    assemble_batches, aux_from_filter, default_informativity, filter_dataset, DataBatches, Experiment, FilterBank,
};
use ddctl_core::randsys::{multisine, uniform_index_plant, uniform_vector};
use ddctl_core::realization::{companion_tuning, FilterGains};
use ddctl_core::synthesis::{solve_design_lmi, LmiOptions};

const MODES: [(&str, Parallelism); 2] = [("parallel", Parallelism::Auto), ("sequential", Parallelism::Sequential)];

fn problem(seed: u64, p: usize, m: usize, nu: usize) -> (DataBatches, usize) {
    let raw = uniform_index_plant(seed, p, m, nu);
    let n = raw.n();
    let shift = (spectral_abscissa(&raw.a).unwrap() - 0.1).max(0.0);
    let sys = StateSpace::strictly_proper(&raw.a - Mat::identity(n, n) * shift, raw.b, raw.c).unwrap();
    let poles: Vec<C64> = (0..nu).map(|k| C64::new(-1.0 - 0.6 * k as f64, 0.0)).collect();
    let (lam, ell) = companion_tuning(&poles).unwrap();
    let g = FilterGains::mimo_uniform(p, m, lam, ell).unwrap();
    let aux = aux_from_filter(&g, 1.0).unwrap();
    let dim = aux.dim();
    let bank = FilterBank::stabilization(g, aux);
    let need = bank.required_rank();
    let f_lo = std::f64::consts::TAU / 20.0;
    let exp = Experiment {
        plant: sys,
        x0: uniform_vector(seed, n) * 3.0,
        excitation: multisine(seed, m, (n + need) / (2 * m) + 2, f_lo, f_lo + 6.0),
        disturbance: None,
    };
    let samples = 6 * need;
    let tr = filter_dataset(&exp, &bank, &uniform_times(20.0, samples)).unwrap();
    let b = assemble_batches(&tr, samples, &bank).unwrap();
    assert!(default_informativity(&b).unwrap().informative);
    (b, dim)
}

fn lmi_solve(c: &mut Criterion) {
    let mut group = c.benchmark_group("design_lmi");
    group.sample_size(10);
    for (p, m, nu) in [(2, 2, 2), (3, 3, 2)] {
        let (b, dim) = problem(7, p, m, nu);
        for (label, mode) in MODES {
            let opts = LmiOptions { parallelism: mode, ..Default::default() };
            group.bench_with_input(BenchmarkId::new(label, format!("p{p}m{m}nu{nu}")), &b, |bench, b| {
                bench.iter(|| solve_design_lmi(b, dim, &opts).unwrap())
            });
        }
    }
    group.finish();
}

fn seed_sweep(c: &mut Criterion) {
    let mut group = c.benchmark_group("seed_sweep");
    group.sample_size(10);
    let seeds: Vec<u64> = (0..16).collect();
    for (label, mode) in MODES {
        group.bench_function(label, |bench| {
            bench.iter(|| {
                map_slice(&seeds, mode, |&s| {
                    let (b, dim) = problem(s, 2, 1, 2);
                    let opts = LmiOptions { parallelism: Parallelism::Sequential, ..Default::default() };
                    solve_design_lmi(&b, dim, &opts).unwrap().is_feasible()
                })
            })
        });
    }
    group.finish();
}

criterion_group!(benches, lmi_solve, seed_sweep);
criterion_main!(benches);
