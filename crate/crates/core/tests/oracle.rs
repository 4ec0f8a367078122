//! Data-driven quantities against the model-based oracle on random plants.

use ddctl_core::lti::{uniform_times, StateSpace};
use ddctl_core::numkit::{spectral_abscissa, Mat, C64};
use ddctl_core::pipeline::{
    assemble_batches, aux_from_filter, data_identity_residual, default_informativity, filter_dataset, Experiment,
    FilterBank,
};
use ddctl_core::randsys::{multisine, uniform_index_plant, uniform_vector};
use ddctl_core::realization::{companion_tuning, solve_pi_h, verify_realization, FilterGains};
use ddctl_core::synthesis::{extract_gain, recover_closed_matrix, solve_design_lmi, LmiOptions};

/// (p, m, nu) with n = p * nu <= 6 and p, m <= 3.
fn shapes() -> Vec<(usize, usize, usize)> {
    let mut v = Vec::new();
    for p in 1..=3 {
        for nu in 1..=(6 / p) {
            for m in 1..=3 {
                v.push((p, m, nu));
            }
        }
    }
    v
}

fn tuning(p: usize, m: usize, nu: usize) -> FilterGains {
    let poles: Vec<C64> = (0..nu).map(|k| C64::new(-1.0 - 0.6 * k as f64, 0.0)).collect();
    let (lam, ell) = companion_tuning(&poles).unwrap();
    FilterGains::mimo_uniform(p, m, lam, ell).unwrap()
}

#[test]
fn random_plants_match_the_oracle() {
    let shapes = shapes();
    let cases = 24;
    let mut worst = [0.0f64; 4];
    for case in 0..cases {
        let (p, m, nu) = shapes[(case * 7) % shapes.len()];
        let seed = 100 + case as u64;
        // shifting A by a multiple of I keeps the indices and controllability;
        // a mildly unstable plant allows a record long enough to separate its modes
        let raw = uniform_index_plant(seed, p, m, nu);
        let n = raw.n();
        let shift = (spectral_abscissa(&raw.a).unwrap() - 0.1).max(0.0);
        let sys = StateSpace::strictly_proper(&raw.a - Mat::identity(n, n) * shift, raw.b, raw.c).unwrap();
        let g = tuning(p, m, nu);
        let pih = solve_pi_h(&sys, &g).unwrap();
        let rep = verify_realization(&sys, &g, &pih).unwrap();
        assert!(pih.max_residual() < 1e-8, "case {case}: residual {:e}", pih.max_residual());
        assert!(rep.transfer_mismatch < 1e-8, "case {case}: transfer {:e}", rep.transfer_mismatch);
        assert!(rep.controllable, "case {case}: lifted plant not controllable");
        assert_eq!(rep.rank_pi, n);

        let aux = aux_from_filter(&g, 1.0).unwrap();
        let bank = FilterBank::stabilization(g.clone(), aux.clone());
        let need = bank.required_rank();
        let terms = (n + need) / (2 * m) + 2;
        let horizon = 20.0;
        let f_lo = std::f64::consts::TAU / horizon;
        let exp = Experiment {
            plant: sys.clone(),
            x0: uniform_vector(seed, n) * 3.0,
            excitation: multisine(seed, m, terms, f_lo, f_lo + 6.0),
            disturbance: None,
        };
        let samples = 6 * need;
        let tr = filter_dataset(&exp, &bank, &uniform_times(horizon, samples)).unwrap();
        let b = assemble_batches(&tr, samples, &bank).unwrap();
        let inf = default_informativity(&b).unwrap();
        assert!(inf.informative, "case {case} (p={p}, m={m}, nu={nu}, T={horizon:.2}): rank {} of {} sv {:?}", inf.rank, inf.required, inf.singular_values);
        let ident = data_identity_residual(&b, &g, &pih).unwrap();
        assert!(ident < 1e-8, "case {case}: batch identity {ident:e}");

        let sol = solve_design_lmi(&b, aux.dim(), &LmiOptions::default()).unwrap();
        assert!(sol.is_feasible(), "case {case}: {:?} {}", sol.verdict, sol.solver_status);
        let k = extract_gain(&b, &sol, None).unwrap();
        let rec = recover_closed_matrix(&b, &sol).unwrap();
        let oracle: Mat = &g.f + &g.l * &pih.h + &g.g * &k.k;
        let rel = (&rec - &oracle).norm() / oracle.norm();
        assert!(rel < 1e-6, "case {case}: recovered closed loop off by {rel:e}");
        for (w, v) in worst.iter_mut().zip([pih.max_residual(), rep.transfer_mismatch, ident, rel]) {
            *w = w.max(v);
        }
    }
    println!("worst: residual {:e}, transfer {:e}, identity {:e}, closed loop {:e}", worst[0], worst[1], worst[2], worst[3]);
}
