//! Acceptance criteria, one line each. Runs without the libtest harness so the
//! verdicts always show in the test output.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use ddctl::config::{Scenario, ScenarioConfig};
use ddctl::run::{run_scenario, Mode, RunOptions, RunOutcome};
use ddctl::scenarios::builtin;
use ddctl_core::lti::{uniform_times, Exosystem, StateSpace};
use ddctl_core::numkit::{mat_exp, match_error, spectral_abscissa, Mat, MonicPoly, Vector, C64};
use ddctl_core::pipeline::{
    assemble_batches, aux_from_filter, data_identity_residual, default_informativity, filter_dataset, internal_model,
    Experiment, FilterBank,
};
use ddctl_core::randsys::{multisine, uniform_index_plant, uniform_vector};
use ddctl_core::realization::{
    companion_tuning, observer_canonical_form, solve_commuting, solve_pi_h, verify_realization, FilterGains,
};
use ddctl_core::synthesis::{
    build_controller, certify_closed_loop, check_non_resonance, error_profile, extract_gain, recover_closed_matrix,
    solve_design_lmi, LmiOptions, RegulationSetup, DEFAULT_HURWITZ_MARGIN,
};
use serde_json::Value;

type Check = fn() -> Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn read_json(dir: &Path, name: &str) -> Result<Value, String> {
    let text = std::fs::read_to_string(dir.join(name)).map_err(|e| format!("{name}: {e}"))?;
    serde_json::from_str(&text).map_err(|e| format!("{name}: {e}"))
}

fn run(cfg: &ScenarioConfig, mode: Mode, out: &Path) -> RunOutcome {
    let opts = RunOptions { out_dir: out.to_path_buf(), strict: true, svg: false };
    run_scenario(cfg, Path::new("."), mode, &opts)
}

fn spectrum(cert: &Value) -> Vec<C64> {
    cert["spectrum"]
        .as_array()
        .map(|a| a.iter().map(|z| C64::new(z[0].as_f64().unwrap_or(f64::NAN), z[1].as_f64().unwrap_or(f64::NAN))).collect())
        .unwrap_or_default()
}

fn worst_real(spec: &[C64]) -> f64 {
    spec.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max)
}

fn reals(v: &[f64]) -> Vec<C64> {
    v.iter().map(|&r| C64::new(r, 0.0)).collect()
}

fn within(elapsed: Duration, limit: f64, what: &str) -> Result<(), String> {
    ensure(elapsed.as_secs_f64() < limit, || format!("{what} took {:.1} s, limit {limit} s", elapsed.as_secs_f64()))
}

fn reactor_stabilization() -> Result<String, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = builtin("batch_reactor").ok_or("no built-in batch_reactor")?;
    ensure(cfg.horizon == 2.0 && cfg.samples == 50, || "unexpected reactor experiment".into())?;
    let t0 = Instant::now();
    let out = run(&cfg, Mode::Stabilize, dir.path());
    let elapsed = t0.elapsed();
    ensure(out.exit_code == 0, || format!("exit {}: {}", out.exit_code, out.summary))?;
    let inf = read_json(&out.dir, "informativity.json")?;
    ensure(inf["rank"] == 12 && inf["required"] == 12, || format!("rank {} of {}", inf["rank"], inf["required"]))?;
    let lmi = read_json(&out.dir, "lmi.json")?;
    ensure(lmi["verdict"] == "feasible", || format!("LMI {}", lmi["verdict"]))?;
    let spec = spectrum(&read_json(&out.dir, "certificate.json")?);
    ensure(spec.len() == 12, || format!("{} eigenvalues", spec.len()))?;
    let worst = worst_real(&spec);
    ensure(worst < -1e-7, || format!("worst real part {worst:e}"))?;
    let incl = match_error(&reals(&[-4.0, -4.0, -8.0, -8.0]), &spec);
    ensure(incl <= 1e-6, || format!("{{-4,-4,-8,-8}} matched within {incl:e}"))?;
    within(elapsed, 10.0, "design")?;
    Ok(format!("rank 12/12, 12 eigenvalues, worst real part {worst:.4}, inclusion error {incl:.1e}"))
}

fn reactor_integral_action() -> Result<String, String> {
    let t0 = Instant::now();
    let cfg = builtin("batch_reactor").ok_or("no built-in batch_reactor")?;
    let sc = Scenario::build(&cfg, Path::new(".")).map_err(|e| e.to_string())?;
    let im = sc.internal_model.clone().ok_or("reactor scenario has no internal model")?;
    ensure(im.phi == Mat::zeros(2, 2) && im.gamma == Mat::identity(2, 2) * 5.0, || "Phi/Gamma differ from 0 and 5 I".into())?;
    let bank = FilterBank::regulation(sc.gains.clone(), sc.aux.clone(), im.clone()).map_err(|e| e.to_string())?;
    let exp = Experiment { plant: sc.plant.clone(), x0: sc.x0.clone(), excitation: sc.excitation.clone(), disturbance: None };
    let tr = filter_dataset(&exp, &bank, &uniform_times(cfg.horizon, cfg.samples)).map_err(|e| e.to_string())?;
    let b = assemble_batches(&tr, cfg.samples, &bank).map_err(|e| e.to_string())?;
    let inf = default_informativity(&b).map_err(|e| e.to_string())?;
    ensure(inf.informative, || format!("rank {} of {}", inf.rank, inf.required))?;
    let sol = solve_design_lmi(&b, bank.aux.dim(), &LmiOptions::default()).map_err(|e| e.to_string())?;
    ensure(sol.is_feasible(), || format!("LMI {:?}", sol.verdict))?;
    let k = extract_gain(&b, &sol, Some(sc.gains.mu())).map_err(|e| e.to_string())?;
    let ctrl = build_controller(&sc.gains, &k, Some(&im)).map_err(|e| e.to_string())?;
    let cert = certify_closed_loop(&sc.plant, &ctrl, &sc.gains.observer_modes().unwrap(), DEFAULT_HURWITZ_MARGIN)
        .map_err(|e| e.to_string())?;
    let spec: Vec<C64> = cert.spectrum.iter().map(|z| C64::new(z[0], z[1])).collect();
    ensure(spec.len() == 14, || format!("{} eigenvalues", spec.len()))?;
    ensure(worst_real(&spec) < -1e-7, || format!("worst real part {:e}", worst_real(&spec)))?;
    let incl = match_error(&reals(&[-4.0, -4.0, -8.0, -8.0]), &spec);
    ensure(incl <= 1e-6, || format!("inclusion error {incl:e}"))?;

    let ystar = Vector::from_vec(vec![1.0, -0.5]);
    let exo = Exosystem::new(Mat::zeros(2, 2), Mat::zeros(4, 2), -Mat::identity(2, 2)).unwrap();
    let setup = RegulationSetup { plant: &sc.plant, exo: &exo, q: 2, w0: ystar.clone(), x0: uniform_vector(cfg.seed + 1, 4) };
    let t_settle = 10.0 / cert.slowest_rate();
    let times: Vec<f64> = (0..=200).map(|k| t_settle * (1.0 + k as f64 / 100.0)).collect();
    let e = error_profile(&setup, &ctrl, &times).map_err(|e| e.to_string())?;
    let worst_e = e.iter().cloned().fold(0.0, f64::max);
    let bound = 1e-3 * (1.0 + ystar.norm());
    ensure(worst_e < bound, || format!("|e| = {worst_e:e} after {t_settle:.2} s, bound {bound:e}"))?;
    within(t0.elapsed(), 15.0, "design and simulation")?;
    Ok(format!("14 eigenvalues, worst real part {:.4}, max |e| after {t_settle:.2} s = {worst_e:.1e}", worst_real(&spec)))
}

fn vessel_regulation() -> Result<String, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = builtin("surface_vessel").ok_or("no built-in surface_vessel")?;
    ensure(cfg.samples == 80, || format!("N = {}", cfg.samples))?;
    let sc = Scenario::build(&cfg, Path::new(".")).map_err(|e| e.to_string())?;
    let d = sc.internal_model.as_ref().map(|im| im.s0.nrows()).unwrap_or(0);
    ensure(d == 3, || format!("d = {d}"))?;
    let reg = cfg.regulation.as_ref().ok_or("no regulation section")?;
    ensure(reg.test_w0.as_deref() == Some(&[1.0, -3.0, 0.0][..]), || "test w(0) is not (1, -3, 0)".into())?;
    let t0 = Instant::now();
    let out = run(&cfg, Mode::Regulate, dir.path());
    let elapsed = t0.elapsed();
    ensure(out.exit_code == 0, || format!("exit {}: {}", out.exit_code, out.summary))?;
    let cert = read_json(&out.dir, "certificate.json")?;
    let spec = spectrum(&cert);
    ensure(spec.len() == 24, || format!("{} eigenvalues", spec.len()))?;
    let worst = worst_real(&spec);
    ensure(worst < -1e-7, || format!("worst real part {worst:e}"))?;
    let modes: Vec<C64> = (0..3).flat_map(|_| [C64::new(-1.0, 1.0), C64::new(-1.0, -1.0)]).collect();
    let incl = match_error(&modes, &spec);
    ensure(incl <= 1e-6, || format!("-1 +/- i (x3) matched within {incl:e}"))?;
    let r = &cert["regulation"];
    let (horizon, ratio) = (r["horizon"].as_f64().unwrap_or(0.0), r["ratio"].as_f64().unwrap_or(f64::INFINITY));
    ensure(horizon == 400.0, || format!("T = {horizon}"))?;
    ensure(ratio <= 0.05, || format!("|e(T)| / max |e| = {ratio:e}"))?;
    within(elapsed, 30.0, "design and simulation")?;
    Ok(format!("24 eigenvalues, worst real part {worst:.4}, inclusion error {incl:.1e}, ratio {ratio:.2e} at T = 400 s"))
}

fn estimated(cfg: &ScenarioConfig, out: &Path, rows_per_candidate: usize) -> Result<usize, String> {
    let mut cfg = cfg.clone();
    cfg.estimation.audit = true;
    let res = run(&cfg, Mode::EstimateIndex, out);
    let est = read_json(&res.dir, "index_estimate.json")?;
    let nu = est["nu_hat"].as_u64().unwrap_or(0) as usize;
    ensure(res.exit_code == 0 && est["verdict"] == "found", || format!("{}: verdict {}", cfg.name, est["verdict"]))?;
    for k in [3usize, 4] {
        let probe = est["probes"]
            .as_array()
            .and_then(|ps| ps.iter().find(|p| p["candidate"] == k))
            .ok_or_else(|| format!("candidate {k} not probed"))?;
        let rank = probe["rank"].as_u64().unwrap_or(u64::MAX) as usize;
        ensure(rank < k * rows_per_candidate, || format!("{}: rank {rank} at candidate {k}", cfg.name))?;
    }
    Ok(nu)
}

fn index_estimation() -> Result<String, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let base = builtin("batch_reactor").ok_or("no built-in batch_reactor")?;
    let mut seeds = Vec::new();
    for seed in 0..10u64 {
        let mut cfg = base.clone();
        cfg.seed = seed;
        cfg.name = format!("batch_reactor_{seed}");
        let nu = estimated(&cfg, dir.path(), 5)?;
        ensure(nu == 2, || format!("seed {seed}: nu_hat = {nu}"))?;
        seeds.push(seed);
    }
    let vessel = builtin("surface_vessel").ok_or("no built-in surface_vessel")?;
    let nu = estimated(&vessel, dir.path(), 7)?;
    ensure(nu == 2, || format!("surface vessel: nu_hat = {nu}"))?;
    Ok(format!("nu_hat = 2 on {} reactor seeds and the vessel; rank lost at candidates 3 and 4", seeds.len()))
}

fn oracle_equivalence() -> Result<String, String> {
    let t0 = Instant::now();
    let mut shapes = Vec::new();
    for p in 1..=3 {
        for nu in 1..=(6 / p) {
            for m in 1..=3 {
                shapes.push((p, m, nu));
            }
        }
    }
    let cases = 24;
    let mut worst = [0.0f64; 4];
    for case in 0..cases {
        let (p, m, nu) = shapes[(case * 7) % shapes.len()];
        let seed = 100 + case as u64;
        let raw = uniform_index_plant(seed, p, m, nu);
        let n = raw.n();
        let shift = (spectral_abscissa(&raw.a).unwrap() - 0.1).max(0.0);
        let sys = StateSpace::strictly_proper(&raw.a - Mat::identity(n, n) * shift, raw.b, raw.c).unwrap();
        let poles: Vec<C64> = (0..nu).map(|k| C64::new(-1.0 - 0.6 * k as f64, 0.0)).collect();
        let (lam, ell) = companion_tuning(&poles).unwrap();
        let g = FilterGains::mimo_uniform(p, m, lam, ell).unwrap();
        let tag = format!("case {case} (p={p}, m={m}, nu={nu})");
        let pih = solve_pi_h(&sys, &g).map_err(|e| format!("{tag}: {e}"))?;
        let rep = verify_realization(&sys, &g, &pih).map_err(|e| format!("{tag}: {e}"))?;
        ensure(pih.max_residual() < 1e-8, || format!("{tag}: Pi/H residual {:e}", pih.max_residual()))?;
        ensure(rep.transfer_mismatch < 1e-8, || format!("{tag}: transfer mismatch {:e}", rep.transfer_mismatch))?;
        ensure(rep.controllable, || format!("{tag}: lifted pair not controllable"))?;

        let aux = aux_from_filter(&g, 1.0).unwrap();
        let bank = FilterBank::stabilization(g.clone(), aux.clone());
        let need = bank.required_rank();
        let horizon = 20.0;
        let f_lo = std::f64::consts::TAU / horizon;
        let exp = Experiment {
            plant: sys.clone(),
            x0: uniform_vector(seed, n) * 3.0,
            excitation: multisine(seed, m, (n + need) / (2 * m) + 2, f_lo, f_lo + 6.0),
            disturbance: None,
        };
        let samples = 6 * need;
        let tr = filter_dataset(&exp, &bank, &uniform_times(horizon, samples)).map_err(|e| format!("{tag}: {e}"))?;
        let b = assemble_batches(&tr, samples, &bank).map_err(|e| format!("{tag}: {e}"))?;
        let inf = default_informativity(&b).unwrap();
        ensure(inf.informative, || format!("{tag}: rank {} of {}", inf.rank, inf.required))?;
        let ident = data_identity_residual(&b, &g, &pih).unwrap();
        ensure(ident < 1e-8, || format!("{tag}: batch identity residual {ident:e}"))?;
        let sol = solve_design_lmi(&b, aux.dim(), &LmiOptions::default()).map_err(|e| format!("{tag}: {e}"))?;
        ensure(sol.is_feasible(), || format!("{tag}: LMI {:?}", sol.verdict))?;
        let k = extract_gain(&b, &sol, None).map_err(|e| format!("{tag}: {e}"))?;
        let rec = recover_closed_matrix(&b, &sol).map_err(|e| format!("{tag}: {e}"))?;
        let oracle = &g.f + &g.l * &pih.h + &g.g * &k.k;
        let rel = (&rec - &oracle).norm() / oracle.norm();
        ensure(rel < 1e-6, || format!("{tag}: recovered closed loop off by {rel:e}"))?;
        for (w, v) in worst.iter_mut().zip([pih.max_residual(), rep.transfer_mismatch, ident, rel]) {
            *w = w.max(v);
        }
    }
    within(t0.elapsed(), 60.0, "suite")?;
    Ok(format!(
        "{cases} plants; worst residual {:.1e}, transfer {:.1e}, batch identity {:.1e}, closed loop {:.1e}",
        worst[0], worst[1], worst[2], worst[3]
    ))
}

fn random_mat(seed: u64, n: usize, scale: f64) -> Mat {
    Mat::from_column_slice(n, n, (uniform_vector(seed, n * n) * scale).as_slice())
}

fn kernel_properties() -> Result<String, String> {
    let t0 = Instant::now();
    let rel = |a: &Mat, b: &Mat| (a - b).norm() / b.norm().max(1.0);
    let mut worst = [0.0f64; 6];

    for seed in 0..100u64 {
        let r = 1 + (seed % 5) as usize;
        let coeffs: Vec<f64> = (uniform_vector(seed, r) * 2.0).iter().copied().collect();
        let theta = MonicPoly { coeffs }.companion();
        let mut beta = Vector::zeros(r);
        beta[r - 1] = 1.0;
        let rho = uniform_vector(seed + 1000, r);
        let mut x = Mat::zeros(r, r);
        let mut pow = Mat::identity(r, r);
        for i in 0..r {
            x += &pow * rho[i];
            pow = &pow * &theta;
        }
        let got = solve_commuting(&theta, &beta, &(&x * &beta)).map_err(|e| e.to_string())?;
        worst[0] = worst[0].max(rel(&got, &x));
    }
    ensure(worst[0] <= 1e-9, || format!("commuting construct/recover error {:e}", worst[0]))?;

    for seed in 0..60u64 {
        let (p, m, nu) = [(1, 1, 4), (2, 1, 3), (2, 2, 2), (3, 2, 2), (1, 3, 6), (3, 1, 1)][(seed % 6) as usize];
        let sys = uniform_index_plant(seed, p, m, nu);
        let n = sys.n();
        let of = observer_canonical_form(&sys.c, &sys.a, &sys.b).map_err(|e| e.to_string())?;
        let scale = 1.0 + of.a_o.norm();
        for j in 0..p {
            for k in 0..nu - 1 {
                let col = j * nu + k;
                let mut e = Vector::zeros(n);
                e[col + 1] = 1.0;
                worst[1] = worst[1].max((of.a_o.column(col) - e).norm() / scale);
            }
        }
        worst[2] = worst[2].max((&of.c_o - &of.c_bar).norm());
        let g = {
            let poles: Vec<C64> = (0..nu).map(|k| C64::new(-1.0 - 0.6 * k as f64, 0.0)).collect();
            let (lam, ell) = companion_tuning(&poles).unwrap();
            FilterGains::mimo_uniform(p, m, lam, ell).unwrap()
        };
        let rep = verify_realization(&sys, &g, &solve_pi_h(&sys, &g).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
        worst[5] = worst[5].max(rep.spectrum_containment);
    }
    ensure(worst[1] <= 1e-9, || format!("observer form structural zeros off by {:e}", worst[1]))?;
    ensure(worst[2] <= 1e-9, || format!("C_o differs from C-bar by {:e}", worst[2]))?;
    ensure(worst[5] <= 1e-6, || format!("spectrum containment error {:e}", worst[5]))?;

    for seed in 0..100u64 {
        let a = random_mat(seed, 4, 1.5);
        let st = uniform_vector(seed + 5000, 2);
        let (s, t) = (st[0].abs() * 2.0, st[1].abs() * 2.0);
        let lhs = mat_exp(&(&a * (s + t))).map_err(|e| e.to_string())?;
        let rhs = mat_exp(&(&a * s)).unwrap() * mat_exp(&(&a * t)).unwrap();
        worst[3] = worst[3].max(rel(&lhs, &rhs));

        let small = random_mat(seed + 9000, 5, 0.25);
        let mut series = Mat::identity(5, 5);
        let mut term = Mat::identity(5, 5);
        for k in 1..60 {
            term = &term * &small / k as f64;
            series += &term;
        }
        worst[4] = worst[4].max(rel(&mat_exp(&small).unwrap(), &series));
    }
    ensure(worst[3] <= 1e-10, || format!("mat_exp semigroup error {:e}", worst[3]))?;
    ensure(worst[4] <= 1e-12, || format!("mat_exp series error {:e}", worst[4]))?;
    within(t0.elapsed(), 30.0, "suite")?;
    Ok(format!(
        "commuting {:.1e}, structural zeros {:.1e}, C_o = C-bar {:.1e}, semigroup {:.1e}, series {:.1e}, containment {:.1e}",
        worst[0], worst[1], worst[2], worst[3], worst[4], worst[5]
    ))
}

fn negative_paths() -> Result<String, String> {
    // a single sinusoid per input cannot make the reactor batches full rank
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut cfg = builtin("batch_reactor").ok_or("no built-in batch_reactor")?;
    cfg.name = "under_excited".into();
    for ch in &mut cfg.excitation.channels {
        ch.terms.truncate(1);
    }
    let path = dir.path().join("under_excited.json");
    std::fs::write(&path, serde_json::to_string_pretty(&cfg).unwrap()).map_err(|e| e.to_string())?;
    let status = Command::new(env!("CARGO_BIN_EXE_ddctl"))
        .args(["synth", "--config"])
        .arg(&path)
        .arg("--out-dir")
        .arg(dir.path().join("runs"))
        .output()
        .map_err(|e| e.to_string())?;
    let code = status.status.code();
    ensure(code == Some(3), || format!("under-excited run exited with {code:?}"))?;
    let inf = read_json(&dir.path().join("runs/under_excited-stabilize"), "informativity.json")?;
    ensure(inf["informative"] == false, || "informativity report claims success".into())?;

    // G(s) = s / (s^2 + s + 1) has a zero at the constant exosystem mode
    let plant = StateSpace::strictly_proper(
        Mat::from_row_slice(2, 2, &[0.0, 1.0, -1.0, -1.0]),
        Mat::from_row_slice(2, 1, &[0.0, 1.0]),
        Mat::from_row_slice(1, 2, &[0.0, 1.0]),
    )
    .unwrap();
    let nr = check_non_resonance(&plant, 1, &Mat::zeros(1, 1)).map_err(|e| e.to_string())?;
    ensure(!nr.holds, || "non-resonance reported for a plant with a zero at s = 0".into())?;

    let jordan = Mat::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
    let growing = Mat::from_row_slice(1, 1, &[0.1]);
    ensure(internal_model(&jordan, 1, 1.0).is_err(), || "Jordan block at 0 accepted".into())?;
    ensure(internal_model(&growing, 1, 1.0).is_err(), || "unstable S accepted".into())?;
    Ok(format!("under-excited exit {}, rank {} of {}; resonance detected; non-neutral S rejected", 3, inf["rank"], inf["required"]))
}

fn main() {
    let checks: [(u8, &str, Check); 7] = [
        (1, "batch reactor stabilization", reactor_stabilization),
        (2, "batch reactor integral action", reactor_integral_action),
        (3, "surface vessel regulation", vessel_regulation),
        (4, "index estimation", index_estimation),
        (5, "oracle equivalence suite", oracle_equivalence),
        (6, "kernel property suites", kernel_properties),
        (7, "negative-path contract", negative_paths),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (id, title, check) in checks {
        if !filter.is_empty() && !filter.iter().any(|f| title.contains(f.as_str())) {
            continue;
        }
        let t0 = Instant::now();
        let res = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let ms = t0.elapsed().as_secs_f64() * 1e3;
        match res {
            Ok(detail) => println!("criterion {id} PASS {title} ({ms:.0} ms): {detail}"),
            Err(why) => {
                failed += 1;
                println!("criterion {id} FAIL {title} ({ms:.0} ms): {why}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
}
