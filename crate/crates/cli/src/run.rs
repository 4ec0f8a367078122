//! End-to-end scenario runs and their artifacts.

use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use ddctl_core::estimation::{estimate_index, EstimationOptions, LiveSource, RecordedSource};
use ddctl_core::lti::{uniform_times, SampledTrajectory};
use ddctl_core::matio::MatrixBundle;
use ddctl_core::numkit::{Mat, Vector};
use ddctl_core::pipeline::{
    assemble_batches, filter_dataset, filter_recorded, informativity_check, DataBatches, Experiment,
    FilterBank,
};
use ddctl_core::randsys::uniform_vector;
use ddctl_core::synthesis::{
    build_controller, certify_closed_loop_tol, check_non_resonance, closed_loop_response, error_profile,
    extract_gain, regulation_check, solve_design_lmi, Certificate, Controller, LmiOptions, LmiVerdict,
    RegulationSetup,
};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{Scenario, ScenarioConfig};
use crate::error::CliError;
use crate::plot;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Stabilize,
    Regulate,
    EstimateIndex,
    Simulate,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Stabilize => "stabilize",
            Mode::Regulate => "regulate",
            Mode::EstimateIndex => "estimate-index",
            Mode::Simulate => "simulate",
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    /// Turn warnings (recorded-data sampling, non-resonance) into errors.
    pub strict: bool,
    /// Also write SVG charts.
    pub svg: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { out_dir: PathBuf::from("runs"), strict: true, svg: false }
    }
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub scenario: String,
    pub mode: Mode,
    pub dir: PathBuf,
    pub exit_code: i32,
    pub summary: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct ArtifactEntry {
    pub file: String,
    pub sha256: String,
}

/// Writes files into a run directory and remembers their digests.
pub struct Artifacts {
    dir: PathBuf,
    entries: Vec<ArtifactEntry>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl Artifacts {
    fn new(dir: PathBuf) -> Self {
        Artifacts { dir, entries: Vec::new() }
    }

    fn bytes(&mut self, name: &str, data: &[u8]) -> Result<(), CliError> {
        std::fs::write(self.dir.join(name), data)?;
        self.entries.retain(|e| e.file != name);
        self.entries.push(ArtifactEntry { file: name.to_string(), sha256: sha256_hex(data) });
        Ok(())
    }

    fn json<T: Serialize + ?Sized>(&mut self, name: &str, v: &T) -> Result<(), CliError> {
        let mut s = serde_json::to_string_pretty(v).map_err(|e| CliError::Other(e.to_string()))?;
        s.push('\n');
        self.bytes(name, s.as_bytes())
    }

    fn trajectory(&mut self, name: &str, tr: &SampledTrajectory) -> Result<(), CliError> {
        let mut buf = Vec::new();
        tr.write_csv(&mut buf)?;
        self.bytes(name, &buf)
    }

    fn bundle(&mut self, stem: &str, b: &MatrixBundle) -> Result<(), CliError> {
        let mut js = b.to_json()?;
        js.push('\n');
        self.bytes(&format!("{stem}.json"), js.as_bytes())?;
        let mut buf = Vec::new();
        b.write_csv(&mut buf)?;
        self.bytes(&format!("{stem}.csv"), &buf)
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    scenario: &'a str,
    mode: Mode,
    seed: u64,
    strict: bool,
    parallel: bool,
    config: &'a ScenarioConfig,
    warnings: &'a [String],
    artifacts: &'a [ArtifactEntry],
    outcome: Outcome<'a>,
}

#[derive(Serialize)]
struct Outcome<'a> {
    exit_code: i32,
    status: &'a str,
    message: &'a str,
}

#[derive(Serialize)]
struct Timestamps {
    started_unix: f64,
    finished_unix: f64,
    elapsed_seconds: f64,
}

#[derive(Serialize)]
struct LmiSummary {
    verdict: LmiVerdict,
    epsilon: f64,
    normalized_margin: f64,
    min_eig_p: f64,
    max_eig_lyapunov: f64,
    equality_residual: f64,
    iterations: usize,
    solver_status: String,
}

pub const MANIFEST: &str = "manifest.json";
pub const TIMESTAMPS: &str = "timestamps.json";

fn unix_now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

/// Directory for one run: `<out_dir>/<scenario>-<mode>`.
pub fn run_dir(out_dir: &Path, scenario: &str, mode: Mode) -> PathBuf {
    out_dir.join(format!("{scenario}-{}", mode.as_str()))
}

fn prepare_dir(dir: &Path) -> Result<(), CliError> {
    if dir.exists() {
        let mut entries = std::fs::read_dir(dir)?;
        let empty = entries.next().is_none();
        if !empty && !dir.join(MANIFEST).exists() {
            return Err(CliError::Config(format!("{} exists and is not a run directory", dir.display())));
        }
        if !empty {
            std::fs::remove_dir_all(dir)?;
        }
    }
    std::fs::create_dir_all(dir)?;
    Ok(())
}

/// Runs one scenario. Never panics on bad input; every failure maps to an
/// exit code and, once the run directory exists, to a manifest.
pub fn run_scenario(config: &ScenarioConfig, base: &Path, mode: Mode, opts: &RunOptions) -> RunOutcome {
    let out_dir = config.output_dir.as_ref().map(|p| base.join(p)).unwrap_or_else(|| opts.out_dir.clone());
    let out_dir = if opts.out_dir != RunOptions::default().out_dir { opts.out_dir.clone() } else { out_dir };
    let dir = run_dir(&out_dir, &config.name, mode);
    let fail = |e: CliError, dir: &Path| RunOutcome {
        scenario: config.name.clone(),
        mode,
        dir: dir.to_path_buf(),
        exit_code: e.exit_code(),
        summary: e.to_string(),
    };
    if let Err(e) = prepare_dir(&dir) {
        return fail(e, &dir);
    }
    let started = unix_now();
    let clock = Instant::now();
    let mut art = Artifacts::new(dir.clone());
    let mut warnings = Vec::new();
    let result = Scenario::build(config, base).and_then(|sc| execute(&sc, mode, opts, &mut art, &mut warnings));
    let (exit_code, status, message) = match &result {
        Ok(s) => (0, "ok", s.clone()),
        Err(e) => (e.exit_code(), e.status(), e.to_string()),
    };
    let mut cfg = config.clone();
    cfg.output_dir = None;
    let manifest = Manifest {
        tool: "ddctl",
        version: env!("CARGO_PKG_VERSION"),
        scenario: &config.name,
        mode,
        seed: config.seed,
        strict: opts.strict,
        parallel: cfg!(feature = "parallel"),
        config: &cfg,
        warnings: &warnings,
        artifacts: &art.entries.clone(),
        outcome: Outcome { exit_code, status, message: &message },
    };
    let ts = Timestamps { started_unix: started, finished_unix: unix_now(), elapsed_seconds: clock.elapsed().as_secs_f64() };
    let written = art.json(MANIFEST, &manifest).and_then(|_| art.json(TIMESTAMPS, &ts));
    if let Err(e) = written {
        return fail(e, &dir);
    }
    RunOutcome { scenario: config.name.clone(), mode, dir, exit_code, summary: message }
}

fn execute(
    sc: &Scenario,
    mode: Mode,
    opts: &RunOptions,
    art: &mut Artifacts,
    warnings: &mut Vec<String>,
) -> Result<String, CliError> {
    match mode {
        Mode::EstimateIndex => estimate(sc, art),
        Mode::Simulate => {
            let bank = bank_for(sc, sc.internal_model.is_some())?;
            let (b, _) = acquire(sc, &bank, sc.internal_model.is_some(), opts, art, warnings)?;
            let inf = informativity_check(&b, sc.config.tolerances.rank)?;
            art.json("informativity.json", &inf)?;
            Ok(format!(
                "simulated {} samples; informativity rank {} of {}",
                b.n_samples(),
                inf.rank,
                inf.required
            ))
        }
        Mode::Stabilize => design(sc, false, opts, art, warnings),
        Mode::Regulate => {
            if sc.internal_model.is_none() {
                return Err(CliError::Config(
                    "regulate needs exosystem, internal_model and regulation sections".into(),
                ));
            }
            design(sc, true, opts, art, warnings)
        }
    }
}

fn bank_for(sc: &Scenario, regulate: bool) -> Result<FilterBank, CliError> {
    if regulate {
        let im = sc.internal_model.clone().expect("checked by caller");
        Ok(FilterBank::regulation(sc.gains.clone(), sc.aux.clone(), im)?)
    } else {
        Ok(FilterBank::stabilization(sc.gains.clone(), sc.aux.clone()))
    }
}

/// Produces the filtered dataset and the batches, writing both.
fn acquire(
    sc: &Scenario,
    bank: &FilterBank,
    with_disturbance: bool,
    opts: &RunOptions,
    art: &mut Artifacts,
    warnings: &mut Vec<String>,
) -> Result<(DataBatches, SampledTrajectory), CliError> {
    let cfg = &sc.config;
    let times = uniform_times(cfg.horizon, cfg.samples);
    let traj = match &sc.recorded {
        Some((rec, meta)) => {
            let (full, w) = filter_recorded(rec, bank, Some(meta), opts.strict)
                .map_err(|e| CliError::Config(format!("recorded dataset rejected: {e}")))?;
            warnings.extend(w);
            full.select_times(&times, 1e-9 * cfg.horizon)
                .map_err(|e| CliError::Config(format!("recorded dataset rejected: {e}")))?
        }
        None => {
            let exp = Experiment {
                plant: sc.plant.clone(),
                x0: sc.x0.clone(),
                excitation: sc.excitation.clone(),
                disturbance: if with_disturbance { sc.exo.clone() } else { None },
            };
            filter_dataset(&exp, bank, &times)?
        }
    };
    art.trajectory("dataset.csv", &traj)?;
    let b = assemble_batches(&traj, cfg.samples, bank)?;
    art.bundle("batches", &b.to_bundle())?;
    Ok((b, traj))
}

fn estimate(sc: &Scenario, art: &mut Artifacts) -> Result<String, CliError> {
    let cfg = &sc.config;
    let opts = EstimationOptions {
        nu_max: cfg.estimation.nu_max,
        schedule: Some(sc.schedule()?),
        rel_tol: cfg.tolerances.rank,
        audit: cfg.estimation.audit,
        ..Default::default()
    };
    let est = match &sc.recorded {
        Some((rec, _)) => {
            let src = RecordedSource::new(rec, cfg.horizon, cfg.samples)
                .map_err(|e| CliError::Config(format!("recorded dataset rejected: {e}")))?;
            estimate_index(&src, &opts)?
        }
        None => {
            // the index is a property of the undisturbed plant
            let exp = Experiment {
                plant: sc.plant.clone(),
                x0: sc.x0.clone(),
                excitation: sc.excitation.clone(),
                disturbance: None,
            };
            let times = uniform_times(cfg.horizon, cfg.samples);
            let (ic, gi, pi) = ddctl_core::pipeline::experiment_interconnection(&exp)?;
            let aug = ic.augment()?;
            let xs = ddctl_core::lti::sample_exact(&aug.a, &aug.x0, &times)?;
            let joint = Mat::from_fn(aug.a.nrows(), xs.len(), |i, k| xs[k][i]);
            let mut tr = SampledTrajectory::new(times);
            tr.insert("u", aug.output_map_of(&ic.blocks[gi].name)? * &joint)?;
            tr.insert("y", aug.output_map_of(&ic.blocks[pi].name)? * &joint)?;
            art.trajectory("dataset.csv", &tr)?;
            let src = LiveSource::new(&exp, cfg.horizon, cfg.samples)?;
            estimate_index(&src, &opts)?
        }
    };
    art.json("index_estimate.json", &est)?;
    art.bytes("index_estimate.txt", est.to_text().as_bytes())?;
    if est.succeeded() {
        Ok(format!("nu_hat = {}", est.nu_hat))
    } else {
        Err(CliError::Informativity(format!(
            "index search ended with verdict {:?}; best guess nu_hat = {}",
            est.verdict, est.nu_hat
        )))
    }
}

fn design(
    sc: &Scenario,
    regulate: bool,
    opts: &RunOptions,
    art: &mut Artifacts,
    warnings: &mut Vec<String>,
) -> Result<String, CliError> {
    let cfg = &sc.config;
    let tol = &cfg.tolerances;
    if regulate {
        let (exo, _) = sc.exo.as_ref().expect("checked by Scenario::build");
        let q = sc.internal_model.as_ref().expect("checked").q;
        let nr = check_non_resonance(&sc.plant, q, &exo.s)?;
        warnings.extend(nr.warnings.iter().cloned());
        art.json("non_resonance.json", &nr)?;
        if !nr.holds {
            let msg = "plant has a transmission zero on the exosystem spectrum; regulation is not solvable".to_string();
            if opts.strict {
                return Err(CliError::Config(msg));
            }
            warnings.push(msg);
        }
    }
    let bank = bank_for(sc, regulate)?;
    let (b, _) = acquire(sc, &bank, regulate, opts, art, warnings)?;
    let inf = informativity_check(&b, tol.rank)?;
    art.json("informativity.json", &inf)?;
    if !inf.informative {
        return Err(CliError::Informativity(format!(
            "rank of [X; Z; U] is {} but {} is required (N = {})",
            inf.rank,
            inf.required,
            b.n_samples()
        )));
    }
    let lmi_opts = LmiOptions { epsilon: tol.lmi_epsilon, ..Default::default() };
    let sol = solve_design_lmi(&b, bank.aux.dim(), &lmi_opts)?;
    art.json(
        "lmi.json",
        &LmiSummary {
            verdict: sol.verdict,
            epsilon: sol.epsilon,
            normalized_margin: sol.t_star,
            min_eig_p: sol.min_eig_p,
            max_eig_lyapunov: sol.max_eig_lyap,
            equality_residual: sol.equality_residual,
            iterations: sol.iterations,
            solver_status: sol.solver_status.clone(),
        },
    )?;
    if !sol.is_feasible() {
        return Err(CliError::Infeasible(format!("{:?} ({})", sol.verdict, sol.solver_status)));
    }
    art.bundle("lmi_solution", &MatrixBundle::default().with("P", &sol.p).with("Q", &sol.q))?;
    let gain = extract_gain(&b, &sol, regulate.then(|| bank.mu()))?;
    let mut gb = MatrixBundle::default().with("K", &gain.k).with("K_zeta", &gain.k_zeta);
    if let Some(ke) = &gain.k_eta {
        gb.push("K_eta", ke);
    }
    art.bundle("gains", &gb)?;
    let ctrl = build_controller(&sc.gains, &gain, bank.internal_model.as_ref())?;
    art.bundle(
        "controller",
        &MatrixBundle::default().with("Ac", &ctrl.ss.a).with("Bc", &ctrl.ss.b).with("Cc", &ctrl.ss.c).with("Dc", &ctrl.ss.d),
    )?;
    let required = sc.gains.observer_modes()?;
    let mut cert = certify_closed_loop_tol(&sc.plant, &ctrl, &required, tol.hurwitz_margin, tol.inclusion)?;
    let x_test = uniform_vector(cfg.seed.wrapping_add(1), sc.n());
    if regulate && cert.worst_real_part < 0.0 {
        cert = regulation_test(sc, &ctrl, cert, &x_test, opts, art)?;
    } else if cert.worst_real_part < 0.0 {
        response_test(sc, &ctrl, &cert, &x_test, opts, art)?;
    }
    art.json("certificate.json", &cert)?;
    art.bytes("certificate.txt", cert.to_text().as_bytes())?;
    if !cert.pass {
        return Err(CliError::Certification(format!(
            "worst real part {:.3e}, {} required modes checked",
            cert.worst_real_part,
            cert.inclusions.len()
        )));
    }
    let mut s = format!(
        "certified: {} closed-loop eigenvalues, worst real part {:.4}",
        cert.spectrum.len(),
        cert.worst_real_part
    );
    if let Some(r) = &cert.regulation {
        s.push_str(&format!(", error ratio {:.3e} at T = {:.1} s", r.ratio, r.horizon));
    }
    Ok(s)
}

fn regulation_test(
    sc: &Scenario,
    ctrl: &Controller,
    cert: Certificate,
    x_test: &Vector,
    opts: &RunOptions,
    art: &mut Artifacts,
) -> Result<Certificate, CliError> {
    let reg = sc.config.regulation.as_ref().expect("checked");
    let (exo, w_data) = sc.exo.as_ref().expect("checked");
    let w0 = reg.test_w0.as_ref().map(|w| Vector::from_column_slice(w)).unwrap_or_else(|| w_data.clone());
    let setup = RegulationSetup { plant: &sc.plant, exo, q: reg.regulated_outputs, w0, x0: x_test.clone() };
    let horizon = reg.horizon.unwrap_or(40.0 / cert.slowest_rate());
    let rec = regulation_check(&setup, ctrl, horizon, reg.rho, reg.test_samples)?;
    let times: Vec<f64> = (0..=1000).map(|k| horizon * k as f64 / 1000.0).collect();
    let (a, x0, e_map) = ddctl_core::synthesis::regulation_loop(&setup, ctrl)?;
    let xs = ddctl_core::lti::sample_exact(&a, &x0, &times)?;
    let mut tr = SampledTrajectory::new(times.clone());
    tr.insert("e", Mat::from_fn(e_map.nrows(), xs.len(), |i, k| (e_map.row(i) * &xs[k])[(0, 0)]))?;
    tr.insert("e_norm", Mat::from_row_slice(1, times.len(), &error_profile(&setup, ctrl, &times)?))?;
    art.trajectory("regulation.csv", &tr)?;
    if opts.svg {
        let e = tr.require("e")?;
        let series: Vec<(String, Vec<f64>)> =
            (0..e.nrows()).map(|i| (format!("e_{i}"), e.row(i).iter().copied().collect())).collect();
        let svg = plot::line_chart(&format!("{}: regulated error", sc.config.name), &times, &series)?;
        art.bytes("regulation.svg", svg.as_bytes())?;
    }
    Ok(cert.with_regulation(rec))
}

fn response_test(
    sc: &Scenario,
    ctrl: &Controller,
    cert: &Certificate,
    x_test: &Vector,
    opts: &RunOptions,
    art: &mut Artifacts,
) -> Result<(), CliError> {
    let horizon = 10.0 / cert.slowest_rate();
    let times: Vec<f64> = (0..=1000).map(|k| horizon * k as f64 / 1000.0).collect();
    let y = closed_loop_response(&sc.plant, ctrl, x_test, &times)?;
    let mut tr = SampledTrajectory::new(times.clone());
    tr.insert("y", y.clone())?;
    art.trajectory("response.csv", &tr)?;
    if opts.svg {
        let series: Vec<(String, Vec<f64>)> =
            (0..y.nrows()).map(|i| (format!("y_{i}"), y.row(i).iter().copied().collect())).collect();
        let svg = plot::line_chart(&format!("{}: closed-loop output", sc.config.name), &times, &series)?;
        art.bytes("response.svg", svg.as_bytes())?;
    }
    Ok(())
}
