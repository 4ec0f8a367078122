//! Scenario configuration: schema, loading and construction of the core objects.

use std::path::{Path, PathBuf};

use ddctl_core::estimation::Schedule;
use ddctl_core::lti::{ChannelSpec, Exosystem, SampledTrajectory, SineInputSpec, SineTerm, StateSpace};
use ddctl_core::matio::{MatrixBundle, RowMatrix};
use ddctl_core::numkit::{self, kron, Mat, Vector, C64};
use ddctl_core::pipeline::{
    aux_from_filter, aux_uniform_shortcut, internal_model, AuxSpec, GeneratorMetadata, InternalModel,
};
use ddctl_core::randsys::uniform_vector;
use ddctl_core::realization::{companion_tuning, FilterGains};
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub plant: PlantSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exosystem: Option<ExosystemSpec>,
    pub excitation: ExcitationSpec,
    /// Length of the experiment in seconds.
    pub horizon: f64,
    /// Number of batch samples, taken at `k * horizon / samples`.
    pub samples: usize,
    pub tuning: TuningSpec,
    #[serde(default)]
    pub aux: AuxConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub internal_model: Option<InternalModelSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regulation: Option<RegulationSpec>,
    #[serde(default)]
    pub estimation: EstimationSpec,
    #[serde(default)]
    pub tolerances: Tolerances,
    /// Seeds the random initial plant state, drawn from U(-1, 1).
    #[serde(default)]
    pub seed: u64,
    /// Explicit initial plant state; overrides the seed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
    /// Recorded input-output data used instead of simulating the plant.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset: Option<DatasetSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(untagged)]
pub enum PlantSpec {
    Inline(InlinePlant),
    /// Matrix bundle (JSON or CSV) holding `A`, `B`, `C`; relative to the config file.
    File(PlantFile),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct InlinePlant {
    pub a: RowMatrix,
    pub b: RowMatrix,
    pub c: RowMatrix,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct PlantFile {
    pub file: PathBuf,
}

/// `w' = S w`, entering the plant as `x' = A x + B u + P w`, `y = C x + Q w`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct ExosystemSpec {
    pub s: RowMatrix,
    pub p: RowMatrix,
    pub q: RowMatrix,
    /// Exosystem state during the experiment; zero when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w0_data: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct ExcitationSpec {
    pub channels: Vec<ChannelConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct ChannelConfig {
    #[serde(default)]
    pub bias: f64,
    #[serde(default)]
    pub terms: Vec<TermConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct TermConfig {
    pub amplitude: f64,
    /// Angular frequency in rad/s.
    pub frequency: f64,
    #[serde(default)]
    pub phase: f64,
}

/// Either `lambda` with `ell`, or the eigenvalues of `lambda` as `[re, im]` pairs.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct TuningSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<RowMatrix>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ell: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eigenvalues: Option<Vec<[f64; 2]>>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "kebab-case")]
pub enum AuxKind {
    /// Companion form of the minimal polynomial of `F`, started at `(0, ..., omega_f)`.
    #[default]
    MinimalPolynomial,
    /// `chi' = lambda chi`, `chi(0) = ell`.
    Lambda,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct AuxConfig {
    #[serde(default)]
    pub kind: AuxKind,
    #[serde(default = "one")]
    pub omega_f: f64,
}

impl Default for AuxConfig {
    fn default() -> Self {
        AuxConfig { kind: AuxKind::default(), omega_f: 1.0 }
    }
}

fn one() -> f64 {
    1.0
}

/// Internal model built from the minimal polynomial of `S`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct InternalModelSpec {
    /// Input gain `(0, ..., omega_s)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_s: Option<f64>,
    /// Full input gain; overrides `omega_s`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma0: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct RegulationSpec {
    /// The first `regulated_outputs` outputs form the regulated error.
    pub regulated_outputs: usize,
    /// Exosystem state for the closed-loop test; defaults to the data value.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_w0: Option<Vec<f64>>,
    /// Test horizon; defaults to 40 over the slowest closed-loop rate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    /// Required ratio between the final error and the early peak.
    #[serde(default = "default_rho")]
    pub rho: f64,
    #[serde(default = "default_test_samples")]
    pub test_samples: usize,
}

fn default_rho() -> f64 {
    0.05
}

fn default_test_samples() -> usize {
    4000
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct EstimationSpec {
    #[serde(default = "default_nu_max")]
    pub nu_max: usize,
    /// Filter rates; defaults to `1, 2, ...`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<Vec<f64>>,
    /// Filter gains; defaults to `1, 2, ...`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<Vec<f64>>,
    /// Keep probing after the first rank loss.
    #[serde(default)]
    pub audit: bool,
}

fn default_nu_max() -> usize {
    6
}

impl Default for EstimationSpec {
    fn default() -> Self {
        EstimationSpec { nu_max: default_nu_max(), lambda: None, gamma: None, audit: false }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default = "default_rank")]
    pub rank: f64,
    #[serde(default = "default_margin")]
    pub hurwitz_margin: f64,
    /// Strictness margin of the LMI; defaults to `1e-6 * ||Zdot||`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lmi_epsilon: Option<f64>,
    #[serde(default = "default_inclusion")]
    pub inclusion: f64,
}

fn default_rank() -> f64 {
    numkit::RANK_REL_TOL
}

fn default_margin() -> f64 {
    ddctl_core::synthesis::DEFAULT_HURWITZ_MARGIN
}

fn default_inclusion() -> f64 {
    ddctl_core::synthesis::INCLUSION_TOL
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { rank: default_rank(), hurwitz_margin: default_margin(), lmi_epsilon: None, inclusion: default_inclusion() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct DatasetSpec {
    /// Trajectory CSV with columns `t`, `u_0..`, `y_0..`; relative to the config file.
    pub file: PathBuf,
    /// Largest angular frequency in the recording, used for the sampling check.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_frequency: Option<f64>,
}

/// Command-line overrides applied on top of a loaded config.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub samples: Option<usize>,
    pub horizon: Option<f64>,
    pub seed: Option<u64>,
}

impl ScenarioConfig {
    pub fn parse(text: &str, toml_syntax: bool) -> Result<Self, CliError> {
        if toml_syntax {
            toml::from_str(text).map_err(|e| CliError::Config(format!("invalid TOML scenario: {e}")))
        } else {
            serde_json::from_str(text).map_err(|e| CliError::Config(format!("invalid JSON scenario: {e}")))
        }
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let is_toml = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("toml"));
        Self::parse(&text, is_toml)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(n) = o.samples {
            self.samples = n;
        }
        if let Some(h) = o.horizon {
            self.horizon = h;
        }
        if let Some(s) = o.seed {
            self.seed = s;
        }
    }

    pub fn schema() -> serde_json::Value {
        serde_json::to_value(schemars::schema_for!(ScenarioConfig)).expect("schema serializes")
    }
}

/// Core objects assembled from a validated config.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub plant: StateSpace,
    pub exo: Option<(Exosystem, Vector)>,
    pub excitation: SineInputSpec,
    pub gains: FilterGains,
    pub aux: AuxSpec,
    pub internal_model: Option<InternalModel>,
    pub x0: Vector,
    pub recorded: Option<(SampledTrajectory, GeneratorMetadata)>,
}

fn cfg_err<T>(msg: impl Into<String>) -> Result<T, CliError> {
    Err(CliError::Config(msg.into()))
}

fn matrix(name: &str, rows: &RowMatrix) -> Result<Mat, CliError> {
    if rows.is_empty() {
        return cfg_err(format!("{name} is empty"));
    }
    let cols = rows[0].len();
    if rows.iter().any(|r| r.len() != cols) {
        return cfg_err(format!("{name} has rows of different lengths"));
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return cfg_err(format!("{name} has non-finite entries"));
    }
    Ok(Mat::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

fn shape(name: &str, m: &Mat, r: usize, c: usize) -> Result<(), CliError> {
    if m.shape() != (r, c) {
        return cfg_err(format!("{name} is {}x{}, expected {r}x{c}", m.nrows(), m.ncols()));
    }
    Ok(())
}

fn vector(name: &str, v: &[f64], len: usize) -> Result<Vector, CliError> {
    if v.len() != len {
        return cfg_err(format!("{name} has length {}, expected {len}", v.len()));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return cfg_err(format!("{name} has non-finite entries"));
    }
    Ok(Vector::from_column_slice(v))
}

fn as_config(e: ddctl_core::Error) -> CliError {
    CliError::Config(e.to_string())
}

impl Scenario {
    /// Cross-checks every dimension; relative file paths resolve against `base`.
    pub fn build(config: &ScenarioConfig, base: &Path) -> Result<Self, CliError> {
        let cfg = config.clone();
        if cfg.name.trim().is_empty() || cfg.name.contains(['/', '\\']) {
            return cfg_err("scenario name must be non-empty and contain no path separators");
        }
        if !(cfg.horizon > 0.0) || !cfg.horizon.is_finite() {
            return cfg_err("horizon must be positive");
        }
        if cfg.samples == 0 {
            return cfg_err("samples must be positive");
        }
        let (a, b, c) = match &cfg.plant {
            PlantSpec::Inline(p) => (matrix("plant.a", &p.a)?, matrix("plant.b", &p.b)?, matrix("plant.c", &p.c)?),
            PlantSpec::File(f) => {
                let path = base.join(&f.file);
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| CliError::Config(format!("cannot read plant file {}: {e}", path.display())))?;
                let bundle = if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
                    MatrixBundle::read_csv(text.as_bytes())
                } else {
                    MatrixBundle::from_json(&text)
                }
                .map_err(as_config)?;
                (bundle.get("A").map_err(as_config)?, bundle.get("B").map_err(as_config)?, bundle.get("C").map_err(as_config)?)
            }
        };
        let n = a.nrows();
        shape("plant.a", &a, n, n)?;
        let m = b.ncols();
        shape("plant.b", &b, n, m)?;
        let p = c.nrows();
        shape("plant.c", &c, p, n)?;
        let plant = StateSpace::strictly_proper(a, b, c).map_err(as_config)?;

        let exo = match &cfg.exosystem {
            None => None,
            Some(e) => {
                let s = matrix("exosystem.s", &e.s)?;
                let l = s.nrows();
                shape("exosystem.s", &s, l, l)?;
                let pm = matrix("exosystem.p", &e.p)?;
                shape("exosystem.p", &pm, n, l)?;
                let qm = matrix("exosystem.q", &e.q)?;
                shape("exosystem.q", &qm, p, l)?;
                let w0 = match &e.w0_data {
                    Some(w) => vector("exosystem.w0_data", w, l)?,
                    None => Vector::zeros(l),
                };
                Some((Exosystem::new(s, pm, qm).map_err(as_config)?, w0))
            }
        };

        if cfg.excitation.channels.len() != m {
            return cfg_err(format!("excitation has {} channels, the plant has {m} inputs", cfg.excitation.channels.len()));
        }
        let excitation = SineInputSpec {
            channels: cfg
                .excitation
                .channels
                .iter()
                .map(|ch| ChannelSpec {
                    bias: ch.bias,
                    terms: ch
                        .terms
                        .iter()
                        .map(|t| SineTerm { amplitude: t.amplitude, frequency: t.frequency, phase: t.phase })
                        .collect(),
                })
                .collect(),
        };
        excitation.validate().map_err(as_config)?;

        let (lambda, ell) = match (&cfg.tuning.lambda, &cfg.tuning.ell, &cfg.tuning.eigenvalues) {
            (Some(lm), Some(el), None) => {
                let lam = matrix("tuning.lambda", lm)?;
                let nu = lam.nrows();
                shape("tuning.lambda", &lam, nu, nu)?;
                (lam, vector("tuning.ell", el, nu)?)
            }
            (None, None, Some(ev)) => {
                let poles: Vec<C64> = ev.iter().map(|z| C64::new(z[0], z[1])).collect();
                companion_tuning(&poles).map_err(as_config)?
            }
            _ => return cfg_err("tuning needs either lambda with ell, or eigenvalues"),
        };
        let gains = FilterGains::mimo_uniform(p, m, lambda, ell).map_err(as_config)?;
        let aux = match cfg.aux.kind {
            AuxKind::MinimalPolynomial => aux_from_filter(&gains, cfg.aux.omega_f).map_err(as_config)?,
            AuxKind::Lambda => aux_uniform_shortcut(&gains),
        };

        let internal_model = match (&cfg.internal_model, &cfg.regulation, &exo) {
            (Some(spec), Some(reg), Some((ex, _))) => {
                if reg.regulated_outputs == 0 || reg.regulated_outputs > p {
                    return cfg_err(format!("regulated_outputs must lie in 1..={p}"));
                }
                Some(build_internal_model(spec, &ex.s, reg.regulated_outputs)?)
            }
            (Some(_), _, _) => return cfg_err("internal_model needs both exosystem and regulation"),
            _ => None,
        };
        if let (Some(reg), Some((ex, _))) = (&cfg.regulation, &exo) {
            if let Some(w) = &reg.test_w0 {
                vector("regulation.test_w0", w, ex.s.nrows())?;
            }
            if !(reg.rho > 0.0) {
                return cfg_err("regulation.rho must be positive");
            }
            if reg.horizon.is_some_and(|h| !(h > 0.0)) {
                return cfg_err("regulation.horizon must be positive");
            }
        }
        if cfg.regulation.is_some() && exo.is_none() {
            return cfg_err("regulation needs an exosystem");
        }
        if cfg.estimation.nu_max < 2 {
            return cfg_err("estimation.nu_max must be at least 2");
        }
        let t = &cfg.tolerances;
        if !(t.rank > 0.0 && t.hurwitz_margin >= 0.0 && t.inclusion > 0.0) || t.lmi_epsilon.is_some_and(|e| !(e > 0.0)) {
            return cfg_err("tolerances must be positive");
        }

        let x0 = match &cfg.x0 {
            Some(v) => vector("x0", v, n)?,
            None => uniform_vector(cfg.seed, n),
        };
        let recorded = match &cfg.dataset {
            None => None,
            Some(ds) => {
                let path = base.join(&ds.file);
                let file = std::fs::File::open(&path)
                    .map_err(|e| CliError::Config(format!("cannot open dataset {}: {e}", path.display())))?;
                let tr = SampledTrajectory::read_csv(file).map_err(as_config)?;
                let u = tr.require("u").map_err(as_config)?;
                let y = tr.require("y").map_err(as_config)?;
                if u.nrows() != m || y.nrows() != p {
                    return cfg_err("recorded dataset does not match the plant dimensions");
                }
                let meta = GeneratorMetadata {
                    max_frequency: ds.max_frequency.unwrap_or(0.0),
                    description: ds.file.display().to_string(),
                };
                Some((tr, meta))
            }
        };
        Ok(Scenario { config: cfg, plant, exo, excitation, gains, aux, internal_model, x0, recorded })
    }

    pub fn n(&self) -> usize {
        self.plant.n()
    }

    /// Estimation schedule of length `nu_max`.
    pub fn schedule(&self) -> Result<Schedule, CliError> {
        let e = &self.config.estimation;
        let def = Schedule::linear(e.nu_max);
        let s = Schedule {
            lambda: e.lambda.clone().unwrap_or(def.lambda),
            gamma: e.gamma.clone().unwrap_or(def.gamma),
        };
        if s.len() < e.nu_max {
            return cfg_err(format!("estimation schedule has {} entries, nu_max is {}", s.len(), e.nu_max));
        }
        s.validate().map_err(as_config)?;
        Ok(s)
    }
}

fn build_internal_model(spec: &InternalModelSpec, s: &Mat, q: usize) -> Result<InternalModel, CliError> {
    let omega = spec.omega_s.unwrap_or(1.0);
    let mut im = internal_model(s, q, omega).map_err(as_config)?;
    if let Some(g) = &spec.gamma0 {
        let d = im.s0.nrows();
        let g = vector("internal_model.gamma0", g, d)?;
        let kr = numkit::krylov(&im.s0, &g, d);
        if numkit::numerical_rank(&kr, 1e-10) < d {
            return cfg_err("internal_model.gamma0 leaves the internal model uncontrollable");
        }
        im.gamma = kron(&Mat::identity(q, q), &Mat::from_column_slice(d, 1, g.as_slice()));
        im.gamma0 = g;
    }
    Ok(im)
}
