//! From an input-output trajectory to the data batches used for synthesis.
//!
//! Measured `u`, `y` drive the filter `zeta' = F zeta + G u + L y` (and, for
//! regulation, the internal model `eta' = Phi eta + Gamma e`). The auxiliary
//! trajectory `chi' = F0 chi` spans the filter transient. Samples of all of
//! these at `t_k = k tau / N` form the batches `U`, `X`, `Z` and `Zdot`.

use serde::{Deserialize, Serialize};

use crate::error::{arg_err, dim_err, Error, Result};
use crate::lti::{Exosystem, Interconnection, SampledTrajectory, SineInputSpec, StateSpace};
use crate::matio::MatrixBundle;
use crate::numkit::{
    self, block_diag, ensure_square, hstack, kron, minimal_polynomial, numerical_rank, pinv, singular_values,
    vstack, Mat, Vector, RANK_REL_TOL,
};
use crate::realization::{FilterGains, PiH};

/// Auxiliary dynamics `chi' = F0 chi`, `chi(0) = G0`.
#[derive(Clone, Debug, PartialEq)]
pub struct AuxSpec {
    pub f0: Mat,
    pub g0: Vector,
}

impl AuxSpec {
    pub fn dim(&self) -> usize {
        self.f0.nrows()
    }
}

/// Companion realization of the minimal polynomial of `F`, started at `(0, ..., 0, omega_f)`.
pub fn aux_from_filter(gains: &FilterGains, omega_f: f64) -> Result<AuxSpec> {
    if omega_f == 0.0 || !omega_f.is_finite() {
        return arg_err("omega_f must be nonzero");
    }
    let mp = minimal_polynomial(&gains.f, 1e-10)?;
    let d = mp.degree();
    let mut g0 = Vector::zeros(d);
    g0[d - 1] = omega_f;
    Ok(AuxSpec { f0: mp.companion(), g0 })
}

/// Shortcut for block-uniform tunings: `chi' = Lambda chi`, `chi(0) = l`.
pub fn aux_uniform_shortcut(gains: &FilterGains) -> AuxSpec {
    AuxSpec { f0: gains.lambda.clone(), g0: gains.ell.clone() }
}

/// Internal model `Phi = I_q (x) S0`, `Gamma = I_q (x) Gamma0`.
#[derive(Clone, Debug, PartialEq)]
pub struct InternalModel {
    pub s0: Mat,
    pub gamma0: Vector,
    pub phi: Mat,
    pub gamma: Mat,
    pub q: usize,
}

impl InternalModel {
    pub fn dim(&self) -> usize {
        self.phi.nrows()
    }
}

/// Builds the internal model from the exosystem matrix `S`.
pub fn internal_model(s: &Mat, q: usize, omega_s: f64) -> Result<InternalModel> {
    ensure_square(s, "S")?;
    if q == 0 {
        return arg_err("q must be positive");
    }
    if omega_s == 0.0 || !omega_s.is_finite() {
        return arg_err("omega_s must be nonzero");
    }
    check_neutral(s)?;
    let mp = minimal_polynomial(s, 1e-10)?;
    let d = mp.degree();
    let s0 = mp.companion();
    let mut gamma0 = Vector::zeros(d);
    gamma0[d - 1] = omega_s;
    let phi = kron(&Mat::identity(q, q), &s0);
    let g0m = Mat::from_column_slice(d, 1, gamma0.as_slice());
    let gamma = kron(&Mat::identity(q, q), &g0m);
    Ok(InternalModel { s0, gamma0, phi, gamma, q })
}

/// Rejects exosystems with eigenvalues off the imaginary axis or with
/// nontrivial Jordan blocks.
pub fn check_neutral(s: &Mat) -> Result<()> {
    let ev = numkit::eigenvalues(s)?;
    let scale = 1.0 + numkit::norm2(s);
    for z in &ev {
        if z.re.abs() > 1e-8 * scale {
            return Err(Error::Structural(format!("exosystem eigenvalue {z} is not on the imaginary axis")));
        }
    }
    // semisimple: for each distinct eigenvalue, geometric equals algebraic multiplicity
    let n = s.nrows();
    let mut seen: Vec<numkit::C64> = Vec::new();
    for z in &ev {
        if seen.iter().any(|w| (w - z).norm() <= 1e-6 * scale) {
            continue;
        }
        seen.push(*z);
        let alg = ev.iter().filter(|w| (*w - z).norm() <= 1e-6 * scale).count();
        let re = s - Mat::identity(n, n) * z.re;
        let im = Mat::identity(n, n) * (-z.im);
        let geo = n - numkit::complex_rank(&re, &im, 1e-9);
        if geo < alg {
            return Err(Error::Structural(format!("exosystem eigenvalue {z} has a nontrivial Jordan block")));
        }
    }
    Ok(())
}

/// Auxiliary dynamics for regulation: `blockdiag(S0, F0)` from `(Gamma0, G0)`.
pub fn regulation_aux(im: &InternalModel, aux: &AuxSpec) -> AuxSpec {
    let mut g0 = Vector::zeros(im.s0.nrows() + aux.dim());
    g0.rows_mut(0, im.s0.nrows()).copy_from(&im.gamma0);
    g0.rows_mut(im.s0.nrows(), aux.dim()).copy_from(&aux.g0);
    AuxSpec { f0: block_diag(&[&im.s0, &aux.f0]), g0 }
}

/// Everything that processes the measured signals.
#[derive(Clone, Debug)]
pub struct FilterBank {
    pub gains: FilterGains,
    /// Auxiliary dynamics as used in the batches (already including `S0` for regulation).
    pub aux: AuxSpec,
    pub internal_model: Option<InternalModel>,
}

impl FilterBank {
    pub fn stabilization(gains: FilterGains, aux: AuxSpec) -> Self {
        FilterBank { gains, aux, internal_model: None }
    }

    pub fn regulation(gains: FilterGains, aux: AuxSpec, im: InternalModel) -> Result<Self> {
        if im.q > gains.p {
            return dim_err("more regulated outputs than measured outputs");
        }
        let aux = regulation_aux(&im, &aux);
        Ok(FilterBank { gains, aux, internal_model: Some(im) })
    }

    pub fn mu(&self) -> usize {
        self.gains.mu()
    }

    /// Rows of `Z`: filter states plus internal-model states.
    pub fn z_rows(&self) -> usize {
        self.mu() + self.internal_model.as_ref().map(|i| i.dim()).unwrap_or(0)
    }

    /// Rank required for informativity.
    pub fn required_rank(&self) -> usize {
        self.aux.dim() + self.z_rows() + self.gains.m
    }
}

/// Live experiment on a known simulation model (the model is only used to
/// generate `y`; nothing downstream reads it).
#[derive(Clone, Debug)]
pub struct Experiment {
    pub plant: StateSpace,
    pub x0: Vector,
    pub excitation: SineInputSpec,
    pub disturbance: Option<(Exosystem, Vector)>,
}

/// Simulates plant, filters and auxiliary dynamics as one autonomous system
/// and samples every signal exactly.
/// Generator, optional exosystem and plant wired together. Returns the
/// interconnection and the indices of the generator and plant blocks; the
/// generator output is `u`, the plant output is `y`.
pub fn experiment_interconnection(exp: &Experiment) -> Result<(Interconnection, usize, usize)> {
    let plant = &exp.plant;
    let (n, m, p) = (plant.n(), plant.m(), plant.p());
    if plant.has_feedthrough() {
        return arg_err("plant must be strictly proper");
    }
    if exp.x0.len() != n {
        return dim_err("initial plant state has the wrong length");
    }
    if exp.excitation.channels.len() != m {
        return dim_err(format!("excitation has {} channels, plant has {m} inputs", exp.excitation.channels.len()));
    }
    let (gen, g0) = exp.excitation.generator()?;
    let mut ic = Interconnection::default();
    let gi = ic.add_block("gen", gen, g0)?;
    let (plant_blk, exo_idx) = match &exp.disturbance {
        None => (plant.clone(), None),
        Some((exo, w0)) => {
            if exo.p.nrows() != n || exo.q.nrows() != p || w0.len() != exo.s.nrows() {
                return dim_err("disturbance dimensions do not match the plant");
            }
            let b = hstack(&[&plant.b, &exo.p])?;
            let d = hstack(&[&Mat::zeros(p, m), &exo.q])?;
            let l = exo.s.nrows();
            let idx = ic.add_block("exo", StateSpace::autonomous(exo.s.clone(), Mat::identity(l, l))?, w0.clone())?;
            (StateSpace::new(plant.a.clone(), b, plant.c.clone(), d)?, Some(idx))
        }
    };
    let pi = ic.add_block("plant", plant_blk, exp.x0.clone())?;
    ic.connect_rows(gi, 0..m, pi, 0)?;
    if let Some(xi) = exo_idx {
        let l = ic.blocks[xi].sys.p();
        ic.connect_rows(xi, 0..l, pi, m)?;
    }
    Ok((ic, gi, pi))
}

pub fn filter_dataset(exp: &Experiment, bank: &FilterBank, times: &[f64]) -> Result<SampledTrajectory> {
    let (m, p) = (exp.plant.m(), exp.plant.p());
    if bank.gains.p != p || bank.gains.m != m {
        return dim_err("filter tuning does not match plant dimensions");
    }
    let (mut ic, gi, pi) = experiment_interconnection(exp)?;
    let g = &bank.gains;
    let mu = g.mu();
    let zb = StateSpace::new(g.f.clone(), hstack(&[&g.g, &g.l])?, Mat::identity(mu, mu), Mat::zeros(mu, m + p))?;
    let zi = ic.add_block("zeta", zb, Vector::zeros(mu))?;
    let ei = match &bank.internal_model {
        Some(im) => {
            let k = im.dim();
            let eb = StateSpace::new(im.phi.clone(), im.gamma.clone(), Mat::identity(k, k), Mat::zeros(k, im.q))?;
            Some(ic.add_block("eta", eb, Vector::zeros(k))?)
        }
        None => None,
    };
    let dx = bank.aux.dim();
    let ci = ic.add_block("chi", StateSpace::autonomous(bank.aux.f0.clone(), Mat::identity(dx, dx))?, bank.aux.g0.clone())?;
    let _ = ci;
    ic.connect_rows(gi, 0..m, zi, 0)?;
    ic.connect_rows(pi, 0..p, zi, m)?;
    if let (Some(ei), Some(im)) = (ei, &bank.internal_model) {
        ic.connect_rows(pi, 0..im.q, ei, 0)?;
    }
    let aug = ic.augment()?;
    let xs = crate::lti::sample_exact(&aug.a, &aug.x0, times)?;
    let joint = Mat::from_fn(aug.a.nrows(), xs.len(), |i, k| xs[k][i]);
    let mut tr = SampledTrajectory::new(times.to_vec());
    let u = aug.output_map_of("gen")? * &joint;
    let y = aug.output_map_of("plant")? * &joint;
    let zeta = aug.state_map("zeta")? * &joint;
    let chi = aug.state_map("chi")? * &joint;
    let zeta_dot = &g.f * &zeta + &g.g * &u + &g.l * &y;
    tr.insert("u", u)?;
    tr.insert("y", y.clone())?;
    tr.insert("x", aug.state_map("plant")? * &joint)?;
    tr.insert("chi", chi)?;
    tr.insert("zeta", zeta)?;
    tr.insert("zeta_dot", zeta_dot)?;
    if let Some(im) = &bank.internal_model {
        let eta = aug.state_map("eta")? * &joint;
        let e = y.rows(0, im.q).into_owned();
        let eta_dot = &im.phi * &eta + &im.gamma * &e;
        tr.insert("e", e)?;
        tr.insert("eta", eta)?;
        tr.insert("eta_dot", eta_dot)?;
    }
    Ok(tr)
}

/// Declared properties of the excitation that produced a recorded dataset.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GeneratorMetadata {
    /// Largest angular frequency present in the recorded signals.
    pub max_frequency: f64,
    #[serde(default)]
    pub description: String,
}

/// Minimum number of samples per shortest period for recorded data.
pub const MIN_SAMPLES_PER_PERIOD: f64 = 100.0;

/// Filters recorded `u`, `y` (first-order hold between samples, integrated
/// exactly). Returns warnings; in strict mode any warning is an error.
pub fn filter_recorded(
    recorded: &SampledTrajectory,
    bank: &FilterBank,
    meta: Option<&GeneratorMetadata>,
    strict: bool,
) -> Result<(SampledTrajectory, Vec<String>)> {
    let u = recorded.require("u")?.clone();
    let y = recorded.require("y")?.clone();
    let t = &recorded.times;
    let g = &bank.gains;
    if u.nrows() != g.m || y.nrows() != g.p {
        return dim_err("recorded u/y do not match the tuning dimensions");
    }
    if t.len() < 2 || t[0] != 0.0 {
        return Err(Error::Data("recorded data must start at t = 0 and have at least two samples".into()));
    }
    let mut warnings = Vec::new();
    match meta {
        None => warnings.push("recorded dataset has no generator metadata".to_string()),
        Some(md) => {
            let hmax = t.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
            if md.max_frequency > 0.0 {
                let period = 2.0 * std::f64::consts::PI / md.max_frequency;
                if hmax * MIN_SAMPLES_PER_PERIOD > period {
                    warnings.push(format!(
                        "sampling step {hmax:.3e} gives fewer than {MIN_SAMPLES_PER_PERIOD} samples per period {period:.3e}"
                    ));
                }
            }
        }
    }
    if strict && !warnings.is_empty() {
        return Err(Error::Data(format!("strict mode: {}", warnings.join("; "))));
    }
    let mu = g.mu();
    let q = bank.internal_model.as_ref().map(|i| i.q).unwrap_or(0);
    let k_eta = bank.internal_model.as_ref().map(|i| i.dim()).unwrap_or(0);
    // joint filter state (zeta, eta) driven by v = (u, y)
    let nz = mu + k_eta;
    let nv = g.m + g.p;
    let mut fz = Mat::zeros(nz, nz);
    let mut bz = Mat::zeros(nz, nv);
    fz.view_mut((0, 0), (mu, mu)).copy_from(&g.f);
    bz.view_mut((0, 0), (mu, g.m)).copy_from(&g.g);
    bz.view_mut((0, g.m), (mu, g.p)).copy_from(&g.l);
    if let Some(im) = &bank.internal_model {
        fz.view_mut((mu, mu), (k_eta, k_eta)).copy_from(&im.phi);
        bz.view_mut((mu, g.m), (k_eta, q)).copy_from(&im.gamma);
    }
    let v = vstack(&[&u, &y])?;
    let mut states = Mat::zeros(nz, t.len());
    let mut cache: Vec<(f64, Mat)> = Vec::new();
    for k in 1..t.len() {
        let h = t[k] - t[k - 1];
        let zprev = states.column(k - 1).into_owned();
        if h == 0.0 {
            states.set_column(k, &zprev);
            continue;
        }
        let e = match cache.iter().find(|(hh, _)| *hh == h) {
            Some((_, e)) => e.clone(),
            None => {
                let dim = nz + 2 * nv;
                let mut big = Mat::zeros(dim, dim);
                big.view_mut((0, 0), (nz, nz)).copy_from(&fz);
                big.view_mut((0, nz), (nz, nv)).copy_from(&bz);
                big.view_mut((nz, nz + nv), (nv, nv)).copy_from(&Mat::identity(nv, nv));
                let e = numkit::mat_exp(&(big * h))?;
                cache.push((h, e.clone()));
                e
            }
        };
        let vk = v.column(k - 1).into_owned();
        let slope = (v.column(k) - &vk) / h;
        let znext = e.view((0, 0), (nz, nz)) * zprev + e.view((0, nz), (nz, nv)) * vk + e.view((0, nz + nv), (nz, nv)) * slope;
        states.set_column(k, &znext);
    }
    let chi_samples = crate::lti::sample_exact(&bank.aux.f0, &bank.aux.g0, t)?;
    let mut tr = SampledTrajectory::new(t.clone());
    let zeta = states.rows(0, mu).into_owned();
    let zeta_dot = &g.f * &zeta + &g.g * &u + &g.l * &y;
    tr.insert("u", u)?;
    tr.insert("y", y.clone())?;
    tr.insert_samples("chi", &chi_samples)?;
    tr.insert("zeta", zeta)?;
    tr.insert("zeta_dot", zeta_dot)?;
    if let Some(im) = &bank.internal_model {
        let eta = states.rows(mu, k_eta).into_owned();
        let e = y.rows(0, q).into_owned();
        let eta_dot = &im.phi * &eta + &im.gamma * &e;
        tr.insert("e", e)?;
        tr.insert("eta", eta)?;
        tr.insert("eta_dot", eta_dot)?;
    }
    Ok((tr, warnings))
}

/// The four data matrices used by the synthesis LMI.
#[derive(Clone, Debug, PartialEq)]
pub struct DataBatches {
    pub u: Mat,
    pub x: Mat,
    pub z: Mat,
    pub z_dot: Mat,
    /// Number of rows of `Z` that belong to the filter state (the rest is the internal model).
    pub mu: usize,
    pub times: Vec<f64>,
}

impl DataBatches {
    pub fn n_samples(&self) -> usize {
        self.u.ncols()
    }

    pub fn stacked(&self) -> Result<Mat> {
        vstack(&[&self.x, &self.z, &self.u])
    }

    pub fn to_bundle(&self) -> MatrixBundle {
        let t = Mat::from_row_slice(1, self.times.len(), &self.times);
        MatrixBundle::default()
            .with("U", &self.u)
            .with("X", &self.x)
            .with("Z", &self.z)
            .with("Zdot", &self.z_dot)
            .with("t", &t)
            .with("mu", &Mat::from_element(1, 1, self.mu as f64))
    }

    pub fn from_bundle(b: &MatrixBundle) -> Result<Self> {
        let t = b.get("t")?;
        let mu = b.get("mu")?[(0, 0)] as usize;
        let out = DataBatches {
            u: b.get("U")?,
            x: b.get("X")?,
            z: b.get("Z")?,
            z_dot: b.get("Zdot")?,
            mu,
            times: t.iter().cloned().collect(),
        };
        out.validate()?;
        Ok(out)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.u.ncols();
        if self.x.ncols() != n || self.z.ncols() != n || self.z_dot.ncols() != n || self.times.len() != n {
            return dim_err("batches have different numbers of samples");
        }
        if self.z.nrows() != self.z_dot.nrows() {
            return dim_err("Z and Zdot have different row counts");
        }
        if self.mu > self.z.nrows() {
            return dim_err("mu exceeds the rows of Z");
        }
        Ok(())
    }
}

/// Takes the first `n` samples of a filtered trajectory and stacks them.
pub fn assemble_batches(traj: &SampledTrajectory, n: usize, bank: &FilterBank) -> Result<DataBatches> {
    if n == 0 {
        return arg_err("need at least one sample");
    }
    let tr = traj.truncate(n)?;
    let u = tr.require("u")?.clone();
    let x = tr.require("chi")?.clone();
    let zeta = tr.require("zeta")?.clone();
    let zeta_dot = tr.require("zeta_dot")?.clone();
    let (z, z_dot) = match &bank.internal_model {
        None => (zeta, zeta_dot),
        Some(_) => {
            let eta = tr.require("eta")?;
            let eta_dot = tr.require("eta_dot")?;
            (vstack(&[&zeta, eta])?, vstack(&[&zeta_dot, eta_dot])?)
        }
    };
    if x.nrows() != bank.aux.dim() || z.nrows() != bank.z_rows() || u.nrows() != bank.gains.m {
        return dim_err("trajectory signals do not match the filter bank");
    }
    let b = DataBatches { u, x, z, z_dot, mu: bank.mu(), times: tr.times.clone() };
    b.validate()?;
    Ok(b)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InformativityReport {
    pub rank: usize,
    pub required: usize,
    pub n_samples: usize,
    pub singular_values: Vec<f64>,
    pub rel_tol: f64,
    pub informative: bool,
}

/// Rank test on `[X; Z; U]`.
pub fn informativity_check(b: &DataBatches, rel_tol: f64) -> Result<InformativityReport> {
    let stacked = b.stacked()?;
    let required = stacked.nrows();
    let sv = singular_values(&stacked);
    let rank = numkit::rank_from_singular_values(&sv, rel_tol);
    Ok(InformativityReport {
        rank,
        required,
        n_samples: b.n_samples(),
        singular_values: sv,
        rel_tol,
        informative: rank == required,
    })
}

pub fn default_informativity(b: &DataBatches) -> Result<InformativityReport> {
    informativity_check(b, RANK_REL_TOL)
}

/// Residual of `Zdot = (F + L H) Z + G U + D X` with `D` fitted by least
/// squares, relative to the size of `Zdot`. Used as an oracle.
pub fn data_identity_residual(b: &DataBatches, gains: &FilterGains, pih: &PiH) -> Result<f64> {
    let flh = &gains.f + &gains.l * &pih.h;
    let r = &b.z_dot - &flh * &b.z - &gains.g * &b.u;
    let d = &r * pinv(&b.x, 1e-12)?;
    Ok((&r - d * &b.x).norm() / b.z_dot.norm().max(1e-300))
}

/// Smallest sample count that can possibly be informative.
pub fn min_samples(bank: &FilterBank) -> usize {
    bank.required_rank()
}

pub fn rank_of(m: &Mat) -> usize {
    numerical_rank(m, RANK_REL_TOL)
}
