//! Controller synthesis from data batches.
//!
//! The design LMI asks for `P = P' > 0` and `Q` with `[0; P] = [X; Z] Q` and
//! `Zdot Q + Q' Zdot' < 0`; the gain is `K = U Q P^{-1}`. The equality is
//! eliminated exactly through an SVD of `[X; Z]`, and the remaining
//! inequalities are handed to the interior-point solver with a free margin
//! `t` that is maximised. A positive optimal margin certifies feasibility,
//! which is then re-verified directly on the returned pair.

use nalgebra::SymmetricEigen;
use serde::{Deserialize, Serialize};

use crate::error::{dim_err, Error, Result};
use crate::lti::{feedback_interconnect, Exosystem, Interconnection, StateSpace};
use crate::numkit::{self, complex_rank, cond, eigenvalues, full_svd, hstack, match_error, vstack, Mat, Vector, C64};
use crate::par::Parallelism;
use crate::pipeline::{DataBatches, InternalModel};
use crate::realization::FilterGains;
use crate::sdp::{solve_sdp, SdpOptions, SdpProblem, SdpStatus};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LmiVerdict {
    Feasible,
    Infeasible,
    EqualityInconsistent,
}

#[derive(Clone, Debug)]
pub struct LmiSolution {
    pub verdict: LmiVerdict,
    pub p: Mat,
    pub q: Mat,
    pub epsilon: f64,
    /// Optimal margin of the normalized problem.
    pub t_star: f64,
    pub min_eig_p: f64,
    pub max_eig_lyap: f64,
    pub equality_residual: f64,
    pub iterations: usize,
    pub solver_status: String,
}

impl LmiSolution {
    pub fn is_feasible(&self) -> bool {
        self.verdict == LmiVerdict::Feasible
    }

    fn rejected(verdict: LmiVerdict, epsilon: f64, t_star: f64, iterations: usize, status: &str) -> Self {
        LmiSolution {
            verdict,
            p: Mat::zeros(0, 0),
            q: Mat::zeros(0, 0),
            epsilon,
            t_star,
            min_eig_p: f64::NAN,
            max_eig_lyap: f64::NAN,
            equality_residual: f64::NAN,
            iterations,
            solver_status: status.to_string(),
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct LmiOptions {
    /// Strictness margin; `None` means `1e-6 * ||Zdot||`.
    pub epsilon: Option<f64>,
    /// Scale each of X, Z (with Zdot) and U by its largest absolute entry.
    pub balance: bool,
    /// Normalized margins at or below this value count as infeasible.
    pub feasibility_threshold: f64,
    pub parallelism: Parallelism,
}

impl Default for LmiOptions {
    fn default() -> Self {
        LmiOptions { epsilon: None, balance: true, feasibility_threshold: 1e-9, parallelism: Parallelism::Auto }
    }
}

pub const EQUALITY_TOL: f64 = 1e-7;
pub const MAX_COND_P: f64 = 1e12;
pub const RIGHT_INVERSE_TOL: f64 = 1e-6;

fn max_abs_or_one(m: &Mat) -> f64 {
    let v = numkit::max_abs(m);
    if v > 0.0 {
        v
    } else {
        1.0
    }
}

fn sym_eig_extremes(m: &Mat) -> (f64, f64) {
    if m.nrows() == 0 {
        return (f64::INFINITY, f64::NEG_INFINITY);
    }
    let ev = SymmetricEigen::new(numkit::symmetrize(m)).eigenvalues;
    (ev.min(), ev.max())
}

/// Symmetric basis with unit Frobenius norm.
fn sym_basis(n: usize) -> Vec<Mat> {
    let mut out = Vec::with_capacity(n * (n + 1) / 2);
    let r = std::f64::consts::FRAC_1_SQRT_2;
    for i in 0..n {
        for j in i..n {
            let mut e = Mat::zeros(n, n);
            if i == j {
                e[(i, i)] = 1.0;
            } else {
                e[(i, j)] = r;
                e[(j, i)] = r;
            }
            out.push(e);
        }
    }
    out
}

/// Solves the design LMI on the given batches. `zero_rows` must equal the number of rows of `X`.
pub fn solve_design_lmi(b: &DataBatches, zero_rows: usize, opts: &LmiOptions) -> Result<LmiSolution> {
    b.validate()?;
    if zero_rows != b.x.nrows() {
        return dim_err(format!("zero_rows is {zero_rows} but X has {} rows", b.x.nrows()));
    }
    let mu = b.z.nrows();
    let n_s = b.n_samples();
    let epsilon = opts.epsilon.unwrap_or(1e-6 * numkit::norm2(&b.z_dot));
    if !(epsilon > 0.0) {
        return Err(Error::Argument("strictness margin must be positive".into()));
    }
    let (sx, sz, sd) = if opts.balance {
        (1.0 / max_abs_or_one(&b.x), 1.0 / max_abs_or_one(&b.z), 1.0 / max_abs_or_one(&b.z_dot))
    } else {
        (1.0, 1.0, 1.0)
    };
    let xs = &b.x * sx;
    let zs = &b.z * sz;
    let zds = &b.z_dot * sd;
    let m_all = vstack(&[&xs, &zs])?;
    let rows = m_all.nrows();
    let svd = full_svd(&m_all)?;
    let rank = numkit::rank_from_singular_values(&svd.s, 1e-12);
    // [0; P] must lie in range([X; Z]) column by column
    if rank < rows {
        let u_perp_z = svd.u.view((zero_rows, rank), (mu, rows - rank)).into_owned();
        if numkit::max_abs(&u_perp_z) > 1e-8 {
            return Ok(LmiSolution::rejected(LmiVerdict::EqualityInconsistent, epsilon, f64::NAN, 0, "not solved"));
        }
    }
    // particular solution map P -> pinv([X; Z]) [0; P]
    let mut pinv = Mat::zeros(n_s, rows);
    for k in 0..rank {
        pinv += svd.v.column(k) * svd.u.column(k).transpose() / svd.s[k];
    }
    let pinv_z = pinv.columns(zero_rows, mu).into_owned();
    // free directions of Q and their image under Zdot
    let v_null = svd.v.columns(rank, n_s - rank).into_owned();
    let y_img = &zds * &v_null;
    let (t_dirs, t_map) = if y_img.ncols() == 0 {
        (Mat::zeros(mu, 0), Mat::zeros(n_s, 0))
    } else {
        let ysvd = full_svd(&y_img)?;
        let ry = ysvd.s.iter().filter(|&&s| s > 1e-10 * numkit::norm2(&zds).max(1e-300)).count();
        let mut map = Mat::zeros(n_s, ry);
        for k in 0..ry {
            map.set_column(k, &(&v_null * ysvd.v.column(k) / ysvd.s[k]));
        }
        (ysvd.u.columns(0, ry).into_owned(), map)
    };
    let ry = t_dirs.ncols();
    let pb = sym_basis(mu);
    let zd_pinv = &zds * &pinv_z;
    let mut beta = 1e3;
    let id = Mat::identity(mu, mu);
    for attempt in 0..4 {
        let mut vars: Vec<Vec<(usize, Mat)>> = Vec::new();
        vars.push(vec![(0, id.clone()), (1, id.clone())]);
        for e in &pb {
            let l = &zd_pinv * e;
            vars.push(vec![(0, -e.clone()), (1, &l + l.transpose()), (2, e.clone())]);
        }
        for a in 0..ry {
            for c in 0..mu {
                let mut l = Mat::zeros(mu, mu);
                l.set_column(c, &t_dirs.column(a));
                let mut bound = Mat::zeros(ry + mu, ry + mu);
                bound[(a, ry + c)] = -1.0;
                bound[(ry + c, a)] = -1.0;
                vars.push(vec![(1, &l + l.transpose()), (3, bound)]);
            }
        }
        let mut sizes = vec![mu, mu, mu];
        let mut cblocks = vec![Mat::zeros(mu, mu), Mat::zeros(mu, mu), id.clone()];
        if ry > 0 {
            sizes.push(ry + mu);
            cblocks.push(Mat::identity(ry + mu, ry + mu) * beta);
        }
        let mut obj = Vector::zeros(vars.len());
        obj[0] = 1.0;
        let prob = SdpProblem { block_sizes: sizes, c: cblocks, a: vars, b: obj };
        let sol = solve_sdp(&prob, &SdpOptions { parallelism: opts.parallelism, ..Default::default() })?;
        let t_star = sol.y[0];
        let status = format!("{:?} after {} iterations", sol.status, sol.iterations);
        log::debug!("design LMI: margin {t_star:.3e}, {status}");
        let mut ps = Mat::zeros(mu, mu);
        for (k, e) in pb.iter().enumerate() {
            ps += e * sol.y[1 + k];
        }
        let mut tm = Mat::zeros(ry, mu);
        let off = 1 + pb.len();
        for a in 0..ry {
            for c in 0..mu {
                tm[(a, c)] = sol.y[off + a * mu + c];
            }
        }
        if t_star <= opts.feasibility_threshold {
            let bound_active = ry > 0 && numkit::norm2(&tm) > 0.9 * beta;
            if bound_active && attempt < 3 {
                log::debug!("free-direction bound {beta:.0e} is active, widening");
                beta *= 1e3;
                continue;
            }
            if sol.status == SdpStatus::Optimal {
                return Ok(LmiSolution::rejected(LmiVerdict::Infeasible, epsilon, t_star, sol.iterations, &status));
            }
            return Err(Error::Numeric(format!("LMI solver failure ({status})")));
        }
        let qs = &pinv_z * &ps + &t_map * &tm;
        // undo the balancing: Q = Qs / sz, P = Ps / sz^2
        let q = qs / sz;
        let p = numkit::symmetrize(&(ps / (sz * sz)));
        let lyap = &b.z_dot * &q;
        let (min_p, _) = sym_eig_extremes(&p);
        let (_, max_l) = sym_eig_extremes(&(&lyap + lyap.transpose()));
        let margin = min_p.min(-max_l);
        if !(margin > 0.0) {
            return Err(Error::Numeric(format!("solver margin {t_star:.3e} did not survive verification")));
        }
        let alpha = if margin < 2.0 * epsilon { 2.0 * epsilon / margin } else { 1.0 };
        let p = p * alpha;
        let q = q * alpha;
        let out = verify_lmi(b, zero_rows, &p, &q, epsilon)?;
        return Ok(LmiSolution {
            verdict: LmiVerdict::Feasible,
            p,
            q,
            epsilon,
            t_star,
            min_eig_p: out.0,
            max_eig_lyap: out.1,
            equality_residual: out.2,
            iterations: sol.iterations,
            solver_status: status,
        });
    }
    Err(Error::Numeric("LMI solver failure: free-direction bound kept binding".into()))
}

/// Independent check of a candidate pair. Returns `(min eig P, max eig of
/// Zdot Q + Q' Zdot', equality residual relative to ||P||)`.
pub fn verify_lmi(b: &DataBatches, zero_rows: usize, p: &Mat, q: &Mat, epsilon: f64) -> Result<(f64, f64, f64)> {
    let mu = b.z.nrows();
    if p.shape() != (mu, mu) || q.shape() != (b.n_samples(), mu) {
        return dim_err("P or Q has the wrong shape");
    }
    if numkit::max_abs(&(p - p.transpose())) > 1e-10 * numkit::max_abs(p).max(1e-300) {
        return Err(Error::Numeric("P is not symmetric".into()));
    }
    let (min_p, _) = sym_eig_extremes(p);
    let lyap = &b.z_dot * q;
    let (_, max_l) = sym_eig_extremes(&(&lyap + lyap.transpose()));
    let target = vstack(&[&Mat::zeros(zero_rows, mu), p])?;
    let m_all = vstack(&[&b.x, &b.z])?;
    let resid = (target - m_all * q).norm() / p.norm();
    if min_p < epsilon || max_l > -epsilon {
        return Err(Error::Numeric(format!(
            "strict inequalities violated (min eig P {min_p:.3e}, max eig {max_l:.3e}, epsilon {epsilon:.3e})"
        )));
    }
    if resid > EQUALITY_TOL {
        return Err(Error::Numeric(format!("equality residual {resid:.3e} exceeds {EQUALITY_TOL:.0e}")));
    }
    Ok((min_p, max_l, resid))
}

/// `K = U Q P^{-1}`, optionally split into `(K_zeta, K_eta)` at column `split_at`.
#[derive(Clone, Debug)]
pub struct Gain {
    pub k: Mat,
    pub k_zeta: Mat,
    pub k_eta: Option<Mat>,
}

pub fn extract_gain(b: &DataBatches, sol: &LmiSolution, split_at: Option<usize>) -> Result<Gain> {
    if !sol.is_feasible() {
        return Err(Error::Argument("gain extraction needs a feasible LMI solution".into()));
    }
    let c = cond(&sol.p);
    if !(c <= MAX_COND_P) {
        return Err(Error::Numeric(format!("P is ill-conditioned (cond {c:.3e})")));
    }
    let pinv = numkit::inverse(&sol.p)?;
    let k = &b.u * &sol.q * pinv;
    match split_at {
        None => Ok(Gain { k_zeta: k.clone(), k, k_eta: None }),
        Some(s) if s <= k.ncols() => Ok(Gain {
            k_zeta: k.columns(0, s).into_owned(),
            k_eta: Some(k.columns(s, k.ncols() - s).into_owned()),
            k,
        }),
        Some(s) => dim_err(format!("split position {s} exceeds gain width {}", k.ncols())),
    }
}

/// `Zdot Q P^{-1}`: the closed-loop design matrix reconstructed from data alone.
pub fn recover_closed_matrix(b: &DataBatches, sol: &LmiSolution) -> Result<Mat> {
    if !sol.is_feasible() {
        return Err(Error::Argument("needs a feasible LMI solution".into()));
    }
    let zdag = &sol.q * numkit::inverse(&sol.p)?;
    let mu = b.z.nrows();
    let resid = numkit::norm2(&(&b.z * &zdag - Mat::identity(mu, mu)));
    if resid > RIGHT_INVERSE_TOL {
        return Err(Error::Numeric(format!("Z Q P^-1 deviates from identity by {resid:.3e}")));
    }
    Ok(&b.z_dot * zdag)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ControllerKind {
    Stabilizer,
    Regulator,
}

#[derive(Clone, Debug)]
pub struct Controller {
    pub ss: StateSpace,
    pub kind: ControllerKind,
    pub k_zeta: Mat,
    pub k_eta: Option<Mat>,
}

/// Stabilizer `(F + G K, L, K, 0)` or the regulator with internal model.
pub fn build_controller(gains: &FilterGains, gain: &Gain, im: Option<&InternalModel>) -> Result<Controller> {
    let mu = gains.mu();
    let m = gains.m;
    let p = gains.p;
    match im {
        None => {
            if gain.k.shape() != (m, mu) {
                return dim_err(format!("K must be {m}x{mu}"));
            }
            let ss = StateSpace::new(&gains.f + &gains.g * &gain.k, gains.l.clone(), gain.k.clone(), Mat::zeros(m, p))?;
            Ok(Controller { ss, kind: ControllerKind::Stabilizer, k_zeta: gain.k.clone(), k_eta: None })
        }
        Some(im) => {
            let k_eta = gain.k_eta.clone().ok_or_else(|| Error::Argument("regulator needs K_eta".into()))?;
            let dq = im.dim();
            if gain.k_zeta.shape() != (m, mu) || k_eta.shape() != (m, dq) {
                return dim_err(format!("K_zeta must be {m}x{mu} and K_eta {m}x{dq}"));
            }
            let top = hstack(&[&(&gains.f + &gains.g * &gain.k_zeta), &(&gains.g * &k_eta)])?;
            let bot = hstack(&[&Mat::zeros(dq, mu), &im.phi])?;
            let ac = vstack(&[&top, &bot])?;
            let gamma_full = hstack(&[&im.gamma, &Mat::zeros(dq, p - im.q)])?;
            let bc = vstack(&[&gains.l, &gamma_full])?;
            let cc = hstack(&[&gain.k_zeta, &k_eta])?;
            let ss = StateSpace::new(ac, bc, cc, Mat::zeros(m, p))?;
            Ok(Controller { ss, kind: ControllerKind::Regulator, k_zeta: gain.k_zeta.clone(), k_eta: Some(k_eta) })
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Inclusion {
    pub required: [f64; 2],
    pub matched: [f64; 2],
    pub distance: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RegulationRecord {
    pub horizon: f64,
    pub e_initial: f64,
    pub e_final: f64,
    pub e_sup_early: f64,
    pub ratio: f64,
    pub rho: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Certificate {
    pub spectrum: Vec<[f64; 2]>,
    pub worst_real_part: f64,
    pub margin: f64,
    pub inclusion_tol: f64,
    pub inclusions: Vec<Inclusion>,
    pub regulation: Option<RegulationRecord>,
    pub pass: bool,
}

pub const INCLUSION_TOL: f64 = 1e-6;
pub const DEFAULT_HURWITZ_MARGIN: f64 = 1e-7;

fn c2(z: &C64) -> [f64; 2] {
    [z.re, z.im]
}

/// Spectral certificate of the plant/controller loop.
pub fn certify_closed_loop(plant: &StateSpace, ctrl: &Controller, required: &[C64], margin: f64) -> Result<Certificate> {
    certify_closed_loop_tol(plant, ctrl, required, margin, INCLUSION_TOL)
}

pub fn certify_closed_loop_tol(
    plant: &StateSpace,
    ctrl: &Controller,
    required: &[C64],
    margin: f64,
    inclusion_tol: f64,
) -> Result<Certificate> {
    let acl = feedback_interconnect(plant, &ctrl.ss)?;
    Ok(certify_matrix_tol(&acl, required, margin, inclusion_tol))
}

/// Certificate of an arbitrary closed-loop matrix. Never fails; numerical
/// trouble shows up as a failing certificate.
pub fn certify_matrix(acl: &Mat, required: &[C64], margin: f64) -> Certificate {
    certify_matrix_tol(acl, required, margin, INCLUSION_TOL)
}

pub fn certify_matrix_tol(acl: &Mat, required: &[C64], margin: f64, inclusion_tol: f64) -> Certificate {
    let spec = eigenvalues(acl).unwrap_or_default();
    let worst = if spec.is_empty() {
        f64::INFINITY
    } else {
        spec.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max)
    };
    let mut inclusions = Vec::new();
    let mut ok_incl = true;
    match numkit::hungarian_match(required, &spec) {
        Some(assign) => {
            for (r, j) in required.iter().zip(assign) {
                let d = (r - spec[j]).norm();
                ok_incl &= d <= inclusion_tol;
                inclusions.push(Inclusion { required: c2(r), matched: c2(&spec[j]), distance: d });
            }
        }
        None => ok_incl = required.is_empty(),
    }
    let pass = !spec.is_empty() && worst < -margin && ok_incl;
    Certificate {
        spectrum: spec.iter().map(c2).collect(),
        worst_real_part: worst,
        margin,
        inclusion_tol,
        inclusions,
        regulation: None,
        pass,
    }
}

impl Certificate {
    pub fn with_regulation(mut self, rec: RegulationRecord) -> Self {
        self.pass &= rec.pass;
        self.regulation = Some(rec);
        self
    }

    pub fn slowest_rate(&self) -> f64 {
        -self.worst_real_part
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("verdict: {}\n", if self.pass { "PASS" } else { "FAIL" }));
        s.push_str(&format!("closed-loop order: {}\n", self.spectrum.len()));
        s.push_str(&format!("worst real part: {:.12e} (margin {:.1e})\n", self.worst_real_part, self.margin));
        s.push_str("spectrum:\n");
        for z in &self.spectrum {
            s.push_str(&format!("  {:+.12e} {:+.12e}i\n", z[0], z[1]));
        }
        if !self.inclusions.is_empty() {
            s.push_str(&format!("required modes (tolerance {:.1e}):\n", self.inclusion_tol));
            for inc in &self.inclusions {
                s.push_str(&format!(
                    "  {:+.6} {:+.6}i -> distance {:.3e}\n",
                    inc.required[0], inc.required[1], inc.distance
                ));
            }
        }
        if let Some(r) = &self.regulation {
            s.push_str(&format!(
                "regulation: horizon {:.3} s, |e(T)| = {:.3e}, sup early |e| = {:.3e}, ratio {:.3e} (limit {}) -> {}\n",
                r.horizon,
                r.e_final,
                r.e_sup_early,
                r.ratio,
                r.rho,
                if r.pass { "ok" } else { "FAIL" }
            ));
        }
        s
    }
}

/// Closed loop with the exosystem active, for time-domain regulation checks.
#[derive(Clone, Debug)]
pub struct RegulationSetup<'a> {
    pub plant: &'a StateSpace,
    pub exo: &'a Exosystem,
    pub q: usize,
    pub w0: Vector,
    pub x0: Vector,
}

/// Builds the autonomous loop `(w, x, xi)`; returns it with the map to `e`.
pub fn regulation_loop(setup: &RegulationSetup, ctrl: &Controller) -> Result<(Mat, Vector, Mat)> {
    let plant = setup.plant;
    let (n, m, p) = (plant.n(), plant.m(), plant.p());
    let l = setup.exo.s.nrows();
    let mut ic = Interconnection::default();
    let xi = ic.add_block("exo", StateSpace::autonomous(setup.exo.s.clone(), Mat::identity(l, l))?, setup.w0.clone())?;
    let pb = StateSpace::new(
        plant.a.clone(),
        hstack(&[&plant.b, &setup.exo.p])?,
        plant.c.clone(),
        hstack(&[&Mat::zeros(p, m), &setup.exo.q])?,
    )?;
    let pi = ic.add_block("plant", pb, setup.x0.clone())?;
    let ci = ic.add_block("ctrl", ctrl.ss.clone(), Vector::zeros(ctrl.ss.n()))?;
    ic.connect_rows(xi, 0..l, pi, m)?;
    ic.connect_rows(ci, 0..m, pi, 0)?;
    ic.connect_rows(pi, 0..p, ci, 0)?;
    let aug = ic.augment()?;
    let e_map = aug.output_map_of("plant")?.rows(0, setup.q).into_owned();
    let _ = n;
    Ok((aug.a, aug.x0, e_map))
}

/// Plant output of the undisturbed closed loop started at plant state `x0`
/// with the controller at rest; one column per instant.
pub fn closed_loop_response(plant: &StateSpace, ctrl: &Controller, x0: &Vector, times: &[f64]) -> Result<Mat> {
    if x0.len() != plant.n() {
        return dim_err("initial plant state has the wrong length");
    }
    let acl = feedback_interconnect(plant, &ctrl.ss)?;
    let mut z0 = Vector::zeros(acl.nrows());
    z0.rows_mut(0, plant.n()).copy_from(x0);
    let xs = crate::lti::sample_exact(&acl, &z0, times)?;
    Ok(Mat::from_fn(plant.p(), xs.len(), |i, k| (plant.c.row(i) * xs[k].rows(0, plant.n()))[(0, 0)]))
}

/// `|e(t)|` of the regulation loop at the given instants.
pub fn error_profile(setup: &RegulationSetup, ctrl: &Controller, times: &[f64]) -> Result<Vec<f64>> {
    let (a, x0, e_map) = regulation_loop(setup, ctrl)?;
    let xs = crate::lti::sample_exact(&a, &x0, times)?;
    Ok(xs.iter().map(|x| (&e_map * x).norm()).collect())
}

/// Simulates the regulated error and applies `|e(T)| <= rho * sup_{t <= T/10} |e(t)|`.
pub fn regulation_check(setup: &RegulationSetup, ctrl: &Controller, horizon: f64, rho: f64, samples: usize) -> Result<RegulationRecord> {
    let samples = samples.max(20);
    let times: Vec<f64> = (0..=samples).map(|k| horizon * k as f64 / samples as f64).collect();
    let en = error_profile(setup, ctrl, &times)?;
    let early = en
        .iter()
        .zip(&times)
        .filter(|(_, t)| **t <= horizon / 10.0 + 1e-12)
        .map(|(e, _)| *e)
        .fold(0.0, f64::max);
    let e_final = *en.last().unwrap();
    let ratio = if early > 0.0 { e_final / early } else { 0.0 };
    Ok(RegulationRecord {
        horizon,
        e_initial: en[0],
        e_final,
        e_sup_early: early,
        ratio,
        rho,
        pass: e_final <= rho * early,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ResonanceProbe {
    pub eigenvalue: [f64; 2],
    pub rank: usize,
    pub required: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NonResonanceReport {
    pub holds: bool,
    pub probes: Vec<ResonanceProbe>,
    pub warnings: Vec<String>,
}

/// Rank of `[[A - sI, B], [C_e, 0]]` at every distinct eigenvalue of `S`,
/// where `C_e` is the first `q` rows of `C`.
pub fn check_non_resonance(plant: &StateSpace, q: usize, s: &Mat) -> Result<NonResonanceReport> {
    let (n, m, p) = (plant.n(), plant.m(), plant.p());
    if q > p {
        return dim_err(format!("q = {q} exceeds the number of outputs {p}"));
    }
    let mut warnings = Vec::new();
    if q > m {
        warnings.push(format!("q = {q} exceeds m = {m}; regulation is generically unsolvable"));
    }
    let ce = plant.c.rows(0, q).into_owned();
    let mut distinct: Vec<C64> = Vec::new();
    for z in eigenvalues(s)? {
        if !distinct.iter().any(|w| (w - z).norm() <= 1e-8 * (1.0 + z.norm())) {
            distinct.push(z);
        }
    }
    let top_re = |z: &C64| hstack(&[&(&plant.a - Mat::identity(n, n) * z.re), &plant.b]);
    let mut probes = Vec::new();
    let mut holds = true;
    for z in &distinct {
        let re = vstack(&[&top_re(z)?, &hstack(&[&ce, &Mat::zeros(q, m)])?])?;
        let mut im = Mat::zeros(n + q, n + m);
        im.view_mut((0, 0), (n, n)).copy_from(&(Mat::identity(n, n) * (-z.im)));
        let rank = complex_rank(&re, &im, 1e-10);
        holds &= rank == n + q;
        probes.push(ResonanceProbe { eigenvalue: c2(z), rank, required: n + q });
    }
    Ok(NonResonanceReport { holds, probes, warnings })
}

/// Largest distance between the closed-loop spectrum and the union of the
/// observer modes and the spectrum of the data-recovered design matrix.
pub fn decomposition_error(acl: &Mat, observer_part: &Mat, recovered: &Mat) -> Result<f64> {
    let full = eigenvalues(acl)?;
    let mut parts = eigenvalues(observer_part)?;
    parts.extend(eigenvalues(recovered)?);
    Ok(match_error(&parts, &full))
}
