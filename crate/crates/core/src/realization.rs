//! Filter tunings and the non-minimal realization they induce.
//!
//! A tuning `(F, G, L)` with `F` Hurwitz and `(F, G)` controllable lifts an
//! observable plant `(A, B, C)` to `zeta' = (F + L H) zeta + G u`, `y = H zeta`
//! whenever `Pi (F + L H) = A Pi`, `Pi G = B` and `H = C Pi`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{arg_err, dim_err, Error, Result};
use crate::lti::StateSpace;
use crate::numkit::{
    self, complex_rank, cond, eigenvalues, is_hurwitz, krylov, kron, match_error, numerical_rank,
    solve, vstack, Mat, Vector, C64,
};

/// Which family a tuning belongs to. All three are instances of the uniform
/// block structure `F = I_{p+m} (x) Lambda`, `G = [0; I_m (x) l]`, `L = [I_p (x) l; 0]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum TuningKind {
    StateFeedback { lambda: f64, gamma: f64 },
    Siso,
    MimoUniform,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FilterGains {
    pub f: Mat,
    pub g: Mat,
    pub l: Mat,
    pub lambda: Mat,
    pub ell: Vector,
    pub p: usize,
    pub m: usize,
    pub kind: TuningKind,
}

fn check_pair(lambda: &Mat, ell: &Vector) -> Result<()> {
    numkit::ensure_square(lambda, "Lambda")?;
    numkit::ensure_finite(lambda, "Lambda")?;
    if ell.len() != lambda.nrows() {
        return dim_err("l must have as many entries as Lambda has rows");
    }
    if lambda.nrows() == 0 {
        return arg_err("Lambda must be nonempty");
    }
    if !is_hurwitz(lambda, 0.0)? {
        return arg_err("Lambda must be Hurwitz");
    }
    let nu = lambda.nrows();
    if numerical_rank(&krylov(lambda, ell, nu), 1e-10) < nu {
        return arg_err("(Lambda, l) must be controllable");
    }
    Ok(())
}

impl FilterGains {
    /// Uniform-index MIMO tuning.
    pub fn mimo_uniform(p: usize, m: usize, lambda: Mat, ell: Vector) -> Result<Self> {
        check_pair(&lambda, &ell)?;
        if p == 0 || m == 0 {
            return arg_err("p and m must be positive");
        }
        let nu = lambda.nrows();
        let ellm = Mat::from_column_slice(nu, 1, ell.as_slice());
        let f = kron(&Mat::identity(p + m, p + m), &lambda);
        let g = vstack(&[&Mat::zeros(p * nu, m), &kron(&Mat::identity(m, m), &ellm)])?;
        let l = vstack(&[&kron(&Mat::identity(p, p), &ellm), &Mat::zeros(m * nu, p)])?;
        Ok(FilterGains { f, g, l, lambda, ell, p, m, kind: TuningKind::MimoUniform })
    }

    pub fn siso(lambda: Mat, ell: Vector) -> Result<Self> {
        let mut g = Self::mimo_uniform(1, 1, lambda, ell)?;
        g.kind = TuningKind::Siso;
        Ok(g)
    }

    /// Full-state measurement tuning `F = -lambda I`, `G = [0; gamma I]`, `L = [gamma I; 0]`.
    pub fn state_feedback(n: usize, m: usize, lambda: f64, gamma: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return arg_err("lambda must be positive");
        }
        if gamma == 0.0 || !gamma.is_finite() {
            return arg_err("gamma must be nonzero");
        }
        let mut g = Self::mimo_uniform(n, m, Mat::from_element(1, 1, -lambda), Vector::from_element(1, gamma))?;
        g.kind = TuningKind::StateFeedback { lambda, gamma };
        Ok(g)
    }

    /// Block size of the uniform structure.
    pub fn nu(&self) -> usize {
        self.lambda.nrows()
    }

    /// Filter state dimension.
    pub fn mu(&self) -> usize {
        self.f.nrows()
    }

    /// Spectrum `sigma(Lambda)` repeated `p` times, expected in `A - Pi L C`.
    pub fn observer_modes(&self) -> Result<Vec<C64>> {
        let ev = eigenvalues(&self.lambda)?;
        Ok((0..self.p).flat_map(|_| ev.iter().cloned()).collect())
    }
}

/// Observability indices of `(C, A)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndexProfile {
    pub indices: Vec<usize>,
}

impl IndexProfile {
    pub fn uniform(&self) -> Option<usize> {
        let first = *self.indices.first()?;
        self.indices.iter().all(|&v| v == first).then_some(first)
    }
    pub fn max(&self) -> usize {
        self.indices.iter().cloned().max().unwrap_or(0)
    }
}

/// Greedy row selection over `c_1, ..., c_p, c_1 A, ..., c_p A, ...`.
pub fn observability_indices(c: &Mat, a: &Mat) -> Result<IndexProfile> {
    numkit::ensure_square(a, "A")?;
    if c.ncols() != a.nrows() {
        return dim_err("C and A are incompatible");
    }
    let (p, n) = (c.nrows(), a.nrows());
    let mut basis: Vec<Vector> = Vec::new();
    let mut idx = vec![0usize; p];
    let mut alive = vec![true; p];
    let mut rows: Vec<Vector> = (0..p).map(|i| c.row(i).transpose()).collect();
    let scale = c.norm().max(f64::MIN_POSITIVE);
    for _k in 0..n {
        for i in 0..p {
            if !alive[i] || basis.len() == n {
                continue;
            }
            let r = rows[i].clone();
            let mut w = r.clone();
            for _ in 0..2 {
                for q in &basis {
                    let d = q.dot(&w);
                    w -= q * d;
                }
            }
            if w.norm() > 1e-9 * r.norm().max(scale * 1e-300) && r.norm() > 0.0 {
                basis.push(w.normalize());
                idx[i] += 1;
            } else {
                alive[i] = false;
            }
        }
        for (i, r) in rows.iter_mut().enumerate() {
            if alive[i] {
                *r = a.transpose() * &*r;
            }
        }
    }
    if basis.len() < n {
        return Err(Error::Structural(format!("(C, A) is not observable (rank {} < {n})", basis.len())));
    }
    Ok(IndexProfile { indices: idx })
}

/// Observer canonical form `A_o = T A T^{-1}`, `B_o = T B`, `C_o = C T^{-1}`.
#[derive(Clone, Debug)]
pub struct ObserverForm {
    pub t: Mat,
    pub t_inv: Mat,
    pub a_o: Mat,
    pub b_o: Mat,
    pub c_o: Mat,
    /// Last column of every diagonal block of `A_o` (n x p).
    pub a_m: Mat,
    pub a_bar: Mat,
    pub c_bar: Mat,
    pub profile: IndexProfile,
    pub cond_t: f64,
}

pub const MAX_COND_T: f64 = 1e10;

pub fn observer_canonical_form(c: &Mat, a: &Mat, b: &Mat) -> Result<ObserverForm> {
    let profile = observability_indices(c, a)?;
    let n = a.nrows();
    let p = c.nrows();
    if b.nrows() != n {
        return dim_err("B and A are incompatible");
    }
    let nu = &profile.indices;
    // selected rows in output-major order
    let mut sel = Mat::zeros(n, n);
    let mut r = 0;
    let mut row_of = vec![Vec::new(); p];
    for i in 0..p {
        let mut v = c.row(i).transpose();
        for _ in 0..nu[i] {
            sel.row_mut(r).copy_from(&v.transpose());
            row_of[i].push(r);
            r += 1;
            v = a.transpose() * v;
        }
    }
    let sel_inv = numkit::inverse(&sel)?;
    let mut cols: Vec<Vector> = Vec::with_capacity(n);
    for j in 0..p {
        if nu[j] == 0 {
            continue;
        }
        let mut w = sel_inv.column(row_of[j][nu[j] - 1]).into_owned();
        for _ in 0..nu[j] {
            cols.push(w.clone());
            w = a * w;
        }
    }
    let t_inv = Mat::from_columns(&cols);
    let cond_t = cond(&t_inv);
    if !(cond_t <= MAX_COND_T) {
        return Err(Error::Precision(format!("observer transform condition number {cond_t:.3e} exceeds {MAX_COND_T:.0e}")));
    }
    let t = numkit::inverse(&t_inv)?;
    let a_o = &t * a * &t_inv;
    let b_o = &t * b;
    let c_o = c * &t_inv;
    let mut a_bar = Mat::zeros(n, n);
    let mut c_bar = Mat::zeros(p, n);
    let mut a_m = Mat::zeros(n, p);
    let mut off = 0;
    let mut mcol = 0;
    for j in 0..p {
        if nu[j] == 0 {
            continue;
        }
        for k in 1..nu[j] {
            a_bar[(off + k, off + k - 1)] = 1.0;
        }
        let last = off + nu[j] - 1;
        c_bar[(j, last)] = 1.0;
        a_m.column_mut(mcol).copy_from(&a_o.column(last));
        mcol += 1;
        off += nu[j];
    }
    let a_m = a_m.columns(0, mcol).into_owned();
    // structural check: every non-last column equals the shift pattern
    let scale = 1.0 + a_o.norm();
    let mut off = 0;
    for j in 0..p {
        for k in 0..nu[j].saturating_sub(1) {
            let col = off + k;
            let mut expect = Vector::zeros(n);
            expect[col + 1] = 1.0;
            if (a_o.column(col) - expect).norm() > 1e-7 * scale * cond_t.max(1.0).sqrt() {
                return Err(Error::Precision("observer form lost its structural zeros".into()));
            }
        }
        off += nu[j];
    }
    Ok(ObserverForm { t, t_inv, a_o, b_o, c_o, a_m, a_bar, c_bar, profile, cond_t })
}

/// Solves `X Theta = Theta X`, `X beta = phi` for controllable `(Theta, beta)`
/// as `X = sum_i rho_i Theta^i` with `rho = R^{-1} phi`.
pub fn solve_commuting(theta: &Mat, beta: &Vector, phi: &Vector) -> Result<Mat> {
    numkit::ensure_square(theta, "Theta")?;
    let r = theta.nrows();
    if beta.len() != r || phi.len() != r {
        return dim_err("beta and phi must match Theta");
    }
    let ctrb = krylov(theta, beta, r);
    if numerical_rank(&ctrb, 1e-12) < r {
        return Err(Error::Structural("(Theta, beta) is not controllable".into()));
    }
    let rho = solve(&ctrb, &Mat::from_column_slice(r, 1, phi.as_slice()))?;
    let mut x = Mat::zeros(r, r);
    let mut pow = Mat::identity(r, r);
    for i in 0..r {
        x += &pow * rho[(i, 0)];
        pow = &pow * theta;
    }
    Ok(x)
}

/// The pair `(Pi, H)` together with its defining residuals.
#[derive(Clone, Debug)]
pub struct PiH {
    pub pi: Mat,
    pub h: Mat,
    pub residual_sylvester: f64,
    pub residual_input: f64,
    pub residual_output: f64,
}

impl PiH {
    pub fn max_residual(&self) -> f64 {
        self.residual_sylvester.max(self.residual_input).max(self.residual_output)
    }
}

fn rel(num: f64, den: f64) -> f64 {
    num / den.max(1.0)
}

pub fn lemma_residuals(sys: &StateSpace, gains: &FilterGains, pi: &Mat, h: &Mat) -> (f64, f64, f64) {
    let flh = &gains.f + &gains.l * h;
    let r1 = (pi * &flh - &sys.a * pi).norm();
    let r2 = (pi * &gains.g - &sys.b).norm();
    let r3 = (h - &sys.c * pi).norm();
    let s = sys.a.norm() * pi.norm() + pi.norm() * flh.norm();
    (rel(r1, s), rel(r2, sys.b.norm()), rel(r3, h.norm()))
}

/// Constructs `Pi` and `H` from the plant for a uniform-index tuning.
pub fn solve_pi_h(sys: &StateSpace, gains: &FilterGains) -> Result<PiH> {
    let (n, m, p) = (sys.n(), sys.m(), sys.p());
    if gains.p != p || gains.m != m {
        return dim_err(format!("tuning is for p={}, m={} but plant has p={p}, m={m}", gains.p, gains.m));
    }
    let (pi, h) = if let TuningKind::StateFeedback { lambda, gamma } = gains.kind {
        if sys.c == Mat::identity(n, n) {
            let pi = numkit::hstack(&[&(&sys.a + Mat::identity(n, n) * lambda), &sys.b])? / gamma;
            (pi.clone(), pi)
        } else {
            general_pi_h(sys, gains)?
        }
    } else {
        general_pi_h(sys, gains)?
    };
    let (r1, r2, r3) = lemma_residuals(sys, gains, &pi, &h);
    Ok(PiH { pi, h, residual_sylvester: r1, residual_input: r2, residual_output: r3 })
}

fn general_pi_h(sys: &StateSpace, gains: &FilterGains) -> Result<(Mat, Mat)> {
    let (n, m, p) = (sys.n(), sys.m(), sys.p());
    let nu = gains.nu();
    let ocf = observer_canonical_form(&sys.c, &sys.a, &sys.b)?;
    match ocf.profile.uniform() {
        Some(v) if v == nu => {}
        Some(v) => {
            return Err(Error::Structural(format!("plant observability index is {v} but the tuning uses {nu}")));
        }
        None => {
            return Err(Error::Structural(format!(
                "plant observability indices {:?} are not uniform",
                ocf.profile.indices
            )))
        }
    }
    let r = krylov(&gains.lambda, &gains.ell, nu);
    let r_inv = numkit::inverse(&r)?;
    let lam_nu_ell = gains.lambda.pow(nu as u32) * &gains.ell;
    let theta = -(&r_inv * lam_nu_ell);
    let theta_m = Mat::from_column_slice(nu, 1, theta.as_slice());
    let psi = &ocf.a_m + kron(&Mat::identity(p, p), &theta_m);
    let mut y = Mat::zeros(n, (p + m) * nu);
    let block = |phi: Vector| -> Result<Mat> {
        let x = solve_commuting(&gains.lambda, &gains.ell, &(&r * phi))?;
        Ok(&r_inv * x)
    };
    for i in 0..p {
        for j in 0..p {
            let phi = psi.view((i * nu, j), (nu, 1)).column(0).into_owned();
            y.view_mut((i * nu, j * nu), (nu, nu)).copy_from(&block(phi)?);
        }
        for j in 0..m {
            let phi = ocf.b_o.view((i * nu, j), (nu, 1)).column(0).into_owned();
            y.view_mut((i * nu, (p + j) * nu), (nu, nu)).copy_from(&block(phi)?);
        }
    }
    let pi = &ocf.t_inv * y;
    let h = &sys.c * &pi;
    Ok((pi, h))
}

/// Checks performed on a candidate realization.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RealizationReport {
    pub residual_sylvester: f64,
    pub residual_input: f64,
    pub residual_output: f64,
    pub rank_pi: usize,
    pub n: usize,
    pub controllable: bool,
    pub transfer_mismatch: f64,
    pub spectrum_containment: f64,
    pub observer_modes_error: f64,
}

impl RealizationReport {
    pub fn ok(&self, tol: f64) -> bool {
        self.residual_sylvester <= tol
            && self.residual_input <= tol
            && self.residual_output <= tol
            && self.rank_pi == self.n
            && self.controllable
            && self.transfer_mismatch <= tol
            && self.spectrum_containment <= 1e-6
            && self.observer_modes_error <= 1e-6
    }
}

type CMat = DMatrix<C64>;

fn to_c(m: &Mat) -> CMat {
    m.map(|v| C64::new(v, 0.0))
}

/// `C (sI - A)^{-1} B` at a complex point.
pub fn transfer_at(a: &Mat, b: &Mat, c: &Mat, s: C64) -> Result<CMat> {
    let n = a.nrows();
    let lhs = CMat::identity(n, n) * s - to_c(a);
    let x = lhs
        .lu()
        .solve(&to_c(b))
        .ok_or_else(|| Error::Numeric("probe point is a pole".into()))?;
    Ok(to_c(c) * x)
}

/// Deterministic probe points in the right half plane, away from typical spectra.
pub fn probe_points(k: usize) -> Vec<C64> {
    (0..k).map(|i| C64::new(0.35 + 0.41 * i as f64, 0.2 + 0.83 * i as f64 - 2.0)).collect()
}

pub fn verify_realization(sys: &StateSpace, gains: &FilterGains, pih: &PiH) -> Result<RealizationReport> {
    let (r1, r2, r3) = lemma_residuals(sys, gains, &pih.pi, &pih.h);
    let n = sys.n();
    let mu = gains.mu();
    let flh = &gains.f + &gains.l * &pih.h;
    let rank_pi = numerical_rank(&pih.pi, 1e-10);
    // PBH test on the union of the candidate eigenvalues
    let mut cands = eigenvalues(&sys.a)?;
    cands.extend(eigenvalues(&gains.lambda)?);
    let mut controllable = true;
    for s in &cands {
        let re = numkit::hstack(&[&(Mat::identity(mu, mu) * s.re - &flh), &gains.g])?;
        let im = numkit::hstack(&[&(Mat::identity(mu, mu) * s.im), &Mat::zeros(mu, gains.m)])?;
        if complex_rank(&re, &im, 1e-11) < mu {
            controllable = false;
        }
    }
    let mut mismatch: f64 = 0.0;
    for s in probe_points(10) {
        let t1 = transfer_at(&sys.a, &sys.b, &sys.c, s)?;
        let t2 = transfer_at(&flh, &gains.g, &pih.h, s)?;
        mismatch = mismatch.max((&t1 - &t2).norm() / t1.norm().max(1e-300));
    }
    let ev_flh = eigenvalues(&flh)?;
    let mut union = eigenvalues(&sys.a)?;
    union.extend(eigenvalues(&gains.f)?);
    let containment = match_error(&ev_flh, &union);
    let obs = eigenvalues(&(&sys.a - &pih.pi * &gains.l * &sys.c))?;
    let observer_modes_error = match_error(&gains.observer_modes()?, &obs);
    Ok(RealizationReport {
        residual_sylvester: r1,
        residual_input: r2,
        residual_output: r3,
        rank_pi,
        n,
        controllable,
        transfer_mismatch: mismatch,
        spectrum_containment: containment,
        observer_modes_error,
    })
}

/// `blockdiag(Lambda, Lambda)` helper for single-output tunings given a spectrum.
pub fn companion_tuning(poles: &[C64]) -> Result<(Mat, Vector)> {
    let poly = numkit::MonicPoly::from_roots(poles)?;
    let lambda = poly.companion();
    let mut ell = Vector::zeros(poles.len());
    if !poles.is_empty() {
        let k = poles.len() - 1;
        ell[k] = 1.0;
    }
    Ok((lambda, ell))
}
