//! Dense numerical kernels: matrix exponential, spectra, ranks, minimal
//! polynomials and a handful of structured-matrix helpers.

use nalgebra::linalg::balancing::balance_parlett_reinsch;
use nalgebra::{Complex, DMatrix, DVector, Schur, SVD};

use crate::error::{arg_err, dim_err, Error, Result};

pub type Mat = DMatrix<f64>;
pub type Vector = DVector<f64>;
pub type C64 = Complex<f64>;

/// Default relative tolerance used by rank decisions.
pub const RANK_REL_TOL: f64 = 1e-8;

const SVD_EPS: f64 = 1e-15;
const SVD_MAX_ITER: usize = 10_000;

pub fn ensure_square(m: &Mat, what: &str) -> Result<()> {
    if m.nrows() != m.ncols() {
        return dim_err(format!("{what} must be square, got {}x{}", m.nrows(), m.ncols()));
    }
    Ok(())
}

pub fn ensure_finite(m: &Mat, what: &str) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        arg_err(format!("{what} contains non-finite entries"))
    }
}

fn norm1(m: &Mat) -> f64 {
    (0..m.ncols())
        .map(|j| m.column(j).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

// Pade coefficients of degrees 3, 5, 7, 9 and 13.
const PADE3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const PADE5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const PADE7: [f64; 8] = [17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0];
const PADE9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const THETA: [f64; 5] = [
    1.495585217958292e-2,
    2.539398330063230e-1,
    9.504178996162932e-1,
    2.097847961257068,
    5.371920351148152,
];

fn pade_low(a: &Mat, b: &[f64]) -> (Mat, Mat) {
    let n = a.nrows();
    let id = Mat::identity(n, n);
    let a2 = a * a;
    let mut pow = id.clone();
    let mut u = Mat::zeros(n, n);
    let mut v = Mat::zeros(n, n);
    let deg = b.len() - 1;
    for k in (0..=deg).step_by(2) {
        v += &pow * b[k];
        if k + 1 <= deg {
            u += &pow * b[k + 1];
        }
        pow = &pow * &a2;
    }
    (a * u, v)
}

fn pade13(a: &Mat) -> (Mat, Mat) {
    let b = &PADE13;
    let n = a.nrows();
    let id = Mat::identity(n, n);
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let inner_u = &a6 * b[13] + &a4 * b[11] + &a2 * b[9];
    let u = a * (&a6 * inner_u + &a6 * b[7] + &a4 * b[5] + &a2 * b[3] + &id * b[1]);
    let inner_v = &a6 * b[12] + &a4 * b[10] + &a2 * b[8];
    let v = &a6 * inner_v + &a6 * b[6] + &a4 * b[4] + &a2 * b[2] + &id * b[0];
    (u, v)
}

/// Matrix exponential by scaling and squaring with a Pade approximant.
pub fn mat_exp(m: &Mat) -> Result<Mat> {
    ensure_square(m, "matrix")?;
    ensure_finite(m, "matrix")?;
    let n = m.nrows();
    if n == 0 {
        return Ok(Mat::zeros(0, 0));
    }
    let nrm = norm1(m);
    let solve = |u: Mat, v: Mat| -> Result<Mat> {
        let p = &v + &u;
        let q = &v - &u;
        q.lu()
            .solve(&p)
            .ok_or_else(|| Error::Numeric("singular Pade denominator".into()))
    };
    for (i, coeffs) in [&PADE3[..], &PADE5[..], &PADE7[..], &PADE9[..]].iter().enumerate() {
        if nrm <= THETA[i] {
            let (u, v) = pade_low(m, coeffs);
            return solve(u, v);
        }
    }
    let s = if nrm > THETA[4] {
        (nrm / THETA[4]).log2().ceil().max(0.0) as i32
    } else {
        0
    };
    let scaled = m / 2f64.powi(s);
    let (u, v) = pade13(&scaled);
    let mut r = solve(u, v)?;
    for _ in 0..s {
        r = &r * &r;
    }
    ensure_finite(&r, "matrix exponential")?;
    Ok(r)
}

fn cmp_eig(a: &C64, b: &C64) -> std::cmp::Ordering {
    a.re.partial_cmp(&b.re)
        .unwrap_or(std::cmp::Ordering::Equal)
        .then(a.im.partial_cmp(&b.im).unwrap_or(std::cmp::Ordering::Equal))
}

/// Eigenvalues of a real square matrix, sorted by real then imaginary part.
pub fn eigenvalues(m: &Mat) -> Result<Vec<C64>> {
    ensure_square(m, "matrix")?;
    ensure_finite(m, "matrix")?;
    let n = m.nrows();
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut b = m.clone();
    balance_parlett_reinsch(&mut b);
    // the deflation test at machine epsilon can stall on near-multiples of
    // the identity; a few ulps more is enough there
    let iters = 100 * n.max(10) * n.max(10);
    let schur = [1.0, 8.0, 64.0, 512.0, 4096.0]
        .iter()
        .find_map(|k| Schur::try_new(b.clone(), k * f64::EPSILON, iters))
        .ok_or_else(|| Error::Numeric("Schur iteration did not converge".into()))?;
    let mut ev: Vec<C64> = schur.complex_eigenvalues().iter().cloned().collect();
    for z in ev.iter_mut() {
        if z.im.abs() <= 1e-14 * (1.0 + z.re.abs()) {
            z.im = 0.0;
        }
    }
    ev.sort_by(cmp_eig);
    Ok(ev)
}

pub fn spectral_abscissa(m: &Mat) -> Result<f64> {
    Ok(eigenvalues(m)?.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max))
}

/// True when every eigenvalue has real part below `-margin`.
pub fn is_hurwitz(m: &Mat, margin: f64) -> Result<bool> {
    if m.nrows() == 0 {
        return Ok(true);
    }
    Ok(spectral_abscissa(m)? < -margin)
}

pub fn singular_values(m: &Mat) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let svd = SVD::try_new(m.clone(), false, false, SVD_EPS, SVD_MAX_ITER)
        .unwrap_or_else(|| SVD::new(m.clone(), false, false));
    let mut s: Vec<f64> = svd.singular_values.iter().cloned().collect();
    s.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    s
}

/// Number of singular values above `rel_tol` times the largest one.
pub fn numerical_rank(m: &Mat, rel_tol: f64) -> usize {
    rank_from_singular_values(&singular_values(m), rel_tol)
}

pub fn rank_from_singular_values(s: &[f64], rel_tol: f64) -> usize {
    match s.first() {
        Some(&smax) if smax > 0.0 => s.iter().filter(|&&v| v > rel_tol * smax).count(),
        _ => 0,
    }
}

/// 2-norm condition number; infinite for rank-deficient or empty input.
pub fn cond(m: &Mat) -> f64 {
    let s = singular_values(m);
    match (s.first(), s.last()) {
        (Some(&a), Some(&b)) if b > 0.0 && s.len() == m.nrows().min(m.ncols()) => a / b,
        _ => f64::INFINITY,
    }
}

pub fn norm2(m: &Mat) -> f64 {
    singular_values(m).first().cloned().unwrap_or(0.0)
}

/// Full SVD with singular values sorted in decreasing order.
pub struct FullSvd {
    pub u: Mat,
    pub s: Vec<f64>,
    pub v: Mat,
}

pub fn full_svd(m: &Mat) -> Result<FullSvd> {
    let (r, c) = m.shape();
    if r == 0 || c == 0 {
        return Ok(FullSvd { u: Mat::identity(r, r), s: Vec::new(), v: Mat::identity(c, c) });
    }
    // nalgebra returns thin factors; pad with an orthonormal complement.
    let svd = SVD::try_new(m.clone(), true, true, SVD_EPS, SVD_MAX_ITER)
        .ok_or_else(|| Error::Numeric("SVD did not converge".into()))?;
    let u = svd.u.ok_or_else(|| Error::Numeric("SVD without U".into()))?;
    let vt = svd.v_t.ok_or_else(|| Error::Numeric("SVD without V".into()))?;
    let k = svd.singular_values.len();
    let mut idx: Vec<usize> = (0..k).collect();
    idx.sort_by(|&a, &b| {
        svd.singular_values[b]
            .partial_cmp(&svd.singular_values[a])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let s: Vec<f64> = idx.iter().map(|&i| svd.singular_values[i]).collect();
    let u_thin = Mat::from_fn(r, k, |i, j| u[(i, idx[j])]);
    let v_thin = Mat::from_fn(c, k, |i, j| vt[(idx[j], i)]);
    Ok(FullSvd { u: complete_basis(&u_thin), s, v: complete_basis(&v_thin) })
}

/// Extends orthonormal columns to a full orthonormal basis.
pub fn complete_basis(q: &Mat) -> Mat {
    let (n, k) = q.shape();
    if k >= n {
        return q.columns(0, n).into_owned();
    }
    let mut cols: Vec<Vector> = (0..k).map(|j| q.column(j).into_owned()).collect();
    for e in 0..n {
        if cols.len() == n {
            break;
        }
        let mut v = Vector::zeros(n);
        v[e] = 1.0;
        for _ in 0..2 {
            for c in &cols {
                let d = c.dot(&v);
                v -= c * d;
            }
        }
        let nv = v.norm();
        if nv > 1e-8 {
            cols.push(v / nv);
        }
    }
    Mat::from_columns(&cols)
}

/// Orthonormal basis of the null space of `m`.
pub fn null_space(m: &Mat, rel_tol: f64) -> Result<Mat> {
    let c = m.ncols();
    if m.nrows() == 0 {
        return Ok(Mat::identity(c, c));
    }
    let svd = full_svd(m)?;
    let r = rank_from_singular_values(&svd.s, rel_tol);
    Ok(svd.v.columns(r, c - r).into_owned())
}

/// Moore-Penrose pseudo-inverse with a relative singular-value cutoff.
pub fn pinv(m: &Mat, rel_tol: f64) -> Result<Mat> {
    let (r, c) = m.shape();
    if r == 0 || c == 0 {
        return Ok(Mat::zeros(c, r));
    }
    let svd = full_svd(m)?;
    let rank = rank_from_singular_values(&svd.s, rel_tol);
    let mut out = Mat::zeros(c, r);
    for k in 0..rank {
        out += svd.v.column(k) * svd.u.column(k).transpose() / svd.s[k];
    }
    Ok(out)
}

pub fn solve(a: &Mat, b: &Mat) -> Result<Mat> {
    ensure_square(a, "system matrix")?;
    if a.nrows() != b.nrows() {
        return dim_err("right-hand side rows differ from system size");
    }
    a.clone()
        .full_piv_lu()
        .solve(b)
        .ok_or_else(|| Error::Numeric("singular linear system".into()))
}

pub fn inverse(a: &Mat) -> Result<Mat> {
    ensure_square(a, "matrix")?;
    a.clone()
        .try_inverse()
        .ok_or_else(|| Error::Numeric("matrix is singular".into()))
}

pub fn kron(a: &Mat, b: &Mat) -> Mat {
    a.kronecker(b)
}

pub fn block_diag(blocks: &[&Mat]) -> Mat {
    let r: usize = blocks.iter().map(|b| b.nrows()).sum();
    let c: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = Mat::zeros(r, c);
    let (mut i, mut j) = (0, 0);
    for b in blocks {
        out.view_mut((i, j), b.shape()).copy_from(*b);
        i += b.nrows();
        j += b.ncols();
    }
    out
}

pub fn vstack(blocks: &[&Mat]) -> Result<Mat> {
    let c = blocks.iter().map(|b| b.ncols()).find(|&c| c > 0).unwrap_or(0);
    if blocks.iter().any(|b| b.nrows() > 0 && b.ncols() != c) {
        return dim_err("vstack column counts differ");
    }
    let r: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = Mat::zeros(r, c);
    let mut i = 0;
    for b in blocks {
        if b.nrows() > 0 {
            out.view_mut((i, 0), b.shape()).copy_from(*b);
            i += b.nrows();
        }
    }
    Ok(out)
}

pub fn hstack(blocks: &[&Mat]) -> Result<Mat> {
    let r = blocks.iter().map(|b| b.nrows()).find(|&r| r > 0).unwrap_or(0);
    if blocks.iter().any(|b| b.ncols() > 0 && b.nrows() != r) {
        return dim_err("hstack row counts differ");
    }
    let c: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = Mat::zeros(r, c);
    let mut j = 0;
    for b in blocks {
        if b.ncols() > 0 {
            out.view_mut((0, j), b.shape()).copy_from(*b);
            j += b.ncols();
        }
    }
    Ok(out)
}

pub fn mat_from_rows(rows: &[Vec<f64>]) -> Result<Mat> {
    let r = rows.len();
    let c = rows.first().map(|x| x.len()).unwrap_or(0);
    if rows.iter().any(|x| x.len() != c) {
        return dim_err("ragged matrix rows");
    }
    Ok(Mat::from_fn(r, c, |i, j| rows[i][j]))
}

pub fn mat_to_rows(m: &Mat) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().cloned().collect()).collect()
}

/// Controllability matrix `[b, Ab, ..., A^{n-1} b]` for a single column `b`.
pub fn krylov(a: &Mat, b: &Vector, k: usize) -> Mat {
    let mut cols = Vec::with_capacity(k);
    let mut v = b.clone();
    for _ in 0..k {
        cols.push(v.clone());
        v = a * v;
    }
    if cols.is_empty() {
        return Mat::zeros(b.len(), 0);
    }
    Mat::from_columns(&cols)
}

/// Monic polynomial `s^d + c_{d-1} s^{d-1} + ... + c_0`, stored as `[c_0, ..., c_{d-1}]`.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MonicPoly {
    pub coeffs: Vec<f64>,
}

impl MonicPoly {
    pub fn degree(&self) -> usize {
        self.coeffs.len()
    }

    pub fn from_roots(roots: &[C64]) -> Result<Self> {
        let mut c = vec![C64::new(1.0, 0.0)];
        for r in roots {
            let mut next = vec![C64::new(0.0, 0.0); c.len() + 1];
            for (k, ck) in c.iter().enumerate() {
                next[k + 1] += ck;
                next[k] -= ck * r;
            }
            c = next;
        }
        let scale = c.iter().map(|z| z.norm()).fold(1.0, f64::max);
        if c.iter().any(|z| z.im.abs() > 1e-9 * scale) {
            return arg_err("roots are not closed under conjugation");
        }
        let d = roots.len();
        Ok(MonicPoly { coeffs: c[..d].iter().map(|z| z.re).collect() })
    }

    pub fn eval_mat(&self, m: &Mat) -> Mat {
        let n = m.nrows();
        let mut acc = Mat::identity(n, n);
        for k in (0..self.degree()).rev() {
            acc = &acc * m + Mat::identity(n, n) * self.coeffs[k];
        }
        acc
    }

    pub fn eval(&self, s: C64) -> C64 {
        let mut acc = C64::new(1.0, 0.0);
        for k in (0..self.degree()).rev() {
            acc = acc * s + self.coeffs[k];
        }
        acc
    }

    /// Companion matrix with ones on the superdiagonal and last row `-c`.
    pub fn companion(&self) -> Mat {
        let d = self.degree();
        let mut m = Mat::zeros(d, d);
        for i in 0..d.saturating_sub(1) {
            m[(i, i + 1)] = 1.0;
        }
        if d > 0 {
            for j in 0..d {
                m[(d - 1, j)] = -self.coeffs[j];
            }
        }
        m
    }

    /// Companion matrix with ones on the subdiagonal and last column `-c`.
    pub fn companion_col(&self) -> Mat {
        self.companion().transpose()
    }
}

/// Characteristic polynomial computed from the spectrum.
pub fn char_poly(m: &Mat) -> Result<MonicPoly> {
    MonicPoly::from_roots(&eigenvalues(m)?)
}

fn krylov_minpoly(m: &Mat, probe: &Vector, tol: f64) -> Result<MonicPoly> {
    let n = m.nrows();
    let mut basis: Vec<Vector> = Vec::new();
    let mut raw: Vec<Vector> = Vec::new();
    let mut v = probe.normalize();
    for k in 0..=n {
        raw.push(v.clone());
        let mut w = v.clone();
        for _ in 0..2 {
            for q in &basis {
                let d = q.dot(&w);
                w -= q * d;
            }
        }
        if w.norm() <= tol * v.norm().max(f64::MIN_POSITIVE) || k == n {
            let k = raw.len() - 1;
            let kmat = Mat::from_columns(&raw[..k]);
            let rhs = -raw[k].clone();
            let sol = if k == 0 {
                Vector::zeros(0)
            } else {
                let svd = SVD::new(kmat, true, true);
                svd.solve(&rhs, 1e-14)
                    .map_err(|e| Error::Numeric(format!("minimal polynomial solve: {e}")))?
            };
            return Ok(MonicPoly { coeffs: sol.iter().cloned().collect() });
        }
        let nw = w.norm();
        basis.push(w / nw);
        v = m * &v;
    }
    unreachable!()
}

/// Minimal polynomial via Krylov sequences from two deterministic probes,
/// verified by evaluating the polynomial at the matrix.
pub fn minimal_polynomial(m: &Mat, tol: f64) -> Result<MonicPoly> {
    ensure_square(m, "matrix")?;
    ensure_finite(m, "matrix")?;
    let n = m.nrows();
    if n == 0 {
        return Ok(MonicPoly { coeffs: Vec::new() });
    }
    let scale = norm2(m);
    if scale == 0.0 {
        return Ok(MonicPoly { coeffs: vec![0.0] });
    }
    let ms = m / scale;
    let probe = |seed: u64| -> Vector {
        let mut state = seed.wrapping_mul(0x9E3779B97F4A7C15).wrapping_add(1);
        Vector::from_fn(n, |_, _| {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        })
    };
    let krylov_tol = tol.max(1e-12).sqrt() * 1e-2;
    let p1 = krylov_minpoly(&ms, &probe(1), krylov_tol)?;
    let p2 = krylov_minpoly(&ms, &probe(2), krylov_tol)?;
    let pick = if p2.degree() > p1.degree() { p2.clone() } else { p1.clone() };
    let other = if p2.degree() > p1.degree() { p1 } else { p2 };
    if other.degree() == pick.degree() {
        let diff = pick
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let mag = pick.coeffs.iter().map(|a| a.abs()).fold(1.0, f64::max);
        if diff > 1e-6 * mag {
            return Err(Error::Numeric("minimal polynomial probes disagree".into()));
        }
    }
    let resid = pick.eval_mat(&ms);
    let bound: f64 = 1.0 + pick.coeffs.iter().map(|c| c.abs()).sum::<f64>();
    if resid.norm() > tol.max(1e-10) * bound * 1e2 {
        return Err(Error::Numeric(format!(
            "minimal polynomial verification failed (residual {:.3e})",
            resid.norm()
        )));
    }
    let d = pick.degree();
    let coeffs = (0..d).map(|i| pick.coeffs[i] * scale.powi((d - i) as i32)).collect();
    Ok(MonicPoly { coeffs })
}

/// Rank of a complex matrix `re + i im` via its real embedding.
pub fn complex_rank(re: &Mat, im: &Mat, rel_tol: f64) -> usize {
    let emb = Mat::from_fn(2 * re.nrows(), 2 * re.ncols(), |i, j| {
        let (bi, ii) = (i / re.nrows(), i % re.nrows());
        let (bj, jj) = (j / re.ncols(), j % re.ncols());
        match (bi, bj) {
            (0, 0) | (1, 1) => re[(ii, jj)],
            (0, 1) => -im[(ii, jj)],
            _ => im[(ii, jj)],
        }
    });
    numerical_rank(&emb, rel_tol) / 2
}

/// Optimal assignment of `required` values onto distinct entries of `available`
/// minimising the total distance. Returns the index into `available` for each
/// required value, or `None` when there are more required than available.
pub fn hungarian_match(required: &[C64], available: &[C64]) -> Option<Vec<usize>> {
    let n = required.len();
    let m = available.len();
    if n > m {
        return None;
    }
    if n == 0 {
        return Some(Vec::new());
    }
    let cost = |i: usize, j: usize| (required[i - 1] - available[j - 1]).norm();
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=m {
                if !used[j] {
                    let cur = cost(i0, j) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut ans = vec![0usize; n];
    for j in 1..=m {
        if p[j] != 0 {
            ans[p[j] - 1] = j - 1;
        }
    }
    Some(ans)
}

/// Largest matching error, relative to `max(1, |required|)`, after optimal assignment.
pub fn match_error(required: &[C64], available: &[C64]) -> f64 {
    match hungarian_match(required, available) {
        None => f64::INFINITY,
        Some(a) => required
            .iter()
            .zip(a)
            .map(|(r, j)| (r - available[j]).norm() / r.norm().max(1.0))
            .fold(0.0, f64::max),
    }
}

pub fn max_abs(m: &Mat) -> f64 {
    m.iter().fold(0.0, |a, v| a.max(v.abs()))
}

pub fn symmetrize(m: &Mat) -> Mat {
    (m + m.transpose()) * 0.5
}

#[cfg(test)]
mod tests {
    use super::*;

    fn taylor_exp(m: &Mat) -> Mat {
        // squaring of a long Taylor series, independent of the Pade path
        let n = m.nrows();
        let s = 12;
        let a = m / 2f64.powi(s);
        let mut term = Mat::identity(n, n);
        let mut sum = term.clone();
        for k in 1..30 {
            term = &term * &a / k as f64;
            sum += &term;
        }
        for _ in 0..s {
            sum = &sum * &sum;
        }
        sum
    }

    #[test]
    fn exp_of_zero_and_diagonal() {
        let z = Mat::zeros(3, 3);
        assert_eq!(mat_exp(&z).unwrap(), Mat::identity(3, 3));
        let d = Mat::from_diagonal(&Vector::from_vec(vec![-1.0, 0.5, 2.0]));
        let e = mat_exp(&d).unwrap();
        for (i, v) in [-1.0f64, 0.5, 2.0].iter().enumerate() {
            assert!((e[(i, i)] - v.exp()).abs() < 1e-13 * v.exp());
        }
    }

    #[test]
    fn eigenvalues_of_perturbed_identity() {
        // rounding noise around -I, as left by A - Pi L C with a scalar tuning
        let m = Mat::from_row_slice(
            3,
            3,
            &[
                -1.0000000000000004,
                2.7755575615628914e-17,
                0.0,
                -4.440892098500626e-16,
                -0.9999999999999998,
                4.440892098500626e-16,
                1.1102230246251565e-16,
                -3.469446951953614e-16,
                -0.9999999999999997,
            ],
        );
        let ev = eigenvalues(&m).unwrap();
        assert_eq!(ev.len(), 3);
        assert!(ev.iter().all(|z| (z - C64::new(-1.0, 0.0)).norm() < 1e-12));

        // same shape with noise near 1e-12
        let m = Mat::from_row_slice(
            3,
            3,
            &[
                -1.0000000000004685,
                -1.3787582187063663e-12,
                -1.5112910922709943e-12,
                7.827072323607354e-13,
                -0.999999999999011,
                1.8573476090466556e-12,
                7.662481760206674e-13,
                1.5240031459029524e-12,
                -0.9999999999979969,
            ],
        );
        let ev = eigenvalues(&m).unwrap();
        assert!(ev.iter().all(|z| (z - C64::new(-1.0, 0.0)).norm() < 1e-8));
    }

    #[test]
    fn exp_rotation() {
        let w = 2.5;
        let m = Mat::from_row_slice(2, 2, &[0.0, w, -w, 0.0]);
        let e = mat_exp(&m).unwrap();
        let expect = Mat::from_row_slice(2, 2, &[w.cos(), w.sin(), -w.sin(), w.cos()]);
        assert!((e - expect).norm() < 1e-13);
    }

    #[test]
    fn exp_matches_taylor_for_all_pade_orders() {
        for &scale in &[0.01, 0.2, 0.9, 2.0, 5.0, 40.0] {
            let m = Mat::from_fn(4, 4, |i, j| ((i * 7 + j * 3) % 5) as f64 - 2.0) * (scale / 6.0);
            let a = mat_exp(&m).unwrap();
            let b = taylor_exp(&m);
            assert!((&a - &b).norm() <= 1e-11 * b.norm(), "scale {scale}");
        }
    }

    #[test]
    fn exp_nilpotent_jordan() {
        let m = Mat::from_row_slice(3, 3, &[0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0]);
        let e = mat_exp(&m).unwrap();
        let expect = Mat::from_row_slice(3, 3, &[1.0, 1.0, 0.5, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0]);
        assert!((e - expect).norm() < 1e-14);
    }

    #[test]
    fn eigenvalues_companion() {
        let p = MonicPoly::from_roots(&[
            C64::new(-1.0, 0.0),
            C64::new(-2.0, 3.0),
            C64::new(-2.0, -3.0),
            C64::new(0.5, 0.0),
        ])
        .unwrap();
        let ev = eigenvalues(&p.companion()).unwrap();
        let expect = [C64::new(-2.0, -3.0), C64::new(-2.0, 3.0), C64::new(-1.0, 0.0), C64::new(0.5, 0.0)];
        for (a, b) in ev.iter().zip(expect.iter()) {
            assert!((a - b).norm() < 1e-10);
        }
        assert!(!is_hurwitz(&p.companion(), 0.0).unwrap());
    }

    #[test]
    fn rank_and_nullspace() {
        let m = Mat::from_row_slice(3, 4, &[1.0, 2.0, 3.0, 4.0, 2.0, 4.0, 6.0, 8.0, 0.0, 1.0, 0.0, 1.0]);
        assert_eq!(numerical_rank(&m, RANK_REL_TOL), 2);
        let ns = null_space(&m, RANK_REL_TOL).unwrap();
        assert_eq!(ns.ncols(), 2);
        assert!((&m * &ns).norm() < 1e-12);
        let pi = pinv(&m, RANK_REL_TOL).unwrap();
        assert!((&m * &pi * &m - &m).norm() < 1e-12);
    }

    #[test]
    fn minimal_polynomial_of_repeated_diagonal() {
        let lam = Mat::from_diagonal(&Vector::from_vec(vec![-4.0, -8.0]));
        let f = kron(&Mat::identity(4, 4), &lam);
        let mp = minimal_polynomial(&f, 1e-10).unwrap();
        assert_eq!(mp.degree(), 2);
        assert!((mp.coeffs[0] - 32.0).abs() < 1e-8);
        assert!((mp.coeffs[1] - 12.0).abs() < 1e-8);
    }

    #[test]
    fn minimal_polynomial_of_zero_and_jordan() {
        let z = Mat::zeros(2, 2);
        assert_eq!(minimal_polynomial(&z, 1e-10).unwrap().coeffs, vec![0.0]);
        let j = Mat::from_row_slice(3, 3, &[0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let mp = minimal_polynomial(&j, 1e-10).unwrap();
        assert_eq!(mp.degree(), 2);
        assert!(mp.coeffs.iter().all(|c| c.abs() < 1e-9));
    }

    #[test]
    fn minimal_polynomial_harmonic_exosystem() {
        let w = std::f64::consts::PI / 5.0;
        let s = Mat::from_row_slice(3, 3, &[0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0, -w * w, 0.0]);
        let mp = minimal_polynomial(&s, 1e-10).unwrap();
        assert_eq!(mp.degree(), 3);
        assert!((mp.coeffs[1] - w * w).abs() < 1e-9);
        assert!((mp.companion() - s).norm() < 1e-9);
    }

    #[test]
    fn hungarian_prefers_global_optimum() {
        let req = [C64::new(0.0, 0.0), C64::new(1.0, 0.0)];
        let avail = [C64::new(0.9, 0.0), C64::new(0.1, 0.0), C64::new(5.0, 0.0)];
        assert_eq!(hungarian_match(&req, &avail).unwrap(), vec![1, 0]);
        assert!(match_error(&req, &avail) < 0.11);
        assert!(hungarian_match(&req, &avail[..1]).is_none());
    }

    #[test]
    fn complex_rank_detects_imaginary_zero() {
        // [[i, 1], [1, -i]] has rank 1
        let re = Mat::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let im = Mat::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert_eq!(complex_rank(&re, &im, 1e-10), 1);
    }

    #[test]
    fn full_svd_is_square_orthogonal() {
        let m = Mat::from_fn(3, 5, |i, j| (i + 2 * j) as f64 + 0.3 * (i * j) as f64);
        let f = full_svd(&m).unwrap();
        assert_eq!(f.u.shape(), (3, 3));
        assert_eq!(f.v.shape(), (5, 5));
        assert!((f.v.transpose() * &f.v - Mat::identity(5, 5)).norm() < 1e-12);
        let mut sig = Mat::zeros(3, 5);
        for (k, s) in f.s.iter().enumerate() {
            sig[(k, k)] = *s;
        }
        assert!((&f.u * sig * f.v.transpose() - m).norm() < 1e-11);
    }
}
