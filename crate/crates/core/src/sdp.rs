//! Primal-dual interior-point solver for small block-diagonal semidefinite
//! programs in inequality form:
//!
//! maximize `b' y` subject to `S(y) = C - sum_i y_i A_i >= 0` (blockwise),
//!
//! paired with the primal `minimize <C, X>` s.t. `<A_i, X> = b_i`, `X >= 0`.
//! Search directions use the HKM scaling with a Mehrotra predictor-corrector.

use nalgebra::{Cholesky, SymmetricEigen};

use crate::error::{Error, Result};
use crate::numkit::{Mat, Vector};
use crate::par::{map_range, Parallelism};

#[derive(Clone, Debug)]
pub struct SdpProblem {
    pub block_sizes: Vec<usize>,
    pub c: Vec<Mat>,
    /// For each variable, the blocks it touches and its coefficient matrix there.
    pub a: Vec<Vec<(usize, Mat)>>,
    pub b: Vector,
}

#[derive(Clone, Copy, Debug)]
pub struct SdpOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub parallelism: Parallelism,
}

impl Default for SdpOptions {
    fn default() -> Self {
        SdpOptions { tol: 1e-9, max_iter: 120, parallelism: Parallelism::Auto }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SdpStatus {
    Optimal,
    MaxIterations,
    Stalled,
}

#[derive(Clone, Debug)]
pub struct SdpSolution {
    pub y: Vector,
    pub s: Vec<Mat>,
    pub x: Vec<Mat>,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub iterations: usize,
    pub status: SdpStatus,
}

fn ip(a: &Mat, b: &Mat) -> f64 {
    a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| x * y).sum()
}

fn sym(m: &Mat) -> Mat {
    (m + m.transpose()) * 0.5
}

impl SdpProblem {
    pub fn validate(&self) -> Result<()> {
        if self.c.len() != self.block_sizes.len() {
            return Err(Error::Dimension("one C block per block size is required".into()));
        }
        for (k, c) in self.c.iter().enumerate() {
            if c.shape() != (self.block_sizes[k], self.block_sizes[k]) {
                return Err(Error::Dimension(format!("C block {k} has the wrong size")));
            }
        }
        if self.a.len() != self.b.len() {
            return Err(Error::Dimension("one constraint list per variable is required".into()));
        }
        for list in &self.a {
            for (blk, m) in list {
                let sz = *self.block_sizes.get(*blk).ok_or_else(|| Error::Dimension("unknown block".into()))?;
                if m.shape() != (sz, sz) {
                    return Err(Error::Dimension("coefficient matrix has the wrong size".into()));
                }
            }
        }
        Ok(())
    }

    pub fn slack(&self, y: &Vector) -> Vec<Mat> {
        let mut s = self.c.clone();
        for (i, list) in self.a.iter().enumerate() {
            for (blk, m) in list {
                s[*blk] -= m * y[i];
            }
        }
        s
    }

    fn a_op(&self, x: &[Mat]) -> Vector {
        Vector::from_iterator(
            self.a.len(),
            self.a.iter().map(|list| list.iter().map(|(blk, m)| ip(m, &x[*blk])).sum::<f64>()),
        )
    }

    fn at_op(&self, y: &Vector) -> Vec<Mat> {
        let mut out: Vec<Mat> = self.block_sizes.iter().map(|&n| Mat::zeros(n, n)).collect();
        for (i, list) in self.a.iter().enumerate() {
            for (blk, m) in list {
                out[*blk] += m * y[i];
            }
        }
        out
    }
}

fn max_step(x: &Mat, dx: &Mat) -> f64 {
    let n = x.nrows();
    if n == 0 {
        return f64::INFINITY;
    }
    let Some(ch) = Cholesky::new(x.clone()) else {
        return 0.0;
    };
    let l = ch.l();
    let Some(linv) = l.clone().try_inverse() else {
        return 0.0;
    };
    let m = sym(&(&linv * dx * linv.transpose()));
    let ev = SymmetricEigen::new(m).eigenvalues;
    let lmin = ev.iter().cloned().fold(f64::INFINITY, f64::min);
    if lmin >= 0.0 {
        f64::INFINITY
    } else {
        -1.0 / lmin
    }
}

fn spd_inverse(m: &Mat) -> Option<Mat> {
    Cholesky::new(sym(m)).map(|c| c.inverse())
}

/// Solves the program. Assumes a strictly feasible dual exists; the primal
/// may be infeasible, in which case the iteration stalls and the status says so.
pub fn solve_sdp(prob: &SdpProblem, opts: &SdpOptions) -> Result<SdpSolution> {
    prob.validate()?;
    let nb = prob.block_sizes.len();
    let k = prob.b.len();
    let ntot: usize = prob.block_sizes.iter().sum();
    // variables per block, for Schur complement assembly
    let mut touching: Vec<Vec<(usize, &Mat)>> = vec![Vec::new(); nb];
    for (i, list) in prob.a.iter().enumerate() {
        for (blk, m) in list {
            touching[*blk].push((i, m));
        }
    }
    let mut x: Vec<Mat> = Vec::with_capacity(nb);
    let mut s: Vec<Mat> = Vec::with_capacity(nb);
    for (bi, &n) in prob.block_sizes.iter().enumerate() {
        let nf = n as f64;
        let mut xi: f64 = 10f64.max(nf.sqrt());
        let mut eta: f64 = 10f64.max(nf.sqrt()).max(prob.c[bi].norm());
        for (i, m) in &touching[bi] {
            xi = xi.max(nf * (1.0 + prob.b[*i].abs()) / (1.0 + m.norm()));
            eta = eta.max(m.norm());
        }
        x.push(Mat::identity(n, n) * xi);
        s.push(Mat::identity(n, n) * eta);
    }
    let mut y = Vector::zeros(k);
    let bnorm = prob.b.norm();
    let cnorm = prob.c.iter().map(|c| c.norm_squared()).sum::<f64>().sqrt();
    let mut status = SdpStatus::MaxIterations;
    let mut iter = 0;
    let mut best_gap = f64::INFINITY;
    let mut stall = 0;
    while iter < opts.max_iter {
        let pobj: f64 = prob.c.iter().zip(&x).map(|(c, xb)| ip(c, xb)).sum();
        let dobj = prob.b.dot(&y);
        let rp = &prob.b - prob.a_op(&x);
        let aty = prob.at_op(&y);
        let rd: Vec<Mat> = (0..nb).map(|bi| &prob.c[bi] - &s[bi] - &aty[bi]).collect();
        let pinf = rp.norm() / (1.0 + bnorm);
        let dinf = rd.iter().map(|m| m.norm_squared()).sum::<f64>().sqrt() / (1.0 + cnorm);
        let gap = (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs());
        if gap < opts.tol && pinf < opts.tol && dinf < opts.tol {
            status = SdpStatus::Optimal;
            break;
        }
        let merit = gap.max(pinf).max(dinf);
        log::trace!("sdp iteration {iter}: gap {gap:.2e}, primal {pinf:.2e}, dual {dinf:.2e}");
        if merit < best_gap * 0.999 {
            best_gap = merit;
            stall = 0;
        } else {
            stall += 1;
            if stall > 15 {
                status = SdpStatus::Stalled;
                break;
            }
        }
        let mu: f64 = x.iter().zip(&s).map(|(a, b)| ip(a, b)).sum::<f64>() / ntot as f64;
        let sinv: Vec<Mat> = match s.iter().map(spd_inverse).collect::<Option<Vec<_>>>() {
            Some(v) => v,
            None => {
                status = SdpStatus::Stalled;
                break;
            }
        };
        // Schur complement M_ij = sum_blocks <A_i, X A_j S^{-1}>
        let cols: Vec<Vector> = map_range(k, opts.parallelism, |j| {
            let mut col = Vector::zeros(k);
            for (blk, aj) in &prob.a[j] {
                let g = &x[*blk] * aj * &sinv[*blk];
                for (i, ai) in &touching[*blk] {
                    col[*i] += ip(ai, &g);
                }
            }
            col
        });
        let mut schur = Mat::from_columns(&cols);
        schur = sym(&schur);
        let diag_max = schur.diagonal().iter().cloned().fold(0.0, f64::max).max(1e-300);
        let factor = {
            let mut reg = 0.0;
            loop {
                let mm = &schur + Mat::identity(k, k) * reg;
                if let Some(c) = Cholesky::new(mm) {
                    break Some(c);
                }
                reg = if reg == 0.0 { 1e-14 * diag_max } else { reg * 100.0 };
                if reg > 1e-4 * diag_max {
                    break None;
                }
            }
        };
        let Some(factor) = factor else {
            status = SdpStatus::Stalled;
            break;
        };
        let xrs: Vec<Mat> = (0..nb).map(|bi| &x[bi] * &rd[bi] * &sinv[bi]).collect();
        let a_xrs = prob.a_op(&xrs);
        let direction = |rc: &[Mat]| -> (Vector, Vec<Mat>, Vec<Mat>) {
            let rhs = &rp - prob.a_op(rc) + &a_xrs;
            let dy = factor.solve(&rhs);
            let atdy = prob.at_op(&dy);
            let ds: Vec<Mat> = (0..nb).map(|bi| &rd[bi] - &atdy[bi]).collect();
            let dx: Vec<Mat> = (0..nb).map(|bi| sym(&(&rc[bi] - &x[bi] * &ds[bi] * &sinv[bi]))).collect();
            (dy, dx, ds)
        };
        let steps = |dx: &[Mat], ds: &[Mat]| -> (f64, f64) {
            let ap = (0..nb).map(|bi| max_step(&x[bi], &dx[bi])).fold(f64::INFINITY, f64::min);
            let ad = (0..nb).map(|bi| max_step(&s[bi], &ds[bi])).fold(f64::INFINITY, f64::min);
            (ap, ad)
        };
        let rc_aff: Vec<Mat> = x.iter().map(|xb| -xb).collect();
        let (_, dxa, dsa) = direction(&rc_aff);
        let (apa, ada) = steps(&dxa, &dsa);
        let (apa, ada) = (apa.min(1.0), ada.min(1.0));
        let mu_aff: f64 = (0..nb)
            .map(|bi| ip(&(&x[bi] + &dxa[bi] * apa), &(&s[bi] + &dsa[bi] * ada)))
            .sum::<f64>()
            / ntot as f64;
        let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);
        let rc: Vec<Mat> = (0..nb)
            .map(|bi| &sinv[bi] * (sigma * mu) - &x[bi] - &dxa[bi] * &dsa[bi] * &sinv[bi])
            .collect();
        let (dy, dx, ds) = direction(&rc);
        let (ap, ad) = steps(&dx, &ds);
        let ap = (0.95 * ap).min(1.0);
        let ad = (0.95 * ad).min(1.0);
        for bi in 0..nb {
            x[bi] = sym(&(&x[bi] + &dx[bi] * ap));
            s[bi] = sym(&(&s[bi] + &ds[bi] * ad));
        }
        y += dy * ad;
        iter += 1;
    }
    let pobj: f64 = prob.c.iter().zip(&x).map(|(c, xb)| ip(c, xb)).sum();
    let dobj = prob.b.dot(&y);
    let s = prob.slack(&y);
    Ok(SdpSolution { y, s, x, primal_objective: pobj, dual_objective: dobj, iterations: iter, status })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn max_eigenvalue_bound() {
        // maximize t s.t. M - t I >= 0  -> t* = lambda_min(M)
        let m = Mat::from_row_slice(3, 3, &[4.0, 1.0, 0.0, 1.0, 3.0, 0.5, 0.0, 0.5, 2.0]);
        let prob = SdpProblem {
            block_sizes: vec![3],
            c: vec![m.clone()],
            a: vec![vec![(0, Mat::identity(3, 3))]],
            b: Vector::from_vec(vec![1.0]),
        };
        let sol = solve_sdp(&prob, &SdpOptions::default()).unwrap();
        let lmin = SymmetricEigen::new(m).eigenvalues.min();
        assert_eq!(sol.status, SdpStatus::Optimal);
        assert!((sol.y[0] - lmin).abs() < 1e-7);
    }

    #[test]
    fn lyapunov_certificate() {
        // find P with P >= t I, -(A'P + PA) >= t I, I - P >= 0, maximizing t
        let a = Mat::from_row_slice(2, 2, &[-1.0, 3.0, 0.0, -2.0]);
        let basis = [
            Mat::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]),
            Mat::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]),
            Mat::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 1.0]),
        ];
        let mut vars = vec![vec![(0, Mat::identity(2, 2)), (1, Mat::identity(2, 2))]];
        for e in &basis {
            let lyap = a.transpose() * e + e * &a;
            vars.push(vec![(0, -e.clone()), (1, lyap), (2, e.clone())]);
        }
        let prob = SdpProblem {
            block_sizes: vec![2, 2, 2],
            c: vec![Mat::zeros(2, 2), Mat::zeros(2, 2), Mat::identity(2, 2)],
            a: vars,
            b: Vector::from_vec(vec![1.0, 0.0, 0.0, 0.0]),
        };
        let sol = solve_sdp(&prob, &SdpOptions::default()).unwrap();
        assert!(sol.y[0] > 1e-3);
        let p = &basis[0] * sol.y[1] + &basis[1] * sol.y[2] + &basis[2] * sol.y[3];
        let l = a.transpose() * &p + &p * &a;
        assert!(SymmetricEigen::new(p).eigenvalues.min() > 0.0);
        assert!(SymmetricEigen::new(l).eigenvalues.max() < 0.0);
    }

    #[test]
    fn parallel_and_sequential_agree() {
        let m = Mat::from_fn(5, 5, |i, j| if i == j { 3.0 + i as f64 } else { 0.3 });
        let prob = SdpProblem {
            block_sizes: vec![5],
            c: vec![m],
            a: vec![vec![(0, Mat::identity(5, 5))]],
            b: Vector::from_vec(vec![1.0]),
        };
        let a = solve_sdp(&prob, &SdpOptions { parallelism: Parallelism::Auto, ..Default::default() }).unwrap();
        let b = solve_sdp(&prob, &SdpOptions { parallelism: Parallelism::Sequential, ..Default::default() }).unwrap();
        assert_eq!(a.y, b.y);
    }
}
