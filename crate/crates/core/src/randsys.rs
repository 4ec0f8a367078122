//! Seeded random plants, initial states and excitation signals.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::lti::{ChannelSpec, SineInputSpec, SineTerm, StateSpace};
use crate::numkit::{krylov, numerical_rank, Mat, Vector};
use crate::realization::observability_indices;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Entries drawn from U(-1, 1).
pub fn uniform_vector(seed: u64, n: usize) -> Vector {
    let mut r = rng(seed);
    Vector::from_fn(n, |_, _| r.random_range(-1.0..1.0))
}

fn gaussian(r: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Mat {
    Mat::from_fn(rows, cols, |_, _| {
        let v: f64 = r.sample(StandardNormal);
        v * scale
    })
}

fn controllable(a: &Mat, b: &Mat) -> bool {
    let n = a.nrows();
    let mut cols = Vec::new();
    for j in 0..b.ncols() {
        let k = krylov(a, &b.column(j).into_owned(), n);
        cols.extend(k.column_iter().map(|c| c.into_owned()));
    }
    numerical_rank(&Mat::from_columns(&cols), 1e-9) == n
}

/// Random strictly proper plant with `n = p * nu` whose observability
/// indices are all equal to `nu`, and which is controllable.
pub fn uniform_index_plant(seed: u64, p: usize, m: usize, nu: usize) -> StateSpace {
    let n = p * nu;
    let mut r = rng(seed);
    loop {
        let a = gaussian(&mut r, n, n, 1.0 / (n as f64).sqrt());
        let b = gaussian(&mut r, n, m, 1.0);
        let c = gaussian(&mut r, p, n, 1.0);
        let ok_idx = observability_indices(&c, &a).map(|pr| pr.uniform() == Some(nu)).unwrap_or(false);
        if ok_idx && controllable(&a, &b) {
            return StateSpace::strictly_proper(a, b, c).expect("consistent shapes");
        }
    }
}

/// Multisine excitation with `terms` distinct frequencies per channel, all
/// frequencies distinct across channels and spread over `[f_lo, f_hi]`.
pub fn multisine(seed: u64, m: usize, terms: usize, f_lo: f64, f_hi: f64) -> SineInputSpec {
    let mut r = rng(seed ^ 0x5EED);
    let total = m * terms;
    let channels = (0..m)
        .map(|ch| ChannelSpec {
            bias: 0.0,
            terms: (0..terms)
                .map(|k| {
                    let slot = k * m + ch;
                    let base = f_lo + (f_hi - f_lo) * (slot as f64 + 0.5) / total as f64;
                    let jitter = (f_hi - f_lo) / total as f64 * 0.3 * r.random_range(-1.0..1.0);
                    SineTerm { amplitude: 1.0, frequency: base + jitter, phase: r.random_range(0.0..std::f64::consts::TAU) }
                })
                .collect(),
        })
        .collect();
    SineInputSpec { channels }
}
