//! Estimating the uniform observability index from one input-output trajectory.
//!
//! For a candidate `k` the scalar filters `x' = -lambda_j x + gamma_j w`,
//! `j = 1..k`, are run on every channel of `w = (y, u)` alongside the
//! transients `chi_j = gamma_j exp(-lambda_j t)`. The sampled batch has
//! `k (p + m + 1)` rows; it stays full rank up to the true index and loses
//! rank above it. Filters of earlier candidates are cached and reused.

use serde::{Deserialize, Serialize};

use crate::error::{arg_err, dim_err, Error, Result};
use crate::lti::{sample_exact, uniform_times, SampledTrajectory};
use crate::numkit::{mat_exp, singular_values, vstack, Mat, RANK_REL_TOL};
use crate::pipeline::{experiment_interconnection, Experiment};

/// Ratio between consecutive singular values that marks a numerical rank drop.
pub const GAP_RATIO: f64 = 1e6;

/// Filter poles `-lambda_j` and input gains `gamma_j`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub lambda: Vec<f64>,
    pub gamma: Vec<f64>,
}

impl Schedule {
    /// `lambda_j = gamma_j = j` for `j = 1..=len`.
    pub fn linear(len: usize) -> Self {
        let v: Vec<f64> = (1..=len).map(|j| j as f64).collect();
        Schedule { lambda: v.clone(), gamma: v }
    }

    pub fn len(&self) -> usize {
        self.lambda.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambda.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.lambda.len() != self.gamma.len() {
            return arg_err("lambda and gamma schedules must have the same length");
        }
        if self.lambda.iter().chain(&self.gamma).any(|v| !v.is_finite()) {
            return arg_err("schedule entries must be finite");
        }
        if self.lambda.first().is_some_and(|&l| l <= 0.0) {
            return arg_err("lambda schedule must be positive");
        }
        if self.lambda.windows(2).any(|w| w[1] <= w[0]) {
            return arg_err("lambda schedule must be strictly increasing");
        }
        if self.gamma.iter().any(|&g| g == 0.0) {
            return arg_err("gamma entries must be nonzero");
        }
        Ok(())
    }
}

/// Something that can run a scalar filter over every channel of `w = (y, u)`.
pub trait FilterSource {
    /// Number of channels `p + m`.
    fn channels(&self) -> usize;
    /// Batch sampling instants.
    fn times(&self) -> &[f64];
    /// Samples of `x' = -lambda x + gamma w`, `x(0) = 0`, one row per channel.
    fn filter(&self, lambda: f64, gamma: f64) -> Result<Mat>;
}

/// Exact filtering of a simulated experiment.
#[derive(Clone, Debug)]
pub struct LiveSource {
    a: Mat,
    x0: crate::numkit::Vector,
    w_map: Mat,
    times: Vec<f64>,
}

impl LiveSource {
    /// Samples at `k tau / n`, `k < n`.
    pub fn new(exp: &Experiment, tau: f64, n: usize) -> Result<Self> {
        if !(tau > 0.0) || n == 0 {
            return arg_err("horizon must be positive and at least one sample is needed");
        }
        let (ic, _, _) = experiment_interconnection(exp)?;
        let aug = ic.augment()?;
        let w_map = vstack(&[&aug.output_map_of("plant")?, &aug.output_map_of("gen")?])?;
        Ok(LiveSource { a: aug.a, x0: aug.x0, w_map, times: uniform_times(tau, n) })
    }
}

impl FilterSource for LiveSource {
    fn channels(&self) -> usize {
        self.w_map.nrows()
    }

    fn times(&self) -> &[f64] {
        &self.times
    }

    fn filter(&self, lambda: f64, gamma: f64) -> Result<Mat> {
        let (n, c) = (self.a.nrows(), self.channels());
        let mut big = Mat::zeros(n + c, n + c);
        big.view_mut((0, 0), (n, n)).copy_from(&self.a);
        big.view_mut((n, 0), (c, n)).copy_from(&(&self.w_map * gamma));
        big.view_mut((n, n), (c, c)).fill_diagonal(-lambda);
        let mut x0 = crate::numkit::Vector::zeros(n + c);
        x0.rows_mut(0, n).copy_from(&self.x0);
        let xs = sample_exact(&big, &x0, &self.times)?;
        Ok(Mat::from_fn(c, xs.len(), |i, k| xs[k][n + i]))
    }
}

/// Filtering of recorded `u`, `y` with a first-order hold between samples.
/// The batch uses the recorded samples at `k tau / n`.
#[derive(Clone, Debug)]
pub struct RecordedSource {
    w: Mat,
    grid: Vec<f64>,
    picks: Vec<usize>,
    times: Vec<f64>,
}

impl RecordedSource {
    pub fn new(traj: &SampledTrajectory, tau: f64, n: usize) -> Result<Self> {
        let y = traj.require("y")?;
        let u = traj.require("u")?;
        let grid = traj.times.clone();
        if grid.len() < 2 || grid[0] != 0.0 {
            return Err(Error::Data("recorded data must start at t = 0 and have at least two samples".into()));
        }
        if grid.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Data("recorded sample times must be nondecreasing".into()));
        }
        if !(tau > 0.0) || n == 0 {
            return arg_err("horizon must be positive and at least one sample is needed");
        }
        let times = uniform_times(tau, n);
        let slack = 1e-9 * tau;
        let mut picks = Vec::with_capacity(n);
        for &t in &times {
            let k = grid.partition_point(|&g| g < t - slack);
            if k >= grid.len() || (grid[k] - t).abs() > slack {
                return Err(Error::Data(format!("recorded data has no sample at t = {t}")));
            }
            picks.push(k);
        }
        Ok(RecordedSource { w: vstack(&[y, u])?, grid, picks, times })
    }
}

impl FilterSource for RecordedSource {
    fn channels(&self) -> usize {
        self.w.nrows()
    }

    fn times(&self) -> &[f64] {
        &self.times
    }

    fn filter(&self, lambda: f64, gamma: f64) -> Result<Mat> {
        let c = self.channels();
        let mut x = Mat::zeros(c, self.grid.len());
        let mut cache: Vec<(f64, [f64; 3])> = Vec::new();
        for k in 1..self.grid.len() {
            let h = self.grid[k] - self.grid[k - 1];
            if h == 0.0 {
                let prev = x.column(k - 1).into_owned();
                x.set_column(k, &prev);
                continue;
            }
            let coef = match cache.iter().find(|(hh, _)| *hh == h) {
                Some((_, e)) => *e,
                None => {
                    let m = Mat::from_row_slice(3, 3, &[-lambda, gamma, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0]) * h;
                    let e = mat_exp(&m)?;
                    let coef = [e[(0, 0)], e[(0, 1)], e[(0, 2)] / h];
                    cache.push((h, coef));
                    coef
                }
            };
            for i in 0..c {
                let (w0, w1) = (self.w[(i, k - 1)], self.w[(i, k)]);
                x[(i, k)] = coef[0] * x[(i, k - 1)] + coef[1] * w0 + coef[2] * (w1 - w0);
            }
        }
        Ok(Mat::from_fn(c, self.picks.len(), |i, j| x[(i, self.picks[j])]))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProbeDecision {
    FullRank,
    RankLost,
    /// Fewer samples than rows: full rank is impossible.
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankProbe {
    pub candidate: usize,
    pub rank: usize,
    pub threshold: usize,
    pub n_samples: usize,
    /// Rank from the relative singular-value threshold alone.
    pub tol_rank: usize,
    /// Rank from the largest-consecutive-ratio test alone.
    pub gap_rank: usize,
    /// Singular values of the row-normalized batch, descending.
    pub singular_values: Vec<f64>,
    pub decision: ProbeDecision,
}

/// Rank of a matrix after scaling every nonzero row to unit norm, as the
/// smaller of the threshold rank and the gap rank.
pub fn decide_rank(b: &Mat, rel_tol: f64, gap_ratio: f64) -> (usize, usize, usize, Vec<f64>) {
    let mut scaled = b.clone();
    for mut row in scaled.row_iter_mut() {
        let nrm = row.norm();
        if nrm > 0.0 {
            row /= nrm;
        }
    }
    let sv = singular_values(&scaled);
    let smax = sv.first().copied().unwrap_or(0.0);
    let tol_rank = if smax == 0.0 { 0 } else { sv.iter().take_while(|&&s| s > rel_tol * smax).count() };
    let mut gap_rank = sv.iter().take_while(|&&s| s > 0.0).count();
    for i in 0..sv.len().saturating_sub(1) {
        if sv[i] > 0.0 && sv[i] > gap_ratio * sv[i + 1] {
            gap_rank = i + 1;
            break;
        }
    }
    (tol_rank.min(gap_rank), tol_rank, gap_rank, sv.as_slice().to_vec())
}

/// Incrementally grown filter bank over one dataset.
pub struct IndexSweep<'a, S: FilterSource> {
    source: &'a S,
    schedule: Schedule,
    rel_tol: f64,
    gap_ratio: f64,
    blocks: Vec<Mat>,
}

impl<'a, S: FilterSource> IndexSweep<'a, S> {
    pub fn new(source: &'a S, schedule: Schedule, rel_tol: f64, gap_ratio: f64) -> Result<Self> {
        schedule.validate()?;
        if source.times().is_empty() {
            return dim_err("dataset has no samples");
        }
        Ok(IndexSweep { source, schedule, rel_tol, gap_ratio, blocks: Vec::new() })
    }

    /// Filters computed so far.
    pub fn depth(&self) -> usize {
        self.blocks.len()
    }

    fn grow(&mut self, k: usize) -> Result<()> {
        if k > self.schedule.len() {
            return arg_err(format!("candidate {k} exceeds the schedule length {}", self.schedule.len()));
        }
        while self.blocks.len() < k {
            let j = self.blocks.len();
            let (lambda, gamma) = (self.schedule.lambda[j], self.schedule.gamma[j]);
            let zeta = self.source.filter(lambda, gamma)?;
            let times = self.source.times();
            let chi = Mat::from_fn(1, times.len(), |_, c| gamma * (-lambda * times[c]).exp());
            self.blocks.push(vstack(&[&chi, &zeta])?);
        }
        Ok(())
    }

    /// Batch for candidate `k`: the `chi` rows first, then the filter rows.
    pub fn batch(&mut self, k: usize) -> Result<Mat> {
        if k == 0 {
            return arg_err("candidate must be at least 1");
        }
        self.grow(k)?;
        let chis: Vec<Mat> = self.blocks[..k].iter().map(|b| b.rows(0, 1).into_owned()).collect();
        let zetas: Vec<Mat> = self.blocks[..k].iter().map(|b| b.rows(1, b.nrows() - 1).into_owned()).collect();
        let parts: Vec<&Mat> = chis.iter().chain(zetas.iter()).collect();
        vstack(&parts)
    }

    pub fn probe(&mut self, k: usize) -> Result<RankProbe> {
        let b = self.batch(k)?;
        let threshold = k * (self.source.channels() + 1);
        let (rank, tol_rank, gap_rank, singular_values) = decide_rank(&b, self.rel_tol, self.gap_ratio);
        let n_samples = b.ncols();
        let decision = if n_samples < threshold {
            ProbeDecision::Inconclusive
        } else if rank < threshold {
            ProbeDecision::RankLost
        } else {
            ProbeDecision::FullRank
        };
        Ok(RankProbe { candidate: k, rank, threshold, n_samples, tol_rank, gap_rank, singular_values, decision })
    }
}

/// One rank probe without reuse.
pub fn probe_rank<S: FilterSource>(source: &S, candidate: usize, schedule: &Schedule) -> Result<RankProbe> {
    IndexSweep::new(source, schedule.clone(), RANK_REL_TOL, GAP_RATIO)?.probe(candidate)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimationOptions {
    pub nu_max: usize,
    /// Defaults to `lambda_j = gamma_j = j`.
    pub schedule: Option<Schedule>,
    pub rel_tol: f64,
    pub gap_ratio: f64,
    /// Probe every candidate up to `nu_max` instead of stopping at the first loss.
    pub audit: bool,
}

impl Default for EstimationOptions {
    fn default() -> Self {
        EstimationOptions { nu_max: 6, schedule: None, rel_tol: RANK_REL_TOL, gap_ratio: GAP_RATIO, audit: false }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IndexVerdict {
    /// Rank lost right after a full-rank candidate.
    Found,
    /// Rank never held, not even at candidate 1.
    LowConfidence,
    /// No loss up to `nu_max`; the estimate is only a lower bound.
    SearchFailed,
    /// Too few samples to decide at the stopping candidate.
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndexEstimate {
    pub nu_hat: usize,
    pub verdict: IndexVerdict,
    pub probes: Vec<RankProbe>,
    pub nu_max: usize,
    pub lambda: Vec<f64>,
    pub gamma: Vec<f64>,
    pub rel_tol: f64,
    pub gap_ratio: f64,
    /// In audit mode: whether every probe after the first loss also lost rank.
    pub monotone: Option<bool>,
    pub notes: Vec<String>,
}

impl IndexEstimate {
    pub fn succeeded(&self) -> bool {
        self.verdict == IndexVerdict::Found
    }

    pub fn probe(&self, candidate: usize) -> Option<&RankProbe> {
        self.probes.iter().find(|p| p.candidate == candidate)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("nu_hat = {}\nverdict: {:?}\n", self.nu_hat, self.verdict);
        s.push_str("candidate  rank  threshold  samples  decision\n");
        for p in &self.probes {
            s.push_str(&format!(
                "{:>9}  {:>4}  {:>9}  {:>7}  {:?}\n",
                p.candidate, p.rank, p.threshold, p.n_samples, p.decision
            ));
        }
        for n in &self.notes {
            s.push_str(&format!("note: {n}\n"));
        }
        s
    }
}

/// Increases the candidate from 1 until the batch loses rank and returns the
/// last full-rank candidate.
pub fn estimate_index<S: FilterSource>(source: &S, opts: &EstimationOptions) -> Result<IndexEstimate> {
    if opts.nu_max < 2 {
        return arg_err("nu_max must be at least 2");
    }
    let schedule = opts.schedule.clone().unwrap_or_else(|| Schedule::linear(opts.nu_max));
    if schedule.len() < opts.nu_max {
        return arg_err(format!("schedule has {} entries, nu_max is {}", schedule.len(), opts.nu_max));
    }
    let mut sweep = IndexSweep::new(source, schedule.clone(), opts.rel_tol, opts.gap_ratio)?;
    let mut probes = Vec::new();
    let mut stop: Option<usize> = None;
    for k in 1..=opts.nu_max {
        let pr = sweep.probe(k)?;
        let lost = pr.decision != ProbeDecision::FullRank;
        probes.push(pr);
        if lost && stop.is_none() {
            stop = Some(k);
            if !opts.audit {
                break;
            }
        }
    }
    let mut notes = Vec::new();
    let (nu_hat, verdict) = match stop {
        None => {
            notes.push(format!("rank held up to nu_max = {}; the index is at least that large", opts.nu_max));
            (opts.nu_max, IndexVerdict::SearchFailed)
        }
        Some(k) if probes[k - 1].decision == ProbeDecision::Inconclusive => {
            notes.push(format!("candidate {k} needs at least {} samples", probes[k - 1].threshold));
            ((k - 1).max(1), IndexVerdict::Inconclusive)
        }
        Some(1) => {
            notes.push("batch is rank deficient already at candidate 1; the data carry too little information".into());
            (1, IndexVerdict::LowConfidence)
        }
        Some(k) => {
            notes.push(format!("full rank at candidate {} is observed in the data, not guaranteed", k - 1));
            (k - 1, IndexVerdict::Found)
        }
    };
    let monotone = if opts.audit {
        stop.map(|k| probes[k - 1..].iter().all(|p| p.decision != ProbeDecision::FullRank)).or(Some(true))
    } else {
        None
    };
    Ok(IndexEstimate {
        nu_hat,
        verdict,
        probes,
        nu_max: opts.nu_max,
        lambda: schedule.lambda[..opts.nu_max].to_vec(),
        gamma: schedule.gamma[..opts.nu_max].to_vec(),
        rel_tol: opts.rel_tol,
        gap_ratio: opts.gap_ratio,
        monotone,
        notes,
    })
}
