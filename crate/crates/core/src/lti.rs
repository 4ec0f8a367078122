//! State-space models, sinusoidal signal generators, block interconnections
//! and exact sampling of autonomous linear systems.

use std::collections::HashMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{arg_err, dim_err, Error, Result};
use crate::numkit::{ensure_finite, ensure_square, hstack, inverse, mat_exp, Mat, Vector};

/// `x' = A x + B u`, `y = C x + D u`.
#[derive(Clone, Debug, PartialEq)]
pub struct StateSpace {
    pub a: Mat,
    pub b: Mat,
    pub c: Mat,
    pub d: Mat,
}

impl StateSpace {
    pub fn new(a: Mat, b: Mat, c: Mat, d: Mat) -> Result<Self> {
        ensure_square(&a, "A")?;
        let n = a.nrows();
        if b.nrows() != n {
            return dim_err(format!("B has {} rows, expected {n}", b.nrows()));
        }
        if c.ncols() != n {
            return dim_err(format!("C has {} columns, expected {n}", c.ncols()));
        }
        if d.shape() != (c.nrows(), b.ncols()) {
            return dim_err(format!(
                "D is {}x{}, expected {}x{}",
                d.nrows(),
                d.ncols(),
                c.nrows(),
                b.ncols()
            ));
        }
        for (m, name) in [(&a, "A"), (&b, "B"), (&c, "C"), (&d, "D")] {
            ensure_finite(m, name)?;
        }
        Ok(StateSpace { a, b, c, d })
    }

    /// Strictly proper model (`D = 0`).
    pub fn strictly_proper(a: Mat, b: Mat, c: Mat) -> Result<Self> {
        let d = Mat::zeros(c.nrows(), b.ncols());
        Self::new(a, b, c, d)
    }

    /// Autonomous system with no inputs.
    pub fn autonomous(a: Mat, c: Mat) -> Result<Self> {
        let n = a.nrows();
        Self::new(a, Mat::zeros(n, 0), c.clone(), Mat::zeros(c.nrows(), 0))
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }
    pub fn m(&self) -> usize {
        self.b.ncols()
    }
    pub fn p(&self) -> usize {
        self.c.nrows()
    }
    pub fn has_feedthrough(&self) -> bool {
        self.d.iter().any(|v| *v != 0.0)
    }
}

/// One sinusoidal term `amplitude * sin(frequency * t + phase)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SineTerm {
    pub amplitude: f64,
    pub frequency: f64,
    #[serde(default)]
    pub phase: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ChannelSpec {
    #[serde(default)]
    pub bias: f64,
    #[serde(default)]
    pub terms: Vec<SineTerm>,
}

/// Multi-sine excitation, one channel per plant input.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SineInputSpec {
    pub channels: Vec<ChannelSpec>,
}

impl SineInputSpec {
    pub fn validate(&self) -> Result<()> {
        if self.channels.is_empty() {
            return arg_err("excitation needs at least one channel");
        }
        for (k, ch) in self.channels.iter().enumerate() {
            if !ch.bias.is_finite() {
                return arg_err(format!("channel {k}: non-finite bias"));
            }
            if ch.bias == 0.0 && ch.terms.is_empty() {
                return arg_err(format!("channel {k}: needs a bias or at least one sinusoid"));
            }
            for t in &ch.terms {
                if !(t.amplitude.is_finite() && t.frequency.is_finite() && t.phase.is_finite()) {
                    return arg_err(format!("channel {k}: non-finite sinusoid parameter"));
                }
                if t.frequency < 0.0 {
                    return arg_err(format!("channel {k}: negative frequency"));
                }
            }
        }
        Ok(())
    }

    /// Evaluates the signal directly, independent of the generator realization.
    pub fn eval(&self, t: f64) -> Vector {
        Vector::from_iterator(
            self.channels.len(),
            self.channels.iter().map(|ch| {
                ch.bias
                    + ch.terms.iter().map(|s| s.amplitude * (s.frequency * t + s.phase).sin()).sum::<f64>()
            }),
        )
    }

    /// All distinct frequencies across channels, sorted.
    pub fn frequencies(&self) -> Vec<f64> {
        let mut f: Vec<f64> = self.channels.iter().flat_map(|c| c.terms.iter().map(|t| t.frequency)).collect();
        f.sort_by(|a, b| a.partial_cmp(b).unwrap());
        f.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs().max(1.0));
        f
    }

    /// Autonomous realization: a constant state per nonzero bias and a
    /// rotation pair per sinusoid.
    pub fn generator(&self) -> Result<(StateSpace, Vector)> {
        self.validate()?;
        let m = self.channels.len();
        let mut blocks: Vec<Mat> = Vec::new();
        let mut x0: Vec<f64> = Vec::new();
        let mut out: Vec<(usize, usize, f64)> = Vec::new();
        let mut idx = 0;
        for (ch_i, ch) in self.channels.iter().enumerate() {
            if ch.bias != 0.0 {
                blocks.push(Mat::zeros(1, 1));
                x0.push(1.0);
                out.push((ch_i, idx, ch.bias));
                idx += 1;
            }
            for t in &ch.terms {
                let w = t.frequency;
                blocks.push(Mat::from_row_slice(2, 2, &[0.0, w, -w, 0.0]));
                x0.push(t.phase.sin());
                x0.push(t.phase.cos());
                out.push((ch_i, idx, t.amplitude));
                idx += 2;
            }
        }
        let refs: Vec<&Mat> = blocks.iter().collect();
        let a = crate::numkit::block_diag(&refs);
        let mut c = Mat::zeros(m, idx);
        for (ch, col, g) in out {
            c[(ch, col)] = g;
        }
        Ok((StateSpace::autonomous(a, c)?, Vector::from_vec(x0)))
    }
}

/// Exosystem `w' = S w` entering the plant as `x' = Ax + Bu + Pw`, `y = Cx + Qw`.
#[derive(Clone, Debug, PartialEq)]
pub struct Exosystem {
    pub s: Mat,
    pub p: Mat,
    pub q: Mat,
}

impl Exosystem {
    pub fn new(s: Mat, p: Mat, q: Mat) -> Result<Self> {
        ensure_square(&s, "S")?;
        if p.ncols() != s.nrows() || q.ncols() != s.nrows() {
            return dim_err("P and Q must have as many columns as S");
        }
        for (m, name) in [(&s, "S"), (&p, "P"), (&q, "Q")] {
            ensure_finite(m, name)?;
        }
        Ok(Exosystem { s, p, q })
    }
}

/// A named block inside an interconnection.
#[derive(Clone, Debug)]
pub struct Block {
    pub name: String,
    pub sys: StateSpace,
    pub x0: Vector,
}

/// `u_to += gain * y_from`.
#[derive(Clone, Debug)]
pub struct Connection {
    pub from: usize,
    pub to: usize,
    pub gain: Mat,
}

#[derive(Clone, Debug, Default)]
pub struct Interconnection {
    pub blocks: Vec<Block>,
    pub connections: Vec<Connection>,
}

/// Result of flattening an interconnection into a single autonomous model.
#[derive(Clone, Debug)]
pub struct Augmented {
    pub a: Mat,
    pub x0: Vector,
    pub names: Vec<String>,
    pub state_offsets: Vec<usize>,
    /// Stacked block inputs as a linear function of the joint state.
    pub input_map: Mat,
    pub input_offsets: Vec<usize>,
    /// Stacked block outputs as a linear function of the joint state.
    pub output_map: Mat,
    pub output_offsets: Vec<usize>,
}

impl Interconnection {
    pub fn add_block(&mut self, name: &str, sys: StateSpace, x0: Vector) -> Result<usize> {
        if x0.len() != sys.n() {
            return dim_err(format!("block {name}: initial state has {} entries, expected {}", x0.len(), sys.n()));
        }
        if self.blocks.iter().any(|b| b.name == name) {
            return Err(Error::Wiring(format!("duplicate block name {name}")));
        }
        self.blocks.push(Block { name: name.to_string(), sys, x0 });
        Ok(self.blocks.len() - 1)
    }

    pub fn connect(&mut self, from: usize, to: usize, gain: Mat) -> Result<()> {
        let (Some(bf), Some(bt)) = (self.blocks.get(from), self.blocks.get(to)) else {
            return Err(Error::Wiring("connection references an unknown block".into()));
        };
        if gain.shape() != (bt.sys.m(), bf.sys.p()) {
            return Err(Error::Wiring(format!(
                "connection {} -> {}: gain is {}x{}, expected {}x{}",
                bf.name,
                bt.name,
                gain.nrows(),
                gain.ncols(),
                bt.sys.m(),
                bf.sys.p()
            )));
        }
        self.connections.push(Connection { from, to, gain });
        Ok(())
    }

    /// Connects the full output of `from` to the full input of `to`.
    pub fn connect_all(&mut self, from: usize, to: usize) -> Result<()> {
        let p = self.blocks[from].sys.p();
        let m = self.blocks[to].sys.m();
        if p != m {
            return Err(Error::Wiring(format!(
                "{} has {p} outputs but {} has {m} inputs",
                self.blocks[from].name, self.blocks[to].name
            )));
        }
        self.connect(from, to, Mat::identity(m, p))
    }

    /// Connects output rows `rows` of `from` into input rows starting at `at` of `to`.
    pub fn connect_rows(&mut self, from: usize, rows: std::ops::Range<usize>, to: usize, at: usize) -> Result<()> {
        let p = self.blocks[from].sys.p();
        let m = self.blocks[to].sys.m();
        if rows.end > p || at + rows.len() > m {
            return Err(Error::Wiring("row selection out of range".into()));
        }
        let mut g = Mat::zeros(m, p);
        for (k, r) in rows.enumerate() {
            g[(at + k, r)] = 1.0;
        }
        self.connect(from, to, g)
    }

    fn has_algebraic_loop(&self) -> bool {
        let nb = self.blocks.len();
        let mut adj = vec![Vec::new(); nb];
        for c in &self.connections {
            if self.blocks[c.from].sys.has_feedthrough() && c.gain.iter().any(|v| *v != 0.0) {
                adj[c.from].push(c.to);
            }
        }
        // a cycle through feedthrough blocks only
        let mut state = vec![0u8; nb];
        fn dfs(v: usize, adj: &[Vec<usize>], ft: &dyn Fn(usize) -> bool, state: &mut [u8]) -> bool {
            state[v] = 1;
            for &w in &adj[v] {
                if !ft(w) {
                    continue;
                }
                if state[w] == 1 || (state[w] == 0 && dfs(w, adj, ft, state)) {
                    return true;
                }
            }
            state[v] = 2;
            false
        }
        let ft = |i: usize| self.blocks[i].sys.has_feedthrough();
        (0..nb).any(|v| ft(v) && state[v] == 0 && dfs(v, &adj, &ft, &mut state))
    }

    /// Flattens the interconnection. Fails on algebraic loops.
    pub fn augment(&self) -> Result<Augmented> {
        if self.blocks.is_empty() {
            return Err(Error::Wiring("empty interconnection".into()));
        }
        if self.has_algebraic_loop() {
            return Err(Error::Wiring("algebraic loop through feedthrough blocks".into()));
        }
        let mut so = vec![0];
        let mut io = vec![0];
        let mut oo = vec![0];
        for b in &self.blocks {
            so.push(so.last().unwrap() + b.sys.n());
            io.push(io.last().unwrap() + b.sys.m());
            oo.push(oo.last().unwrap() + b.sys.p());
        }
        let (nx, nu, ny) = (*so.last().unwrap(), *io.last().unwrap(), *oo.last().unwrap());
        let mut ab = Mat::zeros(nx, nx);
        let mut bb = Mat::zeros(nx, nu);
        let mut cb = Mat::zeros(ny, nx);
        let mut db = Mat::zeros(ny, nu);
        let mut x0 = Vector::zeros(nx);
        for (k, b) in self.blocks.iter().enumerate() {
            ab.view_mut((so[k], so[k]), b.sys.a.shape()).copy_from(&b.sys.a);
            bb.view_mut((so[k], io[k]), b.sys.b.shape()).copy_from(&b.sys.b);
            cb.view_mut((oo[k], so[k]), b.sys.c.shape()).copy_from(&b.sys.c);
            db.view_mut((oo[k], io[k]), b.sys.d.shape()).copy_from(&b.sys.d);
            x0.rows_mut(so[k], b.sys.n()).copy_from(&b.x0);
        }
        let mut w = Mat::zeros(nu, ny);
        for c in &self.connections {
            let mut v = w.view_mut((io[c.to], oo[c.from]), c.gain.shape());
            v += &c.gain;
        }
        let lhs = Mat::identity(nu, nu) - &w * &db;
        let inv = inverse(&lhs).map_err(|_| Error::Wiring("ill-posed interconnection".into()))?;
        let input_map = inv * &w * &cb;
        let a = &ab + &bb * &input_map;
        let output_map = &cb + &db * &input_map;
        Ok(Augmented {
            a,
            x0,
            names: self.blocks.iter().map(|b| b.name.clone()).collect(),
            state_offsets: so,
            input_map,
            input_offsets: io,
            output_map,
            output_offsets: oo,
        })
    }
}

impl Augmented {
    fn idx(&self, name: &str) -> Result<usize> {
        self.names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::Wiring(format!("unknown block {name}")))
    }

    pub fn state_rows(&self, name: &str) -> Result<std::ops::Range<usize>> {
        let k = self.idx(name)?;
        Ok(self.state_offsets[k]..self.state_offsets[k + 1])
    }

    /// Linear map from joint state to the block's state.
    pub fn state_map(&self, name: &str) -> Result<Mat> {
        let r = self.state_rows(name)?;
        let mut m = Mat::zeros(r.len(), self.a.nrows());
        for (i, j) in r.enumerate() {
            m[(i, j)] = 1.0;
        }
        Ok(m)
    }

    pub fn output_map_of(&self, name: &str) -> Result<Mat> {
        let k = self.idx(name)?;
        let (s, e) = (self.output_offsets[k], self.output_offsets[k + 1]);
        Ok(self.output_map.rows(s, e - s).into_owned())
    }

    pub fn input_map_of(&self, name: &str) -> Result<Mat> {
        let k = self.idx(name)?;
        let (s, e) = (self.input_offsets[k], self.input_offsets[k + 1]);
        Ok(self.input_map.rows(s, e - s).into_owned())
    }
}

/// Closed loop of a plant with a dynamic controller `xi' = Ac xi + Bc y`, `u = Cc xi + Dc y`.
/// Returns the joint state matrix on `(x, xi)`.
pub fn feedback_interconnect(plant: &StateSpace, ctrl: &StateSpace) -> Result<Mat> {
    if ctrl.m() != plant.p() || ctrl.p() != plant.m() {
        return Err(Error::Wiring(format!(
            "controller is {}x{} but plant needs {}x{}",
            ctrl.p(),
            ctrl.m(),
            plant.m(),
            plant.p()
        )));
    }
    let mut ic = Interconnection::default();
    let p = ic.add_block("plant", plant.clone(), Vector::zeros(plant.n()))?;
    let c = ic.add_block("ctrl", ctrl.clone(), Vector::zeros(ctrl.n()))?;
    ic.connect_all(p, c)?;
    ic.connect_all(c, p)?;
    Ok(ic.augment()?.a)
}

fn gap_key(h: f64) -> u64 {
    h.to_bits()
}

/// Exact samples of `x' = A x` at the given nondecreasing times (starting from t = 0).
pub fn sample_exact(a: &Mat, x0: &Vector, times: &[f64]) -> Result<Vec<Vector>> {
    sample_with_resets(a, x0, times, &[])
}

/// A state override applied at a switching instant.
#[derive(Clone, Debug, PartialEq)]
pub struct StateReset {
    pub time: f64,
    pub values: Vec<(usize, f64)>,
}

/// Exact sampling with piecewise-constant state overrides. At a reset time
/// that coincides with a sample, the sample reports the pre-switch value and a
/// duplicate timestamp may follow with the post-switch value.
pub fn sample_with_resets(a: &Mat, x0: &Vector, times: &[f64], resets: &[StateReset]) -> Result<Vec<Vector>> {
    ensure_square(a, "A")?;
    if x0.len() != a.nrows() {
        return dim_err("initial state length differs from A");
    }
    if times.iter().any(|t| !t.is_finite() || *t < 0.0) {
        return arg_err("sample times must be finite and nonnegative");
    }
    if times.windows(2).any(|w| w[1] < w[0]) {
        return arg_err("sample times must be nondecreasing");
    }
    if resets.windows(2).any(|w| w[1].time < w[0].time) {
        return arg_err("reset times must be nondecreasing");
    }
    for r in resets {
        if r.values.iter().any(|(i, v)| *i >= x0.len() || !v.is_finite()) {
            return arg_err("reset refers to an invalid state index");
        }
    }
    let mut cache: HashMap<u64, Mat> = HashMap::new();
    let mut advance = |x: &Vector, h: f64| -> Result<Vector> {
        if h == 0.0 {
            return Ok(x.clone());
        }
        let key = gap_key(h);
        if !cache.contains_key(&key) {
            cache.insert(key, mat_exp(&(a * h))?);
        }
        Ok(&cache[&key] * x)
    };
    let mut out = Vec::with_capacity(times.len());
    let mut x = x0.clone();
    let mut t = 0.0;
    let mut next_reset = 0;
    let mut prev_sample: Option<f64> = None;
    for &ts in times {
        // a repeated timestamp at a switching instant reports the post-switch state
        let duplicate = prev_sample == Some(ts);
        while next_reset < resets.len()
            && (resets[next_reset].time < ts || (duplicate && resets[next_reset].time == ts))
        {
            let r = &resets[next_reset];
            x = advance(&x, r.time - t)?;
            t = r.time;
            for (i, v) in &r.values {
                x[*i] = *v;
            }
            next_reset += 1;
        }
        x = advance(&x, ts - t)?;
        t = ts;
        out.push(x.clone());
        prev_sample = Some(ts);
    }
    Ok(out)
}

/// Uniform grid `k * horizon / n` for `k = 0..n`.
pub fn uniform_times(horizon: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| k as f64 * horizon / n as f64).collect()
}

/// Named multichannel signals on a common time grid.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SampledTrajectory {
    pub times: Vec<f64>,
    signals: Vec<(String, Mat)>,
}

impl SampledTrajectory {
    pub fn new(times: Vec<f64>) -> Self {
        SampledTrajectory { times, signals: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Adds a signal stored as `dim x samples`.
    pub fn insert(&mut self, name: &str, data: Mat) -> Result<()> {
        if data.ncols() != self.times.len() {
            return dim_err(format!("signal {name} has {} samples, expected {}", data.ncols(), self.times.len()));
        }
        if name.is_empty() || name.contains(',') {
            return arg_err("signal names must be nonempty and comma-free");
        }
        if let Some(slot) = self.signals.iter_mut().find(|(n, _)| n == name) {
            slot.1 = data;
        } else {
            self.signals.push((name.to_string(), data));
        }
        Ok(())
    }

    pub fn insert_samples(&mut self, name: &str, samples: &[Vector]) -> Result<()> {
        let dim = samples.first().map(|v| v.len()).unwrap_or(0);
        let m = Mat::from_fn(dim, samples.len(), |i, j| samples[j][i]);
        self.insert(name, m)
    }

    pub fn get(&self, name: &str) -> Option<&Mat> {
        self.signals.iter().find(|(n, _)| n == name).map(|(_, m)| m)
    }

    pub fn require(&self, name: &str) -> Result<&Mat> {
        self.get(name).ok_or_else(|| Error::Data(format!("trajectory has no signal named {name}")))
    }

    pub fn names(&self) -> Vec<&str> {
        self.signals.iter().map(|(n, _)| n.as_str()).collect()
    }

    /// First `n` samples.
    pub fn truncate(&self, n: usize) -> Result<Self> {
        if n > self.len() {
            return Err(Error::Data(format!("trajectory has {} samples, {} requested", self.len(), n)));
        }
        Ok(SampledTrajectory {
            times: self.times[..n].to_vec(),
            signals: self.signals.iter().map(|(k, m)| (k.clone(), m.columns(0, n).into_owned())).collect(),
        })
    }

    /// Samples at the requested instants, each matched within `slack`.
    pub fn select_times(&self, times: &[f64], slack: f64) -> Result<Self> {
        let mut picks = Vec::with_capacity(times.len());
        for &t in times {
            let k = self.times.partition_point(|&g| g < t - slack);
            if k >= self.times.len() || (self.times[k] - t).abs() > slack {
                return Err(Error::Data(format!("trajectory has no sample at t = {t}")));
            }
            picks.push(k);
        }
        Ok(SampledTrajectory {
            times: picks.iter().map(|&k| self.times[k]).collect(),
            signals: self
                .signals
                .iter()
                .map(|(name, m)| (name.clone(), Mat::from_fn(m.nrows(), picks.len(), |i, j| m[(i, picks[j])])))
                .collect(),
        })
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let mut header = vec!["t".to_string()];
        for (name, m) in &self.signals {
            for i in 0..m.nrows() {
                header.push(format!("{name}_{i}"));
            }
        }
        wr.write_record(&header)?;
        for (k, t) in self.times.iter().enumerate() {
            let mut row = vec![format!("{t:.16e}")];
            for (_, m) in &self.signals {
                for i in 0..m.nrows() {
                    row.push(format!("{:.16e}", m[(i, k)]));
                }
            }
            wr.write_record(&row)?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let headers = rd.headers()?.clone();
        if headers.get(0) != Some("t") {
            return Err(Error::Data("first CSV column must be t".into()));
        }
        let mut layout: Vec<(String, usize)> = Vec::new();
        for h in headers.iter().skip(1) {
            let (name, idx) = h
                .rsplit_once('_')
                .ok_or_else(|| Error::Data(format!("column {h} is not of the form name_index")))?;
            let idx: usize = idx.parse().map_err(|_| Error::Data(format!("column {h} has a bad index")))?;
            layout.push((name.to_string(), idx));
        }
        let mut times = Vec::new();
        let mut cols: Vec<Vec<f64>> = vec![Vec::new(); layout.len()];
        for rec in rd.records() {
            let rec = rec?;
            if rec.len() != layout.len() + 1 {
                return Err(Error::Data("CSV row has the wrong number of fields".into()));
            }
            let parse = |s: &str| -> Result<f64> {
                let v: f64 = s.trim().parse().map_err(|_| Error::Data(format!("bad number {s}")))?;
                if !v.is_finite() {
                    return Err(Error::Data("non-finite value in CSV".into()));
                }
                Ok(v)
            };
            times.push(parse(&rec[0])?);
            for (k, c) in cols.iter_mut().enumerate() {
                c.push(parse(&rec[k + 1])?);
            }
        }
        if times.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Data("CSV times must be nondecreasing".into()));
        }
        let mut traj = SampledTrajectory::new(times);
        let mut order: Vec<String> = Vec::new();
        for (name, _) in &layout {
            if !order.contains(name) {
                order.push(name.clone());
            }
        }
        for name in order {
            let idxs: Vec<(usize, usize)> = layout
                .iter()
                .enumerate()
                .filter(|(_, (n, _))| *n == name)
                .map(|(col, (_, i))| (col, *i))
                .collect();
            let dim = idxs.len();
            let mut m = Mat::zeros(dim, traj.len());
            let mut seen = vec![false; dim];
            for (col, i) in idxs {
                if i >= dim || seen[i] {
                    return Err(Error::Data(format!("signal {name} has inconsistent indices")));
                }
                seen[i] = true;
                for k in 0..traj.len() {
                    m[(i, k)] = cols[col][k];
                }
            }
            traj.insert(&name, m)?;
        }
        Ok(traj)
    }
}

/// Stacks `[A B]` helper used by several callers.
pub fn ab(sys: &StateSpace) -> Result<Mat> {
    hstack(&[&sys.a, &sys.b])
}
