//! Exact stochastic simulation of the network, turnover extraction and
//! binned photon traces.
//!
//! The random stream is ChaCha8 seeded from a `u64`, so results are
//! reproducible across platforms.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Poisson};

use crate::correlation::DetectionModel;
use crate::error::{Error, Result};
use crate::linalg::left_null_vector;
use crate::network::{Generator, NetworkSpec};

/// When a simulation stops.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StopRule {
    /// Simulate the time interval `[0, horizon)`.
    Horizon(f64),
    /// Stop at the E0 entry that completes this many turnovers.
    Turnovers(usize),
}

/// A piecewise-constant state path. State `states[k]` is entered at
/// `times[k]` and held until `times[k + 1]` (or `horizon` for the last).
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub n: usize,
    pub states: Vec<u32>,
    pub times: Vec<f64>,
    pub horizon: f64,
    pub seed: u64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Time spent in each state.
    pub fn occupancy(&self) -> Vec<f64> {
        let mut occ = vec![0.0; 3 * self.n];
        for k in 0..self.states.len() {
            let end = self.times.get(k + 1).copied().unwrap_or(self.horizon);
            occ[self.states[k] as usize] += end - self.times[k];
        }
        occ
    }
}

/// Precomputed jump tables of a generator.
#[derive(Debug, Clone)]
struct JumpTable {
    exit: Vec<f64>,
    targets: Vec<Vec<(u32, f64)>>,
}

impl JumpTable {
    fn new(q: &Generator) -> Result<Self> {
        let m = q.matrix();
        let d = q.dim();
        let mut exit = Vec::with_capacity(d);
        let mut targets = Vec::with_capacity(d);
        for i in 0..d {
            let rate: f64 = (0..d).filter(|&j| j != i).map(|j| m[(i, j)]).sum();
            if !(rate > 0.0) {
                return Err(Error::spec(format!("state {i} is absorbing")));
            }
            let mut cum = 0.0;
            let mut row = Vec::new();
            for j in (0..d).filter(|&j| j != i && m[(i, j)] > 0.0) {
                cum += m[(i, j)] / rate;
                row.push((j as u32, cum));
            }
            row.last_mut().expect("non-absorbing state has a target").1 = 1.0;
            exit.push(rate);
            targets.push(row);
        }
        Ok(JumpTable { exit, targets })
    }

    fn jump(&self, state: usize, u: f64) -> u32 {
        let row = &self.targets[state];
        row.iter()
            .find(|(_, c)| u < *c)
            .unwrap_or(row.last().expect("nonempty"))
            .0
    }
}

/// Runs the chain and hands every state entry `(state, time)` to `visit`,
/// starting with the initial state at time 0. Returns the stopping time.
///
/// The initial state is drawn from the stationary distribution.
pub fn simulate_with<F>(spec: &NetworkSpec, stop: StopRule, seed: u64, mut visit: F) -> Result<f64>
where
    F: FnMut(u32, f64),
{
    let q = spec.generator();
    if !q.is_irreducible() {
        return Err(Error::Reducible("cannot simulate a reducible network".into()));
    }
    match stop {
        StopRule::Horizon(h) if !(h.is_finite() && h > 0.0) => {
            return Err(Error::arg(format!("horizon must be positive, got {h}")))
        }
        StopRule::Turnovers(0) => return Err(Error::arg("target turnovers must be positive")),
        _ => {}
    }
    let table = JumpTable::new(&q)?;
    let pi = left_null_vector(q.matrix())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let u: f64 = rng.random();
    let mut cum = 0.0;
    let mut state = pi.len() - 1;
    for (i, p) in pi.iter().enumerate() {
        cum += p;
        if u < cum {
            state = i;
            break;
        }
    }
    let n = spec.n();
    let mut t = 0.0;
    visit(state as u32, t);
    let mut counter = TurnoverCounter::new(n);
    counter.push(state as u32, t);
    loop {
        let hold: f64 = Exp1.sample(&mut rng);
        let next_t = t + hold / table.exit[state];
        if let StopRule::Horizon(h) = stop {
            if next_t >= h {
                return Ok(h);
            }
        }
        let next = table.jump(state, rng.random());
        t = next_t;
        state = next as usize;
        visit(next, t);
        if let StopRule::Turnovers(target) = stop {
            if counter.push(next, t) && counter.completed >= target {
                return Ok(t);
            }
        }
    }
}

/// Simulates and records the full path.
pub fn simulate(spec: &NetworkSpec, stop: StopRule, seed: u64) -> Result<Trajectory> {
    let mut states = Vec::new();
    let mut times = Vec::new();
    let horizon = simulate_with(spec, stop, seed, |s, t| {
        states.push(s);
        times.push(t);
    })?;
    Ok(Trajectory {
        n: spec.n(),
        states,
        times,
        horizon,
        seed,
    })
}

/// Turnover durations and their start and end conformations.
///
/// A turnover starts when the enzyme leaves E0 for a free-enzyme state and
/// ends at the next entry into E0; the E0 dwell itself is not part of it.
/// The partial turnover at the start of a path is discarded.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TurnoverRecord {
    pub durations: Vec<f64>,
    /// Conformation index `i` of the `E_i` state starting each turnover.
    pub start_states: Vec<u32>,
    /// Conformation index `j` of the `E0_j` state ending each turnover.
    pub end_states: Vec<u32>,
}

impl TurnoverRecord {
    pub fn len(&self) -> usize {
        self.durations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.durations.is_empty()
    }
}

/// Incremental turnover extraction over a stream of state entries.
#[derive(Debug, Clone)]
pub struct TurnoverExtractor {
    n: u32,
    seen_on: bool,
    previous_on: bool,
    start: Option<(u32, f64)>,
    pub record: TurnoverRecord,
}

impl TurnoverExtractor {
    pub fn new(n: usize) -> Self {
        TurnoverExtractor {
            n: n as u32,
            seen_on: false,
            previous_on: false,
            start: None,
            record: TurnoverRecord::default(),
        }
    }

    /// Feeds one state entry; returns true when it completes a turnover.
    pub fn push(&mut self, state: u32, time: f64) -> bool {
        let on = state >= 2 * self.n;
        let mut completed = false;
        if on {
            if let Some((start_state, t0)) = self.start.take() {
                self.record.durations.push(time - t0);
                self.record.start_states.push(start_state);
                self.record.end_states.push(state - 2 * self.n);
                completed = true;
            }
            self.seen_on = true;
        } else if self.previous_on && self.seen_on && state < self.n {
            self.start = Some((state, time));
        }
        self.previous_on = on;
        completed
    }
}

/// Counts completed turnovers without storing them.
#[derive(Debug, Clone)]
struct TurnoverCounter {
    inner: TurnoverExtractor,
    completed: usize,
}

impl TurnoverCounter {
    fn new(n: usize) -> Self {
        TurnoverCounter {
            inner: TurnoverExtractor::new(n),
            completed: 0,
        }
    }

    fn push(&mut self, state: u32, time: f64) -> bool {
        let done = self.inner.push(state, time);
        if done {
            self.completed += 1;
            self.inner.record = TurnoverRecord::default();
        }
        done
    }
}

pub fn extract_turnovers(traj: &Trajectory) -> Result<TurnoverRecord> {
    let on_visits = traj
        .states
        .iter()
        .zip(std::iter::once(u32::MAX).chain(traj.states.iter().copied()))
        .filter(|&(&s, prev)| s >= 2 * traj.n as u32 && (prev == u32::MAX || prev < 2 * traj.n as u32))
        .count();
    if on_visits < 2 {
        return Err(Error::arg(format!(
            "trajectory visits the E0 stage {on_visits} time(s); at least two are needed"
        )));
    }
    let mut ex = TurnoverExtractor::new(traj.n);
    for (&s, &t) in traj.states.iter().zip(&traj.times) {
        ex.push(s, t);
    }
    Ok(ex.record)
}

/// Photon counts per bin of width `bin_width`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhotonTrace {
    pub counts: Vec<u32>,
    pub bin_width: f64,
    pub detection: DetectionModel,
}

/// Incremental binning of E0 occupancy into per-bin on-times.
#[derive(Debug, Clone)]
pub struct OnTimeBinner {
    n: u32,
    bin_width: f64,
    current: Option<(u32, f64)>,
    pub on_time: Vec<f64>,
}

impl OnTimeBinner {
    pub fn new(n: usize, bin_width: f64) -> Self {
        OnTimeBinner {
            n: n as u32,
            bin_width,
            current: None,
            on_time: Vec::new(),
        }
    }

    fn add_interval(&mut self, a: f64, b: f64) {
        let dt = self.bin_width;
        let mut lo = a;
        while lo < b {
            let mut k = (lo / dt).floor() as usize;
            if (k + 1) as f64 * dt <= lo {
                k += 1;
            }
            let edge = ((k + 1) as f64 * dt).min(b);
            if self.on_time.len() <= k {
                self.on_time.resize(k + 1, 0.0);
            }
            self.on_time[k] += edge - lo;
            if edge <= lo {
                break;
            }
            lo = edge;
        }
    }

    pub fn push(&mut self, state: u32, time: f64) {
        if let Some((s, t0)) = self.current {
            if s >= 2 * self.n {
                self.add_interval(t0, time);
            }
        }
        self.current = Some((state, time));
    }

    /// Closes the path at `horizon` and returns on-times for the
    /// `floor(horizon / bin_width)` complete bins.
    pub fn finish(mut self, horizon: f64) -> Vec<f64> {
        self.push(u32::MAX, horizon);
        let bins = (horizon / self.bin_width).floor() as usize;
        self.on_time.resize(bins, 0.0);
        self.on_time
    }
}

/// Draws `Poisson(nu T_on) + Poisson(nu0 dt)` photons for each bin.
pub fn photons_from_on_time(on_time: &[f64], det: &DetectionModel, seed: u64) -> Result<PhotonTrace> {
    det.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let background = det.nu0 * det.bin_width;
    let bg = if background > 0.0 {
        Some(Poisson::new(background).map_err(|e| Error::numerical(e.to_string()))?)
    } else {
        None
    };
    let mut counts = Vec::with_capacity(on_time.len());
    for &t_on in on_time {
        let burst_mean = det.nu * t_on;
        let mut c = 0u32;
        if burst_mean > 0.0 {
            let p = Poisson::new(burst_mean).map_err(|e| Error::numerical(e.to_string()))?;
            c += p.sample(&mut rng) as u32;
        }
        if let Some(bg) = &bg {
            c += bg.sample(&mut rng) as u32;
        }
        counts.push(c);
    }
    Ok(PhotonTrace {
        counts,
        bin_width: det.bin_width,
        detection: *det,
    })
}

pub fn photon_trace(traj: &Trajectory, det: &DetectionModel, seed: u64) -> Result<PhotonTrace> {
    det.validate()?;
    if traj.horizon < 2.0 * det.bin_width {
        return Err(Error::arg("trajectory is shorter than two bins"));
    }
    let mut binner = OnTimeBinner::new(traj.n, det.bin_width);
    for (&s, &t) in traj.states.iter().zip(&traj.times) {
        binner.push(s, t);
    }
    photons_from_on_time(&binner.finish(traj.horizon), det, seed)
}

/// Simulates directly to a photon trace without keeping the path, for long
/// horizons.
pub fn simulate_photon_trace(
    spec: &NetworkSpec,
    det: &DetectionModel,
    horizon: f64,
    seed: u64,
    photon_seed: u64,
) -> Result<PhotonTrace> {
    det.validate()?;
    let mut binner = OnTimeBinner::new(spec.n(), det.bin_width);
    let end = simulate_with(spec, StopRule::Horizon(horizon), seed, |s, t| binner.push(s, t))?;
    photons_from_on_time(&binner.finish(end), det, photon_seed)
}

/// Simulates until `target` turnovers are complete, keeping only the
/// turnover record.
pub fn simulate_turnovers(spec: &NetworkSpec, target: usize, seed: u64) -> Result<TurnoverRecord> {
    let mut ex = TurnoverExtractor::new(spec.n());
    simulate_with(spec, StopRule::Turnovers(target), seed, |s, t| {
        ex.push(s, t);
    })?;
    Ok(ex.record)
}

/// Per-state occupancy fractions in `windows` equal time windows of a
/// stream, for batch standard errors.
#[derive(Debug, Clone)]
pub struct WindowedOccupancy {
    width: f64,
    current: Option<(u32, f64)>,
    pub windows: Vec<Vec<f64>>,
}

impl WindowedOccupancy {
    pub fn new(dim: usize, horizon: f64, windows: usize) -> Self {
        WindowedOccupancy {
            width: horizon / windows as f64,
            current: None,
            windows: vec![vec![0.0; dim]; windows],
        }
    }

    pub fn push(&mut self, state: u32, time: f64) {
        if let Some((s, t0)) = self.current {
            let mut lo = t0;
            while lo < time {
                let mut k = (lo / self.width).floor() as usize;
                if (k + 1) as f64 * self.width <= lo {
                    k += 1;
                }
                let k = k.min(self.windows.len() - 1);
                let edge = if k + 1 == self.windows.len() {
                    time
                } else {
                    ((k + 1) as f64 * self.width).min(time)
                };
                self.windows[k][s as usize] += edge - lo;
                if edge <= lo {
                    break;
                }
                lo = edge;
            }
        }
        self.current = Some((state, time));
    }

    /// Closes the stream and returns occupancy fractions per window.
    pub fn finish(mut self, horizon: f64) -> Vec<Vec<f64>> {
        self.push(0, horizon);
        for w in self.windows.iter_mut() {
            let total: f64 = w.iter().sum();
            if total > 0.0 {
                w.iter_mut().for_each(|x| *x /= total);
            }
        }
        self.windows
    }
}
