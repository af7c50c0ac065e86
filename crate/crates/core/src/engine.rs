//! Trajectory and ensemble simulation with online classification.
//!
//! Run `i` of an ensemble draws its uniforms from a ChaCha stream seeded by
//! `split(master_seed, i)`. Runs are computed in parallel and reduced in
//! index order, so summaries do not depend on the thread count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{tail_start, HittingStats, SlopeAccumulator, SlopeEstimate, Welford, DEFAULT_TAIL_FRACTION};
use crate::control::{step, ControlScheme};
use crate::distributions::{NoiseSpec, Sampler};
use crate::error::{Error, Result};
use crate::maps::MapSpec;
use crate::rng::{split, UniformStream};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Trap {
    pub b: f64,
    pub d: f64,
}

impl Trap {
    pub fn contains(&self, x: f64) -> bool {
        x >= self.b && x <= self.d
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Status {
    Running,
    Converged { target: f64 },
    Trapped { b: f64, d: f64, hitting_index: usize },
    Escaped,
    MaxSteps,
}

impl Status {
    pub fn label(&self) -> &'static str {
        match self {
            Status::Running => "running",
            Status::Converged { .. } => "converged",
            Status::Trapped { .. } => "trapped",
            Status::Escaped => "escaped",
            Status::MaxSteps => "max_steps",
        }
    }
}

/// Classification thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Classifier {
    pub eps_conv: f64,
    pub window: usize,
    pub x_max: f64,
    pub trap: Option<Trap>,
    /// Defaults to the scheme's equilibrium.
    pub target: Option<f64>,
}

impl Default for Classifier {
    fn default() -> Self {
        Classifier { eps_conv: 1e-8, window: 50, x_max: 1e8, trap: None, target: None }
    }
}

impl Classifier {
    pub fn validate(&self) -> Result<()> {
        if self.window == 0 {
            return Err(Error::Config("classification window must be >= 1".into()));
        }
        if !(self.eps_conv > 0.0) {
            return Err(Error::Config(format!("eps_conv must be positive, got {}", self.eps_conv)));
        }
        if !(self.x_max > 0.0) {
            return Err(Error::Config(format!("x_max must be positive, got {}", self.x_max)));
        }
        if let Some(t) = self.trap {
            if !(t.b < t.d) {
                return Err(Error::Config(format!("trap needs b < d, got [{}, {}]", t.b, t.d)));
            }
        }
        Ok(())
    }
}

/// Index of the first value in `[b, d]`, provided every later value stays there.
pub fn first_trap_entry(values: &[f64], b: f64, d: f64) -> Option<usize> {
    let trap = Trap { b, d };
    let first = values.iter().position(|&x| trap.contains(x))?;
    values[first..].iter().all(|&x| trap.contains(x)).then_some(first)
}

/// Online per-path statistics feeding the classification.
#[derive(Debug, Clone)]
struct Tracker {
    target: f64,
    classifier: Classifier,
    in_eps_run: usize,
    first_entry: Option<usize>,
    violations: usize,
    escaped: bool,
    min_value: f64,
    tail_from: usize,
    slope: SlopeAccumulator,
    last: f64,
}

impl Tracker {
    fn new(classifier: Classifier, target: f64, len: usize, tail_fraction: f64) -> Self {
        Tracker {
            target,
            classifier,
            in_eps_run: 0,
            first_entry: None,
            violations: 0,
            escaped: false,
            min_value: f64::INFINITY,
            tail_from: tail_start(len, tail_fraction),
            slope: SlopeAccumulator::default(),
            last: f64::NAN,
        }
    }

    /// Records `x_n`; returns false (and records nothing) on escape.
    fn push(&mut self, n: usize, x: f64) -> bool {
        if !x.is_finite() || x.abs() > self.classifier.x_max {
            self.escaped = true;
            return false;
        }
        self.last = x;
        self.min_value = self.min_value.min(x);
        let dev = x - self.target;
        if dev.abs() < self.classifier.eps_conv {
            self.in_eps_run += 1;
        } else {
            self.in_eps_run = 0;
        }
        if let Some(trap) = self.classifier.trap {
            match self.first_entry {
                None if trap.contains(x) => self.first_entry = Some(n),
                Some(_) if !trap.contains(x) => self.violations += 1,
                _ => {}
            }
        }
        if n >= self.tail_from {
            self.slope.push(n, dev);
        }
        true
    }

    fn status(&self) -> Status {
        if self.in_eps_run >= self.classifier.window {
            return Status::Converged { target: self.target };
        }
        if let (Some(trap), Some(hit)) = (self.classifier.trap, self.first_entry) {
            if self.violations == 0 {
                return Status::Trapped { b: trap.b, d: trap.d, hitting_index: hit };
            }
        }
        if self.escaped {
            Status::Escaped
        } else {
            Status::MaxSteps
        }
    }
}

/// Classifies a stored path.
pub fn classify(values: &[f64], target: f64, classifier: &Classifier) -> Status {
    let mut tracker = Tracker::new(*classifier, target, values.len(), DEFAULT_TAIL_FRACTION);
    for (n, &x) in values.iter().enumerate() {
        if !tracker.push(n, x) {
            break;
        }
    }
    if values.is_empty() {
        return Status::Running;
    }
    tracker.status()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub run_id: usize,
    pub x0: f64,
    pub seed: u64,
    /// Empty unless values were kept; truncated before the first escaped value.
    pub values: Vec<f64>,
    pub status: Status,
    /// Number of finite values produced (including `x0`).
    pub len: usize,
    pub terminal: f64,
    pub min_value: f64,
    /// Values outside the trap after the first entry.
    pub trap_violations: usize,
    pub slope: Option<SlopeEstimate>,
}

/// A fully specified, validated experiment.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub map: MapSpec,
    pub noise: NoiseSpec,
    pub scheme: ControlScheme,
    pub classifier: Classifier,
    pub tail_fraction: f64,
    sampler: Sampler,
}

impl Experiment {
    pub fn new(map: MapSpec, noise: NoiseSpec, scheme: ControlScheme, classifier: Classifier) -> Result<Self> {
        scheme.validate(&map, &noise)?;
        classifier.validate()?;
        let sampler = noise.sampler();
        Ok(Experiment { map, noise, scheme, classifier, tail_fraction: DEFAULT_TAIL_FRACTION, sampler })
    }

    pub fn target(&self) -> f64 {
        self.classifier.target.unwrap_or_else(|| self.scheme.target())
    }

    /// One path of `n_steps` steps with all values kept.
    pub fn run_trajectory(&self, x0: f64, n_steps: usize, seed: u64) -> Result<Trajectory> {
        if n_steps == 0 {
            return Err(Error::Config("n_steps must be >= 1".into()));
        }
        Ok(self.simulate(0, x0, n_steps, seed, true))
    }

    fn simulate(&self, run_id: usize, x0: f64, n_steps: usize, seed: u64, keep: bool) -> Trajectory {
        let mut tracker = Tracker::new(self.classifier, self.target(), n_steps + 1, self.tail_fraction);
        let mut values = Vec::with_capacity(if keep { n_steps + 1 } else { 0 });
        let mut stream = UniformStream::new(seed);
        let mut x = x0;
        let mut len = 0;
        for n in 0..=n_steps {
            if n > 0 {
                let xi = self.sampler.sample(stream.next_u01());
                x = step(&self.scheme, &self.map, x, xi);
            }
            if !tracker.push(n, x) {
                break;
            }
            if keep {
                values.push(x);
            }
            len += 1;
        }
        Trajectory {
            run_id,
            x0,
            seed,
            values,
            status: if len == 0 { Status::Escaped } else { tracker.status() },
            len,
            terminal: tracker.last,
            min_value: tracker.min_value,
            trap_violations: tracker.violations,
            slope: tracker.slope.estimate().ok(),
        }
    }

    /// `n_runs` paths; run `i` starts at `x0s[i % x0s.len()]`.
    ///
    /// `threads = 0` uses the default pool size.
    pub fn run_ensemble(
        &self,
        x0s: &[f64],
        n_runs: usize,
        n_steps: usize,
        master_seed: u64,
        threads: usize,
        keep_values: bool,
    ) -> Result<Ensemble> {
        if n_runs == 0 {
            return Err(Error::Config("n_runs must be >= 1".into()));
        }
        if n_steps == 0 {
            return Err(Error::Config("n_steps must be >= 1".into()));
        }
        if x0s.is_empty() {
            return Err(Error::Config("at least one initial value is required".into()));
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
        let trajectories: Vec<Trajectory> = pool.install(|| {
            (0..n_runs)
                .into_par_iter()
                .map(|i| {
                    let x0 = x0s[i % x0s.len()];
                    self.simulate(i, x0, n_steps, split(master_seed, i as u64), keep_values)
                })
                .collect()
        });
        let summary = EnsembleSummary::from_trajectories(&trajectories, n_steps, self.target());
        Ok(Ensemble { summary, trajectories })
    }
}

#[derive(Debug, Clone)]
pub struct Ensemble {
    pub summary: EnsembleSummary,
    pub trajectories: Vec<Trajectory>,
}

/// Flat ensemble statistics; one CSV row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnsembleSummary {
    pub n_runs: usize,
    pub n_steps: usize,
    pub target: f64,
    pub converged: usize,
    pub trapped: usize,
    pub escaped: usize,
    pub max_steps: usize,
    pub convergence_fraction: f64,
    pub trapped_fraction: f64,
    pub escaped_fraction: f64,
    /// Mean of `|x_N - target|` over the runs that did not escape.
    pub terminal_dev_mean: Option<f64>,
    /// Half-width of the normal 95% interval for that mean.
    pub terminal_dev_ci95: Option<f64>,
    pub hit_min: Option<f64>,
    pub hit_q25: Option<f64>,
    pub hit_median: Option<f64>,
    pub hit_q75: Option<f64>,
    pub hit_max: Option<f64>,
    pub mean_log_slope: Option<f64>,
    pub trap_violations: usize,
    pub min_value: f64,
}

impl EnsembleSummary {
    pub fn from_trajectories(trajectories: &[Trajectory], n_steps: usize, target: f64) -> Self {
        let n_runs = trajectories.len();
        let mut counts = [0usize; 4];
        let mut hits = Vec::with_capacity(n_runs);
        let mut dev = Welford::default();
        let mut slope = Welford::default();
        let mut violations = 0;
        let mut min_value = f64::INFINITY;
        for t in trajectories {
            let mut hit = None;
            match t.status {
                Status::Converged { .. } => counts[0] += 1,
                Status::Trapped { hitting_index, .. } => {
                    counts[1] += 1;
                    hit = Some(hitting_index);
                }
                Status::Escaped => counts[2] += 1,
                Status::MaxSteps | Status::Running => counts[3] += 1,
            }
            hits.push(hit);
            if !matches!(t.status, Status::Escaped) {
                dev.push((t.terminal - target).abs());
            }
            if let Some(s) = t.slope {
                slope.push(s.slope);
            }
            violations += t.trap_violations;
            min_value = min_value.min(t.min_value);
        }
        let frac = |c: usize| c as f64 / n_runs as f64;
        let hit_stats = HittingStats::from_indices(&hits);
        let has_dev = dev.count() > 0;
        EnsembleSummary {
            n_runs,
            n_steps,
            target,
            converged: counts[0],
            trapped: counts[1],
            escaped: counts[2],
            max_steps: counts[3],
            convergence_fraction: frac(counts[0]),
            trapped_fraction: frac(counts[1]),
            escaped_fraction: frac(counts[2]),
            terminal_dev_mean: has_dev.then(|| dev.mean()),
            terminal_dev_ci95: has_dev.then(|| 1.96 * dev.stderr()),
            hit_min: hit_stats.min,
            hit_q25: hit_stats.q25,
            hit_median: hit_stats.median,
            hit_q75: hit_stats.q75,
            hit_max: hit_stats.max,
            mean_log_slope: (slope.count() > 0).then(|| slope.mean()),
            trap_violations: violations,
            min_value,
        }
    }
}
