//! Statistics linking simulated paths back to the analytic quantities.

use serde::Serialize;

use crate::distributions::NoiseSpec;
use crate::engine::{first_trap_entry, Trajectory};
use crate::error::{Error, Result};
use crate::rng::UniformStream;

/// Deviations below this are treated as underflow and end the regression.
pub const UNDERFLOW: f64 = 1e-300;

pub const DEFAULT_TAIL_FRACTION: f64 = 0.5;

/// Running mean and variance (Welford).
#[derive(Debug, Clone, Copy, Default)]
pub struct Welford {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Welford {
    pub fn push(&mut self, v: f64) {
        self.n += 1;
        let d = v - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (v - self.mean);
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Sample variance; zero below two points.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    pub fn stderr(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            (self.variance() / self.n as f64).sqrt()
        }
    }
}

/// `(mean, stderr)` of `-ln|1 + σξ|` over `n_samples` draws.
pub fn empirical_eta(noise: &NoiseSpec, sigma: f64, n_samples: usize, seed: u64) -> Result<(f64, f64)> {
    noise.check_sigma_for_log(sigma)?;
    if n_samples < 2 {
        return Err(Error::InsufficientData(format!("need at least 2 samples, got {n_samples}")));
    }
    let sampler = noise.sampler();
    let mut stream = UniformStream::new(seed);
    let mut acc = Welford::default();
    for _ in 0..n_samples {
        let xi = sampler.sample(stream.next_u01());
        acc.push(-(sigma * xi).ln_1p());
    }
    Ok((acc.mean(), acc.stderr()))
}

/// Least-squares slope of `ln|x_n - target|` against `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SlopeEstimate {
    pub slope: f64,
    /// Zero when `n_used = 2`.
    pub stderr: f64,
    pub n_used: usize,
}

/// Online simple linear regression on centered co-moments.
#[derive(Debug, Clone, Copy, Default)]
pub struct SlopeAccumulator {
    n: usize,
    mean_t: f64,
    mean_y: f64,
    c_tt: f64,
    c_ty: f64,
    c_yy: f64,
    stopped: bool,
}

impl SlopeAccumulator {
    /// Adds `(n, x_n)`; the first deviation below [`UNDERFLOW`] (or a
    /// non-finite one) closes the accumulator.
    pub fn push(&mut self, n: usize, deviation: f64) {
        if self.stopped {
            return;
        }
        let dev = deviation.abs();
        if !(dev >= UNDERFLOW) || !dev.is_finite() {
            self.stopped = true;
            return;
        }
        let t = n as f64;
        let y = dev.ln();
        self.n += 1;
        let k = self.n as f64;
        let dt = t - self.mean_t;
        let dy = y - self.mean_y;
        self.mean_t += dt / k;
        self.mean_y += dy / k;
        self.c_tt += dt * (t - self.mean_t);
        self.c_ty += dt * (y - self.mean_y);
        self.c_yy += dy * (y - self.mean_y);
    }

    pub fn estimate(&self) -> Result<SlopeEstimate> {
        if self.n < 2 || self.c_tt <= 0.0 {
            return Err(Error::InsufficientData(format!(
                "slope needs at least 2 usable points, got {}",
                self.n
            )));
        }
        let slope = self.c_ty / self.c_tt;
        let stderr = if self.n > 2 {
            let ssr = (self.c_yy - slope * self.c_ty).max(0.0);
            (ssr / (self.n - 2) as f64 / self.c_tt).sqrt()
        } else {
            0.0
        };
        Ok(SlopeEstimate { slope, stderr, n_used: self.n })
    }
}

/// Index where the tail of a path with `len` values starts.
pub fn tail_start(len: usize, tail_fraction: f64) -> usize {
    ((len as f64) * (1.0 - tail_fraction)).floor() as usize
}

/// Slope of `ln|x_n - target|` over the final `tail_fraction` of `values`.
pub fn lyapunov_slope(values: &[f64], target: f64, tail_fraction: f64) -> Result<SlopeEstimate> {
    if !(tail_fraction > 0.0 && tail_fraction <= 1.0) {
        return Err(Error::domain(format!("tail_fraction must lie in (0, 1], got {tail_fraction}")));
    }
    let mut acc = SlopeAccumulator::default();
    for (n, &x) in values.iter().enumerate().skip(tail_start(values.len(), tail_fraction)) {
        acc.push(n, x - target);
    }
    acc.estimate()
}

/// First-entry indices into a trap across runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HittingStats {
    pub n_runs: usize,
    pub n_trapped: usize,
    pub trapped_fraction: f64,
    pub never_trapped_fraction: f64,
    pub min: Option<f64>,
    pub q25: Option<f64>,
    pub median: Option<f64>,
    pub q75: Option<f64>,
    pub max: Option<f64>,
}

impl HittingStats {
    pub fn from_indices(hits: &[Option<usize>]) -> Self {
        let mut times: Vec<f64> = hits.iter().flatten().map(|&h| h as f64).collect();
        times.sort_by(f64::total_cmp);
        let n_runs = hits.len();
        let n_trapped = times.len();
        let trapped_fraction = if n_runs == 0 { 0.0 } else { n_trapped as f64 / n_runs as f64 };
        HittingStats {
            n_runs,
            n_trapped,
            trapped_fraction,
            never_trapped_fraction: if n_runs == 0 { 0.0 } else { 1.0 - trapped_fraction },
            min: quantile(&times, 0.0),
            q25: quantile(&times, 0.25),
            median: quantile(&times, 0.5),
            q75: quantile(&times, 0.75),
            max: quantile(&times, 1.0),
        }
    }
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], p: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let pos = p * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    let hi = sorted[(i + 1).min(sorted.len() - 1)];
    Some(sorted[i] + frac * (hi - sorted[i]))
}

/// Hitting-time statistics of stored trajectories for the trap `[b, d]`.
pub fn hitting_time_stats(trajectories: &[Trajectory], b: f64, d: f64) -> HittingStats {
    let hits: Vec<Option<usize>> = trajectories
        .iter()
        .map(|t| first_trap_entry(&t.values, b, d))
        .collect();
    HittingStats::from_indices(&hits)
}
