//! Controlled recurrences and the analytic checks that decide whether a
//! noise stabilizes or destabilizes an equilibrium.

use serde::{Deserialize, Serialize};

use crate::distributions::{stabilization_threshold, NoiseSpec, StabilizingChoice, SUPPORT_MARGIN};
use crate::error::{Error, Result};
use crate::maps::{grid_sup, MapSpec, SINGULARITY_GUARD};

/// Default relative slack on the σ profiles.
pub const DEFAULT_MARGIN: f64 = 0.01;

/// Default exponents tried by [`check_destabilize`], descending.
pub const DEFAULT_ALPHA_GRID: [f64; 6] = [1.0, 0.5, 0.25, 0.1, 0.05, 0.01];

const DESTAB_GRID: usize = 10_000;
const DESTAB_SLACK: f64 = 1e-9;
const TRAP_GRID: usize = 100_000;

/// State-dependent noise amplitude `σ(x)`, expressed through `f(x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SigmaProfile {
    Constant { sigma: f64 },
    /// `(1+margin)(2l-1)(1+sqrt(1+4f²))/2`, for discrete noise.
    DiscreteBound { l: u32, #[serde(default = "default_margin")] margin: f64 },
    /// `(1+margin) max{f, e}`, for continuous noise.
    ContinuousBound { #[serde(default = "default_margin")] margin: f64 },
}

fn default_margin() -> f64 {
    DEFAULT_MARGIN
}

impl SigmaProfile {
    pub fn sigma(&self, f: f64) -> f64 {
        match *self {
            SigmaProfile::Constant { sigma } => sigma,
            SigmaProfile::DiscreteBound { l, margin } => {
                (1.0 + margin) * f64::from(2 * l - 1) * (1.0 + (1.0 + 4.0 * f * f).sqrt()) / 2.0
            }
            SigmaProfile::ContinuousBound { margin } => {
                (1.0 + margin) * f.max(std::f64::consts::E)
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            SigmaProfile::Constant { sigma } => {
                if !(sigma >= 0.0) || !sigma.is_finite() {
                    return Err(Error::domain(format!("sigma must be non-negative, got {sigma}")));
                }
            }
            SigmaProfile::DiscreteBound { l, margin } => {
                if l == 0 {
                    return Err(Error::domain("discrete-bound profile needs l >= 1"));
                }
                if !(margin >= 0.0) || !margin.is_finite() {
                    return Err(Error::domain(format!("profile margin must be >= 0, got {margin}")));
                }
            }
            SigmaProfile::ContinuousBound { margin } => {
                if !(margin >= 0.0) || !margin.is_finite() {
                    return Err(Error::domain(format!("profile margin must be >= 0, got {margin}")));
                }
            }
        }
        Ok(())
    }
}

/// Closed interval of `x` where the noise acts; a missing end is unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct NoiseWindow {
    #[serde(default)]
    pub lo: Option<f64>,
    #[serde(default)]
    pub hi: Option<f64>,
}

impl NoiseWindow {
    pub fn contains(&self, x: f64) -> bool {
        self.lo.is_none_or(|lo| x >= lo) && self.hi.is_none_or(|hi| x <= hi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "snake_case")]
pub enum ControlScheme {
    /// `x' = (1 + σξ) F(x)`.
    StabilizeZero { sigma: f64 },
    /// `x' = F(x) + σ(F(x) - K)ξ`.
    StabilizeK { k: f64, sigma: f64 },
    /// `x' = F(x) + σ_b(x) x ξ`, optionally clamped to `max{., -b}`.
    /// `σ_b = σ` below `b` and zero from `b` on. `clamp` defaults to on
    /// whenever `truncation_b` is set.
    DestabilizeZero {
        profile: SigmaProfile,
        #[serde(default)]
        truncation_b: Option<f64>,
        #[serde(default)]
        clamp: Option<bool>,
    },
    /// `x' = F(x) + (x - K) σ(x - K) ξ`, with the profile evaluated on the
    /// shifted rate and the noise acting only for `x` in `window`.
    DestabilizeK {
        k: f64,
        profile: SigmaProfile,
        #[serde(default)]
        window: NoiseWindow,
    },
}

impl ControlScheme {
    /// The equilibrium the scheme is about.
    pub fn target(&self) -> f64 {
        match *self {
            ControlScheme::StabilizeZero { .. } | ControlScheme::DestabilizeZero { .. } => 0.0,
            ControlScheme::StabilizeK { k, .. } | ControlScheme::DestabilizeK { k, .. } => k,
        }
    }

    /// Lower clamp `-b`, when active.
    pub fn clamp_floor(&self) -> Option<f64> {
        match *self {
            ControlScheme::DestabilizeZero { truncation_b: Some(b), clamp, .. } if clamp.unwrap_or(true) => {
                Some(-b)
            }
            _ => None,
        }
    }

    /// Checks the scheme against the map and the noise it will be driven by.
    pub fn validate(&self, map: &MapSpec, noise: &NoiseSpec) -> Result<()> {
        map.validate()?;
        noise.validate()?;
        match *self {
            ControlScheme::StabilizeZero { sigma } | ControlScheme::StabilizeK { sigma, .. } => {
                if !(sigma >= 0.0) || !sigma.is_finite() {
                    return Err(Error::domain(format!("sigma must be non-negative, got {sigma}")));
                }
                if let ControlScheme::StabilizeK { k, .. } = *self {
                    map.require_equilibrium(k)?;
                }
                if sigma > 0.0 && factor_can_vanish(noise, sigma) {
                    return Err(Error::domain(format!(
                        "sigma = {sigma} makes 1 + sigma*xi vanish on the support of {noise:?}; \
                         discrete and piecewise noise need sigma < 1"
                    )));
                }
            }
            ControlScheme::DestabilizeZero { profile, truncation_b, clamp } => {
                profile.validate()?;
                if let Some(b) = truncation_b {
                    if !(b > 0.0) || !b.is_finite() {
                        return Err(Error::domain(format!("truncation b must be positive, got {b}")));
                    }
                } else if clamp == Some(true) {
                    return Err(Error::Config("clamp needs truncation_b".into()));
                }
            }
            ControlScheme::DestabilizeK { k, profile, window } => {
                profile.validate()?;
                map.require_equilibrium(k)?;
                if let (Some(lo), Some(hi)) = (window.lo, window.hi) {
                    if !(lo < hi) {
                        return Err(Error::domain(format!("noise window needs lo < hi, got [{lo}, {hi}]")));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Whether `1 + σξ = 0` is reachable for a draw of `noise`.
fn factor_can_vanish(noise: &NoiseSpec, sigma: f64) -> bool {
    let root = -1.0 / sigma;
    match *noise {
        NoiseSpec::PolynomialSymmetric { .. } => false,
        NoiseSpec::DiscreteUniform { l } => NoiseSpec::atoms(l)
            .iter()
            .any(|a| (1.0 + sigma * a).abs() < SUPPORT_MARGIN),
        NoiseSpec::PiecewiseUniform { l, delta } => NoiseSpec::windows(l, delta)
            .iter()
            .any(|w| root >= w.lo - SUPPORT_MARGIN && root <= w.hi + SUPPORT_MARGIN),
    }
}

/// Shifted rate `rm f(u)` at `x = u + K`, given `F(x)`.
fn shifted_rate(map: &MapSpec, k: f64, u: f64, full: f64) -> f64 {
    if u.abs() < SINGULARITY_GUARD {
        k * map.derivative(k) + 1.0
    } else {
        (full - k) / u
    }
}

/// One step of the controlled recurrence.
pub fn step(scheme: &ControlScheme, map: &MapSpec, x: f64, xi: f64) -> f64 {
    match *scheme {
        ControlScheme::StabilizeZero { sigma } => (1.0 + sigma * xi) * map.full(x),
        ControlScheme::StabilizeK { k, sigma } => {
            let full = map.full(x);
            full + sigma * (full - k) * xi
        }
        ControlScheme::DestabilizeZero { profile, truncation_b, clamp } => {
            let (f, full) = map.eval(x);
            let sigma = match truncation_b {
                Some(b) if x >= b => 0.0,
                _ => profile.sigma(f),
            };
            let y = full + sigma * x * xi;
            match truncation_b {
                Some(b) if clamp.unwrap_or(true) => y.max(-b),
                _ => y,
            }
        }
        ControlScheme::DestabilizeK { k, profile, window } => {
            let full = map.full(x);
            if !window.contains(x) {
                return full;
            }
            let u = x - k;
            let sigma = match profile {
                SigmaProfile::Constant { sigma } => sigma,
                _ => profile.sigma(shifted_rate(map, k, u, full)),
            };
            full + u * sigma * xi
        }
    }
}

/// An analytic stabilization verdict.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThresholdReport {
    /// `H` (or `ℋ` for a shifted map).
    pub bound: f64,
    pub ln_bound: f64,
    pub eta: f64,
    /// `ln bound < eta`.
    pub satisfied: bool,
    /// `eta - ln bound`.
    pub margin: f64,
    /// The coarse estimate `max{.., H + K(H+1)}`, for shifted maps.
    pub formula_bound: Option<f64>,
    /// Smallest parameter of the noise family that would stabilize; `None`
    /// when `bound <= 1` and no noise is needed.
    pub recommended: Option<StabilizingChoice>,
}

impl ThresholdReport {
    fn new(bound: f64, eta: f64, spec: &NoiseSpec, formula_bound: Option<f64>) -> Self {
        let ln_bound = bound.ln();
        let margin = eta - ln_bound;
        ThresholdReport {
            bound,
            ln_bound,
            eta,
            satisfied: margin > 0.0,
            margin,
            formula_bound,
            recommended: stabilization_threshold(spec.family(), bound).ok(),
        }
    }
}

/// `ln H < eta` for `(1 + σξ) F`, with `H = sup |f|` over `[lo, hi]`.
pub fn check_stabilize_zero(
    map: &MapSpec,
    interval: (f64, f64),
    spec: &NoiseSpec,
    sigma: f64,
) -> Result<ThresholdReport> {
    let eta = spec.log_gain_eta(sigma)?;
    let h = map.bound_h(interval.0, interval.1)?;
    Ok(ThresholdReport::new(h, eta, spec, None))
}

/// `ln ℋ < eta` for stabilizing `K`, with the numeric `ℋ` of the shifted map
/// over the default working interval.
pub fn check_stabilize_k(map: &MapSpec, k: f64, spec: &NoiseSpec, sigma: f64) -> Result<ThresholdReport> {
    let bound = map.shifted_bound(k)?;
    let eta = spec.log_gain_eta(sigma)?;
    Ok(ThresholdReport::new(bound.numeric_sup, eta, spec, Some(bound.formula_bound)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DestabilizeReport {
    pub satisfied: bool,
    /// First exponent on the grid for which the criterion held.
    pub alpha: Option<f64>,
    /// Smallest grid supremum of `E|f + σξ|^{-α}` over the tried exponents.
    pub worst_expectation: f64,
    /// Grid point attaining that supremum.
    pub worst_x: f64,
}

/// Whether some `α` on the grid makes `sup_x E|f(x) + σ(x)ξ|^{-α} < 1`.
///
/// `alpha_grid` defaults to [`DEFAULT_ALPHA_GRID`]; `α = 1` is skipped for the
/// polynomial family, where it is not integrable.
pub fn check_destabilize(
    map: &MapSpec,
    interval: (f64, f64),
    spec: &NoiseSpec,
    profile: &SigmaProfile,
    alpha_grid: Option<&[f64]>,
) -> Result<DestabilizeReport> {
    profile.validate()?;
    let (lo, hi) = interval;
    if !(lo < hi) {
        return Err(Error::domain(format!("bad interval [{lo}, {hi}]")));
    }
    let step = (hi - lo) / DESTAB_GRID as f64;
    let points: Vec<(f64, f64, f64)> = (0..=DESTAB_GRID)
        .map(|i| {
            let x = if i == DESTAB_GRID { hi } else { lo + step * i as f64 };
            let f = map.f(x);
            (x, f, profile.sigma(f))
        })
        .collect();
    if let Some(&(x, f, s)) = points.iter().find(|p| !(p.2 > p.1)) {
        return Err(Error::domain(format!(
            "profile must keep sigma(x) > f(x); at x = {x}: sigma = {s}, f = {f}"
        )));
    }

    let grid = alpha_grid.unwrap_or(&DEFAULT_ALPHA_GRID);
    let mut report = DestabilizeReport {
        satisfied: false,
        alpha: None,
        worst_expectation: f64::INFINITY,
        worst_x: f64::NAN,
    };
    for &alpha in grid {
        if alpha == 1.0 && !spec.allows_unit_alpha() {
            continue;
        }
        let mut sup = f64::NEG_INFINITY;
        let mut arg = f64::NAN;
        for &(x, f, s) in &points {
            let e = match spec.inverse_power_expectation(f, s, alpha) {
                Ok(e) => e,
                Err(Error::Domain(_)) => f64::INFINITY,
                Err(other) => return Err(other),
            };
            if e > sup {
                sup = e;
                arg = x;
            }
            if sup >= 1.0 - DESTAB_SLACK && sup >= report.worst_expectation {
                break;
            }
        }
        if sup < report.worst_expectation {
            report.worst_expectation = sup;
            report.worst_x = arg;
        }
        if sup < 1.0 - DESTAB_SLACK {
            report.satisfied = true;
            report.alpha = Some(alpha);
            report.worst_expectation = sup;
            report.worst_x = arg;
            break;
        }
    }
    Ok(report)
}

/// Grid checks behind the trapping result for truncated destabilization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrapReport {
    /// `F([b, d]) ⊆ [b, d]` on the grid.
    pub maps_into: bool,
    /// `f > 0` on `(0, d]`.
    pub f_positive: bool,
    /// `sup_{[-b, b]} x [f(x) + σ(x)]`.
    pub jump_sup: f64,
    /// `d > jump_sup`.
    pub jump_ok: bool,
    /// `max F` over `[b, d]` and the point attaining it.
    pub f_max: f64,
    pub f_max_at: f64,
    /// `F(f_max)`.
    pub f_of_f_max: f64,
    pub holds: bool,
}

/// Whether `[b, d]` is a trap for the truncated recurrence driven by `profile`.
pub fn check_trap(map: &MapSpec, b: f64, d: f64, profile: &SigmaProfile) -> Result<TrapReport> {
    profile.validate()?;
    if !(b > 0.0 && b < d) || !d.is_finite() {
        return Err(Error::domain(format!("trap needs 0 < b < d, got b = {b}, d = {d}")));
    }
    let (f_max_at, f_max) = argmax(|x| map.full(x), b, d, TRAP_GRID);
    let f_min = -grid_sup(|x| -map.full(x), b, d, TRAP_GRID);
    let maps_into = f_min >= b && f_max <= d;

    let step = d / TRAP_GRID as f64;
    let f_positive = (1..=TRAP_GRID).all(|i| map.f(step * i as f64) > 0.0);

    let jump_sup = grid_sup(|x| x * (map.f(x) + profile.sigma(map.f(x))), -b, b, TRAP_GRID);
    let jump_ok = d > jump_sup;
    Ok(TrapReport {
        maps_into,
        f_positive,
        jump_sup,
        jump_ok,
        f_max,
        f_max_at,
        f_of_f_max: map.full(f_max),
        holds: maps_into && f_positive && jump_ok,
    })
}

/// Grid argmax of `h` on `[lo, hi]` refined by golden section.
pub fn argmax<H: Fn(f64) -> f64>(h: H, lo: f64, hi: f64, n: usize) -> (f64, f64) {
    let step = (hi - lo) / n as f64;
    let (mut best_x, mut best) = (lo, h(lo));
    for i in 1..=n {
        let x = if i == n { hi } else { lo + step * i as f64 };
        let v = h(x);
        if v > best {
            best = v;
            best_x = x;
        }
    }
    let (mut a, mut b) = ((best_x - step).max(lo), (best_x + step).min(hi));
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    while b - a > 1e-12 * (1.0 + best_x.abs()) {
        let c = b - INV_PHI * (b - a);
        let e = a + INV_PHI * (b - a);
        if h(c) > h(e) {
            b = e;
        } else {
            a = c;
        }
    }
    let mid = 0.5 * (a + b);
    let v = h(mid);
    if v > best {
        (mid, v)
    } else {
        (best_x, best)
    }
}
