//! Bounded symmetric noises on `[-1, 1]`: densities, inverse-transform
//! samplers and exact expectations of the quantities the stability criteria
//! depend on.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature;

/// Absolute tolerance used by the quadrature fallbacks.
pub const QUAD_TOL: f64 = 1e-10;

/// Minimal distance from zero that `|f + sigma * a|` must keep at a support
/// point before the inverse power `|.|^{-alpha}` is considered well defined.
pub const SUPPORT_MARGIN: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum NoiseSpec {
    /// Density `(2s+1)/2 x^{2s}` on `[-1, 1]`; `s = 0` is the uniform law.
    PolynomialSymmetric { s: u32 },
    /// `2l` equally likely atoms `-1 + 2i/(2l-1)`; `l = 1` is Bernoulli `±1`.
    DiscreteUniform { l: u32 },
    /// Constant density on `2l` windows of half-width `delta` around the
    /// atoms of `DiscreteUniform { l }` (half windows at `±1`).
    PiecewiseUniform { l: u32, delta: f64 },
}

/// A noise family without its tuning parameter, as used when searching for a
/// parameter that achieves stabilization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum NoiseFamily {
    PolynomialSymmetric,
    DiscreteUniform { l: u32 },
    PiecewiseUniform { l: u32 },
}

/// A support window of `PiecewiseUniform`, with its probability mass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    pub lo: f64,
    pub hi: f64,
    pub mass: f64,
}

/// Parameters that make `ln H < eta` hold, per family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StabilizingChoice {
    /// Smallest `s` for `PolynomialSymmetric` with `sigma = 1`.
    MinimalS { s: u32 },
    /// Any `sigma` in `(sigma, 1)` stabilizes.
    SigmaFloor { sigma: f64 },
    /// A `(sigma, delta)` pair for `PiecewiseUniform`.
    SigmaDelta { sigma: f64, delta: f64 },
}

/// Inverse-CDF sampler built by [`NoiseSpec::sampler`].
#[derive(Debug, Clone, PartialEq)]
pub enum Sampler {
    Power { exponent: f64 },
    Atoms(Vec<f64>),
    Windows(Vec<Window>),
}

impl Sampler {
    pub fn sample(&self, u: f64) -> f64 {
        match self {
            Sampler::Power { exponent } => {
                let v = 2.0 * u - 1.0;
                if v == 0.0 {
                    return 0.0;
                }
                v.signum() * v.abs().powf(*exponent)
            }
            Sampler::Atoms(atoms) => {
                let n = atoms.len();
                let i = ((n as f64 * u).floor() as usize).min(n - 1);
                atoms[i]
            }
            Sampler::Windows(windows) => {
                let mut acc = 0.0;
                for w in windows {
                    if u < acc + w.mass {
                        let t = ((u - acc) / w.mass).clamp(0.0, 1.0);
                        return w.lo + t * (w.hi - w.lo);
                    }
                    acc += w.mass;
                }
                1.0
            }
        }
    }
}

fn atom(l: u32, i: u32) -> f64 {
    -1.0 + 2.0 * f64::from(i) / f64::from(2 * l - 1)
}

/// `sum_{k=0}^{s} 1/(2k+1)`.
pub fn odd_harmonic(s: u32) -> f64 {
    (0..=s).rev().map(|k| 1.0 / f64::from(2 * k + 1)).sum()
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            NoiseSpec::PolynomialSymmetric { .. } => Ok(()),
            NoiseSpec::DiscreteUniform { l } => {
                if l == 0 {
                    return Err(Error::domain("discrete noise needs l >= 1"));
                }
                Ok(())
            }
            NoiseSpec::PiecewiseUniform { l, delta } => {
                if l == 0 {
                    return Err(Error::domain("piecewise noise needs l >= 1"));
                }
                let max = 1.0 / f64::from(2 * l - 1);
                if !(delta > 0.0 && delta < max) {
                    return Err(Error::domain(format!(
                        "piecewise noise needs delta in (0, 1/(2l-1)) = (0, {max}), got {delta}"
                    )));
                }
                Ok(())
            }
        }
    }

    pub fn family(&self) -> NoiseFamily {
        match *self {
            NoiseSpec::PolynomialSymmetric { .. } => NoiseFamily::PolynomialSymmetric,
            NoiseSpec::DiscreteUniform { l } => NoiseFamily::DiscreteUniform { l },
            NoiseSpec::PiecewiseUniform { l, .. } => NoiseFamily::PiecewiseUniform { l },
        }
    }

    /// Whether the law has atoms or compactly supported windows (as opposed
    /// to the polynomial densities), which is what allows `alpha = 1` in
    /// [`inverse_power_expectation`](Self::inverse_power_expectation).
    pub fn allows_unit_alpha(&self) -> bool {
        !matches!(self, NoiseSpec::PolynomialSymmetric { .. })
    }

    /// Support points of `DiscreteUniform { l }`, ascending.
    pub fn atoms(l: u32) -> Vec<f64> {
        (0..2 * l).map(|i| atom(l, i)).collect()
    }

    /// Support windows of `PiecewiseUniform { l, delta }`, ascending.
    pub fn windows(l: u32, delta: f64) -> Vec<Window> {
        let edge = 1.0 / (2.0 * f64::from(2 * l - 1));
        let inner = 1.0 / f64::from(2 * l - 1);
        let mut out = Vec::with_capacity(2 * l as usize);
        out.push(Window { lo: -1.0, hi: -1.0 + delta, mass: edge });
        for i in 1..(2 * l - 1) {
            let c = atom(l, i);
            out.push(Window { lo: c - delta, hi: c + delta, mass: inner });
        }
        out.push(Window { lo: 1.0 - delta, hi: 1.0, mass: edge });
        out
    }

    /// Density at `x`; for `DiscreteUniform` the probability weight of the
    /// atom at `x` (zero off the atoms).
    pub fn density(&self, x: f64) -> f64 {
        if !(-1.0..=1.0).contains(&x) {
            return 0.0;
        }
        match *self {
            NoiseSpec::PolynomialSymmetric { s } => {
                f64::from(2 * s + 1) / 2.0 * x.powi(2 * s as i32)
            }
            NoiseSpec::DiscreteUniform { l } => {
                let on_atom = (0..2 * l).any(|i| (x - atom(l, i)).abs() <= 1e-12);
                if on_atom {
                    1.0 / f64::from(2 * l)
                } else {
                    0.0
                }
            }
            NoiseSpec::PiecewiseUniform { l, delta } => {
                let inside = Self::windows(l, delta)
                    .iter()
                    .any(|w| x >= w.lo && x <= w.hi);
                if inside {
                    1.0 / (2.0 * delta * f64::from(2 * l - 1))
                } else {
                    0.0
                }
            }
        }
    }

    /// Cumulative distribution function.
    pub fn cdf(&self, x: f64) -> f64 {
        if x < -1.0 {
            return 0.0;
        }
        if x >= 1.0 {
            return 1.0;
        }
        match *self {
            NoiseSpec::PolynomialSymmetric { s } => 0.5 * (x.powi(2 * s as i32 + 1) + 1.0),
            NoiseSpec::DiscreteUniform { l } => {
                let below = (0..2 * l).filter(|&i| atom(l, i) <= x).count();
                below as f64 / f64::from(2 * l)
            }
            NoiseSpec::PiecewiseUniform { l, delta } => Self::windows(l, delta)
                .iter()
                .map(|w| w.mass * ((x - w.lo) / (w.hi - w.lo)).clamp(0.0, 1.0))
                .sum(),
        }
    }

    /// Maps a uniform `u` in `[0, 1)` to a draw of this law (inverse CDF).
    pub fn sample(&self, u: f64) -> f64 {
        self.sampler().sample(u)
    }

    /// A sampler with the per-law tables precomputed, for repeated draws.
    pub fn sampler(&self) -> Sampler {
        match *self {
            NoiseSpec::PolynomialSymmetric { s } => Sampler::Power { exponent: 1.0 / f64::from(2 * s + 1) },
            NoiseSpec::DiscreteUniform { l } => Sampler::Atoms(Self::atoms(l)),
            NoiseSpec::PiecewiseUniform { l, delta } => Sampler::Windows(Self::windows(l, delta)),
        }
    }

    pub(crate) fn check_sigma_for_log(&self, sigma: f64) -> Result<()> {
        self.validate()?;
        match self {
            NoiseSpec::PolynomialSymmetric { .. } => {
                if !(sigma > 0.0 && sigma <= 1.0) {
                    return Err(Error::domain(format!(
                        "polynomial noise needs sigma in (0, 1], got {sigma}"
                    )));
                }
            }
            _ => {
                if !(sigma > 0.0 && sigma < 1.0) {
                    return Err(Error::domain(format!(
                        "discrete and piecewise noise need sigma < 1 (and > 0), got {sigma}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// `eta = -E ln|1 + sigma xi|`, the mean per-step logarithmic contraction
    /// contributed by the noise factor.
    pub fn log_gain_eta(&self, sigma: f64) -> Result<f64> {
        self.check_sigma_for_log(sigma)?;
        let mean_log = match *self {
            NoiseSpec::PolynomialSymmetric { s } => poly_mean_log(s, sigma),
            NoiseSpec::DiscreteUniform { l } => {
                // Atoms come in pairs ±a, and ln(1+σa) + ln(1-σa) = ln(1-σ²a²).
                let pairs: f64 = (0..l)
                    .map(|i| {
                        let a = atom(l, i);
                        (-(sigma * a) * (sigma * a)).ln_1p()
                    })
                    .sum();
                pairs / f64::from(2 * l)
            }
            NoiseSpec::PiecewiseUniform { l, delta } => Self::windows(l, delta)
                .iter()
                .map(|w| {
                    let integral = (log_antiderivative(sigma, w.hi) - log_antiderivative(sigma, w.lo))
                        / sigma;
                    w.mass * integral / (w.hi - w.lo)
                })
                .sum(),
        };
        Ok(-mean_log)
    }

    /// `E |f + sigma xi|^{-alpha}`.
    pub fn inverse_power_expectation(&self, f: f64, sigma: f64, alpha: f64) -> Result<f64> {
        self.validate()?;
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::domain(format!("sigma must be positive, got {sigma}")));
        }
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::domain(format!("alpha must lie in (0, 1], got {alpha}")));
        }
        if alpha == 1.0 && !self.allows_unit_alpha() {
            return Err(Error::domain(
                "alpha = 1 is not integrable for continuous polynomial noise",
            ));
        }
        match *self {
            NoiseSpec::DiscreteUniform { l } => {
                let mut total = 0.0;
                for i in 0..2 * l {
                    let v = (f + sigma * atom(l, i)).abs();
                    if v < SUPPORT_MARGIN {
                        return Err(Error::domain(format!(
                            "f + sigma xi vanishes at the atom {}",
                            atom(l, i)
                        )));
                    }
                    total += v.powf(-alpha);
                }
                Ok(total / f64::from(2 * l))
            }
            NoiseSpec::PiecewiseUniform { l, delta } => {
                let mut total = 0.0;
                for w in Self::windows(l, delta) {
                    let ylo = f + sigma * w.lo;
                    let yhi = f + sigma * w.hi;
                    let integral = if alpha < 1.0 {
                        (signed_power_antiderivative(yhi, alpha) - signed_power_antiderivative(ylo, alpha))
                            / sigma
                    } else {
                        if ylo.signum() != yhi.signum()
                            || ylo.abs() < SUPPORT_MARGIN
                            || yhi.abs() < SUPPORT_MARGIN
                        {
                            return Err(Error::domain(format!(
                                "f + sigma xi vanishes inside the window [{}, {}]",
                                w.lo, w.hi
                            )));
                        }
                        (yhi.abs().ln() - ylo.abs().ln()).abs() / sigma
                    };
                    total += w.mass * integral / (w.hi - w.lo);
                }
                Ok(total)
            }
            NoiseSpec::PolynomialSymmetric { s: 0 } => {
                let integral = (signed_power_antiderivative(f + sigma, alpha)
                    - signed_power_antiderivative(f - sigma, alpha))
                    / sigma;
                Ok(0.5 * integral)
            }
            NoiseSpec::PolynomialSymmetric { s } => Ok(poly_inverse_power(s, f, sigma, alpha)),
        }
    }
}

/// Smallest parameter of `family` that makes `ln h < eta` hold.
pub fn stabilization_threshold(family: NoiseFamily, h: f64) -> Result<StabilizingChoice> {
    if !(h > 1.0) || !h.is_finite() {
        return Err(Error::domain(format!(
            "stabilization threshold needs a finite bound H > 1, got {h}"
        )));
    }
    match family {
        NoiseFamily::PolynomialSymmetric => {
            let target = (2.0 * h).ln();
            let mut s = 0u32;
            let mut partial = 1.0;
            while partial <= target {
                s += 1;
                partial += 1.0 / f64::from(2 * s + 1);
            }
            Ok(StabilizingChoice::MinimalS { s })
        }
        NoiseFamily::DiscreteUniform { l } => {
            if l == 0 {
                return Err(Error::domain("discrete noise needs l >= 1"));
            }
            // sqrt(1 - H^{-2l}), written to stay accurate as H -> 1+
            let gap = -(-2.0 * f64::from(l) * h.ln()).exp_m1();
            Ok(StabilizingChoice::SigmaFloor { sigma: gap.sqrt() })
        }
        NoiseFamily::PiecewiseUniform { l } => {
            if l == 0 {
                return Err(Error::domain("piecewise noise needs l >= 1"));
            }
            piecewise_threshold(l, h.ln())
        }
    }
}

fn piecewise_threshold(l: u32, ln_h: f64) -> Result<StabilizingChoice> {
    const SIGMA_MAX: f64 = 1.0 - 1e-12;
    let mut delta = 0.5 / f64::from(2 * l - 1);
    for _ in 0..60 {
        let spec = NoiseSpec::PiecewiseUniform { l, delta };
        if spec.log_gain_eta(SIGMA_MAX)? > ln_h {
            // eta increases with sigma: E ln(1+σξ) is concave in σ with zero slope at 0.
            let (mut lo, mut hi) = (0.0_f64, SIGMA_MAX);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if spec.log_gain_eta(mid)? > ln_h {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            return Ok(StabilizingChoice::SigmaDelta { sigma: hi, delta });
        }
        delta *= 0.5;
    }
    Err(Error::domain(format!(
        "no (sigma, delta) pair found for piecewise noise with l = {l} and ln H = {ln_h}"
    )))
}

/// `E ln(1 + sigma xi)` for the polynomial density with `0 < sigma <= 1`.
fn poly_mean_log(s: u32, sigma: f64) -> f64 {
    if sigma == 1.0 {
        return std::f64::consts::LN_2 - odd_harmonic(s);
    }
    // E ln(1+σξ) = ((2s+1)/2) [ ln(1-σ²)/(2s+1) - σ/(2s+1) I ],  I = ∫ x^{2s+1}/(1+σx) dx.
    let m = 2 * s + 1;
    let log_term = 0.5 * (-(sigma * sigma)).ln_1p();
    let amplification = sigma.powi(-(m as i32));
    if amplification < 1e6 {
        // Forward recursion I_{k+1} = (∫x^k - I_k) / σ; error grows like σ^{-k}.
        let mut ik = ((1.0 + sigma) / (1.0 - sigma)).ln() / sigma;
        for k in 0..m {
            let moment = if k % 2 == 0 { 2.0 / f64::from(k + 1) } else { 0.0 };
            ik = (moment - ik) / sigma;
        }
        log_term - 0.5 * sigma * ik
    } else {
        // Series: Σ_j σ^{2j+2} / (2s+2j+3), all terms positive.
        let q = sigma * sigma;
        let mut power = q;
        let mut sum = 0.0;
        let mut j = 0u64;
        loop {
            let term = power / (f64::from(2 * s + 3) + 2.0 * j as f64);
            sum += term;
            if term * q / (1.0 - q) < 1e-17 * sum.max(1e-300) {
                break;
            }
            power *= q;
            j += 1;
        }
        log_term + sum
    }
}

/// Antiderivative of `ln(1 + sigma x)` times `sigma`, up to a constant:
/// `(1+t) ln(1+t) - t` with `t = sigma x`.
fn log_antiderivative(sigma: f64, x: f64) -> f64 {
    let t = sigma * x;
    if t.abs() < 1e-3 {
        // Σ_{k>=2} (-1)^k t^k / (k(k-1))
        let mut sum = 0.0;
        let mut power = t * t;
        for k in 2..12 {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            sum += sign * power / f64::from(k * (k - 1));
            power *= t;
        }
        sum
    } else {
        (1.0 + t) * t.ln_1p() - t
    }
}

/// Antiderivative of `|y|^{-alpha}` for `alpha < 1`, continuous through 0.
fn signed_power_antiderivative(y: f64, alpha: f64) -> f64 {
    y.signum() * y.abs().powf(1.0 - alpha) / (1.0 - alpha)
}

/// `∫_{t0}^{t1} g(t) t^{-alpha} dt` via `t = w^{1/(1-alpha)}`, which removes
/// the singularity at `t = 0`.
fn singular_integral<G: Fn(f64) -> f64>(g: G, t0: f64, t1: f64, alpha: f64) -> f64 {
    let p = 1.0 / (1.0 - alpha);
    let w0 = t0.powf(1.0 - alpha);
    let w1 = t1.powf(1.0 - alpha);
    p * quadrature::integrate(|w: f64| g(w.powf(p)), w0, w1, QUAD_TOL)
}

fn poly_inverse_power(s: u32, f: f64, sigma: f64, alpha: f64) -> f64 {
    let c = f64::from(2 * s + 1) / 2.0;
    let weight = move |x: f64| c * x.powi(2 * s as i32);
    let x0 = -f / sigma;
    let raw = if x0 > -1.0 && x0 < 1.0 {
        let right = singular_integral(|t| weight(x0 + t), 0.0, 1.0 - x0, alpha);
        let left = singular_integral(|t| weight(x0 - t), 0.0, x0 + 1.0, alpha);
        right + left
    } else if x0 <= -1.0 {
        singular_integral(|t| weight(x0 + t), -1.0 - x0, 1.0 - x0, alpha)
    } else {
        singular_integral(|t| weight(x0 - t), x0 - 1.0, x0 + 1.0, alpha)
    };
    raw * sigma.powf(-alpha)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn density_examples() {
        let uniform = NoiseSpec::PolynomialSymmetric { s: 0 };
        assert_eq!(uniform.density(0.3), 0.5);
        assert_eq!(NoiseSpec::PolynomialSymmetric { s: 1 }.density(1.0), 1.5);
        let bern = NoiseSpec::DiscreteUniform { l: 1 };
        assert_eq!(bern.density(1.0), 0.5);
        assert_eq!(bern.density(0.5), 0.0);
        assert_eq!(uniform.density(1.5), 0.0);
    }

    #[test]
    fn piecewise_density_value_and_windows() {
        let spec = NoiseSpec::PiecewiseUniform { l: 2, delta: 0.1 };
        // 1 / (2 δ (2l-1)) = 1 / 0.6
        assert!(close(spec.density(-1.0 / 3.0), 1.0 / 0.6, 1e-15));
        assert_eq!(spec.density(0.0), 0.0);
        let w = NoiseSpec::windows(2, 0.1);
        assert_eq!(w.len(), 4);
        let mass: f64 = w.iter().map(|w| w.mass).sum();
        assert!(close(mass, 1.0, 1e-15));
        for pair in w.windows(2) {
            assert!(pair[0].hi < pair[1].lo);
        }
    }

    #[test]
    fn sample_examples() {
        for s in 0..5 {
            assert_eq!(NoiseSpec::PolynomialSymmetric { s }.sample(0.5), 0.0);
        }
        let x = NoiseSpec::PolynomialSymmetric { s: 1 }.sample(0.75);
        assert!(close(x, 0.5f64.powf(1.0 / 3.0), 1e-15));
        // brute-force oracle: the tabulated CDF crosses 0.75 at the same point
        let cdf = |x: f64| (x.powi(3) + 1.0) / 2.0;
        let grid_root = (0..=200_000)
            .map(|i| -1.0 + 2.0 * i as f64 / 200_000.0)
            .find(|&x| cdf(x) >= 0.75)
            .unwrap();
        assert!(close(grid_root, 0.7937, 1e-4));
        let bern = NoiseSpec::DiscreteUniform { l: 1 };
        assert_eq!(bern.sample(0.25), -1.0);
        assert_eq!(bern.sample(0.75), 1.0);
    }

    #[test]
    fn piecewise_sample_stays_in_windows() {
        let spec = NoiseSpec::PiecewiseUniform { l: 3, delta: 0.05 };
        for i in 0..1000 {
            let u = i as f64 / 1000.0;
            let x = spec.sample(u);
            assert!(spec.density(x) > 0.0, "u={u} x={x}");
        }
    }

    #[test]
    fn eta_s3_matches_closed_form() {
        let eta = NoiseSpec::PolynomialSymmetric { s: 3 }.log_gain_eta(1.0).unwrap();
        let expected = 1.0 + 1.0 / 3.0 + 1.0 / 5.0 + 1.0 / 7.0 - std::f64::consts::LN_2;
        assert!(close(eta, expected, 1e-15));
        assert!(close(eta, 0.983, 5e-4));
    }

    #[test]
    fn eta_bernoulli() {
        let eta = NoiseSpec::DiscreteUniform { l: 1 }.log_gain_eta(0.865).unwrap();
        let expected = -0.5 * (1.0 - 0.865f64 * 0.865).ln();
        assert!(close(eta, expected, 1e-15));
        assert!(close(eta, 0.6896, 1e-4));
    }

    #[test]
    fn eta_vanishes_for_small_sigma() {
        let specs = [
            NoiseSpec::PolynomialSymmetric { s: 0 },
            NoiseSpec::PolynomialSymmetric { s: 4 },
            NoiseSpec::DiscreteUniform { l: 3 },
            NoiseSpec::PiecewiseUniform { l: 2, delta: 0.1 },
        ];
        for spec in specs {
            let eta = spec.log_gain_eta(1e-6).unwrap();
            assert!(eta.abs() < 1e-11, "{spec:?}: {eta}");
            assert!(eta >= 0.0);
        }
    }

    #[test]
    fn eta_poly_agrees_with_quadrature() {
        for s in [0u32, 1, 2, 5, 10] {
            for sigma in [0.1, 0.5, 0.89, 0.9, 0.95, 0.999, 1.0] {
                let spec = NoiseSpec::PolynomialSymmetric { s };
                let c = f64::from(2 * s + 1) / 2.0;
                let oracle = -quadrature::integrate(
                    |x: f64| {
                        let v = 1.0 + sigma * x;
                        if v <= 0.0 {
                            0.0
                        } else {
                            c * x.powi(2 * s as i32) * v.ln()
                        }
                    },
                    -1.0,
                    1.0,
                    1e-12,
                );
                let eta = spec.log_gain_eta(sigma).unwrap();
                assert!(close(eta, oracle, 1e-7), "s={s} σ={sigma}: {eta} vs {oracle}");
            }
        }
    }

    #[test]
    fn eta_uniform_elementary_form() {
        // E ln(1+σU) = ((1+σ)ln(1+σ) - (1-σ)ln(1-σ))/(2σ) - 1
        for sigma in [0.2, 0.6, 0.97] {
            let direct: f64 = ((1.0 + sigma) * (1.0f64 + sigma).ln()
                - (1.0 - sigma) * (1.0f64 - sigma).ln())
                / (2.0 * sigma)
                - 1.0;
            let eta = NoiseSpec::PolynomialSymmetric { s: 0 }.log_gain_eta(sigma).unwrap();
            assert!(close(eta, -direct, 1e-12));
        }
    }

    #[test]
    fn eta_piecewise_agrees_with_quadrature() {
        let spec = NoiseSpec::PiecewiseUniform { l: 2, delta: 0.02 };
        let sigma = 0.7;
        let oracle: f64 = NoiseSpec::windows(2, 0.02)
            .iter()
            .map(|w| {
                let dens = w.mass / (w.hi - w.lo);
                -dens * quadrature::integrate(|x| (1.0 + sigma * x).ln(), w.lo, w.hi, 1e-14)
            })
            .sum();
        assert!(close(spec.log_gain_eta(sigma).unwrap(), oracle, 1e-12));
    }

    #[test]
    fn eta_domain_errors() {
        assert!(NoiseSpec::DiscreteUniform { l: 1 }.log_gain_eta(1.0).is_err());
        assert!(NoiseSpec::PiecewiseUniform { l: 1, delta: 0.1 }.log_gain_eta(1.0).is_err());
        assert!(NoiseSpec::PolynomialSymmetric { s: 1 }.log_gain_eta(1.2).is_err());
        assert!(NoiseSpec::PolynomialSymmetric { s: 1 }.log_gain_eta(0.0).is_err());
        assert!(NoiseSpec::PiecewiseUniform { l: 2, delta: 0.5 }.log_gain_eta(0.5).is_err());
    }

    #[test]
    fn eta_poly_monotone_in_s() {
        let mut prev = f64::NEG_INFINITY;
        for s in 0..20 {
            let eta = NoiseSpec::PolynomialSymmetric { s }.log_gain_eta(1.0).unwrap();
            assert!(eta > prev);
            prev = eta;
        }
    }

    #[test]
    fn eta_discrete_diverges_near_one() {
        for l in 1..5 {
            let spec = NoiseSpec::DiscreteUniform { l };
            let a = spec.log_gain_eta(0.9).unwrap();
            let b = spec.log_gain_eta(0.99).unwrap();
            let c = spec.log_gain_eta(0.999).unwrap();
            assert!(c > b && b > a);
        }
    }

    #[test]
    fn inverse_power_uniform_singular() {
        let v = NoiseSpec::PolynomialSymmetric { s: 0 }
            .inverse_power_expectation(0.0, 1.0, 0.5)
            .unwrap();
        // (1/2) ∫ |v|^{-1/2} dv = 2
        assert!(close(v, 2.0, 1e-14));
    }

    #[test]
    fn inverse_power_uniform_matches_closed_form() {
        for (f, sigma, alpha) in [(0.3, 1.0, 0.5), (1.2, 3.0, 0.1), (0.0, 2.0, 0.9)] {
            let q: f64 = f / sigma;
            let closed = sigma.powf(1.0 - alpha) / (2.0 * sigma * (1.0 - alpha))
                * ((1.0 + q).powf(1.0 - alpha) + (1.0 - q).powf(1.0 - alpha));
            let v = NoiseSpec::PolynomialSymmetric { s: 0 }
                .inverse_power_expectation(f, sigma, alpha)
                .unwrap();
            assert!(close(v, closed, 1e-13), "{v} vs {closed}");
        }
    }

    #[test]
    fn inverse_power_bernoulli_pairing_identity() {
        let bern = NoiseSpec::DiscreteUniform { l: 1 };
        for (f, sigma) in [(0.5, 1.0), (1.0, 2.0), (2.5, 3.1)] {
            let v = bern.inverse_power_expectation(f, sigma, 1.0).unwrap();
            assert!(close(v, sigma / (sigma * sigma - f * f), 1e-14));
        }
        assert!(close(bern.inverse_power_expectation(0.0, 2.0, 1.0).unwrap(), 0.5, 1e-15));
        assert!(bern.inverse_power_expectation(1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn inverse_power_poly_agrees_with_monte_carlo_free_oracle() {
        // Oracle: brute-force midpoint rule on a fine grid, away from the singularity.
        for (s, f, sigma, alpha) in [(1u32, 0.4, 1.5, 0.3), (2, 0.0, 2.0, 0.5), (3, 2.0, 1.0, 0.2)] {
            let spec = NoiseSpec::PolynomialSymmetric { s };
            let n = 2_000_000;
            let h = 2.0 / n as f64;
            let c = f64::from(2 * s + 1) / 2.0;
            let mut sum = 0.0;
            for i in 0..n {
                let x = -1.0 + (i as f64 + 0.5) * h;
                sum += c * x.powi(2 * s as i32) * (f + sigma * x).abs().powf(-alpha) * h;
            }
            let v = spec.inverse_power_expectation(f, sigma, alpha).unwrap();
            assert!(close(v, sum, 2e-3 * sum), "s={s}: {v} vs {sum}");
        }
    }

    #[test]
    fn inverse_power_piecewise_small_delta_approaches_atoms() {
        let f = 0.4;
        let sigma = 3.0;
        // window masses are not uniform for l > 1, so weight each center by its mass
        let delta = 1e-5;
        let oracle: f64 = NoiseSpec::windows(2, delta)
            .iter()
            .zip(NoiseSpec::atoms(2))
            .map(|(w, a)| w.mass / (f + sigma * a).abs())
            .sum();
        let windows = NoiseSpec::PiecewiseUniform { l: 2, delta }
            .inverse_power_expectation(f, sigma, 1.0)
            .unwrap();
        assert!(close(oracle, windows, 1e-3));
        // for l = 1 both half windows carry mass 1/2, matching Bernoulli noise
        let atoms = NoiseSpec::DiscreteUniform { l: 1 }
            .inverse_power_expectation(f, sigma, 1.0)
            .unwrap();
        let windows = NoiseSpec::PiecewiseUniform { l: 1, delta }
            .inverse_power_expectation(f, sigma, 1.0)
            .unwrap();
        assert!(close(atoms, windows, 1e-3));
    }

    #[test]
    fn inverse_power_rejects_unit_alpha_for_continuous() {
        let spec = NoiseSpec::PolynomialSymmetric { s: 2 };
        assert!(spec.inverse_power_expectation(0.5, 2.0, 1.0).is_err());
        assert!(spec.inverse_power_expectation(0.5, 2.0, 0.0).is_err());
    }

    #[test]
    fn threshold_examples() {
        match stabilization_threshold(NoiseFamily::DiscreteUniform { l: 1 }, 2.0).unwrap() {
            StabilizingChoice::SigmaFloor { sigma } => assert!(close(sigma, 0.75f64.sqrt(), 1e-15)),
            other => panic!("{other:?}"),
        }
        let h = 0.983f64.exp();
        assert_eq!(
            stabilization_threshold(NoiseFamily::PolynomialSymmetric, h).unwrap(),
            StabilizingChoice::MinimalS { s: 3 }
        );
        match stabilization_threshold(NoiseFamily::DiscreteUniform { l: 3 }, 1.0 + 1e-9).unwrap() {
            StabilizingChoice::SigmaFloor { sigma } => assert!(sigma < 1e-3),
            other => panic!("{other:?}"),
        }
        assert!(stabilization_threshold(NoiseFamily::PolynomialSymmetric, 1.0).is_err());
    }

    #[test]
    fn threshold_discrete_floor_is_sufficient() {
        for l in 1..5 {
            for h in [1.5, 2.0, 5.0] {
                let sigma = match stabilization_threshold(NoiseFamily::DiscreteUniform { l }, h).unwrap() {
                    StabilizingChoice::SigmaFloor { sigma } => sigma,
                    other => panic!("{other:?}"),
                };
                let above = 0.5 * (sigma + 1.0);
                let eta = NoiseSpec::DiscreteUniform { l }.log_gain_eta(above).unwrap();
                assert!(eta > h.ln());
            }
        }
    }

    #[test]
    fn threshold_piecewise_pair_stabilizes() {
        for l in [1, 2, 4] {
            let h = 3.0;
            match stabilization_threshold(NoiseFamily::PiecewiseUniform { l }, h).unwrap() {
                StabilizingChoice::SigmaDelta { sigma, delta } => {
                    let spec = NoiseSpec::PiecewiseUniform { l, delta };
                    assert!(spec.log_gain_eta(sigma).unwrap() > h.ln());
                    assert!(sigma < 1.0);
                }
                other => panic!("{other:?}"),
            }
        }
    }
}
