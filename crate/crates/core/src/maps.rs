//! Catalog of per-capita growth maps `f`, the full maps `F(x) = x f(x)`, and
//! the shift `z = x - K` that moves a positive equilibrium to zero.
//!
//! Every catalog `f` is extended to negative arguments by its formula.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Inside this radius around `u = 0` a shifted map returns its limit value
/// `K f'(K) + 1` instead of the difference quotient.
pub const SINGULARITY_GUARD: f64 = 1e-6;

/// Tolerance on `|f(K) - 1|` for `K` to count as an equilibrium.
pub const EQUILIBRIUM_TOL: f64 = 1e-9;

const BOUND_GRID: usize = 100_000;
const ROOT_GRID: usize = 10_000;
const ROOT_TOL: f64 = 1e-10;
const DIFF_STEP: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MapSpec {
    /// `f(x) = e^{r(1-x)}`.
    Ricker { r: f64 },
    /// `f(x) = r(1-x)`.
    Logistic { r: f64 },
    /// `f(x) = 3 / (2 + (x-3)^2)`, fixed points 2 and 4.
    ModifiedBevertonHolt,
    /// Two-branch map with fixed points 0, 1, 3, 5, 7:
    /// `F(x) = 8.25x / (7.25 + (x-2)^2)` for `x < 3`,
    /// `F(x) = 3(x-3) / (2 + (x-6)^2) + 3` for `x >= 3`.
    PiecewiseBh,
    /// Constant per-capita rate `f(x) = a`.
    Linear { a: f64 },
    /// The map governing `u = x - K`:
    /// `f(u) = ((u+K) f(u+K) - K) / u`, with `K f'(K) + 1` at `u = 0`.
    Shifted { base: Box<MapSpec>, k: f64 },
}

/// A root of `F(x) - x` with the slope of `F` there.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FixedPoint {
    pub x: f64,
    pub slope: f64,
    pub stable: bool,
}

/// Bounds of `|rm f|` for a shifted map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShiftedBound {
    /// Grid supremum of `|rm f(u)|` over the shifted working interval.
    pub numeric_sup: f64,
    /// `max{ sup_{|u|<=1} |rm f(u)|, H + K(H+1) }`, the coarse estimate.
    pub formula_bound: f64,
    /// The `|u| <= 1` part of `formula_bound`.
    pub local_sup: f64,
    /// `max{1, sup |f(x)|}` over the part of the interval with `|x - K| > 1`.
    pub far_h: f64,
}

impl MapSpec {
    pub fn shifted(base: MapSpec, k: f64) -> Result<MapSpec> {
        base.require_equilibrium(k)?;
        Ok(MapSpec::Shifted { base: Box::new(base), k })
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            MapSpec::Ricker { r } | MapSpec::Logistic { r } => {
                if !(*r > 0.0) || !r.is_finite() {
                    return Err(Error::domain(format!("growth rate r must be positive, got {r}")));
                }
                Ok(())
            }
            MapSpec::Linear { a } => {
                if !a.is_finite() {
                    return Err(Error::domain("linear map needs a finite rate"));
                }
                Ok(())
            }
            MapSpec::ModifiedBevertonHolt | MapSpec::PiecewiseBh => Ok(()),
            MapSpec::Shifted { base, k } => {
                base.validate()?;
                base.require_equilibrium(*k)
            }
        }
    }

    /// Errors unless `f(k) = 1` within [`EQUILIBRIUM_TOL`].
    pub fn require_equilibrium(&self, k: f64) -> Result<()> {
        let f_k = self.f(k);
        if !k.is_finite() || (f_k - 1.0).abs() > EQUILIBRIUM_TOL {
            return Err(Error::NotEquilibrium { k, f_k });
        }
        Ok(())
    }

    /// Per-capita rate `f(x)`.
    pub fn f(&self, x: f64) -> f64 {
        match self {
            MapSpec::Ricker { r } => (r * (1.0 - x)).exp(),
            MapSpec::Logistic { r } => r * (1.0 - x),
            MapSpec::ModifiedBevertonHolt => 3.0 / (2.0 + (x - 3.0).powi(2)),
            MapSpec::PiecewiseBh => {
                if x < 3.0 {
                    8.25 / (7.25 + (x - 2.0).powi(2))
                } else {
                    (3.0 * (x - 3.0) / (2.0 + (x - 6.0).powi(2)) + 3.0) / x
                }
            }
            MapSpec::Linear { a } => *a,
            MapSpec::Shifted { base, k } => {
                if x.abs() < SINGULARITY_GUARD {
                    k * base.derivative(*k) + 1.0
                } else {
                    let x_orig = x + k;
                    (x_orig * base.f(x_orig) - k) / x
                }
            }
        }
    }

    /// Full map `F(x) = x f(x)`.
    pub fn full(&self, x: f64) -> f64 {
        match self {
            MapSpec::PiecewiseBh => {
                if x < 3.0 {
                    8.25 * x / (7.25 + (x - 2.0).powi(2))
                } else {
                    3.0 * (x - 3.0) / (2.0 + (x - 6.0).powi(2)) + 3.0
                }
            }
            _ => x * self.f(x),
        }
    }

    /// `(f(x), F(x))`.
    pub fn eval(&self, x: f64) -> (f64, f64) {
        (self.f(x), self.full(x))
    }

    /// `f'(x)`; analytic for catalog maps, central difference for shifted ones.
    pub fn derivative(&self, x: f64) -> f64 {
        match self {
            MapSpec::Ricker { r } => -r * (r * (1.0 - x)).exp(),
            MapSpec::Logistic { r } => -r,
            MapSpec::ModifiedBevertonHolt => {
                let d = 2.0 + (x - 3.0).powi(2);
                -6.0 * (x - 3.0) / (d * d)
            }
            MapSpec::PiecewiseBh => {
                if x < 3.0 {
                    let d = 7.25 + (x - 2.0).powi(2);
                    -16.5 * (x - 2.0) / (d * d)
                } else {
                    let d = 2.0 + (x - 6.0).powi(2);
                    let full_slope = 3.0 * (d - 2.0 * (x - 3.0) * (x - 6.0)) / (d * d);
                    (full_slope * x - self.full(x)) / (x * x)
                }
            }
            MapSpec::Linear { .. } => 0.0,
            MapSpec::Shifted { .. } => {
                let h = 1e-5;
                (self.f(x + h) - self.f(x - h)) / (2.0 * h)
            }
        }
    }

    /// Slope of `F` by central difference with step `1e-6`.
    pub fn full_slope(&self, x: f64) -> f64 {
        (self.full(x + DIFF_STEP) - self.full(x - DIFF_STEP)) / (2.0 * DIFF_STEP)
    }

    /// Default working interval: `[0, 1]` for the logistic map, `[0, 10]`
    /// otherwise; shifted maps use the base interval minus `K`.
    pub fn default_interval(&self) -> (f64, f64) {
        match self {
            MapSpec::Logistic { .. } => (0.0, 1.0),
            MapSpec::Shifted { base, k } => {
                let (lo, hi) = base.default_interval();
                (lo - k, hi - k)
            }
            _ => (0.0, 10.0),
        }
    }

    /// `sup |f|` over `[lo, hi]`.
    ///
    /// Dense grid of `10^5` points plus a golden-section refinement around
    /// the grid argmax. An infinite `hi` is accepted for the Ricker map only,
    /// where `f` is decreasing and the bound is `e^{r(1-lo)}`.
    pub fn bound_h(&self, lo: f64, hi: f64) -> Result<f64> {
        if lo.is_nan() || hi.is_nan() || lo > hi {
            return Err(Error::domain(format!("bad interval [{lo}, {hi}]")));
        }
        if lo == hi {
            return Ok(self.f(lo).abs());
        }
        if !hi.is_finite() || !lo.is_finite() {
            return match self {
                MapSpec::Ricker { r } if lo.is_finite() => Ok((r * (1.0 - lo)).exp()),
                _ => Err(Error::domain(format!(
                    "bound on an unbounded interval is only available for the Ricker map, got {self:?}"
                ))),
            };
        }
        Ok(grid_sup(|x| self.f(x).abs(), lo, hi, BOUND_GRID))
    }

    /// Bounds of the shifted map about `K` over the default working interval.
    pub fn shifted_bound(&self, k: f64) -> Result<ShiftedBound> {
        let (lo, hi) = self.default_interval();
        self.shifted_bound_on(k, lo, hi)
    }

    /// Bounds of the shifted map about `K` for `x` in `[lo, hi]`.
    pub fn shifted_bound_on(&self, k: f64, lo: f64, hi: f64) -> Result<ShiftedBound> {
        self.require_equilibrium(k)?;
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::domain(format!("bad interval [{lo}, {hi}]")));
        }
        let shifted = MapSpec::Shifted { base: Box::new(self.clone()), k };
        let numeric_sup = shifted.bound_h(lo - k, hi - k)?;

        let near_lo = (lo - k).max(-1.0);
        let near_hi = (hi - k).min(1.0);
        let local_sup = if near_lo <= near_hi {
            shifted.bound_h(near_lo, near_hi)?
        } else {
            0.0
        };

        let mut far = 0.0_f64;
        if lo < k - 1.0 {
            far = far.max(self.bound_h(lo, k - 1.0)?);
        }
        if hi > k + 1.0 {
            far = far.max(self.bound_h(k + 1.0, hi)?);
        }
        let far_h = far.max(1.0);
        let formula_bound = local_sup.max(far_h + k * (far_h + 1.0));
        Ok(ShiftedBound { numeric_sup, formula_bound, local_sup, far_h })
    }

    /// Roots of `F(x) - x` on `[lo, hi]`, each labeled stable when `|F'| < 1`.
    pub fn fixed_points(&self, lo: f64, hi: f64) -> Vec<FixedPoint> {
        let g = |x: f64| self.full(x) - x;
        let mut roots: Vec<f64> = Vec::new();
        let step = (hi - lo) / ROOT_GRID as f64;
        let mut x_prev = lo;
        let mut g_prev = g(lo);
        if g_prev == 0.0 {
            roots.push(lo);
        }
        for i in 1..=ROOT_GRID {
            let x = if i == ROOT_GRID { hi } else { lo + step * i as f64 };
            let gx = g(x);
            if gx == 0.0 {
                roots.push(x);
            } else if g_prev != 0.0 && (g_prev < 0.0) != (gx < 0.0) {
                roots.push(bisect(&g, x_prev, x));
            }
            x_prev = x;
            g_prev = gx;
        }
        roots.dedup_by(|a, b| (*a - *b).abs() < 1e-8);
        roots
            .into_iter()
            .map(|x| {
                let slope = self.full_slope(x);
                FixedPoint { x, slope, stable: slope.abs() < 1.0 }
            })
            .collect()
    }
}

fn bisect<G: Fn(f64) -> f64>(g: &G, mut a: f64, mut b: f64) -> f64 {
    let mut ga = g(a);
    while b - a > ROOT_TOL {
        let m = 0.5 * (a + b);
        let gm = g(m);
        if gm == 0.0 {
            return m;
        }
        if (gm < 0.0) == (ga < 0.0) {
            a = m;
            ga = gm;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// Supremum of `h` over `[lo, hi]`: grid scan, then golden-section search
/// on the two cells around the best grid point.
pub(crate) fn grid_sup<H: Fn(f64) -> f64>(h: H, lo: f64, hi: f64, n: usize) -> f64 {
    let step = (hi - lo) / n as f64;
    let mut best = f64::NEG_INFINITY;
    let mut best_i = 0;
    for i in 0..=n {
        let x = if i == n { hi } else { lo + step * i as f64 };
        let v = h(x);
        if v > best {
            best = v;
            best_i = i;
        }
    }
    let a = (lo + step * best_i.saturating_sub(1) as f64).max(lo);
    let b = (lo + step * (best_i + 1) as f64).min(hi);
    best.max(golden_max(&h, a, b, 1e-9))
}

fn golden_max<H: Fn(f64) -> f64>(h: &H, mut a: f64, mut b: f64, tol: f64) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut hc = h(c);
    let mut hd = h(d);
    while b - a > tol {
        if hc > hd {
            b = d;
            d = c;
            hd = hc;
            c = b - INV_PHI * (b - a);
            hc = h(c);
        } else {
            a = c;
            c = d;
            hc = hd;
            d = a + INV_PHI * (b - a);
            hd = h(d);
        }
    }
    hc.max(hd)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eval_examples() {
        assert_eq!(MapSpec::Ricker { r: 2.0 }.eval(1.0), (1.0, 1.0));
        let (_, big_f) = MapSpec::ModifiedBevertonHolt.eval(4.0);
        assert!((big_f - 4.0).abs() < 1e-15);
        let (_, big_f) = MapSpec::PiecewiseBh.eval(3.0);
        assert_eq!(big_f, 3.0);
    }

    #[test]
    fn full_is_x_times_f() {
        let maps = [
            MapSpec::Ricker { r: 2.3 },
            MapSpec::Logistic { r: 3.2 },
            MapSpec::ModifiedBevertonHolt,
            MapSpec::PiecewiseBh,
            MapSpec::Linear { a: 0.7 },
        ];
        for map in &maps {
            for i in 0..200 {
                let x = -1.0 + 0.07 * i as f64;
                let (f, big_f) = map.eval(x);
                assert!((big_f - x * f).abs() <= 1e-13 * (1.0 + big_f.abs()), "{map:?} x={x}");
            }
        }
    }

    #[test]
    fn piecewise_bh_branches_agree_at_three() {
        let left = 8.25 * 3.0 / (7.25 + 1.0);
        assert_eq!(left, 3.0);
        let m = MapSpec::PiecewiseBh;
        assert!((m.full(3.0 - 1e-12) - 3.0).abs() < 1e-10);
        assert!((m.derivative(3.0 - 1e-9) - m.derivative(3.0)).abs() < 1e-6);
    }

    #[test]
    fn analytic_derivatives_match_differences() {
        let maps = [
            MapSpec::Ricker { r: 1.7 },
            MapSpec::Logistic { r: 3.0 },
            MapSpec::ModifiedBevertonHolt,
            MapSpec::PiecewiseBh,
        ];
        for map in &maps {
            for x in [0.3, 1.1, 2.7, 3.5, 6.2] {
                let h = 1e-6;
                let fd = (map.f(x + h) - map.f(x - h)) / (2.0 * h);
                assert!((fd - map.derivative(x)).abs() < 1e-6, "{map:?} x={x}");
            }
        }
    }

    #[test]
    fn bound_h_examples() {
        let e = std::f64::consts::E;
        let h = MapSpec::Ricker { r: 1.0 }.bound_h(0.0, 10.0).unwrap();
        assert!((h - e).abs() < 1e-12);
        let h = MapSpec::Ricker { r: 1.0 }.bound_h(0.0, f64::INFINITY).unwrap();
        assert_eq!(h, e);
        // grid oracle: max of 2(1-x) on a coarse grid of [0, 1]
        let oracle = (0..=100)
            .map(|i| (2.0 * (1.0 - i as f64 / 100.0)).abs())
            .fold(0.0, f64::max);
        let h = MapSpec::Logistic { r: 2.0 }.bound_h(0.0, 1.0).unwrap();
        assert_eq!(h, oracle);
        assert_eq!(h, 2.0);
        let m = MapSpec::ModifiedBevertonHolt;
        assert_eq!(m.bound_h(2.5, 2.5).unwrap(), m.f(2.5).abs());
        assert!(MapSpec::Logistic { r: 2.0 }.bound_h(0.0, f64::INFINITY).is_err());
    }

    #[test]
    fn bound_h_refines_interior_maximum() {
        // |f| for the modified Beverton-Holt map peaks at x = 3 with value 1.5.
        let h = MapSpec::ModifiedBevertonHolt.bound_h(0.0, 10.0).unwrap();
        assert!((h - 1.5).abs() < 1e-12);
        let h = MapSpec::ModifiedBevertonHolt.bound_h(0.123_456_7, 5.987_654_3).unwrap();
        assert!((h - 1.5).abs() < 1e-12);
    }

    #[test]
    fn shifted_bound_ricker_examples() {
        let b = MapSpec::Ricker { r: 1.0 }.shifted_bound(1.0).unwrap();
        assert!((b.numeric_sup - 1.0).abs() < 1e-3, "{b:?}");
        assert_eq!(b.formula_bound, 3.0);
        let b = MapSpec::Ricker { r: 3.0 }.shifted_bound(1.0).unwrap();
        assert!((b.numeric_sup - 2.4925).abs() < 5e-4, "{b:?}");
        assert_eq!(b.formula_bound, 3.0);
    }

    #[test]
    fn shifted_bound_logistic_value_at_zero() {
        let r = 3.0;
        let k = 1.0 - 1.0 / r;
        let map = MapSpec::Logistic { r };
        let b = map.shifted_bound(k).unwrap();
        // f'(K) = -r, so |rm f(0)| = |K(-r) + 1| = 1
        let at_zero = (k * -r + 1.0_f64).abs();
        assert!((at_zero - 1.0).abs() < 1e-12);
        assert!(b.numeric_sup >= at_zero);
        // rm f(u) = 2 - r - r u is linear, so the oracle is the endpoint maximum
        let oracle = [(-k), 0.0, 1.0 - k]
            .iter()
            .map(|u| (2.0 - r - r * u).abs())
            .fold(0.0, f64::max);
        assert!((b.numeric_sup - oracle).abs() < 1e-9);
    }

    #[test]
    fn shifted_bound_rejects_non_equilibrium() {
        let err = MapSpec::Ricker { r: 2.0 }.shifted_bound(1.5).unwrap_err();
        assert!(matches!(err, Error::NotEquilibrium { .. }));
    }

    #[test]
    fn shifted_continuity_at_zero() {
        for map in [MapSpec::Ricker { r: 2.2 }, MapSpec::ModifiedBevertonHolt] {
            let k = if matches!(map, MapSpec::ModifiedBevertonHolt) { 4.0 } else { 1.0 };
            let s = MapSpec::shifted(map.clone(), k).unwrap();
            let limit = k * map.derivative(k) + 1.0;
            assert_eq!(s.f(0.0), limit);
            assert_eq!(s.full(0.0), 0.0);
            for u in [1e-4, -1e-4, 1e-6, -1e-6] {
                assert!((s.f(u) - limit).abs() < 1e-2, "u={u}");
            }
        }
    }

    #[test]
    fn formula_bound_dominates_numeric_sup() {
        let cases = [
            (MapSpec::Ricker { r: 0.5 }, 1.0),
            (MapSpec::Ricker { r: 2.5 }, 1.0),
            (MapSpec::Ricker { r: 3.5 }, 1.0),
            (MapSpec::Logistic { r: 3.3 }, 1.0 - 1.0 / 3.3),
            (MapSpec::ModifiedBevertonHolt, 2.0),
            (MapSpec::ModifiedBevertonHolt, 4.0),
            (MapSpec::PiecewiseBh, 3.0),
            (MapSpec::PiecewiseBh, 5.0),
        ];
        for (map, k) in cases {
            let b = map.shifted_bound(k).unwrap();
            assert!(b.formula_bound >= b.numeric_sup, "{map:?} K={k}: {b:?}");
        }
    }

    #[test]
    fn fixed_points_modified_bh() {
        let fps = MapSpec::ModifiedBevertonHolt.fixed_points(0.5, 10.0);
        assert_eq!(fps.len(), 2);
        assert!((fps[0].x - 2.0).abs() < 1e-9);
        assert!((fps[1].x - 4.0).abs() < 1e-9);
        assert!((fps[1].slope + 5.0 / 3.0).abs() < 1e-6);
        assert!(!fps[1].stable);
    }

    #[test]
    fn fixed_points_piecewise_bh() {
        let fps = MapSpec::PiecewiseBh.fixed_points(-0.5, 10.0);
        let xs: Vec<f64> = fps.iter().map(|p| p.x).collect();
        assert_eq!(xs.len(), 5, "{xs:?}");
        for (x, want) in xs.iter().zip([0.0, 1.0, 3.0, 5.0, 7.0]) {
            assert!((x - want).abs() < 1e-9, "{xs:?}");
        }
        let stable: Vec<f64> = fps.iter().filter(|p| p.stable).map(|p| p.x.round()).collect();
        assert_eq!(stable, vec![0.0, 3.0]);
    }

    #[test]
    fn fixed_points_ricker() {
        let fps = MapSpec::Ricker { r: 1.3 }.fixed_points(0.5, 2.0);
        assert_eq!(fps.len(), 1);
        assert!((fps[0].x - 1.0).abs() < 1e-9);
    }
}
