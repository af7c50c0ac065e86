//! The acceptance checks, shared by `noisectl verify` and the test suite.

use std::time::{Duration, Instant};

use serde::Serialize;

use crate::analysis::empirical_eta;
use crate::config::ExperimentConfig;
use crate::control::{argmax, check_destabilize, check_stabilize_k, check_stabilize_zero, check_trap, SigmaProfile};
use crate::control::ControlScheme;
use crate::distributions::NoiseSpec;
use crate::engine::{Classifier, Trap};
use crate::error::Result;
use crate::figures::{panels, FRACTION_TOL, MBH_TRAP_D};
use crate::maps::MapSpec;
use crate::output::summary_bytes;

#[derive(Debug, Clone, Serialize)]
pub struct CriterionOutcome {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed_s: f64,
    pub limit_s: Option<f64>,
}

impl CriterionOutcome {
    pub fn line(&self) -> String {
        let limit = self.limit_s.map_or(String::new(), |l| format!(" (limit {l:.0} s)"));
        format!(
            "AC{:<2} {} {:<34} {:.2} s{} | {}",
            self.id,
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.elapsed_s,
            limit,
            self.detail
        )
    }
}

fn timed(
    id: u8,
    name: &'static str,
    limit_s: Option<f64>,
    body: impl FnOnce() -> Result<(bool, String)>,
) -> CriterionOutcome {
    let start = Instant::now();
    let (ok, detail) = body().unwrap_or_else(|e| (false, format!("error: {e}")));
    let elapsed = start.elapsed().as_secs_f64();
    let in_time = limit_s.is_none_or(|l| elapsed < l);
    let detail = if in_time { detail } else { format!("{detail}; over time limit") };
    CriterionOutcome { id, name, passed: ok && in_time, detail, elapsed_s: elapsed, limit_s }
}

fn near(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

/// Closed-form and Monte Carlo `eta` for `s = 3`, `σ = 1`.
pub fn ac1() -> CriterionOutcome {
    timed(1, "eta closed form s=3", Some(1.0), || {
        let spec = NoiseSpec::PolynomialSymmetric { s: 3 };
        let eta = spec.log_gain_eta(1.0)?;
        let oracle = 1.0 + 1.0 / 3.0 + 1.0 / 5.0 + 1.0 / 7.0 - 2f64.ln();
        let (mc, se) = empirical_eta(&spec, 1.0, 1_000_000, 1)?;
        let ok = near(eta, oracle, 1e-12) && near((eta * 1e3).round() / 1e3, 0.983, 1e-12) && near(mc, eta, 4.0 * se);
        Ok((ok, format!("eta = {eta:.6}, oracle = {oracle:.6}, MC = {mc:.6} ± {se:.1e}")))
    })
}

fn stabilize_zero_config(map: MapSpec, noise: NoiseSpec, sigma: f64, eps: f64, runs: usize) -> ExperimentConfig {
    let mut c = ExperimentConfig::new(map, noise, ControlScheme::StabilizeZero { sigma });
    c.x0 = vec![0.5];
    c.n_steps = 2000;
    c.n_runs = runs;
    c.master_seed = 2024;
    c.classifier = Classifier { eps_conv: eps, ..Classifier::default() };
    c
}

/// Ricker, `s = 3`, `σ = 1`: convergence at `r = 0.94`, verifier rejects `r = 0.99`.
pub fn ac2(threads: usize) -> CriterionOutcome {
    timed(2, "ricker s=3 stabilization", Some(5.0), || {
        let noise = NoiseSpec::PolynomialSymmetric { s: 3 };
        let mut c = stabilize_zero_config(MapSpec::Ricker { r: 0.94 }, noise, 1.0, 1e-6, 100);
        c.threads = threads;
        let frac = c.run(false)?.summary.convergence_fraction;
        let terminal = terminal_fraction(&c)?;
        let rep = check_stabilize_zero(&MapSpec::Ricker { r: 0.99 }, (0.0, 10.0), &noise, 1.0)?;
        let ok = frac >= 0.99 && !rep.satisfied;
        Ok((
            ok,
            format!(
                "r=0.94 converged fraction = {frac:.3} (need >= 0.99; {terminal:.3} on the final value alone); \
                 r=0.99 satisfied = {}",
                rep.satisfied
            ),
        ))
    })
}

/// Convergence fraction judged on `|x_N - target|` alone.
fn terminal_fraction(c: &ExperimentConfig) -> Result<f64> {
    let mut c = c.clone();
    c.classifier.window = 1;
    Ok(c.run(false)?.summary.convergence_fraction)
}

/// Logistic `r = 2`, `σ = 0.865`, discrete noise with `l = 1` and `l = 3`.
pub fn ac3(threads: usize) -> CriterionOutcome {
    timed(3, "logistic discrete stabilization", None, || {
        let map = MapSpec::Logistic { r: 2.0 };
        let mut fracs = [0.0; 2];
        let mut terminal = [0.0; 2];
        let mut etas = [0.0; 2];
        for (i, l) in [1, 3].into_iter().enumerate() {
            let noise = NoiseSpec::DiscreteUniform { l };
            let mut c = stabilize_zero_config(map.clone(), noise, 0.865, 1e-4, 100);
            c.threads = threads;
            fracs[i] = c.run(false)?.summary.convergence_fraction;
            terminal[i] = terminal_fraction(&c)?;
            etas[i] = noise.log_gain_eta(0.865)?;
        }
        let ln2 = 2f64.ln();
        let ok = fracs[0] >= 0.95
            && fracs[1] <= 0.05
            && near(etas[0], 0.6896, 1e-4)
            && near(etas[1], 0.2872, 1e-4)
            && etas[0] < ln2
            && etas[1] < ln2;
        Ok((
            ok,
            format!(
                "l=1 fraction = {:.3} (need >= 0.95; {:.3} on the final value alone), eta = {:.4}; \
                 l=3 fraction = {:.3} (need <= 0.05), eta = {:.4}; ln 2 = {ln2:.4}",
                fracs[0], terminal[0], etas[0], fracs[1], etas[1]
            ),
        ))
    })
}

/// Root of `g` on `[a, b]` by bisection, assuming a sign change.
fn bisect(g: impl Fn(f64) -> Result<f64>, mut a: f64, mut b: f64, tol: f64) -> Result<f64> {
    let ga = g(a)?;
    while b - a > tol {
        let m = 0.5 * (a + b);
        if (g(m)? < 0.0) == (ga < 0.0) {
            a = m;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}

/// Stabilize-K thresholds with uniform noise.
pub fn ac4() -> CriterionOutcome {
    timed(4, "stabilize-K thresholds", Some(10.0), || {
        let uniform = NoiseSpec::PolynomialSymmetric { s: 0 };
        let eta = uniform.log_gain_eta(1.0)?;
        let target = eta.exp();
        let h_ricker = MapSpec::Ricker { r: 2.3068 }.shifted_bound(1.0)?.numeric_sup;
        let margin = |map: MapSpec, k: f64| -> Result<f64> { Ok(-check_stabilize_k(&map, k, &uniform, 1.0)?.margin) };
        let r_ricker = bisect(|r| margin(MapSpec::Ricker { r }, 1.0), 2.0, 2.6, 1e-6)?;
        let r_logistic = bisect(|r| margin(MapSpec::Logistic { r }, 1.0 - 1.0 / r), 2.0, 4.0, 1e-6)?;
        let ok = near(h_ricker, target, 1e-3) && near(r_logistic, 3.3484, 5e-3);
        Ok((
            ok,
            format!(
                "e^eta = {target:.4}; Ricker r=2.3068 H = {h_ricker:.4} (tol 1e-3), Ricker boundary r = {r_ricker:.4}; \
                 logistic boundary r = {r_logistic:.4} (need 3.3484 ± 5e-3)"
            ),
        ))
    })
}

/// Bounds of the shifted Ricker map.
pub fn ac5() -> CriterionOutcome {
    timed(5, "shifted Ricker bounds", None, || {
        let b3 = MapSpec::Ricker { r: 3.0 }.shifted_bound(1.0)?;
        let b1 = MapSpec::Ricker { r: 1.0 }.shifted_bound(1.0)?;
        let ok = near(b3.numeric_sup, 2.4925, 5e-3)
            && near(b1.numeric_sup, 1.0, 1e-3)
            && b3.formula_bound == 3.0
            && b1.formula_bound == 3.0
            && b3.formula_bound >= b3.numeric_sup
            && b1.formula_bound >= b1.numeric_sup;
        Ok((
            ok,
            format!(
                "r=3: sup = {:.4}, estimate = {}; r=1: sup = {:.4}, estimate = {}",
                b3.numeric_sup, b3.formula_bound, b1.numeric_sup, b1.formula_bound
            ),
        ))
    })
}

/// Bernoulli destabilization agrees with the closed-form σ bound on a grid.
pub fn ac6() -> CriterionOutcome {
    timed(6, "destabilization oracle equivalence", None, || {
        let spec = NoiseSpec::DiscreteUniform { l: 1 };
        let offsets = [-0.1, -0.05, -0.01, -0.003, -0.001, 0.001, 0.003, 0.01, 0.05, 0.1];
        let mut disagreements = 0;
        let mut points = 0;
        for i in 0..10 {
            let f = 3.0 * f64::from(i) / 9.0;
            let bound = (1.0 + (1.0 + 4.0 * f * f).sqrt()) / 2.0;
            for t in offsets {
                let sigma = bound * (1.0 + t);
                let rep = check_destabilize(
                    &MapSpec::Linear { a: f },
                    (0.0, 1.0),
                    &spec,
                    &SigmaProfile::Constant { sigma },
                    Some(&[1.0]),
                )?;
                points += 1;
                if rep.satisfied != (sigma > bound) {
                    disagreements += 1;
                }
            }
        }
        Ok((disagreements == 0, format!("{points} grid points, {disagreements} disagreements")))
    })
}

/// Capture by the trap `[2, d]` for the modified Beverton-Holt map.
pub fn ac7(threads: usize) -> CriterionOutcome {
    timed(7, "trap capture", None, || {
        let map = MapSpec::ModifiedBevertonHolt;
        let profile = SigmaProfile::DiscreteBound { l: 1, margin: 0.01 };
        let (x_max, f_max) = argmax(|x| map.full(x), 0.0, 10.0, 100_000);
        let f_of_f_max = map.full(f_max);
        let literal = check_trap(&map, 2.0, 4.73736, &profile)?;
        let mut fractions = Vec::new();
        let mut violations = 0;
        for x0 in [0.05, 0.1, 0.3] {
            let mut c = ExperimentConfig::new(
                map.clone(),
                NoiseSpec::DiscreteUniform { l: 1 },
                ControlScheme::DestabilizeZero { profile, truncation_b: Some(2.0), clamp: Some(true) },
            );
            c.x0 = vec![x0];
            c.n_runs = 100;
            c.n_steps = 10_000;
            c.master_seed = 4_737;
            c.threads = threads;
            c.classifier.trap = Some(Trap { b: 2.0, d: MBH_TRAP_D });
            let s = c.run(false)?.summary;
            fractions.push(s.trapped_fraction);
            violations += s.trap_violations;
        }
        let ok = fractions.iter().all(|&f| f == 1.0)
            && violations == 0
            && near(f_max, 4.73736, 1e-3)
            && near(f_of_f_max, 2.8320, 1e-3);
        Ok((
            ok,
            format!(
                "trapped fractions {fractions:?}, {violations} post-entry violations, d = {MBH_TRAP_D}; \
                 F_max = {f_max:.5} at x = {x_max:.5}, F(F_max) = {f_of_f_max:.4}; \
                 F-invariance with d = 4.73736: {}",
                literal.maps_into
            ),
        ))
    })
}

/// Fixed points of the two catalog examples.
pub fn ac8() -> CriterionOutcome {
    timed(8, "fixed-point catalog", None, || {
        let mbh = MapSpec::ModifiedBevertonHolt.fixed_points(0.5, 10.0);
        let pbh = MapSpec::PiecewiseBh.fixed_points(-0.5, 10.0);
        let close_set = |got: &[f64], want: &[f64]| {
            got.len() == want.len() && got.iter().zip(want).all(|(a, b)| near(*a, *b, 1e-8))
        };
        let mbh_x: Vec<f64> = mbh.iter().map(|p| p.x).collect();
        let pbh_x: Vec<f64> = pbh.iter().map(|p| p.x).collect();
        let stable: Vec<f64> = pbh.iter().filter(|p| p.stable).map(|p| p.x).collect();
        let slope4 = mbh.iter().find(|p| near(p.x, 4.0, 1e-6)).map(|p| p.slope);
        let ok = close_set(&mbh_x, &[2.0, 4.0])
            && slope4.is_some_and(|s| near(s, -5.0 / 3.0, 1e-6))
            && close_set(&pbh_x, &[0.0, 1.0, 3.0, 5.0, 7.0])
            && close_set(&stable, &[0.0, 3.0]);
        Ok((ok, format!("MBH {mbh_x:?}, F'(4) = {slope4:?}; PBH {pbh_x:?}, stable {stable:?}")))
    })
}

/// Summary CSV is identical at 1 and 8 threads.
pub fn ac9() -> CriterionOutcome {
    timed(9, "thread-count determinism", None, || {
        let mut configs = vec![stabilize_zero_config(
            MapSpec::Ricker { r: 0.94 },
            NoiseSpec::PolynomialSymmetric { s: 3 },
            1.0,
            1e-6,
            100,
        )];
        let stab_k = &panels()[6].config;
        configs.push(stab_k.clone());
        let mut identical = true;
        for c in &mut configs {
            c.n_runs = 200;
            let mut bytes = Vec::new();
            for threads in [1, 8] {
                c.threads = threads;
                bytes.push(summary_bytes(&c.run(false)?.summary)?);
            }
            identical &= bytes[0] == bytes[1];
        }
        Ok((identical, format!("{} ensembles compared byte for byte", configs.len())))
    })
}

/// Figure panels against their pinned references, plus the total budget.
pub fn ac10(threads: usize, started: Instant, budget: Duration) -> (CriterionOutcome, Vec<crate::figures::PanelOutcome>) {
    let mut panel_outcomes = Vec::new();
    let outcome = timed(10, "figure sweep", None, || {
        for p in panels() {
            panel_outcomes.push(p.check(threads)?);
        }
        let failed: Vec<String> = panel_outcomes
            .iter()
            .filter(|p| !p.passed)
            .map(|p| format!("fig {} {}: {:.3} vs {:.3}", p.figure, p.label, p.observed, p.reference))
            .collect();
        let total = started.elapsed();
        let ok = failed.is_empty() && total < budget;
        Ok((
            ok,
            format!(
                "{}/{} panels within ±{FRACTION_TOL}; whole suite {:.1} s (limit {} s){}",
                panel_outcomes.len() - failed.len(),
                panel_outcomes.len(),
                total.as_secs_f64(),
                budget.as_secs(),
                if failed.is_empty() { String::new() } else { format!("; off: {}", failed.join("; ")) }
            ),
        ))
    });
    (outcome, panel_outcomes)
}

/// All criteria in order. `threads = 0` uses the default pool.
pub fn run_all(threads: usize) -> Vec<CriterionOutcome> {
    let started = Instant::now();
    let mut out = vec![
        ac1(),
        ac2(threads),
        ac3(threads),
        ac4(),
        ac5(),
        ac6(),
        ac7(threads),
        ac8(),
        ac9(),
    ];
    out.push(ac10(threads, started, Duration::from_secs(120)).0);
    out
}
