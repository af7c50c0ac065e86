//! Desk-scale ensembles for the five-run figure panels.
//!
//! Each panel records the fraction of runs showing the panel's behavior
//! (convergence to the target, or capture by the trap) in a reference
//! ensemble computed with [`REFERENCE_SEED`]. A check reruns the panel with
//! another seed and accepts a fraction within [`FRACTION_TOL`].

use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::control::{ControlScheme, NoiseWindow, SigmaProfile};
use crate::distributions::NoiseSpec;
use crate::engine::{Classifier, Trap};
use crate::error::Result;
use crate::maps::MapSpec;

pub const REFERENCE_SEED: u64 = 20_240_601;
pub const CHECK_SEED: u64 = 7_000_003;
pub const FRACTION_TOL: f64 = 0.1;
pub const PANEL_RUNS: usize = 1000;

/// Upper end of the trap for the modified Beverton-Holt map: the maximum of
/// `F`, `3√11 / (2 + (√11 - 3)²) = 4.737469..`, rounded up at the fifth digit.
pub const MBH_TRAP_D: f64 = 4.73747;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Converged,
    Trapped,
}

#[derive(Debug, Clone)]
pub struct Panel {
    pub figure: u8,
    pub label: String,
    pub config: ExperimentConfig,
    pub metric: Metric,
    pub reference: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PanelOutcome {
    pub figure: u8,
    pub label: String,
    pub metric: Metric,
    pub reference: f64,
    pub observed: f64,
    pub passed: bool,
}

impl Panel {
    /// Fraction of runs showing the panel's metric for `seed`.
    pub fn fraction(&self, seed: u64, threads: usize) -> Result<f64> {
        let mut cfg = self.config.clone();
        cfg.master_seed = seed;
        cfg.threads = threads;
        let s = cfg.run(false)?.summary;
        Ok(match self.metric {
            Metric::Converged => s.convergence_fraction,
            Metric::Trapped => s.trapped_fraction,
        })
    }

    pub fn check(&self, threads: usize) -> Result<PanelOutcome> {
        let observed = self.fraction(CHECK_SEED, threads)?;
        Ok(PanelOutcome {
            figure: self.figure,
            label: self.label.clone(),
            metric: self.metric,
            reference: self.reference,
            observed,
            passed: (observed - self.reference).abs() <= FRACTION_TOL,
        })
    }
}

fn base(map: MapSpec, noise: NoiseSpec, scheme: ControlScheme, x0: f64, n_steps: usize) -> ExperimentConfig {
    let mut c = ExperimentConfig::new(map, noise, scheme);
    c.x0 = vec![x0];
    c.n_steps = n_steps;
    c.n_runs = PANEL_RUNS;
    c.master_seed = REFERENCE_SEED;
    c.classifier = Classifier { eps_conv: 1e-6, ..Classifier::default() };
    c
}

fn panel(figure: u8, label: String, config: ExperimentConfig, metric: Metric, reference: f64) -> Panel {
    Panel { figure, label, config, metric, reference }
}

fn uniform() -> NoiseSpec {
    NoiseSpec::PolynomialSymmetric { s: 0 }
}

fn discrete(l: u32) -> NoiseSpec {
    NoiseSpec::DiscreteUniform { l }
}

fn mbh_destabilize(noise: NoiseSpec, profile: SigmaProfile, x0: f64) -> ExperimentConfig {
    let mut c = base(
        MapSpec::ModifiedBevertonHolt,
        noise,
        ControlScheme::DestabilizeZero { profile, truncation_b: Some(2.0), clamp: Some(true) },
        x0,
        10_000,
    );
    c.classifier.trap = Some(Trap { b: 2.0, d: MBH_TRAP_D });
    c
}

fn pbh_destabilize(sigma: f64, window: NoiseWindow, x0: f64) -> ExperimentConfig {
    base(
        MapSpec::PiecewiseBh,
        discrete(2),
        ControlScheme::DestabilizeK { k: 3.0, profile: SigmaProfile::Constant { sigma }, window },
        x0,
        2000,
    )
}

/// Reference fractions, in panel order.
const REFERENCES: [f64; 37] = [
    // 1: Ricker, s = 3, sigma = 1, r = 0.94, 0.96, 0.98
    0.939, 0.870, 0.772,
    // 2: logistic r = 2, sigma = 0.865, l = 1, 2, 3
    0.702, 0.000, 0.000,
    // 3: Ricker K = 1, uniform, r = 2.3, 2.4, 2.5
    0.393, 0.042, 0.001,
    // 4: logistic K = 1 - 1/r, uniform, r = 3.345, 3.3483, 3.35
    0.276, 0.456, 0.243,
    // 5: logistic r = 4, sigma = 1.05, l = 2, 3, 4
    0.027, 0.000, 0.000,
    // 6: modified Beverton-Holt K = 4, sigma = 1.05, l = 4, 6, 10
    0.232, 0.038, 0.018,
    // 7: Ricker r = 2.1, sigma = 0.7, piecewise delta = 0.02, l = 2, 6, and sigma = 0
    0.898, 0.575, 0.000,
    // 8: destabilize zero, s = 1, sigma = 1.2, 1.4, 1.6
    0.000, 0.217, 1.000,
    // 9: destabilize zero, s = 4, sigma = 1.1, 1.15, 1.2
    0.022, 0.437, 1.000,
    // 10: destabilize zero, discrete l = 1, 3, 4
    1.000, 1.000, 1.000,
    // 11: destabilize K = 3, l = 2, sigma = 1.2, 1.8, 1.9
    0.832, 0.485, 0.010,
    // 12: destabilize K = 3, sigma = 1.9, noise windows [1,4], [1.5,3.5], [2.2,3.8], [2.5,3.5]
    0.001, 0.007, 0.085, 0.091,
];

const FIG12_WINDOWS: [(f64, f64); 4] = [(1.0, 4.0), (1.5, 3.5), (2.2, 3.8), (2.5, 3.5)];

/// All panels with their reference fractions.
pub fn panels() -> Vec<Panel> {
    let mut out = Vec::new();
    for r in [0.94, 0.96, 0.98] {
        out.push((
            1,
            format!("ricker r={r} s=3 sigma=1"),
            base(
                MapSpec::Ricker { r },
                NoiseSpec::PolynomialSymmetric { s: 3 },
                ControlScheme::StabilizeZero { sigma: 1.0 },
                0.5,
                2000,
            ),
            Metric::Converged,
        ));
    }
    for l in [1, 2, 3] {
        out.push((
            2,
            format!("logistic r=2 sigma=0.865 l={l}"),
            base(
                MapSpec::Logistic { r: 2.0 },
                discrete(l),
                ControlScheme::StabilizeZero { sigma: 0.865 },
                0.5,
                2000,
            ),
            Metric::Converged,
        ));
    }
    for r in [2.3, 2.4, 2.5] {
        out.push((
            3,
            format!("ricker K=1 r={r} uniform sigma=1"),
            base(MapSpec::Ricker { r }, uniform(), ControlScheme::StabilizeK { k: 1.0, sigma: 1.0 }, 0.5, 2000),
            Metric::Converged,
        ));
    }
    for r in [3.345, 3.3483, 3.35] {
        out.push((
            4,
            format!("logistic K=1-1/r r={r} uniform sigma=1"),
            base(
                MapSpec::Logistic { r },
                uniform(),
                ControlScheme::StabilizeK { k: 1.0 - 1.0 / r, sigma: 1.0 },
                0.5,
                2000,
            ),
            Metric::Converged,
        ));
    }
    for l in [2, 3, 4] {
        out.push((
            5,
            format!("logistic K=0.75 r=4 sigma=1.05 l={l}"),
            base(
                MapSpec::Logistic { r: 4.0 },
                discrete(l),
                ControlScheme::StabilizeK { k: 0.75, sigma: 1.05 },
                0.5,
                2000,
            ),
            Metric::Converged,
        ));
    }
    for l in [4, 6, 10] {
        out.push((
            6,
            format!("beverton-holt K=4 sigma=1.05 l={l}"),
            base(
                MapSpec::ModifiedBevertonHolt,
                discrete(l),
                ControlScheme::StabilizeK { k: 4.0, sigma: 1.05 },
                0.5,
                2000,
            ),
            Metric::Converged,
        ));
    }
    for (l, sigma) in [(2, 0.7), (6, 0.7), (2, 0.0)] {
        out.push((
            7,
            format!("ricker K=1 r=2.1 piecewise delta=0.02 l={l} sigma={sigma}"),
            base(
                MapSpec::Ricker { r: 2.1 },
                NoiseSpec::PiecewiseUniform { l, delta: 0.02 },
                ControlScheme::StabilizeK { k: 1.0, sigma },
                0.5,
                2000,
            ),
            Metric::Converged,
        ));
    }
    for (figure, s, sigmas) in [(8, 1, [1.2, 1.4, 1.6]), (9, 4, [1.1, 1.15, 1.2])] {
        for sigma in sigmas {
            out.push((
                figure,
                format!("beverton-holt destabilize zero s={s} sigma={sigma}"),
                mbh_destabilize(
                    NoiseSpec::PolynomialSymmetric { s },
                    SigmaProfile::Constant { sigma },
                    0.1,
                ),
                Metric::Trapped,
            ));
        }
    }
    for l in [1, 3, 4] {
        out.push((
            10,
            format!("beverton-holt destabilize zero discrete l={l}"),
            mbh_destabilize(discrete(l), SigmaProfile::DiscreteBound { l, margin: 0.01 }, 0.3),
            Metric::Trapped,
        ));
    }
    for sigma in [1.2, 1.8, 1.9] {
        out.push((
            11,
            format!("piecewise bh destabilize K=3 sigma={sigma}"),
            pbh_destabilize(sigma, NoiseWindow { lo: None, hi: Some(4.0) }, 0.8),
            Metric::Converged,
        ));
    }
    for (lo, hi) in FIG12_WINDOWS {
        out.push((
            12,
            format!("piecewise bh destabilize K=3 sigma=1.9 window=[{lo},{hi}]"),
            pbh_destabilize(1.9, NoiseWindow { lo: Some(lo), hi: Some(hi) }, 2.0),
            Metric::Converged,
        ));
    }
    assert_eq!(out.len(), REFERENCES.len());
    out.into_iter()
        .zip(REFERENCES.iter())
        .map(|((figure, label, config, metric), &reference)| panel(figure, label, config, metric, reference))
        .collect()
}
