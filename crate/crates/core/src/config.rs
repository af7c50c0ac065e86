//! Serializable experiment description shared by the CLI and the bindings.

use std::path::PathBuf;

use serde::{Deserialize, Deserializer, Serialize};

use crate::control::{check_destabilize, check_stabilize_k, check_stabilize_zero, check_trap, ControlScheme};
use crate::distributions::NoiseSpec;
use crate::engine::{Classifier, Ensemble, Experiment};
use crate::error::{Error, Result};
use crate::maps::MapSpec;

/// Environment variable that overrides `master_seed`.
pub const SEED_ENV: &str = "NOISECTL_SEED";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub map: MapSpec,
    /// Working interval for the analytic checks; the map default when absent.
    #[serde(default)]
    pub interval: Option<[f64; 2]>,
    pub noise: NoiseSpec,
    pub scheme: ControlScheme,
    /// One initial value or a list cycled over the runs.
    #[serde(default = "default_x0", deserialize_with = "one_or_many")]
    pub x0: Vec<f64>,
    #[serde(default = "default_steps")]
    pub n_steps: usize,
    #[serde(default = "default_runs")]
    pub n_runs: usize,
    #[serde(default = "default_seed")]
    pub master_seed: u64,
    /// Worker threads; 0 picks the machine default. Results do not depend on it.
    #[serde(default)]
    pub threads: usize,
    #[serde(default)]
    pub classifier: Classifier,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Write every `thin`-th point of each path (the last point is always written).
    pub thin: usize,
    pub trajectories: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: PathBuf::from("noisectl-out"), thin: 1, trajectories: true }
    }
}

fn default_x0() -> Vec<f64> {
    vec![0.5]
}

fn default_steps() -> usize {
    10_000
}

fn default_runs() -> usize {
    5
}

fn default_seed() -> u64 {
    1
}

fn one_or_many<'de, D: Deserializer<'de>>(de: D) -> std::result::Result<Vec<f64>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany {
        One(f64),
        Many(Vec<f64>),
    }
    Ok(match OneOrMany::deserialize(de)? {
        OneOrMany::One(x) => vec![x],
        OneOrMany::Many(v) => v,
    })
}

impl ExperimentConfig {
    pub fn new(map: MapSpec, noise: NoiseSpec, scheme: ControlScheme) -> Self {
        ExperimentConfig {
            map,
            interval: None,
            noise,
            scheme,
            x0: default_x0(),
            n_steps: default_steps(),
            n_runs: default_runs(),
            master_seed: default_seed(),
            threads: 0,
            classifier: Classifier::default(),
            output: OutputConfig::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Applies `NOISECTL_SEED` when set.
    pub fn apply_env(&mut self) -> Result<()> {
        if let Ok(v) = std::env::var(SEED_ENV) {
            self.master_seed = v
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("{SEED_ENV} must be an unsigned integer, got {v:?}")))?;
        }
        Ok(())
    }

    pub fn interval(&self) -> (f64, f64) {
        match self.interval {
            Some([lo, hi]) => (lo, hi),
            None => self.map.default_interval(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.experiment().map(|_| ())?;
        if self.n_steps == 0 || self.n_runs == 0 {
            return Err(Error::Config("n_steps and n_runs must be >= 1".into()));
        }
        if self.x0.is_empty() || self.x0.iter().any(|x| !x.is_finite()) {
            return Err(Error::Config("x0 must hold at least one finite value".into()));
        }
        if self.output.thin == 0 {
            return Err(Error::Config("output.thin must be >= 1".into()));
        }
        if let Some([lo, hi]) = self.interval {
            if !(lo < hi) {
                return Err(Error::Config(format!("interval needs lo < hi, got [{lo}, {hi}]")));
            }
        }
        Ok(())
    }

    pub fn experiment(&self) -> Result<Experiment> {
        Experiment::new(self.map.clone(), self.noise, self.scheme, self.classifier)
    }

    pub fn run(&self, keep_values: bool) -> Result<Ensemble> {
        self.validate()?;
        self.experiment()?
            .run_ensemble(&self.x0, self.n_runs, self.n_steps, self.master_seed, self.threads, keep_values)
    }

    /// Analytic report lines for the configured scheme. Checks that do not
    /// apply to the parameters are listed with the reason.
    pub fn threshold_report(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        let mut push = |k: &str, v: String| out.push((k.to_string(), v));
        push("map", format!("{:?}", self.map));
        push("noise", format!("{:?}", self.noise));
        push("scheme", format!("{:?}", self.scheme));
        let interval = self.interval();
        push("interval", format!("[{}, {}]", interval.0, interval.1));
        match self.scheme {
            ControlScheme::StabilizeZero { sigma } => {
                match check_stabilize_zero(&self.map, interval, &self.noise, sigma) {
                    Ok(r) => {
                        push("check", "stabilize_zero".into());
                        push("H", fmt(r.bound));
                        push("ln_H", fmt(r.ln_bound));
                        push("eta", fmt(r.eta));
                        push("margin", fmt(r.margin));
                        push("recommended", format!("{:?}", r.recommended));
                        push("verdict", verdict(r.satisfied, r.eta, "ln H"));
                    }
                    Err(e) => push("check", format!("stabilize_zero unavailable: {e}")),
                }
            }
            ControlScheme::StabilizeK { k, sigma } => match check_stabilize_k(&self.map, k, &self.noise, sigma) {
                Ok(r) => {
                    push("check", "stabilize_k".into());
                    push("K", fmt(k));
                    push("H_shifted", fmt(r.bound));
                    push("H_shifted_estimate", r.formula_bound.map_or("n/a".into(), fmt));
                    push("ln_H_shifted", fmt(r.ln_bound));
                    push("eta", fmt(r.eta));
                    push("margin", fmt(r.margin));
                    push("recommended", format!("{:?}", r.recommended));
                    push("verdict", verdict(r.satisfied, r.eta, "ln ℋ"));
                }
                Err(e) => push("check", format!("stabilize_k unavailable: {e}")),
            },
            ControlScheme::DestabilizeZero { profile, truncation_b, .. } => {
                let (lo, hi) = match truncation_b {
                    Some(b) => (interval.0, b.min(interval.1)),
                    None => interval,
                };
                match check_destabilize(&self.map, (lo, hi), &self.noise, &profile, None) {
                    Ok(r) => {
                        push("check", "destabilize_zero".into());
                        push("destab_interval", format!("[{lo}, {hi}]"));
                        push("alpha", r.alpha.map_or("none".into(), fmt));
                        push("worst_expectation", fmt(r.worst_expectation));
                        push("worst_x", fmt(r.worst_x));
                        push("destab_satisfied", r.satisfied.to_string());
                    }
                    Err(e) => push("check", format!("destabilize_zero unavailable: {e}")),
                }
                if let (Some(b), Some(trap)) = (truncation_b, self.classifier.trap) {
                    match check_trap(&self.map, b, trap.d, &profile) {
                        Ok(t) => {
                            push("trap", format!("[{b}, {}]", trap.d));
                            push("trap_maps_into", t.maps_into.to_string());
                            push("trap_f_positive", t.f_positive.to_string());
                            push("trap_jump_sup", fmt(t.jump_sup));
                            push("trap_jump_ok", t.jump_ok.to_string());
                            push("trap_F_max", fmt(t.f_max));
                            push("trap_F_of_F_max", fmt(t.f_of_f_max));
                            push("trap_holds", t.holds.to_string());
                        }
                        Err(e) => push("trap", format!("unavailable: {e}")),
                    }
                }
            }
            ControlScheme::DestabilizeK { k, profile, .. } => {
                let shifted = MapSpec::shifted(self.map.clone(), k);
                let res = shifted.and_then(|m| {
                    let (lo, hi) = m.default_interval();
                    check_destabilize(&m, (lo, hi), &self.noise, &profile, None)
                });
                match res {
                    Ok(r) => {
                        push("check", "destabilize_k".into());
                        push("alpha", r.alpha.map_or("none".into(), fmt));
                        push("worst_expectation", fmt(r.worst_expectation));
                        push("worst_u", fmt(r.worst_x));
                        push("destab_satisfied", r.satisfied.to_string());
                    }
                    Err(e) => push("check", format!("destabilize_k unavailable: {e}")),
                }
            }
        }
        out
    }
}

fn fmt(v: f64) -> String {
    format!("{v:.6}")
}

fn verdict(satisfied: bool, eta: f64, lhs: &str) -> String {
    if satisfied {
        format!("satisfied, η={eta:.4}, {lhs} < η")
    } else {
        format!("not satisfied, η={eta:.4}, {lhs} >= η")
    }
}
