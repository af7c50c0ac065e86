//! The `noisectl` command line.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::control::{check_stabilize_k, check_stabilize_zero, ControlScheme, NoiseWindow, SigmaProfile};
use crate::distributions::NoiseSpec;
use crate::engine::Trap;
use crate::error::{Error, Result};
use crate::maps::MapSpec;
use crate::output::{write_report, write_rows, write_summaries, write_trajectories};
use crate::verify;

#[derive(Debug, Parser)]
#[command(name = "noisectl", version, about = "Noise-driven stabilization and destabilization of scalar maps")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run an ensemble and write trajectories.csv, summary.csv and report.txt.
    Simulate(RunArgs),
    /// Print the analytic threshold report without simulating.
    Threshold(RunArgs),
    /// Run an ensemble per grid point of one or two parameters; writes sweep.csv.
    Sweep(SweepArgs),
    /// Run the acceptance checks.
    Verify(VerifyArgs),
}

#[derive(Debug, Args, Clone)]
pub struct RunArgs {
    /// JSON experiment file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Print the resolved configuration as JSON and exit.
    #[arg(long)]
    pub dump_config: bool,
    #[command(flatten)]
    pub o: Overrides,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MapKind {
    Ricker,
    Logistic,
    #[value(alias = "mbh")]
    BevertonHolt,
    #[value(alias = "pbh")]
    PiecewiseBh,
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NoiseKind {
    #[value(alias = "polynomial")]
    Poly,
    Discrete,
    Piecewise,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SchemeKind {
    StabilizeZero,
    StabilizeK,
    DestabilizeZero,
    DestabilizeK,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProfileKind {
    Constant,
    DiscreteBound,
    ContinuousBound,
}

#[derive(Debug, Args, Clone, Default)]
pub struct Overrides {
    #[arg(long, value_enum)]
    pub map: Option<MapKind>,
    /// Growth rate of the Ricker or logistic map.
    #[arg(long)]
    pub r: Option<f64>,
    /// Rate of the linear map.
    #[arg(long)]
    pub a: Option<f64>,
    #[arg(long, value_enum)]
    pub noise: Option<NoiseKind>,
    #[arg(long)]
    pub s: Option<u32>,
    #[arg(long)]
    pub l: Option<u32>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long, value_enum)]
    pub scheme: Option<SchemeKind>,
    /// Noise amplitude; for destabilizing schemes it selects a constant profile.
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Equilibrium K; implies a stabilize-k scheme unless --scheme is given.
    #[arg(long)]
    pub equilibrium: Option<f64>,
    #[arg(long, value_enum)]
    pub profile: Option<ProfileKind>,
    /// l of a discrete-bound profile (defaults to the noise l).
    #[arg(long)]
    pub profile_l: Option<u32>,
    #[arg(long)]
    pub margin: Option<f64>,
    #[arg(long)]
    pub truncation_b: Option<f64>,
    #[arg(long)]
    pub no_clamp: bool,
    #[arg(long)]
    pub window_lo: Option<f64>,
    #[arg(long)]
    pub window_hi: Option<f64>,
    #[arg(long)]
    pub interval_lo: Option<f64>,
    #[arg(long)]
    pub interval_hi: Option<f64>,
    /// Initial values, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub x0: Option<Vec<f64>>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub runs: Option<usize>,
    /// Master seed (overrides NOISECTL_SEED and the file).
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long)]
    pub eps: Option<f64>,
    /// Consecutive final steps within eps required for convergence.
    #[arg(long)]
    pub conv_window: Option<usize>,
    #[arg(long)]
    pub x_max: Option<f64>,
    #[arg(long)]
    pub trap_b: Option<f64>,
    #[arg(long)]
    pub trap_d: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub thin: Option<usize>,
    #[arg(long)]
    pub no_trajectories: bool,
}

#[derive(Debug, Args, Clone)]
pub struct SweepArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Parameter to vary: r, a, sigma, s, l, delta, margin, equilibrium, x0, truncation-b.
    #[arg(long)]
    pub param: String,
    /// `start:stop:step` or a comma-separated list.
    #[arg(long)]
    pub values: String,
    #[arg(long, requires = "values2")]
    pub param2: Option<String>,
    #[arg(long, requires = "param2")]
    pub values2: Option<String>,
}

#[derive(Debug, Args, Clone)]
pub struct VerifyArgs {
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
    /// Also print every figure panel.
    #[arg(long)]
    pub panels: bool,
}

/// Entry point; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                2
            } else {
                1
            }
        }
    }
}

pub fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Simulate(args) => {
            let cfg = resolve(&args)?;
            if args.dump_config {
                println!("{}", cfg.to_json());
                return Ok(0);
            }
            simulate(&cfg)?;
            Ok(0)
        }
        Command::Threshold(args) => {
            let cfg = resolve(&args)?;
            if args.dump_config {
                println!("{}", cfg.to_json());
                return Ok(0);
            }
            let lines = cfg.threshold_report();
            write_report(std::io::stdout().lock(), &lines)?;
            if args.o.out.is_some() {
                fs::create_dir_all(&cfg.output.dir)?;
                write_report(File::create(cfg.output.dir.join("report.txt"))?, &lines)?;
            }
            Ok(0)
        }
        Command::Sweep(args) => {
            sweep(&args)?;
            Ok(0)
        }
        Command::Verify(args) => {
            let outcomes = verify::run_all(args.threads);
            for o in &outcomes {
                println!("{}", o.line());
            }
            if args.panels {
                for p in crate::figures::panels() {
                    let o = p.check(args.threads)?;
                    println!(
                        "  fig {:>2} {:<62} {:?} observed {:.3} reference {:.3} {}",
                        o.figure,
                        o.label,
                        o.metric,
                        o.observed,
                        o.reference,
                        if o.passed { "ok" } else { "off" }
                    );
                }
            }
            let failed = outcomes.iter().filter(|o| !o.passed).count();
            println!("{} of {} criteria passed", outcomes.len() - failed, outcomes.len());
            Ok(if failed == 0 { 0 } else { 1 })
        }
    }
}

/// Loads the file (if any), applies `NOISECTL_SEED`, then the flags.
pub fn resolve(args: &RunArgs) -> Result<ExperimentConfig> {
    let base = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
            Some(ExperimentConfig::from_json(&text)?)
        }
        None => None,
    };
    let mut cfg = apply_overrides(base, &args.o)?;
    if args.o.seed.is_none() {
        cfg.apply_env()?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn need<T>(v: Option<T>, what: &str) -> Result<T> {
    v.ok_or_else(|| Error::Config(format!("missing {what}")))
}

fn build_map(o: &Overrides, base: Option<&MapSpec>) -> Result<MapSpec> {
    let kind = match (o.map, base) {
        (Some(kind), _) => kind,
        (None, Some(m)) => {
            return Ok(match m.clone() {
                MapSpec::Ricker { r } => MapSpec::Ricker { r: o.r.unwrap_or(r) },
                MapSpec::Logistic { r } => MapSpec::Logistic { r: o.r.unwrap_or(r) },
                MapSpec::Linear { a } => MapSpec::Linear { a: o.a.unwrap_or(a) },
                other => {
                    if o.r.is_some() || o.a.is_some() {
                        return Err(Error::Config(format!("--r/--a do not apply to {other:?}")));
                    }
                    other
                }
            })
        }
        (None, None) => return Err(Error::Config("no map given; pass --config or --map".into())),
    };
    Ok(match kind {
        MapKind::Ricker => MapSpec::Ricker { r: need(o.r, "--r for the Ricker map")? },
        MapKind::Logistic => MapSpec::Logistic { r: need(o.r, "--r for the logistic map")? },
        MapKind::BevertonHolt => MapSpec::ModifiedBevertonHolt,
        MapKind::PiecewiseBh => MapSpec::PiecewiseBh,
        MapKind::Linear => MapSpec::Linear { a: need(o.a, "--a for the linear map")? },
    })
}

fn build_noise(o: &Overrides, base: Option<&NoiseSpec>) -> Result<NoiseSpec> {
    let kind = match (o.noise, base) {
        (Some(kind), _) => kind,
        (None, Some(n)) => {
            return Ok(match *n {
                NoiseSpec::PolynomialSymmetric { s } => NoiseSpec::PolynomialSymmetric { s: o.s.unwrap_or(s) },
                NoiseSpec::DiscreteUniform { l } => NoiseSpec::DiscreteUniform { l: o.l.unwrap_or(l) },
                NoiseSpec::PiecewiseUniform { l, delta } => NoiseSpec::PiecewiseUniform {
                    l: o.l.unwrap_or(l),
                    delta: o.delta.unwrap_or(delta),
                },
            })
        }
        (None, None) => return Err(Error::Config("no noise given; pass --config or --noise".into())),
    };
    Ok(match kind {
        NoiseKind::Poly => NoiseSpec::PolynomialSymmetric { s: o.s.unwrap_or(0) },
        NoiseKind::Discrete => NoiseSpec::DiscreteUniform { l: need(o.l, "--l for discrete noise")? },
        NoiseKind::Piecewise => NoiseSpec::PiecewiseUniform {
            l: need(o.l, "--l for piecewise noise")?,
            delta: need(o.delta, "--delta for piecewise noise")?,
        },
    })
}

/// Positive equilibrium of the catalog maps that have an obvious one.
fn default_equilibrium(map: &MapSpec) -> Option<f64> {
    match *map {
        MapSpec::Ricker { .. } => Some(1.0),
        MapSpec::Logistic { r } => Some(1.0 - 1.0 / r),
        _ => None,
    }
}

fn build_profile(o: &Overrides, base: Option<SigmaProfile>, noise: &NoiseSpec) -> Result<SigmaProfile> {
    let noise_l = match *noise {
        NoiseSpec::DiscreteUniform { l } | NoiseSpec::PiecewiseUniform { l, .. } => Some(l),
        NoiseSpec::PolynomialSymmetric { .. } => None,
    };
    let kind = match (o.profile, o.sigma, base) {
        (Some(kind), _, _) => kind,
        (None, Some(_), _) => ProfileKind::Constant,
        (None, None, Some(p)) => {
            return Ok(match p {
                SigmaProfile::Constant { sigma } => SigmaProfile::Constant { sigma },
                SigmaProfile::DiscreteBound { l, margin } => SigmaProfile::DiscreteBound {
                    l: o.profile_l.unwrap_or(l),
                    margin: o.margin.unwrap_or(margin),
                },
                SigmaProfile::ContinuousBound { margin } => {
                    SigmaProfile::ContinuousBound { margin: o.margin.unwrap_or(margin) }
                }
            })
        }
        (None, None, None) if noise_l.is_some() => ProfileKind::DiscreteBound,
        (None, None, None) => ProfileKind::ContinuousBound,
    };
    let margin = o.margin.unwrap_or(crate::control::DEFAULT_MARGIN);
    Ok(match kind {
        ProfileKind::Constant => SigmaProfile::Constant { sigma: need(o.sigma, "--sigma for a constant profile")? },
        ProfileKind::DiscreteBound => SigmaProfile::DiscreteBound {
            l: need(o.profile_l.or(noise_l), "--profile-l for a discrete-bound profile")?,
            margin,
        },
        ProfileKind::ContinuousBound => SigmaProfile::ContinuousBound { margin },
    })
}

fn build_scheme(o: &Overrides, base: Option<&ControlScheme>, map: &MapSpec, noise: &NoiseSpec) -> Result<ControlScheme> {
    let base_kind = base.map(|s| match s {
        ControlScheme::StabilizeZero { .. } => SchemeKind::StabilizeZero,
        ControlScheme::StabilizeK { .. } => SchemeKind::StabilizeK,
        ControlScheme::DestabilizeZero { .. } => SchemeKind::DestabilizeZero,
        ControlScheme::DestabilizeK { .. } => SchemeKind::DestabilizeK,
    });
    let kind = o.scheme.or(base_kind).unwrap_or(if o.equilibrium.is_some() {
        SchemeKind::StabilizeK
    } else {
        SchemeKind::StabilizeZero
    });

    let base_sigma = match base {
        Some(ControlScheme::StabilizeZero { sigma }) | Some(ControlScheme::StabilizeK { sigma, .. }) => Some(*sigma),
        _ => None,
    };
    let base_k = match base {
        Some(ControlScheme::StabilizeK { k, .. }) | Some(ControlScheme::DestabilizeK { k, .. }) => Some(*k),
        _ => None,
    };
    let resolve_k = || -> Result<f64> {
        if let Some(k) = o.equilibrium {
            return Ok(k);
        }
        match (base_k, default_equilibrium(map)) {
            (Some(k), Some(d)) if map.require_equilibrium(k).is_err() => Ok(d),
            (Some(k), _) => Ok(k),
            (None, Some(d)) => Ok(d),
            (None, None) => Err(Error::Config("missing --equilibrium".into())),
        }
    };
    let base_profile = match base {
        Some(ControlScheme::DestabilizeZero { profile, .. }) | Some(ControlScheme::DestabilizeK { profile, .. }) => {
            Some(*profile)
        }
        _ => None,
    };

    Ok(match kind {
        SchemeKind::StabilizeZero => ControlScheme::StabilizeZero {
            sigma: o.sigma.or(base_sigma).unwrap_or(1.0),
        },
        SchemeKind::StabilizeK => ControlScheme::StabilizeK { k: resolve_k()?, sigma: o.sigma.or(base_sigma).unwrap_or(1.0) },
        SchemeKind::DestabilizeZero => {
            let (b0, c0) = match base {
                Some(ControlScheme::DestabilizeZero { truncation_b, clamp, .. }) => (*truncation_b, *clamp),
                _ => (None, None),
            };
            ControlScheme::DestabilizeZero {
                profile: build_profile(o, base_profile, noise)?,
                truncation_b: o.truncation_b.or(b0),
                clamp: if o.no_clamp { Some(false) } else { c0 },
            }
        }
        SchemeKind::DestabilizeK => {
            let w0 = match base {
                Some(ControlScheme::DestabilizeK { window, .. }) => *window,
                _ => NoiseWindow::default(),
            };
            ControlScheme::DestabilizeK {
                k: resolve_k()?,
                profile: build_profile(o, base_profile, noise)?,
                window: NoiseWindow { lo: o.window_lo.or(w0.lo), hi: o.window_hi.or(w0.hi) },
            }
        }
    })
}

/// Merges flag overrides into an optional base configuration.
pub fn apply_overrides(base: Option<ExperimentConfig>, o: &Overrides) -> Result<ExperimentConfig> {
    let map = build_map(o, base.as_ref().map(|c| &c.map))?;
    let noise = build_noise(o, base.as_ref().map(|c| &c.noise))?;
    let scheme = build_scheme(o, base.as_ref().map(|c| &c.scheme), &map, &noise)?;
    let mut cfg = match base {
        Some(mut c) => {
            c.map = map;
            c.noise = noise;
            c.scheme = scheme;
            c
        }
        None => ExperimentConfig::new(map, noise, scheme),
    };
    match (o.interval_lo, o.interval_hi) {
        (None, None) => {}
        (lo, hi) => {
            let (dlo, dhi) = cfg.interval();
            cfg.interval = Some([lo.unwrap_or(dlo), hi.unwrap_or(dhi)]);
        }
    }
    if let Some(x0) = &o.x0 {
        cfg.x0 = x0.clone();
    }
    if let Some(v) = o.steps {
        cfg.n_steps = v;
    }
    if let Some(v) = o.runs {
        cfg.n_runs = v;
    }
    if let Some(v) = o.seed {
        cfg.master_seed = v;
    }
    if let Some(v) = o.threads {
        cfg.threads = v;
    }
    if let Some(v) = o.eps {
        cfg.classifier.eps_conv = v;
    }
    if let Some(v) = o.conv_window {
        cfg.classifier.window = v;
    }
    if let Some(v) = o.x_max {
        cfg.classifier.x_max = v;
    }
    match (o.trap_b, o.trap_d, cfg.classifier.trap) {
        (None, None, _) => {}
        (Some(b), Some(d), _) => cfg.classifier.trap = Some(Trap { b, d }),
        (b, d, Some(t)) => cfg.classifier.trap = Some(Trap { b: b.unwrap_or(t.b), d: d.unwrap_or(t.d) }),
        _ => return Err(Error::Config("a trap needs both --trap-b and --trap-d".into())),
    }
    if let Some(dir) = &o.out {
        cfg.output.dir = dir.clone();
    }
    if let Some(v) = o.thin {
        cfg.output.thin = v;
    }
    if o.no_trajectories {
        cfg.output.trajectories = false;
    }
    Ok(cfg)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

/// Runs the ensemble and writes the three artifacts.
pub fn simulate(cfg: &ExperimentConfig) -> Result<()> {
    let ensemble = cfg.run(cfg.output.trajectories)?;
    let dir = &cfg.output.dir;
    fs::create_dir_all(dir)?;
    if cfg.output.trajectories {
        let mut w = create(&dir.join("trajectories.csv"))?;
        write_trajectories(&mut w, &ensemble.trajectories, cfg.output.thin)?;
        w.flush()?;
    }
    let mut w = create(&dir.join("summary.csv"))?;
    write_summaries(&mut w, std::slice::from_ref(&ensemble.summary))?;
    w.flush()?;

    let mut lines = cfg.threshold_report();
    let s = &ensemble.summary;
    lines.push(("master_seed".into(), cfg.master_seed.to_string()));
    lines.push(("n_runs".into(), s.n_runs.to_string()));
    lines.push(("n_steps".into(), s.n_steps.to_string()));
    lines.push(("convergence_fraction".into(), format!("{}", s.convergence_fraction)));
    lines.push(("trapped_fraction".into(), format!("{}", s.trapped_fraction)));
    lines.push(("escaped_fraction".into(), format!("{}", s.escaped_fraction)));
    if let Some(m) = s.mean_log_slope {
        lines.push(("mean_log_slope".into(), format!("{m}")));
    }
    let mut w = create(&dir.join("report.txt"))?;
    write_report(&mut w, &lines)?;
    w.flush()?;
    Ok(())
}

/// Grid values from `start:stop:step` or `a,b,c`.
pub fn parse_values(spec: &str) -> Result<Vec<f64>> {
    let bad = || Error::Config(format!("cannot parse values {spec:?}; use start:stop:step or a,b,c"));
    if spec.contains(':') {
        let parts: Vec<f64> = spec
            .split(':')
            .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
            .collect::<Result<_>>()?;
        let [start, stop, step] = parts[..] else { return Err(bad()) };
        if !(step > 0.0) || stop < start {
            return Err(bad());
        }
        let n = ((stop - start) / step + 1e-9).floor() as usize;
        // Rounded so that 0.9:1:0.05 yields 0.95 rather than 0.9500000000000001.
        Ok((0..=n).map(|i| ((start + step * i as f64) * 1e12).round() / 1e12).collect())
    } else {
        spec.split(',').map(|p| p.trim().parse::<f64>().map_err(|_| bad())).collect()
    }
}

fn set_param(o: &mut Overrides, name: &str, v: f64) -> Result<()> {
    let as_u32 = |v: f64| -> Result<u32> {
        if v >= 0.0 && v.fract() == 0.0 && v <= f64::from(u32::MAX) {
            Ok(v as u32)
        } else {
            Err(Error::Config(format!("{name} needs whole numbers, got {v}")))
        }
    };
    match name {
        "r" => o.r = Some(v),
        "a" => o.a = Some(v),
        "sigma" => o.sigma = Some(v),
        "s" => o.s = Some(as_u32(v)?),
        "l" => o.l = Some(as_u32(v)?),
        "delta" => o.delta = Some(v),
        "margin" => o.margin = Some(v),
        "equilibrium" | "k" => o.equilibrium = Some(v),
        "x0" => o.x0 = Some(vec![v]),
        "truncation-b" | "truncation_b" => o.truncation_b = Some(v),
        other => return Err(Error::Config(format!("unknown sweep parameter {other:?}"))),
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct SweepRow {
    param: String,
    value: f64,
    param2: Option<String>,
    value2: Option<f64>,
    n_runs: usize,
    n_steps: usize,
    convergence_fraction: f64,
    trapped_fraction: f64,
    escaped_fraction: f64,
    terminal_dev_mean: Option<f64>,
    mean_log_slope: Option<f64>,
    satisfied: Option<bool>,
    margin: Option<f64>,
}

fn analytic_verdict(cfg: &ExperimentConfig) -> Option<(bool, f64)> {
    let rep = match cfg.scheme {
        ControlScheme::StabilizeZero { sigma } => check_stabilize_zero(&cfg.map, cfg.interval(), &cfg.noise, sigma),
        ControlScheme::StabilizeK { k, sigma } => check_stabilize_k(&cfg.map, k, &cfg.noise, sigma),
        _ => return None,
    };
    rep.ok().map(|r| (r.satisfied, r.margin))
}

pub fn sweep(args: &SweepArgs) -> Result<()> {
    let first = parse_values(&args.values)?;
    let second = match &args.values2 {
        Some(v) => parse_values(v)?,
        None => Vec::new(),
    };
    let base = match &args.run.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
            Some(ExperimentConfig::from_json(&text)?)
        }
        None => None,
    };
    let mut points: Vec<(f64, Option<f64>)> = Vec::new();
    for &v in &first {
        if second.is_empty() {
            points.push((v, None));
        } else {
            points.extend(second.iter().map(|&w| (v, Some(w))));
        }
    }
    let mut rows = Vec::with_capacity(points.len());
    let mut out_dir = None;
    for (v, w) in points {
        let mut o = args.run.o.clone();
        let swept = |n: &str| args.param == n || args.param2.as_deref() == Some(n);
        if swept("r") && !swept("equilibrium") && !swept("k") && o.equilibrium.is_some() {
            // Let K follow r through the map's default equilibrium.
            o.scheme.get_or_insert(SchemeKind::StabilizeK);
            o.equilibrium = None;
        }
        set_param(&mut o, &args.param, v)?;
        if let (Some(name), Some(w)) = (&args.param2, w) {
            set_param(&mut o, name, w)?;
        }
        let mut cfg = apply_overrides(base.clone(), &o)?;
        if o.seed.is_none() {
            cfg.apply_env()?;
        }
        cfg.validate()?;
        let verdict = analytic_verdict(&cfg);
        let s = cfg.run(false)?.summary;
        out_dir.get_or_insert_with(|| cfg.output.dir.clone());
        rows.push(SweepRow {
            param: args.param.clone(),
            value: v,
            param2: args.param2.clone(),
            value2: w,
            n_runs: s.n_runs,
            n_steps: s.n_steps,
            convergence_fraction: s.convergence_fraction,
            trapped_fraction: s.trapped_fraction,
            escaped_fraction: s.escaped_fraction,
            terminal_dev_mean: s.terminal_dev_mean,
            mean_log_slope: s.mean_log_slope,
            satisfied: verdict.map(|v| v.0),
            margin: verdict.map(|v| v.1),
        });
    }
    let dir = out_dir.unwrap_or_else(|| PathBuf::from("noisectl-out"));
    fs::create_dir_all(&dir)?;
    let mut w = create(&dir.join("sweep.csv"))?;
    write_rows(&mut w, &rows)?;
    w.flush()?;
    write_rows(std::io::stdout().lock(), &rows)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn values_parse() {
        assert_eq!(parse_values("1,2.5,3").unwrap(), vec![1.0, 2.5, 3.0]);
        let v = parse_values("2:2.5:0.1").unwrap();
        assert_eq!(v.len(), 6);
        assert!((v[5] - 2.5).abs() < 1e-12);
        assert!(parse_values("2:1:0.1").is_err());
        assert!(parse_values("x").is_err());
    }

    #[test]
    fn equilibrium_flag_implies_stabilize_k() {
        let o = Overrides {
            map: Some(MapKind::Ricker),
            r: Some(2.2),
            noise: Some(NoiseKind::Poly),
            s: Some(0),
            sigma: Some(1.0),
            equilibrium: Some(1.0),
            ..Overrides::default()
        };
        let cfg = apply_overrides(None, &o).unwrap();
        assert_eq!(cfg.scheme, ControlScheme::StabilizeK { k: 1.0, sigma: 1.0 });
    }

    #[test]
    fn logistic_equilibrium_follows_r() {
        let base = ExperimentConfig::new(
            MapSpec::Logistic { r: 3.0 },
            NoiseSpec::PolynomialSymmetric { s: 0 },
            ControlScheme::StabilizeK { k: 2.0 / 3.0, sigma: 1.0 },
        );
        let o = Overrides { r: Some(3.3), ..Overrides::default() };
        let cfg = apply_overrides(Some(base), &o).unwrap();
        match cfg.scheme {
            ControlScheme::StabilizeK { k, .. } => assert!((k - (1.0 - 1.0 / 3.3)).abs() < 1e-15),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn destabilize_profile_defaults_follow_noise() {
        let o = Overrides {
            map: Some(MapKind::BevertonHolt),
            noise: Some(NoiseKind::Discrete),
            l: Some(3),
            scheme: Some(SchemeKind::DestabilizeZero),
            truncation_b: Some(2.0),
            ..Overrides::default()
        };
        let cfg = apply_overrides(None, &o).unwrap();
        assert_eq!(
            cfg.scheme,
            ControlScheme::DestabilizeZero {
                profile: SigmaProfile::DiscreteBound { l: 3, margin: 0.01 },
                truncation_b: Some(2.0),
                clamp: None,
            }
        );
    }

    #[test]
    fn missing_map_is_a_config_error() {
        let err = apply_overrides(None, &Overrides::default()).unwrap_err();
        assert!(err.is_validation());
    }
}
