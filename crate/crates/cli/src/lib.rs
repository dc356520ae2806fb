//! Command-line front end: dataset generation, score training, optimization
//! runs, validation sweeps and sampling, all driven by a config file.

pub mod config;

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{value_parser, Arg, ArgAction, Command};

use msopt::control::{self, NormalizedObjective, ReferenceKind, SystemModel, TrajectoryDataset};
use msopt::io;
use msopt::manifolds::Manifold;
use msopt::objectives::{BrockettObjective, ConstantObjective, LinearObjective, Objective};
use msopt::optim::{
    dlf_run, drgd_run, landing_descent_run, riemannian_gd_baseline, DlfConfig, DrgdConfig, ExactManifoldScore,
    RunOutcome, ScoreOps, Termination,
};
use msopt::rng;
use msopt::score::{
    dsm_train, ve_reverse_sample, DsmTrainConfig, EmpiricalScoreOracle, MlpScoreOracle, QuadratureScoreOracle,
    ScoreMlp, VeSchedule,
};
use msopt::validation::{feasibility_optimality_report, landing_check, rate_sweep, Baseline};

pub use config::{ConfigError, ExperimentConfig, Subcommand};

/// Why a run stopped early, with its exit code.
#[derive(Debug)]
pub enum Failure {
    /// Usage or configuration problem; exit 2.
    Config(String),
    /// Numerical abort or failed `--assert` threshold; exit 1.
    Run(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Config(_) => 2,
            Failure::Run(_) => 1,
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.0)
    }
}

impl From<msopt::Error> for Failure {
    fn from(e: msopt::Error) -> Self {
        use msopt::Error as E;
        match e {
            E::Io(_) | E::Parse(_) | E::InvalidParameter(_) | E::DimensionMismatch { .. } | E::Unsupported(_)
            | E::EmptyInput(_) => Failure::Config(e.to_string()),
            other => Failure::Run(other.to_string()),
        }
    }
}

type Outcome<T> = std::result::Result<T, Failure>;

fn config_err<T>(msg: impl Into<String>) -> Outcome<T> {
    Err(Failure::Config(msg.into()))
}

pub fn command() -> Command {
    let mut cmd = Command::new("msopt")
        .version(env!("CARGO_PKG_VERSION"))
        .about("Optimization on data-defined manifolds with denoising score oracles")
        .subcommand_required(true)
        .arg_required_else_help(true)
        .after_help("Set MSOPT_THREADS to cap the number of worker threads.");
    for sub in Subcommand::ALL {
        cmd = cmd.subcommand(
            Command::new(sub.name())
                .about(sub.about())
                .arg(
                    Arg::new("config")
                        .long("config")
                        .value_name("PATH")
                        .required(true)
                        .value_parser(value_parser!(PathBuf))
                        .help("experiment config file"),
                )
                .arg(
                    Arg::new("seed")
                        .long("seed")
                        .value_name("N")
                        .value_parser(value_parser!(u64))
                        .help("override [experiment] seed"),
                )
                .arg(
                    Arg::new("out")
                        .long("out")
                        .value_name("DIR")
                        .value_parser(value_parser!(PathBuf))
                        .help("override [output] dir"),
                )
                .arg(
                    Arg::new("assert")
                        .long("assert")
                        .action(ArgAction::SetTrue)
                        .help("exit 1 when the configured thresholds are violated"),
                )
                .after_help(config::keys_help(sub)),
        );
    }
    cmd
}

fn configure_threads() -> Outcome<()> {
    let Ok(v) = std::env::var("MSOPT_THREADS") else {
        return Ok(());
    };
    let n: usize = match v.trim().parse() {
        Ok(n) if n > 0 => n,
        _ => return config_err(format!("MSOPT_THREADS must be a positive integer, got {v:?}")),
    };
    // A second initialization in the same process keeps the first pool.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// Parses `argv` (including the program name), runs the experiment and
/// returns the process exit code.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let matches = match command().try_get_matches_from(argv) {
        Ok(m) => m,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => 2,
                _ => 2,
            };
            let _ = e.print();
            return code;
        }
    };
    let (name, sub_m) = matches.subcommand().expect("subcommand is required");
    let sub = Subcommand::parse(name).expect("subcommands come from Subcommand::ALL");
    let config_path: &PathBuf = sub_m.get_one("config").expect("required");
    let result = configure_threads().and_then(|()| {
        let mut cfg = ExperimentConfig::load(sub, config_path)?;
        if let Some(seed) = sub_m.get_one::<u64>("seed") {
            cfg.set("experiment.seed", seed.to_string());
        }
        if let Some(out) = sub_m.get_one::<PathBuf>("out") {
            cfg.set("output.dir", out.display().to_string());
        }
        run(&cfg, sub_m.get_flag("assert"))
    });
    match result {
        Ok(()) => 0,
        Err(f) => {
            let msg = match &f {
                Failure::Config(m) => format!("configuration error: {m}"),
                Failure::Run(m) => format!("run failed: {m}"),
            };
            eprintln!("msopt {name}: {msg}");
            if matches!(f, Failure::Config(_)) {
                eprintln!("run `msopt {name} --help` for the accepted keys");
            }
            f.exit_code()
        }
    }
}

/// Runs one experiment and writes its manifest.
pub fn run(cfg: &ExperimentConfig, assert: bool) -> Outcome<()> {
    let start = Instant::now();
    let out = PathBuf::from(cfg.str("output.dir")?);
    std::fs::create_dir_all(&out).map_err(|e| Failure::Config(format!("output.dir {}: {e}", out.display())))?;
    let result = match cfg.subcommand {
        Subcommand::GenerateData => generate_data(cfg, &out),
        Subcommand::TrainScore => train_score(cfg, &out),
        Subcommand::Optimize => optimize(cfg, &out, assert),
        Subcommand::Validate => validate(cfg, &out, assert),
        Subcommand::Sample => sample(cfg, &out, assert),
    };
    {
        let status = match &result {
            Ok(()) => "ok".to_string(),
            Err(Failure::Config(m)) | Err(Failure::Run(m)) => format!("failed: {}", m.replace('\n', " ")),
        };
        write_manifest(cfg, &out, start.elapsed().as_secs_f64(), &status)?;
    }
    result
}

fn write_manifest(cfg: &ExperimentConfig, out: &Path, wall: f64, status: &str) -> Outcome<()> {
    let mut text = String::new();
    let _ = writeln!(text, "# msopt manifest");
    let _ = writeln!(text, "# subcommand = {}", cfg.subcommand.name());
    let _ = writeln!(text, "# msopt_version = {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(text, "# core_version = {}", msopt::VERSION);
    let _ = writeln!(text, "# wall_time_s = {wall:.3}");
    let _ = writeln!(text, "# status = {status}");
    text.push_str(&cfg.render());
    io::write_text(&out.join("manifest.txt"), &text)?;
    Ok(())
}

fn manifold_from(cfg: &ExperimentConfig) -> Outcome<Manifold> {
    let kind = cfg.str("manifold.kind")?;
    let m = match kind {
        "circle" => Manifold::circle(cfg.f64("manifold.radius")?),
        "sphere" => Manifold::sphere(cfg.usize("manifold.dim")?, cfg.f64("manifold.radius")?),
        "orthogonal" => Manifold::orthogonal(cfg.usize("manifold.n")?),
        other => {
            return config_err(format!(
                "manifold.kind: unknown manifold {other:?} (expected circle, sphere or orthogonal)"
            ))
        }
    };
    Ok(m?)
}

fn exclusive_geometry(cfg: &ExperimentConfig) -> Outcome<bool> {
    match (cfg.get("manifold.kind"), cfg.get("manifold.system")) {
        (Some(_), Some(_)) => config_err("set either manifold.kind or manifold.system, not both"),
        (_, system) => Ok(system.is_some()),
    }
}

fn require_path(cfg: &ExperimentConfig, key: &str) -> Outcome<PathBuf> {
    let p = PathBuf::from(cfg.str(key)?);
    if !p.exists() {
        return config_err(format!("`{key}`: {} does not exist", p.display()));
    }
    Ok(p)
}

/// Points for training or an empirical oracle; trajectory datasets are
/// returned in normalized coordinates together with the dataset.
fn load_points(path: &Path) -> Outcome<(Vec<Vec<f64>>, Option<TrajectoryDataset>)> {
    if path.is_dir() {
        let ds = TrajectoryDataset::load(path)?;
        Ok((ds.normalized_rows(), Some(ds)))
    } else {
        let pts = io::read_points(path)?;
        if pts.is_empty() {
            return config_err(format!("{}: no data points", path.display()));
        }
        Ok((pts, None))
    }
}

fn generate_data(cfg: &ExperimentConfig, out: &Path) -> Outcome<()> {
    let seed = cfg.u64("experiment.seed")?;
    if exclusive_geometry(cfg)? {
        let system = SystemModel::by_name(cfg.str("manifold.system")?)?;
        let horizon = cfg.usize("manifold.horizon")?;
        let ds = control::generate_dataset(&system, horizon, cfg.usize("manifold.trajectories")?, seed)?;
        ds.save(&out.join("dataset"))?;
        let summary = format!(
            "system: {}\nhorizon: {horizon}\ntrajectories: {}\ndimension: {}\nmax re-simulation gap: {:e}\n",
            system.name(),
            ds.len(),
            ds.dim(),
            ds.max_feasibility_gap()?
        );
        io::write_text(&out.join("summary.txt"), &summary)?;
    } else {
        let m = manifold_from(cfg)?;
        let pts = m.sample_uniform(cfg.usize("manifold.samples")?, seed);
        io::write_points(&out.join("data.csv"), &pts)?;
        io::write_text(
            &out.join("summary.txt"),
            &format!("manifold: {}\nsamples: {}\n", m.name(), pts.len()),
        )?;
    }
    Ok(())
}

fn train_score(cfg: &ExperimentConfig, out: &Path) -> Outcome<()> {
    let (points, _) = load_points(&require_path(cfg, "oracle.data")?)?;
    let dim = points[0].len();
    let mut widths = vec![dim + 1];
    widths.extend(cfg.usize_list("algorithm.hidden")?);
    widths.push(dim);
    let seed = cfg.u64("experiment.seed")?;
    let mlp = ScoreMlp::new(&widths, seed)?;
    let tc = DsmTrainConfig {
        t_max: cfg.f64("algorithm.t_max")?,
        t_min: cfg.f64("algorithm.t_min")?,
        epochs: cfg.usize("algorithm.epochs")?,
        batch: cfg.usize("algorithm.batch")?,
        lr_hi: cfg.f64("algorithm.lr_hi")?,
        lr_lo: cfg.f64("algorithm.lr_lo")?,
        seed,
    };
    let trained = dsm_train(&points, mlp, &tc)?;
    trained.mlp.save(&out.join("model.bin"))?;
    let rows: Vec<Vec<f64>> = trained
        .loss_trace
        .iter()
        .enumerate()
        .map(|(i, l)| vec![i as f64, *l])
        .collect();
    io::write_text(&out.join("loss.csv"), &io::render_csv(&["epoch", "loss"], &rows))?;
    let last = trained.loss_trace.last().copied().unwrap_or(f64::NAN);
    io::write_text(
        &out.join("summary.txt"),
        &format!(
            "training points: {}\nwidths: {widths:?}\nparameters: {}\nepochs: {}\nfinal epoch loss: {last:.6e}\n",
            points.len(),
            trained.mlp.parameter_count(),
            tc.epochs
        ),
    )?;
    Ok(())
}

fn score_oracle(
    cfg: &ExperimentConfig,
    manifold: Option<&Manifold>,
    data: Option<&[Vec<f64>]>,
) -> Outcome<Box<dyn ScoreOps>> {
    let sigma = cfg.f64("oracle.sigma")?;
    Ok(match cfg.str("oracle.kind")? {
        "exact" => match manifold {
            Some(m) => Box::new(ExactManifoldScore::new(*m)),
            None => return config_err("oracle.kind = exact needs manifold.kind"),
        },
        "quadrature" => match manifold {
            Some(m) => Box::new(QuadratureScoreOracle::new(m, cfg.usize("oracle.nodes")?, sigma)?),
            None => return config_err("oracle.kind = quadrature needs manifold.kind = circle"),
        },
        "empirical" => match data {
            Some(d) => Box::new(EmpiricalScoreOracle::new(d, sigma)?),
            None => return config_err("oracle.kind = empirical needs oracle.data"),
        },
        "mlp" => {
            let mlp = ScoreMlp::load(&require_path(cfg, "oracle.model")?)?;
            Box::new(MlpScoreOracle::new(mlp, sigma)?)
        }
        other => {
            return config_err(format!(
                "oracle.kind: unknown oracle {other:?} (expected exact, empirical, quadrature or mlp)"
            ))
        }
    })
}

fn argmin_point(f: &dyn Objective, pts: &[Vec<f64>]) -> Outcome<(Vec<f64>, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, p) in pts.iter().enumerate() {
        let v = f.value(p)?;
        if best.is_none_or(|(_, b)| v < b) {
            best = Some((i, v));
        }
    }
    let (i, v) = best.ok_or_else(|| Failure::Config("no data points for argmin start".into()))?;
    Ok((pts[i].clone(), v))
}

fn optimize(cfg: &ExperimentConfig, out: &Path, assert: bool) -> Outcome<()> {
    let seed = cfg.u64("experiment.seed")?;
    let is_system = exclusive_geometry(cfg)?;
    let data = match cfg.get("oracle.data") {
        Some(_) => Some(load_points(&require_path(cfg, "oracle.data")?)?),
        None => None,
    };
    let manifold = if is_system { None } else { Some(manifold_from(cfg)?) };

    // Objective in the coordinates the oracle works in.
    let objective_kind = cfg.str("objective.kind")?;
    let dataset = data.as_ref().and_then(|(_, ds)| ds.as_ref());
    let tracking;
    let normalized;
    let owned: Box<dyn Objective>;
    let f: &dyn Objective = if is_system {
        let system = SystemModel::by_name(cfg.str("manifold.system")?)?;
        let Some(ds) = dataset else {
            return config_err("control experiments need oracle.data pointing at a trajectory dataset directory");
        };
        if ds.system.kind != system.kind {
            return config_err(format!(
                "manifold.system = {} but the dataset was generated for {}",
                system.name(),
                ds.system.name()
            ));
        }
        if objective_kind != "tracking" {
            return config_err("control experiments use objective.kind = tracking");
        }
        let reference = cfg.str("objective.reference")?;
        let r = match ReferenceKind::parse(reference) {
            Ok(kind) => ds.system.reference(kind, ds.horizon, cfg.f64("objective.amplitude")?),
            Err(_) if Path::new(reference).is_file() => {
                control::read_reference(Path::new(reference), ds.system.output_dim(), ds.horizon)?
            }
            Err(e) => return config_err(format!("objective.reference: {e}")),
        };
        tracking = ds.system.tracking_objective(r, ds.horizon)?;
        normalized = NormalizedObjective {
            inner: &tracking,
            norm: &ds.normalization,
        };
        &normalized
    } else {
        let m = manifold.as_ref().expect("manifold geometry");
        owned = match objective_kind {
            "brockett" => match m {
                Manifold::Orthogonal { n } => Box::new(BrockettObjective::random_instance(*n, seed)?),
                _ => return config_err("objective.kind = brockett needs manifold.kind = orthogonal"),
            },
            "linear" => Box::new(LinearObjective::new(cfg.f64_list("objective.direction")?)?),
            "constant" => Box::new(ConstantObjective {
                dim: m.ambient_dim(),
                value: 0.0,
            }),
            "tracking" => return config_err("objective.kind = tracking needs manifold.system"),
            other => {
                return config_err(format!(
                    "objective.kind: unknown objective {other:?} (expected brockett, linear, tracking or constant)"
                ))
            }
        };
        owned.as_ref()
    };

    let points = data.as_ref().map(|(p, _)| p.as_slice());
    let oracle = score_oracle(cfg, manifold.as_ref(), points)?;
    let dim = oracle.ambient_dim();
    if f.dim() != dim {
        return config_err(format!("objective dimension {} does not match oracle dimension {dim}", f.dim()));
    }

    let (mut x0, dataset_best) = match cfg.str("algorithm.start")? {
        "argmin" => match points {
            Some(p) => {
                let (x, v) = argmin_point(f, p)?;
                (x, Some(v))
            }
            None => return config_err("algorithm.start = argmin needs oracle.data"),
        },
        "sample" => match &manifold {
            Some(m) => (m.sample_uniform(1, seed).remove(0), None),
            None => return config_err("algorithm.start = sample needs manifold.kind"),
        },
        other => return config_err(format!("algorithm.start: expected argmin or sample, got {other:?}")),
    };
    let offset = cfg.f64("algorithm.start_offset")?;
    if offset != 0.0 {
        let Some(m) = &manifold else {
            return config_err("algorithm.start_offset needs manifold.kind");
        };
        let p = m.project(&x0)?;
        let n = m.random_unit_normal(&p, &mut rng::stream(seed, "start-offset"));
        x0 = msopt::numerics::axpy(&x0, offset * m.safe_tube_radius(), &n);
    }
    if x0.len() != dim {
        return config_err(format!("start point has dimension {} but the oracle expects {dim}", x0.len()));
    }

    let gamma = cfg.f64("algorithm.gamma")?;
    let max_steps = cfg.usize("algorithm.max_steps")?;
    let tol = cfg.f64("algorithm.stop_grad_tol")?;
    let eta = cfg.f64("algorithm.eta")?;
    let baseline = manifold.as_ref();
    let mut outcome: RunOutcome = match cfg.str("algorithm.kind")? {
        "drgd" => drgd_run(
            oracle.as_ref(),
            f,
            &x0,
            &DrgdConfig {
                gamma,
                max_steps,
                stop_grad_tol: tol,
            },
            baseline,
        )?,
        "dlf" => dlf_run(
            oracle.as_ref(),
            f,
            &x0,
            &DlfConfig {
                eta,
                t_step: cfg.f64("algorithm.t_step")?,
                max_steps,
                stop_grad_tol: tol,
            },
            baseline,
        )?,
        "landing_descent" => landing_descent_run(oracle.as_ref(), f, &x0, eta, gamma, max_steps, baseline)?,
        "riemannian_gd" => match baseline {
            Some(m) => riemannian_gd_baseline(m, f, &m.project(&x0)?, gamma, max_steps, tol)?,
            None => return config_err("algorithm.kind = riemannian_gd needs manifold.kind"),
        },
        other => {
            return config_err(format!(
                "algorithm.kind: unknown algorithm {other:?} (expected drgd, dlf, landing_descent or riemannian_gd)"
            ))
        }
    };
    outcome.record.push_meta("seed", seed);
    outcome.record.push_meta("sigma", cfg.str("oracle.sigma")?);

    // Final point in raw coordinates.
    let final_point = match dataset {
        Some(ds) if is_system => ds.normalization.invert(&outcome.final_point),
        _ => outcome.final_point.clone(),
    };
    let report = match (&manifold, dataset) {
        (Some(m), _) => feasibility_optimality_report(&outcome.record, &final_point, Baseline::Manifold(m), dataset_best)?,
        (None, Some(ds)) => feasibility_optimality_report(
            &outcome.record,
            &final_point,
            Baseline::System {
                system: &ds.system,
                horizon: ds.horizon,
            },
            dataset_best,
        )?,
        (None, None) => unreachable!("control runs always have a dataset"),
    };
    outcome.record.save(out, "run")?;
    io::write_points(&out.join("final_point.csv"), &[final_point])?;
    io::write_text(&out.join("report.csv"), &report.to_csv())?;
    io::write_text(
        &out.join("summary.txt"),
        &format!(
            "algorithm: {}\noracle: {}\ntermination: {}\n{}",
            cfg.str("algorithm.kind")?,
            oracle.kind(),
            outcome.termination,
            report.summary()
        ),
    )?;

    if let Termination::Aborted(why) = &outcome.termination {
        return Err(Failure::Run(format!("optimizer aborted: {why}")));
    }
    if assert {
        let mut violations = Vec::new();
        let feasibility = report.backtest_gap.unwrap_or(report.final_feasibility);
        if let Some(limit) = cfg.opt_f64("experiment.assert_max_feasibility")? {
            if !(feasibility <= limit) {
                violations.push(format!("feasibility {feasibility:e} > {limit:e}"));
            }
        }
        if let Some(limit) = cfg.opt_f64("experiment.assert_max_objective")? {
            if !(report.final_objective <= limit) {
                violations.push(format!("objective {:e} > {limit:e}", report.final_objective));
            }
        }
        if !violations.is_empty() {
            return Err(Failure::Run(format!("assertion failed: {}", violations.join("; "))));
        }
    }
    Ok(())
}

fn validate(cfg: &ExperimentConfig, out: &Path, assert: bool) -> Outcome<()> {
    let m = manifold_from(cfg)?;
    let seed = cfg.u64("experiment.seed")?;
    match cfg.str("experiment.check")? {
        "rate_sweep" => {
            let nodes = cfg.usize("oracle.nodes")?;
            let samples = m.sample_uniform(cfg.usize("manifold.samples")?, seed);
            let kind = cfg.str("oracle.kind")?.to_string();
            if !matches!(kind.as_str(), "exact" | "quadrature" | "empirical") {
                return config_err(format!(
                    "oracle.kind: rate sweeps support exact, quadrature or empirical, got {kind:?}"
                ));
            }
            let family = |sigma: f64| -> msopt::Result<Box<dyn ScoreOps>> {
                Ok(match kind.as_str() {
                    "exact" => Box::new(ExactManifoldScore::new(m)),
                    "quadrature" => Box::new(QuadratureScoreOracle::new(&m, nodes, sigma)?),
                    _ => Box::new(EmpiricalScoreOracle::new(&samples, sigma)?),
                })
            };
            let rep = rate_sweep(
                &family,
                &m,
                &cfg.f64_list("algorithm.offsets")?,
                &cfg.f64_list("algorithm.sigmas")?,
                cfg.usize("algorithm.points")?,
                seed,
            )?;
            io::write_text(&out.join("rate_sweep.csv"), &rep.to_csv())?;
            io::write_text(&out.join("summary.txt"), &rep.summary())?;
            if assert {
                let (lo, hi) = (cfg.f64("experiment.assert_slope_min")?, cfg.f64("experiment.assert_slope_max")?);
                let band = |s: f64| lo <= s && s <= hi;
                if !(band(rep.mean_slope) && band(rep.jacobian_slope) && rep.mean_monotone() && rep.jacobian_monotone()) {
                    return Err(Failure::Run(format!(
                        "assertion failed: slopes {:.3} / {:.3} outside [{lo}, {hi}] or errors not monotone",
                        rep.mean_slope, rep.jacobian_slope
                    )));
                }
            }
        }
        "landing" => {
            let p = m.sample_uniform(1, seed).remove(0);
            let n = m.random_unit_normal(&p, &mut rng::stream(seed, "landing-start"));
            let x0 = msopt::numerics::axpy(&p, cfg.f64("algorithm.start_distance")?, &n);
            let rep = landing_check(
                &m,
                cfg.f64("algorithm.eta")?,
                &x0,
                cfg.f64("algorithm.t_end")?,
                cfg.f64("algorithm.euler_step")?,
            )?;
            io::write_text(&out.join("landing.csv"), &rep.to_csv())?;
            io::write_text(&out.join("summary.txt"), &rep.summary())?;
            let tol = cfg.f64("experiment.assert_max_deviation")?;
            if assert && !(rep.max_rel_deviation <= tol && rep.measured_monotone()) {
                return Err(Failure::Run(format!(
                    "assertion failed: landing deviation {:.3e} exceeds {tol} or decay not monotone",
                    rep.max_rel_deviation
                )));
            }
        }
        other => return config_err(format!("experiment.check: expected rate_sweep or landing, got {other:?}")),
    }
    Ok(())
}

fn sample(cfg: &ExperimentConfig, out: &Path, assert: bool) -> Outcome<()> {
    let mlp = ScoreMlp::load(&require_path(cfg, "oracle.model")?)?;
    let schedule = VeSchedule {
        t_max: cfg.f64("algorithm.t_max")?,
        t_min: cfg.f64("algorithm.t_min")?,
    };
    let mut samples = ve_reverse_sample(
        &mlp,
        cfg.usize("algorithm.count")?,
        cfg.usize("algorithm.steps")?,
        schedule,
        cfg.u64("experiment.seed")?,
    )?;
    let data = match cfg.get("oracle.data") {
        Some(_) => {
            let path = require_path(cfg, "oracle.data")?;
            Some(if path.is_dir() {
                let ds = TrajectoryDataset::load(&path)?;
                samples = samples.iter().map(|s| ds.normalization.invert(s)).collect();
                ds.rows
            } else {
                io::read_points(&path)?
            })
        }
        None => None,
    };
    io::write_points(&out.join("samples.csv"), &samples)?;
    let mut summary = format!("samples: {}\n", samples.len());
    let near_fraction = data.as_ref().map(|d| {
        let radius = cfg.f64("experiment.assert_near_radius").unwrap_or(f64::NAN);
        let near = samples
            .iter()
            .filter(|s| d.iter().any(|p| msopt::numerics::dist(s, p) <= radius))
            .count();
        near as f64 / samples.len().max(1) as f64
    });
    if let Some(frac) = near_fraction {
        let _ = writeln!(summary, "fraction near data: {frac:.4}");
    }
    io::write_text(&out.join("summary.txt"), &summary)?;
    if assert {
        let Some(frac) = near_fraction else {
            return config_err("--assert for sample needs oracle.data to compare against");
        };
        let need = cfg.f64("experiment.assert_near_fraction")?;
        if frac < need {
            return Err(Failure::Run(format!("assertion failed: only {frac:.3} of samples near the data (need {need})")));
        }
    }
    Ok(())
}
