//! Flat `key = value` experiment configuration with `[section]` headers.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Subcommand {
    GenerateData,
    TrainScore,
    Optimize,
    Validate,
    Sample,
}

impl Subcommand {
    pub const ALL: [Subcommand; 5] = [
        Subcommand::GenerateData,
        Subcommand::TrainScore,
        Subcommand::Optimize,
        Subcommand::Validate,
        Subcommand::Sample,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Subcommand::GenerateData => "generate-data",
            Subcommand::TrainScore => "train-score",
            Subcommand::Optimize => "optimize",
            Subcommand::Validate => "validate",
            Subcommand::Sample => "sample",
        }
    }

    pub fn about(self) -> &'static str {
        match self {
            Subcommand::GenerateData => "Sample a manifold or simulate a trajectory dataset",
            Subcommand::TrainScore => "Train a score network by denoising score matching",
            Subcommand::Optimize => "Run a score-based optimizer and write its run record",
            Subcommand::Validate => "Run an error-rate sweep or the exact landing check",
            Subcommand::Sample => "Draw samples from a trained score network",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|s| s.name() == name)
    }
}

pub const SECTIONS: [&str; 6] = ["experiment", "oracle", "manifold", "objective", "algorithm", "output"];

use Subcommand::{GenerateData as G, Optimize as O, Sample as S, TrainScore as T, Validate as V};

pub struct KeySpec {
    pub section: &'static str,
    pub key: &'static str,
    pub default: Option<&'static str>,
    pub used_by: &'static [Subcommand],
    pub doc: &'static str,
}

const fn entry(
    section: &'static str,
    key: &'static str,
    default: Option<&'static str>,
    used_by: &'static [Subcommand],
    doc: &'static str,
) -> KeySpec {
    KeySpec {
        section,
        key,
        default,
        used_by,
        doc,
    }
}

/// Every accepted key. Parsing, defaults, validation, the manifest echo and
/// `--help` are all generated from this table.
pub const SCHEMA: &[KeySpec] = &[
    entry("experiment", "seed", Some("0"), &[G, T, O, V, S], "master seed for all random streams"),
    entry("experiment", "check", Some("rate_sweep"), &[V], "rate_sweep | landing"),
    entry("experiment", "assert_max_feasibility", None, &[O], "--assert: final feasibility must not exceed this"),
    entry("experiment", "assert_max_objective", None, &[O], "--assert: final objective must not exceed this"),
    entry("experiment", "assert_slope_min", Some("0.7"), &[V], "--assert: lower end of the log-log slope band"),
    entry("experiment", "assert_slope_max", Some("1.4"), &[V], "--assert: upper end of the log-log slope band"),
    entry("experiment", "assert_max_deviation", Some("0.05"), &[V], "--assert: landing law relative tolerance"),
    entry("experiment", "assert_near_fraction", Some("0.9"), &[S], "--assert: fraction of samples that must lie near the data"),
    entry("experiment", "assert_near_radius", Some("0.15"), &[S], "--assert: distance counted as near a data point"),
    entry("oracle", "kind", None, &[O, V], "exact | empirical | quadrature | mlp (rate sweeps: exact | empirical | quadrature)"),
    entry("oracle", "sigma", Some("0.05"), &[O], "noise level of the score oracle"),
    entry("oracle", "data", None, &[T, O, S], "points CSV or trajectory dataset directory"),
    entry("oracle", "nodes", Some("4096"), &[O, V], "quadrature nodes on the circle"),
    entry("oracle", "model", None, &[O, S], "trained score network file"),
    entry("manifold", "kind", None, &[G, O, V], "circle | sphere | orthogonal"),
    entry("manifold", "radius", Some("1"), &[G, O, V], "circle or sphere radius"),
    entry("manifold", "dim", Some("3"), &[G, O, V], "ambient dimension of the sphere"),
    entry("manifold", "n", Some("5"), &[G, O, V], "matrix size for the orthogonal group"),
    entry("manifold", "samples", Some("4000"), &[G, V], "number of uniform manifold samples"),
    entry("manifold", "system", None, &[G, O], "unicycle | double_pendulum (control experiments)"),
    entry("manifold", "horizon", Some("20"), &[G], "trajectory horizon N_h"),
    entry("manifold", "trajectories", Some("2000"), &[G], "number of simulated trajectories"),
    entry("objective", "kind", None, &[O], "brockett | linear | tracking | constant"),
    entry("objective", "direction", None, &[O], "comma-separated vector a of the linear objective a.x"),
    entry("objective", "reference", Some("circle_arc"), &[O], "sinusoid | circle_arc | figure_eight | path to a reference CSV"),
    entry("objective", "amplitude", Some("0.4"), &[O], "amplitude of a built-in reference"),
    entry("algorithm", "kind", None, &[O], "drgd | dlf | landing_descent | riemannian_gd"),
    entry("algorithm", "gamma", Some("1e-3"), &[O], "step size of drgd, landing_descent and riemannian_gd"),
    entry("algorithm", "eta", Some("3000"), &[O, V], "landing gain"),
    entry("algorithm", "t_step", Some("1e-4"), &[O], "Euler step of dlf"),
    entry("algorithm", "max_steps", Some("5000"), &[O], "iteration budget"),
    entry("algorithm", "stop_grad_tol", Some("1e-8"), &[O], "early stop when the update direction is this small"),
    entry("algorithm", "start", Some("argmin"), &[O], "argmin (best data point) | sample (uniform manifold point)"),
    entry("algorithm", "start_offset", Some("0"), &[O], "push the start along a random normal by this fraction of the safe tube radius"),
    entry("algorithm", "epochs", Some("1000"), &[T], "training epochs of ceil(N / batch) steps"),
    entry("algorithm", "batch", Some("256"), &[T], "minibatch size"),
    entry("algorithm", "lr_hi", Some("1e-3"), &[T], "initial learning rate of the cosine schedule"),
    entry("algorithm", "lr_lo", Some("5e-5"), &[T], "final learning rate of the cosine schedule"),
    entry("algorithm", "t_max", Some("3"), &[T, S], "largest diffusion time T"),
    entry("algorithm", "t_min", Some("1e-4"), &[T, S], "early-stopping time"),
    entry("algorithm", "hidden", Some("128,128,128"), &[T], "hidden layer widths"),
    entry("algorithm", "count", Some("1000"), &[S], "number of samples"),
    entry("algorithm", "steps", Some("1000"), &[S], "reverse-diffusion steps"),
    entry("algorithm", "sigmas", Some("0.2,0.1,0.05,0.025,0.0125"), &[V], "decreasing noise grid of the rate sweep"),
    entry("algorithm", "offsets", Some("0.3"), &[V], "test offsets as fractions of the safe tube radius"),
    entry("algorithm", "points", Some("64"), &[V], "manifold points per sweep"),
    entry("algorithm", "t_end", Some("3"), &[V], "landing check horizon"),
    entry("algorithm", "euler_step", Some("1e-4"), &[V], "landing check Euler step"),
    entry("algorithm", "start_distance", Some("0.3"), &[V], "landing check initial distance to the manifold"),
    entry("output", "dir", Some("out"), &[G, T, O, V, S], "artifact directory"),
];

/// Keys that must be set (groups are alternatives: any one member suffices).
fn required(sub: Subcommand) -> &'static [&'static [&'static str]] {
    match sub {
        G => &[&["manifold.kind", "manifold.system"]],
        T => &[&["oracle.data"]],
        O => &[
            &["oracle.kind"],
            &["manifold.kind", "manifold.system"],
            &["objective.kind"],
            &["algorithm.kind"],
        ],
        V => &[&["manifold.kind"]],
        S => &[&["oracle.model"]],
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn err<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

fn lookup_spec(section: &str, key: &str) -> Option<&'static KeySpec> {
    SCHEMA.iter().find(|s| s.section == section && s.key == key)
}

/// Fully resolved configuration: explicit values plus defaults.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExperimentConfig {
    pub subcommand: Subcommand,
    values: BTreeMap<String, String>,
}

impl ExperimentConfig {
    pub fn parse(sub: Subcommand, text: &str) -> Result<Self, ConfigError> {
        let mut section: Option<&str> = None;
        let mut seen: BTreeMap<String, usize> = BTreeMap::new();
        let mut values = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let n = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| ConfigError(format!("line {n}: malformed section header {line:?}")))?
                    .trim();
                match SECTIONS.iter().find(|s| **s == name) {
                    Some(s) => section = Some(s),
                    None => {
                        return err(format!(
                            "line {n}: unknown section [{name}] (expected one of {})",
                            SECTIONS.map(|s| format!("[{s}]")).join(", ")
                        ))
                    }
                }
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| ConfigError(format!("line {n}: expected `key = value`, found {line:?}")))?;
            let (key, value) = (key.trim(), value.trim());
            let Some(sec) = section else {
                return err(format!("line {n}: key `{key}` appears before any [section] header"));
            };
            let Some(spec) = lookup_spec(sec, key) else {
                return err(format!("line {n}: unknown key `{key}` in [{sec}]"));
            };
            if !spec.used_by.contains(&sub) {
                return err(format!(
                    "line {n}: key `{sec}.{key}` is not used by {}",
                    sub.name()
                ));
            }
            let full = format!("{sec}.{key}");
            if let Some(first) = seen.insert(full.clone(), n) {
                return err(format!("line {n}: duplicate key `{full}` (first set on line {first})"));
            }
            if value.is_empty() {
                return err(format!("line {n}: key `{full}` has an empty value"));
            }
            values.insert(full, value.to_string());
        }
        let missing: Vec<String> = required(sub)
            .iter()
            .filter(|group| !group.iter().any(|k| values.contains_key(*k)))
            .map(|group| group.join(" or "))
            .collect();
        if !missing.is_empty() {
            return err(format!(
                "{} config is missing required keys: {}",
                sub.name(),
                missing.join(", ")
            ));
        }
        for spec in SCHEMA.iter().filter(|s| s.used_by.contains(&sub)) {
            if let Some(d) = spec.default {
                values
                    .entry(format!("{}.{}", spec.section, spec.key))
                    .or_insert_with(|| d.to_string());
            }
        }
        Ok(Self { subcommand: sub, values })
    }

    pub fn load(sub: Subcommand, path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(sub, &text).map_err(|e| ConfigError(format!("{}: {e}", path.display())))
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.values.insert(key.to_string(), value.into());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn str(&self, key: &str) -> Result<&str, ConfigError> {
        self.get(key)
            .ok_or_else(|| ConfigError(format!("missing required key `{key}`")))
    }

    pub fn f64(&self, key: &str) -> Result<f64, ConfigError> {
        let v = self.str(key)?;
        match v.parse::<f64>() {
            Ok(x) if x.is_finite() => Ok(x),
            _ => err(format!("`{key}`: expected a finite number, got {v:?}")),
        }
    }

    pub fn opt_f64(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        self.get(key).map(|_| self.f64(key)).transpose()
    }

    pub fn usize(&self, key: &str) -> Result<usize, ConfigError> {
        let v = self.str(key)?;
        v.parse()
            .map_err(|_| ConfigError(format!("`{key}`: expected a non-negative integer, got {v:?}")))
    }

    pub fn u64(&self, key: &str) -> Result<u64, ConfigError> {
        let v = self.str(key)?;
        v.parse()
            .map_err(|_| ConfigError(format!("`{key}`: expected a non-negative integer, got {v:?}")))
    }

    pub fn f64_list(&self, key: &str) -> Result<Vec<f64>, ConfigError> {
        self.str(key)?
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| ConfigError(format!("`{key}`: bad number {s:?}")))
            })
            .collect()
    }

    pub fn usize_list(&self, key: &str) -> Result<Vec<usize>, ConfigError> {
        self.str(key)?
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<usize>()
                    .map_err(|_| ConfigError(format!("`{key}`: bad integer {s:?}")))
            })
            .collect()
    }

    /// Canonical text form: every resolved key, grouped by section in schema
    /// order. Parsing it back yields an identical config.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for section in SECTIONS {
            let keys: Vec<&KeySpec> = SCHEMA
                .iter()
                .filter(|s| s.section == section && self.values.contains_key(&format!("{}.{}", s.section, s.key)))
                .collect();
            if keys.is_empty() {
                continue;
            }
            if !out.is_empty() {
                out.push('\n');
            }
            out.push_str(&format!("[{section}]\n"));
            for s in keys {
                out.push_str(&format!("{} = {}\n", s.key, self.values[&format!("{}.{}", s.section, s.key)]));
            }
        }
        out
    }
}

/// `--help` text listing every key a subcommand accepts.
pub fn keys_help(sub: Subcommand) -> String {
    let mut out = String::from("Config keys:\n");
    for section in SECTIONS {
        let keys: Vec<&KeySpec> = SCHEMA
            .iter()
            .filter(|s| s.section == section && s.used_by.contains(&sub))
            .collect();
        if keys.is_empty() {
            continue;
        }
        out.push_str(&format!("  [{section}]\n"));
        for s in keys {
            let default = s.default.map_or_else(String::new, |d| format!(" (default {d})"));
            out.push_str(&format!("    {:<24}{}{}\n", s.key, s.doc, default));
        }
    }
    let req: Vec<String> = required(sub).iter().map(|g| g.join(" or ")).collect();
    out.push_str(&format!("Required: {}\n", req.join(", ")));
    out
}
