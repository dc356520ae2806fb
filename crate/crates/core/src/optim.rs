//! Score-driven manifold optimizers: the denoising landing flow, denoising
//! Riemannian gradient descent, penalized landing descent, and exact
//! Riemannian gradient descent as a baseline.

use std::path::Path;

use crate::error::{Error, Result};
use crate::io;
use crate::manifolds::Manifold;
use crate::numerics;

pub use crate::objectives::Objective;
pub use crate::score::{ExactManifoldScore, Linearization, ScoreOps};

/// Column names of the per-iteration CSV.
pub const RECORD_HEADER: [&str; 6] = [
    "step",
    "objective",
    "surrogate_objective",
    "feasibility",
    "riem_grad_norm",
    "step_norm",
];

/// Euler discretization of `ẋ = −s′(x)ᵀ∇f(s(x)) + η(s(x) − x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DlfConfig {
    pub eta: f64,
    pub t_step: f64,
    pub max_steps: usize,
    /// Early stop once the drift norm falls below this.
    pub stop_grad_tol: f64,
}

impl Default for DlfConfig {
    fn default() -> Self {
        Self {
            eta: 3e3,
            t_step: 1e-4,
            max_steps: 10_000,
            stop_grad_tol: 1e-8,
        }
    }
}

impl DlfConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta >= 0.0 && self.eta.is_finite()) {
            return Err(Error::InvalidParameter(format!("eta must be >= 0, got {}", self.eta)));
        }
        if !(self.t_step > 0.0 && self.t_step.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "t_step must be > 0, got {}",
                self.t_step
            )));
        }
        Ok(())
    }
}

/// `x_{k+1} = s(x_k − γ s′(x_k)ᵀ∇f(x_k))`.
#[derive(Debug, Clone, PartialEq)]
pub struct DrgdConfig {
    pub gamma: f64,
    pub max_steps: usize,
    /// Early stop once `‖s′(x)ᵀ∇f(x)‖` falls below this.
    pub stop_grad_tol: f64,
}

impl Default for DrgdConfig {
    fn default() -> Self {
        Self {
            gamma: 1e-3,
            max_steps: 5000,
            stop_grad_tol: 1e-8,
        }
    }
}

impl DrgdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidParameter(format!("gamma must be > 0, got {}", self.gamma)));
        }
        Ok(())
    }
}

/// One row of a run record. Unavailable metrics are NaN.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunRow {
    pub step: usize,
    /// `f(x_k)`.
    pub objective: f64,
    /// `f(s(x_k))`.
    pub surrogate_objective: f64,
    /// Distance to the baseline manifold, or `‖x_k − s(x_k)‖` without one.
    pub feasibility: f64,
    /// `‖grad f(π(x_k))‖` on the baseline manifold.
    pub riem_grad_norm: f64,
    /// `‖x_k − x_{k−1}‖`, zero for the first row.
    pub step_norm: f64,
}

impl RunRow {
    fn to_vec(self) -> Vec<f64> {
        vec![
            self.step as f64,
            self.objective,
            self.surrogate_objective,
            self.feasibility,
            self.riem_grad_norm,
            self.step_norm,
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Termination {
    Budget,
    Converged,
    Aborted(String),
}

impl std::fmt::Display for Termination {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Termination::Budget => write!(f, "budget"),
            Termination::Converged => write!(f, "converged"),
            Termination::Aborted(why) => write!(f, "aborted: {why}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub rows: Vec<RunRow>,
    /// Ordered `key=value` pairs written to the sidecar file.
    pub metadata: Vec<(String, String)>,
}

impl RunRecord {
    fn new(algorithm: &str) -> Self {
        Self {
            rows: Vec::new(),
            metadata: vec![("algorithm".into(), algorithm.into())],
        }
    }

    pub fn push_meta(&mut self, key: &str, value: impl ToString) {
        self.metadata.push((key.into(), value.to_string()));
    }

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.metadata
            .iter()
            .rev()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn to_csv(&self) -> String {
        let rows: Vec<Vec<f64>> = self.rows.iter().map(|r| r.to_vec()).collect();
        let mut text = io::render_csv(&RECORD_HEADER, &rows);
        // The step column is an integer; keep it readable.
        text = text
            .lines()
            .enumerate()
            .map(|(i, line)| {
                if i == 0 {
                    line.to_string()
                } else {
                    let (_, rest) = line.split_once(',').unwrap_or((line, ""));
                    format!("{},{rest}", self.rows[i - 1].step)
                }
            })
            .collect::<Vec<_>>()
            .join("\n");
        text.push('\n');
        text
    }

    pub fn from_csv(text: &str) -> Result<Vec<RunRow>> {
        let (header, rows) = io::parse_csv(text, true)?;
        if header != RECORD_HEADER {
            return Err(Error::Parse(format!("unexpected run record header {header:?}")));
        }
        Ok(rows
            .into_iter()
            .map(|r| RunRow {
                step: r[0] as usize,
                objective: r[1],
                surrogate_objective: r[2],
                feasibility: r[3],
                riem_grad_norm: r[4],
                step_norm: r[5],
            })
            .collect())
    }

    /// Writes `<stem>.csv` and the sidecar `<stem>.meta.txt`.
    pub fn save(&self, dir: &Path, stem: &str) -> Result<()> {
        io::write_text(&dir.join(format!("{stem}.csv")), &self.to_csv())?;
        io::write_text(
            &dir.join(format!("{stem}.meta.txt")),
            &io::render_key_values(&self.metadata),
        )
    }

    pub fn last(&self) -> Option<&RunRow> {
        self.rows.last()
    }
}

/// Running mean of squared Riemannian gradient norms, `(1/(k+1)) Σ_{j≤k} ‖grad‖²`.
pub fn running_avg_sq_grad(rows: &[RunRow]) -> Vec<f64> {
    let mut acc = 0.0;
    rows.iter()
        .enumerate()
        .map(|(k, r)| {
            acc += r.riem_grad_norm * r.riem_grad_norm;
            acc / (k + 1) as f64
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub record: RunRecord,
    pub final_point: Vec<f64>,
    pub termination: Termination,
}

struct Stopwatch {
    #[cfg(not(target_arch = "wasm32"))]
    start: std::time::Instant,
}

impl Stopwatch {
    fn start() -> Self {
        Self {
            #[cfg(not(target_arch = "wasm32"))]
            start: std::time::Instant::now(),
        }
    }

    fn seconds(&self) -> f64 {
        #[cfg(not(target_arch = "wasm32"))]
        {
            self.start.elapsed().as_secs_f64()
        }
        #[cfg(target_arch = "wasm32")]
        {
            0.0
        }
    }
}

/// Shared instrumentation: metrics relative to an optional ground-truth manifold.
struct Recorder<'a> {
    f: &'a dyn Objective,
    baseline: Option<&'a Manifold>,
    record: RunRecord,
    tube_exceeded: bool,
    clock: Stopwatch,
}

impl<'a> Recorder<'a> {
    fn new(algorithm: &str, score_kind: &str, f: &'a dyn Objective, baseline: Option<&'a Manifold>) -> Self {
        let mut record = RunRecord::new(algorithm);
        record.push_meta("oracle", score_kind);
        record.push_meta("objective", f.name());
        record.push_meta(
            "baseline",
            baseline.map_or_else(|| "none".to_string(), |m| m.name()),
        );
        Self {
            f,
            baseline,
            record,
            tube_exceeded: false,
            clock: Stopwatch::start(),
        }
    }

    fn push(&mut self, step: usize, x: &[f64], mean: &[f64], surrogate: f64, step_norm: f64) -> Result<()> {
        let objective = self.f.value(x)?;
        let (feasibility, riem_grad_norm) = match self.baseline {
            Some(m) => match m.project(x) {
                Ok(p) => {
                    let d = numerics::dist(x, &p);
                    if d > m.safe_tube_radius() {
                        self.tube_exceeded = true;
                    }
                    let rg = self
                        .f
                        .value_grad(&p)
                        .and_then(|(_, g)| m.riemannian_grad(&p, &g))
                        .map_or(f64::NAN, |g| numerics::norm(&g));
                    (d, rg)
                }
                Err(_) => {
                    self.tube_exceeded = true;
                    (f64::NAN, f64::NAN)
                }
            },
            None => (numerics::dist(x, mean), f64::NAN),
        };
        self.record.rows.push(RunRow {
            step,
            objective,
            surrogate_objective: surrogate,
            feasibility,
            riem_grad_norm,
            step_norm,
        });
        Ok(())
    }

    fn finish(mut self, final_point: Vec<f64>, termination: Termination) -> RunOutcome {
        let steps = self.record.rows.last().map_or(0, |r| r.step);
        self.record.push_meta("steps", steps);
        self.record.push_meta("termination", &termination);
        self.record.push_meta("tube_exceeded", self.tube_exceeded);
        if let Some(m) = self.baseline {
            self.record
                .push_meta("final_constraint_residual", io::fmt_f64(m.constraint_residual(&final_point)));
            let avg = running_avg_sq_grad(&self.record.rows);
            self.record
                .push_meta("avg_sq_riem_grad", io::fmt_f64(avg.last().copied().unwrap_or(f64::NAN)));
        }
        self.record.push_meta("wall_time_s", format!("{:.3}", self.clock.seconds()));
        RunOutcome {
            record: self.record,
            final_point,
            termination,
        }
    }
}

fn check_start(score: &dyn ScoreOps, f: &dyn Objective, x0: &[f64]) -> Result<()> {
    for (context, expected) in [("score ambient dim", score.ambient_dim()), ("objective dim", f.dim())] {
        if x0.len() != expected {
            return Err(Error::DimensionMismatch {
                context,
                expected,
                actual: x0.len(),
            });
        }
    }
    if !numerics::all_finite(x0) {
        return Err(Error::NonFinite {
            context: "initial point",
        });
    }
    Ok(())
}

/// Landing direction `−s′(x)ᵀ∇f(s(x)) + η(s(x) − x)` and `f(s(x))`.
fn landing_direction(
    lin: &dyn Linearization,
    f: &dyn Objective,
    x: &[f64],
    eta: f64,
) -> Result<(Vec<f64>, f64)> {
    let mean = lin.mean();
    let (fs, g) = f.value_grad(mean)?;
    let tangent = lin.vjp(&g);
    let dir = tangent
        .iter()
        .zip(mean.iter().zip(x))
        .map(|(t, (m, xi))| -t + eta * (m - xi))
        .collect();
    Ok((dir, fs))
}

/// Euler integration of the denoising landing flow.
pub fn dlf_run(
    score: &dyn ScoreOps,
    f: &dyn Objective,
    x0: &[f64],
    cfg: &DlfConfig,
    baseline: Option<&Manifold>,
) -> Result<RunOutcome> {
    cfg.validate()?;
    check_start(score, f, x0)?;
    let mut rec = Recorder::new("dlf", &score.kind(), f, baseline);
    rec.record.push_meta("eta", io::fmt_f64(cfg.eta));
    rec.record.push_meta("t_step", io::fmt_f64(cfg.t_step));
    rec.record.push_meta("max_steps", cfg.max_steps);
    landing_loop(score, f, x0, cfg.eta, cfg.t_step, cfg.max_steps, cfg.stop_grad_tol, rec, false)
}

/// Gradient descent on `f(s(x)) + η d_σ(x)`, `d_σ = ½‖x‖² − ℓ_σ`, whose gradient
/// is `s′(x)∇f(s(x)) + η(x − s(x))`. Needs an oracle exposing `ℓ_σ`; aborts
/// when the penalized objective rises on three consecutive steps.
pub fn landing_descent_run(
    score: &dyn ScoreOps,
    f: &dyn Objective,
    x0: &[f64],
    eta: f64,
    gamma: f64,
    max_steps: usize,
    baseline: Option<&Manifold>,
) -> Result<RunOutcome> {
    if !score.has_link() {
        return Err(Error::Unsupported(format!(
            "landing descent needs the link function, which the {} oracle does not expose",
            score.kind()
        )));
    }
    let cfg = DlfConfig {
        eta,
        t_step: gamma,
        max_steps,
        stop_grad_tol: 0.0,
    };
    cfg.validate()?;
    check_start(score, f, x0)?;
    let mut rec = Recorder::new("landing_descent", &score.kind(), f, baseline);
    rec.record.push_meta("eta", io::fmt_f64(eta));
    rec.record.push_meta("gamma", io::fmt_f64(gamma));
    rec.record.push_meta("max_steps", max_steps);
    landing_loop(score, f, x0, eta, gamma, max_steps, 0.0, rec, true)
}

#[allow(clippy::too_many_arguments)]
fn landing_loop(
    score: &dyn ScoreOps,
    f: &dyn Objective,
    x0: &[f64],
    eta: f64,
    t_step: f64,
    max_steps: usize,
    tol: f64,
    mut rec: Recorder<'_>,
    watch_penalty: bool,
) -> Result<RunOutcome> {
    let mut x = x0.to_vec();
    let mut step_norm = 0.0;
    let mut prev_penalized = f64::INFINITY;
    let mut rises = 0usize;
    for k in 0..=max_steps {
        let lin = match score.linearize(&x) {
            Ok(l) => l,
            Err(e) => return Ok(rec.finish(x, Termination::Aborted(e.to_string()))),
        };
        let (dir, fs) = match landing_direction(lin.as_ref(), f, &x, eta) {
            Ok(v) => v,
            Err(e) => return Ok(rec.finish(x, Termination::Aborted(e.to_string()))),
        };
        rec.push(k, &x, lin.mean(), fs, step_norm)?;
        if watch_penalty {
            let link = lin.link_value().unwrap_or(f64::NAN);
            let penalized = fs + eta * (0.5 * numerics::dot(&x, &x) - link);
            rises = if penalized > prev_penalized { rises + 1 } else { 0 };
            if rises >= 3 {
                return Ok(rec.finish(
                    x,
                    Termination::Aborted(format!("oscillation: penalized objective rose three times by step {k}")),
                ));
            }
            prev_penalized = penalized;
        }
        if k == max_steps {
            return Ok(rec.finish(x, Termination::Budget));
        }
        let dnorm = numerics::norm(&dir);
        if dnorm <= tol {
            return Ok(rec.finish(x, Termination::Converged));
        }
        let next = numerics::axpy(&x, t_step, &dir);
        if !numerics::all_finite(&next) {
            return Ok(rec.finish(x, Termination::Aborted(format!("non-finite iterate at step {}", k + 1))));
        }
        step_norm = t_step * dnorm;
        x = next;
    }
    unreachable!("loop returns at k == max_steps")
}

/// One DRGD step: the raw tangent step and its retraction through the score.
#[derive(Debug, Clone, PartialEq)]
pub struct DrgdStep {
    /// `x − γ s′(x)ᵀ∇f(x)`.
    pub pre_retraction: Vec<f64>,
    /// `s(pre_retraction)`.
    pub next: Vec<f64>,
    /// `‖s′(x)ᵀ∇f(x)‖`.
    pub direction_norm: f64,
}

pub fn drgd_step(score: &dyn ScoreOps, f: &dyn Objective, x: &[f64], gamma: f64) -> Result<DrgdStep> {
    let lin = score.linearize(x)?;
    let (_, g) = f.value_grad(x)?;
    let dir = lin.vjp(&g);
    let pre_retraction = numerics::axpy(x, -gamma, &dir);
    let next = score.mean(&pre_retraction)?;
    Ok(DrgdStep {
        pre_retraction,
        next,
        direction_norm: numerics::norm(&dir),
    })
}

/// Denoising Riemannian gradient descent with constant step.
pub fn drgd_run(
    score: &dyn ScoreOps,
    f: &dyn Objective,
    x0: &[f64],
    cfg: &DrgdConfig,
    baseline: Option<&Manifold>,
) -> Result<RunOutcome> {
    cfg.validate()?;
    check_start(score, f, x0)?;
    let mut rec = Recorder::new("drgd", &score.kind(), f, baseline);
    rec.record.push_meta("gamma", io::fmt_f64(cfg.gamma));
    rec.record.push_meta("max_steps", cfg.max_steps);
    let mut x = x0.to_vec();
    let mut step_norm = 0.0;
    for k in 0..=cfg.max_steps {
        let lin = match score.linearize(&x) {
            Ok(l) => l,
            Err(e) => return Ok(rec.finish(x, Termination::Aborted(e.to_string()))),
        };
        let fs = f.value(lin.mean())?;
        rec.push(k, &x, lin.mean(), fs, step_norm)?;
        if k == cfg.max_steps {
            return Ok(rec.finish(x, Termination::Budget));
        }
        let (_, g) = f.value_grad(&x)?;
        let dir = lin.vjp(&g);
        let dnorm = numerics::norm(&dir);
        if dnorm <= cfg.stop_grad_tol {
            return Ok(rec.finish(x, Termination::Converged));
        }
        let pre = numerics::axpy(&x, -cfg.gamma, &dir);
        let next = match score.mean(&pre) {
            Ok(n) if numerics::all_finite(&n) => n,
            Ok(_) => {
                return Ok(rec.finish(x, Termination::Aborted(format!("non-finite iterate at step {}", k + 1))))
            }
            Err(e) => return Ok(rec.finish(x, Termination::Aborted(e.to_string()))),
        };
        step_norm = numerics::dist(&next, &x);
        x = next;
    }
    unreachable!("loop returns at k == max_steps")
}

/// Exact Riemannian gradient descent with projection retraction.
pub fn riemannian_gd_baseline(
    m: &Manifold,
    f: &dyn Objective,
    x0: &[f64],
    gamma: f64,
    max_steps: usize,
    stop_grad_tol: f64,
) -> Result<RunOutcome> {
    DrgdConfig {
        gamma,
        max_steps,
        stop_grad_tol,
    }
    .validate()?;
    let residual = m.constraint_residual(x0);
    if !(residual <= 1e-9) {
        return Err(Error::OffManifold { residual });
    }
    let exact = ExactManifoldScore::new(*m);
    check_start(&exact, f, x0)?;
    let mut rec = Recorder::new("riemannian_gd", &exact.kind(), f, Some(m));
    rec.record.push_meta("gamma", io::fmt_f64(gamma));
    rec.record.push_meta("max_steps", max_steps);
    let mut x = x0.to_vec();
    let mut step_norm = 0.0;
    for k in 0..=max_steps {
        let (fx, g) = f.value_grad(&x)?;
        rec.push(k, &x, &x, fx, step_norm)?;
        if k == max_steps {
            return Ok(rec.finish(x, Termination::Budget));
        }
        let rg = m.riemannian_grad(&x, &g)?;
        if numerics::norm(&rg) <= stop_grad_tol {
            return Ok(rec.finish(x, Termination::Converged));
        }
        let next = m.project(&numerics::axpy(&x, -gamma, &rg))?;
        step_norm = numerics::dist(&next, &x);
        x = next;
    }
    unreachable!("loop returns at k == max_steps")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::{BrockettObjective, ConstantObjective, LinearObjective};
    use crate::score::EmpiricalScoreOracle;
    use approx::assert_abs_diff_eq;

    fn sphere3() -> Manifold {
        Manifold::sphere(3, 1.0).unwrap()
    }

    #[test]
    fn dlf_without_landing_and_constant_f_is_stationary() {
        let m = sphere3();
        let exact = ExactManifoldScore::new(m);
        let f = ConstantObjective { dim: 3, value: 1.0 };
        let x0 = [0.0, 0.6, 0.8];
        let cfg = DlfConfig {
            eta: 0.0,
            max_steps: 50,
            stop_grad_tol: -1.0,
            ..Default::default()
        };
        let out = dlf_run(&exact, &f, &x0, &cfg, Some(&m)).unwrap();
        assert_eq!(out.final_point, x0.to_vec());
        assert_eq!(out.record.rows.len(), 51);
    }

    #[test]
    fn dlf_on_sphere_reaches_linear_minimizer() {
        let m = sphere3();
        let exact = ExactManifoldScore::new(m);
        let f = LinearObjective::new(vec![1.0, -2.0, 0.5]).unwrap();
        let cfg = DlfConfig {
            eta: 10.0,
            t_step: 1e-2,
            max_steps: 20_000,
            stop_grad_tol: 1e-12,
        };
        let out = dlf_run(&exact, &f, &[0.3, 0.9, 0.1], &cfg, Some(&m)).unwrap();
        let target = f.sphere_minimizer(1.0);
        assert!(numerics::dist(&out.final_point, &target) < 1e-6);
        assert!(out.record.last().unwrap().riem_grad_norm <= 1e-6);
    }

    #[test]
    fn drgd_constant_objective_retracts_once() {
        let m = sphere3();
        let exact = ExactManifoldScore::new(m);
        let f = ConstantObjective { dim: 3, value: 0.0 };
        let x0 = [0.0, 0.0, 1.2];
        let cfg = DrgdConfig {
            stop_grad_tol: -1.0,
            max_steps: 3,
            ..Default::default()
        };
        let out = drgd_run(&exact, &f, &x0, &cfg, Some(&m)).unwrap();
        assert_eq!(out.final_point, vec![0.0, 0.0, 1.0]);
        assert_eq!(out.record.rows[2].step_norm, 0.0);
    }

    #[test]
    fn drgd_sphere_linear_monotone_and_feasible() {
        let m = sphere3();
        let exact = ExactManifoldScore::new(m);
        let f = LinearObjective::new(vec![0.5, 1.0, -1.0]).unwrap();
        let cfg = DrgdConfig {
            gamma: 0.1,
            max_steps: 2000,
            stop_grad_tol: 1e-12,
        };
        let x0 = m.project(&[1.0, 0.2, 0.3]).unwrap();
        let out = drgd_run(&exact, &f, &x0, &cfg, Some(&m)).unwrap();
        let rows = &out.record.rows;
        for w in rows[1..].windows(2) {
            assert!(w[1].objective <= w[0].objective + 1e-12);
        }
        for r in rows {
            assert!(r.feasibility <= 1e-9);
        }
        assert!(numerics::dist(&out.final_point, &f.sphere_minimizer(1.0)) < 1e-6);
    }

    #[test]
    fn landing_descent_matches_dlf_with_exact_oracle() {
        let m = Manifold::circle(1.0).unwrap();
        let exact = ExactManifoldScore::new(m);
        let f = LinearObjective::new(vec![1.0, 1.0]).unwrap();
        let cfg = DlfConfig {
            eta: 5.0,
            t_step: 1e-3,
            max_steps: 200,
            stop_grad_tol: 0.0,
        };
        let a = dlf_run(&exact, &f, &[1.2, 0.1], &cfg, None).unwrap();
        let b = landing_descent_run(&exact, &f, &[1.2, 0.1], 5.0, 1e-3, 200, None).unwrap();
        assert_eq!(a.record.rows.len(), b.record.rows.len());
        assert!(numerics::dist(&a.final_point, &b.final_point) <= 1e-12);
    }

    #[test]
    fn landing_descent_zero_objective_decreases_feasibility() {
        let m = Manifold::circle(1.0).unwrap();
        let exact = ExactManifoldScore::new(m);
        let f = ConstantObjective { dim: 2, value: 0.0 };
        let out = landing_descent_run(&exact, &f, &[1.3, 0.2], 1.0, 0.1, 100, Some(&m)).unwrap();
        for w in out.record.rows.windows(2) {
            assert!(w[1].feasibility < w[0].feasibility || w[1].feasibility < 1e-12);
        }
    }

    #[test]
    fn landing_descent_detects_divergent_steps() {
        let m = Manifold::circle(1.0).unwrap();
        let exact = ExactManifoldScore::new(m);
        let f = ConstantObjective { dim: 2, value: 0.0 };
        let eta = 4.0;
        let out = landing_descent_run(&exact, &f, &[1.1, 0.0], eta, 10.0 / eta, 100, Some(&m)).unwrap();
        assert!(matches!(out.termination, Termination::Aborted(_)));
        assert!(out.record.rows.len() <= 101);
    }

    #[test]
    fn landing_descent_rejects_linkless_oracle() {
        let net = crate::score::ScoreMlp::new(&[3, 4, 2], 0).unwrap();
        let oracle = crate::score::MlpScoreOracle::new(net, 0.1).unwrap();
        let f = ConstantObjective { dim: 2, value: 0.0 };
        assert!(landing_descent_run(&oracle, &f, &[1.0, 0.0], 1.0, 0.1, 10, None).is_err());
    }

    #[test]
    fn dlf_tangent_and_normal_parts_are_orthogonal_for_exact_oracle() {
        let m = Manifold::orthogonal(3).unwrap();
        let exact = ExactManifoldScore::new(m);
        let f = BrockettObjective::random_instance(3, 1).unwrap();
        let mut r = crate::rng::stream(4, "t");
        for p in m.sample_uniform(20, 2) {
            let n = m.random_unit_normal(&p, &mut r);
            let x = numerics::axpy(&p, 0.1, &n);
            let lin = exact.linearize(&x).unwrap();
            let (_, g) = f.value_grad(lin.mean()).unwrap();
            let tangent = lin.vjp(&g);
            let normal = numerics::sub(lin.mean(), &x);
            assert!(numerics::dot(&tangent, &normal).abs() <= 1e-8);
        }
    }

    #[test]
    fn riemannian_gd_solves_brockett() {
        let m = Manifold::orthogonal(5).unwrap();
        let f = BrockettObjective::random_instance(5, 3).unwrap();
        let x0 = m.sample_uniform(1, 8).remove(0);
        let step = 0.5 / (f.a().operator_norm().unwrap() * 5.0);
        let out = riemannian_gd_baseline(&m, &f, &x0, step, 200_000, 1e-10).unwrap();
        let gap = f.value(&out.final_point).unwrap() - f.optimum().unwrap();
        assert!(gap.abs() <= 1e-6, "gap {gap}");
        for r in &out.record.rows {
            assert!(r.feasibility <= 1e-10);
        }
    }

    #[test]
    fn riemannian_gd_rejects_off_manifold_start_and_fixes_critical_points() {
        let m = sphere3();
        let f = LinearObjective::new(vec![0.0, 0.0, 1.0]).unwrap();
        assert!(riemannian_gd_baseline(&m, &f, &[0.0, 0.0, 2.0], 0.1, 10, 0.0).is_err());
        let out = riemannian_gd_baseline(&m, &f, &[0.0, 0.0, 1.0], 0.1, 10, -1.0).unwrap();
        assert_eq!(out.final_point, vec![0.0, 0.0, 1.0]);
    }

    #[test]
    fn records_are_reproducible_and_round_trip() {
        let pts = Manifold::circle(1.0).unwrap().sample_uniform(200, 1);
        let oracle = EmpiricalScoreOracle::new(&pts, 0.2).unwrap();
        let f = LinearObjective::new(vec![1.0, 0.0]).unwrap();
        let m = Manifold::circle(1.0).unwrap();
        let run = || drgd_run(&oracle, &f, &[0.0, 1.0], &DrgdConfig { gamma: 0.05, max_steps: 40, stop_grad_tol: 0.0 }, Some(&m)).unwrap();
        let (a, b) = (run(), run());
        assert_eq!(a.record.to_csv(), b.record.to_csv());
        let rows = RunRecord::from_csv(&a.record.to_csv()).unwrap();
        assert_eq!(rows, a.record.rows);
        assert!(a.record.to_csv().starts_with("step,objective,surrogate_objective,feasibility,riem_grad_norm,step_norm\n0,"));
    }

    #[test]
    fn drgd_retraction_does_not_increase_feasibility() {
        let m = Manifold::circle(1.0).unwrap();
        let pts = m.sample_uniform(2000, 5);
        let oracle = EmpiricalScoreOracle::new(&pts, 0.1).unwrap();
        let f = LinearObjective::new(vec![0.3, -1.0]).unwrap();
        // Oracle bias floor: sup ‖s(z) − π(z)‖ over a band around the circle.
        let mut floor: f64 = 0.0;
        for (i, z) in m.sample_uniform(400, 6).iter().enumerate() {
            let r = 0.95 + 0.1 * (i as f64 / 399.0);
            let z = numerics::scaled(z, r);
            floor = floor.max(numerics::dist(&oracle.mean(&z).unwrap(), &m.project(&z).unwrap()));
        }
        let mut x = oracle.mean(&[1.0, 0.0]).unwrap();
        for _ in 0..50 {
            let s = drgd_step(&oracle, &f, &x, 0.05).unwrap();
            let before = m.dist_to_manifold(&s.pre_retraction).unwrap();
            let after = m.dist_to_manifold(&s.next).unwrap();
            assert!(after <= before.max(floor) + 1e-12, "{after} > max({before}, {floor})");
            x = s.next;
        }
    }

    #[test]
    fn running_average_is_cumulative_mean() {
        let rows: Vec<RunRow> = [3.0, 1.0, 0.0]
            .iter()
            .enumerate()
            .map(|(i, &g)| RunRow {
                step: i,
                objective: 0.0,
                surrogate_objective: 0.0,
                feasibility: 0.0,
                riem_grad_norm: g,
                step_norm: 0.0,
            })
            .collect();
        let avg = running_avg_sq_grad(&rows);
        assert_abs_diff_eq!(avg[0], 9.0);
        assert_abs_diff_eq!(avg[1], 5.0);
        assert_abs_diff_eq!(avg[2], 10.0 / 3.0);
    }
}
