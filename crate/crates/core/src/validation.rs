//! Measurable checks of the convergence theory: error-rate sweeps over σ,
//! the exact landing decay law, and feasibility/optimality summaries.

use std::fmt::Write as _;

use crate::control::{backtest, SystemModel};
use crate::error::{Error, Result};
use crate::io;
use crate::manifolds::Manifold;
use crate::numerics::{self, Matrix, DEFAULT_FD_STEP};
use crate::objectives::ConstantObjective;
use crate::optim::{dlf_run, running_avg_sq_grad, DlfConfig, ExactManifoldScore, RunRecord};
use crate::rng;
use crate::score::ScoreOps;

/// Builds the oracle for one noise level.
pub type OracleFamily<'a> = dyn Fn(f64) -> Result<Box<dyn ScoreOps>> + Sync + 'a;

#[derive(Debug, Clone, PartialEq)]
pub struct RateSweepReport {
    /// Strictly decreasing.
    pub sigmas: Vec<f64>,
    /// `sup ‖s(x) − π(x)‖` over the test points, per σ.
    pub mean_errors: Vec<f64>,
    /// `sup ‖s′(x) − π′(x)‖₂` over the test points, per σ.
    pub jacobian_errors: Vec<f64>,
    pub mean_slope: f64,
    pub jacobian_slope: f64,
    /// Offsets as fractions of the safe tube radius.
    pub offsets: Vec<f64>,
    pub n_points: usize,
    pub seed: u64,
    /// Test points at which the oracle failed, summed over σ.
    pub excluded: usize,
}

/// Relative slack allowed when checking monotone decay of sweep errors.
pub const MONOTONE_SLACK: f64 = 0.05;

fn monotone_within(errors: &[f64], slack: f64) -> bool {
    errors.windows(2).all(|w| w[1] <= w[0] * (1.0 + slack))
}

impl RateSweepReport {
    pub fn mean_monotone(&self) -> bool {
        monotone_within(&self.mean_errors, MONOTONE_SLACK)
    }

    pub fn jacobian_monotone(&self) -> bool {
        monotone_within(&self.jacobian_errors, MONOTONE_SLACK)
    }

    pub fn to_csv(&self) -> String {
        let rows: Vec<Vec<f64>> = (0..self.sigmas.len())
            .map(|i| vec![self.sigmas[i], self.mean_errors[i], self.jacobian_errors[i]])
            .collect();
        io::render_csv(&["sigma", "mean_error", "jacobian_error"], &rows)
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "rate sweep: {} test points, seed {}", self.n_points, self.seed);
        let _ = writeln!(s, "offsets (fraction of safe tube radius): {:?}", self.offsets);
        let _ = writeln!(s, "excluded evaluations: {}", self.excluded);
        for i in 0..self.sigmas.len() {
            let _ = writeln!(
                s,
                "sigma {:>10.4e}  mean error {:>12.5e}  jacobian error {:>12.5e}",
                self.sigmas[i], self.mean_errors[i], self.jacobian_errors[i]
            );
        }
        let _ = writeln!(s, "log-log slope (mean): {:.4}", self.mean_slope);
        let _ = writeln!(s, "log-log slope (jacobian): {:.4}", self.jacobian_slope);
        let _ = writeln!(s, "monotone (mean, jacobian): {}, {}", self.mean_monotone(), self.jacobian_monotone());
        s
    }
}

/// Test points `p ± offset · τ · n` with `p` uniform on the manifold, `n` a
/// random unit normal and `τ` the safe tube radius.
pub fn tube_test_points(m: &Manifold, offsets: &[f64], n_points: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if let Some(&bad) = offsets.iter().find(|&&o| !(o.abs() < 0.5)) {
        return Err(Error::InvalidParameter(format!(
            "offset {bad} must stay below half the safe tube radius"
        )));
    }
    let mut r = rng::stream(seed, "rate-sweep-points");
    let base = m.sample_uniform_with(&mut r, n_points);
    let tau = m.safe_tube_radius();
    let mut pts = Vec::with_capacity(n_points * offsets.len() * 2);
    for p in &base {
        let n = m.random_unit_normal(p, &mut r);
        for &o in offsets {
            for sign in [1.0, -1.0] {
                if o == 0.0 && sign < 0.0 {
                    continue;
                }
                pts.push(numerics::axpy(p, sign * o * tau, &n));
            }
        }
    }
    Ok(pts)
}

pub fn rate_sweep(
    family: &OracleFamily<'_>,
    m: &Manifold,
    offsets: &[f64],
    sigmas: &[f64],
    n_points: usize,
    seed: u64,
) -> Result<RateSweepReport> {
    if sigmas.len() < 2 || sigmas.windows(2).any(|w| !(w[1] < w[0])) || sigmas.iter().any(|&s| !(s > 0.0)) {
        return Err(Error::InvalidParameter(
            "sigma grid needs at least two positive, strictly decreasing values".into(),
        ));
    }
    let pts = tube_test_points(m, offsets, n_points, seed)?;
    if pts.is_empty() {
        return Err(Error::EmptyInput("rate sweep test points"));
    }
    // Ground truth once per point.
    let truth: Vec<(Vec<f64>, Matrix)> = pts
        .iter()
        .map(|x| {
            let p = m.project(x)?;
            let jac = numerics::fd_jacobian(|y| m.project(y).unwrap_or_else(|_| vec![f64::NAN; y.len()]), x, DEFAULT_FD_STEP);
            Ok((p, jac))
        })
        .collect::<Result<_>>()?;

    let mut mean_errors = Vec::with_capacity(sigmas.len());
    let mut jacobian_errors = Vec::with_capacity(sigmas.len());
    let mut excluded = 0;
    for &sigma in sigmas {
        let oracle = family(sigma)?;
        let per_chunk = crate::score::map_chunks(pts.len(), 16, |range| {
            let mut worst = (0.0f64, 0.0f64, 0usize);
            for i in range {
                let eval = match oracle.eval(&pts[i]) {
                    Ok(e) => e,
                    Err(_) => {
                        worst.2 += 1;
                        continue;
                    }
                };
                let (p, jac) = &truth[i];
                let me = numerics::dist(&eval.tweedie_mean, p);
                let je = eval
                    .tweedie_jacobian
                    .sub(jac)
                    .and_then(|d| d.operator_norm())
                    .unwrap_or(f64::NAN);
                if !(me.is_finite() && je.is_finite()) {
                    worst.2 += 1;
                    continue;
                }
                worst.0 = worst.0.max(me);
                worst.1 = worst.1.max(je);
            }
            worst
        });
        let (mut me, mut je) = (0.0f64, 0.0f64);
        for (a, b, c) in per_chunk {
            me = me.max(a);
            je = je.max(b);
            excluded += c;
        }
        mean_errors.push(me);
        jacobian_errors.push(je);
    }
    let log_s: Vec<f64> = sigmas.iter().map(|s| s.ln()).collect();
    let slope = |e: &[f64]| numerics::ls_slope(&log_s, &e.iter().map(|v| v.ln()).collect::<Vec<_>>());
    Ok(RateSweepReport {
        sigmas: sigmas.to_vec(),
        mean_slope: slope(&mean_errors),
        jacobian_slope: slope(&jacobian_errors),
        mean_errors,
        jacobian_errors,
        offsets: offsets.to_vec(),
        n_points,
        seed,
        excluded,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LandingReport {
    pub eta: f64,
    pub times: Vec<f64>,
    /// `d(x(t)) = ½ dist(x(t))²` along the Euler trajectory.
    pub measured: Vec<f64>,
    /// `e^{−2ηt} d(x₀)`.
    pub predicted: Vec<f64>,
    pub max_rel_deviation: f64,
}

impl LandingReport {
    pub fn measured_monotone(&self) -> bool {
        self.measured.windows(2).all(|w| w[1] <= w[0])
    }

    /// First time `d` drops to `fraction · d(x₀)`, linearly interpolated.
    pub fn time_to_fraction(&self, fraction: f64) -> Option<f64> {
        let target = fraction * self.measured[0];
        self.measured.windows(2).enumerate().find_map(|(i, w)| {
            (w[0] >= target && w[1] <= target).then(|| {
                let dt = self.times[i + 1] - self.times[i];
                if w[0] == w[1] {
                    self.times[i]
                } else {
                    self.times[i] + dt * (w[0] - target) / (w[0] - w[1])
                }
            })
        })
    }

    pub fn to_csv(&self) -> String {
        let rows: Vec<Vec<f64>> = (0..self.times.len())
            .map(|i| vec![self.times[i], self.measured[i], self.predicted[i]])
            .collect();
        io::render_csv(&["t", "measured", "predicted"], &rows)
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "landing check: eta {}", self.eta);
        let _ = writeln!(s, "steps: {}", self.times.len().saturating_sub(1));
        let _ = writeln!(s, "initial d: {:.6e}", self.measured.first().copied().unwrap_or(f64::NAN));
        let _ = writeln!(s, "final d: {:.6e}", self.measured.last().copied().unwrap_or(f64::NAN));
        let _ = writeln!(s, "max relative deviation from exp(-2 eta t) law: {:.4e}", self.max_rel_deviation);
        let _ = writeln!(s, "monotone: {}", self.measured_monotone());
        s
    }
}

/// Integrates the exact landing flow with `f = 0` and compares `d(x(t))` to
/// `e^{−2ηt} d(x₀)`.
pub fn landing_check(m: &Manifold, eta: f64, x0: &[f64], t_end: f64, euler_step: f64) -> Result<LandingReport> {
    let d0 = m.dist_to_manifold(x0)?;
    if d0 >= m.safe_tube_radius() {
        return Err(Error::OutsideTube(format!(
            "start at distance {d0} is outside the safe tube radius {}",
            m.safe_tube_radius()
        )));
    }
    if !(t_end > 0.0 && euler_step > 0.0) {
        return Err(Error::InvalidParameter("t_end and euler_step must be positive".into()));
    }
    let steps = (t_end / euler_step).round() as usize;
    let exact = ExactManifoldScore::new(*m);
    let f = ConstantObjective {
        dim: m.ambient_dim(),
        value: 0.0,
    };
    let cfg = DlfConfig {
        eta,
        t_step: euler_step,
        max_steps: steps,
        stop_grad_tol: -1.0,
    };
    let out = dlf_run(&exact, &f, x0, &cfg, Some(m))?;
    let mut times = Vec::with_capacity(steps + 1);
    let mut measured = Vec::with_capacity(steps + 1);
    let mut predicted = Vec::with_capacity(steps + 1);
    let half_d0 = 0.5 * d0 * d0;
    let mut max_rel: f64 = 0.0;
    for row in &out.record.rows {
        let t = row.step as f64 * euler_step;
        let d = 0.5 * row.feasibility * row.feasibility;
        let pred = (-2.0 * eta * t).exp() * half_d0;
        if pred > 0.0 {
            max_rel = max_rel.max(((d - pred) / pred).abs());
        }
        times.push(t);
        measured.push(d);
        predicted.push(pred);
    }
    Ok(LandingReport {
        eta,
        times,
        measured,
        predicted,
        max_rel_deviation: max_rel,
    })
}

/// What the final point of a run is judged against.
pub enum Baseline<'a> {
    Manifold(&'a Manifold),
    /// Final point in raw (unnormalized) trajectory coordinates.
    System { system: &'a SystemModel, horizon: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityReport {
    pub steps: usize,
    pub initial_objective: f64,
    pub final_objective: f64,
    /// `initial − final`.
    pub improvement: f64,
    pub final_feasibility: f64,
    /// `‖XᵀX − I‖_F` or `|‖x‖ − r|` for manifold runs.
    pub final_constraint_residual: Option<f64>,
    pub final_riem_grad_norm: Option<f64>,
    pub avg_sq_riem_grad: Option<f64>,
    pub backtest_gap: Option<f64>,
    /// `final − dataset_best` when a dataset reference is supplied.
    pub gap_to_dataset_best: Option<f64>,
}

pub fn feasibility_optimality_report(
    record: &RunRecord,
    final_point: &[f64],
    baseline: Baseline<'_>,
    dataset_best: Option<f64>,
) -> Result<FeasibilityReport> {
    let first = record.rows.first().ok_or(Error::EmptyInput("run record"))?;
    let last = record.rows.last().ok_or(Error::EmptyInput("run record"))?;
    let mut rep = FeasibilityReport {
        steps: last.step,
        initial_objective: first.objective,
        final_objective: last.objective,
        improvement: first.objective - last.objective,
        final_feasibility: last.feasibility,
        final_constraint_residual: None,
        final_riem_grad_norm: None,
        avg_sq_riem_grad: None,
        backtest_gap: None,
        gap_to_dataset_best: dataset_best.map(|b| last.objective - b),
    };
    match baseline {
        Baseline::Manifold(m) => {
            rep.final_constraint_residual = Some(m.constraint_residual(final_point));
            rep.final_riem_grad_norm = Some(last.riem_grad_norm);
            rep.avg_sq_riem_grad = running_avg_sq_grad(&record.rows).last().copied();
        }
        Baseline::System { system, horizon } => {
            rep.backtest_gap = Some(backtest(system, horizon, final_point)?.gap);
        }
    }
    Ok(rep)
}

impl FeasibilityReport {
    fn entries(&self) -> Vec<(&'static str, f64)> {
        let opt = |v: Option<f64>| v.unwrap_or(f64::NAN);
        vec![
            ("steps", self.steps as f64),
            ("initial_objective", self.initial_objective),
            ("final_objective", self.final_objective),
            ("improvement", self.improvement),
            ("final_feasibility", self.final_feasibility),
            ("final_constraint_residual", opt(self.final_constraint_residual)),
            ("final_riem_grad_norm", opt(self.final_riem_grad_norm)),
            ("avg_sq_riem_grad", opt(self.avg_sq_riem_grad)),
            ("backtest_gap", opt(self.backtest_gap)),
            ("gap_to_dataset_best", opt(self.gap_to_dataset_best)),
        ]
    }

    pub fn to_csv(&self) -> String {
        let e = self.entries();
        let header: Vec<&str> = e.iter().map(|(k, _)| *k).collect();
        io::render_csv(&header, &[e.iter().map(|(_, v)| *v).collect()])
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.entries() {
            if !v.is_nan() {
                let _ = writeln!(s, "{k}: {v:.10e}");
            }
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::LinearObjective;
    use crate::optim::{riemannian_gd_baseline, DrgdConfig};
    use crate::score::QuadratureScoreOracle;
    use approx::assert_abs_diff_eq;

    #[test]
    fn exact_adapter_sweep_has_no_error() {
        let m = Manifold::sphere(3, 1.0).unwrap();
        let family = |_: f64| -> Result<Box<dyn ScoreOps>> { Ok(Box::new(ExactManifoldScore::new(m))) };
        let rep = rate_sweep(&family, &m, &[0.3], &[0.2, 0.1], 20, 1).unwrap();
        for e in rep.mean_errors.iter().chain(&rep.jacobian_errors) {
            assert!(*e <= 1e-9, "{e}");
        }
        assert_eq!(rep.excluded, 0);
    }

    #[test]
    fn sweep_rejects_bad_grids_and_offsets() {
        let m = Manifold::circle(1.0).unwrap();
        let family = |_: f64| -> Result<Box<dyn ScoreOps>> { Ok(Box::new(ExactManifoldScore::new(m))) };
        assert!(rate_sweep(&family, &m, &[0.3], &[0.1, 0.2], 5, 0).is_err());
        assert!(rate_sweep(&family, &m, &[0.6], &[0.2, 0.1], 5, 0).is_err());
    }

    #[test]
    fn quadrature_sweep_errors_shrink_with_sigma() {
        let m = Manifold::circle(1.0).unwrap();
        let family = |s: f64| -> Result<Box<dyn ScoreOps>> { Ok(Box::new(QuadratureScoreOracle::new(&m, 2048, s)?)) };
        let rep = rate_sweep(&family, &m, &[0.3], &[0.2, 0.1, 0.05], 16, 2).unwrap();
        assert!(rep.mean_monotone() && rep.jacobian_monotone(), "{}", rep.summary());
        assert!(rep.mean_slope > 0.0 && rep.jacobian_slope > 0.0);
    }

    #[test]
    fn landing_law_on_sphere() {
        let m = Manifold::sphere(3, 1.0).unwrap();
        let x0 = [0.0, 0.0, 1.3];
        let rep = landing_check(&m, 1.0, &x0, 3.0, 1e-3).unwrap();
        assert!(rep.max_rel_deviation <= 0.05, "{}", rep.max_rel_deviation);
        assert!(rep.measured_monotone());
        assert!(landing_check(&m, 1.0, &[0.0, 0.0, 1.6], 1.0, 1e-3).is_err());
    }

    #[test]
    fn landing_without_gain_keeps_distance() {
        let m = Manifold::circle(1.0).unwrap();
        let rep = landing_check(&m, 0.0, &[1.2, 0.0], 1.0, 1e-2).unwrap();
        for d in &rep.measured {
            assert!((d - rep.measured[0]).abs() <= 1e-10);
        }
    }

    #[test]
    fn doubling_gain_halves_decay_time() {
        let m = Manifold::circle(1.0).unwrap();
        let x0 = [0.8, 0.0];
        let a = landing_check(&m, 1.0, &x0, 2.0, 1e-4).unwrap();
        let b = landing_check(&m, 2.0, &x0, 1.0, 1e-4).unwrap();
        let (ta, tb) = (a.time_to_fraction((-1.0f64).exp()).unwrap(), b.time_to_fraction((-1.0f64).exp()).unwrap());
        assert!((tb / ta - 0.5).abs() <= 0.02 * 0.5, "{ta} {tb}");
    }

    #[test]
    fn reports_for_manifold_and_constant_runs() {
        let m = Manifold::sphere(3, 1.0).unwrap();
        let f = LinearObjective::new(vec![1.0, 2.0, 2.0]).unwrap();
        let x0 = m.project(&[1.0, 0.0, 0.0]).unwrap();
        let out = riemannian_gd_baseline(&m, &f, &x0, 0.1, 5000, 1e-12).unwrap();
        let rep = feasibility_optimality_report(&out.record, &out.final_point, Baseline::Manifold(&m), None).unwrap();
        assert!(rep.final_feasibility <= 1e-9);
        assert!(rep.final_riem_grad_norm.unwrap() <= 1e-6);
        assert!(rep.improvement > 0.0);
        assert_eq!(rep, feasibility_optimality_report(&out.record, &out.final_point, Baseline::Manifold(&m), None).unwrap());

        let c = ConstantObjective { dim: 3, value: 2.0 };
        let exact = ExactManifoldScore::new(m);
        let cfg = DrgdConfig { max_steps: 10, stop_grad_tol: -1.0, ..Default::default() };
        let out = crate::optim::drgd_run(&exact, &c, &x0, &cfg, Some(&m)).unwrap();
        let rep = feasibility_optimality_report(&out.record, &out.final_point, Baseline::Manifold(&m), Some(2.0)).unwrap();
        assert_eq!(rep.improvement, 0.0);
        assert_abs_diff_eq!(rep.gap_to_dataset_best.unwrap(), 0.0);
        assert!(rep.to_csv().starts_with("steps,initial_objective"));
    }
}
