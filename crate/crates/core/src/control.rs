//! Data-driven control: system simulators, trajectory datasets on the
//! input-output behavior manifold, and back-testing.

use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::io;
use crate::numerics::{self, Matrix};
use crate::objectives::{Objective, TrackingObjective};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SystemKind {
    Unicycle,
    DoublePendulum,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PendulumParams {
    pub m1: f64,
    pub m2: f64,
    pub l1: f64,
    pub l2: f64,
    pub g: f64,
    pub d1: f64,
    pub d2: f64,
}

impl Default for PendulumParams {
    fn default() -> Self {
        Self {
            m1: 1.0,
            m2: 0.5,
            l1: 1.0,
            l2: 0.5,
            g: 1.0,
            d1: 0.1,
            d2: 0.1,
        }
    }
}

/// A discrete-time system obtained by RK4 with step `dt`, started at `x₀ = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemModel {
    pub kind: SystemKind,
    pub dt: f64,
    pub pendulum: PendulumParams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rollout {
    /// `y_0 … y_N` row by row.
    pub outputs: Vec<f64>,
    /// `x_0 … x_N` row by row.
    pub states: Vec<f64>,
}

impl SystemModel {
    pub fn unicycle() -> Self {
        Self {
            kind: SystemKind::Unicycle,
            dt: 0.05,
            pendulum: PendulumParams::default(),
        }
    }

    pub fn double_pendulum() -> Self {
        Self {
            kind: SystemKind::DoublePendulum,
            dt: 0.1,
            pendulum: PendulumParams::default(),
        }
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "unicycle" => Ok(Self::unicycle()),
            "double_pendulum" | "pendulum" => Ok(Self::double_pendulum()),
            other => Err(Error::InvalidParameter(format!(
                "unknown system {other:?} (expected unicycle or double_pendulum)"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            SystemKind::Unicycle => "unicycle",
            SystemKind::DoublePendulum => "double_pendulum",
        }
    }

    pub fn state_dim(&self) -> usize {
        match self.kind {
            SystemKind::Unicycle => 3,
            SystemKind::DoublePendulum => 4,
        }
    }

    pub fn input_dim(&self) -> usize {
        match self.kind {
            SystemKind::Unicycle => 2,
            SystemKind::DoublePendulum => 1,
        }
    }

    pub fn output_dim(&self) -> usize {
        match self.kind {
            SystemKind::Unicycle => 3,
            SystemKind::DoublePendulum => 2,
        }
    }

    /// Length of a flattened `(u_0 … u_{N−1}, y_0 … y_N)` trajectory.
    pub fn trajectory_dim(&self, horizon: usize) -> usize {
        horizon * self.input_dim() + (horizon + 1) * self.output_dim()
    }

    pub fn continuous_dynamics(&self, x: &[f64], u: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.state_dim() || u.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                context: "continuous_dynamics",
                expected: self.state_dim() + self.input_dim(),
                actual: x.len() + u.len(),
            });
        }
        match self.kind {
            SystemKind::Unicycle => {
                let (v, w) = (u[0], u[1]);
                Ok(vec![v * x[2].cos(), v * x[2].sin(), w])
            }
            SystemKind::DoublePendulum => {
                let p = &self.pendulum;
                let (t1, w1, t2, w2) = (x[0], x[1], x[2], x[3]);
                let delta = t2 - t1;
                let c = p.m2 * p.l1 * p.l2 * delta.cos();
                let s = p.m2 * p.l1 * p.l2 * delta.sin();
                let m11 = (p.m1 + p.m2) * p.l1 * p.l1;
                let m22 = p.m2 * p.l2 * p.l2;
                let det = m11 * m22 - c * c;
                if det.abs() < 1e-12 {
                    return Err(Error::InvalidParameter("singular pendulum mass matrix".into()));
                }
                let rhs1 = u[0] + s * w2 * w2 - (p.m1 + p.m2) * p.g * p.l1 * t1.sin() - p.d1 * w1;
                let rhs2 = -s * w1 * w1 - p.m2 * p.g * p.l2 * t2.sin() - p.d2 * w2;
                let a1 = (m22 * rhs1 - c * rhs2) / det;
                let a2 = (m11 * rhs2 - c * rhs1) / det;
                Ok(vec![w1, a1, w2, a2])
            }
        }
    }

    pub fn step(&self, x: &[f64], u: &[f64]) -> Result<Vec<f64>> {
        numerics::try_rk4_step(|x, u| self.continuous_dynamics(x, u), x, u, self.dt)
    }

    pub fn output(&self, x: &[f64]) -> Vec<f64> {
        match self.kind {
            SystemKind::Unicycle => x.to_vec(),
            SystemKind::DoublePendulum => vec![x[0], x[2]],
        }
    }

    /// Simulates from the zero state.
    pub fn rollout(&self, inputs: &[f64]) -> Result<Rollout> {
        self.rollout_from(&vec![0.0; self.state_dim()], inputs)
    }

    pub fn rollout_from(&self, x0: &[f64], inputs: &[f64]) -> Result<Rollout> {
        let nu = self.input_dim();
        if inputs.len() % nu != 0 || x0.len() != self.state_dim() {
            return Err(Error::DimensionMismatch {
                context: "rollout inputs",
                expected: nu,
                actual: inputs.len(),
            });
        }
        let horizon = inputs.len() / nu;
        let mut x = x0.to_vec();
        let mut states = Vec::with_capacity((horizon + 1) * x.len());
        let mut outputs = Vec::with_capacity((horizon + 1) * self.output_dim());
        states.extend_from_slice(&x);
        outputs.extend(self.output(&x));
        for k in 0..horizon {
            x = self.step(&x, &inputs[k * nu..(k + 1) * nu])?;
            if !numerics::all_finite(&x) {
                return Err(Error::SimulationBlowup { step: k + 1 });
            }
            states.extend_from_slice(&x);
            outputs.extend(self.output(&x));
        }
        Ok(Rollout { outputs, states })
    }

    /// One i.i.d. input `u_k` under the excitation law of the system.
    pub fn sample_input<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        match self.kind {
            SystemKind::Unicycle => {
                let v = rng.random_range(0.0..1.0);
                let w: f64 = rng.sample(StandardNormal);
                vec![v, 5.0 * w]
            }
            SystemKind::DoublePendulum => vec![rng.random_range(-5.0..5.0)],
        }
    }

    pub fn input_law(&self) -> &'static str {
        match self.kind {
            SystemKind::Unicycle => "v~Unif[0,1], omega~N(0,25)",
            SystemKind::DoublePendulum => "u~Unif[-5,5]",
        }
    }

    /// Default output weight: positions only for the unicycle, both angles for the pendulum.
    pub fn default_q(&self) -> Matrix {
        match self.kind {
            SystemKind::Unicycle => Matrix::from_diag(&[10.0, 10.0, 0.0]),
            SystemKind::DoublePendulum => Matrix::from_diag(&[10.0, 10.0]),
        }
    }

    pub fn default_r(&self) -> Matrix {
        Matrix::from_diag(&vec![0.01; self.input_dim()])
    }

    pub fn tracking_objective(&self, reference: Vec<f64>, horizon: usize) -> Result<TrackingObjective> {
        TrackingObjective::new(reference, self.default_q(), self.default_r(), horizon)
    }

    /// Reference `r_0 … r_N`. The unicycle tracks a planar path (angle entry
    /// zero, unweighted by default); the pendulum tracks with its first angle.
    pub fn reference(&self, kind: ReferenceKind, horizon: usize, amplitude: f64) -> Vec<f64> {
        let mut out = Vec::with_capacity((horizon + 1) * self.output_dim());
        for k in 0..=horizon {
            let s = k as f64 / horizon.max(1) as f64;
            let t = k as f64 * self.dt;
            let tau = std::f64::consts::TAU;
            match self.kind {
                SystemKind::Unicycle => {
                    let (x, y) = match kind {
                        ReferenceKind::Sinusoid => (0.5 * t, amplitude * (tau * s).sin()),
                        ReferenceKind::CircleArc => {
                            let phi = 0.25 * tau * s;
                            (amplitude * phi.sin(), amplitude * (1.0 - phi.cos()))
                        }
                        ReferenceKind::FigureEight => {
                            let phi = tau * s;
                            (amplitude * phi.sin(), amplitude * phi.sin() * phi.cos())
                        }
                    };
                    out.extend([x, y, 0.0]);
                }
                SystemKind::DoublePendulum => {
                    let th = match kind {
                        ReferenceKind::Sinusoid => amplitude * (tau * s).sin(),
                        ReferenceKind::CircleArc => amplitude * 0.5 * (1.0 - (0.5 * tau * s).cos()),
                        ReferenceKind::FigureEight => amplitude * (tau * s).sin() * (tau * s).cos(),
                    };
                    out.extend([th, 0.0]);
                }
            }
        }
        out
    }

    /// Mechanical energy of the pendulum (kinetic plus potential).
    pub fn pendulum_energy(&self, x: &[f64]) -> f64 {
        let p = &self.pendulum;
        let (t1, w1, t2, w2) = (x[0], x[1], x[2], x[3]);
        let kinetic = 0.5 * (p.m1 + p.m2) * p.l1 * p.l1 * w1 * w1
            + 0.5 * p.m2 * p.l2 * p.l2 * w2 * w2
            + p.m2 * p.l1 * p.l2 * w1 * w2 * (t2 - t1).cos();
        let potential = -(p.m1 + p.m2) * p.g * p.l1 * t1.cos() - p.m2 * p.g * p.l2 * t2.cos();
        kinetic + potential
    }
}

/// Reads a reference trajectory, one output vector per row.
pub fn read_reference(path: &Path, output_dim: usize, horizon: usize) -> Result<Vec<f64>> {
    let rows = io::read_points(path)?;
    if rows.len() != horizon + 1 || rows.iter().any(|r| r.len() != output_dim) {
        return Err(Error::Parse(format!(
            "{}: expected {} rows of {output_dim} values",
            path.display(),
            horizon + 1
        )));
    }
    Ok(rows.concat())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReferenceKind {
    Sinusoid,
    CircleArc,
    FigureEight,
}

impl ReferenceKind {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "sinusoid" => Ok(Self::Sinusoid),
            "circle_arc" => Ok(Self::CircleArc),
            "figure_eight" => Ok(Self::FigureEight),
            other => Err(Error::InvalidParameter(format!(
                "unknown reference {other:?} (expected sinusoid, circle_arc or figure_eight)"
            ))),
        }
    }
}

/// Per-coordinate affine standardization `z = (x − mean) / scale`.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalization {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Normalization {
    /// Coordinates with zero spread (such as `y_0 = 0`) keep scale 1.
    pub fn fit(rows: &[Vec<f64>]) -> Result<Self> {
        let first = rows.first().ok_or(Error::EmptyInput("normalization rows"))?;
        let n = rows.len() as f64;
        let dim = first.len();
        let mut mean = vec![0.0; dim];
        for r in rows {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; dim];
        for r in rows {
            for ((s, v), m) in var.iter_mut().zip(r).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let scale = var
            .into_iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd > 1e-12 { sd } else { 1.0 }
            })
            .collect();
        Ok(Self { mean, scale })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            mean: vec![0.0; dim],
            scale: vec![1.0; dim],
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.mean.iter().zip(&self.scale))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }

    pub fn invert(&self, z: &[f64]) -> Vec<f64> {
        z.iter()
            .zip(self.mean.iter().zip(&self.scale))
            .map(|(v, (m, s))| m + s * v)
            .collect()
    }
}

/// `g(z) = f(mean + scale ⊙ z)`, so that `∇g = scale ⊙ ∇f`.
pub struct NormalizedObjective<'a> {
    pub inner: &'a dyn Objective,
    pub norm: &'a Normalization,
}

impl Objective for NormalizedObjective<'_> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn value_grad(&self, z: &[f64]) -> Result<(f64, Vec<f64>)> {
        if z.len() != self.norm.mean.len() {
            return Err(Error::DimensionMismatch {
                context: "normalized objective",
                expected: self.norm.mean.len(),
                actual: z.len(),
            });
        }
        let (v, g) = self.inner.value_grad(&self.norm.invert(z))?;
        Ok((v, g.iter().zip(&self.norm.scale).map(|(g, s)| g * s).collect()))
    }

    fn name(&self) -> String {
        format!("normalized({})", self.inner.name())
    }
}

/// Flattened trajectories `(u_0 … u_{N−1}, y_0 … y_N)` of one system.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryDataset {
    pub system: SystemModel,
    pub horizon: usize,
    pub seed: u64,
    pub rows: Vec<Vec<f64>>,
    pub normalization: Normalization,
}

/// Largest gap tolerated between a stored trajectory and its re-simulation.
pub const FEASIBILITY_TOL: f64 = 1e-10;

/// `count` rollouts under i.i.d. excitation; trajectory `i` draws its inputs
/// from its own stream seeded by `seed + i`.
pub fn generate_dataset(system: &SystemModel, horizon: usize, count: usize, seed: u64) -> Result<TrajectoryDataset> {
    if count == 0 || horizon == 0 {
        return Err(Error::InvalidParameter("count and horizon must be positive".into()));
    }
    let nu = system.input_dim();
    let chunks = crate::score::map_chunks(count, 64, |range| -> Result<Vec<Vec<f64>>> {
        range
            .map(|i| {
                let mut rng = rng::stream(seed.wrapping_add(i as u64), "trajectory-inputs");
                let mut inputs = Vec::with_capacity(horizon * nu);
                for _ in 0..horizon {
                    inputs.extend(system.sample_input(&mut rng));
                }
                let roll = system.rollout(&inputs)?;
                inputs.extend(roll.outputs);
                Ok(inputs)
            })
            .collect()
    });
    let mut rows = Vec::with_capacity(count);
    for c in chunks {
        rows.extend(c?);
    }
    let normalization = Normalization::fit(&rows)?;
    let ds = TrajectoryDataset {
        system: *system,
        horizon,
        seed,
        rows,
        normalization,
    };
    let worst = ds.max_feasibility_gap()?;
    if worst > FEASIBILITY_TOL {
        return Err(Error::InvalidParameter(format!(
            "generated trajectory fails re-simulation (gap {worst:e})"
        )));
    }
    Ok(ds)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Backtest {
    pub y_true: Vec<f64>,
    /// `‖y* − y_true‖` over the stacked outputs.
    pub gap: f64,
}

/// Replays the inputs of a flattened trajectory on the true system.
pub fn backtest(system: &SystemModel, horizon: usize, z: &[f64]) -> Result<Backtest> {
    let expected = system.trajectory_dim(horizon);
    if z.len() != expected {
        return Err(Error::DimensionMismatch {
            context: "backtest trajectory",
            expected,
            actual: z.len(),
        });
    }
    let split = horizon * system.input_dim();
    let y_true = system.rollout(&z[..split])?.outputs;
    let gap = numerics::dist(&z[split..], &y_true);
    Ok(Backtest { y_true, gap })
}

impl TrajectoryDataset {
    pub fn dim(&self) -> usize {
        self.system.trajectory_dim(self.horizon)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn normalized_rows(&self) -> Vec<Vec<f64>> {
        self.rows.iter().map(|r| self.normalization.apply(r)).collect()
    }

    pub fn max_feasibility_gap(&self) -> Result<f64> {
        let gaps = crate::score::map_chunks(self.rows.len(), 256, |range| -> Result<f64> {
            let mut worst: f64 = 0.0;
            for i in range {
                worst = worst.max(backtest(&self.system, self.horizon, &self.rows[i])?.gap);
            }
            Ok(worst)
        });
        gaps.into_iter().try_fold(0.0f64, |a, g| Ok(a.max(g?)))
    }

    /// Index and value of the row minimizing `f`.
    pub fn argmin(&self, f: &dyn Objective) -> Result<(usize, f64)> {
        let mut best = (0, f64::INFINITY);
        for (i, r) in self.rows.iter().enumerate() {
            let v = f.value(r)?;
            if v < best.1 {
                best = (i, v);
            }
        }
        if !best.1.is_finite() {
            return Err(Error::EmptyInput("dataset argmin"));
        }
        Ok(best)
    }

    /// Writes `meta.txt` and `data.csv` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        let join = |v: &[f64]| v.iter().map(|&x| io::fmt_f64(x)).collect::<Vec<_>>().join(" ");
        let meta = vec![
            ("system".to_string(), self.system.name().to_string()),
            ("horizon".into(), self.horizon.to_string()),
            ("state_dim".into(), self.system.state_dim().to_string()),
            ("input_dim".into(), self.system.input_dim().to_string()),
            ("output_dim".into(), self.system.output_dim().to_string()),
            ("dt".into(), io::fmt_f64(self.system.dt)),
            ("count".into(), self.rows.len().to_string()),
            ("seed".into(), self.seed.to_string()),
            ("input_law".into(), self.system.input_law().to_string()),
            ("norm_mean".into(), join(&self.normalization.mean)),
            ("norm_scale".into(), join(&self.normalization.scale)),
        ];
        io::write_text(&dir.join("meta.txt"), &io::render_key_values(&meta))?;
        io::write_points(&dir.join("data.csv"), &self.rows)
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let meta = io::parse_key_values(&io::read_text(&dir.join("meta.txt"))?)?;
        let get = |k: &str| io::lookup(&meta, k);
        let parse_usize = |k: &str| -> Result<usize> {
            get(k)?
                .parse()
                .map_err(|_| Error::Parse(format!("meta.txt: bad {k}")))
        };
        let mut system = SystemModel::by_name(get("system")?)?;
        system.dt = io::parse_f64(get("dt")?)?;
        let horizon = parse_usize("horizon")?;
        for (k, want) in [
            ("state_dim", system.state_dim()),
            ("input_dim", system.input_dim()),
            ("output_dim", system.output_dim()),
        ] {
            if parse_usize(k)? != want {
                return Err(Error::Parse(format!("meta.txt: {k} does not match {}", system.name())));
            }
        }
        let seed = get("seed")?
            .parse()
            .map_err(|_| Error::Parse("meta.txt: bad seed".into()))?;
        let floats = |k: &str| -> Result<Vec<f64>> { get(k)?.split_whitespace().map(io::parse_f64).collect() };
        let normalization = Normalization {
            mean: floats("norm_mean")?,
            scale: floats("norm_scale")?,
        };
        let rows = io::read_points(&dir.join("data.csv"))?;
        let dim = system.trajectory_dim(horizon);
        if rows.len() != parse_usize("count")?
            || rows.iter().any(|r| r.len() != dim)
            || normalization.mean.len() != dim
            || normalization.scale.len() != dim
        {
            return Err(Error::Parse(format!(
                "dataset in {} does not match its meta.txt",
                dir.display()
            )));
        }
        Ok(Self {
            system,
            horizon,
            seed,
            rows,
            normalization,
        })
    }
}
