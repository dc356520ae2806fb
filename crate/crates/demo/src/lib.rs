//! Browser bindings for a unit-circle playground: the Tweedie field of a
//! sampled circle, DRGD paths driven by it, and the landing decay law.
//!
//! All arrays cross the boundary flattened; record layouts are given on each
//! function.

use msopt::manifolds::Manifold;
use msopt::numerics;
use msopt::objectives::{LinearObjective, Objective};
use msopt::optim::{drgd_step, ScoreOps};
use msopt::score::EmpiricalScoreOracle;
use msopt::validation::landing_check;
use wasm_bindgen::prelude::*;

fn unit_circle() -> Manifold {
    Manifold::circle(1.0).expect("unit radius is valid")
}

fn oracle(count: usize, sigma: f64, seed: u32) -> msopt::Result<(Vec<Vec<f64>>, EmpiricalScoreOracle)> {
    let data = unit_circle().sample_uniform(count, u64::from(seed));
    let oracle = EmpiricalScoreOracle::new(&data, sigma)?;
    Ok((data, oracle))
}

/// `count` uniform circle samples as `[x, y]` pairs.
pub fn samples(count: usize, seed: u32) -> Vec<f64> {
    unit_circle().sample_uniform(count, u64::from(seed)).concat()
}

/// Tweedie means on a `grid × grid` lattice over `[-extent, extent]²`, as
/// `[x, y, mean_x, mean_y]` records.
pub fn field(count: usize, sigma: f64, seed: u32, grid: usize, extent: f64) -> msopt::Result<Vec<f64>> {
    let (_, oracle) = oracle(count, sigma, seed)?;
    let mut out = Vec::with_capacity(grid * grid * 4);
    let step = if grid > 1 { 2.0 * extent / (grid - 1) as f64 } else { 0.0 };
    for i in 0..grid {
        for j in 0..grid {
            let x = [-extent + step * j as f64, -extent + step * i as f64];
            let m = oracle.mean(&x)?;
            out.extend_from_slice(&[x[0], x[1], m[0], m[1]]);
        }
    }
    Ok(out)
}

const START_TURN: f64 = std::f64::consts::FRAC_PI_3;

/// DRGD iterates for `f(x) = cos(angle) x + sin(angle) y`, started from the
/// sample nearest the point a sixth of a turn from the maximizer of `f`.
/// Records are `[x, y, f(x)]`; the run stops early if the oracle fails.
pub fn path(count: usize, sigma: f64, seed: u32, angle: f64, gamma: f64, steps: usize) -> msopt::Result<Vec<f64>> {
    let (data, oracle) = oracle(count, sigma, seed)?;
    let f = LinearObjective::new(vec![angle.cos(), angle.sin()])?;
    let target = [(angle + START_TURN).cos(), (angle + START_TURN).sin()];
    let mut x = data
        .iter()
        .min_by(|a, b| numerics::dist(a, &target).total_cmp(&numerics::dist(b, &target)))
        .cloned()
        .ok_or(msopt::Error::EmptyInput("demo samples"))?;
    let mut out = vec![x[0], x[1], f.value(&x)?];
    for _ in 0..steps {
        match drgd_step(&oracle, &f, &x, gamma) {
            Ok(s) if numerics::all_finite(&s.next) => x = s.next,
            _ => break,
        }
        out.extend_from_slice(&[x[0], x[1], f.value(&x)?]);
    }
    Ok(out)
}

/// Half the squared distance to the unit circle under the exact landing flow
/// from `(1 + start_distance, 0)`, as `[t, measured, predicted]` records.
pub fn landing(eta: f64, start_distance: f64, t_end: f64) -> msopt::Result<Vec<f64>> {
    let rep = landing_check(&unit_circle(), eta, &[1.0 + start_distance, 0.0], t_end, 1e-3)?;
    Ok(rep
        .times
        .iter()
        .zip(rep.measured.iter().zip(&rep.predicted))
        .flat_map(|(t, (m, p))| [*t, *m, *p])
        .collect())
}

fn js(e: msopt::Error) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen(js_name = circleSamples)]
pub fn circle_samples(count: usize, seed: u32) -> Vec<f64> {
    samples(count, seed)
}

#[wasm_bindgen(js_name = tweedieField)]
pub fn tweedie_field(count: usize, sigma: f64, seed: u32, grid: usize, extent: f64) -> Result<Vec<f64>, JsError> {
    field(count, sigma, seed, grid, extent).map_err(js)
}

#[wasm_bindgen(js_name = drgdPath)]
pub fn drgd_path(count: usize, sigma: f64, seed: u32, angle: f64, gamma: f64, steps: usize) -> Result<Vec<f64>, JsError> {
    path(count, sigma, seed, angle, gamma, steps).map_err(js)
}

#[wasm_bindgen(js_name = landingCurve)]
pub fn landing_curve(eta: f64, start_distance: f64, t_end: f64) -> Result<Vec<f64>, JsError> {
    landing(eta, start_distance, t_end).map_err(js)
}
