use msopt::control::{generate_dataset, SystemModel};
use msopt::manifolds::Manifold;
use msopt::numerics::{self, log_sum_exp, svd, sym_eig, Matrix};
use msopt::objectives::{BrockettObjective, LinearObjective, Objective};
use msopt::optim::{drgd_run, riemannian_gd_baseline, DrgdConfig, ExactManifoldScore, ScoreOps, Termination};
use msopt::rng;
use msopt::score::{EmpiricalScoreOracle, QuadratureScoreOracle};
use msopt::validation::{feasibility_optimality_report, Baseline};
use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = Matrix> {
    prop::collection::vec(-3.0f64..3.0, rows * cols).prop_map(move |d| Matrix::from_vec(rows, cols, d).unwrap())
}

fn any_matrix() -> impl Strategy<Value = Matrix> {
    (1usize..=20, 1usize..=20).prop_flat_map(|(r, c)| matrix(r, c))
}

fn symmetric() -> impl Strategy<Value = Matrix> {
    (1usize..=12).prop_flat_map(|n| matrix(n, n)).prop_map(|m| m.sym())
}

fn orthonormality_error(q: &Matrix) -> f64 {
    let g = q.transpose().matmul(q).unwrap();
    g.sub(&Matrix::identity(g.rows())).unwrap().max_abs()
}

fn manifolds() -> [Manifold; 4] {
    [
        Manifold::circle(1.5).unwrap(),
        Manifold::sphere(3, 1.0).unwrap(),
        Manifold::sphere(6, 2.0).unwrap(),
        Manifold::orthogonal(3).unwrap(),
    ]
}

/// A point on `m` pushed along a random normal by `frac` of the safe tube radius.
fn tube_point(m: &Manifold, seed: u64, frac: f64) -> Vec<f64> {
    let mut r = rng::stream(seed, "test-tube-point");
    let p = m.sample_uniform_with(&mut r, 1).remove(0);
    let n = m.random_unit_normal(&p, &mut r);
    numerics::axpy(&p, frac * m.safe_tube_radius(), &n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn svd_reconstructs_with_orthonormal_factors(m in any_matrix()) {
        let f = svd(&m).unwrap();
        let scale = m.frobenius_norm().max(1e-300);
        prop_assert!(f.reconstruct().sub(&m).unwrap().frobenius_norm() <= 1e-10 * scale.max(1.0));
        prop_assert!(orthonormality_error(&f.u) <= 1e-10);
        prop_assert!(orthonormality_error(&f.vt.transpose()) <= 1e-10);
        prop_assert!(f.singular_values.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn sym_eig_reconstructs(m in symmetric()) {
        let e = sym_eig(&m).unwrap();
        let v = &e.eigenvectors;
        let lambda = Matrix::from_diag(&e.eigenvalues);
        let back = v.matmul(&lambda).unwrap().matmul(&v.transpose()).unwrap();
        prop_assert!(back.sub(&m).unwrap().max_abs() <= 1e-9 * m.max_abs().max(1.0));
    }

    #[test]
    fn log_sum_exp_shifts(v in prop::collection::vec(-50.0f64..50.0, 1..20), sign in prop::bool::ANY) {
        let c = if sign { 1e6 } else { -1e6 };
        let shifted: Vec<f64> = v.iter().map(|x| x + c).collect();
        let lhs = log_sum_exp(&shifted).unwrap();
        let rhs = log_sum_exp(&v).unwrap() + c;
        prop_assert!((lhs - rhs).abs() <= 1e-9 * c.abs());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn projection_is_idempotent_and_orthogonal(seed in any::<u64>(), frac in 0.0f64..0.9, which in 0usize..4) {
        let m = manifolds()[which];
        let x = tube_point(&m, seed, frac);
        let p = m.project(&x).unwrap();
        let pp = m.project(&p).unwrap();
        prop_assert!(numerics::dist(&p, &pp) <= 1e-10);
        let normal = numerics::sub(&x, &p);
        let d = m.ambient_dim();
        for i in 0..d {
            let mut e = vec![0.0; d];
            e[i] = 1.0;
            let t = m.tangent_project(&p, &e).unwrap();
            prop_assert!(numerics::dot(&normal, &t).abs() <= 1e-9);
        }
    }

    #[test]
    fn tangent_projector_is_symmetric_and_idempotent(seed in any::<u64>(), which in 0usize..4) {
        let m = manifolds()[which];
        let p = m.sample_uniform(1, seed).remove(0);
        let d = m.ambient_dim();
        let cols: Vec<Vec<f64>> = (0..d)
            .map(|i| {
                let mut e = vec![0.0; d];
                e[i] = 1.0;
                m.tangent_project(&p, &e).unwrap()
            })
            .collect();
        for i in 0..d {
            for j in 0..d {
                prop_assert!((cols[j][i] - cols[i][j]).abs() <= 1e-10);
            }
            let twice = m.tangent_project(&p, &cols[i]).unwrap();
            prop_assert!(numerics::dist(&twice, &cols[i]) <= 1e-10);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn exact_oracle_jacobians_are_symmetric_psd(seed in any::<u64>(), sigma in 0.05f64..0.6, frac in 0.0f64..0.45) {
        let circle = Manifold::circle(1.0).unwrap();
        let sphere = Manifold::sphere(3, 1.0).unwrap();
        let quad = QuadratureScoreOracle::new(&circle, 512, sigma).unwrap();
        let emp = EmpiricalScoreOracle::new(&sphere.sample_uniform(200, seed), sigma).unwrap();
        for (oracle, m) in [(&quad as &dyn ScoreOps, circle), (&emp as &dyn ScoreOps, sphere)] {
            let x = tube_point(&m, seed, frac);
            let j = oracle.eval(&x).unwrap().tweedie_jacobian;
            prop_assert!(j.asymmetry() <= 1e-9);
            let e = sym_eig(&j.sym()).unwrap();
            prop_assert!(e.eigenvalues[0] >= -1e-9);
        }
    }

    #[test]
    fn empirical_oracle_is_translation_equivariant(
        seed in any::<u64>(),
        shift in prop::collection::vec(-5.0f64..5.0, 3),
        sigma in 0.1f64..1.0,
    ) {
        let sphere = Manifold::sphere(3, 1.0).unwrap();
        let data = sphere.sample_uniform(60, seed);
        let moved: Vec<Vec<f64>> = data.iter().map(|p| numerics::add(p, &shift)).collect();
        let a = EmpiricalScoreOracle::new(&data, sigma).unwrap();
        let b = EmpiricalScoreOracle::new(&moved, sigma).unwrap();
        let x = tube_point(&sphere, seed ^ 1, 0.4);
        let ea = a.eval(&x).unwrap();
        let eb = b.eval(&numerics::add(&x, &shift)).unwrap();
        prop_assert!(numerics::dist(&numerics::add(&ea.tweedie_mean, &shift), &eb.tweedie_mean) <= 1e-9);
        prop_assert!(ea.tweedie_jacobian.sub(&eb.tweedie_jacobian).unwrap().max_abs() <= 1e-8);
    }

    #[test]
    fn brockett_value_is_invariant_under_column_signs(seed in any::<u64>(), signs in prop::collection::vec(prop::bool::ANY, 4)) {
        let f = BrockettObjective::random_instance(4, seed).unwrap();
        let mut r = rng::stream(seed, "test-brockett-x");
        let x: Vec<f64> = (0..16).map(|_| r.sample(StandardNormal)).collect();
        let flipped: Vec<f64> = x
            .iter()
            .enumerate()
            .map(|(k, v)| if signs[k % 4] { -v } else { *v })
            .collect();
        prop_assert!((f.value(&x).unwrap() - f.value(&flipped).unwrap()).abs() <= 1e-9 * (1.0 + f.value(&x).unwrap().abs()));
    }

    #[test]
    fn tracking_objective_is_nonnegative_with_zero_only_at_reference(seed in any::<u64>(), scale in 0.0f64..2.0) {
        let sys = SystemModel::unicycle();
        let horizon = 4;
        let f = sys
            .tracking_objective(sys.reference(msopt::control::ReferenceKind::Sinusoid, horizon, 0.5), horizon)
            .unwrap();
        let mut r = rng::stream(seed, "test-tracking");
        let z: Vec<f64> = (0..f.dim()).map(|_| scale * r.sample::<f64, _>(StandardNormal)).collect();
        prop_assert!(f.value(&z).unwrap() >= 0.0);

        let mut at_ref = vec![0.0; f.dim()];
        at_ref[f.output_offset()..].copy_from_slice(f.reference());
        prop_assert!(f.value(&at_ref).unwrap().abs() <= 1e-14);
        // Angle outputs carry zero weight; any other perturbation costs.
        let mut bumped = at_ref.clone();
        bumped[0] += 0.1;
        prop_assert!(f.value(&bumped).unwrap() > 0.0);
    }
}

#[test]
fn haar_trace_on_o3_has_unit_variance() {
    let m = Manifold::orthogonal(3).unwrap();
    let traces: Vec<f64> = m.sample_uniform(100_000, 17).iter().map(|x| x[0] + x[4] + x[8]).collect();
    let mean = traces.iter().sum::<f64>() / traces.len() as f64;
    let var = traces.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (traces.len() - 1) as f64;
    assert!(mean.abs() < 0.02, "mean {mean}");
    assert!((var - 1.0).abs() <= 0.05, "variance {var}");
}

#[test]
fn quadrature_jacobian_spectrum_tracks_the_projection_derivative() {
    let circle = Manifold::circle(1.0).unwrap();
    let oracle = QuadratureScoreOracle::new(&circle, 8192, 0.02).unwrap();
    for k in 0..50 {
        let phi = 0.37 * k as f64;
        let radius = 0.8 + 0.4 * k as f64 / 49.0;
        let x = [radius * phi.cos(), radius * phi.sin()];
        let e = sym_eig(&oracle.eval(&x).unwrap().tweedie_jacobian.sym()).unwrap();
        assert!(e.eigenvalues[0] >= -1e-9, "{:?}", e.eigenvalues);
        // Tangential stretch 1/|x|: inside the unit interval on and outside
        // the circle, above it on the concave side.
        assert!((e.eigenvalues[1] - 1.0 / radius).abs() <= 0.02, "r={radius}: {:?}", e.eigenvalues);
        if radius >= 1.0 {
            assert!(e.eigenvalues[1] <= 1.0 + 1e-9, "r={radius}: {:?}", e.eigenvalues);
        }
    }
}

#[test]
fn empirical_oracle_agrees_with_quadrature_within_sampling_error() {
    // Replicated sample clouds estimate the population Tweedie mean that the
    // quadrature oracle computes directly.
    let circle = Manifold::circle(1.0).unwrap();
    let sigma = 0.2;
    let quad = QuadratureScoreOracle::new(&circle, 4096, sigma).unwrap();
    let replicates = 40;
    for (k, x) in [[1.2, 0.1], [0.0, -0.8], [-0.9, 0.6]].iter().enumerate() {
        let truth = quad.mean(x).unwrap();
        let estimates: Vec<Vec<f64>> = (0..replicates)
            .map(|r| {
                let data = circle.sample_uniform(2000, 1000 * k as u64 + r);
                EmpiricalScoreOracle::new(&data, sigma).unwrap().mean(x).unwrap()
            })
            .collect();
        for c in 0..2 {
            let vals: Vec<f64> = estimates.iter().map(|e| e[c]).collect();
            let mean = vals.iter().sum::<f64>() / replicates as f64;
            let sd = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (replicates - 1) as f64).sqrt();
            let se = sd / (replicates as f64).sqrt();
            assert!((mean - truth[c]).abs() <= 3.0 * se, "x={x:?} coord {c}: {mean} vs {} (se {se})", truth[c]);
        }
    }
}

#[test]
fn brockett_optimum_matches_polished_search_on_o3() {
    let m = Manifold::orthogonal(3).unwrap();
    let f = BrockettObjective::random_instance(3, 5).unwrap();
    let optimum = f.optimum().unwrap();
    let step = 0.2 / f.a().operator_norm().unwrap().max(1.0) / 3.0;
    let mut best = f64::INFINITY;
    for x0 in m.sample_uniform(64, 8) {
        best = best.min(f.value(&x0).unwrap());
        let run = riemannian_gd_baseline(&m, &f, &x0, step, 4000, 1e-12).unwrap();
        best = best.min(f.value(&run.final_point).unwrap());
    }
    assert!((best - optimum).abs() <= 1e-6, "search {best} vs optimum {optimum}");
}

#[test]
fn drgd_with_exact_adapter_stays_on_the_manifold() {
    for m in manifolds() {
        let exact = ExactManifoldScore::new(m);
        let d = m.ambient_dim();
        let f = LinearObjective::new((0..d).map(|i| 1.0 + i as f64).collect()).unwrap();
        let x0 = m.sample_uniform(1, 3).remove(0);
        let cfg = DrgdConfig {
            gamma: 0.05,
            max_steps: 300,
            stop_grad_tol: 1e-10,
        };
        let run = drgd_run(&exact, &f, &x0, &cfg, Some(&m)).unwrap();
        assert!(run.record.rows.iter().all(|r| r.feasibility <= 1e-9), "{}", m.name());
        assert!(m.constraint_residual(&run.final_point) <= 1e-9);
    }
}

#[test]
fn running_squared_gradient_average_decreases_for_converged_runs() {
    let m = Manifold::sphere(4, 1.0).unwrap();
    let f = LinearObjective::new(vec![1.0, -2.0, 0.5, 3.0]).unwrap();
    let x0 = m.sample_uniform(1, 9).remove(0);
    let run = riemannian_gd_baseline(&m, &f, &x0, 0.05, 20_000, 1e-9).unwrap();
    assert_eq!(run.termination, Termination::Converged);
    let avg = msopt::optim::running_avg_sq_grad(&run.record.rows);
    // Row 0 has no step yet; the Cesàro tail starts once descent is underway.
    let tail = &avg[avg.len() / 10..];
    assert!(tail.windows(2).all(|w| w[1] <= w[0] + 1e-15));
}

#[test]
fn reports_are_pure_functions_of_the_record() {
    let m = Manifold::sphere(3, 1.0).unwrap();
    let data = m.sample_uniform(500, 2);
    let oracle = EmpiricalScoreOracle::new(&data, 0.15).unwrap();
    let f = LinearObjective::new(vec![0.3, -1.0, 0.2]).unwrap();
    let cfg = DrgdConfig {
        gamma: 0.02,
        max_steps: 100,
        stop_grad_tol: 1e-10,
    };
    let run = drgd_run(&oracle, &f, &data[0], &cfg, Some(&m)).unwrap();
    let reloaded_rows = msopt::optim::RunRecord::from_csv(&run.record.to_csv()).unwrap();
    let mut reloaded = run.record.clone();
    reloaded.rows = reloaded_rows;
    let a = feasibility_optimality_report(&run.record, &run.final_point, Baseline::Manifold(&m), Some(-1.0)).unwrap();
    let b = feasibility_optimality_report(&reloaded, &run.final_point, Baseline::Manifold(&m), Some(-1.0)).unwrap();
    assert_eq!(a.summary(), b.summary());
    assert_eq!(a.to_csv(), b.to_csv());
}

#[test]
fn dataset_layout_matches_tracking_objective() {
    for sys in [SystemModel::unicycle(), SystemModel::double_pendulum()] {
        let horizon = 6;
        let ds = generate_dataset(&sys, horizon, 5, 1).unwrap();
        let f = sys.tracking_objective(vec![0.0; (horizon + 1) * sys.output_dim()], horizon).unwrap();
        assert_eq!(ds.dim(), f.dim());
        assert_eq!(ds.dim(), sys.trajectory_dim(horizon));
    }
}
