use std::sync::Arc;

use chg_core::fem::FeSpace;
use chg_core::forward::{make_smoothed_disc, run_forward, ForwardConfig, TimeGrid};
use chg_core::mesh::make_box_mesh;
use chg_core::model::ModelParams;
use chg_core::optimizer::{reconstruct, OptimConfig, ReducedProblem, SigmaMode, StopReason, Targets};
use chg_core::NodalField;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn small() -> (Arc<FeSpace>, ModelParams, TimeGrid, Targets) {
    let space = Arc::new(FeSpace::new(Arc::new(make_box_mesh(2, &[-2.0, -2.0], &[2.0, 2.0], &[8, 8]).unwrap())).unwrap());
    let params = ModelParams { d_phi: 0.05, eps: 0.3, ..Default::default() };
    let grid = TimeGrid::new(0.5, 5).unwrap();
    let phi = make_smoothed_disc(&space, &[0.3, -0.2], 0.9, 0.3).unwrap();
    let sigma = phi.map(|v| 1.0 - v);
    let traj = run_forward(&space, &phi, &sigma, &params, &grid, &ForwardConfig::default()).unwrap();
    let targets = Targets::new(space.mesh().clone(), traj.final_phi().clone(), Some(traj.final_sigma().clone())).unwrap();
    (space, params, grid, targets)
}

#[test]
fn cost_and_gradient_scale_with_the_weights() {
    let (space, params, grid, targets) = small();
    let base = OptimConfig { lambda2: 0.5, alpha2: 0.02, sigma_mode: SigmaMode::Optimize, ..Default::default() };
    let c = 3.7;
    let scaled =
        OptimConfig { lambda1: c * base.lambda1, lambda2: c * base.lambda2, alpha1: c * base.alpha1, alpha2: c * base.alpha2, ..base };
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let phi0 = space.field((0..space.ndofs()).map(|_| rng.gen_range(0.1..0.9)).collect()).unwrap();
    let sigma0 = space.field((0..space.ndofs()).map(|_| rng.gen_range(0.1..0.9)).collect()).unwrap();
    let eval = |cfg: &OptimConfig| {
        let p = ReducedProblem { space: &space, params: &params, grid, targets: &targets, cfg };
        let ev = p.evaluate(&phi0, &sigma0).unwrap();
        let g = p.gradient(&ev).unwrap();
        (ev.cost, g)
    };
    let (j1, g1) = eval(&base);
    let (j2, g2) = eval(&scaled);
    assert!((j2 - c * j1).abs() <= 1e-12 * j2.abs());
    let rel = |a: &NodalField, b: &NodalField| {
        let num = a.values().iter().zip(b.values()).fold(0.0f64, |m, (x, y)| m.max((x - c * y).abs()));
        num / a.values().iter().fold(1e-300f64, |m, x| m.max(x.abs()))
    };
    assert!(rel(&g2.phi, &g1.phi) <= 1e-10);
    assert!(rel(&g2.sigma, &g1.sigma) <= 1e-10);
}

#[test]
fn descent_to_a_stationary_point() {
    let (space, params, grid, targets) = small();
    let cfg = OptimConfig { tol_v: Some(3e-5), max_iter: 400, ..Default::default() };
    let guess = space.constant(0.2);
    let rec = reconstruct(space.clone(), &guess, &space.constant(1.0), &targets, &params, &grid, &cfg, None).unwrap();
    assert!(rec.record.is_monotone());
    assert_eq!(rec.record.stop, StopReason::Tolerance);
    assert!(rec.record.final_cost() < rec.record.rows[0].cost);
    for w in rec.record.rows.windows(2) {
        let (m, step) = (w[0].m.unwrap(), w[0].step.unwrap());
        assert!((step - cfg.rho.powi(m as i32)).abs() <= 1e-15);
    }

    let p = ReducedProblem { space: &space, params: &params, grid, targets: &targets, cfg: &cfg };
    let ev = p.evaluate(&rec.phi0, &rec.sigma0).unwrap();
    let g = p.gradient(&ev).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..100 {
        let other = space.field((0..space.ndofs()).map(|_| rng.gen_range(0.0..1.0)).collect()).unwrap();
        let d = other.with_values(other.values().iter().zip(rec.phi0.values()).map(|(a, b)| a - b).collect());
        let pairing = space.l2_inner(&g.phi, &d).unwrap();
        // lumped and consistent P1 norms differ by at most a factor 2 in 2D
        let bound = 2.0 * cfg.tol_v.unwrap() / cfg.rho * space.l2_norm(&d).unwrap();
        assert!(pairing >= -bound, "{pairing} vs {bound}");
    }
}
