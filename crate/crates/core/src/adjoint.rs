//! Discrete adjoint of the forward scheme: terminal solve and backward sweep.
//!
//! With `A^n` the Jacobian of step `n` in its own unknowns and `B^{n+1}` the
//! Jacobian of step `n + 1` in the unknowns of step `n`, the multipliers solve
//! `(A^N)^T L^N = dJ/dX^N` and `(A^n)^T L^n = -(B^{n+1})^T L^{n+1}`.

use crate::error::{Error, Result};
use crate::fem::{load, FeSpace};
use crate::field::NodalField;
use crate::forward::{proliferation_mass, reaction_potential, step_jacobian, death_rate, Trajectory};
use crate::linalg::{LinearSolver, SolverConfig};
use crate::model::{ddpotential_minus, ModelParams};

/// Multipliers `(p^n, q^n, r^n)` for `n = 1..=N`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjointTrajectory {
    p: Vec<NodalField>,
    q: Vec<NodalField>,
    r: Vec<NodalField>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdjointState {
    pub p: NodalField,
    pub q: NodalField,
    pub r: NodalField,
}

impl AdjointTrajectory {
    pub fn steps(&self) -> usize {
        self.p.len()
    }

    pub fn p(&self, n: usize) -> &NodalField {
        &self.p[n - 1]
    }

    pub fn q(&self, n: usize) -> &NodalField {
        &self.q[n - 1]
    }

    pub fn r(&self, n: usize) -> &NodalField {
        &self.r[n - 1]
    }

    pub fn state(&self, n: usize) -> AdjointState {
        AdjointState { p: self.p(n).clone(), q: self.q(n).clone(), r: self.r(n).clone() }
    }
}

/// `-(B^{n+1})^T L^{n+1}` split into its phi and sigma parts; the mu part is
/// zero. `n` indexes the earlier step, `n + 1` the multipliers.
pub(crate) fn backward_coupling(
    space: &FeSpace,
    params: &ModelParams,
    traj: &Trajectory,
    n: usize,
    next: &AdjointState,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let p = params;
    let dt = traj.dt;
    let phi = traj.phi[n].values();
    let s = reaction_potential(p, traj.phi[n + 1].values(), traj.mu[n + 1].values(), traj.sigma[n + 1].values());
    let (pv, qv, rv) = (next.p.values(), next.q.values(), next.r.values());
    let (prol, death) = (p.proliferation, p.death);
    let extra = load(space, |qp| {
        let u = qp.eval(phi);
        let a = dt * p.delta * p.p0 * prol.derivative(u) * qp.eval(&s) * (qp.eval(pv) - qp.eval(rv));
        let b = dt * death_rate(p, qp) * death.derivative(u) * qp.eval(pv);
        let c = dt * p.gamma * ddpotential_minus(u) * qp.eval(qv);
        a - b - c
    })?;
    let mp = space.mass().mul_vec(pv);
    let dual_phi = mp.iter().zip(&extra).map(|(a, b)| a + b).collect();
    let dual_sigma = space.mass().mul_vec(rv);
    Ok((dual_phi, dual_sigma))
}

fn solve_step(
    space: &FeSpace,
    params: &ModelParams,
    traj: &Trajectory,
    n: usize,
    rhs: Vec<f64>,
    solver: &mut LinearSolver,
) -> Result<AdjointState> {
    let dim = space.ndofs();
    let a_p = proliferation_mass(space, params, traj.phi[n - 1].values())?;
    let a = step_jacobian(space, params, traj.dt, &a_p, traj.phi[n].values())?.monolithic()?;
    let x = solver.solve_transpose(&a, &rhs)?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("adjoint solution".into()));
    }
    Ok(AdjointState {
        p: space.field(x[..dim].to_vec())?,
        q: space.field(x[dim..2 * dim].to_vec())?,
        r: space.field(x[2 * dim..].to_vec())?,
    })
}

fn check_traj(space: &FeSpace, traj: &Trajectory) -> Result<()> {
    if traj.phi.len() < 2 || traj.mu.len() != traj.phi.len() || traj.sigma.len() != traj.phi.len() {
        return Err(Error::Dimension("trajectory is incomplete".into()));
    }
    traj.final_phi().check_on(space.mesh())
}

/// Terminal multipliers.
#[allow(clippy::too_many_arguments)]
pub fn adjoint_init(
    space: &FeSpace,
    traj: &Trajectory,
    phi_meas: &NodalField,
    sigma_meas: Option<&NodalField>,
    params: &ModelParams,
    lambda1: f64,
    lambda2: f64,
    solver: &mut LinearSolver,
) -> Result<AdjointState> {
    check_traj(space, traj)?;
    phi_meas.check_on(space.mesh())?;
    let dim = space.ndofs();
    let nn = traj.steps();
    let m = space.mass();
    let mut rhs = vec![0.0; 3 * dim];
    let e: Vec<f64> = traj.phi[nn].values().iter().zip(phi_meas.values()).map(|(a, b)| lambda1 * (a - b)).collect();
    rhs[..dim].copy_from_slice(&m.mul_vec(&e));
    if lambda2 != 0.0 {
        let sm = sigma_meas.ok_or_else(|| Error::Config("nutrient target required when lambda2 > 0".into()))?;
        sm.check_on(space.mesh())?;
        let e: Vec<f64> = traj.sigma[nn].values().iter().zip(sm.values()).map(|(a, b)| lambda2 * (a - b)).collect();
        rhs[2 * dim..].copy_from_slice(&m.mul_vec(&e));
    }
    solve_step(space, params, traj, nn, rhs, solver)
}

/// Multipliers of step `n` from those of step `n + 1`, `1 <= n < N`.
pub fn adjoint_step(
    space: &FeSpace,
    n: usize,
    next: &AdjointState,
    traj: &Trajectory,
    params: &ModelParams,
    solver: &mut LinearSolver,
) -> Result<AdjointState> {
    check_traj(space, traj)?;
    if n == 0 || n >= traj.steps() {
        return Err(Error::Dimension(format!("adjoint step {n} outside 1..{}", traj.steps())));
    }
    let (dphi, dsig) = backward_coupling(space, params, traj, n, next)?;
    let dim = space.ndofs();
    let mut rhs = vec![0.0; 3 * dim];
    rhs[..dim].copy_from_slice(&dphi);
    rhs[2 * dim..].copy_from_slice(&dsig);
    solve_step(space, params, traj, n, rhs, solver)
}

pub fn run_adjoint(
    space: &FeSpace,
    traj: &Trajectory,
    phi_meas: &NodalField,
    sigma_meas: Option<&NodalField>,
    params: &ModelParams,
    lambda1: f64,
    lambda2: f64,
    solver_cfg: &SolverConfig,
) -> Result<AdjointTrajectory> {
    let nn = traj.steps();
    let mut solver = LinearSolver::new(*solver_cfg);
    let mut states = Vec::with_capacity(nn);
    let last = adjoint_init(space, traj, phi_meas, sigma_meas, params, lambda1, lambda2, &mut solver)
        .map_err(|e| e.at_step(nn))?;
    states.push(last);
    for n in (1..nn).rev() {
        let next = states.last().expect("state");
        let s = adjoint_step(space, n, next, traj, params, &mut solver).map_err(|e| e.at_step(n))?;
        states.push(s);
    }
    states.reverse();
    let mut out = AdjointTrajectory { p: Vec::with_capacity(nn), q: Vec::with_capacity(nn), r: Vec::with_capacity(nn) };
    for s in states {
        out.p.push(s.p);
        out.q.push(s.q);
        out.r.push(s.r);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::{make_smoothed_disc, run_forward, ForwardConfig, TimeGrid};
    use crate::mesh::make_box_mesh;
    use std::sync::Arc;

    fn setup() -> (FeSpace, ModelParams, Trajectory) {
        let s = FeSpace::new(Arc::new(make_box_mesh(2, &[-5.0, -5.0], &[5.0, 5.0], &[6, 6]).unwrap())).unwrap();
        let p = ModelParams::default();
        let phi0 = make_smoothed_disc(&s, &[0.5, 0.0], 2.0, 0.6).unwrap();
        let sig0 = phi0.map(|v| 1.0 - v);
        let t = run_forward(&s, &phi0, &sig0, &p, &TimeGrid::new(0.3, 3).unwrap(), &ForwardConfig::default()).unwrap();
        (s, p, t)
    }

    #[test]
    fn exact_fit_gives_zero_adjoint() {
        let (s, p, t) = setup();
        let a = run_adjoint(&s, &t, t.final_phi(), Some(t.final_sigma()), &p, 1.0, 1.0, &SolverConfig::default()).unwrap();
        assert_eq!(a.steps(), 3);
        for n in 1..=3 {
            assert!(a.p(n).values().iter().chain(a.q(n).values()).chain(a.r(n).values()).all(|v| v.abs() < 1e-12));
        }
        let zero = s.zeros();
        let a = run_adjoint(&s, &t, &zero, Some(&zero), &p, 0.0, 0.0, &SolverConfig::default()).unwrap();
        assert!(a.p(1).values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn linear_in_mismatch() {
        let (s, p, t) = setup();
        let shift = |f: &NodalField, c: f64| f.map(|v| v - c);
        let a1 = run_adjoint(&s, &t, &shift(t.final_phi(), 0.1), Some(&shift(t.final_sigma(), -0.05)), &p, 1.0, 1.0, &SolverConfig::default()).unwrap();
        let a3 = run_adjoint(&s, &t, &shift(t.final_phi(), 0.3), Some(&shift(t.final_sigma(), -0.15)), &p, 1.0, 1.0, &SolverConfig::default()).unwrap();
        for n in 1..=3 {
            for (x, y) in a1.p(n).values().iter().zip(a3.p(n).values()) {
                assert!((3.0 * x - y).abs() <= 1e-10 * (1.0 + y.abs()));
            }
        }
    }

    #[test]
    fn step_index_checked() {
        let (s, p, t) = setup();
        let st = AdjointState { p: s.zeros(), q: s.zeros(), r: s.zeros() };
        let mut solver = LinearSolver::new(SolverConfig::default());
        assert!(adjoint_step(&s, 3, &st, &t, &p, &mut solver).is_err());
        assert!(adjoint_step(&s, 0, &st, &t, &p, &mut solver).is_err());
        let z = adjoint_step(&s, 1, &st, &t, &p, &mut solver).unwrap();
        assert!(z.p.values().iter().all(|v| *v == 0.0));
    }
}
