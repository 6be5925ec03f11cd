//! Semi-implicit convex-split time stepping of the coupled (phi, mu, sigma)
//! system, with Newton on the implicit cubic term.

use crate::error::{Error, Result};
use crate::fem::{load, nonlinear_load, weighted_mass, FeSpace, SparseMatrix};
use crate::field::NodalField;
use crate::linalg::{newton_solve, BlockSystem, LinearSolver, SolverConfig};
use crate::model::{ddpotential_plus, dpotential_minus, dpotential_plus, ModelParams};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    t_final: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(t_final: f64, steps: usize) -> Result<Self> {
        if steps == 0 {
            return Err(Error::Config("time grid needs at least one step".into()));
        }
        if !(t_final > 0.0) || !t_final.is_finite() {
            return Err(Error::Config(format!("final time must be positive, got {t_final}")));
        }
        Ok(TimeGrid { t_final, steps })
    }

    /// Grid with `round(T / dt)` steps.
    pub fn from_step(t_final: f64, dt: f64) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::Config(format!("time step must be positive, got {dt}")));
        }
        Self::new(t_final, (t_final / dt).round().max(1.0) as usize)
    }

    pub fn t_final(&self) -> f64 {
        self.t_final
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dt(&self) -> f64 {
        self.t_final / self.steps as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForwardConfig {
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    pub solver: SolverConfig,
}

impl Default for ForwardConfig {
    fn default() -> Self {
        ForwardConfig { newton_tol: 1e-10, newton_max_iter: 30, solver: SolverConfig::default() }
    }
}

impl ForwardConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.newton_tol > 0.0) || self.newton_max_iter == 0 {
            return Err(Error::Config("Newton tolerance and iteration cap must be positive".into()));
        }
        self.solver.validate()
    }
}

/// All snapshots `n = 0..=N` of a forward run.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub dt: f64,
    pub phi: Vec<NodalField>,
    /// `mu[0]` is a zero placeholder; the chemical potential exists from step 1.
    pub mu: Vec<NodalField>,
    pub sigma: Vec<NodalField>,
    /// Newton iterations per step, `newton_iters[n - 1]` for step `n`.
    pub newton_iters: Vec<usize>,
}

impl Trajectory {
    pub fn steps(&self) -> usize {
        self.phi.len() - 1
    }

    pub fn final_phi(&self) -> &NodalField {
        self.phi.last().expect("non-empty trajectory")
    }

    pub fn final_sigma(&self) -> &NodalField {
        self.sigma.last().expect("non-empty trajectory")
    }

    pub fn total_newton_iters(&self) -> usize {
        self.newton_iters.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub phi: NodalField,
    pub mu: NodalField,
    pub sigma: NodalField,
    pub newton_iters: usize,
}

/// Nodal `s = sigma / delta + chi (1 - phi) - mu`.
pub(crate) fn reaction_potential(params: &ModelParams, phi: &[f64], mu: &[f64], sigma: &[f64]) -> Vec<f64> {
    (0..phi.len())
        .map(|i| sigma[i] / params.delta + params.chi * (1.0 - phi[i]) - mu[i])
        .collect()
}

/// `A_P = Q[P(phi_prev) chi_i chi_j]`.
pub(crate) fn proliferation_mass(space: &FeSpace, params: &ModelParams, phi_prev: &[f64]) -> Result<SparseMatrix<f64>> {
    let rate = params.proliferation;
    weighted_mass(space, |qp| rate.value(qp.eval(phi_prev)))
}

/// Death rate at a quadrature point.
#[inline]
pub(crate) fn death_rate(params: &ModelParams, qp: &crate::fem::QuadPoint) -> f64 {
    match &params.c_field {
        Some(f) => qp.eval(f.values()),
        None => params.c,
    }
}

/// Quantities of one step that depend on the previous state only.
pub(crate) struct StepOperators {
    pub a_p: SparseMatrix<f64>,
    /// `Q[c h(phi_prev) chi_i]`.
    pub death: Vec<f64>,
    /// `Q[F_-'(phi_prev) chi_i]`.
    pub concave: Vec<f64>,
}

impl StepOperators {
    pub fn new(space: &FeSpace, params: &ModelParams, phi_prev: &NodalField) -> Result<Self> {
        phi_prev.check_on(space.mesh())?;
        let u = phi_prev.values();
        let a_p = proliferation_mass(space, params, u)?;
        let rate = params.death;
        let death = load(space, |qp| death_rate(params, qp) * rate.value(qp.eval(u)))?;
        let concave = nonlinear_load(space, dpotential_minus::<f64>, phi_prev)?;
        Ok(StepOperators { a_p, death, concave })
    }
}

/// Jacobian of the step residual with respect to `(phi, mu, sigma)`.
pub(crate) fn step_jacobian(
    space: &FeSpace,
    params: &ModelParams,
    dt: f64,
    a_p: &SparseMatrix<f64>,
    phi: &[f64],
) -> Result<BlockSystem> {
    let p = params;
    let n = space.ndofs();
    let m = space.mass();
    let k = space.stiffness();
    let conv = weighted_mass(space, |qp| ddpotential_plus(qp.eval(phi)))?;
    let dp = dt * p.delta * p.p0;
    let mut sys = BlockSystem::new(vec![n; 3]);
    sys.set_block(0, 0, SparseMatrix::combination(&[(1.0, m), (dp * p.chi, a_p)])?)?;
    sys.set_block(0, 1, SparseMatrix::combination(&[(dt * p.d_phi, k), (dp, a_p)])?)?;
    sys.set_block(0, 2, a_p.scaled(-dt * p.p0))?;
    sys.set_block(1, 0, SparseMatrix::combination(&[(dt * p.eps * p.eps, k), (dt * p.gamma, &conv)])?)?;
    sys.set_block(1, 1, m.scaled(-dt))?;
    sys.set_block(1, 2, m.scaled(-dt * p.chi))?;
    sys.set_block(2, 0, SparseMatrix::combination(&[(-dt * p.d_sigma * p.chi, k), (-dp * p.chi, a_p)])?)?;
    sys.set_block(2, 1, a_p.scaled(-dp))?;
    sys.set_block(
        2,
        2,
        SparseMatrix::combination(&[(1.0 + dt * p.kappa, m), (dt * p.d_sigma / p.delta, k), (dt * p.p0, a_p)])?,
    )?;
    Ok(sys)
}

fn step_residual(
    space: &FeSpace,
    params: &ModelParams,
    dt: f64,
    ops: &StepOperators,
    phi_prev: &[f64],
    sigma_prev: &[f64],
    x: &[f64],
) -> Result<Vec<f64>> {
    let p = params;
    let n = space.ndofs();
    let (phi, rest) = x.split_at(n);
    let (mu, sigma) = rest.split_at(n);
    let m = space.mass();
    let k = space.stiffness();
    let s = reaction_potential(p, phi, mu, sigma);
    let aps = ops.a_p.mul_vec(&s);
    let kmu = k.mul_vec(mu);
    let kphi = k.mul_vec(phi);
    let ksig = k.mul_vec(sigma);
    let mphi = m.mul_vec(phi);
    let mmu = m.mul_vec(mu);
    let msig = m.mul_vec(sigma);
    let mphi_prev = m.mul_vec(phi_prev);
    let msig_prev = m.mul_vec(sigma_prev);
    let lumped_one = m.row_sums();
    let phi_field = space.field(phi.to_vec())?;
    let convex = nonlinear_load(space, dpotential_plus::<f64>, &phi_field)?;
    let dp = dt * p.delta * p.p0;
    let mut r = vec![0.0; 3 * n];
    for i in 0..n {
        r[i] = mphi[i] - mphi_prev[i] + dt * p.d_phi * kmu[i] - dp * aps[i] + dt * ops.death[i];
        r[n + i] = dt
            * (p.eps * p.eps * kphi[i] + p.gamma * (convex[i] + ops.concave[i]) - p.chi * msig[i] - mmu[i]);
        r[2 * n + i] = msig[i] - msig_prev[i] + dt * p.d_sigma / p.delta * ksig[i] - dt * p.d_sigma * p.chi * kphi[i]
            + dp * aps[i]
            - dt * p.kappa * (lumped_one[i] - msig[i]);
    }
    Ok(r)
}

fn split3(space: &FeSpace, x: Vec<f64>) -> Result<(NodalField, NodalField, NodalField)> {
    let n = space.ndofs();
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("forward step solution".into()));
    }
    Ok((
        space.field(x[..n].to_vec())?,
        space.field(x[n..2 * n].to_vec())?,
        space.field(x[2 * n..].to_vec())?,
    ))
}

/// Reusable stepping context; keeps the symbolic factorization between steps.
pub struct Stepper<'a> {
    space: &'a FeSpace,
    params: &'a ModelParams,
    dt: f64,
    cfg: ForwardConfig,
    solver: LinearSolver,
}

impl<'a> Stepper<'a> {
    pub fn new(space: &'a FeSpace, params: &'a ModelParams, dt: f64, cfg: ForwardConfig) -> Result<Self> {
        params.validate()?;
        cfg.validate()?;
        if !(dt > 0.0) {
            return Err(Error::Config(format!("time step must be positive, got {dt}")));
        }
        if let Some(c) = &params.c_field {
            c.check_on(space.mesh())?;
        }
        Ok(Stepper { space, params, dt, cfg, solver: LinearSolver::new(cfg.solver) })
    }

    /// Advances `(phi_prev, sigma_prev)` by one step; `mu_guess` seeds Newton.
    pub fn step(&mut self, phi_prev: &NodalField, sigma_prev: &NodalField, mu_guess: Option<&NodalField>) -> Result<StepResult> {
        let space = self.space;
        phi_prev.check_on(space.mesh())?;
        sigma_prev.check_on(space.mesh())?;
        let n = space.ndofs();
        let ops = StepOperators::new(space, self.params, phi_prev)?;
        let mut guess = Vec::with_capacity(3 * n);
        guess.extend_from_slice(phi_prev.values());
        match mu_guess {
            Some(mu) => {
                mu.check_on(space.mesh())?;
                guess.extend_from_slice(mu.values());
            }
            None => guess.extend(std::iter::repeat(0.0).take(n)),
        }
        guess.extend_from_slice(sigma_prev.values());
        let (params, dt) = (self.params, self.dt);
        let (pp, sp) = (phi_prev.values(), sigma_prev.values());
        let (x, report) = newton_solve(
            |x| step_residual(space, params, dt, &ops, pp, sp, x),
            |x| step_jacobian(space, params, dt, &ops.a_p, &x[..n])?.monolithic(),
            guess,
            self.cfg.newton_tol,
            self.cfg.newton_max_iter,
            &mut self.solver,
        )?;
        let (phi, mu, sigma) = split3(space, x)?;
        Ok(StepResult { phi, mu, sigma, newton_iters: report.iterations })
    }
}

pub fn forward_step(
    space: &FeSpace,
    phi_prev: &NodalField,
    sigma_prev: &NodalField,
    params: &ModelParams,
    dt: f64,
    cfg: &ForwardConfig,
) -> Result<StepResult> {
    Stepper::new(space, params, dt, *cfg)?.step(phi_prev, sigma_prev, None)
}

pub fn clamp01(f: &NodalField) -> NodalField {
    f.map(|v| v.clamp(0.0, 1.0))
}

/// Runs `N` steps from clamped initial data.
pub fn run_forward(
    space: &FeSpace,
    phi0: &NodalField,
    sigma0: &NodalField,
    params: &ModelParams,
    grid: &TimeGrid,
    cfg: &ForwardConfig,
) -> Result<Trajectory> {
    phi0.check_on(space.mesh())?;
    sigma0.check_on(space.mesh())?;
    let dt = grid.dt();
    let mut stepper = Stepper::new(space, params, dt, *cfg)?;
    let steps = grid.steps();
    let mut traj = Trajectory {
        dt,
        phi: Vec::with_capacity(steps + 1),
        mu: Vec::with_capacity(steps + 1),
        sigma: Vec::with_capacity(steps + 1),
        newton_iters: Vec::with_capacity(steps),
    };
    traj.phi.push(clamp01(phi0));
    traj.mu.push(space.zeros());
    traj.sigma.push(clamp01(sigma0));
    for n in 1..=steps {
        let mu_guess = if n > 1 { Some(&traj.mu[n - 1]) } else { None };
        let r = stepper
            .step(&traj.phi[n - 1], &traj.sigma[n - 1], mu_guess)
            .map_err(|e| e.at_step(n))?;
        traj.phi.push(r.phi);
        traj.mu.push(r.mu);
        traj.sigma.push(r.sigma);
        traj.newton_iters.push(r.newton_iters);
    }
    Ok(traj)
}

fn smoothed_step(d: f64, width: f64) -> f64 {
    0.5 * (1.0 - (d / (std::f64::consts::SQRT_2 * width)).tanh())
}

/// `1/2 (1 - tanh((|x - c| - R) / (sqrt(2) w)))`.
pub fn make_smoothed_disc(space: &FeSpace, center: &[f64], radius: f64, width: f64) -> Result<NodalField> {
    if !(radius > 0.0) || !(width > 0.0) {
        return Err(Error::Config("disc radius and interface width must be positive".into()));
    }
    let dim = space.dim();
    if center.len() < dim {
        return Err(Error::Dimension(format!("centre has {} coordinates in dimension {dim}", center.len())));
    }
    Ok(space.interpolate(|x| {
        let r = (0..dim).map(|i| (x[i] - center[i]).powi(2)).sum::<f64>().sqrt();
        smoothed_step(r - radius, width)
    }))
}

/// Tensor product of smoothed 1D boxes, scaled to `plateau`.
pub fn make_smoothed_square(space: &FeSpace, center: &[f64], side: f64, plateau: f64, width: f64) -> Result<NodalField> {
    if !(side > 0.0) || !(width > 0.0) {
        return Err(Error::Config("square side and interface width must be positive".into()));
    }
    if !(plateau > 0.0 && plateau <= 1.0) {
        return Err(Error::Config(format!("plateau value must lie in (0, 1], got {plateau}")));
    }
    let dim = space.dim();
    if center.len() < dim {
        return Err(Error::Dimension(format!("centre has {} coordinates in dimension {dim}", center.len())));
    }
    Ok(space.interpolate(|x| {
        plateau * (0..dim).map(|i| smoothed_step((x[i] - center[i]).abs() - 0.5 * side, width)).product::<f64>()
    }))
}

/// Operator of the stationary nutrient problem,
/// `(D_sigma/delta) K + P0 A_P(phi0) + kappa M`.
pub(crate) fn stationary_operator(space: &FeSpace, params: &ModelParams, phi0: &NodalField) -> Result<SparseMatrix<f64>> {
    let a_p = proliferation_mass(space, params, phi0.values())?;
    SparseMatrix::combination(&[
        (params.d_sigma / params.delta, space.stiffness()),
        (params.p0, &a_p),
        (params.kappa, space.mass()),
    ])
}

/// Unclamped stationary nutrient and its operator.
pub(crate) fn stationary_nutrient_raw(
    space: &FeSpace,
    params: &ModelParams,
    phi0: &NodalField,
    solver: &mut LinearSolver,
) -> Result<(Vec<f64>, SparseMatrix<f64>)> {
    phi0.check_on(space.mesh())?;
    let a = stationary_operator(space, params, phi0)?;
    let kphi = space.stiffness().mul_vec(phi0.values());
    let ones = space.mass().row_sums();
    let rhs: Vec<f64> = (0..space.ndofs())
        .map(|i| params.kappa * ones[i] + params.d_sigma * params.chi * kphi[i])
        .collect();
    let s = solver.solve(&a, &rhs)?;
    Ok((s, a))
}

/// Stationary nutrient for fixed `phi0`, clamped to `[0, 1]`.
pub fn stationary_nutrient(space: &FeSpace, phi0: &NodalField, params: &ModelParams) -> Result<NodalField> {
    params.validate()?;
    let mut solver = LinearSolver::new(SolverConfig::default());
    let (s, _) = stationary_nutrient_raw(space, params, phi0, &mut solver)?;
    space.field(s.into_iter().map(|v| v.clamp(0.0, 1.0)).collect())
}
