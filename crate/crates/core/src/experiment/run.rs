//! Mode drivers. Each returns its results and, given an output directory,
//! also writes them there.

use std::path::Path;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fem::FeSpace;
use crate::field::NodalField;
use crate::forward::{make_smoothed_disc, make_smoothed_square, run_forward, stationary_nutrient, Trajectory};
use crate::mesh::transfer;
use crate::model::ModelParams;
use crate::optimizer::{reconstruct, Evaluation, OptimConfig, ReducedProblem, Reconstruction, SigmaMode, Targets};

use super::config::{InitialSpec, RunConfig, ShapeKind, SigmaInit};
use super::noise::add_noise;
use super::output::{atomic_write, write_convergence_csv};
use super::vtk::{format_g17, read_vtk, write_vtk};

/// Phase field and nutrient described by `spec`, on `space`.
pub fn initial_data(spec: &InitialSpec, space: &FeSpace, params: &ModelParams) -> Result<(NodalField, NodalField)> {
    let file = match &spec.file {
        Some(p) => Some(read_vtk(p)?),
        None => None,
    };
    let from_file = |name: &str| -> Result<NodalField> {
        let f = file.as_ref().ok_or_else(|| Error::Config("initial data file missing".into()))?;
        transfer(&f.field(name)?, &f.mesh, space.mesh())
    };
    let phi = match spec.kind {
        ShapeKind::Zero => space.zeros(),
        ShapeKind::Constant => space.constant(spec.value),
        ShapeKind::Disc | ShapeKind::Square => {
            let mut acc = space.zeros();
            for (c, &p) in spec.centers.iter().zip(&spec.plateaus) {
                let part = if spec.kind == ShapeKind::Disc {
                    make_smoothed_disc(space, c, spec.radius, spec.width)?.map(|v| p * v)
                } else {
                    make_smoothed_square(space, c, spec.side, p, spec.width)?
                };
                for (a, b) in acc.values_mut().iter_mut().zip(part.values()) {
                    *a = a.max(*b);
                }
            }
            acc
        }
        ShapeKind::File => from_file(&spec.field)?,
    };
    let sigma = match &spec.sigma {
        SigmaInit::Stationary => stationary_nutrient(space, &phi, params)?,
        SigmaInit::Complement => phi.map(|v| 1.0 - v),
        SigmaInit::Constant(v) => space.constant(*v),
        SigmaInit::File(name) => from_file(name)?,
    };
    Ok((phi, sigma))
}

fn space_of(mesh: crate::mesh::Mesh) -> Result<Arc<FeSpace>> {
    Ok(Arc::new(FeSpace::new(Arc::new(mesh))?))
}

/// Snapshot indices written in forward mode: every `stride`-th step and the last.
pub fn forward_checkpoints(steps: usize, stride: Option<usize>) -> Vec<usize> {
    let stride = stride.unwrap_or((steps / 10).max(1)).max(1);
    let mut idx: Vec<usize> = (0..=steps).step_by(stride).collect();
    if idx.last() != Some(&steps) {
        idx.push(steps);
    }
    idx
}

pub struct ForwardOutput {
    pub space: Arc<FeSpace>,
    pub traj: Trajectory,
}

/// Runs the model from the `[truth]` initial data on the reconstruction mesh.
pub fn run_forward_mode(cfg: &RunConfig, out: Option<&Path>) -> Result<ForwardOutput> {
    let space = space_of(cfg.mesh.reconstruction_mesh()?)?;
    let (phi0, sigma0) = initial_data(&cfg.truth, &space, &cfg.model)?;
    let grid = cfg.grid()?;
    let traj = run_forward(&space, &phi0, &sigma0, &cfg.model, &grid, &cfg.optim.forward)?;
    if let Some(dir) = out {
        for n in forward_checkpoints(grid.steps(), cfg.output.checkpoint_stride) {
            let fields = [("phi", &traj.phi[n]), ("mu", &traj.mu[n]), ("sigma", &traj.sigma[n])];
            write_vtk(space.mesh(), &fields, &dir.join(format!("forward_{n:05}.vtk")))?;
        }
    }
    Ok(ForwardOutput { space, traj })
}

/// Ground truth and the measurements generated from it.
pub struct TargetData {
    pub space: Arc<FeSpace>,
    pub phi0_true: NodalField,
    pub sigma0_true: NodalField,
    /// Noise-free final state.
    pub phi_clean: NodalField,
    pub sigma_clean: NodalField,
    pub phi_meas: NodalField,
    pub sigma_meas: NodalField,
}

impl TargetData {
    pub fn targets(&self, use_sigma: bool) -> Result<Targets> {
        Targets::new(self.space.mesh().clone(), self.phi_meas.clone(), use_sigma.then(|| self.sigma_meas.clone()))
    }
}

/// Forward run from the ground truth on the generation mesh, plus noise.
pub fn make_target(cfg: &RunConfig) -> Result<TargetData> {
    let space = space_of(cfg.mesh.generation_mesh()?)?;
    let (phi0, sigma0) = initial_data(&cfg.truth, &space, &cfg.model)?;
    let (phi_clean, sigma_clean) = match cfg.time {
        Some(grid) => {
            let traj = run_forward(&space, &phi0, &sigma0, &cfg.model, &grid, &cfg.optim.forward)?;
            (traj.final_phi().clone(), traj.final_sigma().clone())
        }
        None => (phi0.clone(), sigma0.clone()),
    };
    let seed = cfg.noise.seed.unwrap_or(cfg.seed);
    let phi_meas = add_noise(&phi_clean, cfg.noise.level, seed, cfg.noise.mode)?;
    let sigma_meas = add_noise(&sigma_clean, cfg.noise.level, seed.wrapping_add(1), cfg.noise.mode)?;
    Ok(TargetData { space, phi0_true: phi0, sigma0_true: sigma0, phi_clean, sigma_clean, phi_meas, sigma_meas })
}

pub fn write_target(data: &TargetData, path: &Path) -> Result<()> {
    let fields = [
        ("phi_meas", &data.phi_meas),
        ("sigma_meas", &data.sigma_meas),
        ("phi0_true", &data.phi0_true),
        ("sigma0_true", &data.sigma0_true),
    ];
    write_vtk(data.space.mesh(), &fields, path)
}

/// Measurements from `targets.file`, or generated from `[truth]`.
pub fn load_targets(cfg: &RunConfig) -> Result<Targets> {
    match &cfg.targets.file {
        Some(p) => {
            let f = read_vtk(p)?;
            let phi = f.field(&cfg.targets.phi_field)?;
            let sigma = if cfg.targets.use_sigma { Some(f.field(&cfg.targets.sigma_field)?) } else { None };
            Targets::new(Arc::new(f.mesh), phi, sigma)
        }
        None => make_target(cfg)?.targets(cfg.targets.use_sigma),
    }
}

fn write_iterate(dir: &Path, name: &str, space: &FeSpace, ev: &Evaluation) -> Result<()> {
    let fields = [
        ("phi0", &ev.phi0),
        ("sigma0", &ev.sigma_init),
        ("phi_T", ev.traj.final_phi()),
        ("sigma_T", ev.traj.final_sigma()),
    ];
    write_vtk(space.mesh(), &fields, &dir.join(name))
}

/// Reconstruction from the `[guess]` on the reconstruction mesh against
/// the given targets. Writes iterates 1, 10, 20, ..., the final state and
/// `convergence.csv` when `out` is set.
pub fn run_reconstruct_with(cfg: &RunConfig, targets: &Targets, out: Option<&Path>) -> Result<Reconstruction> {
    let space = space_of(cfg.mesh.reconstruction_mesh()?)?;
    let (phi_guess, sigma_guess) = initial_data(&cfg.guess, &space, &cfg.model)?;
    let grid = cfg.grid()?;
    let mut hook = |k: usize, s: &FeSpace, ev: &Evaluation| -> Result<()> {
        match out {
            Some(dir) if k == 1 || k % 10 == 0 => write_iterate(dir, &format!("iter_{k:04}.vtk"), s, ev),
            _ => Ok(()),
        }
    };
    let rec = reconstruct(space, &phi_guess, &sigma_guess, targets, &cfg.model, &grid, &cfg.optim, Some(&mut hook))?;
    if let Some(dir) = out {
        let local = targets.on(rec.space.mesh())?;
        let mut fields = vec![
            ("phi0", &rec.phi0),
            ("sigma0", &rec.sigma_init),
            ("phi_T", rec.traj.final_phi()),
            ("sigma_T", rec.traj.final_sigma()),
            ("phi_meas", &local.phi),
        ];
        if let Some(s) = &local.sigma {
            fields.push(("sigma_meas", s));
        }
        write_vtk(rec.space.mesh(), &fields, &dir.join("final.vtk"))?;
        write_convergence_csv(&rec.record, &dir.join("convergence.csv"), cfg.output.timing)?;
    }
    Ok(rec)
}

pub fn run_reconstruct(cfg: &RunConfig, out: Option<&Path>) -> Result<Reconstruction> {
    let targets = load_targets(cfg)?;
    run_reconstruct_with(cfg, &targets, out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DirectionCheck {
    /// `<gradient, direction>` in L2.
    pub pairing: f64,
    /// Central differences, one per step size.
    pub fd: Vec<f64>,
    pub errors: Vec<f64>,
    pub best: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub steps: Vec<f64>,
    pub directions: Vec<DirectionCheck>,
    pub threshold: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.directions.iter().all(|d| d.best <= self.threshold)
    }

    pub fn worst(&self) -> f64 {
        self.directions.iter().map(|d| d.best).fold(0.0, f64::max)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("direction,pairing");
        for h in &self.steps {
            s.push_str(&format!(",fd_{h:e}"));
        }
        for h in &self.steps {
            s.push_str(&format!(",err_{h:e}"));
        }
        s.push_str(",best\n");
        for (i, d) in self.directions.iter().enumerate() {
            s.push_str(&format!("{},{}", i + 1, format_g17(d.pairing)));
            for v in d.fd.iter().chain(&d.errors) {
                s.push(',');
                s.push_str(&format_g17(*v));
            }
            s.push_str(&format!(",{}\n", format_g17(d.best)));
        }
        s
    }
}

/// Relative mismatch of two numbers; zero when both vanish.
pub fn relative_error(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 { 0.0 } else { (a - b).abs() / scale }
}

/// Compares the adjoint gradient with central differences of the reduced
/// cost along a direction `(d_phi, d_sigma)` at `(phi0, sigma0)`.
pub fn check_direction(
    problem: &ReducedProblem,
    phi0: &NodalField,
    sigma0: &NodalField,
    d_phi: &NodalField,
    d_sigma: &NodalField,
    steps: &[f64],
) -> Result<DirectionCheck> {
    let ev = problem.evaluate(phi0, sigma0)?;
    let g = problem.gradient(&ev)?;
    let space = problem.space;
    let pairing = space.l2_inner(&g.phi, d_phi)? + space.l2_inner(&g.sigma, d_sigma)?;
    let shift = |f: &NodalField, d: &NodalField, t: f64| f.with_values(f.values().iter().zip(d.values()).map(|(a, b)| a + t * b).collect());
    let mut fd = Vec::with_capacity(steps.len());
    for &h in steps {
        let jp = problem.evaluate(&shift(phi0, d_phi, h), &shift(sigma0, d_sigma, h))?.cost;
        let jm = problem.evaluate(&shift(phi0, d_phi, -h), &shift(sigma0, d_sigma, -h))?.cost;
        fd.push((jp - jm) / (2.0 * h));
    }
    let errors: Vec<f64> = fd.iter().map(|&f| relative_error(pairing, f)).collect();
    let best = errors.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(DirectionCheck { pairing, fd, errors, best })
}

pub const GRAD_CHECK_MAX_N: usize = 16;
pub const GRAD_CHECK_MAX_STEPS: usize = 10;

/// Gradient verification at a random interior point along random
/// admissible directions. Targets come from the ground truth on the same mesh.
pub fn grad_check(cfg: &RunConfig, out: Option<&Path>) -> Result<GradCheckReport> {
    let grid = cfg.grid()?;
    if cfg.mesh.n > GRAD_CHECK_MAX_N || grid.steps() > GRAD_CHECK_MAX_STEPS {
        return Err(Error::Config(format!(
            "grad-check needs mesh.n <= {GRAD_CHECK_MAX_N} and at most {GRAD_CHECK_MAX_STEPS} time steps (got n = {}, N = {})",
            cfg.mesh.n,
            grid.steps()
        )));
    }
    let space = space_of(cfg.mesh.reconstruction_mesh()?)?;
    let mut optim: OptimConfig = cfg.optim;
    optim.refine = None;
    optim.forward.newton_tol = optim.forward.newton_tol.min(1e-13);
    optim.forward.solver.rtol = optim.forward.solver.rtol.min(1e-12);
    optim.forward.solver.atol = optim.forward.solver.atol.min(1e-15);
    optim.validate()?;
    let (phi_t, sigma_t) = initial_data(&cfg.truth, &space, &cfg.model)?;
    let traj = run_forward(&space, &phi_t, &sigma_t, &cfg.model, &grid, &optim.forward)?;
    let targets = Targets::new(space.mesh().clone(), traj.final_phi().clone(), Some(traj.final_sigma().clone()))?;
    let problem = ReducedProblem { space: &space, params: &cfg.model, grid, targets: &targets, cfg: &optim };

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = space.ndofs();
    let interior = |rng: &mut ChaCha8Rng| space.field((0..n).map(|_| rng.gen_range(0.1..0.9)).collect());
    let phi0 = interior(&mut rng)?;
    let sigma0 = interior(&mut rng)?;
    let steps = cfg.gradcheck.steps.to_vec();
    let mut directions = Vec::with_capacity(cfg.gradcheck.directions);
    for _ in 0..cfg.gradcheck.directions {
        let y_phi: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
        let y_sigma: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
        let d_phi = space.field(y_phi.iter().zip(phi0.values()).map(|(y, x)| y - x).collect())?;
        let d_sigma = match optim.sigma_mode {
            SigmaMode::Optimize => space.field(y_sigma.iter().zip(sigma0.values()).map(|(y, x)| y - x).collect())?,
            _ => space.zeros(),
        };
        directions.push(check_direction(&problem, &phi0, &sigma0, &d_phi, &d_sigma, &steps)?);
    }
    let report = GradCheckReport { steps, directions, threshold: cfg.gradcheck.threshold };
    if let Some(dir) = out {
        atomic_write(&dir.join("gradcheck.csv"), report.to_csv().as_bytes())?;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::config::{Mode, Overrides};
    use crate::experiment::parse_config_str;

    fn cfg(text: &str) -> RunConfig {
        parse_config_str(text, Path::new("."), &Overrides::default()).unwrap()
    }

    #[test]
    fn checkpoint_stride() {
        assert_eq!(forward_checkpoints(100, None), (0..=100).step_by(10).collect::<Vec<_>>());
        assert_eq!(forward_checkpoints(5, None), vec![0, 1, 2, 3, 4, 5]);
        assert_eq!(forward_checkpoints(7, Some(3)), vec![0, 3, 6, 7]);
    }

    #[test]
    fn zero_horizon_target_is_truth() {
        let c = cfg("[run]\nmode = \"make-target\"\npreset = \"test_case_2\"\n[mesh]\ngen_n = 8\nn = 4\n[time]\nt_final = 0\nsteps = 0\n");
        assert_eq!(c.mode, Mode::MakeTarget);
        let t = make_target(&c).unwrap();
        assert_eq!(t.phi_meas, t.phi0_true);
        assert_eq!(t.sigma_meas, t.sigma0_true);
    }

    #[test]
    fn target_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let c = cfg("[run]\nmode = \"make-target\"\npreset = \"test_case_1\"\n[mesh]\ngen_n = 6\nn = 4\n[time]\nt_final = 0.1\nsteps = 2\n");
        let t = make_target(&c).unwrap();
        let path = dir.path().join("target.vtk");
        write_target(&t, &path).unwrap();
        let mut c2 = c.clone();
        c2.targets.file = Some(path);
        let loaded = load_targets(&c2).unwrap();
        assert_eq!(loaded.phi.values(), t.phi_meas.values());
        assert_eq!(loaded.sigma.as_ref().unwrap().values(), t.sigma_meas.values());
    }

    #[test]
    fn quadratic_only_functional_is_matched() {
        let c = cfg(concat!(
            "[run]\nmode = \"grad-check\"\npreset = \"test_case_1\"\nseed = 3\n",
            "[mesh]\nn = 4\n[time]\nt_final = 0.1\nsteps = 2\n",
            "[optim]\nlambda1 = 0\nlambda2 = 0\nalpha1 = 0\nalpha2 = 0.5\nsigma_mode = \"optimize\"\n",
            "[gradcheck]\ndirections = 2\n",
        ));
        let r = grad_check(&c, None).unwrap();
        assert!(r.passed());
        for d in &r.directions {
            assert!(d.errors.iter().all(|&e| e < 1e-8), "{:?}", d.errors);
        }
    }

    #[test]
    fn zero_direction_pairs_to_zero() {
        let c = cfg("[run]\nmode = \"grad-check\"\npreset = \"test_case_2\"\n[mesh]\nn = 4\n[time]\nt_final = 0.1\nsteps = 2\n");
        let space = space_of(c.mesh.reconstruction_mesh().unwrap()).unwrap();
        let grid = c.grid().unwrap();
        let targets = Targets::new(space.mesh().clone(), space.constant(0.3), None).unwrap();
        let problem = ReducedProblem { space: &space, params: &c.model, grid, targets: &targets, cfg: &c.optim };
        let z = space.zeros();
        let d = check_direction(&problem, &space.constant(0.4), &space.constant(0.5), &z, &z, &[1e-4]).unwrap();
        assert_eq!((d.pairing, d.fd[0], d.best), (0.0, 0.0, 0.0));
    }

    #[test]
    fn grad_check_enforces_small_problems() {
        let c = cfg("[run]\nmode = \"grad-check\"\npreset = \"test_case_2\"\n[mesh]\nn = 17\n[time]\nt_final = 0.1\nsteps = 2\n");
        assert!(matches!(grad_check(&c, None), Err(Error::Config(_))));
    }
}
