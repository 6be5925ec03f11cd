//! Run configuration: flat `[section]` tables of `key = value` pairs.
//!
//! Values are resolved in the order defaults, preset, file, command line.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Deserialize;
use toml::Spanned;

use crate::error::{Error, Result};
use crate::forward::TimeGrid;
use crate::linalg::SolverMethod;
use crate::mesh::{make_box_mesh, Mesh};
use crate::model::ModelParams;
use crate::optimizer::{OptimConfig, SigmaMode};

use super::noise::NoiseMode;
use super::presets;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Forward,
    MakeTarget,
    Reconstruct,
    GradCheck,
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "forward" => Ok(Mode::Forward),
            "make-target" => Ok(Mode::MakeTarget),
            "reconstruct" => Ok(Mode::Reconstruct),
            "grad-check" => Ok(Mode::GradCheck),
            _ => Err(Error::Config(format!(
                "unknown mode `{s}` (expected forward, make-target, reconstruct or grad-check)"
            ))),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Forward => "forward",
            Mode::MakeTarget => "make-target",
            Mode::Reconstruct => "reconstruct",
            Mode::GradCheck => "grad-check",
        })
    }
}

/// Uniform box meshes for reconstruction (`n`) and target generation (`gen_n`).
#[derive(Debug, Clone, PartialEq)]
pub struct MeshSpec {
    pub dim: usize,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub n: usize,
    pub gen_n: usize,
}

impl MeshSpec {
    fn build(&self, n: usize) -> Result<Mesh> {
        make_box_mesh(self.dim, &self.lower, &self.upper, &vec![n; self.dim])
    }

    pub fn reconstruction_mesh(&self) -> Result<Mesh> {
        self.build(self.n)
    }

    pub fn generation_mesh(&self) -> Result<Mesh> {
        self.build(self.gen_n)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShapeKind {
    Zero,
    Constant,
    Disc,
    Square,
    File,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SigmaInit {
    /// Stationary nutrient of the phase field.
    Stationary,
    /// `1 - phi`.
    Complement,
    Constant(f64),
    /// Named field of the shape's file.
    File(String),
}

/// Initial data: a union of smoothed discs or squares, a constant, or fields
/// read from a file.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialSpec {
    pub kind: ShapeKind,
    pub centers: Vec<Vec<f64>>,
    pub radius: f64,
    pub side: f64,
    /// Value inside each component; one per centre.
    pub plateaus: Vec<f64>,
    pub value: f64,
    pub width: f64,
    pub file: Option<PathBuf>,
    pub field: String,
    pub sigma: SigmaInit,
}

impl Default for InitialSpec {
    fn default() -> Self {
        InitialSpec {
            kind: ShapeKind::Zero,
            centers: vec![vec![0.0, 0.0, 0.0]],
            radius: 0.6,
            side: 0.25,
            plateaus: vec![1.0],
            value: 0.0,
            width: 0.1,
            file: None,
            field: "phi0".into(),
            sigma: SigmaInit::Constant(1.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TargetSpec {
    /// Field file with the measurements; generated from `[truth]` when absent.
    pub file: Option<PathBuf>,
    pub phi_field: String,
    pub sigma_field: String,
    pub use_sigma: bool,
}

impl Default for TargetSpec {
    fn default() -> Self {
        TargetSpec { file: None, phi_field: "phi_meas".into(), sigma_field: "sigma_meas".into(), use_sigma: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub level: f64,
    pub mode: NoiseMode,
    /// Defaults to the run seed.
    pub seed: Option<u64>,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        NoiseSpec { level: 0.0, mode: NoiseMode::Max, seed: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputSpec {
    pub dir: PathBuf,
    /// Forward-mode snapshot stride; `max(1, N / 10)` when absent.
    pub checkpoint_stride: Option<usize>,
    /// Fill the `wall_s` column of the convergence CSV.
    pub timing: bool,
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec { dir: PathBuf::from("out"), checkpoint_stride: None, timing: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckSpec {
    pub directions: usize,
    pub steps: [f64; 3],
    pub threshold: f64,
}

impl Default for GradCheckSpec {
    fn default() -> Self {
        GradCheckSpec { directions: 5, steps: [1e-4, 1e-5, 1e-6], threshold: 1e-4 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub mode: Mode,
    pub preset: Option<String>,
    pub seed: u64,
    pub mesh: MeshSpec,
    /// `None` means `T = 0`, allowed only when making targets.
    pub time: Option<TimeGrid>,
    pub model: ModelParams,
    pub optim: OptimConfig,
    pub truth: InitialSpec,
    /// Whether initial data were supplied by a preset or a `[truth]` table.
    pub truth_given: bool,
    pub guess: InitialSpec,
    pub targets: TargetSpec,
    pub noise: NoiseSpec,
    pub output: OutputSpec,
    pub gradcheck: GradCheckSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            mode: Mode::Forward,
            preset: None,
            seed: 0,
            mesh: MeshSpec { dim: 2, lower: vec![-5.0, -5.0], upper: vec![5.0, 5.0], n: 32, gen_n: 48 },
            time: Some(TimeGrid::new(5.0, 100).expect("valid grid")),
            model: ModelParams::default(),
            optim: OptimConfig::default(),
            truth: InitialSpec::default(),
            truth_given: false,
            guess: InitialSpec::default(),
            targets: TargetSpec::default(),
            noise: NoiseSpec::default(),
            output: OutputSpec::default(),
            gradcheck: GradCheckSpec::default(),
        }
    }
}

impl RunConfig {
    /// The time grid, or an error when the run needs at least one step.
    pub fn grid(&self) -> Result<TimeGrid> {
        self.time.ok_or_else(|| Error::Config("this mode needs t_final > 0 and at least one step".into()))
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub mode: Option<Mode>,
    pub preset: Option<String>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

type S<T> = Option<Spanned<T>>;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFile {
    run: Option<RawRun>,
    mesh: Option<RawMesh>,
    time: Option<RawTime>,
    model: Option<RawModel>,
    optim: Option<RawOptim>,
    truth: Option<RawShape>,
    guess: Option<RawShape>,
    targets: Option<RawTargets>,
    noise: Option<RawNoise>,
    output: Option<RawOutput>,
    solver: Option<RawSolver>,
    gradcheck: Option<RawGradCheck>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRun {
    mode: S<String>,
    preset: S<String>,
    seed: S<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMesh {
    dim: S<usize>,
    lower: S<Vec<f64>>,
    upper: S<Vec<f64>>,
    n: S<usize>,
    gen_n: S<usize>,
    refine: S<bool>,
    theta: S<f64>,
    max_generation: S<u32>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTime {
    t_final: S<f64>,
    dt: S<f64>,
    steps: S<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    p0: S<f64>,
    delta: S<f64>,
    d_phi: S<f64>,
    d_sigma: S<f64>,
    gamma: S<f64>,
    chi: S<f64>,
    eps: S<f64>,
    c: S<f64>,
    kappa: S<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOptim {
    lambda1: S<f64>,
    lambda2: S<f64>,
    alpha: S<f64>,
    alpha1: S<f64>,
    alpha2: S<f64>,
    rho: S<f64>,
    iota: S<f64>,
    tol_v: S<f64>,
    max_iter: S<usize>,
    m_max: S<u32>,
    sigma_mode: S<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawShape {
    shape: S<String>,
    centers: S<Vec<f64>>,
    radius: S<f64>,
    side: S<f64>,
    plateaus: S<Vec<f64>>,
    value: S<f64>,
    width: S<f64>,
    file: S<String>,
    field: S<String>,
    sigma: S<String>,
    sigma_value: S<f64>,
    sigma_field: S<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTargets {
    file: S<String>,
    phi_field: S<String>,
    sigma_field: S<String>,
    use_sigma: S<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNoise {
    level: S<f64>,
    mode: S<String>,
    seed: S<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    dir: S<String>,
    checkpoint_stride: S<usize>,
    timing: S<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSolver {
    method: S<String>,
    rtol: S<f64>,
    atol: S<f64>,
    max_iter: S<usize>,
    restart: S<usize>,
    reuse_iter: S<usize>,
    newton_tol: S<f64>,
    newton_max_iter: S<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGradCheck {
    directions: S<usize>,
    threshold: S<f64>,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].bytes().filter(|&b| b == b'\n').count() + 1
}

/// Builds config errors pointing at the offending key.
struct Ctx<'a> {
    text: &'a str,
    base: &'a Path,
}

impl Ctx<'_> {
    fn err<T>(&self, key: &str, v: &Spanned<T>, msg: impl fmt::Display) -> Error {
        Error::Config(format!("line {}, key `{key}`: {msg}", line_of(self.text, v.span().start)))
    }

    fn path(&self, p: &str) -> PathBuf {
        let p = Path::new(p);
        if p.is_absolute() { p.to_path_buf() } else { self.base.join(p) }
    }

    fn positive(&self, key: &str, v: &Spanned<f64>) -> Result<f64> {
        let x = *v.get_ref();
        if x > 0.0 && x.is_finite() {
            Ok(x)
        } else {
            Err(self.err(key, v, format!("must be positive, got {x}")))
        }
    }

    fn non_negative(&self, key: &str, v: &Spanned<f64>) -> Result<f64> {
        let x = *v.get_ref();
        if x >= 0.0 && x.is_finite() {
            Ok(x)
        } else {
            Err(self.err(key, v, format!("must be non-negative, got {x}")))
        }
    }

    fn open_unit(&self, key: &str, v: &Spanned<f64>) -> Result<f64> {
        let x = *v.get_ref();
        if x > 0.0 && x < 1.0 {
            Ok(x)
        } else {
            Err(self.err(key, v, format!("must lie in (0, 1), got {x}")))
        }
    }
}

fn de_error(text: &str, e: toml::de::Error) -> Error {
    match e.span() {
        Some(span) => {
            let line_no = line_of(text, span.start);
            let line = text.lines().nth(line_no - 1).unwrap_or("").trim();
            let key = line.split('=').next().unwrap_or("").trim();
            if key.is_empty() || line.starts_with('[') {
                Error::Config(format!("line {line_no}: {}", e.message()))
            } else {
                Error::Config(format!("line {line_no}, key `{key}`: {}", e.message()))
            }
        }
        None => Error::Config(e.message().to_string()),
    }
}

/// Reads and validates a configuration file; relative paths inside it are
/// resolved against the file's directory.
pub fn parse_config(path: &Path) -> Result<RunConfig> {
    parse_config_with(path, &Overrides::default())
}

pub fn parse_config_with(path: &Path, overrides: &Overrides) -> Result<RunConfig> {
    let bytes = std::fs::read(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let text = String::from_utf8(bytes).map_err(|_| Error::Config(format!("{} is not valid UTF-8", path.display())))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    parse_config_str(&text, &base, overrides)
}

pub fn parse_config_str(text: &str, base: &Path, overrides: &Overrides) -> Result<RunConfig> {
    let raw: RawFile = toml::from_str(text).map_err(|e| de_error(text, e))?;
    let cx = Ctx { text, base };
    let run = raw.run.unwrap_or_default();

    let preset = match (&overrides.preset, &run.preset) {
        (Some(p), _) => Some(p.clone()),
        (None, Some(p)) => Some(p.get_ref().clone()),
        (None, None) => None,
    };
    let mut cfg = match &preset {
        Some(name) => presets::preset(name).map_err(|e| match &run.preset {
            Some(p) if overrides.preset.is_none() => cx.err("run.preset", p, e),
            _ => e,
        })?,
        None => RunConfig::default(),
    };
    cfg.preset = preset;

    cfg.mode = match (overrides.mode, &run.mode) {
        (Some(m), _) => m,
        (None, Some(m)) => m.get_ref().parse().map_err(|e: Error| cx.err("run.mode", m, e))?,
        (None, None) => return Err(Error::Config("missing key `run.mode`".into())),
    };
    if let Some(s) = &run.seed {
        cfg.seed = *s.get_ref();
    }
    if let Some(s) = overrides.seed {
        cfg.seed = s;
    }

    apply_mesh(&cx, &mut cfg, raw.mesh.unwrap_or_default())?;
    apply_time(&cx, &mut cfg, raw.time.unwrap_or_default())?;
    apply_model(&cx, &mut cfg.model, raw.model.unwrap_or_default())?;
    apply_optim(&cx, &mut cfg, raw.optim.unwrap_or_default())?;
    apply_solver(&cx, &mut cfg, raw.solver.unwrap_or_default())?;
    if let Some(t) = raw.truth {
        apply_shape(&cx, "truth", &mut cfg.truth, t, cfg.mesh.dim)?;
        cfg.truth_given = true;
    }
    if let Some(g) = raw.guess {
        apply_shape(&cx, "guess", &mut cfg.guess, g, cfg.mesh.dim)?;
    }
    apply_targets(&cx, &mut cfg.targets, raw.targets.unwrap_or_default());
    apply_noise(&cx, &mut cfg.noise, raw.noise.unwrap_or_default())?;
    apply_output(&cx, &mut cfg.output, raw.output.unwrap_or_default())?;
    if let Some(g) = raw.gradcheck {
        if let Some(d) = &g.directions {
            cfg.gradcheck.directions = *d.get_ref();
        }
        if let Some(t) = &g.threshold {
            if !(*t.get_ref() >= 0.0) {
                return Err(cx.err("gradcheck.threshold", t, "must be non-negative"));
            }
            cfg.gradcheck.threshold = *t.get_ref();
        }
    }
    if let Some(o) = &overrides.out {
        cfg.output.dir = o.clone();
    }
    validate_mode(&cfg)?;
    Ok(cfg)
}

fn apply_mesh(cx: &Ctx, cfg: &mut RunConfig, m: RawMesh) -> Result<()> {
    let spec = &mut cfg.mesh;
    if let Some(d) = &m.dim {
        if !matches!(*d.get_ref(), 2 | 3) {
            return Err(cx.err("mesh.dim", d, "must be 2 or 3"));
        }
        if *d.get_ref() != spec.dim {
            spec.dim = *d.get_ref();
            spec.lower.resize(spec.dim, -5.0);
            spec.upper.resize(spec.dim, 5.0);
        }
    }
    for (key, raw, dst) in [("mesh.lower", &m.lower, &mut spec.lower), ("mesh.upper", &m.upper, &mut spec.upper)] {
        if let Some(v) = raw {
            if v.get_ref().len() != spec.dim {
                return Err(cx.err(key, v, format!("needs {} coordinates", spec.dim)));
            }
            *dst = v.get_ref().clone();
        }
    }
    if spec.lower.iter().zip(&spec.upper).any(|(a, b)| !(a < b)) {
        let span = m.upper.as_ref().or(m.lower.as_ref());
        return Err(match span {
            Some(v) => cx.err("mesh.upper", v, "box must have lower < upper in every direction"),
            None => Error::Config("mesh box must have lower < upper".into()),
        });
    }
    for (key, raw, dst) in [("mesh.n", &m.n, &mut spec.n), ("mesh.gen_n", &m.gen_n, &mut spec.gen_n)] {
        if let Some(v) = raw {
            if *v.get_ref() == 0 {
                return Err(cx.err(key, v, "must be at least 1"));
            }
            *dst = *v.get_ref();
        }
    }
    if let Some(r) = &m.refine {
        cfg.optim.refine = if *r.get_ref() { Some(cfg.optim.refine.unwrap_or_default()) } else { None };
    }
    if let Some(t) = &m.theta {
        let theta = *t.get_ref();
        if !(theta > 0.0 && theta <= 1.0) {
            return Err(cx.err("mesh.theta", t, format!("must lie in (0, 1], got {theta}")));
        }
        if let Some(rc) = cfg.optim.refine.as_mut() {
            rc.theta = theta;
        }
    }
    if let Some(g) = &m.max_generation {
        if let Some(rc) = cfg.optim.refine.as_mut() {
            rc.max_generation = *g.get_ref();
        }
    }
    if cfg.optim.refine.is_some() && cfg.mesh.dim == 3 {
        return Err(match &m.refine {
            Some(r) => cx.err("mesh.refine", r, "adaptive refinement is only available in 2D"),
            None => Error::Config("adaptive refinement is only available in 2D".into()),
        });
    }
    Ok(())
}

fn apply_time(cx: &Ctx, cfg: &mut RunConfig, t: RawTime) -> Result<()> {
    if t.t_final.is_none() && t.dt.is_none() && t.steps.is_none() {
        return Ok(());
    }
    if let (Some(_), Some(s)) = (&t.dt, &t.steps) {
        return Err(cx.err("time.steps", s, "give either dt or steps, not both"));
    }
    let current = cfg.time;
    let t_final = match &t.t_final {
        Some(v) => cx.non_negative("time.t_final", v)?,
        None => current.map(|g| g.t_final()).unwrap_or(0.0),
    };
    let steps = match (&t.dt, &t.steps) {
        (Some(dt), None) => {
            let dt_v = cx.positive("time.dt", dt)?;
            (t_final / dt_v).round() as usize
        }
        (None, Some(s)) => *s.get_ref(),
        _ => match current {
            // keep the current step size when only T changes
            Some(g) => (t_final / g.dt()).round() as usize,
            None => 0,
        },
    };
    if t_final == 0.0 || steps == 0 {
        if t_final != 0.0 || steps != 0 {
            let v = t.steps.as_ref().map(|s| s.span()).or(t.t_final.as_ref().map(|s| s.span())).unwrap_or(0..0);
            return Err(Error::Config(format!(
                "line {}, key `time`: t_final = 0 and zero steps only go together",
                line_of(cx.text, v.start)
            )));
        }
        cfg.time = None;
    } else {
        cfg.time = Some(TimeGrid::new(t_final, steps)?);
    }
    Ok(())
}

fn apply_model(cx: &Ctx, p: &mut ModelParams, m: RawModel) -> Result<()> {
    let entries = [
        ("model.p0", &m.p0, &mut p.p0, false),
        ("model.delta", &m.delta, &mut p.delta, true),
        ("model.d_phi", &m.d_phi, &mut p.d_phi, false),
        ("model.d_sigma", &m.d_sigma, &mut p.d_sigma, false),
        ("model.gamma", &m.gamma, &mut p.gamma, true),
        ("model.chi", &m.chi, &mut p.chi, false),
        ("model.eps", &m.eps, &mut p.eps, true),
        ("model.c", &m.c, &mut p.c, false),
        ("model.kappa", &m.kappa, &mut p.kappa, false),
    ];
    for (key, raw, dst, strict) in entries {
        if let Some(v) = raw {
            *dst = if strict { cx.positive(key, v)? } else { cx.non_negative(key, v)? };
        }
    }
    Ok(())
}

fn apply_optim(cx: &Ctx, cfg: &mut RunConfig, o: RawOptim) -> Result<()> {
    let gamma = cfg.model.gamma;
    let opt = &mut cfg.optim;
    if let (Some(_), Some(a1)) = (&o.alpha, &o.alpha1) {
        return Err(cx.err("optim.alpha1", a1, "give either alpha or alpha1, not both"));
    }
    if let Some(v) = &o.alpha {
        opt.alpha1 = cx.non_negative("optim.alpha", v)? / gamma;
    }
    for (key, raw, dst) in [
        ("optim.lambda1", &o.lambda1, &mut opt.lambda1),
        ("optim.lambda2", &o.lambda2, &mut opt.lambda2),
        ("optim.alpha1", &o.alpha1, &mut opt.alpha1),
        ("optim.alpha2", &o.alpha2, &mut opt.alpha2),
    ] {
        if let Some(v) = raw {
            *dst = cx.non_negative(key, v)?;
        }
    }
    if let Some(v) = &o.rho {
        opt.rho = cx.open_unit("optim.rho", v)?;
    }
    if let Some(v) = &o.iota {
        opt.iota = cx.open_unit("optim.iota", v)?;
    }
    if let Some(v) = &o.tol_v {
        opt.tol_v = Some(cx.positive("optim.tol_v", v)?);
    }
    if let Some(v) = &o.max_iter {
        opt.max_iter = *v.get_ref();
    }
    if let Some(v) = &o.m_max {
        opt.m_max = *v.get_ref();
    }
    if let Some(v) = &o.sigma_mode {
        opt.sigma_mode = match v.get_ref().as_str() {
            "optimize" => SigmaMode::Optimize,
            "frozen" => SigmaMode::Frozen,
            "stationary" => SigmaMode::Stationary,
            other => return Err(cx.err("optim.sigma_mode", v, format!("unknown value `{other}` (optimize, frozen or stationary)"))),
        };
    }
    if opt.lambda1 == 0.0 && opt.lambda2 == 0.0 && opt.alpha1 == 0.0 && opt.alpha2 == 0.0 {
        return Err(Error::Config("[optim]: lambda1, lambda2, alpha1 and alpha2 are all zero".into()));
    }
    Ok(())
}

fn apply_solver(cx: &Ctx, cfg: &mut RunConfig, s: RawSolver) -> Result<()> {
    let fwd = &mut cfg.optim.forward;
    if let Some(v) = &s.method {
        fwd.solver.method = match v.get_ref().as_str() {
            "direct" => SolverMethod::Direct,
            "iterative" => SolverMethod::Iterative,
            "auto" => SolverMethod::Auto,
            other => return Err(cx.err("solver.method", v, format!("unknown value `{other}` (direct, iterative or auto)"))),
        };
    }
    if let Some(v) = &s.rtol {
        fwd.solver.rtol = cx.positive("solver.rtol", v)?;
    }
    if let Some(v) = &s.atol {
        fwd.solver.atol = cx.positive("solver.atol", v)?;
    }
    if let Some(v) = &s.newton_tol {
        fwd.newton_tol = cx.positive("solver.newton_tol", v)?;
    }
    for (key, raw, dst) in [
        ("solver.max_iter", &s.max_iter, &mut fwd.solver.max_iter),
        ("solver.restart", &s.restart, &mut fwd.solver.restart),
        ("solver.newton_max_iter", &s.newton_max_iter, &mut fwd.newton_max_iter),
    ] {
        if let Some(v) = raw {
            if *v.get_ref() == 0 {
                return Err(cx.err(key, v, "must be at least 1"));
            }
            *dst = *v.get_ref();
        }
    }
    if let Some(v) = &s.reuse_iter {
        fwd.solver.reuse_iter = *v.get_ref();
    }
    Ok(())
}

fn apply_shape(cx: &Ctx, section: &str, spec: &mut InitialSpec, s: RawShape, dim: usize) -> Result<()> {
    let key = |k: &str| format!("{section}.{k}");
    if let Some(v) = &s.shape {
        spec.kind = match v.get_ref().as_str() {
            "zero" => ShapeKind::Zero,
            "constant" => ShapeKind::Constant,
            "disc" => ShapeKind::Disc,
            "square" => ShapeKind::Square,
            "file" => ShapeKind::File,
            other => {
                return Err(cx.err(&key("shape"), v, format!("unknown shape `{other}` (zero, constant, disc, square or file)")))
            }
        };
    }
    if let Some(v) = &s.centers {
        let c = v.get_ref();
        if c.is_empty() || c.len() % dim != 0 {
            return Err(cx.err(&key("centers"), v, format!("expects a flat list of points with {dim} coordinates each")));
        }
        spec.centers = c.chunks(dim).map(|p| p.to_vec()).collect();
        if spec.plateaus.len() != spec.centers.len() && s.plateaus.is_none() {
            spec.plateaus = vec![1.0; spec.centers.len()];
        }
    }
    if let Some(v) = &s.radius {
        spec.radius = cx.positive(&key("radius"), v)?;
    }
    if let Some(v) = &s.side {
        spec.side = cx.positive(&key("side"), v)?;
    }
    if let Some(v) = &s.width {
        spec.width = cx.positive(&key("width"), v)?;
    }
    if let Some(v) = &s.plateaus {
        if v.get_ref().iter().any(|&p| !(p > 0.0 && p <= 1.0)) {
            return Err(cx.err(&key("plateaus"), v, "values must lie in (0, 1]"));
        }
        spec.plateaus = v.get_ref().clone();
    }
    if spec.plateaus.len() != spec.centers.len() {
        let msg = format!("{} plateaus for {} centres", spec.plateaus.len(), spec.centers.len());
        return Err(match s.plateaus.as_ref() {
            Some(v) => cx.err(&key("plateaus"), v, msg),
            None => Error::Config(format!("[{section}]: {msg}")),
        });
    }
    if let Some(v) = &s.value {
        let x = *v.get_ref();
        if !(0.0..=1.0).contains(&x) {
            return Err(cx.err(&key("value"), v, format!("must lie in [0, 1], got {x}")));
        }
        spec.value = x;
    }
    if let Some(v) = &s.file {
        spec.file = Some(cx.path(v.get_ref()));
    }
    if let Some(v) = &s.field {
        spec.field = v.get_ref().clone();
    }
    if spec.kind == ShapeKind::File && spec.file.is_none() {
        return Err(Error::Config(format!("[{section}]: shape = \"file\" needs key `{section}.file`")));
    }
    if let Some(v) = &s.sigma {
        spec.sigma = match v.get_ref().as_str() {
            "stationary" => SigmaInit::Stationary,
            "complement" => SigmaInit::Complement,
            "constant" => SigmaInit::Constant(1.0),
            "file" => SigmaInit::File("sigma0".into()),
            other => {
                return Err(cx.err(
                    &key("sigma"),
                    v,
                    format!("unknown value `{other}` (stationary, complement, constant or file)"),
                ))
            }
        };
    }
    if let Some(v) = &s.sigma_value {
        let x = *v.get_ref();
        if !(0.0..=1.0).contains(&x) {
            return Err(cx.err(&key("sigma_value"), v, format!("must lie in [0, 1], got {x}")));
        }
        spec.sigma = SigmaInit::Constant(x);
    }
    if let Some(v) = &s.sigma_field {
        spec.sigma = SigmaInit::File(v.get_ref().clone());
    }
    if matches!(spec.sigma, SigmaInit::File(_)) && spec.file.is_none() {
        return Err(Error::Config(format!("[{section}]: a nutrient read from file needs key `{section}.file`")));
    }
    Ok(())
}

fn apply_targets(cx: &Ctx, t: &mut TargetSpec, r: RawTargets) {
    if let Some(v) = &r.file {
        t.file = Some(cx.path(v.get_ref()));
    }
    if let Some(v) = &r.phi_field {
        t.phi_field = v.get_ref().clone();
    }
    if let Some(v) = &r.sigma_field {
        t.sigma_field = v.get_ref().clone();
    }
    if let Some(v) = &r.use_sigma {
        t.use_sigma = *v.get_ref();
    }
}

fn apply_noise(cx: &Ctx, n: &mut NoiseSpec, r: RawNoise) -> Result<()> {
    if let Some(v) = &r.level {
        let x = *v.get_ref();
        if !(0.0..1.0).contains(&x) {
            return Err(cx.err("noise.level", v, format!("must lie in [0, 1), got {x}")));
        }
        n.level = x;
    }
    if let Some(v) = &r.mode {
        n.mode = match v.get_ref().as_str() {
            "max" => NoiseMode::Max,
            "relative" => NoiseMode::Relative,
            other => return Err(cx.err("noise.mode", v, format!("unknown value `{other}` (max or relative)"))),
        };
    }
    if let Some(v) = &r.seed {
        n.seed = Some(*v.get_ref());
    }
    Ok(())
}

fn apply_output(cx: &Ctx, o: &mut OutputSpec, r: RawOutput) -> Result<()> {
    if let Some(v) = &r.dir {
        o.dir = cx.path(v.get_ref());
    }
    if let Some(v) = &r.checkpoint_stride {
        if *v.get_ref() == 0 {
            return Err(cx.err("output.checkpoint_stride", v, "must be at least 1"));
        }
        o.checkpoint_stride = Some(*v.get_ref());
    }
    if let Some(v) = &r.timing {
        o.timing = *v.get_ref();
    }
    Ok(())
}

fn validate_mode(cfg: &RunConfig) -> Result<()> {
    if cfg.mode != Mode::MakeTarget && cfg.time.is_none() {
        return Err(Error::Config(format!("mode {} needs t_final > 0 and at least one step", cfg.mode)));
    }
    let needs_truth = match cfg.mode {
        Mode::Forward | Mode::MakeTarget | Mode::GradCheck => true,
        Mode::Reconstruct => cfg.targets.file.is_none(),
    };
    if needs_truth && !cfg.truth_given {
        return Err(Error::Config(format!(
            "mode {} needs initial data: set `run.preset` or add a [truth] table{}",
            cfg.mode,
            if cfg.mode == Mode::Reconstruct { ", or give `targets.file`" } else { "" }
        )));
    }
    if cfg.optim.lambda2 > 0.0 && !cfg.targets.use_sigma && cfg.mode == Mode::Reconstruct {
        return Err(Error::Config("lambda2 > 0 needs `targets.use_sigma = true`".into()));
    }
    if cfg.truth.centers.iter().chain(&cfg.guess.centers).any(|c| c.len() < cfg.mesh.dim) {
        return Err(Error::Config(format!("shape centres need {} coordinates each", cfg.mesh.dim)));
    }
    cfg.model.validate()?;
    cfg.optim.validate()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<RunConfig> {
        parse_config_str(text, Path::new("."), &Overrides::default())
    }

    fn forward_override() -> Overrides {
        Overrides { mode: Some(Mode::Forward), ..Default::default() }
    }

    #[test]
    fn empty_file_gives_table_defaults() {
        let err = parse_config_str("", Path::new("."), &forward_override()).unwrap_err();
        assert!(err.to_string().contains("initial data"));
        let cfg = parse_config_str("[truth]\nshape = \"disc\"\n", Path::new("."), &forward_override()).unwrap();
        let p = &cfg.model;
        assert_eq!(cfg.mode, Mode::Forward);
        assert_eq!(
            (p.p0, p.delta, p.d_phi, p.d_sigma, p.gamma, p.chi, p.eps, p.c, p.kappa),
            (0.1, 0.001, 0.00053, 0.001, 2.5, 0.5, 0.025, 0.02, 0.12)
        );
    }

    #[test]
    fn rho_out_of_range_rejected_with_line() {
        let err = parse("[run]\nmode = \"reconstruct\"\npreset = \"test_case_2\"\n[optim]\nrho = 1.5\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 5") && msg.contains("optim.rho"), "{msg}");
    }

    #[test]
    fn unknown_key_and_type_mismatch_name_the_line() {
        let err = parse("[run]\nmode = \"forward\"\n[model]\ngamma = 2.0\nbogus = 1\n").unwrap_err().to_string();
        assert!(err.contains("line 5") && err.contains("bogus"), "{err}");
        let err = parse("[run]\nmode = \"forward\"\n[model]\ngamma = \"big\"\n").unwrap_err().to_string();
        assert!(err.contains("line 4") && err.contains("gamma"), "{err}");
    }

    #[test]
    fn test_case_2_preset() {
        let cfg = parse("[run]\nmode = \"reconstruct\"\npreset = \"test_case_2\"\n").unwrap();
        assert_eq!(cfg.optim.lambda1, 1.0);
        assert_eq!(cfg.optim.lambda2, 0.0);
        assert_eq!(cfg.optim.alpha2, 0.0);
        assert_eq!(cfg.truth.kind, ShapeKind::Disc);
        assert_eq!(cfg.truth.radius, 0.6);
        assert_eq!(cfg.truth.centers, vec![vec![0.0, 0.0]]);
    }

    #[test]
    fn alpha_is_scaled_by_gamma_and_file_overrides_preset() {
        let cfg = parse("[run]\nmode = \"reconstruct\"\npreset = \"test_case_2\"\n[model]\ngamma = 2.0\n[optim]\nalpha = 0.5\n").unwrap();
        assert_eq!(cfg.optim.alpha1, 0.25);
        let o = Overrides { seed: Some(9), out: Some("x".into()), ..Default::default() };
        let cfg = parse_config_str("[run]\nmode = \"reconstruct\"\npreset = \"test_case_3\"\nseed = 3\n", Path::new("."), &o).unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.output.dir, PathBuf::from("x"));
    }

    #[test]
    fn mode_requirements() {
        assert!(parse("[time]\nt_final = 1\n").unwrap_err().to_string().contains("run.mode"));
        let cfg = parse("[run]\nmode = \"make-target\"\npreset = \"test_case_2\"\n[time]\nt_final = 0\nsteps = 0\n").unwrap();
        assert!(cfg.time.is_none());
        assert!(parse("[run]\nmode = \"forward\"\npreset = \"test_case_2\"\n[time]\nt_final = 0\nsteps = 0\n").is_err());
        assert!(parse("[run]\nmode = \"forward\"\npreset = \"test_case_2\"\n[time]\nt_final = 1\nsteps = 0\n").is_err());
        assert!(parse("[run]\nmode = \"sideways\"\n").unwrap_err().to_string().contains("line 2"));
        let cfg = parse("[run]\nmode = \"reconstruct\"\n[targets]\nfile = \"t.vtk\"\n").unwrap();
        assert_eq!(cfg.targets.file, Some(PathBuf::from("./t.vtk")));
    }

    #[test]
    fn time_keys() {
        let cfg = parse("[run]\nmode = \"forward\"\npreset = \"test_case_2\"\n[time]\nt_final = 2\ndt = 0.1\n").unwrap();
        assert_eq!(cfg.time.unwrap().steps(), 20);
        assert!(parse("[run]\nmode = \"forward\"\npreset = \"test_case_2\"\n[time]\ndt = 0.1\nsteps = 3\n").is_err());
    }

    #[test]
    fn shapes_and_noise() {
        let cfg = parse(
            "[run]\nmode = \"forward\"\n[truth]\nshape = \"square\"\ncenters = [-1, -1, 1, 1]\nplateaus = [0.6, 0.8]\nside = 1\n[noise]\nlevel = 0.1\nmode = \"relative\"\n",
        )
        .unwrap();
        assert_eq!(cfg.truth.centers, vec![vec![-1.0, -1.0], vec![1.0, 1.0]]);
        assert_eq!(cfg.noise.mode, NoiseMode::Relative);
        assert!(parse("[run]\nmode = \"forward\"\n[truth]\nshape = \"disc\"\ncenters = [0, 0, 1, 1]\nplateaus = [0.5]\n").is_err());
        assert!(parse("[run]\nmode = \"forward\"\n[truth]\nshape = \"disc\"\n[noise]\nlevel = 1.0\n").is_err());
    }
}
