//! The six reference experiments, at desk scale (default) or full scale
//! (`_full` suffix).
//!
//! Desk scale shrinks the generation/reconstruction meshes from 80/64 to
//! 48/32 and the horizon to `T = 5` with `dt = 0.05`, without refinement.

use crate::error::{Error, Result};
use crate::forward::TimeGrid;
use crate::optimizer::{RefineConfig, SigmaMode};

use super::config::{InitialSpec, RunConfig, ShapeKind, SigmaInit};

pub const PRESET_NAMES: [&str; 6] =
    ["test_case_1", "test_case_2", "test_case_3", "test_case_4", "test_case_5", "test_case_6"];

fn disc(center: &[f64], radius: f64) -> InitialSpec {
    InitialSpec { kind: ShapeKind::Disc, centers: vec![center.to_vec()], radius, plateaus: vec![1.0], ..Default::default() }
}

fn null_guess() -> InitialSpec {
    InitialSpec { kind: ShapeKind::Zero, sigma: SigmaInit::Constant(1.0), ..Default::default() }
}

/// Base configuration of a named preset; the mode is left at its default.
pub fn preset(name: &str) -> Result<RunConfig> {
    let (base, full) = match name.strip_suffix("_full") {
        Some(b) => (b, true),
        None => (name.strip_suffix("_desk").unwrap_or(name), false),
    };
    let case = PRESET_NAMES
        .iter()
        .position(|&p| p == base)
        .ok_or_else(|| Error::Config(format!("unknown preset `{name}` (test_case_1 ... test_case_6, optional _full or _desk suffix)")))?
        + 1;

    let mut cfg = RunConfig { preset: Some(name.to_string()), truth_given: true, ..Default::default() };
    let (t_full, t_desk) = match case {
        1 => (30.0, 5.0),
        6 => (40.0, 1.0),
        _ => (20.0, 5.0),
    };
    cfg.time = Some(if full { TimeGrid::from_step(t_full, 0.01)? } else { TimeGrid::from_step(t_desk, 0.05)? });
    if full {
        cfg.mesh.n = 64;
        cfg.mesh.gen_n = 80;
        cfg.optim.refine = Some(RefineConfig::default());
    }
    cfg.optim.lambda1 = 1.0;
    cfg.optim.lambda2 = 0.0;
    cfg.optim.alpha1 = 0.01 / cfg.model.gamma;
    cfg.optim.alpha2 = 0.0;
    cfg.optim.sigma_mode = SigmaMode::Stationary;
    cfg.truth = InitialSpec { sigma: SigmaInit::Stationary, ..disc(&[0.0, 0.0], 0.6) };
    cfg.guess = null_guess();

    match case {
        1 => {
            // both initial fields are controls and both final states measured
            cfg.optim.lambda2 = 1.0;
            cfg.optim.alpha2 = 0.01;
            cfg.optim.sigma_mode = SigmaMode::Optimize;
            cfg.truth.sigma = SigmaInit::Complement;
            cfg.targets.use_sigma = true;
        }
        2 => {}
        3 => {
            let (offset, side) = if full { (1.0, 0.25) } else { (1.0, 1.0) };
            cfg.truth = InitialSpec {
                kind: ShapeKind::Square,
                centers: vec![vec![-offset, -offset], vec![offset, offset]],
                side,
                plateaus: vec![0.6, 0.8],
                sigma: SigmaInit::Stationary,
                ..Default::default()
            };
        }
        4 => {
            cfg.noise.level = 0.02;
        }
        5 => {
            cfg.guess = InitialSpec {
                kind: ShapeKind::Disc,
                centers: vec![vec![-1.2, 0.0], vec![1.2, 0.0]],
                radius: 0.4,
                plateaus: vec![1.0, 1.0],
                sigma: SigmaInit::Constant(1.0),
                ..Default::default()
            };
        }
        6 => {
            cfg.mesh.dim = 3;
            cfg.optim.refine = None;
            if full {
                cfg.mesh.lower = vec![-5.0; 3];
                cfg.mesh.upper = vec![5.0; 3];
                cfg.mesh.n = 60;
                cfg.mesh.gen_n = 80;
            } else {
                cfg.mesh.lower = vec![-2.0; 3];
                cfg.mesh.upper = vec![2.0; 3];
                cfg.mesh.n = 12;
                cfg.mesh.gen_n = 16;
            }
            cfg.truth = InitialSpec { sigma: SigmaInit::Stationary, ..disc(&[0.0, 0.0, 0.0], 0.6) };
        }
        _ => unreachable!(),
    }
    Ok(cfg)
}
