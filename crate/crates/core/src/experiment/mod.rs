//! Configuration, file formats and mode drivers for the command-line tool.

pub mod config;
pub mod noise;
pub mod output;
pub mod presets;
pub mod run;
pub mod vtk;

pub use config::{parse_config, parse_config_str, parse_config_with, Mode, Overrides, RunConfig};
pub use noise::{add_noise, NoiseMode};
pub use output::{atomic_write, convergence_csv, write_convergence_csv, CSV_HEADER};
pub use presets::{preset, PRESET_NAMES};
pub use run::{
    grad_check, initial_data, load_targets, make_target, run_forward_mode, run_reconstruct, run_reconstruct_with,
    write_target, GradCheckReport, TargetData,
};
pub use vtk::{read_vtk, write_vtk, FieldFile};
