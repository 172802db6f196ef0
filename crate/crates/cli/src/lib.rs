// validation uses `!(x > 0.0)` deliberately: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// indexed loops over cells, axes, and steps mirror the discrete formulas
#![allow(clippy::needless_range_loop)]

//! Operational surface of the solvers: configuration files, binary field
//! snapshots, trajectory persistence, experiment orchestration, and
//! plot-data CSVs.

pub mod bchf;
pub mod config;
pub mod error;
pub mod manifest;
pub mod modes;
pub mod plotdata;
pub mod profiles;
pub mod traj;

pub use config::{parse_config, serialize_config, Mode, RunConfig};
pub use error::CliError;
pub use modes::run;
