//! Full-order data: gas containers, inviscid Burgers and heat solvers, finite-difference
//! derivatives, subsampling and dataset files.

mod burgers;
mod derivatives;
mod gas;
mod heat;
mod io;
mod pde;
mod snapshot;
mod tridiag;

pub use burgers::{burgers_residual, burgers_solve, burgers_solve_from, burgers_step_residual, BurgersParams};
pub use derivatives::{fd_derivatives, subsample, DifferenceScheme};
pub use gas::{
    gas_generate, gas_rhs, gas_trajectory, stack_trajectories, time_grid, unstack_state, EntropyExchange, GasGeneration,
    GasState, InitBox,
};
pub use heat::{heat_residual, heat_solve, heat_solve_from, HeatParams};
pub use io::{dataset_from_bytes, dataset_read, dataset_read_csv, dataset_to_bytes, dataset_write, dataset_write_csv};
pub use pde::{unique_points, GaussianIc, PdeGrid};
pub use snapshot::{GridMeta, SnapshotSet};
pub use tridiag::{solve_cyclic_tridiagonal, solve_tridiagonal};
