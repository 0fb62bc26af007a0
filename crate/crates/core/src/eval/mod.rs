//! ROM rollouts, error metrics and diagnostics, and greedy parameter sampling.

mod entropy;
mod greedy;
mod grid;
mod indicator;
mod linear;
mod metrics;
mod predict;
mod error_bound;


pub use entropy::{entropy_report, EntropyAggregate, EntropyReport, EntropySeries};
pub use greedy::{greedy_sample, GreedyOutcome, GreedySchedule, SelectionRound};
pub use grid::{write_heatmap_csv, Axis, ParameterGrid};
pub use indicator::{residual_indicator, trajectory_residual, PdeKind, PdeProblem};
pub use linear::{check_identities, linear_rom_case, random_symmetric, IdentityCheck, LinearCase, SpectralRom};
pub use metrics::{extrap_error, max_rel_error, mean_std};
pub use predict::{rom_predict, Prediction};
pub use error_bound::{cumulative_trapezoid, error_components, error_components_from_parts, ErrorReport};
