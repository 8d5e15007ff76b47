//! Quantitative checks of the chain geometry: the free-space chain-length
//! law, Hölder fits, outer-layer measures, almost-boundedness and covering.

mod bounded;
mod connectivity;
mod cover;
mod freespace;
mod holder;
mod law;
mod layers;
mod parameters;

pub use bounded::{almost_bounded_check, AlmostBoundedReport, BoundedConfig, BoundedRow};
pub use connectivity::{connectivity_sweep, ConnectivityReport, ConnectivitySample};
pub use cover::{cylinder_within, cylinders_disjoint, whitney_cover};
pub use freespace::{freespace_grid, freespace_targets, freespace_law_check, FreeSpaceReport, FreeSpaceSample};
pub use holder::{
    holder_fit, holder_fit_two_level, holder_ratio, holder_ratios, sample_shells, summarize, HolderFitReport, HolderSample,
    ShellSampling,
};
pub(crate) use law::freespace_law_raw;
pub use law::{barenblatt, freespace_law};
pub use layers::{layer_measures, least_squares, LayerConfig, LayerReport, LayerShell};
pub use parameters::{parameter_comparison, shared_sources, PairDistance, ParameterComparison};
