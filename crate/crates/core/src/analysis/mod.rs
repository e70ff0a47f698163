//! Scaling fits, data collapse and sweep aggregation.

mod collapse;
mod dataset;
mod fit;

pub use collapse::{collapse, collapse_quality, crossings, rising_crossings, CollapseOptions, CollapseResult, LandscapePoint, ScalingPoint};
pub use dataset::{aggregate, metadata_for, Aggregator, SweepDataset, SweepRow, CSV_VERSION};
pub use fit::{
    chord_log2, fit_area_law, fit_log_profile, fit_time_growth, linear_fit, saturation_time, FitOptions, FitResult, Point,
};

#[derive(Debug, thiserror::Error)]
pub enum AnalysisError {
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("rescaled sizes do not overlap anywhere in the search range")]
    NoOverlap,
    #[error("records for L = {l}, p = {p} come from different parameter sets")]
    MixedParams { l: usize, p: f64 },
    #[error("duplicate row for L = {l}, p = {p}, {observable}")]
    DuplicateRow { l: usize, p: f64, observable: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl PartialEq for AnalysisError {
    fn eq(&self, other: &Self) -> bool {
        self.to_string() == other.to_string()
    }
}
