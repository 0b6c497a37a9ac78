//! Exact t-SNE and scatter-plot export.

mod scatter;
mod tsne;

pub use scatter::{
    export_scatter, parse_scatter_csv, read_scatter_csv, ScatterPoint, MISSING_LABEL_COLOR,
};
pub use tsne::{pca_reduce, silhouette, tsne_project, TsneConfig, TsneOutput};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum VizError {
    #[error("t-SNE needs at least {min} points, got {got}")]
    TooFewPoints { min: usize, got: usize },
    #[error("perplexity {perplexity} must be below (n - 1) / 3 = {limit}")]
    PerplexityTooLarge { perplexity: f64, limit: f64 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("rows have inconsistent widths")]
    Ragged,
    #[error("non-finite input value")]
    NonFinite,
    #[error("{coords} coordinates but {labels} labels")]
    Misaligned { coords: usize, labels: usize },
    #[error("bad scatter CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("bad scatter CSV line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}
