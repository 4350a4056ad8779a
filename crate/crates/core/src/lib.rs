//! Scene text proposals by pooling-based edge grouping.
//!
//! The pipeline turns an image into ranked candidate word boxes:
//! Canny edges are labelled into connected components ([`edges`]), the label
//! map is pooled until neighbouring components co-occur and get grouped
//! ([`grouping`]), each group's box is described by an orientation histogram
//! of its edge pixels ([`hoge`]) and scored against learned text and
//! non-text templates ([`ranking`]). [`eval`] measures recall against
//! annotated datasets and runs the parameter sweeps.

pub mod edges;
pub mod eval;
pub mod fixtures;
pub mod geometry;
pub mod grouping;
pub mod hoge;
pub mod ingest;
pub mod pipeline;
pub mod ranking;

use thiserror::Error;

/// Any failure along the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Ingest(#[from] ingest::IngestError),
    #[error(transparent)]
    Edge(#[from] edges::EdgeError),
    #[error(transparent)]
    Grouping(#[from] grouping::GroupingError),
    #[error(transparent)]
    Hoge(#[from] hoge::HogeError),
    #[error(transparent)]
    Ranking(#[from] ranking::RankingError),
    #[error(transparent)]
    Eval(#[from] eval::EvalError),
    #[error("invalid configuration: {0}")]
    Config(String),
}
