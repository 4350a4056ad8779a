//! Canny edges and the labelled edge feature map the grouper pools over.

mod canny;
mod labeling;

pub use canny::{
    canny, canny_with_gradients, gaussian_blur, gradients, sobel, CannyConfig, EdgeMask,
    GradientField, MIN_GRADIENT_MAGNITUDE,
};
pub use labeling::{label_components, EdgeComponent, EdgeLabelMap, LabelMode};

use thiserror::Error;

use crate::ingest::GrayImage;

#[derive(Debug, Error, PartialEq)]
pub enum EdgeError {
    #[error("image has zero width or height")]
    EmptyImage,
    #[error("invalid edge configuration: {0}")]
    InvalidConfig(String),
    #[error("grid dimensions do not match")]
    DimensionMismatch,
}

/// Everything derived from one image's edges.
#[derive(Debug, Clone)]
pub struct EdgeExtraction {
    pub mask: EdgeMask,
    pub gradients: GradientField,
    pub label_map: EdgeLabelMap,
}

/// Canny followed by component labelling.
pub fn extract_edges(
    img: &GrayImage,
    cfg: &CannyConfig,
    mode: LabelMode,
) -> Result<EdgeExtraction, EdgeError> {
    let (mask, gradients) = canny_with_gradients(img, cfg)?;
    let label_map = label_components(&mask, &gradients.magnitude, mode);
    Ok(EdgeExtraction {
        mask,
        gradients,
        label_map,
    })
}
