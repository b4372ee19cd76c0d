//! Extraction of visual relations from chart images.
//!
//! The pipeline turns a raster chart into a list of series, each with its
//! color, legend text and correlation class:
//!
//! 1. [`preprocess`] whitens every weakly saturated pixel so only series
//!    marks remain.
//! 2. [`cluster`] picks the number of colors from the knee of the k-means
//!    error curve.
//! 3. [`segment`] turns each non-background cluster into a pixel mask and
//!    joins masks to legend entries.
//! 4. [`relate`] measures the rank correlation of each mask.
//!
//! [`chartgen`] produces synthetic charts with ground truth and [`eval`]
//! scores extraction results against it.

// Parameter checks use negated comparisons so NaN is rejected.
#[allow(clippy::neg_cmp_op_on_partial_ord)]
pub mod chartgen;
pub mod cluster;
pub mod config;
pub mod error;
pub mod eval;
pub mod preprocess;
pub mod raster;
pub mod relate;
pub mod segment;

pub use config::PipelineConfig;
pub use error::{Error, Result};
pub use raster::{load_image, save_image, Hsv, RasterImage, Rect, Rgb8};
pub use relate::{extract_relations, ExtractedSeries, ExtractionResult, RelationLabel};
