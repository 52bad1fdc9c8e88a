//! Summary statistics of epidemic paths.

mod scale;
mod step_path;
mod vector;

pub(crate) use scale::fit_scale_rows;
pub use scale::{fit_scale, ScaleMatrix};
pub use step_path::{detection_paths, l1_distance, DetectionRecorder, StepPath};
pub use vector::{vector_summaries, SummaryAccumulator, SummaryLayout, SummaryVector};
