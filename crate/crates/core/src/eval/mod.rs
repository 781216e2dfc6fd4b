//! Comparison of reconstructions and geometry estimates with ground truth,
//! modulo the global rotation, reflection and translation that the data
//! cannot determine.

mod align;
mod angles;
mod metrics;
mod transform;

pub use align::{align, align_near, orientation_from_angles, AlignmentResult};
pub use angles::{
    angle_error, circular_diff, circular_order_agreement, shift_error, AngleError, ShiftError,
};
pub use metrics::{correlation, metrics, rrmse, ssim_with_range, MetricSet};
pub use transform::{apply_transform, flip_horizontal, rotate, translate};
