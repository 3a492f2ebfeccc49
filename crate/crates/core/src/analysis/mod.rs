//! Sweeps over the cut parameter, scaling-law fits and regime classification.

mod curve;
mod fit;
mod rescale;
mod sweep;

pub use curve::{CurvePoint, ScalingCurve, CURVE_CSV_HEADER};
pub use fit::{classify, fit, interior_window, FitParam, FitResult, ScalingModel};
pub use rescale::{pointwise_spread, rescale_align, shape_collapse_rms, Abscissa};
pub use sweep::{estimate, sweep, EstimatorConfig};
