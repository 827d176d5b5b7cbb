//! Statistical checks of the fixed-point property and of the identities
//! around it.

pub mod decoration;
pub mod fixed_point;
pub mod laplace;
pub mod shape;
pub mod smoothing;

pub use decoration::{
    count_stabilization, extract_decoration, CountStabilization, DecorationExtraction, MIN_CONDITIONED,
};
pub use fixed_point::{verify_fixed_point, FixedPointOptions, TestOutcome, Verdict, VerificationReport};
pub use laplace::{laplace_battery, laplace_functional, sdppp_laplace_oracle, LaplaceEstimate, QuadratureOptions};
pub use shape::{fit_t_phi, translation_shape_test, ShapeReport};
pub use smoothing::{fit_shift_family, log_spaced, smoothing_iterate, GridFunction, SmoothingFit, SmoothingRun};
