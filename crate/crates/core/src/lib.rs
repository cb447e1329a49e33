//! Corrected convolution-quadrature time stepping for time-fractional
//! nonlinear subdiffusion problems, with a sum-of-exponentials fast history.

pub mod corrections;
pub mod cq_weights;
pub mod error;
pub mod fast_history;
pub mod harness;
pub mod mittag_leffler;
pub mod spatial_ops;
pub mod stepper;

pub use corrections::{CorrectionConfig, StartingWeightTable};
pub use cq_weights::{CoeffSeries, Family, GeneratingFunction};
pub use error::{Error, Result};
pub use fast_history::ExpSumApprox;
pub use harness::{ConvergenceReport, ExperimentConfig, Table};
pub use spatial_ops::{Fd2d, Rect, ScalarMode, SineSpectral2D, SpatialOperator};
pub use stepper::{ProblemSpec, Reaction, SchemeConfig, Trajectory};
