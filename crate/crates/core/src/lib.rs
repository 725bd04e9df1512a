//! Wasserstein-based statistics for distribution-valued data.
//!
//! Every modal value (point, interval, histogram, discrete multi-set, or
//! parametric density) lowers to a piecewise-linear quantile function. All
//! distances, moments, and cross-products are then exact closed-form
//! integrals over aligned linear pieces.

pub mod association;
pub mod cli;
pub mod clustering;
pub mod error;
pub mod io;
pub mod mahalanobis;
pub mod modal;
pub(crate) mod piecewise;
pub mod quantile;
pub mod table;
pub mod univariate;
pub mod wasserstein;

pub use error::{Error, Result};
pub use modal::{lower, ModalValue};
pub use piecewise::Segment;
pub use quantile::QuantileFunction;
pub use table::DistributionalTable;
