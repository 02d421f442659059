//! Weighted Gini correlations, bivariate Pareto families and Gini-type
//! premium principles.

pub mod distributions;
pub mod error;
pub mod gini;
pub mod oracle;
pub mod quad;
pub mod sample;
pub mod io;
pub mod specfun;
pub mod weights;
pub mod verify;
pub mod wipm;

pub use distributions::{BivariateFamily, Frame, MarginLaw, ParetoIIMargin, RegressionLine};
pub use error::{Error, Result};
pub use gini::{Bootstrap, CorrelationReport, Method};
pub use quad::QuadratureSpec;
pub use sample::{PairedSample, Provenance};
pub use weights::{TableWeight, WeightFunction, WeightKind};
pub use wipm::{Orientation, Portfolio, PremiumResult};
