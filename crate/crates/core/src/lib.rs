//! Spectral estimation of Lévy jump measures and increment densities from irregularly
//! spaced observations.

pub mod error;
pub mod estimators;
pub mod grid;
mod kernel;
pub mod models;
pub mod quad;
pub mod rates;
pub mod sampling;
pub mod selection;
mod simd;
pub mod spectral;
pub mod weights;

pub use error::{Error, Result};
pub use estimators::{DensityEstimate, JumpEstimate, Kernel};
pub use grid::SpectralGrid;
pub use models::LevyModel;
pub use sampling::{ObservationSet, SamplingScheme};
pub use spectral::{CharFnEstimate, SpectralStatistics};
pub use weights::{WeightKind, WeightScheme};
