//! Thermodynamic formalism for hyperbolic meromorphic maps of finite order.

pub mod bowen;
pub mod catalog;
pub mod error;
pub mod export;
pub mod julia;
pub mod measure;
pub mod nevanlinna;
pub mod pipeline;
pub mod poly;
pub mod quadrature;
pub mod scalar;
pub mod sigma;
pub mod sweep;
pub mod transfer;

pub use error::{Error, Result};
pub use scalar::Real;

pub type MapDescriptor = catalog::MapDescriptor<f64>;
pub type MapDescriptor32 = catalog::MapDescriptor<f32>;
pub type PivotGraph = transfer::PivotGraph<f64>;
pub type PivotGraph32 = transfer::PivotGraph<f32>;
pub type PressureEstimate = transfer::PressureEstimate<f64>;
pub type DimensionResult = bowen::DimensionResult<f64>;
pub type AtomicMeasure = measure::AtomicMeasure<f64>;
