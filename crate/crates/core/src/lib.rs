//! Characteristic flows, gyro-averaged asymptotics, wave-kernel quadrature and linearized
//! Vlasov transport for relativistic plasmas in a strong external magnetic field.
//!
//! The small parameter ε is the ratio of gyroperiod to transport time; the external field
//! enters the momentum equation with weight 1/ε. Positions are `Vec3`, momenta are `Vec3`
//! with ⟨ξ⟩ = √(1 + |ξ|²) and velocity v = ξ/⟨ξ⟩.

// `!(x > 0.0)` is used on purpose so that NaN is rejected along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics;
pub mod characteristics;
pub mod diff;
pub mod error;
pub mod field_models;
pub mod harness;
pub mod phase_averaging;
pub mod quadrature;
pub mod straightening;
pub mod vlasov_transport;
pub mod wave_kernel;

pub use error::{Error, Result};

pub type Vec3 = nalgebra::Vector3<f64>;
pub type Mat3 = nalgebra::Matrix3<f64>;
