//! Swing-leg joint impedance identification.
//!
//! The crate models the swing leg as a planar thigh-shank-foot pendulum on a
//! horizontally moving cart, recovers feed-forward forces by inverse dynamics,
//! and estimates hip, knee and ankle stiffness and damping from the difference
//! between perturbed and unperturbed strides. Supporting modules cover gait
//! preprocessing and a simulation of the perturbation device's admittance
//! controller.
//!
//! Start with the runnable programs in `examples/`.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod ctrlsim;
pub mod dynamics;
pub mod error;
pub mod gaitproc;
pub mod ident;
pub mod lsq;
pub mod model;
pub mod ode;
pub mod signal;
pub mod synthval;
pub mod table;

pub use config::Config;
pub use error::{Error, Result};
