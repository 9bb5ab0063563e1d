//! Filtering, interpolation, differentiation and spectral estimation on
//! uniformly sampled series.

pub mod diff;
pub mod filter;
pub mod spline;
pub mod stats;
pub mod welch;

pub use diff::{derivatives, DiffScheme};
pub use filter::{Biquad, Sos};
pub use spline::{LinearInterp, UniformSpline};
