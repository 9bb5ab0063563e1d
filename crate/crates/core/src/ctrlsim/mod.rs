//! Admittance-controlled perturbator: discrete control loop against a
//! simulated motor, rod linkage and hanging leg, with step-response and
//! frequency-response analysis.

mod admittance;
mod metrics;
mod plant;
mod pva;
mod sim;

pub use admittance::{Admittance, ControllerParams};
pub use metrics::{loop_frf, step_metrics, FrfSummary, StepMetrics, LOW_FREQUENCY_BINS};
pub use plant::{PlantModel, PlantState};
pub use pva::{pva_limit, PvaLimits, SafetyTrip};
pub use sim::{simulate_loop, LoopScenario, LoopTrace, Profile};
