//! Concurrent adaptation of feedforward force, impedance and reference
//! trajectory for a robot in contact with a periodic visco-elastic environment.
//!
//! The crate is organised bottom-up: [`robot`] models and their
//! operational-space dynamics, the ground-truth [`environment`], the adaptive
//! [`controller`], the closed-loop [`sim`]ulation and the [`analysis`] of its
//! costs and stability margins.

// `!(a > b)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// The residual functions take every operand of an update law explicitly.
#![allow(clippy::too_many_arguments)]

pub mod analysis;
pub mod controller;
pub mod environment;
pub mod linalg;
pub mod robot;
pub mod sim;

pub use analysis::{PeriodCosts, PrimeCost};
pub use controller::{
    ControlError, ControlOutput, Controller, ControllerConfig, Estimates, GainError, GainParams, GainSet, Gate,
    InitialReference, PeriodBuffer, ReferenceMode, TrackingSignals, Variant,
};
pub use environment::{EffectiveForceParams, EnvironmentError, EnvironmentProfile, Periodic};
pub use linalg::{Matrix, Vector};
pub use robot::{DynamicsError, DynamicsTerms, JointState, PointMass, Robot, RobotModel, TaskState, TwoLinkArm};
pub use sim::{rk4_step, run_scenario, ConfigError, ScenarioConfig, SimError, StepRecord, Trace};
