//! Friction-cone grasp monitoring and grip force control for a two-finger
//! gripper.
//!
//! Each fingertip reports a contact force; its tangential/normal ratio is
//! compared with a band `[μ − d/2, μ + d/2]` around the nominal friction
//! coefficient. The controller narrows the gripper when both fingers are
//! above the band and widens it when both are below.

mod contact;
mod sim;

pub use contact::{
    classify_phase, grip_controller_step, nominal_mu, Band, ContactPhase, ContactWrench, FrictionModel, FN_EPS,
};
pub use sim::{
    friction_step, simulate_grasp, FrictionStep, GraspConfig, GraspRow, GraspSim, GraspTrace, LoadPoint, LoadSchedule,
    GRASP_HEADER,
};
