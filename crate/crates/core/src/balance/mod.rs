//! Ankle balance control.
//!
//! The pose estimate sets a desired motor angle, which is turned into a servo
//! PWM duty with a damping term on its rate. In tactile mode the loop only
//! acts while the skin reports contact and holds the last duty otherwise.
//!
//! The simulated plant is quasi-static: on the ground the foot lies on the
//! plate (tilted further by the gravity moment through the skin compliance);
//! in the air the leg is held at a fixed inclination and the servo swings the
//! foot.

mod control;
mod plant;
mod profile;
mod sim;

pub use control::{contact_detect, control_angle, duty_cycle, ControllerGains, RateEstimator};
pub use plant::{leg_angle, servo_for_leg_angle, servo_offset, PlantParams, Servo, TipMonitor};
pub use profile::{Keyframe, LegCmd, Profile, ProfileSample};
pub use sim::{
    run_scenario, BalanceSim, ControlTrace, NetEstimator, PoseEstimator, SensorMode, SimConfig, TraceRow,
    TruthEstimator, TRACE_HEADER,
};
