//! Live WebSocket front end for the tactile foot and gripper simulation.
//!
//! One thread ticks the [`World`] at the control rate and publishes
//! [`StateFrame`]s; every `/ws` client receives the same frames and may send
//! [`Command`]s. `/health` reports the service name and version.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod protocol;
pub mod server;
pub mod world;

pub use protocol::{Command, FlowThumb, GraspState, ServerMsg, StateFrame, Switch};
pub use server::{serve, LiveSim, ServeConfig, CLIENT_QUEUE};
pub use world::{World, WorldConfig, THUMB_HEIGHT, THUMB_WIDTH, TILT_LIMIT};
