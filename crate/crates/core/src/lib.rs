//! Software twin of a vision-based tactile robot foot and gripper fingertip.
//!
//! The crate is organised along the signal path:
//!
//! * [`skin_sim`] turns scenario kinematics into a synthetic skin
//!   displacement field and renders the camera view of the deformed pattern.
//! * [`optflow`] generates the random colour pattern and recovers dense
//!   displacement fields with dense inverse search.
//! * [`posenet`] is a small from-scratch CNN regressing foot and ground tilt
//!   from a displacement field.
//! * [`balance`] and [`grasp`] close the loop: ankle balance control with
//!   contact gating, and friction-cone grasp force control.
//! * [`harness`] ties everything together: datasets, file formats, profiles
//!   and experiment pipelines.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod balance;
pub mod error;
pub mod grasp;
pub mod harness;
pub mod optflow;
pub mod posenet;
pub mod skin_sim;

pub use error::{Error, Result};
pub use optflow::{DisplacementField, FlowParams, PatternImage};
pub use skin_sim::{LegGeometry, ScenarioState, SkinParams};

/// Standard gravity, m/s².
pub const GRAVITY: f64 = 9.81;

pub(crate) fn deg2rad(deg: f64) -> f64 {
    deg.to_radians()
}

/// Derives an independent seed from `seed` and a counter (splitmix64).
pub fn mix_seed(seed: u64, n: u64) -> u64 {
    let mut z = seed
        ^ n.wrapping_add(0x9E37_79B9_7F4A_7C15)
            .wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
