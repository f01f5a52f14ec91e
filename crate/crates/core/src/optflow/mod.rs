//! Random colour pattern generation and dense inverse search optical flow.

mod dis;
mod field;
mod image;
mod pattern;
pub mod pyramid;

pub use dis::{dis_flow, dis_flow_gray, DisReference, FlowParams};
pub use field::{downsample_field, DisplacementField};
pub use image::{GrayImage, PatternImage};
pub use pattern::{generate_pattern, patch_colours, rgb_dist2, ASSIGNED_NEIGHBOURS};
