use super::DatasetConfig;
use crate::optflow::{generate_pattern, DisReference};
use crate::skin_sim::{deformation_field, render_frame};
use crate::{DisplacementField, PatternImage, Result, ScenarioState};

/// One simulated tactile foot: the printed pattern and the flow solver primed
/// with it. The pattern is the one [`super::gen_dataset`] uses for the same
/// config and seed.
#[derive(Debug, Clone)]
pub struct TactileSensor {
    config: DatasetConfig,
    pattern: PatternImage,
    reference: DisReference,
}

impl TactileSensor {
    pub fn new(config: &DatasetConfig, pattern_seed: u64) -> Result<Self> {
        config.validate()?;
        let pattern = generate_pattern(
            config.raster_width / config.pattern_patch_px,
            config.raster_height / config.pattern_patch_px,
            config.pattern_patch_px,
            config.pattern_candidates,
            pattern_seed,
        )?;
        let reference = DisReference::new(&pattern.to_gray(), &config.flow)?;
        Ok(Self {
            config: config.clone(),
            pattern,
            reference,
        })
    }

    pub fn config(&self) -> &DatasetConfig {
        &self.config
    }

    pub fn pattern(&self) -> &PatternImage {
        &self.pattern
    }

    /// Camera frame for `state`.
    pub fn frame(&self, state: &ScenarioState, seed: u64) -> Result<PatternImage> {
        let c = &self.config;
        let truth = deformation_field(state, &c.geometry, &c.skin, c.raster_width, c.raster_height, seed)?;
        render_frame(&self.pattern, &truth)
    }

    /// Full-resolution flow recovered from the camera frame for `state`.
    pub fn sense(&self, state: &ScenarioState, seed: u64) -> Result<DisplacementField> {
        self.reference.flow_rgb(&self.frame(state, seed)?)
    }

    /// Pools a full-resolution flow to the network field size.
    pub fn pool(&self, field: &DisplacementField) -> Result<DisplacementField> {
        field.downsample(self.config.field_width, self.config.field_height)
    }
}
