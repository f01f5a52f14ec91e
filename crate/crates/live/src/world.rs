//! The simulated bench: balance foot on a tiltable plate plus the gripper.

use tacfoot_core::balance::{
    BalanceSim, LegCmd, NetEstimator, PoseEstimator, ProfileSample, SensorMode, SimConfig, TruthEstimator,
};
use tacfoot_core::grasp::{GraspConfig, GraspSim};
use tacfoot_core::harness::TactileSensor;
use tacfoot_core::posenet::PoseModel;
use tacfoot_core::{Error, Result};

use crate::protocol::{Command, FlowThumb, GraspState, StateFrame, Switch};

pub const THUMB_WIDTH: usize = 16;
pub const THUMB_HEIGHT: usize = 12;
/// Accepted tilt targets, degrees.
pub const TILT_LIMIT: f64 = 30.0;

pub type Estimator = Box<dyn PoseEstimator + Send>;

#[derive(Debug, Clone)]
pub struct WorldConfig {
    pub sim: SimConfig,
    pub grasp: GraspConfig,
    pub mode: SensorMode,
    /// Plate slew rate, degrees per second.
    pub tilt_slew: f64,
    pub initial_tilt: f64,
    pub pattern_seed: u64,
    /// Pose network for tactile mode; the true angles are used without one.
    pub model: Option<PoseModel>,
}

impl Default for WorldConfig {
    fn default() -> Self {
        Self {
            sim: SimConfig::default(),
            grasp: GraspConfig::default(),
            mode: SensorMode::Tactile,
            tilt_slew: 5.0,
            initial_tilt: 0.0,
            pattern_seed: 0,
            model: None,
        }
    }
}

impl WorldConfig {
    pub fn validate(&self) -> Result<()> {
        self.sim.validate()?;
        self.grasp.validate()?;
        if !(self.tilt_slew.is_finite() && self.tilt_slew > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "tilt slew must be positive, got {}",
                self.tilt_slew
            )));
        }
        if !(self.initial_tilt.abs() <= TILT_LIMIT) {
            return Err(Error::InvalidArgument(format!(
                "initial tilt {} outside ±{TILT_LIMIT}",
                self.initial_tilt
            )));
        }
        Ok(())
    }

    fn estimator(&self) -> Estimator {
        match &self.model {
            Some(m) => Box::new(NetEstimator::new(m.clone())),
            None => Box::new(TruthEstimator::exact()),
        }
    }
}

pub struct World {
    cfg: WorldConfig,
    sensor: TactileSensor,
    balance: BalanceSim<Estimator>,
    grasp: GraspSim,
    tick: u64,
    tilt: f64,
    tilt_target: f64,
    load: f64,
    controller: bool,
}

impl World {
    pub fn new(cfg: WorldConfig) -> Result<Self> {
        cfg.validate()?;
        let sensor = TactileSensor::new(&cfg.sim.sensor, cfg.pattern_seed)?;
        let balance = BalanceSim::new(
            cfg.sim.clone(),
            cfg.mode,
            sensor.clone(),
            cfg.estimator(),
            cfg.initial_tilt,
        )?;
        let grasp = GraspSim::new(cfg.grasp)?;
        Ok(Self {
            tilt: cfg.initial_tilt,
            tilt_target: cfg.initial_tilt,
            sensor,
            balance,
            grasp,
            tick: 0,
            load: 0.0,
            controller: true,
            cfg,
        })
    }

    pub fn dt(&self) -> f64 {
        self.cfg.sim.dt()
    }

    pub fn time(&self) -> f64 {
        self.tick as f64 * self.dt()
    }

    /// Applies a command before the next tick.
    pub fn apply(&mut self, cmd: &Command) -> Result<()> {
        match *cmd {
            Command::SetTilt(deg) => {
                if !(deg.abs() <= TILT_LIMIT) {
                    return Err(Error::InvalidArgument(format!(
                        "tilt {deg} outside ±{TILT_LIMIT} degrees"
                    )));
                }
                self.tilt_target = deg;
            }
            Command::LoadWeight(kg) => {
                if !(kg.is_finite() && kg >= 0.0) {
                    return Err(Error::InvalidArgument(format!(
                        "load must be a non-negative mass, got {kg}"
                    )));
                }
                self.load = kg;
            }
            Command::SetMode(m) => self.balance.set_mode(m),
            Command::Controller(s) => self.controller = s == Switch::On,
            Command::Reset => {
                let mode = self.balance.mode();
                self.balance = BalanceSim::new(
                    self.cfg.sim.clone(),
                    mode,
                    self.sensor.clone(),
                    self.cfg.estimator(),
                    self.cfg.initial_tilt,
                )?;
                self.grasp.reset();
                self.tilt = self.cfg.initial_tilt;
                self.tilt_target = self.cfg.initial_tilt;
                self.load = 0.0;
                self.controller = true;
            }
        }
        Ok(())
    }

    /// Advances both rigs by one control period.
    pub fn step(&mut self) -> Result<StateFrame> {
        let t = self.time();
        let max_step = self.cfg.tilt_slew * self.dt();
        self.tilt += (self.tilt_target - self.tilt).clamp(-max_step, max_step);
        let sample = ProfileSample {
            theta_g: self.tilt,
            leg_cmd: LegCmd::Controlled,
            contact: true,
        };
        let (row, flow) = self.balance.step_with_flow(t, sample)?;
        let g = self.grasp.step(self.load, self.controller)?;
        self.tick += 1;
        let flow_thumb = match flow {
            Some(f) => {
                let d = f.downsample(THUMB_WIDTH, THUMB_HEIGHT)?;
                Some(FlowThumb {
                    width: THUMB_WIDTH,
                    height: THUMB_HEIGHT,
                    data: d.vectors().to_vec(),
                })
            }
            None => None,
        };
        Ok(StateFrame {
            t,
            theta_g: row.theta_g_true,
            theta_g_target: self.tilt_target,
            theta_f_true: row.theta_f_true,
            theta_f_hat: row.theta_f_hat,
            theta_g_hat: row.theta_g_hat,
            phi_ctrl: row.phi_ctrl,
            phi_ref: row.phi_ref,
            duty: row.duty,
            contact: row.contact,
            mode: row.mode,
            stable: row.stable,
            grasp: GraspState {
                ratios: [g.ratio_l, g.ratio_r],
                phases: [
                    g.phase_l.map(|p| p.as_str().to_string()),
                    g.phase_r.map(|p| p.as_str().to_string()),
                ],
                d_g: g.opening,
                intact: g.intact,
                load: self.load,
                controller: self.controller,
            },
            flow_thumb,
        })
    }
}
