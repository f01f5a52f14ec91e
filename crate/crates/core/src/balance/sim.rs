use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::control::{contact_detect, control_angle, duty_cycle, ControllerGains, RateEstimator};
use super::plant::{leg_angle, servo_for_leg_angle, PlantParams, Servo, TipMonitor};
use super::profile::{LegCmd, Profile, ProfileSample};
use crate::harness::{DatasetConfig, TactileSensor};
use crate::posenet::PoseModel;
use crate::skin_sim::foot_tilt;
use crate::{mix_seed, DisplacementField, Error, Result, ScenarioState};

/// Which signal closes the balance loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SensorMode {
    /// Skin flow through the pose estimator, gated on detected contact.
    Tactile,
    /// Foot-mounted IMU: foot tilt stands in for both angles, no gating.
    ImuFoot,
    /// Leg-mounted IMU holding the leg at an absolute inclination.
    ImuLeg,
}

impl SensorMode {
    pub const ALL: [SensorMode; 3] = [SensorMode::Tactile, SensorMode::ImuFoot, SensorMode::ImuLeg];

    pub fn as_str(self) -> &'static str {
        match self {
            SensorMode::Tactile => "tactile",
            SensorMode::ImuFoot => "imu_foot",
            SensorMode::ImuLeg => "imu_leg",
        }
    }
}

impl fmt::Display for SensorMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SensorMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown sensor mode {s:?} (tactile, imu_foot, imu_leg)")))
    }
}

/// Pose estimate `(theta_f_hat, theta_g_hat)` from a full-resolution flow.
pub trait PoseEstimator {
    fn estimate(&mut self, flow: &DisplacementField, truth: &ScenarioState) -> Result<(f64, f64)>;
}

/// Pose network on the pooled flow.
#[derive(Debug, Clone)]
pub struct NetEstimator {
    model: PoseModel,
}

impl NetEstimator {
    pub fn new(model: PoseModel) -> Self {
        Self { model }
    }

    pub fn model(&self) -> &PoseModel {
        &self.model
    }
}

impl PoseEstimator for NetEstimator {
    fn estimate(&mut self, flow: &DisplacementField, _truth: &ScenarioState) -> Result<(f64, f64)> {
        let input = &self.model.spec().input;
        let pooled = flow.downsample(input.width, input.height)?;
        self.model.predict(&pooled)
    }
}

/// Oracle estimator: true angles plus optional uniform error.
#[derive(Debug, Clone)]
pub struct TruthEstimator {
    noise: f64,
    rng: ChaCha8Rng,
}

impl TruthEstimator {
    pub fn new(noise_deg: f64, seed: u64) -> Self {
        Self {
            noise: noise_deg.abs(),
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn exact() -> Self {
        Self::new(0.0, 0)
    }

    fn jitter(&mut self) -> f64 {
        if self.noise > 0.0 {
            self.rng.random_range(-self.noise..=self.noise)
        } else {
            0.0
        }
    }
}

impl PoseEstimator for TruthEstimator {
    fn estimate(&mut self, _flow: &DisplacementField, truth: &ScenarioState) -> Result<(f64, f64)> {
        let f = truth.theta_f + self.jitter();
        let g = truth.theta_g + self.jitter();
        Ok((f, g))
    }
}

impl<E: PoseEstimator + ?Sized> PoseEstimator for Box<E> {
    fn estimate(&mut self, flow: &DisplacementField, truth: &ScenarioState) -> Result<(f64, f64)> {
        (**self).estimate(flow, truth)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub gains: ControllerGains,
    pub plant: PlantParams,
    /// Camera, skin, flow and leg geometry of the simulated foot.
    pub sensor: DatasetConfig,
    /// Contact threshold on mean flow magnitude, px; defaults to three skin
    /// noise sigmas.
    pub contact_threshold: Option<f64>,
    /// Uniform IMU error bound, degrees.
    pub imu_noise: f64,
    /// Integral gain of the leg-inclination hold, 1/s.
    pub leg_hold_gain: f64,
    /// Leg inclination held by the leg IMU mode, degrees.
    pub leg_setpoint: f64,
    /// Servo angle at t = 0; defaults to balanced on the initial plate.
    pub initial_servo: Option<f64>,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            gains: ControllerGains::default(),
            plant: PlantParams::default(),
            sensor: DatasetConfig::ci(),
            contact_threshold: None,
            imu_noise: 0.2,
            leg_hold_gain: 1.0,
            leg_setpoint: 0.0,
            initial_servo: None,
            seed: 0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        self.gains.validate()?;
        self.plant.validate()?;
        self.sensor.validate()?;
        if !(self.imu_noise >= 0.0) || !(self.leg_hold_gain >= 0.0) {
            return Err(Error::InvalidArgument(
                "imu_noise and leg_hold_gain must be >= 0".into(),
            ));
        }
        Ok(())
    }

    pub fn threshold(&self) -> f64 {
        self.contact_threshold
            .unwrap_or_else(|| self.sensor.skin.contact_threshold())
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.gains.pwm_hz
    }
}

/// One control tick.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub t: f64,
    pub theta_g_true: f64,
    pub theta_f_true: f64,
    pub theta_g_hat: Option<f64>,
    pub theta_f_hat: Option<f64>,
    /// Latest commanded motor angle (held while not actuating).
    pub phi_ctrl: f64,
    /// Motor angle commanded from the true angles.
    pub phi_ref: f64,
    pub duty: f64,
    /// True foot/ground contact.
    pub contact: bool,
    pub mode: SensorMode,
    /// Servo angle at the start of the tick.
    pub phi_motor: f64,
    pub theta_leg: f64,
    /// Leg inclination from vertical.
    pub leg_incl: f64,
    /// Whether the controller produced a fresh command this tick.
    pub actuated: bool,
    /// Whether the servo target was clipped at a travel limit.
    pub saturated: bool,
    pub stable: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ControlTrace {
    pub rows: Vec<TraceRow>,
}

pub const TRACE_HEADER: &str =
    "t,theta_g_true,theta_f_true,theta_g_hat,theta_f_hat,phi_ctrl,phi_ref,duty,contact,mode,\
phi_motor,theta_leg,leg_incl,actuated,saturated,stable";

impl ControlTrace {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// RMSE of `phi_ctrl − phi_ref` over rows in contact.
    pub fn tracking_rmse(&self) -> Option<f64> {
        let errs: Vec<f64> = self
            .rows
            .iter()
            .filter(|r| r.contact)
            .map(|r| r.phi_ctrl - r.phi_ref)
            .collect();
        if errs.is_empty() {
            return None;
        }
        Some((errs.iter().map(|e| e * e).sum::<f64>() / errs.len() as f64).sqrt())
    }

    pub fn final_tracking_error(&self) -> Option<f64> {
        self.rows.last().map(|r| (r.phi_ctrl - r.phi_ref).abs())
    }

    /// Duty is identical through every run of non-contact rows, and equal to
    /// the duty of the row before the run.
    pub fn duty_held_without_contact(&self) -> bool {
        let rows = &self.rows;
        let mut i = 0;
        while i < rows.len() {
            if rows[i].contact {
                i += 1;
                continue;
            }
            let held = if i > 0 { rows[i - 1].duty } else { rows[i].duty };
            while i < rows.len() && !rows[i].contact {
                if rows[i].duty != held {
                    return false;
                }
                i += 1;
            }
        }
        true
    }

    /// Some row off the ground has the servo target clipped at a travel limit.
    pub fn saturated_while_lifted(&self) -> bool {
        self.rows.iter().any(|r| !r.contact && r.saturated)
    }

    /// Time of the first row flagged unstable.
    pub fn lost_stance_at(&self) -> Option<f64> {
        self.rows.iter().find(|r| !r.stable).map(|r| r.t)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{TRACE_HEADER}")?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                r.t,
                r.theta_g_true,
                r.theta_f_true,
                opt(r.theta_g_hat),
                opt(r.theta_f_hat),
                r.phi_ctrl,
                r.phi_ref,
                r.duty,
                r.contact as u8,
                r.mode,
                r.phi_motor,
                r.theta_leg,
                r.leg_incl,
                r.actuated as u8,
                r.saturated as u8,
                r.stable as u8,
            )?;
        }
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(f))
            .map_err(|e| Error::io(path, e))
    }
}

/// Closed-loop leg, stepped one control tick at a time.
pub struct BalanceSim<E> {
    cfg: SimConfig,
    mode: SensorMode,
    sensor: TactileSensor,
    estimator: E,
    servo: Servo,
    rate: RateEstimator,
    tip: TipMonitor,
    imu_rng: ChaCha8Rng,
    tick: u64,
    duty: f64,
    phi_ctrl: f64,
    leg_cmd: f64,
    was_actuating: bool,
}

impl<E: PoseEstimator> BalanceSim<E> {
    /// `theta_g0` is the plate tilt used to place the servo when no initial
    /// angle is configured.
    pub fn new(cfg: SimConfig, mode: SensorMode, sensor: TactileSensor, estimator: E, theta_g0: f64) -> Result<Self> {
        cfg.validate()?;
        let geom = &cfg.sensor.geometry;
        let servo0 = cfg
            .initial_servo
            .unwrap_or_else(|| servo_for_leg_angle(90.0 - theta_g0, geom));
        let servo = Servo::new(servo0, cfg.plant);
        let duty = cfg.gains.duty_for_angle(servo.angle());
        Ok(Self {
            mode,
            sensor,
            estimator,
            phi_ctrl: servo.angle(),
            leg_cmd: servo.angle(),
            servo,
            rate: RateEstimator::default(),
            tip: TipMonitor::new(cfg.plant),
            imu_rng: ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, 2)),
            tick: 0,
            duty,
            was_actuating: false,
            cfg,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn mode(&self) -> SensorMode {
        self.mode
    }

    pub fn set_mode(&mut self, mode: SensorMode) {
        if mode != self.mode {
            self.mode = mode;
            self.rate.reset();
            self.leg_cmd = self.servo.angle();
            self.was_actuating = false;
        }
    }

    pub fn sensor(&self) -> &TactileSensor {
        &self.sensor
    }

    pub fn estimator_mut(&mut self) -> &mut E {
        &mut self.estimator
    }

    pub fn servo_angle(&self) -> f64 {
        self.servo.angle()
    }

    pub fn stable(&self) -> bool {
        self.tip.stable()
    }

    /// Kinematic state of the leg on `sample`'s plate at the current servo
    /// angle, and the leg inclination from vertical.
    pub fn state_at(&self, t: f64, sample: &ProfileSample) -> (ScenarioState, f64) {
        let geom = &self.cfg.sensor.geometry;
        let theta_leg = leg_angle(self.servo.angle(), geom);
        let (theta_f, incl) = if sample.contact {
            let f = foot_tilt(sample.theta_g, theta_leg, geom, &self.cfg.sensor.skin);
            (f, f + theta_leg - 90.0)
        } else {
            let incl = self.cfg.plant.lift_inclination;
            (incl + 90.0 - theta_leg, incl)
        };
        let state = ScenarioState {
            theta_g: sample.theta_g,
            theta_leg,
            theta_f,
            contact: sample.contact,
            t,
        };
        (state, incl)
    }

    fn imu_error(&mut self) -> f64 {
        let n = self.cfg.imu_noise;
        if n > 0.0 {
            self.imu_rng.random_range(-n..=n)
        } else {
            0.0
        }
    }

    /// Advances one tick at time `t`, returning the logged row and the flow
    /// seen by the skin (tactile mode only).
    pub fn step_with_flow(&mut self, t: f64, sample: ProfileSample) -> Result<(TraceRow, Option<DisplacementField>)> {
        let geom = self.cfg.sensor.geometry;
        let dt = self.cfg.dt();
        if let LegCmd::Fixed(a) = sample.leg_cmd {
            self.servo.set(servo_for_leg_angle(a, &geom));
        }
        let phi_motor = self.servo.angle();
        let (state, incl) = self.state_at(t, &sample);

        let mut hats = (None, None);
        let mut flow = None;
        let command = match self.mode {
            SensorMode::Tactile => {
                let f = self.sensor.sense(&state, mix_seed(self.cfg.seed, self.tick))?;
                let touching = contact_detect(&f, self.cfg.threshold());
                let cmd = if touching {
                    let (tf, tg) = self.estimator.estimate(&f, &state)?;
                    hats = (Some(tg), Some(tf));
                    Some(control_angle(tg, tf, &geom)?)
                } else {
                    None
                };
                flow = Some(f);
                cmd
            }
            SensorMode::ImuFoot => {
                let tf = state.theta_f + self.imu_error();
                hats = (Some(tf), Some(tf));
                Some(control_angle(tf, tf, &geom)?)
            }
            SensorMode::ImuLeg => {
                let measured = incl + self.imu_error();
                let p = &self.cfg.plant;
                self.leg_cmd = (self.leg_cmd + self.cfg.leg_hold_gain * dt * (self.cfg.leg_setpoint - measured))
                    .clamp(p.travel_min, p.travel_max);
                Some(self.leg_cmd)
            }
        };
        let actuated = command.is_some();
        if let Some(phi) = command {
            if !self.was_actuating {
                self.rate.reset();
            }
            let dphi = self.rate.update(phi, dt);
            self.phi_ctrl = phi;
            self.duty = duty_cycle(phi, dphi, &self.cfg.gains);
        }
        self.was_actuating = actuated;

        let saturated = match sample.leg_cmd {
            LegCmd::Controlled => self.servo.step(self.cfg.gains.angle_for_duty(self.duty), dt),
            LegCmd::Fixed(_) => false,
        };
        let phi_ref = control_angle(state.theta_g, state.theta_f, &geom)?;
        let stable = self.tip.update(t, incl, sample.contact);
        self.tick += 1;
        let row = TraceRow {
            t,
            theta_g_true: state.theta_g,
            theta_f_true: state.theta_f,
            theta_g_hat: hats.0,
            theta_f_hat: hats.1,
            phi_ctrl: self.phi_ctrl,
            phi_ref,
            duty: self.duty,
            contact: sample.contact,
            mode: self.mode,
            phi_motor,
            theta_leg: state.theta_leg,
            leg_incl: incl,
            actuated,
            saturated,
            stable,
        };
        Ok((row, flow))
    }

    pub fn step(&mut self, t: f64, sample: ProfileSample) -> Result<TraceRow> {
        self.step_with_flow(t, sample).map(|(row, _)| row)
    }
}

/// Runs `profile` at the control rate from t = 0 to its last keyframe.
pub fn run_scenario<E: PoseEstimator>(
    profile: &Profile,
    mode: SensorMode,
    cfg: &SimConfig,
    sensor: TactileSensor,
    estimator: E,
) -> Result<ControlTrace> {
    cfg.validate()?;
    let Some(first) = profile.sample(0.0) else {
        return Ok(ControlTrace::default());
    };
    let mut sim = BalanceSim::new(cfg.clone(), mode, sensor, estimator, first.theta_g)?;
    let dt = cfg.dt();
    let ticks = (profile.duration() / dt + 1e-9).floor() as u64 + 1;
    let mut trace = ControlTrace {
        rows: Vec::with_capacity(ticks as usize),
    };
    for k in 0..ticks {
        let t = k as f64 * dt;
        let sample = profile.sample(t).expect("non-empty profile");
        trace.rows.push(sim.step(t, sample)?);
    }
    Ok(trace)
}
