use serde::{Deserialize, Serialize};

use crate::{Error, LegGeometry, Result};

/// Servo and body model parameters. Angles in degrees, times in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlantParams {
    /// First-order servo lag.
    pub servo_tau: f64,
    pub travel_min: f64,
    pub travel_max: f64,
    /// Leg inclination from vertical while the foot is held off the ground.
    pub lift_inclination: f64,
    /// Leg inclination magnitude beyond which the body is tipping.
    pub tip_angle: f64,
    /// Time the tip angle must be exceeded on the ground before the stance
    /// is considered lost.
    pub tip_time: f64,
}

impl Default for PlantParams {
    fn default() -> Self {
        Self {
            servo_tau: 0.1,
            travel_min: 0.0,
            travel_max: 180.0,
            lift_inclination: -6.0,
            tip_angle: 8.0,
            tip_time: 0.3,
        }
    }
}

impl PlantParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.servo_tau >= 0.0) || !(self.travel_min < self.travel_max) || !(self.tip_time >= 0.0) {
            return Err(Error::InvalidArgument("bad plant parameters".into()));
        }
        Ok(())
    }
}

/// Servo angle at which the leg stands at right angles to the foot plate.
pub fn servo_offset(geom: &LegGeometry) -> f64 {
    (geom.shaft_offset / geom.leg_length).acos().to_degrees()
}

/// Motor angle between foot plate and leg for a servo position.
pub fn leg_angle(servo: f64, geom: &LegGeometry) -> f64 {
    servo - servo_offset(geom)
}

/// Inverse of [`leg_angle`].
pub fn servo_for_leg_angle(theta_leg: f64, geom: &LegGeometry) -> f64 {
    theta_leg + servo_offset(geom)
}

/// Position servo with first-order lag towards a clamped target.
#[derive(Debug, Clone)]
pub struct Servo {
    angle: f64,
    params: PlantParams,
}

impl Servo {
    pub fn new(angle: f64, params: PlantParams) -> Self {
        Self {
            angle: angle.clamp(params.travel_min, params.travel_max),
            params,
        }
    }

    pub fn angle(&self) -> f64 {
        self.angle
    }

    /// Forces the servo to `angle` (clamped to travel).
    pub fn set(&mut self, angle: f64) {
        self.angle = angle.clamp(self.params.travel_min, self.params.travel_max);
    }

    /// Moves towards `target` for `dt` seconds. Returns whether the target was
    /// clipped at a travel limit.
    pub fn step(&mut self, target: f64, dt: f64) -> bool {
        let clipped = target.clamp(self.params.travel_min, self.params.travel_max);
        let alpha = if self.params.servo_tau > 0.0 {
            1.0 - (-dt / self.params.servo_tau).exp()
        } else {
            1.0
        };
        self.angle += alpha * (clipped - self.angle);
        clipped != target
    }

    pub fn at_limit(&self) -> bool {
        self.angle <= self.params.travel_min + 1e-6 || self.angle >= self.params.travel_max - 1e-6
    }
}

/// Latches loss of stance once the leg stays beyond the tip angle on the
/// ground for the tip time.
#[derive(Debug, Clone)]
pub struct TipMonitor {
    params: PlantParams,
    over_since: Option<f64>,
    fell_at: Option<f64>,
}

impl TipMonitor {
    pub fn new(params: PlantParams) -> Self {
        Self {
            params,
            over_since: None,
            fell_at: None,
        }
    }

    pub fn update(&mut self, t: f64, inclination: f64, on_ground: bool) -> bool {
        if self.fell_at.is_some() {
            return false;
        }
        if on_ground && inclination.abs() > self.params.tip_angle {
            let since = *self.over_since.get_or_insert(t);
            if t - since >= self.params.tip_time - 1e-9 {
                self.fell_at = Some(t);
            }
        } else {
            self.over_since = None;
        }
        self.fell_at.is_none()
    }

    pub fn stable(&self) -> bool {
        self.fell_at.is_none()
    }

    pub fn fell_at(&self) -> Option<f64> {
        self.fell_at
    }
}
