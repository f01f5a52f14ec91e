use serde::{Deserialize, Serialize};

use crate::{deg2rad, DisplacementField, Error, LegGeometry, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ControllerGains {
    pub k0: f64,
    /// Degrees per duty unit.
    pub k1: f64,
    /// Seconds.
    pub k2: f64,
    pub k3: f64,
    pub pwm_hz: f64,
}

impl Default for ControllerGains {
    fn default() -> Self {
        Self {
            k0: 0.01,
            k1: 28.8,
            k2: 0.03,
            k3: 2.5,
            pwm_hz: 50.0,
        }
    }
}

impl ControllerGains {
    pub fn validate(&self) -> Result<()> {
        if self.k1 == 0.0 || self.k0 == 0.0 || !self.k1.is_finite() || !self.k0.is_finite() {
            return Err(Error::InvalidArgument("gains need finite, nonzero K0 and K1".into()));
        }
        if !(self.pwm_hz > 0.0) {
            return Err(Error::InvalidArgument("pwm_hz must be > 0".into()));
        }
        Ok(())
    }

    /// Duty at which the servo reaches `angle` with zero rate: the inverse of
    /// [`duty_cycle`].
    pub fn duty_for_angle(&self, angle: f64) -> f64 {
        self.k0 * (angle / self.k1 + self.k3)
    }

    /// Servo angle commanded by `duty`: the affine inverse of [`duty_cycle`] at
    /// zero rate, so duty 0.025 maps to 0° and 0.0875 to 180° with the
    /// default gains.
    pub fn angle_for_duty(&self, duty: f64) -> f64 {
        self.k1 * (duty / self.k0 - self.k3)
    }
}

/// Desired motor angle, degrees:
/// `φ = arccos(l·cos(θ̂_g − θ̂_f) / L) + 90° − θ̂_g`.
pub fn control_angle(theta_g_hat: f64, theta_f_hat: f64, geom: &LegGeometry) -> Result<f64> {
    let (l, big_l) = (geom.shaft_offset, geom.leg_length);
    let ratio = l * deg2rad(theta_g_hat - theta_f_hat).cos() / big_l;
    if !(-1.0..=1.0).contains(&ratio) {
        return Err(Error::ControlDomain {
            ratio,
            theta_g: theta_g_hat,
            theta_f: theta_f_hat,
            offset: l,
            length: big_l,
        });
    }
    Ok(ratio.acos().to_degrees() + 90.0 - theta_g_hat)
}

/// PWM duty `D = K0·(φ/K1 − K2·dφ/dt + K3)`, clamped to [0, 1]. Non-finite
/// results map to 0.
pub fn duty_cycle(phi_ctrl: f64, dphi_dt: f64, gains: &ControllerGains) -> f64 {
    let d = gains.k0 * (phi_ctrl / gains.k1 - gains.k2 * dphi_dt + gains.k3);
    if d.is_nan() {
        0.0
    } else {
        d.clamp(0.0, 1.0)
    }
}

/// True iff the mean displacement magnitude reaches `threshold_px`.
pub fn contact_detect(field: &DisplacementField, threshold_px: f64) -> bool {
    field.mean_magnitude() >= threshold_px
}

/// Backward-difference rate of a 3-sample running median.
#[derive(Debug, Clone, Default)]
pub struct RateEstimator {
    raw: [f64; 3],
    len: usize,
    prev: Option<f64>,
}

impl RateEstimator {
    pub fn reset(&mut self) {
        *self = Self::default();
    }

    /// Feeds one sample taken `dt` seconds after the previous one.
    pub fn update(&mut self, value: f64, dt: f64) -> f64 {
        self.raw.rotate_right(1);
        self.raw[0] = value;
        self.len = (self.len + 1).min(3);
        let filtered = match self.len {
            1 => self.raw[0],
            2 => 0.5 * (self.raw[0] + self.raw[1]),
            _ => {
                let mut s = self.raw;
                s.sort_by(f64::total_cmp);
                s[1]
            }
        };
        let rate = self.prev.map_or(0.0, |p| (filtered - p) / dt);
        self.prev = Some(filtered);
        rate
    }
}
