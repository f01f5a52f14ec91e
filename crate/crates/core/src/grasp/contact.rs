use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Normal forces at or below this are treated as no contact, N.
pub const FN_EPS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContactWrench {
    /// Force in the sensor frame, N: tangential components x, y; normal z.
    pub f: [f64; 3],
}

impl ContactWrench {
    pub fn new(f: [f64; 3]) -> Self {
        Self { f }
    }

    /// Pure tangential plus normal load.
    pub fn from_components(f_t: f64, f_n: f64) -> Self {
        Self { f: [f_t, 0.0, f_n] }
    }

    pub fn f_n(&self) -> f64 {
        self.f[2].max(0.0)
    }

    pub fn f_t(&self) -> f64 {
        self.f[0].hypot(self.f[1])
    }

    /// `f_t / f_n`, `None` without normal load.
    pub fn ratio(&self) -> Option<f64> {
        let n = self.f_n();
        (n > FN_EPS).then(|| self.f_t() / n)
    }

    pub fn ratio_or_broken(&self) -> Result<f64> {
        self.ratio().ok_or(Error::ContactBroken {
            normal_force: self.f_n(),
        })
    }
}

/// Load-dependent friction, affine in the normal force.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FrictionModel {
    pub mu_static_0: f64,
    /// 1/N.
    pub mu_slope: f64,
    pub mu_kinetic_ratio: f64,
}

impl Default for FrictionModel {
    fn default() -> Self {
        Self {
            mu_static_0: 1.1,
            mu_slope: -0.025,
            mu_kinetic_ratio: 0.8,
        }
    }
}

impl FrictionModel {
    pub fn validate(&self, fn_max: f64) -> Result<()> {
        if !(self.mu_kinetic_ratio > 0.0 && self.mu_kinetic_ratio < 1.0) {
            return Err(Error::InvalidArgument("mu_kinetic_ratio must lie in (0, 1)".into()));
        }
        if !(self.mu_static(0.0) > 0.0 && self.mu_static(fn_max) > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "static friction must stay positive on [0, {fn_max}] N"
            )));
        }
        Ok(())
    }

    pub fn mu_static(&self, f_n: f64) -> f64 {
        self.mu_static_0 + self.mu_slope * f_n
    }

    pub fn mu_kinetic(&self, f_n: f64) -> f64 {
        self.mu_kinetic_ratio * self.mu_static(f_n)
    }
}

/// Mean static friction over `[lo, hi]` N.
pub fn nominal_mu(model: &FrictionModel, fn_range: [f64; 2]) -> Result<f64> {
    let [lo, hi] = fn_range;
    if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
        return Err(Error::InvalidArgument(format!("empty normal force range [{lo}, {hi}]")));
    }
    Ok(model.mu_static(0.5 * (lo + hi)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContactPhase {
    Stable,
    Incipient,
    Slipping,
    Recovery,
}

impl ContactPhase {
    pub const ALL: [ContactPhase; 4] = [
        ContactPhase::Stable,
        ContactPhase::Incipient,
        ContactPhase::Slipping,
        ContactPhase::Recovery,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ContactPhase::Stable => "stable",
            ContactPhase::Incipient => "incipient",
            ContactPhase::Slipping => "slipping",
            ContactPhase::Recovery => "recovery",
        }
    }
}

/// Friction-cone band around `mu`: `[mu − d/2, mu + d/2]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub mu: f64,
    pub d: f64,
}

impl Band {
    pub fn lower(&self) -> f64 {
        self.mu - 0.5 * self.d
    }

    pub fn upper(&self) -> f64 {
        self.mu + 0.5 * self.d
    }
}

/// Hysteresis phase classifier. `slip_rate` is the ratio drop rate, 1/s,
/// that marks slip when the ratio leaves the incipient band downwards.
pub fn classify_phase(
    prev: ContactPhase,
    ratio: f64,
    dratio_dt: f64,
    band: Band,
    slip_rate: f64,
) -> Result<ContactPhase> {
    if !ratio.is_finite() {
        return Err(Error::ContactBroken { normal_force: 0.0 });
    }
    if !(band.d > 0.0) {
        return Err(Error::InvalidArgument("band width d must be > 0".into()));
    }
    use ContactPhase::*;
    let (lo, hi) = (band.lower(), band.upper());
    Ok(if ratio > hi {
        Slipping
    } else {
        match prev {
            Slipping => Recovery,
            Recovery if ratio >= lo => Recovery,
            Incipient if ratio < lo && dratio_dt < -slip_rate => Slipping,
            _ if ratio >= lo => Incipient,
            _ => Stable,
        }
    })
}

/// One controller tick: close by 1 mm when both ratios are above the band,
/// open by 1 mm when both are below it, else hold. Clamped to `range`.
pub fn grip_controller_step(
    left: &ContactWrench,
    right: &ContactWrench,
    opening: f64,
    band: Band,
    range: [f64; 2],
) -> Result<f64> {
    let rl = left.ratio_or_broken()?;
    let rr = right.ratio_or_broken()?;
    let next = if rl > band.upper() && rr > band.upper() {
        opening - 1.0
    } else if rl < band.lower() && rr < band.lower() {
        opening + 1.0
    } else {
        opening
    };
    Ok(next.clamp(range[0], range[1]))
}
