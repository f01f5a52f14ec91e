use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Leg angle command at a keyframe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LegCmdRepr", into = "LegCmdRepr")]
pub enum LegCmd {
    /// Leg forced to this motor angle, degrees.
    Fixed(f64),
    /// Leg driven by the balance controller.
    Controlled,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum LegCmdRepr {
    Angle(f64),
    Tag(String),
}

impl TryFrom<LegCmdRepr> for LegCmd {
    type Error = String;
    fn try_from(r: LegCmdRepr) -> std::result::Result<Self, String> {
        match r {
            LegCmdRepr::Angle(a) => Ok(LegCmd::Fixed(a)),
            LegCmdRepr::Tag(s) if s == "controlled" => Ok(LegCmd::Controlled),
            LegCmdRepr::Tag(s) => Err(format!("theta_leg_cmd must be a number or \"controlled\", got {s:?}")),
        }
    }
}

impl From<LegCmd> for LegCmdRepr {
    fn from(c: LegCmd) -> Self {
        match c {
            LegCmd::Fixed(a) => LegCmdRepr::Angle(a),
            LegCmd::Controlled => LegCmdRepr::Tag("controlled".into()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Keyframe {
    pub t: f64,
    pub theta_g: f64,
    pub theta_leg_cmd: LegCmd,
    pub contact: bool,
}

/// Scenario over time: ground tilt is interpolated linearly between
/// keyframes, leg command and contact hold from each keyframe to the next.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Profile {
    keyframes: Vec<Keyframe>,
}

/// Profile values at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileSample {
    pub theta_g: f64,
    pub leg_cmd: LegCmd,
    pub contact: bool,
}

impl Profile {
    pub fn new(keyframes: Vec<Keyframe>) -> Result<Self> {
        for k in &keyframes {
            if !k.t.is_finite() || !k.theta_g.is_finite() {
                return Err(Error::InvalidArgument("profile values must be finite".into()));
            }
        }
        if keyframes.windows(2).any(|w| w[1].t < w[0].t) {
            return Err(Error::InvalidArgument(
                "profile keyframe times must be non-decreasing".into(),
            ));
        }
        if keyframes.first().is_some_and(|k| k.t < 0.0) {
            return Err(Error::InvalidArgument("profile starts before t = 0".into()));
        }
        Ok(Self { keyframes })
    }

    pub fn keyframes(&self) -> &[Keyframe] {
        &self.keyframes
    }

    pub fn is_empty(&self) -> bool {
        self.keyframes.is_empty()
    }

    /// Time of the last keyframe, 0 for an empty profile.
    pub fn duration(&self) -> f64 {
        self.keyframes.last().map_or(0.0, |k| k.t)
    }

    pub fn sample(&self, t: f64) -> Option<ProfileSample> {
        let ks = &self.keyframes;
        let first = ks.first()?;
        let i = ks.partition_point(|k| k.t <= t);
        if i == 0 {
            return Some(ProfileSample {
                theta_g: first.theta_g,
                leg_cmd: first.theta_leg_cmd,
                contact: first.contact,
            });
        }
        let a = &ks[i - 1];
        let theta_g = match ks.get(i) {
            Some(b) if b.t > a.t => a.theta_g + (b.theta_g - a.theta_g) * (t - a.t) / (b.t - a.t),
            _ => a.theta_g,
        };
        Some(ProfileSample {
            theta_g,
            leg_cmd: a.theta_leg_cmd,
            contact: a.contact,
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let keyframes: Vec<Keyframe> = serde_json::from_str(text).map_err(|e| Error::ProfileParse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        Self::new(keyframes)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.keyframes).expect("keyframes serialize")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    /// Standing on a level plate for `duration` seconds.
    pub fn flat(duration: f64) -> Self {
        let k = |t| Keyframe {
            t,
            theta_g: 0.0,
            theta_leg_cmd: LegCmd::Controlled,
            contact: true,
        };
        Self {
            keyframes: vec![k(0.0), k(duration)],
        }
    }

    /// Level, +9°, level, −9.5°, level; 2 s ramps and 3 s holds (23 s).
    pub fn four_stage() -> Self {
        let mut keyframes = Vec::new();
        let mut t = 0.0;
        let mut push = |t: f64, g: f64| {
            keyframes.push(Keyframe {
                t,
                theta_g: g,
                theta_leg_cmd: LegCmd::Controlled,
                contact: true,
            })
        };
        push(t, 0.0);
        t += 3.0;
        push(t, 0.0);
        for g in [9.0, 0.0, -9.5, 0.0] {
            t += 2.0;
            push(t, g);
            t += 3.0;
            push(t, g);
        }
        Self { keyframes }
    }

    /// Stand level for 3 s, lift the foot, tilt the plate to `new_tilt`
    /// between 4 and 6 s while lifted, put the foot back down at 8 s and
    /// stand until 12 s.
    pub fn lift_and_replace(new_tilt: f64) -> Self {
        let k = |t, theta_g, contact| Keyframe {
            t,
            theta_g,
            theta_leg_cmd: LegCmd::Controlled,
            contact,
        };
        Self {
            keyframes: vec![
                k(0.0, 0.0, true),
                k(3.0, 0.0, false),
                k(4.0, 0.0, false),
                k(6.0, new_tilt, false),
                k(8.0, new_tilt, true),
                k(12.0, new_tilt, true),
            ],
        }
    }

    /// Time of the first lift-off and of the first touch-down after it.
    pub fn lift_window(&self) -> Option<(f64, f64)> {
        let up = self.keyframes.iter().find(|k| !k.contact)?.t;
        let down = self.keyframes.iter().find(|k| k.t > up && k.contact)?.t;
        Some((up, down))
    }
}
