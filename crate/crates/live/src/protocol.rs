//! JSON messages exchanged over `/ws`.

use serde::{Deserialize, Serialize};
use tacfoot_core::balance::SensorMode;

/// Client to server. Each message is a single-key object such as
/// `{"set_tilt": 9}`; `reset` may also be sent as the bare string `"reset"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Command {
    /// Target plate tilt, degrees. Reached at the configured slew rate.
    SetTilt(f64),
    /// Mass hung from the grasped object, kg.
    LoadWeight(f64),
    SetMode(SensorMode),
    Controller(Switch),
    Reset,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Switch {
    On,
    Off,
}

impl Command {
    pub fn parse(text: &str) -> Result<Self, String> {
        serde_json::from_str(text).map_err(|e| format!("malformed command: {e}"))
    }

    pub fn name(&self) -> &'static str {
        match self {
            Command::SetTilt(_) => "set_tilt",
            Command::LoadWeight(_) => "load_weight",
            Command::SetMode(_) => "set_mode",
            Command::Controller(_) => "controller",
            Command::Reset => "reset",
        }
    }
}

/// Server to client.
#[allow(clippy::large_enum_variant)]
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMsg {
    Frame(StateFrame),
    /// A command was applied at sim time `t`.
    Ack {
        command: String,
        t: f64,
    },
    Error {
        message: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraspState {
    pub ratios: [Option<f64>; 2],
    /// `stable`, `incipient`, `slipping`, `recovery`, or null once contact is lost.
    pub phases: [Option<String>; 2],
    #[serde(rename = "D_g")]
    pub d_g: f64,
    pub intact: bool,
    pub load: f64,
    pub controller: bool,
}

/// Downsampled displacement field, row-major `[u, v]` pairs in pixels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowThumb {
    pub width: usize,
    pub height: usize,
    pub data: Vec<[f32; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateFrame {
    pub t: f64,
    pub theta_g: f64,
    pub theta_g_target: f64,
    pub theta_f_true: f64,
    pub theta_f_hat: Option<f64>,
    pub theta_g_hat: Option<f64>,
    pub phi_ctrl: f64,
    pub phi_ref: f64,
    pub duty: f64,
    pub contact: bool,
    pub mode: SensorMode,
    pub stable: bool,
    pub grasp: GraspState,
    /// Null when the current mode does not sense the skin.
    pub flow_thumb: Option<FlowThumb>,
}
