//! Scenario configuration, the fixed-step closed-loop executor and trace
//! recording.

pub mod config;
pub mod engine;
pub mod trace;

pub use config::{
    apply_override, ControlSection, DisturbanceConfig, EventConfig, LoopTuning, NoiseConfig,
    PlantConfig, ScenarioConfig, WindConfig,
};
pub use engine::{apply_event, rk4_step, run};
pub use trace::{ChannelUnit, ScenarioTrace};
