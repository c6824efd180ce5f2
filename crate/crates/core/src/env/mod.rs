//! Flow environments seen by the agent.

pub mod backend;
pub mod cfd_backend;
pub mod dataset;
pub mod environment;
pub mod motion;
pub mod surrogate;

pub use backend::{FlowBackend, Observation, N_SENSORS, X_AGENT, X_OBSTACLE};
pub use cfd_backend::{CfdBackend, CfdParams};
pub use dataset::{Dataset, DatasetRecord};
pub use environment::{
    ActionCommand, BackendKind, EnvConfig, Environment, StepInfo, StepOutcome, SAMPLE_DT, WINDOW,
};
pub use motion::{make_motion, Lateral, MotionKind, Trajectory};
pub use surrogate::{SurrogateBackend, SurrogateParams};
