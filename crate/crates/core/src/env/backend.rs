//! The interface shared by the flow backends.

use super::motion::Lateral;
use crate::error::Result;

/// Number of pressure sensors on the agent.
pub const N_SENSORS: usize = 200;
/// Streamwise position of the obstacle center.
pub const X_OBSTACLE: f64 = 8.0;
/// Streamwise position of the agent center.
pub const X_AGENT: f64 = 14.0;

/// Agent-side measurements at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub t: f64,
    /// Pressure coefficients, sensor 0 facing upstream.
    pub pressure: Vec<f64>,
    pub cd: f64,
    pub cl: f64,
}

/// A source of agent observations driven by prescribed body motions.
pub trait FlowBackend: Send {
    fn name(&self) -> &'static str;

    fn time(&self) -> f64;

    /// Advance to time `t` and observe the agent there. `obstacle` and
    /// `agent` give the lateral kinematics of each body at any time in
    /// `[self.time(), t]`.
    fn advance(
        &mut self,
        t: f64,
        obstacle: &mut dyn FnMut(f64) -> Lateral,
        agent: &mut dyn FnMut(f64) -> Lateral,
    ) -> Result<Observation>;
}
