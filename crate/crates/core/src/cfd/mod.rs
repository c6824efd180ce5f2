//! Two-dimensional incompressible flow past immersed cylinders.
//!
//! Staggered-grid projection method: Adams-Bashforth advection and
//! diffusion, direct-forcing immersed boundaries with a three-point
//! regularized delta, and a multigrid pressure solve.

pub mod export;
pub mod grid;
pub mod ib;
pub mod kinematics;
pub mod multigrid;
pub mod solver;
pub mod strouhal;
pub mod validation;

pub use grid::{Boundary, FlowState, Grid};
pub use kinematics::{set_body_motion, BodyState, MoveProfile};
pub use solver::{sensor_position, FluidParams, ForceSample, Solver, SolverConfig, StepReport};
pub use strouhal::{dominant_frequency, strouhal};
