//! Full Navier-Stokes backend: obstacle and agent as immersed cylinders.

use serde::{Deserialize, Serialize};

use super::backend::{FlowBackend, Observation, N_SENSORS, X_AGENT, X_OBSTACLE};
use super::motion::Lateral;
use crate::cfd::{BodyState, FluidParams, Grid, Solver, SolverConfig};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CfdParams {
    pub re: f64,
    pub cells_per_d: usize,
    pub lx: f64,
    pub ly: f64,
    /// Spin the obstacle briefly at start-up to trigger shedding.
    pub trip: bool,
}

impl Default for CfdParams {
    fn default() -> Self {
        Self {
            re: 100.0,
            cells_per_d: 24,
            lx: 24.0,
            ly: 12.0,
            trip: true,
        }
    }
}

impl CfdParams {
    pub fn validate(&self) -> Result<()> {
        if self.cells_per_d < 8 {
            return Err(Error::Config(format!(
                "cells_per_d {} is too coarse",
                self.cells_per_d
            )));
        }
        if self.lx < X_AGENT + 4.0 || self.ly < 2.0 * (1.0 + 0.5 + 4.0) {
            return Err(Error::Config(format!(
                "domain {} x {} leaves under 4 diameters of clearance",
                self.lx, self.ly
            )));
        }
        FluidParams::new(self.re).map(|_| ())
    }
}

pub struct CfdBackend {
    solver: Solver,
    trip: bool,
}

fn body(x: f64, s: Lateral) -> BodyState {
    BodyState {
        center: [x, s.y],
        velocity: [0.0, s.v],
        acceleration: [0.0, s.a],
        omega: 0.0,
    }
}

impl CfdBackend {
    pub fn new(params: &CfdParams, obstacle0: Lateral, agent0: Lateral) -> Result<Self> {
        params.validate()?;
        let grid = Grid::channel(params.lx, params.ly, params.cells_per_d, 1.0)?;
        let solver = Solver::new(
            grid,
            FluidParams::new(params.re)?,
            SolverConfig::default(),
            &[body(X_OBSTACLE, obstacle0), body(X_AGENT, agent0)],
        )?;
        Ok(Self {
            solver,
            trip: params.trip,
        })
    }

    pub fn solver(&self) -> &Solver {
        &self.solver
    }
}

impl FlowBackend for CfdBackend {
    fn name(&self) -> &'static str {
        "cfd"
    }

    fn time(&self) -> f64 {
        self.solver.time()
    }

    fn advance(
        &mut self,
        t: f64,
        obstacle: &mut dyn FnMut(f64) -> Lateral,
        agent: &mut dyn FnMut(f64) -> Lateral,
    ) -> Result<Observation> {
        let trip = self.trip;
        self.solver.advance_to(t, |t| {
            let mut o = body(X_OBSTACLE, obstacle(t));
            if trip && t < 2.0 {
                o.omega = 0.5 * (std::f64::consts::PI * t / 2.0).sin();
            }
            vec![o, body(X_AGENT, agent(t))]
        })?;
        let f = self.solver.compute_forces(1)?;
        Ok(Observation {
            t,
            pressure: self.solver.sample_surface_pressure(1, N_SENSORS)?,
            cd: f.cd,
            cl: f.cl,
        })
    }
}
