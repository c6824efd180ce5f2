//! Canonical flow cases used to check the solver against reference data.

use std::time::Instant;

use super::grid::Grid;
use super::kinematics::BodyState;
use super::solver::{FluidParams, ForceSample, Solver, SolverConfig};
use super::strouhal::strouhal;
use crate::error::{Error, Result};

/// Output sampling interval of the validation cases.
pub const SAMPLE_DT: f64 = 0.1;

/// Flow past a single cylinder, fixed or oscillating in line with the flow.
#[derive(Debug, Clone, PartialEq)]
pub struct CylinderCase {
    pub re: f64,
    pub cells_per_d: usize,
    pub lx: f64,
    pub ly: f64,
    pub x_body: f64,
    pub t_end: f64,
    /// Statistics ignore samples before this time.
    pub t_transient: f64,
    /// In-line oscillation `(amplitude, frequency)`.
    pub oscillation: Option<(f64, f64)>,
    /// Spin the cylinder briefly at start-up to break symmetry.
    pub trip: bool,
}

impl CylinderCase {
    pub fn fixed(re: f64, cells_per_d: usize) -> Self {
        Self {
            re,
            cells_per_d,
            lx: 24.0,
            ly: 12.0,
            x_body: 8.0,
            t_end: 250.0,
            t_transient: 70.0,
            oscillation: None,
            trip: true,
        }
    }

    pub fn body_state(&self, t: f64) -> BodyState {
        let mut s = BodyState::fixed(self.x_body, 0.0);
        if let Some((amp, f)) = self.oscillation {
            let w = 2.0 * std::f64::consts::PI * f;
            s.center[0] += amp * (w * t).sin();
            s.velocity[0] = amp * w * (w * t).cos();
            s.acceleration[0] = -amp * w * w * (w * t).sin();
        }
        if self.trip && t < 2.0 {
            s.omega = 0.5 * (std::f64::consts::PI * t / 2.0).sin();
        }
        s
    }

    pub fn solver(&self) -> Result<Solver> {
        let grid = Grid::channel(self.lx, self.ly, self.cells_per_d, 1.0)?;
        Solver::new(
            grid,
            FluidParams::new(self.re)?,
            SolverConfig::default(),
            &[self.body_state(0.0)],
        )
    }
}

#[derive(Debug, Clone)]
pub struct CylinderResult {
    pub history: Vec<ForceSample>,
    pub mean_cd: f64,
    pub max_cl: f64,
    pub strouhal: std::result::Result<f64, String>,
    pub max_courant: f64,
    pub max_divergence: f64,
    pub max_slip: f64,
    pub steps: usize,
    pub seconds: f64,
}

/// Run a cylinder case, sampling forces every [`SAMPLE_DT`].
pub fn run_cylinder(case: &CylinderCase) -> Result<CylinderResult> {
    let start = Instant::now();
    let mut solver = case.solver()?;
    let n = (case.t_end / SAMPLE_DT).round() as usize;
    let mut history = Vec::with_capacity(n);
    let (mut courant, mut div, mut slip) = (0.0f64, 0.0f64, 0.0f64);
    for k in 1..=n {
        let t = k as f64 * SAMPLE_DT;
        let r = solver.advance_to(t, |t| vec![case.body_state(t)])?;
        courant = courant.max(r.courant);
        div = div.max(r.divergence);
        slip = slip.max(r.slip);
        history.push(solver.compute_forces(0)?);
    }
    let tail: Vec<&ForceSample> = history.iter().filter(|f| f.t >= case.t_transient).collect();
    if tail.is_empty() {
        return Err(Error::config("transient cut leaves no samples"));
    }
    let mean_cd = tail.iter().map(|f| f.cd).sum::<f64>() / tail.len() as f64;
    let max_cl = tail.iter().map(|f| f.cl).fold(f64::MIN, f64::max);
    let lift: Vec<f64> = tail.iter().map(|f| f.cl).collect();
    Ok(CylinderResult {
        strouhal: strouhal(&lift, SAMPLE_DT).map_err(|e| e.to_string()),
        history,
        mean_cd,
        max_cl,
        max_courant: courant,
        max_divergence: div,
        max_slip: slip,
        steps: solver.steps(),
        seconds: start.elapsed().as_secs_f64(),
    })
}

#[derive(Debug, Clone, Copy)]
pub struct TaylorGreenResult {
    /// Relative deviation of kinetic energy from `E0 exp(-4 nu t)`.
    pub energy_error: f64,
    /// Max-norm velocity error against the analytic field.
    pub velocity_error: f64,
    pub max_divergence: f64,
    pub max_courant: f64,
}

/// Decaying Taylor-Green vortex `u = sin x cos y, v = -cos x sin y` on a
/// `2 pi` periodic box of `n x n` cells, run to `t_end`.
pub fn taylor_green(n: usize, re: f64, t_end: f64, dt: Option<f64>) -> Result<TaylorGreenResult> {
    let l = 2.0 * std::f64::consts::PI;
    let grid = Grid::periodic(n, l)?;
    let fluid = FluidParams::new(re)?;
    let mut s = Solver::new(grid.clone(), fluid, SolverConfig::default(), &[])?;
    let field = |t: f64, x: f64, y: f64| {
        let d = (-2.0 * fluid.nu() * t).exp();
        [x.sin() * y.cos() * d, -x.cos() * y.sin() * d]
    };
    for j in -1..=grid.ny as isize {
        for i in -1..=grid.nx as isize + 1 {
            let [x, y] = grid.u_pos(i, j);
            s.state.u[grid.iu(i, j)] = field(0.0, x, y)[0];
        }
    }
    for j in -1..=grid.ny as isize + 1 {
        for i in -1..=grid.nx as isize {
            let [x, y] = grid.v_pos(i, j);
            s.state.v[grid.iv(i, j)] = field(0.0, x, y)[1];
        }
    }
    // exact initial pressure p = (cos 2x + cos 2y) / 4
    for j in -1..=grid.ny as isize {
        for i in -1..=grid.nx as isize {
            let [x, y] = grid.p_pos(i, j);
            s.state.p[grid.ip(i, j)] = 0.25 * ((2.0 * x).cos() + (2.0 * y).cos());
        }
    }
    let e0 = s.kinetic_energy();
    let (mut div, mut courant) = (0.0f64, 0.0f64);
    let steps = match dt {
        Some(dt) => (t_end / dt).round().max(1.0) as usize,
        None => (t_end / s.stable_dt()).ceil() as usize,
    };
    let dt = t_end / steps as f64;
    for _ in 0..steps {
        let r = s.step(dt, &[])?;
        div = div.max(r.divergence);
        courant = courant.max(r.courant);
    }
    let t = s.time();
    let expected = e0 * (-4.0 * fluid.nu() * t).exp();
    let mut verr: f64 = 0.0;
    for j in 0..grid.ny as isize {
        for i in 0..grid.nx as isize {
            let [x, y] = grid.u_pos(i, j);
            verr = verr.max((s.state.u[grid.iu(i, j)] - field(t, x, y)[0]).abs());
            let [x, y] = grid.v_pos(i, j);
            verr = verr.max((s.state.v[grid.iv(i, j)] - field(t, x, y)[1]).abs());
        }
    }
    Ok(TaylorGreenResult {
        energy_error: (s.kinetic_energy() - expected).abs() / expected,
        velocity_error: verr,
        max_divergence: div,
        max_courant: courant,
    })
}
