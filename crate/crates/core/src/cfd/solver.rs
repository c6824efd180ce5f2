//! Fractional-step projection solver with direct-forcing immersed bodies.

use std::time::Instant;

use super::grid::{apply_velocity_bc, max_divergence, Boundary, FlowState, Grid};
use super::ib::{Component, Cylinder, Stencil};
use super::kinematics::BodyState;
use super::multigrid::Multigrid;
use crate::error::{Error, Result};

/// Nondimensional fluid parameters (`rho = U = D = 1`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluidParams {
    pub re: f64,
}

impl FluidParams {
    pub fn new(re: f64) -> Result<Self> {
        if !(re > 0.0) || !re.is_finite() {
            return Err(Error::config(format!(
                "Reynolds number must be positive, got {re}"
            )));
        }
        Ok(Self { re })
    }

    pub fn nu(&self) -> f64 {
        1.0 / self.re
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Target Courant number when choosing `dt`.
    pub cfl: f64,
    /// Fraction of the explicit diffusion limit `h^2 / (8 nu)`.
    pub diffusion_safety: f64,
    pub dt_max: f64,
    /// Multi-direct-forcing passes per step.
    pub forcing_iterations: usize,
    /// Poisson residual target, in units of velocity divergence.
    pub poisson_tolerance: f64,
    /// Courant number above which a step is declared a blow-up.
    pub blowup_courant: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            cfl: 0.45,
            diffusion_safety: 0.9,
            dt_max: 0.02,
            forcing_iterations: 3,
            poisson_tolerance: 1e-7,
            blowup_courant: 1.0,
        }
    }
}

/// Force coefficients on one body after a step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForceSample {
    pub t: f64,
    pub cd: f64,
    pub cl: f64,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct StepReport {
    pub dt: f64,
    pub courant: f64,
    pub divergence: f64,
    pub poisson_cycles: usize,
    /// Largest marker velocity error after projection.
    pub slip: f64,
}

pub struct Solver {
    pub grid: Grid,
    pub fluid: FluidParams,
    pub config: SolverConfig,
    pub state: FlowState,
    bodies: Vec<Cylinder>,
    body_states: Vec<BodyState>,
    forces: Vec<Option<ForceSample>>,
    mg: Multigrid,
    hu_prev: Vec<f64>,
    hv_prev: Vec<f64>,
    hu: Vec<f64>,
    hv: Vec<f64>,
    u_star: Vec<f64>,
    v_star: Vec<f64>,
    rhs: Vec<f64>,
    phi: Vec<f64>,
    marker_force: Vec<Vec<[f64; 2]>>,
    steps: usize,
    last: StepReport,
    /// Wall-clock seconds spent in momentum, forcing, projection and
    /// diagnostics.
    pub timings: [f64; 4],
}

impl Solver {
    /// A solver with one cylinder of diameter 1 per entry of `bodies`,
    /// initialized to the uniform inflow (or rest for a periodic box).
    pub fn new(
        grid: Grid,
        fluid: FluidParams,
        config: SolverConfig,
        bodies: &[BodyState],
    ) -> Result<Self> {
        let mut state = FlowState::zeros(&grid);
        if let Boundary::Channel { inflow } = grid.boundary {
            state.u.iter_mut().for_each(|u| *u = inflow);
        }
        apply_velocity_bc(&grid, &mut state.u, &mut state.v);
        let cyl: Vec<Cylinder> = bodies.iter().map(|_| Cylinder::new(0.5, grid.h)).collect();
        let mg = Multigrid::new(grid.nx, grid.ny, grid.h, grid.is_periodic());
        let n = grid.nx * grid.ny;
        let s = Self {
            mg,
            hu_prev: vec![0.0; grid.u_len()],
            hv_prev: vec![0.0; grid.v_len()],
            hu: vec![0.0; grid.u_len()],
            hv: vec![0.0; grid.v_len()],
            u_star: vec![0.0; grid.u_len()],
            v_star: vec![0.0; grid.v_len()],
            rhs: vec![0.0; n],
            phi: vec![0.0; n],
            marker_force: cyl.iter().map(|c| vec![[0.0; 2]; c.n_markers()]).collect(),
            forces: vec![None; bodies.len()],
            body_states: bodies.to_vec(),
            bodies: cyl,
            grid,
            fluid,
            config,
            state,
            steps: 0,
            last: StepReport::default(),
            timings: [0.0; 4],
        };
        for b in 0..s.bodies.len() {
            s.check_inside(b, &s.body_states[b])?;
        }
        Ok(s)
    }

    pub fn time(&self) -> f64 {
        self.state.t
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn last_report(&self) -> StepReport {
        self.last
    }

    pub fn n_bodies(&self) -> usize {
        self.bodies.len()
    }

    pub fn body(&self, b: usize) -> &Cylinder {
        &self.bodies[b]
    }

    pub fn body_state(&self, b: usize) -> BodyState {
        self.body_states[b]
    }

    /// Largest `|u| / h` or `|v| / h` on the grid.
    fn max_rate(&self) -> f64 {
        let mu = self.state.u.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let mv = self.state.v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        mu.max(mv) / self.grid.h
    }

    /// Stable step size for the current state.
    pub fn stable_dt(&self) -> f64 {
        let h = self.grid.h;
        let adv = self.config.cfl / self.max_rate().max(1e-12);
        let diff = self.config.diffusion_safety * h * h / (8.0 * self.fluid.nu());
        // the impulsive start accelerates the flow around bodies within a
        // few steps, so begin small
        let ramp = (0.25 + self.steps as f64 / 20.0).min(1.0);
        ramp * adv.min(diff).min(self.config.dt_max)
    }

    fn check_inside(&self, b: usize, s: &BodyState) -> Result<()> {
        let g = &self.grid;
        let margin = self.bodies[b].radius + 3.0 * g.h;
        let [x, y] = s.center;
        let ok = if g.is_periodic() {
            x.is_finite() && y.is_finite()
        } else {
            x - margin > g.origin[0]
                && x + margin < g.origin[0] + g.lx()
                && y - margin > g.origin[1]
                && y + margin < g.origin[1] + g.ly()
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Geometry(format!(
                "body {b} at ({x:.3}, {y:.3}) leaves the domain"
            )))
        }
    }

    /// Advance one step of size `dt`; `bodies` holds the body states at the
    /// end of the step.
    pub fn step(&mut self, dt: f64, bodies: &[BodyState]) -> Result<StepReport> {
        if bodies.len() != self.bodies.len() {
            return Err(Error::config(format!(
                "expected {} body states, got {}",
                self.bodies.len(),
                bodies.len()
            )));
        }
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::config(format!("invalid time step {dt}")));
        }
        for (b, s) in bodies.iter().enumerate() {
            self.check_inside(b, s)?;
        }
        let t_new = self.state.t + dt;
        let clock = Instant::now();
        self.momentum_rhs();
        self.predict(dt);
        self.outflow(dt);
        apply_velocity_bc(&self.grid, &mut self.u_star, &mut self.v_star);
        let t1 = clock.elapsed().as_secs_f64();
        self.body_states.copy_from_slice(bodies);
        self.force_bodies(dt);
        self.correct_outflow_mass();
        let t2 = clock.elapsed().as_secs_f64();
        let cycles = self.project(dt)?;
        let t3 = clock.elapsed().as_secs_f64();
        std::mem::swap(&mut self.hu, &mut self.hu_prev);
        std::mem::swap(&mut self.hv, &mut self.hv_prev);
        self.state.t = t_new;
        self.steps += 1;

        let courant = dt * self.max_rate();
        if !self.state.is_finite() || courant > self.config.blowup_courant {
            return Err(Error::BlowUp {
                time: t_new,
                courant,
                reason: if courant > self.config.blowup_courant {
                    "Courant limit exceeded".into()
                } else {
                    "non-finite field".into()
                },
            });
        }
        self.update_forces(dt, t_new);
        let report = StepReport {
            dt,
            courant,
            divergence: max_divergence(&self.grid, &self.state.u, &self.state.v),
            poisson_cycles: cycles,
            slip: self.max_slip(),
        };
        self.last = report;
        let t4 = clock.elapsed().as_secs_f64();
        self.timings[0] += t1;
        self.timings[1] += t2 - t1;
        self.timings[2] += t3 - t2;
        self.timings[3] += t4 - t3;
        Ok(report)
    }

    /// Advance to exactly `t_target` with equal substeps no larger than the
    /// stable step; `bodies(t)` supplies body states.
    pub fn advance_to<F>(&mut self, t_target: f64, mut bodies: F) -> Result<StepReport>
    where
        F: FnMut(f64) -> Vec<BodyState>,
    {
        if t_target - self.state.t <= 1e-12 {
            return Ok(self.last);
        }
        let mut worst = StepReport::default();
        loop {
            let remaining = t_target - self.state.t;
            let n = (remaining / self.stable_dt()).ceil().max(1.0);
            let last = n <= 1.0;
            let t = if last {
                t_target
            } else {
                self.state.t + remaining / n
            };
            let states = bodies(t);
            let r = self.step(t - self.state.t, &states)?;
            if last {
                // land exactly on the target despite rounding
                self.state.t = t_target;
                for f in self.forces.iter_mut().flatten() {
                    f.t = t_target;
                }
            }
            worst.dt = r.dt;
            worst.courant = worst.courant.max(r.courant);
            worst.divergence = worst.divergence.max(r.divergence);
            worst.poisson_cycles = worst.poisson_cycles.max(r.poisson_cycles);
            worst.slip = worst.slip.max(r.slip);
            if last {
                break;
            }
        }
        Ok(worst)
    }

    /// Explicit advection plus diffusion of the current velocity.
    fn momentum_rhs(&mut self) {
        let g = &self.grid;
        let (u, v) = (&self.state.u, &self.state.v);
        let (su, sv) = (g.su() as isize, g.sv() as isize);
        let inv_h = 1.0 / g.h;
        let nu_h2 = self.fluid.nu() / (g.h * g.h);
        let (ri, rj) = g.u_interior();
        for j in rj {
            for i in ri.clone() {
                let k = g.iu(i, j) as isize;
                let kv = g.iv(i, j) as isize;
                let at = |a: &[f64], o: isize| a[o as usize];
                let c = at(u, k);
                let ue = 0.5 * (at(u, k + 1) + c);
                let uw = 0.5 * (c + at(u, k - 1));
                let un = 0.5 * (at(u, k + su) + c);
                let us = 0.5 * (c + at(u, k - su));
                let vn = 0.5 * (at(v, kv - 1 + sv) + at(v, kv + sv));
                let vs = 0.5 * (at(v, kv - 1) + at(v, kv));
                let adv = (ue * ue - uw * uw + un * vn - us * vs) * inv_h;
                let lap = at(u, k + 1) + at(u, k - 1) + at(u, k + su) + at(u, k - su) - 4.0 * c;
                self.hu[k as usize] = nu_h2 * lap - adv;
            }
        }
        let (ri, rj) = g.v_interior();
        for j in rj {
            for i in ri.clone() {
                let k = g.iv(i, j) as isize;
                let ku = g.iu(i, j) as isize;
                let at = |a: &[f64], o: isize| a[o as usize];
                let c = at(v, k);
                let ue = 0.5 * (at(u, ku + 1 - su) + at(u, ku + 1));
                let ve = 0.5 * (c + at(v, k + 1));
                let uw = 0.5 * (at(u, ku - su) + at(u, ku));
                let vw = 0.5 * (at(v, k - 1) + c);
                let vn = 0.5 * (c + at(v, k + sv));
                let vs = 0.5 * (at(v, k - sv) + c);
                let adv = (ue * ve - uw * vw + vn * vn - vs * vs) * inv_h;
                let lap = at(v, k + 1) + at(v, k - 1) + at(v, k + sv) + at(v, k - sv) - 4.0 * c;
                self.hv[k as usize] = nu_h2 * lap - adv;
            }
        }
    }

    /// Adams-Bashforth predictor including the old pressure gradient.
    fn predict(&mut self, dt: f64) {
        let g = &self.grid;
        let (a, b) = if self.steps == 0 {
            (1.0, 0.0)
        } else {
            (1.5, -0.5)
        };
        let p = &self.state.p;
        self.u_star.copy_from_slice(&self.state.u);
        self.v_star.copy_from_slice(&self.state.v);
        let inv_h = 1.0 / g.h;
        let (ri, rj) = g.u_interior();
        for j in rj {
            for i in ri.clone() {
                let k = g.iu(i, j);
                let gp = (p[g.ip(i, j)] - p[g.ip(i - 1, j)]) * inv_h;
                self.u_star[k] += dt * (a * self.hu[k] + b * self.hu_prev[k] - gp);
            }
        }
        let (ri, rj) = g.v_interior();
        for j in rj {
            for i in ri.clone() {
                let k = g.iv(i, j);
                let gp = (p[g.ip(i, j)] - p[g.ip(i, j - 1)]) * inv_h;
                self.v_star[k] += dt * (a * self.hv[k] + b * self.hv_prev[k] - gp);
            }
        }
    }

    /// Convective outflow condition on the last `u` face and the `v` ghost.
    fn outflow(&mut self, dt: f64) {
        let g = &self.grid;
        let Boundary::Channel { inflow } = g.boundary else {
            return;
        };
        let c = dt * inflow / g.h;
        let nx = g.nx as isize;
        let (u, v) = (&self.state.u, &self.state.v);
        for j in 0..g.ny as isize {
            let k = g.iu(nx, j);
            self.u_star[k] = u[k] - c * (u[k] - u[g.iu(nx - 1, j)]);
        }
        for j in 1..g.ny as isize {
            let k = g.iv(nx, j);
            self.v_star[k] = v[k] - c * (v[k] - v[g.iv(nx - 1, j)]);
        }
    }

    /// Scale the outflow face so net mass flux through the box is zero.
    fn correct_outflow_mass(&mut self) {
        let g = &self.grid;
        if g.is_periodic() {
            return;
        }
        let nx = g.nx as isize;
        let (mut qin, mut qout) = (0.0, 0.0);
        for j in 0..g.ny as isize {
            qin += self.u_star[g.iu(0, j)];
            qout += self.u_star[g.iu(nx, j)];
        }
        let corr = (qin - qout) / g.ny as f64;
        for j in 0..g.ny as isize {
            let k = g.iu(nx, j);
            self.u_star[k] += corr;
            self.u_star[g.iu(nx + 1, j)] = self.u_star[k];
        }
    }

    fn interpolate(&self, comp: Component, x: [f64; 2], field: &[f64]) -> f64 {
        let g = &self.grid;
        let st = Stencil::new(g, comp, x);
        let mut acc = 0.0;
        for b in 0..4 {
            if st.wy[b] == 0.0 {
                continue;
            }
            for a in 0..4 {
                let w = st.wx[a] * st.wy[b];
                if w == 0.0 {
                    continue;
                }
                let (i, j) = self.wrap_index(comp, st.i0 + a as isize, st.j0 + b as isize);
                let k = match comp {
                    Component::U => g.iu(i, j),
                    Component::V => g.iv(i, j),
                };
                acc += w * field[k];
            }
        }
        acc
    }

    fn wrap_index(&self, comp: Component, i: isize, j: isize) -> (isize, isize) {
        let g = &self.grid;
        if g.is_periodic() {
            (i.rem_euclid(g.nx as isize), j.rem_euclid(g.ny as isize))
        } else {
            let _ = comp;
            (i, j)
        }
    }

    /// Spread a marker force (already multiplied by `dt`) onto the field.
    fn spread(&mut self, comp: Component, x: [f64; 2], amount: f64) {
        let g = &self.grid;
        let st = Stencil::new(g, comp, x);
        let (ri, rj) = match comp {
            Component::U => g.u_interior(),
            Component::V => g.v_interior(),
        };
        for b in 0..4 {
            for a in 0..4 {
                let w = st.wx[a] * st.wy[b];
                if w == 0.0 {
                    continue;
                }
                let (i, j) = self.wrap_index(comp, st.i0 + a as isize, st.j0 + b as isize);
                if !ri.contains(&i) || !rj.contains(&j) {
                    continue;
                }
                match comp {
                    Component::U => {
                        let k = g.iu(i, j);
                        self.u_star[k] += w * amount;
                    }
                    Component::V => {
                        let k = g.iv(i, j);
                        self.v_star[k] += w * amount;
                    }
                }
            }
        }
    }

    /// Multi-direct forcing: drive the predicted velocity toward the body
    /// velocity at every marker and accumulate the Lagrangian force density.
    fn force_bodies(&mut self, dt: f64) {
        let h2 = self.grid.h * self.grid.h;
        for b in 0..self.bodies.len() {
            self.marker_force[b].iter_mut().for_each(|f| *f = [0.0; 2]);
        }
        for _ in 0..self.config.forcing_iterations {
            for b in 0..self.bodies.len() {
                let s = self.body_states[b];
                let dv = self.bodies[b].marker_volume / h2;
                // every marker reads the same field before any correction is spread
                let pass: Vec<([f64; 2], [f64; 2])> = self.bodies[b]
                    .offsets
                    .iter()
                    .map(|&off| {
                        let x = [s.center[0] + off[0], s.center[1] + off[1]];
                        let target = s.point_velocity(off);
                        let ui = self.interpolate(Component::U, x, &self.u_star);
                        let vi = self.interpolate(Component::V, x, &self.v_star);
                        (x, [(target[0] - ui) / dt, (target[1] - vi) / dt])
                    })
                    .collect();
                for (m, (x, f)) in pass.into_iter().enumerate() {
                    self.marker_force[b][m][0] += f[0];
                    self.marker_force[b][m][1] += f[1];
                    self.spread(Component::U, x, dt * f[0] * dv);
                    self.spread(Component::V, x, dt * f[1] * dv);
                }
            }
            apply_velocity_bc(&self.grid, &mut self.u_star, &mut self.v_star);
        }
    }

    /// Pressure projection; returns the number of multigrid cycles.
    fn project(&mut self, dt: f64) -> Result<usize> {
        let g = &self.grid;
        let (nx, ny) = (g.nx, g.ny);
        for j in 0..ny {
            for i in 0..nx {
                self.rhs[j * nx + i] = super::grid::divergence_at(
                    g,
                    &self.u_star,
                    &self.v_star,
                    i as isize,
                    j as isize,
                );
            }
        }
        self.mg.tolerance = self.config.poisson_tolerance;
        // the previous increment is a good initial guess
        let rep = self.mg.solve(&self.rhs, &mut self.phi);
        if !rep.residual.is_finite() {
            return Err(Error::Numerical(format!(
                "pressure solve diverged at t = {:.4}",
                self.state.t
            )));
        }
        let periodic = g.is_periodic();
        let phi_at = |i: isize, j: isize| -> f64 {
            let (i, j) = if periodic {
                (i.rem_euclid(nx as isize), j.rem_euclid(ny as isize))
            } else {
                (i.clamp(0, nx as isize - 1), j.clamp(0, ny as isize - 1))
            };
            self.phi[j as usize * nx + i as usize]
        };
        let inv_h = 1.0 / g.h;
        let (ri, rj) = g.u_interior();
        for j in rj {
            for i in ri.clone() {
                let k = g.iu(i, j);
                self.state.u[k] = self.u_star[k] - (phi_at(i, j) - phi_at(i - 1, j)) * inv_h;
            }
        }
        let (ri, rj) = g.v_interior();
        for j in rj {
            for i in ri.clone() {
                let k = g.iv(i, j);
                self.state.v[k] = self.v_star[k] - (phi_at(i, j) - phi_at(i, j - 1)) * inv_h;
            }
        }
        // boundary faces carry the prescribed values from the predictor
        if !periodic {
            let nxi = nx as isize;
            for j in 0..ny as isize {
                for i in [-1, 0, nxi, nxi + 1] {
                    let k = g.iu(i, j);
                    self.state.u[k] = self.u_star[k];
                }
            }
            for j in 0..ny as isize {
                let k = g.iv(nxi, j);
                self.state.v[k] = self.v_star[k];
            }
        }
        apply_velocity_bc(g, &mut self.state.u, &mut self.state.v);
        let inv_dt = 1.0 / dt;
        for j in 0..ny as isize {
            for i in 0..nx as isize {
                let k = g.ip(i, j);
                self.state.p[k] += phi_at(i, j) * inv_dt;
            }
        }
        self.fill_pressure_ghosts();
        Ok(rep.cycles)
    }

    fn fill_pressure_ghosts(&mut self) {
        let g = &self.grid;
        let (nx, ny) = (g.nx as isize, g.ny as isize);
        let p = &mut self.state.p;
        for j in 0..ny {
            let (a, b) = if g.is_periodic() {
                (nx - 1, 0)
            } else {
                (0, nx - 1)
            };
            p[g.ip(-1, j)] = p[g.ip(a, j)];
            p[g.ip(nx, j)] = p[g.ip(b, j)];
        }
        for i in -1..=nx {
            let (a, b) = if g.is_periodic() {
                (ny - 1, 0)
            } else {
                (0, ny - 1)
            };
            p[g.ip(i, -1)] = p[g.ip(i, a)];
            p[g.ip(i, ny)] = p[g.ip(i, b)];
        }
    }

    fn update_forces(&mut self, _dt: f64, t: f64) {
        for b in 0..self.bodies.len() {
            let dv = self.bodies[b].marker_volume;
            let mut f = [0.0; 2];
            for m in &self.marker_force[b] {
                f[0] -= m[0] * dv;
                f[1] -= m[1] * dv;
            }
            let s = self.body_states[b];
            let vol = self.bodies[b].area();
            f[0] += vol * s.acceleration[0];
            f[1] += vol * s.acceleration[1];
            // coefficients normalized by rho U^2 D / 2 with all scales 1
            self.forces[b] = Some(ForceSample {
                t,
                cd: 2.0 * f[0],
                cl: 2.0 * f[1],
            });
        }
    }

    fn max_slip(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (b, cyl) in self.bodies.iter().enumerate() {
            let s = self.body_states[b];
            for off in &cyl.offsets {
                let x = [s.center[0] + off[0], s.center[1] + off[1]];
                let target = s.point_velocity(*off);
                let du = self.interpolate(Component::U, x, &self.state.u) - target[0];
                let dv = self.interpolate(Component::V, x, &self.state.v) - target[1];
                worst = worst.max(du.hypot(dv));
            }
        }
        worst
    }

    /// Drag and lift coefficients of body `b` from the latest step.
    pub fn compute_forces(&self, b: usize) -> Result<ForceSample> {
        self.forces
            .get(b)
            .copied()
            .flatten()
            .ok_or_else(|| Error::State(format!("no forces for body {b} before the first step")))
    }

    /// Cell-centered pressure, bilinearly interpolated.
    pub fn pressure_at(&self, x: f64, y: f64) -> Result<f64> {
        let g = &self.grid;
        if !g.is_periodic() && !g.contains(x, y) {
            return Err(Error::Geometry(format!(
                "probe ({x:.3}, {y:.3}) outside the domain"
            )));
        }
        let fx = (x - g.origin[0]) / g.h - 0.5;
        let fy = (y - g.origin[1]) / g.h - 0.5;
        let i0 = fx.floor();
        let j0 = fy.floor();
        let (ax, ay) = (fx - i0, fy - j0);
        let (i0, j0) = (i0 as isize, j0 as isize);
        let at = |i: isize, j: isize| {
            let (i, j) = if g.is_periodic() {
                (i.rem_euclid(g.nx as isize), j.rem_euclid(g.ny as isize))
            } else {
                (i.clamp(-1, g.nx as isize), j.clamp(-1, g.ny as isize))
            };
            self.state.p[g.ip(i, j)]
        };
        Ok((1.0 - ay) * ((1.0 - ax) * at(i0, j0) + ax * at(i0 + 1, j0))
            + ay * ((1.0 - ax) * at(i0, j0 + 1) + ax * at(i0 + 1, j0 + 1)))
    }

    /// Mean pressure over the first cell column.
    pub fn reference_pressure(&self) -> f64 {
        let g = &self.grid;
        (0..g.ny as isize)
            .map(|j| self.state.p[g.ip(0, j)])
            .sum::<f64>()
            / g.ny as f64
    }

    /// Surface pressure coefficients on `n` sensors around body `b` at
    /// radius `0.5 + h`. Sensor 0 faces upstream; indices advance over the
    /// top of the body.
    pub fn sample_surface_pressure(&self, b: usize, n: usize) -> Result<Vec<f64>> {
        let s = self
            .body_states
            .get(b)
            .ok_or_else(|| Error::config(format!("no body {b}")))?;
        let r = self.bodies[b].radius + self.grid.h;
        let p_ref = self.reference_pressure();
        (0..n)
            .map(|j| {
                let (x, y) = sensor_position(s.center, r, j, n);
                Ok((self.pressure_at(x, y)? - p_ref) / 0.5)
            })
            .collect()
    }

    /// Vorticity at cell centers, averaged from the four surrounding nodes.
    pub fn vorticity(&self) -> Vec<f64> {
        let g = &self.grid;
        let (u, v) = (&self.state.u, &self.state.v);
        let node = |i: isize, j: isize| -> f64 {
            (v[g.iv(i, j)] - v[g.iv(i - 1, j)] - u[g.iu(i, j)] + u[g.iu(i, j - 1)]) / g.h
        };
        let mut w = vec![0.0; g.nx * g.ny];
        for j in 0..g.ny as isize {
            for i in 0..g.nx as isize {
                w[j as usize * g.nx + i as usize] =
                    0.25 * (node(i, j) + node(i + 1, j) + node(i, j + 1) + node(i + 1, j + 1));
            }
        }
        w
    }

    /// Cell-centered velocity.
    pub fn velocity_at_cell(&self, i: isize, j: isize) -> [f64; 2] {
        let g = &self.grid;
        [
            0.5 * (self.state.u[g.iu(i, j)] + self.state.u[g.iu(i + 1, j)]),
            0.5 * (self.state.v[g.iv(i, j)] + self.state.v[g.iv(i, j + 1)]),
        ]
    }

    /// Total kinetic energy per unit density.
    pub fn kinetic_energy(&self) -> f64 {
        let g = &self.grid;
        let mut e = 0.0;
        for j in 0..g.ny as isize {
            for i in 0..g.nx as isize {
                let u = self.state.u[g.iu(i, j)];
                let v = self.state.v[g.iv(i, j)];
                e += 0.5 * (u * u + v * v);
            }
        }
        e * g.h * g.h
    }
}

/// Physical position of sensor `j` of `n` on a ring of radius `r`.
pub fn sensor_position(center: [f64; 2], r: f64, j: usize, n: usize) -> (f64, f64) {
    let theta = 2.0 * std::f64::consts::PI * j as f64 / n as f64;
    let phi = std::f64::consts::PI - theta;
    (center[0] + r * phi.cos(), center[1] + r * phi.sin())
}
