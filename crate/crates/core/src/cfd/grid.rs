//! Staggered (MAC) grid storage.
//!
//! `u` lives on vertical faces `x = i h`, `y = (j + 1/2) h`; `v` on horizontal
//! faces `x = (i + 1/2) h`, `y = j h`; `p` at cell centers. Every array
//! carries one ghost layer on each side so stencils never branch.

use crate::error::{Error, Result};

/// Outer boundary treatment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Boundary {
    /// Doubly periodic box.
    Periodic,
    /// Uniform inflow at `x = 0`, convective outflow at `x = Lx`, free-slip
    /// walls at the top and bottom.
    Channel { inflow: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub nx: usize,
    pub ny: usize,
    pub h: f64,
    /// Physical coordinates of the lower-left domain corner.
    pub origin: [f64; 2],
    pub boundary: Boundary,
}

impl Grid {
    pub fn new(nx: usize, ny: usize, h: f64, origin: [f64; 2], boundary: Boundary) -> Result<Self> {
        if nx < 4 || ny < 4 || !(h > 0.0) {
            return Err(Error::config(format!("degenerate grid {nx}x{ny}, h = {h}")));
        }
        Ok(Self {
            nx,
            ny,
            h,
            origin,
            boundary,
        })
    }

    /// Channel of `lx x ly` body diameters at `cells_per_d` cells per
    /// diameter, centered vertically on `y = 0`.
    pub fn channel(lx: f64, ly: f64, cells_per_d: usize, inflow: f64) -> Result<Self> {
        let h = 1.0 / cells_per_d as f64;
        let nx = (lx * cells_per_d as f64).round() as usize;
        let ny = (ly * cells_per_d as f64).round() as usize;
        Self::new(nx, ny, h, [0.0, -ly / 2.0], Boundary::Channel { inflow })
    }

    pub fn periodic(n: usize, length: f64) -> Result<Self> {
        Self::new(n, n, length / n as f64, [0.0, 0.0], Boundary::Periodic)
    }

    pub fn lx(&self) -> f64 {
        self.nx as f64 * self.h
    }

    pub fn ly(&self) -> f64 {
        self.ny as f64 * self.h
    }

    pub fn is_periodic(&self) -> bool {
        matches!(self.boundary, Boundary::Periodic)
    }

    /// Row stride of the `u` array.
    pub fn su(&self) -> usize {
        self.nx + 3
    }

    /// Row stride of the `v` array.
    pub fn sv(&self) -> usize {
        self.nx + 2
    }

    /// Row stride of the `p` array.
    pub fn sp(&self) -> usize {
        self.nx + 2
    }

    pub fn u_len(&self) -> usize {
        self.su() * (self.ny + 2)
    }

    pub fn v_len(&self) -> usize {
        self.sv() * (self.ny + 3)
    }

    pub fn p_len(&self) -> usize {
        self.sp() * (self.ny + 2)
    }

    #[inline]
    pub fn iu(&self, i: isize, j: isize) -> usize {
        ((j + 1) as usize) * self.su() + (i + 1) as usize
    }

    #[inline]
    pub fn iv(&self, i: isize, j: isize) -> usize {
        ((j + 1) as usize) * self.sv() + (i + 1) as usize
    }

    #[inline]
    pub fn ip(&self, i: isize, j: isize) -> usize {
        ((j + 1) as usize) * self.sp() + (i + 1) as usize
    }

    /// Physical position of `u[i, j]`.
    pub fn u_pos(&self, i: isize, j: isize) -> [f64; 2] {
        [
            self.origin[0] + i as f64 * self.h,
            self.origin[1] + (j as f64 + 0.5) * self.h,
        ]
    }

    pub fn v_pos(&self, i: isize, j: isize) -> [f64; 2] {
        [
            self.origin[0] + (i as f64 + 0.5) * self.h,
            self.origin[1] + j as f64 * self.h,
        ]
    }

    pub fn p_pos(&self, i: isize, j: isize) -> [f64; 2] {
        [
            self.origin[0] + (i as f64 + 0.5) * self.h,
            self.origin[1] + (j as f64 + 0.5) * self.h,
        ]
    }

    /// Index range of `u` faces that the momentum equation updates.
    pub fn u_interior(&self) -> (std::ops::Range<isize>, std::ops::Range<isize>) {
        match self.boundary {
            Boundary::Periodic => (0..self.nx as isize, 0..self.ny as isize),
            Boundary::Channel { .. } => (1..self.nx as isize, 0..self.ny as isize),
        }
    }

    pub fn v_interior(&self) -> (std::ops::Range<isize>, std::ops::Range<isize>) {
        match self.boundary {
            Boundary::Periodic => (0..self.nx as isize, 0..self.ny as isize),
            Boundary::Channel { .. } => (0..self.nx as isize, 1..self.ny as isize),
        }
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.origin[0]
            && x <= self.origin[0] + self.lx()
            && y >= self.origin[1]
            && y <= self.origin[1] + self.ly()
    }
}

/// Velocity and pressure fields on a [`Grid`].
#[derive(Debug, Clone)]
pub struct FlowState {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub p: Vec<f64>,
    pub t: f64,
}

impl FlowState {
    pub fn zeros(grid: &Grid) -> Self {
        Self {
            u: vec![0.0; grid.u_len()],
            v: vec![0.0; grid.v_len()],
            p: vec![0.0; grid.p_len()],
            t: 0.0,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.u
            .iter()
            .chain(&self.v)
            .chain(&self.p)
            .all(|x| x.is_finite())
    }
}

/// Refresh ghost layers and boundary-face values of the velocity field.
pub fn apply_velocity_bc(grid: &Grid, u: &mut [f64], v: &mut [f64]) {
    let (nx, ny) = (grid.nx as isize, grid.ny as isize);
    match grid.boundary {
        Boundary::Periodic => {
            for j in 0..ny {
                u[grid.iu(nx, j)] = u[grid.iu(0, j)];
                u[grid.iu(-1, j)] = u[grid.iu(nx - 1, j)];
                u[grid.iu(nx + 1, j)] = u[grid.iu(1, j)];
                v[grid.iv(-1, j)] = v[grid.iv(nx - 1, j)];
                v[grid.iv(nx, j)] = v[grid.iv(0, j)];
            }
            v[grid.iv(-1, ny)] = v[grid.iv(nx - 1, 0)];
            v[grid.iv(nx, ny)] = v[grid.iv(0, 0)];
            for i in -1..=nx + 1 {
                u[grid.iu(i, -1)] = u[grid.iu(i, ny - 1)];
                u[grid.iu(i, ny)] = u[grid.iu(i, 0)];
            }
            for i in -1..=nx {
                v[grid.iv(i, ny)] = v[grid.iv(i, 0)];
                v[grid.iv(i, -1)] = v[grid.iv(i, ny - 1)];
                v[grid.iv(i, ny + 1)] = v[grid.iv(i, 1)];
            }
        }
        Boundary::Channel { inflow } => {
            for j in 0..ny {
                u[grid.iu(0, j)] = inflow;
                u[grid.iu(-1, j)] = inflow;
                u[grid.iu(nx + 1, j)] = u[grid.iu(nx, j)];
                // v = 0 on the inflow plane
                v[grid.iv(-1, j)] = -v[grid.iv(0, j)];
            }
            for i in -1..=nx {
                v[grid.iv(i, 0)] = 0.0;
                v[grid.iv(i, ny)] = 0.0;
                v[grid.iv(i, -1)] = -v[grid.iv(i, 1)];
                v[grid.iv(i, ny + 1)] = -v[grid.iv(i, ny - 1)];
            }
            // free slip: du/dy = 0
            for i in -1..=nx + 1 {
                u[grid.iu(i, -1)] = u[grid.iu(i, 0)];
                u[grid.iu(i, ny)] = u[grid.iu(i, ny - 1)];
            }
        }
    }
}

/// Discrete divergence at cell `(i, j)`.
#[inline]
pub fn divergence_at(grid: &Grid, u: &[f64], v: &[f64], i: isize, j: isize) -> f64 {
    (u[grid.iu(i + 1, j)] - u[grid.iu(i, j)] + v[grid.iv(i, j + 1)] - v[grid.iv(i, j)]) / grid.h
}

/// Max-norm of the discrete divergence over all cells.
pub fn max_divergence(grid: &Grid, u: &[f64], v: &[f64]) -> f64 {
    let mut m: f64 = 0.0;
    for j in 0..grid.ny as isize {
        for i in 0..grid.nx as isize {
            m = m.max(divergence_at(grid, u, v, i, j).abs());
        }
    }
    m
}
