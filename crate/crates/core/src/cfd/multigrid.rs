//! Cell-centered geometric multigrid for the pressure Poisson equation.
//!
//! Solves `lap(phi) = rhs` with homogeneous Neumann walls or periodic wrap.
//! Both problems are singular, so the right-hand side is projected onto
//! zero mean and the returned solution has zero mean.

/// Convergence summary of one [`Multigrid::solve`] call.
#[derive(Debug, Clone, Copy)]
pub struct SolveReport {
    pub cycles: usize,
    /// Max-norm of `rhs - lap(phi)` at exit.
    pub residual: f64,
}

struct Level {
    nx: usize,
    ny: usize,
    inv_h2: f64,
    phi: Vec<f64>,
    rhs: Vec<f64>,
    res: Vec<f64>,
}

impl Level {
    fn new(nx: usize, ny: usize, h: f64) -> Self {
        Self {
            nx,
            ny,
            inv_h2: 1.0 / (h * h),
            phi: vec![0.0; nx * ny],
            rhs: vec![0.0; nx * ny],
            res: vec![0.0; nx * ny],
        }
    }
}

pub struct Multigrid {
    levels: Vec<Level>,
    periodic: bool,
    pub tolerance: f64,
    pub max_cycles: usize,
    pub pre_sweeps: usize,
    pub post_sweeps: usize,
    pub coarse_sweeps: usize,
}

impl Multigrid {
    pub fn new(nx: usize, ny: usize, h: f64, periodic: bool) -> Self {
        let mut levels = vec![Level::new(nx, ny, h)];
        let (mut cx, mut cy, mut ch) = (nx, ny, h);
        while cx % 2 == 0 && cy % 2 == 0 && cx.min(cy) >= 8 {
            cx /= 2;
            cy /= 2;
            ch *= 2.0;
            levels.push(Level::new(cx, cy, ch));
        }
        Self {
            levels,
            periodic,
            tolerance: 1e-7,
            max_cycles: 40,
            pre_sweeps: 2,
            post_sweeps: 2,
            coarse_sweeps: 200,
        }
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    /// Solve in place. `phi` is used as the initial guess.
    pub fn solve(&mut self, rhs: &[f64], phi: &mut [f64]) -> SolveReport {
        let periodic = self.periodic;
        let fine = &mut self.levels[0];
        assert_eq!(rhs.len(), fine.nx * fine.ny);
        assert_eq!(phi.len(), rhs.len());
        let mean = rhs.iter().sum::<f64>() / rhs.len() as f64;
        for (d, s) in fine.rhs.iter_mut().zip(rhs) {
            *d = s - mean;
        }
        fine.phi.copy_from_slice(phi);
        let mut residual = residual_norm(fine, periodic);
        let mut cycles = 0;
        while residual > self.tolerance && cycles < self.max_cycles {
            self.v_cycle(0);
            cycles += 1;
            residual = residual_norm(&mut self.levels[0], periodic);
        }
        let fine = &mut self.levels[0];
        let m = fine.phi.iter().sum::<f64>() / fine.phi.len() as f64;
        for (d, s) in phi.iter_mut().zip(&fine.phi) {
            *d = s - m;
        }
        SolveReport { cycles, residual }
    }

    fn v_cycle(&mut self, l: usize) {
        let periodic = self.periodic;
        if l + 1 == self.levels.len() {
            let lv = &mut self.levels[l];
            let mean = lv.rhs.iter().sum::<f64>() / lv.rhs.len() as f64;
            lv.rhs.iter_mut().for_each(|r| *r -= mean);
            for _ in 0..self.coarse_sweeps {
                smooth(lv, periodic);
            }
            return;
        }
        for _ in 0..self.pre_sweeps {
            smooth(&mut self.levels[l], periodic);
        }
        compute_residual(&mut self.levels[l], periodic);
        let (head, tail) = self.levels.split_at_mut(l + 1);
        let (fine, coarse) = (&head[l], &mut tail[0]);
        restrict(fine, coarse);
        coarse.phi.iter_mut().for_each(|p| *p = 0.0);
        self.v_cycle(l + 1);
        let (head, tail) = self.levels.split_at_mut(l + 1);
        prolong_add(&tail[0], &mut head[l], periodic);
        for _ in 0..self.post_sweeps {
            smooth(&mut self.levels[l], periodic);
        }
    }
}

#[inline]
fn wrap(i: isize, n: usize) -> usize {
    i.rem_euclid(n as isize) as usize
}

/// Neighbor sum and neighbor count of cell `(i, j)` honoring the boundary.
#[inline]
fn edge_neighbors(lv: &Level, i: usize, j: usize, periodic: bool) -> (f64, f64) {
    let (nx, ny) = (lv.nx, lv.ny);
    let phi = &lv.phi;
    if periodic {
        let (i, j) = (i as isize, j as isize);
        let s = phi[j as usize * nx + wrap(i - 1, nx)]
            + phi[j as usize * nx + wrap(i + 1, nx)]
            + phi[wrap(j - 1, ny) * nx + i as usize]
            + phi[wrap(j + 1, ny) * nx + i as usize];
        return (s, 4.0);
    }
    let mut s = 0.0;
    let mut n = 0.0;
    if i > 0 {
        s += phi[j * nx + i - 1];
        n += 1.0;
    }
    if i + 1 < nx {
        s += phi[j * nx + i + 1];
        n += 1.0;
    }
    if j > 0 {
        s += phi[(j - 1) * nx + i];
        n += 1.0;
    }
    if j + 1 < ny {
        s += phi[(j + 1) * nx + i];
        n += 1.0;
    }
    (s, n)
}

/// One red-black Gauss-Seidel sweep.
fn smooth(lv: &mut Level, periodic: bool) {
    let (nx, ny) = (lv.nx, lv.ny);
    let h2 = 1.0 / lv.inv_h2;
    for color in 0..2 {
        for j in 0..ny {
            let start = (j + color) & 1;
            if j == 0 || j + 1 == ny {
                let mut i = start;
                while i < nx {
                    smooth_edge(lv, i, j, periodic, h2);
                    i += 2;
                }
                continue;
            }
            let mut i = start;
            if i == 0 {
                smooth_edge(lv, 0, j, periodic, h2);
                i = 2;
            }
            let row = j * nx;
            let rhs = &lv.rhs[row..row + nx];
            let (top, rest) = lv.phi.split_at_mut(row);
            let (cur, bot) = rest.split_at_mut(nx);
            let above = &top[row - nx..];
            let below = &bot[..nx];
            while i + 1 < nx {
                cur[i] = 0.25 * (cur[i - 1] + cur[i + 1] + above[i] + below[i] - h2 * rhs[i]);
                i += 2;
            }
            if i + 1 == nx {
                smooth_edge(lv, i, j, periodic, h2);
            }
        }
    }
}

#[inline]
fn smooth_edge(lv: &mut Level, i: usize, j: usize, periodic: bool, h2: f64) {
    let (s, n) = edge_neighbors(lv, i, j, periodic);
    let k = j * lv.nx + i;
    lv.phi[k] = (s - h2 * lv.rhs[k]) / n;
}

fn compute_residual(lv: &mut Level, periodic: bool) {
    let (nx, ny) = (lv.nx, lv.ny);
    for j in 0..ny {
        let row = j * nx;
        if j == 0 || j + 1 == ny {
            for i in 0..nx {
                residual_edge(lv, i, j, periodic);
            }
            continue;
        }
        residual_edge(lv, 0, j, periodic);
        let phi = &lv.phi;
        let cur = &phi[row..row + nx];
        let above = &phi[row - nx..row];
        let below = &phi[row + nx..row + 2 * nx];
        let rhs = &lv.rhs[row..row + nx];
        let res = &mut lv.res[row..row + nx];
        for i in 1..nx - 1 {
            let lap = cur[i - 1] + cur[i + 1] + above[i] + below[i] - 4.0 * cur[i];
            res[i] = rhs[i] - lap * lv.inv_h2;
        }
        residual_edge(lv, nx - 1, j, periodic);
    }
}

#[inline]
fn residual_edge(lv: &mut Level, i: usize, j: usize, periodic: bool) {
    let (s, n) = edge_neighbors(lv, i, j, periodic);
    let k = j * lv.nx + i;
    lv.res[k] = lv.rhs[k] - (s - n * lv.phi[k]) * lv.inv_h2;
}

fn residual_norm(lv: &mut Level, periodic: bool) -> f64 {
    compute_residual(lv, periodic);
    lv.res.iter().fold(0.0f64, |m, r| m.max(r.abs()))
}

fn restrict(fine: &Level, coarse: &mut Level) {
    let (fx, cx) = (fine.nx, coarse.nx);
    for j in 0..coarse.ny {
        for i in 0..cx {
            let a = 2 * j * fx + 2 * i;
            coarse.rhs[j * cx + i] =
                0.25 * (fine.res[a] + fine.res[a + 1] + fine.res[a + fx] + fine.res[a + fx + 1]);
        }
    }
}

/// Bilinear prolongation of the coarse correction, added to the fine level.
fn prolong_add(coarse: &Level, fine: &mut Level, periodic: bool) {
    let (cx, cy) = (coarse.nx, coarse.ny);
    let neighbor = |i: usize, d: isize, n: usize| -> usize {
        let k = i as isize + d;
        if periodic {
            wrap(k, n)
        } else {
            k.clamp(0, n as isize - 1) as usize
        }
    };
    // column pairs (own, neighbor) for every fine column
    let cols: Vec<(usize, usize)> = (0..fine.nx)
        .map(|i| {
            let ci = i / 2;
            (ci, neighbor(ci, if i % 2 == 0 { -1 } else { 1 }, cx))
        })
        .collect();
    let c = &coarse.phi;
    for j in 0..fine.ny {
        let cj = j / 2;
        let nj = neighbor(cj, if j % 2 == 0 { -1 } else { 1 }, cy);
        let own = &c[cj * cx..(cj + 1) * cx];
        let nb = &c[nj * cx..(nj + 1) * cx];
        let out = &mut fine.phi[j * fine.nx..(j + 1) * fine.nx];
        for (o, &(ci, ni)) in out.iter_mut().zip(&cols) {
            *o += 0.5625 * own[ci] + 0.1875 * (own[ni] + nb[ci]) + 0.0625 * nb[ni];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn neumann_cosine_mode() {
        let (nx, ny) = (64, 32);
        let h = 1.0 / 32.0;
        let (lx, ly) = (nx as f64 * h, ny as f64 * h);
        let mut rhs = vec![0.0; nx * ny];
        let mut exact = vec![0.0; nx * ny];
        for j in 0..ny {
            for i in 0..nx {
                let x = (i as f64 + 0.5) * h;
                let y = (j as f64 + 0.5) * h;
                let f = (PI * x / lx).cos() * (2.0 * PI * y / ly).cos();
                exact[j * nx + i] = f;
                // discrete eigenvalue of the Neumann 5-point operator
                let lam = (2.0 * (PI * h / lx).cos() - 2.0 + 2.0 * (2.0 * PI * h / ly).cos() - 2.0)
                    / (h * h);
                rhs[j * nx + i] = lam * f;
            }
        }
        let mut mg = Multigrid::new(nx, ny, h, false);
        mg.tolerance = 1e-10;
        let mut phi = vec![0.0; nx * ny];
        let rep = mg.solve(&rhs, &mut phi);
        assert!(rep.residual < 1e-10, "{rep:?}");
        assert!(rep.cycles < 20, "slow convergence: {rep:?}");
        let err = phi
            .iter()
            .zip(&exact)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(err < 1e-8, "err {err}");
    }

    #[test]
    fn periodic_random_rhs_converges() {
        let n = 64;
        let mut rhs: Vec<f64> = (0..n * n)
            .map(|k| ((k * 7919) % 101) as f64 / 50.0 - 1.0)
            .collect();
        let m = rhs.iter().sum::<f64>() / rhs.len() as f64;
        rhs.iter_mut().for_each(|r| *r -= m);
        let mut mg = Multigrid::new(n, n, 1.0 / n as f64, true);
        mg.tolerance = 1e-9;
        let mut phi = vec![0.0; n * n];
        let rep = mg.solve(&rhs, &mut phi);
        assert!(rep.residual < 1e-9 && rep.cycles < 20, "{rep:?}");
        assert!(phi.iter().sum::<f64>().abs() < 1e-9);
    }
}
