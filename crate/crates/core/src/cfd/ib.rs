//! Lagrangian markers and the regularized delta kernel.

use super::grid::Grid;

/// Three-point regularized delta function (support `|r| < 1.5`).
#[inline]
pub fn roma_delta(r: f64) -> f64 {
    let r = r.abs();
    if r <= 0.5 {
        (1.0 + (1.0 - 3.0 * r * r).sqrt()) / 3.0
    } else if r < 1.5 {
        let s = 1.0 - r;
        (5.0 - 3.0 * r - (1.0 - 3.0 * s * s).max(0.0).sqrt()) / 6.0
    } else {
        0.0
    }
}

/// Which staggered array a stencil refers to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Component {
    U,
    V,
}

/// Grid indices and weights of the delta stencil around `x` for one
/// velocity component: up to 4 x 4 points, zero-weight entries included.
pub struct Stencil {
    pub i0: isize,
    pub j0: isize,
    pub wx: [f64; 4],
    pub wy: [f64; 4],
}

impl Stencil {
    pub fn new(grid: &Grid, comp: Component, x: [f64; 2]) -> Self {
        let fx = (x[0] - grid.origin[0]) / grid.h;
        let fy = (x[1] - grid.origin[1]) / grid.h;
        // fractional coordinates in the index space of the component
        let (gx, gy) = match comp {
            Component::U => (fx, fy - 0.5),
            Component::V => (fx - 0.5, fy),
        };
        let i0 = gx.floor() as isize - 1;
        let j0 = gy.floor() as isize - 1;
        let mut wx = [0.0; 4];
        let mut wy = [0.0; 4];
        for a in 0..4 {
            wx[a] = roma_delta(gx - (i0 + a as isize) as f64);
            wy[a] = roma_delta(gy - (j0 + a as isize) as f64);
        }
        Self { i0, j0, wx, wy }
    }
}

/// Circular body described by equally spaced markers.
#[derive(Debug, Clone)]
pub struct Cylinder {
    pub radius: f64,
    /// Marker offsets from the center, at angles `2 pi k / n`.
    pub offsets: Vec<[f64; 2]>,
    /// Volume element of each marker, `arc length x h`.
    pub marker_volume: f64,
}

impl Cylinder {
    pub fn new(radius: f64, h: f64) -> Self {
        let n = ((2.0 * std::f64::consts::PI * radius / h).ceil() as usize).max(8);
        let offsets = (0..n)
            .map(|k| {
                let a = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
                [radius * a.cos(), radius * a.sin()]
            })
            .collect();
        let ds = 2.0 * std::f64::consts::PI * radius / n as f64;
        Self {
            radius,
            offsets,
            marker_volume: ds * h,
        }
    }

    pub fn n_markers(&self) -> usize {
        self.offsets.len()
    }

    pub fn area(&self) -> f64 {
        std::f64::consts::PI * self.radius * self.radius
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn delta_moments() {
        for k in 0..50 {
            let x = k as f64 / 50.0;
            let pts: Vec<f64> = (-3..=3).map(|i| i as f64 - x).collect();
            let m0: f64 = pts.iter().map(|&r| roma_delta(r)).sum();
            let m1: f64 = pts.iter().map(|&r| r * roma_delta(r)).sum();
            let m2: f64 = pts.iter().map(|&r| roma_delta(r).powi(2)).sum();
            assert!((m0 - 1.0).abs() < 1e-12, "sum at {x}: {m0}");
            assert!(m1.abs() < 1e-12, "first moment at {x}: {m1}");
            assert!((m2 - 0.5).abs() < 1e-12, "square sum at {x}: {m2}");
        }
    }

    #[test]
    fn marker_count_at_default_resolution() {
        let c = Cylinder::new(0.5, 1.0 / 24.0);
        assert!(c.n_markers() >= 60);
        let c = Cylinder::new(0.5, 1.0 / 32.0);
        assert_eq!(c.n_markers(), 101);
    }
}
