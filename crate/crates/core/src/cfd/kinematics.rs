//! Rigid-body kinematics for the immersed cylinders.

use crate::error::{Error, Result};

/// Instantaneous rigid-body state handed to the solver for each substep.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BodyState {
    pub center: [f64; 2],
    pub velocity: [f64; 2],
    pub acceleration: [f64; 2],
    /// Counterclockwise angular velocity, used only to trip shedding.
    pub omega: f64,
}

impl BodyState {
    pub fn fixed(x: f64, y: f64) -> Self {
        Self {
            center: [x, y],
            ..Self::default()
        }
    }

    /// Velocity of the material point at offset `r` from the center.
    pub fn point_velocity(&self, r: [f64; 2]) -> [f64; 2] {
        [
            self.velocity[0] - self.omega * r[1],
            self.velocity[1] + self.omega * r[0],
        ]
    }
}

/// Fraction of the move spent in each cosine ramp.
pub const DEFAULT_RAMP: f64 = 0.1;

/// A single lateral move: constant speed with cosine-shaped acceleration
/// and deceleration phases. The average speed equals `distance / duration`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MoveProfile {
    pub t0: f64,
    pub y0: f64,
    pub y1: f64,
    pub duration: f64,
    pub ramp: f64,
}

impl MoveProfile {
    pub fn hold(t0: f64, y: f64) -> Self {
        Self {
            t0,
            y0: y,
            y1: y,
            duration: 0.0,
            ramp: DEFAULT_RAMP,
        }
    }

    pub fn t_end(&self) -> f64 {
        self.t0 + self.duration
    }

    /// Plateau speed, `distance / (duration (1 - ramp))`.
    pub fn peak_speed(&self) -> f64 {
        if self.duration == 0.0 {
            0.0
        } else {
            (self.y1 - self.y0).abs() / (self.duration * (1.0 - self.ramp))
        }
    }

    /// `(y, dy/dt, d2y/dt2)` at time `t`; constant outside the move.
    pub fn eval(&self, t: f64) -> (f64, f64, f64) {
        if self.duration == 0.0 || t <= self.t0 {
            return (self.y0, 0.0, 0.0);
        }
        if t >= self.t_end() {
            return (self.y1, 0.0, 0.0);
        }
        let d = self.y1 - self.y0;
        let tau = (t - self.t0) / self.duration;
        let r = self.ramp;
        // normalized shape g(tau) with unit plateau; integral over [0,1] is 1 - r
        let norm = 1.0 - r;
        let pi = std::f64::consts::PI;
        let up = |s: f64| -> (f64, f64, f64) {
            if r == 0.0 {
                return (s, 1.0, 0.0);
            }
            let a = pi * s / r;
            (
                0.5 * s - r / (2.0 * pi) * a.sin(),
                0.5 * (1.0 - a.cos()),
                0.5 * pi / r * a.sin(),
            )
        };
        let (g_int, g, dg) = if tau < r {
            up(tau)
        } else if tau <= 1.0 - r {
            (0.5 * r + (tau - r), 1.0, 0.0)
        } else {
            let (i, g, dg) = up(1.0 - tau);
            (norm - i, g, -dg)
        };
        let y = self.y0 + d * g_int / norm;
        let v = d * g / (norm * self.duration);
        let a = d * dg / (norm * self.duration * self.duration);
        (y, v, a)
    }
}

/// Plan a move from `y_now` to `y_target` at average speed `speed`.
///
/// A zero-length move yields a zero-duration profile.
pub fn set_body_motion(
    t0: f64,
    y_now: f64,
    y_target: f64,
    speed: f64,
    ramp: f64,
) -> Result<MoveProfile> {
    if !y_target.is_finite() || y_target.abs() > 1.0 + 1e-12 {
        return Err(Error::Action(format!("target {y_target} outside [-1, 1]")));
    }
    if !(speed > 0.0) || !speed.is_finite() {
        return Err(Error::Action(format!("speed {speed} must be positive")));
    }
    if !(0.0..0.5).contains(&ramp) {
        return Err(Error::Action(format!(
            "ramp fraction {ramp} outside [0, 0.5)"
        )));
    }
    let distance = (y_target - y_now).abs();
    Ok(MoveProfile {
        t0,
        y0: y_now,
        y1: y_target,
        duration: distance / speed,
        ramp,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn travel_time_is_distance_over_speed() {
        let m = set_body_motion(0.0, 0.4, -0.7, 0.3, DEFAULT_RAMP).unwrap();
        assert!((m.duration - 11.0 / 3.0).abs() < 1e-12);
        assert!((m.eval(m.t_end()).0 + 0.7).abs() < 1e-12);
        // midpoint by symmetry
        assert!((m.eval(m.duration / 2.0).0 + 0.15).abs() < 1e-12);
    }

    #[test]
    fn degenerate_move() {
        let m = set_body_motion(2.0, 0.3, 0.3, 0.2, DEFAULT_RAMP).unwrap();
        assert_eq!(m.duration, 0.0);
        assert_eq!(m.eval(2.5), (0.3, 0.0, 0.0));
    }

    #[test]
    fn rejects_out_of_range_target() {
        assert!(matches!(
            set_body_motion(0.0, 0.0, 1.2, 0.3, DEFAULT_RAMP),
            Err(Error::Action(_))
        ));
    }

    #[test]
    fn velocity_and_acceleration_match_differences() {
        let m = set_body_motion(1.0, -0.8, 0.9, 0.37, DEFAULT_RAMP).unwrap();
        let e = 1e-6;
        for k in 1..200 {
            let t = 1.0 + m.duration * k as f64 / 200.0;
            let (_, v, a) = m.eval(t);
            let vfd = (m.eval(t + e).0 - m.eval(t - e).0) / (2.0 * e);
            let afd = (m.eval(t + e).1 - m.eval(t - e).1) / (2.0 * e);
            assert!((v - vfd).abs() < 1e-7, "v at {t}");
            assert!((a - afd).abs() < 1e-5, "a at {t}");
            assert!(v.abs() <= m.peak_speed() + 1e-12);
        }
    }

    #[test]
    fn point_velocity_without_rotation_is_center_velocity() {
        let s = BodyState {
            center: [8.0, 0.1],
            velocity: [0.0, 0.31],
            acceleration: [0.0, 0.0],
            omega: 0.0,
        };
        let pv = s.point_velocity([0.3, -0.4]);
        assert!((pv[0] - 0.0).abs() < 1e-12 && (pv[1] - 0.31).abs() < 1e-12);
    }
}
