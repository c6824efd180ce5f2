//! Prescribed lateral motions of the upstream obstacle.

use serde::{Deserialize, Serialize};

use crate::cfd::kinematics::{MoveProfile, DEFAULT_RAMP};
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Largest lateral excursion of either body, in diameters.
pub const Y_LIMIT: f64 = 1.0;
/// Largest lateral speed of the obstacle.
pub const SPEED_LIMIT: f64 = 0.4;

/// Lateral position, velocity and acceleration at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Lateral {
    pub y: f64,
    pub v: f64,
    pub a: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MotionKind {
    /// Fixed on the centerline.
    Still,
    /// Uniformly drawn targets in `[-amplitude, amplitude]`, each reached at
    /// a uniformly drawn peak speed in `[min_speed, max_speed]`.
    RandomWaypoint {
        amplitude: f64,
        min_speed: f64,
        max_speed: f64,
    },
    /// Back and forth between the extremes with a rest at each one.
    Intermittent {
        amplitude: f64,
        speed: f64,
        pause: f64,
    },
    /// `y = amplitude (1 - cos(2 pi f t)) / 2`, confined to one side.
    OneSidedSine { amplitude: f64, frequency: f64 },
}

impl MotionKind {
    pub fn random_waypoint() -> Self {
        Self::RandomWaypoint {
            amplitude: 1.0,
            min_speed: 0.2,
            max_speed: 0.4,
        }
    }

    pub fn intermittent() -> Self {
        Self::Intermittent {
            amplitude: 1.0,
            speed: 0.3,
            pause: 5.0,
        }
    }

    pub fn one_sided_sine() -> Self {
        Self::OneSidedSine {
            amplitude: 1.0,
            frequency: 0.05,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Still => "still",
            Self::RandomWaypoint { .. } => "random-waypoint",
            Self::Intermittent { .. } => "intermittent",
            Self::OneSidedSine { .. } => "one-sided-sine",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let amp_ok = |a: f64| a.is_finite() && (0.0..=Y_LIMIT).contains(&a);
        let speed_ok = |s: f64| s.is_finite() && s > 0.0 && s <= SPEED_LIMIT;
        let bad = |m: String| Err(Error::Config(m));
        match *self {
            Self::Still => Ok(()),
            Self::RandomWaypoint {
                amplitude,
                min_speed,
                max_speed,
            } => {
                if !amp_ok(amplitude) {
                    return bad(format!("amplitude {amplitude} outside [0, {Y_LIMIT}]"));
                }
                if !speed_ok(min_speed) || !speed_ok(max_speed) || min_speed > max_speed {
                    return bad(format!("speed range [{min_speed}, {max_speed}] invalid"));
                }
                Ok(())
            }
            Self::Intermittent {
                amplitude,
                speed,
                pause,
            } => {
                if !amp_ok(amplitude) {
                    return bad(format!("amplitude {amplitude} outside [0, {Y_LIMIT}]"));
                }
                if !speed_ok(speed) || !(pause >= 0.0) {
                    return bad(format!("speed {speed} or pause {pause} invalid"));
                }
                Ok(())
            }
            Self::OneSidedSine {
                amplitude,
                frequency,
            } => {
                if !amp_ok(amplitude) {
                    return bad(format!("amplitude {amplitude} outside [0, {Y_LIMIT}]"));
                }
                let vmax = std::f64::consts::PI * amplitude * frequency;
                if !(frequency > 0.0) || vmax > SPEED_LIMIT {
                    return bad(format!("frequency {frequency} gives peak speed {vmax:.3}"));
                }
                Ok(())
            }
        }
    }
}

/// A deterministic trajectory `y(t)`; segments are generated on demand.
#[derive(Debug, Clone)]
pub struct Trajectory {
    kind: MotionKind,
    rng: Rng,
    segments: Vec<MoveProfile>,
}

/// Build the trajectory of `kind` for `seed`.
pub fn make_motion(kind: MotionKind, seed: u64) -> Result<Trajectory> {
    kind.validate()?;
    Ok(Trajectory {
        kind,
        rng: Rng::new(seed),
        segments: Vec::new(),
    })
}

impl Trajectory {
    pub fn kind(&self) -> MotionKind {
        self.kind
    }

    fn extend_to(&mut self, t: f64) {
        loop {
            let (t0, y0) = match self.segments.last() {
                Some(s) => (s.t_end(), s.y1),
                None => (0.0, 0.0),
            };
            if t0 > t && !self.segments.is_empty() {
                return;
            }
            let seg = match self.kind {
                MotionKind::RandomWaypoint {
                    amplitude,
                    min_speed,
                    max_speed,
                } => {
                    let target = self.rng.uniform(-amplitude, amplitude);
                    let peak = self.rng.uniform(min_speed, max_speed);
                    let d = (target - y0).abs();
                    MoveProfile {
                        t0,
                        y0,
                        y1: target,
                        duration: d / (peak * (1.0 - DEFAULT_RAMP)),
                        ramp: DEFAULT_RAMP,
                    }
                }
                MotionKind::Intermittent {
                    amplitude,
                    speed,
                    pause,
                } => {
                    let moving = self.segments.len().is_multiple_of(2);
                    if moving {
                        let target = if y0 < amplitude - 1e-12 {
                            amplitude
                        } else {
                            -amplitude
                        };
                        let d = (target - y0).abs();
                        MoveProfile {
                            t0,
                            y0,
                            y1: target,
                            duration: d / (speed * (1.0 - DEFAULT_RAMP)),
                            ramp: DEFAULT_RAMP,
                        }
                    } else {
                        MoveProfile {
                            t0,
                            y0,
                            y1: y0,
                            duration: pause,
                            ramp: DEFAULT_RAMP,
                        }
                    }
                }
                MotionKind::Still | MotionKind::OneSidedSine { .. } => return,
            };
            if seg.duration <= 0.0 {
                // zero-length draw; push a hold so time still advances
                self.segments.push(MoveProfile {
                    duration: 0.1,
                    ..seg
                });
            } else {
                self.segments.push(seg);
            }
        }
    }

    /// Position, velocity and acceleration at `t >= 0`.
    pub fn eval(&mut self, t: f64) -> Lateral {
        match self.kind {
            MotionKind::Still => Lateral::default(),
            MotionKind::OneSidedSine {
                amplitude,
                frequency,
            } => {
                let w = 2.0 * std::f64::consts::PI * frequency;
                Lateral {
                    y: 0.5 * amplitude * (1.0 - (w * t).cos()),
                    v: 0.5 * amplitude * w * (w * t).sin(),
                    a: 0.5 * amplitude * w * w * (w * t).cos(),
                }
            }
            _ => {
                self.extend_to(t);
                let k = self.segments.partition_point(|s| s.t_end() <= t);
                let s = self.segments[k.min(self.segments.len() - 1)];
                if s.y0 == s.y1 {
                    return Lateral {
                        y: s.y0,
                        v: 0.0,
                        a: 0.0,
                    };
                }
                let (y, v, a) = s.eval(t);
                Lateral { y, v, a }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn still_is_zero() {
        let mut m = make_motion(MotionKind::Still, 1).unwrap();
        for k in 0..100 {
            assert_eq!(m.eval(k as f64 * 0.7), Lateral::default());
        }
    }

    #[test]
    fn random_waypoint_is_deterministic_and_bounded() {
        let mut a = make_motion(MotionKind::random_waypoint(), 9).unwrap();
        let mut b = make_motion(MotionKind::random_waypoint(), 9).unwrap();
        let mut prev = 0.0;
        for k in 0..5000 {
            let t = k as f64 * 0.1;
            let (x, y) = (a.eval(t), b.eval(t));
            assert_eq!(x, y);
            assert!(x.y.abs() <= 1.0 + 1e-9);
            assert!(x.v.abs() <= SPEED_LIMIT + 1e-9);
            assert!((x.y - prev).abs() <= 0.1 * SPEED_LIMIT + 1e-9);
            prev = x.y;
        }
        // evaluation order does not matter
        let mut c = make_motion(MotionKind::random_waypoint(), 9).unwrap();
        assert_eq!(c.eval(321.4), a.eval(321.4));
    }

    #[test]
    fn intermittent_pauses_after_each_extremum() {
        let mut m = make_motion(MotionKind::intermittent(), 0).unwrap();
        let dt = 0.01;
        let mut k = 1;
        let mut pauses = 0;
        while k as f64 * dt < 60.0 {
            let s = m.eval(k as f64 * dt);
            if (s.y.abs() - 1.0).abs() < 1e-12 && m.eval((k - 1) as f64 * dt).v != 0.0 {
                // just arrived: stationary for the next 5 time units
                let t0 = k as f64 * dt;
                for q in 0..500 {
                    assert_eq!(m.eval(t0 + q as f64 * dt).v, 0.0);
                }
                pauses += 1;
            }
            k += 1;
        }
        assert!(pauses >= 3, "{pauses}");
    }

    #[test]
    fn one_sided_sine_stays_on_one_side() {
        let mut m = make_motion(MotionKind::one_sided_sine(), 0).unwrap();
        for k in 0..1000 {
            let s = m.eval(k as f64 * 0.1);
            assert!((0.0..=1.0).contains(&s.y));
        }
    }

    #[test]
    fn amplitude_above_one_is_rejected() {
        let kind = MotionKind::RandomWaypoint {
            amplitude: 1.5,
            min_speed: 0.2,
            max_speed: 0.4,
        };
        assert!(matches!(make_motion(kind, 0), Err(Error::Config(_))));
    }
}
