//! Kinematic vortex-street model of the agent's surroundings.
//!
//! A caricature of the two-cylinder wake, cheap enough to generate long
//! corpora in seconds: Oseen vortices of alternating sign are released from
//! the obstacle at the shedding frequency and convect downstream at a fixed
//! speed over a Gaussian mean-wake deficit. Surface pressure on the agent
//! follows from unsteady Bernoulli with the locally uniform cylinder slip
//! velocity; drag adds a quasi-steady term and a penalty for vortex impacts.

use serde::{Deserialize, Serialize};

use super::backend::{FlowBackend, Observation, N_SENSORS, X_AGENT, X_OBSTACLE};
use super::motion::Lateral;
use crate::cfd::sensor_position;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SurrogateParams {
    pub strouhal: f64,
    /// Convection speed of shed vortices.
    pub convection: f64,
    /// Lateral offset of the release points from the obstacle center.
    pub release_offset: f64,
    /// Circulation magnitude of each vortex.
    pub circulation: f64,
    /// Initial core radius; cores grow by viscous diffusion.
    pub core_radius: f64,
    pub viscosity: f64,
    /// Centerline velocity deficit of the mean wake and its half-width.
    pub wake_deficit: f64,
    pub wake_width: f64,
    /// Half-width of the sheltered wake core seen by the quasi-steady drag.
    pub shelter_width: f64,
    /// Quasi-steady drag coefficient on the relative velocity.
    pub base_drag: f64,
    /// Weight of the integrated surface-pressure drag.
    pub pressure_drag: f64,
    /// Drag added per vortex core overlapping the agent.
    pub impact_drag: f64,
    /// Reach of an impact as a fraction of body radius plus core radius.
    pub impact_width: f64,
    /// Time of the first release.
    pub first_release: f64,
}

impl Default for SurrogateParams {
    fn default() -> Self {
        Self {
            strouhal: 0.167,
            convection: 0.85,
            release_offset: 0.25,
            circulation: 2.0,
            core_radius: 0.3,
            viscosity: 0.01,
            wake_deficit: 0.5,
            wake_width: 0.8,
            shelter_width: 0.4,
            base_drag: 1.0,
            pressure_drag: 0.1,
            impact_drag: 0.3,
            impact_width: 0.5,
            first_release: 0.5 / 0.167,
        }
    }
}

impl SurrogateParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("strouhal", self.strouhal),
            ("convection", self.convection),
            ("core_radius", self.core_radius),
            ("wake_width", self.wake_width),
            ("shelter_width", self.shelter_width),
            ("impact_width", self.impact_width),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!(
                    "surrogate {name} must be positive, got {v}"
                )));
            }
        }
        let nonneg = [
            ("circulation", self.circulation),
            ("viscosity", self.viscosity),
            ("wake_deficit", self.wake_deficit),
            ("base_drag", self.base_drag),
            ("pressure_drag", self.pressure_drag),
            ("impact_drag", self.impact_drag),
            ("first_release", self.first_release),
        ];
        for (name, v) in nonneg {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::Config(format!(
                    "surrogate {name} must be non-negative, got {v}"
                )));
            }
        }
        if self.wake_deficit >= 1.0 {
            return Err(Error::Config(
                "surrogate wake_deficit must be below 1".into(),
            ));
        }
        Ok(())
    }

    pub fn release_interval(&self) -> f64 {
        0.5 / self.strouhal
    }

    /// Delay for a disturbance to convect from the obstacle to the agent.
    pub fn lag(&self) -> f64 {
        (X_AGENT - X_OBSTACLE) / self.convection
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vortex {
    pub t_release: f64,
    pub y: f64,
    /// Signed circulation, counterclockwise positive.
    pub gamma: f64,
}

impl Vortex {
    fn x(&self, p: &SurrogateParams, t: f64) -> f64 {
        X_OBSTACLE + p.convection * (t - self.t_release)
    }

    fn core2(&self, p: &SurrogateParams, t: f64) -> f64 {
        p.core_radius * p.core_radius + 4.0 * p.viscosity * (t - self.t_release).max(0.0)
    }

    /// Core pressure deficit as a pressure coefficient at `(x, y)`.
    fn core_cp(&self, p: &SurrogateParams, t: f64, x: f64, y: f64) -> f64 {
        let dx = x - self.x(p, t);
        let dy = y - self.y;
        let c2 = self.core2(p, t);
        let g = self.gamma / (2.0 * std::f64::consts::PI);
        -0.5 * g * g / c2 * oseen_pressure((dx * dx + dy * dy) / c2)
    }

    /// Induced velocity at `(x, y)`.
    fn velocity(&self, p: &SurrogateParams, t: f64, x: f64, y: f64) -> [f64; 2] {
        let dx = x - self.x(p, t);
        let dy = y - self.y;
        let r2 = dx * dx + dy * dy;
        if r2 < 1e-14 {
            return [0.0, 0.0];
        }
        let f =
            self.gamma / (2.0 * std::f64::consts::PI * r2) * (1.0 - (-r2 / self.core2(p, t)).exp());
        [-f * dy, f * dx]
    }
}

/// `int_X^inf (1 - e^-x)^2 / x^2 dx`, the radial pressure profile of a
/// Lamb-Oseen vortex in units of the squared core radius.
fn oseen_pressure(big_x: f64) -> f64 {
    // 8-point Gauss-Legendre on s in [1, 2] for int e^(-X s) / s ds
    const NODES: [(f64, f64); 4] = [
        (0.183_434_642_495_649_8, 0.362_683_783_378_362),
        (0.525_532_409_916_329, 0.313_706_645_877_887_3),
        (0.796_666_477_413_626_7, 0.222_381_034_453_374_5),
        (0.960_289_856_497_536_3, 0.101_228_536_290_376_3),
    ];
    let mut e = 0.0;
    for (x, w) in NODES {
        for s in [1.5 - 0.5 * x, 1.5 + 0.5 * x] {
            e += 0.5 * w * (-big_x * s).exp() / s;
        }
    }
    let head = if big_x < 1e-8 {
        big_x
    } else {
        (1.0 - (-big_x).exp()).powi(2) / big_x
    };
    head + 2.0 * e
}

pub struct SurrogateBackend {
    params: SurrogateParams,
    t: f64,
    next_release: usize,
    vortices: Vec<Vortex>,
}

impl SurrogateBackend {
    pub fn new(params: SurrogateParams) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            params,
            t: 0.0,
            next_release: 0,
            vortices: Vec::new(),
        })
    }

    pub fn params(&self) -> &SurrogateParams {
        &self.params
    }

    pub fn vortices(&self) -> &[Vortex] {
        &self.vortices
    }

    /// Release every vortex due up to `t` and drop those far downstream.
    fn release(&mut self, t: f64, obstacle: &mut dyn FnMut(f64) -> Lateral) {
        let p = &self.params;
        loop {
            let tr = p.first_release + self.next_release as f64 * p.release_interval();
            if tr > t + 1e-12 {
                break;
            }
            let upper = self.next_release.is_multiple_of(2);
            let yo = obstacle(tr).y;
            self.vortices.push(Vortex {
                t_release: tr,
                y: if upper {
                    yo + p.release_offset
                } else {
                    yo - p.release_offset
                },
                // the upper row of a Karman street turns clockwise
                gamma: if upper { -p.circulation } else { p.circulation },
            });
            self.next_release += 1;
        }
        let p = &self.params;
        self.vortices.retain(|v| v.x(p, t) < X_AGENT + 4.0);
    }

    /// Mean-wake streamwise velocity at lateral position `y` for a deficit
    /// of half-width `width`.
    fn wake_u(&self, y: f64, y_center: f64, width: f64) -> f64 {
        let s = (y - y_center) / width;
        1.0 - self.params.wake_deficit * (-s * s).exp()
    }

    /// Pressure coefficients and force coefficients on the agent at time
    /// `t`, given the agent kinematics and the lagged wake center.
    pub fn observe(&self, t: f64, agent: Lateral, wake_center: f64) -> Observation {
        let p = &self.params;
        let r = 0.5;
        let center = [X_AGENT, agent.y];
        let ds = 2.0 * std::f64::consts::PI * r / N_SENSORS as f64;
        let mut pressure = Vec::with_capacity(N_SENSORS);
        let (mut fx, mut fy) = (0.0, 0.0);
        for j in 0..N_SENSORS {
            let (x, y) = sensor_position(center, r, j, N_SENSORS);
            let (nx, ny) = ((x - center[0]) / r, (y - center[1]) / r);
            let mut w = [self.wake_u(y, wake_center, p.wake_width), 0.0];
            let mut dphi_dt = 0.0;
            let mut core = 0.0;
            for v in &self.vortices {
                core += v.core_cp(p, t, x, y);
                let u = v.velocity(p, t, x, y);
                w[0] += u[0];
                w[1] += u[1];
                // a vortex translating at speed c: d(phi)/dt = -c u_x
                dphi_dt -= p.convection * u[0];
            }
            w[1] -= agent.v;
            // slip velocity of a cylinder in a locally uniform stream
            let us = 2.0 * (-w[0] * ny + w[1] * nx);
            // added mass of the laterally accelerating body
            dphi_dt -= r * agent.a * ny;
            let cp = 1.0 - us * us - 2.0 * dphi_dt + core;
            fx -= cp * nx * ds;
            fy -= cp * ny * ds;
            pressure.push(cp);
        }
        let u_rel = [self.wake_u(agent.y, wake_center, p.shelter_width), -agent.v];
        let speed = u_rel[0].hypot(u_rel[1]);
        let mut impact = 0.0;
        for v in &self.vortices {
            let dx = v.x(p, t) - center[0];
            let dy = v.y - center[1];
            let l2 = (p.impact_width * (r + v.core2(p, t).sqrt())).powi(2);
            impact += (-(dx * dx + dy * dy) / l2).exp();
        }
        let cd = p.base_drag * speed * u_rel[0] + p.pressure_drag * fx + p.impact_drag * impact;
        Observation {
            t,
            pressure,
            cd,
            cl: fy,
        }
    }
}

impl FlowBackend for SurrogateBackend {
    fn name(&self) -> &'static str {
        "surrogate"
    }

    fn time(&self) -> f64 {
        self.t
    }

    fn advance(
        &mut self,
        t: f64,
        obstacle: &mut dyn FnMut(f64) -> Lateral,
        agent: &mut dyn FnMut(f64) -> Lateral,
    ) -> Result<Observation> {
        if t < self.t - 1e-12 {
            return Err(Error::State(format!(
                "cannot step back from {} to {t}",
                self.t
            )));
        }
        self.release(t, obstacle);
        self.t = t;
        let lagged = t - self.params.lag();
        let wake_center = if lagged > 0.0 {
            obstacle(lagged).y
        } else {
            obstacle(0.0).y
        };
        let obs = self.observe(t, agent(t), wake_center);
        if !obs.cd.is_finite() || obs.pressure.iter().any(|p| !p.is_finite()) {
            return Err(Error::Numerical(format!(
                "surrogate produced non-finite output at t = {t}"
            )));
        }
        Ok(obs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn still(_: f64) -> Lateral {
        Lateral::default()
    }

    #[test]
    fn symmetric_before_first_release() {
        let mut b = SurrogateBackend::new(SurrogateParams::default()).unwrap();
        let o = b.advance(1.0, &mut still, &mut still).unwrap();
        assert_eq!(o.pressure.len(), N_SENSORS);
        for j in 1..N_SENSORS {
            let d = (o.pressure[j] - o.pressure[N_SENSORS - j]).abs();
            assert!(d < 1e-12, "sensor {j}: {d}");
        }
        let (jmin, _) = o
            .pressure
            .iter()
            .enumerate()
            .fold((0, f64::MAX), |m, (j, &p)| if p < m.1 { (j, p) } else { m });
        assert!(jmin == 50 || jmin == 150, "{jmin}");
        assert!(o.cl.abs() < 1e-12);
    }

    #[test]
    fn oseen_pressure_limits() {
        assert!((oseen_pressure(0.0) - 2.0 * std::f64::consts::LN_2).abs() < 1e-9);
        // far field matches the point vortex, int_X^inf x^-2 dx = 1 / X
        let x = 40.0;
        assert!((oseen_pressure(x) - 1.0 / x).abs() < 1e-6);
        // monotone decreasing
        let mut prev = f64::MAX;
        for k in 0..100 {
            let v = oseen_pressure(k as f64 * 0.1);
            assert!(v < prev);
            prev = v;
        }
    }

    #[test]
    fn vortex_above_pulls_pressure_minimum_up() {
        let b = SurrogateBackend {
            params: SurrogateParams::default(),
            t: 0.0,
            next_release: usize::MAX / 2,
            vortices: vec![Vortex {
                t_release: 0.0,
                y: 0.9,
                gamma: 2.0,
            }],
        };
        // vortex directly above the agent when x = X_AGENT
        let t = (X_AGENT - X_OBSTACLE) / b.params.convection;
        let o = b.observe(t, Lateral::default(), 0.0);
        let (jmin, _) = o
            .pressure
            .iter()
            .enumerate()
            .fold((0, f64::MAX), |m, (j, &p)| if p < m.1 { (j, p) } else { m });
        let theta = 2.0 * std::f64::consts::PI * jmin as f64 / N_SENSORS as f64;
        assert!(
            theta > 0.0 && theta < std::f64::consts::PI,
            "argmin at {theta}"
        );
    }
}
