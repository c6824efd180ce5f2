//! Squashed-Gaussian policy and value networks, each with its own
//! perception trunk.

use std::f64::consts::PI;

use crate::env::ActionCommand;
use crate::error::{Error, Result};
use crate::nn::{layers, Graph, Init, LinearVars, ParameterSet, Tensor, Var};
use crate::perception::{init_trunk, TrunkVars, H_DIM, SENSORS, WINDOW};
use crate::rng::Rng;

pub const ACTION_DIM: usize = 2;

/// Policy and value parameter sets.
#[derive(Debug, Clone)]
pub struct Agent {
    pub policy: ParameterSet<f32>,
    pub value: ParameterSet<f32>,
}

impl Agent {
    /// Random heads; both trunks copied from `pretrained` when given.
    pub fn new(pretrained: Option<&ParameterSet<f32>>, seed: u64) -> Result<Self> {
        let mut rng = Rng::new(seed).split(41);
        let mut policy = ParameterSet::new();
        init_trunk(&mut policy, "", &mut rng)?;
        layers::add_linear(
            &mut policy,
            "pi.l1",
            H_DIM,
            H_DIM,
            Init::HeUniform,
            &mut rng,
        )?;
        layers::add_linear(
            &mut policy,
            "pi.mean",
            H_DIM,
            ACTION_DIM,
            Init::XavierUniform,
            &mut rng,
        )?;
        // a near-zero output layer keeps early updates from swinging the mean
        if let Some(w) = policy.get_mut("pi.mean.w") {
            w.data_mut().iter_mut().for_each(|v| *v *= 0.01);
        }
        let mut value = ParameterSet::new();
        init_trunk(&mut value, "", &mut rng)?;
        layers::add_linear(&mut value, "v.l1", H_DIM, H_DIM, Init::HeUniform, &mut rng)?;
        layers::add_linear(&mut value, "v.out", H_DIM, 1, Init::XavierUniform, &mut rng)?;
        if let Some(src) = pretrained {
            for p in [&mut policy, &mut value] {
                p.copy_prefix_from(src, "enc.")?;
                p.copy_prefix_from(src, "gru.")?;
            }
        }
        Ok(Self { policy, value })
    }

    /// Both networks in one set, names prefixed `policy/` and `value/`.
    pub fn to_params(&self) -> ParameterSet<f32> {
        let mut out = ParameterSet::new();
        for (prefix, set) in [("policy/", &self.policy), ("value/", &self.value)] {
            for (name, t) in set.iter() {
                out.insert(&format!("{prefix}{name}"), t.clone())
                    .expect("names are unique");
            }
        }
        out
    }

    /// Inverse of [`Agent::to_params`]; every parameter of a fresh agent
    /// must be present with the same shape.
    pub fn from_params(params: &ParameterSet<f32>) -> Result<Self> {
        let mut agent = Self::new(None, 0)?;
        for (prefix, set) in [("policy/", &mut agent.policy), ("value/", &mut agent.value)] {
            for (name, t) in set.iter_mut() {
                let key = format!("{prefix}{name}");
                let src = params
                    .get(&key)
                    .ok_or_else(|| Error::Format(format!("agent checkpoint lacks `{key}`")))?;
                if src.shape() != t.shape() {
                    return Err(Error::Format(format!(
                        "agent checkpoint `{key}` has shape {:?}",
                        src.shape()
                    )));
                }
                *t = src.clone();
            }
        }
        Ok(agent)
    }
}

/// Map a pre-squash sample to a legal action.
pub fn squash(u: [f64; 2]) -> ActionCommand {
    let a_pos = u[0].tanh().clamp(-1.0, 1.0);
    let a_vel = (0.3 + 0.1 * u[1].tanh()).clamp(0.2, 0.4);
    ActionCommand::new(a_pos, a_vel).expect("squashed action is legal")
}

/// `log N(u; mean, sigma^2)` summed over action dimensions.
pub fn gaussian_log_prob(u: [f64; 2], mean: [f64; 2], sigma: f64) -> f64 {
    (0..ACTION_DIM)
        .map(|i| {
            let d = (u[i] - mean[i]) / sigma;
            -0.5 * d * d - sigma.ln() - 0.5 * (2.0 * PI).ln()
        })
        .sum()
}

/// Log-density of the squashed action, including the change of variables.
pub fn action_log_prob(u: [f64; 2], mean: [f64; 2], sigma: f64) -> f64 {
    let jac: f64 = (1.0 - u[0].tanh().powi(2)).ln() + (0.1 * (1.0 - u[1].tanh().powi(2))).ln();
    gaussian_log_prob(u, mean, sigma) - jac
}

/// Stochastic policy sample: action, pre-squash draw and log-probability.
#[derive(Debug, Clone, Copy)]
pub struct PolicySample {
    pub action: ActionCommand,
    pub u: [f64; 2],
    pub mean: [f64; 2],
    pub log_prob: f64,
}

pub fn policy_sample(mean: [f64; 2], sigma: f64, rng: &mut Rng) -> PolicySample {
    let u = [
        mean[0] + sigma * rng.normal(),
        mean[1] + sigma * rng.normal(),
    ];
    PolicySample {
        action: squash(u),
        u,
        mean,
        log_prob: action_log_prob(u, mean, sigma),
    }
}

/// Build windows (`windows[b]` lists row indices, oldest first) over a
/// `[rows, SENSORS]` pressure buffer and evaluate a trunk and a two-layer
/// head on them. Returns the head output var `[batch, out]`.
pub fn head_forward(
    g: &mut Graph<f32>,
    params: &ParameterSet<f32>,
    head: (&str, &str),
    rows: &[f32],
    windows: &[Vec<usize>],
    frozen: bool,
) -> Result<Var> {
    let n = rows.len() / SENSORS;
    let trunk = TrunkVars::bind(g, params, "", frozen)?;
    let l1 = LinearVars::bind(g, params, head.0, frozen)?;
    let l2 = LinearVars::bind(g, params, head.1, frozen)?;
    let x = g.constant(Tensor::new(&[n, SENSORS], rows.to_vec())?);
    let z = trunk.enc.forward(g, x)?;
    let h = trunk.dynamic(g, z, windows)?;
    let a = l1.forward(g, h)?;
    let a = g.relu(a);
    l2.forward(g, a)
}

/// Action mean for one window.
pub fn policy_mean(params: &ParameterSet<f32>, window: &[f32]) -> Result<[f64; 2]> {
    let mut g = Graph::new();
    let idx = vec![(0..WINDOW).collect()];
    let out = head_forward(&mut g, params, ("pi.l1", "pi.mean"), window, &idx, true)?;
    let d = g.value(out).data();
    Ok([d[0] as f64, d[1] as f64])
}

/// Value estimate for one window.
pub fn value_estimate(params: &ParameterSet<f32>, window: &[f32]) -> Result<f64> {
    let mut g = Graph::new();
    let idx = vec![(0..WINDOW).collect()];
    let out = head_forward(&mut g, params, ("v.l1", "v.out"), window, &idx, true)?;
    Ok(g.value(out).data()[0] as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// `E[f(m + s Z)]` by composite Simpson over `[-8, 8]` standard deviations.
    fn expect(f: impl Fn(f64) -> f64, m: f64, s: f64) -> f64 {
        let n = 4000;
        let h = 16.0 / n as f64;
        let mut acc = 0.0;
        for k in 0..=n {
            let z = -8.0 + k as f64 * h;
            let w = if k == 0 || k == n {
                1.0
            } else if k % 2 == 1 {
                4.0
            } else {
                2.0
            };
            acc += w * f(m + s * z) * (-0.5 * z * z).exp();
        }
        acc * h / 3.0 / (2.0 * PI).sqrt()
    }

    #[test]
    fn sample_means_match_quadrature() {
        let mean = [0.4, -0.7];
        let sigma = 0.3;
        let mut rng = Rng::new(8);
        let n = 10_000;
        let (mut s0, mut s1, mut q0, mut q1) = (0.0, 0.0, 0.0, 0.0);
        for _ in 0..n {
            let a = policy_sample(mean, sigma, &mut rng).action;
            s0 += a.a_pos();
            s1 += a.a_vel();
            q0 += a.a_pos().powi(2);
            q1 += a.a_vel().powi(2);
            assert!((0.2..=0.4).contains(&a.a_vel()));
        }
        let (m0, m1) = (s0 / n as f64, s1 / n as f64);
        let se0 = ((q0 / n as f64 - m0 * m0) / n as f64).sqrt();
        let se1 = ((q1 / n as f64 - m1 * m1) / n as f64).sqrt();
        let want0 = expect(f64::tanh, mean[0], sigma);
        let want1 = expect(|u| 0.3 + 0.1 * u.tanh(), mean[1], sigma);
        assert!((m0 - want0).abs() < 3.0 * se0, "{m0} vs {want0}");
        assert!((m1 - want1).abs() < 3.0 * se1, "{m1} vs {want1}");
    }

    #[test]
    fn vanishing_sigma_gives_the_mean_action() {
        let mut rng = Rng::new(1);
        let s = policy_sample([0.3, 1.2], 1e-12, &mut rng);
        let want = squash([0.3, 1.2]);
        assert!((s.action.a_pos() - want.a_pos()).abs() < 1e-10);
        assert!((s.action.a_vel() - want.a_vel()).abs() < 1e-10);
    }

    #[test]
    fn log_prob_integrates_to_one_in_action_space() {
        // density of a_pos alone with the a_vel factor marginalized
        let (m, s) = (0.2, 0.5);
        let n = 20_000;
        let mut total = 0.0;
        for k in 0..n {
            let a = -1.0 + (k as f64 + 0.5) * 2.0 / n as f64;
            let u = a.atanh();
            let d =
                -0.5 * ((u - m) / s).powi(2) - s.ln() - 0.5 * (2.0 * PI).ln() - (1.0 - a * a).ln();
            total += d.exp() * 2.0 / n as f64;
        }
        assert!((total - 1.0).abs() < 1e-3, "{total}");
        let u = [0.1, -0.2];
        let lp = action_log_prob(u, [0.0, 0.0], 0.3);
        let manual = gaussian_log_prob(u, [0.0, 0.0], 0.3)
            - (1.0 - 0.1f64.tanh().powi(2)).ln()
            - (0.1 * (1.0 - 0.2f64.tanh().powi(2))).ln();
        assert!((lp - manual).abs() < 1e-12);
    }

    #[test]
    fn pretrained_trunk_is_copied_into_both_networks() {
        let mut rng = Rng::new(2);
        let mut src = ParameterSet::new();
        init_trunk(&mut src, "", &mut rng).unwrap();
        let agent = Agent::new(Some(&src), 5).unwrap();
        for (name, t) in src.iter() {
            assert_eq!(agent.policy.get(name).unwrap(), t);
            assert_eq!(agent.value.get(name).unwrap(), t);
        }
    }
}
