use indexmap::IndexMap;

use crate::error::{Error, Result};

use super::params::ParameterSet;
use super::real::Real;
use super::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        Self {
            lr,
            ..Self::default()
        }
    }
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam optimizer state: first/second moments per parameter and a step
/// counter.
#[derive(Debug, Clone)]
pub struct AdamState<T: Real = f32> {
    pub config: AdamConfig,
    step: u64,
    moments: IndexMap<String, (Vec<T>, Vec<T>)>,
}

impl<T: Real> AdamState<T> {
    pub fn new(config: AdamConfig, params: &ParameterSet<T>) -> Self {
        let moments = params
            .iter()
            .map(|(k, v)| {
                (
                    k.to_string(),
                    (vec![T::zero(); v.numel()], vec![T::zero(); v.numel()]),
                )
            })
            .collect();
        Self {
            config,
            step: 0,
            moments,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// Apply one bias-corrected Adam update in place. Parameters without an
    /// entry in `grads` are treated as having zero gradient.
    pub fn step(
        &mut self,
        params: &mut ParameterSet<T>,
        grads: &IndexMap<String, Tensor<T>>,
    ) -> Result<()> {
        for (name, g) in grads {
            let p = params
                .get(name)
                .ok_or_else(|| Error::config(format!("gradient for unknown parameter `{name}`")))?;
            if p.shape() != g.shape() {
                return Err(Error::shape(format!(
                    "gradient of `{name}` has shape {:?}, parameter {:?}",
                    g.shape(),
                    p.shape()
                )));
            }
            if !g.is_finite() {
                return Err(Error::Training {
                    param: name.clone(),
                    reason: "non-finite gradient".into(),
                });
            }
        }
        self.step += 1;
        let c = self.config;
        let t = self.step as i32;
        let (b1, b2) = (T::from_f64(c.beta1), T::from_f64(c.beta2));
        let bc1 = T::from_f64(1.0 - c.beta1.powi(t));
        let bc2 = T::from_f64(1.0 - c.beta2.powi(t));
        let (lr, eps) = (T::from_f64(c.lr), T::from_f64(c.eps));
        for (name, p) in params.iter_mut() {
            let (m, v) = self
                .moments
                .entry(name.to_string())
                .or_insert_with(|| (vec![T::zero(); p.numel()], vec![T::zero(); p.numel()]));
            let g = grads.get(name);
            for i in 0..p.numel() {
                let gi = g.map_or(T::zero(), |g| g.data()[i]);
                m[i] = b1 * m[i] + (T::one() - b1) * gi;
                v[i] = b2 * v[i] + (T::one() - b2) * gi * gi;
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                p.data_mut()[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_set(x: f64) -> ParameterSet<f64> {
        let mut p = ParameterSet::new();
        p.insert("x", Tensor::scalar(x)).unwrap();
        p
    }

    fn grad(g: f64) -> IndexMap<String, Tensor<f64>> {
        IndexMap::from([("x".to_string(), Tensor::scalar(g))])
    }

    #[test]
    fn first_step_is_sign_normalized() {
        let mut p = scalar_set(0.0);
        let mut s = AdamState::new(AdamConfig::with_lr(0.001), &p);
        s.step(&mut p, &grad(0.2)).unwrap();
        let x = p.get("x").unwrap().data()[0];
        assert!((x + 0.001 * 0.2 / (0.2 + 1e-8)).abs() < 1e-15);
        assert!((x + 0.001).abs() < 1e-10);
    }

    #[test]
    fn zero_gradient_is_a_fixed_point() {
        let mut p = scalar_set(1.5);
        let mut s = AdamState::new(AdamConfig::default(), &p);
        for _ in 0..5 {
            s.step(&mut p, &grad(0.0)).unwrap();
        }
        assert_eq!(p.get("x").unwrap().data()[0], 1.5);
        assert_eq!(s.step_count(), 5);
    }

    #[test]
    fn three_steps_match_hand_recurrence() {
        let gs = [0.5, -0.25, 0.125];
        let mut p = scalar_set(1.0);
        let mut s = AdamState::new(AdamConfig::with_lr(0.01), &p);
        for &g in &gs {
            s.step(&mut p, &grad(g)).unwrap();
        }
        // Hand evaluation of the recurrence.
        let (b1, b2, lr, eps) = (0.9f64, 0.999f64, 0.01f64, 1e-8f64);
        let m1 = (1.0 - b1) * 0.5;
        let v1 = (1.0 - b2) * 0.25;
        let x1 = 1.0 - lr * (m1 / (1.0 - b1)) / ((v1 / (1.0 - b2)).sqrt() + eps);
        let m2 = b1 * m1 + (1.0 - b1) * -0.25;
        let v2 = b2 * v1 + (1.0 - b2) * 0.0625;
        let x2 = x1 - lr * (m2 / (1.0 - b1 * b1)) / ((v2 / (1.0 - b2 * b2)).sqrt() + eps);
        let m3 = b1 * m2 + (1.0 - b1) * 0.125;
        let v3 = b2 * v2 + (1.0 - b2) * 0.015625;
        let x3 = x2 - lr * (m3 / (1.0 - b1.powi(3))) / ((v3 / (1.0 - b2.powi(3))).sqrt() + eps);
        assert!((p.get("x").unwrap().data()[0] - x3).abs() < 1e-8);
    }

    #[test]
    fn non_finite_gradient_names_the_parameter() {
        let mut p = scalar_set(0.0);
        let mut s = AdamState::new(AdamConfig::default(), &p);
        let err = s.step(&mut p, &grad(f64::NAN)).unwrap_err();
        assert!(matches!(err, Error::Training { ref param, .. } if param == "x"));
        assert_eq!(s.step_count(), 0);
    }
}
