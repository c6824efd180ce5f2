//! Two-step-ahead cosine prediction loss and the predictor network.

use crate::error::{Error, Result};
use crate::nn::{cosine_similarity, layers, Graph, Init, LinearVars, ParameterSet, Real, Var};
use crate::rng::Rng;

use super::network::{H_DIM, Z_DIM};

pub const PREDICTOR: &str = "pred";

/// Add `pred.l1` (64 -> 64) and `pred.l2` (64 -> 100).
pub fn init_predictor<T: Real>(params: &mut ParameterSet<T>, rng: &mut Rng) -> Result<()> {
    layers::add_linear(
        params,
        &format!("{PREDICTOR}.l1"),
        H_DIM,
        H_DIM,
        Init::HeUniform,
        rng,
    )?;
    layers::add_linear(
        params,
        &format!("{PREDICTOR}.l2"),
        H_DIM,
        2 * Z_DIM,
        Init::XavierUniform,
        rng,
    )
}

#[derive(Debug, Clone, Copy)]
pub struct PredictorVars {
    pub l1: LinearVars,
    pub l2: LinearVars,
}

impl PredictorVars {
    pub fn bind<T: Real>(g: &mut Graph<T>, params: &ParameterSet<T>, frozen: bool) -> Result<Self> {
        Ok(Self {
            l1: LinearVars::bind(g, params, &format!("{PREDICTOR}.l1"), frozen)?,
            l2: LinearVars::bind(g, params, &format!("{PREDICTOR}.l2"), frozen)?,
        })
    }

    /// `h: [batch, 64]` -> predictions `(z_hat_1, z_hat_2)`, each `[batch, 50]`.
    pub fn forward<T: Real>(&self, g: &mut Graph<T>, h: Var) -> Result<(Var, Var)> {
        let a = self.l1.forward(g, h)?;
        let a = g.relu(a);
        let out = self.l2.forward(g, a)?;
        Ok((
            g.slice_cols(out, 0, Z_DIM)?,
            g.slice_cols(out, Z_DIM, Z_DIM)?,
        ))
    }
}

/// Batch mean of `-(cos(z1, z1_hat) + cos(z2, z2_hat))`.
pub fn cpc_loss_graph<T: Real>(
    g: &mut Graph<T>,
    pred: (Var, Var),
    z1: Var,
    z2: Var,
) -> Result<Var> {
    let c1 = g.cosine_rows(pred.0, z1)?;
    let c2 = g.cosine_rows(pred.1, z2)?;
    let s = g.add(c1, c2)?;
    let m = g.mean(s);
    Ok(g.affine(m, -1.0, 0.0))
}

/// Loss for one dynamic feature and its two targets.
pub fn cpc_loss<T: Real>(params: &ParameterSet<T>, h: &[T], z1: &[T], z2: &[T]) -> Result<T> {
    if h.len() != H_DIM || z1.len() != Z_DIM || z2.len() != Z_DIM {
        return Err(Error::shape(format!(
            "cpc_loss expects h of {H_DIM} and targets of {Z_DIM}"
        )));
    }
    let (p1, p2) = predict(params, h)?;
    cpc_loss_from_predictions(&p1, &p2, z1, z2)
}

/// The loss given predictions directly.
pub fn cpc_loss_from_predictions<T: Real>(p1: &[T], p2: &[T], z1: &[T], z2: &[T]) -> Result<T> {
    let c = cosine_similarity(p1, z1)? + cosine_similarity(p2, z2)?;
    Ok(-c)
}

/// Predicted next two spatial features from one dynamic feature.
pub fn predict<T: Real>(params: &ParameterSet<T>, h: &[T]) -> Result<(Vec<T>, Vec<T>)> {
    let mut g = Graph::new();
    let vars = PredictorVars::bind(&mut g, params, true)?;
    let x = g.constant(crate::nn::Tensor::new(&[1, H_DIM], h.to_vec())?);
    let (a, b) = vars.forward(&mut g, x)?;
    Ok((g.value(a).data().to_vec(), g.value(b).data().to_vec()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(rng: &mut Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.normal()).collect()
    }

    #[test]
    fn perfect_anti_and_scaled_predictions() {
        let mut rng = Rng::new(1);
        let z1 = unit(&mut rng, Z_DIM);
        let z2 = unit(&mut rng, Z_DIM);
        let l = cpc_loss_from_predictions(&z1, &z2, &z1, &z2).unwrap();
        assert!((l + 2.0).abs() < 1e-12);
        let n1: Vec<f64> = z1.iter().map(|v| -v).collect();
        let n2: Vec<f64> = z2.iter().map(|v| -v).collect();
        let l = cpc_loss_from_predictions(&n1, &n2, &z1, &z2).unwrap();
        assert!((l - 2.0).abs() < 1e-12);
        let p1 = unit(&mut rng, Z_DIM);
        let p2 = unit(&mut rng, Z_DIM);
        let s1: Vec<f64> = p1.iter().map(|v| 3.0 * v).collect();
        let s2: Vec<f64> = p2.iter().map(|v| 3.0 * v).collect();
        let a = cpc_loss_from_predictions(&p1, &p2, &z1, &z2).unwrap();
        let b = cpc_loss_from_predictions(&s1, &s2, &z1, &z2).unwrap();
        assert!((a - b).abs() < 1e-12);
        assert!((-2.0..=2.0).contains(&a));
    }

    #[test]
    fn zero_target_is_a_numerical_error() {
        let z = vec![0.0f64; Z_DIM];
        let p = vec![1.0f64; Z_DIM];
        assert!(matches!(
            cpc_loss_from_predictions(&p, &p, &z, &p),
            Err(Error::Numerical(_))
        ));
    }
}
