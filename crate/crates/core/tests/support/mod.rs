//! Oracles shared by the integration test targets.
#![allow(dead_code)]

use flowsense::nn::{Graph, ParameterSet, Tensor};
use flowsense::perception::cpc::{cpc_loss_graph, init_predictor, PredictorVars};
use flowsense::perception::{init_trunk, TrunkVars, SENSORS, WINDOW};
use flowsense::rng::Rng;

/// Random f64 perception + predictor parameters and a pressure block of
/// `windows` consecutive windows plus the two rows after the last one.
pub struct GradProblem {
    pub params: ParameterSet<f64>,
    pub pressures: Vec<f64>,
    pub windows: usize,
}

impl GradProblem {
    pub fn new(seed: u64, windows: usize) -> Self {
        let mut rng = Rng::new(seed);
        let mut params = ParameterSet::new();
        init_trunk(&mut params, "", &mut rng).unwrap();
        init_predictor(&mut params, &mut rng).unwrap();
        // a non-trivial normalization so its use in the graph is exercised
        for v in params.get_mut("enc.norm.shift").unwrap().data_mut() {
            *v = 0.1 * rng.normal();
        }
        for v in params.get_mut("enc.norm.scale").unwrap().data_mut() {
            *v = rng.uniform(0.5, 1.5);
        }
        let rows = WINDOW + windows + 1;
        let pressures = (0..rows * SENSORS).map(|_| rng.normal()).collect();
        Self {
            params,
            pressures,
            windows,
        }
    }

    fn rows(&self) -> usize {
        self.pressures.len() / SENSORS
    }

    /// Predictive loss and, when asked, every parameter gradient.
    pub fn loss(&self, params: &ParameterSet<f64>, grads: bool) -> (f64, Vec<(String, Vec<f64>)>) {
        let mut g = Graph::new();
        let trunk = TrunkVars::bind(&mut g, params, "", false).unwrap();
        let pred = PredictorVars::bind(&mut g, params, false).unwrap();
        let x = g.constant(Tensor::new(&[self.rows(), SENSORS], self.pressures.clone()).unwrap());
        let z = trunk.enc.forward(&mut g, x).unwrap();
        let windows: Vec<Vec<usize>> = (0..self.windows)
            .map(|w| (w..w + WINDOW).collect())
            .collect();
        let h = trunk.dynamic(&mut g, z, &windows).unwrap();
        let p = pred.forward(&mut g, h).unwrap();
        let i1: Vec<usize> = (0..self.windows).map(|w| w + WINDOW).collect();
        let i2: Vec<usize> = (0..self.windows).map(|w| w + WINDOW + 1).collect();
        let z1 = g.gather_rows(z, &i1).unwrap();
        let z2 = g.gather_rows(z, &i2).unwrap();
        let loss = cpc_loss_graph(&mut g, p, z1, z2).unwrap();
        let value = g.value(loss).data()[0];
        if !grads {
            return (value, Vec::new());
        }
        let gr = g
            .backward(loss)
            .unwrap()
            .params()
            .into_iter()
            .map(|(k, t)| (k, t.into_data()))
            .collect();
        (value, gr)
    }
}

#[derive(Debug, Clone)]
pub struct GradCheck {
    /// Worst relative error over the entries checked one by one.
    pub entry_error: f64,
    /// Relative error of a random unit-direction derivative through all
    /// parameters at once.
    pub direction_error: f64,
    pub tensors: usize,
    pub entries: usize,
    pub parameters: usize,
    /// Draws discarded because every step size straddled a ReLU kink.
    pub kinks: usize,
}

impl GradCheck {
    pub fn worst(&self) -> f64 {
        self.entry_error.max(self.direction_error)
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-7)
}

/// Central difference of `f` at 0, or `None` when the forward and backward
/// slopes disagree at every step, i.e. a kink lies within the step.
fn central(f0: f64, f: impl Fn(f64) -> f64) -> Option<f64> {
    for eps in [1e-6, 1e-7, 1e-8] {
        let (up, down) = (f(eps), f(-eps));
        let (fwd, bwd) = ((up - f0) / eps, (f0 - down) / eps);
        if (fwd - bwd).abs() <= 1e-4 * fwd.abs().max(bwd.abs()).max(1e-7) {
            return Some((up - down) / (2.0 * eps));
        }
    }
    None
}

/// Central differences of the predictive loss against the graph gradient:
/// `per_tensor` random entries of every parameter tensor, plus one random
/// unit direction through the whole parameter vector.
pub fn perception_gradient_check(seed: u64, per_tensor: usize) -> GradCheck {
    let prob = GradProblem::new(seed, 2);
    let (f0, grads) = prob.loss(&prob.params, true);
    let mut rng = Rng::new(seed).split(99);
    let mut worst: f64 = 0.0;
    let (mut entries, mut kinks, mut parameters) = (0, 0, 0);
    for (name, grad) in &grads {
        parameters += grad.len();
        let want = per_tensor.min(grad.len());
        let mut done = 0;
        let mut k = rng.below(grad.len());
        while done < want {
            let shifted = |d: f64| {
                let mut p = prob.params.clone();
                p.get_mut(name).unwrap().data_mut()[k] += d;
                prob.loss(&p, false).0
            };
            match central(f0, shifted) {
                Some(n) => {
                    worst = worst.max(rel(grad[k], n));
                    entries += 1;
                    done += 1;
                }
                None => kinks += 1,
            }
            k = if want == grad.len() {
                (k + 1) % grad.len()
            } else {
                rng.below(grad.len())
            };
        }
    }
    let direction_error = loop {
        let mut dir: Vec<Vec<f64>> = grads
            .iter()
            .map(|(_, g)| g.iter().map(|_| rng.normal()).collect())
            .collect();
        let norm = dir.iter().flatten().map(|d| d * d).sum::<f64>().sqrt();
        dir.iter_mut().flatten().for_each(|d| *d /= norm);
        let analytic: f64 = grads
            .iter()
            .zip(&dir)
            .map(|((_, g), d)| g.iter().zip(d).map(|(a, b)| a * b).sum::<f64>())
            .sum();
        let shifted = |t: f64| {
            let mut p = prob.params.clone();
            for ((name, _), d) in grads.iter().zip(&dir) {
                for (v, dv) in p.get_mut(name).unwrap().data_mut().iter_mut().zip(d) {
                    *v += t * dv;
                }
            }
            prob.loss(&p, false).0
        };
        match central(f0, shifted) {
            Some(n) => break rel(analytic, n),
            None => kinks += 1,
        }
    };
    GradCheck {
        entry_error: worst,
        direction_error,
        tensors: grads.len(),
        entries,
        parameters,
        kinks,
    }
}
