//! Predictive pretraining, obstacle-position fine-tuning and evaluation.

use serde::{Deserialize, Serialize};

use super::cpc::{cpc_loss_graph, init_predictor, PredictorVars};
use super::network::{fit_input_norm, init_trunk, TrunkVars, H_DIM, SENSORS, WINDOW};
use crate::env::Dataset;
use crate::error::{Error, Result};
use crate::nn::{layers, AdamConfig, AdamState, Graph, Init, LinearVars, ParameterSet, Tensor};
use crate::rng::Rng;

pub const HEAD: &str = "head";

type ParamGrads = indexmap::IndexMap<String, Tensor<f32>>;

/// Samples between a window's end and the obstacle position it reports.
pub const LABEL_LAG: usize = 100;

/// Fit the trunk's input normalization to the first `n` records of `data`.
pub fn fit_norm_to_dataset(params: &mut ParameterSet<f32>, data: &Dataset, n: usize) -> Result<()> {
    let rows: Vec<f32> = data.records[..n.min(data.len())]
        .iter()
        .flat_map(|r| r.pressure.iter().copied())
        .collect();
    fit_input_norm(params, "", &rows)
}

/// Fresh encoder + GRU + predictor.
pub fn init_perception(seed: u64) -> Result<ParameterSet<f32>> {
    let mut rng = Rng::new(seed).split(11);
    let mut p = ParameterSet::new();
    init_trunk(&mut p, "", &mut rng)?;
    init_predictor(&mut p, &mut rng)?;
    Ok(p)
}

/// Fresh trunk + obstacle head; the trunk is copied from `pretrained` when
/// given.
pub fn init_obstacle_model(
    pretrained: Option<&ParameterSet<f32>>,
    seed: u64,
) -> Result<ParameterSet<f32>> {
    let mut rng = Rng::new(seed).split(12);
    let mut p = ParameterSet::new();
    init_trunk(&mut p, "", &mut rng)?;
    layers::add_linear(
        &mut p,
        &format!("{HEAD}.l1"),
        H_DIM,
        32,
        Init::HeUniform,
        &mut rng,
    )?;
    layers::add_linear(
        &mut p,
        &format!("{HEAD}.l2"),
        32,
        1,
        Init::XavierUniform,
        &mut rng,
    )?;
    if let Some(src) = pretrained {
        p.copy_prefix_from(src, "enc.")?;
        p.copy_prefix_from(src, "gru.")?;
    }
    Ok(p)
}

/// A training batch: the dataset rows it touches and, per window, the row
/// positions it spans.
#[derive(Debug, Clone)]
struct Batch {
    rows: Vec<usize>,
    windows: Vec<Vec<usize>>,
    /// Dataset index of each window's last row.
    ends: Vec<usize>,
}

impl Batch {
    /// `clusters` runs of consecutive windows whose last rows lie in
    /// `[lo, hi]`; `after` extra rows follow each run.
    fn sample(
        lo: usize,
        hi: usize,
        size: usize,
        clusters: usize,
        after: usize,
        rng: &mut Rng,
    ) -> Self {
        let clusters = clusters.clamp(1, size);
        let mut rows = Vec::new();
        let mut windows = Vec::with_capacity(size);
        let mut ends = Vec::with_capacity(size);
        for c in 0..clusters {
            let m = size / clusters + usize::from(c < size % clusters);
            let span = (hi + 1 - lo).saturating_sub(m);
            let e0 = lo + if span > 0 { rng.below(span + 1) } else { 0 };
            let m = m.min(hi + 1 - e0);
            let base = rows.len();
            let first = e0 + 1 - WINDOW;
            rows.extend(first..e0 + m + after);
            for k in 0..m {
                windows.push((base + k..base + k + WINDOW).collect());
                ends.push(e0 + k);
            }
        }
        Self {
            rows,
            windows,
            ends,
        }
    }

    /// Row position inside the batch of dataset index `ends[w] + offset`.
    fn row_after(&self, w: usize, offset: usize) -> usize {
        self.windows[w][WINDOW - 1] + offset
    }

    fn pressures(&self, data: &Dataset) -> Result<Tensor<f32>> {
        let mut x = Vec::with_capacity(self.rows.len() * SENSORS);
        for &r in &self.rows {
            x.extend_from_slice(&data.records[r].pressure);
        }
        Tensor::new(&[self.rows.len(), SENSORS], x)
    }
}

fn check_finite(loss: f32, param: &str, step: usize) -> Result<()> {
    if !loss.is_finite() {
        return Err(Error::Training {
            param: param.to_string(),
            reason: format!("non-finite loss at step {step}"),
        });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PretrainConfig {
    pub epochs: usize,
    pub batches_per_epoch: usize,
    pub batch: usize,
    /// Runs of consecutive windows per batch; rows are encoded once per run.
    pub clusters: usize,
    pub lr: f64,
    /// Treat target features as constants.
    pub stop_grad_targets: bool,
    pub val_fraction: f64,
    pub val_windows: usize,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        Self {
            epochs: 2,
            batches_per_epoch: 20,
            batch: 64,
            clusters: 4,
            lr: 1e-3,
            stop_grad_targets: true,
            val_fraction: 0.1,
            val_windows: 128,
        }
    }
}

impl PretrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batches_per_epoch == 0 || self.batch == 0 || self.clusters == 0
        {
            return Err(Error::Config("pretrain sizes must be positive".into()));
        }
        if !(self.lr > 0.0) || !(0.0..0.5).contains(&self.val_fraction) {
            return Err(Error::Config(
                "pretrain lr must be positive and val_fraction in [0, 0.5)".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLoss {
    pub epoch: usize,
    pub train: f64,
    pub val: f64,
}

#[derive(Debug, Clone)]
pub struct PretrainResult {
    pub params: ParameterSet<f32>,
    pub curve: Vec<EpochLoss>,
}

/// Loss and, when `train`, parameter gradients of one predictive batch.
fn cpc_batch(
    params: &ParameterSet<f32>,
    data: &Dataset,
    batch: &Batch,
    stop_grad: bool,
    train: bool,
) -> Result<(f32, Option<ParamGrads>)> {
    let mut g = Graph::new();
    let trunk = TrunkVars::bind(&mut g, params, "", !train)?;
    let pred = PredictorVars::bind(&mut g, params, !train)?;
    let x = g.constant(batch.pressures(data)?);
    let z = trunk.enc.forward(&mut g, x)?;
    let h = trunk.dynamic(&mut g, z, &batch.windows)?;
    let p = pred.forward(&mut g, h)?;
    let n = batch.windows.len();
    let i1: Vec<usize> = (0..n).map(|w| batch.row_after(w, 1)).collect();
    let i2: Vec<usize> = (0..n).map(|w| batch.row_after(w, 2)).collect();
    let mut z1 = g.gather_rows(z, &i1)?;
    let mut z2 = g.gather_rows(z, &i2)?;
    if stop_grad {
        z1 = g.constant(g.value(z1).clone());
        z2 = g.constant(g.value(z2).clone());
    }
    let loss = cpc_loss_graph(&mut g, p, z1, z2)?;
    let value = g.value(loss).data()[0];
    if !train {
        return Ok((value, None));
    }
    Ok((value, Some(g.backward(loss)?.params())))
}

/// Two-step-ahead predictive pretraining on a chronological split.
pub fn pretrain(data: &Dataset, config: &PretrainConfig, seed: u64) -> Result<PretrainResult> {
    config.validate()?;
    data.check()?;
    let n = data.len();
    if n < WINDOW + 2 {
        return Err(Error::Data(format!(
            "dataset of {n} records is shorter than one window plus two samples"
        )));
    }
    let n_val = ((n as f64) * config.val_fraction).floor() as usize;
    let n_train = n - n_val;
    if n_train < WINDOW + 2 {
        return Err(Error::Data(
            "training split shorter than one window plus two samples".into(),
        ));
    }
    let mut params = init_perception(seed)?;
    fit_norm_to_dataset(&mut params, data, n_train)?;
    let mut adam = AdamState::new(AdamConfig::with_lr(config.lr), &params);
    let mut rng = Rng::new(seed).split(21);

    let val = if n_val >= WINDOW + 2 {
        let mut vr = Rng::new(seed).split(22);
        Some(Batch::sample(
            n_train + WINDOW - 1,
            n - 3,
            config.val_windows.min(n_val - WINDOW - 1),
            config.clusters,
            2,
            &mut vr,
        ))
    } else {
        None
    };

    let mut curve = Vec::with_capacity(config.epochs);
    let mut step = 0;
    for epoch in 0..config.epochs {
        let mut total = 0.0;
        for _ in 0..config.batches_per_epoch {
            let batch = Batch::sample(
                WINDOW - 1,
                n_train - 3,
                config.batch,
                config.clusters,
                2,
                &mut rng,
            );
            let (loss, grads) = cpc_batch(&params, data, &batch, config.stop_grad_targets, true)?;
            check_finite(loss, "pretrain", step)?;
            adam.step(&mut params, &grads.expect("training pass"))?;
            total += loss as f64;
            step += 1;
        }
        let val_loss = match &val {
            Some(b) => cpc_batch(&params, data, b, true, false)?.0 as f64,
            None => f64::NAN,
        };
        curve.push(EpochLoss {
            epoch,
            train: total / config.batches_per_epoch as f64,
            val: val_loss,
        });
    }
    if !params.is_finite() {
        return Err(Error::Training {
            param: "pretrain".into(),
            reason: "parameters became non-finite".into(),
        });
    }
    Ok(PretrainResult { params, curve })
}

/// Mean predictive loss over windows ending at `ends` (no training).
pub fn cpc_eval(params: &ParameterSet<f32>, data: &Dataset, ends: &[usize]) -> Result<f64> {
    let mut total = 0.0;
    for chunk in ends.chunks(64) {
        let mut rows = Vec::new();
        let mut windows = Vec::new();
        for &e in chunk {
            if e + 2 >= data.len() || e + 1 < WINDOW {
                return Err(Error::Data(format!("window end {e} out of range")));
            }
            let base = rows.len();
            rows.extend(e + 1 - WINDOW..=e + 2);
            windows.push((base..base + WINDOW).collect());
        }
        let batch = Batch {
            rows,
            windows,
            ends: chunk.to_vec(),
        };
        total += cpc_batch(params, data, &batch, true, false)?.0 as f64 * chunk.len() as f64;
    }
    Ok(total / ends.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ObstacleConfig {
    pub steps: usize,
    pub batch: usize,
    pub clusters: usize,
    pub lr: f64,
    pub eval_every: usize,
    /// Spacing of evaluation windows, in samples.
    pub eval_stride: usize,
}

impl Default for ObstacleConfig {
    fn default() -> Self {
        Self {
            steps: 200,
            batch: 32,
            clusters: 4,
            lr: 1e-3,
            eval_every: 20,
            eval_stride: 10,
        }
    }
}

impl ObstacleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0
            || self.batch == 0
            || self.clusters == 0
            || self.eval_every == 0
            || self.eval_stride == 0
        {
            return Err(Error::Config(
                "obstacle training sizes must be positive".into(),
            ));
        }
        if !(self.lr > 0.0) {
            return Err(Error::Config("obstacle lr must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObstacleEval {
    pub step: usize,
    /// Mean training loss since the previous evaluation.
    pub train_mse: f64,
    /// Test error per test set, in the order given.
    pub test_mse: Vec<f64>,
    pub average: f64,
}

#[derive(Debug, Clone)]
pub struct ObstacleResult {
    /// Parameters at the evaluation with the lowest average test error.
    pub params: ParameterSet<f32>,
    pub curve: Vec<ObstacleEval>,
    pub best: ObstacleEval,
}

fn head_forward(
    g: &mut Graph<f32>,
    params: &ParameterSet<f32>,
    h: crate::nn::Var,
    frozen: bool,
) -> Result<crate::nn::Var> {
    let l1 = LinearVars::bind(g, params, &format!("{HEAD}.l1"), frozen)?;
    let l2 = LinearVars::bind(g, params, &format!("{HEAD}.l2"), frozen)?;
    let a = l1.forward(g, h)?;
    let a = g.relu(a);
    l2.forward(g, a)
}

fn label_of(data: &Dataset, end: usize) -> f32 {
    data.records[end - LABEL_LAG].y_obstacle
}

/// Window ends usable for supervision, spaced by `stride`.
pub fn label_ends(data: &Dataset, stride: usize) -> Vec<usize> {
    (LABEL_LAG.max(WINDOW - 1)..data.len())
        .step_by(stride.max(1))
        .collect()
}

/// Predicted obstacle positions for windows ending at `ends`.
pub fn predict_obstacle(
    params: &ParameterSet<f32>,
    data: &Dataset,
    ends: &[usize],
) -> Result<Vec<f32>> {
    let mut out = Vec::with_capacity(ends.len());
    for chunk in ends.chunks(64) {
        let mut rows = Vec::new();
        let mut windows = Vec::new();
        for &e in chunk {
            if e >= data.len() || e + 1 < WINDOW {
                return Err(Error::Data(format!("window end {e} out of range")));
            }
            let base = rows.len();
            rows.extend(e + 1 - WINDOW..=e);
            windows.push((base..base + WINDOW).collect());
        }
        let batch = Batch {
            rows,
            windows,
            ends: chunk.to_vec(),
        };
        let mut g = Graph::new();
        let trunk = TrunkVars::bind(&mut g, params, "", true)?;
        let x = g.constant(batch.pressures(data)?);
        let z = trunk.enc.forward(&mut g, x)?;
        let h = trunk.dynamic(&mut g, z, &batch.windows)?;
        let y = head_forward(&mut g, params, h, true)?;
        out.extend_from_slice(g.value(y).data());
    }
    Ok(out)
}

/// Mean squared error of the obstacle position over windows spaced by
/// `stride`.
pub fn obstacle_mse(params: &ParameterSet<f32>, data: &Dataset, stride: usize) -> Result<f64> {
    let ends = label_ends(data, stride);
    if ends.is_empty() {
        return Err(Error::Data(format!(
            "dataset of {} records has no labelled window",
            data.len()
        )));
    }
    let pred = predict_obstacle(params, data, &ends)?;
    let se: f64 = ends
        .iter()
        .zip(&pred)
        .map(|(&e, &p)| ((p - label_of(data, e)) as f64).powi(2))
        .sum();
    Ok(se / ends.len() as f64)
}

/// Fine-tune trunk and head to report the obstacle position one window
/// length in the past.
pub fn train_obstacle(
    train: &Dataset,
    tests: &[&Dataset],
    init: ParameterSet<f32>,
    config: &ObstacleConfig,
    seed: u64,
) -> Result<ObstacleResult> {
    config.validate()?;
    train.check()?;
    if train.len() <= LABEL_LAG + 1 {
        return Err(Error::Data(format!(
            "training set of {} records has no labelled window",
            train.len()
        )));
    }
    if tests.is_empty() {
        return Err(Error::Data("no test sets given".into()));
    }
    let mut params = init;
    let mut adam = AdamState::new(AdamConfig::with_lr(config.lr), &params);
    let mut rng = Rng::new(seed).split(31);
    let mut curve = Vec::new();
    let mut best: Option<(ObstacleEval, ParameterSet<f32>)> = None;
    let mut running = 0.0;
    let mut since = 0;

    for step in 1..=config.steps {
        let batch = Batch::sample(
            LABEL_LAG,
            train.len() - 1,
            config.batch,
            config.clusters,
            0,
            &mut rng,
        );
        let labels: Vec<f32> = batch.ends.iter().map(|&e| label_of(train, e)).collect();
        let mut g = Graph::new();
        let trunk = TrunkVars::bind(&mut g, &params, "", false)?;
        let x = g.constant(batch.pressures(train)?);
        let z = trunk.enc.forward(&mut g, x)?;
        let h = trunk.dynamic(&mut g, z, &batch.windows)?;
        let y = head_forward(&mut g, &params, h, false)?;
        let target = g.constant(Tensor::new(&[labels.len(), 1], labels)?);
        let d = g.sub(y, target)?;
        let sq = g.square(d);
        let loss = g.mean(sq);
        let value = g.value(loss).data()[0];
        check_finite(value, "obstacle", step)?;
        let grads = g.backward(loss)?.params();
        adam.step(&mut params, &grads)?;
        running += value as f64;
        since += 1;

        if step % config.eval_every == 0 || step == config.steps {
            let test_mse = tests
                .iter()
                .map(|d| obstacle_mse(&params, d, config.eval_stride))
                .collect::<Result<Vec<_>>>()?;
            let average = test_mse.iter().sum::<f64>() / test_mse.len() as f64;
            let eval = ObstacleEval {
                step,
                train_mse: running / since as f64,
                test_mse,
                average,
            };
            running = 0.0;
            since = 0;
            if best.as_ref().is_none_or(|(b, _)| eval.average < b.average) {
                best = Some((eval.clone(), params.clone()));
            }
            curve.push(eval);
        }
    }
    let (best, params) = best.expect("at least one evaluation");
    Ok(ObstacleResult {
        params,
        curve,
        best,
    })
}
