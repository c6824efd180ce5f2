//! Input sensitivity of the dynamic feature to each pressure sensor.

use super::network::{TrunkVars, H_DIM, SENSORS, WINDOW};
use crate::env::Dataset;
use crate::error::{Error, Result};
use crate::nn::{Graph, ParameterSet, Tensor};

pub const MIN_WINDOWS: usize = 20;

/// Pressure windows (`WINDOW x SENSORS`, row-major) ending at `ends`.
pub fn windows_from(data: &Dataset, ends: &[usize]) -> Result<Vec<Vec<f32>>> {
    ends.iter()
        .map(|&e| {
            if e >= data.len() || e + 1 < WINDOW {
                return Err(Error::Data(format!("window end {e} out of range")));
            }
            let mut w = Vec::with_capacity(WINDOW * SENSORS);
            for r in &data.records[e + 1 - WINDOW..=e] {
                w.extend_from_slice(&r.pressure);
            }
            Ok(w)
        })
        .collect()
}

/// `S_j`: mean over windows of the L2 norm of `dh / dp_{t,j}` over all
/// feature components and window times, normalized to sum to one.
pub fn sensitivity_map(
    params: &ParameterSet<f32>,
    prefix: &str,
    windows: &[Vec<f32>],
) -> Result<Vec<f64>> {
    if windows.len() < MIN_WINDOWS {
        return Err(Error::Data(format!(
            "sensitivity needs at least {MIN_WINDOWS} windows, got {}",
            windows.len()
        )));
    }
    if let Some(w) = windows.iter().find(|w| w.len() != WINDOW * SENSORS) {
        return Err(Error::shape(format!(
            "window holds {} values, expected {}",
            w.len(),
            WINDOW * SENSORS
        )));
    }
    let mut total = vec![0.0f64; SENSORS];
    for chunk in windows.chunks(5) {
        let n = chunk.len();
        let mut g = Graph::new();
        let trunk = TrunkVars::bind(&mut g, params, prefix, true)?;
        let data: Vec<f32> = chunk.iter().flatten().copied().collect();
        let x = g.leaf(Tensor::new(&[n * WINDOW, SENSORS], data)?);
        let z = trunk.enc.forward(&mut g, x)?;
        let idx: Vec<Vec<usize>> = (0..n)
            .map(|b| (b * WINDOW..(b + 1) * WINDOW).collect())
            .collect();
        let h = trunk.dynamic(&mut g, z, &idx)?;
        let mut sq = vec![0.0f64; n * SENSORS];
        for k in 0..H_DIM {
            let mut seed = vec![0.0f32; n * H_DIM];
            for b in 0..n {
                seed[b * H_DIM + k] = 1.0;
            }
            let grads = g.backward_seeded(h, seed)?;
            let gx = grads
                .wrt(x)
                .ok_or_else(|| Error::Numerical("no gradient reached the input".into()))?;
            for (r, row) in gx.chunks(SENSORS).enumerate() {
                let b = r / WINDOW;
                for (j, &v) in row.iter().enumerate() {
                    sq[b * SENSORS + j] += (v as f64) * (v as f64);
                }
            }
        }
        for b in 0..n {
            for j in 0..SENSORS {
                total[j] += sq[b * SENSORS + j].sqrt();
            }
        }
    }
    if total.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite sensitivity".into()));
    }
    let sum: f64 = total.iter().sum();
    if !(sum > 0.0) {
        return Err(Error::Numerical(
            "sensitivity map is identically zero".into(),
        ));
    }
    Ok(total.iter().map(|v| v / sum).collect())
}

/// Shannon entropy (nats) of a normalized map.
pub fn entropy(map: &[f64]) -> f64 {
    -map.iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| p * p.ln())
        .sum::<f64>()
}
