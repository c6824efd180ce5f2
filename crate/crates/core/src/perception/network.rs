//! The perception network: circular-conv spatial encoder (200 -> 50) and a
//! GRU that folds a window of spatial features into a 64-d dynamic feature.

use crate::error::{Error, Result};
use crate::nn::{layers, Graph, GruVars, Init, LinearVars, ParameterSet, Real, Tensor, Var};
use crate::rng::Rng;

pub const SENSORS: usize = 200;
pub const Z_DIM: usize = 50;
pub const H_DIM: usize = 64;
pub const WINDOW: usize = 100;

pub const KERNELS: [usize; 5] = [10, 8, 7, 5, 3];
pub const STRIDES: [usize; 5] = [2, 2, 1, 1, 1];
pub const CHANNELS: [usize; 6] = [1, 16, 32, 32, 16, 1];

/// Add encoder (`enc.conv{1..5}`) and GRU (`gru`) parameters, plus an
/// identity input normalization (`enc.norm.shift`, `enc.norm.scale`).
pub fn init_trunk<T: Real>(
    params: &mut ParameterSet<T>,
    prefix: &str,
    rng: &mut Rng,
) -> Result<()> {
    params.insert(
        &format!("{prefix}enc.norm.shift"),
        Tensor::zeros(&[SENSORS]),
    )?;
    params.insert(
        &format!("{prefix}enc.norm.scale"),
        Tensor::new(&[SENSORS], vec![T::one(); SENSORS])?,
    )?;
    for i in 0..5 {
        // the last layer is linear, every other one feeds a ReLU
        let init = if i < 4 {
            Init::HeUniform
        } else {
            Init::XavierUniform
        };
        layers::add_conv(
            params,
            &format!("{prefix}enc.conv{}", i + 1),
            CHANNELS[i],
            CHANNELS[i + 1],
            KERNELS[i],
            init,
            rng,
        )?;
    }
    layers::add_gru(params, &format!("{prefix}gru"), Z_DIM, H_DIM, rng)
}

/// Set the input normalization to the per-sensor mean of `pressures`
/// (`[n, SENSORS]` row-major) and one global scale, the inverse standard
/// deviation of the centered samples. The normalization is never trained.
pub fn fit_input_norm<T: Real>(
    params: &mut ParameterSet<T>,
    prefix: &str,
    pressures: &[f32],
) -> Result<()> {
    let n = pressures.len() / SENSORS;
    if n < 2 || n * SENSORS != pressures.len() {
        return Err(Error::Data(format!(
            "input normalization needs at least two full pressure rows, got {} values",
            pressures.len()
        )));
    }
    let mut mean = vec![0.0f64; SENSORS];
    for row in pressures.chunks(SENSORS) {
        for (m, &v) in mean.iter_mut().zip(row) {
            *m += v as f64 / n as f64;
        }
    }
    let var = pressures
        .chunks(SENSORS)
        .flat_map(|row| row.iter().zip(&mean).map(|(&v, m)| (v as f64 - m).powi(2)))
        .sum::<f64>()
        / (n * SENSORS) as f64;
    if !var.is_finite() {
        return Err(Error::Numerical("non-finite pressure statistics".into()));
    }
    let scale = 1.0 / var.sqrt().max(1e-6);
    let shift = params
        .get_mut(&format!("{prefix}enc.norm.shift"))
        .ok_or_else(|| Error::config(format!("missing `{prefix}enc.norm.shift`")))?;
    for (d, m) in shift.data_mut().iter_mut().zip(&mean) {
        *d = T::from_f64(*m);
    }
    let s = params
        .get_mut(&format!("{prefix}enc.norm.scale"))
        .ok_or_else(|| Error::config(format!("missing `{prefix}enc.norm.scale`")))?;
    s.data_mut()
        .iter_mut()
        .for_each(|d| *d = T::from_f64(scale));
    Ok(())
}

#[derive(Debug, Clone)]
pub struct EncoderVars {
    shift: Vec<f64>,
    scale: Vec<f64>,
    convs: [(Var, Var); 5],
}

impl EncoderVars {
    pub fn bind<T: Real>(
        g: &mut Graph<T>,
        params: &ParameterSet<T>,
        prefix: &str,
        frozen: bool,
    ) -> Result<Self> {
        let mut convs = Vec::with_capacity(5);
        for i in 1..=5 {
            let l = LinearVars::bind(g, params, &format!("{prefix}enc.conv{i}"), frozen)?;
            convs.push((l.w, l.b));
        }
        let constant = |name: &str| -> Result<Vec<f64>> {
            let t = params
                .get(&format!("{prefix}enc.norm.{name}"))
                .ok_or_else(|| Error::config(format!("missing `{prefix}enc.norm.{name}`")))?;
            if t.numel() != SENSORS {
                return Err(Error::shape(format!(
                    "`{prefix}enc.norm.{name}` must hold {SENSORS} values"
                )));
            }
            Ok(t.data().iter().map(|v| v.as_f64()).collect())
        };
        Ok(Self {
            shift: constant("shift")?,
            scale: constant("scale")?,
            convs: convs.try_into().expect("five conv layers"),
        })
    }

    /// `x: [n, SENSORS]` pressures -> `[n, Z_DIM]` spatial features.
    pub fn forward<T: Real>(&self, g: &mut Graph<T>, x: Var) -> Result<Var> {
        let shape = g.shape(x).to_vec();
        if shape.len() != 2 || shape[1] != SENSORS {
            return Err(Error::shape(format!(
                "encoder expects [n, {SENSORS}] pressures, got {shape:?}"
            )));
        }
        let x = g.scale_cols(x, &self.shift, &self.scale)?;
        let mut h = g.reshape(x, &[shape[0], 1, SENSORS])?;
        for (i, &(w, b)) in self.convs.iter().enumerate() {
            h = g.conv1d_circular(h, w, Some(b), STRIDES[i])?;
            if i < 4 {
                h = g.relu(h);
            }
        }
        g.reshape(h, &[shape[0], Z_DIM])
    }
}

/// Encoder plus GRU, bound into one graph.
#[derive(Debug, Clone)]
pub struct TrunkVars {
    pub enc: EncoderVars,
    pub gru: GruVars,
}

impl TrunkVars {
    pub fn bind<T: Real>(
        g: &mut Graph<T>,
        params: &ParameterSet<T>,
        prefix: &str,
        frozen: bool,
    ) -> Result<Self> {
        Ok(Self {
            enc: EncoderVars::bind(g, params, prefix, frozen)?,
            gru: GruVars::bind(g, params, &format!("{prefix}gru"), frozen)?,
        })
    }

    /// Run the GRU over windows of rows of `z` (`[n, Z_DIM]`).
    ///
    /// `windows[b]` lists the rows of `z` forming window `b`, oldest first.
    /// All windows must have equal length. Returns the final hidden state
    /// `[batch, H_DIM]` starting from zero.
    pub fn dynamic<T: Real>(
        &self,
        g: &mut Graph<T>,
        z: Var,
        windows: &[Vec<usize>],
    ) -> Result<Var> {
        let len = windows.first().map_or(0, Vec::len);
        if len == 0 {
            return Err(Error::shape("empty window".to_string()));
        }
        if windows.iter().any(|w| w.len() != len) {
            return Err(Error::shape("windows of unequal length".to_string()));
        }
        let gx = g.linear(z, self.gru.wx, Some(self.gru.bx))?;
        let mut h = g.constant(Tensor::zeros(&[windows.len(), H_DIM]));
        let mut idx = vec![0usize; windows.len()];
        for t in 0..len {
            for (slot, w) in idx.iter_mut().zip(windows) {
                *slot = w[t];
            }
            let xt = g.gather_rows(gx, &idx)?;
            h = self.gru.step_projected(g, xt, h)?;
        }
        Ok(h)
    }
}

/// Spatial feature of one pressure snapshot.
pub fn encode_spatial<T: Real>(params: &ParameterSet<T>, pressure: &[T]) -> Result<Vec<T>> {
    encode_spatial_prefixed(params, "", pressure)
}

pub fn encode_spatial_prefixed<T: Real>(
    params: &ParameterSet<T>,
    prefix: &str,
    pressure: &[T],
) -> Result<Vec<T>> {
    if pressure.len() != SENSORS {
        return Err(Error::shape(format!(
            "expected {SENSORS} pressure samples, got {}",
            pressure.len()
        )));
    }
    if pressure.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite pressure sample".into()));
    }
    let mut g = Graph::new();
    let enc = EncoderVars::bind(&mut g, params, prefix, true)?;
    let x = g.constant(Tensor::new(&[1, SENSORS], pressure.to_vec())?);
    let z = enc.forward(&mut g, x)?;
    Ok(g.value(z).data().to_vec())
}

/// Encode many snapshots at once (`[n, SENSORS]` row-major) without
/// recording gradients.
pub fn encode_many<T: Real>(
    params: &ParameterSet<T>,
    prefix: &str,
    pressures: &[T],
) -> Result<Vec<T>> {
    let n = pressures.len() / SENSORS;
    if n * SENSORS != pressures.len() {
        return Err(Error::shape(
            "pressure buffer is not a multiple of the sensor count",
        ));
    }
    let mut g = Graph::new();
    let enc = EncoderVars::bind(&mut g, params, prefix, true)?;
    let x = g.constant(Tensor::new(&[n, SENSORS], pressures.to_vec())?);
    let z = enc.forward(&mut g, x)?;
    Ok(g.value(z).data().to_vec())
}

/// Dynamic feature of a window of spatial features (`WINDOW x Z_DIM`).
pub fn encode_dynamic<T: Real>(params: &ParameterSet<T>, window: &[Vec<T>]) -> Result<Vec<T>> {
    encode_dynamic_prefixed(params, "", window)
}

pub fn encode_dynamic_prefixed<T: Real>(
    params: &ParameterSet<T>,
    prefix: &str,
    window: &[Vec<T>],
) -> Result<Vec<T>> {
    if window.is_empty() {
        return Err(Error::shape("empty window"));
    }
    if window.len() != WINDOW {
        return Err(Error::shape(format!(
            "window must hold {WINDOW} steps, got {}",
            window.len()
        )));
    }
    if window.iter().any(|z| z.len() != Z_DIM) {
        return Err(Error::shape(format!(
            "spatial features must have length {Z_DIM}"
        )));
    }
    let mut g = Graph::new();
    let gru = GruVars::bind(&mut g, params, &format!("{prefix}gru"), true)?;
    let mut h = g.constant(Tensor::zeros(&[1, H_DIM]));
    for z in window {
        let x = g.constant(Tensor::new(&[1, Z_DIM], z.clone())?);
        h = gru.step(&mut g, x, h)?;
    }
    Ok(g.value(h).data().to_vec())
}
