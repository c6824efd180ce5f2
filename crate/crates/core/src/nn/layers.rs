//! Parameter layouts and graph builders for the layers the networks use.

use crate::error::{Error, Result};
use crate::rng::Rng;

use super::graph::{Graph, Var};
use super::params::{Init, ParameterSet};
use super::real::Real;
use super::tensor::Tensor;

/// Register `{name}.w: [out, in]` and `{name}.b: [out]`.
pub fn add_linear<T: Real>(
    params: &mut ParameterSet<T>,
    name: &str,
    fan_in: usize,
    fan_out: usize,
    init: Init,
    rng: &mut Rng,
) -> Result<()> {
    params.insert(
        &format!("{name}.w"),
        init.sample(&[fan_out, fan_in], fan_in, fan_out, rng),
    )?;
    params.insert(&format!("{name}.b"), Tensor::zeros(&[fan_out]))
}

/// Register `{name}.w: [c_out, c_in, k]` and `{name}.b: [c_out]`.
pub fn add_conv<T: Real>(
    params: &mut ParameterSet<T>,
    name: &str,
    c_in: usize,
    c_out: usize,
    k: usize,
    init: Init,
    rng: &mut Rng,
) -> Result<()> {
    params.insert(
        &format!("{name}.w"),
        init.sample(&[c_out, c_in, k], c_in * k, c_out * k, rng),
    )?;
    params.insert(&format!("{name}.b"), Tensor::zeros(&[c_out]))
}

/// Register a GRU cell: `{name}.wx: [3h, in]`, `{name}.wh: [3h, h]` and
/// biases `{name}.bx`, `{name}.bh: [3h]`. Gate blocks are ordered
/// reset, update, candidate. Each block is Xavier-initialized on its own
/// fan.
pub fn add_gru<T: Real>(
    params: &mut ParameterSet<T>,
    name: &str,
    input: usize,
    hidden: usize,
    rng: &mut Rng,
) -> Result<()> {
    let block = |fan_in: usize, rng: &mut Rng| {
        let mut data = Vec::with_capacity(3 * hidden * fan_in);
        for _ in 0..3 {
            let t: Tensor<T> = Init::XavierUniform.sample(&[hidden, fan_in], fan_in, hidden, rng);
            data.extend_from_slice(t.data());
        }
        Tensor::new(&[3 * hidden, fan_in], data)
    };
    let wx = block(input, rng)?;
    let wh = block(hidden, rng)?;
    params.insert(&format!("{name}.wx"), wx)?;
    params.insert(&format!("{name}.wh"), wh)?;
    params.insert(&format!("{name}.bx"), Tensor::zeros(&[3 * hidden]))?;
    params.insert(&format!("{name}.bh"), Tensor::zeros(&[3 * hidden]))
}

#[derive(Debug, Clone, Copy)]
pub struct LinearVars {
    pub w: Var,
    pub b: Var,
}

impl LinearVars {
    pub fn bind<T: Real>(
        g: &mut Graph<T>,
        params: &ParameterSet<T>,
        name: &str,
        frozen: bool,
    ) -> Result<Self> {
        let bind = |g: &mut Graph<T>, n: &str| {
            if frozen {
                g.frozen_param(params, n)
            } else {
                g.param(params, n)
            }
        };
        Ok(Self {
            w: bind(g, &format!("{name}.w"))?,
            b: bind(g, &format!("{name}.b"))?,
        })
    }

    pub fn forward<T: Real>(&self, g: &mut Graph<T>, x: Var) -> Result<Var> {
        g.linear(x, self.w, Some(self.b))
    }
}

#[derive(Debug, Clone, Copy)]
pub struct GruVars {
    pub wx: Var,
    pub wh: Var,
    pub bx: Var,
    pub bh: Var,
    pub hidden: usize,
}

impl GruVars {
    pub fn bind<T: Real>(
        g: &mut Graph<T>,
        params: &ParameterSet<T>,
        name: &str,
        frozen: bool,
    ) -> Result<Self> {
        let bind = |g: &mut Graph<T>, n: &str| {
            if frozen {
                g.frozen_param(params, n)
            } else {
                g.param(params, n)
            }
        };
        let wx = bind(g, &format!("{name}.wx"))?;
        let wh = bind(g, &format!("{name}.wh"))?;
        let bx = bind(g, &format!("{name}.bx"))?;
        let bh = bind(g, &format!("{name}.bh"))?;
        let rows = g.shape(wh)[0];
        if !rows.is_multiple_of(3) || g.shape(wh)[1] * 3 != rows {
            return Err(Error::config(format!(
                "GRU `{name}`: recurrent weight {:?} is not [3h, h]",
                g.shape(wh)
            )));
        }
        Ok(Self {
            wx,
            wh,
            bx,
            bh,
            hidden: rows / 3,
        })
    }

    /// One step: `h' = (1 - z) * h + z * tanh(W_n x + b_n + r * (U_n h + c_n))`
    /// with `r`, `z` sigmoid gates. `x: [batch, in]`, `h: [batch, hidden]`.
    pub fn step<T: Real>(&self, g: &mut Graph<T>, x: Var, h: Var) -> Result<Var> {
        let gx = g.linear(x, self.wx, Some(self.bx))?;
        self.step_projected(g, gx, h)
    }

    /// Step with the input projection `W x + b` already computed.
    pub fn step_projected<T: Real>(&self, g: &mut Graph<T>, gx: Var, h: Var) -> Result<Var> {
        let hd = self.hidden;
        if g.shape(h).len() != 2 || g.shape(h)[1] != hd || g.shape(gx)[1] != 3 * hd {
            return Err(Error::config(format!(
                "GRU step: hidden {:?} / projected input {:?} for hidden size {hd}",
                g.shape(h),
                g.shape(gx)
            )));
        }
        let gh = g.linear(h, self.wh, Some(self.bh))?;
        let xr = g.slice_cols(gx, 0, hd)?;
        let xz = g.slice_cols(gx, hd, hd)?;
        let xn = g.slice_cols(gx, 2 * hd, hd)?;
        let hr = g.slice_cols(gh, 0, hd)?;
        let hz = g.slice_cols(gh, hd, hd)?;
        let hn = g.slice_cols(gh, 2 * hd, hd)?;
        let r = g.add(xr, hr)?;
        let r = g.sigmoid(r);
        let z = g.add(xz, hz)?;
        let z = g.sigmoid(z);
        let rn = g.mul(r, hn)?;
        let n = g.add(xn, rn)?;
        let n = g.tanh(n);
        // h + z * (n - h)
        let d = g.sub(n, h)?;
        let zd = g.mul(z, d)?;
        g.add(h, zd)
    }
}

/// Evaluate a single GRU step on plain vectors.
pub fn gru_step<T: Real>(
    params: &ParameterSet<T>,
    name: &str,
    x: &[T],
    h_prev: &[T],
) -> Result<Vec<T>> {
    let mut g = Graph::new();
    let vars = GruVars::bind(&mut g, params, name, true)?;
    let expect_in = g.shape(vars.wx)[1];
    if x.len() != expect_in || h_prev.len() != vars.hidden {
        return Err(Error::config(format!(
            "GRU step: input {} (expected {expect_in}), hidden {} (expected {})",
            x.len(),
            h_prev.len(),
            vars.hidden
        )));
    }
    let xv = g.constant(Tensor::new(&[1, x.len()], x.to_vec())?);
    let hv = g.constant(Tensor::new(&[1, h_prev.len()], h_prev.to_vec())?);
    let out = vars.step(&mut g, xv, hv)?;
    Ok(g.value(out).data().to_vec())
}

/// Circular 1-D convolution of a single `[c_in, len]` signal.
pub fn conv1d_circular<T: Real>(
    input: &Tensor<T>,
    kernel: &Tensor<T>,
    stride: usize,
) -> Result<Tensor<T>> {
    if input.shape().len() != 2 {
        return Err(Error::config(format!(
            "conv1d: input must be [c_in, len], got {:?}",
            input.shape()
        )));
    }
    let mut g = Graph::new();
    let x = g.constant(input.clone().reshape(&[1, input.dim(0), input.dim(1)])?);
    let w = g.constant(kernel.clone());
    let y = g.conv1d_circular(x, w, None, stride)?;
    let t = g.value(y).clone();
    let (c, l) = (t.dim(1), t.dim(2));
    t.reshape(&[c, l])
}
