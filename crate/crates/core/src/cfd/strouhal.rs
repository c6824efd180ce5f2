//! Shedding-frequency estimation from a lift history.

use crate::error::{Error, Result};

/// Frequency estimates from one signal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrequencyEstimate {
    /// From mean upward zero-crossing interval.
    pub zero_crossing: f64,
    /// From the peak of the discrete-time Fourier magnitude.
    pub spectral: f64,
    pub crossings: usize,
}

/// Upward zero crossings of `x - mean(x)`, located by linear interpolation.
///
/// A Schmitt trigger with half-width `0.25 std` keeps noise near zero from
/// producing spurious crossings.
pub fn upward_crossings(x: &[f64], dt: f64) -> Vec<f64> {
    if x.len() < 2 {
        return Vec::new();
    }
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let std = (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    let band = 0.25 * std;
    let mut out = Vec::new();
    let mut armed = false;
    let mut last_cross: Option<f64> = None;
    for k in 1..x.len() {
        let (a, b) = (x[k - 1] - mean, x[k] - mean);
        if b < -band {
            armed = true;
            last_cross = None;
        }
        if a < 0.0 && b >= 0.0 {
            last_cross = Some((k - 1) as f64 * dt + dt * (-a) / (b - a));
        }
        if armed && b > band {
            if let Some(t) = last_cross {
                out.push(t);
            }
            armed = false;
        }
    }
    out
}

/// Peak of `|sum x_k exp(-2 pi i f t_k)|` over `f` in `(lo, hi)`, refined
/// by golden-section search around the best grid point.
pub fn spectral_peak(x: &[f64], dt: f64, lo: f64, hi: f64) -> f64 {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let power = |f: f64| -> f64 {
        let (mut re, mut im) = (0.0, 0.0);
        let w = 2.0 * std::f64::consts::PI * f * dt;
        for (k, v) in x.iter().enumerate() {
            let a = w * k as f64;
            re += (v - mean) * a.cos();
            im -= (v - mean) * a.sin();
        }
        re * re + im * im
    };
    let span = n * dt;
    let df = 0.25 / span;
    let steps = ((hi - lo) / df).ceil().max(1.0) as usize;
    let mut best = (lo, f64::MIN);
    for s in 0..=steps {
        let f = lo + (hi - lo) * s as f64 / steps as f64;
        let p = power(f);
        if p > best.1 {
            best = (f, p);
        }
    }
    let (mut a, mut b) = ((best.0 - df).max(lo), (best.0 + df).min(hi));
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..60 {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        if power(c) > power(d) {
            b = d;
        } else {
            a = c;
        }
    }
    0.5 * (a + b)
}

/// Dominant frequency of a uniformly sampled signal.
pub fn dominant_frequency(x: &[f64], dt: f64) -> Result<FrequencyEstimate> {
    let c = upward_crossings(x, dt);
    if c.len() < 2 {
        return Err(Error::NonShedding(format!(
            "{} upward zero crossings in {} samples",
            c.len(),
            x.len()
        )));
    }
    let zc = (c.len() - 1) as f64 / (c[c.len() - 1] - c[0]);
    let nyquist = 0.5 / dt;
    let spectral = spectral_peak(x, dt, (0.5 * zc).max(1e-9), (2.0 * zc).min(nyquist));
    Ok(FrequencyEstimate {
        zero_crossing: zc,
        spectral,
        crossings: c.len(),
    })
}

/// Strouhal number `f D / U` (with `D = U = 1`) of a lift history.
///
/// The zero-crossing estimate is returned; it is rejected when it disagrees
/// with the spectral peak by more than 5%.
pub fn strouhal(lift: &[f64], dt: f64) -> Result<f64> {
    let est = dominant_frequency(lift, dt)?;
    let rel = (est.zero_crossing - est.spectral).abs() / est.spectral;
    if rel > 0.05 {
        return Err(Error::NonShedding(format!(
            "zero-crossing frequency {:.4} disagrees with spectral peak {:.4}",
            est.zero_crossing, est.spectral
        )));
    }
    Ok(est.zero_crossing)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    #[test]
    fn pure_sine() {
        let dt = 0.1;
        let x: Vec<f64> = (0..3000)
            .map(|k| (2.0 * std::f64::consts::PI * 0.2 * k as f64 * dt + 0.3).sin())
            .collect();
        let st = strouhal(&x, dt).unwrap();
        assert!((st - 0.2).abs() < 1e-3, "{st}");
    }

    #[test]
    fn noisy_sine() {
        let dt = 0.1;
        let mut rng = Rng::new(5);
        let x: Vec<f64> = (0..3000)
            .map(|k| {
                (2.0 * std::f64::consts::PI * 0.167 * k as f64 * dt).sin() + 0.1 * rng.normal()
            })
            .collect();
        let st = strouhal(&x, dt).unwrap();
        assert!((st - 0.167).abs() / 0.167 < 0.02, "{st}");
    }

    #[test]
    fn constant_signal_is_not_shedding() {
        assert!(matches!(
            strouhal(&[0.3; 500], 0.1),
            Err(Error::NonShedding(_))
        ));
    }
}
