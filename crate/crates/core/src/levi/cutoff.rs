//! Cutoff functions θ with θ(x) = x on [0, 1/3] and θ(x) = 1 on [2/3, ∞).

use std::sync::Arc;

use crate::error::{Error, Result};

/// Samples used on [1/3, 1] for the constant `k`.
pub const K_SAMPLES: usize = 10_000;

pub trait Cutoff: Send + Sync {
    fn name(&self) -> &str;
    /// `(θ(x), θ'(x), θ''(x))`.
    fn eval(&self, x: f64) -> (f64, f64, f64);
}

/// The smooth blend `θ = (1 - σ(s)) x + σ(s)` with `s = 3(x - 1/3)` and
/// `σ(s) = e^{-1/s} / (e^{-1/s} + e^{-1/(1-s)})`.
#[derive(Debug, Clone, Copy, Default)]
pub struct DefaultBlend;

/// `σ`, `σ'`, `σ''` of the smooth step on [0, 1].
pub fn smooth_step(s: f64) -> (f64, f64, f64) {
    if s <= 0.0 {
        return (0.0, 0.0, 0.0);
    }
    if s >= 1.0 {
        return (1.0, 0.0, 0.0);
    }
    // σ = 1 / (1 + e^g), g = 1/s - 1/(1-s)
    let g = 1.0 / s - 1.0 / (1.0 - s);
    let g1 = -1.0 / (s * s) - 1.0 / ((1.0 - s) * (1.0 - s));
    let g2 = 2.0 / (s * s * s) - 2.0 / ((1.0 - s).powi(3));
    let (sigma, w) = if g > 0.0 {
        let e = (-g).exp();
        (e / (1.0 + e), e / ((1.0 + e) * (1.0 + e)))
    } else {
        let e = g.exp();
        (1.0 / (1.0 + e), e / ((1.0 + e) * (1.0 + e)))
    };
    // w = σ(1-σ)
    let s1 = -w * g1;
    let s2 = -s1 * (1.0 - 2.0 * sigma) * g1 - w * g2;
    (sigma, s1, s2)
}

impl Cutoff for DefaultBlend {
    fn name(&self) -> &str {
        "default-blend-v1"
    }

    fn eval(&self, x: f64) -> (f64, f64, f64) {
        if x <= 1.0 / 3.0 {
            return (x, 1.0, 0.0);
        }
        if x >= 2.0 / 3.0 {
            return (1.0, 0.0, 0.0);
        }
        let (sg, s1, s2) = smooth_step(3.0 * (x - 1.0 / 3.0));
        let sx = 3.0 * s1;
        let sxx = 9.0 * s2;
        (
            x + sg * (1.0 - x),
            1.0 - sg + sx * (1.0 - x),
            -2.0 * sx + sxx * (1.0 - x),
        )
    }
}

/// A cutoff given by a closure returning `(θ, θ', θ'')`.
#[derive(Clone)]
pub struct FnCutoff {
    pub name: String,
    pub f: Arc<dyn Fn(f64) -> (f64, f64, f64) + Send + Sync>,
}

impl Cutoff for FnCutoff {
    fn name(&self) -> &str {
        &self.name
    }
    fn eval(&self, x: f64) -> (f64, f64, f64) {
        (self.f)(x)
    }
}

/// Checks the boundary behaviour and monotonicity of `theta` on dense grids.
pub fn validate_cutoff(theta: &dyn Cutoff) -> Result<()> {
    let n = 4000;
    for i in 0..=n {
        let x = (1.0 / 3.0) * i as f64 / n as f64;
        let (v, _, _) = theta.eval(x);
        if (v - x).abs() > 1e-12 {
            return Err(Error::InvalidCutoff(format!("θ({x}) = {v}, expected x on [0, 1/3]")));
        }
        let y = 2.0 / 3.0 + 2.0 * i as f64 / n as f64;
        let (w, _, _) = theta.eval(y);
        if (w - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidCutoff(format!("θ({y}) = {w}, expected 1 on [2/3, ∞)")));
        }
    }
    let m = 10 * K_SAMPLES;
    let mut prev = theta.eval(0.0).0;
    for i in 1..=m {
        let x = i as f64 / m as f64;
        let v = theta.eval(x).0;
        if !v.is_finite() || v < prev - 1e-14 {
            return Err(Error::InvalidCutoff(format!("θ decreases near x = {x}")));
        }
        prev = v;
    }
    Ok(())
}

/// `k = 4 max(sup |θ'/θ|, sup |(θ''θ - θ'²)/θ²|)` over [1/3, 1].
pub fn k_constant(theta: &dyn Cutoff) -> Result<f64> {
    validate_cutoff(theta)?;
    let mut s1: f64 = 0.0;
    let mut s2: f64 = 0.0;
    for i in 0..K_SAMPLES {
        let x = 1.0 / 3.0 + (2.0 / 3.0) * i as f64 / (K_SAMPLES - 1) as f64;
        let (t, t1, t2) = theta.eval(x);
        s1 = s1.max((t1 / t).abs());
        s2 = s2.max(((t2 * t - t1 * t1) / (t * t)).abs());
    }
    Ok(4.0 * s1.max(s2))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blend_derivatives_match_differences() {
        let th = DefaultBlend;
        for &x in &[0.35, 0.4, 0.5, 0.6, 0.65] {
            let h = 1e-6;
            let (_, d1, d2) = th.eval(x);
            let fd1 = (th.eval(x + h).0 - th.eval(x - h).0) / (2.0 * h);
            let fd2 = (th.eval(x + h).1 - th.eval(x - h).1) / (2.0 * h);
            assert!((d1 - fd1).abs() < 1e-6, "x={x}: {d1} vs {fd1}");
            assert!((d2 - fd2).abs() < 1e-4 * (1.0 + d2.abs()), "x={x}: {d2} vs {fd2}");
        }
    }

    #[test]
    fn k_is_at_least_the_left_endpoint_value() {
        let k = k_constant(&DefaultBlend).unwrap();
        // at x = 1/3: |θ'/θ| = 3 and |(θ''θ - θ'²)/θ²| = 9
        assert!(k >= 36.0);
    }

    #[test]
    fn rescaled_argument_rejected() {
        let bad = FnCutoff {
            name: "rescaled".into(),
            f: Arc::new(|x: f64| {
                let (a, b, c) = DefaultBlend.eval(x / 2.0);
                (a, b / 2.0, c / 4.0)
            }),
        };
        assert!(matches!(k_constant(&bad), Err(Error::InvalidCutoff(_))));
    }
}
