//! Monotone cubic Hermite interpolation (Fritsch–Carlson).
//!
//! Node slopes are the weighted harmonic means of adjacent secants, which
//! keeps the interpolant free of overshoot on shape-changing data such as a
//! neck profile. Derivatives come from differentiating the cubic pieces, so
//! first derivatives are continuous and second derivatives piecewise linear.

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct MonotoneCubic {
    x: Vec<f64>,
    y: Vec<f64>,
    slope: Vec<f64>,
}

impl MonotoneCubic {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::InvalidMetric(format!(
                "sample length mismatch: {} coordinates vs {} values",
                x.len(),
                y.len()
            )));
        }
        if x.len() < 2 {
            return Err(Error::InvalidMetric("need at least 2 samples".into()));
        }
        for w in x.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::InvalidMetric(format!(
                    "sample coordinates must be strictly increasing ({} then {})",
                    w[0], w[1]
                )));
            }
        }
        if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidMetric("non-finite sample".into()));
        }

        let n = x.len();
        let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let delta: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / h[i]).collect();

        let mut slope = vec![0.0; n];
        for i in 1..n - 1 {
            let (d0, d1) = (delta[i - 1], delta[i]);
            if d0 * d1 <= 0.0 {
                slope[i] = 0.0;
            } else {
                // Fritsch-Carlson weighted harmonic mean
                let w1 = 2.0 * h[i] + h[i - 1];
                let w2 = h[i] + 2.0 * h[i - 1];
                slope[i] = (w1 + w2) / (w1 / d0 + w2 / d1);
            }
        }
        slope[0] = edge_slope(h[0], h.get(1).copied().unwrap_or(h[0]), delta[0], delta.get(1).copied().unwrap_or(delta[0]));
        slope[n - 1] = edge_slope(
            h[n - 2],
            if n >= 3 { h[n - 3] } else { h[n - 2] },
            delta[n - 2],
            if n >= 3 { delta[n - 3] } else { delta[n - 2] },
        );

        Ok(Self { x, y, slope })
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.x[0], *self.x.last().unwrap())
    }

    fn segment(&self, s: f64) -> usize {
        match self.x.binary_search_by(|v| v.total_cmp(&s)) {
            Ok(i) => i.min(self.x.len() - 2),
            Err(i) => i.saturating_sub(1).min(self.x.len() - 2),
        }
    }

    /// Interpolated value; clamps to the end values outside the domain.
    pub fn eval(&self, s: f64) -> f64 {
        let i = self.segment(s);
        let h = self.x[i + 1] - self.x[i];
        let t = ((s - self.x[i]) / h).clamp(0.0, 1.0);
        let (h00, h10, h01, h11) = hermite_basis(t);
        h00 * self.y[i] + h10 * h * self.slope[i] + h01 * self.y[i + 1] + h11 * h * self.slope[i + 1]
    }

    pub fn deriv(&self, s: f64) -> f64 {
        let i = self.segment(s);
        let h = self.x[i + 1] - self.x[i];
        let t = ((s - self.x[i]) / h).clamp(0.0, 1.0);
        let dy = self.y[i + 1] - self.y[i];
        // d/ds of the Hermite basis combination
        let dh00 = (6.0 * t * t - 6.0 * t) / h;
        let dh10 = 3.0 * t * t - 4.0 * t + 1.0;
        let dh01 = -dh00;
        let dh11 = 3.0 * t * t - 2.0 * t;
        dh00 * self.y[i] + dh10 * self.slope[i] + dh01 * (self.y[i] + dy) + dh11 * self.slope[i + 1]
    }

    pub fn second_deriv(&self, s: f64) -> f64 {
        let i = self.segment(s);
        let h = self.x[i + 1] - self.x[i];
        let t = ((s - self.x[i]) / h).clamp(0.0, 1.0);
        let dy = self.y[i + 1] - self.y[i];
        let d2h00 = (12.0 * t - 6.0) / (h * h);
        let d2h10 = (6.0 * t - 4.0) / h;
        let d2h01 = -d2h00;
        let d2h11 = (6.0 * t - 2.0) / h;
        d2h00 * self.y[i] + d2h10 * self.slope[i] + d2h01 * (self.y[i] + dy) + d2h11 * self.slope[i + 1]
    }
}

fn hermite_basis(t: f64) -> (f64, f64, f64, f64) {
    let t2 = t * t;
    let t3 = t2 * t;
    (
        2.0 * t3 - 3.0 * t2 + 1.0,
        t3 - 2.0 * t2 + t,
        -2.0 * t3 + 3.0 * t2,
        t3 - t2,
    )
}

/// One-sided three-point end slope with the monotonicity limiter.
fn edge_slope(h0: f64, h1: f64, d0: f64, d1: f64) -> f64 {
    let mut d = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if d * d0 <= 0.0 {
        d = 0.0;
    } else if d0 * d1 <= 0.0 && d.abs() > 3.0 * d0.abs() {
        d = 3.0 * d0;
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(a: f64, b: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn rejects_bad_input() {
        assert!(MonotoneCubic::new(vec![0.0, 0.0, 1.0], vec![1.0, 2.0, 3.0]).is_err());
        assert!(MonotoneCubic::new(vec![0.0], vec![1.0]).is_err());
    }

    #[test]
    fn reproduces_linear_data_exactly() {
        let x = grid(0.0, 5.0, 17);
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v + 1.0).collect();
        let f = MonotoneCubic::new(x, y).unwrap();
        for s in [0.1, 1.7, 4.99] {
            assert!((f.eval(s) - (3.0 * s + 1.0)).abs() < 1e-13);
            assert!((f.deriv(s) - 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn preserves_monotonicity_on_steps() {
        let x = grid(0.0, 1.0, 11);
        let y = vec![0.0, 0.0, 0.0, 0.1, 0.9, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0];
        let f = MonotoneCubic::new(x, y).unwrap();
        let mut prev = f.eval(0.0);
        for i in 1..=400 {
            let s = i as f64 / 400.0;
            let v = f.eval(s);
            assert!(v >= prev - 1e-12, "overshoot at {s}: {v} < {prev}");
            prev = v;
        }
    }

    #[test]
    fn derivative_accuracy_on_smooth_function() {
        // smooth monotone function sampled densely; FC node slopes are O(h^2)
        let x = grid(4.0, 8.0, 4096);
        let y: Vec<f64> = x.iter().map(|v| 1.0 / (1.0 - 2.0 / v)).collect();
        let f = MonotoneCubic::new(x.clone(), y).unwrap();
        for s in [4.3, 5.0, 6.5, 7.7] {
            let exact = -2.0 / ((s - 2.0) * (s - 2.0));
            let rel = (f.deriv(s) - exact).abs() / exact.abs();
            assert!(rel < 1e-6, "rel error {rel} at s={s}");
        }
    }
}
