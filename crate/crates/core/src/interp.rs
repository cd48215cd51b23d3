//! Shape-preserving piecewise cubic Hermite interpolation.

use crate::error::{Error, Result};

/// Cubic Hermite basis on one interval, `s` in [0, 1].
#[inline]
pub(crate) fn hermite(s: f64, width: f64, y0: f64, y1: f64, d0: f64, d1: f64) -> f64 {
    let s2 = s * s;
    let s3 = s2 * s;
    let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    let h10 = s3 - 2.0 * s2 + s;
    let h01 = -2.0 * s3 + 3.0 * s2;
    let h11 = s3 - s2;
    h00 * y0 + h10 * width * d0 + h01 * y1 + h11 * width * d1
}

/// Derivative of [`hermite`] with respect to the physical coordinate.
#[inline]
pub(crate) fn hermite_slope(s: f64, width: f64, y0: f64, y1: f64, d0: f64, d1: f64) -> f64 {
    let s2 = s * s;
    let g00 = 6.0 * s2 - 6.0 * s;
    let g10 = 3.0 * s2 - 4.0 * s + 1.0;
    let g01 = -6.0 * s2 + 6.0 * s;
    let g11 = 3.0 * s2 - 2.0 * s;
    (g00 * y0 + g01 * y1) / width + g10 * d0 + g11 * d1
}

/// Fritsch–Carlson restriction of endpoint slopes so that the cubic on an
/// interval with secant `delta` is monotone.
pub(crate) fn limit_slopes(delta: f64, d0: f64, d1: f64) -> (f64, f64) {
    if delta == 0.0 {
        return (0.0, 0.0);
    }
    let a = if d0 * delta > 0.0 { d0 / delta } else { 0.0 };
    let b = if d1 * delta > 0.0 { d1 / delta } else { 0.0 };
    let norm = a * a + b * b;
    if norm > 9.0 {
        let tau = 3.0 / norm.sqrt();
        (tau * a * delta, tau * b * delta)
    } else {
        (a * delta, b * delta)
    }
}

/// Monotone piecewise cubic interpolant (PCHIP slopes).
#[derive(Debug, Clone)]
pub struct MonotoneCubic {
    x: Vec<f64>,
    y: Vec<f64>,
    d: Vec<f64>,
}

impl MonotoneCubic {
    /// `x` must be strictly increasing with at least two points.
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() || x.len() < 2 {
            return Err(Error::Precondition(format!(
                "interpolation needs two or more matching points, got {} and {}",
                x.len(),
                y.len()
            )));
        }
        if x.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Precondition(
                "interpolation abscissae must be strictly increasing".into(),
            ));
        }
        let d = pchip_slopes(&x, &y);
        Ok(Self { x, y, d })
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.x[0], self.x[self.x.len() - 1])
    }

    fn segment(&self, x: f64) -> usize {
        let n = self.x.len();
        match self.x.partition_point(|&xi| xi <= x) {
            0 => 0,
            k if k >= n => n - 2,
            k => k - 1,
        }
    }

    /// Evaluate; points outside the table are an error beyond a relative
    /// slack of 1e-12 of the domain width.
    pub fn eval(&self, x: f64) -> Result<f64> {
        let (lo, hi) = self.domain();
        let slack = 1e-12 * (hi - lo).abs().max(hi.abs()).max(lo.abs());
        if !(x >= lo - slack && x <= hi + slack) {
            return Err(Error::OutOfRange(format!(
                "{x} outside interpolation table [{lo}, {hi}]"
            )));
        }
        let x = x.clamp(lo, hi);
        let i = self.segment(x);
        let w = self.x[i + 1] - self.x[i];
        let s = (x - self.x[i]) / w;
        Ok(hermite(
            s,
            w,
            self.y[i],
            self.y[i + 1],
            self.d[i],
            self.d[i + 1],
        ))
    }
}

fn pchip_slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let delta: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / h[i]).collect();
    let mut d = vec![0.0; n];
    if n == 2 {
        d[0] = delta[0];
        d[1] = delta[0];
        return d;
    }
    for k in 1..n - 1 {
        let (a, b) = (delta[k - 1], delta[k]);
        if a * b > 0.0 {
            let w1 = 2.0 * h[k] + h[k - 1];
            let w2 = h[k] + 2.0 * h[k - 1];
            d[k] = (w1 + w2) / (w1 / a + w2 / b);
        }
    }
    d[0] = end_slope(h[0], h[1], delta[0], delta[1]);
    d[n - 1] = end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
    d
}

// One-sided three-point estimate, shape-preserving.
fn end_slope(h0: f64, h1: f64, del0: f64, del1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * del0 - h0 * del1) / (h0 + h1);
    if d.signum() != del0.signum() {
        0.0
    } else if del0.signum() != del1.signum() && d.abs() > 3.0 * del0.abs() {
        3.0 * del0
    } else {
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn reproduces_nodes_and_lines() {
        let x: Vec<f64> = (0..10).map(|i| i as f64 * 0.3).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v - 1.0).collect();
        let p = MonotoneCubic::new(x.clone(), y.clone()).unwrap();
        for (xi, yi) in x.iter().zip(&y) {
            assert_eq!(p.eval(*xi).unwrap(), *yi);
        }
        assert!((p.eval(1.234).unwrap() - (2.0 * 1.234 - 1.0)).abs() < 1e-14);
    }

    #[test]
    fn rejects_bad_tables() {
        assert!(MonotoneCubic::new(vec![0.0], vec![1.0]).is_err());
        assert!(MonotoneCubic::new(vec![0.0, 0.0], vec![1.0, 2.0]).is_err());
        let p = MonotoneCubic::new(vec![0.0, 1.0], vec![1.0, 2.0]).unwrap();
        assert!(matches!(p.eval(1.5), Err(Error::OutOfRange(_))));
    }

    #[test]
    fn limiter_keeps_cubic_monotone() {
        let (d0, d1) = limit_slopes(1.0, 10.0, 10.0);
        for k in 0..=100 {
            let s = k as f64 / 100.0;
            assert!(hermite_slope(s, 1.0, 0.0, 1.0, d0, d1) >= -1e-12);
        }
    }

    proptest! {
        #[test]
        fn monotone_data_gives_monotone_interpolant(
            steps in proptest::collection::vec((0.01f64..1.0, 0.0f64..5.0), 3..20)
        ) {
            let mut x = vec![0.0];
            let mut y = vec![0.0];
            for (dx, dy) in &steps {
                x.push(x.last().unwrap() + dx);
                y.push(y.last().unwrap() + dy);
            }
            let p = MonotoneCubic::new(x.clone(), y).unwrap();
            let (lo, hi) = p.domain();
            let mut prev = f64::NEG_INFINITY;
            for k in 0..=500 {
                let v = p.eval(lo + (hi - lo) * k as f64 / 500.0).unwrap();
                prop_assert!(v >= prev - 1e-12);
                prev = v;
            }
        }
    }
}
