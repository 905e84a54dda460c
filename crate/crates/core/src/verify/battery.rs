//! Compactly supported test functions of one reduced coordinate.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

/// `phi((q - center) / width)` times a polynomial (`positive = false`) or an
/// exponential (`positive = true`), with `phi(y) = exp(1 - 1/(1 - y^2))` on `|y| < 1`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TestFunction {
    pub center: f64,
    pub width: f64,
    /// `1 + a y + b y^2` for the signed family, `e^{a y}` for the positive one.
    pub a: f64,
    pub b: f64,
    pub positive: bool,
    /// Circle length, for periodic coordinates.
    pub period: Option<f64>,
}

impl TestFunction {
    fn offset(&self, q: f64) -> f64 {
        let d = q - self.center;
        match self.period {
            Some(p) => d - p * (d / p).round(),
            None => d,
        }
    }

    /// Value and derivative in `q`.
    pub fn eval(&self, q: f64) -> (f64, f64) {
        let y = self.offset(q) / self.width;
        if y.abs() >= 1.0 {
            return (0.0, 0.0);
        }
        let s = 1.0 - y * y;
        let phi = (1.0 - 1.0 / s).exp();
        let dlog_phi = -2.0 * y / (s * s);
        if self.positive {
            let u = phi * (self.a * y).exp();
            (u, u * (dlog_phi + self.a) / self.width)
        } else {
            let p = 1.0 + self.a * y + self.b * y * y;
            let dp = self.a + 2.0 * self.b * y;
            (phi * p, phi * (dlog_phi * p + dp) / self.width)
        }
    }
}

/// `count` functions with supports inside `[lo, hi]` (or anywhere on a circle
/// of length `period`), drawn from a generator seeded with `seed`.
pub fn test_function(seed: u64, count: usize, lo: f64, hi: f64, period: Option<f64>, positive: bool) -> Vec<TestFunction> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let span = hi - lo;
    (0..count)
        .map(|_| {
            let max_width = if period.is_some() { 0.45 * span } else { 0.5 * span };
            let width = rng.random_range(0.05 * span..max_width);
            let center = match period {
                Some(_) => rng.random_range(lo..hi),
                None => rng.random_range(lo..(hi - width).max(lo + 1e-12)),
            };
            TestFunction {
                center,
                width,
                a: rng.random_range(-2.0..2.0),
                b: rng.random_range(-2.0..2.0),
                positive,
                period,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivative_matches_finite_differences() {
        for f in test_function(7, 20, 0.0, 3.0, None, false)
            .into_iter()
            .chain(test_function(7, 20, 0.0, 1.0, Some(1.0), true))
        {
            for k in 1..40 {
                let q = f.center - f.width + 2.0 * f.width * k as f64 / 40.0;
                let h = 1e-6 * f.width;
                let fd = (f.eval(q + h).0 - f.eval(q - h).0) / (2.0 * h);
                assert!((fd - f.eval(q).1).abs() <= 1e-6 * (1.0 + fd.abs()), "{f:?} at {q}");
            }
        }
    }

    #[test]
    fn supports_and_signs() {
        let fs = test_function(3, 50, 0.0, 2.0, None, true);
        for f in &fs {
            assert!(f.center + f.width <= 2.0 + 1e-12);
            assert_eq!(f.eval(f.center + f.width), (0.0, 0.0));
            assert!(f.eval(f.center).0 > 0.0);
        }
        assert_eq!(fs, test_function(3, 50, 0.0, 2.0, None, true));
        let p = &test_function(1, 1, 0.0, 1.0, Some(1.0), false)[0];
        assert!((p.eval(0.3).0 - p.eval(1.3).0).abs() < 1e-14);
    }
}
