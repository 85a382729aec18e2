//! Small numeric helpers shared across modules.

use crate::error::{Error, Result};

/// Neumaier (improved Kahan) compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct NeumaierSum {
    sum: f64,
    comp: f64,
}

impl NeumaierSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut acc = NeumaierSum::new();
    for v in values {
        acc.add(v);
    }
    acc.value()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Checks that `x` is a probability vector of length `len` to within `tol`.
pub fn check_simplex(x: &[f64], len: usize, tol: f64, what: &str) -> Result<()> {
    if x.len() != len {
        return Err(Error::Domain(format!("{what} has length {}, expected {len}", x.len())));
    }
    if x.iter().any(|v| !v.is_finite() || *v < -tol) {
        return Err(Error::Domain(format!("{what} has a negative or non-finite entry")));
    }
    let total: f64 = x.iter().sum();
    if (total - 1.0).abs() > tol {
        return Err(Error::Domain(format!("{what} sums to {total}, not 1")));
    }
    Ok(())
}

pub fn uniform(m: usize) -> Vec<f64> {
    vec![1.0 / m as f64; m]
}

/// `n` points log-spaced on `[lo, hi]`, endpoints included.
pub fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut vals = vec![1e16];
        vals.extend(std::iter::repeat(1.0).take(1000));
        vals.push(-1e16);
        assert_eq!(compensated_sum(vals.iter().copied()), 1000.0);
    }

    #[test]
    fn simplex_check() {
        assert!(check_simplex(&[0.5, 0.5], 2, 1e-10, "x").is_ok());
        assert!(check_simplex(&[0.6, 0.5], 2, 1e-10, "x").is_err());
        assert!(check_simplex(&[1.0], 2, 1e-10, "x").is_err());
        assert!(check_simplex(&[1.5, -0.5], 2, 1e-10, "x").is_err());
    }

    #[test]
    fn log_space_endpoints() {
        let v = log_space(1e-4, 1e-1, 4);
        assert!((v[0] - 1e-4).abs() < 1e-18 && (v[3] - 1e-1).abs() < 1e-15);
        assert!((v[1] - 1e-3).abs() < 1e-15);
    }
}
