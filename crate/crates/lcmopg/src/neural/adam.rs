//! Adam optimizer over a flat parameter buffer.

use crate::error::{Error, Result};

/// Adam with bias-corrected first and second moments.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    /// Standard coefficients: beta1 = 0.9, beta2 = 0.999, eps = 1e-8.
    pub fn new(lr: f64, n_params: usize) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.t
    }

    /// One descent step in place. Rejects non-finite gradients so callers
    /// can snapshot parameters before corruption.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) -> Result<()> {
        if params.len() != self.m.len() || grad.len() != self.m.len() {
            return Err(Error::contract(format!(
                "optimizer sized for {} parameters, got {}/{}",
                self.m.len(),
                params.len(),
                grad.len()
            )));
        }
        if !grad.iter().all(|g| g.is_finite()) {
            return Err(Error::Numeric("non-finite gradient".into()));
        }
        self.t += 1;
        let b1t = 1.0 - self.beta1.powi(self.t as i32);
        let b2t = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / b1t;
            let v_hat = self.v[i] / b2t;
            params[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_parameters_alone() {
        let mut params = vec![1.0, -2.0, 3.0];
        let mut opt = Adam::new(1e-3, 3);
        opt.step(&mut params, &[0.0, 0.0, 0.0]).unwrap();
        assert_eq!(params, vec![1.0, -2.0, 3.0]);
    }

    #[test]
    fn first_step_moves_by_lr_along_gradient_sign() {
        // After bias correction the very first update is lr * g / (|g| + eps).
        let mut params = vec![0.0, 0.0];
        let mut opt = Adam::new(1e-3, 2);
        opt.step(&mut params, &[0.5, -2.0]).unwrap();
        assert!((params[0] + 1e-3).abs() < 1e-9, "{}", params[0]);
        assert!((params[1] - 1e-3).abs() < 1e-9, "{}", params[1]);
    }

    #[test]
    fn constant_gradient_step_size_approaches_lr() {
        let mut params = vec![0.0];
        let mut opt = Adam::new(1e-2, 1);
        let mut prev = params[0];
        let mut last_delta = 0.0;
        for _ in 0..200 {
            opt.step(&mut params, &[3.7]).unwrap();
            last_delta = (params[0] - prev).abs();
            prev = params[0];
        }
        assert!((last_delta - 1e-2).abs() < 5e-4, "step {last_delta}");
    }

    #[test]
    fn rejects_nan_gradient_and_size_mismatch() {
        let mut params = vec![0.0];
        let mut opt = Adam::new(1e-3, 1);
        assert!(opt.step(&mut params, &[f64::NAN]).is_err());
        assert!(opt.step(&mut params, &[1.0, 2.0]).is_err());
        assert_eq!(params, vec![0.0], "failed steps must not move parameters");
    }
}
