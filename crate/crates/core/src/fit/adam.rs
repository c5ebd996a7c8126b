use serde::{Deserialize, Serialize};

use super::FitError;

/// Adam with a learning rate per coordinate.
#[derive(Debug, Clone)]
pub struct Adam {
    lr: Vec<f64>,
    beta1: f64,
    beta2: f64,
    eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(lr: Vec<f64>) -> Self {
        let n = lr.len();
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub fn step(&mut self, x: &mut [f64], g: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for i in 0..x.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g[i] * g[i];
            x[i] -= self.lr[i] * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + self.eps);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StopRule {
    pub iterations: usize,
    pub tolerance: f64,
    pub window: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Minimized {
    pub params: Vec<f64>,
    pub loss: f64,
    /// Loss at every evaluated iterate.
    pub trace: Vec<f64>,
}

/// Runs Adam from `x0` and returns the lowest-loss iterate seen.
///
/// `f` returns the loss and gradient at a point. Stops after
/// `rule.iterations` steps or once the best loss has improved by less than
/// `rule.tolerance` (relative) over the last `rule.window` iterations.
pub fn minimize(
    x0: &[f64],
    lr: Vec<f64>,
    rule: StopRule,
    mut f: impl FnMut(usize, &[f64]) -> Result<(f64, Vec<f64>), FitError>,
) -> Result<Minimized, FitError> {
    let mut adam = Adam::new(lr);
    let mut x = x0.to_vec();
    let mut best = (f64::INFINITY, x.clone());
    let mut best_history = Vec::new();
    let mut trace = Vec::new();
    for it in 0..=rule.iterations {
        let (loss, grad) = f(it, &x)?;
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(FitError::NonFiniteLoss);
        }
        trace.push(loss);
        if loss < best.0 {
            best = (loss, x.clone());
        }
        best_history.push(best.0);
        if it >= rule.window {
            let before = best_history[it - rule.window];
            if before - best.0 <= rule.tolerance * before.abs() {
                break;
            }
        }
        if it == rule.iterations {
            break;
        }
        adam.step(&mut x, &grad);
    }
    Ok(Minimized {
        params: best.1,
        loss: best.0,
        trace,
    })
}
