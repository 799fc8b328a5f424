use super::{Mlp, Result};

/// Outcome of an optimizer step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepStatus {
    Applied,
    /// The gradient had a NaN or infinite entry; parameters and moments
    /// were left untouched.
    SkippedNonFinite,
}

/// Adam with bias correction.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: u64,
    m: Mlp,
    v: Mlp,
}

impl Adam {
    pub fn new(params: &Mlp, lr: f64) -> Self {
        Self { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, t: 0, m: params.zeros_like(), v: params.zeros_like() }
    }

    pub fn steps_taken(&self) -> u64 {
        self.t
    }

    pub fn step(&mut self, params: &mut Mlp, grads: &Mlp) -> Result<StepStatus> {
        if !params.same_shape(grads) || !params.same_shape(&self.m) {
            return Err(super::mismatch(format!("{:?}", params.sizes()), format!("{:?}", grads.sizes())));
        }
        if !grads.is_finite() {
            return Ok(StepStatus::SkippedNonFinite);
        }
        self.t += 1;
        let (b1, b2) = (self.beta1, self.beta2);
        let c1 = 1.0 - b1.powi(self.t as i32);
        let c2 = 1.0 - b2.powi(self.t as i32);
        let step = self.lr / c1;
        let eps = self.eps;
        for (((p, g), m), v) in params
            .params_mut()
            .zip(grads.params())
            .zip(self.m.params_mut())
            .zip(self.v.params_mut())
        {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            *p -= step * *m / ((*v / c2).sqrt() + eps);
        }
        Ok(StepStatus::Applied)
    }
}

/// Adam on a single scalar, used for the entropy temperature.
#[derive(Debug, Clone)]
pub struct ScalarAdam {
    pub lr: f64,
    t: u64,
    m: f64,
    v: f64,
}

impl ScalarAdam {
    pub fn new(lr: f64) -> Self {
        Self { lr, t: 0, m: 0.0, v: 0.0 }
    }

    pub fn step(&mut self, x: &mut f64, g: f64) -> StepStatus {
        if !g.is_finite() {
            return StepStatus::SkippedNonFinite;
        }
        self.t += 1;
        self.m = 0.9 * self.m + 0.1 * g;
        self.v = 0.999 * self.v + 0.001 * g * g;
        let mh = self.m / (1.0 - 0.9f64.powi(self.t as i32));
        let vh = self.v / (1.0 - 0.999f64.powi(self.t as i32));
        *x -= self.lr * mh / (vh.sqrt() + 1e-8);
        StepStatus::Applied
    }
}
