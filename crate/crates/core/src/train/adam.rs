use crate::error::{Error, Result};

/// Adam with bias correction.
#[derive(Clone, Debug, PartialEq)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(len: usize) -> Self {
        Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.t
    }

    /// Updates `params` in place with gradient `grad` and step size `lr`.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) -> Result<()> {
        if params.len() != self.m.len() || grad.len() != self.m.len() {
            return Err(Error::dim("Adam state", self.m.len(), format!("{}/{}", params.len(), grad.len())));
        }
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t as i32);
        let c2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let mh = self.m[i] / c1;
            let vh = self.v[i] / c2;
            params[i] -= lr * mh / (vh.sqrt() + self.eps);
        }
        Ok(())
    }
}

/// Step decay: the rate is multiplied by `1 − decay` after every `period` iterations and
/// never drops below `floor`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LrSchedule {
    pub initial: f64,
    pub decay: f64,
    pub period: usize,
    pub floor: f64,
}

impl LrSchedule {
    pub fn constant(lr: f64) -> Self {
        LrSchedule { initial: lr, decay: 0.0, period: 1000, floor: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.initial > 0.0) || !self.initial.is_finite() {
            return Err(Error::Config(format!("learning rate must be positive, got {}", self.initial)));
        }
        if !(0.0..1.0).contains(&self.decay) {
            return Err(Error::Config(format!("decay rate must lie in [0, 1), got {}", self.decay)));
        }
        if self.period == 0 {
            return Err(Error::Config("decay period must be positive".into()));
        }
        if !(self.floor >= 0.0) || self.floor > self.initial {
            return Err(Error::Config(format!("learning-rate floor {} must lie in [0, initial]", self.floor)));
        }
        Ok(())
    }

    /// Rate used at iteration `iter` (counted from zero).
    pub fn at(&self, iter: usize) -> f64 {
        let periods = (iter / self.period) as i32;
        (self.initial * (1.0 - self.decay).powi(periods)).max(self.floor)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut a = Adam::new(3);
        let mut p = vec![1.0, -2.0, 0.5];
        for _ in 0..10 {
            a.step(&mut p, &[0.0; 3], 0.1).unwrap();
        }
        assert_eq!(p, vec![1.0, -2.0, 0.5]);
    }

    #[test]
    fn quadratic_converges() {
        // f(x) = (x − 0.5)², minimizer 0.5
        let mut a = Adam::new(1);
        let mut x = vec![0.0];
        for _ in 0..100 {
            let g = [2.0 * (x[0] - 0.5)];
            a.step(&mut x, &g, 0.02).unwrap();
        }
        assert!((x[0] - 0.5).abs() < 1e-3, "{}", x[0]);
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut a = Adam::new(2);
        let mut p = vec![0.0, 0.0];
        a.step(&mut p, &[5.0, -1e-3], 0.01).unwrap();
        assert!((p[0] + 0.01).abs() < 1e-9 && (p[1] - 0.01).abs() < 1e-7);
    }

    #[test]
    fn schedule_decays_to_floor() {
        let s = LrSchedule { initial: 1e-4, decay: 0.01, period: 1000, floor: 1e-5 };
        assert_eq!(s.at(0), 1e-4);
        assert_eq!(s.at(999), 1e-4);
        assert!((s.at(1000) - 0.99e-4).abs() < 1e-18);
        assert_eq!(s.at(10_000_000), 1e-5);
        assert!(LrSchedule { decay: 1.0, ..s }.validate().is_err());
        assert!(LrSchedule { floor: 1.0, ..s }.validate().is_err());
    }
}
