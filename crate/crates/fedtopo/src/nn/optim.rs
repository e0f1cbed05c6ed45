//! SGD with classical momentum and step learning-rate decay.

use crate::error::{Error, Result};
use crate::nn::model::NamedParam;
use crate::nn::tensor::Tensor;

#[derive(Debug, Clone)]
pub struct OptimizerState {
    pub base_lr: f64,
    pub lr: f64,
    pub momentum: f64,
    pub step_size: usize,
    pub gamma: f64,
    pub epoch: usize,
    velocities: Vec<Tensor>,
}

impl OptimizerState {
    pub fn new(base_lr: f64, momentum: f64, step_size: usize, gamma: f64, params: &[NamedParam]) -> Self {
        Self {
            base_lr,
            lr: base_lr,
            momentum,
            step_size,
            gamma,
            epoch: 0,
            velocities: params.iter().map(|p| Tensor::zeros(&p.value.shape)).collect(),
        }
    }

    /// lr at a given epoch: base * gamma^floor(epoch / step_size).
    pub fn lr_for_epoch(&self, epoch: usize) -> f64 {
        self.base_lr * self.gamma.powi((epoch / self.step_size) as i32)
    }

    /// Advances the epoch counter and refreshes the learning rate.
    pub fn scheduler_step(&mut self) {
        self.epoch += 1;
        self.lr = self.lr_for_epoch(self.epoch);
    }

    /// Restarts momentum without touching the schedule (used when local
    /// weights are replaced by a broadcast).
    pub fn reset_velocity(&mut self) {
        for v in &mut self.velocities {
            v.data.fill(0.0);
        }
    }

    /// v <- mu*v + g; w <- w - lr*v.
    pub fn sgd_step(&mut self, params: &mut [NamedParam], grads: &[Tensor]) -> Result<()> {
        if params.len() != self.velocities.len() || grads.len() != params.len() {
            return Err(Error::Shape("parameter/gradient/velocity count mismatch".into()));
        }
        for ((p, g), v) in params.iter_mut().zip(grads).zip(&mut self.velocities) {
            if !p.value.same_shape(g) {
                return Err(Error::Shape(format!(
                    "gradient shape {:?} for parameter {} of shape {:?}",
                    g.shape, p.name, p.value.shape
                )));
            }
            for i in 0..v.data.len() {
                v.data[i] = self.momentum * v.data[i] + g.data[i];
                p.value.data[i] -= self.lr * v.data[i];
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_param(v: f64) -> Vec<NamedParam> {
        vec![NamedParam { name: "w".into(), value: Tensor::from_vec(&[1], vec![v]).unwrap() }]
    }

    #[test]
    fn zero_momentum_is_plain_gradient_descent() {
        let mut params = single_param(1.0);
        let mut opt = OptimizerState::new(0.1, 0.0, 30, 0.01, &params);
        let g = vec![Tensor::from_vec(&[1], vec![2.0]).unwrap()];
        opt.sgd_step(&mut params, &g).unwrap();
        assert!((params[0].value.data[0] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn two_momentum_steps_match_hand_recurrence() {
        let mut params = single_param(1.0);
        let mut opt = OptimizerState::new(0.1, 0.9, 30, 0.01, &params);
        let g = vec![Tensor::from_vec(&[1], vec![1.0]).unwrap()];
        opt.sgd_step(&mut params, &g).unwrap();
        opt.sgd_step(&mut params, &g).unwrap();
        // v1 = 1, w1 = 0.9; v2 = 1.9, w2 = 0.9 - 0.19 = 0.71.
        assert!((params[0].value.data[0] - 0.71).abs() < 1e-15);
    }

    #[test]
    fn zero_gradient_decays_velocity_geometrically() {
        let mut params = single_param(1.0);
        let mut opt = OptimizerState::new(0.1, 0.5, 30, 0.01, &params);
        let g1 = vec![Tensor::from_vec(&[1], vec![1.0]).unwrap()];
        opt.sgd_step(&mut params, &g1).unwrap();
        let w_after = params[0].value.data[0];
        let zero = vec![Tensor::zeros(&[1])];
        let mut expected_v = 1.0;
        let mut expected_w = w_after;
        for _ in 0..4 {
            opt.sgd_step(&mut params, &zero).unwrap();
            expected_v *= 0.5;
            expected_w -= 0.1 * expected_v;
            assert!((opt.velocities[0].data[0] - expected_v).abs() < 1e-15);
            assert!((params[0].value.data[0] - expected_w).abs() < 1e-15);
        }
    }

    #[test]
    fn step_schedule_reference_points() {
        let params = single_param(0.0);
        let opt = OptimizerState::new(0.01, 0.9, 30, 0.01, &params);
        assert_eq!(opt.lr_for_epoch(0), 0.01);
        assert_eq!(opt.lr_for_epoch(29), 0.01);
        assert!((opt.lr_for_epoch(30) - 1e-4).abs() < 1e-18);
    }

    #[test]
    fn scheduler_step_advances_epoch() {
        let params = single_param(0.0);
        let mut opt = OptimizerState::new(0.01, 0.9, 2, 0.5, &params);
        opt.scheduler_step();
        opt.scheduler_step();
        assert_eq!(opt.epoch, 2);
        assert!((opt.lr - 0.005).abs() < 1e-15);
    }
}
