use serde::{Deserialize, Serialize};

use super::tensor::Tensor;
use super::NumericsError;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamHyper {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        AdamHyper {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Per-parameter moment estimates. The caller owns the parameter order and
/// must keep it stable across steps.
pub struct AdamState {
    pub step_count: u64,
    first_moment: Vec<Tensor>,
    second_moment: Vec<Tensor>,
    pub hyper: AdamHyper,
}

impl AdamState {
    pub fn new(param_shapes: &[Vec<usize>], hyper: AdamHyper) -> Self {
        AdamState {
            step_count: 0,
            first_moment: param_shapes.iter().map(|s| Tensor::zeros(s)).collect(),
            second_moment: param_shapes.iter().map(|s| Tensor::zeros(s)).collect(),
            hyper,
        }
    }

    /// Validate gradients and advance the step counter. The update is
    /// aborted before any parameter is touched if a gradient is non-finite
    /// or misshapen. Follow with one `update` call per parameter, in order.
    pub fn begin_step(&mut self, grads: &[Tensor]) -> Result<(), NumericsError> {
        assert_eq!(grads.len(), self.first_moment.len(), "gradient count drift");
        for (grad, m) in grads.iter().zip(&self.first_moment) {
            if grad.shape() != m.shape() {
                return Err(NumericsError::ShapeMismatch {
                    op: "adam_step",
                    lhs: m.shape().to_vec(),
                    rhs: grad.shape().to_vec(),
                });
            }
            if !grad.all_finite() {
                return Err(NumericsError::NumericFault { op: "adam_step" });
            }
        }
        self.step_count += 1;
        Ok(())
    }

    /// Apply the current step's update to parameter `index`.
    pub fn update(&mut self, index: usize, param: &mut Tensor, grad: &Tensor) {
        debug_assert!(self.step_count > 0, "update before begin_step");
        let t = self.step_count as i32;
        let h = self.hyper;
        let bc1 = 1.0 - h.beta1.powi(t);
        let bc2 = 1.0 - h.beta2.powi(t);
        let pd = param.data_mut();
        let md = self.first_moment[index].data_mut();
        let vd = self.second_moment[index].data_mut();
        for i in 0..pd.len() {
            let g = grad.data()[i];
            md[i] = h.beta1 * md[i] + (1.0 - h.beta1) * g;
            vd[i] = h.beta2 * vd[i] + (1.0 - h.beta2) * g * g;
            let m_hat = md[i] / bc1;
            let v_hat = vd[i] / bc2;
            pd[i] -= h.lr * m_hat / (v_hat.sqrt() + h.epsilon);
        }
    }

    /// One Adam update with bias correction over a full parameter list.
    pub fn step(
        &mut self,
        params: &mut [&mut Tensor],
        grads: &[Tensor],
    ) -> Result<(), NumericsError> {
        assert_eq!(params.len(), grads.len(), "gradient count mismatch");
        self.begin_step(grads)?;
        for (i, (param, grad)) in params.iter_mut().zip(grads).enumerate() {
            self.update(i, param, grad);
        }
        Ok(())
    }
}
