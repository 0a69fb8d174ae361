use serde::{Deserialize, Serialize};

use super::TrainError;
use crate::model::LoadCNNParams;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Adam,
    Sgd,
}

impl std::str::FromStr for OptimizerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "adam" => Ok(OptimizerKind::Adam),
            "sgd" => Ok(OptimizerKind::Sgd),
            other => Err(format!("unknown optimizer {other:?} (expected adam or sgd)")),
        }
    }
}

impl std::fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            OptimizerKind::Adam => "adam",
            OptimizerKind::Sgd => "sgd",
        })
    }
}

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPSILON: f64 = 1e-8;

/// Optimizer state; empty for SGD, first/second moments for Adam.
#[derive(Debug, Clone, PartialEq)]
pub enum OptimizerState {
    Sgd,
    Adam {
        step: u64,
        m: Vec<Vec<f64>>,
        v: Vec<Vec<f64>>,
    },
}

impl OptimizerState {
    pub fn new(kind: OptimizerKind) -> Self {
        match kind {
            OptimizerKind::Sgd => OptimizerState::Sgd,
            OptimizerKind::Adam => OptimizerState::Adam {
                step: 0,
                m: Vec::new(),
                v: Vec::new(),
            },
        }
    }
}

/// Applies one update to `params` in place. Adam moments are created lazily
/// on the first call.
pub fn optimizer_step(
    params: Vec<&mut Tensor>,
    grads: Vec<&Tensor>,
    state: &mut OptimizerState,
    lr: f64,
) -> Result<(), TrainError> {
    if params.len() != grads.len() {
        return Err(TrainError::Mismatch(format!(
            "{} parameter tensors but {} gradients",
            params.len(),
            grads.len()
        )));
    }
    for (i, (p, g)) in params.iter().zip(&grads).enumerate() {
        if p.shape() != g.shape() {
            return Err(TrainError::Mismatch(format!(
                "tensor {i}: parameter {:?} vs gradient {:?}",
                p.shape(),
                g.shape()
            )));
        }
    }
    match state {
        OptimizerState::Sgd => {
            for (p, g) in params.into_iter().zip(grads) {
                for (pv, gv) in p.data_mut().iter_mut().zip(g.data()) {
                    *pv -= lr * gv;
                }
            }
        }
        OptimizerState::Adam { step, m, v } => {
            if m.is_empty() {
                *m = grads.iter().map(|g| vec![0.0; g.len()]).collect();
                *v = m.clone();
            }
            if m.len() != grads.len() || m.iter().zip(&grads).any(|(a, g)| a.len() != g.len()) {
                return Err(TrainError::Mismatch("Adam state does not match parameters".into()));
            }
            *step += 1;
            let bc1 = 1.0 - ADAM_BETA1.powf(*step as f64);
            let bc2 = 1.0 - ADAM_BETA2.powf(*step as f64);
            for (((p, g), mt), vt) in params.into_iter().zip(grads).zip(m.iter_mut()).zip(v.iter_mut()) {
                for (((pv, &gv), mv), vv) in p
                    .data_mut()
                    .iter_mut()
                    .zip(g.data())
                    .zip(mt.iter_mut())
                    .zip(vt.iter_mut())
                {
                    *mv = ADAM_BETA1 * *mv + (1.0 - ADAM_BETA1) * gv;
                    *vv = ADAM_BETA2 * *vv + (1.0 - ADAM_BETA2) * gv * gv;
                    let m_hat = *mv / bc1;
                    let v_hat = *vv / bc2;
                    *pv -= lr * m_hat / (v_hat.sqrt() + ADAM_EPSILON);
                }
            }
        }
    }
    Ok(())
}

pub fn step_params(
    params: &mut LoadCNNParams,
    grads: &LoadCNNParams,
    state: &mut OptimizerState,
    lr: f64,
) -> Result<(), TrainError> {
    optimizer_step(params.tensors_mut(), grads.tensors(), state, lr)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sgd_step() {
        let mut p = Tensor::from_vec(vec![1.0]);
        let g = Tensor::from_vec(vec![0.5]);
        let mut s = OptimizerState::new(OptimizerKind::Sgd);
        optimizer_step(vec![&mut p], vec![&g], &mut s, 0.1).unwrap();
        assert!((p.data()[0] - 0.95).abs() < 1e-15);
    }

    #[test]
    fn adam_first_step_moves_by_lr() {
        for g in [1e-3, 0.7, -42.0] {
            let mut p = Tensor::from_vec(vec![2.0]);
            let mut s = OptimizerState::new(OptimizerKind::Adam);
            optimizer_step(vec![&mut p], vec![&Tensor::from_vec(vec![g])], &mut s, 0.01).unwrap();
            let moved = 2.0 - p.data()[0];
            // lr * g / (|g| + eps)
            assert!((moved.abs() - 0.01).abs() < 1e-7, "{moved}");
            assert_eq!(moved.signum(), g.signum());
        }
    }

    #[test]
    fn zero_gradient_leaves_params() {
        for kind in [OptimizerKind::Adam, OptimizerKind::Sgd] {
            let mut p = Tensor::from_vec(vec![1.0, -3.0]);
            let before = p.clone();
            let mut s = OptimizerState::new(kind);
            for _ in 0..3 {
                optimizer_step(vec![&mut p], vec![&Tensor::zeros(&[2])], &mut s, 0.1).unwrap();
            }
            assert_eq!(p, before);
        }
    }

    #[test]
    fn shape_mismatch() {
        let mut p = Tensor::zeros(&[2]);
        let mut s = OptimizerState::new(OptimizerKind::Sgd);
        assert!(optimizer_step(vec![&mut p], vec![&Tensor::zeros(&[3])], &mut s, 0.1).is_err());
        assert!(optimizer_step(vec![&mut p], vec![], &mut s, 0.1).is_err());
    }
}
