//! Minimal dense-tensor engine with reverse-mode differentiation.
//!
//! Tensors are channel-last (`[h, w, c]`) row-major. A [`Graph`] records the
//! forward pass as a tape; [`Graph::backward`] replays it in reverse. Every
//! reduction runs in a fixed row-major order so forward and backward are
//! bit-deterministic for a fixed seed.

mod check;
mod ops;

pub use check::{grad_check, grad_check1, grad_check_steps};

use crate::error::{F2NetError, Result};

pub type TensorId = usize;

/// Storage precision for trained parameters. Tests run in double; `Single`
/// rounds parameter values through f32 after each optimizer step.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Precision {
    Double,
    Single,
}

impl Precision {
    pub fn round(self, v: f64) -> f64 {
        match self {
            Precision::Double => v,
            Precision::Single => v as f32 as f64,
        }
    }
}

/// Dense n-dimensional array with an optional gradient slot.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
    pub grad: Option<Vec<f64>>,
    pub requires_grad: bool,
}

impl Tensor {
    pub fn new(shape: &[usize], data: Vec<f64>) -> Result<Self> {
        let numel: usize = shape.iter().product();
        if data.len() != numel {
            return Err(F2NetError::Geometry(format!(
                "tensor data length {} does not match shape {:?} ({} elements)",
                data.len(),
                shape,
                numel
            )));
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data,
            grad: None,
            requires_grad: false,
        })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let numel: usize = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![0.0; numel],
            grad: None,
            requires_grad: false,
        }
    }

    pub fn full(shape: &[usize], value: f64) -> Self {
        let numel: usize = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![value; numel],
            grad: None,
            requires_grad: false,
        }
    }

    pub fn scalar_value(value: f64) -> Self {
        Tensor {
            shape: vec![1],
            data: vec![value],
            grad: None,
            requires_grad: false,
        }
    }

    pub fn numel(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn with_grad(mut self) -> Self {
        self.requires_grad = true;
        self
    }

    /// The single element of a scalar tensor.
    pub fn item(&self) -> f64 {
        assert_eq!(self.numel(), 1, "item() on non-scalar tensor");
        self.data[0]
    }

    /// One SGD update `p <- p - lr * g`, then clears the gradient.
    pub fn sgd_update(&mut self, lr: f64, precision: Precision) -> Result<()> {
        let grad = self
            .grad
            .take()
            .ok_or_else(|| F2NetError::MissingGrad(format!("shape {:?}", self.shape)))?;
        for (p, g) in self.data.iter_mut().zip(grad.iter()) {
            *p = precision.round(*p - lr * g);
        }
        Ok(())
    }
}

/// One SGD step over a parameter list.
pub fn sgd_step(params: &mut [Tensor], lr: f64, precision: Precision) -> Result<()> {
    for p in params.iter_mut() {
        p.sgd_update(lr, precision)?;
    }
    Ok(())
}

/// Backward rule: given the output gradient, produce one gradient buffer per
/// parent, in parent order.
type BackwardFn = Box<dyn Fn(&[f64]) -> Vec<Vec<f64>>>;

struct Node {
    shape: Vec<usize>,
    data: Vec<f64>,
    grad: Vec<f64>,
    requires_grad: bool,
    parents: Vec<TensorId>,
    backward: Option<BackwardFn>,
}

/// Tape of executed operations. Build one per forward/backward pass.
#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
    backward_done: bool,
}

impl Graph {
    pub fn new() -> Self {
        Graph::default()
    }

    /// Registers an input tensor. Gradient tracking follows `t.requires_grad`.
    pub fn leaf(&mut self, t: &Tensor) -> TensorId {
        let numel = t.numel();
        self.nodes.push(Node {
            shape: t.shape.clone(),
            data: t.data.clone(),
            grad: vec![0.0; numel],
            requires_grad: t.requires_grad,
            parents: vec![],
            backward: None,
        });
        self.nodes.len() - 1
    }

    /// Registers a non-differentiable constant.
    pub fn constant(&mut self, shape: &[usize], data: Vec<f64>) -> Result<TensorId> {
        let t = Tensor::new(shape, data)?;
        Ok(self.leaf(&t))
    }

    pub(crate) fn push(
        &mut self,
        shape: Vec<usize>,
        data: Vec<f64>,
        parents: Vec<TensorId>,
        backward: BackwardFn,
    ) -> TensorId {
        let requires_grad = parents.iter().any(|&p| self.nodes[p].requires_grad);
        let numel = data.len();
        self.nodes.push(Node {
            shape,
            data,
            grad: vec![0.0; numel],
            requires_grad,
            parents,
            backward: if requires_grad { Some(backward) } else { None },
        });
        self.nodes.len() - 1
    }

    pub fn shape(&self, id: TensorId) -> &[usize] {
        &self.nodes[id].shape
    }

    pub fn data(&self, id: TensorId) -> &[f64] {
        &self.nodes[id].data
    }

    pub fn grad(&self, id: TensorId) -> &[f64] {
        &self.nodes[id].grad
    }

    pub fn requires_grad(&self, id: TensorId) -> bool {
        self.nodes[id].requires_grad
    }

    /// Exports a node as a standalone tensor (gradient included when tracked).
    pub fn tensor(&self, id: TensorId) -> Tensor {
        let n = &self.nodes[id];
        Tensor {
            shape: n.shape.clone(),
            data: n.data.clone(),
            grad: if n.requires_grad {
                Some(n.grad.clone())
            } else {
                None
            },
            requires_grad: n.requires_grad,
        }
    }

    /// Reverse-mode accumulation from a scalar loss. Visits each recorded op
    /// exactly once, in reverse execution order.
    pub fn backward(&mut self, loss: TensorId) -> Result<()> {
        if self.backward_done {
            return Err(F2NetError::BackwardTwice);
        }
        let loss_node = &self.nodes[loss];
        if loss_node.data.len() != 1 {
            return Err(F2NetError::NonScalarLoss(loss_node.shape.clone()));
        }
        self.backward_done = true;
        self.nodes[loss].grad[0] = 1.0;
        for id in (0..=loss).rev() {
            if !self.nodes[id].requires_grad {
                continue;
            }
            let Some(backward) = self.nodes[id].backward.take() else {
                continue;
            };
            let contributions = backward(&self.nodes[id].grad);
            let parents = self.nodes[id].parents.clone();
            debug_assert_eq!(contributions.len(), parents.len());
            for (parent, contrib) in parents.into_iter().zip(contributions) {
                if !self.nodes[parent].requires_grad {
                    continue;
                }
                let pg = &mut self.nodes[parent].grad;
                debug_assert_eq!(pg.len(), contrib.len());
                for (g, c) in pg.iter_mut().zip(contrib.iter()) {
                    *g += c;
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests;
