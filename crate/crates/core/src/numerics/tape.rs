//! Reverse-mode differentiation over an op tape recorded during one forward
//! pass. A tape is built fresh for every batch and dropped afterwards.

use super::ops;
use super::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct NodeId(usize);

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(NodeId, NodeId),
    AddRowBias(NodeId, NodeId),
    Conv2d(NodeId, NodeId),
    AddChannelBias(NodeId, NodeId),
    Relu(NodeId),
    MaxPool2(NodeId, Vec<usize>),
    Reshape(NodeId),
    MixRows {
        x: NodeId,
        pairing: Vec<usize>,
        lambda: f64,
    },
    SoftmaxXent {
        logits: NodeId,
        probs: Tensor,
        target: Tensor,
    },
    Add(NodeId, NodeId),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Per-node gradients produced by [`Tape::backward`].
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
}

impl Gradients {
    /// Gradient of the loss with respect to `id`, or `None` when no path
    /// connects them.
    pub fn get(&self, id: NodeId) -> Option<&[f64]> {
        self.grads[id.0].as_deref()
    }

    pub fn take(&mut self, id: NodeId) -> Option<Vec<f64>> {
        self.grads[id.0].take()
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> NodeId {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        NodeId(self.nodes.len() - 1)
    }

    fn rg(&self, ids: &[NodeId]) -> bool {
        ids.iter().any(|id| self.nodes[id.0].requires_grad)
    }

    /// Constant input; no gradient is propagated into it.
    pub fn constant(&mut self, value: Tensor) -> NodeId {
        self.push(value, Op::Leaf, false)
    }

    /// Trainable leaf. The value is copied so later parameter updates cannot
    /// alter the recorded pass.
    pub fn param(&mut self, value: &Tensor) -> NodeId {
        let mut v = value.clone();
        v.clear_grad();
        self.push(v, Op::Leaf, true)
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = ops::matmul(self.value(a), self.value(b))?;
        let rg = self.rg(&[a, b]);
        Ok(self.push(v, Op::MatMul(a, b), rg))
    }

    pub fn add_row_bias(&mut self, x: NodeId, bias: NodeId) -> Result<NodeId> {
        let v = ops::add_row_bias(self.value(x), self.value(bias))?;
        let rg = self.rg(&[x, bias]);
        Ok(self.push(v, Op::AddRowBias(x, bias), rg))
    }

    /// `x·w + b` for an `N×in` batch, `in×out` weight and `out` bias.
    pub fn dense(&mut self, x: NodeId, weight: NodeId, bias: NodeId) -> Result<NodeId> {
        let h = self.matmul(x, weight)?;
        self.add_row_bias(h, bias)
    }

    pub fn conv2d(&mut self, x: NodeId, kernel: NodeId) -> Result<NodeId> {
        let v = ops::conv2d(self.value(x), self.value(kernel))?;
        let rg = self.rg(&[x, kernel]);
        Ok(self.push(v, Op::Conv2d(x, kernel), rg))
    }

    pub fn add_channel_bias(&mut self, x: NodeId, bias: NodeId) -> Result<NodeId> {
        let v = ops::add_channel_bias(self.value(x), self.value(bias))?;
        let rg = self.rg(&[x, bias]);
        Ok(self.push(v, Op::AddChannelBias(x, bias), rg))
    }

    pub fn relu(&mut self, x: NodeId) -> NodeId {
        let v = ops::relu(self.value(x));
        let rg = self.rg(&[x]);
        self.push(v, Op::Relu(x), rg)
    }

    pub fn maxpool2(&mut self, x: NodeId) -> Result<NodeId> {
        let (v, arg) = ops::maxpool2(self.value(x))?;
        let rg = self.rg(&[x]);
        Ok(self.push(v, Op::MaxPool2(x, arg), rg))
    }

    pub fn flatten(&mut self, x: NodeId) -> NodeId {
        let v = ops::flatten(self.value(x));
        let rg = self.rg(&[x]);
        self.push(v, Op::Reshape(x), rg)
    }

    pub fn mix_rows(&mut self, x: NodeId, pairing: &[usize], lambda: f64) -> Result<NodeId> {
        let v = ops::mix_rows(self.value(x), pairing, lambda)?;
        let rg = self.rg(&[x]);
        Ok(self.push(
            v,
            Op::MixRows {
                x,
                pairing: pairing.to_vec(),
                lambda,
            },
            rg,
        ))
    }

    /// Scalar batch-mean cross entropy against a constant soft target.
    pub fn softmax_xent(&mut self, logits: NodeId, target: &Tensor) -> Result<NodeId> {
        let (loss, probs) = ops::softmax_xent(self.value(logits), target)?;
        let rg = self.rg(&[logits]);
        Ok(self.push(
            Tensor::scalar(loss),
            Op::SoftmaxXent {
                logits,
                probs,
                target: target.clone(),
            },
            rg,
        ))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.shape() != vb.shape() {
            return Err(Error::shape(
                "add",
                format!("{:?} vs {:?}", va.shape(), vb.shape()),
            ));
        }
        let data = va.data().iter().zip(vb.data()).map(|(x, y)| x + y).collect();
        let v = Tensor::new(va.shape().to_vec(), data)?;
        let rg = self.rg(&[a, b]);
        Ok(self.push(v, Op::Add(a, b), rg))
    }

    /// Softmax probabilities cached by a cross-entropy node.
    pub fn probs(&self, loss: NodeId) -> Option<&Tensor> {
        match &self.nodes[loss.0].op {
            Op::SoftmaxXent { probs, .. } => Some(probs),
            _ => None,
        }
    }

    /// Back-propagates from a scalar node through every recorded op.
    pub fn backward(&self, loss: NodeId) -> Result<Gradients> {
        if self.value(loss).numel() != 1 {
            return Err(Error::shape(
                "backward",
                format!("loss must be scalar, got {:?}", self.value(loss).shape()),
            ));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(vec![1.0]);

        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.requires_grad || matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            match &node.op {
                Op::Leaf => unreachable!(),
                Op::MatMul(a, b) => {
                    let (da, db) = ops::matmul_backward(self.value(*a), self.value(*b), &g);
                    self.accumulate(&mut grads, *a, da);
                    self.accumulate(&mut grads, *b, db);
                }
                Op::AddRowBias(x, b) => {
                    let width = self.value(*b).numel();
                    if self.nodes[b.0].requires_grad {
                        self.accumulate(&mut grads, *b, ops::add_row_bias_backward(width, &g));
                    }
                    self.accumulate(&mut grads, *x, g);
                }
                Op::Conv2d(x, k) => {
                    let need_dx = self.nodes[x.0].requires_grad;
                    let (dx, dk) =
                        ops::conv2d_backward(self.value(*x), self.value(*k), &g, need_dx);
                    if let Some(dx) = dx {
                        self.accumulate(&mut grads, *x, dx);
                    }
                    self.accumulate(&mut grads, *k, dk);
                }
                Op::AddChannelBias(x, b) => {
                    if self.nodes[b.0].requires_grad {
                        let db = ops::add_channel_bias_backward(self.value(*x).shape(), &g);
                        self.accumulate(&mut grads, *b, db);
                    }
                    self.accumulate(&mut grads, *x, g);
                }
                Op::Relu(x) => {
                    let dx = ops::relu_backward(self.value(*x), &g);
                    self.accumulate(&mut grads, *x, dx);
                }
                Op::MaxPool2(x, arg) => {
                    let dx = ops::maxpool2_backward(self.value(*x).numel(), arg, &g);
                    self.accumulate(&mut grads, *x, dx);
                }
                Op::Reshape(x) => self.accumulate(&mut grads, *x, g),
                Op::MixRows { x, pairing, lambda } => {
                    let w = self.value(*x).row_len();
                    let dx = ops::mix_rows_backward(w, pairing, *lambda, &g);
                    self.accumulate(&mut grads, *x, dx);
                }
                Op::SoftmaxXent {
                    logits,
                    probs,
                    target,
                } => {
                    let dl = ops::softmax_xent_backward(probs, target, g[0]);
                    self.accumulate(&mut grads, *logits, dl);
                }
                Op::Add(a, b) => {
                    self.accumulate(&mut grads, *a, g.clone());
                    self.accumulate(&mut grads, *b, g);
                }
            }
        }
        Ok(Gradients { grads })
    }

    fn accumulate(&self, grads: &mut [Option<Vec<f64>>], id: NodeId, g: Vec<f64>) {
        if !self.nodes[id.0].requires_grad {
            return;
        }
        match &mut grads[id.0] {
            Some(acc) => acc.iter_mut().zip(&g).for_each(|(a, v)| *a += v),
            slot @ None => *slot = Some(g),
        }
    }
}
