use crate::error::{Error, Result};
use crate::numerics::Tensor;

/// SGD with classic momentum and L2-coupled weight decay:
/// `v ← μ·v + (g + wd·θ)`, `θ ← θ − lr·v`.
#[derive(Clone, Debug)]
pub struct Sgd {
    pub momentum: f64,
    pub weight_decay: f64,
    lr: f64,
    buffers: Vec<Vec<f64>>,
}

impl Sgd {
    pub fn new(params: &[Tensor], lr: f64, momentum: f64, weight_decay: f64) -> Result<Self> {
        let mut s = Self {
            momentum,
            weight_decay,
            lr: 0.0,
            buffers: params.iter().map(|p| vec![0.0; p.numel()]).collect(),
        };
        s.set_lr(lr)?;
        Ok(s)
    }

    pub fn lr(&self) -> f64 {
        self.lr
    }

    pub fn set_lr(&mut self, lr: f64) -> Result<()> {
        // cosine annealing may reach exactly 0 at its endpoint
        if !(lr >= 0.0 && lr.is_finite()) {
            return Err(Error::InvalidArgument(format!("learning rate {lr} is invalid")));
        }
        self.lr = lr;
        Ok(())
    }

    pub fn buffers(&self) -> &[Vec<f64>] {
        &self.buffers
    }

    /// Updates every parameter that carries a gradient and clears the slot.
    /// Parameters without a gradient are left untouched. If any gradient is
    /// non-finite nothing is modified.
    pub fn step(&mut self, params: &mut [Tensor], names: &[String]) -> Result<()> {
        if params.len() != self.buffers.len() {
            return Err(Error::shape(
                "sgd_step",
                format!("{} params for {} buffers", params.len(), self.buffers.len()),
            ));
        }
        for (i, p) in params.iter().enumerate() {
            if let Some(g) = p.grad() {
                if let Some(j) = g.iter().position(|v| !v.is_finite()) {
                    let name = names.get(i).map(String::as_str).unwrap_or("?");
                    return Err(Error::NonFinite {
                        context: format!("gradient of `{name}` at element {j} ({})", g[j]),
                    });
                }
            }
        }
        for (p, buf) in params.iter_mut().zip(&mut self.buffers) {
            let Some(g) = p.take_grad() else { continue };
            for ((theta, v), gi) in p.data_mut().iter_mut().zip(buf.iter_mut()).zip(&g) {
                *v = self.momentum * *v + (gi + self.weight_decay * *theta);
                *theta -= self.lr * *v;
            }
        }
        Ok(())
    }
}

/// One-shot form of [`Sgd::step`] on explicit gradients.
pub fn sgd_step(params: &mut [Tensor], grads: Vec<Vec<f64>>, state: &mut Sgd) -> Result<()> {
    for (p, g) in params.iter_mut().zip(grads) {
        p.set_grad(g)?;
    }
    let names: Vec<String> = (0..params.len()).map(|i| format!("param{i}")).collect();
    state.step(params, &names)
}
