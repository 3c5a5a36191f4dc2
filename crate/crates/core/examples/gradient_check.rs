//! Compares tape gradients of a small MLP's cross entropy against central
//! finite differences of the plain forward pass.

use collapse_lab::data::one_hot;
use collapse_lab::network::{Model, ModelSpec, Trainable};
use collapse_lab::numerics::gradcheck::{max_relative_error, numerical_gradient, STEP};
use collapse_lab::numerics::{softmax_xent, Tape};
use collapse_lab::{Rng, Tensor};

fn main() -> collapse_lab::Result<()> {
    let mut rng = Rng::new(7);
    let model = Model::init(ModelSpec::mlp(3, &[8, 6], 2, 4), &mut rng)?;
    let x = Tensor::new(vec![10, 3], (0..30).map(|_| rng.normal()).collect())?;
    let labels: Vec<usize> = (0..10).map(|i| i % 4).collect();
    let y = one_hot(&labels, 4);

    let mut tape = Tape::new();
    let bound = model.bind(&mut tape, Trainable::All);
    let xi = tape.constant(x.clone());
    let z = model.encode(&mut tape, &bound, xi)?;
    let logits = model.classify(&mut tape, &bound, z)?;
    let loss = tape.softmax_xent(logits, &y)?;
    let grads = tape.backward(loss)?;
    let analytic: Vec<Vec<f64>> = bound.ids().iter().map(|&id| grads.get(id).unwrap().to_vec()).collect();

    let numeric = numerical_gradient(model.params(), STEP, |params| {
        let m = Model::from_params(model.spec().clone(), params.to_vec())?;
        let logits = m.forward_logits(&m.forward_features(&x)?)?;
        Ok(softmax_xent(&logits, &y)?.0)
    })?;

    for ((name, a), n) in model.param_names().iter().zip(&analytic).zip(&numeric) {
        let err = max_relative_error(std::slice::from_ref(a), std::slice::from_ref(n));
        println!("{name:<22}  {:>4} values  max rel err {err:.2e}", a.len());
    }
    println!("overall max rel err {:.2e}", max_relative_error(&analytic, &numeric));
    Ok(())
}
