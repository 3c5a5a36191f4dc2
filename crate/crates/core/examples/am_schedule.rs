//! How the AM-mixup rate follows training accuracy, and what the one-sided
//! labels and mixed features of a tiny batch look like.

use collapse_lab::augment::{am_lambda, am_mix_features, random_pairing};
use collapse_lab::{Rng, Tensor};

fn main() -> collapse_lab::Result<()> {
    println!("v_acc  beta=0.34  beta=0.67");
    for i in 0..=10 {
        let v = i as f64 / 10.0;
        println!("{v:>5.1}  {:>9.4}  {:>9.4}", am_lambda(v, 0.34)?, am_lambda(v, 0.67)?);
    }

    let z = Tensor::from_rows(&[
        vec![1.0, 0.0],
        vec![0.0, 1.0],
        vec![-1.0, 0.0],
        vec![0.0, -1.0],
    ])?;
    let labels = [0, 1, 2, 3];
    let pairing = random_pairing(&mut Rng::new(3), 4);
    for lambda in [0.9, 0.3] {
        let b = am_mix_features(&z, &labels, 4, lambda, &pairing, true)?;
        println!("\nlambda {lambda}");
        for i in 0..4 {
            let target = b.target.argmax_row(i);
            let f = b.inputs_or_features.row(i);
            println!("  {i} with {}: feature ({:.2}, {:.2}) -> class {target}", pairing[i], f[0], f[1]);
        }
    }
    Ok(())
}
