//! Alignment and (neighborhood) uniformity on hand-built feature clouds:
//! tight, well-spread clusters versus clusters that crowd one direction.

use collapse_lab::metrics::{alignment, neighborhood_uniformity, sphere_centroids, uniformity, FeatureTable};
use collapse_lab::{Rng, Tensor};

fn cloud(rng: &mut Rng, angles: &[f64], radius: f64, noise: f64, per_class: usize) -> FeatureTable {
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (c, &a) in angles.iter().enumerate() {
        for _ in 0..per_class {
            rows.push(vec![
                radius * a.cos() + noise * rng.normal(),
                radius * a.sin() + noise * rng.normal(),
            ]);
            labels.push(c);
        }
    }
    FeatureTable::new(Tensor::from_rows(&rows).unwrap(), labels, angles.len()).unwrap()
}

fn main() -> collapse_lab::Result<()> {
    let mut rng = Rng::new(1);
    let pi = std::f64::consts::PI;
    let cases = [
        ("spread, tight", cloud(&mut rng, &[0.0, pi / 2.0, pi, 1.5 * pi], 3.0, 0.1, 200)),
        ("spread, loose", cloud(&mut rng, &[0.0, pi / 2.0, pi, 1.5 * pi], 3.0, 1.0, 200)),
        ("crowded", cloud(&mut rng, &[0.0, 0.2, 0.4, 0.6], 3.0, 0.1, 200)),
    ];
    println!("{:<14} {:>8} {:>8} {:>8} {:>8}", "case", "A", "U", "U_1", "U_2");
    for (name, ft) in &cases {
        let cents = sphere_centroids(ft)?;
        println!(
            "{name:<14} {:>8.4} {:>8.4} {:>8.4} {:>8.4}",
            alignment(ft)?,
            uniformity(&cents)?,
            neighborhood_uniformity(&cents, 1)?,
            neighborhood_uniformity(&cents, 2)?,
        );
    }
    Ok(())
}
