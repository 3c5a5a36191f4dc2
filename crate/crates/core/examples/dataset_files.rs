//! Dataset file formats: the binary container, CSV import, CIFAR-10 binary
//! records and the coarse relabelling that keeps fine labels alongside.

use collapse_lab::data::{apply_coarse, gaussian_toy, io, CoarseMap};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join("collapse-lab-dataset-files");
    std::fs::create_dir_all(&dir)?;

    let toy = gaussian_toy(4, 50, 2, 0.3, 0)?;
    let coarse = apply_coarse(&toy.train, &CoarseMap::new(vec![0, 1, 0, 1])?)?;
    let bin = dir.join("train.clab");
    io::save(&coarse, &bin)?;
    let back = io::load(&bin)?;
    println!(
        "binary: {} samples, {} coarse classes, fine labels kept: {}",
        back.len(),
        back.num_classes(),
        back.fine_labels().is_some()
    );

    let csv = dir.join("points.csv");
    std::fs::write(&csv, "f0,f1,label\n0.1,0.2,0\n1.5,-0.3,1\n-0.7,0.9,2\n")?;
    let points = io::import_csv(&csv)?;
    println!("csv: {} samples, class counts {:?}", points.len(), points.class_counts());

    // Two synthetic CIFAR records with labels 3 and 5.
    let mut raw = Vec::new();
    for (label, shade) in [(3u8, 0u8), (5, 255)] {
        raw.push(label);
        raw.extend(std::iter::repeat_n(shade, 3 * 32 * 32));
    }
    let cifar = dir.join("batch.bin");
    std::fs::write(&cifar, raw)?;
    let imgs = io::import_cifar10_bin(&cifar, &[5, 3])?;
    println!(
        "cifar: shape {:?}, labels {:?}, first pixel {}",
        imgs.sample_shape(),
        imgs.labels(),
        imgs.samples().data()[0]
    );
    Ok(())
}
