//! Datasets: the Gaussian toy generator, exponential long-tail subsampling,
//! coarse label maps and file formats.

pub mod io;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{Rng, Tensor};

/// Samples with integer class labels.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledDataset {
    pub name: String,
    samples: Tensor,
    labels: Vec<usize>,
    num_classes: usize,
    class_counts: Vec<usize>,
    /// Original labels when `labels` hold coarse superclasses.
    fine: Option<FineLabels>,
    sample_ids: Vec<u32>,
}

#[derive(Clone, Debug, PartialEq)]
struct FineLabels {
    labels: Vec<usize>,
    num_classes: usize,
}

fn count_classes(labels: &[usize], num_classes: usize) -> Result<Vec<usize>> {
    let mut counts = vec![0; num_classes];
    for (i, &l) in labels.iter().enumerate() {
        if l >= num_classes {
            return Err(Error::InvalidArgument(format!(
                "label {l} of sample {i} outside 0..{num_classes}"
            )));
        }
        counts[l] += 1;
    }
    Ok(counts)
}

impl LabeledDataset {
    pub fn new(
        name: impl Into<String>,
        samples: Tensor,
        labels: Vec<usize>,
        num_classes: usize,
    ) -> Result<Self> {
        let ids = (0..labels.len() as u32).collect();
        Self::with_ids(name, samples, labels, num_classes, ids)
    }

    pub fn with_ids(
        name: impl Into<String>,
        samples: Tensor,
        labels: Vec<usize>,
        num_classes: usize,
        sample_ids: Vec<u32>,
    ) -> Result<Self> {
        if samples.rows() != labels.len() || sample_ids.len() != labels.len() {
            return Err(Error::shape(
                "dataset",
                format!(
                    "{} samples, {} labels, {} ids",
                    samples.rows(),
                    labels.len(),
                    sample_ids.len()
                ),
            ));
        }
        if num_classes < 2 {
            return Err(Error::InvalidArgument("dataset needs >= 2 classes".into()));
        }
        let class_counts = count_classes(&labels, num_classes)?;
        Ok(Self {
            name: name.into(),
            samples,
            labels,
            num_classes,
            class_counts,
            fine: None,
            sample_ids,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn samples(&self) -> &Tensor {
        &self.samples
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn class_counts(&self) -> &[usize] {
        &self.class_counts
    }

    pub fn sample_ids(&self) -> &[u32] {
        &self.sample_ids
    }

    /// Shape of one sample (without the leading batch axis).
    pub fn sample_shape(&self) -> &[usize] {
        &self.samples.shape()[1..]
    }

    pub fn fine_labels(&self) -> Option<&[usize]> {
        self.fine.as_ref().map(|f| f.labels.as_slice())
    }

    pub fn fine_num_classes(&self) -> Option<usize> {
        self.fine.as_ref().map(|f| f.num_classes)
    }

    pub(crate) fn set_fine(&mut self, labels: Vec<usize>, num_classes: usize) -> Result<()> {
        if labels.len() != self.len() {
            return Err(Error::shape("dataset", "fine labels length differs"));
        }
        count_classes(&labels, num_classes)?;
        self.fine = Some(FineLabels {
            labels,
            num_classes,
        });
        Ok(())
    }

    /// Dataset relabelled with the retained fine labels.
    pub fn to_fine(&self) -> Result<Self> {
        let fine = self
            .fine
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument(format!("{} has no fine labels", self.name)))?;
        Self::with_ids(
            self.name.clone(),
            self.samples.clone(),
            fine.labels.clone(),
            fine.num_classes,
            self.sample_ids.clone(),
        )
    }

    /// Subset in the given order.
    pub fn subset(&self, idx: &[usize]) -> Result<Self> {
        if idx.is_empty() {
            return Err(Error::InvalidArgument("empty subset".into()));
        }
        let mut out = Self::with_ids(
            self.name.clone(),
            self.samples.select_rows(idx),
            idx.iter().map(|&i| self.labels[i]).collect(),
            self.num_classes,
            idx.iter().map(|&i| self.sample_ids[i]).collect(),
        )?;
        if let Some(f) = &self.fine {
            out.set_fine(idx.iter().map(|&i| f.labels[i]).collect(), f.num_classes)?;
        }
        Ok(out)
    }

    /// `M×C` one-hot label matrix.
    pub fn one_hot(&self) -> Tensor {
        one_hot(&self.labels, self.num_classes)
    }
}

pub fn one_hot(labels: &[usize], num_classes: usize) -> Tensor {
    let mut data = vec![0.0; labels.len() * num_classes];
    for (i, &l) in labels.iter().enumerate() {
        data[i * num_classes + l] = 1.0;
    }
    Tensor::new(vec![labels.len(), num_classes], data).expect("one-hot shape")
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainTest {
    pub train: LabeledDataset,
    pub test: LabeledDataset,
}

/// `C` isotropic Gaussian clusters. Cluster means are unit vectors spaced
/// evenly on the circle spanned by the first two coordinates (angle `2πc/C`);
/// remaining coordinates have zero mean. Each class gets `per_class_n`
/// samples, 4/5 of them (stratified, seeded) in the training split.
pub fn gaussian_toy(
    classes: usize,
    per_class_n: usize,
    dim: usize,
    spread: f64,
    seed: u64,
) -> Result<TrainTest> {
    if classes < 2 || dim < 2 {
        return Err(Error::InvalidArgument(format!(
            "gaussian_toy needs >= 2 classes and dim >= 2, got {classes}, {dim}"
        )));
    }
    let n_train = per_class_n * 4 / 5;
    if n_train == 0 || n_train == per_class_n {
        return Err(Error::InvalidArgument(format!(
            "per_class_n = {per_class_n} leaves an empty split"
        )));
    }
    if !(spread >= 0.0 && spread.is_finite()) {
        return Err(Error::InvalidArgument(format!("spread {spread} invalid")));
    }
    let mut rng = Rng::with_stream(seed, crate::numerics::rng::stream::DATA);
    let mut rows = Vec::with_capacity(classes * per_class_n);
    for c in 0..classes {
        let angle = 2.0 * std::f64::consts::PI * c as f64 / classes as f64;
        for _ in 0..per_class_n {
            let mut v: Vec<f64> = (0..dim).map(|_| spread * rng.normal()).collect();
            v[0] += angle.cos();
            v[1] += angle.sin();
            rows.push(v);
        }
    }
    let all = Tensor::from_rows(&rows)?;
    let mut train_idx = Vec::new();
    let mut test_idx = Vec::new();
    for c in 0..classes {
        let mut idx: Vec<usize> = (c * per_class_n..(c + 1) * per_class_n).collect();
        rng.shuffle(&mut idx);
        train_idx.extend_from_slice(&idx[..n_train]);
        test_idx.extend_from_slice(&idx[n_train..]);
    }
    let labels: Vec<usize> = (0..classes * per_class_n).map(|i| i / per_class_n).collect();
    let full = LabeledDataset::new(format!("gaussian{classes}"), all, labels, classes)?;
    let mut train = full.subset(&train_idx)?;
    let mut test = full.subset(&test_idx)?;
    train.name = format!("gaussian{classes}-train");
    test.name = format!("gaussian{classes}-test");
    Ok(TrainTest { train, test })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImbalanceSpec {
    /// `n_max / n_min`.
    pub imb_factor: f64,
    /// Per-class count of the balanced source (head class count).
    pub n_max: usize,
}

impl ImbalanceSpec {
    /// `floor(n_max · imb^(−c/(C−1)))` for head→tail class `c`.
    pub fn counts(&self, classes: usize) -> Result<Vec<usize>> {
        if !(self.imb_factor >= 1.0 && self.imb_factor.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "imbalance factor must be >= 1, got {}",
                self.imb_factor
            )));
        }
        if classes < 2 {
            return Err(Error::InvalidArgument("imbalance needs >= 2 classes".into()));
        }
        (0..classes)
            .map(|c| {
                let exponent = -(c as f64) / (classes - 1) as f64;
                // guard against x.99999… from representation error
                let raw = self.n_max as f64 * self.imb_factor.powf(exponent);
                let n = (raw + 1e-9).floor() as usize;
                if n < 1 {
                    Err(Error::InvalidArgument(format!(
                        "class {c} would keep {raw:.3} < 1 samples"
                    )))
                } else {
                    Ok(n)
                }
            })
            .collect()
    }
}

/// Exponentially decreasing per-class subsample of a balanced dataset; class
/// 0 is the head. Each class keeps the first `n_c` of its samples under a
/// seeded shuffle, reported in original dataset order.
pub fn longtail_subsample(
    ds: &LabeledDataset,
    spec: &ImbalanceSpec,
    rng: &mut Rng,
) -> Result<LabeledDataset> {
    if let Some((c, &n)) = ds
        .class_counts()
        .iter()
        .enumerate()
        .find(|(_, &n)| n != spec.n_max)
    {
        return Err(Error::InvalidArgument(format!(
            "long-tail source must be balanced at {} per class; class {c} has {n}",
            spec.n_max
        )));
    }
    let counts = spec.counts(ds.num_classes())?;
    let mut keep = Vec::new();
    for (c, &n_c) in counts.iter().enumerate() {
        let mut idx: Vec<usize> = (0..ds.len()).filter(|&i| ds.labels()[i] == c).collect();
        rng.shuffle(&mut idx);
        keep.extend_from_slice(&idx[..n_c]);
    }
    keep.sort_unstable();
    let mut out = ds.subset(&keep)?;
    out.name = format!("{}-lt{}", ds.name, spec.imb_factor);
    Ok(out)
}

/// Surjective fine → coarse class map.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoarseMap {
    fine_to_coarse: Vec<usize>,
    num_coarse: usize,
}

impl CoarseMap {
    pub fn new(fine_to_coarse: Vec<usize>) -> Result<Self> {
        let num_coarse = fine_to_coarse.iter().max().map_or(0, |m| m + 1);
        let mut hit = vec![false; num_coarse];
        for &c in &fine_to_coarse {
            hit[c] = true;
        }
        if fine_to_coarse.is_empty() || hit.iter().any(|h| !h) {
            return Err(Error::InvalidArgument(format!(
                "coarse map {fine_to_coarse:?} is not onto 0..{num_coarse}"
            )));
        }
        Ok(Self {
            fine_to_coarse,
            num_coarse,
        })
    }

    pub fn identity(classes: usize) -> Self {
        Self::new((0..classes).collect()).expect("identity is onto")
    }

    /// Consecutive groups of `group` fine classes per superclass, e.g.
    /// `{0,1}→0, {2,3}→1` for 4 classes in groups of 2.
    pub fn grouped(classes: usize, group: usize) -> Result<Self> {
        if group == 0 || classes % group != 0 {
            return Err(Error::InvalidArgument(format!(
                "{classes} classes do not split into groups of {group}"
            )));
        }
        Self::new((0..classes).map(|c| c / group).collect())
    }

    /// Two superclasses: fine classes `< split` and `>= split`.
    pub fn threshold(classes: usize, split: usize) -> Result<Self> {
        Self::new((0..classes).map(|c| usize::from(c >= split)).collect())
    }

    pub fn num_fine(&self) -> usize {
        self.fine_to_coarse.len()
    }

    pub fn num_coarse(&self) -> usize {
        self.num_coarse
    }

    pub fn coarse_of(&self, fine: usize) -> usize {
        self.fine_to_coarse[fine]
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.fine_to_coarse
    }
}

/// Relabels with superclasses, keeping the fine labels alongside.
pub fn apply_coarse(ds: &LabeledDataset, map: &CoarseMap) -> Result<LabeledDataset> {
    if map.num_fine() != ds.num_classes() {
        return Err(Error::InvalidArgument(format!(
            "coarse map covers {} fine classes, dataset has {}",
            map.num_fine(),
            ds.num_classes()
        )));
    }
    let labels = ds.labels().iter().map(|&l| map.coarse_of(l)).collect();
    let mut out = LabeledDataset::with_ids(
        format!("{}-coarse", ds.name),
        ds.samples().clone(),
        labels,
        map.num_coarse(),
        ds.sample_ids().to_vec(),
    )?;
    out.set_fine(ds.labels().to_vec(), ds.num_classes())?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toy_means_equally_spaced() {
        let tt = gaussian_toy(4, 10, 2, 0.0, 1).unwrap();
        for (i, &l) in tt.train.labels().iter().enumerate() {
            let a = 2.0 * std::f64::consts::PI * l as f64 / 4.0;
            let row = tt.train.samples().row(i);
            assert!((row[0] - a.cos()).abs() < 1e-15 && (row[1] - a.sin()).abs() < 1e-15);
        }
        let two = gaussian_toy(2, 10, 2, 0.0, 1).unwrap();
        let x1 = two.train.samples().row(two.train.labels().iter().position(|&l| l == 1).unwrap());
        assert!((x1[0] + 1.0).abs() < 1e-15 && x1[1].abs() < 1e-15);
    }

    #[test]
    fn toy_split_is_stratified_and_disjoint() {
        let tt = gaussian_toy(3, 50, 4, 0.3, 2).unwrap();
        assert_eq!(tt.train.class_counts(), &[40, 40, 40]);
        assert_eq!(tt.test.class_counts(), &[10, 10, 10]);
        let mut ids: Vec<u32> = tt.train.sample_ids().to_vec();
        ids.extend_from_slice(tt.test.sample_ids());
        ids.sort_unstable();
        ids.dedup();
        assert_eq!(ids.len(), 150);
    }

    #[test]
    fn toy_is_deterministic() {
        assert_eq!(
            gaussian_toy(4, 20, 3, 0.5, 9).unwrap(),
            gaussian_toy(4, 20, 3, 0.5, 9).unwrap()
        );
        assert_ne!(
            gaussian_toy(4, 20, 3, 0.5, 9).unwrap(),
            gaussian_toy(4, 20, 3, 0.5, 10).unwrap()
        );
    }

    #[test]
    fn mini_cifar_lt_counts() {
        let spec = ImbalanceSpec {
            imb_factor: 200.0,
            n_max: 5000,
        };
        assert_eq!(spec.counts(4).unwrap(), vec![5000, 854, 146, 25]);
    }

    #[test]
    fn balanced_when_factor_one() {
        let spec = ImbalanceSpec {
            imb_factor: 1.0,
            n_max: 70,
        };
        assert_eq!(spec.counts(5).unwrap(), vec![70; 5]);
    }

    #[test]
    fn cifar10_lt_counts() {
        let spec = ImbalanceSpec {
            imb_factor: 100.0,
            n_max: 500,
        };
        let counts = spec.counts(10).unwrap();
        for (c, &n) in counts.iter().enumerate() {
            let want = (500.0 * 100f64.powf(-(c as f64) / 9.0)).floor() as usize;
            assert_eq!(n, want, "class {c}");
        }
        assert!(counts.windows(2).all(|w| w[0] >= w[1]));
        assert_eq!((counts[0], counts[9]), (500, 5));
    }

    #[test]
    fn tail_count_below_one_fails() {
        let spec = ImbalanceSpec {
            imb_factor: 1000.0,
            n_max: 10,
        };
        assert!(spec.counts(4).is_err());
    }

    #[test]
    fn subsample_keeps_counts_and_is_reproducible() {
        let tt = gaussian_toy(4, 250, 2, 0.2, 3).unwrap();
        let spec = ImbalanceSpec {
            imb_factor: 20.0,
            n_max: 200,
        };
        let a = longtail_subsample(&tt.train, &spec, &mut Rng::new(5)).unwrap();
        let b = longtail_subsample(&tt.train, &spec, &mut Rng::new(5)).unwrap();
        assert_eq!(a.class_counts(), spec.counts(4).unwrap().as_slice());
        assert_eq!(a.sample_ids(), b.sample_ids());
        assert!(longtail_subsample(&a, &spec, &mut Rng::new(5)).is_err());
    }

    #[test]
    fn coarse_maps() {
        let tt = gaussian_toy(4, 10, 2, 0.1, 0).unwrap();
        let map = CoarseMap::grouped(4, 2).unwrap();
        let c = apply_coarse(&tt.train, &map).unwrap();
        assert_eq!(c.num_classes(), 2);
        assert_eq!(c.class_counts(), &[16, 16]);
        assert_eq!(c.fine_labels().unwrap(), tt.train.labels());
        let back = c.to_fine().unwrap();
        assert_eq!(back.labels(), tt.train.labels());

        let id = apply_coarse(&tt.train, &CoarseMap::identity(4)).unwrap();
        assert_eq!(id.labels(), tt.train.labels());
        assert_eq!(id.samples(), tt.train.samples());

        let mnist = CoarseMap::threshold(10, 5).unwrap();
        assert_eq!(mnist.num_coarse(), 2);
        assert_eq!((0..10).filter(|&f| mnist.coarse_of(f) == 0).count(), 5);

        assert!(CoarseMap::new(vec![0, 2]).is_err());
        assert!(apply_coarse(&tt.train, &CoarseMap::identity(3)).is_err());
    }
}
