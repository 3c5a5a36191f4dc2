//! Collapse diagnostics over encoder features.
//!
//! * Alignment `A`: per class, the mean L2 distance over **all ordered pairs
//!   of the class's features including self-pairs** (normalizer `|F_i|²`),
//!   averaged over classes. Computed on raw features; translation-invariant.
//! * Inter-class uniformity `U`: mean L2 distance over ordered pairs of
//!   distinct unit-norm class centroids. Lies in `[0, 2]`.
//! * Neighborhood uniformity `U_k`: per class, the sum of distances to its
//!   `k` nearest other centroids, averaged over classes.
//!
//! Centroids are the normalized per-class feature *sums*, so uniformities
//! depend on where the origin is.

use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::numerics::Tensor;

/// Features `M×d` with their class labels.
#[derive(Clone, Debug)]
pub struct FeatureTable {
    features: Tensor,
    labels: Vec<usize>,
    num_classes: usize,
}

impl FeatureTable {
    pub fn new(features: Tensor, labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        let (m, _) = features.dims2("feature_table")?;
        if m != labels.len() {
            return Err(Error::shape(
                "feature_table",
                format!("{m} features, {} labels", labels.len()),
            ));
        }
        if let Some(&l) = labels.iter().find(|&&l| l >= num_classes) {
            return Err(Error::InvalidArgument(format!(
                "label {l} outside 0..{num_classes}"
            )));
        }
        Ok(Self {
            features,
            labels,
            num_classes,
        })
    }

    pub fn features(&self) -> &Tensor {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    /// Sample indices per class, in sample order.
    fn buckets(&self) -> Result<Vec<Vec<usize>>> {
        let mut b = vec![Vec::new(); self.num_classes];
        for (i, &l) in self.labels.iter().enumerate() {
            b[l].push(i);
        }
        if let Some(class) = b.iter().position(Vec::is_empty) {
            return Err(Error::EmptyClass { class });
        }
        Ok(b)
    }
}

/// Euclidean distance, accumulated in coordinate order.
pub fn l2_distance(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for (x, y) in a.iter().zip(b) {
        let d = x - y;
        s += d * d;
    }
    s.sqrt()
}

pub fn alignment(ft: &FeatureTable) -> Result<f64> {
    let buckets = ft.buckets()?;
    let f = &ft.features;
    let mut total = 0.0;
    for members in &buckets {
        let mut s = 0.0;
        for &j in members {
            for &k in members {
                s += l2_distance(f.row(j), f.row(k));
            }
        }
        let n = members.len();
        total += s / (n * n) as f64;
    }
    Ok(total / ft.num_classes as f64)
}

/// Unit-norm per-class mean directions, `C×d`.
pub fn sphere_centroids(ft: &FeatureTable) -> Result<Tensor> {
    let (_, d) = ft.features.dims2("sphere_centroids")?;
    ft.buckets()?;
    let mut sums = vec![0.0; ft.num_classes * d];
    for (i, &l) in ft.labels.iter().enumerate() {
        for (s, v) in sums[l * d..(l + 1) * d].iter_mut().zip(ft.features.row(i)) {
            *s += v;
        }
    }
    for (class, row) in sums.chunks_mut(d).enumerate() {
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::ZeroNorm { class });
        }
        row.iter_mut().for_each(|v| *v /= norm);
    }
    Tensor::new(vec![ft.num_classes, d], sums)
}

fn centroid_distances(centroids: &Tensor) -> Result<(usize, Vec<f64>)> {
    let (c, _) = centroids.dims2("uniformity")?;
    let mut dist = vec![0.0; c * c];
    for i in 0..c {
        for j in 0..c {
            if i != j {
                dist[i * c + j] = l2_distance(centroids.row(i), centroids.row(j));
            }
        }
    }
    Ok((c, dist))
}

pub fn uniformity(centroids: &Tensor) -> Result<f64> {
    let (c, dist) = centroid_distances(centroids)?;
    if c < 2 {
        return Err(Error::InvalidArgument(format!(
            "uniformity needs >= 2 centroids, got {c}"
        )));
    }
    let mut s = 0.0;
    for i in 0..c {
        for j in 0..c {
            if i != j {
                s += dist[i * c + j];
            }
        }
    }
    Ok(s / (c * (c - 1)) as f64)
}

/// Mean over classes of the summed distance to the `k` nearest other
/// centroids. The minimum over index tuples is taken over distinct indices,
/// so it reduces to the `k` smallest distances (summed in index order).
pub fn neighborhood_uniformity(centroids: &Tensor, k: usize) -> Result<f64> {
    let (c, dist) = centroid_distances(centroids)?;
    if k < 1 || k + 1 > c {
        return Err(Error::InvalidArgument(format!(
            "neighborhood size k = {k} outside 1..={}",
            c.saturating_sub(1)
        )));
    }
    let mut total = 0.0;
    for i in 0..c {
        let row = &dist[i * c..(i + 1) * c];
        let mut others: Vec<usize> = (0..c).filter(|&j| j != i).collect();
        others.sort_by(|&a, &b| row[a].total_cmp(&row[b]).then(a.cmp(&b)));
        let mut nearest = others[..k].to_vec();
        nearest.sort_unstable();
        let mut s = 0.0;
        for j in nearest {
            s += row[j];
        }
        total += s;
    }
    Ok(total / c as f64)
}

/// Per-split accuracy; a split with no test samples is `None`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SplitAccuracy {
    pub all: f64,
    pub many: Option<f64>,
    pub median: Option<f64>,
    pub few: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Split {
    Many,
    Median,
    Few,
}

/// Count thresholds for the Many/Median/Few partition.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SplitThresholds {
    /// Classes with more than this many training samples are Many.
    pub many: usize,
    /// Classes with fewer than this many training samples are Few.
    pub few: usize,
}

impl SplitThresholds {
    pub const MINI_CIFAR: Self = Self {
        many: 1000,
        few: 200,
    };
    pub const CIFAR_LT: Self = Self { many: 100, few: 20 };

    pub fn new(many: usize, few: usize) -> Result<Self> {
        if many <= few {
            return Err(Error::InvalidArgument(format!(
                "many threshold {many} must exceed few threshold {few}"
            )));
        }
        Ok(Self { many, few })
    }

    pub fn classify(&self, count: usize) -> Split {
        if count > self.many {
            Split::Many
        } else if count < self.few {
            Split::Few
        } else {
            Split::Median
        }
    }
}

pub fn split_accuracy(
    preds: &[usize],
    labels: &[usize],
    train_counts: &[usize],
    thresholds: SplitThresholds,
) -> Result<SplitAccuracy> {
    if preds.len() != labels.len() || labels.is_empty() {
        return Err(Error::shape(
            "split_accuracy",
            format!("{} predictions for {} labels", preds.len(), labels.len()),
        ));
    }
    let mut hits = [0usize; 3];
    let mut totals = [0usize; 3];
    let mut all_hits = 0;
    for (&p, &l) in preds.iter().zip(labels) {
        let count = *train_counts.get(l).ok_or_else(|| {
            Error::InvalidArgument(format!("label {l} has no training count"))
        })?;
        let s = thresholds.classify(count) as usize;
        totals[s] += 1;
        if p == l {
            hits[s] += 1;
            all_hits += 1;
        }
    }
    let frac = |s: usize| (totals[s] > 0).then(|| hits[s] as f64 / totals[s] as f64);
    Ok(SplitAccuracy {
        all: all_hits as f64 / labels.len() as f64,
        many: frac(Split::Many as usize),
        median: frac(Split::Median as usize),
        few: frac(Split::Few as usize),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricsReport {
    pub alignment: f64,
    pub uniformity: f64,
    /// `(k, U_k)` pairs.
    pub neighborhood: Vec<(usize, f64)>,
    pub accuracy: SplitAccuracy,
}

impl MetricsReport {
    /// Computes `A`, `U` and `U_k` for each requested `k` (skipping any
    /// `k >= C`).
    pub fn from_features(ft: &FeatureTable, ks: &[usize], accuracy: SplitAccuracy) -> Result<Self> {
        let centroids = sphere_centroids(ft)?;
        let neighborhood = ks
            .iter()
            .filter(|&&k| k >= 1 && k < ft.num_classes)
            .map(|&k| neighborhood_uniformity(&centroids, k).map(|u| (k, u)))
            .collect::<Result<_>>()?;
        Ok(Self {
            alignment: alignment(ft)?,
            uniformity: uniformity(&centroids)?,
            neighborhood,
            accuracy,
        })
    }

    pub fn neighborhood_k(&self, k: usize) -> Option<f64> {
        self.neighborhood.iter().find(|(kk, _)| *kk == k).map(|p| p.1)
    }

    /// JSON object with keys `alignment`, `uniformity`,
    /// `neighborhood_uniformity_k{k}`, `acc_all`, `acc_many`, `acc_median`,
    /// `acc_few`. Empty splits are `null`.
    pub fn to_json(&self) -> Value {
        let mut m = Map::new();
        m.insert("alignment".into(), json!(self.alignment));
        m.insert("uniformity".into(), json!(self.uniformity));
        for (k, u) in &self.neighborhood {
            m.insert(format!("neighborhood_uniformity_k{k}"), json!(u));
        }
        if self.neighborhood_k(1).is_none() {
            m.insert("neighborhood_uniformity_k1".into(), Value::Null);
        }
        m.insert("acc_all".into(), json!(self.accuracy.all));
        m.insert("acc_many".into(), json!(self.accuracy.many));
        m.insert("acc_median".into(), json!(self.accuracy.median));
        m.insert("acc_few".into(), json!(self.accuracy.few));
        Value::Object(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(rows: &[[f64; 2]], labels: &[usize], c: usize) -> FeatureTable {
        let rows: Vec<Vec<f64>> = rows.iter().map(|r| r.to_vec()).collect();
        FeatureTable::new(Tensor::from_rows(&rows).unwrap(), labels.to_vec(), c).unwrap()
    }

    fn cents(rows: &[[f64; 2]]) -> Tensor {
        Tensor::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn alignment_hand_cases() {
        let t = table(&[[0.0, 0.0], [2.0, 0.0]], &[0, 0], 1);
        assert_eq!(alignment(&t).unwrap(), 1.0);
        let same = table(&[[1.0, 1.0], [1.0, 1.0], [3.0, 0.0]], &[0, 0, 1], 2);
        assert_eq!(alignment(&same).unwrap(), 0.0);
        let singles = table(&[[1.0, 1.0], [-4.0, 2.0]], &[0, 1], 2);
        assert_eq!(alignment(&singles).unwrap(), 0.0);
        let missing = table(&[[1.0, 1.0]], &[0], 2);
        assert!(matches!(alignment(&missing), Err(Error::EmptyClass { class: 1 })));
    }

    #[test]
    fn centroid_hand_cases() {
        let c = sphere_centroids(&table(&[[3.0, 4.0]], &[0], 1)).unwrap();
        assert_eq!(c.data(), &[0.6, 0.8]);
        let c = sphere_centroids(&table(&[[1.0, 0.0], [0.0, 1.0]], &[0, 0], 1)).unwrap();
        let h = 1.0 / 2f64.sqrt();
        assert!((c.data()[0] - h).abs() < 1e-15 && (c.data()[1] - h).abs() < 1e-15);
        let degenerate = table(&[[1.0, 0.0], [-1.0, 0.0]], &[0, 0], 1);
        assert!(matches!(
            sphere_centroids(&degenerate),
            Err(Error::ZeroNorm { class: 0 })
        ));
    }

    #[test]
    fn uniformity_hand_cases() {
        assert_eq!(uniformity(&cents(&[[1.0, 0.0], [-1.0, 0.0]])).unwrap(), 2.0);
        assert_eq!(uniformity(&cents(&[[0.6, 0.8]; 3])).unwrap(), 0.0);
        let tri: Vec<[f64; 2]> = (0..3)
            .map(|i| {
                let a = 2.0 * std::f64::consts::PI * i as f64 / 3.0;
                [a.cos(), a.sin()]
            })
            .collect();
        assert!((uniformity(&cents(&tri)).unwrap() - 3f64.sqrt()).abs() < 1e-12);
        assert!(uniformity(&cents(&[[1.0, 0.0]])).is_err());
    }

    #[test]
    fn neighborhood_hand_cases() {
        let c = cents(&[[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0]]);
        let u1 = neighborhood_uniformity(&c, 1).unwrap();
        assert!((u1 - 2f64.sqrt()).abs() < 1e-15);
        let pair = cents(&[[1.0, 0.0], [0.0, 1.0]]);
        assert_eq!(
            neighborhood_uniformity(&pair, 1).unwrap(),
            uniformity(&pair).unwrap()
        );
        let full = neighborhood_uniformity(&c, 2).unwrap();
        assert!((full - 2.0 * uniformity(&c).unwrap()).abs() < 1e-15);
        assert!(neighborhood_uniformity(&c, 0).is_err());
        assert!(neighborhood_uniformity(&c, 3).is_err());
    }

    #[test]
    fn mini_cifar_lt_splits() {
        let counts = [5000, 854, 146, 25];
        let t = SplitThresholds::MINI_CIFAR;
        let splits: Vec<Split> = counts.iter().map(|&n| t.classify(n)).collect();
        assert_eq!(splits, [Split::Many, Split::Median, Split::Few, Split::Few]);
        let lt = SplitThresholds::CIFAR_LT;
        assert_eq!(lt.classify(101), Split::Many);
        assert_eq!(lt.classify(100), Split::Median);
        assert_eq!(lt.classify(20), Split::Median);
        assert_eq!(lt.classify(19), Split::Few);
    }

    #[test]
    fn split_accuracy_cases() {
        let counts = [5000, 854, 146, 25];
        let labels = [0, 1, 2, 3, 0, 1, 2, 3];
        let acc = split_accuracy(&labels, &labels, &counts, SplitThresholds::MINI_CIFAR).unwrap();
        assert_eq!(acc.all, 1.0);
        assert_eq!((acc.many, acc.median, acc.few), (Some(1.0), Some(1.0), Some(1.0)));

        let preds = [0, 0, 0, 3, 0, 1, 0, 0];
        let acc = split_accuracy(&preds, &labels, &counts, SplitThresholds::MINI_CIFAR).unwrap();
        assert_eq!(acc.all, 0.5);
        assert_eq!(acc.few, Some(0.25));
        assert_eq!(acc.median, Some(0.5));

        let balanced = [10, 10, 10, 10];
        let acc =
            split_accuracy(&labels, &labels, &balanced, SplitThresholds::new(100, 5).unwrap())
                .unwrap();
        assert_eq!((acc.many, acc.few), (None, None));
        assert_eq!(acc.median, Some(1.0));
    }

    #[test]
    fn report_json_keys() {
        let t = table(&[[1.0, 0.1], [0.9, 0.0], [-1.0, 0.2], [0.0, -1.0]], &[0, 0, 1, 2], 3);
        let acc = SplitAccuracy {
            all: 0.5,
            many: Some(1.0),
            median: None,
            few: Some(0.0),
        };
        let r = MetricsReport::from_features(&t, &[1, 2], acc).unwrap();
        let j = r.to_json();
        for key in [
            "alignment",
            "uniformity",
            "neighborhood_uniformity_k1",
            "acc_all",
            "acc_many",
            "acc_median",
            "acc_few",
        ] {
            assert!(j.get(key).is_some(), "{key}");
        }
        assert!(j["acc_median"].is_null());
        assert!(j.get("neighborhood_uniformity_k2").is_some());
    }
}
