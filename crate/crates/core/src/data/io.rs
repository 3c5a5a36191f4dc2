//! Dataset files.
//!
//! Binary layout (integers u32 little-endian, samples f64 little-endian):
//!
//! ```text
//! magic "CLAB" | version | M | rank | dims[rank]
//! | samples[M·∏dims] | labels[M] | num_classes
//! | u8 has_fine  [ fine_labels[M] | num_fine_classes ]
//! | u8 has_ids   [ sample_ids[M] ]
//! ```
//!
//! `dims` is the shape of one sample, e.g. `[d]` for vectors or `[C, H, W]`
//! for images.

use std::path::Path;

use super::LabeledDataset;
use crate::error::{Error, Result};
use crate::numerics::Tensor;

pub const MAGIC: &[u8; 4] = b"CLAB";
pub const VERSION: u32 = 1;

/// Bounds-checked little-endian cursor.
pub(crate) struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub(crate) fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Format(format!("truncated file at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    pub(crate) fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub(crate) fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub(crate) fn u32s(&mut self, n: usize) -> Result<Vec<u32>> {
        let raw = self.take(n.checked_mul(4).ok_or_else(overflow)?)?;
        Ok(raw
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    pub(crate) fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(n.checked_mul(8).ok_or_else(overflow)?)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    pub(crate) fn finish(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(Error::Format(format!(
                "{} trailing bytes",
                self.bytes.len() - self.pos
            )));
        }
        Ok(())
    }
}

fn overflow() -> Error {
    Error::Format("length overflow".into())
}

fn put_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&(v as u32).to_le_bytes());
}

pub fn encode(ds: &LabeledDataset) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    put_u32(&mut out, VERSION as usize);
    put_u32(&mut out, ds.len());
    put_u32(&mut out, ds.sample_shape().len());
    for &d in ds.sample_shape() {
        put_u32(&mut out, d);
    }
    for v in ds.samples().data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for &l in ds.labels() {
        put_u32(&mut out, l);
    }
    put_u32(&mut out, ds.num_classes());
    match (ds.fine_labels(), ds.fine_num_classes()) {
        (Some(fine), Some(k)) => {
            out.push(1);
            for &l in fine {
                put_u32(&mut out, l);
            }
            put_u32(&mut out, k);
        }
        _ => out.push(0),
    }
    out.push(1);
    for &id in ds.sample_ids() {
        out.extend_from_slice(&id.to_le_bytes());
    }
    out
}

pub fn decode(bytes: &[u8], name: &str) -> Result<LabeledDataset> {
    let mut r = Reader::new(bytes);
    if r.take(4)? != MAGIC {
        return Err(Error::Format("not a dataset file (bad magic)".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported dataset version {version}")));
    }
    let m = r.u32()? as usize;
    let rank = r.u32()? as usize;
    if m == 0 || rank == 0 {
        return Err(Error::Format("dataset header has zero samples or rank".into()));
    }
    let dims: Vec<usize> = r.u32s(rank)?.into_iter().map(|d| d as usize).collect();
    let per: usize = dims.iter().product();
    let samples = r.f64s(m.checked_mul(per).ok_or_else(overflow)?)?;
    let labels: Vec<usize> = r.u32s(m)?.into_iter().map(|l| l as usize).collect();
    let num_classes = r.u32()? as usize;
    let fine = match r.u8()? {
        0 => None,
        1 => {
            let fl: Vec<usize> = r.u32s(m)?.into_iter().map(|l| l as usize).collect();
            Some((fl, r.u32()? as usize))
        }
        f => return Err(Error::Format(format!("bad fine-label flag {f}"))),
    };
    let ids = match r.u8()? {
        0 => (0..m as u32).collect(),
        1 => r.u32s(m)?,
        f => return Err(Error::Format(format!("bad sample-id flag {f}"))),
    };
    r.finish()?;
    let mut shape = vec![m];
    shape.extend_from_slice(&dims);
    let fmt = |e: Error| Error::Format(e.to_string());
    let samples = Tensor::new(shape, samples).map_err(fmt)?;
    let mut ds = LabeledDataset::with_ids(name, samples, labels, num_classes, ids).map_err(fmt)?;
    if let Some((fl, k)) = fine {
        ds.set_fine(fl, k).map_err(fmt)?;
    }
    Ok(ds)
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into())
}

pub fn save(ds: &LabeledDataset, path: &Path) -> Result<()> {
    std::fs::write(path, encode(ds)).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<LabeledDataset> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes, &stem(path))
}

/// Reads `f0,…,f{d−1},label` rows. The class count is `max(label) + 1`.
pub fn import_csv(path: &Path) -> Result<LabeledDataset> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, &stem(path))
}

pub fn read_csv<R: std::io::Read>(reader: R, name: &str) -> Result<LabeledDataset> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| Error::Format(format!("csv header: {e}")))?
        .clone();
    let d = header.len().saturating_sub(1);
    let header_ok = d >= 1
        && header.get(d) == Some("label")
        && (0..d).all(|i| header.get(i) == Some(format!("f{i}").as_str()));
    if !header_ok {
        return Err(Error::Format(format!(
            "csv header must be f0,...,f{{d-1}},label; got {:?}",
            header.iter().collect::<Vec<_>>()
        )));
    }
    let mut values = Vec::new();
    let mut labels = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Format(format!("csv row {}: {e}", line + 2)))?;
        for i in 0..d {
            let v: f64 = rec[i].parse().map_err(|_| {
                Error::Format(format!("csv row {}: `{}` is not a number", line + 2, &rec[i]))
            })?;
            values.push(v);
        }
        let l: usize = rec[d].parse().map_err(|_| {
            Error::Format(format!("csv row {}: bad label `{}`", line + 2, &rec[d]))
        })?;
        labels.push(l);
    }
    if labels.is_empty() {
        return Err(Error::Format("csv has no data rows".into()));
    }
    let num_classes = (labels.iter().max().unwrap() + 1).max(2);
    let samples = Tensor::new(vec![labels.len(), d], values)?;
    LabeledDataset::new(name, samples, labels, num_classes)
}

/// CIFAR-10 binary batch: records of one label byte followed by 3×32×32
/// pixel bytes. Pixels are scaled to `[0, 1]`. Only the listed classes are
/// kept and relabelled `0..classes.len()` in that order.
pub fn import_cifar10_bin(path: &Path, classes: &[u8]) -> Result<LabeledDataset> {
    const REC: usize = 1 + 3 * 32 * 32;
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.is_empty() || bytes.len() % REC != 0 {
        return Err(Error::Format(format!(
            "{} is not a whole number of CIFAR records",
            path.display()
        )));
    }
    let mut values = Vec::new();
    let mut labels = Vec::new();
    for rec in bytes.chunks_exact(REC) {
        if let Some(pos) = classes.iter().position(|&c| c == rec[0]) {
            labels.push(pos);
            values.extend(rec[1..].iter().map(|&b| b as f64 / 255.0));
        }
    }
    if labels.is_empty() {
        return Err(Error::Format("no records of the requested classes".into()));
    }
    let samples = Tensor::new(vec![labels.len(), 3, 32, 32], values)?;
    LabeledDataset::new(stem(path), samples, labels, classes.len().max(2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{apply_coarse, gaussian_toy, CoarseMap};

    #[test]
    fn binary_round_trip_keeps_everything() {
        let tt = gaussian_toy(4, 10, 3, 0.4, 1).unwrap();
        let coarse = apply_coarse(&tt.test, &CoarseMap::grouped(4, 2).unwrap()).unwrap();
        for ds in [&tt.train, &coarse] {
            let back = decode(&encode(ds), &ds.name).unwrap();
            assert_eq!(&back, ds);
        }
    }

    #[test]
    fn corrupted_header_is_a_format_error() {
        let tt = gaussian_toy(2, 10, 2, 0.4, 1).unwrap();
        let mut bytes = encode(&tt.train);
        bytes[1] = b'Z';
        assert!(matches!(decode(&bytes, "x"), Err(Error::Format(_))));
        let bytes = encode(&tt.train);
        assert!(matches!(decode(&bytes[..40], "x"), Err(Error::Format(_))));
        let mut v2 = bytes.clone();
        v2[4] = 2;
        assert!(matches!(decode(&v2, "x"), Err(Error::Format(_))));
    }

    #[test]
    fn csv_import() {
        let text = "f0,f1,label\n0.5,1.0,0\n-1.0,2.5,1\n3,4,2\n";
        let ds = read_csv(text.as_bytes(), "t").unwrap();
        assert_eq!(ds.samples().shape(), &[3, 2]);
        assert_eq!(ds.labels(), &[0, 1, 2]);
        assert_eq!(ds.num_classes(), 3);
        assert_eq!(ds.samples().row(1), &[-1.0, 2.5]);
    }

    #[test]
    fn csv_rejects_ragged_and_bad_header() {
        assert!(read_csv("f0,f1,label\n1,2,0\n1,0\n".as_bytes(), "t").is_err());
        assert!(read_csv("a,b,label\n1,2,0\n".as_bytes(), "t").is_err());
        assert!(read_csv("f0,f1,label\n1,x,0\n".as_bytes(), "t").is_err());
        assert!(read_csv("f0,f1,label\n".as_bytes(), "t").is_err());
    }
}
