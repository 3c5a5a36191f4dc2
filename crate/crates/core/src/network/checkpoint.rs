//! Flat binary checkpoints.
//!
//! Layout (all integers u32 little-endian, values f64 little-endian):
//!
//! ```text
//! magic "CLCK" | version | spec_len | spec JSON (spec_len bytes)
//! | SHA-256 of the spec JSON (32 bytes) | param_count
//! | per param: rank | dims[rank] | values
//! ```
//!
//! Parameters appear in declaration order (see [`Model::param_names`]).

use std::path::Path;

use sha2::{Digest, Sha256};

use super::model::{Model, ModelSpec};
use crate::data::io::Reader;
use crate::error::{Error, Result};
use crate::numerics::Tensor;

pub const MAGIC: &[u8; 4] = b"CLCK";
pub const VERSION: u32 = 1;

fn spec_json(spec: &ModelSpec) -> Vec<u8> {
    serde_json::to_vec(spec).expect("model spec serializes")
}

pub fn spec_digest(spec: &ModelSpec) -> [u8; 32] {
    Sha256::digest(spec_json(spec)).into()
}

/// SHA-256 over the little-endian bytes of the given parameters.
pub fn params_digest(params: &[Tensor]) -> [u8; 32] {
    let mut h = Sha256::new();
    for p in params {
        for v in p.data() {
            h.update(v.to_le_bytes());
        }
    }
    h.finalize().into()
}

pub fn encode(model: &Model) -> Vec<u8> {
    let spec = spec_json(model.spec());
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(spec.len() as u32).to_le_bytes());
    out.extend_from_slice(&spec);
    out.extend_from_slice(&spec_digest(model.spec()));
    out.extend_from_slice(&(model.params().len() as u32).to_le_bytes());
    for p in model.params() {
        out.extend_from_slice(&(p.rank() as u32).to_le_bytes());
        for &d in p.shape() {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in p.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<Model> {
    let mut r = Reader::new(bytes);
    if r.take(4)? != MAGIC {
        return Err(Error::Format("not a checkpoint (bad magic)".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported checkpoint version {version}")));
    }
    let spec_len = r.u32()? as usize;
    let spec_bytes = r.take(spec_len)?;
    let spec: ModelSpec = serde_json::from_slice(spec_bytes)
        .map_err(|e| Error::Format(format!("checkpoint model spec: {e}")))?;
    let digest = r.take(32)?;
    if digest != spec_digest(&spec) {
        return Err(Error::Format("checkpoint spec digest mismatch".into()));
    }
    let count = r.u32()? as usize;
    let mut params = Vec::with_capacity(count);
    for _ in 0..count {
        let rank = r.u32()? as usize;
        let shape = (0..rank)
            .map(|_| r.u32().map(|d| d as usize))
            .collect::<Result<Vec<_>>>()?;
        let numel: usize = shape.iter().product();
        let data = r.f64s(numel)?;
        params.push(Tensor::new(shape, data).map_err(|e| Error::Format(e.to_string()))?);
    }
    r.finish()?;
    Model::from_params(spec, params).map_err(|e| Error::Format(e.to_string()))
}

pub fn save(model: &Model, path: &Path) -> Result<()> {
    std::fs::write(path, encode(model)).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<Model> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Rng;

    #[test]
    fn round_trip_is_exact() {
        let m = Model::init(ModelSpec::mlp(3, &[5, 4], 2, 3), &mut Rng::new(1)).unwrap();
        let bytes = encode(&m);
        assert_eq!(decode(&bytes).unwrap(), m);
        assert_eq!(encode(&decode(&bytes).unwrap()), bytes);
    }

    #[test]
    fn corruption_is_detected() {
        let m = Model::init(ModelSpec::mlp(3, &[4], 2, 2), &mut Rng::new(1)).unwrap();
        let bytes = encode(&m);
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(decode(&bad), Err(Error::Format(_))));
        assert!(matches!(decode(&bytes[..bytes.len() - 3]), Err(Error::Format(_))));
        let mut bad_spec = bytes.clone();
        bad_spec[20] ^= 1;
        assert!(decode(&bad_spec).is_err());
    }
}
