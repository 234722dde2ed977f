//! Versioned model container.
//!
//! Layout (little-endian): `b"SGCK"`, `u16` version, `u64` network schema
//! hash, `u32` length + UTF-8 JSON network description, `u32` tensor count,
//! then per tensor `u16` name length, name, `u8` rank, `u32` dims, `f32` data.
//! Besides the network weights the container carries the fitted input
//! transform as `pca.mean`, `pca.components`, `norm.mean` and `norm.std`.

use std::fs;
use std::path::Path;

use crate::data::{write_atomic, PcaModel, Reader, Standardizer, FORMAT_VERSION};
use crate::error::{Error, Result};
use crate::network::{NetworkSpec, Params};
use crate::tensor::Tensor;

const MAGIC: &[u8; 4] = b"SGCK";
const WHAT: &str = "checkpoint";

#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub spec: NetworkSpec,
    pub params: Params,
    pub pca: PcaModel,
    pub standardizer: Standardizer,
}

fn push_tensor(out: &mut Vec<u8>, name: &str, t: &Tensor) {
    out.extend_from_slice(&(name.len() as u16).to_le_bytes());
    out.extend_from_slice(name.as_bytes());
    out.push(t.ndim() as u8);
    for &d in t.shape() {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for v in t.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

fn vec_tensor(v: &[f64], what: &str) -> Result<Tensor> {
    Tensor::from_f64(&[v.len()], v, what)
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&self.spec.schema_hash().to_le_bytes());
        let json = serde_json::to_vec(&self.spec).map_err(|e| Error::config(e.to_string()))?;
        out.extend_from_slice(&(json.len() as u32).to_le_bytes());
        out.extend_from_slice(&json);
        let extra = [
            ("pca.mean", self.pca.mean_tensor()?),
            ("pca.components", self.pca.components_tensor()?),
            (
                "norm.mean",
                vec_tensor(&self.standardizer.mean, "norm.mean")?,
            ),
            ("norm.std", vec_tensor(&self.standardizer.std, "norm.std")?),
        ];
        out.extend_from_slice(&((self.params.len() + extra.len()) as u32).to_le_bytes());
        for (name, t) in self.params.names().iter().zip(self.params.tensors()) {
            push_tensor(&mut out, name, t);
        }
        for (name, t) in &extra {
            push_tensor(&mut out, name, t);
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes, WHAT);
        r.magic(MAGIC)?;
        r.version()?;
        let hash = r.u64()?;
        let json_len = r.u32()? as usize;
        let spec: NetworkSpec = serde_json::from_slice(r.take(json_len)?)
            .map_err(|e| r.err(format!("network description: {e}")))?;
        if spec.schema_hash() != hash {
            return Err(r.err("schema hash does not match the stored network".into()));
        }
        spec.validate()?;
        let count = r.u32()? as usize;
        let mut names = Vec::with_capacity(count);
        let mut tensors = Vec::with_capacity(count);
        for _ in 0..count {
            let n = r.u16()? as usize;
            let name = String::from_utf8(r.take(n)?.to_vec())
                .map_err(|_| r.err("tensor name is not UTF-8".into()))?;
            let rank = r.u8()? as usize;
            let shape = (0..rank)
                .map(|_| r.u32().map(|d| d as usize))
                .collect::<Result<Vec<_>>>()?;
            let len: usize = shape.iter().product();
            if len.checked_mul(4).is_none_or(|b| b > r.remaining()) {
                return Err(r.err(format!("tensor {name} runs past the end of the file")));
            }
            let data = (0..len).map(|_| r.f32()).collect::<Result<Vec<_>>>()?;
            names.push(name);
            tensors.push(Tensor::new(shape, data)?);
        }
        if r.remaining() != 0 {
            return Err(r.err(format!("{} trailing bytes", r.remaining())));
        }
        let mut take = |key: &str| -> Result<Tensor> {
            let i = names
                .iter()
                .position(|n| n == key)
                .ok_or_else(|| Error::Format {
                    what: WHAT,
                    reason: format!("missing tensor {key}"),
                })?;
            names.remove(i);
            Ok(tensors.remove(i))
        };
        let pca = PcaModel::from_tensors(&take("pca.mean")?, &take("pca.components")?)?;
        let standardizer = Standardizer {
            mean: take("norm.mean")?.to_f64(),
            std: take("norm.std")?.to_f64(),
        };
        if standardizer.mean.len() != pca.n_keep || standardizer.std.len() != pca.n_keep {
            return Err(Error::Format {
                what: WHAT,
                reason: "input transform sizes disagree".into(),
            });
        }
        let params = Params::new(names, tensors)?;
        params.check_layout(&spec)?;
        Ok(Self {
            spec,
            params,
            pca,
            standardizer,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes()?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}
