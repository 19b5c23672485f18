//! The `LGVW` weight file format.
//!
//! Binary layout, all integers little-endian:
//!
//! ```text
//! magic   4 bytes  "LGVW"
//! version u32      1
//! dtype   u8       0 = f32, 1 = f64
//! count   u32      K, number of weight vectors
//! dim     u64      p, parameters per vector
//! values  K * p    little-endian f32 or f64
//! ```
//!
//! A JSON sidecar at `<file>.json` carries the model spec and collection
//! metadata, so a weight file is self-describing.

use std::fs;
use std::path::{Path, PathBuf};

use lgv_core::model::{Activation, ModelSpec};
use lgv_core::train::{CollectionMeta, WeightCollection};
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

const MAGIC: &[u8; 4] = b"LGVW";
const VERSION: u32 = 1;

/// On-disk value precision. The numerics core always works in f64; f32
/// files exist to halve storage for large collections.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dtype {
    F32,
    F64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelSpecConfig {
    pub layer_widths: Vec<usize>,
    pub activation: String,
}

impl ModelSpecConfig {
    pub fn from_spec(spec: &ModelSpec) -> Self {
        ModelSpecConfig {
            layer_widths: spec.layer_widths().to_vec(),
            activation: spec.activation().to_string(),
        }
    }

    pub fn to_spec(&self) -> Result<ModelSpec> {
        let activation = match self.activation.as_str() {
            "relu" => Activation::Relu,
            "tanh" => Activation::Tanh,
            other => {
                return Err(LabError::config(format!(
                    "unknown activation {other:?} (expected \"relu\" or \"tanh\")"
                )))
            }
        };
        ModelSpec::new(self.layer_widths.clone(), activation).map_err(Into::into)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct MetaConfig {
    lr: f64,
    epochs: f64,
    samples_per_epoch: f64,
    source_hash: String,
}

/// Sidecar contents: model spec plus collection metadata.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct Sidecar {
    model: ModelSpecConfig,
    dtype: Dtype,
    count: usize,
    dim: usize,
    meta: MetaConfig,
}

fn sidecar_path(path: &Path) -> PathBuf {
    let mut os = path.as_os_str().to_owned();
    os.push(".json");
    PathBuf::from(os)
}

/// Write a collection and its sidecar. Creates parent directories.
pub fn write_weights(
    path: &Path,
    spec: &ModelSpec,
    coll: &WeightCollection,
    dtype: Dtype,
) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| LabError::io(parent, e))?;
    }
    let k = coll.len();
    let p = coll.dim();
    let mut bytes = Vec::with_capacity(21 + k * p * 8);
    bytes.extend_from_slice(MAGIC);
    bytes.extend_from_slice(&VERSION.to_le_bytes());
    bytes.push(match dtype {
        Dtype::F32 => 0,
        Dtype::F64 => 1,
    });
    bytes.extend_from_slice(&(k as u32).to_le_bytes());
    bytes.extend_from_slice(&(p as u64).to_le_bytes());
    for w in coll.weights() {
        for &v in w.values() {
            match dtype {
                Dtype::F32 => bytes.extend_from_slice(&(v as f32).to_le_bytes()),
                Dtype::F64 => bytes.extend_from_slice(&v.to_le_bytes()),
            }
        }
    }
    fs::write(path, bytes).map_err(|e| LabError::io(path, e))?;

    let sidecar = Sidecar {
        model: ModelSpecConfig::from_spec(spec),
        dtype,
        count: k,
        dim: p,
        meta: MetaConfig {
            lr: coll.meta().lr,
            epochs: coll.meta().epochs,
            samples_per_epoch: coll.meta().samples_per_epoch,
            source_hash: format!("{:016x}", coll.meta().source_hash),
        },
    };
    let json = serde_json::to_string_pretty(&sidecar)
        .map_err(|e| LabError::config(format!("sidecar serialisation failed: {e}")))?;
    let sc_path = sidecar_path(path);
    fs::write(&sc_path, json).map_err(|e| LabError::io(sc_path, e))?;
    Ok(())
}

fn format_err(path: &Path, reason: impl Into<String>) -> LabError {
    LabError::Format {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

/// Read a collection and its sidecar back; validates header consistency and
/// rebinds the values to the sidecar's model spec.
pub fn read_weights(path: &Path) -> Result<(ModelSpec, WeightCollection)> {
    let bytes = fs::read(path).map_err(|e| LabError::io(path, e))?;
    if bytes.len() < 21 {
        return Err(format_err(path, "file shorter than the LGVW header"));
    }
    if &bytes[0..4] != MAGIC {
        return Err(format_err(path, "bad magic, not an LGVW file"));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(format_err(path, format!("unsupported version {version}")));
    }
    let dtype = match bytes[8] {
        0 => Dtype::F32,
        1 => Dtype::F64,
        other => return Err(format_err(path, format!("unknown dtype tag {other}"))),
    };
    let k = u32::from_le_bytes(bytes[9..13].try_into().unwrap()) as usize;
    let p = u64::from_le_bytes(bytes[13..21].try_into().unwrap()) as usize;
    let value_size = match dtype {
        Dtype::F32 => 4,
        Dtype::F64 => 8,
    };
    let expected = 21 + k * p * value_size;
    if bytes.len() != expected {
        return Err(format_err(
            path,
            format!("payload is {} bytes, header promises {expected}", bytes.len()),
        ));
    }

    let sc_path = sidecar_path(path);
    let sidecar_text = fs::read_to_string(&sc_path).map_err(|e| LabError::io(&sc_path, e))?;
    let sidecar: Sidecar = serde_json::from_str(&sidecar_text)
        .map_err(|e| format_err(&sc_path, format!("invalid sidecar JSON: {e}")))?;
    if sidecar.count != k || sidecar.dim != p {
        return Err(format_err(
            &sc_path,
            format!(
                "sidecar says {}x{}, binary header says {k}x{p}",
                sidecar.count, sidecar.dim
            ),
        ));
    }
    let spec = sidecar.model.to_spec()?;
    if spec.param_count() != p {
        return Err(format_err(
            &sc_path,
            format!(
                "model spec has {} parameters, file stores {p}",
                spec.param_count()
            ),
        ));
    }

    let mut weights = Vec::with_capacity(k);
    let mut offset = 21;
    for _ in 0..k {
        let mut values = Vec::with_capacity(p);
        for _ in 0..p {
            let v = match dtype {
                Dtype::F32 => {
                    f32::from_le_bytes(bytes[offset..offset + 4].try_into().unwrap()) as f64
                }
                Dtype::F64 => f64::from_le_bytes(bytes[offset..offset + 8].try_into().unwrap()),
            };
            offset += value_size;
            values.push(v);
        }
        weights.push(spec.bind(values)?);
    }
    let source_hash = u64::from_str_radix(&sidecar.meta.source_hash, 16).unwrap_or(0);
    let coll = WeightCollection::new(
        weights,
        CollectionMeta {
            lr: sidecar.meta.lr,
            epochs: sidecar.meta.epochs,
            samples_per_epoch: sidecar.meta.samples_per_epoch,
            source_hash,
        },
    )?;
    Ok((spec, coll))
}
