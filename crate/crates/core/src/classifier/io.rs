//! Binary model file: magic `USMLP1\0\0`, then little-endian
//! `u32 layer_count`, per layer `u32 rows, u32 cols, f64 weights[rows*cols]
//! (row-major), f64 biases[cols]`, then `f64 mean[in], f64 std[in]`, then
//! `u32 label_count` and per label `u32 byte_len` + UTF-8 bytes.

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};

use super::{Dense, MlpModel, ModelError, Standardizer};

pub const MODEL_MAGIC: [u8; 8] = *b"USMLP1\0\0";

pub fn encode_model(model: &MlpModel) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(&MODEL_MAGIC);
    out.extend_from_slice(&(model.layers().len() as u32).to_le_bytes());
    for layer in model.layers() {
        out.extend_from_slice(&(layer.inputs() as u32).to_le_bytes());
        out.extend_from_slice(&(layer.outputs() as u32).to_le_bytes());
        for w in layer.weights.iter() {
            out.extend_from_slice(&w.to_le_bytes());
        }
        for b in layer.biases.iter() {
            out.extend_from_slice(&b.to_le_bytes());
        }
    }
    let s = model.standardizer();
    for v in s.mean.iter().chain(s.std.iter()) {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(&(model.labels().len() as u32).to_le_bytes());
    for label in model.labels() {
        out.extend_from_slice(&(label.len() as u32).to_le_bytes());
        out.extend_from_slice(label.as_bytes());
    }
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], ModelError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            ModelError::Truncated(format!("{what} needs {n} bytes at offset {}", self.pos))
        })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32, ModelError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")))
    }

    fn f64s(&mut self, n: usize, what: &str) -> Result<Vec<f64>, ModelError> {
        let len = n.checked_mul(8).ok_or_else(|| ModelError::Corrupt(format!("{what} too large")))?;
        Ok(self
            .take(len, what)?
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }
}

pub fn decode_model(bytes: &[u8]) -> Result<MlpModel, ModelError> {
    if bytes.len() < MODEL_MAGIC.len() || bytes[..MODEL_MAGIC.len()] != MODEL_MAGIC {
        return Err(ModelError::NotAModelFile);
    }
    let mut cur = Cursor { bytes, pos: MODEL_MAGIC.len() };
    let n_layers = cur.u32("layer count")?;
    if n_layers != 3 {
        return Err(ModelError::Corrupt(format!("layer count {n_layers}, expected 3")));
    }
    let mut layers = Vec::with_capacity(3);
    for i in 0..3 {
        let rows = cur.u32("layer rows")? as usize;
        let cols = cur.u32("layer cols")? as usize;
        let count = rows
            .checked_mul(cols)
            .ok_or_else(|| ModelError::Corrupt(format!("layer {i} size overflows")))?;
        let weights = cur.f64s(count, "layer weights")?;
        let biases = cur.f64s(cols, "layer biases")?;
        layers.push(Dense {
            weights: Array2::from_shape_vec((rows, cols), weights)
                .map_err(|e| ModelError::Corrupt(e.to_string()))?,
            biases: Array1::from_vec(biases),
        });
    }
    let input = layers[0].inputs();
    let mean = Array1::from_vec(cur.f64s(input, "standardization mean")?);
    let std = Array1::from_vec(cur.f64s(input, "standardization std")?);
    let n_labels = cur.u32("label count")?;
    let mut labels = Vec::new();
    for _ in 0..n_labels {
        let len = cur.u32("label length")? as usize;
        let raw = cur.take(len, "label")?;
        labels.push(
            String::from_utf8(raw.to_vec()).map_err(|_| ModelError::Corrupt("label is not UTF-8".into()))?,
        );
    }
    if cur.pos != bytes.len() {
        return Err(ModelError::Corrupt(format!("{} trailing bytes", bytes.len() - cur.pos)));
    }
    MlpModel::from_parts(layers, Standardizer { mean, std }, labels)
        .map_err(|e| ModelError::Corrupt(e.to_string()))
}

pub fn save_model(model: &MlpModel, path: impl AsRef<Path>) -> Result<(), ModelError> {
    fs::write(path, encode_model(model))?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<MlpModel, ModelError> {
    decode_model(&fs::read(path)?)
}
