use std::path::Path;

use numcore::{read_container, write_container, AnyTensor, Tensor};
use serde::{Deserialize, Serialize};

use crate::model::sidecar;
use crate::EncoderError;

/// Concatenated encodings, one row per molecule id.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodingCache {
    pub ids: Vec<String>,
    pub encodings: Tensor<f32>,
}

#[derive(Serialize, Deserialize)]
struct Index {
    ids: Vec<String>,
    dim: usize,
}

impl EncodingCache {
    pub fn dim(&self) -> usize {
        self.encodings.last_dim()
    }

    pub fn row(&self, i: usize) -> &[f32] {
        self.encodings.row(i)
    }

    pub fn index(&self) -> std::collections::HashMap<&str, usize> {
        self.ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect()
    }
}

/// Writes the container to `path` and the index to `path.json`.
pub fn save_encodings(path: &Path, cache: &EncodingCache) -> Result<(), EncoderError> {
    let f = std::fs::File::create(path).map_err(|source| EncoderError::Io { path: path.to_path_buf(), source })?;
    write_container(
        std::io::BufWriter::new(f),
        &[("encodings".to_string(), AnyTensor::from_typed(&cache.encodings))],
    )?;
    let side = sidecar(path);
    let idx = Index { ids: cache.ids.clone(), dim: cache.dim() };
    std::fs::write(&side, serde_json::to_string(&idx).expect("index serializes"))
        .map_err(|source| EncoderError::Io { path: side, source })
}

pub fn load_encodings(path: &Path) -> Result<EncodingCache, EncoderError> {
    let side = sidecar(path);
    let text = std::fs::read_to_string(&side).map_err(|source| EncoderError::Io { path: side.clone(), source })?;
    let idx: Index = serde_json::from_str(&text).map_err(|e| EncoderError::Format { path: side.clone(), msg: e.to_string() })?;
    let f = std::fs::File::open(path).map_err(|source| EncoderError::Io { path: path.to_path_buf(), source })?;
    let named = read_container(std::io::BufReader::new(f))?;
    let fmt = |msg: String| EncoderError::Format { path: path.to_path_buf(), msg };
    let (_, t) = named
        .iter()
        .find(|(n, _)| n == "encodings")
        .ok_or_else(|| fmt("no `encodings` tensor".into()))?;
    let enc: Tensor<f32> = t.to_typed();
    if enc.shape() != [idx.ids.len(), idx.dim] {
        return Err(fmt(format!("shape {:?} does not match index ({} ids, dim {})", enc.shape(), idx.ids.len(), idx.dim)));
    }
    Ok(EncodingCache { ids: idx.ids, encodings: enc })
}
