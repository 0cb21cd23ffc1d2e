//! Network file format: a JSON document carrying the layer shape and
//! activations plus the flat parameter vector as base64-encoded
//! little-endian f64.

use std::path::Path;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Serialize};

use super::{Activation, Mlp, NeuralError};

pub const FORMAT_NAME: &str = "advscen-mlp";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkFile {
    format: String,
    version: u32,
    shape: Vec<usize>,
    activations: Vec<Activation>,
    params: String,
}

pub fn save(net: &Mlp) -> Vec<u8> {
    let bytes: Vec<u8> = net.params().iter().flat_map(|p| p.to_le_bytes()).collect();
    let doc = NetworkFile {
        format: FORMAT_NAME.to_owned(),
        version: FORMAT_VERSION,
        shape: net.shape(),
        activations: net.activations(),
        params: STANDARD.encode(bytes),
    };
    let mut out = serde_json::to_vec(&doc).expect("network document serialises");
    out.push(b'\n');
    out
}

pub fn load(bytes: &[u8]) -> Result<Mlp, NeuralError> {
    // Read the version before the full schema so newer files report a version error.
    let header: serde_json::Value =
        serde_json::from_slice(bytes).map_err(|e| NeuralError::CorruptFile(e.to_string()))?;
    if header.get("format").and_then(|f| f.as_str()) != Some(FORMAT_NAME) {
        return Err(NeuralError::CorruptFile("not an advscen network file".into()));
    }
    match header.get("version").and_then(|v| v.as_u64()) {
        Some(v) if v == FORMAT_VERSION as u64 => {}
        Some(v) => return Err(NeuralError::VersionMismatch { found: v, supported: FORMAT_VERSION }),
        None => return Err(NeuralError::CorruptFile("missing version".into())),
    }
    let doc: NetworkFile = serde_json::from_value(header).map_err(|e| NeuralError::CorruptFile(e.to_string()))?;
    let raw = STANDARD.decode(doc.params.as_bytes()).map_err(|e| NeuralError::CorruptFile(e.to_string()))?;
    if raw.len() % 8 != 0 {
        return Err(NeuralError::CorruptFile("parameter blob is not a whole number of f64".into()));
    }
    let params = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
    Mlp::from_params(&doc.shape, &doc.activations, params).map_err(|e| NeuralError::CorruptFile(e.to_string()))
}

pub fn save_to(net: &Mlp, path: &Path) -> Result<(), NeuralError> {
    std::fs::write(path, save(net)).map_err(|e| NeuralError::Io(e.to_string()))
}

pub fn load_from(path: &Path) -> Result<Mlp, NeuralError> {
    let bytes = std::fs::read(path).map_err(|e| NeuralError::Io(format!("{}: {e}", path.display())))?;
    load(&bytes)
}
