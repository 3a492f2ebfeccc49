//! Parameter checkpoints: a JSON descriptor beside a little-endian f64 blob.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::network::{LayerOffsets, Network};
use super::spec::NetworkSpec;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointDescriptor {
    pub spec: NetworkSpec,
    pub offsets: Vec<LayerOffsets>,
    pub param_count: usize,
    #[serde(default)]
    pub metadata: serde_json::Value,
}

pub fn params_to_bytes(params: &[f64]) -> Vec<u8> {
    params.iter().flat_map(|p| p.to_le_bytes()).collect()
}

pub fn params_from_bytes(bytes: &[u8], expected: usize) -> Result<Vec<f64>> {
    if bytes.len() != expected * 8 {
        return Err(Error::Length { expected: expected * 8, found: bytes.len() });
    }
    Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
}

fn descriptor_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    s.into()
}

/// Writes `path` (parameter blob) and `path.json` (descriptor).
pub fn save_checkpoint(path: impl AsRef<Path>, net: &Network, metadata: serde_json::Value) -> Result<()> {
    let path = path.as_ref();
    let desc = CheckpointDescriptor {
        spec: net.spec().clone(),
        offsets: net.offsets().to_vec(),
        param_count: net.params().len(),
        metadata,
    };
    std::fs::write(path, params_to_bytes(net.params()))?;
    std::fs::write(descriptor_path(path), serde_json::to_string_pretty(&desc)?)?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<(Network, serde_json::Value)> {
    let path = path.as_ref();
    let desc: CheckpointDescriptor =
        serde_json::from_str(&std::fs::read_to_string(descriptor_path(path))?)?;
    let params = params_from_bytes(&std::fs::read(path)?, desc.param_count)?;
    let net = Network::from_parts(desc.spec, params)?;
    if net.offsets() != desc.offsets.as_slice() {
        return Err(Error::Format("checkpoint offsets disagree with its spec".into()));
    }
    Ok((net, desc.metadata))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffnet::{Activation, LayerSpec};

    #[test]
    fn round_trip_is_bit_exact() {
        let spec = NetworkSpec::new(
            vec![1, 5, 5],
            vec![
                LayerSpec::conv2d(1, 2, 3, Activation::Relu),
                LayerSpec::Flatten,
                LayerSpec::dense(18, 1, Activation::Identity),
            ],
            11,
        )
        .unwrap();
        let net = Network::new(spec).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.bin");
        save_checkpoint(&path, &net, serde_json::json!({"ordering": "raster_forward"})).unwrap();
        let (back, meta) = load_checkpoint(&path).unwrap();
        assert_eq!(back, net);
        assert_eq!(meta["ordering"], "raster_forward");
    }

    #[test]
    fn truncated_blob_is_length_error() {
        assert!(matches!(params_from_bytes(&[0u8; 12], 2), Err(Error::Length { .. })));
    }
}
