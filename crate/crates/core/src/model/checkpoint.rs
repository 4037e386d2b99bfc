use std::collections::BTreeMap;
use std::path::Path;

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::params::{ModelConfig, ModelParams};

#[derive(Serialize, Deserialize)]
struct Tensor {
    shape: [usize; 2],
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    config: ModelConfig,
    tensors: BTreeMap<String, Tensor>,
}

pub fn to_json(params: &ModelParams) -> Result<String> {
    let tensors = params
        .tensors()
        .into_iter()
        .map(|(name, t)| {
            let (r, c) = t.dim();
            (
                name,
                Tensor {
                    shape: [r, c],
                    data: t.iter().copied().collect(),
                },
            )
        })
        .collect();
    let ckpt = Checkpoint {
        config: params.config.clone(),
        tensors,
    };
    Ok(serde_json::to_string(&ckpt)?)
}

/// Every tensor named by the config must be present with the expected shape.
pub fn from_json(text: &str) -> Result<ModelParams> {
    let mut ckpt: Checkpoint = serde_json::from_str(text)?;
    let mut params = ModelParams::init(ckpt.config.clone(), &mut ChaCha8Rng::seed_from_u64(0))
        .map_err(|e| Error::Checkpoint(format!("invalid model config: {e}")))?;
    for (name, slot) in params.tensors_mut() {
        let t = ckpt
            .tensors
            .remove(&name)
            .ok_or_else(|| Error::Checkpoint(format!("missing tensor {name}")))?;
        if t.shape[0] * t.shape[1] != t.data.len() || (t.shape[0], t.shape[1]) != slot.dim() {
            return Err(Error::Checkpoint(format!(
                "tensor {name} has shape {:?} with {} values, expected {:?}",
                t.shape,
                t.data.len(),
                slot.dim()
            )));
        }
        *slot = Array2::from_shape_vec(slot.dim(), t.data)
            .map_err(|e| Error::Checkpoint(e.to_string()))?;
    }
    if let Some(extra) = ckpt.tensors.keys().next() {
        return Err(Error::Checkpoint(format!("unexpected tensor {extra}")));
    }
    Ok(params)
}

pub fn save_checkpoint(params: &ModelParams, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, to_json(params)?)?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<ModelParams> {
    from_json(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::params::Task;

    #[test]
    fn round_trip_is_bit_exact() {
        let cfg = ModelConfig::new(2, 2, 8, Task::NodeClassification { classes: 3 });
        let params = ModelParams::init(cfg, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ckpt").join("model.json");
        save_checkpoint(&params, &path).unwrap();
        assert_eq!(load_checkpoint(&path).unwrap(), params);
    }

    #[test]
    fn wrong_shape_is_rejected() {
        let cfg = ModelConfig::new(1, 1, 4, Task::GraphRegression);
        let params = ModelParams::init(cfg, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let text = to_json(&params).unwrap();
        let mut value: serde_json::Value = serde_json::from_str(&text).unwrap();
        value["tensors"]["head.w"]["shape"] = serde_json::json!([2, 2]);
        assert!(matches!(
            from_json(&value.to_string()),
            Err(Error::Checkpoint(_))
        ));
        value["tensors"].as_object_mut().unwrap().remove("head.w");
        assert!(matches!(
            from_json(&value.to_string()),
            Err(Error::Checkpoint(_))
        ));
    }
}
