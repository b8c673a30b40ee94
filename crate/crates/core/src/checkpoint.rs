//! JSON checkpoints: network description, all tensors and masks with their
//! shapes, and training metadata.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{NetworkParams, NetworkSpec};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub seed: u64,
    pub epochs: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_loss: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_accuracy: Option<f64>,
    /// Free-form origin, e.g. `train` or `prune`.
    #[serde(default)]
    pub stage: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub spec: NetworkSpec,
    pub params: NetworkParams,
    pub meta: CheckpointMeta,
}

#[derive(Deserialize)]
struct VersionProbe {
    format_version: u32,
}

impl Checkpoint {
    pub fn new(spec: NetworkSpec, params: NetworkParams, meta: CheckpointMeta) -> Result<Self> {
        params.check(&spec)?;
        Ok(Self {
            format_version: FORMAT_VERSION,
            spec,
            params,
            meta,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Data(format!("serialising checkpoint: {e}")))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let probe: VersionProbe =
            serde_json::from_str(text).map_err(|e| Error::Data(format!("checkpoint: {e}")))?;
        if probe.format_version != FORMAT_VERSION {
            return Err(Error::Version {
                found: probe.format_version,
                expected: FORMAT_VERSION,
            });
        }
        let ck: Checkpoint = serde_json::from_str(text).map_err(|e| Error::Data(format!("checkpoint: {e}")))?;
        ck.spec.validate()?;
        ck.params.check(&ck.spec)?;
        Ok(ck)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layers::DelaySpec;
    use crate::network::{forward, LayerKind, LayerSpec, ReadoutSpec};
    use crate::neuron::{NeuronConfig, SurrogateConfig};
    use ndarray::Array2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sample() -> Checkpoint {
        let spec = NetworkSpec {
            input_size: 2,
            layers: vec![
                LayerSpec {
                    size: 5,
                    kind: LayerKind::Feedforward,
                    neuron: NeuronConfig::default(),
                },
                LayerSpec {
                    size: 4,
                    kind: LayerKind::Delayed {
                        delays: DelaySpec::from_depth_stride(10, 5).unwrap(),
                    },
                    neuron: NeuronConfig::default(),
                },
            ],
            readout: ReadoutSpec {
                size: 1,
                delays: None,
                tau_init: 5.0,
            },
            surrogate: SurrogateConfig::default(),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut params = NetworkParams::init(&spec, 1.0, &mut rng).unwrap();
        if let crate::network::Projection::Delayed(p) = &mut params.layers[1].input {
            p.mask[[0, 0, 1]] = false;
            p.apply_mask();
        }
        Checkpoint::new(spec, params, CheckpointMeta { seed: 1, ..Default::default() }).unwrap()
    }

    #[test]
    fn roundtrip_is_bit_exact() {
        let ck = sample();
        let back = Checkpoint::from_json(&ck.to_json().unwrap()).unwrap();
        assert_eq!(back, ck);
        let a = ck.params.to_flat();
        let b = back.params.to_flat();
        assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let probe = Array2::from_shape_fn((20, 2), |_| rng.gen_range(0.0..1.5));
        let ya = forward(&ck.spec, &ck.params, &probe).unwrap().readout;
        let yb = forward(&back.spec, &back.params, &probe).unwrap().readout;
        assert!(ya.iter().zip(yb.iter()).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn version_mismatch_rejected() {
        let mut ck = sample();
        ck.format_version = 99;
        let text = serde_json::to_string(&ck).unwrap();
        assert!(matches!(Checkpoint::from_json(&text), Err(Error::Version { found: 99, .. })));
    }

    #[test]
    fn corrupt_file_is_data_error() {
        assert!(matches!(Checkpoint::from_json("{"), Err(Error::Data(_))));
    }
}
