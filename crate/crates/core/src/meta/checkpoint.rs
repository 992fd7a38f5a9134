use std::path::Path;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::airl::{Discriminator, ModelParams, Policy};
use crate::numerics::{Activation, DenseNet};
use crate::persist::{
    atomic_write, put_f64s, read_container, read_file, sha256_hex, ContainerWriter, PersistError,
    RecordReader,
};

use super::{MetaConfig, MetaError};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"MAIRLCK\0";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Model parameters with everything needed to continue or reproduce the run
/// that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: ModelParams,
    pub config: MetaConfig,
    /// Completed meta iterations.
    pub iteration: usize,
    /// Task-sampling generator positioned after `iteration` iterations.
    pub rng: ChaCha8Rng,
    /// Free-form provenance, e.g. `meta`, `adapted:aggressive:10`.
    pub label: String,
    pub version: u32,
}

#[derive(Serialize, Deserialize)]
struct NetShape {
    sizes: Vec<usize>,
    activations: Vec<Activation>,
}

impl NetShape {
    fn of(net: &DenseNet) -> Self {
        Self {
            sizes: net.sizes().to_vec(),
            activations: net.activations().to_vec(),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct CheckpointHeader {
    format: String,
    version: u32,
    iteration: usize,
    label: String,
    config: MetaConfig,
    rng: ChaCha8Rng,
    discriminator: NetShape,
    policy: NetShape,
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let header = CheckpointHeader {
            format: "metairl-checkpoint".into(),
            version: self.version,
            iteration: self.iteration,
            label: self.label.clone(),
            config: self.config.clone(),
            rng: self.rng.clone(),
            discriminator: NetShape::of(&self.params.discriminator.net),
            policy: NetShape::of(&self.params.policy.net),
        };
        let header = serde_json::to_vec(&header).expect("checkpoint header serializes");
        let mut w = ContainerWriter::new(CHECKPOINT_MAGIC, &header);
        for net in [&self.params.discriminator.net, &self.params.policy.net] {
            let mut buf = Vec::with_capacity(8 * net.num_params());
            put_f64s(&mut buf, net.params());
            w.record(&buf);
        }
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, MetaError> {
        let c = read_container(bytes, CHECKPOINT_MAGIC, "checkpoint")?;
        let header: CheckpointHeader =
            serde_json::from_slice(c.header).map_err(PersistError::Header)?;
        if header.version != CHECKPOINT_VERSION {
            return Err(PersistError::VersionMismatch {
                found: header.version,
                expected: CHECKPOINT_VERSION,
            }
            .into());
        }
        let [disc_bytes, policy_bytes] = c.records[..] else {
            return Err(PersistError::Malformed(format!(
                "expected 2 parameter records, found {}",
                c.records.len()
            ))
            .into());
        };
        let read_net = |shape: NetShape, bytes: &[u8]| -> Result<DenseNet, MetaError> {
            let mut r = RecordReader::new(bytes);
            let params = r.f64s(bytes.len() / 8)?;
            r.finish()?;
            Ok(DenseNet::from_parts(shape.sizes, shape.activations, params)?)
        };
        Ok(Self {
            params: ModelParams {
                discriminator: Discriminator {
                    net: read_net(header.discriminator, disc_bytes)?,
                },
                policy: Policy {
                    net: read_net(header.policy, policy_bytes)?,
                },
            },
            config: header.config,
            iteration: header.iteration,
            rng: header.rng,
            label: header.label,
            version: header.version,
        })
    }

    /// SHA-256 of the serialized checkpoint, hex encoded.
    pub fn content_hash(&self) -> String {
        sha256_hex(&self.to_bytes())
    }

    pub fn save(&self, path: &Path) -> Result<(), MetaError> {
        atomic_write(path, &self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, MetaError> {
        Self::from_bytes(&read_file(path)?)
    }
}
