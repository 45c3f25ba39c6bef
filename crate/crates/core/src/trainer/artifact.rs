//! Portable single-file agent format.
//!
//! The file is a JSON document: metadata, the observation and action specs,
//! and each network's layers with weights and biases as base64 of
//! little-endian f64 (weights row-major, `out_dim x in_dim`). A SHA-256 over
//! the document with an empty `digest` field guards against corruption.

use std::path::Path;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine as _;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::TrainError;
use crate::algorithms::{self, Algorithm, Hyperparams, Learner, NamedNetwork, Policy};
use crate::env::hex;
use crate::nn::{Dense, LayerSpec, ParamSet};
use crate::problem::{ActionSpec, ObservationSpec, Task};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMetadata {
    pub seed: u64,
    pub best_mean_episode_reward: f64,
    /// Epoch whose eval pass produced this agent (0 = untrained).
    pub epoch: usize,
    pub config_digest: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerPayload {
    #[serde(flatten)]
    pub spec: LayerSpec,
    pub weights: String,
    pub bias: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkPayload {
    pub name: String,
    pub layers: Vec<LayerPayload>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentArtifact {
    pub format_version: u32,
    pub algorithm: Algorithm,
    pub task: Task,
    pub observation: ObservationSpec,
    pub action: ActionSpec,
    pub hyperparams: Hyperparams,
    pub metadata: TrainingMetadata,
    pub networks: Vec<NetworkPayload>,
    /// Hex SHA-256 of the document serialized with this field empty.
    #[serde(default)]
    pub digest: String,
}

fn encode_f64s(values: &[f64]) -> String {
    let bytes: Vec<u8> = values.iter().flat_map(|v| v.to_le_bytes()).collect();
    B64.encode(bytes)
}

fn decode_f64s(text: &str, expected: usize, what: &str) -> Result<Vec<f64>, TrainError> {
    let bytes = B64
        .decode(text)
        .map_err(|e| TrainError::Artifact(format!("{what}: invalid base64 ({e})")))?;
    if bytes.len() != expected * 8 {
        return Err(TrainError::Artifact(format!(
            "{what}: truncated payload, {} bytes for {expected} values",
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect())
}

impl AgentArtifact {
    pub fn from_learner(
        learner: &dyn Learner,
        task: Task,
        observation: ObservationSpec,
        action: ActionSpec,
        hyperparams: Hyperparams,
        metadata: TrainingMetadata,
    ) -> Self {
        let networks = learner
            .networks()
            .iter()
            .map(|n| NetworkPayload {
                name: n.name.clone(),
                layers: n
                    .params
                    .layers()
                    .iter()
                    .map(|l| LayerPayload {
                        spec: l.spec,
                        weights: encode_f64s(&l.weights),
                        bias: encode_f64s(&l.bias),
                    })
                    .collect(),
            })
            .collect();
        let mut artifact = Self {
            format_version: FORMAT_VERSION,
            algorithm: learner.algorithm(),
            task,
            observation,
            action,
            hyperparams,
            metadata,
            networks,
            digest: String::new(),
        };
        artifact.digest = artifact.compute_digest();
        artifact
    }

    fn compute_digest(&self) -> String {
        let body = AgentArtifact {
            digest: String::new(),
            ..self.clone()
        };
        let text = serde_json::to_string(&body).expect("artifact serializes");
        hex(&Sha256::digest(text.as_bytes()))
    }

    pub fn decode_networks(&self) -> Result<Vec<NamedNetwork>, TrainError> {
        self.networks
            .iter()
            .map(|n| {
                let layers = n
                    .layers
                    .iter()
                    .enumerate()
                    .map(|(i, l)| {
                        let what = format!("network `{}` layer {i}", n.name);
                        Ok(Dense {
                            spec: l.spec,
                            weights: decode_f64s(&l.weights, l.spec.in_dim * l.spec.out_dim, &what)?,
                            bias: decode_f64s(&l.bias, l.spec.out_dim, &what)?,
                        })
                    })
                    .collect::<Result<Vec<_>, TrainError>>()?;
                let params = ParamSet::from_layers(layers)
                    .map_err(|e| TrainError::Artifact(format!("network `{}`: {e}", n.name)))?;
                Ok(NamedNetwork {
                    name: n.name.clone(),
                    params,
                })
            })
            .collect()
    }

    /// Rebuilds a learner, ready to act or to continue training.
    pub fn learner(&self, seed: u64) -> Result<Box<dyn Learner>, TrainError> {
        let networks = self.decode_networks()?;
        let learner = algorithms::learner_from_networks(self.algorithm, &networks, &self.hyperparams, seed)?;
        if learner.policy().obs_dim() != self.observation.len() {
            return Err(TrainError::Artifact(format!(
                "policy takes {} inputs but the observation has {} features",
                learner.policy().obs_dim(),
                self.observation.len()
            )));
        }
        Ok(learner)
    }

    pub fn policy(&self) -> Result<Policy, TrainError> {
        Ok(self.learner(self.metadata.seed)?.policy())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("artifact serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, TrainError> {
        let doc: serde_json::Value =
            serde_json::from_str(text).map_err(|e| TrainError::Artifact(format!("not an agent file: {e}")))?;
        match doc.get("format_version").and_then(|v| v.as_u64()) {
            Some(v) if v == FORMAT_VERSION as u64 => {}
            Some(v) => {
                return Err(TrainError::Artifact(format!(
                    "unsupported format_version {v} (this build reads {FORMAT_VERSION})"
                )))
            }
            None => return Err(TrainError::Artifact("missing format_version".into())),
        }
        let artifact: AgentArtifact =
            serde_json::from_value(doc).map_err(|e| TrainError::Artifact(format!("malformed agent file: {e}")))?;
        let expected = artifact.compute_digest();
        if artifact.digest != expected {
            return Err(TrainError::Artifact(format!(
                "digest mismatch: file records {} but content hashes to {expected}",
                artifact.digest
            )));
        }
        artifact.decode_networks()?;
        Ok(artifact)
    }

    pub fn save(&self, path: &Path) -> Result<(), TrainError> {
        std::fs::write(path, self.to_json()).map_err(|e| TrainError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self, TrainError> {
        let text = std::fs::read_to_string(path).map_err(|e| TrainError::io(path, e))?;
        Self::from_json(&text)
    }

    /// Fails unless the agent was built for `observation` and `action`.
    pub fn check_compatible(&self, observation: &ObservationSpec, action: &ActionSpec) -> Result<(), TrainError> {
        if self.observation.len() != observation.len() {
            return Err(TrainError::SpecMismatch(format!(
                "agent expects {} features, task provides {}",
                self.observation.len(),
                observation.len()
            )));
        }
        if &self.observation != observation {
            return Err(TrainError::SpecMismatch(format!(
                "agent features {:?} differ from task features {:?}",
                self.observation.names(),
                observation.names()
            )));
        }
        if &self.action != action {
            return Err(TrainError::SpecMismatch(format!(
                "agent acts in {:?}, task expects {:?}",
                self.action.kind, action.kind
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algorithms::build_learner;
    use crate::rng;
    use rand::Rng as _;

    fn artifact(algorithm: Algorithm) -> AgentArtifact {
        let task = Task::Constant;
        let obs = ObservationSpec::for_task(task);
        let hp = Hyperparams {
            hidden: vec![8, 8],
            ..Default::default()
        };
        let learner = build_learner(algorithm, obs.len(), &hp, 3).unwrap();
        AgentArtifact::from_learner(
            learner.as_ref(),
            task,
            obs,
            algorithm.action_spec(),
            hp,
            TrainingMetadata {
                seed: 3,
                best_mean_episode_reward: -1.25,
                epoch: 0,
                config_digest: "abc".into(),
            },
        )
    }

    #[test]
    fn round_trip_reproduces_forward_outputs_bitwise() {
        let mut r = rng::seeded(4);
        for algorithm in Algorithm::ALL {
            let a = artifact(algorithm);
            let back = AgentArtifact::from_json(&a.to_json()).unwrap();
            assert_eq!(back, a);
            let (p, q) = (a.policy().unwrap(), back.policy().unwrap());
            for _ in 0..100 {
                let x: Vec<f64> = (0..6).map(|_| r.random_range(-0.5..1.5)).collect();
                let (ya, yb) = (p.network().predict(&x).unwrap(), q.network().predict(&x).unwrap());
                assert!(ya.iter().zip(&yb).all(|(u, v)| u.to_bits() == v.to_bits()));
            }
        }
    }

    #[test]
    fn corrupted_payload_is_rejected() {
        let a = artifact(Algorithm::Dqn);
        let text = a.to_json();
        let w = &a.networks[0].layers[0].weights;
        let mut bad = w.clone();
        bad.replace_range(0..1, if w.starts_with('A') { "B" } else { "A" });
        let err = AgentArtifact::from_json(&text.replacen(w.as_str(), &bad, 1)).unwrap_err();
        assert!(err.to_string().contains("digest"), "{err}");

        let err = AgentArtifact::from_json(&text.replacen(w.as_str(), "!!!!", 1)).unwrap_err();
        assert!(matches!(err, TrainError::Artifact(_)));
    }

    #[test]
    fn truncated_payload_is_named() {
        let mut a = artifact(Algorithm::Pg);
        let w = a.networks[0].layers[0].weights.clone();
        a.networks[0].layers[0].weights = w[..w.len() - 12].to_string();
        a.digest = a.compute_digest();
        let err = AgentArtifact::from_json(&a.to_json()).unwrap_err();
        assert!(err.to_string().contains("truncated"), "{err}");
    }

    #[test]
    fn unsupported_version_is_rejected() {
        let text = artifact(Algorithm::Td3).to_json().replacen("\"format_version\": 1", "\"format_version\": 2", 1);
        let err = AgentArtifact::from_json(&text).unwrap_err();
        assert!(err.to_string().contains("format_version 2"), "{err}");
    }

    #[test]
    fn dynamic_task_rejects_constant_agent() {
        let a = artifact(Algorithm::Ppo);
        let err = a
            .check_compatible(&ObservationSpec::for_task(Task::Dynamic), &ActionSpec::discrete())
            .unwrap_err();
        assert!(err.to_string().contains("7"), "{err}");
    }
}
