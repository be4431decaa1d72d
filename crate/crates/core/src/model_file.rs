//! Versioned JSON model files.
//!
//! Reals are written as shortest round-trip decimals and parsed exactly, so
//! `save -> load -> save` is byte-identical. Loading rebuilds every neuron,
//! network and model through the validating constructors.

use std::path::Path;

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::bagging::BaggedModel;
use crate::boosting::{BoostStage, BoostedModel, TrainingMeta};
use crate::error::{Error, Result};
use crate::network::{Architecture, IndicatorNetwork, Neuron};
use crate::partition::CellMeans;

pub const FORMAT: &str = "neuro01-model";
pub const VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Boosted,
    Bagged,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchitectureRecord {
    pub widths: Vec<usize>,
    pub input_dim: usize,
    pub w0: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NeuronRecord {
    pub support: Vec<usize>,
    pub weights: Vec<f64>,
    pub bias: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageRecord {
    pub layers: Vec<Vec<NeuronRecord>>,
    pub cell_means: CellMeans,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MemberRecord {
    pub stages: Vec<StageRecord>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileMeta {
    pub seed: u64,
    pub rounds: usize,
    pub n: usize,
    pub fingerprint: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub format: String,
    pub version: u32,
    pub kind: ModelKind,
    pub architecture: ArchitectureRecord,
    pub gamma: f64,
    pub n_stages: usize,
    pub feature_names: Vec<String>,
    pub target_name: String,
    pub meta: FileMeta,
    pub members: Vec<MemberRecord>,
}

/// A model loaded from a file, ready to predict.
#[derive(Clone, Debug, PartialEq)]
pub enum Model {
    Boosted(BoostedModel),
    Bagged(BaggedModel),
}

impl Model {
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        match self {
            Self::Boosted(m) => m.predict(x),
            Self::Bagged(m) => m.predict(x),
        }
    }

    pub fn predict_batch(&self, x: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
        match self {
            Self::Boosted(m) => m.predict_batch(x),
            Self::Bagged(m) => m.predict_batch(x),
        }
    }

    fn members(&self) -> &[BoostedModel] {
        match self {
            Self::Boosted(m) => std::slice::from_ref(m),
            Self::Bagged(m) => m.members(),
        }
    }
}

fn member_record(m: &BoostedModel) -> MemberRecord {
    MemberRecord {
        stages: m
            .stages()
            .iter()
            .map(|s| StageRecord {
                layers: s
                    .network
                    .layers()
                    .iter()
                    .map(|layer| {
                        layer
                            .iter()
                            .map(|n| NeuronRecord {
                                support: n.support().to_vec(),
                                weights: n.weights().to_vec(),
                                bias: n.bias(),
                            })
                            .collect()
                    })
                    .collect(),
                cell_means: s.cell_means,
            })
            .collect(),
    }
}

fn corrupt(e: impl std::fmt::Display) -> Error {
    Error::CorruptModel(e.to_string())
}

impl ModelFile {
    pub fn new(
        model: &Model,
        feature_names: Vec<String>,
        target_name: String,
        fingerprint: String,
    ) -> Result<Self> {
        let first = &model.members()[0];
        let arch = first.architecture();
        if feature_names.len() != arch.input_dim() {
            return Err(Error::InvalidInput(format!(
                "{} feature names for a model over {} inputs",
                feature_names.len(),
                arch.input_dim()
            )));
        }
        let file = Self {
            format: FORMAT.into(),
            version: VERSION,
            kind: match model {
                Model::Boosted(_) => ModelKind::Boosted,
                Model::Bagged(_) => ModelKind::Bagged,
            },
            architecture: ArchitectureRecord {
                widths: arch.widths().to_vec(),
                input_dim: arch.input_dim(),
                w0: arch.w0(),
            },
            gamma: first.gamma(),
            n_stages: first.n_stages(),
            feature_names,
            target_name,
            meta: FileMeta {
                seed: first.meta.seed,
                rounds: first.meta.rounds,
                n: first.meta.n,
                fingerprint,
            },
            members: model.members().iter().map(member_record).collect(),
        };
        Ok(file)
    }

    /// Rebuilds the model, re-checking every invariant.
    pub fn to_model(&self) -> Result<Model> {
        if self.format != FORMAT {
            return Err(corrupt(format!("format `{}` is not {FORMAT}", self.format)));
        }
        if self.version != VERSION {
            return Err(corrupt(format!("unsupported version {}", self.version)));
        }
        let a = &self.architecture;
        let arch = Architecture::new(a.widths.clone(), a.input_dim, a.w0).map_err(corrupt)?;
        if self.feature_names.len() != arch.input_dim() {
            return Err(corrupt("feature name count differs from input dimension"));
        }
        if self.members.is_empty() {
            return Err(corrupt("no members"));
        }
        if self.kind == ModelKind::Boosted && self.members.len() != 1 {
            return Err(corrupt("a boosted model has exactly one member"));
        }
        let meta = TrainingMeta {
            n: self.meta.n,
            p: arch.input_dim(),
            seed: self.meta.seed,
            rounds: self.meta.rounds,
        };
        let mut members = Vec::with_capacity(self.members.len());
        for member in &self.members {
            if member.stages.len() != self.n_stages {
                return Err(corrupt(format!(
                    "member has {} stages, header says {}",
                    member.stages.len(),
                    self.n_stages
                )));
            }
            let mut stages = Vec::with_capacity(member.stages.len());
            for s in &member.stages {
                let layers = s
                    .layers
                    .iter()
                    .map(|layer| {
                        layer
                            .iter()
                            .map(|n| Neuron::new(n.support.clone(), n.weights.clone(), n.bias))
                            .collect::<Result<Vec<_>>>()
                    })
                    .collect::<Result<Vec<_>>>()
                    .map_err(corrupt)?;
                let network = IndicatorNetwork::from_layers(arch.clone(), layers).map_err(corrupt)?;
                let cm = s.cell_means;
                if ![cm.mean0, cm.mean1, cm.fallback].iter().all(|v| v.is_finite()) {
                    return Err(corrupt("non-finite cell mean"));
                }
                stages.push(BoostStage { network, cell_means: cm });
            }
            members.push(BoostedModel::new(stages, self.gamma, meta.clone()).map_err(corrupt)?);
        }
        Ok(match self.kind {
            ModelKind::Boosted => Model::Boosted(members.pop().expect("one member")),
            ModelKind::Bagged => Model::Bagged(BaggedModel::new(members).map_err(corrupt)?),
        })
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let file: Self = serde_json::from_str(s).map_err(corrupt)?;
        file.to_model()?;
        Ok(file)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
