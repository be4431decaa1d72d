//! Boosted networks of sparse indicator neurons, trained by exploit-explore
//! optimizing over random candidate neurons.

pub mod bagging;
pub mod bench;
pub mod boosting;
pub mod data;
pub mod eeo;
pub mod error;
pub mod fixture;
pub mod model_file;
pub mod network;
pub mod oracle;
pub mod partition;
pub mod rng;
pub mod tuning;
pub mod verify;

pub use bagging::{fit_bagged, predict_bagged, BaggedModel};
pub use boosting::{
    compute_residuals, predict_boosted, train_round_robin, train_round_robin_traced, zero_model,
    BoostStage, BoostedModel, TrainConfig, TrainingMeta,
};
pub use bench::{run_benchmark, BenchModel, BenchResult, BenchSource, Summary, SyntheticModel};
pub use data::{generate_linear, generate_xor, load_csv, r2_score, Dataset};
pub use eeo::{update_neuron, update_neuron_idle, update_round, StepConfig};
pub use error::{Error, Result};
pub use model_file::{Model, ModelFile, ModelKind};
pub use network::{Architecture, IndicatorNetwork, Neuron, NeuronPos};
pub use oracle::{close_under_depth, enumerate_layer1, oracle_min_sse, LabelingSet};
pub use partition::{fit_cell_means, fitted_sse, partition_score, CellMeans};
pub use rng::RandomStream;
pub use tuning::{
    evaluate_config, sample_hyperconfig, tune_and_train, ArchitectureId, HyperConfig, Schedule,
    TrialRecord, TuneOptions, TuneOutcome,
};
