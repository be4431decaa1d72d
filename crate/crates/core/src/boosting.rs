//! Boosted indicator networks trained round-robin on residuals.
//!
//! Stage `s` fits the residual `m_{s-1}` (with `m_0 = y`) by a network and its
//! cell means, and passes on `m_s = m_{s-1} - gamma * F_s`. The model predicts
//! `gamma * sum_s F_s(x)`. One training round updates every stage once, in
//! order, each stage warm-started from the previous round.

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::eeo::{update_round, StepConfig};
use crate::error::{Error, Result};
use crate::network::{Architecture, IndicatorNetwork};
use crate::partition::{fit_cell_means, CellMeans};
use crate::rng::RandomStream;

/// Everything needed to train a boosted model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Hidden and output widths; the last entry must be 1.
    pub widths: Vec<usize>,
    pub w0: usize,
    /// Number of boosting stages `M`.
    pub n_stages: usize,
    pub gamma: f64,
    pub k: usize,
    pub stochastic_ratio: f64,
    pub stabilizer: f64,
    pub seed: u64,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_stages == 0 {
            return Err(Error::InvalidConfig("M must be >= 1".into()));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "gamma must lie in (0, 1], got {}",
                self.gamma
            )));
        }
        self.step_config().validate()?;
        // Width checks need an input dimension; any positive one will do here.
        Architecture::new(self.widths.clone(), 1, self.w0)?;
        Ok(())
    }

    pub fn step_config(&self) -> StepConfig {
        StepConfig {
            k: self.k,
            stochastic_ratio: self.stochastic_ratio,
            stabilizer: self.stabilizer,
        }
    }

    pub fn architecture(&self, input_dim: usize) -> Result<Architecture> {
        Architecture::new(self.widths.clone(), input_dim, self.w0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoostStage {
    pub network: IndicatorNetwork,
    pub cell_means: CellMeans,
}

impl BoostStage {
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        Ok(self.cell_means.predict(self.network.predict_bit(x)?))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub n: usize,
    pub p: usize,
    pub seed: u64,
    pub rounds: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoostedModel {
    stages: Vec<BoostStage>,
    gamma: f64,
    pub meta: TrainingMeta,
}

impl BoostedModel {
    pub fn new(stages: Vec<BoostStage>, gamma: f64, meta: TrainingMeta) -> Result<Self> {
        if stages.is_empty() {
            return Err(Error::InvalidConfig("a boosted model needs at least one stage".into()));
        }
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(Error::InvalidConfig(format!("gamma must lie in (0, 1], got {gamma}")));
        }
        let arch = stages[0].network.architecture();
        if stages.iter().any(|s| s.network.architecture() != arch) {
            return Err(Error::InvalidConfig("stages disagree on architecture".into()));
        }
        Ok(Self { stages, gamma, meta })
    }

    pub fn stages(&self) -> &[BoostStage] {
        &self.stages
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn n_stages(&self) -> usize {
        self.stages.len()
    }

    pub fn architecture(&self) -> &Architecture {
        self.stages[0].network.architecture()
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        let mut sum = 0.0;
        for stage in &self.stages {
            sum += stage.predict(x)?;
        }
        Ok(self.gamma * sum)
    }

    pub fn predict_batch(&self, x: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
        let mut sums = vec![0.0; x.nrows()];
        for stage in &self.stages {
            let labels = stage.network.forward_batch(x)?;
            for (s, &l) in sums.iter_mut().zip(&labels) {
                *s += stage.cell_means.predict(l);
            }
        }
        Ok(sums.into_iter().map(|s| self.gamma * s).collect())
    }
}

pub fn predict_boosted(model: &BoostedModel, x: &[f64]) -> Result<f64> {
    model.predict(x)
}

/// Residuals `m_upto` on `(x, y)` from the stored stages.
pub fn compute_residuals(
    model: &BoostedModel,
    x: ArrayView2<'_, f64>,
    y: &[f64],
    upto: usize,
) -> Result<Vec<f64>> {
    if upto > model.n_stages() {
        return Err(Error::InvalidInput(format!(
            "stage {upto} out of range 0..={}",
            model.n_stages()
        )));
    }
    if y.len() != x.nrows() {
        return Err(Error::InvalidInput(format!(
            "{} targets for {} rows",
            y.len(),
            x.nrows()
        )));
    }
    let mut m = y.to_vec();
    for stage in &model.stages[..upto] {
        subtract_stage(&mut m, stage, x, model.gamma)?;
    }
    Ok(m)
}

fn subtract_stage(m: &mut [f64], stage: &BoostStage, x: ArrayView2<'_, f64>, gamma: f64) -> Result<()> {
    let labels = stage.network.forward_batch(x)?;
    for (r, &l) in m.iter_mut().zip(&labels) {
        *r -= gamma * stage.cell_means.predict(l);
    }
    Ok(())
}

/// `M` zero-initialized stages with cell means fit along the residual chain.
pub fn zero_model(cfg: &TrainConfig, x: ArrayView2<'_, f64>, y: &[f64]) -> Result<BoostedModel> {
    cfg.validate()?;
    let arch = cfg.architecture(x.ncols())?;
    let mut residual = y.to_vec();
    let mut stages = Vec::with_capacity(cfg.n_stages);
    for _ in 0..cfg.n_stages {
        let network = IndicatorNetwork::zeros(arch.clone());
        let labels = network.forward_batch(x)?;
        let cell_means = fit_cell_means(&labels, &residual)?;
        let stage = BoostStage { network, cell_means };
        subtract_stage(&mut residual, &stage, x, cfg.gamma)?;
        stages.push(stage);
    }
    BoostedModel::new(
        stages,
        cfg.gamma,
        TrainingMeta {
            n: x.nrows(),
            p: x.ncols(),
            seed: cfg.seed,
            rounds: 0,
        },
    )
}

/// Round-robin training from `warm` (or the zero model) for `rounds` rounds.
pub fn train_round_robin(
    x: ArrayView2<'_, f64>,
    y: &[f64],
    cfg: &TrainConfig,
    rounds: usize,
    warm: Option<BoostedModel>,
    rng: &mut RandomStream,
) -> Result<BoostedModel> {
    train_round_robin_traced(x, y, cfg, rounds, warm, rng, |_, _| {})
}

/// As [`train_round_robin`], calling `on_round(round, sse)` after every round
/// with the full-sample `sum_i m_M(X_i)^2`.
pub fn train_round_robin_traced(
    x: ArrayView2<'_, f64>,
    y: &[f64],
    cfg: &TrainConfig,
    rounds: usize,
    warm: Option<BoostedModel>,
    rng: &mut RandomStream,
    mut on_round: impl FnMut(usize, f64),
) -> Result<BoostedModel> {
    cfg.validate()?;
    if x.nrows() == 0 {
        return Err(Error::InvalidData("empty training sample".into()));
    }
    if y.len() != x.nrows() {
        return Err(Error::InvalidData(format!(
            "{} targets for {} rows",
            y.len(),
            x.nrows()
        )));
    }
    let mut model = match warm {
        Some(m) => {
            check_warm(&m, cfg, x.ncols())?;
            m
        }
        None => zero_model(cfg, x, y)?,
    };
    let step = cfg.step_config();
    for round in 0..rounds {
        let mut residual = y.to_vec();
        for stage in model.stages.iter_mut() {
            update_round(&mut stage.network, &residual, x, &step, rng)?;
            let labels = stage.network.forward_batch(x)?;
            stage.cell_means = fit_cell_means(&labels, &residual)?;
            for (r, &l) in residual.iter_mut().zip(&labels) {
                *r -= model.gamma * stage.cell_means.predict(l);
            }
        }
        model.meta.rounds += 1;
        on_round(round, residual.iter().map(|r| r * r).sum());
    }
    Ok(model)
}

fn check_warm(model: &BoostedModel, cfg: &TrainConfig, input_dim: usize) -> Result<()> {
    let arch = cfg.architecture(input_dim)?;
    if model.architecture() != &arch {
        return Err(Error::InvalidConfig(
            "warm model architecture differs from the config".into(),
        ));
    }
    if model.n_stages() != cfg.n_stages {
        return Err(Error::InvalidConfig(format!(
            "warm model has {} stages, config asks for {}",
            model.n_stages(),
            cfg.n_stages
        )));
    }
    if model.gamma != cfg.gamma {
        return Err(Error::InvalidConfig("warm model gamma differs from the config".into()));
    }
    Ok(())
}
