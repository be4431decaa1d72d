//! Repeated train/test trials on synthetic draws or random halves of a file.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::boosting::{train_round_robin, TrainConfig};
use crate::data::{generate_linear, generate_xor, r2_score, Dataset};
use crate::error::{Error, Result};
use crate::rng::RandomStream;
use crate::tuning::{train_bagged, tune_and_train, TuneOptions};

pub const DEFAULT_TEST_SIZE: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SyntheticModel {
    Linear,
    Xor,
}

impl SyntheticModel {
    pub fn generate(self, n: usize, p: usize, rng: &mut RandomStream) -> Result<Dataset> {
        match self {
            Self::Linear => generate_linear(n, p, rng),
            Self::Xor => generate_xor(n, p, rng),
        }
    }

    /// The noiseless regression function `E[Y | X = x]`.
    pub fn signal(self, x: &[f64]) -> f64 {
        match self {
            Self::Linear => x.iter().take(10).sum(),
            Self::Xor => 2.0 * x[0] * x[1] + 0.5 * x[2],
        }
    }
}

impl FromStr for SyntheticModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(Self::Linear),
            "xor" => Ok(Self::Xor),
            _ => Err(Error::InvalidConfig(format!("unknown model id `{s}`, expected linear or xor"))),
        }
    }
}

#[derive(Clone, Debug)]
pub enum BenchSource {
    Synthetic {
        model: SyntheticModel,
        n: usize,
        p: usize,
        test_size: usize,
        /// Score against the regression function instead of noisy responses.
        noiseless_test: bool,
    },
    /// Each trial splits the file into random halves.
    File(Dataset),
}

#[derive(Clone, Debug)]
pub enum BenchModel {
    Tuned { trials: usize, options: TuneOptions },
    Fixed {
        config: TrainConfig,
        rounds: usize,
        bags: usize,
        fine_tune: usize,
    },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrialResult {
    /// Bagged model R² on the test side.
    pub r2: f64,
    /// R² of the boosted model the bags were cloned from.
    pub single_r2: f64,
    pub seconds: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Summary {
    pub max: f64,
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub min: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Some(Self {
            max: values.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            mean,
            std: var.sqrt(),
            min: values.iter().cloned().fold(f64::INFINITY, f64::min),
        })
    }
}

/// `max, mean (std), min` with three decimals.
impl fmt::Display for Summary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.3}, {:.3} ({:.3}), {:.3}", self.max, self.mean, self.std, self.min)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchResult {
    pub trials: Vec<TrialResult>,
}

impl BenchResult {
    pub fn r2(&self) -> Vec<f64> {
        self.trials.iter().map(|t| t.r2).collect()
    }

    pub fn single_r2(&self) -> Vec<f64> {
        self.trials.iter().map(|t| t.single_r2).collect()
    }

    pub fn summary(&self) -> Summary {
        Summary::of(&self.r2()).expect("benchmarks hold at least one trial")
    }

    pub fn single_summary(&self) -> Summary {
        Summary::of(&self.single_r2()).expect("benchmarks hold at least one trial")
    }
}

fn draw_split(source: &BenchSource, rng: &mut RandomStream) -> Result<(Dataset, Dataset)> {
    match source {
        BenchSource::Synthetic { model, n, p, test_size, noiseless_test } => {
            let train = model.generate(*n, *p, rng)?;
            let mut test = model.generate(*test_size, *p, rng)?;
            if *noiseless_test {
                test.y = test.x.rows().into_iter().map(|r| model.signal(r.as_slice().unwrap())).collect();
            }
            Ok((train, test))
        }
        BenchSource::File(data) => {
            if data.n() < 4 {
                return Err(Error::InvalidData(format!("{} rows is too few to halve", data.n())));
            }
            let mut idx: Vec<usize> = (0..data.n()).collect();
            idx.shuffle(rng);
            let half = data.n() / 2;
            let (mut a, mut b) = (idx[..half].to_vec(), idx[half..].to_vec());
            a.sort_unstable();
            b.sort_unstable();
            Ok((data.select(&a), data.select(&b)))
        }
    }
}

fn run_trial(source: &BenchSource, model: &BenchModel, rng: &mut RandomStream) -> Result<TrialResult> {
    let start = Instant::now();
    let (train, test) = draw_split(source, rng)?;
    let (base, bagged) = match model {
        BenchModel::Tuned { trials, options } => {
            let out = tune_and_train(&train, *trials, options, rng)?;
            (out.base, Some(out.model))
        }
        BenchModel::Fixed { config, rounds, bags, fine_tune } => {
            if *bags == 0 {
                let base = train_round_robin(
                    train.x.view(),
                    &train.y,
                    config,
                    *rounds,
                    None,
                    rng,
                )?;
                (base, None)
            } else {
                let (base, bagged) = train_bagged(&train, config, *rounds, *bags, *fine_tune, rng)?;
                (base, Some(bagged))
            }
        }
    };
    let single_r2 = r2_score(&test.y, &base.predict_batch(test.x.view())?)?;
    let r2 = match bagged {
        Some(b) => r2_score(&test.y, &b.predict_batch(test.x.view())?)?,
        None => single_r2,
    };
    Ok(TrialResult {
        r2,
        single_r2,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Trial `t` draws from `RandomStream::branch(seed, t)`; trials run in parallel.
pub fn run_benchmark(
    source: &BenchSource,
    trials: usize,
    model: &BenchModel,
    seed: u64,
) -> Result<BenchResult> {
    if trials == 0 {
        return Err(Error::InvalidConfig("need at least one benchmark trial".into()));
    }
    let trials = (0..trials)
        .into_par_iter()
        .map(|t| run_trial(source, model, &mut RandomStream::branch(seed, t as u64)))
        .collect::<Result<Vec<_>>>()?;
    Ok(BenchResult { trials })
}
