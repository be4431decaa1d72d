//! Random-search tuning over the hyperparameter space, then a bagged retrain.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bagging::{fit_bagged, BaggedModel};
use crate::boosting::{train_round_robin, BoostedModel, TrainConfig};
use crate::data::{r2_score, Dataset};
use crate::error::{Error, Result};
use crate::rng::RandomStream;

pub const K: usize = 10;
pub const W0: usize = 2;
pub const M_RANGE: (usize, usize) = (3, 50);
pub const GAMMA_RANGE: (f64, f64) = (0.05, 0.9);
pub const RATIO_RANGE: (f64, f64) = (0.8, 1.0);
pub const STABILIZERS: [f64; 4] = [0.5, 0.1, 0.01, 0.0];
pub const MIN_TUNING_ROWS: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ArchitectureId {
    A,
    B,
    C,
    D,
    E,
    F,
}

impl ArchitectureId {
    pub const ALL: [ArchitectureId; 6] = [Self::A, Self::B, Self::C, Self::D, Self::E, Self::F];

    pub fn widths(self) -> &'static [usize] {
        match self {
            Self::A => &[4, 1],
            Self::B => &[8, 4, 1],
            Self::C => &[16, 8, 4, 1],
            Self::D => &[4, 4, 1],
            Self::E => &[4, 4, 4, 1],
            Self::F => &[4, 4, 4, 4, 1],
        }
    }
}

impl fmt::Display for ArchitectureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl FromStr for ArchitectureId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|a| a.to_string().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidConfig(format!("unknown architecture `{s}`, expected A-F")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HyperConfig {
    pub m: usize,
    pub gamma: f64,
    pub stochastic_ratio: f64,
    pub architecture: ArchitectureId,
    pub stabilizer: f64,
}

impl HyperConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = (M_RANGE.0..=M_RANGE.1).contains(&self.m)
            && (GAMMA_RANGE.0..=GAMMA_RANGE.1).contains(&self.gamma)
            && (RATIO_RANGE.0..=RATIO_RANGE.1).contains(&self.stochastic_ratio)
            && STABILIZERS.contains(&self.stabilizer);
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("{self:?} outside the tuning space")))
        }
    }

    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            widths: self.architecture.widths().to_vec(),
            w0: W0,
            n_stages: self.m,
            gamma: self.gamma,
            k: K,
            stochastic_ratio: self.stochastic_ratio,
            stabilizer: self.stabilizer,
            seed,
        }
    }
}

pub fn sample_hyperconfig(rng: &mut RandomStream) -> HyperConfig {
    HyperConfig {
        m: rng.random_range(M_RANGE.0..=M_RANGE.1),
        gamma: rng.random_range(GAMMA_RANGE.0..=GAMMA_RANGE.1),
        stochastic_ratio: rng.random_range(RATIO_RANGE.0..=RATIO_RANGE.1),
        architecture: ArchitectureId::ALL[rng.random_range(0..ArchitectureId::ALL.len())],
        stabilizer: STABILIZERS[rng.random_range(0..STABILIZERS.len())],
    }
}

/// Rounds and bag counts for the validation and final phases.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schedule {
    pub val_rounds: usize,
    pub val_bags: usize,
    pub val_fine_tune: usize,
    pub final_rounds: usize,
    pub final_bags: usize,
    pub final_fine_tune: usize,
}

impl Default for Schedule {
    fn default() -> Self {
        Self {
            val_rounds: 20,
            val_bags: 10,
            val_fine_tune: 1,
            final_rounds: 120,
            final_bags: 20,
            final_fine_tune: 10,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct TuneOptions {
    pub schedule: Schedule,
    /// Draw a fresh 80/20 split for every trial instead of one shared split.
    pub resplit_per_trial: bool,
}

/// Trains a base model plus bags on `(x, y)` and returns both.
pub fn train_bagged(
    data: &Dataset,
    cfg: &TrainConfig,
    rounds: usize,
    bags: usize,
    fine_tune: usize,
    rng: &mut RandomStream,
) -> Result<(BoostedModel, BaggedModel)> {
    let base = train_round_robin(data.x.view(), &data.y, cfg, rounds, None, rng)?;
    let bag_seed = rng.next_seed();
    let bagged = fit_bagged(&base, data.x.view(), &data.y, cfg, bags, fine_tune, bag_seed)?;
    Ok((base, bagged))
}

/// Validation R² of the bagged model, or `None` when the validation targets
/// have no variance (or fewer than two rows) and R² is undefined.
pub fn evaluate_config(
    cfg: &HyperConfig,
    train: &Dataset,
    val: &Dataset,
    schedule: &Schedule,
    rng: &mut RandomStream,
) -> Result<Option<f64>> {
    if train.n() == 0 || val.n() == 0 {
        return Err(Error::InvalidData("empty train or validation split".into()));
    }
    let tc = cfg.train_config(rng.next_seed());
    let (_, bagged) = train_bagged(
        train,
        &tc,
        schedule.val_rounds,
        schedule.val_bags,
        schedule.val_fine_tune,
        rng,
    )?;
    let pred = bagged.predict_batch(val.x.view())?;
    match r2_score(&val.y, &pred) {
        Ok(r2) => Ok(Some(r2)),
        Err(Error::UndefinedMetric(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrialRecord {
    pub trial: usize,
    pub config: HyperConfig,
    pub val_r2: Option<f64>,
    pub seconds: f64,
}

pub const TRIAL_LOG_HEADER: &str = "trial,M,gamma,stochastic_ratio,architecture,stabilizer,val_r2,seconds";

impl TrialRecord {
    pub fn log_line(&self) -> String {
        let c = &self.config;
        let r2 = self.val_r2.map_or_else(|| "-inf".to_owned(), |v| v.to_string());
        format!(
            "{},{},{},{},{},{},{},{:.6}",
            self.trial, c.m, c.gamma, c.stochastic_ratio, c.architecture, c.stabilizer, r2, self.seconds
        )
    }
}

/// Highest validation score, first achiever on ties; invalid scores never win
/// unless every trial is invalid, in which case the first trial is used.
pub fn select_best(trials: &[TrialRecord]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, t) in trials.iter().enumerate() {
        if let Some(v) = t.val_r2 {
            if best.is_none_or(|(_, b)| v > b) {
                best = Some((i, v));
            }
        }
    }
    best.map(|(i, _)| i).or(if trials.is_empty() { None } else { Some(0) })
}

#[derive(Clone, Debug)]
pub struct TuneOutcome {
    pub best: HyperConfig,
    pub best_trial: usize,
    pub trials: Vec<TrialRecord>,
    /// Final boosted model before bagging.
    pub base: BoostedModel,
    pub model: BaggedModel,
}

fn split_rows(n: usize, rng: &mut RandomStream) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    let n_train = (n * 4).div_ceil(5);
    let mut train = idx[..n_train].to_vec();
    let mut val = idx[n_train..].to_vec();
    train.sort_unstable();
    val.sort_unstable();
    (train, val)
}

/// Runs `r` random-search trials, then retrains the winner on all of `data`.
pub fn tune_and_train(
    data: &Dataset,
    r: usize,
    opts: &TuneOptions,
    rng: &mut RandomStream,
) -> Result<TuneOutcome> {
    if r == 0 {
        return Err(Error::InvalidConfig("need at least one tuning trial".into()));
    }
    if data.n() < MIN_TUNING_ROWS {
        return Err(Error::InvalidData(format!(
            "{} rows is too few to split for tuning (need {MIN_TUNING_ROWS})",
            data.n()
        )));
    }
    let seed = rng.next_seed();
    let shared = split_rows(data.n(), rng);
    let trials = (0..r)
        .into_par_iter()
        .map(|t| {
            let start = Instant::now();
            let mut trial_rng = RandomStream::branch(seed, t as u64);
            let config = sample_hyperconfig(&mut trial_rng);
            let (train_rows, val_rows) = if opts.resplit_per_trial {
                split_rows(data.n(), &mut trial_rng)
            } else {
                shared.clone()
            };
            let val_r2 = evaluate_config(
                &config,
                &data.select(&train_rows),
                &data.select(&val_rows),
                &opts.schedule,
                &mut trial_rng,
            )?;
            Ok(TrialRecord {
                trial: t,
                config,
                val_r2,
                seconds: start.elapsed().as_secs_f64(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let best_trial = select_best(&trials).expect("at least one trial");
    let best = trials[best_trial].config;
    let s = &opts.schedule;
    let tc = best.train_config(rng.next_seed());
    let (base, model) = train_bagged(data, &tc, s.final_rounds, s.final_bags, s.final_fine_tune, rng)?;
    Ok(TuneOutcome {
        best,
        best_trial,
        trials,
        base,
        model,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::generate_xor;

    #[test]
    fn catalogue() {
        let widths: Vec<&[usize]> = ArchitectureId::ALL.iter().map(|a| a.widths()).collect();
        assert_eq!(
            widths,
            [&[4, 1][..], &[8, 4, 1], &[16, 8, 4, 1], &[4, 4, 1], &[4, 4, 4, 1], &[4, 4, 4, 4, 1]]
        );
        assert_eq!("e".parse::<ArchitectureId>().unwrap(), ArchitectureId::E);
        assert!("G".parse::<ArchitectureId>().is_err());
    }

    #[test]
    fn sampler_marginals() {
        let mut rng = RandomStream::new(11);
        let draws: Vec<HyperConfig> = (0..10_000).map(|_| sample_hyperconfig(&mut rng)).collect();
        let mean_m = draws.iter().map(|c| c.m as f64).sum::<f64>() / draws.len() as f64;
        assert!((mean_m - 26.5).abs() < 0.5, "{mean_m}");
        for a in ArchitectureId::ALL {
            let f = draws.iter().filter(|c| c.architecture == a).count() as f64 / 1e4;
            assert!((f - 1.0 / 6.0).abs() < 0.02, "{a}: {f}");
        }
        for c in &draws {
            c.validate().unwrap();
            assert!(STABILIZERS.contains(&c.stabilizer));
        }
        assert!(draws.iter().any(|c| c.m == 3) && draws.iter().any(|c| c.m == 50));
    }

    #[test]
    fn default_schedule() {
        let s = Schedule::default();
        assert_eq!((s.val_rounds, s.val_bags, s.val_fine_tune), (20, 10, 1));
        assert_eq!((s.final_rounds, s.final_bags, s.final_fine_tune), (120, 20, 10));
    }

    #[test]
    fn selection_rules() {
        let rec = |trial, v| TrialRecord {
            trial,
            config: sample_hyperconfig(&mut RandomStream::new(0)),
            val_r2: v,
            seconds: 0.0,
        };
        let t = [rec(0, Some(0.2)), rec(1, None), rec(2, Some(0.5)), rec(3, Some(0.5))];
        assert_eq!(select_best(&t), Some(2));
        assert_eq!(select_best(&[rec(0, None), rec(1, None)]), Some(0));
        assert_eq!(select_best(&[]), None);
    }

    fn small_opts() -> TuneOptions {
        TuneOptions {
            schedule: Schedule {
                val_rounds: 2,
                val_bags: 2,
                val_fine_tune: 1,
                final_rounds: 2,
                final_bags: 2,
                final_fine_tune: 1,
            },
            resplit_per_trial: false,
        }
    }

    #[test]
    fn single_trial_is_selected() {
        let data = generate_xor(60, 3, &mut RandomStream::new(1)).unwrap();
        let out = tune_and_train(&data, 1, &small_opts(), &mut RandomStream::new(2)).unwrap();
        assert_eq!(out.trials.len(), 1);
        assert_eq!(out.best_trial, 0);
        assert_eq!(out.best, out.trials[0].config);
        assert_eq!(out.model.members().len(), 2);
        assert_eq!(out.base.n_stages(), out.best.m);
    }

    #[test]
    fn tuning_is_reproducible() {
        let data = generate_xor(60, 3, &mut RandomStream::new(1)).unwrap();
        for resplit in [false, true] {
            let opts = TuneOptions { resplit_per_trial: resplit, ..small_opts() };
            let a = tune_and_train(&data, 3, &opts, &mut RandomStream::new(5)).unwrap();
            let b = tune_and_train(&data, 3, &opts, &mut RandomStream::new(5)).unwrap();
            assert_eq!(a.best_trial, b.best_trial);
            assert_eq!(a.model, b.model);
            let strip = |t: &[TrialRecord]| t.iter().map(|r| (r.config, r.val_r2)).collect::<Vec<_>>();
            assert_eq!(strip(&a.trials), strip(&b.trials));
        }
    }

    #[test]
    fn too_small_to_split() {
        let data = generate_xor(4, 3, &mut RandomStream::new(1)).unwrap();
        assert!(matches!(
            tune_and_train(&data, 1, &small_opts(), &mut RandomStream::new(0)),
            Err(Error::InvalidData(_))
        ));
    }

    #[test]
    fn log_line_format() {
        let r = TrialRecord {
            trial: 3,
            config: HyperConfig {
                m: 7,
                gamma: 0.25,
                stochastic_ratio: 0.9,
                architecture: ArchitectureId::C,
                stabilizer: 0.01,
            },
            val_r2: None,
            seconds: 1.5,
        };
        assert_eq!(r.log_line(), "3,7,0.25,0.9,C,0.01,-inf,1.500000");
    }
}
