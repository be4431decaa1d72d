//! Bootstrap aggregation over fine-tuned clones of one boosted model.

use ndarray::{ArrayView2, Axis};
use rand::Rng;
use rayon::prelude::*;

use crate::boosting::{train_round_robin, BoostedModel, TrainConfig};
use crate::error::{Error, Result};
use crate::rng::RandomStream;

pub const DEFAULT_BAGS: usize = 20;
pub const DEFAULT_FINE_TUNE_ROUNDS: usize = 10;

#[derive(Clone, Debug, PartialEq)]
pub struct BaggedModel {
    members: Vec<BoostedModel>,
}

impl BaggedModel {
    pub fn new(members: Vec<BoostedModel>) -> Result<Self> {
        let Some(first) = members.first() else {
            return Err(Error::InvalidConfig("a bagged model needs at least one member".into()));
        };
        let same = members.iter().all(|m| {
            m.n_stages() == first.n_stages()
                && m.gamma() == first.gamma()
                && m.architecture() == first.architecture()
        });
        if !same {
            return Err(Error::InvalidConfig("bag members differ in structure".into()));
        }
        Ok(Self { members })
    }

    pub fn members(&self) -> &[BoostedModel] {
        &self.members
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        let mut sum = 0.0;
        for m in &self.members {
            sum += m.predict(x)?;
        }
        Ok(sum / self.members.len() as f64)
    }

    pub fn predict_batch(&self, x: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
        let mut sums = vec![0.0; x.nrows()];
        for m in &self.members {
            for (s, p) in sums.iter_mut().zip(m.predict_batch(x)?) {
                *s += p;
            }
        }
        let n = self.members.len() as f64;
        Ok(sums.into_iter().map(|s| s / n).collect())
    }
}

pub fn predict_bagged(model: &BaggedModel, x: &[f64]) -> Result<f64> {
    model.predict(x)
}

/// Fine-tunes `n_bags` clones of `base` on bootstrap resamples of `(x, y)`.
///
/// Bag `r` draws its resample and trains from `RandomStream::branch(seed, r)`,
/// so bags run in parallel and reproduce exactly.
pub fn fit_bagged(
    base: &BoostedModel,
    x: ArrayView2<'_, f64>,
    y: &[f64],
    cfg: &TrainConfig,
    n_bags: usize,
    fine_tune_rounds: usize,
    seed: u64,
) -> Result<BaggedModel> {
    if n_bags == 0 {
        return Err(Error::InvalidConfig("n_bags must be >= 1".into()));
    }
    if y.len() != x.nrows() || y.is_empty() {
        return Err(Error::InvalidData(format!(
            "{} targets for {} rows",
            y.len(),
            x.nrows()
        )));
    }
    if base.architecture().input_dim() != x.ncols() {
        return Err(Error::InvalidData(format!(
            "model expects {} features, data has {}",
            base.architecture().input_dim(),
            x.ncols()
        )));
    }
    let n = y.len();
    let members = (0..n_bags)
        .into_par_iter()
        .map(|r| {
            let mut rng = RandomStream::branch(seed, r as u64);
            let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            let xb = x.select(Axis(0), &idx);
            let yb: Vec<f64> = idx.iter().map(|&i| y[i]).collect();
            train_round_robin(xb.view(), &yb, cfg, fine_tune_rounds, Some(base.clone()), &mut rng)
        })
        .collect::<Result<Vec<_>>>()?;
    BaggedModel::new(members)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boosting::{BoostStage, TrainingMeta};
    use crate::network::{Architecture, IndicatorNetwork};
    use crate::partition::CellMeans;
    use ndarray::Array2;

    fn config() -> TrainConfig {
        TrainConfig {
            widths: vec![4, 4, 1],
            w0: 2,
            n_stages: 3,
            gamma: 0.5,
            k: 10,
            stochastic_ratio: 0.9,
            stabilizer: 0.01,
            seed: 17,
        }
    }

    fn data(n: usize) -> (Array2<f64>, Vec<f64>) {
        let mut rng = RandomStream::new(n as u64);
        let x = Array2::from_shape_fn((n, 3), |_| rng.random_range(-1.0..1.0));
        let y = x.rows().into_iter().map(|r| r[0] + r[1] * r[2]).collect();
        (x, y)
    }

    fn constant_model(mean: f64) -> BoostedModel {
        let arch = Architecture::new(vec![2, 1], 2, 2).unwrap();
        let stage = BoostStage {
            network: IndicatorNetwork::zeros(arch),
            cell_means: CellMeans { mean0: mean, mean1: mean, count0: 1, count1: 0, fallback: mean },
        };
        BoostedModel::new(vec![stage], 1.0, TrainingMeta::default()).unwrap()
    }

    #[test]
    fn averages_members() {
        let bag = BaggedModel::new(vec![constant_model(1.0), constant_model(4.0)]).unwrap();
        assert_eq!(bag.predict(&[0.0, 0.0]).unwrap(), 2.5);
        let same = BaggedModel::new(vec![constant_model(3.0); 3]).unwrap();
        assert_eq!(same.predict(&[0.0, 0.0]).unwrap(), 3.0);
    }

    #[test]
    fn rejects_zero_bags() {
        let (x, y) = data(20);
        let mut rng = RandomStream::new(0);
        let base = train_round_robin(x.view(), &y, &config(), 1, None, &mut rng).unwrap();
        assert!(matches!(
            fit_bagged(&base, x.view(), &y, &config(), 0, 1, 0),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn zero_fine_tuning_reproduces_base() {
        let (x, y) = data(40);
        let mut rng = RandomStream::new(1);
        let base = train_round_robin(x.view(), &y, &config(), 3, None, &mut rng).unwrap();
        let bag = fit_bagged(&base, x.view(), &y, &config(), 4, 0, 9).unwrap();
        assert!(bag.members().iter().all(|m| m == &base));
        assert_eq!(bag.predict_batch(x.view()).unwrap(), base.predict_batch(x.view()).unwrap());
    }

    #[test]
    fn single_bag_equals_its_member() {
        let (x, y) = data(40);
        let mut rng = RandomStream::new(2);
        let base = train_round_robin(x.view(), &y, &config(), 2, None, &mut rng).unwrap();
        let bag = fit_bagged(&base, x.view(), &y, &config(), 1, 2, 9).unwrap();
        let member = &bag.members()[0];
        for row in x.rows() {
            let r = row.as_slice().unwrap();
            assert_eq!(predict_bagged(&bag, r).unwrap(), member.predict(r).unwrap());
        }
    }

    #[test]
    fn bagging_is_deterministic_and_order_free() {
        let (x, y) = data(50);
        let mut rng = RandomStream::new(3);
        let base = train_round_robin(x.view(), &y, &config(), 2, None, &mut rng).unwrap();
        let a = fit_bagged(&base, x.view(), &y, &config(), 5, 2, 77).unwrap();
        let b = fit_bagged(&base, x.view(), &y, &config(), 5, 2, 77).unwrap();
        assert_eq!(a, b);

        let mut reversed = a.members().to_vec();
        reversed.reverse();
        let rev = BaggedModel::new(reversed).unwrap();
        let pa = a.predict_batch(x.view()).unwrap();
        let pr = rev.predict_batch(x.view()).unwrap();
        for (u, v) in pa.iter().zip(&pr) {
            assert!((u - v).abs() <= 1e-12);
        }
    }

    #[test]
    fn bagged_prediction_within_member_range() {
        let (x, y) = data(50);
        let mut rng = RandomStream::new(4);
        let base = train_round_robin(x.view(), &y, &config(), 2, None, &mut rng).unwrap();
        let bag = fit_bagged(&base, x.view(), &y, &config(), 6, 2, 5).unwrap();
        for row in x.rows() {
            let r = row.as_slice().unwrap();
            let preds: Vec<f64> = bag.members().iter().map(|m| m.predict(r).unwrap()).collect();
            let lo = preds.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = preds.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let p = bag.predict(r).unwrap();
            assert!(p >= lo - 1e-12 && p <= hi + 1e-12);
        }
    }

    #[test]
    fn defaults_match_schedule() {
        assert_eq!(DEFAULT_BAGS, 20);
        assert_eq!(DEFAULT_FINE_TUNE_ROUNDS, 10);
    }
}
