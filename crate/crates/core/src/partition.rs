//! Two-cell regression over the binary partition a network induces.
//!
//! For labels `g` and targets `t`, the fitted function predicts the mean of
//! `t` within the cell `{g = label}`. Selection uses the score
//! `sum_l (sum_{g=l} t)^2 / #{g=l}`, which differs from the fitted SSE by the
//! constant `sum t^2`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellMeans {
    pub mean0: f64,
    pub mean1: f64,
    pub count0: usize,
    pub count1: usize,
    /// Global target mean, used for an empty cell.
    pub fallback: f64,
}

impl CellMeans {
    pub fn predict(&self, label: bool) -> f64 {
        if label {
            self.mean1
        } else {
            self.mean0
        }
    }

    pub fn total(&self) -> usize {
        self.count0 + self.count1
    }
}

/// Per-cell target sums and counts, each accumulated in row order.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CellSums {
    pub sum0: f64,
    pub sum1: f64,
    pub count0: usize,
    pub count1: usize,
}

impl CellSums {
    pub fn accumulate<'a>(labels: impl IntoIterator<Item = &'a bool>, targets: &[f64]) -> Self {
        let mut s = Self::default();
        for (&label, &t) in labels.into_iter().zip(targets) {
            if label {
                s.sum1 += t;
                s.count1 += 1;
            } else {
                s.sum0 += t;
                s.count0 += 1;
            }
        }
        s
    }

    /// `(sum0^2 / count0) + (sum1^2 / count1)`, an empty cell contributing 0.
    pub fn score(&self) -> f64 {
        cell_term(self.sum0, self.count0) + cell_term(self.sum1, self.count1)
    }
}

fn cell_term(sum: f64, count: usize) -> f64 {
    if count == 0 {
        0.0
    } else {
        sum * sum / count as f64
    }
}

fn check_lengths(labels: &[bool], targets: &[f64]) -> Result<()> {
    if labels.is_empty() {
        return Err(Error::InvalidInput("empty labels".into()));
    }
    if labels.len() != targets.len() {
        return Err(Error::InvalidInput(format!(
            "{} labels but {} targets",
            labels.len(),
            targets.len()
        )));
    }
    Ok(())
}

pub fn fit_cell_means(labels: &[bool], targets: &[f64]) -> Result<CellMeans> {
    check_lengths(labels, targets)?;
    let s = CellSums::accumulate(labels, targets);
    let fallback = targets.iter().sum::<f64>() / targets.len() as f64;
    let mean = |sum: f64, count: usize| {
        if count == 0 {
            fallback
        } else {
            sum / count as f64
        }
    };
    Ok(CellMeans {
        mean0: mean(s.sum0, s.count0),
        mean1: mean(s.sum1, s.count1),
        count0: s.count0,
        count1: s.count1,
        fallback,
    })
}

pub fn predict_cell(cm: &CellMeans, label: bool) -> f64 {
    cm.predict(label)
}

pub fn partition_score(labels: &[bool], targets: &[f64]) -> Result<f64> {
    check_lengths(labels, targets)?;
    Ok(CellSums::accumulate(labels, targets).score())
}

/// Sum of squared residuals of the cell-mean fit, computed directly.
pub fn fitted_sse(labels: &[bool], targets: &[f64]) -> Result<f64> {
    let cm = fit_cell_means(labels, targets)?;
    Ok(labels
        .iter()
        .zip(targets)
        .map(|(&l, &t)| {
            let r = t - cm.predict(l);
            r * r
        })
        .sum())
}
