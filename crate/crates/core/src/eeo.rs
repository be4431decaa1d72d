//! Exploit-explore optimizing: one update round over every neuron of a network.
//!
//! Active neurons (those the output depends on) are exploited: `K` random
//! candidates are swapped in, scored on a fresh subsample, and the best one is
//! kept, the incumbent winning ties. Idle neurons are explored: they are
//! replaced by a uniformly chosen member of `{candidate_1, .., candidate_K,
//! incumbent}` without any scoring, since they cannot affect the output.

use std::collections::{BTreeSet, HashMap};

use ndarray::ArrayView2;
use rand::seq::index;
use rand::Rng;

use crate::error::{Error, Result};
use crate::network::{
    layer0_column, sample_sparse_unit_weight, upper_column, BatchActivations, IndicatorNetwork,
    Neuron, NeuronPos,
};
use crate::partition::CellSums;
use crate::rng::RandomStream;

/// A candidate `(weights, bias)` pair for one neuron slot.
#[derive(Clone, Debug, PartialEq)]
pub struct Candidate {
    pub neuron: Neuron,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepConfig {
    /// Candidates sampled per neuron visit.
    pub k: usize,
    /// Fraction of rows subsampled (without replacement) per exploit visit.
    pub stochastic_ratio: f64,
    /// Incumbent discount, in units of the subsample target variance.
    pub stabilizer: f64,
}

impl StepConfig {
    pub fn new(k: usize, stochastic_ratio: f64, stabilizer: f64) -> Result<Self> {
        let cfg = Self {
            k,
            stochastic_ratio,
            stabilizer,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Plain exploit-explore: every row scored, no incumbent discount.
    pub fn exact(k: usize) -> Self {
        Self {
            k,
            stochastic_ratio: 1.0,
            stabilizer: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidConfig("K must be >= 1".into()));
        }
        if !(self.stochastic_ratio > 0.0 && self.stochastic_ratio <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "stochastic_ratio must lie in (0, 1], got {}",
                self.stochastic_ratio
            )));
        }
        if !(self.stabilizer >= 0.0 && self.stabilizer.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "stabilizer must be a non-negative number, got {}",
                self.stabilizer
            )));
        }
        Ok(())
    }
}

/// Training rows that layer-0 biases may be anchored at.
#[derive(Clone, Copy, Debug)]
pub struct Anchors<'a> {
    pub x: ArrayView2<'a, f64>,
    pub rows: &'a [usize],
}

/// Samples `k` candidates for a neuron in `layer` whose input has width `fan_in`.
///
/// Layer 0 biases are `u . X_i` for a uniformly drawn anchor row `i`; deeper
/// layers use `u . e` for a uniform binary vector `e`.
pub fn sample_candidates(
    layer: usize,
    fan_in: usize,
    w0: usize,
    k: usize,
    anchors: Option<Anchors<'_>>,
    rng: &mut RandomStream,
) -> Result<Vec<Candidate>> {
    if layer == 0 && anchors.is_none_or(|a| a.rows.is_empty()) {
        return Err(Error::MissingAnchors);
    }
    let mut out = Vec::with_capacity(k);
    for _ in 0..k {
        let (support, weights) = sample_sparse_unit_weight(fan_in, w0, rng)?;
        let mut neuron = Neuron::new(support, weights, 0.0)?;
        let bias = match anchors.filter(|_| layer == 0) {
            Some(a) => {
                let i = a.rows[rng.random_range(0..a.rows.len())];
                neuron.pre_activation(|j| a.x[[i, j]])
            }
            None => {
                let e: HashMap<usize, f64> = neuron
                    .support()
                    .iter()
                    .map(|&j| (j, if rng.random_bool(0.5) { 1.0 } else { 0.0 }))
                    .collect();
                neuron.pre_activation(|j| e[&j])
            }
        };
        neuron = Neuron::new(neuron.support().to_vec(), neuron.weights().to_vec(), bias)?;
        out.push(Candidate { neuron });
    }
    Ok(out)
}

/// Index of the maximum score, ties going to the highest index.
///
/// Scores may be produced in any order; only this reduction decides.
pub fn select_highest_max(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s >= scores[best] {
            best = i;
        }
    }
    best
}

fn draw_subsample(n: usize, ratio: f64, rng: &mut RandomStream) -> Vec<usize> {
    let m = ((ratio * n as f64).round() as usize).clamp(1, n);
    if m == n {
        return (0..n).collect();
    }
    let mut rows = index::sample(rng, n, m).into_vec();
    rows.sort_unstable();
    rows
}

/// Output column when neuron `pos` is replaced by one producing `column`.
///
/// Only active neurons above `pos` are re-evaluated; everything else reads the
/// cached activations.
fn output_with_override(
    net: &IndicatorNetwork,
    acts: &BatchActivations,
    active_above: &[NeuronPos],
    pos: NeuronPos,
    column: Vec<bool>,
) -> Vec<bool> {
    let depth = net.architecture().depth();
    if pos.layer == depth - 1 {
        return column;
    }
    let len = column.len();
    let mut overrides: HashMap<NeuronPos, Vec<bool>> = HashMap::new();
    overrides.insert(pos, column);
    for &above in active_above {
        let neuron = net.neuron(above);
        let touched = neuron
            .support()
            .iter()
            .any(|&j| overrides.contains_key(&NeuronPos::new(above.layer - 1, j)));
        if !touched {
            continue;
        }
        let prev_layer = above.layer - 1;
        let col: Vec<bool> = (0..len)
            .map(|i| {
                neuron.fire_bits(|j| match overrides.get(&NeuronPos::new(prev_layer, j)) {
                    Some(c) => c[i],
                    None => acts[prev_layer][j][i],
                })
            })
            .collect();
        overrides.insert(above, col);
    }
    overrides
        .remove(&NeuronPos::new(depth - 1, 0))
        .unwrap_or_else(|| acts[depth - 1][0].clone())
}

fn check_data(net: &IndicatorNetwork, targets: &[f64], x: ArrayView2<'_, f64>) -> Result<()> {
    if x.nrows() == 0 {
        return Err(Error::InvalidInput("empty training sample".into()));
    }
    if targets.len() != x.nrows() {
        return Err(Error::InvalidInput(format!(
            "{} targets for {} rows",
            targets.len(),
            x.nrows()
        )));
    }
    if x.ncols() != net.architecture().input_dim() {
        return Err(Error::InvalidInput(format!(
            "expected {} features, got {}",
            net.architecture().input_dim(),
            x.ncols()
        )));
    }
    Ok(())
}

/// Exploit step for an active neuron. Returns the 0-based index of the
/// winner among `K + 1` options, where index `K` is the incumbent.
pub fn update_neuron(
    net: &mut IndicatorNetwork,
    pos: NeuronPos,
    targets: &[f64],
    x: ArrayView2<'_, f64>,
    cfg: &StepConfig,
    rng: &mut RandomStream,
) -> Result<usize> {
    cfg.validate()?;
    check_data(net, targets, x)?;
    let active = net.active_set();
    if !active.contains(&pos) {
        return Err(Error::ContractViolation(format!(
            "update_neuron called on idle neuron {pos:?}"
        )));
    }
    exploit(net, &active, pos, targets, x, cfg, rng)
}

fn exploit(
    net: &mut IndicatorNetwork,
    active: &BTreeSet<NeuronPos>,
    pos: NeuronPos,
    targets: &[f64],
    x: ArrayView2<'_, f64>,
    cfg: &StepConfig,
    rng: &mut RandomStream,
) -> Result<usize> {
    let arch = net.architecture().clone();
    let depth = arch.depth();
    let rows = draw_subsample(x.nrows(), cfg.stochastic_ratio, rng);
    let sub_targets: Vec<f64> = rows.iter().map(|&i| targets[i]).collect();
    let acts = net.forward_layers_rows(x, &rows);

    let anchors = Anchors { x, rows: &rows };
    let candidates = sample_candidates(
        pos.layer,
        arch.fan_in(pos.layer),
        arch.w0(),
        cfg.k,
        (pos.layer == 0).then_some(anchors),
        rng,
    )?;

    let active_above: Vec<NeuronPos> = active
        .iter()
        .copied()
        .filter(|p| p.layer > pos.layer)
        .collect();

    let mut scores: Vec<f64> = candidates
        .iter()
        .map(|c| {
            let column = if pos.layer == 0 {
                layer0_column(&c.neuron, x, &rows)
            } else {
                upper_column(&c.neuron, &acts[pos.layer - 1], rows.len())
            };
            let out = output_with_override(net, &acts, &active_above, pos, column);
            CellSums::accumulate(&out, &sub_targets).score()
        })
        .collect();

    let incumbent = CellSums::accumulate(&acts[depth - 1][0], &sub_targets).score();
    let m = sub_targets.len() as f64;
    let mean = sub_targets.iter().sum::<f64>() / m;
    let var = sub_targets.iter().map(|t| (t - mean) * (t - mean)).sum::<f64>() / m;
    // SSE_incumbent - stabilizer * var, written as a score bonus.
    scores.push(incumbent + cfg.stabilizer * var);

    let chosen = select_highest_max(&scores);
    if chosen < candidates.len() {
        net.set_neuron(pos, candidates[chosen].neuron.clone());
    }
    Ok(chosen)
}

/// Explore step for an idle neuron. Returns the 0-based index drawn
/// uniformly from `0..=K`; index `K` keeps the incumbent.
///
/// Layer-0 candidates anchor at uniformly drawn rows of `x`.
pub fn update_neuron_idle(
    net: &mut IndicatorNetwork,
    pos: NeuronPos,
    x: ArrayView2<'_, f64>,
    cfg: &StepConfig,
    rng: &mut RandomStream,
) -> Result<usize> {
    cfg.validate()?;
    if net.is_active(pos) {
        return Err(Error::ContractViolation(format!(
            "update_neuron_idle called on active neuron {pos:?}"
        )));
    }
    explore(net, pos, x, cfg, rng)
}

fn explore(
    net: &mut IndicatorNetwork,
    pos: NeuronPos,
    x: ArrayView2<'_, f64>,
    cfg: &StepConfig,
    rng: &mut RandomStream,
) -> Result<usize> {
    let arch = net.architecture();
    let rows: Vec<usize> = if pos.layer == 0 {
        (0..x.nrows()).collect()
    } else {
        Vec::new()
    };
    let anchors = Anchors { x, rows: &rows };
    let candidates = sample_candidates(
        pos.layer,
        arch.fan_in(pos.layer),
        arch.w0(),
        cfg.k,
        (pos.layer == 0).then_some(anchors),
        rng,
    )?;
    let pick = rng.random_range(0..=cfg.k);
    if pick < cfg.k {
        net.set_neuron(pos, candidates[pick].neuron.clone());
    }
    Ok(pick)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RoundStats {
    pub exploit_visits: usize,
    pub idle_visits: usize,
    /// Exploit visits that installed a candidate.
    pub replacements: usize,
}

/// One full round: layers from the output down, neurons in index order, the
/// active set recomputed before every visit.
pub fn update_round(
    net: &mut IndicatorNetwork,
    targets: &[f64],
    x: ArrayView2<'_, f64>,
    cfg: &StepConfig,
    rng: &mut RandomStream,
) -> Result<RoundStats> {
    cfg.validate()?;
    check_data(net, targets, x)?;
    let widths = net.architecture().widths().to_vec();
    let mut stats = RoundStats::default();
    for layer in (0..widths.len()).rev() {
        for index in 0..widths[layer] {
            let pos = NeuronPos::new(layer, index);
            let active = net.active_set();
            if active.contains(&pos) {
                let chosen = exploit(net, &active, pos, targets, x, cfg, rng)?;
                stats.exploit_visits += 1;
                if chosen < cfg.k {
                    stats.replacements += 1;
                }
            } else {
                explore(net, pos, x, cfg, rng)?;
                stats.idle_visits += 1;
            }
        }
    }
    Ok(stats)
}
