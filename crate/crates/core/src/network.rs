//! Sparse networks of indicator neurons.
//!
//! Layers and neuron indices are 0-based throughout: layer 0 is the first
//! hidden layer (reading raw features) and layer `depth - 1` holds the single
//! output neuron.

use std::collections::BTreeSet;

use ndarray::ArrayView2;
use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RandomStream;

const UNIT_NORM_TOL: f64 = 1e-9;

/// Layer widths, input dimension and weight sparsity of a network.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    widths: Vec<usize>,
    input_dim: usize,
    w0: usize,
}

impl Architecture {
    pub fn new(widths: Vec<usize>, input_dim: usize, w0: usize) -> Result<Self> {
        if widths.len() < 2 {
            return Err(Error::InvalidArchitecture(format!(
                "depth must be at least 2, got {}",
                widths.len()
            )));
        }
        if widths.contains(&0) {
            return Err(Error::InvalidArchitecture("all widths must be >= 1".into()));
        }
        if *widths.last().unwrap() != 1 {
            return Err(Error::InvalidArchitecture(
                "output layer must have exactly one neuron".into(),
            ));
        }
        if input_dim == 0 {
            return Err(Error::InvalidArchitecture("input_dim must be >= 1".into()));
        }
        if w0 == 0 {
            return Err(Error::InvalidArchitecture("w0 must be >= 1".into()));
        }
        Ok(Self {
            widths,
            input_dim,
            w0,
        })
    }

    pub fn depth(&self) -> usize {
        self.widths.len()
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn w0(&self) -> usize {
        self.w0
    }

    /// Width of the layer feeding `layer` (the input dimension for layer 0).
    pub fn fan_in(&self, layer: usize) -> usize {
        if layer == 0 {
            self.input_dim
        } else {
            self.widths[layer - 1]
        }
    }

    pub fn neuron_count(&self) -> usize {
        self.widths.iter().sum()
    }

    /// `p_l >= 2 * w0^(L - l)` for every hidden layer (1-based `l`), the
    /// width rule that leaves at least as many idle neurons as active ones.
    pub fn satisfies_condition1(&self) -> bool {
        let depth = self.depth();
        self.widths[..depth - 1].iter().enumerate().all(|(l, &width)| {
            let power = (depth - 1 - l) as u32;
            (width as u128) >= 2 * (self.w0 as u128).saturating_pow(power)
        })
    }

    /// Upper bound on the number of active neurons: `sum_l w0^(L - l)`.
    pub fn active_bound(&self) -> usize {
        let depth = self.depth();
        (0..depth)
            .map(|l| self.w0.saturating_pow((depth - 1 - l) as u32))
            .fold(0usize, |acc, v| acc.saturating_add(v))
    }
}

/// One indicator neuron `1{w . input > bias}` with sparse weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Neuron {
    support: Vec<usize>,
    weights: Vec<f64>,
    bias: f64,
}

impl Neuron {
    /// The zero-initialized neuron: empty support and zero bias, so it never fires.
    pub fn zero() -> Self {
        Self {
            support: Vec::new(),
            weights: Vec::new(),
            bias: 0.0,
        }
    }

    /// Builds a neuron, checking that `support` is strictly increasing and
    /// that the weights are unit-norm (or all zero).
    pub fn new(support: Vec<usize>, weights: Vec<f64>, bias: f64) -> Result<Self> {
        let neuron = Self {
            support,
            weights,
            bias,
        };
        neuron.check_shape()?;
        Ok(neuron)
    }

    fn check_shape(&self) -> Result<()> {
        if self.support.len() != self.weights.len() {
            return Err(Error::InvalidInput(format!(
                "support has {} entries but weights has {}",
                self.support.len(),
                self.weights.len()
            )));
        }
        if self.support.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidInput(
                "support must be strictly increasing".into(),
            ));
        }
        if !self.bias.is_finite() || self.weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidInput("non-finite weight or bias".into()));
        }
        let all_zero = self.weights.iter().all(|&w| w == 0.0);
        if !all_zero && (self.norm() - 1.0).abs() > UNIT_NORM_TOL {
            return Err(Error::InvalidInput(format!(
                "weights must have unit norm, got {}",
                self.norm()
            )));
        }
        Ok(())
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    pub fn norm(&self) -> f64 {
        self.weights.iter().map(|w| w * w).sum::<f64>().sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.weights.iter().all(|&w| w == 0.0)
    }

    /// Support entries carrying a nonzero weight.
    pub fn connections(&self) -> impl Iterator<Item = usize> + '_ {
        self.support
            .iter()
            .zip(&self.weights)
            .filter(|(_, &w)| w != 0.0)
            .map(|(&j, _)| j)
    }

    /// `w . input`, with `input(j)` giving coordinate `j` of the layer input.
    ///
    /// Every evaluation path (single input, batch, candidate scoring) goes
    /// through here so they agree bit-for-bit.
    #[inline]
    pub fn pre_activation(&self, input: impl Fn(usize) -> f64) -> f64 {
        let mut acc = 0.0;
        for (&j, &w) in self.support.iter().zip(&self.weights) {
            acc += w * input(j);
        }
        acc
    }

    #[inline]
    pub fn fire(&self, input: impl Fn(usize) -> f64) -> bool {
        self.pre_activation(input) > self.bias
    }

    #[inline]
    pub(crate) fn fire_bits(&self, column: impl Fn(usize) -> bool) -> bool {
        self.fire(|j| if column(j) { 1.0 } else { 0.0 })
    }
}

/// Draws a `w0`-sparse unit vector in `dim` dimensions: a uniform support of
/// size `min(w0, dim)` carrying normalized standard normals.
pub fn sample_sparse_unit_weight(
    dim: usize,
    w0: usize,
    rng: &mut RandomStream,
) -> Result<(Vec<usize>, Vec<f64>)> {
    if dim == 0 {
        return Err(Error::InvalidDimension("dim must be >= 1".into()));
    }
    if w0 == 0 {
        return Err(Error::InvalidDimension("w0 must be >= 1".into()));
    }
    let k = w0.min(dim);
    let mut support = index::sample(rng, dim, k).into_vec();
    support.sort_unstable();
    loop {
        let raw: Vec<f64> = (0..k).map(|_| StandardNormal.sample(rng)).collect();
        let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 && norm.is_finite() {
            let weights = raw.into_iter().map(|v| v / norm).collect();
            return Ok((support, weights));
        }
    }
}

/// Position of a neuron, 0-based in both coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NeuronPos {
    pub layer: usize,
    pub index: usize,
}

impl NeuronPos {
    pub fn new(layer: usize, index: usize) -> Self {
        Self { layer, index }
    }
}

/// Per-layer activations of one input.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ActivationTrace {
    pub layers: Vec<Vec<bool>>,
}

impl ActivationTrace {
    pub fn output(&self) -> bool {
        self.layers.last().map(|l| l[0]).unwrap_or(false)
    }
}

/// Column-major batch activations: `layers[l][h][i]` is neuron `(l, h)` on row `i`.
pub type BatchActivations = Vec<Vec<Vec<bool>>>;

#[derive(Clone, Debug, PartialEq)]
pub struct IndicatorNetwork {
    arch: Architecture,
    layers: Vec<Vec<Neuron>>,
}

impl IndicatorNetwork {
    /// Every neuron zero-initialized; the network outputs 0 everywhere.
    pub fn zeros(arch: Architecture) -> Self {
        let layers = arch
            .widths()
            .iter()
            .map(|&w| vec![Neuron::zero(); w])
            .collect();
        Self { arch, layers }
    }

    pub fn from_layers(arch: Architecture, layers: Vec<Vec<Neuron>>) -> Result<Self> {
        let net = Self { arch, layers };
        net.validate()?;
        Ok(net)
    }

    /// Re-checks every structural and neuron invariant.
    pub fn validate(&self) -> Result<()> {
        if self.layers.len() != self.arch.depth() {
            return Err(Error::InvalidArchitecture(format!(
                "expected {} layers, found {}",
                self.arch.depth(),
                self.layers.len()
            )));
        }
        for (l, layer) in self.layers.iter().enumerate() {
            if layer.len() != self.arch.widths()[l] {
                return Err(Error::InvalidArchitecture(format!(
                    "layer {l} has {} neurons, expected {}",
                    layer.len(),
                    self.arch.widths()[l]
                )));
            }
            let fan_in = self.arch.fan_in(l);
            for (h, neuron) in layer.iter().enumerate() {
                neuron.check_shape()?;
                if neuron.support.len() > self.arch.w0() {
                    return Err(Error::InvalidInput(format!(
                        "neuron ({l}, {h}) has {} weights, more than w0 = {}",
                        neuron.support.len(),
                        self.arch.w0()
                    )));
                }
                if neuron.support.iter().any(|&j| j >= fan_in) {
                    return Err(Error::InvalidInput(format!(
                        "neuron ({l}, {h}) references an input beyond width {fan_in}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    pub fn layers(&self) -> &[Vec<Neuron>] {
        &self.layers
    }

    pub fn neuron(&self, pos: NeuronPos) -> &Neuron {
        &self.layers[pos.layer][pos.index]
    }

    /// Replaces a neuron. The caller is responsible for it fitting the
    /// layer's fan-in and sparsity.
    pub fn set_neuron(&mut self, pos: NeuronPos, neuron: Neuron) {
        debug_assert!(neuron.support.len() <= self.arch.w0());
        debug_assert!(neuron
            .support
            .iter()
            .all(|&j| j < self.arch.fan_in(pos.layer)));
        self.layers[pos.layer][pos.index] = neuron;
    }

    fn check_input_len(&self, len: usize) -> Result<()> {
        if len != self.arch.input_dim() {
            return Err(Error::InvalidInput(format!(
                "expected {} features, got {len}",
                self.arch.input_dim()
            )));
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Result<ActivationTrace> {
        self.check_input_len(x.len())?;
        let mut layers: Vec<Vec<bool>> = Vec::with_capacity(self.layers.len());
        for (l, layer) in self.layers.iter().enumerate() {
            let bits = if l == 0 {
                layer.iter().map(|n| n.fire(|j| x[j])).collect()
            } else {
                let prev = &layers[l - 1];
                layer.iter().map(|n| n.fire_bits(|j| prev[j])).collect()
            };
            layers.push(bits);
        }
        Ok(ActivationTrace { layers })
    }

    pub fn predict_bit(&self, x: &[f64]) -> Result<bool> {
        Ok(self.forward(x)?.output())
    }

    /// Layer-by-layer evaluation of every neuron over a batch of rows.
    pub fn forward_layers(&self, x: ArrayView2<'_, f64>) -> Result<BatchActivations> {
        self.check_input_len(x.ncols())?;
        let rows: Vec<usize> = (0..x.nrows()).collect();
        Ok(self.forward_layers_rows(x, &rows))
    }

    /// As [`forward_layers`](Self::forward_layers) restricted to `rows` of `x`.
    pub(crate) fn forward_layers_rows(&self, x: ArrayView2<'_, f64>, rows: &[usize]) -> BatchActivations {
        let mut acts: BatchActivations = Vec::with_capacity(self.layers.len());
        for (l, layer) in self.layers.iter().enumerate() {
            let columns: Vec<Vec<bool>> = if l == 0 {
                layer
                    .iter()
                    .map(|n| layer0_column(n, x, rows))
                    .collect()
            } else {
                let prev = &acts[l - 1];
                layer
                    .iter()
                    .map(|n| upper_column(n, prev, rows.len()))
                    .collect()
            };
            acts.push(columns);
        }
        acts
    }

    /// Output bit for every row of `x`.
    pub fn forward_batch(&self, x: ArrayView2<'_, f64>) -> Result<Vec<bool>> {
        let mut acts = self.forward_layers(x)?;
        Ok(acts.pop().and_then(|mut l| l.pop()).unwrap_or_default())
    }

    /// Every neuron drawn with a random sparse unit weight and a bias uniform
    /// on `[-1, 1)`, except that each is left zero with probability `zero_prob`.
    pub fn random(arch: Architecture, zero_prob: f64, rng: &mut RandomStream) -> Self {
        let mut net = Self::zeros(arch);
        for l in 0..net.arch.depth() {
            for h in 0..net.arch.widths()[l] {
                if rng.random_bool(zero_prob.clamp(0.0, 1.0)) {
                    continue;
                }
                let (support, weights) = sample_sparse_unit_weight(net.arch.fan_in(l), net.arch.w0(), rng)
                    .expect("fan-in and w0 are positive");
                let bias = rng.random_range(-1.0..1.0);
                net.layers[l][h] = Neuron { support, weights, bias };
            }
        }
        net
    }

    /// Neurons reachable backward from the output through nonzero weights.
    /// The output neuron is always included.
    pub fn active_set(&self) -> BTreeSet<NeuronPos> {
        let depth = self.layers.len();
        let mut active = BTreeSet::new();
        let mut frontier = vec![0usize];
        for l in (0..depth).rev() {
            let mut next = BTreeSet::new();
            for &h in &frontier {
                active.insert(NeuronPos::new(l, h));
                if l > 0 {
                    next.extend(self.layers[l][h].connections());
                }
            }
            frontier = next.into_iter().collect();
        }
        active
    }

    pub fn is_active(&self, pos: NeuronPos) -> bool {
        self.active_set().contains(&pos)
    }
}

pub(crate) fn layer0_column(n: &Neuron, x: ArrayView2<'_, f64>, rows: &[usize]) -> Vec<bool> {
    rows.iter().map(|&i| n.fire(|j| x[[i, j]])).collect()
}

pub(crate) fn upper_column(n: &Neuron, prev: &[Vec<bool>], len: usize) -> Vec<bool> {
    (0..len).map(|i| n.fire_bits(|j| prev[j][i])).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};
    use rand::Rng;

    fn arch(widths: &[usize], p: usize, w0: usize) -> Architecture {
        Architecture::new(widths.to_vec(), p, w0).unwrap()
    }

    fn random_network(a: &Architecture, rng: &mut RandomStream) -> IndicatorNetwork {
        IndicatorNetwork::random(a.clone(), 0.15, rng)
    }

    #[test]
    fn architecture_rejects_bad_shapes() {
        assert!(Architecture::new(vec![1], 3, 2).is_err());
        assert!(Architecture::new(vec![4, 2], 3, 2).is_err());
        assert!(Architecture::new(vec![0, 1], 3, 2).is_err());
        assert!(Architecture::new(vec![4, 1], 0, 2).is_err());
        assert!(Architecture::new(vec![4, 1], 3, 0).is_err());
    }

    #[test]
    fn condition1_flag() {
        assert!(arch(&[4, 1], 2, 2).satisfies_condition1());
        assert!(arch(&[8, 4, 1], 3, 2).satisfies_condition1());
        assert!(arch(&[16, 8, 4, 1], 3, 2).satisfies_condition1());
        assert!(!arch(&[4, 4, 1], 3, 2).satisfies_condition1());
        assert!(!arch(&[3, 1], 3, 2).satisfies_condition1());
    }

    #[test]
    fn active_bound_is_geometric() {
        assert_eq!(arch(&[8, 4, 1], 3, 2).active_bound(), 7);
        assert_eq!(arch(&[4, 1], 3, 2).active_bound(), 3);
    }

    #[test]
    fn zero_network_outputs_zero() {
        let net = IndicatorNetwork::zeros(arch(&[4, 1], 3, 2));
        assert!(!net.predict_bit(&[0.5, 0.5, 0.5]).unwrap());
        let net = IndicatorNetwork::zeros(arch(&[8, 4, 1], 3, 2));
        let trace = net.forward(&[1.0, 1.0, 1.0]).unwrap();
        assert!(trace.layers.iter().flatten().all(|&b| !b));
        let batch = Array2::from_elem((5, 3), 0.7);
        assert_eq!(net.forward_batch(batch.view()).unwrap(), vec![false; 5]);
    }

    #[test]
    fn zero_network_active_set_is_output_only() {
        let net = IndicatorNetwork::zeros(arch(&[8, 4, 1], 3, 2));
        let active = net.active_set();
        assert_eq!(active.len(), 1);
        assert!(active.contains(&NeuronPos::new(2, 0)));
    }

    #[test]
    fn forward_rejects_wrong_length() {
        let net = IndicatorNetwork::zeros(arch(&[4, 1], 3, 2));
        assert!(matches!(net.forward(&[1.0]), Err(Error::InvalidInput(_))));
        let batch = Array2::<f64>::zeros((2, 4));
        assert!(net.forward_batch(batch.view()).is_err());
    }

    #[test]
    fn sample_rejects_zero_dim() {
        let mut rng = RandomStream::new(0);
        assert!(matches!(
            sample_sparse_unit_weight(0, 2, &mut rng),
            Err(Error::InvalidDimension(_))
        ));
    }

    #[test]
    fn sample_has_two_nonzeros_and_unit_norm() {
        let mut rng = RandomStream::new(11);
        for _ in 0..200 {
            let (s, w) = sample_sparse_unit_weight(3, 2, &mut rng).unwrap();
            assert_eq!(s.len(), 2);
            assert!(w.iter().all(|&v| v != 0.0));
            let norm: f64 = w.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn one_dimensional_sign_is_fair() {
        let mut rng = RandomStream::new(5);
        let draws = 10_000;
        let positive = (0..draws)
            .filter(|_| {
                let (s, w) = sample_sparse_unit_weight(1, 2, &mut rng).unwrap();
                assert_eq!(s, vec![0]);
                assert!(w[0] == 1.0 || w[0] == -1.0);
                w[0] > 0.0
            })
            .count();
        let freq = positive as f64 / draws as f64;
        assert!((freq - 0.5).abs() < 0.05, "freq = {freq}");
    }

    #[test]
    fn supports_are_uniform() {
        let mut rng = RandomStream::new(6);
        let draws = 100_000;
        let mut counts = std::collections::HashMap::new();
        for _ in 0..draws {
            let (s, _) = sample_sparse_unit_weight(5, 2, &mut rng).unwrap();
            *counts.entry(s).or_insert(0usize) += 1;
        }
        assert_eq!(counts.len(), 10);
        for (s, c) in counts {
            let f = c as f64 / draws as f64;
            assert!((f - 0.1).abs() < 0.02, "support {s:?} freq {f}");
        }
    }

    #[test]
    fn neuron_validation() {
        assert!(Neuron::new(vec![0, 1], vec![0.6, 0.8], 0.0).is_ok());
        assert!(Neuron::new(vec![1, 0], vec![0.6, 0.8], 0.0).is_err());
        assert!(Neuron::new(vec![0, 1], vec![0.6, 0.6], 0.0).is_err());
        assert!(Neuron::new(vec![0], vec![1.0, 0.0], 0.0).is_err());
        assert!(Neuron::new(vec![0], vec![0.0], 0.3).is_ok());
    }

    #[test]
    fn validate_catches_out_of_range_support() {
        let a = arch(&[2, 1], 2, 2);
        let mut layers = vec![vec![Neuron::zero(); 2], vec![Neuron::zero()]];
        layers[1][0] = Neuron::new(vec![0, 2], vec![0.6, 0.8], 0.0).unwrap();
        assert!(IndicatorNetwork::from_layers(a, layers).is_err());
    }

    #[test]
    fn strict_threshold_puts_boundary_on_zero_side() {
        let a = arch(&[1, 1], 1, 1);
        let layers = vec![
            vec![Neuron::new(vec![0], vec![1.0], 0.5).unwrap()],
            vec![Neuron::new(vec![0], vec![1.0], 0.0).unwrap()],
        ];
        let net = IndicatorNetwork::from_layers(a, layers).unwrap();
        assert!(!net.predict_bit(&[0.5]).unwrap());
        assert!(net.predict_bit(&[0.5000001]).unwrap());
    }

    #[test]
    fn batch_matches_rowwise_on_random_networks() {
        let mut rng = RandomStream::new(21);
        for widths in [vec![4, 1], vec![8, 4, 1], vec![4, 4, 4, 1]] {
            let a = arch(&widths, 4, 2);
            for _ in 0..50 {
                let net = random_network(&a, &mut rng);
                let x = Array2::from_shape_fn((50, 4), |_| rng.random_range(-1.0..1.0));
                let batch = net.forward_batch(x.view()).unwrap();
                for (i, row) in x.rows().into_iter().enumerate() {
                    let single = net.predict_bit(row.as_slice().unwrap()).unwrap();
                    assert_eq!(batch[i], single);
                }
            }
        }
    }

    #[test]
    fn active_set_respects_bound() {
        let mut rng = RandomStream::new(3);
        for widths in [vec![8, 4, 1], vec![4, 4, 4, 1], vec![16, 8, 4, 1]] {
            let a = arch(&widths, 5, 2);
            for _ in 0..1000 {
                let net = random_network(&a, &mut rng);
                assert!(net.active_set().len() <= a.active_bound());
            }
        }
    }

    #[test]
    fn idle_perturbation_leaves_output_unchanged() {
        let mut rng = RandomStream::new(8);
        let a = arch(&[8, 4, 1], 3, 2);
        let x = Array2::from_shape_fn((64, 3), |_| rng.random_range(-1.0..1.0));
        for _ in 0..100 {
            let mut net = random_network(&a, &mut rng);
            let before = net.forward_batch(x.view()).unwrap();
            let active = net.active_set();
            for l in 0..a.depth() {
                for h in 0..a.widths()[l] {
                    let pos = NeuronPos::new(l, h);
                    if active.contains(&pos) {
                        continue;
                    }
                    let (s, w) = sample_sparse_unit_weight(a.fan_in(l), 2, &mut rng).unwrap();
                    net.set_neuron(pos, Neuron::new(s, w, rng.random_range(-2.0..2.0)).unwrap());
                }
            }
            assert_eq!(net.forward_batch(x.view()).unwrap(), before);
        }
    }

    #[test]
    fn forward_trace_shapes() {
        let a = arch(&[3, 2, 1], 2, 2);
        let net = IndicatorNetwork::zeros(a);
        let t = net.forward(&array![0.1, 0.2].to_vec()).unwrap();
        let lens: Vec<usize> = t.layers.iter().map(Vec::len).collect();
        assert_eq!(lens, vec![3, 2, 1]);
    }
}
