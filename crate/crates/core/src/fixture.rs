//! The calibrated three-layer "diamond" network (L = 3, p = 3, widths 8/4/1, w0 = 2).
//!
//! The parameters were published rounded to three decimals. Taken literally
//! they are neither unit-norm nor usable with a strict threshold: every
//! upper-layer bias equals the sum of its printed weights, so the gates never
//! fire. [`diamond_network`] therefore picks a representative of each rounding
//! cell: weights are normalized (they still round to the printed values) and
//! upper-layer biases sit at the bottom of their rounding interval, which turns
//! each upper neuron into the AND gate it was calibrated to be.

use crate::error::Result;
use crate::network::{Architecture, IndicatorNetwork, Neuron};

/// One printed neuron: `(support, weights, bias)` with 0-based support.
pub type PrintedNeuron = (&'static [usize], &'static [f64], f64);

/// Active neurons as printed, per layer. Idle neurons are not specified.
pub const PRINTED_LAYERS: [&[PrintedNeuron]; 3] = [
    &[
        (&[0, 1], &[0.748, 0.664], 0.5),
        (&[0, 1], &[0.748, -0.664], -0.3),
        (&[0, 1], &[0.748, -0.664], 0.3),
        (&[0, 1], &[0.748, 0.664], 0.8),
    ],
    &[
        (&[0, 1], &[0.083, 0.997], 1.08),
        (&[2, 3], &[0.973, 0.229], 1.202),
    ],
    &[(&[0, 1], &[0.707, 0.707], 1.414)],
];

pub const WIDTHS: [usize; 3] = [8, 4, 1];
pub const INPUT_DIM: usize = 3;
pub const W0: usize = 2;

/// Half a unit in the last printed decimal place.
pub const PRINT_HALF_ULP: f64 = 0.0005;

pub fn diamond_architecture() -> Architecture {
    Architecture::new(WIDTHS.to_vec(), INPUT_DIM, W0).expect("fixture architecture is valid")
}

/// The fixture network, with unspecified idle neurons left zero-initialized.
pub fn diamond_network() -> Result<IndicatorNetwork> {
    let arch = diamond_architecture();
    let mut layers: Vec<Vec<Neuron>> = WIDTHS.iter().map(|&w| vec![Neuron::zero(); w]).collect();
    for (l, printed) in PRINTED_LAYERS.iter().enumerate() {
        for (h, &(support, weights, bias)) in printed.iter().enumerate() {
            let norm = weights.iter().map(|w| w * w).sum::<f64>().sqrt();
            let unit: Vec<f64> = weights.iter().map(|w| w / norm).collect();
            let bias = if l == 0 { bias } else { bias - PRINT_HALF_ULP };
            layers[l][h] = Neuron::new(support.to_vec(), unit, bias)?;
        }
    }
    IndicatorNetwork::from_layers(arch, layers)
}
