//! Exhaustive enumeration of the sample labelings a network class can produce.
//!
//! A labeling of `n <= 14` rows is stored as a `u64` bitmask, bit `i` for row
//! `i`. Layer 1 is enumerated geometrically; deeper layers apply every 2-input
//! threshold gate the sampler can produce (unit weights, bias `u . e` with
//! `e` in `{0,1}^2`) to pairs of labelings already reachable.

use std::collections::BTreeSet;

use ndarray::ArrayView2;

use crate::error::{Error, Result};
use crate::network::Architecture;
use crate::partition::fitted_sse;

pub const MAX_ROWS: usize = 14;

/// Gate evaluations closer to the threshold than this count as ties, so
/// lattice directions such as 45 degrees behave as in exact arithmetic.
const GATE_TIE: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelingSet {
    n: usize,
    labels: BTreeSet<u64>,
    /// Set size after layer 1 and after each composition step.
    pub sizes: Vec<usize>,
}

impl LabelingSet {
    pub fn from_masks(n: usize, masks: impl IntoIterator<Item = u64>) -> Result<Self> {
        guard(n)?;
        let full = full_mask(n);
        let labels: BTreeSet<u64> = masks.into_iter().map(|m| m & full).collect();
        let sizes = vec![labels.len()];
        Ok(Self { n, labels, sizes })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn contains(&self, mask: u64) -> bool {
        self.labels.contains(&mask)
    }

    pub fn contains_bits(&self, bits: &[bool]) -> bool {
        bits.len() == self.n && self.contains(to_mask(bits))
    }

    pub fn iter(&self) -> impl Iterator<Item = u64> + '_ {
        self.labels.iter().copied()
    }

    pub fn to_bits(&self, mask: u64) -> Vec<bool> {
        to_bits(mask, self.n)
    }
}

pub fn to_mask(bits: &[bool]) -> u64 {
    bits.iter()
        .enumerate()
        .filter(|&(_, &b)| b)
        .fold(0, |m, (i, _)| m | 1 << i)
}

pub fn to_bits(mask: u64, n: usize) -> Vec<bool> {
    (0..n).map(|i| mask >> i & 1 == 1).collect()
}

/// Row 0 first, e.g. `0011`.
pub fn format_labeling(mask: u64, n: usize) -> String {
    to_bits(mask, n).iter().map(|&b| if b { '1' } else { '0' }).collect()
}

fn full_mask(n: usize) -> u64 {
    if n == 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

fn guard(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidInput("oracle needs at least one row".into()));
    }
    if n > MAX_ROWS {
        return Err(Error::SizeGuard { n, max: MAX_ROWS });
    }
    Ok(())
}

/// Rows strictly above each anchor's projection, plus the all-ones labeling.
fn threshold_labelings(proj: &[f64], out: &mut BTreeSet<u64>) {
    for &c in proj {
        out.insert(
            proj.iter()
                .enumerate()
                .filter(|&(_, &v)| v > c)
                .fold(0, |m, (i, _)| m | 1 << i),
        );
    }
    out.insert(full_mask(proj.len()));
}

/// Every labeling `1{w . x > c}` with `|w|_0 <= w0` (`w0` of 1 or 2).
pub fn enumerate_layer1(x: ArrayView2<'_, f64>, w0: usize) -> Result<LabelingSet> {
    let n = x.nrows();
    guard(n)?;
    if w0 == 0 || w0 > 2 {
        return Err(Error::Unsupported(format!("oracle supports w0 in {{1, 2}}, got {w0}")));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite feature value".into()));
    }
    let p = x.ncols();
    let mut labels = BTreeSet::new();
    labels.insert(0);
    for j in 0..p {
        let col: Vec<f64> = x.column(j).to_vec();
        threshold_labelings(&col, &mut labels);
        let neg: Vec<f64> = col.iter().map(|v| -v).collect();
        threshold_labelings(&neg, &mut labels);
    }
    if w0 == 2 {
        for j in 0..p {
            for k in j + 1..p {
                let pts: Vec<(f64, f64)> = (0..n).map(|i| (x[[i, j]], x[[i, k]])).collect();
                for theta in sweep_angles(&pts) {
                    let (s, c) = theta.sin_cos();
                    let proj: Vec<f64> = pts.iter().map(|&(a, b)| c * a + s * b).collect();
                    threshold_labelings(&proj, &mut labels);
                }
            }
        }
    }
    LabelingSet::from_masks(n, labels)
}

/// Directions covering every ordering of the projected points: the critical
/// angles where two projections tie, and the midpoints between consecutive ones.
fn sweep_angles(pts: &[(f64, f64)]) -> Vec<f64> {
    use std::f64::consts::{FRAC_PI_2, PI, TAU};
    let mut crit = Vec::new();
    for (i, a) in pts.iter().enumerate() {
        for b in &pts[i + 1..] {
            let (dx, dy) = (a.0 - b.0, a.1 - b.1);
            if dx == 0.0 && dy == 0.0 {
                continue;
            }
            // w is perpendicular to the difference vector.
            let base = dy.atan2(dx) + FRAC_PI_2;
            crit.push(base.rem_euclid(TAU));
            crit.push((base + PI).rem_euclid(TAU));
        }
    }
    if crit.is_empty() {
        return vec![0.0, PI];
    }
    crit.sort_by(f64::total_cmp);
    crit.dedup();
    let mut angles = crit.clone();
    for (i, &a) in crit.iter().enumerate() {
        let b = if i + 1 < crit.len() { crit[i + 1] } else { crit[0] + TAU };
        angles.push(0.5 * (a + b));
    }
    angles
}

/// Truth tables (bit `2a + b`) of the gates `1{w . (a, b) > w . e}` over
/// directions on a 22.5 degree grid, which hits every distinct gate.
pub fn two_input_gates() -> Vec<u8> {
    let mut tables = BTreeSet::new();
    for step in 0..16 {
        let theta = step as f64 * std::f64::consts::PI / 8.0;
        let (s, c) = theta.sin_cos();
        for e in [(0.0, 0.0), (0.0, 1.0), (1.0, 0.0), (1.0, 1.0)] {
            let bias = c * e.0 + s * e.1;
            let mut table = 0u8;
            for a in 0..2 {
                for b in 0..2 {
                    if c * a as f64 + s * b as f64 - bias > GATE_TIE {
                        table |= 1 << (2 * a + b);
                    }
                }
            }
            tables.insert(table);
        }
    }
    tables.into_iter().collect()
}

fn apply_gate(table: u8, a: u64, b: u64, full: u64) -> u64 {
    let mut out = 0;
    for (bit, ma, mb) in [
        (0, !a & full, !b & full),
        (1, !a & full, b),
        (2, a, !b & full),
        (3, a, b),
    ] {
        if table >> bit & 1 == 1 {
            out |= ma & mb;
        }
    }
    out
}

/// Closes `base` under `depth - 1` layers of 2-input gates.
pub fn close_under_depth(base: &LabelingSet, depth: usize, w0: usize) -> Result<LabelingSet> {
    if w0 != 2 {
        return Err(Error::Unsupported(format!("depth closure supports w0 = 2 only, got {w0}")));
    }
    if depth == 0 {
        return Err(Error::InvalidArchitecture("depth must be >= 1".into()));
    }
    let gates = two_input_gates();
    let full = full_mask(base.n);
    let mut set = base.clone();
    for _ in 1..depth {
        if set.labels.len() as u64 == full.wrapping_add(1) {
            set.sizes.push(set.labels.len());
            continue;
        }
        let cur: Vec<u64> = set.labels.iter().copied().collect();
        let mut next = set.labels.clone();
        // The gate set is closed under swapping inputs, so unordered pairs suffice.
        for (i, &a) in cur.iter().enumerate() {
            for &b in &cur[i..] {
                for &g in &gates {
                    next.insert(apply_gate(g, a, b, full));
                }
            }
        }
        set.labels = next;
        set.sizes.push(set.labels.len());
    }
    Ok(set)
}

/// Reversed so row 0 is most significant: `0011` sorts before `1100`.
fn lexical_key(mask: u64, n: usize) -> u64 {
    mask.reverse_bits() >> (64 - n)
}

#[derive(Clone, Debug, PartialEq)]
pub struct OracleResult {
    pub min_sse: f64,
    pub witness: Vec<bool>,
    pub labelings: LabelingSet,
}

/// Minimum cell-mean SSE over every labeling the class reaches on `x`.
/// Ties go to the lexically smallest labeling.
pub fn oracle_min_sse(
    x: ArrayView2<'_, f64>,
    targets: &[f64],
    arch: &Architecture,
) -> Result<OracleResult> {
    if targets.len() != x.nrows() {
        return Err(Error::InvalidInput(format!(
            "{} targets for {} rows",
            targets.len(),
            x.nrows()
        )));
    }
    let n = x.nrows();
    let base = enumerate_layer1(x, arch.w0())?;
    let labelings = close_under_depth(&base, arch.depth(), arch.w0())?;
    let mut best: Option<(f64, u64)> = None;
    for mask in labelings.iter() {
        let sse = fitted_sse(&to_bits(mask, n), targets)?;
        let better = match best {
            None => true,
            Some((s, m)) => sse < s || (sse == s && lexical_key(mask, n) < lexical_key(m, n)),
        };
        if better {
            best = Some((sse, mask));
        }
    }
    let (min_sse, mask) = best.expect("labeling set always holds the all-zero labeling");
    Ok(OracleResult {
        min_sse,
        witness: to_bits(mask, n),
        labelings,
    })
}
