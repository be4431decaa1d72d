//! Self-checks: partition identities, the diamond fixture, and convergence
//! of the optimizer to the exhaustive optimum on tiny problems.

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::boosting::{compute_residuals, train_round_robin, train_round_robin_traced, TrainConfig};
use crate::error::{Error, Result};
use crate::fixture::diamond_network;
use crate::network::IndicatorNetwork;
use crate::oracle::{oracle_min_sse, to_mask};
use crate::partition::{fitted_sse, partition_score};
use crate::rng::RandomStream;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    Convergence,
    Identities,
    Fixture,
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "convergence" => Ok(Self::Convergence),
            "identities" => Ok(Self::Identities),
            "fixture" => Ok(Self::Fixture),
            _ => Err(Error::InvalidConfig(format!("unknown suite `{s}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{tag} {}: {}", self.name, self.detail)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Report {
    pub checks: Vec<Check>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

pub fn run_suite(suite: Suite, seed: u64) -> Result<Report> {
    let checks = match suite {
        Suite::Identities => identity_checks(seed, 1000)?,
        Suite::Fixture => fixture_checks()?,
        Suite::Convergence => convergence_checks(seed)?,
    };
    Ok(Report { checks })
}

/// Largest `|sse - (sum t^2 - score)| / sum t^2` over random instances.
pub fn identity_worst_ratio(seed: u64, instances: usize) -> Result<f64> {
    let mut rng = RandomStream::new(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..instances {
        let n = rng.random_range(1..=500);
        let scale = 10f64.powf(rng.random_range(-3.0..3.0));
        let shift: f64 = rng.random_range(-5.0..5.0) * scale;
        let targets: Vec<f64> = (0..n)
            .map(|_| shift + scale * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let p1: f64 = rng.random();
        let labels: Vec<bool> = (0..n).map(|_| rng.random_bool(p1)).collect();
        let sum_sq: f64 = targets.iter().map(|t| t * t).sum();
        let gap = (fitted_sse(&labels, &targets)? - (sum_sq - partition_score(&labels, &targets)?)).abs();
        if sum_sq > 0.0 {
            worst = worst.max(gap / sum_sq);
        } else if gap > 0.0 {
            worst = f64::INFINITY;
        }
    }
    Ok(worst)
}

/// Largest `|y - prediction - m_M|` over a few trained models.
pub fn telescoping_worst_gap(seed: u64) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for trial in 0..5 {
        let mut rng = RandomStream::branch(seed, trial);
        let n = 40;
        let x = Array2::from_shape_fn((n, 3), |_| rng.random_range(-1.0..1.0));
        let y: Vec<f64> = x.rows().into_iter().map(|r| r[0] * r[1] + r[2]).collect();
        let cfg = TrainConfig {
            widths: vec![4, 4, 1],
            w0: 2,
            n_stages: 4,
            gamma: rng.random_range(0.05..0.9),
            k: 10,
            stochastic_ratio: 0.9,
            stabilizer: 0.01,
            seed,
        };
        let model = train_round_robin(x.view(), &y, &cfg, 3, None, &mut rng)?;
        let pred = model.predict_batch(x.view())?;
        let m = compute_residuals(&model, x.view(), &y, model.n_stages())?;
        for ((yi, pi), mi) in y.iter().zip(&pred).zip(&m) {
            worst = worst.max((yi - pi - mi).abs());
        }
    }
    Ok(worst)
}

fn identity_checks(seed: u64, instances: usize) -> Result<Vec<Check>> {
    let ratio = identity_worst_ratio(seed, instances)?;
    let gap = telescoping_worst_gap(seed)?;
    Ok(vec![
        Check::new(
            "score-sse identity",
            ratio <= 1e-9,
            format!("{instances} instances, worst relative gap {ratio:.3e}"),
        ),
        Check::new("telescoping residuals", gap <= 1e-9, format!("worst gap {gap:.3e}")),
    ])
}

pub const GRID: usize = 101;
pub const GRID_X3: f64 = 0.5;
/// Grid points this close to an active first-layer threshold are marked `?`.
pub const BOUNDARY_TOL: f64 = 1e-9;

pub const DIAMOND_BITMAP: &str = include_str!("../tests/fixtures/diamond_bitmap.txt");

/// Grid point `(row, col)` is `(x1, x2, x3) = (col / 100, row / 100, 0.5)`.
pub fn grid_points() -> Array2<f64> {
    let last = (GRID - 1) as f64;
    Array2::from_shape_fn((GRID * GRID, 3), |(i, j)| match j {
        0 => (i % GRID) as f64 / last,
        1 => (i / GRID) as f64 / last,
        _ => GRID_X3,
    })
}

/// The network's output on the grid, one text line per row, `?` near a
/// first-layer threshold of an active neuron.
pub fn render_bitmap(net: &IndicatorNetwork) -> Result<String> {
    let pts = grid_points();
    let out = net.forward_batch(pts.view())?;
    let active = net.active_set();
    let mut s = String::with_capacity(GRID * (GRID + 1));
    for (i, row) in pts.rows().into_iter().enumerate() {
        let near = active.iter().filter(|p| p.layer == 0).any(|&p| {
            let n = net.neuron(p);
            (n.pre_activation(|j| row[j]) - n.bias()).abs() < BOUNDARY_TOL
        });
        s.push(match (near, out[i]) {
            (true, _) => '?',
            (false, true) => '1',
            (false, false) => '0',
        });
        if i % GRID == GRID - 1 {
            s.push('\n');
        }
    }
    Ok(s)
}

fn fixture_checks() -> Result<Vec<Check>> {
    let net = diamond_network()?;
    let rendered = render_bitmap(&net)?;
    let ones = rendered.chars().filter(|&c| c == '1').count();
    let unsure = rendered.chars().filter(|&c| c == '?').count();
    let a = net.forward(&[0.5, 0.6, 0.3])?;
    let b = net.forward(&[0.0, 0.0, 0.0])?;
    Ok(vec![
        Check::new(
            "bitmap matches checked-in grid",
            rendered == DIAMOND_BITMAP,
            format!("{GRID}x{GRID} grid, {ones} positive, {unsure} boundary"),
        ),
        Check::new("positive region nonempty", ones > 0, format!("{ones} positive points")),
        Check::new(
            "first-layer hand evaluations",
            a.layers[0][0] && !b.layers[0][0] && b.layers[0][1],
            "f(0.5,0.6,0.3) = 1, f(0) = 0, g(0) = 1",
        ),
    ])
}

pub const CONVERGENCE_N: usize = 10;
pub const CONVERGENCE_RUNS: usize = 20;
pub const CONVERGENCE_CHECKPOINTS: [usize; 2] = [200, 2000];
pub const CONVERGENCE_TOL: f64 = 1e-9;

/// Ten points in `[0, 1]^2` with standard normal targets, fixed by `seed`.
pub fn convergence_instance(seed: u64) -> (Array2<f64>, Vec<f64>) {
    let mut rng = RandomStream::new(seed);
    let x = Array2::from_shape_fn((CONVERGENCE_N, 2), |_| rng.random::<f64>());
    let y = (0..CONVERGENCE_N).map(|_| rng.sample(StandardNormal)).collect();
    (x, y)
}

pub fn convergence_config() -> TrainConfig {
    TrainConfig {
        widths: vec![4, 1],
        w0: 2,
        n_stages: 1,
        gamma: 1.0,
        k: 10,
        stochastic_ratio: 1.0,
        stabilizer: 0.0,
        seed: 0,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceOutcome {
    pub oracle_sse: f64,
    pub checkpoints: Vec<usize>,
    pub hit_rates: Vec<f64>,
    /// Every final labeling was in the oracle's reachable set.
    pub labelings_reachable: bool,
    /// No run ever reported an SSE below the oracle value.
    pub oracle_lower_bound: bool,
}

/// Runs `runs` seeded optimizations of architecture A to the last
/// checkpoint, recording the fraction that sit at the oracle optimum.
pub fn convergence_experiment(
    instance_seed: u64,
    runs: usize,
    checkpoints: &[usize],
) -> Result<ConvergenceOutcome> {
    let (x, y) = convergence_instance(instance_seed);
    let cfg = convergence_config();
    let arch = cfg.architecture(2)?;
    let oracle = oracle_min_sse(x.view(), &y, &arch)?;
    let last = checkpoints.iter().copied().max().unwrap_or(0);
    let per_run = (0..runs as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = RandomStream::branch(instance_seed, r);
            let mut trace = Vec::with_capacity(last);
            let model = train_round_robin_traced(x.view(), &y, &cfg, last, None, &mut rng, |_, sse| {
                trace.push(sse)
            })?;
            let labels = model.stages()[0].network.forward_batch(x.view())?;
            Ok((trace, to_mask(&labels)))
        })
        .collect::<Result<Vec<_>>>()?;
    let hit_rates = checkpoints
        .iter()
        .map(|&b| {
            let hits = per_run
                .iter()
                .filter(|(trace, _)| {
                    let sse = if b == 0 { f64::INFINITY } else { trace[b - 1] };
                    (sse - oracle.min_sse).abs() <= CONVERGENCE_TOL
                })
                .count();
            hits as f64 / runs as f64
        })
        .collect();
    Ok(ConvergenceOutcome {
        oracle_sse: oracle.min_sse,
        checkpoints: checkpoints.to_vec(),
        hit_rates,
        labelings_reachable: per_run.iter().all(|(_, m)| oracle.labelings.contains(*m)),
        oracle_lower_bound: per_run
            .iter()
            .all(|(t, _)| t.iter().all(|&s| s >= oracle.min_sse - CONVERGENCE_TOL)),
    })
}

fn convergence_checks(seed: u64) -> Result<Vec<Check>> {
    let out = convergence_experiment(seed, CONVERGENCE_RUNS, &CONVERGENCE_CHECKPOINTS)?;
    let rates: Vec<String> = out
        .checkpoints
        .iter()
        .zip(&out.hit_rates)
        .map(|(b, r)| format!("b={b}: {r:.2}"))
        .collect();
    let thresholds = [0.6, 0.9];
    let meets = out.hit_rates.iter().zip(thresholds).all(|(r, t)| *r >= t);
    let monotone = out.hit_rates.windows(2).all(|w| w[0] <= w[1]);
    Ok(vec![
        Check::new(
            "hit rate reaches oracle optimum",
            meets && monotone,
            format!("oracle {:.6}, {}", out.oracle_sse, rates.join(", ")),
        ),
        Check::new("final labelings reachable", out.labelings_reachable, "every run inside the enumerated set"),
        Check::new("oracle lower-bounds training SSE", out.oracle_lower_bound, "all rounds of all runs"),
    ])
}
