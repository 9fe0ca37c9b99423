//! Hold-out evaluation: random entry splits, RMSE on the held-out set and
//! mean ± std aggregation over independent restarts.

use rand::seq::index::sample;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matrix::{Matrix, NonnegMatrix, ObservationMask};
use crate::sampling::RngState;
use crate::solver::{Method, SolveTrace, SolverConfig};

/// Stream of `base_seed` that draws the hold-out set. Restart `r` uses stream `r`.
pub const SPLIT_STREAM: u64 = 1 << 41;

#[derive(Clone, Debug, PartialEq)]
pub struct HoldoutSplit {
    /// Training entries.
    pub mask: ObservationMask,
    /// Held-out `(row, col)` pairs in row-major order.
    pub gamma_set: Vec<(usize, usize)>,
    pub alpha: f64,
}

/// Number of held-out entries, `round(alpha · f · n)` with halves rounded away from zero.
pub fn holdout_size(f: usize, n: usize, alpha: f64) -> usize {
    (alpha * (f * n) as f64).round() as usize
}

/// Hides a uniformly random `round(alpha·F·N)` entries.
pub fn holdout_split(f: usize, n: usize, alpha: f64, rng: &mut RngState) -> Result<HoldoutSplit> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidInput(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let total = f * n;
    let held = holdout_size(f, n, alpha);
    if held == 0 || held >= total {
        return Err(Error::InvalidInput(format!(
            "alpha {alpha} holds out {held} of {total} entries; need at least one held out and one observed"
        )));
    }
    let mut bits = vec![true; total];
    for idx in sample(rng, total, held) {
        bits[idx] = false;
    }
    let gamma_set = bits
        .iter()
        .enumerate()
        .filter(|(_, &observed)| !observed)
        .map(|(idx, _)| (idx / n, idx % n))
        .collect();
    Ok(HoldoutSplit {
        mask: ObservationMask::from_bits(f, n, bits)?,
        gamma_set,
        alpha,
    })
}

/// Root mean-squared error of `vhat` against `v` over `gamma_set`.
pub fn rmse(v: &Matrix, vhat: &Matrix, gamma_set: &[(usize, usize)]) -> Result<f64> {
    if gamma_set.is_empty() {
        return Err(Error::InvalidInput("rmse needs a non-empty held-out set".into()));
    }
    if v.shape() != vhat.shape() {
        return Err(Error::Dimension {
            op: "rmse",
            left: v.shape(),
            right: vhat.shape(),
        });
    }
    let (rows, cols) = v.shape();
    let mut sum = 0.0;
    for &(i, j) in gamma_set {
        if i >= rows || j >= cols {
            return Err(Error::InvalidInput(format!("held-out index ({i}, {j}) outside {rows}x{cols}")));
        }
        let e = v.get(i, j) - vhat.get(i, j);
        sum += e * e;
    }
    Ok((sum / gamma_set.len() as f64).sqrt())
}

/// Arithmetic mean and sample (n − 1) standard deviation; std is 0 for a single value.
pub fn mean_and_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[derive(Clone, Debug)]
pub struct RunSummary {
    pub method: Method,
    pub alpha: f64,
    pub config: SolverConfig,
    pub base_seed: u64,
    /// RNG stream used by each restart, in restart order.
    pub streams: Vec<u64>,
    pub rmses: Vec<f64>,
    pub mean: f64,
    pub std: f64,
    pub traces: Vec<SolveTrace>,
}

impl RunSummary {
    pub fn restarts(&self) -> usize {
        self.rmses.len()
    }
}

/// Trains `restarts` models on one shared split and scores each on the held-out set.
pub fn run_experiment(
    v: &NonnegMatrix,
    alpha: f64,
    method: Method,
    cfg: &SolverConfig,
    restarts: usize,
    base_seed: u64,
) -> Result<RunSummary> {
    let split = holdout_split(v.rows(), v.cols(), alpha, &mut RngState::with_stream(base_seed, SPLIT_STREAM))?;
    run_on_split(v, &split, method, cfg, restarts, base_seed)
}

/// Like [`run_experiment`] with a caller-supplied split.
pub fn run_on_split(
    v: &NonnegMatrix,
    split: &HoldoutSplit,
    method: Method,
    cfg: &SolverConfig,
    restarts: usize,
    base_seed: u64,
) -> Result<RunSummary> {
    if restarts == 0 {
        return Err(Error::config("restarts", "must be at least 1"));
    }
    cfg.validate(method == Method::AtNmf)?;
    let results: Vec<Result<(f64, SolveTrace)>> = (0..restarts)
        .into_par_iter()
        .map(|r| {
            let annotate = |e: Error| Error::Restart {
                restart: r,
                source: Box::new(e),
            };
            let mut rng = RngState::with_stream(base_seed, r as u64);
            let sol = method.solve(v, &split.mask, cfg, &mut rng).map_err(annotate)?;
            let score = rmse(v, &sol.reconstruct().map_err(annotate)?, &split.gamma_set).map_err(annotate)?;
            Ok((score, sol.trace))
        })
        .collect();

    let mut rmses = Vec::with_capacity(restarts);
    let mut traces = Vec::with_capacity(restarts);
    for res in results {
        let (score, trace) = res?;
        rmses.push(score);
        traces.push(trace);
    }
    let (mean, std) = mean_and_std(&rmses);
    Ok(RunSummary {
        method,
        alpha: split.alpha,
        config: cfg.clone(),
        base_seed,
        streams: (0..restarts as u64).collect(),
        rmses,
        mean,
        std,
        traces,
    })
}
