//! Adversarially-trained NMF and the standard-NMF baseline.
//!
//! Both solvers run on masked data: entries outside the [`ObservationMask`]
//! are never read from `V`, so held-out values cannot leak into training.
//!
//! The adversarial solver alternates two steps. The outer step replaces the
//! perturbation `R` with its closed-form maximizer for the current
//! reconstruction. The inner loop then runs masked multiplicative sweeps (one
//! `H` update followed by one `W` update) against `U = V + R` until the
//! relative change of `WH` drops below `eps_in` or `max_inner` sweeps have
//! run. The outer loop stops once the reconstruction moves less than
//! `eps_out` between consecutive outer iterations or after `max_outer`
//! iterations.

mod oracle;
mod updates;

use std::io::Write;

use crate::error::{Error, Result};
use crate::matrix::{self, Matrix, NonnegMatrix, ObservationMask, DEFAULT_DIV_FLOOR};
use crate::sampling::{sample_matrix_half_normal, HalfNormalParams, RngState};

pub use oracle::scalar_r_oracle;
pub use updates::{mm_update_h, mm_update_w, objective, relative_change, update_r};

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    /// Penalty on the adversary's energy; must exceed 1.
    pub lambda: f64,
    pub k: usize,
    pub eps_in: f64,
    pub eps_out: f64,
    pub max_inner: usize,
    pub max_outer: usize,
    /// Plain masked MM sweeps run on `V` right after random initialization.
    pub init_mm_steps: usize,
    pub div_floor: f64,
    /// Keep the masked loss after every inner sweep in the trace.
    pub record_inner_losses: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            lambda: 2.0,
            k: 5,
            eps_in: 0.01,
            eps_out: 0.01,
            max_inner: 1000,
            max_outer: 100,
            init_mm_steps: 5,
            div_floor: DEFAULT_DIV_FLOOR,
            record_inner_losses: false,
        }
    }
}

impl SolverConfig {
    /// Default stopping parameters with the given `lambda` and rank.
    pub fn new(lambda: f64, k: usize) -> Result<Self> {
        let cfg = SolverConfig {
            lambda,
            k,
            ..SolverConfig::default()
        };
        cfg.validate(true)?;
        Ok(cfg)
    }

    /// Checks every field; `lambda` only matters when `with_lambda` is set.
    pub fn validate(&self, with_lambda: bool) -> Result<()> {
        if with_lambda {
            updates::check_lambda(self.lambda)?;
        }
        if self.k == 0 {
            return Err(Error::config("k", "must be at least 1"));
        }
        if !(self.eps_in > 0.0) {
            return Err(Error::config("eps_in", format!("must be positive, got {}", self.eps_in)));
        }
        if !(self.eps_out > 0.0) {
            return Err(Error::config("eps_out", format!("must be positive, got {}", self.eps_out)));
        }
        if self.max_inner == 0 {
            return Err(Error::config("max_inner", "must be at least 1"));
        }
        if self.max_outer == 0 {
            return Err(Error::config("max_outer", "must be at least 1"));
        }
        if !(self.div_floor > 0.0) {
            return Err(Error::config("div_floor", format!("must be positive, got {}", self.div_floor)));
        }
        Ok(())
    }
}

/// Dictionary `W` (F×K) and coefficients `H` (K×N).
#[derive(Clone, Debug, PartialEq)]
pub struct FactorPair {
    pub w: NonnegMatrix,
    pub h: NonnegMatrix,
}

impl FactorPair {
    pub fn new(w: NonnegMatrix, h: NonnegMatrix) -> Result<Self> {
        if w.cols() != h.rows() {
            return Err(Error::Dimension {
                op: "FactorPair::new",
                left: w.shape(),
                right: h.shape(),
            });
        }
        Ok(FactorPair { w, h })
    }

    pub fn k(&self) -> usize {
        self.w.cols()
    }

    /// `WH`.
    pub fn reconstruct(&self) -> Result<Matrix> {
        matrix::matmul(&self.w, &self.h)
    }
}

/// Adversarial perturbation `R`; zero wherever the data is unobserved.
#[derive(Clone, Debug, PartialEq)]
pub struct Perturbation(Matrix);

impl From<Matrix> for Perturbation {
    fn from(m: Matrix) -> Self {
        Perturbation(m)
    }
}

impl Perturbation {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Perturbation(Matrix::zeros(rows, cols))
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }

    pub fn shape(&self) -> (usize, usize) {
        self.0.shape()
    }

    pub fn norm_sq(&self) -> f64 {
        matrix::frobenius_sq(&self.0)
    }

    /// Smallest `v + r` over observed entries (`+inf` for an empty mask).
    pub fn min_observed_sum(&self, v: &Matrix, mask: &ObservationMask) -> f64 {
        v.as_slice()
            .iter()
            .zip(self.0.as_slice())
            .zip(mask.bits())
            .filter(|(_, &observed)| observed)
            .map(|((x, dx), _)| x + dx)
            .fold(f64::INFINITY, f64::min)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceRecord {
    pub outer: usize,
    pub inner_iters: usize,
    /// `‖M∘(V+R−WH)‖² − λ‖M∘R‖²` at the end of the outer iteration.
    pub objective: f64,
    pub fit: f64,
    pub r_norm_sq: f64,
    /// Masked loss against `U` before the first sweep and after each sweep;
    /// empty unless [`SolverConfig::record_inner_losses`] is set.
    pub inner_losses: Vec<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SolveTrace {
    pub records: Vec<TraceRecord>,
}

impl SolveTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn total_inner_iters(&self) -> usize {
        self.records.iter().map(|r| r.inner_iters).sum()
    }

    /// CSV with header `outer,inner_iters,objective,fit,r_norm_sq`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "outer,inner_iters,objective,fit,r_norm_sq")?;
        for r in &self.records {
            writeln!(out, "{},{},{},{},{}", r.outer, r.inner_iters, r.objective, r.fit, r.r_norm_sq)?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Solution {
    pub factors: FactorPair,
    /// Final adversary; all zeros for the standard-NMF baseline.
    pub perturbation: Perturbation,
    pub trace: SolveTrace,
}

impl Solution {
    pub fn reconstruct(&self) -> Result<Matrix> {
        self.factors.reconstruct()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Method {
    Nmf,
    AtNmf,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Nmf => "nmf",
            Method::AtNmf => "atnmf",
        }
    }

    pub fn solve(self, v: &NonnegMatrix, mask: &ObservationMask, cfg: &SolverConfig, rng: &mut RngState) -> Result<Solution> {
        match self {
            Method::Nmf => standard_nmf(v, mask, cfg, rng),
            Method::AtNmf => at_nmf(v, mask, cfg, rng),
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "nmf" => Ok(Method::Nmf),
            "atnmf" | "at-nmf" | "at_nmf" => Ok(Method::AtNmf),
            other => Err(Error::config("method", format!("unknown method {other:?} (expected nmf or atnmf)"))),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

fn check_problem(v: &NonnegMatrix, mask: &ObservationMask) -> Result<()> {
    if v.shape() != mask.shape() {
        return Err(Error::Dimension {
            op: "solve",
            left: v.shape(),
            right: mask.shape(),
        });
    }
    if mask.observed_count() == 0 {
        return Err(Error::InvalidInput("mask has no observed entries".into()));
    }
    Ok(())
}

/// Masked MM state for a fixed effective data matrix.
struct InnerLoop<'a> {
    mu: Matrix,
    mask: &'a ObservationMask,
    floor: f64,
}

impl InnerLoop<'_> {
    /// One `H` then one `W` update; returns the new reconstruction.
    fn sweep(&self, w: &mut NonnegMatrix, h: &mut NonnegMatrix, wh: &Matrix) -> Result<Matrix> {
        *h = updates::h_step(&self.mu, self.mask, w, h, wh, self.floor)?;
        let wh_mid = matrix::matmul(w, h)?;
        *w = updates::w_step(&self.mu, self.mask, w, h, &wh_mid, self.floor)?;
        matrix::matmul(w, h)
    }

    fn loss(&self, wh: &Matrix) -> Result<f64> {
        matrix::masked_sq_dist(&self.mu, wh, self.mask)
    }
}

/// Half-Normal(1) factors refined by `init_mm_steps` masked MM sweeps on `V`.
pub fn init_factors(v: &NonnegMatrix, mask: &ObservationMask, cfg: &SolverConfig, rng: &mut RngState) -> Result<FactorPair> {
    check_problem(v, mask)?;
    cfg.validate(false)?;
    let (f, n) = v.shape();
    let p = HalfNormalParams::standard();
    let mut w = sample_matrix_half_normal(rng, f, cfg.k, p);
    let mut h = sample_matrix_half_normal(rng, cfg.k, n, p);
    if cfg.init_mm_steps > 0 {
        let inner = InnerLoop {
            mu: matrix::masked(v, mask)?,
            mask,
            floor: cfg.div_floor,
        };
        let mut wh = matrix::matmul(&w, &h)?;
        for _ in 0..cfg.init_mm_steps {
            wh = inner.sweep(&mut w, &mut h, &wh)?;
        }
    }
    FactorPair::new(w, h)
}

/// Standard masked NMF with the same stopping rule as the adversarial inner
/// loop: sweeps run until the relative change of `WH` falls below `eps_in`,
/// capped at `max_inner * max_outer` sweeps. The trace holds one record per
/// block of `max_inner` sweeps.
pub fn standard_nmf(v: &NonnegMatrix, mask: &ObservationMask, cfg: &SolverConfig, rng: &mut RngState) -> Result<Solution> {
    check_problem(v, mask)?;
    cfg.validate(false)?;
    let mut factors = init_factors(v, mask, cfg, rng)?;
    let inner = InnerLoop {
        mu: matrix::masked(v, mask)?,
        mask,
        floor: cfg.div_floor,
    };
    let zero = Perturbation::zeros(v.rows(), v.cols());
    let mut trace = SolveTrace::default();
    let mut wh = factors.reconstruct()?;

    'blocks: for block in 0..cfg.max_outer {
        let mut losses = Vec::new();
        if cfg.record_inner_losses {
            losses.push(inner.loss(&wh)?);
        }
        let mut converged = false;
        let mut sweeps = 0;
        while sweeps < cfg.max_inner {
            let next = inner.sweep(&mut factors.w, &mut factors.h, &wh)?;
            sweeps += 1;
            let change = relative_change(&next, &wh, cfg.div_floor)?;
            wh = next;
            if cfg.record_inner_losses {
                losses.push(inner.loss(&wh)?);
            }
            if change < cfg.eps_in {
                converged = true;
                break;
            }
        }
        let fit = inner.loss(&wh)?;
        trace.records.push(TraceRecord {
            outer: block,
            inner_iters: sweeps,
            objective: fit,
            fit,
            r_norm_sq: 0.0,
            inner_losses: losses,
        });
        if converged {
            break 'blocks;
        }
    }
    Ok(Solution {
        factors,
        perturbation: zero,
        trace,
    })
}

/// Adversarially-trained NMF.
pub fn at_nmf(v: &NonnegMatrix, mask: &ObservationMask, cfg: &SolverConfig, rng: &mut RngState) -> Result<Solution> {
    cfg.validate(true)?;
    check_problem(v, mask)?;
    let mut factors = init_factors(v, mask, cfg, rng)?;
    let mut wh = factors.reconstruct()?;
    let mut r = Perturbation::zeros(v.rows(), v.cols());
    let mut trace = SolveTrace::default();

    for outer in 0..cfg.max_outer {
        r = update_r(v, &wh, mask, cfg.lambda)?;
        let u = updates::effective_data(v, &r, mask)?;
        let inner = InnerLoop {
            mu: u.into_matrix(),
            mask,
            floor: cfg.div_floor,
        };
        let outer_start = wh.clone();

        let mut losses = Vec::new();
        if cfg.record_inner_losses {
            losses.push(inner.loss(&wh)?);
        }
        let mut sweeps = 0;
        while sweeps < cfg.max_inner {
            let next = inner.sweep(&mut factors.w, &mut factors.h, &wh)?;
            sweeps += 1;
            let change = relative_change(&next, &wh, cfg.div_floor)?;
            wh = next;
            if cfg.record_inner_losses {
                losses.push(inner.loss(&wh)?);
            }
            if change < cfg.eps_in {
                break;
            }
        }

        let (fit, r_norm_sq) = updates::fit_and_adversary(v, &r, &factors, mask)?;
        trace.records.push(TraceRecord {
            outer,
            inner_iters: sweeps,
            objective: fit - cfg.lambda * r_norm_sq,
            fit,
            r_norm_sq,
            inner_losses: losses,
        });
        log::debug!("outer {outer}: {sweeps} sweeps, fit {fit:.6e}, |R|^2 {r_norm_sq:.6e}");

        if relative_change(&wh, &outer_start, cfg.div_floor)? < cfg.eps_out {
            break;
        }
    }
    Ok(Solution {
        factors,
        perturbation: r,
        trace,
    })
}
