use crate::error::{Error, Result};
use crate::matrix::{self, Matrix, NonnegMatrix, ObservationMask};

use super::{FactorPair, Perturbation};

pub(crate) fn check_lambda(lambda: f64) -> Result<()> {
    if lambda > 1.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(Error::config(
            "lambda",
            format!("must be finite and > 1 (the adversary is unbounded or degenerate for lambda <= 1), got {lambda}"),
        ))
    }
}

fn check_shape(op: &'static str, a: (usize, usize), b: (usize, usize)) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(Error::Dimension { op, left: a, right: b })
    }
}

/// Closed-form worst-case perturbation for fixed factors.
///
/// On observed entries `r = max((v − v̂)/(λ − 1), −v)`; unobserved entries
/// are left at zero and their data values are never read.
pub fn update_r(v: &NonnegMatrix, vhat: &Matrix, mask: &ObservationMask, lambda: f64) -> Result<Perturbation> {
    check_lambda(lambda)?;
    check_shape("update_r", v.shape(), vhat.shape())?;
    check_shape("update_r", v.shape(), mask.shape())?;
    let scale = lambda - 1.0;
    let data = v
        .as_slice()
        .iter()
        .zip(vhat.as_slice())
        .zip(mask.bits())
        .map(|((&x, &xhat), &observed)| if observed { ((x - xhat) / scale).max(-x) } else { 0.0 })
        .collect();
    Ok(Perturbation(Matrix::from_vec(v.rows(), v.cols(), data)?))
}

/// Effective data `M ∘ (V + R)`; nonnegative on observed entries by
/// construction of `R`.
pub(crate) fn effective_data(v: &NonnegMatrix, r: &Perturbation, mask: &ObservationMask) -> Result<NonnegMatrix> {
    check_shape("effective_data", v.shape(), r.shape())?;
    check_shape("effective_data", v.shape(), mask.shape())?;
    let data = v
        .as_slice()
        .iter()
        .zip(r.as_matrix().as_slice())
        .zip(mask.bits())
        .map(|((&x, &dx), &observed)| if observed { (x + dx).max(0.0) } else { 0.0 })
        .collect();
    NonnegMatrix::new(Matrix::from_vec(v.rows(), v.cols(), data)?)
}

fn multiplicative(x: &Matrix, num: &Matrix, den: &Matrix, floor: f64) -> Result<NonnegMatrix> {
    let ratio = matrix::elementwise_div(num, den, floor)?;
    Ok(NonnegMatrix::from_raw(matrix::elementwise_mul(x, &ratio)?))
}

fn check_factors(op: &'static str, u: &Matrix, mask: &ObservationMask, f: &FactorPair) -> Result<()> {
    check_shape(op, u.shape(), mask.shape())?;
    check_shape(op, (u.rows(), u.cols()), (f.w.rows(), f.h.cols()))?;
    if f.w.cols() != f.h.rows() {
        return Err(Error::Dimension {
            op,
            left: f.w.shape(),
            right: f.h.shape(),
        });
    }
    Ok(())
}

/// `H ∘ [Wᵀ(M∘U)] ⊘ [Wᵀ(M∘WH)]` given the current reconstruction `WH`.
pub(crate) fn h_step(mu: &Matrix, mask: &ObservationMask, w: &Matrix, h: &Matrix, wh: &Matrix, floor: f64) -> Result<NonnegMatrix> {
    let num = matrix::matmul_tn(w, mu)?;
    let den = matrix::matmul_tn(w, &matrix::masked(wh, mask)?)?;
    multiplicative(h, &num, &den, floor)
}

/// `W ∘ [(M∘U)Hᵀ] ⊘ [(M∘WH)Hᵀ]` given the current reconstruction `WH`.
pub(crate) fn w_step(mu: &Matrix, mask: &ObservationMask, w: &Matrix, h: &Matrix, wh: &Matrix, floor: f64) -> Result<NonnegMatrix> {
    let num = matrix::matmul_nt(mu, h)?;
    let den = matrix::matmul_nt(&matrix::masked(wh, mask)?, h)?;
    multiplicative(w, &num, &den, floor)
}

/// Masked multiplicative update of the coefficients. With a full mask this
/// is the classical Frobenius-loss MM step `H ∘ WᵀU ⊘ WᵀWH`.
pub fn mm_update_h(u: &NonnegMatrix, mask: &ObservationMask, f: &FactorPair, floor: f64) -> Result<NonnegMatrix> {
    check_factors("mm_update_h", u, mask, f)?;
    let mu = matrix::masked(u, mask)?;
    let wh = f.reconstruct()?;
    h_step(&mu, mask, &f.w, &f.h, &wh, floor)
}

/// Masked multiplicative update of the dictionary, the transpose mirror of
/// [`mm_update_h`].
pub fn mm_update_w(u: &NonnegMatrix, mask: &ObservationMask, f: &FactorPair, floor: f64) -> Result<NonnegMatrix> {
    check_factors("mm_update_w", u, mask, f)?;
    let mu = matrix::masked(u, mask)?;
    let wh = f.reconstruct()?;
    w_step(&mu, mask, &f.w, &f.h, &wh, floor)
}

/// Frobenius norm of the elementwise relative change
/// `(new − old) / max(old, floor)`.
pub fn relative_change(vhat_new: &Matrix, vhat_old: &Matrix, floor: f64) -> Result<f64> {
    check_shape("relative_change", vhat_new.shape(), vhat_old.shape())?;
    let sum: f64 = vhat_new
        .as_slice()
        .iter()
        .zip(vhat_old.as_slice())
        .map(|(&new, &old)| {
            let q = (new - old) / old.max(floor);
            q * q
        })
        .sum();
    Ok(sum.sqrt())
}

/// Masked min-max objective `‖M∘(V + R − WH)‖² − λ‖M∘R‖²`.
pub fn objective(v: &NonnegMatrix, r: &Perturbation, f: &FactorPair, mask: &ObservationMask, lambda: f64) -> Result<f64> {
    let (fit, r_norm_sq) = fit_and_adversary(v, r, f, mask)?;
    Ok(fit - lambda * r_norm_sq)
}

/// `(‖M∘(V + R − WH)‖², ‖M∘R‖²)`.
pub(crate) fn fit_and_adversary(v: &NonnegMatrix, r: &Perturbation, f: &FactorPair, mask: &ObservationMask) -> Result<(f64, f64)> {
    check_factors("objective", v, mask, f)?;
    check_shape("objective", v.shape(), r.shape())?;
    let wh = f.reconstruct()?;
    let mut fit = 0.0;
    let mut r_norm_sq = 0.0;
    for (((&x, &dx), &xhat), &observed) in v
        .as_slice()
        .iter()
        .zip(r.as_matrix().as_slice())
        .zip(wh.as_slice())
        .zip(mask.bits())
    {
        if observed {
            let e = x + dx - xhat;
            fit += e * e;
            r_norm_sq += dx * dx;
        }
    }
    Ok((fit, r_norm_sq))
}
