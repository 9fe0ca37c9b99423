//! Derivative-free reference minimizer for the per-entry adversary problem.
//!
//! Used by the tests as an independent check on the closed-form update: it
//! only ever compares objective values, never solves the stationarity
//! condition.

/// `f(x) − f(y)` for `f(r) = (λ−1) r² − 2 r (v − v̂)`, factored as
/// `(x − y) [(λ−1)(x + y) − 2 (v − v̂)]` so comparisons stay accurate when
/// the minimizer is large.
fn objective_diff(x: f64, y: f64, lambda: f64, gap: f64) -> f64 {
    (x - y) * ((lambda - 1.0) * (x + y) - 2.0 * gap)
}

/// Minimizes `(λ−1) r² − 2 r (v − v̂)` over `r ≥ −v` by bracket doubling
/// followed by golden-section search.
///
/// # Panics
/// If `lambda <= 1` (the objective is then unbounded below or linear).
pub fn scalar_r_oracle(v: f64, vhat: f64, lambda: f64) -> f64 {
    assert!(lambda > 1.0, "oracle needs lambda > 1");
    let gap = v - vhat;
    let diff = |x: f64, y: f64| objective_diff(x, y, lambda, gap);

    let lo = -v;
    let mut step = 1.0;
    if diff(lo + step, lo) >= 0.0 {
        // Minimum lies in [lo, lo + 1].
    } else {
        while diff(lo + 2.0 * step, lo + step) < 0.0 {
            step *= 2.0;
        }
        step *= 2.0;
    }

    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, lo + step);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    for _ in 0..500 {
        if b - a <= 1e-10 * (1.0 + a.abs().max(b.abs())) {
            break;
        }
        if diff(c, d) < 0.0 {
            b = d;
        } else {
            a = c;
        }
        c = b - inv_phi * (b - a);
        d = a + inv_phi * (b - a);
    }
    let mid = 0.5 * (a + b);
    // The boundary itself may beat any interior probe.
    if diff(lo, mid) <= 0.0 {
        lo
    } else {
        mid
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interior_minimizer() {
        assert!((scalar_r_oracle(3.0, 1.0, 2.0) - 2.0).abs() < 1e-6);
    }

    #[test]
    fn boundary_minimizer() {
        assert!((scalar_r_oracle(1.0, 5.0, 2.0) + 1.0).abs() < 1e-6);
    }

    #[test]
    fn symmetric_case_is_zero() {
        assert!(scalar_r_oracle(4.0, 4.0, 3.0).abs() < 1e-9);
    }

    #[test]
    fn handles_weak_penalty() {
        // λ close to 1 pushes the minimizer far from the origin.
        let r = scalar_r_oracle(10.0, 0.0, 1.0 + 1e-6);
        assert!((r - 1e7).abs() < 1e-5 * 1e7, "{r}");
    }
}
