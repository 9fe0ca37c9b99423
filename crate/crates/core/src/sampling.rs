//! Seeded random sources for factor initialization and synthetic data.
//!
//! [`RngState`] is a ChaCha8 stream keyed by `(seed, stream)`: restart `r`
//! of an experiment draws from stream `r`, so restarts never share draws and
//! every one of them can be replayed in isolation.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::error::{Error, Result};
use crate::matrix::{Matrix, NonnegMatrix};

#[derive(Clone, Debug)]
pub struct RngState {
    seed: u64,
    stream: u64,
    inner: ChaCha8Rng,
}

impl RngState {
    /// Stream 0 of `seed`.
    pub fn new(seed: u64) -> Self {
        RngState::with_stream(seed, 0)
    }

    pub fn with_stream(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        RngState { seed, stream, inner }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }
}

impl RngCore for RngState {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

/// Half-Normal law `|N(0, 1/gamma)|`; `gamma` is the precision of the
/// underlying Gaussian.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HalfNormalParams {
    gamma: f64,
}

impl HalfNormalParams {
    pub fn new(gamma: f64) -> Result<Self> {
        if gamma > 0.0 && gamma.is_finite() {
            Ok(HalfNormalParams { gamma })
        } else {
            Err(Error::config("gamma", format!("must be a positive finite precision, got {gamma}")))
        }
    }

    pub fn standard() -> Self {
        HalfNormalParams { gamma: 1.0 }
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn mean(&self) -> f64 {
        (2.0 / (std::f64::consts::PI * self.gamma)).sqrt()
    }
}

/// Inverse-Gamma law with shape `a` and scale `b`, density ∝ x^(−a−1) e^(−b/x).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InverseGammaParams {
    a: f64,
    b: f64,
}

impl InverseGammaParams {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a > 1.0 && a.is_finite()) {
            return Err(Error::config("a", format!("shape must exceed 1, got {a}")));
        }
        if !(b > 0.0 && b.is_finite()) {
            return Err(Error::config("b", format!("scale must be positive, got {b}")));
        }
        Ok(InverseGammaParams { a, b })
    }

    pub fn shape(&self) -> f64 {
        self.a
    }

    pub fn scale(&self) -> f64 {
        self.b
    }

    pub fn mean(&self) -> f64 {
        self.b / (self.a - 1.0)
    }
}

pub fn sample_half_normal(rng: &mut RngState, p: HalfNormalParams) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    (z / p.gamma.sqrt()).abs()
}

pub fn sample_inverse_gamma(rng: &mut RngState, p: InverseGammaParams) -> f64 {
    // Gamma(shape = a, rate = b) has scale 1/b.
    let gamma = Gamma::new(p.a, 1.0 / p.b).expect("validated parameters");
    loop {
        let g: f64 = gamma.sample(rng);
        if g > 0.0 {
            return 1.0 / g;
        }
    }
}

/// Row-major matrix of independent Half-Normal draws.
pub fn sample_matrix_half_normal(rng: &mut RngState, rows: usize, cols: usize, p: HalfNormalParams) -> NonnegMatrix {
    let data = (0..rows * cols).map(|_| sample_half_normal(rng, p)).collect();
    NonnegMatrix::from_raw(Matrix::from_vec(rows, cols, data).expect("positive dimensions"))
}
