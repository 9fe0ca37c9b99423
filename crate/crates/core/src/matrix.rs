//! Dense row-major matrices and the elementwise / product kernels the
//! factorization updates are built from.
//!
//! Every constructor rejects non-finite entries and every exported operation
//! re-checks its output, so a [`Matrix`] in hand is always finite.

use std::fmt;
use std::ops::Deref;

use crate::error::{Error, Result};

/// Default floor applied to denominators of elementwise divisions.
pub const DEFAULT_DIV_FLOOR: f64 = 1e-12;

#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    /// Builds a matrix from row-major entries.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidInput(format!(
                "matrix dimensions must be positive, got {rows}x{cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(Error::InvalidInput(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        let m = Matrix { rows, cols, data };
        m.check_finite()?;
        Ok(m)
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(nrows * ncols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != ncols {
                return Err(Error::InvalidInput(format!(
                    "row {i} has {} entries, expected {ncols}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Matrix::from_vec(nrows, ncols, data)
    }

    /// # Panics
    /// If either dimension is zero.
    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        assert!(value.is_finite(), "fill value must be finite");
        Matrix {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix::filled(rows, cols, 0.0)
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Matrix::from_vec(rows, cols, data)
    }

    /// Caller guarantees shape and finiteness.
    pub(crate) fn from_raw(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), rows * cols);
        Matrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// # Panics
    /// If the index is out of bounds.
    pub fn get(&self, row: usize, col: usize) -> f64 {
        assert!(row < self.rows && col < self.cols, "index out of bounds");
        self.data[row * self.cols + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.data[row * self.cols..(row + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = vec![0.0; self.data.len()];
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        Matrix::from_raw(self.cols, self.rows, out)
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    /// Applies `f` to every entry.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Matrix> {
        let out = Matrix::from_raw(self.rows, self.cols, self.data.iter().map(|&x| f(x)).collect());
        out.check_finite()?;
        Ok(out)
    }

    fn check_finite(&self) -> Result<()> {
        match self.data.iter().position(|x| !x.is_finite()) {
            None => Ok(()),
            Some(idx) => Err(Error::NonFinite {
                row: idx / self.cols,
                col: idx % self.cols,
                value: self.data[idx],
            }),
        }
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", self.row(i))?;
        }
        write!(f, "]")
    }
}

/// A matrix whose entries are all `>= 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct NonnegMatrix(Matrix);

impl NonnegMatrix {
    pub fn new(m: Matrix) -> Result<Self> {
        match m.data.iter().position(|&x| x < 0.0) {
            None => Ok(NonnegMatrix(m)),
            Some(idx) => Err(Error::NegativeEntry {
                row: idx / m.cols,
                col: idx % m.cols,
                value: m.data[idx],
            }),
        }
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        NonnegMatrix::new(Matrix::from_rows(rows)?)
    }

    pub(crate) fn from_raw(m: Matrix) -> Self {
        debug_assert!(m.data.iter().all(|&x| x >= 0.0));
        NonnegMatrix(m)
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }
}

impl Deref for NonnegMatrix {
    type Target = Matrix;

    fn deref(&self) -> &Matrix {
        &self.0
    }
}

impl TryFrom<Matrix> for NonnegMatrix {
    type Error = Error;

    fn try_from(m: Matrix) -> Result<Self> {
        NonnegMatrix::new(m)
    }
}

impl From<NonnegMatrix> for Matrix {
    fn from(m: NonnegMatrix) -> Matrix {
        m.0
    }
}

/// Binary mask over an `F x N` grid; `true` marks an observed entry.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ObservationMask {
    rows: usize,
    cols: usize,
    bits: Vec<bool>,
}

impl ObservationMask {
    pub fn full(rows: usize, cols: usize) -> Self {
        ObservationMask {
            rows,
            cols,
            bits: vec![true; rows * cols],
        }
    }

    pub fn from_bits(rows: usize, cols: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != rows * cols {
            return Err(Error::InvalidInput(format!(
                "{rows}x{cols} mask needs {} flags, got {}",
                rows * cols,
                bits.len()
            )));
        }
        Ok(ObservationMask { rows, cols, bits })
    }

    pub fn from_rows<R: AsRef<[u8]>>(rows: &[R]) -> Result<Self> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut bits = Vec::with_capacity(nrows * ncols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != ncols {
                return Err(Error::InvalidInput("ragged mask rows".into()));
            }
            bits.extend(r.iter().map(|&b| b != 0));
        }
        ObservationMask::from_bits(nrows, ncols, bits)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_observed(&self, row: usize, col: usize) -> bool {
        self.bits[row * self.cols + col]
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn observed_count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_full(&self) -> bool {
        self.bits.iter().all(|&b| b)
    }
}

fn check_same_shape(op: &'static str, a: (usize, usize), b: (usize, usize)) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(Error::Dimension {
            op,
            left: a,
            right: b,
        })
    }
}

fn zip_with(op: &'static str, a: &Matrix, b: &Matrix, f: impl Fn(f64, f64) -> f64) -> Result<Matrix> {
    check_same_shape(op, a.shape(), b.shape())?;
    let data = a.data.iter().zip(&b.data).map(|(&x, &y)| f(x, y)).collect();
    let out = Matrix::from_raw(a.rows, a.cols, data);
    out.check_finite()?;
    Ok(out)
}

/// Hadamard product `a ∘ b`.
pub fn elementwise_mul(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    zip_with("elementwise_mul", a, b, |x, y| x * y)
}

/// `a / max(b, floor)` entry by entry.
pub fn elementwise_div(a: &Matrix, b: &Matrix, floor: f64) -> Result<Matrix> {
    if !(floor > 0.0) {
        return Err(Error::InvalidInput(format!("division floor must be positive, got {floor}")));
    }
    zip_with("elementwise_div", a, b, |x, y| x / y.max(floor))
}

pub fn add(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    zip_with("add", a, b, |x, y| x + y)
}

pub fn sub(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    zip_with("sub", a, b, |x, y| x - y)
}

pub fn frobenius_sq(a: &Matrix) -> f64 {
    a.data.iter().map(|x| x * x).sum()
}

/// Zeroes every unobserved entry.
pub fn masked(a: &Matrix, m: &ObservationMask) -> Result<Matrix> {
    check_same_shape("masked", a.shape(), m.shape())?;
    let data = a
        .data
        .iter()
        .zip(&m.bits)
        .map(|(&x, &keep)| if keep { x } else { 0.0 })
        .collect();
    Ok(Matrix::from_raw(a.rows, a.cols, data))
}

/// `‖M ∘ (a − b)‖²_F` without materializing the difference.
pub fn masked_sq_dist(a: &Matrix, b: &Matrix, m: &ObservationMask) -> Result<f64> {
    check_same_shape("masked_sq_dist", a.shape(), b.shape())?;
    check_same_shape("masked_sq_dist", a.shape(), m.shape())?;
    Ok(a.data
        .iter()
        .zip(&b.data)
        .zip(&m.bits)
        .filter(|(_, &keep)| keep)
        .map(|((x, y), _)| (x - y) * (x - y))
        .sum())
}

/// Standard product `a b`.
pub fn matmul(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.cols != b.rows {
        return Err(Error::Dimension {
            op: "matmul",
            left: a.shape(),
            right: b.shape(),
        });
    }
    let (n, m, p) = (a.rows, a.cols, b.cols);
    let mut out = vec![0.0; n * p];
    for i in 0..n {
        let out_row = &mut out[i * p..(i + 1) * p];
        for k in 0..m {
            let aik = a.data[i * m + k];
            if aik == 0.0 {
                continue;
            }
            let b_row = &b.data[k * p..(k + 1) * p];
            for (o, &bkj) in out_row.iter_mut().zip(b_row) {
                *o += aik * bkj;
            }
        }
    }
    let out = Matrix::from_raw(n, p, out);
    out.check_finite()?;
    Ok(out)
}

/// `aᵀ b` without forming the transpose.
pub fn matmul_tn(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.rows != b.rows {
        return Err(Error::Dimension {
            op: "matmul_tn",
            left: a.shape(),
            right: b.shape(),
        });
    }
    let (m, n, p) = (a.rows, a.cols, b.cols);
    let mut out = vec![0.0; n * p];
    for k in 0..m {
        let a_row = &a.data[k * n..(k + 1) * n];
        let b_row = &b.data[k * p..(k + 1) * p];
        for (i, &aki) in a_row.iter().enumerate() {
            if aki == 0.0 {
                continue;
            }
            let out_row = &mut out[i * p..(i + 1) * p];
            for (o, &bkj) in out_row.iter_mut().zip(b_row) {
                *o += aki * bkj;
            }
        }
    }
    let out = Matrix::from_raw(n, p, out);
    out.check_finite()?;
    Ok(out)
}

/// `a bᵀ` without forming the transpose.
pub fn matmul_nt(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.cols != b.cols {
        return Err(Error::Dimension {
            op: "matmul_nt",
            left: a.shape(),
            right: b.shape(),
        });
    }
    let (n, m, p) = (a.rows, a.cols, b.rows);
    let mut out = vec![0.0; n * p];
    for i in 0..n {
        let a_row = &a.data[i * m..(i + 1) * m];
        for j in 0..p {
            let b_row = &b.data[j * m..(j + 1) * m];
            out[i * p + j] = a_row.iter().zip(b_row).map(|(x, y)| x * y).sum();
        }
    }
    let out = Matrix::from_raw(n, p, out);
    out.check_finite()?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn m(rows: &[&[f64]]) -> Matrix {
        Matrix::from_rows(rows).unwrap()
    }

    fn naive_matmul(a: &Matrix, b: &Matrix) -> Vec<f64> {
        let mut out = vec![0.0; a.rows() * b.cols()];
        for i in 0..a.rows() {
            for j in 0..b.cols() {
                let mut s = 0.0;
                for k in 0..a.cols() {
                    s += a.get(i, k) * b.get(k, j);
                }
                out[i * b.cols() + j] = s;
            }
        }
        out
    }

    #[test]
    fn rejects_bad_construction() {
        assert!(Matrix::from_vec(0, 2, vec![]).is_err());
        assert!(Matrix::from_vec(2, 2, vec![1.0; 3]).is_err());
        assert!(matches!(
            Matrix::from_vec(1, 2, vec![1.0, f64::NAN]),
            Err(Error::NonFinite { row: 0, col: 1, .. })
        ));
        assert!(matches!(
            NonnegMatrix::from_rows(&[[1.0, -1.0]]),
            Err(Error::NegativeEntry { row: 0, col: 1, .. })
        ));
    }

    #[test]
    fn mul_examples() {
        let a = m(&[&[1.0, 2.0], &[3.0, 4.0]]);
        assert_eq!(elementwise_mul(&a, &Matrix::filled(2, 2, 1.0)).unwrap(), a);
        assert_eq!(elementwise_mul(&m(&[&[2.0]]), &m(&[&[3.0]])).unwrap(), m(&[&[6.0]]));
        let r = m(&[&[0.3, -1.7], &[2.2, 9.1]]);
        assert_eq!(elementwise_mul(&r, &Matrix::zeros(2, 2)).unwrap().max(), 0.0);
        assert!(matches!(
            elementwise_mul(&a, &Matrix::zeros(1, 2)),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn div_examples() {
        assert_eq!(elementwise_div(&m(&[&[6.0]]), &m(&[&[3.0]]), DEFAULT_DIV_FLOOR).unwrap(), m(&[&[2.0]]));
        let q = elementwise_div(&m(&[&[1.0]]), &m(&[&[0.0]]), 1e-12).unwrap();
        assert_eq!(q.get(0, 0), 1e12);
        let a = m(&[&[0.5, 2.0], &[3.0, 7.25]]);
        assert_eq!(elementwise_div(&a, &a, DEFAULT_DIV_FLOOR).unwrap(), Matrix::filled(2, 2, 1.0));
        assert!(elementwise_div(&a, &a, 0.0).is_err());
        assert!(elementwise_div(&a, &Matrix::zeros(2, 1), 1.0).is_err());
    }

    #[test]
    fn frobenius_examples() {
        assert_eq!(frobenius_sq(&m(&[&[3.0, 4.0]])), 25.0);
        assert_eq!(frobenius_sq(&Matrix::zeros(3, 2)), 0.0);
        assert_eq!(frobenius_sq(&Matrix::filled(2, 2, 1.0)), 4.0);
    }

    #[test]
    fn masked_examples() {
        let a = m(&[&[1.0, 2.0], &[3.0, 4.0]]);
        assert_eq!(masked(&a, &ObservationMask::full(2, 2)).unwrap(), a);
        let none = ObservationMask::from_bits(2, 2, vec![false; 4]).unwrap();
        assert_eq!(masked(&a, &none).unwrap(), Matrix::zeros(2, 2));
        let diag = ObservationMask::from_rows(&[[1u8, 0], [0, 1]]).unwrap();
        assert_eq!(masked(&a, &diag).unwrap(), m(&[&[1.0, 0.0], &[0.0, 4.0]]));
        assert!(masked(&a, &ObservationMask::full(3, 2)).is_err());
    }

    #[test]
    fn matmul_examples() {
        let b = m(&[&[5.0, 6.0], &[7.0, 8.0]]);
        assert_eq!(matmul(&Matrix::identity(2), &b).unwrap(), b);
        assert_eq!(matmul(&m(&[&[1.0, 2.0]]), &m(&[&[3.0], &[4.0]])).unwrap(), m(&[&[11.0]]));
        assert!(matmul(&b, &Matrix::zeros(3, 1)).is_err());

        let a = m(&[&[0.2, 1.5], &[-3.0, 0.7], &[2.5, 4.0]]);
        let b = m(&[&[1.0, -2.0, 0.5, 3.0], &[0.25, 0.0, 6.0, -1.0]]);
        let got = matmul(&a, &b).unwrap();
        for (x, y) in got.as_slice().iter().zip(naive_matmul(&a, &b)) {
            assert!((x - y).abs() <= 1e-12 * y.abs().max(1.0));
        }
    }

    #[test]
    fn transposed_products_agree() {
        let a = m(&[&[0.2, 1.5], &[3.0, 0.7], &[2.5, 4.0]]);
        let b = m(&[&[1.0, 2.0, 0.5], &[0.25, 0.0, 6.0], &[1.0, 1.0, 1.0]]);
        assert_eq!(matmul_tn(&a, &b).unwrap(), matmul(&a.transpose(), &b).unwrap());
        let c = m(&[&[1.0, 2.0], &[0.5, 0.25]]);
        assert_eq!(matmul_nt(&a, &c).unwrap(), matmul(&a, &c.transpose()).unwrap());
    }

    fn arb_pair() -> impl Strategy<Value = (Matrix, Matrix)> {
        (1usize..8, 1usize..8).prop_flat_map(|(r, c)| {
            (
                proptest::collection::vec(-10.0f64..10.0, r * c),
                proptest::collection::vec(-10.0f64..10.0, r * c),
            )
                .prop_map(move |(x, y)| (Matrix::from_vec(r, c, x).unwrap(), Matrix::from_vec(r, c, y).unwrap()))
        })
    }

    fn arb_masked() -> impl Strategy<Value = (Matrix, ObservationMask)> {
        (1usize..8, 1usize..8).prop_flat_map(|(r, c)| {
            (
                proptest::collection::vec(-10.0f64..10.0, r * c),
                proptest::collection::vec(any::<bool>(), r * c),
            )
                .prop_map(move |(x, b)| {
                    (Matrix::from_vec(r, c, x).unwrap(), ObservationMask::from_bits(r, c, b).unwrap())
                })
        })
    }

    proptest! {
        #[test]
        fn masking_never_grows_norm_and_is_idempotent((a, mask) in arb_masked()) {
            let once = masked(&a, &mask).unwrap();
            prop_assert!(frobenius_sq(&once) <= frobenius_sq(&a));
            prop_assert_eq!(masked(&once, &mask).unwrap(), once);
        }

        #[test]
        fn hadamard_commutes_and_associates((a, b) in arb_pair()) {
            prop_assert_eq!(elementwise_mul(&a, &b).unwrap(), elementwise_mul(&b, &a).unwrap());
            let c = a.map(|x| x * 0.5 + 1.0).unwrap();
            let left = elementwise_mul(&elementwise_mul(&a, &b).unwrap(), &c).unwrap();
            let right = elementwise_mul(&a, &elementwise_mul(&b, &c).unwrap()).unwrap();
            for (x, y) in left.as_slice().iter().zip(right.as_slice()) {
                prop_assert!((x - y).abs() <= 4.0 * f64::EPSILON * x.abs().max(1e-300));
            }
        }

        #[test]
        fn matmul_matches_triple_loop(
            (n, k, p) in (1usize..=20, 1usize..=20, 1usize..=20),
            seed in any::<u64>(),
        ) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let a = Matrix::from_fn(n, k, |_, _| rng.random_range(-1.0..1.0)).unwrap();
            let b = Matrix::from_fn(k, p, |_, _| rng.random_range(-1.0..1.0)).unwrap();
            let got = matmul(&a, &b).unwrap();
            let want = naive_matmul(&a, &b);
            let err: f64 = got.as_slice().iter().zip(&want).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
            let norm: f64 = want.iter().map(|y| y * y).sum::<f64>().sqrt();
            prop_assert!(err <= 1e-12 * norm.max(1e-300));
        }
    }
}
