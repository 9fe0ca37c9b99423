//! Loaders for user-supplied data.
//!
//! Dense text format: a header line `F N`, then `F` lines of `N`
//! whitespace-separated decimal reals. Lines starting with `#` are comments
//! and blank lines are ignored. Writers emit the shortest representation
//! that parses back to the same `f64`, so a write/read cycle is lossless.
//!
//! Hyperspectral cubes are raw little-endian `f64` in band-major order: all
//! pixels of band 0, then all pixels of band 1, and so on.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::matrix::{Matrix, NonnegMatrix};

/// Parses the dense text format into an arbitrary-sign matrix.
pub fn parse_dense(text: &str) -> Result<Matrix> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| {
            let t = l.trim_start();
            !t.is_empty() && !t.starts_with('#')
        });

    let (header_no, header) = lines.next().ok_or(Error::Parse {
        line: 1,
        col: 1,
        msg: "missing \"F N\" header".into(),
    })?;
    let dims = tokens(header)
        .map(|(col, tok)| {
            tok.parse::<usize>().ok().filter(|&d| d > 0).ok_or_else(|| Error::Parse {
                line: header_no,
                col,
                msg: format!("expected a positive integer dimension, found {tok:?}"),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let &[rows, cols] = dims.as_slice() else {
        return Err(Error::Parse {
            line: header_no,
            col: 1,
            msg: format!("header must hold exactly two integers, found {}", dims.len()),
        });
    };

    let mut data = Vec::with_capacity(rows * cols);
    let mut seen_rows = 0;
    for (line_no, line) in lines {
        if seen_rows == rows {
            return Err(Error::Parse {
                line: line_no,
                col: 1,
                msg: format!("more than the {rows} declared rows"),
            });
        }
        let mut count = 0;
        for (col, tok) in tokens(line) {
            let value: f64 = tok.parse().map_err(|_| Error::Parse {
                line: line_no,
                col,
                msg: format!("invalid number {tok:?}"),
            })?;
            if !value.is_finite() {
                return Err(Error::Parse {
                    line: line_no,
                    col,
                    msg: format!("non-finite value {tok:?}"),
                });
            }
            count += 1;
            if count > cols {
                return Err(Error::Parse {
                    line: line_no,
                    col,
                    msg: format!("more than the {cols} declared columns"),
                });
            }
            data.push(value);
        }
        if count < cols {
            return Err(Error::Parse {
                line: line_no,
                col: line.len() + 1,
                msg: format!("expected {cols} values, found {count}"),
            });
        }
        seen_rows += 1;
    }
    if seen_rows < rows {
        return Err(Error::Parse {
            line: text.lines().count() + 1,
            col: 1,
            msg: format!("expected {rows} rows, found {seen_rows}"),
        });
    }
    Matrix::from_vec(rows, cols, data)
}

/// Whitespace-separated tokens with their 1-based column.
fn tokens(line: &str) -> impl Iterator<Item = (usize, &str)> {
    line.split_whitespace().map(move |tok| {
        let offset = tok.as_ptr() as usize - line.as_ptr() as usize;
        (offset + 1, tok)
    })
}

pub fn format_dense(m: &Matrix) -> String {
    let mut out = String::with_capacity(m.len() * 12);
    writeln!(out, "{} {}", m.rows(), m.cols()).unwrap();
    for i in 0..m.rows() {
        let row = m.row(i);
        for (j, x) in row.iter().enumerate() {
            if j > 0 {
                out.push(' ');
            }
            write!(out, "{x}").unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn read_dense(path: impl AsRef<Path>) -> Result<Matrix> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_dense(&text)
}

pub fn write_dense(m: &Matrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format_dense(m)).map_err(|e| Error::io(path, e))
}

/// Reads a dense file that must be entrywise nonnegative.
pub fn load_dense(path: impl AsRef<Path>) -> Result<NonnegMatrix> {
    NonnegMatrix::new(read_dense(path)?)
}

/// Per-image normalization: each column is shifted and scaled to mean 0.25
/// and standard deviation 0.25, then clipped to `[0, 1]`. Constant columns
/// become all 0.25.
pub fn normalize_cbcl(images: &Matrix) -> Result<NonnegMatrix> {
    let (rows, cols) = images.shape();
    let mut out = images.as_slice().to_vec();
    for j in 0..cols {
        let column = (0..rows).map(|i| images.get(i, j));
        let mean = column.clone().sum::<f64>() / rows as f64;
        let var = column.map(|x| (x - mean) * (x - mean)).sum::<f64>() / rows as f64;
        let std = var.sqrt();
        for i in 0..rows {
            let slot = &mut out[i * cols + j];
            *slot = if std > 0.0 {
                (0.25 + 0.25 * (*slot - mean) / std).clamp(0.0, 1.0)
            } else {
                0.25
            };
        }
        if std == 0.0 {
            log::warn!("column {j} is constant; replaced with 0.25");
        }
    }
    NonnegMatrix::new(Matrix::from_vec(rows, cols, out)?)
}

/// Divides by the global maximum so the largest entry becomes 1.
pub fn unit_scale(m: &NonnegMatrix) -> Result<NonnegMatrix> {
    let max = m.max();
    if max == 0.0 {
        log::warn!("all-zero matrix left unscaled");
        return Ok(m.clone());
    }
    NonnegMatrix::new(m.map(|x| x / max)?)
}

/// Parses a band-major little-endian `f64` cube into a `bands x (width·height)`
/// matrix without rescaling.
pub fn parse_cube(bytes: &[u8], bands: usize, width: usize, height: usize) -> Result<NonnegMatrix> {
    let pixels = width * height;
    let expected = bands * pixels * 8;
    if bands == 0 || pixels == 0 || bytes.len() != expected {
        return Err(Error::Dimension {
            op: "load_hyperspectral",
            left: (bands, pixels),
            right: (bytes.len() / 8, bytes.len() % 8),
        });
    }
    let data = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    NonnegMatrix::new(Matrix::from_vec(bands, pixels, data)?)
}

/// Loads a raw cube and rescales it to `[0, 1]` by its global maximum.
pub fn load_hyperspectral(path: impl AsRef<Path>, bands: usize, width: usize, height: usize) -> Result<NonnegMatrix> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    unit_scale(&parse_cube(&bytes, bands, width, height)?)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DatasetKind {
    Dense,
    /// Dense file whose columns are vectorized images.
    ImageGrid,
    HyperspectralCube { bands: usize, width: usize, height: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Normalization {
    #[default]
    None,
    Cbcl,
    UnitScale,
}

impl std::str::FromStr for Normalization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "none" => Ok(Normalization::None),
            "cbcl" => Ok(Normalization::Cbcl),
            "unit-scale" | "unit_scale" => Ok(Normalization::UnitScale),
            other => Err(Error::config("normalization", format!("unknown value {other:?}"))),
        }
    }
}

impl Normalization {
    pub fn name(self) -> &'static str {
        match self {
            Normalization::None => "none",
            Normalization::Cbcl => "cbcl",
            Normalization::UnitScale => "unit-scale",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetDescriptor {
    pub kind: DatasetKind,
    pub path: PathBuf,
    pub normalization: Normalization,
    pub expected_f: Option<usize>,
    pub expected_n: Option<usize>,
}

impl DatasetDescriptor {
    pub fn dense(path: impl Into<PathBuf>) -> Self {
        DatasetDescriptor {
            kind: DatasetKind::Dense,
            path: path.into(),
            normalization: Normalization::None,
            expected_f: None,
            expected_n: None,
        }
    }

    pub fn load(&self) -> Result<NonnegMatrix> {
        let raw = match self.kind {
            DatasetKind::Dense | DatasetKind::ImageGrid => read_dense(&self.path)?,
            DatasetKind::HyperspectralCube { bands, width, height } => {
                load_hyperspectral(&self.path, bands, width, height)?.into_matrix()
            }
        };
        let (f, n) = raw.shape();
        if self.expected_f.is_some_and(|e| e != f) || self.expected_n.is_some_and(|e| e != n) {
            return Err(Error::Dimension {
                op: "dataset",
                left: (f, n),
                right: (self.expected_f.unwrap_or(f), self.expected_n.unwrap_or(n)),
            });
        }
        match self.normalization {
            Normalization::None => NonnegMatrix::new(raw),
            Normalization::Cbcl => normalize_cbcl(&raw),
            Normalization::UnitScale => unit_scale(&NonnegMatrix::new(raw)?),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_basic_file() {
        let m = parse_dense("2 2\n1 2\n3 4\n").unwrap();
        assert_eq!(m, Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap());
        let m = parse_dense("# comment\n1 3\n\n# inner\n0.5 1e-3 7\n").unwrap();
        assert_eq!(m.row(0), &[0.5, 1e-3, 7.0]);
    }

    #[test]
    fn reports_parse_locations() {
        match parse_dense("2 3\n1 2 3\n4 5\n") {
            Err(Error::Parse { line: 3, .. }) => {}
            other => panic!("{other:?}"),
        }
        match parse_dense("1 2\n1 abc\n") {
            Err(Error::Parse { line: 2, col: 3, .. }) => {}
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_dense("2 x\n"), Err(Error::Parse { line: 1, col: 3, .. })));
        assert!(matches!(parse_dense("1 1\n1\n2\n"), Err(Error::Parse { line: 3, .. })));
        assert!(matches!(parse_dense("2 1\n1\n"), Err(Error::Parse { .. })));
        assert!(matches!(parse_dense(""), Err(Error::Parse { .. })));
        assert!(matches!(parse_dense("1 1\nNaN\n"), Err(Error::Parse { .. })));
    }

    #[test]
    fn load_rejects_negative_entries() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("neg.txt");
        std::fs::write(&path, "1 2\n1 -1\n").unwrap();
        assert!(matches!(load_dense(&path), Err(Error::NegativeEntry { row: 0, col: 1, .. })));
        assert!(matches!(load_dense(dir.path().join("missing.txt")), Err(Error::Io { .. })));
    }

    #[test]
    fn cbcl_fixed_point() {
        // Population mean 0.25, std 0.25, inside [0, 1].
        let col = [0.0, 0.5, 0.0, 0.5];
        let m = Matrix::from_vec(4, 1, col.to_vec()).unwrap();
        let out = normalize_cbcl(&m).unwrap();
        for (a, b) in out.as_slice().iter().zip(col) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn cbcl_constant_column() {
        let m = Matrix::from_rows(&[[3.0, 1.0], [3.0, 2.0], [3.0, 9.0]]).unwrap();
        let out = normalize_cbcl(&m).unwrap();
        assert!((0..3).all(|i| out.get(i, 0) == 0.25));
    }

    #[test]
    fn cbcl_bounds_on_random_columns() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let m = Matrix::from_fn(50, 20, |_, j| rng.random_range(0.0..(j as f64 + 1.0) * 10.0)).unwrap();
        let out = normalize_cbcl(&m).unwrap();
        assert!(out.min() >= 0.0 && out.max() <= 1.0);
        for j in 0..20 {
            let mean = (0..50).map(|i| out.get(i, j)).sum::<f64>() / 50.0;
            assert!((0.15..=0.35).contains(&mean), "column {j}: {mean}");
        }
    }

    fn cube_bytes(values: &[f64]) -> Vec<u8> {
        values.iter().flat_map(|v| v.to_le_bytes()).collect()
    }

    #[test]
    fn hyperspectral_reshape_and_scale() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cube.bin");
        std::fs::write(&path, cube_bytes(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0])).unwrap();
        let m = load_hyperspectral(&path, 2, 2, 2).unwrap();
        assert_eq!(m.shape(), (2, 4));
        assert_eq!(m.max(), 1.0);
        assert_eq!(m.row(0), &[0.125, 0.25, 0.375, 0.5]);

        std::fs::write(&path, cube_bytes(&[0.0; 8])).unwrap();
        assert_eq!(load_hyperspectral(&path, 2, 2, 2).unwrap().max(), 0.0);

        assert!(matches!(load_hyperspectral(&path, 3, 2, 2), Err(Error::Dimension { .. })));
    }

    #[test]
    fn descriptor_checks_expected_dims() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.txt");
        std::fs::write(&path, "2 3\n1 2 3\n4 5 6\n").unwrap();
        let mut d = DatasetDescriptor::dense(&path);
        d.expected_f = Some(2);
        d.expected_n = Some(3);
        assert_eq!(d.load().unwrap().shape(), (2, 3));
        d.expected_n = Some(4);
        assert!(matches!(d.load(), Err(Error::Dimension { .. })));
        d.expected_n = None;
        d.normalization = Normalization::UnitScale;
        assert_eq!(d.load().unwrap().max(), 1.0);
    }
}
