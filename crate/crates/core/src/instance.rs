//! Input matrices, masks and validated problem instances.
//!
//! A [`SymMatrix`] is a dense symmetric matrix; an [`Instance`] adds the
//! spectral data (sorted eigenvalues, orthogonal eigenvectors, numerical
//! rank) that the bounds consume. Masks are correlation matrices applied
//! to the covariance by Hadamard product.

use std::fmt;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{LinxError, Result};

/// Asymmetry allowed on input, relative to the largest absolute entry.
pub const TOL_SYM: f64 = 1e-8;
/// Negative-eigenvalue band, scaled by `max(1, λ₁)`.
pub const TOL_PSD: f64 = 1e-10;
/// Relative threshold `λ_i > TOL_RANK · λ₁` used for the numerical rank.
pub const TOL_RANK: f64 = 1e-9;
/// Reconstruction and orthogonality tolerance, scaled by `max(1, λ₁)`.
pub const TOL_RECON: f64 = 1e-8;
/// Allowed deviation of a mask diagonal from one.
pub const TOL_MASK_DIAG: f64 = 1e-12;

/// Dense symmetric real matrix of order `n ≥ 1`.
#[derive(Clone, PartialEq)]
pub struct SymMatrix {
    data: DMatrix<f64>,
}

impl fmt::Debug for SymMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "SymMatrix({}x{}) {:?}",
            self.n(),
            self.n(),
            self.data.as_slice()
        )
    }
}

impl SymMatrix {
    /// Symmetrizes `data`. Asymmetry up to `TOL_SYM · max|entry|` is
    /// averaged away; anything larger is rejected.
    pub fn new(data: DMatrix<f64>) -> Result<Self> {
        let n = data.nrows();
        if n == 0 {
            return Err(LinxError::InvalidArgument(
                "matrix order must be at least 1".into(),
            ));
        }
        if data.ncols() != n {
            return Err(LinxError::NonSquare {
                row: 0,
                expected: n,
                found: data.ncols(),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(LinxError::InvalidArgument(
                "matrix has non-finite entries".into(),
            ));
        }
        let scale = data.amax();
        let tol = TOL_SYM * scale;
        let mut sym = data;
        for i in 0..n {
            for j in (i + 1)..n {
                let (a, b) = (sym[(i, j)], sym[(j, i)]);
                let diff = (a - b).abs();
                if diff > tol {
                    return Err(LinxError::Asymmetric { i, j, diff, tol });
                }
                let avg = 0.5 * (a + b);
                sym[(i, j)] = avg;
                sym[(j, i)] = avg;
            }
        }
        Ok(Self { data: sym })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        for (r, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(LinxError::NonSquare {
                    row: r + 1,
                    expected: n,
                    found: row.len(),
                });
            }
        }
        Self::new(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    pub fn identity(n: usize) -> Self {
        Self {
            data: DMatrix::identity(n, n),
        }
    }

    /// The all-ones matrix `J_n`.
    pub fn ones(n: usize) -> Self {
        Self {
            data: DMatrix::from_element(n, n, 1.0),
        }
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        Self {
            data: DMatrix::from_diagonal(&DVector::from_column_slice(d)),
        }
    }

    /// Block-diagonal matrix assembled from square symmetric blocks.
    pub fn block_diagonal(blocks: &[SymMatrix]) -> Self {
        let n: usize = blocks.iter().map(SymMatrix::n).sum();
        let mut data = DMatrix::zeros(n, n);
        let mut offset = 0;
        for b in blocks {
            let k = b.n();
            data.view_mut((offset, offset), (k, k)).copy_from(&b.data);
            offset += k;
        }
        Self { data }
    }

    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[(i, j)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn diagonal(&self) -> Vec<f64> {
        self.data.diagonal().iter().copied().collect()
    }

    /// Element-wise product; the result is symmetric whenever both factors are.
    pub fn hadamard(&self, other: &SymMatrix) -> Result<SymMatrix> {
        if self.n() != other.n() {
            return Err(LinxError::DimensionMismatch {
                expected: self.n(),
                found: other.n(),
            });
        }
        Ok(Self {
            data: self.data.component_mul(&other.data),
        })
    }

    pub fn scaled(&self, factor: f64) -> SymMatrix {
        Self {
            data: &self.data * factor,
        }
    }

    /// True when every off-diagonal entry is exactly zero.
    pub fn is_diagonal(&self) -> bool {
        let n = self.n();
        (0..n).all(|i| (0..n).all(|j| i == j || self.data[(i, j)] == 0.0))
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        let n = self.n();
        (0..n)
            .map(|i| (0..n).map(|j| self.data[(i, j)]).collect())
            .collect()
    }
}

/// Parses the plain-text matrix format: a line holding `n`, then `n` rows
/// of `n` reals separated by whitespace and/or commas. Lines starting with
/// `#` and blank lines are skipped.
pub fn load_matrix(text: &str) -> Result<SymMatrix> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

    let (header_line, header) = lines.next().ok_or(LinxError::Parse {
        line: 0,
        message: "empty input".into(),
    })?;
    let n: usize = header.parse().map_err(|_| LinxError::Parse {
        line: header_line,
        message: format!("expected matrix order, found {header:?}"),
    })?;
    if n == 0 {
        return Err(LinxError::Parse {
            line: header_line,
            message: "matrix order must be positive".into(),
        });
    }

    let mut rows = Vec::with_capacity(n);
    for (line_no, line) in lines {
        if rows.len() == n {
            return Err(LinxError::Parse {
                line: line_no,
                message: format!("unexpected data after {n} rows"),
            });
        }
        let row = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .map(|t| {
                t.parse::<f64>().map_err(|_| LinxError::Parse {
                    line: line_no,
                    message: format!("invalid number {t:?}"),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        if row.len() != n {
            return Err(LinxError::NonSquare {
                row: rows.len() + 1,
                expected: n,
                found: row.len(),
            });
        }
        rows.push(row);
    }
    if rows.len() != n {
        return Err(LinxError::Parse {
            line: text.lines().count(),
            message: format!("expected {n} rows, found {}", rows.len()),
        });
    }
    SymMatrix::from_rows(&rows)
}

/// A covariance matrix together with its spectral decomposition.
#[derive(Debug, Clone)]
pub struct Instance {
    c: SymMatrix,
    eigvals: Vec<f64>,
    eigvecs: DMatrix<f64>,
    rank: usize,
    d: Vec<f64>,
}

impl Instance {
    /// Eigendecomposes `c` and checks positive semidefiniteness. Unlike
    /// [`validate`] this does not require a positive diagonal.
    pub fn spectral(c: SymMatrix) -> Result<Self> {
        let n = c.n();
        let eig = SymmetricEigen::new(c.as_matrix().clone());
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

        let mut eigvals: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        let eigvecs = DMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);

        let top = eigvals[0].max(0.0);
        let tol_psd = TOL_PSD * top.max(1.0);
        let min = eigvals[n - 1];
        if min < -tol_psd {
            return Err(LinxError::NotPsd {
                min_eigenvalue: min,
                tol: tol_psd,
            });
        }
        for v in eigvals.iter_mut() {
            if *v <= 0.0 {
                *v = 0.0;
            }
        }

        let tol_recon = TOL_RECON * top.max(1.0);
        let lambda = DMatrix::from_diagonal(&DVector::from_column_slice(&eigvals));
        let recon = &eigvecs * lambda * eigvecs.transpose();
        let recon_err = (recon - c.as_matrix()).amax();
        let orth_err = (eigvecs.transpose() * &eigvecs - DMatrix::identity(n, n)).amax();
        if recon_err > tol_recon || orth_err > TOL_RECON {
            return Err(LinxError::InvalidArgument(format!(
                "eigendecomposition inaccurate (reconstruction {recon_err:e}, orthogonality {orth_err:e})"
            )));
        }

        let rank = eigvals.iter().filter(|&&v| v > TOL_RANK * top).count();
        let d = c.diagonal();
        Ok(Self {
            c,
            eigvals,
            eigvecs,
            rank,
            d,
        })
    }

    pub fn matrix(&self) -> &SymMatrix {
        &self.c
    }

    pub fn n(&self) -> usize {
        self.c.n()
    }

    /// Eigenvalues in non-increasing order.
    pub fn eigvals(&self) -> &[f64] {
        &self.eigvals
    }

    /// Orthogonal `Q` with `C = Q Λ Qᵀ`; column `j` pairs with `eigvals()[j]`.
    pub fn eigvecs(&self) -> &DMatrix<f64> {
        &self.eigvecs
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn diag(&self) -> &[f64] {
        &self.d
    }

    /// Spectral instance of `C ∘ M`.
    pub fn masked(&self, mask: &Mask) -> Result<Instance> {
        match mask.kind() {
            MaskKind::AllOnes => Ok(self.clone()),
            _ => Instance::spectral(self.c.hadamard(mask.matrix())?),
        }
    }
}

/// Validates `c` as an input for cardinality `s`: PSD, positive diagonal, `0 < s < n`.
pub fn validate(c: SymMatrix, s: usize) -> Result<Instance> {
    let n = c.n();
    if s == 0 || s >= n {
        return Err(LinxError::InvalidCardinality { s, n });
    }
    if let Some((index, &value)) = c.diagonal().iter().enumerate().find(|(_, v)| **v <= 0.0) {
        return Err(LinxError::NonPositiveDiagonal { index, value });
    }
    Instance::spectral(c)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MaskKind {
    /// `J`: no masking.
    AllOnes,
    /// `I`: keep only the diagonal.
    Identity,
    Custom,
}

impl fmt::Display for MaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MaskKind::AllOnes => "none",
            MaskKind::Identity => "identity",
            MaskKind::Custom => "custom",
        })
    }
}

/// Correlation matrix: symmetric PSD with unit diagonal.
#[derive(Debug, Clone)]
pub struct Mask {
    m: SymMatrix,
    kind: MaskKind,
}

impl Mask {
    pub fn new(m: SymMatrix) -> Result<Self> {
        let n = m.n();
        for (i, v) in m.diagonal().into_iter().enumerate() {
            if (v - 1.0).abs() > TOL_MASK_DIAG {
                return Err(LinxError::InvalidMask(format!(
                    "diagonal entry {i} is {v}, expected 1"
                )));
            }
        }
        let eig = SymmetricEigen::new(m.as_matrix().clone());
        let top = eig.eigenvalues.max();
        let min = eig.eigenvalues.min();
        let tol = TOL_PSD * top.max(1.0);
        if min < -tol {
            return Err(LinxError::InvalidMask(format!(
                "not positive semidefinite (minimum eigenvalue {min:e})"
            )));
        }
        let kind = if m == SymMatrix::ones(n) {
            MaskKind::AllOnes
        } else if m == SymMatrix::identity(n) {
            MaskKind::Identity
        } else {
            MaskKind::Custom
        };
        Ok(Self { m, kind })
    }

    pub fn all_ones(n: usize) -> Self {
        Self {
            m: SymMatrix::ones(n),
            kind: MaskKind::AllOnes,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            m: SymMatrix::identity(n),
            kind: MaskKind::Identity,
        }
    }

    pub fn matrix(&self) -> &SymMatrix {
        &self.m
    }

    pub fn kind(&self) -> MaskKind {
        self.kind
    }

    pub fn n(&self) -> usize {
        self.m.n()
    }
}
