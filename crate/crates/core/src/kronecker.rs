//! Vectorization calculus: `vec`, `vec⁻¹`, `vecL`, Kronecker products and the
//! L-eliminating / L-duplicating selectors (plain and `m`-th order).
//!
//! Index conventions are 0-based: `vec(A)[j n + i] = A[i, j]` for an `n × m`
//! matrix. `E_{n,m}` and `D_{n,m}` both have exactly one unit entry per row,
//! so they are stored as [`Selector`] index maps and applied by gathering.

use nalgebra::{DMatrix, DVector};

use crate::hermite::monomials;
use crate::{Error, Result};

/// Default limit on `(n+1)^{m+1}`, the length of `vec(X_n^{(m)})`.
pub const DEFAULT_SIZE_CAP: usize = 50_000_000;

/// Column-stacking vectorization.
pub fn vec(a: &DMatrix<f64>) -> DVector<f64> {
    // nalgebra storage is column-major
    DVector::from_column_slice(a.as_slice())
}

/// `vec⁻¹`: `[A]_{i,j} = v[j n + i]`.
pub fn vec_inverse(v: &[f64], n: usize, m: usize) -> Result<DMatrix<f64>> {
    if v.len() != n * m {
        return Err(Error::DimensionMismatch(format!(
            "vec_inverse: length {} is not {n} x {m}",
            v.len()
        )));
    }
    Ok(DMatrix::from_column_slice(n, m, v))
}

/// First column followed by the rest of the last row.
pub fn vec_l(a: &DMatrix<f64>) -> DVector<f64> {
    let (n, m) = a.shape();
    if n == 0 || m == 0 {
        return DVector::zeros(0);
    }
    let mut out = Vec::with_capacity(n + m - 1);
    out.extend(a.column(0).iter().copied());
    out.extend((1..m).map(|j| a[(n - 1, j)]));
    DVector::from_vec(out)
}

/// `A ⊗ B = [a_ij B]`.
pub fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    a.kronecker(b)
}

/// `A ⊗^d B = A^{⊗d} ⊗ B`, with `A ⊗^0 B = B`.
pub fn kron_power_apply(a: &DMatrix<f64>, d: usize, b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = b.clone();
    for _ in 0..d {
        out = kron(a, &out);
    }
    out
}

/// 0/1 matrix with exactly one unit per row: row `r` picks column `map[r]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Selector {
    map: Vec<usize>,
    ncols: usize,
}

/// `E_{n,m}`: `E vec(A) = vecL(A)`.
pub type EliminatingMatrix = Selector;
/// `D_{n,m}`: `D vecL(A) = vec(A)` for Hankel `A`.
pub type DuplicatingMatrix = Selector;

impl Selector {
    pub fn new(map: Vec<usize>, ncols: usize) -> Result<Self> {
        if let Some(&bad) = map.iter().find(|&&c| c >= ncols) {
            return Err(Error::DimensionMismatch(format!(
                "selector column {bad} out of range {ncols}"
            )));
        }
        Ok(Self { map, ncols })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            map: (0..n).collect(),
            ncols: n,
        }
    }

    pub fn nrows(&self) -> usize {
        self.map.len()
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn map(&self) -> &[usize] {
        &self.map
    }

    /// `S v` by gathering.
    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.ncols {
            return Err(Error::DimensionMismatch(format!(
                "selector with {} columns applied to length {}",
                self.ncols,
                v.len()
            )));
        }
        Ok(self.map.iter().map(|&c| v[c]).collect())
    }

    /// `S1 S2`
    pub fn compose(&self, rhs: &Selector) -> Result<Selector> {
        if self.ncols != rhs.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "selector product {}x{} times {}x{}",
                self.nrows(),
                self.ncols,
                rhs.nrows(),
                rhs.ncols
            )));
        }
        Ok(Selector {
            map: self.map.iter().map(|&c| rhs.map[c]).collect(),
            ncols: rhs.ncols,
        })
    }

    /// `I_k ⊗ S`
    pub fn kron_identity(&self, k: usize) -> Selector {
        let rows = self.nrows();
        let mut map = Vec::with_capacity(k * rows);
        for b in 0..k {
            map.extend(self.map.iter().map(|&c| b * self.ncols + c));
        }
        Selector {
            map,
            ncols: k * self.ncols,
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.nrows(), self.ncols);
        for (r, &c) in self.map.iter().enumerate() {
            out[(r, c)] = 1.0;
        }
        out
    }
}

/// `E_{n,m}` of shape `(n+m-1) × nm`.
pub fn eliminating(n: usize, m: usize) -> Result<EliminatingMatrix> {
    check_positive(n, m)?;
    let map = (0..n + m - 1)
        .map(|p| if p < n { p } else { (p - n + 1) * n + n - 1 })
        .collect();
    Selector::new(map, n * m)
}

/// `D_{n,m}` of shape `nm × (n+m-1)`: slot `(i, j)` reads anti-diagonal
/// `i + j`, whose `vecL` representative is at that same index.
pub fn duplicating(n: usize, m: usize) -> Result<DuplicatingMatrix> {
    check_positive(n, m)?;
    let mut map = Vec::with_capacity(n * m);
    for j in 0..m {
        map.extend((0..n).map(|i| i + j));
    }
    Selector::new(map, n + m - 1)
}

fn check_positive(n: usize, m: usize) -> Result<()> {
    if n == 0 || m == 0 {
        return Err(Error::InvalidParameter(format!(
            "selector dimensions must be >= 1, got ({n}, {m})"
        )));
    }
    Ok(())
}

/// `E_{n+1}^{(m)}` and `D_{n+1}^{(m)}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MthSelector {
    n: usize,
    m: usize,
    e: Selector,
    d: Selector,
}

impl MthSelector {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// `(n(m+1)+1) × (n+1)^{m+1}`
    pub fn eliminating(&self) -> &Selector {
        &self.e
    }

    /// `(n+1)^{m+1} × (n(m+1)+1)`
    pub fn duplicating(&self) -> &Selector {
        &self.d
    }
}

/// `(n+1)^{m+1}` checked against `cap`.
pub fn kron_size(n: usize, m: usize, cap: usize) -> Result<usize> {
    let requested = ((n + 1) as u128).checked_pow(m as u32 + 1).unwrap_or(u128::MAX);
    if requested > cap as u128 {
        return Err(Error::SizeCap {
            what: "vec(X_n^(m))",
            requested,
            cap,
        });
    }
    Ok(requested as usize)
}

/// Recursive `m`-th selectors with the default size cap.
pub fn mth_selectors(n: usize, m: usize) -> Result<MthSelector> {
    mth_selectors_with_cap(n, m, DEFAULT_SIZE_CAP)
}

/// `E^{(m)} = E_{nm+1, n+1} (I_{n+1} ⊗ E^{(m-1)})`,
/// `D^{(m)} = (I_{n+1} ⊗ D^{(m-1)}) D_{nm+1, n+1}`, from `E^{(1)} = E_{n+1}`,
/// `D^{(1)} = D_{n+1}`.
pub fn mth_selectors_with_cap(n: usize, m: usize, cap: usize) -> Result<MthSelector> {
    if n == 0 || m == 0 {
        return Err(Error::InvalidParameter(format!(
            "mth selectors need n >= 1 and m >= 1, got ({n}, {m})"
        )));
    }
    kron_size(n, m, cap)?;
    let mut e = eliminating(n + 1, n + 1)?;
    let mut d = duplicating(n + 1, n + 1)?;
    for r in 2..=m {
        let rows = n * r + 1;
        e = eliminating(rows, n + 1)?.compose(&e.kron_identity(n + 1))?;
        d = d.kron_identity(n + 1).compose(&duplicating(rows, n + 1)?)?;
    }
    Ok(MthSelector { n, m, e, d })
}

/// `X_n^{(m)}(x) = H_n(x)ᵀ ⊗^m H_n(x)`, an `(n+1) × (n+1)^m` matrix.
pub fn x_matrix(n: usize, m: usize, x: f64) -> DMatrix<f64> {
    let h = DMatrix::from_column_slice(n + 1, 1, &monomials(n, x));
    kron_power_apply(&h.transpose(), m, &h)
}
