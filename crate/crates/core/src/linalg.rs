//! Complex linear algebra used throughout the crate: Hermitian matrices with a
//! cached eigendecomposition, sample covariance estimation and the Capon
//! spatial spectrum.
//!
//! Inverses are always applied through the cached factorization `U diag(λ) Uᴴ`
//! rather than through a general-purpose inversion routine.

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CVector = DVector<Complex64>;
pub type CMatrix = DMatrix<Complex64>;

/// Relative asymmetry tolerated before a matrix is rejected as non-Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-8;

/// Eigenvalues below this fraction of the largest one are treated as zero.
pub const SINGULAR_RATIO: f64 = 1e-12;

/// `wᴴa`.
#[inline]
pub fn inner(w: &CVector, a: &CVector) -> Complex64 {
    w.dotc(a)
}

/// Eigendecomposition `H = U diag(λ) Uᴴ` with eigenvalues in ascending order.
#[derive(Debug, Clone)]
pub struct Eigen {
    pub vectors: CMatrix,
    pub values: DVector<f64>,
}

impl Eigen {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn min_value(&self) -> f64 {
        self.values[0]
    }

    pub fn max_value(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    pub fn is_positive_definite(&self) -> bool {
        let max = self.max_value();
        max > 0.0 && self.min_value() > SINGULAR_RATIO * max
    }

    pub fn require_positive_definite(&self) -> Result<()> {
        if self.is_positive_definite() {
            Ok(())
        } else {
            Err(Error::Singular {
                min: self.min_value(),
                max: self.max_value(),
            })
        }
    }

    pub fn reconstruct(&self) -> CMatrix {
        let mut scaled = self.vectors.clone();
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            col *= Complex64::from(self.values[j]);
        }
        scaled * self.vectors.adjoint()
    }

    /// `Uᴴb`, the coordinates of `b` in the eigenbasis.
    pub fn to_eigenbasis(&self, b: &CVector) -> CVector {
        self.vectors.ad_mul(b)
    }

    /// `H⁻¹b`. Caller is responsible for positive definiteness.
    pub fn solve(&self, b: &CVector) -> CVector {
        let mut coords = self.to_eigenbasis(b);
        for (c, &l) in coords.iter_mut().zip(self.values.iter()) {
            *c /= l;
        }
        &self.vectors * coords
    }

    /// `aᴴH⁻¹a`.
    pub fn inverse_quadratic(&self, a: &CVector) -> f64 {
        self.to_eigenbasis(a)
            .iter()
            .zip(self.values.iter())
            .map(|(c, &l)| c.norm_sqr() / l)
            .sum()
    }
}

/// A complex Hermitian matrix. The eigendecomposition is computed lazily and
/// cached.
#[derive(Debug, Clone)]
pub struct HermitianMatrix {
    data: CMatrix,
    eig: OnceLock<Eigen>,
}

impl HermitianMatrix {
    /// Validates symmetry and stores the exactly symmetrized matrix.
    pub fn new(data: CMatrix) -> Result<Self> {
        if !data.is_square() || data.nrows() == 0 {
            return Err(Error::Dimension(format!(
                "Hermitian matrix must be square and non-empty, got {}x{}",
                data.nrows(),
                data.ncols()
            )));
        }
        if data.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::InvalidParameter("matrix has non-finite entries".into()));
        }
        let scale = data.iter().map(|c| c.norm()).fold(1.0_f64, f64::max);
        let n = data.nrows();
        let mut asymmetry = 0.0_f64;
        for i in 0..n {
            for j in i..n {
                asymmetry = asymmetry.max((data[(i, j)] - data[(j, i)].conj()).norm());
            }
        }
        if asymmetry > HERMITIAN_TOL * scale {
            return Err(Error::NotHermitian { asymmetry });
        }
        Ok(Self::from_raw_symmetrized(data))
    }

    fn from_raw_symmetrized(data: CMatrix) -> Self {
        let sym = (&data + data.adjoint()) * Complex64::from(0.5);
        Self {
            data: sym,
            eig: OnceLock::new(),
        }
    }

    pub fn identity(m: usize) -> Self {
        Self::from_raw_symmetrized(CMatrix::identity(m, m))
    }

    pub fn zeros(m: usize) -> Self {
        Self::from_raw_symmetrized(CMatrix::zeros(m, m))
    }

    /// `Σ aᵢaᵢᴴ` over the columns of `columns`.
    pub fn gram(columns: &CMatrix) -> Self {
        Self::from_raw_symmetrized(outer_sum(columns))
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.data
    }

    pub fn eig(&self) -> &Eigen {
        self.eig.get_or_init(|| decompose(&self.data))
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self::from_raw_symmetrized(&self.data * Complex64::from(c))
    }

    pub fn add(&self, other: &HermitianMatrix) -> Result<Self> {
        if other.dim() != self.dim() {
            return Err(Error::Dimension(format!(
                "cannot add {}x{} and {}x{} matrices",
                self.dim(),
                self.dim(),
                other.dim(),
                other.dim()
            )));
        }
        Ok(Self::from_raw_symmetrized(&self.data + &other.data))
    }

    /// `H + load·I`.
    pub fn loaded(&self, load: f64) -> Self {
        let mut data = self.data.clone();
        for i in 0..data.nrows() {
            data[(i, i)] += Complex64::from(load);
        }
        Self::from_raw_symmetrized(data)
    }

    /// `wᴴHw` (real for Hermitian H).
    pub fn quadratic_form(&self, w: &CVector) -> f64 {
        inner(w, &(&self.data * w)).re
    }

    /// `H⁻¹b` through the cached eigendecomposition.
    pub fn solve(&self, b: &CVector) -> Result<CVector> {
        let eig = self.eig();
        eig.require_positive_definite()?;
        Ok(eig.solve(b))
    }

    pub fn frobenius_distance(&self, other: &CMatrix) -> f64 {
        (&self.data - other).norm()
    }
}

/// Hermitian eigendecomposition with ascending eigenvalues.
pub fn herm_eig(h: &HermitianMatrix) -> Eigen {
    h.eig().clone()
}

fn decompose(h: &CMatrix) -> Eigen {
    let eig = h.clone().symmetric_eigen();
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let vectors = CMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    Eigen { vectors, values }
}

/// `S Sᴴ` computed with real matrix products, which are considerably faster
/// than the generic complex product for the large steering matrices used in
/// pattern synthesis.
pub fn outer_sum(columns: &CMatrix) -> CMatrix {
    let re = columns.map(|c| c.re);
    let im = columns.map(|c| c.im);
    let re_t = re.transpose();
    let im_t = im.transpose();
    let real = &re * &re_t + &im * &im_t;
    let imag = &im * &re_t - &re * &im_t;
    real.zip_map(&imag, Complex64::new)
}

/// `Aᴴ B` computed with real matrix products. The transposes are formed
/// explicitly so the products use the blocked kernel.
pub fn adjoint_product(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let (ar, ai) = (a.map(|c| c.re).transpose(), a.map(|c| c.im).transpose());
    let (br, bi) = (b.map(|c| c.re), b.map(|c| c.im));
    let real = &ar * &br + &ai * &bi;
    let imag = &ar * &bi - &ai * &br;
    real.zip_map(&imag, Complex64::new)
}

/// A complex matrix held as separate real and imaginary parts, for fast
/// repeated products with vectors.
#[derive(Debug, Clone)]
pub struct SplitMatrix {
    re: DMatrix<f64>,
    im: DMatrix<f64>,
}

impl SplitMatrix {
    pub fn new(m: &CMatrix) -> Self {
        Self {
            re: m.map(|c| c.re),
            im: m.map(|c| c.im),
        }
    }

    pub fn nrows(&self) -> usize {
        self.re.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.re.ncols()
    }

    /// `M x`.
    pub fn mul(&self, x: &CVector) -> CVector {
        let xr = x.map(|c| c.re);
        let xi = x.map(|c| c.im);
        let real = &self.re * &xr - &self.im * &xi;
        let imag = &self.re * &xi + &self.im * &xr;
        real.zip_map(&imag, Complex64::new)
    }

    /// `wᴴmᵢ` for every column `mᵢ`.
    pub fn column_responses(&self, w: &CVector) -> CVector {
        let wr = w.map(|c| c.re);
        let wi = w.map(|c| c.im);
        let real = self.re.tr_mul(&wr) + self.im.tr_mul(&wi);
        let imag = self.im.tr_mul(&wr) - self.re.tr_mul(&wi);
        real.zip_map(&imag, Complex64::new)
    }
}

/// `(1/N) Σ x(n)x(n)ᴴ`.
pub fn sample_covariance(snapshots: &[CVector]) -> Result<HermitianMatrix> {
    let first = snapshots.first().ok_or(Error::Empty("snapshot list"))?;
    let m = first.len();
    if m == 0 {
        return Err(Error::Empty("snapshot vector"));
    }
    if let Some(bad) = snapshots.iter().find(|x| x.len() != m) {
        return Err(Error::Dimension(format!(
            "snapshot lengths differ: {} vs {}",
            m,
            bad.len()
        )));
    }
    let stacked = CMatrix::from_columns(snapshots);
    let n = snapshots.len() as f64;
    Ok(HermitianMatrix::from_raw_symmetrized(
        outer_sum(&stacked) / Complex64::from(n),
    ))
}

/// Capon spectrum `1 / (aᴴR⁻¹a)`.
pub fn capon_spectrum(r: &HermitianMatrix, a: &CVector) -> Result<f64> {
    if a.len() != r.dim() {
        return Err(Error::Dimension(format!(
            "steering vector length {} does not match covariance size {}",
            a.len(),
            r.dim()
        )));
    }
    let eig = r.eig();
    eig.require_positive_definite()?;
    Ok(1.0 / eig.inverse_quadratic(a))
}
