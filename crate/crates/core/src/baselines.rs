//! Reference beamformers: MVDR, diagonally loaded MVDR, LCMV and the
//! hard-bounded (ICMV) variant of the penalized solver.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, CVector, HermitianMatrix};
use crate::problem::PicmvProblem;
use crate::solver::{run_mode, AdmmState, Beamformer, LevelMode, SolverOptions};

/// `R⁻¹a / (aᴴR⁻¹a)`.
pub fn mvdr(r: &HermitianMatrix, a: &CVector) -> Result<CVector> {
    if a.len() != r.dim() {
        return Err(Error::Dimension(format!(
            "steering vector length {} does not match covariance size {}",
            a.len(),
            r.dim()
        )));
    }
    let ria = r.solve(a)?;
    let gain = a.dotc(&ria);
    Ok(ria / gain.conj())
}

/// MVDR on `R + load·I`.
pub fn lsmi(r: &HermitianMatrix, a: &CVector, load: f64) -> Result<CVector> {
    if !(load >= 0.0) {
        return Err(Error::InvalidParameter(format!("loading must be non-negative, got {load}")));
    }
    mvdr(&r.loaded(load), a)
}

/// Loading `10·λ_min(R)` used in the antenna experiments.
pub fn default_loading(r: &HermitianMatrix) -> f64 {
    10.0 * r.eig().min_value().max(0.0)
}

/// Equality constraints `Cᴴw = f`.
#[derive(Debug, Clone)]
pub struct LinearConstraints {
    pub matrix: CMatrix,
    pub response: CVector,
}

impl LinearConstraints {
    pub fn new(matrix: CMatrix, response: CVector) -> Result<Self> {
        if matrix.ncols() != response.len() {
            return Err(Error::Dimension(format!(
                "{} constraint vectors but {} responses",
                matrix.ncols(),
                response.len()
            )));
        }
        if matrix.ncols() == 0 {
            return Err(Error::Empty("linear constraints"));
        }
        Ok(Self { matrix, response })
    }

    pub fn distortionless(a: &CVector) -> Self {
        Self {
            matrix: CMatrix::from_columns(&[a.clone()]),
            response: CVector::from_element(1, Complex64::new(1.0, 0.0)),
        }
    }
}

/// `R⁻¹C(CᴴR⁻¹C)⁻¹f`.
pub fn lcmv(r: &HermitianMatrix, constraints: &LinearConstraints) -> Result<CVector> {
    let c = &constraints.matrix;
    let m = r.dim();
    if c.nrows() != m {
        return Err(Error::Dimension(format!(
            "constraint vectors have length {}, covariance is {m}x{m}",
            c.nrows()
        )));
    }
    if c.ncols() > m {
        return Err(Error::TooManyConstraints {
            constraints: c.ncols(),
            elements: m,
        });
    }
    let eig = r.eig();
    eig.require_positive_definite()?;
    let ric = CMatrix::from_columns(
        &c.column_iter()
            .map(|col| eig.solve(&col.into_owned()))
            .collect::<Vec<_>>(),
    );
    let gram = HermitianMatrix::new(c.adjoint() * &ric)?;
    let g = gram.eig();
    let condition = g.max_value() / g.min_value().max(0.0);
    if !(condition <= 1e12) {
        return Err(Error::RankDeficient {
            condition,
            first: "constraint matrix".into(),
            second: "itself".into(),
        });
    }
    let coeffs = g.solve(&constraints.response);
    Ok(ric * coeffs)
}

/// Solves the problem with every interference level fixed to one and no
/// penalty, i.e. `min wᴴRw` under hard bounds on all constraints.
///
/// When the bounds cannot be met the splitting does not converge; a run that
/// exhausts its budget while its primal residual stops improving is flagged
/// with `infeasible_suspected`.
pub fn icmv(problem: &PicmvProblem, options: &SolverOptions) -> Result<Beamformer> {
    Ok(icmv_with_state(problem, options, None)?.0)
}

pub fn icmv_with_state(
    problem: &PicmvProblem,
    options: &SolverOptions,
    warm: Option<AdmmState>,
) -> Result<(Beamformer, AdmmState)> {
    run_mode(problem, options, warm, LevelMode::Fixed)
}
