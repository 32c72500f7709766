//! Gaussian messages and the elementary sum-product rules.
//!
//! A message over `x ∈ ℝᵈ` is kept either in moment form `(m, V)` or in
//! weight form `(W, Wm)`, the latter standing for the (possibly improper)
//! function `exp(-½(xᵀWx - 2xᵀWm))`. Weight form is the only one that can
//! represent degenerate messages with singular `W`, e.g. the uninformative
//! message `W = 0`.
//!
//! ```
//! use emfg::gaussian::{GaussianMoment, GaussianWeight};
//! use nalgebra::{dmatrix, dvector};
//!
//! let g = GaussianMoment::new(dvector![2.0], dmatrix![4.0]).unwrap();
//! let w = g.to_weight().unwrap();
//! assert_eq!(w.weight()[(0, 0)], 0.25);
//! assert_eq!(w.weighted_mean()[0], 0.5);
//!
//! // The uninformative message is the identity of parallel combination.
//! let flat = GaussianWeight::uninformative(1);
//! assert_eq!(flat.combine_parallel(&w).unwrap(), w);
//! ```

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Numerical tolerances shared by validation, projection and solves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Largest accepted `|M - Mᵀ|` entry, relative to `max(1, max |M|)`.
    pub sym: f64,
    /// Eigenvalue floor used by [`psd_project`] and PSD validation.
    pub psd: f64,
    /// Reciprocal-condition threshold below which an SPD solve is refused.
    pub solve: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            sym: 1e-10,
            psd: 0.0,
            solve: 1e-12,
        }
    }
}

impl Tolerances {
    pub fn new(sym: f64, psd: f64, solve: f64) -> Result<Self> {
        for (name, v) in [("sym", sym), ("psd", psd), ("solve", solve)] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::invalid("tolerances", format!("{name} = {v}")));
            }
        }
        Ok(Tolerances { sym, psd, solve })
    }
}

/// Gaussian message in moment form: mean vector and covariance matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMoment {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
}

/// Gaussian message in weight form: weight (inverse covariance) matrix and
/// weighted mean `W m`. The weight matrix may be singular.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianWeight {
    weight: DMatrix<f64>,
    weighted_mean: DVector<f64>,
}

impl GaussianMoment {
    /// Validating constructor using default tolerances.
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        Self::new_with(mean, cov, &Tolerances::default())
    }

    pub fn new_with(mean: DVector<f64>, cov: DMatrix<f64>, tol: &Tolerances) -> Result<Self> {
        check_square_vec("cov", &cov, mean.len())?;
        check_finite_vec("mean", &mean)?;
        check_sym_psd("cov", &cov, tol)?;
        Ok(GaussianMoment { mean, cov })
    }

    /// Builds a message without validation. The covariance is symmetrized.
    pub fn new_unchecked(mean: DVector<f64>, cov: DMatrix<f64>) -> Self {
        GaussianMoment {
            mean,
            cov: symmetrize(&cov),
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn into_parts(self) -> (DVector<f64>, DMatrix<f64>) {
        (self.mean, self.cov)
    }

    /// Converts to weight form: `W = V⁻¹`, `Wm = V⁻¹ m`.
    pub fn to_weight(&self) -> Result<GaussianWeight> {
        self.to_weight_with(&Tolerances::default())
    }

    pub fn to_weight_with(&self, tol: &Tolerances) -> Result<GaussianWeight> {
        let weight = spd_inverse(&self.cov, tol.solve).ok_or(Error::SingularCovariance)?;
        let weighted_mean = &weight * &self.mean;
        Ok(GaussianWeight {
            weight,
            weighted_mean,
        })
    }

    /// `(A m, A V Aᵀ + V_add)`: the message out of a matrix node followed by
    /// an adder with independent zero-mean noise of covariance `v_add`.
    pub fn propagate_affine(&self, a: &DMatrix<f64>, v_add: &DMatrix<f64>) -> Result<Self> {
        if a.ncols() != self.dim() || v_add.nrows() != a.nrows() || v_add.ncols() != a.nrows() {
            return Err(Error::dims(format!(
                "propagate_affine: A is {}x{}, state dim {}, V_add is {}x{}",
                a.nrows(),
                a.ncols(),
                self.dim(),
                v_add.nrows(),
                v_add.ncols()
            )));
        }
        let mean = a * &self.mean;
        let cov = a * &self.cov * a.transpose() + v_add;
        Ok(GaussianMoment::new_unchecked(mean, cov))
    }
}

impl GaussianWeight {
    pub fn new(weight: DMatrix<f64>, weighted_mean: DVector<f64>) -> Result<Self> {
        Self::new_with(weight, weighted_mean, &Tolerances::default())
    }

    pub fn new_with(
        weight: DMatrix<f64>,
        weighted_mean: DVector<f64>,
        tol: &Tolerances,
    ) -> Result<Self> {
        check_square_vec("weight", &weight, weighted_mean.len())?;
        check_finite_vec("weighted_mean", &weighted_mean)?;
        check_sym_psd("weight", &weight, tol)?;
        Ok(GaussianWeight {
            weight,
            weighted_mean,
        })
    }

    /// Builds a message without validation. The weight matrix is symmetrized.
    pub fn new_unchecked(weight: DMatrix<f64>, weighted_mean: DVector<f64>) -> Self {
        GaussianWeight {
            weight: symmetrize(&weight),
            weighted_mean,
        }
    }

    /// The constant message `W = 0, Wm = 0`.
    pub fn uninformative(dim: usize) -> Self {
        GaussianWeight {
            weight: DMatrix::zeros(dim, dim),
            weighted_mean: DVector::zeros(dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.weighted_mean.len()
    }

    pub fn weight(&self) -> &DMatrix<f64> {
        &self.weight
    }

    pub fn weighted_mean(&self) -> &DVector<f64> {
        &self.weighted_mean
    }

    pub fn into_parts(self) -> (DMatrix<f64>, DVector<f64>) {
        (self.weight, self.weighted_mean)
    }

    /// Converts to moment form. Fails with [`Error::DegenerateMessage`]
    /// when the weight matrix is singular.
    pub fn to_moment(&self) -> Result<GaussianMoment> {
        self.to_moment_with(&Tolerances::default())
    }

    pub fn to_moment_with(&self, tol: &Tolerances) -> Result<GaussianMoment> {
        let cov = spd_inverse(&self.weight, tol.solve).ok_or(Error::DegenerateMessage)?;
        let mean = &cov * &self.weighted_mean;
        Ok(GaussianMoment { mean, cov })
    }

    /// Equality-node rule: weights and weighted means add.
    pub fn combine_parallel(&self, other: &GaussianWeight) -> Result<GaussianWeight> {
        if self.dim() != other.dim() {
            return Err(Error::dims(format!(
                "combine_parallel: {} vs {}",
                self.dim(),
                other.dim()
            )));
        }
        Ok(GaussianWeight {
            weight: &self.weight + &other.weight,
            weighted_mean: &self.weighted_mean + &other.weighted_mean,
        })
    }

    /// Maximizer of the message, the solution of `W θ = Wm`.
    ///
    /// For Gaussians max-product and sum-product agree, so this is also the
    /// mean. A singular weight leaves some direction of θ unconstrained.
    pub fn argmax(&self) -> Result<DVector<f64>> {
        self.argmax_with(&Tolerances::default())
    }

    pub fn argmax_with(&self, tol: &Tolerances) -> Result<DVector<f64>> {
        spd_solve(&self.weight, &self.weighted_mean, tol.solve)
            .ok_or(Error::UnidentifiableParameter)
    }

    /// Multiplies both parameters by `s`, i.e. raises the message to the power `s`.
    pub fn scaled(&self, s: f64) -> GaussianWeight {
        GaussianWeight {
            weight: &self.weight * s,
            weighted_mean: &self.weighted_mean * s,
        }
    }
}

/// Symmetrizes `m` and raises every eigenvalue below `tol.psd` to `tol.psd`.
///
/// Input that already has all eigenvalues `>= tol.psd` comes back as its
/// symmetric part, unchanged otherwise.
pub fn psd_project(m: &DMatrix<f64>, tol: &Tolerances) -> DMatrix<f64> {
    assert!(m.is_square(), "psd_project needs a square matrix");
    let sym = symmetrize(m);
    if sym.nrows() == 0 {
        return sym;
    }
    let eig = SymmetricEigen::new(sym.clone());
    if eig.eigenvalues.iter().all(|&l| l >= tol.psd) {
        return sym;
    }
    let clamped = eig.eigenvalues.map(|l| l.max(tol.psd));
    let q = &eig.eigenvectors;
    symmetrize(&(q * DMatrix::from_diagonal(&clamped) * q.transpose()))
}

/// `(M + Mᵀ) / 2`.
pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Inverse of a symmetric positive definite matrix.
///
/// Returns `None` if the Cholesky factorization fails or the reciprocal
/// condition estimate `1 / (tr(M) · tr(M⁻¹))` is at most `rcond_min`. The
/// estimate is within a factor `d²` of `λ_min / λ_max`.
pub fn spd_inverse(m: &DMatrix<f64>, rcond_min: f64) -> Option<DMatrix<f64>> {
    if !m.is_square() {
        return None;
    }
    if m.nrows() == 0 {
        return Some(DMatrix::zeros(0, 0));
    }
    let chol = symmetrize(m).cholesky()?;
    let inv = symmetrize(&chol.inverse());
    let tr = m.trace();
    let tr_inv = inv.trace();
    if !(tr > 0.0 && tr_inv > 0.0) || !tr_inv.is_finite() {
        return None;
    }
    if 1.0 / (tr * tr_inv) <= rcond_min {
        return None;
    }
    Some(inv)
}

/// Solves `M x = b` for symmetric positive definite `M`; see [`spd_inverse`].
pub fn spd_solve(m: &DMatrix<f64>, b: &DVector<f64>, rcond_min: f64) -> Option<DVector<f64>> {
    if m.nrows() != b.len() {
        return None;
    }
    spd_inverse(m, rcond_min).map(|inv| inv * b)
}

fn check_square_vec(field: &'static str, m: &DMatrix<f64>, d: usize) -> Result<()> {
    if m.nrows() != d || m.ncols() != d {
        return Err(Error::dims(format!(
            "{field} is {}x{}, expected {d}x{d}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

fn check_finite_vec(field: &'static str, v: &DVector<f64>) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::invalid(field, "non-finite entry"))
    }
}

fn check_sym_psd(field: &'static str, m: &DMatrix<f64>, tol: &Tolerances) -> Result<()> {
    if !m.iter().all(|x| x.is_finite()) {
        return Err(Error::invalid(field, "non-finite entry"));
    }
    let scale = m.amax().max(1.0);
    let asym = (m - m.transpose()).amax();
    if asym > tol.sym * scale {
        return Err(Error::invalid(field, format!("asymmetry {asym:e}")));
    }
    if m.nrows() == 0 {
        return Ok(());
    }
    let eig = SymmetricEigen::new(symmetrize(m));
    let min = eig.eigenvalues.min();
    // Round-off allowance on top of the configured floor.
    let slack = tol.psd + 64.0 * f64::EPSILON * m.amax();
    if min < -slack {
        return Err(Error::invalid(field, format!("eigenvalue {min:e} < 0")));
    }
    Ok(())
}
