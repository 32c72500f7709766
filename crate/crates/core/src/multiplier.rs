//! Closed-form EM messages out of multiplier nodes.
//!
//! Every node handled here is a multiplier `U = A(Θ) X` grouped with an
//! additive Gaussian noise `Y = U + Z`, `Z ~ N(0, V_Z)`. A bare multiplier is
//! a hard constraint whose EM message degenerates to `Θ = θ̂`, so it is never
//! exposed on its own.
//!
//! Given the incoming sum-product messages `→μ_X` and `←μ_Y`, the backward
//! EM message towards `Θ` is always Gaussian. It is computed in two steps:
//!
//! 1. [`marginals`] (or [`marginals_information`]) computes the local
//!    posterior quantities `m_X`, `m_Y`, `V_X` and `V_{XYᵀ}` for `Θ = θ̂`;
//! 2. [`em_message`] turns them into `(←W_Θ, ←W_Θ ←m_Θ)`.
//!
//! [`em_message_fixed_y`] is the special case of a scalar inner product
//! whose output is observed exactly.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{
    psd_project, spd_inverse, symmetrize, GaussianMoment, GaussianWeight, Tolerances,
};
use crate::vectorize::{cvect, from_rvect, kron};

/// EM message over the parameter. For [`MultiplierKind::GeneralMatrix`] the
/// parameter vector is `rvect(Θ)ᵀ`. Scale factors are not tracked.
pub type EmGaussian = GaussianWeight;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MultiplierKind {
    /// `A(θ) = θᵀ`, scalar output.
    InnerProduct,
    /// `A(θ) = θ I_n` with scalar θ.
    ScalarTimesVector,
    /// `A(θ) = diag(θ)`.
    Componentwise,
    /// Companion matrix with first row `θᵀ` and a shifted identity below;
    /// the noise enters only the first output component.
    Autoregression,
    /// `A(Θ) = Θ`, an `m × n` matrix.
    GeneralMatrix,
}

impl MultiplierKind {
    pub const ALL: [MultiplierKind; 5] = [
        MultiplierKind::InnerProduct,
        MultiplierKind::ScalarTimesVector,
        MultiplierKind::Componentwise,
        MultiplierKind::Autoregression,
        MultiplierKind::GeneralMatrix,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MultiplierKind::InnerProduct => "inner_product",
            MultiplierKind::ScalarTimesVector => "scalar_times_vector",
            MultiplierKind::Componentwise => "componentwise",
            MultiplierKind::Autoregression => "autoregression",
            MultiplierKind::GeneralMatrix => "general_matrix",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Noise {
    /// Variance σ_Z² of a scalar noise.
    Scalar(f64),
    /// Covariance matrix V_Z.
    Matrix(DMatrix<f64>),
}

/// A multiplier node grouped with its output noise.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiplierSpec {
    kind: MultiplierKind,
    n: usize,
    m: usize,
    v_z: DMatrix<f64>,
    w_z: Option<DMatrix<f64>>,
}

impl MultiplierSpec {
    /// Validates the shape and noise requirements of `kind`.
    ///
    /// `n` is the dimension of `X` and `m` that of `Y`. Inner product and
    /// autoregression need a positive scalar noise; the other kinds need an
    /// invertible `V_Z`.
    pub fn new(kind: MultiplierKind, n: usize, m: usize, noise: Noise) -> Result<Self> {
        if n == 0 || m == 0 {
            return Err(Error::invalid("multiplier", "zero dimension"));
        }
        let expected_m = match kind {
            MultiplierKind::InnerProduct => Some(1),
            MultiplierKind::GeneralMatrix => None,
            _ => Some(n),
        };
        if let Some(e) = expected_m {
            if m != e {
                return Err(Error::dims(format!(
                    "{}: output dimension {m}, expected {e}",
                    kind.name()
                )));
            }
        }
        let tol = Tolerances::default();
        let v_z = match (kind, noise) {
            (MultiplierKind::InnerProduct, Noise::Scalar(s)) => {
                positive_variance(s)?;
                DMatrix::from_element(1, 1, s)
            }
            (MultiplierKind::Autoregression, Noise::Scalar(s)) => {
                positive_variance(s)?;
                let mut v = DMatrix::zeros(n, n);
                v[(0, 0)] = s;
                v
            }
            (MultiplierKind::InnerProduct | MultiplierKind::Autoregression, Noise::Matrix(_)) => {
                return Err(Error::invalid(
                    "noise",
                    format!("{} takes a scalar variance", kind.name()),
                ))
            }
            (_, Noise::Scalar(s)) => {
                positive_variance(s)?;
                DMatrix::identity(m, m) * s
            }
            (_, Noise::Matrix(v)) => {
                if v.nrows() != m || v.ncols() != m {
                    return Err(Error::dims(format!(
                        "V_Z is {}x{}, expected {m}x{m}",
                        v.nrows(),
                        v.ncols()
                    )));
                }
                GaussianWeight::new_with(v.clone(), DVector::zeros(m), &tol)?;
                symmetrize(&v)
            }
        };
        let w_z = match kind {
            MultiplierKind::Autoregression => None,
            _ => Some(spd_inverse(&v_z, tol.solve).ok_or(Error::SingularNoise)?),
        };
        Ok(MultiplierSpec {
            kind,
            n,
            m,
            v_z,
            w_z,
        })
    }

    pub fn inner_product(n: usize, sigma2: f64) -> Result<Self> {
        Self::new(MultiplierKind::InnerProduct, n, 1, Noise::Scalar(sigma2))
    }

    pub fn scalar_times_vector(v_z: DMatrix<f64>) -> Result<Self> {
        let n = v_z.nrows();
        Self::new(MultiplierKind::ScalarTimesVector, n, n, Noise::Matrix(v_z))
    }

    pub fn componentwise(v_z: DMatrix<f64>) -> Result<Self> {
        let n = v_z.nrows();
        Self::new(MultiplierKind::Componentwise, n, n, Noise::Matrix(v_z))
    }

    pub fn autoregression(n: usize, sigma2: f64) -> Result<Self> {
        Self::new(MultiplierKind::Autoregression, n, n, Noise::Scalar(sigma2))
    }

    pub fn general_matrix(n: usize, v_z: DMatrix<f64>) -> Result<Self> {
        let m = v_z.nrows();
        Self::new(MultiplierKind::GeneralMatrix, n, m, Noise::Matrix(v_z))
    }

    pub fn kind(&self) -> MultiplierKind {
        self.kind
    }

    /// Dimension of `X`.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Dimension of `Y`.
    pub fn m(&self) -> usize {
        self.m
    }

    /// Length of the parameter vector θ.
    pub fn theta_dim(&self) -> usize {
        match self.kind {
            MultiplierKind::ScalarTimesVector => 1,
            MultiplierKind::GeneralMatrix => self.m * self.n,
            _ => self.n,
        }
    }

    /// Effective noise covariance; singular for autoregression.
    pub fn v_z(&self) -> &DMatrix<f64> {
        &self.v_z
    }

    /// `V_Z⁻¹`, absent for autoregression.
    pub fn w_z(&self) -> Option<&DMatrix<f64>> {
        self.w_z.as_ref()
    }

    /// The scalar noise variance for inner product and autoregression.
    pub fn sigma2(&self) -> Option<f64> {
        match self.kind {
            MultiplierKind::InnerProduct | MultiplierKind::Autoregression => Some(self.v_z[(0, 0)]),
            _ => None,
        }
    }

    /// A factor `L` (`m × r`) with `V_Z = L Lᵀ` and full column rank.
    pub fn noise_factor(&self) -> DMatrix<f64> {
        match self.kind {
            MultiplierKind::Autoregression => {
                let mut l = DMatrix::zeros(self.n, 1);
                l[(0, 0)] = self.v_z[(0, 0)].sqrt();
                l
            }
            _ => self
                .v_z
                .clone()
                .cholesky()
                .expect("V_Z validated as invertible")
                .l(),
        }
    }

    /// `A(θ̂)`. For the general matrix case θ̂ is `rvect(Θ)ᵀ`.
    pub fn build_a(&self, theta: &DVector<f64>) -> Result<DMatrix<f64>> {
        if theta.len() != self.theta_dim() {
            return Err(Error::dims(format!(
                "{}: θ has length {}, expected {}",
                self.kind.name(),
                theta.len(),
                self.theta_dim()
            )));
        }
        let n = self.n;
        Ok(match self.kind {
            MultiplierKind::InnerProduct => DMatrix::from_row_slice(1, n, theta.as_slice()),
            MultiplierKind::ScalarTimesVector => DMatrix::identity(n, n) * theta[0],
            MultiplierKind::Componentwise => DMatrix::from_diagonal(theta),
            MultiplierKind::Autoregression => companion(theta),
            MultiplierKind::GeneralMatrix => from_rvect(theta.as_slice(), self.m, n),
        })
    }
}

fn positive_variance(s: f64) -> Result<()> {
    if s.is_finite() && s > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid("noise", format!("variance {s} must be > 0")))
    }
}

/// Companion matrix with first row `θᵀ` and `I_{n-1}` below-left.
pub fn companion(theta: &DVector<f64>) -> DMatrix<f64> {
    let n = theta.len();
    let mut a = DMatrix::zeros(n, n);
    a.row_mut(0).copy_from(&theta.transpose());
    for i in 1..n {
        a[(i, i - 1)] = 1.0;
    }
    a
}

/// Local posterior moments around a multiplier node for `Θ = θ̂`.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiplierMarginals {
    pub m_x: DVector<f64>,
    pub m_y: DVector<f64>,
    pub v_x: DMatrix<f64>,
    /// `E[(X - m_X)(Y - m_Y)ᵀ]`, `n × m`.
    pub v_xy: DMatrix<f64>,
}

/// Local marginals from moment-form incoming messages.
///
/// With `W̃_Y = (A →V_X Aᵀ + V_Z + ←V_Y)⁻¹`:
///
/// * `V_X = →V_X - →V_X Aᵀ W̃_Y A →V_X`
/// * `V_{XYᵀ} = →V_X Aᵀ W̃_Y ←V_Y`
/// * `m_X = V_X (→W_X →m_X + Aᵀ (V_Z + ←V_Y)⁻¹ ←m_Y)`
/// * `m_Y = ←V_Y W̃_Y →m_Y + →V_Y W̃_Y ←m_Y`
///
/// The last line is the product form of `(I - →V_Y W̃_Y)(→m_Y + →V_Y ←W_Y ←m_Y)`
/// and stays valid for an exactly observed output, `←V_Y = 0`.
pub fn marginals(
    spec: &MultiplierSpec,
    theta: &DVector<f64>,
    fwd_x: &GaussianMoment,
    bwd_y: &GaussianMoment,
) -> Result<MultiplierMarginals> {
    check_msg_dims(spec, fwd_x.dim(), bwd_y.dim())?;
    let tol = Tolerances::default();
    let a = spec.build_a(theta)?;
    let at = a.transpose();
    let vfx = fwd_x.cov();
    let vby = bwd_y.cov();

    let wfx = spd_inverse(vfx, tol.solve).ok_or(Error::SingularSystem("forward V_X"))?;
    let s_inv =
        spd_inverse(&(spec.v_z() + vby), tol.solve).ok_or(Error::SingularSystem("V_Z + ←V_Y"))?;
    let vfy = &a * vfx * &at + spec.v_z();
    let w_tilde = spd_inverse(&(&vfy + vby), tol.solve).ok_or(Error::SingularSystem("W̃_Y"))?;

    let gain = vfx * &at * &w_tilde;
    let v_x = psd_project(&(vfx - &gain * &a * vfx), &tol);
    let v_xy = &gain * vby;
    let m_x = &v_x * (&wfx * fwd_x.mean() + &at * &s_inv * bwd_y.mean());
    let mfy = &a * fwd_x.mean();
    let m_y = vby * &w_tilde * &mfy + &vfy * &w_tilde * bwd_y.mean();
    Ok(MultiplierMarginals {
        m_x,
        m_y,
        v_x,
        v_xy,
    })
}

/// Local marginals from weight-form incoming messages.
///
/// Works on the joint of `(X, E)` with `Z = L E`, `E ~ N(0, I)`, so singular
/// `V_Z`, singular `←W_Y` (including the flat message) and singular `→W_X`
/// are all admissible as long as the local posterior is proper.
pub fn marginals_information(
    spec: &MultiplierSpec,
    theta: &DVector<f64>,
    fwd_x: &GaussianWeight,
    bwd_y: &GaussianWeight,
) -> Result<MultiplierMarginals> {
    check_msg_dims(spec, fwd_x.dim(), bwd_y.dim())?;
    let a = spec.build_a(theta)?;
    let l = spec.noise_factor();
    local_posterior_information(&a, &l, fwd_x, bwd_y)
}

/// Posterior of `(X, Y)` for `Y = A X + L E` with weight-form messages on
/// `X` and `Y` and a standard normal `E`.
pub(crate) fn local_posterior_information(
    a: &DMatrix<f64>,
    l: &DMatrix<f64>,
    fwd_x: &GaussianWeight,
    bwd_y: &GaussianWeight,
) -> Result<MultiplierMarginals> {
    let n = a.ncols();
    let r = l.ncols();
    let mut h = DMatrix::zeros(a.nrows(), n + r);
    h.view_mut((0, 0), (a.nrows(), n)).copy_from(a);
    h.view_mut((0, n), (a.nrows(), r)).copy_from(l);

    let ht = h.transpose();
    let mut lambda = &ht * bwd_y.weight() * &h;
    let mut xi = &ht * bwd_y.weighted_mean();
    {
        let mut top = lambda.view_mut((0, 0), (n, n));
        top += fwd_x.weight();
    }
    for i in 0..r {
        lambda[(n + i, n + i)] += 1.0;
    }
    {
        let mut top = xi.rows_mut(0, n);
        top += fwd_x.weighted_mean();
    }
    let cov = spd_inverse(&lambda, Tolerances::default().solve)
        .ok_or(Error::SingularSystem("local posterior"))?;
    let mean = &cov * xi;
    let m_x = mean.rows(0, n).into_owned();
    let m_y = &h * &mean;
    let v_x = cov.view((0, 0), (n, n)).into_owned();
    let v_xy = cov.rows(0, n) * &ht;
    Ok(MultiplierMarginals {
        m_x,
        m_y,
        v_x,
        v_xy,
    })
}

fn check_msg_dims(spec: &MultiplierSpec, dx: usize, dy: usize) -> Result<()> {
    if dx != spec.n || dy != spec.m {
        return Err(Error::dims(format!(
            "messages have dims ({dx}, {dy}), spec expects ({}, {})",
            spec.n, spec.m
        )));
    }
    Ok(())
}

/// Backward EM message towards Θ from the local marginals.
pub fn em_message(spec: &MultiplierSpec, marg: &MultiplierMarginals) -> Result<EmGaussian> {
    let (n, m) = (spec.n, spec.m);
    if marg.m_x.len() != n
        || marg.m_y.len() != m
        || marg.v_x.shape() != (n, n)
        || marg.v_xy.shape() != (n, m)
    {
        return Err(Error::dims("marginals do not match the multiplier spec"));
    }
    // E[X Xᵀ] and E[X Yᵀ] under the local posterior.
    let exx = &marg.v_x + &marg.m_x * marg.m_x.transpose();
    let exy = &marg.v_xy + &marg.m_x * marg.m_y.transpose();

    let (w, wm) = match spec.kind {
        MultiplierKind::InnerProduct => {
            let s2 = spec.v_z[(0, 0)];
            (exx / s2, exy.column(0) / s2)
        }
        MultiplierKind::Autoregression => {
            let s2 = spec.v_z[(0, 0)];
            (exx / s2, exy.column(0) / s2)
        }
        MultiplierKind::ScalarTimesVector => {
            let wz = spec.w_z.as_ref().ok_or(Error::SingularNoise)?;
            // tr(W_Z V_X) + m_Xᵀ W_Z m_X = tr(W_Z E[XXᵀ]), likewise for E[XYᵀ].
            let w = (wz * &exx).trace();
            let wm = (wz * &exy).trace();
            (DMatrix::from_element(1, 1, w), DVector::from_element(1, wm))
        }
        MultiplierKind::Componentwise => {
            let wz = spec.w_z.as_ref().ok_or(Error::SingularNoise)?;
            let w = wz.component_mul(&exx);
            let wm = wz.component_mul(&exy) * DVector::from_element(m, 1.0);
            (w, wm)
        }
        MultiplierKind::GeneralMatrix => {
            let wz = spec.w_z.as_ref().ok_or(Error::SingularNoise)?;
            let w = kron(wz, &exx);
            let wm = kron(wz, &DMatrix::identity(n, n)) * cvect(&exy);
            (w, wm)
        }
    };
    let w = psd_project(&w, &Tolerances::default());
    Ok(GaussianWeight::new_unchecked(w, wm.into_owned()))
}

/// Local posterior `(m_X, V_X)` for an inner product whose output `S = θ̂ᵀX`
/// carries the Gaussian factor `N(m_S, σ_S²)`.
pub fn fixed_y_posterior(
    fwd_x: &GaussianWeight,
    m_s: f64,
    sigma_s2: f64,
    theta: &DVector<f64>,
) -> Result<GaussianMoment> {
    if !(sigma_s2.is_finite() && sigma_s2 > 0.0) {
        return Err(Error::invalid(
            "sigma_s2",
            format!("{sigma_s2} must be > 0"),
        ));
    }
    if theta.len() != fwd_x.dim() {
        return Err(Error::dims(format!(
            "θ has length {}, message has dim {}",
            theta.len(),
            fwd_x.dim()
        )));
    }
    let w_x = fwd_x.weight() + theta * theta.transpose() / sigma_s2;
    let wm_x = fwd_x.weighted_mean() + theta * (m_s / sigma_s2);
    let v_x = spd_inverse(&w_x, Tolerances::default().solve)
        .ok_or(Error::SingularSystem("fixed-y posterior"))?;
    let m_x = &v_x * wm_x;
    Ok(GaussianMoment::new_unchecked(m_x, v_x))
}

/// EM message backwards through an inner product with an observed output:
/// `←W_Θ = (V_X + m_X m_Xᵀ)/σ_S²`, `←W_Θ ←m_Θ = m_X m_S/σ_S²`.
pub fn em_message_fixed_y(
    fwd_x: &GaussianWeight,
    m_s: f64,
    sigma_s2: f64,
    theta: &DVector<f64>,
) -> Result<EmGaussian> {
    let post = fixed_y_posterior(fwd_x, m_s, sigma_s2, theta)?;
    let m_x = post.mean();
    let w = (post.cov() + m_x * m_x.transpose()) / sigma_s2;
    let wm = m_x * (m_s / sigma_s2);
    Ok(GaussianWeight::new_unchecked(w, wm))
}
