use crate::linalg::{self, Matrix};
use thiserror::Error;

const SYMMETRY_TOL: f64 = 1e-12;

pub const DEFAULT_BETA: f64 = 1e-3;
pub const DEFAULT_KAPPA: f64 = 1e-4;
pub const DEFAULT_DAMPING_FLOOR: f64 = 3.0;

/// A gain that failed validation, named by its configuration key.
#[derive(Debug, Error, Clone, PartialEq)]
#[error("{key}: {constraint}")]
pub struct GainError {
    pub key: &'static str,
    pub constraint: String,
}

impl GainError {
    fn new(key: &'static str, constraint: impl Into<String>) -> Self {
        Self { key, constraint: constraint.into() }
    }
}

/// Raw gain values before validation.
#[derive(Debug, Clone, PartialEq)]
pub struct GainParams {
    pub alpha: f64,
    pub gamma: Matrix,
    pub q_f: Matrix,
    pub q_s: Matrix,
    pub q_d: Matrix,
    pub q_r: Matrix,
    pub l: Matrix,
    pub beta: f64,
    pub kappa: f64,
    /// Smallest damping magnitude used when the learned damping is turned into
    /// a reference filter (see `ReferenceMode::Consistent`).
    pub damping_floor: f64,
}

impl GainParams {
    /// Isotropic gains with the default forgetting, regularisation and floor.
    pub fn isotropic(dim: usize, alpha: f64, gamma: f64, q: f64, q_r: f64, l: f64) -> Self {
        let eye = Matrix::identity(dim, dim);
        Self {
            alpha,
            gamma: &eye * gamma,
            q_f: &eye * q,
            q_s: &eye * q,
            q_d: &eye * q,
            q_r: &eye * q_r,
            l: &eye * l,
            beta: DEFAULT_BETA,
            kappa: DEFAULT_KAPPA,
            damping_floor: DEFAULT_DAMPING_FLOOR,
        }
    }
}

/// Validated controller gains with cached minimal eigenvalues of `Γ` and `L`.
#[derive(Debug, Clone, PartialEq)]
pub struct GainSet {
    params: GainParams,
    lambda_gamma: f64,
    lambda_l: f64,
    l_inv_t: Matrix,
}

impl GainSet {
    pub fn new(params: GainParams) -> Result<Self, GainError> {
        let p = &params;
        if !(p.alpha.is_finite() && p.alpha > 0.0) {
            return Err(GainError::new("alpha", "must be > 0"));
        }
        let n = p.gamma.nrows();
        if n == 0 {
            return Err(GainError::new("gamma", "must be a non-empty square matrix"));
        }
        let matrices: [(&'static str, &Matrix, bool); 6] = [
            ("gamma", &p.gamma, true),
            ("q_f", &p.q_f, true),
            ("q_s", &p.q_s, true),
            ("q_d", &p.q_d, true),
            ("q_r", &p.q_r, true),
            ("l", &p.l, false),
        ];
        for (key, m, symmetric) in matrices {
            if m.shape() != (n, n) {
                return Err(GainError::new(key, format!("expected {n}x{n} matrix, got {}x{}", m.nrows(), m.ncols())));
            }
            if !linalg::all_finite(m.iter()) {
                return Err(GainError::new(key, "entries must be finite"));
            }
            if symmetric && !linalg::is_symmetric(m, SYMMETRY_TOL) {
                return Err(GainError::new(key, "not symmetric"));
            }
            if !linalg::is_positive_definite(m) {
                return Err(GainError::new(key, "not positive definite"));
            }
        }
        if !(p.beta.is_finite() && p.beta >= 0.0) {
            return Err(GainError::new("beta", "must be >= 0"));
        }
        if !(p.kappa.is_finite() && p.kappa > 0.0) {
            return Err(GainError::new("kappa", "must be > 0"));
        }
        if !(p.damping_floor.is_finite() && p.damping_floor > 0.0) {
            return Err(GainError::new("damping_floor", "must be > 0"));
        }
        let l_inv_t = p
            .l
            .clone()
            .try_inverse()
            .ok_or_else(|| GainError::new("l", "not invertible"))?
            .transpose();
        Ok(Self {
            lambda_gamma: linalg::min_eigenvalue(&p.gamma),
            lambda_l: linalg::min_eigenvalue(&p.l),
            l_inv_t,
            params,
        })
    }

    pub fn params(&self) -> &GainParams {
        &self.params
    }
    pub fn dim(&self) -> usize {
        self.params.gamma.nrows()
    }
    pub fn alpha(&self) -> f64 {
        self.params.alpha
    }
    pub fn gamma(&self) -> &Matrix {
        &self.params.gamma
    }
    pub fn q_f(&self) -> &Matrix {
        &self.params.q_f
    }
    pub fn q_s(&self) -> &Matrix {
        &self.params.q_s
    }
    pub fn q_d(&self) -> &Matrix {
        &self.params.q_d
    }
    pub fn q_r(&self) -> &Matrix {
        &self.params.q_r
    }
    pub fn l(&self) -> &Matrix {
        &self.params.l
    }
    pub fn beta(&self) -> f64 {
        self.params.beta
    }
    pub fn kappa(&self) -> f64 {
        self.params.kappa
    }
    pub fn damping_floor(&self) -> f64 {
        self.params.damping_floor
    }
    pub fn lambda_gamma(&self) -> f64 {
        self.lambda_gamma
    }
    pub fn lambda_l(&self) -> f64 {
        self.lambda_l
    }
    /// `L⁻ᵀ Q_r`, the gain of the trajectory law.
    pub fn trajectory_gain(&self) -> Matrix {
        &self.l_inv_t * &self.params.q_r
    }
}
