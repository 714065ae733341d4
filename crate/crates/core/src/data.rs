//! Domain types shared by the estimators and the test.

use std::fmt;

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Observed data for one test: response `y`, error-prone proxy `w = x + u`,
/// exactly measured covariates `z` (n×p) and the known variance of `u`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub y: Vec<f64>,
    pub w: Vec<f64>,
    pub z: Matrix,
    pub sigma_u2: f64,
}

impl Dataset {
    /// Builds and validates a dataset.
    pub fn new(y: Vec<f64>, w: Vec<f64>, z: Matrix, sigma_u2: f64) -> Result<Self> {
        validate_dataset(Self { y, w, z, sigma_u2 })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.z.cols()
    }
}

/// Checks the shape and value invariants of a dataset and hands it back.
pub fn validate_dataset(d: Dataset) -> Result<Dataset> {
    let n = d.y.len();
    if n == 0 {
        return Err(Error::DimensionMismatch {
            what: "response length",
            expected: 1,
            found: 0,
        });
    }
    if d.w.len() != n {
        return Err(Error::DimensionMismatch {
            what: "proxy w length",
            expected: n,
            found: d.w.len(),
        });
    }
    if d.z.rows() != n {
        return Err(Error::DimensionMismatch {
            what: "covariate matrix rows",
            expected: n,
            found: d.z.rows(),
        });
    }
    if !d.y.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("y"));
    }
    if !d.w.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("w"));
    }
    if !d.z.is_finite() {
        return Err(Error::NonFinite("z"));
    }
    if !d.sigma_u2.is_finite() {
        return Err(Error::NonFinite("sigma_u2"));
    }
    if d.sigma_u2 < 0.0 {
        return Err(Error::NegativeVariance(d.sigma_u2));
    }
    Ok(d)
}

/// Null value and level of the two-sided test `H0: β = β*`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hypothesis {
    pub beta_star: f64,
    pub alpha: f64,
}

impl Hypothesis {
    pub fn new(beta_star: f64, alpha: f64) -> Result<Self> {
        if !beta_star.is_finite() {
            return Err(Error::NonFinite("beta_star"));
        }
        check_alpha(alpha)?;
        Ok(Self { beta_star, alpha })
    }

    /// Level 0.05.
    pub fn at(beta_star: f64) -> Self {
        Self {
            beta_star,
            alpha: 0.05,
        }
    }
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("alpha must lie in (0, 1), got {alpha}")))
    }
}

/// How a nuisance coefficient vector was estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Ols,
    Lasso,
    Scad,
    Mcp,
    SparseAdaptive,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Ols => "ols",
            Method::Lasso => "lasso",
            Method::Scad => "scad",
            Method::Mcp => "mcp",
            Method::SparseAdaptive => "adaptive",
        })
    }
}

/// A fitted linear predictor `z·coef` of some target.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub coef: Vec<f64>,
    /// `target − z·coef`
    pub residuals: Vec<f64>,
    pub method: Method,
    /// Every tuning scalar the fit used, by name.
    pub tuning: Vec<(&'static str, f64)>,
    pub converged: bool,
    pub iterations: usize,
}

impl FitResult {
    /// Assembles a fit, computing residuals from the coefficients.
    pub(crate) fn from_coef(
        z: &Matrix,
        target: &[f64],
        coef: Vec<f64>,
        method: Method,
        tuning: Vec<(&'static str, f64)>,
        converged: bool,
        iterations: usize,
    ) -> Self {
        let fitted = z.mul_vec(&coef);
        let residuals = target.iter().zip(&fitted).map(|(t, f)| t - f).collect();
        Self {
            coef,
            residuals,
            method,
            tuning,
            converged,
            iterations,
        }
    }

    pub fn tuning_value(&self, name: &str) -> Option<f64> {
        self.tuning.iter().find(|(k, _)| *k == name).map(|&(_, v)| v)
    }

    /// Number of nonzero coefficients.
    pub fn support_size(&self) -> usize {
        self.coef.iter().filter(|c| **c != 0.0).count()
    }
}

/// `v = y − w·β*`
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoResponse {
    pub v: Vec<f64>,
}

pub fn pseudo_response(d: &Dataset, beta_star: f64) -> PseudoResponse {
    PseudoResponse {
        v: d.y.iter().zip(&d.w).map(|(y, w)| y - w * beta_star).collect(),
    }
}

/// Outcome of one DEF score test.
#[derive(Debug, Clone, PartialEq)]
pub struct TestResult {
    pub beta_star: f64,
    pub alpha: f64,
    /// `T = n^{-1/2} Σ sᵢ`
    pub t_raw: f64,
    /// `σ̂ = (n⁻¹ Σ sᵢ²)^{1/2}`
    pub sigma_hat: f64,
    /// `T / σ̂`
    pub t_df: f64,
    pub p_value: f64,
    pub reject: bool,
    pub n: usize,
    pub p: usize,
    pub gamma_method: Method,
    pub theta_method: Method,
    pub gamma_tuning: Vec<(&'static str, f64)>,
    pub theta_tuning: Vec<(&'static str, f64)>,
}
