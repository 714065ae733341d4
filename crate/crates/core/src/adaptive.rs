//! Sparsity-adaptive nuisance estimator: the minimum ℓ1-norm coefficient
//! vector whose residual satisfies a gradient cap, a sup-norm cap and an
//! inner-product floor, solved as a linear program.

use crate::data::{FitResult, Method};
use crate::error::{ConstraintFamily, Error, Result};
use crate::linalg::Matrix;
use crate::lp::{simplex_solve, LpProblem, LpStatus, Relation};
use crate::penalized::{penalized_fit, select_lambda, CdConfig, LambdaRate, PenaltySpec};

/// Tightness of the three constraint families.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptiveTuning {
    /// Cap on `‖n⁻¹Zᵀ(t − Zγ)‖∞`.
    pub eta: f64,
    /// Cap on `‖t − Zγ‖∞`.
    pub mu: f64,
    /// Floor on `n⁻¹tᵀ(t − Zγ)`.
    pub rho: f64,
}

impl AdaptiveTuning {
    pub fn new(eta: f64, mu: f64, rho: f64) -> Result<Self> {
        let t = Self { eta, mu, rho };
        t.validate()?;
        Ok(t)
    }

    /// `eta` may be zero (exact normal equations); `mu` and `rho` must be
    /// strictly positive.
    pub fn validate(&self) -> Result<()> {
        if !(self.eta.is_finite() && self.mu.is_finite() && self.rho.is_finite()) {
            return Err(Error::NonFinite("adaptive tuning"));
        }
        if self.eta < 0.0 || self.mu <= 0.0 || self.rho <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "adaptive tuning needs eta >= 0, mu > 0, rho > 0; got eta={}, mu={}, rho={}",
                self.eta, self.mu, self.rho
            )));
        }
        Ok(())
    }
}

/// Which nuisance regression the tuning is for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AdaptiveKind {
    /// Pseudo-response on `Z`.
    Gamma,
    /// Proxy `w` on `Z`.
    Theta,
}

/// Multipliers behind [`default_adaptive_tuning`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptiveConstants {
    pub c_eta: f64,
    /// `mu = c_mu·√r2·√n`
    pub c_mu: f64,
    pub c_rho: f64,
}

impl Default for AdaptiveConstants {
    fn default() -> Self {
        Self {
            c_eta: 0.25,
            c_mu: 1.5,
            c_rho: 0.5,
        }
    }
}

impl AdaptiveConstants {
    /// Both nuisance fits currently share the same defaults.
    pub fn for_kind(_kind: AdaptiveKind) -> Self {
        Self::default()
    }
}

/// `eta = 0.25·log n·√(log p / n)`, `mu = 1.5·√r2·√n`, `rho = 0.5·r2`.
pub fn default_adaptive_tuning(n: usize, p: usize, r2: f64, kind: AdaptiveKind) -> AdaptiveTuning {
    tuning_from_constants(n, p, r2, &AdaptiveConstants::for_kind(kind))
}

pub fn tuning_from_constants(n: usize, p: usize, r2: f64, c: &AdaptiveConstants) -> AdaptiveTuning {
    let nf = n as f64;
    AdaptiveTuning {
        eta: c.c_eta * nf.ln() * ((p as f64).ln() / nf).sqrt(),
        mu: c.c_mu * r2.sqrt() * nf.sqrt(),
        rho: c.c_rho * r2,
    }
}

/// `n⁻¹·tᵀ(t − Zγ̂)` for a lasso fit `γ̂` at the data-driven penalty level.
pub fn preliminary_r2(z: &Matrix, target: &[f64], cd: &CdConfig) -> Result<f64> {
    let n = z.rows();
    let lambda = select_lambda(z, target, LambdaRate::SqrtLogPOverN, 2.0, cd)?;
    let fit = penalized_fit(z, target, &PenaltySpec::lasso(lambda), cd)?;
    Ok(target.iter().zip(&fit.residuals).map(|(t, r)| t * r).sum::<f64>() / n as f64)
}

/// Default tuning driven by a preliminary lasso fit of `target` on `z`.
///
/// A nonpositive plug-in leaves no admissible inner-product floor, which is
/// reported as an infeasible inner-product constraint.
pub fn auto_adaptive_tuning(
    z: &Matrix,
    target: &[f64],
    constants: &AdaptiveConstants,
    cd: &CdConfig,
) -> Result<AdaptiveTuning> {
    let r2 = preliminary_r2(z, target, cd)?;
    if !(r2 > 0.0) {
        return Err(Error::InfeasibleProgram(vec![ConstraintFamily::InnerProduct]));
    }
    let t = tuning_from_constants(z.rows(), z.cols(), r2, constants);
    t.validate()?;
    Ok(t)
}

/// Row families of [`sparse_adaptive_program`] in order: `2p` gradient rows,
/// `2n` residual rows, then the inner-product row.
pub fn sparse_adaptive_program(z: &Matrix, target: &[f64], tuning: &AdaptiveTuning) -> LpProblem {
    let (n, p) = (z.rows(), z.cols());
    let nf = n as f64;
    let gram = z.gram();
    let g: Vec<f64> = z.t_mul_vec(target).into_iter().map(|v| v / nf).collect();
    let split = |row: &mut dyn Iterator<Item = f64>| -> Vec<f64> {
        let pos: Vec<f64> = row.collect();
        let mut out = pos.clone();
        out.extend(pos.iter().map(|v| -v));
        out
    };

    let mut lp = LpProblem::new(vec![1.0; 2 * p]);
    for j in 0..p {
        let row = split(&mut gram.row(j).iter().map(|v| v / nf));
        lp.add(row.clone(), Relation::Le, g[j] + tuning.eta);
        lp.add(row, Relation::Ge, g[j] - tuning.eta);
    }
    for i in 0..n {
        let row = split(&mut z.row(i).iter().copied());
        lp.add(row.clone(), Relation::Le, target[i] + tuning.mu);
        lp.add(row, Relation::Ge, target[i] - tuning.mu);
    }
    let tt = target.iter().map(|t| t * t).sum::<f64>() / nf;
    lp.add(split(&mut g.iter().copied()), Relation::Le, tt - tuning.rho);
    lp
}

/// Worst violation of each constraint family at `gamma`.
pub fn family_violations(
    z: &Matrix,
    target: &[f64],
    tuning: &AdaptiveTuning,
    gamma: &[f64],
) -> [(ConstraintFamily, f64); 3] {
    let nf = z.rows() as f64;
    let fitted = z.mul_vec(gamma);
    let resid: Vec<f64> = target.iter().zip(&fitted).map(|(t, f)| t - f).collect();
    let grad = z.t_mul_vec(&resid);
    let g_viol = grad.iter().fold(0.0_f64, |m, v| m.max(v.abs() / nf - tuning.eta));
    let r_viol = resid.iter().fold(0.0_f64, |m, v| m.max(v.abs() - tuning.mu));
    let ip = target.iter().zip(&resid).map(|(t, r)| t * r).sum::<f64>() / nf;
    [
        (ConstraintFamily::Gradient, g_viol.max(0.0)),
        (ConstraintFamily::Residual, r_viol.max(0.0)),
        (ConstraintFamily::InnerProduct, (tuning.rho - ip).max(0.0)),
    ]
}

const POST_CHECK_TOL: f64 = 1e-7;

/// Minimum ℓ1-norm fit of `target` on `z` under the three constraint
/// families.
pub fn sparse_adaptive_fit(z: &Matrix, target: &[f64], tuning: &AdaptiveTuning) -> Result<FitResult> {
    tuning.validate()?;
    let (n, p) = (z.rows(), z.cols());
    if target.len() != n {
        return Err(Error::DimensionMismatch {
            what: "target length",
            expected: n,
            found: target.len(),
        });
    }
    if n == 0 {
        return Err(Error::InvalidParameter("adaptive fit needs at least one observation".into()));
    }

    let lp = sparse_adaptive_program(z, target, tuning);
    let sol = simplex_solve(&lp)?;
    let gamma: Vec<f64> = (0..p).map(|j| sol.x[j] - sol.x[p + j]).collect();
    match sol.status {
        LpStatus::Optimal => {}
        LpStatus::Unbounded => return Err(Error::UnboundedProgram),
        LpStatus::Infeasible => {
            let viol = family_violations(z, target, tuning, &gamma);
            let mut families: Vec<ConstraintFamily> =
                viol.iter().filter(|(_, v)| *v > 1e-9).map(|(f, _)| *f).collect();
            if families.is_empty() {
                let worst = viol.iter().max_by(|a, b| a.1.total_cmp(&b.1)).unwrap();
                families.push(worst.0);
            }
            return Err(Error::InfeasibleProgram(families));
        }
    }

    let worst = family_violations(z, target, tuning, &gamma)
        .iter()
        .fold(0.0_f64, |m, (_, v)| m.max(*v));
    if worst > POST_CHECK_TOL {
        return Err(Error::NumericalBreakdown(worst));
    }
    let tuning_rec = vec![("eta", tuning.eta), ("mu", tuning.mu), ("rho", tuning.rho)];
    Ok(FitResult::from_coef(
        z,
        target,
        gamma,
        Method::SparseAdaptive,
        tuning_rec,
        true,
        sol.pivots,
    ))
}
