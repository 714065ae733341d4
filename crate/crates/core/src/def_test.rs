//! The DEF score statistic, its test, test-inversion confidence regions,
//! local power theory and the replicate-based measurement error variance.

use rayon::prelude::*;

use crate::adaptive::{auto_adaptive_tuning, sparse_adaptive_fit, AdaptiveConstants, AdaptiveTuning};
use crate::data::{check_alpha, pseudo_response, Dataset, FitResult, Hypothesis, TestResult};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::normal::{std_normal_cdf, std_normal_quantile, two_sided_p_value};
use crate::ols::ols_fit;
use crate::penalized::{penalized_fit, select_lambda, CdConfig, LambdaRate, PenaltyKind, PenaltySpec};

/// Variance floor below which the statistic is undefined.
pub const MIN_VARIANCE: f64 = 1e-14;

/// Penalty level for a penalized nuisance fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LambdaChoice {
    Fixed(f64),
    /// `multiplier·σ̂·rate(n, p)` with `σ̂` from a preliminary lasso.
    Auto { rate: LambdaRate, multiplier: f64 },
}

impl Default for LambdaChoice {
    fn default() -> Self {
        LambdaChoice::Auto {
            rate: LambdaRate::SqrtLogPOverN,
            multiplier: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenalizedChoice {
    pub kind: PenaltyKind,
    /// SCAD `a` or MCP `b`; ignored for the lasso.
    pub shape: f64,
    pub lambda: LambdaChoice,
    pub cd: CdConfig,
}

impl PenalizedChoice {
    pub fn auto(kind: PenaltyKind) -> Self {
        Self {
            kind,
            shape: kind.default_shape(),
            lambda: LambdaChoice::default(),
            cd: CdConfig::default(),
        }
    }

    fn spec(&self, lambda: f64) -> PenaltySpec {
        PenaltySpec {
            kind: self.kind,
            lambda,
            shape: self.shape,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AdaptiveChoice {
    Fixed(AdaptiveTuning),
    /// Defaults scaled by a preliminary lasso fit of the target.
    Auto { constants: AdaptiveConstants, cd: CdConfig },
}

/// How a nuisance regression (γ̂ or θ̂) is estimated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EstimatorChoice {
    Ols,
    Penalized(PenalizedChoice),
    SparseAdaptive(AdaptiveChoice),
}

impl EstimatorChoice {
    pub fn lasso() -> Self {
        Self::Penalized(PenalizedChoice::auto(PenaltyKind::Lasso))
    }

    pub fn scad() -> Self {
        Self::Penalized(PenalizedChoice::auto(PenaltyKind::Scad))
    }

    pub fn mcp() -> Self {
        Self::Penalized(PenalizedChoice::auto(PenaltyKind::Mcp))
    }

    pub fn adaptive() -> Self {
        Self::SparseAdaptive(AdaptiveChoice::Auto {
            constants: AdaptiveConstants::default(),
            cd: CdConfig::default(),
        })
    }

    /// Fits `target` on `z`.
    pub fn fit(&self, z: &Matrix, target: &[f64]) -> Result<FitResult> {
        match self {
            EstimatorChoice::Ols => ols_fit(z, target),
            EstimatorChoice::Penalized(pc) => {
                let lambda = match pc.lambda {
                    LambdaChoice::Fixed(l) => l,
                    LambdaChoice::Auto { rate, multiplier } => {
                        select_lambda(z, target, rate, multiplier, &pc.cd)?
                    }
                };
                penalized_fit(z, target, &pc.spec(lambda), &pc.cd)
            }
            EstimatorChoice::SparseAdaptive(ac) => {
                let tuning = match ac {
                    AdaptiveChoice::Fixed(t) => *t,
                    AdaptiveChoice::Auto { constants, cd } => auto_adaptive_tuning(z, target, constants, cd)?,
                };
                sparse_adaptive_fit(z, target, &tuning)
            }
        }
    }
}

/// Summands `sᵢ = (wᵢ − zᵢᵀθ̂)(yᵢ − wᵢβ* − zᵢᵀγ̂) + σ_U²β*`.
pub fn score_terms(d: &Dataset, beta_star: f64, gamma: &[f64], theta: &[f64]) -> Result<Vec<f64>> {
    let p = d.p();
    for (what, v) in [("gamma coefficients", gamma), ("theta coefficients", theta)] {
        if v.len() != p {
            return Err(Error::DimensionMismatch {
                what,
                expected: p,
                found: v.len(),
            });
        }
    }
    let zg = d.z.mul_vec(gamma);
    let zt = d.z.mul_vec(theta);
    let shift = d.sigma_u2 * beta_star;
    Ok((0..d.n())
        .map(|i| (d.w[i] - zt[i]) * (d.y[i] - d.w[i] * beta_star - zg[i]) + shift)
        .collect())
}

/// Standardized score statistic from already fitted nuisance regressions.
pub fn def_statistic(d: &Dataset, hyp: &Hypothesis, gamma_hat: &FitResult, theta_hat: &FitResult) -> Result<TestResult> {
    check_alpha(hyp.alpha)?;
    let s = score_terms(d, hyp.beta_star, &gamma_hat.coef, &theta_hat.coef)?;
    let n = s.len() as f64;
    let sum: f64 = s.iter().sum();
    let var = s.iter().map(|v| v * v).sum::<f64>() / n;
    // A single summand carries no information about its spread.
    if s.len() < 2 || !(var >= MIN_VARIANCE) {
        return Err(Error::DegenerateVariance(var));
    }
    let t_raw = sum / n.sqrt();
    let sigma_hat = var.sqrt();
    let t_df = t_raw / sigma_hat;
    let p_value = two_sided_p_value(t_df);
    Ok(TestResult {
        beta_star: hyp.beta_star,
        alpha: hyp.alpha,
        t_raw,
        sigma_hat,
        t_df,
        p_value,
        reject: p_value < hyp.alpha,
        n: d.n(),
        p: d.p(),
        gamma_method: gamma_hat.method,
        theta_method: theta_hat.method,
        gamma_tuning: gamma_hat.tuning.clone(),
        theta_tuning: theta_hat.tuning.clone(),
    })
}

/// Fits γ̂ on the pseudo-response and θ̂ on `w`, then evaluates the test.
pub fn run_test(d: &Dataset, hyp: &Hypothesis, gamma: &EstimatorChoice, theta: &EstimatorChoice) -> Result<TestResult> {
    check_alpha(hyp.alpha)?;
    let theta_hat = theta.fit(&d.z, &d.w)?;
    run_test_with_theta(d, hyp, gamma, &theta_hat)
}

/// As [`run_test`], reusing a θ̂ that does not depend on `β*`.
pub fn run_test_with_theta(
    d: &Dataset,
    hyp: &Hypothesis,
    gamma: &EstimatorChoice,
    theta_hat: &FitResult,
) -> Result<TestResult> {
    let v = pseudo_response(d, hyp.beta_star).v;
    let gamma_hat = gamma.fit(&d.z, &v)?;
    def_statistic(d, hyp, &gamma_hat, theta_hat)
}

/// Evenly spaced grid `lo, lo + step, …` up to `hi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl Grid {
    pub fn new(lo: f64, hi: f64, step: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && step.is_finite()) {
            return Err(Error::NonFinite("grid"));
        }
        if !(lo < hi) || !(step > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "grid needs lo < hi and step > 0, got {lo}:{hi}:{step}"
            )));
        }
        Ok(Self { lo, hi, step })
    }

    pub fn points(&self) -> Vec<f64> {
        let count = ((self.hi - self.lo) / self.step * (1.0 + 1e-12)).floor() as usize + 1;
        (0..count).map(|k| self.lo + k as f64 * self.step).collect()
    }
}

/// Two-pass search: a coarse pass over `± half_width_se` standard errors
/// around a moment estimate, then `fine_intervals + 1` points over the
/// accepted stretch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AutoGrid {
    pub coarse_points: usize,
    pub half_width_se: f64,
    pub fine_intervals: usize,
}

impl Default for AutoGrid {
    fn default() -> Self {
        Self {
            coarse_points: 41,
            half_width_se: 10.0,
            fine_intervals: 400,
        }
    }
}

impl AutoGrid {
    pub fn validate(&self) -> Result<()> {
        if self.coarse_points < 2 || self.fine_intervals < 1 || !(self.half_width_se > 0.0 && self.half_width_se.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "automatic grid needs coarse_points >= 2, fine_intervals >= 1 and a positive half width, got {self:?}"
            )));
        }
        Ok(())
    }
}

/// Where a confidence region is searched.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GridSpec {
    Auto(AutoGrid),
    Explicit(Grid),
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec::Auto(AutoGrid::default())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceRegion {
    /// Accepted grid points, ascending.
    pub accepted: Vec<f64>,
    pub interval_hull: (f64, f64),
    /// The grid the accepted points were taken from.
    pub grid: Grid,
    pub alpha: f64,
    /// Number of γ̂ refits performed.
    pub evaluations: usize,
}

impl ConfidenceRegion {
    pub fn contains_hull(&self, beta: f64) -> bool {
        self.interval_hull.0 <= beta && beta <= self.interval_hull.1
    }
}

/// `T_DF` at each `β` of `betas`, in order. Grid points are evaluated in
/// parallel; θ̂ is fitted once beforehand.
pub fn scan(d: &Dataset, betas: &[f64], gamma: &EstimatorChoice, theta_hat: &FitResult) -> Result<Vec<f64>> {
    let results: Vec<Result<f64>> = betas
        .par_iter()
        .map(|&b| run_test_with_theta(d, &Hypothesis::at(b), gamma, theta_hat).map(|r| r.t_df))
        .collect();
    results.into_iter().collect()
}

/// Grid points whose `|T_DF|` does not exceed the two-sided critical value.
pub fn accepted_points(betas: &[f64], t_df: &[f64], alpha: f64) -> Result<Vec<f64>> {
    check_alpha(alpha)?;
    let crit = std_normal_quantile(1.0 - alpha / 2.0)?;
    Ok(betas
        .iter()
        .zip(t_df)
        .filter(|(_, t)| t.abs() <= crit)
        .map(|(b, _)| *b)
        .collect())
}

/// Set of `β` values not rejected at level `alpha`.
pub fn confidence_region(
    d: &Dataset,
    alpha: f64,
    gamma: &EstimatorChoice,
    theta: &EstimatorChoice,
    grid: GridSpec,
) -> Result<ConfidenceRegion> {
    check_alpha(alpha)?;
    let theta_hat = theta.fit(&d.z, &d.w)?;
    let (grid, betas, t_df, evaluations) = match grid {
        GridSpec::Explicit(g) => {
            let betas = g.points();
            let t = scan(d, &betas, gamma, &theta_hat)?;
            let n = betas.len();
            (g, betas, t, n)
        }
        GridSpec::Auto(spec) => auto_grid(d, alpha, gamma, &theta_hat, &spec)?,
    };
    let accepted = accepted_points(&betas, &t_df, alpha)?;
    let (Some(&lo), Some(&hi)) = (accepted.first(), accepted.last()) else {
        return Err(Error::EmptyRegion);
    };
    Ok(ConfidenceRegion {
        interval_hull: (lo, hi),
        accepted,
        grid,
        alpha,
        evaluations,
    })
}

/// Moment estimate ignoring the γ̂ adjustment:
/// `β̂ = Σ r_W y / (Σ r_W w − nσ_U²)` with `r_W` the θ̂ residuals.
/// Returns the estimate and the denominator.
pub fn naive_estimate(d: &Dataset, theta_hat: &FitResult) -> (f64, f64) {
    let r = &theta_hat.residuals;
    let num: f64 = r.iter().zip(&d.y).map(|(a, b)| a * b).sum();
    let den: f64 = r.iter().zip(&d.w).map(|(a, b)| a * b).sum::<f64>() - d.n() as f64 * d.sigma_u2;
    (num / den, den)
}

fn auto_grid(
    d: &Dataset,
    alpha: f64,
    gamma: &EstimatorChoice,
    theta_hat: &FitResult,
    spec: &AutoGrid,
) -> Result<(Grid, Vec<f64>, Vec<f64>, usize)> {
    spec.validate()?;
    let (center, den) = naive_estimate(d, theta_hat);
    if !center.is_finite() || den.abs() <= 1e-12 * d.n() as f64 {
        return Err(Error::InvalidParameter(
            "cannot center an automatic grid for this dataset; pass an explicit grid".into(),
        ));
    }
    let at_center = run_test_with_theta(d, &Hypothesis::at(center), gamma, theta_hat)?;
    let se = (d.n() as f64).sqrt() * at_center.sigma_hat / den.abs();

    let coarse = Grid {
        lo: center - spec.half_width_se * se,
        hi: center + spec.half_width_se * se,
        step: 2.0 * spec.half_width_se * se / (spec.coarse_points - 1) as f64,
    };
    let coarse_betas: Vec<f64> = (0..spec.coarse_points).map(|k| coarse.lo + k as f64 * coarse.step).collect();
    let coarse_t = scan(d, &coarse_betas, gamma, theta_hat)?;
    let accepted = accepted_points(&coarse_betas, &coarse_t, alpha)?;
    let (lo, hi) = match (accepted.first(), accepted.last()) {
        (Some(&a), Some(&b)) => (a - coarse.step, b + coarse.step),
        _ => {
            let best = coarse_t
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
                .map(|(k, _)| coarse_betas[k])
                .unwrap_or(center);
            (best - 2.0 * coarse.step, best + 2.0 * coarse.step)
        }
    };
    let fine = Grid {
        lo,
        hi,
        step: (hi - lo) / spec.fine_intervals as f64,
    };
    let fine_betas: Vec<f64> = (0..=spec.fine_intervals).map(|k| lo + k as f64 * fine.step).collect();
    let fine_t = scan(d, &fine_betas, gamma, theta_hat)?;
    let evaluations = 1 + spec.coarse_points + fine_betas.len();
    Ok((fine, fine_betas, fine_t, evaluations))
}

/// Measurement error variance of the replicate average from an n×m table
/// of repeated proxy measurements: the pooled variance of all pairwise
/// differences (each pair of columns centered separately), divided by `2m`.
pub fn estimate_sigma_u2_from_replicates(reps: &Matrix) -> Result<f64> {
    let (n, m) = (reps.rows(), reps.cols());
    if m < 2 {
        return Err(Error::TooFewReplicates(m));
    }
    if n < 2 {
        return Err(Error::InvalidParameter(format!(
            "replicate variance needs at least 2 subjects, got {n}"
        )));
    }
    if !reps.is_finite() {
        return Err(Error::NonFinite("replicates"));
    }
    let mut ss = 0.0;
    let mut dof = 0usize;
    for j in 0..m {
        for k in j + 1..m {
            let diffs: Vec<f64> = (0..n).map(|i| reps[(i, k)] - reps[(i, j)]).collect();
            let mean = diffs.iter().sum::<f64>() / n as f64;
            ss += diffs.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
            dof += n - 1;
        }
    }
    Ok(ss / dof as f64 / (2 * m) as f64)
}

/// Inputs to the local-alternative power formula.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoncentralityInputs {
    /// Residual variance of the proxy model.
    pub sigma_xz2: f64,
    /// Standard deviation of the score summands.
    pub sigma_dr: f64,
    /// Local drift: the true slope is `β* + c/√n`.
    pub c: f64,
}

impl NoncentralityInputs {
    pub fn new(sigma_xz2: f64, sigma_dr: f64, c: f64) -> Result<Self> {
        if !(sigma_xz2 > 0.0 && sigma_dr > 0.0) || !c.is_finite() || !sigma_xz2.is_finite() || !sigma_dr.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "need sigma_xz2 > 0, sigma_dr > 0, finite c; got {sigma_xz2}, {sigma_dr}, {c}"
            )));
        }
        Ok(Self { sigma_xz2, sigma_dr, c })
    }
}

/// `c·σ²_{X,Z}/σ_dr`
pub fn noncentrality(inp: &NoncentralityInputs) -> f64 {
    inp.c * inp.sigma_xz2 / inp.sigma_dr
}

/// `Φ(−z − ncp) + Φ(−z + ncp)` with `z = Φ⁻¹(1 − α/2)`.
pub fn theoretical_power(inp: &NoncentralityInputs, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let z = std_normal_quantile(1.0 - alpha / 2.0)?;
    let ncp = noncentrality(inp);
    Ok(std_normal_cdf(-z - ncp) + std_normal_cdf(-z + ncp))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Method;

    fn zero_fit(p: usize, n: usize, target: &[f64]) -> FitResult {
        FitResult::from_coef(&Matrix::zeros(n, p), target, vec![0.0; p], Method::Ols, Vec::new(), true, 0)
    }

    #[test]
    fn micro_example() {
        let d = Dataset::new(vec![1.0, 2.0], vec![1.0, 2.0], Matrix::zeros(2, 1), 0.3).unwrap();
        let g = zero_fit(1, 2, &d.y);
        let t = zero_fit(1, 2, &d.w);
        let r = def_statistic(&d, &Hypothesis::at(0.0), &g, &t).unwrap();
        assert!((r.t_raw - 5.0 / 2f64.sqrt()).abs() < 1e-14);
        assert!((r.sigma_hat * r.sigma_hat - 8.5).abs() < 1e-13);
        assert!((r.t_df - 1.212678125181665).abs() < 1e-14, "{}", r.t_df);
        assert!(!r.reject);
    }

    #[test]
    fn zero_residuals_are_degenerate() {
        let d = Dataset::new(vec![0.0; 3], vec![0.0; 3], Matrix::zeros(3, 1), 0.5).unwrap();
        let f = zero_fit(1, 3, &d.y);
        let err = def_statistic(&d, &Hypothesis::at(0.0), &f, &f).unwrap_err();
        assert!(matches!(err, Error::DegenerateVariance(_)));
    }

    #[test]
    fn measurement_error_term_vanishes_at_zero_null() {
        let z = Matrix::from_fn(30, 2, |i, j| ((i * (j + 2)) % 7) as f64 - 3.0);
        let y: Vec<f64> = (0..30).map(|i| (i as f64 * 0.37).sin()).collect();
        let w: Vec<f64> = (0..30).map(|i| (i as f64 * 0.91).cos()).collect();
        let a = Dataset::new(y.clone(), w.clone(), z.clone(), 0.0).unwrap();
        let b = Dataset::new(y, w, z, 0.7).unwrap();
        let h = Hypothesis::at(0.0);
        let ra = run_test(&a, &h, &EstimatorChoice::Ols, &EstimatorChoice::Ols).unwrap();
        let rb = run_test(&b, &h, &EstimatorChoice::Ols, &EstimatorChoice::Ols).unwrap();
        assert_eq!(ra.t_df, rb.t_df);
    }

    fn lowdim_fixture(seed: u64) -> Dataset {
        let mut s = seed;
        let mut u = move || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let n = 60;
        let z = Matrix::from_fn(n, 3, |_, _| 2.0 * u());
        let x: Vec<f64> = (0..n).map(|i| z[(i, 0)] + u()).collect();
        let w: Vec<f64> = x.iter().map(|v| v + 0.3 * u()).collect();
        let y: Vec<f64> = (0..n).map(|i| 0.8 * x[i] + z[(i, 1)] + u()).collect();
        Dataset::new(y, w, z, 0.0075).unwrap()
    }

    #[test]
    fn statistic_invariant_to_joint_rescaling() {
        let d = lowdim_fixture(5);
        let k = 3.7;
        let scaled = Dataset::new(
            d.y.iter().map(|v| v * k).collect(),
            d.w.iter().map(|v| v * k).collect(),
            d.z.clone(),
            d.sigma_u2 * k * k,
        )
        .unwrap();
        let h = Hypothesis::at(0.6);
        let a = run_test(&d, &h, &EstimatorChoice::Ols, &EstimatorChoice::Ols).unwrap();
        let b = run_test(&scaled, &h, &EstimatorChoice::Ols, &EstimatorChoice::Ols).unwrap();
        assert!((a.t_df - b.t_df).abs() < 1e-9);
        assert!((b.t_raw / a.t_raw - k * k).abs() < 1e-9);
    }

    #[test]
    fn zero_lambda_lasso_matches_ols() {
        let d = lowdim_fixture(9);
        let zero = EstimatorChoice::Penalized(PenalizedChoice {
            lambda: LambdaChoice::Fixed(0.0),
            cd: CdConfig {
                tol: 1e-12,
                ..CdConfig::default()
            },
            ..PenalizedChoice::auto(PenaltyKind::Lasso)
        });
        let h = Hypothesis::at(0.5);
        let a = run_test(&d, &h, &zero, &zero).unwrap();
        let b = run_test(&d, &h, &EstimatorChoice::Ols, &EstimatorChoice::Ols).unwrap();
        assert!((a.t_df - b.t_df).abs() < 1e-6);
    }

    #[test]
    fn single_observation_fails() {
        let d = Dataset::new(vec![1.0], vec![1.0], Matrix::zeros(1, 0), 0.1).unwrap();
        let err = run_test(&d, &Hypothesis::at(0.0), &EstimatorChoice::Ols, &EstimatorChoice::Ols).unwrap_err();
        assert!(matches!(err, Error::DegenerateVariance(_)));
        assert!(run_test(&d, &Hypothesis::at(0.0), &EstimatorChoice::lasso(), &EstimatorChoice::lasso()).is_err());
    }

    #[test]
    fn decision_p_value_and_quantile_agree() {
        let z = std_normal_quantile(0.975).unwrap();
        for seed in 0..40 {
            let d = lowdim_fixture(seed);
            for b in [0.0, 0.4, 0.8, 1.2] {
                let r = run_test(&d, &Hypothesis::at(b), &EstimatorChoice::Ols, &EstimatorChoice::Ols).unwrap();
                assert!((0.0..=1.0).contains(&r.p_value));
                if (r.t_df.abs() - z).abs() > 1e-12 {
                    assert_eq!(r.reject, r.t_df.abs() > z);
                    assert_eq!(r.reject, r.p_value < 0.05);
                }
            }
        }
    }

    #[test]
    fn explicit_grid_regions_are_nested_in_alpha() {
        let d = lowdim_fixture(21);
        let grid = GridSpec::Explicit(Grid::new(-1.0, 3.0, 0.01).unwrap());
        let wide = confidence_region(&d, 0.01, &EstimatorChoice::Ols, &EstimatorChoice::Ols, grid).unwrap();
        let narrow = confidence_region(&d, 0.2, &EstimatorChoice::Ols, &EstimatorChoice::Ols, grid).unwrap();
        assert!(narrow.accepted.iter().all(|b| wide.accepted.contains(b)));
        assert!(wide.accepted.len() > narrow.accepted.len());
        for b in &narrow.accepted {
            let r = run_test(&d, &Hypothesis::new(*b, 0.2).unwrap(), &EstimatorChoice::Ols, &EstimatorChoice::Ols)
                .unwrap();
            assert!(r.t_df.abs() <= std_normal_quantile(0.9).unwrap());
        }
    }

    #[test]
    fn automatic_grid_brackets_the_truth() {
        let d = lowdim_fixture(3);
        let r = confidence_region(&d, 0.05, &EstimatorChoice::Ols, &EstimatorChoice::Ols, GridSpec::default()).unwrap();
        assert!(r.interval_hull.0 < r.interval_hull.1);
        assert!(r.contains_hull(0.8), "{:?}", r.interval_hull);
        assert_eq!(r.evaluations, 1 + 41 + 401);
        assert!(r.accepted.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn far_grid_is_empty() {
        let d = lowdim_fixture(4);
        let grid = GridSpec::Explicit(Grid::new(500.0, 600.0, 10.0).unwrap());
        let err = confidence_region(&d, 0.05, &EstimatorChoice::Ols, &EstimatorChoice::Ols, grid).unwrap_err();
        assert!(matches!(err, Error::EmptyRegion));
    }

    #[test]
    fn oversized_step_gives_single_point() {
        let g = Grid::new(0.0, 1.0, 5.0).unwrap();
        assert_eq!(g.points(), vec![0.0]);
        assert_eq!(Grid::new(0.0, 1.0, 0.25).unwrap().points().len(), 5);
        assert!(Grid::new(1.0, 1.0, 0.1).is_err());
        assert!(Grid::new(0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn identical_replicates_give_zero() {
        let m = Matrix::from_fn(5, 3, |i, _| i as f64);
        assert_eq!(estimate_sigma_u2_from_replicates(&m).unwrap(), 0.0);
    }

    #[test]
    fn replicate_estimator_constructed_variance() {
        // Column 0 = 0; column 1 = a; column 2 = a + b. Pair differences are
        // a, a + b and b. With a = (1, -1, 1, -1), b = (1, 1, -1, -1) each
        // centered difference set has sum of squares 4, 8, 4 over 3 dof each:
        // pooled variance 16/9.
        let a = [1.0, -1.0, 1.0, -1.0];
        let b = [1.0, 1.0, -1.0, -1.0];
        let scale = (6.0f64 / (16.0 / 9.0)).sqrt();
        let m = Matrix::from_fn(4, 3, |i, j| match j {
            0 => 7.0,
            1 => 7.0 + scale * a[i],
            _ => 7.0 + scale * (a[i] + b[i]),
        });
        let est = estimate_sigma_u2_from_replicates(&m).unwrap();
        assert!((est - 1.0).abs() < 1e-12, "{est}");
        assert!(matches!(
            estimate_sigma_u2_from_replicates(&Matrix::zeros(4, 1)),
            Err(Error::TooFewReplicates(1))
        ));
    }

    #[test]
    fn power_examples() {
        let null = NoncentralityInputs::new(1.0, 1.0, 0.0).unwrap();
        assert!((theoretical_power(&null, 0.05).unwrap() - 0.05).abs() < 1e-15);
        let two = NoncentralityInputs::new(1.0, 1.0, 2.0).unwrap();
        assert!((theoretical_power(&two, 0.05).unwrap() - 0.5160052739761747).abs() < 1e-12);
        let neg = NoncentralityInputs::new(1.0, 1.0, -2.0).unwrap();
        assert_eq!(theoretical_power(&neg, 0.05).unwrap(), theoretical_power(&two, 0.05).unwrap());
        assert!(NoncentralityInputs::new(0.0, 1.0, 1.0).is_err());
    }
}
