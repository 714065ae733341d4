//! Seeded data-generating processes and the Monte Carlo engine.
//!
//! Every replication draws from its own ChaCha streams keyed by
//! `(base_seed, rep_index, stream tag)`, so replications can run in any
//! order or in parallel and still reproduce bit for bit.

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use rayon::prelude::*;

use crate::data::{Dataset, Hypothesis, TestResult};
use crate::def_test::{run_test, EstimatorChoice};
use crate::error::{Error, Result};
use crate::linalg::{cholesky, CholeskyFactor, Matrix};
use crate::normal::quantile_unchecked;

/// Independent random stream for one `(base_seed, rep_index, tag)` triple.
pub struct Stream {
    rng: ChaCha8Rng,
}

/// What a stream is used for within a replication.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum StreamTag {
    Covariates = 1,
    ProxyNoise = 2,
    ResponseNoise = 3,
    MeasurementError = 4,
    Coefficients = 5,
    Scratch = 6,
}

impl Stream {
    pub fn new(base_seed: u64, rep_index: u64, tag: StreamTag) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(base_seed);
        rng.set_stream((rep_index << 8) | tag as u64);
        Self { rng }
    }

    /// Uniform on the open interval (0, 1).
    pub fn uniform(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) as f64 + 0.5) / (1u64 << 53) as f64
    }

    /// Standard normal by inversion.
    pub fn normal(&mut self) -> f64 {
        quantile_unchecked(self.uniform())
    }

    pub fn fill_normal(&mut self, out: &mut [f64]) {
        for v in out {
            *v = self.normal();
        }
    }
}

/// `Σ_jk = ρ^|j−k|`
pub fn ar1_covariance(p: usize, rho: f64) -> Result<Matrix> {
    check_rho(rho)?;
    Ok(Matrix::from_fn(p, p, |j, k| rho.powi(j.abs_diff(k) as i32)))
}

fn check_rho(rho: f64) -> Result<()> {
    if rho.is_finite() && rho.abs() < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("AR(1) correlation must satisfy |rho| < 1, got {rho}")))
    }
}

/// `L·g` with `g` standard normal from `stream`.
pub fn mvn_sample(stream: &mut Stream, chol: &CholeskyFactor) -> Vec<f64> {
    let mut g = vec![0.0; chol.dim()];
    stream.fill_normal(&mut g);
    chol.mul_lower(&g)
}

/// Registered data-generating processes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Dgp {
    /// Proxy model misspecified: `X = h(Z₁, Z₂) + η`, `Y = Xβ + Z₁ + 0.8Z₂ + ε`.
    Ex1Sim1(LowDimShape),
    /// Response model misspecified: `X = Z₁ + 0.8Z₂ + η`, `Y = Xβ + h(Z₁, Z₂) + ε`.
    Ex1Sim2(LowDimShape),
    /// `X = 1.2Z₁ + 0.8Z₂ + η`, `Y = Xβ + Z₃ + Z₄ + ε`.
    Ex2,
    /// As `Ex2` with `X = 1.2Z₁ + 0.8Z₃ + η`.
    Ex2Corr,
    /// `X = 2Z̃₁ + Z̃₂ + η`, `Y = Xβ + Z₃ + Z₄ + f(X)ε` with `Z̃ = tanh(Z/2)`.
    Ex3Model1(Hetero),
    /// `(X, Z)` jointly AR(1); see [`Model2Response`].
    Ex3Model2(Model2Response),
    /// `(X, Z)` as in model 2, `Y = Xβ + Zᵀγ + ε` with `γⱼ = Fⱼ/√n`.
    Ex4Dense,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LowDimShape {
    /// `Z₁²`
    A,
    /// `sin Z₁ + sin Z₂`
    B,
    /// `Z₁Z₂`
    C,
}

impl LowDimShape {
    fn eval(self, z1: f64, z2: f64) -> f64 {
        match self {
            LowDimShape::A => z1 * z1,
            LowDimShape::B => z1.sin() + z2.sin(),
            LowDimShape::C => z1 * z2,
        }
    }
}

/// Error scale `f(X)` in model 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Hetero {
    /// 1
    I,
    /// `X`
    II,
    /// `1 + 0.5 sin(4πX)`
    III,
}

impl Hetero {
    fn eval(self, x: f64) -> f64 {
        match self {
            Hetero::I => 1.0,
            Hetero::II => x,
            Hetero::III => 1.0 + 0.5 * (4.0 * std::f64::consts::PI * x).sin(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Model2Response {
    /// `Y = Xβ + Z̃ᵀγ + ε`, `γ₁..γ₁₀ ~ U(0, 1)` drawn per replication.
    A,
    /// `Y = Xβ + Z₃² + Z₄² + ε`
    B,
}

impl Dgp {
    fn joint_xz(self) -> bool {
        matches!(self, Dgp::Ex3Model2(_) | Dgp::Ex4Dense)
    }

    /// Smallest `p` the design references.
    fn min_p(self) -> usize {
        match self {
            Dgp::Ex1Sim1(_) | Dgp::Ex1Sim2(_) => 2,
            Dgp::Ex3Model2(Model2Response::A) => 10,
            Dgp::Ex4Dense => 1,
            _ => 4,
        }
    }
}

const REGISTRY: &[(&str, Dgp)] = &[
    ("ex1-sim1a", Dgp::Ex1Sim1(LowDimShape::A)),
    ("ex1-sim1b", Dgp::Ex1Sim1(LowDimShape::B)),
    ("ex1-sim1c", Dgp::Ex1Sim1(LowDimShape::C)),
    ("ex1-sim2a", Dgp::Ex1Sim2(LowDimShape::A)),
    ("ex1-sim2b", Dgp::Ex1Sim2(LowDimShape::B)),
    ("ex1-sim2c", Dgp::Ex1Sim2(LowDimShape::C)),
    ("ex2", Dgp::Ex2),
    ("ex2-corr", Dgp::Ex2Corr),
    ("ex3-model1i", Dgp::Ex3Model1(Hetero::I)),
    ("ex3-model1ii", Dgp::Ex3Model1(Hetero::II)),
    ("ex3-model1iii", Dgp::Ex3Model1(Hetero::III)),
    ("ex3-model2a", Dgp::Ex3Model2(Model2Response::A)),
    ("ex3-model2b", Dgp::Ex3Model2(Model2Response::B)),
    ("ex4-dense", Dgp::Ex4Dense),
];

/// Names of every registered design.
pub fn design_names() -> impl Iterator<Item = &'static str> {
    REGISTRY.iter().map(|(n, _)| *n)
}

impl Dgp {
    pub fn name(self) -> &'static str {
        REGISTRY.iter().find(|(_, d)| *d == self).map(|(n, _)| *n).unwrap()
    }
}

impl fmt::Display for Dgp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Dgp {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        REGISTRY
            .iter()
            .find(|(n, _)| *n == s)
            .map(|(_, d)| *d)
            .ok_or_else(|| Error::UnknownDesign(s.to_string()))
    }
}

/// A fully specified simulation cell.
#[derive(Debug, Clone, PartialEq)]
pub struct SimDesign {
    pub dgp: Dgp,
    pub n: usize,
    pub p: usize,
    /// AR(1) correlation of `Z` (of `(X, Z)` for the joint designs).
    pub rho: f64,
    pub sigma_u: f64,
    pub beta_true: f64,
    pub beta_star: f64,
    pub alpha: f64,
    pub gamma: EstimatorChoice,
    pub theta: EstimatorChoice,
    pub reps: usize,
    pub base_seed: u64,
}

impl SimDesign {
    /// Default settings for a registered design, under the null.
    pub fn preset(name: &str) -> Result<Self> {
        let dgp: Dgp = name.parse()?;
        let base = SimDesign {
            dgp,
            n: 200,
            p: 200,
            rho: 0.25,
            sigma_u: 0.1,
            beta_true: 1.0,
            beta_star: 1.0,
            alpha: 0.05,
            gamma: EstimatorChoice::lasso(),
            theta: EstimatorChoice::lasso(),
            reps: 1000,
            base_seed: 20220501,
        };
        Ok(match dgp {
            Dgp::Ex1Sim1(_) | Dgp::Ex1Sim2(_) => SimDesign {
                n: 100,
                p: 4,
                rho: 0.5,
                sigma_u: 1.0,
                beta_true: 0.0,
                beta_star: 0.0,
                gamma: EstimatorChoice::Ols,
                theta: EstimatorChoice::Ols,
                ..base
            },
            Dgp::Ex3Model2(_) => SimDesign { rho: 0.75, ..base },
            Dgp::Ex4Dense => SimDesign {
                rho: 0.75,
                gamma: EstimatorChoice::adaptive(),
                theta: EstimatorChoice::adaptive(),
                ..base
            },
            _ => base,
        })
    }

    pub fn name(&self) -> &'static str {
        self.dgp.name()
    }

    pub fn validate(&self) -> Result<()> {
        check_rho(self.rho)?;
        if !(self.sigma_u >= 0.0 && self.sigma_u.is_finite()) {
            return Err(Error::InvalidParameter(format!("sigma_u must be >= 0, got {}", self.sigma_u)));
        }
        if self.reps == 0 {
            return Err(Error::InvalidParameter("reps must be at least 1".into()));
        }
        if self.n < 2 {
            return Err(Error::InvalidParameter(format!("n must be at least 2, got {}", self.n)));
        }
        if self.p < self.dgp.min_p() {
            return Err(Error::InvalidParameter(format!(
                "{} needs p >= {}, got {}",
                self.name(),
                self.dgp.min_p(),
                self.p
            )));
        }
        if !self.beta_true.is_finite() || !self.beta_star.is_finite() {
            return Err(Error::NonFinite("beta"));
        }
        crate::data::check_alpha(self.alpha)
    }
}

/// Draws replications of one design; holds the covariance factor so it is
/// computed once per design.
pub struct Sampler {
    design: SimDesign,
    chol: CholeskyFactor,
}

impl Sampler {
    pub fn new(design: &SimDesign) -> Result<Self> {
        design.validate()?;
        let dim = if design.dgp.joint_xz() { design.p + 1 } else { design.p };
        let chol = cholesky(&ar1_covariance(dim, design.rho)?)?;
        Ok(Self {
            design: design.clone(),
            chol,
        })
    }

    pub fn design(&self) -> &SimDesign {
        &self.design
    }

    /// Dataset for replication `rep_index`; a pure function of the design
    /// and the index.
    pub fn generate(&self, rep_index: u64) -> Dataset {
        self.generate_with_truth(rep_index).0
    }

    /// Also returns the unobserved `X`.
    pub fn generate_with_truth(&self, rep_index: u64) -> (Dataset, Vec<f64>) {
        let d = &self.design;
        let (n, p) = (d.n, d.p);
        let seed = d.base_seed;
        let mut cov = Stream::new(seed, rep_index, StreamTag::Covariates);
        let mut eta_s = Stream::new(seed, rep_index, StreamTag::ProxyNoise);
        let mut eps_s = Stream::new(seed, rep_index, StreamTag::ResponseNoise);
        let mut u_s = Stream::new(seed, rep_index, StreamTag::MeasurementError);
        let mut coef_s = Stream::new(seed, rep_index, StreamTag::Coefficients);

        let joint = d.dgp.joint_xz();
        let dim = self.chol.dim();
        let lower = self.chol.lower();
        let mut g = vec![0.0; dim];
        let mut z = Matrix::zeros(n, p);
        let mut x = vec![0.0; n];
        let mut v = vec![0.0; dim];
        for i in 0..n {
            cov.fill_normal(&mut g);
            for (r, vr) in v.iter_mut().enumerate() {
                *vr = lower.row(r)[..=r].iter().zip(&g).map(|(a, b)| a * b).sum();
            }
            if joint {
                x[i] = v[0];
                z.row_mut(i).copy_from_slice(&v[1..]);
            } else {
                z.row_mut(i).copy_from_slice(&v);
            }
        }

        let coef: Vec<f64> = match d.dgp {
            Dgp::Ex3Model2(Model2Response::A) => (0..10).map(|_| coef_s.uniform()).collect(),
            Dgp::Ex4Dense => {
                let s = (n as f64).sqrt();
                (0..p).map(|_| coef_s.uniform() / s).collect()
            }
            _ => Vec::new(),
        };
        let tz = |v: f64| (v / 2.0).tanh();

        let beta = d.beta_true;
        let mut y = vec![0.0; n];
        for i in 0..n {
            let zi = z.row(i);
            let eta = eta_s.normal();
            let eps = eps_s.normal();
            match d.dgp {
                Dgp::Ex1Sim1(h) => {
                    x[i] = h.eval(zi[0], zi[1]) + eta;
                    y[i] = x[i] * beta + zi[0] + 0.8 * zi[1] + eps;
                }
                Dgp::Ex1Sim2(h) => {
                    x[i] = zi[0] + 0.8 * zi[1] + eta;
                    y[i] = x[i] * beta + h.eval(zi[0], zi[1]) + eps;
                }
                Dgp::Ex2 => {
                    x[i] = 1.2 * zi[0] + 0.8 * zi[1] + eta;
                    y[i] = x[i] * beta + zi[2] + zi[3] + eps;
                }
                Dgp::Ex2Corr => {
                    x[i] = 1.2 * zi[0] + 0.8 * zi[2] + eta;
                    y[i] = x[i] * beta + zi[2] + zi[3] + eps;
                }
                Dgp::Ex3Model1(f) => {
                    x[i] = 2.0 * tz(zi[0]) + tz(zi[1]) + eta;
                    y[i] = x[i] * beta + zi[2] + zi[3] + f.eval(x[i]) * eps;
                }
                Dgp::Ex3Model2(Model2Response::A) => {
                    let lin: f64 = coef.iter().zip(zi).map(|(c, v)| c * tz(*v)).sum();
                    y[i] = x[i] * beta + lin + eps;
                }
                Dgp::Ex3Model2(Model2Response::B) => {
                    y[i] = x[i] * beta + zi[2] * zi[2] + zi[3] * zi[3] + eps;
                }
                Dgp::Ex4Dense => {
                    let lin: f64 = coef.iter().zip(zi).map(|(c, v)| c * v).sum();
                    y[i] = x[i] * beta + lin + eps;
                }
            }
        }
        let w: Vec<f64> = x.iter().map(|xi| xi + d.sigma_u * u_s.normal()).collect();
        let data = Dataset {
            y,
            w,
            z,
            sigma_u2: d.sigma_u * d.sigma_u,
        };
        (data, x)
    }

    /// Runs the test configured in the design on replication `rep_index`.
    pub fn replicate(&self, rep_index: u64) -> Result<TestResult> {
        self.replicate_with(rep_index, &self.design.gamma, &self.design.theta)
    }

    pub fn replicate_with(&self, rep_index: u64, gamma: &EstimatorChoice, theta: &EstimatorChoice) -> Result<TestResult> {
        let d = self.generate(rep_index);
        let hyp = Hypothesis::new(self.design.beta_star, self.design.alpha)?;
        run_test(&d, &hyp, gamma, theta)
    }
}

/// One-off generation; prefer [`Sampler`] for repeated draws.
pub fn generate(design: &SimDesign, rep_index: u64) -> Result<Dataset> {
    Ok(Sampler::new(design)?.generate(rep_index))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimReport {
    pub design: SimDesign,
    /// Over successful replications only; NaN when none succeeded.
    pub rejection_rate: f64,
    /// Binomial standard error of `rejection_rate`.
    pub mc_se: f64,
    pub successes: usize,
    pub failures: usize,
    /// `T_DF` of each successful replication, in replication order.
    pub t_df: Vec<f64>,
    /// `σ̂` of each successful replication, in replication order.
    pub sigma_hat: Vec<f64>,
    pub wall_time: Duration,
}

/// Every replication's outcome, in replication order.
pub fn run_replications(design: &SimDesign) -> Result<Vec<Result<TestResult>>> {
    let sampler = Sampler::new(design)?;
    Ok((0..design.reps as u64)
        .into_par_iter()
        .map(|r| sampler.replicate(r))
        .collect())
}

pub fn run_monte_carlo(design: &SimDesign) -> Result<SimReport> {
    let start = Instant::now();
    let outcomes = run_replications(design)?;
    Ok(summarize(design, &outcomes, start.elapsed()))
}

/// Tallies replication outcomes; failed replications are counted, not
/// dropped.
pub fn summarize(design: &SimDesign, outcomes: &[Result<TestResult>], wall_time: Duration) -> SimReport {
    let ok: Vec<&TestResult> = outcomes.iter().filter_map(|o| o.as_ref().ok()).collect();
    let successes = ok.len();
    let rejections = ok.iter().filter(|r| r.reject).count();
    let (rate, se) = if successes == 0 {
        (f64::NAN, f64::NAN)
    } else {
        let r = rejections as f64 / successes as f64;
        (r, (r * (1.0 - r) / successes as f64).sqrt())
    };
    SimReport {
        design: design.clone(),
        rejection_rate: rate,
        mc_se: se,
        successes,
        failures: outcomes.len() - successes,
        t_df: ok.iter().map(|r| r.t_df).collect(),
        sigma_hat: ok.iter().map(|r| r.sigma_hat).collect(),
        wall_time,
    }
}

/// Kolmogorov–Smirnov distance between a sample and N(0, 1).
pub fn ks_statistic_normal(sample: &[f64]) -> f64 {
    let mut s: Vec<f64> = sample.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    s.iter().enumerate().fold(0.0_f64, |d, (i, x)| {
        let f = crate::normal::std_normal_cdf(*x);
        d.max(f - i as f64 / n).max((i + 1) as f64 / n - f)
    })
}
