use std::fmt::{self, Display};
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use def_infer::io::{parse_data_file, read_replicates, write_dataset};
use def_infer::sim::design_names;
use def_infer::{
    confidence_region, estimate_sigma_u2_from_replicates, generate, run_monte_carlo, run_test, AdaptiveChoice,
    AdaptiveConstants, AdaptiveTuning, AutoGrid, CdConfig, Dataset, Error, EstimatorChoice, GridSpec, Hypothesis,
    LambdaChoice, LambdaRate, PenalizedChoice, PenaltyKind, SimDesign,
};

use crate::args::{
    CiArgs, Command, DataArgs, DesignArgs, EstimatorArgs, EstimatorKind, ExportArgs, RateArg, SigmaUArgs,
    SimulateArgs, TestArgs,
};

#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Core { context: Option<String>, error: Error },
}

impl Failure {
    /// 1 for bad input, 2 when the data or program admits no answer.
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Core { error, .. } => match error {
                Error::DegenerateVariance(_)
                | Error::InfeasibleProgram(_)
                | Error::UnboundedProgram
                | Error::SingularDesign { .. }
                | Error::NotPositiveDefinite { .. }
                | Error::DidNotConverge(_)
                | Error::NumericalBreakdown(_)
                | Error::IterationLimit(_)
                | Error::EmptyRegion => 2,
                _ => 1,
            },
        }
    }
}

impl Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(msg) => f.write_str(msg),
            Failure::Core { context: Some(c), error } => write!(f, "{c}: {error}"),
            Failure::Core { context: None, error } => write!(f, "{error}"),
        }
    }
}

impl From<Error> for Failure {
    fn from(error: Error) -> Self {
        Failure::Core { context: None, error }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Error::Io(e).into()
    }
}

type Outcome<T> = Result<T, Failure>;

fn in_file<T>(path: &Path, r: def_infer::Result<T>) -> Outcome<T> {
    r.map_err(|error| Failure::Core {
        context: Some(path.display().to_string()),
        error,
    })
}

fn open(path: &Path) -> Outcome<File> {
    File::open(path).map_err(|e| Failure::Usage(format!("cannot open {}: {e}", path.display())))
}

fn create(path: &Path) -> Outcome<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Failure::Usage(format!("cannot create {}: {e}", path.display())))
}

/// Human-readable lines, then `#meta key=value` lines, then `key=value`
/// results.
#[derive(Default)]
struct Report {
    text: Vec<String>,
    meta: Vec<(String, String)>,
    values: Vec<(String, String)>,
}

impl Report {
    fn line(&mut self, s: impl Into<String>) {
        self.text.push(s.into());
    }

    fn meta(&mut self, k: &str, v: impl Display) {
        self.meta.push((k.to_string(), v.to_string()));
    }

    fn value(&mut self, k: &str, v: impl Display) {
        self.values.push((k.to_string(), v.to_string()));
    }

    fn print(&self) -> Outcome<()> {
        let mut out = io::stdout().lock();
        for l in &self.text {
            writeln!(out, "{l}")?;
        }
        for (k, v) in &self.meta {
            writeln!(out, "#meta {k}={v}")?;
        }
        for (k, v) in &self.values {
            writeln!(out, "{k}={v}")?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Compact number for the human-readable lines.
fn short(v: f64) -> String {
    if v != 0.0 && v.abs() < 1e-4 {
        format!("{v:.3e}")
    } else {
        format!("{v:.6}")
    }
}

pub fn run(cmd: Command) -> Outcome<()> {
    match cmd {
        Command::Test(a) => cmd_test(a),
        Command::Ci(a) => cmd_ci(a),
        Command::SigmaU(a) => cmd_sigma_u(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Export(a) => cmd_export(a),
    }
}

fn cd_config(e: &EstimatorArgs) -> CdConfig {
    let d = CdConfig::default();
    CdConfig {
        max_iters: e.cd_max_iters.unwrap_or(d.max_iters),
        tol: e.cd_tol.unwrap_or(d.tol),
        standardize: e.standardize.unwrap_or(d.standardize),
    }
}

fn estimator(kind: EstimatorKind, e: &EstimatorArgs) -> Outcome<EstimatorChoice> {
    let cd = cd_config(e);
    let penalized = |pk: PenaltyKind, shape: Option<f64>| {
        let mut pc = PenalizedChoice::auto(pk);
        pc.cd = cd;
        pc.shape = shape.unwrap_or(pc.shape);
        pc.lambda = match (e.lambda, pc.lambda) {
            (Some(l), _) => LambdaChoice::Fixed(l),
            (None, LambdaChoice::Auto { rate, multiplier }) => LambdaChoice::Auto {
                rate: match e.lambda_rate {
                    Some(RateArg::Sqrt) => LambdaRate::SqrtLogPOverN,
                    Some(RateArg::Linear) => LambdaRate::LogPOverN,
                    None => rate,
                },
                multiplier: e.lambda_multiplier.unwrap_or(multiplier),
            },
            (None, fixed) => fixed,
        };
        EstimatorChoice::Penalized(pc)
    };
    Ok(match kind {
        EstimatorKind::Ols => EstimatorChoice::Ols,
        EstimatorKind::Lasso => penalized(PenaltyKind::Lasso, None),
        EstimatorKind::Scad => penalized(PenaltyKind::Scad, e.scad_a),
        EstimatorKind::Mcp => penalized(PenaltyKind::Mcp, e.mcp_b),
        EstimatorKind::Adaptive => match (e.eta, e.mu, e.rho) {
            (Some(eta), Some(mu), Some(rho)) => EstimatorChoice::SparseAdaptive(AdaptiveChoice::Fixed(
                AdaptiveTuning::new(eta, mu, rho)?,
            )),
            (None, None, None) => {
                let d = AdaptiveConstants::default();
                EstimatorChoice::SparseAdaptive(AdaptiveChoice::Auto {
                    constants: AdaptiveConstants {
                        c_eta: e.c_eta.unwrap_or(d.c_eta),
                        c_mu: e.c_mu.unwrap_or(d.c_mu),
                        c_rho: e.c_rho.unwrap_or(d.c_rho),
                    },
                    cd,
                })
            }
            _ => return Err(Failure::Usage("--eta, --mu and --rho must be given together".into())),
        },
    })
}

fn kind_of(choice: &EstimatorChoice) -> EstimatorKind {
    match choice {
        EstimatorChoice::Ols => EstimatorKind::Ols,
        EstimatorChoice::Penalized(pc) => match pc.kind {
            PenaltyKind::Lasso => EstimatorKind::Lasso,
            PenaltyKind::Scad => EstimatorKind::Scad,
            PenaltyKind::Mcp => EstimatorKind::Mcp,
        },
        EstimatorChoice::SparseAdaptive(_) => EstimatorKind::Adaptive,
    }
}

/// (γ, θ) estimators, falling back to `defaults` for unset kinds.
fn estimators(
    e: &EstimatorArgs,
    defaults: (EstimatorKind, EstimatorKind),
) -> Outcome<(EstimatorChoice, EstimatorChoice)> {
    let g = e.gamma_estimator.or(e.estimator).unwrap_or(defaults.0);
    let t = e.theta_estimator.or(e.estimator).unwrap_or(defaults.1);
    Ok((estimator(g, e)?, estimator(t, e)?))
}

struct Loaded {
    data: Dataset,
    sigma_source: &'static str,
}

fn load(a: &DataArgs) -> Outcome<Loaded> {
    let file = parse_data_file(open(&a.data)?);
    let file = in_file(&a.data, file)?;
    let (sigma_u2, sigma_source) = if let Some(v) = a.sigma_u2 {
        (v, "flag")
    } else if let Some(path) = &a.replicates {
        let reps = in_file(path, read_replicates(open(path)?))?;
        (in_file(path, estimate_sigma_u2_from_replicates(&reps))?, "replicates-file")
    } else if let Some(reps) = file.replicates.as_ref().filter(|r| r.cols() >= 2) {
        (in_file(&a.data, estimate_sigma_u2_from_replicates(reps))?, "replicate-columns")
    } else {
        return Err(Failure::Usage(format!(
            "missing --sigma-u2: {} has no replicate columns w1..wm and no --replicates file was given",
            a.data.display()
        )));
    };
    let data = in_file(&a.data, file.into_dataset(sigma_u2))?;
    Ok(Loaded { data, sigma_source })
}

fn describe_data(r: &mut Report, a: &DataArgs, l: &Loaded) {
    let d = &l.data;
    r.line(format!(
        "  data: {} (n = {}, p = {}), sigma_u2 = {} from {}",
        a.data.display(),
        d.n(),
        d.p(),
        short(d.sigma_u2),
        l.sigma_source
    ));
    r.meta("data", a.data.display());
    r.meta("n", d.n());
    r.meta("p", d.p());
    r.meta("sigma_u2", d.sigma_u2);
    r.meta("sigma_u2_source", l.sigma_source);
}

fn cmd_test(a: TestArgs) -> Outcome<()> {
    let loaded = load(&a.data)?;
    let (gamma, theta) = estimators(&a.est, (EstimatorKind::Lasso, EstimatorKind::Lasso))?;
    let hyp = Hypothesis::new(a.beta_star, a.data.alpha)?;
    let res = run_test(&loaded.data, &hyp, &gamma, &theta)?;

    let mut r = Report::default();
    r.line(format!("DEF score test of beta = {}", a.beta_star));
    describe_data(&mut r, &a.data, &loaded);
    let tuning = |t: &[(&str, f64)]| {
        t.iter()
            .map(|(k, v)| format!("{k} = {}", short(*v)))
            .collect::<Vec<_>>()
            .join(", ")
    };
    r.line(format!("  gamma: {} ({})", res.gamma_method, tuning(&res.gamma_tuning)));
    r.line(format!("  theta: {} ({})", res.theta_method, tuning(&res.theta_tuning)));
    r.line(format!(
        "  T_DF = {}, p-value = {}: {} at alpha = {}",
        short(res.t_df),
        short(res.p_value),
        if res.reject { "reject" } else { "do not reject" },
        res.alpha
    ));
    r.meta("gamma_method", res.gamma_method);
    for (k, v) in &res.gamma_tuning {
        r.meta(&format!("gamma_{k}"), v);
    }
    r.meta("theta_method", res.theta_method);
    for (k, v) in &res.theta_tuning {
        r.meta(&format!("theta_{k}"), v);
    }
    r.value("beta_star", res.beta_star);
    r.value("alpha", res.alpha);
    r.value("t_df", res.t_df);
    r.value("t_raw", res.t_raw);
    r.value("sigma_hat", res.sigma_hat);
    r.value("p_value", res.p_value);
    r.value("reject", res.reject);
    r.print()
}

fn cmd_ci(a: CiArgs) -> Outcome<()> {
    let loaded = load(&a.data)?;
    let (gamma, theta) = estimators(&a.est, (EstimatorKind::Lasso, EstimatorKind::Lasso))?;
    let spec = match a.grid {
        Some(g) => {
            if a.grid_coarse_points.is_some() || a.grid_half_width.is_some() || a.grid_fine_intervals.is_some() {
                return Err(Failure::Usage("automatic grid settings conflict with --grid".into()));
            }
            GridSpec::Explicit(g)
        }
        None => {
            let d = AutoGrid::default();
            GridSpec::Auto(AutoGrid {
                coarse_points: a.grid_coarse_points.unwrap_or(d.coarse_points),
                half_width_se: a.grid_half_width.unwrap_or(d.half_width_se),
                fine_intervals: a.grid_fine_intervals.unwrap_or(d.fine_intervals),
            })
        }
    };
    let region = confidence_region(&loaded.data, a.data.alpha, &gamma, &theta, spec)?;
    let (lo, hi) = region.interval_hull;
    let total = region.grid.points().len();
    // Accepted points are contiguous when no grid point between them was rejected.
    let contiguous = region
        .accepted
        .windows(2)
        .all(|w| w[1] - w[0] <= region.grid.step * (1.0 + 1e-9));

    let mut r = Report::default();
    r.line(format!("Confidence region for beta at level {}", 1.0 - region.alpha));
    describe_data(&mut r, &a.data, &loaded);
    r.line(format!(
        "  [{}, {}]: {} of {} grid points accepted{}",
        short(lo),
        short(hi),
        region.accepted.len(),
        total,
        if contiguous { "" } else { " (not contiguous; hull reported)" }
    ));
    r.line(format!(
        "  grid {}:{}:{} ({}), {} test evaluations",
        short(region.grid.lo),
        short(region.grid.hi),
        short(region.grid.step),
        if a.grid.is_some() { "explicit" } else { "automatic refinement" },
        region.evaluations
    ));
    r.meta("grid_lo", region.grid.lo);
    r.meta("grid_hi", region.grid.hi);
    r.meta("grid_step", region.grid.step);
    r.meta("evaluations", region.evaluations);
    if let Some(path) = &a.out {
        let mut w = create(path)?;
        writeln!(w, "beta")?;
        for b in &region.accepted {
            writeln!(w, "{b}")?;
        }
        w.flush()?;
        r.meta("accepted_file", path.display());
    }
    r.value("alpha", region.alpha);
    r.value("lower", lo);
    r.value("upper", hi);
    r.value("accepted", region.accepted.len());
    r.value("contiguous", contiguous);
    r.print()
}

fn cmd_sigma_u(a: SigmaUArgs) -> Outcome<()> {
    let reps = in_file(&a.replicates, read_replicates(open(&a.replicates)?))?;
    let est = in_file(&a.replicates, estimate_sigma_u2_from_replicates(&reps))?;
    let mut r = Report::default();
    r.line(format!(
        "Measurement error variance of the {}-replicate mean over {} subjects: {}",
        reps.cols(),
        reps.rows(),
        short(est)
    ));
    r.meta("replicates", a.replicates.display());
    r.meta("n", reps.rows());
    r.meta("m", reps.cols());
    r.value("sigma_u2", est);
    r.print()
}

/// A registered design with the overrides applied.
fn design(name: &str, a: &DesignArgs) -> Outcome<SimDesign> {
    let mut d = SimDesign::preset(name)?;
    d.n = a.n.unwrap_or(d.n);
    d.p = a.p.unwrap_or(d.p);
    d.rho = a.corr.unwrap_or(d.rho);
    d.sigma_u = a.sigma_u.unwrap_or(d.sigma_u);
    d.alpha = a.alpha.unwrap_or(d.alpha);
    d.base_seed = a.seed.unwrap_or(d.base_seed);
    if let Some(b) = a.beta_star {
        d.beta_star = b;
        d.beta_true = b;
    }
    let (g, t) = estimators(&a.est, (kind_of(&d.gamma), kind_of(&d.theta)))?;
    d.gamma = g;
    d.theta = t;
    d.validate()?;
    Ok(d)
}

fn design_list(requested: &[String]) -> Outcome<Vec<String>> {
    let mut names = Vec::new();
    for name in requested {
        if name == "all" {
            names.extend(design_names().map(str::to_string));
        } else if design_names().any(|d| d == name) {
            names.push(name.clone());
        } else {
            let known = design_names().collect::<Vec<_>>().join(", ");
            return Err(Failure::Usage(format!("unknown design {name:?}; registered: {known}")));
        }
    }
    Ok(names)
}

pub const TABLE_HEADER: &str = "design,n,p,sigma_u,beta_true,rejection_rate,mc_se,failures,seed";

fn cmd_simulate(a: SimulateArgs) -> Outcome<()> {
    let names = design_list(&a.design)?;
    let mut rows = vec![TABLE_HEADER.to_string()];
    let mut r = Report::default();
    for name in &names {
        let base = design(name, &a.design_args)?;
        let betas = if a.beta.is_empty() { vec![base.beta_star] } else { a.beta.clone() };
        for (k, &beta) in betas.iter().enumerate() {
            let mut d = base.clone();
            d.beta_true = beta;
            d.reps = a.reps.unwrap_or(d.reps);
            // Every row draws fresh data.
            d.base_seed = base.base_seed.wrapping_add(k as u64);
            d.validate()?;
            let start = Instant::now();
            let rep = run_monte_carlo(&d)?;
            rows.push(format!(
                "{},{},{},{},{},{},{},{},{}",
                name, d.n, d.p, d.sigma_u, beta, rep.rejection_rate, rep.mc_se, rep.failures, d.base_seed
            ));
            r.line(format!(
                "{name} beta = {beta}: rejection rate {} (se {}), {} failed of {} in {:.1} s",
                short(rep.rejection_rate),
                short(rep.mc_se),
                rep.failures,
                d.reps,
                start.elapsed().as_secs_f64()
            ));
        }
    }
    match &a.out {
        Some(path) => {
            let mut w = create(path)?;
            for row in &rows {
                writeln!(w, "{row}")?;
            }
            w.flush()?;
            r.meta("table", path.display());
            r.meta("rows", rows.len() - 1);
            r.print()
        }
        None => {
            let mut out = io::stdout().lock();
            for row in &rows {
                writeln!(out, "{row}")?;
            }
            out.flush()?;
            Ok(())
        }
    }
}

fn cmd_export(a: ExportArgs) -> Outcome<()> {
    let names = design_list(std::slice::from_ref(&a.design))?;
    let [name] = names.as_slice() else {
        return Err(Failure::Usage("export takes a single design".into()));
    };
    let mut d = design(name, &a.design_args)?;
    d.beta_true = a.beta.unwrap_or(d.beta_star);
    let data = generate(&d, a.rep)?;
    match &a.out {
        Some(path) => {
            let mut w = create(path)?;
            write_dataset(&mut w, &data)?;
            let mut r = Report::default();
            r.line(format!("{} draw {} (beta = {}) written to {}", name, a.rep, d.beta_true, path.display()));
            r.meta("design", name);
            r.meta("rep", a.rep);
            r.meta("seed", d.base_seed);
            r.meta("n", data.n());
            r.meta("p", data.p());
            r.meta("beta_true", d.beta_true);
            r.meta("beta_star", d.beta_star);
            r.meta("sigma_u2", data.sigma_u2);
            r.print()
        }
        None => {
            write_dataset(io::stdout().lock(), &data)?;
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_reproduce_presets() {
        for name in design_names() {
            let preset = SimDesign::preset(name).unwrap();
            let d = design(name, &DesignArgs::default()).unwrap();
            assert_eq!(d, preset, "{name}");
        }
    }

    #[test]
    fn tuning_flags_reach_estimators() {
        let e = EstimatorArgs {
            lambda_multiplier: Some(1.0),
            lambda_rate: Some(RateArg::Linear),
            scad_a: Some(4.0),
            cd_tol: Some(1e-9),
            ..Default::default()
        };
        let EstimatorChoice::Penalized(pc) = estimator(EstimatorKind::Scad, &e).unwrap() else { panic!() };
        assert_eq!(pc.shape, 4.0);
        assert_eq!(pc.cd.tol, 1e-9);
        assert_eq!(pc.lambda, LambdaChoice::Auto { rate: LambdaRate::LogPOverN, multiplier: 1.0 });

        let e = EstimatorArgs { c_mu: Some(2.0), ..Default::default() };
        let EstimatorChoice::SparseAdaptive(AdaptiveChoice::Auto { constants, .. }) =
            estimator(EstimatorKind::Adaptive, &e).unwrap()
        else {
            panic!()
        };
        assert_eq!(constants.c_mu, 2.0);
    }

    #[test]
    fn partial_adaptive_tuning_is_usage_error() {
        let e = EstimatorArgs { eta: Some(0.1), ..Default::default() };
        assert!(matches!(estimator(EstimatorKind::Adaptive, &e), Err(Failure::Usage(_))));
    }

    #[test]
    fn exit_codes() {
        assert_eq!(Failure::from(Error::InfeasibleProgram(vec![])).exit_code(), 2);
        assert_eq!(Failure::from(Error::DegenerateVariance(0.0)).exit_code(), 2);
        assert_eq!(Failure::from(Error::UnknownDesign("x".into())).exit_code(), 1);
        assert_eq!(Failure::Usage(String::new()).exit_code(), 1);
    }
}
