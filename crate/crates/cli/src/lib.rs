//! `spectra`: reads a family configuration, computes spectra and writes CSV
//! and JSON artifacts into an output directory.
//!
//! Exit codes: 0 success, 2 invalid input, 3 resource cap or I/O failure,
//! 4 verification failure (the report is still written).

pub mod figures;
pub mod output;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fractal_spectra::carpets::{
    assouad_curve, assouad_spectrum, carpet_dimensions, lower_curve, max_column_word, CarpetOracle, CarpetSpec,
    DEFAULT_LEVEL_CAP,
};
use fractal_spectra::moran::{assouad_spectrum_trunc, lower_spectrum_trunc, MoranSpec};
use fractal_spectra::percolation::{
    binomial_pmf, box_dimension, empirical_spectrum_mc, exact_gw_distribution, gw_moment_table, parse_decimal,
    pmf_moment, OffspringMoments, PercolationParams,
};
use fractal_spectra::selfsimilar::{
    estimate_t, gibbs_mass, improvement_region, overlap_bound_curve, similarity_exponent, stopping_set_capped,
    wsp_spectrum, OverlapBoundParams, SimilarIfs, WspFlags, DEFAULT_TOL,
};
use fractal_spectra::spectrum::{empirical_spectrum, SpectrumCurve, SpectrumKind, TailWindow, ThetaGrid};
use fractal_spectra::tail_density::{
    asymptotic_densities, banach_densities, check_taildensity_props, exact_limits, tail_densities, IntegerSet,
};
use num_traits::ToPrimitive;
use serde::Serialize;
use serde_json::json;
use thiserror::Error;

pub use figures::Figure;
pub use output::Bundle;

use output::round;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Resource(String),
    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Resource(_) | CliError::Io { .. } => 3,
        }
    }
}

impl From<fractal_spectra::Error> for CliError {
    fn from(e: fractal_spectra::Error) -> Self {
        if e.is_resource() {
            CliError::Resource(e.to_string())
        } else {
            CliError::Validation(e.to_string())
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "spectra", version, about = "Assouad and lower dimension spectra")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Family configuration (JSON).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    /// Number of equally spaced θ values in (0,1).
    #[arg(long, global = true, alias = "theta-grid", default_value_t = 999)]
    pub grid: usize,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Assertion {
    /// Weak separation property.
    Wsp,
    /// No super-exponential concentration of cylinders.
    NoSec,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TChoice {
    Value(f64),
    Estimate,
}

fn parse_t(text: &str) -> Result<TChoice, String> {
    if text == "estimate" {
        return Ok(TChoice::Estimate);
    }
    text.parse()
        .map(TChoice::Value)
        .map_err(|_| format!("expected a number or `estimate`, got `{text}`"))
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Bedford-McMullen carpet: dimensions and both spectra.
    Carpet,
    /// Self-similar set with overlaps.
    Ifs {
        /// Mass exponent t, or `estimate` for a finite-scale estimate.
        #[arg(long, value_parser = parse_t)]
        t: Option<TChoice>,
        #[arg(long = "assert", value_enum)]
        assertion: Option<Assertion>,
        /// Upper box dimension; defaults to min(s, 1).
        #[arg(long)]
        upper_box: Option<f64>,
        /// Sample points for `--t estimate`.
        #[arg(long, default_value_t = 64)]
        samples: usize,
    },
    /// Mandelbrot percolation: Monte-Carlo spectrum at one θ.
    Percolation {
        #[arg(long)]
        n: Option<u32>,
        #[arg(long)]
        d: Option<u32>,
        /// Retention probability, read as an exact decimal.
        #[arg(long)]
        p: Option<String>,
        #[arg(long, default_value_t = 12)]
        depth: usize,
        #[arg(long, default_value_t = 200)]
        trials: usize,
        #[arg(long, default_value_t = 0.5)]
        theta: f64,
        /// Also write per-trial rows to `trials.csv`.
        #[arg(long)]
        trials_csv: bool,
        /// Cap on the expected number of retained cubes per trial.
        #[arg(long, default_value_t = 20_000_000)]
        max_cubes: u64,
    },
    /// Moran construction: truncated spectra on the θ grid.
    Moran {
        #[arg(long, default_value_t = 10_000)]
        k_max: usize,
        /// Tail window as a fraction of levels; defaults to the construction's own.
        #[arg(long)]
        tail: Option<f64>,
        #[arg(long, default_value_t = 10_000_000)]
        max_levels: usize,
    },
    /// Integer set: asymptotic, Banach and tail densities.
    Tails {
        #[arg(long, default_value_t = 100_000)]
        k_max: u64,
        #[arg(long, value_delimiter = ',', default_value = "1.25,1.5,2,3,5,10")]
        lambdas: Vec<f64>,
        /// Random windows for the complement identity.
        #[arg(long, default_value_t = 10_000)]
        windows: usize,
        /// Horizon of the quadratic Banach sweep.
        #[arg(long, default_value_t = 10_000)]
        banach_k: u64,
        #[arg(long, default_value_t = 1)]
        min_window: u64,
    },
    /// Compare closed forms with brute-force computations.
    Verify {
        #[command(subcommand)]
        target: VerifyTarget,
    },
    /// Data for a built-in figure.
    Figure {
        #[arg(long, value_enum)]
        figure: Figure,
    },
}

#[derive(Debug, Subcommand)]
pub enum VerifyTarget {
    /// Closed-form Assouad spectrum against the covering oracle.
    Carpet {
        #[arg(long, value_delimiter = ',', default_value = "0.5,0.7")]
        thetas: Vec<f64>,
        #[arg(long, default_value_t = 0.05)]
        tol: f64,
        /// Cap on log2 of the predicted box count per oracle call.
        #[arg(long, default_value_t = 26.0)]
        budget: f64,
    },
    /// Stopping-set Gibbs masses sum to one.
    Ifs {
        #[arg(long, value_delimiter = ',', default_value = "0.1,0.01,0.001")]
        deltas: Vec<f64>,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        #[arg(long, default_value_t = 5_000_000)]
        max_words: usize,
    },
    /// Branching-process moment recursion against exact distributions.
    Percolation {
        #[arg(long)]
        n: Option<u32>,
        #[arg(long)]
        d: Option<u32>,
        #[arg(long)]
        p: Option<String>,
        #[arg(long, default_value_t = 5)]
        order: usize,
        #[arg(long, default_value_t = 4)]
        depth: usize,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        /// Cap on the support size of the exact distribution.
        #[arg(long, default_value_t = 100_000)]
        max_support: u64,
    },
}

/// Files to write and, when a verification failed, the reason.
#[derive(Debug)]
pub struct Outcome {
    pub bundle: Bundle,
    pub failure: Option<String>,
}

impl Outcome {
    fn ok(bundle: Bundle) -> Self {
        Outcome { bundle, failure: None }
    }
}

fn read_config(common: &Common) -> Result<String, CliError> {
    let path = common
        .config
        .as_ref()
        .ok_or_else(|| CliError::Validation("missing --config <path>".into()))?;
    std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.clone(),
        source,
    })
}

fn grid(common: &Common) -> Result<ThetaGrid, CliError> {
    Ok(ThetaGrid::uniform(common.grid)?)
}

/// Computes all outputs without touching the file system.
pub fn compute(cli: &Cli) -> Result<Outcome, CliError> {
    let common = &cli.common;
    match &cli.command {
        Command::Carpet => carpet(common),
        Command::Ifs {
            t,
            assertion,
            upper_box,
            samples,
        } => ifs(common, *t, *assertion, *upper_box, *samples),
        Command::Percolation {
            n,
            d,
            p,
            depth,
            trials,
            theta,
            trials_csv,
            max_cubes,
        } => {
            let params = percolation_params(common, *n, *d, p.as_deref())?;
            percolation(&params, *depth, *trials, *theta, common.seed, *trials_csv, *max_cubes)
        }
        Command::Moran { k_max, tail, max_levels } => moran(common, *k_max, *tail, *max_levels),
        Command::Tails {
            k_max,
            lambdas,
            windows,
            banach_k,
            min_window,
        } => tails(common, *k_max, lambdas, *windows, *banach_k, *min_window),
        Command::Verify { target } => verify(common, target),
        Command::Figure { figure } => Ok(Outcome::ok(figures::emit(*figure, &grid(common)?)?)),
    }
}

/// Runs the command and writes its outputs; returns the process exit code.
pub fn run(cli: &Cli) -> i32 {
    let outcome = compute(cli).and_then(|o| o.bundle.write(&cli.common.out).map(|paths| (o.failure, paths)));
    match outcome {
        Ok((failure, paths)) => {
            for p in paths {
                println!("{}", p.display());
            }
            match failure {
                Some(msg) => {
                    eprintln!("verification failed: {msg}");
                    4
                }
                None => 0,
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn carpet(common: &Common) -> Result<Outcome, CliError> {
    let spec = CarpetSpec::from_json(&read_config(common)?)?;
    let grid = grid(common)?;
    let dims = carpet_dimensions(&spec);
    let mut bundle = Bundle::new();
    bundle.add_json("summary.json", &dims);
    bundle.add_curve("assouad", &assouad_curve(&spec, &grid)?);
    bundle.add_curve("lower", &lower_curve(&spec, &grid)?);
    Ok(Outcome::ok(bundle))
}

fn ifs(
    common: &Common,
    t: Option<TChoice>,
    assertion: Option<Assertion>,
    upper_box: Option<f64>,
    samples: usize,
) -> Result<Outcome, CliError> {
    let ifs = SimilarIfs::from_json(&read_config(common)?)?;
    if t.is_none() && assertion.is_none() {
        return Err(CliError::Validation("pass --t <value|estimate> or --assert wsp|no-sec".into()));
    }
    let grid = grid(common)?;
    let s = similarity_exponent(&ifs, DEFAULT_TOL)?;
    let upper_box = upper_box.unwrap_or(s.min(1.0));
    let mut bundle = Bundle::new();
    let mut report = json!({ "s": round(s), "upper_box": round(upper_box) });
    if let Some(a) = assertion {
        let flags = WspFlags {
            weak_separation: a == Assertion::Wsp,
            no_superexp_concentration: a == Assertion::NoSec,
        };
        bundle.add_curve("assouad", &wsp_spectrum(upper_box, flags, &grid)?);
    }
    if let Some(choice) = t {
        let t = match choice {
            TChoice::Value(t) => t,
            TChoice::Estimate => {
                let radii: Vec<f64> = (3..=10).map(|k| 2f64.powi(-k)).collect();
                let est = estimate_t(&ifs, s, &radii, samples, common.seed)?;
                report["t_estimate"] = json!({
                    "t": round(est.t),
                    "samples": samples,
                    "stopping_words": est.stopping_words,
                });
                est.t.clamp(0.0, upper_box)
            }
        };
        let params = OverlapBoundParams::new(s, t, upper_box)?;
        report["t"] = json!(round(t));
        report["improvement_region"] = json!(improvement_region(&params).map(|(a, b)| [round(a), round(b)]));
        bundle.add_curve("overlap_bound", &overlap_bound_curve(&params, &grid)?);
    }
    bundle.add_json("report.json", &report);
    Ok(Outcome::ok(bundle))
}

fn percolation_params(
    common: &Common,
    n: Option<u32>,
    d: Option<u32>,
    p: Option<&str>,
) -> Result<PercolationParams, CliError> {
    let base = match &common.config {
        Some(_) => Some(PercolationParams::from_json(&read_config(common)?)?),
        None => None,
    };
    let n = n.or(base.as_ref().map(|b| b.n));
    let d = d.or(base.as_ref().map(|b| b.d)).or(Some(2));
    let p = match p {
        Some(text) => Some(parse_decimal(text)?),
        None => base.as_ref().map(|b| b.p().clone()),
    };
    match (n, d, p) {
        (Some(n), Some(d), Some(p)) => Ok(PercolationParams::new(n, d, p)?),
        _ => Err(CliError::Validation("percolation needs n and p (flags or --config)".into())),
    }
}

#[derive(Serialize)]
struct PercolationReport {
    n: u32,
    d: u32,
    p: String,
    theta: f64,
    depth: usize,
    #[serde(rename = "B")]
    box_dim: f64,
    estimate: f64,
    spread: f64,
    single_scale: f64,
    survival_fraction: f64,
    trials: usize,
}

fn percolation(
    params: &PercolationParams,
    depth: usize,
    trials: usize,
    theta: f64,
    seed: u64,
    trials_csv: bool,
    max_cubes: u64,
) -> Result<Outcome, CliError> {
    let mean = params.mean_offspring().to_f64().unwrap_or(f64::INFINITY);
    let expected = mean.max(1.0).powi(depth as i32);
    if expected > max_cubes as f64 {
        return Err(CliError::Resource(format!(
            "depth {depth} retains about {expected:.3e} cubes per trial, cap is {max_cubes}"
        )));
    }
    let est = empirical_spectrum_mc(params, theta, depth, trials, seed)?;
    let report = PercolationReport {
        n: params.n,
        d: params.d,
        p: params.p().to_string(),
        theta,
        depth,
        box_dim: round(box_dimension(params)?),
        estimate: round(est.estimate),
        spread: round(est.spread),
        single_scale: round(est.single_scale),
        survival_fraction: round(est.survival_fraction),
        trials,
    };
    let mut bundle = Bundle::new();
    bundle.add_json("estimate.json", &report);
    if trials_csv {
        bundle.add("trials.csv", est.trials_csv());
    }
    Ok(Outcome::ok(bundle))
}

fn moran(common: &Common, k_max: usize, tail: Option<f64>, max_levels: usize) -> Result<Outcome, CliError> {
    let spec = MoranSpec::from_json(&read_config(common)?)?;
    let grid = grid(common)?;
    if k_max > max_levels {
        return Err(CliError::Resource(format!("k_max {k_max} exceeds the level cap {max_levels}")));
    }
    let window = match tail {
        Some(f) => TailWindow::Fraction(f),
        None => spec.default_window(),
    };
    let mut up = Vec::with_capacity(grid.len());
    let mut down = Vec::with_capacity(grid.len());
    let mut rows = Vec::with_capacity(grid.len());
    for &theta in grid.points() {
        let a = assouad_spectrum_trunc(&spec, theta, k_max, window)?;
        let l = lower_spectrum_trunc(&spec, theta, k_max, window)?;
        up.push(a.sup_tail);
        down.push(l.inf_tail);
        rows.push(json!({
            "theta": round(theta),
            "assouad": round(a.sup_tail),
            "assouad_tail_spread": round(a.sup_tail - a.inf_tail),
            "lower": round(l.inf_tail),
            "lower_tail_spread": round(l.sup_tail - l.inf_tail),
            "window_start": a.window_start,
        }));
    }
    let d = spec.ambient_dim;
    let up = SpectrumCurve::new(grid.clone(), up, SpectrumKind::Assouad, d)?
        .with_closed_form(format!("truncated sup over the tail window, k_max = {k_max}"));
    let down = SpectrumCurve::new(grid, down, SpectrumKind::Lower, d)?
        .with_closed_form(format!("truncated inf over the tail window, k_max = {k_max}"));
    let mut bundle = Bundle::new();
    bundle.add_curve("assouad", &up);
    bundle.add_curve("lower", &down);
    bundle.add_json(
        "report.json",
        &json!({
            "k_max": k_max,
            "window": window,
            "feasibility_warnings": spec.feasibility_warnings(k_max)?,
            "rows": rows,
        }),
    );
    Ok(Outcome::ok(bundle))
}

fn tails(
    common: &Common,
    k_max: u64,
    lambdas: &[f64],
    windows: usize,
    banach_k: u64,
    min_window: u64,
) -> Result<Outcome, CliError> {
    const BANACH_CAP: u64 = 200_000;
    let set = IntegerSet::from_json(&read_config(common)?)?;
    if banach_k > BANACH_CAP {
        return Err(CliError::Resource(format!("Banach horizon {banach_k} exceeds {BANACH_CAP}")));
    }
    let asym = asymptotic_densities(&set, k_max, TailWindow::default())?;
    let banach = banach_densities(&set, banach_k, min_window)?;
    let mut report = json!({
        "k_max": k_max,
        "asymptotic": { "upper": round(asym.sup_tail), "lower": round(asym.inf_tail) },
        "banach": { "k_max": banach_k, "min_window": min_window, "upper": round(banach.upper), "lower": round(banach.lower) },
    });
    let mut failure = None;
    // The inequality checks need closed-form limits; other sets get the
    // truncated values only.
    if exact_limits(&set).is_some() {
        let checks = check_taildensity_props(&set, lambdas, k_max, windows, common.seed)?;
        if !checks.passed() {
            failure = Some(checks.violations.join("; "));
        }
        report["checks"] = serde_json::to_value(&checks).expect("report serializes");
    } else {
        let rows = lambdas
            .iter()
            .map(|&lambda| {
                let est = tail_densities(&set, lambda, k_max, TailWindow::default())?;
                Ok(json!({ "lambda": round(lambda), "upper": round(est.sup_tail), "lower": round(est.inf_tail) }))
            })
            .collect::<Result<Vec<_>, CliError>>()?;
        report["tail"] = json!(rows);
    }
    let mut bundle = Bundle::new();
    bundle.add_json("report.json", &report);
    Ok(Outcome { bundle, failure })
}

fn verify(common: &Common, target: &VerifyTarget) -> Result<Outcome, CliError> {
    match target {
        VerifyTarget::Carpet { thetas, tol, budget } => verify_carpet(common, thetas, *tol, *budget),
        VerifyTarget::Ifs { deltas, tol, max_words } => verify_ifs(common, deltas, *tol, *max_words),
        VerifyTarget::Percolation {
            n,
            d,
            p,
            order,
            depth,
            tol,
            max_support,
        } => {
            let params = percolation_params(common, *n, *d, p.as_deref())?;
            verify_percolation(&params, *order, *depth, *tol, *max_support)
        }
    }
}

/// Dyadic scales `R = 2^-j` from `j = 4` down to the finest scale the oracle
/// can afford at this θ. A wide window averages out the staircase that the
/// `m`- and `n`-adic grids put into single-scale counts.
fn verify_scales(spec: &CarpetSpec, assouad: f64, theta: f64, budget: f64) -> Result<Vec<f64>, CliError> {
    const FIRST: i32 = 4;
    const MIN_SCALES: i32 = 8;
    let by_level = ((DEFAULT_LEVEL_CAP - 1) as f64 * theta * (spec.m() as f64).log2()).floor();
    let by_count = (budget / ((1.0 / theta - 1.0) * assouad.max(1e-9))).floor();
    let hi = by_level.min(by_count).min(60.0) as i32;
    if hi - FIRST + 1 < MIN_SCALES {
        return Err(CliError::Resource(format!(
            "no affordable scale window at θ = {theta} (finest usable R = 2^-{hi})"
        )));
    }
    Ok((FIRST..=hi).map(|j| 2f64.powi(-j)).collect())
}

fn verify_carpet(common: &Common, thetas: &[f64], tol: f64, budget: f64) -> Result<Outcome, CliError> {
    let spec = CarpetSpec::from_json(&read_config(common)?)?;
    let dims = carpet_dimensions(&spec);
    let oracle = CarpetOracle::new(spec.clone());
    let word = max_column_word(&spec);
    let mut rows = Vec::with_capacity(thetas.len());
    let mut failures = Vec::new();
    for &theta in thetas {
        let expected = assouad_spectrum(&spec, theta)?;
        let scales = verify_scales(&spec, dims.assouad, theta, budget)?;
        let est = empirical_spectrum(&oracle, theta, &scales, std::slice::from_ref(&word))?;
        let error = (est.slope - expected).abs();
        if error > tol {
            failures.push(format!("θ = {theta}: slope {} vs {expected}", est.slope));
        }
        rows.push(json!({
            "theta": round(theta),
            "closed_form": round(expected),
            "slope": round(est.slope),
            "error": round(error),
            "scales": [round(scales[0]), round(scales[scales.len() - 1])],
            "pass": error <= tol,
        }));
    }
    let mut bundle = Bundle::new();
    bundle.add_json("verify.json", &json!({ "target": "carpet", "tol": tol, "rows": rows }));
    Ok(Outcome {
        bundle,
        failure: (!failures.is_empty()).then(|| failures.join("; ")),
    })
}

fn verify_ifs(common: &Common, deltas: &[f64], tol: f64, max_words: usize) -> Result<Outcome, CliError> {
    let ifs = SimilarIfs::from_json(&read_config(common)?)?;
    let s = similarity_exponent(&ifs, DEFAULT_TOL)?;
    let mut rows = Vec::with_capacity(deltas.len());
    let mut failures = Vec::new();
    for &delta in deltas {
        let set = stopping_set_capped(&ifs, delta, max_words)?;
        let mut total = 0.0;
        for w in &set.words {
            total += gibbs_mass(&ifs, s, w)?;
        }
        let error = (total - 1.0).abs();
        if error > tol {
            failures.push(format!("δ = {delta}: mass {total}"));
        }
        rows.push(json!({
            "delta": round(delta),
            "words": set.words.len(),
            "mass": round(total),
            "pass": error <= tol,
        }));
    }
    let mut bundle = Bundle::new();
    bundle.add_json(
        "verify.json",
        &json!({ "target": "ifs", "s": round(s), "tol": tol, "rows": rows }),
    );
    Ok(Outcome {
        bundle,
        failure: (!failures.is_empty()).then(|| failures.join("; ")),
    })
}

fn verify_percolation(
    params: &PercolationParams,
    order: usize,
    depth: usize,
    tol: f64,
    max_support: u64,
) -> Result<Outcome, CliError> {
    let count = params.offspring_count() as u64;
    let support = (count as f64).powi(depth as i32);
    if support > max_support as f64 {
        return Err(CliError::Resource(format!(
            "exact distribution at depth {depth} has support {support:.3e}, cap is {max_support}"
        )));
    }
    let pmf = binomial_pmf(params.offspring_count(), params.p())?;
    let table = gw_moment_table(&OffspringMoments::from_pmf(&pmf, order)?, order)?;
    let mut rows = Vec::new();
    let mut worst = 0.0f64;
    for n in 0..=depth {
        let dist = exact_gw_distribution(&pmf, n)?;
        for k in 1..=order {
            let exact = pmf_moment(&dist, k as u32);
            let table_value = table.moment(k, n as u32)?;
            let exact_f = exact.to_f64().unwrap_or(f64::NAN);
            let rel = ((table_value.to_f64().unwrap_or(f64::NAN) - exact_f) / exact_f).abs();
            worst = worst.max(rel);
            rows.push(json!({ "depth": n, "order": k, "moment": round(exact_f), "relative_error": round(rel) }));
        }
    }
    let mut bundle = Bundle::new();
    bundle.add_json(
        "verify.json",
        &json!({ "target": "percolation", "tol": tol, "worst_relative_error": round(worst), "rows": rows }),
    );
    Ok(Outcome {
        bundle,
        failure: (worst > tol || worst.is_nan()).then(|| format!("worst relative error {worst}")),
    })
}

/// Parses arguments, runs, and returns the exit code. Argument errors exit 2.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(&cli),
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            code
        }
    }
}
