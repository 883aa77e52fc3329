//! Mandelbrot percolation: exact Galton–Watson moments, the probability
//! bounds used to control the spectrum, and a Monte-Carlo estimate of the
//! Assouad spectrum from sampled constructions.
//!
//! At each level every selected cube of side `n^{-k}` in `[0,1]^d` is split
//! into `n^d` subcubes, each kept independently with probability `p`.

pub mod moments;
pub mod sample;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Pow, Zero};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_theta, Error, Result};
use crate::par;
use crate::stats::{least_squares, mean, std_dev};

pub use moments::{
    binomial_moments, binomial_pmf, exact_gw_distribution, expand_power_sum, gw_moment_table, pmf_moment,
    GwMomentTable, OffspringMoments,
};
pub use sample::{sample, PercolationSample};

/// Number of bootstrap resamples behind [`McEstimate::spread`].
pub const BOOTSTRAP_RESAMPLES: usize = 1000;

/// Parses a plain decimal such as `0.7`, `1`, or `2.5e-3` exactly.
pub fn parse_decimal(text: &str) -> Result<BigRational> {
    let bad = || Error::invalid(format!("not a decimal number: {text:?}"));
    let t = text.trim();
    let (mantissa, exp) = match t.find(['e', 'E']) {
        Some(pos) => (&t[..pos], t[pos + 1..].parse::<i32>().map_err(|_| bad())?),
        None => (t, 0),
    };
    let (int, frac) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    if int.is_empty() && frac.is_empty() {
        return Err(bad());
    }
    if !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let digits: BigInt = format!("{int}{frac}").parse().map_err(|_| bad())?;
    let scale = exp - frac.len() as i32;
    let ten = BigRational::from_integer(BigInt::from(10));
    Ok(BigRational::from_integer(digits) * Pow::pow(&ten, scale))
}

/// Parameters `(n, d, p)` of the construction. `p` is stored exactly.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PercolationParams {
    pub n: u32,
    pub d: u32,
    p: BigRational,
}

#[derive(Serialize, Deserialize)]
struct RawParams {
    n: u32,
    d: u32,
    p: f64,
}

impl PercolationParams {
    pub fn new(n: u32, d: u32, p: BigRational) -> Result<Self> {
        if n < 2 || d < 1 {
            return Err(Error::invalid(format!("need n ≥ 2 and d ≥ 1, got n = {n}, d = {d}")));
        }
        if !(p > BigRational::zero() && p <= BigRational::one()) {
            return Err(Error::invalid(format!("p = {p} outside (0,1]")));
        }
        if (n as f64).powi(d as i32) > u32::MAX as f64 {
            return Err(Error::invalid("n^d too large"));
        }
        Ok(PercolationParams { n, d, p })
    }

    /// Takes `p` as the shortest decimal that round-trips to the given
    /// float, so `0.7` means exactly `7/10`.
    pub fn from_f64(n: u32, d: u32, p: f64) -> Result<Self> {
        if !p.is_finite() {
            return Err(Error::invalid(format!("p = {p} is not finite")));
        }
        Self::new(n, d, parse_decimal(&format!("{p}"))?)
    }

    pub fn p(&self) -> &BigRational {
        &self.p
    }

    pub fn p_f64(&self) -> f64 {
        moments::to_f64(&self.p)
    }

    /// `n^d`, the number of subcubes per split.
    pub fn offspring_count(&self) -> u32 {
        self.n.pow(self.d)
    }

    /// `p·n^d`, the mean number of selected subcubes.
    pub fn mean_offspring(&self) -> BigRational {
        &self.p * BigRational::from_integer(BigInt::from(self.offspring_count()))
    }

    pub fn is_supercritical(&self) -> bool {
        self.mean_offspring() > BigRational::one()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: RawParams =
            serde_json::from_str(text).map_err(|e| Error::invalid(format!("percolation JSON: {e}")))?;
        Self::from_f64(raw.n, raw.d, raw.p)
    }
}

/// `B = log(p n^d) / log n`.
pub fn box_dimension(params: &PercolationParams) -> Result<f64> {
    if !params.is_supercritical() {
        return Err(Error::domain(format!(
            "p·n^d = {} ≤ 1: the construction dies out almost surely",
            params.mean_offspring()
        )));
    }
    Ok((params.p_f64() * params.offspring_count() as f64).ln() / (params.n as f64).ln())
}

/// Raw moments of the offspring law Binomial(`n^d`, `p`).
pub fn offspring_moments(params: &PercolationParams, k: usize) -> Result<OffspringMoments> {
    binomial_moments(params.offspring_count(), params.p(), k)
}

/// Markov bound `n^{Bs} · E[Y_{⌊k⌋}^N] / M^N` on the probability that some
/// level-`s` cube has at least `M` selected descendants `⌊k⌋` levels down.
pub fn g_cube_bound(
    params: &PercolationParams,
    s: u32,
    k: f64,
    m: f64,
    big_n: usize,
    table: &GwMomentTable,
) -> Result<f64> {
    if big_n == 0 || big_n > table.order() {
        return Err(Error::domain(format!("N = {big_n} outside table of order {}", table.order())));
    }
    if !(m > 0.0) || !(k >= 0.0) {
        return Err(Error::domain("need M > 0 and k ≥ 0"));
    }
    let moment = table.moment_f64(big_n, k.floor() as u32)?;
    let cubes = moments::to_f64(&params.mean_offspring()).powi(s as i32);
    Ok(cubes * moment / m.powi(big_n as i32))
}

/// Fraction of sampled constructions in which some level-`s` cube has at
/// least `M` selected descendants at level `s + ⌊k⌋`.
pub fn g_cube_frequency(params: &PercolationParams, s: usize, k: f64, m: f64, trials: usize, seed: u64) -> Result<f64> {
    if trials == 0 {
        return Err(Error::invalid("need at least one trial"));
    }
    let depth = s + k.floor() as usize;
    let seeds = trial_seeds(seed, trials);
    let hits = par::try_map(&seeds, |&sd| {
        let tree = sample(params, depth.max(1), sd)?;
        Ok::<_, Error>(tree.descendant_counts(s, depth).iter().any(|&c| c as f64 >= m))
    })?;
    Ok(hits.iter().filter(|h| **h).count() as f64 / trials as f64)
}

/// `B + B N (1/θ - 1) - N B_1 (1/θ - 1)`; negative exponents make the
/// Borel–Cantelli sum converge.
pub fn borel_cantelli_exponent(b: f64, b1: f64, big_n: u32, theta: f64) -> Result<f64> {
    check_theta(theta)?;
    if big_n == 0 || !(b1 > 0.0) {
        return Err(Error::domain("need N ≥ 1 and B_1 > 0"));
    }
    let g = 1.0 / theta - 1.0;
    let nf = big_n as f64;
    Ok(b + b * nf * g - nf * b1 * g)
}

/// The value of `B_1` at which [`borel_cantelli_exponent`] vanishes,
/// `B + Bθ/(N(1-θ))`.
pub fn borel_cantelli_bound(b: f64, big_n: u32, theta: f64) -> Result<f64> {
    check_theta(theta)?;
    if big_n == 0 {
        return Err(Error::domain("need N ≥ 1"));
    }
    Ok(b + b * theta / (big_n as f64 * (1.0 - theta)))
}

/// Per-trial seeds drawn from a ChaCha stream seeded by `seed`.
pub fn trial_seeds(seed: u64, trials: usize) -> Vec<u64> {
    let mut master = ChaCha8Rng::seed_from_u64(seed);
    (0..trials).map(|_| master.next_u64()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialEstimate {
    pub seed: u64,
    pub survived: bool,
    /// Regression slope over the depth window (surviving trials only).
    pub slope: Option<f64>,
    /// `log(max count) / ((depth - ⌊θ depth⌋) log n)` at full depth.
    pub single_scale: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McEstimate {
    #[serde(rename = "B")]
    pub box_dim: f64,
    /// Mean regression slope over surviving trials.
    pub estimate: f64,
    /// Bootstrap standard error of `estimate`.
    pub spread: f64,
    /// Mean single-scale exponent over surviving trials.
    pub single_scale: f64,
    pub survival_fraction: f64,
    pub trials: Vec<TrialEstimate>,
}

impl McEstimate {
    /// Per-trial CSV: `seed,survived,slope,single_scale`.
    pub fn trials_csv(&self) -> String {
        let mut out = String::from("seed,survived,slope,single_scale\n");
        let opt = |v: Option<f64>| v.map_or(String::new(), |x| crate::numfmt::fmt_sig(x, crate::numfmt::SIG_DIGITS));
        for t in &self.trials {
            out.push_str(&format!("{},{},{},{}\n", t.seed, t.survived, opt(t.slope), opt(t.single_scale)));
        }
        out
    }
}

/// Monte-Carlo estimate of the Assouad spectrum at `theta`.
///
/// Each trial samples the construction to `depth`. For every sub-depth
/// `D ∈ [⌈depth/2⌉, depth]` it takes `s = ⌊θD⌋` and the largest number of
/// level-`D` cubes inside one level-`s` cube; the trial's estimate is the
/// slope of `log` of that maximum against `(D - s)·log n`. Fitting a slope
/// removes the bounded factor that the maximum over many cubes contributes
/// at every scale. Extinct trials are discarded and counted in
/// `survival_fraction`.
pub fn empirical_spectrum_mc(
    params: &PercolationParams,
    theta: f64,
    depth: usize,
    trials: usize,
    seed: u64,
) -> Result<McEstimate> {
    check_theta(theta)?;
    let box_dim = box_dimension(params)?;
    if trials == 0 {
        return Err(Error::invalid("need at least one trial"));
    }
    if theta * (depth as f64) < 2.0 {
        return Err(Error::Precondition(format!(
            "θ·depth = {} leaves fewer than 2 levels of headroom",
            theta * depth as f64
        )));
    }
    let window: Vec<(usize, usize)> = (depth.div_ceil(2)..=depth)
        .map(|big_d| (big_d, (theta * big_d as f64).floor() as usize))
        .filter(|&(big_d, s)| s >= 1 && big_d > s)
        .collect();
    let spread_x = window.iter().map(|&(big_d, s)| big_d - s).collect::<std::collections::BTreeSet<_>>();
    if spread_x.len() < 2 {
        return Err(Error::Precondition("depth too small for a slope fit".into()));
    }
    let log_n = (params.n as f64).ln();
    let seeds = trial_seeds(seed, trials);

    let per_trial = par::try_map(&seeds, |&sd| {
        let tree = sample(params, depth, sd)?;
        if !tree.survived() {
            return Ok::<_, Error>(TrialEstimate {
                seed: sd,
                survived: false,
                slope: None,
                single_scale: None,
            });
        }
        let mut xs = Vec::with_capacity(window.len());
        let mut ys = Vec::with_capacity(window.len());
        for &(big_d, s) in &window {
            let max = tree.descendant_counts(s, big_d).into_iter().max().unwrap_or(0);
            xs.push((big_d - s) as f64 * log_n);
            ys.push((max.max(1) as f64).ln());
        }
        let slope = least_squares(&xs, &ys).map(|(m, _)| m);
        let last = xs.len() - 1;
        Ok(TrialEstimate {
            seed: sd,
            survived: true,
            slope,
            single_scale: Some(ys[last] / xs[last]),
        })
    })?;

    let slopes: Vec<f64> = per_trial.iter().filter_map(|t| t.slope).collect();
    let survivors = per_trial.iter().filter(|t| t.survived).count();
    let survival_fraction = survivors as f64 / trials as f64;
    if slopes.is_empty() {
        return Err(Error::Extinction {
            trials,
            survival_fraction,
        });
    }
    let singles: Vec<f64> = per_trial.iter().filter_map(|t| t.single_scale).collect();
    Ok(McEstimate {
        box_dim,
        estimate: mean(&slopes),
        spread: bootstrap_spread(&slopes, seed),
        single_scale: mean(&singles),
        survival_fraction,
        trials: per_trial,
    })
}

fn bootstrap_spread(values: &[f64], seed: u64) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let means: Vec<f64> = (0..BOOTSTRAP_RESAMPLES)
        .map(|_| {
            let total: f64 = (0..values.len()).map(|_| values[rng.random_range(0..values.len())]).sum();
            total / values.len() as f64
        })
        .collect();
    std_dev(&means)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decimal_parsing() {
        assert_eq!(parse_decimal("0.7").unwrap(), BigRational::new(7.into(), 10.into()));
        assert_eq!(parse_decimal("1").unwrap(), BigRational::one());
        assert_eq!(parse_decimal("2.5e-3").unwrap(), BigRational::new(1.into(), 400.into()));
        assert_eq!(parse_decimal(".5").unwrap(), BigRational::new(1.into(), 2.into()));
        assert!(parse_decimal("abc").is_err());
        assert!(parse_decimal("-0.5").is_err());
        assert!(parse_decimal(".").is_err());
    }

    #[test]
    fn params_from_float_are_exact_decimals() {
        let p = PercolationParams::from_f64(2, 2, 0.7).unwrap();
        assert_eq!(p.p(), &BigRational::new(7.into(), 10.into()));
        assert!(PercolationParams::from_f64(2, 2, 0.0).is_err());
        assert!(PercolationParams::from_f64(1, 2, 0.5).is_err());
        assert!(PercolationParams::from_json(r#"{"n":3,"d":1,"p":0.5}"#).is_ok());
    }
}
