//! Asymptotic, Banach and λ-tail densities of sets of positive integers.
//!
//! For `X ⊆ ℕ = {1, 2, …}` and `λ > 1` the per-`k` tail value is
//! `#X ∩ [k, ⌊λk⌋] / (λk − k)`; its limsup and liminf are the upper and lower
//! λ-tail densities. They sit between the asymptotic and Banach densities:
//!
//! ```text
//! D̄(X) ≤ D̄(X,λ) ≤ λD̄(X)/(λ−1) ∧ B̄(X)
//! (λD̲(X)−1)/(λ−1) ∨ B̲(X) ≤ D̲(X,λ) ≤ D̲(X)
//! ```

use num_traits::ToPrimitive;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numfmt;
use crate::par;
use crate::percolation::parse_decimal;
use crate::spectrum::{TailWindow, TruncatedLimit};

/// Blocks `f(j)..=⌊λf(j)⌋`, `f(j) = f_base^j`, each carrying
/// `⌊(⌊λf(j)⌋ − f(j) + 1)·t⌋` members spread as evenly as possible.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Recipe {
    pub t: f64,
    pub lambda: f64,
    #[serde(default = "default_f_base")]
    pub f_base: u64,
}

fn default_f_base() -> u64 {
    10
}

impl Recipe {
    pub fn new(t: f64, lambda: f64, f_base: u64) -> Result<Self> {
        let r = Recipe { t, lambda, f_base };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.t) {
            return Err(Error::invalid(format!("recipe density t = {} outside [0,1]", self.t)));
        }
        if !(self.lambda > 1.0 && self.lambda.is_finite()) {
            return Err(Error::invalid(format!("recipe lambda = {} must exceed 1", self.lambda)));
        }
        if self.f_base < 2 {
            return Err(Error::invalid("recipe f_base must be at least 2"));
        }
        // ⌊λ b^j⌋ < b^{j+1} for every j exactly when λ < b.
        if self.lambda >= self.f_base as f64 {
            return Err(Error::Schedule(format!(
                "blocks overlap: lambda {} is not below f_base {}",
                self.lambda, self.f_base
            )));
        }
        Ok(())
    }

    /// Blocks `(start, end, members)` with `start ≤ upto`.
    fn blocks(&self, upto: u64) -> Result<Vec<(u64, u64, u64)>> {
        let lambda = Ratio::from_f64(self.lambda)?;
        let t = Ratio::from_f64(self.t)?;
        let mut out = Vec::new();
        let mut f = self.f_base;
        while f <= upto {
            let end = lambda.floor_mul(f);
            let cnt = t.floor_mul(end - f + 1);
            out.push((f, end, cnt));
            match f.checked_mul(self.f_base) {
                Some(next) => f = next,
                None => break,
            }
        }
        Ok(out)
    }
}

/// Structured infinite sets built from sparse blocks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockSchedule {
    Recipe(Recipe),
    /// The even numbers, overwritten at `b^j` by `j` non-members followed by
    /// `j` members.
    Sharpness { f_base: u64 },
    /// Only the runs `b^j..b^j + j − 1`.
    Runs { f_base: u64 },
}

impl BlockSchedule {
    fn validate(&self) -> Result<()> {
        match self {
            BlockSchedule::Recipe(r) => r.validate(),
            BlockSchedule::Sharpness { f_base } | BlockSchedule::Runs { f_base } if *f_base < 2 => {
                Err(Error::invalid("run schedule f_base must be at least 2"))
            }
            _ => Ok(()),
        }
    }

    fn fill(&self, ind: &mut [bool]) -> Result<()> {
        let upto = (ind.len() - 1) as u64;
        let mut set = |i: u64, v: bool| {
            if i <= upto {
                ind[i as usize] = v;
            }
        };
        match self {
            BlockSchedule::Recipe(r) => {
                for (f, end, cnt) in r.blocks(upto)? {
                    let len = end - f + 1;
                    for j in 0..cnt {
                        set(f + j * len / cnt, true);
                    }
                }
            }
            BlockSchedule::Sharpness { f_base } => {
                for i in (2..=upto).step_by(2) {
                    set(i, true);
                }
                for_runs(*f_base, upto, |f, n| {
                    for i in 0..n {
                        set(f + i, false);
                        set(f + n + i, true);
                    }
                });
            }
            BlockSchedule::Runs { f_base } => {
                for_runs(*f_base, upto, |f, n| {
                    for i in 0..n {
                        set(f + i, true);
                    }
                });
            }
        }
        Ok(())
    }
}

fn for_runs(f_base: u64, upto: u64, mut visit: impl FnMut(u64, u64)) {
    let mut f = f_base;
    let mut n = 1;
    while f <= upto {
        visit(f, n);
        n += 1;
        match f.checked_mul(f_base) {
            Some(next) => f = next,
            None => break,
        }
    }
}

/// A decimal ratio held exactly, so `⌊λk⌋` never suffers from binary rounding.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Ratio {
    num: u128,
    den: u128,
}

impl Ratio {
    pub(crate) fn from_f64(x: f64) -> Result<Self> {
        let exact = parse_decimal(&format!("{x}"))?;
        let num = exact.numer().to_u128();
        let den = exact.denom().to_u128();
        match (num, den) {
            (Some(num), Some(den)) if den > 0 => Ok(Ratio { num, den }),
            _ => Err(Error::invalid(format!("{x} has no small exact decimal form"))),
        }
    }

    pub(crate) fn floor_mul(&self, k: u64) -> u64 {
        (k as u128 * self.num / self.den) as u64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ExplicitMembers {
    Plain(Vec<u64>),
    WithHorizon { members: Vec<u64>, horizon: u64 },
}

/// A subset of the positive integers, known up to a horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntegerSet {
    /// Listed members; membership is known through `horizon` (by default the
    /// largest member).
    Explicit(ExplicitMembers),
    /// `i ∈ X` iff `i mod q` is one of the residues.
    Periodic { q: u64, residues: Vec<u64> },
    Blocks(BlockSchedule),
    Complement(Box<IntegerSet>),
}

impl IntegerSet {
    pub fn explicit(members: Vec<u64>, horizon: u64) -> Result<Self> {
        let set = IntegerSet::Explicit(ExplicitMembers::WithHorizon { members, horizon });
        set.validate()?;
        Ok(set)
    }

    pub fn periodic(q: u64, residues: Vec<u64>) -> Result<Self> {
        let set = IntegerSet::Periodic { q, residues };
        set.validate()?;
        Ok(set)
    }

    /// All of ℕ.
    pub fn naturals() -> Self {
        IntegerSet::Periodic { q: 1, residues: vec![0] }
    }

    pub fn empty() -> Self {
        IntegerSet::Periodic { q: 1, residues: vec![] }
    }

    /// Positive multiples of `q`.
    pub fn multiples(q: u64) -> Result<Self> {
        Self::periodic(q, vec![0])
    }

    pub fn blocks(schedule: BlockSchedule) -> Result<Self> {
        schedule.validate()?;
        Ok(IntegerSet::Blocks(schedule))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let set: IntegerSet =
            serde_json::from_str(text).map_err(|e| Error::invalid(format!("integer set JSON: {e}")))?;
        set.validate()?;
        Ok(set)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            IntegerSet::Explicit(m) => {
                let members = m.members();
                if members.first() == Some(&0) {
                    return Err(Error::invalid("members must be positive integers"));
                }
                if members.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::invalid("members must be strictly increasing"));
                }
                if members.last().is_some_and(|&l| l > m.horizon()) {
                    return Err(Error::invalid("member beyond the declared horizon"));
                }
                Ok(())
            }
            IntegerSet::Periodic { q, residues } => {
                if *q == 0 {
                    return Err(Error::invalid("period must be positive"));
                }
                if residues.iter().any(|r| r >= q) {
                    return Err(Error::invalid("residue not below the period"));
                }
                if residues.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::invalid("residues must be strictly increasing"));
                }
                Ok(())
            }
            IntegerSet::Blocks(b) => b.validate(),
            IntegerSet::Complement(inner) => inner.validate(),
        }
    }

    /// `ℕ ∖ X`. Complementing twice gives back the original set.
    pub fn complement(&self) -> IntegerSet {
        match self {
            IntegerSet::Complement(inner) => (**inner).clone(),
            other => IntegerSet::Complement(Box::new(other.clone())),
        }
    }

    /// Largest integer whose membership is known; `None` when unbounded.
    pub fn horizon(&self) -> Option<u64> {
        match self {
            IntegerSet::Explicit(m) => Some(m.horizon()),
            IntegerSet::Periodic { .. } | IntegerSet::Blocks(_) => None,
            IntegerSet::Complement(inner) => inner.horizon(),
        }
    }

    fn check_horizon(&self, upto: u64) -> Result<()> {
        match self.horizon() {
            Some(h) if upto > h => Err(Error::Horizon { requested: upto, horizon: h }),
            _ => Ok(()),
        }
    }

    pub fn contains(&self, i: u64) -> Result<bool> {
        if i == 0 {
            return Err(Error::invalid("positions start at 1"));
        }
        self.check_horizon(i)?;
        Ok(match self {
            IntegerSet::Explicit(m) => m.members().binary_search(&i).is_ok(),
            IntegerSet::Periodic { q, residues } => residues.binary_search(&(i % q)).is_ok(),
            IntegerSet::Blocks(_) => self.indicator(i)?[i as usize],
            IntegerSet::Complement(inner) => !inner.contains(i)?,
        })
    }

    /// Membership of `0..=upto`; entry 0 is always `false`.
    pub fn indicator(&self, upto: u64) -> Result<Vec<bool>> {
        self.check_horizon(upto)?;
        let n = upto as usize;
        let mut ind = vec![false; n + 1];
        match self {
            IntegerSet::Explicit(m) => {
                for &i in m.members().iter().take_while(|&&i| i <= upto) {
                    ind[i as usize] = true;
                }
            }
            IntegerSet::Periodic { q, residues } => {
                for (i, slot) in ind.iter_mut().enumerate().skip(1) {
                    *slot = residues.binary_search(&(i as u64 % q)).is_ok();
                }
            }
            IntegerSet::Blocks(b) => b.fill(&mut ind)?,
            IntegerSet::Complement(inner) => {
                ind = inner.indicator(upto)?;
                for slot in ind.iter_mut().skip(1) {
                    *slot = !*slot;
                }
            }
        }
        Ok(ind)
    }

    pub fn prefix_counts(&self, upto: u64) -> Result<PrefixCounts> {
        let ind = self.indicator(upto)?;
        let mut cum = Vec::with_capacity(ind.len());
        let mut acc = 0u64;
        for (i, &b) in ind.iter().enumerate() {
            if i > 0 && b {
                acc += 1;
            }
            cum.push(acc);
        }
        Ok(PrefixCounts { cum })
    }

    /// `(r, q)` when the set is periodic with `r` members per period `q`.
    pub fn periodic_density(&self) -> Option<(u64, u64)> {
        match self {
            IntegerSet::Periodic { q, residues } => Some((residues.len() as u64, *q)),
            IntegerSet::Complement(inner) => inner.periodic_density().map(|(r, q)| (q - r, q)),
            _ => None,
        }
    }
}

impl ExplicitMembers {
    pub fn members(&self) -> &[u64] {
        match self {
            ExplicitMembers::Plain(m) | ExplicitMembers::WithHorizon { members: m, .. } => m,
        }
    }

    pub fn horizon(&self) -> u64 {
        match self {
            ExplicitMembers::Plain(m) => m.last().copied().unwrap_or(0),
            ExplicitMembers::WithHorizon { horizon, .. } => *horizon,
        }
    }
}

/// `cum[i] = #X ∩ [1, i]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrefixCounts {
    cum: Vec<u64>,
}

impl PrefixCounts {
    pub fn upto(&self) -> u64 {
        (self.cum.len() - 1) as u64
    }

    /// `#X ∩ [a, b]` for `1 ≤ a`, `b ≤ upto`; zero when `a > b`.
    pub fn count(&self, a: u64, b: u64) -> u64 {
        if a > b {
            return 0;
        }
        self.cum[b as usize] - self.cum[a as usize - 1]
    }
}

/// The six densities in closed form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExactLimits {
    #[serde(serialize_with = "numfmt::ser_f64")]
    pub upper_asymptotic: f64,
    #[serde(serialize_with = "numfmt::ser_f64")]
    pub lower_asymptotic: f64,
    #[serde(serialize_with = "numfmt::ser_f64")]
    pub upper_banach: f64,
    #[serde(serialize_with = "numfmt::ser_f64")]
    pub lower_banach: f64,
    /// The λ-tail densities; constant in λ for every set with known limits.
    #[serde(serialize_with = "numfmt::ser_f64")]
    pub upper_tail: f64,
    #[serde(serialize_with = "numfmt::ser_f64")]
    pub lower_tail: f64,
}

impl ExactLimits {
    fn constant(d: f64) -> Self {
        ExactLimits {
            upper_asymptotic: d,
            lower_asymptotic: d,
            upper_banach: d,
            lower_banach: d,
            upper_tail: d,
            lower_tail: d,
        }
    }

    fn complement(&self) -> Self {
        ExactLimits {
            upper_asymptotic: 1.0 - self.lower_asymptotic,
            lower_asymptotic: 1.0 - self.upper_asymptotic,
            upper_banach: 1.0 - self.lower_banach,
            lower_banach: 1.0 - self.upper_banach,
            upper_tail: 1.0 - self.lower_tail,
            lower_tail: 1.0 - self.upper_tail,
        }
    }
}

/// Closed-form densities, when the set admits them.
///
/// Periodic sets have every density equal to `r/q`. The run schedules have
/// runs of length `j` at `b^j`, which are invisible to asymptotic and tail
/// densities but reach every Banach window. Recipe blocks are left out: with
/// a finite `f_base` earlier blocks shift the limits away from the
/// closed forms.
pub fn exact_limits(set: &IntegerSet) -> Option<ExactLimits> {
    match set {
        IntegerSet::Periodic { .. } => set
            .periodic_density()
            .map(|(r, q)| ExactLimits::constant(r as f64 / q as f64)),
        IntegerSet::Blocks(BlockSchedule::Sharpness { .. }) => Some(ExactLimits {
            upper_banach: 1.0,
            lower_banach: 0.0,
            ..ExactLimits::constant(0.5)
        }),
        IntegerSet::Blocks(BlockSchedule::Runs { .. }) => Some(ExactLimits {
            upper_banach: 1.0,
            ..ExactLimits::constant(0.0)
        }),
        IntegerSet::Complement(inner) => exact_limits(inner).map(|e| e.complement()),
        _ => None,
    }
}

fn agreed(a: f64, b: f64) -> Option<f64> {
    (a == b).then_some(a)
}

/// Per-`k` values `#X ∩ [1,k] / k` for `k = 1..=K`.
pub fn asymptotic_densities(set: &IntegerSet, k_max: u64, window: TailWindow) -> Result<TruncatedLimit> {
    if k_max == 0 {
        return Err(Error::invalid("K must be at least 1"));
    }
    let pc = set.prefix_counts(k_max)?;
    let partials = (1..=k_max)
        .map(|k| (k as usize, pc.count(1, k) as f64 / k as f64))
        .collect();
    let exact = exact_limits(set).and_then(|e| agreed(e.upper_asymptotic, e.lower_asymptotic));
    Ok(TruncatedLimit::new(partials, window)?.with_exact(exact))
}

/// Per-`k` values `#X ∩ [k, ⌊λk⌋] / (λk − k)` for `k = 1..=K`.
pub fn tail_densities(set: &IntegerSet, lambda: f64, k_max: u64, window: TailWindow) -> Result<TruncatedLimit> {
    if !(lambda > 1.0 && lambda.is_finite()) {
        return Err(Error::domain(format!("lambda must exceed 1, got {lambda}")));
    }
    if k_max == 0 {
        return Err(Error::invalid("K must be at least 1"));
    }
    let ratio = Ratio::from_f64(lambda)?;
    let pc = set.prefix_counts(ratio.floor_mul(k_max))?;
    let partials = (1..=k_max)
        .map(|k| {
            let hits = pc.count(k, ratio.floor_mul(k));
            (k as usize, hits as f64 / ((lambda - 1.0) * k as f64))
        })
        .collect();
    let exact = exact_limits(set).and_then(|e| agreed(e.upper_tail, e.lower_tail));
    Ok(TruncatedLimit::new(partials, window)?.with_exact(exact))
}

/// Extremal window frequencies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BanachDensities {
    #[serde(serialize_with = "numfmt::ser_f64")]
    pub upper: f64,
    #[serde(serialize_with = "numfmt::ser_f64")]
    pub lower: f64,
}

/// Sup and inf of `#X ∩ [l,k] / (k−l+1)` over all windows `[l,k] ⊆ [1,K]`
/// of length at least `min_window`. Fractions are compared exactly.
pub fn banach_densities(set: &IntegerSet, k_max: u64, min_window: u64) -> Result<BanachDensities> {
    if min_window == 0 {
        return Err(Error::invalid("minimum window length must be at least 1"));
    }
    if min_window > k_max {
        return Err(Error::InsufficientData(format!(
            "no window of length {min_window} fits in [1, {k_max}]"
        )));
    }
    let pc = set.prefix_counts(k_max)?;
    let starts = (k_max - min_window + 1) as usize;
    // Each start yields its (max, min) fraction as (count, length) pairs.
    let per_start = par::map_range(1..starts + 1, |l| {
        let l = l as u64;
        let mut hi = (0u64, 1u64);
        let mut lo = (1u64, 1u64);
        for k in l + min_window - 1..=k_max {
            let frac = (pc.count(l, k), k - l + 1);
            if frac.0 * hi.1 > hi.0 * frac.1 {
                hi = frac;
            }
            if frac.0 * lo.1 < lo.0 * frac.1 {
                lo = frac;
            }
        }
        (hi, lo)
    });
    let mut hi = (0u64, 1u64);
    let mut lo = (1u64, 1u64);
    for (h, l) in per_start {
        if h.0 * hi.1 > hi.0 * h.1 {
            hi = h;
        }
        if l.0 * lo.1 < lo.0 * l.1 {
            lo = l;
        }
    }
    Ok(BanachDensities {
        upper: hi.0 as f64 / hi.1 as f64,
        lower: lo.0 as f64 / lo.1 as f64,
    })
}

/// Number of windows `[a,b]` violating `#X∩W + #(ℕ∖X)∩W = |W|`.
pub fn complement_identity(set: &IntegerSet, windows: &[(u64, u64)]) -> Result<usize> {
    let Some(upto) = windows.iter().map(|w| w.1).max() else {
        return Ok(0);
    };
    let own = set.prefix_counts(upto)?;
    let other = set.complement().prefix_counts(upto)?;
    let mut bad = 0;
    for &(a, b) in windows {
        if a == 0 || a > b {
            return Err(Error::invalid(format!("bad window [{a}, {b}]")));
        }
        if own.count(a, b) + other.count(a, b) != b - a + 1 {
            bad += 1;
        }
    }
    Ok(bad)
}

/// `count` uniformly random windows `[a, b] ⊆ [1, K]`.
pub fn random_windows(k_max: u64, count: usize, seed: u64) -> Vec<(u64, u64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let a = rng.random_range(1..=k_max);
            let b = rng.random_range(1..=k_max);
            (a.min(b), a.max(b))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailRow {
    #[serde(serialize_with = "numfmt::ser_f64")]
    pub lambda: f64,
    /// Truncated sup and inf of the per-`k` tail values.
    #[serde(serialize_with = "numfmt::ser_f64")]
    pub upper: f64,
    #[serde(serialize_with = "numfmt::ser_f64")]
    pub lower: f64,
    /// `(D̄(X), λD̄(X)/(λ−1) ∧ B̄(X))` from the exact limits.
    #[serde(serialize_with = "numfmt::ser_pair")]
    pub upper_bounds: (f64, f64),
    /// `((λD̲(X)−1)/(λ−1) ∨ B̲(X), D̲(X))` from the exact limits.
    #[serde(serialize_with = "numfmt::ser_pair")]
    pub lower_bounds: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailDensityReport {
    pub exact: ExactLimits,
    pub rows: Vec<TailRow>,
    #[serde(serialize_with = "numfmt::ser_f64")]
    pub total_variation_upper: f64,
    #[serde(serialize_with = "numfmt::ser_f64")]
    pub total_variation_lower: f64,
    pub windows_checked: usize,
    pub violations: Vec<String>,
}

impl TailDensityReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

const BOUND_SLACK: f64 = 1e-12;

/// Checks the tail-density inequalities against exact limits, the
/// continuity of the truncated λ-curves and the complement identity on
/// `windows` random windows.
///
/// Continuity uses the Lipschitz bound of each per-`k` value: for
/// `λ < λ'` it moves by at most `2(λ'−λ)/(λ−1) + 2/((λ−1)k)`, and the same
/// bound carries over to sup and inf over `k ≥ k₀`.
pub fn check_taildensity_props(
    set: &IntegerSet,
    lambdas: &[f64],
    k_max: u64,
    windows: usize,
    seed: u64,
) -> Result<TailDensityReport> {
    let exact = exact_limits(set).ok_or_else(|| {
        Error::Precondition("tail density checks need a set with closed-form limits".into())
    })?;
    if lambdas.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("lambda grid must be strictly increasing"));
    }
    let mut violations = Vec::new();
    let mut rows = Vec::with_capacity(lambdas.len());
    let mut starts = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let est = tail_densities(set, lambda, k_max, TailWindow::default())?;
        starts.push(est.window_start);
        let e = &exact;
        let upper_bounds = (
            e.upper_asymptotic,
            (lambda * e.upper_asymptotic / (lambda - 1.0)).min(e.upper_banach),
        );
        let lower_bounds = (
            ((lambda * e.lower_asymptotic - 1.0) / (lambda - 1.0)).max(e.lower_banach),
            e.lower_asymptotic,
        );
        if e.upper_tail < upper_bounds.0 - BOUND_SLACK || e.upper_tail > upper_bounds.1 + BOUND_SLACK {
            violations.push(format!(
                "upper tail density {} outside [{}, {}] at lambda {lambda}",
                e.upper_tail, upper_bounds.0, upper_bounds.1
            ));
        }
        if e.lower_tail < lower_bounds.0 - BOUND_SLACK || e.lower_tail > lower_bounds.1 + BOUND_SLACK {
            violations.push(format!(
                "lower tail density {} outside [{}, {}] at lambda {lambda}",
                e.lower_tail, lower_bounds.0, lower_bounds.1
            ));
        }
        rows.push(TailRow {
            lambda,
            upper: est.sup_tail,
            lower: est.inf_tail,
            upper_bounds,
            lower_bounds,
        });
    }
    let (mut tv_up, mut tv_lo) = (0.0, 0.0);
    for (i, w) in rows.windows(2).enumerate() {
        let (a, b) = (&w[0], &w[1]);
        let k0 = starts[i].min(starts[i + 1]) as f64;
        let bound = 2.0 * (b.lambda - a.lambda) / (a.lambda - 1.0) + 2.0 / ((a.lambda - 1.0) * k0);
        let (du, dl) = ((b.upper - a.upper).abs(), (b.lower - a.lower).abs());
        tv_up += du;
        tv_lo += dl;
        if du > bound || dl > bound {
            violations.push(format!(
                "tail curve jumps by {} between lambda {} and {} (bound {bound})",
                du.max(dl),
                a.lambda,
                b.lambda
            ));
        }
    }
    let ws = random_windows(k_max, windows, seed);
    let bad = complement_identity(set, &ws)?;
    if bad > 0 {
        violations.push(format!("complement identity fails on {bad} windows"));
    }
    Ok(TailDensityReport {
        exact,
        rows,
        total_variation_upper: tv_up,
        total_variation_lower: tv_lo,
        windows_checked: ws.len(),
        violations,
    })
}
