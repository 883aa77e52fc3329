//! Homogeneous Moran constructions.
//!
//! Level `i` cylinders are scaled by `c(i)` relative to their parents and
//! every level-`(i−1)` vertex of a uniformly homogeneous construction has
//! `N(i)` children. With `l(θ,k)` the deepest level whose cumulative
//! contraction still exceeds `(∏_{i≤k} c(i))^{1/θ}`, the per-`k` partial is
//!
//! ```text
//! log N(v, l(θ,k) − k) / ((1 − 1/θ) log ∏_{i≤k} c(i))
//! ```
//!
//! maximised (Assouad) or minimised (lower) over level-`k` vertices `v`.
//! The Assouad spectrum is its limsup and the lower spectrum its liminf.

use serde::{Deserialize, Serialize};

use crate::error::{check_theta, Error, Result};
use crate::numfmt;
use crate::par;
use crate::spectrum::{DimensionSummary, SpectrumCurve, SpectrumKind, TailWindow, ThetaGrid, TruncatedLimit};
use crate::tail_density::{self, BanachDensities, BlockSchedule, IntegerSet, Recipe};

/// Relative tolerance when comparing accumulated log products.
pub const LOG_TOL: f64 = 1e-13;

/// Contraction ratios `c(1), c(2), …`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContractionSeq {
    Constant(f64),
    Sequence(Vec<f64>),
}

impl ContractionSeq {
    fn validate(&self) -> Result<()> {
        let bad = |c: f64| !(c > 0.0 && c < 1.0);
        match self {
            ContractionSeq::Constant(c) if bad(*c) => {
                Err(Error::invalid(format!("contraction {c} outside (0,1)")))
            }
            ContractionSeq::Sequence(v) if v.is_empty() => Err(Error::invalid("empty contraction sequence")),
            ContractionSeq::Sequence(v) => match v.iter().find(|c| bad(**c)) {
                Some(c) => Err(Error::invalid(format!("contraction {c} outside (0,1)"))),
                None => Ok(()),
            },
            _ => Ok(()),
        }
    }

    pub fn horizon(&self) -> Option<usize> {
        match self {
            ContractionSeq::Constant(_) => None,
            ContractionSeq::Sequence(v) => Some(v.len()),
        }
    }

    /// `c(i)` for `i ≥ 1`.
    pub fn get(&self, i: usize) -> Result<f64> {
        match self {
            ContractionSeq::Constant(c) => Ok(*c),
            ContractionSeq::Sequence(v) => v.get(i.wrapping_sub(1)).copied().ok_or_else(|| {
                Error::InsufficientData(format!("contraction c({i}) beyond the {} given", v.len()))
            }),
        }
    }

    fn min(&self) -> f64 {
        match self {
            ContractionSeq::Constant(c) => *c,
            ContractionSeq::Sequence(v) => v.iter().copied().fold(1.0, f64::min),
        }
    }
}

/// A finite tree given level by level: `levels[k][v]` is the number of
/// children of the `v`-th level-`k` vertex, and the children of consecutive
/// vertices are listed consecutively on the next level.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ExplicitTree {
    levels: Vec<Vec<u32>>,
}

impl ExplicitTree {
    pub fn new(levels: Vec<Vec<u32>>) -> Result<Self> {
        let tree = ExplicitTree { levels };
        tree.validate()?;
        Ok(tree)
    }

    /// The full tree with `children[k]` children per level-`k` vertex.
    pub fn uniform(children: &[u32]) -> Result<Self> {
        let mut levels = Vec::with_capacity(children.len());
        let mut width = 1usize;
        for &c in children {
            levels.push(vec![c; width]);
            let next = width as u128 * c as u128;
            if next > 1 << 26 {
                return Err(Error::resource("tree vertices", next, 1 << 26));
            }
            width = next as usize;
        }
        Self::new(levels)
    }

    fn validate(&self) -> Result<()> {
        if self.levels.is_empty() {
            return Err(Error::invalid("tree needs at least one level"));
        }
        let mut width = 1usize;
        for (k, level) in self.levels.iter().enumerate() {
            if level.len() != width {
                return Err(Error::Structural(format!(
                    "level {k} lists {} vertices, expected {width}",
                    level.len()
                )));
            }
            if level.contains(&0) {
                return Err(Error::invalid(format!("a level-{k} vertex has no children")));
            }
            width = level.iter().map(|&c| c as usize).sum();
        }
        Ok(())
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    /// `N(v, l − k)` for every level-`k` vertex `v`, in order.
    pub fn descendants(&self, k: usize, l: usize) -> Result<Vec<u64>> {
        if l > self.depth() || k > l {
            return Err(Error::InsufficientData(format!(
                "tree of depth {} has no levels {k}..{l}",
                self.depth()
            )));
        }
        let width = if l == 0 {
            1
        } else {
            self.levels[l - 1].iter().map(|&c| c as usize).sum()
        };
        let mut counts = vec![1u64; width];
        for j in (k..l).rev() {
            let mut offset = 0;
            counts = self.levels[j]
                .iter()
                .map(|&c| {
                    let s = counts[offset..offset + c as usize].iter().sum();
                    offset += c as usize;
                    s
                })
                .collect();
        }
        Ok(counts)
    }
}

/// Child counts of the construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branching {
    Constant(u32),
    /// `N(1), N(2), …`.
    Sequence(Vec<u32>),
    /// `N(i) = 2` at the listed positions and 1 elsewhere, known through the
    /// largest listed position.
    DyadicSet(Vec<u64>),
    Recipe(Recipe),
    /// `N(i) = 2` exactly on the given set.
    Dyadic(IntegerSet),
    Tree(ExplicitTree),
}

impl Branching {
    fn validate(&self) -> Result<()> {
        match self {
            Branching::Constant(0) => Err(Error::invalid("every vertex needs a child")),
            Branching::Sequence(v) if v.contains(&0) => Err(Error::invalid("every vertex needs a child")),
            Branching::DyadicSet(_) | Branching::Recipe(_) | Branching::Dyadic(_) => {
                self.twos().expect("dyadic branching").validate()
            }
            Branching::Tree(t) => t.validate(),
            _ => Ok(()),
        }
    }

    /// The positions with `N(i) = 2` for {1,2}-valued branchings.
    pub fn twos(&self) -> Option<IntegerSet> {
        match self {
            Branching::DyadicSet(v) => Some(IntegerSet::Explicit(
                tail_density::ExplicitMembers::Plain(v.clone()),
            )),
            Branching::Recipe(r) => Some(IntegerSet::Blocks(BlockSchedule::Recipe(*r))),
            Branching::Dyadic(s) => Some(s.clone()),
            _ => None,
        }
    }

    /// Deepest level whose child counts are known.
    pub fn horizon(&self) -> Option<usize> {
        match self {
            Branching::Constant(_) => None,
            Branching::Sequence(v) => Some(v.len()),
            Branching::Tree(t) => Some(t.depth()),
            other => other.twos().and_then(|s| s.horizon()).map(|h| h as usize),
        }
    }

    /// `N(0..=upto)` for uniform branchings (entry 0 unused).
    pub fn values(&self, upto: usize) -> Result<Vec<u32>> {
        if let Some(h) = self.horizon() {
            if upto > h {
                return Err(Error::InsufficientData(format!("need N up to level {upto}, known to {h}")));
            }
        }
        match self {
            Branching::Constant(n) => Ok(vec![*n; upto + 1]),
            Branching::Sequence(v) => Ok(std::iter::once(1).chain(v[..upto].iter().copied()).collect()),
            Branching::Tree(_) => Err(Error::invalid("an explicit tree has no level-uniform counts")),
            other => {
                let set = other.twos().expect("dyadic branching");
                Ok(set.indicator(upto as u64)?.into_iter().map(|b| 1 + b as u32).collect())
            }
        }
    }
}

fn one() -> u32 {
    1
}

/// A homogeneous Moran construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoranSpec {
    pub c: ContractionSeq,
    #[serde(rename = "N")]
    pub branching: Branching,
    /// Declared uniform lower bound on `c`; defaults to the smallest given ratio.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_floor: Option<f64>,
    #[serde(default = "one")]
    pub ambient_dim: u32,
}

impl MoranSpec {
    pub fn new(c: ContractionSeq, branching: Branching) -> Result<Self> {
        let spec = MoranSpec {
            c,
            branching,
            c_floor: None,
            ambient_dim: 1,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// The dyadic construction `c ≡ 1/2` with `N(i) = 2` on `twos`.
    pub fn dyadic(seq: &DyadicSequence) -> Self {
        MoranSpec {
            c: ContractionSeq::Constant(0.5),
            branching: Branching::Dyadic(seq.twos.clone()),
            c_floor: None,
            ambient_dim: 1,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: MoranSpec =
            serde_json::from_str(text).map_err(|e| Error::invalid(format!("Moran spec JSON: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        self.c.validate()?;
        self.branching.validate()?;
        if self.ambient_dim == 0 {
            return Err(Error::invalid("ambient dimension must be positive"));
        }
        if let Some(floor) = self.c_floor {
            if !(floor > 0.0) {
                return Err(Error::invalid("contraction floor must be positive"));
            }
            if self.c.min() < floor {
                return Err(Error::invalid(format!(
                    "contraction {} below the declared floor {floor}",
                    self.c.min()
                )));
            }
        }
        Ok(())
    }

    pub fn c_floor(&self) -> f64 {
        self.c_floor.unwrap_or_else(|| self.c.min())
    }

    pub fn is_uniform(&self) -> bool {
        !matches!(self.branching, Branching::Tree(_))
    }

    /// Tail window suited to the branching: one scale period for recipe
    /// blocks, the final 20% otherwise.
    pub fn default_window(&self) -> TailWindow {
        match &self.branching {
            Branching::Recipe(r) => TailWindow::Geometric(r.f_base as f64),
            _ => TailWindow::default(),
        }
    }

    /// Levels `i ≤ upto` where `N(i)` children of scale `c(i)` cannot be
    /// packed into an interval or cube template: `N(i) > ⌊1/c(i)⌋^d`.
    pub fn feasibility_warnings(&self, upto: usize) -> Result<Vec<String>> {
        let maxima: Vec<u32> = match &self.branching {
            Branching::Tree(t) => t
                .levels
                .iter()
                .take(upto)
                .map(|l| l.iter().copied().max().unwrap_or(1))
                .collect(),
            b => b.values(upto)?[1..].to_vec(),
        };
        let mut out = Vec::new();
        for (idx, &n) in maxima.iter().enumerate() {
            let i = idx + 1;
            let c = self.c.get(i)?;
            let side = (1.0 / c * (1.0 + LOG_TOL)).floor();
            let room = side.powi(self.ambient_dim as i32);
            if n as f64 > room {
                out.push(format!("level {i}: {n} children of ratio {c} exceed the {room} template slots"));
            }
        }
        Ok(out)
    }
}

/// Prefix sums `S(i) = −Σ_{j≤i} log c(j)`, known to `len() − 1`.
struct LogScales {
    s: Vec<f64>,
}

impl LogScales {
    /// Builds prefix sums far enough to decide `l(θ, k)` for all `k ≤ k_max`.
    fn for_schedule(c: &ContractionSeq, theta: f64, k_max: usize) -> Result<Self> {
        let mut s = vec![0.0];
        let (mut sum, mut comp) = (0.0f64, 0.0f64);
        let mut push = |s: &mut Vec<f64>, i: usize| -> Result<()> {
            let a = -c.get(i)?.ln();
            if let ContractionSeq::Constant(_) = c {
                s.push(i as f64 * a);
                return Ok(());
            }
            // Neumaier summation.
            let t = sum + a;
            comp += if sum.abs() >= a.abs() { (sum - t) + a } else { (a - t) + sum };
            sum = t;
            s.push(sum + comp);
            Ok(())
        };
        for i in 1..=k_max {
            push(&mut s, i)?;
        }
        let target = s[k_max] / theta * (1.0 + LOG_TOL);
        while *s.last().expect("nonempty") <= target {
            let i = s.len();
            push(&mut s, i).map_err(|_| {
                Error::InsufficientData(format!("contractions end at level {} before l(θ, {k_max})", i - 1))
            })?;
        }
        Ok(LogScales { s })
    }

    /// `l(θ, k)` for `k = 1..=k_max`, by a monotone sweep.
    fn schedule(&self, theta: f64, k_max: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(k_max);
        let mut l = 1;
        for k in 1..=k_max {
            let target = self.s[k] / theta * (1.0 + LOG_TOL);
            l = l.max(k);
            while self.s[l + 1] <= target {
                l += 1;
            }
            out.push(l);
        }
        out
    }
}

/// `l(θ, k) = max{l : ∏_{i≤l} c(i) ≥ (∏_{i≤k} c(i))^{1/θ}}`.
pub fn l_theta_k(spec: &MoranSpec, theta: f64, k: usize) -> Result<usize> {
    Ok(*l_schedule(spec, theta, k)?.last().expect("k ≥ 1"))
}

/// `l(θ, k)` for every `k = 1..=k_max`.
pub fn l_schedule(spec: &MoranSpec, theta: f64, k_max: usize) -> Result<Vec<usize>> {
    check_theta(theta)?;
    if k_max == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    let scales = LogScales::for_schedule(&spec.c, theta, k_max)?;
    Ok(scales.schedule(theta, k_max))
}

fn check_depth(spec: &MoranSpec, needed: usize) -> Result<()> {
    match spec.branching.horizon() {
        Some(h) if needed > h => Err(Error::InsufficientData(format!(
            "truncation needs child counts to level {needed}, known to {h}"
        ))),
        _ => Ok(()),
    }
}

fn uniform_partials(spec: &MoranSpec, theta: f64, k_max: usize) -> Result<Vec<(usize, f64)>> {
    check_theta(theta)?;
    if k_max == 0 {
        return Err(Error::invalid("K must be at least 1"));
    }
    let scales = LogScales::for_schedule(&spec.c, theta, k_max)?;
    let ls = scales.schedule(theta, k_max);
    let deepest = *ls.last().expect("K ≥ 1");
    check_depth(spec, deepest)?;
    let n = spec.branching.values(deepest)?;
    let mut p = Vec::with_capacity(n.len());
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    p.push(0.0);
    for &ni in &n[1..] {
        let a = (ni as f64).ln();
        let t = sum + a;
        comp += if sum.abs() >= a.abs() { (sum - t) + a } else { (a - t) + sum };
        sum = t;
        p.push(sum + comp);
    }
    let factor = 1.0 / theta - 1.0;
    Ok(par::map_range(0..k_max, |idx| {
        let k = idx + 1;
        (k, (p[ls[idx]] - p[k]) / (factor * scales.s[k]))
    }))
}

fn tree_partials(
    spec: &MoranSpec,
    tree: &ExplicitTree,
    theta: f64,
    k_max: usize,
    pick: fn(&[u64]) -> u64,
) -> Result<Vec<(usize, f64)>> {
    let ls = l_schedule(spec, theta, k_max)?;
    check_depth(spec, *ls.last().expect("K ≥ 1"))?;
    let scales = LogScales::for_schedule(&spec.c, theta, k_max)?;
    let factor = 1.0 / theta - 1.0;
    let per_k = par::try_map(&ls.iter().enumerate().collect::<Vec<_>>(), |&(idx, &l)| {
        let k = idx + 1;
        let counts = tree.descendants(k, l)?;
        Ok::<_, Error>((k, (pick(&counts) as f64).ln() / (factor * scales.s[k])))
    })?;
    Ok(per_k)
}

fn max_of(v: &[u64]) -> u64 {
    v.iter().copied().max().unwrap_or(1)
}

fn min_of(v: &[u64]) -> u64 {
    v.iter().copied().min().unwrap_or(1)
}

/// Per-`k` Assouad partials for `k = 1..=K`; the point estimate is
/// `sup_tail`.
pub fn assouad_spectrum_trunc(spec: &MoranSpec, theta: f64, k_max: usize, window: TailWindow) -> Result<TruncatedLimit> {
    let partials = match &spec.branching {
        Branching::Tree(t) => tree_partials(spec, t, theta, k_max, max_of)?,
        _ => uniform_partials(spec, theta, k_max)?,
    };
    TruncatedLimit::new(partials, window)
}

/// Per-`k` lower partials for `k = 1..=K`; the point estimate is `inf_tail`.
pub fn lower_spectrum_trunc(spec: &MoranSpec, theta: f64, k_max: usize, window: TailWindow) -> Result<TruncatedLimit> {
    let partials = match &spec.branching {
        Branching::Tree(t) => tree_partials(spec, t, theta, k_max, min_of)?,
        _ => uniform_partials(spec, theta, k_max)?,
    };
    TruncatedLimit::new(partials, window)
}

/// Partials `log ∏_{i=k+1}^{l(θ,k)} N(i) / ((1 − 1/θ) log ∏_{i≤k} c(i))` of a
/// uniformly homogeneous construction.
pub fn uniform_spectrum_trunc(
    c: &ContractionSeq,
    n: &Branching,
    theta: f64,
    k_max: usize,
    window: TailWindow,
) -> Result<TruncatedLimit> {
    if let Branching::Tree(_) = n {
        return Err(Error::invalid("uniform spectrum needs level-uniform child counts"));
    }
    let spec = MoranSpec::new(c.clone(), n.clone())?;
    TruncatedLimit::new(uniform_partials(&spec, theta, k_max)?, window)
}

/// A sequence `N(i) ∈ {1, 2}`, stored as the set of positions holding 2.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DyadicSequence {
    twos: IntegerSet,
}

impl DyadicSequence {
    pub fn new(twos: IntegerSet) -> Result<Self> {
        twos.validate()?;
        Ok(DyadicSequence { twos })
    }

    /// An explicit prefix `N(1), …, N(len)`.
    pub fn from_values(values: &[u8]) -> Result<Self> {
        if let Some(v) = values.iter().find(|v| !matches!(v, 1 | 2)) {
            return Err(Error::invalid(format!("dyadic value {v} not in {{1,2}}")));
        }
        let members = (1..=values.len() as u64).filter(|&i| values[i as usize - 1] == 2).collect();
        Self::new(IntegerSet::explicit(members, values.len() as u64)?)
    }

    /// `N(i) = 2` exactly for `i ≡ r (mod q)`, `r` in `residues`.
    pub fn periodic(q: u64, residues: Vec<u64>) -> Result<Self> {
        Self::new(IntegerSet::periodic(q, residues)?)
    }

    /// Alternating `1, 2, 1, 2, …` with runs of `j` ones then `j` twos
    /// written over positions from `f_base^j`.
    pub fn sharpness(f_base: u64) -> Result<Self> {
        Self::new(IntegerSet::blocks(BlockSchedule::Sharpness { f_base })?)
    }

    /// All ones apart from runs of `j` twos from `f_base^j`.
    pub fn runs(f_base: u64) -> Result<Self> {
        Self::new(IntegerSet::blocks(BlockSchedule::Runs { f_base })?)
    }

    pub fn twos(&self) -> &IntegerSet {
        &self.twos
    }

    pub fn value(&self, i: u64) -> Result<u8> {
        Ok(1 + self.twos.contains(i)? as u8)
    }

    /// `N(1..=upto)`.
    pub fn values(&self, upto: u64) -> Result<Vec<u8>> {
        Ok(self.twos.indicator(upto)?[1..].iter().map(|&b| 1 + b as u8).collect())
    }
}

/// Swaps 1 and 2 everywhere.
pub fn invert(seq: &DyadicSequence) -> DyadicSequence {
    DyadicSequence {
        twos: seq.twos.complement(),
    }
}

/// The block recipe as a dyadic sequence.
pub fn recipe_sequence(t: f64, lambda: f64, f_base: u64) -> Result<DyadicSequence> {
    DyadicSequence::new(IntegerSet::blocks(BlockSchedule::Recipe(Recipe::new(t, lambda, f_base)?))?)
}

/// Integer data behind one dyadic partial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowCount {
    pub k: usize,
    /// `l(θ, k) = ⌊k/θ⌋`.
    pub l: usize,
    /// `T(k, θ) = #{i = k+1..=l : N(i) = 2}`.
    pub twos: u64,
}

/// `T(k, θ)` for `k = 1..=K`.
pub fn window_counts(seq: &DyadicSequence, theta: f64, k_max: usize) -> Result<Vec<WindowCount>> {
    let spec = MoranSpec::dyadic(seq);
    let ls = l_schedule(&spec, theta, k_max)?;
    let pc = seq.twos.prefix_counts(*ls.last().expect("K ≥ 1") as u64)?;
    Ok(ls
        .iter()
        .enumerate()
        .map(|(idx, &l)| WindowCount {
            k: idx + 1,
            l,
            twos: pc.count(idx as u64 + 2, l as u64),
        })
        .collect())
}

/// Truncated densities of the positions holding 2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DyadicDensities {
    #[serde(serialize_with = "numfmt::ser_f64")]
    pub upper_box: f64,
    #[serde(serialize_with = "numfmt::ser_f64")]
    pub lower_box: f64,
    #[serde(serialize_with = "numfmt::ser_f64")]
    pub assouad: f64,
    #[serde(serialize_with = "numfmt::ser_f64")]
    pub lower: f64,
}

/// Box dimensions as asymptotic densities (sup and inf over the tail window)
/// and Assouad and lower dimensions as Banach densities.
pub fn dyadic_densities(
    seq: &DyadicSequence,
    k_max: u64,
    min_window: u64,
    window: TailWindow,
) -> Result<DyadicDensities> {
    let asym = tail_density::asymptotic_densities(&seq.twos, k_max, window)?;
    let BanachDensities { upper, lower } = tail_density::banach_densities(&seq.twos, k_max, min_window)?;
    Ok(DyadicDensities {
        upper_box: asym.sup_tail,
        lower_box: asym.inf_tail,
        assouad: upper,
        lower,
    })
}

/// Closed forms for the block recipe with rapidly growing blocks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecipeForm {
    /// `(t/λ)(λ − 1)`.
    #[serde(serialize_with = "numfmt::ser_f64")]
    pub upper_box: f64,
    #[serde(serialize_with = "numfmt::ser_f64")]
    pub assouad: f64,
    /// `1/λ`, where `upper_box/(1−θ)` reaches `t`.
    #[serde(serialize_with = "numfmt::ser_f64")]
    pub transition: f64,
}

pub fn recipe_form(recipe: &Recipe) -> RecipeForm {
    let (t, lambda) = (recipe.t, recipe.lambda);
    RecipeForm {
        upper_box: t / lambda * (lambda - 1.0),
        assouad: t,
        transition: 1.0 / lambda,
    }
}

/// `min((t/λ)(λ−1)/(1−θ), t)`.
pub fn recipe_assouad(recipe: &Recipe, theta: f64) -> Result<f64> {
    check_theta(theta)?;
    let f = recipe_form(recipe);
    Ok((f.upper_box / (1.0 - theta)).min(f.assouad))
}

/// A basic construction entering the figure unions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasicConstruction {
    Recipe(Recipe),
    /// Sparse runs of 2s: upper box dimension 0 and Assouad dimension 1.
    Runs,
}

impl BasicConstruction {
    pub fn recipe(t: f64, lambda: f64) -> Result<Self> {
        Ok(BasicConstruction::Recipe(Recipe::new(t, lambda, 10)?))
    }

    pub fn summary(&self) -> DimensionSummary {
        let (ub, a) = match self {
            BasicConstruction::Recipe(r) => {
                let f = recipe_form(r);
                (f.upper_box, f.assouad)
            }
            BasicConstruction::Runs => (0.0, 1.0),
        };
        DimensionSummary::new(0.0, 0.0, ub, a, 1).expect("recipe dimensions are ordered")
    }

    pub fn assouad_curve(&self, grid: &ThetaGrid) -> Result<SpectrumCurve> {
        match self {
            BasicConstruction::Recipe(r) => {
                let curve = SpectrumCurve::from_fn(grid.clone(), SpectrumKind::Assouad, 1, |th| {
                    recipe_assouad(r, th)
                })?
                .with_closed_form("min((t/lambda)(lambda-1)/(1-theta), t)");
                let transitions = if r.t > 0.0 {
                    vec![recipe_form(r).transition]
                } else {
                    Vec::new()
                };
                Ok(curve.with_transitions(transitions))
            }
            BasicConstruction::Runs => Ok(SpectrumCurve::from_fn(grid.clone(), SpectrumKind::Assouad, 1, |_| {
                Ok(0.0)
            })?
            .with_closed_form("0")),
        }
    }
}

/// Dimensions of the construction with 1s and 2s swapped.
pub fn inverted_summary(s: &DimensionSummary) -> Result<DimensionSummary> {
    DimensionSummary::new(1.0 - s.assouad, 1.0 - s.upper_box, 1.0 - s.lower_box, 1.0 - s.lower, 1)
}

/// `θ ↦ 1 − value`, switching between Assouad and lower kind.
pub fn mirror_curve(curve: &SpectrumCurve) -> Result<SpectrumCurve> {
    if curve.ambient_dim != 1 {
        return Err(Error::invalid("mirroring needs a construction on the line"));
    }
    let kind = match curve.kind {
        SpectrumKind::Assouad => SpectrumKind::Lower,
        SpectrumKind::Lower => SpectrumKind::Assouad,
    };
    let values = curve.values.iter().map(|v| 1.0 - v).collect();
    let mut out = SpectrumCurve::new(curve.grid.clone(), values, kind, 1)?.with_transitions(curve.transitions.clone());
    out.closed_form = curve.closed_form.as_ref().map(|f| format!("1 - ({f})"));
    Ok(out)
}

/// Dimensions of a disjoint union of constructions sharing a block schedule.
pub fn union_summary(parts: &[DimensionSummary]) -> Result<DimensionSummary> {
    let first = parts.first().ok_or_else(|| Error::invalid("empty union"))?;
    let fold = |f: fn(&DimensionSummary) -> f64, pick: fn(f64, f64) -> f64| {
        parts.iter().map(f).reduce(pick).expect("nonempty")
    };
    DimensionSummary::new(
        fold(|s| s.lower, f64::min),
        fold(|s| s.lower_box, f64::max),
        fold(|s| s.upper_box, f64::max),
        fold(|s| s.assouad, f64::max),
        first.ambient_dim,
    )
}

const TIE: f64 = 1e-12;

/// Pointwise maximum (Assouad kind) or minimum (lower kind).
///
/// Transitions of an input survive when that input attains the extremum on
/// both sides of it; points where the extremal input changes are added as
/// well, located by linear interpolation.
pub fn union_curves(curves: &[SpectrumCurve]) -> Result<SpectrumCurve> {
    let first = curves.first().ok_or_else(|| Error::invalid("empty union"))?;
    for c in curves {
        if c.grid != first.grid || c.kind != first.kind || c.ambient_dim != first.ambient_dim {
            return Err(Error::Structural("union needs curves on one grid, kind and ambient dimension".into()));
        }
    }
    let sign = match first.kind {
        SpectrumKind::Assouad => 1.0,
        SpectrumKind::Lower => -1.0,
    };
    let pts = first.grid.points();
    let mut values = Vec::with_capacity(pts.len());
    let mut leaders = Vec::with_capacity(pts.len());
    let mut leader = 0usize;
    for i in 0..pts.len() {
        // Keep the current leader unless another curve beats it strictly.
        for (j, c) in curves.iter().enumerate() {
            if sign * (c.values[i] - curves[leader].values[i]) > TIE {
                leader = j;
            }
        }
        values.push(curves[leader].values[i]);
        leaders.push(leader);
    }
    let attains = |j: usize, i: usize| (curves[j].values[i] - values[i]).abs() <= TIE;
    let mut transitions = Vec::new();
    for (j, c) in curves.iter().enumerate() {
        for &t in &c.transitions {
            let hi = pts.partition_point(|&p| p < t).min(pts.len() - 1);
            let lo = hi.saturating_sub(1);
            if attains(j, lo) && attains(j, hi) {
                transitions.push(t);
            }
        }
    }
    let step = first.grid.max_step();
    for i in 1..pts.len() {
        let (a, b) = (leaders[i - 1], leaders[i]);
        if a == b {
            continue;
        }
        let gap = |idx: usize| curves[b].values[idx] - curves[a].values[idx];
        let (g0, g1) = (gap(i - 1), gap(i));
        let x = if g1 != g0 {
            pts[i - 1] + (pts[i] - pts[i - 1]) * (-g0 / (g1 - g0)).clamp(0.0, 1.0)
        } else {
            pts[i]
        };
        if transitions.iter().all(|&t: &f64| (t - x).abs() > step) {
            transitions.push(x);
        }
    }
    transitions.sort_by(f64::total_cmp);
    transitions.dedup_by(|a, b| (*a - *b).abs() <= TIE);
    let mut out = SpectrumCurve::new(first.grid.clone(), values, first.kind, first.ambient_dim)?
        .with_transitions(transitions);
    out.closed_form = match first.kind {
        SpectrumKind::Assouad => Some("pointwise max".into()),
        SpectrumKind::Lower => Some("pointwise min".into()),
    };
    Ok(out)
}
