//! Bedford–McMullen carpets: closed-form dimensions and spectra, the
//! symbolic approximate-square count and a brute-force covering oracle.
//!
//! A carpet is given by an `m × n` grid (`m < n`) and a set `D` of chosen
//! rectangles `(i, j)`; each chosen rectangle carries the map
//! `(x, y) ↦ (x/m + i/m, y/n + j/n)`.

use std::collections::BTreeSet;

use num_bigint::BigUint;
use num_traits::One;
use serde::{Deserialize, Serialize};

use crate::error::{check_theta, Error, Result};
use crate::par;
use crate::spectrum::{CoveringOracle, DimensionSummary, SpectrumCurve, SpectrumKind, ThetaGrid};

/// Default maximum cylinder level the covering oracle will enumerate.
pub const DEFAULT_LEVEL_CAP: u32 = 40;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct RawCarpet {
    m: u32,
    n: u32,
    rects: Vec<(u32, u32)>,
}

/// A validated carpet description.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawCarpet", into = "RawCarpet")]
pub struct CarpetSpec {
    m: u32,
    n: u32,
    rects: Vec<(u32, u32)>,
}

impl CarpetSpec {
    pub fn new(m: u32, n: u32, rects: Vec<(u32, u32)>) -> Result<Self> {
        if m < 2 || n <= m {
            return Err(Error::invalid(format!("need 2 ≤ m < n, got m = {m}, n = {n}")));
        }
        if let Some(&(i, j)) = rects.iter().find(|(i, j)| *i >= m || *j >= n) {
            return Err(Error::invalid(format!("rectangle ({i}, {j}) outside the {m}×{n} grid")));
        }
        let distinct: BTreeSet<_> = rects.iter().copied().collect();
        if distinct.len() != rects.len() {
            return Err(Error::invalid("rectangles must be distinct"));
        }
        if rects.len() < 2 {
            return Err(Error::invalid("need at least 2 rectangles"));
        }
        Ok(CarpetSpec { m, n, rects })
    }

    /// Builds a carpet from the chosen rows of each column (`columns[i]`
    /// lists the `j` values in column `i`).
    pub fn from_columns(m: u32, n: u32, columns: &[&[u32]]) -> Result<Self> {
        let rects = columns
            .iter()
            .enumerate()
            .flat_map(|(i, js)| js.iter().map(move |&j| (i as u32, j)))
            .collect();
        Self::new(m, n, rects)
    }

    /// The full `m × n` grid.
    pub fn full(m: u32, n: u32) -> Result<Self> {
        Self::new(m, n, (0..m).flat_map(|i| (0..n).map(move |j| (i, j))).collect())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::invalid(format!("carpet JSON: {e}")))
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn rects(&self) -> &[(u32, u32)] {
        &self.rects
    }

    pub fn contains(&self, letter: (u32, u32)) -> bool {
        self.rects.contains(&letter)
    }

    /// `log m / log n`, the position of the phase transition.
    pub fn ratio(&self) -> f64 {
        (self.m as f64).ln() / (self.n as f64).ln()
    }
}

impl TryFrom<RawCarpet> for CarpetSpec {
    type Error = Error;

    fn try_from(raw: RawCarpet) -> Result<Self> {
        CarpetSpec::new(raw.m, raw.n, raw.rects)
    }
}

impl From<CarpetSpec> for RawCarpet {
    fn from(spec: CarpetSpec) -> Self {
        RawCarpet {
            m: spec.m,
            n: spec.n,
            rects: spec.rects,
        }
    }
}

/// Column occupancy of a carpet.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnStats {
    /// `counts[i]` is the number of chosen rectangles in column `i`.
    pub counts: Vec<u32>,
    pub c_max: u32,
    /// Minimum over nonempty columns.
    pub c_min: u32,
    /// Number of nonempty columns, `|πD|`.
    pub p_card: u32,
    pub d_card: u32,
}

impl ColumnStats {
    pub fn uniform_fibres(&self) -> bool {
        self.c_max == self.c_min
    }
}

pub fn column_stats(spec: &CarpetSpec) -> ColumnStats {
    let mut counts = vec![0u32; spec.m as usize];
    for &(i, _) in &spec.rects {
        counts[i as usize] += 1;
    }
    let nonempty = counts.iter().copied().filter(|&c| c > 0);
    ColumnStats {
        c_max: nonempty.clone().max().expect("D is nonempty"),
        c_min: nonempty.clone().min().expect("D is nonempty"),
        p_card: nonempty.count() as u32,
        d_card: spec.rects.len() as u32,
        counts,
    }
}

pub fn carpet_dimensions(spec: &CarpetSpec) -> DimensionSummary {
    let stats = column_stats(spec);
    let lm = (spec.m as f64).ln();
    let ln = (spec.n as f64).ln();
    let base = (stats.p_card as f64).ln() / lm;
    let assouad = base + (stats.c_max as f64).ln() / ln;
    let boxd = base + (stats.d_card as f64 / stats.p_card as f64).ln() / ln;
    let lower = base + (stats.c_min as f64).ln() / ln;
    let ratio = lm / ln;
    let hausdorff = stats
        .counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| (c as f64).powf(ratio))
        .sum::<f64>()
        .ln()
        / lm;
    DimensionSummary::new(lower, boxd, boxd, assouad, 2)
        .expect("carpet dimensions form a valid chain")
        .with_hausdorff(hausdorff)
        .with_modified_lower(hausdorff)
}

/// Assouad spectrum; constant `dim_A` from `θ = log m / log n` on.
pub fn assouad_spectrum(spec: &CarpetSpec, theta: f64) -> Result<f64> {
    check_theta(theta)?;
    let dims = carpet_dimensions(spec);
    let ratio = spec.ratio();
    if theta >= ratio {
        return Ok(dims.assouad);
    }
    let stats = column_stats(spec);
    let slope = (stats.d_card as f64 / stats.c_max as f64).ln() / (spec.m as f64).ln()
        + (stats.c_max as f64).ln() / (spec.n as f64).ln();
    Ok((dims.upper_box - theta * slope) / (1.0 - theta))
}

/// Lower spectrum; constant `dim_L` from `θ = log m / log n` on.
pub fn lower_spectrum(spec: &CarpetSpec, theta: f64) -> Result<f64> {
    check_theta(theta)?;
    let dims = carpet_dimensions(spec);
    let ratio = spec.ratio();
    if theta >= ratio {
        return Ok(dims.lower);
    }
    let stats = column_stats(spec);
    let slope = (stats.d_card as f64 / stats.c_min as f64).ln() / (spec.m as f64).ln()
        + (stats.c_min as f64).ln() / (spec.n as f64).ln();
    Ok((dims.upper_box - theta * slope) / (1.0 - theta))
}

/// Both spectra expressed through the dimensions and `log m / log n` alone.
pub fn spectrum_from_dims(ratio: f64, dims: &DimensionSummary, theta: f64) -> Result<(f64, f64)> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::domain(format!("ratio must lie in (0,1), got {ratio}")));
    }
    check_theta(theta)?;
    let (a, b, l) = (dims.assouad, dims.upper_box, dims.lower);
    if theta >= ratio {
        return Ok((a, l));
    }
    let upper = (b - theta * (a - (a - b) / ratio)) / (1.0 - theta);
    let lower = (b - theta * (l + (b - l) / ratio)) / (1.0 - theta);
    Ok((upper.min(a), lower.max(l)))
}

fn closed_form_label(kind: SpectrumKind) -> &'static str {
    match kind {
        SpectrumKind::Assouad => {
            "(dim_B - θ·(log(|D|/C_max)/log m + log C_max/log n))/(1-θ) for θ < log m/log n, dim_A after"
        }
        SpectrumKind::Lower => {
            "(dim_B - θ·(log(|D|/C_min)/log m + log C_min/log n))/(1-θ) for θ < log m/log n, dim_L after"
        }
    }
}

fn curve(spec: &CarpetSpec, grid: &ThetaGrid, kind: SpectrumKind) -> Result<SpectrumCurve> {
    let stats = column_stats(spec);
    let f = match kind {
        SpectrumKind::Assouad => assouad_spectrum,
        SpectrumKind::Lower => lower_spectrum,
    };
    let curve = SpectrumCurve::from_fn(grid.clone(), kind, 2, |t| f(spec, t))?
        .with_closed_form(closed_form_label(kind));
    Ok(if stats.uniform_fibres() {
        curve
    } else {
        curve.with_transitions(vec![spec.ratio()])
    })
}

pub fn assouad_curve(spec: &CarpetSpec, grid: &ThetaGrid) -> Result<SpectrumCurve> {
    curve(spec, grid, SpectrumKind::Assouad)
}

pub fn lower_curve(spec: &CarpetSpec, grid: &ThetaGrid) -> Result<SpectrumCurve> {
    curve(spec, grid, SpectrumKind::Lower)
}

/// The unique `(l1, l2)` with `m^{-l1} ≤ r < m^{-l1+1}` and
/// `n^{-l2} ≤ r < n^{-l2+1}`.
pub fn scale_indices(r: f64, m: u32, n: u32) -> Result<(u32, u32)> {
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::domain(format!("scale must lie in (0,1), got {r}")));
    }
    Ok((level_of(r, m), level_of(r, n)))
}

/// Smallest `l ≥ 1` with `base^{-l} ≤ r`.
fn level_of(r: f64, base: u32) -> u32 {
    let b = base as f64;
    // r · b^l ≥ 1 is tested with b^l formed by repeated multiplication,
    // which is exact for every power that fits in 53 bits.
    let reaches = |l: u32| r * b.powi(l as i32) >= 1.0;
    let mut l = ((-r.ln() / b.ln()).ceil() as u32).max(1);
    while l > 1 && reaches(l - 1) {
        l -= 1;
    }
    while !reaches(l) {
        l += 1;
    }
    l
}

/// An eventually periodic word over `D`: `prefix` followed by `cycle`
/// repeated forever (or nothing, when `cycle` is empty).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Word {
    pub prefix: Vec<(u32, u32)>,
    pub cycle: Vec<(u32, u32)>,
}

impl Word {
    pub fn finite(letters: Vec<(u32, u32)>) -> Self {
        Word {
            prefix: letters,
            cycle: Vec::new(),
        }
    }

    pub fn periodic(prefix: Vec<(u32, u32)>, cycle: Vec<(u32, u32)>) -> Self {
        Word { prefix, cycle }
    }

    pub fn constant(letter: (u32, u32)) -> Self {
        Word::periodic(Vec::new(), vec![letter])
    }

    /// Letter at 1-based position `l`.
    pub fn letter(&self, l: usize) -> Option<(u32, u32)> {
        if l == 0 {
            return None;
        }
        let k = l - 1;
        if k < self.prefix.len() {
            return Some(self.prefix[k]);
        }
        if self.cycle.is_empty() {
            return None;
        }
        Some(self.cycle[(k - self.prefix.len()) % self.cycle.len()])
    }

    /// Number of letters, or `None` for an infinite word.
    pub fn len(&self) -> Option<usize> {
        self.cycle.is_empty().then_some(self.prefix.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == Some(0)
    }

    fn require(&self, needed: usize) -> Result<()> {
        match self.len() {
            Some(available) if available < needed => Err(Error::InsufficientWord { needed, available }),
            _ => Ok(()),
        }
    }

    pub fn validate(&self, spec: &CarpetSpec) -> Result<()> {
        if let Some(&(i, j)) = self.prefix.iter().chain(&self.cycle).find(|l| !spec.contains(**l)) {
            return Err(Error::invalid(format!("letter ({i}, {j}) is not a chosen rectangle")));
        }
        Ok(())
    }
}

/// The constant word whose letter sits in the first column with `C_i = C_max`.
pub fn max_column_word(spec: &CarpetSpec) -> Word {
    extremal_word(spec, column_stats(spec).c_max)
}

/// The constant word whose letter sits in the first column with `C_i = C_min`.
pub fn min_column_word(spec: &CarpetSpec) -> Word {
    extremal_word(spec, column_stats(spec).c_min)
}

fn extremal_word(spec: &CarpetSpec, target: u32) -> Word {
    let stats = column_stats(spec);
    let column = stats
        .counts
        .iter()
        .position(|&c| c == target)
        .expect("target is a column count") as u32;
    let letter = *spec
        .rects
        .iter()
        .filter(|(i, _)| *i == column)
        .min()
        .expect("column is nonempty");
    Word::constant(letter)
}

/// Number of `R^{1/θ}`-approximate squares needed to cover the
/// `R`-approximate square centred at `word`:
///
/// ```text
/// ∏_{l = l2(R)+1}^{min(l1(R), l2(r))} C_{i_l} · |D|^{(l2(r) - l1(R))⁺} · |πD|^{l1(r) - max(l1(R), l2(r))}
/// ```
///
/// with `r = R^{1/θ}`. For `θ` below `log m / log n` this is the product
/// `∏_{l2(R)+1}^{l1(R)} C_{i_l} · |D|^{l2(r)-l1(R)} · |πD|^{l1(r)-l2(r)}`; above it
/// the `|D|` factor disappears and the column product stops at `l2(r)`.
pub fn symbolic_cover_count(spec: &CarpetSpec, word: &Word, big: f64, theta: f64) -> Result<BigUint> {
    check_theta(theta)?;
    let small = big.powf(1.0 / theta);
    let (a1, a2) = scale_indices(big, spec.m, spec.n)?;
    let (l1, l2) = scale_indices(small, spec.m, spec.n)?;
    let stats = column_stats(spec);
    let mid = a1.min(l2);
    word.require(mid as usize)?;
    word.validate(spec)?;

    let mut count = BigUint::one();
    for l in (a2 + 1)..=mid {
        let (i, _) = word.letter(l as usize).expect("length checked");
        count *= stats.counts[i as usize];
    }
    count *= BigUint::from(stats.d_card).pow(l2.saturating_sub(a1));
    count *= BigUint::from(stats.p_card).pow(l1 - a1.max(l2));
    Ok(count)
}

/// Brute-force covering counter for a carpet.
#[derive(Debug, Clone)]
pub struct CarpetOracle {
    spec: CarpetSpec,
    level_cap: u32,
}

impl CarpetOracle {
    pub fn new(spec: CarpetSpec) -> Self {
        CarpetOracle {
            spec,
            level_cap: DEFAULT_LEVEL_CAP,
        }
    }

    pub fn with_level_cap(mut self, level_cap: u32) -> Self {
        self.level_cap = level_cap;
        self
    }

    pub fn spec(&self) -> &CarpetSpec {
        &self.spec
    }

    /// Admissible children at every level `1..=l1(r)`, as a column digit and
    /// (down to level `l2(r)`) a row digit. Siblings that land in the same
    /// `r`-box are merged.
    fn plan(&self, center: &Word, big: f64, small: f64) -> Result<Plan> {
        if !(small > 0.0 && small <= big) {
            return Err(Error::domain(format!("need 0 < r ≤ R, got R = {big}, r = {small}")));
        }
        let (m, n) = (self.spec.m, self.spec.n);
        let (a1, a2) = scale_indices(big, m, n)?;
        let (l1, l2) = scale_indices(small, m, n)?;
        if l1 > self.level_cap {
            return Err(Error::resource("cylinder level", l1 as u128, self.level_cap as u128));
        }
        for (base, level) in [(m, l1), (n, l2)] {
            let fits = max_u128_exponent(base);
            if level > fits {
                return Err(Error::resource("cylinder level for 128-bit coordinates", level as u128, fits as u128));
            }
        }
        center.require(a1 as usize)?;
        center.validate(&self.spec)?;

        let levels = (1..=l1)
            .map(|l| {
                let pinned = center.letter(l as usize);
                let mut digits: Vec<(u32, Option<u32>)> = self
                    .spec
                    .rects
                    .iter()
                    .filter(|(i, j)| {
                        let p = pinned.unwrap_or((0, 0));
                        (l > a1 || *i == p.0) && (l > a2 || *j == p.1)
                    })
                    .map(|&(i, j)| (i, (l <= l2).then_some(j)))
                    .collect();
                digits.sort_unstable();
                digits.dedup();
                digits
            })
            .collect();
        Ok(Plan { m, n, levels })
    }

    /// The `r`-boxes covering the approximate square, as integer cell
    /// coordinates `(x, y)` in the `m^{-l1(r)} × n^{-l2(r)}` grid.
    pub fn boxes(&self, center: &Word, big: f64, small: f64) -> Result<Vec<(u128, u128)>> {
        let plan = self.plan(center, big, small)?;
        let mut out = Vec::new();
        plan.collect(0, 0, 0, &mut out);
        Ok(out)
    }
}

fn max_u128_exponent(base: u32) -> u32 {
    (1..).take_while(|&l| (base as u128).checked_pow(l).is_some()).last().unwrap_or(0)
}

struct Plan {
    m: u32,
    n: u32,
    levels: Vec<Vec<(u32, Option<u32>)>>,
}

impl Plan {
    // A child's cell determines its parent's cell (drop the last digit), so
    // distinct leaves of the walk are distinct boxes.
    fn child(&self, x: u128, y: u128, digit: (u32, Option<u32>)) -> (u128, u128) {
        let x = x * self.m as u128 + digit.0 as u128;
        let y = match digit.1 {
            Some(j) => y * self.n as u128 + j as u128,
            None => y,
        };
        (x, y)
    }

    fn count_from(&self, depth: usize, x: u128, y: u128) -> u64 {
        if depth == self.levels.len() {
            return 1;
        }
        self.levels[depth]
            .iter()
            .map(|&d| {
                let (cx, cy) = self.child(x, y, d);
                self.count_from(depth + 1, cx, cy)
            })
            .sum()
    }

    fn collect(&self, depth: usize, x: u128, y: u128, out: &mut Vec<(u128, u128)>) {
        if depth == self.levels.len() {
            out.push((x, y));
            return;
        }
        for &d in &self.levels[depth] {
            let (cx, cy) = self.child(x, y, d);
            self.collect(depth + 1, cx, cy, out);
        }
    }

    /// Expands the walk breadth-first until there are enough subtrees to
    /// share between threads, then counts each subtree independently.
    fn count(&self) -> u64 {
        const FRONTIER: usize = 256;
        let mut frontier = vec![(0u128, 0u128)];
        let mut depth = 0;
        while depth < self.levels.len() && frontier.len() < FRONTIER {
            frontier = frontier
                .iter()
                .flat_map(|&(x, y)| self.levels[depth].iter().map(move |&d| self.child(x, y, d)))
                .collect();
            depth += 1;
        }
        par::map(&frontier, |&(x, y)| self.count_from(depth, x, y))
            .into_iter()
            .sum()
    }
}

impl CoveringOracle for CarpetOracle {
    type Center = Word;

    fn count(&self, center: &Word, big: f64, small: f64) -> Result<u64> {
        Ok(self.plan(center, big, small)?.count())
    }
}

/// Convenience wrapper around [`CarpetOracle`] with the default level cap.
pub fn covering_oracle(spec: &CarpetSpec, center: &Word, big: f64, small: f64) -> Result<u64> {
    CarpetOracle::new(spec.clone()).count(center, big, small)
}

/// Sup-distance between the spectra of two carpets over a grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Distinction {
    pub assouad: f64,
    pub lower: f64,
}

pub fn distinguish(a: &CarpetSpec, b: &CarpetSpec, grid: &ThetaGrid) -> Result<Distinction> {
    let sup = |f: fn(&CarpetSpec, f64) -> Result<f64>| -> Result<f64> {
        grid.points().iter().try_fold(0.0f64, |acc, &t| {
            Ok(acc.max((f(a, t)? - f(b, t)?).abs()))
        })
    };
    Ok(Distinction {
        assouad: sup(assouad_spectrum)?,
        lower: sup(lower_spectrum)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fig_left() -> CarpetSpec {
        CarpetSpec::from_columns(2, 3, &[&[0, 2], &[1]]).unwrap()
    }

    #[test]
    fn spec_validation() {
        assert!(CarpetSpec::new(3, 3, vec![(0, 0), (1, 1)]).is_err());
        assert!(CarpetSpec::new(1, 3, vec![(0, 0), (0, 1)]).is_err());
        assert!(CarpetSpec::new(2, 3, vec![(0, 0)]).is_err());
        assert!(CarpetSpec::new(2, 3, vec![(0, 0), (0, 0)]).is_err());
        assert!(CarpetSpec::new(2, 3, vec![(0, 0), (2, 0)]).is_err());
        assert!(CarpetSpec::from_json(r#"{"m":2,"n":3,"rects":[[0,0],[1,1]]}"#).is_ok());
        assert!(CarpetSpec::from_json(r#"{"m":4,"n":3,"rects":[[0,0],[1,1]]}"#).is_err());
    }

    #[test]
    fn stats_of_small_carpets() {
        let s = column_stats(&fig_left());
        assert_eq!((s.c_max, s.c_min, s.p_card, s.d_card), (2, 1, 2, 3));
        let full = column_stats(&CarpetSpec::full(3, 4).unwrap());
        assert_eq!((full.c_max, full.c_min, full.p_card, full.d_card), (4, 4, 3, 12));
    }

    #[test]
    fn scale_index_examples() {
        assert_eq!(scale_indices(0.125, 2, 3).unwrap(), (3, 2));
        assert_eq!(scale_indices(0.01, 2, 3).unwrap(), (7, 5));
        assert_eq!(scale_indices(1.0 / 9.0, 2, 3).unwrap().1, 2);
        assert_eq!(scale_indices(2f64.powi(-20), 2, 3).unwrap().0, 20);
        assert!(scale_indices(1.0, 2, 3).is_err());
        assert!(scale_indices(0.0, 2, 3).is_err());
    }

    #[test]
    fn word_access() {
        let w = Word::periodic(vec![(0, 0)], vec![(1, 1), (0, 2)]);
        assert_eq!(w.letter(1), Some((0, 0)));
        assert_eq!(w.letter(2), Some((1, 1)));
        assert_eq!(w.letter(5), Some((0, 2)));
        assert_eq!(w.letter(0), None);
        assert_eq!(Word::finite(vec![(0, 0)]).letter(2), None);
    }

    #[test]
    fn short_word_is_rejected() {
        let spec = fig_left();
        let w = Word::finite(vec![(0, 0); 3]);
        assert!(matches!(
            symbolic_cover_count(&spec, &w, 2f64.powi(-12), 0.5),
            Err(Error::InsufficientWord { .. })
        ));
    }

    #[test]
    fn oracle_rejects_deep_levels() {
        let oracle = CarpetOracle::new(fig_left()).with_level_cap(10);
        let err = oracle.count(&max_column_word(&fig_left()), 2f64.powi(-4), 2f64.powi(-12));
        assert!(err.unwrap_err().is_resource());
    }

    #[test]
    fn oracle_boxes_are_distinct_and_counted() {
        let spec = fig_left();
        let oracle = CarpetOracle::new(spec.clone());
        let center = Word::periodic(vec![], vec![(0, 2), (1, 1)]);
        let boxes = oracle.boxes(&center, 2f64.powi(-3), 2f64.powi(-9)).unwrap();
        let distinct: BTreeSet<_> = boxes.iter().collect();
        assert_eq!(distinct.len(), boxes.len());
        assert_eq!(
            oracle.count(&center, 2f64.powi(-3), 2f64.powi(-9)).unwrap(),
            boxes.len() as u64
        );
    }
}
