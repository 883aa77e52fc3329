//! Self-similar sets on the line: pressure, stopping sets, Gibbs masses and
//! the overlap upper bound `(s - tθ)/(1-θ)` for the Assouad spectrum.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_theta, Error, Result};
use crate::par;
use crate::spectrum::{SpectrumCurve, SpectrumKind, ThetaGrid};
use crate::stats::least_squares;

/// Default bisection tolerance for [`similarity_exponent`].
pub const DEFAULT_TOL: f64 = 1e-12;

/// Default cap on the number of words in a stopping set.
pub const DEFAULT_WORD_CAP: usize = 5_000_000;

/// Relative slack when comparing a product of ratios with `δ`.
const LIP_SLACK: f64 = 1e-12;

/// The similarity `x ↦ r x + a`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimilarMap {
    pub r: f64,
    pub a: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct RawIfs {
    maps: Vec<SimilarMap>,
}

/// A finite family of contracting similarities of `[0,1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawIfs", into = "RawIfs")]
pub struct SimilarIfs {
    maps: Vec<SimilarMap>,
}

impl SimilarIfs {
    pub fn new(maps: Vec<SimilarMap>) -> Result<Self> {
        if maps.len() < 2 {
            return Err(Error::invalid("an IFS needs at least 2 maps"));
        }
        for (k, f) in maps.iter().enumerate() {
            if !(f.r > 0.0 && f.r < 1.0) {
                return Err(Error::invalid(format!("map {k}: ratio {} outside (0,1)", f.r)));
            }
            if !(f.a >= 0.0 && f.r + f.a <= 1.0 + 1e-12) {
                return Err(Error::invalid(format!("map {k} does not send [0,1] into itself")));
            }
        }
        Ok(SimilarIfs { maps })
    }

    /// Maps with the given ratios and translations.
    pub fn from_pairs(pairs: &[(f64, f64)]) -> Result<Self> {
        Self::new(pairs.iter().map(|&(r, a)| SimilarMap { r, a }).collect())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::invalid(format!("IFS JSON: {e}")))
    }

    pub fn maps(&self) -> &[SimilarMap] {
        &self.maps
    }

    pub fn len(&self) -> usize {
        self.maps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.maps.is_empty()
    }

    fn max_ratio(&self) -> f64 {
        self.maps.iter().map(|f| f.r).fold(0.0, f64::max)
    }

    /// Product of the ratios along `word`.
    pub fn lip(&self, word: &[u32]) -> Result<f64> {
        word.iter().try_fold(1.0, |acc, &i| Ok(acc * self.map(i)?.r))
    }

    /// The interval `S_word([0,1])`.
    pub fn cylinder(&self, word: &[u32]) -> Result<(f64, f64)> {
        let mut offset = 0.0;
        let mut scale = 1.0;
        for &i in word {
            let f = self.map(i)?;
            offset += scale * f.a;
            scale *= f.r;
        }
        Ok((offset, offset + scale))
    }

    fn map(&self, i: u32) -> Result<&SimilarMap> {
        self.maps
            .get(i as usize)
            .ok_or_else(|| Error::invalid(format!("letter {i} out of range for {} maps", self.maps.len())))
    }
}

impl TryFrom<RawIfs> for SimilarIfs {
    type Error = Error;

    fn try_from(raw: RawIfs) -> Result<Self> {
        SimilarIfs::new(raw.maps)
    }
}

impl From<SimilarIfs> for RawIfs {
    fn from(ifs: SimilarIfs) -> Self {
        RawIfs { maps: ifs.maps }
    }
}

/// `P(s) = log Σ r_i^s`.
pub fn pressure(ifs: &SimilarIfs, s: f64) -> Result<f64> {
    if !(s >= 0.0) {
        return Err(Error::domain(format!("pressure needs s ≥ 0, got {s}")));
    }
    Ok(ifs.maps.iter().map(|f| f.r.powf(s)).sum::<f64>().ln())
}

/// The unique zero of the pressure, by bisection on
/// `[0, log(count) / -log(max r)]`.
pub fn similarity_exponent(ifs: &SimilarIfs, tol: f64) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::domain(format!("tolerance must be positive, got {tol}")));
    }
    let mut lo = 0.0;
    let mut hi = (ifs.len() as f64).ln() / -ifs.max_ratio().ln();
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if pressure(ifs, mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < tol * 1e-3 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Words `w` with `Lip(w) ≤ δ < Lip(w†)`, in lexicographic order.
#[derive(Debug, Clone, PartialEq)]
pub struct StoppingSet {
    pub delta: f64,
    pub words: Vec<Vec<u32>>,
}

impl StoppingSet {
    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

pub fn stopping_set(ifs: &SimilarIfs, delta: f64) -> Result<StoppingSet> {
    stopping_set_capped(ifs, delta, DEFAULT_WORD_CAP)
}

/// [`stopping_set`] with an explicit cap on the number of words.
pub fn stopping_set_capped(ifs: &SimilarIfs, delta: f64, cap: usize) -> Result<StoppingSet> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::domain(format!("δ must lie in (0,1), got {delta}")));
    }
    let threshold = delta * (1.0 + LIP_SLACK);
    let roots: Vec<u32> = (0..ifs.len() as u32).collect();
    let branches = par::try_map(&roots, |&i| {
        let mut out = Vec::new();
        let mut word = vec![i];
        walk(ifs, &mut word, ifs.maps[i as usize].r, threshold, cap, &mut out)?;
        Ok::<_, Error>(out)
    })?;
    let total: usize = branches.iter().map(Vec::len).sum();
    if total > cap {
        return Err(Error::resource("stopping-set words", total as u128, cap as u128));
    }
    Ok(StoppingSet {
        delta,
        words: branches.into_iter().flatten().collect(),
    })
}

fn walk(
    ifs: &SimilarIfs,
    word: &mut Vec<u32>,
    lip: f64,
    threshold: f64,
    cap: usize,
    out: &mut Vec<Vec<u32>>,
) -> Result<()> {
    if lip <= threshold {
        if out.len() >= cap {
            return Err(Error::resource("stopping-set words", cap as u128 + 1, cap as u128));
        }
        out.push(word.clone());
        return Ok(());
    }
    for (i, f) in ifs.maps.iter().enumerate() {
        word.push(i as u32);
        walk(ifs, word, lip * f.r, threshold, cap, out)?;
        word.pop();
    }
    Ok(())
}

/// Mass `∏ r_i^s` of the cylinder of `word`.
pub fn gibbs_mass(ifs: &SimilarIfs, s: f64, word: &[u32]) -> Result<f64> {
    word.iter().try_fold(1.0, |acc, &i| Ok(acc * ifs.map(i)?.r.powf(s)))
}

/// Result of [`estimate_t`].
#[derive(Debug, Clone, PartialEq)]
pub struct TEstimate {
    /// Minimum of the per-sample slopes; a finite-scale heuristic that
    /// overestimates the true exponent when the extremal points are missed.
    pub t: f64,
    pub per_sample: Vec<f64>,
    pub stopping_words: usize,
}

/// Cylinder intervals of a stopping set, sorted by left endpoint, with
/// prefix sums of their masses.
struct MassIndex {
    left: Vec<f64>,
    right: Vec<f64>,
    prefix: Vec<f64>,
    max_len: f64,
}

impl MassIndex {
    fn new(ifs: &SimilarIfs, s: f64, set: &StoppingSet) -> Result<Self> {
        let mut cells = set
            .words
            .iter()
            .map(|w| Ok((ifs.cylinder(w)?, gibbs_mass(ifs, s, w)?)))
            .collect::<Result<Vec<_>>>()?;
        cells.sort_by(|a, b| a.0 .0.total_cmp(&b.0 .0));
        let mut prefix = Vec::with_capacity(cells.len() + 1);
        prefix.push(0.0);
        let mut acc = 0.0;
        for c in &cells {
            acc += c.1;
            prefix.push(acc);
        }
        Ok(MassIndex {
            left: cells.iter().map(|c| c.0 .0).collect(),
            right: cells.iter().map(|c| c.0 .1).collect(),
            max_len: cells.iter().map(|c| c.0 .1 - c.0 .0).fold(0.0, f64::max),
            prefix,
        })
    }

    /// Total mass of cylinders meeting `[x - r, x + r]`.
    fn ball(&self, x: f64, r: f64) -> f64 {
        let end = self.left.partition_point(|&l| l <= x + r);
        let inner = self.left.partition_point(|&l| l < x - r);
        let strip = self.left.partition_point(|&l| l < x - r - self.max_len);
        let mut mass = self.prefix[end] - self.prefix[inner.min(end)];
        for k in strip..inner.min(end) {
            if self.right[k] >= x - r {
                mass += self.prefix[k + 1] - self.prefix[k];
            }
        }
        mass
    }
}

/// Estimates the exponent `t` in `μ(B(x,r)) ≤ C r^t` for the Gibbs measure
/// at `s`: for each sampled point (a uniformly random symbolic word pushed
/// through the IFS) the slope of `log μ(B(x,r))` against `log r` is
/// fitted, and the minimum slope is returned.
pub fn estimate_t(ifs: &SimilarIfs, s: f64, radii: &[f64], samples: usize, seed: u64) -> Result<TEstimate> {
    if samples == 0 {
        return Err(Error::invalid("need at least one sample"));
    }
    if radii.len() < 2 {
        return Err(Error::InsufficientData(format!("need at least 2 radii, got {}", radii.len())));
    }
    if radii.iter().any(|r| !(*r > 0.0 && *r < 1.0)) {
        return Err(Error::domain("radii must lie in (0,1)"));
    }
    if radii.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::domain("radii must be strictly decreasing"));
    }
    let finest = radii[radii.len() - 1];
    let set = stopping_set(ifs, finest / 8.0)?;
    let index = MassIndex::new(ifs, s, &set)?;

    let depth = ((finest * 1e-3).ln() / ifs.max_ratio().ln()).ceil().max(1.0) as usize;
    let log_r: Vec<f64> = radii.iter().map(|r| r.ln()).collect();
    let ids: Vec<u64> = (0..samples as u64).collect();
    let per_sample = par::try_map(&ids, |&k| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(k);
        let word: Vec<u32> = (0..depth).map(|_| rng.random_range(0..ifs.len() as u32)).collect();
        let (lo, hi) = ifs.cylinder(&word)?;
        let x = 0.5 * (lo + hi);
        let log_mass: Vec<f64> = radii.iter().map(|&r| index.ball(x, r).ln()).collect();
        least_squares(&log_r, &log_mass)
            .map(|(slope, _)| slope)
            .ok_or_else(|| Error::InsufficientData("radii do not spread".into()))
    })?;
    Ok(TEstimate {
        t: per_sample.iter().copied().fold(f64::INFINITY, f64::min),
        per_sample,
        stopping_words: set.len(),
    })
}

/// Inputs of the overlap bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverlapBoundParams {
    pub s: f64,
    pub t: f64,
    pub upper_box: f64,
}

impl OverlapBoundParams {
    /// Checks `0 ≤ t ≤ upper_box ≤ min(s, 1)`.
    pub fn new(s: f64, t: f64, upper_box: f64) -> Result<Self> {
        let slack = 1e-12;
        if !(t >= 0.0 && t <= upper_box + slack && upper_box <= s.min(1.0) + slack) {
            return Err(Error::invalid(format!(
                "need 0 ≤ t ≤ upper_box ≤ min(s, 1), got s = {s}, t = {t}, upper_box = {upper_box}"
            )));
        }
        Ok(OverlapBoundParams { s, t, upper_box })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OverlapBound {
    /// `(s - tθ)/(1-θ)`.
    pub raw: f64,
    /// `raw` clipped by `min(upper_box/(1-θ), 1)`.
    pub reported: f64,
}

pub fn overlap_spectrum_bound(params: &OverlapBoundParams, theta: f64) -> Result<OverlapBound> {
    check_theta(theta)?;
    let raw = (params.s - params.t * theta) / (1.0 - theta);
    let envelope = (params.upper_box / (1.0 - theta)).min(1.0);
    Ok(OverlapBound {
        raw,
        reported: raw.min(envelope),
    })
}

/// The `θ` interval on which the overlap bound beats the general envelope.
pub fn improvement_region(params: &OverlapBoundParams) -> Option<(f64, f64)> {
    if params.t <= 0.0 {
        return None;
    }
    let lo = ((params.s - params.upper_box) / params.t).max(0.0);
    let hi = if params.t < 1.0 {
        ((1.0 - params.s) / (1.0 - params.t)).min(1.0)
    } else {
        1.0
    };
    (lo < hi).then_some((lo, hi))
}

/// Reported overlap bound over a grid.
pub fn overlap_bound_curve(params: &OverlapBoundParams, grid: &ThetaGrid) -> Result<SpectrumCurve> {
    Ok(SpectrumCurve::from_fn(grid.clone(), SpectrumKind::Assouad, 1, |t| {
        Ok(overlap_spectrum_bound(params, t)?.reported)
    })?
    .with_closed_form("min((s - tθ)/(1-θ), upper_box/(1-θ), 1)"))
}

/// Hypotheses a caller may assert about a self-similar set.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WspFlags {
    pub weak_separation: bool,
    pub no_superexp_concentration: bool,
}

/// Constant spectrum equal to the upper box dimension, valid under either
/// asserted hypothesis.
pub fn wsp_spectrum(upper_box: f64, flags: WspFlags, grid: &ThetaGrid) -> Result<SpectrumCurve> {
    let note = if flags.weak_separation {
        "constant upper box dimension = dim_A (weak separation asserted)"
    } else if flags.no_superexp_concentration {
        "constant upper box dimension (no super-exponential concentration of cylinders asserted)"
    } else {
        return Err(Error::Precondition(
            "assert weak separation or absence of super-exponential concentration".into(),
        ));
    };
    Ok(SpectrumCurve::from_fn(grid.clone(), SpectrumKind::Assouad, 1, |_| Ok(upper_box))?.with_closed_form(note))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_maps() {
        assert!(SimilarIfs::from_pairs(&[(0.5, 0.0)]).is_err());
        assert!(SimilarIfs::from_pairs(&[(1.0, 0.0), (0.5, 0.5)]).is_err());
        assert!(SimilarIfs::from_pairs(&[(0.5, 0.6), (0.5, 0.0)]).is_err());
        assert!(SimilarIfs::from_json(r#"{"maps":[{"r":0.5,"a":0},{"r":0.5,"a":0.5}]}"#).is_ok());
    }

    #[test]
    fn pressure_examples() {
        let half = SimilarIfs::from_pairs(&[(0.5, 0.0), (0.5, 0.5)]).unwrap();
        assert!(pressure(&half, 1.0).unwrap().abs() < 1e-15);
        assert!((pressure(&half, 0.0).unwrap() - 2f64.ln()).abs() < 1e-15);
        assert!(pressure(&half, -0.1).is_err());
        let mixed = SimilarIfs::from_pairs(&[(0.5, 0.0), (0.25, 0.5), (0.25, 0.75)]).unwrap();
        assert!(pressure(&mixed, 1.0).unwrap().abs() < 1e-15);
    }

    #[test]
    fn cylinder_composition() {
        let ifs = SimilarIfs::from_pairs(&[(0.5, 0.0), (0.25, 0.75)]).unwrap();
        let (a, b) = ifs.cylinder(&[1, 0]).unwrap();
        assert!((a - 0.75).abs() < 1e-15 && (b - 0.875).abs() < 1e-15);
        assert!(ifs.cylinder(&[2]).is_err());
    }

    #[test]
    fn mass_index_counts_touching_cells() {
        let ifs = SimilarIfs::from_pairs(&[(0.5, 0.0), (0.5, 0.5)]).unwrap();
        let set = stopping_set(&ifs, 0.25).unwrap();
        let index = MassIndex::new(&ifs, 1.0, &set).unwrap();
        assert!((index.ball(0.5, 0.01) - 0.5).abs() < 1e-15);
        assert!((index.ball(0.1, 0.01) - 0.25).abs() < 1e-15);
        assert!((index.ball(0.5, 1.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn region_edge_cases() {
        let p = OverlapBoundParams::new(0.7, 0.0, 0.6).unwrap();
        assert_eq!(improvement_region(&p), None);
        let p = OverlapBoundParams::new(0.7, 0.1, 0.6).unwrap();
        assert_eq!(improvement_region(&p), None);
    }
}
