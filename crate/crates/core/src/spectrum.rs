//! Shared spectrum representation, the two-scale empirical estimator and the
//! general envelope every Assouad or lower spectrum must respect:
//!
//! ```text
//! dim_L F      ≤ dim_L^θ F ≤ lower box dim F
//! upper box F  ≤ dim_A^θ F ≤ min(upper box F / (1-θ), dim_A F)
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{check_theta, Error, Result};
use crate::numfmt::{self, fmt_sig, SIG_DIGITS};
use crate::par;
use crate::stats::least_squares;

/// Slack used when validating the dimension chain of a [`DimensionSummary`].
const CHAIN_SLACK: f64 = 1e-12;

/// Ordered sample of θ values in the open interval (0,1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ThetaGrid {
    points: Vec<f64>,
}

impl ThetaGrid {
    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::invalid("theta grid is empty"));
        }
        if let Some(bad) = points.iter().find(|t| !(**t > 0.0 && **t < 1.0)) {
            return Err(Error::invalid(format!("theta {bad} outside (0,1)")));
        }
        if points.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("theta grid must be strictly increasing"));
        }
        Ok(ThetaGrid { points })
    }

    /// `count` equally spaced points `i/(count+1)`, `i = 1..=count`.
    pub fn uniform(count: usize) -> Result<Self> {
        if count == 0 {
            return Err(Error::invalid("theta grid needs at least one point"));
        }
        let denom = (count + 1) as f64;
        Self::new((1..=count).map(|i| i as f64 / denom).collect())
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Largest gap between neighbouring points.
    pub fn max_step(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(0.0, f64::max)
    }
}

impl Default for ThetaGrid {
    /// 999 points `0.001, 0.002, …, 0.999`.
    fn default() -> Self {
        ThetaGrid::uniform(999).expect("default grid is valid")
    }
}

impl TryFrom<Vec<f64>> for ThetaGrid {
    type Error = Error;

    fn try_from(points: Vec<f64>) -> Result<Self> {
        ThetaGrid::new(points)
    }
}

impl From<ThetaGrid> for Vec<f64> {
    fn from(grid: ThetaGrid) -> Self {
        grid.points
            .into_iter()
            .map(|t| numfmt::round_sig(t, SIG_DIGITS))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpectrumKind {
    Assouad,
    Lower,
}

fn one() -> u32 {
    1
}

/// A sampled spectrum `θ ↦ value`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumCurve {
    pub grid: ThetaGrid,
    #[serde(serialize_with = "numfmt::ser_vec_f64")]
    pub values: Vec<f64>,
    pub kind: SpectrumKind,
    #[serde(serialize_with = "numfmt::ser_vec_f64")]
    pub transitions: Vec<f64>,
    pub closed_form: Option<String>,
    #[serde(default = "one")]
    pub ambient_dim: u32,
}

impl SpectrumCurve {
    pub fn new(grid: ThetaGrid, values: Vec<f64>, kind: SpectrumKind, ambient_dim: u32) -> Result<Self> {
        let curve = SpectrumCurve {
            grid,
            values,
            kind,
            transitions: Vec::new(),
            closed_form: None,
            ambient_dim,
        };
        curve.validate()?;
        Ok(curve)
    }

    /// Samples `f` at every grid point.
    pub fn from_fn<F>(grid: ThetaGrid, kind: SpectrumKind, ambient_dim: u32, f: F) -> Result<Self>
    where
        F: Fn(f64) -> Result<f64>,
    {
        let values = grid.points().iter().map(|&t| f(t)).collect::<Result<Vec<_>>>()?;
        Self::new(grid, values, kind, ambient_dim)
    }

    pub fn with_transitions(mut self, transitions: Vec<f64>) -> Self {
        self.transitions = transitions;
        self
    }

    pub fn with_closed_form(mut self, descriptor: impl Into<String>) -> Self {
        self.closed_form = Some(descriptor.into());
        self
    }

    /// Checks the length and range invariants.
    pub fn validate(&self) -> Result<()> {
        if self.values.len() != self.grid.len() {
            return Err(Error::Structural(format!(
                "{} values for a grid of {} points",
                self.values.len(),
                self.grid.len()
            )));
        }
        let d = self.ambient_dim as f64;
        let slack = 1e-9;
        if let Some(v) = self
            .values
            .iter()
            .find(|v| !v.is_finite() || **v < -slack || **v > d + slack)
        {
            return Err(Error::invalid(format!("spectrum value {v} outside [0, {d}]")));
        }
        Ok(())
    }

    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.grid.points().iter().copied().zip(self.values.iter().copied())
    }

    /// CSV with header `theta,value`, 12 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("theta,value\n");
        for (t, v) in self.points() {
            out.push_str(&fmt_sig(t, SIG_DIGITS));
            out.push(',');
            out.push_str(&fmt_sig(v, SIG_DIGITS));
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("curve serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let curve: SpectrumCurve =
            serde_json::from_str(text).map_err(|e| Error::invalid(format!("curve JSON: {e}")))?;
        curve.validate()?;
        Ok(curve)
    }
}

/// The classical dimensions of a set, as used by the envelopes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DimensionSummary {
    #[serde(serialize_with = "numfmt::ser_f64")]
    pub lower: f64,
    #[serde(serialize_with = "numfmt::ser_f64")]
    pub lower_box: f64,
    #[serde(serialize_with = "numfmt::ser_f64")]
    pub upper_box: f64,
    #[serde(serialize_with = "numfmt::ser_f64")]
    pub assouad: f64,
    #[serde(serialize_with = "numfmt::ser_opt_f64")]
    pub hausdorff: Option<f64>,
    #[serde(serialize_with = "numfmt::ser_opt_f64")]
    pub modified_lower: Option<f64>,
    pub ambient_dim: u32,
}

impl DimensionSummary {
    pub fn new(lower: f64, lower_box: f64, upper_box: f64, assouad: f64, ambient_dim: u32) -> Result<Self> {
        let summary = DimensionSummary {
            lower,
            lower_box,
            upper_box,
            assouad,
            hausdorff: None,
            modified_lower: None,
            ambient_dim,
        };
        summary.validate()?;
        Ok(summary)
    }

    pub fn with_hausdorff(mut self, hausdorff: f64) -> Self {
        self.hausdorff = Some(hausdorff);
        self
    }

    pub fn with_modified_lower(mut self, modified_lower: f64) -> Self {
        self.modified_lower = Some(modified_lower);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.ambient_dim == 0 {
            return Err(Error::invalid("ambient dimension must be positive"));
        }
        let d = self.ambient_dim as f64;
        let entries = [
            Some(self.lower),
            Some(self.lower_box),
            Some(self.upper_box),
            Some(self.assouad),
            self.hausdorff,
            self.modified_lower,
        ];
        for v in entries.into_iter().flatten() {
            if !v.is_finite() || v < -CHAIN_SLACK || v > d + CHAIN_SLACK {
                return Err(Error::invalid(format!("dimension {v} outside [0, {d}]")));
            }
        }
        let chain = [self.lower, self.lower_box, self.upper_box, self.assouad];
        if chain.windows(2).any(|w| w[0] > w[1] + CHAIN_SLACK) {
            return Err(Error::invalid(format!(
                "dimension chain violated: lower {} ≤ lower box {} ≤ upper box {} ≤ assouad {}",
                self.lower, self.lower_box, self.upper_box, self.assouad
            )));
        }
        Ok(())
    }

    /// Returns the envelope for the requested spectrum kind.
    pub fn envelope(&self, kind: SpectrumKind, theta: f64) -> Result<(f64, f64)> {
        match kind {
            SpectrumKind::Assouad => assouad_envelope(self, theta),
            SpectrumKind::Lower => lower_envelope(self, theta),
        }
    }
}

/// `(upper_box, min(upper_box/(1-θ), assouad))`.
pub fn assouad_envelope(summary: &DimensionSummary, theta: f64) -> Result<(f64, f64)> {
    check_theta(theta)?;
    let lo = summary.upper_box;
    let hi = (summary.upper_box / (1.0 - theta)).min(summary.assouad);
    Ok((lo, hi))
}

/// `(lower, lower_box)`.
pub fn lower_envelope(summary: &DimensionSummary, theta: f64) -> Result<(f64, f64)> {
    check_theta(theta)?;
    Ok((summary.lower, summary.lower_box))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeViolation {
    pub index: usize,
    pub theta: f64,
    pub value: f64,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JumpViolation {
    pub index: usize,
    pub theta: f64,
    pub jump: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CurveReport {
    pub envelope: Vec<EnvelopeViolation>,
    pub jumps: Vec<JumpViolation>,
}

impl CurveReport {
    pub fn len(&self) -> usize {
        self.envelope.len() + self.jumps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Lists every grid point outside its envelope by more than `tol`, and every
/// neighbouring pair whose values differ by more than `max_jump` (if given).
pub fn check_curve(
    curve: &SpectrumCurve,
    summary: &DimensionSummary,
    tol: f64,
    max_jump: Option<f64>,
) -> Result<CurveReport> {
    if curve.values.len() != curve.grid.len() {
        return Err(Error::Structural(format!(
            "{} values for a grid of {} points",
            curve.values.len(),
            curve.grid.len()
        )));
    }
    let mut report = CurveReport::default();
    for (index, (theta, value)) in curve.points().enumerate() {
        let (lo, hi) = summary.envelope(curve.kind, theta)?;
        if value < lo - tol || value > hi + tol {
            report.envelope.push(EnvelopeViolation {
                index,
                theta,
                value,
                lo,
                hi,
            });
        }
    }
    if let Some(max_jump) = max_jump {
        for (index, w) in curve.values.windows(2).enumerate() {
            let jump = (w[1] - w[0]).abs();
            if jump > max_jump {
                report.jumps.push(JumpViolation {
                    index,
                    theta: curve.grid.points()[index],
                    jump,
                });
            }
        }
    }
    Ok(report)
}

/// Which trailing partials a [`TruncatedLimit`] reduces over.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailWindow {
    /// The last `⌈f·K⌉` indices.
    Fraction(f64),
    /// Indices `⌈K/b⌉..=K`, one full period of a schedule growing like `b^j`.
    Geometric(f64),
}

impl Default for TailWindow {
    fn default() -> Self {
        TailWindow::Fraction(0.2)
    }
}

impl TailWindow {
    pub fn validate(&self) -> Result<()> {
        match *self {
            TailWindow::Fraction(f) if f > 0.0 && f <= 1.0 => Ok(()),
            TailWindow::Geometric(b) if b > 1.0 && b.is_finite() => Ok(()),
            w => Err(Error::invalid(format!("bad tail window {w:?}"))),
        }
    }

    /// First index of the window for partials running up to `k_max`.
    pub fn start(&self, k_max: usize) -> usize {
        let k = k_max as f64;
        let s = match *self {
            TailWindow::Fraction(f) => k_max + 1 - ((f * k).ceil() as usize).clamp(1, k_max.max(1)),
            TailWindow::Geometric(b) => (k / b).ceil() as usize,
        };
        s.clamp(1, k_max.max(1))
    }
}

/// Finite-scale stand-in for a limsup/liminf: the partial values together
/// with their extrema over a trailing window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncatedLimit {
    #[serde(serialize_with = "numfmt::ser_partials")]
    pub partials: Vec<(usize, f64)>,
    pub window_start: usize,
    #[serde(serialize_with = "numfmt::ser_f64")]
    pub sup_tail: f64,
    #[serde(serialize_with = "numfmt::ser_f64")]
    pub inf_tail: f64,
    /// The true limit, when it is known in closed form.
    #[serde(serialize_with = "numfmt::ser_opt_f64")]
    pub exact: Option<f64>,
}

impl TruncatedLimit {
    /// `partials` must be sorted by index.
    pub fn new(partials: Vec<(usize, f64)>, window: TailWindow) -> Result<Self> {
        window.validate()?;
        let last = match partials.last() {
            Some(&(k, _)) => k,
            None => return Err(Error::InsufficientData("no partials".into())),
        };
        let window_start = window.start(last);
        let (mut sup, mut inf) = (f64::NEG_INFINITY, f64::INFINITY);
        for &(_, v) in partials.iter().filter(|(k, _)| *k >= window_start) {
            sup = sup.max(v);
            inf = inf.min(v);
        }
        if sup == f64::NEG_INFINITY {
            return Err(Error::InsufficientData(format!(
                "no partials in tail window starting at {window_start}"
            )));
        }
        Ok(TruncatedLimit {
            partials,
            window_start,
            sup_tail: sup,
            inf_tail: inf,
            exact: None,
        })
    }

    pub fn with_exact(mut self, exact: Option<f64>) -> Self {
        self.exact = exact;
        self
    }

    pub fn last_index(&self) -> usize {
        self.partials.last().map_or(0, |p| p.0)
    }

    pub fn value_at(&self, k: usize) -> Option<f64> {
        self.partials
            .binary_search_by_key(&k, |p| p.0)
            .ok()
            .map(|i| self.partials[i].1)
    }
}

/// Counts `N(center, R, r)`: the number of `r`-boxes needed to cover the
/// part of the set within the `R`-neighbourhood of `center`.
pub trait CoveringOracle: Sync {
    type Center: Sync;

    fn count(&self, center: &Self::Center, big: f64, small: f64) -> Result<u64>;
}

/// One scale of an empirical estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaleSample {
    pub big: f64,
    pub small: f64,
    /// Largest count over all centers.
    pub max_count: u64,
    /// `log(R / R^{1/θ}) = (1 - 1/θ)·log R`.
    pub log_ratio: f64,
    /// `log max_count / log_ratio`, the single-scale exponent.
    pub pointwise: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalEstimate {
    /// Least-squares slope of `log N` against `(1 - 1/θ)·log R`.
    pub slope: f64,
    pub intercept: f64,
    /// Maximum single-scale exponent over the last few (smallest) scales.
    pub last_window_max: f64,
    pub per_scale: Vec<ScaleSample>,
}

/// Number of trailing scales in [`EmpiricalEstimate::last_window_max`].
pub const LAST_WINDOW: usize = 3;

/// Two-scale estimator of the Assouad spectrum at `theta`.
///
/// At each scale `R` the oracle is evaluated at `r = R^{1/θ}` for every
/// center and the maximum is kept; the estimate is the regression slope of
/// the log-maxima against `(1 - 1/θ)·log R`.
pub fn empirical_spectrum<O: CoveringOracle>(
    oracle: &O,
    theta: f64,
    scales: &[f64],
    centers: &[O::Center],
) -> Result<EmpiricalEstimate> {
    check_theta(theta)?;
    if scales.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "need at least 2 scales, got {}",
            scales.len()
        )));
    }
    if centers.is_empty() {
        return Err(Error::InsufficientData("no centers supplied".into()));
    }
    if scales.iter().any(|r| !(*r > 0.0 && *r < 1.0)) {
        return Err(Error::domain("scales must lie in (0,1)"));
    }
    if scales.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::domain("scales must be strictly decreasing"));
    }

    let jobs: Vec<(usize, usize)> = (0..scales.len())
        .flat_map(|s| (0..centers.len()).map(move |c| (s, c)))
        .collect();
    let counts = par::try_map(&jobs, |&(s, c)| {
        let big = scales[s];
        let small = big.powf(1.0 / theta);
        let n = oracle.count(&centers[c], big, small)?;
        if n == 0 {
            return Err(Error::OracleContract(format!(
                "oracle returned 0 boxes for center #{c} at R = {big}"
            )));
        }
        Ok(n)
    })?;

    let per_scale: Vec<ScaleSample> = scales
        .iter()
        .enumerate()
        .map(|(s, &big)| {
            let max_count = counts[s * centers.len()..(s + 1) * centers.len()]
                .iter()
                .copied()
                .max()
                .expect("at least one center");
            let log_ratio = (1.0 - 1.0 / theta) * big.ln();
            ScaleSample {
                big,
                small: big.powf(1.0 / theta),
                max_count,
                log_ratio,
                pointwise: (max_count as f64).ln() / log_ratio,
            }
        })
        .collect();

    let xs: Vec<f64> = per_scale.iter().map(|p| p.log_ratio).collect();
    let ys: Vec<f64> = per_scale.iter().map(|p| (p.max_count as f64).ln()).collect();
    let (slope, intercept) = least_squares(&xs, &ys)
        .ok_or_else(|| Error::InsufficientData("scales do not spread in log R".into()))?;
    let last_window_max = per_scale
        .iter()
        .rev()
        .take(LAST_WINDOW)
        .map(|p| p.pointwise)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(EmpiricalEstimate {
        slope,
        intercept,
        last_window_max,
        per_scale,
    })
}

/// Oracle for the filled unit cube `[0,1]^dim`: counts closed grid boxes of
/// side `r` meeting the cube `[x-R, x+R]^dim ∩ [0,1]^dim`.
#[derive(Debug, Clone, Copy)]
pub struct FilledCube {
    pub dim: usize,
}

impl CoveringOracle for FilledCube {
    type Center = Vec<f64>;

    fn count(&self, center: &Vec<f64>, big: f64, small: f64) -> Result<u64> {
        if center.len() != self.dim {
            return Err(Error::Structural(format!(
                "center has {} coordinates, cube has dimension {}",
                center.len(),
                self.dim
            )));
        }
        let cells = (1.0 / small).ceil() as i64;
        let mut total: u64 = 1;
        for &x in center {
            let a = (x - big).max(0.0);
            let b = (x + big).min(1.0);
            let first = ((a / small).ceil() as i64 - 1).max(0);
            let last = ((b / small).floor() as i64).min(cells - 1);
            let per_axis = (last - first + 1).max(0) as u64;
            total = total.saturating_mul(per_axis);
        }
        Ok(total)
    }
}

/// Oracle for a one-point set: every cover needs exactly one box.
#[derive(Debug, Clone, Copy)]
pub struct SinglePoint;

impl CoveringOracle for SinglePoint {
    type Center = ();

    fn count(&self, _center: &(), _big: f64, _small: f64) -> Result<u64> {
        Ok(1)
    }
}

/// Grid points where the curve has a slope discontinuity.
///
/// Uses the stencil `v[i+w] - 2 v[i] + v[i-w]`; runs of consecutive firing
/// points are merged and represented by their strongest point (the leftmost
/// on ties).
pub fn detect_transitions(curve: &SpectrumCurve, window: usize, jump_tol: f64) -> Vec<f64> {
    let w = window.max(1);
    let v = &curve.values;
    if v.len() < 2 * w + 1 {
        return Vec::new();
    }
    let firing: Vec<(usize, f64)> = (w..v.len() - w)
        .filter_map(|i| {
            let d2 = (v[i + w] - 2.0 * v[i] + v[i - w]).abs();
            (d2 > jump_tol).then_some((i, d2))
        })
        .collect();

    let mut out = Vec::new();
    let mut cluster: Vec<(usize, f64)> = Vec::new();
    let flush = |cluster: &mut Vec<(usize, f64)>, out: &mut Vec<f64>| {
        if cluster.is_empty() {
            return;
        }
        let peak = cluster.iter().map(|c| c.1).fold(f64::NEG_INFINITY, f64::max);
        let (idx, _) = cluster
            .iter()
            .find(|c| c.1 >= peak * (1.0 - 1e-9))
            .expect("cluster has a peak");
        out.push(curve.grid.points()[*idx]);
        cluster.clear();
    };
    for item in firing {
        if let Some(last) = cluster.last() {
            if item.0 > last.0 + 1 {
                flush(&mut cluster, &mut out);
            }
        }
        cluster.push(item);
    }
    flush(&mut cluster, &mut out);
    out
}
