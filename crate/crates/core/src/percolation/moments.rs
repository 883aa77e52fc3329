//! Exact moments of a supercritical Galton–Watson process.
//!
//! With offspring moments `μ_k = E[X^k]` and `μ = μ_1 > 1`, every moment of
//! the generation sizes has the form `E[Y_n^k] = Σ_{i=1}^k a_{ki} μ^{i n}`.
//! The coefficients are built by induction on `k` from the conditional
//! expansion `E[(X_1 + … + X_y)^k] = Σ_i b_i y^i`. All arithmetic is exact.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Largest `k` accepted by [`expand_power_sum`].
pub const EXPANSION_CAP: usize = 12;

/// Largest offspring support size (number of values) for [`binomial_moments`].
pub const BINOMIAL_SUPPORT_CAP: u32 = 4096;

/// Largest offspring support for [`exact_gw_distribution`].
pub const DISTRIBUTION_SUPPORT_CAP: usize = 10;

/// Largest depth for [`exact_gw_distribution`].
pub const DISTRIBUTION_DEPTH_CAP: usize = 6;

fn rat(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

/// Raw moments `μ_1, …, μ_K` of an offspring law.
#[derive(Debug, Clone, PartialEq)]
pub struct OffspringMoments {
    raw: Vec<BigRational>,
}

impl OffspringMoments {
    pub fn new(raw: Vec<BigRational>) -> Result<Self> {
        if raw.is_empty() {
            return Err(Error::invalid("need at least one moment"));
        }
        if !raw[0].is_positive() {
            return Err(Error::invalid("mean offspring must be positive"));
        }
        if raw.len() >= 2 && raw[1] < &raw[0] * &raw[0] {
            return Err(Error::invalid("second moment below squared mean"));
        }
        Ok(OffspringMoments { raw })
    }

    /// Moments of the law with `pmf[j] = P(X = j)`.
    pub fn from_pmf(pmf: &[BigRational], k: usize) -> Result<Self> {
        check_pmf(pmf)?;
        let raw = (1..=k as u32)
            .map(|m| {
                pmf.iter()
                    .enumerate()
                    .map(|(j, pj)| pj * rat(j as i64).pow(m as i32))
                    .fold(BigRational::zero(), |a, b| a + b)
            })
            .collect();
        Self::new(raw)
    }

    /// `μ_k` for `k ≥ 1`.
    pub fn get(&self, k: usize) -> Option<&BigRational> {
        k.checked_sub(1).and_then(|i| self.raw.get(i))
    }

    pub fn mean(&self) -> &BigRational {
        &self.raw[0]
    }

    pub fn len(&self) -> usize {
        self.raw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw.is_empty()
    }

    pub fn as_slice(&self) -> &[BigRational] {
        &self.raw
    }
}

fn check_pmf(pmf: &[BigRational]) -> Result<()> {
    if pmf.is_empty() || pmf.iter().any(|p| p.is_negative()) {
        return Err(Error::invalid("offspring pmf must be a nonempty list of nonnegative weights"));
    }
    let total = pmf.iter().fold(BigRational::zero(), |a, b| a + b);
    if !total.is_one() {
        return Err(Error::invalid(format!("offspring pmf sums to {total}, not 1")));
    }
    Ok(())
}

fn binomial(n: u32, k: u32) -> BigInt {
    (0..k).fold(BigInt::one(), |acc, i| acc * BigInt::from(n - i) / BigInt::from(i + 1))
}

/// The Binomial(`count`, `p`) pmf, exactly.
pub fn binomial_pmf(count: u32, p: &BigRational) -> Result<Vec<BigRational>> {
    if p.is_negative() || p > &BigRational::one() {
        return Err(Error::domain(format!("p = {p} outside [0,1]")));
    }
    if count + 1 > BINOMIAL_SUPPORT_CAP {
        return Err(Error::resource(
            "binomial support",
            count as u128 + 1,
            BINOMIAL_SUPPORT_CAP as u128,
        ));
    }
    let q = BigRational::one() - p;
    Ok((0..=count)
        .map(|j| {
            BigRational::from_integer(binomial(count, j)) * p.pow(j as i32) * q.pow((count - j) as i32)
        })
        .collect())
}

/// Raw moments of Binomial(`count`, `p`) by summation over the support.
pub fn binomial_moments(count: u32, p: &BigRational, k: usize) -> Result<OffspringMoments> {
    if k == 0 {
        return Err(Error::invalid("need K ≥ 1"));
    }
    OffspringMoments::from_pmf(&binomial_pmf(count, p)?, k)
}

/// Integer partitions of `k` as non-increasing part lists.
fn partitions(k: usize) -> Vec<Vec<usize>> {
    fn rec(rest: usize, max: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if rest == 0 {
            out.push(cur.clone());
            return;
        }
        for part in (1..=rest.min(max)).rev() {
            cur.push(part);
            rec(rest - part, part, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(k, k, &mut Vec::new(), &mut out);
    out
}

fn factorial(n: usize) -> BigInt {
    (1..=n).fold(BigInt::one(), |acc, i| acc * BigInt::from(i))
}

/// Signed Stirling numbers of the first kind `s(n, i)`, `0 ≤ i ≤ n ≤ k`:
/// `y (y-1) ⋯ (y-n+1) = Σ_i s(n, i) y^i`.
fn stirling_first(k: usize) -> Vec<Vec<BigInt>> {
    let mut s = vec![vec![BigInt::zero(); k + 1]; k + 1];
    s[0][0] = BigInt::one();
    for n in 1..=k {
        for i in 1..=n {
            s[n][i] = &s[n - 1][i - 1] - BigInt::from(n - 1) * &s[n - 1][i];
        }
    }
    s
}

/// Coefficients `b_0, …, b_k` with
/// `E[(X_1 + ⋯ + X_y)^k] = Σ_i b_i y^i` for i.i.d. `X_j`.
///
/// Set partitions of `{1..k}` into `s` blocks of sizes `k_1, …, k_s`
/// contribute `y(y-1)⋯(y-s+1)·μ_{k_1}⋯μ_{k_s}`; partitions sharing a block-size
/// multiset are grouped with multiplicity `k!/(∏ k_j! ∏ m_r!)`.
pub fn expand_power_sum(moments: &OffspringMoments, k: usize) -> Result<Vec<BigRational>> {
    if k > EXPANSION_CAP {
        return Err(Error::resource("power-sum order", k as u128, EXPANSION_CAP as u128));
    }
    if moments.len() < k {
        return Err(Error::invalid(format!("need {k} moments, have {}", moments.len())));
    }
    let mut falling = vec![BigRational::zero(); k + 1];
    for parts in partitions(k) {
        let mut denom = parts.iter().fold(BigInt::one(), |acc, &p| acc * factorial(p));
        let mut run = 1;
        for w in parts.windows(2) {
            if w[0] == w[1] {
                run += 1;
            } else {
                denom *= factorial(run);
                run = 1;
            }
        }
        denom *= factorial(run);
        let mut term = BigRational::new(factorial(k), denom);
        for &p in &parts {
            term *= moments.get(p).expect("length checked");
        }
        falling[parts.len()] += term;
    }
    let s = stirling_first(k);
    Ok((0..=k)
        .map(|i| {
            (i..=k)
                .map(|n| &falling[n] * BigRational::from_integer(s[n][i].clone()))
                .fold(BigRational::zero(), |a, b| a + b)
        })
        .collect())
}

/// Triangular array `a_{ki}`, `1 ≤ i ≤ k ≤ K`, with
/// `E[Y_n^k] = Σ_i a_{ki} μ^{i n}`.
#[derive(Debug, Clone, PartialEq)]
pub struct GwMomentTable {
    mean: BigRational,
    coeffs: Vec<Vec<BigRational>>,
}

impl GwMomentTable {
    /// Largest `k` in the table.
    pub fn order(&self) -> usize {
        self.coeffs.len()
    }

    pub fn mean(&self) -> &BigRational {
        &self.mean
    }

    /// `a_{ki}` (1-based indices).
    pub fn coeff(&self, k: usize, i: usize) -> Option<&BigRational> {
        if i == 0 || i > k {
            return None;
        }
        self.coeffs.get(k.checked_sub(1)?)?.get(i - 1)
    }

    /// Row `k` as `[a_{k1}, …, a_{kk}]`.
    pub fn row(&self, k: usize) -> Option<&[BigRational]> {
        self.coeffs.get(k.checked_sub(1)?).map(Vec::as_slice)
    }

    /// `E[Y_n^k]`, exactly.
    pub fn moment(&self, k: usize, n: u32) -> Result<BigRational> {
        let row = self
            .row(k)
            .ok_or_else(|| Error::domain(format!("order {k} outside table of order {}", self.order())))?;
        Ok(row
            .iter()
            .enumerate()
            .map(|(i, a)| a * self.mean.pow(((i + 1) as u32 * n) as i32))
            .fold(BigRational::zero(), |x, y| x + y))
    }

    pub fn moment_f64(&self, k: usize, n: u32) -> Result<f64> {
        Ok(to_f64(&self.moment(k, n)?))
    }
}

pub(crate) fn to_f64(x: &BigRational) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// Builds the coefficient table up to order `k_max`.
///
/// For `N ≥ 2` and `j < N` the coefficients are
/// `a_{Nj} = Σ_{i=j}^{N-1} b_i a_{ij} / (μ^j (1 - μ^{N-j}))`, and the top one is
/// `a_{NN} = (μ_N - Σ_{j<N} a_{Nj} μ^j) / μ^N`, where `b_i` come from
/// [`expand_power_sum`] at order `N`.
pub fn gw_moment_table(moments: &OffspringMoments, k_max: usize) -> Result<GwMomentTable> {
    let mu = moments.mean().clone();
    if mu <= BigRational::one() {
        return Err(Error::domain(format!("mean offspring {mu} ≤ 1: process is not supercritical")));
    }
    if k_max == 0 {
        return Err(Error::invalid("need order ≥ 1"));
    }
    if moments.len() < k_max {
        return Err(Error::invalid(format!("need {k_max} moments, have {}", moments.len())));
    }
    let mut coeffs: Vec<Vec<BigRational>> = vec![vec![BigRational::one()]];
    for big_n in 2..=k_max {
        let b = expand_power_sum(moments, big_n)?;
        let mut row = Vec::with_capacity(big_n);
        let mut lower_sum = BigRational::zero();
        for j in 1..big_n {
            let inner = (j..big_n)
                .map(|i| &b[i] * &coeffs[i - 1][j - 1])
                .fold(BigRational::zero(), |x, y| x + y);
            let c = inner / (BigRational::one() - mu.pow((big_n - j) as i32));
            lower_sum += &c;
            row.push(c / mu.pow(j as i32));
        }
        let top = (moments.get(big_n).expect("length checked") - lower_sum) / mu.pow(big_n as i32);
        row.push(top);
        coeffs.push(row);
    }
    Ok(GwMomentTable { mean: mu, coeffs })
}

/// Exact pmf of `Y_depth` (with `Y_0 = 1`), by convolution powers of the
/// offspring pmf.
pub fn exact_gw_distribution(pmf: &[BigRational], depth: usize) -> Result<Vec<BigRational>> {
    check_pmf(pmf)?;
    if pmf.len() > DISTRIBUTION_SUPPORT_CAP {
        return Err(Error::resource(
            "offspring support",
            pmf.len() as u128,
            DISTRIBUTION_SUPPORT_CAP as u128,
        ));
    }
    if depth > DISTRIBUTION_DEPTH_CAP {
        return Err(Error::resource("depth", depth as u128, DISTRIBUTION_DEPTH_CAP as u128));
    }
    let mut dist = vec![BigRational::zero(), BigRational::one()];
    for _ in 0..depth {
        let top = (dist.len() - 1) * (pmf.len() - 1);
        let mut next = vec![BigRational::zero(); top + 1];
        let mut power = vec![BigRational::one()];
        for (y, py) in dist.iter().enumerate() {
            if y > 0 {
                power = convolve(&power, pmf);
            }
            if py.is_zero() {
                continue;
            }
            for (v, pv) in power.iter().enumerate() {
                next[v] += py * pv;
            }
        }
        dist = next;
    }
    Ok(dist)
}

fn convolve(a: &[BigRational], b: &[BigRational]) -> Vec<BigRational> {
    let mut out = vec![BigRational::zero(); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        if x.is_zero() {
            continue;
        }
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// `E[Y^k]` of a pmf on `0, 1, 2, …`.
pub fn pmf_moment(pmf: &[BigRational], k: u32) -> BigRational {
    pmf.iter()
        .enumerate()
        .map(|(y, p)| p * rat(y as i64).pow(k as i32))
        .fold(BigRational::zero(), |a, b| a + b)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn partitions_of_four() {
        assert_eq!(partitions(4).len(), 5);
        assert_eq!(partitions(6).len(), 11);
    }

    #[test]
    fn stirling_rows() {
        let s = stirling_first(4);
        let row: Vec<i64> = s[4].iter().map(|x| x.to_i64().unwrap()).collect();
        assert_eq!(row, vec![0, -6, 11, -6, 1]);
    }

    #[test]
    fn second_order_expansion() {
        let m = OffspringMoments::new(vec![r(8, 5), r(72, 25)]).unwrap();
        let b = expand_power_sum(&m, 2).unwrap();
        assert_eq!(b[0], r(0, 1));
        assert_eq!(b[1], r(72, 25) - r(64, 25));
        assert_eq!(b[2], r(64, 25));
    }

    #[test]
    fn caps_and_domain() {
        let m = OffspringMoments::new(vec![r(1, 1); 13]).unwrap();
        assert!(expand_power_sum(&m, 13).unwrap_err().is_resource());
        assert!(matches!(gw_moment_table(&m, 2), Err(Error::Domain(_))));
        assert!(OffspringMoments::new(vec![r(2, 1), r(3, 1)]).is_err());
    }
}
