//! Decimal output with a fixed number of significant digits.

use serde::{Serialize, Serializer};

/// Significant digits used for every emitted number.
pub const SIG_DIGITS: usize = 12;

/// Formats `x` like C's `%.{digits}g`: plain decimal for moderate exponents,
/// scientific otherwise, trailing zeros removed.
pub fn fmt_sig(x: f64, digits: usize) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    if x == 0.0 {
        return "0".to_string();
    }
    let digits = digits.max(1);
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent marker");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -5 || exp >= digits as i32 {
        return format!("{}e{}", trim_zeros(mantissa), exp);
    }
    let decimals = (digits as i32 - 1 - exp).max(0) as usize;
    trim_zeros(&format!("{:.*}", decimals, x)).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Rounds to `digits` significant digits (the value that [`fmt_sig`] prints).
pub fn round_sig(x: f64, digits: usize) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", digits.max(1) - 1, x)
        .parse()
        .expect("round trip of formatted float")
}

pub(crate) fn ser_f64<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_f64(round_sig(*x, SIG_DIGITS))
}

pub(crate) fn ser_opt_f64<S: Serializer>(x: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
    match x {
        Some(v) => s.serialize_some(&round_sig(*v, SIG_DIGITS)),
        None => s.serialize_none(),
    }
}

pub(crate) fn ser_pair<S: Serializer>(x: &(f64, f64), s: S) -> Result<S::Ok, S::Error> {
    (round_sig(x.0, SIG_DIGITS), round_sig(x.1, SIG_DIGITS)).serialize(s)
}

pub(crate) fn ser_partials<S: Serializer>(xs: &[(usize, f64)], s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(xs.iter().map(|&(k, x)| (k, round_sig(x, SIG_DIGITS))))
}

pub(crate) fn ser_vec_f64<S: Serializer>(xs: &[f64], s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(xs.iter().map(|&x| round_sig(x, SIG_DIGITS)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formats_like_percent_g() {
        assert_eq!(fmt_sig(1.5222465432187, 12), "1.52224654322");
        assert_eq!(fmt_sig(0.5, 12), "0.5");
        assert_eq!(fmt_sig(2.0, 12), "2");
        assert_eq!(fmt_sig(-0.001, 12), "-0.001");
        assert_eq!(fmt_sig(1.0e-7, 12), "1e-7");
        assert_eq!(fmt_sig(123456789012345.0, 12), "1.23456789012e14");
        assert_eq!(fmt_sig(0.0, 12), "0");
    }

    #[test]
    fn rounding_matches_printed_value() {
        let x = std::f64::consts::PI;
        let printed: f64 = fmt_sig(x, 12).parse().unwrap();
        assert_eq!(printed, round_sig(x, 12));
        assert!((round_sig(x, 12) - x).abs() < 1e-11);
    }
}
