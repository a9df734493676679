//! Exact rational helpers shared by the planners and the simulator.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::fmt;
use thiserror::Error;

pub type Rational = BigRational;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("cannot parse {text:?} as an exact number: {reason}")]
pub struct ParseNumberError {
    pub text: String,
    pub reason: &'static str,
}

pub fn int(v: i64) -> Rational {
    Rational::from_integer(BigInt::from(v))
}

pub fn ratio(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

pub fn to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Rounds to the nearest integer, halves away from zero.
pub fn round_half_away(r: &Rational) -> BigInt {
    r.round().to_integer()
}

/// Parses an exact decimal such as `25000000`, `12.5M`, `1.25e-9`, `-3` or
/// `1/3`. Optional unit suffixes: `k`, `M`, `G` (powers of 1000) and `m`, `u`,
/// `n`, `p` (negative powers of 1000). Never goes through floating point.
pub fn parse_exact(text: &str) -> Result<Rational, ParseNumberError> {
    let err = |reason| ParseNumberError { text: text.to_string(), reason };
    let s = text.trim();
    if s.is_empty() {
        return Err(err("empty"));
    }
    if let Some((n, d)) = s.split_once('/') {
        let n = parse_exact(n)?;
        let d = parse_exact(d)?;
        if d.is_zero() {
            return Err(err("zero denominator"));
        }
        return Ok(n / d);
    }
    let (body, scale) = match s.chars().last() {
        Some('k') => (&s[..s.len() - 1], 3),
        Some('M') => (&s[..s.len() - 1], 6),
        Some('G') => (&s[..s.len() - 1], 9),
        Some('m') => (&s[..s.len() - 1], -3),
        Some('u') => (&s[..s.len() - 1], -6),
        Some('n') => (&s[..s.len() - 1], -9),
        Some('p') => (&s[..s.len() - 1], -12),
        _ => (s, 0),
    };
    let (mantissa, exponent) = match body.find(['e', 'E']) {
        Some(i) => {
            let e: i32 = body[i + 1..].parse().map_err(|_| err("bad exponent"))?;
            (&body[..i], e)
        }
        None => (body, 0),
    };
    let (negative, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (whole, frac) = digits.split_once('.').unwrap_or((digits, ""));
    if whole.is_empty() && frac.is_empty() {
        return Err(err("no digits"));
    }
    if !whole.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
        return Err(err("unexpected character"));
    }
    let all: String = format!("{whole}{frac}");
    let mut value = Rational::from_integer(all.parse::<BigInt>().map_err(|_| err("no digits"))?);
    let power = exponent as i64 + scale as i64 - frac.len() as i64;
    if power.unsigned_abs() > 4096 {
        return Err(err("exponent too large"));
    }
    let ten = Rational::from_integer(BigInt::from(10));
    let factor = num_traits::pow(ten, power.unsigned_abs() as usize);
    if power >= 0 {
        value *= factor;
    } else {
        value /= factor;
    }
    Ok(if negative { -value } else { value })
}

/// Formats a rational as `n` or `n/d`.
pub struct Exact<'a>(pub &'a Rational);

impl fmt::Display for Exact<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_integer() {
            write!(f, "{}", self.0.numer())
        } else {
            write!(f, "{}/{}", self.0.numer(), self.0.denom())
        }
    }
}

/// Best rational approximation of `x` with denominator at most `max_den`,
/// restricted to the closed interval `[lo, hi]`.
///
/// Walks the Stern–Brocot tree toward `x`, taking runs of identical turns in
/// one step so the descent costs one iteration per continued-fraction term.
/// Among candidates at equal distance the smaller one wins. Returns `None`
/// when no fraction with an admissible denominator lies in the interval: the
/// two bracketing fractions are Farey neighbours, so if both fall outside the
/// interval nothing admissible lies inside it.
pub fn best_approximation(
    x: &Rational,
    lo: &Rational,
    hi: &Rational,
    max_den: &BigInt,
) -> Option<Rational> {
    if lo > hi || max_den < &BigInt::one() {
        return None;
    }
    let target = x.clone().max(lo.clone()).min(hi.clone());
    let (lower, upper) = bracket(&target, max_den);
    let mut best: Option<Rational> = None;
    for cand in [lower, upper] {
        if &cand < lo || &cand > hi {
            continue;
        }
        best = match best {
            None => Some(cand),
            Some(b) => {
                let db = (&b - x).abs();
                let dc = (&cand - x).abs();
                if dc < db || (dc == db && cand < b) {
                    Some(cand)
                } else {
                    Some(b)
                }
            }
        };
    }
    best
}

/// Returns the closest fractions below and above `x` (inclusive) whose
/// denominators do not exceed `max_den`. Both equal `x` when it is admissible.
fn bracket(x: &Rational, max_den: &BigInt) -> (Rational, Rational) {
    let floor = x.floor();
    let frac = x - &floor;
    // left = p0/q0, right = p1/q1 bracket frac inside [0, 1].
    let (mut p0, mut q0) = (BigInt::zero(), BigInt::one());
    let (mut p1, mut q1) = (BigInt::one(), BigInt::one());
    let num = frac.numer().clone();
    let den = frac.denom().clone();
    if num.is_zero() {
        return (x.clone(), x.clone());
    }
    loop {
        let pm = &p0 + &p1;
        let qm = &q0 + &q1;
        if &qm > max_den {
            break;
        }
        // Compare frac with the mediant: num/den vs pm/qm.
        let lhs = &num * &qm;
        let rhs = &pm * &den;
        if lhs == rhs {
            let exact = Rational::new(pm, qm) + &floor;
            return (exact.clone(), exact);
        }
        if lhs > rhs {
            // Move right: left <- left + k*right, largest k keeping left < frac.
            // num*(q0 + k q1) > den*(p0 + k p1)  <=>  k*(den*p1 - num*q1) < num*q0 - den*p0
            let a = &den * &p1 - &num * &q1;
            let b = &num * &q0 - &den * &p0;
            let mut k = (&b - BigInt::one()).div_floor(&a);
            let cap = (max_den - &q0).div_floor(&q1);
            if k > cap {
                k = cap;
            }
            if k < BigInt::one() {
                k = BigInt::one();
            }
            p0 += &k * &p1;
            q0 += &k * &q1;
        } else {
            let a = &num * &q0 - &den * &p0;
            let b = &den * &p1 - &num * &q1;
            let mut k = (&b - BigInt::one()).div_floor(&a);
            let cap = (max_den - &q1).div_floor(&q0);
            if k > cap {
                k = cap;
            }
            if k < BigInt::one() {
                k = BigInt::one();
            }
            p1 += &k * &p0;
            q1 += &k * &q0;
        }
    }
    (Rational::new(p0, q0) + &floor, Rational::new(p1, q1) + floor)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_plain_and_suffixed() {
        assert_eq!(parse_exact("25000000").unwrap(), int(25_000_000));
        assert_eq!(parse_exact("12.5M").unwrap(), int(12_500_000));
        assert_eq!(parse_exact("200M").unwrap(), int(200_000_000));
        assert_eq!(parse_exact("1.25n").unwrap(), ratio(125, 100_000_000_000));
        assert_eq!(parse_exact("1.25e-9").unwrap(), ratio(125, 100_000_000_000));
        assert_eq!(parse_exact("-45").unwrap(), int(-45));
        assert_eq!(parse_exact("1/3").unwrap(), ratio(1, 3));
        assert_eq!(parse_exact(".5").unwrap(), ratio(1, 2));
        assert_eq!(parse_exact("0.1").unwrap(), ratio(1, 10));
    }

    #[test]
    fn rejects_garbage() {
        for bad in ["", "abc", "1.2.3", "1/0", "e5", "1e", "--1", "0x10"] {
            assert!(parse_exact(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn rounding_ties_go_away_from_zero() {
        assert_eq!(round_half_away(&ratio(5, 2)), BigInt::from(3));
        assert_eq!(round_half_away(&ratio(-5, 2)), BigInt::from(-3));
        assert_eq!(round_half_away(&ratio(25, 8)), BigInt::from(3));
        assert_eq!(round_half_away(&ratio(-7, 5)), BigInt::from(-1));
    }

    #[test]
    fn approximates_pi_like_values() {
        let x = ratio(314_159_265, 100_000_000);
        let one = int(0);
        let big = int(10);
        assert_eq!(best_approximation(&x, &one, &big, &BigInt::from(7)), Some(ratio(22, 7)));
        assert_eq!(best_approximation(&x, &one, &big, &BigInt::from(113)), Some(ratio(355, 113)));
    }

    #[test]
    fn exact_when_denominator_fits() {
        let x = ratio(17, 2);
        assert_eq!(best_approximation(&x, &int(5), &int(20), &BigInt::from(2)), Some(x));
    }

    #[test]
    fn respects_interval() {
        let x = int(3);
        assert_eq!(best_approximation(&x, &int(5), &int(9), &BigInt::from(10)), Some(int(5)));
        assert_eq!(best_approximation(&x, &int(5), &int(4), &BigInt::from(10)), None);
    }

    fn brute_best(x: &Rational, q_max: i64, lo: &Rational, hi: &Rational) -> Option<Rational> {
        let mut best: Option<Rational> = None;
        for q in 1..=q_max {
            let qr = int(q);
            let base = (x * &qr).floor().to_integer();
            for p in [base.clone() - 1, base.clone(), base + 1] {
                let c = Rational::new(p, BigInt::from(q));
                if &c < lo || &c > hi {
                    continue;
                }
                let better = match &best {
                    None => true,
                    Some(b) => {
                        let (dc, db) = ((&c - x).abs(), (b - x).abs());
                        dc < db || (dc == db && &c < b)
                    }
                };
                if better {
                    best = Some(c);
                }
            }
        }
        best
    }

    proptest! {
        #[test]
        fn matches_brute_force(n in 1i64..100_000, d in 1i64..10_000, q_max in 1i64..60) {
            let x = ratio(n, d);
            let lo = int(0);
            let hi = int(1_000_000);
            let fast = best_approximation(&x, &lo, &hi, &BigInt::from(q_max));
            prop_assert_eq!(fast, brute_best(&x, q_max, &lo, &hi));
        }

        #[test]
        fn parse_round_trips_integers(v in any::<i64>()) {
            prop_assert_eq!(parse_exact(&v.to_string()).unwrap(), int(v));
        }
    }
}
