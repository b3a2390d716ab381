//! Polynomials over GF(2).
//!
//! A [`Gf2Poly`] stores its coefficients in a `u128`: bit `k` is the
//! coefficient of `t^k`. Addition is XOR, multiplication is carry-less.
//! Products whose degree would not fit in 128 bits are reported as
//! [`Gf2Error::Overflow`] instead of being truncated.
//!
//! ```text
//! 0b10000 = 16 -> t^4
//! 0b111   = 7  -> t^2 + t + 1
//! 0b1011  = 11 -> t^3 + t + 1
//! ```

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, AddAssign};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of coefficient bits a [`Gf2Poly`] can hold.
pub const WIDTH: u32 = 128;

/// Above this degree `is_irreducible` switches from trial division to
/// Ben-Or's test.
const TRIAL_DIVISION_MAX_DEGREE: u32 = 24;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Gf2Error {
    #[error("division by the zero polynomial")]
    DivisionByZero,
    #[error("product degree {0} exceeds the {WIDTH}-bit coefficient width")]
    Overflow(u32),
    #[error("gcd of two zero polynomials is undefined")]
    GcdOfZeros,
    #[error("{a} is not invertible modulo {m}")]
    NotInvertible { a: Gf2Poly, m: Gf2Poly },
    #[error("modulus {0} must have degree at least 1")]
    InvalidModulus(Gf2Poly),
    #[error("irreducibility is undefined for constant polynomial {0}")]
    ConstantPolynomial(Gf2Poly),
    #[error("moduli {0} and {1} are not coprime")]
    NotCoprime(Gf2Poly, Gf2Poly),
    #[error("residue {residue} does not reduce below modulus {modulus}")]
    ResidueTooLarge { residue: Gf2Poly, modulus: Gf2Poly },
    #[error("empty congruence system")]
    EmptySystem,
    #[error("cannot parse polynomial {input:?} at byte {position}: {reason}")]
    Parse {
        input: String,
        position: usize,
        reason: &'static str,
    },
}

pub type Result<T> = std::result::Result<T, Gf2Error>;

/// Degree of a polynomial. The zero polynomial has degree [`Degree::NegInf`],
/// which orders below every finite degree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Degree {
    NegInf,
    Finite(u32),
}

impl Degree {
    pub fn finite(self) -> Option<u32> {
        match self {
            Degree::NegInf => None,
            Degree::Finite(d) => Some(d),
        }
    }
}

impl fmt::Display for Degree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Degree::NegInf => f.write_str("-inf"),
            Degree::Finite(d) => write!(f, "{d}"),
        }
    }
}

/// A binary polynomial, bit `k` set iff the coefficient of `t^k` is 1.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct Gf2Poly(u128);

impl Gf2Poly {
    pub const ZERO: Gf2Poly = Gf2Poly(0);
    pub const ONE: Gf2Poly = Gf2Poly(1);
    /// The monomial `t`.
    pub const T: Gf2Poly = Gf2Poly(2);

    pub const fn from_bits(bits: u128) -> Self {
        Gf2Poly(bits)
    }

    pub const fn bits(self) -> u128 {
        self.0
    }

    /// `t^k`. Panics if `k >= 128`.
    pub fn monomial(k: u32) -> Self {
        assert!(k < WIDTH, "monomial degree {k} out of range");
        Gf2Poly(1u128 << k)
    }

    pub const fn is_zero(self) -> bool {
        self.0 == 0
    }

    pub const fn degree(self) -> Degree {
        if self.0 == 0 {
            Degree::NegInf
        } else {
            Degree::Finite(WIDTH - 1 - self.0.leading_zeros())
        }
    }

    /// Coefficient of `t^k`.
    pub fn coeff(self, k: u32) -> bool {
        k < WIDTH && (self.0 >> k) & 1 == 1
    }

    /// Carry-less product, or [`Gf2Error::Overflow`] when the result needs
    /// more than 128 coefficient bits.
    pub fn checked_mul(self, rhs: Self) -> Result<Self> {
        let (Degree::Finite(da), Degree::Finite(db)) = (self.degree(), rhs.degree()) else {
            return Ok(Self::ZERO);
        };
        if da + db >= WIDTH {
            return Err(Gf2Error::Overflow(da + db));
        }
        let (mut acc, mut a, mut b) = (0u128, self.0, rhs.0);
        // iterate over the sparser operand
        if a.count_ones() < b.count_ones() {
            std::mem::swap(&mut a, &mut b);
        }
        while b != 0 {
            let k = b.trailing_zeros();
            acc ^= a << k;
            b &= b - 1;
        }
        Ok(Gf2Poly(acc))
    }

    /// Long division: returns `(q, r)` with `self = divisor * q + r` and
    /// `deg(r) < deg(divisor)`.
    pub fn div_rem(self, divisor: Self) -> Result<(Self, Self)> {
        let Degree::Finite(dd) = divisor.degree() else {
            return Err(Gf2Error::DivisionByZero);
        };
        let (mut q, mut r) = (0u128, self.0);
        while let Degree::Finite(dr) = Gf2Poly(r).degree() {
            if dr < dd {
                break;
            }
            let shift = dr - dd;
            q |= 1u128 << shift;
            r ^= divisor.0 << shift;
        }
        Ok((Gf2Poly(q), Gf2Poly(r)))
    }

    /// Remainder of `self` divided by `modulus`. Fallible, so not `Rem`.
    #[allow(clippy::should_implement_trait)]
    pub fn rem(self, modulus: Self) -> Result<Self> {
        self.div_rem(modulus).map(|(_, r)| r)
    }

    /// Extended Euclid: `(g, u, v)` with `u*self + v*other = g = gcd(self, other)`.
    /// The gcd is monic automatically since GF(2) has a single unit.
    pub fn gcd_ext(self, other: Self) -> Result<(Self, Self, Self)> {
        if self.is_zero() && other.is_zero() {
            return Err(Gf2Error::GcdOfZeros);
        }
        // invariants: r0 = s0*a + t0*b, r1 = s1*a + t1*b
        let (mut r0, mut r1) = (self, other);
        let (mut s0, mut s1) = (Self::ONE, Self::ZERO);
        let (mut t0, mut t1) = (Self::ZERO, Self::ONE);
        while !r1.is_zero() {
            let (q, r) = r0.div_rem(r1)?;
            (r0, r1) = (r1, r);
            // Bezout coefficients stay below deg(a)+deg(b), so mul cannot overflow
            // for inputs that fit in the width.
            (s0, s1) = (s1, s0 + q.checked_mul(s1)?);
            (t0, t1) = (t1, t0 + q.checked_mul(t1)?);
        }
        Ok((r0, s0, t0))
    }

    pub fn gcd(self, other: Self) -> Result<Self> {
        self.gcd_ext(other).map(|(g, _, _)| g)
    }

    /// Inverse of `self` modulo `modulus`.
    pub fn inv_mod(self, modulus: Self) -> Result<Self> {
        match modulus.degree() {
            Degree::Finite(d) if d >= 1 => {}
            _ => return Err(Gf2Error::InvalidModulus(modulus)),
        }
        let a = self.rem(modulus)?;
        if a.is_zero() {
            return Err(Gf2Error::NotInvertible { a: self, m: modulus });
        }
        let (g, u, _) = a.gcd_ext(modulus)?;
        if g != Self::ONE {
            return Err(Gf2Error::NotInvertible { a: self, m: modulus });
        }
        u.rem(modulus)
    }

    /// `(self * rhs) mod modulus` without intermediate overflow.
    pub fn mul_mod(self, rhs: Self, modulus: Self) -> Result<Self> {
        let Degree::Finite(dm) = modulus.degree() else {
            return Err(Gf2Error::DivisionByZero);
        };
        let mut a = self.rem(modulus)?;
        let mut b = rhs.rem(modulus)?.0;
        let mut acc = Self::ZERO;
        while b != 0 {
            if b & 1 == 1 {
                acc.0 ^= a.0;
            }
            b >>= 1;
            // a <- a*t mod m; deg(m) <= 127 so the shift cannot overflow
            a.0 <<= 1;
            if a.0 >> dm & 1 == 1 {
                a.0 ^= modulus.0;
            }
        }
        Ok(acc)
    }

    /// True iff `self` has no factor of degree between 1 and `deg/2`.
    pub fn is_irreducible(self) -> Result<bool> {
        let d = match self.degree() {
            Degree::Finite(d) if d >= 1 => d,
            _ => return Err(Gf2Error::ConstantPolynomial(self)),
        };
        if d <= TRIAL_DIVISION_MAX_DEGREE {
            Ok(self.trial_division_irreducible(d))
        } else {
            self.ben_or_irreducible(d)
        }
    }

    fn trial_division_irreducible(self, d: u32) -> bool {
        // divisors: every polynomial of degree 1..=d/2
        let upper = 1u128 << (d / 2 + 1);
        (2..upper).all(|f| !self.rem(Gf2Poly(f)).expect("nonzero divisor").is_zero())
    }

    fn ben_or_irreducible(self, d: u32) -> Result<bool> {
        // p is irreducible iff gcd(p, t^(2^i) - t) = 1 for i = 1..=d/2
        let mut power = Self::T;
        for _ in 0..d / 2 {
            power = power.mul_mod(power, self)?;
            if (power + Self::T).gcd(self)? != Self::ONE {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// MSB-first binary rendering, e.g. `"10000"` for `t^4`; `"0"` for zero.
    pub fn to_binary_string(self) -> String {
        format!("{:b}", self.0)
    }

    pub fn from_binary_str(s: &str) -> Result<Self> {
        let digits = s.trim();
        if digits.is_empty() {
            return Err(parse_err(s, 0, "empty input"));
        }
        let mut bits = 0u128;
        let mut seen_one = false;
        let mut width = 0u32;
        for (i, c) in digits.char_indices() {
            let bit = match c {
                '0' => 0,
                '1' => 1,
                _ => return Err(parse_err(s, i, "expected binary digit")),
            };
            seen_one |= bit == 1;
            if seen_one {
                width += 1;
                if width > WIDTH {
                    return Err(parse_err(s, i, "more than 128 significant bits"));
                }
            }
            bits = (bits << 1) | bit;
        }
        Ok(Gf2Poly(bits))
    }

    /// Parses human notation such as `t^4`, `t^2 + t + 1`, `x3+x+1` or `0`.
    pub fn from_human_str(s: &str) -> Result<Self> {
        let mut bits = 0u128;
        let mut any = false;
        let mut pos = 0usize;
        for term in s.split('+') {
            let start = pos + (term.len() - term.trim_start().len());
            pos += term.len() + 1;
            let t = term.trim();
            if t.is_empty() {
                return Err(parse_err(s, start, "empty term"));
            }
            let k = match t {
                "0" => {
                    any = true;
                    continue;
                }
                "1" => 0,
                _ => {
                    let mut chars = t.chars();
                    let var = chars.next().unwrap_or(' ');
                    if var != 't' && var != 'x' {
                        return Err(parse_err(s, start, "expected t, x, 0 or 1"));
                    }
                    let rest = chars.as_str().trim_start();
                    if rest.is_empty() {
                        1
                    } else {
                        let exp = rest
                            .strip_prefix('^')
                            .unwrap_or(rest)
                            .trim();
                        exp.parse::<u32>()
                            .ok()
                            .filter(|&k| k < WIDTH)
                            .ok_or_else(|| parse_err(s, start + 1, "bad exponent"))?
                    }
                }
            };
            any = true;
            // repeated terms cancel
            bits ^= 1u128 << k;
        }
        if !any {
            return Err(parse_err(s, 0, "empty input"));
        }
        Ok(Gf2Poly(bits))
    }
}

fn parse_err(input: &str, position: usize, reason: &'static str) -> Gf2Error {
    Gf2Error::Parse {
        input: input.to_string(),
        position,
        reason,
    }
}

impl Add for Gf2Poly {
    type Output = Gf2Poly;

    #[allow(clippy::suspicious_arithmetic_impl)] // coefficients add mod 2
    fn add(self, rhs: Self) -> Self {
        Gf2Poly(self.0 ^ rhs.0)
    }
}

impl AddAssign for Gf2Poly {
    #[allow(clippy::suspicious_op_assign_impl)]
    fn add_assign(&mut self, rhs: Self) {
        self.0 ^= rhs.0;
    }
}

impl From<u128> for Gf2Poly {
    fn from(bits: u128) -> Self {
        Gf2Poly(bits)
    }
}

/// Human form, highest power first: `t^2 + t + 1`.
impl fmt::Display for Gf2Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return f.write_str("0");
        }
        let mut first = true;
        for k in (0..WIDTH).rev().filter(|&k| self.coeff(k)) {
            if !first {
                f.write_str(" + ")?;
            }
            first = false;
            match k {
                0 => f.write_str("1")?,
                1 => f.write_str("t")?,
                _ => write!(f, "t^{k}")?,
            }
        }
        Ok(())
    }
}

impl fmt::Debug for Gf2Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Gf2Poly({}: {})", self.to_binary_string(), self)
    }
}

/// Accepts both MSB-first binary strings and human notation.
impl FromStr for Gf2Poly {
    type Err = Gf2Error;

    fn from_str(s: &str) -> Result<Self> {
        let trimmed = s.trim();
        if !trimmed.is_empty() && trimmed.chars().all(|c| c == '0' || c == '1') {
            Self::from_binary_str(trimmed)
        } else {
            Self::from_human_str(s)
        }
    }
}

impl Serialize for Gf2Poly {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_binary_string())
    }
}

impl<'de> Deserialize<'de> for Gf2Poly {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Solves `x = residue_i (mod modulus_i)` for pairwise-coprime moduli.
///
/// Built incrementally (Garner): with `x` solving the first `k` congruences
/// modulo `M`, the next solution is `x + M * ((r - x) * M^-1 mod m)`.
/// The result has degree below the sum of the modulus degrees.
pub fn crt(congruences: &[(Gf2Poly, Gf2Poly)]) -> Result<Gf2Poly> {
    let Some(&(r0, m0)) = congruences.first() else {
        return Err(Gf2Error::EmptySystem);
    };
    check_congruence(r0, m0)?;
    let mut x = r0;
    let mut big_m = m0;
    for (i, &(r, m)) in congruences.iter().enumerate().skip(1) {
        check_congruence(r, m)?;
        let inv = big_m.inv_mod(m).map_err(|_| {
            // report the first earlier modulus sharing a factor with m
            let other = congruences[..i]
                .iter()
                .map(|&(_, mj)| mj)
                .find(|mj| mj.gcd(m).map(|g| g != Gf2Poly::ONE).unwrap_or(true))
                .unwrap_or(big_m);
            Gf2Error::NotCoprime(other, m)
        })?;
        let delta = (r + x.rem(m)?).mul_mod(inv, m)?;
        x += big_m.checked_mul(delta)?;
        big_m = big_m.checked_mul(m)?;
    }
    Ok(x)
}

fn check_congruence(residue: Gf2Poly, modulus: Gf2Poly) -> Result<()> {
    match modulus.degree() {
        Degree::Finite(d) if d >= 1 => {}
        _ => return Err(Gf2Error::InvalidModulus(modulus)),
    }
    if residue.degree().cmp(&modulus.degree()) != Ordering::Less {
        return Err(Gf2Error::ResidueTooLarge { residue, modulus });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> Gf2Poly {
        s.parse().unwrap()
    }

    /// Schoolbook product over coefficient vectors.
    fn schoolbook_mul(a: Gf2Poly, b: Gf2Poly) -> Gf2Poly {
        let mut out = [false; 256];
        for i in 0..128 {
            for j in 0..128 {
                if a.coeff(i) && b.coeff(j) {
                    out[(i + j) as usize] ^= true;
                }
            }
        }
        let mut bits = 0u128;
        for (k, &c) in out.iter().enumerate().take(128) {
            if c {
                bits |= 1 << k;
            }
        }
        Gf2Poly(bits)
    }

    #[test]
    fn degree_cases() {
        assert_eq!(Gf2Poly::ONE.degree(), Degree::Finite(0));
        assert_eq!(p("t^4").degree(), Degree::Finite(4));
        assert_eq!(Gf2Poly::ZERO.degree(), Degree::NegInf);
        assert!(Degree::NegInf < Degree::Finite(0));
    }

    #[test]
    fn add_cases() {
        let a = p("t^3 + t");
        assert_eq!(a + a, Gf2Poly::ZERO);
        assert_eq!(p("t^2+1") + p("t+1"), p("t^2+t"));
        assert_eq!(a + Gf2Poly::ZERO, a);
    }

    #[test]
    fn mul_cases() {
        let a = p("t^5+t^2+1");
        assert_eq!(a.checked_mul(Gf2Poly::ONE).unwrap(), a);
        let lhs = p("t+1");
        let rhs = p("t^2+t+1");
        assert_eq!(lhs.checked_mul(rhs).unwrap(), schoolbook_mul(lhs, rhs));
        assert_eq!(lhs.checked_mul(rhs).unwrap(), p("t^3+1"));
        assert_eq!(lhs.checked_mul(lhs).unwrap(), p("t^2+1"));
    }

    #[test]
    fn mul_overflow_detected() {
        let big = Gf2Poly::monomial(100);
        assert_eq!(big.checked_mul(Gf2Poly::monomial(27)).unwrap(), Gf2Poly::monomial(127));
        assert_eq!(
            big.checked_mul(Gf2Poly::monomial(28)),
            Err(Gf2Error::Overflow(128))
        );
    }

    #[test]
    fn div_rem_cases() {
        assert_eq!(p("t^4").div_rem(p("t^2+t+1")).unwrap(), (p("t^2+t"), p("t")));
        assert_eq!(
            p("t^4").div_rem(p("t+1")).unwrap(),
            (p("t^3+t^2+t+1"), Gf2Poly::ONE)
        );
        let a = p("t^7+t^3+1");
        assert_eq!(a.div_rem(a).unwrap(), (Gf2Poly::ONE, Gf2Poly::ZERO));
        assert_eq!(a.div_rem(Gf2Poly::ZERO), Err(Gf2Error::DivisionByZero));
    }

    #[test]
    fn gcd_ext_cases() {
        let a = p("t^3+t+1");
        assert_eq!(a.gcd_ext(Gf2Poly::ZERO).unwrap(), (a, Gf2Poly::ONE, Gf2Poly::ZERO));
        let (g, u, v) = p("t+1").gcd_ext(p("t^2+t+1")).unwrap();
        assert_eq!(g, Gf2Poly::ONE);
        assert_eq!(
            u.checked_mul(p("t+1")).unwrap() + v.checked_mul(p("t^2+t+1")).unwrap(),
            g
        );
        assert_eq!(
            Gf2Poly::ZERO.gcd_ext(Gf2Poly::ZERO),
            Err(Gf2Error::GcdOfZeros)
        );
    }

    /// Exhaustive search over residues of degree < deg(m).
    fn brute_inverse(a: Gf2Poly, m: Gf2Poly) -> Option<Gf2Poly> {
        let d = m.degree().finite().unwrap();
        (1u128..(1 << d))
            .map(Gf2Poly)
            .find(|&x| schoolbook_mul(x, a).rem(m).unwrap() == Gf2Poly::ONE)
    }

    #[test]
    fn inv_mod_cases() {
        let m = p("t^2+t+1");
        assert_eq!(Gf2Poly::ONE.inv_mod(m).unwrap(), Gf2Poly::ONE);
        assert_eq!(p("t+1").inv_mod(m).unwrap(), p("t"));
        assert_eq!(brute_inverse(p("t+1"), m), Some(p("t")));
        assert_eq!(p("t").inv_mod(m).unwrap(), p("t+1"));
        assert_eq!(brute_inverse(p("t"), m), Some(p("t+1")));
        assert!(matches!(
            p("t+1").inv_mod(p("t^2+1")),
            Err(Gf2Error::NotInvertible { .. })
        ));
        assert!(matches!(
            p("t").inv_mod(Gf2Poly::ONE),
            Err(Gf2Error::InvalidModulus(_))
        ));
    }

    #[test]
    fn inv_mod_matches_exhaustive_search() {
        let m = p("t^5+t^2+1");
        for a in 1u128..32 {
            let a = Gf2Poly(a);
            assert_eq!(a.inv_mod(m).ok(), brute_inverse(a, m), "a = {a}");
        }
    }

    #[test]
    fn irreducible_cases() {
        assert!(p("t^2+t+1").is_irreducible().unwrap());
        assert!(!p("t^2+1").is_irreducible().unwrap());
        assert!(p("t^3+t+1").is_irreducible().unwrap());
        assert!(matches!(
            Gf2Poly::ONE.is_irreducible(),
            Err(Gf2Error::ConstantPolynomial(_))
        ));
    }

    #[test]
    fn ben_or_agrees_with_trial_division() {
        for bits in 2u128..(1 << 13) {
            let q = Gf2Poly(bits);
            let d = q.degree().finite().unwrap();
            if d == 0 {
                continue;
            }
            assert_eq!(
                q.ben_or_irreducible(d).unwrap(),
                q.trial_division_irreducible(d),
                "{q}"
            );
        }
    }

    #[test]
    fn large_irreducibles() {
        // t^127 + t + 1 is a known irreducible trinomial; t^64 + 1 = (t+1)^64
        assert!(p("t^127+t+1").is_irreducible().unwrap());
        assert!(!p("t^64+1").is_irreducible().unwrap());
        assert!(p("t^64+t^4+t^3+t+1").is_irreducible().unwrap());
    }

    #[test]
    fn crt_cases() {
        let system = [
            (p("1"), p("t+1")),
            (p("t"), p("t^2+t+1")),
            (p("t^2+t"), p("t^3+t+1")),
        ];
        let x = crt(&system).unwrap();
        assert_eq!(x.to_binary_string(), "10000");
        assert_eq!(crt(&[(p("t+1"), p("t^3+t+1"))]).unwrap(), p("t+1"));
        assert!(matches!(
            crt(&[(p("1"), p("t+1")), (p("1"), p("t^2+1"))]),
            Err(Gf2Error::NotCoprime(_, _))
        ));
        assert!(matches!(
            crt(&[(p("t^2"), p("t^2+t+1"))]),
            Err(Gf2Error::ResidueTooLarge { .. })
        ));
        assert_eq!(crt(&[]), Err(Gf2Error::EmptySystem));
    }

    #[test]
    fn text_round_trip() {
        for s in ["0", "1", "10000", "1011", "110"] {
            let q = Gf2Poly::from_binary_str(s).unwrap();
            assert_eq!(q.to_binary_string(), s);
            assert_eq!(q.to_string().parse::<Gf2Poly>().unwrap(), q);
        }
        assert_eq!(p("t^4").to_string(), "t^4");
        assert_eq!(p("x^2 + x + 1"), p("111"));
        assert_eq!(p("t + t"), Gf2Poly::ZERO);
    }

    #[test]
    fn parse_errors_carry_position() {
        match "t^2 + y".parse::<Gf2Poly>() {
            Err(Gf2Error::Parse { position, .. }) => assert_eq!(position, 6),
            other => panic!("unexpected {other:?}"),
        }
        assert!("t^200".parse::<Gf2Poly>().is_err());
        assert!("".parse::<Gf2Poly>().is_err());
    }
}
