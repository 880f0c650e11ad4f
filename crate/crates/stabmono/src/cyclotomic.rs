//! Exact arithmetic in the rings `R_d = ℤ[exp(iπ/2^d), 1/2]`.
//!
//! A [`Cyclotomic`] stores `2^{−k} · Σ_j a_j ζ^j` where `ζ = exp(iπ/2^d)` is
//! a primitive `2^{d+1}`-th root of unity (so `ζ^{2^d} = −1`), the `a_j` are
//! arbitrary-precision integers indexed by `j ∈ 0..2^d`, and `k ≥ 0` is a
//! dyadic denominator exponent.
//!
//! Every value is kept in a *canonical reduced form*:
//!
//! * minimal denominator: `k = 0` or at least one coefficient is odd;
//! * minimal level: if all odd-index coefficients vanish, the value is
//!   rewritten at level `d−1` (where `ζ_{d−1} = ζ_d²`);
//! * the zero value is level 0, `k = 0`, coefficients `[0]`.
//!
//! Canonical form makes equality testing a plain field comparison and gives
//! the valuation routine its termination bound.
//!
//! The module also provides the Galois-style coefficient permutations `σ_k`
//! (odd `k`), the rational norm `N_d(x) = ∏_{k=0}^{2^d−1} σ_{2k+1}(x)`, and
//! the dyadic valuation `v₂` with `v₂(0) = +∞`, normalized so that
//! `v₂(2) = 1` and `v₂(1 − ζ) = 1/2^d` at level `d`.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::{Error, Result, MAX_LEVEL};

/// An exact element of `R_d = ℤ[exp(iπ/2^d), 1/2]` in canonical reduced form.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Cyclotomic {
    level: u8,
    denom_exp: u32,
    coeffs: Vec<BigInt>,
}

/// An exact rational of the form `a / 2^K` (the value range of the norm).
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Dyadic {
    num: BigInt,
    denom_exp: u32,
}

/// A small exact rational with power-of-two denominator, used for valuations,
/// monotone values, and probabilities-as-exponents.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub struct DyadicFraction {
    num: i64,
    log2_den: u32,
}

/// The value of `v₂`: an exact dyadic rational or `+∞` (for `v₂(0)`).
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub enum Valuation {
    Finite(DyadicFraction),
    Infinite,
}

// ---------------------------------------------------------------------------
// DyadicFraction
// ---------------------------------------------------------------------------

impl DyadicFraction {
    /// `num / 2^log2_den`, normalized so the numerator is odd or zero.
    pub fn new(mut num: i64, mut log2_den: u32) -> Self {
        if num == 0 {
            return DyadicFraction { num: 0, log2_den: 0 };
        }
        while num % 2 == 0 && log2_den > 0 {
            num /= 2;
            log2_den -= 1;
        }
        DyadicFraction { num, log2_den }
    }

    pub fn from_int(n: i64) -> Self {
        DyadicFraction { num: n, log2_den: 0 }
    }

    pub const fn zero() -> Self {
        DyadicFraction { num: 0, log2_den: 0 }
    }

    pub fn num(&self) -> i64 {
        self.num
    }

    pub fn log2_den(&self) -> u32 {
        self.log2_den
    }

    pub fn is_integer(&self) -> bool {
        self.log2_den == 0
    }

    pub fn to_f64(&self) -> f64 {
        self.num as f64 / (1u64 << self.log2_den) as f64
    }

    /// Floor of the value (used for mixed-number display like `2+1/8`).
    pub fn floor(&self) -> i64 {
        self.num.div_euclid(1i64 << self.log2_den)
    }

    /// Display as `int` or mixed `int+num/den` (e.g. `2+1/8`, `-1/2`,
    /// `-1-1/2`).
    pub fn mixed_string(&self) -> String {
        if self.log2_den == 0 {
            return self.num.to_string();
        }
        let den = 1i64 << self.log2_den;
        let mag = self.num.abs();
        let whole = mag / den;
        let rem = mag % den;
        let sign = if self.num < 0 { "-" } else { "" };
        if whole == 0 {
            format!("{sign}{rem}/{den}")
        } else if self.num < 0 {
            format!("-{whole}-{rem}/{den}")
        } else {
            format!("{whole}+{rem}/{den}")
        }
    }
}

impl PartialOrd for DyadicFraction {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for DyadicFraction {
    fn cmp(&self, other: &Self) -> Ordering {
        let d = self.log2_den.max(other.log2_den);
        let a = (self.num as i128) << (d - self.log2_den);
        let b = (other.num as i128) << (d - other.log2_den);
        a.cmp(&b)
    }
}

impl Add for DyadicFraction {
    type Output = DyadicFraction;
    fn add(self, other: Self) -> Self {
        let d = self.log2_den.max(other.log2_den);
        let a = self.num << (d - self.log2_den);
        let b = other.num << (d - other.log2_den);
        DyadicFraction::new(a + b, d)
    }
}

impl Sub for DyadicFraction {
    type Output = DyadicFraction;
    fn sub(self, other: Self) -> Self {
        self + (-other)
    }
}

impl Neg for DyadicFraction {
    type Output = DyadicFraction;
    fn neg(self) -> Self {
        DyadicFraction { num: -self.num, log2_den: self.log2_den }
    }
}

impl fmt::Display for DyadicFraction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.log2_den == 0 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}", self.num, 1i64 << self.log2_den)
        }
    }
}

// ---------------------------------------------------------------------------
// Valuation
// ---------------------------------------------------------------------------

impl Valuation {
    pub fn finite(num: i64, log2_den: u32) -> Self {
        Valuation::Finite(DyadicFraction::new(num, log2_den))
    }

    pub fn from_int(n: i64) -> Self {
        Valuation::Finite(DyadicFraction::from_int(n))
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, Valuation::Infinite)
    }

    pub fn as_fraction(&self) -> Option<DyadicFraction> {
        match self {
            Valuation::Finite(r) => Some(*r),
            Valuation::Infinite => None,
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Valuation::Finite(r) => r.to_f64(),
            Valuation::Infinite => f64::INFINITY,
        }
    }
}

impl PartialOrd for Valuation {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Valuation {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Valuation::Infinite, Valuation::Infinite) => Ordering::Equal,
            (Valuation::Infinite, _) => Ordering::Greater,
            (_, Valuation::Infinite) => Ordering::Less,
            (Valuation::Finite(a), Valuation::Finite(b)) => a.cmp(b),
        }
    }
}

impl Add for Valuation {
    type Output = Valuation;
    fn add(self, other: Self) -> Self {
        match (self, other) {
            (Valuation::Finite(a), Valuation::Finite(b)) => Valuation::Finite(a + b),
            _ => Valuation::Infinite,
        }
    }
}

impl fmt::Display for Valuation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Valuation::Finite(r) => write!(f, "{r}"),
            Valuation::Infinite => write!(f, "+inf"),
        }
    }
}

// ---------------------------------------------------------------------------
// Dyadic
// ---------------------------------------------------------------------------

impl Dyadic {
    pub fn new(mut num: BigInt, mut denom_exp: u32) -> Self {
        if num.is_zero() {
            return Dyadic { num, denom_exp: 0 };
        }
        while denom_exp > 0 && !num.bit(0) {
            num >>= 1;
            denom_exp -= 1;
        }
        Dyadic { num, denom_exp }
    }

    pub fn from_int(n: i64) -> Self {
        Dyadic::new(BigInt::from(n), 0)
    }

    pub fn num(&self) -> &BigInt {
        &self.num
    }

    pub fn denom_exp(&self) -> u32 {
        self.denom_exp
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn to_f64(&self) -> f64 {
        self.num.to_f64().unwrap_or(f64::NAN) / 2f64.powi(self.denom_exp as i32)
    }

    /// `v₂(a/2^K) = v₂(a) − K`.
    pub fn v2(&self) -> Valuation {
        match self.num.trailing_zeros() {
            None => Valuation::Infinite,
            Some(t) => Valuation::from_int(t as i64 - self.denom_exp as i64),
        }
    }
}

impl Mul for &Dyadic {
    type Output = Dyadic;
    fn mul(self, other: &Dyadic) -> Dyadic {
        Dyadic::new(&self.num * &other.num, self.denom_exp + other.denom_exp)
    }
}

impl fmt::Display for Dyadic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.denom_exp == 0 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/2^{}", self.num, self.denom_exp)
        }
    }
}

impl std::str::FromStr for Dyadic {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let parse_int = |t: &str| -> Result<BigInt> {
            t.trim().parse::<BigInt>().map_err(|e| Error::Parse {
                pos: t.to_string(),
                msg: format!("bad integer: {e}"),
            })
        };
        match s.split_once('/') {
            None => Ok(Dyadic::new(parse_int(s)?, 0)),
            Some((a, d)) => {
                let d = d.trim();
                let exp = d.strip_prefix("2^").ok_or_else(|| Error::Parse {
                    pos: s.to_string(),
                    msg: "denominator must be 2^K".into(),
                })?;
                let k: u32 = exp.parse().map_err(|e| Error::Parse {
                    pos: s.to_string(),
                    msg: format!("bad exponent: {e}"),
                })?;
                Ok(Dyadic::new(parse_int(a)?, k))
            }
        }
    }
}

impl Serialize for Dyadic {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Dyadic {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(|e: Error| D::Error::custom(e.to_string()))
    }
}

// ---------------------------------------------------------------------------
// Cyclotomic: construction and canonical form
// ---------------------------------------------------------------------------

fn is_even(c: &BigInt) -> bool {
    !c.bit(0)
}

impl Cyclotomic {
    /// Builds `2^{−denom_exp} Σ a_j ζ^j` at the given level and reduces it.
    pub fn from_parts(level: u8, denom_exp: u32, coeffs: Vec<BigInt>) -> Result<Self> {
        if level > MAX_LEVEL {
            return Err(Error::LevelCap(level, MAX_LEVEL));
        }
        if coeffs.len() != 1usize << level {
            return Err(Error::InvalidParameter(format!(
                "level {} needs {} coefficients, got {}",
                level,
                1usize << level,
                coeffs.len()
            )));
        }
        let mut v = Cyclotomic { level, denom_exp, coeffs };
        v.reduce();
        Ok(v)
    }

    fn new_reduced(level: u8, denom_exp: u32, coeffs: Vec<BigInt>) -> Self {
        debug_assert_eq!(coeffs.len(), 1usize << level);
        let mut v = Cyclotomic { level, denom_exp, coeffs };
        v.reduce();
        v
    }

    fn reduce(&mut self) {
        if self.coeffs.iter().all(BigInt::is_zero) {
            self.level = 0;
            self.denom_exp = 0;
            self.coeffs = vec![BigInt::zero()];
            return;
        }
        // Demote the level while all odd-index coefficients vanish
        // (ζ_d² = ζ_{d−1}, so even indices are exactly the lower ring).
        while self.level > 0 && self.coeffs.iter().skip(1).step_by(2).all(BigInt::is_zero) {
            self.coeffs = self.coeffs.iter().step_by(2).cloned().collect();
            self.level -= 1;
        }
        // Move common factors of two out of the denominator.
        while self.denom_exp > 0 && self.coeffs.iter().all(is_even) {
            for c in &mut self.coeffs {
                *c >>= 1;
            }
            self.denom_exp -= 1;
        }
    }

    pub fn zero() -> Self {
        Cyclotomic { level: 0, denom_exp: 0, coeffs: vec![BigInt::zero()] }
    }

    pub fn one() -> Self {
        Cyclotomic::from_int(1)
    }

    pub fn from_int(n: i64) -> Self {
        Cyclotomic { level: 0, denom_exp: 0, coeffs: vec![BigInt::from(n)] }
    }

    pub fn from_bigint(n: BigInt) -> Self {
        Cyclotomic { level: 0, denom_exp: 0, coeffs: vec![n] }
    }

    /// The dyadic rational `num / 2^denom_exp`.
    pub fn from_dyadic(num: BigInt, denom_exp: u32) -> Self {
        Cyclotomic::new_reduced(0, denom_exp, vec![num])
    }

    /// `ζ_level^j = exp(iπ j / 2^level)`, canonicalized (so e.g. `j` even
    /// demotes the level and `j = 2^level` gives `−1` at level 0).
    pub fn root_of_unity(j: i64, level: u8) -> Result<Self> {
        if level > MAX_LEVEL {
            return Err(Error::LevelCap(level, MAX_LEVEL));
        }
        let l = 1i64 << level;
        let e = j.rem_euclid(2 * l);
        let (idx, sign) = if e < l { (e, 1) } else { (e - l, -1) };
        let mut coeffs = vec![BigInt::zero(); l as usize];
        coeffs[idx as usize] = BigInt::from(sign);
        Ok(Cyclotomic::new_reduced(level, 0, coeffs))
    }

    /// The imaginary unit `i = exp(iπ/2)`.
    pub fn i_unit() -> Self {
        Cyclotomic::root_of_unity(1, 1).expect("level 1 is always allowed")
    }

    /// `exp(iπ j / 2^d)`.
    pub fn exp_i_pi(j: i64, d: u8) -> Result<Self> {
        Cyclotomic::root_of_unity(j, d)
    }

    /// `cos(π j / 2^d) = (ζ^j + ζ^{−j}) / 2`.
    pub fn cos_pi(j: i64, d: u8) -> Result<Self> {
        let z = Cyclotomic::root_of_unity(j, d)?;
        let zc = Cyclotomic::root_of_unity(-j, d)?;
        Ok((&z + &zc).mul_pow2(-1))
    }

    /// `sin(π j / 2^d) = (ζ^j − ζ^{−j}) / 2i`.
    pub fn sin_pi(j: i64, d: u8) -> Result<Self> {
        let z = Cyclotomic::root_of_unity(j, d)?;
        let zc = Cyclotomic::root_of_unity(-j, d)?;
        let minus_i = Cyclotomic::root_of_unity(-1, 1)?;
        Ok((&(&z - &zc) * &minus_i).mul_pow2(-1))
    }

    /// `1/√2 = cos(π/4)`.
    pub fn inv_sqrt2() -> Self {
        Cyclotomic::cos_pi(1, 2).expect("level 2 is always allowed")
    }

    pub fn half() -> Self {
        Cyclotomic::from_dyadic(BigInt::from(1), 1)
    }

    pub fn level(&self) -> u8 {
        self.level
    }

    pub fn denom_exp(&self) -> u32 {
        self.denom_exp
    }

    pub fn coeffs(&self) -> &[BigInt] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(BigInt::is_zero)
    }

    pub fn is_one(&self) -> bool {
        self.level == 0 && self.denom_exp == 0 && self.coeffs[0] == BigInt::from(1)
    }

    pub fn is_rational(&self) -> bool {
        self.level == 0
    }

    pub fn is_real(&self) -> bool {
        *self == self.conj()
    }

    /// The rational value when the level is 0.
    pub fn as_dyadic(&self) -> Option<Dyadic> {
        if self.level == 0 {
            Some(Dyadic::new(self.coeffs[0].clone(), self.denom_exp))
        } else {
            None
        }
    }

    // -- representation changes ---------------------------------------------

    /// Coefficients re-indexed at a level `d ≥ self.level` (index `j ↦ j·2^Δ`).
    pub(crate) fn coeffs_at_level(&self, d: u8) -> Vec<BigInt> {
        debug_assert!(d >= self.level);
        let shift = (d - self.level) as usize;
        let mut out = vec![BigInt::zero(); 1usize << d];
        for (j, c) in self.coeffs.iter().enumerate() {
            if !c.is_zero() {
                out[j << shift] = c.clone();
            }
        }
        out
    }

    /// Multiplies by `2^e` (negative `e` divides).
    pub fn mul_pow2(&self, e: i64) -> Self {
        if self.is_zero() {
            return Cyclotomic::zero();
        }
        let mut out = self.clone();
        if e >= 0 {
            let e = e as u32;
            if out.denom_exp >= e {
                out.denom_exp -= e;
            } else {
                let up = e - out.denom_exp;
                out.denom_exp = 0;
                for c in &mut out.coeffs {
                    *c <<= up;
                }
            }
        } else {
            out.denom_exp += (-e) as u32;
        }
        out.reduce();
        out
    }

    /// Multiplies by the exact integer `n`.
    pub fn scale(&self, n: &BigInt) -> Self {
        let coeffs = self.coeffs.iter().map(|c| c * n).collect();
        Cyclotomic::new_reduced(self.level, self.denom_exp, coeffs)
    }

    /// Multiplies by `i^m` (cheap coefficient rotation).
    pub fn mul_i_pow(&self, m: u8) -> Self {
        match m % 4 {
            0 => self.clone(),
            2 => -self,
            m => {
                let i_pow = Cyclotomic::root_of_unity(m as i64, 1).unwrap();
                self * &i_pow
            }
        }
    }

    pub fn pow(&self, e: u32) -> Self {
        let mut acc = Cyclotomic::one();
        let mut base = self.clone();
        let mut e = e;
        while e > 0 {
            if e & 1 == 1 {
                acc = &acc * &base;
            }
            e >>= 1;
            if e > 0 {
                base = &base * &base;
            }
        }
        acc
    }

    // -- conjugation, sigma maps, norm, valuation ---------------------------

    /// Complex conjugation: `ζ^j ↦ ζ^{−j} = −ζ^{2^d − j}`.
    pub fn conj(&self) -> Self {
        let l = self.coeffs.len();
        let mut out = vec![BigInt::zero(); l];
        out[0] = self.coeffs[0].clone();
        for j in 1..l {
            if !self.coeffs[j].is_zero() {
                out[l - j] = -self.coeffs[j].clone();
            }
        }
        Cyclotomic::new_reduced(self.level, self.denom_exp, out)
    }

    /// The map `σ_k : Σ a_j ζ^j ↦ Σ a_j ζ^{jk}` for odd `k`.
    ///
    /// `σ_1` is the identity and `σ_{−1}` is complex conjugation; each `σ_k`
    /// is a ring homomorphism and `σ_k ∘ σ_j = σ_{kj}`.
    pub fn sigma(&self, k: i64) -> Result<Self> {
        if k.rem_euclid(2) == 0 {
            return Err(Error::SigmaEven(k));
        }
        let l = self.coeffs.len() as i64;
        let modulus = 2 * l;
        let mut out = vec![BigInt::zero(); l as usize];
        for (j, c) in self.coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let e = (j as i64).checked_mul(k).expect("exponent overflow").rem_euclid(modulus);
            if e < l {
                out[e as usize] += c;
            } else {
                out[(e - l) as usize] -= c;
            }
        }
        Ok(Cyclotomic::new_reduced(self.level, self.denom_exp, out))
    }

    /// The norm at the value's own (minimal) level; see [`Self::norm_at_level`].
    pub fn norm(&self) -> Dyadic {
        self.norm_at_level(self.level).expect("own level is valid")
    }

    /// `N_d(x) = ∏_{k=0}^{2^d−1} σ_{2k+1}(x)` computed at level `d`, always a
    /// rational `a/2^K`. `N_0` is the identity on rationals and
    /// `N_{d+1}(x) = N_d(x)²` for `x` of level ≤ `d`.
    pub fn norm_at_level(&self, d: u8) -> Result<Dyadic> {
        if d < self.level {
            return Err(Error::InvalidParameter(format!(
                "norm level {} below value level {}",
                d, self.level
            )));
        }
        if d > MAX_LEVEL {
            return Err(Error::LevelCap(d, MAX_LEVEL));
        }
        if self.is_zero() {
            return Ok(Dyadic::new(BigInt::zero(), 0));
        }
        let promoted = Cyclotomic::new_reduced(d, self.denom_exp, self.coeffs_at_level(d));
        let mut acc = promoted.clone();
        for k in 1..(1i64 << d) {
            acc = &acc * &promoted.sigma(2 * k + 1)?;
        }
        let rat = acc
            .as_dyadic()
            .ok_or_else(|| Error::Internal("norm did not reduce to a rational".into()))?;
        Ok(rat)
    }

    /// The dyadic valuation `v₂`, computed by exact iterated division by
    /// `α_d = 1 − ζ` (using `2/(1−ζ) = Σ_j ζ^j`); `v₂(0) = +∞`.
    ///
    /// Equivalent to `v₂(N_d(x))/2^d` (see [`Self::v2_via_norm`], which the
    /// property suite checks against this one) but runs in `O(4^d)` ring
    /// operations instead of a `2^d`-fold product of conjugates.
    pub fn v2(&self) -> Valuation {
        if self.is_zero() {
            return Valuation::Infinite;
        }
        let l = self.coeffs.len();
        let mut a = self.coeffs.clone();
        let mut int_part: i64 = -(self.denom_exp as i64);
        // Strip whole factors of two (present only when denom_exp = 0).
        while a.iter().all(is_even) {
            for c in &mut a {
                *c >>= 1;
            }
            int_part += 1;
        }
        // Divide by α = 1 − ζ while the residue Σ a_j mod 2 vanishes.
        // Some coefficient is odd, so v₂ of the integer part is < 1 and the
        // loop runs at most 2^d − 1 times. One division step is
        // a ← a · (Σ_j ζ^j) / 2, i.e. (a·β)_m = 2·prefix_m − S, halved.
        let mut t: i64 = 0;
        loop {
            let odd_sum = a.iter().fold(false, |p, c| p ^ c.bit(0));
            if odd_sum {
                break;
            }
            let total: BigInt = a.iter().sum();
            let half_total: BigInt = &total >> 1;
            let mut prefix = BigInt::zero();
            let mut next = Vec::with_capacity(l);
            for c in &a {
                prefix += c;
                next.push(&prefix - &half_total);
            }
            a = next;
            t += 1;
            debug_assert!(t < l as i64, "α-division loop exceeded its bound");
        }
        Valuation::finite(int_part * (1i64 << self.level) + t, self.level as u32)
    }

    /// `v₂` via the norm route `v₂(N_d(x))/2^d`.
    pub fn v2_via_norm(&self) -> Valuation {
        let n = self.norm();
        match n.v2() {
            Valuation::Infinite => Valuation::Infinite,
            Valuation::Finite(r) => {
                debug_assert!(r.is_integer());
                Valuation::finite(r.num(), self.level as u32)
            }
        }
    }

    /// `x · conj(x) = |x|²`, an exact real value.
    pub fn abs_sq(&self) -> Self {
        self * &self.conj()
    }

    // -- numeric evaluation --------------------------------------------------

    /// Evaluates to double-precision `(re, im)`.
    pub fn to_complex(&self) -> (f64, f64) {
        let l = self.coeffs.len();
        let scale = 2f64.powi(-(self.denom_exp as i32));
        let step = std::f64::consts::PI / l as f64;
        let mut re = 0.0;
        let mut im = 0.0;
        for (j, c) in self.coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let cf = c.to_f64().unwrap_or(f64::NAN);
            let angle = step * j as f64;
            re += cf * angle.cos();
            im += cf * angle.sin();
        }
        (re * scale, im * scale)
    }

    /// Magnitude of the float evaluation (test/reporting convenience).
    pub fn abs_f64(&self) -> f64 {
        let (re, im) = self.to_complex();
        re.hypot(im)
    }

    /// Exact sign of a real value. Uses the exact zero test, then the float
    /// evaluation with a rigorous error margin; values inside the margin are
    /// reported as an internal error rather than guessed.
    pub fn sign_of_real(&self) -> Result<Ordering> {
        if !self.is_real() {
            return Err(Error::InvalidParameter("sign of a non-real value".into()));
        }
        if self.is_zero() {
            return Ok(Ordering::Equal);
        }
        let (re, _) = self.to_complex();
        let coeff_mass: f64 = self
            .coeffs
            .iter()
            .map(|c| c.abs().to_f64().unwrap_or(f64::INFINITY))
            .sum();
        let margin = coeff_mass * 2f64.powi(-(self.denom_exp as i32)) * 1e-14;
        if re > margin {
            Ok(Ordering::Greater)
        } else if re < -margin {
            Ok(Ordering::Less)
        } else {
            Err(Error::Internal(format!(
                "cannot determine the sign of {self} within float margins"
            )))
        }
    }

    /// `|x|` for exact real `x` (spectrum entries are absolute values).
    pub fn abs_real(&self) -> Result<Self> {
        match self.sign_of_real()? {
            Ordering::Less => Ok(-self),
            _ => Ok(self.clone()),
        }
    }
}

// ---------------------------------------------------------------------------
// Arithmetic operators
// ---------------------------------------------------------------------------

fn add_impl(a: &Cyclotomic, b: &Cyclotomic) -> Cyclotomic {
    let d = a.level.max(b.level);
    let k = a.denom_exp.max(b.denom_exp);
    let mut ca = a.coeffs_at_level(d);
    let cb = b.coeffs_at_level(d);
    let sa = k - a.denom_exp;
    let sb = k - b.denom_exp;
    for (x, y) in ca.iter_mut().zip(cb) {
        if sa > 0 {
            *x <<= sa;
        }
        let mut y = y;
        if sb > 0 {
            y <<= sb;
        }
        *x += y;
    }
    Cyclotomic::new_reduced(d, k, ca)
}

fn mul_impl(a: &Cyclotomic, b: &Cyclotomic) -> Cyclotomic {
    if a.is_zero() || b.is_zero() {
        return Cyclotomic::zero();
    }
    let d = a.level.max(b.level);
    let l = 1usize << d;
    let ca = a.coeffs_at_level(d);
    let cb = b.coeffs_at_level(d);
    let mut out = vec![BigInt::zero(); l];
    for (i, ai) in ca.iter().enumerate() {
        if ai.is_zero() {
            continue;
        }
        for (j, bj) in cb.iter().enumerate() {
            if bj.is_zero() {
                continue;
            }
            let m = i + j;
            let prod = ai * bj;
            if m < l {
                out[m] += prod;
            } else {
                out[m - l] -= prod; // ζ^{2^d} = −1 fold
            }
        }
    }
    Cyclotomic::new_reduced(d, a.denom_exp + b.denom_exp, out)
}

impl Add for &Cyclotomic {
    type Output = Cyclotomic;
    fn add(self, other: &Cyclotomic) -> Cyclotomic {
        add_impl(self, other)
    }
}

impl Sub for &Cyclotomic {
    type Output = Cyclotomic;
    fn sub(self, other: &Cyclotomic) -> Cyclotomic {
        add_impl(self, &-other)
    }
}

impl Mul for &Cyclotomic {
    type Output = Cyclotomic;
    fn mul(self, other: &Cyclotomic) -> Cyclotomic {
        mul_impl(self, other)
    }
}

impl Neg for &Cyclotomic {
    type Output = Cyclotomic;
    fn neg(self) -> Cyclotomic {
        let coeffs = self.coeffs.iter().map(|c| -c).collect();
        // Negation preserves canonical form; skip the reduce pass.
        Cyclotomic { level: self.level, denom_exp: self.denom_exp, coeffs }
    }
}

impl Add for Cyclotomic {
    type Output = Cyclotomic;
    fn add(self, other: Cyclotomic) -> Cyclotomic {
        &self + &other
    }
}

impl Sub for Cyclotomic {
    type Output = Cyclotomic;
    fn sub(self, other: Cyclotomic) -> Cyclotomic {
        &self - &other
    }
}

impl Mul for Cyclotomic {
    type Output = Cyclotomic;
    fn mul(self, other: Cyclotomic) -> Cyclotomic {
        &self * &other
    }
}

impl Neg for Cyclotomic {
    type Output = Cyclotomic;
    fn neg(self) -> Cyclotomic {
        -&self
    }
}

// ---------------------------------------------------------------------------
// Display & serialization
// ---------------------------------------------------------------------------

impl fmt::Display for Cyclotomic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut terms = String::new();
        for (j, c) in self.coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let sign = if c.is_negative() { " - " } else { " + " };
            if !terms.is_empty() {
                terms.push_str(sign);
            } else if c.is_negative() {
                terms.push('-');
            }
            let mag = c.abs();
            let show_coeff = j == 0 || mag != BigInt::from(1);
            if show_coeff {
                terms.push_str(&mag.to_string());
            }
            if j > 0 {
                if show_coeff {
                    terms.push('·');
                }
                if self.level == 1 {
                    terms.push('i');
                } else {
                    terms.push('ζ');
                    if j > 1 {
                        terms.push_str(&format!("^{j}"));
                    }
                }
            }
        }
        if self.denom_exp == 0 {
            write!(f, "{terms}")
        } else if self.coeffs.iter().filter(|c| !c.is_zero()).count() > 1 {
            write!(f, "({terms})/2^{}", self.denom_exp)
        } else {
            write!(f, "{terms}/2^{}", self.denom_exp)
        }
    }
}

impl fmt::Debug for Cyclotomic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Cyclotomic[d={}] {}", self.level, self)
    }
}

#[derive(Serialize, Deserialize)]
struct CycJson {
    d: u8,
    k: u32,
    coeffs: Vec<String>,
}

impl Serialize for Cyclotomic {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        CycJson {
            d: self.level,
            k: self.denom_exp,
            coeffs: self.coeffs.iter().map(|c| c.to_string()).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Cyclotomic {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = CycJson::deserialize(d)?;
        let coeffs = raw
            .coeffs
            .iter()
            .map(|s| s.parse::<BigInt>().map_err(|e| D::Error::custom(format!("bad coefficient {s}: {e}"))))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Cyclotomic::from_parts(raw.d, raw.k, coeffs).map_err(|e| D::Error::custom(e.to_string()))
    }
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;

    fn zeta8() -> Cyclotomic {
        Cyclotomic::root_of_unity(1, 2).unwrap()
    }

    #[test]
    fn one_plus_zeta8_times_one_minus_zeta8_is_one_minus_i() {
        let one = Cyclotomic::one();
        let z = zeta8();
        let prod = &(&one + &z) * &(&one - &z);
        let expect = &one - &Cyclotomic::i_unit();
        assert_eq!(prod, expect);
        assert_eq!(prod.level(), 1, "level drops to 1");
    }

    #[test]
    fn conj_of_zeta8_is_minus_zeta8_cubed() {
        let z = zeta8();
        let expect = -Cyclotomic::root_of_unity(3, 2).unwrap();
        assert_eq!(z.conj(), expect);
    }

    #[test]
    fn sigma_one_is_identity_and_sigma_minus_one_is_conj() {
        let x = Cyclotomic::from_parts(
            3,
            2,
            vec![3, -1, 0, 7, 2, 0, 0, 5].into_iter().map(BigInt::from).collect(),
        )
        .unwrap();
        assert_eq!(x.sigma(1).unwrap(), x);
        assert_eq!(x.sigma(-1).unwrap(), x.conj());
    }

    #[test]
    fn sigma_composition() {
        let x = Cyclotomic::from_parts(
            3,
            1,
            vec![1, 2, 3, 4, 5, 6, 7, 8].into_iter().map(BigInt::from).collect(),
        )
        .unwrap();
        let lhs = x.sigma(5).unwrap().sigma(3).unwrap();
        let rhs = x.sigma(15).unwrap();
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn sigma_rejects_even_k() {
        assert!(zeta8().sigma(2).is_err());
    }

    #[test]
    fn norm_of_roots_of_unity_is_one() {
        for d in 1..=4u8 {
            for j in [1i64, 3, 5] {
                let z = Cyclotomic::root_of_unity(j, d).unwrap();
                let n = z.norm_at_level(d).unwrap();
                assert_eq!(n, Dyadic::from_int(1), "N_{d}(ζ^{j})");
            }
        }
    }

    #[test]
    fn norm_of_one_minus_odd_root_is_two() {
        for d in 1..=4u8 {
            for j in 0..4i64 {
                let z = Cyclotomic::root_of_unity(2 * j + 1, d).unwrap();
                let x = &Cyclotomic::one() - &z;
                assert_eq!(x.norm_at_level(d).unwrap(), Dyadic::from_int(2));
            }
        }
    }

    #[test]
    fn norm_of_gaussian_integer() {
        // N_1(3+4i) = 3² + 4² = 25
        let x = Cyclotomic::from_parts(1, 0, vec![BigInt::from(3), BigInt::from(4)]).unwrap();
        assert_eq!(x.norm(), Dyadic::from_int(25));
    }

    #[test]
    fn v2_basics() {
        assert_eq!(Cyclotomic::zero().v2(), Valuation::Infinite);
        assert_eq!(Cyclotomic::from_int(12).v2(), Valuation::from_int(2));
        assert_eq!(Cyclotomic::inv_sqrt2().v2(), Valuation::finite(-1, 1));
        assert_eq!(Cyclotomic::from_dyadic(BigInt::from(3), 5).v2(), Valuation::from_int(-5));
    }

    #[test]
    fn v2_of_sin_cos() {
        // v₂(sin(πk/2^d)) = v₂(cos(πk/2^d)) = 1/2^{d−1} − 1 for odd k
        for d in 2..=4u8 {
            let expect = Valuation::finite(1 - (1i64 << (d - 1)), (d - 1) as u32);
            for k in [1i64, 3, 5, 7] {
                let s = Cyclotomic::sin_pi(k, d).unwrap();
                let c = Cyclotomic::cos_pi(k, d).unwrap();
                assert_eq!(s.v2(), expect, "sin(π{k}/2^{d})");
                assert_eq!(c.v2(), expect, "cos(π{k}/2^{d})");
                assert_eq!(s.v2_via_norm(), expect);
            }
        }
    }

    #[test]
    fn v2_matches_norm_route() {
        let samples = [
            Cyclotomic::from_int(6),
            &Cyclotomic::one() + &zeta8(),
            &Cyclotomic::from_int(2) - &Cyclotomic::root_of_unity(3, 3).unwrap(),
            Cyclotomic::from_parts(2, 3, vec![2, -6, 4, 2].into_iter().map(BigInt::from).collect())
                .unwrap(),
        ];
        for x in &samples {
            assert_eq!(x.v2(), x.v2_via_norm(), "fast vs norm valuation for {x}");
        }
    }

    #[test]
    fn trig_constants() {
        assert!(Cyclotomic::exp_i_pi(0, 3).unwrap().is_one());
        let c = Cyclotomic::cos_pi(1, 2).unwrap();
        let direct = (&zeta8() + &zeta8().conj()).mul_pow2(-1);
        assert_eq!(c, direct);
        let (re, im) = c.to_complex();
        assert!((re - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        assert!(im.abs() < 1e-15);
    }

    #[test]
    fn unit_u_j_and_inverse_are_ring_elements() {
        // u_j = (1 − ζ^{2j−1})/(1 − ζ) = Σ_{m=0}^{2j−2} ζ^m, and with
        // j'(2j−1) ≡ 1 mod 2^{d+1} the inverse is the analogous sum in
        // ζ^{2j-1}; their product must be exactly 1. Here d = 3, j = 2.
        let d = 3u8;
        let geom = |base: i64, terms: i64| -> Cyclotomic {
            let mut acc = Cyclotomic::zero();
            for m in 0..terms {
                acc = &acc + &Cyclotomic::root_of_unity(base * m, d).unwrap();
            }
            acc
        };
        let u = geom(1, 3); // 1 + ζ + ζ², base exponent 2j−1 = 3
        // 3·11 = 33 ≡ 1 (mod 16)
        let u_inv = geom(3, 11);
        assert!((&u * &u_inv).is_one());
    }

    #[test]
    fn reduced_form_invariants() {
        let x = Cyclotomic::from_parts(
            2,
            4,
            vec![2, 6, -4, 8].into_iter().map(BigInt::from).collect(),
        )
        .unwrap();
        assert!(x.denom_exp() == 0 || x.coeffs().iter().any(|c| c.bit(0)));
        // 2·(1/2) reduces all the way back to 1
        let two = Cyclotomic::from_int(2);
        assert!((&two * &Cyclotomic::half()).is_one());
        // a pure level-2 value with only even indices demotes
        let y = Cyclotomic::from_parts(2, 0, vec![0, 0, 1, 0].into_iter().map(BigInt::from).collect())
            .unwrap();
        assert_eq!(y.level(), 1);
        assert_eq!(y, Cyclotomic::i_unit());
    }

    #[test]
    fn json_round_trip() {
        let x = Cyclotomic::from_parts(
            2,
            1,
            vec![1, 0, -1, 3].into_iter().map(BigInt::from).collect(),
        )
        .unwrap();
        let s = serde_json::to_string(&x).unwrap();
        assert!(s.contains("\"d\":2"));
        let back: Cyclotomic = serde_json::from_str(&s).unwrap();
        assert_eq!(x, back);
        let r = Dyadic::new(BigInt::from(-5), 3);
        let rs = serde_json::to_string(&r).unwrap();
        assert_eq!(rs, "\"-5/2^3\"");
        let rb: Dyadic = serde_json::from_str(&rs).unwrap();
        assert_eq!(r, rb);
    }

    #[test]
    fn valuation_ordering_and_sum() {
        let half = Valuation::finite(1, 1);
        let one = Valuation::from_int(1);
        assert!(half < one);
        assert!(one < Valuation::Infinite);
        assert_eq!(half + half, one);
        assert_eq!(one + Valuation::Infinite, Valuation::Infinite);
        assert_eq!(DyadicFraction::new(17, 3).mixed_string(), "2+1/8");
        assert_eq!(DyadicFraction::new(-1, 1).mixed_string(), "-1/2");
    }
}
