//! Exact state vectors, named resource-state constructors, Pauli spectra,
//! stabilizer nullity ν, the dyadic monotone μ₂, and the ring-level
//! obstruction.
//!
//! Amplitudes are [`Cyclotomic`] values, so every expectation, projection
//! probability, and monotone is computed without floating point. States are
//! allowed to be unnormalized (projections do not renormalize — the square
//! root of a probability can leave the ring); the exact `⟨ψ|ψ⟩` certificate
//! is carried along and every monotone here is scale-invariant.

use std::cmp::Ordering;
use std::collections::HashMap;

use num_bigint::BigInt;
use num_traits::Zero;
use rayon::prelude::*;

use crate::cyclotomic::{Cyclotomic, DyadicFraction, Valuation};
use crate::pauli::PauliOperator;
use crate::{Error, Result, MAX_QUBITS, SPECTRUM_CAP};

/// An n-qubit state vector of exact cyclotomic amplitudes with its exact
/// norm certificate. Qubit `q` is bit `n−1−q` of the basis index (qubit 0 is
/// the leftmost tensor factor).
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct ExactState {
    n: usize,
    amps: Vec<Cyclotomic>,
    norm_sq: Cyclotomic,
}

/// The exact Pauli spectrum: absolute expectations with multiplicities,
/// sorted by decreasing value, plus the stabilizer count and derived ν.
#[derive(Clone, Debug)]
pub struct SpectrumReport {
    entries: Vec<(Cyclotomic, usize)>,
    stabilizer_count: usize,
    nullity: u32,
}

impl SpectrumReport {
    /// `(value, multiplicity)` pairs, largest value first.
    pub fn entries(&self) -> &[(Cyclotomic, usize)] {
        &self.entries
    }

    pub fn stabilizer_count(&self) -> usize {
        self.stabilizer_count
    }

    pub fn nullity(&self) -> u32 {
        self.nullity
    }

    pub fn total_multiplicity(&self) -> usize {
        self.entries.iter().map(|(_, m)| m).sum()
    }
}

// ---------------------------------------------------------------------------
// Accumulator for expectation sums (avoids per-term canonicalization churn)
// ---------------------------------------------------------------------------

struct CycSum {
    level: u8,
    denom: u32,
    coeffs: Vec<BigInt>,
}

impl CycSum {
    fn new(level: u8, denom: u32) -> Self {
        CycSum { level, denom, coeffs: vec![BigInt::zero(); 1usize << level] }
    }

    /// Adds a canonical value of level ≤ self.level and denominator exponent
    /// ≤ self.denom.
    fn add(&mut self, v: &Cyclotomic) {
        debug_assert!(v.level() <= self.level && v.denom_exp() <= self.denom);
        let shift = (self.level - v.level()) as usize;
        let scale = self.denom - v.denom_exp();
        for (j, c) in v.coeffs().iter().enumerate() {
            if !c.is_zero() {
                self.coeffs[j << shift] += c << scale;
            }
        }
    }

    fn finish(self) -> Cyclotomic {
        Cyclotomic::from_parts(self.level, self.denom, self.coeffs)
            .expect("accumulator dimensions are valid")
    }
}

// ---------------------------------------------------------------------------
// Construction
// ---------------------------------------------------------------------------

impl ExactState {
    pub fn from_amps(n: usize, amps: Vec<Cyclotomic>) -> Result<Self> {
        if n == 0 || n > MAX_QUBITS {
            return Err(Error::QubitCap(n, MAX_QUBITS));
        }
        if amps.len() != 1usize << n {
            return Err(Error::SizeMismatch(amps.len(), 1usize << n));
        }
        let norm_sq = norm_sq_of(&amps);
        if norm_sq.is_zero() {
            return Err(Error::Annihilation("zero state vector".into()));
        }
        Ok(ExactState { n, amps, norm_sq })
    }

    /// The computational basis state for a bit string like `"011"`.
    pub fn ket(bits: &str) -> Result<Self> {
        let n = bits.chars().count();
        if n == 0 {
            return Err(Error::Parse { pos: bits.to_string(), msg: "empty ket".into() });
        }
        let mut idx: usize = 0;
        for ch in bits.chars() {
            idx <<= 1;
            match ch {
                '0' => {}
                '1' => idx |= 1,
                _ => {
                    return Err(Error::Parse {
                        pos: bits.to_string(),
                        msg: format!("ket bits must be 0/1, found '{ch}'"),
                    })
                }
            }
        }
        let mut amps = vec![Cyclotomic::zero(); 1usize << n];
        amps[idx] = Cyclotomic::one();
        ExactState::from_amps(n, amps)
    }

    /// `|+⟩^⊗n`.
    pub fn plus(n: usize) -> Result<Self> {
        ExactState::phased_plus(n, |_| Ok(Cyclotomic::one()))
    }

    /// `|+⟩^⊗n` with each basis amplitude multiplied by `phase(x)`.
    fn phased_plus(n: usize, phase: impl Fn(u64) -> Result<Cyclotomic>) -> Result<Self> {
        if n == 0 || n > MAX_QUBITS {
            return Err(Error::QubitCap(n, MAX_QUBITS));
        }
        let base = Cyclotomic::inv_sqrt2().pow(n as u32);
        let amps = (0..1u64 << n)
            .map(|x| Ok(&base * &phase(x)?))
            .collect::<Result<Vec<_>>>()?;
        ExactState::from_amps(n, amps)
    }

    /// `(|0⟩ + exp(iπj/2^d)|1⟩)/√2` — the rotation magic state.
    pub fn rot_plus(j: i64, d: u8) -> Result<Self> {
        ExactState::phased_plus(1, |x| {
            if x == 1 {
                Cyclotomic::root_of_unity(j, d)
            } else {
                Ok(Cyclotomic::one())
            }
        })
    }

    /// `|T⟩ = T|+⟩`.
    pub fn t_state() -> Self {
        ExactState::rot_plus(1, 2).expect("T state parameters are valid")
    }

    /// `|√T⟩`.
    pub fn sqrt_t_state() -> Self {
        ExactState::rot_plus(1, 3).expect("√T state parameters are valid")
    }

    /// `|+⟩^⊗n` with phase `exp(iπj/2^d)` on the all-ones component: the
    /// `C^{n−1}`-rotation family (`CnZ` at `(j,d) = (1,0)`, `CnS` at `(1,1)`,
    /// `CCS` at `n = 3, (1,1)`, …).
    pub fn controlled_phase_state(n: usize, j: i64, d: u8) -> Result<Self> {
        let all_ones = (1u64 << n) - 1;
        ExactState::phased_plus(n, |x| {
            if x == all_ones {
                Cyclotomic::root_of_unity(j, d)
            } else {
                Ok(Cyclotomic::one())
            }
        })
    }

    pub fn cs_state() -> Self {
        ExactState::controlled_phase_state(2, 1, 1).expect("CS state parameters are valid")
    }

    pub fn ccs_state() -> Self {
        ExactState::controlled_phase_state(3, 1, 1).expect("CCS state parameters are valid")
    }

    /// `|C^{n−1}Z⟩` on `n` qubits.
    pub fn cnz_state(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("CnZ requires n ≥ 1".into()));
        }
        ExactState::controlled_phase_state(n, 1, 0)
    }

    /// `|C^{n−1}S⟩` on `n` qubits.
    pub fn cns_state(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("CnS requires n ≥ 1".into()));
        }
        ExactState::controlled_phase_state(n, 1, 1)
    }

    /// `|W_n⟩ = W_n|+⟩^⊗n` where `W_n = Σ_x exp(iπ g(x)/4)|x⟩⟨x|` with
    /// `g(x) = (⊕ᵢ xᵢ) + Σᵢ xᵢ`; `g` is always even, so the amplitudes are
    /// Gaussian (ring level 1).
    pub fn w_state(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidParameter("W requires n ≥ 2".into()));
        }
        ExactState::phased_plus(n, |x| {
            let w = x.count_ones() as i64;
            let g = (w & 1) + w;
            Cyclotomic::root_of_unity(g, 2)
        })
    }

    /// `|QFT^a_n⟩ = 2^{−n/2} Σ_y exp(i2πay/2^n)|y⟩ = ⊗_{k=1}^n
    /// (|0⟩+e^{i2πa/2^k}|1⟩)/√2` (qubit k counts from the left).
    pub fn qft_state(a: i64, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("QFT requires n ≥ 1".into()));
        }
        // exp(i2πay/2^n) = exp(iπ·ay/2^{n−1})
        ExactState::phased_plus(n, |y| {
            Cyclotomic::root_of_unity(a.wrapping_mul(y as i64), (n - 1) as u8)
        })
    }

    /// The five-qubit state from two overlapping CCZ gates on qubits
    /// `{1,2,3}` and `{1,4,5}` applied to `|+⟩^⊗5`.
    pub fn ccz123145_state() -> Self {
        ExactState::phased_plus(5, |x| {
            let b = |q: usize| (x >> (5 - q)) & 1; // qubit q ∈ 1..=5
            let e = b(1) * b(2) * b(3) + b(1) * b(4) * b(5);
            Cyclotomic::root_of_unity(e as i64, 0)
        })
        .expect("fixed 5-qubit construction")
    }

    // -- accessors -----------------------------------------------------------

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn amps(&self) -> &[Cyclotomic] {
        &self.amps
    }

    pub fn amp(&self, idx: usize) -> &Cyclotomic {
        &self.amps[idx]
    }

    /// The exact norm certificate `⟨ψ|ψ⟩`.
    pub fn norm_sq(&self) -> &Cyclotomic {
        &self.norm_sq
    }

    pub fn is_unit_norm(&self) -> bool {
        self.norm_sq.is_one()
    }

    fn qubit_bit(&self, q: usize) -> Result<u64> {
        if q >= self.n {
            return Err(Error::IndexOutOfRange { index: q, n: self.n });
        }
        Ok(1u64 << (self.n - 1 - q))
    }

    // -- composition ---------------------------------------------------------

    pub fn tensor(&self, other: &ExactState) -> Result<ExactState> {
        let n = self.n + other.n;
        if n > MAX_QUBITS {
            return Err(Error::QubitCap(n, MAX_QUBITS));
        }
        let mut amps = Vec::with_capacity(1usize << n);
        for a in &self.amps {
            for b in &other.amps {
                amps.push(if a.is_zero() || b.is_zero() { Cyclotomic::zero() } else { a * b });
            }
        }
        Ok(ExactState { n, amps, norm_sq: &self.norm_sq * &other.norm_sq })
    }

    /// `⟨self|other⟩` exactly.
    pub fn inner_product(&self, other: &ExactState) -> Result<Cyclotomic> {
        if self.n != other.n {
            return Err(Error::SizeMismatch(self.n, other.n));
        }
        let mut acc = Cyclotomic::zero();
        for (a, b) in self.amps.iter().zip(&other.amps) {
            if !a.is_zero() && !b.is_zero() {
                acc = &acc + &(&a.conj() * b);
            }
        }
        Ok(acc)
    }

    /// True iff the states are proportional: `|⟨a|b⟩|² = ⟨a|a⟩⟨b|b⟩` exactly.
    pub fn equal_up_to_phase(&self, other: &ExactState) -> Result<bool> {
        let ip = self.inner_product(other)?;
        Ok(ip.abs_sq() == &self.norm_sq * &other.norm_sq)
    }

    /// Rescales to unit norm when the norm² is exactly a power of two
    /// (the only case where `1/√(⟨ψ|ψ⟩)` stays in the ring).
    pub fn renormalize(&self) -> Option<ExactState> {
        let d = self.norm_sq.as_dyadic()?;
        if d.is_zero() {
            return None;
        }
        // norm² = a / 2^K with a odd after reduction, unless K = 0 where a
        // may be a power of two. Power of two overall ⟺ a = 2^j.
        let tz = d.num().trailing_zeros()?;
        let num_mag = d.num().magnitude();
        if num_mag.bits() != tz + 1 || d.num().sign() == num_bigint::Sign::Minus {
            return None; // numerator not a positive power of two
        }
        // norm² = 2^{tz − K}; multiply amplitudes by 2^{−(tz−K)/2}.
        let e2 = tz as i64 - d.denom_exp() as i64;
        let amps: Vec<Cyclotomic> = if e2 % 2 == 0 {
            self.amps.iter().map(|a| a.mul_pow2(-e2 / 2)).collect()
        } else {
            let is2 = Cyclotomic::inv_sqrt2();
            self.amps.iter().map(|a| (a * &is2).mul_pow2(-(e2 - 1) / 2)).collect()
        };
        Some(ExactState { n: self.n, amps, norm_sq: Cyclotomic::one() })
    }

    // -- gates ----------------------------------------------------------------

    /// Applies a Clifford gate by exact amplitude update.
    /// Gates: `H S Sdg X Y Z` (one index), `CX CZ SWAP` (two indices).
    pub fn apply_clifford_gate(&mut self, gate: &str, qubits: &[usize]) -> Result<()> {
        match (gate, qubits) {
            ("H", &[q]) => self.apply_h(q),
            ("S", &[q]) => self.apply_phase(q, 1, 1),
            ("Sdg", &[q]) => self.apply_phase(q, -1, 1),
            ("X", &[q]) => self.apply_x(q),
            ("Y", &[q]) => self.apply_y(q),
            ("Z", &[q]) => self.apply_phase(q, 1, 0),
            ("CX", &[c, t]) if c != t => self.apply_cx(c, t),
            ("CZ", &[a, b]) if a != b => self.apply_controlled_phase(&[a, b], 1, 0),
            ("SWAP", &[a, b]) if a != b => self.apply_swap(a, b),
            _ => Err(Error::UnknownGate(format!("{gate} on {qubits:?}"))),
        }
    }

    pub fn apply_h(&mut self, q: usize) -> Result<()> {
        let bit = self.qubit_bit(q)?;
        let is2 = Cyclotomic::inv_sqrt2();
        for b in 0..self.amps.len() {
            if b as u64 & bit == 0 {
                let b1 = b | bit as usize;
                let a0 = self.amps[b].clone();
                let a1 = self.amps[b1].clone();
                self.amps[b] = &(&a0 + &a1) * &is2;
                self.amps[b1] = &(&a0 - &a1) * &is2;
            }
        }
        Ok(())
    }

    /// The diagonal rotation `exp(iπj/2^d)|1⟩⟨1|` on qubit `q` (`Z` at
    /// `(1,0)`, `S` at `(1,1)`, `T` at `(1,2)`, `RZ(j,d)` generally).
    pub fn apply_phase(&mut self, q: usize, j: i64, d: u8) -> Result<()> {
        let bit = self.qubit_bit(q)?;
        let z = Cyclotomic::root_of_unity(j, d)?;
        for b in 0..self.amps.len() {
            if b as u64 & bit != 0 && !self.amps[b].is_zero() {
                self.amps[b] = &self.amps[b] * &z;
            }
        }
        Ok(())
    }

    /// The phase `exp(iπj/2^d)` on components where all listed qubits are 1
    /// (CZ / CCZ / CS / CnZ / CnS gates).
    pub fn apply_controlled_phase(&mut self, qubits: &[usize], j: i64, d: u8) -> Result<()> {
        let mut mask = 0u64;
        for &q in qubits {
            mask |= self.qubit_bit(q)?;
        }
        let z = Cyclotomic::root_of_unity(j, d)?;
        for b in 0..self.amps.len() {
            if b as u64 & mask == mask && !self.amps[b].is_zero() {
                self.amps[b] = &self.amps[b] * &z;
            }
        }
        Ok(())
    }

    pub fn apply_x(&mut self, q: usize) -> Result<()> {
        let bit = self.qubit_bit(q)? as usize;
        for b in 0..self.amps.len() {
            if b & bit == 0 {
                self.amps.swap(b, b | bit);
            }
        }
        Ok(())
    }

    pub fn apply_y(&mut self, q: usize) -> Result<()> {
        let bit = self.qubit_bit(q)? as usize;
        for b in 0..self.amps.len() {
            if b & bit == 0 {
                let b1 = b | bit;
                let a0 = self.amps[b].clone();
                let a1 = self.amps[b1].clone();
                self.amps[b] = a1.mul_i_pow(3); // Y|1⟩ = −i|0⟩
                self.amps[b1] = a0.mul_i_pow(1); // Y|0⟩ = +i|1⟩
            }
        }
        Ok(())
    }

    pub fn apply_cx(&mut self, c: usize, t: usize) -> Result<()> {
        let cbit = self.qubit_bit(c)? as usize;
        let tbit = self.qubit_bit(t)? as usize;
        for b in 0..self.amps.len() {
            if b & cbit != 0 && b & tbit == 0 {
                self.amps.swap(b, b | tbit);
            }
        }
        Ok(())
    }

    pub fn apply_swap(&mut self, a: usize, b: usize) -> Result<()> {
        let abit = self.qubit_bit(a)? as usize;
        let bbit = self.qubit_bit(b)? as usize;
        for idx in 0..self.amps.len() {
            if idx & abit != 0 && idx & bbit == 0 {
                self.amps.swap(idx, idx ^ abit ^ bbit);
            }
        }
        Ok(())
    }

    /// Applies a Pauli operator exactly (including its phase).
    pub fn apply_pauli(&mut self, p: &PauliOperator) -> Result<()> {
        if p.n() != self.n {
            return Err(Error::SizeMismatch(p.n(), self.n));
        }
        let mut out = vec![Cyclotomic::zero(); self.amps.len()];
        for b in 0..self.amps.len() {
            if self.amps[b].is_zero() {
                continue;
            }
            let (b2, ph) = p.apply_to_basis(b as u64);
            out[b2 as usize] = self.amps[b].mul_i_pow(ph);
        }
        self.amps = out;
        Ok(())
    }

    // -- measurement-side primitives ------------------------------------------

    /// `(I ± P)/2 |ψ⟩` (unnormalized) together with the exact sandwich
    /// `⟨ψ|(I±P)/2|ψ⟩` (the outcome probability when `ψ` is unit-norm).
    pub fn project(&self, p: &PauliOperator, sign: i8) -> Result<(ExactState, Cyclotomic)> {
        if p.n() != self.n {
            return Err(Error::SizeMismatch(p.n(), self.n));
        }
        if !p.is_hermitian() {
            return Err(Error::NonHermitian(p.to_string()));
        }
        let x = p.x_bits();
        let mut amps = Vec::with_capacity(self.amps.len());
        for b in 0..self.amps.len() as u64 {
            let src = b ^ x;
            let (_, ph) = p.apply_to_basis(src);
            let mut term = self.amps[src as usize].mul_i_pow(ph);
            if sign < 0 {
                term = -term;
            }
            amps.push((&self.amps[b as usize] + &term).mul_pow2(-1));
        }
        let norm_sq = norm_sq_of(&amps);
        let prob = norm_sq.clone();
        Ok((ExactState { n: self.n, amps, norm_sq }, prob))
    }

    /// Exact +1 outcome probability and whether it is exactly 1/2.
    /// Requires a unit-norm state.
    pub fn measurement_probability(&self, p: &PauliOperator) -> Result<(Cyclotomic, bool)> {
        if !self.is_unit_norm() {
            return Err(Error::InvalidParameter(
                "measurement probability requires a unit-norm state".into(),
            ));
        }
        let (_, prob) = self.project(p, 1)?;
        let is_half = prob == Cyclotomic::half();
        Ok((prob, is_half))
    }

    /// Removes qubit `q` after verifying it exactly factorizes out
    /// (rank-1 check across the bipartition). The result may be
    /// unnormalized when the factored-out qubit carried weight that has no
    /// ring square root; callers compare with `equal_up_to_phase`.
    pub fn discard(&self, q: usize) -> Result<ExactState> {
        if self.n == 1 {
            return Err(Error::InvalidParameter("cannot discard the last qubit".into()));
        }
        let bit = self.qubit_bit(q)? as usize;
        let rest_len = self.amps.len() / 2;
        // index of (row i ∈ {0,1}, rest j) in the full vector
        let full_idx = |i: usize, j: usize| -> usize {
            let low = j & (bit - 1);
            let high = (j ^ low) << 1;
            high | (i * bit) | low
        };
        // rank-1: all columns proportional to a pivot column
        let mut pivot: Option<usize> = None;
        for j in 0..rest_len {
            if !self.amps[full_idx(0, j)].is_zero() || !self.amps[full_idx(1, j)].is_zero() {
                pivot = Some(j);
                break;
            }
        }
        let jp = pivot.ok_or_else(|| Error::Annihilation("zero state in discard".into()))?;
        let p0 = self.amps[full_idx(0, jp)].clone();
        let p1 = self.amps[full_idx(1, jp)].clone();
        for j in 0..rest_len {
            let m0 = &self.amps[full_idx(0, j)];
            let m1 = &self.amps[full_idx(1, j)];
            if &p0 * m1 != &p1 * m0 {
                return Err(Error::EntangledDiscard(q));
            }
        }
        // extract the rest-state from a row with a nonzero pivot entry
        let row = if p0.is_zero() { 1 } else { 0 };
        let amps: Vec<Cyclotomic> =
            (0..rest_len).map(|j| self.amps[full_idx(row, j)].clone()).collect();
        let reduced = ExactState::from_amps(self.n - 1, amps)?;
        Ok(reduced.renormalize().unwrap_or(reduced))
    }

    /// Like [`discard`](Self::discard), but rescales the reduced state so its
    /// norm certificate equals this state's (keeping cumulative-probability
    /// bookkeeping exact). Requires the local factor's weight on the chosen
    /// row to be a power of two relative to the whole — true whenever the
    /// discarded qubit is in a basis or phase state.
    pub fn discard_keep_norm(&self, q: usize) -> Result<ExactState> {
        let reduced = self.discard(q)?;
        let k = match (self.norm_sq.v2(), reduced.norm_sq.v2()) {
            (Valuation::Finite(a), Valuation::Finite(b)) => {
                let d = a - b;
                if !d.is_integer() {
                    return Err(Error::InvalidParameter(format!(
                        "discarded qubit {q} carries non-dyadic weight"
                    )));
                }
                d.num()
            }
            _ => return Err(Error::Annihilation("zero state in discard".into())),
        };
        let scaled = reduced.scale_pow2_half(k)?;
        if scaled.norm_sq != self.norm_sq {
            return Err(Error::InvalidParameter(format!(
                "discarded qubit {q} carries non-dyadic weight"
            )));
        }
        Ok(scaled)
    }

    /// Multiplies all amplitudes by `2^{k/2}` exactly.
    fn scale_pow2_half(&self, k: i64) -> Result<ExactState> {
        let scale = if k.rem_euclid(2) == 0 {
            Cyclotomic::one().mul_pow2(k / 2)
        } else {
            // 2^{k/2} = 2^{(k+1)/2} · (1/√2)
            Cyclotomic::inv_sqrt2().mul_pow2((k + 1) / 2)
        };
        let amps = self.amps.iter().map(|a| a * &scale).collect();
        ExactState::from_amps(self.n, amps)
    }

    // -- monotones -------------------------------------------------------------

    /// `⟨ψ|P|ψ⟩` exactly (divide by `⟨ψ|ψ⟩` for the normalized expectation;
    /// constructor states are unit-norm).
    pub fn pauli_expectation(&self, p: &PauliOperator) -> Result<Cyclotomic> {
        if p.n() != self.n {
            return Err(Error::SizeMismatch(p.n(), self.n));
        }
        if !p.is_hermitian() {
            return Err(Error::NonHermitian(p.to_string()));
        }
        Ok(self.expectation_raw(p))
    }

    fn expectation_raw(&self, p: &PauliOperator) -> Cyclotomic {
        // ⟨ψ|P|ψ⟩ = Σ_b conj(ψ_{b⊕x}) · i^{ph(b)} · ψ_b
        // (level floor 1: the phase i^{ph} is Gaussian even on rational amps)
        let (level, denom) = self.accumulator_shape();
        let mut acc = CycSum::new(level.max(1), denom);
        let x = p.x_bits();
        for b in 0..self.amps.len() as u64 {
            let a_b = &self.amps[b as usize];
            if a_b.is_zero() {
                continue;
            }
            let partner = &self.amps[(b ^ x) as usize];
            if partner.is_zero() {
                continue;
            }
            let (_, ph) = p.apply_to_basis(b);
            acc.add(&(&partner.conj() * a_b).mul_i_pow(ph));
        }
        acc.finish()
    }

    fn accumulator_shape(&self) -> (u8, u32) {
        let mut level = 0u8;
        let mut denom = 0u32;
        for a in &self.amps {
            level = level.max(a.level());
            denom = denom.max(a.denom_exp());
        }
        (level, 2 * denom)
    }

    /// `Some(±1)` iff `P|ψ⟩ = ±|ψ⟩` exactly (scale-invariant, early exit).
    pub fn eigensign(&self, p: &PauliOperator) -> Option<i8> {
        debug_assert_eq!(p.n(), self.n);
        let x = p.x_bits();
        let mut lambda: Option<i8> = None;
        for b in 0..self.amps.len() as u64 {
            // (Pψ)_b = i^{ph(b⊕x)} ψ_{b⊕x} must equal λ ψ_b
            let src = b ^ x;
            let a_src = &self.amps[src as usize];
            let a_b = &self.amps[b as usize];
            match (a_src.is_zero(), a_b.is_zero()) {
                (true, true) => continue,
                (true, false) | (false, true) => return None,
                (false, false) => {}
            }
            let (_, ph) = p.apply_to_basis(src);
            let lhs = a_src.mul_i_pow(ph);
            let matches_plus = lhs == *a_b;
            match lambda {
                None => {
                    if matches_plus {
                        lambda = Some(1);
                    } else if lhs == -a_b {
                        lambda = Some(-1);
                    } else {
                        return None;
                    }
                }
                Some(1) => {
                    if !matches_plus {
                        return None;
                    }
                }
                Some(_) => {
                    if lhs != -a_b {
                        return None;
                    }
                }
            }
        }
        lambda
    }

    fn check_spectrum_cap(&self) -> Result<()> {
        if self.n > SPECTRUM_CAP {
            return Err(Error::QubitCap(self.n, SPECTRUM_CAP));
        }
        Ok(())
    }

    /// Stabilizer nullity `ν = n − log₂|Stab|`; `|Stab|` is verified to be a
    /// power of two.
    pub fn stabilizer_nullity(&self) -> Result<u32> {
        self.check_spectrum_cap()?;
        let n = self.n;
        let count: usize = (0..1u64 << (2 * n))
            .into_par_iter()
            .filter(|idx| {
                let p = PauliOperator::hermitian_rep(n, idx >> n, idx & ((1 << n) - 1))
                    .expect("enumerated bits are in range");
                self.eigensign(&p).is_some()
            })
            .count();
        if !count.is_power_of_two() {
            return Err(Error::Internal(format!(
                "stabilizer count {count} is not a power of two"
            )));
        }
        Ok(n as u32 - count.trailing_zeros())
    }

    /// An independent generating set for `Stab(ψ)`, of size `n − ν`.
    pub fn stabilizer_group(&self) -> Result<Vec<PauliOperator>> {
        self.check_spectrum_cap()?;
        let n = self.n;
        let mask = (1u64 << n) - 1;
        let stabilizers: Vec<PauliOperator> = (0..1u64 << (2 * n))
            .into_par_iter()
            .filter_map(|idx| {
                if idx == 0 {
                    return None; // identity
                }
                let p = PauliOperator::hermitian_rep(n, idx >> n, idx & mask)
                    .expect("enumerated bits are in range");
                self.eigensign(&p).map(|s| if s < 0 { p.negated() } else { p })
            })
            .collect();
        // GF(2) reduction on (x|z) with exact sign tracking via products.
        let key = |p: &PauliOperator| (p.x_bits() << n) | p.z_bits();
        let mut basis: Vec<PauliOperator> = Vec::new();
        for s in stabilizers {
            let mut cur = s;
            loop {
                let k = key(&cur);
                if k == 0 {
                    debug_assert_eq!(cur.phase_exp(), 0, "−I cannot stabilize");
                    break;
                }
                let lead = 63 - k.leading_zeros();
                match basis.iter().find(|b| 63 - key(b).leading_zeros() == lead) {
                    Some(b) => cur = cur.multiply(b)?,
                    None => {
                        basis.push(cur);
                        break;
                    }
                }
            }
        }
        basis.sort_by_key(|p| std::cmp::Reverse(key(p)));
        Ok(basis)
    }

    /// The dyadic monotone `μ₂ = max_P {−v₂(⟨ψ|P|ψ⟩/⟨ψ|ψ⟩)}` as an exact
    /// rational (valuation arithmetic makes this scale-invariant).
    pub fn dyadic_monotone(&self) -> Result<DyadicFraction> {
        self.check_spectrum_cap()?;
        let n = self.n;
        let mask = (1u64 << n) - 1;
        let norm_v2 = match self.norm_sq.v2() {
            Valuation::Finite(r) => r,
            Valuation::Infinite => return Err(Error::Annihilation("zero state".into())),
        };
        let best = (0..1u64 << (2 * n))
            .into_par_iter()
            .filter_map(|idx| {
                let p = PauliOperator::hermitian_rep(n, idx >> n, idx & mask)
                    .expect("enumerated bits are in range");
                match self.expectation_raw(&p).v2() {
                    Valuation::Finite(v) => Some(norm_v2 - v),
                    Valuation::Infinite => None,
                }
            })
            .max()
            .expect("identity expectation is nonzero");
        Ok(best)
    }

    /// The exact Pauli spectrum (requires a unit-norm state so the absolute
    /// expectations are already normalized).
    pub fn pauli_spectrum(&self) -> Result<SpectrumReport> {
        self.check_spectrum_cap()?;
        if !self.is_unit_norm() {
            return Err(Error::InvalidParameter("spectrum requires a unit-norm state".into()));
        }
        let n = self.n;
        let mask = (1u64 << n) - 1;
        let map = (0..1u64 << (2 * n))
            .into_par_iter()
            .fold(HashMap::<Cyclotomic, usize>::new, |mut acc, idx| {
                let p = PauliOperator::hermitian_rep(n, idx >> n, idx & mask)
                    .expect("enumerated bits are in range");
                let e = self.expectation_raw(&p);
                let abs = e.abs_real().expect("Hermitian expectations are real");
                *acc.entry(abs).or_insert(0) += 1;
                acc
            })
            .reduce(HashMap::new, |mut a, b| {
                for (k, v) in b {
                    *a.entry(k).or_insert(0) += v;
                }
                a
            });
        let mut entries: Vec<(Cyclotomic, usize)> = map.into_iter().collect();
        entries.sort_by(|(a, _), (b, _)| {
            b.abs_f64().partial_cmp(&a.abs_f64()).unwrap_or(Ordering::Equal)
        });
        let one = Cyclotomic::one();
        let stabilizer_count = entries
            .iter()
            .find(|(v, _)| *v == one)
            .map(|(_, m)| *m)
            .unwrap_or(0);
        if !stabilizer_count.is_power_of_two() {
            return Err(Error::Internal(format!(
                "stabilizer count {stabilizer_count} is not a power of two"
            )));
        }
        let nullity = n as u32 - stabilizer_count.trailing_zeros();
        Ok(SpectrumReport { entries, stabilizer_count, nullity })
    }

    /// Minimal `d ≥ 1` such that every density-matrix entry `ψ_a ψ_b*` lies
    /// in `𝔔(exp(iπ/2^d))` (`d = 1` is the Gaussian field `𝔔(i)`).
    pub fn ring_level(&self) -> u8 {
        let bound = self.amps.iter().map(|a| a.level()).max().unwrap_or(0);
        let mut best = 1u8;
        'outer: for a in &self.amps {
            if a.is_zero() {
                continue;
            }
            for b in &self.amps {
                if b.is_zero() {
                    continue;
                }
                let entry = a * &b.conj();
                best = best.max(entry.level());
                if best >= bound {
                    break 'outer;
                }
            }
        }
        best
    }
}

fn norm_sq_of(amps: &[Cyclotomic]) -> Cyclotomic {
    let (mut level, mut denom) = (0u8, 0u32);
    for a in amps {
        level = level.max(a.level());
        denom = denom.max(a.denom_exp());
    }
    let mut acc = CycSum::new(level, 2 * denom);
    for a in amps {
        if !a.is_zero() {
            acc.add(&a.abs_sq());
        }
    }
    acc.finish()
}

// ---------------------------------------------------------------------------
// State-expression grammar
// ---------------------------------------------------------------------------

/// Parses a state expression: atoms `T`, `sqrtT`, `rot:j:d`, `CS`, `CCS`,
/// `CnZ:n`, `CnS:n`, `W:n`, `QFT:a:n`, `CCZ123145`, `plus:n`, `ket:011`,
/// joined by commas for tensor products, with `*k` repetition
/// (e.g. `"T*3,CCZ"`).
pub fn parse_state_expr(expr: &str) -> Result<ExactState> {
    let mut acc: Option<ExactState> = None;
    for raw_term in expr.split(',') {
        let term = raw_term.trim();
        if term.is_empty() {
            return Err(Error::Parse { pos: expr.to_string(), msg: "empty term".into() });
        }
        let (atom, reps) = match term.rsplit_once('*') {
            Some((a, k)) => {
                let k: usize = k.trim().parse().map_err(|e| Error::Parse {
                    pos: term.to_string(),
                    msg: format!("bad repetition count: {e}"),
                })?;
                if k == 0 {
                    return Err(Error::Parse {
                        pos: term.to_string(),
                        msg: "repetition count must be ≥ 1".into(),
                    });
                }
                (a.trim(), k)
            }
            None => (term, 1),
        };
        let state = parse_atom(atom)?;
        for _ in 0..reps {
            acc = Some(match acc {
                None => state.clone(),
                Some(prev) => prev.tensor(&state)?,
            });
        }
    }
    acc.ok_or_else(|| Error::Parse { pos: expr.to_string(), msg: "empty expression".into() })
}

fn parse_atom(atom: &str) -> Result<ExactState> {
    let mut parts = atom.split(':');
    let name = parts.next().unwrap_or("");
    let args: Vec<&str> = parts.collect();
    let parse_i64 = |s: &str| -> Result<i64> {
        s.trim().parse().map_err(|e| Error::Parse {
            pos: atom.to_string(),
            msg: format!("bad integer parameter: {e}"),
        })
    };
    let parse_usize = |s: &str| -> Result<usize> {
        s.trim().parse().map_err(|e| Error::Parse {
            pos: atom.to_string(),
            msg: format!("bad integer parameter: {e}"),
        })
    };
    let arity = |want: usize| -> Result<()> {
        if args.len() != want {
            return Err(Error::Parse {
                pos: atom.to_string(),
                msg: format!("{name} takes {want} parameter(s), got {}", args.len()),
            });
        }
        Ok(())
    };
    match name {
        "T" => {
            arity(0)?;
            Ok(ExactState::t_state())
        }
        "sqrtT" => {
            arity(0)?;
            Ok(ExactState::sqrt_t_state())
        }
        "rot" => {
            arity(2)?;
            let j = parse_i64(args[0])?;
            let d = parse_i64(args[1])?;
            if !(0..=crate::MAX_LEVEL as i64).contains(&d) {
                return Err(Error::LevelCap(d.clamp(0, u8::MAX as i64) as u8, crate::MAX_LEVEL));
            }
            ExactState::rot_plus(j, d as u8)
        }
        "CS" => {
            arity(0)?;
            Ok(ExactState::cs_state())
        }
        "CCS" => {
            arity(0)?;
            Ok(ExactState::ccs_state())
        }
        "CnZ" => {
            arity(1)?;
            ExactState::cnz_state(parse_usize(args[0])?)
        }
        "CnS" => {
            arity(1)?;
            ExactState::cns_state(parse_usize(args[0])?)
        }
        "W" => {
            arity(1)?;
            ExactState::w_state(parse_usize(args[0])?)
        }
        "QFT" => {
            arity(2)?;
            let a = parse_i64(args[0])?;
            ExactState::qft_state(a, parse_usize(args[1])?)
        }
        "CCZ123145" => {
            arity(0)?;
            Ok(ExactState::ccz123145_state())
        }
        "CCZ" => {
            arity(0)?;
            ExactState::cnz_state(3)
        }
        "plus" => {
            arity(1)?;
            ExactState::plus(parse_usize(args[0])?)
        }
        "ket" => {
            arity(1)?;
            ExactState::ket(args[0])
        }
        _ => Err(Error::Parse {
            pos: atom.to_string(),
            msg: format!("unknown state constructor '{name}'"),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pauli(s: &str) -> PauliOperator {
        PauliOperator::parse(s).unwrap()
    }

    #[test]
    fn t_state_amplitudes() {
        let t = ExactState::t_state();
        assert!(t.is_unit_norm());
        let is2 = Cyclotomic::inv_sqrt2();
        assert_eq!(*t.amp(0), is2);
        assert_eq!(*t.amp(1), &is2 * &Cyclotomic::root_of_unity(1, 2).unwrap());
        assert_eq!(t.ring_level(), 2);
    }

    #[test]
    fn constructors_are_unit_norm() {
        for expr in ["T", "sqrtT", "CS", "CCS", "CnZ:4", "CnS:3", "W:4", "QFT:3:4", "CCZ123145"] {
            let s = parse_state_expr(expr).unwrap();
            assert!(s.is_unit_norm(), "{expr} must be unit-norm");
        }
    }

    #[test]
    fn qft_zero_is_plus() {
        let a = ExactState::qft_state(0, 3).unwrap();
        let b = ExactState::plus(3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn w_state_amplitudes_match_phase_function() {
        for n in 2..=4usize {
            let w = ExactState::w_state(n).unwrap();
            let base = Cyclotomic::inv_sqrt2().pow(n as u32);
            for x in 0..1u64 << n {
                let wt = x.count_ones() as i64;
                let g = (wt & 1) + wt;
                assert_eq!(g % 2, 0, "g must be even");
                let expect = &base * &Cyclotomic::root_of_unity(g, 2).unwrap();
                assert_eq!(*w.amp(x as usize), expect);
            }
        }
    }

    #[test]
    fn w_requires_two_qubits() {
        let err = ExactState::w_state(1).unwrap_err();
        assert!(err.to_string().contains("W requires n ≥ 2"));
    }

    #[test]
    fn grammar_tensor_and_repeat() {
        let s = parse_state_expr("T*2,CS").unwrap();
        assert_eq!(s.n(), 4);
        let direct = ExactState::t_state()
            .tensor(&ExactState::t_state())
            .unwrap()
            .tensor(&ExactState::cs_state())
            .unwrap();
        assert_eq!(s, direct);
        assert!(parse_state_expr("bogus").is_err());
        assert!(parse_state_expr("W:1").is_err());
        assert!(parse_state_expr("T*0").is_err());
    }

    #[test]
    fn expectation_against_rotation_spectrum() {
        // ⟨X⟩ = cos θ, ⟨Y⟩ = sin θ, ⟨Z⟩ = 0 on (|0⟩+e^{iθ}|1⟩)/√2
        for (j, d) in [(1i64, 2u8), (3, 3), (5, 3)] {
            let s = ExactState::rot_plus(j, d).unwrap();
            assert_eq!(
                s.pauli_expectation(&pauli("X")).unwrap(),
                Cyclotomic::cos_pi(j, d).unwrap()
            );
            assert_eq!(
                s.pauli_expectation(&pauli("Y")).unwrap(),
                Cyclotomic::sin_pi(j, d).unwrap()
            );
            assert!(s.pauli_expectation(&pauli("Z")).unwrap().is_zero());
            assert!(s.pauli_expectation(&pauli("I")).unwrap().is_one());
        }
    }

    #[test]
    fn expectation_rejects_non_hermitian() {
        let s = ExactState::t_state();
        let p = pauli("X").with_extra_phase(1);
        assert!(s.pauli_expectation(&p).is_err());
    }

    #[test]
    fn nullity_basics() {
        assert_eq!(ExactState::t_state().stabilizer_nullity().unwrap(), 1);
        assert_eq!(ExactState::cs_state().stabilizer_nullity().unwrap(), 2);
        assert_eq!(ExactState::cnz_state(3).unwrap().stabilizer_nullity().unwrap(), 3);
        assert_eq!(ExactState::ket("010").unwrap().stabilizer_nullity().unwrap(), 0);
        // additivity on a small pair
        let prod = ExactState::t_state().tensor(&ExactState::ket("0").unwrap()).unwrap();
        assert_eq!(prod.stabilizer_nullity().unwrap(), 1);
    }

    #[test]
    fn stabilizer_group_of_bell_like_state() {
        // (|01⟩+|10⟩)/√2: group {I, XX, −ZZ, −YY} of size 4
        let is2 = Cyclotomic::inv_sqrt2();
        let s = ExactState::from_amps(
            2,
            vec![Cyclotomic::zero(), is2.clone(), is2, Cyclotomic::zero()],
        )
        .unwrap();
        let gens = s.stabilizer_group().unwrap();
        assert_eq!(gens.len(), 2);
        assert_eq!(s.stabilizer_nullity().unwrap(), 0);
        for g in &gens {
            assert_eq!(s.eigensign(g), Some(1), "signed generator {g} must stabilize");
        }
        assert!(gens.contains(&pauli("XX")));
        assert!(gens.iter().any(|g| *g == pauli("-ZZ") || *g == pauli("-YY")));
        // |T⟩⊗|0⟩ → single generator I⊗Z
        let t0 = ExactState::t_state().tensor(&ExactState::ket("0").unwrap()).unwrap();
        let gens = t0.stabilizer_group().unwrap();
        assert_eq!(gens, vec![pauli("IZ")]);
    }

    #[test]
    fn mu2_basics() {
        assert_eq!(
            ExactState::t_state().dyadic_monotone().unwrap(),
            DyadicFraction::new(1, 1)
        );
        assert_eq!(
            ExactState::sqrt_t_state().dyadic_monotone().unwrap(),
            DyadicFraction::new(3, 2)
        );
        assert_eq!(
            ExactState::ket("01").unwrap().dyadic_monotone().unwrap(),
            DyadicFraction::zero()
        );
        // additivity
        let pair = ExactState::t_state().tensor(&ExactState::cs_state()).unwrap();
        assert_eq!(pair.dyadic_monotone().unwrap(), DyadicFraction::new(3, 1));
    }

    #[test]
    fn spectrum_of_ket_zero() {
        let s = ExactState::ket("0").unwrap();
        let rep = s.pauli_spectrum().unwrap();
        assert_eq!(rep.total_multiplicity(), 4);
        assert_eq!(rep.stabilizer_count(), 2);
        assert_eq!(rep.nullity(), 0);
        let one = Cyclotomic::one();
        let zero = Cyclotomic::zero();
        assert_eq!(rep.entries(), &[(one, 2), (zero, 2)]);
    }

    #[test]
    fn ring_levels() {
        assert_eq!(ExactState::cs_state().ring_level(), 1);
        assert_eq!(ExactState::cnz_state(3).unwrap().ring_level(), 1);
        assert_eq!(ExactState::w_state(3).unwrap().ring_level(), 1);
        assert_eq!(ExactState::t_state().ring_level(), 2);
        assert_eq!(ExactState::sqrt_t_state().ring_level(), 3);
        assert_eq!(ExactState::plus(2).unwrap().ring_level(), 1);
    }

    #[test]
    fn equality_up_to_phase() {
        let t = ExactState::t_state();
        let mut rotated = t.clone();
        for a in rotated.amps.iter_mut() {
            *a = &*a * &Cyclotomic::root_of_unity(1, 2).unwrap();
        }
        rotated.norm_sq = norm_sq_of(&rotated.amps);
        assert!(t.equal_up_to_phase(&rotated).unwrap());
        let zero = ExactState::ket("0").unwrap();
        let one = ExactState::ket("1").unwrap();
        assert!(!zero.equal_up_to_phase(&one).unwrap());
        // S|T⟩ is the rot(3,2) state
        let mut st = ExactState::t_state();
        st.apply_phase(0, 1, 1).unwrap();
        assert!(st.equal_up_to_phase(&ExactState::rot_plus(3, 2).unwrap()).unwrap());
    }

    #[test]
    fn projection_of_two_t_states() {
        // measuring −Z⊗Z on |T⟩⊗|T⟩, outcome +1 → (|01⟩+|10⟩)/√2 at p = 1/2
        let tt = ExactState::t_state().tensor(&ExactState::t_state()).unwrap();
        let (proj, prob) = tt.project(&pauli("-ZZ"), 1).unwrap();
        assert_eq!(prob, Cyclotomic::half());
        let unit = proj.renormalize().unwrap();
        let is2 = Cyclotomic::inv_sqrt2();
        let bell = ExactState::from_amps(
            2,
            vec![Cyclotomic::zero(), is2.clone(), is2, Cyclotomic::zero()],
        )
        .unwrap();
        // the projected state keeps the T-phases: (|01⟩+|10⟩)ζ₈/√2 up to phase
        assert!(unit.equal_up_to_phase(&bell).unwrap());
        let (p1, half) = tt.measurement_probability(&pauli("-ZZ")).unwrap();
        assert_eq!(p1, Cyclotomic::half());
        assert!(half);
        // Z on |0⟩ → probability 1
        let z0 = ExactState::ket("0").unwrap();
        let (p, half) = z0.measurement_probability(&pauli("Z")).unwrap();
        assert!(p.is_one());
        assert!(!half);
    }

    #[test]
    fn discard_factored_qubit() {
        let s = ExactState::ket("0").unwrap().tensor(&ExactState::t_state()).unwrap();
        let reduced = s.discard(0).unwrap();
        assert_eq!(reduced, ExactState::t_state());
        // Bell pair discard must fail
        let is2 = Cyclotomic::inv_sqrt2();
        let bell = ExactState::from_amps(
            2,
            vec![is2.clone(), Cyclotomic::zero(), Cyclotomic::zero(), is2],
        )
        .unwrap();
        assert!(matches!(bell.discard(0), Err(Error::EntangledDiscard(0))));
    }

    #[test]
    fn clifford_gates_preserve_norm_and_monotones() {
        let mut s = ExactState::t_state().tensor(&ExactState::cs_state()).unwrap();
        let before_nu = s.stabilizer_nullity().unwrap();
        let before_mu = s.dyadic_monotone().unwrap();
        for (g, qs) in [
            ("H", vec![0]),
            ("CX", vec![0, 2]),
            ("S", vec![1]),
            ("CZ", vec![1, 2]),
            ("SWAP", vec![0, 1]),
            ("Sdg", vec![2]),
            ("Y", vec![0]),
        ] {
            s.apply_clifford_gate(g, &qs).unwrap();
        }
        assert_eq!(norm_sq_of(s.amps()), *s.norm_sq());
        assert!(s.is_unit_norm());
        assert_eq!(s.stabilizer_nullity().unwrap(), before_nu);
        assert_eq!(s.dyadic_monotone().unwrap(), before_mu);
    }

    #[test]
    fn gate_vs_tableau_consistency() {
        // amplitude-level gate application conjugates expectations the same
        // way the tableau does: ⟨Gψ|P|Gψ⟩ = ⟨ψ|G†PG|ψ⟩
        use crate::pauli::CliffordTableau;
        let mut s = ExactState::t_state().tensor(&ExactState::t_state()).unwrap();
        let g = CliffordTableau::for_gate("CX", &[0, 1], 2).unwrap();
        let p = pauli("XY");
        let before = s.pauli_expectation(&g.inverse().unwrap().conjugate(&p).unwrap()).unwrap();
        s.apply_clifford_gate("CX", &[0, 1]).unwrap();
        let after = s.pauli_expectation(&p).unwrap();
        assert_eq!(before, after);
    }

    #[test]
    fn pauli_application() {
        let mut s = ExactState::ket("01").unwrap();
        s.apply_pauli(&pauli("XZ")).unwrap();
        // (X⊗Z)|01⟩ = −|11⟩
        assert_eq!(*s.amp(0b11), -Cyclotomic::one());
        assert!(s.amp(0b01).is_zero());
    }
}
