//! Pauli operators in symplectic form and Clifford tableaux.
//!
//! A [`PauliOperator`] is `i^s · X^x Z^z` with `s ∈ ℤ₄` and bit vectors
//! `x, z` packed into a word. Qubit `q` occupies bit `n−1−q` of the
//! computational-basis index, so qubit 0 is the leftmost tensor factor and
//! `|b₁…b_n⟩` reads left to right.
//!
//! A [`CliffordTableau`] records the conjugation images `C X_q C†` and
//! `C Z_q C†`; composing and inverting tableaux lets circuit rewriting push
//! Clifford gates past measurements without dense matrices.

use std::fmt;

use crate::{Error, Result, MAX_QUBITS};

/// `i^{phase_exp} · X^{x_bits} Z^{z_bits}` on `n` qubits.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub struct PauliOperator {
    n: usize,
    x_bits: u64,
    z_bits: u64,
    phase_exp: u8,
}

/// Single-qubit Pauli kind (used when assembling operators qubit by qubit).
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum PauliKind {
    I,
    X,
    Y,
    Z,
}

impl PauliOperator {
    pub fn new(n: usize, x_bits: u64, z_bits: u64, phase_exp: u8) -> Result<Self> {
        if n == 0 || n > MAX_QUBITS {
            return Err(Error::QubitCap(n, MAX_QUBITS));
        }
        let mask = Self::mask(n);
        if x_bits & !mask != 0 || z_bits & !mask != 0 {
            return Err(Error::IndexOutOfRange { index: 64, n });
        }
        Ok(PauliOperator { n, x_bits, z_bits, phase_exp: phase_exp % 4 })
    }

    fn mask(n: usize) -> u64 {
        if n >= 64 {
            u64::MAX
        } else {
            (1u64 << n) - 1
        }
    }

    pub fn identity(n: usize) -> Self {
        PauliOperator { n, x_bits: 0, z_bits: 0, phase_exp: 0 }
    }

    /// The single-qubit Pauli `kind` on qubit `q` of `n`.
    pub fn single(n: usize, q: usize, kind: PauliKind) -> Result<Self> {
        if q >= n {
            return Err(Error::IndexOutOfRange { index: q, n });
        }
        let bit = 1u64 << (n - 1 - q);
        let (x, z, s) = match kind {
            PauliKind::I => (0, 0, 0),
            PauliKind::X => (bit, 0, 0),
            PauliKind::Y => (bit, bit, 1), // Y = i·XZ
            PauliKind::Z => (0, bit, 0),
        };
        PauliOperator::new(n, x, z, s)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn x_bits(&self) -> u64 {
        self.x_bits
    }

    pub fn z_bits(&self) -> u64 {
        self.z_bits
    }

    pub fn phase_exp(&self) -> u8 {
        self.phase_exp
    }

    pub fn is_identity_up_to_phase(&self) -> bool {
        self.x_bits == 0 && self.z_bits == 0
    }

    pub fn is_identity(&self) -> bool {
        self.is_identity_up_to_phase() && self.phase_exp == 0
    }

    /// Number of qubits acted on non-trivially.
    pub fn weight(&self) -> u32 {
        (self.x_bits | self.z_bits).count_ones()
    }

    /// `i^{phase_exp + m}` variant of the same symplectic data.
    pub fn with_extra_phase(&self, m: u8) -> Self {
        PauliOperator { phase_exp: (self.phase_exp + m) % 4, ..*self }
    }

    pub fn negated(&self) -> Self {
        self.with_extra_phase(2)
    }

    /// Hermitian iff `phase_exp ≡ popcount(x AND z) (mod 2)`.
    pub fn is_hermitian(&self) -> bool {
        (self.phase_exp as u32 + (self.x_bits & self.z_bits).count_ones()) % 2 == 0
    }

    /// The canonical Hermitian representative of `{±P}` for the symplectic
    /// data `(x, z)`: phase `popcount(x AND z) mod 4` (puts a bare `+Y` on
    /// each overlapping position).
    pub fn hermitian_rep(n: usize, x_bits: u64, z_bits: u64) -> Result<Self> {
        let s = ((x_bits & z_bits).count_ones() % 4) as u8;
        PauliOperator::new(n, x_bits, z_bits, s)
    }

    /// Exact product including the `i`-power phase.
    pub fn multiply(&self, other: &PauliOperator) -> Result<PauliOperator> {
        if self.n != other.n {
            return Err(Error::SizeMismatch(self.n, other.n));
        }
        // X^x1 Z^z1 · X^x2 Z^z2 = (−1)^{z1·x2} X^{x1⊕x2} Z^{z1⊕z2}
        let crossings = (self.z_bits & other.x_bits).count_ones();
        let phase = (self.phase_exp as u32 + other.phase_exp as u32 + 2 * crossings) % 4;
        Ok(PauliOperator {
            n: self.n,
            x_bits: self.x_bits ^ other.x_bits,
            z_bits: self.z_bits ^ other.z_bits,
            phase_exp: phase as u8,
        })
    }

    /// True iff the symplectic inner product `x_p·z_q + x_q·z_p` is even.
    pub fn commutes(&self, other: &PauliOperator) -> Result<bool> {
        if self.n != other.n {
            return Err(Error::SizeMismatch(self.n, other.n));
        }
        let cross = (self.x_bits & other.z_bits).count_ones()
            + (self.z_bits & other.x_bits).count_ones();
        Ok(cross % 2 == 0)
    }

    /// `P|b⟩ = i^{s + 2·popcount(z·b)} |b ⊕ x⟩`; returns `(b ⊕ x, i-power)`.
    pub fn apply_to_basis(&self, b: u64) -> (u64, u8) {
        let flips = (self.z_bits & b).count_ones();
        ((b ^ self.x_bits) & Self::mask(self.n), ((self.phase_exp as u32 + 2 * flips) % 4) as u8)
    }

    /// Tensor product `self ⊗ other` (`other`'s qubits appended).
    pub fn tensor(&self, other: &PauliOperator) -> Result<PauliOperator> {
        let n = self.n + other.n;
        if n > MAX_QUBITS {
            return Err(Error::QubitCap(n, MAX_QUBITS));
        }
        Ok(PauliOperator {
            n,
            x_bits: (self.x_bits << other.n) | other.x_bits,
            z_bits: (self.z_bits << other.n) | other.z_bits,
            phase_exp: (self.phase_exp + other.phase_exp) % 4,
        })
    }

    /// The single-qubit kind at qubit `q` (ignoring the global phase).
    pub fn kind_at(&self, q: usize) -> PauliKind {
        let bit = 1u64 << (self.n - 1 - q);
        match (self.x_bits & bit != 0, self.z_bits & bit != 0) {
            (false, false) => PauliKind::I,
            (true, false) => PauliKind::X,
            (true, true) => PauliKind::Y,
            (false, true) => PauliKind::Z,
        }
    }

    /// True if the operator acts as identity on every qubit outside `kept`.
    pub fn supported_on(&self, kept_mask: u64) -> bool {
        (self.x_bits | self.z_bits) & !kept_mask == 0
    }

    /// Parses a Pauli literal: optional sign, then one of `I X Y Z` per
    /// qubit, e.g. `-ZZ` or `+XIY`. The Unicode minus `−` is also accepted.
    pub fn parse(s: &str) -> Result<Self> {
        let t = s.trim();
        let (neg, body) = if let Some(rest) = t.strip_prefix('-').or_else(|| t.strip_prefix('−'))
        {
            (true, rest)
        } else if let Some(rest) = t.strip_prefix('+') {
            (false, rest)
        } else {
            (false, t)
        };
        let body = body.trim();
        if body.is_empty() {
            return Err(Error::Parse { pos: s.to_string(), msg: "empty Pauli literal".into() });
        }
        let n = body.chars().count();
        if n > MAX_QUBITS {
            return Err(Error::QubitCap(n, MAX_QUBITS));
        }
        let mut op = PauliOperator::identity(n);
        for (q, ch) in body.chars().enumerate() {
            let kind = match ch {
                'I' | 'i' => PauliKind::I,
                'X' | 'x' => PauliKind::X,
                'Y' | 'y' => PauliKind::Y,
                'Z' | 'z' => PauliKind::Z,
                _ => {
                    return Err(Error::Parse {
                        pos: s.to_string(),
                        msg: format!("unexpected character '{ch}' in Pauli literal"),
                    })
                }
            };
            op = op.multiply(&PauliOperator::single(n, q, kind)?)?;
        }
        if neg {
            op = op.negated();
        }
        Ok(op)
    }
}

impl fmt::Display for PauliOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // Render relative to the product of single-qubit letters (each Y
        // contributes i), so Hermitian operators print as ±<letters>.
        let y_count = (self.x_bits & self.z_bits).count_ones();
        let residual = (self.phase_exp as u32 + 4 - (y_count % 4)) % 4;
        let prefix = match residual {
            0 => "+",
            1 => "+i",
            2 => "-",
            _ => "-i",
        };
        write!(f, "{prefix}")?;
        for q in 0..self.n {
            let ch = match self.kind_at(q) {
                PauliKind::I => 'I',
                PauliKind::X => 'X',
                PauliKind::Y => 'Y',
                PauliKind::Z => 'Z',
            };
            write!(f, "{ch}")?;
        }
        Ok(())
    }
}

/// Conjugation images of the generators `X_q`, `Z_q` under a Clifford unitary.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct CliffordTableau {
    n: usize,
    x_images: Vec<PauliOperator>,
    z_images: Vec<PauliOperator>,
}

impl CliffordTableau {
    pub fn identity(n: usize) -> Result<Self> {
        if n == 0 || n > MAX_QUBITS {
            return Err(Error::QubitCap(n, MAX_QUBITS));
        }
        let x_images = (0..n)
            .map(|q| PauliOperator::single(n, q, PauliKind::X))
            .collect::<Result<Vec<_>>>()?;
        let z_images = (0..n)
            .map(|q| PauliOperator::single(n, q, PauliKind::Z))
            .collect::<Result<Vec<_>>>()?;
        Ok(CliffordTableau { n, x_images, z_images })
    }

    /// Builds a tableau from explicit generator images, checking that they
    /// form a valid Clifford: Hermitian, and preserving the `X_i`/`Z_j`
    /// commutation relations.
    pub fn from_images(
        x_images: Vec<PauliOperator>,
        z_images: Vec<PauliOperator>,
    ) -> Result<Self> {
        let n = x_images.len();
        if n == 0 || n > MAX_QUBITS {
            return Err(Error::QubitCap(n, MAX_QUBITS));
        }
        if z_images.len() != n {
            return Err(Error::SizeMismatch(n, z_images.len()));
        }
        for img in x_images.iter().chain(z_images.iter()) {
            if img.n() != n {
                return Err(Error::SizeMismatch(n, img.n()));
            }
            if !img.is_hermitian() {
                return Err(Error::NonHermitian(img.to_string()));
            }
        }
        for i in 0..n {
            for j in 0..n {
                let want_anti = i == j;
                if x_images[i].commutes(&z_images[j])? == want_anti {
                    return Err(Error::InvalidParameter(format!(
                        "images of X_{i} and Z_{j} break the commutation relations"
                    )));
                }
                if j > i
                    && (!x_images[i].commutes(&x_images[j])?
                        || !z_images[i].commutes(&z_images[j])?)
                {
                    return Err(Error::InvalidParameter(format!(
                        "generator images {i} and {j} fail to commute"
                    )));
                }
            }
        }
        Ok(CliffordTableau { n, x_images, z_images })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn x_image(&self, q: usize) -> &PauliOperator {
        &self.x_images[q]
    }

    pub fn z_image(&self, q: usize) -> &PauliOperator {
        &self.z_images[q]
    }

    /// The tableau of a named gate embedded on `n` qubits.
    ///
    /// Gates: `H S Sdg X Y Z` (one index) and `CX CZ SWAP` (two indices).
    pub fn for_gate(gate: &str, qubits: &[usize], n: usize) -> Result<Self> {
        for &q in qubits {
            if q >= n {
                return Err(Error::IndexOutOfRange { index: q, n });
            }
        }
        let mut t = CliffordTableau::identity(n)?;
        let single = |q: usize, k: PauliKind| PauliOperator::single(n, q, k);
        match (gate, qubits) {
            ("H", &[q]) => {
                t.x_images[q] = single(q, PauliKind::Z)?;
                t.z_images[q] = single(q, PauliKind::X)?;
            }
            ("S", &[q]) => {
                t.x_images[q] = single(q, PauliKind::Y)?;
            }
            ("Sdg", &[q]) => {
                t.x_images[q] = single(q, PauliKind::Y)?.negated();
            }
            ("X", &[q]) => {
                t.z_images[q] = single(q, PauliKind::Z)?.negated();
            }
            ("Y", &[q]) => {
                t.x_images[q] = single(q, PauliKind::X)?.negated();
                t.z_images[q] = single(q, PauliKind::Z)?.negated();
            }
            ("Z", &[q]) => {
                t.x_images[q] = single(q, PauliKind::X)?.negated();
            }
            ("CX", &[c, tq]) if c != tq => {
                t.x_images[c] = single(c, PauliKind::X)?.multiply(&single(tq, PauliKind::X)?)?;
                t.z_images[tq] = single(c, PauliKind::Z)?.multiply(&single(tq, PauliKind::Z)?)?;
            }
            ("CZ", &[a, b]) if a != b => {
                t.x_images[a] = single(a, PauliKind::X)?.multiply(&single(b, PauliKind::Z)?)?;
                t.x_images[b] = single(a, PauliKind::Z)?.multiply(&single(b, PauliKind::X)?)?;
            }
            ("SWAP", &[a, b]) if a != b => {
                t.x_images[a] = single(b, PauliKind::X)?;
                t.x_images[b] = single(a, PauliKind::X)?;
                t.z_images[a] = single(b, PauliKind::Z)?;
                t.z_images[b] = single(a, PauliKind::Z)?;
            }
            _ => {
                return Err(Error::UnknownGate(format!(
                    "{gate} on {qubits:?} (expected H/S/Sdg/X/Y/Z with 1 index or CX/CZ/SWAP with 2 distinct indices)"
                )))
            }
        }
        Ok(t)
    }

    /// `C P C†`, exactly, including sign.
    pub fn conjugate(&self, p: &PauliOperator) -> Result<PauliOperator> {
        if self.n != p.n {
            return Err(Error::SizeMismatch(self.n, p.n));
        }
        let mut out = PauliOperator::identity(self.n).with_extra_phase(p.phase_exp);
        // P = i^s ∏ X_q^{x_q} · ∏ Z_q^{z_q}; image factors within each block
        // commute, so any in-block order is fine, but X's stay before Z's.
        for q in 0..self.n {
            if p.x_bits & (1u64 << (self.n - 1 - q)) != 0 {
                out = out.multiply(&self.x_images[q])?;
            }
        }
        for q in 0..self.n {
            if p.z_bits & (1u64 << (self.n - 1 - q)) != 0 {
                out = out.multiply(&self.z_images[q])?;
            }
        }
        Ok(out)
    }

    /// The tableau of `C₂ ∘ C₁` (first apply `c1`, then `self` acts last):
    /// `conjugate(compose(c2,c1), p) = conjugate(c2, conjugate(c1, p))`.
    pub fn compose(&self, first: &CliffordTableau) -> Result<CliffordTableau> {
        if self.n != first.n {
            return Err(Error::SizeMismatch(self.n, first.n));
        }
        let x_images = first
            .x_images
            .iter()
            .map(|p| self.conjugate(p))
            .collect::<Result<Vec<_>>>()?;
        let z_images = first
            .z_images
            .iter()
            .map(|p| self.conjugate(p))
            .collect::<Result<Vec<_>>>()?;
        Ok(CliffordTableau { n: self.n, x_images, z_images })
    }

    /// The inverse tableau: symplectic part by GF(2) elimination, signs fixed
    /// by conjugating each candidate forward.
    pub fn inverse(&self) -> Result<CliffordTableau> {
        let n = self.n;
        // Rows: images of the 2n generators as 2n-bit vectors (x|z).
        // Solve M·v = e_row for each target generator.
        let rows = 2 * n;
        let pack = |p: &PauliOperator| -> u128 {
            ((p.x_bits as u128) << n) | (p.z_bits as u128)
        };
        // Matrix whose row g is the image of generator g (X_0..X_{n-1}, Z_0..Z_{n-1}).
        let mut m: Vec<u128> = Vec::with_capacity(rows);
        for q in 0..n {
            m.push(pack(&self.x_images[q]));
        }
        for q in 0..n {
            m.push(pack(&self.z_images[q]));
        }
        // Augment with the identity to track which generator combination
        // produces each image row, then reduce.
        let mut aug: Vec<u128> = (0..rows).map(|g| 1u128 << g).collect();
        let mut pivot_row = 0usize;
        for col in (0..rows).rev() {
            let bit = 1u128 << col;
            if let Some(r) = (pivot_row..rows).find(|&r| m[r] & bit != 0) {
                m.swap(pivot_row, r);
                aug.swap(pivot_row, r);
                for r2 in 0..rows {
                    if r2 != pivot_row && m[r2] & bit != 0 {
                        m[r2] ^= m[pivot_row];
                        aug[r2] ^= aug[pivot_row];
                    }
                }
                pivot_row += 1;
            }
        }
        if pivot_row != rows {
            return Err(Error::Internal("tableau image matrix is singular".into()));
        }
        // For target generator t (as a 2n-bit vector), the solving
        // combination is read off from the reduced system.
        let solve = |target: &PauliOperator| -> Result<PauliOperator> {
            let tv = pack(target);
            let mut combo = 0u128;
            for r in 0..rows {
                // After full reduction each row of m has a unique leading bit.
                let lead = 127 - m[r].leading_zeros() as usize;
                if tv & (1u128 << lead) != 0 {
                    combo ^= aug[r];
                }
            }
            // Multiply the chosen generators (candidate phase 0), then fix
            // the sign by one forward conjugation.
            let mut cand = PauliOperator::identity(n);
            for q in 0..n {
                if combo & (1u128 << q) != 0 {
                    cand = cand.multiply(&PauliOperator::single(n, q, PauliKind::X)?)?;
                }
            }
            for q in 0..n {
                if combo & (1u128 << (n + q)) != 0 {
                    cand = cand.multiply(&PauliOperator::single(n, q, PauliKind::Z)?)?;
                }
            }
            let forward = self.conjugate(&cand)?;
            if forward.x_bits != target.x_bits || forward.z_bits != target.z_bits {
                return Err(Error::Internal("tableau inversion produced a wrong image".into()));
            }
            let correction = (4 + target.phase_exp - forward.phase_exp) % 4;
            Ok(cand.with_extra_phase(correction))
        };
        let x_images = (0..n)
            .map(|q| solve(&PauliOperator::single(n, q, PauliKind::X)?))
            .collect::<Result<Vec<_>>>()?;
        let z_images = (0..n)
            .map(|q| solve(&PauliOperator::single(n, q, PauliKind::Z)?))
            .collect::<Result<Vec<_>>>()?;
        Ok(CliffordTableau { n, x_images, z_images })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> PauliOperator {
        PauliOperator::parse(s).unwrap()
    }

    #[test]
    fn x_times_z_is_minus_i_y() {
        let prod = p("X").multiply(&p("Z")).unwrap();
        // −i·Y = i³ · (i X Z) = i⁴ X Z → phase_exp 0 on (x=1,z=1)... as an
        // operator: XZ has phase_exp 0; −iY has phase 3 + 1 = 0 mod 4. Same.
        assert_eq!(prod.x_bits(), 1);
        assert_eq!(prod.z_bits(), 1);
        assert_eq!(prod.phase_exp(), 0);
        let y = p("Y");
        assert_eq!(y.phase_exp(), 1);
        assert_eq!(prod, y.with_extra_phase(3)); // XZ = −i·Y
    }

    #[test]
    fn identity_is_neutral() {
        for s in ["X", "Y", "Z", "-Y"] {
            let q = p(s);
            let id = PauliOperator::identity(1);
            assert_eq!(id.multiply(&q).unwrap(), q);
            assert_eq!(q.multiply(&id).unwrap(), q);
        }
    }

    #[test]
    fn commutation_basics() {
        assert!(!p("X").commutes(&p("Z")).unwrap());
        assert!(p("XX").commutes(&p("ZZ")).unwrap());
        assert!(p("XI").commutes(&p("IZ")).unwrap());
    }

    #[test]
    fn anticommuting_products_differ_by_sign() {
        let a = p("XY");
        let b = p("ZI");
        let ab = a.multiply(&b).unwrap();
        let ba = b.multiply(&a).unwrap();
        assert_eq!(ab, ba.with_extra_phase(2));
    }

    #[test]
    fn hermitian_predicate() {
        assert!(p("Y").is_hermitian());
        assert!(p("-ZZ").is_hermitian());
        assert!(!p("X").with_extra_phase(1).is_hermitian());
        let rep = PauliOperator::hermitian_rep(2, 0b11, 0b11).unwrap();
        assert!(rep.is_hermitian());
        assert_eq!(rep, p("YY"));
    }

    #[test]
    fn basis_action() {
        // (X⊗Z)|01⟩ = −|11⟩ ; index of |01⟩ is 0b01, qubit 0 = MSB
        let op = p("XZ");
        let (b, ph) = op.apply_to_basis(0b01);
        assert_eq!(b, 0b11);
        assert_eq!(ph, 2);
    }

    #[test]
    fn parse_display_round_trip() {
        for s in ["+XIZ", "-ZZ", "+Y", "-IYX"] {
            let op = p(s);
            assert_eq!(op.to_string(), s);
            assert!(op.is_hermitian());
        }
        assert_eq!(p("−ZZ"), p("-ZZ")); // unicode minus accepted
        assert!(PauliOperator::parse("XQ").is_err());
        assert!(PauliOperator::parse("").is_err());
    }

    #[test]
    fn gate_tableaus() {
        let h = CliffordTableau::for_gate("H", &[0], 1).unwrap();
        assert_eq!(h.conjugate(&p("X")).unwrap(), p("Z"));
        assert_eq!(h.conjugate(&p("Z")).unwrap(), p("X"));
        assert_eq!(h.conjugate(&p("Y")).unwrap(), p("-Y"));

        let s = CliffordTableau::for_gate("S", &[0], 1).unwrap();
        assert_eq!(s.conjugate(&p("X")).unwrap(), p("Y"));
        assert_eq!(s.conjugate(&p("Y")).unwrap(), p("-X"));

        let swap = CliffordTableau::for_gate("SWAP", &[0, 1], 2).unwrap();
        let twice = swap.compose(&swap).unwrap();
        assert_eq!(twice, CliffordTableau::identity(2).unwrap());

        let cx = CliffordTableau::for_gate("CX", &[0, 1], 2).unwrap();
        assert_eq!(cx.conjugate(&p("XI")).unwrap(), p("XX"));
        assert_eq!(cx.conjugate(&p("IZ")).unwrap(), p("ZZ"));
        assert_eq!(cx.conjugate(&p("ZI")).unwrap(), p("ZI"));
    }

    #[test]
    fn compose_and_inverse() {
        let n = 3;
        let gates: Vec<CliffordTableau> = vec![
            CliffordTableau::for_gate("H", &[0], n).unwrap(),
            CliffordTableau::for_gate("CX", &[0, 2], n).unwrap(),
            CliffordTableau::for_gate("S", &[1], n).unwrap(),
            CliffordTableau::for_gate("CZ", &[1, 2], n).unwrap(),
            CliffordTableau::for_gate("Sdg", &[0], n).unwrap(),
        ];
        let mut c = CliffordTableau::identity(n).unwrap();
        for g in &gates {
            c = g.compose(&c).unwrap();
        }
        let inv = c.inverse().unwrap();
        let id = inv.compose(&c).unwrap();
        assert_eq!(id, CliffordTableau::identity(n).unwrap());
        let id2 = c.compose(&inv).unwrap();
        assert_eq!(id2, CliffordTableau::identity(n).unwrap());

        // group action: conjugating by the composition matches nesting
        let p1 = p("XYZ");
        let nested = gates.iter().fold(p1, |acc, g| g.conjugate(&acc).unwrap());
        assert_eq!(c.conjugate(&p1).unwrap(), nested);
    }

    #[test]
    fn conjugation_preserves_structure() {
        let c = CliffordTableau::for_gate("CZ", &[0, 1], 2)
            .unwrap()
            .compose(&CliffordTableau::for_gate("H", &[1], 2).unwrap())
            .unwrap();
        let pairs = [("XI", "IZ"), ("YY", "ZZ"), ("XX", "YZ")];
        for (a, b) in pairs {
            let (pa, pb) = (p(a), p(b));
            let (ca, cb) = (c.conjugate(&pa).unwrap(), c.conjugate(&pb).unwrap());
            assert_eq!(pa.commutes(&pb).unwrap(), ca.commutes(&cb).unwrap());
            assert_eq!(pa.is_hermitian(), ca.is_hermitian());
        }
    }

    #[test]
    fn swap_tableau_exchanges_qubits() {
        let c = CliffordTableau::for_gate("SWAP", &[0, 2], 3).unwrap();
        assert_eq!(c.conjugate(&p("-IIX")).unwrap(), p("-XII"));
        assert_eq!(c.conjugate(&p("ZIY")).unwrap(), p("YIZ"));
        assert_eq!(c.conjugate(&p("IZI")).unwrap(), p("IZI"));
        // SWAP is an involution
        let id = c.compose(&c).unwrap();
        assert_eq!(id, CliffordTableau::identity(3).unwrap());
    }
}
