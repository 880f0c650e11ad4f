//! Phase polynomials for diagonal gates at the third level of the Clifford
//! hierarchy: `U_f = Σ_x exp(iπ f(x)/4)|x⟩⟨x|` with
//! `f(x) = Σ_k a_k λ_k(x) (mod 8)`, `a_k ∈ ℤ₈` and each `λ_k` a nonzero
//! 𝔽₂-linear functional.
//!
//! The representation is kept canonical (functionals distinct and sorted,
//! coefficients reduced mod 8 and nonzero), which makes the term count of the
//! odd part a T-count upper bound τ. [`PhasePolynomial::catalytic_conversion`]
//! turns the GF(2) row reduction of the odd part's matrix into an executable
//! circuit: CNOTs re-frame the functionals to `(𝟙_r | A)`, and each `A`
//! column is cancelled by a T†-gadget that consumes one injected `|T⟩`. The
//! state `U_f|+⟩^⊗n` plus `τ − r` T states thereby becomes `|T⟩^⊗r`
//! (tensored with `|+⟩` on the rank-deficient qubits).
//!
//! Text format, one term per line: `a : bits` where `bits` has one character
//! per qubit (leftmost = qubit 0), e.g. `1 : 101`. `#` starts a comment.

use std::fmt;

use crate::cyclotomic::Cyclotomic;
use crate::simulator::CircuitIR;
use crate::states::ExactState;
use crate::{Error, Result};

/// Cap on exact diagonal evaluation (dense `2^n` vector).
pub const EVAL_CAP: usize = 10;

/// A canonical phase polynomial: distinct nonzero functionals in increasing
/// mask order, coefficients in `1..=7`.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct PhasePolynomial {
    n: usize,
    /// `(a_k, λ_k)`; the mask uses the basis-index convention, qubit `q` ↔
    /// bit `n−1−q`, so `λ(x) = parity(mask & x)`.
    terms: Vec<(u8, u64)>,
}

impl PhasePolynomial {
    /// Builds the canonical form of a raw term list: coefficients are merged
    /// per functional mod 8, zero terms dropped, functionals sorted.
    pub fn new(n: usize, raw: impl IntoIterator<Item = (i64, u64)>) -> Result<Self> {
        if n == 0 || n > crate::MAX_QUBITS {
            return Err(Error::QubitCap(n, crate::MAX_QUBITS));
        }
        let full = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
        let mut merged: std::collections::BTreeMap<u64, i64> = std::collections::BTreeMap::new();
        for (a, mask) in raw {
            if mask == 0 {
                return Err(Error::InvalidParameter(
                    "phase polynomial functionals must be nonzero".into(),
                ));
            }
            if mask & !full != 0 {
                return Err(Error::InvalidParameter(format!(
                    "functional {mask:#b} exceeds {n} qubits"
                )));
            }
            *merged.entry(mask).or_insert(0) += a;
        }
        let terms = merged
            .into_iter()
            .filter_map(|(mask, a)| {
                let a = a.rem_euclid(8) as u8;
                (a != 0).then_some((a, mask))
            })
            .collect();
        Ok(PhasePolynomial { n, terms })
    }

    /// Re-canonicalization; the constructor already enforces the invariant,
    /// so this is the identity on any constructed value.
    pub fn canonicalize(&self) -> PhasePolynomial {
        self.clone()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Canonical `(coefficient, functional-mask)` terms.
    pub fn terms(&self) -> &[(u8, u64)] {
        &self.terms
    }

    /// `f = Σ a_k λ_k` with `P = 𝟙_n`: the polynomial of `T^{⊗n}`.
    pub fn t_tensor(n: usize) -> Result<Self> {
        let terms: Vec<(i64, u64)> = (0..n).map(|q| (1, 1u64 << (n - 1 - q))).collect();
        PhasePolynomial::new(n, terms)
    }

    /// The matrix `(𝟙_n | 1)`: singleton functionals plus the all-ones
    /// functional, every coefficient 1.
    pub fn w_polynomial(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidParameter("W requires n ≥ 2".into()));
        }
        let full = (1u64 << n) - 1;
        let mut terms: Vec<(i64, u64)> = (0..n).map(|q| (1, 1u64 << (n - 1 - q))).collect();
        terms.push((1, full));
        PhasePolynomial::new(n, terms)
    }

    /// Parses the `a : bits` line format. The qubit count is the common
    /// length of the bit strings.
    pub fn parse(text: &str) -> Result<Self> {
        let mut n: Option<usize> = None;
        let mut raw: Vec<(i64, u64)> = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let lineno = idx + 1;
            let perr = |msg: String| Error::Parse { pos: format!("line {lineno}"), msg };
            let (a_str, bits) = line
                .split_once(':')
                .ok_or_else(|| perr("expected `coefficient : bits`".into()))?;
            let a: i64 = a_str
                .trim()
                .parse()
                .map_err(|_| perr(format!("bad coefficient `{}`", a_str.trim())))?;
            let bits = bits.trim();
            match n {
                None => n = Some(bits.len()),
                Some(w) if w != bits.len() => {
                    return Err(perr(format!(
                        "bit string has {} qubits, earlier lines {w}",
                        bits.len()
                    )))
                }
                _ => {}
            }
            let mut mask = 0u64;
            for c in bits.chars() {
                mask = (mask << 1)
                    | match c {
                        '0' => 0,
                        '1' => 1,
                        _ => {
                            return Err(perr(format!(
                                "bit string may contain only 0/1, found `{c}`"
                            )))
                        }
                    };
            }
            raw.push((a, mask));
        }
        let n = n.ok_or_else(|| Error::Parse {
            pos: "end of input".into(),
            msg: "no terms found".into(),
        })?;
        PhasePolynomial::new(n, raw)
    }

    /// `f(x) ∈ ℤ₈` at one basis index.
    pub fn eval(&self, x: u64) -> u8 {
        self.terms
            .iter()
            .map(|&(a, mask)| a as u32 * ((mask & x).count_ones() & 1))
            .sum::<u32>() as u8
            % 8
    }

    /// The exact `2^n` diagonal of `U_f` (eighth roots of unity).
    pub fn to_diagonal_unitary(&self) -> Result<Vec<Cyclotomic>> {
        if self.n > EVAL_CAP {
            return Err(Error::QubitCap(self.n, EVAL_CAP));
        }
        (0..1u64 << self.n)
            .map(|x| Cyclotomic::root_of_unity(self.eval(x) as i64, 2))
            .collect()
    }

    /// `U_f |+⟩^⊗n`, exactly.
    pub fn apply_to_plus(&self) -> Result<ExactState> {
        let diag = self.to_diagonal_unitary()?;
        let mut scale = Cyclotomic::one().mul_pow2(-((self.n / 2) as i64));
        if self.n % 2 == 1 {
            scale = &scale * &Cyclotomic::inv_sqrt2();
        }
        ExactState::from_amps(self.n, diag.iter().map(|d| d * &scale).collect())
    }

    /// Splits `a_k = 2b_k + c_k` into the odd part `g` (all coefficients 1)
    /// and the Clifford part (coefficients `2b_k`), with `U_f = U_g · U_h`.
    pub fn clifford_split(&self) -> (PhasePolynomial, PhasePolynomial) {
        let g = self
            .terms
            .iter()
            .filter(|(a, _)| a % 2 == 1)
            .map(|&(_, mask)| (1u8, mask))
            .collect();
        let h = self
            .terms
            .iter()
            .filter_map(|&(a, mask)| {
                let even = a & !1;
                (even != 0).then_some((even, mask))
            })
            .collect();
        (
            PhasePolynomial { n: self.n, terms: g },
            PhasePolynomial { n: self.n, terms: h },
        )
    }

    /// Upper bound on the T-count: the number of odd-coefficient terms.
    pub fn tau_upper(&self) -> usize {
        self.terms.iter().filter(|(a, _)| a % 2 == 1).count()
    }

    /// True iff every qubit-row of the odd part's matrix `P` has even
    /// Hamming weight; then `U_f` is a product of CS/CCZ gates up to
    /// Clifford and `U_f|+⟩^⊗n` has Gaussian ring level.
    pub fn even_row_weight(&self) -> bool {
        let mut parity = 0u64;
        for &(a, mask) in &self.terms {
            if a % 2 == 1 {
                parity ^= mask;
            }
        }
        parity == 0
    }

    /// GF(2) rank of the odd part's matrix `P` (functionals as columns).
    pub fn matrix_rank(&self) -> usize {
        let mut basis: Vec<u64> = Vec::new();
        for &(a, mask) in &self.terms {
            if a % 2 == 0 {
                continue;
            }
            let mut v = mask;
            for &b in &basis {
                v = v.min(v ^ b);
            }
            if v != 0 {
                basis.push(v);
                basis.sort_unstable_by(|x, y| y.cmp(x));
            }
        }
        basis.len()
    }

    /// Emits and accounts the catalytic conversion
    /// `U_f|+⟩^⊗n ⊗ |T⟩^{⊗(τ−r)} → |T⟩^{⊗r} ⊗ |+⟩^{⊗(n−r)}`:
    /// the circuit undoes the Clifford part, row-reduces `P` with
    /// CNOT/SWAP gates, and cancels each non-pivot column with a
    /// T†-injection gadget. Reported counts follow the catalysis theorem
    /// with the stabilizer nullity ν: catalyst `τ − ν`, net production
    /// `2ν − τ`.
    pub fn catalytic_conversion(&self) -> Result<CatalysisReport> {
        let n = self.n;
        let state = self.apply_to_plus()?;
        let nullity = state.stabilizer_nullity()?;
        let (g, h) = self.clifford_split();
        let tau = g.terms.len();

        let mut lines: Vec<String> = vec![format!("qubits {n}")];
        // undo the Clifford part: S^{−b} conjugated by the CNOT fold of λ
        for &(a, mask) in &h.terms {
            let b = a / 2;
            let gate = match (4 - b) % 4 {
                1 => "S",
                2 => "Z",
                _ => "Sdg",
            };
            let (folds, target) = fold_lines(n, mask);
            lines.extend(folds.iter().cloned());
            lines.push(format!("gate {gate} {target}"));
            lines.extend(folds.iter().rev().cloned());
        }

        // row-reduce P in place, mirroring every row operation as a gate:
        // CX a b performs row_a ^= row_b, SWAP exchanges two rows
        let tau_total = g.terms.len();
        let mut rows: Vec<u64> = (0..n)
            .map(|q| {
                let qbit = 1u64 << (n - 1 - q);
                g.terms
                    .iter()
                    .enumerate()
                    .filter(|(_, &(_, mask))| mask & qbit != 0)
                    .fold(0u64, |acc, (k, _)| acc | (1u64 << k))
            })
            .collect();
        let mut pivot = 0usize;
        let mut non_pivot_cols: Vec<usize> = Vec::new();
        for k in 0..tau_total {
            let colbit = 1u64 << k;
            let Some(s) = (pivot..n).find(|&s| rows[s] & colbit != 0) else {
                non_pivot_cols.push(k);
                continue;
            };
            if s != pivot {
                rows.swap(s, pivot);
                lines.push(format!("gate SWAP {pivot} {s}"));
            }
            for t in 0..n {
                if t != pivot && rows[t] & colbit != 0 {
                    rows[t] ^= rows[pivot];
                    lines.push(format!("gate CX {t} {pivot}"));
                }
            }
            pivot += 1;
        }
        let rank = pivot;
        if rank < nullity as usize {
            return Err(Error::Internal(format!(
                "odd-part rank {rank} below stabilizer nullity {nullity}"
            )));
        }

        // cancel each residual column with a T† on its folded functional,
        // realized by injecting |T⟩ and branching on the gadget outcome
        for (idx, &k) in non_pivot_cols.iter().enumerate() {
            let mask = (0..n)
                .filter(|&q| rows[q] & (1u64 << k) != 0)
                .fold(0u64, |acc, q| acc | (1u64 << (n - 1 - q)));
            debug_assert!(mask != 0, "canonical functionals stay nonzero under row ops");
            let (folds, target) = fold_lines(n, mask);
            lines.extend(folds.iter().cloned());
            lines.push(format!("inject T -> {n}"));
            lines.push(format!("gate CX {target} {n}"));
            lines.push(format!("measure Z {n} -> branch AS c{idx}"));
            lines.push(format!("cond c{idx}=0 gate Sdg {target}"));
            lines.push(format!("discard {n}"));
            lines.extend(folds.iter().rev().cloned());
        }

        let circuit = CircuitIR::parse(&lines.join("\n"))?;
        circuit.validate()?;
        let expected_output = if rank == n {
            vec!["T"; rank].join(",")
        } else if rank == 0 {
            format!("plus:{n}")
        } else {
            format!("{},plus:{}", vec!["T"; rank].join(","), n - rank)
        };
        Ok(CatalysisReport {
            rank,
            tau,
            nullity,
            catalyst_t: tau - nullity as usize,
            produced_t: 2 * nullity as i64 - tau as i64,
            consumed_t: tau - rank,
            circuit,
            expected_output,
        })
    }
}

impl fmt::Display for PhasePolynomial {
    /// The parseable `a : bits` form, one term per line.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &(a, mask) in &self.terms {
            let bits: String =
                (0..self.n).map(|q| if mask & (1u64 << (self.n - 1 - q)) != 0 { '1' } else { '0' }).collect();
            writeln!(f, "{a} : {bits}")?;
        }
        Ok(())
    }
}

/// `CX` lines folding the functional's parity onto its highest-index support
/// qubit, returned with that target qubit.
fn fold_lines(n: usize, mask: u64) -> (Vec<String>, usize) {
    let support: Vec<usize> = (0..n).filter(|&q| mask & (1u64 << (n - 1 - q)) != 0).collect();
    let target = *support.last().expect("nonzero functional");
    let folds = support
        .iter()
        .filter(|&&q| q != target)
        .map(|&q| format!("gate CX {q} {target}"))
        .collect();
    (folds, target)
}

/// Accounting of one catalytic conversion, per the row-reduction theorem.
#[derive(Clone, Debug)]
pub struct CatalysisReport {
    /// GF(2) rank `r` of the odd part's matrix.
    pub rank: usize,
    /// T-count upper bound τ of the odd part.
    pub tau: usize,
    /// Stabilizer nullity ν of `U_f|+⟩^⊗n`.
    pub nullity: u32,
    /// `τ − ν`: T states that act as the catalyst.
    pub catalyst_t: usize,
    /// `2ν − τ`: net T states gained beyond the returned catalyst.
    pub produced_t: i64,
    /// `τ − r`: T states the verification circuit actually injects.
    pub consumed_t: usize,
    /// The conversion as a circuit on `n` qubits; input `U_f|+⟩^⊗n`.
    pub circuit: CircuitIR,
    /// State expression every branch must reach (up to phase).
    pub expected_output: String,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulator::simulate;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn canonicalization_merges_and_drops() {
        let empty = PhasePolynomial::new(1, vec![(1, 1), (7, 1)]).unwrap();
        assert!(empty.terms().is_empty());
        let clifford = PhasePolynomial::new(2, vec![(4, 0b10)]).unwrap();
        assert_eq!(clifford.terms(), &[(4, 0b10)]);
        let merged = PhasePolynomial::new(2, vec![(3, 0b01), (-1, 0b01), (9, 0b11)]).unwrap();
        assert_eq!(merged.terms(), &[(2, 0b01), (1, 0b11)]);
    }

    #[test]
    fn canonicalization_preserves_the_diagonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..40 {
            let n = rng.gen_range(1..=4usize);
            let raw: Vec<(i64, u64)> = (0..rng.gen_range(1..=6))
                .map(|_| (rng.gen_range(-12..12), rng.gen_range(1..1u64 << n)))
                .collect();
            let pp = PhasePolynomial::new(n, raw.clone()).unwrap();
            let diag = pp.to_diagonal_unitary().unwrap();
            for (x, d) in diag.iter().enumerate() {
                // oracle: evaluate the raw sum directly
                let f: i64 = raw
                    .iter()
                    .map(|&(a, mask)| a * ((mask & x as u64).count_ones() & 1) as i64)
                    .sum();
                assert_eq!(d, &Cyclotomic::root_of_unity(f.rem_euclid(8), 2).unwrap());
            }
        }
    }

    #[test]
    fn diagonal_of_singleton_is_t_gate() {
        let pp = PhasePolynomial::new(2, vec![(1, 0b10)]).unwrap();
        let diag = pp.to_diagonal_unitary().unwrap();
        let zeta = Cyclotomic::root_of_unity(1, 2).unwrap();
        assert_eq!(diag, vec![Cyclotomic::one(), Cyclotomic::one(), zeta.clone(), zeta]);
        let empty = PhasePolynomial::new(2, vec![(8, 0b10)]).unwrap();
        assert!(empty.to_diagonal_unitary().unwrap().iter().all(|d| d.is_one()));
    }

    #[test]
    fn w_polynomial_reproduces_w_states() {
        for n in 2..=5usize {
            let pp = PhasePolynomial::w_polynomial(n).unwrap();
            let got = pp.apply_to_plus().unwrap();
            let want = ExactState::w_state(n).unwrap();
            assert_eq!(got.amps(), want.amps(), "n={n}");
        }
    }

    #[test]
    fn clifford_split_reconstructs_exactly() {
        let pp = PhasePolynomial::new(2, vec![(1, 0b10), (2, 0b01)]).unwrap();
        let (g, h) = pp.clifford_split();
        assert_eq!(g.terms(), &[(1, 0b10)]);
        assert_eq!(h.terms(), &[(2, 0b01)]);

        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..25 {
            let raw: Vec<(i64, u64)> =
                (0..rng.gen_range(1..=6)).map(|_| (rng.gen_range(0..8), rng.gen_range(1..8u64))).collect();
            let pp = PhasePolynomial::new(3, raw).unwrap();
            let (g, h) = pp.clifford_split();
            assert!(h.terms().iter().all(|(a, _)| a % 2 == 0));
            assert!(g.terms().iter().all(|(a, _)| *a == 1));
            let full = pp.to_diagonal_unitary().unwrap();
            let dg = g.to_diagonal_unitary().unwrap();
            let dh = h.to_diagonal_unitary().unwrap();
            for x in 0..full.len() {
                assert_eq!(full[x], &dg[x] * &dh[x]);
            }
        }
    }

    #[test]
    fn tau_upper_counts_odd_terms() {
        for n in 2..=6usize {
            assert_eq!(PhasePolynomial::w_polynomial(n).unwrap().tau_upper(), n + 1);
        }
        for n in 1..=5usize {
            assert_eq!(PhasePolynomial::t_tensor(n).unwrap().tau_upper(), n);
        }
        let even = PhasePolynomial::new(2, vec![(2, 0b01), (4, 0b11)]).unwrap();
        assert_eq!(even.tau_upper(), 0);
    }

    #[test]
    fn even_row_weight_matches_ring_level() {
        for n in 2..=6usize {
            assert!(PhasePolynomial::w_polynomial(n).unwrap().even_row_weight());
        }
        assert!(!PhasePolynomial::t_tensor(1).unwrap().even_row_weight());

        let mut rng = ChaCha8Rng::seed_from_u64(37);
        let mut checked = 0;
        while checked < 10 {
            let n = rng.gen_range(2..=4usize);
            let mut masks: Vec<u64> =
                (0..rng.gen_range(1..=4)).map(|_| rng.gen_range(1..1u64 << n)).collect();
            masks.dedup();
            let parity = masks.iter().fold(0u64, |acc, m| acc ^ m);
            if parity != 0 {
                if masks.contains(&parity) {
                    continue;
                }
                masks.push(parity);
            }
            let pp =
                PhasePolynomial::new(n, masks.iter().map(|&m| (1i64, m)).collect::<Vec<_>>())
                    .unwrap();
            if !pp.even_row_weight() {
                continue; // a duplicate mask merged to coefficient 2
            }
            assert_eq!(pp.apply_to_plus().unwrap().ring_level(), 1);
            checked += 1;
        }
    }

    #[test]
    fn parse_round_trip() {
        let text = "1 : 101\n# comment\n3 : 010\n";
        let pp = PhasePolynomial::parse(text).unwrap();
        assert_eq!(pp.n(), 3);
        assert_eq!(pp.terms(), &[(3, 0b010), (1, 0b101)]);
        let again = PhasePolynomial::parse(&pp.to_string()).unwrap();
        assert_eq!(again, pp);
        assert!(PhasePolynomial::parse("1 : 10\n1 : 100").is_err());
        assert!(PhasePolynomial::parse("x : 10").is_err());
        assert!(PhasePolynomial::parse("1 : 012").is_err());
        assert!(PhasePolynomial::parse("").is_err());
    }

    #[test]
    fn w_conversion_counts_and_circuit() {
        for n in 2..=5usize {
            let pp = PhasePolynomial::w_polynomial(n).unwrap();
            let report = pp.catalytic_conversion().unwrap();
            assert_eq!(report.rank, n, "n={n}");
            assert_eq!(report.tau, n + 1);
            assert_eq!(report.nullity, n as u32);
            assert_eq!(report.catalyst_t, 1);
            assert_eq!(report.produced_t, (n as i64) - 1);
            assert_eq!(report.consumed_t, 1);

            let input = pp.apply_to_plus().unwrap();
            let want = crate::states::parse_state_expr(&report.expected_output).unwrap();
            let branches = simulate(&report.circuit, Some(&input)).unwrap();
            assert_eq!(branches.len(), 2);
            for b in &branches {
                assert!(b.is_half);
                assert!(b.state.equal_up_to_phase(&want).unwrap(), "n={n} {}", b.outcome);
                assert_eq!(b.tally.get("T"), Some(&1));
            }
        }
    }

    #[test]
    fn t_tensor_conversion_is_free() {
        let pp = PhasePolynomial::t_tensor(3).unwrap();
        let report = pp.catalytic_conversion().unwrap();
        assert_eq!((report.rank, report.tau, report.nullity), (3, 3, 3));
        assert_eq!((report.catalyst_t, report.produced_t, report.consumed_t), (0, 3, 0));
        let input = pp.apply_to_plus().unwrap();
        let branches = simulate(&report.circuit, Some(&input)).unwrap();
        assert_eq!(branches.len(), 1);
        let want = crate::states::parse_state_expr(&report.expected_output).unwrap();
        assert!(branches[0].state.equal_up_to_phase(&want).unwrap());
    }

    #[test]
    fn rank_dominates_nullity() {
        let mut rng = ChaCha8Rng::seed_from_u64(53);
        for _ in 0..20 {
            let n = rng.gen_range(2..=4usize);
            let raw: Vec<(i64, u64)> = (0..rng.gen_range(1..=5))
                .map(|_| (rng.gen_range(0..8), rng.gen_range(1..1u64 << n)))
                .collect();
            let pp = PhasePolynomial::new(n, raw).unwrap();
            let state = pp.apply_to_plus().unwrap();
            assert!(
                pp.matrix_rank() as u32 >= state.stabilizer_nullity().unwrap(),
                "{pp:?}"
            );
        }
    }

    #[test]
    fn random_conversions_reach_t_states() {
        // polynomials with a genuine Clifford part and rank deficit
        let mut rng = ChaCha8Rng::seed_from_u64(71);
        for _ in 0..8 {
            let n = rng.gen_range(2..=3usize);
            let raw: Vec<(i64, u64)> = (0..rng.gen_range(2..=4))
                .map(|_| (rng.gen_range(1..8), rng.gen_range(1..1u64 << n)))
                .collect();
            let pp = PhasePolynomial::new(n, raw).unwrap();
            let report = pp.catalytic_conversion().unwrap();
            if report.consumed_t > 3 {
                continue;
            }
            let input = pp.apply_to_plus().unwrap();
            let want = crate::states::parse_state_expr(&report.expected_output).unwrap();
            let branches = simulate(&report.circuit, Some(&input)).unwrap();
            assert_eq!(branches.len(), 1 << report.consumed_t);
            for b in &branches {
                assert!(b.state.equal_up_to_phase(&want).unwrap(), "{pp:?} {}", b.outcome);
            }
        }
    }
}
