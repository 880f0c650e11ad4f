//! Compilation of post-selected stabilizer circuits into the canonical form
//! `C · M_{P₁} ⋯ M_{P_k}`.
//!
//! A circuit of Clifford gates and post-selected Pauli measurements on a fixed
//! register is rewritten by pushing every Clifford to the end (projectors
//! conjugate to projectors) and then classifying each conjugated measurement
//! `P` against the stabilizer group of the *chain state* — the input with all
//! measurements retained so far applied:
//!
//! * `P` is a stabilizer → the projector acts as the identity and is dropped;
//! * `−P` is a stabilizer → the post-selection annihilates the state;
//! * some stabilizer `Q` anticommutes with `P` → the measurement equals the
//!   Clifford `(I + PQ)/√2` on this state and is absorbed into the end
//!   Clifford (the chain state is untouched);
//! * otherwise `P` is retained as a canonical commuting measurement.
//!
//! [`canonical_form`] additionally pads the retained set to exactly
//! `k = ν(input) − ν(output)` with stabilizers of the final chain state and
//! rotates the end Clifford so the compiled output is literally
//! `|0⟩^{⊗(n−m)} ⊗ ψ_out` — the stabilizer tensor factor is fixed to the
//! leading zero register.
//!
//! [`trivialize_stabilizer`] is the supporting factorization
//! `s = C (|0⟩^{⊗r} ⊗ φ′)` with `r = n − ν(s)`, and [`tableau_gates`]
//! synthesizes any Clifford tableau into named gates (exact tableau equality;
//! state application realizes the unitary up to global phase).

use std::collections::BTreeMap;

use crate::pauli::{CliffordTableau, PauliKind, PauliOperator};
use crate::simulator::{build_measure_pauli, CircuitIR, Instruction, MeasureMode};
use crate::states::ExactState;
use crate::{Error, Result};

/// A compiled post-selected circuit: `clifford · M_{P₁} ⋯ M_{P_k}` with the
/// measurements listed in application order (index 0 acts first).
#[derive(Clone, Debug)]
pub struct CanonicalForm {
    /// Pairwise commuting, independent Hermitian Pauli measurements.
    pub measurements: Vec<PauliOperator>,
    /// The end Clifford `C`.
    pub clifford: CliffordTableau,
    /// A named-gate realization of `clifford` (exact as a tableau; as a
    /// unitary it is fixed only up to global phase).
    pub clifford_gates: Vec<(String, Vec<usize>)>,
    /// True when a post-selection had exact probability zero; the remaining
    /// instructions were not processed.
    pub annihilated: bool,
    /// Register size.
    pub n: usize,
    pub nullity_in: u32,
    pub nullity_out: u32,
}

impl CanonicalForm {
    /// Number of canonical measurements, `ν_in − ν_out` for a full
    /// [`canonical_form`] compilation.
    pub fn k(&self) -> usize {
        self.measurements.len()
    }

    /// Qubit count of the non-stabilizer output block.
    pub fn m(&self) -> usize {
        self.nullity_out as usize
    }

    /// Applies the compiled form to a state: all projectors, then the
    /// Clifford gates. The result is proportional to the direct circuit
    /// output (for [`normalize_measurements`]) or to
    /// `|0⟩^{⊗(n−m)} ⊗ ψ_out` (for [`canonical_form`]).
    pub fn apply(&self, input: &ExactState) -> Result<ExactState> {
        let mut s = input.clone();
        for p in &self.measurements {
            let (proj, norm) = s.project(p, 1)?;
            if norm.is_zero() {
                return Err(Error::Annihilation(format!("canonical measurement {p}")));
            }
            s = proj;
        }
        for (g, qs) in &self.clifford_gates {
            s.apply_clifford_gate(g, qs)?;
        }
        Ok(s)
    }
}

/// The factorization `s = C (|0⟩^{⊗r} ⊗ residual)`, `r = n − ν(s)`.
#[derive(Clone, Debug)]
pub struct Trivialization {
    /// `C`, as a tableau.
    pub clifford: CliffordTableau,
    /// Gate realization of `C`; applying these to `|0⟩^{⊗r} ⊗ residual`
    /// reproduces `s` exactly, including global phase.
    pub gates: Vec<(String, Vec<usize>)>,
    /// Number of leading zero qubits, `n − ν(s)`.
    pub r: usize,
    /// The trivial-stabilizer factor; `None` when `s` is a stabilizer state
    /// (then `s = scalar · C|0⟩^{⊗n}`).
    pub residual: Option<ExactState>,
    /// Scalar amplitude covering the `residual: None` case; `1` otherwise.
    pub scalar: crate::cyclotomic::Cyclotomic,
}

// ---------------------------------------------------------------------------
// Stabilizer trivialization
// ---------------------------------------------------------------------------

/// Finds a Clifford `C` with `s = C (|0⟩^{⊗r} ⊗ φ′)` where `φ′` has trivial
/// stabilizer, by sweeping each stabilizer generator to `+Z_i` with
/// elementary gates.
pub fn trivialize_stabilizer(s: &ExactState) -> Result<Trivialization> {
    let n = s.n();
    let mut gens = s.stabilizer_group()?;
    let r = gens.len();
    let mut state = s.clone();
    let mut applied: Vec<(String, Vec<usize>)> = Vec::new();

    // applies a gate to the tracked state and every generator image
    let mut emit = |gate: &str,
                    qs: Vec<usize>,
                    state: &mut ExactState,
                    gens: &mut Vec<PauliOperator>|
     -> Result<()> {
        state.apply_clifford_gate(gate, &qs)?;
        let t = CliffordTableau::for_gate(gate, &qs, n)?;
        for g in gens.iter_mut() {
            *g = t.conjugate(g)?;
        }
        applied.push((gate.to_string(), qs));
        Ok(())
    };

    for i in 0..r {
        // establish gens[i] = +Z_i without disturbing Z_0..Z_{i-1}
        let support: Vec<usize> = (i..n)
            .filter(|&q| gens[i].kind_at(q) != PauliKind::I)
            .collect();
        if support.is_empty() {
            return Err(Error::Internal(
                "independent stabilizer generator vanished on the working block".into(),
            ));
        }
        // turn every non-identity letter into X
        for &q in &support {
            match gens[i].kind_at(q) {
                PauliKind::Y => emit("S", vec![q], &mut state, &mut gens)?,
                PauliKind::Z => emit("H", vec![q], &mut state, &mut gens)?,
                _ => {}
            }
        }
        // fold all X's onto a pivot, move the pivot to qubit i
        let pivot = if gens[i].kind_at(i) == PauliKind::X { i } else { support[0] };
        for &q in &support {
            if q != pivot && gens[i].kind_at(q) == PauliKind::X {
                emit("CX", vec![pivot, q], &mut state, &mut gens)?;
            }
        }
        if pivot != i {
            emit("SWAP", vec![i, pivot], &mut state, &mut gens)?;
        }
        emit("H", vec![i], &mut state, &mut gens)?;
        // clear residual Z letters on already-fixed qubits
        for q in 0..i {
            if gens[i].kind_at(q) == PauliKind::Z {
                emit("CX", vec![q, i], &mut state, &mut gens)?;
            }
        }
        if gens[i].phase_exp() == 2 {
            emit("X", vec![i], &mut state, &mut gens)?;
        }
        let want = PauliOperator::single(n, i, PauliKind::Z)?;
        if gens[i] != want {
            return Err(Error::Internal(format!(
                "generator sweep produced {} instead of +Z_{i}",
                gens[i]
            )));
        }
    }

    // `state` is now C† s with +Z_0..+Z_{r-1} stabilizers: the leading r
    // qubits factor out as |0⟩ exactly
    let rest = 1usize << (n - r);
    for idx in rest..(1usize << n) {
        if !state.amp(idx).is_zero() {
            return Err(Error::Internal(
                "trivialized state has weight outside the zero block".into(),
            ));
        }
    }
    let (residual, scalar) = if r == n {
        (None, state.amp(0).clone())
    } else {
        let amps = (0..rest).map(|j| state.amp(j).clone()).collect();
        (
            Some(ExactState::from_amps(n - r, amps)?),
            crate::cyclotomic::Cyclotomic::one(),
        )
    };

    // C = inverse of the applied sweep
    let gates = invert_gate_sequence(&applied);
    let mut tableau = CliffordTableau::identity(n)?;
    for (g, qs) in &gates {
        tableau = CliffordTableau::for_gate(g, qs, n)?.compose(&tableau)?;
    }
    Ok(Trivialization { clifford: tableau, gates, r, residual, scalar })
}

/// Reverses a gate sequence and inverts each gate (every gate in the
/// vocabulary is self-inverse except `S`/`Sdg`).
fn invert_gate_sequence(gates: &[(String, Vec<usize>)]) -> Vec<(String, Vec<usize>)> {
    gates
        .iter()
        .rev()
        .map(|(g, qs)| {
            let inv = match g.as_str() {
                "S" => "Sdg",
                "Sdg" => "S",
                other => other,
            };
            (inv.to_string(), qs.clone())
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Tableau synthesis
// ---------------------------------------------------------------------------

/// Synthesizes a named-gate sequence whose composed tableau equals `t`
/// exactly (signs included). As a unitary the sequence realizes `t` up to
/// global phase.
pub fn tableau_gates(t: &CliffordTableau) -> Result<Vec<(String, Vec<usize>)>> {
    let n = t.n();
    let mut cur = t.clone();
    let mut applied: Vec<(String, Vec<usize>)> = Vec::new();
    let mut emit = |gate: &str, qs: Vec<usize>, cur: &mut CliffordTableau| -> Result<()> {
        *cur = CliffordTableau::for_gate(gate, &qs, n)?.compose(cur)?;
        applied.push((gate.to_string(), qs));
        Ok(())
    };

    for i in 0..n {
        // X_i image → +X_i
        let xp = cur.x_image(i).clone();
        let support: Vec<usize> = (i..n).filter(|&q| xp.kind_at(q) != PauliKind::I).collect();
        debug_assert!(!support.is_empty(), "image must touch the working block");
        for &q in &support {
            match cur.x_image(i).kind_at(q) {
                PauliKind::Y => emit("S", vec![q], &mut cur)?,
                PauliKind::Z => emit("H", vec![q], &mut cur)?,
                _ => {}
            }
        }
        let pivot = if cur.x_image(i).kind_at(i) == PauliKind::X { i } else { support[0] };
        for &q in &support {
            if q != pivot && cur.x_image(i).kind_at(q) == PauliKind::X {
                emit("CX", vec![pivot, q], &mut cur)?;
            }
        }
        if pivot != i {
            emit("SWAP", vec![i, pivot], &mut cur)?;
        }

        // Z_i image → ±Z_i without disturbing X_i
        let need_work = {
            let z = cur.z_image(i);
            z.weight() != 1 || z.kind_at(i) != PauliKind::Z
        };
        if need_work {
            emit("H", vec![i], &mut cur)?; // X_i ↔ Z_i roles
            // the Z_i image now anticommutes with Z_i, i.e. has X or Y at i
            if cur.z_image(i).kind_at(i) == PauliKind::Y {
                emit("S", vec![i], &mut cur)?; // Y_i → −X_i, preserves Z_i
            }
            let zsupport: Vec<usize> =
                ((i + 1)..n).filter(|&q| cur.z_image(i).kind_at(q) != PauliKind::I).collect();
            for &q in &zsupport {
                match cur.z_image(i).kind_at(q) {
                    PauliKind::Y => emit("S", vec![q], &mut cur)?,
                    PauliKind::Z => emit("H", vec![q], &mut cur)?,
                    _ => {}
                }
            }
            for &q in &zsupport {
                if cur.z_image(i).kind_at(q) == PauliKind::X {
                    emit("CX", vec![i, q], &mut cur)?; // control i preserves Z_i
                }
            }
            emit("H", vec![i], &mut cur)?; // swap back
        }

        // sign fixes (Z_i commutes with Z_i-image, X_i with X_i-image)
        if cur.x_image(i).phase_exp() == 2 {
            emit("Z", vec![i], &mut cur)?;
        }
        if cur.z_image(i).phase_exp() == 2 {
            emit("X", vec![i], &mut cur)?;
        }
        let want_x = PauliOperator::single(n, i, PauliKind::X)?;
        let want_z = PauliOperator::single(n, i, PauliKind::Z)?;
        if *cur.x_image(i) != want_x || *cur.z_image(i) != want_z {
            return Err(Error::Internal(format!(
                "tableau sweep failed at qubit {i}: X ↦ {}, Z ↦ {}",
                cur.x_image(i),
                cur.z_image(i)
            )));
        }
    }
    Ok(invert_gate_sequence(&applied))
}

// ---------------------------------------------------------------------------
// Measurement normalization
// ---------------------------------------------------------------------------

/// The tableau of `(I + PQ)/√2` where `P`, `Q` anticommute: Paulis commuting
/// with `PQ` are fixed, the rest are multiplied by `PQ`.
fn measurement_clifford(p: &PauliOperator, q: &PauliOperator) -> Result<CliffordTableau> {
    debug_assert!(
        !p.commutes(q).unwrap_or(true),
        "measurement conversion needs an anticommuting partner"
    );
    let pq = p.multiply(q)?;
    let n = p.n();
    let image = |r: PauliOperator| -> Result<PauliOperator> {
        if r.commutes(&pq)? {
            Ok(r)
        } else {
            pq.multiply(&r)
        }
    };
    let x_images = (0..n)
        .map(|i| image(PauliOperator::single(n, i, PauliKind::X)?))
        .collect::<Result<Vec<_>>>()?;
    let z_images = (0..n)
        .map(|i| image(PauliOperator::single(n, i, PauliKind::Z)?))
        .collect::<Result<Vec<_>>>()?;
    CliffordTableau::from_images(x_images, z_images)
}

/// Processes a circuit instruction-by-instruction, maintaining the end
/// Clifford and the retained-measurement chain state.
struct WeakFormRun {
    acc: CliffordTableau,
    cur: ExactState,
    retained: Vec<PauliOperator>,
    annihilated: bool,
}

fn weak_form(c: &CircuitIR, input: &ExactState) -> Result<WeakFormRun> {
    c.validate()?;
    let n = input.n();
    if c.qubits != n {
        return Err(Error::SizeMismatch(c.qubits, n));
    }
    let mut run = WeakFormRun {
        acc: CliffordTableau::identity(n)?,
        cur: input.clone(),
        retained: Vec::new(),
        annihilated: false,
    };
    for ins in &c.instructions {
        match ins {
            Instruction::Gate { op, cond } => {
                if !cond.is_empty() {
                    return Err(Error::InvalidParameter(
                        "canonicalization requires unconditioned Clifford gates".into(),
                    ));
                }
                let Some(word) = crate::simulator::clifford_gate_word(op)? else {
                    return Err(Error::InvalidParameter(format!(
                        "canonicalization requires Clifford gates, found `{}`",
                        op.name
                    )));
                };
                for (g, qs) in &word {
                    run.acc = CliffordTableau::for_gate(g, qs, n)?.compose(&run.acc)?;
                }
            }
            Instruction::Measure(mop) => {
                let sign = match mop.mode {
                    MeasureMode::PostPlus => 1,
                    MeasureMode::PostMinus => -1,
                    _ => {
                        return Err(Error::InvalidParameter(
                            "canonicalization requires post-selected measurements only".into(),
                        ))
                    }
                };
                let mut p = build_measure_pauli(mop, n)?;
                if sign < 0 {
                    p = p.negated();
                }
                // push through the accumulated Clifford: M_P C = C M_{C†PC}
                let p2 = run.acc.inverse()?.conjugate(&p)?;
                match run.cur.eigensign(&p2) {
                    Some(1) => {} // probability-1: drop
                    Some(_) => {
                        run.annihilated = true;
                        break;
                    }
                    None => {
                        let gens = run.cur.stabilizer_group()?;
                        if let Some(partner) =
                            gens.iter().find(|g| matches!(g.commutes(&p2), Ok(false)))
                        {
                            // probability-1/2: equals the Clifford (I+PQ)/√2
                            let u = measurement_clifford(&p2, partner)?;
                            run.acc = run.acc.compose(&u)?;
                        } else {
                            let (proj, norm) = run.cur.project(&p2, 1)?;
                            if norm.is_zero() {
                                return Err(Error::Internal(
                                    "projection along a non-stabilizer commuting Pauli vanished"
                                        .into(),
                                ));
                            }
                            run.retained.push(p2);
                            run.cur = proj;
                        }
                    }
                }
            }
            other => {
                return Err(Error::InvalidParameter(format!(
                    "canonicalization handles fixed-register circuits; found {other:?}"
                )))
            }
        }
    }
    Ok(run)
}

/// Rewrites a post-selected circuit as `C · M_{P_s} ⋯ M_{P_1}` (weak form):
/// dropped / annihilating / Clifford-converted / retained per measurement.
/// The retained set is not padded; see [`canonical_form`] for the full
/// `k = ν_in − ν_out` accounting.
pub fn normalize_measurements(c: &CircuitIR, input: &ExactState) -> Result<CanonicalForm> {
    let nullity_in = input.stabilizer_nullity()?;
    let run = weak_form(c, input)?;
    let nullity_out = run.cur.stabilizer_nullity()?;
    let clifford_gates = tableau_gates(&run.acc)?;
    Ok(CanonicalForm {
        measurements: run.retained,
        clifford: run.acc,
        clifford_gates,
        annihilated: run.annihilated,
        n: input.n(),
        nullity_in,
        nullity_out,
    })
}

/// GF(2) span of symplectic `(x|z)` rows for independence bookkeeping.
struct SymplecticSpan {
    rows: Vec<u128>,
}

impl SymplecticSpan {
    fn new() -> Self {
        SymplecticSpan { rows: Vec::new() }
    }

    fn pack(p: &PauliOperator) -> u128 {
        ((p.x_bits() as u128) << p.n()) | p.z_bits() as u128
    }

    /// Inserts the row if independent of the current span; returns whether
    /// it was independent.
    fn insert(&mut self, p: &PauliOperator) -> bool {
        let mut v = Self::pack(p);
        for &row in &self.rows {
            let lead = 127 - row.leading_zeros();
            if v & (1u128 << lead) != 0 {
                v ^= row;
            }
        }
        if v == 0 {
            return false;
        }
        self.rows.push(v);
        self.rows.sort_unstable_by(|a, b| b.cmp(a));
        true
    }
}

/// Full Theorem-3 compilation: weak form, padding of the measurement set to
/// exactly `k = ν_in − ν_out` with stabilizers of the final chain state, and
/// rotation of the end Clifford so the compiled output is
/// `|0⟩^{⊗(n−m)} ⊗ ψ_out` — phase-proportional to the trivialized direct
/// circuit output.
pub fn canonical_form(c: &CircuitIR, input: &ExactState) -> Result<CanonicalForm> {
    let nullity_in = input.stabilizer_nullity()?;
    let run = weak_form(c, input)?;
    if run.annihilated {
        return Err(Error::Annihilation(
            "post-selected circuit annihilates the input".into(),
        ));
    }
    let n = input.n();
    let nullity_out = run.cur.stabilizer_nullity()?;
    let k = (nullity_in - nullity_out) as usize;

    // pad the retained set to k independent commuting measurements
    let mut span = SymplecticSpan::new();
    for g in input.stabilizer_group()? {
        span.insert(&g);
    }
    let mut measurements = run.retained.clone();
    for p in &measurements {
        if !span.insert(p) {
            return Err(Error::Internal(
                "retained measurement is dependent on the input stabilizer".into(),
            ));
        }
    }
    if measurements.len() > k {
        return Err(Error::Internal(format!(
            "retained {} measurements but nullity dropped by {k}",
            measurements.len()
        )));
    }
    for g in run.cur.stabilizer_group()? {
        if measurements.len() == k {
            break;
        }
        if span.insert(&g) {
            measurements.push(g);
        }
    }
    if measurements.len() != k {
        return Err(Error::Internal(format!(
            "could only assemble {} of {k} canonical measurements",
            measurements.len()
        )));
    }

    // direct output (up to global phase), then fix |S⟩ = |0⟩^{n-m}
    let mut psi_dir = run.cur.clone();
    let acc_gates = tableau_gates(&run.acc)?;
    for (g, qs) in &acc_gates {
        psi_dir.apply_clifford_gate(g, qs)?;
    }
    let triv = trivialize_stabilizer(&psi_dir)?;
    debug_assert_eq!(triv.r, n - nullity_out as usize);
    let clifford = triv.clifford.inverse()?.compose(&run.acc)?;
    let mut clifford_gates = acc_gates;
    clifford_gates.extend(invert_gate_sequence(&triv.gates));

    Ok(CanonicalForm {
        measurements,
        clifford,
        clifford_gates,
        annihilated: false,
        n,
        nullity_in,
        nullity_out,
    })
}

/// Exact joint `+1` probability of a commuting measurement list on a
/// unit-norm state (the canonical-form probability, `∏` of conditional
/// projections = final norm certificate).
pub fn joint_probability(
    input: &ExactState,
    measurements: &[PauliOperator],
) -> Result<crate::cyclotomic::Cyclotomic> {
    if !input.is_unit_norm() {
        return Err(Error::InvalidParameter(
            "joint probability requires a unit-norm input".into(),
        ));
    }
    let mut s = input.clone();
    for p in measurements {
        s = s.project(p, 1)?.0;
    }
    Ok(s.norm_sq().clone())
}
