//! Branch-exact simulation of post-selected stabilizer circuits.
//!
//! A [`CircuitIR`] is a straight-line program over a growable qubit register:
//! stabilizer allocations, Clifford gates, diagonal non-Clifford gates,
//! resource-state injections, Pauli measurements (post-selected, exhaustively
//! branched, or sampled), classically conditioned corrections, and discards of
//! exactly disentangled qubits.
//!
//! [`simulate`] executes every measurement outcome combination and returns one
//! [`Branch`] per leaf with an *exact* cumulative probability. No ring
//! division is ever performed: the register starts unit-norm, projectors give
//! the child norm certificate directly, and discards rescale by powers of
//! `√2`, so the cumulative path probability is always the current norm
//! certificate itself. Per-measurement "probability one half" checks compare
//! `2·‖child‖² = ‖parent‖²` exactly.
//!
//! # Text format
//!
//! Line-oriented; `#` starts a comment. The first significant line must be
//! `qubits N` (the register arity the circuit starts with). Instructions:
//!
//! ```text
//! qubits 2
//! alloc |0                    # append a |0⟩ qubit (index 2)
//! alloc +                     # append a |+⟩ qubit (index 3)
//! gate H 0                    # Clifford: H S Sdg X Y Z CX CZ SWAP
//! gate T 1                    # diagonal: T Tdg CS CSdg CCZ CnZ CnS
//! gate RZ 1 3 0               # RZ(j=1, d=3) = exp(iπ/8 |1⟩⟨1|) on qubit 0
//! inject T -> 4               # tensor a named state onto fresh indices
//! measure -ZZ 0 1 -> branch AS m1
//! measure X 2 -> post+        # modes: post+ post- branch sample
//! cond m1=1 gate X 2          # feed-forward; bit 1 means the −1 outcome
//! discard 3                   # later indices shift down by one
//! ```
//!
//! Measurement labels default to `m<k>` for the `k`-th measurement (1-based).
//! Outcome bit `0` records the `+1` eigenvalue, bit `1` the `−1` eigenvalue.

use std::collections::{BTreeMap, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cyclotomic::Cyclotomic;
use crate::pauli::{PauliKind, PauliOperator};
use crate::states::{parse_state_expr, ExactState};
use crate::{Error, Result, MAX_LEVEL, MAX_QUBITS};

/// Maximum number of branching measurements one circuit may contain
/// (the exhaustive tree has up to `2^TREE_GUARD` leaves).
pub const TREE_GUARD: usize = 14;

/// Multiset of consumed resources: injected states and applied non-Clifford
/// gates, keyed by canonical name (`"T"`, `"CS"`, `"CCZ"`, `"RZ:3:3"`,
/// `"CnZ:4"`, `"W:3"`, ...).
pub type ResourceTally = BTreeMap<String, usize>;

// ---------------------------------------------------------------------------
// Circuit IR
// ---------------------------------------------------------------------------

/// Stabilizer state appended by an `alloc` instruction.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AllocKind {
    /// `|0⟩`
    Zero,
    /// `|+⟩`
    Plus,
}

/// A named gate with integer parameters (only `RZ` has any: `[j, d]`).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GateOp {
    pub name: String,
    pub params: Vec<i64>,
    pub qubits: Vec<usize>,
}

/// How a measurement instruction resolves its outcome.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MeasureMode {
    /// Post-select the `+1` eigenspace; probability 0 is an annihilation error.
    PostPlus,
    /// Post-select the `−1` eigenspace.
    PostMinus,
    /// Follow both outcomes exhaustively.
    Branch,
    /// Draw one outcome from the seeded PRNG.
    Sample,
}

/// A Pauli measurement: signed letter string over an explicit qubit subset.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MeasureOp {
    /// Letters `IXYZ` with optional leading sign, e.g. `-ZZ`.
    pub literal: String,
    pub qubits: Vec<usize>,
    pub mode: MeasureMode,
    /// Outcome label; `None` defaults to `m<ordinal>`.
    pub label: Option<String>,
}

/// One circuit instruction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Instruction {
    /// Append a fresh stabilizer qubit at the next index.
    Alloc(AllocKind),
    /// Apply a gate, optionally conditioned on earlier outcome bits
    /// (conjunction of `label = bit` predicates).
    Gate {
        op: GateOp,
        cond: Vec<(String, u8)>,
    },
    /// Tensor a named resource state onto the next consecutive indices.
    Inject { expr: String, targets: Vec<usize> },
    /// Measure a Pauli operator.
    Measure(MeasureOp),
    /// Remove an exactly disentangled qubit; later indices shift down.
    Discard(usize),
}

/// A parsed circuit: declared starting arity plus instruction sequence.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CircuitIR {
    /// Register size at circuit start (before any instruction runs).
    pub qubits: usize,
    pub instructions: Vec<Instruction>,
}

/// One leaf of the exhaustive measurement tree.
#[derive(Clone, Debug)]
pub struct Branch {
    /// Comma-joined `label=bit` records in measurement order (bit 0 ↔ +1).
    pub outcome: String,
    /// Exact cumulative probability of this path (real, equals the final
    /// norm certificate of the unnormalized register).
    pub probability: Cyclotomic,
    /// True iff every measurement along the path had conditional
    /// probability exactly 1/2 for its realized outcome.
    pub is_half: bool,
    /// Final register state; unnormalized, its norm certificate is
    /// `probability`.
    pub state: ExactState,
    /// Resources consumed along this path (conditioned gates count only
    /// when they fired).
    pub tally: ResourceTally,
}

// ---------------------------------------------------------------------------
// Gate resolution
// ---------------------------------------------------------------------------

/// What a named gate does to the state, after parameter canonicalization.
enum GateAction {
    /// Dispatch to the named Clifford update.
    Clifford(&'static str),
    /// `exp(iπ j / 2^d |1⟩⟨1|)` on one qubit.
    Phase { j: i64, d: u8 },
    /// The same phase on the all-ones subspace of several qubits.
    ControlledPhase { j: i64, d: u8 },
    /// Reduced to the identity (e.g. `RZ 0 3`).
    Identity,
}

/// Resolves a gate name to its action and (if non-Clifford) its tally key.
fn resolve_gate(op: &GateOp) -> Result<(GateAction, Option<String>)> {
    let m = op.qubits.len();
    let arity = |want: usize| -> Result<()> {
        if m != want {
            return Err(Error::InvalidParameter(format!(
                "gate {} takes {want} qubit(s), got {m}",
                op.name
            )));
        }
        Ok(())
    };
    let no_params = || -> Result<()> {
        if !op.params.is_empty() {
            return Err(Error::InvalidParameter(format!(
                "gate {} takes no parameters",
                op.name
            )));
        }
        Ok(())
    };
    match op.name.as_str() {
        "H" | "S" | "Sdg" | "X" | "Y" | "Z" => {
            no_params()?;
            arity(1)?;
            Ok((GateAction::Clifford(clifford_name(&op.name)), None))
        }
        "CX" | "CZ" | "SWAP" => {
            no_params()?;
            arity(2)?;
            Ok((GateAction::Clifford(clifford_name(&op.name)), None))
        }
        "T" => {
            no_params()?;
            arity(1)?;
            Ok((GateAction::Phase { j: 1, d: 2 }, Some("T".into())))
        }
        "Tdg" => {
            no_params()?;
            arity(1)?;
            Ok((GateAction::Phase { j: -1, d: 2 }, Some("Tdg".into())))
        }
        "RZ" => {
            arity(1)?;
            if op.params.len() != 2 {
                return Err(Error::InvalidParameter(
                    "gate RZ takes parameters j d".into(),
                ));
            }
            let (mut j, d0) = (op.params[0], op.params[1]);
            if !(0..=MAX_LEVEL as i64).contains(&d0) {
                return Err(Error::LevelCap(d0.clamp(0, u8::MAX as i64) as u8, MAX_LEVEL));
            }
            let mut d = d0 as u8;
            // canonicalize: strip shared powers of two, reduce mod 2^{d+1}
            while j % 2 == 0 && j != 0 && d > 0 {
                j /= 2;
                d -= 1;
            }
            j = j.rem_euclid(1i64 << (d + 1));
            if j == 0 {
                return Ok((GateAction::Identity, None));
            }
            let tally = match (j, d) {
                (_, 0 | 1) => None, // Z^j / S^j are Clifford
                (1, 2) => Some("T".into()),
                (7, 2) => Some("Tdg".into()),
                _ => Some(format!("RZ:{j}:{d}")),
            };
            Ok((GateAction::Phase { j, d }, tally))
        }
        "CS" => {
            no_params()?;
            arity(2)?;
            Ok((GateAction::ControlledPhase { j: 1, d: 1 }, Some("CS".into())))
        }
        "CSdg" => {
            no_params()?;
            arity(2)?;
            Ok((GateAction::ControlledPhase { j: -1, d: 1 }, Some("CSdg".into())))
        }
        "CCZ" => {
            no_params()?;
            arity(3)?;
            Ok((GateAction::ControlledPhase { j: 1, d: 0 }, Some("CCZ".into())))
        }
        "CnZ" => {
            no_params()?;
            if m == 0 {
                return Err(Error::InvalidParameter("gate CnZ needs qubits".into()));
            }
            let tally = match m {
                0..=2 => None, // Z / CZ are Clifford
                3 => Some("CCZ".into()),
                _ => Some(format!("CnZ:{m}")),
            };
            Ok((GateAction::ControlledPhase { j: 1, d: 0 }, tally))
        }
        "CnS" => {
            no_params()?;
            if m == 0 {
                return Err(Error::InvalidParameter("gate CnS needs qubits".into()));
            }
            let tally = match m {
                1 => None, // S is Clifford
                2 => Some("CS".into()),
                _ => Some(format!("CnS:{m}")),
            };
            Ok((GateAction::ControlledPhase { j: 1, d: 1 }, tally))
        }
        other => Err(Error::UnknownGate(other.to_string())),
    }
}

/// Maps accepted gate spellings to the `apply_clifford_gate` dispatch names.
fn clifford_name(name: &str) -> &'static str {
    match name {
        "H" => "H",
        "S" => "S",
        "Sdg" => "Sdg",
        "X" => "X",
        "Y" => "Y",
        "Z" => "Z",
        "CX" => "CX",
        "CZ" => "CZ",
        "SWAP" => "SWAP",
        _ => unreachable!("resolve_gate gates only"),
    }
}

/// The named Clifford gate word realizing `op`, or `None` when the gate is
/// genuinely non-Clifford. Identity-reduced gates yield an empty word.
pub(crate) fn clifford_gate_word(op: &GateOp) -> Result<Option<Vec<(String, Vec<usize>)>>> {
    let (action, _) = resolve_gate(op)?;
    Ok(match action {
        GateAction::Identity => Some(Vec::new()),
        GateAction::Clifford(name) => Some(vec![(name.to_string(), op.qubits.clone())]),
        GateAction::Phase { j, d } => phase_word(j, d, op.qubits[0]),
        GateAction::ControlledPhase { j, d } => {
            if op.qubits.len() == 1 {
                phase_word(j, d, op.qubits[0])
            } else if d == 0 && op.qubits.len() == 2 && j.rem_euclid(2) == 1 {
                Some(vec![("CZ".to_string(), op.qubits.clone())])
            } else {
                None
            }
        }
    })
}

/// Clifford word for `exp(iπ j/2^d)` on `|1⟩⟨1|` of one qubit; `None` when
/// the rotation is finer than a quarter turn.
fn phase_word(j: i64, d: u8, q: usize) -> Option<Vec<(String, Vec<usize>)>> {
    let gate = |g: &str| Some(vec![(g.to_string(), vec![q])]);
    match d {
        0 => match j.rem_euclid(2) {
            0 => Some(Vec::new()),
            _ => gate("Z"),
        },
        1 => match j.rem_euclid(4) {
            0 => Some(Vec::new()),
            1 => gate("S"),
            2 => gate("Z"),
            _ => gate("Sdg"),
        },
        _ => None,
    }
}

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

impl CircuitIR {
    /// Parses the line-oriented text format (see the module docs).
    pub fn parse(text: &str) -> Result<CircuitIR> {
        let mut qubits: Option<usize> = None;
        let mut instructions = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let lineno = idx + 1;
            let perr = |msg: String| Error::Parse { pos: format!("line {lineno}"), msg };
            let line = match raw.find('#') {
                Some(p) => &raw[..p],
                None => raw,
            };
            let tokens: Vec<&str> = line.split_whitespace().collect();
            if tokens.is_empty() {
                continue;
            }
            if qubits.is_none() {
                if tokens[0] != "qubits" || tokens.len() != 2 {
                    return Err(perr("expected `qubits N` as the first instruction".into()));
                }
                let n: usize = tokens[1]
                    .parse()
                    .map_err(|e| perr(format!("bad qubit count: {e}")))?;
                qubits = Some(n);
                continue;
            }
            instructions.push(parse_instruction(&tokens, lineno)?);
        }
        let qubits = qubits.ok_or_else(|| Error::Parse {
            pos: "end of input".into(),
            msg: "missing `qubits N` header".into(),
        })?;
        let circuit = CircuitIR { qubits, instructions };
        circuit.validate()?;
        Ok(circuit)
    }

    /// Static checks: indices in range as the register grows and shrinks,
    /// gates recognized, measurement literals well-formed, labels unique and
    /// defined before any conditioned gate uses them.
    pub fn validate(&self) -> Result<()> {
        self.stats().map(|_| ())
    }

    /// True when every instruction is an unconditioned gate.
    pub fn is_unitary(&self) -> bool {
        self.instructions
            .iter()
            .all(|i| matches!(i, Instruction::Gate { cond, .. } if cond.is_empty()))
    }

    fn stats(&self) -> Result<CircuitStats> {
        let mut n = self.qubits;
        if n > MAX_QUBITS {
            return Err(Error::QubitCap(n, MAX_QUBITS));
        }
        let mut labels: HashSet<String> = HashSet::new();
        let mut measure_ordinal = 0usize;
        let mut branching = 0usize;
        let mut sampling = false;
        for (idx, ins) in self.instructions.iter().enumerate() {
            let ierr = |msg: String| Error::Parse {
                pos: format!("instruction {}", idx + 1),
                msg,
            };
            let check_qubits = |qs: &[usize], n: usize| -> Result<()> {
                let mut seen = HashSet::new();
                for &q in qs {
                    if q >= n {
                        return Err(Error::IndexOutOfRange { index: q, n });
                    }
                    if !seen.insert(q) {
                        return Err(ierr(format!("repeated qubit index {q}")));
                    }
                }
                Ok(())
            };
            match ins {
                Instruction::Alloc(_) => {
                    n += 1;
                    if n > MAX_QUBITS {
                        return Err(Error::QubitCap(n, MAX_QUBITS));
                    }
                }
                Instruction::Inject { expr, targets } => {
                    let state = parse_state_expr(expr)?;
                    if targets.len() != state.n() {
                        return Err(ierr(format!(
                            "state `{expr}` has {} qubit(s) but {} target(s) listed",
                            state.n(),
                            targets.len()
                        )));
                    }
                    let expect: Vec<usize> = (n..n + targets.len()).collect();
                    if targets != &expect {
                        return Err(ierr(format!(
                            "inject targets must be the next fresh indices {expect:?}, got {targets:?}"
                        )));
                    }
                    n += targets.len();
                    if n > MAX_QUBITS {
                        return Err(Error::QubitCap(n, MAX_QUBITS));
                    }
                }
                Instruction::Gate { op, cond } => {
                    check_qubits(&op.qubits, n)?;
                    resolve_gate(op)?;
                    for (label, bit) in cond {
                        if !labels.contains(label) {
                            return Err(ierr(format!(
                                "condition references undefined outcome label `{label}`"
                            )));
                        }
                        if *bit > 1 {
                            return Err(ierr(format!("condition bit must be 0 or 1, got {bit}")));
                        }
                    }
                }
                Instruction::Measure(mop) => {
                    check_qubits(&mop.qubits, n)?;
                    measure_ordinal += 1;
                    let kinds = parse_pauli_literal(&mop.literal)?.1;
                    if kinds.len() != mop.qubits.len() {
                        return Err(ierr(format!(
                            "literal `{}` names {} qubit(s) but {} index(es) listed",
                            mop.literal,
                            kinds.len(),
                            mop.qubits.len()
                        )));
                    }
                    if kinds.iter().all(|k| *k == PauliKind::I) {
                        return Err(ierr("identity measurement is not meaningful".into()));
                    }
                    let label = effective_label(mop, measure_ordinal);
                    if !labels.insert(label.clone()) {
                        return Err(ierr(format!("duplicate outcome label `{label}`")));
                    }
                    match mop.mode {
                        MeasureMode::Branch => branching += 1,
                        MeasureMode::Sample => sampling = true,
                        _ => {}
                    }
                }
                Instruction::Discard(q) => {
                    if *q >= n {
                        return Err(Error::IndexOutOfRange { index: *q, n });
                    }
                    if n == 1 {
                        return Err(ierr("cannot discard the last qubit".into()));
                    }
                    n -= 1;
                }
            }
        }
        Ok(CircuitStats { branching, sampling })
    }
}

struct CircuitStats {
    branching: usize,
    sampling: bool,
}

/// The label a measurement records its outcome under.
fn effective_label(mop: &MeasureOp, ordinal: usize) -> String {
    mop.label.clone().unwrap_or_else(|| format!("m{ordinal}"))
}

/// Splits a signed Pauli letter string into (negated?, kinds).
fn parse_pauli_literal(lit: &str) -> Result<(bool, Vec<PauliKind>)> {
    let (neg, body) = match lit.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, lit.strip_prefix('+').unwrap_or(lit)),
    };
    if body.is_empty() {
        return Err(Error::Parse {
            pos: lit.to_string(),
            msg: "empty Pauli literal".into(),
        });
    }
    let mut kinds = Vec::with_capacity(body.len());
    for c in body.chars() {
        kinds.push(match c {
            'I' => PauliKind::I,
            'X' => PauliKind::X,
            'Y' => PauliKind::Y,
            'Z' => PauliKind::Z,
            other => {
                return Err(Error::Parse {
                    pos: lit.to_string(),
                    msg: format!("bad Pauli letter `{other}`"),
                })
            }
        });
    }
    Ok((neg, kinds))
}

fn parse_instruction(tokens: &[&str], lineno: usize) -> Result<Instruction> {
    let perr = |msg: String| Error::Parse { pos: format!("line {lineno}"), msg };
    let parse_idx = |s: &str| -> Result<usize> {
        s.parse().map_err(|e| perr(format!("bad qubit index `{s}`: {e}")))
    };
    match tokens[0] {
        "qubits" => Err(perr("`qubits` may only appear once, first".into())),
        "alloc" => {
            if tokens.len() != 2 {
                return Err(perr("usage: alloc |0  or  alloc +".into()));
            }
            match tokens[1] {
                "|0" | "|0>" => Ok(Instruction::Alloc(AllocKind::Zero)),
                "+" | "|+" | "|+>" => Ok(Instruction::Alloc(AllocKind::Plus)),
                other => Err(perr(format!("unknown alloc kind `{other}`"))),
            }
        }
        "gate" => parse_gate(&tokens[1..], Vec::new(), lineno),
        "cond" => {
            // one or more `cond label=bit` prefixes, then a gate
            let mut cond = Vec::new();
            let mut rest = tokens;
            loop {
                match rest[0] {
                    "cond" => {
                        if rest.len() < 3 {
                            return Err(perr("usage: cond LABEL=BIT gate ...".into()));
                        }
                        let (label, bit) = rest[1].split_once('=').ok_or_else(|| {
                            perr(format!("bad condition `{}`, expected LABEL=BIT", rest[1]))
                        })?;
                        let bit: u8 = bit
                            .parse()
                            .map_err(|e| perr(format!("bad condition bit: {e}")))?;
                        cond.push((label.to_string(), bit));
                        rest = &rest[2..];
                    }
                    "gate" => return parse_gate(&rest[1..], cond, lineno),
                    other => {
                        return Err(perr(format!(
                            "expected `gate` after conditions, got `{other}`"
                        )))
                    }
                }
            }
        }
        "inject" => {
            let arrow = tokens.iter().position(|t| *t == "->").ok_or_else(|| {
                perr("usage: inject EXPR -> q...".into())
            })?;
            if arrow < 2 || arrow + 1 >= tokens.len() {
                return Err(perr("usage: inject EXPR -> q...".into()));
            }
            let expr = tokens[1..arrow].join(" ");
            let targets = tokens[arrow + 1..]
                .iter()
                .map(|t| parse_idx(t))
                .collect::<Result<Vec<_>>>()?;
            Ok(Instruction::Inject { expr, targets })
        }
        "measure" => {
            let arrow = tokens.iter().position(|t| *t == "->").ok_or_else(|| {
                perr("usage: measure LIT q... -> MODE [AS LABEL]".into())
            })?;
            if arrow < 3 {
                return Err(perr("usage: measure LIT q... -> MODE [AS LABEL]".into()));
            }
            let literal = tokens[1].to_string();
            parse_pauli_literal(&literal)?;
            let qubits = tokens[2..arrow]
                .iter()
                .map(|t| parse_idx(t))
                .collect::<Result<Vec<_>>>()?;
            let tail = &tokens[arrow + 1..];
            if tail.is_empty() {
                return Err(perr("missing measurement mode".into()));
            }
            let mode = match tail[0] {
                "post+" | "post(+)" => MeasureMode::PostPlus,
                "post-" | "post(-)" => MeasureMode::PostMinus,
                "branch" => MeasureMode::Branch,
                "sample" => MeasureMode::Sample,
                other => return Err(perr(format!("unknown measurement mode `{other}`"))),
            };
            let label = match tail.len() {
                1 => None,
                3 if tail[1] == "AS" || tail[1] == "as" => Some(tail[2].to_string()),
                _ => return Err(perr("trailing tokens; expected `AS LABEL`".into())),
            };
            Ok(Instruction::Measure(MeasureOp { literal, qubits, mode, label }))
        }
        "discard" => {
            if tokens.len() != 2 {
                return Err(perr("usage: discard q".into()));
            }
            Ok(Instruction::Discard(parse_idx(tokens[1])?))
        }
        other => Err(perr(format!("unknown instruction `{other}`"))),
    }
}

fn parse_gate(tokens: &[&str], cond: Vec<(String, u8)>, lineno: usize) -> Result<Instruction> {
    let perr = |msg: String| Error::Parse { pos: format!("line {lineno}"), msg };
    if tokens.is_empty() {
        return Err(perr("usage: gate NAME [params] q...".into()));
    }
    let name = tokens[0].to_string();
    let ints = tokens[1..]
        .iter()
        .map(|t| {
            t.parse::<i64>()
                .map_err(|e| perr(format!("bad integer `{t}`: {e}")))
        })
        .collect::<Result<Vec<i64>>>()?;
    // RZ takes two leading parameters (j, d); everything else only qubits.
    let (params, qubit_ints) = if name == "RZ" {
        if ints.len() < 3 {
            return Err(perr("usage: gate RZ j d q".into()));
        }
        (ints[..2].to_vec(), &ints[2..])
    } else {
        (Vec::new(), &ints[..])
    };
    let qubits = qubit_ints
        .iter()
        .map(|&v| {
            usize::try_from(v).map_err(|_| perr(format!("negative qubit index {v}")))
        })
        .collect::<Result<Vec<usize>>>()?;
    Ok(Instruction::Gate { op: GateOp { name, params, qubits }, cond })
}

// ---------------------------------------------------------------------------
// Execution
// ---------------------------------------------------------------------------

/// State threaded along one path of the measurement tree.
#[derive(Clone)]
struct PathNode {
    state: Option<ExactState>,
    outcomes: Vec<(String, u8)>,
    all_half: bool,
    tally: ResourceTally,
    /// Next measurement ordinal (for default labels).
    measured: usize,
}

impl PathNode {
    fn outcome_bit(&self, label: &str) -> Option<u8> {
        self.outcomes.iter().rev().find(|(l, _)| l == label).map(|&(_, b)| b)
    }

    fn require_state(&mut self) -> Result<&mut ExactState> {
        self.state
            .as_mut()
            .ok_or_else(|| Error::InvalidParameter("empty register".into()))
    }

    fn into_branch(self) -> Result<Branch> {
        let state = self
            .state
            .ok_or_else(|| Error::InvalidParameter("circuit leaves an empty register".into()))?;
        Ok(Branch {
            outcome: self
                .outcomes
                .iter()
                .map(|(l, b)| format!("{l}={b}"))
                .collect::<Vec<_>>()
                .join(","),
            probability: state.norm_sq().clone(),
            is_half: self.all_half,
            state,
            tally: self.tally,
        })
    }
}

/// Runs `c` on `input` (or on `|0⟩^N` / the allocations alone when `None`)
/// and returns the exhaustive list of branches. Requires a seed only when a
/// `sample`-mode measurement is present — use [`simulate_seeded`].
pub fn simulate(c: &CircuitIR, input: Option<&ExactState>) -> Result<Vec<Branch>> {
    simulate_seeded(c, input, None)
}

/// [`simulate`] with a PRNG seed for `sample`-mode measurements.
pub fn simulate_seeded(
    c: &CircuitIR,
    input: Option<&ExactState>,
    seed: Option<u64>,
) -> Result<Vec<Branch>> {
    let stats = c.stats()?;
    if stats.branching > TREE_GUARD {
        return Err(Error::TreeGuard(stats.branching, TREE_GUARD));
    }
    if stats.sampling && seed.is_none() {
        return Err(Error::InvalidParameter(
            "circuit contains sample-mode measurements; a seed is required".into(),
        ));
    }
    let mut rng = seed.map(ChaCha8Rng::seed_from_u64);

    let state = match input {
        Some(s) => {
            if s.n() != c.qubits {
                return Err(Error::SizeMismatch(s.n(), c.qubits));
            }
            if !s.is_unit_norm() {
                return Err(Error::InvalidParameter(
                    "input state must be unit-norm for exact probability bookkeeping".into(),
                ));
            }
            Some(s.clone())
        }
        None if c.qubits > 0 => Some(ExactState::ket(&"0".repeat(c.qubits))?),
        None => None,
    };

    let root = PathNode {
        state,
        outcomes: Vec::new(),
        all_half: true,
        tally: ResourceTally::new(),
        measured: 0,
    };
    let mut leaves = Vec::new();
    // depth-first; the `+1` child is pushed last so it is explored first
    let mut stack = vec![(root, 0usize)];
    while let Some((mut node, ip)) = stack.pop() {
        let Some(ins) = c.instructions.get(ip) else {
            leaves.push(node.into_branch()?);
            continue;
        };
        match ins {
            Instruction::Alloc(kind) => {
                let fresh = match kind {
                    AllocKind::Zero => ExactState::ket("0")?,
                    AllocKind::Plus => ExactState::plus(1)?,
                };
                node.state = Some(match node.state.take() {
                    Some(s) => s.tensor(&fresh)?,
                    None => fresh,
                });
                stack.push((node, ip + 1));
            }
            Instruction::Inject { expr, targets: _ } => {
                let fresh = parse_state_expr(expr)?;
                if !fresh.is_unit_norm() {
                    return Err(Error::InvalidParameter(format!(
                        "injected state `{expr}` is not unit-norm"
                    )));
                }
                node.state = Some(match node.state.take() {
                    Some(s) => s.tensor(&fresh)?,
                    None => fresh,
                });
                *node.tally.entry(expr.clone()).or_insert(0) += 1;
                stack.push((node, ip + 1));
            }
            Instruction::Gate { op, cond } => {
                let mut fire = true;
                for (label, bit) in cond {
                    match node.outcome_bit(label) {
                        Some(b) if b == *bit => {}
                        Some(_) => {
                            fire = false;
                            break;
                        }
                        None => {
                            return Err(Error::Internal(format!(
                                "outcome label `{label}` undefined at runtime"
                            )))
                        }
                    }
                }
                if fire {
                    let (action, tally_key) = resolve_gate(op)?;
                    let state = node.require_state()?;
                    match action {
                        GateAction::Clifford(name) => {
                            state.apply_clifford_gate(name, &op.qubits)?
                        }
                        GateAction::Phase { j, d } => state.apply_phase(op.qubits[0], j, d)?,
                        GateAction::ControlledPhase { j, d } => {
                            state.apply_controlled_phase(&op.qubits, j, d)?
                        }
                        GateAction::Identity => {}
                    }
                    if let Some(key) = tally_key {
                        *node.tally.entry(key).or_insert(0) += 1;
                    }
                }
                stack.push((node, ip + 1));
            }
            Instruction::Discard(q) => {
                let state = node.require_state()?;
                let reduced = state.discard_keep_norm(*q)?;
                node.state = Some(reduced);
                stack.push((node, ip + 1));
            }
            Instruction::Measure(mop) => {
                node.measured += 1;
                let label = effective_label(mop, node.measured);
                let state = node.require_state()?;
                let pauli = build_measure_pauli(mop, state.n())?;
                let norm_before = state.norm_sq().clone();
                let plus = state.project(&pauli, 1)?;
                let minus = state.project(&pauli, -1)?;
                debug_assert!(
                    &plus.1 + &minus.1 == norm_before,
                    "projector pair must resolve the identity"
                );
                let half_of = |child: &Cyclotomic| child.mul_pow2(1) == norm_before;
                let take = |node: &mut PathNode,
                                (child, child_norm): (ExactState, Cyclotomic),
                                bit: u8| {
                    node.all_half &= half_of(&child_norm);
                    node.outcomes.push((label.clone(), bit));
                    node.state = Some(child);
                };
                match mop.mode {
                    MeasureMode::PostPlus | MeasureMode::PostMinus => {
                        let (child, bit) = if mop.mode == MeasureMode::PostPlus {
                            (plus, 0)
                        } else {
                            (minus, 1)
                        };
                        if child.1.is_zero() {
                            return Err(Error::Annihilation(format!(
                                "measure {} (label {label})",
                                mop.literal
                            )));
                        }
                        take(&mut node, child, bit);
                        stack.push((node, ip + 1));
                    }
                    MeasureMode::Branch => {
                        if !minus.1.is_zero() {
                            let mut down = node.clone();
                            take(&mut down, minus, 1);
                            stack.push((down, ip + 1));
                        }
                        if !plus.1.is_zero() {
                            take(&mut node, plus, 0);
                            stack.push((node, ip + 1));
                        }
                    }
                    MeasureMode::Sample => {
                        let rng = rng
                            .as_mut()
                            .expect("validated: sampling requires a seed");
                        let p_plus = plus.1.abs_f64() / norm_before.abs_f64();
                        let chose_plus = if plus.1.is_zero() {
                            false
                        } else if minus.1.is_zero() {
                            true
                        } else {
                            rng.gen::<f64>() < p_plus
                        };
                        let (child, bit) = if chose_plus { (plus, 0) } else { (minus, 1) };
                        take(&mut node, child, bit);
                        stack.push((node, ip + 1));
                    }
                }
            }
        }
    }
    // depth-first with plus-last pushes yields plus-first leaf order
    Ok(leaves)
}

/// Builds the full-register Pauli operator a measurement instruction names.
pub(crate) fn build_measure_pauli(mop: &MeasureOp, n: usize) -> Result<PauliOperator> {
    let (neg, kinds) = parse_pauli_literal(&mop.literal)?;
    let mut p = PauliOperator::identity(n);
    for (&q, &kind) in mop.qubits.iter().zip(kinds.iter()) {
        if kind == PauliKind::I {
            continue;
        }
        p = p.multiply(&PauliOperator::single(n, q, kind)?)?;
    }
    if neg {
        p = p.negated();
    }
    if p.is_identity_up_to_phase() {
        return Err(Error::InvalidParameter(
            "identity measurement is not meaningful".into(),
        ));
    }
    Ok(p)
}

// ---------------------------------------------------------------------------
// Choi states
// ---------------------------------------------------------------------------

/// `(U ⊗ I)|Bell⟩^{⊗n}` for a purely unitary circuit on `n` declared qubits:
/// qubit `q` of the circuit acts on the first register, its Bell partner is
/// qubit `q + n`.
pub fn choi_state(c: &CircuitIR) -> Result<ExactState> {
    if !c.is_unitary() {
        return Err(Error::InvalidParameter(
            "choi_state requires a purely unitary circuit (gates only)".into(),
        ));
    }
    c.validate()?;
    let n = c.qubits;
    if n == 0 {
        return Err(Error::InvalidParameter("choi_state needs at least one qubit".into()));
    }
    if 2 * n > MAX_QUBITS {
        return Err(Error::QubitCap(2 * n, MAX_QUBITS));
    }
    // Σ_x |x⟩|x⟩ / 2^{n/2}
    let dim = 1usize << (2 * n);
    let mut amp = Cyclotomic::one();
    for _ in 0..n {
        amp = &amp * &Cyclotomic::inv_sqrt2();
    }
    let mut amps = vec![Cyclotomic::zero(); dim];
    for x in 0..(1usize << n) {
        amps[(x << n) | x] = amp.clone();
    }
    let mut state = ExactState::from_amps(2 * n, amps)?;
    for ins in &c.instructions {
        let Instruction::Gate { op, .. } = ins else { unreachable!("unitary circuit") };
        let (action, _) = resolve_gate(op)?;
        match action {
            GateAction::Clifford(name) => state.apply_clifford_gate(name, &op.qubits)?,
            GateAction::Phase { j, d } => state.apply_phase(op.qubits[0], j, d)?,
            GateAction::ControlledPhase { j, d } => {
                state.apply_controlled_phase(&op.qubits, j, d)?
            }
            GateAction::Identity => {}
        }
    }
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cyclotomic::DyadicFraction;

    fn run_text(text: &str, input: Option<&ExactState>) -> Vec<Branch> {
        let c = CircuitIR::parse(text).unwrap();
        simulate(&c, input).unwrap()
    }

    #[test]
    fn empty_circuit_is_one_branch_probability_one() {
        let t = ExactState::t_state();
        let branches = run_text("qubits 1", Some(&t));
        assert_eq!(branches.len(), 1);
        assert!(branches[0].probability.is_one());
        assert!(branches[0].is_half); // vacuously: no measurements
        assert!(branches[0].state.equal_up_to_phase(&t).unwrap());
        assert!(branches[0].tally.is_empty());
        assert_eq!(branches[0].outcome, "");
    }

    #[test]
    fn tt_minus_zz_projection_gives_bell_like_state_at_half() {
        let tt = ExactState::t_state().tensor(&ExactState::t_state()).unwrap();
        let branches = run_text("qubits 2\nmeasure -ZZ 0 1 -> branch AS m1", Some(&tt));
        assert_eq!(branches.len(), 2);
        let plus = &branches[0]; // +1 outcome of −Z⊗Z first
        assert_eq!(plus.outcome, "m1=0");
        assert!(plus.probability == Cyclotomic::half());
        assert!(plus.is_half);
        let bell01 = ExactState::from_amps(
            2,
            vec![
                Cyclotomic::zero(),
                Cyclotomic::inv_sqrt2(),
                Cyclotomic::inv_sqrt2(),
                Cyclotomic::zero(),
            ],
        )
        .unwrap();
        let renorm = plus.state.renormalize().unwrap();
        assert!(renorm.equal_up_to_phase(&bell01).unwrap());
    }

    #[test]
    fn branch_probabilities_sum_to_one_exactly() {
        // three branching measurements on a non-stabilizer state
        let text = "qubits 2\n\
                    gate T 0\n\
                    measure X 0 -> branch\n\
                    measure ZZ 0 1 -> branch\n\
                    measure Y 1 -> branch";
        let plus2 = ExactState::plus(2).unwrap();
        let branches = run_text(text, Some(&plus2));
        let total = branches
            .iter()
            .fold(Cyclotomic::zero(), |acc, b| &acc + &b.probability);
        assert!(total.is_one(), "exhaustive tree must resolve probability 1");
        for b in &branches {
            assert!(!b.probability.is_zero());
        }
    }

    #[test]
    fn t_gate_injection_with_feed_forward_reproduces_t_gate() {
        // teleportation gadget: |α⟩ ⊗ |T⟩, CX, measure Z on the ancilla,
        // S-correction on the −1 outcome
        let text = "qubits 1\n\
                    inject T -> 1\n\
                    gate CX 0 1\n\
                    measure Z 1 -> branch AS m\n\
                    cond m=1 gate S 0\n\
                    discard 1";
        // a random-ish non-stabilizer input
        let mut alpha = ExactState::rot_plus(3, 3).unwrap();
        alpha.apply_h(0).unwrap();
        alpha.apply_phase(0, 1, 1).unwrap();
        let mut expected = alpha.clone();
        expected.apply_phase(0, 1, 2).unwrap(); // T|α⟩
        let branches = run_text(text, Some(&alpha));
        assert_eq!(branches.len(), 2);
        for b in &branches {
            assert!(b.probability == Cyclotomic::half());
            assert!(b.is_half);
            assert_eq!(b.tally.get("T"), Some(&1));
            let got = b.state.renormalize().unwrap();
            assert!(got.equal_up_to_phase(&expected).unwrap(), "branch {}", b.outcome);
        }
    }

    #[test]
    fn measuring_y_on_cnz_yields_cns_of_both_signs_at_half() {
        // Y on one qubit of |C³Z⟩ (4 qubits) → |C²S^{±1}⟩ on the rest
        let c4z = ExactState::cnz_state(4).unwrap();
        let text = "qubits 4\nmeasure Y 3 -> branch AS y\ndiscard 3";
        let branches = run_text(text, Some(&c4z));
        assert_eq!(branches.len(), 2);
        let ccs_plus = ExactState::cns_state(3).unwrap();
        let ccs_minus = ExactState::controlled_phase_state(3, -1, 1).unwrap();
        for b in &branches {
            assert!(b.probability == Cyclotomic::half());
            assert!(b.is_half);
            let got = b.state.renormalize().unwrap();
            let want = if b.outcome == "y=0" { &ccs_plus } else { &ccs_minus };
            assert!(got.equal_up_to_phase(want).unwrap(), "branch {}", b.outcome);
        }
    }

    #[test]
    fn post_selection_on_zero_probability_outcome_annihilates() {
        let zero = ExactState::ket("0").unwrap();
        let c = CircuitIR::parse("qubits 1\nmeasure Z 0 -> post-").unwrap();
        match simulate(&c, Some(&zero)) {
            Err(Error::Annihilation(_)) => {}
            other => panic!("expected annihilation, got {other:?}"),
        }
    }

    #[test]
    fn deterministic_branch_measurement_yields_single_branch() {
        // measuring a stabilizer of the state: the −1 child has probability 0
        let zero = ExactState::ket("0").unwrap();
        let branches = run_text("qubits 1\nmeasure Z 0 -> branch", Some(&zero));
        assert_eq!(branches.len(), 1);
        assert!(branches[0].probability.is_one());
        assert!(!branches[0].is_half);
        assert_eq!(branches[0].outcome, "m1=0");
    }

    #[test]
    fn sample_mode_is_seed_deterministic_and_respects_support() {
        let text = "qubits 1\ngate H 0\nmeasure Z 0 -> sample AS s";
        let c = CircuitIR::parse(text).unwrap();
        let one = simulate_seeded(&c, None, Some(7)).unwrap();
        let two = simulate_seeded(&c, None, Some(7)).unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(one[0].outcome, two[0].outcome);
        assert!(one[0].probability == Cyclotomic::half());
        // a deterministic outcome is never missed by sampling
        let det = CircuitIR::parse("qubits 1\nmeasure Z 0 -> sample").unwrap();
        for seed in 0..20 {
            let b = simulate_seeded(&det, None, Some(seed)).unwrap();
            assert_eq!(b[0].outcome, "m1=0");
        }
        // missing seed is rejected
        assert!(matches!(simulate(&c, None), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn allocations_and_injections_extend_the_register() {
        let text = "qubits 1\n\
                    alloc |0\n\
                    alloc +\n\
                    inject CS -> 3 4\n\
                    gate CX 0 1";
        let branches = run_text(text, Some(&ExactState::ket("0").unwrap()));
        assert_eq!(branches[0].state.n(), 5);
        assert_eq!(branches[0].tally.get("CS"), Some(&1));
        // |0⟩|0⟩|+⟩ ⊗ |CS⟩, CX acts trivially on |00⟩
        let want = ExactState::ket("00")
            .unwrap()
            .tensor(&ExactState::plus(1).unwrap())
            .unwrap()
            .tensor(&ExactState::cs_state())
            .unwrap();
        assert!(branches[0].state.equal_up_to_phase(&want).unwrap());
    }

    #[test]
    fn gate_tally_counts_only_fired_noncliffords() {
        let text = "qubits 2\n\
                    gate H 0\n\
                    gate T 0\n\
                    gate RZ 2 3 1\n\
                    gate RZ 4 2 1\n\
                    gate CnZ 0 1\n\
                    measure X 0 -> branch AS m\n\
                    cond m=1 gate T 1";
        let branches = run_text(text, None);
        for b in &branches {
            // RZ 2 3 canonicalizes to T; RZ 4 2 is the Clifford Z; CnZ on 2 is CZ
            let t_count = if b.outcome == "m=1" { 3 } else { 2 };
            assert_eq!(b.tally.get("T"), Some(&t_count), "branch {}", b.outcome);
            assert!(!b.tally.contains_key("RZ:1:1"));
            assert!(b.tally.keys().all(|k| k == "T"));
        }
    }

    #[test]
    fn choi_state_of_identity_t_and_ccz() {
        let id = CircuitIR::parse("qubits 1").unwrap();
        let bell = choi_state(&id).unwrap();
        assert_eq!(bell.n(), 2);
        assert_eq!(bell.dyadic_monotone().unwrap(), DyadicFraction::zero());
        assert_eq!(bell.stabilizer_nullity().unwrap(), 0);

        let t = CircuitIR::parse("qubits 1\ngate T 0").unwrap();
        let choi_t = choi_state(&t).unwrap();
        assert_eq!(choi_t.dyadic_monotone().unwrap(), DyadicFraction::new(1, 1));

        let ccz = CircuitIR::parse("qubits 3\ngate CCZ 0 1 2").unwrap();
        let choi_ccz = choi_state(&ccz).unwrap();
        assert_eq!(choi_ccz.n(), 6);
        assert_eq!(choi_ccz.dyadic_monotone().unwrap(), DyadicFraction::from_int(1));

        let measured = CircuitIR::parse("qubits 1\nmeasure Z 0 -> branch").unwrap();
        assert!(choi_state(&measured).is_err());
    }

    #[test]
    fn parser_rejects_malformed_circuits() {
        let cases: &[(&str, &str)] = &[
            ("gate H 0", "missing qubits header"),
            ("qubits 1\ngate FLIP 0", "unknown gate"),
            ("qubits 1\ngate H 1", "index out of range"),
            ("qubits 2\nmeasure ZZ 0 -> branch", "literal/index count mismatch"),
            ("qubits 1\nmeasure Q 0 -> branch", "bad Pauli letter"),
            ("qubits 1\nmeasure I 0 -> branch", "identity measurement"),
            ("qubits 1\nmeasure Z 0 -> flip", "unknown mode"),
            ("qubits 1\ncond m=1 gate X 0", "undefined label"),
            (
                "qubits 1\nmeasure Z 0 -> branch AS m\nmeasure X 0 -> branch AS m",
                "duplicate label",
            ),
            ("qubits 1\ninject T -> 0", "inject must target fresh indices"),
            ("qubits 1\ninject CS -> 1", "inject target arity mismatch"),
            ("qubits 1\ndiscard 0", "cannot discard the last qubit"),
            ("qubits 2\ngate CX 0 0", "repeated qubit index"),
        ];
        for (text, why) in cases {
            assert!(CircuitIR::parse(text).is_err(), "should reject: {why}");
        }
    }

    #[test]
    fn tree_guard_rejects_oversized_branch_trees() {
        let mut text = String::from("qubits 1\ngate H 0\n");
        for i in 0..(TREE_GUARD + 1) {
            text.push_str(&format!("measure X 0 -> branch AS g{i}\n"));
        }
        let c = CircuitIR::parse(&text).unwrap();
        match simulate(&c, None) {
            Err(Error::TreeGuard(n, cap)) => {
                assert_eq!(n, TREE_GUARD + 1);
                assert_eq!(cap, TREE_GUARD);
            }
            other => panic!("expected tree guard error, got {other:?}"),
        }
    }

    #[test]
    fn discard_requires_disentangled_qubit() {
        let text = "qubits 2\ngate H 0\ngate CX 0 1\ndiscard 1";
        let c = CircuitIR::parse(text).unwrap();
        assert!(matches!(simulate(&c, None), Err(Error::EntangledDiscard(_))));
    }

    #[test]
    fn discard_keeps_cumulative_probability_exact() {
        // measuring X on |0⟩ splits 1/2 : 1/2 and leaves the qubit in |±⟩,
        // whose weight-√2 factor must not disturb the norm certificate
        let text = "qubits 2\ngate H 1\ngate T 1\nmeasure X 0 -> branch\ndiscard 0";
        let branches = run_text(text, None);
        assert_eq!(branches.len(), 2);
        let total = branches
            .iter()
            .fold(Cyclotomic::zero(), |acc, b| &acc + &b.probability);
        assert!(total.is_one());
        let mut expected = ExactState::plus(1).unwrap();
        expected.apply_phase(0, 1, 2).unwrap();
        for b in &branches {
            assert!(b.probability == Cyclotomic::half());
            assert_eq!(b.state.n(), 1);
            let got = b.state.renormalize().unwrap();
            assert!(got.equal_up_to_phase(&expected).unwrap());
        }
    }
}
