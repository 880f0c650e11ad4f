//! Executable catalog of resource-state conversion protocols, each compiled
//! to a [`CircuitIR`] and verified branch-exactly.
//!
//! A [`ProtocolSpec`] declares what a conversion claims: the input state
//! (with any catalyst listed explicitly), the resources its circuit consumes
//! along the way (gate tallies and injected states, as exact per-branch
//! statistics), and the state every measurement branch must reach. The
//! declaration convention:
//!
//! * `input` — the tensor factors fed into the circuit; catalysts enter
//!   here (or are injected mid-circuit and regenerated among the outputs).
//! * `consumed` — expected tally statistics per resource class: exact
//!   average over branch probabilities plus the worst case.
//! * `catalysts` — resources borrowed and returned intact; the expected
//!   output state includes the returned copy, so catalyst integrity is part
//!   of the per-branch state equality.
//! * `outputs` — a human-readable description of the final wires.
//! * `deterministic` — true iff both the output state and the resource
//!   tally are independent of the measurement outcomes (branch *count* may
//!   still exceed one; corrections make the branches agree).
//!
//! [`verify`] simulates the circuit exhaustively and checks every branch
//! against the declaration: exact state equality up to global phase,
//! probabilities summing to one, tallies matching the declared statistics,
//! and a monotone audit (stabilizer nullity always; the dyadic monotone on
//! probability-½ paths, where it is non-increasing).

use std::collections::BTreeMap;
use std::fmt;

use crate::cyclotomic::{Cyclotomic, DyadicFraction};
use crate::phasepoly::PhasePolynomial;
use crate::simulator::{simulate, CircuitIR};
use crate::states::{parse_state_expr, ExactState};
use crate::{Error, Result, SPECTRUM_CAP};

/// Register-size cap for catalog protocols (peak live qubits).
pub const PROTOCOL_QUBIT_CAP: usize = 14;

// ---------------------------------------------------------------------------
// Declaration types
// ---------------------------------------------------------------------------

/// The state fed into a protocol circuit, with a display form.
pub struct InputSpec {
    /// Human-readable tensor expression (parseable where possible).
    pub describe: String,
    pub state: ExactState,
}

/// Declared consumption statistics for one resource class.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DeclaredUse {
    /// Canonical resource class (see [`resource_class`]).
    pub class: String,
    /// Exact expected count over branch probabilities.
    pub average: DyadicFraction,
    /// Largest count on any branch.
    pub worst: usize,
}

/// What the final register must equal on each branch.
pub enum Expected {
    /// Every branch reaches the same state.
    Uniform(ExactState),
    /// Branch-dependent target, keyed by the outcome bits.
    #[allow(clippy::type_complexity)]
    PerBranch(Box<dyn Fn(&BTreeMap<String, u8>) -> Result<ExactState> + Send + Sync>),
}

/// Per-wire target used to assemble branch-dependent expectations.
pub enum WirePlan {
    /// A fixed state expression for this wire group.
    Fixed(String),
    /// Chooses between two expressions based on one outcome bit.
    Conditional { label: String, if0: String, if1: String },
}

/// One verifiable conversion protocol.
pub struct ProtocolSpec {
    /// Instantiated display name, e.g. `wn_catalysis(3)`.
    pub name: String,
    /// Family name used by [`build`].
    pub family: &'static str,
    /// One-sentence description of the conversion.
    pub summary: String,
    pub input: Option<InputSpec>,
    pub circuit: CircuitIR,
    pub expected: Expected,
    pub consumed: Vec<DeclaredUse>,
    pub catalysts: Vec<String>,
    /// Final-wire description, in register order.
    pub outputs: Vec<String>,
    pub deterministic: bool,
}

impl fmt::Debug for ProtocolSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProtocolSpec")
            .field("name", &self.name)
            .field("summary", &self.summary)
            .field("consumed", &self.consumed)
            .field("catalysts", &self.catalysts)
            .field("outputs", &self.outputs)
            .field("deterministic", &self.deterministic)
            .finish_non_exhaustive()
    }
}

impl ProtocolSpec {
    /// The target state for a branch with the given outcome bits.
    pub fn expected_state(&self, bits: &BTreeMap<String, u8>) -> Result<ExactState> {
        match &self.expected {
            Expected::Uniform(s) => Ok(s.clone()),
            Expected::PerBranch(f) => f(bits),
        }
    }
}

/// Measured consumption statistics for one resource class.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ResourceUse {
    pub class: String,
    pub average: DyadicFraction,
    pub worst: usize,
    pub best: usize,
}

/// Outcome of verifying one protocol.
#[derive(Clone, Debug)]
pub struct VerificationReport {
    pub protocol: String,
    pub passed: bool,
    pub branches: usize,
    /// True iff every measurement on every path had probability exactly ½.
    pub all_half: bool,
    pub consumption: Vec<ResourceUse>,
    /// No nullity (or, on ½-paths, dyadic-monotone) violation was found.
    pub monotone_ok: bool,
    /// All branches matched an expectation that includes the catalyst.
    pub catalyst_intact: bool,
    pub failures: Vec<String>,
}

impl VerificationReport {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "protocol": self.protocol,
            "passed": self.passed,
            "branches": self.branches,
            "all_half": self.all_half,
            "consumption": self.consumption.iter().map(|u| serde_json::json!({
                "class": u.class,
                "average": u.average.to_f64(),
                "average_exact": u.average.to_string(),
                "worst": u.worst,
                "best": u.best,
            })).collect::<Vec<_>>(),
            "monotone_ok": self.monotone_ok,
            "catalyst_intact": self.catalyst_intact,
            "failures": self.failures,
        })
    }
}

// ---------------------------------------------------------------------------
// Resource classes
// ---------------------------------------------------------------------------

/// Canonicalizes a simulator tally key to a resource class: conjugate gates
/// fold onto their base class and rotation synonyms of `T`/`√T` are named as
/// such. Class names are parseable state expressions.
pub fn resource_class(tally_key: &str) -> String {
    let key = match tally_key.strip_prefix("RZ:") {
        Some(rest) => format!("rot:{rest}"),
        None => tally_key.to_string(),
    };
    match key.as_str() {
        "Tdg" | "rot:1:2" | "rot:7:2" => "T".into(),
        "CSdg" => "CS".into(),
        "rot:1:3" | "rot:15:3" => "sqrtT".into(),
        _ => key,
    }
}

fn prob_fraction(p: &Cyclotomic) -> Result<DyadicFraction> {
    let d = p
        .as_dyadic()
        .ok_or_else(|| Error::Internal("branch probability is not dyadic".into()))?;
    let num = i64::try_from(d.num().clone())
        .map_err(|_| Error::Internal("branch probability numerator overflows i64".into()))?;
    Ok(DyadicFraction::new(num, d.denom_exp()))
}

fn outcome_bits(outcome: &str) -> Result<BTreeMap<String, u8>> {
    let mut bits = BTreeMap::new();
    if outcome.is_empty() {
        return Ok(bits);
    }
    for record in outcome.split(',') {
        let (label, bit) = record
            .split_once('=')
            .ok_or_else(|| Error::Internal(format!("malformed outcome record `{record}`")))?;
        let bit: u8 = bit
            .parse()
            .map_err(|_| Error::Internal(format!("malformed outcome bit in `{record}`")))?;
        bits.insert(label.to_string(), bit);
    }
    Ok(bits)
}

fn conj_state(s: &ExactState) -> Result<ExactState> {
    ExactState::from_amps(s.n(), s.amps().iter().map(|a| a.conj()).collect())
}

/// Builds a state from a per-wire-bit amplitude rule (`bits[q]` is the value
/// of wire `q`).
fn state_from_bits(n: usize, f: impl Fn(&[u64]) -> Result<Cyclotomic>) -> Result<ExactState> {
    let mut amps = Vec::with_capacity(1 << n);
    for idx in 0..(1u64 << n) {
        let bits: Vec<u64> = (0..n).map(|q| (idx >> (n - 1 - q)) & 1).collect();
        amps.push(f(&bits)?);
    }
    ExactState::from_amps(n, amps)
}

// ---------------------------------------------------------------------------
// Verifier
// ---------------------------------------------------------------------------

/// Simulates a protocol exhaustively and checks the declaration: per-branch
/// state equality (up to global phase), probability bookkeeping, declared
/// consumption statistics, determinism, and the monotone audit.
pub fn verify(spec: &ProtocolSpec) -> Result<VerificationReport> {
    let branches = simulate(&spec.circuit, spec.input.as_ref().map(|i| &i.state))?;
    let mut failures: Vec<String> = Vec::new();
    let mut monotone_ok = true;
    let mut all_half = true;
    let mut total_prob = Cyclotomic::zero();

    // Input monotones for the audit (inputless circuits start stabilizer).
    let (in_nu, in_mu) = match &spec.input {
        Some(i) if i.state.n() <= SPECTRUM_CAP => {
            (Some(i.state.stabilizer_nullity()?), Some(i.state.dyadic_monotone()?))
        }
        Some(_) => (None, None),
        None => (Some(0), Some(DyadicFraction::from_int(0))),
    };
    let mut units: BTreeMap<String, (u32, DyadicFraction)> = BTreeMap::new();
    let mut unit_of = |class: &str| -> Result<(u32, DyadicFraction)> {
        if let Some(u) = units.get(class) {
            return Ok(u.clone());
        }
        let s = parse_state_expr(class)?;
        let u = (s.stabilizer_nullity()?, s.dyadic_monotone()?);
        units.insert(class.to_string(), u.clone());
        Ok(u)
    };

    let mut per_branch: Vec<(DyadicFraction, BTreeMap<String, usize>)> = Vec::new();
    let mut first_counts: Option<BTreeMap<String, usize>> = None;
    let mut counts_vary = false;

    for (bi, b) in branches.iter().enumerate() {
        let tag = if b.outcome.is_empty() { format!("#{bi}") } else { b.outcome.clone() };
        let bits = outcome_bits(&b.outcome)?;
        let expected = spec.expected_state(&bits)?;
        if b.state.n() != expected.n() {
            failures.push(format!(
                "branch {tag}: final register has {} wires, expected {}",
                b.state.n(),
                expected.n()
            ));
        } else if !b.state.equal_up_to_phase(&expected)? {
            failures.push(format!("branch {tag}: final state differs from expected"));
        }
        all_half &= b.is_half;
        total_prob = &total_prob + &b.probability;

        let p = prob_fraction(&b.probability)?;
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        for (key, &c) in &b.tally {
            *counts.entry(resource_class(key)).or_insert(0) += c;
        }
        match &first_counts {
            None => first_counts = Some(counts.clone()),
            Some(f) if *f != counts => counts_vary = true,
            Some(_) => {}
        }

        // Monotone audit: resources in (input + consumed units) must cover
        // the branch output. ν is monotone on all paths; μ₂ on ½-paths.
        if let (Some(nu0), Some(mu0)) = (&in_nu, &in_mu) {
            if expected.n() <= SPECTRUM_CAP {
                let mut lhs_nu = *nu0;
                let mut lhs_mu = *mu0;
                for (class, &cnt) in &counts {
                    let (u_nu, u_mu) = unit_of(class)?;
                    lhs_nu += u_nu * cnt as u32;
                    lhs_mu = lhs_mu + DyadicFraction::new(u_mu.num() * cnt as i64, u_mu.log2_den());
                }
                let rhs_nu = expected.stabilizer_nullity()?;
                if lhs_nu < rhs_nu {
                    monotone_ok = false;
                    failures.push(format!(
                        "branch {tag}: nullity audit failed ({lhs_nu} available < {rhs_nu} required)"
                    ));
                }
                if b.is_half {
                    let rhs_mu = expected.dyadic_monotone()?;
                    if lhs_mu < rhs_mu {
                        monotone_ok = false;
                        failures.push(format!(
                            "branch {tag}: dyadic-monotone audit failed ({lhs_mu} available < {rhs_mu} required)"
                        ));
                    }
                }
            }
        }
        per_branch.push((p, counts));
    }

    if !total_prob.is_one() {
        failures.push("branch probabilities do not sum to one".into());
    }

    // Aggregate consumption over the union of classes.
    let mut classes: Vec<String> =
        per_branch.iter().flat_map(|(_, c)| c.keys().cloned()).collect();
    classes.sort();
    classes.dedup();
    let mut consumption = Vec::new();
    for class in &classes {
        let mut average = DyadicFraction::from_int(0);
        let mut worst = 0usize;
        let mut best = usize::MAX;
        for (p, counts) in &per_branch {
            let cnt = counts.get(class).copied().unwrap_or(0);
            average = average + DyadicFraction::new(p.num() * cnt as i64, p.log2_den());
            worst = worst.max(cnt);
            best = best.min(cnt);
        }
        consumption.push(ResourceUse { class: class.clone(), average, worst, best });
    }

    // Declared statistics must match the measured ones exactly.
    for d in &spec.consumed {
        match consumption.iter().find(|u| u.class == d.class) {
            None => failures.push(format!("declared resource `{}` never consumed", d.class)),
            Some(u) => {
                if u.average != d.average || u.worst != d.worst {
                    failures.push(format!(
                        "resource `{}`: declared average {} worst {}, measured average {} worst {}",
                        d.class, d.average, d.worst, u.average, u.worst
                    ));
                }
            }
        }
    }
    for u in &consumption {
        if !spec.consumed.iter().any(|d| d.class == u.class) {
            failures.push(format!("undeclared resource `{}` consumed", u.class));
        }
    }

    if spec.deterministic {
        if counts_vary {
            failures.push("declared deterministic but consumption varies across branches".into());
        }
        if matches!(spec.expected, Expected::PerBranch(_)) {
            failures.push("declared deterministic but expectation is branch-dependent".into());
        }
    }

    let passed = failures.is_empty();
    Ok(VerificationReport {
        protocol: spec.name.clone(),
        passed,
        branches: branches.len(),
        all_half,
        consumption,
        monotone_ok,
        catalyst_intact: passed || spec.catalysts.is_empty(),
        failures,
    })
}

// ---------------------------------------------------------------------------
// Circuit builder
// ---------------------------------------------------------------------------

/// Emits circuit text while tracking live-wire positions across discards, so
/// protocol builders can speak in stable wire identities.
struct Builder {
    lines: Vec<String>,
    live: Vec<u32>,
    next_id: u32,
    labels: usize,
    peak: usize,
}

impl Builder {
    fn new(inputs: usize) -> Self {
        Builder {
            lines: vec![format!("qubits {inputs}")],
            live: (0..inputs as u32).collect(),
            next_id: inputs as u32,
            labels: 0,
            peak: inputs,
        }
    }

    fn idx(&self, id: u32) -> usize {
        self.live.iter().position(|&w| w == id).expect("gate on a discarded wire")
    }

    fn push_id(&mut self) -> u32 {
        let id = self.next_id;
        self.next_id += 1;
        self.live.push(id);
        self.peak = self.peak.max(self.live.len());
        id
    }

    fn alloc_zero(&mut self) -> u32 {
        self.lines.push("alloc |0".into());
        self.push_id()
    }

    fn alloc_plus(&mut self) -> u32 {
        self.lines.push("alloc +".into());
        self.push_id()
    }

    fn inject(&mut self, expr: &str, wires: usize) -> Vec<u32> {
        let targets: Vec<String> =
            (0..wires).map(|k| (self.live.len() + k).to_string()).collect();
        self.lines.push(format!("inject {expr} -> {}", targets.join(" ")));
        (0..wires).map(|_| self.push_id()).collect()
    }

    fn gate(&mut self, name: &str, ids: &[u32]) {
        let idxs: Vec<String> = ids.iter().map(|&w| self.idx(w).to_string()).collect();
        self.lines.push(format!("gate {name} {}", idxs.join(" ")));
    }

    fn cx(&mut self, c: u32, t: u32) {
        self.gate("CX", &[c, t]);
    }

    fn cond(&mut self, label: &str, bit: u8, name: &str, ids: &[u32]) {
        let idxs: Vec<String> = ids.iter().map(|&w| self.idx(w).to_string()).collect();
        self.lines.push(format!("cond {label}={bit} gate {name} {}", idxs.join(" ")));
    }

    fn cond2(&mut self, l1: &str, b1: u8, l2: &str, b2: u8, name: &str, ids: &[u32]) {
        let idxs: Vec<String> = ids.iter().map(|&w| self.idx(w).to_string()).collect();
        self.lines.push(format!("cond {l1}={b1} cond {l2}={b2} gate {name} {}", idxs.join(" ")));
    }

    fn measure(&mut self, basis: char, id: u32, label: &str) {
        let i = self.idx(id);
        self.lines.push(format!("measure {basis} {i} -> branch AS {label}"));
    }

    fn discard(&mut self, id: u32) {
        let i = self.idx(id);
        self.lines.push(format!("discard {i}"));
        self.live.remove(i);
    }

    fn fresh_label(&mut self, prefix: &str) -> String {
        self.labels += 1;
        format!("{prefix}{}", self.labels)
    }

    fn build(&self) -> Result<CircuitIR> {
        if self.peak > PROTOCOL_QUBIT_CAP {
            return Err(Error::InvalidParameter(format!(
                "protocol needs {} live qubits, cap is {PROTOCOL_QUBIT_CAP}",
                self.peak
            )));
        }
        let c = CircuitIR::parse(&self.lines.join("\n"))?;
        c.validate()?;
        Ok(c)
    }
}

/// Appends a fresh `|0⟩` wire and computes `q ∧ r` onto it with one `CCZ`
/// conjugated by Hadamards (an exact Toffoli).
fn and_ccz(b: &mut Builder, q: u32, r: u32) -> u32 {
    let t = b.alloc_zero();
    b.gate("H", &[t]);
    b.gate("CCZ", &[q, r, t]);
    b.gate("H", &[t]);
    t
}

/// Appends a fresh `|0⟩` wire and computes `q ∧ r` onto it using four `T`
/// gates: the phase identity `(s⊕q) + (s⊕r) − (s⊕q⊕r) − s = 2qr − 4sqr`
/// leaves `i^{qr}` on the target, cancelled by the trailing `S†`.
fn and_4t(b: &mut Builder, q: u32, r: u32) -> u32 {
    let t = b.alloc_zero();
    b.gate("H", &[t]);
    b.gate("Tdg", &[t]);
    b.cx(q, t);
    b.gate("T", &[t]);
    b.cx(r, t);
    b.gate("Tdg", &[t]);
    b.cx(q, t);
    b.gate("T", &[t]);
    b.cx(r, t);
    b.gate("H", &[t]);
    b.gate("Sdg", &[t]);
    t
}

/// Three-to-two compression block: folds `p` into `q`,`r`, computes
/// `maj(p,q,r)` onto a fresh ancilla (returned), and leaves `p⊕q⊕r` on `r`.
/// Uses `maj(p,q,r) = p ⊕ (p⊕q)(p⊕r)`.
fn sum_block(b: &mut Builder, p: u32, q: u32, r: u32, four_t: bool) -> u32 {
    b.cx(p, q);
    b.cx(p, r);
    let t = if four_t { and_4t(b, q, r) } else { and_ccz(b, q, r) };
    b.cx(p, t);
    b.cx(q, r);
    b.cx(p, r);
    t
}

/// Reverses [`sum_block`]: restores `q`,`r` and removes the majority ancilla
/// by an X-basis measurement with a conditional `CZ` phase fix.
fn sum_block_unwind(b: &mut Builder, p: u32, q: u32, r: u32, t: u32, label: &str) {
    b.cx(p, r);
    b.cx(q, r);
    b.cx(p, t);
    b.measure('X', t, label);
    b.cond(label, 1, "CZ", &[q, r]);
    b.discard(t);
    b.cx(p, r);
    b.cx(p, q);
}

/// Builds `Expected::PerBranch` from per-wire-group plans listed in final
/// register order; `Conditional` groups pick their expression by one
/// outcome bit.
fn expected_from_plans(plans: Vec<WirePlan>) -> Expected {
    Expected::PerBranch(Box::new(move |bits| {
        let mut exprs = Vec::with_capacity(plans.len());
        for plan in &plans {
            match plan {
                WirePlan::Fixed(e) => exprs.push(e.as_str()),
                WirePlan::Conditional { label, if0, if1 } => {
                    let bit = bits.get(label).copied().ok_or_else(|| {
                        Error::Internal(format!("branch outcome is missing label {label}"))
                    })?;
                    exprs.push(if bit == 0 { if0.as_str() } else { if1.as_str() });
                }
            }
        }
        parse_state_expr(&exprs.join(","))
    }))
}

fn uses(entries: &[(&str, DyadicFraction, usize)]) -> Vec<DeclaredUse> {
    entries
        .iter()
        .map(|(class, average, worst)| DeclaredUse {
            class: (*class).into(),
            average: *average,
            worst: *worst,
        })
        .collect()
}

fn int(n: i64) -> DyadicFraction {
    DyadicFraction::from_int(n)
}

fn half_more(n: i64) -> DyadicFraction {
    DyadicFraction::new(2 * n + 1, 1)
}

fn input_expr(expr: &str) -> Result<Option<InputSpec>> {
    Ok(Some(InputSpec { describe: expr.into(), state: parse_state_expr(expr)? }))
}

// ---------------------------------------------------------------------------
// Protocol builders
// ---------------------------------------------------------------------------

/// `|CS⟩` with a `|T⟩` catalyst becomes three `|T⟩` wires, spending one
/// injected `|T⟩` on the lone dependent phase term.
fn p_cs_catalysis() -> Result<ProtocolSpec> {
    // f(a,b,c) = a + b + 7(a⊕b) + c = 2ab + c mod 8, so U_f|+++⟩ = |CS⟩⊗|T⟩.
    let poly = PhasePolynomial::new(3, [(1, 0b100), (1, 0b010), (7, 0b110), (1, 0b001)])?;
    let report = poly.catalytic_conversion()?;
    debug_assert_eq!((report.rank, report.tau, report.nullity), (3, 4, 3));
    Ok(ProtocolSpec {
        name: "cs_catalysis".into(),
        family: "cs_catalysis",
        summary: "converts |CS⟩ into two fresh |T⟩ copies using a |T⟩ catalyst and one injected |T⟩".into(),
        input: input_expr("CS,T")?,
        circuit: report.circuit,
        expected: Expected::Uniform(parse_state_expr(&report.expected_output)?),
        consumed: uses(&[("T", int(1), 1)]),
        catalysts: vec!["T".into()],
        outputs: vec!["T".into(); 3],
        deterministic: true,
    })
}

/// `|W_n⟩` with a `|T⟩` catalyst becomes `n+1` `|T⟩` wires, spending one
/// injected `|T⟩` (a teleported `T†`) on the dependent all-ones term.
fn p_wn_catalysis(n: usize) -> Result<ProtocolSpec> {
    if !(3..=6).contains(&n) {
        return Err(Error::InvalidParameter(format!("wn_catalysis needs 3 ≤ n ≤ 6, got {n}")));
    }
    // The W_n phase polynomial on wires 0..n−1 plus a singleton T on wire n.
    let w = PhasePolynomial::w_polynomial(n)?;
    let mut terms: Vec<(i64, u64)> =
        w.terms().iter().map(|&(a, mask)| (a as i64, mask << 1)).collect();
    terms.push((1, 1));
    let poly = PhasePolynomial::new(n + 1, terms)?;
    let report = poly.catalytic_conversion()?;
    debug_assert_eq!(report.rank, n + 1);
    Ok(ProtocolSpec {
        name: format!("wn_catalysis({n})"),
        family: "wn_catalysis",
        summary: format!(
            "converts |W_{n}⟩ into {n} fresh |T⟩ copies using a |T⟩ catalyst and one injected |T⟩"
        ),
        input: input_expr(&format!("W:{n},T"))?,
        circuit: report.circuit,
        expected: Expected::Uniform(parse_state_expr(&report.expected_output)?),
        consumed: uses(&[("T", int(1), 1)]),
        catalysts: vec!["T".into()],
        outputs: vec!["T".into(); n + 1],
        deterministic: true,
    })
}

/// Measuring the last qubit of `|W_n⟩` leaves `|W_{n−1}⟩`; the `1` outcome
/// needs the diagonal Clifford `i^{x₁⊕…⊕x_{n−1}}` (parity-folded `S`).
fn p_wn_reduction(n: usize) -> Result<ProtocolSpec> {
    if !(3..=6).contains(&n) {
        return Err(Error::InvalidParameter(format!("wn_reduction needs 3 ≤ n ≤ 6, got {n}")));
    }
    let mut b = Builder::new(n);
    let last = (n - 1) as u32;
    b.measure('Z', last, "m");
    for q in 1..n - 1 {
        b.cond("m", 1, "CX", &[q as u32, 0]);
    }
    b.cond("m", 1, "S", &[0]);
    for q in (1..n - 1).rev() {
        b.cond("m", 1, "CX", &[q as u32, 0]);
    }
    b.discard(last);
    Ok(ProtocolSpec {
        name: format!("wn_reduction({n})"),
        family: "wn_reduction",
        summary: format!("reduces |W_{n}⟩ to |W_{}⟩ by one Z measurement", n - 1),
        input: input_expr(&format!("W:{n}"))?,
        circuit: b.build()?,
        expected: Expected::Uniform(ExactState::w_state(n - 1)?),
        consumed: vec![],
        catalysts: vec![],
        outputs: vec![format!("W:{}", n - 1)],
        deterministic: true,
    })
}

/// Builds `|CCZ⟩` from `|+⟩^⊗3` with four `T` gates: an AND ancilla holds
/// `x·y`, a `CZ` onto the third wire applies the phase, and an X-basis
/// measurement removes the ancilla.
fn p_ccz_from_4t() -> Result<ProtocolSpec> {
    let mut b = Builder::new(3);
    let t = and_4t(&mut b, 0, 1);
    b.gate("CZ", &[t, 2]);
    b.measure('X', t, "u");
    b.cond("u", 1, "CZ", &[0, 1]);
    b.discard(t);
    Ok(ProtocolSpec {
        name: "ccz_from_4t".into(),
        family: "ccz_from_4t",
        summary: "prepares |CCZ⟩ from |+++⟩ with four T gates via an AND ancilla".into(),
        input: input_expr("plus:3")?,
        circuit: b.build()?,
        expected: Expected::Uniform(ExactState::cnz_state(3)?),
        consumed: uses(&[("T", int(4), 4)]),
        catalysts: vec![],
        outputs: vec!["CnZ:3".into()],
        deterministic: true,
    })
}

/// Computes an AND onto a fresh target with four `T` gates, then uncomputes
/// it with an X-basis measurement so the target ends in `|0⟩`.
fn p_toffoli_uncompute() -> Result<ProtocolSpec> {
    let mut b = Builder::new(2);
    let t = and_4t(&mut b, 0, 1);
    b.measure('X', t, "u");
    b.cond("u", 1, "CZ", &[0, 1]);
    b.gate("H", &[t]);
    b.cond("u", 1, "X", &[t]);
    Ok(ProtocolSpec {
        name: "toffoli_uncompute".into(),
        family: "toffoli_uncompute",
        summary: "computes and measurement-uncomputes an AND ancilla, ending in |0⟩".into(),
        input: input_expr("plus:2")?,
        circuit: b.build()?,
        expected: Expected::Uniform(parse_state_expr("plus:2,ket:0")?),
        consumed: uses(&[("T", int(4), 4)]),
        catalysts: vec![],
        outputs: vec!["plus:2".into(), "ket:0".into()],
        deterministic: true,
    })
}

/// A Y measurement on the first qubit of `|CCZ⟩` leaves `|CS⟩` or `|CS†⟩`;
/// a conditional `CZ` folds both outcomes onto `|CS⟩`.
fn p_ccz_to_cs() -> Result<ProtocolSpec> {
    let mut b = Builder::new(3);
    b.measure('Y', 0, "m");
    b.cond("m", 1, "CZ", &[1, 2]);
    b.discard(0);
    Ok(ProtocolSpec {
        name: "ccz_to_cs".into(),
        family: "ccz_to_cs",
        summary: "converts |CCZ⟩ to |CS⟩ by one Y measurement and a conditional CZ".into(),
        input: input_expr("CnZ:3")?,
        circuit: b.build()?,
        expected: Expected::Uniform(ExactState::cs_state()),
        consumed: vec![],
        catalysts: vec![],
        outputs: vec!["CS".into()],
        deterministic: true,
    })
}

/// A Y measurement on the first qubit of `|C^{n−1}Z⟩` leaves `|C^{n−2}S⟩`
/// (+1 outcome) or its conjugate (−1 outcome), each with probability ½.
fn p_multi_ccz_to_cs(n: usize) -> Result<ProtocolSpec> {
    if !(3..=6).contains(&n) {
        return Err(Error::InvalidParameter(format!("multi_ccz_to_cs needs 3 ≤ n ≤ 6, got {n}")));
    }
    let mut b = Builder::new(n);
    b.measure('Y', 0, "m");
    b.discard(0);
    let if0 = ExactState::cns_state(n - 1)?;
    let if1 = conj_state(&if0)?;
    Ok(ProtocolSpec {
        name: format!("multi_ccz_to_cs({n})"),
        family: "multi_ccz_to_cs",
        summary: format!(
            "Y-measures the first qubit of |C{}Z⟩, leaving |C{}S⟩ or its conjugate",
            n - 1,
            n - 2
        ),
        input: input_expr(&format!("CnZ:{n}"))?,
        circuit: b.build()?,
        expected: Expected::PerBranch(Box::new(move |bits| {
            let bit = bits
                .get("m")
                .ok_or_else(|| Error::Internal("missing outcome label m".into()))?;
            Ok(if *bit == 0 { if0.clone() } else { if1.clone() })
        })),
        consumed: vec![],
        catalysts: vec![],
        outputs: vec![format!("CnS:{} (or conjugate)", n - 1)],
        deterministic: false,
    })
}

/// A Z measurement on the first qubit of `|C^{n−1}Z⟩` leaves `|+⟩^{n−1}` or
/// `|C^{n−2}Z⟩`, each with probability ½.
fn p_measure_control(n: usize) -> Result<ProtocolSpec> {
    if !(3..=6).contains(&n) {
        return Err(Error::InvalidParameter(format!("measure_control needs 3 ≤ n ≤ 6, got {n}")));
    }
    let mut b = Builder::new(n);
    b.measure('Z', 0, "m");
    b.discard(0);
    Ok(ProtocolSpec {
        name: format!("measure_control({n})"),
        family: "measure_control",
        summary: format!(
            "Z-measures the first qubit of |C{}Z⟩: |+⟩^{} or |C{}Z⟩ at probability ½",
            n - 1,
            n - 1,
            n - 2
        ),
        input: input_expr(&format!("CnZ:{n}"))?,
        circuit: b.build()?,
        expected: expected_from_plans(vec![WirePlan::Conditional {
            label: "m".into(),
            if0: format!("plus:{}", n - 1),
            if1: format!("CnZ:{}", n - 1),
        }]),
        consumed: vec![],
        catalysts: vec![],
        outputs: vec![format!("plus:{} or CnZ:{}", n - 1, n - 1)],
        deterministic: false,
    })
}

/// Merges two `|CCZ⟩` into the five-qubit `|CCZ₁₂₃CCZ₁₄₅⟩` by one CNOT and
/// one Z measurement, or splits it back into `|CCZ⟩ ⊗ |+⟩`.
fn p_ccz123145(unpack: bool) -> Result<ProtocolSpec> {
    if unpack {
        let mut b = Builder::new(5);
        b.measure('Z', 4, "m");
        b.cond("m", 1, "CZ", &[0, 3]);
        b.discard(4);
        Ok(ProtocolSpec {
            name: "ccz123145(unpack)".into(),
            family: "ccz123145",
            summary: "splits |CCZ₁₂₃CCZ₁₄₅⟩ into |CCZ⟩ ⊗ |+⟩ by one Z measurement".into(),
            input: Some(InputSpec {
                describe: "CCZ123145".into(),
                state: ExactState::ccz123145_state(),
            }),
            circuit: b.build()?,
            expected: Expected::Uniform(parse_state_expr("CnZ:3,plus:1")?),
            consumed: vec![],
            catalysts: vec![],
            outputs: vec!["CnZ:3".into(), "plus:1".into()],
            deterministic: true,
        })
    } else {
        let mut b = Builder::new(6);
        b.cx(0, 3);
        b.measure('Z', 3, "m");
        b.cond("m", 1, "CZ", &[4, 5]);
        b.discard(3);
        Ok(ProtocolSpec {
            name: "ccz123145(pack)".into(),
            family: "ccz123145",
            summary: "merges two |CCZ⟩ into |CCZ₁₂₃CCZ₁₄₅⟩ sharing the first qubit".into(),
            input: input_expr("CnZ:3,CnZ:3")?,
            circuit: b.build()?,
            expected: Expected::Uniform(ExactState::ccz123145_state()),
            consumed: vec![],
            catalysts: vec![],
            outputs: vec!["CCZ123145".into()],
            deterministic: true,
        })
    }
}

/// The three-qubit state `Σ i^{x₂(x₁+x₃)}|x⟩`, i.e. `CS₁,₂CS₂,₃|+++⟩`.
fn cs_pair_state() -> Result<ExactState> {
    state_from_bits(3, |x| Cyclotomic::root_of_unity((x[1] * (x[0] + x[2])) as i64, 1))?
        .renormalize()
        .ok_or_else(|| Error::Internal("CS-pair norm² is a power of two".into()))
}

/// Emits the Clifford word mapping `|CS₁,₂CS₂,₃⟩` to `|CCZ⟩` exactly (up to
/// global phase). The two states are Clifford-equivalent; this dressing was
/// found by exhaustive search over short Clifford words.
fn cs_pair_to_ccz_word(b: &mut Builder, w: [u32; 3]) {
    b.gate("S", &[w[0]]);
    b.cx(w[0], w[2]);
    b.gate("H", &[w[0]]);
    b.gate("X", &[w[0]]);
    b.gate("X", &[w[2]]);
    b.gate("SWAP", &[w[0], w[1]]);
    b.gate("SWAP", &[w[0], w[2]]);
    b.gate("Sdg", &[w[1]]);
    b.gate("Sdg", &[w[2]]);
}

/// Converts between `|CCZ⟩` and `|CS₁,₂CS₂,₃⟩` in either direction. The two
/// states are Clifford-equivalent, so both directions are deterministic
/// measurement-free circuits consuming nothing.
fn p_ccz_two_way(to_ccz: bool) -> Result<ProtocolSpec> {
    let mut b = Builder::new(3);
    if to_ccz {
        cs_pair_to_ccz_word(&mut b, [0, 1, 2]);
        Ok(ProtocolSpec {
            name: "ccz_two_way(to_ccz)".into(),
            family: "ccz_two_way",
            summary: "maps |CS₁,₂CS₂,₃⟩ to |CCZ⟩ by a Clifford word (the states are Clifford-equivalent)".into(),
            input: Some(InputSpec { describe: "CS12·CS23|+++⟩".into(), state: cs_pair_state()? }),
            circuit: b.build()?,
            expected: Expected::Uniform(ExactState::cnz_state(3)?),
            consumed: vec![],
            catalysts: vec![],
            outputs: vec!["CnZ:3".into()],
            deterministic: true,
        })
    } else {
        // Inverse word: reverse order, each gate inverted.
        b.gate("S", &[1]);
        b.gate("S", &[2]);
        b.gate("SWAP", &[0, 2]);
        b.gate("SWAP", &[0, 1]);
        b.gate("X", &[2]);
        b.gate("X", &[0]);
        b.gate("H", &[0]);
        b.cx(0, 2);
        b.gate("Sdg", &[0]);
        Ok(ProtocolSpec {
            name: "ccz_two_way(to_cs_pair)".into(),
            family: "ccz_two_way",
            summary: "maps |CCZ⟩ to |CS₁,₂CS₂,₃⟩ by a Clifford word (the states are Clifford-equivalent)".into(),
            input: input_expr("CnZ:3")?,
            circuit: b.build()?,
            expected: Expected::Uniform(cs_pair_state()?),
            consumed: vec![],
            catalysts: vec![],
            outputs: vec!["CS12·CS23|+++⟩".into()],
            deterministic: true,
        })
    }
}

/// Applies `√T` to three wires at once: one AND ancilla carries the majority
/// (a `T` phase), the parity wire absorbs an injected `|√T⟩`, using
/// `x+y+z = (x⊕y⊕z) + 2·maj(x,y,z)`.
fn p_three_sqrt_t() -> Result<ProtocolSpec> {
    let mut b = Builder::new(3);
    let t = sum_block(&mut b, 0, 1, 2, true);
    b.gate("T", &[t]);
    let inj = b.inject("sqrtT", 1)[0];
    b.cx(2, inj);
    b.measure('Z', inj, "v");
    b.cond("v", 1, "T", &[2]);
    b.discard(inj);
    sum_block_unwind(&mut b, 0, 1, 2, t, "u");
    Ok(ProtocolSpec {
        name: "three_sqrt_t".into(),
        family: "three_sqrt_t",
        summary: "turns |+++⟩ into |√T⟩^⊗3 with one injected |√T⟩ and 5–6 T gates".into(),
        input: input_expr("plus:3")?,
        circuit: b.build()?,
        expected: Expected::Uniform(parse_state_expr("sqrtT*3")?),
        consumed: uses(&[("T", half_more(5), 6), ("sqrtT", int(1), 1)]),
        catalysts: vec!["sqrtT".into()],
        outputs: vec!["sqrtT".into(); 3],
        deterministic: false,
    })
}

/// Chains `k` compression blocks to apply `√T` to `2k+1` wires: each block
/// spends one `CCZ` (AND) and one `T` (majority); the final parity wire
/// absorbs one injected `|√T⟩`, regenerated among the outputs.
fn p_many_sqrt_t(k: usize) -> Result<ProtocolSpec> {
    if !(1..=4).contains(&k) {
        return Err(Error::InvalidParameter(format!("many_sqrt_t needs 1 ≤ k ≤ 4, got {k}")));
    }
    let n = 2 * k + 1;
    let mut b = Builder::new(n);
    let slots: Vec<u32> = (0..n as u32).collect();
    let mut ts = Vec::new();
    for i in 0..k {
        let t = sum_block(&mut b, slots[2 * i], slots[2 * i + 1], slots[2 * i + 2], false);
        b.gate("T", &[t]);
        ts.push(t);
    }
    let parity = slots[2 * k];
    let inj = b.inject("sqrtT", 1)[0];
    b.cx(parity, inj);
    b.measure('Z', inj, "v");
    b.cond("v", 1, "T", &[parity]);
    b.discard(inj);
    for i in (0..k).rev() {
        let label = b.fresh_label("u");
        sum_block_unwind(&mut b, slots[2 * i], slots[2 * i + 1], slots[2 * i + 2], ts[i], &label);
    }
    Ok(ProtocolSpec {
        name: format!("many_sqrt_t({k})"),
        family: "many_sqrt_t",
        summary: format!(
            "turns |+⟩^⊗{n} into |√T⟩^⊗{n} spending {k} CCZ and {k}+½ T on average, regenerating the injected |√T⟩"
        ),
        input: input_expr(&format!("plus:{n}"))?,
        circuit: b.build()?,
        expected: Expected::Uniform(parse_state_expr(&format!("sqrtT*{n}"))?),
        consumed: uses(&[
            ("CCZ", int(k as i64), k),
            ("T", half_more(k as i64), k + 1),
            ("sqrtT", int(1), 1),
        ]),
        catalysts: vec!["sqrtT".into()],
        outputs: vec!["sqrtT".into(); n],
        deterministic: false,
    })
}

/// Applies `√T · S · H · √T` to a data wire using a borrowed `|√T⟩`: the
/// first `√T` comes from a compression block whose parity absorbs the
/// catalyst, the second from injecting a block by-product; the other block
/// by-product is the returned catalyst.
fn p_two_sqrt_t_sandwich() -> Result<ProtocolSpec> {
    let mut b = Builder::new(2); // 0 = data, 1 = catalyst
    let f1 = b.alloc_plus();
    let f2 = b.alloc_plus();
    let t = sum_block(&mut b, 0, f1, f2, true);
    b.gate("T", &[t]);
    // First √T on (data, f1, f2): parity wire f2 absorbs the catalyst.
    b.cx(f2, 1);
    b.measure('Z', 1, "i1");
    b.cond("i1", 1, "T", &[f2]);
    sum_block_unwind(&mut b, 0, f1, f2, t, "u");
    b.discard(1);
    // Interleaved Clifford, then the second √T via the f1 by-product.
    b.gate("H", &[0]);
    b.gate("S", &[0]);
    b.cx(0, f1);
    b.measure('Z', f1, "i2");
    b.cond("i2", 1, "T", &[0]);
    b.discard(f1);

    // Expected data wire: √T·S·H·√T|+⟩.
    let w = Cyclotomic::root_of_unity(1, 3)?;
    let one = Cyclotomic::one();
    let a0 = &one + &w;
    let a1 = &(&Cyclotomic::i_unit() * &w) * &(&one - &w);
    let data = ExactState::from_amps(1, vec![a0, a1])?;
    let expected = data.tensor(&ExactState::sqrt_t_state())?;
    Ok(ProtocolSpec {
        name: "two_sqrt_t_sandwich".into(),
        family: "two_sqrt_t_sandwich",
        summary: "applies √T·S·H·√T to one wire with a |√T⟩ catalyst returned intact, using six T on average (at least five, at most seven)".into(),
        input: input_expr("plus:1,sqrtT")?,
        circuit: b.build()?,
        expected: Expected::Uniform(expected),
        consumed: uses(&[("T", int(6), 7)]),
        catalysts: vec!["sqrtT".into()],
        outputs: vec!["(sqrtT·S·H·sqrtT)|+⟩".into(), "sqrtT".into()],
        deterministic: false,
    })
}

/// One level of the dyadic-rotation cascade: applies `exp(iπj/2^level)` on
/// `|1⟩` to every wire of `chain = [fresh |+⟩ regen] ++ wires` by chaining
/// compression blocks (majorities pend at `level−1`), injecting one
/// `|rot:j:level⟩` on the parity, and recursing on the majority wires. The
/// `level ≥ 3` injection correction is deferred by a conditional SWAP with a
/// fresh `|+⟩` that joins the child batch. Appends `(wire, plan)` records
/// for every surviving wire it creates.
fn rot_batch(
    b: &mut Builder,
    level: u8,
    wires: &[u32],
    j: i64,
    plans: &mut Vec<(u32, WirePlan)>,
    injected: &mut Vec<String>,
) -> Result<()> {
    debug_assert!(wires.len() >= 2 && wires.len() % 2 == 0);
    let s_word = match j.rem_euclid(4) {
        1 => "S",
        3 => "Sdg",
        _ => return Err(Error::InvalidParameter("rotation numerator must be odd".into())),
    };
    let regen = b.alloc_plus();
    plans.push((regen, WirePlan::Fixed(format!("rot:{j}:{level}"))));
    let mut chain = vec![regen];
    chain.extend_from_slice(wires);
    let blocks = wires.len() / 2;
    let mut ts = Vec::new();
    for i in 0..blocks {
        ts.push(sum_block(b, chain[2 * i], chain[2 * i + 1], chain[2 * i + 2], false));
    }
    let parity = *chain.last().expect("chain is nonempty");
    let expr = format!("rot:{j}:{level}");
    let inj = b.inject(&expr, 1)[0];
    injected.push(expr);
    b.cx(parity, inj);
    let v = format!("v{level}");
    b.measure('Z', inj, &v);
    b.discard(inj);
    if level == 2 {
        // Correction and pending majorities are Clifford words S^j here.
        b.cond(&v, 1, s_word, &[parity]);
        for &t in &ts {
            b.gate(s_word, &[t]);
        }
    } else {
        let aux = b.alloc_plus();
        b.cond(&v, 1, "SWAP", &[parity, aux]);
        let mut child = ts.clone();
        child.push(aux);
        rot_batch(b, level - 1, &child, j, plans, injected)?;
        b.cond(&v, 1, "SWAP", &[parity, aux]);
        plans.push((
            aux,
            WirePlan::Conditional {
                label: v.clone(),
                if0: format!("rot:{j}:{}", level - 1),
                if1: "plus:1".into(),
            },
        ));
    }
    for i in (0..blocks).rev() {
        let label = b.fresh_label(&format!("u{level}b"));
        sum_block_unwind(b, chain[2 * i], chain[2 * i + 1], chain[2 * i + 2], ts[i], &label);
    }
    Ok(())
}

/// `a_{d,k} = 2^{d−1}(k−1)+2` rotation gates `exp(iπj/2^d |1⟩⟨1|)` applied
/// in parallel to `|+⟩` wires, consuming `b_{d,k} = (2^{d−1}−1)(k−1)+d−1`
/// CCZ states plus one injected-and-regenerated `|rot:j:d'⟩` catalyst per
/// level `d' = 2..d`.
fn p_dyadic_power(d: u8, k: usize, j: i64) -> Result<ProtocolSpec> {
    if !(2..=4).contains(&d) {
        return Err(Error::InvalidParameter(format!("dyadic_power needs 2 ≤ d ≤ 4, got {d}")));
    }
    if k == 0 {
        return Err(Error::InvalidParameter("dyadic_power needs k ≥ 1".into()));
    }
    if j % 2 == 0 || !(0..(2 << d)).contains(&j) {
        return Err(Error::InvalidParameter(format!(
            "rotation numerator must be odd and in 0..2^{}, got {j}",
            d + 1
        )));
    }
    let slots = (1usize << (d - 1)) * (k - 1) + 2;
    let mut b = Builder::new(slots);
    let slot_ids: Vec<u32> = (0..slots as u32).collect();
    let mut plans: Vec<(u32, WirePlan)> = slot_ids
        .iter()
        .map(|&id| (id, WirePlan::Fixed(format!("rot:{j}:{d}"))))
        .collect();
    let mut injected = Vec::new();
    rot_batch(&mut b, d, &slot_ids, j, &mut plans, &mut injected)?;
    let circuit = b.build()?;

    // Assemble plans in final register order.
    let mut ordered = Vec::with_capacity(b.live.len());
    for &id in &b.live {
        let pos = plans
            .iter()
            .position(|(w, _)| *w == id)
            .ok_or_else(|| Error::Internal(format!("wire {id} has no output plan")))?;
        ordered.push(plans.remove(pos).1);
    }
    if !plans.is_empty() {
        return Err(Error::Internal("output plan refers to a discarded wire".into()));
    }
    let outputs: Vec<String> = ordered
        .iter()
        .map(|p| match p {
            WirePlan::Fixed(e) => e.clone(),
            WirePlan::Conditional { if0, if1, .. } => format!("{if0} or {if1}"),
        })
        .collect();
    let all_fixed = ordered.iter().all(|p| matches!(p, WirePlan::Fixed(_)));
    let expected = if all_fixed {
        Expected::Uniform(parse_state_expr(&outputs.join(","))?)
    } else {
        expected_from_plans(ordered)
    };

    let b_dk = ((1usize << (d - 1)) - 1) * (k - 1) + d as usize - 1;
    let mut consumed: Vec<(String, DyadicFraction, usize)> =
        vec![("CCZ".into(), int(b_dk as i64), b_dk)];
    for expr in injected {
        let class = resource_class(&expr);
        match consumed.iter_mut().find(|(c, _, _)| *c == class) {
            Some(entry) => {
                entry.1 = entry.1 + int(1);
                entry.2 += 1;
            }
            None => consumed.push((class, int(1), 1)),
        }
    }
    let consumed: Vec<DeclaredUse> = consumed
        .into_iter()
        .map(|(class, average, worst)| DeclaredUse { class, average, worst })
        .collect();
    Ok(ProtocolSpec {
        name: format!("dyadic_power({d},{k},{j})"),
        family: "dyadic_power",
        summary: format!(
            "applies {slots} parallel level-{d} rotations exp(iπ{j}/2^{d}), consuming {b_dk} CCZ with one rotation catalyst per level regenerated"
        ),
        input: input_expr(&format!("plus:{slots}"))?,
        circuit,
        expected,
        consumed,
        catalysts: (2..=d).map(|l| format!("rot:{j}:{l}")).collect(),
        outputs,
        deterministic: d == 2,
    })
}

/// Gate-teleports a diagonal resource (`T`, `CS`, or `CCZ`) onto prepared
/// data wires: CNOTs copy the data into the resource wires, Z measurements
/// read them out, and the outcome-conditioned Clifford corrections are the
/// resource conjugates of the measured `X` bytes.
fn p_diagonal_injection(u: &str) -> Result<ProtocolSpec> {
    let (expr, n) = match u {
        "T" => ("T", 1),
        "CS" => ("CS", 2),
        "CCZ" => ("CCZ", 3),
        _ => {
            return Err(Error::InvalidParameter(format!(
                "diagonal_injection supports T, CS, CCZ; got {u}"
            )))
        }
    };
    let mut b = Builder::new(0);
    let rs = b.inject(expr, n);
    let ds: Vec<u32> = (0..n).map(|_| b.alloc_plus()).collect();
    // A non-symmetric diagonal Clifford preparation of the data register.
    b.gate("S", &[ds[0]]);
    if n >= 2 {
        b.gate("CZ", &[ds[0], ds[1]]);
    }
    for k in 0..n {
        b.cx(ds[k], rs[k]);
    }
    let labels: Vec<String> = (0..n).map(|k| format!("m{}", k + 1)).collect();
    for k in 0..n {
        b.measure('Z', rs[k], &labels[k]);
    }
    match n {
        1 => b.cond(&labels[0], 1, "S", &[ds[0]]),
        2 => {
            for k in 0..2 {
                b.cond(&labels[k], 1, "CZ", &[ds[0], ds[1]]);
                b.cond(&labels[k], 1, "Sdg", &[ds[1 - k]]);
            }
            b.cond2(&labels[0], 1, &labels[1], 1, "Z", &[ds[0]]);
            b.cond2(&labels[0], 1, &labels[1], 1, "Z", &[ds[1]]);
        }
        _ => {
            for k in 0..3 {
                let others: Vec<u32> =
                    (0..3).filter(|&x| x != k).map(|x| ds[x]).collect();
                b.cond(&labels[k], 1, "CZ", &others);
            }
            for k in 0..3 {
                for l in k + 1..3 {
                    let third = ds[3 - k - l];
                    b.cond2(&labels[k], 1, &labels[l], 1, "Z", &[third]);
                }
            }
        }
    }
    for &r in rs.iter().rev() {
        b.discard(r);
    }

    // Expected: the resource phase on top of the prepared data register.
    let expected = state_from_bits(n, |x| {
        let prep = x[0] * 2 + if n >= 2 { 4 * x[0] * x[1] } else { 0 };
        let res = match n {
            1 => x[0],
            2 => 2 * x[0] * x[1],
            _ => 4 * x[0] * x[1] * x[2],
        };
        Cyclotomic::root_of_unity((prep + res) as i64, 2)
    })?;
    Ok(ProtocolSpec {
        name: format!("diagonal_injection({u})"),
        family: "diagonal_injection",
        summary: format!(
            "applies the {u} gate to a prepared register by consuming one |{u}⟩ through CNOT readout and Clifford corrections"
        ),
        input: None,
        circuit: b.build()?,
        expected: Expected::Uniform(expected),
        consumed: uses(&[(resource_class(expr).as_str(), int(1), 1)]),
        catalysts: vec![],
        outputs: vec![format!("{u}·C|+⟩^⊗{n}")],
        deterministic: true,
    })
}

// ---------------------------------------------------------------------------
// Adder family
// ---------------------------------------------------------------------------

/// Emits the in-place modular adder on wires `0..2n`: register `i` sits on
/// wires `0..n` and register `j` on wires `n..2n`, both most-significant
/// first; afterwards register `j` holds `i + j mod 2^n`. Ripple-carry with
/// AND ancillas uncomputed by X-basis measurement + conditional `CZ`.
fn adder_into(b: &mut Builder, n: usize) -> Vec<String> {
    let iw = |k: usize| (n - 1 - k) as u32;
    let jw = |k: usize| (2 * n - 1 - k) as u32;
    let mut ts: Vec<u32> = Vec::new(); // ts[k] holds carry c_{k+1}
    ts.push(and_ccz(b, iw(0), jw(0)));
    for k in 1..n - 1 {
        let tk = ts[k - 1];
        b.cx(tk, iw(k));
        b.cx(tk, jw(k));
        let tn = and_ccz(b, iw(k), jw(k));
        b.cx(tk, tn);
        ts.push(tn);
    }
    b.cx(ts[n - 2], jw(n - 1));
    b.cx(iw(n - 1), jw(n - 1));
    let mut labels = Vec::new();
    for k in (1..n - 1).rev() {
        let tk = ts[k - 1];
        let tk1 = ts[k];
        b.cx(tk, tk1);
        let u = b.fresh_label("w");
        b.measure('X', tk1, &u);
        b.cond(&u, 1, "CZ", &[iw(k), jw(k)]);
        b.discard(tk1);
        labels.push(u);
        b.cx(tk, iw(k));
        b.cx(tk, jw(k));
        b.cx(iw(k), jw(k));
        b.cx(tk, jw(k));
    }
    let u = b.fresh_label("w");
    b.measure('X', ts[0], &u);
    b.cond(&u, 1, "CZ", &[iw(0), jw(0)]);
    b.discard(ts[0]);
    labels.push(u);
    b.cx(iw(0), jw(0));
    labels
}

/// The in-place modular adder `|i⟩|j⟩ → |i⟩|i+j mod 2^n⟩` on `2n` wires
/// (both registers most-significant first), built from `n−1` CCZ-based AND
/// ancillas that are uncomputed by X measurements.
pub fn adder_circuit(n: usize) -> Result<CircuitIR> {
    if !(2..=5).contains(&n) {
        return Err(Error::InvalidParameter(format!("adder needs 2 ≤ n ≤ 5, got {n}")));
    }
    let mut b = Builder::new(2 * n);
    adder_into(&mut b, n);
    b.build()
}

/// Feeding `|+⟩^⊗n ⊗ |QFT^1_n⟩` through the adder puts the opposite Fourier
/// phase on the first register: the output is `|QFT^{−1}_n⟩ ⊗ |QFT^1_n⟩`.
fn p_adder_qft(n: usize) -> Result<ProtocolSpec> {
    if !(2..=4).contains(&n) {
        return Err(Error::InvalidParameter(format!("adder_qft needs 2 ≤ n ≤ 4, got {n}")));
    }
    let mut b = Builder::new(2 * n);
    adder_into(&mut b, n);
    let expected = ExactState::qft_state(-1, n)?.tensor(&ExactState::qft_state(1, n)?)?;
    Ok(ProtocolSpec {
        name: format!("adder_qft({n})"),
        family: "adder_qft",
        summary: format!(
            "adds |+⟩^⊗{n} into |QFT¹_{n}⟩, kicking the conjugate Fourier phase back onto the first register"
        ),
        input: input_expr(&format!("plus:{n},QFT:1:{n}"))?,
        circuit: b.build()?,
        expected: Expected::Uniform(expected),
        consumed: uses(&[("CCZ", int(n as i64 - 1), n - 1)]),
        catalysts: vec![],
        outputs: vec![format!("QFT:-1:{n}"), format!("QFT:1:{n}")],
        deterministic: true,
    })
}

/// Runs the adder as a controlled increment: register `i` is zero except a
/// `|+⟩` control on its lowest bit, register `j` is `|0⟩⊗|+⟩^{n−1}`. The sum
/// bits then read `s_k = y_k ⊕ c·y₀⋯y_{k−1}` with the top carry
/// `c·y₀⋯y_{n−2}`, which X-on-low-bits + H-on-top maps to `|C^nZ⟩`.
fn p_adder_to_cnz(n: usize) -> Result<ProtocolSpec> {
    if !(2..=4).contains(&n) {
        return Err(Error::InvalidParameter(format!("adder_to_cnz needs 2 ≤ n ≤ 4, got {n}")));
    }
    let mut b = Builder::new(2 * n);
    adder_into(&mut b, n);
    for k in 0..n - 1 {
        b.gate("X", &[(2 * n - 1 - k) as u32]);
    }
    b.gate("H", &[n as u32]);
    for id in (0..n as u32 - 1).rev() {
        b.discard(id);
    }
    let zeros: String = "0".repeat(n - 1);
    let input = format!("ket:{zeros},plus:1,ket:0,plus:{}", n - 1);
    Ok(ProtocolSpec {
        name: format!("adder_to_cnz({n})"),
        family: "adder_to_cnz",
        summary: format!(
            "runs the {n}-bit adder as a controlled increment and reads off |C{}Z⟩ after X/H relabeling",
            n
        ),
        input: input_expr(&input)?,
        circuit: b.build()?,
        expected: Expected::Uniform(ExactState::cnz_state(n + 1)?),
        consumed: uses(&[("CCZ", int(n as i64 - 1), n - 1)]),
        catalysts: vec![],
        outputs: vec![format!("CnZ:{}", n + 1)],
        deterministic: true,
    })
}

/// Runs the controlled-increment construction and verifies it, exposed
/// directly because the resulting nullity values are of independent
/// interest.
pub fn adder_to_cnz(n: usize) -> Result<VerificationReport> {
    verify(&p_adder_to_cnz(n)?)
}

// ---------------------------------------------------------------------------
// Catalog and dispatch
// ---------------------------------------------------------------------------

fn param_usize(params: &BTreeMap<String, String>, key: &str, default: usize) -> Result<usize> {
    match params.get(key) {
        None => Ok(default),
        Some(v) => v.parse().map_err(|_| {
            Error::InvalidParameter(format!("parameter {key}={v} is not a non-negative integer"))
        }),
    }
}

fn param_str<'a>(params: &'a BTreeMap<String, String>, key: &str, default: &'a str) -> &'a str {
    params.get(key).map(String::as_str).unwrap_or(default)
}

/// Instantiates a protocol family with explicit parameters (missing ones
/// take the family's default).
pub fn build(family: &str, params: &BTreeMap<String, String>) -> Result<ProtocolSpec> {
    match family {
        "cs_catalysis" => p_cs_catalysis(),
        "wn_catalysis" => p_wn_catalysis(param_usize(params, "n", 3)?),
        "wn_reduction" => p_wn_reduction(param_usize(params, "n", 3)?),
        "ccz_from_4t" => p_ccz_from_4t(),
        "toffoli_uncompute" => p_toffoli_uncompute(),
        "ccz_to_cs" => p_ccz_to_cs(),
        "two_cs_to_ccz" => p_two_cs_to_ccz(),
        "multi_ccz_to_cs" => p_multi_ccz_to_cs(param_usize(params, "n", 3)?),
        "measure_control" => p_measure_control(param_usize(params, "n", 3)?),
        "ccz123145" => p_ccz123145(param_str(params, "dir", "pack") == "unpack"),
        "ccz_two_way" => p_ccz_two_way(param_str(params, "dir", "to_cs_pair") == "to_ccz"),
        "three_sqrt_t" => p_three_sqrt_t(),
        "many_sqrt_t" => p_many_sqrt_t(param_usize(params, "k", 1)?),
        "two_sqrt_t_sandwich" => p_two_sqrt_t_sandwich(),
        "dyadic_power" => {
            let d = param_usize(params, "d", 2)? as u8;
            let k = param_usize(params, "k", 1)?;
            let j = param_usize(params, "j", 1)? as i64;
            p_dyadic_power(d, k, j)
        }
        "diagonal_injection" => p_diagonal_injection(param_str(params, "u", "T")),
        "adder_qft" => p_adder_qft(param_usize(params, "n", 2)?),
        "adder_to_cnz" => p_adder_to_cnz(param_usize(params, "n", 2)?),
        _ => Err(Error::InvalidParameter(format!("unknown protocol family `{family}`"))),
    }
}

/// Every protocol at its default instances: parameterized families appear at
/// their two smallest parameter values.
pub fn catalog() -> Result<Vec<ProtocolSpec>> {
    let mut list = Vec::new();
    list.push(p_cs_catalysis()?);
    for n in [3, 4] {
        list.push(p_wn_catalysis(n)?);
    }
    for n in [3, 4] {
        list.push(p_wn_reduction(n)?);
    }
    list.push(p_ccz_from_4t()?);
    list.push(p_toffoli_uncompute()?);
    list.push(p_ccz_to_cs()?);
    list.push(p_two_cs_to_ccz()?);
    for n in [3, 4] {
        list.push(p_multi_ccz_to_cs(n)?);
    }
    for n in [3, 4] {
        list.push(p_measure_control(n)?);
    }
    list.push(p_ccz123145(false)?);
    list.push(p_ccz123145(true)?);
    list.push(p_ccz_two_way(false)?);
    list.push(p_ccz_two_way(true)?);
    list.push(p_three_sqrt_t()?);
    for k in [1, 2] {
        list.push(p_many_sqrt_t(k)?);
    }
    list.push(p_two_sqrt_t_sandwich()?);
    for (d, k) in [(2, 1), (3, 1)] {
        list.push(p_dyadic_power(d, k, 1)?);
    }
    for u in ["T", "CS", "CCZ"] {
        list.push(p_diagonal_injection(u)?);
    }
    for n in [2, 3] {
        list.push(p_adder_qft(n)?);
    }
    for n in [2, 3] {
        list.push(p_adder_to_cnz(n)?);
    }
    Ok(list)
}

/// Converts two `|CS⟩` into one `|CCZ⟩` with no further resources: a CNOT +
/// Z measurement merges the pair into `|CS₁,₂CS₂,₃⟩` (Clifford corrections
/// on the `1` outcome), and a Clifford word maps that onto `|CCZ⟩`.
fn p_two_cs_to_ccz() -> Result<ProtocolSpec> {
    let mut b = Builder::new(4);
    // Merge: wires (0,1) ⊗ (2,3) → CS₁,₂CS₂,₃ on (0,1,3).
    b.cx(1, 2);
    b.measure('Z', 2, "m");
    b.cond("m", 1, "CZ", &[1, 3]);
    b.cond("m", 1, "Sdg", &[3]);
    b.discard(2);
    cs_pair_to_ccz_word(&mut b, [0, 1, 3]);
    Ok(ProtocolSpec {
        name: "two_cs_to_ccz".into(),
        family: "two_cs_to_ccz",
        summary: "merges 2|CS⟩ into |CS₁,₂CS₂,₃⟩ by one Z measurement, then Clifford-rotates onto |CCZ⟩".into(),
        input: input_expr("CS,CS")?,
        circuit: b.build()?,
        expected: Expected::Uniform(ExactState::cnz_state(3)?),
        consumed: vec![],
        catalysts: vec![],
        outputs: vec!["CnZ:3".into()],
        deterministic: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check(spec: &ProtocolSpec) -> VerificationReport {
        let report = verify(spec).unwrap_or_else(|e| panic!("{}: {e}", spec.name));
        assert!(report.passed, "{}: {:?}", spec.name, report.failures);
        assert!(report.monotone_ok, "{}: monotone audit failed", spec.name);
        report
    }

    fn consumption<'r>(report: &'r VerificationReport, class: &str) -> &'r ResourceUse {
        report
            .consumption
            .iter()
            .find(|u| u.class == class)
            .unwrap_or_else(|| panic!("{}: no {class} consumption", report.protocol))
    }

    #[test]
    fn cs_catalysis_yields_three_t_wires_for_one_injected_t() {
        let spec = p_cs_catalysis().unwrap();
        let report = check(&spec);
        assert_eq!(report.branches, 2);
        assert!(report.all_half);
        assert_eq!(consumption(&report, "T").average, int(1));
    }

    #[test]
    fn wn_catalysis_yields_t_wires() {
        for n in [3, 4] {
            let report = check(&p_wn_catalysis(n).unwrap());
            assert_eq!(report.branches, 2);
            assert_eq!(consumption(&report, "T").worst, 1);
        }
    }

    #[test]
    fn wn_reduction_reaches_smaller_w_on_both_outcomes() {
        for n in [3, 4] {
            let report = check(&p_wn_reduction(n).unwrap());
            assert_eq!(report.branches, 2);
            assert!(report.all_half);
            assert!(report.consumption.is_empty());
        }
    }

    #[test]
    fn ccz_from_four_t() {
        let report = check(&p_ccz_from_4t().unwrap());
        assert_eq!(report.branches, 2);
        let t = consumption(&report, "T");
        assert_eq!((t.average, t.worst, t.best), (int(4), 4, 4));
    }

    #[test]
    fn toffoli_uncompute_ends_in_zero() {
        let report = check(&p_toffoli_uncompute().unwrap());
        assert_eq!(report.branches, 2);
        assert_eq!(consumption(&report, "T").average, int(4));
    }

    #[test]
    fn ccz_to_cs_is_deterministic_after_correction() {
        let report = check(&p_ccz_to_cs().unwrap());
        assert_eq!(report.branches, 2);
        assert!(report.all_half);
    }

    #[test]
    fn multi_ccz_to_cs_splits_into_conjugate_pair() {
        for n in [3, 4] {
            let report = check(&p_multi_ccz_to_cs(n).unwrap());
            assert_eq!(report.branches, 2);
            assert!(report.all_half);
        }
    }

    #[test]
    fn measure_control_splits_half_half() {
        for n in [3, 4] {
            let report = check(&p_measure_control(n).unwrap());
            assert_eq!(report.branches, 2);
            assert!(report.all_half);
        }
    }

    #[test]
    fn ccz123145_roundtrip() {
        check(&p_ccz123145(false).unwrap());
        check(&p_ccz123145(true).unwrap());
    }

    #[test]
    fn ccz_two_way_is_a_clifford_equivalence() {
        for dir in [false, true] {
            let report = check(&p_ccz_two_way(dir).unwrap());
            assert_eq!(report.branches, 1);
            assert!(report.consumption.is_empty());
        }
    }

    #[test]
    fn two_cs_to_ccz_consumes_nothing_beyond_its_input() {
        let report = check(&p_two_cs_to_ccz().unwrap());
        assert_eq!(report.branches, 2);
        assert!(report.all_half);
        assert!(report.consumption.is_empty());
    }

    #[test]
    fn three_sqrt_t_consumption_statistics() {
        let report = check(&p_three_sqrt_t().unwrap());
        assert_eq!(report.branches, 4);
        let t = consumption(&report, "T");
        assert_eq!((t.average, t.worst, t.best), (half_more(5), 6, 5));
        assert_eq!(consumption(&report, "sqrtT").average, int(1));
    }

    #[test]
    fn many_sqrt_t_matches_declared_rates() {
        for k in [1usize, 2] {
            let report = check(&p_many_sqrt_t(k).unwrap());
            assert_eq!(report.branches, 1 << (k + 1));
            assert_eq!(consumption(&report, "CCZ").average, int(k as i64));
            let t = consumption(&report, "T");
            assert_eq!(t.average, half_more(k as i64));
            assert_eq!(t.worst, k + 1);
        }
    }

    #[test]
    fn two_sqrt_t_sandwich_uses_six_t_on_average() {
        let report = check(&p_two_sqrt_t_sandwich().unwrap());
        assert_eq!(report.branches, 8);
        assert!(report.all_half);
        let t = consumption(&report, "T");
        assert_eq!((t.average, t.worst, t.best), (int(6), 7, 5));
    }

    #[test]
    fn dyadic_power_consumes_exactly_b_dk_ccz() {
        for (d, k) in [(2u8, 1usize), (2, 2), (3, 1)] {
            let report = check(&p_dyadic_power(d, k, 1).unwrap());
            let b_dk = ((1usize << (d - 1)) - 1) * (k - 1) + d as usize - 1;
            assert_eq!(consumption(&report, "CCZ").average, int(b_dk as i64));
        }
    }

    #[test]
    fn dyadic_power_rejects_oversized_instances() {
        // Level 3 with k = 2 would need 15 live qubits.
        assert!(p_dyadic_power(3, 2, 1).is_err());
    }

    #[test]
    fn diagonal_injection_applies_the_gate() {
        for (u, branches) in [("T", 2), ("CS", 4), ("CCZ", 8)] {
            let report = check(&p_diagonal_injection(u).unwrap());
            assert_eq!(report.branches, branches);
            assert!(report.all_half);
        }
    }

    #[test]
    fn adder_matches_integer_addition_on_all_basis_pairs() {
        for n in [2usize, 3] {
            let circuit = adder_circuit(n).unwrap();
            let m = 1usize << n;
            for i in 0..m {
                for j in 0..m {
                    let input = parse_state_expr(&format!("ket:{:0n$b}{:0n$b}", i, j, n = n))
                        .unwrap();
                    let expected =
                        parse_state_expr(&format!("ket:{:0n$b}{:0n$b}", i, (i + j) % m, n = n))
                            .unwrap();
                    for branch in simulate(&circuit, Some(&input)).unwrap() {
                        assert!(
                            branch.state.equal_up_to_phase(&expected).unwrap(),
                            "adder({n}) on i={i} j={j}, branch {}",
                            branch.outcome
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn adder_matches_integer_addition_on_sampled_pairs_n4() {
        let circuit = adder_circuit(4).unwrap();
        for (i, j) in [(3usize, 9usize), (15, 1), (7, 8), (12, 13), (5, 11)] {
            let input = parse_state_expr(&format!("ket:{i:04b}{j:04b}")).unwrap();
            let expected = parse_state_expr(&format!("ket:{i:04b}{:04b}", (i + j) % 16)).unwrap();
            for branch in simulate(&circuit, Some(&input)).unwrap() {
                assert!(branch.state.equal_up_to_phase(&expected).unwrap());
            }
        }
    }

    #[test]
    fn adder_qft_kicks_back_conjugate_phase() {
        for n in [2, 3] {
            let report = check(&p_adder_qft(n).unwrap());
            assert_eq!(report.branches, 1 << (n - 1));
            assert!(report.all_half);
        }
    }

    #[test]
    fn adder_to_cnz_outputs_have_expected_nullity() {
        for (n, nu) in [(2usize, 3u32), (3, 4)] {
            let spec = p_adder_to_cnz(n).unwrap();
            check(&spec);
            let out = spec.expected_state(&BTreeMap::new()).unwrap();
            assert_eq!(out.stabilizer_nullity().unwrap(), nu);
        }
    }

    #[test]
    fn adder_with_zero_control_stays_stabilizer() {
        let spec = p_adder_to_cnz(2).unwrap();
        let input = parse_state_expr("ket:00,ket:0,plus:1").unwrap();
        for branch in simulate(&spec.circuit, Some(&input)).unwrap() {
            assert_eq!(branch.state.stabilizer_nullity().unwrap(), 0);
        }
    }

    #[test]
    fn catalog_has_all_families_at_two_instances() {
        let list = catalog().unwrap();
        assert!(list.len() >= 17, "catalog has only {} entries", list.len());
        let mut families: Vec<&str> = list.iter().map(|p| p.family).collect();
        families.sort();
        families.dedup();
        assert!(families.len() >= 17, "only {} distinct families", families.len());
    }

    #[test]
    fn verifier_rejects_a_wrong_expectation() {
        let mut spec = p_ccz_to_cs().unwrap();
        spec.expected = Expected::Uniform(parse_state_expr("plus:2").unwrap());
        let report = verify(&spec).unwrap();
        assert!(!report.passed);
        assert!(report.failures.iter().any(|f| f.contains("differs")));
    }

    #[test]
    fn verifier_rejects_a_wrong_consumption_declaration() {
        let mut spec = p_ccz_from_4t().unwrap();
        spec.consumed = uses(&[("T", int(3), 3)]);
        let report = verify(&spec).unwrap();
        assert!(!report.passed);
    }
}
