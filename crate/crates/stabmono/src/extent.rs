//! Stabilizer-state enumeration and the stabilizer-extent convex program
//! `ξ(ψ) = min ‖c‖₁²` over decompositions `ψ = Σ c_α φ_α` into stabilizer
//! states, with dual-witness certification.
//!
//! The minimization is a complex basis-pursuit problem (equivalently a real
//! second-order cone program). It is solved by a first-order operator
//! splitting (ADMM with over-relaxation) on an active column set, with
//! certified termination: any dual vector `ω` yields the lower bound
//! `|⟨ω|ψ⟩|² / max_φ |⟨ω|φ⟩|²`, where the max streams over the full
//! dictionary, so the reported duality gap is global regardless of which
//! columns the splitting iteration touched.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::cyclotomic::Cyclotomic;
use crate::states::ExactState;
use crate::{Error, Result};

/// Hard cap for descriptor enumeration (`2^n ∏ (2^j+1)` descriptors).
pub const ENUM_CAP: usize = 5;
/// Hard cap for extent solves (dictionary size 36 720 at `n = 4`).
pub const EXTENT_CAP: usize = 4;

/// A canonical stabilizer state
/// `2^{−k/2} Σ_{u ∈ F₂^k} i^{f(u)} |B u ⊕ s⟩` where `B` is an n×k matrix in
/// reduced row-echelon form, `s` a shift reduced against the pivots, and
/// `f(u) = Σ_j ℓ_j u_j + 2 Σ_{a<b} q_{ab} u_a u_b mod 4` with `ℓ_j ∈ ℤ₄`,
/// `q_{ab} ∈ F₂`. Distinct descriptors give distinct states, and for fixed
/// `n` there are exactly `2^n ∏_{j=1}^n (2^j + 1)` of them.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StabilizerDescriptor {
    n: usize,
    basis: Vec<u64>,
    shift: u64,
    linear: Vec<u8>,
    quad: u64,
}

impl StabilizerDescriptor {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Dimension of the affine support.
    pub fn k(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[u64] {
        &self.basis
    }

    pub fn shift(&self) -> u64 {
        self.shift
    }

    fn pair_bit(&self, a: usize, b: usize) -> u32 {
        // strictly upper-triangular index for a < b within k columns
        let k = self.k();
        let idx = a * k - a * (a + 1) / 2 + (b - a - 1);
        ((self.quad >> idx) & 1) as u32
    }

    /// `f(u) mod 4`.
    pub fn phase_exponent(&self, u: u64) -> u8 {
        let k = self.k();
        let mut e = 0u32;
        for j in 0..k {
            if (u >> j) & 1 == 1 {
                e += self.linear[j] as u32;
            }
        }
        for a in 0..k {
            if (u >> a) & 1 == 0 {
                continue;
            }
            for b in (a + 1)..k {
                if (u >> b) & 1 == 1 {
                    e += 2 * self.pair_bit(a, b);
                }
            }
        }
        (e % 4) as u8
    }

    /// The basis index `B u ⊕ s`.
    pub fn point(&self, u: u64) -> u64 {
        let mut x = self.shift;
        for (j, row) in self.basis.iter().enumerate() {
            if (u >> j) & 1 == 1 {
                x ^= row;
            }
        }
        x
    }

    /// The exact state vector for this descriptor.
    pub fn to_state(&self) -> ExactState {
        let k = self.k();
        let mag = Cyclotomic::inv_sqrt2().pow(k as u32);
        let mut amps = vec![Cyclotomic::zero(); 1usize << self.n];
        for u in 0..1u64 << k {
            amps[self.point(u) as usize] = mag.mul_i_pow(self.phase_exponent(u));
        }
        ExactState::from_amps(self.n, amps).expect("descriptor amplitudes are valid")
    }

    /// Writes the float column into `out` (length `2^n`, overwritten).
    pub fn write_column(&self, out: &mut [Complex64]) {
        debug_assert_eq!(out.len(), 1usize << self.n);
        out.fill(Complex64::new(0.0, 0.0));
        let k = self.k();
        let mag = 2f64.powi(-(k as i32) / 2) * if k % 2 == 1 { std::f64::consts::FRAC_1_SQRT_2 } else { 1.0 };
        const I_POW: [Complex64; 4] = [
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 1.0),
            Complex64::new(-1.0, 0.0),
            Complex64::new(0.0, -1.0),
        ];
        for u in 0..1u64 << k {
            out[self.point(u) as usize] = I_POW[self.phase_exponent(u) as usize] * mag;
        }
    }
}

/// `2^n ∏_{j=1}^n (2^j + 1)`: the number of stabilizer states on n qubits.
pub fn stabilizer_count(n: usize) -> u128 {
    let mut c: u128 = 1 << n;
    for j in 1..=n {
        c *= (1u128 << j) + 1;
    }
    c
}

/// Streams every canonical descriptor exactly once, in a fixed order whose
/// first `2^n` entries are the computational basis states.
pub fn enumerate_stabilizer_states(
    n: usize,
) -> Result<impl Iterator<Item = StabilizerDescriptor>> {
    if n == 0 || n > ENUM_CAP {
        return Err(Error::QubitCap(n, ENUM_CAP));
    }
    let affines = enumerate_affine_subspaces(n);
    Ok(affines.into_iter().flat_map(move |(basis, shift)| {
        let k = basis.len();
        let quad_bits = k.saturating_sub(1) * k / 2;
        let total = 1u64 << (2 * k + quad_bits);
        (0..total).map(move |code| {
            let linear: Vec<u8> = (0..k).map(|j| ((code >> (2 * j)) & 3) as u8).collect();
            StabilizerDescriptor { n, basis: basis.clone(), shift, linear, quad: code >> (2 * k) }
        })
    }))
}

/// All (RREF basis, reduced shift) pairs, dimension ascending.
fn enumerate_affine_subspaces(n: usize) -> Vec<(Vec<u64>, u64)> {
    let mut out = Vec::new();
    for k in 0..=n {
        for pivots in descending_combinations(n, k) {
            let pivot_mask: u64 = pivots.iter().map(|&p| 1u64 << p).sum();
            // free positions per row: bits below the row's pivot, not pivots
            let row_free: Vec<Vec<usize>> = pivots
                .iter()
                .map(|&p| (0..p).filter(|b| pivot_mask >> b & 1 == 0).collect())
                .collect();
            let shift_free: Vec<usize> =
                (0..n).filter(|b| pivot_mask >> b & 1 == 0).collect();
            let mut bases = Vec::new();
            collect_bases(&pivots, &row_free, 0, &mut vec![0u64; k], &mut bases);
            for basis in &bases {
                for sel in 0..1u64 << shift_free.len() {
                    let shift = scatter(sel, &shift_free);
                    out.push((basis.clone(), shift));
                }
            }
        }
    }
    out
}

/// k-element subsets of 0..n as strictly decreasing bit positions.
fn descending_combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(next: i64, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if left == 0 {
            out.push(cur.clone());
            return;
        }
        let mut b = next;
        while b >= left as i64 - 1 {
            cur.push(b as usize);
            rec(b - 1, left - 1, cur, out);
            cur.pop();
            b -= 1;
        }
    }
    rec(n as i64 - 1, k, &mut cur, &mut out);
    out
}

fn collect_bases(
    pivots: &[usize],
    row_free: &[Vec<usize>],
    row: usize,
    cur: &mut Vec<u64>,
    out: &mut Vec<Vec<u64>>,
) {
    if row == pivots.len() {
        out.push(cur.clone());
        return;
    }
    for sel in 0..1u64 << row_free[row].len() {
        cur[row] = (1u64 << pivots[row]) | scatter(sel, &row_free[row]);
        collect_bases(pivots, row_free, row + 1, cur, out);
    }
}

fn scatter(sel: u64, positions: &[usize]) -> u64 {
    let mut v = 0u64;
    for (i, &p) in positions.iter().enumerate() {
        if (sel >> i) & 1 == 1 {
            v |= 1u64 << p;
        }
    }
    v
}

// ---------------------------------------------------------------------------
// Extent solver
// ---------------------------------------------------------------------------

/// Solver tolerances and budget.
#[derive(Clone, Copy, Debug)]
pub struct ExtentOptions {
    /// RMS tolerance on the splitting (consensus) residual.
    pub tol_primal: f64,
    /// Absolute tolerance on the certified duality gap of ξ.
    pub tol_gap: f64,
    /// Total inner-iteration budget.
    pub max_iter: usize,
}

impl Default for ExtentOptions {
    fn default() -> Self {
        ExtentOptions { tol_primal: 1e-9, tol_gap: 1e-6, max_iter: 200_000 }
    }
}

/// A converged extent solve: `value − witness_bound = gap ≤ tol_gap`, both
/// sides certified (the witness bound streams over the full dictionary).
#[derive(Clone, Debug)]
pub struct ExtentResult {
    /// `‖c‖₁²` of the best feasible decomposition found (upper bound on ξ).
    pub value: f64,
    /// Active coefficients as (dictionary index, coefficient).
    pub coefficients: Vec<(usize, Complex64)>,
    /// `‖Σ c_α φ_α − ψ‖₂` of the returned coefficients.
    pub primal_residual: f64,
    /// Dual witness, normalized so `max_φ |⟨ω|φ⟩|² = 1`.
    pub witness: Vec<Complex64>,
    /// `|⟨ω|ψ⟩|²` for the normalized witness (lower bound on ξ).
    pub witness_bound: f64,
    /// `value − witness_bound ≥ 0`.
    pub gap: f64,
    pub iterations: usize,
}

/// Product-of-extents with the multiplicativity conditions checked per
/// factor: valid when each factor has ≤ 3 qubits or its certified witness
/// keeps fidelity ≥ 1/4 with some stabilizer state.
#[derive(Clone, Debug)]
pub struct MultiplicativeExtent {
    pub value: f64,
    pub valid: bool,
    pub factors: Vec<f64>,
}

struct Dictionary {
    rows: usize,
    descriptors: Vec<StabilizerDescriptor>,
}

impl Dictionary {
    fn build(n: usize) -> Result<Self> {
        let descriptors: Vec<_> = enumerate_stabilizer_states(n)?.collect();
        Ok(Dictionary { rows: 1usize << n, descriptors })
    }

    fn len(&self) -> usize {
        self.descriptors.len()
    }

    /// `⟨φ_j|v⟩` for every column, streamed in parallel blocks.
    fn overlaps(&self, v: &[Complex64]) -> Vec<Complex64> {
        let rows = self.rows;
        self.descriptors
            .par_iter()
            .map_init(
                || vec![Complex64::new(0.0, 0.0); rows],
                |buf, d| {
                    d.write_column(buf);
                    buf.iter().zip(v).map(|(a, b)| a.conj() * b).sum()
                },
            )
            .collect()
    }

    /// Dense column-major gather of the listed columns.
    fn gather(&self, indices: &[usize]) -> Vec<Complex64> {
        let rows = self.rows;
        let mut a = vec![Complex64::new(0.0, 0.0); rows * indices.len()];
        for (c, &j) in indices.iter().enumerate() {
            self.descriptors[j].write_column(&mut a[c * rows..(c + 1) * rows]);
        }
        a
    }
}

fn dot_conj(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm2(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

fn norm1(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm()).sum()
}

/// In-place Cholesky `G = L L^H` for a small Hermitian positive-definite
/// matrix (row-major).
fn cholesky(g: &mut [Complex64], m: usize) -> Result<()> {
    for i in 0..m {
        for j in 0..i {
            let mut s = g[i * m + j];
            for k in 0..j {
                s -= g[i * m + k] * g[j * m + k].conj();
            }
            g[i * m + j] = s / g[j * m + j].re;
        }
        let mut d = g[i * m + i].re;
        for k in 0..i {
            d -= g[i * m + k].norm_sqr();
        }
        if d <= 0.0 || !d.is_finite() {
            return Err(Error::Internal("Gram matrix is not positive definite".into()));
        }
        g[i * m + i] = Complex64::new(d.sqrt(), 0.0);
    }
    Ok(())
}

/// Solves `L L^H x = rhs`.
fn cholesky_solve(l: &[Complex64], m: usize, rhs: &[Complex64]) -> Vec<Complex64> {
    let mut y = rhs.to_vec();
    for i in 0..m {
        for k in 0..i {
            let t = l[i * m + k] * y[k];
            y[i] -= t;
        }
        y[i] /= l[i * m + i].re;
    }
    for i in (0..m).rev() {
        for k in (i + 1)..m {
            let t = l[k * m + i].conj() * y[k];
            y[i] -= t;
        }
        y[i] /= l[i * m + i].re;
    }
    y
}

/// The splitting core on a fixed column set. Returns
/// `(x, z, omega, iterations_used, consensus_residual)` where `x` is exactly
/// feasible (`A x = b` up to factorization numerics), `z` is the sparse
/// iterate, and `omega` is the dual estimate.
struct CoreOutput {
    x: Vec<Complex64>,
    z: Vec<Complex64>,
    omega: Vec<Complex64>,
    iterations: usize,
    consensus: f64,
}

#[allow(clippy::too_many_arguments)]
fn splitting_core(
    a: &[Complex64],
    rows: usize,
    cols: usize,
    b: &[Complex64],
    warm_z: Option<Vec<Complex64>>,
    warm_u: Option<Vec<Complex64>>,
    tol_primal: f64,
    budget: usize,
) -> Result<CoreOutput> {
    let col = |j: usize| &a[j * rows..(j + 1) * rows];
    // Gram matrix and factorization
    let mut g = vec![Complex64::new(0.0, 0.0); rows * rows];
    for j in 0..cols {
        let cj = col(j);
        for r in 0..rows {
            if cj[r].norm_sqr() == 0.0 {
                continue;
            }
            for c in 0..rows {
                g[r * rows + c] += cj[r] * cj[c].conj();
            }
        }
    }
    // tiny ridge for numerical safety; it perturbs the projection by ~1e−12
    for r in 0..rows {
        g[r * rows + r] += Complex64::new(1e-12, 0.0);
    }
    cholesky(&mut g, rows)?;

    let matvec = |v: &[Complex64]| -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); rows];
        for j in 0..cols {
            if v[j].norm_sqr() == 0.0 {
                continue;
            }
            let cj = col(j);
            for r in 0..rows {
                out[r] += cj[r] * v[j];
            }
        }
        out
    };
    let adjoint = |w: &[Complex64]| -> Vec<Complex64> {
        (0..cols).map(|j| dot_conj(col(j), w)).collect()
    };

    // warm start from the least-norm solution when no iterate is supplied
    let mut z = warm_z.unwrap_or_else(|| {
        let lam = cholesky_solve(&g, rows, b);
        adjoint(&lam)
    });
    let mut u = warm_u.unwrap_or_else(|| vec![Complex64::new(0.0, 0.0); cols]);
    let mut rho = 1.0f64;
    let alpha = 1.8f64; // over-relaxation
    let mut x = z.clone();
    let mut omega = vec![Complex64::new(0.0, 0.0); rows];
    let mut consensus = f64::INFINITY;
    let scale = (cols as f64).sqrt();

    let mut it = 0usize;
    while it < budget {
        it += 1;
        // x-update: exact projection onto {Ax = b}
        let v: Vec<Complex64> = z.iter().zip(&u).map(|(zi, ui)| zi - ui).collect();
        let mut w = matvec(&v);
        for r in 0..rows {
            w[r] -= b[r];
        }
        let lam = cholesky_solve(&g, rows, &w);
        let corr = adjoint(&lam);
        x = v.iter().zip(&corr).map(|(vi, ci)| vi - ci).collect();
        // dual estimate: A^H(−λ) is the active subgradient direction
        omega = lam.iter().map(|l| -l).collect();

        // z-update with over-relaxation, then dual ascent
        let kappa = 1.0 / rho;
        let mut z_change = 0.0f64;
        let mut cons = 0.0f64;
        for j in 0..cols {
            let xr = alpha * x[j] + (1.0 - alpha) * z[j];
            let t = xr + u[j];
            let m = t.norm();
            let znew = if m > kappa { t * ((m - kappa) / m) } else { Complex64::new(0.0, 0.0) };
            z_change += (znew - z[j]).norm_sqr();
            u[j] += xr - znew;
            z[j] = znew;
            cons += (x[j] - znew).norm_sqr();
        }
        consensus = cons.sqrt() / scale;

        if it % 50 == 0 {
            if consensus <= tol_primal {
                break;
            }
            // residual balancing
            let s = rho * z_change.sqrt() / scale;
            if consensus > 10.0 * s && s > 0.0 {
                rho *= 2.0;
                u.iter_mut().for_each(|ui| *ui *= 0.5);
            } else if s > 10.0 * consensus {
                rho *= 0.5;
                u.iter_mut().for_each(|ui| *ui *= 2.0);
            }
        }
    }
    Ok(CoreOutput { x, z, omega, iterations: it, consensus })
}

/// Solves the stabilizer-extent program for a unit-norm state.
pub fn extent(s: &ExactState, opts: ExtentOptions) -> Result<ExtentResult> {
    let n = s.n();
    if n > EXTENT_CAP {
        return Err(Error::QubitCap(n, EXTENT_CAP));
    }
    if !s.is_unit_norm() {
        return Err(Error::InvalidParameter("extent requires a unit-norm state".into()));
    }
    let dict = Dictionary::build(n)?;
    let rows = dict.rows;
    let b: Vec<Complex64> = s
        .amps()
        .iter()
        .map(|a| {
            let (re, im) = a.to_complex();
            Complex64::new(re, im)
        })
        .collect();

    // initial active set: the computational basis states (always spanning;
    // they are the first 2^n dictionary entries) plus the best overlaps
    let overlaps = dict.overlaps(&b);
    let mut order: Vec<usize> = (0..dict.len()).collect();
    order.sort_by(|&i, &j| {
        overlaps[j].norm_sqr().partial_cmp(&overlaps[i].norm_sqr()).unwrap()
    });
    let mut active: Vec<usize> = (0..rows).collect();
    for &j in order.iter().take(128) {
        if !active.contains(&j) {
            active.push(j);
        }
    }

    let mut total_iters = 0usize;
    let mut warm: Option<(Vec<Complex64>, Vec<Complex64>)> = None;
    let mut best: Option<ExtentResult> = None;
    const MAX_ROUNDS: usize = 50;

    for _round in 0..MAX_ROUNDS {
        let a = dict.gather(&active);
        let budget = (opts.max_iter - total_iters).min(40_000).max(1_000);
        let (wz, wu) = match warm.take() {
            Some((z, u)) => (Some(z), Some(u)),
            None => (None, None),
        };
        let core =
            splitting_core(&a, rows, active.len(), &b, wz, wu, opts.tol_primal, budget)?;
        total_iters += core.iterations;

        // certify globally: normalize the witness against the full dictionary
        let t = dict.overlaps(&core.omega);
        let gmax = t.iter().map(|c| c.norm()).fold(0.0f64, f64::max);
        if gmax <= 0.0 {
            return Err(Error::Internal("zero dual witness".into()));
        }
        let witness: Vec<Complex64> = core.omega.iter().map(|w| w / gmax).collect();
        let wb = dot_conj(&witness, &b).norm_sqr();
        let l1 = norm1(&core.x);
        let value = l1 * l1;
        let gap = value - wb;

        // coefficients and their reconstruction residual
        let thresh = 1e-10 * core.z.iter().map(|c| c.norm()).fold(0.0f64, f64::max);
        let coefficients: Vec<(usize, Complex64)> = active
            .iter()
            .zip(&core.z)
            .filter(|(_, c)| c.norm() > thresh)
            .map(|(&j, &c)| (j, c))
            .collect();
        let mut recon = vec![Complex64::new(0.0, 0.0); rows];
        let mut buf = vec![Complex64::new(0.0, 0.0); rows];
        for &(j, c) in &coefficients {
            dict.descriptors[j].write_column(&mut buf);
            for r in 0..rows {
                recon[r] += buf[r] * c;
            }
        }
        let primal_residual =
            recon.iter().zip(&b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt();

        let result = ExtentResult {
            value,
            coefficients,
            primal_residual,
            witness,
            witness_bound: wb,
            gap,
            iterations: total_iters,
        };
        let better = best.as_ref().map_or(true, |prev| result.gap < prev.gap);
        if better {
            best = Some(result);
        }
        let current = best.as_ref().expect("just set");
        if current.gap.abs() <= opts.tol_gap && core.consensus <= opts.tol_primal {
            return Ok(best.expect("just checked"));
        }
        if total_iters >= opts.max_iter {
            break;
        }

        // column generation: admit dictionary entries that violate the dual
        // certificate of the active set
        let rmax = active.iter().map(|&j| t[j].norm()).fold(0.0f64, f64::max);
        let mut violators: Vec<usize> = (0..dict.len())
            .filter(|j| !active.contains(j) && t[*j].norm() > rmax * (1.0 + 1e-12))
            .collect();
        violators.sort_by(|&i, &j| t[j].norm().partial_cmp(&t[i].norm()).unwrap());
        violators.truncate(64);
        let grew = !violators.is_empty();
        for j in violators {
            active.push(j);
        }
        // warm-start the grown problem
        let core_z = core.z;
        let core_u: Vec<Complex64> = vec![Complex64::new(0.0, 0.0); active.len()];
        let mut z2 = core_z;
        z2.resize(active.len(), Complex64::new(0.0, 0.0));
        warm = Some((z2, core_u));
        if !grew {
            // no new columns: the active set is dual-optimal; keep iterating
            // on the same set with a fresh budget until tolerances are met
            continue;
        }
    }

    let failed = best.expect("at least one round ran");
    Err(Error::SolverNonConvergence {
        residual: failed.primal_residual,
        gap: failed.gap,
        iterations: failed.iterations,
    })
}

/// Certified lower bound `|⟨ω|ψ⟩|² / max_φ |⟨ω|φ⟩|²` for any nonzero ω.
pub fn witness_lower_bound(s: &ExactState, omega: &[Complex64]) -> Result<f64> {
    let n = s.n();
    if n > EXTENT_CAP {
        return Err(Error::QubitCap(n, EXTENT_CAP));
    }
    if omega.len() != 1usize << n {
        return Err(Error::SizeMismatch(omega.len(), 1usize << n));
    }
    if norm2(omega) == 0.0 {
        return Err(Error::InvalidParameter("witness must be nonzero".into()));
    }
    let dict = Dictionary::build(n)?;
    let t = dict.overlaps(omega);
    let gmax2 = t.iter().map(|c| c.norm_sqr()).fold(0.0f64, f64::max);
    let b: Vec<Complex64> = s
        .amps()
        .iter()
        .map(|a| {
            let (re, im) = a.to_complex();
            Complex64::new(re, im)
        })
        .collect();
    let num = dot_conj(omega, &b).norm_sqr();
    Ok(num / gmax2)
}

/// Product of per-factor extents with the multiplicativity conditions
/// verified per factor (≤ 3 qubits, or certified witness with stabilizer
/// fidelity ≥ 1/4). When some factor fails both conditions the product is
/// still returned as a submultiplicative upper bound, flagged invalid.
pub fn multiplicative_extent(
    states: &[ExactState],
    opts: ExtentOptions,
) -> Result<MultiplicativeExtent> {
    if states.is_empty() {
        return Err(Error::InvalidParameter("empty state list".into()));
    }
    let mut value = 1.0f64;
    let mut valid = true;
    let mut factors = Vec::with_capacity(states.len());
    for s in states {
        let r = extent(s, opts)?;
        value *= r.value;
        factors.push(r.value);
        if s.n() <= 3 {
            continue;
        }
        // witness condition: unit-normalize ω and require max stabilizer
        // fidelity ≥ 1/4 (the returned ω has max overlap 1, so the fidelity
        // is 1/‖ω‖²); small slack absorbs solver tolerance
        let wn2 = r.witness.iter().map(|c| c.norm_sqr()).sum::<f64>();
        let fidelity = 1.0 / wn2;
        if !(r.gap.abs() <= 10.0 * opts.tol_gap && fidelity >= 0.25 - 1e-9) {
            valid = false;
        }
    }
    Ok(MultiplicativeExtent { value, valid, factors })
}
