//! Dense statevector simulation for small registers, the purification
//! attack on quantum bit commitment, and BB84 oblivious transfer with
//! measurement forcing.
//!
//! Qubit 0 is the most significant bit of the amplitude index. The first
//! `a` qubits belong to Alice, so index `i * 2^b + j` pairs Alice's basis
//! state `i` with Bob's basis state `j`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::RngCore;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::commit::{self, CommitConfig, CommitError, CommitStatus, StrategyProfile};
use crate::events::{Endpoint, EventLog};
use crate::rng::{below, coin, unit_interval};
use crate::sharing::SecretValue;
use crate::structures::{MonotoneFamily, PlayerId};

pub const MAX_QUBITS: usize = 12;
const NORM_TOL: f64 = 1e-12;
const REDUCTION_TOL: f64 = 1e-10;
const FLIP_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuantumError {
    #[error("register of {0} qubits exceeds the limit of {MAX_QUBITS}")]
    TooManyQubits(usize),
    #[error("{got} amplitudes do not fit {qubits} qubits")]
    Dimension { qubits: usize, got: usize },
    #[error("Alice's partition of {alice} qubits exceeds the register of {qubits}")]
    Partition { alice: usize, qubits: usize },
    #[error("state norm {0} differs from 1")]
    NotNormalized(f64),
    #[error("qubit {0} is out of range")]
    QubitOutOfRange(usize),
    #[error("states have different shapes")]
    ShapeMismatch,
    #[error("Bob's reduced states differ (trace distance {0:e}); no local unitary relates them")]
    NotSameReduction(f64),
    #[error("constructed unitary misses the target (fidelity {0})")]
    Alignment(f64),
    #[error("BB84 transfer needs N >= 32 and 0 < alpha < 1 (got N={n}, alpha={alpha})")]
    Bb84Parameters { n: usize, alpha: f64 },
    #[error(transparent)]
    Commit(#[from] CommitError),
    #[error(transparent)]
    Unveil(#[from] commit::UnveilError),
}

/// Which half of a bipartite register.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Party {
    Alice,
    Bob,
}

pub type Gate = [[Complex64; 2]; 2];

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

pub fn hadamard() -> Gate {
    let h = c(std::f64::consts::FRAC_1_SQRT_2);
    [[h, h], [h, -h]]
}

pub fn pauli_x() -> Gate {
    [[c(0.0), c(1.0)], [c(1.0), c(0.0)]]
}

pub fn pauli_z() -> Gate {
    [[c(1.0), c(0.0)], [c(0.0), c(-1.0)]]
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantumState {
    qubits: usize,
    alice: usize,
    amps: Vec<Complex64>,
}

impl QuantumState {
    /// Computational basis state `index`.
    pub fn basis(qubits: usize, alice: usize, index: usize) -> Result<QuantumState, QuantumError> {
        check_shape(qubits, alice)?;
        let mut amps = vec![c(0.0); 1 << qubits];
        *amps.get_mut(index).ok_or(QuantumError::Dimension { qubits, got: index })? = c(1.0);
        Ok(QuantumState { qubits, alice, amps })
    }

    pub fn from_amplitudes(qubits: usize, alice: usize, amps: Vec<Complex64>) -> Result<QuantumState, QuantumError> {
        check_shape(qubits, alice)?;
        if amps.len() != 1 << qubits {
            return Err(QuantumError::Dimension { qubits, got: amps.len() });
        }
        let state = QuantumState { qubits, alice, amps };
        let norm = state.norm();
        if (norm - 1.0).abs() > NORM_TOL * 1e2 {
            return Err(QuantumError::NotNormalized(norm));
        }
        Ok(state)
    }

    /// Real amplitudes, renormalized.
    pub fn from_real(qubits: usize, alice: usize, amps: &[f64]) -> Result<QuantumState, QuantumError> {
        let norm = amps.iter().map(|a| a * a).sum::<f64>().sqrt();
        QuantumState::from_amplitudes(qubits, alice, amps.iter().map(|a| c(a / norm)).collect())
    }

    pub fn qubits(&self) -> usize {
        self.qubits
    }

    /// Qubits held by Alice.
    pub fn alice_qubits(&self) -> usize {
        self.alice
    }

    pub fn bob_qubits(&self) -> usize {
        self.qubits - self.alice
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    fn mask(&self, qubit: usize) -> Result<usize, QuantumError> {
        if qubit >= self.qubits {
            return Err(QuantumError::QubitOutOfRange(qubit));
        }
        Ok(1 << (self.qubits - 1 - qubit))
    }

    pub fn apply(&mut self, qubit: usize, gate: &Gate) -> Result<(), QuantumError> {
        let bit = self.mask(qubit)?;
        for i in 0..self.amps.len() {
            if i & bit == 0 {
                let (a0, a1) = (self.amps[i], self.amps[i | bit]);
                self.amps[i] = gate[0][0] * a0 + gate[0][1] * a1;
                self.amps[i | bit] = gate[1][0] * a0 + gate[1][1] * a1;
            }
        }
        Ok(())
    }

    pub fn cnot(&mut self, control: usize, target: usize) -> Result<(), QuantumError> {
        let cb = self.mask(control)?;
        let tb = self.mask(target)?;
        if cb == tb {
            return Err(QuantumError::QubitOutOfRange(target));
        }
        for i in 0..self.amps.len() {
            if i & cb != 0 && i & tb == 0 {
                self.amps.swap(i, i | tb);
            }
        }
        Ok(())
    }

    /// Probability of reading 1 on `qubit`.
    pub fn probability_one(&self, qubit: usize) -> Result<f64, QuantumError> {
        let bit = self.mask(qubit)?;
        Ok(self.amps.iter().enumerate().filter(|(i, _)| i & bit != 0).map(|(_, a)| a.norm_sqr()).sum())
    }

    /// Projects `qubit` onto `outcome` and renormalizes; returns the
    /// outcome's probability.
    pub fn project(&mut self, qubit: usize, outcome: bool) -> Result<f64, QuantumError> {
        let bit = self.mask(qubit)?;
        let p1 = self.probability_one(qubit)?;
        let p = if outcome { p1 } else { 1.0 - p1 };
        let scale = if p > 0.0 { 1.0 / p.sqrt() } else { 0.0 };
        for (i, a) in self.amps.iter_mut().enumerate() {
            *a = if (i & bit != 0) == outcome { *a * scale } else { c(0.0) };
        }
        Ok(p)
    }

    /// Measures `qubit` in the computational basis.
    pub fn measure<R: RngCore + ?Sized>(&mut self, qubit: usize, rng: &mut R) -> Result<bool, QuantumError> {
        let outcome = unit_interval(rng) < self.probability_one(qubit)?;
        self.project(qubit, outcome)?;
        Ok(outcome)
    }

    pub fn inner(&self, other: &QuantumState) -> Result<Complex64, QuantumError> {
        if self.qubits != other.qubits || self.alice != other.alice {
            return Err(QuantumError::ShapeMismatch);
        }
        Ok(self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum())
    }

    /// `|<self|other>|²`, blind to global phase.
    pub fn fidelity(&self, other: &QuantumState) -> Result<f64, QuantumError> {
        Ok(self.inner(other)?.norm_sqr())
    }

    /// Amplitudes arranged as a `2^a × 2^b` matrix.
    fn as_matrix(&self) -> DMatrix<Complex64> {
        let cols = 1 << self.bob_qubits();
        DMatrix::from_fn(1 << self.alice, cols, |i, j| self.amps[i * cols + j])
    }

    fn with_matrix(&self, m: &DMatrix<Complex64>) -> QuantumState {
        let cols = m.ncols();
        let mut amps = vec![c(0.0); self.amps.len()];
        for i in 0..m.nrows() {
            for j in 0..cols {
                amps[i * cols + j] = m[(i, j)];
            }
        }
        QuantumState { qubits: self.qubits, alice: self.alice, amps }
    }
}

fn check_shape(qubits: usize, alice: usize) -> Result<(), QuantumError> {
    if qubits > MAX_QUBITS {
        return Err(QuantumError::TooManyQubits(qubits));
    }
    if alice > qubits {
        return Err(QuantumError::Partition { alice, qubits });
    }
    Ok(())
}

/// `(|00> + |11>)/√2` with one qubit each.
pub fn phi_plus() -> QuantumState {
    QuantumState::from_real(2, 1, &[1.0, 0.0, 0.0, 1.0]).expect("valid Bell state")
}

/// `(|01> + |10>)/√2` with one qubit each.
pub fn psi_plus() -> QuantumState {
    QuantumState::from_real(2, 1, &[0.0, 1.0, 1.0, 0.0]).expect("valid Bell state")
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    entries: DMatrix<Complex64>,
}

impl DensityMatrix {
    pub fn entries(&self) -> &DMatrix<Complex64> {
        &self.entries
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn trace(&self) -> f64 {
        self.entries.trace().re
    }

    pub fn hermiticity_error(&self) -> f64 {
        (&self.entries - self.entries.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = SymmetricEigen::new(self.entries.clone()).eigenvalues.iter().copied().collect();
        ev.sort_by(|a, b| b.total_cmp(a));
        ev
    }

    /// Hermitian, trace one and positive semidefinite within `tol`.
    pub fn is_valid(&self, tol: f64) -> bool {
        self.hermiticity_error() < tol && (self.trace() - 1.0).abs() < tol && self.eigenvalues().iter().all(|&e| e > -tol)
    }
}

/// Reduced state of the kept party.
pub fn partial_trace(state: &QuantumState, keep: Party) -> DensityMatrix {
    let m = state.as_matrix();
    let entries = match keep {
        Party::Alice => &m * m.adjoint(),
        // Bob's reduction is (M^T M*) in the index convention above.
        Party::Bob => m.transpose() * m.map(|z| z.conj()),
    };
    DensityMatrix { entries }
}

/// Half the trace norm of `rho - sigma`.
pub fn trace_distance(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64, QuantumError> {
    if rho.dim() != sigma.dim() {
        return Err(QuantumError::ShapeMismatch);
    }
    let diff = &rho.entries - &sigma.entries;
    let ev = SymmetricEigen::new(diff).eigenvalues;
    Ok(0.5 * ev.iter().map(|e| e.abs()).sum::<f64>())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Schmidt {
    /// Nonnegative, descending.
    pub coefficients: Vec<f64>,
    pub alice: Vec<DVector<Complex64>>,
    pub bob: Vec<DVector<Complex64>>,
}

impl Schmidt {
    /// `Σ_k λ_k |a_k>|b_k>` as amplitudes.
    pub fn recompose(&self, like: &QuantumState) -> QuantumState {
        let rows = 1 << like.alice_qubits();
        let cols = 1 << like.bob_qubits();
        let mut m = DMatrix::zeros(rows, cols);
        for ((l, a), b) in self.coefficients.iter().zip(&self.alice).zip(&self.bob) {
            m += a * b.transpose() * c(*l);
        }
        like.with_matrix(&m)
    }
}

/// Schmidt decomposition by singular value decomposition; only terms with
/// nonzero coefficient are kept.
pub fn schmidt_decompose(state: &QuantumState) -> Schmidt {
    let svd = state.as_matrix().svd(true, true);
    let u = svd.u.expect("requested");
    let v_t = svd.v_t.expect("requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let mut out = Schmidt { coefficients: Vec::new(), alice: Vec::new(), bob: Vec::new() };
    for k in order {
        let s = svd.singular_values[k];
        if s <= 1e-12 {
            continue;
        }
        out.coefficients.push(s);
        out.alice.push(u.column(k).into_owned());
        out.bob.push(v_t.row(k).transpose());
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalUnitary {
    matrix: DMatrix<Complex64>,
}

impl LocalUnitary {
    pub fn new(matrix: DMatrix<Complex64>) -> Result<LocalUnitary, QuantumError> {
        let u = LocalUnitary { matrix };
        if !u.matrix.is_square() || u.unitarity_error() > REDUCTION_TOL {
            return Err(QuantumError::ShapeMismatch);
        }
        Ok(u)
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn unitarity_error(&self) -> f64 {
        let n = self.matrix.nrows();
        (self.matrix.adjoint() * &self.matrix - DMatrix::identity(n, n)).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn adjoint(&self) -> LocalUnitary {
        LocalUnitary { matrix: self.matrix.adjoint() }
    }

    /// `(U ⊗ I)` applied to the state.
    pub fn apply(&self, state: &QuantumState) -> Result<QuantumState, QuantumError> {
        if self.matrix.nrows() != 1 << state.alice_qubits() {
            return Err(QuantumError::ShapeMismatch);
        }
        Ok(state.with_matrix(&(&self.matrix * state.as_matrix())))
    }
}

/// Extends orthonormal `vecs` to a basis of `C^dim`.
fn complete_basis(mut vecs: Vec<DVector<Complex64>>, dim: usize) -> Vec<DVector<Complex64>> {
    for e in 0..dim {
        if vecs.len() == dim {
            break;
        }
        let mut v = DVector::from_fn(dim, |i, _| if i == e { c(1.0) } else { c(0.0) });
        for _ in 0..2 {
            for w in &vecs {
                let proj = w.dotc(&v);
                v -= w * proj;
            }
        }
        let norm = v.norm();
        if norm > 1e-6 {
            vecs.push(v / c(norm));
        }
    }
    vecs
}

/// A unitary on Alice's side taking `psi` to `phi` up to global phase.
///
/// Both states are expanded over Bob's Schmidt vectors of `psi`; since
/// those diagonalize the common reduction, Alice's partner vectors in `phi`
/// are orthonormal and the unitary maps one set onto the other.
pub fn hjw_unitary(psi: &QuantumState, phi: &QuantumState) -> Result<LocalUnitary, QuantumError> {
    if psi.qubits() != phi.qubits() || psi.alice_qubits() != phi.alice_qubits() {
        return Err(QuantumError::ShapeMismatch);
    }
    let d = trace_distance(&partial_trace(psi, Party::Bob), &partial_trace(phi, Party::Bob))?;
    if d >= REDUCTION_TOL {
        return Err(QuantumError::NotSameReduction(d));
    }
    let dim = 1 << psi.alice_qubits();
    let sd = schmidt_decompose(psi);
    let target = phi.as_matrix();
    let sources = sd.alice.clone();
    let mut images = Vec::with_capacity(sources.len());
    for (l, b) in sd.coefficients.iter().zip(&sd.bob) {
        let a = &target * b.map(|z| z.conj()) / c(*l);
        images.push(a);
    }
    // Re-orthonormalize against rounding before completing.
    let images = gram_schmidt(images);
    let from = complete_basis(sources, dim);
    let to = complete_basis(images, dim);
    let mut u = DMatrix::zeros(dim, dim);
    for (a, b) in from.iter().zip(&to) {
        u += b * a.adjoint();
    }
    let unitary = LocalUnitary::new(u)?;
    let f = unitary.apply(psi)?.fidelity(phi)?;
    if f < 1.0 - FLIP_TOL {
        return Err(QuantumError::Alignment(f));
    }
    Ok(unitary)
}

fn gram_schmidt(vecs: Vec<DVector<Complex64>>) -> Vec<DVector<Complex64>> {
    let mut out: Vec<DVector<Complex64>> = Vec::with_capacity(vecs.len());
    for mut v in vecs {
        for w in &out {
            let proj = w.dotc(&v);
            v -= w * proj;
        }
        let norm = v.norm();
        out.push(v / c(norm));
    }
    out
}

/// Built-in toy commitments of one bit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ToyProtocol {
    /// Alice keeps half of `Φ+` (bit 0) or `Ψ+` (bit 1).
    Entangling,
    /// Alice sends `|b>`.
    Revealing,
    /// Entangling, after which Alice measures a b-independent ancilla.
    MeasureThenFlip,
}

impl ToyProtocol {
    pub const ALL: [ToyProtocol; 3] = [ToyProtocol::Entangling, ToyProtocol::Revealing, ToyProtocol::MeasureThenFlip];

    pub fn name(self) -> &'static str {
        match self {
            ToyProtocol::Entangling => "entangling",
            ToyProtocol::Revealing => "revealing",
            ToyProtocol::MeasureThenFlip => "measure-then-flip",
        }
    }

    /// The joint state after committing to `bit`, before any measurement.
    pub fn commit_state(self, bit: bool) -> QuantumState {
        match self {
            ToyProtocol::Entangling => {
                if bit {
                    psi_plus()
                } else {
                    phi_plus()
                }
            }
            ToyProtocol::Revealing => QuantumState::basis(2, 1, bit as usize).expect("two qubits"),
            // Register [A, C, B]: Alice holds A and the ancilla C.
            ToyProtocol::MeasureThenFlip => {
                let bell = ToyProtocol::Entangling.commit_state(bit);
                let mut amps = vec![c(0.0); 8];
                for a in 0..2 {
                    for b in 0..2 {
                        amps[(a << 2) | b] = bell.amps[(a << 1) | b];
                    }
                }
                QuantumState::from_amplitudes(3, 2, amps).expect("embedded Bell state")
            }
        }
    }
}

impl std::str::FromStr for ToyProtocol {
    type Err = String;

    fn from_str(s: &str) -> Result<ToyProtocol, String> {
        ToyProtocol::ALL.into_iter().find(|p| p.name() == s).ok_or_else(|| format!("unknown toy protocol `{s}`"))
    }
}

/// Copies A into the ancilla, rotates the ancilla and projects it.
fn ancilla_measurement(state: &QuantumState, outcome: bool) -> Result<(QuantumState, f64), QuantumError> {
    let mut s = state.clone();
    s.cnot(0, 1)?;
    s.apply(1, &hadamard())?;
    let p = s.project(1, outcome)?;
    Ok((s, p))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Certificate {
    Distinguishable,
    Flippable,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackReport {
    pub protocol: String,
    pub trace_distance: f64,
    pub flip_fidelity: Option<f64>,
    pub certified: Certificate,
    /// For measure-then-flip: probability of each ancilla outcome under
    /// bit 0 and bit 1.
    pub outcome_probabilities: Vec<(f64, f64)>,
    /// Set when the flip unitary could not be built.
    pub flip_error: Option<String>,
}

impl AttackReport {
    pub fn render(&self) -> String {
        let fid = self.flip_fidelity.map_or("-".to_string(), |f| format!("{f:.12}"));
        let cert = match self.certified {
            Certificate::Distinguishable => "distinguishable",
            Certificate::Flippable => "flippable",
            Certificate::Inconclusive => "inconclusive",
        };
        let mut out = format!("protocol {}\ntrace_distance {:.3e}\nflip_fidelity {fid}\ncertified {cert}\n", self.protocol, self.trace_distance);
        if let Some(e) = &self.flip_error {
            out.push_str(&format!("flip_error {e}\n"));
        }
        out
    }
}

/// Runs the two-branch argument on a toy protocol: measure how well Bob
/// tells the bits apart, and try to build Alice's flip.
pub fn mayers_attack_demo(protocol: ToyProtocol) -> Result<AttackReport, QuantumError> {
    let s0 = protocol.commit_state(false);
    let s1 = protocol.commit_state(true);
    let d = trace_distance(&partial_trace(&s0, Party::Bob), &partial_trace(&s1, Party::Bob))?;
    let mut report = AttackReport {
        protocol: protocol.name().into(),
        trace_distance: d,
        flip_fidelity: None,
        certified: Certificate::Inconclusive,
        outcome_probabilities: Vec::new(),
        flip_error: None,
    };
    let flip = match protocol {
        ToyProtocol::MeasureThenFlip => {
            let mut worst = f64::INFINITY;
            let mut failure = None;
            for outcome in [false, true] {
                let (m0, p0) = ancilla_measurement(&s0, outcome)?;
                let (m1, p1) = ancilla_measurement(&s1, outcome)?;
                report.outcome_probabilities.push((p0, p1));
                match hjw_unitary(&m0, &m1) {
                    Ok(u) => worst = worst.min(u.apply(&m0)?.fidelity(&m1)?),
                    Err(e) => failure = Some(e),
                }
            }
            match failure {
                Some(e) => Err(e),
                None => Ok(worst),
            }
        }
        _ => hjw_unitary(&s0, &s1).and_then(|u| u.apply(&s0)?.fidelity(&s1)),
    };
    match flip {
        Ok(f) => report.flip_fidelity = Some(f),
        Err(e) => report.flip_error = Some(e.to_string()),
    }
    report.certified = if d >= REDUCTION_TOL {
        Certificate::Distinguishable
    } else if report.flip_fidelity.is_some_and(|f| f > 1.0 - FLIP_TOL) {
        Certificate::Flippable
    } else {
        Certificate::Inconclusive
    };
    Ok(report)
}

/// How Bob commits to his measurement record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CommitBackend {
    /// A trusted box: binding and concealing by fiat.
    Ideal,
    /// One secret-sharing commitment per position, Bob as sender.
    SecretSharing { adversary: MonotoneFamily, bob: PlayerId, alice: PlayerId, rounds: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Bb84Attack {
    None,
    /// Bob keeps the qubits, commits to guesses and measures only after
    /// Alice announces her bases.
    DelayedMeasurement,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bb84Params {
    pub positions: usize,
    pub alpha: f64,
    /// Minimum size of each index set.
    pub min_good: usize,
    pub backend: CommitBackend,
    pub attack: Bb84Attack,
    /// When false Bob never commits and the test is answered on demand.
    pub forcing: bool,
}

impl Default for Bb84Params {
    fn default() -> Bb84Params {
        Bb84Params { positions: 128, alpha: 0.5, min_good: 16, backend: CommitBackend::Ideal, attack: Bb84Attack::None, forcing: true }
    }
}

impl Bb84Params {
    pub fn test_size(&self) -> usize {
        (self.alpha * self.positions as f64).floor() as usize
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Bb84Verdict {
    Accept { output: bool },
    AbortCheatDetected { position: usize },
    AbortTooFewGood { good: usize, bad: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bb84Session {
    pub positions: usize,
    pub alice_bits: Vec<bool>,
    pub alice_bases: Vec<bool>,
    pub bob_bases: Vec<bool>,
    pub bob_results: Vec<bool>,
    /// Secret-sharing commitments, one per position, when that backend ran.
    pub commitments: Vec<commit::CommitSession>,
    pub test_set: Vec<usize>,
    pub index_sets: [Vec<usize>; 2],
    pub masked: Option<(bool, bool)>,
    pub verdict: Bb84Verdict,
    /// What a cheating Bob extracted for (b0, b1).
    pub extracted: Option<(Option<bool>, Option<bool>)>,
    pub events: EventLog,
}

impl Bb84Session {
    pub fn recovered_both(&self, b0: bool, b1: bool) -> bool {
        self.extracted == Some((Some(b0), Some(b1)))
    }
}

/// One BB84 qubit: prepared by Alice, measured by Bob in `basis`.
fn transmit<R: RngCore + ?Sized>(x: bool, theta: bool, basis: bool, rng: &mut R) -> Result<bool, QuantumError> {
    let mut q = QuantumState::basis(1, 0, x as usize)?;
    if theta {
        q.apply(0, &hadamard())?;
    }
    if basis {
        q.apply(0, &hadamard())?;
    }
    q.measure(0, rng)
}

fn parity(bits: &[bool], set: &[usize]) -> bool {
    set.iter().fold(false, |acc, &i| acc ^ bits[i])
}

fn pack_bits(bits: &[bool]) -> Vec<u8> {
    bits.chunks(8).map(|ch| ch.iter().enumerate().fold(0u8, |acc, (i, &b)| acc | ((b as u8) << i))).collect()
}

fn pack_indices(set: &[usize]) -> Vec<u8> {
    set.iter().flat_map(|&i| (i as u32).to_le_bytes()).collect()
}

/// 1-of-2 oblivious transfer of `(b0, b1)` to Bob, who learns `b_c`.
pub fn bb84_ot<R: RngCore + ?Sized>(b0: bool, b1: bool, choice: bool, params: &Bb84Params, rng: &mut R) -> Result<Bb84Session, QuantumError> {
    let n = params.positions;
    if n < 32 || !(params.alpha > 0.0 && params.alpha < 1.0) {
        return Err(QuantumError::Bb84Parameters { n, alpha: params.alpha });
    }
    let mut events = EventLog::new();
    let (alice_id, bob_id) = match &params.backend {
        CommitBackend::Ideal => (PlayerId(0), PlayerId(1)),
        CommitBackend::SecretSharing { alice, bob, .. } => (*alice, *bob),
    };
    let alice_bits: Vec<bool> = (0..n).map(|_| coin(rng)).collect();
    let alice_bases: Vec<bool> = (0..n).map(|_| coin(rng)).collect();
    events.msg_with(0, alice_id, bob_id, "qubits", || [pack_bits(&alice_bits), pack_bits(&alice_bases)].concat());

    let delayed = params.attack == Bb84Attack::DelayedMeasurement;
    let mut bob_bases = vec![false; n];
    let mut bob_results = vec![false; n];
    if !delayed {
        for i in 0..n {
            bob_bases[i] = coin(rng);
            bob_results[i] = transmit(alice_bits[i], alice_bases[i], bob_bases[i], rng)?;
        }
    } else if params.forcing {
        // Guesses stand in for measurements that have not happened.
        for i in 0..n {
            bob_bases[i] = coin(rng);
            bob_results[i] = coin(rng);
        }
    }

    let mut commitments = Vec::new();
    if params.forcing {
        if let CommitBackend::SecretSharing { adversary, bob, alice, rounds } = &params.backend {
            let config = CommitConfig::new(*bob, *alice, adversary.clone(), *rounds);
            let strategies = StrategyProfile::honest(adversary.n());
            for i in 0..n {
                let record = SecretValue::from_bits(&[bob_bases[i], bob_results[i]]);
                let session = commit::commit_partial(&record, &config, &strategies, rng)?;
                if session.status != CommitStatus::Committed {
                    return Err(QuantumError::Commit(CommitError::NotCommitted(session.status)));
                }
                commitments.push(session);
            }
            events.msg(1, bob_id, Endpoint::Broadcast, "commit", &[n as u8]);
        } else {
            events.msg_with(1, bob_id, alice_id, "commit", || [pack_bits(&bob_bases), pack_bits(&bob_results)].concat());
        }
    }

    // Test set: a uniform subset of the requested size.
    let mut order: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        order.swap(i, below(rng, i + 1));
    }
    let mut test_set: Vec<usize> = order[..params.test_size()].to_vec();
    test_set.sort_unstable();
    events.msg_with(2, alice_id, bob_id, "test-set", || pack_indices(&test_set));

    if delayed && !params.forcing {
        // Nothing was committed; Bob measures the test positions now, honestly.
        for &i in &test_set {
            bob_bases[i] = coin(rng);
            bob_results[i] = transmit(alice_bits[i], alice_bases[i], bob_bases[i], rng)?;
        }
    }

    let mut session = Bb84Session {
        positions: n,
        alice_bits,
        alice_bases,
        bob_bases,
        bob_results,
        commitments,
        test_set,
        index_sets: [Vec::new(), Vec::new()],
        masked: None,
        verdict: Bb84Verdict::Accept { output: false },
        extracted: None,
        events,
    };

    for &i in &session.test_set.clone() {
        let (basis, result) = match session.commitments.get_mut(i) {
            Some(cs) => {
                let opened = commit::unveil_per_strategy(cs, &StrategyProfile::honest(cs.n()))?;
                (opened.bit(0), opened.bit(1))
            }
            None => (session.bob_bases[i], session.bob_results[i]),
        };
        if basis == session.alice_bases[i] && result != session.alice_bits[i] {
            session.events.msg(3, bob_id, alice_id, "unveil", &pack_indices(&[i]));
            session.verdict = Bb84Verdict::AbortCheatDetected { position: i };
            session.events.verdict("abort-cheat-detected");
            return Ok(session);
        }
    }
    session.events.msg_with(3, bob_id, alice_id, "unveil", || pack_indices(&session.test_set));
    let bases = session.alice_bases.clone();
    session.events.msg_with(4, alice_id, bob_id, "bases", || pack_bits(&bases));

    if delayed {
        // Bob measures the stored qubits in the announced bases.
        for i in 0..n {
            if session.test_set.binary_search(&i).is_err() {
                session.bob_bases[i] = session.alice_bases[i];
                session.bob_results[i] = transmit(session.alice_bits[i], session.alice_bases[i], session.alice_bases[i], rng)?;
            }
        }
    }

    let mut good = Vec::new();
    let mut bad = Vec::new();
    for i in 0..n {
        if session.test_set.binary_search(&i).is_ok() {
            continue;
        }
        if session.alice_bases[i] == session.bob_bases[i] {
            good.push(i);
        } else {
            bad.push(i);
        }
    }
    if delayed {
        // Every remaining position is good for this Bob; split them evenly.
        let all: Vec<usize> = good.drain(..).chain(bad.drain(..)).collect();
        let half = all.len() / 2;
        good = all[..half].to_vec();
        bad = all[half..2 * half].to_vec();
    }
    let size = good.len().min(bad.len());
    if size < params.min_good {
        session.verdict = Bb84Verdict::AbortTooFewGood { good: good.len(), bad: bad.len() };
        session.events.verdict("abort-too-few-good");
        return Ok(session);
    }
    good.truncate(size);
    bad.truncate(size);
    session.index_sets = if choice { [bad, good] } else { [good, bad] };
    let sets = session.index_sets.clone();
    session.events.msg_with(5, bob_id, alice_id, "index-sets", || [pack_indices(&sets[0]), pack_indices(&sets[1])].concat());

    let e0 = b0 ^ parity(&session.alice_bits, &session.index_sets[0]);
    let e1 = b1 ^ parity(&session.alice_bits, &session.index_sets[1]);
    session.masked = Some((e0, e1));
    session.events.msg(6, alice_id, bob_id, "masked", &[e0 as u8, e1 as u8]);

    let e = if choice { e1 } else { e0 };
    let output = e ^ parity(&session.bob_results, &session.index_sets[choice as usize]);
    if delayed {
        let know = |set: &[usize]| set.iter().all(|&i| session.bob_bases[i] == session.alice_bases[i]);
        let r0 = know(&session.index_sets[0]).then(|| e0 ^ parity(&session.bob_results, &session.index_sets[0]));
        let r1 = know(&session.index_sets[1]).then(|| e1 ^ parity(&session.bob_results, &session.index_sets[1]));
        session.extracted = Some((r0, r1));
    }
    session.verdict = Bb84Verdict::Accept { output };
    session.events.verdict(&format!("accept {}", output as u8));
    Ok(session)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use crate::structures::threshold_structure;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() < tol
    }

    fn ket(qubits: usize, alice: usize, amps: &[f64]) -> QuantumState {
        QuantumState::from_real(qubits, alice, amps).unwrap()
    }

    fn proj(amps: &[f64]) -> DensityMatrix {
        partial_trace(&ket(1, 0, amps), Party::Bob)
    }

    #[test]
    fn partial_trace_examples() {
        let half = DMatrix::identity(2, 2) * c(0.5);
        for keep in [Party::Alice, Party::Bob] {
            let r = partial_trace(&phi_plus(), keep);
            assert!((r.entries() - &half).iter().all(|z| z.norm() < 1e-12));
            assert!(r.is_valid(1e-10));
        }
        let product = QuantumState::basis(2, 1, 0b01).unwrap();
        let r = partial_trace(&product, Party::Bob);
        assert!(close(r.entries()[(1, 1)].re, 1.0, 1e-12) && close(r.entries()[(0, 0)].re, 0.0, 1e-12));
    }

    #[test]
    fn reductions_of_random_states_are_valid() {
        let mut rng = seeded(5);
        for q in 1..=5 {
            for a in 0..=q {
                let amps: Vec<Complex64> = (0..1 << q).map(|_| Complex64::new(unit_interval(&mut rng) - 0.5, unit_interval(&mut rng) - 0.5)).collect();
                let norm = amps.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                let s = QuantumState::from_amplitudes(q, a, amps.iter().map(|z| z / norm).collect()).unwrap();
                assert!(partial_trace(&s, Party::Alice).is_valid(1e-10));
                assert!(partial_trace(&s, Party::Bob).is_valid(1e-10));
            }
        }
    }

    #[test]
    fn gates_preserve_norm() {
        let mut rng = seeded(6);
        let mut s = QuantumState::basis(4, 2, 3).unwrap();
        for step in 0..40 {
            match step % 3 {
                0 => s.apply(step % 4, &hadamard()).unwrap(),
                1 => s.cnot(step % 4, (step + 1) % 4).unwrap(),
                _ => s.apply((step + 2) % 4, &pauli_z()).unwrap(),
            }
            assert!(close(s.norm(), 1.0, 1e-12));
        }
        s.measure(1, &mut rng).unwrap();
        assert!(close(s.norm(), 1.0, 1e-12));
    }

    #[test]
    fn trace_distance_examples() {
        let zero = proj(&[1.0, 0.0]);
        let one = proj(&[0.0, 1.0]);
        let plus = proj(&[1.0, 1.0]);
        assert!(close(trace_distance(&zero, &zero).unwrap(), 0.0, 1e-12));
        assert!(close(trace_distance(&zero, &one).unwrap(), 1.0, 1e-12));
        assert!(close(trace_distance(&zero, &plus).unwrap(), (0.5f64).sqrt(), 1e-10));
    }

    #[test]
    fn schmidt_examples() {
        let s = schmidt_decompose(&phi_plus());
        assert_eq!(s.coefficients.len(), 2);
        assert!(s.coefficients.iter().all(|&l| close(l, std::f64::consts::FRAC_1_SQRT_2, 1e-12)));
        let product = ket(2, 1, &[0.6, 0.8, 0.0, 0.0]);
        assert_eq!(schmidt_decompose(&product).coefficients.len(), 1);
        let skew = ket(2, 1, &[0.8f64.sqrt(), 0.0, 0.0, 0.2f64.sqrt()]);
        let sd = schmidt_decompose(&skew);
        assert!(close(sd.coefficients[0], 0.8f64.sqrt(), 1e-12) && close(sd.coefficients[1], 0.2f64.sqrt(), 1e-12));
        assert!(close(sd.coefficients.iter().map(|l| l * l).sum(), 1.0, 1e-10));
        assert!(close(sd.recompose(&skew).fidelity(&skew).unwrap(), 1.0, 1e-8));
    }

    #[test]
    fn hjw_examples() {
        let u = hjw_unitary(&phi_plus(), &psi_plus()).unwrap();
        // X up to phase: the off-diagonal entries carry all the weight.
        let m = u.matrix();
        assert!(close(m[(0, 1)].norm(), 1.0, 1e-8) && close(m[(0, 0)].norm(), 0.0, 1e-8));
        let id = hjw_unitary(&phi_plus(), &phi_plus()).unwrap();
        assert!(close(id.matrix()[(0, 0)].norm(), 1.0, 1e-8) && close(id.matrix()[(0, 1)].norm(), 0.0, 1e-8));
        let u = hjw_unitary(&QuantumState::basis(2, 1, 0).unwrap(), &QuantumState::basis(2, 1, 2).unwrap()).unwrap();
        assert!(close(u.matrix()[(1, 0)].norm(), 1.0, 1e-8));
        let err = hjw_unitary(&QuantumState::basis(2, 1, 0).unwrap(), &QuantumState::basis(2, 1, 1).unwrap()).unwrap_err();
        assert!(matches!(err, QuantumError::NotSameReduction(d) if close(d, 1.0, 1e-10)));
    }

    #[test]
    fn hjw_round_trip_on_random_purifications() {
        // Same Bob reduction: apply a random Alice-side unitary to a random state.
        let mut rng = seeded(9);
        for _ in 0..10 {
            let amps: Vec<Complex64> = (0..16).map(|_| Complex64::new(unit_interval(&mut rng) - 0.5, unit_interval(&mut rng) - 0.5)).collect();
            let norm = amps.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            let psi = QuantumState::from_amplitudes(4, 2, amps.iter().map(|z| z / norm).collect()).unwrap();
            let mut phi = psi.clone();
            phi.apply(0, &hadamard()).unwrap();
            phi.cnot(1, 0).unwrap();
            phi.apply(1, &pauli_z()).unwrap();
            let u = hjw_unitary(&psi, &phi).unwrap();
            assert!(u.apply(&psi).unwrap().fidelity(&phi).unwrap() > 1.0 - 1e-8);
            let back = u.adjoint().apply(&u.apply(&psi).unwrap()).unwrap();
            assert!(back.amplitudes().iter().zip(psi.amplitudes()).all(|(a, b)| (a - b).norm() < 1e-8));
        }
    }

    #[test]
    fn dichotomy_holds_for_every_toy() {
        for toy in ToyProtocol::ALL {
            let r = mayers_attack_demo(toy).unwrap();
            assert_ne!(r.certified, Certificate::Inconclusive, "{toy:?}");
            let distinguishable = r.trace_distance >= REDUCTION_TOL;
            let flippable = r.flip_fidelity.is_some_and(|f| f > 1.0 - FLIP_TOL);
            assert!(distinguishable ^ flippable, "{toy:?}");
        }
        let m = mayers_attack_demo(ToyProtocol::MeasureThenFlip).unwrap();
        for (p0, p1) in &m.outcome_probabilities {
            assert!(close(*p0, *p1, 1e-12) && close(*p0, 0.5, 1e-12));
        }
    }

    #[test]
    fn honest_bb84_example() {
        let s = bb84_ot(true, false, true, &Bb84Params::default(), &mut seeded(21)).unwrap();
        assert_eq!(s.verdict, Bb84Verdict::Accept { output: false });
        assert_eq!(s.test_set.len(), 64);
        assert_eq!(s.index_sets[0].len(), s.index_sets[1].len());
        for set in &s.index_sets {
            assert!(set.iter().all(|i| s.test_set.binary_search(i).is_err()));
        }
        assert!(s.index_sets[0].iter().all(|i| !s.index_sets[1].contains(i)));
        assert_eq!(s.events.lines().last().unwrap(), "verdict accept 0");
    }

    #[test]
    fn unforced_attacker_learns_both() {
        let params = Bb84Params { attack: Bb84Attack::DelayedMeasurement, forcing: false, ..Bb84Params::default() };
        for seed in 0..20 {
            let s = bb84_ot(true, false, false, &params, &mut seeded(seed)).unwrap();
            assert!(s.recovered_both(true, false));
        }
    }

    #[test]
    fn forced_attacker_is_mostly_caught() {
        let params = Bb84Params { attack: Bb84Attack::DelayedMeasurement, ..Bb84Params::default() };
        let caught = (0..50).filter(|&seed| matches!(bb84_ot(false, true, false, &params, &mut seeded(seed)).unwrap().verdict, Bb84Verdict::AbortCheatDetected { .. })).count();
        assert!(caught >= 49);
    }

    #[test]
    fn secret_sharing_backend_runs() {
        let params = Bb84Params {
            positions: 32,
            alpha: 0.25,
            min_good: 4,
            backend: CommitBackend::SecretSharing { adversary: threshold_structure(3, 1).unwrap(), bob: PlayerId(1), alice: PlayerId(0), rounds: 2 },
            ..Bb84Params::default()
        };
        let s = bb84_ot(false, true, true, &params, &mut seeded(3)).unwrap();
        assert_eq!(s.commitments.len(), 32);
        assert_eq!(s.verdict, Bb84Verdict::Accept { output: true });
    }

    #[test]
    fn rejects_small_instances() {
        let params = Bb84Params { positions: 16, ..Bb84Params::default() };
        assert!(matches!(bb84_ot(false, false, false, &params, &mut seeded(0)), Err(QuantumError::Bb84Parameters { .. })));
    }
}
