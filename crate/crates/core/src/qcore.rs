//! Two-spin linear algebra: basis conventions, canonical states and the
//! diagnostics used throughout the simulator.
//!
//! The computational basis is ordered `|00>, |01>, |10>, |11>` with the first
//! label belonging to spin I and the second to spin S. `|0>` is the spin-up
//! (`m = +1/2`) state.

use std::fmt;
use std::str::FromStr;

use nalgebra::{Matrix2, Matrix4, Vector4};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Matrix4c = Matrix4<Complex64>;
pub type Matrix2c = Matrix2<Complex64>;
pub type Vector4c = Vector4<Complex64>;

pub const HERMITIAN_TOL: f64 = 1e-12;
pub const TRACE_TOL: f64 = 1e-12;
pub const PSD_TOL: f64 = 1e-10;
pub const NORM_TOL: f64 = 1e-12;
pub const UNITARY_TOL: f64 = 1e-10;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

pub(crate) fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// One of the two spins (qubits).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Spin {
    I,
    S,
}

impl Spin {
    pub const BOTH: [Spin; 2] = [Spin::I, Spin::S];
}

impl fmt::Display for Spin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Spin::I => f.write_str("I"),
            Spin::S => f.write_str("S"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
    Z,
}

/// Single-spin angular momentum operator (Pauli matrix / 2).
pub fn half_pauli(axis: Axis) -> Matrix2c {
    let h = 0.5;
    match axis {
        Axis::X => Matrix2c::new(ZERO, c(h), c(h), ZERO),
        Axis::Y => Matrix2c::new(ZERO, Complex64::new(0.0, -h), Complex64::new(0.0, h), ZERO),
        Axis::Z => Matrix2c::new(c(h), ZERO, ZERO, c(-h)),
    }
}

pub fn kron(a: &Matrix2c, b: &Matrix2c) -> Matrix4c {
    Matrix4c::from_fn(|r, col| a[(r / 2, col / 2)] * b[(r % 2, col % 2)])
}

/// Lifts a single-spin operator into the two-spin space.
pub fn embed(spin: Spin, op: &Matrix2c) -> Matrix4c {
    let id = Matrix2c::identity();
    match spin {
        Spin::I => kron(op, &id),
        Spin::S => kron(&id, op),
    }
}

/// `I_axis` or `S_axis` on the two-spin space.
pub fn spin_op(spin: Spin, axis: Axis) -> Matrix4c {
    embed(spin, &half_pauli(axis))
}

/// Index of `|ab>` in the computational basis.
pub fn basis_index(a: u8, b: u8) -> usize {
    2 * usize::from(a & 1) + usize::from(b & 1)
}

/// Total z angular momentum `m_F` of a basis state.
pub fn total_mz(index: usize) -> i8 {
    let m = |bit: usize| if bit == 0 { 1 } else { -1 };
    // units of 1/2, halved at the end
    ((m(index >> 1) + m(index & 1)) / 2) as i8
}

pub fn max_abs(m: &Matrix4c) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn unitarity_error(u: &Matrix4c) -> f64 {
    max_abs(&(u.adjoint() * u - Matrix4c::identity()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BellState {
    PhiPlus,
    PhiMinus,
    PsiPlus,
    PsiMinus,
}

impl FromStr for BellState {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "phi+" | "φ+" => Ok(BellState::PhiPlus),
            "phi-" | "φ-" | "φ−" => Ok(BellState::PhiMinus),
            "psi+" | "ψ+" => Ok(BellState::PsiPlus),
            "psi-" | "ψ-" | "ψ−" => Ok(BellState::PsiMinus),
            _ => Err(Error::UnknownLabel {
                kind: "Bell state",
                label: s.to_string(),
            }),
        }
    }
}

/// A normalized pure state of the two spins.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector(Vector4c);

impl StateVector {
    pub fn new(amplitudes: Vector4c) -> Result<Self> {
        let norm = amplitudes.norm();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::invalid(
                "amplitudes",
                format!("norm {norm} is not 1"),
            ));
        }
        Ok(StateVector(amplitudes))
    }

    /// Normalizes the given amplitudes. Fails on the zero vector.
    pub fn normalized(amplitudes: Vector4c) -> Result<Self> {
        let norm = amplitudes.norm();
        if norm < 1e-300 {
            return Err(Error::invalid("amplitudes", "zero vector"));
        }
        Ok(StateVector(amplitudes / c(norm)))
    }

    /// Computational basis state `|ab>`.
    pub fn basis(a: u8, b: u8) -> Self {
        let mut v = Vector4c::zeros();
        v[basis_index(a, b)] = ONE;
        StateVector(v)
    }

    pub fn amplitudes(&self) -> &Vector4c {
        &self.0
    }

    pub fn inner(&self, other: &StateVector) -> Complex64 {
        self.0.dotc(&other.0)
    }

    pub fn projector(&self) -> Matrix4c {
        self.0 * self.0.adjoint()
    }
}

pub fn bell_state(label: BellState) -> StateVector {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let amps = match label {
        BellState::PhiPlus => [h, 0.0, 0.0, h],
        BellState::PhiMinus => [h, 0.0, 0.0, -h],
        BellState::PsiPlus => [0.0, h, h, 0.0],
        BellState::PsiMinus => [0.0, h, -h, 0.0],
    };
    StateVector(Vector4c::from_iterator(amps.into_iter().map(c)))
}

pub fn singlet() -> StateVector {
    bell_state(BellState::PsiMinus)
}

/// Hermitian, unit-trace, positive semidefinite 4x4 operator.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix(Matrix4c);

impl DensityMatrix {
    /// Validates the density-matrix invariants and returns the matrix.
    pub fn new(m: Matrix4c) -> Result<Self> {
        let herm = max_abs(&(m - m.adjoint()));
        if herm > HERMITIAN_TOL {
            return Err(Error::InvariantViolation(format!(
                "not Hermitian (deviation {herm:e})"
            )));
        }
        let trace = m.trace();
        if (trace - ONE).norm() > TRACE_TOL {
            return Err(Error::InvariantViolation(format!("trace {trace} is not 1")));
        }
        let min_eig = min_hermitian_eigenvalue(&m);
        if min_eig < -PSD_TOL {
            return Err(Error::InvariantViolation(format!(
                "negative eigenvalue {min_eig:e}"
            )));
        }
        Ok(DensityMatrix(m))
    }

    /// Hermitizes `m` before validation; used after channel application.
    pub fn from_hermitized(m: Matrix4c) -> Result<Self> {
        Self::new(hermitize(&m))
    }

    pub fn maximally_mixed() -> Self {
        DensityMatrix(Matrix4c::identity() * c(0.25))
    }

    pub fn pure(psi: &StateVector) -> Self {
        DensityMatrix(psi.projector())
    }

    pub fn matrix(&self) -> &Matrix4c {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix4c {
        self.0
    }

    pub fn purity(&self) -> f64 {
        (self.0 * self.0).trace().re
    }

    pub fn population(&self, a: u8, b: u8) -> f64 {
        let i = basis_index(a, b);
        self.0[(i, i)].re
    }

    pub fn expectation(&self, op: &Matrix4c) -> Complex64 {
        (self.0 * op).trace()
    }

    pub fn eigenvalues(&self) -> [f64; 4] {
        let ev = self.0.symmetric_eigenvalues();
        let mut out = [ev[0], ev[1], ev[2], ev[3]];
        out.sort_by(f64::total_cmp);
        out
    }

    /// Eigenvector of the largest eigenvalue.
    pub fn dominant_state(&self) -> StateVector {
        let eig = self.0.symmetric_eigen();
        let (k, _) = eig
            .eigenvalues
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .expect("four eigenvalues");
        let v: Vector4c = eig.eigenvectors.column(k).into_owned();
        StateVector::normalized(v).expect("eigenvectors are normalized")
    }

    /// `U rho U^dagger`.
    pub fn conjugate(&self, u: &Matrix4c) -> Self {
        DensityMatrix(hermitize(&(u * self.0 * u.adjoint())))
    }
}

pub fn hermitize(m: &Matrix4c) -> Matrix4c {
    (m + m.adjoint()) * c(0.5)
}

pub fn min_hermitian_eigenvalue(m: &Matrix4c) -> f64 {
    hermitize(m)
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// `(1 - eps) 1/4 + eps |psi-><psi-|`.
pub fn werner_state(epsilon: f64) -> Result<DensityMatrix> {
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::invalid(
            "epsilon",
            format!("{epsilon} is outside [0, 1]"),
        ));
    }
    Ok(DensityMatrix(werner_matrix(epsilon)))
}

fn werner_matrix(epsilon: f64) -> Matrix4c {
    Matrix4c::identity() * c((1.0 - epsilon) / 4.0) + singlet().projector() * c(epsilon)
}

/// `<psi| rho |psi>`.
pub fn fidelity(rho: &DensityMatrix, psi: &StateVector) -> f64 {
    let v = psi.amplitudes();
    (v.adjoint() * rho.matrix() * v)[(0, 0)].re
}

/// Werner polarization recovered from the singlet fraction.
pub fn polarization_estimate(rho: &DensityMatrix) -> f64 {
    polarization_along(rho, &singlet())
}

/// Same inversion with an arbitrary pure reference in place of the singlet:
/// the weight of `target` in an equivalent `(1 - e) 1/4 + e |target><target|`.
pub fn polarization_along(rho: &DensityMatrix, target: &StateVector) -> f64 {
    (4.0 * fidelity(rho, target) - 1.0) / 3.0
}

/// The Werner state with the same singlet fraction as `rho` (the result of
/// twirling `rho` over `U x U`).
pub fn werner_twirl(rho: &DensityMatrix) -> DensityMatrix {
    DensityMatrix(werner_matrix(polarization_estimate(rho)))
}

/// Partial transpose over spin S.
pub fn partial_transpose(m: &Matrix4c) -> Matrix4c {
    Matrix4c::from_fn(|r, col| {
        let (a, b) = (r / 2, r % 2);
        let (a2, b2) = (col / 2, col % 2);
        m[(2 * a + b2, 2 * a2 + b)]
    })
}

/// Smallest eigenvalue of the partial transpose; negative certifies
/// entanglement by the PPT criterion.
pub fn partial_transpose_min_eig(rho: &DensityMatrix) -> f64 {
    min_hermitian_eigenvalue(&partial_transpose(rho.matrix()))
}

/// Density-matrix entries grouped by coherence order `p = m_F(row) - m_F(col)`.
#[derive(Clone, Debug, PartialEq)]
pub struct CoherenceDecomposition {
    blocks: [Matrix4c; 5],
}

impl CoherenceDecomposition {
    pub const ORDERS: [i8; 5] = [-2, -1, 0, 1, 2];

    pub fn block(&self, order: i8) -> &Matrix4c {
        &self.blocks[(order + 2) as usize]
    }

    pub fn iter(&self) -> impl Iterator<Item = (i8, &Matrix4c)> {
        Self::ORDERS.iter().copied().zip(self.blocks.iter())
    }

    pub fn reconstruct(&self) -> Matrix4c {
        self.blocks.iter().fold(Matrix4c::zeros(), |acc, b| acc + b)
    }
}

pub fn coherence_order(row: usize, col: usize) -> i8 {
    total_mz(row) - total_mz(col)
}

pub fn coherence_orders(rho: &DensityMatrix) -> CoherenceDecomposition {
    coherence_decompose(rho.matrix())
}

pub(crate) fn coherence_decompose(m: &Matrix4c) -> CoherenceDecomposition {
    let mut blocks = [Matrix4c::zeros(); 5];
    for r in 0..4 {
        for col in 0..4 {
            let p = coherence_order(r, col);
            blocks[(p + 2) as usize][(r, col)] = m[(r, col)];
        }
    }
    CoherenceDecomposition { blocks }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DistanceMode {
    /// Equality up to a global phase.
    GlobalPhase,
    /// Equality up to diagonal phase matrices on either side.
    DiagonalPhases,
    /// Agreement of all basis transition probabilities.
    Population,
}

impl FromStr for DistanceMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "global-phase" => Ok(DistanceMode::GlobalPhase),
            "diagonal-phases" => Ok(DistanceMode::DiagonalPhases),
            "population" => Ok(DistanceMode::Population),
            _ => Err(Error::UnknownLabel {
                kind: "distance mode",
                label: s.to_string(),
            }),
        }
    }
}

pub fn unitary_distance(u: &Matrix4c, v: &Matrix4c, mode: DistanceMode) -> Result<f64> {
    for m in [u, v] {
        let deviation = unitarity_error(m);
        if deviation > UNITARY_TOL {
            return Err(Error::NotUnitary { deviation });
        }
    }
    Ok(match mode {
        DistanceMode::GlobalPhase => global_phase_distance(u, v),
        DistanceMode::DiagonalPhases => diagonal_phase_distance(u, v),
        DistanceMode::Population => (0..16)
            .map(|k| (u[(k / 4, k % 4)].norm_sqr() - v[(k / 4, k % 4)].norm_sqr()).abs())
            .fold(0.0, f64::max),
    })
}

fn global_phase_distance(u: &Matrix4c, v: &Matrix4c) -> f64 {
    (1.0 - (u.adjoint() * v).trace().norm() / 4.0).max(0.0)
}

const PHASE_RESTARTS: usize = 10;
const PHASE_SEED: u64 = 0x005e_ed0f_d1a6;
const PHASE_CONVERGENCE: f64 = 1e-10;
const MAX_SWEEPS: usize = 10_000;

/// Minimizes `1 - |Tr(u^dagger D1 v D2)| / 4` over diagonal unitaries by
/// exact coordinate updates of the eight phase angles.
fn diagonal_phase_distance(u: &Matrix4c, v: &Matrix4c) -> f64 {
    // overlap(alpha, beta) = sum_ij w_ij exp(i(alpha_i + beta_j))
    let w = Matrix4c::from_fn(|i, j| u[(i, j)].conj() * v[(i, j)]);
    let overlap = |alpha: &[f64; 4], beta: &[f64; 4]| -> Complex64 {
        let mut t = ZERO;
        for i in 0..4 {
            for j in 0..4 {
                t += w[(i, j)] * Complex64::from_polar(1.0, alpha[i] + beta[j]);
            }
        }
        t
    };

    let mut rng = ChaCha8Rng::seed_from_u64(PHASE_SEED);
    let mut best = global_phase_distance(u, v);
    for restart in 0..PHASE_RESTARTS {
        let mut alpha = [0.0; 4];
        let mut beta = [0.0; 4];
        if restart > 0 {
            for a in alpha.iter_mut().chain(beta.iter_mut()) {
                *a = rng.random_range(0.0..std::f64::consts::TAU);
            }
        }
        let mut value = overlap(&alpha, &beta).norm();
        for _ in 0..MAX_SWEEPS {
            for i in 0..4 {
                let row: Complex64 = (0..4)
                    .map(|j| w[(i, j)] * Complex64::from_polar(1.0, beta[j]))
                    .sum();
                let rest = overlap(&alpha, &beta) - row * Complex64::from_polar(1.0, alpha[i]);
                if row.norm() > 1e-15 {
                    alpha[i] = rest.arg() - row.arg();
                }
            }
            for j in 0..4 {
                let col: Complex64 = (0..4)
                    .map(|i| w[(i, j)] * Complex64::from_polar(1.0, alpha[i]))
                    .sum();
                let rest = overlap(&alpha, &beta) - col * Complex64::from_polar(1.0, beta[j]);
                if col.norm() > 1e-15 {
                    beta[j] = rest.arg() - col.arg();
                }
            }
            let next = overlap(&alpha, &beta).norm();
            let gain = next - value;
            value = next;
            if gain < PHASE_CONVERGENCE {
                break;
            }
        }
        best = best.min((1.0 - value / 4.0).max(0.0));
    }
    best
}

/// Spin system parameters of the hydride pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpinSystem {
    /// Frequency separation of the two resonances (Hz).
    pub delta: f64,
    /// Scalar coupling (Hz).
    pub j: f64,
    /// Longitudinal relaxation time (s).
    pub t1: f64,
    /// Transverse relaxation time (s).
    pub t2: f64,
    /// Singlet polarization of the initial Werner state.
    pub epsilon: f64,
    /// Spectrometer proton frequency (MHz).
    pub ref_freq: f64,
    /// Chemical shift of spin I (ppm).
    pub shift_i: f64,
    /// Chemical shift of spin S (ppm).
    pub shift_s: f64,
}

impl Default for SpinSystem {
    fn default() -> Self {
        SpinSystem {
            delta: 492.0,
            j: 4.6,
            t1: 1.7,
            t2: 0.58,
            epsilon: 0.92,
            ref_freq: 400.0,
            shift_i: -7.55,
            shift_s: -6.32,
        }
    }
}

impl SpinSystem {
    pub fn validate(&self) -> Result<()> {
        let finite = [
            ("delta", self.delta),
            ("j", self.j),
            ("t1", self.t1),
            ("t2", self.t2),
            ("epsilon", self.epsilon),
            ("ref_freq", self.ref_freq),
            ("shift_i", self.shift_i),
            ("shift_s", self.shift_s),
        ];
        for (name, value) in finite {
            if !value.is_finite() {
                return Err(Error::invalid(name, "must be finite"));
            }
        }
        if self.delta <= 0.0 {
            return Err(Error::invalid("delta", "must be positive"));
        }
        if self.j < 0.0 {
            return Err(Error::invalid("j", "must be non-negative"));
        }
        if self.t1 <= 0.0 {
            return Err(Error::invalid("t1", "must be positive"));
        }
        if self.t2 <= 0.0 || self.t2 > 2.0 * self.t1 {
            return Err(Error::invalid("t2", "must satisfy 0 < t2 <= 2 t1"));
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(Error::invalid("epsilon", "must lie in [0, 1]"));
        }
        Ok(())
    }

    /// `1 / (4 delta)`.
    pub fn tau1(&self) -> f64 {
        1.0 / (4.0 * self.delta)
    }

    /// `1 / (4 J)`.
    pub fn tau2(&self) -> f64 {
        1.0 / (4.0 * self.j)
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Self {
        SpinSystem {
            epsilon,
            ..self.clone()
        }
    }

    pub fn initial_state(&self) -> Result<DensityMatrix> {
        werner_state(self.epsilon)
    }
}
