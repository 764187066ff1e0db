//! Propagators, the gradient crusher and relaxation channels; advances a
//! density matrix through a pulse sequence.
//!
//! Rotations follow `exp(-i theta G)`. The rotating-frame Hamiltonian is
//! `2 pi (delta/2)(Iz - Sz) + 2 pi J Iz Sz` (transmitter midway between the
//! resonances, weak coupling). Pulses are instantaneous; free evolution and
//! relaxation happen only during delays.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pulselang::DelayExpr;
use crate::qcore::{
    c, coherence_order, embed, kron, max_abs, DensityMatrix, Matrix2c, Matrix4c, Spin, SpinSystem,
};

/// One step of a pulse program. Angles and phases are in degrees.
///
/// Constructors return the canonical form (non-negative transverse angles,
/// phases in `[0, 360)`), which is what the parser produces.
#[derive(Clone, Debug, PartialEq)]
pub enum PulseEvent {
    /// Rotation of both spins about an axis in the xy-plane.
    Hard {
        angle: f64,
        phase: f64,
    },
    /// Rotation of one spin about an axis in the xy-plane.
    Selective {
        spin: Spin,
        angle: f64,
        phase: f64,
    },
    /// Frame rotation of one spin about z. Negative angles mean the -z axis.
    ZRotation {
        spin: Spin,
        angle: f64,
    },
    /// `exp(-i theta 2 Iz Sz)`.
    Coupling {
        angle: f64,
    },
    Delay(DelayExpr),
    /// Crushes every coherence of nonzero order.
    Gradient,
}

fn normalize_phase(phase: f64) -> f64 {
    let p = phase.rem_euclid(360.0);
    if p >= 360.0 {
        0.0
    } else {
        p
    }
}

fn canonical_transverse(angle: f64, phase: f64) -> (f64, f64) {
    if angle < 0.0 {
        (-angle, normalize_phase(phase + 180.0))
    } else {
        (angle, normalize_phase(phase))
    }
}

impl PulseEvent {
    pub fn hard(angle: f64, phase: f64) -> Self {
        let (angle, phase) = canonical_transverse(angle, phase);
        PulseEvent::Hard { angle, phase }
    }

    pub fn selective(spin: Spin, angle: f64, phase: f64) -> Self {
        let (angle, phase) = canonical_transverse(angle, phase);
        PulseEvent::Selective { spin, angle, phase }
    }

    pub fn z_rotation(spin: Spin, angle: f64) -> Self {
        PulseEvent::ZRotation { spin, angle }
    }

    pub fn coupling(angle: f64) -> Self {
        PulseEvent::Coupling { angle }
    }

    pub fn delay(expr: DelayExpr) -> Self {
        PulseEvent::Delay(expr)
    }

    pub fn is_z_rotation(&self) -> bool {
        matches!(self, PulseEvent::ZRotation { .. })
    }
}

/// Ordered pulse program, applied left to right.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PulseSequence {
    events: Vec<PulseEvent>,
}

impl PulseSequence {
    pub fn new(events: Vec<PulseEvent>) -> Self {
        PulseSequence { events }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn events(&self) -> &[PulseEvent] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn push(&mut self, event: PulseEvent) {
        self.events.push(event);
    }

    /// `self` followed by `other`.
    pub fn then(mut self, other: &PulseSequence) -> Self {
        self.events.extend(other.events.iter().cloned());
        self
    }

    pub fn contains_gradient(&self) -> bool {
        self.events
            .iter()
            .any(|e| matches!(e, PulseEvent::Gradient))
    }

    /// Total delay time against `system`.
    pub fn duration(&self, system: &SpinSystem) -> Result<f64> {
        self.events
            .iter()
            .map(|e| match e {
                PulseEvent::Delay(d) => d.resolve(system),
                _ => Ok(0.0),
            })
            .sum()
    }
}

impl FromIterator<PulseEvent> for PulseSequence {
    fn from_iter<T: IntoIterator<Item = PulseEvent>>(iter: T) -> Self {
        PulseSequence::new(iter.into_iter().collect())
    }
}

/// Relaxation parameters for the operator-sum decoherence model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub enabled: bool,
    pub t1: f64,
    pub t2: f64,
    pub equilibrium_excited_population: f64,
    pub substeps_per_delay: u32,
}

impl NoiseModel {
    pub fn from_system(system: &SpinSystem) -> Self {
        NoiseModel {
            enabled: true,
            t1: system.t1,
            t2: system.t2,
            equilibrium_excited_population: 0.5,
            substeps_per_delay: 1,
        }
    }

    pub fn disabled(system: &SpinSystem) -> Self {
        NoiseModel {
            enabled: false,
            ..Self::from_system(system)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t1 > 0.0 && self.t1.is_finite()) {
            return Err(Error::invalid("noise.t1", "must be positive"));
        }
        if !(self.t2 > 0.0 && self.t2 <= 2.0 * self.t1) {
            return Err(Error::invalid("noise.t2", "must satisfy 0 < t2 <= 2 t1"));
        }
        if !(0.0..=1.0).contains(&self.equilibrium_excited_population) {
            return Err(Error::invalid(
                "noise.equilibrium_excited_population",
                "must lie in [0, 1]",
            ));
        }
        if self.substeps_per_delay == 0 {
            return Err(Error::invalid(
                "noise.substeps_per_delay",
                "must be positive",
            ));
        }
        Ok(())
    }
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self::from_system(&SpinSystem::default())
    }
}

/// Eigenvalues of the rotating-frame Hamiltonian in rad/s, one per basis state.
pub fn hamiltonian_energies(system: &SpinSystem) -> [f64; 4] {
    let m = |bit: usize| if bit == 0 { 0.5 } else { -0.5 };
    std::array::from_fn(|k| {
        let (mi, ms) = (m(k >> 1), m(k & 1));
        TAU * (0.5 * system.delta * (mi - ms) + system.j * mi * ms)
    })
}

fn diagonal(phases: [f64; 4]) -> Matrix4c {
    let mut u = Matrix4c::zeros();
    for (k, p) in phases.into_iter().enumerate() {
        u[(k, k)] = Complex64::from_polar(1.0, p);
    }
    u
}

/// `exp(-i H t)` for the free Hamiltonian.
pub fn free_evolution(duration: f64, system: &SpinSystem) -> Result<Matrix4c> {
    if !(duration >= 0.0 && duration.is_finite()) {
        return Err(Error::invalid(
            "duration",
            format!("{duration} is not a valid delay"),
        ));
    }
    Ok(diagonal(
        hamiltonian_energies(system).map(|e| -e * duration),
    ))
}

/// `exp(-i theta (cos(phi) sigma_x + sin(phi) sigma_y) / 2)`.
fn transverse_rotation(angle_deg: f64, phase_deg: f64) -> Matrix2c {
    let theta = angle_deg.to_radians();
    let phi = phase_deg.to_radians();
    let (s, co) = (theta / 2.0).sin_cos();
    let off = Complex64::new(0.0, -s);
    Matrix2c::new(
        c(co),
        off * Complex64::from_polar(1.0, -phi),
        off * Complex64::from_polar(1.0, phi),
        c(co),
    )
}

fn z_rotation_matrix(spin: Spin, angle_deg: f64) -> Matrix4c {
    let half = angle_deg.to_radians() / 2.0;
    let single = Matrix2c::new(
        Complex64::from_polar(1.0, -half),
        c(0.0),
        c(0.0),
        Complex64::from_polar(1.0, half),
    );
    embed(spin, &single)
}

/// Unitary of a single event. Gradients have none.
pub fn event_propagator(event: &PulseEvent, system: &SpinSystem) -> Result<Matrix4c> {
    Ok(match event {
        PulseEvent::Hard { angle, phase } => {
            let r = transverse_rotation(*angle, *phase);
            kron(&r, &r)
        }
        PulseEvent::Selective { spin, angle, phase } => {
            embed(*spin, &transverse_rotation(*angle, *phase))
        }
        PulseEvent::ZRotation { spin, angle } => z_rotation_matrix(*spin, *angle),
        PulseEvent::Coupling { angle } => {
            // 2 Iz Sz = diag(1, -1, -1, 1) / 2
            let h = angle.to_radians() / 2.0;
            diagonal([-h, h, h, -h])
        }
        PulseEvent::Delay(d) => free_evolution(d.resolve(system)?, system)?,
        PulseEvent::Gradient => return Err(Error::GradientInPropagator),
    })
}

/// Product of event propagators; the first event acts first.
pub fn sequence_propagator(seq: &PulseSequence, system: &SpinSystem) -> Result<Matrix4c> {
    seq.events()
        .iter()
        .try_fold(Matrix4c::identity(), |acc, e| {
            Ok(event_propagator(e, system)? * acc)
        })
}

/// Removes every coherence with nonzero order; populations and zero-quantum
/// coherences survive.
pub fn apply_gradient(rho: &DensityMatrix) -> DensityMatrix {
    let m = rho.matrix();
    let crushed = Matrix4c::from_fn(|r, col| {
        if coherence_order(r, col) == 0 {
            m[(r, col)]
        } else {
            c(0.0)
        }
    });
    DensityMatrix::from_hermitized(crushed).expect("crushing keeps a valid state")
}

/// Kraus representation of a two-spin channel.
#[derive(Clone, Debug)]
pub struct KrausChannel {
    ops: Vec<Matrix4c>,
}

impl KrausChannel {
    pub fn identity() -> Self {
        KrausChannel {
            ops: vec![Matrix4c::identity()],
        }
    }

    pub fn operators(&self) -> &[Matrix4c] {
        &self.ops
    }

    /// `max |sum K^dagger K - 1|`.
    pub fn completeness_error(&self) -> f64 {
        let sum = self
            .ops
            .iter()
            .fold(Matrix4c::zeros(), |acc, k| acc + k.adjoint() * k);
        max_abs(&(sum - Matrix4c::identity()))
    }

    pub fn apply_matrix(&self, m: &Matrix4c) -> Matrix4c {
        self.ops
            .iter()
            .fold(Matrix4c::zeros(), |acc, k| acc + k * m * k.adjoint())
    }

    pub fn apply(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        DensityMatrix::from_hermitized(self.apply_matrix(rho.matrix()))
    }
}

/// Generalized amplitude damping followed by pure phase damping, one spin.
fn single_spin_relaxation(duration: f64, noise: &NoiseModel) -> Vec<Matrix2c> {
    let gamma = 1.0 - (-duration / noise.t1).exp();
    let excited = noise.equilibrium_excited_population;
    let ground = 1.0 - excited;
    let (sg, se) = (ground.sqrt(), excited.sqrt());
    let keep = (1.0 - gamma).sqrt();
    let jump = gamma.sqrt();
    let z = c(0.0);
    let amplitude = [
        Matrix2c::new(c(sg), z, z, c(sg * keep)),
        Matrix2c::new(z, c(sg * jump), z, z),
        Matrix2c::new(c(se * keep), z, z, c(se)),
        Matrix2c::new(z, z, c(se * jump), z),
    ];

    let dephasing_rate = 1.0 / noise.t2 - 1.0 / (2.0 * noise.t1);
    let lambda = 1.0 - (-2.0 * duration * dephasing_rate).exp();
    let phase = [
        Matrix2c::new(c(1.0), z, z, c((1.0 - lambda).sqrt())),
        Matrix2c::new(z, z, z, c(lambda.sqrt())),
    ];

    let mut ops = Vec::with_capacity(8);
    for a in &amplitude {
        for p in &phase {
            let k = p * a;
            if k.iter().any(|x| x.norm() > 0.0) {
                ops.push(k);
            }
        }
    }
    ops
}

/// Independent relaxation of both spins over `duration` seconds.
pub fn relaxation_channel(duration: f64, noise: &NoiseModel) -> Result<KrausChannel> {
    if !(duration >= 0.0 && duration.is_finite()) {
        return Err(Error::invalid(
            "duration",
            format!("{duration} is not a valid delay"),
        ));
    }
    if noise.t2 > 2.0 * noise.t1 {
        return Err(Error::invalid(
            "noise.t2",
            "t2 > 2 t1 admits no damping decomposition",
        ));
    }
    noise.validate()?;
    if duration == 0.0 || !noise.enabled {
        return Ok(KrausChannel::identity());
    }
    let single = single_spin_relaxation(duration, noise);
    let mut ops = Vec::with_capacity(single.len() * single.len());
    for a in &single {
        for b in &single {
            ops.push(kron(a, b));
        }
    }
    Ok(KrausChannel { ops })
}

/// Runs `seq` on `rho`. Each delay is split into `substeps_per_delay` slices
/// of free evolution followed by relaxation.
pub fn apply_sequence(
    rho: &DensityMatrix,
    seq: &PulseSequence,
    system: &SpinSystem,
    noise: &NoiseModel,
) -> Result<DensityMatrix> {
    let mut state = rho.clone();
    for event in seq.events() {
        state = match event {
            PulseEvent::Gradient => apply_gradient(&state),
            PulseEvent::Delay(d) => {
                let total = d.resolve(system)?;
                if noise.enabled && total > 0.0 {
                    let slices = noise.substeps_per_delay.max(1);
                    let dt = total / f64::from(slices);
                    let u = free_evolution(dt, system)?;
                    let channel = relaxation_channel(dt, noise)?;
                    for _ in 0..slices {
                        state = channel.apply(&state.conjugate(&u))?;
                    }
                    state
                } else {
                    state.conjugate(&free_evolution(total, system)?)
                }
            }
            pulse => state.conjugate(&event_propagator(pulse, system)?),
        };
    }
    DensityMatrix::new(state.into_matrix())
}

/// Angle in degrees that a pure z-rotation of `spin` acquires from free
/// precession over `duration` (coupling ignored).
pub fn chemical_shift_phase(spin: Spin, duration: f64, system: &SpinSystem) -> f64 {
    let sign = match spin {
        Spin::I => 1.0,
        Spin::S => -1.0,
    };
    (sign * PI * system.delta * duration).to_degrees()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pulselang::parse;
    use crate::qcore::{unitary_distance, DistanceMode, StateVector};

    fn sys() -> SpinSystem {
        SpinSystem::default()
    }

    #[test]
    fn zero_delay_is_identity() {
        let u = free_evolution(0.0, &sys()).unwrap();
        assert!(max_abs(&(u - Matrix4c::identity())) < 1e-15);
        assert!(free_evolution(-1.0, &sys()).is_err());
    }

    #[test]
    fn hard_pi_pulse_flips_both_spins() {
        let u = event_propagator(&PulseEvent::hard(180.0, 0.0), &sys()).unwrap();
        let out = u * StateVector::basis(0, 0).amplitudes();
        assert!((out[3].norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn full_coupling_turn_is_a_global_phase() {
        let u = event_propagator(&PulseEvent::coupling(360.0), &sys()).unwrap();
        let d = unitary_distance(&u, &Matrix4c::identity(), DistanceMode::GlobalPhase).unwrap();
        assert!(d < 1e-15);
    }

    #[test]
    fn gradient_has_no_propagator() {
        assert!(matches!(
            event_propagator(&PulseEvent::Gradient, &sys()),
            Err(Error::GradientInPropagator)
        ));
        let seq = parse("90x G").unwrap();
        assert!(sequence_propagator(&seq, &sys()).is_err());
    }

    #[test]
    fn canonical_constructors_flip_negative_angles() {
        assert_eq!(
            PulseEvent::hard(-90.0, 0.0),
            PulseEvent::Hard {
                angle: 90.0,
                phase: 180.0
            }
        );
        assert_eq!(
            PulseEvent::selective(Spin::S, -90.0, 270.0),
            PulseEvent::Selective {
                spin: Spin::S,
                angle: 90.0,
                phase: 90.0
            }
        );
        assert_eq!(PulseEvent::hard(90.0, -90.0), PulseEvent::hard(90.0, 270.0));
    }

    #[test]
    fn gradient_crushes_double_quantum_terms() {
        let h = 0.5;
        let mut m = Matrix4c::zeros();
        for (r, col) in [(0, 0), (0, 3), (3, 0), (3, 3)] {
            m[(r, col)] = c(h);
        }
        let out = apply_gradient(&DensityMatrix::new(m).unwrap());
        let expected = Matrix4c::from_diagonal(&nalgebra::Vector4::new(c(h), c(0.0), c(0.0), c(h)));
        assert!(max_abs(&(out.matrix() - expected)) < 1e-15);

        let singlet = crate::qcore::werner_state(1.0).unwrap();
        assert_eq!(apply_gradient(&singlet), singlet);
    }

    #[test]
    fn zero_duration_channel_is_identity() {
        let ch = relaxation_channel(0.0, &NoiseModel::default()).unwrap();
        assert_eq!(ch.operators().len(), 1);
        assert_eq!(ch.operators()[0], Matrix4c::identity());
    }

    #[test]
    fn unphysical_t2_is_rejected() {
        let noise = NoiseModel {
            t2: 3.5,
            ..NoiseModel::default()
        };
        assert!(relaxation_channel(0.1, &noise).is_err());
    }

    #[test]
    fn empty_sequence_leaves_state_unchanged() {
        let rho = crate::qcore::werner_state(0.92).unwrap();
        let out = apply_sequence(
            &rho,
            &PulseSequence::empty(),
            &sys(),
            &NoiseModel::default(),
        )
        .unwrap();
        assert_eq!(out, rho);
    }

    #[test]
    fn substeps_converge_to_the_same_populations() {
        // free evolution is diagonal and commutes with the populations' relaxation
        let rho = DensityMatrix::pure(&StateVector::basis(0, 0));
        let seq = parse("[0.3s]").unwrap();
        let one = apply_sequence(&rho, &seq, &sys(), &NoiseModel::default()).unwrap();
        let many = apply_sequence(
            &rho,
            &seq,
            &sys(),
            &NoiseModel {
                substeps_per_delay: 7,
                ..NoiseModel::default()
            },
        )
        .unwrap();
        assert!(max_abs(&(one.matrix() - many.matrix())) < 1e-12);
    }

    #[test]
    fn chemical_shift_phase_over_two_tau1_is_ninety_degrees() {
        let s = sys();
        assert!((chemical_shift_phase(Spin::I, 2.0 * s.tau1(), &s) - 90.0).abs() < 1e-12);
        assert!((chemical_shift_phase(Spin::S, 2.0 * s.tau1(), &s) + 90.0).abs() < 1e-12);
    }
}
