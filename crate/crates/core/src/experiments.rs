//! End-to-end workflows: input preparation from the Werner singlet, the two
//! classical evaluations, the one-query Deutsch run, the truth table, scans
//! and the para-hydrogen fraction.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::acquisition::{
    acquire, calibrate, multiplet_readings, transform, AcquisitionParams, Bit, Calibration,
    MultipletReading, Spectrum,
};
use crate::dynamics::{apply_sequence, NoiseModel, PulseEvent, PulseSequence};
use crate::error::{Error, Result};
use crate::pulselang::{format, Builtin};
use crate::qcore::{
    c, partial_transpose_min_eig, polarization_along, werner_state, DensityMatrix, Matrix4c, Spin,
    SpinSystem, StateVector,
};

/// Rotational temperature of H2 (K).
pub const THETA_ROT: f64 = 87.6;

/// One of the four single-bit functions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FunctionLabel {
    F00,
    F01,
    F10,
    F11,
}

impl FunctionLabel {
    pub const ALL: [FunctionLabel; 4] = [
        FunctionLabel::F00,
        FunctionLabel::F01,
        FunctionLabel::F10,
        FunctionLabel::F11,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FunctionLabel::F00 => "f00",
            FunctionLabel::F01 => "f01",
            FunctionLabel::F10 => "f10",
            FunctionLabel::F11 => "f11",
        }
    }

    /// `f(x)`; the label lists `f(0)` then `f(1)`.
    pub fn eval(self, x: u8) -> u8 {
        let (f0, f1) = match self {
            FunctionLabel::F00 => (0, 0),
            FunctionLabel::F01 => (0, 1),
            FunctionLabel::F10 => (1, 0),
            FunctionLabel::F11 => (1, 1),
        };
        if x == 0 {
            f0
        } else {
            f1
        }
    }

    pub fn is_constant(self) -> bool {
        self.eval(0) == self.eval(1)
    }

    pub fn is_balanced(self) -> bool {
        !self.is_constant()
    }

    /// `f(0) xor f(1)`.
    pub fn parity(self) -> u8 {
        self.eval(0) ^ self.eval(1)
    }

    /// `|x, y> -> |x, y xor f(x)>`.
    pub fn uf_matrix(self) -> Matrix4c {
        let zero = Matrix4c::zeros();
        let mut u = zero;
        for x in 0..2u8 {
            for y in 0..2u8 {
                let from = usize::from(2 * x + y);
                let to = usize::from(2 * x + (y ^ self.eval(x)));
                u[(to, from)] = c(1.0);
            }
        }
        u
    }

    /// Pulse implementation of `U_f`; empty for the identity.
    pub fn uf_sequence(self) -> PulseSequence {
        match self {
            FunctionLabel::F00 => Builtin::U00.sequence(),
            FunctionLabel::F01 => Builtin::P01.sequence(),
            FunctionLabel::F10 => Builtin::P10.sequence(),
            FunctionLabel::F11 => Builtin::P11.sequence(),
        }
    }
}

impl fmt::Display for FunctionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FunctionLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FunctionLabel::ALL
            .into_iter()
            .find(|l| l.name() == s)
            .ok_or_else(|| Error::UnknownLabel {
                kind: "function",
                label: s.to_string(),
            })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ExperimentKind {
    #[serde(rename = "classical-f0")]
    ClassicalF0,
    #[serde(rename = "classical-f1")]
    ClassicalF1,
    #[serde(rename = "quantum")]
    Quantum,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 3] = [
        ExperimentKind::ClassicalF0,
        ExperimentKind::ClassicalF1,
        ExperimentKind::Quantum,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::ClassicalF0 => "classical-f0",
            ExperimentKind::ClassicalF1 => "classical-f1",
            ExperimentKind::Quantum => "quantum",
        }
    }

    /// Bit the run is expected to produce for `f`.
    pub fn expected_bit(self, f: FunctionLabel) -> u8 {
        match self {
            ExperimentKind::ClassicalF0 => f.eval(0),
            ExperimentKind::ClassicalF1 => f.eval(1),
            ExperimentKind::Quantum => f.parity(),
        }
    }

    /// Expected bits of spins I and S.
    pub fn expected_bits(self, f: FunctionLabel) -> [u8; 2] {
        match self {
            ExperimentKind::ClassicalF0 => [0, f.eval(0)],
            ExperimentKind::ClassicalF1 => [1, f.eval(1)],
            ExperimentKind::Quantum => [f.parity(), 1],
        }
    }

    /// Spin whose multiplet carries the answer.
    pub fn result_spin(self) -> Spin {
        match self {
            ExperimentKind::Quantum => Spin::I,
            _ => Spin::S,
        }
    }

    fn readout_pulse(self) -> bool {
        self != ExperimentKind::Quantum
    }

    /// Full pulse program before acquisition.
    pub fn pipeline(self, f: FunctionLabel) -> PulseSequence {
        let gradient = PulseSequence::new(vec![PulseEvent::Gradient]);
        let head = match self {
            ExperimentKind::ClassicalF0 => Builtin::A.sequence().then(&gradient),
            ExperimentKind::ClassicalF1 => Builtin::C.sequence().then(&gradient),
            ExperimentKind::Quantum => Builtin::B
                .sequence()
                .then(&gradient)
                .then(&Builtin::AcquirePulse.sequence()),
        };
        head.then(&f.uf_sequence())
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ExperimentKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::UnknownLabel {
                kind: "experiment",
                label: s.to_string(),
            })
    }
}

/// Everything a run depends on.
#[derive(Clone, Debug, PartialEq)]
pub struct Setup {
    pub system: SpinSystem,
    pub noise: NoiseModel,
    pub acquisition: AcquisitionParams,
}

impl Default for Setup {
    fn default() -> Self {
        let system = SpinSystem::default();
        Setup {
            noise: NoiseModel::from_system(&system),
            system,
            acquisition: AcquisitionParams::default(),
        }
    }
}

impl Setup {
    /// Pure singlet, no relaxation.
    pub fn ideal() -> Self {
        let system = SpinSystem::default().with_epsilon(1.0);
        Setup {
            noise: NoiseModel::disabled(&system),
            system,
            acquisition: AcquisitionParams::default(),
        }
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Self {
        Setup {
            system: self.system.with_epsilon(epsilon),
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.system.validate()?;
        self.noise.validate()?;
        self.acquisition.validate(&self.system)
    }

    /// Phase reference from the classical `f00`, `x = 0` spectrum.
    pub fn calibrate(&self) -> Result<Calibration> {
        let sim = simulate(ExperimentKind::ClassicalF0, FunctionLabel::F00, self)?;
        calibrate(&sim.spectrum, &self.system)
    }
}

/// Werner state taken through preparation sequence A, B or C and the gradient.
pub fn prepare_input(a: u8, b: u8, setup: &Setup) -> Result<DensityMatrix> {
    let prep = match (a, b) {
        (0, 0) => Builtin::A,
        (0, 1) => Builtin::B,
        (1, 0) => Builtin::C,
        _ => return Err(Error::UnsupportedInput { a, b }),
    };
    let seq = prep
        .sequence()
        .then(&PulseSequence::new(vec![PulseEvent::Gradient]));
    apply_sequence(
        &setup.system.initial_state()?,
        &seq,
        &setup.system,
        &setup.noise,
    )
}

/// State and spectrum of one run, before classification.
#[derive(Clone, Debug)]
pub struct Simulation {
    pub sequence: PulseSequence,
    /// State after the last pulse of the pipeline, before any readout pulse.
    pub final_state: DensityMatrix,
    pub spectrum: Spectrum,
}

pub fn simulate(kind: ExperimentKind, f: FunctionLabel, setup: &Setup) -> Result<Simulation> {
    let sequence = kind.pipeline(f);
    let final_state = apply_sequence(
        &setup.system.initial_state()?,
        &sequence,
        &setup.system,
        &setup.noise,
    )?;
    let params = setup.acquisition.with_readout(kind.readout_pulse());
    let fid = acquire(&final_state, &setup.system, &setup.noise, &params)?;
    Ok(Simulation {
        sequence,
        final_state,
        spectrum: transform(&fid),
    })
}

/// Noise-free, pure-singlet output of the pipeline, as a state vector.
pub fn ideal_output(
    kind: ExperimentKind,
    f: FunctionLabel,
    system: &SpinSystem,
) -> Result<StateVector> {
    let pure = system.with_epsilon(1.0);
    let rho = apply_sequence(
        &pure.initial_state()?,
        &kind.pipeline(f),
        &pure,
        &NoiseModel::disabled(&pure),
    )?;
    Ok(rho.dominant_state())
}

/// Polarization of `rho` measured against the ideal output of the same
/// pipeline, and the partial-transpose minimum eigenvalue of the Werner state
/// with that polarization.
pub fn final_polarization(
    rho: &DensityMatrix,
    kind: ExperimentKind,
    f: FunctionLabel,
    system: &SpinSystem,
) -> Result<(f64, f64)> {
    let eps = polarization_along(rho, &ideal_output(kind, f, system)?);
    let pt = partial_transpose_min_eig(&werner_state(eps.clamp(0.0, 1.0))?);
    Ok((eps, pt))
}

/// Outcome of one experiment.
#[derive(Clone, Debug, Serialize)]
pub struct ExperimentRecord {
    pub kind: ExperimentKind,
    pub f: FunctionLabel,
    pub epsilon: f64,
    pub noise: NoiseModel,
    pub sequence: String,
    #[serde(serialize_with = "serialize_state")]
    pub final_state: DensityMatrix,
    pub final_polarization: f64,
    pub final_pt_min_eig: f64,
    pub phase0_deg: f64,
    pub readings: [MultipletReading; 2],
    pub result_bit: u8,
    /// `"CONSTANT"` or `"BALANCED"` for quantum runs.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verdict: Option<&'static str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spectrum_file: Option<String>,
    pub wall_clock_s: f64,
    #[serde(skip)]
    pub spectrum: Spectrum,
}

fn serialize_state<S: serde::Serializer>(
    rho: &DensityMatrix,
    ser: S,
) -> std::result::Result<S::Ok, S::Error> {
    #[derive(Serialize)]
    struct Parts {
        re: Vec<Vec<f64>>,
        im: Vec<Vec<f64>>,
    }
    let m = rho.matrix();
    let part = |g: fn(&num_complex::Complex64) -> f64| {
        (0..4)
            .map(|r| (0..4).map(|col| g(&m[(r, col)])).collect())
            .collect()
    };
    Parts {
        re: part(|z| z.re),
        im: part(|z| z.im),
    }
    .serialize(ser)
}

impl ExperimentRecord {
    pub fn bit(&self, spin: Spin) -> Bit {
        self.readings[spin_index(spin)].bit
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("record serializes")
    }
}

fn spin_index(spin: Spin) -> usize {
    match spin {
        Spin::I => 0,
        Spin::S => 1,
    }
}

/// Runs and classifies one experiment against an existing phase reference.
pub fn run_calibrated(
    kind: ExperimentKind,
    f: FunctionLabel,
    setup: &Setup,
    calibration: &Calibration,
) -> Result<ExperimentRecord> {
    let start = Instant::now();
    let sim = simulate(kind, f, setup)?;
    let readings = multiplet_readings(&sim.spectrum, &setup.system, calibration);
    let result_bit = match readings[spin_index(kind.result_spin())].bit.value() {
        Some(bit) if readings.iter().all(|r| r.bit != Bit::Ambiguous) => bit,
        _ => {
            return Err(Error::Ambiguous {
                readings: readings.to_vec(),
            })
        }
    };
    let (final_polarization, final_pt_min_eig) =
        final_polarization(&sim.final_state, kind, f, &setup.system)?;
    let verdict = (kind == ExperimentKind::Quantum).then_some(if result_bit == 0 {
        "CONSTANT"
    } else {
        "BALANCED"
    });
    Ok(ExperimentRecord {
        kind,
        f,
        epsilon: setup.system.epsilon,
        noise: setup.noise.clone(),
        sequence: format(&sim.sequence),
        final_state: sim.final_state,
        final_polarization,
        final_pt_min_eig,
        phase0_deg: calibration.phase0_deg,
        readings,
        result_bit,
        verdict,
        spectrum_file: None,
        wall_clock_s: start.elapsed().as_secs_f64(),
        spectrum: sim.spectrum.phased(calibration.phase0_deg),
    })
}

pub fn run(kind: ExperimentKind, f: FunctionLabel, setup: &Setup) -> Result<ExperimentRecord> {
    run_calibrated(kind, f, setup, &setup.calibrate()?)
}

/// Classical evaluation of `f(x)`.
pub fn run_classical(f: FunctionLabel, x: u8, setup: &Setup) -> Result<ExperimentRecord> {
    let kind = match x {
        0 => ExperimentKind::ClassicalF0,
        1 => ExperimentKind::ClassicalF1,
        _ => return Err(Error::invalid("x", "must be 0 or 1")),
    };
    run(kind, f, setup)
}

pub fn run_deutsch(f: FunctionLabel, setup: &Setup) -> Result<ExperimentRecord> {
    run(ExperimentKind::Quantum, f, setup)
}

#[derive(Clone, Debug, Serialize)]
pub struct TruthCell {
    pub kind: ExperimentKind,
    pub f: FunctionLabel,
    pub expected: [u8; 2],
    pub observed: Option<[u8; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl TruthCell {
    pub fn correct(&self) -> bool {
        self.observed == Some(self.expected)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TruthTable {
    pub cells: Vec<TruthCell>,
}

impl TruthTable {
    pub fn correct_count(&self) -> usize {
        self.cells.iter().filter(|c| c.correct()).count()
    }

    pub fn all_correct(&self) -> bool {
        self.correct_count() == self.cells.len()
    }
}

/// All twelve runs; each cell compares both spin bits with the expectation.
pub fn truth_table(setup: &Setup) -> TruthTable {
    let calibration = setup.calibrate();
    let grid: Vec<(ExperimentKind, FunctionLabel)> = ExperimentKind::ALL
        .into_iter()
        .flat_map(|k| FunctionLabel::ALL.into_iter().map(move |f| (k, f)))
        .collect();
    let cells = grid
        .into_par_iter()
        .map(|(kind, f)| {
            let outcome = calibration
                .as_ref()
                .map_err(|e| e.to_string())
                .and_then(|cal| run_calibrated(kind, f, setup, cal).map_err(|e| e.to_string()));
            let (observed, error) = match outcome {
                Ok(rec) => (
                    Some(rec.readings.map(|r| r.bit.value().unwrap_or(u8::MAX))),
                    None,
                ),
                Err(e) => (None, Some(e)),
            };
            TruthCell {
                kind,
                f,
                expected: kind.expected_bits(f),
                observed,
                error,
            }
        })
        .collect();
    TruthTable { cells }
}

/// Equilibrium fraction of para-hydrogen at `temperature` (K).
pub fn para_fraction(temperature: f64) -> Result<f64> {
    if !(temperature > 0.0 && temperature.is_finite()) {
        return Err(Error::invalid("temperature", "must be positive and finite"));
    }
    let (mut para, mut ortho) = (0.0_f64, 0.0_f64);
    for j in 0u32.. {
        let jf = f64::from(j);
        let exponent = jf * (jf + 1.0) * THETA_ROT / temperature;
        if exponent > 745.0 {
            break;
        }
        let weight = (2.0 * jf + 1.0) * (-exponent).exp();
        if j % 2 == 0 {
            para += weight;
        } else {
            ortho += 3.0 * weight;
        }
    }
    Ok(para / (para + ortho))
}

/// `n` evenly spaced values from `from` to `to` inclusive.
pub fn linspace(from: f64, to: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![from],
        _ => (0..n)
            .map(|k| from + (to - from) * k as f64 / (n - 1) as f64)
            .collect(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScanRow {
    pub epsilon: f64,
    /// `None` when the spectrum could not be classified.
    pub result_bit: Option<u8>,
    pub final_polarization: f64,
    /// Of the initial Werner state.
    pub pt_min_eig: f64,
    pub final_pt_min_eig: f64,
}

/// One Deutsch run per polarization; rows keep the order of `grid`.
pub fn epsilon_scan(grid: &[f64], f: FunctionLabel, setup: &Setup) -> Result<Vec<ScanRow>> {
    grid.par_iter()
        .map(|&epsilon| {
            let s = setup.with_epsilon(epsilon);
            s.system.validate()?;
            let initial = s.system.initial_state()?;
            let sim = simulate(ExperimentKind::Quantum, f, &s)?;
            let (final_polarization, final_pt_min_eig) =
                final_polarization(&sim.final_state, ExperimentKind::Quantum, f, &s.system)?;
            let result_bit = match run_deutsch(f, &s) {
                Ok(rec) => Some(rec.result_bit),
                Err(Error::Ambiguous { .. } | Error::NoReferenceSignal { .. }) => None,
                Err(e) => return Err(e),
            };
            Ok(ScanRow {
                epsilon,
                result_bit,
                final_polarization,
                pt_min_eig: partial_transpose_min_eig(&initial),
                final_pt_min_eig,
            })
        })
        .collect()
}

pub fn temperature_scan(grid: &[f64]) -> Result<Vec<(f64, f64)>> {
    grid.iter().map(|&t| Ok((t, para_fraction(t)?))).collect()
}
