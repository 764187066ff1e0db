//! Acceptance suite. Each check runs against fixed seeds and reports a
//! one-line verdict.

use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::acquisition::{resonance_offset, window_half_width};
use crate::dynamics::{
    event_propagator, relaxation_channel, sequence_propagator, NoiseModel, PulseEvent,
    PulseSequence,
};
use crate::error::Result;
use crate::experiments::{
    linspace, para_fraction, prepare_input, run_calibrated, simulate, truth_table, ExperimentKind,
    FunctionLabel, Setup,
};
use crate::pulselang::{
    commute_z_left, composite_z, distance_to_unitary, format, parse, Builtin, DelayExpr, DelayTerm,
    TimeUnit,
};
use crate::qcore::{
    c, fidelity, partial_transpose_min_eig, singlet, spin_op, unitary_distance, Axis,
    DensityMatrix, DistanceMode, Matrix4c, Spin, StateVector,
};

const SEED: u64 = 0x00c0_ffee;

#[derive(Clone, Debug, Serialize)]
pub struct CheckResult {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl CheckResult {
    pub fn line(&self) -> String {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        format!(
            "[{verdict}] {:>2} {:<18} {}",
            self.id, self.name, self.detail
        )
    }
}

type CheckFn = fn() -> Result<(bool, String)>;

pub const CHECKS: [(u8, &str, CheckFn); 11] = [
    (1, "truth-table", check_truth_table),
    (2, "quantum-signs", check_quantum_signs),
    (3, "state-prep", check_state_prep),
    (4, "werner", check_werner),
    (5, "channels", check_channels),
    (6, "spectral", check_spectral),
    (7, "imbalance", check_imbalance),
    (8, "final-polarization", check_final_polarization),
    (9, "para-fraction", check_para_fraction),
    (10, "compiler", check_compiler),
    (11, "parser", check_parser),
];

pub fn check_names() -> impl Iterator<Item = &'static str> {
    CHECKS.iter().map(|(_, name, _)| *name)
}

fn execute(id: u8, name: &'static str, check: CheckFn) -> CheckResult {
    let (passed, detail) = match check() {
        Ok(outcome) => outcome,
        Err(e) => (false, format!("error: {e}")),
    };
    CheckResult {
        id,
        name,
        passed,
        detail,
    }
}

pub fn run_all() -> Vec<CheckResult> {
    CHECKS
        .iter()
        .map(|&(id, name, check)| execute(id, name, check))
        .collect()
}

/// Runs one check by name; `None` if no check has that name.
pub fn run_only(name: &str) -> Option<CheckResult> {
    CHECKS
        .iter()
        .find(|(_, n, _)| *n == name)
        .map(|&(id, name, check)| execute(id, name, check))
}

pub fn check_truth_table() -> Result<(bool, String)> {
    let start = Instant::now();
    let ideal = truth_table(&Setup::ideal());
    let noisy = truth_table(&Setup::default());
    let secs = start.elapsed().as_secs_f64();
    let mut failures: Vec<String> = Vec::new();
    for (label, table) in [("ideal", &ideal), ("noisy", &noisy)] {
        for cell in table.cells.iter().filter(|c| !c.correct()) {
            failures.push(format!(
                "{label} {} {}: expected {:?}, got {}",
                cell.kind,
                cell.f,
                cell.expected,
                cell.error
                    .clone()
                    .unwrap_or_else(|| format!("{:?}", cell.observed))
            ));
        }
    }
    let passed = failures.is_empty() && secs < 10.0;
    let detail = format!(
        "ideal {}/12, noisy {}/12, {secs:.2} s{}",
        ideal.correct_count(),
        noisy.correct_count(),
        if failures.is_empty() {
            String::new()
        } else {
            format!("; {}", failures.join("; "))
        }
    );
    Ok((passed, detail))
}

pub fn check_quantum_signs() -> Result<(bool, String)> {
    let mut ok = true;
    let mut parts = Vec::new();
    for (label, setup) in [("ideal", Setup::ideal()), ("noisy", Setup::default())] {
        let calibration = setup.calibrate()?;
        for f in FunctionLabel::ALL {
            let rec = run_calibrated(ExperimentKind::Quantum, f, &setup, &calibration)?;
            let sign_i = if f.is_constant() { 1.0 } else { -1.0 };
            let (int_i, int_s) = (rec.readings[0].integral, rec.readings[1].integral);
            let good = int_i.signum() == sign_i && int_s < 0.0;
            ok &= good;
            parts.push(format!("{label} {f}: I {int_i:+.3} S {int_s:+.3}"));
        }
    }
    Ok((ok, parts.join(", ")))
}

pub fn check_state_prep() -> Result<(bool, String)> {
    let setup = Setup::ideal();
    let mut worst = 1.0_f64;
    for (a, b) in [(0, 0), (0, 1), (1, 0)] {
        let rho = prepare_input(a, b, &setup)?;
        worst = worst.min(fidelity(&rho, &StateVector::basis(a, b)));
    }
    let bound = (std::f64::consts::TAU * setup.system.j * setup.system.tau1()).powi(2) / 4.0;
    Ok((
        worst >= 0.999,
        format!(
            "min fidelity {worst:.9}, residual {:.2e} (coupling estimate {bound:.2e})",
            1.0 - worst
        ),
    ))
}

pub fn check_werner() -> Result<(bool, String)> {
    let psi = singlet();
    let mut worst = 0.0_f64;
    for eps in linspace(0.0, 1.0, 50) {
        let rho = crate::qcore::werner_state(eps)?;
        let errs = [
            fidelity(&rho, &psi) - (1.0 + 3.0 * eps) / 4.0,
            rho.purity() - (1.0 + 3.0 * eps * eps) / 4.0,
            partial_transpose_min_eig(&rho) - (1.0 - 3.0 * eps) / 4.0,
        ];
        worst = errs.iter().fold(worst, |w, e| w.max(e.abs()));
    }
    let threshold = npt_threshold()?;
    let off = (threshold - 1.0 / 3.0).abs();
    Ok((
        worst <= 1e-12 && off <= 1e-9,
        format!("max deviation {worst:.1e}, NPT threshold {threshold:.12}"),
    ))
}

/// Bisection for the polarization where the partial transpose of the Werner
/// state stops being positive.
pub fn npt_threshold() -> Result<f64> {
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if partial_transpose_min_eig(&crate::qcore::werner_state(mid)?) < 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `A A^dagger / Tr` for a matrix of uniform random entries.
pub fn random_density_matrix<R: Rng>(rng: &mut R) -> DensityMatrix {
    let a = Matrix4c::from_fn(|_, _| {
        Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    });
    let m = a * a.adjoint();
    let tr = m.trace();
    DensityMatrix::from_hermitized(m / tr).expect("A A^dagger is a state")
}

pub fn check_channels() -> Result<(bool, String)> {
    let noise = NoiseModel::default();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut completeness = 0.0_f64;
    let mut trace_err = 0.0_f64;
    let mut min_eig = f64::INFINITY;
    for k in 0..1000 {
        let t = [1e-3, 0.1, 0.58, 1.7][k % 4];
        let channel = relaxation_channel(t, &noise)?;
        completeness = completeness.max(channel.completeness_error());
        let out = channel.apply_matrix(random_density_matrix(&mut rng).matrix());
        trace_err = trace_err.max((out.trace() - c(1.0)).norm());
        min_eig = min_eig.min(crate::qcore::min_hermitian_eigenvalue(&out));
    }

    let ix = spin_op(Spin::I, Axis::X);
    let iz = spin_op(Spin::I, Axis::Z);
    let quarter = Matrix4c::identity() * c(0.25);
    let mut decay_err = 0.0_f64;
    for t in [0.1, 0.58, 1.7] {
        let channel = relaxation_channel(t, &noise)?;
        for (op, rate) in [(&ix, 1.0 / noise.t2), (&iz, 1.0 / noise.t1)] {
            let rho = quarter + op * c(0.25);
            let before = (rho * op).trace().re;
            let after = (channel.apply_matrix(&rho) * op).trace().re;
            decay_err = decay_err.max((after / before - (-t * rate).exp()).abs());
        }
    }
    Ok((
        completeness <= 1e-12 && trace_err <= 1e-12 && min_eig >= -1e-10 && decay_err <= 1e-9,
        format!(
            "completeness {completeness:.1e}, trace {trace_err:.1e}, min eig {min_eig:.1e}, decay {decay_err:.1e}"
        ),
    ))
}

/// Centers, doublet splittings and widths of both multiplets in the ideal
/// reference spectrum, as `(center, splitting, fwhm)` per spin.
pub fn spectral_structure() -> Result<[(f64, f64, f64); 2]> {
    let setup = Setup::ideal();
    let sim = simulate(ExperimentKind::ClassicalF0, FunctionLabel::F00, &setup)?;
    let spec = sim.spectrum;
    let hw = window_half_width(&setup.system);
    let mut out = [(f64::NAN, f64::NAN, f64::NAN); 2];
    for (k, spin) in Spin::BOTH.into_iter().enumerate() {
        let center = resonance_offset(spin, &setup.system);
        let peaks = spec.peak_frequencies(center - hw, center + hw);
        if let [lo, hi] = peaks[..] {
            let width = spec.fwhm(lo - 1.0, lo + 1.0).unwrap_or(f64::NAN);
            out[k] = (0.5 * (lo + hi), hi - lo, width);
        }
    }
    Ok(out)
}

pub fn check_spectral() -> Result<(bool, String)> {
    let s = Setup::ideal().system;
    let expected_width = 1.0 / (std::f64::consts::PI * s.t2);
    let lines = spectral_structure()?;
    let mut ok = true;
    let mut parts = Vec::new();
    for (spin, (center, split, width)) in Spin::BOTH.into_iter().zip(lines) {
        let target = resonance_offset(spin, &s);
        ok &= (center - target).abs() <= 0.5
            && (split - s.j).abs() <= 0.2
            && (width - expected_width).abs() <= 0.1;
        parts.push(format!(
            "{spin}: center {center:+.3} Hz, split {split:.3} Hz, fwhm {width:.3} Hz"
        ));
    }
    Ok((ok, parts.join("; ")))
}

/// Ratio of the weaker to the stronger multiplet magnitude in noisy
/// classical runs through the controlled-NOT sequences.
pub fn imbalance_ratios() -> Result<Vec<(ExperimentKind, FunctionLabel, f64)>> {
    let setup = Setup::default();
    let calibration = setup.calibrate()?;
    let mut out = Vec::new();
    for kind in [ExperimentKind::ClassicalF0, ExperimentKind::ClassicalF1] {
        for f in [FunctionLabel::F01, FunctionLabel::F10] {
            let rec = run_calibrated(kind, f, &setup, &calibration)?;
            let [a, b] = rec.readings.map(|r| r.integral.abs());
            out.push((kind, f, a.min(b) / a.max(b)));
        }
    }
    Ok(out)
}

pub fn check_imbalance() -> Result<(bool, String)> {
    let ratios = imbalance_ratios()?;
    let ok = ratios
        .iter()
        .all(|&(_, _, r)| r < 1.0 && (0.5..=0.9).contains(&r));
    let detail = ratios
        .iter()
        .map(|(k, f, r)| format!("{k} {f}: {r:.3}"))
        .collect::<Vec<_>>()
        .join(", ");
    Ok((ok, detail))
}

pub fn check_final_polarization() -> Result<(bool, String)> {
    let setup = Setup::default();
    let calibration = setup.calibrate()?;
    let mut ok = true;
    let mut parts = Vec::new();
    for f in FunctionLabel::ALL {
        let rec = run_calibrated(ExperimentKind::Quantum, f, &setup, &calibration)?;
        ok &= (0.40..=0.75).contains(&rec.final_polarization) && rec.final_pt_min_eig < 0.0;
        parts.push(format!(
            "{f}: {:.3} (PT {:+.3})",
            rec.final_polarization, rec.final_pt_min_eig
        ));
    }
    Ok((ok, parts.join(", ")))
}

pub fn check_para_fraction() -> Result<(bool, String)> {
    let cold = para_fraction(20.0)?;
    let hot = para_fraction(1e6)?;
    Ok((
        (0.9975..=0.9995).contains(&cold) && (hot - 0.25).abs() <= 1e-3,
        format!("20 K: {cold:.5}, 1e6 K: {hot:.5}"),
    ))
}

/// Random canonical sequence of up to `max_len` events. Angles and phases are
/// drawn from grids whose decimal text is exact.
pub fn random_sequence<R: Rng>(rng: &mut R, max_len: usize, with_gradient: bool) -> PulseSequence {
    let len = rng.random_range(0..=max_len);
    let kinds = if with_gradient { 6 } else { 5 };
    let angle = |rng: &mut R| f64::from(rng.random_range(1..=48)) * 7.5;
    let phase = |rng: &mut R| f64::from(rng.random_range(0..24)) * 15.0;
    let spin = |rng: &mut R| {
        if rng.random_bool(0.5) {
            Spin::I
        } else {
            Spin::S
        }
    };
    let signed = |rng: &mut R| {
        let a = angle(rng);
        if rng.random_bool(0.5) {
            -a
        } else {
            a
        }
    };
    (0..len)
        .map(|_| match rng.random_range(0..kinds) {
            0 => PulseEvent::hard(angle(rng), phase(rng)),
            1 => PulseEvent::selective(spin(rng), angle(rng), phase(rng)),
            2 => PulseEvent::z_rotation(spin(rng), signed(rng)),
            3 => PulseEvent::coupling(signed(rng)),
            4 => {
                let mut terms = Vec::new();
                if rng.random_bool(0.6) {
                    terms.push(DelayTerm::Tau1(rng.random_range(1..4)));
                }
                if rng.random_bool(0.5) {
                    terms.push(DelayTerm::Tau2(rng.random_range(1..3)));
                }
                if terms.is_empty() || rng.random_bool(0.2) {
                    terms.push(DelayTerm::Literal {
                        value: f64::from(rng.random_range(1..40)) * 0.25,
                        unit: TimeUnit::Milliseconds,
                    });
                }
                PulseEvent::delay(DelayExpr::new(terms).expect("positive terms"))
            }
            _ => PulseEvent::Gradient,
        })
        .collect()
}

pub fn check_compiler() -> Result<(bool, String)> {
    let s = Setup::ideal().system;
    let po = [
        (Builtin::U01Po, FunctionLabel::F01),
        (Builtin::U10Po, FunctionLabel::F10),
    ]
    .iter()
    .map(|(b, f)| distance_to_unitary(&b.sequence(), &f.uf_matrix(), &s, DistanceMode::GlobalPhase))
    .collect::<Result<Vec<_>>>()?
    .into_iter()
    .fold(0.0, f64::max);

    let hard = [FunctionLabel::F01, FunctionLabel::F10, FunctionLabel::F11]
        .iter()
        .map(|f| {
            distance_to_unitary(
                &f.uf_sequence(),
                &f.uf_matrix(),
                &s,
                DistanceMode::Population,
            )
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);

    let mut composite = 0.0_f64;
    for step in -24..=24 {
        let angle = f64::from(step) * 15.0;
        for spin in Spin::BOTH {
            let direct = event_propagator(&PulseEvent::z_rotation(spin, angle), &s)?;
            let built = sequence_propagator(&composite_z(spin, angle), &s)?;
            composite = composite.max(unitary_distance(
                &built,
                &direct,
                DistanceMode::GlobalPhase,
            )?);
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ 1);
    let mut samples: Vec<PulseSequence> = [Builtin::U01Po, Builtin::U10Po, Builtin::Hadamard]
        .iter()
        .map(|b| b.sequence())
        .collect();
    samples.extend((0..200).map(|_| random_sequence(&mut rng, 12, false)));
    let mut commuted = 0.0_f64;
    for seq in &samples {
        let u = sequence_propagator(seq, &s)?;
        let v = sequence_propagator(&commute_z_left(seq), &s)?;
        commuted = commuted.max(unitary_distance(&u, &v, DistanceMode::GlobalPhase)?);
    }

    Ok((
        po <= 1e-10 && hard <= 0.05 && composite <= 1e-9 && commuted <= 1e-9,
        format!(
            "product-operator {po:.1e}, hard-pulse population {hard:.1e}, composite z {composite:.1e}, frame commutation {commuted:.1e}"
        ),
    ))
}

pub fn check_parser() -> Result<(bool, String)> {
    let expected = [
        (Builtin::A, 8),
        (Builtin::B, 6),
        (Builtin::C, 6),
        (Builtin::P01, 9),
        (Builtin::P10, 9),
        (Builtin::P11, 4),
        (Builtin::U00, 0),
        (Builtin::U01Po, 5),
        (Builtin::U10Po, 5),
    ];
    let mut problems = Vec::new();
    for (b, n) in expected {
        let seq = parse(b.source())?;
        if seq.len() != n {
            problems.push(format!("{b} has {} events, expected {n}", seq.len()));
        }
    }
    let mut round_trips = 0;
    let mut check = |seq: &PulseSequence, problems: &mut Vec<String>| {
        round_trips += 1;
        let text = format(seq);
        match parse(&text) {
            Ok(back) if back == *seq => {}
            Ok(_) => problems.push(format!("`{text}` does not round-trip")),
            Err(e) => problems.push(format!("`{text}`: {e}")),
        }
    };
    for b in Builtin::ALL {
        check(&b.sequence(), &mut problems);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ 2);
    for _ in 0..500 {
        check(&random_sequence(&mut rng, 16, true), &mut problems);
    }
    let detail = if problems.is_empty() {
        format!("{round_trips} round trips, builtin event counts as expected")
    } else {
        problems.join("; ")
    };
    Ok((problems.is_empty(), detail))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_are_unique() {
        let mut names: Vec<_> = check_names().collect();
        names.sort_unstable();
        names.dedup();
        assert_eq!(names.len(), CHECKS.len());
        assert!(run_only("nonexistent").is_none());
    }

    #[test]
    fn random_sequences_are_deterministic() {
        let a = random_sequence(&mut ChaCha8Rng::seed_from_u64(7), 10, true);
        let b = random_sequence(&mut ChaCha8Rng::seed_from_u64(7), 10, true);
        assert_eq!(a, b);
    }

    #[test]
    fn threshold_is_one_third() {
        assert!((npt_threshold().unwrap() - 1.0 / 3.0).abs() < 1e-9);
    }
}
