//! Comparisons against independent references: the generic matrix
//! exponential, closed-form relaxation and analytic lineshapes.

use std::f64::consts::{FRAC_1_SQRT_2, PI, TAU};

use nalgebra::Vector4;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use singletsim::acquisition::{
    acquire, calibrate, calibrate_phase, export_spectrum, multiplet_readings, read_multiplets,
    read_sidecar, read_spectrum_csv, sidecar_path, transform, AcquisitionParams, Fid,
    SpectrumSidecar,
};
use singletsim::dynamics::{
    event_propagator, free_evolution, relaxation_channel, NoiseModel, PulseEvent,
};
use singletsim::experiments::{simulate, ExperimentKind, FunctionLabel, Setup};
use singletsim::qcore::{
    max_abs, spin_op, Axis, DensityMatrix, Matrix4c, Spin, SpinSystem, StateVector,
};

fn cx(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn expm_minus_i(h: &Matrix4c) -> Matrix4c {
    (h * Complex64::new(0.0, -1.0)).exp()
}

fn transverse(spins: &[Spin], phase_deg: f64) -> Matrix4c {
    let p = phase_deg.to_radians();
    spins.iter().fold(Matrix4c::zeros(), |acc, &s| {
        acc + spin_op(s, Axis::X) * cx(p.cos()) + spin_op(s, Axis::Y) * cx(p.sin())
    })
}

#[test]
fn free_evolution_matches_matrix_exponential() {
    let s = SpinSystem::default();
    let (iz, sz) = (spin_op(Spin::I, Axis::Z), spin_op(Spin::S, Axis::Z));
    let h = (iz - sz) * cx(PI * s.delta) + iz * sz * cx(TAU * s.j);
    for t in [0.0, s.tau1(), s.tau2(), 0.0137, 0.5] {
        let u = free_evolution(t, &s).unwrap();
        assert!(
            max_abs(&(u - expm_minus_i(&(h * cx(t))))) < 1e-12,
            "t = {t}"
        );
    }
}

#[test]
fn pulses_match_matrix_exponential() {
    let s = SpinSystem::default();
    for (angle, phase) in [(90.0, 0.0), (180.0, 90.0), (90.0, 45.0), (37.5, 300.0)] {
        let theta = f64::to_radians(angle);
        let hard = event_propagator(&PulseEvent::hard(angle, phase), &s).unwrap();
        let g = transverse(&Spin::BOTH, phase) * cx(theta);
        assert!(max_abs(&(hard - expm_minus_i(&g))) < 1e-12);

        for spin in Spin::BOTH {
            let sel = event_propagator(&PulseEvent::selective(spin, angle, phase), &s).unwrap();
            let g = transverse(&[spin], phase) * cx(theta);
            assert!(max_abs(&(sel - expm_minus_i(&g))) < 1e-12);

            let z = event_propagator(&PulseEvent::z_rotation(spin, angle), &s).unwrap();
            let g = spin_op(spin, Axis::Z) * cx(theta);
            assert!(max_abs(&(z - expm_minus_i(&g))) < 1e-12);
        }

        let j = event_propagator(&PulseEvent::coupling(angle), &s).unwrap();
        let g = spin_op(Spin::I, Axis::Z) * spin_op(Spin::S, Axis::Z) * cx(2.0 * theta);
        assert!(max_abs(&(j - expm_minus_i(&g))) < 1e-12);
    }
}

#[test]
fn relaxation_matches_closed_form() {
    let n = NoiseModel::default();
    let quarter = Matrix4c::identity() * cx(0.25);
    for t in [0.1, 0.58, 1.7] {
        let ch = relaxation_channel(t, &n).unwrap();
        for spin in Spin::BOTH {
            let x = spin_op(spin, Axis::X);
            let z = spin_op(spin, Axis::Z);
            let ex = (ch.apply_matrix(&(quarter + x * cx(0.25))) * x).trace().re / 0.25;
            let ez = (ch.apply_matrix(&(quarter + z * cx(0.25))) * z).trace().re / 0.25;
            assert!((ex - (-t / n.t2).exp()).abs() < 1e-9, "x decay at {t}");
            assert!((ez - (-t / n.t1).exp()).abs() < 1e-9, "z recovery at {t}");
        }
    }
}

#[test]
fn relaxation_toward_biased_equilibrium() {
    let n = NoiseModel {
        equilibrium_excited_population: 0.2,
        ..NoiseModel::default()
    };
    let iz = spin_op(Spin::I, Axis::Z);
    // start fully up; <Iz> relaxes to (1/2 - q) with rate 1/T1
    let up = DensityMatrix::pure(&StateVector::basis(0, 0));
    for t in [0.1, 1.0, 4.0] {
        let out = relaxation_channel(t, &n).unwrap().apply_matrix(up.matrix());
        let eq = 0.5 - 0.2;
        let expected = eq + (0.5 - eq) * (-t / n.t1).exp();
        assert!(((out * iz).trace().re - expected).abs() < 1e-9);
    }
}

fn single_line_state(phase: f64, s_down: bool) -> DensityMatrix {
    // spin I transverse along `phase`, spin S along z
    let h = FRAC_1_SQRT_2;
    let e = Complex64::from_polar(h, phase);
    let v = if s_down {
        Vector4::new(cx(0.0), cx(h), cx(0.0), e)
    } else {
        Vector4::new(cx(h), cx(0.0), e, cx(0.0))
    };
    DensityMatrix::pure(&StateVector::new(v).unwrap())
}

#[test]
fn fid_envelope_is_transverse_decay() {
    let s = SpinSystem::default();
    let params = AcquisitionParams::default().with_readout(false);
    let fid = acquire(
        &single_line_state(0.0, false),
        &s,
        &NoiseModel::default(),
        &params,
    )
    .unwrap();
    let s0 = fid.samples[0].norm();
    for (k, v) in fid.samples.iter().enumerate().step_by(97) {
        let t = k as f64 * fid.dwell;
        assert!((v.norm() / s0 - (-t / s.t2).exp()).abs() < 1e-6);
    }
}

#[test]
fn fid_magnitude_never_exceeds_first_sample_for_single_lines() {
    let s = SpinSystem::default();
    let params = AcquisitionParams {
        points: 1024,
        ..AcquisitionParams::default()
    }
    .with_readout(false);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let rho = single_line_state(rng.random_range(0.0..TAU), rng.random_bool(0.5));
        let fid = acquire(&rho, &s, &NoiseModel::default(), &params).unwrap();
        let s0 = fid.samples[0].norm();
        assert!(fid.samples.iter().all(|v| v.norm() <= s0 + 1e-9));
    }
}

#[test]
fn decaying_exponential_gives_lorentzian() {
    let (sw, n, t2, f0) = (2000.0, 16384, 0.58, 246.0);
    let dwell = 1.0 / sw;
    let samples = (0..n)
        .map(|k| {
            let t = k as f64 * dwell;
            Complex64::from_polar((-t / t2).exp(), TAU * f0 * t)
        })
        .collect();
    let spec = transform(&Fid { dwell, samples });
    let peaks = spec.peak_frequencies(f0 - 5.0, f0 + 5.0);
    assert_eq!(peaks.len(), 1);
    assert!((peaks[0] - f0).abs() < 0.05, "{peaks:?}");
    let width = spec.fwhm(f0 - 5.0, f0 + 5.0).unwrap();
    assert!((width - 1.0 / (PI * t2)).abs() < 0.1, "{width}");
}

#[test]
fn transform_preserves_energy() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..100 {
        let n = 1 << rng.random_range(4..12);
        let samples: Vec<Complex64> = (0..n)
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let time: f64 = samples.iter().map(|v| v.norm_sqr()).sum();
        let spec = transform(&Fid {
            dwell: 1e-3,
            samples,
        });
        let freq: f64 = spec.values.iter().map(|v| v.norm_sqr()).sum();
        assert!((time - freq).abs() / time < 1e-9);
        assert_eq!(spec.len(), n);
    }
}

#[test]
fn calibration_recovers_injected_phase() {
    let setup = Setup::ideal();
    let reference = simulate(ExperimentKind::ClassicalF0, FunctionLabel::F00, &setup)
        .unwrap()
        .spectrum;
    let base = calibrate_phase(&reference, &setup.system).unwrap();
    assert!(base.abs() < 0.5, "{base}");
    let rotated = reference.phased(90.0);
    let back = calibrate_phase(&rotated, &setup.system).unwrap();
    assert!((back + 90.0).abs() < 0.5, "{back}");
}

#[test]
fn classification_ignores_sampling_changes() {
    let base = Setup::default();
    let variants = [
        AcquisitionParams::default(),
        AcquisitionParams {
            spectral_width: 4000.0,
            ..AcquisitionParams::default()
        },
        AcquisitionParams {
            points: 32768,
            ..AcquisitionParams::default()
        },
        AcquisitionParams {
            points: 8192,
            ..AcquisitionParams::default()
        },
    ];
    let mut seen = Vec::new();
    for acquisition in variants {
        let setup = Setup {
            acquisition,
            ..base.clone()
        };
        let cal = setup.calibrate().unwrap();
        let mut bits = Vec::new();
        for kind in ExperimentKind::ALL {
            for f in FunctionLabel::ALL {
                let spec = simulate(kind, f, &setup).unwrap().spectrum;
                let r = read_multiplets(&spec, &setup.system, &cal).unwrap();
                bits.push(r.map(|m| m.bit));
            }
        }
        seen.push(bits);
    }
    assert!(seen.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn reference_signal_is_linear_in_polarization() {
    let base = Setup::default();
    let cal = base.with_epsilon(1.0).calibrate().unwrap();
    let points: Vec<(f64, f64)> = (0..9)
        .map(|k| {
            let eps = 0.2 + 0.1 * f64::from(k);
            let setup = base.with_epsilon(eps);
            let spec = simulate(ExperimentKind::ClassicalF0, FunctionLabel::F00, &setup)
                .unwrap()
                .spectrum;
            let total: f64 = multiplet_readings(&spec, &setup.system, &cal)
                .iter()
                .map(|r| r.integral)
                .sum();
            (eps, total)
        })
        .collect();
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    let r2 = sxy * sxy / (sxx * syy);
    assert!(r2 >= 0.9999, "{r2}");
}

#[test]
fn exported_spectrum_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let setup = Setup::default();
    let cal = setup.calibrate().unwrap();
    let spec = simulate(ExperimentKind::Quantum, FunctionLabel::F01, &setup)
        .unwrap()
        .spectrum
        .phased(cal.phase0_deg);
    let readings = read_multiplets(&spec, &setup.system, &cal).unwrap();
    let path = dir.path().join("spec.csv");
    let side = export_spectrum(
        &spec,
        &path,
        &SpectrumSidecar {
            params: setup.acquisition.clone(),
            phase0_deg: spec.phase0,
            readings: readings.to_vec(),
        },
    )
    .unwrap();
    assert_eq!(side, sidecar_path(&path));

    let back = read_spectrum_csv(&path).unwrap();
    assert_eq!(back.len(), spec.len());
    let scale = spec.values.iter().map(|v| v.norm()).fold(0.0, f64::max);
    for (a, b) in spec.values.iter().zip(&back.values) {
        assert!((a - b).norm() <= 1e-5 * a.norm().max(1e-3 * scale));
    }
    for (a, b) in spec.freq_axis.iter().zip(&back.freq_axis) {
        assert!((a - b).abs() <= 1e-5 * a.abs().max(1.0));
    }

    let sidecar = read_sidecar(&side).unwrap();
    assert_eq!(
        sidecar.readings.iter().map(|r| r.bit).collect::<Vec<_>>(),
        readings.iter().map(|r| r.bit).collect::<Vec<_>>()
    );
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&side).unwrap()).unwrap();
    for key in ["params", "phase0_deg", "readings"] {
        assert!(json.get(key).is_some());
    }
    for key in ["spin", "center_hz", "integral", "bit"] {
        assert!(json["readings"][0].get(key).is_some());
    }
}

#[test]
fn zero_spectrum_exports_zero_rows() {
    let dir = tempfile::tempdir().unwrap();
    let spec = transform(&Fid {
        dwell: 5e-4,
        samples: vec![cx(0.0); 1024],
    });
    let path = dir.path().join("zero.csv");
    export_spectrum(
        &spec,
        &path,
        &SpectrumSidecar {
            params: AcquisitionParams::default(),
            phase0_deg: 0.0,
            readings: Vec::new(),
        },
    )
    .unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("freq_hz,real,imag"));
    let rows: Vec<_> = lines.collect();
    assert_eq!(rows.len(), 1024);
    let back = read_spectrum_csv(&path).unwrap();
    assert!(back.values.iter().all(|v| v.norm() == 0.0));
}

#[test]
fn calibration_reports_reference_scale() {
    let setup = Setup::ideal();
    let cal = setup.calibrate().unwrap();
    // |00> after the readout pulse is I_x + S_x; each multiplet carries
    // amplitude 1/2 and its window sums to about half of that
    assert!(
        (cal.reference_magnitude - 0.25).abs() < 0.01,
        "{}",
        cal.reference_magnitude
    );
    let again = calibrate(
        &simulate(ExperimentKind::ClassicalF0, FunctionLabel::F00, &setup)
            .unwrap()
            .spectrum,
        &setup.system,
    )
    .unwrap();
    assert_eq!(cal, again);
}
