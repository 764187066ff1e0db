//! Readout: free induction decay, Fourier transform, zeroth-order phasing and
//! the sign classification of the two multiplets.
//!
//! The detected signal is `Tr[rho(t) (I+ + S+)]`. Under the free Hamiltonian
//! spin I precesses at `+delta/2` and spin S at `-delta/2` relative to the
//! transmitter, so that is where their multiplets appear on the axis.
//! Positive absorption (`+I_x`) reads as bit 0, negative absorption as bit 1.

use std::fs::File;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::dynamics::{event_propagator, hamiltonian_energies, NoiseModel, PulseEvent};
use crate::error::{Error, Result};
use crate::qcore::{spin_op, Axis, DensityMatrix, Matrix4c, Spin, SpinSystem};

/// Fraction of the reference magnitude below which a multiplet is ambiguous.
pub const AMBIGUITY_FRACTION: f64 = 0.05;
/// Window half-width in units of J.
pub const WINDOW_HALF_WIDTH_J: f64 = 2.5;
/// Reference signals weaker than this carry nothing to phase against.
pub const MIN_REFERENCE_SIGNAL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AcquisitionParams {
    /// Hz.
    pub spectral_width: f64,
    pub points: usize,
    /// Apply a hard `90_y` before acquisition.
    pub readout_pulse: bool,
}

impl Default for AcquisitionParams {
    fn default() -> Self {
        AcquisitionParams {
            spectral_width: 2000.0,
            points: 16384,
            readout_pulse: true,
        }
    }
}

impl AcquisitionParams {
    pub fn validate(&self, system: &SpinSystem) -> Result<()> {
        let needed = system.delta + 4.0 * system.j;
        if !(self.spectral_width > needed && self.spectral_width.is_finite()) {
            return Err(Error::invalid(
                "acquisition.spectral_width",
                format!("must exceed delta + 4 J = {needed} Hz"),
            ));
        }
        if !(self.points.is_power_of_two() && self.points >= 1024) {
            return Err(Error::invalid(
                "acquisition.points",
                "must be a power of two no smaller than 1024",
            ));
        }
        Ok(())
    }

    pub fn dwell(&self) -> f64 {
        1.0 / self.spectral_width
    }

    pub fn with_readout(&self, readout_pulse: bool) -> Self {
        AcquisitionParams {
            readout_pulse,
            ..self.clone()
        }
    }
}

/// Sampled time-domain signal.
#[derive(Clone, Debug, PartialEq)]
pub struct Fid {
    pub dwell: f64,
    pub samples: Vec<Complex64>,
}

/// Frequency-domain signal, axis in Hz relative to the transmitter, ascending.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    pub freq_axis: Vec<f64>,
    pub values: Vec<Complex64>,
    /// Zeroth-order phase already applied to `values`, degrees.
    pub phase0: f64,
}

fn raising(spin: Spin) -> Matrix4c {
    spin_op(spin, Axis::X) + spin_op(spin, Axis::Y) * Complex64::i()
}

/// Offset (Hz) at which the multiplet of `spin` is centred.
pub fn resonance_offset(spin: Spin, system: &SpinSystem) -> f64 {
    let e = hamiltonian_energies(system);
    // transitions flipping `spin` with the partner up and down, averaged
    let pairs = match spin {
        Spin::I => [(0b10, 0b00), (0b11, 0b01)],
        Spin::S => [(0b01, 0b00), (0b11, 0b10)],
    };
    let mean: f64 = pairs.iter().map(|&(a, b)| e[a] - e[b]).sum::<f64>() / 2.0;
    -mean / std::f64::consts::TAU
}

pub fn acquire(
    rho: &DensityMatrix,
    system: &SpinSystem,
    noise: &NoiseModel,
    params: &AcquisitionParams,
) -> Result<Fid> {
    let state = if params.readout_pulse {
        rho.conjugate(&event_propagator(&PulseEvent::hard(90.0, 90.0), system)?)
    } else {
        rho.clone()
    };
    let observable = raising(Spin::I) + raising(Spin::S);
    let energies = hamiltonian_energies(system);
    let m = state.matrix();

    // rho(t)_ab = rho_ab exp(-i (E_a - E_b) t)
    let mut lines: Vec<(Complex64, f64)> = Vec::new();
    for a in 0..4 {
        for b in 0..4 {
            let amp = m[(a, b)] * observable[(b, a)];
            if amp.norm() > 0.0 {
                lines.push((amp, energies[a] - energies[b]));
            }
        }
    }

    let t2 = if noise.enabled { noise.t2 } else { system.t2 };
    let dwell = params.dwell();
    let samples = (0..params.points)
        .map(|k| {
            let t = k as f64 * dwell;
            let envelope = (-t / t2).exp();
            lines
                .iter()
                .map(|(amp, w)| amp * Complex64::from_polar(envelope, -w * t))
                .sum()
        })
        .collect();
    Ok(Fid { dwell, samples })
}

fn forward_fft(n: usize) -> Arc<dyn Fft<f64>> {
    FftPlanner::new().plan_fft_forward(n)
}

/// Unitary-normalized DFT, shifted so that zero frequency sits at `n/2`.
pub fn transform(fid: &Fid) -> Spectrum {
    let n = fid.samples.len();
    if n == 0 {
        return Spectrum {
            freq_axis: Vec::new(),
            values: Vec::new(),
            phase0: 0.0,
        };
    }
    let mut buf = fid.samples.clone();
    forward_fft(n).process(&mut buf);
    let scale = 1.0 / (n as f64).sqrt();
    let half = n / 2;
    let values = (0..n).map(|k| buf[(k + half) % n] * scale).collect();
    let step = 1.0 / (n as f64 * fid.dwell);
    let freq_axis = (0..n).map(|k| (k as f64 - half as f64) * step).collect();
    Spectrum {
        freq_axis,
        values,
        phase0: 0.0,
    }
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn resolution(&self) -> f64 {
        if self.freq_axis.len() < 2 {
            0.0
        } else {
            self.freq_axis[1] - self.freq_axis[0]
        }
    }

    /// Returns a copy with an additional zeroth-order phase applied.
    pub fn phased(&self, degrees: f64) -> Spectrum {
        let rot = Complex64::from_polar(1.0, degrees.to_radians());
        Spectrum {
            freq_axis: self.freq_axis.clone(),
            values: self.values.iter().map(|v| v * rot).collect(),
            phase0: self.phase0 + degrees,
        }
    }

    fn window(&self, center: f64, half_width: f64) -> impl Iterator<Item = (f64, Complex64)> + '_ {
        self.freq_axis
            .iter()
            .copied()
            .zip(self.values.iter().copied())
            .filter(move |(f, _)| (f - center).abs() <= half_width)
    }

    /// Complex sum over a window, scaled so that an isolated line of
    /// time-domain amplitude `a` sums to about `a / 2`.
    pub fn window_sum(&self, center: f64, half_width: f64) -> Complex64 {
        let norm = (self.len().max(1) as f64).sqrt();
        self.window(center, half_width)
            .map(|(_, v)| v)
            .sum::<Complex64>()
            / norm
    }

    /// Real-part integral over a window.
    pub fn integral(&self, center: f64, half_width: f64) -> f64 {
        self.window_sum(center, half_width).re
    }

    /// Total real-part integral over both multiplet windows.
    pub fn total_integral(&self, system: &SpinSystem) -> f64 {
        Spin::BOTH
            .iter()
            .map(|&s| self.integral(resonance_offset(s, system), window_half_width(system)))
            .sum()
    }

    /// Local maxima of the real part inside `[lo, hi]` that exceed half of
    /// the window maximum, refined by parabolic interpolation.
    pub fn peak_frequencies(&self, lo: f64, hi: f64) -> Vec<f64> {
        let re: Vec<f64> = self.values.iter().map(|v| v.re).collect();
        let idx: Vec<usize> = (1..re.len().saturating_sub(1))
            .filter(|&k| self.freq_axis[k] >= lo && self.freq_axis[k] <= hi)
            .collect();
        let top = idx.iter().map(|&k| re[k]).fold(f64::NEG_INFINITY, f64::max);
        if top.is_nan() || top <= 0.0 {
            return Vec::new();
        }
        idx.iter()
            .copied()
            .filter(|&k| re[k] > 0.5 * top && re[k] >= re[k - 1] && re[k] > re[k + 1])
            .map(|k| {
                let (offset, _) = parabolic_vertex(re[k - 1], re[k], re[k + 1]);
                self.freq_axis[k] + offset * self.resolution()
            })
            .collect()
    }

    /// Full width at half maximum of the tallest real-part line in `[lo, hi]`.
    pub fn fwhm(&self, lo: f64, hi: f64) -> Option<f64> {
        let re: Vec<f64> = self.values.iter().map(|v| v.re).collect();
        let k = (1..re.len().saturating_sub(1))
            .filter(|&k| self.freq_axis[k] >= lo && self.freq_axis[k] <= hi)
            .max_by(|&a, &b| re[a].total_cmp(&re[b]))?;
        let (_, height) = parabolic_vertex(re[k - 1], re[k], re[k + 1]);
        let half = height / 2.0;
        if half.is_nan() || half <= 0.0 {
            return None;
        }
        let step = self.resolution();
        let mut left = k;
        while left > 0 && re[left] > half {
            left -= 1;
        }
        let mut right = k;
        while right + 1 < re.len() && re[right] > half {
            right += 1;
        }
        if re[left] > half || re[right] > half {
            return None;
        }
        let cross = |inside: usize, outside: usize| {
            let frac = (re[inside] - half) / (re[inside] - re[outside]);
            self.freq_axis[inside] + frac * (self.freq_axis[outside] - self.freq_axis[inside])
        };
        let _ = step;
        Some(cross(right - 1, right) - cross(left + 1, left))
    }
}

/// Vertex of the parabola through three equally spaced points, as
/// (offset in samples from the middle point, height).
fn parabolic_vertex(a: f64, b: f64, c: f64) -> (f64, f64) {
    let denom = a - 2.0 * b + c;
    if denom.abs() < 1e-300 {
        return (0.0, b);
    }
    let offset = 0.5 * (a - c) / denom;
    (offset, b - 0.25 * (a - c) * offset)
}

pub fn window_half_width(system: &SpinSystem) -> f64 {
    WINDOW_HALF_WIDTH_J * system.j
}

/// Phase correction and signal scale taken from the reference spectrum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub phase0_deg: f64,
    /// Mean magnitude of the two phased reference multiplet integrals.
    pub reference_magnitude: f64,
}

impl Calibration {
    pub fn threshold(&self) -> f64 {
        AMBIGUITY_FRACTION * self.reference_magnitude
    }
}

/// Zeroth-order phase that makes both reference multiplets positive
/// absorption (it maximizes their summed real part).
pub fn calibrate(reference: &Spectrum, system: &SpinSystem) -> Result<Calibration> {
    let hw = window_half_width(system);
    let sums = Spin::BOTH.map(|s| reference.window_sum(resonance_offset(s, system), hw));
    let total: Complex64 = sums.iter().sum();
    if total.norm() < MIN_REFERENCE_SIGNAL {
        return Err(Error::NoReferenceSignal {
            magnitude: total.norm(),
        });
    }
    let phase = -total.arg();
    let rot = Complex64::from_polar(1.0, phase);
    let reference_magnitude = sums.iter().map(|z| (z * rot).re.abs()).sum::<f64>() / 2.0;
    Ok(Calibration {
        phase0_deg: phase.to_degrees(),
        reference_magnitude,
    })
}

pub fn calibrate_phase(reference: &Spectrum, system: &SpinSystem) -> Result<f64> {
    calibrate(reference, system).map(|c| c.phase0_deg)
}

/// Classified value of one qubit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "BitRepr", try_from = "BitRepr")]
pub enum Bit {
    Zero,
    One,
    Ambiguous,
}

impl Bit {
    pub fn value(self) -> Option<u8> {
        match self {
            Bit::Zero => Some(0),
            Bit::One => Some(1),
            Bit::Ambiguous => None,
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum BitRepr {
    Value(u8),
    Text(String),
}

impl From<Bit> for BitRepr {
    fn from(b: Bit) -> Self {
        match b.value() {
            Some(v) => BitRepr::Value(v),
            None => BitRepr::Text("ambiguous".into()),
        }
    }
}

impl TryFrom<BitRepr> for Bit {
    type Error = String;

    fn try_from(r: BitRepr) -> std::result::Result<Self, String> {
        match r {
            BitRepr::Value(0) => Ok(Bit::Zero),
            BitRepr::Value(1) => Ok(Bit::One),
            BitRepr::Text(t) if t == "ambiguous" => Ok(Bit::Ambiguous),
            _ => Err("bit must be 0, 1 or \"ambiguous\"".into()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultipletReading {
    pub spin: Spin,
    pub center_hz: f64,
    pub integral: f64,
    pub bit: Bit,
}

/// Integrates and classifies both multiplets without failing.
pub fn multiplet_readings(
    spec: &Spectrum,
    system: &SpinSystem,
    calibration: &Calibration,
) -> [MultipletReading; 2] {
    let phased = spec.phased(calibration.phase0_deg - spec.phase0);
    let hw = window_half_width(system);
    let threshold = calibration.threshold();
    Spin::BOTH.map(|spin| {
        let center_hz = resonance_offset(spin, system);
        let integral = phased.integral(center_hz, hw);
        let bit = if integral > threshold {
            Bit::Zero
        } else if integral < -threshold {
            Bit::One
        } else {
            Bit::Ambiguous
        };
        MultipletReading {
            spin,
            center_hz,
            integral,
            bit,
        }
    })
}

/// Readings for spins I and S; fails if either is below threshold.
pub fn read_multiplets(
    spec: &Spectrum,
    system: &SpinSystem,
    calibration: &Calibration,
) -> Result<[MultipletReading; 2]> {
    let readings = multiplet_readings(spec, system, calibration);
    if readings.iter().any(|r| r.bit == Bit::Ambiguous) {
        return Err(Error::Ambiguous {
            readings: readings.to_vec(),
        });
    }
    Ok(readings)
}

/// JSON companion of an exported spectrum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSidecar {
    pub params: AcquisitionParams,
    pub phase0_deg: f64,
    pub readings: Vec<MultipletReading>,
}

pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("json")
}

/// Writes `freq_hz,real,imag` rows (six significant digits) and a JSON
/// sidecar next to it. Returns the sidecar path.
pub fn export_spectrum(spec: &Spectrum, path: &Path, sidecar: &SpectrumSidecar) -> Result<PathBuf> {
    let io = |e: std::io::Error| Error::io(path, e);
    let mut writer = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    writer
        .write_record(["freq_hz", "real", "imag"])
        .map_err(|e| csv_error(path, e))?;
    for (f, v) in spec.freq_axis.iter().zip(&spec.values) {
        writer
            .write_record([
                format!("{f:.5e}"),
                format!("{:.5e}", v.re),
                format!("{:.5e}", v.im),
            ])
            .map_err(|e| csv_error(path, e))?;
    }
    writer.flush().map_err(io)?;

    let side = sidecar_path(path);
    let file = File::create(&side).map_err(|e| Error::io(&side, e))?;
    serde_json::to_writer_pretty(file, sidecar).map_err(|e| Error::Format {
        path: side.clone(),
        reason: e.to_string(),
    })?;
    Ok(side)
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            _ => unreachable!(),
        }
    } else {
        Error::Format {
            path: path.to_path_buf(),
            reason: e.to_string(),
        }
    }
}

/// Reads a spectrum written by [`export_spectrum`]; `phase0` is taken as 0.
pub fn read_spectrum_csv(path: &Path) -> Result<Spectrum> {
    #[derive(Deserialize)]
    struct Row {
        freq_hz: f64,
        real: f64,
        imag: f64,
    }
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let mut freq_axis = Vec::new();
    let mut values = Vec::new();
    for row in reader.deserialize::<Row>() {
        let row = row.map_err(|e| csv_error(path, e))?;
        freq_axis.push(row.freq_hz);
        values.push(Complex64::new(row.real, row.imag));
    }
    Ok(Spectrum {
        freq_axis,
        values,
        phase0: 0.0,
    })
}

pub fn read_sidecar(path: &Path) -> Result<SpectrumSidecar> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_reader(file).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::{c, StateVector};

    fn sys() -> SpinSystem {
        SpinSystem::default()
    }

    fn noise_off() -> NoiseModel {
        NoiseModel::disabled(&sys())
    }

    #[test]
    fn maximally_mixed_gives_no_signal() {
        let fid = acquire(
            &DensityMatrix::maximally_mixed(),
            &sys(),
            &noise_off(),
            &AcquisitionParams::default(),
        )
        .unwrap();
        assert!(fid.samples.iter().all(|s| s.norm() < 1e-12));
    }

    #[test]
    fn readout_pulse_turns_up_spins_into_x_magnetization() {
        let rho = DensityMatrix::pure(&StateVector::basis(0, 0));
        let fid = acquire(&rho, &sys(), &noise_off(), &AcquisitionParams::default()).unwrap();
        // Tr[(I_x + S_x)(I+ + S+)] for |00> after 90_y
        assert!((fid.samples[0] - c(1.0)).norm() < 1e-12);
    }

    #[test]
    fn spin_offsets_follow_the_hamiltonian() {
        let s = sys();
        assert!((resonance_offset(Spin::I, &s) - 246.0).abs() < 1e-9);
        assert!((resonance_offset(Spin::S, &s) + 246.0).abs() < 1e-9);
    }

    #[test]
    fn zero_fid_gives_zero_spectrum() {
        let fid = Fid {
            dwell: 1e-3,
            samples: vec![c(0.0); 1024],
        };
        let spec = transform(&fid);
        assert!(spec.values.iter().all(|v| v.norm() == 0.0));
        assert_eq!(spec.freq_axis.len(), 1024);
        assert!(spec.freq_axis.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn calibration_rejects_empty_reference() {
        let spec = transform(&Fid {
            dwell: 5e-4,
            samples: vec![c(0.0); 1024],
        });
        assert!(matches!(
            calibrate_phase(&spec, &sys()),
            Err(Error::NoReferenceSignal { .. })
        ));
    }

    #[test]
    fn params_validation() {
        let s = sys();
        assert!(AcquisitionParams::default().validate(&s).is_ok());
        let narrow = AcquisitionParams {
            spectral_width: 500.0,
            ..AcquisitionParams::default()
        };
        assert!(narrow.validate(&s).is_err());
        let odd = AcquisitionParams {
            points: 3000,
            ..AcquisitionParams::default()
        };
        assert!(odd.validate(&s).is_err());
        let small = AcquisitionParams {
            points: 512,
            ..AcquisitionParams::default()
        };
        assert!(small.validate(&s).is_err());
    }

    #[test]
    fn bit_serialization() {
        assert_eq!(serde_json::to_string(&Bit::One).unwrap(), "1");
        assert_eq!(
            serde_json::to_string(&Bit::Ambiguous).unwrap(),
            "\"ambiguous\""
        );
        assert_eq!(serde_json::from_str::<Bit>("0").unwrap(), Bit::Zero);
        assert!(serde_json::from_str::<Bit>("2").is_err());
    }

    #[test]
    fn parabolic_vertex_of_symmetric_points() {
        let (off, h) = parabolic_vertex(1.0, 2.0, 1.0);
        assert_eq!(off, 0.0);
        assert_eq!(h, 2.0);
        // y = -(x - 0.25)^2 sampled at -1, 0, 1
        let f = |x: f64| -(x - 0.25f64).powi(2);
        let (off, h) = parabolic_vertex(f(-1.0), f(0.0), f(1.0));
        assert!((off - 0.25).abs() < 1e-12 && h.abs() < 1e-12);
    }
}
