//! Abstract-frame bookkeeping and equivalence checks for compiled sequences.

use crate::dynamics::{sequence_propagator, PulseEvent, PulseSequence};
use crate::error::Result;
use crate::qcore::{unitary_distance, DistanceMode, Matrix4c, Spin, SpinSystem};

/// Moves every z-rotation to the front of the sequence.
///
/// A transverse pulse of phase `phi` that a z-rotation by `zeta` crosses
/// becomes a pulse of phase `phi + zeta` on that spin; hard pulses crossed by
/// unequal rotations split into two selective pulses. Couplings, delays and
/// gradients commute with z-rotations. The propagator is unchanged.
pub fn commute_z_left(seq: &PulseSequence) -> PulseSequence {
    let (mut acc_i, mut acc_s) = (0.0_f64, 0.0_f64);
    let mut moved: Vec<PulseEvent> = Vec::with_capacity(seq.len() + 1);
    for event in seq.events().iter().rev() {
        match event {
            PulseEvent::ZRotation { spin, angle } => match spin {
                Spin::I => acc_i += angle,
                Spin::S => acc_s += angle,
            },
            PulseEvent::Hard { angle, phase } => {
                if acc_i == acc_s {
                    moved.push(PulseEvent::hard(*angle, phase + acc_i));
                } else {
                    moved.push(PulseEvent::selective(Spin::S, *angle, phase + acc_s));
                    moved.push(PulseEvent::selective(Spin::I, *angle, phase + acc_i));
                }
            }
            PulseEvent::Selective { spin, angle, phase } => {
                let shift = match spin {
                    Spin::I => acc_i,
                    Spin::S => acc_s,
                };
                moved.push(PulseEvent::selective(*spin, *angle, phase + shift));
            }
            other => moved.push(other.clone()),
        }
    }
    let mut out = Vec::with_capacity(moved.len() + 2);
    if acc_i != 0.0 {
        out.push(PulseEvent::z_rotation(Spin::I, acc_i));
    }
    if acc_s != 0.0 {
        out.push(PulseEvent::z_rotation(Spin::S, acc_s));
    }
    out.extend(moved.into_iter().rev());
    PulseSequence::new(out)
}

/// Drops the z-rotations at the start of a sequence; they act trivially on
/// computational basis states.
pub fn drop_leading_z(seq: &PulseSequence) -> PulseSequence {
    seq.events()
        .iter()
        .skip_while(|e| e.is_z_rotation())
        .cloned()
        .collect()
}

/// z-rotation of one spin built from transverse pulses: `90_-x`, then
/// `angle_y`, then `90_x` in time order.
pub fn composite_z(spin: Spin, angle: f64) -> PulseSequence {
    PulseSequence::new(vec![
        PulseEvent::selective(spin, 90.0, 180.0),
        PulseEvent::selective(spin, angle, 90.0),
        PulseEvent::selective(spin, 90.0, 0.0),
    ])
}

pub fn check_equivalence(
    a: &PulseSequence,
    b: &PulseSequence,
    system: &SpinSystem,
    mode: DistanceMode,
) -> Result<f64> {
    unitary_distance(
        &sequence_propagator(a, system)?,
        &sequence_propagator(b, system)?,
        mode,
    )
}

/// Distance between a sequence's propagator and a target unitary.
pub fn distance_to_unitary(
    seq: &PulseSequence,
    target: &Matrix4c,
    system: &SpinSystem,
    mode: DistanceMode,
) -> Result<f64> {
    unitary_distance(&sequence_propagator(seq, system)?, target, mode)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::event_propagator;
    use crate::pulselang::{builtin, parse};

    fn sys() -> SpinSystem {
        SpinSystem::default()
    }

    #[test]
    fn z_then_pulse_round_trip() {
        let seq = parse("90x 90Iz").unwrap();
        let moved = commute_z_left(&seq);
        assert!(moved.events()[0].is_z_rotation());
        let d = check_equivalence(&seq, &moved, &sys(), DistanceMode::GlobalPhase).unwrap();
        assert!(d < 1e-10, "{d}");

        let already_left = parse("90Iz 90x").unwrap();
        assert_eq!(commute_z_left(&already_left), already_left);
    }

    #[test]
    fn no_z_events_is_identity() {
        let p01 = builtin("P01").unwrap();
        assert_eq!(commute_z_left(&p01), p01);
    }

    #[test]
    fn dropping_frame_rotations_keeps_populations() {
        let u01 = crate::experiments::FunctionLabel::F01.uf_matrix();
        let po = builtin("U01_po").unwrap();
        let stripped = drop_leading_z(&commute_z_left(&po));
        assert!(!stripped.events().iter().any(|e| e.is_z_rotation()));
        let d = distance_to_unitary(&stripped, &u01, &sys(), DistanceMode::Population).unwrap();
        assert!(d < 1e-10, "{d}");
    }

    #[test]
    fn composite_z_values() {
        let s = sys();
        let zero = sequence_propagator(&composite_z(Spin::I, 0.0), &s).unwrap();
        let d = unitary_distance(&zero, &Matrix4c::identity(), DistanceMode::GlobalPhase).unwrap();
        assert!(d < 1e-12);

        let direct = event_propagator(&PulseEvent::z_rotation(Spin::I, 90.0), &s).unwrap();
        let comp = sequence_propagator(&composite_z(Spin::I, 90.0), &s).unwrap();
        assert!(unitary_distance(&comp, &direct, DistanceMode::GlobalPhase).unwrap() < 1e-10);

        let minus = sequence_propagator(&composite_z(Spin::S, -90.0), &s).unwrap();
        let plus = sequence_propagator(&composite_z(Spin::S, 90.0), &s).unwrap();
        let d = unitary_distance(
            &(minus * plus),
            &Matrix4c::identity(),
            DistanceMode::GlobalPhase,
        )
        .unwrap();
        assert!(d < 1e-12);
    }

    #[test]
    fn gradient_blocks_equivalence() {
        let g = parse("G").unwrap();
        assert!(check_equivalence(&g, &g, &sys(), DistanceMode::Population).is_err());
    }
}
