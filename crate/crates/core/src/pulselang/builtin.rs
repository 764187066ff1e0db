use std::fmt;
use std::str::FromStr;

use crate::dynamics::PulseSequence;
use crate::error::{Error, Result};

/// Named sequences used by the experiments.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Builtin {
    /// Singlet to `|00>`.
    A,
    /// Singlet to `|01>`.
    B,
    /// Singlet to `|10>`.
    C,
    P01,
    P10,
    P11,
    U00,
    U01Po,
    U10Po,
    Hadamard,
    PseudoHadamard,
    AcquirePulse,
}

impl Builtin {
    pub const ALL: [Builtin; 12] = [
        Builtin::A,
        Builtin::B,
        Builtin::C,
        Builtin::P01,
        Builtin::P10,
        Builtin::P11,
        Builtin::U00,
        Builtin::U01Po,
        Builtin::U10Po,
        Builtin::Hadamard,
        Builtin::PseudoHadamard,
        Builtin::AcquirePulse,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Builtin::A => "A",
            Builtin::B => "B",
            Builtin::C => "C",
            Builtin::P01 => "P01",
            Builtin::P10 => "P10",
            Builtin::P11 => "P11",
            Builtin::U00 => "U00",
            Builtin::U01Po => "U01_po",
            Builtin::U10Po => "U10_po",
            Builtin::Hadamard => "hadamard",
            Builtin::PseudoHadamard => "pseudo_hadamard",
            Builtin::AcquirePulse => "acquire_pulse",
        }
    }

    pub fn source(self) -> &'static str {
        match self {
            // the last delay must be 2 tau1: a single tau1 leaves each spin
            // 45 degrees off axis and the output is not an eigenstate
            Builtin::A => "[tau1] 90y [tau2] 180x [tau2] 180y [2tau1] 90x",
            Builtin::B => "[tau1] 90y [tau2] 180x [tau2] 90y",
            Builtin::C => "[tau1] 90y [tau2] 180x [tau2] 90-y",
            Builtin::P01 => "90-x [tau1] 90@45 [2tau1+tau2] 180x [tau2] 90@135 [tau1] 90-x",
            Builtin::P10 => "90x [tau1] 90@45 [2tau1+tau2] 180x [tau2] 90@135 [tau1] 90x",
            Builtin::P11 => "90y [2tau1] 90-y 90x",
            Builtin::U00 => "",
            Builtin::U01Po => "90S-y 90Iz 90Sz -90J 90Sy",
            Builtin::U10Po => "90S-y 90I-z 90Sz 90J 90Sy",
            Builtin::Hadamard => "180Iz 180Sz 90-y",
            Builtin::PseudoHadamard => "90-y",
            Builtin::AcquirePulse => "90y",
        }
    }

    pub fn sequence(self) -> PulseSequence {
        super::parse(self.source()).expect("builtin sources are valid")
    }
}

impl fmt::Display for Builtin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Builtin {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Builtin::ALL
            .into_iter()
            .find(|b| b.name() == s)
            .ok_or_else(|| Error::UnknownLabel {
                kind: "builtin sequence",
                label: s.to_string(),
            })
    }
}

/// Looks up a builtin sequence by name.
pub fn builtin(name: &str) -> Result<PulseSequence> {
    Ok(name.parse::<Builtin>()?.sequence())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::PulseEvent;

    #[test]
    fn event_counts() {
        let expected = [
            ("A", 8),
            ("B", 6),
            ("C", 6),
            ("P01", 9),
            ("P10", 9),
            ("P11", 4),
            ("U00", 0),
            ("U01_po", 5),
            ("U10_po", 5),
            ("hadamard", 3),
            ("pseudo_hadamard", 1),
            ("acquire_pulse", 1),
        ];
        for (name, n) in expected {
            assert_eq!(builtin(name).unwrap().len(), n, "{name}");
        }
    }

    #[test]
    fn b_ends_with_ninety_y() {
        let b = builtin("B").unwrap();
        assert_eq!(b.events().last(), Some(&PulseEvent::hard(90.0, 90.0)));
    }

    #[test]
    fn pseudo_hadamard_is_a_single_minus_y_pulse() {
        assert_eq!(
            builtin("pseudo_hadamard").unwrap().events(),
            &[PulseEvent::hard(90.0, 270.0)]
        );
    }

    #[test]
    fn p11_formats_as_displayed() {
        assert_eq!(
            super::super::format(&builtin("P11").unwrap()),
            "90y [2tau1] 90-y 90x"
        );
    }

    #[test]
    fn unknown_name() {
        assert!(matches!(builtin("P12"), Err(Error::UnknownLabel { .. })));
    }
}
