//! Text notation for pulse programs.
//!
//! One whitespace-separated token per event:
//!
//! ```text
//! item   := pulse | delay | "G"
//! pulse  := ANGLE TARGET? AXIS
//! ANGLE  := "-"? number                     (degrees)
//! TARGET := "I" | "S"
//! AXIS   := "x" | "y" | "-x" | "-y" | "z" | "-z" | "@" number | "J"
//! delay  := "[" term ("+" term)* "]"
//! term   := digits? ("tau1" | "tau2") | number ("s" | "ms" | "us")
//! ```
//!
//! `J` (coupling evolution) is only valid without a target, `z` only with one.
//! `tau1 = 1/(4 delta)` and `tau2 = 1/(4 J)`.

mod builtin;
mod rewrite;

use std::fmt;

use thiserror::Error;

pub use builtin::{builtin, Builtin};
pub use rewrite::{
    check_equivalence, commute_z_left, composite_z, distance_to_unitary, drop_leading_z,
};

use crate::dynamics::{PulseEvent, PulseSequence};
use crate::error::{Error, Result};
use crate::qcore::{Spin, SpinSystem};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TimeUnit {
    Seconds,
    Milliseconds,
    Microseconds,
}

impl TimeUnit {
    fn suffix(self) -> &'static str {
        match self {
            TimeUnit::Seconds => "s",
            TimeUnit::Milliseconds => "ms",
            TimeUnit::Microseconds => "us",
        }
    }

    fn scale(self) -> f64 {
        match self {
            TimeUnit::Seconds => 1.0,
            TimeUnit::Milliseconds => 1e-3,
            TimeUnit::Microseconds => 1e-6,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum DelayTerm {
    Tau1(u32),
    Tau2(u32),
    Literal { value: f64, unit: TimeUnit },
}

/// Sum of symbolic and literal delay terms.
#[derive(Clone, Debug, PartialEq)]
pub struct DelayExpr {
    terms: Vec<DelayTerm>,
}

impl DelayExpr {
    pub fn new(terms: Vec<DelayTerm>) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::invalid("delay", "needs at least one term"));
        }
        for t in &terms {
            if let DelayTerm::Literal { value, .. } = t {
                if !(value.is_finite() && *value >= 0.0) {
                    return Err(Error::invalid(
                        "delay",
                        format!("{value} is not a duration"),
                    ));
                }
            }
        }
        Ok(DelayExpr { terms })
    }

    pub fn tau1(n: u32) -> Self {
        DelayExpr {
            terms: vec![DelayTerm::Tau1(n)],
        }
    }

    pub fn tau2(n: u32) -> Self {
        DelayExpr {
            terms: vec![DelayTerm::Tau2(n)],
        }
    }

    pub fn seconds(value: f64) -> Result<Self> {
        Self::new(vec![DelayTerm::Literal {
            value,
            unit: TimeUnit::Seconds,
        }])
    }

    pub fn terms(&self) -> &[DelayTerm] {
        &self.terms
    }

    /// Duration in seconds if the expression has no symbolic terms.
    pub fn literal_seconds(&self) -> Option<f64> {
        self.terms
            .iter()
            .map(|t| match t {
                DelayTerm::Literal { value, unit } => Some(value * unit.scale()),
                _ => None,
            })
            .sum()
    }

    pub fn resolve(&self, system: &SpinSystem) -> Result<f64> {
        let mut total = 0.0;
        for t in &self.terms {
            total += match t {
                DelayTerm::Tau1(n) => {
                    if system.delta.is_nan() || system.delta <= 0.0 {
                        return Err(Error::UnresolvedDelay(self.to_string()));
                    }
                    f64::from(*n) * system.tau1()
                }
                DelayTerm::Tau2(n) => {
                    if system.j.is_nan() || system.j <= 0.0 {
                        return Err(Error::UnresolvedDelay(self.to_string()));
                    }
                    f64::from(*n) * system.tau2()
                }
                DelayTerm::Literal { value, unit } => value * unit.scale(),
            };
        }
        Ok(total)
    }
}

impl fmt::Display for DelayExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("[")?;
        for (k, t) in self.terms.iter().enumerate() {
            if k > 0 {
                f.write_str("+")?;
            }
            match t {
                DelayTerm::Tau1(1) => f.write_str("tau1")?,
                DelayTerm::Tau2(1) => f.write_str("tau2")?,
                DelayTerm::Tau1(n) => write!(f, "{n}tau1")?,
                DelayTerm::Tau2(n) => write!(f, "{n}tau2")?,
                DelayTerm::Literal { value, unit } => write!(f, "{value}{}", unit.suffix())?,
            }
        }
        f.write_str("]")
    }
}

/// Lexical or syntactic error; `token` is 1-based, `offset` is a byte offset.
#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("token {token} `{text}` (byte {offset}): {reason}")]
pub struct ParseError {
    pub token: usize,
    pub offset: usize,
    pub text: String,
    pub reason: String,
}

fn parse_number(s: &str) -> Option<f64> {
    // digits with an optional fractional part; no exponent, no sign
    let mut seen_dot = false;
    let mut digits = 0;
    for ch in s.chars() {
        match ch {
            '0'..='9' => digits += 1,
            '.' if !seen_dot => seen_dot = true,
            _ => return None,
        }
    }
    if digits == 0 {
        return None;
    }
    s.parse().ok()
}

fn split_number(s: &str) -> (&str, &str) {
    let end = s
        .find(|ch: char| !(ch.is_ascii_digit() || ch == '.'))
        .unwrap_or(s.len());
    s.split_at(end)
}

fn parse_delay(inner: &str) -> std::result::Result<DelayExpr, String> {
    if inner.is_empty() {
        return Err("empty delay".into());
    }
    let mut terms = Vec::new();
    for term in inner.split('+') {
        let (num, rest) = split_number(term);
        let parsed = match rest {
            "tau1" | "tau2" => {
                let n = if num.is_empty() {
                    1
                } else {
                    num.parse::<u32>()
                        .map_err(|_| format!("`{num}` is not an integer multiplier"))?
                };
                if rest == "tau1" {
                    DelayTerm::Tau1(n)
                } else {
                    DelayTerm::Tau2(n)
                }
            }
            "s" | "ms" | "us" => {
                let value =
                    parse_number(num).ok_or_else(|| format!("`{term}` lacks a numeric value"))?;
                let unit = match rest {
                    "s" => TimeUnit::Seconds,
                    "ms" => TimeUnit::Milliseconds,
                    _ => TimeUnit::Microseconds,
                };
                DelayTerm::Literal { value, unit }
            }
            _ => return Err(format!("malformed delay term `{term}`")),
        };
        terms.push(parsed);
    }
    DelayExpr::new(terms).map_err(|e| e.to_string())
}

fn parse_pulse(token: &str) -> std::result::Result<PulseEvent, String> {
    let (negative, body) = match token.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, token),
    };
    let (num, rest) = split_number(body);
    let magnitude = parse_number(num).ok_or_else(|| "missing angle".to_string())?;
    let angle = if negative { -magnitude } else { magnitude };

    let (target, axis) = match rest.chars().next() {
        Some('I') => (Some(Spin::I), &rest[1..]),
        Some('S') => (Some(Spin::S), &rest[1..]),
        _ => (None, rest),
    };

    let transverse = |phase: f64| match target {
        Some(spin) => PulseEvent::selective(spin, angle, phase),
        None => PulseEvent::hard(angle, phase),
    };

    match axis {
        "x" => Ok(transverse(0.0)),
        "y" => Ok(transverse(90.0)),
        "-x" => Ok(transverse(180.0)),
        "-y" => Ok(transverse(270.0)),
        "z" | "-z" => {
            let spin =
                target.ok_or_else(|| "z rotations need a target spin (I or S)".to_string())?;
            let sign = if axis == "z" { 1.0 } else { -1.0 };
            Ok(PulseEvent::z_rotation(spin, sign * angle))
        }
        "J" => {
            if target.is_some() {
                return Err("coupling evolution takes no target spin".into());
            }
            Ok(PulseEvent::coupling(angle))
        }
        _ => {
            if let Some(phase) = axis.strip_prefix('@') {
                let phase = parse_number(phase).ok_or_else(|| format!("bad phase `{phase}`"))?;
                Ok(transverse(phase))
            } else if axis.is_empty() {
                Err("missing axis".into())
            } else {
                Err(format!("invalid axis `{axis}`"))
            }
        }
    }
}

/// Parses one sequence.
pub fn parse(source: &str) -> std::result::Result<PulseSequence, ParseError> {
    let mut events = Vec::new();
    let mut cursor = 0;
    for (k, token) in source.split_whitespace().enumerate() {
        let index = k + 1;
        let offset = cursor + source[cursor..].find(token).unwrap_or(0);
        cursor = offset + token.len();
        let err = |reason: String| ParseError {
            token: index,
            offset,
            text: token.to_string(),
            reason,
        };
        let event = if token == "G" {
            PulseEvent::Gradient
        } else if let Some(inner) = token.strip_prefix('[') {
            let inner = inner
                .strip_suffix(']')
                .ok_or_else(|| err("unterminated delay".into()))?;
            PulseEvent::Delay(parse_delay(inner).map_err(err)?)
        } else {
            parse_pulse(token).map_err(err)?
        };
        events.push(event);
    }
    Ok(PulseSequence::new(events))
}

fn fmt_phase_axis(phase: f64) -> String {
    match phase {
        0.0 => "x".into(),
        90.0 => "y".into(),
        180.0 => "-x".into(),
        270.0 => "-y".into(),
        p => format!("@{p}"),
    }
}

pub fn format_event(event: &PulseEvent) -> String {
    match event {
        PulseEvent::Hard { angle, phase } => format!("{angle}{}", fmt_phase_axis(*phase)),
        PulseEvent::Selective { spin, angle, phase } => {
            format!("{angle}{spin}{}", fmt_phase_axis(*phase))
        }
        PulseEvent::ZRotation { spin, angle } => {
            if *angle < 0.0 {
                format!("{}{spin}-z", -angle)
            } else {
                format!("{angle}{spin}z")
            }
        }
        PulseEvent::Coupling { angle } => format!("{angle}J"),
        PulseEvent::Delay(d) => d.to_string(),
        PulseEvent::Gradient => "G".into(),
    }
}

/// Canonical text of a sequence; `parse(&format(s)) == s` for canonical events.
pub fn format(seq: &PulseSequence) -> String {
    seq.events()
        .iter()
        .map(format_event)
        .collect::<Vec<_>>()
        .join(" ")
}

impl fmt::Display for PulseSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format(self))
    }
}

/// Error in a sequence file, with its 1-based line number.
#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("line {line}: {error}")]
pub struct FileParseError {
    pub line: usize,
    pub error: ParseError,
}

/// Parses a sequence file: one sequence per line, `#` starts a comment,
/// blank lines are skipped.
pub fn parse_file(text: &str) -> std::result::Result<Vec<PulseSequence>, FileParseError> {
    text.lines()
        .enumerate()
        .filter_map(|(k, line)| {
            let code = line.split('#').next().unwrap_or("").trim();
            (!code.is_empty()).then_some((k + 1, code))
        })
        .map(|(line, code)| parse(code).map_err(|error| FileParseError { line, error }))
        .collect()
}
