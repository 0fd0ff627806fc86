//! Rectangular and composite pulse constructors.
//!
//! Composite segments are emitted as one step each since the step
//! propagator is exact for constant segments. Angle literals are written in
//! degrees and converted once.

use std::f64::consts::{PI, TAU};

use crate::error::{invalid, Error, Result};
use crate::qubit::{PulseSequence, PulseStep};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CompositeFamily {
    Rectangular,
    CorpsePi,
    ScrofulousPi,
    Bb1,
}

/// Where the correcting `W` block of a BB1 sequence sits relative to the
/// nominal rotation (time order).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Bb1Placement {
    /// `W` then `R(θ)`.
    WBefore,
    /// `R(θ)` then `W`.
    WAfter,
    /// `R(θ/2)`, `W`, `R(θ/2)`.
    #[default]
    Split,
}

/// Declarative description of a pulse from the library.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompositeSpec {
    pub family: CompositeFamily,
    pub target_theta: f64,
    pub target_phi: f64,
    pub bb1_placement: Bb1Placement,
}

impl CompositeSpec {
    pub fn new(family: CompositeFamily, target_theta: f64, target_phi: f64) -> Self {
        CompositeSpec {
            family,
            target_theta,
            target_phi,
            bb1_placement: Bb1Placement::default(),
        }
    }

    pub fn with_placement(self, placement: Bb1Placement) -> Self {
        CompositeSpec {
            bb1_placement: placement,
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.target_theta > 0.0 && self.target_theta <= TAU + 1e-12) {
            return Err(Error::InvalidTheta(self.target_theta));
        }
        if !self.target_phi.is_finite() {
            return Err(invalid("target phase must be finite"));
        }
        match self.family {
            CompositeFamily::CorpsePi | CompositeFamily::ScrofulousPi if (self.target_theta - PI).abs() > 1e-12 => Err(
                invalid(format!("{:?} is only defined for theta = pi, got {}", self.family, self.target_theta)),
            ),
            _ => Ok(()),
        }
    }

    /// Builds the sequence. Rectangular pulses use a single step.
    pub fn build(&self, rabi_nominal: f64) -> Result<PulseSequence> {
        self.validate()?;
        match self.family {
            CompositeFamily::Rectangular => rectangular(self.target_theta, self.target_phi, rabi_nominal, 1),
            CompositeFamily::CorpsePi => corpse_pi(self.target_phi, rabi_nominal),
            CompositeFamily::ScrofulousPi => scrofulous_pi(self.target_phi, rabi_nominal),
            CompositeFamily::Bb1 => bb1(self.target_theta, self.target_phi, self.bb1_placement, rabi_nominal),
        }
    }
}

/// Resonant full-amplitude step producing rotation `area` about the axis at
/// azimuth `phase`.
fn segment(area: f64, phase: f64, rabi_nominal: f64) -> PulseStep {
    PulseStep {
        amplitude: 1.0,
        phase,
        duration: area / rabi_nominal,
    }
}

fn check_rabi(rabi_nominal: f64) -> Result<()> {
    if rabi_nominal.is_finite() && rabi_nominal > 0.0 {
        Ok(())
    } else {
        Err(invalid(format!("nominal Rabi frequency must be > 0, got {rabi_nominal}")))
    }
}

/// `n_steps` equal unit-amplitude steps of total area `theta` at phase `phi`.
pub fn rectangular(theta: f64, phi: f64, rabi_nominal: f64, n_steps: usize) -> Result<PulseSequence> {
    check_rabi(rabi_nominal)?;
    if !(theta.is_finite() && theta > 0.0) {
        return Err(Error::InvalidTheta(theta));
    }
    if n_steps == 0 {
        return Err(invalid("rectangular pulse needs at least one step"));
    }
    let step = segment(theta / n_steps as f64, phi, rabi_nominal);
    PulseSequence::new(vec![step; n_steps], rabi_nominal)
}

/// CORPSE π pulse: 420°, 300°, 60° with the middle segment phase-inverted.
pub fn corpse_pi(phi: f64, rabi_nominal: f64) -> Result<PulseSequence> {
    check_rabi(rabi_nominal)?;
    let steps = [(420.0, 0.0), (300.0, PI), (60.0, 0.0)]
        .iter()
        .map(|&(deg, offset): &(f64, f64)| segment(deg.to_radians(), phi + offset, rabi_nominal))
        .collect();
    PulseSequence::new(steps, rabi_nominal)
}

/// SCROFULOUS π pulse: three 180° segments at phases 60°, 300°, 60°.
pub fn scrofulous_pi(phi: f64, rabi_nominal: f64) -> Result<PulseSequence> {
    check_rabi(rabi_nominal)?;
    let steps = [(180.0, 60.0), (180.0, 300.0), (180.0, 60.0)]
        .iter()
        .map(|&(deg, phase_deg): &(f64, f64)| segment(deg.to_radians(), phi + phase_deg.to_radians(), rabi_nominal))
        .collect();
    PulseSequence::new(steps, rabi_nominal)
}

/// Phases `(φ1, φ2)` of the BB1 correction block for a rotation by `theta`.
pub fn bb1_phases(theta: f64) -> Result<(f64, f64)> {
    let c = -theta / (4.0 * PI);
    if !(-1.0..=1.0).contains(&c) {
        return Err(Error::InvalidTheta(theta));
    }
    let phi1 = c.acos();
    Ok((phi1, 3.0 * phi1))
}

/// BB1 broadband sequence `180_{φ1} 360_{φ2} 180_{φ1}` combined with the
/// nominal rotation according to `placement`.
pub fn bb1(theta: f64, phi: f64, placement: Bb1Placement, rabi_nominal: f64) -> Result<PulseSequence> {
    check_rabi(rabi_nominal)?;
    if !(theta > 0.0 && theta <= TAU + 1e-12) {
        return Err(Error::InvalidTheta(theta));
    }
    let (phi1, phi2) = bb1_phases(theta)?;
    let w = [
        segment(PI, phi + phi1, rabi_nominal),
        segment(TAU, phi + phi2, rabi_nominal),
        segment(PI, phi + phi1, rabi_nominal),
    ];
    let mut steps = Vec::with_capacity(5);
    match placement {
        Bb1Placement::WBefore => {
            steps.extend_from_slice(&w);
            steps.push(segment(theta, phi, rabi_nominal));
        }
        Bb1Placement::WAfter => {
            steps.push(segment(theta, phi, rabi_nominal));
            steps.extend_from_slice(&w);
        }
        Bb1Placement::Split => {
            steps.push(segment(0.5 * theta, phi, rabi_nominal));
            steps.extend_from_slice(&w);
            steps.push(segment(0.5 * theta, phi, rabi_nominal));
        }
    }
    PulseSequence::new(steps, rabi_nominal)
}
