//! Two-level system dynamics under piecewise-constant drive.
//!
//! In the rotating frame each step is governed by
//! `H = (δ/2) σz + (Ω/2) (cos Φ σx + sin Φ σy)` with `|0⟩` the `+z` pole, so
//! a drive phase of 0 rotates about `+x` and a phase of `π/2` about `+y`.
//! Time is measured in µs and angular frequencies in rad/µs.
//!
//! Errors enter through [`ErrorParams`]: a scaled detuning `f = δ/Ω` and a
//! relative area error `g = Δθ/θ`, the latter applied either to the drive
//! amplitude or to the step durations.

use std::f64::consts::{PI, TAU};
use std::ops::Mul;

use num_complex::Complex64;

use crate::error::{invalid, Error, Result};

/// 2π × 10 kHz expressed in rad/µs.
pub const DEFAULT_RABI: f64 = TAU * 0.01;

/// One piecewise-constant segment of the drive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseStep {
    /// Drive amplitude relative to the nominal Rabi frequency.
    pub amplitude: f64,
    /// Drive phase in radians. Stored as given.
    pub phase: f64,
    /// Duration in µs.
    pub duration: f64,
}

impl PulseStep {
    pub fn new(amplitude: f64, phase: f64, duration: f64) -> Result<Self> {
        let step = PulseStep {
            amplitude,
            phase,
            duration,
        };
        step.validate()?;
        Ok(step)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.amplitude.is_finite() && self.amplitude >= 0.0) {
            return Err(invalid(format!("step amplitude must be finite and >= 0, got {}", self.amplitude)));
        }
        if !self.phase.is_finite() {
            return Err(invalid(format!("step phase must be finite, got {}", self.phase)));
        }
        if !(self.duration.is_finite() && self.duration >= 0.0) {
            return Err(invalid(format!("step duration must be finite and >= 0, got {}", self.duration)));
        }
        Ok(())
    }

    /// Nominal rotation angle of this step, `amplitude · Ω · duration`.
    pub fn area(&self, rabi_nominal: f64) -> f64 {
        self.amplitude * rabi_nominal * self.duration
    }
}

/// An ordered, non-empty list of steps driven at a common nominal Rabi
/// frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseSequence {
    steps: Vec<PulseStep>,
    rabi_nominal: f64,
}

impl PulseSequence {
    pub fn new(steps: Vec<PulseStep>, rabi_nominal: f64) -> Result<Self> {
        if steps.is_empty() {
            return Err(invalid("pulse sequence must contain at least one step"));
        }
        if !(rabi_nominal.is_finite() && rabi_nominal > 0.0) {
            return Err(invalid(format!("nominal Rabi frequency must be > 0, got {rabi_nominal}")));
        }
        for s in &steps {
            s.validate()?;
        }
        Ok(PulseSequence {
            steps,
            rabi_nominal,
        })
    }

    pub fn steps(&self) -> &[PulseStep] {
        &self.steps
    }

    pub fn into_steps(self) -> Vec<PulseStep> {
        self.steps
    }

    pub fn rabi_nominal(&self) -> f64 {
        self.rabi_nominal
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Total nominal pulse area `∫ Ω dt` in radians.
    pub fn nominal_area(&self) -> f64 {
        self.steps.iter().map(|s| s.area(self.rabi_nominal)).sum()
    }

    /// Total duration in µs.
    pub fn duration(&self) -> f64 {
        self.steps.iter().map(|s| s.duration).sum()
    }

    /// Appends the steps of `other`, which must share the Rabi frequency.
    pub fn then(mut self, other: &PulseSequence) -> Result<Self> {
        if (other.rabi_nominal - self.rabi_nominal).abs() > 1e-15 * self.rabi_nominal {
            return Err(invalid("cannot concatenate sequences with different Rabi frequencies"));
        }
        self.steps.extend_from_slice(&other.steps);
        Ok(self)
    }

    /// Adds `delta` to every step phase.
    pub fn phase_shifted(&self, delta: f64) -> Self {
        let steps = self
            .steps
            .iter()
            .map(|s| PulseStep {
                phase: s.phase + delta,
                ..*s
            })
            .collect();
        PulseSequence {
            steps,
            rabi_nominal: self.rabi_nominal,
        }
    }

    /// The error-free inverse: steps in reverse order, each phase shifted by π.
    pub fn inverse(&self) -> Self {
        let steps = self
            .steps
            .iter()
            .rev()
            .map(|s| PulseStep {
                phase: s.phase + PI,
                ..*s
            })
            .collect();
        PulseSequence {
            steps,
            rabi_nominal: self.rabi_nominal,
        }
    }
}

/// How the area error `g` is realized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AreaErrorMode {
    /// Amplitudes scaled by `1 + g`, durations unchanged.
    #[default]
    AmplitudeScale,
    /// Durations scaled by `1 + g`, amplitudes unchanged.
    DurationScale,
}

/// Controlled error pair `(f, g)`.
///
/// The detuning is always `δ = f · Ω_nominal`; it is never scaled by `g` or by
/// the step amplitude.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ErrorParams {
    pub f: f64,
    pub g: f64,
    pub mode: AreaErrorMode,
}

impl ErrorParams {
    pub const NONE: ErrorParams = ErrorParams {
        f: 0.0,
        g: 0.0,
        mode: AreaErrorMode::AmplitudeScale,
    };

    pub fn new(f: f64, g: f64) -> Self {
        ErrorParams {
            f,
            g,
            mode: AreaErrorMode::AmplitudeScale,
        }
    }

    pub fn with_mode(self, mode: AreaErrorMode) -> Self {
        ErrorParams { mode, ..self }
    }

    /// `(amplitude factor, duration factor)`.
    pub fn scale_factors(&self) -> (f64, f64) {
        match self.mode {
            AreaErrorMode::AmplitudeScale => (1.0 + self.g, 1.0),
            AreaErrorMode::DurationScale => (1.0, 1.0 + self.g),
        }
    }
}

/// Element of SU(2), stored as `[[a, -b*], [b, a*]]` with `|a|² + |b|² = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation {
    a: Complex64,
    b: Complex64,
}

impl Rotation {
    pub const IDENTITY: Rotation = Rotation {
        a: Complex64::new(1.0, 0.0),
        b: Complex64::new(0.0, 0.0),
    };

    /// `exp(-i m·σ)` for a real 3-vector `m`. The rotation angle on the Bloch
    /// sphere is `2|m|` about `m/|m|`.
    pub fn exp_i_sigma(m: [f64; 3]) -> Self {
        let alpha = (m[0] * m[0] + m[1] * m[1] + m[2] * m[2]).sqrt();
        if alpha == 0.0 {
            return Rotation::IDENTITY;
        }
        let (sin, cos) = alpha.sin_cos();
        let k = sin / alpha;
        Rotation {
            a: Complex64::new(cos, -k * m[2]),
            b: Complex64::new(k * m[1], -k * m[0]),
        }
    }

    /// Right-handed rotation by `angle` about the (not necessarily unit)
    /// `axis` on the Bloch sphere.
    pub fn from_axis_angle(axis: [f64; 3], angle: f64) -> Self {
        let norm = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
        if norm == 0.0 {
            return Rotation::IDENTITY;
        }
        let s = 0.5 * angle / norm;
        Rotation::exp_i_sigma([axis[0] * s, axis[1] * s, axis[2] * s])
    }

    pub fn a(&self) -> Complex64 {
        self.a
    }

    pub fn b(&self) -> Complex64 {
        self.b
    }

    /// Row-major 2×2 matrix in the `(|0⟩, |1⟩)` basis.
    pub fn matrix(&self) -> [[Complex64; 2]; 2] {
        [[self.a, -self.b.conj()], [self.b, self.a.conj()]]
    }

    pub fn dagger(&self) -> Self {
        Rotation {
            a: self.a.conj(),
            b: -self.b,
        }
    }

    pub fn determinant(&self) -> Complex64 {
        self.a * self.a.conj() + self.b * self.b.conj()
    }

    /// Largest element-wise deviation of `U†U` from the identity.
    pub fn unitarity_defect(&self) -> f64 {
        let m = self.matrix();
        let mut worst: f64 = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                let mut acc = Complex64::new(0.0, 0.0);
                for k in 0..2 {
                    acc += m[k][i].conj() * m[k][j];
                }
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((acc - target).norm());
            }
        }
        worst
    }

    /// Applies the rotation to a pure amplitude pair.
    pub fn apply(&self, c: [Complex64; 2]) -> [Complex64; 2] {
        [
            self.a * c[0] - self.b.conj() * c[1],
            self.b * c[0] + self.a.conj() * c[1],
        ]
    }

    /// Applies the adjoint to a pure amplitude pair.
    pub fn apply_dagger(&self, c: [Complex64; 2]) -> [Complex64; 2] {
        [
            self.a.conj() * c[0] + self.b.conj() * c[1],
            -self.b * c[0] + self.a * c[1],
        ]
    }

    /// Largest element-wise distance between the two matrices.
    pub fn distance(&self, other: &Rotation) -> f64 {
        (self.a - other.a).norm().max((self.b - other.b).norm())
    }
}

impl Mul for Rotation {
    type Output = Rotation;

    /// Matrix product `self · rhs` (apply `rhs` first).
    fn mul(self, rhs: Rotation) -> Rotation {
        Rotation {
            a: self.a * rhs.a - self.b.conj() * rhs.b,
            b: self.b * rhs.a + self.a.conj() * rhs.b,
        }
    }
}

/// Hermitian 2×2 density matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityMatrix {
    rho: [[Complex64; 2]; 2],
}

impl DensityMatrix {
    pub fn new(rho: [[Complex64; 2]; 2]) -> Result<Self> {
        let herm = (rho[0][1] - rho[1][0].conj()).norm() + rho[0][0].im.abs() + rho[1][1].im.abs();
        if herm > 1e-10 {
            return Err(invalid("density matrix must be Hermitian"));
        }
        let dm = DensityMatrix { rho };
        if (dm.trace() - 1.0).abs() > 1e-10 {
            return Err(invalid(format!("density matrix trace must be 1, got {}", dm.trace())));
        }
        if dm.bloch_vector_len() > 1.0 + 1e-10 {
            return Err(invalid("density matrix eigenvalues must lie in [0, 1]"));
        }
        Ok(dm)
    }

    /// `a0 |0⟩⟨0| + a1 |1⟩⟨1|`.
    pub fn diagonal(a0: f64, a1: f64) -> Result<Self> {
        DensityMatrix::new([
            [Complex64::new(a0, 0.0), Complex64::new(0.0, 0.0)],
            [Complex64::new(0.0, 0.0), Complex64::new(a1, 0.0)],
        ])
    }

    pub fn elements(&self) -> [[Complex64; 2]; 2] {
        self.rho
    }

    pub fn trace(&self) -> f64 {
        self.rho[0][0].re + self.rho[1][1].re
    }

    pub fn bloch_vector(&self) -> [f64; 3] {
        let off = self.rho[1][0];
        [2.0 * off.re, 2.0 * off.im, self.rho[0][0].re - self.rho[1][1].re]
    }

    fn bloch_vector_len(&self) -> f64 {
        let r = self.bloch_vector();
        (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt()
    }

    /// `U ρ U†`.
    pub fn evolve(&self, u: &Rotation) -> Self {
        let m = u.matrix();
        let mut tmp = [[Complex64::new(0.0, 0.0); 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    tmp[i][j] += m[i][k] * self.rho[k][j];
                }
            }
        }
        let mut out = [[Complex64::new(0.0, 0.0); 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    out[i][j] += tmp[i][k] * m[j][k].conj();
                }
            }
        }
        DensityMatrix { rho: out }
    }
}

/// State of the two-level system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum QubitState {
    Pure([Complex64; 2]),
    Mixed(DensityMatrix),
}

impl QubitState {
    pub fn ground() -> Self {
        QubitState::Pure([Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)])
    }

    pub fn excited() -> Self {
        QubitState::Pure([Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)])
    }

    pub fn pure(c0: Complex64, c1: Complex64) -> Result<Self> {
        let n = c0.norm_sqr() + c1.norm_sqr();
        if (n - 1.0).abs() > 1e-10 {
            return Err(invalid(format!("pure state must be normalized, |c0|²+|c1|² = {n}")));
        }
        Ok(QubitState::Pure([c0, c1]))
    }

    /// `cos(θ/2)|0⟩ + e^{iφ} sin(θ/2)|1⟩`.
    pub fn from_bloch_angles(theta: f64, phi: f64) -> Self {
        let (s, c) = (0.5 * theta).sin_cos();
        QubitState::Pure([Complex64::new(c, 0.0), Complex64::from_polar(s, phi)])
    }

    pub fn mixed(rho: DensityMatrix) -> Self {
        QubitState::Mixed(rho)
    }

    /// Density matrix of this state.
    pub fn density(&self) -> DensityMatrix {
        match self {
            QubitState::Pure(c) => DensityMatrix {
                rho: [
                    [c[0] * c[0].conj(), c[0] * c[1].conj()],
                    [c[1] * c[0].conj(), c[1] * c[1].conj()],
                ],
            },
            QubitState::Mixed(rho) => *rho,
        }
    }

    /// Probability of detecting `|1⟩`.
    pub fn population_one(&self) -> f64 {
        match self {
            QubitState::Pure(c) => c[1].norm_sqr(),
            QubitState::Mixed(rho) => rho.rho[1][1].re,
        }
    }

    /// `|c0|²+|c1|²` or `Tr ρ`.
    pub fn trace(&self) -> f64 {
        match self {
            QubitState::Pure(c) => c[0].norm_sqr() + c[1].norm_sqr(),
            QubitState::Mixed(rho) => rho.trace(),
        }
    }

    pub fn bloch_vector(&self) -> [f64; 3] {
        self.density().bloch_vector()
    }

    pub fn evolve(&self, u: &Rotation) -> Self {
        match self {
            QubitState::Pure(c) => QubitState::Pure(u.apply(*c)),
            QubitState::Mixed(rho) => QubitState::Mixed(rho.evolve(u)),
        }
    }
}

/// Generator `m` with `U = exp(-i m·σ)` for one step, i.e. `m = t h / 2` with
/// `h = (Ω cos Φ, Ω sin Φ, δ)`.
pub fn step_generator(step: &PulseStep, errors: &ErrorParams, rabi_nominal: f64) -> [f64; 3] {
    let (amp_scale, dur_scale) = errors.scale_factors();
    let omega = amp_scale * step.amplitude * rabi_nominal;
    let delta = errors.f * rabi_nominal;
    let half_t = 0.5 * dur_scale * step.duration;
    let (sin, cos) = step.phase.sin_cos();
    [half_t * omega * cos, half_t * omega * sin, half_t * delta]
}

/// Closed-form propagator of a single constant step.
pub fn step_propagator(step: &PulseStep, errors: &ErrorParams, rabi_nominal: f64) -> Rotation {
    Rotation::exp_i_sigma(step_generator(step, errors, rabi_nominal))
}

/// Total propagator `U_n ⋯ U_1` of a sequence under the given errors.
pub fn sequence_propagator(seq: &PulseSequence, errors: &ErrorParams) -> Rotation {
    seq.steps().iter().fold(Rotation::IDENTITY, |acc, step| {
        step_propagator(step, errors, seq.rabi_nominal()) * acc
    })
}

/// Evolves `initial` through every step of `seq` in time order.
pub fn propagate(seq: &PulseSequence, errors: &ErrorParams, initial: &QubitState) -> QubitState {
    initial.evolve(&sequence_propagator(seq, errors))
}

/// Bloch-sphere angles `(θm, φm)` with `θm ∈ [0, π]`, `φm ∈ [-π, π]`.
///
/// At the poles `φm` is returned as 0.
pub fn bloch_angles(state: &QubitState) -> Result<(f64, f64)> {
    match state {
        QubitState::Pure(c) => {
            let (r0, r1) = (c[0].norm(), c[1].norm());
            let theta = 2.0 * r1.atan2(r0);
            let phi = if r0 * r1 < 1e-14 {
                0.0
            } else {
                wrap_angle(c[1].arg() - c[0].arg())
            };
            Ok((theta, phi))
        }
        QubitState::Mixed(rho) => {
            let r = rho.bloch_vector();
            let transverse = r[0].hypot(r[1]);
            let len = transverse.hypot(r[2]);
            if len <= 1e-9 {
                return Err(Error::DegenerateState(len));
            }
            let theta = transverse.atan2(r[2]);
            let phi = if transverse / len < 1e-14 { 0.0 } else { r[1].atan2(r[0]) };
            Ok((theta, phi))
        }
    }
}

/// Wraps an angle into `[-π, π]`.
pub fn wrap_angle(x: f64) -> f64 {
    let y = (x + PI).rem_euclid(TAU) - PI;
    if y == -PI && x > 0.0 {
        PI
    } else {
        y
    }
}
