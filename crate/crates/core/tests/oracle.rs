//! Closed-form propagation checked against brute-force time stepping of the
//! Schrödinger equation, and against values frozen from an independent
//! adaptive high-order ODE integration.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use robustpulse::fidelity::{state_fidelity, TargetRotation};
use robustpulse::pulses::{bb1, corpse_pi, rectangular, scrofulous_pi, Bb1Placement};
use robustpulse::qubit::{propagate, AreaErrorMode, ErrorParams, PulseSequence, PulseStep, QubitState, DEFAULT_RABI};

type State = [Complex64; 2];

/// `dψ/dt = −i H ψ` with `H = (δ/2)σz + (Ω/2)(cos Φ σx + sin Φ σy)`.
fn derivative(psi: &State, omega: f64, phase: f64, delta: f64) -> State {
    let i = Complex64::i();
    let off = 0.5 * omega * Complex64::from_polar(1.0, -phase);
    let h00 = 0.5 * delta;
    [
        -i * (h00 * psi[0] + off * psi[1]),
        -i * (off.conj() * psi[0] - h00 * psi[1]),
    ]
}

fn axpy(psi: &State, k: &State, h: f64) -> State {
    [psi[0] + k[0] * h, psi[1] + k[1] * h]
}

fn rk4(seq: &PulseSequence, errors: &ErrorParams, dt: f64) -> State {
    let (amp_scale, dur_scale) = errors.scale_factors();
    let rabi = seq.rabi_nominal();
    let delta = errors.f * rabi;
    let mut psi = [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)];
    for step in seq.steps() {
        let omega = amp_scale * step.amplitude * rabi;
        let total = dur_scale * step.duration;
        let n = (total / dt).ceil().max(1.0) as usize;
        let h = total / n as f64;
        for _ in 0..n {
            let k1 = derivative(&psi, omega, step.phase, delta);
            let k2 = derivative(&axpy(&psi, &k1, 0.5 * h), omega, step.phase, delta);
            let k3 = derivative(&axpy(&psi, &k2, 0.5 * h), omega, step.phase, delta);
            let k4 = derivative(&axpy(&psi, &k3, h), omega, step.phase, delta);
            for c in 0..2 {
                psi[c] += (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]) * (h / 6.0);
            }
        }
    }
    psi
}

fn rk4_fidelity(seq: &PulseSequence, errors: &ErrorParams, target: &TargetRotation) -> f64 {
    let psi = rk4(seq, errors, 0.005);
    let norm = (psi[0].norm_sqr() + psi[1].norm_sqr()).sqrt();
    assert!((norm - 1.0).abs() < 1e-9, "rk4 norm drift {norm}");
    state_fidelity(target, &QubitState::pure(psi[0] / norm, psi[1] / norm).unwrap())
}

fn exact_fidelity(seq: &PulseSequence, errors: &ErrorParams, target: &TargetRotation) -> f64 {
    state_fidelity(target, &propagate(seq, errors, &QubitState::ground()))
}

const PI_TARGET: TargetRotation = TargetRotation { theta: PI, phi: 0.0 };

#[test]
fn detuned_rectangular_pi_constant() {
    let seq = rectangular(PI, 0.0, DEFAULT_RABI, 1).unwrap();
    let errors = ErrorParams::new(1.0, 0.0);
    let exact = exact_fidelity(&seq, &errors, &PI_TARGET);
    assert!((exact - 0.316_563_835_510_353_9).abs() < 1e-12, "{exact}");
    assert!((rk4_fidelity(&seq, &errors, &PI_TARGET) - exact).abs() < 1e-10);
    // adaptive 8th-order reference
    assert!((exact - 0.316_563_835_510_364_16).abs() < 1e-12);
}

#[test]
fn composite_pulses_match_time_stepping() {
    let half = TargetRotation::new(FRAC_PI_2, -FRAC_PI_2);
    let cases: Vec<(PulseSequence, ErrorParams, TargetRotation, f64)> = vec![
        (corpse_pi(0.0, DEFAULT_RABI).unwrap(), ErrorParams::new(0.5, 0.0), PI_TARGET, 0.902_291_111_388_365_9),
        (scrofulous_pi(0.0, DEFAULT_RABI).unwrap(), ErrorParams::new(0.0, 0.2), PI_TARGET, 0.999_129_248_593_732_1),
        (
            bb1(FRAC_PI_2, 0.0, Bb1Placement::Split, DEFAULT_RABI).unwrap(),
            ErrorParams::new(0.2, 0.1),
            half,
            0.997_399_297_654_366_5,
        ),
        (
            corpse_pi(0.0, DEFAULT_RABI).unwrap(),
            ErrorParams::new(0.3, -0.1).with_mode(AreaErrorMode::DurationScale),
            PI_TARGET,
            0.967_728_420_585_433_8,
        ),
    ];
    for (seq, errors, target, frozen) in cases {
        let exact = exact_fidelity(&seq, &errors, &target);
        let stepped = rk4_fidelity(&seq, &errors, &target);
        assert!((exact - stepped).abs() < 1e-10, "exact {exact} vs rk4 {stepped}");
        assert!((exact - frozen).abs() < 1e-11, "exact {exact} vs frozen {frozen}");
    }
}

#[test]
fn shaped_pulse_matches_time_stepping() {
    let steps = (0..25)
        .map(|k| {
            let x = k as f64;
            PulseStep::new(0.5 + 0.4 * (0.7 * x).sin(), 0.3 * x, 2.0 + 0.1 * x).unwrap()
        })
        .collect();
    let seq = PulseSequence::new(steps, DEFAULT_RABI).unwrap();
    for (f, g) in [(0.0, 0.0), (-0.8, 0.3), (0.6, -0.35)] {
        for mode in [AreaErrorMode::AmplitudeScale, AreaErrorMode::DurationScale] {
            let errors = ErrorParams::new(f, g).with_mode(mode);
            let target = TargetRotation::new(1.1, 0.4);
            let exact = exact_fidelity(&seq, &errors, &target);
            assert!((exact - rk4_fidelity(&seq, &errors, &target)).abs() < 1e-10);
        }
    }
}
