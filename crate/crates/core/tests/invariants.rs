use std::f64::consts::{FRAC_PI_2, PI, TAU};

use proptest::prelude::*;
use robustpulse::fidelity::{
    fidelity_from_angles, interpolate, linspace, state_fidelity, sweep_grid, threshold_mask, Preparation,
    TargetRotation,
};
use robustpulse::io::{parse_angle, parse_pulse_file, write_pulse_file};
use robustpulse::pulses::{bb1, corpse_pi, rectangular, scrofulous_pi, Bb1Placement};
use robustpulse::qubit::{
    bloch_angles, propagate, sequence_propagator, step_propagator, wrap_angle, AreaErrorMode, ErrorParams,
    PulseSequence, PulseStep, QubitState, Rotation, DEFAULT_RABI,
};

fn rabi_p1(f: f64, g: f64, theta: f64) -> f64 {
    let s = (1.0 + g) * (1.0 + g);
    let w = (s + f * f).sqrt();
    s / (s + f * f) * (0.5 * theta * w).sin().powi(2)
}

fn step_strategy() -> impl Strategy<Value = PulseStep> {
    (0.0..1.5f64, -TAU..TAU, 0.01..40.0f64).prop_map(|(a, p, d)| PulseStep::new(a, p, d).unwrap())
}

fn sequence_strategy(max_len: usize) -> impl Strategy<Value = PulseSequence> {
    prop::collection::vec(step_strategy(), 1..max_len).prop_map(|s| PulseSequence::new(s, DEFAULT_RABI).unwrap())
}

fn mode_strategy() -> impl Strategy<Value = AreaErrorMode> {
    prop_oneof![Just(AreaErrorMode::AmplitudeScale), Just(AreaErrorMode::DurationScale)]
}

fn errors_strategy() -> impl Strategy<Value = ErrorParams> {
    (-2.0..2.0f64, -0.9..0.9f64, mode_strategy()).prop_map(|(f, g, m)| ErrorParams::new(f, g).with_mode(m))
}

fn fidelity(seq: &PulseSequence, target: &TargetRotation, errors: &ErrorParams) -> f64 {
    state_fidelity(target, &propagate(seq, errors, &QubitState::ground()))
}

proptest! {
    #[test]
    fn propagators_are_unitary(seq in sequence_strategy(30), errors in errors_strategy()) {
        let u = sequence_propagator(&seq, &errors);
        prop_assert!(u.unitarity_defect() < 1e-12);
        for step in seq.steps() {
            prop_assert!(step_propagator(step, &errors, DEFAULT_RABI).unitarity_defect() < 1e-12);
        }
    }

    #[test]
    fn splitting_a_step_preserves_its_propagator(step in step_strategy(), n in 1usize..=10_000, errors in errors_strategy()) {
        let whole = step_propagator(&step, &errors, DEFAULT_RABI);
        let piece = PulseStep::new(step.amplitude, step.phase, step.duration / n as f64).unwrap();
        let split = PulseSequence::new(vec![piece; n], DEFAULT_RABI).unwrap();
        prop_assert!(sequence_propagator(&split, &errors).distance(&whole) < 1e-10);
    }

    #[test]
    fn rectangular_pulses_follow_the_rabi_formula(
        theta in 1e-6..TAU,
        f in -2.0..2.0f64,
        g in -0.9..0.9f64,
        phase in -PI..PI,
        n in 1usize..8,
    ) {
        let seq = rectangular(theta, phase, DEFAULT_RABI, n).unwrap();
        let p = propagate(&seq, &ErrorParams::new(f, g), &QubitState::ground()).population_one();
        prop_assert!((p - rabi_p1(f, g, theta)).abs() < 1e-10);
    }

    #[test]
    fn area_modes_agree_on_resonance(seq in sequence_strategy(20), g in -0.9..0.9f64) {
        let a = sequence_propagator(&seq, &ErrorParams::new(0.0, g));
        let d = sequence_propagator(&seq, &ErrorParams::new(0.0, g).with_mode(AreaErrorMode::DurationScale));
        prop_assert!(a.distance(&d) < 1e-12);
    }

    #[test]
    fn trace_is_preserved(seq in sequence_strategy(20), errors in errors_strategy(), a0 in 0.0..=1.0f64) {
        let prep = Preparation::from_a0(a0).unwrap();
        let out = propagate(&seq, &errors, &prep.initial_state());
        prop_assert!((out.trace() - 1.0).abs() < 1e-12);
        let r = out.bloch_vector();
        prop_assert!((r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt() <= (2.0 * a0 - 1.0).abs() + 1e-12);
    }

    #[test]
    fn global_phase_shift_rotates_the_azimuth(
        seq in sequence_strategy(15),
        errors in errors_strategy(),
        shift in -PI..PI,
        theta in 0.0..=PI,
        phi in -PI..PI,
    ) {
        let target = TargetRotation::new(theta, phi);
        let shifted_target = TargetRotation::new(theta, phi + shift);
        let before = fidelity(&seq, &target, &errors);
        let after = fidelity(&seq.phase_shifted(shift), &shifted_target, &errors);
        prop_assert!((before - after).abs() < 1e-12);
        let transfer = TargetRotation::new(PI, 0.0);
        prop_assert!((fidelity(&seq, &transfer, &errors) - fidelity(&seq.phase_shifted(shift), &transfer, &errors)).abs() < 1e-12);
    }

    #[test]
    fn inverse_undoes_the_sequence_with_opposite_detuning(seq in sequence_strategy(15), f in -1.0..1.0f64, g in -0.5..0.5f64) {
        let u = sequence_propagator(&seq, &ErrorParams::new(f, g));
        let v = sequence_propagator(&seq.inverse(), &ErrorParams::new(-f, g));
        prop_assert!((v * u).distance(&Rotation::IDENTITY) < 1e-10);
    }

    #[test]
    fn closed_form_fidelity_matches_overlap(theta in 0.0..=PI, phi in -PI..PI, tm in 0.0..=PI, pm in -PI..PI) {
        let target = TargetRotation::new(theta, phi);
        let state = QubitState::from_bloch_angles(tm, pm);
        prop_assert!((state_fidelity(&target, &state) - fidelity_from_angles(&target, tm, pm)).abs() < 1e-12);
    }

    #[test]
    fn bloch_angles_round_trip(theta in 1e-3..(PI - 1e-3), phi in -PI..PI) {
        let (t, p) = bloch_angles(&QubitState::from_bloch_angles(theta, phi)).unwrap();
        prop_assert!((t - theta).abs() < 1e-10);
        prop_assert!(wrap_angle(p - phi).abs() < 1e-10);
    }

    #[test]
    fn transfer_grids_are_symmetric_in_detuning(theta in 0.1..TAU, g_mode in mode_strategy()) {
        let axis = linspace(-1.0, 1.0, 9);
        let target = TargetRotation::new(PI, 0.0);
        for seq in [rectangular(theta, 0.0, DEFAULT_RABI, 1).unwrap(), corpse_pi(0.0, DEFAULT_RABI).unwrap()] {
            let grid = sweep_grid(&seq, &target, &Preparation::PURE, &axis, &linspace(-0.4, 0.4, 5), g_mode).unwrap();
            for i in 0..axis.len() {
                for j in 0..5 {
                    prop_assert!((grid.value(i, j) - grid.value(axis.len() - 1 - i, j)).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn masks_shrink_as_the_ratio_grows(seq in sequence_strategy(8), r1 in 0.0..1.1f64, r2 in 0.0..1.1f64) {
        let (lo, hi) = if r1 <= r2 { (r1, r2) } else { (r2, r1) };
        let grid = sweep_grid(
            &seq,
            &TargetRotation::new(PI, 0.0),
            &Preparation::PURE,
            &linspace(-1.0, 1.0, 7),
            &linspace(-0.4, 0.4, 5),
            AreaErrorMode::AmplitudeScale,
        )
        .unwrap();
        prop_assume!(grid.reference() > 0.0);
        let strict = threshold_mask(&grid, hi).unwrap();
        let loose = threshold_mask(&grid, lo).unwrap();
        prop_assert!(strict.is_subset_of(&loose));
    }

    #[test]
    fn interpolation_stays_within_cell_bounds(seq in sequence_strategy(6), f in -1.0..=1.0f64, g in -0.4..=0.4f64) {
        let fa = linspace(-1.0, 1.0, 5);
        let ga = linspace(-0.4, 0.4, 5);
        let grid = sweep_grid(&seq, &TargetRotation::new(1.0, 0.5), &Preparation::PURE, &fa, &ga, AreaErrorMode::AmplitudeScale).unwrap();
        let v = interpolate(&grid, f, g).unwrap();
        let i = fa.iter().rposition(|&x| x <= f).unwrap().min(fa.len() - 2);
        let j = ga.iter().rposition(|&x| x <= g).unwrap().min(ga.len() - 2);
        let corners = [grid.value(i, j), grid.value(i + 1, j), grid.value(i, j + 1), grid.value(i + 1, j + 1)];
        let lo = corners.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = corners.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
        for (ii, &fv) in fa.iter().enumerate() {
            for (jj, &gv) in ga.iter().enumerate() {
                prop_assert_eq!(interpolate(&grid, fv, gv).unwrap(), grid.value(ii, jj));
            }
        }
    }

    #[test]
    fn pulse_files_round_trip(seq in sequence_strategy(40), comment in "[a-zA-Z0-9 ,.]{0,40}") {
        let text = write_pulse_file(&seq, Some(&comment));
        let parsed = parse_pulse_file(&text).unwrap();
        prop_assert_eq!(parsed.sequence.len(), seq.len());
        prop_assert_eq!(parsed.sequence.rabi_nominal(), seq.rabi_nominal());
        for (a, b) in parsed.sequence.steps().iter().zip(seq.steps()) {
            prop_assert_eq!(a.amplitude, b.amplitude);
            prop_assert_eq!(a.duration, b.duration);
            prop_assert!(wrap_angle(a.phase - b.phase).abs() < 1e-14);
        }
        prop_assert!(sequence_propagator(&parsed.sequence, &ErrorParams::new(0.3, 0.1)).distance(&sequence_propagator(&seq, &ErrorParams::new(0.3, 0.1))) < 1e-12);
    }

    #[test]
    fn degree_and_radian_angles_agree(deg in -720.0..720.0f64) {
        let from_deg = parse_angle(&format!("{deg}deg")).unwrap();
        let from_rad = parse_angle(&format!("{}", deg.to_radians())).unwrap();
        prop_assert!((from_deg - from_rad).abs() < 1e-12);
    }
}

#[test]
fn area_modes_differ_off_resonance() {
    let seq = rectangular(PI, 0.0, DEFAULT_RABI, 1).unwrap();
    let a = sequence_propagator(&seq, &ErrorParams::new(0.5, 0.2));
    let d = sequence_propagator(&seq, &ErrorParams::new(0.5, 0.2).with_mode(AreaErrorMode::DurationScale));
    assert!(a.distance(&d) > 1e-3);
}

#[test]
fn corpse_beats_rectangular_under_detuning() {
    let target = TargetRotation::new(PI, 0.0);
    let rect = rectangular(PI, 0.0, DEFAULT_RABI, 1).unwrap();
    let corpse = corpse_pi(0.0, DEFAULT_RABI).unwrap();
    for f in [-0.3, -0.2, -0.1, 0.1, 0.2, 0.3] {
        let e = ErrorParams::new(f, 0.0);
        assert!(fidelity(&corpse, &target, &e) > fidelity(&rect, &target, &e), "f = {f}");
    }
}

#[test]
fn scrofulous_beats_rectangular_under_area_error() {
    let target = TargetRotation::new(PI, 0.0);
    let rect = rectangular(PI, 0.0, DEFAULT_RABI, 1).unwrap();
    let scrofulous = scrofulous_pi(0.0, DEFAULT_RABI).unwrap();
    for g in [-0.3, -0.2, -0.1, 0.1, 0.2, 0.3] {
        let e = ErrorParams::new(0.0, g);
        assert!(fidelity(&scrofulous, &target, &e) > fidelity(&rect, &target, &e), "g = {g}");
    }
    let e = ErrorParams::new(0.5, 0.0);
    let ratio = (1.0 - fidelity(&scrofulous, &target, &e)) / (1.0 - fidelity(&rect, &target, &e));
    assert!((0.5..=2.0).contains(&ratio), "{ratio}");
}

#[test]
fn bb1_compensates_area_errors_for_every_placement() {
    let target = TargetRotation::new(FRAC_PI_2, -FRAC_PI_2);
    let rect = rectangular(FRAC_PI_2, 0.0, DEFAULT_RABI, 1).unwrap();
    for placement in [Bb1Placement::WBefore, Bb1Placement::WAfter, Bb1Placement::Split] {
        let seq = bb1(FRAC_PI_2, 0.0, placement, DEFAULT_RABI).unwrap();
        assert!(1.0 - fidelity(&seq, &target, &ErrorParams::new(0.0, 0.1)) < 1e-4);
        for g in [-0.2, -0.1, 0.1, 0.2] {
            let e = ErrorParams::new(0.0, g);
            assert!(fidelity(&seq, &target, &e) > fidelity(&rect, &target, &e), "{placement:?} g = {g}");
        }
    }
}

#[test]
fn split_bb1_beats_rectangular_under_pure_detuning() {
    let target = TargetRotation::new(FRAC_PI_2, -FRAC_PI_2);
    let rect = rectangular(FRAC_PI_2, 0.0, DEFAULT_RABI, 1).unwrap();
    let seq = bb1(FRAC_PI_2, 0.0, Bb1Placement::Split, DEFAULT_RABI).unwrap();
    for f in [-0.2, -0.1, 0.1, 0.2] {
        let e = ErrorParams::new(f, 0.0);
        assert!(fidelity(&seq, &target, &e) > fidelity(&rect, &target, &e), "f = {f}");
    }
}
