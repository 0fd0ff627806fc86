use std::f64::consts::{FRAC_PI_2, PI, TAU};

use proptest::prelude::*;
use robustpulse::design::{
    cost_gradient, design_pulse, ensemble_cost, member_fidelities, DesignOutcome, DesignProblem, EnsembleSpec,
    Initialization,
};
use robustpulse::fidelity::TargetRotation;
use robustpulse::qubit::{AreaErrorMode, PulseSequence, PulseStep, DEFAULT_RABI};

fn with_step(seq: &PulseSequence, k: usize, d_amp: f64, d_phase: f64) -> PulseSequence {
    let mut steps = seq.steps().to_vec();
    steps[k].amplitude += d_amp;
    steps[k].phase += d_phase;
    PulseSequence::new(steps, seq.rabi_nominal()).unwrap()
}

fn problem_strategy() -> impl Strategy<Value = (DesignProblem, PulseSequence)> {
    (
        10usize..=50,
        prop::collection::vec((-1.0..1.0f64, -0.4..0.4f64, 0.1..1.0f64), 1..6),
        prop_oneof![Just(AreaErrorMode::AmplitudeScale), Just(AreaErrorMode::DurationScale)],
        0.05..PI,
        -PI..PI,
        0.5..4.0f64,
        any::<u64>(),
    )
        .prop_flat_map(|(n, members, mode, theta, phi, step, _)| {
            let controls = prop::collection::vec((0.05..0.95f64, 0.0..TAU), n);
            (Just((n, members, mode, theta, phi, step)), controls)
        })
        .prop_map(|((n, members, mode, theta, phi, step), controls)| {
            let f: Vec<f64> = members.iter().map(|m| m.0).collect();
            let g = [members[0].1];
            let w: Vec<f64> = members.iter().map(|m| m.2).collect();
            let ensemble = EnsembleSpec::weighted(&f, &g, w, mode).unwrap();
            let problem = DesignProblem::new(TargetRotation::new(theta, phi), n, step, ensemble);
            let steps = controls
                .into_iter()
                .map(|(a, p)| PulseStep::new(a, p, step).unwrap())
                .collect();
            (problem, PulseSequence::new(steps, DEFAULT_RABI).unwrap())
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn gradient_matches_central_differences((problem, seq) in problem_strategy()) {
        let h = 1e-6;
        let grad = cost_gradient(&seq, &problem).unwrap();
        for k in 0..seq.len() {
            let da = (ensemble_cost(&with_step(&seq, k, h, 0.0), &problem)
                - ensemble_cost(&with_step(&seq, k, -h, 0.0), &problem))
                / (2.0 * h);
            let dp = (ensemble_cost(&with_step(&seq, k, 0.0, h), &problem)
                - ensemble_cost(&with_step(&seq, k, 0.0, -h), &problem))
                / (2.0 * h);
            for (analytic, numeric) in [(grad.amplitude[k], da), (grad.phase[k], dp)] {
                let scale = analytic.abs().max(numeric.abs());
                prop_assert!((analytic - numeric).abs() < 1e-5 * scale + 1e-8, "step {k}: {analytic} vs {numeric}");
            }
        }
    }

    #[test]
    fn transfer_cost_is_gauge_invariant((problem, seq) in problem_strategy(), shift in -PI..PI) {
        let mut problem = problem;
        problem.target = TargetRotation::new(PI, 0.0);
        let cost = ensemble_cost(&seq, &problem);
        prop_assert!((cost - ensemble_cost(&seq.phase_shifted(shift), &problem)).abs() < 1e-12);
        let grad = cost_gradient(&seq, &problem).unwrap();
        let gauge: f64 = grad.phase.iter().sum();
        let scale = grad.norm().max(1e-12);
        prop_assert!(gauge.abs() / scale < 1e-9, "gauge component {gauge}");
    }

    #[test]
    fn phase_sensitive_cost_is_covariant((problem, seq) in problem_strategy(), shift in -PI..PI) {
        let mut shifted = problem.clone();
        shifted.target = TargetRotation::new(problem.target.theta, problem.target.phi + shift);
        let a = ensemble_cost(&seq, &problem);
        let b = ensemble_cost(&seq.phase_shifted(shift), &shifted);
        prop_assert!((a - b).abs() < 1e-12);
    }
}

fn small_problem(seed_members: usize) -> DesignProblem {
    let ensemble = EnsembleSpec::uniform_box((-0.5, 0.5), seed_members, (-0.2, 0.2), 3, AreaErrorMode::AmplitudeScale)
        .unwrap();
    let mut p = DesignProblem::new(TargetRotation::new(FRAC_PI_2, -FRAC_PI_2), 30, 3.0, ensemble);
    p.max_iterations = 150;
    p
}

#[test]
fn accepted_iterations_never_decrease_the_cost() {
    for seed in 0..4 {
        let report = design_pulse(&small_problem(3), Initialization::Random(seed)).unwrap();
        assert!(report.cost_history.windows(2).all(|w| w[1] >= w[0]));
        assert!(report.final_cost() >= report.initial_cost());
        assert!(report.final_cost() > report.initial_cost() + 0.05);
        report.check().unwrap();
    }
}

#[test]
fn amplitudes_respect_the_cap() {
    for cap in [0.3, 0.7, 1.0] {
        let mut problem = small_problem(3);
        problem.max_amplitude = cap;
        let report = design_pulse(&problem, Initialization::Random(9)).unwrap();
        for step in report.sequence.steps() {
            assert!(step.amplitude >= 0.0 && step.amplitude <= cap * (1.0 + 1e-12), "{}", step.amplitude);
        }
    }
}

#[test]
fn resonant_pi_pulse_reaches_unit_fidelity() {
    let ensemble = EnsembleSpec::single(0.0, 0.0);
    let mut problem = DesignProblem::new(TargetRotation::new(PI, 0.0), 40, 2.0, ensemble);
    problem.max_iterations = 100;

    let report = design_pulse(&problem, Initialization::Rectangular).unwrap();
    assert!(report.final_cost() > 1.0 - 1e-6);
    assert_eq!(report.outcome, DesignOutcome::Converged);

    let report = design_pulse(&problem, Initialization::Random(3)).unwrap();
    assert!(report.cost_history.len() <= 101);
    assert!(report.final_cost() > 1.0 - 1e-6, "{}", report.final_cost());
    let grad = cost_gradient(&report.sequence, &problem).unwrap();
    assert!(grad.norm() < 1e-3, "{}", grad.norm());
}

#[test]
fn reports_carry_member_fidelities() {
    let problem = small_problem(3);
    let report = design_pulse(&problem, Initialization::Random(1)).unwrap();
    assert_eq!(report.member_fidelities.len(), problem.ensemble.len());
    assert_eq!(report.member_fidelities, member_fidelities(&report.sequence, &problem));
    let mean: f64 = report.member_fidelities.iter().sum::<f64>() / report.member_fidelities.len() as f64;
    assert!((mean - report.final_cost()).abs() < 1e-12);
}

#[test]
fn design_is_deterministic_under_any_pool_size() {
    let problem = small_problem(3);
    let runs: Vec<_> = [1, 2, 5]
        .into_iter()
        .map(|threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| design_pulse(&problem, Initialization::Random(17)).unwrap())
        })
        .collect();
    for r in &runs[1..] {
        assert_eq!(r.cost_history, runs[0].cost_history);
        assert_eq!(r.sequence, runs[0].sequence);
    }
}

#[test]
fn provided_initialization_is_used_verbatim() {
    let problem = small_problem(3);
    let first = design_pulse(&problem, Initialization::Random(2)).unwrap();
    let mut resumed_problem = problem.clone();
    resumed_problem.max_iterations = 0;
    let resumed = design_pulse(&resumed_problem, Initialization::Provided(first.sequence.clone())).unwrap();
    assert!((resumed.initial_cost() - first.final_cost()).abs() < 1e-12);
    assert_eq!(resumed.outcome, DesignOutcome::MaxIterations);
}
