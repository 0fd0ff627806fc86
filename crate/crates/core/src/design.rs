//! Gradient-based design of robust piecewise-constant pulses.
//!
//! The cost is the weighted mean, over an ensemble of `(f, g)` errors, of the
//! state fidelity between `U|0⟩` and the target. Gradients are exact: each
//! ensemble member is propagated forward from `|0⟩` and backward from the
//! target, and the derivative of every closed-form step propagator is taken
//! analytically.
//!
//! The optimizer works on the in-phase/quadrature controls
//! `(x, y) = a (cos Φ, sin Φ)`, which stay well conditioned at zero
//! amplitude. Amplitudes are kept in `[0, max_amplitude]` by radial
//! projection after every update.

use std::collections::VecDeque;
use std::f64::consts::{FRAC_PI_2, TAU};

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::fidelity::TargetRotation;
use crate::measure::point_rng;
use crate::qubit::{step_generator, AreaErrorMode, ErrorParams, PulseSequence, PulseStep, Rotation, DEFAULT_RABI};

/// Ensemble of error pairs the design is averaged over.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSpec {
    members: Vec<(f64, f64)>,
    weights: Vec<f64>,
    mode: AreaErrorMode,
}

impl EnsembleSpec {
    /// Full lattice `f_samples × g_samples` with uniform weights.
    pub fn lattice(f_samples: &[f64], g_samples: &[f64], mode: AreaErrorMode) -> Result<Self> {
        let n = f_samples.len() * g_samples.len();
        EnsembleSpec::weighted(f_samples, g_samples, vec![1.0 / n as f64; n], mode)
    }

    /// Lattice with explicit weights, row-major in `f` then `g`. Weights are
    /// normalized to sum to one.
    pub fn weighted(f_samples: &[f64], g_samples: &[f64], weights: Vec<f64>, mode: AreaErrorMode) -> Result<Self> {
        if f_samples.is_empty() || g_samples.is_empty() {
            return Err(invalid("ensemble must contain at least one member"));
        }
        if f_samples.iter().chain(g_samples).any(|v| !v.is_finite()) {
            return Err(invalid("ensemble samples must be finite"));
        }
        if g_samples.iter().any(|&g| g <= -1.0) {
            return Err(invalid("ensemble g samples must exceed -1"));
        }
        let members: Vec<(f64, f64)> = f_samples
            .iter()
            .flat_map(|&f| g_samples.iter().map(move |&g| (f, g)))
            .collect();
        if weights.len() != members.len() {
            return Err(invalid(format!(
                "expected {} ensemble weights, got {}",
                members.len(),
                weights.len()
            )));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(invalid("ensemble weights must be nonnegative"));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(invalid("ensemble weights must not all be zero"));
        }
        Ok(EnsembleSpec {
            members,
            weights: weights.into_iter().map(|w| w / total).collect(),
            mode,
        })
    }

    /// `nf × ng` evenly spaced samples spanning the closed ranges.
    pub fn uniform_box(f_range: (f64, f64), nf: usize, g_range: (f64, f64), ng: usize, mode: AreaErrorMode) -> Result<Self> {
        if nf == 0 || ng == 0 {
            return Err(invalid("ensemble sample counts must be >= 1"));
        }
        let f = crate::fidelity::linspace(f_range.0, f_range.1, nf);
        let g = crate::fidelity::linspace(g_range.0, g_range.1, ng);
        EnsembleSpec::lattice(&f, &g, mode)
    }

    /// `f ∈ [-1, 1]` (9 samples) × `g ∈ [-0.4, 0.4]` (5 samples).
    pub fn default_box() -> Self {
        EnsembleSpec::uniform_box((-1.0, 1.0), 9, (-0.4, 0.4), 5, AreaErrorMode::AmplitudeScale).expect("valid defaults")
    }

    pub fn single(f: f64, g: f64) -> Self {
        EnsembleSpec::lattice(&[f], &[g], AreaErrorMode::AmplitudeScale).expect("single member")
    }

    pub fn members(&self) -> &[(f64, f64)] {
        &self.members
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn mode(&self) -> AreaErrorMode {
        self.mode
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    fn errors(&self, k: usize) -> ErrorParams {
        let (f, g) = self.members[k];
        ErrorParams::new(f, g).with_mode(self.mode)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignProblem {
    pub target: TargetRotation,
    pub n_steps: usize,
    /// µs.
    pub step_duration: f64,
    /// rad/µs.
    pub rabi_nominal: f64,
    pub max_amplitude: f64,
    pub ensemble: EnsembleSpec,
    pub max_iterations: usize,
    /// Stop once ten consecutive accepted steps improve the cost by less
    /// than this in total.
    pub convergence_tol: f64,
}

impl DesignProblem {
    pub fn new(target: TargetRotation, n_steps: usize, step_duration: f64, ensemble: EnsembleSpec) -> Self {
        DesignProblem {
            target,
            n_steps,
            step_duration,
            rabi_nominal: DEFAULT_RABI,
            max_amplitude: 1.0,
            ensemble,
            max_iterations: 2000,
            convergence_tol: 1e-8,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_steps == 0 {
            return Err(invalid("n_steps must be >= 1"));
        }
        if !(self.step_duration.is_finite() && self.step_duration > 0.0) {
            return Err(invalid("step duration must be > 0"));
        }
        if !(self.rabi_nominal.is_finite() && self.rabi_nominal > 0.0) {
            return Err(invalid("nominal Rabi frequency must be > 0"));
        }
        if !(self.max_amplitude.is_finite() && self.max_amplitude > 0.0) {
            return Err(invalid("max amplitude must be > 0"));
        }
        if !(self.convergence_tol >= 0.0) {
            return Err(invalid("convergence tolerance must be >= 0"));
        }
        if !(self.target.theta.is_finite() && self.target.phi.is_finite()) {
            return Err(invalid("target angles must be finite"));
        }
        Ok(())
    }

    fn check_sequence(&self, seq: &PulseSequence) -> Result<()> {
        if (seq.rabi_nominal() - self.rabi_nominal).abs() > 1e-12 * self.rabi_nominal {
            return Err(invalid("sequence Rabi frequency differs from the design problem"));
        }
        Ok(())
    }

    fn target_amplitudes(&self) -> [Complex64; 2] {
        let (s, c) = (0.5 * self.target.theta).sin_cos();
        [Complex64::new(c, 0.0), Complex64::from_polar(s, self.target.phi)]
    }
}

/// Per-step partial derivatives of the ensemble cost.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlGradient {
    pub amplitude: Vec<f64>,
    pub phase: Vec<f64>,
}

impl ControlGradient {
    pub fn norm(&self) -> f64 {
        self.amplitude
            .iter()
            .chain(&self.phase)
            .map(|g| g * g)
            .sum::<f64>()
            .sqrt()
    }
}

/// `σ_j ψ` for `j ∈ {x, y, z}`.
fn pauli_apply(j: usize, psi: [Complex64; 2]) -> [Complex64; 2] {
    let i = Complex64::i();
    match j {
        0 => [psi[1], psi[0]],
        1 => [-i * psi[1], i * psi[0]],
        _ => [psi[0], -psi[1]],
    }
}

fn inner(a: [Complex64; 2], b: [Complex64; 2]) -> Complex64 {
    a[0].conj() * b[0] + a[1].conj() * b[1]
}

/// `(sin α)/α` and `(α cos α − sin α)/α³`.
fn sinc_terms(alpha: f64) -> (f64, f64) {
    if alpha < 1e-4 {
        let a2 = alpha * alpha;
        (1.0 - a2 / 6.0 + a2 * a2 / 120.0, -1.0 / 3.0 + a2 / 30.0)
    } else {
        let (s, c) = alpha.sin_cos();
        (s / alpha, (alpha * c - s) / (alpha * alpha * alpha))
    }
}

/// `⟨χ| ∂U/∂m_j |ψ⟩` for `U = exp(−i m·σ)` and `j ∈ {x, y}`.
fn generator_derivatives(m: [f64; 3], chi: [Complex64; 2], psi: [Complex64; 2]) -> [Complex64; 2] {
    let alpha = (m[0] * m[0] + m[1] * m[1] + m[2] * m[2]).sqrt();
    let (s1, s2) = sinc_terms(alpha);
    let mi = Complex64::new(0.0, -1.0);
    let overlap = inner(chi, psi);
    let sx = inner(chi, pauli_apply(0, psi));
    let sy = inner(chi, pauli_apply(1, psi));
    let sz = inner(chi, pauli_apply(2, psi));
    let msig = sx * m[0] + sy * m[1] + sz * m[2];
    let dj = |j: usize, sj: Complex64| -> Complex64 { -overlap * (s1 * m[j]) + mi * (msig * (s2 * m[j]) + sj * s1) };
    [dj(0, sx), dj(1, sy)]
}

/// Fidelity of one member and its gradient with respect to the quadrature
/// controls `(x_k, y_k)`.
fn member_gradient(
    controls: &[[f64; 2]],
    problem: &DesignProblem,
    errors: &ErrorParams,
    want_grad: bool,
) -> (f64, Vec<[f64; 2]>) {
    let n = controls.len();
    let (amp_scale, dur_scale) = errors.scale_factors();
    let half_t = 0.5 * dur_scale * problem.step_duration;
    let drive = half_t * amp_scale * problem.rabi_nominal;
    let mz = half_t * errors.f * problem.rabi_nominal;
    let gens: Vec<[f64; 3]> = controls.iter().map(|c| [drive * c[0], drive * c[1], mz]).collect();
    let props: Vec<Rotation> = gens.iter().map(|&m| Rotation::exp_i_sigma(m)).collect();

    // Forward states ψ_0 … ψ_n.
    let mut forward = Vec::with_capacity(n + 1);
    let mut psi = [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)];
    forward.push(psi);
    for u in &props {
        psi = u.apply(psi);
        forward.push(psi);
    }
    let target = problem.target_amplitudes();
    let lambda = inner(target, psi);
    let fid = lambda.norm_sqr();
    if !want_grad {
        return (fid, Vec::new());
    }

    let mut grad = vec![[0.0; 2]; n];
    let mut chi = target;
    for k in (0..n).rev() {
        let d = generator_derivatives(gens[k], chi, forward[k]);
        grad[k] = [
            2.0 * (lambda.conj() * d[0]).re * drive,
            2.0 * (lambda.conj() * d[1]).re * drive,
        ];
        chi = props[k].apply_dagger(chi);
    }
    (fid, grad)
}

fn quadratures(seq: &PulseSequence) -> Vec<[f64; 2]> {
    seq.steps()
        .iter()
        .map(|s| {
            let (sin, cos) = s.phase.sin_cos();
            [s.amplitude * cos, s.amplitude * sin]
        })
        .collect()
}

fn controls_to_sequence(controls: &[[f64; 2]], problem: &DesignProblem) -> PulseSequence {
    let steps = controls
        .iter()
        .map(|c| {
            let amplitude = c[0].hypot(c[1]);
            let phase = if amplitude > 0.0 { c[1].atan2(c[0]).rem_euclid(TAU) } else { 0.0 };
            PulseStep {
                amplitude,
                phase,
                duration: problem.step_duration,
            }
        })
        .collect();
    PulseSequence::new(steps, problem.rabi_nominal).expect("controls are finite")
}

/// Ensemble cost and quadrature gradient. Member contributions are reduced
/// in a fixed order.
fn evaluate(controls: &[[f64; 2]], problem: &DesignProblem, want_grad: bool) -> (f64, Vec<[f64; 2]>) {
    let ens = &problem.ensemble;
    let parts: Vec<(f64, Vec<[f64; 2]>)> = (0..ens.len())
        .into_par_iter()
        .map(|k| member_gradient(controls, problem, &ens.errors(k), want_grad))
        .collect();
    let mut cost = 0.0;
    let mut grad = vec![[0.0; 2]; if want_grad { controls.len() } else { 0 }];
    for ((fid, g), &w) in parts.iter().zip(ens.weights()) {
        cost += w * fid;
        for (acc, gk) in grad.iter_mut().zip(g) {
            acc[0] += w * gk[0];
            acc[1] += w * gk[1];
        }
    }
    (cost, grad)
}

/// Sequences whose steps do not all share the problem's step duration are
/// still evaluated exactly, step by step.
fn evaluate_sequence(seq: &PulseSequence, problem: &DesignProblem) -> Vec<f64> {
    let ens = &problem.ensemble;
    let target = problem.target_amplitudes();
    (0..ens.len())
        .into_par_iter()
        .map(|k| {
            let errors = ens.errors(k);
            let mut psi = [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)];
            for step in seq.steps() {
                psi = Rotation::exp_i_sigma(step_generator(step, &errors, seq.rabi_nominal())).apply(psi);
            }
            inner(target, psi).norm_sqr()
        })
        .collect()
}

/// Fidelity of each ensemble member, in ensemble order.
pub fn member_fidelities(seq: &PulseSequence, problem: &DesignProblem) -> Vec<f64> {
    evaluate_sequence(seq, problem)
}

/// Weighted mean fidelity over the ensemble.
pub fn ensemble_cost(seq: &PulseSequence, problem: &DesignProblem) -> f64 {
    evaluate_sequence(seq, problem)
        .iter()
        .zip(problem.ensemble.weights())
        .map(|(f, w)| f * w)
        .sum()
}

/// Exact gradient of [`ensemble_cost`] with respect to each step's
/// amplitude and phase. Step durations are taken from `seq`.
pub fn cost_gradient(seq: &PulseSequence, problem: &DesignProblem) -> Result<ControlGradient> {
    problem.check_sequence(seq)?;
    let ens = &problem.ensemble;
    let target = problem.target_amplitudes();
    let steps = seq.steps();
    let per_member: Vec<Vec<[f64; 2]>> = (0..ens.len())
        .into_par_iter()
        .map(|k| {
            let errors = ens.errors(k);
            let (amp_scale, dur_scale) = errors.scale_factors();
            let gens: Vec<[f64; 3]> = steps
                .iter()
                .map(|s| step_generator(s, &errors, seq.rabi_nominal()))
                .collect();
            let props: Vec<Rotation> = gens.iter().map(|&m| Rotation::exp_i_sigma(m)).collect();
            let mut forward = Vec::with_capacity(steps.len() + 1);
            let mut psi = [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)];
            forward.push(psi);
            for u in &props {
                psi = u.apply(psi);
                forward.push(psi);
            }
            let lambda = inner(target, psi);
            let mut chi = target;
            let mut out = vec![[0.0; 2]; steps.len()];
            for k in (0..steps.len()).rev() {
                let d = generator_derivatives(gens[k], chi, forward[k]);
                let dx = 2.0 * (lambda.conj() * d[0]).re;
                let dy = 2.0 * (lambda.conj() * d[1]).re;
                let s = &steps[k];
                let scale = 0.5 * dur_scale * s.duration * amp_scale * seq.rabi_nominal();
                let (sin, cos) = s.phase.sin_cos();
                // m_x = scale·a·cos Φ, m_y = scale·a·sin Φ
                out[k] = [
                    scale * (cos * dx + sin * dy),
                    scale * s.amplitude * (-sin * dx + cos * dy),
                ];
                chi = props[k].apply_dagger(chi);
            }
            out
        })
        .collect();
    let mut amplitude = vec![0.0; steps.len()];
    let mut phase = vec![0.0; steps.len()];
    for (g, &w) in per_member.iter().zip(ens.weights()) {
        for k in 0..steps.len() {
            amplitude[k] += w * g[k][0];
            phase[k] += w * g[k][1];
        }
    }
    Ok(ControlGradient { amplitude, phase })
}

/// Starting controls for [`design_pulse`].
#[derive(Debug, Clone, PartialEq)]
pub enum Initialization {
    /// Uniform amplitudes in `[0, max_amplitude]` and phases in `[0, 2π)`.
    Random(u64),
    /// Constant amplitude and phase that realize the target rotation on
    /// resonance (amplitude capped at `max_amplitude`).
    Rectangular,
    Provided(PulseSequence),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DesignOutcome {
    /// Improvement fell below the tolerance, or the gradient vanished.
    Converged,
    MaxIterations,
    /// The first line search could not improve the initial pulse.
    NoImprovement,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignReport {
    pub sequence: PulseSequence,
    /// Ensemble cost before the first and after every accepted iteration.
    pub cost_history: Vec<f64>,
    pub member_fidelities: Vec<f64>,
    pub outcome: DesignOutcome,
}

impl DesignReport {
    pub fn converged(&self) -> bool {
        self.outcome == DesignOutcome::Converged
    }

    pub fn initial_cost(&self) -> f64 {
        self.cost_history[0]
    }

    pub fn final_cost(&self) -> f64 {
        *self.cost_history.last().expect("history is never empty")
    }

    /// `Err(NoImprovement)` when the optimizer could not leave the initial
    /// pulse.
    pub fn check(&self) -> Result<()> {
        match self.outcome {
            DesignOutcome::NoImprovement => Err(Error::NoImprovement),
            _ => Ok(()),
        }
    }
}

fn initial_controls(problem: &DesignProblem, init: &Initialization) -> Result<Vec<[f64; 2]>> {
    match init {
        Initialization::Random(seed) => {
            let mut rng = point_rng(*seed, 0);
            Ok((0..problem.n_steps)
                .map(|_| {
                    let a = problem.max_amplitude * rng.gen::<f64>();
                    let p = TAU * rng.gen::<f64>();
                    [a * p.cos(), a * p.sin()]
                })
                .collect())
        }
        Initialization::Rectangular => {
            let total = problem.n_steps as f64 * problem.step_duration;
            let a = (problem.target.theta / (problem.rabi_nominal * total)).min(problem.max_amplitude);
            // rotation about the axis at φ + π/2 carries |0⟩ to azimuth φ
            let p = problem.target.phi + FRAC_PI_2;
            Ok(vec![[a * p.cos(), a * p.sin()]; problem.n_steps])
        }
        Initialization::Provided(seq) => {
            problem.check_sequence(seq)?;
            if seq.len() != problem.n_steps {
                return Err(invalid(format!(
                    "provided pulse has {} steps, problem expects {}",
                    seq.len(),
                    problem.n_steps
                )));
            }
            if seq
                .steps()
                .iter()
                .any(|s| (s.duration - problem.step_duration).abs() > 1e-12 * problem.step_duration)
            {
                return Err(invalid("provided pulse step durations differ from the design problem"));
            }
            let mut c = quadratures(seq);
            project(&mut c, problem.max_amplitude);
            Ok(c)
        }
    }
}

fn project(controls: &mut [[f64; 2]], max_amplitude: f64) {
    for c in controls.iter_mut() {
        let a = c[0].hypot(c[1]);
        if a > max_amplitude {
            let s = max_amplitude / a;
            c[0] *= s;
            c[1] *= s;
        }
    }
}

fn dot(a: &[[f64; 2]], b: &[[f64; 2]]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x[0] * y[0] + x[1] * y[1]).sum()
}

fn sub(a: &[[f64; 2]], b: &[[f64; 2]]) -> Vec<[f64; 2]> {
    a.iter().zip(b).map(|(x, y)| [x[0] - y[0], x[1] - y[1]]).collect()
}

/// Limited-memory inverse-Hessian approximation for the ascent problem.
struct Lbfgs {
    memory: VecDeque<(Vec<[f64; 2]>, Vec<[f64; 2]>, f64)>,
    capacity: usize,
}

impl Lbfgs {
    fn new(capacity: usize) -> Self {
        Lbfgs {
            memory: VecDeque::with_capacity(capacity),
            capacity,
        }
    }

    fn clear(&mut self) {
        self.memory.clear();
    }

    /// `s` is the control change and `y` the decrease of the gradient
    /// (`g_old − g_new`); pairs without positive curvature are skipped.
    fn push(&mut self, s: Vec<[f64; 2]>, y: Vec<[f64; 2]>) {
        let sy = dot(&s, &y);
        if sy <= 1e-16 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() || sy <= 0.0 {
            return;
        }
        if self.memory.len() == self.capacity {
            self.memory.pop_front();
        }
        self.memory.push_back((s, y, 1.0 / sy));
    }

    /// Ascent direction `H g`.
    fn direction(&self, grad: &[[f64; 2]]) -> Vec<[f64; 2]> {
        let mut q = grad.to_vec();
        let mut alphas = Vec::with_capacity(self.memory.len());
        for (s, y, rho) in self.memory.iter().rev() {
            let a = rho * dot(s, &q);
            for (qk, yk) in q.iter_mut().zip(y) {
                qk[0] -= a * yk[0];
                qk[1] -= a * yk[1];
            }
            alphas.push(a);
        }
        if let Some((s, y, _)) = self.memory.back() {
            let gamma = dot(s, y) / dot(y, y);
            for qk in q.iter_mut() {
                qk[0] *= gamma;
                qk[1] *= gamma;
            }
        }
        for ((s, y, rho), a) in self.memory.iter().zip(alphas.into_iter().rev()) {
            let b = rho * dot(y, &q);
            for (qk, sk) in q.iter_mut().zip(s) {
                qk[0] += (a - b) * sk[0];
                qk[1] += (a - b) * sk[1];
            }
        }
        q
    }
}

const ARMIJO_C1: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 50;
/// Number of accepted iterations over which the cost improvement is measured.
const IMPROVEMENT_WINDOW: usize = 10;

/// Projected line search along `dir`. Returns the accepted controls, cost
/// and gradient, or `None` if no sufficient increase was found.
fn line_search(
    controls: &[[f64; 2]],
    cost: f64,
    grad: &[[f64; 2]],
    dir: &[[f64; 2]],
    initial_step: f64,
    problem: &DesignProblem,
) -> Option<(Vec<[f64; 2]>, f64, Vec<[f64; 2]>)> {
    let mut step = initial_step;
    for _ in 0..MAX_BACKTRACKS {
        let mut trial: Vec<[f64; 2]> = controls
            .iter()
            .zip(dir)
            .map(|(c, d)| [c[0] + step * d[0], c[1] + step * d[1]])
            .collect();
        project(&mut trial, problem.max_amplitude);
        let moved = sub(&trial, controls);
        let predicted = dot(grad, &moved);
        if predicted > 0.0 {
            let (trial_cost, trial_grad) = evaluate(&trial, problem, true);
            if trial_cost >= cost + ARMIJO_C1 * predicted {
                return Some((trial, trial_cost, trial_grad));
            }
        }
        step *= 0.5;
    }
    None
}

/// Runs projected L-BFGS ascent with Armijo backtracking, falling back to the
/// plain gradient whenever the quasi-Newton direction fails. Every accepted
/// iteration increases the ensemble cost.
pub fn design_pulse(problem: &DesignProblem, init: Initialization) -> Result<DesignReport> {
    problem.validate()?;
    let mut controls = initial_controls(problem, &init)?;
    let (mut cost, mut grad) = evaluate(&controls, problem, true);
    let mut history = vec![cost];
    let mut lbfgs = Lbfgs::new(20);
    let mut outcome = DesignOutcome::MaxIterations;
    let grad_tol = problem.convergence_tol.max(1e-14);

    for iteration in 0..problem.max_iterations {
        if dot(&grad, &grad).sqrt() < grad_tol || cost >= 1.0 - 1e-15 {
            outcome = DesignOutcome::Converged;
            break;
        }
        let mut accepted = None;
        if !lbfgs.memory.is_empty() {
            let dir = lbfgs.direction(&grad);
            if dot(&dir, &grad) > 0.0 {
                accepted = line_search(&controls, cost, &grad, &dir, 1.0, problem);
            }
        }
        if accepted.is_none() {
            lbfgs.clear();
            let gmax = grad.iter().map(|g| g[0].abs().max(g[1].abs())).fold(0.0, f64::max);
            let step = 0.25 * problem.max_amplitude / gmax.max(1e-300);
            accepted = line_search(&controls, cost, &grad, &grad, step, problem);
        }
        let Some((new_controls, new_cost, new_grad)) = accepted else {
            outcome = if iteration == 0 {
                DesignOutcome::NoImprovement
            } else {
                DesignOutcome::Converged
            };
            break;
        };
        lbfgs.push(sub(&new_controls, &controls), sub(&grad, &new_grad));
        controls = new_controls;
        cost = new_cost;
        grad = new_grad;
        history.push(cost);
        let window = history.len().saturating_sub(1).min(IMPROVEMENT_WINDOW);
        if window == IMPROVEMENT_WINDOW && cost - history[history.len() - 1 - window] < problem.convergence_tol {
            outcome = DesignOutcome::Converged;
            break;
        }
    }

    let sequence = controls_to_sequence(&controls, problem);
    let member_fidelities = evaluate_sequence(&sequence, problem);
    Ok(DesignReport {
        sequence,
        cost_history: history,
        member_fidelities,
        outcome,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pulses::rectangular;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn rect_problem(theta: f64, ensemble: EnsembleSpec) -> DesignProblem {
        DesignProblem::new(TargetRotation::from_drive(theta, 0.0), 1, theta / DEFAULT_RABI, ensemble)
    }

    #[test]
    fn ideal_rectangular_cost_is_one() {
        let p = rect_problem(PI / 2.0, EnsembleSpec::single(0.0, 0.0));
        let seq = rectangular(PI / 2.0, 0.0, DEFAULT_RABI, 1).unwrap();
        assert_abs_diff_eq!(ensemble_cost(&seq, &p), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn two_member_rabi_average() {
        let ens = EnsembleSpec::lattice(&[0.0, 1.0], &[0.0], AreaErrorMode::AmplitudeScale).unwrap();
        let p = rect_problem(PI, ens);
        let seq = rectangular(PI, 0.0, DEFAULT_RABI, 1).unwrap();
        assert_abs_diff_eq!(ensemble_cost(&seq, &p), 0.658_281_917_755_177, epsilon = 1e-12);
    }

    #[test]
    fn degenerate_weights_pick_one_member() {
        let ens = EnsembleSpec::weighted(&[0.0, 1.0], &[0.0], vec![0.0, 3.0], AreaErrorMode::AmplitudeScale).unwrap();
        let p = rect_problem(PI, ens);
        let seq = rectangular(PI, 0.0, DEFAULT_RABI, 1).unwrap();
        let single = rect_problem(PI, EnsembleSpec::single(1.0, 0.0));
        assert_abs_diff_eq!(ensemble_cost(&seq, &p), ensemble_cost(&seq, &single), epsilon = 1e-15);
    }

    #[test]
    fn ensemble_validation() {
        let m = AreaErrorMode::AmplitudeScale;
        assert!(EnsembleSpec::lattice(&[], &[0.0], m).is_err());
        assert!(EnsembleSpec::weighted(&[0.0], &[0.0], vec![-1.0], m).is_err());
        assert!(EnsembleSpec::weighted(&[0.0], &[0.0], vec![0.5, 0.5], m).is_err());
        let mut p = rect_problem(PI, EnsembleSpec::single(0.0, 0.0));
        p.n_steps = 0;
        assert!(p.validate().is_err());
    }

    #[test]
    fn quadrature_and_polar_gradients_agree() {
        let ens = EnsembleSpec::lattice(&[-0.3, 0.4], &[0.1], AreaErrorMode::DurationScale).unwrap();
        let mut p = DesignProblem::new(TargetRotation::new(PI / 2.0, 0.3), 4, 6.0, ens);
        p.max_amplitude = 2.0;
        let seq = PulseSequence::new(
            (0..4)
                .map(|k| PulseStep::new(0.3 + 0.2 * k as f64, 0.7 * k as f64, 6.0).unwrap())
                .collect(),
            DEFAULT_RABI,
        )
        .unwrap();
        let polar = cost_gradient(&seq, &p).unwrap();
        let (cost, quad) = evaluate(&quadratures(&seq), &p, true);
        assert_abs_diff_eq!(cost, ensemble_cost(&seq, &p), epsilon = 1e-14);
        for (k, s) in seq.steps().iter().enumerate() {
            let (sin, cos) = s.phase.sin_cos();
            assert_abs_diff_eq!(polar.amplitude[k], cos * quad[k][0] + sin * quad[k][1], epsilon = 1e-13);
            assert_abs_diff_eq!(
                polar.phase[k],
                s.amplitude * (-sin * quad[k][0] + cos * quad[k][1]),
                epsilon = 1e-13
            );
        }
    }

    #[test]
    fn single_step_rectangular_converges_immediately() {
        let p = rect_problem(PI / 2.0, EnsembleSpec::single(0.0, 0.0));
        let report = design_pulse(&p, Initialization::Rectangular).unwrap();
        assert!(report.converged());
        assert_abs_diff_eq!(report.final_cost(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn provided_init_must_match_problem() {
        let p = DesignProblem::new(TargetRotation::new(PI, 0.0), 5, 1.0, EnsembleSpec::single(0.0, 0.0));
        let seq = rectangular(PI, 0.0, DEFAULT_RABI, 4).unwrap();
        assert!(design_pulse(&p, Initialization::Provided(seq)).is_err());
    }
}
