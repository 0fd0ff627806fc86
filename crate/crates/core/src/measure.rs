//! Stochastic emulation of the fidelity measurement procedure.
//!
//! Every shot draws the initial level from the preparation populations,
//! evolves it exactly and samples an ideal projective readout that may be
//! flipped with a symmetric error probability. Each experiment owns a
//! ChaCha stream keyed by `(seed, point index)`, so results do not depend on
//! scheduling.
//!
//! Transfer (π) protocol per grid point:
//! - A: pulse under test with controlled errors,
//! - B: rectangular reference pulse with the same errors,
//! - C: ideal π/2 pulse (detection control, expectation 1/2),
//! - D: no pulse (preparation monitor, expectation `a1`).
//!
//! Ramsey protocol: the pulse under test is followed by an ideal π/2
//! analysis pulse whose phase is stepped over `[0, 2π)`. The analysis drive
//! phase is offset by `π/2` from the nominal Ramsey phase `Φ` so that the
//! population reads `a₁(Φ) = ½(1 + sin θm cos(φm − Φ))`. A direct readout
//! without analysis pulse fixes the hemisphere of `θm`.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::fidelity::{fidelity_from_angles, FidelityGrid, Preparation, TargetRotation};
use crate::pulses::rectangular;
use crate::qubit::{propagate, sequence_propagator, AreaErrorMode, ErrorParams, PulseSequence, QubitState, Rotation};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExperimentConfig {
    pub shots_per_point: u64,
    pub prep: Preparation,
    /// Ramsey phase points, equally spaced over `[0, 2π)`.
    pub n_phases: usize,
    pub rng_seed: u64,
    pub detection_flip_prob: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            shots_per_point: 700,
            prep: Preparation::PURE,
            n_phases: 20,
            rng_seed: 0,
            detection_flip_prob: 0.0,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.shots_per_point == 0 {
            return Err(invalid("shots per point must be >= 1"));
        }
        if self.n_phases < 3 {
            return Err(invalid(format!("need at least 3 Ramsey phases, got {}", self.n_phases)));
        }
        if !(0.0..=1.0).contains(&self.detection_flip_prob) {
            return Err(invalid("detection flip probability must lie in [0, 1]"));
        }
        Ok(())
    }

    /// Phases `2πk/n`.
    pub fn phases(&self) -> Vec<f64> {
        (0..self.n_phases).map(|k| TAU * k as f64 / self.n_phases as f64).collect()
    }
}

/// Detected-`|1⟩` frequency with its binomial standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransferEstimate {
    pub count_one: u64,
    pub shots: u64,
    pub p_hat: f64,
    pub sigma: f64,
}

impl TransferEstimate {
    fn from_counts(count_one: u64, shots: u64) -> Self {
        let p_hat = count_one as f64 / shots as f64;
        TransferEstimate {
            count_one,
            shots,
            p_hat,
            sigma: (p_hat * (1.0 - p_hat) / shots as f64).sqrt(),
        }
    }
}

/// Independent random stream for experiment number `index`.
pub fn point_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Probability of reading `|1⟩` starting from `|0⟩` and from `|1⟩`.
fn branch_probabilities(u: &Rotation) -> (f64, f64) {
    let from0 = QubitState::ground().evolve(u).population_one();
    let from1 = QubitState::excited().evolve(u).population_one();
    (from0, from1)
}

fn expected_detection(u: &Rotation, cfg: &ExperimentConfig) -> f64 {
    let (p0, p1) = branch_probabilities(u);
    let true_p = cfg.prep.a0() * p0 + cfg.prep.a1() * p1;
    let e = cfg.detection_flip_prob;
    e + (1.0 - 2.0 * e) * true_p
}

fn sample_counts(u: &Rotation, cfg: &ExperimentConfig, rng: &mut ChaCha8Rng) -> u64 {
    let (p0, p1) = branch_probabilities(u);
    let a1 = cfg.prep.a1();
    let flip = cfg.detection_flip_prob;
    let mut count = 0;
    for _ in 0..cfg.shots_per_point {
        let start_one = a1 > 0.0 && rng.gen::<f64>() < a1;
        let p = if start_one { p1 } else { p0 };
        let mut one = rng.gen::<f64>() < p;
        if flip > 0.0 && rng.gen::<f64>() < flip {
            one = !one;
        }
        count += one as u64;
    }
    count
}

/// Noiseless detection probability of the transfer sequence.
pub fn expected_transfer(seq: &PulseSequence, errors: &ErrorParams, cfg: &ExperimentConfig) -> f64 {
    expected_detection(&sequence_propagator(seq, errors), cfg)
}

/// Sequence A/B: prepare, apply `seq` under `errors`, detect.
pub fn run_transfer_experiment(
    seq: &PulseSequence,
    errors: &ErrorParams,
    cfg: &ExperimentConfig,
) -> Result<TransferEstimate> {
    run_transfer_experiment_at(seq, errors, cfg, 0)
}

/// [`run_transfer_experiment`] on the random stream `index`.
pub fn run_transfer_experiment_at(
    seq: &PulseSequence,
    errors: &ErrorParams,
    cfg: &ExperimentConfig,
    index: u64,
) -> Result<TransferEstimate> {
    cfg.validate()?;
    let mut rng = point_rng(cfg.rng_seed, index);
    let u = sequence_propagator(seq, errors);
    Ok(TransferEstimate::from_counts(sample_counts(&u, cfg, &mut rng), cfg.shots_per_point))
}

/// Results of the calibration sequences C and D.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Calibration {
    /// Sequence C, ideal π/2: expectation 1/2 for any preparation.
    pub control: TransferEstimate,
    /// Sequence D, no pulse: expectation `ε + (1 − 2ε) a1`.
    pub monitor: TransferEstimate,
}

impl Calibration {
    /// Estimated `a0` (assuming ideal detection).
    pub fn a0_estimate(&self) -> f64 {
        1.0 - self.monitor.p_hat
    }

    /// Effective readout contrast `(1 − 2ε)(a0 − a1)`, estimated as
    /// `1 − 2 P̂_D`.
    pub fn contrast(&self) -> f64 {
        1.0 - 2.0 * self.monitor.p_hat
    }

    /// Baseline-subtracted π contrast `P̂ − P̂_D` with its standard error.
    pub fn transfer_contrast(&self, a: &TransferEstimate) -> (f64, f64) {
        (
            a.p_hat - self.monitor.p_hat,
            (a.sigma * a.sigma + self.monitor.sigma * self.monitor.sigma).sqrt(),
        )
    }

    /// Transfer probability normalized by the calibrated contrast,
    /// `(P̂ − P̂_D)/(1 − 2P̂_D)`, with linearly propagated error.
    pub fn normalized_transfer(&self, a: &TransferEstimate) -> (f64, f64) {
        let c = self.contrast();
        if c <= 0.0 {
            return (f64::NAN, f64::INFINITY);
        }
        let d = self.monitor.p_hat;
        let v = (a.p_hat - d) / c;
        let dv_da = 1.0 / c;
        let dv_dd = (2.0 * a.p_hat - 1.0) / (c * c);
        let sigma = ((dv_da * a.sigma).powi(2) + (dv_dd * self.monitor.sigma).powi(2)).sqrt();
        (v, sigma)
    }
}

/// Runs sequences C and D on streams derived from `index`.
pub fn run_calibration(cfg: &ExperimentConfig, rabi_nominal: f64, index: u64) -> Result<Calibration> {
    cfg.validate()?;
    let half = rectangular(FRAC_PI_2, 0.0, rabi_nominal, 1)?;
    let mut rng = point_rng(cfg.rng_seed, index);
    let c = sample_counts(&sequence_propagator(&half, &ErrorParams::NONE), cfg, &mut rng);
    let d = sample_counts(&Rotation::IDENTITY, cfg, &mut rng);
    Ok(Calibration {
        control: TransferEstimate::from_counts(c, cfg.shots_per_point),
        monitor: TransferEstimate::from_counts(d, cfg.shots_per_point),
    })
}

/// One grid point of the transfer protocol.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransferPoint {
    pub shaped: TransferEstimate,
    pub reference: TransferEstimate,
    pub calibration: Calibration,
}

/// Sequences A–D at one `(f, g)` point.
pub fn measure_transfer_point(
    seq: &PulseSequence,
    reference: &PulseSequence,
    errors: &ErrorParams,
    cfg: &ExperimentConfig,
    index: u64,
) -> Result<TransferPoint> {
    cfg.validate()?;
    let mut rng = point_rng(cfg.rng_seed, index);
    let a = sample_counts(&sequence_propagator(seq, errors), cfg, &mut rng);
    let b = sample_counts(&sequence_propagator(reference, errors), cfg, &mut rng);
    let half = rectangular(FRAC_PI_2, 0.0, seq.rabi_nominal(), 1)?;
    let c = sample_counts(&sequence_propagator(&half, &ErrorParams::NONE), cfg, &mut rng);
    let d = sample_counts(&Rotation::IDENTITY, cfg, &mut rng);
    let n = cfg.shots_per_point;
    Ok(TransferPoint {
        shaped: TransferEstimate::from_counts(a, n),
        reference: TransferEstimate::from_counts(b, n),
        calibration: Calibration {
            control: TransferEstimate::from_counts(c, n),
            monitor: TransferEstimate::from_counts(d, n),
        },
    })
}

/// Measured π-transfer contrast grids `(shaped, reference)` over
/// `f_axis × g_axis`. Grid point `k` (row-major) uses stream `k`.
pub fn measure_transfer_grid(
    seq: &PulseSequence,
    reference: &PulseSequence,
    f_axis: &[f64],
    g_axis: &[f64],
    mode: AreaErrorMode,
    cfg: &ExperimentConfig,
) -> Result<(FidelityGrid, FidelityGrid)> {
    cfg.validate()?;
    let ng = g_axis.len();
    let points: Vec<TransferPoint> = (0..f_axis.len() * ng)
        .into_par_iter()
        .map(|k| {
            let errors = ErrorParams::new(f_axis[k / ng], g_axis[k % ng]).with_mode(mode);
            measure_transfer_point(seq, reference, &errors, cfg, k as u64)
        })
        .collect::<Result<_>>()?;
    let shaped = points
        .iter()
        .map(|p| p.calibration.transfer_contrast(&p.shaped).0.clamp(0.0, 1.0))
        .collect();
    let refs = points
        .iter()
        .map(|p| p.calibration.transfer_contrast(&p.reference).0.clamp(0.0, 1.0))
        .collect();
    Ok((
        FidelityGrid::new(f_axis.to_vec(), g_axis.to_vec(), shaped)?,
        FidelityGrid::new(f_axis.to_vec(), g_axis.to_vec(), refs)?,
    ))
}

/// Ramsey fringe: detected-`|1⟩` counts versus analysis phase, plus an
/// optional direct readout taken without the analysis pulse.
#[derive(Debug, Clone, PartialEq)]
pub struct FringeData {
    pub phases: Vec<f64>,
    pub counts_one: Vec<u64>,
    pub shots: u64,
    /// `(count_one, shots)` of the direct readout.
    pub direct: Option<(u64, u64)>,
}

impl FringeData {
    pub fn validate(&self) -> Result<()> {
        if self.phases.len() != self.counts_one.len() {
            return Err(invalid("fringe phases and counts differ in length"));
        }
        if self.shots == 0 {
            return Err(invalid("fringe shots must be >= 1"));
        }
        if self.counts_one.iter().any(|&c| c > self.shots) {
            return Err(invalid("fringe count exceeds shots"));
        }
        if let Some((c, n)) = self.direct {
            if n == 0 || c > n {
                return Err(invalid("invalid direct readout counts"));
            }
        }
        Ok(())
    }

    pub fn fractions(&self) -> Vec<f64> {
        self.counts_one.iter().map(|&c| c as f64 / self.shots as f64).collect()
    }
}

/// Ideal π/2 analysis pulse for Ramsey phase `phase`.
pub fn analysis_pulse(phase: f64, rabi_nominal: f64) -> Result<PulseSequence> {
    rectangular(FRAC_PI_2, phase + FRAC_PI_2, rabi_nominal, 1)
}

/// Noiseless detection probability at every Ramsey phase, followed by the
/// direct readout probability.
pub fn expected_fringe(
    first_pulse: &PulseSequence,
    errors: &ErrorParams,
    cfg: &ExperimentConfig,
) -> Result<(Vec<f64>, f64)> {
    let u = sequence_propagator(first_pulse, errors);
    let fringe = cfg
        .phases()
        .into_iter()
        .map(|phase| {
            let v = sequence_propagator(&analysis_pulse(phase, first_pulse.rabi_nominal())?, &ErrorParams::NONE);
            Ok(expected_detection(&(v * u), cfg))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((fringe, expected_detection(&u, cfg)))
}

/// Sequence A'/B'/C': `first_pulse` under `errors`, then an ideal π/2
/// analysis pulse at each phase.
pub fn run_ramsey_experiment(
    first_pulse: &PulseSequence,
    errors: &ErrorParams,
    cfg: &ExperimentConfig,
) -> Result<FringeData> {
    run_ramsey_experiment_at(first_pulse, errors, cfg, 0)
}

pub fn run_ramsey_experiment_at(
    first_pulse: &PulseSequence,
    errors: &ErrorParams,
    cfg: &ExperimentConfig,
    index: u64,
) -> Result<FringeData> {
    cfg.validate()?;
    let mut rng = point_rng(cfg.rng_seed, index);
    let u = sequence_propagator(first_pulse, errors);
    let phases = cfg.phases();
    let mut counts_one = Vec::with_capacity(phases.len());
    for &phase in &phases {
        let v = sequence_propagator(&analysis_pulse(phase, first_pulse.rabi_nominal())?, &ErrorParams::NONE);
        counts_one.push(sample_counts(&(v * u), cfg, &mut rng));
    }
    let direct = sample_counts(&u, cfg, &mut rng);
    Ok(FringeData {
        phases,
        counts_one,
        shots: cfg.shots_per_point,
        direct: Some((direct, cfg.shots_per_point)),
    })
}

/// Recovered Bloch angles of the state before the analysis pulse.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitResult {
    pub theta_m: f64,
    pub phi_m: f64,
    pub sigma_theta: f64,
    pub sigma_phi: f64,
    /// Fitted fringe offset `A`.
    pub offset: f64,
    /// Fitted fringe amplitude `B`.
    pub amplitude: f64,
}

const FIT_MAX_ITER: usize = 200;
const FIT_STEP_TOL: f64 = 1e-10;

fn solve3(m: [[f64; 3]; 3], r: [f64; 3]) -> Option<[f64; 3]> {
    let inv = invert3(m)?;
    let mut out = [0.0; 3];
    for i in 0..3 {
        out[i] = (0..3).map(|j| inv[i][j] * r[j]).sum();
    }
    Some(out)
}

fn invert3(m: [[f64; 3]; 3]) -> Option<[[f64; 3]; 3]> {
    let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    let scale = m.iter().flatten().fold(0.0f64, |a, &x| a.max(x.abs()));
    if det.abs() <= 1e-14 * scale.powi(3) || !det.is_finite() {
        return None;
    }
    let mut inv = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let (i1, i2) = ((j + 1) % 3, (j + 2) % 3);
            let (j1, j2) = ((i + 1) % 3, (i + 2) % 3);
            inv[i][j] = (m[i1][j1] * m[i2][j2] - m[i1][j2] * m[i2][j1]) / det;
        }
    }
    Some(inv)
}

fn fringe_model(p: &[f64; 3], phase: f64) -> f64 {
    p[0] + p[1] * (phase - p[2]).cos()
}

fn residual_ss(p: &[f64; 3], phases: &[f64], y: &[f64]) -> f64 {
    phases.iter().zip(y).map(|(&ph, &v)| (v - fringe_model(p, ph)).powi(2)).sum()
}

/// `JᵀJ` and `Jᵀr` of the model at `p`.
fn normal_equations(p: &[f64; 3], phases: &[f64], y: &[f64]) -> ([[f64; 3]; 3], [f64; 3]) {
    let mut jtj = [[0.0; 3]; 3];
    let mut jtr = [0.0; 3];
    for (&ph, &v) in phases.iter().zip(y) {
        let (s, c) = (ph - p[2]).sin_cos();
        let row = [1.0, c, p[1] * s];
        let r = v - fringe_model(p, ph);
        for i in 0..3 {
            jtr[i] += row[i] * r;
            for j in 0..3 {
                jtj[i][j] += row[i] * row[j];
            }
        }
    }
    (jtj, jtr)
}

/// Keeps `A, B >= 0` by folding the sign of `B` into the phase.
fn canonicalize(p: &mut [f64; 3]) {
    if p[1] < 0.0 {
        p[1] = -p[1];
        p[2] += PI;
    }
    p[0] = p[0].max(0.0);
    p[2] = crate::qubit::wrap_angle(p[2]);
}

/// Least-squares fit of `A + B cos(Φ − φ)`; returns parameters and the
/// covariance of the estimator under binomial shot noise.
fn fit_sinusoid(phases: &[f64], y: &[f64], shots: u64) -> Result<([f64; 3], [[f64; 3]; 3])> {
    let n = phases.len() as f64;
    // Fourier projection: exact least squares for equally spaced phases.
    let a0 = y.iter().sum::<f64>() / n;
    let ac = 2.0 / n * phases.iter().zip(y).map(|(&ph, &v)| v * ph.cos()).sum::<f64>();
    let as_ = 2.0 / n * phases.iter().zip(y).map(|(&ph, &v)| v * ph.sin()).sum::<f64>();
    let mut p = [a0, ac.hypot(as_), as_.atan2(ac)];
    canonicalize(&mut p);

    let mut lambda = 1e-6;
    let mut rss = residual_ss(&p, phases, y);
    let mut converged = false;
    for _ in 0..FIT_MAX_ITER {
        let (jtj, jtr) = normal_equations(&p, phases, y);
        let mut damped = jtj;
        for (i, row) in damped.iter_mut().enumerate() {
            row[i] += lambda * jtj[i][i].max(1e-12);
        }
        let Some(step) = solve3(damped, jtr) else {
            // Jacobian rank-deficient (B = 0): phase is unidentifiable.
            converged = true;
            break;
        };
        let mut trial = [p[0] + step[0], p[1] + step[1], p[2] + step[2]];
        canonicalize(&mut trial);
        let trial_rss = residual_ss(&trial, phases, y);
        let step_norm = step.iter().map(|s| s * s).sum::<f64>().sqrt();
        if trial_rss <= rss {
            p = trial;
            rss = trial_rss;
            lambda = (lambda * 0.1).max(1e-12);
        } else {
            lambda *= 10.0;
        }
        if step_norm < FIT_STEP_TOL {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NonConvergence(FIT_MAX_ITER));
    }

    // Sandwich covariance (JᵀJ)⁻¹ Jᵀ Σ J (JᵀJ)⁻¹ with Σ the binomial
    // variance of the fitted model at each phase.
    let mut jtj = [[0.0; 3]; 3];
    let mut meat = [[0.0; 3]; 3];
    for &ph in phases {
        let (s, c) = (ph - p[2]).sin_cos();
        let row = [1.0, c, p[1] * s];
        let mu = fringe_model(&p, ph).clamp(0.0, 1.0);
        let var = (mu * (1.0 - mu)).max(0.25 / (shots as f64 * shots as f64)) / shots as f64;
        for i in 0..3 {
            for j in 0..3 {
                jtj[i][j] += row[i] * row[j];
                meat[i][j] += var * row[i] * row[j];
            }
        }
    }
    let cov = match invert3(jtj) {
        Some(inv) => {
            let mut tmp = [[0.0; 3]; 3];
            let mut out = [[0.0; 3]; 3];
            for i in 0..3 {
                for j in 0..3 {
                    tmp[i][j] = (0..3).map(|k| inv[i][k] * meat[k][j]).sum();
                }
            }
            for i in 0..3 {
                for j in 0..3 {
                    out[i][j] = (0..3).map(|k| tmp[i][k] * inv[k][j]).sum();
                }
            }
            out
        }
        None => {
            let mut out = [[f64::INFINITY; 3]; 3];
            // offset and amplitude stay identifiable without the phase
            let var = a0.clamp(0.0, 1.0) * (1.0 - a0.clamp(0.0, 1.0)) / shots as f64;
            out[0][0] = var / n;
            out[1][1] = 2.0 * var / n;
            out[0][1] = 0.0;
            out[1][0] = 0.0;
            out
        }
    };
    Ok((p, cov))
}

/// Fits the fringe and recovers `(θm, φm)`.
///
/// With a direct readout the polar angle is `atan2(B, A − P_direct)`, which
/// needs no contrast calibration. Without one the fit assumes full contrast
/// and the upper hemisphere, `θm = asin(2B)`; see
/// [`fit_fringe_with_contrast`].
pub fn fit_fringe(data: &FringeData) -> Result<FitResult> {
    fit_fringe_with_contrast(data, 1.0)
}

/// [`fit_fringe`] with a calibrated readout contrast (`1 − 2P̂_D` from
/// sequence D) used when no direct readout is available.
pub fn fit_fringe_with_contrast(data: &FringeData, contrast: f64) -> Result<FitResult> {
    data.validate()?;
    let mut distinct = data.phases.iter().map(|p| p.rem_euclid(TAU)).collect::<Vec<_>>();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    if distinct.len() < 3 {
        return Err(invalid("fringe fit needs at least 3 distinct phases"));
    }
    if !(contrast > 0.0 && contrast <= 1.0) {
        return Err(invalid(format!("readout contrast must lie in (0, 1], got {contrast}")));
    }
    let y = data.fractions();
    let (p, cov) = fit_sinusoid(&data.phases, &y, data.shots)?;
    let (offset, amp, phi) = (p[0], p[1], p[2]);
    let sigma_b = cov[1][1].sqrt();
    let sigma_phi = cov[2][2].sqrt();

    let (theta, sigma_theta) = match data.direct {
        Some((count, shots)) => {
            let pd = count as f64 / shots as f64;
            let pd_clamped = pd.clamp(0.5 / shots as f64, 1.0 - 0.5 / shots as f64);
            let var_d = pd_clamped * (1.0 - pd_clamped) / shots as f64;
            let x = offset - pd;
            let r2 = x * x + amp * amp;
            let theta = amp.atan2(x);
            let var = if r2 > 0.0 {
                (x * x * cov[1][1] + amp * amp * (cov[0][0] + var_d) - 2.0 * x * amp * cov[0][1]) / (r2 * r2)
            } else {
                f64::INFINITY
            };
            (theta, var.max(0.0).sqrt())
        }
        None => {
            let s = (2.0 * amp / contrast).min(1.0);
            let theta = s.asin();
            let ds = 2.0 / contrast;
            let c = theta.cos();
            let sigma = if c > 0.0 { ds * sigma_b / c } else { f64::INFINITY };
            (theta, sigma)
        }
    };

    if amp < 1e-9 || amp <= 3.0 * sigma_b {
        return Err(Error::FitDegenerate { theta_m: theta });
    }
    Ok(FitResult {
        theta_m: theta,
        phi_m: phi,
        sigma_theta,
        sigma_phi,
        offset,
        amplitude: amp,
    })
}

/// Pure-state fidelity at the fitted angles with linearly propagated 1σ.
pub fn fidelity_from_fit(fit: &FitResult, target: &TargetRotation) -> (f64, f64) {
    let f = fidelity_from_angles(target, fit.theta_m, fit.phi_m);
    let d = fit.phi_m - target.phi;
    let (st, ct) = target.theta.sin_cos();
    let (sm, cm) = fit.theta_m.sin_cos();
    let df_dtheta = 0.5 * (-ct * sm + st * cm * d.cos());
    let df_dphi = -0.5 * st * sm * d.sin();
    let sigma = ((df_dtheta * fit.sigma_theta).powi(2) + (df_dphi * fit.sigma_phi).powi(2)).sqrt();
    (f, sigma)
}

/// Fit-based fidelity grids `(shaped, reference)` from sequences B' and C'.
/// A degenerate fit contributes the fidelity at its polar estimate.
pub fn measure_ramsey_grid(
    seq: &PulseSequence,
    reference: &PulseSequence,
    target: &TargetRotation,
    f_axis: &[f64],
    g_axis: &[f64],
    mode: AreaErrorMode,
    cfg: &ExperimentConfig,
) -> Result<(FidelityGrid, FidelityGrid)> {
    cfg.validate()?;
    let ng = g_axis.len();
    let fid = |data: &FringeData| -> Result<f64> {
        match fit_fringe(data) {
            Ok(fit) => Ok(fidelity_from_fit(&fit, target).0),
            Err(Error::FitDegenerate { theta_m }) => Ok(fidelity_from_angles(target, theta_m, target.phi)),
            Err(e) => Err(e),
        }
    };
    let pairs: Vec<(f64, f64)> = (0..f_axis.len() * ng)
        .into_par_iter()
        .map(|k| {
            let errors = ErrorParams::new(f_axis[k / ng], g_axis[k % ng]).with_mode(mode);
            let shaped = run_ramsey_experiment_at(seq, &errors, cfg, 2 * k as u64)?;
            let rect = run_ramsey_experiment_at(reference, &errors, cfg, 2 * k as u64 + 1)?;
            Ok((fid(&shaped)?, fid(&rect)?))
        })
        .collect::<Result<_>>()?;
    let (a, b): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    Ok((
        FidelityGrid::new(f_axis.to_vec(), g_axis.to_vec(), a)?,
        FidelityGrid::new(f_axis.to_vec(), g_axis.to_vec(), b)?,
    ))
}

/// Exact Bloch angles of the state after `first_pulse`, for comparison with
/// fitted values.
pub fn true_angles(first_pulse: &PulseSequence, errors: &ErrorParams) -> Result<(f64, f64)> {
    crate::qubit::bloch_angles(&propagate(first_pulse, errors, &QubitState::ground()))
}
