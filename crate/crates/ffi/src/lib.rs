//! C interface to `robustpulse`.
//!
//! Objects cross the boundary as opaque handles (`RpPulse`, `RpGrid`) that
//! are created by `rp_*` constructors and released with the matching
//! `*_free` function. Every fallible call returns an `RpStatus`; on failure a
//! human-readable message is available from `rp_last_error_message` on the
//! same thread. Panics never unwind into C and are reported as
//! `RP_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use robustpulse::design::{design_pulse, DesignOutcome, DesignProblem, EnsembleSpec, Initialization};
use robustpulse::fidelity::{interpolate, state_fidelity, sweep_grid, threshold_mask};
use robustpulse::io::{parse_pulse_file, write_pulse_file};
use robustpulse::measure::{fit_fringe, run_ramsey_experiment, ExperimentConfig, FringeData};
use robustpulse::pulses::{bb1, corpse_pi, rectangular, scrofulous_pi, Bb1Placement};
use robustpulse::qubit::{bloch_angles, propagate};
use robustpulse::{
    AreaErrorMode, Error, ErrorParams, FidelityGrid, Preparation, PulseSequence, PulseStep, QubitState,
    TargetRotation, DEFAULT_RABI,
};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    InvalidTheta = 3,
    DegenerateState = 4,
    ZeroReference = 5,
    OutOfBounds = 6,
    FitDegenerate = 7,
    NonConvergence = 8,
    NoImprovement = 9,
    Parse = 10,
    BufferTooSmall = 11,
    Panic = 12,
}

pub const RP_FAMILY_RECT: u32 = 0;
pub const RP_FAMILY_CORPSE: u32 = 1;
pub const RP_FAMILY_SCROFULOUS: u32 = 2;
pub const RP_FAMILY_BB1: u32 = 3;

pub const RP_PLACEMENT_BEFORE: u32 = 0;
pub const RP_PLACEMENT_AFTER: u32 = 1;
pub const RP_PLACEMENT_SPLIT: u32 = 2;

pub const RP_G_AMPLITUDE: u32 = 0;
pub const RP_G_DURATION: u32 = 1;

pub const RP_INIT_RANDOM: u32 = 0;
pub const RP_INIT_RECT: u32 = 1;

pub const RP_OUTCOME_CONVERGED: u32 = 0;
pub const RP_OUTCOME_MAX_ITERATIONS: u32 = 1;
pub const RP_OUTCOME_NO_IMPROVEMENT: u32 = 2;

/// Piecewise-constant pulse.
pub struct RpPulse(PulseSequence);

/// Fidelity grid over `(f, g)`.
pub struct RpGrid(FidelityGrid);

/// Parameters of `rp_design`. Fill with `rp_design_params_default` first.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct RpDesignParams {
    pub target_theta: f64,
    pub target_phi: f64,
    pub n_steps: u32,
    /// µs.
    pub step_duration: f64,
    /// rad/µs.
    pub rabi_nominal: f64,
    pub max_amplitude: f64,
    pub f_min: f64,
    pub f_max: f64,
    pub f_samples: u32,
    pub g_min: f64,
    pub g_max: f64,
    pub g_samples: u32,
    pub g_mode: u32,
    pub max_iterations: u32,
    pub convergence_tol: f64,
    pub init: u32,
    pub seed: u64,
}

/// Result of `rp_fit_fringe`.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct RpFit {
    pub theta_m: f64,
    pub phi_m: f64,
    pub sigma_theta: f64,
    pub sigma_phi: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

struct Failure(RpStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::DegenerateState(_) => RpStatus::DegenerateState,
            Error::InvalidTheta(_) => RpStatus::InvalidTheta,
            Error::ZeroReference => RpStatus::ZeroReference,
            Error::OutOfBounds { .. } => RpStatus::OutOfBounds,
            Error::FitDegenerate { .. } => RpStatus::FitDegenerate,
            Error::NonConvergence(_) => RpStatus::NonConvergence,
            Error::NoImprovement => RpStatus::NoImprovement,
            Error::InvalidInput(_) => RpStatus::InvalidInput,
            Error::Parse { .. } => RpStatus::Parse,
        };
        Failure(status, e.to_string())
    }
}

fn fail(status: RpStatus, msg: impl Into<String>) -> Failure {
    Failure(status, msg.into())
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = c);
}

fn guard(body: impl FnOnce() -> Result<(), Failure>) -> RpStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            set_last_error("");
            RpStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_last_error(&msg);
            status
        }
        Err(_) => {
            set_last_error("internal panic");
            RpStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| fail(RpStatus::NullPointer, format!("{name} is null")))
}

unsafe fn out<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| fail(RpStatus::NullPointer, format!("{name} is null")))
}

unsafe fn input_slice<'a, T>(p: *const T, len: usize, name: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(fail(RpStatus::NullPointer, format!("{name} is null")));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn output_slice<'a, T>(p: *mut T, capacity: usize, needed: usize, name: &str) -> Result<&'a mut [T], Failure> {
    if capacity < needed {
        return Err(fail(
            RpStatus::BufferTooSmall,
            format!("{name} holds {capacity} elements, {needed} needed"),
        ));
    }
    if p.is_null() {
        return Err(fail(RpStatus::NullPointer, format!("{name} is null")));
    }
    Ok(slice::from_raw_parts_mut(p, needed))
}

unsafe fn text<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(fail(RpStatus::NullPointer, format!("{name} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(RpStatus::InvalidInput, format!("{name} is not valid UTF-8")))
}

fn g_mode(code: u32) -> Result<AreaErrorMode, Failure> {
    match code {
        RP_G_AMPLITUDE => Ok(AreaErrorMode::AmplitudeScale),
        RP_G_DURATION => Ok(AreaErrorMode::DurationScale),
        _ => Err(fail(RpStatus::InvalidInput, format!("unknown g mode {code}"))),
    }
}

fn errors(f: f64, g: f64, mode: u32) -> Result<ErrorParams, Failure> {
    Ok(ErrorParams::new(f, g).with_mode(g_mode(mode)?))
}

fn boxed<T>(value: T) -> *mut T {
    Box::into_raw(Box::new(value))
}

/// Message describing the most recent failure on the calling thread, or an
/// empty string. The pointer stays valid until the next `rp_*` call on the
/// same thread.
#[no_mangle]
pub extern "C" fn rp_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn rp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Nominal Rabi frequency 2π × 10 kHz in rad/µs.
#[no_mangle]
pub extern "C" fn rp_default_rabi() -> f64 {
    DEFAULT_RABI
}

/// Builds a library pulse. `theta` is the rotation angle (CORPSE and
/// SCROFULOUS require π), `drive_phase` the phase of the nominal rotation,
/// `placement` is only read for BB1 and `n_steps` only for rectangular
/// pulses.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn rp_pulse_builtin(
    family: u32,
    theta: f64,
    drive_phase: f64,
    placement: u32,
    n_steps: u32,
    rabi_nominal: f64,
    out: *mut *mut RpPulse,
) -> RpStatus {
    guard(|| {
        let out = out_ptr(out)?;
        let is_pi = (theta - std::f64::consts::PI).abs() < 1e-12;
        let seq = match family {
            RP_FAMILY_RECT => rectangular(theta, drive_phase, rabi_nominal, n_steps as usize)?,
            RP_FAMILY_CORPSE | RP_FAMILY_SCROFULOUS if !is_pi => return Err(Error::InvalidTheta(theta).into()),
            RP_FAMILY_CORPSE => corpse_pi(drive_phase, rabi_nominal)?,
            RP_FAMILY_SCROFULOUS => scrofulous_pi(drive_phase, rabi_nominal)?,
            RP_FAMILY_BB1 => {
                let placement = match placement {
                    RP_PLACEMENT_BEFORE => Bb1Placement::WBefore,
                    RP_PLACEMENT_AFTER => Bb1Placement::WAfter,
                    RP_PLACEMENT_SPLIT => Bb1Placement::Split,
                    _ => return Err(fail(RpStatus::InvalidInput, format!("unknown placement {placement}"))),
                };
                bb1(theta, drive_phase, placement, rabi_nominal)?
            }
            _ => return Err(fail(RpStatus::InvalidInput, format!("unknown pulse family {family}"))),
        };
        *out = boxed(RpPulse(seq));
        Ok(())
    })
}

unsafe fn out_ptr<'a, T>(out: *mut *mut T) -> Result<&'a mut *mut T, Failure> {
    let slot = self::out(out, "out")?;
    *slot = ptr::null_mut();
    Ok(slot)
}

/// Builds a pulse from `n` steps given as parallel arrays.
///
/// # Safety
/// Each array must hold `n` readable elements; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rp_pulse_from_steps(
    amplitudes: *const f64,
    phases: *const f64,
    durations: *const f64,
    n: usize,
    rabi_nominal: f64,
    out: *mut *mut RpPulse,
) -> RpStatus {
    guard(|| {
        let out = out_ptr(out)?;
        let a = input_slice(amplitudes, n, "amplitudes")?;
        let p = input_slice(phases, n, "phases")?;
        let d = input_slice(durations, n, "durations")?;
        let steps = (0..n)
            .map(|k| PulseStep::new(a[k], p[k], d[k]))
            .collect::<Result<Vec<_>, _>>()?;
        *out = boxed(RpPulse(PulseSequence::new(steps, rabi_nominal)?));
        Ok(())
    })
}

/// Parses the text pulse-file format.
///
/// # Safety
/// `source` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rp_pulse_parse(source: *const c_char, out: *mut *mut RpPulse) -> RpStatus {
    guard(|| {
        let out = out_ptr(out)?;
        let file = parse_pulse_file(text(source, "source")?)?;
        *out = boxed(RpPulse(file.sequence));
        Ok(())
    })
}

/// Serializes a pulse to the text pulse-file format. `comment` may be null.
/// The returned string must be released with `rp_string_free`.
///
/// # Safety
/// `pulse` must be a live handle, `comment` null or NUL-terminated, `out`
/// writable.
#[no_mangle]
pub unsafe extern "C" fn rp_pulse_to_text(
    pulse: *const RpPulse,
    comment: *const c_char,
    out: *mut *mut c_char,
) -> RpStatus {
    guard(|| {
        let out = out_ptr(out)?;
        let pulse = deref(pulse, "pulse")?;
        let comment = if comment.is_null() {
            None
        } else {
            Some(text(comment, "comment")?)
        };
        let body = write_pulse_file(&pulse.0, comment);
        *out = CString::new(body)
            .map_err(|_| fail(RpStatus::InvalidInput, "comment contains NUL"))?
            .into_raw();
        Ok(())
    })
}

/// # Safety
/// `s` must be null or a string returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rp_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// # Safety
/// `pulse` must be null or a handle returned by this library and not yet
/// freed.
#[no_mangle]
pub unsafe extern "C" fn rp_pulse_free(pulse: *mut RpPulse) {
    if !pulse.is_null() {
        drop(Box::from_raw(pulse));
    }
}

/// Number of steps, or 0 for a null handle.
///
/// # Safety
/// `pulse` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rp_pulse_len(pulse: *const RpPulse) -> usize {
    pulse.as_ref().map_or(0, |p| p.0.len())
}

/// Total duration in µs, or NaN for a null handle.
///
/// # Safety
/// `pulse` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rp_pulse_duration(pulse: *const RpPulse) -> f64 {
    pulse.as_ref().map_or(f64::NAN, |p| p.0.duration())
}

/// Copies the steps into parallel arrays of at least `rp_pulse_len`
/// elements.
///
/// # Safety
/// `pulse` must be a live handle and each array must hold `capacity`
/// writable elements.
#[no_mangle]
pub unsafe extern "C" fn rp_pulse_steps(
    pulse: *const RpPulse,
    amplitudes: *mut f64,
    phases: *mut f64,
    durations: *mut f64,
    capacity: usize,
) -> RpStatus {
    guard(|| {
        let pulse = deref(pulse, "pulse")?;
        let n = pulse.0.len();
        let a = output_slice(amplitudes, capacity, n, "amplitudes")?;
        let p = output_slice(phases, capacity, n, "phases")?;
        let d = output_slice(durations, capacity, n, "durations")?;
        for (k, step) in pulse.0.steps().iter().enumerate() {
            a[k] = step.amplitude;
            p[k] = step.phase;
            d[k] = step.duration;
        }
        Ok(())
    })
}

/// Applies the pulse under errors `(f, g)` to the preparation
/// `a0|0⟩⟨0| + (1 − a0)|1⟩⟨1|` and reports the `|1⟩` population and the
/// Bloch vector. `bloch` may be null.
///
/// # Safety
/// `pulse` must be a live handle, `population_one` writable and `bloch`
/// null or writable for three elements.
#[no_mangle]
pub unsafe extern "C" fn rp_propagate(
    pulse: *const RpPulse,
    f: f64,
    g: f64,
    g_mode: u32,
    a0: f64,
    population_one: *mut f64,
    bloch: *mut f64,
) -> RpStatus {
    guard(|| {
        let pulse = deref(pulse, "pulse")?;
        let p1 = out(population_one, "population_one")?;
        let prep = Preparation::from_a0(a0)?;
        let state = propagate(&pulse.0, &errors(f, g, g_mode)?, &prep.initial_state());
        *p1 = state.population_one();
        if !bloch.is_null() {
            slice::from_raw_parts_mut(bloch, 3).copy_from_slice(&state.bloch_vector());
        }
        Ok(())
    })
}

/// Polar and azimuthal angles of the pure state reached from `|0⟩`.
///
/// # Safety
/// `pulse` must be a live handle; `theta` and `phi` writable.
#[no_mangle]
pub unsafe extern "C" fn rp_bloch_angles(
    pulse: *const RpPulse,
    f: f64,
    g: f64,
    g_mode: u32,
    theta: *mut f64,
    phi: *mut f64,
) -> RpStatus {
    guard(|| {
        let pulse = deref(pulse, "pulse")?;
        let (theta, phi) = (out(theta, "theta")?, out(phi, "phi")?);
        let state = propagate(&pulse.0, &errors(f, g, g_mode)?, &QubitState::ground());
        (*theta, *phi) = bloch_angles(&state)?;
        Ok(())
    })
}

/// State fidelity between the target `|θ, φ⟩` and the state reached from
/// `|0⟩` under errors `(f, g)`.
///
/// # Safety
/// `pulse` must be a live handle; `fidelity` writable.
#[no_mangle]
pub unsafe extern "C" fn rp_state_fidelity(
    pulse: *const RpPulse,
    target_theta: f64,
    target_phi: f64,
    f: f64,
    g: f64,
    g_mode: u32,
    fidelity: *mut f64,
) -> RpStatus {
    guard(|| {
        let pulse = deref(pulse, "pulse")?;
        let fidelity = out(fidelity, "fidelity")?;
        let state = propagate(&pulse.0, &errors(f, g, g_mode)?, &QubitState::ground());
        *fidelity = state_fidelity(&TargetRotation::new(target_theta, target_phi), &state);
        Ok(())
    })
}

/// Sweeps the state fidelity over `f_axis × g_axis` (both sorted).
///
/// # Safety
/// `pulse` must be a live handle, the axes readable for `nf` and `ng`
/// elements, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rp_grid_sweep(
    pulse: *const RpPulse,
    target_theta: f64,
    target_phi: f64,
    a0: f64,
    f_axis: *const f64,
    nf: usize,
    g_axis: *const f64,
    ng: usize,
    g_mode: u32,
    out: *mut *mut RpGrid,
) -> RpStatus {
    guard(|| {
        let out = out_ptr(out)?;
        let pulse = deref(pulse, "pulse")?;
        let f_axis = input_slice(f_axis, nf, "f_axis")?;
        let g_axis = input_slice(g_axis, ng, "g_axis")?;
        let grid = sweep_grid(
            &pulse.0,
            &TargetRotation::new(target_theta, target_phi),
            &Preparation::from_a0(a0)?,
            f_axis,
            g_axis,
            self::g_mode(g_mode)?,
        )?;
        *out = boxed(RpGrid(grid));
        Ok(())
    })
}

/// # Safety
/// `grid` must be null or a handle returned by this library and not yet
/// freed.
#[no_mangle]
pub unsafe extern "C" fn rp_grid_free(grid: *mut RpGrid) {
    if !grid.is_null() {
        drop(Box::from_raw(grid));
    }
}

/// Grid shape; either pointer may be null.
///
/// # Safety
/// `grid` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn rp_grid_shape(grid: *const RpGrid, nf: *mut usize, ng: *mut usize) -> RpStatus {
    guard(|| {
        let grid = deref(grid, "grid")?;
        if let Some(nf) = nf.as_mut() {
            *nf = grid.0.f_axis().len();
        }
        if let Some(ng) = ng.as_mut() {
            *ng = grid.0.g_axis().len();
        }
        Ok(())
    })
}

/// Copies the values in row-major order (`values[i * ng + j]` is
/// `F(f_i, g_j)`).
///
/// # Safety
/// `grid` must be a live handle and `values` writable for `capacity`
/// elements.
#[no_mangle]
pub unsafe extern "C" fn rp_grid_values(grid: *const RpGrid, values: *mut f64, capacity: usize) -> RpStatus {
    guard(|| {
        let grid = deref(grid, "grid")?;
        output_slice(values, capacity, grid.0.values().len(), "values")?.copy_from_slice(grid.0.values());
        Ok(())
    })
}

/// Reference fidelity `Fm`, or NaN for a null handle.
///
/// # Safety
/// `grid` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rp_grid_reference(grid: *const RpGrid) -> f64 {
    grid.as_ref().map_or(f64::NAN, |g| g.0.reference())
}

/// Bilinear interpolation at `(f, g)` inside the grid.
///
/// # Safety
/// `grid` must be a live handle; `value` writable.
#[no_mangle]
pub unsafe extern "C" fn rp_grid_interpolate(grid: *const RpGrid, f: f64, g: f64, value: *mut f64) -> RpStatus {
    guard(|| {
        let grid = deref(grid, "grid")?;
        let value = out(value, "value")?;
        *value = interpolate(&grid.0, f, g)?;
        Ok(())
    })
}

/// Writes 1 where `F/Fm > ratio` and 0 elsewhere, row-major.
///
/// # Safety
/// `grid` must be a live handle and `mask` writable for `capacity` bytes.
#[no_mangle]
pub unsafe extern "C" fn rp_grid_mask(grid: *const RpGrid, ratio: f64, mask: *mut u8, capacity: usize) -> RpStatus {
    guard(|| {
        let grid = deref(grid, "grid")?;
        let m = threshold_mask(&grid.0, ratio)?;
        let dst = output_slice(mask, capacity, m.cells().len(), "mask")?;
        for (d, &pass) in dst.iter_mut().zip(m.cells()) {
            *d = pass as u8;
        }
        Ok(())
    })
}

/// Defaults: π/2 target at azimuth −π/2, 200 steps of 0.5 µs, 2π × 10 kHz,
/// amplitude cap 1, 9 × 5 ensemble over f ∈ [−1, 1], g ∈ [−0.4, 0.4],
/// 2000 iterations, tolerance 1e-8, random init with seed 0.
///
/// # Safety
/// `params` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rp_design_params_default(params: *mut RpDesignParams) -> RpStatus {
    guard(|| {
        *out(params, "params")? = RpDesignParams {
            target_theta: std::f64::consts::FRAC_PI_2,
            target_phi: -std::f64::consts::FRAC_PI_2,
            n_steps: 200,
            step_duration: 0.5,
            rabi_nominal: DEFAULT_RABI,
            max_amplitude: 1.0,
            f_min: -1.0,
            f_max: 1.0,
            f_samples: 9,
            g_min: -0.4,
            g_max: 0.4,
            g_samples: 5,
            g_mode: RP_G_AMPLITUDE,
            max_iterations: 2000,
            convergence_tol: 1e-8,
            init: RP_INIT_RANDOM,
            seed: 0,
        };
        Ok(())
    })
}

/// Runs the ensemble-robust design. On success `out` receives the pulse,
/// `final_cost` the mean ensemble fidelity and `outcome` one of the
/// `RP_OUTCOME_*` codes; `final_cost` and `outcome` may be null.
///
/// # Safety
/// `params` must be readable, `out` writable, `final_cost` and `outcome`
/// null or writable.
#[no_mangle]
pub unsafe extern "C" fn rp_design(
    params: *const RpDesignParams,
    out: *mut *mut RpPulse,
    final_cost: *mut f64,
    outcome: *mut u32,
) -> RpStatus {
    guard(|| {
        let out = out_ptr(out)?;
        let p = deref(params, "params")?;
        let ensemble = EnsembleSpec::uniform_box(
            (p.f_min, p.f_max),
            p.f_samples as usize,
            (p.g_min, p.g_max),
            p.g_samples as usize,
            g_mode(p.g_mode)?,
        )?;
        let mut problem = DesignProblem::new(
            TargetRotation::new(p.target_theta, p.target_phi),
            p.n_steps as usize,
            p.step_duration,
            ensemble,
        );
        problem.rabi_nominal = p.rabi_nominal;
        problem.max_amplitude = p.max_amplitude;
        problem.max_iterations = p.max_iterations as usize;
        problem.convergence_tol = p.convergence_tol;
        let init = match p.init {
            RP_INIT_RANDOM => Initialization::Random(p.seed),
            RP_INIT_RECT => Initialization::Rectangular,
            other => return Err(fail(RpStatus::InvalidInput, format!("unknown init {other}"))),
        };
        let report = design_pulse(&problem, init)?;
        if let Some(c) = final_cost.as_mut() {
            *c = report.final_cost();
        }
        if let Some(o) = outcome.as_mut() {
            *o = match report.outcome {
                DesignOutcome::Converged => RP_OUTCOME_CONVERGED,
                DesignOutcome::MaxIterations => RP_OUTCOME_MAX_ITERATIONS,
                DesignOutcome::NoImprovement => RP_OUTCOME_NO_IMPROVEMENT,
            };
        }
        *out = boxed(RpPulse(report.sequence));
        Ok(())
    })
}

/// Simulates a Ramsey fringe of `n_phases` equally spaced analysis phases
/// with `shots` repetitions each. `counts` receives the `|1⟩` counts per
/// phase and `direct` the count of the direct readout (may be null).
///
/// # Safety
/// `pulse` must be a live handle, `counts` writable for `capacity`
/// elements and `direct` null or writable.
#[no_mangle]
pub unsafe extern "C" fn rp_ramsey_simulate(
    pulse: *const RpPulse,
    f: f64,
    g: f64,
    g_mode: u32,
    a0: f64,
    shots: u64,
    n_phases: u32,
    seed: u64,
    counts: *mut u64,
    capacity: usize,
    direct: *mut u64,
) -> RpStatus {
    guard(|| {
        let pulse = deref(pulse, "pulse")?;
        let cfg = ExperimentConfig {
            shots_per_point: shots,
            prep: Preparation::from_a0(a0)?,
            n_phases: n_phases as usize,
            rng_seed: seed,
            detection_flip_prob: 0.0,
        };
        cfg.validate()?;
        let dst = output_slice(counts, capacity, cfg.n_phases, "counts")?;
        let data = run_ramsey_experiment(&pulse.0, &errors(f, g, g_mode)?, &cfg)?;
        dst.copy_from_slice(&data.counts_one);
        if let (Some(d), Some((c, _))) = (direct.as_mut(), data.direct) {
            *d = c;
        }
        Ok(())
    })
}

/// Fits `½(1 + sin θm cos(φm − Φ))` to a fringe. Pass `direct_shots = 0`
/// when no direct readout was taken. A flat fringe yields
/// `RP_STATUS_FIT_DEGENERATE` with `theta_m` set and the other fields NaN.
///
/// # Safety
/// `phases` and `counts` must be readable for `n` elements; `fit` writable.
#[no_mangle]
pub unsafe extern "C" fn rp_fit_fringe(
    phases: *const f64,
    counts: *const u64,
    n: usize,
    shots: u64,
    direct_count: u64,
    direct_shots: u64,
    fit: *mut RpFit,
) -> RpStatus {
    guard(|| {
        let fit = out(fit, "fit")?;
        let data = FringeData {
            phases: input_slice(phases, n, "phases")?.to_vec(),
            counts_one: input_slice(counts, n, "counts")?.to_vec(),
            shots,
            direct: (direct_shots > 0).then_some((direct_count, direct_shots)),
        };
        match fit_fringe(&data) {
            Ok(r) => {
                *fit = RpFit {
                    theta_m: r.theta_m,
                    phi_m: r.phi_m,
                    sigma_theta: r.sigma_theta,
                    sigma_phi: r.sigma_phi,
                };
                Ok(())
            }
            Err(e) => {
                if let Error::FitDegenerate { theta_m } = e {
                    *fit = RpFit {
                        theta_m,
                        phi_m: f64::NAN,
                        sigma_theta: f64::NAN,
                        sigma_phi: f64::NAN,
                    };
                }
                Err(e.into())
            }
        }
    })
}
