//! Fidelity against target rotations and sweeps over the `(f, g)` error
//! plane.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::qubit::{propagate, AreaErrorMode, DensityMatrix, ErrorParams, PulseSequence, QubitState, Rotation};

/// The state `|θ, φ⟩` an ideal pulse would produce from `|0⟩`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetRotation {
    pub theta: f64,
    pub phi: f64,
}

impl TargetRotation {
    pub fn new(theta: f64, phi: f64) -> Self {
        TargetRotation { theta, phi }
    }

    /// Target state reached from `|0⟩` by an ideal rotation of `angle` about
    /// the equatorial axis at azimuth `drive_phase`.
    pub fn from_drive(angle: f64, drive_phase: f64) -> Self {
        let u = Rotation::from_axis_angle([drive_phase.cos(), drive_phase.sin(), 0.0], angle);
        let out = QubitState::ground().evolve(&u);
        let (theta, phi) = crate::qubit::bloch_angles(&out).expect("pure state");
        TargetRotation { theta, phi }
    }

    pub fn state(&self) -> QubitState {
        QubitState::from_bloch_angles(self.theta, self.phi)
    }

    /// Whether this is a population-transfer (π) target.
    pub fn is_transfer(&self) -> bool {
        (self.theta - PI).abs() < 1e-9
    }
}

/// Initial populations after imperfect optical pumping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Preparation {
    a0: f64,
    a1: f64,
}

impl Preparation {
    pub const PURE: Preparation = Preparation { a0: 1.0, a1: 0.0 };

    pub fn new(a0: f64, a1: f64) -> Result<Self> {
        if !((0.0..=1.0).contains(&a0) && (0.0..=1.0).contains(&a1)) {
            return Err(invalid(format!("preparation populations must lie in [0, 1], got a0={a0}, a1={a1}")));
        }
        if (a0 + a1 - 1.0).abs() > 1e-12 {
            return Err(invalid(format!("preparation populations must sum to 1, got {}", a0 + a1)));
        }
        Ok(Preparation { a0, a1 })
    }

    /// Preparation with ground-state population `a0` and `a1 = 1 - a0`.
    pub fn from_a0(a0: f64) -> Result<Self> {
        Preparation::new(a0, 1.0 - a0)
    }

    pub fn a0(&self) -> f64 {
        self.a0
    }

    pub fn a1(&self) -> f64 {
        self.a1
    }

    pub fn is_pure(&self) -> bool {
        self.a1 == 0.0
    }

    /// The prepared state; pure `|0⟩` when `a1 = 0`.
    pub fn initial_state(&self) -> QubitState {
        if self.is_pure() {
            QubitState::ground()
        } else {
            QubitState::mixed(DensityMatrix::diagonal(self.a0, self.a1).expect("validated populations"))
        }
    }
}

/// `⟨θ,φ| ρ |θ,φ⟩`, which for pure states is `|⟨θ,φ|θm,φm⟩|²`.
pub fn state_fidelity(target: &TargetRotation, achieved: &QubitState) -> f64 {
    let t = match target.state() {
        QubitState::Pure(c) => c,
        QubitState::Mixed(_) => unreachable!(),
    };
    let f = match achieved {
        QubitState::Pure(c) => (t[0].conj() * c[0] + t[1].conj() * c[1]).norm_sqr(),
        QubitState::Mixed(rho) => {
            let r = rho.elements();
            let mut acc = 0.0;
            for i in 0..2 {
                for j in 0..2 {
                    acc += (t[i].conj() * r[i][j] * t[j]).re;
                }
            }
            acc
        }
    };
    f.clamp(0.0, 1.0)
}

/// Pure-state fidelity between `|θ,φ⟩` and `|θm,φm⟩` in closed form.
pub fn fidelity_from_angles(target: &TargetRotation, theta_m: f64, phi_m: f64) -> f64 {
    let f = 0.5
        * (1.0
            + target.theta.cos() * theta_m.cos()
            + target.theta.sin() * theta_m.sin() * (phi_m - target.phi).cos());
    f.clamp(0.0, 1.0)
}

/// Baseline-subtracted π-transfer signal `P(|1⟩) - a1`. For a perfect π
/// pulse this reaches the ceiling `a0 - a1`.
pub fn transfer_contrast(achieved: &QubitState, prep: &Preparation) -> f64 {
    (achieved.population_one() - prep.a1).clamp(0.0, 1.0)
}

/// Which fidelity figure a grid holds. The conventions are not
/// interchangeable for impure preparations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FidelityConvention {
    /// Quantum state fidelity `⟨target|ρ|target⟩`.
    #[default]
    StateOverlap,
    /// `P(|1⟩) - a1`, ceiling `a0 - a1`. Meaningful for π targets.
    TransferContrast,
    /// Pure-state fidelity evaluated at the Bloch angles of `ρ`, i.e. what a
    /// fringe fit that normalizes out contrast reports.
    BlochDirection,
}

impl FidelityConvention {
    /// Contrast for π targets, Bloch-direction otherwise.
    pub fn for_target(target: &TargetRotation) -> Self {
        if target.is_transfer() {
            FidelityConvention::TransferContrast
        } else {
            FidelityConvention::BlochDirection
        }
    }

    pub fn evaluate(&self, target: &TargetRotation, achieved: &QubitState, prep: &Preparation) -> f64 {
        match self {
            FidelityConvention::StateOverlap => state_fidelity(target, achieved),
            FidelityConvention::TransferContrast => transfer_contrast(achieved, prep),
            FidelityConvention::BlochDirection => {
                let r = achieved.bloch_vector();
                let len = (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt();
                if len <= 1e-9 {
                    // no direction to compare
                    return 0.5;
                }
                let (st, ct) = target.theta.sin_cos();
                let (sp, cp) = target.phi.sin_cos();
                let dot = (st * cp * r[0] + st * sp * r[1] + ct * r[2]) / len;
                (0.5 * (1.0 + dot)).clamp(0.0, 1.0)
            }
        }
    }
}

/// Fidelities sampled on a rectangular `(f, g)` lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct FidelityGrid {
    f_axis: Vec<f64>,
    g_axis: Vec<f64>,
    /// Row-major: `values[i * g_axis.len() + j]` is `F(f_i, g_j)`.
    values: Vec<f64>,
    reference: f64,
}

fn check_axis(name: &str, axis: &[f64]) -> Result<()> {
    if axis.is_empty() {
        return Err(invalid(format!("{name} axis must not be empty")));
    }
    if axis.iter().any(|x| !x.is_finite()) {
        return Err(invalid(format!("{name} axis must be finite")));
    }
    if axis.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid(format!("{name} axis must be strictly increasing")));
    }
    Ok(())
}

impl FidelityGrid {
    /// Builds a grid. The reference `Fm` is the value at `(0, 0)` when both
    /// axes contain zero (to within 1e-12), otherwise the grid maximum.
    pub fn new(f_axis: Vec<f64>, g_axis: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        check_axis("f", &f_axis)?;
        check_axis("g", &g_axis)?;
        if values.len() != f_axis.len() * g_axis.len() {
            return Err(invalid(format!(
                "grid has {} values but axes imply {}",
                values.len(),
                f_axis.len() * g_axis.len()
            )));
        }
        if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(invalid("fidelity values must lie in [0, 1]"));
        }
        let zero_f = f_axis.iter().position(|&f| f.abs() < 1e-12);
        let zero_g = g_axis.iter().position(|&g| g.abs() < 1e-12);
        let reference = match (zero_f, zero_g) {
            (Some(i), Some(j)) => values[i * g_axis.len() + j],
            _ => values.iter().cloned().fold(0.0, f64::max),
        };
        Ok(FidelityGrid {
            f_axis,
            g_axis,
            values,
            reference,
        })
    }

    pub fn f_axis(&self) -> &[f64] {
        &self.f_axis
    }

    pub fn g_axis(&self) -> &[f64] {
        &self.g_axis
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.g_axis.len() + j]
    }

    /// `Fm`.
    pub fn reference(&self) -> f64 {
        self.reference
    }

    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(0.0, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(1.0, f64::min)
    }

    /// Iterates `(f, g, F)` row-major in `f` then `g`.
    pub fn nodes(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.f_axis.iter().enumerate().flat_map(move |(i, &f)| {
            self.g_axis
                .iter()
                .enumerate()
                .map(move |(j, &g)| (f, g, self.value(i, j)))
        })
    }
}

/// Evenly spaced axis from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|k| {
                if k == n - 1 {
                    hi
                } else {
                    lo + (hi - lo) * k as f64 / (n - 1) as f64
                }
            })
            .collect(),
    }
}

/// `f ∈ {-1, -0.75, …, 1}`.
pub fn default_f_axis() -> Vec<f64> {
    linspace(-1.0, 1.0, 9)
}

/// `g ∈ {-0.4, -0.3, …, 0.4}`.
pub fn default_g_axis() -> Vec<f64> {
    linspace(-0.4, 0.4, 9)
}

/// Sweeps state fidelity over the lattice `f_axis × g_axis`.
pub fn sweep_grid(
    seq: &PulseSequence,
    target: &TargetRotation,
    prep: &Preparation,
    f_axis: &[f64],
    g_axis: &[f64],
    mode: AreaErrorMode,
) -> Result<FidelityGrid> {
    sweep_grid_with(seq, target, prep, f_axis, g_axis, mode, FidelityConvention::StateOverlap)
}

/// Like [`sweep_grid`] with an explicit fidelity convention.
pub fn sweep_grid_with(
    seq: &PulseSequence,
    target: &TargetRotation,
    prep: &Preparation,
    f_axis: &[f64],
    g_axis: &[f64],
    mode: AreaErrorMode,
    convention: FidelityConvention,
) -> Result<FidelityGrid> {
    check_axis("f", f_axis)?;
    check_axis("g", g_axis)?;
    let ng = g_axis.len();
    let initial = prep.initial_state();
    let values: Vec<f64> = (0..f_axis.len() * ng)
        .into_par_iter()
        .map(|k| {
            let errors = ErrorParams::new(f_axis[k / ng], g_axis[k % ng]).with_mode(mode);
            let out = propagate(seq, &errors, &initial);
            convention.evaluate(target, &out, prep)
        })
        .collect();
    FidelityGrid::new(f_axis.to_vec(), g_axis.to_vec(), values)
}

/// Pass/fail lattice `F / Fm > ratio`.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdMask {
    f_axis: Vec<f64>,
    g_axis: Vec<f64>,
    pass: Vec<bool>,
}

impl ThresholdMask {
    pub fn get(&self, i: usize, j: usize) -> bool {
        self.pass[i * self.g_axis.len() + j]
    }

    pub fn f_axis(&self) -> &[f64] {
        &self.f_axis
    }

    pub fn g_axis(&self) -> &[f64] {
        &self.g_axis
    }

    pub fn count(&self) -> usize {
        self.pass.iter().filter(|&&p| p).count()
    }

    /// Row-major booleans.
    pub fn cells(&self) -> &[bool] {
        &self.pass
    }

    /// Boolean matrix indexed `[f][g]`.
    pub fn to_matrix(&self) -> Vec<Vec<bool>> {
        self.pass.chunks(self.g_axis.len()).map(|r| r.to_vec()).collect()
    }

    /// Whether every passing cell of `self` also passes in `other`. Both
    /// masks must share axes.
    pub fn is_subset_of(&self, other: &ThresholdMask) -> bool {
        self.f_axis == other.f_axis
            && self.g_axis == other.g_axis
            && self.pass.iter().zip(&other.pass).all(|(&a, &b)| !a || b)
    }

    /// Passing `f` values along the row `g = g_axis[j]`.
    pub fn passing_f_at(&self, j: usize) -> Vec<f64> {
        (0..self.f_axis.len())
            .filter(|&i| self.get(i, j))
            .map(|i| self.f_axis[i])
            .collect()
    }

    /// `(f, g, pass)` row-major in `f` then `g`.
    pub fn nodes(&self) -> impl Iterator<Item = (f64, f64, bool)> + '_ {
        self.f_axis.iter().enumerate().flat_map(move |(i, &f)| {
            self.g_axis
                .iter()
                .enumerate()
                .map(move |(j, &g)| (f, g, self.get(i, j)))
        })
    }
}

pub fn threshold_mask(grid: &FidelityGrid, ratio: f64) -> Result<ThresholdMask> {
    let fm = grid.reference();
    if fm <= 0.0 {
        return Err(Error::ZeroReference);
    }
    Ok(ThresholdMask {
        f_axis: grid.f_axis.clone(),
        g_axis: grid.g_axis.clone(),
        pass: grid.values.iter().map(|&v| v / fm > ratio).collect(),
    })
}

/// Lower node index and fractional position of `x` within `axis`.
fn locate(axis: &[f64], x: f64) -> Option<(usize, f64)> {
    let (lo, hi) = (axis[0], axis[axis.len() - 1]);
    if !(x >= lo && x <= hi) {
        return None;
    }
    if axis.len() == 1 {
        return Some((0, 0.0));
    }
    let k = axis.partition_point(|&a| a <= x).clamp(1, axis.len() - 1) - 1;
    let t = (x - axis[k]) / (axis[k + 1] - axis[k]);
    Some((k, t))
}

/// Bilinear interpolation inside the grid's bounding box; exact at nodes.
pub fn interpolate(grid: &FidelityGrid, f: f64, g: f64) -> Result<f64> {
    let oob = Error::OutOfBounds { f, g };
    let (i, tf) = locate(&grid.f_axis, f).ok_or_else(|| oob.clone())?;
    let (j, tg) = locate(&grid.g_axis, g).ok_or(oob)?;
    let at = |di: usize, dj: usize| {
        let ii = (i + di).min(grid.f_axis.len() - 1);
        let jj = (j + dj).min(grid.g_axis.len() - 1);
        grid.value(ii, jj)
    };
    let lower = if tg == 0.0 { at(0, 0) } else { (1.0 - tg) * at(0, 0) + tg * at(0, 1) };
    if tf == 0.0 {
        return Ok(lower);
    }
    let upper = if tg == 0.0 { at(1, 0) } else { (1.0 - tg) * at(1, 0) + tg * at(1, 1) };
    Ok((1.0 - tf) * lower + tf * upper)
}
