//! Design, simulation and evaluation of error-resistant single-qubit gates.
//!
//! - [`qubit`]: exact SU(2) propagation of a driven two-level system with
//!   controlled detuning `f` and area error `g`.
//! - [`pulses`]: rectangular, CORPSE, SCROFULOUS and BB1 sequences.
//! - [`fidelity`]: state fidelity, `(f, g)` grid sweeps, threshold masks and
//!   bilinear interpolation.
//! - [`measure`]: shot-noise emulation of the transfer and Ramsey measurement
//!   protocols, including the fringe fitter.
//! - [`design`]: ensemble-robust optimal-control pulse design with exact
//!   gradients.
//! - [`io`] and [`cli`]: file formats and the `robustpulse` command.

pub mod cli;
pub mod design;
pub mod error;
pub mod fidelity;
pub mod io;
pub mod measure;
pub mod pulses;
pub mod qubit;

pub use error::{Error, Result};
pub use fidelity::{FidelityGrid, Preparation, TargetRotation};
pub use qubit::{AreaErrorMode, ErrorParams, PulseSequence, PulseStep, QubitState, Rotation, DEFAULT_RABI};
