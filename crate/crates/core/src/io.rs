//! Text formats shared by the CLI and the C interface.
//!
//! All numbers are written in scientific notation with 17 significant digits
//! and a dot decimal separator, which round-trips every `f64` exactly.
//! Records are newline-terminated.
//!
//! Pulse file:
//! ```text
//! rabi_nominal_rad_per_us=6.2831853071795868e-2
//! comment=free text
//! <duration_us> <amplitude> <phase_rad>
//! ...
//! ```
//! Lines starting with `#` and blank lines are ignored.

use std::f64::consts::{PI, TAU};
use std::fmt::Write as _;

use crate::error::{invalid, Error, Result};
use crate::fidelity::{FidelityGrid, ThresholdMask};
use crate::measure::{Calibration, FitResult, FringeData, TransferEstimate};
use crate::qubit::{PulseSequence, PulseStep};

pub const RABI_KEY: &str = "rabi_nominal_rad_per_us";
pub const COMMENT_KEY: &str = "comment";

pub fn fmt_num(x: f64) -> String {
    format!("{x:.16e}")
}

/// Phase canonicalized into `[0, 2π)`.
fn canonical_phase(phase: f64) -> f64 {
    let p = phase.rem_euclid(TAU);
    if p >= TAU {
        0.0
    } else {
        p
    }
}

pub fn write_pulse_file(seq: &PulseSequence, comment: Option<&str>) -> String {
    let mut out = String::new();
    writeln!(out, "{RABI_KEY}={}", fmt_num(seq.rabi_nominal())).unwrap();
    if let Some(c) = comment {
        for line in c.lines() {
            writeln!(out, "{COMMENT_KEY}={line}").unwrap();
        }
    }
    for s in seq.steps() {
        writeln!(
            out,
            "{} {} {}",
            fmt_num(s.duration),
            fmt_num(s.amplitude),
            fmt_num(canonical_phase(s.phase))
        )
        .unwrap();
    }
    out
}

/// Parsed pulse file: the sequence plus any comment lines.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseFile {
    pub sequence: PulseSequence,
    pub comments: Vec<String>,
}

pub fn parse_pulse_file(text: &str) -> Result<PulseFile> {
    let mut rabi = None;
    let mut comments = Vec::new();
    let mut steps = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some((key, value)) = line.split_once('=') {
            if !steps.is_empty() {
                return Err(Error::Parse {
                    line: line_no,
                    msg: "header line after step records".into(),
                });
            }
            match key.trim() {
                RABI_KEY => {
                    let v = value.trim().parse::<f64>().map_err(|e| Error::Parse {
                        line: line_no,
                        msg: format!("bad {RABI_KEY}: {e}"),
                    })?;
                    rabi = Some(v);
                }
                COMMENT_KEY => comments.push(value.to_string()),
                other => {
                    return Err(Error::Parse {
                        line: line_no,
                        msg: format!("unknown header key {other:?}"),
                    })
                }
            }
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("expected 3 fields (duration_us amplitude phase_rad), got {}", fields.len()),
            });
        }
        let mut vals = [0.0; 3];
        for (v, f) in vals.iter_mut().zip(&fields) {
            *v = f.parse::<f64>().map_err(|e| Error::Parse {
                line: line_no,
                msg: format!("bad number {f:?}: {e}"),
            })?;
        }
        let step = PulseStep::new(vals[1], vals[2], vals[0]).map_err(|e| Error::Parse {
            line: line_no,
            msg: e.to_string(),
        })?;
        steps.push(step);
    }
    let rabi = rabi.ok_or(Error::Parse {
        line: 0,
        msg: format!("missing {RABI_KEY} header"),
    })?;
    Ok(PulseFile {
        sequence: PulseSequence::new(steps, rabi)?,
        comments,
    })
}

pub fn grid_csv(grid: &FidelityGrid) -> String {
    let mut out = String::from("f,g,F\n");
    for (f, g, v) in grid.nodes() {
        writeln!(out, "{},{},{}", fmt_num(f), fmt_num(g), fmt_num(v)).unwrap();
    }
    out
}

pub fn mask_csv(mask: &ThresholdMask) -> String {
    let mut out = String::from("f,g,pass\n");
    for (f, g, p) in mask.nodes() {
        writeln!(out, "{},{},{}", fmt_num(f), fmt_num(g), p as u8).unwrap();
    }
    out
}

pub fn fringe_csv(data: &FringeData) -> String {
    let mut out = String::from("phase_rad,count_one,shots\n");
    for (&p, &c) in data.phases.iter().zip(&data.counts_one) {
        writeln!(out, "{},{},{}", fmt_num(p), c, data.shots).unwrap();
    }
    out
}

/// Reads `phase_rad,count_one,shots`. All rows must share the shot count.
pub fn parse_fringe_csv(text: &str) -> Result<FringeData> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    match lines.next() {
        Some((_, h)) if h.trim() == "phase_rad,count_one,shots" => {}
        _ => {
            return Err(Error::Parse {
                line: 1,
                msg: "expected header phase_rad,count_one,shots".into(),
            })
        }
    }
    let mut phases = Vec::new();
    let mut counts = Vec::new();
    let mut shots = None;
    for (idx, line) in lines {
        let err = |msg: String| Error::Parse { line: idx + 1, msg };
        let fields: Vec<&str> = line.trim().split(',').collect();
        if fields.len() != 3 {
            return Err(err(format!("expected 3 fields, got {}", fields.len())));
        }
        phases.push(fields[0].parse::<f64>().map_err(|e| err(e.to_string()))?);
        counts.push(fields[1].parse::<u64>().map_err(|e| err(e.to_string()))?);
        let n = fields[2].parse::<u64>().map_err(|e| err(e.to_string()))?;
        if *shots.get_or_insert(n) != n {
            return Err(err("shot count differs between rows".into()));
        }
    }
    let data = FringeData {
        phases,
        counts_one: counts,
        shots: shots.unwrap_or(0),
        direct: None,
    };
    data.validate()?;
    Ok(data)
}

pub fn fit_csv(fit: &FitResult) -> String {
    format!(
        "theta_m,phi_m,sigma_theta,sigma_phi\n{},{},{},{}\n",
        fmt_num(fit.theta_m),
        fmt_num(fit.phi_m),
        fmt_num(fit.sigma_theta),
        fmt_num(fit.sigma_phi)
    )
}

pub fn direct_csv(count_one: u64, shots: u64) -> String {
    format!("count_one,shots\n{count_one},{shots}\n")
}

pub fn log_csv(history: &[f64]) -> String {
    let mut out = String::from("iteration,cost\n");
    for (i, c) in history.iter().enumerate() {
        writeln!(out, "{i},{}", fmt_num(*c)).unwrap();
    }
    out
}

/// Rows for sequences A (pulse under test), C (π/2 control) and D
/// (preparation monitor).
pub fn transfer_csv(a: &TransferEstimate, cal: &Calibration) -> String {
    let mut out = String::from("sequence,count_one,shots,p_hat,sigma\n");
    for (name, e) in [("A", a), ("C", &cal.control), ("D", &cal.monitor)] {
        writeln!(out, "{name},{},{},{},{}", e.count_one, e.shots, fmt_num(e.p_hat), fmt_num(e.sigma)).unwrap();
    }
    out
}

/// Parses an angle: plain radians (`1.57`), multiples of π (`pi`, `-pi/2`,
/// `3pi/4`, `2*pi`), or degrees with a `deg` suffix (`90deg`).
pub fn parse_angle(text: &str) -> Result<f64> {
    let s: String = text.trim().chars().filter(|c| !c.is_whitespace()).collect();
    let bad = || invalid(format!("cannot parse angle {text:?}"));
    if s.is_empty() {
        return Err(bad());
    }
    if let Some(deg) = s.strip_suffix("deg") {
        return deg.parse::<f64>().map(f64::to_radians).map_err(|_| bad());
    }
    let lower = s.to_ascii_lowercase();
    if let Some(pos) = lower.find("pi") {
        let (head, tail) = (&lower[..pos], &lower[pos + 2..]);
        let head = head.strip_suffix('*').unwrap_or(head);
        let coef = match head {
            "" | "+" => 1.0,
            "-" => -1.0,
            h => h.parse::<f64>().map_err(|_| bad())?,
        };
        let denom = match tail {
            "" => 1.0,
            t => t
                .strip_prefix('/')
                .ok_or_else(bad)?
                .parse::<f64>()
                .map_err(|_| bad())?,
        };
        if denom == 0.0 {
            return Err(bad());
        }
        return Ok(coef * PI / denom);
    }
    let v = s.parse::<f64>().map_err(|_| bad())?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(bad())
    }
}

/// Parses an axis: a comma list (`0,0.5,1`) or an inclusive range
/// `start:stop:step`.
pub fn parse_axis(text: &str) -> Result<Vec<f64>> {
    let bad = |m: &str| invalid(format!("cannot parse axis {text:?}: {m}"));
    let t = text.trim();
    if t.contains(':') {
        let parts: Vec<f64> = t
            .split(':')
            .map(|p| p.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| bad("expected start:stop:step"))?;
        let [start, stop, step] = parts[..] else {
            return Err(bad("expected start:stop:step"));
        };
        if !(step > 0.0 && stop >= start && start.is_finite() && stop.is_finite()) {
            return Err(bad("need step > 0 and stop >= start"));
        }
        let n = ((stop - start) / step + 1e-9).floor() as usize + 1;
        if n > 1_000_000 {
            return Err(bad("too many points"));
        }
        let mut axis: Vec<f64> = (0..n)
            .map(|k| {
                let v = start + step * k as f64;
                if v.abs() < 1e-12 * step {
                    0.0
                } else {
                    v
                }
            })
            .collect();
        if let Some(last) = axis.last_mut() {
            if (*last - stop).abs() < 1e-9 * step {
                *last = stop;
            }
        }
        return Ok(axis);
    }
    let axis: Vec<f64> = t
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| bad("expected comma-separated numbers"))?;
    if axis.is_empty() || axis.iter().any(|v| !v.is_finite()) {
        return Err(bad("values must be finite"));
    }
    if axis.windows(2).any(|w| w[1] <= w[0]) {
        return Err(bad("values must be strictly increasing"));
    }
    Ok(axis)
}

/// Parses `lo,hi` with `lo <= hi`.
pub fn parse_range(text: &str) -> Result<(f64, f64)> {
    let bad = || invalid(format!("cannot parse range {text:?}: expected lo,hi"));
    let (lo, hi) = text.split_once(',').ok_or_else(bad)?;
    let lo = lo.trim().parse::<f64>().map_err(|_| bad())?;
    let hi = hi.trim().parse::<f64>().map_err(|_| bad())?;
    if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
        return Err(bad());
    }
    Ok((lo, hi))
}
