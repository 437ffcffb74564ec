//! Line-oriented program text.
//!
//! ```text
//! # comment (also allowed after an op)
//! seed 7
//! device 3f2a...             # device hash the program was written for
//! rot ge|ef <theta> <phi>    # transmon rotation
//! iswap <k> ge|ef            # transmon-mode exchange
//! mode <k> <theta> <phi>     # single-mode rotation
//! cz <j> <k>
//! cx <j> <k>                 # control first
//! cy <j> <k>
//! swap <j> <k>
//! ghz <theta> <k1> <k2> ...
//! barrier
//! ```
//!
//! Angles are decimal numbers or multiples of `pi`: `pi`, `-pi/2`, `3pi/4`,
//! `0.5*pi`, `2pi/3`.

use std::f64::consts::PI;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::GateOp;
use crate::device::DeviceModel;
use crate::effective::{Primitive, Register};
use crate::error::{Error, Result};
use crate::hilbert::QuantumState;
use crate::pulses::Transition;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GateProgram {
    pub ops: Vec<GateOp>,
    pub seed: Option<u64>,
    pub device_hash: Option<String>,
}

pub(crate) fn parse_angle(s: &str) -> Option<f64> {
    let s = s.trim();
    if let Ok(v) = s.parse::<f64>() {
        return Some(v);
    }
    let (sign, body) = match s.strip_prefix('-') {
        Some(r) => (-1.0, r),
        None => (1.0, s.strip_prefix('+').unwrap_or(s)),
    };
    let (num, den) = match body.split_once('/') {
        Some((n, d)) => (n, d.trim().parse::<f64>().ok()?),
        None => (body, 1.0),
    };
    let coef = num.trim().strip_suffix("pi")?.trim_end_matches('*').trim();
    let coef = if coef.is_empty() { 1.0 } else { coef.parse::<f64>().ok()? };
    if den == 0.0 {
        return None;
    }
    Some(sign * coef * PI / den)
}

fn parse_transition(s: &str) -> Option<Transition> {
    match s {
        "ge" => Some(Transition::Ge),
        "ef" => Some(Transition::Ef),
        _ => None,
    }
}

fn transition_name(t: Transition) -> &'static str {
    match t {
        Transition::Ge => "ge",
        Transition::Ef => "ef",
    }
}

impl GateProgram {
    pub fn new(ops: Vec<GateOp>) -> Self {
        GateProgram { ops, seed: None, device_hash: None }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut prog = GateProgram::default();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let err = |msg: String| Error::Program { line, msg };
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let words: Vec<&str> = body.split_whitespace().collect();
            let arity = |n: usize| -> Result<()> {
                if words.len() == n + 1 {
                    Ok(())
                } else {
                    Err(err(format!("'{}' takes {n} argument(s), got {}", words[0], words.len() - 1)))
                }
            };
            let mode = |w: &str| w.parse::<usize>().map_err(|_| err(format!("bad mode index '{w}'")));
            let angle = |w: &str| parse_angle(w).ok_or_else(|| err(format!("bad angle '{w}'")));
            let trans = |w: &str| parse_transition(w).ok_or_else(|| err(format!("bad transition '{w}' (ge|ef)")));
            let op = match words[0] {
                "seed" => {
                    arity(1)?;
                    prog.seed = Some(words[1].parse().map_err(|_| err(format!("bad seed '{}'", words[1])))?);
                    continue;
                }
                "device" => {
                    arity(1)?;
                    prog.device_hash = Some(words[1].to_string());
                    continue;
                }
                "rot" => {
                    arity(3)?;
                    GateOp::TransmonRot { transition: trans(words[1])?, theta: angle(words[2])?, phi: angle(words[3])? }
                }
                "iswap" => {
                    arity(2)?;
                    GateOp::ModeISwap { mode: mode(words[1])?, transition: trans(words[2])? }
                }
                "mode" => {
                    arity(3)?;
                    GateOp::SingleMode { mode: mode(words[1])?, theta: angle(words[2])?, phi: angle(words[3])? }
                }
                "cz" | "cx" | "cy" | "swap" => {
                    arity(2)?;
                    let (j, k) = (mode(words[1])?, mode(words[2])?);
                    match words[0] {
                        "cz" => GateOp::Cz { control: j, target: k },
                        "cx" => GateOp::Cx { control: j, target: k },
                        "cy" => GateOp::Cy { control: j, target: k },
                        _ => GateOp::Swap { a: j, b: k },
                    }
                }
                "ghz" => {
                    if words.len() < 4 {
                        return Err(err("'ghz' takes an angle and at least two modes".into()));
                    }
                    let modes = words[2..].iter().map(|w| mode(w)).collect::<Result<Vec<_>>>()?;
                    GateOp::Ghz { modes, theta: angle(words[1])? }
                }
                "barrier" => {
                    arity(0)?;
                    GateOp::Barrier
                }
                other => return Err(err(format!("unknown op '{other}'"))),
            };
            prog.ops.push(op);
        }
        Ok(prog)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        if let Some(seed) = self.seed {
            let _ = writeln!(s, "seed {seed}");
        }
        if let Some(h) = &self.device_hash {
            let _ = writeln!(s, "device {h}");
        }
        for op in &self.ops {
            let _ = match op {
                GateOp::TransmonRot { transition, theta, phi } => {
                    writeln!(s, "rot {} {theta:?} {phi:?}", transition_name(*transition))
                }
                GateOp::ModeISwap { mode, transition } => writeln!(s, "iswap {mode} {}", transition_name(*transition)),
                GateOp::SingleMode { mode, theta, phi } => writeln!(s, "mode {mode} {theta:?} {phi:?}"),
                GateOp::Cz { control, target } => writeln!(s, "cz {control} {target}"),
                GateOp::Cx { control, target } => writeln!(s, "cx {control} {target}"),
                GateOp::Cy { control, target } => writeln!(s, "cy {control} {target}"),
                GateOp::Swap { a, b } => writeln!(s, "swap {a} {b}"),
                GateOp::Ghz { modes, theta } => {
                    let list: Vec<String> = modes.iter().map(|m| m.to_string()).collect();
                    writeln!(s, "ghz {theta:?} {}", list.join(" "))
                }
                GateOp::Barrier => writeln!(s, "barrier"),
            };
        }
        s
    }

    /// Sorted list of modes the program touches.
    pub fn modes(&self) -> Vec<usize> {
        let mut m: Vec<usize> = self.ops.iter().flat_map(|o| o.modes()).collect();
        m.sort_unstable();
        m.dedup();
        m
    }

    /// Checks ops against the device and, for memory-only programs, that the
    /// transmon ends in `|g>` in the effective model.
    pub fn validate(&self, device: &DeviceModel) -> Result<()> {
        for op in &self.ops {
            op.validate(device)?;
        }
        if let Some(h) = &self.device_hash {
            if *h != device.hash() {
                return Err(Error::Gate("program was written for a different device".into()));
            }
        }
        if self.ops.iter().all(|o| o.is_memory_gate()) && !self.ops.is_empty() {
            let reg = Register::new(device.transmon.n_levels, &self.modes());
            let out = reg.run(&reg.ground(), &self.primitives())?;
            let p_g = out.level_population(0, 0);
            if (p_g - 1.0).abs() > 1e-9 {
                return Err(Error::Gate(format!("transmon ends outside |g> (P_g = {p_g:.6})")));
            }
        }
        Ok(())
    }

    pub fn primitives(&self) -> Vec<Primitive> {
        self.ops.iter().flat_map(|o| o.primitives()).collect()
    }

    /// Exact effective-model run on a register built from the program's modes.
    pub fn run_effective(&self, device: &DeviceModel, state: Option<&QuantumState>) -> Result<QuantumState> {
        self.validate(device)?;
        let reg = Register::new(device.transmon.n_levels, &self.modes());
        let s0 = state.cloned().unwrap_or_else(|| reg.ground());
        reg.run(&s0, &self.primitives())
    }
}
