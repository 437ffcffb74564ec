//! Calibration records. Produced by [`super::Compiler`], serializable so
//! they can be stored next to the device config.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::GateOp;
use crate::error::{Error, Result};
use crate::pulses::Transition;

/// Tuned sideband pulse for one `(mode, transition)` exchange.
///
/// Phases: with flux phase `p`, the pulse maps `b -> -i e^{i(load + p)} a`
/// and `a -> -i e^{i(unload - p)} b` on the pair `a = |upper,0>`,
/// `b = |lower,1>`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SidebandCal {
    pub mode: usize,
    pub transition: Transition,
    pub nu_sb: f64,
    pub eps: f64,
    pub duration: f64,
    pub frame_freq: f64,
    pub dc_track: f64,
    pub load_phase: f64,
    pub unload_phase: f64,
    /// Population moved from `b` to `a` by one pulse.
    pub transfer: f64,
    /// Mean transmon frequency shift during the pulse from a Ramsey fit (GHz).
    pub dc_shift: f64,
    /// e-f pulses only: phases picked up by the idle states `|e,0>` and
    /// `|g,1>`, relative to `|g,0>`.
    #[serde(default)]
    pub idle_e: f64,
    #[serde(default)]
    pub idle_mode: f64,
    /// Modes holding one photon while this pulse was tuned; empty for the
    /// standard tune-up.
    #[serde(default)]
    pub occupied: Vec<usize>,
}

impl SidebandCal {
    pub fn modulation_index(&self) -> f64 {
        self.eps / (2.0 * self.nu_sb)
    }

    /// Flux phase realizing primitive phase `phase`.
    pub fn flux_phase(&self, phase: f64) -> f64 {
        phase - 0.5 * (self.load_phase - self.unload_phase)
    }

    /// Phase common to both directions of the exchange.
    pub fn pair_phase(&self) -> f64 {
        0.5 * (self.load_phase + self.unload_phase)
    }
}

/// Frame corrections around a charge rotation: per transmon level, the
/// angles applied before and after the pulse.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RotationCal {
    pub transition: Transition,
    pub theta: f64,
    /// Drive amplitude relative to the nominal area.
    pub scale: f64,
    /// Carrier offset from the calibrated transition frequency (GHz).
    pub detuning: f64,
    pub pre: Vec<f64>,
    pub post: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateKey {
    SingleMode(usize),
    Cz(usize, usize),
    Cx(usize, usize),
    Cy(usize, usize),
    Swap(usize, usize),
    Ghz(Vec<usize>),
}

impl GateKey {
    pub fn of(op: &GateOp) -> Option<GateKey> {
        Some(match op {
            GateOp::SingleMode { mode, .. } => GateKey::SingleMode(*mode),
            GateOp::Cz { control, target } => GateKey::Cz(*control, *target),
            GateOp::Cx { control, target } => GateKey::Cx(*control, *target),
            GateOp::Cy { control, target } => GateKey::Cy(*control, *target),
            GateOp::Swap { a, b } => GateKey::Swap(*a, *b),
            GateOp::Ghz { modes, .. } => GateKey::Ghz(modes.clone()),
            _ => return None,
        })
    }
}

/// Mode frame updates wrapped around a compiled gate, plus the extra phase of
/// the conditional-phase swap (CZ and SWAP).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateCorrection {
    pub key: GateKey,
    /// `(mode, angle)` applied before the gate.
    pub pre: Vec<(usize, f64)>,
    /// `(mode, angle)` applied after the gate.
    pub post: Vec<(usize, f64)>,
    pub conditional: f64,
    /// Remaining largest phase error after the last iteration (rad).
    pub residual: f64,
}

impl GateCorrection {
    pub fn zero(key: GateKey, modes: &[usize]) -> Self {
        GateCorrection {
            key,
            pre: modes.iter().map(|&m| (m, 0.0)).collect(),
            post: modes.iter().map(|&m| (m, 0.0)).collect(),
            conditional: 0.0,
            residual: f64::NAN,
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.pre
            .iter()
            .chain(&self.post)
            .map(|p| p.1.abs())
            .fold(self.conditional.abs(), f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseCalibration {
    pub device_hash: String,
    /// Modes of the simulated subsystem the calibration belongs to.
    pub modes: Vec<usize>,
    /// When false only tuned frequencies and amplitudes are used.
    pub enabled: bool,
    pub ge_freq: f64,
    pub ef_freq: f64,
    pub sidebands: Vec<SidebandCal>,
    pub rotations: Vec<RotationCal>,
    pub gates: Vec<GateCorrection>,
    /// Ramsey-measured `|e1>` dispersive shift per mode (GHz).
    pub dispersive: Vec<(usize, f64)>,
}

impl PhaseCalibration {
    pub fn sideband(&self, mode: usize, t: Transition) -> Result<&SidebandCal> {
        self.sidebands
            .iter()
            .find(|s| s.mode == mode && s.transition == t && s.occupied.is_empty())
            .ok_or_else(|| Error::Calibration(format!("no sideband calibration for mode {mode} {t:?}")))
    }

    pub fn gate(&self, key: &GateKey) -> Option<&GateCorrection> {
        self.gates.iter().find(|g| &g.key == key)
    }

    pub fn charge_freq(&self, t: Transition) -> f64 {
        match t {
            Transition::Ge => self.ge_freq,
            Transition::Ef => self.ef_freq,
        }
    }

    /// Largest difference between two calibrations' phase offsets (rad).
    pub fn max_offset_change(&self, other: &PhaseCalibration) -> f64 {
        let mut d: f64 = 0.0;
        for s in &self.sidebands {
            if let Ok(o) = other.sideband(s.mode, s.transition) {
                d = d.max((s.load_phase - o.load_phase).abs()).max((s.unload_phase - o.unload_phase).abs());
            }
        }
        for g in &self.gates {
            if let Some(o) = other.gate(&g.key) {
                for (a, b) in g.pre.iter().zip(&o.pre).chain(g.post.iter().zip(&o.post)) {
                    d = d.max(wrap(a.1 - b.1).abs());
                }
                d = d.max(wrap(g.conditional - o.conditional).abs());
            }
        }
        d
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: PhaseCalibration = serde_json::from_str(text)?;
        let finite = c.sidebands.iter().all(|s| s.load_phase.is_finite() && s.unload_phase.is_finite())
            && c.gates.iter().all(|g| g.max_abs().is_finite());
        if !finite {
            return Err(Error::Calibration("non-finite phase offset".into()));
        }
        Ok(c)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Wrap an angle into `(-pi, pi]`.
pub(crate) fn wrap(a: f64) -> f64 {
    let tau = 2.0 * std::f64::consts::PI;
    let r = a.rem_euclid(tau);
    if r > std::f64::consts::PI {
        r - tau
    } else {
        r
    }
}
