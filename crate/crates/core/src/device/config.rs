//! On-disk device configuration (TOML).
//!
//! ```toml
//! active_modes = [1, 2, 3, 4, 5, 6, 7, 8, 9]
//! mode_levels = 2
//!
//! [array]
//! n_resonators = 11
//! nu_r = 6.5          # GHz
//! g_r = 0.2588        # GHz
//! g_q = 0.49          # GHz
//!
//! [transmon]
//! nu_q0 = 4.28
//! alpha = -0.25
//! n_levels = 3
//! dc_shift_coeff = 0.01   # GHz^-1
//!
//! [coherence]         # microseconds, `inf` disables a channel
//! t1_transmon = 4.0
//! t2_transmon = 3.0
//! t1_mode = [...]     # one entry per resonator
//! t2_mode = [...]
//!
//! [control]           # optional, defaults shown in ControlConfig
//! ```

use serde::{Deserialize, Serialize};

use super::{ArrayParams, Coherence, CoherenceParams, TransmonParams};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LoadMode {
    /// Unknown keys are an error.
    Strict,
    /// Unknown keys are reported on stderr and ignored.
    Lenient,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceConfig {
    pub active_modes: Vec<usize>,
    #[serde(default = "default_mode_levels")]
    pub mode_levels: usize,
    pub array: ArrayParams,
    pub transmon: TransmonParams,
    pub coherence: CoherenceConfig,
    #[serde(default)]
    pub control: ControlConfig,
}

fn default_mode_levels() -> usize {
    2
}

/// Coherence times in microseconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoherenceConfig {
    pub t1_transmon: f64,
    pub t2_transmon: f64,
    pub t1_mode: Vec<f64>,
    pub t2_mode: Vec<f64>,
}

impl CoherenceConfig {
    pub fn ideal() -> Self {
        CoherenceConfig {
            t1_transmon: f64::INFINITY,
            t2_transmon: f64::INFINITY,
            t1_mode: vec![],
            t2_mode: vec![],
        }
    }

    /// Convert to ns. Empty mode lists mean "no decoherence on modes".
    pub(crate) fn to_internal(&self, n_modes: usize) -> Result<CoherenceParams> {
        let transmon = checked_pair("coherence.t1_transmon", self.t1_transmon, "coherence.t2_transmon", self.t2_transmon)?;
        let mut modes = Vec::with_capacity(n_modes);
        if self.t1_mode.is_empty() && self.t2_mode.is_empty() {
            modes.resize(n_modes, Coherence::IDEAL);
        } else {
            if self.t1_mode.len() != n_modes {
                return Err(Error::validation(
                    "coherence.t1_mode",
                    format!("expected {n_modes} entries, got {}", self.t1_mode.len()),
                ));
            }
            if self.t2_mode.len() != n_modes {
                return Err(Error::validation(
                    "coherence.t2_mode",
                    format!("expected {n_modes} entries, got {}", self.t2_mode.len()),
                ));
            }
            for k in 0..n_modes {
                modes.push(checked_pair(
                    &format!("coherence.t1_mode[{k}]"),
                    self.t1_mode[k],
                    &format!("coherence.t2_mode[{k}]"),
                    self.t2_mode[k],
                )?);
            }
        }
        Ok(CoherenceParams { transmon, modes })
    }
}

fn checked_pair(f1: &str, t1_us: f64, f2: &str, t2_us: f64) -> Result<Coherence> {
    if !(t1_us > 0.0) {
        return Err(Error::validation(f1, "must be > 0 or inf"));
    }
    if !(t2_us > 0.0) {
        return Err(Error::validation(f2, "must be > 0 or inf"));
    }
    if t2_us > 2.0 * t1_us {
        return Err(Error::validation(f2, format!("T2 = {t2_us} exceeds 2*T1 = {}", 2.0 * t1_us)));
    }
    Ok(Coherence { t1: t1_us * 1e3, t2: t2_us * 1e3 })
}

/// Pulse-compilation settings. Durations in ns, frequencies in GHz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ControlConfig {
    /// Length of a charge (transmon rotation) pulse.
    pub charge_duration: f64,
    /// Gaussian truncation in units of sigma (each side).
    pub truncation_sigmas: f64,
    /// Ceiling on the modulation index eps/(2 nu_sb) for g-e sidebands.
    pub sideband_index_max: f64,
    /// Shortest allowed g-e sideband pulse.
    pub min_sideband_duration: f64,
    /// Duration of each e1-f0 sideband pulse.
    pub ef_sideband_duration: f64,
    /// Idle time inserted between consecutive pulses.
    pub gap: f64,
    /// Tones closer than this to each other or to |alpha| trigger a warning.
    pub guard_band: f64,
}

impl Default for ControlConfig {
    fn default() -> Self {
        ControlConfig {
            charge_duration: 20.0,
            truncation_sigmas: 2.0,
            sideband_index_max: 0.22,
            min_sideband_duration: 20.0,
            ef_sideband_duration: 110.0,
            gap: 2.0,
            guard_band: 0.030,
        }
    }
}

impl ControlConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("control.charge_duration", self.charge_duration),
            ("control.truncation_sigmas", self.truncation_sigmas),
            ("control.sideband_index_max", self.sideband_index_max),
            ("control.min_sideband_duration", self.min_sideband_duration),
            ("control.ef_sideband_duration", self.ef_sideband_duration),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::validation(name, "must be positive and finite"));
            }
        }
        if self.sideband_index_max > 1.0 {
            return Err(Error::validation("control.sideband_index_max", "must be <= 1.0"));
        }
        if !(self.gap >= 0.0) {
            return Err(Error::validation("control.gap", "must be >= 0"));
        }
        if !(self.guard_band >= 0.0) {
            return Err(Error::validation("control.guard_band", "must be >= 0"));
        }
        Ok(())
    }
}

// (section, keys, required)
const SCHEMA: &[(&str, &[&str], &[&str])] = &[
    ("", &["active_modes", "mode_levels", "array", "transmon", "coherence", "control"], &["active_modes", "array", "transmon", "coherence"]),
    ("array", &["n_resonators", "nu_r", "g_r", "g_q", "detuning"], &["n_resonators", "nu_r", "g_r", "g_q"]),
    ("transmon", &["nu_q0", "alpha", "n_levels", "dc_shift_coeff"], &["nu_q0", "alpha"]),
    ("coherence", &["t1_transmon", "t2_transmon", "t1_mode", "t2_mode"], &["t1_transmon", "t2_transmon"]),
    (
        "control",
        &[
            "charge_duration",
            "truncation_sigmas",
            "sideband_index_max",
            "min_sideband_duration",
            "ef_sideband_duration",
            "gap",
            "guard_band",
        ],
        &[],
    ),
];

fn check_schema(table: &toml::Table, mode: LoadMode) -> Result<()> {
    for (section, keys, required) in SCHEMA {
        let sub = if section.is_empty() {
            table
        } else {
            match table.get(*section) {
                Some(toml::Value::Table(t)) => t,
                Some(_) => return Err(Error::validation(*section, "expected a table")),
                None => continue,
            }
        };
        for key in *required {
            if !sub.contains_key(*key) {
                let field = if section.is_empty() { key.to_string() } else { format!("{section}.{key}") };
                return Err(Error::validation(field, "required field missing"));
            }
        }
        for key in sub.keys() {
            if !keys.contains(&key.as_str()) {
                let field = if section.is_empty() { key.clone() } else { format!("{section}.{key}") };
                match mode {
                    LoadMode::Strict => return Err(Error::UnknownKey(field)),
                    LoadMode::Lenient => eprintln!("warning: ignoring unknown config key `{field}`"),
                }
            }
        }
    }
    Ok(())
}

fn strip_unknown(table: &mut toml::Table) {
    for (section, keys, _) in SCHEMA {
        let sub = if section.is_empty() {
            &mut *table
        } else {
            match table.get_mut(*section) {
                Some(toml::Value::Table(t)) => t,
                _ => continue,
            }
        };
        sub.retain(|k, _| keys.iter().any(|x| *x == &k[..]));
    }
}

impl DeviceConfig {
    pub fn from_toml(text: &str, mode: LoadMode) -> Result<Self> {
        let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Parse(e.to_string()))?;
        check_schema(&table, mode)?;
        strip_unknown(&mut table);
        toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Parse(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }
}
