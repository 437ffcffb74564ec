//! Physical device description: resonator array, transmon, coherence times,
//! and the derived eigenmode spectrum.
//!
//! Units: frequencies in GHz and times in ns everywhere inside the crate
//! (1 GHz x 1 ns = 1 cycle). The config file takes coherence times in µs.

mod config;
pub mod tridiag;

pub use config::{ControlConfig, DeviceConfig, LoadMode};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;

use crate::error::{Error, Result};
use tridiag::eigh_tridiagonal;

/// Parameters of the linear resonator chain and its coupling to the transmon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrayParams {
    pub n_resonators: usize,
    /// Bare resonator frequency (GHz).
    pub nu_r: f64,
    /// Nearest-neighbour hopping (GHz).
    pub g_r: f64,
    /// Transmon coupling to the edge resonator (GHz).
    pub g_q: f64,
    /// Optional per-resonator frequency offsets (GHz). When present the chain
    /// is no longer uniform and closed-form cross-checks do not apply.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detuning: Option<Vec<f64>>,
}

impl ArrayParams {
    pub fn uniform(n_resonators: usize, nu_r: f64, g_r: f64, g_q: f64) -> Self {
        ArrayParams { n_resonators, nu_r, g_r, g_q, detuning: None }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_resonators < 1 {
            return Err(Error::validation("array.n_resonators", "must be >= 1"));
        }
        if !(self.nu_r > 0.0) {
            return Err(Error::validation("array.nu_r", "must be > 0"));
        }
        if !(self.g_r >= 0.0) {
            return Err(Error::validation("array.g_r", "must be >= 0"));
        }
        if !(self.g_q >= 0.0) {
            return Err(Error::validation("array.g_q", "must be >= 0"));
        }
        if let Some(d) = &self.detuning {
            if d.len() != self.n_resonators {
                return Err(Error::validation(
                    "array.detuning",
                    format!("expected {} entries, got {}", self.n_resonators, d.len()),
                ));
            }
        }
        Ok(())
    }

    pub fn is_uniform(&self) -> bool {
        self.detuning.as_ref().map_or(true, |d| d.iter().all(|&x| x == 0.0))
    }
}

/// Duffing-oscillator description of the transmon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransmonParams {
    /// Static (idle) transmon frequency (GHz).
    pub nu_q0: f64,
    /// Anharmonicity (GHz), negative for a transmon.
    pub alpha: f64,
    #[serde(default = "default_levels")]
    pub n_levels: usize,
    /// Mean downward frequency shift per squared modulation amplitude
    /// (GHz^-1). A flux tone of peak-to-peak swing `eps` lowers the
    /// time-averaged transmon frequency by `dc_shift_coeff * eps^2`.
    #[serde(default)]
    pub dc_shift_coeff: f64,
}

fn default_levels() -> usize {
    3
}

impl TransmonParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_levels < 2 {
            return Err(Error::validation("transmon.n_levels", "must be >= 2"));
        }
        if self.n_levels >= 3 && self.alpha == 0.0 {
            return Err(Error::validation("transmon.alpha", "must be non-zero with 3+ levels"));
        }
        if !(self.nu_q0 > 0.0) {
            return Err(Error::validation("transmon.nu_q0", "must be > 0"));
        }
        if !self.dc_shift_coeff.is_finite() {
            return Err(Error::validation("transmon.dc_shift_coeff", "must be finite"));
        }
        Ok(())
    }
}

/// Relaxation and dephasing times in ns. `f64::INFINITY` switches a channel off.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coherence {
    pub t1: f64,
    pub t2: f64,
}

impl Coherence {
    pub const IDEAL: Coherence = Coherence { t1: f64::INFINITY, t2: f64::INFINITY };

    /// Energy relaxation rate (1/ns).
    pub fn gamma1(&self) -> f64 {
        1.0 / self.t1
    }

    /// Pure dephasing rate 1/T_phi = 1/T2 - 1/(2 T1), clamped at zero.
    pub fn gamma_phi(&self) -> f64 {
        (1.0 / self.t2 - 0.5 / self.t1).max(0.0)
    }

    pub fn is_ideal(&self) -> bool {
        self.t1.is_infinite() && self.t2.is_infinite()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoherenceParams {
    pub transmon: Coherence,
    /// Indexed by mode number minus one.
    pub modes: Vec<Coherence>,
}

impl CoherenceParams {
    pub fn ideal(n_modes: usize) -> Self {
        CoherenceParams { transmon: Coherence::IDEAL, modes: vec![Coherence::IDEAL; n_modes] }
    }

    pub fn mode(&self, k: usize) -> Coherence {
        self.modes[k - 1]
    }

    pub fn is_ideal(&self) -> bool {
        self.transmon.is_ideal() && self.modes.iter().all(Coherence::is_ideal)
    }
}

/// Eigenmodes of the chain as seen from the transmon. Mode `k` (1-based)
/// lives at index `k - 1`; modes are sorted by ascending frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeSpectrum {
    pub nu: Vec<f64>,
    pub g: Vec<f64>,
    pub edge_amp: Vec<f64>,
    /// `vectors[site][mode]`, columns normalized, sign fixed so `edge_amp > 0`.
    pub vectors: Vec<Vec<f64>>,
}

impl ModeSpectrum {
    pub fn len(&self) -> usize {
        self.nu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nu.is_empty()
    }

    pub fn nu(&self, k: usize) -> f64 {
        self.nu[k - 1]
    }

    pub fn g(&self, k: usize) -> f64 {
        self.g[k - 1]
    }
}

/// Diagonalize the hopping matrix of the chain and derive transmon couplings.
///
/// The transmon sits at site 0. For a uniform chain the result matches
/// `nu_k = nu_r - 2 g_r cos(k pi/(n+1))` and
/// `g_k = g_q sqrt(2/(n+1)) sin(k pi/(n+1))`, but the closed form is only
/// used as a test oracle.
pub fn build_spectrum(array: &ArrayParams) -> Result<ModeSpectrum> {
    array.validate()?;
    let n = array.n_resonators;
    let diag: Vec<f64> = (0..n)
        .map(|i| array.nu_r + array.detuning.as_ref().map_or(0.0, |d| d[i]))
        .collect();
    let off = vec![array.g_r; n - 1];
    let eig = eigh_tridiagonal(&diag, &off)?;
    let mut vectors = eig.vectors;
    for k in 0..n {
        if vectors[0][k] < 0.0 {
            for row in vectors.iter_mut() {
                row[k] = -row[k];
            }
        }
    }
    let edge_amp: Vec<f64> = (0..n).map(|k| vectors[0][k]).collect();
    let g = edge_amp.iter().map(|a| array.g_q * a.abs()).collect();
    Ok(ModeSpectrum { nu: eig.values, g, edge_amp, vectors })
}

/// A fully-specified device. Immutable after construction.
#[derive(Debug, Clone)]
pub struct DeviceModel {
    pub array: ArrayParams,
    pub transmon: TransmonParams,
    pub coherence: CoherenceParams,
    pub spectrum: ModeSpectrum,
    /// Mode numbers (1-based) used as memory bits.
    pub active_modes: Vec<usize>,
    /// Fock-space truncation per mode (2 means {|0>, |1>}).
    pub mode_levels: usize,
    pub control: ControlConfig,
    config: DeviceConfig,
}

const DEFAULT_CONFIG: &str = include_str!("../../configs/default_device.toml");

impl DeviceModel {
    /// The representative 11-mode device shipped with the crate.
    pub fn default_device() -> Self {
        Self::from_toml(DEFAULT_CONFIG, LoadMode::Strict).expect("shipped config is valid")
    }

    pub fn default_config_text() -> &'static str {
        DEFAULT_CONFIG
    }

    pub fn from_config(config: DeviceConfig) -> Result<Self> {
        config.array.validate()?;
        config.transmon.validate()?;
        let n = config.array.n_resonators;
        let coherence = config.coherence.to_internal(n)?;
        let active = config.active_modes.clone();
        for &k in &active {
            if k < 1 || k > n {
                return Err(Error::validation(
                    "active_modes",
                    format!("mode {k} outside 1..={n}"),
                ));
            }
        }
        let mut sorted = active.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != active.len() {
            return Err(Error::validation("active_modes", "duplicate mode index"));
        }
        if config.mode_levels < 2 {
            return Err(Error::validation("mode_levels", "must be >= 2"));
        }
        config.control.validate()?;
        let spectrum = build_spectrum(&config.array)?;
        Ok(DeviceModel {
            array: config.array.clone(),
            transmon: config.transmon.clone(),
            coherence,
            spectrum,
            active_modes: active,
            mode_levels: config.mode_levels,
            control: config.control.clone(),
            config,
        })
    }

    pub fn from_toml(text: &str, mode: LoadMode) -> Result<Self> {
        Self::from_config(DeviceConfig::from_toml(text, mode)?)
    }

    pub fn load(path: impl AsRef<Path>, mode: LoadMode) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text, mode)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.config.to_toml()?)?;
        Ok(())
    }

    pub fn config(&self) -> &DeviceConfig {
        &self.config
    }

    /// Copy of this device with every coherence time set to infinity.
    pub fn without_decoherence(&self) -> Self {
        let mut cfg = self.config.clone();
        cfg.coherence = config::CoherenceConfig::ideal();
        Self::from_config(cfg).expect("ideal coherence is valid")
    }

    /// Copy with a modified config.
    pub fn with_config(&self, f: impl FnOnce(&mut DeviceConfig)) -> Result<Self> {
        let mut cfg = self.config.clone();
        f(&mut cfg);
        Self::from_config(cfg)
    }

    pub fn n_modes(&self) -> usize {
        self.spectrum.len()
    }

    pub fn is_active(&self, k: usize) -> bool {
        self.active_modes.contains(&k)
    }

    pub fn require_active(&self, k: usize) -> Result<()> {
        if self.is_active(k) {
            Ok(())
        } else {
            Err(Error::InactiveMode(k))
        }
    }

    /// SHA-256 of the canonical serialized config, hex encoded.
    pub fn hash(&self) -> String {
        let text = self.config.to_toml().unwrap_or_default();
        let digest = Sha256::digest(text.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn closed_form(n: usize, nu_r: f64, g_r: f64, g_q: f64) -> (Vec<f64>, Vec<f64>) {
        let m = (n + 1) as f64;
        let nu = (1..=n).map(|k| nu_r - 2.0 * g_r * (k as f64 * PI / m).cos()).collect();
        let g = (1..=n)
            .map(|k| g_q * (2.0 / m).sqrt() * (k as f64 * PI / m).sin())
            .collect();
        (nu, g)
    }

    #[test]
    fn single_resonator() {
        let s = build_spectrum(&ArrayParams::uniform(1, 6.5, 0.0, 0.1)).unwrap();
        assert_eq!(s.nu, vec![6.5]);
        assert!((s.g[0] - 0.1).abs() < 1e-15);
    }

    #[test]
    fn two_resonators() {
        let s = build_spectrum(&ArrayParams::uniform(2, 6.5, 0.25, 0.1)).unwrap();
        assert!((s.nu[0] - 6.25).abs() < 1e-12);
        assert!((s.nu[1] - 6.75).abs() < 1e-12);
        for g in &s.g {
            assert!((g - 0.1 / 2f64.sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn matches_closed_form_up_to_32() {
        for n in 1..=32 {
            let s = build_spectrum(&ArrayParams::uniform(n, 6.5, 0.21, 0.37)).unwrap();
            let (nu, g) = closed_form(n, 6.5, 0.21, 0.37);
            for k in 0..n {
                assert!((s.nu[k] - nu[k]).abs() < 1e-10, "n={n} k={k}");
                assert!((s.g[k] - g[k]).abs() < 1e-10, "n={n} k={k}");
            }
        }
    }

    #[test]
    fn eigenvectors_orthonormal_and_edge_complete() {
        for n in [1, 2, 5, 11, 32] {
            let s = build_spectrum(&ArrayParams::uniform(n, 6.5, 0.26, 0.49)).unwrap();
            for a in 0..n {
                for b in 0..n {
                    let dot: f64 = (0..n).map(|i| s.vectors[i][a] * s.vectors[i][b]).sum();
                    let want = if a == b { 1.0 } else { 0.0 };
                    assert!((dot - want).abs() < 1e-12);
                }
            }
            let w: f64 = s.edge_amp.iter().map(|a| a * a).sum();
            assert!((w - 1.0).abs() < 1e-12);
            assert!(s.g.iter().all(|&g| g > 0.0));
            assert!(s.nu.windows(2).all(|p| p[1] > p[0]) || n == 1);
        }
    }

    #[test]
    fn default_device_matches_quoted_ranges() {
        let dev = DeviceModel::default_device();
        assert_eq!(dev.n_modes(), 11);
        assert_eq!(dev.transmon.n_levels, 3);
        let lo = dev.spectrum.nu.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = dev.spectrum.nu.iter().cloned().fold(0.0, f64::max);
        assert!(lo >= 6.0 - 1e-9 && hi <= 7.0 + 1e-9, "{lo} {hi}");
        let gmin = dev.spectrum.g.iter().cloned().fold(f64::INFINITY, f64::min);
        let gmax = dev.spectrum.g.iter().cloned().fold(0.0, f64::max);
        assert!(gmin >= 0.045 && gmax <= 0.205, "{gmin} {gmax}");
        assert_eq!(dev.active_modes, (1..=9).collect::<Vec<_>>());
    }

    #[test]
    fn disorder_hook_changes_spectrum() {
        let mut a = ArrayParams::uniform(3, 6.5, 0.2, 0.3);
        a.detuning = Some(vec![0.05, 0.0, -0.05]);
        assert!(!a.is_uniform());
        let s = build_spectrum(&a).unwrap();
        let (nu, _) = closed_form(3, 6.5, 0.2, 0.3);
        assert!((s.nu[0] - nu[0]).abs() > 1e-6);
    }

    #[test]
    fn gamma_phi_from_t1_t2() {
        let c = Coherence { t1: 1000.0, t2: 1000.0 };
        assert!((c.gamma_phi() - 0.0005).abs() < 1e-15);
        assert_eq!(Coherence::IDEAL.gamma1(), 0.0);
        assert_eq!(Coherence::IDEAL.gamma_phi(), 0.0);
    }
}
