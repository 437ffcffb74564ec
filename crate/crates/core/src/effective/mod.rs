//! Analytic sideband layer: Bessel rates, detuned Rabi transfer, coherence
//! limits, and gate-level executors used as the oracle for pulse simulations.

pub mod bessel;
pub mod noisy;
pub mod primitive;

pub use bessel::{bessel_j0, bessel_j1, bessel_jn};
pub use noisy::NoisyRegister;
pub use primitive::{Primitive, Register};

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::device::{Coherence, DeviceModel};
use crate::error::{Error, Result};
use crate::pulses::Transition;

/// A sideband tone aimed at one transmon transition and one mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SidebandSpec {
    pub mode: usize,
    pub transition: Transition,
    /// Peak-to-peak modulation swing (GHz).
    pub eps: f64,
    pub nu_sb: f64,
}

impl SidebandSpec {
    pub fn modulation_index(&self) -> f64 {
        self.eps / (2.0 * self.nu_sb)
    }

    /// Bare resonance `|nu_trans - nu_k|` of the targeted exchange.
    pub fn resonance(&self, device: &DeviceModel) -> f64 {
        (transition_frequency(device, self.transition) - device.spectrum.nu(self.mode)).abs()
    }

    /// `nu_sb - resonance`.
    pub fn detuning(&self, device: &DeviceModel) -> f64 {
        self.nu_sb - self.resonance(device)
    }
}

/// Bare transmon transition frequency at the idle bias.
pub fn transition_frequency(device: &DeviceModel, t: Transition) -> f64 {
    match t {
        Transition::Ge => device.transmon.nu_q0,
        Transition::Ef => device.transmon.nu_q0 + device.transmon.alpha,
    }
}

/// `g_eff = m g_k J1(eps / 2 nu_sb)` with `m = 1` (g-e) or `sqrt 2` (e1-f0).
pub fn g_eff(device: &DeviceModel, spec: &SidebandSpec) -> Result<f64> {
    if spec.mode < 1 || spec.mode > device.n_modes() {
        return Err(Error::validation("mode", format!("mode {} outside 1..={}", spec.mode, device.n_modes())));
    }
    let j1 = bessel_j1(spec.modulation_index())?;
    Ok(spec.transition.matrix_element() * device.spectrum.g(spec.mode) * j1)
}

/// Transmon-to-mode transfer probability after time `t` (ns) at exchange
/// rate `g` and detuning `delta` (GHz).
pub fn rabi_transfer(g: f64, delta: f64, t: f64) -> f64 {
    let w2 = 4.0 * g * g + delta * delta;
    if w2 == 0.0 {
        return 0.0;
    }
    (4.0 * g * g / w2) * (PI * w2.sqrt() * t).sin().powi(2)
}

/// Coherence-limited average gate fidelity of an idle of length `t` (ns) on
/// the listed subsystems, each treated as a qubit:
/// `F = 1 - (t/3) sum_s (1/T1_s + 1/Tphi_s)`.
///
/// This is the first-order expansion of the exact single-qubit result
/// `1/2 + (exp(-t/T1) + 2 exp(-t/T2)) / 6`.
pub fn coherence_limit(t: f64, subsystems: &[Coherence]) -> f64 {
    let rate: f64 = subsystems.iter().map(|c| c.gamma1() + c.gamma_phi()).sum();
    1.0 - t / 3.0 * rate
}

/// Exact average fidelity of amplitude damping plus dephasing on one qubit.
pub fn idle_fidelity_exact(t: f64, c: Coherence) -> f64 {
    0.5 + ((-t * c.gamma1()).exp() + 2.0 * (-t / c.t2).exp()) / 6.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transfer_limits() {
        assert_eq!(rabi_transfer(0.01, 0.0, 0.0), 0.0);
        let g = 0.013;
        assert!((rabi_transfer(g, 0.0, 1.0 / (4.0 * g)) - 1.0).abs() < 1e-12);
        // peak of the detuned transfer is (2g)^2 / ((2g)^2 + delta^2)
        let w = (4.0f64 * 1e-4 + 4e-4).sqrt();
        assert!((rabi_transfer(0.01, 0.02, 0.5 / w) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn transfer_is_even_in_detuning() {
        for d in [0.001, 0.01, 0.1] {
            assert_eq!(rabi_transfer(0.02, d, 37.0), rabi_transfer(0.02, -d, 37.0));
        }
    }

    #[test]
    fn g_eff_values() {
        let dev = DeviceModel::default_device();
        let g = dev.spectrum.g(6);
        let spec = SidebandSpec { mode: 6, transition: Transition::Ge, eps: 0.0, nu_sb: 2.0 };
        assert_eq!(g_eff(&dev, &spec).unwrap(), 0.0);
        let spec = SidebandSpec { eps: 4.0, ..spec };
        assert!((g_eff(&dev, &spec).unwrap() - g * 0.440_050_585_744_933_5).abs() < 1e-12);
        let ef = SidebandSpec { transition: Transition::Ef, ..spec };
        assert!((g_eff(&dev, &ef).unwrap() / g_eff(&dev, &spec).unwrap() - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn coherence_limit_cases() {
        assert_eq!(coherence_limit(100.0, &[Coherence::IDEAL]), 1.0);
        let c = Coherence { t1: 1000.0, t2: 1000.0 };
        let f = coherence_limit(100.0, &[c]);
        assert!((f - 0.95).abs() < 1e-12);
        assert!((f - idle_fidelity_exact(100.0, c)).abs() < 0.01);
        assert!(coherence_limit(200.0, &[c]) < f);
    }
}
