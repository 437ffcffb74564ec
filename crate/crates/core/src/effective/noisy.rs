//! Gate-level Lindblad executor: each primitive is a constant-generator
//! channel `exp(L T)` whose Hamiltonian part reproduces the ideal primitive
//! (square-pulse equivalent) and whose dissipators use the device T1/T2.

use std::collections::HashMap;
use std::sync::Mutex;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::primitive::{apply_left, apply_right_adjoint, Primitive, Register};
use crate::device::{CoherenceParams, DeviceModel};
use crate::error::{Error, Result};
use crate::hilbert::{linalg, CMat, CVec, QuantumState};
use crate::pulses::Transition;

/// Durations (ns) used to convert primitives into noisy channels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub charge: f64,
    pub gap: f64,
    /// Keyed by `(mode, transition)`.
    pub swap: Vec<((usize, Transition), f64)>,
}

impl Timing {
    pub fn swap_duration(&self, mode: usize, t: Transition) -> Result<f64> {
        self.swap
            .iter()
            .find(|(k, _)| *k == (mode, t))
            .map(|(_, d)| *d)
            .ok_or_else(|| Error::Gate(format!("no swap duration for mode {mode} {t:?}")))
    }

    pub fn duration(&self, p: &Primitive) -> Result<f64> {
        match p {
            Primitive::Rotate { .. } => Ok(self.charge),
            Primitive::Swap { mode, transition, .. } => self.swap_duration(*mode, *transition),
            Primitive::Phase { .. } => Ok(0.0),
        }
    }

    /// Wall-clock length of a primitive list including gaps.
    pub fn total(&self, prims: &[Primitive]) -> Result<f64> {
        let mut t = 0.0;
        let mut n = 0usize;
        for p in prims {
            if !p.is_virtual() {
                t += self.duration(p)?;
                n += 1;
            }
        }
        Ok(t + self.gap * n.saturating_sub(1) as f64)
    }
}

pub struct NoisyRegister {
    pub register: Register,
    pub timing: Timing,
    coherence: CoherenceParams,
    cache: Mutex<HashMap<[u64; 4], CMat>>,
}

fn key(p: &Primitive) -> [u64; 4] {
    match *p {
        Primitive::Rotate { transition, theta, phi } => [0, transition as u64, theta.to_bits(), phi.to_bits()],
        Primitive::Swap { mode, transition, phase } => [1, (mode as u64) << 8 | transition as u64, phase.to_bits(), 0],
        Primitive::Phase { .. } => [2, 0, 0, 0],
    }
}

impl NoisyRegister {
    pub fn new(device: &DeviceModel, modes: &[usize], timing: Timing) -> Self {
        NoisyRegister {
            register: Register::new(device.transmon.n_levels, modes),
            timing,
            coherence: device.coherence.clone(),
            cache: Mutex::new(HashMap::new()),
        }
    }

    fn dissipators(&self) -> Vec<CMat> {
        let l = &self.register.layout;
        let n = l.total_dim();
        let mut ops = Vec::new();
        let mut push_local = |sub: usize, g1: f64, gphi: f64, secular: bool| {
            let d = l.dims()[sub];
            let stride = l.stride(sub);
            if g1 > 0.0 {
                if secular {
                    for lvl in 1..d {
                        let mut m = CMat::zeros(n, n);
                        for i in 0..n {
                            if l.level(i, sub) == lvl {
                                m[(i - stride, i)] = C64::new((g1 * lvl as f64).sqrt(), 0.0);
                            }
                        }
                        ops.push(m);
                    }
                } else {
                    let mut m = CMat::zeros(n, n);
                    for i in 0..n {
                        let lvl = l.level(i, sub);
                        if lvl > 0 {
                            m[(i - stride, i)] = C64::new((g1 * lvl as f64).sqrt(), 0.0);
                        }
                    }
                    ops.push(m);
                }
            }
            if gphi > 0.0 {
                let mut m = CMat::zeros(n, n);
                for i in 0..n {
                    m[(i, i)] = C64::new((2.0 * gphi).sqrt() * l.level(i, sub) as f64, 0.0);
                }
                ops.push(m);
            }
        };
        let t = self.coherence.transmon;
        push_local(0, t.gamma1(), t.gamma_phi(), true);
        for (s, &k) in self.register.modes.iter().enumerate() {
            let c = self.coherence.mode(k);
            push_local(s + 1, c.gamma1(), c.gamma_phi(), false);
        }
        ops
    }

    /// Column-stacked Liouvillian of `H` (GHz) plus the device dissipators.
    fn liouvillian(&self, h: &CMat) -> CMat {
        let n = h.nrows();
        let id = CMat::identity(n, n);
        let two_pi_i = C64::new(0.0, 2.0 * std::f64::consts::PI);
        let mut lv = (id.kronecker(h) - h.transpose().kronecker(&id)).map(|z| -two_pi_i * z);
        for c in self.dissipators() {
            let cdc = c.adjoint() * &c;
            lv += c.conjugate().kronecker(&c);
            lv -= id.kronecker(&cdc).scale(0.5);
            lv -= cdc.transpose().kronecker(&id).scale(0.5);
        }
        lv
    }

    /// Hermitian generator whose evolution for `t` ns gives the primitive.
    fn generator(&self, p: &Primitive, t: f64) -> Result<CMat> {
        let n = self.register.dim();
        let mut h = CMat::zeros(n, n);
        if t <= 0.0 {
            return Ok(h);
        }
        let act = self.register.action(p)?;
        if let super::primitive::Action::Pairs { pairs, .. } = &act {
            match *p {
                Primitive::Rotate { theta, phi, .. } => {
                    let w = theta / (2.0 * std::f64::consts::PI * t);
                    for &(lo, up) in pairs {
                        h[(up, lo)] = C64::from_polar(0.5 * w, phi);
                        h[(lo, up)] = C64::from_polar(0.5 * w, -phi);
                    }
                }
                Primitive::Swap { phase, .. } => {
                    let w = 0.25 / t;
                    for &(a, b) in pairs {
                        h[(a, b)] = C64::from_polar(w, phase);
                        h[(b, a)] = C64::from_polar(w, -phase);
                    }
                }
                Primitive::Phase { .. } => {}
            }
        }
        Ok(h)
    }

    fn channel(&self, p: &Primitive) -> Result<CMat> {
        let k = key(p);
        if let Some(m) = self.cache.lock().unwrap().get(&k) {
            return Ok(m.clone());
        }
        let t = self.timing.duration(p)?;
        let h = self.generator(p, t)?;
        let s = linalg::expm(&self.liouvillian(&h).scale(t));
        self.cache.lock().unwrap().insert(k, s.clone());
        Ok(s)
    }

    fn idle(&self, t: f64) -> CMat {
        let n = self.register.dim();
        linalg::expm(&self.liouvillian(&CMat::zeros(n, n)).scale(t))
    }

    /// Run a primitive list with gaps between physical pulses.
    pub fn run(&self, state: &QuantumState, prims: &[Primitive]) -> Result<QuantumState> {
        let n = self.register.dim();
        let rho = state.to_density();
        let mut v = CVec::from_iterator(n * n, rho.iter().cloned());
        let gap = if self.timing.gap > 0.0 { Some(self.idle(self.timing.gap)) } else { None };
        let mut first = true;
        for p in prims {
            if let Primitive::Phase { .. } = p {
                let act = self.register.action(p)?;
                let mut m = CMat::from_column_slice(n, n, v.as_slice());
                apply_left(&act, &mut m);
                apply_right_adjoint(&act, &mut m);
                v = CVec::from_column_slice(m.as_slice());
                continue;
            }
            if !first {
                if let Some(g) = &gap {
                    v = g * v;
                }
            }
            first = false;
            v = self.channel(p)? * v;
        }
        let m = CMat::from_column_slice(n, n, v.as_slice());
        Ok(QuantumState::density_unchecked(&self.register.layout, m))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::effective::idle_fidelity_exact;
    use crate::hilbert::fidelity;

    fn device(t1: f64, t2: f64) -> DeviceModel {
        DeviceModel::default_device()
            .with_config(|c| {
                c.coherence.t1_transmon = t1;
                c.coherence.t2_transmon = t2;
                c.coherence.t1_mode = vec![t1; 11];
                c.coherence.t2_mode = vec![t2; 11];
            })
            .unwrap()
    }

    fn timing() -> Timing {
        Timing { charge: 20.0, gap: 0.0, swap: vec![((6, Transition::Ge), 50.0), ((6, Transition::Ef), 100.0)] }
    }

    #[test]
    fn ideal_limit_matches_register() {
        let dev = device(f64::INFINITY, f64::INFINITY);
        let nr = NoisyRegister::new(&dev, &[6], timing());
        let prims = [
            Primitive::rot(Transition::Ge, 1.1, 0.3),
            Primitive::swap(6, Transition::Ge, 0.7),
            Primitive::rot(Transition::Ge, 3.14159, 0.0),
            Primitive::swap(6, Transition::Ef, -0.4),
        ];
        let s0 = nr.register.ground();
        let a = nr.run(&s0, &prims).unwrap();
        let b = nr.register.run(&s0, &prims).unwrap();
        assert!(fidelity(&a, &b).unwrap() > 1.0 - 1e-10);
    }

    #[test]
    fn transmon_decay_during_rotation_free_idle() {
        let dev = device(1.0, 1.0);
        let nr = NoisyRegister::new(&dev, &[6], timing());
        let mut s = nr.register.basis(1, &[0]).into_density();
        // identity rotation: just 20 ns of decoherence
        s = nr.run(&s, &[Primitive::rot(Transition::Ge, 0.0, 0.0)]).unwrap();
        assert!((s.level_population(0, 1) - (-0.02f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn idle_matches_exact_average_fidelity() {
        // average over the six cardinal states of the transmon qubit
        let dev = device(1.0, 1.0);
        let t = Timing { charge: 100.0, gap: 0.0, swap: vec![] };
        let nr = NoisyRegister::new(&dev, &[6], t);
        let reg = &nr.register;
        let preps: Vec<Vec<Primitive>> = vec![
            vec![],
            vec![Primitive::rot(Transition::Ge, std::f64::consts::PI, 0.0)],
            vec![Primitive::rot(Transition::Ge, std::f64::consts::FRAC_PI_2, 0.0)],
            vec![Primitive::rot(Transition::Ge, -std::f64::consts::FRAC_PI_2, 0.0)],
            vec![Primitive::rot(Transition::Ge, std::f64::consts::FRAC_PI_2, std::f64::consts::FRAC_PI_2)],
            vec![Primitive::rot(Transition::Ge, -std::f64::consts::FRAC_PI_2, std::f64::consts::FRAC_PI_2)],
        ];
        let mut f = 0.0;
        for p in &preps {
            let ideal = reg.run(&reg.ground(), p).unwrap();
            let noisy = nr.run(&ideal.clone().into_density(), &[Primitive::rot(Transition::Ge, 0.0, 0.0)]).unwrap();
            f += fidelity(&ideal, &noisy).unwrap();
        }
        f /= 6.0;
        let exact = idle_fidelity_exact(100.0, dev.coherence.transmon);
        assert!((f - exact).abs() < 1e-10, "{f} vs {exact}");
    }
}
