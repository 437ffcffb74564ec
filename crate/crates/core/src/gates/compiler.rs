//! Pulse lowering and calibration against the pulse-level simulator.

use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::Mutex;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use rayon::prelude::*;

use super::calibration::{wrap, GateCorrection, GateKey, PhaseCalibration, RotationCal, SidebandCal};
use super::GateOp;
use crate::device::DeviceModel;
use crate::dynamics::{evolve_batch, EvolveOptions, ModelOptions, SystemModel};
use crate::effective::noisy::Timing;
use crate::effective::{bessel::J1_ARGMAX, bessel_j1, Primitive, Register};
use crate::error::{Error, Result};
use crate::hilbert::{CMat, CVec};
use crate::numerics::{bisect, fit_sinusoid, golden_max, integrate};
use crate::pulses::{
    ChargePulse, Envelope, FluxPulse, FrameTarget, Pulse, PulseSequence, SidebandTarget, Transition, VirtualZ,
};

/// Ceiling on `eps / (2 nu_sb)` when solving amplitudes.
const INDEX_CEILING: f64 = 1.0;
const RAMSEY_IDLE: f64 = 100.0;

/// `|Tr(ideal^dag actual)|^2 / d^2`; leakage out of the block lowers it.
pub fn process_fidelity(ideal: &CMat, actual: &CMat) -> f64 {
    let d = ideal.nrows() as f64;
    (ideal.adjoint() * actual).trace().norm_sqr() / (d * d)
}

fn sideband_area(device: &DeviceModel, mode: usize, t: Transition, x: f64, duration: f64) -> f64 {
    let env = Envelope::gaussian(duration, device.control.truncation_sigmas);
    let g = t.matrix_element() * device.spectrum.g(mode);
    g * integrate(|s| bessel_j1(x * env.value(s)).unwrap_or(f64::NAN), 0.0, duration, 200)
}

/// Duration (ns) and peak modulation index of a pi-area exchange pulse,
/// from `int g_eff(t) dt = 1/4`.
///
/// g-e pulses use the shortest duration at or above the configured minimum
/// whose index stays under the configured ceiling; e1-f0 pulses use the
/// configured fixed duration.
pub fn sideband_shape(device: &DeviceModel, mode: usize, t: Transition) -> Result<(f64, f64)> {
    if mode < 1 || mode > device.n_modes() {
        return Err(Error::validation("mode", format!("mode {mode} outside 1..={}", device.n_modes())));
    }
    let ctl = &device.control;
    let solve = |dur: f64, x_max: f64| -> Result<f64> {
        if sideband_area(device, mode, t, x_max, dur) < 0.25 {
            return Err(Error::Calibration(format!(
                "mode {mode} {t:?}: pi exchange in {dur:.1} ns needs eps/(2 nu_sb) above {x_max}"
            )));
        }
        bisect(|x| sideband_area(device, mode, t, x, dur) - 0.25, 0.0, x_max, 1e-12)
    };
    match t {
        Transition::Ge => {
            let z = ctl.sideband_index_max.min(J1_ARGMAX);
            let t_min = ctl.min_sideband_duration;
            let area = sideband_area(device, mode, t, z, t_min);
            if area >= 0.25 {
                Ok((t_min, solve(t_min, z)?))
            } else {
                // a Gaussian of fixed shape has area proportional to its length
                Ok((t_min * 0.25 / area, z))
            }
        }
        Transition::Ef => {
            let dur = ctl.ef_sideband_duration;
            Ok((dur, solve(dur, INDEX_CEILING)?))
        }
    }
}

/// Gate-level durations for every active mode, for the noisy executor.
pub fn sideband_timing(device: &DeviceModel) -> Result<Timing> {
    let mut swap = Vec::new();
    for &k in &device.active_modes {
        for t in [Transition::Ge, Transition::Ef] {
            swap.push(((k, t), sideband_shape(device, k, t)?.0));
        }
    }
    Ok(Timing { charge: device.control.charge_duration, gap: device.control.gap, swap })
}

fn sim_options() -> EvolveOptions {
    EvolveOptions::default()
}

/// Amplitudes among the listed basis states (given as level lists):
/// entry `(r, c)` is `<states[r]| U |states[c]>`.
fn block(model: &SystemModel, seq: &PulseSequence, states: &[Vec<usize>], idle_to: f64) -> Result<CMat> {
    let idx = states.iter().map(|s| model.index_of(s)).collect::<Result<Vec<_>>>()?;
    let n = model.dim();
    let inputs: Vec<CVec> = idx
        .iter()
        .map(|&j| {
            let mut v = CVec::zeros(n);
            v[j] = C64::new(1.0, 0.0);
            v
        })
        .collect();
    let mut opts = sim_options();
    if idle_to > seq.duration() {
        opts.record_times = vec![idle_to];
    }
    let out = evolve_batch(model, seq, &inputs, &opts)?;
    Ok(CMat::from_fn(idx.len(), idx.len(), |r, c| out[c][idx[r]]))
}

fn levels_with(model: &SystemModel, q: usize, photons: &[(usize, usize)]) -> Result<Vec<usize>> {
    let mut lv = vec![0; model.layout().n_subsystems()];
    lv[0] = q;
    for &(mode, n) in photons {
        lv[model.subsystem(mode)?] = n;
    }
    Ok(lv)
}

/// Phase of a simulated Ramsey fringe: the analysis pulse phase is swept
/// and a sinusoid is fitted to `P_e`. `amp_g`, `amp_e` are the amplitudes
/// of `|g>` and `|e>` before the analysis pulse.
fn ramsey_phase(amp_g: C64, amp_e: C64) -> Result<f64> {
    let n = 16;
    let phases: Vec<f64> = (0..n).map(|i| 2.0 * PI * i as f64 / n as f64).collect();
    let p_e: Vec<f64> = phases
        .iter()
        .map(|&a| {
            // analysis pi/2 about the axis at angle a
            let mi = C64::new(0.0, -std::f64::consts::FRAC_1_SQRT_2);
            let e = mi * C64::from_polar(1.0, a) * amp_g + std::f64::consts::FRAC_1_SQRT_2 * amp_e;
            e.norm_sqr()
        })
        .collect();
    let (_, amp, phase) = fit_sinusoid(&phases, &p_e)?;
    let expected = (amp_g * amp_e).norm();
    if !(amp > 0.5 * expected) || expected < 1e-3 {
        return Err(Error::Fit(format!("Ramsey fringe contrast {amp:.3e} too low")));
    }
    // P_e = 1/2 + |g||e| cos(a - arg(e/g) - pi/2)
    Ok(wrap(phase - FRAC_PI_2))
}

/// Mean transmon frequency shift (GHz) during a flux pulse from a simulated
/// Ramsey sequence on the bare transmon.
pub fn ramsey_dc_shift(device: &DeviceModel, pulse: &FluxPulse) -> Result<f64> {
    let model = SystemModel::new(device, &[], ModelOptions::default().with_transmon_levels(3))?;
    let mut seq = PulseSequence::new();
    seq.append(Pulse::Flux(*pulse), 0.0)?;
    let m = block(&model, &seq, &[vec![0], vec![1]], 0.0)?;
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let phase = ramsey_phase(m[(0, 0)] * s, m[(1, 1)] * s)?;
    let dur = pulse.envelope.duration;
    Ok(if dur > 0.0 { -phase / (2.0 * PI * dur) } else { 0.0 })
}

fn tune_sideband(model: &SystemModel, mode: usize, t: Transition, occupied: &[usize]) -> Result<SidebandCal> {
    let dev = model.device();
    let lower = t.lower();
    let mut photons: Vec<(usize, usize)> = occupied.iter().map(|&m| (m, 1)).collect();
    let a = levels_with(model, lower + 1, &photons)?;
    photons.push((mode, 1));
    let b = levels_with(model, lower, &photons)?;
    let res = model.dressed_energy(&b)? - model.dressed_energy(&a)?;
    if !(res > 0.0) {
        return Err(Error::Calibration(format!("mode {mode} lies below the {t:?} transition")));
    }
    let fe = model.frame_energies();
    let frame_freq = fe[model.index_of(&b)?] - fe[model.index_of(&a)?];
    let (duration, x) = sideband_shape(dev, mode, t)?;
    let env = Envelope::gaussian(duration, dev.control.truncation_sigmas);
    let make = |nu: f64, eps: f64| FluxPulse {
        target: Some(SidebandTarget { mode, transition: t }),
        nu_sb: nu,
        eps,
        phase: 0.0,
        envelope: env,
        frame_freq,
        dc_track: 1.0,
    };
    let states = [a.clone(), b.clone()];
    let run = |nu: f64, eps: f64| -> Result<CMat> {
        let mut seq = PulseSequence::new();
        seq.append(Pulse::Flux(make(nu, eps)), 0.0)?;
        block(model, &seq, &states, 0.0)
    };
    let transfer = |nu: f64, eps: f64| run(nu, eps).map(|m| m[(0, 1)].norm_sqr()).unwrap_or(0.0);

    let mut nu = res;
    let mut eps = 2.0 * res * x;
    let g_peak = t.matrix_element() * dev.spectrum.g(mode) * bessel_j1(x)?;
    let width = (0.3 * g_peak).max(0.002);
    for round in 0..2 {
        let w = width / (1 + 2 * round) as f64;
        nu = golden_max(|f| transfer(f, eps), nu - w, nu + w, 1e-6).0;
        let s = 0.08 / (1 + 2 * round) as f64;
        let scale = golden_max(|k| transfer(nu, eps * k), 1.0 - s, 1.0 + s, 1e-5).0;
        eps *= scale;
    }
    let m = run(nu, eps)?;
    let pulse = make(nu, eps);
    let (idle_e, idle_mode) = match t {
        Transition::Ef if occupied.is_empty() => {
            let idle = [levels_with(model, 0, &[])?, levels_with(model, 1, &[])?, levels_with(model, 0, &[(mode, 1)])?];
            let mut seq = PulseSequence::new();
            seq.append(Pulse::Flux(pulse.clone()), 0.0)?;
            let d = block(model, &seq, &idle, 0.0)?;
            (wrap(d[(1, 1)].arg() - d[(0, 0)].arg()), wrap(d[(2, 2)].arg() - d[(0, 0)].arg()))
        }
        _ => (0.0, 0.0),
    };
    Ok(SidebandCal {
        mode,
        transition: t,
        nu_sb: nu,
        eps,
        duration,
        frame_freq,
        dc_track: 1.0,
        load_phase: wrap(m[(0, 1)].arg() + FRAC_PI_2),
        unload_phase: wrap(m[(1, 0)].arg() + FRAC_PI_2),
        transfer: m[(0, 1)].norm_sqr(),
        dc_shift: ramsey_dc_shift(dev, &pulse)?,
        idle_e,
        idle_mode,
        occupied: occupied.to_vec(),
    })
}

/// Weighted least-squares phase fit with a tiny ridge so degenerate
/// combinations are split evenly. Rows are `(coefficients, phase, weight)`.
/// Phases are only known modulo `2 pi`, so the fit is refined by
/// Gauss-Newton steps on residuals re-wrapped around the current model.
fn phase_fit(rows: &[(Vec<f64>, f64, f64)], n: usize) -> Vec<f64> {
    let mut ata = DMatrix::<f64>::identity(n, n) * 1e-9;
    for (c, _, w) in rows {
        for i in 0..n {
            for j in 0..n {
                ata[(i, j)] += w * c[i] * c[j];
            }
        }
    }
    let lu = ata.lu();
    // anchor each unknown on the lowest-order row that still has it free,
    // so the polish below starts on the right branch
    let mut x = vec![0.0; n];
    let mut known = vec![false; n];
    let mut order: Vec<&(Vec<f64>, f64, f64)> = rows.iter().collect();
    order.sort_by(|a, b| a.0.iter().sum::<f64>().total_cmp(&b.0.iter().sum::<f64>()));
    for (c, y, _) in order {
        let free: Vec<usize> = (0..n).filter(|&i| c[i] != 0.0 && !known[i]).collect();
        if let Some(&i) = free.first() {
            let pred: f64 = c.iter().zip(&x).map(|(a, b)| a * b).sum();
            x[i] = wrap(y - pred) / c[i];
            for &j in &free {
                known[j] = true;
            }
        }
    }
    for _ in 0..20 {
        let mut atb = DVector::<f64>::zeros(n);
        for (c, y, w) in rows {
            let pred: f64 = c.iter().zip(&x).map(|(a, b)| a * b).sum();
            let r = wrap(y - pred);
            for i in 0..n {
                atb[i] += w * c[i] * r;
            }
        }
        let Some(dx) = lu.solve(&atb) else { break };
        let step = dx.amax();
        for i in 0..n {
            x[i] += dx[i];
        }
        if step < 1e-12 {
            break;
        }
    }
    x
}

fn embedded_rotation(levels: usize, t: Transition, theta: f64, phi: f64) -> CMat {
    let mut u = CMat::identity(levels, levels);
    let r = super::rotation(theta, phi);
    let l = t.lower();
    for i in 0..2 {
        for j in 0..2 {
            u[(l + i, l + j)] = r[(i, j)];
        }
    }
    u
}

/// Compiles gates to pulses for one simulated subsystem (transmon plus a
/// fixed list of modes) and owns the calibration measured on it.
pub struct Compiler {
    model: SystemModel,
    cal: PhaseCalibration,
    rotations: Mutex<Vec<RotationCal>>,
    loaded: Mutex<Vec<SidebandCal>>,
}

impl Clone for Compiler {
    fn clone(&self) -> Self {
        Compiler {
            model: self.model.clone(),
            cal: self.cal.clone(),
            rotations: Mutex::new(self.rotations.lock().expect("rotation cache").clone()),
            loaded: Mutex::new(self.loaded.lock().expect("sideband cache").clone()),
        }
    }
}

impl Compiler {
    /// Tune up every sideband of `modes` and the charge drive on the
    /// pulse-level model of the transmon plus `modes`. Gate-level
    /// corrections are added by [`Compiler::calibrate_gate`].
    pub fn new(device: &DeviceModel, modes: &[usize]) -> Result<Self> {
        for &m in modes {
            device.require_active(m)?;
        }
        let model = SystemModel::new(device, modes, ModelOptions::gate_level())?;
        let e = |q: usize| levels_with(&model, q, &[]).and_then(|lv| model.dressed_energy(&lv));
        let ge_freq = e(1)? - e(0)?;
        let ef_freq = e(2)? - e(1)?;
        let pairs: Vec<(usize, Transition)> =
            modes.iter().flat_map(|&m| [(m, Transition::Ge), (m, Transition::Ef)]).collect();
        let sidebands = pairs.par_iter().map(|&(m, t)| tune_sideband(&model, m, t, &[])).collect::<Result<Vec<_>>>()?;
        let mut c = Compiler {
            model,
            cal: PhaseCalibration {
                device_hash: device.hash(),
                modes: modes.to_vec(),
                enabled: true,
                ge_freq,
                ef_freq,
                sidebands,
                rotations: vec![],
                gates: vec![],
                dispersive: vec![],
            },
            rotations: Mutex::new(vec![]),
            loaded: Mutex::new(vec![]),
        };
        c.cal.dispersive = modes.iter().map(|&m| Ok((m, c.dispersive_shift(m)?))).collect::<Result<_>>()?;
        for (t, th) in [(Transition::Ge, FRAC_PI_2), (Transition::Ge, PI), (Transition::Ef, PI)] {
            let r = c.measure_rotation(t, th)?;
            c.cal.rotations.push(r);
        }
        Ok(c)
    }

    /// Rebuild from a stored calibration.
    pub fn from_calibration(device: &DeviceModel, cal: PhaseCalibration) -> Result<Self> {
        if cal.device_hash != device.hash() {
            return Err(Error::Calibration("calibration was measured on a different device".into()));
        }
        let model = SystemModel::new(device, &cal.modes, ModelOptions::gate_level())?;
        Ok(Compiler { model, cal, rotations: Mutex::new(vec![]), loaded: Mutex::new(vec![]) })
    }

    pub fn model(&self) -> &SystemModel {
        &self.model
    }

    pub fn calibration(&self) -> &PhaseCalibration {
        &self.cal
    }

    pub fn device(&self) -> &DeviceModel {
        self.model.device()
    }

    /// Same tune-up with phase compensation switched on or off.
    pub fn with_phase_calibration(&self, enabled: bool) -> Compiler {
        let mut c = self.clone();
        c.cal.enabled = enabled;
        c
    }

    /// Durations of this calibration, for the noisy gate-level executor.
    pub fn timing(&self) -> Timing {
        Timing {
            charge: self.device().control.charge_duration,
            gap: self.device().control.gap,
            swap: self.cal.sidebands.iter().map(|s| ((s.mode, s.transition), s.duration)).collect(),
        }
    }

    /// `|e1>` dispersive shift of `mode` (GHz) from simulated Ramsey fringes
    /// with and without a photon in the mode.
    pub fn dispersive_shift(&self, mode: usize) -> Result<f64> {
        let m = &self.model;
        let states = [
            levels_with(m, 0, &[])?,
            levels_with(m, 1, &[])?,
            levels_with(m, 0, &[(mode, 1)])?,
            levels_with(m, 1, &[(mode, 1)])?,
        ];
        let b = block(m, &PulseSequence::new(), &states, RAMSEY_IDLE)?;
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let p0 = ramsey_phase(b[(0, 0)] * s, b[(1, 1)] * s)?;
        let p1 = ramsey_phase(b[(2, 2)] * s, b[(3, 3)] * s)?;
        Ok(-wrap(p1 - p0) / (2.0 * PI * RAMSEY_IDLE))
    }

    fn charge_pulse(&self, t: Transition, theta: f64, phi: f64, scale: f64, detuning: f64) -> ChargePulse {
        let ctl = &self.device().control;
        let env = Envelope::gaussian(ctl.charge_duration, ctl.truncation_sigmas);
        let mut p = ChargePulse::for_rotation(t, self.cal.charge_freq(t), theta, phi, env);
        p.rabi *= scale;
        p.detuning = detuning;
        p
    }

    fn rotation_block(&self, t: Transition, theta: f64, scale: f64, detuning: f64, states: &[Vec<usize>]) -> Result<CMat> {
        let mut seq = PulseSequence::new();
        seq.append(Pulse::Charge(self.charge_pulse(t, theta, 0.0, scale, detuning)), 0.0)?;
        block(&self.model, &seq, states, 0.0)
    }

    /// Amplitude (and, for a full flip, carrier) tune-up so the transferred
    /// amplitude is `sin(theta/2)`, then level phases around the pulse.
    fn measure_rotation(&self, t: Transition, theta: f64) -> Result<RotationCal> {
        let nl = self.model.layout().dims()[0];
        let states: Vec<Vec<usize>> = (0..nl).map(|q| levels_with(&self.model, q, &[])).collect::<Result<_>>()?;
        let (lo, hi) = (t.lower(), t.lower() + 1);
        let target = (theta / 2.0).sin().abs();
        let transfer = |s: f64, d: f64| -> f64 {
            self.rotation_block(t, theta, s, d, &states).map(|m| m[(hi, lo)].norm()).unwrap_or(0.0)
        };
        let (mut scale, mut detuning) = (1.0, 0.0);
        for _ in 0..3 {
            scale = golden_max(|s| -(transfer(s, detuning) - target).powi(2), 0.85, 1.15, 1e-7).0;
            if target < 0.999 {
                break;
            }
            detuning = golden_max(|d| transfer(scale, d), -0.01, 0.01, 1e-8).0;
        }
        let m = self.rotation_block(t, theta, scale, detuning, &states)?;
        let ideal = embedded_rotation(nl, t, theta, 0.0);
        // unknowns: global, pre phases of levels 1.., post phases of levels 1..
        let n = 2 * nl - 1;
        let mut rows = Vec::new();
        for r in 0..nl {
            for c in 0..nl {
                let w = ideal[(r, c)].norm_sqr();
                if w < 1e-6 {
                    continue;
                }
                let mut co = vec![0.0; n];
                co[0] = 1.0;
                if c > 0 {
                    co[c] = 1.0;
                }
                if r > 0 {
                    co[nl - 1 + r] = 1.0;
                }
                rows.push((co, wrap((m[(r, c)] / ideal[(r, c)]).arg()), w));
            }
        }
        let x = phase_fit(&rows, n);
        let mut pre = vec![0.0; nl];
        let mut post = vec![0.0; nl];
        for l in 1..nl {
            pre[l] = x[l];
            post[l] = x[nl - 1 + l];
        }
        Ok(RotationCal { transition: t, theta, scale, detuning, pre, post })
    }

    fn rotation_cal(&self, t: Transition, theta: f64) -> Result<RotationCal> {
        let hit = |r: &&RotationCal| r.transition == t && (r.theta - theta).abs() < 1e-12;
        if let Some(r) = self.cal.rotations.iter().find(hit) {
            return Ok(r.clone());
        }
        if let Some(r) = self.rotations.lock().expect("rotation cache").iter().find(hit) {
            return Ok(r.clone());
        }
        let r = self.measure_rotation(t, theta)?;
        self.rotations.lock().expect("rotation cache").push(r.clone());
        Ok(r)
    }

    /// Sideband tuned with `occupied` modes holding a photon, so its
    /// frequency includes their dispersive pull.
    fn loaded_sideband(&self, mode: usize, t: Transition, occupied: &[usize]) -> Result<SidebandCal> {
        if occupied.is_empty() {
            return self.cal.sideband(mode, t).cloned();
        }
        let hit = |s: &&SidebandCal| s.mode == mode && s.transition == t && s.occupied == occupied;
        if let Some(s) = self.cal.sidebands.iter().find(hit) {
            return Ok(s.clone());
        }
        if let Some(s) = self.loaded.lock().expect("sideband cache").iter().find(hit) {
            return Ok(s.clone());
        }
        let s = tune_sideband(&self.model, mode, t, occupied)?;
        self.loaded.lock().expect("sideband cache").push(s.clone());
        Ok(s)
    }

    /// Lower primitives to a pulse schedule. Consecutive physical pulses are
    /// separated by the configured gap; frame updates take no time.
    pub fn lower(&self, prims: &[Primitive]) -> Result<PulseSequence> {
        self.lower_loaded(prims, &[])
    }

    /// As [`Self::lower`], with `occupied[i]` naming the modes known to hold
    /// a photon whenever swap `i` acts (missing entries mean none).
    fn lower_loaded(&self, prims: &[Primitive], occupied: &[Vec<usize>]) -> Result<PulseSequence> {
        let gap = self.device().control.gap;
        let on = self.cal.enabled;
        let mut seq = PulseSequence::new();
        let vz = |seq: &mut PulseSequence, target: FrameTarget, angle: f64| -> Result<()> {
            if angle != 0.0 {
                seq.append(Pulse::VirtualZ(VirtualZ { target, angle }), 0.0)?;
            }
            Ok(())
        };
        for (i, p) in prims.iter().enumerate() {
            match *p {
                Primitive::Phase { target, angle } => {
                    if let FrameTarget::Mode(m) = target {
                        self.model.subsystem(m)?;
                    }
                    vz(&mut seq, target, angle)?;
                }
                Primitive::Rotate { transition, theta, phi } => {
                    if theta == 0.0 {
                        continue;
                    }
                    let (theta, phi) = if theta < 0.0 { (-theta, phi + PI) } else { (theta, phi) };
                    let rc = self.rotation_cal(transition, theta)?;
                    if on {
                        for (l, a) in rc.pre.iter().enumerate().skip(1) {
                            vz(&mut seq, FrameTarget::TransmonLevel(l), -a)?;
                        }
                    }
                    let pulse = self.charge_pulse(transition, theta, phi, rc.scale, rc.detuning);
                    seq.append(Pulse::Charge(pulse), gap)?;
                    if on {
                        for (l, a) in rc.post.iter().enumerate().skip(1) {
                            vz(&mut seq, FrameTarget::TransmonLevel(l), -a)?;
                        }
                    }
                }
                Primitive::Swap { mode, transition, phase } => {
                    let sb = &self.loaded_sideband(mode, transition, occupied.get(i).map_or(&[][..], |o| o))?;
                    let ctl = &self.device().control;
                    let pulse = FluxPulse {
                        target: Some(SidebandTarget { mode, transition }),
                        nu_sb: sb.nu_sb,
                        eps: sb.eps,
                        phase: if on { sb.flux_phase(phase) } else { phase },
                        envelope: Envelope::gaussian(sb.duration, ctl.truncation_sigmas),
                        frame_freq: sb.frame_freq,
                        dc_track: sb.dc_track,
                    };
                    let g = sb.pair_phase();
                    match transition {
                        Transition::Ge => {
                            seq.append(Pulse::Flux(pulse), gap)?;
                            if on {
                                vz(&mut seq, FrameTarget::TransmonLevel(1), -g)?;
                                vz(&mut seq, FrameTarget::Mode(mode), -g)?;
                            }
                        }
                        Transition::Ef => {
                            // the pre-rotation of e lets |e,0> and |g,1> be
                            // fixed without moving the exchange phases
                            let (pe, pm) = (sb.idle_e, sb.idle_mode);
                            if on {
                                vz(&mut seq, FrameTarget::TransmonLevel(1), g - pe - pm)?;
                            }
                            seq.append(Pulse::Flux(pulse), gap)?;
                            if on {
                                vz(&mut seq, FrameTarget::TransmonLevel(1), pm - g)?;
                                vz(&mut seq, FrameTarget::TransmonLevel(2), pe + pm - 2.0 * g)?;
                                vz(&mut seq, FrameTarget::Mode(mode), -pm)?;
                            }
                        }
                    }
                }
            }
        }
        Ok(seq)
    }

    fn corrected_primitives(&self, op: &GateOp, corr: Option<&GateCorrection>) -> Vec<Primitive> {
        let mut prims = op.primitives();
        let Some(corr) = corr.filter(|_| self.cal.enabled) else {
            return prims;
        };
        if let Some(slot) = op.conditional_slot() {
            if let Primitive::Swap { phase, .. } = &mut prims[slot] {
                *phase += corr.conditional;
            }
        }
        let mut out: Vec<Primitive> = corr.pre.iter().map(|&(m, a)| Primitive::mode_phase(m, a)).collect();
        out.extend(prims);
        out.extend(corr.post.iter().map(|&(m, a)| Primitive::mode_phase(m, a)));
        out
    }

    /// Pulse schedule of one gate, with its stored correction if any.
    pub fn compile(&self, op: &GateOp) -> Result<PulseSequence> {
        op.validate(self.device())?;
        let corr = GateKey::of(op).and_then(|k| self.cal.gate(&k));
        self.lower_op(op, &self.corrected_primitives(op, corr))
    }

    fn lower_op(&self, op: &GateOp, prims: &[Primitive]) -> Result<PulseSequence> {
        if let GateOp::Ghz { .. } = op {
            // each load acts on a single branch, whose earlier modes are full
            let mut full = Vec::new();
            let occupied: Vec<Vec<usize>> = prims
                .iter()
                .map(|p| match *p {
                    Primitive::Swap { mode, .. } => {
                        let o = full.clone();
                        full.push(mode);
                        o
                    }
                    _ => vec![],
                })
                .collect();
            return self.lower_loaded(prims, &occupied);
        }
        self.lower(prims)
    }

    /// Concatenated schedule of several gates.
    pub fn compile_ops(&self, ops: &[GateOp]) -> Result<PulseSequence> {
        let gap = self.device().control.gap;
        let mut seq = PulseSequence::new();
        for op in ops {
            seq.append_sequence(&self.compile(op)?, gap)?;
        }
        Ok(seq)
    }

    /// Level lists of the qubit basis: transmon `|g>`, each mode 0 or 1,
    /// little-endian over the model's modes.
    pub fn qubit_states(&self) -> Vec<Vec<usize>> {
        let m = self.model.modes().len();
        (0..1usize << m)
            .map(|i| {
                let mut lv = vec![0];
                lv.extend((0..m).map(|s| (i >> s) & 1));
                lv
            })
            .collect()
    }

    /// Qubit basis of `modes` (little-endian) with every other simulated
    /// mode empty and the transmon in `|g>`.
    pub fn gate_states(&self, modes: &[usize]) -> Result<Vec<Vec<usize>>> {
        let subs = modes.iter().map(|&m| self.model.subsystem(m)).collect::<Result<Vec<_>>>()?;
        Ok((0..1usize << modes.len())
            .map(|i| {
                let mut lv = vec![0; self.model.layout().n_subsystems()];
                for (s, &sub) in subs.iter().enumerate() {
                    lv[sub] = (i >> s) & 1;
                }
                lv
            })
            .collect())
    }

    /// Pulse-level amplitudes of `seq` among the listed basis states.
    pub fn block(&self, seq: &PulseSequence, states: &[Vec<usize>]) -> Result<CMat> {
        block(&self.model, seq, states, 0.0)
    }

    /// Pulse-level action of `seq` on the qubit basis.
    pub fn qubit_block(&self, seq: &PulseSequence) -> Result<CMat> {
        self.block(seq, &self.qubit_states())
    }

    /// Final state of `seq` started from transmon `|g>` and vacuum.
    pub fn run_from_vacuum(&self, seq: &PulseSequence) -> Result<CVec> {
        let n = self.model.dim();
        let mut v = CVec::zeros(n);
        v[self.model.index_of(&vec![0; self.model.layout().n_subsystems()])?] = C64::new(1.0, 0.0);
        Ok(evolve_batch(&self.model, seq, &[v], &sim_options())?.remove(0))
    }

    /// Fidelity of the compiled gate against its textbook action on the
    /// gate's own modes, other modes empty: process fidelity, or state
    /// fidelity from vacuum for GHZ.
    pub fn gate_fidelity(&self, op: &GateOp) -> Result<f64> {
        let seq = self.compile(op)?;
        let modes = op.modes();
        let states = self.gate_states(&modes)?;
        if let Some(target) = op.ideal_state(&modes)? {
            let psi = self.run_from_vacuum(&seq)?;
            let mut ov = C64::new(0.0, 0.0);
            for (i, lv) in states.iter().enumerate() {
                ov += target[i].conj() * psi[self.model.index_of(lv)?];
            }
            return Ok(ov.norm_sqr());
        }
        let ideal = op
            .ideal_matrix(&modes)?
            .ok_or_else(|| Error::Gate("gate has no qubit-space matrix; use block() on its subspace".into()))?;
        Ok(process_fidelity(&ideal, &self.block(&seq, &states)?))
    }

    /// Basis states on which `op` is compared with the effective model:
    /// the gate's mode qubits for memory gates, the exchanged pair plus the
    /// idle states of the same excitation range for a single iSWAP, and `g, e, f` for a transmon rotation.
    pub fn oracle_states(&self, op: &GateOp) -> Result<Vec<Vec<usize>>> {
        Ok(match op {
            GateOp::TransmonRot { .. } => {
                (0..3).map(|q| levels_with(&self.model, q, &[])).collect::<Result<_>>()?
            }
            GateOp::ModeISwap { mode, transition } => {
                let lo = transition.lower();
                let mut v = vec![levels_with(&self.model, 0, &[])?];
                if lo > 0 {
                    v.push(levels_with(&self.model, lo, &[])?);
                }
                v.push(levels_with(&self.model, lo + 1, &[])?);
                v.push(levels_with(&self.model, lo, &[(*mode, 1)])?);
                if lo > 0 {
                    v.push(levels_with(&self.model, 0, &[(*mode, 1)])?);
                }
                v
            }
            _ => self.gate_states(&op.modes())?,
        })
    }

    /// Agreement of the compiled pulses with the exact effective model:
    /// process fidelity on [`Self::oracle_states`], or state fidelity from
    /// vacuum for GHZ.
    pub fn oracle_fidelity(&self, op: &GateOp) -> Result<f64> {
        let seq = self.compile(op)?;
        let reg = Register::new(3, self.model.modes());
        let prims = op.primitives();
        if let GateOp::Ghz { .. } = op {
            let eff = reg.run(&reg.ground(), &prims)?;
            let eff = eff.as_pure().expect("unitary run keeps a pure state");
            let psi = self.run_from_vacuum(&seq)?;
            let mut ov = C64::new(0.0, 0.0);
            for i in 0..reg.dim() {
                if eff[i].norm() > 0.0 {
                    ov += eff[i].conj() * psi[self.model.index_of(&reg.layout.levels(i))?];
                }
            }
            return Ok(ov.norm_sqr());
        }
        let states = self.oracle_states(op)?;
        let idx: Vec<usize> = states.iter().map(|lv| reg.layout.index(lv)).collect();
        let u = reg.unitary(&prims)?;
        let ideal = CMat::from_fn(idx.len(), idx.len(), |r, c| u[(idx[r], idx[c])]);
        Ok(process_fidelity(&ideal, &self.block(&seq, &states)?))
    }

    /// Measure and store frame corrections for one gate. Single-mode gates
    /// are probed with a pi/2 rotation and GHZ with theta = pi/2; the
    /// corrections apply to every angle.
    pub fn calibrate_gate(&mut self, op: &GateOp) -> Result<GateCorrection> {
        op.validate(self.device())?;
        let key = GateKey::of(op).ok_or_else(|| Error::Gate(format!("{op:?} has no gate-level calibration")))?;
        let probe = match op {
            GateOp::SingleMode { mode, .. } => GateOp::SingleMode { mode: *mode, theta: FRAC_PI_2, phi: 0.0 },
            GateOp::Ghz { modes, .. } => GateOp::Ghz { modes: modes.clone(), theta: FRAC_PI_2 },
            o => o.clone(),
        };
        let gate_modes = op.modes();
        for &m in &gate_modes {
            self.model.subsystem(m).map_err(|_| Error::Gate(format!("mode {m} is not simulated by this compiler")))?;
        }
        let bits: Vec<usize> = (0..gate_modes.len()).collect();
        let was_enabled = self.cal.enabled;
        self.cal.enabled = true;
        let mut corr = self.cal.gate(&key).cloned().unwrap_or_else(|| GateCorrection::zero(key.clone(), &gate_modes));
        let result = self.iterate_correction(&probe, &bits, &gate_modes, &mut corr);
        self.cal.enabled = was_enabled;
        result?;
        self.cal.gates.retain(|g| g.key != key);
        self.cal.gates.push(corr.clone());
        Ok(corr)
    }

    /// Phase of each nonzero ideal entry relative to the ideal, measured with
    /// correction `corr`.
    fn phase_table(&self, probe: &GateOp, corr: &GateCorrection, modes: &[usize]) -> Result<Vec<(usize, usize, f64, f64)>> {
        let seq = self.lower_op(probe, &self.corrected_primitives(probe, Some(corr)))?;
        let mut out = Vec::new();
        let states = self.gate_states(modes)?;
        if let Some(target) = probe.ideal_state(modes)? {
            let psi = self.run_from_vacuum(&seq)?;
            for (r, lv) in states.iter().enumerate() {
                let w = target[r].norm_sqr();
                if w > 1e-6 {
                    let a = psi[self.model.index_of(lv)?];
                    out.push((r, 0, wrap((a / target[r]).arg()), w));
                }
            }
        } else {
            let ideal = probe.ideal_matrix(modes)?.expect("unitary gate");
            let m = self.block(&seq, &states)?;
            for r in 0..ideal.nrows() {
                for c in 0..ideal.ncols() {
                    let w = ideal[(r, c)].norm_sqr();
                    if w > 1e-6 {
                        out.push((r, c, wrap((m[(r, c)] / ideal[(r, c)]).arg()), w));
                    }
                }
            }
        }
        // reference everything to the vacuum entry
        let p0 = out.iter().find(|e| e.0 == 0 && e.1 == 0).map(|e| e.2).unwrap_or(0.0);
        for e in &mut out {
            e.2 = wrap(e.2 - p0);
        }
        Ok(out)
    }

    fn conditional_residual(table: &[(usize, usize, f64, f64)], bits: &[usize]) -> f64 {
        let col = |c: usize| table.iter().find(|e| e.1 == c).map(|e| e.2).unwrap_or(0.0);
        let (c1, c2) = (1 << bits[0], 1 << bits[1]);
        wrap(col(c1 | c2) - col(c1) - col(c2))
    }

    fn iterate_correction(&self, probe: &GateOp, bits: &[usize], modes: &[usize], corr: &mut GateCorrection) -> Result<()> {
        let nb = bits.len();
        let n = 1 + 2 * nb;
        let conditional = probe.conditional_slot().is_some();
        let mut slope: Option<f64> = None;
        for _ in 0..8 {
            let table = self.phase_table(probe, corr, modes)?;
            let mut resid = 0.0f64;
            if conditional {
                let r = Self::conditional_residual(&table, bits);
                let s = match slope {
                    Some(s) => s,
                    None => {
                        let mut trial = corr.clone();
                        trial.conditional += 0.1;
                        let r2 = Self::conditional_residual(&self.phase_table(probe, &trial, modes)?, bits);
                        let s = wrap(r2 - r) / 0.1;
                        if s.abs() < 0.2 {
                            return Err(Error::Calibration("conditional phase does not respond to the swap phase".into()));
                        }
                        slope = Some(s);
                        s
                    }
                };
                corr.conditional = wrap(corr.conditional - r / s);
                resid = resid.max(r.abs());
            }
            let rows: Vec<(Vec<f64>, f64, f64)> = table
                .iter()
                .map(|&(r, c, ph, w)| {
                    let mut co = vec![0.0; n];
                    co[0] = 1.0;
                    for (s, &b) in bits.iter().enumerate() {
                        co[1 + s] = ((c >> b) & 1) as f64;
                        co[1 + nb + s] = ((r >> b) & 1) as f64;
                    }
                    (co, ph, w)
                })
                .collect();
            let x = phase_fit(&rows, n);
            for s in 0..nb {
                corr.pre[s].1 = wrap(corr.pre[s].1 - x[1 + s]);
                corr.post[s].1 = wrap(corr.post[s].1 - x[1 + nb + s]);
                resid = resid.max(x[1 + s].abs()).max(x[1 + nb + s].abs());
            }
            corr.residual = resid;
            if resid < 1e-5 {
                break;
            }
        }
        Ok(())
    }

    /// Calibrate every standard gate on the simulated modes: single-mode
    /// rotations, CZ/CX/CY on each ordered pair, SWAP on each pair, and GHZ
    /// over all modes in order.
    pub fn calibrate_standard_gates(&mut self) -> Result<()> {
        let modes = self.model.modes().to_vec();
        let mut ops: Vec<GateOp> = modes.iter().map(|&m| GateOp::SingleMode { mode: m, theta: 1.0, phi: 0.0 }).collect();
        for &j in &modes {
            for &k in &modes {
                if j != k {
                    ops.push(GateOp::Cz { control: j, target: k });
                    ops.push(GateOp::Cx { control: j, target: k });
                    ops.push(GateOp::Cy { control: j, target: k });
                    if j < k {
                        ops.push(GateOp::Swap { a: j, b: k });
                    }
                }
            }
        }
        if modes.len() >= 2 {
            ops.push(GateOp::Ghz { modes: modes.clone(), theta: FRAC_PI_2 });
        }
        for op in &ops {
            self.calibrate_gate(op)?;
        }
        Ok(())
    }

    /// Re-run every gate-level calibration starting from the stored values.
    pub fn recalibrated(&self) -> Result<Compiler> {
        let mut c = self.clone();
        let keys: Vec<GateKey> = self.cal.gates.iter().map(|g| g.key.clone()).collect();
        for k in keys {
            let op = match k {
                GateKey::SingleMode(m) => GateOp::SingleMode { mode: m, theta: FRAC_PI_2, phi: 0.0 },
                GateKey::Cz(j, k) => GateOp::Cz { control: j, target: k },
                GateKey::Cx(j, k) => GateOp::Cx { control: j, target: k },
                GateKey::Cy(j, k) => GateOp::Cy { control: j, target: k },
                GateKey::Swap(a, b) => GateOp::Swap { a, b },
                GateKey::Ghz(modes) => GateOp::Ghz { modes, theta: FRAC_PI_2 },
            };
            c.calibrate_gate(&op)?;
        }
        Ok(c)
    }
}
