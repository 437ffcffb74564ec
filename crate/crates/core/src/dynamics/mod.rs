//! Time evolution under a pulse schedule.
//!
//! The integrator works in the interaction picture of the bare diagonal
//! Hamiltonian at the idle bias. Flux modulation only shifts the transmon
//! frequency, so it enters through the accumulated phase
//! `Phi(t) = int_0^t (nu_q(s) - nu_q0) ds`: each coupling term carries
//! `exp(i 2 pi (f t + dn Phi))` with `f` its bare energy difference and `dn`
//! its change in transmon excitation. Steps are fixed-size RK4, split at
//! pulse edges, frame updates and requested sample times.
//!
//! States are reported either in the lab frame (bare basis) or in the
//! rotating frame: dressed eigenbasis of the static Hamiltonian, rotating at
//! additive reference energies (transmon level energy plus single-photon
//! mode energies), so nonadditive dispersive phases stay visible.

mod chevron;
mod model;

pub use chevron::{chevron_scan, resonant_exchange, ChevronMap, ExchangeFit};
pub use model::{ModelOptions, SystemModel};

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::hilbert::{CMat, CVec, QuantumState};
use crate::numerics::gauss4;
use crate::pulses::{ChargePulse, FluxPulse, FrameTarget, Pulse, PulseSequence};
use model::Dissipator;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Frame {
    /// Bare basis, lab frame.
    Lab,
    /// Dressed basis rotating at the static reference energies.
    Rotating,
}

/// A population to record along a trajectory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Observable {
    /// Transmon in the given level.
    Transmon(usize),
    /// Device mode holding the given number of photons.
    Mode { mode: usize, photons: usize },
    /// One basis state, levels `[transmon, modes...]`.
    Basis(Vec<usize>),
}

impl Observable {
    pub fn label(&self) -> String {
        match self {
            Observable::Transmon(l) => match l {
                0 => "P_g".into(),
                1 => "P_e".into(),
                2 => "P_f".into(),
                _ => format!("P_q{l}"),
            },
            Observable::Mode { mode, photons } => format!("P_m{mode}_{photons}"),
            Observable::Basis(lv) => {
                let s: Vec<String> = lv.iter().map(|l| l.to_string()).collect();
                format!("P_{}", s.join(""))
            }
        }
    }

    fn weights(&self, model: &SystemModel) -> Result<Vec<usize>> {
        let n = model.dim();
        Ok(match self {
            Observable::Transmon(l) => (0..n).filter(|&j| model.levels(j)[0] == *l).collect(),
            Observable::Mode { mode, photons } => {
                let s = model.subsystem(*mode)?;
                (0..n).filter(|&j| model.levels(j)[s] == *photons).collect()
            }
            Observable::Basis(lv) => vec![model.index_of(lv)?],
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolveOptions {
    /// Largest step (ns).
    pub dt: f64,
    pub frame: Frame,
    pub lindblad: bool,
    /// Sample every this many steps (0: only the first and last instant).
    pub record_stride: usize,
    /// Extra sample times (ns). The run extends to the latest one.
    pub record_times: Vec<f64>,
    /// Keep the full state at every sample.
    pub keep_states: bool,
    /// Populations to record; empty means every transmon level and the
    /// one-photon population of each simulated mode.
    pub observables: Vec<Observable>,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        EvolveOptions {
            dt: 0.01,
            frame: Frame::Rotating,
            lindblad: false,
            record_stride: 0,
            record_times: Vec::new(),
            keep_states: false,
            observables: Vec::new(),
        }
    }
}

impl EvolveOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::validation("dt", "must be positive and finite"));
        }
        if self.record_times.iter().any(|t| !(*t >= 0.0 && t.is_finite())) {
            return Err(Error::validation("record_times", "must be finite and >= 0"));
        }
        Ok(())
    }
}

/// State data in the retained basis of a [`SystemModel`].
#[derive(Debug, Clone, PartialEq)]
pub enum ReducedState {
    Pure(CVec),
    Mixed(CMat),
}

impl ReducedState {
    pub fn populations(&self) -> Vec<f64> {
        match self {
            ReducedState::Pure(v) => v.iter().map(|z| z.norm_sqr()).collect(),
            ReducedState::Mixed(m) => (0..m.nrows()).map(|i| m[(i, i)].re).collect(),
        }
    }

    pub fn to_density(&self) -> CMat {
        match self {
            ReducedState::Pure(v) => v * v.adjoint(),
            ReducedState::Mixed(m) => m.clone(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub labels: Vec<String>,
    /// `populations[i][j]`: observable `j` at `times[i]`.
    pub populations: Vec<Vec<f64>>,
    pub states: Vec<QuantumState>,
    pub final_state: QuantumState,
}

impl Trajectory {
    pub fn column(&self, label: &str) -> Option<Vec<f64>> {
        let j = self.labels.iter().position(|l| l == label)?;
        Some(self.populations.iter().map(|row| row[j]).collect())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("time_ns");
        for l in &self.labels {
            out.push(',');
            out.push_str(l);
        }
        out.push('\n');
        for (t, row) in self.times.iter().zip(&self.populations) {
            out.push_str(&format!("{t}"));
            for p in row {
                out.push_str(&format!(",{p}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Evolve `state` (full layout of `model`, given in `opts.frame`) through `seq`.
pub fn evolve(model: &SystemModel, state: &QuantumState, seq: &PulseSequence, opts: &EvolveOptions) -> Result<Trajectory> {
    let observables = if opts.observables.is_empty() { default_observables(model) } else { opts.observables.clone() };
    let weights = observables.iter().map(|o| o.weights(model)).collect::<Result<Vec<_>>>()?;
    let mut init = model.reduce(state)?;
    if opts.lindblad {
        if let ReducedState::Pure(v) = &init {
            init = ReducedState::Mixed(v * v.adjoint());
        }
    }
    let mut times = Vec::new();
    let mut populations = Vec::new();
    let mut states = Vec::new();
    let last = evolve_reduced(model, seq, init, opts, |t, s| {
        let p = s.populations();
        times.push(t);
        populations.push(weights.iter().map(|w| w.iter().map(|&j| p[j]).sum()).collect());
        if opts.keep_states {
            states.push(model.expand(s));
        }
    })?;
    Ok(Trajectory {
        times,
        labels: observables.iter().map(Observable::label).collect(),
        populations,
        states,
        final_state: model.expand(&last),
    })
}

fn default_observables(model: &SystemModel) -> Vec<Observable> {
    let mut v: Vec<Observable> = (0..model.layout().dims()[0]).map(Observable::Transmon).collect();
    v.extend(model.modes().iter().map(|&mode| Observable::Mode { mode, photons: 1 }));
    v
}

/// Final states for a batch of pure inputs (retained basis, `opts.frame`), in parallel.
pub fn evolve_batch(model: &SystemModel, seq: &PulseSequence, inputs: &[CVec], opts: &EvolveOptions) -> Result<Vec<CVec>> {
    use rayon::prelude::*;
    let mut o = opts.clone();
    o.lindblad = false;
    inputs
        .par_iter()
        .map(|v| match evolve_reduced(model, seq, ReducedState::Pure(v.clone()), &o, |_, _| {})? {
            ReducedState::Pure(v) => Ok(v),
            ReducedState::Mixed(_) => unreachable!(),
        })
        .collect()
}

/// Core driver. `sample` receives each recorded instant in the reporting frame.
pub fn evolve_reduced(
    model: &SystemModel,
    seq: &PulseSequence,
    init: ReducedState,
    opts: &EvolveOptions,
    mut sample: impl FnMut(f64, &ReducedState),
) -> Result<ReducedState> {
    opts.validate()?;
    let n = model.dim();
    let kappa = model.device().transmon.dc_shift_coeff;
    match &init {
        ReducedState::Pure(v) if v.len() == n => {}
        ReducedState::Mixed(m) if m.nrows() == n && m.ncols() == n => {}
        _ => return Err(Error::Layout(format!("initial state must have dimension {n}"))),
    }
    if opts.lindblad && matches!(init, ReducedState::Pure(_)) {
        return Err(Error::validation("lindblad", "Lindblad evolution needs a density-matrix input"));
    }
    for s in seq.items() {
        if let Pulse::VirtualZ(z) = &s.pulse {
            if let FrameTarget::Mode(m) = z.target {
                model.subsystem(m)?;
            }
        }
    }

    let end = seq.duration().max(opts.record_times.iter().cloned().fold(0.0, f64::max));
    let mut cuts = vec![0.0, end];
    for s in seq.items() {
        cuts.push(s.start);
        cuts.push(s.end());
    }
    cuts.extend(opts.record_times.iter().cloned());
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
    let mut record_at = opts.record_times.clone();
    record_at.sort_by(f64::total_cmp);
    let mut next_record = 0;

    let dissipator = if opts.lindblad { Some(model.dissipator()) } else { None };
    let mut y = to_interaction(model, opts.frame, &init);
    let mut phi = 0.0;
    let mut t = 0.0;
    let mut steps = 0usize;
    let mut last_sample = f64::NEG_INFINITY;
    let mut emit = |t: f64, phi: f64, y: &Work, last: &mut f64| {
        if (t - *last).abs() > 1e-9 {
            sample(t, &from_interaction(model, opts.frame, y, t, phi));
            *last = t;
        }
    };

    let mut work = Scratch::new(y.len());
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        apply_frame_updates(model, seq, a, phi, &mut y);
        if steps == 0 && t == 0.0 {
            emit(0.0, phi, &y, &mut last_sample);
        }
        while next_record < record_at.len() && record_at[next_record] <= a + 1e-9 {
            emit(a, phi, &y, &mut last_sample);
            next_record += 1;
        }
        if b - a < 1e-12 {
            continue;
        }
        let seg = Segment::new(model, seq, a, b, kappa);
        let m = ((b - a) / opts.dt - 1e-9).ceil().max(1.0) as usize;
        let h = (b - a) / m as f64;
        for i in 0..m {
            let t0 = a + i as f64 * h;
            let phi_mid = phi + seg.phase_advance(t0, t0 + 0.5 * h);
            let phi_end = phi_mid + seg.phase_advance(t0 + 0.5 * h, t0 + h);
            seg.rk4(&mut y, t0, h, [phi, phi_mid, phi_end], dissipator.as_ref(), &mut work);
            phi = phi_end;
            t = t0 + h;
            steps += 1;
            if opts.record_stride > 0 && steps % opts.record_stride == 0 {
                emit(t, phi, &y, &mut last_sample);
            }
        }
        t = b;
    }
    apply_frame_updates(model, seq, end, phi, &mut y);
    while next_record < record_at.len() {
        emit(end, phi, &y, &mut last_sample);
        next_record += 1;
    }
    emit(end, phi, &y, &mut last_sample);
    if !y.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        return Err(Error::Integration(format!("state diverged; reduce dt (now {})", opts.dt)));
    }
    Ok(from_interaction(model, opts.frame, &y, end, phi))
}

/// Interaction-picture data: a vector (pure) or row-major matrix (mixed).
#[derive(Debug, Clone)]
enum Work {
    Pure(Vec<C64>),
    Mixed(Vec<C64>, usize),
}

impl Work {
    fn len(&self) -> usize {
        match self {
            Work::Pure(v) => v.len(),
            Work::Mixed(v, _) => v.len(),
        }
    }

    fn iter(&self) -> std::slice::Iter<'_, C64> {
        match self {
            Work::Pure(v) => v.iter(),
            Work::Mixed(v, _) => v.iter(),
        }
    }

    fn data_mut(&mut self) -> &mut Vec<C64> {
        match self {
            Work::Pure(v) => v,
            Work::Mixed(v, _) => v,
        }
    }
}

/// Lab-frame phase `exp(-i 2 pi (E_j t + n_j Phi))` of bare state `j`.
fn lab_phases(model: &SystemModel, t: f64, phi: f64) -> Vec<C64> {
    model
        .bare_energies()
        .iter()
        .enumerate()
        .map(|(j, e)| C64::from_polar(1.0, -2.0 * PI * (e * t + model.levels(j)[0] as f64 * phi)))
        .collect()
}

fn to_lab(model: &SystemModel, frame: Frame, s: &ReducedState) -> ReducedState {
    match frame {
        Frame::Lab => s.clone(),
        Frame::Rotating => {
            // the rotating and interaction frames agree at t = 0
            let v = model.dressed_basis();
            match s {
                ReducedState::Pure(d) => ReducedState::Pure(v * d),
                ReducedState::Mixed(r) => ReducedState::Mixed(v * r * v.adjoint()),
            }
        }
    }
}

fn to_interaction(model: &SystemModel, frame: Frame, s: &ReducedState) -> Work {
    match to_lab(model, frame, s) {
        ReducedState::Pure(v) => Work::Pure(v.iter().cloned().collect()),
        ReducedState::Mixed(m) => {
            let n = m.nrows();
            Work::Mixed(m.transpose().iter().cloned().collect(), n)
        }
    }
}

fn lab_state(model: &SystemModel, y: &Work, t: f64, phi: f64) -> ReducedState {
    let ph = lab_phases(model, t, phi);
    match y {
        Work::Pure(v) => ReducedState::Pure(CVec::from_iterator(v.len(), v.iter().zip(&ph).map(|(a, p)| a * p))),
        Work::Mixed(v, n) => {
            let n = *n;
            ReducedState::Mixed(CMat::from_fn(n, n, |i, j| v[i * n + j] * ph[i] * ph[j].conj()))
        }
    }
}

fn from_interaction(model: &SystemModel, frame: Frame, y: &Work, t: f64, phi: f64) -> ReducedState {
    let lab = lab_state(model, y, t, phi);
    match frame {
        Frame::Lab => lab,
        Frame::Rotating => {
            let v = model.dressed_basis();
            let rot: Vec<C64> = model.frame_energies().iter().map(|e| C64::from_polar(1.0, 2.0 * PI * e * t)).collect();
            match lab {
                ReducedState::Pure(p) => {
                    let mut d = v.adjoint() * p;
                    for (z, r) in d.iter_mut().zip(&rot) {
                        *z *= r;
                    }
                    ReducedState::Pure(d)
                }
                ReducedState::Mixed(m) => {
                    let mut d = v.adjoint() * m * v;
                    let n = d.nrows();
                    for i in 0..n {
                        for j in 0..n {
                            d[(i, j)] *= rot[i] * rot[j].conj();
                        }
                    }
                    ReducedState::Mixed(d)
                }
            }
        }
    }
}

/// Apply every frame update scheduled at time `t`: a phase diagonal in the
/// dressed basis, i.e. `V D V^dag` in the bare basis (commutes with the
/// bare-diagonal frame change only through `V`, so it is applied in the lab frame).
fn apply_frame_updates(model: &SystemModel, seq: &PulseSequence, t: f64, phi: f64, y: &mut Work) {
    let n = model.dim();
    let mut diag = vec![C64::new(1.0, 0.0); n];
    let mut any = false;
    for s in seq.items() {
        if let Pulse::VirtualZ(z) = &s.pulse {
            if (s.start - t).abs() < 1e-9 {
                any = true;
                for (j, d) in diag.iter_mut().enumerate() {
                    let lv = model.levels(j);
                    let k = match z.target {
                        FrameTarget::TransmonLevel(l) => (lv[0] == l) as usize as f64,
                        FrameTarget::Mode(m) => lv[model.subsystem(m).unwrap_or(0)] as f64,
                    };
                    *d *= C64::from_polar(1.0, z.angle * k);
                }
            }
        }
    }
    if !any {
        return;
    }
    let v = model.dressed_basis();
    let dm = CMat::from_diagonal(&CVec::from_vec(diag));
    let u = v * dm * v.adjoint();
    let ph = lab_phases(model, t, phi);
    // interaction-picture operator: P^dag U P with P the lab phases
    let ui = CMat::from_fn(n, n, |i, j| ph[i].conj() * u[(i, j)] * ph[j]);
    match y {
        Work::Pure(v) => {
            let x = CVec::from_column_slice(v);
            let r = ui * x;
            v.copy_from_slice(r.as_slice());
        }
        Work::Mixed(v, n) => {
            let n = *n;
            let m = CMat::from_row_slice(n, n, v);
            let r = &ui * m * ui.adjoint();
            for i in 0..n {
                for j in 0..n {
                    v[i * n + j] = r[(i, j)];
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Term {
    r: usize,
    c: usize,
    /// `-2 pi i` times the matrix element without envelope.
    amp: C64,
    key: usize,
    /// 0: static; `p + 1`: envelope of active charge pulse `p`.
    mult: usize,
}

struct Segment<'a> {
    terms: Vec<Term>,
    keys: Vec<(f64, f64)>,
    charges: Vec<(f64, &'a ChargePulse)>,
    fluxes: Vec<(f64, &'a FluxPulse)>,
    kappa: f64,
}

struct Scratch {
    k1: Vec<C64>,
    k2: Vec<C64>,
    k3: Vec<C64>,
    k4: Vec<C64>,
    tmp: Vec<C64>,
    coef: Vec<C64>,
    phase: Vec<C64>,
    mult: Vec<f64>,
}

impl Scratch {
    fn new(len: usize) -> Self {
        let z = vec![C64::new(0.0, 0.0); len];
        Scratch {
            k1: z.clone(),
            k2: z.clone(),
            k3: z.clone(),
            k4: z.clone(),
            tmp: z,
            coef: Vec::new(),
            phase: Vec::new(),
            mult: Vec::new(),
        }
    }
}

impl<'a> Segment<'a> {
    fn new(model: &SystemModel, seq: &'a PulseSequence, a: f64, b: f64, kappa: f64) -> Self {
        let inside = |start: f64, end: f64| start <= a + 1e-9 && end >= b - 1e-9;
        let charges: Vec<(f64, &ChargePulse)> =
            seq.charge_pulses().filter(|(s, c)| inside(*s, s + c.envelope.duration)).collect();
        let fluxes: Vec<(f64, &FluxPulse)> =
            seq.flux_pulses().filter(|(s, f)| inside(*s, s + f.envelope.duration)).collect();
        let mut keys: Vec<(f64, f64)> = Vec::new();
        let mut key_of = |f: f64, dn: f64| {
            if let Some(i) = keys.iter().position(|k| k.0 == f && k.1 == dn) {
                i
            } else {
                keys.push((f, dn));
                keys.len() - 1
            }
        };
        let neg_2pi_i = C64::new(0.0, -2.0 * PI);
        let mut terms = Vec::new();
        for t in model.static_terms() {
            terms.push(Term { r: t.r, c: t.c, amp: neg_2pi_i * t.amp, key: key_of(t.freq, t.dn as f64), mult: 0 });
        }
        let energy = model.bare_energies();
        let nq = model.layout().dims()[0];
        for (p, (start, cp)) in charges.iter().enumerate() {
            let m = cp.transition.matrix_element();
            for c in 0..model.dim() {
                let lv = model.levels(c);
                let l = lv[0];
                if l + 1 >= nq {
                    continue;
                }
                let mut up = lv.to_vec();
                up[0] = l + 1;
                let Ok(r) = model.index_of(&up) else { continue };
                let el = C64::from_polar(
                    cp.rabi * ((l + 1) as f64).sqrt() / (2.0 * m),
                    cp.phase + 2.0 * PI * cp.detuning * start,
                );
                let f = energy[r] - energy[c] - cp.freq - cp.detuning;
                terms.push(Term { r, c, amp: neg_2pi_i * el, key: key_of(f, 1.0), mult: p + 1 });
                terms.push(Term { r: c, c: r, amp: neg_2pi_i * el.conj(), key: key_of(-f, -1.0), mult: p + 1 });
            }
        }
        Segment { terms, keys, charges, fluxes, kappa }
    }

    fn delta_nu(&self, t: f64) -> f64 {
        self.fluxes.iter().map(|(s, f)| f.deviation(t - s, *s, self.kappa)).sum()
    }

    fn phase_advance(&self, a: f64, b: f64) -> f64 {
        if self.fluxes.is_empty() {
            return 0.0;
        }
        let m = 0.5 * (a + b);
        gauss4(|t| self.delta_nu(t), a, m) + gauss4(|t| self.delta_nu(t), m, b)
    }

    fn coefficients(&self, t: f64, phi: f64, phase: &mut Vec<C64>, mult: &mut Vec<f64>, coef: &mut Vec<C64>) {
        phase.clear();
        for &(f, dn) in &self.keys {
            phase.push(C64::from_polar(1.0, 2.0 * PI * (f * t + dn * phi)));
        }
        mult.clear();
        mult.push(1.0);
        for (start, c) in &self.charges {
            mult.push(c.envelope.value(t - start));
        }
        coef.clear();
        for term in &self.terms {
            coef.push(term.amp * phase[term.key] * mult[term.mult]);
        }
    }

    fn rhs(&self, coef: &[C64], y: &[C64], n_mixed: Option<usize>, diss: Option<&Dissipator>, out: &mut [C64]) {
        out.fill(C64::new(0.0, 0.0));
        match n_mixed {
            None => {
                for (term, &h) in self.terms.iter().zip(coef) {
                    out[term.r] += h * y[term.c];
                }
            }
            Some(n) => {
                for (term, &h) in self.terms.iter().zip(coef) {
                    let (r, c) = (term.r, term.c);
                    // H rho
                    for j in 0..n {
                        out[r * n + j] += h * y[c * n + j];
                    }
                    // - rho H
                    for i in 0..n {
                        out[i * n + c] -= h * y[i * n + r];
                    }
                }
                if let Some(d) = diss {
                    for (o, (yy, g)) in out.iter_mut().zip(y.iter().zip(&d.damping)) {
                        *o -= yy * g;
                    }
                    for jump in &d.jumps {
                        for &(r1, c1, v1) in &jump.entries {
                            for &(r2, c2, v2) in &jump.entries {
                                out[r1 * n + r2] += y[c1 * n + c2] * (v1 * v2);
                            }
                        }
                    }
                }
            }
        }
    }

    fn rk4(&self, y: &mut Work, t: f64, h: f64, phis: [f64; 3], diss: Option<&Dissipator>, s: &mut Scratch) {
        let n_mixed = match y {
            Work::Pure(_) => None,
            Work::Mixed(_, n) => Some(*n),
        };
        let y = y.data_mut();
        let Scratch { k1, k2, k3, k4, tmp, coef, phase, mult } = s;
        self.coefficients(t, phis[0], phase, mult, coef);
        self.rhs(coef, y, n_mixed, diss, k1);
        self.coefficients(t + 0.5 * h, phis[1], phase, mult, coef);
        for i in 0..y.len() {
            tmp[i] = y[i] + k1[i] * (0.5 * h);
        }
        self.rhs(coef, tmp, n_mixed, diss, k2);
        for i in 0..y.len() {
            tmp[i] = y[i] + k2[i] * (0.5 * h);
        }
        self.rhs(coef, tmp, n_mixed, diss, k3);
        self.coefficients(t + h, phis[2], phase, mult, coef);
        for i in 0..y.len() {
            tmp[i] = y[i] + k3[i] * h;
        }
        self.rhs(coef, tmp, n_mixed, diss, k4);
        let w = h / 6.0;
        for i in 0..y.len() {
            y[i] += (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * w;
        }
    }
}
