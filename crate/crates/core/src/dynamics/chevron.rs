use rayon::prelude::*;

use super::{evolve_reduced, EvolveOptions, Frame, ReducedState, SystemModel};
use crate::error::{Error, Result};
use crate::hilbert::CVec;
use crate::pulses::{Envelope, FluxPulse, Pulse, PulseSequence};

/// Transmon `P_e` after a square flux pulse, for each sideband frequency
/// (rows) and pulse length (columns).
#[derive(Debug, Clone, PartialEq)]
pub struct ChevronMap {
    pub eps: f64,
    pub nu_sb: Vec<f64>,
    pub durations: Vec<f64>,
    pub p_e: Vec<Vec<f64>>,
}

impl ChevronMap {
    /// Long format: `nu_sb_GHz,duration_ns,P_e`, rows in grid order.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("nu_sb_GHz,duration_ns,P_e\n");
        for (nu, row) in self.nu_sb.iter().zip(&self.p_e) {
            for (t, p) in self.durations.iter().zip(row) {
                out.push_str(&format!("{nu},{t},{p}\n"));
            }
        }
        out
    }
}

/// Starts from the transmon in `|e>` with empty modes (ideal preparation).
/// A square pulse cut at time `t` leaves the state reached at `t`, so each
/// row is one trajectory sampled at every duration.
pub fn chevron_scan(model: &SystemModel, nu_grid: &[f64], durations: &[f64], eps: f64, opts: &EvolveOptions) -> Result<ChevronMap> {
    if nu_grid.is_empty() || durations.is_empty() {
        return Err(Error::validation("grid", "frequency and duration grids must be nonempty"));
    }
    if durations.iter().any(|t| !(*t >= 0.0)) {
        return Err(Error::validation("durations", "must be >= 0"));
    }
    let t_max = durations.iter().cloned().fold(0.0, f64::max);
    let n_sub = model.layout().n_subsystems();
    let mut lv = vec![0; n_sub];
    lv[0] = 1;
    let start = model.index_of(&lv)?;
    let mut o = opts.clone();
    o.frame = Frame::Rotating;
    o.lindblad = false;
    o.record_stride = 0;
    o.record_times = durations.to_vec();
    let excited: Vec<usize> = (0..model.dim()).filter(|&j| model.levels(j)[0] == 1).collect();

    let rows = nu_grid
        .par_iter()
        .map(|&nu| -> Result<Vec<f64>> {
            let mut seq = PulseSequence::new();
            if t_max > 0.0 {
                seq.append(Pulse::Flux(FluxPulse::new(nu, eps, 0.0, Envelope::square(t_max))), 0.0)?;
            }
            let mut init = CVec::zeros(model.dim());
            init[start] = 1.0.into();
            let mut samples: Vec<(f64, f64)> = Vec::new();
            evolve_reduced(model, &seq, ReducedState::Pure(init), &o, |t, s| {
                let p = s.populations();
                samples.push((t, excited.iter().map(|&j| p[j]).sum()));
            })?;
            durations
                .iter()
                .map(|d| {
                    samples
                        .iter()
                        .find(|(t, _)| (t - d).abs() < 1e-9)
                        .map(|s| s.1)
                        .ok_or_else(|| Error::Integration(format!("no sample at {d} ns")))
                })
                .collect()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ChevronMap { eps, nu_sb: nu_grid.to_vec(), durations: durations.to_vec(), p_e: rows })
}

/// Exchange rate measured at the center of a chevron.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct ExchangeFit {
    pub mode: usize,
    pub eps: f64,
    /// Sideband frequency of fastest full transfer (GHz).
    pub nu_sb: f64,
    /// Oscillation frequency of `P_e` (GHz), i.e. twice the exchange rate.
    pub frequency: f64,
    /// `2 g_k J1(eps / 2 nu_sb)`.
    pub predicted: f64,
}

impl ExchangeFit {
    pub fn modulation_index(&self) -> f64 {
        self.eps / (2.0 * self.nu_sb)
    }

    pub fn relative_error(&self) -> f64 {
        (self.frequency / self.predicted - 1.0).abs()
    }
}

/// Locate the g-e resonance of `mode` at amplitude `eps` (the frequency
/// minimizing `P_e` at the predicted half-exchange time) and fit the
/// oscillation frequency of `P_e` over about three periods there.
pub fn resonant_exchange(model: &SystemModel, mode: usize, eps: f64, opts: &EvolveOptions) -> Result<ExchangeFit> {
    let dev = model.device();
    let n_sub = model.layout().n_subsystems();
    let mut e0 = vec![0; n_sub];
    e0[0] = 1;
    let mut g1 = vec![0; n_sub];
    g1[model.subsystem(mode)?] = 1;
    let nu0 = model.dressed_energy(&g1)? - model.dressed_energy(&e0)?;
    if !(nu0 > 0.0) || !(eps > 0.0) {
        return Err(Error::validation("eps", "needs a positive amplitude and a mode above the transmon"));
    }
    let predict = |nu: f64| -> Result<f64> { Ok(2.0 * dev.spectrum.g(mode) * crate::effective::bessel_j1(eps / (2.0 * nu))?) };
    let rate = predict(nu0)?;
    if !(rate > 0.0) {
        return Err(Error::validation("eps", "modulation index at a zero of J1"));
    }
    let half = 1.0 / (2.0 * rate);
    let p_e = |nu: f64, times: &[f64]| chevron_scan(model, &[nu], times, eps, opts).map(|m| m.p_e[0].clone());
    let (nu_sb, _) = crate::numerics::golden_max(
        |nu| p_e(nu, &[half]).map(|v| -v[0]).unwrap_or(f64::NEG_INFINITY),
        nu0 - 1.5 * rate,
        nu0 + 1.5 * rate,
        1e-4 * rate,
    );
    let n = 240;
    let dt = 3.0 / rate / n as f64;
    let times: Vec<f64> = (0..n).map(|i| i as f64 * dt).collect();
    let y = p_e(nu_sb, &times)?;
    let frequency = crate::numerics::dominant_frequency(&y, dt, 3.0 * rate)?;
    Ok(ExchangeFit { mode, eps, nu_sb, frequency, predicted: predict(nu_sb)? })
}
