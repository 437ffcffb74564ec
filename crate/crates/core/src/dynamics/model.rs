//! The simulated subsystem: transmon plus a chosen subset of modes, its bare
//! and dressed spectra, and the sparse static couplings.

use num_complex::Complex64 as C64;

use crate::device::DeviceModel;
use crate::error::{Error, Result};
use crate::hilbert::{linalg, CMat, Coupling, QuantumState, SpaceLayout, StateRepr};

/// Largest basis for which the dressed frame is diagonalized densely.
const MAX_DRESSED_DIM: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct RawTerm {
    pub r: usize,
    pub c: usize,
    pub amp: C64,
    /// `E_r - E_c` (GHz) of the bare levels.
    pub freq: f64,
    /// Change in transmon excitation from `c` to `r`.
    pub dn: i8,
}

/// Jump operator with real entries `(row, col, value)`.
#[derive(Debug, Clone)]
pub(crate) struct Jump {
    pub entries: Vec<(usize, usize, f64)>,
}

#[derive(Debug, Clone)]
pub(crate) struct Dissipator {
    pub jumps: Vec<Jump>,
    /// Row-major `n x n` damping of coherences: `(K_i + K_j)/2 + sum gphi (n_i - n_j)^2`.
    pub damping: Vec<f64>,
}

/// Truncation and coupling choices for a [`SystemModel`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelOptions {
    pub coupling: Coupling,
    /// Keep only basis states with total excitation `<= cap`.
    pub cap: Option<usize>,
    /// Fock levels per mode; defaults to the device setting.
    pub mode_levels: Option<usize>,
    /// Transmon levels; defaults to the device setting.
    pub transmon_levels: Option<usize>,
}

impl Default for ModelOptions {
    fn default() -> Self {
        ModelOptions { coupling: Coupling::Rwa, cap: None, mode_levels: None, transmon_levels: None }
    }
}

impl ModelOptions {
    pub fn capped(cap: usize) -> Self {
        ModelOptions { cap: Some(cap), ..Self::default() }
    }

    pub fn with_mode_levels(mut self, levels: usize) -> Self {
        self.mode_levels = Some(levels);
        self
    }

    pub fn with_transmon_levels(mut self, levels: usize) -> Self {
        self.transmon_levels = Some(levels);
        self
    }

    /// Truncation used for pulse-level gate simulation: four transmon levels
    /// and three mode levels, enough to dress every state a compiled gate
    /// visits so that dispersive shifts come out right.
    pub fn gate_level() -> Self {
        Self::default().with_transmon_levels(4).with_mode_levels(3)
    }
}

/// Transmon and modes in a truncated (optionally excitation-capped) basis.
#[derive(Debug, Clone)]
pub struct SystemModel {
    device: DeviceModel,
    modes: Vec<usize>,
    layout: SpaceLayout,
    coupling: Coupling,
    cap: Option<usize>,
    basis: Vec<usize>,
    lookup: Vec<usize>,
    levels: Vec<Vec<usize>>,
    energy: Vec<f64>,
    dressed: CMat,
    dressed_energy: Vec<f64>,
    e_ref: Vec<f64>,
    static_terms: Vec<RawTerm>,
}

impl SystemModel {
    /// `modes` are device mode numbers (1-based) in subsystem order.
    pub fn new(device: &DeviceModel, modes: &[usize], opts: ModelOptions) -> Result<Self> {
        let ModelOptions { coupling, cap, mode_levels, transmon_levels } = opts;
        let mode_levels = mode_levels.unwrap_or(device.mode_levels);
        if mode_levels < 2 {
            return Err(Error::validation("mode_levels", "must be >= 2"));
        }
        let q_levels = transmon_levels.unwrap_or(device.transmon.n_levels);
        if q_levels < 3 {
            return Err(Error::validation("transmon_levels", "must be >= 3"));
        }
        for (i, &k) in modes.iter().enumerate() {
            if k < 1 || k > device.n_modes() {
                return Err(Error::validation("modes", format!("mode {k} outside 1..={}", device.n_modes())));
            }
            if modes[..i].contains(&k) {
                return Err(Error::validation("modes", format!("mode {k} listed twice")));
            }
        }
        if cap == Some(0) {
            return Err(Error::validation("cap", "excitation cap must be >= 1"));
        }
        let layout = SpaceLayout::transmon_modes(q_levels, modes.len(), mode_levels);
        let total = layout.total_dim();
        let mut basis = Vec::new();
        let mut lookup = vec![usize::MAX; total];
        let mut levels = Vec::new();
        for i in 0..total {
            let lv = layout.levels(i);
            if cap.map_or(true, |c| lv.iter().sum::<usize>() <= c) {
                lookup[i] = basis.len();
                basis.push(i);
                levels.push(lv);
            }
        }
        let n = basis.len();
        if n > MAX_DRESSED_DIM {
            return Err(Error::validation(
                "modes",
                format!("basis of {n} states is too large; select fewer modes or set an excitation cap"),
            ));
        }
        let tp = &device.transmon;
        let energy: Vec<f64> = levels
            .iter()
            .map(|lv| {
                let q = lv[0] as f64;
                let mut e = tp.nu_q0 * q + 0.5 * tp.alpha * q * (q - 1.0);
                for (s, &k) in modes.iter().enumerate() {
                    e += device.spectrum.nu(k) * lv[s + 1] as f64;
                }
                e
            })
            .collect();

        // exchange terms between basis states, both directions
        let mut static_terms = Vec::new();
        for (c, lv) in levels.iter().enumerate() {
            let q = lv[0];
            for (s, &k) in modes.iter().enumerate() {
                let g = device.spectrum.g(k);
                let m = lv[s + 1];
                let mut push = |dq: i64, dm: i64| {
                    let nq = q as i64 + dq;
                    let nm = m as i64 + dm;
                    if nq < 0 || nm < 0 || nq as usize >= q_levels || nm as usize >= mode_levels {
                        return;
                    }
                    let mut target = lv.clone();
                    target[0] = nq as usize;
                    target[s + 1] = nm as usize;
                    let r = lookup[layout.index(&target)];
                    if r == usize::MAX {
                        return;
                    }
                    let fq = if dq > 0 { (q + 1) as f64 } else { q as f64 };
                    let fm = if dm > 0 { (m + 1) as f64 } else { m as f64 };
                    static_terms.push(RawTerm {
                        r,
                        c,
                        amp: C64::new(g * (fq * fm).sqrt(), 0.0),
                        freq: energy[r] - energy[c],
                        dn: dq as i8,
                    });
                };
                push(1, -1);
                push(-1, 1);
                if coupling == Coupling::Full {
                    push(1, 1);
                    push(-1, -1);
                }
            }
        }

        let mut h = CMat::zeros(n, n);
        for i in 0..n {
            h[(i, i)] = C64::new(energy[i], 0.0);
        }
        for t in &static_terms {
            h[(t.r, t.c)] += t.amp;
        }
        let (vals, vecs) = linalg::eigh(&h);
        let (dressed, dressed_energy) = match_labels(&vals, &vecs);

        let mut model = SystemModel {
            device: device.clone(),
            modes: modes.to_vec(),
            layout,
            coupling,
            cap,
            basis,
            lookup,
            levels,
            energy,
            dressed,
            dressed_energy,
            e_ref: Vec::new(),
            static_terms,
        };
        model.e_ref = model.reference_energies()?;
        Ok(model)
    }

    /// Additive frame energies: transmon level energy plus single-photon
    /// energies of each mode, all dressed.
    fn reference_energies(&self) -> Result<Vec<f64>> {
        let nsub = self.layout.n_subsystems();
        let mut ground = vec![0; nsub];
        let e_g = self.dressed_energy[self.index_of(&ground)?];
        let mut photon = Vec::new();
        for s in 1..nsub {
            ground[s] = 1;
            photon.push(self.dressed_energy[self.index_of(&ground)?] - e_g);
            ground[s] = 0;
        }
        let mut e_q = Vec::new();
        for q in 0..self.layout.dims()[0] {
            ground[0] = q;
            e_q.push(self.index_of(&ground).ok().map(|j| self.dressed_energy[j]));
        }
        Ok(self
            .levels
            .iter()
            .map(|lv| {
                let base = e_q[lv[0]].unwrap_or(0.0);
                base + lv[1..].iter().zip(&photon).map(|(&m, p)| m as f64 * p).sum::<f64>()
            })
            .collect())
    }

    pub fn device(&self) -> &DeviceModel {
        &self.device
    }

    pub fn modes(&self) -> &[usize] {
        &self.modes
    }

    /// Full tensor-product layout (states passed to `evolve` live here).
    pub fn layout(&self) -> &SpaceLayout {
        &self.layout
    }

    pub fn coupling(&self) -> Coupling {
        self.coupling
    }

    pub fn excitation_cap(&self) -> Option<usize> {
        self.cap
    }

    /// Number of retained basis states.
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// Levels `[transmon, mode...]` of retained state `j`.
    pub fn levels(&self, j: usize) -> &[usize] {
        &self.levels[j]
    }

    /// Subsystem index of a device mode.
    pub fn subsystem(&self, mode: usize) -> Result<usize> {
        self.modes
            .iter()
            .position(|&m| m == mode)
            .map(|i| i + 1)
            .ok_or_else(|| Error::validation("mode", format!("mode {mode} is not simulated")))
    }

    /// Retained-basis index of the state with the given levels.
    pub fn index_of(&self, levels: &[usize]) -> Result<usize> {
        if levels.len() != self.layout.n_subsystems() {
            return Err(Error::Layout(format!("expected {} levels, got {}", self.layout.n_subsystems(), levels.len())));
        }
        for (s, (&l, &d)) in levels.iter().zip(self.layout.dims()).enumerate() {
            if l >= d {
                return Err(Error::Layout(format!("level {l} exceeds dimension {d} of subsystem {s}")));
            }
        }
        match self.lookup[self.layout.index(levels)] {
            usize::MAX => Err(Error::Layout(format!("state {levels:?} is outside the excitation cap"))),
            j => Ok(j),
        }
    }

    /// Bare (uncoupled) energy of retained state `j` at the idle bias.
    pub fn bare_energy(&self, j: usize) -> f64 {
        self.energy[j]
    }

    /// Dressed energy of the eigenstate labeled by `levels`.
    pub fn dressed_energy(&self, levels: &[usize]) -> Result<f64> {
        Ok(self.dressed_energy[self.index_of(levels)?])
    }

    /// Dressed eigenvectors (columns) in the bare retained basis, column `j`
    /// labeled by bare state `j`.
    pub fn dressed_basis(&self) -> &CMat {
        &self.dressed
    }

    pub(crate) fn frame_energies(&self) -> &[f64] {
        &self.e_ref
    }

    pub(crate) fn bare_energies(&self) -> &[f64] {
        &self.energy
    }

    pub(crate) fn static_terms(&self) -> &[RawTerm] {
        &self.static_terms
    }

    /// Retained-basis amplitudes of a state on the full layout.
    pub fn reduce(&self, state: &QuantumState) -> Result<super::ReducedState> {
        if state.layout() != &self.layout {
            return Err(Error::Layout("state layout does not match the simulated subsystems".into()));
        }
        let n = self.dim();
        match state.repr() {
            StateRepr::Pure(v) => {
                let kept: f64 = self.basis.iter().map(|&i| v[i].norm_sqr()).sum();
                if (v.norm_squared() - kept).abs() > 1e-9 {
                    return Err(Error::Layout("state has weight outside the excitation-capped basis".into()));
                }
                Ok(super::ReducedState::Pure(crate::hilbert::CVec::from_iterator(
                    n,
                    self.basis.iter().map(|&i| v[i]),
                )))
            }
            StateRepr::Density(m) => {
                let kept: f64 = self.basis.iter().map(|&i| m[(i, i)].re).sum();
                if (m.trace().re - kept).abs() > 1e-9 {
                    return Err(Error::Layout("state has weight outside the excitation-capped basis".into()));
                }
                Ok(super::ReducedState::Mixed(CMat::from_fn(n, n, |a, b| m[(self.basis[a], self.basis[b])])))
            }
        }
    }

    /// Embed retained-basis data back into the full layout.
    pub fn expand(&self, state: &super::ReducedState) -> QuantumState {
        let total = self.layout.total_dim();
        match state {
            super::ReducedState::Pure(v) => {
                let mut full = crate::hilbert::CVec::zeros(total);
                for (j, &i) in self.basis.iter().enumerate() {
                    full[i] = v[j];
                }
                QuantumState::pure_unchecked(&self.layout, full)
            }
            super::ReducedState::Mixed(m) => {
                let mut full = CMat::zeros(total, total);
                for (a, &i) in self.basis.iter().enumerate() {
                    for (b, &k) in self.basis.iter().enumerate() {
                        full[(i, k)] = m[(a, b)];
                    }
                }
                QuantumState::density_unchecked(&self.layout, full)
            }
        }
    }

    /// Lindblad dissipator of the device coherences in the retained basis.
    pub(crate) fn dissipator(&self) -> Dissipator {
        let n = self.dim();
        let coh = &self.device.coherence;
        let mut jumps = Vec::new();
        let mut gphi = Vec::new();
        let mut lower = |sub: usize, g1: f64, per_level: bool| {
            if g1 <= 0.0 {
                return;
            }
            let d = self.layout.dims()[sub];
            let groups: Vec<Option<usize>> = if per_level { (1..d).map(Some).collect() } else { vec![None] };
            for only in groups {
                let mut entries = Vec::new();
                for c in 0..n {
                    let l = self.levels[c][sub];
                    if l == 0 || only.is_some_and(|o| o != l) {
                        continue;
                    }
                    let mut t = self.levels[c].clone();
                    t[sub] -= 1;
                    if let Ok(r) = self.index_of(&t) {
                        entries.push((r, c, (g1 * l as f64).sqrt()));
                    }
                }
                if !entries.is_empty() {
                    jumps.push(Jump { entries });
                }
            }
        };
        let t = coh.transmon;
        lower(0, t.gamma1(), true);
        gphi.push((0, t.gamma_phi()));
        for (s, &k) in self.modes.iter().enumerate() {
            let c = coh.mode(k);
            lower(s + 1, c.gamma1(), false);
            gphi.push((s + 1, c.gamma_phi()));
        }
        let mut k_diag = vec![0.0; n];
        for j in &jumps {
            for &(_, c, v) in &j.entries {
                k_diag[c] += v * v;
            }
        }
        let mut damping = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let mut d = 0.5 * (k_diag[i] + k_diag[j]);
                for &(s, g) in &gphi {
                    if g > 0.0 {
                        let dn = self.levels[i][s] as f64 - self.levels[j][s] as f64;
                        d += g * dn * dn;
                    }
                }
                damping[i * n + j] = d;
            }
        }
        Dissipator { jumps, damping }
    }
}

/// Assign each eigenvector to the bare state it overlaps most (greedy over
/// descending overlap) and fix its phase so that overlap is real positive.
fn match_labels(vals: &[f64], vecs: &CMat) -> (CMat, Vec<f64>) {
    let n = vals.len();
    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(n * n);
    for col in 0..n {
        for row in 0..n {
            pairs.push((vecs[(row, col)].norm_sqr(), row, col));
        }
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut label_of = vec![usize::MAX; n];
    let mut used = vec![false; n];
    let mut left = n;
    for (_, row, col) in pairs {
        if left == 0 {
            break;
        }
        if label_of[col] == usize::MAX && !used[row] {
            label_of[col] = row;
            used[row] = true;
            left -= 1;
        }
    }
    let mut out = CMat::zeros(n, n);
    let mut energy = vec![0.0; n];
    for col in 0..n {
        let row = label_of[col];
        let z = vecs[(row, col)];
        let fix = if z.norm() > 0.0 { z.conj() / z.norm() } else { C64::new(1.0, 0.0) };
        for i in 0..n {
            out[(i, row)] = vecs[(i, col)] * fix;
        }
        energy[row] = vals[col];
    }
    (out, energy)
}
