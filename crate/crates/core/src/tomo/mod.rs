//! Readout emulation, correlators, state and process tomography, and
//! randomized benchmarking.
//!
//! Everything here runs on the gate-level executors: [`Register`] for exact
//! unitary evolution and [`NoisyRegister`] for Lindblad channels. Mode qubits
//! are little-endian in the order the caller lists them, and a Pauli string
//! `"XZ"` puts `X` on the first listed mode.

mod clifford;
mod process;
mod rb;

pub use clifford::{Clifford, CliffordGroup};
pub use process::{process_tomography, ProcessMatrix, ProcessTomography};
pub use rb::{fit_decay, randomized_benchmarking, RbFit, RbResult, RbTarget};

use std::f64::consts::FRAC_PI_2;
use std::fmt;

use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::effective::{NoisyRegister, Primitive, Register};
use crate::error::{Error, Result};
use crate::gates::GateOp;
use crate::hilbert::{linalg, partial_trace, CMat, QuantumState};
use crate::pulses::Transition;

/// Anything that can run primitive lists on a register state.
pub trait Backend: Sync {
    fn register(&self) -> &Register;
    fn execute(&self, state: &QuantumState, prims: &[Primitive]) -> Result<QuantumState>;
}

impl Backend for Register {
    fn register(&self) -> &Register {
        self
    }

    fn execute(&self, state: &QuantumState, prims: &[Primitive]) -> Result<QuantumState> {
        self.run(state, prims)
    }
}

impl Backend for NoisyRegister {
    fn register(&self) -> &Register {
        &self.register
    }

    fn execute(&self, state: &QuantumState, prims: &[Primitive]) -> Result<QuantumState> {
        self.run(state, prims)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub const ALL: [Pauli; 4] = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];

    pub fn matrix(self) -> CMat {
        let (o, z, i) = (C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 1.0));
        let v = match self {
            Pauli::I => [o, z, z, o],
            Pauli::X => [z, o, o, z],
            Pauli::Y => [z, -i, i, z],
            Pauli::Z => [o, z, z, -o],
        };
        CMat::from_row_slice(2, 2, &v)
    }

    fn symbol(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }
}

/// Product of single-mode Paulis with an overall sign.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PauliString {
    pub ops: Vec<Pauli>,
    pub negative: bool,
}

impl PauliString {
    pub fn new(ops: Vec<Pauli>) -> Self {
        PauliString { ops, negative: false }
    }

    /// Parses `"XZ"`, `"-ZZI"`, `"+Y"`.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        let (negative, body) = match s.strip_prefix('-') {
            Some(r) => (true, r),
            None => (false, s.strip_prefix('+').unwrap_or(s)),
        };
        if body.is_empty() {
            return Err(Error::validation("pauli", "empty string"));
        }
        let ops = body
            .chars()
            .map(|c| match c.to_ascii_uppercase() {
                'I' => Ok(Pauli::I),
                'X' => Ok(Pauli::X),
                'Y' => Ok(Pauli::Y),
                'Z' => Ok(Pauli::Z),
                other => Err(Error::validation("pauli", format!("unknown factor '{other}'"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(PauliString { ops, negative })
    }

    /// The `index`-th string of length `m` with factor `s` = digit `s` of
    /// `index` in base 4 (I, X, Y, Z).
    pub fn from_index(index: usize, m: usize) -> Self {
        PauliString::new((0..m).map(|s| Pauli::ALL[(index >> (2 * s)) & 3]).collect())
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn is_identity(&self) -> bool {
        self.ops.iter().all(|&p| p == Pauli::I)
    }

    fn sign(&self) -> f64 {
        if self.negative {
            -1.0
        } else {
            1.0
        }
    }

    /// Dense matrix, first factor on the least significant qubit.
    pub fn matrix(&self) -> CMat {
        let mut m = CMat::identity(1, 1);
        for p in &self.ops {
            m = p.matrix().kronecker(&m);
        }
        if self.negative {
            m = -m;
        }
        m
    }

    pub fn label(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.negative {
            write!(f, "-")?;
        }
        for p in &self.ops {
            write!(f, "{}", p.symbol())?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Readout {
    /// `Tr(rho P)` on the reduced mode state.
    Direct,
    /// Transmon Ramsey with one transmon-mode controlled phase per factor,
    /// X/Y factors rotated onto Z beforehand by single-mode gates.
    Ramsey,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureOptions {
    pub readout: Readout,
    /// Binomial sampling of each expectation value; `None` is exact.
    pub shots: Option<u64>,
    pub seed: u64,
}

impl Default for MeasureOptions {
    fn default() -> Self {
        MeasureOptions { readout: Readout::Ramsey, shots: None, seed: 0 }
    }
}

impl MeasureOptions {
    pub fn direct() -> Self {
        MeasureOptions { readout: Readout::Direct, ..Default::default() }
    }
}

fn subsystems(reg: &Register, modes: &[usize]) -> Result<Vec<usize>> {
    let subs = modes.iter().map(|&m| reg.subsystem(m)).collect::<Result<Vec<_>>>()?;
    for (i, s) in subs.iter().enumerate() {
        if subs[..i].contains(s) {
            return Err(Error::Gate(format!("mode {} listed twice", modes[i])));
        }
    }
    Ok(subs)
}

/// Reduced density matrix of `modes` (qubit-encoded registers only).
pub fn mode_density(reg: &Register, state: &QuantumState, modes: &[usize]) -> Result<CMat> {
    let subs = subsystems(reg, modes)?;
    Ok(partial_trace(state, &subs)?.to_density())
}

/// Mode rotation taking `P` onto `Z`: `U^dag Z U = P`.
fn basis_change(p: Pauli) -> Option<(f64, f64)> {
    match p {
        Pauli::X => Some((FRAC_PI_2, -FRAC_PI_2)),
        Pauli::Y => Some((FRAC_PI_2, 0.0)),
        _ => None,
    }
}

/// Primitive sequence whose transmon `2 P_g - 1` equals `<P>` (unsigned).
pub fn ramsey_sequence(pauli: &PauliString, modes: &[usize]) -> Result<Vec<Primitive>> {
    if pauli.len() != modes.len() {
        return Err(Error::validation("pauli", format!("{} factors for {} modes", pauli.len(), modes.len())));
    }
    let mut prims = Vec::new();
    for (&p, &m) in pauli.ops.iter().zip(modes) {
        if let Some((theta, phi)) = basis_change(p) {
            prims.extend(GateOp::SingleMode { mode: m, theta, phi }.primitives());
        }
    }
    prims.push(Primitive::rot(Transition::Ge, FRAC_PI_2, FRAC_PI_2));
    for (&p, &m) in pauli.ops.iter().zip(modes) {
        if p != Pauli::I {
            // |e1> -> |f0> -> -|e1>
            prims.push(Primitive::swap(m, Transition::Ef, 0.0));
            prims.push(Primitive::swap(m, Transition::Ef, 0.0));
        }
    }
    prims.push(Primitive::rot(Transition::Ge, FRAC_PI_2, -FRAC_PI_2));
    Ok(prims)
}

/// Turns an exact expectation into a sampled one when shots are requested.
fn sample(value: f64, shots: Option<u64>, seed: u64, stream: u64) -> f64 {
    let Some(n) = shots else { return value };
    use rand::distributions::Distribution;
    let p = ((1.0 + value) / 2.0).clamp(0.0, 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let k = rand::distributions::Bernoulli::new(p).expect("p in [0,1]");
    let hits = (0..n).filter(|_| k.sample(&mut rng)).count();
    2.0 * hits as f64 / n as f64 - 1.0
}

/// `<P>` on `state` (already prepared), read out as configured. `stream`
/// selects the sampling substream.
pub fn measure_correlator_on<B: Backend + ?Sized>(
    backend: &B,
    state: &QuantumState,
    pauli: &PauliString,
    modes: &[usize],
    opts: &MeasureOptions,
    stream: u64,
) -> Result<f64> {
    if pauli.len() != modes.len() {
        return Err(Error::validation("pauli", format!("{} factors for {} modes", pauli.len(), modes.len())));
    }
    if pauli.is_identity() {
        return Ok(pauli.sign());
    }
    let exact = match opts.readout {
        Readout::Direct => {
            let rho = mode_density(backend.register(), state, modes)?;
            let unsigned = PauliString::new(pauli.ops.clone());
            (&rho * unsigned.matrix()).trace().re
        }
        Readout::Ramsey => {
            let out = backend.execute(state, &ramsey_sequence(pauli, modes)?)?;
            2.0 * out.level_population(0, 0) - 1.0
        }
    };
    Ok(pauli.sign() * sample(exact, opts.shots, opts.seed, stream))
}

/// Prepares `prep` from the register ground state and measures `<P>`.
pub fn measure_correlator<B: Backend + ?Sized>(
    backend: &B,
    prep: &[Primitive],
    pauli: &PauliString,
    modes: &[usize],
    opts: &MeasureOptions,
) -> Result<f64> {
    let state = backend.execute(&backend.register().ground(), prep)?;
    measure_correlator_on(backend, &state, pauli, modes, opts, 0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateTomography {
    pub modes: Vec<usize>,
    /// `(label, <P>)` for all `4^m` strings, identity first.
    pub expectations: Vec<(String, f64)>,
    /// Linear inversion, before projection.
    pub raw: CMat,
    /// Nearest-by-clipping physical state.
    pub rho: CMat,
}

impl StateTomography {
    pub fn fidelity_to(&self, psi: &crate::hilbert::CVec) -> f64 {
        psi.dotc(&(&self.rho * psi)).re
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "modes": self.modes,
            "expectations": self.expectations,
            "rho": matrix_json(&self.rho),
            "raw": matrix_json(&self.raw),
        })
    }
}

/// Matrix as nested `[re, im]` rows.
pub fn matrix_json(m: &CMat) -> serde_json::Value {
    let rows: Vec<Vec<[f64; 2]>> =
        (0..m.nrows()).map(|r| (0..m.ncols()).map(|c| [m[(r, c)].re, m[(r, c)].im]).collect()).collect();
    serde_json::json!(rows)
}

/// Eigenvalues below zero are set to zero and the rest rescaled to unit
/// trace.
pub fn clip_to_density(m: &CMat) -> CMat {
    let (vals, vecs) = linalg::eigh(&linalg::hermitian_part(m));
    let clipped: Vec<f64> = vals.iter().map(|&l| l.max(0.0)).collect();
    let total: f64 = clipped.iter().sum();
    if total <= 0.0 {
        let d = m.nrows();
        return CMat::identity(d, d).scale(1.0 / d as f64);
    }
    linalg::spectral_map(&clipped, &vecs, |l| l / total)
}

/// Linear-inversion state tomography over `modes` (at most 4).
pub fn state_tomography_on<B: Backend + ?Sized>(
    backend: &B,
    state: &QuantumState,
    modes: &[usize],
    opts: &MeasureOptions,
) -> Result<StateTomography> {
    use rayon::prelude::*;
    let m = modes.len();
    if m == 0 || m > 4 {
        return Err(Error::validation("modes", format!("state tomography takes 1 to 4 modes, got {m}")));
    }
    subsystems(backend.register(), modes)?;
    let n = 1usize << (2 * m);
    let values = (0..n)
        .into_par_iter()
        .map(|i| measure_correlator_on(backend, state, &PauliString::from_index(i, m), modes, opts, i as u64))
        .collect::<Result<Vec<f64>>>()?;
    let d = 1usize << m;
    let mut raw = CMat::zeros(d, d);
    let mut expectations = Vec::with_capacity(n);
    for (i, &v) in values.iter().enumerate() {
        let p = PauliString::from_index(i, m);
        raw += p.matrix().scale(v / d as f64);
        expectations.push((p.label(), v));
    }
    Ok(StateTomography { modes: modes.to_vec(), expectations, rho: clip_to_density(&raw), raw })
}

pub fn state_tomography<B: Backend + ?Sized>(
    backend: &B,
    prep: &[Primitive],
    modes: &[usize],
    opts: &MeasureOptions,
) -> Result<StateTomography> {
    let state = backend.execute(&backend.register().ground(), prep)?;
    state_tomography_on(backend, &state, modes, opts)
}
