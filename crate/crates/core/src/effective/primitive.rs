//! Primitive operations shared by every executor, and the ideal gate-level
//! register that applies them as exact unitaries.
//!
//! Sideband swap convention on the pair `a = |upper, 0_k>`, `b = |lower, 1_k>`
//! (upper/lower = e/g or f/e):
//!
//! `b -> -i e^{i phase} a`, `a -> -i e^{-i phase} b`,
//!
//! i.e. `exp(-i pi/2 (e^{i phase} |a><b| + h.c.))`. A swap followed by the
//! same swap with `phase + pi` is the identity.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{CMat, CVec, QuantumState, SpaceLayout, StateRepr};
use crate::pulses::{FrameTarget, Transition};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Primitive {
    /// Charge rotation `exp(-i theta/2 (cos phi X + sin phi Y))` on a transmon transition.
    Rotate { transition: Transition, theta: f64, phi: f64 },
    /// Pi-area sideband exchange with a mode.
    Swap { mode: usize, transition: Transition, phase: f64 },
    /// Instantaneous frame update.
    Phase { target: FrameTarget, angle: f64 },
}

impl Primitive {
    pub fn rot(transition: Transition, theta: f64, phi: f64) -> Self {
        Primitive::Rotate { transition, theta, phi }
    }

    pub fn swap(mode: usize, transition: Transition, phase: f64) -> Self {
        Primitive::Swap { mode, transition, phase }
    }

    pub fn mode_phase(mode: usize, angle: f64) -> Self {
        Primitive::Phase { target: FrameTarget::Mode(mode), angle }
    }

    pub fn is_virtual(&self) -> bool {
        matches!(self, Primitive::Phase { .. })
    }

    pub fn modes(&self) -> Option<usize> {
        match self {
            Primitive::Swap { mode, .. } => Some(*mode),
            Primitive::Phase { target: FrameTarget::Mode(m), .. } => Some(*m),
            _ => None,
        }
    }
}

/// A 2x2 block acting on index pairs plus a diagonal phase, which covers every primitive.
pub(crate) enum Action {
    Pairs { pairs: Vec<(usize, usize)>, u: [[C64; 2]; 2] },
    Diagonal(Vec<C64>),
}

/// Transmon plus a list of qubit-encoded modes.
#[derive(Debug, Clone, PartialEq)]
pub struct Register {
    pub layout: SpaceLayout,
    pub modes: Vec<usize>,
}

impl Register {
    pub fn new(n_levels: usize, modes: &[usize]) -> Self {
        Register { layout: SpaceLayout::transmon_modes(n_levels, modes.len(), 2), modes: modes.to_vec() }
    }

    pub fn subsystem(&self, mode: usize) -> Result<usize> {
        self.modes
            .iter()
            .position(|&m| m == mode)
            .map(|i| i + 1)
            .ok_or_else(|| Error::Gate(format!("mode {mode} is not part of this register")))
    }

    pub fn dim(&self) -> usize {
        self.layout.total_dim()
    }

    /// Basis state with the transmon at `level` and the given photon numbers.
    pub fn basis(&self, level: usize, photons: &[usize]) -> QuantumState {
        let mut lv = vec![level];
        lv.extend_from_slice(photons);
        QuantumState::basis(&self.layout, &lv)
    }

    pub fn ground(&self) -> QuantumState {
        QuantumState::ground(&self.layout)
    }

    pub(crate) fn action(&self, p: &Primitive) -> Result<Action> {
        let l = &self.layout;
        let n = l.total_dim();
        match *p {
            Primitive::Rotate { transition, theta, phi } => {
                let lo = transition.lower();
                if lo + 1 >= l.dims()[0] {
                    return Err(Error::Gate(format!("{transition:?} rotation needs a {}-level transmon", lo + 2)));
                }
                let pairs = (0..n)
                    .filter(|&i| l.level(i, 0) == lo)
                    .map(|i| (i, i + l.stride(0)))
                    .collect();
                let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
                let mi = C64::new(0.0, -s);
                // rows/cols ordered (lower, upper)
                let u = [
                    [C64::new(c, 0.0), mi * C64::from_polar(1.0, -phi)],
                    [mi * C64::from_polar(1.0, phi), C64::new(c, 0.0)],
                ];
                Ok(Action::Pairs { pairs, u })
            }
            Primitive::Swap { mode, transition, phase } => {
                let sub = self.subsystem(mode)?;
                let lo = transition.lower();
                if lo + 1 >= l.dims()[0] {
                    return Err(Error::Gate(format!("{transition:?} swap needs a {}-level transmon", lo + 2)));
                }
                let ms = l.stride(sub);
                // a = |lo+1, 0_k>, b = |lo, 1_k>
                let pairs = (0..n)
                    .filter(|&i| l.level(i, 0) == lo + 1 && l.level(i, sub) == 0)
                    .map(|a| (a, a - 1 + ms))
                    .collect();
                let mi = C64::new(0.0, -1.0);
                let u = [
                    [C64::new(0.0, 0.0), mi * C64::from_polar(1.0, phase)],
                    [mi * C64::from_polar(1.0, -phase), C64::new(0.0, 0.0)],
                ];
                Ok(Action::Pairs { pairs, u })
            }
            Primitive::Phase { target, angle } => {
                let d = match target {
                    FrameTarget::TransmonLevel(lv) => (0..n)
                        .map(|i| if l.level(i, 0) == lv { C64::from_polar(1.0, angle) } else { C64::new(1.0, 0.0) })
                        .collect(),
                    FrameTarget::Mode(m) => {
                        let sub = self.subsystem(m)?;
                        (0..n).map(|i| C64::from_polar(1.0, angle * l.level(i, sub) as f64)).collect()
                    }
                };
                Ok(Action::Diagonal(d))
            }
        }
    }

    /// Apply one primitive exactly.
    pub fn apply(&self, state: &QuantumState, p: &Primitive) -> Result<QuantumState> {
        if state.layout() != &self.layout {
            return Err(Error::Layout("state does not match register".into()));
        }
        let act = self.action(p)?;
        Ok(match state.repr() {
            StateRepr::Pure(v) => {
                let mut v = v.clone();
                apply_vec(&act, &mut v);
                QuantumState::pure_unchecked(&self.layout, v)
            }
            StateRepr::Density(m) => {
                let mut m = m.clone();
                apply_left(&act, &mut m);
                apply_right_adjoint(&act, &mut m);
                QuantumState::density_unchecked(&self.layout, m)
            }
        })
    }

    pub fn run(&self, state: &QuantumState, prims: &[Primitive]) -> Result<QuantumState> {
        let mut s = state.clone();
        for p in prims {
            s = self.apply(&s, p)?;
        }
        Ok(s)
    }

    /// Full unitary of a primitive list.
    pub fn unitary(&self, prims: &[Primitive]) -> Result<CMat> {
        let n = self.dim();
        let mut u = CMat::identity(n, n);
        for p in prims {
            let act = self.action(p)?;
            apply_left(&act, &mut u);
        }
        Ok(u)
    }
}

pub(crate) fn apply_vec(act: &Action, v: &mut CVec) {
    match act {
        Action::Pairs { pairs, u } => {
            for &(i, j) in pairs {
                let (x, y) = (v[i], v[j]);
                v[i] = u[0][0] * x + u[0][1] * y;
                v[j] = u[1][0] * x + u[1][1] * y;
            }
        }
        Action::Diagonal(d) => {
            for (i, z) in d.iter().enumerate() {
                v[i] *= z;
            }
        }
    }
}

pub(crate) fn apply_left(act: &Action, m: &mut CMat) {
    let nc = m.ncols();
    match act {
        Action::Pairs { pairs, u } => {
            for &(i, j) in pairs {
                for c in 0..nc {
                    let (x, y) = (m[(i, c)], m[(j, c)]);
                    m[(i, c)] = u[0][0] * x + u[0][1] * y;
                    m[(j, c)] = u[1][0] * x + u[1][1] * y;
                }
            }
        }
        Action::Diagonal(d) => {
            for (i, z) in d.iter().enumerate() {
                for c in 0..nc {
                    m[(i, c)] *= z;
                }
            }
        }
    }
}

pub(crate) fn apply_right_adjoint(act: &Action, m: &mut CMat) {
    let nr = m.nrows();
    match act {
        Action::Pairs { pairs, u } => {
            for &(i, j) in pairs {
                for r in 0..nr {
                    let (x, y) = (m[(r, i)], m[(r, j)]);
                    m[(r, i)] = x * u[0][0].conj() + y * u[0][1].conj();
                    m[(r, j)] = x * u[1][0].conj() + y * u[1][1].conj();
                }
            }
        }
        Action::Diagonal(d) => {
            for (j, z) in d.iter().enumerate() {
                for r in 0..nr {
                    m[(r, j)] *= z.conj();
                }
            }
        }
    }
}
