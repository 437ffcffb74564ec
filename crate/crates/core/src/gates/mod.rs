//! Gate layer: abstract memory gates, their primitive decompositions, a text
//! program format, and (in submodules) calibration and pulse lowering.
//!
//! Mode qubits are the `{0, 1}` photon subspace of each memory mode. Gate
//! matrices act on `2^m` dimensional spaces ordered little-endian: bit `s` of
//! a basis index is the photon number of the `s`-th listed mode.

mod calibration;
mod compiler;
mod program;

pub use calibration::{GateCorrection, GateKey, PhaseCalibration, RotationCal, SidebandCal};
pub use compiler::{process_fidelity, ramsey_dc_shift, sideband_shape, sideband_timing, Compiler};
pub use program::GateProgram;

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::device::DeviceModel;
use crate::effective::{transition_frequency, Primitive, Register};
use crate::error::{Error, Result};
use crate::hilbert::{CMat, CVec, QuantumState};
use crate::pulses::Transition;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "gate", rename_all = "snake_case")]
pub enum GateOp {
    /// Transmon rotation by `theta` about the axis at angle `phi`.
    TransmonRot { transition: Transition, theta: f64, phi: f64 },
    /// Transmon-mode exchange on `|upper,0> <-> |lower,1>`.
    ModeISwap { mode: usize, transition: Transition },
    /// Rotation of one mode qubit, routed through the transmon.
    SingleMode { mode: usize, theta: f64, phi: f64 },
    Cz { control: usize, target: usize },
    Cx { control: usize, target: usize },
    Cy { control: usize, target: usize },
    Swap { a: usize, b: usize },
    /// `cos(theta/2)|0...0> + sin(theta/2)|1...1>` from vacuum.
    Ghz { modes: Vec<usize>, theta: f64 },
    Barrier,
}

fn check_angle(name: &str, a: f64) -> Result<()> {
    if a.is_finite() && a > -2.0 * PI && a <= 2.0 * PI + 1e-12 {
        Ok(())
    } else {
        Err(Error::validation(name, format!("angle {a} outside (-2pi, 2pi]")))
    }
}

impl GateOp {
    /// Memory modes the op touches, in the order they appear.
    pub fn modes(&self) -> Vec<usize> {
        match self {
            GateOp::TransmonRot { .. } | GateOp::Barrier => vec![],
            GateOp::ModeISwap { mode, .. } | GateOp::SingleMode { mode, .. } => vec![*mode],
            GateOp::Cz { control, target } | GateOp::Cx { control, target } | GateOp::Cy { control, target } => {
                vec![*control, *target]
            }
            GateOp::Swap { a, b } => vec![*a, *b],
            GateOp::Ghz { modes, .. } => modes.clone(),
        }
    }

    /// True for ops that start and end with the transmon in `|g>`.
    pub fn is_memory_gate(&self) -> bool {
        !matches!(self, GateOp::TransmonRot { .. } | GateOp::ModeISwap { .. })
    }

    pub fn validate(&self, device: &DeviceModel) -> Result<()> {
        let modes = self.modes();
        for (i, &m) in modes.iter().enumerate() {
            device.require_active(m)?;
            if modes[..i].contains(&m) {
                return Err(Error::Gate(format!("mode {m} used twice in one gate")));
            }
        }
        match self {
            GateOp::TransmonRot { theta, phi, .. } | GateOp::SingleMode { theta, phi, .. } => {
                check_angle("theta", *theta)?;
                check_angle("phi", *phi)?;
            }
            GateOp::Ghz { modes, theta } => {
                if modes.len() < 2 {
                    return Err(Error::Gate("GHZ needs at least two modes".into()));
                }
                check_angle("theta", *theta)?;
            }
            _ => {}
        }
        Ok(())
    }

    /// Primitive decomposition with every calibration phase at zero.
    ///
    /// Sideband phases follow the pair convention of [`Primitive::Swap`]; the
    /// unloading swap of a pair uses the loading phase plus `pi` so the two
    /// compose to the identity on the single-excitation block.
    pub fn primitives(&self) -> Vec<Primitive> {
        use Transition::{Ef, Ge};
        match self {
            GateOp::TransmonRot { transition, theta, phi } => vec![Primitive::rot(*transition, *theta, *phi)],
            GateOp::ModeISwap { mode, transition } => vec![Primitive::swap(*mode, *transition, 0.0)],
            GateOp::SingleMode { mode, theta, phi } => vec![
                Primitive::swap(*mode, Ge, 0.0),
                Primitive::rot(Ge, *theta, phi - FRAC_PI_2),
                Primitive::swap(*mode, Ge, PI),
            ],
            // |e1> of the pair (target loaded in e, control photon) goes to
            // |f0> and back, picking up -1
            GateOp::Cz { control, target } => vec![
                Primitive::swap(*target, Ge, 0.0),
                Primitive::swap(*control, Ef, 0.0),
                Primitive::swap(*control, Ef, 0.0),
                Primitive::swap(*target, Ge, PI),
            ],
            GateOp::Cx { control, target } => cx_like(*control, *target, PI),
            GateOp::Cy { control, target } => cx_like(*control, *target, -FRAC_PI_2),
            // both photons are parked in the transmon (|11> as |f0>) while
            // mode b's single photon crosses over, so no mode ever holds two
            GateOp::Swap { a, b } => vec![
                Primitive::swap(*a, Ge, 0.0),
                Primitive::swap(*b, Ef, 0.0),
                Primitive::swap(*b, Ge, PI),
                Primitive::swap(*b, Ef, 0.0),
                Primitive::swap(*a, Ge, 0.0),
            ],
            GateOp::Ghz { modes, theta } => {
                let mut p = vec![Primitive::rot(Ge, *theta, FRAC_PI_2)];
                let (last, rest) = modes.split_last().expect("validated: >= 2 modes");
                for &m in rest {
                    p.push(Primitive::rot(Ef, PI, FRAC_PI_2));
                    p.push(Primitive::swap(m, Ef, -FRAC_PI_2));
                }
                p.push(Primitive::swap(*last, Ge, -FRAC_PI_2));
                p
            }
            GateOp::Barrier => vec![],
        }
    }

    /// Index of the primitive whose phase carries the conditional-phase
    /// correction, for gates that have one.
    pub(crate) fn conditional_slot(&self) -> Option<usize> {
        match self {
            GateOp::Cz { .. } => Some(2),
            GateOp::Swap { .. } => Some(3),
            _ => None,
        }
    }

    /// Textbook matrix on the qubits of `modes` (little-endian). `None` for
    /// ops that are not unitaries on the memory alone.
    pub fn ideal_matrix(&self, modes: &[usize]) -> Result<Option<CMat>> {
        let m = modes.len();
        let d = 1usize << m;
        let bit = |mode: usize| -> Result<usize> {
            modes
                .iter()
                .position(|&x| x == mode)
                .ok_or_else(|| Error::Gate(format!("mode {mode} not among {modes:?}")))
        };
        let mut u = CMat::zeros(d, d);
        let one = C64::new(1.0, 0.0);
        match self {
            GateOp::TransmonRot { .. } | GateOp::ModeISwap { .. } | GateOp::Ghz { .. } => return Ok(None),
            GateOp::Barrier => u = CMat::identity(d, d),
            GateOp::SingleMode { mode, theta, phi } => {
                let b = bit(*mode)?;
                let r = rotation(*theta, *phi);
                for i in 0..d {
                    let x = (i >> b) & 1;
                    for y in 0..2 {
                        let j = (i & !(1 << b)) | (y << b);
                        u[(j, i)] = r[(y, x)];
                    }
                }
            }
            GateOp::Cz { control, target } => {
                let (c, t) = (bit(*control)?, bit(*target)?);
                for i in 0..d {
                    u[(i, i)] = if (i >> c) & 1 == 1 && (i >> t) & 1 == 1 { -one } else { one };
                }
            }
            GateOp::Cx { control, target } | GateOp::Cy { control, target } => {
                let (c, t) = (bit(*control)?, bit(*target)?);
                let y = matches!(self, GateOp::Cy { .. });
                for i in 0..d {
                    if (i >> c) & 1 == 0 {
                        u[(i, i)] = one;
                    } else {
                        let j = i ^ (1 << t);
                        // Y|0> = i|1>, Y|1> = -i|0>
                        u[(j, i)] = if !y {
                            one
                        } else if (i >> t) & 1 == 0 {
                            C64::new(0.0, 1.0)
                        } else {
                            C64::new(0.0, -1.0)
                        };
                    }
                }
            }
            GateOp::Swap { a, b } => {
                let (x, y) = (bit(*a)?, bit(*b)?);
                for i in 0..d {
                    let (bx, by) = ((i >> x) & 1, (i >> y) & 1);
                    let j = (i & !(1 << x) & !(1 << y)) | (by << x) | (bx << y);
                    u[(j, i)] = one;
                }
            }
        }
        Ok(Some(u))
    }

    /// Target qubit state of a GHZ op on `modes` (vacuum input).
    pub fn ideal_state(&self, modes: &[usize]) -> Result<Option<CVec>> {
        let GateOp::Ghz { modes: gm, theta } = self else {
            return Ok(None);
        };
        let d = 1usize << modes.len();
        let mut mask = 0;
        for m in gm {
            let b = modes
                .iter()
                .position(|x| x == m)
                .ok_or_else(|| Error::Gate(format!("mode {m} not among {modes:?}")))?;
            mask |= 1 << b;
        }
        let mut v = CVec::zeros(d);
        v[0] = C64::new((theta / 2.0).cos(), 0.0);
        v[mask] += C64::new((theta / 2.0).sin(), 0.0);
        Ok(Some(v))
    }
}

fn cx_like(control: usize, target: usize, ef_phase: f64) -> Vec<Primitive> {
    use Transition::{Ef, Ge};
    vec![
        Primitive::swap(control, Ge, 0.0),
        Primitive::swap(target, Ef, 0.0),
        Primitive::rot(Ef, PI, ef_phase),
        Primitive::swap(target, Ef, 0.0),
        Primitive::swap(control, Ge, PI),
    ]
}

/// `exp(-i theta/2 (cos phi X + sin phi Y))`.
pub fn rotation(theta: f64, phi: f64) -> CMat {
    let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
    let mi = C64::new(0.0, -s);
    CMat::from_row_slice(
        2,
        2,
        &[C64::new(c, 0.0), mi * C64::from_polar(1.0, -phi), mi * C64::from_polar(1.0, phi), C64::new(c, 0.0)],
    )
}

/// Restriction of a register unitary to transmon `|g>` and mode qubits,
/// in the little-endian qubit ordering of the register's modes.
pub fn qubit_block(register: &Register, u: &CMat) -> CMat {
    let m = register.modes.len();
    let d = 1usize << m;
    let idx: Vec<usize> = (0..d)
        .map(|i| {
            let mut lv = vec![0];
            lv.extend((0..m).map(|s| (i >> s) & 1));
            register.layout.index(&lv)
        })
        .collect();
    CMat::from_fn(d, d, |r, c| u[(idx[r], idx[c])])
}

/// Exact effective-model unitary of a gate on `register`.
pub fn effective_unitary(register: &Register, op: &GateOp) -> Result<CMat> {
    register.unitary(&op.primitives())
}

/// Apply a list of gates with the exact effective model.
pub fn run_effective(register: &Register, state: &QuantumState, ops: &[GateOp]) -> Result<QuantumState> {
    let prims: Vec<Primitive> = ops.iter().flat_map(|o| o.primitives()).collect();
    register.run(state, &prims)
}

/// Gates needed for an entangling gate between mode 1 and mode `j` with
/// nearest-neighbour couplings only: `2j - 3`.
pub fn nn_gate_count(j: usize) -> Result<usize> {
    if j < 2 {
        return Err(Error::validation("j", "needs j >= 2"));
    }
    Ok(2 * j - 3)
}

/// Fidelity of the nearest-neighbour implementation, `F^(2j-3)`.
pub fn fidelity_curve(f_gate: f64, j: usize) -> Result<f64> {
    if !(0.0..=1.0).contains(&f_gate) {
        return Err(Error::validation("f_gate", "must lie in [0, 1]"));
    }
    Ok(f_gate.powi(nn_gate_count(j)? as i32))
}

/// Bare resonance of the exchange of `mode` with a transmon transition.
pub fn bare_resonance(device: &DeviceModel, mode: usize, t: Transition) -> f64 {
    (device.spectrum.nu(mode) - transition_frequency(device, t)).abs()
}

/// Spectral-crowding warnings for the sideband tones of a gate: any other
/// active-mode exchange within the guard band of a tone, and (for two-mode
/// gates) a mode spacing within the guard band of `|alpha|`.
pub fn crosstalk_warnings(device: &DeviceModel, op: &GateOp) -> Vec<String> {
    let guard = device.control.guard_band;
    let mut out = Vec::new();
    let mut tones: Vec<(usize, Transition)> = Vec::new();
    for p in op.primitives() {
        if let Primitive::Swap { mode, transition, .. } = p {
            if !tones.contains(&(mode, transition)) {
                tones.push((mode, transition));
            }
        }
    }
    for &(m, t) in &tones {
        let f = bare_resonance(device, m, t);
        for &k in &device.active_modes {
            for u in [Transition::Ge, Transition::Ef] {
                if (k, u) == (m, t) {
                    continue;
                }
                let g = bare_resonance(device, k, u);
                if (f - g).abs() < guard {
                    out.push(format!(
                        "tone for mode {m} {t:?} at {f:.4} GHz is {:.1} MHz from the mode {k} {u:?} exchange",
                        (f - g).abs() * 1e3
                    ));
                }
            }
        }
    }
    let modes = op.modes();
    if modes.len() == 2 {
        let spacing = (device.spectrum.nu(modes[0]) - device.spectrum.nu(modes[1])).abs();
        let a = device.transmon.alpha.abs();
        if (spacing - a).abs() < guard {
            out.push(format!(
                "modes {} and {} are {:.1} MHz apart, within {:.0} MHz of the anharmonicity",
                modes[0],
                modes[1],
                spacing * 1e3,
                guard * 1e3
            ));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reg(modes: &[usize]) -> Register {
        Register::new(3, modes)
    }

    fn fid(a: &CMat, b: &CMat) -> f64 {
        let d = a.nrows() as f64;
        (a.adjoint() * b).trace().norm_sqr() / (d * d)
    }

    #[test]
    fn effective_gates_match_textbook() {
        let r = reg(&[6, 9]);
        let ops = [
            GateOp::Cz { control: 6, target: 9 },
            GateOp::Cz { control: 9, target: 6 },
            GateOp::Cx { control: 6, target: 9 },
            GateOp::Cx { control: 9, target: 6 },
            GateOp::Cy { control: 6, target: 9 },
            GateOp::Swap { a: 6, b: 9 },
            GateOp::SingleMode { mode: 9, theta: 1.234, phi: -0.7 },
            GateOp::SingleMode { mode: 6, theta: PI, phi: 0.0 },
        ];
        for op in ops {
            let u = qubit_block(&r, &effective_unitary(&r, &op).unwrap());
            let ideal = op.ideal_matrix(&[6, 9]).unwrap().unwrap();
            // exact up to global phase
            assert!((fid(&ideal, &u) - 1.0).abs() < 1e-12, "{op:?}");
            // and the block is the whole action: nothing left in e/f
            assert!(((u.adjoint() * &u) - CMat::identity(4, 4)).norm() < 1e-12, "{op:?}");
        }
    }

    #[test]
    fn ghz_state_from_vacuum() {
        let modes = [1, 3, 4, 6, 7, 9];
        let r = reg(&modes);
        let op = GateOp::Ghz { modes: modes.to_vec(), theta: FRAC_PI_2 };
        let s = run_effective(&r, &r.ground(), std::slice::from_ref(&op)).unwrap();
        let ideal = op.ideal_state(&modes).unwrap().unwrap();
        let psi = s.as_pure().unwrap();
        let mut overlap = C64::new(0.0, 0.0);
        for i in 0..ideal.len() {
            let mut lv = vec![0];
            lv.extend((0..modes.len()).map(|s| (i >> s) & 1));
            overlap += ideal[i].conj() * psi[r.layout.index(&lv)];
        }
        assert!((overlap.norm_sqr() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cy_is_s_conjugated_cx() {
        let modes = [6, 9];
        let cx = GateOp::Cx { control: 6, target: 9 }.ideal_matrix(&modes).unwrap().unwrap();
        let cy = GateOp::Cy { control: 6, target: 9 }.ideal_matrix(&modes).unwrap().unwrap();
        // S on the target (bit 1)
        let s = CMat::from_diagonal(&CVec::from_vec(vec![
            C64::new(1.0, 0.0),
            C64::new(1.0, 0.0),
            C64::new(0.0, 1.0),
            C64::new(0.0, 1.0),
        ]));
        let conj = &s * cx * s.adjoint();
        assert!((conj - cy).norm() < 1e-12);
    }

    #[test]
    fn cx_truth_table() {
        let u = GateOp::Cx { control: 6, target: 9 }.ideal_matrix(&[6, 9]).unwrap().unwrap();
        // |10> means mode 6 (bit 0) excited
        assert_eq!(u[(3, 1)], C64::new(1.0, 0.0));
        assert_eq!(u[(0, 0)], C64::new(1.0, 0.0));
    }

    #[test]
    fn nn_counts() {
        assert_eq!(nn_gate_count(2).unwrap(), 1);
        assert_eq!(nn_gate_count(9).unwrap(), 15);
        assert!(nn_gate_count(1).is_err());
        assert!((fidelity_curve(0.99, 9).unwrap() - 0.99f64.powi(15)).abs() < 1e-15);
    }

    #[test]
    fn angle_bounds() {
        let dev = DeviceModel::default_device();
        assert!(GateOp::SingleMode { mode: 6, theta: 2.0 * PI, phi: 0.0 }.validate(&dev).is_ok());
        assert!(GateOp::SingleMode { mode: 6, theta: -2.0 * PI, phi: 0.0 }.validate(&dev).is_err());
        assert!(GateOp::Cz { control: 10, target: 6 }.validate(&dev).is_err());
        assert!(GateOp::Cz { control: 6, target: 6 }.validate(&dev).is_err());
    }

    #[test]
    fn collision_warning_near_anharmonicity() {
        let dev = DeviceModel::default_device();
        // find a pair spaced close to |alpha|
        let mut hit = None;
        for j in 1..=9 {
            for k in 1..=9 {
                let s = (dev.spectrum.nu(j) - dev.spectrum.nu(k)).abs();
                if j != k && (s - 0.25).abs() < dev.control.guard_band {
                    hit = Some((j, k));
                }
            }
        }
        if let Some((j, k)) = hit {
            let w = crosstalk_warnings(&dev, &GateOp::Cz { control: j, target: k });
            assert!(w.iter().any(|s| s.contains("anharmonicity")), "{w:?}");
        }
        let w = crosstalk_warnings(&dev, &GateOp::SingleMode { mode: 6, theta: 1.0, phi: 0.0 });
        assert!(w.iter().all(|s| !s.contains("anharmonicity")));
    }
}
