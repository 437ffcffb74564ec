//! Process tomography from 16 (per two modes) prepared inputs.
//!
//! Conventions: the Choi matrix is `J = sum_ij |i><j| (x) E(|i><j|)`, input
//! factor first. `chi` is expressed in the normalized-trace Pauli basis,
//! `E(rho) = sum_mn chi_mn P_m rho P_n`, so a trace-preserving channel has
//! `Tr chi = 1` and the fidelity to a unitary target is `Tr(chi_ideal chi)`.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, PI};

use num_complex::Complex64 as C64;
use serde::Serialize;

use super::{matrix_json, state_tomography_on, Backend, MeasureOptions, PauliString};
use crate::effective::Primitive;
use crate::error::{Error, Result};
use crate::gates::GateOp;
use crate::hilbert::{linalg, CMat, CVec};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProcessMatrix {
    #[serde(serialize_with = "ser_mat")]
    pub chi: CMat,
    pub labels: Vec<String>,
}

fn ser_mat<S: serde::Serializer>(m: &CMat, s: S) -> std::result::Result<S::Ok, S::Error> {
    matrix_json(m).serialize(s)
}

fn vec_op(a: &CMat) -> CVec {
    let d = a.nrows();
    CVec::from_fn(d * d, |idx, _| a[(idx % d, idx / d)])
}

fn pauli_basis(m: usize) -> Vec<PauliString> {
    (0..1usize << (2 * m)).map(|i| PauliString::from_index(i, m)).collect()
}

fn qubits(d: usize) -> usize {
    d.trailing_zeros() as usize
}

/// `Tr_out J`, a `d x d` matrix.
fn output_trace(j: &CMat, d: usize) -> CMat {
    CMat::from_fn(d, d, |a, b| (0..d).map(|k| j[(a * d + k, b * d + k)]).sum())
}

impl ProcessMatrix {
    pub fn from_choi(j: &CMat) -> Self {
        let d = (j.nrows() as f64).sqrt().round() as usize;
        let basis = pauli_basis(qubits(d));
        let vecs: Vec<CVec> = basis.iter().map(|p| vec_op(&p.matrix())).collect();
        let n = vecs.len();
        let scale = 1.0 / (d * d) as f64;
        let chi = CMat::from_fn(n, n, |a, b| vecs[a].dotc(&(j * &vecs[b])) * scale);
        ProcessMatrix { chi, labels: basis.iter().map(|p| p.label()).collect() }
    }

    pub fn from_unitary(u: &CMat) -> Self {
        let v = vec_op(u);
        ProcessMatrix::from_choi(&(&v * v.adjoint()))
    }

    pub fn to_choi(&self) -> CMat {
        let n = self.chi.nrows();
        let d = (n as f64).sqrt().round() as usize;
        let vecs: Vec<CVec> = pauli_basis(qubits(d)).iter().map(|p| vec_op(&p.matrix())).collect();
        let mut j = CMat::zeros(d * d, d * d);
        for a in 0..n {
            for b in 0..n {
                let c = self.chi[(a, b)];
                if c != C64::new(0.0, 0.0) {
                    j += (&vecs[a] * vecs[b].adjoint()) * c;
                }
            }
        }
        j
    }

    /// `Re Tr(a b)`.
    pub fn fidelity(&self, other: &ProcessMatrix) -> f64 {
        (&self.chi * &other.chi).trace().re
    }

    /// Largest entry of `sum_mn chi_mn P_n P_m - I`.
    pub fn tp_error(&self) -> f64 {
        let j = self.to_choi();
        let d = (self.chi.nrows() as f64).sqrt().round() as usize;
        linalg::max_abs(&(output_trace(&j, d) - CMat::identity(d, d)))
    }

    pub fn min_eigenvalue(&self) -> f64 {
        linalg::eigh(&linalg::hermitian_part(&self.chi)).0.into_iter().fold(f64::INFINITY, f64::min)
    }

    /// Alternates eigenvalue clipping of the Choi matrix with the affine
    /// trace-preservation correction until both hold to `1e-9`.
    pub fn project_cptp(&self) -> ProcessMatrix {
        let mut j = linalg::hermitian_part(&self.to_choi());
        let d = (self.chi.nrows() as f64).sqrt().round() as usize;
        let id = CMat::identity(d, d);
        for _ in 0..5000 {
            let (vals, vecs) = linalg::eigh(&j);
            let clipped = linalg::spectral_map(&vals, &vecs, |l| l.max(0.0));
            let excess = output_trace(&clipped, d) - &id;
            let neg = vals.iter().cloned().fold(0.0f64, f64::min);
            j = clipped;
            if linalg::max_abs(&excess) < 1e-9 && neg > -1e-9 {
                break;
            }
            j -= excess.kronecker(&id).scale(1.0 / d as f64);
        }
        ProcessMatrix::from_choi(&j)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({ "labels": self.labels, "chi": matrix_json(&self.chi) })
    }
}

#[derive(Debug, Clone)]
pub struct ProcessTomography {
    pub modes: Vec<usize>,
    /// Linear inversion.
    pub raw: ProcessMatrix,
    /// After the physicality projection.
    pub chi: ProcessMatrix,
    pub ideal: ProcessMatrix,
    pub fidelity: f64,
}

impl ProcessTomography {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "modes": self.modes,
            "fidelity": self.fidelity,
            "raw_fidelity": self.ideal.fidelity(&self.raw),
            "chi": self.chi.to_json(),
            "raw": self.raw.to_json(),
        })
    }
}

/// Single-mode input states `|0>, |1>, |+>, |+i>`: preparation from vacuum and
/// nominal vector.
fn input(kind: usize) -> (Option<(f64, f64)>, [C64; 2]) {
    let (o, z, s) = (C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(FRAC_1_SQRT_2, 0.0));
    match kind {
        0 => (None, [o, z]),
        1 => (Some((PI, 0.0)), [z, o]),
        2 => (Some((FRAC_PI_2, FRAC_PI_2)), [s, s]),
        _ => (Some((FRAC_PI_2, PI)), [s, C64::new(0.0, FRAC_1_SQRT_2)]),
    }
}

/// Tomography of the channel implemented by `gate` on `modes` (up to 2 for
/// the usual cost; any count is accepted). `ideal` is the target unitary on
/// the same little-endian qubit ordering.
pub fn process_tomography<B: Backend + ?Sized>(
    backend: &B,
    gate: &[Primitive],
    ideal: &CMat,
    modes: &[usize],
    opts: &MeasureOptions,
) -> Result<ProcessTomography> {
    use rayon::prelude::*;
    let m = modes.len();
    let d = 1usize << m;
    if m == 0 || ideal.nrows() != d || ideal.ncols() != d {
        return Err(Error::validation("ideal", format!("target must be {d}x{d} for {m} modes")));
    }
    let n = d * d;
    let ground = backend.register().ground();
    let results = (0..n)
        .into_par_iter()
        .map(|i| -> Result<(CMat, CMat)> {
            let mut prims = Vec::new();
            let mut psi = CVec::from_element(1, C64::new(1.0, 0.0));
            for (s, &mode) in modes.iter().enumerate() {
                let (rot, v) = input((i >> (2 * s)) & 3);
                if let Some((theta, phi)) = rot {
                    prims.extend(GateOp::SingleMode { mode, theta, phi }.primitives());
                }
                psi = CVec::from_column_slice(&v).kronecker(&psi);
            }
            prims.extend_from_slice(gate);
            let out = backend.execute(&ground, &prims)?;
            let o = MeasureOptions { seed: opts.seed.wrapping_add(i as u64 * 0x9E37_79B9), ..opts.clone() };
            let t = state_tomography_on(backend, &out, modes, &o)?;
            Ok((&psi * psi.adjoint(), t.raw))
        })
        .collect::<Result<Vec<_>>>()?;
    let basis: Vec<CMat> = pauli_basis(m).iter().map(|p| p.matrix()).collect();
    // input Pauli coordinates, then E(P_b) by linear combination of outputs
    let coords = nalgebra::DMatrix::<f64>::from_fn(n, n, |a, j| (&basis[a] * &results[j].0).trace().re);
    let inv = coords.try_inverse().ok_or_else(|| Error::Fit("input states are not a basis".into()))?;
    let mut choi = CMat::zeros(n, n);
    for (b, pb) in basis.iter().enumerate() {
        let mut e = CMat::zeros(d, d);
        for (j, r) in results.iter().enumerate() {
            let c = inv[(j, b)] * d as f64;
            if c != 0.0 {
                e += r.1.scale(c);
            }
        }
        choi += pb.transpose().kronecker(&e).scale(1.0 / d as f64);
    }
    let raw = ProcessMatrix::from_choi(&choi);
    let chi = raw.project_cptp();
    let ideal = ProcessMatrix::from_unitary(ideal);
    let fidelity = ideal.fidelity(&chi);
    Ok(ProcessTomography { modes: modes.to_vec(), raw, chi, ideal, fidelity })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::effective::Register;

    #[test]
    fn identity_channel_is_a_single_entry() {
        let r = Register::new(3, &[6, 9]);
        let t = process_tomography(&r, &[], &CMat::identity(4, 4), &[6, 9], &MeasureOptions::default()).unwrap();
        assert!((t.chi.chi[(0, 0)].re - 1.0).abs() < 1e-9);
        let rest: f64 = t.chi.chi.iter().map(|c| c.norm()).sum::<f64>() - t.chi.chi[(0, 0)].norm();
        assert!(rest < 1e-9);
        assert!((t.fidelity - 1.0).abs() < 1e-9);
    }

    #[test]
    fn effective_cz_is_exact() {
        let r = Register::new(3, &[6, 9]);
        let op = GateOp::Cz { control: 6, target: 9 };
        let ideal = op.ideal_matrix(&[6, 9]).unwrap().unwrap();
        let t = process_tomography(&r, &op.primitives(), &ideal, &[6, 9], &MeasureOptions::default()).unwrap();
        assert!((t.fidelity - 1.0).abs() < 1e-6);
        assert!(t.chi.tp_error() < 1e-6);
        assert!(t.chi.min_eigenvalue() > -1e-9);
        // and against the wrong target
        assert!(ProcessMatrix::from_unitary(&CMat::identity(4, 4)).fidelity(&t.chi) < 0.3);
    }

    #[test]
    fn projection_repairs_a_non_physical_matrix() {
        let mut chi = ProcessMatrix::from_unitary(&CMat::identity(2, 2));
        chi.chi[(3, 3)] = C64::new(-0.05, 0.0);
        chi.chi[(1, 1)] = C64::new(0.05, 0.0);
        let p = chi.project_cptp();
        assert!(p.min_eigenvalue() > -1e-8);
        assert!(p.tp_error() < 1e-6);
        assert!((p.chi.trace().re - 1.0).abs() < 1e-6);
    }
}
