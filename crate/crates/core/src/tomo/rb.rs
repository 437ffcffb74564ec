//! Single-qubit randomized benchmarking of the transmon or of one mode.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Backend, Clifford, CliffordGroup};
use crate::effective::Primitive;
use crate::error::{Error, Result};
use crate::pulses::Transition;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RbTarget {
    Transmon,
    Mode(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RbFit {
    pub a: f64,
    pub b: f64,
    pub p: f64,
    pub fidelity: f64,
    /// Root-mean-square fit residual.
    pub rms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RbResult {
    pub target: RbTarget,
    pub lengths: Vec<usize>,
    /// Mean survival per length.
    pub survival: Vec<f64>,
    /// `[sequence][length]`.
    pub per_sequence: Vec<Vec<f64>>,
    /// `None` when the decay fit does not converge.
    pub fit: Option<RbFit>,
}

impl RbResult {
    pub fn fidelity(&self) -> Option<f64> {
        self.fit.as_ref().map(|f| f.fidelity)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("m,survival\n");
        for (m, y) in self.lengths.iter().zip(&self.survival) {
            s.push_str(&format!("{m},{y:.10}\n"));
        }
        s
    }
}

/// Primitives of one Clifford on the target. A mode Clifford is the
/// transmon word sandwiched between a swap in and a swap out.
pub fn clifford_primitives(target: RbTarget, c: &Clifford) -> Vec<Primitive> {
    match target {
        RbTarget::Transmon => c.word.iter().map(|&(t, p)| Primitive::rot(Transition::Ge, t, p)).collect(),
        RbTarget::Mode(k) => {
            let mut v = vec![Primitive::swap(k, Transition::Ge, 0.0)];
            v.extend(c.word.iter().map(|&(t, p)| Primitive::rot(Transition::Ge, t, p - FRAC_PI_2)));
            v.push(Primitive::swap(k, Transition::Ge, PI));
            v
        }
    }
}

/// Least-squares fit of `A p^m + B`, `A` and `B` free. Returns `None` if the
/// best `p` sits on the lower edge of `(0, 1]`.
pub fn fit_decay(m: &[f64], y: &[f64]) -> Option<RbFit> {
    if m.len() != y.len() || m.len() < 3 {
        return None;
    }
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    if y.iter().all(|v| (v - mean).abs() < 1e-12) {
        return Some(RbFit { a: 0.0, b: mean, p: 1.0, fidelity: 1.0, rms: 0.0 });
    }
    let solve = |p: f64| -> (f64, f64, f64) {
        // 2x2 normal equations in (A, B)
        let (mut sxx, mut sx, mut sxy, mut sy) = (0.0, 0.0, 0.0, 0.0);
        let n = m.len() as f64;
        for (&mi, &yi) in m.iter().zip(y) {
            let x = p.powf(mi);
            sxx += x * x;
            sx += x;
            sxy += x * yi;
            sy += yi;
        }
        let det = sxx * n - sx * sx;
        if det.abs() < 1e-300 {
            return (0.0, mean, f64::INFINITY);
        }
        let a = (sxy * n - sx * sy) / det;
        let b = (sxx * sy - sx * sxy) / det;
        let sse = m.iter().zip(y).map(|(&mi, &yi)| (a * p.powf(mi) + b - yi).powi(2)).sum();
        (a, b, sse)
    };
    let grid = 2000;
    let (mut best, mut best_sse) = (0usize, f64::INFINITY);
    for i in 1..grid {
        let sse = solve(i as f64 / grid as f64).2;
        if sse < best_sse {
            best = i;
            best_sse = sse;
        }
    }
    if best <= 1 {
        return None;
    }
    let (p, _) = crate::numerics::golden_max(
        |p| -solve(p).2,
        (best - 1) as f64 / grid as f64,
        ((best + 1) as f64 / grid as f64).min(1.0),
        1e-12,
    );
    let (a, b, sse) = solve(p);
    Some(RbFit { a, b, p, fidelity: 1.0 - (1.0 - p) / 2.0, rms: (sse / m.len() as f64).sqrt() })
}

/// Random Clifford sequences of each length, each closed by its recovery
/// element; survival is the population returned to the starting ground
/// state. Sequence `s` draws from stream `s` of the seeded generator.
pub fn randomized_benchmarking<B: Backend + ?Sized>(
    backend: &B,
    target: RbTarget,
    lengths: &[usize],
    n_seq: usize,
    seed: u64,
) -> Result<RbResult> {
    use rayon::prelude::*;
    if n_seq == 0 {
        return Err(Error::validation("n_seq", "at least one sequence"));
    }
    if lengths.is_empty() || lengths.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::validation("lengths", "non-empty and strictly ascending"));
    }
    if let RbTarget::Mode(k) = target {
        backend.register().subsystem(k)?;
    }
    let group = CliffordGroup::get();
    let ground = backend.register().ground();
    let per_sequence = (0..n_seq)
        .into_par_iter()
        .map(|s| -> Result<Vec<f64>> {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(s as u64);
            lengths
                .iter()
                .map(|&m| {
                    let mut seq: Vec<usize> = (0..m).map(|_| rng.gen_range(0..group.len())).collect();
                    seq.push(group.recovery(&seq));
                    let prims: Vec<Primitive> =
                        seq.iter().flat_map(|&c| clifford_primitives(target, &group.elements[c])).collect();
                    let out = backend.execute(&ground, &prims)?;
                    Ok(out.populations()[0])
                })
                .collect()
        })
        .collect::<Result<Vec<_>>>()?;
    let survival: Vec<f64> =
        (0..lengths.len()).map(|i| per_sequence.iter().map(|v| v[i]).sum::<f64>() / n_seq as f64).collect();
    let ms: Vec<f64> = lengths.iter().map(|&m| m as f64).collect();
    let fit = fit_decay(&ms, &survival);
    Ok(RbResult { target, lengths: lengths.to_vec(), survival, per_sequence, fit })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::effective::Register;
    use crate::gates::{rotation, GateOp};

    #[test]
    fn zero_noise_survives() {
        let r = Register::new(3, &[6]);
        for target in [RbTarget::Transmon, RbTarget::Mode(6)] {
            let res = randomized_benchmarking(&r, target, &[1, 4, 16], 5, 1).unwrap();
            assert!(res.survival.iter().all(|&s| (s - 1.0).abs() < 1e-12));
            let f = res.fit.unwrap();
            assert_eq!(f.p, 1.0);
            assert_eq!(f.fidelity, 1.0);
        }
    }

    #[test]
    fn mode_clifford_is_the_transmon_clifford() {
        let r = Register::new(3, &[6]);
        let g = CliffordGroup::get();
        let c = &g.elements[17];
        let u = crate::gates::qubit_block(&r, &r.unitary(&clifford_primitives(RbTarget::Mode(6), c)).unwrap());
        assert!(crate::gates::process_fidelity(&c.unitary, &u) > 1.0 - 1e-12);
        // same rotation convention as single-mode gates
        let op = GateOp::SingleMode { mode: 6, theta: 1.0, phi: 0.3 };
        let v = crate::gates::qubit_block(&r, &r.unitary(&op.primitives()).unwrap());
        assert!(crate::gates::process_fidelity(&rotation(1.0, 0.3), &v) > 1.0 - 1e-12);
    }

    #[test]
    fn fit_recovers_a_known_decay() {
        let m: Vec<f64> = [1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0].to_vec();
        let y: Vec<f64> = m.iter().map(|&x| 0.45 * 0.97f64.powf(x) + 0.52).collect();
        let f = fit_decay(&m, &y).unwrap();
        assert!((f.p - 0.97).abs() < 1e-8 && (f.a - 0.45).abs() < 1e-6 && (f.b - 0.52).abs() < 1e-6);
        assert!((f.fidelity - 0.985).abs() < 1e-8);
    }

    #[test]
    fn seeded_sequences_repeat() {
        let r = Register::new(3, &[6]);
        let a = randomized_benchmarking(&r, RbTarget::Mode(6), &[2, 3], 3, 9).unwrap();
        let b = randomized_benchmarking(&r, RbTarget::Mode(6), &[2, 3], 3, 9).unwrap();
        assert_eq!(a, b);
        assert!(randomized_benchmarking(&r, RbTarget::Mode(6), &[3, 2], 3, 9).is_err());
    }
}
