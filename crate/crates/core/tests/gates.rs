use std::f64::consts::PI;
use std::sync::OnceLock;

use ramq::gates::{fidelity_curve, nn_gate_count, process_fidelity, Compiler, GateOp};
use ramq::DeviceModel;

const CZ: GateOp = GateOp::Cz { control: 6, target: 9 };
const ZC: GateOp = GateOp::Cz { control: 9, target: 6 };

/// Modes 6 and 9 of the default device, decoherence off, both CZ
/// directions calibrated.
fn compiler() -> &'static Compiler {
    static C: OnceLock<Compiler> = OnceLock::new();
    C.get_or_init(|| {
        let mut c = Compiler::new(&DeviceModel::default_device().without_decoherence(), &[6, 9]).unwrap();
        c.calibrate_gate(&CZ).unwrap();
        c.calibrate_gate(&ZC).unwrap();
        c
    })
}

#[test]
fn cz_duration_and_fidelity() {
    let c = compiler();
    let t = c.compile(&CZ).unwrap().duration();
    assert!((250.0..=400.0).contains(&t), "{t} ns");
    assert!(c.gate_fidelity(&CZ).unwrap() >= 0.999);
}

#[test]
fn switching_calibration_off_breaks_cz() {
    let f = compiler().with_phase_calibration(false).gate_fidelity(&CZ).unwrap();
    assert!(f < 0.95, "{f}");
}

#[test]
fn recalibration_is_idempotent() {
    let c = compiler();
    let again = c.recalibrated().unwrap();
    let d = c.calibration().max_offset_change(again.calibration());
    assert!(d <= 1e-3, "{d}");
}

#[test]
fn conditional_phase_and_leakage() {
    let c = compiler();
    let seq = c.compile(&CZ).unwrap();
    let u = c.block(&seq, &c.gate_states(&[6, 9]).unwrap()).unwrap();
    let phase = (u[(3, 3)] * u[(0, 0)] / (u[(1, 1)] * u[(2, 2)])).arg();
    assert!((phase.abs() - PI).abs() <= 0.01, "{phase}");
    // population left outside the qubit space, transmon included
    for col in 0..4 {
        let kept: f64 = (0..4).map(|r| u[(r, col)].norm_sqr()).sum();
        assert!(1.0 - kept <= 1e-3, "input {col}: {kept}");
    }
}

#[test]
fn both_cz_directions_agree() {
    let c = compiler();
    let states = c.gate_states(&[6, 9]).unwrap();
    let a = c.block(&c.compile(&CZ).unwrap(), &states).unwrap();
    let b = c.block(&c.compile(&ZC).unwrap(), &states).unwrap();
    assert!(process_fidelity(&a, &b) >= 0.999);
}

#[test]
fn nearest_neighbour_overhead() {
    for j in 2..=9 {
        assert_eq!(nn_gate_count(j).unwrap(), 2 * j - 3);
        for f in [0.98f64, 0.99] {
            let expected = (0..2 * j - 3).fold(1.0, |acc, _| acc * f);
            assert!((fidelity_curve(f, j).unwrap() - expected).abs() <= 1e-12);
        }
    }
    assert!(nn_gate_count(1).is_err());
}
