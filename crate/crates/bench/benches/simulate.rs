use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use ramq::dynamics::{evolve, EvolveOptions, ModelOptions, SystemModel};
use ramq::effective::{NoisyRegister, Register};
use ramq::gates::{sideband_timing, GateOp};
use ramq::hilbert::QuantumState;
use ramq::pulses::{Envelope, FluxPulse, Pulse, PulseSequence};
use ramq::tomo::{process_tomography, randomized_benchmarking, MeasureOptions, RbTarget};
use ramq::DeviceModel;

fn sideband(dev: &DeviceModel, mode: usize, duration: f64) -> PulseSequence {
    let nu = dev.spectrum.nu(mode) - dev.transmon.nu_q0;
    let mut seq = PulseSequence::new();
    seq.append(Pulse::Flux(FluxPulse::new(nu, 0.44 * nu, 0.0, Envelope::square(duration))), 0.0).unwrap();
    seq
}

fn pulse_level(c: &mut Criterion) {
    let dev = DeviceModel::default_device();
    let mut g = c.benchmark_group("evolve_100ns");
    g.sample_size(10);
    for (name, modes, opts) in [
        ("pure_1mode_gate_level", vec![6], ModelOptions::gate_level()),
        ("pure_2mode_gate_level", vec![6, 9], ModelOptions::gate_level()),
    ] {
        let model = SystemModel::new(&dev, &modes, opts).unwrap();
        let init = QuantumState::basis(model.layout(), &vec![1; 1].into_iter().chain(vec![0; modes.len()]).collect::<Vec<_>>());
        let seq = sideband(&dev, 6, 100.0);
        g.bench_function(name, |b| b.iter(|| evolve(&model, black_box(&init), &seq, &EvolveOptions::default()).unwrap()));
    }
    let model = SystemModel::new(&dev, &[6], ModelOptions::default()).unwrap();
    let init = QuantumState::basis(model.layout(), &[1, 0]);
    let seq = sideband(&dev, 6, 100.0);
    let opts = EvolveOptions { lindblad: true, ..EvolveOptions::default() };
    g.bench_function("lindblad_1mode", |b| b.iter(|| evolve(&model, black_box(&init), &seq, &opts).unwrap()));
    g.finish();
}

fn gate_level(c: &mut Criterion) {
    let dev = DeviceModel::default_device();
    let timing = sideband_timing(&dev).unwrap();
    let modes = [6, 9];
    let cz = GateOp::Cz { control: 6, target: 9 };
    let target = cz.ideal_matrix(&modes).unwrap().unwrap();
    let mut g = c.benchmark_group("effective");
    g.sample_size(10);
    g.bench_function("cz_process_tomography_ideal", |b| {
        let reg = Register::new(3, &modes);
        b.iter(|| process_tomography(&reg, &cz.primitives(), &target, &modes, &MeasureOptions::default()).unwrap())
    });
    g.bench_function("cz_process_tomography_lossy", |b| {
        b.iter(|| {
            // fresh register, so channel caching does not hide the cost
            let reg = NoisyRegister::new(&dev, &modes, timing.clone());
            process_tomography(&reg, &cz.primitives(), &target, &modes, &MeasureOptions::direct()).unwrap()
        })
    });
    g.bench_function("mode_rb_8_sequences", |b| {
        let reg = NoisyRegister::new(&dev, &[6], timing.clone());
        b.iter(|| randomized_benchmarking(&reg, RbTarget::Mode(6), &[1, 8, 32], 8, black_box(1)).unwrap())
    });
    g.finish();
}

criterion_group!(benches, pulse_level, gate_level);
criterion_main!(benches);
