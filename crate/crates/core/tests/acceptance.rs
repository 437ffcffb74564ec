//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit on any
//! failure. Runs as a plain binary (`harness = false`).

use std::f64::consts::{FRAC_PI_2, PI};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use num_complex::Complex64 as C64;
use ramq::device::tridiag::eigh_tridiagonal;
use ramq::dynamics::{chevron_scan, evolve, resonant_exchange, EvolveOptions, ModelOptions, SystemModel};
use ramq::effective::bessel::J1_ARGMAX;
use ramq::effective::{NoisyRegister, Register};
use ramq::gates::{fidelity_curve, nn_gate_count, sideband_timing, Compiler, GateOp};
use ramq::hilbert::{build_hamiltonian, linalg, CMat, CVec, Coupling, QuantumState};
use ramq::pulses::{ChargePulse, Envelope, FluxPulse, Pulse, PulseSequence, Transition};
use ramq::tomo::{
    measure_correlator, mode_density, process_tomography, randomized_benchmarking, state_tomography,
    state_tomography_on, CliffordGroup, MeasureOptions, PauliString, RbTarget,
};
use ramq::DeviceModel;

struct Outcome {
    pass: bool,
    lines: Vec<String>,
}

impl Outcome {
    fn new() -> Self {
        Outcome { pass: true, lines: Vec::new() }
    }

    fn check(&mut self, ok: bool, msg: impl Into<String>) {
        let msg = msg.into();
        self.lines.push(format!("{} {msg}", if ok { "ok  " } else { "MISS" }));
        self.pass &= ok;
    }

    fn note(&mut self, msg: impl Into<String>) {
        self.lines.push(format!("     {}", msg.into()));
    }
}

fn ideal() -> DeviceModel {
    DeviceModel::default_device().without_decoherence()
}

fn c1_rate_law(o: &mut Outcome) {
    let dev = ideal().with_config(|c| c.transmon.dc_shift_coeff = 0.0).unwrap();
    let opts = EvolveOptions::default();
    for k in [1, 6, 9] {
        let model = SystemModel::new(&dev, &[k], ModelOptions::default()).unwrap();
        let nu = dev.spectrum.nu(k) - dev.transmon.nu_q0;
        for (x, tol) in [(0.1, 0.02), (0.3, 0.02), (0.5, 0.02), (1.0, 0.05), (J1_ARGMAX, 0.05)] {
            let fit = resonant_exchange(&model, k, 2.0 * x * nu, &opts).unwrap();
            o.check(
                fit.relative_error() <= tol,
                format!(
                    "mode {k} x={:.3}: exchange {:.5} GHz vs 2gJ1 {:.5} GHz, error {:.2}% (tol {}%)",
                    fit.modulation_index(),
                    fit.frequency,
                    fit.predicted,
                    100.0 * fit.relative_error(),
                    100.0 * tol
                ),
            );
        }
    }
}

fn c2_vacuum_rabi(o: &mut Outcome) {
    let dev = ideal();
    let model = SystemModel::new(&dev, &[6], ModelOptions::default()).unwrap();
    let eps = 2.0 * 0.22 * (dev.spectrum.nu(6) - dev.transmon.nu_q0);
    let opts = EvolveOptions::default();
    let fit = resonant_exchange(&model, 6, eps, &opts).unwrap();
    let half = 1.0 / (2.0 * fit.frequency);
    let map = chevron_scan(&model, &[fit.nu_sb], &[half], eps, &opts).unwrap();
    let p = map.p_e[0][0];
    o.check(p <= 0.01, format!("mode 6, x=0.22, nu_sb {:.5} GHz: P_e = {p:.2e} at t = {half:.1} ns", fit.nu_sb));
}

fn c3_oracle(o: &mut Outcome) {
    let dev = ideal().with_config(|c| c.array.g_q = 0.22).unwrap();
    let (a, b) = (1, 9);
    let t = Instant::now();
    let mut c = Compiler::new(&dev, &[a, b]).unwrap();
    o.note(format!("toy device: transmon + modes {a}, {b}, g_q = 0.22 GHz; tune-up {:.0} s", t.elapsed().as_secs_f64()));
    let mut ops = Vec::new();
    for m in [a, b] {
        for tr in [Transition::Ge, Transition::Ef] {
            ops.push(GateOp::ModeISwap { mode: m, transition: tr });
        }
        for (theta, phi) in [(FRAC_PI_2, 0.0), (FRAC_PI_2, PI), (FRAC_PI_2, FRAC_PI_2), (FRAC_PI_2, -FRAC_PI_2), (PI, 0.0), (PI, FRAC_PI_2)] {
            ops.push(GateOp::SingleMode { mode: m, theta, phi });
        }
    }
    for (j, k) in [(a, b), (b, a)] {
        ops.push(GateOp::Cz { control: j, target: k });
        ops.push(GateOp::Cx { control: j, target: k });
        ops.push(GateOp::Cy { control: j, target: k });
    }
    ops.push(GateOp::Swap { a, b });
    ops.push(GateOp::Ghz { modes: vec![a, b], theta: FRAC_PI_2 });
    for op in &ops {
        if !matches!(op, GateOp::ModeISwap { .. }) {
            c.calibrate_gate(op).unwrap();
        }
    }
    let mut worst = (1.0f64, String::new());
    for op in &ops {
        let f = c.oracle_fidelity(op).unwrap();
        if f < worst.0 {
            worst = (f, format!("{op:?}"));
        }
        o.check(f >= 0.99, format!("{op:?}: {f:.5}"));
    }
    o.note(format!("lowest: {:.5} ({})", worst.0, worst.1));
    let off = c.with_phase_calibration(false);
    for op in [GateOp::Cz { control: a, target: b }, GateOp::Cz { control: b, target: a }] {
        let f = off.oracle_fidelity(&op).unwrap();
        o.check(f < 0.95, format!("{op:?} with calibration off: {f:.4}"));
    }
}

const RB_LENGTHS: [usize; 7] = [1, 4, 8, 16, 32, 64, 100];

fn c4_rb(o: &mut Outcome) {
    let dev = DeviceModel::default_device();
    let timing = sideband_timing(&dev).unwrap();
    let ge: Vec<f64> = dev.active_modes.iter().map(|&k| timing.swap_duration(k, Transition::Ge).unwrap()).collect();
    let (lo, hi) = ge.iter().fold((f64::INFINITY, 0.0f64), |(l, h), &d| (l.min(d), h.max(d)));
    o.check((20.0..=100.0).contains(&lo) && (20.0..=100.0).contains(&hi), format!("g-e iSWAP durations {lo:.0}-{hi:.0} ns"));
    let c = dev.config().coherence.clone();
    o.note(format!("transmon T1 {} us, T2 {} us", c.t1_transmon, c.t2_transmon));
    let f = randomized_benchmarking(&NoisyRegister::new(&dev, &[6], timing.clone()), RbTarget::Transmon, &RB_LENGTHS, 32, 1)
        .unwrap()
        .fidelity()
        .unwrap();
    o.check((f - 0.989).abs() <= 0.013, format!("transmon RB {f:.4} (target 0.989 +- 0.013)"));
    for &k in &dev.active_modes {
        let (t1, t2) = (c.t1_mode[k - 1], c.t2_mode[k - 1]);
        let in_range = (1.0..=5.0).contains(&t1) && (1.0..=8.5).contains(&t2);
        let reg = NoisyRegister::new(&dev, &[k], timing.clone());
        let f = randomized_benchmarking(&reg, RbTarget::Mode(k), &RB_LENGTHS, 32, 1).unwrap().fidelity().unwrap();
        o.check(
            in_range && (0.86..=0.97).contains(&f),
            format!("mode {k} (T1 {t1} us, T2 {t2} us, iSWAP {:.0} ns): RB {f:.4}", ge[k - 1]),
        );
    }
}

fn c5_cz_tomography(o: &mut Outcome) {
    let op = GateOp::Cz { control: 6, target: 9 };
    let modes = [6, 9];
    let ideal_u = op.ideal_matrix(&modes).unwrap().unwrap();
    let reg = Register::new(3, &modes);
    let t = process_tomography(&reg, &op.primitives(), &ideal_u, &modes, &MeasureOptions::default()).unwrap();
    o.check((t.fidelity - 1.0).abs() <= 1e-6, format!("effective CZ(6,9): F = {:.9}", t.fidelity));
    let dev = DeviceModel::default_device();
    let lossy = NoisyRegister::new(&dev, &modes, sideband_timing(&dev).unwrap());
    let dur = lossy.timing.total(&op.primitives()).unwrap();
    o.check((250.0..=400.0).contains(&dur), format!("CZ(6,9) duration {dur:.0} ns"));
    let t = process_tomography(&lossy, &op.primitives(), &ideal_u, &modes, &MeasureOptions::direct()).unwrap();
    o.check((0.70..=0.90).contains(&t.fidelity), format!("Lindblad CZ(6,9): F = {:.4}", t.fidelity));
}

fn c6_nn(o: &mut Outcome) {
    let mut ok = true;
    let mut rows = Vec::new();
    for j in 2..=9 {
        ok &= nn_gate_count(j).unwrap() == 2 * j - 3;
        let mut row = format!("j={j}: {}", 2 * j - 3);
        for f in [0.98f64, 0.99] {
            let expected = (0..2 * j - 3).fold(1.0, |acc, _| acc * f);
            let got = fidelity_curve(f, j).unwrap();
            ok &= (got - expected).abs() <= 1e-12;
            row.push_str(&format!(" {got:.6}"));
        }
        rows.push(row);
    }
    o.check(ok, "counts 2j-3 and F^(2j-3), j = 2..9, F in {0.98, 0.99}");
    o.note(rows.join("; "));
}

fn c7_ghz(o: &mut Outcome) {
    let pool = [1, 2, 3, 4, 5, 6, 7];
    for n in 2..=7 {
        let modes = &pool[..n];
        let reg = Register::new(3, modes);
        let prep = GateOp::Ghz { modes: modes.to_vec(), theta: FRAC_PI_2 }.primitives();
        let state = reg.run(&reg.ground(), &prep).unwrap();
        let worst = modes
            .iter()
            .map(|&m| (mode_density(&reg, &state, &[m]).unwrap()[(1, 1)].re - 0.5).abs())
            .fold(0.0f64, f64::max);
        let xs = PauliString::parse(&"X".repeat(n)).unwrap();
        let parity = measure_correlator(&reg, &prep, &xs, modes, &MeasureOptions::default()).unwrap();
        o.check(
            worst <= 1e-9 && (parity.abs() - 1.0).abs() <= 1e-9,
            format!("effective GHZ, {n} modes: |p1 - 0.5| <= {worst:.1e}, <X..X> = {parity:+.9}"),
        );
    }
    let bell = GateOp::Ghz { modes: vec![6, 9], theta: FRAC_PI_2 };
    let mut c = Compiler::new(&ideal(), &[6, 9]).unwrap();
    c.calibrate_gate(&bell).unwrap();
    let f = c.gate_fidelity(&bell).unwrap();
    o.check(f >= 0.99, format!("pulse-level Bell(6,9), ideal: F = {f:.5}"));
    let dev = DeviceModel::default_device();
    let lossy = NoisyRegister::new(&dev, &[6, 9], sideband_timing(&dev).unwrap());
    let t = state_tomography(&lossy, &bell.primitives(), &[6, 9], &MeasureOptions::direct()).unwrap();
    let f = t.fidelity_to(&bell.ideal_state(&[6, 9]).unwrap().unwrap());
    o.check((0.70..=0.90).contains(&f), format!("Lindblad Bell(6,9): F = {f:.4}"));
}

fn c8_properties(o: &mut Outcome) {
    let dev = DeviceModel::default_device();
    for coupling in [Coupling::Rwa, Coupling::Full] {
        let h = build_hamiltonian(&dev, &[1, 6, 11], dev.transmon.nu_q0, coupling).unwrap();
        let e = h.hermiticity_error();
        o.check(e <= 1e-12, format!("Hermiticity ({coupling:?}): {e:.1e}"));
    }
    let n = dev.n_modes();
    let diag = vec![dev.config().array.nu_r; n];
    let off = vec![dev.config().array.g_r; n - 1];
    let vecs = eigh_tridiagonal(&diag, &off).unwrap().vectors;
    let mut e = 0.0f64;
    for (i, a) in vecs.iter().enumerate() {
        for (j, b) in vecs.iter().enumerate() {
            let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
            e = e.max((dot - if i == j { 1.0 } else { 0.0 }).abs());
        }
    }
    o.check(e <= 1e-12, format!("array eigenvector orthonormality: {e:.1e}"));
    let model = SystemModel::new(&dev, &[2, 6, 9], ModelOptions::gate_level()).unwrap();
    let w = model.dressed_basis();
    let e = linalg::max_abs(&(w.adjoint() * w - CMat::identity(w.ncols(), w.ncols())));
    o.check(e <= 1e-12, format!("dressed basis orthonormality: {e:.1e}"));

    // drift over one busy microsecond
    let ideal_dev = ideal();
    let pure_model = SystemModel::new(&ideal_dev, &[6], ModelOptions::gate_level()).unwrap();
    let seq = busy_sequence(&ideal_dev);
    let us = seq.duration() / 1000.0;
    let init = superposition(&pure_model);
    for dt in [0.01, 0.002] {
        let opts = EvolveOptions { dt, ..EvolveOptions::default() };
        let drift = (evolve(&pure_model, &init, &seq, &opts).unwrap().final_state.trace() - 1.0).abs() / us;
        if dt == 0.01 {
            o.note(format!("norm drift at the default step {dt} ns: {drift:.1e} per us"));
        } else {
            o.check(drift <= 1e-8, format!("norm drift at dt = {dt} ns: {drift:.1e} per us"));
        }
    }
    let lossy_model = SystemModel::new(&dev, &[6], ModelOptions::default()).unwrap();
    let opts = EvolveOptions { lindblad: true, ..EvolveOptions::default() };
    let drift = (evolve(&lossy_model, &superposition(&lossy_model), &seq, &opts).unwrap().final_state.trace() - 1.0).abs() / us;
    o.check(drift <= 1e-8, format!("Lindblad trace drift at dt = 0.01 ns: {drift:.1e} per us"));

    // convergence order
    let mut short = PulseSequence::new();
    let nu_sb = ideal_dev.spectrum.nu(6) - ideal_dev.transmon.nu_q0;
    short.append(Pulse::Flux(FluxPulse::new(nu_sb, 2.0, 0.3, Envelope::square(20.0))), 0.0).unwrap();
    let order_model = SystemModel::new(&ideal_dev, &[6], ModelOptions::default()).unwrap();
    let init = superposition(&order_model);
    let run = |dt: f64| {
        let opts = EvolveOptions { dt, ..EvolveOptions::default() };
        evolve(&order_model, &init, &short, &opts).unwrap().final_state.as_pure().unwrap().clone()
    };
    let reference = run(0.001);
    let err: Vec<f64> = [0.04, 0.02, 0.01].iter().map(|&dt| (run(dt) - &reference).norm()).collect();
    let orders: Vec<f64> = err.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    o.check(
        orders.iter().all(|p| (3.6..4.4).contains(p)),
        format!("RK4 observed order {:.2}, {:.2} (dt 0.04 / 0.02 / 0.01 ns)", orders[0], orders[1]),
    );

    let g = CliffordGroup::get();
    let closed = g.len() == 24
        && (0..24).all(|a| {
            let mut row = g.compose[a].clone();
            row.sort_unstable();
            row == (0..24).collect::<Vec<_>>() && g.compose[a][g.inverse[a]] == 0
        });
    o.check(closed, "Clifford group: 24 elements, closed, inverses");

    let modes = [6, 9];
    let reg = Register::new(3, &modes);
    let mut prep = GateOp::Ghz { modes: modes.to_vec(), theta: 1.1 }.primitives();
    prep.extend(GateOp::SingleMode { mode: 9, theta: 0.4, phi: 1.3 }.primitives());
    let lossy = NoisyRegister::new(&dev, &modes, sideband_timing(&dev).unwrap());
    let mixed = lossy.run(&lossy.register.ground(), &prep).unwrap();
    let truth = mode_density(&reg, &mixed, &modes).unwrap();
    let t = state_tomography_on(&reg, &mixed, &modes, &MeasureOptions::direct()).unwrap();
    let e = linalg::max_abs(&(&t.raw - &truth));
    o.check(e <= 1e-8, format!("tomography round-trip (mixed 2-mode state): {e:.1e}"));
}

fn busy_sequence(dev: &DeviceModel) -> PulseSequence {
    let nu_sb = dev.spectrum.nu(6) - dev.transmon.nu_q0;
    let kick = ChargePulse::for_rotation(Transition::Ge, dev.transmon.nu_q0, 1.3, 0.2, Envelope::gaussian(30.0, 2.0));
    let mut seq = PulseSequence::new();
    seq.append(Pulse::Charge(kick.clone()), 0.0).unwrap();
    seq.append(Pulse::Flux(FluxPulse::new(nu_sb, 0.8, 0.0, Envelope::square(450.0))), 5.0).unwrap();
    seq.append(Pulse::Charge(kick), 5.0).unwrap();
    seq.append(Pulse::Flux(FluxPulse::new(nu_sb + 0.01, 0.5, 1.0, Envelope::gaussian(470.0, 2.0))), 5.0).unwrap();
    seq
}

fn superposition(model: &SystemModel) -> QuantumState {
    let mut psi = CVec::zeros(model.layout().total_dim());
    for (k, lv) in [[0, 0], [1, 0], [0, 1], [2, 0]].iter().enumerate() {
        psi[model.layout().index(lv)] = C64::from_polar(1.0 + k as f64, 0.7 * k as f64);
    }
    QuantumState::pure_normalized(model.layout(), psi).unwrap()
}

type Criterion = (&'static str, fn(&mut Outcome), Duration);

fn main() {
    let criteria: [Criterion; 8] = [
        ("1 sideband-rate law", c1_rate_law, Duration::from_secs(300)),
        ("2 stimulated vacuum Rabi contrast", c2_vacuum_rabi, Duration::from_secs(60)),
        ("3 oracle equivalence (toy device)", c3_oracle, Duration::from_secs(600)),
        ("4 RB reproduction band", c4_rb, Duration::from_secs(600)),
        ("5 CZ process tomography", c5_cz_tomography, Duration::from_secs(600)),
        ("6 random-access advantage curve", c6_nn, Duration::from_secs(1)),
        ("7 GHZ", c7_ghz, Duration::from_secs(300)),
        ("8 property suites", c8_properties, Duration::from_secs(300)),
    ];
    let only: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut summary = Vec::new();
    let mut all = true;
    for (name, run, budget) in criteria {
        if !only.is_empty() && !only.iter().any(|f| name.starts_with(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let mut o = Outcome::new();
        let result = catch_unwind(AssertUnwindSafe(|| run(&mut o)));
        let took = start.elapsed();
        if let Err(e) = result {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            o.check(false, format!("panicked: {}", msg.unwrap_or_default()));
        }
        o.check(took <= budget, format!("runtime {:.1} s (budget {} s)", took.as_secs_f64(), budget.as_secs()));
        println!("criterion {name}");
        for l in &o.lines {
            println!("  {l}");
        }
        let line = format!("{} criterion {name} ({:.1} s)", if o.pass { "PASS" } else { "FAIL" }, took.as_secs_f64());
        println!("{line}\n");
        summary.push(line);
        all &= o.pass;
    }
    println!("acceptance summary");
    for l in &summary {
        println!("{l}");
    }
    if !all {
        std::process::exit(1);
    }
}
