use std::f64::consts::{FRAC_PI_2, PI};

use anyhow::{bail, Context, Result};
use ramq::dynamics::{chevron_scan, resonant_exchange, EvolveOptions, ModelOptions, SystemModel};
use ramq::effective::{NoisyRegister, Register};
use ramq::gates::{fidelity_curve, nn_gate_count, sideband_timing, GateOp};
use ramq::tomo::{
    measure_correlator_on, mode_density, process_tomography, randomized_benchmarking, state_tomography_on, Backend,
    MeasureOptions, PauliString, RbTarget, Readout,
};
use ramq::DeviceModel;
use serde_json::json;

use crate::manifest::Writer;

const PRESET_K1569: &str = include_str!("../presets/cz_pairs_k1569.txt");

pub struct ChevronArgs {
    pub eps: f64,
    pub f_min: f64,
    pub f_max: f64,
    pub t_max: f64,
    pub steps: usize,
    pub t_steps: usize,
    pub lindblad: bool,
}

fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

pub fn chevron(dev: &DeviceModel, a: &ChevronArgs, out: &mut Writer) -> Result<()> {
    if !(a.f_max > a.f_min && a.f_min > 0.0) || a.steps == 0 || a.t_steps == 0 || !(a.t_max > 0.0) {
        bail!("need 0 < f-min < f-max, t-max > 0 and nonzero step counts");
    }
    let all: Vec<usize> = (1..=dev.n_modes()).collect();
    let model = SystemModel::new(dev, &all, ModelOptions::capped(1))?;
    let opts = EvolveOptions { lindblad: a.lindblad, ..EvolveOptions::default() };
    let map = chevron_scan(&model, &grid(a.f_min, a.f_max, a.steps), &grid(0.0, a.t_max, a.t_steps), a.eps, &opts)?;
    out.write("chevron.csv", &map.to_csv())?;

    let ideal = dev.without_decoherence();
    let mut fits =
        String::from("mode,eps_GHz,nu_sb_GHz,modulation_index,exchange_GHz,predicted_GHz,relative_error\n");
    for k in 1..=dev.n_modes() {
        let single = SystemModel::new(&ideal, &[k], ModelOptions::default())?;
        let f = resonant_exchange(&single, k, a.eps, &EvolveOptions::default())?;
        fits.push_str(&format!(
            "{k},{},{},{},{},{},{}\n",
            f.eps,
            f.nu_sb,
            f.modulation_index(),
            f.frequency,
            f.predicted,
            f.relative_error()
        ));
    }
    out.write("chevron_fits.csv", &fits)
}

fn lossy(dev: &DeviceModel, modes: &[usize], ideal: bool) -> Result<NoisyRegister> {
    let d = if ideal { dev.without_decoherence() } else { dev.clone() };
    let timing = sideband_timing(&d)?;
    Ok(NoisyRegister::new(&d, modes, timing))
}

pub fn parse_target(s: &str) -> Result<RbTarget> {
    match s {
        "transmon" | "q" => Ok(RbTarget::Transmon),
        _ => {
            let k = s.strip_prefix("mode").unwrap_or(s).trim_start_matches([':', '=']);
            Ok(RbTarget::Mode(k.parse().with_context(|| format!("target `{s}`: expected `transmon` or a mode number"))?))
        }
    }
}

pub fn rb(dev: &DeviceModel, target: RbTarget, lengths: &[usize], nseq: usize, seed: u64, ideal: bool, out: &mut Writer) -> Result<()> {
    let modes = match target {
        RbTarget::Transmon => vec![],
        RbTarget::Mode(k) => {
            dev.require_active(k)?;
            vec![k]
        }
    };
    let reg = lossy(dev, &modes, ideal)?;
    let r = randomized_benchmarking(&reg, target, lengths, nseq, seed)?;
    out.write("rb_survival.csv", &r.to_csv())?;
    let mut per_seq = String::from("sequence,m,survival\n");
    for (s, row) in r.per_sequence.iter().enumerate() {
        for (m, y) in r.lengths.iter().zip(row) {
            per_seq.push_str(&format!("{s},{m},{y}\n"));
        }
    }
    out.write("rb_sequences.csv", &per_seq)?;
    out.write_json("rb_fit.json", &json!({ "target": r.target, "n_seq": nseq, "fit": r.fit }))
}

pub fn parse_pairs(text: &str) -> Result<Vec<(usize, usize)>> {
    let mut pairs = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let v: Vec<&str> = line.split(|c: char| c.is_whitespace() || c == ',').filter(|s| !s.is_empty()).collect();
        match v.as_slice() {
            [c, t] => pairs.push((
                c.parse().with_context(|| format!("line {}: bad control", i + 1))?,
                t.parse().with_context(|| format!("line {}: bad target", i + 1))?,
            )),
            _ => bail!("line {}: expected `control target`", i + 1),
        }
    }
    if pairs.is_empty() {
        bail!("pair list is empty");
    }
    Ok(pairs)
}

pub fn preset_pairs(name: &str) -> Result<Vec<(usize, usize)>> {
    match name {
        "k1569" => parse_pairs(PRESET_K1569),
        _ => bail!("unknown preset `{name}` (available: k1569)"),
    }
}

pub fn cz_tomo(dev: &DeviceModel, pairs: &[(usize, usize)], opts: &MeasureOptions, ideal: bool, out: &mut Writer) -> Result<()> {
    let mut csv = String::from("control,target,duration_ns,fidelity,raw_fidelity\n");
    let mut records = Vec::new();
    for &(c, t) in pairs {
        let op = GateOp::Cz { control: c, target: t };
        op.validate(dev)?;
        let modes = [c, t];
        let reg = lossy(dev, &modes, ideal)?;
        let prims = op.primitives();
        let target = op.ideal_matrix(&modes)?.expect("CZ has a matrix");
        let tomo = process_tomography(&reg, &prims, &target, &modes, opts)?;
        let dur = reg.timing.total(&prims)?;
        let raw = tomo.ideal.fidelity(&tomo.raw);
        csv.push_str(&format!("{c},{t},{dur},{},{raw}\n", tomo.fidelity));
        records.push(json!({ "control": c, "target": t, "duration_ns": dur, "tomography": tomo.to_json() }));
    }
    out.write("cz_tomo.csv", &csv)?;
    out.write_json("cz_tomo.json", &json!({ "readout": opts.readout, "pairs": records }))
}

pub fn ghz(dev: &DeviceModel, modes: &[usize], steps: usize, opts: &MeasureOptions, ideal: bool, out: &mut Writer) -> Result<()> {
    if modes.len() < 2 {
        bail!("GHZ needs at least two modes");
    }
    if steps < 2 {
        bail!("theta-steps must be at least 2");
    }
    GateOp::Ghz { modes: modes.to_vec(), theta: FRAC_PI_2 }.validate(dev)?;
    let reg = lossy(dev, modes, ideal)?;
    let register: &Register = reg.register();
    let xs = PauliString::parse(&"X".repeat(modes.len()))?;
    let mut header = String::from("theta");
    for m in modes {
        header.push_str(&format!(",P1_m{m}"));
    }
    header.push_str(",P_all0,P_all1,parity_X\n");
    let mut csv = header;
    let last = (1usize << modes.len()) - 1;
    for i in 0..steps {
        let theta = PI * i as f64 / (steps - 1) as f64;
        let prims = GateOp::Ghz { modes: modes.to_vec(), theta }.primitives();
        let state = reg.execute(&register.ground(), &prims)?;
        csv.push_str(&format!("{theta}"));
        for &m in modes {
            csv.push_str(&format!(",{}", mode_density(register, &state, &[m])?[(1, 1)].re));
        }
        let rho = mode_density(register, &state, modes)?;
        let parity = measure_correlator_on(&reg, &state, &xs, modes, opts, i as u64)?;
        csv.push_str(&format!(",{},{},{parity}\n", rho[(0, 0)].re, rho[(last, last)].re));
    }
    out.write("ghz_theta.csv", &csv)?;

    let op = GateOp::Ghz { modes: modes.to_vec(), theta: FRAC_PI_2 };
    let state = reg.execute(&register.ground(), &op.primitives())?;
    let target = op.ideal_state(modes)?.expect("GHZ has a target state");
    let rho = mode_density(register, &state, modes)?;
    let fidelity = target.dotc(&(&rho * &target)).re;
    let mut summary = json!({
        "modes": modes,
        "duration_ns": reg.timing.total(&op.primitives())?,
        "fidelity": fidelity,
    });
    if modes.len() <= 4 {
        let t = state_tomography_on(&reg, &state, modes, opts)?;
        summary["tomography_fidelity"] = json!(t.fidelity_to(&target));
        summary["tomography"] = t.to_json();
    }
    out.write_json("ghz.json", &summary)
}

pub fn compare_nn(f_gates: &[f64], j_max: usize, out: &mut Writer) -> Result<()> {
    if j_max < 2 {
        bail!("j-max must be at least 2");
    }
    let mut csv = String::from("j,nn_gates");
    for f in f_gates {
        csv.push_str(&format!(",F_nn_{f}"));
    }
    csv.push('\n');
    for j in 2..=j_max {
        csv.push_str(&format!("{j},{}", nn_gate_count(j)?));
        for &f in f_gates {
            csv.push_str(&format!(",{}", fidelity_curve(f, j)?));
        }
        csv.push('\n');
    }
    out.write("compare_nn.csv", &csv)
}

pub fn measure_options(readout: Readout, shots: Option<u64>, seed: u64) -> MeasureOptions {
    MeasureOptions { readout, shots, seed }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_lists_targets_1_5_6_9() {
        let p = preset_pairs("k1569").unwrap();
        assert_eq!(p.len(), 32);
        assert!(p.iter().all(|(c, t)| c != t && [1, 5, 6, 9].contains(t)));
    }

    #[test]
    fn pair_parsing() {
        assert_eq!(parse_pairs("6 9\n# note\n1,5 # trailing\n").unwrap(), vec![(6, 9), (1, 5)]);
        assert!(parse_pairs("6\n").is_err());
        assert!(parse_pairs("# nothing\n").is_err());
    }

    #[test]
    fn targets() {
        assert_eq!(parse_target("transmon").unwrap(), RbTarget::Transmon);
        assert_eq!(parse_target("6").unwrap(), RbTarget::Mode(6));
        assert_eq!(parse_target("mode:9").unwrap(), RbTarget::Mode(9));
        assert!(parse_target("x").is_err());
    }
}
