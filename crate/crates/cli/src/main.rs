//! `ramq`: scenario runner writing CSV/JSON data files plus a run manifest.
//!
//! Exit codes: 0 success, 1 simulation or I/O failure, 2 bad usage.

mod manifest;
mod scenarios;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use ramq::tomo::Readout;
use ramq::{DeviceModel, LoadMode};
use serde_json::json;

use manifest::{RunManifest, Writer};

#[derive(Parser, Debug)]
#[command(name = "ramq", version, about = "Random-access multimode processor simulations")]
struct Cli {
    /// Device config (TOML). Defaults to the built-in 11-mode device.
    #[arg(long, global = true, env = "RAMQ_CONFIG")]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ReadoutArg {
    Direct,
    Ramsey,
}

impl From<ReadoutArg> for Readout {
    fn from(r: ReadoutArg) -> Self {
        match r {
            ReadoutArg::Direct => Readout::Direct,
            ReadoutArg::Ramsey => Readout::Ramsey,
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Transmon P_e versus flux-modulation frequency and pulse length.
    Chevron {
        /// Peak modulation amplitude (GHz).
        #[arg(long, default_value_t = 1.0)]
        eps: f64,
        #[arg(long, default_value_t = 1.6)]
        f_min: f64,
        #[arg(long, default_value_t = 2.9)]
        f_max: f64,
        /// Longest pulse (ns).
        #[arg(long, default_value_t = 400.0)]
        t_max: f64,
        /// Frequency points.
        #[arg(long, default_value_t = 131)]
        steps: usize,
        /// Duration points.
        #[arg(long, default_value_t = 101)]
        t_steps: usize,
        /// Include relaxation and dephasing.
        #[arg(long)]
        lindblad: bool,
    },
    /// Randomized benchmarking of the transmon or one mode.
    Rb {
        /// `transmon` or a mode number.
        #[arg(long, default_value = "transmon")]
        target: String,
        #[arg(long, value_delimiter = ',', default_value = "1,4,8,16,32,64,100")]
        lengths: Vec<usize>,
        #[arg(long, default_value_t = 32)]
        nseq: usize,
        /// Switch decoherence off.
        #[arg(long)]
        ideal: bool,
    },
    /// CZ process tomography on one pair or a pair list.
    CzTomo {
        #[arg(long, requires = "target", conflicts_with_all = ["pairs", "preset"])]
        control: Option<usize>,
        #[arg(long, requires = "control")]
        target: Option<usize>,
        /// File with one `control target` pair per line.
        #[arg(long, conflicts_with = "preset")]
        pairs: Option<PathBuf>,
        /// Built-in pair list (`k1569`).
        #[arg(long)]
        preset: Option<String>,
        #[arg(long, value_enum, default_value = "direct")]
        readout: ReadoutArg,
        /// Binomial sampling of each correlator.
        #[arg(long)]
        shots: Option<u64>,
        #[arg(long)]
        ideal: bool,
    },
    /// GHZ preparation: populations versus theta and the state at theta = pi/2.
    Ghz {
        #[arg(long, value_delimiter = ',', default_value = "6,9")]
        modes: Vec<usize>,
        #[arg(long, default_value_t = 21)]
        theta_steps: usize,
        #[arg(long, value_enum, default_value = "direct")]
        readout: ReadoutArg,
        #[arg(long)]
        shots: Option<u64>,
        #[arg(long)]
        ideal: bool,
    },
    /// Gate count and fidelity of a nearest-neighbour chain.
    CompareNn {
        #[arg(long, value_delimiter = ',', default_value = "0.99,0.98")]
        f_gate: Vec<f64>,
        #[arg(long, default_value_t = 9)]
        j_max: usize,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Chevron { .. } => "chevron",
            Command::Rb { .. } => "rb",
            Command::CzTomo { .. } => "cz-tomo",
            Command::Ghz { .. } => "ghz",
            Command::CompareNn { .. } => "compare-nn",
        }
    }

    fn parameters(&self) -> serde_json::Value {
        match self {
            Command::Chevron { eps, f_min, f_max, t_max, steps, t_steps, lindblad } => json!({
                "eps": eps, "f_min": f_min, "f_max": f_max, "t_max": t_max,
                "steps": steps, "t_steps": t_steps, "lindblad": lindblad,
            }),
            Command::Rb { target, lengths, nseq, ideal } => {
                json!({ "target": target, "lengths": lengths, "nseq": nseq, "ideal": ideal })
            }
            Command::CzTomo { control, target, pairs, preset, readout, shots, ideal } => json!({
                "control": control, "target": target, "pairs": pairs, "preset": preset,
                "readout": format!("{readout:?}").to_lowercase(), "shots": shots, "ideal": ideal,
            }),
            Command::Ghz { modes, theta_steps, readout, shots, ideal } => json!({
                "modes": modes, "theta_steps": theta_steps,
                "readout": format!("{readout:?}").to_lowercase(), "shots": shots, "ideal": ideal,
            }),
            Command::CompareNn { f_gate, j_max } => json!({ "f_gate": f_gate, "j_max": j_max }),
        }
    }
}

fn run(cli: Cli) -> Result<PathBuf> {
    let (device, config) = match &cli.config {
        Some(p) => (
            DeviceModel::load(p, LoadMode::Strict).with_context(|| format!("loading {}", p.display()))?,
            p.display().to_string(),
        ),
        None => (DeviceModel::default_device(), "builtin".to_string()),
    };
    let manifest = RunManifest {
        scenario: cli.command.name().to_string(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        config,
        device_hash: device.hash(),
        seed: cli.seed,
        out_dir: cli.out.display().to_string(),
        parameters: cli.command.parameters(),
        outputs: vec![],
    };
    let mut out = Writer::new(&cli.out, manifest)?;
    match cli.command {
        Command::Chevron { eps, f_min, f_max, t_max, steps, t_steps, lindblad } => {
            let args = scenarios::ChevronArgs { eps, f_min, f_max, t_max, steps, t_steps, lindblad };
            scenarios::chevron(&device, &args, &mut out)?
        }
        Command::Rb { target, lengths, nseq, ideal } => {
            let target = scenarios::parse_target(&target)?;
            scenarios::rb(&device, target, &lengths, nseq, cli.seed, ideal, &mut out)?
        }
        Command::CzTomo { control, target, pairs, preset, readout, shots, ideal } => {
            let list = match (control, target, pairs, preset) {
                (Some(c), Some(t), _, _) => vec![(c, t)],
                (_, _, Some(path), _) => {
                    let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
                    scenarios::parse_pairs(&text)?
                }
                (_, _, _, Some(name)) => scenarios::preset_pairs(&name)?,
                _ => vec![(6, 9)],
            };
            let opts = scenarios::measure_options(readout.into(), shots, cli.seed);
            scenarios::cz_tomo(&device, &list, &opts, ideal, &mut out)?
        }
        Command::Ghz { modes, theta_steps, readout, shots, ideal } => {
            let opts = scenarios::measure_options(readout.into(), shots, cli.seed);
            scenarios::ghz(&device, &modes, theta_steps, &opts, ideal, &mut out)?
        }
        Command::CompareNn { f_gate, j_max } => scenarios::compare_nn(&f_gate, j_max, &mut out)?,
    }
    out.finish()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(manifest) => {
            println!("wrote {}", manifest.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
