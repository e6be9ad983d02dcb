use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rtd_sim::artifacts::{create_dir, Table};
use rtd_sim::chi::chi_sweep;
use rtd_sim::driver::{resonance_of, run_stationary, run_transient_from, EngineChoice, StationaryResult};
use rtd_sim::{RunConfig, SimError, SimResult};

#[derive(Parser)]
#[command(version, about = "Stationary and transient resonant tunneling diode simulations")]
struct Cli {
    /// TOML run configuration; every key is optional.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Use the fine meshes and the long horizon of the full-scale study.
    #[arg(long, global = true)]
    full_scale: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Self-consistent stationary state.
    Stationary {
        #[arg(long, value_enum, default_value_t = EngineChoice::Oma)]
        engine: EngineChoice,
        /// Bias in eV; the configured initial bias when absent.
        #[arg(long, allow_negative_numbers = true)]
        bias: Option<f64>,
        /// Start the Gummel loop from a stored stationary run.
        #[arg(long)]
        warm_start: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Time-dependent run under the configured bias schedule.
    Transient {
        #[arg(long, value_enum, default_value_t = EngineChoice::Oma)]
        engine: EngineChoice,
        /// Stored stationary run at the initial bias; computed with the
        /// one-mode engine when absent.
        #[arg(long)]
        warm_start: Option<PathBuf>,
        /// Number of evenly spaced k-space scans.
        #[arg(long, default_value_t = 20)]
        snapshots: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Resonance of a stored stationary potential.
    Resonance {
        #[arg(long)]
        from: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare the closed-form peak integrals with adaptive quadrature.
    ChiCheck {
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn load_config(cli: &Cli) -> SimResult<RunConfig> {
    let cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let cfg = if cli.full_scale { cfg.full_scale() } else { cfg };
    cfg.validate()?;
    Ok(cfg)
}

fn warm_start(dir: Option<&Path>) -> SimResult<Option<StationaryResult>> {
    dir.map(StationaryResult::load).transpose()
}

fn run(cli: Cli) -> SimResult<()> {
    let cfg = load_config(&cli)?;
    match cli.command {
        Command::Stationary { engine, bias, warm_start: from, out } => {
            let start = warm_start(from.as_deref())?;
            let bias = bias.unwrap_or(cfg.bias.initial);
            let result = run_stationary(&cfg, engine, bias, start.as_ref().map(|s| s.potential.as_slice()))?;
            result.save(&out, &cfg)?;
            println!(
                "{engine} stationary at B = {bias} eV: {} Gummel iterations, E = {:.6} eV, Gamma = {:.3e} eV, {:.2} s",
                result.iterations(),
                result.energy,
                result.width,
                result.seconds
            );
        }
        Command::Transient { engine, warm_start: from, snapshots, out } => {
            let initial = match warm_start(from.as_deref())? {
                Some(s) if (s.bias - cfg.bias.initial).abs() > 1e-12 => {
                    return Err(SimError::Usage(format!(
                        "warm start is at B = {} eV but the schedule starts at {} eV",
                        s.bias, cfg.bias.initial
                    )))
                }
                Some(s) => s,
                None => run_stationary(&cfg, EngineChoice::Oma, cfg.bias.initial, None)?,
            };
            let target = run_stationary(&cfg, EngineChoice::Oma, cfg.bias.target, Some(&initial.potential))?;
            let result = run_transient_from(&cfg, engine, &initial, Some(&target), snapshots)?;
            result.save(&out, &cfg, &cfg.device()?)?;
            let last = result.records().last().expect("at least the initial record");
            println!(
                "{engine} transient: {} steps, {} CN solves, final charge {:.6e} nm^-2, {:.2} s",
                last.step, result.run.cn_solves, last.charge, result.seconds
            );
        }
        Command::Resonance { from, out } => {
            let stored = StationaryResult::load(&from)?;
            let device = cfg.device()?;
            let (e0, res) = resonance_of(&device, &cfg, stored.bias, &stored.potential)?;
            create_dir(&out)?;
            let mode = res.l2_mode(device.dx());
            let re: Vec<f64> = mode.iter().map(|u| u.re).collect();
            let im: Vec<f64> = mode.iter().map(|u| u.im).collect();
            let abs2: Vec<f64> = mode.iter().map(|u| u.norm_sqr()).collect();
            let x = device.grid.coords();
            Table::from_columns(&[("x_nm", &x), ("re_u", &re), ("im_u", &im), ("abs_u_sq", &abs2)]).write(&out.join("mode.tsv"))?;
            let mut t = Table::new(&["bias_eV", "E0_eV", "E_eV", "Gamma_eV", "newton_iterations"]);
            t.push(vec![stored.bias, e0, res.energy(), res.width(), res.iterations as f64]);
            t.write(&out.join("resonance.tsv"))?;
            println!("E0 = {e0:.6} eV, E = {:.6} eV, Gamma = {:.4e} eV", res.energy(), res.width());
        }
        Command::ChiCheck { samples, seed } => {
            let report = chi_sweep(samples, seed);
            println!(
                "{} samples: worst relative error chi0 {:.2e}, chi1 {:.2e} at {:?}",
                report.samples, report.worst_chi0, report.worst_chi1, report.worst_sample
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
