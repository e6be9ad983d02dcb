//! Stationary and transient runs from a [`RunConfig`], with their artifacts.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::time::Instant;

use rtd_core::model::Device;
use rtd_core::resonance::{find_resonance, Resonance};
use rtd_core::stationary::{solve_stationary, MeshPolicy, Method};
use rtd_core::transient::{run_transient, Engine, InitialState, KScan, StepRecord, TransientOptions, TransientRun};

use crate::artifacts::{config_hash, create_dir, Cache, Manifest, Table};
use crate::config::RunConfig;
use crate::error::{SimError, SimResult};

/// Density engine selected on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum EngineChoice {
    /// Adaptive mesh for stationary runs, one state per fine frequency for
    /// transients.
    Direct,
    /// One-mode approximation.
    Oma,
    /// Uniform mesh with the reference number of cells (stationary only).
    Reference,
}

impl fmt::Display for EngineChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Direct => "direct",
            Self::Oma => "oma",
            Self::Reference => "reference",
        })
    }
}

impl std::str::FromStr for EngineChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "direct" => Ok(Self::Direct),
            "oma" => Ok(Self::Oma),
            "reference" => Ok(Self::Reference),
            other => Err(format!("unknown engine `{other}`")),
        }
    }
}

impl EngineChoice {
    pub fn stationary_method(self, cfg: &RunConfig) -> Method {
        let m = &cfg.mesh;
        match self {
            Self::Direct => Method::Direct(MeshPolicy::Adaptive {
                base_intervals: m.adaptive_base_cells,
                per_width: m.adaptive_per_width,
                ratio: m.adaptive_ratio,
            }),
            Self::Oma => Method::Oma { intervals: m.oma_cells },
            Self::Reference => Method::Direct(MeshPolicy::Uniform {
                intervals: m.reference_cells,
            }),
        }
    }

    pub fn transient_engine(self, cfg: &RunConfig) -> SimResult<Engine> {
        match self {
            Self::Direct => Ok(Engine::Direct),
            Self::Oma => Ok(Engine::Oma {
                ratio: cfg.mesh.frequency_cells / cfg.mesh.coarse_cells,
            }),
            Self::Reference => Err(SimError::Usage(
                "the reference engine is stationary only; use direct or oma".into(),
            )),
        }
    }
}

/// Converged stationary state in plain data, as stored on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct StationaryResult {
    pub bias: f64,
    pub engine: EngineChoice,
    pub x: Vec<f64>,
    /// Self-consistent potential energy V.
    pub potential: Vec<f64>,
    /// U + V.
    pub total_potential: Vec<f64>,
    pub density: Vec<f64>,
    pub doping: Vec<f64>,
    /// Relative updates e^l of the Gummel loop.
    pub trace: Vec<f64>,
    pub dirichlet_energy: f64,
    pub energy: f64,
    pub width: f64,
    pub newton_iterations: usize,
    pub frequency_points: usize,
    pub solves: usize,
    pub seconds: f64,
}

impl StationaryResult {
    pub fn iterations(&self) -> usize {
        self.trace.len()
    }

    pub fn initial_state(&self) -> InitialState {
        InitialState {
            potential: self.potential.clone(),
            density: self.density.clone(),
        }
    }

    pub fn save(&self, dir: &Path, cfg: &RunConfig) -> SimResult<()> {
        create_dir(dir)?;
        Table::from_columns(&[("x_nm", &self.x), ("V_eV", &self.potential), ("U_plus_V_eV", &self.total_potential)])
            .write(&dir.join("potential.tsv"))?;
        Table::from_columns(&[("x_nm", &self.x), ("n_per_nm3", &self.density), ("nD_per_nm3", &self.doping)])
            .write(&dir.join("density.tsv"))?;
        let iterations: Vec<f64> = (1..=self.trace.len()).map(|l| l as f64).collect();
        Table::from_columns(&[("iteration", &iterations), ("relative_update", &self.trace)]).write(&dir.join("trace.tsv"))?;
        let mut res = Table::new(&[
            "bias_eV",
            "E0_eV",
            "E_eV",
            "Gamma_eV",
            "Gamma_over_E",
            "newton_iterations",
            "gummel_iterations",
            "frequency_points",
        ]);
        res.push(vec![
            self.bias,
            self.dirichlet_energy,
            self.energy,
            self.width,
            self.width / self.energy,
            self.newton_iterations as f64,
            self.iterations() as f64,
            self.frequency_points as f64,
        ]);
        res.write(&dir.join("resonance.tsv"))?;
        let summary: BTreeMap<String, f64> = [
            ("bias_eV", self.bias),
            ("gummel_iterations", self.iterations() as f64),
            ("frequency_points", self.frequency_points as f64),
            ("scattering_solves", self.solves as f64),
            ("E_eV", self.energy),
            ("Gamma_eV", self.width),
            ("seconds", self.seconds),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
        Manifest {
            kind: "stationary".into(),
            engine: self.engine.to_string(),
            config_hash: config_hash(cfg, &stationary_label(self.engine, self.bias)),
            files: ["potential.tsv", "density.tsv", "trace.tsv", "resonance.tsv"].map(String::from).to_vec(),
            summary,
            config: cfg.clone(),
        }
        .write(dir)
    }

    pub fn load(dir: &Path) -> SimResult<Self> {
        let manifest = Manifest::read(dir)?;
        if manifest.kind != "stationary" {
            return Err(SimError::Artifact {
                path: dir.to_path_buf(),
                message: format!("expected a stationary run, found `{}`", manifest.kind),
            });
        }
        let engine = manifest.engine.parse().map_err(|message| SimError::Artifact {
            path: dir.to_path_buf(),
            message,
        })?;
        let p = dir.join("potential.tsv");
        let potential = Table::read(&p)?;
        let d = dir.join("density.tsv");
        let density = Table::read(&d)?;
        let t = dir.join("trace.tsv");
        let trace = Table::read(&t)?;
        let r = dir.join("resonance.tsv");
        let res = Table::read(&r)?;
        let scalar = |name: &str| -> SimResult<f64> {
            res.require(name, &r)?.first().copied().ok_or_else(|| SimError::Artifact {
                path: r.clone(),
                message: "empty resonance table".into(),
            })
        };
        Ok(Self {
            bias: scalar("bias_eV")?,
            engine,
            x: potential.require("x_nm", &p)?,
            potential: potential.require("V_eV", &p)?,
            total_potential: potential.require("U_plus_V_eV", &p)?,
            density: density.require("n_per_nm3", &d)?,
            doping: density.require("nD_per_nm3", &d)?,
            trace: trace.require("relative_update", &t)?,
            dirichlet_energy: scalar("E0_eV")?,
            energy: scalar("E_eV")?,
            width: scalar("Gamma_eV")?,
            newton_iterations: scalar("newton_iterations")? as usize,
            frequency_points: scalar("frequency_points")? as usize,
            solves: manifest.summary.get("scattering_solves").copied().unwrap_or(0.0) as usize,
            seconds: manifest.summary.get("seconds").copied().unwrap_or(0.0),
        })
    }
}

fn stationary_label(engine: EngineChoice, bias: f64) -> String {
    format!("stationary/{engine}/{bias:e}")
}

/// Self-consistent stationary state at `bias`, starting the Gummel loop
/// from `start` (zero when absent).
pub fn run_stationary(cfg: &RunConfig, engine: EngineChoice, bias: f64, start: Option<&[f64]>) -> SimResult<StationaryResult> {
    let device = cfg.device()?;
    let zero = vec![0.0; device.nodes()];
    let start = start.unwrap_or(&zero);
    if start.len() != device.nodes() {
        return Err(SimError::Usage(format!(
            "warm-start potential has {} nodes, the grid has {}",
            start.len(),
            device.nodes()
        )));
    }
    let clock = Instant::now();
    let s = solve_stationary(&device, bias, engine.stationary_method(cfg), start, cfg.gummel())?;
    let seconds = clock.elapsed().as_secs_f64();
    Ok(StationaryResult {
        bias,
        engine,
        x: device.grid.coords(),
        total_potential: s.total_potential(&device),
        potential: s.gummel.potential,
        density: s.gummel.density,
        doping: device.doping(),
        trace: s.gummel.trace,
        dirichlet_energy: s.dirichlet_energy,
        energy: s.resonance.energy(),
        width: s.resonance.width(),
        newton_iterations: s.resonance.iterations,
        frequency_points: s.mesh_points,
        solves: s.solves,
        seconds,
    })
}

/// Stationary run looked up in `cache` first; computed and stored there
/// otherwise.
pub fn cached_stationary(
    cache: &Cache,
    cfg: &RunConfig,
    engine: EngineChoice,
    bias: f64,
    start: Option<&[f64]>,
) -> SimResult<StationaryResult> {
    let label = stationary_label(engine, bias);
    if let Some(dir) = cache.lookup(cfg, &label) {
        return StationaryResult::load(&dir);
    }
    let result = run_stationary(cfg, engine, bias, start)?;
    result.save(&cache.entry(cfg, &label), cfg)?;
    Ok(result)
}

/// Resonance of the potential U(bias) + V.
pub fn resonance_of(device: &Device, cfg: &RunConfig, bias: f64, potential: &[f64]) -> SimResult<(f64, Resonance)> {
    let q: Vec<f64> = device.external_potential(bias).iter().zip(potential).map(|(u, v)| u + v).collect();
    let search = find_resonance(device, &q, cfg.newton())?;
    Ok((search.dirichlet_energy, search.resonance))
}

/// Evenly spaced scan steps, always including the first and last.
pub fn snapshot_steps(steps: usize, snapshots: usize) -> Vec<usize> {
    if snapshots == 0 {
        return Vec::new();
    }
    let mut out: Vec<usize> = (0..=snapshots).map(|i| i * steps / snapshots).collect();
    out.dedup();
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransientResult {
    pub engine: EngineChoice,
    pub run: TransientRun,
    pub seconds: f64,
}

impl TransientResult {
    pub fn records(&self) -> &[StepRecord] {
        &self.run.records
    }

    /// Frequency CN solves per step after the first.
    pub fn solves_per_step(&self) -> Vec<usize> {
        self.run.records[1..].iter().map(|r| r.cn_solves).collect()
    }

    pub fn save(&self, dir: &Path, cfg: &RunConfig, device: &Device) -> SimResult<()> {
        create_dir(dir)?;
        let opt = |v: Option<f64>| v.unwrap_or(f64::NAN);
        let mut ts = Table::new(&[
            "step",
            "time_fs",
            "bias_eV",
            "charge_per_nm2",
            "distance_percent",
            "mode_charge",
            "E_eV",
            "Gamma_eV",
            "newton_iterations",
            "cn_solves",
            "cross_term",
            "mu_abs",
        ]);
        for r in &self.run.records {
            ts.push(vec![
                r.step as f64,
                r.time,
                r.bias,
                r.charge,
                opt(r.distance),
                opt(r.mode_charge),
                r.energy,
                r.width,
                r.newton_iterations as f64,
                r.cn_solves as f64,
                opt(r.cross_term),
                opt(r.mu),
            ]);
        }
        ts.write(&dir.join("timeseries.tsv"))?;
        let mut files = vec!["timeseries.tsv".to_string(), "kscans.tsv".into(), "potential.tsv".into(), "density.tsv".into()];
        let mut index = Table::new(&["step", "time_fs", "bias_eV", "E_eV", "kR_plus", "kR_minus"]);
        for scan in &self.run.scans {
            index.push(vec![scan.step as f64, scan.time, scan.bias, scan.energy, scan.k_plus, scan.k_minus]);
            let name = format!("kscan_{}.tsv", scan.step);
            kscan_table(scan).write(&dir.join(&name))?;
            files.push(name);
        }
        index.write(&dir.join("kscans.tsv"))?;
        let x = device.grid.coords();
        Table::from_columns(&[("x_nm", &x), ("V_eV", &self.run.potential)]).write(&dir.join("potential.tsv"))?;
        Table::from_columns(&[("x_nm", &x), ("n_per_nm3", &self.run.density)]).write(&dir.join("density.tsv"))?;
        let summary: BTreeMap<String, f64> = [
            ("steps", (self.run.records.len() - 1) as f64),
            ("cn_solves", self.run.cn_solves as f64),
            ("mode_solves", self.run.mode_solves as f64),
            ("seconds", self.seconds),
            ("final_charge_per_nm2", self.run.records.last().map_or(f64::NAN, |r| r.charge)),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
        Manifest {
            kind: "transient".into(),
            engine: self.engine.to_string(),
            config_hash: config_hash(cfg, &format!("transient/{}", self.engine)),
            files,
            summary,
            config: cfg.clone(),
        }
        .write(dir)
    }
}

fn kscan_table(scan: &KScan) -> Table {
    let nan = vec![f64::NAN; scan.k.len()];
    Table::from_columns(&[
        ("k_per_nm", &scan.k),
        ("C", &scan.c),
        ("C_theta", scan.c_theta.as_deref().unwrap_or(&nan)),
        ("C_lambda", scan.c_lambda.as_deref().unwrap_or(&nan)),
        ("lambda_abs", scan.lambda_abs.as_deref().unwrap_or(&nan)),
    ])
}

/// Run the transient of `cfg` from the stationary state `initial` at the
/// initial bias. `reference` is the stationary state at the final bias used
/// for the distance diagnostic.
pub fn run_transient_from(
    cfg: &RunConfig,
    engine: EngineChoice,
    initial: &StationaryResult,
    reference: Option<&StationaryResult>,
    snapshots: usize,
) -> SimResult<TransientResult> {
    let device = cfg.device()?;
    let steps = cfg.steps();
    let opts = TransientOptions {
        dt: cfg.dt(),
        steps,
        cells: cfg.mesh.frequency_cells,
        engine: engine.transient_engine(cfg)?,
        schedule: cfg.schedule(),
        reference_potential: cfg.reference_potential(),
        newton: cfg.newton(),
        scan_steps: snapshot_steps(steps, snapshots),
    };
    let clock = Instant::now();
    let run = run_transient(&device, &initial.initial_state(), &opts, reference.map(|r| r.density.as_slice()))?;
    Ok(TransientResult {
        engine,
        run,
        seconds: clock.elapsed().as_secs_f64(),
    })
}

/// Decay of the propagated mode over [t₀, t₀ + T] against the prediction
/// from the resonance width along the run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayCheck {
    pub measured: f64,
    pub predicted: f64,
}

/// N(t₀ + T)/N(t₀) and exp(−(1/ħ)∫Γ ds) over the same window, the integral
/// by the trapezoid rule on the step records. `None` when the run has no
/// propagated mode or is too short.
pub fn decay_check(records: &[StepRecord], hbar: f64, t0: f64, period: f64) -> Option<DecayCheck> {
    let at = |t: f64| records.iter().position(|r| (r.time - t).abs() < 1e-9 * t.max(1.0));
    let (i, j) = (at(t0)?, at(t0 + period)?);
    let measured = records[j].mode_charge? / records[i].mode_charge?;
    let integral: f64 = records[i..=j].windows(2).map(|w| 0.5 * (w[0].width + w[1].width) * (w[1].time - w[0].time)).sum();
    Some(DecayCheck {
        measured,
        predicted: (-integral / hbar).exp(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn snapshots_cover_both_ends() {
        assert_eq!(snapshot_steps(2000, 4), vec![0, 500, 1000, 1500, 2000]);
        assert_eq!(snapshot_steps(3, 10), vec![0, 1, 2, 3]);
        assert!(snapshot_steps(100, 0).is_empty());
    }

    #[test]
    fn engine_names_round_trip() {
        for e in [EngineChoice::Direct, EngineChoice::Oma, EngineChoice::Reference] {
            assert_eq!(e.to_string().parse::<EngineChoice>().unwrap(), e);
        }
    }

    #[test]
    fn reference_engine_has_no_transient() {
        assert!(EngineChoice::Reference.transient_engine(&RunConfig::default()).is_err());
    }

    fn record(time: f64, width: f64, mode_charge: f64) -> StepRecord {
        StepRecord {
            step: time as usize,
            time,
            bias: 0.1,
            charge: 1.0,
            distance: None,
            mode_charge: Some(mode_charge),
            energy: 0.08,
            width,
            newton_iterations: 0,
            cn_solves: 0,
            cross_term: None,
            mu: None,
        }
    }

    #[test]
    fn decay_of_an_exact_exponential() {
        let hbar = 0.658;
        let width = 3e-4;
        let records: Vec<StepRecord> = (0..=20).map(|l| {
            let t = l as f64 * 100.0;
            record(t, width, (-width * t / hbar).exp())
        }).collect();
        let check = decay_check(&records, hbar, 1000.0, 1000.0).unwrap();
        assert!((check.measured - check.predicted).abs() < 1e-12);
        assert!(decay_check(&records, hbar, 1500.0, 1000.0).is_none());
    }
}
