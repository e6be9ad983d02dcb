//! Run configuration: the TOML schema, its defaults and the conversion from
//! SI input units to the scaled units of the solvers.
//!
//! Lengths in the geometry block are in nm and the barrier height in eV, as
//! in the usual device tables. The Fermi level is in J, donor densities in
//! m⁻³ and all times in s; they are converted once in [`RunConfig::device`]
//! and friends.

use std::path::Path;

use rtd_core::model::{si, BiasSchedule, Device, Geometry, PhysicalParams};
use rtd_core::poisson::GummelOptions;
use rtd_core::resonance::NewtonOptions;
use serde::{Deserialize, Serialize};

use crate::error::{SimError, SimResult};

/// Seconds to femtoseconds.
const FS_PER_S: f64 = 1e15;
/// m⁻³ to nm⁻³.
const NM3_PER_M3: f64 = 1e-27;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeometryConfig {
    pub length: f64,
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    pub b3: f64,
    pub b2: f64,
    pub b1: f64,
    /// Barrier height v₀ in eV.
    pub barrier: f64,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        let g = Geometry::default();
        Self {
            length: g.length,
            a1: g.a1,
            a2: g.a2,
            a3: g.a3,
            b3: g.b3,
            b2: g.b2,
            b1: g.b1,
            barrier: g.barrier,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhysicsConfig {
    pub relative_mass: f64,
    pub relative_permittivity: f64,
    /// Temperature in K.
    pub temperature: f64,
    /// Fermi level in J.
    pub fermi_level: f64,
}

impl Default for PhysicsConfig {
    fn default() -> Self {
        Self {
            relative_mass: 0.067,
            relative_permittivity: 11.44,
            temperature: 300.0,
            fermi_level: 6.7097e-21,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DopingConfig {
    /// Donor density in the contacts, m⁻³.
    pub contact: f64,
    /// Donor density inside the diode, m⁻³.
    pub diode: f64,
}

impl Default for DopingConfig {
    fn default() -> Self {
        Self {
            contact: 1e24,
            diode: 5e21,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeshConfig {
    /// Space intervals J.
    pub intervals: usize,
    /// Fine frequency cells P of the transient.
    pub frequency_cells: usize,
    /// Coarse frequency cells P′ of the transient one-mode engine.
    pub coarse_cells: usize,
    /// Frequency cells of the stationary one-mode engine.
    pub oma_cells: usize,
    /// Frequency cells of the uniform reference computation.
    pub reference_cells: usize,
    /// Base cells of the adaptive direct mesh.
    pub adaptive_base_cells: usize,
    /// Refined points per resonance half-width.
    pub adaptive_per_width: usize,
    /// Geometric growth of the refined spacing.
    pub adaptive_ratio: f64,
    /// Time step in s.
    pub dt: f64,
    /// Final time of the transient in s.
    pub final_time: f64,
}

impl Default for MeshConfig {
    fn default() -> Self {
        Self {
            intervals: 300,
            frequency_cells: 300,
            coarse_cells: 150,
            oma_cells: 50,
            reference_cells: 4000,
            adaptive_base_cells: 750,
            adaptive_per_width: 20,
            adaptive_ratio: 1.25,
            dt: 1e-15,
            final_time: 2e-12,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BiasMode {
    Step,
    CubicRamp,
    Constant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BiasConfig {
    pub mode: BiasMode,
    /// Initial bias B_I in eV.
    pub initial: f64,
    /// Final bias B_∞ in eV.
    pub target: f64,
    /// Ramp duration t₀ in s (cubic ramp only).
    pub ramp_time: f64,
}

impl Default for BiasConfig {
    fn default() -> Self {
        Self {
            mode: BiasMode::Step,
            initial: 0.0,
            target: 0.1,
            ramp_time: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub gummel_tolerance: f64,
    pub gummel_max_iterations: usize,
    /// Damping potential V_ref in eV; k_B T when absent.
    pub reference_potential: Option<f64>,
    pub newton_tolerance: f64,
    pub newton_max_iterations: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            gummel_tolerance: 1e-15,
            gummel_max_iterations: 200,
            reference_potential: None,
            newton_tolerance: 1e-15,
            newton_max_iterations: 50,
        }
    }
}

/// Complete description of an experiment. Every key has a default, so an
/// empty file is the standard device.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub geometry: GeometryConfig,
    pub physics: PhysicsConfig,
    pub doping: DopingConfig,
    pub mesh: MeshConfig,
    pub bias: BiasConfig,
    pub solver: SolverConfig,
}

impl RunConfig {
    /// Parse TOML text. Unknown keys and type errors are reported with the
    /// path of the offending key.
    pub fn from_toml(text: &str) -> SimResult<Self> {
        let de = toml::Deserializer::parse(text).map_err(|e| SimError::Config {
            path: String::new(),
            message: e.to_string(),
        })?;
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| SimError::Config {
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> SimResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| SimError::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration always serialises")
    }

    /// Full-scale transient: P = 1500, P′ = 750, 8 ps.
    pub fn full_scale(mut self) -> Self {
        self.mesh.frequency_cells = 1500;
        self.mesh.coarse_cells = 750;
        self.mesh.final_time = 8e-12;
        self
    }

    pub fn validate(&self) -> SimResult<()> {
        let invalid = |path: &str, message: String| {
            Err(SimError::Config {
                path: path.to_string(),
                message,
            })
        };
        let g = &self.geometry;
        let ordered = 0.0 < g.a1 && g.a1 < g.a2 && g.a2 < g.a3 && g.a3 < g.b3 && g.b3 < g.b2 && g.b2 < g.b1 && g.b1 < g.length;
        if !ordered {
            return invalid(
                "geometry",
                format!(
                    "positions must satisfy 0 < a1 < a2 < a3 < b3 < b2 < b1 < length, got a1={} a2={} a3={} b3={} b2={} b1={} length={}",
                    g.a1, g.a2, g.a3, g.b3, g.b2, g.b1, g.length
                ),
            );
        }
        if g.barrier.is_nan() || g.barrier < 0.0 {
            return invalid("geometry.barrier", format!("must be non-negative, got {}", g.barrier));
        }
        let d = &self.doping;
        if !(d.diode >= 0.0 && d.contact >= d.diode) {
            return invalid(
                "doping",
                format!("expected contact >= diode >= 0, got contact={} diode={}", d.contact, d.diode),
            );
        }
        let p = &self.physics;
        for (name, v) in [
            ("physics.relative_mass", p.relative_mass),
            ("physics.relative_permittivity", p.relative_permittivity),
            ("physics.temperature", p.temperature),
            ("physics.fermi_level", p.fermi_level),
            ("mesh.dt", self.mesh.dt),
            ("mesh.final_time", self.mesh.final_time),
            ("mesh.adaptive_ratio", self.mesh.adaptive_ratio - 1.0),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return invalid(name, format!("must be positive and finite, got {v}"));
            }
        }
        let m = &self.mesh;
        if m.intervals < 2 {
            return invalid("mesh.intervals", "need at least 2 intervals".into());
        }
        for (name, v, min) in [
            ("mesh.frequency_cells", m.frequency_cells, 2),
            ("mesh.coarse_cells", m.coarse_cells, 2),
            ("mesh.oma_cells", m.oma_cells, 2),
            ("mesh.reference_cells", m.reference_cells, 2),
            ("mesh.adaptive_base_cells", m.adaptive_base_cells, 2),
            ("mesh.adaptive_per_width", m.adaptive_per_width, 1),
        ] {
            if v < min {
                return invalid(name, format!("must be at least {min}, got {v}"));
            }
        }
        if !m.frequency_cells.is_multiple_of(m.coarse_cells) {
            return invalid(
                "mesh.coarse_cells",
                format!("must divide frequency_cells = {}, got {}", m.frequency_cells, m.coarse_cells),
            );
        }
        let params = self.physical_params();
        let dx = g.length / m.intervals as f64;
        let stability = params.kinetic() / (dx * dx);
        if stability <= 1.0 {
            return invalid(
                "mesh.intervals",
                format!("ħ²/(2m dx²) = {stability:.3} eV must exceed 1 eV; refine the grid"),
            );
        }
        let b = &self.bias;
        if !(b.initial >= 0.0 && b.target >= 0.0) {
            return invalid("bias", "biases must be non-negative".into());
        }
        if b.mode == BiasMode::CubicRamp && (b.ramp_time.is_nan() || b.ramp_time <= 0.0) {
            return invalid("bias.ramp_time", "a cubic ramp needs a positive duration".into());
        }
        Ok(())
    }

    pub fn physical_params(&self) -> PhysicalParams {
        let p = &self.physics;
        PhysicalParams {
            relative_mass: p.relative_mass,
            relative_permittivity: p.relative_permittivity,
            temperature: p.temperature,
            fermi_level: p.fermi_level / si::ELECTRON_CHARGE,
        }
    }

    pub fn device(&self) -> SimResult<Device> {
        let g = &self.geometry;
        let geometry = Geometry {
            length: g.length,
            a1: g.a1,
            a2: g.a2,
            a3: g.a3,
            b3: g.b3,
            b2: g.b2,
            b1: g.b1,
            barrier: g.barrier,
            donor_contact: self.doping.contact * NM3_PER_M3,
            donor_diode: self.doping.diode * NM3_PER_M3,
        };
        Ok(Device::new(self.physical_params(), geometry, self.mesh.intervals)?)
    }

    /// Time step in fs.
    pub fn dt(&self) -> f64 {
        self.mesh.dt * FS_PER_S
    }

    /// Number of time steps to reach the final time.
    pub fn steps(&self) -> usize {
        (self.mesh.final_time / self.mesh.dt).round() as usize
    }

    pub fn schedule(&self) -> BiasSchedule {
        let b = &self.bias;
        match b.mode {
            BiasMode::Step => BiasSchedule::Step {
                initial: b.initial,
                target: b.target,
            },
            BiasMode::Constant => BiasSchedule::constant(b.initial),
            BiasMode::CubicRamp => BiasSchedule::Cubic {
                initial: b.initial,
                target: b.target,
                duration: b.ramp_time * FS_PER_S,
            },
        }
    }

    pub fn gummel(&self) -> GummelOptions {
        GummelOptions {
            tolerance: self.solver.gummel_tolerance,
            max_iterations: self.solver.gummel_max_iterations,
            reference_potential: self.reference_potential(),
        }
    }

    pub fn reference_potential(&self) -> f64 {
        self.solver.reference_potential.unwrap_or_else(|| self.physical_params().kbt())
    }

    pub fn newton(&self) -> NewtonOptions {
        NewtonOptions {
            tolerance: self.solver.newton_tolerance,
            max_iterations: self.solver.newton_max_iterations,
            ..NewtonOptions::default()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_the_standard_device() {
        let cfg = RunConfig::from_toml("").unwrap();
        assert_eq!(cfg, RunConfig::default());
        let device = cfg.device().unwrap();
        assert_eq!(device, Device::standard());
        assert_eq!(cfg.steps(), 2000);
        assert!((cfg.dt() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn round_trip_is_exact() {
        let mut cfg = RunConfig::default();
        cfg.bias.mode = BiasMode::CubicRamp;
        cfg.bias.target = 0.1 + 1e-17;
        cfg.physics.temperature = 1.0 / 3.0;
        cfg.solver.reference_potential = Some(0.012345678901234568);
        let back = RunConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.physics.temperature.to_bits(), cfg.physics.temperature.to_bits());
    }

    #[test]
    fn unknown_keys_are_rejected_with_their_path() {
        let err = RunConfig::from_toml("[mesh]\nintervalz = 300\n").unwrap_err();
        match err {
            SimError::Config { path, message } => {
                assert_eq!(path, "mesh.intervalz");
                assert!(message.contains("intervalz"), "{message}");
            }
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn type_errors_name_the_key() {
        let err = RunConfig::from_toml("[bias]\ninitial = \"zero\"\n").unwrap_err();
        match err {
            SimError::Config { path, .. } => assert_eq!(path, "bias.initial"),
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn misordered_geometry_names_the_invariant() {
        let err = RunConfig::from_toml("[geometry]\na2 = 66.0\n").unwrap_err();
        let text = err.to_string();
        assert!(text.contains("a2 < a3"), "{text}");
    }

    #[test]
    fn coarse_mesh_must_divide_the_fine_one() {
        assert!(RunConfig::from_toml("[mesh]\ncoarse_cells = 7\n").is_err());
    }

    #[test]
    fn default_manifest_echoes_the_parameter_table() {
        let text = RunConfig::default().to_toml();
        for needle in ["relative_mass = 0.067", "relative_permittivity = 11.44", "temperature = 300.0", "fermi_level = 0.0000000000000000000067097"] {
            assert!(text.contains(needle), "missing {needle} in\n{text}");
        }
    }
}
