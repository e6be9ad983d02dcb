//! Quantities behind the acceptance report: resonance table, one-mode
//! accuracy, transparent boundary behaviour, λ integrator order and the
//! transient diagnostics of the desk-scale run.

use rtd_core::dtbc::{discrete_norm, CnSettings, CnSystem, DtbcKernel, Evolution, ExteriorGauge, KernelPair};
use rtd_core::model::{Device, Geometry};
use rtd_core::oma_transient::lambda_step;
use rtd_core::scattering::scattering_state;
use rtd_core::stationary::relative_l2;
use rtd_core::transient::{frozen_mode_decay, KScan};
use rtd_core::Complex64;

use crate::artifacts::Cache;
use crate::config::RunConfig;
use crate::driver::{cached_stationary, resonance_of, EngineChoice, StationaryResult};
use crate::error::SimResult;

/// Converged stationary states at the initial and the final bias of `cfg`,
/// the second started from the first.
pub fn stationary_pair(cache: &Cache, cfg: &RunConfig, engine: EngineChoice) -> SimResult<[StationaryResult; 2]> {
    let first = cached_stationary(cache, cfg, engine, cfg.bias.initial, None)?;
    let second = cached_stationary(cache, cfg, engine, cfg.bias.target, Some(&first.potential))?;
    Ok([first, second])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OmaAccuracy {
    pub bias: f64,
    /// Relative L² distance of the potentials.
    pub gap: f64,
    pub iterations: usize,
    pub frequency_points: usize,
    /// Whether e^l decreases from the sixth iteration on.
    pub trace_monotone: bool,
}

pub fn oma_accuracy(oma: &StationaryResult, reference: &StationaryResult) -> OmaAccuracy {
    OmaAccuracy {
        bias: oma.bias,
        gap: relative_l2(&oma.potential, &reference.potential),
        iterations: oma.iterations(),
        frequency_points: oma.frequency_points,
        trace_monotone: oma.trace.iter().skip(5).collect::<Vec<_>>().windows(2).all(|w| w[1] <= w[0]),
    }
}

fn cn_settings(device: &Device, dt: f64) -> CnSettings {
    CnSettings {
        dx: device.dx(),
        dt,
        kinetic: device.params.kinetic(),
        hbar: device.params.hbar(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PacketExit {
    /// Final over initial discrete norm.
    pub residual: f64,
    /// Whether the norm never grew by more than round-off.
    pub monotone: bool,
}

/// Free Gaussian packet centred in the standard domain, with mean
/// wavenumber 0.8 nm⁻¹ and width 8 nm, under homogeneous transparent
/// boundaries for `steps` steps of 1 fs.
pub fn packet_exit(device: &Device, steps: usize) -> SimResult<PacketExit> {
    let cfg = cn_settings(device, 1.0);
    let n = device.nodes();
    let kernel = DtbcKernel::new(0.0, cfg.r(), steps);
    let kernels = KernelPair {
        left: &kernel,
        right: &kernel,
    };
    let sys = CnSystem::new(&cfg, &vec![0.0; n], kernels)?;
    let centre = 0.5 * device.geometry.length;
    let psi0: Vec<Complex64> = device
        .grid
        .coords()
        .iter()
        .map(|&x| Complex64::from_polar((-(x - centre).powi(2) / (2.0 * 8.0 * 8.0)).exp(), 0.8 * x))
        .collect();
    let norm0 = discrete_norm(&psi0, cfg.dx);
    let mut evo = Evolution::homogeneous(psi0);
    let mut prev = norm0;
    let mut monotone = true;
    for _ in 0..steps {
        evo.advance(&sys, kernels, &cfg, 0.0)?;
        let norm = discrete_norm(&evo.psi, cfg.dx);
        monotone &= norm <= prev * (1.0 + 1e-12);
        prev = norm;
    }
    Ok(PacketExit {
        residual: prev / norm0,
        monotone,
    })
}

/// 30 nm double barrier with the standard barrier height, small enough to
/// be resolved finely.
pub fn small_device(intervals: usize) -> SimResult<Device> {
    let geometry = Geometry {
        length: 30.0,
        a1: 5.0,
        a2: 12.0,
        a3: 13.5,
        b3: 16.5,
        b2: 18.0,
        b1: 25.0,
        ..Geometry::default()
    };
    Ok(Device::new(Default::default(), geometry, intervals)?)
}

/// Largest relative L² deviation of a scattering state at wavenumber `k`,
/// evolved with fixed-exterior transparent boundaries in the frozen
/// potential U(bias), from its exact time-harmonic evolution.
pub fn frozen_state_deviation(device: &Device, bias: f64, k: f64, dt: f64, steps: usize) -> SimResult<f64> {
    let q = device.external_potential(bias);
    let cfg = cn_settings(device, dt);
    let energy = device.params.dispersion(k, bias);
    let phi = scattering_state(device, &q, k, bias)?;
    let n = phi.len();
    let left = DtbcKernel::new(cfg.sigma(q[0]), cfg.r(), steps);
    let right = DtbcKernel::new(cfg.sigma(q[n - 1]), cfg.r(), steps);
    let kernels = KernelPair {
        left: &left,
        right: &right,
    };
    let sys = CnSystem::new(&cfg, &q, kernels)?;
    let mut evo = Evolution::scattering(phi.clone(), energy, energy, ExteriorGauge::Fixed);
    let norm = discrete_norm(&phi, cfg.dx);
    let mut worst = 0.0_f64;
    for l in 1..=steps {
        evo.advance(&sys, kernels, &cfg, q[n - 1])?;
        let phase = Complex64::from_polar(1.0, -energy * l as f64 * cfg.dt / cfg.hbar);
        let diff: Vec<Complex64> = evo.psi.iter().zip(&phi).map(|(a, b)| a - b * phase).collect();
        worst = worst.max(discrete_norm(&diff, cfg.dx) / norm);
    }
    Ok(worst)
}

/// Largest relative gap between the fixed-exterior kernel and the free
/// kernel with a tracked gauge, for one scattering state under the constant
/// exterior potential −`bias`.
pub fn gauge_gap(device: &Device, bias: f64, k: f64, dt: f64, steps: usize) -> SimResult<f64> {
    let q = device.external_potential(bias);
    let cfg = cn_settings(device, dt);
    let energy = device.params.dispersion(k, bias);
    let phi = scattering_state(device, &q, k, bias)?;
    let n = phi.len();
    let q_right = q[n - 1];
    let left = DtbcKernel::new(cfg.sigma(q[0]), cfg.r(), steps);
    let fixed = DtbcKernel::new(cfg.sigma(q_right), cfg.r(), steps);
    let free = DtbcKernel::new(0.0, cfg.r(), steps);
    let pair_fixed = KernelPair {
        left: &left,
        right: &fixed,
    };
    let pair_free = KernelPair {
        left: &left,
        right: &free,
    };
    let sys_fixed = CnSystem::new(&cfg, &q, pair_fixed)?;
    let sys_free = CnSystem::new(&cfg, &q, pair_free)?;
    let mut a = Evolution::scattering(phi.clone(), energy, energy, ExteriorGauge::Fixed);
    let mut b = Evolution::scattering(phi.clone(), energy, energy - q_right, ExteriorGauge::Tracked { level: q_right });
    let norm = discrete_norm(&phi, cfg.dx);
    let mut worst = 0.0_f64;
    for _ in 0..steps {
        a.advance(&sys_fixed, pair_fixed, &cfg, q_right)?;
        b.advance(&sys_free, pair_free, &cfg, q_right)?;
        let diff: Vec<Complex64> = a.psi.iter().zip(&b.psi).map(|(x, y)| x - y).collect();
        worst = worst.max(discrete_norm(&diff, cfg.dx) / norm);
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeDecay {
    /// Well charge ratio over `period` steps, after a settling delay.
    pub measured: f64,
    /// exp(−Γ T/ħ).
    pub predicted: f64,
    /// Whether the total norm never grew.
    pub norm_monotone: bool,
}

/// Resonant mode of a stationary state left to decay in its frozen
/// potential. The ratio is taken over `period` steps of 1 fs starting after
/// `delay` steps, once the non-resonant part of the initial data has left.
pub fn mode_decay(cfg: &RunConfig, state: &StationaryResult, delay: usize, period: usize) -> SimResult<ModeDecay> {
    let device = &cfg.device()?;
    let (_, resonance) = resonance_of(device, cfg, state.bias, &state.potential)?;
    let decay = frozen_mode_decay(
        device,
        &state.total_potential,
        state.bias,
        resonance.l2_mode(device.dx()),
        1.0,
        delay + period,
    )?;
    Ok(ModeDecay {
        measured: decay.well[delay + period] / decay.well[delay],
        predicted: (-resonance.width() * period as f64 / device.params.hbar()).exp(),
        norm_monotone: decay.norm.windows(2).all(|w| w[1] <= w[0]),
    })
}

/// Maximal error of the λ integrator on λ' + (i/ħ)zλ = 0 over 200 fs, for
/// a decaying complex z.
pub fn unforced_lambda_error(dt: f64, hbar: f64) -> f64 {
    let z = Complex64::new(0.08, -0.002);
    let mut lambda = Complex64::new(1.0, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    let steps = (200.0 / dt).round() as usize;
    let mut worst = 0.0_f64;
    for l in 1..=steps {
        lambda = lambda_step(lambda, z, zero, zero, dt, hbar);
        let exact = (-Complex64::i() * z * (l as f64 * dt) / hbar).exp();
        worst = worst.max((lambda - exact).norm());
    }
    worst
}

/// Observed orders of accuracy from halving the time step twice.
pub fn lambda_orders(hbar: f64) -> Vec<f64> {
    let errors: Vec<f64> = [1.0, 0.5, 0.25].iter().map(|&dt| unforced_lambda_error(dt, hbar)).collect();
    errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

/// |λ(T)|/(|s| T) for λ' + (i/ħ)Eλ = s e^{−iEt/ħ}, λ(0) = 0, whose exact
/// solution is s t e^{−iEt/ħ}.
pub fn resonant_slope_ratio(hbar: f64) -> f64 {
    let energy = 0.08;
    let z = Complex64::new(energy, 0.0);
    let s = Complex64::new(1e-3, 2e-3);
    let dt = 1.0;
    let steps = 2000;
    let source = |t: f64| s * Complex64::from_polar(1.0, -energy * t / hbar);
    let mut lambda = Complex64::new(0.0, 0.0);
    for l in 0..steps {
        let t = l as f64 * dt;
        lambda = lambda_step(lambda, z, source(t), source(t + dt), dt, hbar);
    }
    lambda.norm() / (steps as f64 * dt) / s.norm()
}

fn argmax(k: &[f64], values: &[f64]) -> f64 {
    let i = values
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .expect("non-empty scan");
    k[i]
}

/// Peak positions of one frequency scan, in units of `cell`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeakPosition {
    pub time: f64,
    pub peak: f64,
    /// Distance from the peak of C to k_R⁺, in cells.
    pub c_to_plus: f64,
    /// Distance from the peak of C to the nearer of k_R^±, in cells.
    pub c_to_nearer: f64,
    /// Distance from the peak of |λ| to the nearer of k_R^±, in cells.
    pub lambda_to_nearer: Option<f64>,
}

pub fn peak_position(scan: &KScan, cell: f64) -> PeakPosition {
    let peak = argmax(&scan.k, &scan.c);
    let nearer = |k: f64| (k - scan.k_plus).abs().min((k - scan.k_minus).abs()) / cell;
    PeakPosition {
        time: scan.time,
        peak,
        c_to_plus: (peak - scan.k_plus).abs() / cell,
        c_to_nearer: nearer(peak),
        lambda_to_nearer: scan.lambda_abs.as_deref().map(|l| nearer(argmax(&scan.k, l))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn peak_distance_counts_cells() {
        let scan = KScan {
            step: 0,
            time: 0.0,
            k: vec![-0.2, -0.1, 0.0, 0.1, 0.2],
            c: vec![0.0, 1.0, 0.5, 0.2, 0.1],
            c_theta: None,
            c_lambda: None,
            lambda_abs: Some(vec![0.0, 0.0, 0.0, 0.0, 3.0]),
            k_plus: 0.2,
            k_minus: -0.1,
            energy: 0.0,
            bias: 0.0,
        };
        let p = peak_position(&scan, 0.1);
        assert_eq!(p.peak, -0.1);
        assert!((p.c_to_plus - 3.0).abs() < 1e-12);
        assert!(p.c_to_nearer.abs() < 1e-12);
        assert!(p.lambda_to_nearer.unwrap().abs() < 1e-12);
    }
}
