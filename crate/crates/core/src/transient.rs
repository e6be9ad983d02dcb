//! Self-consistent time evolution after a bias change.
//!
//! Each step extrapolates the potential to the half step with one damped
//! Poisson solve, advances the wave functions with Crank-Nicolson and
//! transparent boundary conditions, assembles the density and closes the
//! step with a linear Poisson solve. The direct engine evolves one state per
//! frequency of the fine mesh; the one-mode engine evolves non-resonant
//! states on a coarse mesh and carries the resonant part in closed form.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::dtbc::{discrete_norm, CnSettings, CnSystem, DtbcKernel, Evolution, ExteriorGauge, KernelPair};
use crate::error::{ensure_len, Error, Result};
use crate::model::{BiasSchedule, Device, FrequencyMesh};
use crate::oma_stationary::theta;
use crate::oma_transient::{align_phase, mu_estimate, transient_density, SourceInterpolation};
use crate::poisson::PoissonSolver;
use crate::resonance::{find_resonance, track_resonance, NewtonOptions, Resonance};
use crate::scattering::{density, scattering_state};
use crate::stationary::resonant_wavenumbers;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Engine {
    /// One Crank-Nicolson evolution per fine-mesh frequency.
    Direct,
    /// Non-resonant evolutions on a mesh `ratio` times coarser.
    Oma { ratio: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransientOptions {
    /// Time step in fs.
    pub dt: f64,
    pub steps: usize,
    /// Cells of the fine frequency mesh.
    pub cells: usize,
    pub engine: Engine,
    pub schedule: BiasSchedule,
    pub reference_potential: f64,
    pub newton: NewtonOptions,
    /// Steps after which a frequency scan is recorded (0 is the initial
    /// state).
    pub scan_steps: Vec<usize>,
}

/// Converged stationary state at the initial bias.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialState {
    pub potential: Vec<f64>,
    pub density: Vec<f64>,
}

/// One line of the time series.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    /// Time in fs.
    pub time: f64,
    pub bias: f64,
    /// ∫_{a2}^{b2} n dx.
    pub charge: f64,
    /// 100 ‖n − n_ref‖ / ‖n_ref‖ on (a2, b2), when a reference is given.
    pub distance: Option<f64>,
    /// ∫_{a2}^{b2} |v|² dx for the one-mode engine.
    pub mode_charge: Option<f64>,
    /// Resonance used during the step (at the half step).
    pub energy: f64,
    pub width: f64,
    pub newton_iterations: usize,
    /// Frequency evolutions advanced during the step.
    pub cn_solves: usize,
    /// Relative size of the neglected cross term (one-mode engine).
    pub cross_term: Option<f64>,
    /// |μ| estimated after phase alignment.
    pub mu: Option<f64>,
}

/// Frequency-resolved well charges at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct KScan {
    pub step: usize,
    pub time: f64,
    pub k: Vec<f64>,
    /// log ∫_{a2}^{b2} |Ψ_k|² dx.
    pub c: Vec<f64>,
    /// log ∫_{a2}^{b2} |θ_k v|² dx (one-mode engine).
    pub c_theta: Option<Vec<f64>>,
    /// log ∫_{a2}^{b2} |λ_k u|² dx (one-mode engine).
    pub c_lambda: Option<Vec<f64>>,
    pub lambda_abs: Option<Vec<f64>>,
    pub k_plus: f64,
    pub k_minus: f64,
    pub energy: f64,
    pub bias: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransientRun {
    pub records: Vec<StepRecord>,
    pub scans: Vec<KScan>,
    /// Density the engine assembles from its own ensemble at t = 0, before
    /// any evolution.
    pub initial_density: Vec<f64>,
    pub potential: Vec<f64>,
    pub density: Vec<f64>,
    pub resonance: Resonance,
    /// Frequency evolutions advanced over the whole run.
    pub cn_solves: usize,
    /// Evolutions of the propagated mode v over the whole run.
    pub mode_solves: usize,
}

fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

fn log_charge(device: &Device, psi: impl Fn(usize) -> Complex64) -> f64 {
    let g = &device.geometry;
    let dens: Vec<f64> = (0..device.nodes()).map(|j| psi(j).norm_sqr()).collect();
    device.grid.trapezoid(&dens, g.a2, g.b2).ln()
}

/// Boundary kernels and the exterior handling for the schedule: a step
/// keeps the exterior potential fixed after t = 0, any other schedule needs
/// the gauge-tracked condition with the potential-free kernel on the right.
struct Boundaries {
    left: DtbcKernel,
    right: Option<DtbcKernel>,
    tracked: bool,
}

impl Boundaries {
    fn new(cfg: &CnSettings, schedule: &BiasSchedule, steps: usize) -> Self {
        let left = DtbcKernel::new(0.0, cfg.r(), steps);
        match *schedule {
            BiasSchedule::Step { target, .. } => Self {
                left,
                right: Some(DtbcKernel::new(cfg.sigma(-target), cfg.r(), steps)),
                tracked: false,
            },
            BiasSchedule::Cubic { .. } => Self {
                left,
                right: None,
                tracked: true,
            },
        }
    }

    fn pair(&self) -> KernelPair<'_> {
        KernelPair {
            left: &self.left,
            right: self.right.as_ref().unwrap_or(&self.left),
        }
    }

    /// Evolution of a stationary state at energy `energy` for the initial
    /// bias, given exterior potentials Q_L at t = 0 and after.
    fn scattering(&self, psi0: Vec<Complex64>, energy: f64, schedule: &BiasSchedule) -> Evolution {
        let q_initial = -schedule.initial();
        if self.tracked {
            Evolution::scattering(psi0, energy, energy - q_initial, ExteriorGauge::Tracked { level: q_initial })
        } else {
            let q_final = -schedule.target();
            Evolution::scattering(psi0, energy, energy + q_final - q_initial, ExteriorGauge::Fixed)
        }
    }

    fn homogeneous(&self, psi0: Vec<Complex64>, schedule: &BiasSchedule) -> Evolution {
        if self.tracked {
            Evolution::homogeneous_gauged(psi0, -schedule.initial())
        } else {
            Evolution::homogeneous(psi0)
        }
    }
}

/// State carried by the one-mode engine.
struct OmaState {
    coarse: FrequencyMesh,
    psi_nr: Vec<Evolution>,
    theta: Vec<Complex64>,
    lambda: Vec<Complex64>,
    v: Evolution,
    interp: SourceInterpolation,
}

enum Ensemble {
    Direct(Vec<Evolution>),
    Oma(Box<OmaState>),
}

fn advance_all(evolutions: &mut [Evolution], sys: &CnSystem, kernels: KernelPair<'_>, cfg: &CnSettings, level: f64) -> Result<()> {
    evolutions
        .par_iter_mut()
        .try_for_each(|e| e.advance(sys, kernels, cfg, level))
}

fn overlaps(device: &Device, evolutions: &[Evolution], u: &[Complex64]) -> Vec<Complex64> {
    evolutions
        .iter()
        .map(|e| device.well_sum(|j| e.psi[j] * u[j].conj()))
        .collect()
}

/// Run the transient from the stationary state `init` at the schedule's
/// initial bias. `reference` is the stationary density at the final bias,
/// used for the distance diagnostic.
pub fn run_transient(
    device: &Device,
    init: &InitialState,
    opts: &TransientOptions,
    reference: Option<&[f64]>,
) -> Result<TransientRun> {
    let nodes = device.nodes();
    ensure_len(init.potential.len(), nodes, "initial potential")?;
    ensure_len(init.density.len(), nodes, "initial density")?;
    if let Some(r) = reference {
        ensure_len(r.len(), nodes, "reference density")?;
    }
    if !(opts.dt > 0.0 && opts.dt.is_finite()) {
        return Err(Error::InvalidParameter(format!("time step must be positive, got {}", opts.dt)));
    }
    let params = &device.params;
    let geometry = &device.geometry;
    let dx = device.dx();
    let hbar = params.hbar();
    let v0 = geometry.barrier;
    let schedule = opts.schedule;
    let b_initial = schedule.initial();
    let k_max = params.k_max();
    let cfg = CnSettings {
        dx,
        dt: opts.dt,
        kinetic: params.kinetic(),
        hbar,
    };
    let bounds = Boundaries::new(&cfg, &schedule, opts.steps.max(1));
    let kernels = bounds.pair();
    let poisson = PoissonSolver::new(nodes, dx, params.coupling());
    let nd = device.doping();
    let fine = FrequencyMesh::uniform(k_max, opts.cells)?;

    let q_initial = add(&device.external_potential(b_initial), &init.potential);
    let mut resonance = find_resonance(device, &q_initial, opts.newton)?.resonance;
    let mut u_prev = resonance.l2_mode(dx);

    let mut ensemble = match opts.engine {
        Engine::Direct => {
            let states: Vec<Evolution> = fine
                .points()
                .par_iter()
                .map(|&k| {
                    let phi = scattering_state(device, &q_initial, k, b_initial)?;
                    Ok(bounds.scattering(phi, params.dispersion(k, b_initial), &schedule))
                })
                .collect::<Result<_>>()?;
            Ensemble::Direct(states)
        }
        Engine::Oma { ratio } => {
            if ratio == 0 || !opts.cells.is_multiple_of(ratio) {
                return Err(Error::InvalidParameter(format!(
                    "fine cell count {} is not a multiple of the ratio {ratio}",
                    opts.cells
                )));
            }
            let coarse = FrequencyMesh::uniform(k_max, opts.cells / ratio)?;
            let q_fill = add(&device.filled_potential(b_initial), &init.potential);
            let psi_nr = coarse
                .points()
                .par_iter()
                .map(|&k| {
                    let phi = scattering_state(device, &q_fill, k, b_initial)?;
                    Ok(bounds.scattering(phi, params.dispersion(k, b_initial), &schedule))
                })
                .collect::<Result<Vec<_>>>()?;
            let theta = fine
                .points()
                .par_iter()
                .map(|&k| {
                    let phi = scattering_state(device, &q_fill, k, b_initial)?;
                    Ok(theta(device, k, b_initial, &phi, resonance.z, &u_prev))
                })
                .collect::<Result<Vec<_>>>()?;
            let interp = SourceInterpolation::new(device, &fine, &coarse, ratio, schedule.target())?;
            Ensemble::Oma(Box::new(OmaState {
                lambda: vec![Complex64::new(0.0, 0.0); fine.len()],
                v: bounds.homogeneous(u_prev.clone(), &schedule),
                coarse,
                psi_nr,
                theta,
                interp,
            }))
        }
    };

    let initial_density = match &ensemble {
        Ensemble::Direct(states) => {
            let psi: Vec<Vec<Complex64>> = states.iter().map(|e| e.psi.clone()).collect();
            density(device, &fine, &psi)
        }
        Ensemble::Oma(state) => {
            let psi: Vec<Vec<Complex64>> = state.psi_nr.iter().map(|e| e.psi.clone()).collect();
            transient_density(device, &state.coarse, &psi, &fine, &state.theta, &state.lambda, &state.v.psi, &u_prev).density
        }
    };
    let mut potential = init.potential.clone();
    let mut dens = init.density.clone();
    let mut records = Vec::with_capacity(opts.steps + 1);
    let mut scans = Vec::new();
    let mut cn_solves = 0;
    let mut mode_solves = 0;

    let diag = Diagnostics { device, reference };
    records.push(diag.record(0, 0.0, b_initial, &dens, &ensemble, &resonance, 0, 0, None, None));
    if opts.scan_steps.contains(&0) {
        scans.push(diag.scan(0, 0.0, b_initial, &fine, &ensemble, &resonance, &u_prev));
    }

    for l in 0..opts.steps {
        let t_old = l as f64 * opts.dt;
        let t_half = (l as f64 + 0.5) * opts.dt;
        let t_new = (l + 1) as f64 * opts.dt;
        let bias_half = schedule.at(t_half);
        let level_new = -schedule.at(t_new);

        let v_half = poisson.gummel_step(&potential, &dens, &nd, opts.reference_potential)?;
        let q_half = add(&device.external_potential(bias_half), &v_half);
        resonance = track_resonance(device, &q_half, &resonance, opts.newton)?;
        let aligned = align_phase(&resonance.l2_mode(dx), &u_prev, dx)?;
        let u_half = aligned.mode;
        let mu = mu_estimate(&u_half, &u_prev, dx, opts.dt).norm();

        let (solves, cross) = match &mut ensemble {
            Ensemble::Direct(states) => {
                let sys = CnSystem::new(&cfg, &q_half, kernels)?;
                advance_all(states, &sys, kernels, &cfg, level_new)?;
                let psi: Vec<Vec<Complex64>> = states.iter().map(|e| e.psi.clone()).collect();
                dens = density(device, &fine, &psi);
                (states.len(), None)
            }
            Ensemble::Oma(state) => {
                let q_fill_half = add(&device.filled_potential(bias_half), &v_half);
                let before = overlaps(device, &state.psi_nr, &u_half);
                let sys_nr = CnSystem::new(&cfg, &q_fill_half, kernels)?;
                advance_all(&mut state.psi_nr, &sys_nr, kernels, &cfg, level_new)?;
                let after = overlaps(device, &state.psi_nr, &u_half);
                let sys = CnSystem::new(&cfg, &q_half, kernels)?;
                state.v.advance(&sys, kernels, &cfg, level_new)?;
                mode_solves += 1;
                let z = resonance.z;
                let interp = &state.interp;
                for (p, lambda) in state.lambda.iter_mut().enumerate() {
                    let s_old = interp.source(p, t_old, v0, &before);
                    let s_new = interp.source(p, t_new, v0, &after);
                    *lambda = crate::oma_transient::lambda_step(*lambda, z, s_old, s_new, opts.dt, hbar);
                }
                let psi: Vec<Vec<Complex64>> = state.psi_nr.iter().map(|e| e.psi.clone()).collect();
                let parts = transient_density(device, &state.coarse, &psi, &fine, &state.theta, &state.lambda, &state.v.psi, &u_half);
                dens = parts.density;
                (state.psi_nr.len(), Some(parts.cross_term))
            }
        };
        cn_solves += solves;
        potential = poisson.linear(&dens, &nd)?;
        u_prev = u_half;

        let step = l + 1;
        records.push(diag.record(step, t_new, schedule.at(t_new), &dens, &ensemble, &resonance, resonance.iterations, solves, cross, Some(mu)));
        if opts.scan_steps.contains(&step) {
            scans.push(diag.scan(step, t_new, schedule.at(t_new), &fine, &ensemble, &resonance, &u_prev));
        }
    }

    Ok(TransientRun {
        records,
        scans,
        initial_density,
        potential,
        density: dens,
        resonance,
        cn_solves,
        mode_solves,
    })
}

struct Diagnostics<'a> {
    device: &'a Device,
    reference: Option<&'a [f64]>,
}

impl Diagnostics<'_> {
    #[allow(clippy::too_many_arguments)]
    fn record(
        &self,
        step: usize,
        time: f64,
        bias: f64,
        dens: &[f64],
        ensemble: &Ensemble,
        resonance: &Resonance,
        newton_iterations: usize,
        cn_solves: usize,
        cross_term: Option<f64>,
        mu: Option<f64>,
    ) -> StepRecord {
        let g = &self.device.geometry;
        let grid = &self.device.grid;
        let distance = self.reference.map(|r| {
            let diff: Vec<f64> = dens.iter().zip(r).map(|(a, b)| (a - b).powi(2)).collect();
            let norm: Vec<f64> = r.iter().map(|b| b * b).collect();
            100.0 * (grid.trapezoid(&diff, g.a2, g.b2) / grid.trapezoid(&norm, g.a2, g.b2)).sqrt()
        });
        let mode_charge = match ensemble {
            Ensemble::Oma(state) => {
                let dv: Vec<f64> = state.v.psi.iter().map(|v| v.norm_sqr()).collect();
                Some(grid.trapezoid(&dv, g.a2, g.b2))
            }
            Ensemble::Direct(_) => None,
        };
        StepRecord {
            step,
            time,
            bias,
            charge: grid.trapezoid(dens, g.a2, g.b2),
            distance,
            mode_charge,
            energy: resonance.energy(),
            width: resonance.width(),
            newton_iterations,
            cn_solves,
            cross_term,
            mu,
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn scan(
        &self,
        step: usize,
        time: f64,
        bias: f64,
        fine: &FrequencyMesh,
        ensemble: &Ensemble,
        resonance: &Resonance,
        u: &[Complex64],
    ) -> KScan {
        let device = self.device;
        let (k_plus, k_minus) = resonant_wavenumbers(device, resonance.energy(), bias);
        let mut out = KScan {
            step,
            time,
            k: fine.points().to_vec(),
            c: Vec::new(),
            c_theta: None,
            c_lambda: None,
            lambda_abs: None,
            k_plus,
            k_minus,
            energy: resonance.energy(),
            bias,
        };
        match ensemble {
            Ensemble::Direct(states) => {
                out.c = states.iter().map(|e| log_charge(device, |j| e.psi[j])).collect();
            }
            Ensemble::Oma(state) => {
                let v = &state.v.psi;
                let mut c = Vec::with_capacity(fine.len());
                let mut c_theta = Vec::with_capacity(fine.len());
                let mut c_lambda = Vec::with_capacity(fine.len());
                for p in 0..fine.len() {
                    let nr = &state.psi_nr[state.interp.coarse_of[p]].psi;
                    let shift = state.interp.retrend(p, time);
                    let (th, la) = (state.theta[p], state.lambda[p]);
                    c.push(log_charge(device, |j| nr[j] * shift + th * v[j] + la * u[j]));
                    c_theta.push(log_charge(device, |j| th * v[j]));
                    c_lambda.push(log_charge(device, |j| la * u[j]));
                }
                out.c = c;
                out.c_theta = Some(c_theta);
                out.c_lambda = Some(c_lambda);
                out.lambda_abs = Some(state.lambda.iter().map(|l| l.norm()).collect());
            }
        }
        out
    }
}

/// Observables of a resonant mode left to decay in a frozen potential, one
/// entry per time level starting with the initial one.
#[derive(Debug, Clone, PartialEq)]
pub struct FrozenDecay {
    /// Well charge ∫_{a2}^{b2} |v|² dx.
    pub well: Vec<f64>,
    /// Discrete L² norm over the whole domain.
    pub norm: Vec<f64>,
}

/// Evolve `mode` in the frozen potential `q` with exterior potential
/// −`bias` on the right.
pub fn frozen_mode_decay(device: &Device, q: &[f64], bias: f64, mode: Vec<Complex64>, dt: f64, steps: usize) -> Result<FrozenDecay> {
    ensure_len(q.len(), device.nodes(), "potential")?;
    ensure_len(mode.len(), device.nodes(), "mode")?;
    let params = &device.params;
    let cfg = CnSettings {
        dx: device.dx(),
        dt,
        kinetic: params.kinetic(),
        hbar: params.hbar(),
    };
    let bounds = Boundaries::new(&cfg, &BiasSchedule::constant(bias), steps.max(1));
    let kernels = bounds.pair();
    let sys = CnSystem::new(&cfg, q, kernels)?;
    let g = &device.geometry;
    let mut out = FrozenDecay {
        well: Vec::with_capacity(steps + 1),
        norm: Vec::with_capacity(steps + 1),
    };
    let mut record = |psi: &[Complex64]| {
        let d: Vec<f64> = psi.iter().map(|v| v.norm_sqr()).collect();
        out.well.push(device.grid.trapezoid(&d, g.a2, g.b2));
        out.norm.push(discrete_norm(psi, cfg.dx));
    };
    let mut evo = Evolution::homogeneous(mode);
    record(&evo.psi);
    for _ in 0..steps {
        evo.advance(&sys, kernels, &cfg, -bias)?;
        record(&evo.psi);
    }
    Ok(out)
}
