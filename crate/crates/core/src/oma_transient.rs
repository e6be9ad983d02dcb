//! Building blocks of the transient one-mode approximation.
//!
//! A time-dependent state is split as Ψ_k = Ψ^nr_k + θ_k v + λ_k u, where
//! Ψ^nr_k evolves with the well filled, v is the initial resonant mode
//! carried forward by the Schrödinger equation, and λ_k follows a scalar ODE
//! driven by the overlap of Ψ^nr_k with the current resonant mode u.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{Device, FrequencyMesh};

/// Overlaps below this size mean the tracked resonance changed identity.
pub const MIN_MODE_OVERLAP: f64 = 1e-8;

/// ∫ a b̄ dx by the trapezoid rule on the nodes.
pub fn inner(a: &[Complex64], b: &[Complex64], dx: f64) -> Complex64 {
    let n = a.len();
    let sum: Complex64 = a.iter().zip(b).map(|(x, y)| x * y.conj()).sum();
    dx * (sum - 0.5 * (a[0] * b[0].conj() + a[n - 1] * b[n - 1].conj()))
}

/// Mode rotated so that its overlap with the previous half-step mode is real
/// and non-negative.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedMode {
    pub mode: Vec<Complex64>,
    /// Overlap ω = ∫ ũ ū_prev dx of the raw mode.
    pub omega: Complex64,
}

impl AlignedMode {
    /// The phase factor e^{iφ} = ω̄/|ω| that was applied.
    pub fn rotation(&self) -> Complex64 {
        self.omega.conj() / self.omega.norm()
    }
}

/// Remove the arbitrary phase of a freshly computed mode by aligning it
/// with the previous one. Both must be L²-normalised.
pub fn align_phase(raw: &[Complex64], previous: &[Complex64], dx: f64) -> Result<AlignedMode> {
    let omega = inner(raw, previous, dx);
    if omega.norm().is_nan() || omega.norm() < MIN_MODE_OVERLAP {
        return Err(Error::ResonanceJump { overlap: omega.norm() });
    }
    let rot = omega.conj() / omega.norm();
    Ok(AlignedMode {
        mode: raw.iter().map(|u| u * rot).collect(),
        omega,
    })
}

/// Finite-difference estimate of μ = ∫ ∂ₜu ū dx between two aligned
/// half-step modes: (i/Δt) Im ∫ u_new ū_prev dx. Zero up to round-off after
/// alignment; kept as a diagnostic.
pub fn mu_estimate(current: &[Complex64], previous: &[Complex64], dx: f64, dt: f64) -> Complex64 {
    Complex64::new(0.0, inner(current, previous, dx).im / dt)
}

/// One Crank-Nicolson step of λ' + (i/ħ) z λ = S:
/// λ⁺ = [(1 − iΔt z/2ħ) λ + Δt (S_old + S_new)/2] / (1 + iΔt z/2ħ).
pub fn lambda_step(lambda: Complex64, z: Complex64, s_old: Complex64, s_new: Complex64, dt: f64, hbar: f64) -> Complex64 {
    let a = Complex64::i() * (0.5 * dt / hbar) * z;
    ((1.0 - a) * lambda + 0.5 * dt * (s_old + s_new)) / (1.0 + a)
}

/// Maps every fine-mesh frequency to the coarse frequency whose
/// non-resonant state stands in for it, and carries the asymptotic
/// energies used to move the time oscillation from one to the other.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceInterpolation {
    /// Coarse index for each fine index.
    pub coarse_of: Vec<usize>,
    /// ε^∞ at the fine frequencies.
    pub fine_energy: Vec<f64>,
    /// ε^∞ at the coarse frequencies.
    pub coarse_energy: Vec<f64>,
    hbar: f64,
}

impl SourceInterpolation {
    /// Fine and coarse uniform meshes with `ratio` fine cells per coarse
    /// cell; fine frequency p uses the coarse cell that contains it.
    pub fn new(device: &Device, fine: &FrequencyMesh, coarse: &FrequencyMesh, ratio: usize, final_bias: f64) -> Result<Self> {
        if ratio == 0 || fine.len() != ratio * coarse.len() {
            return Err(Error::InvalidMesh(format!(
                "fine mesh of {} points is not {ratio} times the coarse mesh of {}",
                fine.len(),
                coarse.len()
            )));
        }
        let p = &device.params;
        Ok(Self {
            coarse_of: (0..fine.len()).map(|i| i / ratio).collect(),
            fine_energy: fine.points().iter().map(|&k| p.dispersion(k, final_bias)).collect(),
            coarse_energy: coarse.points().iter().map(|&k| p.dispersion(k, final_bias)).collect(),
            hbar: p.hbar(),
        })
    }

    /// Phase e^{(i/ħ)(ε^∞_c − ε^∞_p) t} taking the coarse oscillation at
    /// time `t` to the one of fine frequency `p`.
    pub fn retrend(&self, p: usize, t: f64) -> Complex64 {
        let c = self.coarse_of[p];
        Complex64::from_polar(1.0, (self.coarse_energy[c] - self.fine_energy[p]) * t / self.hbar)
    }

    /// Source S_p(t) = (i/ħ) v₀ ∫_well Ψ̃^nr_c ū dx · e^{−(i/ħ)ε^∞_p t}, from
    /// the coarse overlaps ∫_well Ψ^nr_c ū dx.
    pub fn source(&self, p: usize, t: f64, v0: f64, coarse_overlaps: &[Complex64]) -> Complex64 {
        let c = self.coarse_of[p];
        Complex64::new(0.0, v0 / self.hbar) * coarse_overlaps[c] * self.retrend(p, t)
    }
}

/// Pieces of the transient OMA density.
#[derive(Debug, Clone, PartialEq)]
pub struct TransientDensity {
    pub density: Vec<f64>,
    /// ∫ g |θ|² dk on the fine mesh.
    pub theta_weight: f64,
    /// ∫ g |λ|² dk on the fine mesh.
    pub lambda_weight: f64,
    /// Relative L² size of the dropped cross term 2 Re(θ v λ̄ ū).
    pub cross_term: f64,
}

/// Density from the decomposition: trapezoid of g|Ψ^nr|² on the coarse
/// mesh plus the two resonant occupations on the fine mesh times the mode
/// densities.
#[allow(clippy::too_many_arguments)]
pub fn transient_density(
    device: &Device,
    coarse: &FrequencyMesh,
    psi_nr: &[Vec<Complex64>],
    fine: &FrequencyMesh,
    theta: &[Complex64],
    lambda: &[Complex64],
    v: &[Complex64],
    u: &[Complex64],
) -> TransientDensity {
    let params = &device.params;
    let mut density = vec![0.0; device.nodes()];
    for ((&k, w), psi) in coarse.points().iter().zip(coarse.trapezoid_weights()).zip(psi_nr) {
        let wg = w * params.injection(k);
        for (n, p) in density.iter_mut().zip(psi) {
            *n += wg * p.norm_sqr();
        }
    }
    let mut theta_weight = 0.0;
    let mut lambda_weight = 0.0;
    let mut mixed = Complex64::new(0.0, 0.0);
    for (((&k, w), t), l) in fine.points().iter().zip(fine.trapezoid_weights()).zip(theta).zip(lambda) {
        let wg = w * params.injection(k);
        theta_weight += wg * t.norm_sqr();
        lambda_weight += wg * l.norm_sqr();
        mixed += wg * t * l.conj();
    }
    for ((n, a), b) in density.iter_mut().zip(v).zip(u) {
        *n += theta_weight * a.norm_sqr() + lambda_weight * b.norm_sqr();
    }
    let cross: f64 = v
        .iter()
        .zip(u)
        .map(|(a, b)| (2.0 * (mixed * a * b.conj()).re).powi(2))
        .sum();
    let total: f64 = density.iter().map(|x| x * x).sum();
    TransientDensity {
        density,
        theta_weight,
        lambda_weight,
        cross_term: (cross / total.max(f64::MIN_POSITIVE)).sqrt(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const HBAR: f64 = 0.658_211_956_9;

    fn bump(n: usize) -> Vec<Complex64> {
        let dx = 1.0 / (n - 1) as f64;
        let raw: Vec<Complex64> = (0..n)
            .map(|j| {
                let x = j as f64 * dx;
                Complex64::from_polar((std::f64::consts::PI * x).sin(), 0.3 * x)
            })
            .collect();
        let norm = inner(&raw, &raw, dx).re.sqrt();
        raw.into_iter().map(|v| v / norm).collect()
    }

    #[test]
    fn alignment_undoes_a_pure_phase() {
        let n = 101;
        let dx = 1.0 / 100.0;
        let u = bump(n);
        let same = align_phase(&u, &u, dx).unwrap();
        assert!(same.rotation().arg().abs() < 1e-15);
        let turned: Vec<Complex64> = u.iter().map(|v| v * Complex64::from_polar(1.0, std::f64::consts::FRAC_PI_3)).collect();
        let back = align_phase(&turned, &u, dx).unwrap();
        for (a, b) in back.mode.iter().zip(&u) {
            assert!((a - b).norm() < 1e-14);
        }
        assert!(inner(&back.mode, &u, dx).im.abs() < 1e-12);
    }

    #[test]
    fn alignment_rejects_orthogonal_modes() {
        let n = 101;
        let dx = 1.0 / 100.0;
        let wave = |m: f64| -> Vec<Complex64> {
            (0..n)
                .map(|j| Complex64::new(2.0_f64.sqrt() * (m * std::f64::consts::PI * j as f64 * dx).sin(), 0.0))
                .collect()
        };
        let result = align_phase(&wave(2.0), &wave(1.0), dx);
        assert!(matches!(result, Err(Error::ResonanceJump { .. })), "{result:?}");
    }

    #[test]
    fn real_energy_keeps_modulus() {
        let z = Complex64::new(0.1, 0.0);
        let mut lambda = Complex64::new(0.3, -0.4);
        for _ in 0..1000 {
            lambda = lambda_step(lambda, z, Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0), 1.0, HBAR);
        }
        assert!((lambda.norm() - 0.5).abs() < 1e-13);
    }

    fn unforced_error(dt: f64) -> f64 {
        let z = Complex64::new(0.08, -2e-4);
        let lambda0 = Complex64::new(0.3, -0.4);
        let horizon = 400.0;
        let steps = (horizon / dt).round() as usize;
        let zero = Complex64::new(0.0, 0.0);
        let mut lambda = lambda0;
        for _ in 0..steps {
            lambda = lambda_step(lambda, z, zero, zero, dt, HBAR);
        }
        let exact = lambda0 * (-Complex64::i() * z * horizon / HBAR).exp();
        (lambda - exact).norm()
    }

    #[test]
    fn unforced_decay_is_second_order() {
        let errors: Vec<f64> = [1.0, 0.5, 0.25].iter().map(|&dt| unforced_error(dt)).collect();
        for w in errors.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!((order - 2.0).abs() < 0.05, "observed order {order} from {errors:?}");
        }
    }

    #[test]
    fn resonant_forcing_grows_linearly() {
        // λ' + (i/ħ)Eλ = s e^{−iEt/ħ} has the solution λ = s t e^{−iEt/ħ}.
        let energy = 0.08;
        let z = Complex64::new(energy, 0.0);
        let s = Complex64::new(1e-3, 2e-3);
        let dt = 1.0;
        let source = |t: f64| s * Complex64::from_polar(1.0, -energy * t / HBAR);
        let mut lambda = Complex64::new(0.0, 0.0);
        let steps = 2000;
        for l in 0..steps {
            let t = l as f64 * dt;
            lambda = lambda_step(lambda, z, source(t), source(t + dt), dt, HBAR);
        }
        let slope = lambda.norm() / (steps as f64 * dt);
        assert!((slope / s.norm() - 1.0).abs() < 0.02, "slope ratio {}", slope / s.norm());
    }

    #[test]
    fn source_on_the_coarse_node_is_unchanged() {
        let device = Device::standard();
        let k_max = device.params.k_max();
        let coarse = FrequencyMesh::uniform(k_max, 10).unwrap();
        let interp = SourceInterpolation::new(&device, &coarse, &coarse, 1, 0.1).unwrap();
        let overlaps: Vec<Complex64> = (0..10).map(|c| Complex64::new(c as f64, 1.0)).collect();
        for p in 0..10 {
            let s = interp.source(p, 1234.5, 0.3, &overlaps);
            let direct = Complex64::new(0.0, 0.3 / device.params.hbar()) * overlaps[p];
            assert!((s - direct).norm() < 1e-15 * direct.norm());
        }
    }

    #[test]
    fn interpolated_source_oscillates_at_the_target_energy() {
        let device = Device::standard();
        let k_max = device.params.k_max();
        let coarse = FrequencyMesh::uniform(k_max, 10).unwrap();
        let fine = FrequencyMesh::uniform(k_max, 30).unwrap();
        let bias = 0.1;
        let interp = SourceInterpolation::new(&device, &fine, &coarse, 3, bias).unwrap();
        let hbar = device.params.hbar();
        for p in [0, 7, 17, 29] {
            let c = interp.coarse_of[p];
            let e_c = device.params.dispersion(coarse.points()[c], bias);
            let e_p = device.params.dispersion(fine.points()[p], bias);
            // A coarse state oscillating exactly at its own energy.
            let at = |t: f64| vec![Complex64::from_polar(1.0, -e_c * t / hbar); 10];
            let s0 = interp.source(p, 0.0, 0.3, &at(0.0));
            let s1 = interp.source(p, 50.0, 0.3, &at(50.0));
            let expected = Complex64::from_polar(1.0, -e_p * 50.0 / hbar);
            assert!((s1 / s0 - expected).norm() < 1e-12);
        }
    }

    #[test]
    fn density_without_resonant_parts_is_the_trapezoid() {
        let device = Device::standard();
        let mesh = FrequencyMesh::uniform(device.params.k_max(), 20).unwrap();
        let q = device.external_potential(0.0);
        let states = crate::scattering::scattering_states(&device, &q, &mesh, 0.0).unwrap();
        let zero = vec![Complex64::new(0.0, 0.0); mesh.len()];
        let mode = vec![Complex64::new(1.0, 0.0); device.nodes()];
        let parts = transient_density(&device, &mesh, &states, &mesh, &zero, &zero, &mode, &mode);
        let reference = crate::scattering::density(&device, &mesh, &states);
        assert_eq!(parts.density, reference);
        assert_eq!(parts.cross_term, 0.0);
    }
}
