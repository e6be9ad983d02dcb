//! Stationary one-mode approximation.
//!
//! Each scattering state is split as Φ_k = Φ^nr_k + θ_k u, where Φ^nr_k is
//! computed with the quantum well filled to the barrier height (so it has no
//! resonance and varies slowly with k) and u is the resonant mode. The
//! coefficient θ_k carries the whole sharp energy dependence in closed form,
//! and its contribution to the density is integrated exactly cell by cell.

use num_complex::Complex64;

use crate::error::Result;
use crate::model::{Device, FrequencyMesh};
use crate::peak::resonant_cell_integral;
use crate::resonance::Resonance;
use crate::scattering::scattering_states;

/// ∫_well Φ^nr ū dx as a node sum over the sampled well, with `mode` in
/// the discrete L² normalisation.
pub fn well_overlap(device: &Device, phi_nr: &[Complex64], mode: &[Complex64]) -> Complex64 {
    device.well_sum(|j| phi_nr[j] * mode[j].conj())
}

/// θ_k = v₀ / (z − E_k) · ∫_well Φ^nr_k ū dx.
pub fn theta(device: &Device, k: f64, bias: f64, phi_nr: &[Complex64], z: Complex64, mode: &[Complex64]) -> Complex64 {
    let v0 = device.geometry.barrier;
    let e = device.params.dispersion(k, bias);
    v0 * well_overlap(device, phi_nr, mode) / (z - e)
}

/// Everything the OMA density assembly produced, kept for diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct OmaDecomposition {
    pub mesh: FrequencyMesh,
    pub phi_nr: Vec<Vec<Complex64>>,
    pub theta: Vec<Complex64>,
    pub resonance: Resonance,
    /// Exact integrals of g|θ|² over each mesh segment, with the smooth
    /// numerator interpolated linearly.
    pub cell_integrals: Vec<f64>,
    /// Trapezoid density of the non-resonant parts.
    pub nonresonant: Vec<f64>,
    /// L² size of the neglected cross term relative to the density.
    pub cross_term: f64,
}

impl OmaDecomposition {
    /// Σ_p J_p: the resonant occupation multiplying |u|².
    pub fn resonant_weight(&self) -> f64 {
        self.cell_integrals.iter().sum()
    }
}

/// Density from the one-mode approximation for the potential energy `q`
/// (external potential plus self-consistent part), given the resonance of
/// `q`.
///
/// `q_filled` is the same potential with the well filled.
pub fn oma_density(
    device: &Device,
    q_filled: &[f64],
    bias: f64,
    mesh: &FrequencyMesh,
    resonance: Resonance,
) -> Result<(Vec<f64>, OmaDecomposition)> {
    let params = &device.params;
    let dx = device.dx();
    let mode = resonance.l2_mode(dx);
    let z = resonance.z;
    let v0 = device.geometry.barrier;
    let phi_nr = scattering_states(device, q_filled, mesh, bias)?;
    let k = mesh.points();

    let overlaps: Vec<Complex64> = phi_nr.iter().map(|phi| well_overlap(device, phi, &mode)).collect();
    let theta: Vec<Complex64> = k
        .iter()
        .zip(&overlaps)
        .map(|(&kp, w)| v0 * w / (z - params.dispersion(kp, bias)))
        .collect();
    // R_k = g(k) v₀² |∫ Φ^nr ū|²: the smooth numerator of g|θ|².
    let r: Vec<f64> = k
        .iter()
        .zip(&overlaps)
        .map(|(&kp, w)| params.injection(kp) * v0 * v0 * w.norm_sqr())
        .collect();
    let gamma = params.gamma();
    let cell_integrals: Vec<f64> = mesh
        .segments()
        .into_iter()
        .map(|(ka, kb, i, j)| resonant_cell_integral(ka, kb, r[i], r[j], z, bias, gamma))
        .collect();

    let weights = mesh.trapezoid_weights();
    let nodes = device.nodes();
    let mut nonresonant = vec![0.0; nodes];
    let mut cross = vec![0.0; nodes];
    for p in 0..k.len() {
        let wg = weights[p] * params.injection(k[p]);
        for j in 0..nodes {
            nonresonant[j] += wg * phi_nr[p][j].norm_sqr();
            cross[j] += wg * 2.0 * (phi_nr[p][j] * (theta[p] * mode[j]).conj()).re;
        }
    }
    let weight: f64 = cell_integrals.iter().sum();
    let density: Vec<f64> = nonresonant
        .iter()
        .zip(&mode)
        .map(|(n, u)| n + weight * u.norm_sqr())
        .collect();
    let l2 = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let cross_term = l2(&cross) / l2(&density).max(f64::MIN_POSITIVE);

    Ok((
        density,
        OmaDecomposition {
            mesh: mesh.clone(),
            phi_nr,
            theta,
            resonance,
            cell_integrals,
            nonresonant,
            cross_term,
        },
    ))
}
