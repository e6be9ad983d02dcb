//! First resonance of the open double-barrier Hamiltonian.
//!
//! The resonance is the complex energy z = E − iΓ/2 for which the P¹ finite
//! element discretisation with outgoing boundary conditions,
//!
//! ```text
//! M(z) = M1 + s(z − Q_0) M2 + s(z − Q_J) M3 − z M4,
//! ```
//!
//! has a non-trivial kernel. It is found by Newton's method on the bordered
//! system, started from the lowest Dirichlet eigenpair of the quantum well or
//! from a previous resonance.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{ensure_finite, ensure_len, Error, Result};
use crate::linalg::{norm2, solve_bordered, Tridiagonal};
use crate::model::Device;
use crate::scattering::branch_sqrt;

/// Finite element matrices of the nonlinear eigenproblem.
#[derive(Debug, Clone, PartialEq)]
pub struct FemSystem {
    /// Stiffness plus potential mass: diagonal and off-diagonal.
    stiff_diag: Vec<f64>,
    stiff_off: Vec<f64>,
    /// Lumped-free P¹ mass matrix M4.
    mass_diag: Vec<f64>,
    mass_off: f64,
    /// Corner value −i ħ/√(2m) of M2 and M3.
    corner: Complex64,
    left_level: f64,
    right_level: f64,
}

impl FemSystem {
    /// Assemble the matrices for the nodal potential `q` on a grid with
    /// spacing `dx`. The exterior potential is taken equal to the end values
    /// of `q`.
    pub fn assemble(q: &[f64], dx: f64, kinetic: f64) -> Result<Self> {
        ensure_finite(q, "potential")?;
        let n = q.len();
        if n < 3 {
            return Err(Error::InvalidParameter("FEM system needs at least 3 nodes".into()));
        }
        let last = n - 1;
        let stiff = kinetic / dx;
        let xi = |j: usize| {
            if j == 0 {
                q[0] / 4.0 + q[1] / 12.0
            } else if j == last {
                q[last] / 4.0 + q[last - 1] / 12.0
            } else {
                (q[j - 1] + q[j + 1]) / 12.0 + q[j] / 2.0
            }
        };
        let stiff_diag = (0..n)
            .map(|j| {
                let k = if j == 0 || j == last { 1.0 } else { 2.0 };
                stiff * k + dx * xi(j)
            })
            .collect();
        let stiff_off = (0..last)
            .map(|j| -stiff + dx * (q[j] + q[j + 1]) / 12.0)
            .collect();
        let mass_diag = (0..n)
            .map(|j| if j == 0 || j == last { dx / 3.0 } else { 2.0 * dx / 3.0 })
            .collect();
        Ok(Self {
            stiff_diag,
            stiff_off,
            mass_diag,
            mass_off: dx / 6.0,
            corner: Complex64::new(0.0, -kinetic.sqrt()),
            left_level: q[0],
            right_level: q[last],
        })
    }

    pub fn dim(&self) -> usize {
        self.stiff_diag.len()
    }

    /// M(z).
    pub fn matrix(&self, z: Complex64) -> Tridiagonal {
        let n = self.dim();
        let mut m = Tridiagonal::zeros(n);
        for j in 0..n {
            m.diag[j] = self.stiff_diag[j] - z * self.mass_diag[j];
        }
        for j in 0..n - 1 {
            let v = self.stiff_off[j] - z * self.mass_off;
            m.sub[j] = v;
            m.sup[j] = v;
        }
        m.diag[0] += branch_sqrt(z - self.left_level) * self.corner;
        m.diag[n - 1] += branch_sqrt(z - self.right_level) * self.corner;
        m
    }

    /// dM/dz.
    pub fn derivative(&self, z: Complex64) -> Tridiagonal {
        let n = self.dim();
        let mut m = Tridiagonal::zeros(n);
        for j in 0..n {
            m.diag[j] = Complex64::new(-self.mass_diag[j], 0.0);
        }
        for j in 0..n - 1 {
            m.sub[j] = Complex64::new(-self.mass_off, 0.0);
            m.sup[j] = m.sub[j];
        }
        m.diag[0] += self.corner / (2.0 * branch_sqrt(z - self.left_level));
        m.diag[n - 1] += self.corner / (2.0 * branch_sqrt(z - self.right_level));
        m
    }
}

/// A converged resonance.
#[derive(Debug, Clone, PartialEq)]
pub struct Resonance {
    /// Complex energy E − iΓ/2 in eV.
    pub z: Complex64,
    /// Nodal mode with unit Euclidean norm.
    pub mode: Vec<Complex64>,
    /// Number of Newton updates performed.
    pub iterations: usize,
    /// ‖M(zⁿ)uⁿ‖₂ before each update, ending with the accepted value.
    pub residuals: Vec<f64>,
}

impl Resonance {
    pub fn energy(&self) -> f64 {
        self.z.re
    }

    /// Width Γ = −2 Im z.
    pub fn width(&self) -> f64 {
        -2.0 * self.z.im
    }

    /// Mode normalised in the discrete L² sense, Δx Σ|u_j|² = 1.
    pub fn l2_mode(&self, dx: f64) -> Vec<Complex64> {
        let s = 1.0 / dx.sqrt();
        self.mode.iter().map(|u| u * s).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Once the residual is below this level, a step that fails to halve it
    /// means round-off has been reached and the iterate is accepted.
    pub stagnation_floor: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-15,
            max_iterations: 50,
            stagnation_floor: 1e-12,
        }
    }
}

/// Lowest eigenpair of the finite-difference Hamiltonian restricted to the
/// nodes strictly inside (a, b) with homogeneous Dirichlet ends.
///
/// Returns the energy and the mode extended by zero, with unit Euclidean
/// norm.
pub fn dirichlet_ground_state(device: &Device, q: &[f64], a: f64, b: f64) -> Result<(f64, Vec<Complex64>)> {
    ensure_len(q.len(), device.nodes(), "potential")?;
    ensure_finite(q, "potential")?;
    let dx = device.dx();
    let inside: Vec<usize> = (0..device.nodes())
        .filter(|&j| {
            let x = device.grid.x(j);
            x > a + 1e-9 && x < b - 1e-9
        })
        .collect();
    if inside.len() < 2 {
        return Err(Error::InvalidGeometry(format!(
            "interval ({a}, {b}) holds fewer than two grid nodes"
        )));
    }
    let m = inside.len();
    let t = device.params.kinetic() / (dx * dx);
    let h = DMatrix::from_fn(m, m, |r, c| {
        if r == c {
            2.0 * t + q[inside[r]]
        } else if r.abs_diff(c) == 1 {
            -t
        } else {
            0.0
        }
    });
    let eig = h
        .try_symmetric_eigen(f64::EPSILON, 10_000)
        .ok_or_else(|| Error::Eigen("symmetric eigensolver did not converge".into()))?;
    let (idx, &e0) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty spectrum");
    let v = eig.eigenvectors.column(idx);
    let mut mode = vec![Complex64::new(0.0, 0.0); device.nodes()];
    for (r, &j) in inside.iter().enumerate() {
        mode[j] = Complex64::new(v[r], 0.0);
    }
    let norm = norm2(&mode);
    mode.iter_mut().for_each(|u| *u /= norm);
    fix_phase(&mut mode);
    Ok((e0, mode))
}

/// Rotate `u` so that its largest-magnitude entry is real and positive.
pub fn fix_phase(u: &mut [Complex64]) {
    let Some(peak) = u
        .iter()
        .copied()
        .max_by(|a, b| a.norm_sqr().total_cmp(&b.norm_sqr()))
    else {
        return;
    };
    if peak.norm() == 0.0 {
        return;
    }
    let rot = peak.conj() / peak.norm();
    u.iter_mut().for_each(|v| *v *= rot);
}

/// Bordered Newton iteration for M(z)u = 0, uᴴu = 1.
pub fn newton_resonance(
    sys: &FemSystem,
    u0: &[Complex64],
    z0: Complex64,
    opts: NewtonOptions,
) -> Result<Resonance> {
    ensure_len(u0.len(), sys.dim(), "initial mode")?;
    if !z0.is_finite() || u0.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("resonance initial guess"));
    }
    let mut u = u0.to_vec();
    let norm = norm2(&u);
    if norm == 0.0 {
        return Err(Error::InvalidParameter("initial mode is zero".into()));
    }
    u.iter_mut().for_each(|v| *v /= norm);
    let mut z = z0;
    let mut residuals = Vec::new();
    for it in 0..=opts.max_iterations {
        let m = sys.matrix(z);
        let r = m.apply(&u);
        let res = norm2(&r);
        if !res.is_finite() {
            return Err(Error::ResonanceDiverged {
                iterations: it,
                residual: res,
            });
        }
        let stagnated = residuals
            .last()
            .is_some_and(|&prev: &f64| res < opts.stagnation_floor && res > 0.5 * prev);
        residuals.push(res);
        if res < opts.tolerance || stagnated {
            fix_phase(&mut u);
            return Ok(Resonance {
                z,
                mode: u,
                iterations: it,
                residuals,
            });
        }
        if it == opts.max_iterations {
            break;
        }
        let border = sys.derivative(z).apply(&u);
        let rhs: Vec<Complex64> = r.iter().map(|v| -v).collect();
        let conj_u: Vec<Complex64> = u.iter().map(|v| v.conj()).collect();
        let (du, dz) = solve_bordered(&m, &border, &conj_u, Complex64::new(0.0, 0.0), &rhs, Complex64::new(0.0, 0.0))?;
        for (ui, di) in u.iter_mut().zip(&du) {
            *ui += di;
        }
        z += dz;
        let norm = norm2(&u);
        u.iter_mut().for_each(|v| *v /= norm);
    }
    Err(Error::ResonanceDiverged {
        iterations: opts.max_iterations,
        residual: *residuals.last().unwrap_or(&f64::NAN),
    })
}

/// Result of a resonance search from scratch.
#[derive(Debug, Clone, PartialEq)]
pub struct ResonanceSearch {
    /// Lowest Dirichlet eigenvalue used as the initial guess.
    pub dirichlet_energy: f64,
    pub resonance: Resonance,
}

/// Resonance of the potential `q`, initialised from the well's Dirichlet
/// ground state on (a2, b2).
pub fn find_resonance(device: &Device, q: &[f64], opts: NewtonOptions) -> Result<ResonanceSearch> {
    let g = &device.geometry;
    let (e0, u0) = dirichlet_ground_state(device, q, g.a2, g.b2)?;
    let sys = FemSystem::assemble(q, device.dx(), device.params.kinetic())?;
    let resonance = newton_resonance(&sys, &u0, Complex64::new(e0, 0.0), opts)?;
    Ok(ResonanceSearch {
        dirichlet_energy: e0,
        resonance,
    })
}

/// Resonance of `q` warm-started from a previous one.
pub fn track_resonance(device: &Device, q: &[f64], previous: &Resonance, opts: NewtonOptions) -> Result<Resonance> {
    let sys = FemSystem::assemble(q, device.dx(), device.params.kinetic())?;
    newton_resonance(&sys, &previous.mode, previous.z, opts)
}
