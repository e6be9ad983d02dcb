//! Crank-Nicolson propagation with discrete transparent boundary conditions.
//!
//! The interior scheme is
//!
//! ```text
//! ψ_{j−1} + (−2 + wQ_j + iR) ψ_j + ψ_{j+1}
//!     = −ψ^l_{j−1} + (2 − wQ_j + iR) ψ^l_j − ψ^l_{j+1},
//! ```
//!
//! with w = −Δx²/(ħ²/2m) and R = 2ħΔx²/((ħ²/2m)Δt). At each end the row is
//! replaced by the exact discrete transparent condition, a convolution in
//! time of the boundary values with the kernel s^l. Three variants are
//! supported: homogeneous (data compactly supported inside), scattering
//! (the data is a stationary state that keeps being injected) and gauged
//! scattering for a time-dependent exterior potential at x = L.

use num_complex::Complex64;

use crate::error::{ensure_finite, ensure_len, Error, Result};
use crate::linalg::{Tridiagonal, TridiagonalLu};

/// Step sizes and scaled constants of the scheme.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CnSettings {
    pub dx: f64,
    pub dt: f64,
    /// ħ²/2m in eV·nm².
    pub kinetic: f64,
    /// ħ in eV·fs.
    pub hbar: f64,
}

impl CnSettings {
    /// R = 4mΔx²/(ħΔt).
    pub fn r(&self) -> f64 {
        2.0 * self.hbar * self.dx * self.dx / (self.kinetic * self.dt)
    }

    /// σ = 2mΔx²Q/ħ², the scaled potential; w·Q = −σ.
    pub fn sigma(&self, q: f64) -> f64 {
        self.dx * self.dx * q / self.kinetic
    }
}

/// Convolution coefficients s^0, s^1, ... of one transparent boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct DtbcKernel {
    pub sigma: f64,
    pub r: f64,
    pub alpha: Complex64,
    pub phi: f64,
    pub mu: f64,
    coeffs: Vec<Complex64>,
}

impl DtbcKernel {
    /// Kernel for scaled boundary potential `sigma`, with coefficients up
    /// to index `l_max`.
    pub fn new(sigma: f64, r: f64, l_max: usize) -> Self {
        let a = r * r + sigma * sigma;
        let b = r * r + (sigma + 4.0).powi(2);
        let phi = (2.0 * r * (sigma + 2.0)).atan2(r * r - 4.0 * sigma - sigma * sigma);
        let mu = (r * r + 4.0 * sigma + sigma * sigma) / (a * b).sqrt();
        assert!(mu.abs() <= 1.0 + 1e-12, "|mu| = {} exceeds one", mu.abs());
        let alpha = Complex64::new(0.0, 0.5) * (a * b).powf(0.25) * Complex64::from_polar(1.0, 0.5 * phi);

        let mut coeffs = Vec::with_capacity(l_max + 1);
        // Legendre values P_{l−2}, P_{l−1}, P_l by the three-term recurrence.
        let (mut p_lm2, mut p_lm1) = (0.0_f64, 0.0_f64);
        for l in 0..=l_max {
            let p_l = match l {
                0 => 1.0,
                1 => mu,
                _ => ((2 * l - 1) as f64 * mu * p_lm1 - (l - 1) as f64 * p_lm2) / l as f64,
            };
            let two_l_minus_1 = 2.0 * l as f64 - 1.0;
            let mut s = alpha * Complex64::from_polar(1.0, -(l as f64) * phi) * ((p_l - p_lm2) / two_l_minus_1);
            if l == 0 {
                s += Complex64::new(1.0 + 0.5 * sigma, -0.5 * r);
            } else if l == 1 {
                s += Complex64::new(1.0 + 0.5 * sigma, 0.5 * r);
            }
            coeffs.push(s);
            p_lm2 = p_lm1;
            p_lm1 = p_l;
        }
        Self {
            sigma,
            r,
            alpha,
            phi,
            mu,
            coeffs,
        }
    }

    pub fn coeff(&self, l: usize) -> Complex64 {
        self.coeffs[l]
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn l_max(&self) -> usize {
        self.coeffs.len() - 1
    }
}

/// Exterior data of a stationary state injected through one boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Incoming {
    /// Initial value at the boundary node.
    pub edge: Complex64,
    /// Initial value at the neighbouring interior node.
    pub inner: Complex64,
    /// Energy that sets the exterior time dependence e^{−iEt/ħ}.
    pub energy: f64,
}

/// How the right boundary treats the exterior potential.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExteriorGauge {
    /// Constant exterior potential built into the kernel.
    Fixed,
    /// Time-dependent exterior potential removed by the phase
    /// ε^l = exp((i/ħ) Σ (Q^k + Q^{k+1}) Δt/2); the kernel must be the
    /// σ = 0 one.
    Tracked { level: f64 },
}

#[derive(Debug, Clone)]
struct BoundaryState {
    incoming: Option<Incoming>,
    /// Σ_{m<l} s^m ζ^{−m}, updated incrementally.
    prefix: Complex64,
    gauge_mode: ExteriorGauge,
    gauge: Complex64,
    /// ε^k ψ^k at the boundary node, k = 1..=l.
    history: Vec<Complex64>,
    /// ε^{l} ψ^{l} at the neighbouring node.
    prev_inner: Complex64,
}

impl BoundaryState {
    fn new(incoming: Option<Incoming>, gauge_mode: ExteriorGauge, inner0: Complex64) -> Self {
        Self {
            incoming,
            prefix: Complex64::new(0.0, 0.0),
            gauge_mode,
            gauge: Complex64::new(1.0, 0.0),
            history: Vec::new(),
            prev_inner: inner0,
        }
    }

    /// Right-hand side b^l of the boundary row ψ_inner − s^0 ψ_edge = b^l
    /// for the step to level `l`. Also advances the gauge phase.
    fn rhs(&mut self, l: usize, kernel: &DtbcKernel, cfg: &CnSettings, level: f64) -> (Complex64, usize) {
        if let ExteriorGauge::Tracked { level: prev } = self.gauge_mode {
            self.gauge *= Complex64::from_polar(1.0, (prev + level) * cfg.dt / (2.0 * cfg.hbar));
            self.gauge_mode = ExteriorGauge::Tracked { level };
        }
        let mut acc = -self.prev_inner;
        // Σ_{k=1}^{l−1} s^{l−k} ε^k ψ^k_edge
        for (k, h) in self.history.iter().enumerate() {
            acc += kernel.coeff(l - (k + 1)) * h;
        }
        if let Some(inc) = self.incoming {
            let omega = inc.energy * cfg.dt / cfg.hbar;
            self.prefix += kernel.coeff(l - 1) * Complex64::from_polar(1.0, (l - 1) as f64 * omega);
            let zeta = Complex64::from_polar(1.0, -omega);
            let zeta_l = Complex64::from_polar(1.0, -(l as f64) * omega);
            let zeta_lm1 = Complex64::from_polar(1.0, -((l - 1) as f64) * omega);
            acc -= inc.edge * zeta_l * self.prefix;
            acc += inc.inner * zeta_lm1 * (1.0 + zeta);
        }
        (acc / self.gauge, self.history.len())
    }

    fn record(&mut self, edge: Complex64, inner: Complex64) {
        self.history.push(self.gauge * edge);
        self.prev_inner = self.gauge * inner;
    }
}

/// Left and right kernels used at one time step.
#[derive(Debug, Clone, Copy)]
pub struct KernelPair<'a> {
    pub left: &'a DtbcKernel,
    pub right: &'a DtbcKernel,
}

/// Factorised Crank-Nicolson matrix for one time step. Shared by every
/// wave function advanced with the same potential and kernels.
#[derive(Debug, Clone)]
pub struct CnSystem {
    lu: TridiagonalLu,
    /// 2 − wQ_j + iR = 2 + σ_j + iR for the explicit half.
    explicit_diag: Vec<Complex64>,
}

impl CnSystem {
    pub fn new(cfg: &CnSettings, q_mid: &[f64], kernels: KernelPair<'_>) -> Result<Self> {
        ensure_finite(q_mid, "potential")?;
        let n = q_mid.len();
        if n < 3 {
            return Err(Error::InvalidParameter("CN system needs at least 3 nodes".into()));
        }
        let r = cfg.r();
        let one = Complex64::new(1.0, 0.0);
        let mut m = Tridiagonal::zeros(n);
        let mut explicit_diag = vec![Complex64::new(0.0, 0.0); n];
        for j in 1..n - 1 {
            let sigma = cfg.sigma(q_mid[j]);
            m.diag[j] = Complex64::new(-2.0 - sigma, r);
            m.sub[j - 1] = one;
            m.sup[j] = one;
            explicit_diag[j] = Complex64::new(2.0 + sigma, r);
        }
        m.diag[0] = -kernels.left.coeff(0);
        m.sup[0] = one;
        m.diag[n - 1] = -kernels.right.coeff(0);
        m.sub[n - 2] = one;
        let lu = m.factor()?;
        Ok(Self { lu, explicit_diag })
    }

    pub fn dim(&self) -> usize {
        self.explicit_diag.len()
    }
}

/// One wave function evolving under Crank-Nicolson with transparent
/// boundaries, together with the boundary history it owns.
#[derive(Debug, Clone)]
pub struct Evolution {
    pub psi: Vec<Complex64>,
    step: usize,
    left: BoundaryState,
    right: BoundaryState,
    /// Kernel terms evaluated in boundary convolutions so far.
    pub convolution_terms: usize,
}

impl Evolution {
    /// Data compactly supported inside (0, L).
    pub fn homogeneous(psi0: Vec<Complex64>) -> Self {
        Self::build(psi0, None, None, ExteriorGauge::Fixed)
    }

    /// Data vanishing at the boundaries, with a time-dependent exterior
    /// potential on the right whose initial value is `level`.
    pub fn homogeneous_gauged(psi0: Vec<Complex64>, level: f64) -> Self {
        Self::build(psi0, None, None, ExteriorGauge::Tracked { level })
    }

    /// Stationary scattering data kept injected through both ends.
    pub fn scattering(psi0: Vec<Complex64>, left_energy: f64, right_energy: f64, gauge: ExteriorGauge) -> Self {
        let n = psi0.len();
        let left = Incoming {
            edge: psi0[0],
            inner: psi0[1],
            energy: left_energy,
        };
        let right = Incoming {
            edge: psi0[n - 1],
            inner: psi0[n - 2],
            energy: right_energy,
        };
        Self::build(psi0, Some(left), Some(right), gauge)
    }

    fn build(psi0: Vec<Complex64>, left: Option<Incoming>, right: Option<Incoming>, gauge: ExteriorGauge) -> Self {
        let n = psi0.len();
        let left = BoundaryState::new(left, ExteriorGauge::Fixed, psi0[1]);
        let right = BoundaryState::new(right, gauge, psi0[n - 2]);
        Self {
            psi: psi0,
            step: 0,
            left,
            right,
            convolution_terms: 0,
        }
    }

    /// Number of steps taken.
    pub fn step(&self) -> usize {
        self.step
    }

    /// Advance one step. `right_level` is the exterior potential on the
    /// right at the new time level; it is only used by the gauged variant.
    pub fn advance(&mut self, sys: &CnSystem, kernels: KernelPair<'_>, cfg: &CnSettings, right_level: f64) -> Result<()> {
        let n = self.psi.len();
        ensure_len(n, sys.dim(), "wave function")?;
        let l = self.step + 1;
        if l > kernels.left.l_max() || l > kernels.right.l_max() {
            return Err(Error::InvalidParameter(format!(
                "kernel holds {} coefficients, step {l} requested",
                kernels.left.l_max().min(kernels.right.l_max())
            )));
        }
        let mut rhs = vec![Complex64::new(0.0, 0.0); n];
        for (j, w) in self.psi.windows(3).enumerate() {
            rhs[j + 1] = -w[0] + sys.explicit_diag[j + 1] * w[1] - w[2];
        }
        let (b0, c0) = self.left.rhs(l, kernels.left, cfg, 0.0);
        let (b1, c1) = self.right.rhs(l, kernels.right, cfg, right_level);
        rhs[0] = b0;
        rhs[n - 1] = b1;
        self.convolution_terms += c0 + c1;
        sys.lu.solve_in_place(&mut rhs);
        self.psi = rhs;
        self.left.record(self.psi[0], self.psi[1]);
        self.right.record(self.psi[n - 1], self.psi[n - 2]);
        self.step = l;
        Ok(())
    }
}

/// Discrete L² norm (Δx Σ_j |ψ_j|²)^{1/2} over all nodes.
pub fn discrete_norm(psi: &[Complex64], dx: f64) -> f64 {
    (dx * psi.iter().map(|p| p.norm_sqr()).sum::<f64>()).sqrt()
}
