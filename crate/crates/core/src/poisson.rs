//! Poisson solvers and the Gummel fixed-point loop.
//!
//! The potential energy V satisfies −V'' = (q/ε)(n − n_D) with V(0) = V(L) = 0.
//! The Gummel step replaces n by the damped density
//! n_old · exp((V_old − V)/V_ref), which turns the fixed-point map into a
//! monotone nonlinear problem solved by Newton's method.

use crate::error::{ensure_finite, ensure_len, Error, Result};
use crate::linalg::solve_tridiagonal_real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoissonSolver {
    nodes: usize,
    dx: f64,
    coupling: f64,
    /// Residual max-norm accepted by the nonlinear step.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl PoissonSolver {
    pub fn new(nodes: usize, dx: f64, coupling: f64) -> Self {
        Self {
            nodes,
            dx,
            coupling,
            tolerance: 1e-12,
            max_iterations: 100,
        }
    }

    fn check(&self, v: &[f64], what: &'static str) -> Result<()> {
        ensure_len(v.len(), self.nodes, what)?;
        ensure_finite(v, what)
    }

    /// Linear Poisson solve for a given density.
    pub fn linear(&self, n: &[f64], nd: &[f64]) -> Result<Vec<f64>> {
        self.check(n, "density")?;
        self.check(nd, "doping")?;
        let m = self.nodes - 2;
        let h2 = self.dx * self.dx;
        let rhs: Vec<f64> = (1..=m).map(|j| self.coupling * (n[j] - nd[j]) * h2).collect();
        let inner = solve_tridiagonal_real(&vec![-1.0; m - 1], &vec![2.0; m], &vec![-1.0; m - 1], &rhs)?;
        Ok(with_dirichlet_ends(inner))
    }

    /// One damped nonlinear Poisson solve (a Gummel step).
    pub fn gummel_step(&self, v_old: &[f64], n_old: &[f64], nd: &[f64], v_ref: f64) -> Result<Vec<f64>> {
        self.check(v_old, "potential")?;
        self.check(n_old, "density")?;
        self.check(nd, "doping")?;
        if !(v_ref > 0.0 && v_ref.is_finite()) {
            return Err(Error::InvalidParameter(format!("reference potential must be positive, got {v_ref}")));
        }
        let m = self.nodes - 2;
        let inv_h2 = 1.0 / (self.dx * self.dx);
        let c = self.coupling;
        let mut v = v_old.to_vec();
        v[0] = 0.0;
        v[self.nodes - 1] = 0.0;
        let mut polished = false;
        for _ in 0..self.max_iterations {
            let mut residual = vec![0.0; m];
            let mut diag = vec![0.0; m];
            for i in 0..m {
                let j = i + 1;
                let damped = n_old[j] * ((v_old[j] - v[j]) / v_ref).exp();
                let lap = (v[j + 1] - 2.0 * v[j] + v[j - 1]) * inv_h2;
                residual[i] = -lap - c * (damped - nd[j]);
                diag[i] = 2.0 * inv_h2 + c * damped / v_ref;
            }
            let res_norm = residual.iter().fold(0.0_f64, |a, r| a.max(r.abs()));
            if !res_norm.is_finite() {
                return Err(Error::PoissonDiverged { residual: res_norm });
            }
            if res_norm < self.tolerance {
                // One further step takes the quadratic iteration down to
                // round-off, so the Gummel error can fall below 1e-15.
                if polished || res_norm == 0.0 {
                    return Ok(v);
                }
                polished = true;
            }
            let off = vec![-inv_h2; m - 1];
            let rhs: Vec<f64> = residual.iter().map(|r| -r).collect();
            let delta = solve_tridiagonal_real(&off, &diag, &off, &rhs)?;
            for i in 0..m {
                v[i + 1] += delta[i];
            }
            if polished {
                return Ok(v);
            }
        }
        Err(Error::PoissonDiverged {
            residual: f64::NAN,
        })
    }
}

fn with_dirichlet_ends(inner: Vec<f64>) -> Vec<f64> {
    let mut v = Vec::with_capacity(inner.len() + 2);
    v.push(0.0);
    v.extend(inner);
    v.push(0.0);
    v
}

/// Anything that maps a potential to an electron density.
pub trait DensityEngine {
    fn density(&mut self, v: &[f64]) -> Result<Vec<f64>>;
}

impl<F> DensityEngine for F
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    fn density(&mut self, v: &[f64]) -> Result<Vec<f64>> {
        self(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GummelOptions {
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Damping potential V_ref in eV.
    pub reference_potential: f64,
}

/// Converged outcome of the Gummel loop.
#[derive(Debug, Clone, PartialEq)]
pub struct GummelState {
    pub potential: Vec<f64>,
    /// Density of the second-to-last iterate, which agrees with the final
    /// potential to the loop tolerance.
    pub density: Vec<f64>,
    pub iterations: usize,
    /// Relative update e^l for l = 1, 2, ...
    pub trace: Vec<f64>,
}

/// e = ‖new − old‖₂ / ‖new‖₂, or the absolute difference when new = 0.
pub fn relative_change(new: &[f64], old: &[f64]) -> f64 {
    let diff: f64 = new.iter().zip(old).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let norm: f64 = new.iter().map(|a| a * a).sum::<f64>().sqrt();
    if norm > 0.0 {
        diff / norm
    } else {
        diff
    }
}

/// Gummel iteration: alternate density evaluation and damped Poisson solves
/// until the relative potential update drops below the tolerance.
pub fn gummel_loop<E: DensityEngine + ?Sized>(
    engine: &mut E,
    poisson: &PoissonSolver,
    v0: &[f64],
    nd: &[f64],
    opts: GummelOptions,
) -> Result<GummelState> {
    let mut v = v0.to_vec();
    let mut trace = Vec::new();
    for l in 1..=opts.max_iterations {
        let n = engine.density(&v)?;
        let next = poisson.gummel_step(&v, &n, nd, opts.reference_potential)?;
        let e = relative_change(&next, &v);
        trace.push(e);
        v = next;
        if e < opts.tolerance {
            return Ok(GummelState {
                potential: v,
                density: n,
                iterations: l,
                trace,
            });
        }
    }
    Err(Error::GummelDiverged {
        iterations: opts.max_iterations,
        last_error: *trace.last().unwrap_or(&f64::NAN),
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn solver(nodes: usize) -> PoissonSolver {
        PoissonSolver::new(nodes, 1.0 / (nodes - 1) as f64, 2.0)
    }

    #[test]
    fn linear_matches_quadratic_profile() {
        // Constant source: −V'' = c (n − nD) = 2 · 1 → V = x(1 − x).
        let p = solver(101);
        let n = vec![1.5; 101];
        let nd = vec![0.5; 101];
        let v = p.linear(&n, &nd).unwrap();
        for (j, vj) in v.iter().enumerate() {
            let x = j as f64 / 100.0;
            assert!((vj - x * (1.0 - x)).abs() < 1e-12);
        }
    }

    #[test]
    fn neutral_density_gives_zero_potential() {
        let p = solver(51);
        let nd = vec![0.7; 51];
        let v = p.gummel_step(&vec![0.0; 51], &nd, &nd, 0.025).unwrap();
        assert!(v.iter().all(|x| x.abs() < 1e-14));
    }

    #[test]
    fn gummel_step_solves_damped_equation() {
        let p = solver(41);
        let v_old: Vec<f64> = (0..41).map(|j| 0.01 * (j as f64 * 0.3).sin()).collect();
        let n_old: Vec<f64> = (0..41).map(|j| 1.0 + 0.5 * (j as f64 * 0.1).cos()).collect();
        let nd = vec![1.0; 41];
        let v = p.gummel_step(&v_old, &n_old, &nd, 0.05).unwrap();
        let h = 1.0 / 40.0;
        for j in 1..40 {
            let lap = (v[j + 1] - 2.0 * v[j] + v[j - 1]) / (h * h);
            let rhs = 2.0 * (n_old[j] * ((v_old[j] - v[j]) / 0.05).exp() - nd[j]);
            assert!((-lap - rhs).abs() < 1e-10);
        }
        assert_eq!(v[0], 0.0);
        assert_eq!(v[40], 0.0);
    }

    #[test]
    fn gummel_loop_converges_for_boltzmann_density() {
        // n(V) = nD · exp(−(V − φ)/kT) has a unique fixed point; the loop
        // must reach it with the requested accuracy.
        let p = solver(61);
        let nd: Vec<f64> = (0..61).map(|j| if (20..40).contains(&j) { 0.2 } else { 1.0 }).collect();
        let mut engine = |v: &[f64]| -> Result<Vec<f64>> { Ok(v.iter().map(|vj| (-vj / 0.03).exp()).collect()) };
        let opts = GummelOptions {
            tolerance: 1e-13,
            max_iterations: 300,
            reference_potential: 0.03,
        };
        let state = gummel_loop(&mut engine, &p, &vec![0.0; 61], &nd, opts).unwrap();
        assert!(*state.trace.last().unwrap() < 1e-13);
        let n: Vec<f64> = state.potential.iter().map(|v| (-v / 0.03).exp()).collect();
        let check = p.linear(&n, &nd).unwrap();
        for (a, b) in check.iter().zip(&state.potential) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn iteration_cap_returns_trace() {
        let p = solver(21);
        let nd = vec![1.0; 21];
        let mut engine = |v: &[f64]| -> Result<Vec<f64>> { Ok(v.iter().map(|x| 2.0 + (-x / 0.03).exp()).collect()) };
        let opts = GummelOptions {
            tolerance: 1e-15,
            max_iterations: 2,
            reference_potential: 0.03,
        };
        match gummel_loop(&mut engine, &p, &[0.0; 21], &nd, opts) {
            Err(Error::GummelDiverged { iterations, trace, .. }) => {
                assert_eq!(iterations, 2);
                assert_eq!(trace.len(), 2);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_non_positive_reference() {
        let p = solver(11);
        let z = vec![0.0; 11];
        assert!(matches!(p.gummel_step(&z, &z, &z, 0.0), Err(Error::InvalidParameter(_))));
    }
}
