//! Physical parameters, device geometry, bias schedules and discretisation
//! grids.
//!
//! Everything is stored in scaled units: energies in eV, lengths in nm,
//! times in fs and densities in nm⁻³.

use crate::error::{Error, Result};

/// CODATA SI constants used for the one-off unit conversion.
pub mod si {
    pub const HBAR: f64 = 1.054_571_817e-34;
    pub const ELECTRON_CHARGE: f64 = 1.602_176_634e-19;
    pub const ELECTRON_MASS: f64 = 9.109_383_701_5e-31;
    pub const VACUUM_PERMITTIVITY: f64 = 8.854_187_812_8e-12;
    pub const BOLTZMANN: f64 = 1.380_649e-23;
}

/// Material and thermal parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalParams {
    /// Effective mass relative to the free electron mass.
    pub relative_mass: f64,
    /// Relative permittivity of the semiconductor.
    pub relative_permittivity: f64,
    /// Lattice temperature in kelvin.
    pub temperature: f64,
    /// Fermi level of the contacts in eV.
    pub fermi_level: f64,
}

impl Default for PhysicalParams {
    fn default() -> Self {
        Self {
            relative_mass: 0.067,
            relative_permittivity: 11.44,
            temperature: 300.0,
            fermi_level: 6.7097e-21 / si::ELECTRON_CHARGE,
        }
    }
}

impl PhysicalParams {
    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if !ok(self.relative_mass) || !ok(self.relative_permittivity) || !ok(self.temperature) {
            return Err(Error::InvalidParameter(
                "mass, permittivity and temperature must be positive".into(),
            ));
        }
        if !self.fermi_level.is_finite() {
            return Err(Error::NonFinite("fermi level"));
        }
        Ok(())
    }

    /// Reduced Planck constant in eV·fs.
    pub fn hbar(&self) -> f64 {
        si::HBAR / si::ELECTRON_CHARGE * 1e15
    }

    /// Kinetic prefactor ħ²/2m in eV·nm².
    pub fn kinetic(&self) -> f64 {
        let m = self.relative_mass * si::ELECTRON_MASS;
        si::HBAR * si::HBAR / (2.0 * m) / si::ELECTRON_CHARGE * 1e18
    }

    /// Inverse kinetic prefactor 2m/ħ² in eV⁻¹·nm⁻².
    pub fn gamma(&self) -> f64 {
        1.0 / self.kinetic()
    }

    /// Thermal energy k_B T in eV.
    pub fn kbt(&self) -> f64 {
        si::BOLTZMANN * self.temperature / si::ELECTRON_CHARGE
    }

    /// Poisson coupling q/ε in eV·nm, for densities in nm⁻³ and potential
    /// energies in eV.
    pub fn coupling(&self) -> f64 {
        si::ELECTRON_CHARGE / (self.relative_permittivity * si::VACUUM_PERMITTIVITY) * 1e9
    }

    /// Cut-off wave number k_M above which the injected occupation is
    /// negligible.
    pub fn k_max(&self) -> f64 {
        (self.gamma() * (self.fermi_level + 7.0 * self.kbt())).sqrt()
    }

    /// Injection profile g(k): the thermal occupation integrated over the
    /// transverse directions, in nm⁻².
    pub fn injection(&self, k: f64) -> f64 {
        let kt = self.kbt();
        let x = (self.fermi_level - self.kinetic() * k * k) / kt;
        let softplus = x.max(0.0) + (-x.abs()).exp().ln_1p();
        kt / (4.0 * std::f64::consts::PI.powi(2) * self.kinetic()) * softplus
    }

    /// Energy of the scattering state with wave number `k` under applied
    /// bias. Left-incoming states have `k > 0`, right-incoming `k < 0`.
    pub fn dispersion(&self, k: f64, bias: f64) -> f64 {
        let kinetic = self.kinetic() * k * k;
        if k < 0.0 {
            kinetic - bias
        } else {
            kinetic
        }
    }
}

/// Double-barrier layout and doping profile. Lengths in nm, barrier height
/// in eV, donor densities in nm⁻³.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Geometry {
    pub length: f64,
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    pub b3: f64,
    pub b2: f64,
    pub b1: f64,
    pub barrier: f64,
    pub donor_contact: f64,
    pub donor_diode: f64,
}

impl Default for Geometry {
    fn default() -> Self {
        Self {
            length: 135.0,
            a1: 50.0,
            a2: 60.0,
            a3: 65.0,
            b3: 70.0,
            b2: 75.0,
            b1: 85.0,
            barrier: 0.3,
            donor_contact: 1e24 * 1e-27,
            donor_diode: 5e21 * 1e-27,
        }
    }
}

impl Geometry {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            self.length,
            self.a1,
            self.a2,
            self.a3,
            self.b3,
            self.b2,
            self.b1,
            self.barrier,
            self.donor_contact,
            self.donor_diode,
        ];
        if fields.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("geometry"));
        }
        let ordered = 0.0 < self.a1
            && self.a1 < self.a2
            && self.a2 < self.a3
            && self.a3 < self.b3
            && self.b3 < self.b2
            && self.b2 < self.b1
            && self.b1 < self.length;
        if !ordered {
            return Err(Error::InvalidGeometry(format!(
                "expected 0 < a1 < a2 < a3 < b3 < b2 < b1 < L, got {self:?}"
            )));
        }
        if self.barrier < 0.0 || self.donor_contact < 0.0 || self.donor_diode < 0.0 {
            return Err(Error::InvalidGeometry(
                "barrier height and doping must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Uniform spatial grid x_j = j·Δx, j = 0..=J, on [0, L].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpaceGrid {
    intervals: usize,
    length: f64,
}

impl SpaceGrid {
    pub fn new(length: f64, intervals: usize) -> Result<Self> {
        if intervals < 4 || !(length.is_finite() && length > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "space grid needs at least 4 intervals on a positive length, got J={intervals}, L={length}"
            )));
        }
        Ok(Self { intervals, length })
    }

    pub fn intervals(&self) -> usize {
        self.intervals
    }

    pub fn nodes(&self) -> usize {
        self.intervals + 1
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn dx(&self) -> f64 {
        self.length / self.intervals as f64
    }

    pub fn x(&self, j: usize) -> f64 {
        j as f64 * self.dx()
    }

    pub fn coords(&self) -> Vec<f64> {
        (0..self.nodes()).map(|j| self.x(j)).collect()
    }

    /// Nodes whose cell [x_j, x_{j+1}) meets the interval [a, b].
    ///
    /// This is how piecewise-constant layers are sampled: a layer edge that
    /// falls strictly inside a cell claims the node at the left end of that
    /// cell, so thin layers keep their thickness to within one cell.
    pub fn cell_range(&self, a: f64, b: f64) -> std::ops::RangeInclusive<usize> {
        let dx = self.dx();
        let lo = (a / dx + 1e-9).floor().max(0.0) as usize;
        let hi = ((b / dx + 1e-9).floor() as usize).min(self.intervals);
        lo..=hi
    }

    /// Nodes with a ≤ x_j ≤ b.
    pub fn node_range(&self, a: f64, b: f64) -> std::ops::RangeInclusive<usize> {
        let dx = self.dx();
        let lo = (a / dx - 1e-9).ceil().max(0.0) as usize;
        let hi = ((b / dx + 1e-9).floor() as usize).min(self.intervals);
        lo..=hi
    }

    /// Composite trapezoid rule over the nodes in [a, b].
    pub fn trapezoid(&self, values: &[f64], a: f64, b: f64) -> f64 {
        let range = self.node_range(a, b);
        let (lo, hi) = (*range.start(), *range.end());
        if hi <= lo {
            return 0.0;
        }
        let inner: f64 = values[lo + 1..hi].iter().sum();
        self.dx() * (inner + 0.5 * (values[lo] + values[hi]))
    }
}

/// Applied bias as a function of time, in eV.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BiasSchedule {
    /// Jump from `initial` to `target` right after t = 0.
    Step { initial: f64, target: f64 },
    /// C¹ cubic ramp from `initial` to `target` over `duration` fs, with zero
    /// slope at both ends.
    Cubic {
        initial: f64,
        target: f64,
        duration: f64,
    },
}

impl BiasSchedule {
    pub fn constant(bias: f64) -> Self {
        Self::Step {
            initial: bias,
            target: bias,
        }
    }

    pub fn initial(&self) -> f64 {
        match *self {
            Self::Step { initial, .. } | Self::Cubic { initial, .. } => initial,
        }
    }

    pub fn target(&self) -> f64 {
        match *self {
            Self::Step { target, .. } | Self::Cubic { target, .. } => target,
        }
    }

    pub fn at(&self, t: f64) -> f64 {
        match *self {
            Self::Step { initial, target } => {
                if t > 0.0 {
                    target
                } else {
                    initial
                }
            }
            Self::Cubic {
                initial,
                target,
                duration,
            } => {
                if t <= 0.0 {
                    initial
                } else if t >= duration {
                    target
                } else {
                    let s = t / duration;
                    initial + (target - initial) * s * s * (3.0 - 2.0 * s)
                }
            }
        }
    }
}

/// Parameters, geometry and grid bundled together, with the sampled
/// profiles that every solver needs.
#[derive(Debug, Clone, PartialEq)]
pub struct Device {
    pub params: PhysicalParams,
    pub geometry: Geometry,
    pub grid: SpaceGrid,
}

impl Device {
    pub fn new(params: PhysicalParams, geometry: Geometry, intervals: usize) -> Result<Self> {
        params.validate()?;
        geometry.validate()?;
        let grid = SpaceGrid::new(geometry.length, intervals)?;
        Ok(Self {
            params,
            geometry,
            grid,
        })
    }

    /// Default device with J = 300 intervals.
    pub fn standard() -> Self {
        Self::new(PhysicalParams::default(), Geometry::default(), 300)
            .expect("default device is valid")
    }

    pub fn dx(&self) -> f64 {
        self.grid.dx()
    }

    pub fn nodes(&self) -> usize {
        self.grid.nodes()
    }

    /// Nodes carrying the barrier height.
    pub fn barrier_nodes(&self) -> std::ops::RangeInclusive<usize> {
        self.grid.cell_range(self.geometry.a2, self.geometry.b2)
    }

    /// Nodes carrying the well depth.
    pub fn well_nodes(&self) -> std::ops::RangeInclusive<usize> {
        self.grid.cell_range(self.geometry.a3, self.geometry.b3)
    }

    /// Linear bias ramp profile: 0 left of the diode, 1 right of it.
    pub fn ramp(&self, x: f64) -> f64 {
        let g = &self.geometry;
        if x < g.a1 {
            0.0
        } else if x < g.b1 {
            (x - g.a1) / (g.b1 - g.a1)
        } else {
            1.0
        }
    }

    /// External potential U: double barrier minus the linear bias drop.
    pub fn external_potential(&self, bias: f64) -> Vec<f64> {
        let v0 = self.geometry.barrier;
        let barrier = self.barrier_nodes();
        let well = self.well_nodes();
        (0..self.nodes())
            .map(|j| {
                let mut u = -bias * self.ramp(self.grid.x(j));
                if barrier.contains(&j) {
                    u += v0;
                }
                if well.contains(&j) {
                    u -= v0;
                }
                u
            })
            .collect()
    }

    /// External potential with the quantum well filled up to the barrier
    /// height; it supports no resonance.
    pub fn filled_potential(&self, bias: f64) -> Vec<f64> {
        let mut u = self.external_potential(bias);
        let v0 = self.geometry.barrier;
        for j in self.well_nodes() {
            u[j] += v0;
        }
        u
    }

    /// Donor density, sampled on the closed interval [a1, b1].
    pub fn doping(&self) -> Vec<f64> {
        let g = &self.geometry;
        (0..self.nodes())
            .map(|j| {
                let x = self.grid.x(j);
                if x >= g.a1 - 1e-9 && x <= g.b1 + 1e-9 {
                    g.donor_diode
                } else {
                    g.donor_contact
                }
            })
            .collect()
    }

    /// ∫_well f dx as the node sum over the sampled well. It matches the
    /// discrete difference between the filled and the plain potential.
    pub fn well_sum<T>(&self, values: impl Fn(usize) -> T) -> T
    where
        T: std::iter::Sum<T> + std::ops::Mul<f64, Output = T>,
    {
        self.well_nodes().map(values).sum::<T>() * self.dx()
    }
}

/// Sorted wave-number nodes on the integration range [lower, upper].
///
/// The nodes need not reach the ends of the range: the integrand is held
/// constant between the outermost node and the nearest end, so a uniform
/// mesh made of cell midpoints integrates with the midpoint rule.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyMesh {
    points: Vec<f64>,
    lower: f64,
    upper: f64,
}

impl FrequencyMesh {
    /// Mesh whose range is spanned exactly by `points`.
    pub fn from_points(points: Vec<f64>) -> Result<Self> {
        let (lower, upper) = match (points.first(), points.last()) {
            (Some(&a), Some(&b)) => (a, b),
            _ => return Err(Error::InvalidMesh("need at least two points".into())),
        };
        Self::with_bounds(points, lower, upper)
    }

    pub fn with_bounds(points: Vec<f64>, lower: f64, upper: f64) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidMesh("need at least two points".into()));
        }
        if points.iter().chain([&lower, &upper]).any(|k| !k.is_finite()) {
            return Err(Error::NonFinite("frequency mesh"));
        }
        if points.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidMesh("points must be strictly increasing".into()));
        }
        if lower > points[0] || upper < points[points.len() - 1] {
            return Err(Error::InvalidMesh(format!(
                "range [{lower}, {upper}] does not contain the nodes"
            )));
        }
        Ok(Self { points, lower, upper })
    }

    /// Midpoints of `cells` equal cells covering [−k_M, k_M]. For an even
    /// cell count k = 0 is a cell edge, never a node; for an odd count it is
    /// the middle node.
    pub fn uniform(k_max: f64, cells: usize) -> Result<Self> {
        if cells < 2 || k_max.is_nan() || k_max <= 0.0 {
            return Err(Error::InvalidMesh(format!(
                "uniform mesh needs at least 2 cells and k_M > 0, got {cells}, k_M={k_max}"
            )));
        }
        let dk = 2.0 * k_max / cells as f64;
        // Built from both ends so the mesh is exactly symmetric.
        let points = (0..cells)
            .map(|p| {
                let mirror = cells - 1 - p;
                if p < mirror {
                    -k_max + (p as f64 + 0.5) * dk
                } else if p == mirror {
                    0.0
                } else {
                    k_max - (mirror as f64 + 0.5) * dk
                }
            })
            .collect();
        Self::with_bounds(points, -k_max, k_max)
    }

    /// Uniform base mesh refined around each `(center, half_width)` peak.
    ///
    /// Inside |k − center| ≤ half_width the spacing is half_width /
    /// `per_width`; outside it grows geometrically by `ratio` until it
    /// reaches the base spacing, where the uniform mesh takes over again.
    pub fn refined(
        k_max: f64,
        base_intervals: usize,
        peaks: &[(f64, f64)],
        per_width: usize,
        ratio: f64,
    ) -> Result<Self> {
        let base = Self::uniform(k_max, base_intervals)?;
        if per_width == 0 || ratio.is_nan() || ratio <= 1.0 {
            return Err(Error::InvalidMesh(format!(
                "refinement needs per_width > 0 and ratio > 1, got {per_width}, {ratio}"
            )));
        }
        let base_dk = 2.0 * k_max / base_intervals as f64;
        let mut zones = Vec::new();
        let mut points = Vec::new();
        for &(center, half_width) in peaks {
            if !(half_width.is_finite() && half_width > 0.0 && center.is_finite()) {
                return Err(Error::InvalidMesh("peak widths must be positive".into()));
            }
            let h = half_width / per_width as f64;
            if h >= base_dk {
                continue;
            }
            let mut offsets = vec![0.0];
            let mut d = 0.0;
            for _ in 0..per_width {
                d += h;
                offsets.push(d);
            }
            let mut step = h;
            while step < base_dk {
                step *= ratio;
                d += step.min(base_dk);
                offsets.push(d);
            }
            zones.push((center - d, center + d));
            for &o in &offsets {
                points.push(center + o);
                if o > 0.0 {
                    points.push(center - o);
                }
            }
        }
        points.extend(
            base.points
                .iter()
                .copied()
                .filter(|k| !zones.iter().any(|&(lo, hi)| *k > lo && *k < hi)),
        );
        points.retain(|k| k.abs() <= k_max);
        points.sort_by(f64::total_cmp);
        let tol = 1e-12 * k_max;
        points.dedup_by(|b, a| (*b - *a).abs() <= tol);
        Self::with_bounds(points, -k_max, k_max)
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Integration range.
    pub fn bounds(&self) -> (f64, f64) {
        (self.lower, self.upper)
    }

    /// Integration pieces `(k_a, k_b, i_a, i_b)`: the gaps between nodes
    /// plus the end pieces, where both indices name the outermost node.
    pub fn segments(&self) -> Vec<(f64, f64, usize, usize)> {
        let k = &self.points;
        let last = k.len() - 1;
        let mut out = Vec::with_capacity(k.len() + 1);
        if self.lower < k[0] {
            out.push((self.lower, k[0], 0, 0));
        }
        out.extend((0..last).map(|p| (k[p], k[p + 1], p, p + 1)));
        if self.upper > k[last] {
            out.push((k[last], self.upper, last, last));
        }
        out
    }

    /// Quadrature weights: ∫ f dk ≈ Σ_p w_p f(k_p), trapezoid between nodes
    /// and constant extension to the ends of the range.
    pub fn trapezoid_weights(&self) -> Vec<f64> {
        let mut w = vec![0.0; self.points.len()];
        for (a, b, i, j) in self.segments() {
            w[i] += 0.5 * (b - a);
            w[j] += 0.5 * (b - a);
        }
        w
    }

    /// Index of the cell [k_p, k_{p+1}] containing `k`, clamped to the mesh.
    pub fn locate(&self, k: f64) -> usize {
        let n = self.points.len();
        match self.points.binary_search_by(|p| p.total_cmp(&k)) {
            Ok(i) => i.min(n - 2),
            Err(0) => 0,
            Err(i) => (i - 1).min(n - 2),
        }
    }
}
