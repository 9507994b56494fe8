//! Fixed-step RK4 propagation of the master equation.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{domain, shape, Result};
use crate::lindblad::LindbladGenerator;
use crate::operator::{ComplexOperator, DensityMatrix};

/// Relative tolerance used when snapping times onto grid points.
const GRID_SNAP: f64 = 1e-9;

/// RK4 stability limit along the imaginary axis is 2*sqrt(2); stay a bit inside.
const RK4_STABILITY: f64 = 2.8;

/// RK4 substeps per grid interval on default grids.
///
/// The default grid step alone leaves RK4 errors near 1e-6 in populations
/// close to zero, which shows up as negative eigenvalues of `rho`.
pub const DEFAULT_SUBSTEPS: usize = 8;

/// Uniform grid `t0, t0 + dt, .., t0 + steps * dt` (ns).
///
/// States are reported at grid points; the integrator takes `substeps`
/// equal RK4 steps per interval.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    t0: f64,
    dt: f64,
    steps: usize,
    #[serde(default = "one")]
    substeps: usize,
}

fn one() -> usize {
    1
}

impl TimeGrid {
    /// `(t1 - t0) / dt` must be a positive integer within `1e-9`.
    pub fn new(t0: f64, t1: f64, dt: f64) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(domain(format!("time step must be positive, got {dt}")));
        }
        if !(t1 > t0) {
            return Err(domain(format!("empty time window [{t0}, {t1}]")));
        }
        let n = (t1 - t0) / dt;
        let steps = n.round();
        if (n - steps).abs() > GRID_SNAP || steps < 1.0 {
            return Err(domain(format!("(t1 - t0)/dt = {n} is not a positive integer")));
        }
        Ok(Self { t0, dt, steps: steps as usize, substeps: 1 })
    }

    pub fn with_steps(t0: f64, t1: f64, steps: usize) -> Result<Self> {
        if steps == 0 {
            return Err(domain("grid needs at least one step"));
        }
        if !(t1 > t0) {
            return Err(domain(format!("empty time window [{t0}, {t1}]")));
        }
        Ok(Self { t0, dt: (t1 - t0) / steps as f64, steps, substeps: 1 })
    }

    /// Grid starting at `t0` with step at most `dt_max`, covering at least
    /// up to `t1`, and with `anchor` (if inside the window) on a grid point.
    pub fn covering(t0: f64, t1: f64, dt_max: f64, anchor: Option<f64>) -> Result<Self> {
        if !(dt_max > 0.0) || !dt_max.is_finite() {
            return Err(domain(format!("time step must be positive, got {dt_max}")));
        }
        if !(t1 > t0) {
            return Err(domain(format!("empty time window [{t0}, {t1}]")));
        }
        let dt = match anchor {
            Some(a) if a > t0 && a < t1 => (a - t0) / ((a - t0) / dt_max).ceil(),
            _ => (t1 - t0) / ((t1 - t0) / dt_max).ceil(),
        };
        let steps = ((t1 - t0) / dt - GRID_SNAP).ceil().max(1.0) as usize;
        Ok(Self { t0, dt, steps, substeps: 1 })
    }

    /// Same grid integrated with `n` RK4 steps per interval.
    pub fn with_substeps(self, n: usize) -> Self {
        Self { substeps: n.max(1), ..self }
    }

    #[inline]
    pub fn substeps(&self) -> usize {
        self.substeps
    }

    /// Integration step `dt / substeps`.
    #[inline]
    pub fn integration_step(&self) -> f64 {
        self.dt / self.substeps as f64
    }

    #[inline]
    pub fn t0(&self) -> f64 {
        self.t0
    }

    #[inline]
    pub fn dt(&self) -> f64 {
        self.dt
    }

    #[inline]
    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn t1(&self) -> f64 {
        self.t(self.steps)
    }

    /// Number of grid points (`steps + 1`).
    pub fn len(&self) -> usize {
        self.steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn t(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.t(i)).collect()
    }

    /// Index of the grid point at `t`, if there is one.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let x = (t - self.t0) / self.dt;
        let i = x.round();
        ((x - i).abs() <= GRID_SNAP * x.abs().max(1.0) && i >= 0.0 && i as usize <= self.steps).then_some(i as usize)
    }

    /// Same window with the step divided by `factor`.
    pub fn refined(&self, factor: usize) -> Self {
        Self { t0: self.t0, dt: self.dt / factor as f64, steps: self.steps * factor, substeps: self.substeps }
    }
}

/// Non-fatal diagnostics from a propagation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum PropagationWarning {
    /// `dt` exceeds the estimated RK4 stability bound.
    StepAboveStabilityBound { dt: f64, bound: f64 },
    /// A Hamiltonian discontinuity falls strictly between grid points.
    BreakpointOffGrid { t: f64 },
}

impl std::fmt::Display for PropagationWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::StepAboveStabilityBound { dt, bound } => {
                write!(f, "time step {dt:e} ns exceeds the RK4 stability bound {bound:e} ns")
            }
            Self::BreakpointOffGrid { t } => write!(f, "Hamiltonian discontinuity at t = {t} ns is not on the grid"),
        }
    }
}

/// Density matrices at every grid point.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub grid: TimeGrid,
    pub states: Vec<DensityMatrix>,
    pub warnings: Vec<PropagationWarning>,
}

impl Trajectory {
    /// `Tr(A rho(t_i))` for every grid point.
    pub fn expectation_series(&self, a: &ComplexOperator) -> Result<Vec<C64>> {
        self.states.iter().map(|rho| crate::operator::expectation(rho, a)).collect()
    }

    /// First stored state violating the density-matrix invariants.
    pub fn check_invariants(&self) -> Result<()> {
        for (i, rho) in self.states.iter().enumerate() {
            rho.check().map_err(|e| crate::Error::Invariant(format!("t = {} ns: {e}", self.grid.t(i))))?;
        }
        Ok(())
    }
}

/// Largest `|eigenvalue|` and eigenvalue spread of `H(t)` sampled over `[t0, t1]`.
fn spectral_extent(gen: &LindbladGenerator, t0: f64, t1: f64) -> (f64, f64) {
    const SAMPLES: usize = 64;
    let mut times: Vec<f64> = (0..=SAMPLES).map(|k| t0 + (t1 - t0) * k as f64 / SAMPLES as f64).collect();
    for &b in gen.breakpoints() {
        if b >= t0 && b <= t1 {
            times.push(b);
            times.push(b - 1e-9 * (t1 - t0));
        }
    }
    let mut abs_max = 0.0_f64;
    let mut spread = 0.0_f64;
    for t in times {
        let ev = gen.hamiltonian_at(t).hermitian_eigenvalues();
        let (lo, hi) = (ev[0], ev[ev.len() - 1]);
        abs_max = abs_max.max(lo.abs()).max(hi.abs());
        spread = spread.max(hi - lo);
    }
    (abs_max, spread)
}

/// Default step `min(2 pi / omega_max, 1 / rate_max) / 50`.
///
/// `omega_max` is the largest absolute Hamiltonian eigenvalue over the run,
/// raised to `extra_frequency` if that is larger (sensor detunings).
pub fn default_step(gen: &LindbladGenerator, t0: f64, t1: f64, extra_frequency: f64) -> f64 {
    let (abs_max, _) = spectral_extent(gen, t0, t1);
    let omega_max = abs_max.max(extra_frequency.abs());
    let rate_max = gen.max_rate();
    let mut scale = f64::INFINITY;
    if omega_max > 0.0 {
        scale = scale.min(2.0 * PI / omega_max);
    }
    if rate_max > 0.0 {
        scale = scale.min(1.0 / rate_max);
    }
    if scale.is_finite() {
        scale / 50.0
    } else {
        (t1 - t0) / 1000.0
    }
}

/// Grid on `[t0, t1]` with the default step, [`DEFAULT_SUBSTEPS`] and
/// every breakpoint of `gen` inside the window on a grid point (the first
/// one exactly; later ones only if commensurate).
pub fn default_grid(gen: &LindbladGenerator, t0: f64, t1: f64, extra_frequency: f64) -> Result<TimeGrid> {
    let dt = default_step(gen, t0, t1, extra_frequency);
    let anchor = gen.breakpoints().iter().copied().find(|&b| b > t0 && b < t1);
    Ok(TimeGrid::covering(t0, t1, dt, anchor)?.with_substeps(DEFAULT_SUBSTEPS))
}

/// Largest step for which RK4 is expected to be stable on this generator.
pub fn stability_bound(gen: &LindbladGenerator, t0: f64, t1: f64) -> f64 {
    let (_, spread) = spectral_extent(gen, t0, t1);
    let total_rate: f64 = gen.dissipators().iter().map(|d| d.rate * d.operator.max_abs().powi(2)).sum();
    let radius = spread + total_rate;
    if radius > 0.0 {
        RK4_STABILITY / radius
    } else {
        f64::INFINITY
    }
}

/// Warnings that apply to propagating `gen` on `grid`.
pub fn grid_warnings(gen: &LindbladGenerator, grid: &TimeGrid) -> Vec<PropagationWarning> {
    let mut out = Vec::new();
    let bound = stability_bound(gen, grid.t0(), grid.t1());
    let h = grid.integration_step();
    if h > bound {
        log::warn!("time step {h:e} ns above RK4 stability bound {bound:e} ns");
        out.push(PropagationWarning::StepAboveStabilityBound { dt: h, bound });
    }
    for &b in gen.breakpoints() {
        if b > grid.t0() && b < grid.t1() && grid.index_of(b).is_none() {
            log::warn!("Hamiltonian discontinuity at {b} ns is between grid points");
            out.push(PropagationWarning::BreakpointOffGrid { t: b });
        }
    }
    out
}

type Sparse = Vec<(usize, usize, C64)>;

/// Reusable RK4 workspace for one generator.
pub(crate) struct Rk4<'g> {
    gen: &'g LindbladGenerator,
    k: [ComplexOperator; 4],
    stage: ComplexOperator,
    /// Non-zero entries of the effective matrix at the step start, middle and end.
    k_start: Sparse,
    k_mid: Sparse,
    k_end: Sparse,
    /// Right limit at the end of the previous step, if it was a breakpoint.
    k_next: Sparse,
    /// End time of the previous step, whose `k_end` (or `k_next`) can be reused.
    cached: Option<(f64, bool)>,
}

impl<'g> Rk4<'g> {
    pub(crate) fn new(gen: &'g LindbladGenerator) -> Self {
        let n = gen.dim();
        Self {
            gen,
            k: std::array::from_fn(|_| ComplexOperator::zeros(n)),
            stage: ComplexOperator::zeros(n),
            k_start: Vec::new(),
            k_mid: Vec::new(),
            k_end: Vec::new(),
            k_next: Vec::new(),
            cached: None,
        }
    }

    fn snap(&self, t: f64, dt: f64) -> Option<f64> {
        self.gen.breakpoints().iter().copied().find(|b| (t - b).abs() <= GRID_SNAP * dt)
    }

    fn fill(&self, t: f64, out: &mut Sparse) {
        crate::lindblad::sparse_entries(&self.gen.effective(&self.gen.hamiltonian_at(t)), out);
    }

    /// Advances `x` from `t` to `t + dt` in place.
    pub(crate) fn step(&mut self, t: f64, dt: f64, x: &mut ComplexOperator) {
        // start: right limit at breakpoints
        match self.cached.take() {
            Some((tc, at_break)) if (tc - t).abs() <= GRID_SNAP * dt => {
                if at_break {
                    std::mem::swap(&mut self.k_start, &mut self.k_next);
                } else {
                    std::mem::swap(&mut self.k_start, &mut self.k_end);
                }
            }
            _ => {
                let te = self.snap(t, dt).unwrap_or(t);
                let mut ks = std::mem::take(&mut self.k_start);
                self.fill(te, &mut ks);
                self.k_start = ks;
            }
        }
        let mut km = std::mem::take(&mut self.k_mid);
        self.fill(t + 0.5 * dt, &mut km);
        self.k_mid = km;
        let t_end = t + dt;
        let mut ke = std::mem::take(&mut self.k_end);
        match self.snap(t_end, dt) {
            // left limit for the step ending on a discontinuity
            Some(b) => {
                self.fill(b - GRID_SNAP * dt, &mut ke);
                let mut kn = std::mem::take(&mut self.k_next);
                self.fill(b, &mut kn);
                self.k_next = kn;
                self.cached = Some((t_end, true));
            }
            None => {
                self.fill(t_end, &mut ke);
                self.cached = Some((t_end, false));
            }
        }
        self.k_end = ke;

        let [k1, k2, k3, k4] = &mut self.k;
        let xs = x.as_slice();

        self.gen.apply_effective(&self.k_start, x, k1);
        combine(&mut self.stage, xs, k1, 0.5 * dt);
        self.gen.apply_effective(&self.k_mid, &self.stage, k2);
        combine(&mut self.stage, xs, k2, 0.5 * dt);
        self.gen.apply_effective(&self.k_mid, &self.stage, k3);
        combine(&mut self.stage, xs, k3, dt);
        self.gen.apply_effective(&self.k_end, &self.stage, k4);

        let w = dt / 6.0;
        let (a, b, c, d) = (k1.as_slice(), k2.as_slice(), k3.as_slice(), k4.as_slice());
        for (i, xi) in x.as_mut_slice().iter_mut().enumerate() {
            *xi += (a[i] + (b[i] + c[i]) * 2.0 + d[i]) * w;
        }
    }
}

/// `out = x + h * k`
#[inline]
fn combine(out: &mut ComplexOperator, x: &[C64], k: &ComplexOperator, h: f64) {
    for ((o, xi), ki) in out.as_mut_slice().iter_mut().zip(x).zip(k.as_slice()) {
        *o = xi + ki * h;
    }
}

/// Propagates `rho0` over `grid` and stores the state at every grid point.
pub fn propagate(rho0: &DensityMatrix, gen: &LindbladGenerator, grid: &TimeGrid) -> Result<Trajectory> {
    let warnings = grid_warnings(gen, grid);
    let mut states = Vec::with_capacity(grid.len());
    propagate_operator(rho0.as_operator(), gen, grid, 0, grid.steps(), |_, x| {
        states.push(DensityMatrix::new_unchecked(x.clone()));
    })?;
    Ok(Trajectory { grid: *grid, states, warnings })
}

/// Propagates an arbitrary operator from grid index `start` for `steps`
/// steps, calling `observe(index, &x)` at every visited grid point
/// (including `start`). Returns the number of RK4 steps taken
/// (`steps * grid.substeps()`).
///
/// No stability diagnostics are run here; see [`grid_warnings`].
pub fn propagate_operator(
    x0: &ComplexOperator,
    gen: &LindbladGenerator,
    grid: &TimeGrid,
    start: usize,
    steps: usize,
    mut observe: impl FnMut(usize, &ComplexOperator),
) -> Result<usize> {
    if x0.dim() != gen.dim() {
        return Err(shape(format!("initial operator dimension {} vs generator {}", x0.dim(), gen.dim())));
    }
    if start + steps > grid.steps() {
        return Err(domain(format!("steps {start}+{steps} run past the end of the grid ({})", grid.steps())));
    }
    let mut rk = Rk4::new(gen);
    let mut x = x0.clone();
    let m = grid.substeps();
    let h = grid.integration_step();
    observe(start, &x);
    for i in start..start + steps {
        let t = grid.t(i);
        for k in 0..m {
            rk.step(t + k as f64 * h, h, &mut x);
        }
        if x.as_slice().iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(crate::Error::Invariant(format!("non-finite state at t = {} ns", grid.t(i + 1))));
        }
        observe(i + 1, &x);
    }
    Ok(steps * m)
}
