//! Time-resolved spectra from two-time correlators (quantum regression)
//! and an explicit double time integral.
//!
//! `S(omega, t) = (ds/pi) int_{t0}^{t} dt' e^{-ds (t - t')}
//!               Re int_0^{t'-t0} dtau e^{-(ds/2 + i omega) tau} C(t', tau)`
//! with `C(t', tau) = <O^dag(t') O(t' - tau)>`.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::error::{domain, shape, Result};
use crate::lindblad::LindbladGenerator;
use crate::operator::{trace_product, ComplexOperator, DensityMatrix};
use crate::propagate::{propagate_operator, TimeGrid};
use crate::spectrum::{TrpsMap, TrpsProblem, WorkCount};

/// `C(t_i, tau_j)` on the propagation grid with `tau_j = j dt`.
///
/// Cells with `tau_j > t_i - t0` (that is `j > i`) lie outside the domain;
/// they hold zero and are never integrated.
#[derive(Clone, Debug)]
pub struct CorrelatorGrid {
    pub grid: TimeGrid,
    pub tau_count: usize,
    /// Row-major `[i][j]`.
    pub values: Vec<C64>,
    /// RK4 steps spent (forward pass included).
    pub propagation_steps: u64,
}

impl CorrelatorGrid {
    #[inline]
    pub fn in_domain(&self, i: usize, j: usize) -> bool {
        j <= i && j < self.tau_count
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Option<C64> {
        self.in_domain(i, j).then(|| self.values[i * self.tau_count + j])
    }

    pub fn times(&self) -> Vec<f64> {
        self.grid.times()
    }

    pub fn delays(&self) -> Vec<f64> {
        (0..self.tau_count).map(|j| j as f64 * self.grid.dt()).collect()
    }

    pub fn tau_max(&self) -> f64 {
        (self.tau_count - 1) as f64 * self.grid.dt()
    }

    /// Number of in-domain cells in row `i`.
    #[inline]
    pub fn row_len(&self, i: usize) -> usize {
        (i + 1).min(self.tau_count)
    }
}

/// Number of delay points for `tau_max = 10 / ds + extra` on `grid`.
pub fn default_tau_count(grid: &TimeGrid, delta_s: f64, extra: f64) -> usize {
    let tau_max = 10.0 / delta_s + extra;
    ((tau_max / grid.dt()).ceil() as usize + 1).min(grid.len())
}

/// Quantum-regression correlator: one forward pass for `rho(s)`, then for
/// every start index `s` the operator `O rho(s)` is propagated with the same
/// generator over the delays and traced against `O^dag`.
pub fn two_time_correlator(
    gen: &LindbladGenerator,
    rho0: &DensityMatrix,
    o: &ComplexOperator,
    grid: &TimeGrid,
    tau_count: usize,
) -> Result<CorrelatorGrid> {
    if o.dim() != gen.dim() || rho0.dim() != gen.dim() {
        return Err(shape(format!("operator {} / state {} vs generator {}", o.dim(), rho0.dim(), gen.dim())));
    }
    if tau_count == 0 {
        return Err(domain("need at least the tau = 0 column"));
    }
    let tau_count = tau_count.min(grid.len());
    let n = grid.steps();
    let mut states = Vec::with_capacity(grid.len());
    let forward = propagate_operator(rho0.as_operator(), gen, grid, 0, n, |_, x| states.push(x.clone()))?;
    let od = o.adjoint();

    let rows: Vec<(Vec<C64>, usize)> = (0..=n)
        .into_par_iter()
        .map(|k| -> Result<(Vec<C64>, usize)> {
            let x0 = o.matmul(&states[k])?;
            let steps = (tau_count - 1).min(n - k);
            let mut diag = Vec::with_capacity(steps + 1);
            let taken = propagate_operator(&x0, gen, grid, k, steps, |_, x| {
                diag.push(trace_product(&od, x).expect("same dimension"));
            })?;
            Ok((diag, taken))
        })
        .collect::<Result<_>>()?;

    let mut values = vec![C64::new(0.0, 0.0); grid.len() * tau_count];
    let mut steps = forward as u64;
    for (k, (diag, s)) in rows.into_iter().enumerate() {
        steps += s as u64;
        for (j, c) in diag.into_iter().enumerate() {
            values[(k + j) * tau_count + j] = c;
        }
    }
    Ok(CorrelatorGrid { grid: *grid, tau_count, values, propagation_steps: steps })
}

/// Quadrature evaluations the double integral performs for one frequency.
pub fn quadrature_work(corr: &CorrelatorGrid, output_indices: &[usize]) -> u64 {
    let inner: u64 = (0..corr.grid.len()).map(|i| corr.row_len(i) as u64).sum();
    let outer: u64 = output_indices.iter().map(|&m| m as u64 + 1).sum();
    inner + outer
}

/// Inner delay integral `F(i) = Re sum_j w_j e^{-(ds/2 + i omega) tau_j} C(t_i, tau_j)`
/// for every row, with trapezoid weights over the in-domain cells.
fn delay_integrals(corr: &CorrelatorGrid, kernel: &[C64]) -> Vec<f64> {
    let h = corr.grid.dt();
    (0..corr.grid.len())
        .map(|i| {
            let len = corr.row_len(i);
            if len < 2 {
                return 0.0;
            }
            let row = &corr.values[i * corr.tau_count..i * corr.tau_count + len];
            let mut acc = C64::new(0.0, 0.0);
            for (c, k) in row.iter().zip(kernel) {
                acc += c * k;
            }
            acc -= 0.5 * (row[0] * kernel[0] + row[len - 1] * kernel[len - 1]);
            h * acc.re
        })
        .collect()
}

/// Outer integral `(ds/pi) int_{t0}^{t_m} e^{-ds (t_m - t')} F(t') dt'` (trapezoid).
fn time_integral(f: &[f64], decay: &[f64], m: usize, h: f64, delta_s: f64) -> f64 {
    if m == 0 {
        return 0.0;
    }
    let mut acc = 0.0;
    for i in 0..=m {
        acc += decay[m - i] * f[i];
    }
    acc -= 0.5 * (decay[m] * f[0] + f[m]);
    delta_s / PI * h * acc
}

/// Evaluates the double integral on `frequencies` at the grid indices
/// `output_indices` (ascending). Frequencies run in parallel.
pub fn analytic_trps(
    corr: &CorrelatorGrid,
    frequencies: &[f64],
    output_indices: &[usize],
    delta_s: f64,
    label: &str,
) -> Result<TrpsMap> {
    if !(delta_s > 0.0) || !delta_s.is_finite() {
        return Err(domain(format!("spectral resolution must be > 0, got {delta_s}")));
    }
    if output_indices.iter().any(|&m| m >= corr.grid.len()) {
        return Err(domain("output index outside the correlator grid"));
    }
    let times = output_indices.iter().map(|&m| corr.grid.t(m)).collect();
    let mut map = TrpsMap::new(label, delta_s, times, frequencies.to_vec())?;
    let needed = 10.0 / delta_s;
    let last = output_indices.last().copied().unwrap_or(0);
    if corr.tau_max() < needed && corr.tau_count <= last {
        let w = format!("delay horizon {} ns is below 10/delta_s = {needed} ns", corr.tau_max());
        log::warn!("{w}");
        map.warnings.push(w);
    }

    let h = corr.grid.dt();
    let decay: Vec<f64> = (0..corr.grid.len()).map(|k| (-delta_s * h * k as f64).exp()).collect();
    let columns: Vec<Vec<f64>> = frequencies
        .par_iter()
        .map(|&omega| {
            let step = C64::new(-0.5 * delta_s * h, -omega * h).exp();
            let mut kernel = Vec::with_capacity(corr.tau_count);
            let mut k = C64::new(1.0, 0.0);
            for j in 0..corr.tau_count {
                // recompute periodically so the running product does not drift
                if j % 64 == 0 {
                    let tau = j as f64 * h;
                    k = C64::new(-0.5 * delta_s * tau, -omega * tau).exp();
                }
                kernel.push(k);
                k *= step;
            }
            let f = delay_integrals(corr, &kernel);
            output_indices.iter().map(|&m| time_integral(&f, &decay, m, h, delta_s)).collect()
        })
        .collect();

    let nw = frequencies.len();
    for (wi, col) in columns.into_iter().enumerate() {
        for (ti, v) in col.into_iter().enumerate() {
            map.intensities[ti * nw + wi] = v;
        }
    }
    map.work = WorkCount {
        propagation_steps: corr.propagation_steps,
        quadrature_evals: nw as u64 * quadrature_work(corr, output_indices),
    };
    Ok(map)
}

/// Full pipeline: correlator with `tau_count` delays (default `10/ds` plus
/// `extra_horizon` ns) followed by the double integral at the problem's output times.
pub fn analytic_map(
    problem: &TrpsProblem,
    frequencies: &[f64],
    delta_s: f64,
    tau_count: Option<usize>,
    extra_horizon: f64,
) -> Result<TrpsMap> {
    let nt = tau_count.unwrap_or_else(|| default_tau_count(&problem.grid, delta_s, extra_horizon));
    let corr = two_time_correlator(&problem.generator, &problem.rho0, &problem.operator, &problem.grid, nt)?;
    analytic_trps(&corr, frequencies, &problem.output_indices(), delta_s, &problem.label)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::ladder_operators;

    fn cavity(omega: f64, kappa: f64) -> (LindbladGenerator, ComplexOperator) {
        let a = ladder_operators(1).unwrap().remove(0);
        let h = ComplexOperator::outer(2, 1, 1).scale(C64::new(omega, 0.0));
        (LindbladGenerator::constant(h, vec![(a.clone(), kappa)]).unwrap(), a)
    }

    #[test]
    fn zero_delay_column_is_the_population() {
        let (gen, a) = cavity(30.0, 5.0);
        let grid = TimeGrid::new(0.0, 0.5, 1e-3).unwrap();
        let rho0 = DensityMatrix::basis_state(2, 1).unwrap();
        let corr = two_time_correlator(&gen, &rho0, &a, &grid, 50).unwrap();
        for i in 0..grid.len() {
            let c = corr.get(i, 0).unwrap();
            let n = (-5.0 * grid.t(i)).exp();
            assert!(c.im.abs() < 1e-12);
            assert!((c.re - n).abs() < 1e-9, "{} vs {n}", c.re);
        }
        assert!(corr.get(3, 4).is_none());
        assert!(corr.get(100, 50).is_none());
    }

    #[test]
    fn zero_correlator_gives_zero_spectrum() {
        let grid = TimeGrid::new(0.0, 0.1, 1e-3).unwrap();
        let corr =
            CorrelatorGrid { grid, tau_count: 20, values: vec![C64::new(0.0, 0.0); grid.len() * 20], propagation_steps: 0 };
        let idx: Vec<usize> = (0..grid.len()).step_by(10).collect();
        let map = analytic_trps(&corr, &[-1.0, 0.0, 1.0], &idx, 50.0, "x").unwrap();
        assert!(map.intensities.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn work_counter_formula() {
        let (gen, a) = cavity(0.0, 1.0);
        let grid = TimeGrid::new(0.0, 0.1, 1e-3).unwrap();
        let rho0 = DensityMatrix::basis_state(2, 1).unwrap();
        let corr = two_time_correlator(&gen, &rho0, &a, &grid, 30).unwrap();
        let n = grid.steps() as u64;
        let expected: u64 = n + (0..=n).map(|k| 29.min(n - k)).sum::<u64>();
        assert_eq!(corr.propagation_steps, expected);
    }

    #[test]
    fn bad_resolution_rejected() {
        let grid = TimeGrid::new(0.0, 0.1, 1e-3).unwrap();
        let corr = CorrelatorGrid { grid, tau_count: 1, values: vec![C64::new(0.0, 0.0); grid.len()], propagation_steps: 0 };
        assert!(analytic_trps(&corr, &[0.0], &[0], 0.0, "x").is_err());
    }
}
