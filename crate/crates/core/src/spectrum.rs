//! Time-resolved spectra on a `(t, omega)` grid and small analysis helpers.

use serde::{Deserialize, Serialize};

use crate::error::{domain, shape, Result};
use crate::lindblad::LindbladGenerator;
use crate::model::{build_time_dependent_generator, BasisState, DetuningSchedule, ModelParams, Observable};
use crate::operator::{ComplexOperator, DensityMatrix};
use crate::propagate::{default_step, TimeGrid, DEFAULT_SUBSTEPS};

/// Default decimation of the propagation grid for spectrum output.
pub const DEFAULT_STRIDE: usize = 8;

/// Counted work of a spectrum computation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkCount {
    /// RK4 steps taken over all propagations.
    pub propagation_steps: u64,
    /// Evaluations of a quadrature integrand.
    pub quadrature_evals: u64,
}

impl WorkCount {
    pub fn total(&self) -> u64 {
        self.propagation_steps + self.quadrature_evals
    }
}

impl std::ops::Add for WorkCount {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self {
            propagation_steps: self.propagation_steps + o.propagation_steps,
            quadrature_evals: self.quadrature_evals + o.quadrature_evals,
        }
    }
}

/// `S_O(omega, t, delta_s)` for one observable and one resolution.
///
/// `intensities` is row-major with one row per observation time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrpsMap {
    pub observable: String,
    /// Filter linewidth `delta_s` (GHz).
    pub resolution: f64,
    pub times: Vec<f64>,
    pub frequencies: Vec<f64>,
    pub intensities: Vec<f64>,
    /// Raw sensor populations `<n_k(t)>` (sensor method only), same layout.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_population: Option<Vec<f64>>,
    #[serde(default)]
    pub work: WorkCount,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl TrpsMap {
    pub fn new(observable: impl Into<String>, resolution: f64, times: Vec<f64>, frequencies: Vec<f64>) -> Result<Self> {
        if times.is_empty() || frequencies.is_empty() {
            return Err(domain("spectrum grids must be nonempty"));
        }
        if !strictly_increasing(&times) || !strictly_increasing(&frequencies) {
            return Err(domain("spectrum grids must be strictly increasing"));
        }
        let n = times.len() * frequencies.len();
        Ok(Self {
            observable: observable.into(),
            resolution,
            times,
            frequencies,
            intensities: vec![0.0; n],
            raw_population: None,
            work: WorkCount::default(),
            warnings: Vec::new(),
        })
    }

    #[inline]
    pub fn get(&self, ti: usize, wi: usize) -> f64 {
        self.intensities[ti * self.frequencies.len() + wi]
    }

    #[inline]
    pub fn set(&mut self, ti: usize, wi: usize, v: f64) {
        let nw = self.frequencies.len();
        self.intensities[ti * nw + wi] = v;
    }

    /// Spectrum at observation time index `ti`.
    pub fn spectrum_at(&self, ti: usize) -> &[f64] {
        let nw = self.frequencies.len();
        &self.intensities[ti * nw..(ti + 1) * nw]
    }

    /// Time trace at frequency index `wi`.
    pub fn trace_at(&self, wi: usize) -> Vec<f64> {
        (0..self.times.len()).map(|ti| self.get(ti, wi)).collect()
    }

    pub fn max(&self) -> f64 {
        self.intensities.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.intensities.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `int S dt` over the observation window (trapezoid), per frequency.
    pub fn time_integrated(&self) -> Vec<f64> {
        (0..self.frequencies.len()).map(|wi| trapezoid(&self.times, &self.trace_at(wi))).collect()
    }

    /// `int S domega` over the frequency window (trapezoid), per time.
    pub fn frequency_integrated(&self) -> Vec<f64> {
        (0..self.times.len()).map(|ti| trapezoid(&self.frequencies, self.spectrum_at(ti))).collect()
    }

    /// Index of the frequency closest to `omega`.
    pub fn nearest_frequency(&self, omega: f64) -> usize {
        nearest(&self.frequencies, omega)
    }

    pub fn nearest_time(&self, t: f64) -> usize {
        nearest(&self.times, t)
    }
}

/// Everything both spectrum methods need: dynamics, initial state, the
/// observed lowering operator and a shared propagation grid.
#[derive(Clone, Debug)]
pub struct TrpsProblem {
    pub generator: LindbladGenerator,
    pub rho0: DensityMatrix,
    pub label: String,
    /// Lowering-type operator on the system space.
    pub operator: ComplexOperator,
    pub grid: TimeGrid,
    /// Every `stride`-th grid point is an output time.
    pub stride: usize,
    /// Smallest coherent system rate, for the weak-coupling check.
    pub coupling_scale: f64,
}

impl TrpsProblem {
    pub fn new(
        generator: LindbladGenerator,
        rho0: DensityMatrix,
        label: impl Into<String>,
        operator: ComplexOperator,
        grid: TimeGrid,
        stride: usize,
    ) -> Result<Self> {
        if rho0.dim() != generator.dim() || operator.dim() != generator.dim() {
            return Err(shape(format!("state {} / operator {} vs generator {}", rho0.dim(), operator.dim(), generator.dim())));
        }
        if stride == 0 {
            return Err(domain("output stride must be >= 1"));
        }
        Ok(Self { generator, rho0, label: label.into(), operator, grid, stride, coupling_scale: f64::INFINITY })
    }

    /// The three-cavity model from `initial` on `[0, t_end]`. Without an
    /// explicit `dt` the default step is used, counting the largest `|omega|`
    /// of `frequencies` as a system frequency. The switch time lands on the
    /// grid, which is integrated with the default number of substeps.
    #[allow(clippy::too_many_arguments)]
    pub fn for_model(
        schedule: &DetuningSchedule,
        params: &ModelParams,
        observable: &Observable,
        initial: BasisState,
        t_end: f64,
        dt: Option<f64>,
        frequencies: &[f64],
        stride: usize,
    ) -> Result<Self> {
        let generator = build_time_dependent_generator(schedule, params)?;
        let w_max = frequencies.iter().fold(0.0_f64, |m, w| m.max(w.abs()));
        let dt = dt.unwrap_or_else(|| default_step(&generator, 0.0, t_end, w_max));
        let grid = TimeGrid::covering(0.0, t_end, dt, schedule.t_switch())?.with_substeps(DEFAULT_SUBSTEPS);
        let mut p =
            Self::new(generator, initial.density_matrix(), observable.label.clone(), observable.operator(), grid, stride)?;
        p.coupling_scale = params.g;
        Ok(p)
    }

    /// Grid indices reported in the map.
    pub fn output_indices(&self) -> Vec<usize> {
        (0..=self.grid.steps()).step_by(self.stride).collect()
    }

    pub fn output_times(&self) -> Vec<f64> {
        self.output_indices().into_iter().map(|i| self.grid.t(i)).collect()
    }
}

fn nearest(xs: &[f64], x: f64) -> usize {
    xs.iter().enumerate().min_by(|a, b| (a.1 - x).abs().total_cmp(&(b.1 - x).abs())).map(|(i, _)| i).unwrap_or(0)
}

pub(crate) fn strictly_increasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[1] > w[0]) && xs.iter().all(|x| x.is_finite())
}

/// Trapezoidal rule on a (possibly non-uniform) grid.
pub fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2).zip(y.windows(2)).map(|(xw, yw)| 0.5 * (xw[1] - xw[0]) * (yw[0] + yw[1])).sum()
}

/// `n` evenly spaced points from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect(),
    }
}

/// Grid `lo, lo + step, ..` up to and including `hi` (within rounding).
pub fn frequency_grid(lo: f64, hi: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !(hi >= lo) {
        return Err(domain(format!("bad frequency range [{lo}, {hi}] step {step}")));
    }
    let n = ((hi - lo) / step + 1e-9).floor() as usize + 1;
    Ok((0..n).map(|k| lo + k as f64 * step).collect())
}

/// Interior local maxima of `y` whose value exceeds `threshold * max(y)`,
/// with a 3-point parabolic refinement. Returns `(x, y)` of each peak.
///
/// Plateaus count once.
pub fn local_maxima(x: &[f64], y: &[f64], threshold: f64) -> Vec<(f64, f64)> {
    let top = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out = Vec::new();
    for i in 1..y.len().saturating_sub(1) {
        if y[i] > y[i - 1] && y[i] >= y[i + 1] && y[i] > threshold * top {
            // skip the leading edge of a plateau unless it ends in a descent
            let mut j = i;
            while j + 1 < y.len() && y[j + 1] == y[i] {
                j += 1;
            }
            if j + 1 < y.len() && y[j + 1] > y[i] {
                continue;
            }
            let off = if j == i { crate::model::parabolic_offset(y[i - 1], y[i], y[i + 1]) } else { 0.0 };
            let dx = if off >= 0.0 { x[i + 1] - x[i] } else { x[i] - x[i - 1] };
            out.push((x[i] + off * dx, y[i]));
        }
    }
    out
}

/// Interior local minima, mirror of [`local_maxima`] without a threshold.
pub fn local_minima(x: &[f64], y: &[f64]) -> Vec<(f64, f64)> {
    let neg: Vec<f64> = y.iter().map(|v| -v).collect();
    let mut out = Vec::new();
    for i in 1..neg.len().saturating_sub(1) {
        if neg[i] > neg[i - 1] && neg[i] >= neg[i + 1] {
            let off = crate::model::parabolic_offset(neg[i - 1], neg[i], neg[i + 1]);
            let dx = if off >= 0.0 { x[i + 1] - x[i] } else { x[i] - x[i - 1] };
            out.push((x[i] + off * dx, y[i]));
        }
    }
    out
}

/// Least-squares line through `(x, y)`: returns `(slope, intercept, slope_stderr)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|xi| (xi - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(xi, yi)| (xi - mx) * (yi - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let stderr = if x.len() > 2 {
        let rss: f64 = x.iter().zip(y).map(|(xi, yi)| (yi - intercept - slope * xi).powi(2)).sum();
        (rss / (n - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    (slope, intercept, stderr)
}

/// Full width at half maximum of a Lorentzian fitted to the samples above
/// `floor * max`: `1/y` is fitted with a quadratic in `x`.
pub fn lorentzian_fwhm(x: &[f64], y: &[f64], floor: f64) -> Option<(f64, f64)> {
    let top = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let pts: Vec<(f64, f64)> = x.iter().zip(y).filter(|(_, &v)| v > floor * top).map(|(&a, &b)| (a, 1.0 / b)).collect();
    if pts.len() < 3 {
        return None;
    }
    // normal equations for 1/y = c0 + c1 x + c2 x^2
    let mut m = nalgebra::Matrix3::<f64>::zeros();
    let mut r = nalgebra::Vector3::<f64>::zeros();
    for &(xi, zi) in &pts {
        let phi = [1.0, xi, xi * xi];
        for a in 0..3 {
            r[a] += phi[a] * zi;
            for b in 0..3 {
                m[(a, b)] += phi[a] * phi[b];
            }
        }
    }
    let c = m.lu().solve(&r)?;
    if c[2] <= 0.0 {
        return None;
    }
    let center = -c[1] / (2.0 * c[2]);
    let vmin = c[0] - c[1] * c[1] / (4.0 * c[2]);
    if vmin <= 0.0 {
        return None;
    }
    Some((center, 2.0 * (vmin / c[2]).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn trapezoid_integrates_linear_exactly() {
        let x = linspace(0.0, 2.0, 11);
        let y: Vec<f64> = x.iter().map(|t| 3.0 * t + 1.0).collect();
        assert_relative_eq!(trapezoid(&x, &y), 8.0, epsilon = 1e-12);
    }

    #[test]
    fn frequency_grid_includes_endpoint() {
        let g = frequency_grid(-700.0, 700.0, 2.0).unwrap();
        assert_eq!(g.len(), 701);
        assert_relative_eq!(*g.last().unwrap(), 700.0);
        assert!(frequency_grid(0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn maxima_of_two_gaussians() {
        let x = linspace(-10.0, 10.0, 201);
        let y: Vec<f64> = x.iter().map(|v| (-(v - 3.0_f64).powi(2)).exp() + (-(v + 3.0_f64).powi(2)).exp()).collect();
        let peaks = local_maxima(&x, &y, 0.05);
        assert_eq!(peaks.len(), 2);
        assert!((peaks[0].0 + 3.0).abs() < 0.01 && (peaks[1].0 - 3.0).abs() < 0.01);
    }

    #[test]
    fn lorentzian_width_recovered() {
        let x = linspace(-50.0, 50.0, 201);
        let w: f64 = 12.0;
        let y: Vec<f64> = x.iter().map(|v| 1.0 / ((v - 1.5).powi(2) + w * w / 4.0)).collect();
        let (c, fwhm) = lorentzian_fwhm(&x, &y, 0.2).unwrap();
        assert_relative_eq!(c, 1.5, epsilon = 1e-9);
        assert_relative_eq!(fwhm, w, epsilon = 1e-9);
    }

    #[test]
    fn line_fit() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y = [3.0, 5.0, 7.0, 9.0];
        let (s, b, e) = linear_fit(&x, &y);
        assert_relative_eq!(s, 2.0, epsilon = 1e-12);
        assert_relative_eq!(b, 1.0, epsilon = 1e-12);
        assert!(e < 1e-12);
    }

    #[test]
    fn map_rejects_unsorted_grids() {
        assert!(TrpsMap::new("x", 1.0, vec![0.0, 0.0], vec![1.0]).is_err());
        assert!(TrpsMap::new("x", 1.0, vec![], vec![1.0]).is_err());
    }
}
