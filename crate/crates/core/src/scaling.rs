//! Runtime scaling of the two spectrum methods.

use std::fmt;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::analytic::analytic_map;
use crate::error::{domain, Error, Result};
use crate::model::{BasisState, DetuningSchedule, Mode, ModelParams, Observable};
use crate::sensor::{sensor_map, DEFAULT_EPSILON};
use crate::spectrum::{linear_fit, linspace, TrpsProblem, WorkCount, DEFAULT_STRIDE};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Analytic,
    Sensor,
}

impl Method {
    pub const ALL: [Method; 2] = [Method::Analytic, Method::Sensor];

    pub fn label(self) -> &'static str {
        match self {
            Method::Analytic => "analytic",
            Method::Sensor => "sensor",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Axis {
    #[serde(rename = "Nt")]
    Nt,
    #[serde(rename = "Nw")]
    Nw,
}

impl Axis {
    pub fn label(self) -> &'static str {
        match self {
            Axis::Nt => "Nt",
            Axis::Nw => "Nw",
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// The workload being timed: the no-switch model over a fixed window, with
/// the frequency grid spread over `[omega_lo, omega_hi]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchPreset {
    pub params: ModelParams,
    pub delta: f64,
    /// Simulated window (ns); `Nt` steps cover it.
    pub t_end: f64,
    pub delta_s: f64,
    pub epsilon: f64,
    pub omega_lo: f64,
    pub omega_hi: f64,
    /// `Nt` (and `Ntau`) held fixed while `Nw` is scanned.
    pub fixed_nt: usize,
    /// `Nw` held fixed while `Nt` is scanned.
    pub fixed_nw: usize,
    pub stride: usize,
}

impl Default for BenchPreset {
    fn default() -> Self {
        Self {
            params: ModelParams::reference(),
            delta: 480.0,
            t_end: 0.05,
            delta_s: 50.0,
            epsilon: DEFAULT_EPSILON,
            omega_lo: -100.0,
            omega_hi: 100.0,
            fixed_nt: 32,
            fixed_nw: 16,
            stride: DEFAULT_STRIDE,
        }
    }
}

impl BenchPreset {
    fn problem(&self, nt: usize) -> Result<TrpsProblem> {
        let gen = crate::model::build_time_dependent_generator(&DetuningSchedule::constant(self.delta), &self.params)?;
        let grid = crate::propagate::TimeGrid::with_steps(0.0, self.t_end, nt)?;
        let obs = Observable::mode(Mode::Tls);
        let mut p = TrpsProblem::new(gen, BasisState::E.density_matrix(), obs.label.clone(), obs.operator(), grid, self.stride)?;
        p.coupling_scale = self.params.g;
        Ok(p)
    }
}

/// Wall time and counted work of one pipeline run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Profile {
    pub seconds: f64,
    pub work: WorkCount,
}

/// Runs the full pipeline of `method` once at the given grid sizes.
pub fn runtime_profile_with(preset: &BenchPreset, method: Method, nt: usize, ntau: usize, nw: usize) -> Result<Profile> {
    if nt < 16 || nw < 1 || ntau < 1 {
        return Err(domain(format!("grid sizes too small: Nt={nt}, Ntau={ntau}, Nw={nw}")));
    }
    let problem = preset.problem(nt)?;
    let omegas = linspace(preset.omega_lo, preset.omega_hi, nw);
    let start = Instant::now();
    let map = match method {
        Method::Sensor => sensor_map(&problem, &omegas, preset.delta_s, preset.epsilon)?,
        Method::Analytic => analytic_map(&problem, &omegas, preset.delta_s, Some(ntau), 0.0)?,
    };
    let seconds = start.elapsed().as_secs_f64();
    Ok(Profile { seconds, work: map.work })
}

/// [`runtime_profile_with`] on the default preset.
pub fn runtime_profile(method: Method, nt: usize, ntau: usize, nw: usize) -> Result<Profile> {
    runtime_profile_with(&BenchPreset::default(), method, nt, ntau, nw)
}

/// Closed-form operation counts for `Nt` steps, `Ntau` delay points,
/// `Nw` frequencies and output stride `s`.
pub fn expected_work(method: Method, nt: usize, ntau: usize, nw: usize, stride: usize) -> WorkCount {
    let (n, w) = (nt as u64, nw as u64);
    match method {
        Method::Sensor => WorkCount { propagation_steps: n * w, quadrature_evals: 0 },
        Method::Analytic => {
            let t = (ntau as u64).min(n + 1);
            // forward pass + sum_{d=0}^{n} min(t - 1, d)
            let prop = n + (t - 1) * t / 2 + (n + 1 - t) * (t - 1);
            // sum_{d=1}^{n+1} min(d, t)
            let inner = t * (t + 1) / 2 + (n + 1 - t) * t;
            let s = stride as u64;
            let q = n / s;
            let outer = s * q * (q + 1) / 2 + (q + 1);
            WorkCount { propagation_steps: prop, quadrature_evals: w * (inner + outer) }
        }
    }
}

/// Timing series along one axis with its log-log fit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub method: Method,
    pub axis: Axis,
    pub sizes: Vec<usize>,
    pub runtimes: Vec<f64>,
    pub ops_counts: Vec<u64>,
    pub expected_ops: Vec<u64>,
    pub fitted_slope: f64,
    pub slope_stderr: f64,
    /// Log-log slope of the counted work.
    pub ops_slope: f64,
    pub normalized_runtimes: Vec<f64>,
    /// A runtime dropped by more than the noise band as the size grew.
    pub non_monotone: bool,
}

/// Relative drop tolerated before a runtime series is flagged.
const NOISE_BAND: f64 = 0.1;

impl ScalingReport {
    pub fn from_series(
        method: Method,
        axis: Axis,
        sizes: Vec<usize>,
        runtimes: Vec<f64>,
        ops_counts: Vec<u64>,
        expected_ops: Vec<u64>,
    ) -> Result<Self> {
        if sizes.len() < 4 {
            return Err(domain(format!("need at least 4 sizes per fit, got {}", sizes.len())));
        }
        if !sizes.windows(2).all(|w| w[1] > w[0]) {
            return Err(domain("sizes must be strictly increasing"));
        }
        if sizes.len() != runtimes.len() || sizes.len() != ops_counts.len() {
            return Err(domain("series lengths differ"));
        }
        if runtimes.iter().any(|&r| !(r > 0.0)) {
            return Err(Error::Invariant("runtimes must be > 0".into()));
        }
        let lx: Vec<f64> = sizes.iter().map(|&s| (s as f64).ln()).collect();
        let ly: Vec<f64> = runtimes.iter().map(|r| r.ln()).collect();
        let lo: Vec<f64> = ops_counts.iter().map(|&o| (o.max(1) as f64).ln()).collect();
        let (fitted_slope, _, slope_stderr) = linear_fit(&lx, &ly);
        let (ops_slope, _, _) = linear_fit(&lx, &lo);
        let non_monotone = runtimes.windows(2).any(|w| w[1] < w[0] * (1.0 - NOISE_BAND));
        if non_monotone {
            log::warn!("{method} runtimes along {axis} are not monotone: {runtimes:?}");
        }
        Ok(Self {
            method,
            axis,
            normalized_runtimes: normalize(&runtimes),
            sizes,
            runtimes,
            ops_counts,
            expected_ops,
            fitted_slope,
            slope_stderr,
            ops_slope,
            non_monotone,
        })
    }

    /// Counted work equals the closed-form formula at every size.
    pub fn ops_match(&self) -> bool {
        self.ops_counts == self.expected_ops
    }
}

/// Min-max rescaling onto `[0, 1]`.
pub fn normalize(xs: &[f64]) -> Vec<f64> {
    let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi > lo {
        xs.iter().map(|x| (x - lo) / (hi - lo)).collect()
    } else {
        vec![1.0; xs.len()]
    }
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

/// Median-of-`repeats` timing (after one warm-up) for one method along one axis.
///
/// Repeats are interleaved across sizes, so a slow spell of the machine is
/// spread over the whole series instead of biasing one size.
pub fn measure_series(
    preset: &BenchPreset,
    method: Method,
    axis: Axis,
    sizes: &[usize],
    repeats: usize,
) -> Result<ScalingReport> {
    let dims: Vec<(usize, usize)> = sizes
        .iter()
        .map(|&size| match axis {
            Axis::Nt => (size, preset.fixed_nw),
            Axis::Nw => (preset.fixed_nt, size),
        })
        .collect();
    let mut warm = Vec::with_capacity(sizes.len());
    for &(nt, nw) in &dims {
        warm.push(runtime_profile_with(preset, method, nt, nt, nw)?.work);
    }
    let mut times = vec![Vec::with_capacity(repeats); sizes.len()];
    for _ in 0..repeats {
        for (k, &(nt, nw)) in dims.iter().enumerate() {
            let p = runtime_profile_with(preset, method, nt, nt, nw)?;
            if p.work != warm[k] {
                return Err(Error::Invariant("work counters differ between repeats".into()));
            }
            times[k].push(p.seconds);
        }
    }
    let runtimes: Vec<f64> = times.into_iter().map(median).collect();
    for (size, t) in sizes.iter().zip(&runtimes) {
        log::info!("{method} {axis}={size}: {t:.4e} s");
    }
    let ops = warm.iter().map(WorkCount::total).collect();
    let expected = dims.iter().map(|&(nt, nw)| expected_work(method, nt, nt, nw, preset.stride).total()).collect();
    ScalingReport::from_series(method, axis, sizes.to_vec(), runtimes, ops, expected)
}

/// Both methods along both axes, single-threaded, with `Ntau = Nt`.
pub fn run_scaling_suite(
    preset: &BenchPreset,
    sizes_nt: &[usize],
    sizes_nw: &[usize],
    repeats: usize,
) -> Result<Vec<ScalingReport>> {
    if repeats < 3 {
        return Err(domain(format!("need at least 3 repeats, got {repeats}")));
    }
    for (name, sizes) in [("Nt", sizes_nt), ("Nw", sizes_nw)] {
        let span = match (sizes.first(), sizes.last()) {
            (Some(&a), Some(&b)) if a > 0 => (b as f64 / a as f64).log2(),
            _ => 0.0,
        };
        if span < 3.0 - 1e-9 {
            return Err(domain(format!("{name} sizes must span at least 3 octaves")));
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .map_err(|e| Error::Invariant(format!("cannot build benchmark thread pool: {e}")))?;
    pool.install(|| {
        let mut out = Vec::new();
        for method in Method::ALL {
            out.push(measure_series(preset, method, Axis::Nt, sizes_nt, repeats)?);
            out.push(measure_series(preset, method, Axis::Nw, sizes_nw, repeats)?);
        }
        Ok(out)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counters_match_formulas() {
        let preset = BenchPreset::default();
        for &(nt, nw) in &[(16, 3), (40, 5), (33, 2)] {
            for method in Method::ALL {
                let p = runtime_profile_with(&preset, method, nt, nt, nw).unwrap();
                assert_eq!(p.work, expected_work(method, nt, nt, nw, preset.stride), "{method} {nt} {nw}");
            }
            let p = runtime_profile_with(&preset, Method::Analytic, nt, 7, nw).unwrap();
            assert_eq!(p.work, expected_work(Method::Analytic, nt, 7, nw, preset.stride));
        }
    }

    #[test]
    fn normalization_range() {
        let n = normalize(&[2.0, 3.0, 6.0]);
        assert_eq!(n, vec![0.0, 0.25, 1.0]);
    }

    #[test]
    fn report_flags_drops() {
        let r = ScalingReport::from_series(
            Method::Sensor,
            Axis::Nt,
            vec![1, 2, 4, 8],
            vec![1.0, 2.0, 1.0, 8.0],
            vec![1, 2, 4, 8],
            vec![1, 2, 4, 8],
        )
        .unwrap();
        assert!(r.non_monotone);
        assert!((r.ops_slope - 1.0).abs() < 1e-12);
    }

    #[test]
    fn suite_preconditions() {
        let p = BenchPreset::default();
        assert!(run_scaling_suite(&p, &[16, 32, 64, 128], &[1, 2, 4, 8], 2).is_err());
        assert!(run_scaling_suite(&p, &[16, 32, 64], &[1, 2, 4, 8], 3).is_err());
    }
}
