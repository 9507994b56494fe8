//! Executes a resolved configuration. Everything is computed in memory
//! first; files are written in one final pass.

use std::path::Path;

use trps_core::{
    analytic_map, propagate, run_scaling_suite, sensor_map, DetuningSchedule, ModelParams, Observable, ScalingReport, TimeGrid,
    TrpsMap, TrpsProblem,
};

use crate::config::{ExperimentConfig, Meta, Task};
use crate::error::{CliError, Result};
use crate::output::{ensure_writable, write_all, Cell, Table};

/// Intensities below this are treated as a nonnegativity violation.
pub const NEGATIVITY_FLOOR: f64 = -1e-10;

/// Populations `<O^dag O>` of one run, sampled at the output stride.
#[derive(Clone, Debug)]
pub struct PopulationRun {
    /// Scan value, if this run is part of a scan.
    pub value: Option<f64>,
    pub schedule: DetuningSchedule,
    pub times: Vec<f64>,
    /// One series per observable, in configuration order.
    pub series: Vec<Vec<f64>>,
}

#[derive(Clone, Debug)]
pub struct SpectrumRecord {
    pub method: &'static str,
    pub observable: String,
    pub delta_s: f64,
    pub map: TrpsMap,
}

#[derive(Clone, Debug)]
pub struct RunResult {
    pub config: ExperimentConfig,
    pub observables: Vec<Observable>,
    pub populations: Vec<PopulationRun>,
    pub spectra: Vec<SpectrumRecord>,
    pub scaling: Vec<ScalingReport>,
    pub tables: Vec<Table>,
    pub warnings: Vec<String>,
}

impl RunResult {
    pub fn spectrum(&self, method: &str, observable: &str, delta_s: f64) -> Option<&TrpsMap> {
        self.spectra.iter().find(|r| r.method == method && r.observable == observable && r.delta_s == delta_s).map(|r| &r.map)
    }

    pub fn manifest(&self) -> ExperimentConfig {
        let mut m = self.config.clone();
        m.meta = Some(Meta {
            version: env!("CARGO_PKG_VERSION").to_string(),
            resolved_t_switch: self.populations.iter().filter_map(|p| p.schedule.t_switch()).collect(),
            warnings: self.warnings.clone(),
        });
        m
    }

    /// Data files plus `manifest.toml`, as `(file name, contents)`.
    pub fn files(&self) -> Vec<(String, String)> {
        let format = self.config.output.format;
        let mut out: Vec<(String, String)> = self.tables.iter().map(|t| (t.file_name(format), t.render(format))).collect();
        out.push(("manifest.toml".into(), self.manifest().to_toml()));
        out
    }
}

fn grid_for(cfg: &ExperimentConfig, schedule: &DetuningSchedule) -> Result<TimeGrid> {
    let g = cfg.grid();
    let dt = g.dt.expect("resolved config");
    Ok(TimeGrid::covering(0.0, g.t_end, dt, schedule.t_switch())?.with_substeps(g.substeps.unwrap_or(1)))
}

fn dynamics(
    cfg: &ExperimentConfig,
    params: &ModelParams,
    schedule: &DetuningSchedule,
    observables: &[Observable],
    value: Option<f64>,
) -> Result<(PopulationRun, Vec<String>)> {
    let gen = trps_core::build_time_dependent_generator(schedule, params)?;
    let grid = grid_for(cfg, schedule)?;
    let traj = propagate(&cfg.initial_state.density_matrix(), &gen, &grid)?;
    traj.check_invariants().map_err(|e| CliError::Invariant(e.to_string()))?;
    let stride = cfg.grid().stride.unwrap_or(1);
    let idx: Vec<usize> = (0..grid.len()).step_by(stride).collect();
    let mut series = Vec::with_capacity(observables.len());
    for o in observables {
        let op = o.operator();
        let n = op.adjoint().matmul(&op)?;
        let all = traj.expectation_series(&n)?;
        series.push(idx.iter().map(|&i| all[i].re).collect());
    }
    let warnings = traj.warnings.iter().map(|w| w.to_string()).collect();
    Ok((PopulationRun { value, schedule: *schedule, times: idx.iter().map(|&i| grid.t(i)).collect(), series }, warnings))
}

fn population_table(name: &str, runs: &[PopulationRun], observables: &[Observable], scan_column: Option<&str>) -> Table {
    let mut cols = vec!["t_ns".to_string()];
    cols.extend(scan_column.map(str::to_string));
    cols.extend(observables.iter().map(|o| o.label.clone()));
    let mut t = Table::with_columns(name, cols);
    for run in runs {
        for (i, &time) in run.times.iter().enumerate() {
            let mut row: Vec<Cell> = vec![time.into()];
            if scan_column.is_some() {
                row.push(run.value.unwrap_or(f64::NAN).into());
            }
            row.extend(run.series.iter().map(|s| Cell::Num(s[i])));
            t.push(row);
        }
    }
    t
}

fn check_spectrum(map: &TrpsMap, what: &str) -> Result<()> {
    let min = map.min();
    if min < NEGATIVITY_FLOOR {
        return Err(CliError::Invariant(format!("{what}: intensity {min:e} below {NEGATIVITY_FLOOR:e}")));
    }
    if map.intensities.iter().any(|v| !v.is_finite()) {
        return Err(CliError::Invariant(format!("{what}: non-finite intensity")));
    }
    Ok(())
}

fn spectrum_tables(records: &[SpectrumRecord], method: &'static str) -> Vec<Table> {
    let mut full = Table::new(format!("trps_{method}"), &["t_ns", "omega_GHz", "intensity", "observable", "delta_s_GHz"]);
    let mut by_time =
        Table::new(format!("frequency_integrated_{method}"), &["t_ns", "integrated_intensity", "observable", "delta_s_GHz"]);
    let mut by_freq =
        Table::new(format!("time_integrated_{method}"), &["omega_GHz", "integrated_intensity", "observable", "delta_s_GHz"]);
    for r in records.iter().filter(|r| r.method == method) {
        let m = &r.map;
        for (ti, &t) in m.times.iter().enumerate() {
            for (wi, &w) in m.frequencies.iter().enumerate() {
                full.push(vec![t.into(), w.into(), m.get(ti, wi).into(), r.observable.as_str().into(), r.delta_s.into()]);
            }
        }
        for (&t, v) in m.times.iter().zip(m.frequency_integrated()) {
            by_time.push(vec![t.into(), v.into(), r.observable.as_str().into(), r.delta_s.into()]);
        }
        for (&w, v) in m.frequencies.iter().zip(m.time_integrated()) {
            by_freq.push(vec![w.into(), v.into(), r.observable.as_str().into(), r.delta_s.into()]);
        }
    }
    vec![full, by_time, by_freq]
}

fn bench_tables(reports: &[ScalingReport]) -> Vec<Table> {
    let mut series = Table::new("bench", &["method", "axis", "size", "runtime_s", "ops_count", "normalized"]);
    let mut fits =
        Table::new("bench_fits", &["method", "axis", "fitted_slope", "slope_stderr", "ops_slope", "ops_match", "non_monotone"]);
    for r in reports {
        for i in 0..r.sizes.len() {
            series.push(vec![
                r.method.label().into(),
                r.axis.label().into(),
                r.sizes[i].into(),
                r.runtimes[i].into(),
                r.ops_counts[i].into(),
                r.normalized_runtimes[i].into(),
            ]);
        }
        fits.push(vec![
            r.method.label().into(),
            r.axis.label().into(),
            r.fitted_slope.into(),
            r.slope_stderr.into(),
            r.ops_slope.into(),
            r.ops_match().into(),
            r.non_monotone.into(),
        ]);
    }
    vec![series, fits]
}

/// Resolves `cfg` and runs it.
pub fn execute(cfg: &ExperimentConfig) -> Result<RunResult> {
    let cfg = cfg.resolve()?;
    let observables = cfg.observables()?;
    let mut result = RunResult {
        config: cfg.clone(),
        observables: observables.clone(),
        populations: Vec::new(),
        spectra: Vec::new(),
        scaling: Vec::new(),
        tables: Vec::new(),
        warnings: Vec::new(),
    };

    match cfg.task {
        Task::Dynamics | Task::Scan => {
            let scan = cfg.scan.as_ref();
            let values: Vec<Option<f64>> = match scan {
                Some(s) => s.values.iter().map(|&v| Some(v)).collect(),
                None => vec![None],
            };
            for ((params, schedule), value) in cfg.variants()?.into_iter().zip(values) {
                let (run, warnings) = dynamics(&cfg, &params, &schedule, &observables, value)?;
                result.warnings.extend(warnings);
                result.populations.push(run);
            }
            match scan {
                None => result.tables.push(population_table("populations", &result.populations, &observables, None)),
                Some(s) => {
                    let col = s.parameter.column();
                    result.tables.push(population_table("scan", &result.populations, &observables, Some(col)));
                    let mut cols = vec![col.to_string()];
                    for o in &observables {
                        cols.push(format!("{}_min", o.label));
                        cols.push(format!("{}_max", o.label));
                    }
                    let mut summary = Table::with_columns("scan_summary", cols);
                    for run in &result.populations {
                        let mut row: Vec<Cell> = vec![run.value.unwrap_or(f64::NAN).into()];
                        for s in &run.series {
                            row.push(s.iter().cloned().fold(f64::INFINITY, f64::min).into());
                            row.push(s.iter().cloned().fold(f64::NEG_INFINITY, f64::max).into());
                        }
                        summary.push(row);
                    }
                    result.tables.push(summary);
                }
            }
        }
        Task::Spectrum => {
            let spec = cfg.spectrum.clone().expect("resolved spectrum section");
            let (params, schedule) = cfg.variants()?.remove(0);
            let (run, warnings) = dynamics(&cfg, &params, &schedule, &observables, None)?;
            result.warnings.extend(warnings);
            result.populations.push(run);
            result.tables.push(population_table("populations", &result.populations, &observables, None));

            let gen = trps_core::build_time_dependent_generator(&schedule, &params)?;
            let grid = grid_for(&cfg, &schedule)?;
            let steps = spec.omega_step.clone().expect("resolved steps");
            let epsilon = spec.epsilon.expect("resolved epsilon");
            for (&delta_s, &step) in spec.delta_s.iter().zip(&steps) {
                let freqs = trps_core::spectrum::frequency_grid(spec.omega_min, spec.omega_max, step)?;
                for obs in &observables {
                    let mut problem = TrpsProblem::new(
                        gen.clone(),
                        cfg.initial_state.density_matrix(),
                        obs.label.clone(),
                        obs.operator(),
                        grid,
                        spec.stride.expect("resolved stride"),
                    )?;
                    problem.coupling_scale = params.g;
                    let mut maps = Vec::new();
                    if spec.method.runs_sensor() {
                        log::info!("sensor TRPS of {} at delta_s = {delta_s} GHz ({} frequencies)", obs.label, freqs.len());
                        maps.push(("sensor", sensor_map(&problem, &freqs, delta_s, epsilon)?));
                    }
                    if spec.method.runs_analytic() {
                        log::info!("analytic TRPS of {} at delta_s = {delta_s} GHz", obs.label);
                        maps.push(("analytic", analytic_map(&problem, &freqs, delta_s, None, spec.tau_extra.unwrap_or(0.0))?));
                    }
                    for (method, map) in maps {
                        check_spectrum(&map, &format!("{method} TRPS of {} at delta_s = {delta_s}", obs.label))?;
                        for w in &map.warnings {
                            let w = format!("{method} {} delta_s = {delta_s}: {w}", obs.label);
                            if !result.warnings.contains(&w) {
                                result.warnings.push(w);
                            }
                        }
                        result.spectra.push(SpectrumRecord { method, observable: obs.label.clone(), delta_s, map });
                    }
                }
            }
            for method in ["sensor", "analytic"] {
                if result.spectra.iter().any(|r| r.method == method) {
                    result.tables.extend(spectrum_tables(&result.spectra, method));
                }
            }
        }
        Task::Bench => {
            let b = cfg.bench.clone().expect("resolved bench section");
            let workload = b.workload.clone().unwrap_or_default();
            result.scaling = run_scaling_suite(&workload, &b.sizes_nt, &b.sizes_nw, b.repeats)?;
            for r in &result.scaling {
                if r.non_monotone {
                    result.warnings.push(format!("{} runtime vs {} is non-monotone beyond the noise band", r.method, r.axis));
                }
            }
            result.tables.extend(bench_tables(&result.scaling));
        }
    }
    for w in &result.warnings {
        log::warn!("{w}");
    }
    Ok(result)
}

/// Checks the output directory, runs, then writes all files.
pub fn run_to_dir(cfg: &ExperimentConfig, dir: &Path, plot_script: bool) -> Result<RunResult> {
    ensure_writable(dir)?;
    let result = execute(cfg)?;
    let mut files = result.files();
    if plot_script {
        files.push(("plot.py".into(), crate::plot::script(&result)));
    }
    write_all(dir, &files)?;
    Ok(result)
}
