//! Experiment configuration: a TOML file, validated and resolved before
//! anything runs. Resolution materializes every default so the written
//! manifest reproduces a run exactly.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};
use trps_core::model::SwitchPhase;
use trps_core::propagate::default_step;
use trps_core::{
    build_time_dependent_generator, effective_coupling, find_switch_time, BasisState, BenchPreset, DetuningSchedule, Mode,
    ModelParams, Observable, DEFAULT_EPSILON, DEFAULT_STRIDE, DEFAULT_SUBSTEPS,
};

use crate::error::{CliError, Result};

/// What a configuration computes; also the CLI verb that runs it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Dynamics,
    Spectrum,
    Scan,
    Bench,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Dynamics => "dynamics",
            Task::Spectrum => "spectrum",
            Task::Scan => "scan",
            Task::Bench => "bench",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpectrumMethod {
    Sensor,
    Analytic,
    Both,
}

impl SpectrumMethod {
    pub fn runs_sensor(self) -> bool {
        matches!(self, Self::Sensor | Self::Both)
    }

    pub fn runs_analytic(self) -> bool {
        matches!(self, Self::Analytic | Self::Both)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScheduleKind {
    Constant,
    Step,
    GaussianFall,
}

/// Detuning schedule as written in a config. The switch time is either
/// given in ns or located from the Rabi phase of a no-switch reference run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSpec {
    pub kind: ScheduleKind,
    pub delta_initial: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_final: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_switch: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub switch_phase: Option<SwitchPhase>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fall_width: Option<f64>,
}

impl Default for ScheduleSpec {
    fn default() -> Self {
        Self::constant(480.0)
    }
}

impl ScheduleSpec {
    pub fn constant(delta: f64) -> Self {
        Self {
            kind: ScheduleKind::Constant,
            delta_initial: delta,
            delta_final: None,
            t_switch: None,
            switch_phase: None,
            fall_width: None,
        }
    }

    pub fn step(from: f64, to: f64, when: SwitchAt) -> Self {
        let (t_switch, switch_phase) = when.split();
        Self { kind: ScheduleKind::Step, delta_initial: from, delta_final: Some(to), t_switch, switch_phase, fall_width: None }
    }

    pub fn gaussian_fall(from: f64, to: f64, when: SwitchAt, width: f64) -> Self {
        let (t_switch, switch_phase) = when.split();
        Self {
            kind: ScheduleKind::GaussianFall,
            delta_initial: from,
            delta_final: Some(to),
            t_switch,
            switch_phase,
            fall_width: Some(width),
        }
    }

    fn check(&self) -> Result<()> {
        let switched = self.kind != ScheduleKind::Constant;
        if !switched {
            if self.delta_final.is_some() || self.t_switch.is_some() || self.switch_phase.is_some() || self.fall_width.is_some() {
                return Err(CliError::config("schedule", "a constant schedule takes only delta_initial"));
            }
            return Ok(());
        }
        if self.delta_final.is_none() {
            return Err(CliError::config("schedule.delta_final", "required for a switched schedule"));
        }
        match (self.t_switch, self.switch_phase) {
            (Some(_), Some(_)) => return Err(CliError::config("schedule", "give either t_switch or switch_phase, not both")),
            (None, None) => return Err(CliError::config("schedule", "a switched schedule needs t_switch or switch_phase")),
            _ => {}
        }
        match (self.kind, self.fall_width) {
            (ScheduleKind::GaussianFall, None) => Err(CliError::config("schedule.fall_width", "required for gaussian-fall")),
            (ScheduleKind::Step, Some(_)) => Err(CliError::config("schedule.fall_width", "only valid for gaussian-fall")),
            _ => Ok(()),
        }
    }

    /// The concrete schedule; a switch phase is located on `params`.
    pub fn resolve(&self, params: &ModelParams) -> Result<DetuningSchedule> {
        self.check()?;
        let t_switch = match (self.t_switch, self.switch_phase) {
            (Some(t), _) => t,
            (None, Some(phase)) => find_switch_time(params, self.delta_initial, phase).map_err(CliError::Physics)?,
            (None, None) => 0.0,
        };
        let s = match self.kind {
            ScheduleKind::Constant => DetuningSchedule::constant(self.delta_initial),
            ScheduleKind::Step => DetuningSchedule::Step {
                delta_initial: self.delta_initial,
                delta_final: self.delta_final.unwrap_or(0.0),
                t_switch,
            },
            ScheduleKind::GaussianFall => DetuningSchedule::GaussianFall {
                delta_initial: self.delta_initial,
                delta_final: self.delta_final.unwrap_or(0.0),
                t_switch,
                fall_width: self.fall_width.unwrap_or(0.0),
            },
        };
        s.validate().map_err(|e| CliError::config("schedule", e.to_string()))?;
        Ok(s)
    }
}

/// When to switch: a fixed time or a Rabi phase.
#[derive(Clone, Copy, Debug)]
pub enum SwitchAt {
    Time(f64),
    Phase(SwitchPhase),
}

impl SwitchAt {
    fn split(self) -> (Option<f64>, Option<SwitchPhase>) {
        match self {
            SwitchAt::Time(t) => (Some(t), None),
            SwitchAt::Phase(p) => (None, Some(p)),
        }
    }
}

/// A mode name (`sigma`, `a`, `b`, `c`) or an explicit combination.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ObservableSpec {
    Name(String),
    Combination(Observable),
}

impl ObservableSpec {
    pub fn resolve(&self) -> Result<Observable> {
        let obs = match self {
            ObservableSpec::Name(n) => Observable::mode(
                Mode::from_label(n)
                    .ok_or_else(|| CliError::config("observables", format!("unknown mode {n:?}; use sigma, a, b or c")))?,
            ),
            ObservableSpec::Combination(o) => Observable::combination(o.label.clone(), o.coefficients)
                .map_err(|e| CliError::config("observables", e.to_string()))?,
        };
        if obs.label.is_empty() || obs.label.chars().any(|c| matches!(c, ',' | '"' | '\n' | '\r')) {
            return Err(CliError::config(
                "observables",
                format!("label {:?} must be non-empty without commas or quotes", obs.label),
            ));
        }
        Ok(obs)
    }
}

fn all_modes() -> Vec<ObservableSpec> {
    Mode::ALL.iter().map(|m| ObservableSpec::Name(m.label().to_string())).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    /// End of the window (ns); the window starts at 0.
    pub t_end: f64,
    /// Largest grid step (ns); defaults to the stability-derived step.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    /// RK4 steps per grid step.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub substeps: Option<usize>,
    /// Every `stride`-th grid point is written (dynamics and scans).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stride: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumSpec {
    pub method: SpectrumMethod,
    /// Spectral resolutions (GHz).
    pub delta_s: Vec<f64>,
    #[serde(default = "default_omega_min")]
    pub omega_min: f64,
    #[serde(default = "default_omega_max")]
    pub omega_max: f64,
    /// One step per resolution, or a single step for all.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_step: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    /// Output stride on the propagation grid.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stride: Option<usize>,
    /// Delay horizon beyond `10 / delta_s` for the analytic method (ns).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_extra: Option<f64>,
}

fn default_omega_min() -> f64 {
    -700.0
}

fn default_omega_max() -> f64 {
    700.0
}

/// Frequency step used when none is configured: finer for sharp filters.
pub fn default_omega_step(delta_s: f64) -> f64 {
    if delta_s <= 5.0 {
        2.0
    } else {
        5.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanParameter {
    /// Emitter coupling `g` (GHz).
    G,
    /// Initial detuning (GHz).
    Delta,
    /// Switch time (ns).
    TSwitch,
}

impl ScanParameter {
    pub fn column(self) -> &'static str {
        match self {
            ScanParameter::G => "g_GHz",
            ScanParameter::Delta => "delta_GHz",
            ScanParameter::TSwitch => "t_switch_ns",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSpec {
    pub parameter: ScanParameter,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchSpec {
    #[serde(default)]
    pub workload: Option<BenchPreset>,
    pub sizes_nt: Vec<usize>,
    pub sizes_nw: Vec<usize>,
    #[serde(default = "default_repeats")]
    pub repeats: usize,
}

fn default_repeats() -> usize {
    3
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<String>,
    #[serde(default)]
    pub format: Format,
}

/// Run metadata written into manifests; ignored when a manifest is read back.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Meta {
    pub version: String,
    #[serde(default)]
    pub resolved_t_switch: Vec<f64>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "custom")]
    pub preset: String,
    pub task: Task,
    #[serde(default)]
    pub model: ModelParams,
    #[serde(default)]
    pub schedule: ScheduleSpec,
    #[serde(default = "initial_e")]
    pub initial_state: BasisState,
    #[serde(default = "all_modes")]
    pub observables: Vec<ObservableSpec>,
    /// Required for every task except `bench`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectrum: Option<SpectrumSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scan: Option<ScanSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bench: Option<BenchSpec>,
    #[serde(default)]
    pub output: OutputSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<Meta>,
}

fn custom() -> String {
    "custom".into()
}

fn initial_e() -> BasisState {
    BasisState::E
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let de = toml::Deserializer::parse(text).map_err(|e| CliError::config("<document>", e.message().to_string()))?;
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            CliError::config(if path.is_empty() { "<document>".into() } else { path }, e.into_inner().message().to_string())
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    /// Validates the configuration and fills in every default.
    pub fn resolve(&self) -> Result<ExperimentConfig> {
        let mut c = self.clone();
        c.meta = None;
        c.model.validate().map_err(|e| CliError::config("model", e.to_string()))?;
        c.schedule.check()?;
        if c.observables.is_empty() {
            return Err(CliError::config("observables", "at least one observable is required"));
        }
        let observables = c.observables.iter().map(ObservableSpec::resolve).collect::<Result<Vec<_>>>()?;
        match (&c.grid, c.task) {
            (None, Task::Bench) => {}
            (Some(_), Task::Bench) => return Err(CliError::config("grid", "bench runs take their grids from the bench section")),
            (None, _) => return Err(CliError::config("grid", "section required for this task")),
            (Some(g), _) => {
                if !(g.t_end > 0.0) || !g.t_end.is_finite() {
                    return Err(CliError::config("grid.t_end", "must be > 0"));
                }
                if let Some(dt) = g.dt {
                    if !(dt > 0.0) || dt > g.t_end {
                        return Err(CliError::config("grid.dt", "must be in (0, t_end]"));
                    }
                }
                if g.substeps == Some(0) || g.stride == Some(0) {
                    return Err(CliError::config("grid", "substeps and stride must be >= 1"));
                }
            }
        }
        // stored labels are the resolved ones so the manifest is explicit
        c.observables = observables.into_iter().map(ObservableSpec::Combination).collect();

        for (present, name) in
            [(c.spectrum.is_some(), Task::Spectrum), (c.scan.is_some(), Task::Scan), (c.bench.is_some(), Task::Bench)]
        {
            if present != (c.task == name) {
                let msg = if present { "section given but task is not" } else { "section required for this task" };
                return Err(CliError::config(name.name(), format!("{msg} {}", name.name())));
            }
        }

        let extra = match &mut c.spectrum {
            Some(s) => {
                resolve_spectrum(s, &c.model, &c.schedule)?;
                s.omega_min.abs().max(s.omega_max.abs())
            }
            None => 0.0,
        };
        if let Some(scan) = &c.scan {
            if scan.values.is_empty() || scan.values.iter().any(|v| !v.is_finite()) {
                return Err(CliError::config("scan.values", "need at least one finite value"));
            }
            if scan.parameter == ScanParameter::TSwitch && c.schedule.kind == ScheduleKind::Constant {
                return Err(CliError::config("scan.parameter", "t_switch scans need a switched schedule"));
            }
        }
        if let Some(b) = &mut c.bench {
            if b.repeats < 3 {
                return Err(CliError::config("bench.repeats", "need at least 3 repeats"));
            }
            for (name, sizes) in [("bench.sizes_nt", &b.sizes_nt), ("bench.sizes_nw", &b.sizes_nw)] {
                if sizes.len() < 4 || !sizes.windows(2).all(|w| w[1] > w[0]) || sizes[0] < 16 {
                    return Err(CliError::config(name, "need >= 4 strictly increasing sizes, each >= 16"));
                }
                if ((sizes[sizes.len() - 1] as f64) / sizes[0] as f64).log2() < 3.0 {
                    return Err(CliError::config(name, "sizes must span at least 3 octaves"));
                }
            }
            b.workload.get_or_insert_with(BenchPreset::default);
        }

        if c.task != Task::Bench {
            let dt = match c.grid().dt {
                Some(dt) => dt,
                None => c.default_dt(extra)?,
            };
            let g = c.grid.as_mut().expect("checked above");
            g.dt = Some(dt);
            g.substeps.get_or_insert(DEFAULT_SUBSTEPS);
            g.stride.get_or_insert(1);
        }
        Ok(c)
    }

    /// Smallest default step over every model the run will build.
    fn default_dt(&self, extra_frequency: f64) -> Result<f64> {
        let mut dt = f64::INFINITY;
        for (params, schedule) in self.variants()? {
            let gen = build_time_dependent_generator(&schedule, &params).map_err(|e| CliError::config("model", e.to_string()))?;
            dt = dt.min(default_step(&gen, 0.0, self.grid().t_end, extra_frequency));
        }
        Ok(dt)
    }

    /// Model and schedule of each run (one per scan value, else one).
    pub fn variants(&self) -> Result<Vec<(ModelParams, DetuningSchedule)>> {
        let points: Vec<(ModelParams, ScheduleSpec)> = match &self.scan {
            None => vec![(self.model, self.schedule.clone())],
            Some(scan) => scan
                .values
                .iter()
                .map(|&v| {
                    let mut p = self.model;
                    let mut s = self.schedule.clone();
                    match scan.parameter {
                        ScanParameter::G => p.g = v,
                        ScanParameter::Delta => s.delta_initial = v,
                        ScanParameter::TSwitch => {
                            s.t_switch = Some(v);
                            s.switch_phase = None;
                        }
                    }
                    (p, s)
                })
                .collect(),
        };
        points
            .into_iter()
            .map(|(p, s)| {
                p.validate().map_err(|e| CliError::config("model", e.to_string()))?;
                Ok((p, s.resolve(&p)?))
            })
            .collect()
    }

    /// The time grid section; present on every resolved non-bench config.
    pub fn grid(&self) -> &GridSpec {
        self.grid.as_ref().expect("grid section")
    }

    pub fn observables(&self) -> Result<Vec<Observable>> {
        self.observables.iter().map(ObservableSpec::resolve).collect()
    }
}

fn resolve_spectrum(s: &mut SpectrumSpec, model: &ModelParams, schedule: &ScheduleSpec) -> Result<()> {
    if s.delta_s.is_empty() || s.delta_s.iter().any(|d| !(*d > 0.0) || !d.is_finite()) {
        return Err(CliError::config("spectrum.delta_s", "need at least one resolution, each > 0"));
    }
    if !(s.omega_max > s.omega_min) {
        return Err(CliError::config("spectrum.omega_max", "must exceed omega_min"));
    }
    let steps = match s.omega_step.take() {
        None => s.delta_s.iter().map(|&d| default_omega_step(d)).collect(),
        Some(v) if v.len() == 1 => vec![v[0]; s.delta_s.len()],
        Some(v) if v.len() == s.delta_s.len() => v,
        Some(_) => return Err(CliError::config("spectrum.omega_step", "give one step or one per resolution")),
    };
    if steps.iter().any(|x| !(*x > 0.0)) {
        return Err(CliError::config("spectrum.omega_step", "steps must be > 0"));
    }
    s.omega_step = Some(steps);
    let eps = *s.epsilon.get_or_insert(DEFAULT_EPSILON);
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(CliError::config("spectrum.epsilon", "must be > 0"));
    }
    if s.stride == Some(0) {
        return Err(CliError::config("spectrum.stride", "must be >= 1"));
    }
    s.stride.get_or_insert(DEFAULT_STRIDE);
    if s.tau_extra.is_none() {
        // one Rabi period of the initial detuning
        let g_eff = effective_coupling(schedule.delta_initial, model.eta, model.g).abs();
        s.tau_extra = Some(if g_eff > 0.0 { PI / g_eff } else { 0.0 });
    }
    if s.tau_extra.is_some_and(|x| !(x >= 0.0)) {
        return Err(CliError::config("spectrum.tau_extra", "must be >= 0"));
    }
    Ok(())
}
