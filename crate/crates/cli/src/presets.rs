//! The closed catalog of named experiments, one per reproduced figure or scan.

use trps_core::model::SwitchPhase;
use trps_core::{BenchPreset, DEFAULT_EPSILON};

use crate::config::{
    BenchSpec, ExperimentConfig, GridSpec, ObservableSpec, OutputSpec, ScanParameter, ScanSpec, ScheduleSpec, SpectrumMethod,
    SpectrumSpec, SwitchAt, Task,
};
use crate::error::{CliError, Result};
use trps_core::{Mode, ModelParams};

pub const CATALOG: [&str; 12] = [
    "fig3a",
    "fig3b",
    "fig3c",
    "fig3d",
    "fig5",
    "fig6",
    "fig8",
    "fig9",
    "appC-gscan",
    "appD-deltascan",
    "appD-t0scan",
    "bench-fig7",
];

/// Detuning before any switch: 1.2 eta.
const DELTA_ON: f64 = 480.0;

fn base(name: &str, task: Task, schedule: ScheduleSpec, t_end: f64) -> ExperimentConfig {
    ExperimentConfig {
        preset: name.to_string(),
        task,
        model: ModelParams::reference(),
        schedule,
        initial_state: trps_core::BasisState::E,
        observables: Mode::ALL.iter().map(|m| ObservableSpec::Name(m.label().to_string())).collect(),
        grid: Some(GridSpec { t_end, dt: None, substeps: None, stride: None }),
        spectrum: None,
        scan: None,
        bench: None,
        output: OutputSpec::default(),
        meta: None,
    }
}

/// The three resolutions of the TRPS maps, sensor method only: the analytic
/// double integral at 5 GHz over a 1 ns window is too slow to be a default.
fn map_spectrum() -> SpectrumSpec {
    SpectrumSpec {
        method: SpectrumMethod::Sensor,
        delta_s: vec![5.0, 50.0, 200.0],
        omega_min: -700.0,
        omega_max: 700.0,
        omega_step: Some(vec![2.0, 5.0, 5.0]),
        epsilon: Some(DEFAULT_EPSILON),
        stride: Some(40),
        tau_extra: None,
    }
}

fn valley() -> SwitchAt {
    SwitchAt::Phase(SwitchPhase::FirstValley)
}

/// Grid sizes for the runtime benchmark. The frequency axis starts high so
/// the per-frequency quadrature dominates fixed setup cost, and the fixed
/// `Nw` of the `Nt` series keeps the sensor timings well above timer noise.
/// The window covers `10 / delta_s`, so no delay truncation is reported.
pub fn bench_spec() -> BenchSpec {
    BenchSpec {
        workload: Some(BenchPreset { t_end: 0.06, delta_s: 200.0, fixed_nt: 64, fixed_nw: 128, ..BenchPreset::default() }),
        sizes_nt: vec![64, 128, 256, 512, 1024],
        sizes_nw: vec![4096, 8192, 16384, 32768, 65536],
        repeats: 5,
    }
}

/// Configuration of a catalog entry; unknown names list the catalog.
pub fn preset(name: &str) -> Result<ExperimentConfig> {
    let cfg = match name {
        "fig3a" => base(name, Task::Dynamics, ScheduleSpec::constant(DELTA_ON), 0.5),
        "fig3b" => base(name, Task::Dynamics, ScheduleSpec::step(DELTA_ON, 0.0, valley()), 0.5),
        "fig3c" => base(name, Task::Dynamics, ScheduleSpec::step(DELTA_ON, 0.0, SwitchAt::Phase(SwitchPhase::FirstPeak)), 0.5),
        "fig3d" => base(name, Task::Dynamics, ScheduleSpec::step(0.0, DELTA_ON, SwitchAt::Time(0.1)), 0.5),
        "fig5" => {
            let mut c = base(name, Task::Spectrum, ScheduleSpec::gaussian_fall(DELTA_ON, 0.0, valley(), 0.003), 0.3);
            c.observables = vec![ObservableSpec::Name("sigma".into())];
            c.spectrum = Some(SpectrumSpec {
                method: SpectrumMethod::Both,
                delta_s: vec![50.0],
                omega_min: -700.0,
                omega_max: 700.0,
                omega_step: Some(vec![5.0]),
                epsilon: Some(DEFAULT_EPSILON),
                stride: None,
                tau_extra: None,
            });
            c
        }
        "fig6" => {
            let mut c = base(name, Task::Spectrum, ScheduleSpec::constant(DELTA_ON), 1.0);
            c.spectrum = Some(map_spectrum());
            c
        }
        "fig8" | "fig9" => {
            let when = if name == "fig8" { valley() } else { SwitchAt::Phase(SwitchPhase::FirstPeak) };
            let mut c = base(name, Task::Spectrum, ScheduleSpec::step(DELTA_ON, 0.0, when), 0.6);
            c.spectrum = Some(map_spectrum());
            c
        }
        "appC-gscan" => {
            let mut c = base(name, Task::Scan, ScheduleSpec::constant(0.0), 0.2);
            c.model = ModelParams::reference().lossless();
            // nothing damps RK4 phase error here; 8 substeps drift past the positivity bound
            c.grid = Some(GridSpec { t_end: 0.2, dt: None, substeps: Some(32), stride: None });
            c.scan = Some(ScanSpec { parameter: ScanParameter::G, values: (1..=40).map(|k| 10.0 * k as f64).collect() });
            c
        }
        "appD-deltascan" => {
            let mut c = base(name, Task::Scan, ScheduleSpec::step(DELTA_ON, 0.0, valley()), 0.5);
            c.scan = Some(ScanSpec { parameter: ScanParameter::Delta, values: vec![160.0, 320.0, 480.0, 640.0, 800.0] });
            c
        }
        "appD-t0scan" => {
            let mut c = base(name, Task::Scan, ScheduleSpec::step(DELTA_ON, 0.0, SwitchAt::Time(0.05)), 0.5);
            c.scan = Some(ScanSpec { parameter: ScanParameter::TSwitch, values: vec![0.025, 0.05, 0.075, 0.1, 0.125] });
            c
        }
        "bench-fig7" => {
            let mut c = base(name, Task::Bench, ScheduleSpec::constant(DELTA_ON), 0.0);
            c.grid = None;
            c.observables = vec![ObservableSpec::Name("sigma".into())];
            c.bench = Some(bench_spec());
            c
        }
        _ => {
            return Err(CliError::config("preset", format!("unknown preset {name:?}; available: {}", CATALOG.join(", "))));
        }
    };
    Ok(cfg)
}
