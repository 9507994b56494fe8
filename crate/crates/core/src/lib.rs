//! Open cavity-QED dynamics on small Hilbert spaces and time-resolved
//! physical spectra, computed with a sensor mode or from two-time correlators.
//!
//! Units: frequencies and rates in GHz (angular, rad/ns), times in ns.

pub mod analytic;
pub mod error;
pub mod lindblad;
pub mod model;
pub mod operator;
pub mod propagate;
pub mod scaling;
pub mod sensor;
pub mod spectrum;

pub use analytic::{analytic_map, analytic_trps, two_time_correlator, CorrelatorGrid};
pub use error::{Error, Result};
pub use lindblad::{assemble_generator, Dissipator, HamiltonianFn, LindbladGenerator};
pub use model::{
    build_time_dependent_generator, diagonalized_hamiltonian, effective_coupling, evaluate_schedule, find_switch_time,
    hamiltonian, mode_populations, supermodes, transformation_matrix, BasisState, DetuningSchedule, Mode, ModelParams,
    Observable, SupermodeSet, SwitchPhase, SYSTEM_DIM,
};
pub use num_complex::Complex64 as C64;
pub use operator::{expectation, ladder_operators, ComplexOperator, DensityMatrix};
pub use propagate::{
    default_grid, default_step, propagate, propagate_operator, PropagationWarning, TimeGrid, Trajectory, DEFAULT_SUBSTEPS,
};
pub use scaling::{run_scaling_suite, runtime_profile, Axis, BenchPreset, Method, ScalingReport};
pub use sensor::{attach_sensor, sensor_map, sensor_population, sensor_trps, SensorConfig, DEFAULT_EPSILON};
pub use spectrum::{TrpsMap, TrpsProblem, WorkCount, DEFAULT_STRIDE};
