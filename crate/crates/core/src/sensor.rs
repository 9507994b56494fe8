//! Spectra from a weakly coupled, damped sensor mode.
//!
//! The sensor is one extra excitation level `|1_s>` appended to the system
//! space. With a lowering-type observable `O = sum_j o_j |vac><1_j|` the
//! coupling `eps (zeta O^dag + zeta^dag O)` connects `|1_j>` and `|1_s>` with
//! amplitude `eps o_j`; the sensor population then gives the filtered
//! spectrum `S = Gamma / (2 eps^2 pi) <n_s>`.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, shape, Error, Result};
use crate::lindblad::LindbladGenerator;
use crate::model::{BasisState, DetuningSchedule, ModelParams, Observable};
use crate::operator::{ComplexOperator, DensityMatrix};
use crate::propagate::{propagate_operator, TimeGrid, Trajectory};
use crate::spectrum::{TrpsMap, TrpsProblem, WorkCount, DEFAULT_STRIDE};

pub const DEFAULT_EPSILON: f64 = 1e-3;

/// One sensor: center frequency, linewidth (= resolution) and coupling, all GHz.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensorConfig {
    pub omega_k: f64,
    pub linewidth: f64,
    pub epsilon: f64,
}

impl SensorConfig {
    pub fn new(omega_k: f64, linewidth: f64, epsilon: f64) -> Result<Self> {
        let c = Self { omega_k, linewidth, epsilon };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.omega_k.is_finite() {
            return Err(domain(format!("sensor frequency must be finite, got {}", self.omega_k)));
        }
        if !(self.linewidth > 0.0) || !self.linewidth.is_finite() {
            return Err(domain(format!("sensor linewidth must be > 0, got {}", self.linewidth)));
        }
        if !(self.epsilon >= 0.0) || !self.epsilon.is_finite() {
            return Err(domain(format!("sensor coupling must be >= 0, got {}", self.epsilon)));
        }
        Ok(())
    }

    /// Message if `epsilon > 1e-3 min(coupling_scale, linewidth)`.
    pub fn weak_coupling_warning(&self, coupling_scale: f64) -> Option<String> {
        let limit = 1e-3 * coupling_scale.min(self.linewidth);
        (self.epsilon > limit)
            .then(|| format!("sensor coupling epsilon = {} GHz exceeds the weak-coupling limit {limit} GHz", self.epsilon))
    }
}

/// Coupling amplitudes `o_j` of a lowering-type operator: only row 0 (the
/// vacuum) may be populated and `O|vac> = 0`.
fn lowering_amplitudes(o: &ComplexOperator) -> Result<Vec<C64>> {
    let n = o.dim();
    for r in 1..n {
        for c in 0..n {
            if o[(r, c)] != C64::new(0.0, 0.0) {
                return Err(shape(format!("observable must map single excitations to vacuum; entry ({r}, {c}) is nonzero")));
            }
        }
    }
    if o[(0, 0)] != C64::new(0.0, 0.0) {
        return Err(shape("observable must annihilate the vacuum"));
    }
    Ok((0..n).map(|c| o[(0, c)]).collect())
}

/// Joint generator on the system space plus one sensor level (the last index).
pub fn attach_sensor(gen: &LindbladGenerator, o: &ComplexOperator, cfg: &SensorConfig) -> Result<LindbladGenerator> {
    cfg.validate()?;
    let n = gen.dim();
    if o.dim() != n {
        return Err(shape(format!("observable dimension {} vs system {n}", o.dim())));
    }
    let amps = lowering_amplitudes(o)?;
    let s = n;
    let h_sys = gen.hamiltonian_fn().clone();
    let cfg = *cfg;
    let h = move |t: f64| {
        let mut h = h_sys(t).embed(n + 1).expect("larger dimension");
        h[(s, s)] = C64::new(cfg.omega_k, 0.0);
        for (j, &a) in amps.iter().enumerate() {
            h[(s, j)] = a * cfg.epsilon;
            h[(j, s)] = a.conj() * cfg.epsilon;
        }
        h
    };
    let mut dissipators = Vec::with_capacity(gen.dissipators().len() + 1);
    for d in gen.dissipators() {
        dissipators.push((d.operator.embed(n + 1)?, d.rate));
    }
    dissipators.push((ComplexOperator::outer(n + 1, 0, s), cfg.linewidth));
    Ok(LindbladGenerator::new(Arc::new(h), dissipators)?.with_breakpoints(gen.breakpoints().to_vec()))
}

/// `<zeta^dag zeta>(t)` from a joint trajectory; the sensor is the last level.
pub fn sensor_population(traj: &Trajectory) -> Vec<f64> {
    traj.states
        .iter()
        .map(|rho| {
            let s = rho.dim() - 1;
            rho.as_operator()[(s, s)].re
        })
        .collect()
}

/// Sensor populations at the output times of `problem` for one sensor.
/// Returns the populations and the number of RK4 steps taken.
pub fn sensor_run(problem: &TrpsProblem, cfg: &SensorConfig) -> Result<(Vec<f64>, u64)> {
    let joint = attach_sensor(&problem.generator, &problem.operator, cfg)?;
    let rho0 = problem.rho0.as_operator().embed(joint.dim())?;
    let s = joint.dim() - 1;
    let stride = problem.stride;
    let mut out = Vec::with_capacity(problem.grid.steps() / stride + 1);
    let steps = propagate_operator(&rho0, &joint, &problem.grid, 0, problem.grid.steps(), |i, x| {
        if i % stride == 0 {
            out.push(x[(s, s)].re);
        }
    })?;
    Ok((out, steps as u64))
}

/// TRPS from one independent sensor propagation per frequency.
///
/// Frequencies run in parallel on the current rayon pool; the result does
/// not depend on the order of execution.
pub fn sensor_map(problem: &TrpsProblem, frequencies: &[f64], delta_s: f64, epsilon: f64) -> Result<TrpsMap> {
    let probe = SensorConfig::new(frequencies.first().copied().unwrap_or(0.0), delta_s, epsilon)?;
    if !(epsilon > 0.0) {
        return Err(domain("sensor coupling must be > 0 to normalize the spectrum"));
    }
    let mut map = TrpsMap::new(problem.label.clone(), delta_s, problem.output_times(), frequencies.to_vec())?;
    if let Some(w) = probe.weak_coupling_warning(problem.coupling_scale) {
        log::warn!("{w}");
        map.warnings.push(w);
    }
    let columns: Vec<(Vec<f64>, u64)> = frequencies
        .par_iter()
        .map(|&omega_k| {
            let cfg = SensorConfig { omega_k, ..probe };
            sensor_run(problem, &cfg).map_err(|e| Error::Frequency { omega_k, source: Box::new(e) })
        })
        .collect::<Result<_>>()?;

    let norm = delta_s / (2.0 * epsilon * epsilon * PI);
    let nt = map.times.len();
    let nw = frequencies.len();
    let mut raw = vec![0.0; nt * nw];
    let mut steps = 0;
    for (wi, (col, n)) in columns.into_iter().enumerate() {
        steps += n;
        for (ti, v) in col.into_iter().enumerate() {
            raw[ti * nw + wi] = v;
            map.intensities[ti * nw + wi] = norm * v;
        }
    }
    map.raw_population = Some(raw);
    map.work = WorkCount { propagation_steps: steps, quadrature_evals: 0 };
    Ok(map)
}

/// Sensor TRPS of `observable` for the three-cavity model started in `|e000>`,
/// on the given propagation grid and the default output stride.
pub fn sensor_trps(
    schedule: &DetuningSchedule,
    params: &ModelParams,
    observable: &Observable,
    frequencies: &[f64],
    grid: &TimeGrid,
    delta_s: f64,
    epsilon: f64,
) -> Result<TrpsMap> {
    let generator = crate::model::build_time_dependent_generator(schedule, params)?;
    let mut problem = TrpsProblem::new(
        generator,
        BasisState::E.density_matrix(),
        observable.label.clone(),
        observable.operator(),
        *grid,
        DEFAULT_STRIDE,
    )?;
    problem.coupling_scale = params.g;
    sensor_map(&problem, frequencies, delta_s, epsilon)
}

/// Reduced system state of a joint (system + sensor) density matrix.
pub fn system_marginal(joint: &DensityMatrix) -> Result<ComplexOperator> {
    let n = joint.dim();
    if n < 2 {
        return Err(shape("joint state needs at least two levels"));
    }
    let s = n - 1;
    let mut rho = joint.as_operator().sub_block(0, n - 1)?;
    // the sensor excitation traces out into the vacuum
    rho[(0, 0)] += joint.as_operator()[(s, s)];
    Ok(rho)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_time_dependent_generator, Mode};

    fn model_gen() -> LindbladGenerator {
        build_time_dependent_generator(&DetuningSchedule::constant(480.0), &ModelParams::reference()).unwrap()
    }

    #[test]
    fn joint_hamiltonian_is_hermitian() {
        let gen = model_gen();
        let o = Observable::combination("x", [1.0, -0.5, 0.3, 2.0]).unwrap().operator();
        let mut seed = 17u64;
        for _ in 0..100 {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let w = ((seed >> 11) as f64 / (1u64 << 53) as f64 - 0.5) * 1400.0;
            let eps = (seed >> 40) as f64 / (1u64 << 24) as f64 * 0.1;
            let joint = attach_sensor(&gen, &o, &SensorConfig::new(w, 5.0, eps).unwrap()).unwrap();
            let h = joint.hamiltonian_at(0.01);
            assert_eq!(h.dim(), 6);
            assert!(h.hermiticity_error() < 1e-12);
        }
    }

    #[test]
    fn coupling_block_matches_observable() {
        let gen = model_gen();
        let o = Observable::mode(Mode::Middle).operator();
        let joint = attach_sensor(&gen, &o, &SensorConfig::new(3.0, 5.0, 0.01).unwrap()).unwrap();
        let h = joint.hamiltonian_at(0.0);
        assert_eq!(h[(5, 3)], C64::new(0.01, 0.0));
        assert_eq!(h[(3, 5)], C64::new(0.01, 0.0));
        assert_eq!(h[(5, 5)], C64::new(3.0, 0.0));
        assert_eq!(h[(5, 1)], C64::new(0.0, 0.0));
    }

    #[test]
    fn non_lowering_observable_rejected() {
        let gen = model_gen();
        let o = ComplexOperator::outer(5, 1, 1);
        assert!(matches!(attach_sensor(&gen, &o, &SensorConfig::new(0.0, 5.0, 1e-3).unwrap()), Err(Error::Shape(_))));
        let small = ComplexOperator::zeros(3);
        assert!(matches!(attach_sensor(&gen, &small, &SensorConfig::new(0.0, 5.0, 1e-3).unwrap()), Err(Error::Shape(_))));
    }

    #[test]
    fn config_validation() {
        assert!(SensorConfig::new(0.0, 0.0, 1e-3).is_err());
        assert!(SensorConfig::new(f64::NAN, 1.0, 1e-3).is_err());
        assert!(SensorConfig::new(0.0, 1.0, -1.0).is_err());
        let c = SensorConfig::new(0.0, 5.0, 0.1).unwrap();
        assert!(c.weak_coupling_warning(50.0).is_some());
        assert!(SensorConfig::new(0.0, 5.0, 1e-3).unwrap().weak_coupling_warning(50.0).is_none());
    }

    #[test]
    fn marginal_restores_trace() {
        let joint = DensityMatrix::basis_state(6, 5).unwrap();
        let m = system_marginal(&joint).unwrap();
        assert_eq!(m[(0, 0)], C64::new(1.0, 0.0));
        assert!((m.trace() - C64::new(1.0, 0.0)).norm() < 1e-15);
    }
}
