//! Small fixed workloads shared by the criterion benchmarks in `benches/`.
//! The full runtime-scaling study is `trps preset bench-fig7`.

use trps_core::{BasisState, DetuningSchedule, Mode, ModelParams, Observable, Result, TrpsProblem};

/// Detuning of the no-switch workloads (1.2 eta).
pub const DELTA: f64 = 480.0;

/// No-switch model, emitter observable, `t_end` ns on the default grid.
pub fn no_switch_problem(t_end: f64, frequencies: &[f64]) -> Result<TrpsProblem> {
    TrpsProblem::for_model(
        &DetuningSchedule::constant(DELTA),
        &ModelParams::reference(),
        &Observable::mode(Mode::Tls),
        BasisState::E,
        t_end,
        None,
        frequencies,
        trps_core::DEFAULT_STRIDE,
    )
}

/// `n` frequencies spread evenly over the doublet region.
pub fn doublet_frequencies(n: usize) -> Vec<f64> {
    trps_core::spectrum::linspace(-100.0, 100.0, n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn workload_builds() {
        let w = doublet_frequencies(4);
        let p = no_switch_problem(0.02, &w).unwrap();
        assert!(p.grid.len() > 10);
        assert_eq!(w.len(), 4);
    }
}
