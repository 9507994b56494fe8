use std::f64::consts::PI;

use nalgebra::{DMatrix, Matrix3};
use proptest::prelude::*;
use trps_core::model::excited_block;
use trps_core::*;

fn cavity_block(delta: f64, eta: f64) -> Matrix3<f64> {
    Matrix3::new(delta, eta, 0.0, eta, 0.0, eta, 0.0, eta, -delta)
}

/// Eigenpairs from the generic symmetric solver, ascending.
fn dense_eigen(m: Matrix3<f64>) -> Vec<(f64, [f64; 3])> {
    let e = m.symmetric_eigen();
    let mut pairs: Vec<(f64, [f64; 3])> = (0..3)
        .map(|k| {
            let v = e.eigenvectors.column(k);
            (e.eigenvalues[k], [v[0], v[1], v[2]])
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs
}

fn tls_population(sched: &DetuningSchedule, p: &ModelParams, t1: f64) -> (TimeGrid, Vec<f64>) {
    let gen = build_time_dependent_generator(sched, p).unwrap();
    let grid = default_grid(&gen, 0.0, t1, 0.0).unwrap();
    let traj = propagate(&BasisState::E.density_matrix(), &gen, &grid).unwrap();
    (grid, mode_populations(&traj)[0].clone())
}

fn minima_times(grid: &TimeGrid, y: &[f64]) -> Vec<f64> {
    (1..y.len() - 1).filter(|&i| y[i] < y[i - 1] && y[i] <= y[i + 1]).map(|i| grid.t(i)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn supermodes_match_dense_eigensolver(delta in -2000.0f64..2000.0, eta in 1.0f64..1000.0) {
        let modes = supermodes(delta, eta);
        let dense = dense_eigen(cavity_block(delta, eta));
        for (k, (lambda, w)) in dense.into_iter().enumerate() {
            prop_assert!((modes.frequencies[k] - lambda).abs() < 1e-10 * (1.0 + lambda.abs()));
            let v = modes.vectors[k];
            let dot: f64 = v.iter().zip(&w).map(|(a, b)| a * b).sum();
            let sign = dot.signum();
            for i in 0..3 {
                prop_assert!((v[i] - sign * w[i]).abs() < 1e-9, "mode {k}: {v:?} vs {w:?}");
            }
            prop_assert!(v[2] > 0.0);
        }
        prop_assert_eq!(modes.frequencies[1], 0.0);
    }

    #[test]
    fn supermodes_are_complete(delta in -2000.0f64..2000.0, eta in 1.0f64..1000.0) {
        let v = supermodes(delta, eta).vectors;
        for i in 0..3 {
            for j in 0..3 {
                let s: f64 = (0..3).map(|m| v[m][i] * v[m][j]).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                prop_assert!((s - want).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn effective_coupling_is_odd_and_bounded(delta in -1e5f64..1e5, eta in 1.0f64..1000.0, g in 0.1f64..200.0) {
        prop_assert_eq!(effective_coupling(-delta, eta, g), -effective_coupling(delta, eta, g));
        prop_assert!(effective_coupling(delta, eta, g).abs() < g);
    }
}

#[test]
fn hamiltonian_layout() {
    let p = ModelParams::reference();
    let h = hamiltonian(0.0, &p);
    for i in 0..5 {
        assert_eq!(h[(0, i)], C64::new(0.0, 0.0));
        assert_eq!(h[(i, i)], C64::new(0.0, 0.0));
    }
    assert_eq!(h[(1, 3)].re, 50.0);
    assert_eq!(h[(2, 3)].re, 400.0);
    assert_eq!(h[(3, 4)].re, 400.0);
    assert!(h.hermiticity_error() == 0.0);

    let h = hamiltonian(480.0, &p);
    assert_eq!(h[(2, 2)].re, 480.0);
    assert_eq!(h[(4, 4)].re, -480.0);
}

#[test]
fn cavity_block_eigenvalues() {
    let p = ModelParams::reference();
    for &delta in &[-900.0, -480.0, 0.0, 37.0, 480.0, 2500.0] {
        let b = excited_block(delta, &p);
        let m = Matrix3::from_fn(|r, c| b[(r + 1, c + 1)].re);
        let s = (delta * delta + 2.0 * 400.0 * 400.0_f64).sqrt();
        let got = dense_eigen(m);
        for (k, want) in [-s, 0.0, s].iter().enumerate() {
            assert!((got[k].0 - want).abs() < 1e-9, "delta {delta}: {} vs {want}", got[k].0);
        }
    }
}

#[test]
fn zero_detuning_supermodes() {
    let m = supermodes(0.0, 400.0);
    let r = 1.0 / 2f64.sqrt();
    let (w0, v0) = m.zero_energy();
    assert_eq!(w0, 0.0);
    assert!((v0[0] + r).abs() < 1e-15 && v0[1] == 0.0 && (v0[2] - r).abs() < 1e-15);
    assert!((m.upper().0 - 565.685424949238).abs() < 1e-9);
    assert!((m.lower().0 + 565.685424949238).abs() < 1e-9);
}

#[test]
fn diagonalized_hamiltonian_is_a_conjugation() {
    let p = ModelParams::reference();
    for &delta in &[0.0, 480.0, -123.0] {
        let hd = diagonalized_hamiltonian(delta, &p);
        let pm = transformation_matrix(delta, p.eta);
        let h = excited_block(delta, &p);
        let to_dense = |o: &ComplexOperator| DMatrix::from_fn(4, 4, |r, c| o[(r, c)]);
        let conj = to_dense(&pm).adjoint() * to_dense(&h) * to_dense(&pm);
        for r in 0..4 {
            for c in 0..4 {
                assert!((conj[(r, c)] - hd[(r, c)]).norm() < 1e-10, "delta {delta} ({r},{c})");
            }
        }
        for r in 1..4 {
            for c in 1..4 {
                if r != c {
                    assert!(hd[(r, c)].norm() < 1e-12);
                }
            }
        }
    }
    // the emitter decouples from the zero-energy supermode at zero detuning
    assert_eq!(diagonalized_hamiltonian(0.0, &p)[(0, 2)].norm(), 0.0);
}

#[test]
fn effective_coupling_values() {
    assert_eq!(effective_coupling(0.0, 400.0, 50.0), 0.0);
    let far = effective_coupling(400.0 * 1e6, 400.0, 50.0);
    assert!((far - 50.0).abs() / 50.0 < 1e-9);
    let g_eff = effective_coupling(480.0, 400.0, 50.0);
    assert!((g_eff - 32.349).abs() < 1e-3, "{g_eff}");
    assert!((2f64.sqrt() * g_eff / 50.0 - 0.915).abs() < 1e-3);
}

#[test]
fn schedule_evaluation() {
    let step = DetuningSchedule::Step { delta_initial: 480.0, delta_final: 0.0, t_switch: 0.05 };
    assert_eq!(evaluate_schedule(&step, 0.05), 0.0);
    assert_eq!(evaluate_schedule(&step, 0.0499999), 480.0);

    let fall = DetuningSchedule::GaussianFall { delta_initial: 480.0, delta_final: 20.0, t_switch: 0.05, fall_width: 0.003 };
    assert_eq!(evaluate_schedule(&fall, 0.05), 480.0);
    let v = evaluate_schedule(&fall, 0.053);
    assert!((v - (20.0 + 460.0 * (-0.5f64).exp())).abs() < 1e-12);
    let left = evaluate_schedule(&fall, 0.05 - 1e-13);
    let right = evaluate_schedule(&fall, 0.05 + 1e-13);
    assert!((left - right).abs() < 1e-12);
    assert_eq!(evaluate_schedule(&DetuningSchedule::constant(7.0), 123.0), 7.0);
}

#[test]
fn rabi_period_follows_effective_coupling() {
    let g_eff = effective_coupling(480.0, 400.0, 50.0);
    let period = PI / g_eff;
    for p in [ModelParams::reference().lossless(), ModelParams::reference()] {
        let (grid, pop) = tls_population(&DetuningSchedule::constant(480.0), &p, 0.35);
        let minima = minima_times(&grid, &pop);
        assert!(minima.len() >= 3);
        let measured = minima[2] - minima[1];
        assert!((measured / period - 1.0).abs() < 0.02, "period {measured} vs {period}");
    }
}

#[test]
fn valley_switch_arrests_the_oscillation() {
    let p = ModelParams::reference();
    let ts = find_switch_time(&p, 480.0, SwitchPhase::FirstValley).unwrap();
    let sched = DetuningSchedule::Step { delta_initial: 480.0, delta_final: 0.0, t_switch: ts };
    let (grid, pop) = tls_population(&sched, &p, ts + 0.35);
    let after = grid.index_of(ts).unwrap();
    let max_after = pop[after..].iter().cloned().fold(0.0, f64::max);
    assert!(max_after < 0.1, "revival {max_after}");
}

#[test]
fn resonant_cavities_barely_deplete_the_emitter() {
    for (g, bound, above) in [(50.0, 0.1, false), (80.0, 0.1, false), (400.0, 0.3, true)] {
        let p = ModelParams { g, ..ModelParams::reference().lossless() };
        let (_, pop) = tls_population(&DetuningSchedule::constant(0.0), &p, 0.2);
        let depletion = pop.iter().map(|v| 1.0 - v).fold(0.0, f64::max);
        if above {
            assert!(depletion > bound, "g = {g}: depletion {depletion}");
        } else {
            assert!(depletion < bound, "g = {g}: depletion {depletion}");
        }
    }
}
