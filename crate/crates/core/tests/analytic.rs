use trps_core::spectrum::{frequency_grid, local_maxima, lorentzian_fwhm};
use trps_core::*;

fn damped_cavity(omega: f64, kappa: f64) -> (LindbladGenerator, ComplexOperator) {
    let a = ladder_operators(1).unwrap().remove(0);
    let h = ComplexOperator::outer(2, 1, 1).scale(C64::new(omega, 0.0));
    (LindbladGenerator::constant(h, vec![(a.clone(), kappa)]).unwrap(), a)
}

fn closed_form(omega: f64, kappa: f64, t: f64, tau: f64) -> C64 {
    C64::new(-kappa * (2.0 * t - tau) / 2.0, omega * tau).exp()
}

fn gaussian_fall_problem(t_end: f64, freqs: &[f64]) -> TrpsProblem {
    let p = ModelParams::reference();
    let ts = find_switch_time(&p, 480.0, SwitchPhase::FirstValley).unwrap();
    let sched = DetuningSchedule::GaussianFall { delta_initial: 480.0, delta_final: 0.0, t_switch: ts, fall_width: 0.003 };
    TrpsProblem::for_model(&sched, &p, &Observable::mode(Mode::Tls), BasisState::E, t_end, None, freqs, DEFAULT_STRIDE).unwrap()
}

#[test]
fn damped_cavity_correlator_matches_closed_form() {
    let (omega, kappa) = (40.0, 8.0);
    let (gen, a) = damped_cavity(omega, kappa);
    let grid = TimeGrid::new(0.0, 0.5, 2e-4).unwrap();
    let corr = two_time_correlator(&gen, &DensityMatrix::basis_state(2, 1).unwrap(), &a, &grid, 1500).unwrap();
    let mut worst = 0.0_f64;
    for i in (0..grid.len()).step_by(7) {
        for j in (0..corr.row_len(i)).step_by(5) {
            let want = closed_form(omega, kappa, grid.t(i), j as f64 * grid.dt());
            worst = worst.max((corr.get(i, j).unwrap() - want).norm() / want.norm());
        }
    }
    assert!(worst < 1e-6, "relative deviation {worst:e}");
}

#[test]
fn correlator_obeys_cauchy_schwarz() {
    let freqs = [0.0];
    let mut p = gaussian_fall_problem(0.12, &freqs);
    // the bound is stiff where the emitter population nearly vanishes (~1e-10
    // at the valley), so the absolute 1e-8 slack needs the finer integration
    p.grid = p.grid.with_substeps(4 * DEFAULT_SUBSTEPS);
    let corr = two_time_correlator(&p.generator, &p.rho0, &p.operator, &p.grid, 400).unwrap();
    let traj = propagate(&p.rho0, &p.generator, &p.grid).unwrap();
    let n: Vec<f64> =
        traj.expectation_series(&p.operator.adjoint().matmul(&p.operator).unwrap()).unwrap().iter().map(|z| z.re).collect();
    for i in 0..p.grid.len() {
        let c0 = corr.get(i, 0).unwrap();
        assert!(c0.im.abs() < 1e-9 && (c0.re - n[i]).abs() < 1e-9);
        for j in 0..corr.row_len(i) {
            let c = corr.get(i, j).unwrap();
            assert!(c.norm() <= (n[i] * n[i - j]).sqrt() + 1e-8, "({i}, {j}): {} vs {}", c.norm(), (n[i] * n[i - j]).sqrt());
        }
    }
}

#[test]
fn static_model_correlator_becomes_stationary() {
    let gen = build_time_dependent_generator(&DetuningSchedule::constant(0.0), &ModelParams::reference()).unwrap();
    let o = Observable::mode(Mode::Tls).operator();
    let grid = TimeGrid::new(0.0, 2.5, 1e-3).unwrap();
    let corr = two_time_correlator(&gen, &BasisState::E.density_matrix(), &o, &grid, 200).unwrap();
    let (i1, i2) = (grid.index_of(2.0).unwrap(), grid.index_of(2.4).unwrap());
    let (n1, n2) = (corr.get(i1, 0).unwrap(), corr.get(i2, 0).unwrap());
    let mut dev = 0.0_f64;
    for j in 0..200 {
        dev = dev.max((corr.get(i1, j).unwrap() / n1 - corr.get(i2, j).unwrap() / n2).norm());
    }
    assert!(dev < 1e-4, "normalized columns differ by {dev:e}");
}

#[test]
fn filtered_damped_cavity_has_width_kappa_plus_resolution() {
    let (omega, kappa, delta_s) = (10.0, 20.0, 20.0);
    let grid = TimeGrid::new(0.0, 1.2, 1e-3).unwrap();
    let tau_count = 600;
    let mut values = vec![C64::new(0.0, 0.0); grid.len() * tau_count];
    for i in 0..grid.len() {
        for j in 0..=i.min(tau_count - 1) {
            values[i * tau_count + j] = closed_form(omega, kappa, grid.t(i), j as f64 * grid.dt());
        }
    }
    let closed = CorrelatorGrid { grid, tau_count, values, propagation_steps: 0 };
    let (gen, a) = damped_cavity(omega, kappa);
    let numeric = two_time_correlator(&gen, &DensityMatrix::basis_state(2, 1).unwrap(), &a, &grid, tau_count).unwrap();

    let freqs = frequency_grid(-100.0, 120.0, 1.0).unwrap();
    let idx: Vec<usize> = (0..grid.len()).step_by(4).collect();
    for corr in [closed, numeric] {
        let map = analytic_trps(&corr, &freqs, &idx, delta_s, "a").unwrap();
        let (center, fwhm) = lorentzian_fwhm(&freqs, &map.time_integrated(), 0.3).unwrap();
        assert!((center - omega).abs() < 0.2, "center {center}");
        assert!((fwhm / (kappa + delta_s) - 1.0).abs() < 0.05, "width {fwhm}");
    }
}

#[test]
fn doublet_resolves_only_after_a_rabi_cycle() {
    let freqs = frequency_grid(-80.0, 80.0, 2.0).unwrap();
    let mut p = TrpsProblem::for_model(
        &DetuningSchedule::constant(480.0),
        &ModelParams::reference(),
        &Observable::mode(Mode::Tls),
        BasisState::E,
        0.6,
        Some(5e-4),
        &freqs,
        10,
    )
    .unwrap();
    p.grid = p.grid.with_substeps(1);
    let map = analytic_map(&p, &freqs, 5.0, None, 0.0).unwrap();
    assert!(map.spectrum_at(0).iter().all(|&v| v.abs() < 1e-15));
    assert!(map.min() > -1e-10);

    let rabi = std::f64::consts::PI / effective_coupling(480.0, 400.0, 50.0);
    // dominant maxima only; the finite observation window adds weak side lobes
    let peaks = |ti: usize| local_maxima(&freqs, map.spectrum_at(ti), 0.2);
    let onset = (1..map.times.len()).find(|&ti| peaks(ti).len() == 2).map(|ti| map.times[ti]).unwrap();
    assert!(onset > 0.5 * rabi && onset <= rabi, "doublet onset at {onset} ns");
    for (ti, &t) in map.times.iter().enumerate().skip(1) {
        let found = peaks(ti);
        if t < onset {
            assert_eq!(found.len(), 1, "t = {t}");
            assert!(found[0].0.abs() < 1e-6);
        } else if t >= rabi {
            assert_eq!(found.len(), 2, "t = {t}");
            assert!((found[0].0 + found[1].0).abs() < 1e-6);
        }
    }
}

#[test]
fn sensor_and_analytic_spectra_agree() {
    let freqs = frequency_grid(-400.0, 400.0, 25.0).unwrap();
    let p = gaussian_fall_problem(0.15, &freqs);
    let s = sensor_map(&p, &freqs, 50.0, DEFAULT_EPSILON).unwrap();
    let a = analytic_map(&p, &freqs, 50.0, None, std::f64::consts::PI / effective_coupling(480.0, 400.0, 50.0)).unwrap();
    assert_eq!(s.times, a.times);
    let top = a.max();
    let worst = s.intensities.iter().zip(&a.intensities).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    assert!(worst < 0.02 * top, "max deviation {} of the peak", worst / top);
}

#[test]
fn halving_the_quadrature_step_barely_changes_the_spectrum() {
    let freqs = frequency_grid(-300.0, 300.0, 50.0).unwrap();
    let mut coarse = gaussian_fall_problem(0.12, &freqs);
    // identical RK4 steps on both grids, so only the quadrature differs
    coarse.grid = coarse.grid.with_substeps(2);
    let mut fine = coarse.clone();
    fine.grid = coarse.grid.refined(2).with_substeps(1);
    fine.stride = 2 * coarse.stride;
    let horizon = 0.1;
    let a = analytic_map(&coarse, &freqs, 50.0, None, horizon).unwrap();
    let b = analytic_map(&fine, &freqs, 50.0, None, horizon).unwrap();
    assert_eq!(a.times.len(), b.times.len());
    let top = a.max();
    let worst = a.intensities.iter().zip(&b.intensities).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    assert!(worst < 0.005 * top, "change {} of the peak", worst / top);
}
