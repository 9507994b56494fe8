//! Emitter coupled to the middle cavity of a three-cavity chain.
//!
//! Basis of the single-excitation sector used throughout:
//!
//! | index | state   | operator |
//! |-------|---------|----------|
//! | 0     | vacuum  |          |
//! | 1     | emitter | `sigma`  |
//! | 2     | left    | `a`      |
//! | 3     | middle  | `b`      |
//! | 4     | right   | `c`      |
//!
//! The emitter and the middle cavity sit at `omega0`; the lateral cavities
//! are detuned symmetrically to `omega0 + delta` (left) and `omega0 - delta`
//! (right). All frequencies are angular, in GHz = rad/ns.

use std::sync::Arc;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::lindblad::LindbladGenerator;
use crate::operator::{expectation, ladder_operators, ComplexOperator, DensityMatrix};
use crate::propagate::{default_grid, propagate, Trajectory};

/// Dimension of the system space (vacuum + four single excitations).
pub const SYSTEM_DIM: usize = 5;

/// Coupling constants and loss rates, all in GHz.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    /// Emitter to middle-cavity coupling.
    pub g: f64,
    /// Middle to lateral cavity coupling.
    pub eta: f64,
    /// Emitter decay rate.
    pub gamma: f64,
    /// Decay rate of each cavity.
    pub kappa: f64,
    /// Common resonance; 0 in the rotating frame.
    #[serde(default)]
    pub omega0: f64,
}

impl ModelParams {
    /// `{g, eta, gamma, kappa} = {50, 400, 1, 20}` GHz, rotating frame.
    pub const fn reference() -> Self {
        Self { g: 50.0, eta: 400.0, gamma: 1.0, kappa: 20.0, omega0: 0.0 }
    }

    /// Same couplings with all losses switched off.
    pub fn lossless(self) -> Self {
        Self { gamma: 0.0, kappa: 0.0, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.g, self.eta, self.gamma, self.kappa, self.omega0].iter().all(|x| x.is_finite());
        if !finite {
            return Err(domain("model parameters must be finite"));
        }
        if !(self.g > 0.0) {
            return Err(domain(format!("g must be > 0, got {}", self.g)));
        }
        if !(self.eta > 0.0) {
            return Err(domain(format!("eta must be > 0, got {}", self.eta)));
        }
        if self.gamma < 0.0 || self.kappa < 0.0 {
            return Err(domain("gamma and kappa must be >= 0"));
        }
        Ok(())
    }
}

impl Default for ModelParams {
    fn default() -> Self {
        Self::reference()
    }
}

/// The four excitable modes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Tls,
    Left,
    Middle,
    Right,
}

impl Mode {
    pub const ALL: [Mode; 4] = [Mode::Tls, Mode::Left, Mode::Middle, Mode::Right];

    /// Basis index of the single excitation in this mode.
    pub const fn index(self) -> usize {
        match self {
            Mode::Tls => 1,
            Mode::Left => 2,
            Mode::Middle => 3,
            Mode::Right => 4,
        }
    }

    /// Conventional operator name: `sigma`, `a`, `b`, `c`.
    pub const fn label(self) -> &'static str {
        match self {
            Mode::Tls => "sigma",
            Mode::Left => "a",
            Mode::Middle => "b",
            Mode::Right => "c",
        }
    }

    pub fn from_label(s: &str) -> Option<Self> {
        match s {
            "sigma" | "tls" | "e" => Some(Mode::Tls),
            "a" | "left" => Some(Mode::Left),
            "b" | "middle" => Some(Mode::Middle),
            "c" | "right" => Some(Mode::Right),
            _ => None,
        }
    }

    pub fn lowering(self) -> ComplexOperator {
        ComplexOperator::outer(SYSTEM_DIM, 0, self.index())
    }
}

/// Single-excitation basis states used as initial conditions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BasisState {
    /// Global ground state.
    Vac,
    /// Excited emitter, empty cavities (`|e000>`).
    E,
    A,
    B,
    C,
}

impl BasisState {
    pub const fn index(self) -> usize {
        match self {
            BasisState::Vac => 0,
            BasisState::E => 1,
            BasisState::A => 2,
            BasisState::B => 3,
            BasisState::C => 4,
        }
    }

    pub fn density_matrix(self) -> DensityMatrix {
        DensityMatrix::basis_state(SYSTEM_DIM, self.index()).expect("basis index in range")
    }
}

/// Real linear combination of `sigma, a, b, c`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Observable {
    pub label: String,
    /// Coefficients of `(sigma, a, b, c)`.
    pub coefficients: [f64; 4],
}

impl Observable {
    pub fn mode(m: Mode) -> Self {
        let mut coefficients = [0.0; 4];
        coefficients[m.index() - 1] = 1.0;
        Self { label: m.label().to_string(), coefficients }
    }

    pub fn combination(label: impl Into<String>, coefficients: [f64; 4]) -> Result<Self> {
        if coefficients.iter().any(|c| !c.is_finite()) || coefficients.iter().all(|&c| c == 0.0) {
            return Err(domain("observable coefficients must be finite and not all zero"));
        }
        Ok(Self { label: label.into(), coefficients })
    }

    /// Lowering-type operator `sum_j c_j O_j` on the system space.
    pub fn operator(&self) -> ComplexOperator {
        let mut op = ComplexOperator::zeros(SYSTEM_DIM);
        for (m, &c) in Mode::ALL.iter().zip(&self.coefficients) {
            op[(0, m.index())] = C64::new(c, 0.0);
        }
        op
    }
}

/// `sigma, a, b, c` in that order.
pub fn mode_operators() -> Vec<ComplexOperator> {
    ladder_operators(4).expect("four modes")
}

/// The 5x5 Hamiltonian on `{vac, e, a, b, c}`.
///
/// The vacuum row and column are zero; the excited block has diagonal
/// `(w0, w0 + delta, w0, w0 - delta)` and couplings `g` (e-b) and `eta`
/// (a-b, b-c).
pub fn hamiltonian(delta: f64, p: &ModelParams) -> ComplexOperator {
    let block = excited_block(delta, p);
    block.embed_shifted()
}

/// The 4x4 excited block on `{e, a, b, c}`.
pub fn excited_block(delta: f64, p: &ModelParams) -> ComplexOperator {
    let w0 = p.omega0;
    ComplexOperator::from_real_rows(&[
        &[w0, 0.0, p.g, 0.0],
        &[0.0, w0 + delta, p.eta, 0.0],
        &[p.g, p.eta, w0, p.eta],
        &[0.0, 0.0, p.eta, w0 - delta],
    ])
    .expect("square")
}

trait EmbedShifted {
    fn embed_shifted(&self) -> ComplexOperator;
}

impl EmbedShifted for ComplexOperator {
    /// Places a block on indices `1..` of a space one larger.
    fn embed_shifted(&self) -> ComplexOperator {
        let n = self.dim();
        let mut out = ComplexOperator::zeros(n + 1);
        for r in 0..n {
            for c in 0..n {
                out[(r + 1, c + 1)] = self[(r, c)];
            }
        }
        out
    }
}

/// Supermodes of the three-cavity block, ordered `(-, 0, +)`.
///
/// Frequencies are relative to `omega0`. Vectors are expressed on
/// `(a, b, c)` and normalised with a positive third component.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupermodeSet {
    pub frequencies: [f64; 3],
    pub vectors: [[f64; 3]; 3],
    pub l_minus: f64,
    pub l_plus: f64,
}

impl SupermodeSet {
    pub fn lower(&self) -> (f64, [f64; 3]) {
        (self.frequencies[0], self.vectors[0])
    }

    pub fn zero_energy(&self) -> (f64, [f64; 3]) {
        (self.frequencies[1], self.vectors[1])
    }

    pub fn upper(&self) -> (f64, [f64; 3]) {
        (self.frequencies[2], self.vectors[2])
    }
}

/// Closed-form eigensystem of the three-cavity block.
///
/// With `s = sqrt(delta^2 + 2 eta^2)` the eigenfrequencies are `0, +-s` and
///
/// ```text
/// v0 ∝ (-1, delta/eta, 1)
/// v± ∝ ((±delta s + delta^2 + eta^2)/eta^2, (±s + delta)/eta, 1)
/// ```
///
/// The two expressions `delta^2 + eta^2 ∓ delta s` and `delta ∓ s` lose all
/// precision through cancellation when `|delta| >> eta`; they are evaluated
/// through the equivalent forms `eta^4 / (delta^2 + eta^2 ± delta s)` and
/// `±2 eta^2 / (s ∓ delta)` on the cancelling branch.
pub fn supermodes(delta: f64, eta: f64) -> SupermodeSet {
    assert!(eta > 0.0, "eta must be positive");
    let s = (delta * delta + 2.0 * eta * eta).sqrt();
    let e2 = eta * eta;
    let q = delta * delta + e2;

    // sign = +1 for the upper mode, -1 for the lower
    let components = |sign: f64| -> (f64, f64) {
        let ds = sign * delta * s;
        let first = if ds >= 0.0 { q + ds } else { e2 * e2 / (q - ds) };
        let second = if sign * delta >= 0.0 { sign * s + delta } else { sign * 2.0 * e2 / (s - sign * delta) };
        (first / e2, second / eta)
    };

    let (p1, p2) = components(1.0);
    let (m1, m2) = components(-1.0);
    // l± = sqrt(2 s^2 (q ± delta s) / eta^4), with the same stable numerator
    let q_plus = if delta >= 0.0 { q + delta * s } else { e2 * e2 / (q - delta * s) };
    let q_minus = if delta <= 0.0 { q - delta * s } else { e2 * e2 / (q + delta * s) };
    let l_plus = (2.0 * s * s * q_plus).sqrt() / e2;
    let l_minus = (2.0 * s * s * q_minus).sqrt() / e2;

    let r = delta / eta;
    let n0 = (2.0 + r * r).sqrt();
    SupermodeSet {
        frequencies: [-s, 0.0, s],
        vectors: [
            [m1 / l_minus, m2 / l_minus, 1.0 / l_minus],
            [-1.0 / n0, r / n0, 1.0 / n0],
            [p1 / l_plus, p2 / l_plus, 1.0 / l_plus],
        ],
        l_minus,
        l_plus,
    }
}

/// Coupling of the emitter to the zero-energy supermode,
/// `g (delta/eta) / sqrt(2 + (delta/eta)^2)`.
pub fn effective_coupling(delta: f64, eta: f64, g: f64) -> f64 {
    let r = delta / eta;
    g * r / (2.0 + r * r).sqrt()
}

/// Basis change `P` from `{e, v-, v0, v+}` to `{e, a, b, c}`.
pub fn transformation_matrix(delta: f64, eta: f64) -> ComplexOperator {
    let modes = supermodes(delta, eta);
    let mut p = ComplexOperator::zeros(4);
    p[(0, 0)] = C64::new(1.0, 0.0);
    for (col, v) in modes.vectors.iter().enumerate() {
        for (row, &x) in v.iter().enumerate() {
            p[(row + 1, col + 1)] = C64::new(x, 0.0);
        }
    }
    p
}

/// Excited-block Hamiltonian in the `{e, v-, v0, v+}` basis.
pub fn diagonalized_hamiltonian(delta: f64, p: &ModelParams) -> ComplexOperator {
    let modes = supermodes(delta, p.eta);
    let w0 = p.omega0;
    let mut h = ComplexOperator::zeros(4);
    h[(0, 0)] = C64::new(w0, 0.0);
    for k in 0..3 {
        let coupling = C64::new(p.g * modes.vectors[k][1], 0.0);
        h[(0, k + 1)] = coupling;
        h[(k + 1, 0)] = coupling;
        h[(k + 1, k + 1)] = C64::new(w0 + modes.frequencies[k], 0.0);
    }
    h
}

/// Time profile of the lateral detuning.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DetuningSchedule {
    Constant {
        delta_initial: f64,
    },
    /// Sudden switch; right-continuous at `t_switch`.
    Step {
        delta_initial: f64,
        delta_final: f64,
        t_switch: f64,
    },
    /// `delta_final + (delta_initial - delta_final) exp(-(t - t_switch)^2 / (2 fall_width^2))`
    /// for `t >= t_switch`. `fall_width` is the Gaussian standard deviation.
    GaussianFall {
        delta_initial: f64,
        delta_final: f64,
        t_switch: f64,
        fall_width: f64,
    },
}

impl DetuningSchedule {
    pub fn constant(delta: f64) -> Self {
        Self::Constant { delta_initial: delta }
    }

    pub fn validate(&self) -> Result<()> {
        let values: Vec<f64> = match *self {
            Self::Constant { delta_initial } => vec![delta_initial],
            Self::Step { delta_initial, delta_final, t_switch } => vec![delta_initial, delta_final, t_switch],
            Self::GaussianFall { delta_initial, delta_final, t_switch, fall_width } => {
                if !(fall_width > 0.0) {
                    return Err(domain(format!("fall_width must be > 0, got {fall_width}")));
                }
                vec![delta_initial, delta_final, t_switch, fall_width]
            }
        };
        if values.iter().any(|v| !v.is_finite()) {
            return Err(domain("schedule parameters must be finite"));
        }
        Ok(())
    }

    pub fn evaluate(&self, t: f64) -> f64 {
        match *self {
            Self::Constant { delta_initial } => delta_initial,
            Self::Step { delta_initial, delta_final, t_switch } => {
                if t < t_switch {
                    delta_initial
                } else {
                    delta_final
                }
            }
            Self::GaussianFall { delta_initial, delta_final, t_switch, fall_width } => {
                if t < t_switch {
                    delta_initial
                } else {
                    let x = (t - t_switch) / fall_width;
                    delta_final + (delta_initial - delta_final) * (-0.5 * x * x).exp()
                }
            }
        }
    }

    pub fn t_switch(&self) -> Option<f64> {
        match *self {
            Self::Constant { .. } => None,
            Self::Step { t_switch, .. } | Self::GaussianFall { t_switch, .. } => Some(t_switch),
        }
    }

    /// Largest `|delta|` the schedule reaches.
    pub fn max_abs_delta(&self) -> f64 {
        match *self {
            Self::Constant { delta_initial } => delta_initial.abs(),
            Self::Step { delta_initial, delta_final, .. } | Self::GaussianFall { delta_initial, delta_final, .. } => {
                delta_initial.abs().max(delta_final.abs())
            }
        }
    }
}

pub fn evaluate_schedule(s: &DetuningSchedule, t: f64) -> f64 {
    s.evaluate(t)
}

/// Master-equation generator for the model under a detuning schedule, with
/// dissipators `(sigma, gamma)`, `(a, kappa)`, `(b, kappa)`, `(c, kappa)`.
pub fn build_time_dependent_generator(s: &DetuningSchedule, p: &ModelParams) -> Result<LindbladGenerator> {
    p.validate()?;
    s.validate()?;
    let base = hamiltonian(0.0, p);
    let schedule = *s;
    let (left, right) = (Mode::Left.index(), Mode::Right.index());
    let h = move |t: f64| {
        let delta = schedule.evaluate(t);
        let mut h = base.clone();
        h[(left, left)] += delta;
        h[(right, right)] -= delta;
        h
    };
    let ops = mode_operators();
    let dissipators =
        vec![(ops[0].clone(), p.gamma), (ops[1].clone(), p.kappa), (ops[2].clone(), p.kappa), (ops[3].clone(), p.kappa)];
    let gen = LindbladGenerator::new(Arc::new(h), dissipators)?;
    Ok(match s.t_switch() {
        Some(ts) => gen.with_breakpoints(vec![ts]),
        None => gen,
    })
}

/// Populations of `sigma, a, b, c` along a trajectory.
pub fn mode_populations(traj: &Trajectory) -> [Vec<f64>; 4] {
    Mode::ALL.map(|m| {
        let n = ComplexOperator::outer(SYSTEM_DIM, m.index(), m.index());
        traj.states.iter().map(|rho| expectation(rho, &n).expect("system dimension").re).collect()
    })
}

/// Where in the Rabi cycle to switch.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SwitchPhase {
    /// First minimum of the emitter population.
    FirstValley,
    /// First maximum after the first minimum.
    FirstPeak,
}

/// Locates the switching time of a no-switch reference run at constant
/// `delta`, starting from `|e000>`: the first local extremum of the emitter
/// population of the requested kind, refined with a 3-point parabola.
pub fn find_switch_time(p: &ModelParams, delta: f64, phase: SwitchPhase) -> Result<f64> {
    let g_eff = effective_coupling(delta, p.eta, p.g).abs();
    if g_eff == 0.0 {
        return Err(domain("no Rabi oscillation at zero effective coupling"));
    }
    let period = std::f64::consts::PI / g_eff;
    let t1 = 2.5 * period;
    let gen = build_time_dependent_generator(&DetuningSchedule::constant(delta), p)?;
    let grid = default_grid(&gen, 0.0, t1, 0.0)?;
    let traj = propagate(&BasisState::E.density_matrix(), &gen, &grid)?;
    let pop = &mode_populations(&traj)[0];
    let valley = first_extremum(pop, 1, Extremum::Min)
        .ok_or_else(|| Error::Domain("no emitter population minimum in the reference window".into()))?;
    let idx = match phase {
        SwitchPhase::FirstValley => valley,
        SwitchPhase::FirstPeak => first_extremum(pop, valley + 1, Extremum::Max)
            .ok_or_else(|| Error::Domain("no emitter population maximum in the reference window".into()))?,
    };
    Ok(grid.t(idx) + parabolic_offset(pop[idx - 1], pop[idx], pop[idx + 1]) * grid.dt())
}

#[derive(Clone, Copy, PartialEq, Eq)]
pub(crate) enum Extremum {
    Min,
    Max,
}

/// First interior index `i >= from` that is a local extremum of `y`.
pub(crate) fn first_extremum(y: &[f64], from: usize, kind: Extremum) -> Option<usize> {
    (from.max(1)..y.len().saturating_sub(1)).find(|&i| match kind {
        Extremum::Min => y[i] <= y[i - 1] && y[i] < y[i + 1],
        Extremum::Max => y[i] >= y[i - 1] && y[i] > y[i + 1],
    })
}

/// Vertex offset (in grid steps, within [-1/2, 1/2]) of the parabola
/// through three equally spaced samples.
pub(crate) fn parabolic_offset(ym: f64, y0: f64, yp: f64) -> f64 {
    let denom = ym - 2.0 * y0 + yp;
    if denom == 0.0 {
        0.0
    } else {
        (0.5 * (ym - yp) / denom).clamp(-0.5, 0.5)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const P: ModelParams = ModelParams::reference();

    #[test]
    fn hamiltonian_at_zero_detuning() {
        let h = hamiltonian(0.0, &P);
        assert_eq!(h.dim(), 5);
        for k in 0..5 {
            assert_eq!(h[(0, k)], C64::new(0.0, 0.0));
            assert_eq!(h[(k, 0)], C64::new(0.0, 0.0));
            assert_eq!(h[(k, k)], C64::new(0.0, 0.0));
        }
        assert_eq!(h[(1, 3)].re, 50.0);
        assert_eq!(h[(2, 3)].re, 400.0);
        assert_eq!(h[(3, 4)].re, 400.0);
        assert_eq!(h[(1, 2)].re, 0.0);
        assert!(h.is_hermitian(0.0));
    }

    #[test]
    fn lateral_diagonal_at_1p2_eta() {
        let h = hamiltonian(1.2 * P.eta, &P);
        assert_relative_eq!(h[(2, 2)].re, 480.0, epsilon = 1e-12);
        assert_relative_eq!(h[(4, 4)].re, -480.0, epsilon = 1e-12);
    }

    #[test]
    fn zero_detuning_supermodes() {
        let m = supermodes(0.0, 400.0);
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert_eq!(m.vectors[1][1], 0.0);
        assert_relative_eq!(m.vectors[1][0], -r, epsilon = 1e-15);
        assert_relative_eq!(m.vectors[1][2], r, epsilon = 1e-15);
        assert_relative_eq!(m.frequencies[2], 565.685_424_949_238, epsilon = 1e-9);
        assert_relative_eq!(m.frequencies[0], -565.685_424_949_238, epsilon = 1e-9);
    }

    #[test]
    fn normalisers_match_direct_norm() {
        for &(d, e) in &[(0.0, 400.0), (480.0, 400.0), (-480.0, 400.0), (3.0e4, 2.0)] {
            let m = supermodes(d, e);
            for v in m.vectors {
                let n: f64 = v.iter().map(|x| x * x).sum();
                assert_relative_eq!(n, 1.0, epsilon = 1e-12);
                assert!(v[2] > 0.0);
            }
        }
    }

    #[test]
    fn effective_coupling_values() {
        assert_eq!(effective_coupling(0.0, 400.0, 50.0), 0.0);
        let g_eff = effective_coupling(480.0, 400.0, 50.0);
        assert_relative_eq!(g_eff, 50.0 * 1.2 / 3.44_f64.sqrt(), epsilon = 1e-12);
        assert!((g_eff - 32.349).abs() < 1e-3);
        let big = effective_coupling(400.0e6, 400.0, 50.0);
        assert!(((big - 50.0) / 50.0).abs() < 1e-9);
        assert_eq!(effective_coupling(-480.0, 400.0, 50.0), -g_eff);
    }

    #[test]
    fn diagonalized_block_is_diagonal() {
        for &d in &[0.0, 100.0, 480.0, -800.0] {
            let h = diagonalized_hamiltonian(d, &P);
            for r in 1..4 {
                for c in 1..4 {
                    if r != c {
                        assert!(h[(r, c)].norm() < 1e-12);
                    }
                }
            }
        }
        assert_eq!(diagonalized_hamiltonian(0.0, &P)[(0, 2)].norm(), 0.0);
    }

    #[test]
    fn schedule_evaluation() {
        let step = DetuningSchedule::Step { delta_initial: 480.0, delta_final: 0.0, t_switch: 0.05 };
        assert_eq!(step.evaluate(0.05), 0.0);
        assert_eq!(step.evaluate(0.049_999), 480.0);
        let fall = DetuningSchedule::GaussianFall { delta_initial: 480.0, delta_final: 0.0, t_switch: 0.05, fall_width: 0.003 };
        assert_eq!(fall.evaluate(0.05), 480.0);
        assert_relative_eq!(fall.evaluate(0.053), 480.0 * (-0.5_f64).exp(), epsilon = 1e-9);
        assert_eq!(fall.evaluate(0.0), 480.0);
        assert_eq!(DetuningSchedule::constant(12.0).evaluate(3.0), 12.0);
    }

    #[test]
    fn gaussian_fall_is_continuous_at_switch() {
        let fall = DetuningSchedule::GaussianFall { delta_initial: 480.0, delta_final: -30.0, t_switch: 0.05, fall_width: 0.003 };
        let eps = 1e-12;
        assert!((fall.evaluate(0.05 - eps) - fall.evaluate(0.05 + eps)).abs() < 1e-12);
    }

    #[test]
    fn invalid_schedule() {
        let bad = DetuningSchedule::GaussianFall { delta_initial: 1.0, delta_final: 0.0, t_switch: 0.0, fall_width: 0.0 };
        assert!(bad.validate().is_err());
        assert!(build_time_dependent_generator(&bad, &P).is_err());
    }

    #[test]
    fn invalid_params() {
        assert!(ModelParams { g: 0.0, ..P }.validate().is_err());
        assert!(ModelParams { kappa: -1.0, ..P }.validate().is_err());
        assert!(ModelParams { eta: f64::NAN, ..P }.validate().is_err());
    }

    #[test]
    fn observable_combination_operator() {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let obs = Observable::combination("sym", [0.0, r, 0.0, r]).unwrap();
        let op = obs.operator();
        assert_eq!(op[(0, 2)].re, r);
        assert_eq!(op[(0, 4)].re, r);
        assert_eq!(op.nonzeros().len(), 2);
        assert!(Observable::combination("zero", [0.0; 4]).is_err());
    }

    #[test]
    fn parabola_vertex() {
        // y = (x - 0.3)^2 sampled at -1, 0, 1
        let f = |x: f64| (x - 0.3) * (x - 0.3);
        assert_relative_eq!(parabolic_offset(f(-1.0), f(0.0), f(1.0)), 0.3, epsilon = 1e-12);
    }

    #[test]
    fn switch_times_bracket_half_and_full_period() {
        let g_eff = effective_coupling(480.0, 400.0, 50.0);
        let half = std::f64::consts::PI / (2.0 * g_eff);
        let valley = find_switch_time(&P, 480.0, SwitchPhase::FirstValley).unwrap();
        let peak = find_switch_time(&P, 480.0, SwitchPhase::FirstPeak).unwrap();
        // loss through the zero-energy mode delays the first valley by ~10%
        assert!(valley > 0.9 * half && valley < 1.2 * half, "valley {valley} vs {half}");
        assert!((peak - 2.0 * half).abs() / (2.0 * half) < 0.05, "peak {peak}");
        assert!(find_switch_time(&P, 0.0, SwitchPhase::FirstValley).is_err());
    }
}
