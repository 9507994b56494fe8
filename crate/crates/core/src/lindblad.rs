//! Lindblad generators with explicitly time-dependent Hamiltonians.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64 as C64;

use crate::error::{domain, shape, Result};
use crate::operator::{ComplexOperator, HAMILTONIAN_HERMITICITY_TOL};

/// Time-dependent Hamiltonian `t (ns) -> H(t)` in GHz (rad/ns).
pub type HamiltonianFn = Arc<dyn Fn(f64) -> ComplexOperator + Send + Sync>;

/// A collapse operator together with its (nonnegative) rate.
#[derive(Clone, Debug)]
pub struct Dissipator {
    pub operator: ComplexOperator,
    pub rate: f64,
}

/// `drho/dt = -i[H(t), rho] + sum_j r_j (C_j rho C_j^dag - 1/2 {C_j^dag C_j, rho})`.
///
/// Immutable once built; cloning shares the Hamiltonian closure.
#[derive(Clone)]
pub struct LindbladGenerator {
    dim: usize,
    hamiltonian: HamiltonianFn,
    dissipators: Vec<Dissipator>,
    /// `1/2 sum_j r_j C_j^dag C_j`
    half_decay: ComplexOperator,
    /// Non-zero entries of `sqrt(r_j) C_j`.
    jumps: Vec<Vec<(usize, usize, C64)>>,
    /// Times at which `H(t)` may jump. Grid points landing on one use the
    /// right limit going forward and the left limit for the step ending there.
    breakpoints: Vec<f64>,
}

impl fmt::Debug for LindbladGenerator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LindbladGenerator")
            .field("dim", &self.dim)
            .field("dissipators", &self.dissipators.iter().map(|d| d.rate).collect::<Vec<_>>())
            .field("breakpoints", &self.breakpoints)
            .finish()
    }
}

/// Builds a generator from a Hamiltonian function and `(collapse operator, rate)` pairs.
///
/// The Hamiltonian is probed at `t = 0` to fix the dimension.
pub fn assemble_generator<F>(hamiltonian: F, dissipators: Vec<(ComplexOperator, f64)>) -> Result<LindbladGenerator>
where
    F: Fn(f64) -> ComplexOperator + Send + Sync + 'static,
{
    LindbladGenerator::new(Arc::new(hamiltonian), dissipators)
}

impl LindbladGenerator {
    pub fn new(hamiltonian: HamiltonianFn, dissipators: Vec<(ComplexOperator, f64)>) -> Result<Self> {
        let h0 = hamiltonian(0.0);
        let dim = h0.dim();
        if dim == 0 {
            return Err(shape("Hamiltonian has dimension 0"));
        }
        let herm = h0.hermiticity_error();
        if herm > HAMILTONIAN_HERMITICITY_TOL * h0.max_abs().max(1.0) {
            return Err(domain(format!("Hamiltonian is not Hermitian (deviation {herm:e})")));
        }
        let mut half_decay = ComplexOperator::zeros(dim);
        let mut jumps = Vec::with_capacity(dissipators.len());
        let mut stored = Vec::with_capacity(dissipators.len());
        for (k, (op, rate)) in dissipators.into_iter().enumerate() {
            if op.dim() != dim {
                return Err(shape(format!("dissipator {k} has dimension {}, Hamiltonian {dim}", op.dim())));
            }
            if !(rate >= 0.0) || !rate.is_finite() {
                return Err(domain(format!("dissipator {k} has rate {rate}, must be finite and >= 0")));
            }
            let cdc = op.adjoint().matmul(&op)?;
            half_decay += &(&cdc * (0.5 * rate));
            if rate > 0.0 {
                let s = rate.sqrt();
                jumps.push(op.nonzeros().into_iter().map(|(r, c, v)| (r, c, v * s)).collect());
            }
            stored.push(Dissipator { operator: op, rate });
        }
        Ok(Self { dim, hamiltonian, dissipators: stored, half_decay, jumps, breakpoints: Vec::new() })
    }

    /// Generator with a constant Hamiltonian.
    pub fn constant(h: ComplexOperator, dissipators: Vec<(ComplexOperator, f64)>) -> Result<Self> {
        Self::new(Arc::new(move |_| h.clone()), dissipators)
    }

    /// Registers times where the Hamiltonian is discontinuous.
    pub fn with_breakpoints(mut self, mut breakpoints: Vec<f64>) -> Self {
        breakpoints.retain(|t| t.is_finite());
        breakpoints.sort_by(f64::total_cmp);
        breakpoints.dedup();
        self.breakpoints = breakpoints;
        self
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn hamiltonian_at(&self, t: f64) -> ComplexOperator {
        (self.hamiltonian)(t)
    }

    pub fn hamiltonian_fn(&self) -> &HamiltonianFn {
        &self.hamiltonian
    }

    pub fn dissipators(&self) -> &[Dissipator] {
        &self.dissipators
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn max_rate(&self) -> f64 {
        self.dissipators.iter().map(|d| d.rate).fold(0.0, f64::max)
    }

    /// Instantaneous derivative `L_t(rho)`. `rho` need not be Hermitian.
    pub fn apply(&self, t: f64, rho: &ComplexOperator) -> Result<ComplexOperator> {
        if rho.dim() != self.dim {
            return Err(shape(format!("operator dimension {} vs generator {}", rho.dim(), self.dim)));
        }
        let mut k = Vec::new();
        sparse_entries(&self.effective(&self.hamiltonian_at(t)), &mut k);
        let mut out = ComplexOperator::zeros(self.dim);
        self.apply_effective(&k, rho, &mut out);
        Ok(out)
    }

    /// `K = -i H - 1/2 sum r C^dag C`, so that the no-jump part reads `K rho + rho K^dag`.
    pub(crate) fn effective(&self, h: &ComplexOperator) -> ComplexOperator {
        debug_assert_eq!(h.dim(), self.dim);
        let mut k = ComplexOperator::zeros(self.dim);
        for ((kz, hz), dz) in k.as_mut_slice().iter_mut().zip(h.as_slice()).zip(self.half_decay.as_slice()) {
            *kz = C64::new(hz.im, -hz.re) - dz;
        }
        k
    }

    /// `out = K x + x K^dag + sum_j C_j x C_j^dag` with `K` given by its
    /// non-zero entries (see [`sparse_entries`]).
    pub(crate) fn apply_effective(&self, k: &[(usize, usize, C64)], x: &ComplexOperator, out: &mut ComplexOperator) {
        let n = self.dim;
        let xs = x.as_slice();
        let os = out.as_mut_slice();
        os.fill(C64::new(0.0, 0.0));
        for &(r, m, kv) in k {
            // (K x)[r, :] += K[r, m] x[m, :]
            let xrow = &xs[m * n..(m + 1) * n];
            for (o, xv) in os[r * n..(r + 1) * n].iter_mut().zip(xrow) {
                *o += kv * xv;
            }
        }
        for &(r, m, kv) in k {
            // (x K^dag)[:, r] += x[:, m] conj(K[r, m])
            let kc = kv.conj();
            for (orow, xrow) in os.chunks_exact_mut(n).zip(xs.chunks_exact(n)) {
                orow[r] += xrow[m] * kc;
            }
        }
        for jump in &self.jumps {
            for &(i, j, a) in jump {
                for &(k2, l, b) in jump {
                    os[i * n + k2] += a * xs[j * n + l] * b.conj();
                }
            }
        }
    }
}

/// Non-zero entries of `k`, written into `out`.
pub(crate) fn sparse_entries(k: &ComplexOperator, out: &mut Vec<(usize, usize, C64)>) {
    out.clear();
    let n = k.dim();
    for (idx, &v) in k.as_slice().iter().enumerate() {
        if v.re != 0.0 || v.im != 0.0 {
            out.push((idx / n, idx % n, v));
        }
    }
}
