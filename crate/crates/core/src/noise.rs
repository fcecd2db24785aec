//! Brownian increments and the noise contributions `(σ^r(uⁿ⁻¹) Δ_n W, ψ_i)`.
//!
//! Increments are drawn from a ChaCha8 stream seeded with the path seed, in
//! step-major order (`n = 2..=N`, then mode). The first increment is zero for
//! every mode, so the first step of any run is deterministic.

use alloc::vec;
use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use rand_core::SeedableRng;
use rand_distr::{Distribution, StandardNormal};

use crate::assembly::Assembler;
use crate::basis::{eval_local, BasisCoefficients};
use crate::math;
use crate::sparse::SparseSymMatrix;
use crate::{Error, Result};

/// Realized increments `Δ_n β_k` for `n = 1..=N`, `k = 0..r`.
#[derive(Debug, Clone, PartialEq)]
pub struct IncrementTable {
    steps: usize,
    tau: f64,
    modes: usize,
    seed: u64,
    data: Vec<f64>,
}

impl IncrementTable {
    pub fn generate(steps: usize, tau: f64, modes: usize, seed: u64) -> Result<Self> {
        if steps == 0 || modes == 0 {
            return Err(Error::InvalidArgument("need at least one step and one mode"));
        }
        if !(tau > 0.0) {
            return Err(Error::InvalidArgument("time step must be positive"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sd = math::sqrt(tau);
        let mut data = vec![0.0; steps * modes];
        for v in data.iter_mut().skip(modes) {
            let z: f64 = StandardNormal.sample(&mut rng);
            *v = sd * z;
        }
        Ok(Self { steps, tau, modes, seed, data })
    }

    /// Table with every increment zero.
    pub fn zeros(steps: usize, tau: f64, modes: usize) -> Self {
        Self { steps, tau, modes, seed: 0, data: vec![0.0; steps * modes] }
    }

    /// Builds a table from explicit rows `n = 1..=N`; the first row must be zero.
    pub fn from_rows(tau: f64, modes: usize, data: Vec<f64>) -> Result<Self> {
        if modes == 0 || data.len() % modes != 0 || data.is_empty() {
            return Err(Error::InvalidArgument("increment data must be a whole number of rows"));
        }
        if data[..modes].iter().any(|v| *v != 0.0) {
            return Err(Error::InvalidArgument("first increment row must be zero"));
        }
        Ok(Self { steps: data.len() / modes, tau, modes, seed: 0, data })
    }

    #[inline]
    pub fn steps(&self) -> usize {
        self.steps
    }

    #[inline]
    pub fn tau(&self) -> f64 {
        self.tau
    }

    #[inline]
    pub fn modes(&self) -> usize {
        self.modes
    }

    #[inline]
    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Increments of step `n` (1-based).
    #[inline]
    pub fn row(&self, n: usize) -> &[f64] {
        assert!(n >= 1 && n <= self.steps, "step index out of range");
        &self.data[(n - 1) * self.modes..n * self.modes]
    }

    /// `W_k(t_n)` for `n = 0..=N`, the running sums of the increments.
    pub fn cumulative(&self, mode: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.steps + 1);
        let mut acc = 0.0;
        out.push(0.0);
        for n in 1..=self.steps {
            acc += self.row(n)[mode];
            out.push(acc);
        }
        out
    }

    /// Copy with every increment multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut t = self.clone();
        t.data.iter_mut().for_each(|v| *v *= factor);
        t
    }
}

/// Noise coefficient `σ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseModel {
    None,
    /// `σ(u) = a u` driven by one scalar Brownian motion.
    Linear { amplitude: f64 },
    /// `σ_h(u) = σ₀ Σ_k u χ_k / |D_k|`, one Brownian motion per cell.
    SpaceTime { amplitude: f64, lambda_b: Option<f64> },
}

impl NoiseModel {
    /// Number of Brownian modes the model consumes on `grid`.
    pub fn modes(&self, cells: usize) -> usize {
        match self {
            NoiseModel::None | NoiseModel::Linear { .. } => 1,
            NoiseModel::SpaceTime { .. } => cells,
        }
    }

    pub fn is_deterministic(&self) -> bool {
        match *self {
            NoiseModel::None => true,
            NoiseModel::Linear { amplitude } | NoiseModel::SpaceTime { amplitude, .. } => amplitude == 0.0,
        }
    }

    /// Monotonicity constant `λ_B` used in the step-size restriction. For the
    /// space-time model it must be declared; undeclared falls back to the
    /// linear model's value, 2.
    pub fn lambda_b(&self) -> f64 {
        match *self {
            NoiseModel::None => 0.0,
            NoiseModel::Linear { amplitude } => 2.0 * amplitude * amplitude,
            NoiseModel::SpaceTime { lambda_b, .. } => lambda_b.unwrap_or(2.0),
        }
    }

    /// Largest step size `1 / (2 (1 + λ_B))` for which the a priori bounds hold.
    pub fn max_step(&self) -> f64 {
        1.0 / (2.0 * (1.0 + self.lambda_b()))
    }
}

/// `((σ^r(u_prev) Δ W, ψ_i))_i` for one step.
///
/// `mass` must be the mass matrix of `asm`'s grid; the linear model reduces to
/// `a Δβ M u_prev` because `(u_h, ψ_i) = (M c)_i`.
pub fn noise_load(
    model: &NoiseModel,
    asm: &Assembler,
    mass: &SparseSymMatrix,
    prev: &BasisCoefficients,
    increments: &[f64],
) -> Result<Vec<f64>> {
    let g = *asm.grid();
    let n = g.num_cells();
    let expected = model.modes(n);
    if increments.len() != expected {
        return Err(Error::DimensionMismatch { expected, found: increments.len() });
    }
    match *model {
        NoiseModel::None => Ok(vec![0.0; n]),
        NoiseModel::Linear { amplitude } => {
            let mut out = mass.matvec(prev.values());
            let f = amplitude * increments[0];
            out.iter_mut().for_each(|v| *v *= f);
            Ok(out)
        }
        NoiseModel::SpaceTime { amplitude, .. } => {
            let mut out = vec![0.0; n];
            let vol = g.cell_volume();
            let basis = asm.basis();
            for (flat, &db) in increments.iter().enumerate() {
                if db == 0.0 {
                    continue;
                }
                let cell = g.unflatten(flat);
                let f = amplitude * db / vol;
                asm.for_each_point(cell, [&[], &[]], |s, _, w| {
                    let u = eval_local(basis, prev.values(), cell, s);
                    if u != 0.0 {
                        basis.for_each_local(cell, s, |j, _, psi| out[j] += f * w * u * psi);
                    }
                });
            }
            Ok(out)
        }
    }
}
