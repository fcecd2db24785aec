//! Exact and reference solutions plus the error and support metrics used by
//! the experiments.

use alloc::vec::Vec;

use crate::assembly::Assembler;
use crate::basis::{eval_local, BasisCoefficients};
use crate::grid::{Grid, MultiIndex, MAX_DIM};
use crate::math;
use crate::noise::IncrementTable;
use crate::quadrature::QuadratureRule;
use crate::stepper::Trajectory;
use crate::{Error, Result};

/// Default threshold for [`discrete_support`].
pub const SUPPORT_THRESHOLD: f64 = 1e-8;

/// Constants of the Barenblatt solution
/// `u_B(t, x) = t^{-a} max{0, C - k|x|² t^{-2b}}^{1/(p-2)}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarenblattParams {
    pub p: f64,
    pub dim: usize,
    pub a: f64,
    pub b: f64,
    pub k: f64,
    pub c: f64,
    pub mass: f64,
}

impl BarenblattParams {
    /// Constants for `∫ u_B(t, ·) = mass`. `C` comes from a numerically
    /// integrated radial profile.
    pub fn new(p: f64, dim: usize, mass: f64) -> Result<Self> {
        if !(p > 2.0) || !p.is_finite() {
            return Err(Error::InvalidArgument("Barenblatt solution needs p > 2"));
        }
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::InvalidArgument("dimension must be 1 or 2"));
        }
        if !(mass > 0.0) {
            return Err(Error::InvalidArgument("mass must be positive"));
        }
        let d = dim as f64;
        let a = d / (d * (p - 2.0) + 2.0);
        let b = a / d;
        let k = a * (p - 2.0) / (2.0 * d * (p - 1.0));
        let m = 1.0 / (p - 2.0);
        // mass = C^{m+d/2} k^{-d/2} ω_d ∫₀¹ (1-s²)^m s^{d-1} ds
        let omega = if dim == 1 { 2.0 } else { 2.0 * core::f64::consts::PI };
        let profile = radial_profile_integral(m, dim);
        let c = math::powf(mass * math::powf(k, d / 2.0) / (omega * profile), 1.0 / (m + d / 2.0));
        Ok(Self { p, dim, a, b, k, c, mass })
    }

    /// Unit-mass constants.
    pub fn unit(p: f64, dim: usize) -> Result<Self> {
        Self::new(p, dim, 1.0)
    }

    /// `u_B(t, x)`.
    pub fn value(&self, t: f64, x: &[f64]) -> Result<f64> {
        if !(t > 0.0) {
            return Err(Error::InvalidArgument("Barenblatt solution needs t > 0"));
        }
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: x.len() });
        }
        Ok(self.value_unchecked(t, x))
    }

    pub(crate) fn value_unchecked(&self, t: f64, x: &[f64]) -> f64 {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        let bracket = self.c - self.k * r2 * math::powf(t, -2.0 * self.b);
        if bracket <= 0.0 {
            return 0.0;
        }
        let shape = if self.p == 3.0 { bracket } else { math::powf(bracket, 1.0 / (self.p - 2.0)) };
        math::powf(t, -self.a) * shape
    }

    /// Radius of the support at time `t`, `sqrt(C/k) t^b`.
    pub fn support_radius(&self, t: f64) -> f64 {
        math::sqrt(self.c / self.k) * math::powf(t.max(0.0), self.b)
    }
}

/// `∫₀¹ (1-s²)^m s^{d-1} ds` via `s = sin θ`, composite Gauss–Legendre.
fn radial_profile_integral(m: f64, dim: usize) -> f64 {
    let rule = QuadratureRule::gauss_legendre(10);
    let panels = 64;
    let half_pi = core::f64::consts::FRAC_PI_2;
    let width = half_pi / panels as f64;
    (0..panels)
        .map(|i| {
            let lo = i as f64 * width;
            rule.integrate(lo, lo + width, |th| {
                let c = math::cos(th);
                let s = math::sin(th);
                // (1-s²)^m ds = cos^{2m} θ cos θ dθ
                math::powf(c, 2.0 * m + 1.0) * if dim == 1 { 1.0 } else { s }
            })
        })
        .sum()
}

/// Exact solution of the one-dimensional stochastic PME with `p = 3` and
/// linear multiplicative noise `σ(u) = ε u`, along one realized path:
/// `u_B(θ(t), x) e^{εW(t) - ε²t/2}` with `θ(t) = ∫₀ᵗ e^{εW(s) - ε²s/2} ds`.
///
/// The time integral uses the trapezoidal rule on the path's own grid.
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticBarenblatt {
    params: BarenblattParams,
    tau: f64,
    theta: Vec<f64>,
    factor: Vec<f64>,
}

impl StochasticBarenblatt {
    pub fn new(params: BarenblattParams, path: &IncrementTable, amplitude: f64) -> Result<Self> {
        if params.p != 3.0 || params.dim != 1 {
            return Err(Error::InvalidArgument("stochastic Barenblatt transform needs p = 3, d = 1"));
        }
        let tau = path.tau();
        let w = path.cumulative(0);
        let factor: Vec<f64> = w
            .iter()
            .enumerate()
            .map(|(n, &wn)| {
                let t = n as f64 * tau;
                math::exp(amplitude * wn - 0.5 * amplitude * amplitude * t)
            })
            .collect();
        let mut theta = Vec::with_capacity(factor.len());
        theta.push(0.0);
        for n in 1..factor.len() {
            let prev = theta[n - 1];
            theta.push(prev + 0.5 * tau * (factor[n - 1] + factor[n]));
        }
        Ok(Self { params, tau, theta, factor })
    }

    #[inline]
    pub fn params(&self) -> &BarenblattParams {
        &self.params
    }

    #[inline]
    pub fn steps(&self) -> usize {
        self.theta.len() - 1
    }

    #[inline]
    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// `θ(t_n)`.
    #[inline]
    pub fn theta(&self, n: usize) -> f64 {
        self.theta[n]
    }

    /// Value at `(t_n, x)`; requires `n ≥ 1`.
    pub fn value(&self, n: usize, x: &[f64]) -> Result<f64> {
        if n == 0 || n >= self.theta.len() {
            return Err(Error::IndexOutOfRange);
        }
        Ok(self.params.value(self.theta[n], x)? * self.factor[n])
    }

    /// Value at any `t ∈ (0, T]`. Between grid times `W` is interpolated
    /// linearly and `θ` extended by the trapezoidal rule.
    pub fn value_at(&self, t: f64, x: &[f64]) -> Result<f64> {
        let (theta, factor) = self.state_at(t)?;
        Ok(self.params.value(theta, x)? * factor)
    }

    /// `sqrt(C/k) θ(t_n)^{1/3}`.
    pub fn support_radius(&self, n: usize) -> f64 {
        self.params.support_radius(self.theta[n])
    }

    fn state_at(&self, t: f64) -> Result<(f64, f64)> {
        let last = self.steps();
        if !(t > 0.0) || t > self.tau * last as f64 * (1.0 + 1e-12) {
            return Err(Error::InvalidArgument("time outside the path"));
        }
        let n = (math::ceil(t / self.tau - 1e-9) as usize).clamp(1, last);
        let lo = (n - 1) as f64 * self.tau;
        let r = ((t - lo) / self.tau).clamp(0.0, 1.0);
        // log of the factor is affine in t on each step
        let (l0, l1) = (math::ln(self.factor[n - 1]), math::ln(self.factor[n]));
        let factor = math::exp(l0 + r * (l1 - l0));
        let theta = self.theta[n - 1] + 0.5 * r * self.tau * (self.factor[n - 1] + factor);
        Ok((theta, factor))
    }
}

/// Quadrature used to evaluate space-time error norms.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorRules {
    pub space: QuadratureRule,
    pub time: QuadratureRule,
}

impl ErrorRules {
    /// One point per step in time; one point per cell in 1D (where `u_h` is
    /// piecewise constant) and `3^d` Gauss points per cell in 2D.
    pub fn tabulated(dim: usize) -> Self {
        let q = if dim == 1 { 1 } else { 3 };
        Self { space: QuadratureRule::gauss_legendre(q), time: QuadratureRule::gauss_legendre(1) }
    }

    /// `q`-point Gauss rules in space and time.
    pub fn gauss(q: usize) -> Self {
        Self { space: QuadratureRule::gauss_legendre(q), time: QuadratureRule::gauss_legendre(q) }
    }
}

/// Streaming form of [`lp_spacetime_error`]: feed states one step at a time.
#[derive(Debug, Clone)]
pub struct SpacetimeError {
    p: f64,
    t_lo: f64,
    t_hi: f64,
    tau: f64,
    time_rule: QuadratureRule,
    acc: f64,
}

impl SpacetimeError {
    pub fn new(p: f64, t_lo: f64, t_hi: f64, tau: f64, time_rule: QuadratureRule) -> Self {
        Self { p, t_lo, t_hi, tau, time_rule, acc: 0.0 }
    }

    /// Adds the contribution of `uⁿ` on `(t_{n-1}, t_n] ∩ [t_lo, T]`.
    pub fn add_step(&mut self, asm: &Assembler, n: usize, u: &BasisCoefficients, exact: impl Fn(f64, &[f64]) -> f64) {
        if n == 0 {
            return;
        }
        let a = ((n - 1) as f64 * self.tau).max(self.t_lo);
        let b = (n as f64 * self.tau).min(self.t_hi);
        if b <= a {
            return;
        }
        let len = b - a;
        for (&s, &w) in self.time_rule.nodes().iter().zip(self.time_rule.weights()) {
            let t = a + s * len;
            self.acc += w * len * asm.lp_distance_pow(u, &|x: &[f64]| exact(t, x), self.p);
        }
    }

    /// `∫∫ |exact - ū_τ|^p` so far.
    pub fn power_sum(&self) -> f64 {
        self.acc
    }

    pub fn value(&self) -> f64 {
        math::powf(self.acc, 1.0 / self.p)
    }
}

/// `‖exact - ū_τ‖_{L^p((t_lo, T) × D)}` for the right-constant interpolant
/// `ū_τ = uⁿ` on `(t_{n-1}, t_n]`.
///
/// Each step interval clipped to `[t_lo, T]` is integrated with `time_rule`;
/// the spatial integral uses the rule of `asm`.
pub fn lp_spacetime_error(
    asm: &Assembler,
    traj: &Trajectory,
    exact: impl Fn(f64, &[f64]) -> f64,
    p: f64,
    t_lo: f64,
    t_hi: f64,
    time_rule: &QuadratureRule,
) -> f64 {
    let mut err = SpacetimeError::new(p, t_lo, t_hi, traj.tau(), time_rule.clone());
    for n in 1..=traj.steps() {
        err.add_step(asm, n, traj.state(n), &exact);
    }
    err.value()
}

/// Cells on which the mean of `|u_h|` exceeds `eps`, as flat indices.
pub fn discrete_support(asm: &Assembler, c: &BasisCoefficients, eps: f64) -> Vec<usize> {
    let g = *asm.grid();
    let vol = g.cell_volume();
    let mut out = Vec::new();
    for flat in 0..g.num_cells() {
        let cell = g.unflatten(flat);
        let mut acc = 0.0;
        asm.for_each_point(cell, [&[], &[]], |s, _, w| {
            acc += w * eval_local(asm.basis(), c.values(), cell, s).abs();
        });
        if acc / vol > eps {
            out.push(flat);
        }
    }
    out
}

/// Largest distance from the origin to the centre of a support cell.
pub fn support_extent(grid: &Grid, cells: &[usize]) -> f64 {
    let mut x = [0.0; MAX_DIM];
    cells
        .iter()
        .map(|&f| {
            grid.cell_center(grid.unflatten(f), &mut x);
            math::sqrt(x[..grid.dim()].iter().map(|v| v * v).sum())
        })
        .fold(0.0, f64::max)
}

/// Truncated Dirichlet sine series on `(-L, L)^d`, the eigenbasis of `-Δ`:
/// `e_k(x) = Π sin(k_j π (x_j + L) / (2L))`, `λ_k = Σ (k_j π / (2L))²`.
#[derive(Debug, Clone, PartialEq)]
pub struct SineSeries {
    half_width: f64,
    dim: usize,
    modes: Vec<([usize; MAX_DIM], f64)>,
}

impl SineSeries {
    pub fn new(half_width: f64, dim: usize) -> Self {
        Self { half_width, dim, modes: Vec::new() }
    }

    /// Adds `coeff · e_k`; mode numbers start at 1.
    pub fn with_mode(mut self, k: &[usize], coeff: f64) -> Self {
        assert_eq!(k.len(), self.dim, "mode dimension");
        assert!(k.iter().all(|&v| v >= 1), "sine modes start at 1");
        let mut key = [1; MAX_DIM];
        key[..k.len()].copy_from_slice(k);
        self.modes.push((key, coeff));
        self
    }

    pub fn eigenvalue(&self, k: &[usize]) -> f64 {
        let w = core::f64::consts::PI / (2.0 * self.half_width);
        k.iter().take(self.dim).map(|&v| (v as f64 * w) * (v as f64 * w)).sum()
    }

    pub fn eigenfunction(&self, k: &[usize], x: &[f64]) -> f64 {
        let w = core::f64::consts::PI / (2.0 * self.half_width);
        (0..self.dim).map(|j| math::sin(k[j] as f64 * w * (x[j] + self.half_width))).product()
    }

    /// Heat semigroup `Σ a_k e^{-λ_k t} e_k(x)`.
    pub fn heat(&self, t: f64, x: &[f64]) -> f64 {
        self.evolve(x, |lam| math::exp(-lam * t))
    }

    /// Implicit Euler in time, exact in space: `Σ a_k (1 + τλ_k)^{-n} e_k(x)`.
    pub fn heat_implicit_euler(&self, tau: f64, n: usize, x: &[f64]) -> f64 {
        self.evolve(x, |lam| math::powi(1.0 / (1.0 + tau * lam), n as i32))
    }

    fn evolve(&self, x: &[f64], decay: impl Fn(f64) -> f64) -> f64 {
        self.modes
            .iter()
            .map(|(k, a)| {
                let k = &k[..self.dim];
                a * decay(self.eigenvalue(k)) * self.eigenfunction(k, x)
            })
            .sum()
    }
}

/// Component-wise centre of a grid cell as a fixed array.
pub fn cell_center(grid: &Grid, cell: MultiIndex) -> [f64; MAX_DIM] {
    let mut x = [0.0; MAX_DIM];
    grid.cell_center(cell, &mut x);
    x
}
