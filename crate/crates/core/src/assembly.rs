//! Matrices and load vectors of the very-weak formulation.
//!
//! * mass matrix `m_ij = (φ_j, ψ_i)`, integrated exactly from the polynomial
//!   pieces and the tensor structure of the basis;
//! * nonlinear operator `K(u)_i = (α(u_h), φ_i)` and its Jacobian, by tensor
//!   Gauss–Legendre quadrature per cell;
//! * `ψ`-weighted loads `(w, ψ_i)` for right-hand sides and projections.

use alloc::vec;
use alloc::vec::Vec;

use crate::basis::{eval_local, quad_product_integral, Basis, BasisCoefficients};
use crate::grid::{Grid, MultiIndex, MAX_DIM};
use crate::math;
use crate::quadrature::QuadratureRule;
use crate::sparse::SparseSymMatrix;

/// Regularization of `α'` near zero for fast diffusion (`p < 2`).
pub const FAST_DIFFUSION_DELTA: f64 = 1e-12;

/// A pointwise-evaluable function on the domain. Implementors with jumps
/// along coordinate lines can report them through [`Field::breakpoints`];
/// cells are then split there before quadrature.
pub trait Field {
    fn value(&self, x: &[f64]) -> f64;

    /// Coordinates along `axis` where the field is not smooth.
    fn breakpoints(&self, _axis: usize) -> &[f64] {
        &[]
    }
}

impl<F: Fn(&[f64]) -> f64> Field for F {
    fn value(&self, x: &[f64]) -> f64 {
        self(x)
    }
}

/// Indicator function of the box `Π (lo_k, hi_k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxIndicator {
    bounds: [[f64; 2]; MAX_DIM],
    dim: usize,
}

impl BoxIndicator {
    pub fn new(lo: &[f64], hi: &[f64]) -> Self {
        assert_eq!(lo.len(), hi.len());
        let mut bounds = [[0.0; 2]; MAX_DIM];
        for k in 0..lo.len() {
            bounds[k] = [lo[k], hi[k]];
        }
        Self { bounds, dim: lo.len() }
    }

    /// The cube `(-a, a)^d`.
    pub fn centered_cube(a: f64, dim: usize) -> Self {
        Self::new(&[-a; MAX_DIM][..dim], &[a; MAX_DIM][..dim])
    }
}

impl Field for BoxIndicator {
    fn value(&self, x: &[f64]) -> f64 {
        let inside = x.iter().zip(&self.bounds[..self.dim]).all(|(&xk, b)| xk > b[0] && xk < b[1]);
        if inside {
            1.0
        } else {
            0.0
        }
    }

    fn breakpoints(&self, axis: usize) -> &[f64] {
        &self.bounds[axis]
    }
}

/// Per-grid assembly context.
#[derive(Debug, Clone)]
pub struct Assembler {
    grid: Grid,
    basis: Basis,
    rule: QuadratureRule,
    /// `(s, w)` for the rule scaled to one cell width
    points: Vec<(f64, f64)>,
}

impl Assembler {
    pub fn new(grid: &Grid, rule: QuadratureRule) -> Self {
        let h = grid.h();
        let points = rule.nodes().iter().zip(rule.weights()).map(|(&t, &w)| (t * h, w * h)).collect();
        Self { grid: *grid, basis: Basis::new(grid), rule, points }
    }

    #[inline]
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    #[inline]
    pub fn basis(&self) -> &Basis {
        &self.basis
    }

    #[inline]
    pub fn rule(&self) -> &QuadratureRule {
        &self.rule
    }

    /// Calls `f(s, x, w)` for every quadrature point of `cell` (local
    /// offsets `s`, global coordinates `x`, weight `w`). Cells are split at
    /// the given breakpoints first.
    pub(crate) fn for_each_point(
        &self,
        cell: MultiIndex,
        breaks: [&[f64]; MAX_DIM],
        mut f: impl FnMut(&[f64], &[f64], f64),
    ) {
        let d = self.grid.dim();
        let mut axes: [Vec<(f64, f64)>; MAX_DIM] = [Vec::new(), Vec::new()];
        for axis in 0..d {
            let k = cell.get(axis);
            let lo = self.grid.node(k);
            let hi = self.grid.node(k + 1);
            let inner = breaks[axis].iter().copied().filter(|&b| b > lo && b < hi);
            if breaks[axis].is_empty() || inner.clone().next().is_none() {
                axes[axis] = self.points.clone();
                continue;
            }
            let mut cuts: Vec<f64> = core::iter::once(lo).chain(inner).chain(core::iter::once(hi)).collect();
            cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
            for w in cuts.windows(2) {
                let len = w[1] - w[0];
                for (&t, &wt) in self.rule.nodes().iter().zip(self.rule.weights()) {
                    axes[axis].push((w[0] - lo + t * len, wt * len));
                }
            }
        }
        let mut s = [0.0; MAX_DIM];
        let mut x = [0.0; MAX_DIM];
        if d == 1 {
            let lo = self.grid.node(cell.get(0));
            for &(s0, w0) in &axes[0] {
                s[0] = s0;
                x[0] = lo + s0;
                f(&s[..1], &x[..1], w0);
            }
        } else {
            let lo0 = self.grid.node(cell.get(0));
            let lo1 = self.grid.node(cell.get(1));
            for &(s1, w1) in &axes[1] {
                for &(s0, w0) in &axes[0] {
                    s[0] = s0;
                    s[1] = s1;
                    x[0] = lo0 + s0;
                    x[1] = lo1 + s1;
                    f(&s, &x, w0 * w1);
                }
            }
        }
    }

    fn no_breaks() -> [&'static [f64]; MAX_DIM] {
        [&[], &[]]
    }

    /// Sparsity pattern shared by the mass matrix and the Jacobian:
    /// `|i_k - j_k| ≤ 2` in every direction, i.e. at most `5^d` entries per row.
    pub fn pattern(&self) -> SparseSymMatrix {
        let g = &self.grid;
        let n = g.num_cells();
        let mut rows = Vec::with_capacity(n);
        for flat in 0..n {
            let i = g.unflatten(flat);
            let mut row = Vec::with_capacity(25);
            match g.dim() {
                1 => row.extend(g.clipped_range(i.get(0), 2)),
                _ => {
                    for j2 in g.clipped_range(i.get(1), 2) {
                        for j1 in g.clipped_range(i.get(0), 2) {
                            row.push(g.flatten(MultiIndex::new(&[j1, j2])));
                        }
                    }
                }
            }
            rows.push(row);
        }
        SparseSymMatrix::from_pattern(rows)
    }

    /// The three 1D integral tables `(M1, P1, G1)` with
    /// `M1[i][j] = (φ_j, ψ_i)`, `P1[i][j] = (ψ_i, ψ_j)`, `G1[i][j] = (φ_i, φ_j)`,
    /// stored as `5`-wide bands indexed by `j - i + 2`.
    fn one_d_tables(&self) -> [Vec<[f64; 5]>; 3] {
        let b = self.basis.one_d();
        let j = b.len();
        let h = b.h();
        let mut m1 = vec![[0.0; 5]; j];
        let mut p1 = vec![[0.0; 5]; j];
        let mut g1 = vec![[0.0; 5]; j];
        for i in 0..j {
            for jj in self.grid.clipped_range(i, 2) {
                let slot = jj + 2 - i;
                let mut m = 0.0;
                let mut p = 0.0;
                let mut gg = 0.0;
                for cell in b.support(i) {
                    let pi = b.piece(i, cell);
                    let pj = b.piece(jj, cell);
                    m += pj.phi * pi.psi_integral(h);
                    p += quad_product_integral(&pi.psi, &pj.psi, h);
                    gg += h * pi.phi * pj.phi;
                }
                m1[i][slot] = m;
                p1[i][slot] = p;
                g1[i][slot] = gg;
            }
        }
        [m1, p1, g1]
    }

    fn tensor_fill(&self, mut entry: impl FnMut([usize; 2], [usize; 2], [usize; 2]) -> f64) -> SparseSymMatrix {
        let mut a = self.pattern();
        let g = self.grid;
        for flat in 0..g.num_cells() {
            let i = g.unflatten(flat);
            let (cols, _) = a.row(flat);
            let cols: Vec<usize> = cols.to_vec();
            for col in cols {
                let jm = g.unflatten(col);
                let (mut ii, mut jj, mut slot) = ([0; 2], [0; 2], [0; 2]);
                for axis in 0..g.dim() {
                    ii[axis] = i.get(axis);
                    jj[axis] = jm.get(axis);
                    slot[axis] = jj[axis] + 2 - ii[axis];
                }
                let v = entry(ii, jj, slot);
                a.add_at(flat, col, v);
            }
        }
        a
    }

    /// H⁻¹ mass matrix `m_ij = (φ_j, ψ_i)_{L²}`, exact.
    pub fn mass_matrix(&self) -> SparseSymMatrix {
        let [m1, p1, _] = self.one_d_tables();
        let c = self.basis.scale();
        match self.grid.dim() {
            1 => self.tensor_fill(|i, _, s| m1[i[0]][s[0]]),
            _ => self.tensor_fill(|i, _, s| {
                c * c * (m1[i[0]][s[0]] * p1[i[1]][s[1]] + p1[i[0]][s[0]] * m1[i[1]][s[1]])
            }),
        }
    }

    /// L² Gram matrix `(φ_i, φ_j)`, exact. This is the Jacobian of the
    /// nonlinear term for `p = 2`.
    pub fn l2_gram(&self) -> SparseSymMatrix {
        let [m1, p1, g1] = self.one_d_tables();
        let c = self.basis.scale();
        match self.grid.dim() {
            1 => self.tensor_fill(|i, _, s| g1[i[0]][s[0]]),
            _ => self.tensor_fill(|i, j, s| {
                // M1[j][i] = M1[i][j] by symmetry of the H⁻¹ pairing
                let t = [4 - s[0], 4 - s[1]];
                c * c
                    * (g1[i[0]][s[0]] * p1[i[1]][s[1]]
                        + m1[j[0]][t[0]] * m1[i[1]][s[1]]
                        + m1[i[0]][s[0]] * m1[j[1]][t[1]]
                        + p1[i[0]][s[0]] * g1[i[1]][s[1]])
            }),
        }
    }

    /// `K(c)_i = ∫ α(u_h) φ_i` with `α(z) = |z|^{p-2} z`.
    pub fn nonlinear_term(&self, c: &BasisCoefficients, p: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.grid.num_cells()];
        self.nonlinear_pass(c.values(), p, Some(&mut out), None);
        out
    }

    /// `∂K_i/∂c_j = ∫ α'(u_h) φ_j φ_i`, positive semidefinite.
    pub fn nonlinear_jacobian(&self, c: &BasisCoefficients, p: f64) -> SparseSymMatrix {
        let mut jac = self.pattern();
        self.nonlinear_pass(c.values(), p, None, Some(&mut jac));
        jac
    }

    /// Residual contribution and Jacobian in one sweep. `jac` must carry
    /// [`Assembler::pattern`]; it is overwritten.
    pub fn nonlinear_system(&self, c: &[f64], p: f64, k: &mut [f64], jac: &mut SparseSymMatrix) {
        jac.values_mut().iter_mut().for_each(|v| *v = 0.0);
        self.nonlinear_pass(c, p, Some(k), Some(jac));
    }

    fn nonlinear_pass(
        &self,
        c: &[f64],
        p: f64,
        mut k: Option<&mut [f64]>,
        mut jac: Option<&mut SparseSymMatrix>,
    ) {
        if let Some(k) = k.as_deref_mut() {
            k.iter_mut().for_each(|v| *v = 0.0);
        }
        let g = self.grid;
        let d = g.dim();
        let jn = g.cells_per_dir();
        let b1 = self.basis.one_d();
        let scale = self.basis.scale();
        let nq = self.points.len();
        // 1D basis values per quadrature node, per axis
        let mut tabs: [Vec<[(f64, f64); 3]>; MAX_DIM] = [vec![[(0.0, 0.0); 3]; nq], vec![[(0.0, 0.0); 3]; nq]];
        let mut idx = [0usize; 9];
        let mut phis = [0.0f64; 9];
        let mut local_res = [0.0f64; 9];
        let mut local_jac = [0.0f64; 81];
        let mut row = [0.0f64; 9];
        for flat in 0..g.num_cells() {
            let cell = g.unflatten(flat);
            let mut present = [[false; 3]; MAX_DIM];
            for axis in 0..d {
                for (qi, &(s, _)) in self.points.iter().enumerate() {
                    for (o, e) in b1.local(cell.get(axis), s).into_iter().enumerate() {
                        if let Some((_, phi, psi)) = e {
                            tabs[axis][qi][o] = (phi, psi);
                            present[axis][o] = true;
                        }
                    }
                }
            }
            let mut m = 0;
            if d == 1 {
                for o in 0..3 {
                    if present[0][o] {
                        idx[m] = cell.get(0) + o - 1;
                        m += 1;
                    }
                }
            } else {
                for o2 in 0..3 {
                    for o1 in 0..3 {
                        if present[0][o1] && present[1][o2] {
                            idx[m] = (cell.get(0) + o1 - 1) + jn * (cell.get(1) + o2 - 1);
                            m += 1;
                        }
                    }
                }
            }
            local_res[..m].iter_mut().for_each(|v| *v = 0.0);
            local_jac.iter_mut().for_each(|v| *v = 0.0);
            let mut any = false;
            let outer = if d == 1 { 1 } else { nq };
            for q1 in 0..outer {
                for q0 in 0..nq {
                    let mut w = self.points[q0].1;
                    let mut r = 0;
                    if d == 1 {
                        for o in 0..3 {
                            if present[0][o] {
                                phis[r] = tabs[0][q0][o].0;
                                r += 1;
                            }
                        }
                    } else {
                        w *= self.points[q1].1;
                        for o2 in 0..3 {
                            if !present[1][o2] {
                                continue;
                            }
                            let (phi2, psi2) = tabs[1][q1][o2];
                            for o1 in 0..3 {
                                if present[0][o1] {
                                    let (phi1, psi1) = tabs[0][q0][o1];
                                    phis[r] = scale * (phi1 * psi2 + psi1 * phi2);
                                    r += 1;
                                }
                            }
                        }
                    }
                    let u: f64 = (0..m).map(|r| c[idx[r]] * phis[r]).sum();
                    if u == 0.0 && p > 2.0 {
                        continue;
                    }
                    any = true;
                    let a = math::alpha(u, p) * w;
                    for r in 0..m {
                        local_res[r] += a * phis[r];
                    }
                    if jac.is_some() {
                        let da = math::alpha_prime(u, p, FAST_DIFFUSION_DELTA) * w;
                        for r in 0..m {
                            let f = da * phis[r];
                            for q in r..m {
                                local_jac[r * 9 + q] += f * phis[q];
                            }
                        }
                    }
                }
            }
            if !any {
                continue;
            }
            if let Some(k) = k.as_deref_mut() {
                for r in 0..m {
                    k[idx[r]] += local_res[r];
                }
            }
            if let Some(jac) = jac.as_deref_mut() {
                for r in 0..m {
                    for q in 0..m {
                        row[q] = if q >= r { local_jac[r * 9 + q] } else { local_jac[q * 9 + r] };
                    }
                    jac.add_row_sorted(idx[r], &idx[..m], &row[..m]);
                }
            }
        }
    }

    /// `(w, ψ_i)_{L²}` for every basis index.
    pub fn psi_load(&self, w: &impl Field) -> Vec<f64> {
        let g = self.grid;
        let mut out = vec![0.0; g.num_cells()];
        let breaks = [w.breakpoints(0), if g.dim() > 1 { w.breakpoints(1) } else { &[] }];
        for flat in 0..g.num_cells() {
            let cell = g.unflatten(flat);
            self.for_each_point(cell, breaks, |s, x, wt| {
                let v = w.value(x);
                if v == 0.0 {
                    return;
                }
                self.basis.for_each_local(cell, s, |j, _, psi| out[j] += wt * v * psi);
            });
        }
        out
    }

    /// `∫_D u_h`.
    pub fn integral(&self, c: &BasisCoefficients) -> f64 {
        let g = self.grid;
        let mut acc = 0.0;
        for flat in 0..g.num_cells() {
            let cell = g.unflatten(flat);
            self.for_each_point(cell, Self::no_breaks(), |s, _, w| {
                acc += w * eval_local(&self.basis, c.values(), cell, s);
            });
        }
        acc
    }

    /// `‖u_h‖_{L^p}^p`.
    pub fn lp_norm_pow(&self, c: &BasisCoefficients, p: f64) -> f64 {
        self.lp_distance_pow(c, &|_: &[f64]| 0.0, p)
    }

    /// `∫_D |u_h - v|^p`.
    pub fn lp_distance_pow(&self, c: &BasisCoefficients, v: &impl Field, p: f64) -> f64 {
        let g = self.grid;
        let breaks = [v.breakpoints(0), if g.dim() > 1 { v.breakpoints(1) } else { &[] }];
        let mut acc = 0.0;
        for flat in 0..g.num_cells() {
            let cell = g.unflatten(flat);
            self.for_each_point(cell, breaks, |s, x, w| {
                let d = (eval_local(&self.basis, c.values(), cell, s) - v.value(x)).abs();
                if d > 0.0 {
                    acc += w * if p == 2.0 { d * d } else { math::powf(d, p) };
                }
            });
        }
        acc
    }
}
