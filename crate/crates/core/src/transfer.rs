//! Maps between functions, piecewise constants and the finite element space:
//! cell averages, the 9-point (3-point in 1D) discrete Laplacian, the
//! implementable restriction built from it, and the discrete H⁻¹ projection.

use alloc::vec::Vec;

use crate::assembly::{Assembler, Field};
use crate::basis::BasisCoefficients;
use crate::grid::Grid;
use crate::sparse::{SparseSymMatrix, SymSolver};
use crate::{Error, Result};

/// Element of the piecewise constant space, one value per cell.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseConstField {
    grid: Grid,
    values: Vec<f64>,
}

impl PiecewiseConstField {
    pub fn from_vec(grid: &Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.num_cells() {
            return Err(Error::DimensionMismatch { expected: grid.num_cells(), found: values.len() });
        }
        Ok(Self { grid: *grid, values })
    }

    /// Samples `f` at cell centers.
    pub fn from_centers(grid: &Grid, f: impl Fn(&[f64]) -> f64) -> Self {
        let mut x = [0.0; 2];
        let values = (0..grid.num_cells())
            .map(|i| {
                grid.cell_center(grid.unflatten(i), &mut x);
                f(&x[..grid.dim()])
            })
            .collect();
        Self { grid: *grid, values }
    }

    #[inline]
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `‖·‖_{L^p}` of the piecewise constant function.
    pub fn lp_norm(&self, p: f64) -> f64 {
        let s: f64 = self.values.iter().map(|v| crate::math::powf(v.abs(), p)).sum();
        crate::math::powf(s * self.grid.cell_volume(), 1.0 / p)
    }
}

impl Field for PiecewiseConstField {
    fn value(&self, x: &[f64]) -> f64 {
        self.grid.cell_of_point(x).map_or(0.0, |c| self.values[self.grid.flatten(c)])
    }
}

/// Cell averages `|D_i|⁻¹ ∫_{D_i} v`.
pub fn cell_average(asm: &Assembler, v: &impl Field) -> PiecewiseConstField {
    let g = *asm.grid();
    let breaks = [v.breakpoints(0), if g.dim() > 1 { v.breakpoints(1) } else { &[] }];
    let vol = g.cell_volume();
    let values = (0..g.num_cells())
        .map(|flat| {
            let mut acc = 0.0;
            asm.for_each_point(g.unflatten(flat), breaks, |_, x, w| acc += w * v.value(x));
            acc / vol
        })
        .collect();
    PiecewiseConstField { grid: g, values }
}

/// Cell averages of `u_h`.
pub fn cell_average_of(asm: &Assembler, c: &BasisCoefficients) -> PiecewiseConstField {
    let a = cell_average_matrix(asm.grid());
    PiecewiseConstField { grid: *asm.grid(), values: a.matvec(c.values()) }
}

/// Center weight of the discrete Laplacian, `8/(3h²)` in 2D and `2/h²` in 1D.
fn laplacian_prefactor(grid: &Grid) -> f64 {
    let h2 = grid.h() * grid.h();
    match grid.dim() {
        1 => 2.0 / h2,
        _ => 8.0 / (3.0 * h2),
    }
}

/// Neighbor weight relative to the center: `1/8` (2D) or `1/2` (1D).
fn neighbor_weight(grid: &Grid) -> f64 {
    match grid.dim() {
        1 => 0.5,
        _ => 0.125,
    }
}

/// `-Δ_h f` with the 9-point stencil
/// `(8/(3h²)) [f_i - (1/8) Σ_{k ≠ 0} f_{i+k}]` (3-point `(2/h²)[f_i - (f_{i-1} + f_{i+1})/2]`
/// in 1D). Values outside the domain are taken as zero.
pub fn discrete_laplacian_apply(f: &PiecewiseConstField) -> PiecewiseConstField {
    let g = f.grid;
    let pre = laplacian_prefactor(&g);
    let w = neighbor_weight(&g);
    let values = (0..g.num_cells())
        .map(|flat| {
            let i = g.unflatten(flat);
            let mut acc = 0.0;
            for (j, off) in g.stencil_neighbors(i) {
                let v = f.values[g.flatten(j)];
                acc += if off == [0, 0] { v } else { -w * v };
            }
            pre * acc
        })
        .collect();
    PiecewiseConstField { grid: g, values }
}

/// Matrix of [`discrete_laplacian_apply`].
pub fn discrete_laplacian_matrix(grid: &Grid) -> SparseSymMatrix {
    let pre = laplacian_prefactor(grid);
    let w = neighbor_weight(grid);
    let mut trips = Vec::new();
    for flat in 0..grid.num_cells() {
        for (j, off) in grid.stencil_neighbors(grid.unflatten(flat)) {
            let v = if off == [0, 0] { pre } else { -w * pre };
            trips.push((flat, grid.flatten(j), v));
        }
    }
    SparseSymMatrix::from_triplets(grid.num_cells(), &trips)
}

/// `A[i][j] = |D_i|⁻¹ ∫_{D_i} φ_j`, the cell averages of the basis.
///
/// On interior cells this is exactly the discrete Laplacian stencil scaled by
/// its center weight (`1` on the cell, `-1/8` on each neighbor in 2D). The
/// boundary bases have larger own-cell averages (`9/8` in 2D, `3/2` in 1D).
pub fn cell_average_matrix(grid: &Grid) -> SparseSymMatrix {
    let b = crate::basis::Basis1D::new(grid);
    let h = grid.h();
    let phi_bar = |i: usize, k: usize| b.piece(i, k).phi;
    let psi_bar = |i: usize, k: usize| b.piece(i, k).psi_integral(h) / h;
    let scale = crate::basis::Basis::new(grid).scale();
    let mut trips = Vec::new();
    for flat in 0..grid.num_cells() {
        let cell = grid.unflatten(flat);
        for (j, _) in grid.stencil_neighbors(cell) {
            let v = match grid.dim() {
                1 => phi_bar(j.get(0), cell.get(0)),
                _ => {
                    let (a1, b1) = (phi_bar(j.get(0), cell.get(0)), psi_bar(j.get(0), cell.get(0)));
                    let (a2, b2) = (phi_bar(j.get(1), cell.get(1)), psi_bar(j.get(1), cell.get(1)));
                    scale * (a1 * b2 + b1 * a2)
                }
            };
            trips.push((flat, grid.flatten(j), v));
        }
    }
    SparseSymMatrix::from_triplets(grid.num_cells(), &trips)
}

/// Implementable restriction: the coefficients `ṽ` whose cell averages
/// reproduce `v̄`, i.e. `Σ_j ṽ_j φ̄_j = v̄` on every cell. Away from the
/// boundary this is `-Δ_h((3h²/8) ṽ) = v̄` (2D) or `-Δ_h((h²/2) ṽ) = v̄` (1D).
#[derive(Debug, Clone)]
pub struct TildeRestriction {
    grid: Grid,
    solver: SymSolver,
}

impl TildeRestriction {
    pub fn new(grid: &Grid) -> Result<Self> {
        Ok(Self { grid: *grid, solver: SymSolver::new(&cell_average_matrix(grid))? })
    }

    pub fn apply_averages(&self, averages: &PiecewiseConstField) -> Result<BasisCoefficients> {
        let x = self.solver.solve(averages.values())?;
        BasisCoefficients::from_vec(&self.grid, x)
    }

    pub fn apply(&self, asm: &Assembler, v: &impl Field) -> Result<BasisCoefficients> {
        self.apply_averages(&cell_average(asm, v))
    }
}

/// Discrete H⁻¹ projection: `M c = ((v, ψ_i))_i`.
#[derive(Debug, Clone)]
pub struct Projection {
    grid: Grid,
    mass: SparseSymMatrix,
    solver: SymSolver,
}

impl Projection {
    pub fn new(asm: &Assembler) -> Result<Self> {
        let mass = asm.mass_matrix();
        let solver = SymSolver::new(&mass)?;
        Ok(Self { grid: *asm.grid(), mass, solver })
    }

    pub fn from_parts(grid: &Grid, mass: SparseSymMatrix, solver: SymSolver) -> Self {
        Self { grid: *grid, mass, solver }
    }

    #[inline]
    pub fn mass(&self) -> &SparseSymMatrix {
        &self.mass
    }

    #[inline]
    pub fn solver(&self) -> &SymSolver {
        &self.solver
    }

    pub fn apply(&self, asm: &Assembler, v: &impl Field) -> Result<BasisCoefficients> {
        self.apply_load(&asm.psi_load(v))
    }

    /// Solves with a precomputed right-hand side `((v, ψ_i))_i`.
    pub fn apply_load(&self, load: &[f64]) -> Result<BasisCoefficients> {
        let x = self.solver.solve(load)?;
        BasisCoefficients::from_vec(&self.grid, x)
    }
}

/// Coefficients of the piecewise constant function `v̄` expressed in the
/// basis, exact in 1D where both spaces coincide.
pub fn piecewise_const_to_basis(averages: &PiecewiseConstField) -> Result<BasisCoefficients> {
    TildeRestriction::new(&averages.grid)?.apply_averages(averages)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::MultiIndex;
    use crate::quadrature::QuadratureRule;

    fn asm(j: usize, d: usize) -> Assembler {
        Assembler::new(&Grid::new(1.5, j, d).unwrap(), QuadratureRule::gauss_legendre(4))
    }

    #[test]
    fn averages_of_constants() {
        let a = asm(8, 2);
        let avg = cell_average(&a, &|_: &[f64]| 2.5);
        assert!(avg.values().iter().all(|v| (v - 2.5).abs() < 1e-14));
    }

    #[test]
    fn interior_basis_averages() {
        let g = Grid::new(1.5, 8, 2).unwrap();
        let a = cell_average_matrix(&g);
        let i = g.flatten(MultiIndex::new(&[3, 4]));
        assert!((a.get(i, i) - 1.0).abs() < 1e-14);
        for (j, off) in g.stencil_neighbors(MultiIndex::new(&[3, 4])) {
            if off != [0, 0] {
                assert!((a.get(i, g.flatten(j)) + 0.125).abs() < 1e-14);
            }
        }
        // stencil weights sum to zero on an interior cell
        let (_, vals) = a.row(i);
        assert!(vals.iter().sum::<f64>().abs() < 1e-14);
        // boundary cells carry 9/8 on the diagonal
        let b = g.flatten(MultiIndex::new(&[0, 4]));
        assert!((a.get(b, b) - 9.0 / 8.0).abs() < 1e-14);
        let c = g.flatten(MultiIndex::new(&[0, 0]));
        assert!((a.get(c, c) - 9.0 / 8.0).abs() < 1e-14);
    }

    #[test]
    fn cell_average_matrix_matches_quadrature() {
        for d in [1, 2] {
            let a = asm(6, d);
            let g = *a.grid();
            let m = cell_average_matrix(&g);
            for j in 0..g.num_cells() {
                let jj = g.unflatten(j);
                let avg = cell_average(&a, &|x: &[f64]| a.basis().phi(jj, x).unwrap());
                for i in 0..g.num_cells() {
                    assert!((avg.values()[i] - m.get(i, j)).abs() < 1e-13, "d={d} i={i} j={j}");
                }
            }
        }
    }

    #[test]
    fn laplacian_annihilates_constants_and_reproduces_quadratics() {
        let g = Grid::new(1.5, 16, 2).unwrap();
        let one = PiecewiseConstField::from_centers(&g, |_| 1.0);
        let lap = discrete_laplacian_apply(&one);
        let quad = PiecewiseConstField::from_centers(&g, |x| x[0] * x[0]);
        let lq = discrete_laplacian_apply(&quad);
        for k2 in 1..15 {
            for k1 in 1..15 {
                let i = g.flatten(MultiIndex::new(&[k1, k2]));
                assert!(lap.values()[i].abs() < 1e-10);
                assert!((lq.values()[i] + 2.0).abs() < 1e-9, "{}", lq.values()[i]);
            }
        }
    }

    #[test]
    fn projection_is_identity_on_the_space() {
        for d in [1, 2] {
            let a = asm(8, d);
            let g = *a.grid();
            let c0: Vec<f64> = (0..g.num_cells()).map(|i| ((i * 37 % 11) as f64 - 5.0) / 3.0).collect();
            let c0 = BasisCoefficients::from_vec(&g, c0).unwrap();
            let proj = Projection::new(&a).unwrap();
            let c = proj.apply(&a, &|x: &[f64]| c0.eval(x).unwrap()).unwrap();
            for (u, v) in c.values().iter().zip(c0.values()) {
                assert!((u - v).abs() < 1e-10, "d={d}");
            }
        }
    }

    #[test]
    fn restriction_roundtrip_on_averages() {
        for d in [1, 2] {
            let a = asm(8, d);
            let g = *a.grid();
            let f = |x: &[f64]| libm::exp(-x.iter().map(|v| v * v).sum::<f64>());
            let avg = cell_average(&a, &f);
            let r = TildeRestriction::new(&g).unwrap();
            let c = r.apply_averages(&avg).unwrap();
            let back = cell_average_of(&a, &c);
            for (u, v) in back.values().iter().zip(avg.values()) {
                assert!((u - v).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_inputs_map_to_zero() {
        let a = asm(8, 2);
        let proj = Projection::new(&a).unwrap();
        let c = proj.apply(&a, &|_: &[f64]| 0.0).unwrap();
        assert!(c.values().iter().all(|v| *v == 0.0));
        let r = TildeRestriction::new(a.grid()).unwrap();
        let c = r.apply(&a, &|_: &[f64]| 0.0).unwrap();
        assert!(c.values().iter().all(|v| *v == 0.0));
    }
}
