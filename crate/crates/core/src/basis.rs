//! Basis pairs `(φ_i, ψ_i)` with `ψ_i = (-Δ)⁻¹ φ_i` under homogeneous
//! Dirichlet conditions.
//!
//! In one dimension `φ_i` is piecewise constant with values `(-1/2, 1, -1/2)`
//! on the cells `i-1, i, i+1` (`(3/2, -1/2)` and `(-1/2, 3/2)` for the two
//! boundary functions), so that `ψ_i` is a C¹ piecewise quadratic with the
//! same three-cell support. In two dimensions
//!
//! ```text
//! φ_i(x) = c (φ_{i1}(x1) ψ_{i2}(x2) + ψ_{i1}(x1) φ_{i2}(x2)),   c = 3 / (2 h²)
//! ψ_i(x) = c  ψ_{i1}(x1) ψ_{i2}(x2)
//! ```
//!
//! which again satisfies `-Δψ_i = φ_i` and keeps the support on the 3×3 block
//! of cells around `i`.

use alloc::vec;
use alloc::vec::Vec;

use crate::grid::{Grid, MultiIndex, MAX_DIM};
use crate::{Error, Result};

/// One polynomial piece of a 1D basis pair on a single cell, in the local
/// coordinate `s = x - x_left ∈ [0, h]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Piece {
    pub phi: f64,
    /// `ψ(s) = psi[0] + psi[1] s + psi[2] s²`
    pub psi: [f64; 3],
}

impl Piece {
    const ZERO: Piece = Piece { phi: 0.0, psi: [0.0; 3] };

    #[inline]
    pub fn psi_at(&self, s: f64) -> f64 {
        self.psi[0] + s * (self.psi[1] + s * self.psi[2])
    }

    #[inline]
    pub fn psi_slope(&self, s: f64) -> f64 {
        self.psi[1] + 2.0 * s * self.psi[2]
    }

    #[inline]
    pub fn psi_curvature(&self) -> f64 {
        2.0 * self.psi[2]
    }

    /// `∫_0^h ψ(s) ds`
    #[inline]
    pub fn psi_integral(&self, h: f64) -> f64 {
        h * (self.psi[0] + h * (self.psi[1] / 2.0 + h * self.psi[2] / 3.0))
    }
}

/// Exact `∫_0^h` of the product of two quadratics.
pub(crate) fn quad_product_integral(a: &[f64; 3], b: &[f64; 3], h: f64) -> f64 {
    let mut prod = [0.0; 5];
    for (i, ai) in a.iter().enumerate() {
        for (j, bj) in b.iter().enumerate() {
            prod[i + j] += ai * bj;
        }
    }
    let mut acc = 0.0;
    let mut hp = h;
    for (k, c) in prod.iter().enumerate() {
        acc += c * hp / (k + 1) as f64;
        hp *= h;
    }
    acc
}

/// One-dimensional basis on `J` uniform cells.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Basis1D {
    grid: Grid,
}

impl Basis1D {
    pub fn new(grid: &Grid) -> Self {
        Self { grid: Grid::new(grid.half_width(), grid.cells_per_dir(), 1).expect("valid grid") }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.grid.cells_per_dir()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn h(&self) -> f64 {
        self.grid.h()
    }

    /// Cells in the support of basis `i`.
    pub fn support(&self, i: usize) -> core::ops::RangeInclusive<usize> {
        self.grid.clipped_range(i, 1)
    }

    /// Polynomial piece of basis `i` on `cell`; zero outside the support.
    pub fn piece(&self, i: usize, cell: usize) -> Piece {
        let j = self.len();
        let h = self.h();
        let hh = h * h;
        let offset = cell as isize - i as isize;
        match (i, offset) {
            (0, 0) => Piece { phi: 1.5, psi: [0.0, h, -0.75] },
            (0, 1) => Piece { phi: -0.5, psi: [hh / 4.0, -h / 2.0, 0.25] },
            (_, -1) if i == j - 1 => Piece { phi: -0.5, psi: [0.0, 0.0, 0.25] },
            (_, 0) if i == j - 1 => Piece { phi: 1.5, psi: [hh / 4.0, h / 2.0, -0.75] },
            (_, -1) => Piece { phi: -0.5, psi: [0.0, 0.0, 0.25] },
            (_, 0) => Piece { phi: 1.0, psi: [hh / 4.0, h / 2.0, -0.5] },
            (_, 1) if i > 0 && i < j - 1 => Piece { phi: -0.5, psi: [hh / 4.0, -h / 2.0, 0.25] },
            _ => Piece::ZERO,
        }
    }

    fn locate(&self, i: usize, x: f64) -> Result<(Piece, f64)> {
        if i >= self.len() {
            return Err(Error::IndexOutOfRange);
        }
        let cell = self.grid.cell_of_coord(x)?;
        Ok((self.piece(i, cell), x - self.grid.node(cell)))
    }

    pub fn phi(&self, i: usize, x: f64) -> Result<f64> {
        Ok(self.locate(i, x)?.0.phi)
    }

    pub fn psi(&self, i: usize, x: f64) -> Result<f64> {
        let (piece, s) = self.locate(i, x)?;
        Ok(piece.psi_at(s))
    }

    pub fn psi_derivative(&self, i: usize, x: f64) -> Result<f64> {
        let (piece, s) = self.locate(i, x)?;
        Ok(piece.psi_slope(s))
    }

    /// Values `(j, φ_j, ψ_j)` of the three bases `j = cell-1, cell, cell+1`
    /// at local coordinate `s` of `cell`; out-of-range bases are `None`.
    #[inline]
    pub(crate) fn local(&self, cell: usize, s: f64) -> [Option<(usize, f64, f64)>; 3] {
        let mut out = [None; 3];
        for (slot, o) in out.iter_mut().zip(-1isize..=1) {
            let j = cell as isize + o;
            if j >= 0 && (j as usize) < self.len() {
                let p = self.piece(j as usize, cell);
                *slot = Some((j as usize, p.phi, p.psi_at(s)));
            }
        }
        out
    }
}

/// Tensor basis on a `d`-dimensional grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Basis {
    grid: Grid,
    one_d: Basis1D,
    scale: f64,
}

impl Basis {
    pub fn new(grid: &Grid) -> Self {
        Self { grid: *grid, one_d: Basis1D::new(grid), scale: tensor_scale(grid) }
    }

    #[inline]
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    #[inline]
    pub fn one_d(&self) -> &Basis1D {
        &self.one_d
    }

    /// The factor `(3 / (d^{1/(d-1)} h²))^{d-1}`, fixed to 1 for `d = 1`.
    #[inline]
    pub fn scale(&self) -> f64 {
        self.scale
    }

    fn check(&self, i: MultiIndex, x: &[f64]) -> Result<()> {
        if x.len() != self.grid.dim() {
            return Err(Error::DimensionMismatch { expected: self.grid.dim(), found: x.len() });
        }
        if !self.grid.contains_index(i) {
            return Err(Error::IndexOutOfRange);
        }
        Ok(())
    }

    pub fn phi(&self, i: MultiIndex, x: &[f64]) -> Result<f64> {
        self.check(i, x)?;
        let b = &self.one_d;
        if self.grid.dim() == 1 {
            return b.phi(i.get(0), x[0]);
        }
        let (p1, s1) = b.locate(i.get(0), x[0])?;
        let (p2, s2) = b.locate(i.get(1), x[1])?;
        Ok(self.scale * (p1.phi * p2.psi_at(s2) + p1.psi_at(s1) * p2.phi))
    }

    pub fn psi(&self, i: MultiIndex, x: &[f64]) -> Result<f64> {
        self.check(i, x)?;
        let mut acc = self.scale;
        for (axis, &xk) in x.iter().enumerate() {
            acc *= self.one_d.psi(i.get(axis), xk)?;
        }
        Ok(acc)
    }

    /// Values of all bases supported on `cell` at the local point `s`
    /// (offsets from the cell's lower-left node). Calls `f(flat_j, φ_j, ψ_j)`.
    #[inline]
    pub(crate) fn for_each_local(
        &self,
        cell: MultiIndex,
        s: &[f64],
        mut f: impl FnMut(usize, f64, f64),
    ) {
        let b = &self.one_d;
        match self.grid.dim() {
            1 => {
                for (j, phi, psi) in b.local(cell.get(0), s[0]).into_iter().flatten() {
                    f(j, phi, psi);
                }
            }
            _ => {
                let l1 = b.local(cell.get(0), s[0]);
                let l2 = b.local(cell.get(1), s[1]);
                let jn = self.grid.cells_per_dir();
                for (j2, phi2, psi2) in l2.into_iter().flatten() {
                    for (j1, phi1, psi1) in l1.into_iter().flatten() {
                        let phi = self.scale * (phi1 * psi2 + psi1 * phi2);
                        let psi = self.scale * psi1 * psi2;
                        f(j1 + jn * j2, phi, psi);
                    }
                }
            }
        }
    }
}

fn tensor_scale(grid: &Grid) -> f64 {
    match grid.dim() {
        1 => 1.0,
        d => {
            let df = d as f64;
            let c = 3.0 / crate::math::powf(df, 1.0 / (df - 1.0)) / (grid.h() * grid.h());
            crate::math::powi(c, d as i32 - 1)
        }
    }
}

/// Coefficients of `u_h = Σ c_i φ_i`, indexed by flat cell index.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisCoefficients {
    grid: Grid,
    values: Vec<f64>,
}

impl BasisCoefficients {
    pub fn zeros(grid: &Grid) -> Self {
        Self { grid: *grid, values: vec![0.0; grid.num_cells()] }
    }

    pub fn from_vec(grid: &Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.num_cells() {
            return Err(Error::DimensionMismatch { expected: grid.num_cells(), found: values.len() });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("coefficients must be finite"));
        }
        Ok(Self { grid: *grid, values })
    }

    /// Unit coefficient vector for basis `i`.
    pub fn unit(grid: &Grid, i: MultiIndex) -> Self {
        let mut c = Self::zeros(grid);
        c.values[grid.flatten(i)] = 1.0;
        c
    }

    #[inline]
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }

    /// `u_h(x)`, summing only the bases whose support contains `x`.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        let cell = self.grid.cell_of_point(x)?;
        let mut s = [0.0; MAX_DIM];
        for (axis, &xk) in x.iter().enumerate() {
            s[axis] = xk - self.grid.node(cell.get(axis));
        }
        Ok(eval_local(&Basis::new(&self.grid), &self.values, cell, &s[..x.len()]))
    }
}

/// `u_h` at a local point of `cell` given raw coefficients.
#[inline]
pub(crate) fn eval_local(basis: &Basis, coeffs: &[f64], cell: MultiIndex, s: &[f64]) -> f64 {
    let mut acc = 0.0;
    basis.for_each_local(cell, s, |j, phi, _| acc += coeffs[j] * phi);
    acc
}
