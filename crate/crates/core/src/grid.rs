//! Uniform tensor partition of `D = (-L, L)^d` into `J^d` half-open cells.
//!
//! Cell and basis indices are 0-based: cell `k` in one direction is the
//! interval `(x_k, x_{k+1}]` with nodes `x_k = -L + k h`. The point `-L` is
//! assigned to cell 0 so that every point of the closed domain has a cell.
//! Flat indices are row-major with the first component fastest.

use alloc::vec::Vec;

use crate::math;
use crate::{Error, Result};

/// Largest supported spatial dimension.
pub const MAX_DIM: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MultiIndex {
    comps: [usize; MAX_DIM],
    dim: usize,
}

impl MultiIndex {
    pub fn new(comps: &[usize]) -> Self {
        assert!(!comps.is_empty() && comps.len() <= MAX_DIM);
        let mut c = [0; MAX_DIM];
        c[..comps.len()].copy_from_slice(comps);
        Self { comps: c, dim: comps.len() }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn components(&self) -> &[usize] {
        &self.comps[..self.dim]
    }

    #[inline]
    pub fn get(&self, axis: usize) -> usize {
        self.comps[axis]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    half_width: f64,
    cells: usize,
    dim: usize,
    h: f64,
}

impl Grid {
    /// Builds the partition of `(-half_width, half_width)^dim` with `cells`
    /// cells per direction. At least four cells are needed so that the
    /// boundary and interior basis shapes are all distinct.
    pub fn new(half_width: f64, cells: usize, dim: usize) -> Result<Self> {
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(Error::InvalidArgument("half width must be positive"));
        }
        if cells < 4 {
            return Err(Error::InvalidArgument("need at least 4 cells per direction"));
        }
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::InvalidArgument("dimension must be 1 or 2"));
        }
        Ok(Self { half_width, cells, dim, h: 2.0 * half_width / cells as f64 })
    }

    #[inline]
    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    /// Cells per direction, `J`.
    #[inline]
    pub fn cells_per_dir(&self) -> usize {
        self.cells
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn h(&self) -> f64 {
        self.h
    }

    /// Total number of cells (and basis functions), `J^d`.
    #[inline]
    pub fn num_cells(&self) -> usize {
        math::powi(self.cells as f64, self.dim as i32) as usize
    }

    #[inline]
    pub fn cell_volume(&self) -> f64 {
        math::powi(self.h, self.dim as i32)
    }

    /// Measure of the whole domain, `(2L)^d`.
    #[inline]
    pub fn domain_volume(&self) -> f64 {
        math::powi(2.0 * self.half_width, self.dim as i32)
    }

    /// Node coordinate `x_k = -L + k h` for `k = 0..=J`; the last node is `L` exactly.
    #[inline]
    pub fn node(&self, k: usize) -> f64 {
        if k == self.cells {
            self.half_width
        } else {
            -self.half_width + k as f64 * self.h
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.cells).map(|k| self.node(k)).collect()
    }

    #[inline]
    pub fn cell_center_1d(&self, k: usize) -> f64 {
        self.node(k) + 0.5 * self.h
    }

    /// Writes the center of the cell into `out[..dim]`.
    pub fn cell_center(&self, cell: MultiIndex, out: &mut [f64]) {
        for (axis, x) in out.iter_mut().enumerate().take(self.dim) {
            *x = self.cell_center_1d(cell.get(axis));
        }
    }

    #[inline]
    pub fn flatten(&self, idx: MultiIndex) -> usize {
        match self.dim {
            1 => idx.get(0),
            _ => idx.get(0) + self.cells * idx.get(1),
        }
    }

    #[inline]
    pub fn unflatten(&self, flat: usize) -> MultiIndex {
        match self.dim {
            1 => MultiIndex::new(&[flat]),
            _ => MultiIndex::new(&[flat % self.cells, flat / self.cells]),
        }
    }

    pub fn contains_index(&self, idx: MultiIndex) -> bool {
        idx.dim() == self.dim && idx.components().iter().all(|&c| c < self.cells)
    }

    /// Cell of a single coordinate under the half-open convention.
    pub fn cell_of_coord(&self, x: f64) -> Result<usize> {
        let l = self.half_width;
        if !(x >= -l && x <= l) {
            return Err(Error::OutOfDomain);
        }
        if x == -l {
            return Ok(0);
        }
        let mut k = math::ceil((x + l) / self.h) as usize;
        k = k.clamp(1, self.cells);
        // rounding in (x + L) / h can land one cell off near a node
        while k > 1 && x <= self.node(k - 1) {
            k -= 1;
        }
        while k < self.cells && x > self.node(k) {
            k += 1;
        }
        Ok(k - 1)
    }

    pub fn cell_of_point(&self, x: &[f64]) -> Result<MultiIndex> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: x.len() });
        }
        let mut comps = [0; MAX_DIM];
        for (axis, &xk) in x.iter().enumerate() {
            comps[axis] = self.cell_of_coord(xk)?;
        }
        Ok(MultiIndex::new(&comps[..self.dim]))
    }

    /// Cells whose closure meets the closure of `idx`, paired with their
    /// offsets in `{-1, 0, 1}^d`. Interior cells have `3^d` neighbors,
    /// including themselves.
    pub fn stencil_neighbors(&self, idx: MultiIndex) -> Vec<(MultiIndex, [i8; MAX_DIM])> {
        let mut out = Vec::with_capacity(9);
        let j = self.cells as isize;
        match self.dim {
            1 => {
                for o in -1..=1isize {
                    let c = idx.get(0) as isize + o;
                    if (0..j).contains(&c) {
                        out.push((MultiIndex::new(&[c as usize]), [o as i8, 0]));
                    }
                }
            }
            _ => {
                for o2 in -1..=1isize {
                    for o1 in -1..=1isize {
                        let c1 = idx.get(0) as isize + o1;
                        let c2 = idx.get(1) as isize + o2;
                        if (0..j).contains(&c1) && (0..j).contains(&c2) {
                            out.push((
                                MultiIndex::new(&[c1 as usize, c2 as usize]),
                                [o1 as i8, o2 as i8],
                            ));
                        }
                    }
                }
            }
        }
        out
    }

    /// Range of cells `k - reach ..= k + reach` clipped to the grid, per direction.
    #[inline]
    pub(crate) fn clipped_range(&self, k: usize, reach: usize) -> core::ops::RangeInclusive<usize> {
        k.saturating_sub(reach)..=(k + reach).min(self.cells - 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn one_dimensional_nodes() {
        let g = Grid::new(1.5, 8, 1).unwrap();
        assert_eq!(g.h(), 0.375);
        let expected = [-1.5, -1.125, -0.75, -0.375, 0.0, 0.375, 0.75, 1.125, 1.5];
        assert_eq!(g.nodes(), expected);
        assert_eq!(g.h() * 8.0, 3.0);
    }

    #[test]
    fn two_dimensional_cells() {
        let g = Grid::new(1.0, 4, 2).unwrap();
        assert_eq!(g.num_cells(), 16);
        // 1-based cell (1,1) is index (0,0) here: (-1,-0.5] x (-1,-0.5]
        assert_eq!(g.cell_of_point(&[-0.5, -0.5]).unwrap(), MultiIndex::new(&[0, 0]));
        assert_eq!(g.cell_of_point(&[-0.99, -0.51]).unwrap(), MultiIndex::new(&[0, 0]));
        assert_eq!(g.cell_of_point(&[-0.49, -0.5]).unwrap(), MultiIndex::new(&[1, 0]));
        assert_eq!(g.cell_volume(), 0.25);
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(Grid::new(1.5, 3, 1).is_err());
        assert!(Grid::new(0.0, 8, 1).is_err());
        assert!(Grid::new(-1.0, 8, 1).is_err());
        assert!(Grid::new(1.0, 8, 3).is_err());
        assert!(Grid::new(1.0, 8, 0).is_err());
    }

    #[test]
    fn point_location() {
        let g = Grid::new(1.5, 8, 1).unwrap();
        assert_eq!(g.cell_of_coord(-1.4).unwrap(), 0);
        assert_eq!(g.cell_of_coord(-1.5).unwrap(), 0);
        // a node belongs to the cell it closes
        for k in 1..=8 {
            assert_eq!(g.cell_of_coord(g.node(k)).unwrap(), k - 1);
        }
        assert_eq!(g.cell_of_coord(1.6), Err(Error::OutOfDomain));
        assert_eq!(g.cell_of_coord(f64::NAN), Err(Error::OutOfDomain));
    }

    #[test]
    fn neighbor_counts() {
        let g = Grid::new(1.0, 8, 2).unwrap();
        assert_eq!(g.stencil_neighbors(MultiIndex::new(&[3, 4])).len(), 9);
        assert_eq!(g.stencil_neighbors(MultiIndex::new(&[0, 0])).len(), 4);
        assert_eq!(g.stencil_neighbors(MultiIndex::new(&[0, 4])).len(), 6);
        let g1 = Grid::new(1.0, 8, 1).unwrap();
        assert_eq!(g1.stencil_neighbors(MultiIndex::new(&[3])).len(), 3);
        assert_eq!(g1.stencil_neighbors(MultiIndex::new(&[7])).len(), 2);
    }

    proptest! {
        #[test]
        fn located_cell_contains_point(x in -1.5f64..=1.5, y in -1.5f64..=1.5, j in 4usize..40) {
            let g = Grid::new(1.5, j, 2).unwrap();
            let idx = g.cell_of_point(&[x, y]).unwrap();
            prop_assert!(g.contains_index(idx));
            for (axis, &xk) in [x, y].iter().enumerate() {
                let k = idx.get(axis);
                let lo = g.node(k);
                let hi = g.node(k + 1);
                prop_assert!((xk > lo || (k == 0 && xk == lo)) && xk <= hi);
            }
        }

        #[test]
        fn flatten_roundtrip(flat in 0usize..1024) {
            let g = Grid::new(1.0, 32, 2).unwrap();
            prop_assert_eq!(g.flatten(g.unflatten(flat)), flat);
        }

        #[test]
        fn neighbor_relation_is_symmetric(a in 0usize..64, j in 4usize..9) {
            let g = Grid::new(1.0, j, 2).unwrap();
            let i = g.unflatten(a % g.num_cells());
            for (n, _) in g.stencil_neighbors(i) {
                prop_assert!(g.stencil_neighbors(n).iter().any(|(m, _)| *m == i));
            }
        }
    }
}
