//! The distributed matrix: one worker's block of a global raster, framed by a
//! halo of `ghost` cells on every side.
//!
//! Local indices are signed. Interior cells are `0..nx` x `0..ny`; the halo
//! runs from `-ghost` to `nx + ghost - 1` (resp. `ny`). Storage is row-major
//! with `j` (the y index) as the row.

use std::sync::OnceLock;

use crate::topology::BlockLayout;

/// Environment variable that turns on out-of-halo access checks.
pub const HALO_CHECK_ENV: &str = "OVERLAND_HALO_CHECK";

fn halo_check_from_env() -> bool {
    static FLAG: OnceLock<bool> = OnceLock::new();
    *FLAG.get_or_init(|| {
        std::env::var(HALO_CHECK_ENV)
            .map(|v| !v.is_empty() && v != "0")
            .unwrap_or(false)
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DMatrix<T> {
    layout: BlockLayout,
    stride: usize,
    data: Vec<T>,
    halo_valid: usize,
    checked: bool,
}

/// The 8-neighborhood enumeration order: E, SE, S, SW, W, NW, N, NE.
pub const NEIGHBOR_OFFSETS: [(isize, isize); 8] = [
    (1, 0),
    (1, -1),
    (0, -1),
    (-1, -1),
    (-1, 0),
    (-1, 1),
    (0, 1),
    (1, 1),
];

impl<T: Copy> DMatrix<T> {
    pub fn new(layout: &BlockLayout, fill: T) -> Self {
        let g = layout.ghost;
        let stride = layout.nx() + 2 * g;
        let rows = layout.ny() + 2 * g;
        Self {
            layout: layout.clone(),
            stride,
            data: vec![fill; stride * rows],
            halo_valid: 0,
            checked: halo_check_from_env(),
        }
    }

    /// Builds the block by evaluating `f` at the global index of every
    /// interior cell; the halo is left at `fill`.
    pub fn from_fn(layout: &BlockLayout, fill: T, f: impl Fn(usize, usize) -> T) -> Self {
        let mut m = Self::new(layout, fill);
        let (ox, oy) = layout.origin;
        for j in 0..layout.ny() {
            for i in 0..layout.nx() {
                let k = m.offset(i as isize, j as isize);
                m.data[k] = f(ox + i, oy + j);
            }
        }
        m
    }

    /// Copies this block's window out of a global row-major raster.
    pub fn from_global(layout: &BlockLayout, fill: T, global: &[T]) -> Self {
        let (gnx, gny) = layout.global;
        assert_eq!(global.len(), gnx * gny, "global raster has wrong length");
        Self::from_fn(layout, fill, |gi, gj| global[gj * gnx + gi])
    }

    pub fn layout(&self) -> &BlockLayout {
        &self.layout
    }

    pub fn nx(&self) -> usize {
        self.layout.nx()
    }

    pub fn ny(&self) -> usize {
        self.layout.ny()
    }

    pub fn ghost(&self) -> usize {
        self.layout.ghost
    }

    /// Distance between vertically adjacent cells in the backing slice.
    pub fn stride(&self) -> usize {
        self.stride
    }

    /// Width of the halo ring currently known to match neighboring blocks.
    pub fn halo_valid(&self) -> usize {
        self.halo_valid
    }

    pub fn set_halo_valid(&mut self, width: usize) {
        self.halo_valid = width.min(self.layout.ghost);
    }

    /// Marks the halo stale after a direct write to the interior.
    pub fn mark_dirty(&mut self) {
        self.halo_valid = 0;
    }

    pub fn set_checked(&mut self, on: bool) {
        self.checked = on;
    }

    #[inline]
    pub fn offset(&self, i: isize, j: isize) -> usize {
        let g = self.layout.ghost as isize;
        if self.checked {
            let (nx, ny) = (self.nx() as isize, self.ny() as isize);
            assert!(
                i >= -g && i < nx + g && j >= -g && j < ny + g,
                "out-of-halo access at ({i}, {j}) on a {nx}x{ny} block with ghost width {g}"
            );
        }
        ((j + g) as usize) * self.stride + (i + g) as usize
    }

    #[inline]
    pub fn get(&self, i: isize, j: isize) -> T {
        self.data[self.offset(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: isize, j: isize, v: T) {
        let k = self.offset(i, j);
        self.data[k] = v;
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    /// Interior cells in row-major order.
    pub fn interior_to_vec(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(self.nx() * self.ny());
        for j in 0..self.ny() as isize {
            let a = self.offset(0, j);
            out.extend_from_slice(&self.data[a..a + self.nx()]);
        }
        out
    }

    /// Iterates the interior cells in row-major order.
    pub fn cells(&self) -> impl Iterator<Item = (isize, isize)> {
        let (nx, ny) = (self.nx() as isize, self.ny() as isize);
        (0..ny).flat_map(move |j| (0..nx).map(move |i| (i, j)))
    }

    /// Whether local cell `(i, j)` lies inside the global domain, ignoring
    /// periodic wrap.
    pub fn in_domain(&self, i: isize, j: isize) -> bool {
        let gi = self.layout.origin.0 as isize + i;
        let gj = self.layout.origin.1 as isize + j;
        gi >= 0
            && gj >= 0
            && (gi as usize) < self.layout.global.0
            && (gj as usize) < self.layout.global.1
    }

    /// The 8 neighbors of `(i, j)` in [`NEIGHBOR_OFFSETS`] order; `None`
    /// where the neighbor falls outside the global domain.
    pub fn neighbors8(&self, i: isize, j: isize) -> [Option<T>; 8] {
        NEIGHBOR_OFFSETS.map(|(di, dj)| {
            let (a, b) = (i + di, j + dj);
            self.in_domain(a, b).then(|| self.get(a, b))
        })
    }

    /// Packs `count` rows starting at local row `j0`, over columns
    /// `i0..i1`.
    pub(crate) fn pack_rows(&self, j0: isize, count: usize, i0: isize, i1: isize) -> Vec<T> {
        let mut out = Vec::with_capacity(count * (i1 - i0) as usize);
        for j in j0..j0 + count as isize {
            let a = self.offset(i0, j);
            let b = self.offset(i1 - 1, j) + 1;
            out.extend_from_slice(&self.data[a..b]);
        }
        out
    }

    pub(crate) fn unpack_rows(&mut self, j0: isize, count: usize, i0: isize, i1: isize, strip: &[T]) {
        let w = (i1 - i0) as usize;
        assert_eq!(strip.len(), count * w, "halo strip length mismatch");
        for (r, j) in (j0..j0 + count as isize).enumerate() {
            let a = self.offset(i0, j);
            self.data[a..a + w].copy_from_slice(&strip[r * w..(r + 1) * w]);
        }
    }

    /// Packs columns `i0..i0+count` over interior rows.
    pub(crate) fn pack_cols(&self, i0: isize, count: usize) -> Vec<T> {
        let mut out = Vec::with_capacity(count * self.ny());
        for j in 0..self.ny() as isize {
            let a = self.offset(i0, j);
            out.extend_from_slice(&self.data[a..a + count]);
        }
        out
    }

    pub(crate) fn unpack_cols(&mut self, i0: isize, count: usize, strip: &[T]) {
        assert_eq!(strip.len(), count * self.ny(), "halo strip length mismatch");
        for (r, j) in (0..self.ny() as isize).enumerate() {
            let a = self.offset(i0, j);
            self.data[a..a + count].copy_from_slice(&strip[r * count..(r + 1) * count]);
        }
    }
}

impl<T: Copy + Default> DMatrix<T> {
    pub fn zeros(layout: &BlockLayout) -> Self {
        Self::new(layout, T::default())
    }
}

impl<T: Copy> std::ops::Index<(isize, isize)> for DMatrix<T> {
    type Output = T;
    fn index(&self, (i, j): (isize, isize)) -> &T {
        &self.data[self.offset(i, j)]
    }
}

impl<T: Copy> std::ops::IndexMut<(isize, isize)> for DMatrix<T> {
    fn index_mut(&mut self, (i, j): (isize, isize)) -> &mut T {
        let k = self.offset(i, j);
        &mut self.data[k]
    }
}
