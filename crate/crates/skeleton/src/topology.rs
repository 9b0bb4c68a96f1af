//! Block decomposition of a global raster onto a 2D Cartesian arrangement of
//! workers.
//!
//! Ranks are laid out x-fastest: `rank = cy * px + cx`. When a dimension does
//! not divide evenly, the extra rows/columns go to the blocks with the lowest
//! coordinate, so every layout is reproducible from `(P, nx, ny, ghost)`.

use crate::error::SkelError;

/// One of the four block faces. Index order is W, E, S, N.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    West,
    East,
    South,
    North,
}

impl Side {
    pub const ALL: [Side; 4] = [Side::West, Side::East, Side::South, Side::North];

    pub fn opposite(self) -> Side {
        match self {
            Side::West => Side::East,
            Side::East => Side::West,
            Side::South => Side::North,
            Side::North => Side::South,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    /// True for the two faces normal to x.
    pub fn is_x(self) -> bool {
        matches!(self, Side::West | Side::East)
    }
}

/// Where one worker's block sits in the global raster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockLayout {
    pub rank: usize,
    /// Cartesian coordinates of the worker, `(cx, cy)`.
    pub coords: (usize, usize),
    /// Global index of the first interior cell.
    pub origin: (usize, usize),
    /// Interior extent `(nx, ny)` of this block.
    pub extent: (usize, usize),
    /// Global raster extent.
    pub global: (usize, usize),
    pub ghost: usize,
    /// Neighbor rank across each side (indexed by [`Side::index`]); `None` on
    /// a non-periodic physical boundary.
    pub neighbors: [Option<usize>; 4],
    /// Whether each side lies on the global domain edge, periodic or not.
    pub on_domain_edge: [bool; 4],
}

impl BlockLayout {
    pub fn neighbor(&self, side: Side) -> Option<usize> {
        self.neighbors[side.index()]
    }

    /// A side whose ghost cells are not supplied by any other block (or by a
    /// periodic wrap) and must be filled by boundary conditions.
    pub fn is_physical(&self, side: Side) -> bool {
        self.neighbors[side.index()].is_none()
    }

    pub fn nx(&self) -> usize {
        self.extent.0
    }

    pub fn ny(&self) -> usize {
        self.extent.1
    }

    /// Local coordinates of global cell `(gi, gj)`, if it lies in this block's
    /// interior.
    pub fn to_local(&self, gi: usize, gj: usize) -> Option<(usize, usize)> {
        let (ox, oy) = self.origin;
        let (nx, ny) = self.extent;
        (gi >= ox && gi < ox + nx && gj >= oy && gj < oy + ny).then(|| (gi - ox, gj - oy))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    pub workers: usize,
    pub px: usize,
    pub py: usize,
    pub global: (usize, usize),
    pub ghost: usize,
    pub periodic: (bool, bool),
    pub blocks: Vec<BlockLayout>,
}

impl Topology {
    pub fn block(&self, rank: usize) -> &BlockLayout {
        &self.blocks[rank]
    }

    pub fn rank_of(&self, cx: usize, cy: usize) -> usize {
        cy * self.px + cx
    }

    /// Rank owning global cell `(gi, gj)`.
    pub fn owner(&self, gi: usize, gj: usize) -> Option<usize> {
        self.blocks
            .iter()
            .find(|b| b.to_local(gi, gj).is_some())
            .map(|b| b.rank)
    }
}

/// Sizes of `parts` balanced pieces of `n`, larger pieces first.
pub fn split_extent(n: usize, parts: usize) -> Vec<usize> {
    let base = n / parts;
    let extra = n % parts;
    (0..parts).map(|c| base + usize::from(c < extra)).collect()
}

fn offsets(sizes: &[usize]) -> Vec<usize> {
    sizes
        .iter()
        .scan(0, |acc, &s| {
            let o = *acc;
            *acc += s;
            Some(o)
        })
        .collect()
}

/// Picks `(px, py)` with `px * py = workers`, minimizing `|px/py - nx/ny|`.
/// Ties go to the smaller `px`. Factorizations that would leave a block
/// thinner than the ghost width across an exchanged face are skipped.
fn factorize(
    workers: usize,
    nx: usize,
    ny: usize,
    ghost: usize,
    periodic: (bool, bool),
) -> Option<(usize, usize)> {
    let target = nx as f64 / ny as f64;
    let mut best: Option<((usize, usize), f64)> = None;
    for px in 1..=workers {
        if !workers.is_multiple_of(px) {
            continue;
        }
        let py = workers / px;
        if px > nx || py > ny {
            continue;
        }
        // Blocks exchange across x whenever px > 1 or x is periodic.
        if (px > 1 || periodic.0) && nx / px < ghost {
            continue;
        }
        if (py > 1 || periodic.1) && ny / py < ghost {
            continue;
        }
        let score = (px as f64 / py as f64 - target).abs();
        if best.is_none_or(|(_, s)| score < s) {
            best = Some(((px, py), score));
        }
    }
    best.map(|(f, _)| f)
}

/// Splits an `nx` x `ny` raster over `workers` blocks with halo frames of
/// width `ghost`.
pub fn decompose(
    workers: usize,
    nx: usize,
    ny: usize,
    ghost: usize,
    periodic: (bool, bool),
) -> Result<Topology, SkelError> {
    if nx == 0 || ny == 0 {
        return Err(SkelError::EmptyGrid { nx, ny });
    }
    if workers == 0 {
        return Err(SkelError::NoWorkers);
    }
    if !(1..=2).contains(&ghost) {
        return Err(SkelError::GhostWidth(ghost));
    }
    if workers > nx * ny {
        return Err(SkelError::MoreWorkersThanCells {
            workers,
            cells: nx * ny,
        });
    }
    let (px, py) = factorize(workers, nx, ny, ghost, periodic).ok_or(SkelError::BlockTooThin {
        workers,
        nx,
        ny,
        ghost,
    })?;

    let wx = split_extent(nx, px);
    let wy = split_extent(ny, py);
    let ox = offsets(&wx);
    let oy = offsets(&wy);

    let wrap = |c: usize, d: isize, n: usize, periodic: bool| -> Option<usize> {
        let t = c as isize + d;
        if t >= 0 && (t as usize) < n {
            Some(t as usize)
        } else if periodic {
            Some(t.rem_euclid(n as isize) as usize)
        } else {
            None
        }
    };

    let mut blocks = Vec::with_capacity(workers);
    for cy in 0..py {
        for cx in 0..px {
            let rank = cy * px + cx;
            let west = wrap(cx, -1, px, periodic.0).map(|c| cy * px + c);
            let east = wrap(cx, 1, px, periodic.0).map(|c| cy * px + c);
            let south = wrap(cy, -1, py, periodic.1).map(|c| c * px + cx);
            let north = wrap(cy, 1, py, periodic.1).map(|c| c * px + cx);
            blocks.push(BlockLayout {
                rank,
                coords: (cx, cy),
                origin: (ox[cx], oy[cy]),
                extent: (wx[cx], wy[cy]),
                global: (nx, ny),
                ghost,
                neighbors: [west, east, south, north],
                on_domain_edge: [cx == 0, cx + 1 == px, cy == 0, cy + 1 == py],
            });
        }
    }

    Ok(Topology {
        workers,
        px,
        py,
        global: (nx, ny),
        ghost,
        periodic,
        blocks,
    })
}
