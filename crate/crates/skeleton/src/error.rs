use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SkelError {
    #[error("grid must have at least one cell in each direction (got {nx}x{ny})")]
    EmptyGrid { nx: usize, ny: usize },

    #[error("worker count must be at least 1")]
    NoWorkers,

    #[error("{workers} workers requested for a grid of only {cells} cells")]
    MoreWorkersThanCells { workers: usize, cells: usize },

    #[error("no {workers}-worker factorization fits a {nx}x{ny} grid with blocks at least {ghost} cells thick")]
    BlockTooThin {
        workers: usize,
        nx: usize,
        ny: usize,
        ghost: usize,
    },

    #[error("ghost width must be 1 or 2 (got {0})")]
    GhostWidth(usize),
}
