//! D8 flow direction as a skeleton user function.

use num_traits::Zero;

use crate::comm::Worker;
use crate::dmatrix::DMatrix;

/// Direction code for each cell: `1..=8` indexes the lowest neighbor in
/// E, SE, S, SW, W, NW, N, NE order; `0` when no neighbor is both positive and
/// strictly lower than the cell. Neighbors outside the domain are skipped.
pub fn directions<T>(input: &DMatrix<T>, output: &mut DMatrix<u8>)
where
    T: Copy + PartialOrd + Zero,
{
    for (i, j) in input.cells() {
        let mut lowest = input.get(i, j);
        let mut index = 0u8;
        for (k, n) in input.neighbors8(i, j).into_iter().enumerate() {
            if let Some(v) = n {
                if v > T::zero() && v < lowest {
                    index = k as u8 + 1;
                    lowest = v;
                }
            }
        }
        output.set(i, j, index);
    }
}

/// Flow direction of the whole distributed DEM, one block per worker.
pub fn flow_direction<T>(worker: &mut Worker, dem: &mut DMatrix<T>) -> DMatrix<u8>
where
    T: Copy + PartialOrd + Zero + Send + 'static,
{
    let mut out = worker.matrix(0u8);
    worker.apply(dem, 1, &mut out, directions);
    out
}
