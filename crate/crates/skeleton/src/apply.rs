//! The `apply` and `apply_list` skeletons.
//!
//! A user kernel sees whole local blocks, never messages: it receives the
//! block layout, its declared input matrices and its declared output
//! matrices, and loops over cells with ordinary indexing. Before a kernel
//! runs, every input it reads with a stencil wider than the currently valid
//! halo is exchanged; point-wise inputs are never exchanged.

use crate::comm::Worker;
use crate::dmatrix::DMatrix;
use crate::topology::BlockLayout;

/// Handle to a matrix stored in a [`FieldSet`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FieldId(pub usize);

/// How a step reads one of its inputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Access {
    /// Only the cell being computed (and halo cells the field already holds
    /// valid data for).
    Point(FieldId),
    /// Neighbors up to the given distance.
    Stencil(FieldId, usize),
}

impl Access {
    pub fn field(self) -> FieldId {
        match self {
            Access::Point(f) | Access::Stencil(f, _) => f,
        }
    }
}

/// What a step writes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Writes {
    /// Interior cells, extended by `ring` halo layers that the kernel
    /// computes redundantly from valid input halos.
    Cells { ring: usize },
    /// Only ghost cells on physical (non-exchanged) block faces.
    PhysicalGhosts,
}

/// The kernel signature: layout, inputs in declared order, outputs in
/// declared order.
pub type Kernel<'k, T, E> =
    Box<dyn FnMut(&BlockLayout, &[&DMatrix<T>], &mut [DMatrix<T>]) -> Result<(), E> + 'k>;

pub struct Step<'k, T, E> {
    pub name: &'static str,
    pub reads: Vec<Access>,
    pub writes: Vec<FieldId>,
    pub region: Writes,
    pub kernel: Kernel<'k, T, E>,
}

impl<'k, T, E> Step<'k, T, E> {
    pub fn new(
        name: &'static str,
        reads: Vec<Access>,
        writes: Vec<FieldId>,
        kernel: impl FnMut(&BlockLayout, &[&DMatrix<T>], &mut [DMatrix<T>]) -> Result<(), E> + 'k,
    ) -> Self {
        Self {
            name,
            reads,
            writes,
            region: Writes::Cells { ring: 0 },
            kernel: Box::new(kernel),
        }
    }

    pub fn ring(mut self, ring: usize) -> Self {
        self.region = Writes::Cells { ring };
        self
    }

    pub fn physical_ghosts(mut self) -> Self {
        self.region = Writes::PhysicalGhosts;
        self
    }
}

/// The named matrices one worker operates on.
#[derive(Debug, Clone, Default)]
pub struct FieldSet<T> {
    fields: Vec<Option<DMatrix<T>>>,
    names: Vec<&'static str>,
}

impl<T: Copy> FieldSet<T> {
    pub fn new() -> Self {
        Self {
            fields: Vec::new(),
            names: Vec::new(),
        }
    }

    pub fn add(&mut self, name: &'static str, m: DMatrix<T>) -> FieldId {
        self.fields.push(Some(m));
        self.names.push(name);
        FieldId(self.fields.len() - 1)
    }

    pub fn get(&self, id: FieldId) -> &DMatrix<T> {
        self.fields[id.0]
            .as_ref()
            .unwrap_or_else(|| panic!("field {} is checked out", self.names[id.0]))
    }

    pub fn get_mut(&mut self, id: FieldId) -> &mut DMatrix<T> {
        let name = self.names[id.0];
        self.fields[id.0]
            .as_mut()
            .unwrap_or_else(|| panic!("field {name} is checked out"))
    }

    pub fn name(&self, id: FieldId) -> &'static str {
        self.names[id.0]
    }

    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }

    /// Swaps the storage of two fields.
    pub fn swap(&mut self, a: FieldId, b: FieldId) {
        self.fields.swap(a.0, b.0);
    }
}

impl Worker {
    /// Runs the steps in order on this worker's block. Every worker must call
    /// this with the same list so that exchanges pair up.
    ///
    /// A kernel error does not stop the sequence: the remaining steps and
    /// their exchanges still run so that peers are not left waiting, and the
    /// first error is returned at the end.
    pub fn apply_list<T, E>(
        &mut self,
        fields: &mut FieldSet<T>,
        steps: &mut [Step<'_, T, E>],
    ) -> Result<(), E>
    where
        T: Copy + Send + 'static,
    {
        let mut first_err = None;
        for step in steps.iter_mut() {
            for access in &step.reads {
                if let Access::Stencil(id, width) = *access {
                    assert!(
                        !step.writes.contains(&id),
                        "step {}: field {} is both stencil-read and written",
                        step.name,
                        fields.name(id)
                    );
                    if fields.get(id).halo_valid() < width {
                        self.halo_exchange(fields.get_mut(id));
                    }
                }
            }

            let mut outs: Vec<DMatrix<T>> = step
                .writes
                .iter()
                .map(|id| {
                    fields.fields[id.0]
                        .take()
                        .unwrap_or_else(|| panic!("step {}: field written twice", step.name))
                })
                .collect();
            let ins: Vec<&DMatrix<T>> = step
                .reads
                .iter()
                .map(|a| {
                    fields.fields[a.field().0].as_ref().unwrap_or_else(|| {
                        panic!(
                            "step {}: field {} is read and written; declare it as a write only",
                            step.name,
                            fields.names[a.field().0]
                        )
                    })
                })
                .collect();

            let result = (step.kernel)(self.layout(), &ins, &mut outs);
            if let Err(e) = result {
                first_err.get_or_insert(e);
            }

            for (id, mut m) in step.writes.iter().zip(outs) {
                if let Writes::Cells { ring } = step.region {
                    m.set_halo_valid(ring);
                }
                fields.fields[id.0] = Some(m);
            }
        }
        first_err.map_or(Ok(()), Err)
    }

    /// Applies `f` to this worker's block of `input` after completing its
    /// halo to `width`, writing the interior of `output`.
    pub fn apply<A, B, F>(&mut self, input: &mut DMatrix<A>, width: usize, output: &mut DMatrix<B>, f: F)
    where
        A: Copy + Send + 'static,
        B: Copy,
        F: FnOnce(&DMatrix<A>, &mut DMatrix<B>),
    {
        if width > 0 && input.halo_valid() < width {
            self.halo_exchange(input);
        }
        f(input, output);
        output.mark_dirty();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::comm::Executor;
    use crate::topology::decompose;

    #[test]
    fn point_read_after_write_needs_no_exchange() {
        let exec = Executor::new(decompose(2, 8, 4, 1, (false, false)).unwrap());
        let counts = exec.run(|w| {
            let mut fs = FieldSet::new();
            let a = fs.add("a", w.matrix(1.0f64));
            let b = fs.add("b", w.matrix(0.0f64));
            let c = fs.add("c", w.matrix(0.0f64));
            let mut steps: Vec<Step<'_, f64, ()>> = vec![
                Step::new("avg", vec![Access::Stencil(a, 1)], vec![b], |_, ins, outs| {
                    let (a, b) = (ins[0], &mut outs[0]);
                    for (i, j) in a.cells().collect::<Vec<_>>() {
                        b.set(i, j, 0.5 * (a.get(i - 1, j) + a.get(i + 1, j)));
                    }
                    Ok(())
                }),
                Step::new("scale", vec![Access::Point(b)], vec![c], |_, ins, outs| {
                    let (b, c) = (ins[0], &mut outs[0]);
                    for (i, j) in b.cells().collect::<Vec<_>>() {
                        c.set(i, j, 2.0 * b.get(i, j));
                    }
                    Ok(())
                }),
            ];
            w.apply_list(&mut fs, &mut steps).unwrap();
            w.stats().exchanges
        });
        assert_eq!(counts, vec![1, 1]);
    }

    #[test]
    fn valid_halo_elides_second_exchange() {
        let exec = Executor::new(decompose(2, 8, 4, 1, (false, false)).unwrap());
        let counts = exec.run(|w| {
            let mut fs = FieldSet::new();
            let a = fs.add("a", w.matrix(1.0f64));
            let b = fs.add("b", w.matrix(0.0f64));
            let c = fs.add("c", w.matrix(0.0f64));
            let copy = |_: &BlockLayout, ins: &[&DMatrix<f64>], outs: &mut [DMatrix<f64>]| {
                outs[0].as_mut_slice().copy_from_slice(ins[0].as_slice());
                Ok::<(), ()>(())
            };
            let mut steps = vec![
                Step::new("first", vec![Access::Stencil(a, 1)], vec![b], copy),
                Step::new("second", vec![Access::Stencil(a, 1)], vec![c], copy),
            ];
            w.apply_list(&mut fs, &mut steps).unwrap();
            w.stats().exchanges
        });
        assert_eq!(counts, vec![1, 1]);
    }

    #[test]
    fn kernel_error_is_reported_after_all_steps() {
        let exec = Executor::new(decompose(2, 8, 4, 1, (false, false)).unwrap());
        let out = exec.run(|w| {
            let mut fs = FieldSet::new();
            let a = fs.add("a", w.matrix(1.0f64));
            let b = fs.add("b", w.matrix(0.0f64));
            let rank = w.rank();
            let mut ran_second = false;
            let res = {
                let mut steps: Vec<Step<'_, f64, String>> = vec![
                    Step::new("fail", vec![Access::Point(a)], vec![b], move |_, _, _| {
                        if rank == 1 {
                            Err("bad".to_string())
                        } else {
                            Ok(())
                        }
                    }),
                    Step::new("exchange", vec![Access::Stencil(b, 1)], vec![a], |_, _, _| {
                        ran_second = true;
                        Ok(())
                    }),
                ];
                w.apply_list(&mut fs, &mut steps)
            };
            (res, ran_second)
        });
        assert_eq!(out[0], (Ok(()), true));
        assert_eq!(out[1], (Err("bad".to_string()), true));
    }
}
