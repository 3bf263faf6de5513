use nalgebra::Vector3;

use crate::real::Real;

/// Box of node indices, `lo` inclusive and `hi` exclusive on each axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeBox {
    pub lo: [usize; 3],
    pub hi: [usize; 3],
}

impl NodeBox {
    pub fn extent(&self) -> [usize; 3] {
        std::array::from_fn(|a| self.hi[a].saturating_sub(self.lo[a]))
    }

    pub fn len(&self) -> usize {
        self.extent().iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Box-local index of node `(i, j, k)`, x-major like the grid.
    #[inline]
    pub fn local(&self, i: usize, j: usize, k: usize) -> usize {
        let e = self.extent();
        ((i - self.lo[0]) * e[1] + (j - self.lo[1])) * e[2] + (k - self.lo[2])
    }

    /// Grid indices of every node in the box, in box-local order.
    pub fn nodes<'a, T: Real>(&'a self, grid: &'a MpmGrid<T>) -> impl Iterator<Item = usize> + 'a {
        (self.lo[0]..self.hi[0]).flat_map(move |i| {
            (self.lo[1]..self.hi[1]).flat_map(move |j| (self.lo[2]..self.hi[2]).map(move |k| grid.index(i, j, k)))
        })
    }
}

/// Dense Eulerian background grid. Node `(i, j, k)` sits at
/// `origin + spacing * (i, j, k)`; storage is x-major so that x-slabs are
/// contiguous.
#[derive(Debug, Clone, PartialEq)]
pub struct MpmGrid<T: Real> {
    pub origin: Vector3<T>,
    pub spacing: T,
    pub dims: [usize; 3],
    pub mass: Vec<T>,
    pub momentum: Vec<Vector3<T>>,
    /// Velocity after P2G (`momentum / mass` where mass > 0).
    pub velocity: Vec<Vector3<T>>,
    /// Velocity after the force update and boundary projection.
    pub velocity_new: Vec<Vector3<T>>,
    pub force: Vec<Vector3<T>>,
    /// Nodes written by the last transfer; everything outside is zero.
    /// `None` means the whole grid may be dirty.
    pub active: Option<NodeBox>,
}

impl<T: Real> MpmGrid<T> {
    pub fn new(origin: Vector3<T>, spacing: T, dims: [usize; 3]) -> Self {
        let n = dims[0] * dims[1] * dims[2];
        MpmGrid {
            origin,
            spacing,
            dims,
            mass: vec![T::zero(); n],
            momentum: vec![Vector3::zeros(); n],
            velocity: vec![Vector3::zeros(); n],
            velocity_new: vec![Vector3::zeros(); n],
            force: vec![Vector3::zeros(); n],
            active: None,
        }
    }

    /// Grid whose nodes cover the box `[min, max]` (rounded outwards).
    pub fn covering(min: Vector3<T>, max: Vector3<T>, spacing: T) -> Self {
        let mut dims = [0usize; 3];
        for a in 0..3 {
            let cells = ((max[a] - min[a]) / spacing).ceil().to_f64_lossy().max(1.0) as usize;
            dims[a] = cells + 1;
        }
        Self::new(min, spacing, dims)
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.dims[1] + j) * self.dims[2] + k
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let k = idx % self.dims[2];
        let j = (idx / self.dims[2]) % self.dims[1];
        let i = idx / (self.dims[1] * self.dims[2]);
        [i, j, k]
    }

    pub fn node_position(&self, idx: usize) -> Vector3<T> {
        let [i, j, k] = self.coords(idx);
        self.origin
            + Vector3::new(T::of(i as f64), T::of(j as f64), T::of(k as f64)) * self.spacing
    }

    /// Nodes per x-slab.
    pub fn slab_len(&self) -> usize {
        self.dims[1] * self.dims[2]
    }

    /// Zeroes every nodal field (only the active box when one is recorded).
    pub fn clear(&mut self) {
        match self.active.take() {
            Some(b) => {
                for i in b.nodes(&*self).collect::<Vec<_>>() {
                    self.mass[i] = T::zero();
                    self.momentum[i] = Vector3::zeros();
                    self.velocity[i] = Vector3::zeros();
                    self.velocity_new[i] = Vector3::zeros();
                    self.force[i] = Vector3::zeros();
                }
            }
            None => {
                self.mass.fill(T::zero());
                self.momentum.fill(Vector3::zeros());
                self.velocity.fill(Vector3::zeros());
                self.velocity_new.fill(Vector3::zeros());
                self.force.fill(Vector3::zeros());
            }
        }
    }

    fn sum_over<V: Copy, F: Fn(usize) -> V>(&self, zero: V, add: impl Fn(V, V) -> V, at: F) -> V {
        match &self.active {
            Some(b) => b.nodes(self).fold(zero, |acc, i| add(acc, at(i))),
            None => (0..self.len()).fold(zero, |acc, i| add(acc, at(i))),
        }
    }

    pub fn total_mass(&self) -> T {
        self.sum_over(T::zero(), |a, b| a + b, |i| self.mass[i])
    }

    pub fn total_momentum(&self) -> Vector3<T> {
        self.sum_over(Vector3::zeros(), |a, b| a + b, |i| self.momentum[i])
    }

    /// Lower corner of the region where a quadratic stencil fits (1.5 cells in).
    pub fn interior_min(&self) -> Vector3<T> {
        self.origin + Vector3::repeat(self.spacing * T::of(1.5))
    }

    pub fn interior_max(&self) -> Vector3<T> {
        let last = Vector3::new(
            T::of(self.dims[0] as f64 - 1.0 - 1.5),
            T::of(self.dims[1] as f64 - 1.0 - 1.5),
            T::of(self.dims[2] as f64 - 1.0 - 1.5),
        );
        self.origin + last * self.spacing
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_and_coords_agree() {
        let g = MpmGrid::<f64>::new(Vector3::zeros(), 0.5, [4, 5, 6]);
        for idx in 0..g.len() {
            let [i, j, k] = g.coords(idx);
            assert_eq!(g.index(i, j, k), idx);
        }
        assert_eq!(g.node_position(g.index(1, 2, 3)), Vector3::new(0.5, 1.0, 1.5));
    }

    #[test]
    fn clear_zeroes_everything() {
        let mut g = MpmGrid::<f64>::new(Vector3::zeros(), 1.0, [3, 3, 3]);
        g.mass[4] = 2.0;
        g.momentum[5] = Vector3::new(1.0, 2.0, 3.0);
        g.force[0].x = 7.0;
        g.velocity_new[1].z = -1.0;
        g.clear();
        assert!(g.mass.iter().all(|m| *m == 0.0));
        assert!(g.momentum.iter().chain(&g.force).chain(&g.velocity).chain(&g.velocity_new).all(|v| *v == Vector3::zeros()));
    }

    #[test]
    fn covering_rounds_outwards() {
        let g = MpmGrid::<f64>::covering(Vector3::zeros(), Vector3::new(1.0, 0.25, 0.3), 0.1);
        assert_eq!(g.dims, [11, 4, 4]);
    }
}
