//! Exact k-nearest-neighbour queries on a uniform bucket grid.

use nalgebra::Vector3;

use crate::real::Real;

/// Immutable spatial index over a point set.
#[derive(Debug, Clone)]
pub struct PointGrid<'a, T: Real> {
    points: &'a [Vector3<T>],
    origin: Vector3<T>,
    cell: T,
    dims: [usize; 3],
    /// `items[starts[c]..starts[c + 1]]` are the points in cell `c`.
    starts: Vec<usize>,
    items: Vec<usize>,
}

impl<'a, T: Real> PointGrid<'a, T> {
    /// Buckets sized for roughly `per_cell` points each.
    pub fn new(points: &'a [Vector3<T>], per_cell: usize) -> Self {
        let mut lo = points.first().copied().unwrap_or_else(Vector3::zeros);
        let mut hi = lo;
        for p in points {
            lo = lo.inf(p);
            hi = hi.sup(p);
        }
        let extent = hi - lo;
        let n = points.len().max(1) as f64;
        let longest = extent.max().to_f64_lossy();
        // pick the cell size from the occupied dimensions only, so flat clouds still bucket well
        let occupied: Vec<f64> = extent.iter().map(|e| e.to_f64_lossy()).filter(|e| *e > longest * 1e-3).collect();
        let cells_wanted = (n / per_cell.max(1) as f64).max(1.0);
        let cell = if occupied.is_empty() {
            1.0
        } else {
            let measure: f64 = occupied.iter().product();
            (measure / cells_wanted).powf(1.0 / occupied.len() as f64)
        };
        let cell = T::of(cell.max(longest * 1e-6).max(f64::MIN_POSITIVE));
        let mut dims = [1usize; 3];
        for a in 0..3 {
            dims[a] = ((extent[a] / cell).floor().to_f64_lossy() as usize + 1).min(1 << 20);
        }
        let mut grid = PointGrid {
            points,
            origin: lo,
            cell,
            dims,
            starts: Vec::new(),
            items: Vec::new(),
        };
        let ncells = dims[0] * dims[1] * dims[2];
        let keys: Vec<usize> = points.iter().map(|p| grid.flat(grid.cell_of(p))).collect();
        let mut starts = vec![0usize; ncells + 1];
        for &k in &keys {
            starts[k + 1] += 1;
        }
        for c in 0..ncells {
            starts[c + 1] += starts[c];
        }
        let mut fill = starts.clone();
        let mut items = vec![0usize; points.len()];
        for (i, &k) in keys.iter().enumerate() {
            items[fill[k]] = i;
            fill[k] += 1;
        }
        grid.starts = starts;
        grid.items = items;
        grid
    }

    fn cell_of(&self, p: &Vector3<T>) -> [usize; 3] {
        std::array::from_fn(|a| {
            let c = ((p[a] - self.origin[a]) / self.cell).floor().to_f64_lossy();
            (c.max(0.0) as usize).min(self.dims[a] - 1)
        })
    }

    fn flat(&self, c: [usize; 3]) -> usize {
        (c[0] * self.dims[1] + c[1]) * self.dims[2] + c[2]
    }

    /// The `k` points closest to `q` as `(squared distance, index)`, nearest
    /// first; ties go to the lower index.
    pub fn nearest(&self, q: &Vector3<T>, k: usize) -> Vec<(T, usize)> {
        let mut best: Vec<(T, usize)> = Vec::with_capacity(k + 1);
        if k == 0 || self.points.is_empty() {
            return best;
        }
        let home = self.cell_of(q);
        let max_ring = self.dims.iter().copied().max().unwrap_or(1);
        for ring in 0..=max_ring {
            let lo: [i64; 3] = std::array::from_fn(|a| home[a] as i64 - ring as i64);
            let hi: [i64; 3] = std::array::from_fn(|a| home[a] as i64 + ring as i64);
            for i in lo[0].max(0)..=hi[0].min(self.dims[0] as i64 - 1) {
                for j in lo[1].max(0)..=hi[1].min(self.dims[1] as i64 - 1) {
                    for l in lo[2].max(0)..=hi[2].min(self.dims[2] as i64 - 1) {
                        let on_shell = i == lo[0] || i == hi[0] || j == lo[1] || j == hi[1] || l == lo[2] || l == hi[2];
                        if !on_shell {
                            continue;
                        }
                        let c = self.flat([i as usize, j as usize, l as usize]);
                        for &idx in &self.items[self.starts[c]..self.starts[c + 1]] {
                            let d2 = (self.points[idx] - q).norm_squared();
                            let key = (d2, idx);
                            if best.len() == k && !less(&key, &best[k - 1]) {
                                continue;
                            }
                            let at = best.partition_point(|e| less(e, &key));
                            best.insert(at, key);
                            best.truncate(k);
                        }
                    }
                }
            }
            // every unvisited point is at least `ring` cells away
            if best.len() == k {
                let reach = self.cell * T::of(ring as f64);
                if best[k - 1].0 <= reach * reach {
                    break;
                }
            }
        }
        best
    }
}

fn less<T: Real>(a: &(T, usize), b: &(T, usize)) -> bool {
    a.0 < b.0 || (a.0 == b.0 && a.1 < b.1)
}
