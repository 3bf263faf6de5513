//! Post-hoc measurements on particle positions.

use std::collections::HashMap;

use nalgebra::Vector3;

use crate::real::Real;

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// Connected-component label per point, where points closer than `linkage`
/// are joined. Labels are the smallest point index in each component.
pub fn fragment_labels<T: Real>(positions: &[Vector3<T>], linkage: T) -> Vec<usize> {
    let mut parent: Vec<usize> = (0..positions.len()).collect();
    let key = |x: &Vector3<T>| -> [i64; 3] { std::array::from_fn(|a| (x[a] / linkage).floor().to_f64_lossy() as i64) };
    let mut cells: HashMap<[i64; 3], Vec<usize>> = HashMap::new();
    for (i, x) in positions.iter().enumerate() {
        cells.entry(key(x)).or_default().push(i);
    }
    let r2 = linkage * linkage;
    for (i, x) in positions.iter().enumerate() {
        let c = key(x);
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    let Some(bucket) = cells.get(&[c[0] + dx, c[1] + dy, c[2] + dz]) else {
                        continue;
                    };
                    for &j in bucket {
                        if j > i && (positions[j] - x).norm_squared() < r2 {
                            let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                            if a != b {
                                parent[a.max(b)] = a.min(b);
                            }
                        }
                    }
                }
            }
        }
    }
    (0..positions.len()).map(|i| find(&mut parent, i)).collect()
}

/// Number of connected components (isolated points count as one each).
pub fn count_fragments<T: Real>(positions: &[Vector3<T>], linkage: T) -> usize {
    fragment_labels(positions, linkage)
        .iter()
        .enumerate()
        .filter(|(i, l)| i == *l)
        .count()
}
