//! Grid-level collision objects: static planes/boxes and scripted movers.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::real::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum BoundaryShape<T: Real> {
    /// Half-space behind `point` with outward unit `normal`.
    Plane { point: Vector3<T>, normal: Vector3<T> },
    /// Axis-aligned solid box.
    Box { min: Vector3<T>, max: Vector3<T> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryMode {
    /// Node velocity set to the obstacle velocity.
    Sticky,
    /// Only the inward normal component (relative to the obstacle) is removed.
    Slip,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundaryCondition<T: Real> {
    pub shape: BoundaryShape<T>,
    pub mode: BoundaryMode,
    #[serde(default = "Vector3::zeros")]
    pub velocity: Vector3<T>,
}

impl<T: Real> BoundaryShape<T> {
    /// Outward normal at `x` if `x` is on or inside the obstacle.
    pub fn contact(&self, x: &Vector3<T>) -> Option<Vector3<T>> {
        match self {
            BoundaryShape::Plane { point, normal } => {
                if (x - point).dot(normal) <= T::zero() {
                    Some(*normal)
                } else {
                    None
                }
            }
            BoundaryShape::Box { min, max } => {
                let inside = (0..3).all(|a| x[a] >= min[a] && x[a] <= max[a]);
                if !inside {
                    return None;
                }
                // nearest face decides the normal; ties go to the lower axis, min face first
                let mut best = (T::max_value().unwrap_or(T::one()), Vector3::zeros());
                for a in 0..3 {
                    let mut n = Vector3::zeros();
                    let d_lo = x[a] - min[a];
                    if d_lo < best.0 {
                        n[a] = -T::one();
                        best = (d_lo, n);
                    }
                    let mut n = Vector3::zeros();
                    let d_hi = max[a] - x[a];
                    if d_hi < best.0 {
                        n[a] = T::one();
                        best = (d_hi, n);
                    }
                }
                Some(best.1)
            }
        }
    }

    pub fn translated(&self, by: &Vector3<T>) -> Self {
        match *self {
            BoundaryShape::Plane { point, normal } => BoundaryShape::Plane {
                point: point + by,
                normal,
            },
            BoundaryShape::Box { min, max } => BoundaryShape::Box {
                min: min + by,
                max: max + by,
            },
        }
    }

    pub fn is_valid(&self) -> bool {
        match self {
            BoundaryShape::Plane { normal, .. } => (normal.norm() - T::one()).abs() <= T::of(1e-6),
            BoundaryShape::Box { min, max } => (0..3).all(|a| min[a] <= max[a]),
        }
    }
}

impl<T: Real> BoundaryCondition<T> {
    pub fn new(shape: BoundaryShape<T>, mode: BoundaryMode) -> Self {
        BoundaryCondition {
            shape,
            mode,
            velocity: Vector3::zeros(),
        }
    }

    /// Horizontal ground at height `z`.
    pub fn ground(z: T, mode: BoundaryMode) -> Self {
        Self::new(
            BoundaryShape::Plane {
                point: Vector3::new(T::zero(), T::zero(), z),
                normal: Vector3::z(),
            },
            mode,
        )
    }

    /// Enforces the collision response on the nodal velocity at `x`.
    pub fn apply(&self, x: &Vector3<T>, v: &mut Vector3<T>) {
        let Some(n) = self.shape.contact(x) else {
            return;
        };
        match self.mode {
            BoundaryMode::Sticky => *v = self.velocity,
            BoundaryMode::Slip => {
                let rel = *v - self.velocity;
                let vn = rel.dot(&n);
                if vn < T::zero() {
                    *v = self.velocity + rel - n * vn;
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Keyframe<T: Real> {
    pub time: T,
    pub position: Vector3<T>,
}

/// Obstacle moved along a piecewise-linear path, e.g. a bullet or a blade.
///
/// `shape` is given relative to the keyframed position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptedObstacle<T: Real> {
    pub shape: BoundaryShape<T>,
    pub mode: BoundaryMode,
    pub keyframes: Vec<Keyframe<T>>,
    /// `[start, end]` in seconds; inactive outside. Defaults to the keyframe span.
    #[serde(default)]
    pub active: Option<[T; 2]>,
}

impl<T: Real> ScriptedObstacle<T> {
    pub fn keyframes_valid(&self) -> bool {
        !self.keyframes.is_empty() && self.keyframes.windows(2).all(|w| w[0].time < w[1].time)
    }

    fn segment(&self, t: T) -> (usize, T) {
        let k = &self.keyframes;
        if k.len() < 2 || t <= k[0].time {
            return (0, T::zero());
        }
        let last = k.len() - 1;
        if t >= k[last].time {
            return (last - 1, T::one());
        }
        let i = k.partition_point(|f| f.time <= t) - 1;
        (i, (t - k[i].time) / (k[i + 1].time - k[i].time))
    }

    /// Linear interpolation between keyframes, clamped at the ends.
    pub fn position_at(&self, t: T) -> Vector3<T> {
        let k = &self.keyframes;
        if k.len() == 1 {
            return k[0].position;
        }
        let (i, s) = self.segment(t);
        k[i].position + (k[i + 1].position - k[i].position) * s
    }

    /// Slope of the active segment; zero before the first and after the last keyframe.
    pub fn velocity_at(&self, t: T) -> Vector3<T> {
        let k = &self.keyframes;
        if k.len() < 2 || t < k[0].time || t >= k[k.len() - 1].time {
            return Vector3::zeros();
        }
        let (i, _) = self.segment(t);
        (k[i + 1].position - k[i].position) / (k[i + 1].time - k[i].time)
    }

    pub fn is_active(&self, t: T) -> bool {
        let [a, b] = self.active.unwrap_or_else(|| {
            let first = self.keyframes.first().map(|k| k.time).unwrap_or_else(T::zero);
            let last = self.keyframes.last().map(|k| k.time).unwrap_or_else(T::zero);
            [first, last]
        });
        t >= a && t <= b
    }

    pub fn boundary_at(&self, t: T) -> Option<BoundaryCondition<T>> {
        self.is_active(t).then(|| BoundaryCondition {
            shape: self.shape.translated(&self.position_at(t)),
            mode: self.mode,
            velocity: self.velocity_at(t),
        })
    }
}
