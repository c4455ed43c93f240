//! Planar vector algebra, bearings and projection operators.
//!
//! Everything downstream works with [`Vec2`] and [`Mat2`]; beacon sets are
//! validated once at construction so the hot paths (bearing sums inside the
//! integrator) never re-check them.

use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Separation below which a bearing is declared undefined (m).
pub const SINGULAR_DISTANCE: f64 = 1e-6;

/// Relative singular-value threshold of the non-collinearity test.
pub const COLLINEARITY_RATIO: f64 = 1e-9;

/// Tolerance on `‖g‖ = 1` accepted by operators that require unit vectors.
pub const UNIT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    /// Checked constructor for values crossing an input boundary.
    pub fn try_new(x: f64, y: f64) -> Result<Self> {
        let v = Vec2 { x, y };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite { what: "vector" })
        }
    }

    /// Unit vector at angle `theta` from the +x axis.
    pub fn from_angle(theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        Vec2 { x: c, y: s }
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the planar cross product.
    pub fn cross(self, other: Vec2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn norm_squared(self) -> f64 {
        self.dot(self)
    }

    /// Counter-clockwise rotation by a quarter turn.
    pub fn perp(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }

    pub fn outer(self, other: Vec2) -> Mat2 {
        Mat2::new(
            self.x * other.x,
            self.x * other.y,
            self.y * other.x,
            self.y * other.y,
        )
    }

    pub fn distance(self, other: Vec2) -> f64 {
        (other - self).norm()
    }

    pub fn is_unit(self, tol: f64) -> bool {
        (self.norm() - 1.0).abs() <= tol
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl AddAssign for Vec2 {
    fn add_assign(&mut self, rhs: Vec2) {
        self.x += rhs.x;
        self.y += rhs.y;
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, k: f64) -> Vec2 {
        Vec2::new(self.x * k, self.y * k)
    }
}

impl Mul<Vec2> for f64 {
    type Output = Vec2;
    fn mul(self, v: Vec2) -> Vec2 {
        v * self
    }
}

impl Div<f64> for Vec2 {
    type Output = Vec2;
    fn div(self, k: f64) -> Vec2 {
        Vec2::new(self.x / k, self.y / k)
    }
}

/// Row-major 2×2 matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat2 {
    pub m: [[f64; 2]; 2],
}

impl Mat2 {
    pub const IDENTITY: Mat2 = Mat2 {
        m: [[1.0, 0.0], [0.0, 1.0]],
    };
    pub const ZERO: Mat2 = Mat2 {
        m: [[0.0, 0.0], [0.0, 0.0]],
    };

    pub const fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
        Mat2 { m: [[a, b], [c, d]] }
    }

    pub fn transpose(self) -> Mat2 {
        Mat2::new(self.m[0][0], self.m[1][0], self.m[0][1], self.m[1][1])
    }

    pub fn mul_vec(self, v: Vec2) -> Vec2 {
        Vec2::new(
            self.m[0][0] * v.x + self.m[0][1] * v.y,
            self.m[1][0] * v.x + self.m[1][1] * v.y,
        )
    }

    pub fn mul_mat(self, o: Mat2) -> Mat2 {
        let a = &self.m;
        let b = &o.m;
        Mat2::new(
            a[0][0] * b[0][0] + a[0][1] * b[1][0],
            a[0][0] * b[0][1] + a[0][1] * b[1][1],
            a[1][0] * b[0][0] + a[1][1] * b[1][0],
            a[1][0] * b[0][1] + a[1][1] * b[1][1],
        )
    }

    pub fn scale(self, k: f64) -> Mat2 {
        Mat2::new(
            self.m[0][0] * k,
            self.m[0][1] * k,
            self.m[1][0] * k,
            self.m[1][1] * k,
        )
    }

    pub fn is_finite(&self) -> bool {
        self.m.iter().flatten().all(|v| v.is_finite())
    }

    /// Largest absolute entrywise difference.
    pub fn max_abs_diff(&self, other: &Mat2) -> f64 {
        self.m
            .iter()
            .flatten()
            .zip(other.m.iter().flatten())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Eigenvalues `(min, max)` of the symmetric part, in closed form.
    pub fn symmetric_eigenvalues(&self) -> (f64, f64) {
        let a = self.m[0][0];
        let d = self.m[1][1];
        let b = 0.5 * (self.m[0][1] + self.m[1][0]);
        let mean = 0.5 * (a + d);
        let radius = (0.5 * (a - d)).hypot(b);
        (mean - radius, mean + radius)
    }
}

impl Add for Mat2 {
    type Output = Mat2;
    fn add(self, o: Mat2) -> Mat2 {
        Mat2::new(
            self.m[0][0] + o.m[0][0],
            self.m[0][1] + o.m[0][1],
            self.m[1][0] + o.m[1][0],
            self.m[1][1] + o.m[1][1],
        )
    }
}

impl Sub for Mat2 {
    type Output = Mat2;
    fn sub(self, o: Mat2) -> Mat2 {
        self + o.scale(-1.0)
    }
}

/// Unit bearing from `agent` toward `beacon`.
pub fn bearing(agent: Vec2, beacon: Vec2) -> Result<Vec2> {
    let e = beacon - agent;
    let d = e.norm();
    if !(d > SINGULAR_DISTANCE) {
        return Err(Error::CoincidentPoints { separation: d });
    }
    Ok(e / d)
}

/// Orthogonal projection `I - g gᵀ` onto the complement of a unit vector.
pub fn projection(g: Vec2) -> Result<Mat2> {
    if !g.is_unit(UNIT_TOLERANCE) {
        return Err(Error::NotUnit { norm: g.norm() });
    }
    Ok(Mat2::IDENTITY - g.outer(g))
}

/// `Σ γᵢ gᵢ` evaluated at `agent`.
pub fn weighted_bearing_sum(agent: Vec2, beacons: &BeaconSet) -> Result<Vec2> {
    let mut sum = Vec2::ZERO;
    for (&p, &w) in beacons.positions().iter().zip(beacons.weights()) {
        sum += bearing(agent, p)? * w;
    }
    Ok(sum)
}

/// Beacon positions, positive weights and a common constant velocity.
///
/// The positions are those at `t = 0`; [`BeaconSet::position_at`] and
/// [`BeaconSet::at_time`] apply the constant-velocity drift.
#[derive(Debug, Clone, PartialEq)]
pub struct BeaconSet {
    positions: Vec<Vec2>,
    weights: Vec<f64>,
    velocity: Vec2,
}

impl BeaconSet {
    pub fn new(positions: Vec<Vec2>, weights: Vec<f64>, velocity: Vec2) -> Result<Self> {
        if positions.len() != weights.len() {
            return Err(Error::LengthMismatch {
                positions: positions.len(),
                weights: weights.len(),
            });
        }
        if positions.len() < 3 {
            return Err(Error::TooFewBeacons {
                count: positions.len(),
            });
        }
        if !positions.iter().all(|p| p.is_finite()) {
            return Err(Error::NonFinite {
                what: "beacon position",
            });
        }
        if !velocity.is_finite() {
            return Err(Error::NonFinite {
                what: "beacon velocity",
            });
        }
        for (index, &weight) in weights.iter().enumerate() {
            if !(weight > 0.0) || !weight.is_finite() {
                return Err(Error::NonPositiveWeight { index, weight });
            }
        }
        let ratio = singular_value_ratio(&positions);
        if !(ratio > COLLINEARITY_RATIO) {
            return Err(Error::Collinear { ratio });
        }
        Ok(BeaconSet {
            positions,
            weights,
            velocity,
        })
    }

    /// Stationary beacons with unit weights.
    pub fn uniform(positions: Vec<Vec2>) -> Result<Self> {
        let n = positions.len();
        BeaconSet::new(positions, vec![1.0; n], Vec2::ZERO)
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[Vec2] {
        &self.positions
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn velocity(&self) -> Vec2 {
        self.velocity
    }

    pub fn is_stationary(&self) -> bool {
        self.velocity == Vec2::ZERO
    }

    pub fn position_at(&self, index: usize, t: f64) -> Vec2 {
        self.positions[index] + self.velocity * t
    }

    /// The same set translated to its configuration at time `t`.
    pub fn at_time(&self, t: f64) -> BeaconSet {
        self.translated(self.velocity * t)
    }

    pub fn translated(&self, offset: Vec2) -> BeaconSet {
        BeaconSet {
            positions: self.positions.iter().map(|&p| p + offset).collect(),
            weights: self.weights.clone(),
            velocity: self.velocity,
        }
    }

    pub fn with_weights_scaled(&self, factor: f64) -> Result<BeaconSet> {
        BeaconSet::new(
            self.positions.clone(),
            self.weights.iter().map(|w| w * factor).collect(),
            self.velocity,
        )
    }

    pub fn with_velocity(&self, velocity: Vec2) -> BeaconSet {
        BeaconSet {
            velocity,
            ..self.clone()
        }
    }

    /// Smallest distance from `point` to any beacon (positions at `t = 0`).
    pub fn min_distance(&self, point: Vec2) -> f64 {
        self.positions
            .iter()
            .map(|&p| p.distance(point))
            .fold(f64::INFINITY, f64::min)
    }

    /// Axis-aligned bounding box `(min, max)` of the positions.
    pub fn bounding_box(&self) -> (Vec2, Vec2) {
        let mut lo = Vec2::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in &self.positions {
            lo = Vec2::new(lo.x.min(p.x), lo.y.min(p.y));
            hi = Vec2::new(hi.x.max(p.x), hi.y.max(p.y));
        }
        (lo, hi)
    }
}

/// Ratio of the smallest to the largest singular value of the centered 2×n
/// position matrix. Zero for collinear (or coincident) point sets.
pub fn singular_value_ratio(positions: &[Vec2]) -> f64 {
    if positions.is_empty() {
        return 0.0;
    }
    let n = positions.len() as f64;
    let centroid = positions.iter().fold(Vec2::ZERO, |acc, &p| acc + p) / n;
    let scatter = positions.iter().fold(Mat2::ZERO, |acc, &p| {
        let c = p - centroid;
        acc + c.outer(c)
    });
    let (lo, hi) = scatter.symmetric_eigenvalues();
    if !(hi > 0.0) {
        return 0.0;
    }
    (lo.max(0.0) / hi).sqrt()
}
