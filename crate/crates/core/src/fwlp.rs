//! Ground-truth Fermat–Weber point.
//!
//! The Weiszfeld fixed-point iteration, with a safeguarded Newton step, is the
//! reference solver; an exhaustive grid search provides an independent
//! cross-check. Neither is ever used as feedback by the controllers.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::geometry::{weighted_bearing_sum, BeaconSet, Mat2, Vec2, SINGULAR_DISTANCE};

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Converged,
    /// The minimiser is a beacon: the pull of the other beacons does not
    /// exceed that beacon's own weight.
    BeaconOptimal,
    MaxIterations,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FwSolution {
    pub point: Vec2,
    /// `‖Σ γᵢ gᵢ‖` at `point`; zero for [`SolveStatus::BeaconOptimal`], where
    /// zero lies in the subdifferential.
    pub residual: f64,
    pub iterations: usize,
    pub status: SolveStatus,
    /// Index of the optimal beacon when `status` is `BeaconOptimal`.
    pub beacon: Option<usize>,
}

impl FwSolution {
    pub fn is_converged(&self) -> bool {
        self.status == SolveStatus::Converged
    }
}

/// `Σ γᵢ ‖p − pᵢ‖`.
pub fn objective(point: Vec2, beacons: &BeaconSet) -> f64 {
    beacons
        .positions()
        .iter()
        .zip(beacons.weights())
        .map(|(&p, &w)| w * p.distance(point))
        .sum()
}

/// Resultant pull of every other beacon at beacon `k`:
/// `Σ_{i≠k} γᵢ (pᵢ − p_k)/‖pᵢ − p_k‖`.
fn pull_at_beacon(beacons: &BeaconSet, k: usize) -> Vec2 {
    let pk = beacons.positions()[k];
    beacons
        .positions()
        .iter()
        .zip(beacons.weights())
        .enumerate()
        .filter(|&(i, _)| i != k)
        .fold(Vec2::ZERO, |acc, (_, (&p, &w))| {
            let e = p - pk;
            let d = e.norm();
            if d > 0.0 {
                acc + e * (w / d)
            } else {
                acc
            }
        })
}

/// Left-hand side of the existence inequality at each beacon.
pub fn existence_margins(beacons: &BeaconSet) -> Vec<f64> {
    (0..beacons.len())
        .map(|k| pull_at_beacon(beacons, k).norm())
        .collect()
}

/// Entry `k` is true when the pull of the other beacons at beacon `k`
/// strictly exceeds `γ_k`. All-true certifies a unique minimiser that is
/// distinct from every beacon.
pub fn existence_check(beacons: &BeaconSet) -> Vec<bool> {
    existence_margins(beacons)
        .into_iter()
        .zip(beacons.weights())
        .map(|(lhs, &w)| lhs > w)
        .collect()
}

/// `‖Σ γᵢ gᵢ(point)‖`.
pub fn optimality_residual(point: Vec2, beacons: &BeaconSet) -> Result<f64> {
    Ok(weighted_bearing_sum(point, beacons)?.norm())
}

/// Weiszfeld iteration from the weighted centroid.
pub fn weiszfeld(beacons: &BeaconSet, tol: f64, max_iter: usize) -> FwSolution {
    weiszfeld_observed(beacons, tol, max_iter, |_| {})
}

/// As [`weiszfeld`], calling `observe` with every iterate (the start point included).
pub fn weiszfeld_observed(
    beacons: &BeaconSet,
    tol: f64,
    max_iter: usize,
    mut observe: impl FnMut(Vec2),
) -> FwSolution {
    let total_weight: f64 = beacons.weights().iter().sum();
    let mut p = beacons
        .positions()
        .iter()
        .zip(beacons.weights())
        .fold(Vec2::ZERO, |acc, (&q, &w)| acc + q * w)
        / total_weight;
    let mut residual = f64::INFINITY;

    // The inequality at a beacon does not depend on the iterate, so a beacon
    // that fails it is the minimiser and there is nothing to iterate.
    if let Some(k) = existence_check(beacons).iter().position(|&ok| !ok) {
        let pk = beacons.positions()[k];
        observe(pk);
        return FwSolution {
            point: pk,
            residual: 0.0,
            iterations: 0,
            status: SolveStatus::BeaconOptimal,
            beacon: Some(k),
        };
    }

    for iteration in 0..=max_iter {
        observe(p);

        if let Some(k) = nearest_within(beacons, p, SINGULAR_DISTANCE) {
            let pull = pull_at_beacon(beacons, k);
            let pk = beacons.positions()[k];
            if pull.norm() <= beacons.weights()[k] {
                return FwSolution {
                    point: pk,
                    residual: 0.0,
                    iterations: iteration,
                    status: SolveStatus::BeaconOptimal,
                    beacon: Some(k),
                };
            }
            // move off the beacon along the descent direction and keep going
            p = pk + pull * (10.0 * SINGULAR_DISTANCE / pull.norm());
            continue;
        }

        let mut sum = Vec2::ZERO;
        let mut inv_dist = 0.0;
        let mut hessian = Mat2::ZERO;
        for (&q, &w) in beacons.positions().iter().zip(beacons.weights()) {
            let e = q - p;
            let d = e.norm();
            let g = e / d;
            sum += g * w;
            inv_dist += w / d;
            hessian = hessian + (Mat2::IDENTITY - g.outer(g)).scale(w / d);
        }
        residual = sum.norm();
        if residual <= tol {
            let (point, residual) = polish(beacons, p, residual, newton_step(&hessian, sum));
            return FwSolution {
                point,
                residual,
                iterations: iteration,
                status: SolveStatus::Converged,
                beacon: None,
            };
        }
        if iteration == max_iter {
            break;
        }
        p = descend(beacons, p, sum / inv_dist, newton_step(&hessian, sum));
    }

    FwSolution {
        point: p,
        residual,
        iterations: max_iter,
        status: SolveStatus::MaxIterations,
        beacon: None,
    }
}

/// `H⁻¹ s`, the Newton step on the objective, or `None` if `H` is singular.
fn newton_step(h: &Mat2, s: Vec2) -> Option<Vec2> {
    let [[a, b], [c, d]] = h.m;
    let det = a * d - b * c;
    if !(det.abs() > f64::EPSILON * (a * d).abs()) {
        return None;
    }
    let step = Vec2::new(d * s.x - b * s.y, a * s.y - c * s.x) / det;
    step.is_finite().then_some(step)
}

/// Weiszfeld step, replaced by the Newton step when that lowers the objective
/// further. Plain Weiszfeld is linear with a ratio near 1 when the minimiser
/// sits close to a nearly dominant beacon.
fn descend(beacons: &BeaconSet, p: Vec2, weiszfeld: Vec2, newton: Option<Vec2>) -> Vec2 {
    let pw = p + weiszfeld;
    match newton {
        Some(step) => {
            let pn = p + step;
            if objective(pn, beacons) < objective(pw, beacons) {
                pn
            } else {
                pw
            }
        }
        None => pw,
    }
}

/// Newton steps past convergence, kept while they lower the residual. Near
/// the minimiser the objective is flat to rounding, so only the residual is
/// compared.
fn polish(beacons: &BeaconSet, mut p: Vec2, mut residual: f64, newton: Option<Vec2>) -> (Vec2, f64) {
    let mut step = newton;
    for _ in 0..3 {
        let Some(dp) = step else { break };
        let pn = p + dp;
        if nearest_within(beacons, pn, SINGULAR_DISTANCE).is_some() {
            break;
        }
        let (s, h) = gradient_and_hessian(beacons, pn);
        let rn = s.norm();
        if !(rn < residual) {
            break;
        }
        (p, residual) = (pn, rn);
        step = newton_step(&h, s);
    }
    (p, residual)
}

/// `Σ γᵢ gᵢ` and the objective's Hessian `Σ γᵢ/dᵢ (I − gᵢgᵢᵀ)` at `p`.
fn gradient_and_hessian(beacons: &BeaconSet, p: Vec2) -> (Vec2, Mat2) {
    let mut sum = Vec2::ZERO;
    let mut hessian = Mat2::ZERO;
    for (&q, &w) in beacons.positions().iter().zip(beacons.weights()) {
        let e = q - p;
        let d = e.norm();
        let g = e / d;
        sum += g * w;
        hessian = hessian + (Mat2::IDENTITY - g.outer(g)).scale(w / d);
    }
    (sum, hessian)
}

fn nearest_within(beacons: &BeaconSet, p: Vec2, radius: f64) -> Option<usize> {
    beacons
        .positions()
        .iter()
        .position(|&q| q.distance(p) <= radius)
}

/// Fermat–Weber point at time `t` for beacons drifting with common velocity.
///
/// A common translation leaves the relative geometry, and hence the
/// minimiser's offset from the beacons, unchanged.
pub fn fw_point_at_time(initial: &FwSolution, velocity: Vec2, t: f64) -> Vec2 {
    initial.point + velocity * t
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridMinimum {
    pub point: Vec2,
    pub value: f64,
    pub resolution: f64,
}

/// Exhaustive grid search of the objective over the beacons' bounding box
/// scaled by `1 + inflate` about its centre.
pub fn grid_minimizer(beacons: &BeaconSet, resolution: f64, inflate: f64) -> GridMinimum {
    let (lo, hi) = beacons.bounding_box();
    let centre = (lo + hi) * 0.5;
    let half = (hi - lo) * (0.5 * (1.0 + inflate));
    let lo = centre - half;
    let nx = ((2.0 * half.x) / resolution).ceil() as usize + 1;
    let ny = ((2.0 * half.y) / resolution).ceil() as usize + 1;
    let xs: Vec<f64> = (0..nx).map(|i| lo.x + i as f64 * resolution).collect();

    let (value, point) = (0..ny)
        .into_par_iter()
        .map_init(
            || vec![0.0; nx],
            |row, j| {
                let y = lo.y + j as f64 * resolution;
                row.fill(0.0);
                // beacon-outer loop keeps the inner loop branch-free
                for (&q, &w) in beacons.positions().iter().zip(beacons.weights()) {
                    let dy2 = (y - q.y) * (y - q.y);
                    for (acc, &x) in row.iter_mut().zip(&xs) {
                        let dx = x - q.x;
                        *acc += w * (dx * dx + dy2).sqrt();
                    }
                }
                let (i, &f) = row
                    .iter()
                    .enumerate()
                    .min_by(|a, b| a.1.total_cmp(b.1))
                    .expect("grid rows are non-empty");
                (f, Vec2::new(xs[i], y))
            },
        )
        .reduce(
            || (f64::INFINITY, Vec2::ZERO),
            |a, b| if b.0 < a.0 { b } else { a },
        );
    GridMinimum {
        point,
        value,
        resolution,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square() -> BeaconSet {
        BeaconSet::uniform(vec![
            Vec2::new(-2.0, 2.0),
            Vec2::new(2.0, 2.0),
            Vec2::new(2.0, -2.0),
            Vec2::new(-2.0, -2.0),
        ])
        .unwrap()
    }

    #[test]
    fn square_existence_margins() {
        let margins = existence_margins(&square());
        for m in &margins {
            assert!((m - (1.0 + 2f64.sqrt())).abs() < 1e-12);
        }
        assert!(existence_check(&square()).iter().all(|&b| b));
    }

    #[test]
    fn dominant_weight_fails_existence() {
        let b = BeaconSet::new(
            vec![Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0)],
            vec![10.0, 1.0, 1.0],
            Vec2::ZERO,
        )
        .unwrap();
        assert_eq!(existence_check(&b), vec![false, true, true]);
    }

    #[test]
    fn regular_polygons_pass_existence() {
        for n in 3..=5 {
            let pts = (0..n)
                .map(|k| Vec2::from_angle(2.0 * std::f64::consts::PI * k as f64 / n as f64) * 1.7)
                .collect();
            let b = BeaconSet::uniform(pts).unwrap();
            assert!(existence_check(&b).iter().all(|&x| x), "n = {n}");
        }
    }

    #[test]
    fn square_solution_is_centre() {
        let s = weiszfeld(&square(), 1e-10, DEFAULT_MAX_ITER);
        assert_eq!(s.status, SolveStatus::Converged);
        assert!(s.point.norm() < 1e-10);
        assert!(optimality_residual(s.point, &square()).unwrap() < 1e-10);
        assert!(optimality_residual(Vec2::new(2.0, 0.0), &square()).unwrap() > 0.1);
    }

    #[test]
    fn dominant_beacon_is_optimal() {
        let b = BeaconSet::new(
            vec![Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0)],
            vec![5.0, 1.0, 1.0],
            Vec2::ZERO,
        )
        .unwrap();
        let s = weiszfeld(&b, 1e-10, DEFAULT_MAX_ITER);
        assert_eq!(s.status, SolveStatus::BeaconOptimal);
        assert_eq!(s.beacon, Some(0));
        assert_eq!(s.point, Vec2::ZERO);
    }

    #[test]
    fn asymmetric_triangle_matches_grid() {
        let b = BeaconSet::uniform(vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(4.0, 0.0),
            Vec2::new(1.0, 3.0),
        ])
        .unwrap();
        let s = weiszfeld(&b, 1e-10, DEFAULT_MAX_ITER);
        assert!(s.is_converged());
        let g = grid_minimizer(&b, 1e-3, 0.5);
        assert!(s.point.distance(g.point) < 2e-3, "{:?} vs {:?}", s.point, g.point);
    }

    #[test]
    fn max_iterations_is_reported() {
        let b = BeaconSet::uniform(vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(4.0, 0.0),
            Vec2::new(1.0, 3.0),
        ])
        .unwrap();
        let s = weiszfeld(&b, 1e-300, 3);
        assert_eq!(s.status, SolveStatus::MaxIterations);
        assert_eq!(s.iterations, 3);
        assert!(s.residual > 0.0);
    }

    #[test]
    fn moving_point_translates() {
        let s = weiszfeld(&square(), 1e-10, DEFAULT_MAX_ITER);
        let p = fw_point_at_time(&s, Vec2::new(0.1, 0.1), 10.0);
        assert!((p - Vec2::new(1.0, 1.0)).norm() < 1e-9);
        assert_eq!(fw_point_at_time(&s, Vec2::ZERO, 123.0), s.point);
    }
}
