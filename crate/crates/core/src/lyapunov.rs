//! Lyapunov certificates and the collision bound, evaluated numerically.
//!
//! `V₁ = Σ γᵢ eᵢᵀ(gᵢ − gᵢ*)` certifies both stationary laws and
//! `V₂ = V₁ + ‖φ − v*‖²/2k₃ + ‖v*‖‖h − h*‖²/2k₂` the moving-beacon law, where
//! `eᵢ = pᵢ − p`, `gᵢ*` is the bearing of beacon `i` seen from the Fermat–Weber
//! point and `h* = v*/‖v*‖`.

use crate::control::{saturation_factors, CompensatorState, ControllerKind, MovingGains, SaturationLimits};
use crate::error::{Error, Result};
use crate::geometry::{bearing, projection, weighted_bearing_sum, BeaconSet, Mat2, Vec2};

/// Eigenvalues at or below this are treated as a collinear degeneracy.
pub const POSITIVE_DEFINITE_TOL: f64 = 1e-12;

/// One monitored instant of a trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CertificateSample {
    pub t: f64,
    pub v: f64,
    pub v_dot_analytic: f64,
    /// Centered difference of `v`; `NaN` at the first and last samples.
    pub v_dot_numeric: f64,
    pub min_beacon_distance: f64,
    pub tracking_error: f64,
}

/// `Σ γᵢ eᵢᵀ(gᵢ − gᵢ*)` with the beacons where they are now and `fw` the
/// current Fermat–Weber point.
pub fn v1(agent: Vec2, beacons: &BeaconSet, fw: Vec2) -> Result<f64> {
    let mut v = 0.0;
    for (&p, &w) in beacons.positions().iter().zip(beacons.weights()) {
        let e = p - agent;
        let g = bearing(agent, p)?;
        let g_star = bearing(fw, p)?;
        v += w * e.dot(g - g_star);
    }
    Ok(v)
}

/// `−k_p (hᵀ Σγᵢgᵢ)²` along the stationary closed loop.
pub fn v1_dot_analytic(agent: Vec2, heading: Vec2, beacons: &BeaconSet, k_p: f64) -> Result<f64> {
    let along = heading.dot(weighted_bearing_sum(agent, beacons)?);
    Ok(-k_p * along * along)
}

/// `−κ (hᵀ Σγᵢgᵢ)²` along the saturated closed loop.
pub fn v1_dot_saturated(agent: Vec2, heading: Vec2, beacons: &BeaconSet, limits: &SaturationLimits) -> Result<f64> {
    let s = weighted_bearing_sum(agent, beacons)?;
    let (kappa, _) = saturation_factors(limits, heading, s)?;
    let along = heading.dot(s);
    Ok(-kappa * along * along)
}

/// `V₂` for the moving-beacon law; needs a non-zero beacon velocity.
pub fn v2(
    agent: Vec2,
    heading: Vec2,
    comp: &CompensatorState,
    beacons: &BeaconSet,
    fw: Vec2,
    gains: &MovingGains,
) -> Result<f64> {
    let v_star = beacons.velocity();
    let speed = v_star.norm();
    if !(speed > 0.0) {
        return Err(Error::ZeroTargetVelocity);
    }
    let h_star = v_star / speed;
    Ok(v1(agent, beacons, fw)?
        + (comp.phi - v_star).norm_squared() / (2.0 * gains.k3)
        + speed * (heading - h_star).norm_squared() / (2.0 * gains.k2))
}

/// `−k₁(hᵀ Σγᵢgᵢ)² − ((h⊥)ᵀφ)²`.
pub fn v2_dot_analytic(
    agent: Vec2,
    heading: Vec2,
    comp: &CompensatorState,
    beacons: &BeaconSet,
    k1: f64,
) -> Result<f64> {
    let along = heading.dot(weighted_bearing_sum(agent, beacons)?);
    let lateral = heading.perp().dot(comp.phi);
    Ok(-k1 * along * along - lateral * lateral)
}

/// `|Σ γᵢ gᵢᵀ P_{gᵢ} ėᵢ|` with `ėᵢ = −agent_velocity`; zero up to rounding,
/// which is why `eᵀW ġ` drops out of `V̇₁`.
pub fn orthogonality_residual(agent_velocity: Vec2, beacons: &BeaconSet, agent: Vec2) -> Result<f64> {
    let e_dot = -agent_velocity;
    let mut total = 0.0;
    for (&p, &w) in beacons.positions().iter().zip(beacons.weights()) {
        let g = bearing(agent, p)?;
        total += w * g.dot(projection(g)?.mul_vec(e_dot));
    }
    Ok(total.abs())
}

/// Residuals `(|hᵀ Σγᵢgᵢ|, |(h⊥)ᵀφ|)` of the moving-beacon invariant set.
pub fn invariant_residuals(
    agent: Vec2,
    heading: Vec2,
    comp: &CompensatorState,
    beacons: &BeaconSet,
) -> Result<(f64, f64)> {
    let s = weighted_bearing_sum(agent, beacons)?;
    Ok((heading.dot(s).abs(), heading.perp().dot(comp.phi).abs()))
}

/// Certificate value and its analytic rate for the law in `controller`.
///
/// For the moving-beacon law with stationary beacons the heading term of `V₂`
/// carries zero weight and is dropped, leaving `V₁ + ‖φ‖²/2k₃`.
pub fn certificate(
    controller: &ControllerKind,
    agent: Vec2,
    heading: Vec2,
    comp: &CompensatorState,
    beacons: &BeaconSet,
    fw: Vec2,
) -> Result<(f64, f64)> {
    match controller {
        ControllerKind::Stationary(g) => Ok((
            v1(agent, beacons, fw)?,
            v1_dot_analytic(agent, heading, beacons, g.k_p)?,
        )),
        ControllerKind::Saturated(l) => Ok((
            v1(agent, beacons, fw)?,
            v1_dot_saturated(agent, heading, beacons, l)?,
        )),
        ControllerKind::Moving { gains, .. } => {
            let v = match v2(agent, heading, comp, beacons, fw, gains) {
                Err(Error::ZeroTargetVelocity) => {
                    v1(agent, beacons, fw)? + comp.phi.norm_squared() / (2.0 * gains.k3)
                }
                other => other?,
            };
            Ok((v, v2_dot_analytic(agent, heading, comp, beacons, gains.k1)?))
        }
    }
}

/// Quantities of the sufficient collision-avoidance condition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollisionCertificate {
    /// Smallest eigenvalue of `Σ γᵢ P_{gᵢ*}`.
    pub lambda_min: f64,
    /// `2β/λ_min` with `β` the initial certificate value.
    pub sigma: f64,
    /// Radius around the Fermat–Weber point the agent cannot leave.
    pub xi: f64,
    pub min_dstar: f64,
    pub max_dstar: f64,
    /// `xi < min_dstar`.
    pub guaranteed: bool,
}

impl CollisionCertificate {
    /// Lower bound on the agent's distance to any beacon when `guaranteed`.
    pub fn clearance(&self) -> f64 {
        self.min_dstar - self.xi
    }

    /// Lower bound on `V₁` at distance `r` from the Fermat–Weber point.
    pub fn v1_lower_bound(&self, r: f64) -> f64 {
        self.lambda_min * r * r / (2.0 * (r + self.max_dstar))
    }
}

/// `Σ γᵢ P_{gᵢ*}` at the Fermat–Weber point `fw`.
pub fn fw_projection_sum(beacons: &BeaconSet, fw: Vec2) -> Result<Mat2> {
    let mut m = Mat2::ZERO;
    for (&p, &w) in beacons.positions().iter().zip(beacons.weights()) {
        m = m + projection(bearing(fw, p)?)?.scale(w);
    }
    Ok(m)
}

fn dstar_range(beacons: &BeaconSet, fw: Vec2) -> (f64, f64) {
    beacons
        .positions()
        .iter()
        .map(|&p| p.distance(fw))
        .fold((f64::INFINITY, 0.0), |(lo, hi), d| (lo.min(d), hi.max(d)))
}

fn positive_lambda_min(beacons: &BeaconSet, fw: Vec2) -> Result<f64> {
    let (lambda_min, _) = fw_projection_sum(beacons, fw)?.symmetric_eigenvalues();
    if !(lambda_min > POSITIVE_DEFINITE_TOL) {
        return Err(Error::NotPositiveDefinite { lambda_min });
    }
    Ok(lambda_min)
}

pub fn collision_certificate(initial_v: f64, beacons: &BeaconSet, fw: Vec2) -> Result<CollisionCertificate> {
    let lambda_min = positive_lambda_min(beacons, fw)?;
    let (min_dstar, max_dstar) = dstar_range(beacons, fw);
    let sigma = 2.0 * initial_v.max(0.0) / lambda_min;
    let xi = 0.5 * (sigma + (sigma * sigma + 4.0 * sigma * max_dstar).sqrt());
    Ok(CollisionCertificate {
        lambda_min,
        sigma,
        xi,
        min_dstar,
        max_dstar,
        guaranteed: xi < min_dstar,
    })
}

/// The initial value `β` at which `ξ` reaches the nearest beacon distance;
/// any smaller `V₁(0)` is certified collision-free.
pub fn collision_threshold(beacons: &BeaconSet, fw: Vec2) -> Result<f64> {
    let lambda_min = positive_lambda_min(beacons, fw)?;
    let (min_dstar, max_dstar) = dstar_range(beacons, fw);
    // ξ² − σξ − σD = 0 at ξ = min d*
    let sigma = min_dstar * min_dstar / (min_dstar + max_dstar);
    Ok(0.5 * sigma * lambda_min)
}

/// Centered differences `(vₖ₊₁ − vₖ₋₁)/(tₖ₊₁ − tₖ₋₁)`, `NaN` at both ends.
pub fn centered_difference(t: &[f64], v: &[f64]) -> Vec<f64> {
    let n = v.len();
    (0..n)
        .map(|k| {
            if k == 0 || k + 1 >= n {
                f64::NAN
            } else {
                (v[k + 1] - v[k - 1]) / (t[k + 1] - t[k - 1])
            }
        })
        .collect()
}
