//! Bearing-only control laws.
//!
//! Every law here sees only the agent's own heading `h`, the weighted bearing
//! sum `s = Σ γᵢ gᵢ` and, for moving beacons, the compensator state `φ`.
//! No position, range or velocity measurement enters any signature.

use serde::{Deserialize, Serialize};

use crate::dynamics::ControlCommand;
use crate::error::{Error, Result};
use crate::geometry::{Mat2, Vec2, UNIT_TOLERANCE};

fn positive(name: &str, value: f64) -> Result<f64> {
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(Error::invalid(name, format!("must be positive and finite, got {value}")))
    }
}

fn check_unit(h: Vec2) -> Result<()> {
    if h.is_unit(UNIT_TOLERANCE) {
        Ok(())
    } else {
        Err(Error::NotUnit { norm: h.norm() })
    }
}

/// Gains of the stationary-beacon law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StationaryGains {
    pub k_p: f64,
    pub k_h: f64,
}

impl StationaryGains {
    pub fn new(k_p: f64, k_h: f64) -> Result<Self> {
        Ok(StationaryGains {
            k_p: positive("k_p", k_p)?,
            k_h: positive("k_h", k_h)?,
        })
    }
}

/// Actuator limits: `−nu_b ≤ ν ≤ nu_f`, `−omega_r ≤ ω ≤ omega_l`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SaturationLimits {
    pub nu_b: f64,
    pub nu_f: f64,
    pub omega_r: f64,
    pub omega_l: f64,
}

impl SaturationLimits {
    pub fn new(nu_b: f64, nu_f: f64, omega_r: f64, omega_l: f64) -> Result<Self> {
        Ok(SaturationLimits {
            nu_b: positive("nu_b", nu_b)?,
            nu_f: positive("nu_f", nu_f)?,
            omega_r: positive("omega_r", omega_r)?,
            omega_l: positive("omega_l", omega_l)?,
        })
    }

    pub fn contains(&self, cmd: ControlCommand) -> bool {
        -self.nu_b <= cmd.nu
            && cmd.nu <= self.nu_f
            && -self.omega_r <= cmd.omega
            && cmd.omega <= self.omega_l
    }
}

/// Gains of the moving-beacon law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MovingGains {
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
}

impl MovingGains {
    pub fn new(k1: f64, k2: f64, k3: f64) -> Result<Self> {
        Ok(MovingGains {
            k1: positive("k1", k1)?,
            k2: positive("k2", k2)?,
            k3: positive("k3", k3)?,
        })
    }
}

/// Internal state `φ` of the moving-beacon law; tends to the beacon velocity.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CompensatorState {
    pub phi: Vec2,
}

impl CompensatorState {
    pub fn new(phi: Vec2) -> Self {
        CompensatorState { phi }
    }
}

/// `ν = k_p hᵀs`, `ω = k_h (h⊥)ᵀs`.
pub fn control_stationary(gains: &StationaryGains, heading: Vec2, bearings: Vec2) -> Result<ControlCommand> {
    check_unit(heading)?;
    Ok(ControlCommand::new(
        gains.k_p * heading.dot(bearings),
        gains.k_h * heading.perp().dot(bearings),
    ))
}

pub fn sat_nu(limits: &SaturationLimits, x: f64) -> f64 {
    x.clamp(-limits.nu_b, limits.nu_f)
}

pub fn sat_omega(limits: &SaturationLimits, x: f64) -> f64 {
    x.clamp(-limits.omega_r, limits.omega_l)
}

/// `ν = sat_ν(hᵀs)`, `ω = sat_ω((h⊥)ᵀs)`.
pub fn control_saturated(limits: &SaturationLimits, heading: Vec2, bearings: Vec2) -> Result<ControlCommand> {
    check_unit(heading)?;
    Ok(ControlCommand::new(
        sat_nu(limits, heading.dot(bearings)),
        sat_omega(limits, heading.perp().dot(bearings)),
    ))
}

fn factor(x: f64, lower: f64, upper: f64) -> f64 {
    if x < -lower {
        -lower / x
    } else if x > upper {
        upper / x
    } else {
        1.0
    }
}

/// Multipliers `(κ, ρ)` with `sat_ν(hᵀs) = κ hᵀs` and `sat_ω((h⊥)ᵀs) = ρ (h⊥)ᵀs`.
///
/// Both lie in `(0, 1]` and are exactly 1 inside the bands (including a zero
/// raw input).
pub fn saturation_factors(limits: &SaturationLimits, heading: Vec2, bearings: Vec2) -> Result<(f64, f64)> {
    check_unit(heading)?;
    let kappa = factor(heading.dot(bearings), limits.nu_b, limits.nu_f);
    let rho = factor(heading.perp().dot(bearings), limits.omega_r, limits.omega_l);
    Ok((kappa, rho))
}

/// `ν = hᵀ(k₁s + φ)`, `ω = k₂(h⊥)ᵀ(s + φ)`.
pub fn control_moving(
    gains: &MovingGains,
    heading: Vec2,
    bearings: Vec2,
    comp: &CompensatorState,
) -> Result<ControlCommand> {
    check_unit(heading)?;
    Ok(ControlCommand::new(
        gains.k1 * heading.dot(bearings) + heading.dot(comp.phi),
        gains.k2 * (heading.perp().dot(bearings) + heading.perp().dot(comp.phi)),
    ))
}

/// `φ̇ = k₃(h hᵀ s − (I − h hᵀ) φ)`.
pub fn compensator_derivative(
    gains: &MovingGains,
    heading: Vec2,
    bearings: Vec2,
    comp: &CompensatorState,
) -> Result<Vec2> {
    check_unit(heading)?;
    let hh = heading.outer(heading);
    let along = hh.mul_vec(bearings);
    let leak = (Mat2::IDENTITY - hh).mul_vec(comp.phi);
    Ok((along - leak) * gains.k3)
}

/// The control law driving a run, with its parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ControllerKind {
    Stationary(StationaryGains),
    Saturated(SaturationLimits),
    /// Moving-beacon law; `phi0` is the initial compensator state.
    Moving { gains: MovingGains, phi0: Vec2 },
}

impl ControllerKind {
    pub fn name(&self) -> &'static str {
        match self {
            ControllerKind::Stationary(_) => "stationary",
            ControllerKind::Saturated(_) => "saturated",
            ControllerKind::Moving { .. } => "moving",
        }
    }

    pub fn initial_compensator(&self) -> CompensatorState {
        match self {
            ControllerKind::Moving { phi0, .. } => CompensatorState::new(*phi0),
            _ => CompensatorState::default(),
        }
    }

    /// Command for heading `h`, bearing sum `s` and compensator `comp`.
    pub fn command(&self, heading: Vec2, bearings: Vec2, comp: &CompensatorState) -> Result<ControlCommand> {
        match self {
            ControllerKind::Stationary(g) => control_stationary(g, heading, bearings),
            ControllerKind::Saturated(l) => control_saturated(l, heading, bearings),
            ControllerKind::Moving { gains, .. } => control_moving(gains, heading, bearings, comp),
        }
    }

    /// `φ̇`; identically zero for the laws without a compensator.
    pub fn compensator_rate(&self, heading: Vec2, bearings: Vec2, comp: &CompensatorState) -> Result<Vec2> {
        match self {
            ControllerKind::Moving { gains, .. } => compensator_derivative(gains, heading, bearings, comp),
            _ => Ok(Vec2::ZERO),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const X: Vec2 = Vec2::new(1.0, 0.0);

    fn desk_limits() -> SaturationLimits {
        SaturationLimits::new(0.05, 0.05, 0.5, 0.5).unwrap()
    }

    #[test]
    fn stationary_examples() {
        let g = StationaryGains::new(0.5, 1.0).unwrap();
        assert_eq!(control_stationary(&g, X, Vec2::ZERO).unwrap(), ControlCommand::ZERO);
        assert_eq!(
            control_stationary(&g, X, Vec2::new(2.0, 0.0)).unwrap(),
            ControlCommand::new(1.0, 0.0)
        );
        assert_eq!(
            control_stationary(&g, X, Vec2::new(0.0, 3.0)).unwrap(),
            ControlCommand::new(0.0, 3.0)
        );
        assert!(matches!(
            control_stationary(&g, Vec2::new(2.0, 0.0), Vec2::ZERO),
            Err(Error::NotUnit { .. })
        ));
    }

    #[test]
    fn gains_must_be_positive() {
        assert!(StationaryGains::new(0.0, 1.0).is_err());
        assert!(MovingGains::new(1.0, -5.0, 1.0).is_err());
        assert!(SaturationLimits::new(0.05, 0.05, f64::NAN, 0.5).is_err());
    }

    #[test]
    fn saturation_examples() {
        let l = desk_limits();
        assert_eq!(sat_nu(&l, 0.1), 0.05);
        assert_eq!(sat_nu(&l, 0.0), 0.0);
        assert_eq!(sat_nu(&l, -0.2), -0.05);
        assert_eq!(sat_omega(&l, 1.2), 0.5);
        assert_eq!(sat_omega(&l, 0.3), 0.3);
        assert_eq!(sat_omega(&l, -0.7), -0.5);
    }

    #[test]
    fn saturated_examples() {
        let l = desk_limits();
        assert_eq!(control_saturated(&l, X, Vec2::ZERO).unwrap(), ControlCommand::ZERO);
        assert_eq!(
            control_saturated(&l, X, Vec2::new(4.0, 0.0)).unwrap(),
            ControlCommand::new(0.05, 0.0)
        );
        let s = Vec2::new(0.03, -0.2);
        let unit = StationaryGains::new(1.0, 1.0).unwrap();
        assert_eq!(
            control_saturated(&l, X, s).unwrap(),
            control_stationary(&unit, X, s).unwrap()
        );
    }

    #[test]
    fn factor_examples() {
        let l = desk_limits();
        let (k, r) = saturation_factors(&l, X, Vec2::new(0.02, 0.0)).unwrap();
        assert_eq!((k, r), (1.0, 1.0));
        let (k, _) = saturation_factors(&l, X, Vec2::new(0.1, 0.0)).unwrap();
        assert!((k - 0.5).abs() < 1e-15);
        let (_, r) = saturation_factors(&l, X, Vec2::new(0.0, -1.0)).unwrap();
        assert!((r - 0.5).abs() < 1e-15);
    }

    #[test]
    fn moving_examples() {
        let g = MovingGains::new(1.0, 5.0, 1.0).unwrap();
        let v = Vec2::new(0.1, 0.1);
        let h = v / v.norm();
        let c = control_moving(&g, h, Vec2::ZERO, &CompensatorState::new(v)).unwrap();
        assert!((c.nu - v.norm()).abs() < 1e-15);
        assert!(c.omega.abs() < 1e-15);

        let c = control_moving(
            &g,
            X,
            Vec2::new(0.2, 0.4),
            &CompensatorState::new(Vec2::new(0.1, 0.1)),
        )
        .unwrap();
        assert!((c.nu - 0.3).abs() < 1e-15);
        assert!((c.omega - 2.5).abs() < 1e-14);
    }

    #[test]
    fn compensator_examples() {
        let g = MovingGains::new(1.0, 5.0, 1.0).unwrap();
        let d = compensator_derivative(&g, X, Vec2::ZERO, &CompensatorState::new(Vec2::new(0.3, 0.0))).unwrap();
        assert_eq!(d, Vec2::ZERO);
        let d = compensator_derivative(&g, X, Vec2::new(1.0, 1.0), &CompensatorState::default()).unwrap();
        assert_eq!(d, Vec2::new(1.0, 0.0));
        let d = compensator_derivative(&g, X, Vec2::ZERO, &CompensatorState::new(Vec2::new(0.0, 1.0))).unwrap();
        assert_eq!(d, Vec2::new(0.0, -1.0));
    }
}
