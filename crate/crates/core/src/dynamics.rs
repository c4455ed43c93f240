//! Kinematic unicycle and its fixed-step integrator.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::geometry::Vec2;

/// Wraps an angle into `(−π, π]`.
pub fn wrap_angle(theta: f64) -> f64 {
    let w = (theta + PI).rem_euclid(TAU) - PI;
    if w <= -PI {
        w + TAU
    } else {
        w
    }
}

/// Planar position and heading angle. The heading is kept wrapped to `(−π, π]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnicycleState {
    pub position: Vec2,
    pub heading: f64,
}

impl UnicycleState {
    pub fn new(position: Vec2, heading: f64) -> Self {
        UnicycleState {
            position,
            heading: wrap_angle(heading),
        }
    }

    /// `h = (cos θ, sin θ)`.
    pub fn heading_vector(&self) -> Vec2 {
        Vec2::from_angle(self.heading)
    }

    /// `h⊥ = (−sin θ, cos θ)`.
    pub fn heading_perp(&self) -> Vec2 {
        let (s, c) = self.heading.sin_cos();
        Vec2::new(-s, c)
    }
}

/// Linear speed `nu` (m/s) and angular rate `omega` (rad/s).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ControlCommand {
    pub nu: f64,
    pub omega: f64,
}

impl ControlCommand {
    pub const ZERO: ControlCommand = ControlCommand {
        nu: 0.0,
        omega: 0.0,
    };

    pub fn new(nu: f64, omega: f64) -> Self {
        ControlCommand { nu, omega }
    }

    pub fn is_finite(&self) -> bool {
        self.nu.is_finite() && self.omega.is_finite()
    }
}

pub fn heading_vector(state: &UnicycleState) -> Vec2 {
    state.heading_vector()
}

pub fn heading_perp(state: &UnicycleState) -> Vec2 {
    state.heading_perp()
}

/// `(ṗ, θ̇) = (ν h, ω)`.
pub fn derivative(state: &UnicycleState, cmd: ControlCommand) -> (Vec2, f64) {
    (state.heading_vector() * cmd.nu, cmd.omega)
}

/// One classical RK4 step with the command held over the interval.
pub fn step(state: &UnicycleState, cmd: ControlCommand, dt: f64) -> UnicycleState {
    let eval = |heading: f64| Vec2::from_angle(heading) * cmd.nu;
    let th = state.heading;
    let k1 = eval(th);
    let k2 = eval(th + 0.5 * dt * cmd.omega);
    let k3 = k2;
    let k4 = eval(th + dt * cmd.omega);
    let dp = (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
    UnicycleState::new(state.position + dp, th + dt * cmd.omega)
}
