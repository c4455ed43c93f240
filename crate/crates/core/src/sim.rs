//! Closed-loop scenario execution.
//!
//! The agent pose and the compensator `φ` form one state vector advanced by
//! classical RK4, with the control law re-evaluated at every stage. Beacon
//! motion is analytic: bearings at time `t` are computed against the initial
//! beacon positions from the agent position shifted by `−v*·t`, which is the
//! same relative geometry.

use rayon::prelude::*;

use crate::control::{CompensatorState, ControllerKind};
use crate::dynamics::{wrap_angle, ControlCommand, UnicycleState};
use crate::error::{Error, Result};
use crate::fwlp::{self, FwSolution};
use crate::geometry::{weighted_bearing_sum, BeaconSet, Vec2, SINGULAR_DISTANCE};
use crate::lyapunov::{self, centered_difference, CertificateSample};

/// Error must stay below tolerance this long before convergence is declared (s).
pub const CONVERGENCE_DWELL: f64 = 1.0;

pub const DEFAULT_COLLISION_EPSILON: f64 = 1e-3;
pub const DEFAULT_CONVERGENCE_TOLERANCE: f64 = 1e-2;

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub label: String,
    pub beacons: BeaconSet,
    pub agent: UnicycleState,
    pub controller: ControllerKind,
    pub dt: f64,
    pub t_final: f64,
    pub collision_epsilon: f64,
    pub convergence_tolerance: f64,
    /// End the run once convergence is declared; otherwise run to `t_final`.
    pub stop_on_convergence: bool,
    /// Keep every `decimate`-th step in the log (the final sample is always kept).
    pub decimate: usize,
}

impl Scenario {
    pub fn new(
        label: impl Into<String>,
        beacons: BeaconSet,
        agent: UnicycleState,
        controller: ControllerKind,
        dt: f64,
        t_final: f64,
    ) -> Self {
        Scenario {
            label: label.into(),
            beacons,
            agent,
            controller,
            dt,
            t_final,
            collision_epsilon: DEFAULT_COLLISION_EPSILON,
            convergence_tolerance: DEFAULT_CONVERGENCE_TOLERANCE,
            stop_on_convergence: true,
            decimate: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite_pos = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(name, format!("must be positive and finite, got {v}")))
            }
        };
        finite_pos("dt", self.dt)?;
        finite_pos("t_final", self.t_final)?;
        finite_pos("collision_epsilon", self.collision_epsilon)?;
        finite_pos("convergence_tolerance", self.convergence_tolerance)?;
        if self.dt > self.t_final {
            return Err(Error::invalid("dt", "must not exceed t_final"));
        }
        if self.collision_epsilon < SINGULAR_DISTANCE {
            return Err(Error::invalid(
                "collision_epsilon",
                format!("must be at least {SINGULAR_DISTANCE:e}"),
            ));
        }
        if self.decimate == 0 {
            return Err(Error::invalid("decimate", "must be at least 1"));
        }
        if !self.agent.position.is_finite() || !self.agent.heading.is_finite() {
            return Err(Error::NonFinite { what: "agent state" });
        }
        if let ControllerKind::Moving { phi0, .. } = self.controller {
            if !phi0.is_finite() {
                return Err(Error::NonFinite { what: "phi0" });
            }
        }
        let separation = self.beacons.min_distance(self.agent.position);
        if separation < self.collision_epsilon {
            return Err(Error::CoincidentPoints { separation });
        }
        Ok(())
    }

    fn steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }
}

/// One logged instant. Column order matches the CSV log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub nu: f64,
    pub omega: f64,
    pub fw_x: f64,
    pub fw_y: f64,
    pub tracking_error: f64,
    pub v: f64,
    pub v_dot_analytic: f64,
    pub phi_x: f64,
    pub phi_y: f64,
    pub min_beacon_distance: f64,
}

impl Sample {
    pub const COLUMNS: [&'static str; 14] = [
        "t",
        "x",
        "y",
        "theta",
        "nu",
        "omega",
        "fw_x",
        "fw_y",
        "tracking_error",
        "V",
        "V_dot_analytic",
        "phi_x",
        "phi_y",
        "min_beacon_distance",
    ];

    pub fn to_array(&self) -> [f64; 14] {
        [
            self.t,
            self.x,
            self.y,
            self.theta,
            self.nu,
            self.omega,
            self.fw_x,
            self.fw_y,
            self.tracking_error,
            self.v,
            self.v_dot_analytic,
            self.phi_x,
            self.phi_y,
            self.min_beacon_distance,
        ]
    }

    pub fn from_array(a: [f64; 14]) -> Self {
        Sample {
            t: a[0],
            x: a[1],
            y: a[2],
            theta: a[3],
            nu: a[4],
            omega: a[5],
            fw_x: a[6],
            fw_y: a[7],
            tracking_error: a[8],
            v: a[9],
            v_dot_analytic: a[10],
            phi_x: a[11],
            phi_y: a[12],
            min_beacon_distance: a[13],
        }
    }

    pub fn position(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }

    pub fn phi(&self) -> Vec2 {
        Vec2::new(self.phi_x, self.phi_y)
    }

    pub fn command(&self) -> ControlCommand {
        ControlCommand::new(self.nu, self.omega)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Outcome {
    /// `t` is when the error entered the tolerance band for the last time.
    Converged { t: f64 },
    Timeout,
    Collision { t: f64 },
}

impl Outcome {
    pub fn name(&self) -> &'static str {
        match self {
            Outcome::Converged { .. } => "Converged",
            Outcome::Timeout => "Timeout",
            Outcome::Collision { .. } => "Collision",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogHeader {
    pub scenario: Scenario,
    pub solution: FwSolution,
    pub existence: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryLog {
    pub header: LogHeader,
    pub samples: Vec<Sample>,
    pub outcome: Outcome,
}

impl TrajectoryLog {
    pub fn last(&self) -> &Sample {
        self.samples.last().expect("a log always holds the initial sample")
    }

    pub fn final_error(&self) -> f64 {
        self.last().tracking_error
    }

    pub fn min_distance(&self) -> f64 {
        self.samples
            .iter()
            .map(|s| s.min_beacon_distance)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn convergence_time(&self) -> Option<f64> {
        match self.outcome {
            Outcome::Converged { t } => Some(t),
            _ => None,
        }
    }

    /// Monitor view of the log with centered-difference rates.
    pub fn certificate_samples(&self) -> Vec<CertificateSample> {
        let t: Vec<f64> = self.samples.iter().map(|s| s.t).collect();
        let v: Vec<f64> = self.samples.iter().map(|s| s.v).collect();
        let numeric = centered_difference(&t, &v);
        self.samples
            .iter()
            .zip(numeric)
            .map(|(s, v_dot_numeric)| CertificateSample {
                t: s.t,
                v: s.v,
                v_dot_analytic: s.v_dot_analytic,
                v_dot_numeric,
                min_beacon_distance: s.min_beacon_distance,
                tracking_error: s.tracking_error,
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct LoopState {
    position: Vec2,
    heading: f64,
    phi: Vec2,
}

impl LoopState {
    fn axpy(&self, k: f64, d: &LoopRate) -> LoopState {
        LoopState {
            position: self.position + d.position * k,
            heading: self.heading + d.heading * k,
            phi: self.phi + d.phi * k,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct LoopRate {
    position: Vec2,
    heading: f64,
    phi: Vec2,
}

struct ClosedLoop<'a> {
    beacons: &'a BeaconSet,
    controller: &'a ControllerKind,
    velocity: Vec2,
}

impl ClosedLoop<'_> {
    /// Agent position expressed against the beacons' initial placement.
    fn relative(&self, t: f64, position: Vec2) -> Vec2 {
        position - self.velocity * t
    }

    fn rate(&self, t: f64, s: &LoopState) -> Result<(LoopRate, ControlCommand)> {
        let sum = weighted_bearing_sum(self.relative(t, s.position), self.beacons)?;
        let h = Vec2::from_angle(s.heading);
        let comp = CompensatorState::new(s.phi);
        let cmd = self.controller.command(h, sum, &comp)?;
        let phi = self.controller.compensator_rate(h, sum, &comp)?;
        Ok((
            LoopRate {
                position: h * cmd.nu,
                heading: cmd.omega,
                phi,
            },
            cmd,
        ))
    }

    fn rk4(&self, t: f64, dt: f64, s: &LoopState) -> Result<LoopState> {
        let (k1, _) = self.rate(t, s)?;
        let (k2, _) = self.rate(t + 0.5 * dt, &s.axpy(0.5 * dt, &k1))?;
        let (k3, _) = self.rate(t + 0.5 * dt, &s.axpy(0.5 * dt, &k2))?;
        let (k4, _) = self.rate(t + dt, &s.axpy(dt, &k3))?;
        let w = dt / 6.0;
        Ok(LoopState {
            position: s.position + (k1.position + k2.position * 2.0 + k3.position * 2.0 + k4.position) * w,
            heading: wrap_angle(s.heading + (k1.heading + 2.0 * k2.heading + 2.0 * k3.heading + k4.heading) * w),
            phi: s.phi + (k1.phi + k2.phi * 2.0 + k3.phi * 2.0 + k4.phi) * w,
        })
    }

    fn sample(&self, t: f64, s: &LoopState, fw0: Vec2) -> Result<Sample> {
        let rel = self.relative(t, s.position);
        let (_, cmd) = self.rate(t, s)?;
        let h = Vec2::from_angle(s.heading);
        let comp = CompensatorState::new(s.phi);
        let (v, v_dot) = lyapunov::certificate(self.controller, rel, h, &comp, self.beacons, fw0)?;
        let fw = fw0 + self.velocity * t;
        Ok(Sample {
            t,
            x: s.position.x,
            y: s.position.y,
            theta: s.heading,
            nu: cmd.nu,
            omega: cmd.omega,
            fw_x: fw.x,
            fw_y: fw.y,
            tracking_error: s.position.distance(fw),
            v,
            v_dot_analytic: v_dot,
            phi_x: s.phi.x,
            phi_y: s.phi.y,
            min_beacon_distance: self.beacons.min_distance(rel),
        })
    }
}

/// Runs one scenario to completion.
pub fn run(scenario: &Scenario) -> Result<TrajectoryLog> {
    scenario.validate()?;
    let beacons = &scenario.beacons;
    let solution = fwlp::weiszfeld(beacons, fwlp::DEFAULT_TOL, fwlp::DEFAULT_MAX_ITER);
    if !solution.is_converged() {
        return Err(Error::SolverFailed {
            status: solution.status,
            residual: solution.residual,
        });
    }
    let header = LogHeader {
        scenario: scenario.clone(),
        solution,
        existence: fwlp::existence_check(beacons),
    };

    let sys = ClosedLoop {
        beacons,
        controller: &scenario.controller,
        velocity: beacons.velocity(),
    };
    let fw0 = solution.point;
    let dt = scenario.dt;
    let n_steps = scenario.steps();
    let mut state = LoopState {
        position: scenario.agent.position,
        heading: scenario.agent.heading,
        phi: scenario.controller.initial_compensator().phi,
    };
    let mut samples = Vec::with_capacity(n_steps / scenario.decimate + 2);
    let mut below_since: Option<f64> = None;
    let mut k = 0usize;

    let outcome = loop {
        let t = k as f64 * dt;
        let sample = match sys.sample(t, &state, fw0) {
            Ok(s) => s,
            Err(Error::CoincidentPoints { .. }) => break Outcome::Collision { t },
            Err(e) => return Err(e),
        };
        let keep = k.is_multiple_of(scenario.decimate);
        let is_last = k >= n_steps;

        if sample.min_beacon_distance < scenario.collision_epsilon {
            samples.push(sample);
            break Outcome::Collision { t };
        }

        if sample.tracking_error <= scenario.convergence_tolerance {
            below_since.get_or_insert(t);
        } else {
            below_since = None;
        }
        let dwelt = below_since.is_some_and(|t0| t - t0 >= CONVERGENCE_DWELL - 0.5 * dt);

        if (dwelt && scenario.stop_on_convergence) || is_last {
            samples.push(sample);
            break match below_since {
                Some(t0) if dwelt => Outcome::Converged { t: t0 },
                _ => Outcome::Timeout,
            };
        }
        if keep {
            samples.push(sample);
        }

        state = match sys.rk4(t, dt, &state) {
            Ok(s) => s,
            Err(Error::CoincidentPoints { .. }) => break Outcome::Collision { t: t + dt },
            Err(e) => return Err(e),
        };
        k += 1;
    };

    Ok(TrajectoryLog {
        header,
        samples,
        outcome,
    })
}

/// Parameter overrides applied on top of a base scenario.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Variation {
    pub label: Option<String>,
    pub beacons: Option<BeaconSet>,
    pub agent: Option<UnicycleState>,
    pub controller: Option<ControllerKind>,
    pub dt: Option<f64>,
    pub t_final: Option<f64>,
    pub collision_epsilon: Option<f64>,
    pub convergence_tolerance: Option<f64>,
    pub stop_on_convergence: Option<bool>,
    pub decimate: Option<usize>,
}

impl Variation {
    pub fn apply(&self, base: &Scenario) -> Scenario {
        Scenario {
            label: self.label.clone().unwrap_or_else(|| base.label.clone()),
            beacons: self.beacons.clone().unwrap_or_else(|| base.beacons.clone()),
            agent: self.agent.unwrap_or(base.agent),
            controller: self.controller.unwrap_or(base.controller),
            dt: self.dt.unwrap_or(base.dt),
            t_final: self.t_final.unwrap_or(base.t_final),
            collision_epsilon: self.collision_epsilon.unwrap_or(base.collision_epsilon),
            convergence_tolerance: self.convergence_tolerance.unwrap_or(base.convergence_tolerance),
            stop_on_convergence: self.stop_on_convergence.unwrap_or(base.stop_on_convergence),
            decimate: self.decimate.unwrap_or(base.decimate),
        }
    }
}

/// Runs independent scenarios concurrently; results keep the input order.
pub fn run_batch(scenarios: &[Scenario]) -> Vec<Result<TrajectoryLog>> {
    scenarios.par_iter().map(run).collect()
}

/// Runs every variation of `base`; per-variant failures are reported in place.
pub fn sweep(base: &Scenario, variations: &[Variation]) -> Vec<Result<TrajectoryLog>> {
    let scenarios: Vec<Scenario> = variations.iter().map(|v| v.apply(base)).collect();
    run_batch(&scenarios)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::{MovingGains, SaturationLimits, StationaryGains};
    use std::f64::consts::PI;

    fn square() -> BeaconSet {
        BeaconSet::uniform(vec![
            Vec2::new(-2.0, 2.0),
            Vec2::new(2.0, 2.0),
            Vec2::new(2.0, -2.0),
            Vec2::new(-2.0, -2.0),
        ])
        .unwrap()
    }

    fn stationary(agent: UnicycleState) -> Scenario {
        Scenario::new(
            "square",
            square(),
            agent,
            ControllerKind::Stationary(StationaryGains::new(0.5, 1.0).unwrap()),
            1e-2,
            60.0,
        )
    }

    #[test]
    fn converges_from_corner() {
        let log = run(&stationary(UnicycleState::new(Vec2::new(3.0, 3.0), PI))).unwrap();
        assert!(matches!(log.outcome, Outcome::Converged { .. }), "{:?}", log.outcome);
        assert!(log.final_error() < 1e-2);
    }

    #[test]
    fn equilibrium_at_fw_point() {
        let mut sc = stationary(UnicycleState::new(Vec2::ZERO, PI / 4.0));
        sc.stop_on_convergence = false;
        sc.t_final = 5.0;
        let log = run(&sc).unwrap();
        assert!(log.samples.iter().all(|s| s.tracking_error < 1e-9));
    }

    #[test]
    fn samples_are_evenly_spaced() {
        let mut sc = stationary(UnicycleState::new(Vec2::new(1.0, 0.5), 0.3));
        sc.stop_on_convergence = false;
        sc.t_final = 2.0;
        sc.decimate = 10;
        let log = run(&sc).unwrap();
        assert_eq!(log.samples.len(), 21);
        for (k, s) in log.samples.iter().enumerate() {
            assert_eq!(s.t, (k * 10) as f64 * 1e-2);
        }
    }

    #[test]
    fn saturated_commands_stay_in_limits() {
        let limits = SaturationLimits::new(0.05, 0.05, 0.5, 0.5).unwrap();
        let mut sc = stationary(UnicycleState::new(Vec2::new(1.0, -0.6), 2.0));
        sc.beacons = BeaconSet::uniform(square().positions().iter().map(|&p| p * 0.375).collect()).unwrap();
        sc.controller = ControllerKind::Saturated(limits);
        sc.t_final = 20.0;
        let log = run(&sc).unwrap();
        assert!(log.samples.iter().all(|s| limits.contains(s.command())));
    }

    #[test]
    fn rejects_agent_on_beacon() {
        let sc = stationary(UnicycleState::new(Vec2::new(2.0, 2.0), 0.0));
        assert!(matches!(run(&sc), Err(Error::CoincidentPoints { .. })));
    }

    #[test]
    fn rejects_bad_timing() {
        let mut sc = stationary(UnicycleState::new(Vec2::new(1.0, 0.0), 0.0));
        sc.dt = 100.0;
        assert!(matches!(run(&sc), Err(Error::InvalidParameter { .. })));
        sc.dt = -1.0;
        assert!(run(&sc).is_err());
    }

    #[test]
    fn collision_ends_the_run() {
        // straight at a beacon with a large collision radius
        let mut sc = stationary(UnicycleState::new(Vec2::new(3.0, 3.0), -3.0 * PI / 4.0));
        sc.collision_epsilon = 0.8;
        let log = run(&sc).unwrap();
        let Outcome::Collision { t } = log.outcome else {
            panic!("expected a collision, got {:?}", log.outcome)
        };
        assert_eq!(log.last().t, t);
        assert!(log.last().min_beacon_distance < 0.8);
        assert!(log.samples[..log.samples.len() - 1].iter().all(|s| s.min_beacon_distance >= 0.8));
    }

    #[test]
    fn moving_fallback_without_beacon_velocity() {
        let mut sc = stationary(UnicycleState::new(Vec2::new(1.0, 0.5), 0.3));
        sc.controller = ControllerKind::Moving {
            gains: MovingGains::new(1.0, 5.0, 1.0).unwrap(),
            phi0: Vec2::ZERO,
        };
        sc.t_final = 10.0;
        let log = run(&sc).unwrap();
        for w in log.samples.windows(2) {
            assert!(w[1].v <= w[0].v + 1e-8);
        }
    }

    #[test]
    fn sweep_keeps_order() {
        let mut base = stationary(UnicycleState::new(Vec2::new(1.0, 0.0), 0.0));
        // the k_p = 0.1 variant needs well over a minute
        base.t_final = 200.0;
        assert!(sweep(&base, &[]).is_empty());
        let variations: Vec<Variation> = [0.1, 0.5, 1.0, 2.0]
            .iter()
            .map(|&k_p| Variation {
                label: Some(format!("kp={k_p}")),
                controller: Some(ControllerKind::Stationary(StationaryGains::new(k_p, 1.0).unwrap())),
                ..Default::default()
            })
            .collect();
        let logs = sweep(&base, &variations);
        for (log, var) in logs.iter().zip(&variations) {
            let log = log.as_ref().unwrap();
            assert_eq!(Some(&log.header.scenario.label), var.label.as_ref());
            assert!(matches!(log.outcome, Outcome::Converged { .. }));
        }
    }
}
