//! SVG rendering of a trajectory log.
//!
//! Three panels side by side: the plane (beacons, agent path, target track),
//! tracking error against time, and the commands against time.

use std::ops::Range;

use plotters::prelude::*;

use crate::log::ParsedLog;
use crate::scenario::ControllerEntry;

pub const PANEL_WIDTH: u32 = 480;
pub const PANEL_HEIGHT: u32 = 420;

const AGENT: RGBColor = RGBColor(31, 119, 180);
const TARGET: RGBColor = RGBColor(214, 39, 40);
const BEACON: RGBColor = RGBColor(40, 40, 40);
const OMEGA: RGBColor = RGBColor(44, 160, 44);
const LIMIT: RGBColor = RGBColor(150, 150, 150);

fn span(values: impl Iterator<Item = f64>) -> Range<f64> {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in values.filter(|v| v.is_finite()) {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() {
        return -1.0..1.0;
    }
    let pad = ((hi - lo) * 0.05).max(1e-3 * hi.abs().max(lo.abs())).max(1e-6);
    (lo - pad)..(hi + pad)
}

/// Equal-aspect box around `points`.
fn square_box(points: &[(f64, f64)]) -> (Range<f64>, Range<f64>) {
    let xs = span(points.iter().map(|p| p.0));
    let ys = span(points.iter().map(|p| p.1));
    let half = (xs.end - xs.start).max(ys.end - ys.start) / 2.0;
    let cx = (xs.start + xs.end) / 2.0;
    let cy = (ys.start + ys.end) / 2.0;
    ((cx - half)..(cx + half), (cy - half)..(cy + half))
}

/// Renders `log` to an SVG document.
pub fn render_svg(log: &ParsedLog) -> Result<String, String> {
    let mut svg = String::new();
    draw(log, &mut svg).map_err(|e| e.to_string())?;
    Ok(svg)
}

fn draw<'a>(log: &ParsedLog, svg: &'a mut String) -> Result<(), Box<dyn std::error::Error + 'a>> {
    let samples = &log.samples;
    let t_end = samples.last().map_or(0.0, |s| s.t);

    let mut beacons_start = Vec::new();
    let mut beacons_end = Vec::new();
    let mut limits = None;
    if let Some(sc) = &log.scenario {
        let v = &sc.beacon_velocity;
        for b in &sc.beacons {
            let b = b.get_ref();
            beacons_start.push((b.x, b.y));
            if v.x != 0.0 || v.y != 0.0 {
                beacons_end.push((b.x + v.x * t_end, b.y + v.y * t_end));
            }
        }
        if let ControllerEntry::Saturated {
            nu_b,
            nu_f,
            omega_r,
            omega_l,
        } = *sc.controller.get_ref()
        {
            limits = Some((nu_b, nu_f, omega_r, omega_l));
        }
    }

    let path: Vec<(f64, f64)> = samples.iter().map(|s| (s.x, s.y)).collect();
    let track: Vec<(f64, f64)> = samples.iter().map(|s| (s.fw_x, s.fw_y)).collect();

    let root = SVGBackend::with_string(svg, (3 * PANEL_WIDTH, PANEL_HEIGHT)).into_drawing_area();
    root.fill(&WHITE)?;
    let panels = root.split_evenly((1, 3));

    let everything: Vec<(f64, f64)> = path
        .iter()
        .chain(&track)
        .chain(&beacons_start)
        .chain(&beacons_end)
        .copied()
        .collect();
    let (xr, yr) = square_box(&everything);
    let mut plane = ChartBuilder::on(&panels[0])
        .caption("trajectory", ("sans-serif", 18))
        .margin(12)
        .x_label_area_size(32)
        .y_label_area_size(48)
        .build_cartesian_2d(xr, yr)?;
    plane.configure_mesh().x_desc("x [m]").y_desc("y [m]").draw()?;
    plane
        .draw_series(LineSeries::new(path.iter().copied(), AGENT.stroke_width(2)))?
        .label("agent")
        .legend(|(x, y)| PathElement::new([(x, y), (x + 16, y)], AGENT));
    plane
        .draw_series(LineSeries::new(track.iter().copied(), TARGET))?
        .label("target")
        .legend(|(x, y)| PathElement::new([(x, y), (x + 16, y)], TARGET));
    if let Some(&end) = track.last() {
        plane.draw_series(std::iter::once(Cross::new(end, 6, TARGET.stroke_width(2))))?;
    }
    if let Some(&start) = path.first() {
        plane.draw_series(std::iter::once(Circle::new(start, 5, AGENT.filled())))?;
    }
    plane.draw_series(beacons_start.iter().map(|&p| TriangleMarker::new(p, 7, BEACON.filled())))?;
    plane.draw_series(beacons_end.iter().map(|&p| TriangleMarker::new(p, 7, BEACON.mix(0.35).filled())))?;
    plane
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()?;

    let tr = span(samples.iter().map(|s| s.t));
    let er = span(samples.iter().map(|s| s.tracking_error).chain(std::iter::once(0.0)));
    let mut error = ChartBuilder::on(&panels[1])
        .caption("tracking error", ("sans-serif", 18))
        .margin(12)
        .x_label_area_size(32)
        .y_label_area_size(56)
        .build_cartesian_2d(tr.clone(), er)?;
    error.configure_mesh().x_desc("t [s]").y_desc("|p - p*| [m]").draw()?;
    error.draw_series(LineSeries::new(samples.iter().map(|s| (s.t, s.tracking_error)), AGENT))?;

    let mut extent: Vec<f64> = samples.iter().flat_map(|s| [s.nu, s.omega]).collect();
    if let Some((nu_b, nu_f, omega_r, omega_l)) = limits {
        extent.extend([-nu_b, nu_f, -omega_r, omega_l]);
    }
    let cr = span(extent.into_iter());
    let mut commands = ChartBuilder::on(&panels[2])
        .caption("commands", ("sans-serif", 18))
        .margin(12)
        .x_label_area_size(32)
        .y_label_area_size(56)
        .build_cartesian_2d(tr.clone(), cr)?;
    commands.configure_mesh().x_desc("t [s]").draw()?;
    if let Some((nu_b, nu_f, omega_r, omega_l)) = limits {
        for level in [-nu_b, nu_f, -omega_r, omega_l] {
            commands.draw_series(LineSeries::new([(tr.start, level), (tr.end, level)], LIMIT))?;
        }
    }
    commands
        .draw_series(LineSeries::new(samples.iter().map(|s| (s.t, s.nu)), AGENT))?
        .label("nu [m/s]")
        .legend(|(x, y)| PathElement::new([(x, y), (x + 16, y)], AGENT));
    commands
        .draw_series(LineSeries::new(samples.iter().map(|s| (s.t, s.omega)), OMEGA))?
        .label("omega [rad/s]")
        .legend(|(x, y)| PathElement::new([(x, y), (x + 16, y)], OMEGA));
    commands
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()?;

    root.present()?;
    Ok(())
}
