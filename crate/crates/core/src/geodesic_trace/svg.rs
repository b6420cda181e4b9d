use std::fmt::Write;

use super::trace::TraceResult;
use crate::binary_forms::ProjPoint;
use crate::error::{Error, Result};
use crate::linalg::c;

/// Affine charts of the two factors and the plotted window.
#[derive(Clone, Copy, Debug)]
pub struct SvgChart {
    pub u_chart: usize,
    pub v_chart: usize,
    pub radius: f64,
    pub max_curves: usize,
    pub samples: usize,
}

impl Default for SvgChart {
    fn default() -> Self {
        SvgChart { u_chart: 0, v_chart: 0, radius: 4.0, max_curves: 12, samples: 400 }
    }
}

const SIZE: f64 = 600.0;

fn coord(p: &ProjPoint, chart: usize) -> Option<f64> {
    let (num, den) = if chart == 0 { (p.z1, p.z0) } else { (p.z0, p.z1) };
    (den.norm() > 1e-12).then(|| (num / den).re)
}

fn to_screen(x: f64, y: f64, r: f64) -> (f64, f64) {
    ((x + r) / (2.0 * r) * SIZE, (r - y) / (2.0 * r) * SIZE)
}

/// Real parts of the image curves over the real parameter line, nodes as
/// dots, and the constraint points highlighted.
pub fn render_displacement_svg(trace: &TraceResult, chart: &SvgChart) -> Result<String> {
    if trace.states.is_empty() {
        return Err(Error::DegenerateInput("empty trace".into()));
    }
    let r = chart.radius;
    let n = trace.states.len();
    let picks: Vec<usize> = if n <= chart.max_curves {
        (0..n).collect()
    } else {
        (0..chart.max_curves).map(|k| k * (n - 1) / (chart.max_curves - 1)).collect()
    };
    let mut svg = String::new();
    writeln!(svg, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#).unwrap();
    writeln!(svg, r#"<rect width="{SIZE}" height="{SIZE}" fill="white"/>"#).unwrap();
    let (ox, oy) = to_screen(0.0, 0.0, r);
    writeln!(svg, r##"<line x1="0" y1="{oy:.2}" x2="{SIZE}" y2="{oy:.2}" stroke="#ccc"/><line x1="{ox:.2}" y1="0" x2="{ox:.2}" y2="{SIZE}" stroke="#ccc"/>"##).unwrap();
    for (rank, &k) in picks.iter().enumerate() {
        let curve = &trace.states[k];
        let hue = 240.0 * rank as f64 / picks.len().max(2).saturating_sub(1).max(1) as f64;
        let mut segments: Vec<Vec<(f64, f64)>> = vec![Vec::new()];
        for s in 0..=chart.samples {
            let a = std::f64::consts::PI * s as f64 / chart.samples as f64;
            let pt = curve.eval(&ProjPoint::new(c(a.cos(), 0.0), c(a.sin(), 0.0)));
            match (coord(&pt.u, chart.u_chart), coord(&pt.v, chart.v_chart)) {
                (Some(x), Some(y)) if x.abs() <= r && y.abs() <= r => segments.last_mut().unwrap().push(to_screen(x, y, r)),
                _ => {
                    if !segments.last().unwrap().is_empty() {
                        segments.push(Vec::new());
                    }
                }
            }
        }
        for seg in segments.iter().filter(|s| s.len() > 1) {
            let pts: Vec<String> = seg.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
            writeln!(svg, r#"<polyline fill="none" stroke="hsl({hue:.0},70%,45%)" stroke-width="1.2" points="{}"/>"#, pts.join(" ")).unwrap();
        }
        for node in curve.node_images() {
            if let (Some(x), Some(y)) = (coord(&node.u, chart.u_chart), coord(&node.v, chart.v_chart)) {
                if x.abs() <= r && y.abs() <= r {
                    let (sx, sy) = to_screen(x, y, r);
                    writeln!(svg, r#"<circle cx="{sx:.2}" cy="{sy:.2}" r="3" fill="hsl({hue:.0},70%,45%)"/>"#).unwrap();
                }
            }
        }
    }
    for cons in &trace.constraints {
        let p = cons.point();
        if let (Some(x), Some(y)) = (coord(&p.u, chart.u_chart), coord(&p.v, chart.v_chart)) {
            let (sx, sy) = to_screen(x, y, r);
            writeln!(svg, r#"<circle cx="{sx:.2}" cy="{sy:.2}" r="6" fill="none" stroke="red" stroke-width="2"/>"#).unwrap();
        }
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}
