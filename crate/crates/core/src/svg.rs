//! Self-contained SVG renderings of floorplans, traced rays and networks.

use std::fmt::Write;

use crate::geometry::Vec2;
use crate::learner::NetState;
use crate::netbuild::{Endpoint, LayeredNet};
use crate::raytracer::TraceResult;
use crate::scenario::{Role, Scenario};

const PX_PER_M: f64 = 50.0;
const MARGIN: f64 = 30.0;
const MIN_OPACITY: f64 = 0.03;

struct Frame {
    min: Vec2,
    max: Vec2,
}

impl Frame {
    fn of(points: impl Iterator<Item = Vec2>) -> Self {
        let mut min = Vec2::new(f64::INFINITY, f64::INFINITY);
        let mut max = Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in points {
            min = Vec2::new(min.x.min(p.x), min.y.min(p.y));
            max = Vec2::new(max.x.max(p.x), max.y.max(p.y));
        }
        if !min.x.is_finite() {
            return Self { min: Vec2::new(0.0, 0.0), max: Vec2::new(1.0, 1.0) };
        }
        Self { min, max }
    }

    fn width(&self) -> f64 {
        (self.max.x - self.min.x) * PX_PER_M + 2.0 * MARGIN
    }

    fn height(&self) -> f64 {
        (self.max.y - self.min.y) * PX_PER_M + 2.0 * MARGIN
    }

    /// Screen coordinates, y pointing down.
    fn map(&self, p: Vec2) -> (f64, f64) {
        (MARGIN + (p.x - self.min.x) * PX_PER_M, MARGIN + (self.max.y - p.y) * PX_PER_M)
    }
}

fn header(out: &mut String, w: f64, h: f64) {
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0}" height="{h:.0}" viewBox="0 0 {w:.0} {h:.0}">"#
    )
    .unwrap();
    writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
}

fn line(out: &mut String, a: (f64, f64), b: (f64, f64), style: &str) {
    writeln!(out, r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" {style}/>"#, a.0, a.1, b.0, b.1).unwrap();
}

/// Floorplan with coated walls in blue, absorbers in gray, users as dots and,
/// if given, the traced rays with stroke opacity proportional to power.
pub fn floorplan_svg(scenario: &Scenario, trace: Option<&TraceResult>, title: &str) -> String {
    let walls = scenario.wall_segments();
    let frame = Frame::of(
        walls.iter().flat_map(|w| [w.a, w.b]).chain(scenario.users.iter().map(|u| u.position)),
    );
    let mut out = String::new();
    header(&mut out, frame.width(), frame.height() + 20.0);
    writeln!(out, r#"<text x="{MARGIN}" y="18" font-family="sans-serif" font-size="14">{}</text>"#, escape(title))
        .unwrap();
    writeln!(out, r#"<g transform="translate(0,20)">"#).unwrap();

    for w in &walls {
        let style = if w.coated {
            r##"stroke="#1f5fbf" stroke-width="4""##
        } else {
            r##"stroke="#999999" stroke-width="2""##
        };
        line(&mut out, frame.map(w.a), frame.map(w.b), style);
        if w.coated {
            for i in 1..w.tile_count {
                let p = w.a + (w.b - w.a) * (i as f64 / w.tile_count as f64);
                let (x, y) = frame.map(p);
                let n = w.base_normal * (4.0 / PX_PER_M);
                let (nx, ny) = frame.map(p + n);
                line(&mut out, (x, y), (nx, ny), r#"stroke="white" stroke-width="1.5""#);
            }
        }
    }

    if let Some(trace) = trace {
        let peak = trace.segments.iter().map(|s| s.power_w).fold(0.0, f64::max);
        for s in &trace.segments {
            let alpha = if peak > 0.0 { (s.power_w / peak).max(MIN_OPACITY) } else { MIN_OPACITY };
            let style = format!(r##"stroke="#d62728" stroke-width="1.5" stroke-opacity="{alpha:.3}""##);
            line(&mut out, frame.map(s.from), frame.map(s.to), &style);
        }
    }

    for u in &scenario.users {
        let (x, y) = frame.map(u.position);
        let (fill, label) = match u.role {
            Role::Transmitter => ("#2ca02c", "Tx"),
            Role::Receiver => ("#9467bd", "Rx"),
        };
        writeln!(out, r#"<circle cx="{x:.2}" cy="{y:.2}" r="6" fill="{fill}"/>"#).unwrap();
        writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="12">{label}</text>"#,
            x + 8.0,
            y - 8.0
        )
        .unwrap();
    }
    out.push_str("</g>\n</svg>\n");
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

const COL_W: f64 = 140.0;
const ROW_H: f64 = 50.0;
const PANEL_GAP: f64 = 40.0;

/// One panel per state, side by side: Tx, the tile layers and Rx as columns,
/// links drawn with width proportional to the power they carry.
pub fn network_svg(net: &LayeredNet, panels: &[(&str, &NetState)]) -> String {
    let rows = net.layers.iter().map(Vec::len).max().unwrap_or(1).max(1) as f64;
    let cols = net.depth() as f64 + 2.0;
    let panel_w = cols * COL_W;
    let panel_h = rows * ROW_H + 40.0;
    let mut out = String::new();
    header(&mut out, panels.len() as f64 * (panel_w + PANEL_GAP), panel_h + 20.0);

    let pos = |e: Endpoint| -> (f64, f64) {
        let mid = 40.0 + rows * ROW_H / 2.0;
        match e {
            Endpoint::Tx => (COL_W / 2.0, mid),
            Endpoint::Rx => (COL_W * (cols - 0.5), mid),
            Endpoint::Node(id) => {
                let n = net.layers[id.layer].len() as f64;
                let y = mid + (id.index as f64 - (n - 1.0) / 2.0) * ROW_H;
                (COL_W * (id.layer as f64 + 1.5), y)
            }
        }
    };

    for (p, (title, state)) in panels.iter().enumerate() {
        let dx = p as f64 * (panel_w + PANEL_GAP);
        writeln!(out, r#"<g transform="translate({dx:.0},0)">"#).unwrap();
        writeln!(
            out,
            r#"<text x="10" y="20" font-family="sans-serif" font-size="14">{} (RMSE {:.3e})</text>"#,
            escape(title),
            state.rmse()
        )
        .unwrap();
        let total = state.total_input(net);
        for (i, link) in net.links.iter().enumerate() {
            let share = if total > 0.0 { state.link_power[i] / total } else { 0.0 };
            let style = if share > 0.0 {
                format!(r##"stroke="#1f5fbf" stroke-width="{:.2}" stroke-opacity="0.8""##, 0.3 + 8.0 * share)
            } else {
                r##"stroke="#cccccc" stroke-width="0.5""##.to_string()
            };
            line(&mut out, pos(link.from), pos(link.to), &style);
        }
        for id in net.node_ids() {
            let (x, y) = pos(Endpoint::Node(id));
            let active = state.impinging(net, id) > 0.0;
            let fill = if active { "#1f5fbf" } else { "white" };
            writeln!(
                out,
                r##"<circle cx="{x:.2}" cy="{y:.2}" r="9" fill="{fill}" stroke="#333333"/><text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="10">{id}</text>"##,
                x - 12.0,
                y - 12.0
            )
            .unwrap();
        }
        for (e, label) in [(Endpoint::Tx, "Tx"), (Endpoint::Rx, "Rx")] {
            let (x, y) = pos(e);
            writeln!(
                out,
                r##"<rect x="{:.2}" y="{:.2}" width="24" height="24" fill="#eeeeee" stroke="#333333"/><text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="11">{label}</text>"##,
                x - 12.0,
                y - 12.0,
                x - 8.0,
                y + 4.0
            )
            .unwrap();
        }
        out.push_str("</g>\n");
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::configurators::regular_config;
    use crate::learner::{feed_forward, Omegas, Targets};
    use crate::netbuild::build_layered_net;
    use crate::raytracer::{emit_rays, trace};

    #[test]
    fn floorplan_draws_every_wall_and_segment() {
        let s = Scenario::default_scenario();
        let rays = emit_rays(s.transmitter().unwrap(), 5, 1.0).unwrap();
        let t = trace(&s, &regular_config(&s), &rays).unwrap();
        let svg = floorplan_svg(&s, Some(&t), "regular <specular>");
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        let tick_lines = 3 * 4;
        assert_eq!(svg.matches("<line").count(), s.walls.len() + tick_lines + t.segments.len());
        assert!(svg.contains("regular &lt;specular&gt;"));
        assert_eq!(svg.matches("<circle").count(), 2);
    }

    #[test]
    fn network_has_two_panels() {
        let s = Scenario::default_scenario();
        let net = build_layered_net(&s).unwrap();
        let targets = Targets::from_params(&net, &s.train);
        let a = feed_forward(&net, &Omegas::zeros(&net), &targets).unwrap();
        let svg = network_svg(&net, &[("untrained", &a), ("trained", &a)]);
        assert_eq!(svg.matches("<circle").count(), 2 * net.node_count());
        assert_eq!(svg.matches("<line").count(), 2 * net.links.len());
    }
}
