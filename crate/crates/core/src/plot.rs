//! Self-contained SVG of the per-iteration terminal states.
//!
//! Output depends only on the inputs: coordinates are printed with a fixed
//! number of decimals and nothing time- or environment-dependent is written.

use std::fmt::Write as _;
use std::io::Write;

use crate::error::{Error, Result};

const WIDTH: f64 = 480.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 48.0;

/// A labelled point drawn as a black diamond.
#[derive(Debug, Clone, PartialEq)]
pub struct Marker {
    pub label: String,
    pub at: [f64; 2],
}

impl Marker {
    pub fn new(label: &str, at: [f64; 2]) -> Self {
        Self {
            label: label.to_string(),
            at,
        }
    }
}

struct Frame {
    lo: [f64; 2],
    hi: [f64; 2],
}

impl Frame {
    fn covering(points: impl Iterator<Item = [f64; 2]>) -> Self {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for p in points {
            for a in 0..2 {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        for a in 0..2 {
            if !(lo[a].is_finite() && hi[a].is_finite()) {
                lo[a] = 0.0;
                hi[a] = 1.0;
            }
            let pad = ((hi[a] - lo[a]) * 0.1).max(0.25);
            lo[a] -= pad;
            hi[a] += pad;
        }
        Self { lo, hi }
    }

    fn map(&self, p: [f64; 2]) -> (f64, f64) {
        let sx = (WIDTH - 2.0 * MARGIN) / (self.hi[0] - self.lo[0]);
        let sy = (HEIGHT - 2.0 * MARGIN) / (self.hi[1] - self.lo[1]);
        (
            MARGIN + (p[0] - self.lo[0]) * sx,
            HEIGHT - MARGIN - (p[1] - self.lo[1]) * sy,
        )
    }
}

/// Path of the first two terminal-state coordinates, one circle per
/// iteration (filled for the start), plus diamond markers.
pub fn terminal_states_svg(title: &str, states: &[Vec<f64>], markers: &[Marker]) -> Result<String> {
    if let Some(bad) = states.iter().find(|s| s.len() < 2) {
        return Err(Error::InvalidArgument(format!(
            "terminal-state plot needs two coordinates, got {}",
            bad.len()
        )));
    }
    let pts: Vec<[f64; 2]> = states.iter().map(|s| [s[0], s[1]]).collect();
    let frame = Frame::covering(pts.iter().copied().chain(markers.iter().map(|m| m.at)));
    let mut svg = String::new();
    let w = &mut svg;
    // Writing into a String cannot fail.
    let _ = writeln!(
        w,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(w, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        w,
        r#"<text x="{:.1}" y="24" text-anchor="middle" font-family="sans-serif" font-size="14">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );

    // Axes with end labels.
    let (x0, y0) = (MARGIN, HEIGHT - MARGIN);
    let _ = writeln!(
        w,
        r#"<path d="M{x0:.1} {y0:.1} H{:.1} M{x0:.1} {y0:.1} V{MARGIN:.1}" stroke="black" fill="none"/>"#,
        WIDTH - MARGIN
    );
    for (a, name) in [(0, "x1"), (1, "x2")] {
        for (v, anchor) in [(frame.lo[a], "start"), (frame.hi[a], "end")] {
            let (tx, ty) = if a == 0 {
                let (px, _) = frame.map([v, frame.lo[1]]);
                (px, y0 + 16.0)
            } else {
                let (_, py) = frame.map([frame.lo[0], v]);
                (x0 - 6.0, py)
            };
            let anchor = if a == 0 { anchor } else { "end" };
            let _ = writeln!(
                w,
                r#"<text x="{tx:.1}" y="{ty:.1}" text-anchor="{anchor}" font-family="sans-serif" font-size="10">{v:.2}</text>"#
            );
        }
        let (tx, ty) = if a == 0 {
            (WIDTH / 2.0, HEIGHT - 12.0)
        } else {
            (14.0, HEIGHT / 2.0)
        };
        let _ = writeln!(
            w,
            r#"<text x="{tx:.1}" y="{ty:.1}" text-anchor="middle" font-family="sans-serif" font-size="12">{name}</text>"#
        );
    }

    if !pts.is_empty() {
        let path: Vec<String> = pts
            .iter()
            .map(|&p| {
                let (x, y) = frame.map(p);
                format!("{x:.3},{y:.3}")
            })
            .collect();
        let _ = writeln!(
            w,
            r##"<polyline points="{}" fill="none" stroke="#1f4e9c" stroke-width="1.5"/>"##,
            path.join(" ")
        );
        for (i, &p) in pts.iter().enumerate() {
            let (x, y) = frame.map(p);
            let fill = if i == 0 { "black" } else { "white" };
            let _ = writeln!(
                w,
                r#"<circle cx="{x:.3}" cy="{y:.3}" r="3" fill="{fill}" stroke="black"/>"#
            );
        }
    }
    for m in markers {
        let (x, y) = frame.map(m.at);
        let r = 6.0;
        let _ = writeln!(
            w,
            r#"<path d="M{x:.3} {:.3} L{:.3} {y:.3} L{x:.3} {:.3} L{:.3} {y:.3} Z" fill="black"/>"#,
            y - r,
            x + r,
            y + r,
            x - r
        );
        let _ = writeln!(
            w,
            r#"<text x="{:.3}" y="{:.3}" font-family="sans-serif" font-size="12">{}</text>"#,
            x + 8.0,
            y - 8.0,
            escape(&m.label)
        );
    }
    let _ = writeln!(w, "</svg>");
    Ok(svg)
}

pub fn write_terminal_states_svg<W: Write>(
    mut out: W,
    title: &str,
    states: &[Vec<f64>],
    markers: &[Marker],
) -> Result<()> {
    out.write_all(terminal_states_svg(title, states, markers)?.as_bytes())?;
    Ok(())
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_with_markers() {
        let states = vec![vec![3.0625, 0.879], vec![3.0, 0.95]];
        let m = [Marker::new("A", [3.0, 2.0]), Marker::new("B", [3.0, 1.0])];
        let a = terminal_states_svg("run <1>", &states, &m).unwrap();
        let b = terminal_states_svg("run <1>", &states, &m).unwrap();
        assert_eq!(a, b);
        assert!(a.starts_with("<svg") && a.trim_end().ends_with("</svg>"));
        assert_eq!(a.matches("<circle").count(), 2);
        assert_eq!(a.matches(r#"fill="black"/>"#).count(), 2);
        assert!(a.contains("run &lt;1&gt;"));
    }

    #[test]
    fn empty_and_bad_input() {
        assert!(terminal_states_svg("t", &[], &[]).unwrap().contains("</svg>"));
        assert!(terminal_states_svg("t", &[vec![1.0]], &[]).is_err());
    }
}
