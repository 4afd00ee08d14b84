//! Minimal deterministic SVG output for panel data.
//!
//! Truth is black, the posterior mean red, the band green and posterior draws
//! dashed grey. Coordinates are printed with two decimals, so equal input
//! gives equal bytes.

use std::fmt::Write;

use crate::coverage::PanelData;
use crate::error::{Error, Result};

const PANEL_W: f64 = 320.0;
const PANEL_H: f64 = 200.0;
const MARGIN: f64 = 28.0;
const TITLE_H: f64 = 16.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn y_range(p: &PanelData) -> (f64, f64) {
    let all = p
        .truth
        .iter()
        .chain(&p.post_mean)
        .chain(&p.lower)
        .chain(&p.upper)
        .chain(p.draws.iter().flatten())
        .copied()
        .filter(|v| v.is_finite());
    let (lo, hi) = all.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !(lo < hi) {
        let c = if lo.is_finite() { lo } else { 0.0 };
        return (c - 1.0, c + 1.0);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

fn polyline(out: &mut String, xs: &[f64], ys: &[f64], map: &impl Fn(f64, f64) -> (f64, f64), style: &str) {
    out.push_str("<polyline fill=\"none\" ");
    out.push_str(style);
    out.push_str(" points=\"");
    for (k, (&x, &y)) in xs.iter().zip(ys).enumerate() {
        let (px, py) = map(x, y);
        if k > 0 {
            out.push(' ');
        }
        let _ = write!(out, "{px:.2},{py:.2}");
    }
    out.push_str("\"/>\n");
}

/// Panels laid out in `columns` columns, filled column by column.
pub fn render_panels(panels: &[PanelData], columns: usize) -> Result<String> {
    if panels.is_empty() {
        return Err(Error::domain("nothing to plot: no panels"));
    }
    if let Some(p) = panels.iter().find(|p| p.x.is_empty()) {
        return Err(Error::domain(format!("nothing to plot: empty panel {}", p.label())));
    }
    let columns = columns.clamp(1, panels.len());
    let rows = panels.len().div_ceil(columns);
    let cell_w = PANEL_W + 2.0 * MARGIN;
    let cell_h = PANEL_H + 2.0 * MARGIN + TITLE_H;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{:.0}\" height=\"{:.0}\" viewBox=\"0 0 {:.0} {:.0}\">",
        cell_w * columns as f64,
        cell_h * rows as f64,
        cell_w * columns as f64,
        cell_h * rows as f64
    );
    out.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    for (k, p) in panels.iter().enumerate() {
        let col = k / rows;
        let row = k % rows;
        let ox = col as f64 * cell_w + MARGIN;
        let oy = row as f64 * cell_h + MARGIN + TITLE_H;
        let (x0, x1) = (p.x[0], p.x[p.x.len() - 1]);
        let xspan = if x1 > x0 { x1 - x0 } else { 1.0 };
        let (y0, y1) = y_range(p);
        let map = |x: f64, y: f64| {
            (
                ox + (x - x0) / xspan * PANEL_W,
                oy + (y1 - y) / (y1 - y0) * PANEL_H,
            )
        };
        let _ = writeln!(
            out,
            "<g><text x=\"{:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"11\">{}</text>",
            ox,
            oy - 6.0,
            escape(&p.label())
        );
        let _ = writeln!(
            out,
            "<rect x=\"{ox:.2}\" y=\"{oy:.2}\" width=\"{PANEL_W:.2}\" height=\"{PANEL_H:.2}\" fill=\"none\" stroke=\"#999999\" stroke-width=\"0.5\"/>"
        );
        if y0 < 0.0 && y1 > 0.0 {
            let (_, zy) = map(x0, 0.0);
            let _ = writeln!(
                out,
                "<line x1=\"{ox:.2}\" y1=\"{zy:.2}\" x2=\"{:.2}\" y2=\"{zy:.2}\" stroke=\"#cccccc\" stroke-width=\"0.5\"/>",
                ox + PANEL_W
            );
        }
        for d in &p.draws {
            polyline(&mut out, &p.x, d, &map, "stroke=\"#808080\" stroke-width=\"0.6\" stroke-dasharray=\"3 2\"");
        }
        polyline(&mut out, &p.x, &p.lower, &map, "stroke=\"green\" stroke-width=\"1.2\"");
        polyline(&mut out, &p.x, &p.upper, &map, "stroke=\"green\" stroke-width=\"1.2\"");
        polyline(&mut out, &p.x, &p.post_mean, &map, "stroke=\"red\" stroke-width=\"1.2\"");
        polyline(&mut out, &p.x, &p.truth, &map, "stroke=\"black\" stroke-width=\"1.2\"");
        out.push_str("</g>\n");
    }
    out.push_str("</svg>\n");
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coverage::PanelSpec;
    use crate::prior::PriorSpec;

    fn panel(draws: usize) -> PanelData {
        let x = vec![0.0, 0.5, 1.0];
        PanelData {
            spec: PanelSpec {
                prior: PriorSpec::exponential(1.0).unwrap(),
                n: 1e4,
                stream: 0,
            },
            truncation: 100,
            truth: vec![0.0, 1.0, 0.0],
            post_mean: vec![0.0, 0.9, 0.0],
            lower: vec![0.0, 0.5, 0.0],
            upper: vec![0.0, 1.3, 0.0],
            draws: vec![vec![0.0, 0.8, 0.0]; draws],
            x,
        }
    }

    #[test]
    fn colors_and_dashes() {
        let svg = render_panels(&[panel(2)], 1).unwrap();
        assert!(svg.contains("stroke=\"black\""));
        assert!(svg.contains("stroke=\"red\""));
        assert_eq!(svg.matches("stroke=\"green\"").count(), 2);
        assert_eq!(svg.matches("stroke-dasharray").count(), 2);
        let plain = render_panels(&[panel(0)], 1).unwrap();
        assert!(!plain.contains("stroke-dasharray"));
    }

    #[test]
    fn deterministic_bytes() {
        let ps = vec![panel(1), panel(3)];
        assert_eq!(render_panels(&ps, 2).unwrap(), render_panels(&ps, 2).unwrap());
    }

    #[test]
    fn empty_input_is_rejected() {
        assert!(render_panels(&[], 1).is_err());
        let mut p = panel(0);
        p.x.clear();
        assert!(render_panels(&[p], 1).is_err());
    }
}
