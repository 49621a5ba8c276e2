//! Standalone SVG line charts and bird's-eye trajectory plots.

use std::fmt::Write;

use trajplan_core::{PredictionSet, Scenario};

const W: f64 = 640.0;
const H: f64 = 420.0;
const MARGIN: f64 = 56.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn around(points: impl Iterator<Item = [f64; 2]>, pad: f64) -> Self {
        let mut f = Frame { x0: f64::INFINITY, x1: f64::NEG_INFINITY, y0: f64::INFINITY, y1: f64::NEG_INFINITY };
        for [x, y] in points {
            f.x0 = f.x0.min(x);
            f.x1 = f.x1.max(x);
            f.y0 = f.y0.min(y);
            f.y1 = f.y1.max(y);
        }
        if !f.x0.is_finite() {
            return Frame { x0: 0.0, x1: 1.0, y0: 0.0, y1: 1.0 };
        }
        let px = ((f.x1 - f.x0) * pad).max(1e-9);
        let py = ((f.y1 - f.y0) * pad).max(1e-9);
        Frame { x0: f.x0 - px, x1: f.x1 + px, y0: f.y0 - py, y1: f.y1 + py }
    }

    /// Widens the shorter side so one unit has the same length on both axes.
    fn equal_aspect(mut self) -> Self {
        let sx = (self.x1 - self.x0) / (W - 2.0 * MARGIN);
        let sy = (self.y1 - self.y0) / (H - 2.0 * MARGIN);
        if sx > sy {
            let extra = (sx * (H - 2.0 * MARGIN) - (self.y1 - self.y0)) / 2.0;
            self.y0 -= extra;
            self.y1 += extra;
        } else {
            let extra = (sy * (W - 2.0 * MARGIN) - (self.x1 - self.x0)) / 2.0;
            self.x0 -= extra;
            self.x1 += extra;
        }
        self
    }

    fn px(&self, [x, y]: [f64; 2]) -> (f64, f64) {
        (
            MARGIN + (x - self.x0) / (self.x1 - self.x0) * (W - 2.0 * MARGIN),
            H - MARGIN - (y - self.y0) / (self.y1 - self.y0) * (H - 2.0 * MARGIN),
        )
    }

    fn polyline(&self, pts: &[[f64; 2]]) -> String {
        pts.iter()
            .map(|&p| {
                let (x, y) = self.px(p);
                format!("{x:.2},{y:.2}")
            })
            .collect::<Vec<_>>()
            .join(" ")
    }
}

fn open(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r##"<rect width="{W}" height="{H}" fill="#ffffff"/>"##);
    let _ = writeln!(out, r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#, W / 2.0, escape(title));
}

fn axes(out: &mut String, f: &Frame, xlabel: &str, ylabel: &str) {
    let (l, b, r, t) = (MARGIN, H - MARGIN, W - MARGIN, MARGIN);
    let _ = writeln!(out, r##"<rect x="{l}" y="{t}" width="{}" height="{}" fill="none" stroke="#444444"/>"##, r - l, b - t);
    for i in 0..=4 {
        let a = i as f64 / 4.0;
        let xv = f.x0 + a * (f.x1 - f.x0);
        let yv = f.y0 + a * (f.y1 - f.y0);
        let (xp, _) = f.px([xv, f.y0]);
        let (_, yp) = f.px([f.x0, yv]);
        let _ = writeln!(out, r#"<text x="{xp:.2}" y="{}" text-anchor="middle">{}</text>"#, b + 16.0, tick(xv));
        let _ = writeln!(out, r#"<text x="{}" y="{:.2}" text-anchor="end">{}</text>"#, l - 6.0, yp + 4.0, tick(yv));
    }
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, W / 2.0, H - 12.0, escape(xlabel));
    let _ = writeln!(
        out,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        H / 2.0,
        H / 2.0,
        escape(ylabel)
    );
}

fn legend(out: &mut String, entries: &[(&str, String)]) {
    for (i, (color, name)) in entries.iter().enumerate() {
        let y = MARGIN + 14.0 + 16.0 * i as f64;
        let x = W - MARGIN - 150.0;
        let _ = writeln!(out, r#"<line x1="{x}" y1="{y}" x2="{}" y2="{y}" stroke="{color}" stroke-width="2"/>"#, x + 18.0);
        let _ = writeln!(out, r#"<text x="{}" y="{}">{}</text>"#, x + 24.0, y + 4.0, escape(name));
    }
}

fn tick(v: f64) -> String {
    if v.abs() >= 100.0 || v == 0.0 {
        format!("{v:.0}")
    } else {
        format!("{v:.2}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Line chart of one or more `(name, points)` series.
pub fn line_chart(title: &str, xlabel: &str, ylabel: &str, series: &[(String, Vec<[f64; 2]>)]) -> String {
    let f = Frame::around(series.iter().flat_map(|s| s.1.iter().copied()), 0.05);
    let mut out = String::new();
    open(&mut out, title);
    axes(&mut out, &f, xlabel, ylabel);
    let mut entries = Vec::new();
    for (i, (name, pts)) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let _ = writeln!(out, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#, f.polyline(pts));
        for &p in pts {
            let (x, y) = f.px(p);
            let _ = writeln!(out, r#"<circle cx="{x:.2}" cy="{y:.2}" r="2.5" fill="{color}"/>"#);
        }
        entries.push((color, name.clone()));
    }
    legend(&mut out, &entries);
    out.push_str("</svg>\n");
    out
}

/// Bird's-eye view of one scenario: history, driven future, raters and the
/// predicted modes (opacity follows mode probability, the top mode is drawn
/// last).
pub fn bev_plot(s: &Scenario, pred: &PredictionSet) -> String {
    let history: Vec<[f64; 2]> = s.history.steps.iter().map(|st| [st.x, st.y]).collect();
    let all = history
        .iter()
        .chain(&s.driven_future.waypoints)
        .chain(s.raters.iter().flat_map(|r| r.trajectory.waypoints.iter()))
        .chain(pred.modes.iter().flat_map(|m| m.waypoints.iter()))
        .copied();
    let f = Frame::around(all, 0.08).equal_aspect();
    let mut out = String::new();
    open(&mut out, &format!("{} ({}, intent {:?})", s.id, s.category, s.intent));
    axes(&mut out, &f, "x (m, forward)", "y (m, left)");
    for r in &s.raters {
        let _ = writeln!(
            out,
            r##"<polyline points="{}" fill="none" stroke="#999999" stroke-width="1.5" stroke-dasharray="5,4"/>"##,
            f.polyline(&r.trajectory.waypoints)
        );
        if let Some(&last) = r.trajectory.waypoints.last() {
            let (x, y) = f.px(last);
            let _ = writeln!(out, r##"<text x="{:.2}" y="{:.2}" fill="#666666">{:.1}</text>"##, x + 4.0, y - 4.0, r.score);
        }
    }
    let ranked = pred.ranked_indices();
    let pmax = pred.probs.iter().copied().fold(0.0, f64::max).max(1e-12);
    for &m in ranked.iter().rev() {
        let top = m == ranked[0];
        let color = if top { "#d62728" } else { "#1f77b4" };
        let opacity = if top { 1.0 } else { 0.15 + 0.75 * pred.probs[m] / pmax };
        let _ = writeln!(
            out,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="{}" stroke-opacity="{opacity:.3}"/>"#,
            f.polyline(&pred.modes[m].waypoints),
            if top { 2.5 } else { 1.5 }
        );
    }
    let _ = writeln!(
        out,
        r##"<polyline points="{}" fill="none" stroke="#000000" stroke-width="2.5"/>"##,
        f.polyline(&s.driven_future.waypoints)
    );
    for &p in &history {
        let (x, y) = f.px(p);
        let _ = writeln!(out, r##"<circle cx="{x:.2}" cy="{y:.2}" r="2.5" fill="#2ca02c"/>"##);
    }
    legend(
        &mut out,
        &[
            ("#2ca02c", "history".into()),
            ("#000000", "driven future".into()),
            ("#999999", "raters (score)".into()),
            ("#d62728", "top mode".into()),
            ("#1f77b4", "other modes".into()),
        ],
    );
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chart_is_well_formed() {
        let s = line_chart("loss", "epoch", "value", &[("train".into(), vec![[1.0, 3.0], [2.0, 1.0]])]);
        assert!(s.starts_with("<svg") && s.ends_with("</svg>\n"));
        assert_eq!(s.matches("<polyline").count(), 1);
    }

    #[test]
    fn equal_aspect_scales_match() {
        let f = Frame::around([[0.0, 0.0], [50.0, 2.0]].into_iter(), 0.0).equal_aspect();
        let a = f.px([0.0, 0.0]);
        let b = f.px([1.0, 1.0]);
        assert!(((b.0 - a.0) - (a.1 - b.1)).abs() < 1e-9);
    }
}
