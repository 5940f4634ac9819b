//! SVG scatter of per-bit (H₁, H∞) pairs on the unit square.

use std::fmt::Write;

const SIZE: f64 = 480.0;
const MARGIN: f64 = 60.0;
const PLOT: f64 = SIZE - 2.0 * MARGIN;

/// One marker: per-bit Shannon entropy on x, per-bit min-entropy on y.
#[derive(Debug, Clone, PartialEq)]
pub struct ScatterPoint {
    pub label: String,
    pub h1_per_bit: f64,
    pub hinf_per_bit: f64,
}

fn x_px(v: f64) -> f64 {
    MARGIN + v.clamp(0.0, 1.0) * PLOT
}

fn y_px(v: f64) -> f64 {
    SIZE - MARGIN - v.clamp(0.0, 1.0) * PLOT
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Renders the scatter. Output bytes depend only on the input points.
pub fn scatter_svg(points: &[ScatterPoint], title: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    );
    let _ = writeln!(
        s,
        r#"<rect x="0" y="0" width="{SIZE}" height="{SIZE}" fill="white"/>"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="30" font-family="sans-serif" font-size="14" text-anchor="middle">{}</text>"#,
        SIZE / 2.0,
        escape(title)
    );

    // grid and ticks
    for i in 0..=10 {
        let v = i as f64 / 10.0;
        let (gx, gy) = (x_px(v), y_px(v));
        let _ = writeln!(
            s,
            r##"<line x1="{gx:.2}" y1="{:.2}" x2="{gx:.2}" y2="{:.2}" stroke="#e0e0e0"/>"##,
            y_px(0.0),
            y_px(1.0)
        );
        let _ = writeln!(
            s,
            r##"<line x1="{:.2}" y1="{gy:.2}" x2="{:.2}" y2="{gy:.2}" stroke="#e0e0e0"/>"##,
            x_px(0.0),
            x_px(1.0)
        );
        if i % 2 == 0 {
            let _ = writeln!(
                s,
                r#"<text x="{gx:.2}" y="{:.2}" font-family="sans-serif" font-size="10" text-anchor="middle">{v:.1}</text>"#,
                y_px(0.0) + 15.0
            );
            let _ = writeln!(
                s,
                r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="10" text-anchor="end">{v:.1}</text>"#,
                x_px(0.0) - 6.0,
                gy + 3.0
            );
        }
    }
    let _ = writeln!(
        s,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{PLOT}" height="{PLOT}" fill="none" stroke="black"/>"#
    );
    // H∞ ≤ H₁: markers can only lie on or below this diagonal.
    let _ = writeln!(
        s,
        r##"<line class="diagonal" x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#888888" stroke-dasharray="4 3"/>"##,
        x_px(0.0),
        y_px(0.0),
        x_px(1.0),
        y_px(1.0)
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12" text-anchor="middle">H1 per bit</text>"#,
        SIZE / 2.0,
        SIZE - 20.0
    );
    let _ = writeln!(
        s,
        r#"<text x="18" y="{}" font-family="sans-serif" font-size="12" text-anchor="middle" transform="rotate(-90 18 {})">Hinf per bit</text>"#,
        SIZE / 2.0,
        SIZE / 2.0
    );

    for p in points {
        let _ = writeln!(
            s,
            r##"<circle class="marker" cx="{:.2}" cy="{:.2}" r="3" fill="#1f77b4" fill-opacity="0.7"><title>{}: H1={:.6}, Hinf={:.6}</title></circle>"##,
            x_px(p.h1_per_bit),
            y_px(p.hinf_per_bit),
            escape(&p.label),
            p.h1_per_bit,
            p.hinf_per_bit
        );
    }
    s.push_str("</svg>\n");
    s
}
