//! Minimal static SVG charts: line chart, signed heatmap and grouped bars.

use std::fmt::Write;

const PALETTE: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn header(out: &mut String, w: f64, h: f64, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#,
        w / 2.0,
        escape(title)
    );
}

/// `sign(v) · log10(1 + |v|)`, which keeps values near zero readable next
/// to values in the thousands.
pub fn symlog(v: f64) -> f64 {
    v.signum() * (1.0 + v.abs()).log10()
}

pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

/// Lines with markers on a symmetric-log y axis.
pub fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let (w, h) = (640.0, 400.0);
    let (left, right, top, bottom) = (70.0, 150.0, 40.0, 50.0);
    let pts = series.iter().flat_map(|s| s.points.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, 0.0f64, 0.0f64);
    for &(x, y) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(symlog(y));
        y1 = y1.max(symlog(y));
    }
    if !x0.is_finite() {
        (x0, x1) = (0.0, 1.0);
    }
    if x1 == x0 {
        x1 = x0 + 1.0;
    }
    y0 = y0.floor();
    y1 = y1.ceil().max(y0 + 1.0);
    let sx = |x: f64| left + (x - x0) / (x1 - x0) * (w - left - right);
    let sy = |y: f64| h - bottom - (symlog(y) - y0) / (y1 - y0) * (h - top - bottom);

    let mut out = String::new();
    header(&mut out, w, h, title);
    let _ = writeln!(
        out,
        r#"<rect x="{left}" y="{top}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        w - left - right,
        h - top - bottom
    );
    let mut tick = y0 as i32;
    while tick as f64 <= y1 {
        let v = (tick as f64).signum() * (10f64.powi(tick.abs()) - 1.0);
        let y = sy(v);
        let _ = writeln!(
            out,
            r##"<line x1="{left}" x2="{}" y1="{y}" y2="{y}" stroke="#ddd"/><text x="{}" y="{}" text-anchor="end">{v}</text>"##,
            w - right,
            left - 6.0,
            y + 4.0
        );
        tick += 1;
    }
    let mut x = x0.ceil();
    while x <= x1 {
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="middle">{x}</text>"#,
            sx(x),
            h - bottom + 16.0
        );
        x += 1.0;
    }
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        left + (w - left - right) / 2.0,
        h - 10.0,
        escape(x_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        h / 2.0,
        h / 2.0,
        escape(y_label)
    );
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let path: Vec<String> = s.points.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
        let _ = writeln!(
            out,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            path.join(" ")
        );
        for &(x, y) in &s.points {
            let _ = writeln!(out, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#, sx(x), sy(y));
        }
        let ly = top + 16.0 * i as f64 + 10.0;
        let _ = writeln!(
            out,
            r#"<rect x="{}" y="{}" width="12" height="12" fill="{color}"/><text x="{}" y="{}">{}</text>"#,
            w - right + 10.0,
            ly - 10.0,
            w - right + 28.0,
            ly,
            escape(&s.name)
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Fill for a signed entry: white at 0, saturated blue at +1 and red at −1.
pub fn cell_color(v: f64) -> String {
    let t = v.abs().min(1.0);
    let fade = |c: f64| (255.0 - t * (255.0 - c)).round() as u8;
    let (r, g, b) = if v >= 0.0 { (31.0, 119.0, 180.0) } else { (214.0, 39.0, 40.0) };
    format!("#{:02x}{:02x}{:02x}", fade(r), fade(g), fade(b))
}

/// 4×4 transfer-matrix heatmap with the entry and, when given, its interval
/// printed in each cell.
pub fn heatmap(title: &str, m: &[[f64; 4]; 4], ci: Option<&[(f64, f64)]>) -> String {
    let cell = 90.0;
    let (left, top) = (40.0, 50.0);
    let (w, h) = (left + 4.0 * cell + 20.0, top + 4.0 * cell + 20.0);
    let labels = ["I", "X", "Y", "Z"];
    let mut out = String::new();
    header(&mut out, w, h, title);
    for (i, row) in m.iter().enumerate() {
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            left - 14.0,
            top + cell * (i as f64 + 0.5) + 4.0,
            labels[i]
        );
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            left + cell * (i as f64 + 0.5),
            top - 6.0,
            labels[i]
        );
        for (j, &v) in row.iter().enumerate() {
            let (x, y) = (left + cell * j as f64, top + cell * i as f64);
            let _ = writeln!(
                out,
                r##"<rect x="{x}" y="{y}" width="{cell}" height="{cell}" fill="{}" stroke="#888"/>"##,
                cell_color(v)
            );
            let _ = writeln!(
                out,
                r#"<text x="{}" y="{}" text-anchor="middle">{v:.4}</text>"#,
                x + cell / 2.0,
                y + cell / 2.0
            );
            if let Some(ci) = ci {
                let (lo, hi) = ci[4 * i + j];
                let _ = writeln!(
                    out,
                    r#"<text x="{}" y="{}" text-anchor="middle" font-size="9">[{lo:.4}, {hi:.4}]</text>"#,
                    x + cell / 2.0,
                    y + cell / 2.0 + 16.0
                );
            }
        }
    }
    out.push_str("</svg>\n");
    out
}

pub struct BarGroup {
    pub label: String,
    /// One value per series, with an optional interval.
    pub values: Vec<(f64, Option<(f64, f64)>)>,
}

/// Grouped vertical bars with error whiskers, on a linear axis from 0.
pub fn bar_chart(title: &str, y_label: &str, series_names: &[String], groups: &[BarGroup]) -> String {
    let (w, h) = (640.0, 360.0);
    let (left, right, top, bottom) = (80.0, 150.0, 40.0, 40.0);
    let ymax = groups
        .iter()
        .flat_map(|g| g.values.iter().map(|(v, ci)| ci.map_or(*v, |c| c.1.max(*v))))
        .fold(0.0f64, f64::max)
        .max(1e-12)
        * 1.1;
    let sy = |y: f64| h - bottom - y.max(0.0) / ymax * (h - top - bottom);
    let group_w = (w - left - right) / groups.len().max(1) as f64;
    let bar_w = group_w * 0.8 / series_names.len().max(1) as f64;

    let mut out = String::new();
    header(&mut out, w, h, title);
    let _ = writeln!(
        out,
        r#"<line x1="{left}" x2="{left}" y1="{top}" y2="{}" stroke="black"/><line x1="{left}" x2="{}" y1="{}" y2="{}" stroke="black"/>"#,
        h - bottom,
        w - right,
        h - bottom,
        h - bottom
    );
    for k in 0..=4 {
        let v = ymax * k as f64 / 4.0;
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="end">{v:.2e}</text>"#,
            left - 6.0,
            sy(v) + 4.0
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        h / 2.0,
        h / 2.0,
        escape(y_label)
    );
    for (gi, g) in groups.iter().enumerate() {
        let gx = left + group_w * gi as f64 + group_w * 0.1;
        for (si, (v, ci)) in g.values.iter().enumerate() {
            let x = gx + bar_w * si as f64;
            let color = PALETTE[si % PALETTE.len()];
            let _ = writeln!(
                out,
                r#"<rect x="{x:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{color}"/>"#,
                sy(*v),
                bar_w * 0.9,
                (h - bottom - sy(*v)).max(0.0)
            );
            if let Some((lo, hi)) = ci {
                let cx = x + bar_w * 0.45;
                let _ = writeln!(
                    out,
                    r#"<line x1="{cx:.2}" x2="{cx:.2}" y1="{:.2}" y2="{:.2}" stroke="black"/>"#,
                    sy(*lo),
                    sy(*hi)
                );
            }
        }
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{}" text-anchor="middle">{}</text>"#,
            gx + group_w * 0.4,
            h - bottom + 16.0,
            escape(&g.label)
        );
    }
    for (i, name) in series_names.iter().enumerate() {
        let ly = top + 16.0 * i as f64 + 10.0;
        let _ = writeln!(
            out,
            r#"<rect x="{}" y="{}" width="12" height="12" fill="{}"/><text x="{}" y="{}">{}</text>"#,
            w - right + 10.0,
            ly - 10.0,
            PALETTE[i % PALETTE.len()],
            w - right + 28.0,
            ly,
            escape(name)
        );
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_heatmap_intensities() {
        assert_eq!(cell_color(1.0), "#1f77b4");
        assert_eq!(cell_color(0.0), "#ffffff");
        assert_eq!(cell_color(-1.0), "#d62728");
        let id = [[1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0], [0.0, 0.0, 1.0, 0.0], [0.0, 0.0, 0.0, 1.0]];
        let svg = heatmap("Gi", &id, None);
        assert_eq!(svg.matches(r##"fill="#1f77b4""##).count(), 4);
        assert_eq!(svg.matches(r##"fill="#ffffff""##).count(), 12);
    }

    #[test]
    fn symlog_is_odd_and_monotone() {
        assert_eq!(symlog(0.0), 0.0);
        assert_eq!(symlog(9.0), 1.0);
        assert_eq!(symlog(-99.0), -2.0);
    }

    #[test]
    fn charts_are_well_formed() {
        let s = line_chart(
            "n",
            "rep",
            "N",
            &[Series { name: "a<b".into(), points: vec![(0.0, -1.0), (1.0, 500.0)] }],
        );
        assert!(s.starts_with("<svg") && s.trim_end().ends_with("</svg>") && s.contains("a&lt;b"));
        let b = bar_chart(
            "m",
            "v",
            &["x".into(), "y".into()],
            &[BarGroup { label: "Gi".into(), values: vec![(0.1, Some((0.05, 0.15))), (0.2, None)] }],
        );
        assert_eq!(b.matches("<rect").count(), 1 + 2 + 2);
    }
}
