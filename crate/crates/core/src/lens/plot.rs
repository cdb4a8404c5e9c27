//! Standalone SVG scatter plots of a 3D embedding.

use std::collections::BTreeSet;
use std::fmt::Write;

const PANEL: f64 = 320.0;
const MARGIN: f64 = 24.0;
const LEGEND_W: f64 = 180.0;
const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
];

/// Colour for the `i`-th label in sorted order. The first ten come from a
/// fixed palette; later ones step around the hue circle.
pub fn label_color(i: usize) -> String {
    if i < PALETTE.len() {
        return PALETTE[i].to_string();
    }
    let hue = (i as f64 * 137.507_764) % 360.0;
    format!("hsl({hue:.1},65%,45%)")
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn bounds(coords: &[[f64; 3]], axis: usize) -> (f64, f64) {
    let lo = coords.iter().map(|c| c[axis]).fold(f64::INFINITY, f64::min);
    let hi = coords.iter().map(|c| c[axis]).fold(f64::NEG_INFINITY, f64::max);
    if !lo.is_finite() || hi <= lo {
        let mid = if lo.is_finite() { lo } else { 0.0 };
        return (mid - 1.0, mid + 1.0);
    }
    (lo, hi)
}

/// Renders three panels (x-y, x-z, y-z) with one marker per point and
/// a legend. Colours depend only on the sorted set of label names.
pub fn emit_plot(coords: &[[f64; 3]], labels: &[String], title: &str) -> String {
    let names: Vec<&str> = labels.iter().map(String::as_str).collect::<BTreeSet<_>>().into_iter().collect();
    let color_of = |l: &str| label_color(names.binary_search(&l).unwrap_or(0));

    let width = 3.0 * (PANEL + MARGIN) + MARGIN + LEGEND_W;
    let height = PANEL + 2.0 * MARGIN + 24.0;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{MARGIN}" y="18" font-size="14">{}</text>"#, escape(title));

    let ranges = [bounds(coords, 0), bounds(coords, 1), bounds(coords, 2)];
    for (p, (ax, ay, name)) in [(0, 1, "x-y"), (0, 2, "x-z"), (1, 2, "y-z")].into_iter().enumerate() {
        let x0 = MARGIN + p as f64 * (PANEL + MARGIN);
        let y0 = MARGIN + 12.0;
        let _ = writeln!(s, r#"<g class="panel" data-projection="{name}">"#);
        let _ = writeln!(
            s,
            r##"<rect x="{x0}" y="{y0}" width="{PANEL}" height="{PANEL}" fill="none" stroke="#444"/>"##
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{name}</text>"#,
            x0 + PANEL / 2.0,
            y0 + PANEL + 16.0
        );
        let (xl, xh) = ranges[ax];
        let (yl, yh) = ranges[ay];
        let pad = 10.0;
        for (c, l) in coords.iter().zip(labels) {
            let px = x0 + pad + (c[ax] - xl) / (xh - xl) * (PANEL - 2.0 * pad);
            let py = y0 + PANEL - pad - (c[ay] - yl) / (yh - yl) * (PANEL - 2.0 * pad);
            let _ = writeln!(
                s,
                r#"<circle class="marker" cx="{px:.2}" cy="{py:.2}" r="3" fill="{}" fill-opacity="0.8"/>"#,
                color_of(l)
            );
        }
        let _ = writeln!(s, "</g>");
    }

    let lx = MARGIN + 3.0 * (PANEL + MARGIN);
    let _ = writeln!(s, r#"<g class="legend">"#);
    for (i, name) in names.iter().enumerate() {
        let y = MARGIN + 20.0 + i as f64 * 18.0;
        let _ = writeln!(
            s,
            r#"<rect x="{lx}" y="{:.1}" width="10" height="10" fill="{}"/><text x="{:.1}" y="{:.1}">{}</text>"#,
            y - 9.0,
            label_color(i),
            lx + 16.0,
            y,
            escape(name)
        );
    }
    let _ = writeln!(s, "</g>");
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_input_is_a_valid_document() {
        let svg = emit_plot(&[], &[], "empty");
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("class=\"panel\"").count(), 3);
        assert_eq!(svg.matches("class=\"marker\"").count(), 0);
    }

    #[test]
    fn one_marker_per_point_per_panel() {
        let coords: Vec<[f64; 3]> = (0..17).map(|i| [i as f64, (i * i) as f64, -(i as f64)]).collect();
        let labels: Vec<String> = (0..17).map(|i| format!("l{}", i % 3)).collect();
        let svg = emit_plot(&coords, &labels, "t");
        assert_eq!(svg.matches("class=\"marker\"").count(), 51);
    }

    #[test]
    fn colors_follow_sorted_names() {
        let coords = vec![[0.0; 3]; 2];
        let a = emit_plot(&coords, &["zeta".into(), "alpha".into()], "t");
        let b = emit_plot(&coords, &["alpha".into(), "zeta".into()], "t");
        let legend = |s: &str| s[s.find("class=\"legend\"").unwrap()..].to_string();
        assert_eq!(legend(&a), legend(&b));
        assert!(legend(&a).find("alpha").unwrap() < legend(&a).find("zeta").unwrap());
        assert!(a.contains(PALETTE[0]) && a.contains(PALETTE[1]));
    }

    #[test]
    fn labels_are_escaped() {
        let svg = emit_plot(&[[0.0; 3]], &["a<b".into()], "x&y");
        assert!(svg.contains("a&lt;b") && svg.contains("x&amp;y"));
    }
}
