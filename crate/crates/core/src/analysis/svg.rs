//! Dependency-free SVG renderings of clustering output.

use std::fmt::Write;

use super::StateDensity;

const PALETTE: [&str; 10] =
    ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"];

const SIZE: f64 = 480.0;
const PAD: f64 = 40.0;

fn bounds(points: impl Iterator<Item = [f64; 2]>) -> [f64; 4] {
    let mut b = [f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY];
    for p in points {
        b[0] = b[0].min(p[0]);
        b[1] = b[1].max(p[0]);
        b[2] = b[2].min(p[1]);
        b[3] = b[3].max(p[1]);
    }
    if !(b[1] > b[0]) {
        b[0] -= 0.5;
        b[1] += 0.5;
    }
    if !(b[3] > b[2]) {
        b[2] -= 0.5;
        b[3] += 0.5;
    }
    b
}

/// Projected states of each policy, coloured by the policy's cluster.
pub fn scatter(series: &[Vec<[f64; 2]>], clusters: &[usize], title: &str) -> String {
    let b = bounds(series.iter().flatten().copied());
    let span = SIZE - 2.0 * PAD;
    let sx = |x: f64| PAD + (x - b[0]) / (b[1] - b[0]) * span;
    let sy = |y: f64| SIZE - PAD - (y - b[2]) / (b[3] - b[2]) * span;
    let mut s = String::new();
    writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#).unwrap();
    writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
    writeln!(s, r#"<text x="{PAD}" y="24" font-family="sans-serif" font-size="14">{}</text>"#, escape(title)).unwrap();
    writeln!(
        s,
        r#"<rect x="{PAD}" y="{PAD}" width="{span}" height="{span}" fill="none" stroke="black" stroke-width="0.5"/>"#
    )
    .unwrap();
    for (pts, &c) in series.iter().zip(clusters) {
        let colour = PALETTE[c % PALETTE.len()];
        for p in pts {
            writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="1.5" fill="{colour}" fill-opacity="0.5"/>"#, sx(p[0]), sy(p[1]))
                .unwrap();
        }
    }
    writeln!(s, r#"<text x="{PAD}" y="{:.0}" font-family="sans-serif" font-size="11">PC1</text>"#, SIZE - 12.0).unwrap();
    writeln!(s, r#"<text x="6" y="{PAD}" font-family="sans-serif" font-size="11">PC2</text>"#).unwrap();
    s.push_str("</svg>\n");
    s
}

/// Grey-scale heat map of one density, darker for more mass.
pub fn heatmap(d: &StateDensity, title: &str) -> String {
    let n = d.grid.bins;
    let span = SIZE - 2.0 * PAD;
    let cell = span / n as f64;
    let max = d.p.iter().copied().fold(0.0, f64::max);
    let mut s = String::new();
    writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#).unwrap();
    writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
    writeln!(s, r#"<text x="{PAD}" y="24" font-family="sans-serif" font-size="14">{}</text>"#, escape(title)).unwrap();
    for row in 0..n {
        for col in 0..n {
            let v = d.p[row * n + col] / max;
            let shade = (255.0 * (1.0 - v.sqrt())).round() as u8;
            let x = PAD + col as f64 * cell;
            let y = SIZE - PAD - (row + 1) as f64 * cell;
            writeln!(
                s,
                r#"<rect x="{x:.2}" y="{y:.2}" width="{cell:.2}" height="{cell:.2}" fill="rgb({shade},{shade},{shade})"/>"#
            )
            .unwrap();
        }
    }
    s.push_str("</svg>\n");
    s
}

/// Polyline through `(x, y)` with vertical bars of half-height `err`.
pub fn line_plot(points: &[(f64, f64, f64)], title: &str, x_label: &str, y_label: &str) -> String {
    let b = bounds(points.iter().flat_map(|&(x, y, e)| [[x, y - e], [x, y + e]]));
    let span = SIZE - 2.0 * PAD;
    let sx = |x: f64| PAD + (x - b[0]) / (b[1] - b[0]) * span;
    let sy = |y: f64| SIZE - PAD - (y - b[2]) / (b[3] - b[2]) * span;
    let mut s = String::new();
    writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#).unwrap();
    writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
    writeln!(s, r#"<text x="{PAD}" y="24" font-family="sans-serif" font-size="14">{}</text>"#, escape(title)).unwrap();
    writeln!(
        s,
        r#"<rect x="{PAD}" y="{PAD}" width="{span}" height="{span}" fill="none" stroke="black" stroke-width="0.5"/>"#
    )
    .unwrap();
    let path: Vec<String> = points.iter().map(|&(x, y, _)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
    writeln!(s, r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="1.5"/>"#, path.join(" "), PALETTE[0]).unwrap();
    for &(x, y, e) in points {
        let (px, lo, hi) = (sx(x), sy(y - e), sy(y + e));
        writeln!(s, r#"<line x1="{px:.2}" y1="{lo:.2}" x2="{px:.2}" y2="{hi:.2}" stroke="black" stroke-width="0.8"/>"#).unwrap();
        writeln!(s, r#"<circle cx="{px:.2}" cy="{:.2}" r="3" fill="{}"/>"#, sy(y), PALETTE[0]).unwrap();
        writeln!(
            s,
            r#"<text x="{px:.2}" y="{:.0}" font-family="sans-serif" font-size="10" text-anchor="middle">{x}</text>"#,
            SIZE - PAD + 14.0
        )
        .unwrap();
    }
    writeln!(s, r#"<text x="{:.0}" y="{:.0}" font-family="sans-serif" font-size="11">{}</text>"#, SIZE / 2.0, SIZE - 8.0, escape(x_label))
        .unwrap();
    writeln!(s, r#"<text x="6" y="{PAD}" font-family="sans-serif" font-size="11">{}</text>"#, escape(y_label)).unwrap();
    s.push_str("</svg>\n");
    s
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
