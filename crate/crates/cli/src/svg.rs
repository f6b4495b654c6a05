//! Minimal SVG 1.1 writer: eigenvalue curves on 1-d meshes and plaquette
//! curvature heat maps on 2-d meshes.

use std::fmt::Write;

use adiag_core::mesh::{Mesh, MeshKind};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 48.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf",
];

fn header(out: &mut String, w: f64, h: f64, title: &str) {
    let _ = writeln!(
        out,
        r#"<?xml version="1.0" encoding="UTF-8"?>
<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{w}" height="{h}" viewBox="0 0 {w} {h}">
<rect width="{w}" height="{h}" fill="white"/>
<text x="{}" y="24" font-family="sans-serif" font-size="14" text-anchor="middle">{}</text>"#,
        w / 2.0,
        escape(title)
    );
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Position of each node along the parameter axis, in `[0, 1]`.
fn parameter(mesh: &Mesh) -> Vec<f64> {
    let n = mesh.node_count();
    let denom = match mesh.kind() {
        MeshKind::Circle => n as f64,
        _ => (n.max(2) - 1) as f64,
    };
    (0..n).map(|i| i as f64 / denom).collect()
}

/// Curves `x ↦ Λ_j(x)` over a 1-d mesh; `values[node][band]`.
pub fn eigenvalue_plot(mesh: &Mesh, values: &[Vec<f64>], title: &str) -> String {
    let mut out = String::new();
    header(&mut out, WIDTH, HEIGHT, title);
    let t = parameter(mesh);
    let (lo, hi) = values
        .iter()
        .flatten()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let (lo, hi) = if hi - lo < 1e-12 {
        (lo - 1.0, hi + 1.0)
    } else {
        (lo, hi)
    };
    let sx = |x: f64| MARGIN + x * (WIDTH - 2.0 * MARGIN);
    let sy = |y: f64| HEIGHT - MARGIN - (y - lo) / (hi - lo) * (HEIGHT - 2.0 * MARGIN);
    let _ = writeln!(
        out,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        WIDTH - 2.0 * MARGIN,
        HEIGHT - 2.0 * MARGIN
    );
    for (y, anchor) in [(lo, HEIGHT - MARGIN), (hi, MARGIN)] {
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{anchor}" font-family="sans-serif" font-size="11" text-anchor="end">{y:.3}</text>"#,
            MARGIN - 4.0
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12" text-anchor="middle">parameter</text>"#,
        WIDTH / 2.0,
        HEIGHT - 12.0
    );
    let bands = values.first().map_or(0, Vec::len);
    for j in 0..bands {
        let points: Vec<String> = t
            .iter()
            .zip(values)
            .map(|(&x, v)| format!("{:.2},{:.2}", sx(x), sy(v[j])))
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="{}" stroke-width="1.5" points="{}"/>"#,
            PALETTE[j % PALETTE.len()],
            points.join(" ")
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Blue for negative, red for positive, white at zero.
fn color(v: f64, scale: f64) -> String {
    let t = if scale > 0.0 { (v / scale).clamp(-1.0, 1.0) } else { 0.0 };
    let fade = |c: f64| (255.0 * (1.0 - t.abs()) + c * t.abs()).round() as u8;
    let (r, g, b) = if t >= 0.0 {
        (fade(214.0), fade(39.0), fade(40.0))
    } else {
        (fade(31.0), fade(119.0), fade(180.0))
    };
    format!("#{r:02x}{g:02x}{b:02x}")
}

/// Heat map of per-plaquette values laid out by chart; sphere faces are
/// tiled three across.
pub fn curvature_map(mesh: &Mesh, curvature: &[f64], title: &str) -> String {
    let charts: Vec<(usize, usize, usize)> = mesh.plaquettes().iter().map(|p| p.chart).collect();
    let faces = charts.iter().map(|c| c.0).max().map_or(1, |f| f + 1);
    let side = charts.iter().map(|c| c.1.max(c.2)).max().map_or(1, |m| m + 1);
    let (cols, rows) = if faces > 1 { (3, faces.div_ceil(3)) } else { (1, 1) };
    let cell = ((WIDTH - 2.0 * MARGIN) / (cols * side) as f64).min((HEIGHT - 2.0 * MARGIN) / (rows * side) as f64);
    let scale = curvature.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut out = String::new();
    header(&mut out, WIDTH, HEIGHT, title);
    for (&(face, i, j), &v) in charts.iter().zip(curvature) {
        let ox = MARGIN + ((face % cols) * side) as f64 * cell;
        let oy = MARGIN + ((face / cols) * side) as f64 * cell;
        let _ = writeln!(
            out,
            r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
            ox + i as f64 * cell,
            oy + (side - 1 - j) as f64 * cell,
            cell,
            cell,
            color(v, scale)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11" text-anchor="middle">max |F| = {scale:.4}</text>"#,
        WIDTH / 2.0,
        HEIGHT - 12.0
    );
    out.push_str("</svg>\n");
    out
}
