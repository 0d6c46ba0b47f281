//! Minimal self-contained SVG for parity scans and density-matrix plots.
//! Numbers are printed with fixed precision so output is byte-stable.

use anyon_core::hilbert::DensityMatrix;
use anyon_core::interference::{CorrelationScan, CosineFit, PARITY_FREQUENCY};
use std::f64::consts::PI;
use std::fmt::Write;

const COLORS: [&str; 5] = ["#1f77b4", "#d62728", "#222222", "#2ca02c", "#9467bd"];

fn header(w: f64, h: f64) -> String {
    format!("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w:.0}\" height=\"{h:.0}\" viewBox=\"0 0 {w:.0} {h:.0}\" font-family=\"sans-serif\" font-size=\"12\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n")
}

/// Parity scans as points with error bars, overlaid with their fitted cosines.
pub fn parity_plot(series: &[(&str, &CorrelationScan, Option<&CosineFit>)]) -> String {
    let (w, h) = (640.0, 400.0);
    let (left, right, top, bottom) = (60.0, 20.0, 20.0, 50.0);
    let x = |g: f64| left + (w - left - right) * g / PI;
    let y = |v: f64| top + (h - top - bottom) * (1.1 - v) / 2.2;
    let mut s = header(w, h);
    let _ = writeln!(s, "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"#999\"/>", x(0.0), y(0.0), x(PI), y(0.0));
    let _ = writeln!(
        s,
        "<rect x=\"{left:.2}\" y=\"{top:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"none\" stroke=\"black\"/>",
        w - left - right,
        h - top - bottom
    );
    for k in 0..=4 {
        let g = PI * k as f64 / 4.0;
        let _ = writeln!(s, "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{}</text>", x(g), h - bottom + 18.0, ["0", "π/4", "π/2", "3π/4", "π"][k]);
    }
    for v in [-1.0, 0.0, 1.0] {
        let _ = writeln!(s, "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\">{v:.0}</text>", left - 6.0, y(v) + 4.0);
    }
    let _ = writeln!(s, "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">γ (rad)</text>", (left + w - right) / 2.0, h - 8.0);
    let _ = writeln!(s, "<text x=\"14\" y=\"{:.2}\" transform=\"rotate(-90 14 {:.2})\" text-anchor=\"middle\">⟨P(γ)⟩</text>", h / 2.0, h / 2.0);
    for (i, (label, scan, fit)) in series.iter().enumerate() {
        let c = COLORS[i % COLORS.len()];
        for ((&g, &v), &e) in scan.gammas.iter().zip(&scan.values).zip(&scan.errors) {
            if e > 0.0 {
                let _ = writeln!(s, "<line x1=\"{0:.2}\" y1=\"{1:.2}\" x2=\"{0:.2}\" y2=\"{2:.2}\" stroke=\"{c}\"/>", x(g), y(v - e), y(v + e));
            }
            let _ = writeln!(s, "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"{c}\"/>", x(g), y(v));
        }
        if let Some(f) = fit {
            let pts: Vec<String> = (0..=200)
                .map(|k| {
                    let g = PI * k as f64 / 200.0;
                    format!("{:.2},{:.2}", x(g), y(f.contrast * (PARITY_FREQUENCY * g + f.phi).cos() + f.offset))
                })
                .collect();
            let _ = writeln!(s, "<polyline fill=\"none\" stroke=\"{c}\" points=\"{}\"/>", pts.join(" "));
        }
        let ly = top + 16.0 + 16.0 * i as f64;
        let _ = writeln!(s, "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"4\" fill=\"{c}\"/>", w - right - 150.0, ly - 4.0);
        let text = match fit {
            Some(f) => format!("{label}: φ = {:.3}π", f.phi / PI),
            None => label.to_string(),
        };
        let _ = writeln!(s, "<text x=\"{:.2}\" y=\"{ly:.2}\">{text}</text>", w - right - 140.0);
    }
    s.push_str("</svg>\n");
    s
}

/// Re(rho) as a grid of squares sized by magnitude, blue for positive and red for negative.
pub fn density_plot(rho: &DensityMatrix, title: &str) -> String {
    let d = rho.dim();
    let n = rho.space().num_factors();
    let cell = 24.0;
    let margin = 60.0;
    let size = margin + cell * d as f64 + 10.0;
    let mut s = header(size, size + 20.0);
    let _ = writeln!(s, "<text x=\"{:.2}\" y=\"18\" text-anchor=\"middle\">{title}</text>", size / 2.0);
    let peak = rho.matrix().iter().map(|z| z.re.abs()).fold(1e-12, f64::max);
    let label = |k: usize| -> String { (0..n).map(|b| if k >> (n - 1 - b) & 1 == 1 { '1' } else { '0' }).collect() };
    for i in 0..d {
        let _ = writeln!(
            s,
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\" font-size=\"9\">{}</text>",
            margin - 4.0,
            margin + cell * (i as f64 + 0.65),
            label(i)
        );
        for j in 0..d {
            let v = rho.matrix()[(i, j)].re;
            let side = cell * (v.abs() / peak).sqrt().min(1.0);
            if side < 0.2 {
                continue;
            }
            let cx = margin + cell * (j as f64 + 0.5);
            let cy = margin + cell * (i as f64 + 0.5);
            let color = if v >= 0.0 { "#1f77b4" } else { "#d62728" };
            let _ = writeln!(
                s,
                "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{side:.2}\" height=\"{side:.2}\" fill=\"{color}\"/>",
                cx - side / 2.0,
                cy - side / 2.0
            );
        }
    }
    let _ = writeln!(
        s,
        "<rect x=\"{margin:.2}\" y=\"{margin:.2}\" width=\"{0:.2}\" height=\"{0:.2}\" fill=\"none\" stroke=\"#999\"/>",
        cell * d as f64
    );
    s.push_str("</svg>\n");
    s
}
