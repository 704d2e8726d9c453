//! Single self-contained SVG: the kappa log fit.

use std::fmt::Write as _;

use mctrack_core::martinet::KappaFit;

const W: f64 = 640.0;
const H: f64 = 420.0;
const PAD: f64 = 60.0;

/// Scatter of `(-ln eps, cost eps^2)` with the fitted line.
pub fn fit_plot(points: &[(f64, f64)], fit: &KappaFit) -> String {
    let xy: Vec<(f64, f64)> = points.iter().map(|&(e, c)| (-e.ln(), c * e * e)).collect();
    let line = |x: f64| fit.intercept + fit.slope * x;
    let (mut x0, mut x1) = bounds(xy.iter().map(|p| p.0));
    let (y0, y1) = bounds(xy.iter().map(|p| p.1).chain([line(x0), line(x1)]));
    let span = (x1 - x0).max(1e-12);
    x0 -= 0.05 * span;
    x1 += 0.05 * span;
    let yspan = (y1 - y0).max(1e-12);
    let (y0, y1) = (y0 - 0.05 * yspan, y1 + 0.05 * yspan);
    let sx = |x: f64| PAD + (x - x0) / (x1 - x0) * (W - 2.0 * PAD);
    let sy = |y: f64| H - PAD - (y - y0) / (y1 - y0) * (H - 2.0 * PAD);

    let mut s = String::new();
    writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#).unwrap();
    writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
    writeln!(
        s,
        r#"<g stroke="black" stroke-width="1"><line x1="{PAD}" y1="{b}" x2="{r}" y2="{b}"/><line x1="{PAD}" y1="{PAD}" x2="{PAD}" y2="{b}"/></g>"#,
        b = H - PAD,
        r = W - PAD
    )
    .unwrap();
    for k in 0..=4 {
        let fx = x0 + (x1 - x0) * k as f64 / 4.0;
        let fy = y0 + (y1 - y0) * k as f64 / 4.0;
        writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" font-size="11" text-anchor="middle" font-family="sans-serif">{fx:.2}</text>"#,
            sx(fx),
            H - PAD + 16.0
        )
        .unwrap();
        writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" font-size="11" text-anchor="end" font-family="sans-serif">{fy:.3}</text>"#,
            PAD - 6.0,
            sy(fy) + 4.0
        )
        .unwrap();
    }
    writeln!(
        s,
        r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="firebrick" stroke-width="1.5"/>"#,
        sx(x0),
        sy(line(x0)),
        sx(x1),
        sy(line(x1))
    )
    .unwrap();
    for &(x, y) in &xy {
        writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="3.5" fill="steelblue"/>"#, sx(x), sy(y)).unwrap();
    }
    let font = r#"font-size="13" font-family="sans-serif""#;
    writeln!(s, r#"<text x="{}" y="{}" {font} text-anchor="middle">-ln eps</text>"#, W / 2.0, H - 18.0).unwrap();
    writeln!(
        s,
        r#"<text x="16" y="{}" {font} text-anchor="middle" transform="rotate(-90 16 {})">cost * eps^2</text>"#,
        H / 2.0,
        H / 2.0
    )
    .unwrap();
    writeln!(
        s,
        r#"<text x="{}" y="30" {font} text-anchor="middle">kappa_est = {:.4} (slope {:.4}, {} points)</text>"#,
        W / 2.0,
        fit.kappa,
        fit.slope,
        xy.len()
    )
    .unwrap();
    s.push_str("</svg>\n");
    s
}

fn bounds(it: impl Iterator<Item = f64>) -> (f64, f64) {
    it.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}
