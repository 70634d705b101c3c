//! Static SVG line plot of median chamfer per occlusion decile.

use hoi_core::losses::OcclusionBin;
use std::fmt::Write as _;

const W: f64 = 640.0;
const H: f64 = 400.0;
const MARGIN: f64 = 56.0;

fn fmt(v: f64) -> String {
    format!("{v:.2}")
}

pub fn decile_svg(bins: &[OcclusionBin]) -> String {
    let ymax = bins.iter().map(|b| b.median_cd).fold(0.0f64, f64::max);
    let ymax = if ymax > 0.0 { ymax * 1.1 } else { 1.0 };
    let n = bins.len().max(2) as f64;
    let x = |i: usize| MARGIN + (W - 2.0 * MARGIN) * i as f64 / (n - 1.0);
    let y = |v: f64| H - MARGIN - (H - 2.0 * MARGIN) * v / ymax;
    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    )
    .unwrap();
    writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#).unwrap();
    writeln!(
        s,
        r#"<line x1="{m}" y1="{b}" x2="{r}" y2="{b}" stroke="black"/><line x1="{m}" y1="{m}" x2="{m}" y2="{b}" stroke="black"/>"#,
        m = MARGIN,
        b = H - MARGIN,
        r = W - MARGIN
    )
    .unwrap();
    let pts: Vec<String> = bins
        .iter()
        .enumerate()
        .map(|(i, b)| format!("{},{}", fmt(x(i)), fmt(y(b.median_cd))))
        .collect();
    writeln!(s, r#"<polyline fill="none" stroke="steelblue" stroke-width="2" points="{}"/>"#, pts.join(" ")).unwrap();
    for (i, b) in bins.iter().enumerate() {
        writeln!(
            s,
            r#"<circle cx="{}" cy="{}" r="3" fill="steelblue"><title>decile {} median {}</title></circle>"#,
            fmt(x(i)),
            fmt(y(b.median_cd)),
            i + 1,
            b.median_cd
        )
        .unwrap();
        writeln!(
            s,
            r#"<text x="{}" y="{}" font-size="11" text-anchor="middle">{}</text>"#,
            fmt(x(i)),
            fmt(H - MARGIN + 16.0),
            i + 1
        )
        .unwrap();
    }
    writeln!(
        s,
        r#"<text x="{}" y="{}" font-size="13" text-anchor="middle">occlusion decile (low to high)</text>"#,
        W / 2.0,
        H - 12.0
    )
    .unwrap();
    writeln!(
        s,
        r#"<text x="16" y="{}" font-size="13" text-anchor="middle" transform="rotate(-90 16 {})">median CD (mm&#178;)</text>"#,
        H / 2.0,
        H / 2.0
    )
    .unwrap();
    writeln!(s, r#"<text x="{}" y="{}" font-size="11" text-anchor="end">{}</text>"#, MARGIN - 4.0, fmt(MARGIN + 4.0), fmt(ymax)).unwrap();
    s.push_str("</svg>\n");
    s
}
