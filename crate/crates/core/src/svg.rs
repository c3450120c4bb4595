//! Standalone SVG plot of a symmetric strategy curve.

use std::fmt::Write;

use crate::error::{Error, Result};
use crate::partialinfo::{SegmentLabel, SymmetricStrategy};

const SIZE: f64 = 420.0;
const MARGIN: f64 = 50.0;

fn color(kind: SegmentLabel) -> &'static str {
    match kind {
        SegmentLabel::Original => "#1f77b4",
        SegmentLabel::Diagonal => "#d62728",
        SegmentLabel::Shifted => "#2ca02c",
    }
}

fn px(x: f64) -> f64 {
    MARGIN + x * SIZE
}

fn py(y: f64) -> f64 {
    MARGIN + (1.0 - y) * SIZE
}

/// Renders `beta*` over the unit square with the diagonal dashed and one
/// polyline colour per segment kind.
pub fn strategy_svg(strategy: &SymmetricStrategy) -> Result<String> {
    if strategy.grid.is_empty() {
        return Err(Error::Precondition("cannot plot an empty strategy grid".into()));
    }
    let w = SIZE + 2.0 * MARGIN;
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{w}" viewBox="0 0 {w} {w}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<rect width="{w}" height="{w}" fill="white"/>"#);
    let (x0, x1, y0, y1) = (px(0.0), px(1.0), py(0.0), py(1.0));
    let _ = writeln!(s, r#"<path d="M{x0} {y1} V{y0} H{x1}" fill="none" stroke="black"/>"#);
    for i in 0..=5 {
        let t = i as f64 / 5.0;
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{t:.1}</text>"#, px(t), y0 + 18.0);
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{t:.1}</text>"#, x0 - 6.0, py(t) + 4.0);
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">type</text>"#, px(0.5), y0 + 38.0);
    let _ = writeln!(
        s,
        r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">contribution</text>"#,
        py(0.5),
        py(0.5)
    );
    let _ = writeln!(s, r##"<line class="diagonal" x1="{x0}" y1="{y0}" x2="{x1}" y2="{y1}" stroke="#888" stroke-dasharray="6 4"/>"##);

    // Consecutive points of one kind form a run; neighbouring runs share
    // their boundary point so the curve has no gaps.
    let grid = &strategy.grid;
    let mut start = 0;
    let mut kinds = Vec::new();
    while start < grid.len() {
        let kind = grid[start].kind;
        let mut end = start;
        while end + 1 < grid.len() && grid[end + 1].kind == kind {
            end += 1;
        }
        let last = (end + 1).min(grid.len() - 1);
        let pts: Vec<String> = grid[start..=last]
            .iter()
            .map(|p| format!("{:.2},{:.2}", px(p.x), py(p.beta_star)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline class="{kind}" points="{}" fill="none" stroke="{}" stroke-width="2"/>"#,
            pts.join(" "),
            color(kind)
        );
        if !kinds.contains(&kind) {
            kinds.push(kind);
        }
        start = end + 1;
    }
    for (i, kind) in kinds.iter().enumerate() {
        let y = MARGIN + 10.0 + 18.0 * i as f64;
        let _ = writeln!(s, r#"<line x1="{}" y1="{y}" x2="{}" y2="{y}" stroke="{}" stroke-width="2"/>"#, x0 + 10.0, x0 + 34.0, color(*kind));
        let _ = writeln!(s, r#"<text x="{}" y="{}">{kind}</text>"#, x0 + 40.0, y + 4.0);
    }
    s.push_str("</svg>\n");
    Ok(s)
}
