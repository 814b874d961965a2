//! Static SVG line plots of relative improvement over the baseline.

use std::fmt::Write as _;

use albird_core::experiment::{ImprovementRow, Metric};
use albird_core::Strategy;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN_LEFT: f64 = 64.0;
const MARGIN_RIGHT: f64 = 120.0;
const MARGIN_TOP: f64 = 36.0;
const MARGIN_BOTTOM: f64 = 48.0;

fn color(s: Strategy) -> &'static str {
    match s {
        Strategy::Random => "#7f7f7f",
        Strategy::Entropy => "#1f77b4",
        Strategy::Badge => "#d62728",
        Strategy::Typiclust => "#2ca02c",
    }
}

/// One line per strategy: x = labeled count, y = relative improvement (%).
/// Points without a relative value are skipped.
pub fn improvement_svg(rows: &[ImprovementRow], metric: Metric, baseline: Strategy) -> String {
    let mut series: Vec<(Strategy, Vec<(f64, f64)>)> = Vec::new();
    for r in rows.iter().filter(|r| r.metric == metric) {
        let Some(y) = r.rel_percent else { continue };
        let x = r.labeled_count as f64;
        match series.iter_mut().find(|(s, _)| *s == r.strategy) {
            Some((_, pts)) => pts.push((x, y)),
            None => series.push((r.strategy, vec![(x, y)])),
        }
    }

    let all = series.iter().flat_map(|(_, p)| p.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, 0.0f64, 0.0f64);
    for &(x, y) in all {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        (x0, x1) = (0.0, 1.0);
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    if y1 <= y0 {
        y1 = y0 + 1.0;
    }
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let sx = |x: f64| MARGIN_LEFT + (x - x0) / (x1 - x0) * plot_w;
    let sy = |y: f64| MARGIN_TOP + (y1 - y) / (y1 - y0) * plot_h;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{} improvement over {} (%)</text>"#,
        MARGIN_LEFT + plot_w / 2.0,
        metric,
        baseline
    );
    let _ = writeln!(
        svg,
        r#"<rect x="{MARGIN_LEFT}" y="{MARGIN_TOP}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black"/>"#
    );
    let zero = sy(0.0);
    let _ = writeln!(
        svg,
        r##"<line x1="{MARGIN_LEFT}" y1="{zero:.2}" x2="{:.2}" y2="{zero:.2}" stroke="#999" stroke-dasharray="4 3"/>"##,
        MARGIN_LEFT + plot_w
    );
    for (v, y) in [(y0, sy(y0)), (y1, sy(y1)), (0.0, zero)] {
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{v:.1}</text>"#,
            MARGIN_LEFT - 6.0,
            y + 4.0
        );
    }
    for (v, x) in [(x0, sx(x0)), (x1, sx(x1))] {
        let _ = writeln!(
            svg,
            r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{v}</text>"#,
            MARGIN_TOP + plot_h + 18.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">labeled instances</text>"#,
        MARGIN_LEFT + plot_w / 2.0,
        HEIGHT - 8.0
    );

    for (i, (strategy, pts)) in series.iter().enumerate() {
        let points = pts
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect::<Vec<_>>()
            .join(" ");
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="{}" stroke-width="2" points="{points}"><title>{strategy}</title></polyline>"#,
            color(*strategy)
        );
        let ly = MARGIN_TOP + 16.0 + 18.0 * i as f64;
        let lx = MARGIN_LEFT + plot_w + 12.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{}" stroke-width="2"/><text x="{}" y="{}">{strategy}</text>"#,
            lx + 20.0,
            color(*strategy),
            lx + 26.0,
            ly + 4.0
        );
    }
    svg.push_str("</svg>\n");
    svg
}
