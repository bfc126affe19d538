//! SVG heatmaps of a deduced section: an annular view with the crown at the
//! top and parts running clockwise, and the flattened layer-by-part matrix.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use super::deduce::DeductionResult;
use crate::error::{Error, Result};
use crate::geometry::CellIndex;

const WIDTH: f64 = 1100.0;
const HEIGHT: f64 = 600.0;
const CENTER: (f64, f64) = (290.0, 300.0);
const INNER_RADIUS: f64 = 130.0;
const OUTER_RADIUS: f64 = 260.0;
const MATRIX_ORIGIN: (f64, f64) = (600.0, 120.0);
const MATRIX_WIDTH: f64 = 450.0;
const MATRIX_ROW_HEIGHT: f64 = 40.0;

// viridis anchors
const PALETTE: [(f64, f64, f64); 5] = [
    (68.0, 1.0, 84.0),
    (59.0, 82.0, 139.0),
    (33.0, 145.0, 140.0),
    (94.0, 201.0, 98.0),
    (253.0, 231.0, 37.0),
];

fn color(t: f64) -> String {
    let t = t.clamp(0.0, 1.0) * (PALETTE.len() - 1) as f64;
    let i = (t.floor() as usize).min(PALETTE.len() - 2);
    let f = t - i as f64;
    let (a, b) = (PALETTE[i], PALETTE[i + 1]);
    let mix = |x: f64, y: f64| (x + (y - x) * f).round() as u8;
    format!(
        "#{:02x}{:02x}{:02x}",
        mix(a.0, b.0),
        mix(a.1, b.1),
        mix(a.2, b.2)
    )
}

fn point(radius: f64, angle: f64) -> (f64, f64) {
    (
        CENTER.0 + radius * angle.sin(),
        CENTER.1 - radius * angle.cos(),
    )
}

fn fmt_num(x: f64) -> String {
    // Avoid "-0.00".
    let s = format!("{x:.2}");
    if s == "-0.00" {
        "0.00".into()
    } else {
        s
    }
}

/// SVG document for `result`.
pub fn render_svg(result: &DeductionResult) -> String {
    let layers = result.layers();
    let parts = result.parts();
    let values = result.dense.iter().flatten().copied();
    let lo = values.clone().fold(f64::INFINITY, f64::min);
    let hi = values.fold(f64::NEG_INFINITY, f64::max);
    let scale = |v: f64| if hi > lo { (v - lo) / (hi - lo) } else { 0.5 };
    let observed: BTreeSet<CellIndex> = result.observed.iter().map(|o| o.cell).collect();
    let stroke = |cell: &CellIndex| {
        if observed.contains(cell) {
            r##"stroke="#000000" stroke-width="2""##
        } else {
            r##"stroke="#ffffff" stroke-width="0.3""##
        }
    };

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif">"#
    );
    let _ = writeln!(
        svg,
        r##"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="#ffffff"/>"##
    );
    let _ = writeln!(
        svg,
        r#"<text x="20" y="30" font-size="18">{} {} (kN)</text>"#,
        result.section_id, result.date
    );

    let band = (OUTER_RADIUS - INNER_RADIUS) / layers as f64;
    let _ = writeln!(svg, r#"<g id="annular">"#);
    for m in 1..=layers {
        let r0 = INNER_RADIUS + band * (m - 1) as f64;
        let r1 = r0 + band;
        for n in 1..=parts {
            let cell = CellIndex::new(m, n);
            let a0 = 2.0 * PI * (n - 1) as f64 / parts as f64;
            let a1 = 2.0 * PI * n as f64 / parts as f64;
            let center = 2.0 * PI * (n as f64 - 0.5) / parts as f64;
            let (p0, p1, p2, p3) = (point(r1, a0), point(r1, a1), point(r0, a1), point(r0, a0));
            let _ = writeln!(
                svg,
                r#"<path class="annular-cell" data-layer="{m}" data-part="{n}" data-angle="{center:.6}" d="M {} {} A {r1:.2} {r1:.2} 0 0 1 {} {} L {} {} A {r0:.2} {r0:.2} 0 0 0 {} {} Z" fill="{}" {}/>"#,
                fmt_num(p0.0),
                fmt_num(p0.1),
                fmt_num(p1.0),
                fmt_num(p1.1),
                fmt_num(p2.0),
                fmt_num(p2.1),
                fmt_num(p3.0),
                fmt_num(p3.1),
                color(scale(result.value(cell))),
                stroke(&cell),
            );
        }
    }
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" font-size="12" text-anchor="middle">crown</text>"#,
        CENTER.0,
        CENTER.1 - OUTER_RADIUS - 8.0
    );
    let _ = writeln!(svg, "</g>");

    let cell_w = MATRIX_WIDTH / parts as f64;
    let _ = writeln!(svg, r#"<g id="matrix">"#);
    for m in 1..=layers {
        for n in 1..=parts {
            let cell = CellIndex::new(m, n);
            let _ = writeln!(
                svg,
                r#"<rect class="matrix-cell" data-layer="{m}" data-part="{n}" x="{}" y="{}" width="{}" height="{MATRIX_ROW_HEIGHT}" fill="{}" {}/>"#,
                fmt_num(MATRIX_ORIGIN.0 + cell_w * (n - 1) as f64),
                fmt_num(MATRIX_ORIGIN.1 + MATRIX_ROW_HEIGHT * (m - 1) as f64),
                fmt_num(cell_w),
                color(scale(result.value(cell))),
                stroke(&cell),
            );
        }
    }
    let _ = writeln!(svg, "</g>");

    // colorbar
    let bar_y = MATRIX_ORIGIN.1 + MATRIX_ROW_HEIGHT * layers as f64 + 40.0;
    let _ = writeln!(svg, r#"<g id="colorbar">"#);
    let steps = 50;
    for k in 0..steps {
        let _ = writeln!(
            svg,
            r#"<rect x="{}" y="{bar_y}" width="{}" height="16" fill="{}"/>"#,
            fmt_num(MATRIX_ORIGIN.0 + MATRIX_WIDTH * k as f64 / steps as f64),
            fmt_num(MATRIX_WIDTH / steps as f64 + 0.5),
            color(k as f64 / (steps - 1) as f64),
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" font-size="12">{:.3}</text>"#,
        MATRIX_ORIGIN.0,
        bar_y + 32.0,
        lo
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" font-size="12" text-anchor="end">{:.3}</text>"#,
        MATRIX_ORIGIN.0 + MATRIX_WIDTH,
        bar_y + 32.0,
        hi
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" font-size="12">max {:.3} at layer {}, part {}</text>"#,
        MATRIX_ORIGIN.0,
        bar_y + 56.0,
        result.max_value,
        result.max_cell.layer,
        result.max_cell.part
    );
    let _ = writeln!(svg, "</g>");
    svg.push_str("</svg>\n");
    svg
}

pub fn render_heatmap(result: &DeductionResult, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, render_svg(result)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::factorization::LossBreakdown;
    use crate::geometry::TunnelGrid;
    use crate::pipeline::deduce::ObservedCell;
    use chrono::NaiveDate;

    fn result(dense: Vec<Vec<f64>>, observed: Vec<CellIndex>) -> DeductionResult {
        DeductionResult {
            section_id: "S".into(),
            date: NaiveDate::from_ymd_opt(2017, 1, 1).unwrap(),
            observed: observed
                .into_iter()
                .map(|cell| ObservedCell {
                    cell,
                    sensor_id: format!("s{}", cell.part),
                    value: dense[cell.layer - 1][cell.part - 1],
                })
                .collect(),
            dense,
            loss: LossBreakdown::default(),
            offset: 0.0,
            epochs_run: 1,
            max_cell: CellIndex::new(1, 1),
            max_value: 0.0,
        }
    }

    fn cells_of(svg: &str) -> Vec<(usize, usize, f64, String)> {
        svg.lines()
            .filter(|l| l.contains(r#"class="annular-cell""#))
            .map(|l| {
                let attr = |name: &str| {
                    let start = l.find(&format!(r#"{name}=""#)).unwrap() + name.len() + 2;
                    let end = start + l[start..].find('"').unwrap();
                    l[start..end].to_string()
                };
                (
                    attr("data-layer").parse().unwrap(),
                    attr("data-part").parse().unwrap(),
                    attr("data-angle").parse().unwrap(),
                    attr("fill"),
                )
            })
            .collect()
    }

    #[test]
    fn annulus_has_one_shape_per_cell() {
        let dense: Vec<Vec<f64>> = (0..3)
            .map(|m| (0..50).map(|n| (m * n) as f64).collect())
            .collect();
        let svg = render_svg(&result(dense, vec![CellIndex::new(1, 4)]));
        assert_eq!(cells_of(&svg).len(), 150);
        assert_eq!(svg.matches(r#"class="matrix-cell""#).count(), 150);
        assert_eq!(svg.matches(r##"stroke="#000000""##).count(), 2);
    }

    #[test]
    fn constant_field_single_color() {
        let svg = render_svg(&result(vec![vec![3.0; 50]; 3], vec![]));
        let fills: BTreeSet<String> = cells_of(&svg).into_iter().map(|c| c.3).collect();
        assert_eq!(fills.len(), 1);
    }

    #[test]
    fn mirrored_input_gives_mirrored_image() {
        let grid = TunnelGrid::new(3, 50, 14.5).unwrap();
        let dense: Vec<Vec<f64>> = (0..3)
            .map(|m| (0..50).map(|n| ((m + 1) * (n * n % 17)) as f64).collect())
            .collect();
        let mirrored: Vec<Vec<f64>> = dense
            .iter()
            .map(|r| r.iter().rev().copied().collect())
            .collect();
        let a = cells_of(&render_svg(&result(dense, vec![])));
        let b = cells_of(&render_svg(&result(mirrored, vec![])));
        for (m, n, angle, fill) in &a {
            assert!((angle - grid.cell_angle(*n).unwrap()).abs() < 1e-6);
            let k = grid.mirror(*n).unwrap();
            let twin = b.iter().find(|c| c.0 == *m && c.1 == k).unwrap();
            assert_eq!(&twin.3, fill);
            assert!((angle + twin.2 - 2.0 * PI).abs() < 1e-5);
        }
    }

    #[test]
    fn colormap_endpoints() {
        assert_eq!(color(0.0), "#440154");
        assert_eq!(color(1.0), "#fde725");
    }
}
