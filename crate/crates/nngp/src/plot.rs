//! Minimal SVG output: heatmaps as rect grids and line charts as polylines.
//! Numbers are written with fixed precision so files are reproducible.

use std::fmt::Write;

use crate::experiments::{CellStatus, SweepCell};

const CELL: f64 = 12.0;
const MARGIN: f64 = 60.0;

/// Colour for `t` in [0, 1], dark blue to yellow.
fn ramp(t: f64) -> String {
    let t = if t.is_finite() {
        t.clamp(0.0, 1.0)
    } else {
        0.0
    };
    let stops = [
        (68.0, 1.0, 84.0),
        (59.0, 82.0, 139.0),
        (33.0, 145.0, 140.0),
        (94.0, 201.0, 98.0),
        (253.0, 231.0, 37.0),
    ];
    let x = t * (stops.len() - 1) as f64;
    let i = (x.floor() as usize).min(stops.len() - 2);
    let f = x - i as f64;
    let (a, b) = (stops[i], stops[i + 1]);
    let mix = |p: f64, q: f64| (p + (q - p) * f).round() as u8;
    format!(
        "#{:02x}{:02x}{:02x}",
        mix(a.0, b.0),
        mix(a.1, b.1),
        mix(a.2, b.2)
    )
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace("--", "- -")
}

fn header(out: &mut String, w: f64, h: f64, meta: &[(String, String)]) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0}" height="{h:.0}">"#
    );
    out.push_str("<!--\n");
    for (k, v) in meta {
        let _ = writeln!(out, "{}: {}", escape(k), escape(v));
    }
    out.push_str("-->\n");
    let _ = writeln!(
        out,
        r#"<rect width="{w:.0}" height="{h:.0}" fill="white"/>"#
    );
}

fn sorted_unique(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

/// Which metric a heatmap colours by.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Accuracy,
    FrobeniusNorm,
    MeanVariance,
}

impl Metric {
    fn value(self, c: &SweepCell) -> Option<f64> {
        match self {
            Metric::Accuracy => c.accuracy,
            Metric::FrobeniusNorm => c.frobenius_norm.map(f64::log10),
            Metric::MeanVariance => c.mean_pred_variance.map(f64::log10),
        }
    }

    fn label(self) -> &'static str {
        match self {
            Metric::Accuracy => "accuracy",
            Metric::FrobeniusNorm => "log10 frobenius norm",
            Metric::MeanVariance => "log10 mean predictive variance",
        }
    }
}

/// Heatmap of one depth: sigma_w2 along x, mu2 along y (increasing upward).
/// Cells that did not finish are grey.
pub fn heatmap_svg(
    cells: &[SweepCell],
    depth: usize,
    metric: Metric,
    meta: &[(String, String)],
) -> String {
    let cells: Vec<&SweepCell> = cells.iter().filter(|c| c.depth == depth).collect();
    let ws = sorted_unique(cells.iter().map(|c| c.sigma_w2).collect());
    let ms = sorted_unique(cells.iter().map(|c| c.mu2).collect());
    let values: Vec<f64> = cells
        .iter()
        .filter_map(|c| metric.value(c))
        .filter(|v| v.is_finite())
        .collect();
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let width = 2.0 * MARGIN + CELL * ws.len() as f64;
    let height = 2.0 * MARGIN + CELL * ms.len() as f64;
    let mut out = String::new();
    header(&mut out, width, height, meta);
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="20" font-size="12">depth {depth}, {} in [{lo:.4}, {hi:.4}]</text>"#,
        MARGIN,
        metric.label()
    );
    for c in &cells {
        let i = ws.iter().position(|&w| w == c.sigma_w2).unwrap_or(0);
        let j = ms.iter().position(|&m| m == c.mu2).unwrap_or(0);
        let x = MARGIN + CELL * i as f64;
        let y = MARGIN + CELL * (ms.len() - 1 - j) as f64;
        let fill = match (c.status, metric.value(c)) {
            (CellStatus::Ok, Some(v)) if v.is_finite() => ramp((v - lo) / span),
            _ => "#999999".to_string(),
        };
        let _ = writeln!(
            out,
            r#"<rect x="{x:.1}" y="{y:.1}" width="{CELL:.1}" height="{CELL:.1}" fill="{fill}"><title>sigma_w2={} mu2={} {}</title></rect>"#,
            c.sigma_w2, c.mu2, c.status
        );
    }
    let bottom = MARGIN + CELL * ms.len() as f64;
    let _ = writeln!(
        out,
        r#"<text x="{MARGIN:.1}" y="{:.1}" font-size="12">sigma_w2 {} .. {}</text>"#,
        bottom + 20.0,
        ws.first().copied().unwrap_or(0.0),
        ws.last().copied().unwrap_or(0.0)
    );
    let _ = writeln!(
        out,
        r#"<text x="5" y="{:.1}" font-size="12">mu2 {} .. {}</text>"#,
        MARGIN - 8.0,
        ms.first().copied().unwrap_or(0.0),
        ms.last().copied().unwrap_or(0.0)
    );
    out.push_str("</svg>\n");
    out
}

/// One named series for [`lines_svg`].
pub struct Series<'a> {
    pub name: String,
    pub x: &'a [f64],
    pub y: &'a [f64],
}

/// Line chart of several series sharing axes. Non-finite points are dropped.
pub fn lines_svg(series: &[Series<'_>], log_y: bool, meta: &[(String, String)]) -> String {
    const W: f64 = 640.0;
    const H: f64 = 400.0;
    let tf = |v: f64| {
        if log_y {
            v.abs().max(f64::MIN_POSITIVE).log10()
        } else {
            v
        }
    };
    let pts: Vec<Vec<(f64, f64)>> = series
        .iter()
        .map(|s| {
            s.x.iter()
                .zip(s.y)
                .map(|(&x, &y)| (x, tf(y)))
                .filter(|p| p.0.is_finite() && p.1.is_finite())
                .collect()
        })
        .collect();
    let all = || pts.iter().flatten();
    let (x0, x1) = all().fold((f64::INFINITY, f64::NEG_INFINITY), |a, p| {
        (a.0.min(p.0), a.1.max(p.0))
    });
    let (y0, y1) = all().fold((f64::INFINITY, f64::NEG_INFINITY), |a, p| {
        (a.0.min(p.1), a.1.max(p.1))
    });
    let sx = if x1 > x0 {
        (W - 2.0 * MARGIN) / (x1 - x0)
    } else {
        1.0
    };
    let sy = if y1 > y0 {
        (H - 2.0 * MARGIN) / (y1 - y0)
    } else {
        1.0
    };
    let mut out = String::new();
    header(&mut out, W, H, meta);
    let _ = writeln!(
        out,
        r#"<text x="{MARGIN:.1}" y="20" font-size="12">x in [{x0:.4}, {x1:.4}], {}y in [{y0:.4}, {y1:.4}]</text>"#,
        if log_y { "log10 " } else { "" }
    );
    for (k, (s, p)) in series.iter().zip(&pts).enumerate() {
        let colour = ramp(if series.len() > 1 {
            k as f64 / (series.len() - 1) as f64
        } else {
            0.0
        });
        let coords: Vec<String> = p
            .iter()
            .map(|(x, y)| {
                format!(
                    "{:.2},{:.2}",
                    MARGIN + (x - x0) * sx,
                    H - MARGIN - (y - y0) * sy
                )
            })
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="{colour}" stroke-width="1.5" points="{}"/>"#,
            coords.join(" ")
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" font-size="11" fill="{colour}">{}</text>"#,
            W - MARGIN + 4.0,
            MARGIN + 14.0 * k as f64,
            escape(&s.name)
        );
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cell(w: f64, mu2: f64, acc: Option<f64>) -> SweepCell {
        SweepCell {
            depth: 10,
            mu2,
            sigma_w2: w,
            sigma_b2: 0.0,
            status: if acc.is_some() {
                CellStatus::Ok
            } else {
                CellStatus::Overflow
            },
            accuracy: acc,
            frobenius_norm: acc,
            mean_pred_variance: acc,
            distance_to_critical: 0.0,
        }
    }

    #[test]
    fn heatmap_has_one_rect_per_cell() {
        let cells = vec![
            cell(1.0, 1.0, Some(0.5)),
            cell(2.0, 1.0, Some(0.9)),
            cell(1.0, 2.0, None),
            cell(2.0, 2.0, Some(0.7)),
        ];
        let svg = heatmap_svg(
            &cells,
            10,
            Metric::Accuracy,
            &[("command".into(), "sweep".into())],
        );
        assert_eq!(svg.matches("<rect x=").count(), 4);
        assert!(svg.contains("#999999"));
        assert!(svg.contains("command: sweep"));
        assert_eq!(
            svg,
            heatmap_svg(
                &cells,
                10,
                Metric::Accuracy,
                &[("command".into(), "sweep".into())]
            )
        );
    }

    #[test]
    fn lines_skip_non_finite() {
        let x = [0.0, 1.0, 2.0];
        let y = [1.0, f64::INFINITY, 3.0];
        let svg = lines_svg(
            &[Series {
                name: "a".into(),
                x: &x,
                y: &y,
            }],
            false,
            &[],
        );
        let pts = svg
            .split("points=\"")
            .nth(1)
            .unwrap()
            .split('"')
            .next()
            .unwrap();
        assert_eq!(pts.split(' ').count(), 2);
    }
}
