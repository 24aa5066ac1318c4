//! Hand-written SVG 1.1 charts. Output depends only on the input data.

use std::fmt::Write;

use crate::sim::{RegimeLabel, RegimeMap, Sample};

const WIDTH: f64 = 900.0;
const PANEL_HEIGHT: f64 = 240.0;
const MARGIN_LEFT: f64 = 80.0;
const MARGIN_RIGHT: f64 = 80.0;
const MARGIN_TOP: f64 = 30.0;
const PANEL_GAP: f64 = 60.0;
/// Polylines are thinned to about this many points.
const MAX_POINTS: usize = 2000;

fn num(v: f64) -> String {
    let s = format!("{v:.2}");
    if s == "-0.00" {
        "0.00".into()
    } else {
        s
    }
}

fn tick_label(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if (1e-3..1e4).contains(&a) {
        let s = format!("{v:.4}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        format!("{v:.2e}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// Finite extremes of `values`, or `None` if there are none.
fn extent(values: impl Iterator<Item = f64>) -> Option<(f64, f64)> {
    values
        .filter(|v| v.is_finite())
        .fold(None, |acc, v| match acc {
            None => Some((v, v)),
            Some((lo, hi)) => Some((lo.min(v), hi.max(v))),
        })
}

/// Axis range with 5 % padding; a flat series gets a unit-width band.
fn padded((lo, hi): (f64, f64)) -> (f64, f64) {
    if hi > lo {
        let pad = 0.05 * (hi - lo);
        (lo - pad, hi + pad)
    } else {
        let half = if lo == 0.0 { 0.5 } else { 0.1 * lo.abs() };
        (lo - half, hi + half)
    }
}

struct Series<'a> {
    name: &'a str,
    color: &'a str,
    dashed: bool,
    /// Plot against the right-hand axis.
    right: bool,
    value: fn(&Sample) -> f64,
}

struct Frame {
    top: f64,
    t_range: (f64, f64),
}

impl Frame {
    fn px(&self, t: f64) -> f64 {
        let w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
        MARGIN_LEFT + w * (t - self.t_range.0) / (self.t_range.1 - self.t_range.0)
    }

    fn py(&self, v: f64, (lo, hi): (f64, f64)) -> f64 {
        self.top + PANEL_HEIGHT * (1.0 - (v - lo) / (hi - lo))
    }
}

fn thin(samples: &[Sample]) -> Vec<&Sample> {
    let stride = samples.len().div_ceil(MAX_POINTS).max(1);
    let mut out: Vec<&Sample> = samples.iter().step_by(stride).collect();
    if !(samples.len() - 1).is_multiple_of(stride) {
        out.push(samples.last().unwrap());
    }
    out
}

fn panel(
    svg: &mut String,
    id: &str,
    title: &str,
    frame: &Frame,
    samples: &[Sample],
    boundaries: &[f64],
    series: &[Series<'_>],
) {
    let left = extent(
        series
            .iter()
            .filter(|s| !s.right)
            .flat_map(|s| samples.iter().map(s.value)),
    );
    let right = extent(
        series
            .iter()
            .filter(|s| s.right)
            .flat_map(|s| samples.iter().map(s.value)),
    );
    let (lmin, lmax) = left.unwrap_or((0.0, 1.0));
    let _ = writeln!(
        svg,
        r#"<g id="{id}" class="panel" data-ymin="{}" data-ymax="{}">"#,
        lmin, lmax
    );
    let x0 = MARGIN_LEFT;
    let x1 = WIDTH - MARGIN_RIGHT;
    let (y0, y1) = (frame.top, frame.top + PANEL_HEIGHT);
    let _ = writeln!(
        svg,
        r##"<rect x="{}" y="{}" width="{}" height="{}" fill="none" stroke="#000000"/>"##,
        num(x0),
        num(y0),
        num(x1 - x0),
        num(PANEL_HEIGHT)
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" font-size="14" text-anchor="middle">{}</text>"#,
        num(0.5 * (x0 + x1)),
        num(y0 - 8.0),
        escape(title)
    );

    for &t in boundaries {
        let x = frame.px(t);
        let _ = writeln!(
            svg,
            r##"<line class="phase-boundary" x1="{0}" y1="{1}" x2="{0}" y2="{2}" stroke="#888888" stroke-dasharray="2,3"/>"##,
            num(x),
            num(y0),
            num(y1)
        );
    }

    for k in 0..=5 {
        let t = frame.t_range.0 + (frame.t_range.1 - frame.t_range.0) * k as f64 / 5.0;
        let x = frame.px(t);
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" font-size="11" text-anchor="middle">{}</text>"#,
            num(x),
            num(y1 + 15.0),
            tick_label(t)
        );
    }

    let ranges = [(false, left.map(padded)), (true, right.map(padded))];
    for (is_right, range) in ranges {
        let Some(range) = range else { continue };
        let (x, anchor) = if is_right {
            (x1 + 6.0, "start")
        } else {
            (x0 - 6.0, "end")
        };
        for k in 0..=4 {
            let v = range.0 + (range.1 - range.0) * k as f64 / 4.0;
            let _ = writeln!(
                svg,
                r#"<text x="{}" y="{}" font-size="11" text-anchor="{anchor}">{}</text>"#,
                num(x),
                num(frame.py(v, range) + 4.0),
                tick_label(v)
            );
        }
        let names: Vec<&str> = series
            .iter()
            .filter(|s| s.right == is_right)
            .map(|s| s.name)
            .collect();
        let (lx, rot) = if is_right {
            (WIDTH - 12.0, 90)
        } else {
            (14.0, -90)
        };
        let ly = 0.5 * (y0 + y1);
        let _ = writeln!(
            svg,
            r#"<text x="{0}" y="{1}" font-size="12" text-anchor="middle" transform="rotate({rot} {0} {1})">{2}</text>"#,
            num(lx),
            num(ly),
            escape(&names.join(", "))
        );

        for s in series.iter().filter(|s| s.right == is_right) {
            let mut points = String::new();
            for sample in thin(samples) {
                let v = (s.value)(sample);
                if v.is_finite() {
                    let _ = write!(
                        points,
                        "{},{} ",
                        num(frame.px(sample.t)),
                        num(frame.py(v, range))
                    );
                }
            }
            let dash = if s.dashed {
                r#" stroke-dasharray="6,4""#
            } else {
                ""
            };
            let _ = writeln!(
                svg,
                r#"<polyline class="series" data-name="{}" fill="none" stroke="{}" stroke-width="1.5"{dash} points="{}"/>"#,
                escape(s.name),
                s.color,
                points.trim_end()
            );
        }
    }

    let mut lx = x0 + 10.0;
    for s in series {
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" font-size="11" fill="{}">{}</text>"#,
            num(lx),
            num(y0 + 14.0),
            s.color,
            escape(s.name)
        );
        lx += 12.0 + 7.0 * s.name.chars().count() as f64;
    }
    svg.push_str("</g>\n");
}

/// Three stacked panels: state (x, y), tracking error, inspection probability.
///
/// Each panel's `data-ymin`/`data-ymax` carry the unpadded range of its
/// left-axis series. `samples` must be non-empty.
pub fn trajectory_svg(samples: &[Sample]) -> String {
    assert!(!samples.is_empty(), "nothing to plot");
    let t_lo = samples[0].t;
    let t_hi = samples.last().unwrap().t;
    let t_range = if t_hi > t_lo {
        (t_lo, t_hi)
    } else {
        (t_lo - 0.5, t_lo + 0.5)
    };
    let boundaries: Vec<f64> = samples
        .windows(2)
        .filter(|w| w[1].phase != w[0].phase)
        .map(|w| w[1].t)
        .collect();
    let height = MARGIN_TOP + 3.0 * PANEL_HEIGHT + 2.0 * PANEL_GAP + 40.0;
    let mut svg = String::new();
    let _ = writeln!(svg, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{}" height="{}" viewBox="0 0 {} {}" font-family="sans-serif">"#,
        WIDTH, height, WIDTH, height
    );
    let _ = writeln!(
        svg,
        r##"<rect width="100%" height="100%" fill="#ffffff"/>"##
    );

    let panels: [(&str, &str, Vec<Series<'_>>); 3] = [
        (
            "panel-state",
            "(a) cooperation level and resource",
            vec![
                Series {
                    name: "x",
                    color: "#1f77b4",
                    dashed: false,
                    right: false,
                    value: |s| s.x,
                },
                Series {
                    name: "x_m",
                    color: "#1f77b4",
                    dashed: true,
                    right: false,
                    value: |s| s.x_m,
                },
                Series {
                    name: "y",
                    color: "#d62728",
                    dashed: false,
                    right: true,
                    value: |s| s.y,
                },
                Series {
                    name: "y_m",
                    color: "#d62728",
                    dashed: true,
                    right: true,
                    value: |s| s.y_m,
                },
            ],
        ),
        (
            "panel-error",
            "(b) tracking error",
            vec![
                Series {
                    name: "e1",
                    color: "#2ca02c",
                    dashed: false,
                    right: false,
                    value: |s| s.e1,
                },
                Series {
                    name: "e2",
                    color: "#9467bd",
                    dashed: false,
                    right: true,
                    value: |s| s.e2,
                },
            ],
        ),
        (
            "panel-p-hat",
            "(c) inspection probability",
            vec![Series {
                name: "p_hat",
                color: "#ff7f0e",
                dashed: false,
                right: false,
                value: |s| s.p_hat,
            }],
        ),
    ];
    for (i, (id, title, series)) in panels.iter().enumerate() {
        let frame = Frame {
            top: MARGIN_TOP + i as f64 * (PANEL_HEIGHT + PANEL_GAP),
            t_range,
        };
        panel(&mut svg, id, title, &frame, samples, &boundaries, series);
    }
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" font-size="12" text-anchor="middle">t</text>"#,
        num(WIDTH / 2.0),
        num(height - 8.0)
    );
    svg.push_str("</svg>\n");
    svg
}

pub fn label_color(label: RegimeLabel) -> &'static str {
    match label {
        RegimeLabel::Desired => "#2ca02c",
        RegimeLabel::AllDefectSustained => "#d62728",
        RegimeLabel::CoexistenceInterior => "#ff7f0e",
        RegimeLabel::Depleted => "#7f7f7f",
        RegimeLabel::Boundary => "#000000",
        RegimeLabel::NonConvergent => "#9467bd",
    }
}

/// Heat map with one cell per grid point, `r` horizontal and `p̂β` vertical.
pub fn regime_map_svg(map: &RegimeMap) -> String {
    let (nr, np) = (map.r_values.len(), map.pbeta_values.len());
    let plot_w = 600.0;
    let plot_h = 450.0;
    let (cw, ch) = (plot_w / nr as f64, plot_h / np as f64);
    let (x0, y0) = (MARGIN_LEFT, MARGIN_TOP);
    let width = x0 + plot_w + 220.0;
    let height = y0 + plot_h + 60.0;
    let mut svg = String::new();
    let _ = writeln!(svg, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{0}" height="{1}" viewBox="0 0 {0} {1}" font-family="sans-serif">"#,
        num(width),
        num(height)
    );
    let _ = writeln!(
        svg,
        r##"<rect width="100%" height="100%" fill="#ffffff"/>"##
    );
    for i in 0..nr {
        for j in 0..np {
            let label = map.label(i, j);
            let _ = writeln!(
                svg,
                r#"<rect class="cell" x="{}" y="{}" width="{}" height="{}" fill="{}" data-r="{}" data-p-beta="{}" data-label="{}"/>"#,
                num(x0 + i as f64 * cw),
                num(y0 + plot_h - (j + 1) as f64 * ch),
                num(cw),
                num(ch),
                label_color(label),
                map.r_values[i],
                map.pbeta_values[j],
                label
            );
        }
    }
    let _ = writeln!(
        svg,
        r##"<rect x="{}" y="{}" width="{}" height="{}" fill="none" stroke="#000000"/>"##,
        num(x0),
        num(y0),
        num(plot_w),
        num(plot_h)
    );
    let ticks = |values: &[f64]| -> Vec<usize> {
        let n = values.len();
        if n <= 6 {
            (0..n).collect()
        } else {
            (0..6).map(|k| k * (n - 1) / 5).collect()
        }
    };
    for i in ticks(&map.r_values) {
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" font-size="11" text-anchor="middle">{}</text>"#,
            num(x0 + (i as f64 + 0.5) * cw),
            num(y0 + plot_h + 15.0),
            tick_label(map.r_values[i])
        );
    }
    for j in ticks(&map.pbeta_values) {
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" font-size="11" text-anchor="end">{}</text>"#,
            num(x0 - 6.0),
            num(y0 + plot_h - (j as f64 + 0.5) * ch + 4.0),
            tick_label(map.pbeta_values[j])
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" font-size="12" text-anchor="middle">r</text>"#,
        num(x0 + plot_w / 2.0),
        num(y0 + plot_h + 35.0)
    );
    let _ = writeln!(
        svg,
        r#"<text x="20" y="{0}" font-size="12" text-anchor="middle" transform="rotate(-90 20 {0})">p_hat * beta</text>"#,
        num(y0 + plot_h / 2.0)
    );
    svg.push_str("<g id=\"legend\">\n");
    for (k, label) in RegimeLabel::ALL.iter().enumerate() {
        let ly = y0 + 10.0 + 22.0 * k as f64;
        let _ = writeln!(
            svg,
            r#"<rect x="{}" y="{}" width="14" height="14" fill="{}"/>"#,
            num(x0 + plot_w + 20.0),
            num(ly),
            label_color(*label)
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" font-size="12">{}</text>"#,
            num(x0 + plot_w + 40.0),
            num(ly + 11.0),
            label
        );
    }
    svg.push_str("</g>\n</svg>\n");
    svg
}
