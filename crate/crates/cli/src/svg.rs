//! Minimal static SVG 1.1 plots: log-scaled line charts and a discrete
//! log10-error heatmap. Deterministic output: identical inputs produce
//! identical bytes.

use std::fmt::Write;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN_LEFT: f64 = 78.0;
const MARGIN_RIGHT: f64 = 24.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 58.0;

const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf",
];

/// One polyline with a legend label.
pub struct Series {
    pub label: String,
    /// Raw data coordinates; non-finite points are skipped.
    pub points: Vec<(f64, f64)>,
}

#[derive(Clone, Copy)]
pub enum Scale {
    Linear,
    Log10,
}

struct Axis {
    scale: Scale,
    min: f64,
    max: f64,
}

impl Axis {
    fn fit(scale: Scale, values: impl Iterator<Item = f64>) -> Axis {
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        for v in values {
            if !v.is_finite() {
                continue;
            }
            if matches!(scale, Scale::Log10) && v <= 0.0 {
                continue;
            }
            min = min.min(v);
            max = max.max(v);
        }
        if !min.is_finite() || !max.is_finite() {
            min = 1.0;
            max = 10.0;
        }
        if min == max {
            // widen a degenerate range so the point sits mid-axis
            match scale {
                Scale::Linear => {
                    min -= 0.5;
                    max += 0.5;
                }
                Scale::Log10 => {
                    min /= 10.0;
                    max *= 10.0;
                }
            }
        }
        Axis { scale, min, max }
    }

    fn coord(&self, v: f64) -> f64 {
        match self.scale {
            Scale::Linear => (v - self.min) / (self.max - self.min),
            Scale::Log10 => (v.log10() - self.min.log10()) / (self.max.log10() - self.min.log10()),
        }
    }

    /// Tick positions in data coordinates with printed labels.
    fn ticks(&self) -> Vec<(f64, String)> {
        match self.scale {
            Scale::Linear => {
                let n = 5usize;
                (0..=n)
                    .map(|i| {
                        let v = self.min + (self.max - self.min) * i as f64 / n as f64;
                        (v, format_tick(v))
                    })
                    .collect()
            }
            Scale::Log10 => {
                let lo = self.min.log10().floor() as i32;
                let hi = self.max.log10().ceil() as i32;
                let step = (((hi - lo) as usize / 8) + 1) as i32;
                (lo..=hi)
                    .step_by(step as usize)
                    .map(|e| (10f64.powi(e), format!("1e{e}")))
                    .filter(|&(v, _)| v >= self.min / 1.001 && v <= self.max * 1.001)
                    .collect()
            }
        }
    }
}

fn format_tick(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 0.01 && v.abs() < 10000.0 {
        let s = format!("{v:.2}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        format!("{v:.1e}")
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn header(out: &mut String, title: &str) {
    let _ = write!(
        out,
        concat!(
            "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n",
            "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" ",
            "width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n",
            "<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n",
            "<text x=\"{tx}\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\" ",
            "text-anchor=\"middle\">{title}</text>\n"
        ),
        w = WIDTH,
        h = HEIGHT,
        tx = WIDTH / 2.0,
        title = xml_escape(title),
    );
}

fn axes_frame(out: &mut String, xlabel: &str, ylabel: &str, xa: &Axis, ya: &Axis) {
    let (x0, x1) = (MARGIN_LEFT, WIDTH - MARGIN_RIGHT);
    let (y0, y1) = (HEIGHT - MARGIN_BOTTOM, MARGIN_TOP);
    let _ = write!(
        out,
        "<rect x=\"{x0}\" y=\"{y1}\" width=\"{w:.1}\" height=\"{h:.1}\" fill=\"none\" stroke=\"black\"/>\n",
        w = x1 - x0,
        h = y0 - y1,
    );
    for (v, label) in xa.ticks() {
        let px = x0 + xa.coord(v) * (x1 - x0);
        let _ = write!(
            out,
            concat!(
                "<line x1=\"{px:.1}\" y1=\"{y0}\" x2=\"{px:.1}\" y2=\"{yt:.1}\" stroke=\"black\"/>\n",
                "<text x=\"{px:.1}\" y=\"{ly:.1}\" font-family=\"sans-serif\" font-size=\"11\" ",
                "text-anchor=\"middle\">{label}</text>\n"
            ),
            px = px,
            y0 = y0,
            yt = y0 + 5.0,
            ly = y0 + 18.0,
            label = label,
        );
    }
    for (v, label) in ya.ticks() {
        let py = y0 - ya.coord(v) * (y0 - y1);
        let _ = write!(
            out,
            concat!(
                "<line x1=\"{x0}\" y1=\"{py:.1}\" x2=\"{xt:.1}\" y2=\"{py:.1}\" stroke=\"black\"/>\n",
                "<text x=\"{lx:.1}\" y=\"{ty:.1}\" font-family=\"sans-serif\" font-size=\"11\" ",
                "text-anchor=\"end\">{label}</text>\n"
            ),
            x0 = x0,
            py = py,
            xt = x0 - 5.0,
            lx = x0 - 8.0,
            ty = py + 4.0,
            label = label,
        );
    }
    let _ = write!(
        out,
        concat!(
            "<text x=\"{cx:.1}\" y=\"{by:.1}\" font-family=\"sans-serif\" font-size=\"13\" ",
            "text-anchor=\"middle\">{xl}</text>\n",
            "<text x=\"18\" y=\"{cy:.1}\" font-family=\"sans-serif\" font-size=\"13\" ",
            "text-anchor=\"middle\" transform=\"rotate(-90 18 {cy:.1})\">{yl}</text>\n"
        ),
        cx = (x0 + x1) / 2.0,
        by = HEIGHT - 14.0,
        cy = (y0 + y1) / 2.0,
        xl = xml_escape(xlabel),
        yl = xml_escape(ylabel),
    );
}

/// Multi-series line chart with optional log scaling per axis.
pub fn line_plot(
    title: &str,
    xlabel: &str,
    ylabel: &str,
    xscale: Scale,
    yscale: Scale,
    series: &[Series],
) -> String {
    let xa = Axis::fit(
        xscale,
        series.iter().flat_map(|s| s.points.iter().map(|p| p.0)),
    );
    let ya = Axis::fit(
        yscale,
        series.iter().flat_map(|s| s.points.iter().map(|p| p.1)),
    );
    let (x0, x1) = (MARGIN_LEFT, WIDTH - MARGIN_RIGHT);
    let (y0, y1) = (HEIGHT - MARGIN_BOTTOM, MARGIN_TOP);
    let mut out = String::new();
    header(&mut out, title);
    axes_frame(&mut out, xlabel, ylabel, &xa, &ya);
    for (si, s) in series.iter().enumerate() {
        let color = PALETTE[si % PALETTE.len()];
        let pts: Vec<(f64, f64)> = s
            .points
            .iter()
            .filter(|p| {
                p.0.is_finite()
                    && p.1.is_finite()
                    && (matches!(xscale, Scale::Linear) || p.0 > 0.0)
                    && (matches!(yscale, Scale::Linear) || p.1 > 0.0)
            })
            .map(|p| {
                (
                    x0 + xa.coord(p.0) * (x1 - x0),
                    y0 - ya.coord(p.1) * (y0 - y1),
                )
            })
            .collect();
        if pts.len() > 1 {
            let path: Vec<String> = pts.iter().map(|p| format!("{:.1},{:.1}", p.0, p.1)).collect();
            let _ = write!(
                out,
                "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>\n",
                path.join(" "),
            );
        }
        for p in &pts {
            let _ = write!(
                out,
                "<circle cx=\"{:.1}\" cy=\"{:.1}\" r=\"3\" fill=\"{color}\"/>\n",
                p.0, p.1,
            );
        }
        let ly = y1 + 16.0 + 16.0 * si as f64;
        let _ = write!(
            out,
            concat!(
                "<line x1=\"{lx:.1}\" y1=\"{ly:.1}\" x2=\"{lx2:.1}\" y2=\"{ly:.1}\" ",
                "stroke=\"{color}\" stroke-width=\"1.5\"/>\n",
                "<text x=\"{tx:.1}\" y=\"{ty:.1}\" font-family=\"sans-serif\" font-size=\"12\">{label}</text>\n"
            ),
            lx = x1 - 150.0,
            lx2 = x1 - 126.0,
            ly = ly,
            color = color,
            tx = x1 - 120.0,
            ty = ly + 4.0,
            label = xml_escape(&s.label),
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Discrete colormap over integer log10-error levels, blue (small) to red
/// (large).
const HEAT_COLORS: [&str; 8] = [
    "#08306b", "#2171b5", "#6baed6", "#c6dbef", "#fddbc7", "#ef8a62", "#d6604d", "#b2182b",
];
const HEAT_FAIL: &str = "#999999";

/// Heatmap of `values[row * xs.len() + col]` (row-major, rows indexed by
/// `ys`), where each value is a log10 error; `None` marks a failed cell.
pub fn heatmap(
    title: &str,
    xlabel: &str,
    ylabel: &str,
    xs: &[f64],
    ys: &[f64],
    values: &[Option<f64>],
) -> String {
    assert_eq!(values.len(), xs.len() * ys.len());
    let finite: Vec<f64> = values.iter().flatten().copied().collect();
    let lo = finite.iter().cloned().fold(f64::INFINITY, f64::min).floor();
    let hi = finite.iter().cloned().fold(f64::NEG_INFINITY, f64::max).ceil();
    let (lo, hi) = if lo.is_finite() && hi > lo {
        (lo, hi)
    } else {
        (-6.0, 2.0)
    };
    let color_of = |v: f64| -> &'static str {
        let t = (v - lo) / (hi - lo);
        let idx = (t * HEAT_COLORS.len() as f64).floor() as isize;
        HEAT_COLORS[idx.clamp(0, HEAT_COLORS.len() as isize - 1) as usize]
    };

    let (x0, x1) = (MARGIN_LEFT, WIDTH - MARGIN_RIGHT - 90.0);
    let (y0, y1) = (HEIGHT - MARGIN_BOTTOM, MARGIN_TOP);
    let cw = (x1 - x0) / xs.len() as f64;
    let ch = (y0 - y1) / ys.len() as f64;
    let mut out = String::new();
    header(&mut out, title);
    for (r, _) in ys.iter().enumerate() {
        for (c, _) in xs.iter().enumerate() {
            let fill = match values[r * xs.len() + c] {
                Some(v) => color_of(v),
                None => HEAT_FAIL,
            };
            let _ = write!(
                out,
                "<rect x=\"{:.1}\" y=\"{:.1}\" width=\"{:.1}\" height=\"{:.1}\" fill=\"{}\" stroke=\"white\"/>\n",
                x0 + c as f64 * cw,
                y0 - (r + 1) as f64 * ch,
                cw,
                ch,
                fill,
            );
        }
    }
    for (c, x) in xs.iter().enumerate() {
        let _ = write!(
            out,
            "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">{}</text>\n",
            x0 + (c as f64 + 0.5) * cw,
            y0 + 16.0,
            format_tick(*x),
        );
    }
    for (r, y) in ys.iter().enumerate() {
        let _ = write!(
            out,
            "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">{}</text>\n",
            x0 - 8.0,
            y0 - (r as f64 + 0.5) * ch + 4.0,
            format_tick(*y),
        );
    }
    let _ = write!(
        out,
        concat!(
            "<text x=\"{cx:.1}\" y=\"{by:.1}\" font-family=\"sans-serif\" font-size=\"13\" ",
            "text-anchor=\"middle\">{xl}</text>\n",
            "<text x=\"18\" y=\"{cy:.1}\" font-family=\"sans-serif\" font-size=\"13\" ",
            "text-anchor=\"middle\" transform=\"rotate(-90 18 {cy:.1})\">{yl}</text>\n"
        ),
        cx = (x0 + x1) / 2.0,
        by = HEIGHT - 14.0,
        cy = (y0 + y1) / 2.0,
        xl = xml_escape(xlabel),
        yl = xml_escape(ylabel),
    );
    // colorbar with one swatch per discrete level
    let bar_x = x1 + 24.0;
    let bar_h = (y0 - y1) / HEAT_COLORS.len() as f64;
    for (i, color) in HEAT_COLORS.iter().enumerate() {
        let top = y0 - (i + 1) as f64 * bar_h;
        let _ = write!(
            out,
            concat!(
                "<rect x=\"{bx:.1}\" y=\"{top:.1}\" width=\"18\" height=\"{bh:.1}\" ",
                "fill=\"{color}\" stroke=\"white\"/>\n",
                "<text x=\"{tx:.1}\" y=\"{ty:.1}\" font-family=\"sans-serif\" font-size=\"10\">{label}</text>\n"
            ),
            bx = bar_x,
            top = top,
            bh = bar_h,
            color = color,
            tx = bar_x + 22.0,
            ty = top + bar_h,
            label = format_tick(lo + (hi - lo) * i as f64 / HEAT_COLORS.len() as f64),
        );
    }
    let _ = write!(
        out,
        "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"11\">log10 err</text>\n",
        bar_x - 4.0,
        y1 - 6.0,
    );
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_plot_is_valid_and_deterministic() {
        let series = vec![
            Series {
                label: "a".into(),
                points: vec![(0.1, 1e-3), (0.5, 1e-5), (1.0, 1e-7)],
            },
            Series {
                label: "b".into(),
                points: vec![(0.1, 1e-2), (0.5, f64::NAN), (1.0, 1e-4)],
            },
        ];
        let a = line_plot("t", "eps", "rms", Scale::Log10, Scale::Log10, &series);
        let b = line_plot("t", "eps", "rms", Scale::Log10, Scale::Log10, &series);
        assert_eq!(a, b);
        assert!(a.starts_with("<?xml"));
        assert!(a.contains("<svg"));
        assert!(a.ends_with("</svg>\n"));
        assert_eq!(a.matches("<polyline").count(), 2);
    }

    #[test]
    fn heatmap_marks_failures_gray() {
        let xs = [1.0, 2.0];
        let ys = [10.0, 30.0];
        let vals = [Some(-4.0), Some(-2.0), None, Some(0.0)];
        let s = heatmap("iso", "eps", "n", &xs, &ys, &vals);
        assert_eq!(s.matches(HEAT_FAIL).count(), 1);
        assert_eq!(s.matches("<rect").count(), 1 + 4 + HEAT_COLORS.len());
    }

    #[test]
    fn degenerate_ranges_do_not_panic() {
        let s = line_plot(
            "t",
            "x",
            "y",
            Scale::Linear,
            Scale::Log10,
            &[Series {
                label: "one".into(),
                points: vec![(1.0, 1e-3)],
            }],
        );
        assert!(s.contains("<circle"));
    }
}
