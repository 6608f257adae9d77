//! Dependency-free SVG rendering of aggregated sweep series: one file per
//! metric, mean line plus ±1 std band, decay and constant arms overlaid.

use std::path::{Path, PathBuf};

use crate::error::Result;
use crate::harness::sweep::{read_aggregate_csv, AggregateRow};
use crate::trainer::IterationRecord;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 160.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 55.0;

const PALETTE: [&str; 8] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

/// One plotted series: a mean line with a ±1 std band.
struct Series {
    label: String,
    xs: Vec<f64>,
    means: Vec<f64>,
    stds: Vec<f64>,
    color: &'static str,
}

/// Outcome of a plotting pass.
#[derive(Debug, Default)]
pub struct PlotSummary {
    pub written: Vec<PathBuf>,
    pub skipped: Vec<String>,
}

/// Render one SVG per metric from aggregated rows. Metrics with no finite
/// values are skipped with a warning line on stderr.
pub fn emit_plots(rows: &[AggregateRow], out_dir: &Path) -> Result<PlotSummary> {
    std::fs::create_dir_all(out_dir)?;
    let mut summary = PlotSummary::default();
    if rows.is_empty() {
        summary.skipped.push("no aggregate rows".into());
        eprintln!("warning: no aggregate rows to plot");
        return Ok(summary);
    }

    for (col, metric) in IterationRecord::NUMERIC_COLUMNS.iter().enumerate() {
        if *metric == "wallclock_ns" {
            continue; // timing noise, not a figure
        }
        // Group rows into series keyed by (value, arm), preserving order.
        let mut keys: Vec<(f64, String)> = Vec::new();
        for row in rows {
            let key = (row.value, row.arm.clone());
            if !keys.contains(&key) {
                keys.push(key);
            }
        }
        let mut series = Vec::new();
        for (idx, (value, arm)) in keys.iter().enumerate() {
            let mut xs = Vec::new();
            let mut means = Vec::new();
            let mut stds = Vec::new();
            for row in rows.iter().filter(|r| r.value == *value && &r.arm == arm) {
                xs.push(row.t as f64);
                means.push(row.means[col]);
                stds.push(row.stds[col]);
            }
            let label = if keys.iter().filter(|(v, _)| v == value).count() == keys.len() {
                // Single axis value: label by arm only.
                arm.clone()
            } else {
                format!("{}={} {}", rows[0].axis, value, arm)
            };
            series.push(Series {
                label,
                xs,
                means,
                stds,
                color: PALETTE[idx % PALETTE.len()],
            });
        }
        let finite = series
            .iter()
            .flat_map(|s| s.means.iter())
            .any(|v| v.is_finite());
        if !finite {
            eprintln!("warning: metric '{metric}' has no finite values, plot skipped");
            summary.skipped.push((*metric).to_string());
            continue;
        }
        let svg = render_svg(metric, "t", metric, &series);
        let path = out_dir.join(format!("{metric}.svg"));
        std::fs::write(&path, svg)?;
        summary.written.push(path);
    }
    Ok(summary)
}

/// As [`emit_plots`], reading the rows from an `aggregate.csv`.
pub fn emit_plots_from_csv(csv_path: &Path, out_dir: &Path) -> Result<PlotSummary> {
    let rows = read_aggregate_csv(csv_path)?;
    emit_plots(&rows, out_dir)
}

fn nice_ticks(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if !(lo.is_finite() && hi.is_finite()) || lo >= hi {
        return vec![lo];
    }
    let span = hi - lo;
    let raw_step = span / count as f64;
    let mag = 10.0_f64.powf(raw_step.log10().floor());
    let step = [1.0, 2.0, 2.5, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| span / s <= count as f64 + 0.5)
        .unwrap_or(mag * 10.0);
    let start = (lo / step).ceil() * step;
    let mut ticks = Vec::new();
    let mut v = start;
    while v <= hi + step * 1e-9 {
        ticks.push(v);
        v += step;
    }
    ticks
}

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if a >= 1e4 || a < 1e-3 {
        format!("{v:.1e}")
    } else if a >= 10.0 {
        format!("{v:.0}")
    } else {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn render_svg(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;

    let mut x_min = f64::INFINITY;
    let mut x_max = f64::NEG_INFINITY;
    let mut y_min = f64::INFINITY;
    let mut y_max = f64::NEG_INFINITY;
    for s in series {
        for (i, &x) in s.xs.iter().enumerate() {
            if !s.means[i].is_finite() {
                continue;
            }
            x_min = x_min.min(x);
            x_max = x_max.max(x);
            y_min = y_min.min(s.means[i] - s.stds[i]);
            y_max = y_max.max(s.means[i] + s.stds[i]);
        }
    }
    if !x_min.is_finite() {
        x_min = 0.0;
        x_max = 1.0;
    }
    if x_min == x_max {
        x_max = x_min + 1.0;
    }
    if !y_min.is_finite() {
        y_min = 0.0;
        y_max = 1.0;
    }
    if y_min == y_max {
        y_min -= 0.5;
        y_max += 0.5;
    }
    let y_pad = 0.05 * (y_max - y_min);
    y_min -= y_pad;
    y_max += y_pad;

    let to_x = |v: f64| MARGIN_LEFT + (v - x_min) / (x_max - x_min) * plot_w;
    let to_y = |v: f64| MARGIN_TOP + (1.0 - (v - y_min) / (y_max - y_min)) * plot_h;

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    ));
    svg.push_str(&format!(
        "  <rect x=\"0\" y=\"0\" width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n"
    ));
    svg.push_str(&format!(
        "  <text x=\"{}\" y=\"22\" font-family=\"sans-serif\" font-size=\"15\" \
         text-anchor=\"middle\">{}</text>\n",
        MARGIN_LEFT + plot_w / 2.0,
        xml_escape(title)
    ));

    // Gridlines and ticks.
    for tick in nice_ticks(x_min, x_max, 6) {
        let x = to_x(tick);
        svg.push_str(&format!(
            "  <line x1=\"{x:.2}\" y1=\"{:.2}\" x2=\"{x:.2}\" y2=\"{:.2}\" stroke=\"#dddddd\" \
             stroke-width=\"1\"/>\n",
            MARGIN_TOP,
            MARGIN_TOP + plot_h
        ));
        svg.push_str(&format!(
            "  <text x=\"{x:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"11\" \
             text-anchor=\"middle\">{}</text>\n",
            MARGIN_TOP + plot_h + 18.0,
            fmt_tick(tick)
        ));
    }
    for tick in nice_ticks(y_min, y_max, 6) {
        let y = to_y(tick);
        svg.push_str(&format!(
            "  <line x1=\"{:.2}\" y1=\"{y:.2}\" x2=\"{:.2}\" y2=\"{y:.2}\" stroke=\"#dddddd\" \
             stroke-width=\"1\"/>\n",
            MARGIN_LEFT,
            MARGIN_LEFT + plot_w
        ));
        svg.push_str(&format!(
            "  <text x=\"{:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"11\" \
             text-anchor=\"end\">{}</text>\n",
            MARGIN_LEFT - 6.0,
            y + 4.0,
            fmt_tick(tick)
        ));
    }

    // Axes.
    svg.push_str(&format!(
        "  <line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"black\" \
         stroke-width=\"1.5\"/>\n",
        MARGIN_LEFT,
        MARGIN_TOP + plot_h,
        MARGIN_LEFT + plot_w,
        MARGIN_TOP + plot_h
    ));
    svg.push_str(&format!(
        "  <line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"black\" \
         stroke-width=\"1.5\"/>\n",
        MARGIN_LEFT, MARGIN_TOP, MARGIN_LEFT,
        MARGIN_TOP + plot_h
    ));
    svg.push_str(&format!(
        "  <text x=\"{:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"13\" \
         text-anchor=\"middle\">{}</text>\n",
        MARGIN_LEFT + plot_w / 2.0,
        HEIGHT - 12.0,
        xml_escape(x_label)
    ));
    svg.push_str(&format!(
        "  <text x=\"18\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"13\" \
         text-anchor=\"middle\" transform=\"rotate(-90 18 {:.2})\">{}</text>\n",
        MARGIN_TOP + plot_h / 2.0,
        MARGIN_TOP + plot_h / 2.0,
        xml_escape(y_label)
    ));

    // Bands first so lines draw on top.
    for s in series {
        if s.xs.is_empty() {
            continue;
        }
        let mut d = String::from("M");
        for (i, &x) in s.xs.iter().enumerate() {
            d.push_str(&format!(" {:.2},{:.2}", to_x(x), to_y(s.means[i] + s.stds[i])));
        }
        for (i, &x) in s.xs.iter().enumerate().rev() {
            d.push_str(&format!(" {:.2},{:.2}", to_x(x), to_y(s.means[i] - s.stds[i])));
        }
        d.push('Z');
        svg.push_str(&format!(
            "  <path class=\"series-band\" d=\"{d}\" fill=\"{}\" fill-opacity=\"0.15\" \
             stroke=\"none\"/>\n",
            s.color
        ));
    }
    for s in series {
        let points: Vec<String> = s
            .xs
            .iter()
            .enumerate()
            .map(|(i, &x)| format!("{:.2},{:.2}", to_x(x), to_y(s.means[i])))
            .collect();
        svg.push_str(&format!(
            "  <polyline class=\"series-line\" points=\"{}\" fill=\"none\" stroke=\"{}\" \
             stroke-width=\"1.8\"/>\n",
            points.join(" "),
            s.color
        ));
    }

    // Legend.
    let legend_x = MARGIN_LEFT + plot_w + 12.0;
    for (i, s) in series.iter().enumerate() {
        let y = MARGIN_TOP + 10.0 + i as f64 * 18.0;
        svg.push_str(&format!(
            "  <line x1=\"{legend_x:.2}\" y1=\"{y:.2}\" x2=\"{:.2}\" y2=\"{y:.2}\" \
             stroke=\"{}\" stroke-width=\"2.5\"/>\n",
            legend_x + 18.0,
            s.color
        ));
        svg.push_str(&format!(
            "  <text x=\"{:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"11\">{}</text>\n",
            legend_x + 24.0,
            y + 4.0,
            xml_escape(&s.label)
        ));
    }

    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mk_row(value: f64, arm: &str, t: usize, fill: f64) -> AggregateRow {
        AggregateRow {
            axis: "N".into(),
            value,
            arm: arm.into(),
            p: 4,
            param_count: 10,
            n: 8,
            beta: 0.0,
            t,
            means: [fill; 21],
            stds: [0.1; 21],
        }
    }

    /// Minimal well-formedness check: tags balance and there is exactly one
    /// root element.
    fn assert_well_formed_svg(text: &str) {
        assert!(text.starts_with("<svg"), "must open with the svg root");
        let mut depth = 0usize;
        let mut roots = 0usize;
        let mut rest = text;
        while let Some(start) = rest.find('<') {
            rest = &rest[start..];
            let end = rest.find('>').expect("unclosed tag");
            let tag = &rest[..=end];
            if tag.starts_with("</") {
                depth -= 1;
                if depth == 0 {
                    roots += 1;
                }
            } else if !tag.ends_with("/>") && !tag.starts_with("<?") && !tag.starts_with("<!") {
                depth += 1;
            } else if depth == 0 {
                roots += 1;
            }
            rest = &rest[end + 1..];
        }
        assert_eq!(depth, 0, "unbalanced tags");
        assert_eq!(roots, 1, "expected exactly one root element");
    }

    #[test]
    fn emits_valid_svg_per_metric() {
        let rows: Vec<AggregateRow> = (0..3).map(|t| mk_row(8.0, "decay", t, 1.0)).collect();
        let dir = tempfile::tempdir().unwrap();
        let summary = emit_plots(&rows, dir.path()).unwrap();
        // Every numeric column except wallclock gets a plot.
        assert_eq!(summary.written.len(), 20);
        let text = std::fs::read_to_string(dir.path().join("lip_bound.svg")).unwrap();
        assert_well_formed_svg(&text);
    }

    #[test]
    fn two_arms_give_two_series() {
        let mut rows = Vec::new();
        for t in 0..3 {
            rows.push(mk_row(8.0, "decay", t, 1.0));
            rows.push(mk_row(8.0, "constant", t, 2.0));
        }
        let dir = tempfile::tempdir().unwrap();
        emit_plots(&rows, dir.path()).unwrap();
        let text = std::fs::read_to_string(dir.path().join("mse_risk.svg")).unwrap();
        assert_eq!(text.matches("class=\"series-line\"").count(), 2);
        assert_eq!(text.matches("class=\"series-band\"").count(), 2);
    }

    #[test]
    fn non_finite_metric_is_skipped() {
        let mut rows: Vec<AggregateRow> = (0..3).map(|t| mk_row(8.0, "decay", t, 1.0)).collect();
        for row in rows.iter_mut() {
            row.means[0] = f64::NAN; // alpha_W column
        }
        let dir = tempfile::tempdir().unwrap();
        let summary = emit_plots(&rows, dir.path()).unwrap();
        assert!(summary.skipped.contains(&"alpha_W".to_string()));
        assert!(!dir.path().join("alpha_W.svg").exists());
    }
}
