//! Standalone SVG scatter plots of experiment records, with a sibling `.dat`
//! file holding the plotted tuples.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{LvggmError, Result};
use crate::experiments::ExperimentRecord;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 64.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotField {
    P,
    R,
    N,
    Ratio,
    RescaledN,
    Metric,
}

impl PlotField {
    pub fn name(self) -> &'static str {
        match self {
            PlotField::P => "p",
            PlotField::R => "r",
            PlotField::N => "n",
            PlotField::Ratio => "ratio",
            PlotField::RescaledN => "rescaled_n",
            PlotField::Metric => "metric",
        }
    }

    fn value(self, r: &ExperimentRecord) -> Option<f64> {
        match self {
            PlotField::P => Some(r.p as f64),
            PlotField::R => Some(r.r as f64),
            PlotField::N => r.n.map(|n| n as f64),
            PlotField::Ratio => r.ratio,
            PlotField::RescaledN => r.rescaled_n,
            PlotField::Metric => r.metric,
        }
    }
}

impl FromStr for PlotField {
    type Err = LvggmError;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "p" => PlotField::P,
            "r" => PlotField::R,
            "n" => PlotField::N,
            "ratio" => PlotField::Ratio,
            "rescaled_n" => PlotField::RescaledN,
            "metric" => PlotField::Metric,
            other => {
                return Err(LvggmError::InvalidArgument(format!(
                    "unknown field `{other}`; valid fields: p, r, n, ratio, rescaled_n, metric"
                )))
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlotSummary {
    pub svg_path: PathBuf,
    pub dat_path: PathBuf,
    pub included: usize,
    pub excluded: usize,
    pub warnings: Vec<String>,
    /// Constant `c` of the fitted `c·x^{-1/2}` reference line.
    pub reference_scale: Option<f64>,
}

struct Axis {
    lo: f64,
    hi: f64,
    log: bool,
}

impl Axis {
    fn new(values: impl Iterator<Item = f64>, log: bool) -> Self {
        let t = |v: f64| if log { v.log10() } else { v };
        let (mut lo, mut hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(t(v)), b.max(t(v))));
        if hi - lo < 1e-12 {
            let pad = if lo.abs() > 0.0 { lo.abs() * 0.1 } else { 1.0 };
            lo -= pad;
            hi += pad;
        } else {
            let pad = 0.05 * (hi - lo);
            lo -= pad;
            hi += pad;
        }
        Self { lo, hi, log }
    }

    /// Position in `[0, 1]`.
    fn unit(&self, v: f64) -> f64 {
        let v = if self.log { v.log10() } else { v };
        (v - self.lo) / (self.hi - self.lo)
    }

    fn ticks(&self) -> Vec<f64> {
        if self.log {
            let (a, b) = (self.lo.ceil() as i32, self.hi.floor() as i32);
            if b >= a {
                return (a..=b).map(|e| 10f64.powi(e)).collect();
            }
            let mid = 10f64.powf(0.5 * (self.lo + self.hi));
            return vec![mid];
        }
        let span = self.hi - self.lo;
        let raw = span / 5.0;
        let mag = 10f64.powf(raw.log10().floor());
        let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| span / s <= 6.0).unwrap_or(10.0 * mag);
        let mut v = (self.lo / step).ceil() * step;
        let mut out = Vec::new();
        while v <= self.hi + 1e-12 * span {
            out.push(v);
            v += step;
        }
        out
    }
}

fn label(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e4 || v.abs() < 1e-2) {
        format!("{v:.0e}")
    } else {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

/// Draws `y_field` against `x_field`, one colour per `(p, r)` series.
///
/// Records missing either field, or with a non-positive value on a log axis,
/// are skipped and counted in the returned warnings. With `reference_line`,
/// a `c·x^{-1/2}` curve fitted to the plotted points is overlaid.
pub fn emit_scatter_svg(
    records: &[ExperimentRecord],
    x_field: PlotField,
    y_field: PlotField,
    log_axes: bool,
    reference_line: bool,
    path: &Path,
) -> Result<PlotSummary> {
    if records.is_empty() {
        return Err(LvggmError::EmptyInput("no records to plot".into()));
    }
    let mut series: BTreeMap<(usize, usize), Vec<(f64, f64)>> = BTreeMap::new();
    let mut excluded_missing = 0;
    let mut excluded_log = 0;
    for r in records {
        match (x_field.value(r), y_field.value(r)) {
            (Some(x), Some(y)) if x.is_finite() && y.is_finite() => {
                if log_axes && (x <= 0.0 || y <= 0.0) {
                    excluded_log += 1;
                } else {
                    series.entry((r.p, r.r)).or_default().push((x, y));
                }
            }
            _ => excluded_missing += 1,
        }
    }
    let included: usize = series.values().map(Vec::len).sum();
    if included == 0 {
        return Err(LvggmError::EmptyInput("every record was excluded from the plot".into()));
    }
    let mut warnings = Vec::new();
    if excluded_log > 0 {
        warnings.push(format!("{excluded_log} record(s) with non-positive values excluded from log axes"));
    }
    if excluded_missing > 0 {
        warnings.push(format!(
            "{excluded_missing} record(s) without finite {}/{} values excluded",
            x_field.name(),
            y_field.name()
        ));
    }

    let points = || series.values().flatten();
    let xa = Axis::new(points().map(|p| p.0), log_axes);
    let ya = Axis::new(points().map(|p| p.1), log_axes);
    let px = |x: f64| MARGIN + xa.unit(x) * (WIDTH - 2.0 * MARGIN);
    let py = |y: f64| HEIGHT - MARGIN - ya.unit(y) * (HEIGHT - 2.0 * MARGIN);

    let mut svg = String::new();
    let w = &mut svg;
    let _ = writeln!(
        w,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(w, r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let (x0, x1, y0, y1) = (MARGIN, WIDTH - MARGIN, HEIGHT - MARGIN, MARGIN);
    let _ = writeln!(w, r#"<g stroke="black" fill="none"><line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}"/><line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}"/></g>"#);
    for t in xa.ticks() {
        let x = px(t);
        let _ = writeln!(
            w,
            r#"<line x1="{x:.2}" y1="{y0}" x2="{x:.2}" y2="{:.2}" stroke="black"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            y0 + 4.0,
            y0 + 16.0,
            label(t)
        );
    }
    for t in ya.ticks() {
        let y = py(t);
        let _ = writeln!(
            w,
            r#"<line x1="{:.2}" y1="{y:.2}" x2="{x0}" y2="{y:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            x0 - 4.0,
            x0 - 6.0,
            y + 4.0,
            label(t)
        );
    }
    let log_note = if log_axes { " (log)" } else { "" };
    let _ = writeln!(
        w,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}{log_note}</text>"#,
        WIDTH / 2.0,
        HEIGHT - 18.0,
        x_field.name()
    );
    let _ = writeln!(
        w,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}{log_note}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        y_field.name()
    );

    for (k, ((p, r), pts)) in series.iter().enumerate() {
        let colour = PALETTE[k % PALETTE.len()];
        let _ = writeln!(w, r#"<g fill="{colour}" fill-opacity="0.7"><title>p={p}, r={r}</title>"#);
        for &(x, y) in pts {
            let _ = writeln!(w, r#"<circle cx="{:.2}" cy="{:.2}" r="3"/>"#, px(x), py(y));
        }
        let _ = writeln!(w, "</g>");
        let ly = MARGIN + 14.0 * k as f64;
        let _ = writeln!(
            w,
            r#"<rect x="{:.2}" y="{:.2}" width="8" height="8" fill="{colour}"/><text x="{:.2}" y="{:.2}">p={p}, r={r}</text>"#,
            x1 - 90.0,
            ly - 8.0,
            x1 - 78.0,
            ly
        );
    }

    let reference_scale = if reference_line {
        let (sum, count) = points()
            .filter(|(x, y)| *x > 0.0 && *y > 0.0)
            .fold((0.0, 0usize), |(s, c), (x, y)| (s + y.ln() + 0.5 * x.ln(), c + 1));
        (count > 0).then(|| {
            let c = (sum / count as f64).exp();
            let (xmin, xmax) = points()
                .filter(|p| p.0 > 0.0)
                .fold((f64::INFINITY, 0.0f64), |(a, b), p| (a.min(p.0), b.max(p.0)));
            let path_d: Vec<String> = (0..=40)
                .map(|i| {
                    let x = xmin * (xmax / xmin).powf(i as f64 / 40.0);
                    format!("{:.2},{:.2}", px(x), py(c / x.sqrt()))
                })
                .collect();
            let _ = writeln!(
                w,
                r#"<polyline class="reference" fill="none" stroke="black" stroke-dasharray="5,3" points="{}"><title>{c:.4}·x^(-1/2)</title></polyline>"#,
                path_d.join(" ")
            );
            c
        })
    } else {
        None
    };
    svg.push_str("</svg>\n");

    let mut dat = format!("# p r {} {}\n", x_field.name(), y_field.name());
    for ((p, r), pts) in &series {
        for (x, y) in pts {
            let _ = writeln!(dat, "{p} {r} {x:e} {y:e}");
        }
    }
    let dat_path = path.with_extension("dat");
    super::write_atomic(path, svg.as_bytes())?;
    super::write_atomic(&dat_path, dat.as_bytes())?;
    Ok(PlotSummary {
        svg_path: path.to_path_buf(),
        dat_path,
        included,
        excluded: excluded_log + excluded_missing,
        warnings,
        reference_scale,
    })
}
