//! CSV tables with a version comment line, summary statistics and small
//! hand-written SVG charts.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, IoContext, Result};

pub const REPORT_HEADER: &str = "# teatpose-report v1";

/// Shortest decimal that parses back to the same `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

pub fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

/// In-memory CSV table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self { columns: columns.iter().map(|c| (*c).into()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    /// The version line followed by the header row and the records.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        let body = w.into_inner().map_err(|e| Error::Invariant(e.to_string()))?;
        let body = String::from_utf8(body).map_err(|e| Error::Invariant(e.to_string()))?;
        Ok(format!("{REPORT_HEADER}\n{body}"))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let body = text
            .strip_prefix(REPORT_HEADER)
            .and_then(|b| b.strip_prefix('\n'))
            .ok_or_else(|| Error::Invariant(format!("report does not start with {REPORT_HEADER:?}")))?;
        let mut r = csv::Reader::from_reader(body.as_bytes());
        let columns = r.headers()?.iter().map(String::from).collect();
        let rows = r
            .records()
            .map(|rec| rec.map(|rec| rec.iter().map(String::from).collect()))
            .collect::<Result<_, _>>()?;
        Ok(Self { columns, rows })
    }

    pub fn column(&self, name: &str) -> Result<usize> {
        self.columns.iter().position(|c| c == name).ok_or_else(|| Error::Invariant(format!("no column {name:?}")))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv()?).at(path)
    }
}

/// Population mean and standard deviation. `None` for no samples.
pub fn mean_std(xs: &[f64]) -> Option<(f64, f64)> {
    if xs.is_empty() {
        return None;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    Some((mean, var.sqrt()))
}

/// Nearest-rank percentile, `p` in `[0, 100]`.
pub fn percentile(xs: &[f64], p: f64) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let rank = ((p / 100.0) * v.len() as f64).ceil() as usize;
    Some(v[rank.clamp(1, v.len()) - 1])
}

const W: f64 = 480.0;
const H: f64 = 300.0;
const MARGIN: f64 = 40.0;

fn svg_open(title: &str, x_label: &str, y_label: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="11">"#);
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="16" text-anchor="middle" font-size="13">{}</text>"#, W / 2.0, escape(title));
    let _ = writeln!(
        s,
        r#"<line x1="{MARGIN}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/><line x1="{MARGIN}" y1="{MARGIN}" x2="{MARGIN}" y2="{y0}" stroke="black"/>"#,
        y0 = H - MARGIN,
        x1 = W - MARGIN / 2.0
    );
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, W / 2.0, H - 8.0, escape(x_label));
    let _ = writeln!(s, r#"<text x="12" y="{}" transform="rotate(-90 12 {})" text-anchor="middle">{}</text>"#, H / 2.0, H / 2.0, escape(y_label));
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn axis_ticks(s: &mut String, x_max: f64, y_max: f64) {
    for i in 0..=4 {
        let f = f64::from(i) / 4.0;
        let x = MARGIN + f * (W - 1.5 * MARGIN);
        let y = H - MARGIN - f * (H - 2.0 * MARGIN);
        let _ = writeln!(s, r#"<text x="{x:.1}" y="{}" text-anchor="middle">{}</text>"#, H - MARGIN + 14.0, tick(f * x_max));
        let _ = writeln!(s, r#"<text x="{}" y="{y:.1}" text-anchor="end">{}</text>"#, MARGIN - 4.0, tick(f * y_max));
    }
}

fn tick(v: f64) -> String {
    format!("{:.3}", v).trim_end_matches('0').trim_end_matches('.').to_string()
}

/// Histogram of `samples` over `[0, max)` with `bins` equal bins; the last
/// bin also takes values at or beyond `max`.
pub fn histogram_svg(title: &str, x_label: &str, samples: &[f64], max: f64, bins: usize) -> String {
    let bins = bins.max(1);
    let mut counts = vec![0usize; bins];
    for &x in samples {
        let b = ((x / max) * bins as f64).floor();
        let b = if b.is_finite() { (b.max(0.0) as usize).min(bins - 1) } else { bins - 1 };
        counts[b] += 1;
    }
    let peak = counts.iter().copied().max().unwrap_or(0).max(1) as f64;
    let mut s = svg_open(title, x_label, "count");
    axis_ticks(&mut s, max, peak);
    let plot_w = W - 1.5 * MARGIN;
    let plot_h = H - 2.0 * MARGIN;
    let bw = plot_w / bins as f64;
    for (i, &c) in counts.iter().enumerate() {
        let h = c as f64 / peak * plot_h;
        let _ = writeln!(
            s,
            r##"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="#4a7ab5" stroke="white"/>"##,
            MARGIN + i as f64 * bw,
            H - MARGIN - h,
            bw,
            h
        );
    }
    s.push_str("</svg>\n");
    s
}

/// One series of a line chart: markers for the samples, a polyline for
/// the curve.
pub struct Series<'a> {
    pub name: &'a str,
    pub points: &'a [(f64, f64)],
    pub curve: &'a [(f64, f64)],
}

const COLORS: [&str; 6] = ["#1b6ca8", "#d1495b", "#2a9d8f", "#e9a03b", "#6c4f9c", "#555555"];

pub fn line_chart_svg(title: &str, x_label: &str, y_label: &str, series: &[Series<'_>]) -> String {
    let all = series.iter().flat_map(|s| s.points.iter().chain(s.curve));
    let (mut x_max, mut y_max) = (0.0f64, 0.0f64);
    for &(x, y) in all {
        x_max = x_max.max(x);
        y_max = y_max.max(y);
    }
    let x_max = if x_max > 0.0 { x_max } else { 1.0 };
    let y_max = if y_max > 0.0 { y_max * 1.05 } else { 1.0 };
    let plot_w = W - 1.5 * MARGIN;
    let plot_h = H - 2.0 * MARGIN;
    let px = |x: f64| MARGIN + x / x_max * plot_w;
    let py = |y: f64| H - MARGIN - y / y_max * plot_h;
    let mut s = svg_open(title, x_label, y_label);
    axis_ticks(&mut s, x_max, y_max);
    for (i, ser) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        if !ser.curve.is_empty() {
            let pts: Vec<String> = ser.curve.iter().map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
            let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="{color}"/>"#, pts.join(" "));
        }
        for &(x, y) in ser.points {
            let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#, px(x), py(y));
        }
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" fill="{color}">{}</text>"#,
            MARGIN + 10.0,
            MARGIN + 14.0 * i as f64,
            escape(ser.name)
        );
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_with_header() {
        let mut t = Table::new(&["a", "b"]);
        t.push(vec![fmt_f64(0.1 + 0.2), "x,y".into()]);
        t.push(vec![fmt_f64(1.0), String::new()]);
        let text = t.to_csv().unwrap();
        assert!(text.starts_with("# teatpose-report v1\na,b\n0.30000000000000004,\"x,y\"\n1,\n"));
        assert_eq!(Table::parse(&text).unwrap(), t);
        assert!(Table::parse("a,b\n").is_err());
    }

    #[test]
    fn stats() {
        assert_eq!(mean_std(&[2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0]), Some((5.0, 2.0)));
        assert_eq!(mean_std(&[3.5]), Some((3.5, 0.0)));
        assert_eq!(mean_std(&[]), None);
        let xs: Vec<f64> = (1..=20).map(f64::from).collect();
        assert_eq!(percentile(&xs, 95.0), Some(19.0));
        assert_eq!(percentile(&xs, 100.0), Some(20.0));
        assert_eq!(percentile(&xs, 0.0), Some(1.0));
    }

    #[test]
    fn svg_is_well_formed_enough() {
        let s = histogram_svg("T1 <tip>", "mm", &[0.5, 1.0, 1.2, 9.0, f64::INFINITY], 5.0, 10);
        assert!(s.starts_with("<svg") && s.trim_end().ends_with("</svg>"));
        assert_eq!(s.matches("<rect x=").count(), 10);
        assert!(s.contains("T1 &lt;tip&gt;"));
        let pts = [(200.0, 1.0), (400.0, 2.0)];
        let l = line_chart_svg("c", "d", "e", &[Series { name: "p", points: &pts, curve: &pts }]);
        assert!(l.contains("<polyline") && l.matches("<circle").count() == 2);
    }
}
