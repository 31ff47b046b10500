//! CSV tables and log-log SVG plots.

use std::fmt::Write as _;
use std::path::Path;

use kirchhoff::estimator::{ErrorReport, CSV_HEADER};

/// A CSV table with a header row; all cells are kept as text.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Self {
        Self {
            header: header.iter().map(|s| s.as_ref().to_string()).collect(),
            rows: Vec::new(),
        }
    }

    /// Table with the report columns, optionally preceded by one extra
    /// column.
    pub fn for_reports(leading: Option<&str>) -> Self {
        let mut header: Vec<&str> = leading.into_iter().collect();
        header.extend(CSV_HEADER);
        Self::new(&header)
    }

    pub fn push_report(&mut self, leading: Option<String>, report: &ErrorReport) {
        let mut row: Vec<String> = leading.into_iter().collect();
        row.extend(report.csv_fields());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    /// Numeric values of a column; `nan` cells parse as NaN.
    pub fn numbers(&self, name: &str) -> Option<Vec<f64>> {
        let c = self.column(name)?;
        self.rows.iter().map(|r| r[c].parse().ok()).collect()
    }

    pub fn write(&self, path: &Path) -> csv::Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read(path: &Path) -> csv::Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let header = r.headers()?.iter().map(str::to_string).collect();
        let rows = r
            .records()
            .map(|rec| rec.map(|rec| rec.iter().map(str::to_string).collect()))
            .collect::<csv::Result<_>>()?;
        Ok(Self { header, rows })
    }
}

/// One plotted series.
pub struct Series<'a> {
    pub name: &'a str,
    pub color: &'a str,
    pub dashed: bool,
    pub values: Vec<f64>,
}

/// Series plotted by [`report_series`].
pub const PLOTTED: [(&str, &str, bool); 6] = [
    ("exact_err", "#000000", false),
    ("eta_eq", "#d62728", false),
    ("eta_mean", "#1f77b4", false),
    ("eta_nonconf", "#2ca02c", true),
    ("eta_jump", "#9467bd", true),
    ("eta_osc", "#8c564b", true),
];

pub fn report_series(reports: &[&ErrorReport]) -> Vec<Series<'static>> {
    PLOTTED
        .iter()
        .map(|&(name, color, dashed)| Series {
            name,
            color,
            dashed,
            values: reports
                .iter()
                .map(|r| match name {
                    "exact_err" => r.exact_error.unwrap_or(f64::NAN),
                    "eta_eq" => r.eta_eq,
                    "eta_mean" => r.eta_mean,
                    "eta_nonconf" => r.eta_nonconf,
                    "eta_jump" => r.eta_jump,
                    _ => r.eta_osc,
                })
                .collect(),
        })
        .collect()
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN: [f64; 4] = [70.0, 20.0, 20.0, 50.0]; // left, right, top, bottom

/// Log-log plot of `series` against `x`. Non-positive and non-finite
/// values are skipped.
pub fn loglog_svg(title: &str, x_label: &str, x: &[f64], series: &[Series]) -> String {
    let ok = |v: f64| v.is_finite() && v > 0.0;
    let xs: Vec<f64> = x.iter().copied().filter(|&v| ok(v)).collect();
    let ys: Vec<f64> = series
        .iter()
        .flat_map(|s| s.values.iter().copied())
        .filter(|&v| ok(v))
        .collect();
    let range = |v: &[f64]| {
        if v.is_empty() {
            return (0.0, 1.0);
        }
        let lo = v.iter().fold(f64::INFINITY, |a, &b| a.min(b)).log10().floor();
        let hi = v.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b)).log10().ceil();
        (lo, if hi > lo { hi } else { lo + 1.0 })
    };
    let (x0, x1) = range(&xs);
    let (y0, y1) = range(&ys);
    let pw = WIDTH - MARGIN[0] - MARGIN[1];
    let ph = HEIGHT - MARGIN[2] - MARGIN[3];
    let px = |v: f64| MARGIN[0] + (v.log10() - x0) / (x1 - x0) * pw;
    let py = |v: f64| MARGIN[2] + (y1 - v.log10()) / (y1 - y0) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<rect x="{:.1}" y="{:.1}" width="{pw:.1}" height="{ph:.1}" fill="none" stroke="black"/>"#,
        MARGIN[0], MARGIN[2]
    );
    for d in x0 as i32..=x1 as i32 {
        let xp = px(10f64.powi(d));
        let _ = writeln!(
            s,
            r##"<line x1="{xp:.1}" y1="{:.1}" x2="{xp:.1}" y2="{:.1}" stroke="#dddddd"/><text x="{xp:.1}" y="{:.1}" text-anchor="middle">1e{d}</text>"##,
            MARGIN[2],
            MARGIN[2] + ph,
            MARGIN[2] + ph + 16.0
        );
    }
    for d in y0 as i32..=y1 as i32 {
        let yp = py(10f64.powi(d));
        let _ = writeln!(
            s,
            r##"<line x1="{:.1}" y1="{yp:.1}" x2="{:.1}" y2="{yp:.1}" stroke="#dddddd"/><text x="{:.1}" y="{:.1}" text-anchor="end">1e{d}</text>"##,
            MARGIN[0],
            MARGIN[0] + pw,
            MARGIN[0] - 6.0,
            yp + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{x_label}</text>"#,
        MARGIN[0] + pw / 2.0,
        HEIGHT - 12.0
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="14" text-anchor="middle">{title}</text>"#,
        MARGIN[0] + pw / 2.0
    );
    for (i, ser) in series.iter().enumerate() {
        let pts: Vec<String> = x
            .iter()
            .zip(&ser.values)
            .filter(|(a, b)| ok(**a) && ok(**b))
            .map(|(a, b)| format!("{:.1},{:.1}", px(*a), py(*b)))
            .collect();
        if pts.is_empty() {
            continue;
        }
        let dash = if ser.dashed { r#" stroke-dasharray="6,3""# } else { "" };
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="1.5"{dash}/>"#,
            pts.join(" "),
            ser.color
        );
        let ly = MARGIN[2] + 16.0 + 16.0 * i as f64;
        let lx = MARGIN[0] + pw - 110.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{}" stroke-width="1.5"{dash}/><text x="{:.1}" y="{:.1}">{}</text>"#,
            lx + 24.0,
            ser.color,
            lx + 30.0,
            ly + 4.0,
            ser.name
        );
    }
    s.push_str("</svg>\n");
    s
}
