//! Static SVG line plots. Output depends only on the table contents.

use std::fmt::Write as _;
use std::path::Path;

use optosync_core::{Error, Result};

/// Column-named numeric table, as written to and read from CSV.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new<S: AsRef<str>>(columns: &[S]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.as_ref().to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.column_index(name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(&self.columns)?;
        for r in &self.rows {
            w.write_record(r.iter().map(|v| v.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let columns = r.headers()?.iter().map(str::to_string).collect();
        let mut t = Self {
            columns,
            rows: Vec::new(),
        };
        for rec in r.records() {
            let rec = rec?;
            let row = rec
                .iter()
                .map(|s| {
                    s.parse::<f64>()
                        .map_err(|_| Error::Io(format!("{}: `{s}` is not a number", path.display())))
                })
                .collect::<Result<Vec<_>>>()?;
            t.rows.push(row);
        }
        Ok(t)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PlotKind {
    /// One polyline per `ys` column against the `x` column.
    Lines { x: String, ys: Vec<String> },
    /// One parametric curve per `(x, y)` column pair.
    Portrait { curves: Vec<(String, String)> },
}

impl PlotKind {
    pub fn lines(x: &str, ys: &[&str]) -> Self {
        Self::Lines {
            x: x.to_string(),
            ys: ys.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn portrait(curves: &[(&str, &str)]) -> Self {
        Self::Portrait {
            curves: curves.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect(),
        }
    }

    fn pairs(&self) -> Vec<(&str, &str)> {
        match self {
            Self::Lines { x, ys } => ys.iter().map(|y| (x.as_str(), y.as_str())).collect(),
            Self::Portrait { curves } => curves.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect(),
        }
    }
}

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const MARGIN: (f64, f64, f64, f64) = (70.0, 20.0, 30.0, 50.0); // left, right, top, bottom
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

/// Renders the table and writes it to `path`.
pub fn emit_plot(table: &Table, kind: &PlotKind, path: &Path) -> Result<()> {
    let svg = render(table, kind)?;
    std::fs::write(path, svg).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

/// SVG text for the table.
pub fn render(table: &Table, kind: &PlotKind) -> Result<String> {
    if table.rows.is_empty() {
        return Err(Error::Io("cannot plot an empty table: it has no rows".into()));
    }
    let mut series = Vec::new();
    for (xn, yn) in kind.pairs() {
        let missing = |n: &str| Error::Io(format!("plot needs column `{n}`, table has {:?}", table.columns));
        let xs = table.column(xn).ok_or_else(|| missing(xn))?;
        let ys = table.column(yn).ok_or_else(|| missing(yn))?;
        let pts: Vec<(f64, f64)> = xs
            .into_iter()
            .zip(ys)
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .collect();
        series.push((yn, pts));
    }
    if series.is_empty() {
        return Err(Error::Io("plot kind names no columns".into()));
    }

    let all = series.iter().flat_map(|(_, p)| p.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in all {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        return Err(Error::Io("cannot plot a table with no finite values".into()));
    }
    let pad = |lo: f64, hi: f64| if hi > lo { (lo, hi) } else { (lo - 0.5, hi + 0.5) };
    let (x0, x1) = pad(x0, x1);
    let (y0, y1) = pad(y0, y1);
    let (l, r, t, b) = MARGIN;
    let (pw, ph) = (WIDTH - l - r, HEIGHT - t - b);
    let sx = |x: f64| l + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| t + (y1 - y) / (y1 - y0) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<rect x="{l}" y="{t}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    for k in 0..=4 {
        let f = k as f64 / 4.0;
        let (xv, yv) = (x0 + f * (x1 - x0), y0 + f * (y1 - y0));
        let (px, py) = (sx(xv), sy(yv));
        let _ = writeln!(
            s,
            r#"<line x1="{px:.2}" y1="{:.2}" x2="{px:.2}" y2="{:.2}" stroke="black"/><text x="{px:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            t + ph,
            t + ph + 5.0,
            t + ph + 18.0,
            tick(xv)
        );
        let _ = writeln!(
            s,
            r#"<line x1="{:.2}" y1="{py:.2}" x2="{l}" y2="{py:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            l - 5.0,
            l - 8.0,
            py + 4.0,
            tick(yv)
        );
    }
    let xlabel = match kind {
        PlotKind::Lines { x, .. } => x.clone(),
        PlotKind::Portrait { curves } => curves.iter().map(|c| c.0.as_str()).collect::<Vec<_>>().join(", "),
    };
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        l + pw / 2.0,
        HEIGHT - 10.0,
        escape(&xlabel)
    );
    for (k, (name, pts)) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let mut p = String::new();
        for (x, y) in pts {
            let _ = write!(p, "{:.2},{:.2} ", sx(*x), sy(*y));
        }
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.2" points="{}"/>"#,
            p.trim_end()
        );
        let ly = t + 14.0 + 16.0 * k as f64;
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{ly:.2}" fill="{color}" text-anchor="end">{}</text>"#,
            l + pw - 6.0,
            escape(name)
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

fn tick(v: f64) -> String {
    if v == 0.0 || (1e-3..1e4).contains(&v.abs()) {
        let s = format!("{v:.4}");
        let s = s.trim_end_matches('0').trim_end_matches('.');
        if s == "-0" { "0".into() } else { s.into() }
    } else {
        format!("{v:.2e}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
