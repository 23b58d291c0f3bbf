//! CSV tables, run manifests and SVG line plots
//!
//! Numbers are written in the shortest form that parses back to the same
//! `f64`. Lines end in `\n`; comments start with `#`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Shortest round-trip decimal form of `v`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    /// Lines written after the rows, each prefixed with `# `.
    pub footer: Vec<String>,
}

impl CsvTable {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        CsvTable { header: header.into_iter().map(Into::into).collect(), ..Default::default() }
    }

    pub fn push(&mut self, row: Vec<f64>) -> Result<()> {
        if row.len() != self.header.len() {
            return Err(invalid(format!("row has {} fields, header has {}", row.len(), self.header.len())));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn comment(&mut self, line: impl Into<String>) {
        self.footer.push(line.into());
    }

    pub fn render(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            let fields: Vec<String> = row.iter().map(|&v| fmt_f64(v)).collect();
            out.push_str(&fields.join(","));
            out.push('\n');
        }
        for line in &self.footer {
            let _ = writeln!(out, "# {line}");
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.render())?;
        Ok(())
    }

    /// Reads a table written by [`render`](Self::render), dropping comments.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.starts_with('#') && !l.is_empty());
        let header = lines.next().ok_or_else(|| invalid("empty CSV"))?;
        let mut table = CsvTable::new(header.split(','));
        for line in lines {
            let row = line
                .split(',')
                .map(|f| f.trim().parse::<f64>().map_err(|e| invalid(format!("bad field {f:?}: {e}"))))
                .collect::<Result<Vec<_>>>()?;
            table.push(row)?;
        }
        Ok(table)
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }
}

/// Record of a finished run. Written after every other output, so its
/// presence marks a complete run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub parameters: serde_json::Value,
    pub seed: Option<u64>,
    pub version: String,
    pub outputs: Vec<String>,
    pub duration_seconds: f64,
}

pub const MANIFEST_NAME: &str = "manifest.json";

impl RunManifest {
    pub fn new(command: &str, parameters: serde_json::Value, seed: Option<u64>) -> Self {
        RunManifest {
            command: command.into(),
            parameters,
            seed,
            version: env!("CARGO_PKG_VERSION").into(),
            outputs: Vec::new(),
            duration_seconds: 0.0,
        }
    }

    /// Writes the manifest into `dir`, checking that every listed output
    /// exists there.
    pub fn finish(mut self, dir: &Path, elapsed: Duration) -> Result<PathBuf> {
        for name in &self.outputs {
            if !dir.join(name).is_file() {
                return Err(invalid(format!("manifest lists {name}, which was not written")));
            }
        }
        self.duration_seconds = elapsed.as_secs_f64();
        let path = dir.join(MANIFEST_NAME);
        let text = serde_json::to_string_pretty(&self).map_err(|e| invalid(e.to_string()))?;
        fs::write(&path, text + "\n")?;
        Ok(path)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

impl Series {
    pub fn new(label: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Series { label: label.into(), points }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinePlot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
    pub log_x: bool,
    pub log_y: bool,
}

const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];
const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN: (f64, f64, f64, f64) = (70.0, 20.0, 40.0, 50.0);

impl LinePlot {
    pub fn new(title: impl Into<String>, x_label: impl Into<String>, y_label: impl Into<String>) -> Self {
        LinePlot {
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            series: Vec::new(),
            log_x: false,
            log_y: false,
        }
    }

    pub fn with_series(mut self, s: Series) -> Self {
        self.series.push(s);
        self
    }

    pub fn log_log(mut self) -> Self {
        self.log_x = true;
        self.log_y = true;
        self
    }

    fn mapped(&self) -> Vec<Vec<(f64, f64)>> {
        let fx = |x: f64| if self.log_x { x.log10() } else { x };
        let fy = |y: f64| if self.log_y { y.log10() } else { y };
        self.series
            .iter()
            .map(|s| {
                s.points
                    .iter()
                    .map(|&(x, y)| (fx(x), fy(y)))
                    .filter(|(x, y)| x.is_finite() && y.is_finite())
                    .collect()
            })
            .collect()
    }

    pub fn render(&self) -> String {
        let data = self.mapped();
        let all = data.iter().flatten();
        let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for &(x, y) in all {
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
        if !(x0 < x1) {
            (x0, x1) = (x0.min(0.0) - 0.5, x1.max(0.0) + 0.5);
        }
        if !(y0 < y1) {
            (y0, y1) = (y0.min(0.0) - 0.5, y1.max(0.0) + 0.5);
        }
        let (l, r, t, b) = MARGIN;
        let (pw, ph) = (WIDTH - l - r, HEIGHT - t - b);
        let sx = |x: f64| l + (x - x0) / (x1 - x0) * pw;
        let sy = |y: f64| t + (y1 - y) / (y1 - y0) * ph;

        let mut svg = String::new();
        let _ = writeln!(
            svg,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(svg, r#"<rect x="{l}" y="{t}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#);
        for k in 0..=4 {
            let f = k as f64 / 4.0;
            let (xv, yv) = (x0 + f * (x1 - x0), y0 + f * (y1 - y0));
            let (px, py) = (sx(xv), sy(yv));
            let xs = if self.log_x { format!("1e{xv:.2}") } else { format!("{xv:.3}") };
            let ys = if self.log_y { format!("1e{yv:.2}") } else { format!("{yv:.3}") };
            let _ = writeln!(svg, r#"<text x="{px:.1}" y="{:.1}" text-anchor="middle">{xs}</text>"#, t + ph + 16.0);
            let _ = writeln!(svg, r#"<text x="{:.1}" y="{py:.1}" text-anchor="end">{ys}</text>"#, l - 6.0);
        }
        let _ = writeln!(svg, r#"<text x="{:.1}" y="22" text-anchor="middle" font-size="14">{}</text>"#, WIDTH / 2.0, escape(&self.title));
        let _ = writeln!(svg, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, l + pw / 2.0, HEIGHT - 10.0, escape(&self.x_label));
        let _ = writeln!(
            svg,
            r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">{}</text>"#,
            t + ph / 2.0,
            t + ph / 2.0,
            escape(&self.y_label)
        );
        for (k, (s, pts)) in self.series.iter().zip(&data).enumerate() {
            let color = COLORS[k % COLORS.len()];
            let path: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
            let _ = writeln!(svg, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, path.join(" "));
            let ly = t + 14.0 + 16.0 * k as f64;
            let _ = writeln!(svg, r#"<line x1="{:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="2"/>"#, l + pw - 130.0, l + pw - 110.0);
            let _ = writeln!(svg, r#"<text x="{:.1}" y="{:.1}">{}</text>"#, l + pw - 104.0, ly + 4.0, escape(&s.label));
        }
        svg.push_str("</svg>\n");
        svg
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.render())?;
        Ok(())
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
