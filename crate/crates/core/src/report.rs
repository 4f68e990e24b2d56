//! Artifact writers: pretty JSON, numeric CSV, SVG line charts and a
//! timestamped sidecar log. Everything except the log is a pure function of
//! its input.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::Result;

/// Hex SHA-256 of the compact JSON encoding.
pub fn config_hash<T: Serialize>(value: &T) -> Result<String> {
    let bytes = serde_json::to_vec(value)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Output directory that creates itself and tracks what was written.
#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    written: Vec<PathBuf>,
}

impl OutputDir {
    pub fn create(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root)?;
        Ok(Self { root, written: Vec::new() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }

    fn target(&mut self, name: &str) -> PathBuf {
        let path = self.root.join(name);
        self.written.push(path.clone());
        path
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf> {
        let path = self.target(name);
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        fs::write(&path, text)?;
        Ok(path)
    }

    pub fn csv<I, R>(&mut self, name: &str, header: &[String], rows: I) -> Result<PathBuf>
    where
        I: IntoIterator<Item = R>,
        R: AsRef<[f64]>,
    {
        let path = self.target(name);
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(header)?;
        for row in rows {
            w.write_record(row.as_ref().iter().map(|v| format!("{v:e}")))?;
        }
        w.flush()?;
        Ok(path)
    }

    /// CSV with string cells, for tables that mix labels and numbers.
    pub fn table(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<PathBuf> {
        let path = self.target(name);
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(header)?;
        for row in rows {
            w.write_record(row)?;
        }
        w.flush()?;
        Ok(path)
    }

    pub fn svg(&mut self, name: &str, chart: &Chart) -> Result<PathBuf> {
        let path = self.target(name);
        fs::write(&path, chart.render())?;
        Ok(path)
    }

    /// Appends one timestamped line to `run.log`. Not part of the
    /// reproducible output.
    pub fn log(&self, message: &str) -> Result<()> {
        let stamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        let mut f = fs::OpenOptions::new().create(true).append(true).open(self.root.join("run.log"))?;
        writeln!(f, "{stamp} {message}")?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Linear,
    Log,
}

impl Axis {
    fn map(self, v: f64) -> Option<f64> {
        match self {
            Axis::Linear => v.is_finite().then_some(v),
            Axis::Log => (v > 0.0 && v.is_finite()).then(|| v.log10()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

impl Series {
    pub fn new(label: impl Into<String>, xs: &[f64], ys: &[f64]) -> Self {
        Self { label: label.into(), points: xs.iter().copied().zip(ys.iter().copied()).collect() }
    }
}

/// Minimal polyline chart. Points that cannot be placed on a log axis are
/// skipped.
#[derive(Debug, Clone)]
pub struct Chart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub x_axis: Axis,
    pub y_axis: Axis,
    pub series: Vec<Series>,
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 60.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

impl Chart {
    pub fn new(title: impl Into<String>, x_label: impl Into<String>, y_label: impl Into<String>) -> Self {
        Self {
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            x_axis: Axis::Linear,
            y_axis: Axis::Linear,
            series: Vec::new(),
        }
    }

    pub fn log_log(mut self) -> Self {
        self.x_axis = Axis::Log;
        self.y_axis = Axis::Log;
        self
    }

    pub fn with_series(mut self, s: Series) -> Self {
        self.series.push(s);
        self
    }

    fn mapped(&self) -> Vec<Vec<(f64, f64)>> {
        self.series
            .iter()
            .map(|s| s.points.iter().filter_map(|&(x, y)| Some((self.x_axis.map(x)?, self.y_axis.map(y)?))).collect())
            .collect()
    }

    pub fn render(&self) -> String {
        let mapped = self.mapped();
        let all = mapped.iter().flatten();
        let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for &(x, y) in all {
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
        if !x0.is_finite() {
            (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
        }
        if x1 - x0 < 1e-300 {
            x1 = x0 + 1.0;
        }
        if y1 - y0 < 1e-300 {
            y1 = y0 + 1.0;
        }
        let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
        let sy = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);
        let tick = |axis: Axis, v: f64| match axis {
            Axis::Linear => format!("{v:.3e}"),
            Axis::Log => format!("1e{v:.1}"),
        };

        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif" font-size="11">"#
        );
        let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<rect x="{MARGIN}" y="{MARGIN}" width="{}" height="{}" fill="none" stroke="black"/>"#,
            WIDTH - 2.0 * MARGIN,
            HEIGHT - 2.0 * MARGIN
        );
        let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#, WIDTH / 2.0, escape(&self.title));
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            WIDTH / 2.0,
            HEIGHT - 12.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            s,
            r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">{}</text>"#,
            HEIGHT / 2.0,
            HEIGHT / 2.0,
            escape(&self.y_label)
        );
        for i in 0..=4 {
            let f = i as f64 / 4.0;
            let (xv, yv) = (x0 + f * (x1 - x0), y0 + f * (y1 - y0));
            let _ = writeln!(
                s,
                r#"<text x="{:.1}" y="{}" text-anchor="middle">{}</text>"#,
                sx(xv),
                HEIGHT - MARGIN + 16.0,
                tick(self.x_axis, xv)
            );
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{:.1}" text-anchor="end">{}</text>"#,
                MARGIN - 4.0,
                sy(yv) + 4.0,
                tick(self.y_axis, yv)
            );
        }
        for (k, pts) in mapped.iter().enumerate() {
            let color = COLORS[k % COLORS.len()];
            let path: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
            let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, path.join(" "));
            let ly = MARGIN + 14.0 + 14.0 * k as f64;
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{ly}" fill="{color}" text-anchor="end">{}</text>"#,
                WIDTH - MARGIN - 6.0,
                escape(&self.series[k].label)
            );
        }
        s.push_str("</svg>\n");
        s
    }
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = config_hash(&[1.0, 2.0]).unwrap();
        assert_eq!(a, config_hash(&[1.0, 2.0]).unwrap());
        assert_ne!(a, config_hash(&[1.0, 2.5]).unwrap());
        assert_eq!(a.len(), 64);
    }

    #[test]
    fn log_chart_skips_nonpositive_points() {
        let chart = Chart::new("t", "x", "y")
            .log_log()
            .with_series(Series::new("s", &[1.0, 10.0, 100.0], &[1.0, -1.0, 0.01]));
        let svg = chart.render();
        let line = svg.lines().find(|l| l.starts_with("<polyline")).unwrap();
        assert_eq!(line.matches(',').count(), 2);
        assert_eq!(svg, chart.render());
    }

    #[test]
    fn writers_are_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = OutputDir::create(dir.path()).unwrap();
        let header = vec!["t".to_string(), "v".to_string()];
        let rows = vec![vec![1.0, 0.5], vec![2.0, 0.25]];
        let p = out.csv("a.csv", &header, &rows).unwrap();
        let first = fs::read(&p).unwrap();
        out.csv("a.csv", &header, &rows).unwrap();
        assert_eq!(first, fs::read(&p).unwrap());
        assert_eq!(String::from_utf8(first).unwrap(), "t,v\n1e0,5e-1\n2e0,2.5e-1\n");
    }
}
