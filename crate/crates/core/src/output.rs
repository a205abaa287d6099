//! CSV and SVG artifacts with a provenance header.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::Result;

/// Where an artifact came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    pub config_sha256: String,
    pub version: String,
    pub command_line: String,
}

impl Provenance {
    pub fn new(config_text: &str, command_line: impl Into<String>) -> Self {
        Self {
            config_sha256: sha256_hex(config_text.as_bytes()),
            version: format!("{} {}", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION")),
            command_line: command_line.into(),
        }
    }

    fn lines(&self) -> [String; 3] {
        [
            format!("generator: {}", self.version),
            format!("config-sha256: {}", self.config_sha256),
            format!("command: {}", self.command_line),
        ]
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// Full double precision, 17 significant digits.
pub fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn escape(field: &str) -> String {
    if field.contains([',', '"', '\n']) {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

/// A CSV table: header row plus string cells.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn push_numbers(&mut self, row: &[f64]) {
        self.push(row.iter().map(|v| num(*v)).collect());
    }

    pub fn to_csv(&self, prov: &Provenance) -> String {
        let mut s = String::new();
        for l in prov.lines() {
            let _ = writeln!(s, "# {l}");
        }
        let line = |cells: &[String]| cells.iter().map(|c| escape(c)).collect::<Vec<_>>().join(",");
        let _ = writeln!(s, "{}", line(&self.header));
        for r in &self.rows {
            let _ = writeln!(s, "{}", line(r));
        }
        s
    }

    pub fn write(&self, path: &Path, prov: &Provenance) -> Result<()> {
        fs::write(path, self.to_csv(prov))?;
        Ok(())
    }
}

/// Parses a CSV written by [`Table::to_csv`], skipping `#` lines.
pub fn read_csv(text: &str) -> Table {
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let split = |l: &str| l.split(',').map(str::to_string).collect::<Vec<_>>();
    let header = lines.next().map(split).unwrap_or_default();
    Table {
        header,
        rows: lines.map(split).collect(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Plot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_x: bool,
    pub series: Vec<Series>,
}

const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let span = hi - lo;
    if !(span > 0.0) {
        return vec![lo];
    }
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| span / s <= 6.0).unwrap_or(10.0 * mag);
    let mut t = (lo / step).ceil() * step;
    let mut out = Vec::new();
    while t <= hi + 1e-9 * span {
        out.push(t);
        t += step;
    }
    out
}

impl Plot {
    pub fn to_svg(&self, prov: &Provenance) -> String {
        let (w, h) = (800.0, 480.0);
        let (ml, mr, mt, mb) = (80.0, 20.0, 40.0, 60.0);
        let fx = |x: f64| if self.log_x { x.log10() } else { x };
        let pts = self
            .series
            .iter()
            .flat_map(|s| s.x.iter().zip(&s.y))
            .filter(|(x, y)| x.is_finite() && y.is_finite() && (!self.log_x || **x > 0.0));
        let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
        for (x, y) in pts {
            x0 = x0.min(fx(*x));
            x1 = x1.max(fx(*x));
            y0 = y0.min(*y);
            y1 = y1.max(*y);
        }
        if x0 > x1 {
            (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
        }
        if x1 == x0 {
            x1 = x0 + 1.0;
        }
        if y1 == y0 {
            y1 = y0 + 1.0;
        }
        let px = |x: f64| ml + (fx(x) - x0) / (x1 - x0) * (w - ml - mr);
        let py = |y: f64| h - mb - (y - y0) / (y1 - y0) * (h - mt - mb);

        let mut s = String::new();
        let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="12">"#);
        for l in prov.lines() {
            let _ = writeln!(s, "<!-- {} -->", l.replace("--", "- -"));
        }
        let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
        let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#, w / 2.0, xml(&self.title));
        let _ = writeln!(
            s,
            r#"<rect x="{ml}" y="{mt}" width="{}" height="{}" fill="none" stroke="black"/>"#,
            w - ml - mr,
            h - mt - mb
        );
        let xt: Vec<f64> = if self.log_x {
            (x0.floor() as i32..=x1.ceil() as i32).map(|e| 10f64.powi(e)).filter(|v| fx(*v) >= x0 - 1e-9 && fx(*v) <= x1 + 1e-9).collect()
        } else {
            ticks(x0, x1)
        };
        for t in xt {
            let x = px(t);
            let _ = writeln!(s, r##"<line x1="{x:.1}" y1="{:.1}" x2="{x:.1}" y2="{mt}" stroke="#dddddd"/>"##, h - mb);
            let _ = writeln!(s, r#"<text x="{x:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, h - mb + 16.0, label(t));
        }
        for t in ticks(y0, y1) {
            let y = py(t);
            let _ = writeln!(s, r##"<line x1="{ml}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#dddddd"/>"##, w - mr);
            let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#, ml - 6.0, y + 4.0, label(t));
        }
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, (ml + w - mr) / 2.0, h - 18.0, xml(&self.x_label));
        let _ = writeln!(
            s,
            r#"<text x="18" y="{}" text-anchor="middle" transform="rotate(-90 18 {})">{}</text>"#,
            (mt + h - mb) / 2.0,
            (mt + h - mb) / 2.0,
            xml(&self.y_label)
        );
        for (k, ser) in self.series.iter().enumerate() {
            let color = COLORS[k % COLORS.len()];
            let path: Vec<String> = ser
                .x
                .iter()
                .zip(&ser.y)
                .filter(|(x, y)| x.is_finite() && y.is_finite() && (!self.log_x || **x > 0.0))
                .map(|(x, y)| format!("{:.2},{:.2}", px(*x), py(*y)))
                .collect();
            let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, path.join(" "));
            let ly = mt + 16.0 + 16.0 * k as f64;
            let _ = writeln!(s, r#"<line x1="{:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="2"/>"#, w - mr - 150.0, w - mr - 130.0);
            let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}">{}</text>"#, w - mr - 125.0, ly + 4.0, xml(&ser.name));
        }
        s.push_str("</svg>\n");
        s
    }

    pub fn write(&self, path: &Path, prov: &Provenance) -> Result<()> {
        fs::write(path, self.to_svg(prov))?;
        Ok(())
    }
}

fn label(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && !(1e-3..1e5).contains(&a) {
        format!("{v:.0e}")
    } else {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn xml(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn prov() -> Provenance {
        Provenance::new("name = \"x\"", "dqgrid eigs case.cfg")
    }

    #[test]
    fn csv_round_trip_keeps_full_precision() {
        let mut t = Table::new(["a", "b"]);
        t.push_numbers(&[std::f64::consts::PI, -1.0 / 3.0]);
        let text = t.to_csv(&prov());
        assert!(text.starts_with("# generator: dqgrid"));
        let back = read_csv(&text);
        assert_eq!(back.header, vec!["a", "b"]);
        let v: f64 = back.rows[0][0].parse().unwrap();
        assert_eq!(v, std::f64::consts::PI);
        let w: f64 = back.rows[0][1].parse().unwrap();
        assert_eq!(w, -1.0 / 3.0);
    }

    #[test]
    fn hash_is_stable() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn svg_is_well_formed_enough() {
        let p = Plot {
            title: "sweep".into(),
            x_label: "f".into(),
            y_label: "gain".into(),
            log_x: true,
            series: vec![Series {
                name: "spc".into(),
                x: vec![0.1, 1.0, 10.0, 100.0],
                y: vec![1.0, 2.0, f64::INFINITY, 0.5],
            }],
        };
        let s = p.to_svg(&prov());
        assert!(s.starts_with("<svg") && s.trim_end().ends_with("</svg>"));
        assert!(s.contains("config-sha256"));
        assert!(!s.contains("inf,"));
    }
}
