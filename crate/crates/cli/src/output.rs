use std::fmt::Write as _;
use std::path::Path;

use crate::CliError;

pub fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    std::fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

pub fn to_json<T: serde::Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("value serializes");
    s.push('\n');
    s
}

/// `count,frequency` rows.
pub fn counts_csv(counts: &[usize]) -> String {
    let mut hist = std::collections::BTreeMap::new();
    for &c in counts {
        *hist.entry(c).or_insert(0usize) += 1;
    }
    let mut out = String::from("count,frequency\n");
    for (c, f) in hist {
        writeln!(out, "{c},{f}").unwrap();
    }
    out
}

pub fn samples_csv(header: &str, xs: &[f64]) -> String {
    let mut out = format!("{header}\n");
    for x in xs {
        writeln!(out, "{x}").unwrap();
    }
    out
}

#[derive(Debug, Clone)]
pub struct Histogram {
    pub lo: f64,
    pub width: f64,
    pub density: Vec<f64>,
}

impl Histogram {
    pub fn new(xs: &[f64], bins: usize) -> Self {
        let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let width = ((hi - lo) / bins as f64).max(1e-12);
        let mut counts = vec![0usize; bins];
        for &x in xs {
            let b = (((x - lo) / width) as usize).min(bins - 1);
            counts[b] += 1;
        }
        let scale = 1.0 / (xs.len() as f64 * width);
        Self {
            lo,
            width,
            density: counts.iter().map(|&c| c as f64 * scale).collect(),
        }
    }
}

/// Bar chart of `xs` with an optional reference density overlaid as a polyline.
pub fn histogram_svg(title: &str, xs: &[f64], reference: Option<&dyn Fn(f64) -> f64>) -> String {
    const W: f64 = 640.0;
    const H: f64 = 400.0;
    const PAD: f64 = 40.0;
    let hist = Histogram::new(xs, 40);
    let hi = hist.lo + hist.width * hist.density.len() as f64;
    let curve: Vec<(f64, f64)> = reference
        .map(|f| {
            (0..=200)
                .map(|i| {
                    let x = hist.lo + (hi - hist.lo) * i as f64 / 200.0;
                    (x, f(x))
                })
                .collect()
        })
        .unwrap_or_default();
    let ymax = hist
        .density
        .iter()
        .copied()
        .chain(curve.iter().map(|p| p.1))
        .fold(0.0f64, f64::max)
        .max(1e-12);
    let sx = |x: f64| PAD + (x - hist.lo) / (hi - hist.lo).max(1e-12) * (W - 2.0 * PAD);
    let sy = |y: f64| H - PAD - y / ymax * (H - 2.0 * PAD);

    let mut out = String::new();
    writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#).unwrap();
    writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#).unwrap();
    writeln!(out, r#"<text x="{PAD}" y="24" font-family="sans-serif" font-size="14">{}</text>"#, escape(title)).unwrap();
    for (i, d) in hist.density.iter().enumerate() {
        let x0 = sx(hist.lo + i as f64 * hist.width);
        let x1 = sx(hist.lo + (i + 1) as f64 * hist.width);
        let y = sy(*d);
        writeln!(
            out,
            r##"<rect x="{x0:.2}" y="{y:.2}" width="{:.2}" height="{:.2}" fill="#7a9cc6" stroke="#34527a" stroke-width="0.5"/>"##,
            (x1 - x0).max(0.0),
            (H - PAD - y).max(0.0)
        )
        .unwrap();
    }
    if !curve.is_empty() {
        let pts: Vec<String> = curve.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
        writeln!(out, r##"<polyline points="{}" fill="none" stroke="#c0392b" stroke-width="2"/>"##, pts.join(" ")).unwrap();
    }
    writeln!(
        out,
        r#"<line x1="{PAD}" y1="{0}" x2="{1}" y2="{0}" stroke="black"/>"#,
        H - PAD,
        W - PAD
    )
    .unwrap();
    for x in [hist.lo, 0.5 * (hist.lo + hi), hi] {
        writeln!(
            out,
            r#"<text x="{:.2}" y="{}" font-family="sans-serif" font-size="11" text-anchor="middle">{x:.2}</text>"#,
            sx(x),
            H - PAD + 16.0
        )
        .unwrap();
    }
    out.push_str("</svg>\n");
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
