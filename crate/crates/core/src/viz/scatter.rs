//! SVG + CSV scatter export.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::VizError;
use crate::linalg::Mat;

pub const MISSING_LABEL_COLOR: &str = "#9e9e9e";

const PALETTE: [&str; 10] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
    "#bcbd22", "#393b79",
];

#[derive(Clone, Debug, PartialEq)]
pub struct ScatterPoint {
    pub author_id: String,
    pub x: f64,
    pub y: f64,
    /// Empty when the author has no label.
    pub label: String,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Label classes in sorted order get palette colors (cycling); unlabeled
/// points are gray.
fn color_for(classes: &[&str], label: &str) -> &'static str {
    match classes.iter().position(|c| *c == label) {
        Some(i) if !label.is_empty() => PALETTE[i % PALETTE.len()],
        _ => MISSING_LABEL_COLOR,
    }
}

fn render_svg(points: &[ScatterPoint]) -> String {
    const SIZE: f64 = 600.0;
    const MARGIN: f64 = 20.0;
    let classes: Vec<&str> = points
        .iter()
        .map(|p| p.label.as_str())
        .filter(|l| !l.is_empty())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let (mut x0, mut x1, mut y0, mut y1) = (
        f64::INFINITY,
        f64::NEG_INFINITY,
        f64::INFINITY,
        f64::NEG_INFINITY,
    );
    for p in points {
        x0 = x0.min(p.x);
        x1 = x1.max(p.x);
        y0 = y0.min(p.y);
        y1 = y1.max(p.y);
    }
    let span = (x1 - x0).max(y1 - y0).max(1e-12);
    let map = |v: f64, lo: f64| MARGIN + (v - lo) / span * (SIZE - 2.0 * MARGIN);
    let legend_h = 20.0 * (classes.len() + 1) as f64;
    let mut svg = String::new();
    let _ = writeln!(svg, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#,
        w = SIZE + 160.0,
        h = SIZE.max(legend_h)
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for p in points {
        let _ = writeln!(
            svg,
            r#"<circle cx="{:.3}" cy="{:.3}" r="3" fill="{}" fill-opacity="0.8"><title>{}</title></circle>"#,
            map(p.x, x0),
            SIZE - map(p.y, y0),
            color_for(&classes, &p.label),
            escape(&p.author_id)
        );
    }
    let mut entries: Vec<(&str, &str)> = classes
        .iter()
        .map(|c| (*c, color_for(&classes, c)))
        .collect();
    if points.iter().any(|p| p.label.is_empty()) {
        entries.push(("(no label)", MISSING_LABEL_COLOR));
    }
    for (i, (name, color)) in entries.iter().enumerate() {
        let y = 20.0 + 20.0 * i as f64;
        let _ = writeln!(
            svg,
            r#"<circle cx="{}" cy="{}" r="5" fill="{}"/>"#,
            SIZE + 15.0,
            y,
            color
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12">{}</text>"#,
            SIZE + 28.0,
            y + 4.0,
            escape(name)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

/// Writes `<stem>.csv` (`author_id,x,y,label`) and `<stem>.svg`; returns
/// both paths.
pub fn export_scatter(
    author_ids: &[String],
    coords: &Mat<f64>,
    labels: &[Option<String>],
    stem: &Path,
) -> Result<(PathBuf, PathBuf), VizError> {
    if coords.rows() != author_ids.len() || labels.len() != author_ids.len() || coords.cols() != 2 {
        return Err(VizError::Misaligned {
            coords: coords.rows(),
            labels: labels.len(),
        });
    }
    let points: Vec<ScatterPoint> = author_ids
        .iter()
        .enumerate()
        .map(|(i, id)| ScatterPoint {
            author_id: id.clone(),
            x: coords.get(i, 0),
            y: coords.get(i, 1),
            label: labels[i].clone().unwrap_or_default(),
        })
        .collect();
    let csv_path = stem.with_extension("csv");
    let svg_path = stem.with_extension("svg");
    let mut w = csv::Writer::from_path(&csv_path)?;
    w.write_record(["author_id", "x", "y", "label"])?;
    for p in &points {
        w.write_record([
            p.author_id.as_str(),
            &p.x.to_string(),
            &p.y.to_string(),
            &p.label,
        ])?;
    }
    w.flush()?;
    std::fs::write(&svg_path, render_svg(&points))?;
    Ok((csv_path, svg_path))
}

pub fn read_scatter_csv(path: &Path) -> Result<Vec<ScatterPoint>, VizError> {
    parse_scatter_csv(std::fs::File::open(path)?)
}

/// Parses `author_id,x,y,label` rows after a header line.
pub fn parse_scatter_csv<R: std::io::Read>(reader: R) -> Result<Vec<ScatterPoint>, VizError> {
    let mut r = csv::Reader::from_reader(reader);
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let bad = |message: String| VizError::Parse { line, message };
        if rec.len() != 4 {
            return Err(bad(format!("expected 4 fields, got {}", rec.len())));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|e| bad(format!("{s:?}: {e}")));
        out.push(ScatterPoint {
            author_id: rec[0].to_string(),
            x: num(&rec[1])?,
            y: num(&rec[2])?,
            label: rec[3].to_string(),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn colors_legend_and_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let ids: Vec<String> = ["a", "b", "c"].map(String::from).to_vec();
        let coords = Mat::from_vec(
            3,
            2,
            vec![0.1, 1.0 / 3.0, -2.5e-17, 7.0, std::f64::consts::PI, -1.0],
        );
        let labels = vec![Some("male".to_string()), Some("female".to_string()), None];
        let (csv_path, svg_path) =
            export_scatter(&ids, &coords, &labels, &dir.path().join("plot")).unwrap();
        let svg = std::fs::read_to_string(svg_path).unwrap();
        let fills: BTreeSet<&str> = svg
            .lines()
            .filter(|l| l.contains("<title>"))
            .map(|l| {
                l.split("fill=\"")
                    .nth(1)
                    .unwrap()
                    .split('"')
                    .next()
                    .unwrap()
            })
            .collect();
        assert_eq!(fills.len(), 3);
        assert!(fills.contains(MISSING_LABEL_COLOR));
        assert!(svg.contains(">female</text>") && svg.contains(">(no label)</text>"));
        let back = read_scatter_csv(&csv_path).unwrap();
        for (i, p) in back.iter().enumerate() {
            assert_eq!(p.x.to_bits(), coords.get(i, 0).to_bits());
            assert_eq!(p.y.to_bits(), coords.get(i, 1).to_bits());
        }
        assert_eq!(back[2].label, "");
    }

    #[test]
    fn misaligned_inputs_fail() {
        let dir = tempfile::tempdir().unwrap();
        let r = export_scatter(
            &["a".into()],
            &Mat::zeros(2, 2),
            &[None],
            &dir.path().join("p"),
        );
        assert!(matches!(r, Err(VizError::Misaligned { .. })));
    }
}
