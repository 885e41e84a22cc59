//! Deterministic SVG choropleths.

use std::fmt::Write as _;

use geoaffinity::geometry::{BBox, MultiPolygon};
use geoaffinity::ingest::TractId;
use geoaffinity::spatial::HotSpotCategory;

use crate::error::CliError;

/// Nine-class yellow-orange-red ramp; `k` classes take evenly spaced entries.
const SEQUENTIAL: [&str; 9] = [
    "#ffffcc", "#ffeda0", "#fed976", "#feb24c", "#fd8d3c", "#fc4e2a", "#e31a1c", "#bd0026", "#800026",
];

pub fn category_color(c: HotSpotCategory) -> &'static str {
    match c {
        HotSpotCategory::Hot99 => "#b2182b",
        HotSpotCategory::Hot95 => "#ef8a62",
        HotSpotCategory::Hot90 => "#fddbc7",
        HotSpotCategory::NotSig => "#e0e0e0",
        HotSpotCategory::Cold90 => "#d1e5f0",
        HotSpotCategory::Cold95 => "#67a9cf",
        HotSpotCategory::Cold99 => "#2166ac",
    }
}

fn ramp(bins: usize) -> Vec<&'static str> {
    if bins == 1 {
        return vec![SEQUENTIAL[4]];
    }
    (0..bins).map(|k| SEQUENTIAL[(k * 8 + (bins - 1) / 2) / (bins - 1)]).collect()
}

/// Upper edges of quantile classes. Class `k` holds values in
/// `(edge[k-1], edge[k]]`; duplicate edges caused by ties are merged, so
/// fewer than `bins` classes may result.
pub fn quantile_breaks(values: &[f64], bins: usize) -> Vec<f64> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let mut edges: Vec<f64> = (1..=bins).map(|k| sorted[(k * n).div_ceil(bins) - 1]).collect();
    edges.dedup();
    edges
}

fn class_of(v: f64, edges: &[f64]) -> usize {
    edges.iter().position(|&e| v <= e).unwrap_or(edges.len() - 1)
}

pub enum Classes<'a> {
    Quantile { values: &'a [f64], bins: usize },
    Categories(&'a [HotSpotCategory]),
}

pub struct MapSpec<'a> {
    pub title: &'a str,
    pub config_hash: &'a str,
}

struct Frame {
    min_x: f64,
    max_y: f64,
    scale: f64,
}

const MAP_WIDTH: f64 = 720.0;
const MARGIN: f64 = 10.0;
const LEGEND_WIDTH: f64 = 200.0;

impl Frame {
    fn point(&self, p: [f64; 2]) -> (f64, f64) {
        (MARGIN + (p[0] - self.min_x) * self.scale, MARGIN + (self.max_y - p[1]) * self.scale)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn path_data(mp: &MultiPolygon, frame: &Frame) -> String {
    let mut d = String::new();
    for ring in mp.rings() {
        let pts = &ring.points[..ring.points.len().saturating_sub(1)];
        for (k, &p) in pts.iter().enumerate() {
            let (x, y) = frame.point(p);
            let _ = write!(d, "{}{x:.3} {y:.3} ", if k == 0 { "M" } else { "L" });
        }
        d.push_str("Z ");
    }
    d.trim_end().to_string()
}

fn fmt_edge(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.into() }
}

/// One `<path>` per tract, a legend and a `<metadata>` element carrying the
/// config hash. Identical inputs give byte-identical output.
pub fn render_choropleth(
    ids: &[TractId],
    geometry: &[MultiPolygon],
    classes: Classes<'_>,
    spec: &MapSpec<'_>,
) -> Result<String, CliError> {
    if geometry.is_empty() {
        return Err(CliError::data("choropleth: no polygons to draw"));
    }
    if ids.len() != geometry.len() {
        return Err(CliError::data("choropleth: ids and geometry differ in length"));
    }
    let (fills, legend): (Vec<&str>, Vec<(String, &str)>) = match classes {
        Classes::Quantile { values, bins } => {
            if values.len() != geometry.len() {
                return Err(CliError::data("choropleth: values and geometry differ in length"));
            }
            if values.iter().any(|v| !v.is_finite()) {
                return Err(CliError::data("choropleth: values must be finite"));
            }
            let edges = quantile_breaks(values, bins.max(1));
            let colors = ramp(edges.len());
            let fills = values.iter().map(|&v| colors[class_of(v, &edges)]).collect();
            let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
            let legend = edges
                .iter()
                .enumerate()
                .map(|(k, &e)| {
                    let label = if k == 0 {
                        format!("{} to {}", fmt_edge(min), fmt_edge(e))
                    } else {
                        format!("> {} to {}", fmt_edge(edges[k - 1]), fmt_edge(e))
                    };
                    (label, colors[k])
                })
                .collect();
            (fills, legend)
        }
        Classes::Categories(cats) => {
            if cats.len() != geometry.len() {
                return Err(CliError::data("choropleth: categories and geometry differ in length"));
            }
            let fills = cats.iter().map(|&c| category_color(c)).collect();
            let legend = HotSpotCategory::ALL.iter().map(|&c| (c.as_str().to_string(), category_color(c))).collect();
            (fills, legend)
        }
    };

    let mut bbox = BBox::empty();
    for g in geometry {
        bbox.merge(&g.bbox());
    }
    let span_x = (bbox.max[0] - bbox.min[0]).max(f64::MIN_POSITIVE);
    let span_y = (bbox.max[1] - bbox.min[1]).max(f64::MIN_POSITIVE);
    let scale = (MAP_WIDTH - 2.0 * MARGIN) / span_x.max(span_y);
    let frame = Frame { min_x: bbox.min[0], max_y: bbox.max[1], scale };
    let map_h = span_y * scale + 2.0 * MARGIN;
    let legend_h = 40.0 + 22.0 * legend.len() as f64;
    let width = span_x * scale + 2.0 * MARGIN + LEGEND_WIDTH;
    let height = map_h.max(legend_h);

    let mut out = String::new();
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.0}\" height=\"{height:.0}\" viewBox=\"0 0 {width:.3} {height:.3}\">"
    );
    let _ = writeln!(
        out,
        "<metadata>{{\"generator\":\"geoaffinity {}\",\"config_hash\":\"{}\"}}</metadata>",
        env!("CARGO_PKG_VERSION"),
        escape(spec.config_hash)
    );
    let _ = writeln!(out, "<title>{}</title>", escape(spec.title));
    let _ = writeln!(out, "<g id=\"tracts\" stroke=\"#555555\" stroke-width=\"0.5\" fill-rule=\"evenodd\">");
    for ((id, g), fill) in ids.iter().zip(geometry).zip(&fills) {
        let _ = writeln!(
            out,
            "<path class=\"tract\" data-id=\"{}\" fill=\"{fill}\" d=\"{}\"/>",
            escape(id.as_str()),
            path_data(g, &frame)
        );
    }
    out.push_str("</g>\n");
    let lx = span_x * scale + 2.0 * MARGIN + 10.0;
    let _ = writeln!(out, "<g id=\"legend\" font-family=\"sans-serif\" font-size=\"12\">");
    let _ = writeln!(out, "<text x=\"{lx:.3}\" y=\"24\" font-weight=\"bold\">{}</text>", escape(spec.title));
    for (k, (label, color)) in legend.iter().enumerate() {
        let y = 40.0 + 22.0 * k as f64;
        let _ = writeln!(
            out,
            "<rect class=\"legend-swatch\" x=\"{lx:.3}\" y=\"{y:.3}\" width=\"16\" height=\"16\" fill=\"{color}\" stroke=\"#555555\"/>"
        );
        let _ = writeln!(out, "<text x=\"{:.3}\" y=\"{:.3}\">{}</text>", lx + 22.0, y + 12.5, escape(label));
    }
    out.push_str("</g>\n</svg>\n");
    Ok(out)
}
