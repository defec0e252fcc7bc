//! CSV and SVG renderings of traces and experiment series.

use std::fmt::Write;

use crate::cover::{DeviationSample, Lemma4Entry};
use crate::flow::ChartSegment;
use crate::qfield::{FieldElem, Scalar, Vec2};

const TRACE_HEADER: &str = "seg_index,poly,x0,y0,x1,y1";

/// Float columns always; exact literal columns follow for exact traces.
pub fn trace_csv(segments: &[ChartSegment<FieldElem>]) -> String {
    let mut out = format!("{TRACE_HEADER},x0e,y0e,x1e,y1e\n");
    for (i, s) in segments.iter().enumerate() {
        let (a, b) = (s.a.to_f64(), s.b.to_f64());
        writeln!(out, "{i},{},{},{},{},{},{},{},{},{}", s.poly, a.x, a.y, b.x, b.y, s.a.x, s.a.y, s.b.x, s.b.y).unwrap();
    }
    out
}

pub fn trace_csv_float<S: Scalar>(segments: &[ChartSegment<S>]) -> String {
    let mut out = format!("{TRACE_HEADER}\n");
    for (i, s) in segments.iter().enumerate() {
        let (a, b) = (s.a.to_f64s(), s.b.to_f64s());
        writeln!(out, "{i},{},{},{},{},{}", s.poly, a.x, a.y, b.x, b.y).unwrap();
    }
    out
}

/// Planar segments as chart segments of polygon 0.
pub fn planar<S: Clone>(segments: &[(Vec2<S>, Vec2<S>)]) -> Vec<ChartSegment<S>> {
    segments.iter().map(|(a, b)| ChartSegment { poly: 0, a: a.clone(), b: b.clone() }).collect()
}

pub fn deviation_csv(samples: &[DeviationSample]) -> String {
    let mut out = String::from("arclength,dist_line,dist_origin\n");
    for s in samples {
        writeln!(out, "{},{},{}", s.arclength, s.dist_line, s.dist_origin).unwrap();
    }
    out
}

pub fn density_csv(rows: &[(f64, f64)]) -> String {
    let mut out = String::from("length,coverage\n");
    for (l, c) in rows {
        writeln!(out, "{l},{c}").unwrap();
    }
    out
}

pub fn lemma4_csv(entries: &[Lemma4Entry]) -> String {
    let mut out = String::from("k,u_k,abs_u_k\n");
    for e in entries {
        writeln!(out, "{},{},{}", e.k, e.u, e.u.to_f64().abs()).unwrap();
    }
    out
}

/// What to draw: outlines (closed polygons), the trace, labelled marks.
#[derive(Clone, Debug, Default)]
pub struct Drawing {
    pub outlines: Vec<Vec<Vec2<f64>>>,
    pub segments: Vec<(Vec2<f64>, Vec2<f64>)>,
    pub marks: Vec<(Vec2<f64>, String)>,
}

impl Drawing {
    fn bounds(&self) -> (f64, f64, f64, f64) {
        let pts = self.outlines.iter().flatten().chain(self.segments.iter().flat_map(|(a, b)| [a, b])).chain(self.marks.iter().map(|m| &m.0));
        let (mut x0, mut y0, mut x1, mut y1) = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in pts {
            x0 = x0.min(p.x);
            y0 = y0.min(p.y);
            x1 = x1.max(p.x);
            y1 = y1.max(p.y);
        }
        if !x0.is_finite() {
            return (0.0, 0.0, 1.0, 1.0);
        }
        (x0, y0, x1, y1)
    }

    /// SVG of height-normalized user units with y pointing up.
    pub fn to_svg(&self, width_px: f64) -> String {
        let (x0, y0, x1, y1) = self.bounds();
        let pad = 0.05 * (x1 - x0).max(y1 - y0).max(1e-9);
        let (w, h) = (x1 - x0 + 2.0 * pad, y1 - y0 + 2.0 * pad);
        let stroke = w.max(h) / 600.0;
        let mut out = String::new();
        writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width_px}" height="{}" viewBox="{} {} {w} {h}">"#,
            (width_px * h / w).round(),
            x0 - pad,
            -(y1 + pad)
        )
        .unwrap();
        writeln!(out, r#"<g transform="scale(1,-1)" fill="none" stroke-linecap="round">"#).unwrap();
        for poly in &self.outlines {
            let pts: Vec<String> = poly.iter().map(|p| format!("{},{}", p.x, p.y)).collect();
            writeln!(out, r##"<polygon points="{}" stroke="#888" stroke-width="{}"/>"##, pts.join(" "), 2.0 * stroke).unwrap();
        }
        if !self.segments.is_empty() {
            let mut d = String::new();
            for (a, b) in &self.segments {
                write!(d, "M{} {}L{} {}", a.x, a.y, b.x, b.y).unwrap();
            }
            writeln!(out, r##"<path d="{d}" stroke="#c33" stroke-width="{stroke}"/>"##).unwrap();
        }
        for (p, _) in &self.marks {
            writeln!(out, r##"<circle cx="{}" cy="{}" r="{}" fill="#036" stroke="none"/>"##, p.x, p.y, 4.0 * stroke).unwrap();
        }
        writeln!(out, "</g>").unwrap();
        for (p, label) in &self.marks {
            writeln!(out, r##"<text x="{}" y="{}" font-size="{}" fill="#036">{}</text>"##, p.x + 6.0 * stroke, -p.y - 6.0 * stroke, 20.0 * stroke, escape(label)).unwrap();
        }
        out.push_str("</svg>\n");
        out
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_trace_columns() {
        let seg = ChartSegment { poly: 0, a: Vec2::ints(0, 0), b: Vec2::new(FieldElem::sqrt3(), FieldElem::one()) };
        let csv = trace_csv(&[seg]);
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "seg_index,poly,x0,y0,x1,y1,x0e,y0e,x1e,y1e");
        let row: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(row.len(), 10);
        assert_eq!(row[8].parse::<FieldElem>().unwrap(), FieldElem::sqrt3());
    }

    #[test]
    fn svg_is_well_formed() {
        let d = Drawing {
            outlines: vec![vec![Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0)]],
            segments: vec![(Vec2::new(0.0, 0.0), Vec2::new(0.5, 0.5))],
            marks: vec![(Vec2::new(0.0, 0.0), "<4pi>".into())],
        };
        let svg = d.to_svg(400.0);
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert!(svg.contains("&lt;4pi&gt;"));
    }
}
