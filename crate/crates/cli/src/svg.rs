use std::fmt::Write as _;

use clustermirror::affine_base::{EigenrayDiagram, NodalPolygon, StripData};
use clustermirror::rational::{q, Point};
use clustermirror::{RationalPolygon, Q};
use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{Signed, Zero};

/// Pixels per unit of the base.
const SCALE: i64 = 100;

/// Exact decimal with six digits, rounding half away from zero.
pub fn dec6(x: &Q) -> String {
    let scaled = x * Q::from_integer(BigInt::from(1_000_000));
    let (n, d) = (scaled.numer().abs(), scaled.denom().clone());
    let (mut quo, rem) = n.div_rem(&d);
    if rem * 2 >= d {
        quo += 1;
    }
    let (int, frac) = quo.div_rem(&BigInt::from(1_000_000));
    let sign = if x.is_negative() && !quo.is_zero() { "-" } else { "" };
    format!("{sign}{int}.{frac:0>6}")
}

pub struct Layer {
    pub class: &'static str,
    pub label: String,
    pub pieces: Vec<RationalPolygon>,
}

impl Layer {
    pub fn from_nodal(class: &'static str, label: String, p: &NodalPolygon, d: &EigenrayDiagram) -> Result<Self, String> {
        Ok(Self { class, label, pieces: p.pieces(d).map_err(|e| e.to_string())? })
    }
}

struct Frame {
    lo: Point,
    hi: Point,
}

impl Frame {
    fn around(points: &[Point]) -> Self {
        let mut lo = vec![q(-2), q(-2)];
        let mut hi = vec![q(2), q(2)];
        for p in points {
            for i in 0..2 {
                lo[i] = lo[i].clone().min(&p[i] - q(1));
                hi[i] = hi[i].clone().max(&p[i] + q(1));
            }
        }
        Self { lo, hi }
    }

    fn x(&self, w: &[Q]) -> String {
        dec6(&((&w[0] - &self.lo[0]) * q(SCALE)))
    }

    fn y(&self, w: &[Q]) -> String {
        dec6(&((&self.hi[1] - &w[1]) * q(SCALE)))
    }

    fn span(&self) -> Q {
        &self.hi[0] - &self.lo[0] + &self.hi[1] - &self.lo[1]
    }
}

fn path(frame: &Frame, pts: &[Point]) -> String {
    let mut s = String::new();
    for (i, p) in pts.iter().enumerate() {
        let _ = write!(s, "{}{},{} ", if i == 0 { "M" } else { "L" }, frame.x(p), frame.y(p));
    }
    s.push('Z');
    s
}

/// Renders rays, nodes with multiplicity labels, optional strips and polygon layers.
pub fn render(d: &EigenrayDiagram, strips: Option<&StripData>, layers: &[Layer]) -> String {
    let mut pts: Vec<Point> = Vec::new();
    for r in &d.rays {
        pts.push(r.base.clone());
        pts.extend((0..r.nodes.len()).map(|j| r.node_position(j)));
    }
    for l in layers {
        pts.extend(l.pieces.iter().flat_map(|p| p.vertices().to_vec()));
    }
    let frame = Frame::around(&pts);
    let far = frame.span();
    let width = dec6(&((&frame.hi[0] - &frame.lo[0]) * q(SCALE)));
    let height = dec6(&((&frame.hi[1] - &frame.lo[1]) * q(SCALE)));

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    );
    s.push_str(concat!(
        "<style>",
        ".ray{stroke:#000;stroke-width:2;stroke-dasharray:8 4}",
        ".node{fill:#000}",
        ".multiplicity{font:14px sans-serif}",
        ".strip{fill:#88a;fill-opacity:0.15;stroke:#88a}",
        ".sigma{stroke:#448;stroke-width:1.5}",
        ".overlay{fill:#c44;fill-opacity:0.2;stroke:#c44;stroke-width:1.5}",
        "</style>\n"
    ));
    if let Some(st) = strips {
        for (i, r) in d.rays.iter().enumerate() {
            let corners = st.strip_corners(d, i, &far);
            let _ = writeln!(s, r#"<path class="strip" d="{}"/>"#, path(&frame, &corners));
            for j in 0..r.nodes.len() {
                let (a, b) = st.sigma(d, i, j);
                let _ = writeln!(
                    s,
                    r#"<line class="sigma" x1="{}" y1="{}" x2="{}" y2="{}"/>"#,
                    frame.x(&a),
                    frame.y(&a),
                    frame.x(&b),
                    frame.y(&b)
                );
            }
        }
    }
    for l in layers {
        let _ = writeln!(s, r#"<g class="{}"><title>{}</title>"#, l.class, l.label);
        for p in &l.pieces {
            let _ = writeln!(s, r#"<path class="{}" d="{}"/>"#, l.class, path(&frame, &p.vertices_ccw()));
        }
        s.push_str("</g>\n");
    }
    for (i, r) in d.rays.iter().enumerate() {
        let end = r.point_at(&far);
        let _ = writeln!(
            s,
            r#"<line class="ray" id="ray{i}" x1="{}" y1="{}" x2="{}" y2="{}"/>"#,
            frame.x(&r.base),
            frame.y(&r.base),
            frame.x(&end),
            frame.y(&end)
        );
        for (j, n) in r.nodes.iter().enumerate() {
            let c = r.node_position(j);
            let _ = writeln!(s, r#"<circle class="node" cx="{}" cy="{}" r="5"/>"#, frame.x(&c), frame.y(&c));
            let label = vec![&c[0] + Q::new(1.into(), 10.into()), &c[1] + Q::new(1.into(), 10.into())];
            let _ = writeln!(
                s,
                r#"<text class="multiplicity" x="{}" y="{}">{}</text>"#,
                frame.x(&label),
                frame.y(&label),
                n.multiplicity
            );
        }
    }
    s.push_str("</svg>\n");
    s
}
