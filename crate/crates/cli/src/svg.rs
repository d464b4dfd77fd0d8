//! Static SVG drawings of polygons with an exact JSON sidecar.
//!
//! Every rational vertex `(x, y)` is drawn at `(s·x, −s·y)` for the
//! integer factor `s` = lcm of the ordinate denominators, so drawn
//! coordinates are integers. Log-type ordinates have no exact drawing
//! and are rounded; the sidecar marks them inexact.

use std::fmt::Write as _;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, ToPrimitive};
use serde_json::{json, Value};

use slopes_core::polygon::degree_to_json;
use slopes_core::{DegreeValue, NewtonPolygon};

use crate::{CliError, CliResult};

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];
const WIDTH_PX: u32 = 480;

pub struct Drawing {
    pub svg: String,
    pub sidecar: Value,
}

/// A drawn ordinate: exact integer after scaling, or a rounded decimal.
enum Ordinate {
    Exact(BigInt),
    Rounded(f64),
}

impl Ordinate {
    fn text(&self) -> String {
        match self {
            Ordinate::Exact(n) => n.to_string(),
            Ordinate::Rounded(x) => format!("{x:.6}"),
        }
    }

    fn value(&self) -> f64 {
        match self {
            Ordinate::Exact(n) => n.to_f64().unwrap_or(f64::MAX),
            Ordinate::Rounded(x) => *x,
        }
    }
}

fn scale_factor(polygons: &[(String, NewtonPolygon)]) -> BigInt {
    let mut s = BigInt::one();
    for (_, p) in polygons {
        for (_, y) in p.vertices() {
            if let DegreeValue::Rational(y) = y {
                s = s.lcm(y.denom());
            }
        }
    }
    s
}

/// Screen ordinate `−s·y`, so that larger degrees are drawn higher.
fn ordinate(y: &DegreeValue, s: &BigInt) -> Ordinate {
    match y {
        DegreeValue::Rational(q) => Ordinate::Exact(-(q.numer() * s / q.denom())),
        other if other.is_zero() => Ordinate::Exact(BigInt::from(0)),
        other => Ordinate::Rounded(-other.approx() * s.to_f64().unwrap_or(1.0)),
    }
}

pub fn render(polygons: &[(String, NewtonPolygon)]) -> CliResult<Drawing> {
    if polygons.is_empty() {
        return Err(CliError::Usage("nothing to draw".into()));
    }
    let s = scale_factor(polygons);
    let sf = s
        .to_f64()
        .filter(|x| x.is_finite())
        .ok_or_else(|| CliError::Usage("scale factor too large to draw".into()))?;
    let mut drawn = Vec::new();
    let (mut xmax, mut ymin, mut ymax) = (1.0f64, 0.0f64, 0.0f64);
    for (label, p) in polygons {
        let pts: Vec<(BigInt, Ordinate)> = p
            .vertices()
            .iter()
            .map(|(x, y)| (BigInt::from(*x) * &s, ordinate(y, &s)))
            .collect();
        for (x, y) in &pts {
            xmax = xmax.max(x.to_f64().unwrap_or(0.0));
            ymin = ymin.min(y.value());
            ymax = ymax.max(y.value());
        }
        drawn.push((label, p, pts));
    }
    let pad = sf;
    let (vx, vy) = (-pad, ymin - pad);
    let (vw, vh) = (xmax + 2.0 * pad, (ymax - ymin) + 2.0 * pad);
    let height_px = ((WIDTH_PX as f64) * vh / vw).round().clamp(120.0, 960.0) as u32;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH_PX}" height="{height_px}" viewBox="{} {} {} {}" data-scale="{s}">"#,
        fmt_f(vx),
        fmt_f(vy),
        fmt_f(vw),
        fmt_f(vh)
    );
    let _ = writeln!(
        svg,
        r##"  <line x1="{}" y1="0" x2="{}" y2="0" stroke="#999" stroke-width="1" vector-effect="non-scaling-stroke"/>"##,
        fmt_f(vx),
        fmt_f(vx + vw)
    );
    let radius = fmt_f(vw / 120.0);
    let mut sidecar_polys = Vec::new();
    for (i, (label, p, pts)) in drawn.iter().enumerate() {
        let colour = PALETTE[i % PALETTE.len()];
        let points: Vec<String> = pts.iter().map(|(x, y)| format!("{x},{}", y.text())).collect();
        let _ = writeln!(
            svg,
            r#"  <polyline points="{}" fill="none" stroke="{colour}" stroke-width="2" vector-effect="non-scaling-stroke"><title>{}</title></polyline>"#,
            points.join(" "),
            escape(label)
        );
        for (x, y) in pts {
            let _ = writeln!(svg, r#"  <circle cx="{x}" cy="{}" r="{radius}" fill="{colour}"/>"#, y.text());
        }
        let exact = pts.iter().all(|(_, y)| matches!(y, Ordinate::Exact(_)));
        sidecar_polys.push(json!({
            "label": label,
            "exact": exact,
            "polygon": p.to_json(),
            "vertices": p.vertices().iter().map(|(x, y)| json!([x, degree_to_json(y)])).collect::<Vec<_>>(),
            "drawn": pts.iter().map(|(x, y)| json!([x.to_string(), y.text()])).collect::<Vec<_>>(),
        }));
    }
    svg.push_str("</svg>\n");
    Ok(Drawing {
        svg,
        sidecar: json!({
            "scale": s.to_string(),
            "convention": "vertex (x, y) is drawn at (scale*x, -scale*y)",
            "polygons": sidecar_polys,
        }),
    })
}

fn fmt_f(x: f64) -> String {
    let r = x.round();
    if (x - r).abs() < 1e-9 {
        format!("{r:.0}")
    } else {
        format!("{x:.6}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use slopes_core::rational::parse_q;

    fn poly(breaks: &[(&str, u64)]) -> NewtonPolygon {
        let b: Vec<_> = breaks.iter().map(|(s, m)| (parse_q(s).unwrap(), *m)).collect();
        NewtonPolygon::from_rational_breaks(&b).unwrap()
    }

    #[test]
    fn scale_clears_denominators() {
        let p = poly(&[("1/2", 1), ("1/3", 1)]);
        let d = render(&[("p".into(), p)]).unwrap();
        assert_eq!(d.sidecar["scale"], "6");
        // vertices (0,0), (1,1/2), (2,5/6) scaled by 6 and flipped
        assert!(d.svg.contains(r#"points="0,0 6,-3 12,-5""#), "{}", d.svg);
        assert_eq!(d.sidecar["polygons"][0]["exact"], true);
        assert_eq!(d.sidecar["polygons"][0]["vertices"][2], json!([2, "5/6"]));
    }

    #[test]
    fn log_ordinates_are_marked_inexact() {
        let p = NewtonPolygon::from_json(&json!({
            "segments": [{"slope": {"neg_half_log": "2"}, "mult": 1}]
        }))
        .unwrap();
        let d = render(&[("lattice".into(), p)]).unwrap();
        assert_eq!(d.sidecar["polygons"][0]["exact"], false);
        assert!(d.svg.contains("0.346574"), "{}", d.svg);
    }

    #[test]
    fn empty_input_is_refused() {
        assert!(render(&[]).is_err());
    }
}
