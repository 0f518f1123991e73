//! JSON and CSV formats for systems, metric spaces and point sets.
//!
//! Numbers may be written as JSON numbers or as strings (`"1/3"`, `"0.25"`).
//! Decimal literals are read exactly.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::ifs::{AffineMap, Ifs};
use crate::metric::{FiniteMetricSpace, PointSet};
use crate::scalar::{format_rational, parse_rational, Rational, Scalar};
use crate::{Error, Result};

/// A number as it appears in an input file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Num {
    Number(serde_json::Number),
    Text(String),
}

impl Num {
    pub fn to_rational(&self) -> Result<Rational> {
        match self {
            Num::Text(s) => parse_rational(s),
            Num::Number(n) => parse_rational(&n.to_string()).or_else(|_| {
                let f = n.as_f64().ok_or_else(|| Error::Parse(format!("not a number: {n}")))?;
                <Rational as Scalar>::from_f64(f).ok_or_else(|| Error::Parse(format!("not finite: {n}")))
            }),
        }
    }

    pub fn exact(r: &Rational) -> Self {
        Num::Text(format_rational(r))
    }
}

fn rationals(xs: &[Num]) -> Result<Vec<Rational>> {
    xs.iter().map(Num::to_rational).collect()
}

/// One map: `x ↦ A x + b`, or `z ↦ a z + b` on the complex plane.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MapSpec {
    Matrix {
        #[serde(rename = "A")]
        matrix: Vec<Vec<Num>>,
        b: Vec<Num>,
    },
    Complex {
        a: [Num; 2],
        b: [Num; 2],
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IfsFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    pub maps: Vec<MapSpec>,
}

impl IfsFile {
    pub fn to_ifs(&self) -> Result<Ifs<Rational>> {
        let maps = self
            .maps
            .iter()
            .map(|m| match m {
                MapSpec::Matrix { matrix, b } => {
                    let rows = matrix.iter().map(|r| rationals(r)).collect::<Result<Vec<_>>>()?;
                    AffineMap::new(rows, rationals(b)?)
                }
                MapSpec::Complex { a, b } => Ok(AffineMap::complex(
                    (a[0].to_rational()?, a[1].to_rational()?),
                    (b[0].to_rational()?, b[1].to_rational()?),
                )),
            })
            .collect::<Result<Vec<_>>>()?;
        let ifs = Ifs::new(maps)?;
        if let Some(d) = self.dim {
            if d != ifs.dim() {
                return Err(Error::InvalidInput(format!("declared dimension {d} but maps act on dimension {}", ifs.dim())));
            }
        }
        Ok(ifs)
    }

    pub fn from_ifs(ifs: &Ifs<Rational>) -> Self {
        let maps = ifs
            .maps()
            .iter()
            .map(|f| MapSpec::Matrix {
                matrix: f.matrix().iter().map(|r| r.iter().map(Num::exact).collect()).collect(),
                b: f.offset.iter().map(Num::exact).collect(),
            })
            .collect();
        Self { dim: Some(ifs.dim()), maps }
    }
}

pub fn parse_ifs(text: &str) -> Result<Ifs<Rational>> {
    let file: IfsFile = serde_json::from_str(text).map_err(|e| Error::Parse(format!("IFS file: {e}")))?;
    file.to_ifs()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricFile {
    #[serde(default)]
    pub labels: Option<Vec<String>>,
    pub dist: Vec<Vec<Num>>,
}

pub fn parse_metric(text: &str, tol: f64) -> Result<FiniteMetricSpace<Rational>> {
    let file: MetricFile = serde_json::from_str(text).map_err(|e| Error::Parse(format!("metric file: {e}")))?;
    let dist = file.dist.iter().map(|r| rationals(r)).collect::<Result<Vec<_>>>()?;
    let labels = file.labels.unwrap_or_else(|| (0..dist.len()).map(|i| i.to_string()).collect());
    FiniteMetricSpace::new(labels, dist, tol)
}

pub fn metric_to_json(space: &FiniteMetricSpace<Rational>) -> MetricFile {
    MetricFile {
        labels: Some(space.labels().to_vec()),
        dist: space.matrix().iter().map(|r| r.iter().map(Num::exact).collect()).collect(),
    }
}

/// Rows of comma- or whitespace-separated numbers; `#` starts a comment.
pub fn parse_points_csv(text: &str) -> Result<Vec<Vec<Rational>>> {
    let mut out = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let row = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .map(parse_rational)
            .collect::<Result<Vec<_>>>()
            .map_err(|e| Error::Parse(format!("line {}: {e}", k + 1)))?;
        if let Some(first) = out.first() {
            let first: &Vec<Rational> = first;
            if first.len() != row.len() {
                return Err(Error::Parse(format!("line {}: expected {} columns", k + 1, first.len())));
            }
        }
        out.push(row);
    }
    Ok(out)
}

pub fn points_to_csv<T: Scalar>(points: &PointSet<T>) -> String {
    let mut s = String::new();
    let header: Vec<String> = (0..points.dim()).map(|i| format!("x{i}")).collect();
    let _ = writeln!(s, "{}", header.join(","));
    for p in points.points() {
        let row: Vec<String> = p.iter().map(|x| format!("{:.17e}", x.to_f64())).collect();
        let _ = writeln!(s, "{}", row.join(","));
    }
    s
}

pub fn rational_points_to_csv(points: &[Vec<Rational>]) -> String {
    let mut s = String::new();
    for p in points {
        let row: Vec<String> = p.iter().map(format_rational).collect();
        let _ = writeln!(s, "{}", row.join(","));
    }
    s
}

/// Plain SVG scatter of the first two coordinates (one-dimensional sets are
/// drawn on a horizontal line).
pub fn svg_scatter(points: &PointSet<f64>, size: f64) -> String {
    let pts: Vec<(f64, f64)> = points.points().iter().map(|p| (p[0], p.get(1).copied().unwrap_or(0.0))).collect();
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in &pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    let span = (x1 - x0).max(y1 - y0).max(1e-12);
    let margin = 0.05 * size;
    let scale = (size - 2.0 * margin) / span;
    let r = (size / 400.0).max(0.5);
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">"#);
    for (x, y) in pts {
        let cx = margin + (x - x0) * scale;
        let cy = size - margin - (y - y0) * scale;
        let _ = writeln!(s, r#"<circle cx="{cx:.3}" cy="{cy:.3}" r="{r}"/>"#);
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::rat;

    #[test]
    fn reads_matrix_and_complex_maps() {
        let ifs = parse_ifs(r#"{"dim":1,"maps":[{"A":[["1/3"]],"b":[0]},{"A":[[0.5]],"b":["2/3"]}]}"#).unwrap();
        assert_eq!(ifs.maps()[1].apply(&[rat(0, 1)]), vec![rat(2, 3)]);
        assert_eq!(ifs.maps()[1].apply(&[rat(1, 1)]), vec![rat(7, 6)]);
        let c = parse_ifs(r#"{"maps":[{"a":["1/2",0],"b":[0,"1/2"]}]}"#).unwrap();
        assert_eq!(c.dim(), 2);
        assert_eq!(c.maps()[0].apply(&[rat(1, 1), rat(0, 1)]), vec![rat(1, 2), rat(1, 2)]);
    }

    #[test]
    fn decimals_are_exact() {
        assert_eq!(Num::Number(serde_json::Number::from_f64(0.1).unwrap()).to_rational().unwrap(), rat(1, 10));
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        assert!(parse_ifs(r#"{"dim":2,"maps":[{"A":[["1/3"]],"b":[0]}]}"#).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let pts = parse_points_csv("# Y\n0, 1/2\n1/3 1/4\n").unwrap();
        assert_eq!(pts, vec![vec![rat(0, 1), rat(1, 2)], vec![rat(1, 3), rat(1, 4)]]);
        assert_eq!(parse_points_csv(&rational_points_to_csv(&pts)).unwrap(), pts);
        assert!(parse_points_csv("0,1\n2\n").is_err());
    }

    #[test]
    fn metric_file() {
        let m = parse_metric(r#"{"dist":[[0,1],[1,0]]}"#, 0.0).unwrap();
        assert_eq!(m.labels(), &["0".to_string(), "1".to_string()]);
        assert!(parse_metric(r#"{"dist":[[0,1],[2,0]]}"#, 0.0).is_err());
    }
}
