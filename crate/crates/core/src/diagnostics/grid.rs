//! Grid specifications and the tabulated density comparison.

use std::fmt;
use std::str::FromStr;

use super::{check_increasing, kde_all, trapezoid, Bandwidth, DiagnosticsError};
use crate::edgeworth::EdgeworthMeasure;
use crate::stats::normal_pdf;

/// Column layout of the exported comparison table.
pub const DENSITY_GRID_HEADER: &str =
    "x,gaussian,kde,edgeworth,gaussian_d1,kde_d1,edgeworth_d1,gaussian_d2,kde_d2,edgeworth_d2";

/// `points` equally spaced values on `[a, b]`, written `a:b:points`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub a: f64,
    pub b: f64,
    pub points: usize,
}

impl GridSpec {
    pub fn new(a: f64, b: f64, points: usize) -> Result<Self, DiagnosticsError> {
        if !(a.is_finite() && b.is_finite() && b > a) {
            return Err(DiagnosticsError::InvalidGrid(format!("need a < b, got {a}:{b}")));
        }
        if points < 2 {
            return Err(DiagnosticsError::InvalidGrid(format!(
                "need at least 2 points, got {points}"
            )));
        }
        Ok(Self { a, b, points })
    }

    pub fn values(&self) -> Vec<f64> {
        let step = (self.b - self.a) / (self.points - 1) as f64;
        (0..self.points)
            .map(|i| if i + 1 == self.points { self.b } else { self.a + step * i as f64 })
            .collect()
    }
}

impl fmt::Display for GridSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.a, self.b, self.points)
    }
}

impl FromStr for GridSpec {
    type Err = DiagnosticsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || DiagnosticsError::InvalidGrid(format!("expected a:b:points, got '{s}'"));
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(bad());
        }
        let a = parts[0].trim().parse().map_err(|_| bad())?;
        let b = parts[1].trim().parse().map_err(|_| bad())?;
        let points = parts[2].trim().parse().map_err(|_| bad())?;
        Self::new(a, b, points)
    }
}

/// Gaussian, KDE and Edgeworth densities with their first two derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityGrid {
    pub x: Vec<f64>,
    /// `[density, d1, d2]` for each source.
    pub gaussian: [Vec<f64>; 3],
    pub kde: [Vec<f64>; 3],
    pub edgeworth: [Vec<f64>; 3],
    pub bandwidth: f64,
}

impl DensityGrid {
    pub fn build(
        samples: &[f64],
        meas: &EdgeworthMeasure,
        x: &[f64],
        bandwidth: Bandwidth,
    ) -> Result<Self, DiagnosticsError> {
        check_increasing(x)?;
        let k = kde_all(samples, x, bandwidth)?;
        let column = |f: &dyn Fn(f64) -> f64| x.iter().map(|&v| f(v)).collect::<Vec<_>>();
        let gaussian = [
            column(&normal_pdf),
            column(&|v| -v * normal_pdf(v)),
            column(&|v| (v * v - 1.0) * normal_pdf(v)),
        ];
        let edgeworth = [
            column(&|v| meas.density(v, 0)),
            column(&|v| meas.density(v, 1)),
            column(&|v| meas.density(v, 2)),
        ];
        Ok(Self {
            x: x.to_vec(),
            gaussian,
            kde: [k.d0, k.d1, k.d2],
            edgeworth,
            bandwidth: k.bandwidth,
        })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Trapezoid integral of one column.
    pub fn integral(&self, column: &[f64]) -> f64 {
        trapezoid(&self.x, column)
    }

    /// `sup |a - b|` between two columns.
    pub fn sup_distance(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).fold(0.0, |m, (u, v)| m.max((u - v).abs()))
    }

    fn row(&self, i: usize) -> [f64; 10] {
        let (g, k, e) = (&self.gaussian, &self.kde, &self.edgeworth);
        [
            self.x[i], g[0][i], k[0][i], e[0][i], g[1][i], k[1][i], e[1][i], g[2][i], k[2][i],
            e[2][i],
        ]
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(200 * (self.len() + 1));
        out.push_str(DENSITY_GRID_HEADER);
        out.push('\n');
        for i in 0..self.len() {
            let row: Vec<String> = self.row(i).iter().map(|v| v.to_string()).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    /// Parses a table written by [`DensityGrid::to_csv`]; any other header is
    /// rejected. The bandwidth is not part of the table and reads as NaN.
    pub fn from_csv(text: &str) -> Result<Self, DiagnosticsError> {
        let mut lines = text.lines();
        let header = lines.next().unwrap_or_default();
        if header != DENSITY_GRID_HEADER {
            return Err(DiagnosticsError::Parse(format!("unexpected header '{header}'")));
        }
        let mut cols: Vec<Vec<f64>> = vec![Vec::new(); 10];
        for line in lines.filter(|l| !l.is_empty()) {
            let vals: Vec<f64> = line
                .split(',')
                .map(|v| v.parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|_| DiagnosticsError::Parse(line.to_string()))?;
            if vals.len() != 10 {
                return Err(DiagnosticsError::Parse(line.to_string()));
            }
            for (c, v) in cols.iter_mut().zip(vals) {
                c.push(v);
            }
        }
        let mut it = cols.into_iter();
        let mut next = || it.next().unwrap_or_default();
        let x = next();
        let (g0, k0, e0, g1, k1, e1, g2, k2, e2) =
            (next(), next(), next(), next(), next(), next(), next(), next(), next());
        Ok(Self {
            x,
            gaussian: [g0, g1, g2],
            kde: [k0, k1, k2],
            edgeworth: [e0, e1, e2],
            bandwidth: f64::NAN,
        })
    }
}
