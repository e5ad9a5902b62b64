//! Boundary data functions for the Neumann data on the holes and the
//! Dirichlet data on the outer boundary.
//!
//! Every function is evaluated at a curve parameter `t`, with access to the
//! curve point `x(t)` and outward normal `nu(t)` so that traces of harmonic
//! functions can be expressed directly.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ParametrizedCurve, Point, PointLocation};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FourierMode {
    pub k: usize,
    #[serde(default)]
    pub cos: f64,
    #[serde(default)]
    pub sin: f64,
}

/// One term `Re((re + i im) * z^degree)` of a harmonic polynomial in
/// `z = x1 + i x2`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HarmonicTerm {
    pub degree: u32,
    #[serde(default)]
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

/// Which trace of a harmonic function a data function samples.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trace {
    #[default]
    Value,
    Normal,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DataFunction {
    Constant {
        value: f64,
    },
    /// `constant + sum_k (cos_k cos(k t) + sin_k sin(k t))` in the curve parameter.
    Fourier {
        #[serde(default)]
        constant: f64,
        modes: Vec<FourierMode>,
    },
    /// `amplitude * log|x - q|` or its normal derivative on the curve.
    PointSourceTrace {
        q: [f64; 2],
        #[serde(default = "one")]
        amplitude: f64,
        #[serde(default)]
        trace: Trace,
    },
    /// `constant + sum Re((re + i im) z^degree)` or its normal derivative.
    HarmonicPolynomial {
        #[serde(default)]
        constant: f64,
        terms: Vec<HarmonicTerm>,
        #[serde(default)]
        trace: Trace,
    },
    /// Values at equispaced parameters `2 pi k / n`, trigonometrically
    /// interpolated in between.
    Table {
        values: Vec<f64>,
    },
}

fn one() -> f64 {
    1.0
}

impl DataFunction {
    /// Fourier data from `(k, cos, sin)` triples.
    pub fn fourier(constant: f64, modes: &[(usize, f64, f64)]) -> Self {
        DataFunction::Fourier {
            constant,
            modes: modes
                .iter()
                .map(|&(k, cos, sin)| FourierMode { k, cos, sin })
                .collect(),
        }
    }

    pub fn eval(&self, curve: &ParametrizedCurve, t: f64) -> f64 {
        match self {
            DataFunction::Constant { value } => *value,
            DataFunction::Fourier { constant, modes } => {
                constant
                    + modes
                        .iter()
                        .map(|m| {
                            let (s, c) = (m.k as f64 * t).sin_cos();
                            m.cos * c + m.sin * s
                        })
                        .sum::<f64>()
            }
            DataFunction::PointSourceTrace { q, amplitude, trace } => {
                let d = curve.point(t) - Point::from(*q);
                match trace {
                    Trace::Value => amplitude * d.norm().ln(),
                    Trace::Normal => amplitude * d.dot(&curve.normal(t)) / d.norm_squared(),
                }
            }
            DataFunction::HarmonicPolynomial {
                constant,
                terms,
                trace,
            } => {
                let x = curve.point(t);
                match trace {
                    Trace::Value => constant + harmonic_value(terms, x),
                    Trace::Normal => harmonic_gradient(terms, x).dot(&curve.normal(t)),
                }
            }
            DataFunction::Table { values } => trig_interpolate(values, t),
        }
    }

    /// Samples at the `m` equispaced nodes of the curve parameter.
    pub fn sample(&self, curve: &ParametrizedCurve, m: usize) -> Vec<f64> {
        (0..m)
            .map(|k| self.eval(curve, 2.0 * PI * k as f64 / m as f64))
            .collect()
    }

    /// Point-source traces need their source away from the region where
    /// the data is used: off the curve always, and outside the closed
    /// domain when `interior` is set (Dirichlet data of an interior problem).
    pub fn check_against(&self, curve: &ParametrizedCurve, interior: bool) -> Result<()> {
        match self {
            DataFunction::PointSourceTrace { q, .. } => {
                let loc = curve.contains_point(Point::from(*q), 1e-8);
                let ok = if interior {
                    loc == PointLocation::Outside
                } else {
                    loc != PointLocation::NearBoundary
                };
                if ok {
                    Ok(())
                } else {
                    Err(Error::Config(format!(
                        "point source ({}, {}) lies in the region where its trace is used",
                        q[0], q[1]
                    )))
                }
            }
            DataFunction::Table { values } if values.is_empty() => {
                Err(Error::Config("table data needs at least one value".into()))
            }
            _ => Ok(()),
        }
    }
}

fn harmonic_value(terms: &[HarmonicTerm], x: Point) -> f64 {
    terms
        .iter()
        .map(|term| {
            let (zr, zi) = complex_pow(x.x, x.y, term.degree);
            term.re * zr - term.im * zi
        })
        .sum()
}

fn harmonic_gradient(terms: &[HarmonicTerm], x: Point) -> Point {
    // For f = Re(c z^n): grad f = (Re(c n z^(n-1)), -Im(c n z^(n-1))).
    let mut g = Point::zeros();
    for term in terms {
        if term.degree == 0 {
            continue;
        }
        let n = term.degree as f64;
        let (zr, zi) = complex_pow(x.x, x.y, term.degree - 1);
        let dr = n * (term.re * zr - term.im * zi);
        let di = n * (term.re * zi + term.im * zr);
        g += Point::new(dr, -di);
    }
    g
}

fn complex_pow(a: f64, b: f64, n: u32) -> (f64, f64) {
    let (mut r, mut i) = (1.0, 0.0);
    for _ in 0..n {
        (r, i) = (r * a - i * b, r * b + i * a);
    }
    (r, i)
}

/// Trigonometric interpolant of equispaced samples on `[0, 2 pi)`, with the
/// Nyquist mode split symmetrically for even lengths.
pub fn trig_interpolate(values: &[f64], t: f64) -> f64 {
    let n = values.len();
    if n == 0 {
        return 0.0;
    }
    let nf = n as f64;
    let half = n / 2;
    let mut total = 0.0;
    for (j, &v) in values.iter().enumerate() {
        let d = t - 2.0 * PI * j as f64 / nf;
        let mut kernel = 1.0;
        for k in 1..=half {
            let c = (k as f64 * d).cos();
            kernel += if n % 2 == 0 && k == half { c } else { 2.0 * c };
        }
        total += v * kernel;
    }
    total / nf
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::make_circle;
    use approx::assert_abs_diff_eq;

    #[test]
    fn harmonic_polynomial_trace_and_flux() {
        let c = make_circle(Point::zeros(), 1.0).unwrap();
        let value = DataFunction::HarmonicPolynomial {
            constant: 1.0,
            terms: vec![HarmonicTerm { degree: 2, re: 1.0, im: 0.0 }],
            trace: Trace::Value,
        };
        let normal = DataFunction::HarmonicPolynomial {
            constant: 1.0,
            terms: vec![HarmonicTerm { degree: 2, re: 1.0, im: 0.0 }],
            trace: Trace::Normal,
        };
        for k in 0..16 {
            let t = 0.4 * k as f64;
            assert_abs_diff_eq!(value.eval(&c, t), 1.0 + (2.0 * t).cos(), epsilon = 1e-14);
            // d/dr of r^2 cos(2t) at r = 1
            assert_abs_diff_eq!(normal.eval(&c, t), 2.0 * (2.0 * t).cos(), epsilon = 1e-14);
        }
    }

    #[test]
    fn point_source_normal_on_circle() {
        let c = make_circle(Point::zeros(), 0.25).unwrap();
        let f = DataFunction::PointSourceTrace {
            q: [0.0, 0.0],
            amplitude: 1.0,
            trace: Trace::Normal,
        };
        assert_abs_diff_eq!(f.eval(&c, 1.3), 4.0, epsilon = 1e-14);
        assert!(f.check_against(&c, false).is_ok());
        assert!(f.check_against(&c, true).is_err());
    }

    #[test]
    fn table_reproduces_nodes_and_low_modes() {
        let n = 16;
        let values: Vec<f64> = (0..n)
            .map(|k| (3.0 * 2.0 * PI * k as f64 / n as f64).sin() + 0.5)
            .collect();
        let f = DataFunction::Table { values: values.clone() };
        let c = make_circle(Point::zeros(), 1.0).unwrap();
        for (k, v) in values.iter().enumerate() {
            assert_abs_diff_eq!(f.eval(&c, 2.0 * PI * k as f64 / n as f64), v, epsilon = 1e-13);
        }
        assert_abs_diff_eq!(f.eval(&c, 0.123), (0.369f64).sin() + 0.5, epsilon = 1e-13);
    }

    #[test]
    fn json_shapes() {
        let f: DataFunction =
            serde_json::from_str(r#"{"kind":"fourier","modes":[{"k":1,"cos":1.0}]}"#).unwrap();
        assert_eq!(f, DataFunction::fourier(0.0, &[(1, 1.0, 0.0)]));
        let g: DataFunction =
            serde_json::from_str(r#"{"kind":"point_source_trace","q":[3.0,0.0]}"#).unwrap();
        assert!(matches!(g, DataFunction::PointSourceTrace { amplitude, .. } if amplitude == 1.0));
    }
}
