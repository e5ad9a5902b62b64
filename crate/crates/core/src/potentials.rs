//! The planar fundamental solution, discrete single and adjoint double layer
//! operators, and off-curve layer potential evaluation.
//!
//! Densities are stored as samples at the parameter nodes; the quadrature
//! measure (weight times speed, times the placement scale where relevant)
//! lives in the operators.

use std::f64::consts::PI;

use nalgebra::{DMatrix, Matrix2};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{ParametrizedCurve, Placement, Point, PointLocation};
use crate::quadrature::PeriodicRule;

/// Radius below which the kernel is treated as singular.
pub const SINGULAR_FLOOR: f64 = 1e-14;

const INV_2PI: f64 = 1.0 / (2.0 * PI);
const INV_4PI: f64 = 1.0 / (4.0 * PI);

#[inline]
pub fn s2(x: Point) -> f64 {
    INV_2PI * x.norm().ln()
}

#[inline]
pub fn grad_s2(x: Point) -> Point {
    x * (INV_2PI / x.norm_squared())
}

#[inline]
pub fn hessian_s2(x: Point) -> Matrix2<f64> {
    let r2 = x.norm_squared();
    let c = INV_2PI / (r2 * r2);
    let off = -c * 2.0 * x.x * x.y;
    Matrix2::new(c * (r2 - 2.0 * x.x * x.x), off, off, c * (r2 - 2.0 * x.y * x.y))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum KernelValue {
    Value(f64),
    Gradient(Point),
    Hessian(Matrix2<f64>),
}

/// `S_2`, its gradient, or its Hessian at `x`.
pub fn fundamental_solution(x: Point, order: u8) -> Result<KernelValue> {
    let r = x.norm();
    if !(r > SINGULAR_FLOOR) {
        return Err(Error::SingularEvaluation(r));
    }
    match order {
        0 => Ok(KernelValue::Value(s2(x))),
        1 => Ok(KernelValue::Gradient(grad_s2(x))),
        2 => Ok(KernelValue::Hessian(hessian_s2(x))),
        _ => Err(Error::InvalidParameter(format!("kernel order {order} not in 0..=2"))),
    }
}

/// A curve discretized at the rule nodes and carried to `offset + scale * x`.
///
/// `measure[k]` is `scale * |x'(t_k)| * 2 pi / M` with the scale kept signed,
/// so that a negative scale continues the positive-scale formulas instead of
/// describing a reflected curve. Normals are those of the reference curve.
#[derive(Clone, Debug)]
pub struct Boundary {
    pub curve: ParametrizedCurve,
    pub placement: Placement,
    pub params: Vec<f64>,
    pub points: Vec<Point>,
    pub normals: Vec<Point>,
    pub speeds: Vec<f64>,
    pub curvatures: Vec<f64>,
    pub measure: Vec<f64>,
}

impl Boundary {
    pub fn new(curve: &ParametrizedCurve, placement: Placement, rule: &PeriodicRule) -> Self {
        let params = rule.nodes().to_vec();
        let points = params.iter().map(|&t| placement.apply(curve.point(t))).collect();
        let normals = params.iter().map(|&t| curve.normal(t)).collect();
        let speeds: Vec<f64> = params.iter().map(|&t| curve.speed(t)).collect();
        let curvatures = params.iter().map(|&t| curve.curvature(t)).collect();
        let measure = speeds
            .iter()
            .map(|s| placement.scale * s * rule.weight())
            .collect();
        Self {
            curve: curve.clone(),
            placement,
            params,
            points,
            normals,
            speeds,
            curvatures,
            measure,
        }
    }

    pub fn reference(curve: &ParametrizedCurve, rule: &PeriodicRule) -> Self {
        Self::new(curve, Placement::IDENTITY, rule)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Reference quadrature weights `|x'(t_k)| * 2 pi / M`, ignoring the placement.
    pub fn reference_measure(&self) -> Vec<f64> {
        let w = 2.0 * PI / self.len() as f64;
        self.speeds.iter().map(|s| s * w).collect()
    }

    /// `integral of mu d sigma` over the placed curve (signed scale).
    pub fn integrate(&self, density: &[f64]) -> f64 {
        self.measure.iter().zip(density).map(|(w, m)| w * m).sum()
    }

    /// `integral of mu d sigma` over the reference curve.
    pub fn integrate_reference(&self, density: &[f64]) -> f64 {
        self.reference_measure().iter().zip(density).map(|(w, m)| w * m).sum()
    }

    /// Arc length of the placed curve.
    pub fn length(&self) -> f64 {
        self.measure.iter().sum::<f64>().abs()
    }

    /// Guard band of the placed curve: five node spacings in arc length.
    pub fn guard_band(&self) -> f64 {
        let max_speed = self.speeds.iter().cloned().fold(0.0, f64::max);
        crate::geometry::GUARD_BAND_SPACINGS * self.placement.scale.abs() * max_speed * 2.0 * PI
            / self.len() as f64
    }

    /// Largest node spacing of the placed curve.
    pub fn node_spacing(&self) -> f64 {
        let max_speed = self.speeds.iter().cloned().fold(0.0, f64::max);
        self.placement.scale.abs() * max_speed * 2.0 * PI / self.len() as f64
    }

    pub fn classify(&self, x: Point, band: f64) -> PointLocation {
        self.curve.contains_point_placed(self.placement, x, band)
    }
}

/// A density sampled at the nodes of a curve.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryDensity {
    pub values: Vec<f64>,
    /// Set when the density was constrained to integrate to zero.
    pub mean_zero: bool,
}

impl BoundaryDensity {
    pub fn new(values: Vec<f64>) -> Self {
        Self {
            values,
            mean_zero: false,
        }
    }

    pub fn mean_zero(values: Vec<f64>, boundary: &Boundary) -> Result<Self> {
        let density = Self {
            values,
            mean_zero: true,
        };
        density.check_mean_zero(boundary)?;
        Ok(density)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Verifies `|integral| <= 1e-12 * ||mu||_inf * length` when the flag is set.
    pub fn check_mean_zero(&self, boundary: &Boundary) -> Result<()> {
        if !self.mean_zero {
            return Ok(());
        }
        let integral = boundary.integrate_reference(&self.values);
        let length = boundary.integrate_reference(&vec![1.0; self.values.len()]);
        let bound = 1e-12 * self.sup_norm() * length;
        if integral.abs() > bound.max(f64::MIN_POSITIVE) && self.sup_norm() > 0.0 {
            return Err(Error::Invariant(format!(
                "density should integrate to zero, got {integral:e}"
            )));
        }
        Ok(())
    }
}

/// On-curve single layer of the reference curve, with the logarithmic part
/// of the kernel integrated by the rule's log weights.
pub fn assemble_single_layer_self(curve: &ParametrizedCurve, rule: &PeriodicRule) -> DMatrix<f64> {
    assemble_single_layer_placed(curve, Placement::IDENTITY, rule)
}

/// On-curve single layer of `offset + scale * curve` in its own measure.
pub fn assemble_single_layer_placed(
    curve: &ParametrizedCurve,
    placement: Placement,
    rule: &PeriodicRule,
) -> DMatrix<f64> {
    let b = Boundary::new(curve, placement, rule);
    let m = b.len();
    let w = rule.weight();
    let sigma = placement.scale;
    let log_shift = if sigma != 0.0 { sigma.abs().ln() * INV_2PI } else { 0.0 };
    let reference: Vec<Point> = b.params.iter().map(|&t| curve.point(t)).collect();
    let rows: Vec<Vec<f64>> = (0..m)
        .into_par_iter()
        .map(|i| {
            (0..m)
                .map(|k| {
                    let smooth = if i == k {
                        INV_2PI * b.speeds[i].ln()
                    } else {
                        let d = b.params[i] - b.params[k];
                        let log_part = (4.0 * (0.5 * d).sin().powi(2)).ln();
                        s2(reference[i] - reference[k]) - INV_4PI * log_part
                    };
                    let entry = INV_4PI * rule.log_weight(i, k) + w * (smooth + log_shift);
                    sigma * b.speeds[k] * entry
                })
                .collect()
        })
        .collect();
    DMatrix::from_fn(m, m, |i, k| rows[i][k])
}

/// Matrix of `S_2(target_i - y_k) * measure_k` for off-curve targets.
pub fn single_layer_at(targets: &[Point], source: &Boundary) -> Result<DMatrix<f64>> {
    kernel_matrix(targets.len(), source.len(), |i, k| {
        let d = targets[i] - source.points[k];
        check_floor(d)?;
        Ok(s2(d) * source.measure[k])
    })
}

/// Matrix of `grad S_2(x_i - y_k) . n_i * measure_k` with explicit target normals.
pub fn adjoint_double_layer_at(
    targets: &[Point],
    normals: &[Point],
    source: &Boundary,
) -> Result<DMatrix<f64>> {
    kernel_matrix(targets.len(), source.len(), |i, k| {
        let d = targets[i] - source.points[k];
        check_floor(d)?;
        Ok(grad_s2(d).dot(&normals[i]) * source.measure[k])
    })
}

/// Adjoint double layer between placed curves. When target and source are
/// the same curve with the same placement, the diagonal takes the curvature
/// limit `kappa / (4 pi)`; otherwise the mapped curves must not meet.
pub fn assemble_adjoint_double_layer(
    target_curve: &ParametrizedCurve,
    target_placement: Placement,
    source_curve: &ParametrizedCurve,
    source_placement: Placement,
    rule: &PeriodicRule,
) -> Result<DMatrix<f64>> {
    let target = Boundary::new(target_curve, target_placement, rule);
    let source = Boundary::new(source_curve, source_placement, rule);
    if target_curve == source_curve && target_placement == source_placement {
        return Ok(adjoint_double_layer_self(&source));
    }
    adjoint_double_layer_at(&target.points, &target.normals, &source).map_err(|e| match e {
        Error::SingularEvaluation(_) => Error::CurvesIntersect,
        other => other,
    })
}

/// Self-interaction adjoint double layer of a discretized curve. The result
/// does not depend on the placement scale.
pub fn adjoint_double_layer_self(b: &Boundary) -> DMatrix<f64> {
    let m = b.len();
    let w = 2.0 * PI / m as f64;
    let reference: Vec<Point> = b.params.iter().map(|&t| b.curve.point(t)).collect();
    let rows: Vec<Vec<f64>> = (0..m)
        .into_par_iter()
        .map(|i| {
            (0..m)
                .map(|k| {
                    let kernel = if i == k {
                        b.curvatures[i] * INV_4PI
                    } else {
                        grad_s2(reference[i] - reference[k]).dot(&b.normals[i])
                    };
                    kernel * b.speeds[k] * w
                })
                .collect()
        })
        .collect();
    DMatrix::from_fn(m, m, |i, k| rows[i][k])
}

fn check_floor(d: Point) -> Result<()> {
    let r = d.norm();
    if r > SINGULAR_FLOOR {
        Ok(())
    } else {
        Err(Error::SingularEvaluation(r))
    }
}

fn kernel_matrix(
    rows: usize,
    cols: usize,
    entry: impl Fn(usize, usize) -> Result<f64> + Sync,
) -> Result<DMatrix<f64>> {
    let data: Result<Vec<Vec<f64>>> = (0..rows)
        .into_par_iter()
        .map(|i| (0..cols).map(|k| entry(i, k)).collect())
        .collect();
    let data = data?;
    Ok(DMatrix::from_fn(rows, cols, |i, k| data[i][k]))
}

/// Value or gradient of a layer potential at an off-curve target.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PotentialValue {
    Value(f64),
    Gradient(Point),
}

/// Plain trapezoid evaluation of the single layer of `density` on
/// `offset + scale * curve`, in the physical measure `|scale| |y'| ds`.
/// Targets inside the guard band of the mapped curve are refused.
pub fn eval_layer_potential(
    curve: &ParametrizedCurve,
    placement: Placement,
    density: &[f64],
    rule: &PeriodicRule,
    targets: &[Point],
    order: u8,
) -> Result<Vec<PotentialValue>> {
    if density.len() != rule.len() {
        return Err(Error::LengthMismatch {
            expected: rule.len(),
            got: density.len(),
        });
    }
    if order > 1 {
        return Err(Error::InvalidParameter(format!("potential order {order} not in 0..=1")));
    }
    let mut source = Boundary::new(curve, placement, rule);
    for w in source.measure.iter_mut() {
        *w = w.abs();
    }
    let band = source.guard_band();
    targets
        .iter()
        .map(|&x| {
            if source.classify(x, band) == PointLocation::NearBoundary {
                return Err(Error::GuardBand {
                    x: x.x,
                    y: x.y,
                    distance: distance_to_nodes(&source, x),
                    band,
                });
            }
            Ok(if order == 0 {
                PotentialValue::Value(layer_value(&source, density, x))
            } else {
                PotentialValue::Gradient(layer_gradient(&source, density, x))
            })
        })
        .collect()
}

pub(crate) fn distance_to_nodes(b: &Boundary, x: Point) -> f64 {
    b.points.iter().map(|p| (p - x).norm()).fold(f64::INFINITY, f64::min)
}

/// `sum_k S_2(x - y_k) mu_k measure_k`, no guard check.
pub fn layer_value(source: &Boundary, density: &[f64], x: Point) -> f64 {
    source
        .points
        .iter()
        .zip(&source.measure)
        .zip(density)
        .map(|((y, w), mu)| s2(x - y) * w * mu)
        .sum()
}

/// Gradient in `x` of [`layer_value`].
pub fn layer_gradient(source: &Boundary, density: &[f64], x: Point) -> Point {
    source
        .points
        .iter()
        .zip(&source.measure)
        .zip(density)
        .fold(Point::zeros(), |acc, ((y, w), mu)| acc + grad_s2(x - y) * (w * mu))
}

/// `integral of d_h d_k S_2(y) mu(y) d sigma_y` over a curve avoiding 0.
pub fn hessian_moment(source: &Boundary, density: &[f64]) -> Matrix2<f64> {
    source
        .points
        .iter()
        .zip(&source.measure)
        .zip(density)
        .fold(Matrix2::zeros(), |acc, ((y, w), mu)| acc + hessian_s2(*y) * (w * mu))
}
