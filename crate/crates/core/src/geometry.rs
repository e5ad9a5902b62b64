//! Analytic closed planar curves, affine placements of them, point
//! classification, and the geometric hypotheses on a two-hole configuration.
//!
//! Every curve is stored as a truncated Fourier series
//! `x(t) = sum_k a_k cos(kt) + b_k sin(kt)`, so position, first and second
//! derivatives are exact at any parameter value. Circles and ellipses are
//! degree-one instances that keep their own kind tag for reporting.

use std::f64::consts::PI;
use std::fmt;

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::data::DataFunction;
use crate::error::{Error, Result};

pub type Point = Vector2<f64>;

/// Samples used when checking speed positivity on a new curve.
const SPEED_SAMPLES: usize = 4096;
/// Nodes used for the discrete simplicity test and for polygon-based
/// classification.
const POLYGON_NODES: usize = 1024;
/// Node spacings making up the default guard band.
pub const GUARD_BAND_SPACINGS: f64 = 5.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveKind {
    Circle,
    Ellipse,
    Trigonometric,
}

/// Serialized form of a curve, as it appears in configuration files.
///
/// For the trigonometric kind, `x_cos[k]`/`y_cos[k]` multiply `cos(k t)`
/// starting at `k = 0`, while `x_sin[k]`/`y_sin[k]` multiply `sin((k+1) t)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CurveSpec {
    Circle {
        center: [f64; 2],
        radius: f64,
    },
    Ellipse {
        center: [f64; 2],
        semi_axes: [f64; 2],
    },
    Trigonometric {
        x_cos: Vec<f64>,
        #[serde(default)]
        x_sin: Vec<f64>,
        #[serde(default)]
        y_cos: Vec<f64>,
        #[serde(default)]
        y_sin: Vec<f64>,
    },
}

/// A smooth, simple, counterclockwise closed curve `t -> x(t)`, `t in [0, 2pi)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CurveSpec", into = "CurveSpec")]
pub struct ParametrizedCurve {
    kind: CurveKind,
    spec: CurveSpec,
    cos_coeffs: Vec<Point>,
    sin_coeffs: Vec<Point>,
}

impl TryFrom<CurveSpec> for ParametrizedCurve {
    type Error = Error;

    fn try_from(spec: CurveSpec) -> Result<Self> {
        match spec {
            CurveSpec::Circle { center, radius } => make_circle(center.into(), radius),
            CurveSpec::Ellipse { center, semi_axes } => {
                make_ellipse(center.into(), semi_axes[0], semi_axes[1])
            }
            CurveSpec::Trigonometric {
                x_cos,
                x_sin,
                y_cos,
                y_sin,
            } => make_trig_curve(&FourierCoeffs {
                x_cos,
                x_sin,
                y_cos,
                y_sin,
            }),
        }
    }
}

impl From<ParametrizedCurve> for CurveSpec {
    fn from(curve: ParametrizedCurve) -> Self {
        curve.spec
    }
}

/// Fourier coefficients of a trigonometric curve (see [`CurveSpec`] for the
/// index convention).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FourierCoeffs {
    pub x_cos: Vec<f64>,
    pub x_sin: Vec<f64>,
    pub y_cos: Vec<f64>,
    pub y_sin: Vec<f64>,
}

impl FourierCoeffs {
    pub fn ellipse(center: Point, a: f64, b: f64) -> Self {
        Self {
            x_cos: vec![center.x, a],
            x_sin: vec![0.0],
            y_cos: vec![center.y, 0.0],
            y_sin: vec![b],
        }
    }
}

pub fn make_circle(center: Point, radius: f64) -> Result<ParametrizedCurve> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::InvalidCurve(format!(
            "circle radius must be positive, got {radius}"
        )));
    }
    let mut curve = build_curve(&FourierCoeffs::ellipse(center, radius, radius))?;
    curve.kind = CurveKind::Circle;
    curve.spec = CurveSpec::Circle {
        center: [center.x, center.y],
        radius,
    };
    Ok(curve)
}

pub fn make_ellipse(center: Point, a: f64, b: f64) -> Result<ParametrizedCurve> {
    if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
        return Err(Error::InvalidCurve(format!(
            "ellipse semi-axes must be positive, got ({a}, {b})"
        )));
    }
    let mut curve = build_curve(&FourierCoeffs::ellipse(center, a, b))?;
    curve.kind = CurveKind::Ellipse;
    curve.spec = CurveSpec::Ellipse {
        center: [center.x, center.y],
        semi_axes: [a, b],
    };
    Ok(curve)
}

pub fn make_trig_curve(coeffs: &FourierCoeffs) -> Result<ParametrizedCurve> {
    build_curve(coeffs)
}

fn build_curve(coeffs: &FourierCoeffs) -> Result<ParametrizedCurve> {
    let n_cos = coeffs.x_cos.len().max(coeffs.y_cos.len()).max(1);
    let n_sin = coeffs.x_sin.len().max(coeffs.y_sin.len());
    let degree = n_cos.max(n_sin + 1);
    let get = |v: &Vec<f64>, k: usize| v.get(k).copied().unwrap_or(0.0);

    let mut cos_coeffs = vec![Point::zeros(); degree];
    let mut sin_coeffs = vec![Point::zeros(); degree];
    for k in 0..degree {
        cos_coeffs[k] = Point::new(get(&coeffs.x_cos, k), get(&coeffs.y_cos, k));
        if k >= 1 {
            sin_coeffs[k] = Point::new(get(&coeffs.x_sin, k - 1), get(&coeffs.y_sin, k - 1));
        }
    }
    if cos_coeffs
        .iter()
        .chain(sin_coeffs.iter())
        .any(|c| !c.x.is_finite() || !c.y.is_finite())
    {
        return Err(Error::InvalidCurve("non-finite coefficient".into()));
    }

    let curve = ParametrizedCurve {
        kind: CurveKind::Trigonometric,
        spec: CurveSpec::Trigonometric {
            x_cos: coeffs.x_cos.clone(),
            x_sin: coeffs.x_sin.clone(),
            y_cos: coeffs.y_cos.clone(),
            y_sin: coeffs.y_sin.clone(),
        },
        cos_coeffs,
        sin_coeffs,
    };
    curve.check_regular()?;
    Ok(curve)
}

impl ParametrizedCurve {
    pub fn kind(&self) -> CurveKind {
        self.kind
    }

    pub fn spec(&self) -> &CurveSpec {
        &self.spec
    }

    pub fn point(&self, t: f64) -> Point {
        let mut p = Point::zeros();
        for (k, (a, b)) in self.cos_coeffs.iter().zip(&self.sin_coeffs).enumerate() {
            let (s, c) = (k as f64 * t).sin_cos();
            p += a * c + b * s;
        }
        p
    }

    pub fn derivative(&self, t: f64) -> Point {
        let mut p = Point::zeros();
        for (k, (a, b)) in self.cos_coeffs.iter().zip(&self.sin_coeffs).enumerate().skip(1) {
            let kf = k as f64;
            let (s, c) = (kf * t).sin_cos();
            p += (b * c - a * s) * kf;
        }
        p
    }

    pub fn second_derivative(&self, t: f64) -> Point {
        let mut p = Point::zeros();
        for (k, (a, b)) in self.cos_coeffs.iter().zip(&self.sin_coeffs).enumerate().skip(1) {
            let kf = k as f64;
            let (s, c) = (kf * t).sin_cos();
            p -= (a * c + b * s) * (kf * kf);
        }
        p
    }

    pub fn speed(&self, t: f64) -> f64 {
        self.derivative(t).norm()
    }

    /// Outward unit normal for a counterclockwise curve.
    pub fn normal(&self, t: f64) -> Point {
        let d = self.derivative(t);
        Point::new(d.y, -d.x) / d.norm()
    }

    pub fn curvature(&self, t: f64) -> f64 {
        let d = self.derivative(t);
        let dd = self.second_derivative(t);
        (d.x * dd.y - d.y * dd.x) / d.norm().powi(3)
    }

    /// Highest Fourier mode present in the parametrization.
    pub fn degree(&self) -> usize {
        self.cos_coeffs.len() - 1
    }

    /// Shoelace area `(1/2) * integral of (x1 x2' - x2 x1') dt`; positive for
    /// counterclockwise curves. Exact for trigonometric curves.
    pub fn signed_area(&self) -> f64 {
        let n = (4 * self.degree() + 8).max(64);
        let h = 2.0 * PI / n as f64;
        (0..n)
            .map(|k| {
                let t = k as f64 * h;
                let (p, d) = (self.point(t), self.derivative(t));
                0.5 * (p.x * d.y - p.y * d.x)
            })
            .sum::<f64>()
            * h
    }

    pub fn length(&self) -> f64 {
        let n = SPEED_SAMPLES;
        let h = 2.0 * PI / n as f64;
        (0..n).map(|k| self.speed(k as f64 * h)).sum::<f64>() * h
    }

    pub fn max_speed(&self) -> f64 {
        let n = 256.max(8 * self.degree());
        let h = 2.0 * PI / n as f64;
        (0..n).map(|k| self.speed(k as f64 * h)).fold(0.0, f64::max)
    }

    /// Width of the refusal band around the curve for an `m`-node rule:
    /// five node spacings measured in arc length.
    pub fn guard_band(&self, m: usize) -> f64 {
        GUARD_BAND_SPACINGS * self.max_speed() * 2.0 * PI / m as f64
    }

    /// Node positions of the curve under `placement` at `n` equispaced parameters.
    pub fn polygon(&self, placement: Placement, n: usize) -> Vec<Point> {
        (0..n)
            .map(|k| placement.apply(self.point(2.0 * PI * k as f64 / n as f64)))
            .collect()
    }

    fn check_regular(&self) -> Result<()> {
        let n = SPEED_SAMPLES;
        let h = 2.0 * PI / n as f64;
        let speeds: Vec<f64> = (0..n).map(|k| self.speed(k as f64 * h)).collect();
        let max = speeds.iter().cloned().fold(0.0, f64::max);
        let min = speeds.iter().cloned().fold(f64::INFINITY, f64::min);
        if !(max > 0.0) || min <= 1e-10 * max {
            return Err(Error::InvalidCurve(format!(
                "speed vanishes at a sample node (min {min:e}, max {max:e})"
            )));
        }
        let area = self.signed_area();
        if area <= 0.0 {
            return Err(Error::InvalidCurve(format!(
                "curve must be counterclockwise (signed area {area:e})"
            )));
        }
        let nodes = self.polygon(Placement::IDENTITY, POLYGON_NODES);
        if !polygon_is_simple(&nodes) {
            return Err(Error::InvalidCurve("self-intersection detected at nodes".into()));
        }
        Ok(())
    }

    /// Distance from `x` to the curve: coarse search over a polygon, then a
    /// few Newton steps on `|x(t) - x|^2`.
    pub fn distance_to(&self, x: Point) -> f64 {
        let n = POLYGON_NODES;
        let h = 2.0 * PI / n as f64;
        let (mut best_t, mut best_d) = (0.0, f64::INFINITY);
        for k in 0..n {
            let t = k as f64 * h;
            let d = (self.point(t) - x).norm_squared();
            if d < best_d {
                best_d = d;
                best_t = t;
            }
        }
        let mut t = best_t;
        for _ in 0..8 {
            let r = self.point(t) - x;
            let d1 = self.derivative(t);
            let d2 = self.second_derivative(t);
            let g = r.dot(&d1);
            let hess = d1.norm_squared() + r.dot(&d2);
            if hess <= 0.0 {
                break;
            }
            let step = (g / hess).clamp(-h, h);
            t -= step;
            if step.abs() < 1e-15 {
                break;
            }
        }
        let refined = (self.point(t) - x).norm();
        refined.min(best_d.sqrt())
    }

    /// Classifies `x` against the curve; points closer than `band` to it are
    /// reported as [`PointLocation::NearBoundary`].
    pub fn contains_point(&self, x: Point, band: f64) -> PointLocation {
        let dist = self.distance_to(x);
        if dist <= band.max(0.0) || dist == 0.0 {
            return PointLocation::NearBoundary;
        }
        let nodes = self.polygon(Placement::IDENTITY, POLYGON_NODES);
        if winding_number(&nodes, x).abs() > 0.5 {
            PointLocation::Inside
        } else {
            PointLocation::Outside
        }
    }

    /// Classification of `x` against the placed copy `offset + scale * curve`.
    pub fn contains_point_placed(&self, placement: Placement, x: Point, band: f64) -> PointLocation {
        if placement.scale == 0.0 {
            return if (x - placement.offset).norm() <= band.max(0.0) {
                PointLocation::NearBoundary
            } else {
                PointLocation::Outside
            };
        }
        let local = placement.invert(x);
        self.contains_point(local, band / placement.scale.abs())
    }
}

/// Free-function form of [`ParametrizedCurve::contains_point`].
pub fn contains_point(curve: &ParametrizedCurve, x: Point, band: f64) -> PointLocation {
    curve.contains_point(x, band)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PointLocation {
    Inside,
    Outside,
    NearBoundary,
}

/// Affine map `x -> offset + scale * x`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Placement {
    pub offset: Point,
    pub scale: f64,
}

impl Placement {
    pub const IDENTITY: Placement = Placement {
        offset: Point::new(0.0, 0.0),
        scale: 1.0,
    };

    pub fn new(offset: Point, scale: f64) -> Self {
        Self { offset, scale }
    }

    pub fn apply(&self, x: Point) -> Point {
        self.offset + x * self.scale
    }

    pub fn invert(&self, x: Point) -> Point {
        (x - self.offset) / self.scale
    }
}

fn winding_number(nodes: &[Point], x: Point) -> f64 {
    let n = nodes.len();
    let mut total = 0.0;
    for i in 0..n {
        let a = nodes[i] - x;
        let b = nodes[(i + 1) % n] - x;
        total += (a.x * b.y - a.y * b.x).atan2(a.dot(&b));
    }
    total / (2.0 * PI)
}

fn segments_cross(p1: Point, p2: Point, q1: Point, q2: Point) -> bool {
    let orient = |a: Point, b: Point, c: Point| {
        let v = (b - a).perp(&(c - a));
        if v > 0.0 {
            1
        } else if v < 0.0 {
            -1
        } else {
            0
        }
    };
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    d1 * d2 < 0 && d3 * d4 < 0
}

/// Node-level simplicity: non-adjacent nodes keep a minimum separation and
/// no two non-adjacent polygon edges cross.
fn polygon_is_simple(nodes: &[Point]) -> bool {
    let n = nodes.len();
    let min_chord = (0..n)
        .map(|i| (nodes[(i + 1) % n] - nodes[i]).norm())
        .fold(f64::INFINITY, f64::min);
    let floor = 0.5 * min_chord;
    for i in 0..n {
        for j in (i + 2)..n {
            if i == 0 && j == n - 1 {
                continue;
            }
            if (nodes[i] - nodes[j]).norm() < floor {
                return false;
            }
            if segments_cross(nodes[i], nodes[(i + 1) % n], nodes[j], nodes[(j + 1) % n]) {
                return false;
            }
        }
    }
    true
}

/// Minimum distance between the node sets of two placed curves.
pub fn node_gap(
    a: &ParametrizedCurve,
    pa: Placement,
    b: &ParametrizedCurve,
    pb: Placement,
    n: usize,
) -> f64 {
    let na = a.polygon(pa, n);
    let nb = b.polygon(pb, n);
    let mut best = f64::INFINITY;
    for p in &na {
        for q in &nb {
            best = best.min((p - q).norm());
        }
    }
    best
}

/// True when the closures of the two placed domains are disjoint. A zero
/// scale collapses a domain to its offset point.
pub fn closures_disjoint(
    a: &ParametrizedCurve,
    pa: Placement,
    b: &ParametrizedCurve,
    pb: Placement,
) -> bool {
    match (pa.scale == 0.0, pb.scale == 0.0) {
        (true, true) => pa.offset != pb.offset,
        (true, false) => b.contains_point_placed(pb, pa.offset, 0.0) == PointLocation::Outside,
        (false, true) => a.contains_point_placed(pa, pb.offset, 0.0) == PointLocation::Outside,
        (false, false) => {
            let n = 256;
            let na = a.polygon(pa, n);
            let nb = b.polygon(pb, n);
            if na
                .iter()
                .any(|&p| b.contains_point_placed(pb, p, 0.0) != PointLocation::Outside)
            {
                return false;
            }
            if nb
                .iter()
                .any(|&q| a.contains_point_placed(pa, q, 0.0) != PointLocation::Outside)
            {
                return false;
            }
            for i in 0..n {
                for j in 0..n {
                    if segments_cross(na[i], na[(i + 1) % n], nb[j], nb[(j + 1) % n]) {
                        return false;
                    }
                }
            }
            true
        }
    }
}

/// Closure of the placed domain lies in the open interior of `outer`.
pub fn closure_inside(
    inner: &ParametrizedCurve,
    placement: Placement,
    outer: &ParametrizedCurve,
) -> bool {
    if placement.scale == 0.0 {
        return outer.contains_point(placement.offset, 0.0) == PointLocation::Inside;
    }
    inner
        .polygon(placement, 256)
        .into_iter()
        .all(|p| outer.contains_point(p, 0.0) == PointLocation::Inside)
}

/// Full problem description: three reference curves, hole centers, the
/// limiting ratio `r_star`, the boundary data and the per-curve node count.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProblemConfig {
    pub outer: ParametrizedCurve,
    pub hole1: ParametrizedCurve,
    pub hole2: ParametrizedCurve,
    pub p1: [f64; 2],
    pub p2: [f64; 2],
    pub r_star: f64,
    pub f1: DataFunction,
    pub f2: DataFunction,
    pub g: DataFunction,
    #[serde(rename = "M")]
    pub nodes: usize,
}

impl ProblemConfig {
    pub fn p(&self, j: usize) -> Point {
        match j {
            1 => Point::from(self.p1),
            2 => Point::from(self.p2),
            _ => panic!("hole index must be 1 or 2, got {j}"),
        }
    }

    pub fn hole(&self, j: usize) -> &ParametrizedCurve {
        match j {
            1 => &self.hole1,
            2 => &self.hole2,
            _ => panic!("hole index must be 1 or 2, got {j}"),
        }
    }

    pub fn neumann_data(&self, j: usize) -> &DataFunction {
        match j {
            1 => &self.f1,
            2 => &self.f2,
            _ => panic!("hole index must be 1 or 2, got {j}"),
        }
    }

    /// Shipped default: unit-disc outer domain, unit-disc and (1, 0.6)
    /// ellipse holes at generic centers, `g = x1^2 - x2^2 + 1`, `f1 = 1`,
    /// `f2 = cos(t)`, `M = 128`.
    pub fn default_two_holes() -> Self {
        let origin = Point::zeros();
        Self {
            outer: make_circle(origin, 1.0).expect("unit circle"),
            hole1: make_circle(origin, 1.0).expect("unit circle"),
            hole2: make_ellipse(origin, 1.0, 0.6).expect("ellipse"),
            p1: [-0.3, 0.0],
            p2: [0.4, 0.1],
            r_star: 0.0,
            f1: DataFunction::Constant { value: 1.0 },
            f2: DataFunction::fourier(0.0, &[(1, 1.0, 0.0)]),
            g: DataFunction::HarmonicPolynomial {
                constant: 1.0,
                terms: vec![crate::data::HarmonicTerm {
                    degree: 2,
                    re: 1.0,
                    im: 0.0,
                }],
                trace: crate::data::Trace::Value,
            },
            nodes: 128,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let config: ProblemConfig = serde_json::from_str(text)?;
        config.check()?;
        Ok(config)
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn with_nodes(mut self, nodes: usize) -> Self {
        self.nodes = nodes;
        self
    }

    /// Structural invariants: node count, `0` inside all three domains,
    /// distinct centers inside the outer domain, and disjoint holes at
    /// scale `r_star`.
    pub fn check(&self) -> Result<()> {
        if self.nodes < 8 || self.nodes % 2 != 0 {
            return Err(Error::Config(format!(
                "node count must be even and at least 8, got {}",
                self.nodes
            )));
        }
        let origin = Point::zeros();
        for (name, curve) in [("outer", &self.outer), ("hole1", &self.hole1), ("hole2", &self.hole2)] {
            if curve.contains_point(origin, 0.0) != PointLocation::Inside {
                return Err(Error::Config(format!("0 must lie inside {name}")));
            }
        }
        if self.p1 == self.p2 {
            return Err(Error::Config("p1 and p2 must differ".into()));
        }
        for j in 1..=2 {
            if self.outer.contains_point(self.p(j), 0.0) != PointLocation::Inside {
                return Err(Error::Config(format!("p{j} must lie inside the outer domain")));
            }
        }
        if !(self.r_star >= 0.0 && self.r_star.is_finite()) {
            return Err(Error::Config(format!("r_star must be nonnegative, got {}", self.r_star)));
        }
        if !closures_disjoint(
            &self.hole1,
            Placement::new(self.p(1), self.r_star),
            &self.hole2,
            Placement::new(self.p(2), self.r_star),
        ) {
            return Err(Error::Config("holes overlap at scale r_star".into()));
        }
        Ok(())
    }
}

/// Which of the admissibility conditions on `(rho1, rho2)` fail.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConfigViolation {
    /// `p1 + rho2 cl(hole1)` meets `p2 + rho2 cl(hole2)`.
    pub holes_overlap: bool,
    /// `rho1 p_j + rho1 rho2 cl(hole_j)` is not inside the outer domain.
    pub hole_outside: [bool; 2],
    pub negative_parameter: bool,
}

impl ConfigViolation {
    pub fn any(&self) -> bool {
        self.holes_overlap || self.hole_outside.iter().any(|&b| b) || self.negative_parameter
    }
}

impl fmt::Display for ConfigViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        if self.negative_parameter {
            parts.push("negative parameter".to_string());
        }
        if self.holes_overlap {
            parts.push("(a) rescaled holes overlap".to_string());
        }
        for (j, &bad) in self.hole_outside.iter().enumerate() {
            if bad {
                parts.push(format!("(b) hole {} not contained in the outer domain", j + 1));
            }
        }
        write!(f, "{}", parts.join("; "))
    }
}

/// Checks the two admissibility conditions for `(rho1, rho2)`; reports
/// every failing condition instead of stopping at the first.
pub fn validate_configuration(
    config: &ProblemConfig,
    rho1: f64,
    rho2: f64,
) -> std::result::Result<(), ConfigViolation> {
    let mut violation = ConfigViolation {
        negative_parameter: rho1 < 0.0 || rho2 < 0.0,
        ..Default::default()
    };
    violation.holes_overlap = !closures_disjoint(
        &config.hole1,
        Placement::new(config.p(1), rho2),
        &config.hole2,
        Placement::new(config.p(2), rho2),
    );
    if rho1 != 0.0 {
        for j in 1..=2 {
            let placement = Placement::new(config.p(j) * rho1, rho1 * rho2);
            violation.hole_outside[j - 1] = !closure_inside(config.hole(j), placement, &config.outer);
        }
    }
    if violation.any() {
        Err(violation)
    } else {
        Ok(())
    }
}
