//! Invariant checks run by `validate`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::{make_circle, make_ellipse, make_trig_curve, FourierCoeffs, ParametrizedCurve, Placement, Point};
use crate::mixed_solver::{solve_mixed, InnerComponent};
use crate::potentials::{adjoint_double_layer_self, assemble_single_layer_self, grad_s2, Boundary};
use crate::quadrature::trapezoid_rule;
use crate::representation::{build_field, HarmonicField};
use crate::rescaled::{solve_densities, solve_with_data, PreparedConfig};

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub lower: f64,
    pub upper: f64,
    pub pass: bool,
    pub note: String,
}

impl Check {
    pub fn within(name: impl Into<String>, value: f64, lower: f64, upper: f64) -> Self {
        Self {
            name: name.into(),
            value,
            lower,
            upper,
            // NaN fails both comparisons
            pass: value >= lower && value <= upper,
            note: String::new(),
        }
    }

    pub fn at_most(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self::within(name, value, f64::NEG_INFINITY, tolerance)
    }

    pub fn at_least(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self::within(name, value, bound, f64::INFINITY)
    }

    pub fn errored(name: impl Into<String>, err: &Error) -> Self {
        Self {
            note: err.to_string(),
            ..Self::at_most(name, f64::NAN, 0.0)
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = note.into();
        self
    }
}

/// Runs `f`, turning an error into one failed check called `name`.
pub fn guarded(name: &str, f: impl FnOnce() -> Result<Vec<Check>>) -> Vec<Check> {
    f().unwrap_or_else(|e| vec![Check::errored(name, &e)])
}

fn max_abs(it: impl IntoIterator<Item = f64>) -> f64 {
    it.into_iter().fold(0.0, |m, v| if v.is_nan() { f64::NAN } else { m.max(v.abs()) })
}

pub fn kite() -> ParametrizedCurve {
    make_trig_curve(&FourierCoeffs {
        x_cos: vec![-0.35, 1.0, 0.35],
        y_sin: vec![0.7],
        ..Default::default()
    })
    .expect("kite")
}

pub fn test_curves() -> Vec<(&'static str, ParametrizedCurve)> {
    vec![
        ("circle", make_circle(Point::zeros(), 1.0).expect("circle")),
        ("ellipse", make_ellipse(Point::zeros(), 1.0, 0.6).expect("ellipse")),
        ("kite", kite()),
    ]
}

/// `integral of d/dnu_y S(y - x)` is 1 inside and 0 outside.
pub fn gauss_identity(m: usize) -> Result<Vec<Check>> {
    let rule = trapezoid_rule(m)?;
    let inside = [Point::new(0.05, 0.1), Point::new(-0.3, 0.2), Point::new(0.4, -0.15)];
    let outside = [Point::new(2.5, -0.4), Point::new(0.0, 1.5), Point::new(-1.8, -1.1)];
    Ok(test_curves()
        .into_iter()
        .map(|(name, c)| {
            let b = Boundary::reference(&c, &rule);
            let flux = |x: &Point| -> f64 {
                (0..m)
                    .map(|k| -grad_s2(x - b.points[k]).dot(&b.normals[k]) * b.measure[k])
                    .sum()
            };
            let err = max_abs(
                inside
                    .iter()
                    .map(|x| flux(x) - 1.0)
                    .chain(outside.iter().map(flux)),
            );
            Check::at_most(format!("gauss_{name}"), err, 1e-10)
        })
        .collect())
}

/// `K*[1] = 1/2` pointwise on the circle, and its transpose (the double
/// layer of the constant) pointwise on every curve.
pub fn adjoint_double_layer_half(m: usize) -> Result<Vec<Check>> {
    let rule = trapezoid_rule(m)?;
    let mut out = Vec::new();
    for (name, c) in test_curves() {
        let b = Boundary::reference(&c, &rule);
        let k = adjoint_double_layer_self(&b);
        if name == "circle" {
            let row = &k * DVector::from_element(m, 1.0);
            out.push(Check::at_most("kstar_one_circle", max_abs(row.iter().map(|v| v - 0.5)), 1e-10));
        }
        let w = DVector::from_column_slice(&b.measure);
        let col = k.tr_mul(&w);
        let err = max_abs((0..m).map(|i| col[i] / b.measure[i] - 0.5));
        out.push(Check::at_most(format!("kstar_transpose_one_{name}"), err, 1e-10));
    }
    Ok(out)
}

/// `V[1] = R log R` on circles of radius `R`.
pub fn single_layer_circles(m: usize) -> Result<Vec<Check>> {
    let rule = trapezoid_rule(m)?;
    [0.25, 0.5, 1.0, 2.0]
        .iter()
        .map(|&r| {
            let v = assemble_single_layer_self(&make_circle(Point::zeros(), r)?, &rule);
            let got = &v * DVector::from_element(m, 1.0);
            let err = max_abs(got.iter().map(|x| x - r * r.ln()));
            Ok(Check::at_most(format!("single_layer_circle_r{r}"), err, 1e-12))
        })
        .collect()
}

/// `log|x|` on the annulus `1/4 < |x| < 1`.
pub fn annulus(m: usize) -> Result<Vec<Check>> {
    let rule = trapezoid_rule(m)?;
    let unit = make_circle(Point::zeros(), 1.0)?;
    let inner = [InnerComponent::new(unit.clone(), Placement::new(Point::zeros(), 0.25))];
    let sol = solve_mixed(&inner, &unit, &[vec![4.0; m]], &vec![0.0; m], &rule)?;
    let field = sol.field();
    let targets: Vec<Point> = [(0.35, 0.3), (0.45, 0.0), (0.55, -1.0), (0.65, 2.0), (0.72, 4.0)]
        .iter()
        .map(|&(r, a): &(f64, f64)| Point::new(r * a.cos(), r * a.sin()))
        .collect();
    let vals = field.eval_many(&targets)?;
    let err = max_abs(targets.iter().zip(&vals).map(|(x, v)| v - x.norm().ln()));
    Ok(vec![Check::at_most("annulus_log", err, 1e-10)])
}

/// Up to `n` reproducible targets accepted by every field.
pub fn random_targets(fields: &[&HarmonicField], bounds: (Point, Point), n: usize, seed: u64) -> Vec<Point> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = bounds;
    let mut out = Vec::with_capacity(n);
    for _ in 0..100 * n {
        if out.len() == n {
            break;
        }
        let x = Point::new(rng.gen_range(lo.x..hi.x), rng.gen_range(lo.y..hi.y));
        if fields.iter().all(|f| f.check_target(x).is_ok()) {
            out.push(x);
        }
    }
    out
}

fn bounding_box(points: &[Point]) -> (Point, Point) {
    let mut lo = Point::new(f64::INFINITY, f64::INFINITY);
    let mut hi = -lo;
    for p in points {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    (lo, hi)
}

/// Two holes inside an ellipse, for manufactured solutions.
fn manufactured_geometry() -> Result<(Vec<InnerComponent>, ParametrizedCurve)> {
    Ok((
        vec![
            InnerComponent::new(make_circle(Point::zeros(), 1.0)?, Placement::new(Point::new(-0.4, 0.1), 0.2)),
            InnerComponent::new(make_ellipse(Point::zeros(), 1.0, 0.6)?, Placement::new(Point::new(0.35, -0.2), 0.25)),
        ],
        make_ellipse(Point::zeros(), 1.2, 1.0)?,
    ))
}

/// Solves with the Neumann trace of `u` on the holes and its Dirichlet
/// trace outside, and compares with `u` at 20 random interior targets.
fn manufactured_case(
    name: &str,
    m: usize,
    u: impl Fn(Point) -> f64,
    grad: impl Fn(Point) -> Point,
) -> Result<Check> {
    let rule = trapezoid_rule(m)?;
    let (inner, outer) = manufactured_geometry()?;
    let phi: Vec<Vec<f64>> = inner
        .iter()
        .map(|c| {
            let b = Boundary::new(&c.curve, c.placement, &rule);
            b.points.iter().zip(&b.normals).map(|(p, n)| grad(*p).dot(n)).collect()
        })
        .collect();
    let gamma: Vec<f64> = rule.nodes().iter().map(|&t| u(outer.point(t))).collect();
    let sol = solve_mixed(&inner, &outer, &phi, &gamma, &rule)?;
    let field = sol.field();
    let targets = random_targets(&[&field], bounding_box(&sol.outer.points), 20, 20);
    if targets.len() < 20 {
        return Err(Error::Invariant(format!("only {} targets found", targets.len())));
    }
    let vals = field.eval_many(&targets)?;
    let err = max_abs(targets.iter().zip(&vals).map(|(x, v)| v - u(*x)));
    Ok(Check::at_most(name, err, 1e-9).with_note(format!("condition {:.3e}", sol.condition)))
}

pub fn manufactured(m: usize) -> Vec<Check> {
    let q = Point::new(1.9, 0.7);
    vec![
        manufactured_case(
            "manufactured_polynomial",
            m,
            |x| x.x * x.x - x.y * x.y + 0.5 * x.x * x.y + 0.3 * (x.x.powi(3) - 3.0 * x.x * x.y * x.y) + 0.2,
            |x| {
                Point::new(
                    2.0 * x.x + 0.5 * x.y + 0.9 * (x.x * x.x - x.y * x.y),
                    -2.0 * x.y + 0.5 * x.x - 1.8 * x.x * x.y,
                )
            },
        )
        .unwrap_or_else(|e| Check::errored("manufactured_polynomial", &e)),
        manufactured_case(
            "manufactured_point_source",
            m,
            |x| (x - q).norm().ln(),
            |x| (x - q) / (x - q).norm_squared(),
        )
        .unwrap_or_else(|e| Check::errored("manufactured_point_source", &e)),
    ]
}

/// Zero data gives the zero solution, for the physical and the rescaled systems.
pub fn uniqueness(prep: &PreparedConfig, pairs: &[(f64, f64)]) -> Result<Vec<Check>> {
    let m = prep.m();
    let rule = trapezoid_rule(m)?;
    let (inner, outer) = manufactured_geometry()?;
    let sol = solve_mixed(&inner, &outer, &[vec![0.0; m], vec![0.0; m]], &vec![0.0; m], &rule)?;
    let mut out = vec![Check::at_most("uniqueness_mixed", sol.unknowns.amax(), 1e-12)];
    for &(r1, r2) in pairs {
        let (x, _) = solve_with_data(prep, r1, r2, &DMatrix::zeros(3 * m + 1, 1))?;
        out.push(Check::at_most(format!("uniqueness_rescaled_{r1}_{r2}"), x.amax(), 1e-12));
    }
    Ok(out)
}

/// `|integral theta_j - integral f_j|` and the mean of `theta_o` at every pair.
pub fn flux_identity(prep: &PreparedConfig, pairs: &[(f64, f64)]) -> Vec<Check> {
    let mut out = Vec::new();
    for &(r1, r2) in pairs {
        let name = format!("flux_{r1}_{r2}");
        match solve_densities(prep, r1, r2) {
            Ok(q) => {
                for j in 0..2 {
                    out.push(Check::at_most(format!("{name}_hole{}", j + 1), q.flux_defect[j].abs(), 1e-10));
                }
                let mean = prep.outer.integrate(&q.theta_o.values);
                out.push(Check::at_most(format!("zero_mean_theta_o_{r1}_{r2}"), mean.abs(), 1e-10));
            }
            Err(e) => out.push(Check::errored(name, &e)),
        }
    }
    out
}

/// The rescaled densities carried to the physical holes against a direct
/// solve of the physical problem, compared at 10 shared targets.
pub fn equivalence(prep: &PreparedConfig, pairs: &[(f64, f64)]) -> Vec<Check> {
    pairs
        .iter()
        .map(|&(r1, r2)| {
            let name = format!("equivalence_{r1}_{r2}");
            let run = || -> Result<Check> {
                let q = solve_densities(prep, r1, r2)?;
                let rescaled = build_field(prep, r1, r2, &q)?;
                let cfg = &prep.config;
                let inner = [
                    InnerComponent::new(cfg.hole1.clone(), prep.physical_placement(1, r1, r2)),
                    InnerComponent::new(cfg.hole2.clone(), prep.physical_placement(2, r1, r2)),
                ];
                let phi = [prep.f[0].clone(), prep.f[1].clone()];
                let direct = solve_mixed(&inner, &cfg.outer, &phi, &prep.g, &prep.rule)?.field();
                let targets = random_targets(&[&rescaled, &direct], bounding_box(&prep.outer.points), 10, 10);
                if targets.len() < 10 {
                    return Err(Error::Invariant(format!("only {} targets found", targets.len())));
                }
                let a = rescaled.eval_many(&targets)?;
                let b = direct.eval_many(&targets)?;
                Ok(Check::at_most(&name, max_abs(a.iter().zip(&b).map(|(x, y)| x - y)), 1e-9))
            };
            run().unwrap_or_else(|e| Check::errored(&name, &e))
        })
        .collect()
}
