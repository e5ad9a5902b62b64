//! The solution field assembled from a density quadruple, and its
//! macroscopic, microscopic and boundary-layer views with the logarithmic
//! terms separated out.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Placement, Point, PointLocation};
use crate::potentials::{grad_s2, s2, Boundary, SINGULAR_FLOOR};
use crate::rescaled::{solve_densities, DensityQuadruple, PreparedConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TermRole {
    /// Targets must lie outside the curve.
    Hole,
    /// Targets must lie inside the curve.
    Outer,
}

/// `prefactor * integral of S_2(x - y(s)) mu(s) |y_ref'(s)| ds`, where the
/// source points `y` are placed but the measure is that of the reference curve.
#[derive(Clone, Debug)]
pub struct LayerTerm {
    pub boundary: Boundary,
    pub density: Vec<f64>,
    pub prefactor: f64,
    pub role: TermRole,
    weights: Vec<f64>,
}

impl LayerTerm {
    pub fn new(boundary: Boundary, density: Vec<f64>, prefactor: f64, role: TermRole) -> Self {
        let weights = boundary
            .reference_measure()
            .iter()
            .zip(&density)
            .map(|(w, mu)| w * mu)
            .collect();
        Self {
            boundary,
            density,
            prefactor,
            role,
            weights,
        }
    }

    /// The integral without the prefactor.
    pub fn integral_at(&self, x: Point) -> f64 {
        self.boundary
            .points
            .iter()
            .zip(&self.weights)
            .map(|(y, w)| s2(x - y) * w)
            .sum()
    }

    pub fn value(&self, x: Point) -> f64 {
        if self.prefactor == 0.0 {
            return 0.0;
        }
        self.prefactor * self.integral_at(x)
    }

    pub fn gradient(&self, x: Point) -> Point {
        if self.prefactor == 0.0 {
            return Point::zeros();
        }
        self.boundary
            .points
            .iter()
            .zip(&self.weights)
            .fold(Point::zeros(), |acc, (y, w)| acc + grad_s2(x - y) * *w)
            * self.prefactor
    }

    fn check(&self, x: Point) -> Result<()> {
        let b = &self.boundary;
        if b.placement.scale == 0.0 {
            if self.prefactor != 0.0 && (x - b.placement.offset).norm() <= SINGULAR_FLOOR {
                return Err(Error::SingularEvaluation((x - b.placement.offset).norm()));
            }
            return Ok(());
        }
        let band = b.guard_band();
        match (b.classify(x, band), self.role) {
            (PointLocation::NearBoundary, _) => Err(Error::GuardBand {
                x: x.x,
                y: x.y,
                distance: crate::potentials::distance_to_nodes(b, x),
                band,
            }),
            (PointLocation::Inside, TermRole::Hole) => Err(Error::InsideHole { x: x.x, y: x.y }),
            (PointLocation::Outside, TermRole::Outer) => Err(Error::OutsideDomain { x: x.x, y: x.y }),
            _ => Ok(()),
        }
    }
}

/// A harmonic function given as layer potentials plus a constant.
#[derive(Clone, Debug)]
pub struct HarmonicField {
    pub terms: Vec<LayerTerm>,
    pub constant: f64,
}

impl HarmonicField {
    pub fn new(terms: Vec<LayerTerm>, constant: f64) -> Self {
        Self { terms, constant }
    }

    /// Refuses targets inside holes, outside the outer curve, or inside a
    /// guard band.
    pub fn check_target(&self, x: Point) -> Result<()> {
        self.terms.iter().try_for_each(|t| t.check(x))
    }

    pub fn eval(&self, x: Point) -> Result<f64> {
        self.check_target(x)?;
        Ok(self.eval_unchecked(x))
    }

    pub fn eval_unchecked(&self, x: Point) -> f64 {
        self.constant + self.terms.iter().map(|t| t.value(x)).sum::<f64>()
    }

    pub fn gradient_unchecked(&self, x: Point) -> Point {
        self.terms.iter().fold(Point::zeros(), |acc, t| acc + t.gradient(x))
    }

    pub fn eval_many(&self, xs: &[Point]) -> Result<Vec<f64>> {
        xs.par_iter().map(|&x| self.eval(x)).collect()
    }

    /// Sum of the hole integrals without their prefactors.
    pub fn hole_sum(&self, x: Point) -> f64 {
        self.terms
            .iter()
            .filter(|t| t.role == TermRole::Hole)
            .map(|t| t.integral_at(x))
            .sum()
    }

    /// Five-point Laplacian with spacing `h`.
    pub fn discrete_laplacian(&self, x: Point, h: f64) -> f64 {
        let u = |dx: f64, dy: f64| self.eval_unchecked(x + Point::new(dx, dy));
        (u(h, 0.0) + u(-h, 0.0) + u(0.0, h) + u(0.0, -h) - 4.0 * u(0.0, 0.0)) / (h * h)
    }
}

/// The field for a quadruple solved at `(rho1, rho2)`: hole layers placed at
/// `rho1 p_j` with scale and prefactor `rho1 rho2`, the outer layer, and `xi`.
pub fn build_field(
    prep: &PreparedConfig,
    rho1: f64,
    rho2: f64,
    quad: &DensityQuadruple,
) -> Result<HarmonicField> {
    if quad.rho1 != rho1 || quad.rho2 != rho2 {
        return Err(Error::InvalidParameter(format!(
            "densities solved at ({}, {}) used at ({rho1}, {rho2})",
            quad.rho1, quad.rho2
        )));
    }
    let cfg = &prep.config;
    let mut terms: Vec<LayerTerm> = (1..=2)
        .map(|j| {
            let boundary = Boundary::new(cfg.hole(j), prep.physical_placement(j, rho1, rho2), &prep.rule);
            LayerTerm::new(boundary, quad.theta_i(j).values.clone(), rho1 * rho2, TermRole::Hole)
        })
        .collect();
    terms.push(LayerTerm::new(
        prep.outer.clone(),
        quad.theta_o.values.clone(),
        1.0,
        TermRole::Outer,
    ));
    Ok(HarmonicField::new(terms, quad.xi))
}

/// Plain field values at points away from 0, the holes and the outer curve.
pub fn eval_macroscopic(field: &HarmonicField, points: &[Point]) -> Result<Vec<f64>> {
    if let Some(x) = points.iter().find(|x| x.norm() <= SINGULAR_FLOOR) {
        return Err(Error::InvalidParameter(format!(
            "macroscopic point ({}, {}) sits at the hole centre",
            x.x, x.y
        )));
    }
    field.eval_many(points)
}

/// `rho1 rho2 log(rho)` with the zero limit at `rho1 rho2 = 0`.
fn log_term(rho1: f64, rho2: f64, rho: f64) -> f64 {
    let scale = rho1 * rho2;
    if scale == 0.0 {
        0.0
    } else {
        scale * rho.abs().ln()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MicroValue {
    /// `u(rho1 t)`.
    pub raw: f64,
    /// `u(rho1 t) - rho1 rho2 log(rho1) * log_coefficient`.
    pub analytic: f64,
    /// `(1 / 2 pi) * sum_j integral f_j`.
    pub log_coefficient: f64,
}

/// Values at `x = rho1 t`, split into an analytic part and the exact
/// `rho1 rho2 log rho1` term.
pub fn eval_microscopic(
    field: &HarmonicField,
    prep: &PreparedConfig,
    rho1: f64,
    rho2: f64,
    t_points: &[Point],
) -> Result<Vec<MicroValue>> {
    let cfg = &prep.config;
    let coefficient = (prep.f_integrals[0] + prep.f_integrals[1]) / (2.0 * PI);
    let correction = log_term(rho1, rho2, rho1) * coefficient;
    t_points
        .iter()
        .map(|&t| {
            for j in 1..=2 {
                let limit = Placement::new(cfg.p(j), cfg.r_star);
                if cfg.hole(j).contains_point_placed(limit, t, 0.0) != PointLocation::Outside {
                    return Err(Error::InsideHole { x: t.x, y: t.y });
                }
            }
            let raw = field.eval(t * rho1)?;
            Ok(MicroValue {
                raw,
                analytic: raw - correction,
                log_coefficient: coefficient,
            })
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LayerValue {
    /// `u(rho1 p_j + rho1 rho2 t)`.
    pub raw: f64,
    /// Raw value minus `rho1 rho2 (log(rho1 rho2) c_own + log(rho1) c_other)`.
    pub analytic: f64,
    /// `(1 / 2 pi) integral f_j`, multiplying `rho1 rho2 log(rho1 rho2)`.
    pub own_coefficient: f64,
    /// `(1 / 2 pi) integral f_l`, multiplying `rho1 rho2 log(rho1)`.
    pub other_coefficient: f64,
}

/// Values at `x = rho1 p_j + rho1 rho2 t` near hole `j`.
pub fn eval_boundary_layer(
    field: &HarmonicField,
    prep: &PreparedConfig,
    j: usize,
    rho1: f64,
    rho2: f64,
    t_points: &[Point],
) -> Result<Vec<LayerValue>> {
    if !(j == 1 || j == 2) {
        return Err(Error::InvalidParameter(format!("hole index must be 1 or 2, got {j}")));
    }
    let cfg = &prep.config;
    let l = 3 - j;
    let own = prep.f_integrals[j - 1] / (2.0 * PI);
    let other = prep.f_integrals[l - 1] / (2.0 * PI);
    let correction = log_term(rho1, rho2, rho1 * rho2) * own + log_term(rho1, rho2, rho1) * other;
    t_points
        .iter()
        .map(|&t| {
            if cfg.hole(j).contains_point(t, 0.0) != PointLocation::Outside {
                return Err(Error::InsideHole { x: t.x, y: t.y });
            }
            let shifted = cfg.p(j) + t * cfg.r_star;
            let limit = Placement::new(cfg.p(l), cfg.r_star);
            if cfg.r_star > 0.0
                && cfg.hole(l).contains_point_placed(limit, shifted, 0.0) != PointLocation::Outside
            {
                return Err(Error::InsideHole { x: t.x, y: t.y });
            }
            let raw = field.eval(cfg.p(j) * rho1 + t * (rho1 * rho2))?;
            Ok(LayerValue {
                raw,
                analytic: raw - correction,
                own_coefficient: own,
                other_coefficient: other,
            })
        })
        .collect()
}

/// How the hole separation depends on the hole size `eps`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EtaSpec {
    /// `eta(eps) = c eps^beta`, `0 < beta <= 1`, `c > 0`.
    Power { c: f64, beta: f64 },
    /// Tabulated values with a declared limit of `eps / eta(eps)`.
    Table {
        eps: Vec<f64>,
        eta: Vec<f64>,
        r_star: f64,
    },
}

impl EtaSpec {
    pub fn power(c: f64, beta: f64) -> Result<Self> {
        if !(c > 0.0 && beta > 0.0 && beta <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "need c > 0 and 0 < beta <= 1, got c = {c}, beta = {beta}"
            )));
        }
        Ok(EtaSpec::Power { c, beta })
    }

    pub fn eta(&self, eps: f64) -> Result<f64> {
        match self {
            EtaSpec::Power { c, beta } => Ok(c * eps.powf(*beta)),
            EtaSpec::Table { eps: xs, eta: ys, .. } => {
                if xs.len() != ys.len() || xs.is_empty() {
                    return Err(Error::InvalidParameter("malformed eta table".into()));
                }
                if let Some(i) = xs.iter().position(|&x| x == eps) {
                    return Ok(ys[i]);
                }
                for i in 1..xs.len() {
                    let (a, b) = (xs[i - 1], xs[i]);
                    if (a - eps) * (b - eps) < 0.0 {
                        let s = (eps - a) / (b - a);
                        return Ok(ys[i - 1] + s * (ys[i] - ys[i - 1]));
                    }
                }
                Err(Error::InvalidParameter(format!("eps = {eps} outside the eta table")))
            }
        }
    }

    pub fn r_star(&self) -> f64 {
        match self {
            EtaSpec::Power { c, beta } => {
                if *beta < 1.0 {
                    0.0
                } else {
                    1.0 / c
                }
            }
            EtaSpec::Table { r_star, .. } => *r_star,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum View {
    Macro,
    Micro,
    Layer(usize),
}

/// One value in the `eps` regime with its correction reconstituted.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RegimeValue {
    pub raw: f64,
    /// The exact logarithmic term contained in `raw`.
    pub correction: f64,
    pub analytic: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpsilonEvaluation {
    pub eps: f64,
    pub rho1: f64,
    pub rho2: f64,
    pub values: Vec<RegimeValue>,
}

/// Solves at `(rho1, rho2) = (eta(eps), eps / eta(eps))` and evaluates one view.
pub fn eval_epsilon_regime(
    prep: &PreparedConfig,
    eta: &EtaSpec,
    eps: f64,
    view: View,
    points: &[Point],
) -> Result<EpsilonEvaluation> {
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter(format!("eps must be positive, got {eps}")));
    }
    if (eta.r_star() - prep.config.r_star).abs() > 1e-12 {
        return Err(Error::InvalidParameter(format!(
            "eta implies r_star = {}, configuration has {}",
            eta.r_star(),
            prep.config.r_star
        )));
    }
    let rho1 = eta.eta(eps)?;
    let rho2 = eps / rho1;
    let quad = solve_densities(prep, rho1, rho2)?;
    let field = build_field(prep, rho1, rho2, &quad)?;
    let values = match view {
        View::Macro => eval_macroscopic(&field, points)?
            .into_iter()
            .map(|raw| RegimeValue {
                raw,
                correction: 0.0,
                analytic: raw,
            })
            .collect(),
        View::Micro => eval_microscopic(&field, prep, rho1, rho2, points)?
            .into_iter()
            .map(|v| RegimeValue {
                raw: v.raw,
                correction: v.raw - v.analytic,
                analytic: v.analytic,
            })
            .collect(),
        View::Layer(j) => eval_boundary_layer(&field, prep, j, rho1, rho2, points)?
            .into_iter()
            .map(|v| RegimeValue {
                raw: v.raw,
                correction: v.raw - v.analytic,
                analytic: v.analytic,
            })
            .collect(),
    };
    Ok(EpsilonEvaluation {
        eps,
        rho1,
        rho2,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::DataFunction;
    use crate::geometry::{make_circle, ProblemConfig};
    use crate::rescaled::solve_limit_quadruple;
    use approx::assert_abs_diff_eq;

    fn prep_with(f: impl FnOnce(&mut ProblemConfig)) -> PreparedConfig {
        let mut config = ProblemConfig::default_two_holes();
        f(&mut config);
        PreparedConfig::new(&config).unwrap()
    }

    fn field_at(prep: &PreparedConfig, rho1: f64, rho2: f64) -> HarmonicField {
        let q = solve_densities(prep, rho1, rho2).unwrap();
        build_field(prep, rho1, rho2, &q).unwrap()
    }

    #[test]
    fn zero_rho1_field_has_no_hole_contribution() {
        let prep = prep_with(|_| {});
        let f = field_at(&prep, 0.0, 0.2);
        let x = Point::new(0.3, 0.2);
        let outer_only = f.terms[2].value(x) + f.constant;
        assert_eq!(f.eval(x).unwrap(), outer_only);
    }

    #[test]
    fn constant_data_gives_constant_field() {
        let prep = prep_with(|c| {
            c.g = DataFunction::Constant { value: -1.5 };
            c.f1 = DataFunction::Constant { value: 0.0 };
            c.f2 = DataFunction::Constant { value: 0.0 };
        });
        let f = field_at(&prep, 0.2, 0.2);
        for x in [Point::new(0.5, 0.1), Point::new(-0.2, 0.5), Point::new(0.0, -0.6)] {
            assert_abs_diff_eq!(f.eval(x).unwrap(), -1.5, epsilon = 1e-12);
        }
    }

    #[test]
    fn mismatched_parameters_rejected() {
        let prep = prep_with(|_| {});
        let q = solve_densities(&prep, 0.1, 0.1).unwrap();
        assert!(build_field(&prep, 0.1, 0.2, &q).is_err());
    }

    #[test]
    fn views_agree_after_reconstitution() {
        let prep = prep_with(|_| {});
        let (r1, r2) = (0.2, 0.15);
        let f = field_at(&prep, r1, r2);
        let x = Point::new(0.0, 0.15);
        let direct = f.eval(x).unwrap();
        let mac = eval_macroscopic(&f, &[x]).unwrap()[0];
        let mic = eval_microscopic(&f, &prep, r1, r2, &[x / r1]).unwrap()[0];
        let rebuilt = mic.analytic + r1 * r2 * r1.ln() * mic.log_coefficient;
        assert_eq!(direct, mac);
        assert_abs_diff_eq!(rebuilt, direct, epsilon = 1e-12);
        let t = Point::new(2.0, 0.0);
        let lay = eval_boundary_layer(&f, &prep, 1, r1, r2, &[t]).unwrap()[0];
        let y = prep.config.p(1) * r1 + t * (r1 * r2);
        let rebuilt = lay.analytic
            + r1 * r2 * ((r1 * r2).ln() * lay.own_coefficient + r1.ln() * lay.other_coefficient);
        assert_abs_diff_eq!(rebuilt, f.eval(y).unwrap(), epsilon = 1e-12);
    }

    #[test]
    fn log_coefficients_are_point_independent() {
        let prep = prep_with(|_| {});
        let f = field_at(&prep, 0.2, 0.2);
        let v = eval_microscopic(&f, &prep, 0.2, 0.2, &[Point::new(0.0, 0.6), Point::new(0.0, -1.0)])
            .unwrap();
        assert_eq!(v[0].log_coefficient, v[1].log_coefficient);
        assert_abs_diff_eq!(v[0].log_coefficient, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn zero_flux_gives_zero_coefficients() {
        let prep = prep_with(|c| c.f1 = DataFunction::fourier(0.0, &[(1, 0.0, 1.0)]));
        let f = field_at(&prep, 0.1, 0.1);
        let v = eval_microscopic(&f, &prep, 0.1, 0.1, &[Point::new(0.0, 0.6)]).unwrap()[0];
        assert!(v.log_coefficient.abs() < 1e-14);
        assert_eq!(v.raw, v.analytic);
    }

    #[test]
    fn limit_field_is_unperturbed_solution() {
        let prep = prep_with(|_| {});
        let q = solve_limit_quadruple(&prep).unwrap();
        let f = build_field(&prep, 0.0, 0.0, &q).unwrap();
        for x in [Point::new(0.5, 0.2), Point::new(-0.3, -0.4)] {
            assert_abs_diff_eq!(f.eval(x).unwrap(), 1.0 + x.x * x.x - x.y * x.y, epsilon = 1e-10);
        }
    }

    #[test]
    fn harmonic_away_from_sources() {
        let prep = prep_with(|_| {});
        let f = field_at(&prep, 0.2, 0.2);
        for x in [Point::new(0.5, 0.1), Point::new(0.0, 0.3)] {
            assert!(f.discrete_laplacian(x, 1e-3).abs() < 1e-4);
        }
    }

    #[test]
    fn maximum_principle_with_zero_flux() {
        let prep = prep_with(|c| {
            c.f1 = DataFunction::Constant { value: 0.0 };
            c.f2 = DataFunction::Constant { value: 0.0 };
        });
        let f = field_at(&prep, 0.3, 0.2);
        let (gmin, gmax) = prep.g.iter().fold((f64::MAX, f64::MIN), |(a, b), v| (a.min(*v), b.max(*v)));
        for k in 0..20 {
            let a = 0.7 * k as f64;
            let x = Point::new(0.6 * a.cos(), 0.6 * a.sin());
            let u = f.eval(x).unwrap();
            assert!(u >= gmin - 1e-12 && u <= gmax + 1e-12);
        }
    }

    #[test]
    fn mirrored_geometry_swaps_layers() {
        let prep = prep_with(|c| {
            c.hole2 = make_circle(Point::zeros(), 1.0).unwrap();
            c.p1 = [-0.3, 0.0];
            c.p2 = [0.3, 0.0];
            c.f1 = DataFunction::Constant { value: 1.0 };
            c.f2 = DataFunction::Constant { value: 1.0 };
            c.g = DataFunction::HarmonicPolynomial {
                constant: 1.0,
                terms: vec![crate::data::HarmonicTerm { degree: 2, re: 1.0, im: 0.0 }],
                trace: crate::data::Trace::Value,
            };
        });
        let f = field_at(&prep, 0.2, 0.2);
        let t = Point::new(1.5, 0.5);
        let a = eval_boundary_layer(&f, &prep, 1, 0.2, 0.2, &[t]).unwrap()[0];
        let b = eval_boundary_layer(&f, &prep, 2, 0.2, 0.2, &[Point::new(-t.x, t.y)]).unwrap()[0];
        assert_abs_diff_eq!(a.analytic, b.analytic, epsilon = 1e-10);
        assert_eq!(a.own_coefficient, b.own_coefficient);
    }

    #[test]
    fn eta_family() {
        let e = EtaSpec::power(1.0, 0.5).unwrap();
        assert_eq!(e.r_star(), 0.0);
        assert_abs_diff_eq!(e.eta(0.04).unwrap(), 0.2, epsilon = 1e-15);
        assert_eq!(EtaSpec::power(2.0, 1.0).unwrap().r_star(), 0.5);
        assert!(EtaSpec::power(1.0, 1.5).is_err());
        let table = EtaSpec::Table {
            eps: vec![0.1, 0.05],
            eta: vec![0.3, 0.2],
            r_star: 0.0,
        };
        assert_abs_diff_eq!(table.eta(0.075).unwrap(), 0.25, epsilon = 1e-15);
        assert!(table.eta(0.5).is_err());
    }
}
