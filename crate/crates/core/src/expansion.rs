//! Expansion of the solution for `r_star = 0` in powers of `(rho1, rho2)`:
//! the coefficient densities from their own boundary equations, the
//! two-term expansion of the field, and finite-difference checks of all of
//! it against full solves.

use nalgebra::{DMatrix, DVector, Matrix2};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::linalg::{solve_dense, solve_dense_multi};
use crate::order::{fit_order, FitOutcome};
use crate::potentials::{grad_s2, hessian_moment, s2, BoundaryDensity};
use crate::representation::{build_field, HarmonicField, LayerTerm, TermRole};
use crate::rescaled::{solve_densities, solve_densities_signed, DensityQuadruple, PreparedConfig};

/// Default finite-difference step.
pub const FD_STEP: f64 = 1e-2;

/// Densities and field at `(rho1, rho2) = (0, 0)`.
#[derive(Clone, Debug)]
pub struct BaseSolution {
    pub quad: DensityQuadruple,
    pub u00: HarmonicField,
}

fn require_zero_r_star(prep: &PreparedConfig) -> Result<()> {
    if prep.config.r_star != 0.0 {
        return Err(Error::InvalidParameter(format!(
            "the expansion needs r_star = 0, configuration has {}",
            prep.config.r_star
        )));
    }
    Ok(())
}

fn outer_field(prep: &PreparedConfig, theta: &[f64], xi: f64) -> HarmonicField {
    HarmonicField::new(
        vec![LayerTerm::new(prep.outer.clone(), theta.to_vec(), 1.0, TermRole::Outer)],
        xi,
    )
}

pub fn compute_base(prep: &PreparedConfig) -> Result<BaseSolution> {
    require_zero_r_star(prep)?;
    let quad = solve_densities(prep, 0.0, 0.0)?;
    let u00 = outer_field(prep, &quad.theta_o.values, quad.xi);
    Ok(BaseSolution { quad, u00 })
}

/// First derivatives of the hole densities at the origin.
#[derive(Clone, Debug)]
pub struct FirstOrder {
    /// `d/d rho1` of `theta_j`, `j = 1, 2`.
    pub theta_i_10: [Vec<f64>; 2],
    /// `d/d rho2` of `theta_j`.
    pub theta_i_01: [Vec<f64>; 2],
    /// `integral of d_h d_k S_2(y) theta_o(y) d sigma_y` at the origin.
    pub hessian_moment: Matrix2<f64>,
}

pub fn compute_first_order(prep: &PreparedConfig, base: &BaseSolution) -> Result<FirstOrder> {
    let cfg = &prep.config;
    let h = hessian_moment(&prep.outer, &base.quad.theta_o.values);
    let m = prep.m();
    let mut theta_i_10: [Vec<f64>; 2] = Default::default();
    let mut theta_i_01: [Vec<f64>; 2] = Default::default();
    for j in 1..=2 {
        let l = 3 - j;
        let normals = &prep.holes[j - 1].normals;
        let p = cfg.p(j);
        let cross = grad_s2(cfg.p(l) - p);
        let mut rhs = DMatrix::zeros(m, 2);
        for (i, n) in normals.iter().enumerate() {
            rhs[(i, 0)] = -p.dot(&(h * n));
            rhs[(i, 1)] = cross.dot(n) * prep.f_integrals[l - 1];
        }
        let (x, _) = solve_dense_multi(prep.hole_operator(j), &rhs)?;
        theta_i_10[j - 1] = x.column(0).iter().copied().collect();
        theta_i_01[j - 1] = x.column(1).iter().copied().collect();
        for (name, v) in [("(1,0)", &theta_i_10[j - 1]), ("(0,1)", &theta_i_01[j - 1])] {
            let flux = prep.holes[j - 1].integrate(v);
            let scale = v.iter().fold(1.0f64, |a, b| a.max(b.abs()));
            if flux.abs() > 1e-10 * scale {
                return Err(Error::Invariant(format!(
                    "coefficient {name} of hole {j} should integrate to zero, got {flux:e}"
                )));
            }
        }
    }
    Ok(FirstOrder {
        theta_i_10,
        theta_i_01,
        hessian_moment: h,
    })
}

/// Coefficients of `rho1 rho2` and `rho1^2 rho2` for the outer density and
/// constant, with the corresponding fields `v[theta_o] + xi`.
#[derive(Clone, Debug)]
pub struct MixedOrder {
    pub theta_o_11: BoundaryDensity,
    pub xi_11: f64,
    pub theta_o_21: BoundaryDensity,
    pub xi_21: f64,
    pub u11: HarmonicField,
    pub u21: HarmonicField,
}

/// Solves `V theta + xi = rhs`, `integral theta = 0` on the outer curve for
/// each column of `rhs`.
pub fn solve_outer_dirichlet(prep: &PreparedConfig, rhs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let m = prep.m();
    let mut a = DMatrix::zeros(m + 1, m + 1);
    a.view_mut((0, 0), (m, m)).copy_from(prep.outer_single_layer());
    a.view_mut((0, m), (m, 1)).fill(1.0);
    for k in 0..m {
        a[(m, k)] = prep.outer.measure[k];
    }
    let mut b = DMatrix::zeros(m + 1, rhs.ncols());
    b.view_mut((0, 0), (m, rhs.ncols())).copy_from(rhs);
    Ok(solve_dense_multi(&a, &b)?.0)
}

pub fn compute_mixed_order(prep: &PreparedConfig, base: &BaseSolution) -> Result<MixedOrder> {
    let _ = base;
    let cfg = &prep.config;
    let m = prep.m();
    let total: f64 = prep.f_integrals.iter().sum();
    let dipole = cfg.p(1) * prep.f_integrals[0] + cfg.p(2) * prep.f_integrals[1];
    let mut rhs = DMatrix::zeros(m, 2);
    for (i, &x) in prep.outer.points.iter().enumerate() {
        rhs[(i, 0)] = -s2(x) * total;
        rhs[(i, 1)] = 2.0 * grad_s2(x).dot(&dipole);
    }
    let sol = solve_outer_dirichlet(prep, &rhs)?;
    let theta_11: Vec<f64> = sol.column(0).rows(0, m).iter().copied().collect();
    let theta_21: Vec<f64> = sol.column(1).rows(0, m).iter().copied().collect();
    let (xi_11, xi_21) = (sol[(m, 0)], sol[(m, 1)]);
    Ok(MixedOrder {
        u11: outer_field(prep, &theta_11, xi_11),
        u21: outer_field(prep, &theta_21, xi_21),
        theta_o_11: BoundaryDensity::mean_zero(theta_11, &prep.outer)?,
        xi_11,
        theta_o_21: BoundaryDensity::mean_zero(theta_21, &prep.outer)?,
        xi_21,
    })
}

#[derive(Clone, Debug)]
pub struct ExpansionCoefficients {
    pub base: BaseSolution,
    pub first: FirstOrder,
    pub mixed: MixedOrder,
    pub f_integrals: [f64; 2],
    pub centers: [Point; 2],
}

pub fn compute_expansion(prep: &PreparedConfig) -> Result<ExpansionCoefficients> {
    let base = compute_base(prep)?;
    let first = compute_first_order(prep, &base)?;
    let mixed = compute_mixed_order(prep, &base)?;
    Ok(ExpansionCoefficients {
        base,
        first,
        mixed,
        f_integrals: prep.f_integrals,
        centers: [prep.config.p(1), prep.config.p(2)],
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExpansionEvaluation {
    pub value: f64,
    /// `u00(x)`.
    pub u00: f64,
    /// `rho1 rho2 (u11(x) + S_2(x) sum_j F_j)`, `F_j = integral f_j`.
    pub first: f64,
    /// `rho1^2 rho2 (u21(x) / 2 - sum_j grad S_2(x) . p_j F_j)`.
    pub second: f64,
}

/// `S_2(x) sum_j F_j - rho1 sum_j grad S_2(x) . p_j F_j`: the two-term form
/// of the hole integrals `sum_j integral S_2(x - rho1 p_j - rho1 rho2 s) theta_j`.
pub fn hole_sum_expansion(coeffs: &ExpansionCoefficients, rho1: f64, x: Point) -> f64 {
    let [f1, f2] = coeffs.f_integrals;
    let dipole = coeffs.centers[0] * f1 + coeffs.centers[1] * f2;
    s2(x) * (f1 + f2) - rho1 * grad_s2(x).dot(&dipole)
}

pub fn expansion_eval(
    coeffs: &ExpansionCoefficients,
    rho1: f64,
    rho2: f64,
    x: Point,
) -> Result<ExpansionEvaluation> {
    if x.norm() <= crate::potentials::SINGULAR_FLOOR {
        return Err(Error::InvalidParameter("the expansion is singular at 0".into()));
    }
    coeffs.base.u00.check_target(x)?;
    let [f1, f2] = coeffs.f_integrals;
    let dipole = coeffs.centers[0] * f1 + coeffs.centers[1] * f2;
    let u00 = coeffs.base.u00.eval_unchecked(x);
    let first = rho1 * rho2 * (coeffs.mixed.u11.eval_unchecked(x) + s2(x) * (f1 + f2));
    let second = rho1 * rho1 * rho2 * (0.5 * coeffs.mixed.u21.eval_unchecked(x) - grad_s2(x).dot(&dipole));
    Ok(ExpansionEvaluation {
        value: u00 + first + second,
        u00,
        first,
        second,
    })
}

/// Partial derivatives at the origin reachable by central stencils.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Partial {
    D10,
    D01,
    D11,
    D21,
    D12,
}

impl Partial {
    /// `(rho1, rho2, weight)` triples; the weighted sum is divided by
    /// `h^order`. Every stencil has an `O(h^2)` leading error.
    fn stencil(self) -> (Vec<(f64, f64, f64)>, i32) {
        match self {
            Partial::D10 => (vec![(1.0, 0.0, 0.5), (-1.0, 0.0, -0.5)], 1),
            Partial::D01 => (vec![(0.0, 1.0, 0.5), (0.0, -1.0, -0.5)], 1),
            Partial::D11 => (
                vec![(1.0, 1.0, 0.25), (1.0, -1.0, -0.25), (-1.0, 1.0, -0.25), (-1.0, -1.0, 0.25)],
                2,
            ),
            Partial::D21 => (
                vec![
                    (1.0, 1.0, 0.5),
                    (0.0, 1.0, -1.0),
                    (-1.0, 1.0, 0.5),
                    (1.0, -1.0, -0.5),
                    (0.0, -1.0, 1.0),
                    (-1.0, -1.0, -0.5),
                ],
                3,
            ),
            Partial::D12 => (
                vec![
                    (1.0, 1.0, 0.5),
                    (1.0, 0.0, -1.0),
                    (1.0, -1.0, 0.5),
                    (-1.0, 1.0, -0.5),
                    (-1.0, 0.0, 1.0),
                    (-1.0, -1.0, -0.5),
                ],
                3,
            ),
        }
    }
}

/// Richardson-extrapolated central difference of the stacked unknowns
/// `[theta_1, theta_2, theta_o, xi]` over steps `h` and `h / 2`.
pub fn finite_difference(prep: &PreparedConfig, partial: Partial, h: f64) -> Result<DVector<f64>> {
    let (stencil, order) = partial.stencil();
    let points: Vec<(f64, f64, f64, f64)> = [h, h / 2.0]
        .iter()
        .flat_map(|&step| stencil.iter().map(move |&(a, b, w)| (step, a * step, b * step, w)))
        .collect();
    let solved: Result<Vec<DVector<f64>>> = points
        .par_iter()
        .map(|&(_, r1, r2, _)| solve_densities_signed(prep, r1, r2).map(|q| q.stacked()))
        .collect();
    let solved = solved?;
    let size = solved[0].len();
    let mut d = [DVector::zeros(size), DVector::zeros(size)];
    for ((step, _, _, w), v) in points.iter().zip(&solved) {
        let slot = if *step == h { 0 } else { 1 };
        d[slot] += v * (w / step.powi(order));
    }
    Ok((&d[1] * 4.0 - &d[0]) / 3.0)
}

/// Comparison of one coefficient from its equation with its finite-difference estimate.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientCheck {
    pub name: &'static str,
    pub equation_norm: f64,
    pub fd_norm: f64,
    pub difference: f64,
    /// `difference / max(equation_norm, 1)`.
    pub relative: f64,
}

impl CoefficientCheck {
    fn new(name: &'static str, equation: &[f64], fd: &[f64]) -> Self {
        let sup = |v: &[f64]| v.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        let difference = equation
            .iter()
            .zip(fd)
            .fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
        let equation_norm = sup(equation);
        Self {
            name,
            equation_norm,
            fd_norm: sup(fd),
            difference,
            relative: difference / equation_norm.max(1.0),
        }
    }
}

/// Equation-based coefficients against finite differences of full solves.
/// Mixed partials use step `2h`: their stencils amplify solver roundoff
/// like `h^-2` and `h^-3`.
pub fn fd_comparison(prep: &PreparedConfig, coeffs: &ExpansionCoefficients, h: f64) -> Result<Vec<CoefficientCheck>> {
    let m = prep.m();
    let d10 = finite_difference(prep, Partial::D10, h)?;
    let d01 = finite_difference(prep, Partial::D01, h)?;
    let d11 = finite_difference(prep, Partial::D11, 2.0 * h)?;
    let d21 = finite_difference(prep, Partial::D21, 2.0 * h)?;
    let slice = |v: &DVector<f64>, a: usize, n: usize| v.as_slice()[a..a + n].to_vec();
    let with_xi = |theta: &BoundaryDensity, xi: f64| {
        let mut v = theta.values.clone();
        v.push(xi);
        v
    };
    let mx = &coeffs.mixed;
    Ok(vec![
        CoefficientCheck::new("theta_i1_10", &coeffs.first.theta_i_10[0], &slice(&d10, 0, m)),
        CoefficientCheck::new("theta_i2_10", &coeffs.first.theta_i_10[1], &slice(&d10, m, m)),
        CoefficientCheck::new("theta_i1_01", &coeffs.first.theta_i_01[0], &slice(&d01, 0, m)),
        CoefficientCheck::new("theta_i2_01", &coeffs.first.theta_i_01[1], &slice(&d01, m, m)),
        CoefficientCheck::new("theta_o_11+xi_11", &with_xi(&mx.theta_o_11, mx.xi_11), &slice(&d11, 2 * m, m + 1)),
        CoefficientCheck::new("theta_o_21+xi_21", &with_xi(&mx.theta_o_21, mx.xi_21), &slice(&d21, 2 * m, m + 1)),
    ])
}

/// Finite-difference estimates of coefficients that vanish identically.
#[derive(Clone, Debug, PartialEq)]
pub struct VanishingReport {
    /// Sup norm of `d/d rho1 theta_o` at the origin.
    pub theta_o_10: f64,
    pub theta_o_01: f64,
    pub xi_10: f64,
    pub xi_01: f64,
    pub theta_o_12: f64,
    pub xi_12: f64,
}

impl VanishingReport {
    pub fn max(&self) -> f64 {
        [self.theta_o_10, self.theta_o_01, self.xi_10, self.xi_01, self.theta_o_12, self.xi_12]
            .iter()
            .fold(0.0, |a, b| a.max(b.abs()))
    }
}

/// Mixed partials use step `2h`, as in [`fd_comparison`].
pub fn verify_vanishing_coefficients(prep: &PreparedConfig, h: f64) -> Result<VanishingReport> {
    require_zero_r_star(prep)?;
    let m = prep.m();
    let outer = |v: &DVector<f64>| v.rows(2 * m, m).amax();
    let d10 = finite_difference(prep, Partial::D10, h)?;
    let d01 = finite_difference(prep, Partial::D01, h)?;
    let d12 = finite_difference(prep, Partial::D12, 2.0 * h)?;
    Ok(VanishingReport {
        theta_o_10: outer(&d10),
        theta_o_01: outer(&d01),
        xi_10: d10[3 * m].abs(),
        xi_01: d01[3 * m].abs(),
        theta_o_12: outer(&d12),
        xi_12: d12[3 * m].abs(),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct RemainderFit {
    /// `(t, |u[t, t](x) - expansion(t, t, x)|)`.
    pub errors: Vec<(f64, f64)>,
    pub fit: FitOutcome,
}

/// Fits the order of the expansion remainder along `rho1 = rho2 = t`.
pub fn remainder_order(
    prep: &PreparedConfig,
    coeffs: &ExpansionCoefficients,
    x: Point,
    ts: &[f64],
) -> Result<RemainderFit> {
    if ts.len() < 3 || ts.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidParameter("need at least 3 decreasing t values".into()));
    }
    let errors: Result<Vec<(f64, f64)>> = ts
        .par_iter()
        .map(|&t| {
            let quad = solve_densities(prep, t, t)?;
            let u = build_field(prep, t, t, &quad)?.eval(x)?;
            Ok((t, (u - expansion_eval(coeffs, t, t, x)?.value).abs()))
        })
        .collect();
    let errors = errors?;
    let fit = fit_order(&errors)?;
    Ok(RemainderFit { errors, fit })
}

/// Solves the hole equation `(1/2 + K*) theta = rhs` on reference hole `j`.
pub fn solve_hole_equation(prep: &PreparedConfig, j: usize, rhs: &[f64]) -> Result<Vec<f64>> {
    let s = solve_dense(prep.hole_operator(j), &DVector::from_column_slice(rhs))?;
    Ok(s.solution.iter().copied().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::DataFunction;
    use crate::geometry::ProblemConfig;
    use approx::assert_abs_diff_eq;

    fn prep_with(f: impl FnOnce(&mut ProblemConfig)) -> PreparedConfig {
        let mut config = ProblemConfig::default_two_holes();
        f(&mut config);
        PreparedConfig::new(&config).unwrap()
    }

    #[test]
    fn requires_zero_r_star() {
        let prep = prep_with(|c| c.r_star = 0.1);
        assert!(compute_base(&prep).is_err());
    }

    #[test]
    fn constant_dirichlet_base() {
        let prep = prep_with(|c| c.g = DataFunction::Constant { value: 3.0 });
        let coeffs = compute_expansion(&prep).unwrap();
        assert_abs_diff_eq!(coeffs.base.u00.eval(Point::new(0.2, 0.3)).unwrap(), 3.0, epsilon = 1e-12);
        for v in &coeffs.first.theta_i_10 {
            assert!(v.iter().all(|x| x.abs() < 1e-12));
        }
    }

    #[test]
    fn base_reproduces_polynomial() {
        let prep = prep_with(|_| {});
        let base = compute_base(&prep).unwrap();
        for x in [Point::new(0.4, 0.3), Point::new(-0.5, 0.1)] {
            assert_abs_diff_eq!(base.u00.eval(x).unwrap(), 1.0 + x.x * x.x - x.y * x.y, epsilon = 1e-10);
        }
    }

    #[test]
    fn zero_flux_coefficients_vanish() {
        let prep = prep_with(|c| {
            c.f1 = DataFunction::fourier(0.0, &[(2, 1.0, 0.0)]);
        });
        let coeffs = compute_expansion(&prep).unwrap();
        assert!(coeffs.first.theta_i_01.iter().all(|v| v.iter().all(|x| x.abs() < 1e-12)));
        let mx = &coeffs.mixed;
        assert!(mx.theta_o_11.sup_norm() < 1e-12 && mx.xi_11.abs() < 1e-12);
        assert!(mx.theta_o_21.sup_norm() < 1e-12 && mx.xi_21.abs() < 1e-12);
        for (r1, r2) in [(0.1, 0.2), (0.3, 0.05)] {
            let x = Point::new(0.5, 0.2);
            let e = expansion_eval(&coeffs, r1, r2, x).unwrap();
            assert_abs_diff_eq!(e.value, e.u00, epsilon = 1e-12);
        }
    }

    #[test]
    fn degenerate_parameters_give_base() {
        let prep = prep_with(|_| {});
        let coeffs = compute_expansion(&prep).unwrap();
        let x = Point::new(0.5, -0.2);
        for (r1, r2) in [(0.0, 0.3), (0.3, 0.0)] {
            let e = expansion_eval(&coeffs, r1, r2, x).unwrap();
            assert_eq!(e.value, e.u00);
        }
        let e = expansion_eval(&coeffs, 0.1, 0.1, x).unwrap();
        assert_eq!(e.value, e.u00 + e.first + e.second);
        assert!(expansion_eval(&coeffs, 0.1, 0.1, Point::zeros()).is_err());
    }

    #[test]
    fn u11_dirichlet_trace() {
        let prep = prep_with(|_| {});
        let coeffs = compute_expansion(&prep).unwrap();
        let total: f64 = prep.f_integrals.iter().sum();
        let m = prep.m();
        let theta = DVector::from_vec(coeffs.mixed.theta_o_11.values.clone());
        let trace = prep.outer_single_layer() * theta;
        for i in 0..m {
            let x = prep.outer.points[i];
            assert_abs_diff_eq!(trace[i] + coeffs.mixed.xi_11, -s2(x) * total, epsilon = 1e-10);
        }
    }

    #[test]
    fn first_order_matches_differences() {
        let prep = prep_with(|_| {});
        let coeffs = compute_expansion(&prep).unwrap();
        let checks = fd_comparison(&prep, &coeffs, FD_STEP).unwrap();
        for c in &checks {
            assert!(c.relative < 1e-5, "{c:?}");
        }
    }

    #[test]
    fn vanishing_coefficients_small() {
        let prep = prep_with(|_| {});
        let r = verify_vanishing_coefficients(&prep, FD_STEP).unwrap();
        assert!(r.theta_o_10 <= 1e-4 && r.theta_o_01 <= 1e-4, "{r:?}");
        assert!(r.xi_12 <= 1e-3 && r.theta_o_12 <= 1e-3, "{r:?}");
    }

    #[test]
    fn zero_data_vanishing_exact() {
        let prep = prep_with(|c| {
            c.g = DataFunction::Constant { value: 0.0 };
            c.f1 = DataFunction::Constant { value: 0.0 };
            c.f2 = DataFunction::Constant { value: 0.0 };
        });
        assert_eq!(verify_vanishing_coefficients(&prep, FD_STEP).unwrap().max(), 0.0);
    }
}
