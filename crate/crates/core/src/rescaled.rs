//! The two-parameter boundary system on the fixed reference curves.
//!
//! For `rho1, rho2` the holes sit at `rho1 p_j + rho1 rho2 * hole_j`. The
//! unknowns are densities `theta_1`, `theta_2` on the reference hole curves,
//! a mean-zero density `theta_o` on the outer curve, and a constant `xi`.
//! Every kernel stays finite at `rho1 = 0` or `rho2 = 0`, so degenerate
//! parameters are assembled by the same code, and so are small negative
//! values used by finite-difference stencils.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::geometry::{
    closure_inside, closures_disjoint, node_gap, validate_configuration, ConfigViolation, Placement,
    ProblemConfig,
};
use crate::linalg::{solve_dense, solve_dense_multi};
use crate::potentials::{
    adjoint_double_layer_at, adjoint_double_layer_self, assemble_single_layer_self,
    single_layer_at, Boundary, BoundaryDensity,
};
use crate::quadrature::{trapezoid_rule, PeriodicRule};

/// Required separation, in node spacings, between curves that interact
/// through a plainly integrated kernel.
pub const SEPARATION_SPACINGS: f64 = 3.0;

/// Tolerance on `|integral theta_j - integral f_j|`.
pub const FLUX_TOLERANCE: f64 = 1e-10;

/// Parameter-independent pieces of the system for one configuration.
#[derive(Clone, Debug)]
pub struct PreparedConfig {
    pub config: ProblemConfig,
    pub rule: PeriodicRule,
    pub holes: [Boundary; 2],
    pub outer: Boundary,
    /// `1/2 I + K*` on each reference hole curve.
    hole_self: [DMatrix<f64>; 2],
    outer_single_layer: DMatrix<f64>,
    pub f: [Vec<f64>; 2],
    pub g: Vec<f64>,
    /// `integral of f_j d sigma` over the reference hole curves.
    pub f_integrals: [f64; 2],
}

impl PreparedConfig {
    pub fn new(config: &ProblemConfig) -> Result<Self> {
        config.check()?;
        config.g.check_against(&config.outer, true)?;
        config.f1.check_against(&config.hole1, false)?;
        config.f2.check_against(&config.hole2, false)?;
        let rule = trapezoid_rule(config.nodes)?;
        let holes = [
            Boundary::reference(&config.hole1, &rule),
            Boundary::reference(&config.hole2, &rule),
        ];
        let outer = Boundary::reference(&config.outer, &rule);
        let hole_self = [
            half_plus(adjoint_double_layer_self(&holes[0])),
            half_plus(adjoint_double_layer_self(&holes[1])),
        ];
        let outer_single_layer = assemble_single_layer_self(&config.outer, &rule);
        let f = [
            config.f1.sample(&config.hole1, rule.len()),
            config.f2.sample(&config.hole2, rule.len()),
        ];
        let g = config.g.sample(&config.outer, rule.len());
        let f_integrals = [holes[0].integrate(&f[0]), holes[1].integrate(&f[1])];
        Ok(Self {
            config: config.clone(),
            rule,
            holes,
            outer,
            hole_self,
            outer_single_layer,
            f,
            g,
            f_integrals,
        })
    }

    pub fn m(&self) -> usize {
        self.rule.len()
    }

    /// `1/2 I + K*` on reference hole `j` (1 or 2).
    pub fn hole_operator(&self, j: usize) -> &DMatrix<f64> {
        &self.hole_self[j - 1]
    }

    pub fn outer_single_layer(&self) -> &DMatrix<f64> {
        &self.outer_single_layer
    }

    /// Placement of hole `j` inside the physical domain.
    pub fn physical_placement(&self, j: usize, rho1: f64, rho2: f64) -> Placement {
        Placement::new(self.config.p(j) * rho1, rho1 * rho2)
    }

    /// Placement of hole `j` in the coordinates scaled by `1 / rho1`.
    pub fn micro_placement(&self, j: usize, rho2: f64) -> Placement {
        Placement::new(self.config.p(j), rho2)
    }

    /// Geometric admissibility plus the separation margin. Negative
    /// parameters are accepted only when `signed` is set.
    pub fn check_parameters(&self, rho1: f64, rho2: f64, signed: bool) -> Result<()> {
        if !(rho1.is_finite() && rho2.is_finite()) {
            return Err(Error::InvalidParameter("parameters must be finite".into()));
        }
        let cfg = &self.config;
        if signed {
            let violation = ConfigViolation {
                holes_overlap: !closures_disjoint(
                    &cfg.hole1,
                    self.micro_placement(1, rho2),
                    &cfg.hole2,
                    self.micro_placement(2, rho2),
                ),
                hole_outside: [1, 2].map(|j| {
                    rho1 != 0.0
                        && !closure_inside(cfg.hole(j), self.physical_placement(j, rho1, rho2), &cfg.outer)
                }),
                negative_parameter: false,
            };
            if violation.any() {
                return Err(Error::Geometry(violation));
            }
        } else {
            validate_configuration(cfg, rho1, rho2).map_err(Error::Geometry)?;
        }

        let m = self.m();
        let spacing = |b: &Boundary, scale: f64| {
            let max_speed = b.speeds.iter().cloned().fold(0.0, f64::max);
            scale.abs() * max_speed * 2.0 * std::f64::consts::PI / m as f64
        };
        if rho2 != 0.0 {
            let gap = node_gap(
                &cfg.hole1,
                self.micro_placement(1, rho2),
                &cfg.hole2,
                self.micro_placement(2, rho2),
                m,
            );
            let need = SEPARATION_SPACINGS * spacing(&self.holes[0], rho2).max(spacing(&self.holes[1], rho2));
            if gap < need {
                return Err(Error::InvalidParameter(format!(
                    "holes at scale {rho2} are {gap:e} apart, closer than {SEPARATION_SPACINGS} node spacings"
                )));
            }
        }
        if rho1 != 0.0 {
            let outer_spacing = spacing(&self.outer, 1.0);
            for j in 1..=2 {
                let placement = self.physical_placement(j, rho1, rho2);
                let gap = node_gap(cfg.hole(j), placement, &cfg.outer, Placement::IDENTITY, m);
                let need = SEPARATION_SPACINGS * outer_spacing.max(spacing(&self.holes[j - 1], rho1 * rho2));
                if gap < need {
                    return Err(Error::InvalidParameter(format!(
                        "hole {j} is {gap:e} from the outer curve, closer than {SEPARATION_SPACINGS} node spacings"
                    )));
                }
            }
        }
        Ok(())
    }
}

fn half_plus(mut k: DMatrix<f64>) -> DMatrix<f64> {
    for d in 0..k.nrows() {
        k[(d, d)] += 0.5;
    }
    k
}

#[derive(Clone, Debug)]
pub struct LambdaSystem {
    pub rho1: f64,
    pub rho2: f64,
    pub matrix: DMatrix<f64>,
    pub rhs: DVector<f64>,
}

/// Assembles the system at admissible `rho1, rho2 >= 0`.
pub fn assemble_lambda(prep: &PreparedConfig, rho1: f64, rho2: f64) -> Result<LambdaSystem> {
    prep.check_parameters(rho1, rho2, false)?;
    build_lambda(prep, rho1, rho2)
}

/// Same system for signed parameters, continuing the formulas analytically.
pub fn assemble_lambda_signed(prep: &PreparedConfig, rho1: f64, rho2: f64) -> Result<LambdaSystem> {
    prep.check_parameters(rho1, rho2, true)?;
    build_lambda(prep, rho1, rho2)
}

fn build_lambda(prep: &PreparedConfig, rho1: f64, rho2: f64) -> Result<LambdaSystem> {
    let cfg = &prep.config;
    let m = prep.m();
    let size = 3 * m + 1;
    let mut a = DMatrix::zeros(size, size);
    let mut rhs = DVector::zeros(size);

    // Hole rows: the exterior Neumann trace, in reference coordinates.
    for j in 1..=2 {
        let l = 3 - j;
        let (r0, own, other) = ((j - 1) * m, (j - 1) * m, (l - 1) * m);
        let reference = &prep.holes[j - 1];
        a.view_mut((r0, own), (m, m)).copy_from(prep.hole_operator(j));

        // rho2^(n-1) with n = 2 enters through the source measure.
        let targets = Boundary::new(cfg.hole(j), prep.micro_placement(j, rho2), &prep.rule);
        let source = Boundary::new(cfg.hole(l), prep.micro_placement(l, rho2), &prep.rule);
        let cross = adjoint_double_layer_at(&targets.points, &reference.normals, &source)
            .map_err(|_| Error::CurvesIntersect)?;
        a.view_mut((r0, other), (m, m)).copy_from(&cross);

        let targets = Boundary::new(cfg.hole(j), prep.physical_placement(j, rho1, rho2), &prep.rule);
        let to_outer = adjoint_double_layer_at(&targets.points, &reference.normals, &prep.outer)
            .map_err(|_| Error::CurvesIntersect)?;
        a.view_mut((r0, 2 * m), (m, m)).copy_from(&to_outer);
        rhs.rows_mut(r0, m).copy_from_slice(&prep.f[j - 1]);
    }

    // Outer rows: the Dirichlet trace. The (rho1 rho2)^(n-1) prefactor on
    // the hole layers enters through the source measure.
    let r0 = 2 * m;
    for j in 1..=2 {
        let source = Boundary::new(cfg.hole(j), prep.physical_placement(j, rho1, rho2), &prep.rule);
        let block = single_layer_at(&prep.outer.points, &source).map_err(|_| Error::CurvesIntersect)?;
        a.view_mut((r0, (j - 1) * m), (m, m)).copy_from(&block);
    }
    a.view_mut((r0, 2 * m), (m, m)).copy_from(prep.outer_single_layer());
    a.view_mut((r0, size - 1), (m, 1)).fill(1.0);
    rhs.rows_mut(r0, m).copy_from_slice(&prep.g);

    for k in 0..m {
        a[(size - 1, 2 * m + k)] = prep.outer.measure[k];
    }
    Ok(LambdaSystem {
        rho1,
        rho2,
        matrix: a,
        rhs,
    })
}

/// Solution of the system at one parameter pair.
#[derive(Clone, Debug)]
pub struct DensityQuadruple {
    pub rho1: f64,
    pub rho2: f64,
    pub theta_i1: BoundaryDensity,
    pub theta_i2: BoundaryDensity,
    pub theta_o: BoundaryDensity,
    pub xi: f64,
    pub condition: f64,
    /// `integral theta_j - integral f_j` for `j = 1, 2`.
    pub flux_defect: [f64; 2],
}

impl DensityQuadruple {
    pub fn theta_i(&self, j: usize) -> &BoundaryDensity {
        match j {
            1 => &self.theta_i1,
            2 => &self.theta_i2,
            _ => panic!("hole index must be 1 or 2, got {j}"),
        }
    }

    /// All unknowns stacked as `[theta_1, theta_2, theta_o, xi]`.
    pub fn stacked(&self) -> DVector<f64> {
        let mut v: Vec<f64> = self.theta_i1.values.clone();
        v.extend_from_slice(&self.theta_i2.values);
        v.extend_from_slice(&self.theta_o.values);
        v.push(self.xi);
        DVector::from_vec(v)
    }

    fn from_stacked(prep: &PreparedConfig, rho1: f64, rho2: f64, x: &[f64], condition: f64) -> Result<Self> {
        let m = prep.m();
        let theta_i1 = BoundaryDensity::new(x[..m].to_vec());
        let theta_i2 = BoundaryDensity::new(x[m..2 * m].to_vec());
        let theta_o = BoundaryDensity::mean_zero(x[2 * m..3 * m].to_vec(), &prep.outer)?;
        let flux_defect = [
            prep.holes[0].integrate(&theta_i1.values) - prep.f_integrals[0],
            prep.holes[1].integrate(&theta_i2.values) - prep.f_integrals[1],
        ];
        for (j, defect) in flux_defect.iter().enumerate() {
            if defect.abs() > FLUX_TOLERANCE {
                return Err(Error::Invariant(format!(
                    "flux of theta_{} differs from the data flux by {defect:e} at ({rho1}, {rho2})",
                    j + 1
                )));
            }
        }
        Ok(Self {
            rho1,
            rho2,
            theta_i1,
            theta_i2,
            theta_o,
            xi: x[3 * m],
            condition,
            flux_defect,
        })
    }
}

pub fn solve_densities(prep: &PreparedConfig, rho1: f64, rho2: f64) -> Result<DensityQuadruple> {
    let system = assemble_lambda(prep, rho1, rho2)?;
    solve_system(prep, &system)
}

/// [`solve_densities`] for signed parameters.
pub fn solve_densities_signed(prep: &PreparedConfig, rho1: f64, rho2: f64) -> Result<DensityQuadruple> {
    let system = assemble_lambda_signed(prep, rho1, rho2)?;
    solve_system(prep, &system)
}

fn solve_system(prep: &PreparedConfig, system: &LambdaSystem) -> Result<DensityQuadruple> {
    let solved = solve_dense(&system.matrix, &system.rhs)?;
    DensityQuadruple::from_stacked(
        prep,
        system.rho1,
        system.rho2,
        solved.solution.as_slice(),
        solved.condition,
    )
}

/// The limit quadruple at `(0, r_star)`, whose outer part gives the
/// unperturbed solution `v[theta_o] + xi`.
pub fn solve_limit_quadruple(prep: &PreparedConfig) -> Result<DensityQuadruple> {
    solve_densities(prep, 0.0, prep.config.r_star)
}

/// Solves the system at a fixed parameter pair for several right-hand
/// sides `[f_1; f_2; g; 0]` at once.
pub fn solve_with_data(
    prep: &PreparedConfig,
    rho1: f64,
    rho2: f64,
    rhs: &DMatrix<f64>,
) -> Result<(DMatrix<f64>, f64)> {
    let system = assemble_lambda_signed(prep, rho1, rho2)?;
    solve_dense_multi(&system.matrix, rhs)
}

/// Largest tested rectangle `[0, a] x [max(0, r* - b), r* + b]` on which
/// every grid point passes the geometric checks, the separation margin and
/// a solve with the flux invariant.
#[derive(Clone, Debug, PartialEq)]
pub struct AdmissibleRectangle {
    pub rho1_max: f64,
    pub rho2_halfwidth: f64,
}

pub fn admissible_rectangle(prep: &PreparedConfig, steps: &[f64]) -> AdmissibleRectangle {
    let r_star = prep.config.r_star;
    let mut best = AdmissibleRectangle {
        rho1_max: 0.0,
        rho2_halfwidth: 0.0,
    };
    let mut sorted: Vec<f64> = steps.iter().copied().filter(|s| *s > 0.0).collect();
    sorted.sort_by(f64::total_cmp);
    let ok = |r1: f64, r2: f64| r2 >= 0.0 && solve_densities(prep, r1, r2).is_ok();
    for &s in &sorted {
        let corners = [
            (s, r_star),
            (0.0, r_star + s),
            (s, r_star + s),
            (0.0, (r_star - s).max(0.0)),
            (s, (r_star - s).max(0.0)),
        ];
        if corners.iter().all(|&(a, b)| ok(a, b)) {
            best = AdmissibleRectangle {
                rho1_max: s,
                rho2_halfwidth: s,
            };
        } else {
            break;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::DataFunction;
    use crate::geometry::{make_circle, Point};
    use approx::assert_abs_diff_eq;

    fn prep_with(f: impl FnOnce(&mut ProblemConfig)) -> PreparedConfig {
        let mut config = ProblemConfig::default_two_holes().with_nodes(64);
        f(&mut config);
        PreparedConfig::new(&config).unwrap()
    }

    #[test]
    fn square_system() {
        let prep = prep_with(|_| {});
        for (a, b) in [(0.0, 0.0), (0.1, 0.2), (0.2, 0.3)] {
            let s = assemble_lambda(&prep, a, b).unwrap();
            assert_eq!(s.matrix.shape(), (3 * 64 + 1, 3 * 64 + 1));
        }
    }

    #[test]
    fn degenerate_blocks_vanish() {
        let prep = prep_with(|_| {});
        let s = assemble_lambda(&prep, 0.0, 0.0).unwrap();
        let m = 64;
        assert!(s.matrix.view((0, m), (m, m)).iter().all(|v| *v == 0.0));
        assert!(s.matrix.view((m, 0), (m, m)).iter().all(|v| *v == 0.0));
        assert!(s.matrix.view((2 * m, 0), (m, 2 * m)).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn cross_block_matches_placed_double_layer() {
        let prep = prep_with(|c| {
            c.hole2 = make_circle(Point::zeros(), 1.0).unwrap();
            c.p1 = [-0.5, 0.0];
            c.p2 = [0.5, 0.0];
            c.r_star = 0.3;
        });
        let m = 64;
        let s = assemble_lambda(&prep, 0.0, 0.3).unwrap();
        let direct = crate::potentials::assemble_adjoint_double_layer(
            &prep.config.hole1,
            Placement::new(Point::new(-0.5, 0.0), 0.3),
            &prep.config.hole2,
            Placement::new(Point::new(0.5, 0.0), 0.3),
            &prep.rule,
        )
        .unwrap();
        // the physical operator carries the source measure 0.3 |s'|, the
        // reference one 0.3 |s'| as well; entries coincide
        let block = s.matrix.view((0, m), (m, m));
        assert!((block - &direct).amax() < 1e-12);
    }

    #[test]
    fn constant_dirichlet_limit() {
        let prep = prep_with(|c| {
            c.g = DataFunction::Constant { value: 2.5 };
            c.f1 = DataFunction::Constant { value: 0.0 };
            c.f2 = DataFunction::Constant { value: 0.0 };
        });
        let q = solve_limit_quadruple(&prep).unwrap();
        assert_abs_diff_eq!(q.xi, 2.5, epsilon = 1e-12);
        assert!(q.theta_o.sup_norm() < 1e-12);
        assert!(q.theta_i1.sup_norm() < 1e-12 && q.theta_i2.sup_norm() < 1e-12);
    }

    #[test]
    fn zero_flux_data_at_origin_decouples() {
        let prep = prep_with(|c| {
            c.g = DataFunction::Constant { value: 0.0 };
            c.f1 = DataFunction::fourier(0.0, &[(2, 1.0, 0.5)]);
        });
        let q = solve_densities(&prep, 0.0, 0.0).unwrap();
        assert!(q.theta_o.sup_norm() < 1e-12);
        assert!(q.xi.abs() < 1e-12);
        for j in 1..=2 {
            let single = crate::linalg::solve_dense(
                prep.hole_operator(j),
                &DVector::from_vec(prep.f[j - 1].clone()),
            )
            .unwrap();
            let diff = (&single.solution - DVector::from_vec(q.theta_i(j).values.clone())).amax();
            assert!(diff < 1e-12, "hole {j}: {diff:e}");
        }
    }

    #[test]
    fn flux_identity_generic() {
        let prep = prep_with(|_| {});
        let q = solve_densities(&prep, 0.1, 0.1).unwrap();
        for (j, d) in q.flux_defect.iter().enumerate() {
            assert!(d.abs() < 1e-10, "hole {}: {d:e}", j + 1);
        }
    }

    #[test]
    fn inadmissible_parameters_refused() {
        let prep = prep_with(|_| {});
        assert!(matches!(solve_densities(&prep, 0.0, 0.7), Err(Error::Geometry(_))));
        assert!(matches!(solve_densities(&prep, -0.1, 0.0), Err(Error::Geometry(_))));
        assert!(solve_densities_signed(&prep, -0.01, -0.01).is_ok());
    }

    #[test]
    fn limit_continuity_in_r_star() {
        let at = |r: f64| {
            let prep = prep_with(|c| c.r_star = r);
            solve_limit_quadruple(&prep).unwrap()
        };
        let q0 = at(0.0);
        let d1 = (at(0.1).stacked() - q0.stacked()).amax();
        let d2 = (at(0.01).stacked() - q0.stacked()).amax();
        assert!(d2 < d1 / 5.0, "{d1:e} {d2:e}");
    }

    #[test]
    fn admissible_rectangle_reported() {
        let prep = prep_with(|_| {});
        let r = admissible_rectangle(&prep, &[0.05, 0.1, 0.2, 0.4, 0.8]);
        assert!(r.rho1_max >= 0.2 && r.rho1_max < 0.8, "{r:?}");
    }
}
