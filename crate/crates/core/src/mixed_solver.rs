//! Mixed Neumann/Dirichlet problem on a domain with holes: Neumann data on
//! the hole boundaries, Dirichlet data on the outer boundary.
//!
//! The solution is sought as a sum of single layers, one per hole and one
//! mean-zero layer on the outer boundary, plus a constant `xi`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::geometry::{closure_inside, closures_disjoint, ParametrizedCurve, Placement, Point};
use crate::linalg::solve_dense;
use crate::potentials::{
    adjoint_double_layer_at, adjoint_double_layer_self, assemble_single_layer_self,
    single_layer_at, Boundary, BoundaryDensity,
};
use crate::quadrature::PeriodicRule;
use crate::representation::{HarmonicField, LayerTerm, TermRole};

/// One hole: a reference curve carried to `offset + scale * curve`, `scale > 0`.
#[derive(Clone, Debug)]
pub struct InnerComponent {
    pub curve: ParametrizedCurve,
    pub placement: Placement,
}

impl InnerComponent {
    pub fn new(curve: ParametrizedCurve, placement: Placement) -> Self {
        Self { curve, placement }
    }
}

/// The assembled square system and its right-hand side. Unknowns are ordered
/// as the hole densities, the outer density, then `xi`.
#[derive(Clone, Debug)]
pub struct MixedSystem {
    pub matrix: DMatrix<f64>,
    pub rhs: DVector<f64>,
}

impl MixedSystem {
    /// `||A x - b||_inf / max(||b||_inf, 1)`.
    pub fn relative_residual(&self, x: &DVector<f64>) -> f64 {
        let r = &self.matrix * x - &self.rhs;
        r.amax() / self.rhs.amax().max(1.0)
    }
}

#[derive(Clone, Debug)]
pub struct MixedSolution {
    pub inner: Vec<Boundary>,
    pub outer: Boundary,
    pub inner_densities: Vec<BoundaryDensity>,
    pub outer_density: BoundaryDensity,
    pub xi: f64,
    pub condition: f64,
    pub system: MixedSystem,
    pub unknowns: DVector<f64>,
}

impl MixedSolution {
    pub fn residual(&self) -> f64 {
        self.system.relative_residual(&self.unknowns)
    }

    pub fn field(&self) -> HarmonicField {
        let mut terms: Vec<LayerTerm> = self
            .inner
            .iter()
            .zip(&self.inner_densities)
            .map(|(b, d)| LayerTerm::new(b.clone(), d.values.clone(), b.placement.scale, TermRole::Hole))
            .collect();
        terms.push(LayerTerm::new(
            self.outer.clone(),
            self.outer_density.values.clone(),
            1.0,
            TermRole::Outer,
        ));
        HarmonicField::new(terms, self.xi)
    }

    /// Dirichlet trace at the outer nodes, read off the assembled rows.
    pub fn dirichlet_trace(&self) -> Vec<f64> {
        let n_inner: usize = self.inner.iter().map(Boundary::len).sum();
        let applied = &self.system.matrix * &self.unknowns;
        applied.as_slice()[n_inner..n_inner + self.outer.len()].to_vec()
    }

    /// Neumann trace `(1/2 + K*) mu + cross terms` at the nodes of hole `j`.
    pub fn neumann_trace(&self, j: usize) -> Vec<f64> {
        let offset: usize = self.inner[..j].iter().map(Boundary::len).sum();
        let applied = &self.system.matrix * &self.unknowns;
        applied.as_slice()[offset..offset + self.inner[j].len()].to_vec()
    }
}

fn check_placements(inner: &[InnerComponent], outer: &ParametrizedCurve) -> Result<()> {
    for (a, comp) in inner.iter().enumerate() {
        if !(comp.placement.scale > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "hole {} needs a positive scale, got {}",
                a + 1,
                comp.placement.scale
            )));
        }
        if !closure_inside(&comp.curve, comp.placement, outer) {
            return Err(Error::Config(format!("hole {} is not inside the outer curve", a + 1)));
        }
        for other in &inner[a + 1..] {
            if !closures_disjoint(&comp.curve, comp.placement, &other.curve, other.placement) {
                return Err(Error::CurvesIntersect);
            }
        }
    }
    Ok(())
}

/// Assembles the mixed system for the given holes and outer curve.
pub fn assemble_mixed(
    inner: &[InnerComponent],
    outer: &ParametrizedCurve,
    phi: &[Vec<f64>],
    gamma: &[f64],
    rule: &PeriodicRule,
) -> Result<(Vec<Boundary>, Boundary, MixedSystem)> {
    let m = rule.len();
    if phi.len() != inner.len() {
        return Err(Error::LengthMismatch {
            expected: inner.len(),
            got: phi.len(),
        });
    }
    for samples in phi.iter().map(Vec::len).chain(std::iter::once(gamma.len())) {
        if samples != m {
            return Err(Error::LengthMismatch { expected: m, got: samples });
        }
    }
    check_placements(inner, outer)?;

    let holes: Vec<Boundary> = inner
        .iter()
        .map(|c| Boundary::new(&c.curve, c.placement, rule))
        .collect();
    let outer_b = Boundary::reference(outer, rule);
    let n = holes.len();
    let size = (n + 1) * m + 1;
    let mut a = DMatrix::zeros(size, size);
    let mut rhs = DVector::zeros(size);

    for (ia, target) in holes.iter().enumerate() {
        let r0 = ia * m;
        for (ib, source) in holes.iter().enumerate() {
            let block = if ia == ib {
                let mut k = adjoint_double_layer_self(source);
                for d in 0..m {
                    k[(d, d)] += 0.5;
                }
                k
            } else {
                adjoint_double_layer_at(&target.points, &target.normals, source)
                    .map_err(|_| Error::CurvesIntersect)?
            };
            a.view_mut((r0, ib * m), (m, m)).copy_from(&block);
        }
        let to_outer = adjoint_double_layer_at(&target.points, &target.normals, &outer_b)?;
        a.view_mut((r0, n * m), (m, m)).copy_from(&to_outer);
        rhs.rows_mut(r0, m).copy_from_slice(&phi[ia]);
    }

    let r0 = n * m;
    for (ib, source) in holes.iter().enumerate() {
        let block = single_layer_at(&outer_b.points, source)?;
        a.view_mut((r0, ib * m), (m, m)).copy_from(&block);
    }
    a.view_mut((r0, n * m), (m, m))
        .copy_from(&assemble_single_layer_self(outer, rule));
    a.view_mut((r0, size - 1), (m, 1)).fill(1.0);
    rhs.rows_mut(r0, m).copy_from_slice(gamma);

    for k in 0..m {
        a[(size - 1, n * m + k)] = outer_b.measure[k];
    }
    Ok((holes, outer_b, MixedSystem { matrix: a, rhs }))
}

/// Solves the mixed problem. `phi[j]` samples the Neumann data at the nodes
/// of hole `j` (normal pointing out of the hole); `gamma` samples the
/// Dirichlet data at the outer nodes.
pub fn solve_mixed(
    inner: &[InnerComponent],
    outer: &ParametrizedCurve,
    phi: &[Vec<f64>],
    gamma: &[f64],
    rule: &PeriodicRule,
) -> Result<MixedSolution> {
    let (holes, outer_b, system) = assemble_mixed(inner, outer, phi, gamma, rule)?;
    let solved = solve_dense(&system.matrix, &system.rhs)?;
    let m = rule.len();
    let x = solved.solution;
    let inner_densities = (0..holes.len())
        .map(|j| BoundaryDensity::new(x.rows(j * m, m).iter().copied().collect()))
        .collect();
    let n = holes.len();
    let outer_density =
        BoundaryDensity::mean_zero(x.rows(n * m, m).iter().copied().collect(), &outer_b)?;
    Ok(MixedSolution {
        inner: holes,
        outer: outer_b,
        inner_densities,
        outer_density,
        xi: x[x.len() - 1],
        condition: solved.condition,
        system,
        unknowns: x,
    })
}

/// Field values at targets inside the outer curve and outside every hole,
/// refusing targets inside any guard band.
pub fn evaluate_mixed_solution(solution: &MixedSolution, targets: &[Point]) -> Result<Vec<f64>> {
    solution.field().eval_many(targets)
}
