//! Energy functionals and weak gradients for the two applications.
//!
//! * indefinite Schrödinger: `E(u) = ½∫(|∇u|² + V u²) − (1/p)∫|u|^p`
//! * competing-species system: `E(u) = ½Σ∫|∇uᵢ|² − ∫F(u)` with
//!   `F(u) = ¼Σ μᵢuᵢ⁴ + ½Σ_{i<j} βᵢⱼ uᵢ² uⱼ²`

use crate::error::{MpaError, Result};
use crate::fem::{assemble_weighted_mass, CsrMatrix, Dual, Field, P1Space};
use crate::spectral::{negative_eigenspace_from_operators, EigenMethod, SpectralBasis};
use crate::fem::assemble_mass;

/// A C¹ functional on `H¹₀(Ω; ℝᵏ)` discretized on a P1 space.
pub trait Problem {
    fn space(&self) -> &P1Space;

    fn components(&self) -> usize;

    /// Energy and, on request, the weak residual `dE(u)[φⱼ]`.
    fn evaluate(&self, u: &Field, want_gradient: bool) -> Result<(f64, Option<Dual>)>;

    fn energy(&self, u: &Field) -> Result<f64> {
        self.evaluate(u, false).map(|r| r.0)
    }

    fn weak_gradient(&self, u: &Field) -> Result<Dual> {
        self.evaluate(u, true)
            .map(|r| r.1.expect("gradient was requested"))
    }

    /// Riesz representer of `dE(u)` in the H¹₀ inner product.
    fn gradient(&self, u: &Field) -> Result<Field> {
        self.space().riesz_gradient(&self.weak_gradient(u)?)
    }

    fn check_shape(&self, u: &Field) -> Result<()> {
        if u.components() != self.components() || u.dofs() != self.space().dofs() {
            return Err(MpaError::InvalidArgument(format!(
                "field has {}x{} coefficients, problem expects {}x{}",
                u.components(),
                u.dofs(),
                self.components(),
                self.space().dofs()
            )));
        }
        Ok(())
    }
}

fn quadratic_part(k: &CsrMatrix, u: &Field, want_gradient: bool) -> (f64, Option<Vec<Vec<f64>>>) {
    let mut energy = 0.0;
    let mut grads = want_gradient.then(Vec::new);
    for c in u.iter() {
        let kc = k.mul_vec(c);
        energy += 0.5 * crate::fem::dot(c, &kc);
        if let Some(g) = grads.as_mut() {
            g.push(kc);
        }
    }
    (energy, grads)
}

fn combine(quad: (f64, Option<Vec<Vec<f64>>>), nonlinear: (f64, Option<Dual>)) -> Result<(f64, Option<Dual>)> {
    let energy = quad.0 - nonlinear.0;
    if !energy.is_finite() {
        return Err(MpaError::NumericOverflow("energy is not finite".into()));
    }
    let grad = match (quad.1, nonlinear.1) {
        (Some(mut q), Some(n)) => {
            for (qc, nc) in q.iter_mut().zip(n.into_components()) {
                qc.iter_mut().zip(nc).for_each(|(a, b)| *a -= b);
            }
            Some(Dual::new(q))
        }
        _ => None,
    };
    Ok((energy, grad))
}

/// `−Δu + V u = |u|^{p−2} u` with homogeneous Dirichlet data, `0` in a
/// spectral gap of `−Δ + V`.
#[derive(Debug, Clone)]
pub struct IndefiniteProblem {
    space: P1Space,
    potential: f64,
    exponent: f64,
    /// `A + B_V`
    operator: CsrMatrix,
    weighted_mass: CsrMatrix,
    spectral: SpectralBasis,
}

impl IndefiniteProblem {
    /// Constant potential `V`; computes the negative eigenspace up front and
    /// fails if `0` is (numerically) an eigenvalue.
    pub fn new(space: P1Space, potential: f64, exponent: f64, method: EigenMethod) -> Result<Self> {
        if !(exponent > 2.0) || !exponent.is_finite() {
            return Err(MpaError::InvalidArgument(format!(
                "exponent must satisfy 2 < p < ∞, got {exponent}"
            )));
        }
        if !potential.is_finite() {
            return Err(MpaError::InvalidArgument("potential must be finite".into()));
        }
        let weighted_mass = assemble_weighted_mass(space.mesh(), |_, _| potential)?;
        let mass = assemble_mass(space.mesh());
        let spectral =
            negative_eigenspace_from_operators(space.stiffness(), &weighted_mass, &mass, method)?;
        let operator = space.stiffness().add_scaled(1.0, &weighted_mass);
        Ok(Self {
            space,
            potential,
            exponent,
            operator,
            weighted_mass,
            spectral,
        })
    }

    pub fn potential(&self) -> f64 {
        self.potential
    }

    pub fn exponent(&self) -> f64 {
        self.exponent
    }

    pub fn spectral(&self) -> &SpectralBasis {
        &self.spectral
    }

    /// `A + B_V`
    pub fn operator(&self) -> &CsrMatrix {
        &self.operator
    }

    pub fn weighted_mass(&self) -> &CsrMatrix {
        &self.weighted_mass
    }
}

impl Problem for IndefiniteProblem {
    fn space(&self) -> &P1Space {
        &self.space
    }

    fn components(&self) -> usize {
        1
    }

    fn evaluate(&self, u: &Field, want_gradient: bool) -> Result<(f64, Option<Dual>)> {
        self.check_shape(u)?;
        let quad = quadratic_part(&self.operator, u, want_gradient);
        let p = self.exponent;
        let nonlinear = if p == 4.0 {
            self.space.nonlinear_sweep(u, want_gradient, |v, g| {
                let s = v[0];
                let s2 = s * s;
                g[0] = s2 * s;
                0.25 * s2 * s2
            })?
        } else {
            self.space.nonlinear_sweep(u, want_gradient, |v, g| {
                let s = v[0];
                let a = s.abs().powf(p - 2.0);
                g[0] = a * s;
                a * s * s / p
            })?
        };
        combine(quad, nonlinear)
    }
}

/// `−Δuᵢ = μᵢuᵢ³ + uᵢ Σ_{j≠i} βᵢⱼ uⱼ²`, `uᵢ = 0` on the boundary.
#[derive(Debug, Clone)]
pub struct SystemProblem {
    space: P1Space,
    mu: Vec<f64>,
    /// symmetric, zero diagonal, row-major `k × k`
    beta: Vec<f64>,
}

impl SystemProblem {
    pub fn new(space: P1Space, mu: Vec<f64>, beta: Vec<Vec<f64>>) -> Result<Self> {
        let k = mu.len();
        if k == 0 {
            return Err(MpaError::InvalidArgument("system needs at least one component".into()));
        }
        if let Some(m) = mu.iter().find(|m| !(**m > 0.0) || !m.is_finite()) {
            return Err(MpaError::InvalidArgument(format!("μ must be positive, got {m}")));
        }
        if beta.len() != k || beta.iter().any(|r| r.len() != k) {
            return Err(MpaError::InvalidArgument(format!("β must be {k}x{k}")));
        }
        for i in 0..k {
            if beta[i][i] != 0.0 {
                return Err(MpaError::InvalidArgument("β must have a zero diagonal".into()));
            }
            for j in 0..k {
                if beta[i][j] != beta[j][i] || !beta[i][j].is_finite() {
                    return Err(MpaError::InvalidArgument("β must be symmetric and finite".into()));
                }
            }
        }
        Ok(Self {
            space,
            mu,
            beta: beta.into_iter().flatten().collect(),
        })
    }

    /// Two-component convenience constructor.
    pub fn pair(space: P1Space, mu1: f64, mu2: f64, beta12: f64) -> Result<Self> {
        Self::new(space, vec![mu1, mu2], vec![vec![0.0, beta12], vec![beta12, 0.0]])
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn beta(&self, i: usize, j: usize) -> f64 {
        self.beta[i * self.mu.len() + j]
    }

    /// Whether `−√(μ₁μ₂) ≤ βᵢⱼ ≤ 0` holds for every pair, the range in which
    /// the Nehari minimizer is known to have all components nonzero.
    pub fn coupling_in_admissible_range(&self) -> bool {
        let k = self.mu.len();
        (0..k).all(|i| {
            (i + 1..k).all(|j| {
                let b = self.beta(i, j);
                b <= 0.0 && b >= -(self.mu[i] * self.mu[j]).sqrt()
            })
        })
    }
}

impl Problem for SystemProblem {
    fn space(&self) -> &P1Space {
        &self.space
    }

    fn components(&self) -> usize {
        self.mu.len()
    }

    fn evaluate(&self, u: &Field, want_gradient: bool) -> Result<(f64, Option<Dual>)> {
        self.check_shape(u)?;
        let quad = quadratic_part(self.space.stiffness(), u, want_gradient);
        let k = self.mu.len();
        let nonlinear = self.space.nonlinear_sweep(u, want_gradient, |v, g| {
            let mut f = 0.0;
            for i in 0..k {
                let ui2 = v[i] * v[i];
                f += 0.25 * self.mu[i] * ui2 * ui2;
                let mut coupling = 0.0;
                for j in 0..k {
                    if j != i {
                        coupling += self.beta[i * k + j] * v[j] * v[j];
                    }
                }
                // each unordered pair is seen twice
                f += 0.25 * coupling * ui2;
                g[i] = self.mu[i] * ui2 * v[i] + v[i] * coupling;
            }
            f
        })?;
        combine(quad, nonlinear)
    }
}

/// The eight symmetries of the square.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SquareSymmetry {
    Identity,
    Rotate90,
    Rotate180,
    Rotate270,
    ReflectX,
    ReflectY,
    ReflectDiagonal,
    ReflectAntiDiagonal,
}

impl SquareSymmetry {
    pub const ALL: [SquareSymmetry; 8] = [
        Self::Identity,
        Self::Rotate90,
        Self::Rotate180,
        Self::Rotate270,
        Self::ReflectX,
        Self::ReflectY,
        Self::ReflectDiagonal,
        Self::ReflectAntiDiagonal,
    ];

    /// Image of grid point `(i, j)` on an `n`-subdivision grid.
    pub fn map(self, i: usize, j: usize, n: usize) -> (usize, usize) {
        match self {
            Self::Identity => (i, j),
            Self::Rotate90 => (n - j, i),
            Self::Rotate180 => (n - i, n - j),
            Self::Rotate270 => (j, n - i),
            Self::ReflectX => (n - i, j),
            Self::ReflectY => (i, n - j),
            Self::ReflectDiagonal => (j, i),
            Self::ReflectAntiDiagonal => (n - j, n - i),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Identity => "identity",
            Self::Rotate90 => "rot90",
            Self::Rotate180 => "rot180",
            Self::Rotate270 => "rot270",
            Self::ReflectX => "reflect_x",
            Self::ReflectY => "reflect_y",
            Self::ReflectDiagonal => "reflect_diag",
            Self::ReflectAntiDiagonal => "reflect_antidiag",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SymmetryDefect {
    pub symmetry: SquareSymmetry,
    /// `‖u − u∘σ‖_H / ‖u‖_H`
    pub even: f64,
    /// `‖u + u∘σ‖_H / ‖u‖_H`
    pub odd: f64,
}

#[derive(Debug, Clone)]
pub struct SymmetryReport {
    pub defects: Vec<SymmetryDefect>,
    pub nodal_domains: usize,
}

impl SymmetryReport {
    pub fn defect(&self, s: SquareSymmetry) -> &SymmetryDefect {
        self.defects.iter().find(|d| d.symmetry == s).expect("all symmetries present")
    }

    pub fn max_even_defect(&self) -> f64 {
        self.defects.iter().map(|d| d.even).fold(0.0, f64::max)
    }
}

/// Composes a scalar DOF vector with a square symmetry (vertices map to
/// vertices on the structured grid, so this is a permutation).
pub fn compose_with(space: &P1Space, u: &[f64], s: SquareSymmetry) -> Vec<f64> {
    let mesh = space.mesh();
    let n = mesh.subdivisions();
    (0..space.dofs())
        .map(|d| {
            let (i, j) = mesh.grid_index(mesh.vertex_of_dof(d));
            let (si, sj) = s.map(i, j, n);
            let img = mesh.dof_of_vertex(mesh.vertex_at(si, sj)).expect("symmetries keep interior vertices interior");
            u[img]
        })
        .collect()
}

/// Symmetry defects for all eight symmetries plus the nodal-domain count.
pub fn symmetry_report(space: &P1Space, u: &[f64]) -> SymmetryReport {
    let a = space.stiffness();
    let norm = a.form(u, u).sqrt();
    let defects = SquareSymmetry::ALL
        .iter()
        .map(|&s| {
            let v = compose_with(space, u, s);
            let diff: Vec<f64> = u.iter().zip(&v).map(|(x, y)| x - y).collect();
            let sum: Vec<f64> = u.iter().zip(&v).map(|(x, y)| x + y).collect();
            let rel = |w: &[f64]| if norm > 0.0 { a.form(w, w).sqrt() / norm } else { 0.0 };
            SymmetryDefect {
                symmetry: s,
                even: rel(&diff),
                odd: rel(&sum),
            }
        })
        .collect();
    SymmetryReport {
        defects,
        nodal_domains: nodal_domains(space, u),
    }
}

/// Connected components of `{u > 0}` and `{u < 0}` over the vertex graph.
/// Values below `1e-8 max|u|` count as zero and join no domain.
pub fn nodal_domains(space: &P1Space, u: &[f64]) -> usize {
    let mesh = space.mesh();
    let big = u.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let sign: Vec<i8> = mesh
        .vertex_values(u)
        .iter()
        .map(|&v| {
            if v > 1e-8 * big {
                1
            } else if v < -1e-8 * big {
                -1
            } else {
                0
            }
        })
        .collect();
    let nv = sign.len();
    let mut parent: Vec<usize> = (0..nv).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for (a, b) in mesh.edges() {
        if sign[a] != 0 && sign[a] == sign[b] {
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            if ra != rb {
                parent[ra.max(rb)] = ra.min(rb);
            }
        }
    }
    (0..nv).filter(|&v| sign[v] != 0 && find(&mut parent, v) == v).count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Mesh;

    fn space(n: usize) -> P1Space {
        P1Space::new(Mesh::structured(n).unwrap()).unwrap()
    }

    #[test]
    fn zero_field() {
        let p = IndefiniteProblem::new(space(6), -21.0, 4.0, EigenMethod::Auto).unwrap();
        let u = Field::zeros(1, p.space().dofs());
        let (e, g) = p.evaluate(&u, true).unwrap();
        assert_eq!(e, 0.0);
        assert!(g.unwrap().component(0).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn exponent_validated() {
        assert!(IndefiniteProblem::new(space(4), 0.0, 2.0, EigenMethod::Auto).is_err());
        assert!(SystemProblem::pair(space(4), 1.0, -4.0, 0.0).is_err());
        assert!(SystemProblem::new(space(4), vec![1.0, 1.0], vec![vec![0.0, 1.0], vec![2.0, 0.0]]).is_err());
    }

    #[test]
    fn admissible_range_flag() {
        let s = |b| SystemProblem::pair(space(3), 1.0, 4.0, b).unwrap().coupling_in_admissible_range();
        assert!(s(-1.0));
        assert!(s(0.0));
        assert!(s(-2.0));
        assert!(!s(-2.1));
        assert!(!s(0.5));
        assert!(!s(1.2));
    }

    #[test]
    fn decoupled_energy_is_additive() {
        let sp = space(8);
        let u1 = sp.mesh().interpolate(|x, y| x * y * (1.0 - x) * (1.0 - y) * 9.0).unwrap();
        let u2 = sp.mesh().interpolate(|x, y| (x * (1.0 - x)).powi(2) * y * (1.0 - y) * 20.0).unwrap();
        let sys = SystemProblem::pair(sp.clone(), 1.0, 4.0, 0.0).unwrap();
        let e1 = SystemProblem::new(sp.clone(), vec![1.0], vec![vec![0.0]]).unwrap();
        let e2 = SystemProblem::new(sp.clone(), vec![4.0], vec![vec![0.0]]).unwrap();
        let both = Field::new(vec![u1.component(0).to_vec(), u2.component(0).to_vec()]);
        let total = sys.energy(&both).unwrap();
        let parts = e1.energy(&u1).unwrap() + e2.energy(&u2).unwrap();
        assert!((total - parts).abs() < 1e-13 * parts.abs().max(1.0));
    }

    #[test]
    fn vanishing_component_has_zero_residual() {
        let sp = space(7);
        let u1 = sp.mesh().interpolate(|x, y| 16.0 * x * y * (1.0 - x) * (1.0 - y)).unwrap();
        let u = Field::new(vec![u1.component(0).to_vec(), vec![0.0; sp.dofs()]]);
        let sys = SystemProblem::pair(sp, 1.0, 4.0, -1.0).unwrap();
        let r = sys.weak_gradient(&u).unwrap();
        assert!(r.component(1).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn odd_diagonal_function() {
        let sp = space(10);
        let pi = std::f64::consts::PI;
        let u = sp
            .mesh()
            .interpolate(|x, y| (pi * x).sin() * (2.0 * pi * y).sin() - (2.0 * pi * x).sin() * (pi * y).sin())
            .unwrap();
        let rep = symmetry_report(&sp, u.component(0));
        let d = rep.defect(SquareSymmetry::ReflectDiagonal);
        assert!((d.even - 2.0).abs() < 1e-12);
        assert!(d.odd < 1e-12);
        assert_eq!(rep.nodal_domains, 2);
        assert!(rep.defect(SquareSymmetry::Identity).even == 0.0);
    }

    #[test]
    fn symmetric_bump() {
        let sp = space(9);
        let u = sp.mesh().interpolate(|x, y| x * y * (1.0 - x) * (1.0 - y)).unwrap();
        let rep = symmetry_report(&sp, u.component(0));
        assert!(rep.max_even_defect() < 1e-14);
        assert_eq!(rep.nodal_domains, 1);
        assert_eq!(u.max(), vec![u.component(0).iter().copied().fold(0.0, f64::max)]);
        let mesh2 = Mesh::structured(2).unwrap();
        assert_eq!(mesh2.interpolate(|x, y| x * y * (1.0 - x) * (1.0 - y)).unwrap().max(), vec![1.0 / 16.0]);
        assert_eq!(Field::zeros(2, 4).max(), vec![0.0, 0.0]);
    }

    #[test]
    fn four_cell_pattern() {
        let sp = space(12);
        let pi = std::f64::consts::PI;
        let u = sp.mesh().interpolate(|x, y| (2.0 * pi * x).sin() * (2.0 * pi * y).sin()).unwrap();
        assert_eq!(nodal_domains(&sp, u.component(0)), 4);
    }
}
