//! P1 finite elements on the structured mesh: coefficient fields, operator
//! assembly, nonlinear quadrature and Riesz (Sobolev) gradients.

pub mod quadrature;
pub mod sparse;

use std::io::Write;

use crate::error::{MpaError, Result};
use crate::mesh::Mesh;
pub use quadrature::DEGREE4;
pub use sparse::{solve_spd, solve_with_factor, CsrMatrix, SkylineCholesky};

/// Coefficients of a (vector-valued) P1 function over the interior DOFs.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    comps: Vec<Vec<f64>>,
}

impl Field {
    pub fn new(comps: Vec<Vec<f64>>) -> Self {
        assert!(!comps.is_empty(), "a field needs at least one component");
        let m = comps[0].len();
        assert!(comps.iter().all(|c| c.len() == m), "component lengths differ");
        Self { comps }
    }

    pub fn scalar(values: Vec<f64>) -> Self {
        Self { comps: vec![values] }
    }

    pub fn zeros(k: usize, m: usize) -> Self {
        Self::new(vec![vec![0.0; m]; k])
    }

    pub fn components(&self) -> usize {
        self.comps.len()
    }

    pub fn dofs(&self) -> usize {
        self.comps[0].len()
    }

    pub fn component(&self, i: usize) -> &[f64] {
        &self.comps[i]
    }

    pub fn component_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.comps[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.comps.iter().map(Vec::as_slice)
    }

    pub fn into_components(self) -> Vec<Vec<f64>> {
        self.comps
    }

    /// `self += a * other`
    pub fn axpy(&mut self, a: f64, other: &Field) {
        assert_eq!(self.components(), other.components());
        for (x, y) in self.comps.iter_mut().zip(&other.comps) {
            x.iter_mut().zip(y).for_each(|(x, y)| *x += a * y);
        }
    }

    pub fn scaled(&self, a: f64) -> Field {
        let mut out = self.clone();
        out.comps
            .iter_mut()
            .for_each(|c| c.iter_mut().for_each(|v| *v *= a));
        out
    }

    pub fn sub(&self, other: &Field) -> Field {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    pub fn is_finite(&self) -> bool {
        self.comps.iter().flatten().all(|v| v.is_finite())
    }

    /// Componentwise maximum nodal value, counting the boundary zeros.
    pub fn max(&self) -> Vec<f64> {
        self.comps
            .iter()
            .map(|c| c.iter().copied().fold(0.0, f64::max))
            .collect()
    }

    /// CSV rows `x,y,u1[,u2,...]` over all mesh vertices.
    pub fn write_csv<W: Write>(&self, mesh: &Mesh, mut out: W) -> std::io::Result<()> {
        let cols: Vec<Vec<f64>> = self.comps.iter().map(|c| mesh.vertex_values(c)).collect();
        for (v, [x, y]) in mesh.vertices().iter().enumerate() {
            write!(out, "{x},{y}")?;
            for c in &cols {
                write!(out, ",{}", c[v])?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// Weak residual / load vector: the values `dE(u)[φ_j]` per component.
/// Paired with a [`Field`] through [`Dual::pair`].
#[derive(Debug, Clone, PartialEq)]
pub struct Dual {
    comps: Vec<Vec<f64>>,
}

impl Dual {
    pub fn new(comps: Vec<Vec<f64>>) -> Self {
        Self { comps }
    }

    pub fn components(&self) -> usize {
        self.comps.len()
    }

    pub fn component(&self, i: usize) -> &[f64] {
        &self.comps[i]
    }

    pub fn into_components(self) -> Vec<Vec<f64>> {
        self.comps
    }

    /// Duality pairing `⟨self, v⟩`.
    pub fn pair(&self, v: &Field) -> f64 {
        self.comps
            .iter()
            .zip(v.iter())
            .map(|(r, v)| dot(r, v))
            .sum()
    }

    pub fn pair_component(&self, i: usize, v: &[f64]) -> f64 {
        dot(&self.comps[i], v)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Mesh plus per-triangle DOF lookup and the stiffness operator with its
/// factorization; shared by every functional on the mesh.
#[derive(Debug, Clone)]
pub struct P1Space {
    mesh: Mesh,
    tri_dofs: Vec<[Option<usize>; 3]>,
    areas: Vec<f64>,
    stiffness: CsrMatrix,
    stiffness_chol: SkylineCholesky,
}

impl P1Space {
    pub fn new(mesh: Mesh) -> Result<Self> {
        let tri_dofs = mesh
            .triangles()
            .iter()
            .map(|t| t.map(|v| mesh.dof_of_vertex(v)))
            .collect();
        let areas = (0..mesh.triangles().len())
            .map(|t| mesh.signed_area(t))
            .collect();
        let stiffness = assemble_stiffness(&mesh);
        let stiffness_chol = SkylineCholesky::factor(&stiffness)?;
        Ok(Self {
            mesh,
            tri_dofs,
            areas,
            stiffness,
            stiffness_chol,
        })
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn dofs(&self) -> usize {
        self.mesh.dofs()
    }

    pub fn stiffness(&self) -> &CsrMatrix {
        &self.stiffness
    }

    /// `‖u‖²_H = Σᵢ uᵢᵀ A uᵢ`
    pub fn h_norm_sq(&self, u: &Field) -> f64 {
        u.iter().map(|c| self.stiffness.form(c, c)).sum()
    }

    pub fn h_norm(&self, u: &Field) -> f64 {
        self.h_norm_sq(u).sqrt()
    }

    pub fn h_inner(&self, u: &Field, v: &Field) -> f64 {
        u.iter()
            .zip(v.iter())
            .map(|(a, b)| self.stiffness.form(a, b))
            .sum()
    }

    pub fn h_inner_scalar(&self, u: &[f64], v: &[f64]) -> f64 {
        self.stiffness.form(u, v)
    }

    /// Applies the stiffness operator componentwise, producing a dual vector.
    pub fn apply_stiffness(&self, u: &Field) -> Dual {
        Dual::new(u.iter().map(|c| self.stiffness.mul_vec(c)).collect())
    }

    /// Riesz representer `g` of a weak residual in the H¹₀ inner product:
    /// `A gᵢ = rᵢ` per component.
    pub fn riesz_gradient(&self, residual: &Dual) -> Result<Field> {
        let comps = residual
            .comps
            .iter()
            .map(|r| {
                if r.len() != self.dofs() {
                    return Err(MpaError::InvalidArgument(format!(
                        "residual length {} does not match {} DOFs",
                        r.len(),
                        self.dofs()
                    )));
                }
                solve_with_factor(&self.stiffness, &self.stiffness_chol, r)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Field::new(comps))
    }

    /// One quadrature sweep of a pointwise nonlinearity.
    ///
    /// `density(values, grad)` receives the k nodal-interpolated values at a
    /// quadrature point and returns the integrand; when `want_load` is set it
    /// must also write the k partial derivatives into `grad`, which are then
    /// tested against the hat functions. Returns `(∫ density, load)`.
    pub fn nonlinear_sweep<D>(&self, u: &Field, want_load: bool, density: D) -> Result<(f64, Option<Dual>)>
    where
        D: Fn(&[f64], &mut [f64]) -> f64,
    {
        let k = u.components();
        let m = self.dofs();
        let mut load = want_load.then(|| vec![vec![0.0; m]; k]);
        let mut vals = vec![0.0; k];
        let mut grad = vec![0.0; k];
        let mut local = vec![[0.0; 3]; k];
        let mut total = 0.0;
        for (dofs, &area) in self.tri_dofs.iter().zip(&self.areas) {
            if dofs.iter().all(Option::is_none) {
                continue;
            }
            let mut tri_total = 0.0;
            local.iter_mut().for_each(|l| *l = [0.0; 3]);
            for (lam, w) in DEGREE4.iter() {
                for (c, val) in vals.iter_mut().enumerate() {
                    let comp = u.component(c);
                    *val = dofs
                        .iter()
                        .zip(lam)
                        .map(|(d, l)| d.map_or(0.0, |d| comp[d] * l))
                        .sum();
                }
                let f = density(&vals, &mut grad);
                tri_total += w * f;
                if want_load {
                    for (c, g) in grad.iter().enumerate() {
                        for a in 0..3 {
                            local[c][a] += w * g * lam[a];
                        }
                    }
                }
            }
            total += area * tri_total;
            if let Some(load) = load.as_mut() {
                for (c, l) in local.iter().enumerate() {
                    for (a, d) in dofs.iter().enumerate() {
                        if let Some(d) = d {
                            load[c][*d] += area * l[a];
                        }
                    }
                }
            }
        }
        if !total.is_finite() {
            return Err(MpaError::NumericOverflow(
                "nonlinear integral is not finite".into(),
            ));
        }
        let load = match load {
            Some(l) if l.iter().flatten().any(|v| !v.is_finite()) => {
                return Err(MpaError::NumericOverflow(
                    "nonlinear load vector is not finite".into(),
                ))
            }
            other => other.map(Dual::new),
        };
        Ok((total, load))
    }

    /// `∫ integrand(u)` with the degree-4 rule.
    pub fn integrate<F>(&self, u: &Field, integrand: F) -> Result<f64>
    where
        F: Fn(&[f64]) -> f64,
    {
        self.nonlinear_sweep(u, false, |v, _| integrand(v)).map(|r| r.0)
    }
}

/// Gradients of the barycentric coordinates of a triangle.
fn barycentric_gradients(p: [[f64; 2]; 3]) -> ([[f64; 2]; 3], f64) {
    let [a, b, c] = p;
    let two_area = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
    let g = [
        [(b[1] - c[1]) / two_area, (c[0] - b[0]) / two_area],
        [(c[1] - a[1]) / two_area, (a[0] - c[0]) / two_area],
        [(a[1] - b[1]) / two_area, (b[0] - a[0]) / two_area],
    ];
    (g, 0.5 * two_area)
}

/// Exact P1 stiffness `∫ ∇φᵢ·∇φⱼ` over interior DOFs.
pub fn assemble_stiffness(mesh: &Mesh) -> CsrMatrix {
    let mut triplets = Vec::with_capacity(9 * mesh.triangles().len());
    for tri in mesh.triangles() {
        let (g, area) = barycentric_gradients(tri.map(|v| mesh.vertices()[v]));
        for a in 0..3 {
            let Some(ra) = mesh.dof_of_vertex(tri[a]) else { continue };
            for b in 0..3 {
                let Some(rb) = mesh.dof_of_vertex(tri[b]) else { continue };
                let kab = area * (g[a][0] * g[b][0] + g[a][1] * g[b][1]);
                triplets.push((ra, rb, kab));
            }
        }
    }
    CsrMatrix::from_triplets(mesh.dofs(), triplets, true)
}

/// `∫ V φᵢ φⱼ` with the degree-4 rule on each triangle.
pub fn assemble_weighted_mass<V>(mesh: &Mesh, potential: V) -> Result<CsrMatrix>
where
    V: Fn(f64, f64) -> f64,
{
    let mut triplets = Vec::with_capacity(9 * mesh.triangles().len());
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let p = tri.map(|v| mesh.vertices()[v]);
        let area = mesh.signed_area(t);
        let mut local = [[0.0; 3]; 3];
        for (lam, w) in DEGREE4.iter() {
            let x = lam[0] * p[0][0] + lam[1] * p[1][0] + lam[2] * p[2][0];
            let y = lam[0] * p[0][1] + lam[1] * p[1][1] + lam[2] * p[2][1];
            let v = potential(x, y);
            if !v.is_finite() {
                return Err(MpaError::InvalidInput(format!(
                    "potential is not finite at ({x}, {y})"
                )));
            }
            for a in 0..3 {
                for b in 0..3 {
                    local[a][b] += w * v * lam[a] * lam[b];
                }
            }
        }
        for a in 0..3 {
            let Some(ra) = mesh.dof_of_vertex(tri[a]) else { continue };
            for b in 0..3 {
                let Some(rb) = mesh.dof_of_vertex(tri[b]) else { continue };
                // local[a][b] and local[b][a] are bitwise equal (commutative products)
                triplets.push((ra, rb, area * local[a][b]));
            }
        }
    }
    Ok(CsrMatrix::from_triplets(mesh.dofs(), triplets, true))
}

/// `V ≡ 1` instance of [`assemble_weighted_mass`].
pub fn assemble_mass(mesh: &Mesh) -> CsrMatrix {
    assemble_weighted_mass(mesh, |_, _| 1.0).expect("constant potential is finite")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lcg(seed: u64) -> impl FnMut() -> f64 {
        let mut s = seed;
        move || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        }
    }

    #[test]
    fn stiffness_n2_is_four() {
        let a = assemble_stiffness(&Mesh::structured(2).unwrap());
        assert_eq!(a.dim(), 1);
        assert!((a.get(0, 0) - 4.0).abs() < 1e-15);
    }

    #[test]
    fn stiffness_five_point_stencil() {
        let mesh = Mesh::structured(4).unwrap();
        let a = assemble_stiffness(&mesh);
        let c = mesh.dof_of_vertex(mesh.vertex_at(2, 2)).unwrap();
        let mut row: Vec<(usize, f64)> = a.row(c).filter(|(_, v)| v.abs() > 1e-14).collect();
        row.sort_by_key(|r| r.0);
        let nb: Vec<usize> = [(2, 1), (1, 2), (2, 2), (3, 2), (2, 3)]
            .iter()
            .map(|&(i, j)| mesh.dof_of_vertex(mesh.vertex_at(i, j)).unwrap())
            .collect();
        assert_eq!(row.iter().map(|r| r.0).collect::<Vec<_>>(), nb);
        for (d, v) in row {
            let want = if d == c { 4.0 } else { -1.0 };
            assert!((v - want).abs() < 1e-14);
        }
    }

    #[test]
    fn stiffness_spd_and_symmetric() {
        let mesh = Mesh::structured(9).unwrap();
        let a = assemble_stiffness(&mesh);
        let mut r = lcg(3);
        for _ in 0..5 {
            let x: Vec<f64> = (0..a.dim()).map(|_| r()).collect();
            let y: Vec<f64> = (0..a.dim()).map(|_| r()).collect();
            assert!(a.form(&x, &x) > 0.0);
            let (xy, yx) = (a.form(&x, &y), a.form(&y, &x));
            assert!((xy - yx).abs() <= 1e-13 * xy.abs().max(1.0));
        }
        for i in 0..a.dim() {
            assert!(a.get(i, i) >= 0.0);
            for (j, v) in a.row(i) {
                assert_eq!(v.to_bits(), a.get(j, i).to_bits());
            }
        }
    }

    #[test]
    fn mass_matrix_values() {
        let mesh = Mesh::structured(2).unwrap();
        let m = assemble_mass(&mesh);
        assert!((m.get(0, 0) - 0.125).abs() < 1e-16);
        let zero = assemble_weighted_mass(&mesh, |_, _| 0.0).unwrap();
        assert_eq!(zero.get(0, 0), 0.0);

        let mesh = Mesh::structured(6).unwrap();
        let m = assemble_mass(&mesh);
        let m21 = assemble_weighted_mass(&mesh, |_, _| -21.0).unwrap();
        for i in 0..m.dim() {
            for (j, v) in m.row(i) {
                assert!((m21.get(i, j) + 21.0 * v).abs() <= 1e-15 * 21.0);
            }
        }
        assert!(assemble_weighted_mass(&mesh, |x, _| 1.0 / (x - x)).is_err());
    }

    #[test]
    fn mass_total_matches_interior_indicator() {
        // 1ᵀM1 = ∫w² with w the P1 function equal to 1 on interior vertices;
        // on a triangle with m interior vertices ∫w² = area·{0, 1/6, 1/2, 1}[m]
        for n in [2, 8, 21] {
            let mesh = Mesh::structured(n).unwrap();
            let area = 0.5 * mesh.h() * mesh.h();
            let oracle: f64 = mesh
                .triangles()
                .iter()
                .map(|t| {
                    let m = t.iter().filter(|&&v| !mesh.is_boundary(v)).count();
                    area * [0.0, 1.0 / 6.0, 0.5, 1.0][m]
                })
                .sum();
            let total: f64 = assemble_mass(&mesh).row_sums().iter().sum();
            assert!((total - oracle).abs() < 1e-13, "{total} vs {oracle}");
        }
    }

    #[test]
    fn integrate_quadratic_matches_mass() {
        let mesh = Mesh::structured(2).unwrap();
        let space = P1Space::new(mesh).unwrap();
        let c = 1.7;
        let u = Field::scalar(vec![c]);
        let val = space.integrate(&u, |v| v[0] * v[0]).unwrap();
        assert!((val - c * c / 8.0).abs() < 1e-15);
        let zero = Field::scalar(vec![0.0]);
        assert_eq!(space.integrate(&zero, |v| v[0].powi(4)).unwrap(), 0.0);
    }

    #[test]
    fn overflow_reported() {
        let space = P1Space::new(Mesh::structured(3).unwrap()).unwrap();
        let u = Field::scalar(vec![1e100; 4]);
        assert!(matches!(
            space.integrate(&u, |v| v[0].powi(4)),
            Err(MpaError::NumericOverflow(_))
        ));
    }

    #[test]
    fn riesz_inverts_stiffness() {
        let space = P1Space::new(Mesh::structured(10).unwrap()).unwrap();
        let mut r = lcg(11);
        let m = space.dofs();
        let w = Field::new(vec![(0..m).map(|_| r()).collect(), (0..m).map(|_| r()).collect()]);
        let res = space.apply_stiffness(&w);
        let g = space.riesz_gradient(&res).unwrap();
        let err = space.h_norm(&g.sub(&w)) / space.h_norm(&w);
        assert!(err < 1e-10, "{err}");
        // ‖g‖² equals the pairing of the residual with g
        let lhs = space.h_norm_sq(&g);
        assert!((lhs - res.pair(&g)).abs() <= 1e-12 * lhs);
    }

    #[test]
    fn riesz_componentwise() {
        let space = P1Space::new(Mesh::structured(5).unwrap()).unwrap();
        let m = space.dofs();
        let zero = space.riesz_gradient(&Dual::new(vec![vec![0.0; m]])).unwrap();
        assert!(zero.component(0).iter().all(|&v| v == 0.0));
        let res = Dual::new(vec![vec![1.0; m], vec![0.0; m]]);
        let g = space.riesz_gradient(&res).unwrap();
        assert!(g.component(1).iter().all(|&v| v == 0.0));
        assert!(g.component(0).iter().all(|&v| v > 0.0));
        assert!(space.riesz_gradient(&Dual::new(vec![vec![1.0; m + 1]])).is_err());
    }

    #[test]
    fn stiffness_solve_recovers_known_solution() {
        let mesh = Mesh::structured(4).unwrap();
        let a = assemble_stiffness(&mesh);
        let mut r = lcg(5);
        let y: Vec<f64> = (0..a.dim()).map(|_| r()).collect();
        let x = solve_spd(&a, &a.mul_vec(&y)).unwrap();
        for (xi, yi) in x.iter().zip(&y) {
            assert!((xi - yi).abs() < 1e-10);
        }
    }
}
