//! Oracles shared by the integration tests. Nothing here touches the
//! assembled operators of the library.

#![allow(dead_code)]

use mpa_core::{Field, Mesh};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

/// Gauss–Legendre nodes and weights on [0, 1] by Newton iteration on `Pₙ`.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.push((0.5 * (1.0 + x), 0.5 * w));
    }
    out
}

/// Degree-8-exact rule on the reference triangle via the Duffy map
/// `(ξ, η) ↦ (ξ, η(1 − ξ))` with 5×5 Gauss–Legendre points.
pub fn duffy_rule() -> Vec<(f64, f64, f64)> {
    let g = gauss_legendre(5);
    let mut rule = Vec::new();
    for &(xi, wx) in &g {
        for &(eta, wy) in &g {
            rule.push((xi, eta * (1.0 - xi), wx * wy * (1.0 - xi)));
        }
    }
    rule
}

fn vertex_value(mesh: &Mesh, comp: &[f64], v: usize) -> f64 {
    mesh.dof_of_vertex(v).map_or(0.0, |d| comp[d])
}

/// Per-triangle integration of `density(∇u, u)` with the Duffy rule; `∇u`
/// is the constant gradient of each component on the triangle.
pub fn integrate_oracle<F>(mesh: &Mesh, u: &Field, density: F) -> f64
where
    F: Fn(&[[f64; 2]], &[f64], f64, f64) -> f64,
{
    let rule = duffy_rule();
    let k = u.components();
    let mut total = 0.0;
    let mut grads = vec![[0.0; 2]; k];
    let mut vals = vec![0.0; k];
    for t in mesh.triangles() {
        let p: Vec<[f64; 2]> = t.iter().map(|&v| mesh.vertices()[v]).collect();
        let (e1, e2) = ([p[1][0] - p[0][0], p[1][1] - p[0][1]], [p[2][0] - p[0][0], p[2][1] - p[0][1]]);
        let det = e1[0] * e2[1] - e1[1] * e2[0];
        let nodal: Vec<[f64; 3]> = (0..k)
            .map(|c| {
                let comp = u.component(c);
                [vertex_value(mesh, comp, t[0]), vertex_value(mesh, comp, t[1]), vertex_value(mesh, comp, t[2])]
            })
            .collect();
        for (c, z) in nodal.iter().enumerate() {
            // solve Jᵀ∇u = (z1 − z0, z2 − z0)
            let (d1, d2) = (z[1] - z[0], z[2] - z[0]);
            grads[c] = [(d1 * e2[1] - d2 * e1[1]) / det, (e1[0] * d2 - e2[0] * d1) / det];
        }
        for &(a, b, w) in &rule {
            let x = p[0][0] + a * e1[0] + b * e2[0];
            let y = p[0][1] + a * e1[1] + b * e2[1];
            for (c, z) in nodal.iter().enumerate() {
                vals[c] = z[0] * (1.0 - a - b) + z[1] * a + z[2] * b;
            }
            total += w * det.abs() * density(&grads, &vals, x, y);
        }
    }
    total
}

/// `½∫|∇u|² + ½∫Vu² − ¼∫u⁴`
pub fn indefinite_energy_oracle(mesh: &Mesh, u: &Field, v: f64) -> f64 {
    integrate_oracle(mesh, u, |g, s, _, _| {
        0.5 * (g[0][0] * g[0][0] + g[0][1] * g[0][1]) + 0.5 * v * s[0] * s[0] - 0.25 * s[0].powi(4)
    })
}

/// `½Σ∫|∇uᵢ|² − ¼Σμᵢ∫uᵢ⁴ − ½β∫u₁²u₂²`
pub fn pair_energy_oracle(mesh: &Mesh, u: &Field, mu: [f64; 2], beta: f64) -> f64 {
    integrate_oracle(mesh, u, |g, s, _, _| {
        let kin: f64 = g.iter().map(|gi| 0.5 * (gi[0] * gi[0] + gi[1] * gi[1])).sum();
        kin - 0.25 * (mu[0] * s[0].powi(4) + mu[1] * s[1].powi(4)) - 0.5 * beta * s[0] * s[0] * s[1] * s[1]
    })
}

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

/// Random coefficients in `[−scale, scale]`.
pub fn random_field(rng: &mut StdRng, k: usize, m: usize, scale: f64) -> Field {
    Field::new(
        (0..k)
            .map(|_| (0..m).map(|_| rng.random_range(-scale..=scale)).collect())
            .collect(),
    )
}

/// Bump `xy(1−x)(1−y)` times a random positive factor in `[0.5, 1.5]`.
pub fn random_positive_field(rng: &mut StdRng, mesh: &Mesh, k: usize, scale: f64) -> Field {
    Field::new(
        (0..k)
            .map(|_| {
                (0..mesh.dofs())
                    .map(|d| {
                        let [x, y] = mesh.vertices()[mesh.vertex_of_dof(d)];
                        scale * x * y * (1.0 - x) * (1.0 - y) * rng.random_range(0.5..=1.5)
                    })
                    .collect()
            })
            .collect(),
    )
}
