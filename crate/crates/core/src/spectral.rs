//! Lowest eigenpairs of `−Δ + V` with Dirichlet conditions and the negative
//! eigenspace that splits `H = H⁽⁻⁾ ⊕ H⁽⁺⁾`.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{MpaError, Result};
use crate::fem::{assemble_mass, assemble_weighted_mass, dot, CsrMatrix, Field, P1Space, SkylineCholesky};

/// Eigenvalues closer to zero than this violate the spectral gap assumption.
pub const GAP_TOL: f64 = 1e-6;
/// Relative eigen-residual target `‖K x − λ M x‖ ≤ tol ‖x‖`.
pub const RESIDUAL_TOL: f64 = 1e-8;
/// Problems up to this many DOFs use the dense generalized eigensolver.
pub const DENSE_LIMIT: usize = 400;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EigenMethod {
    Auto,
    Dense,
    SubspaceIteration,
}

#[derive(Debug, Clone)]
pub struct Eigenpairs {
    /// ascending
    pub values: Vec<f64>,
    /// M-normalized eigenvectors, sign fixed so the first significant entry is positive
    pub vectors: Vec<Vec<f64>>,
    pub residuals: Vec<f64>,
}

fn norm(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

fn residual(k: &CsrMatrix, m: &CsrMatrix, lambda: f64, x: &[f64]) -> f64 {
    let kx = k.mul_vec(x);
    let mx = m.mul_vec(x);
    let r: Vec<f64> = kx.iter().zip(&mx).map(|(a, b)| a - lambda * b).collect();
    norm(&r) / norm(x)
}

fn fix_sign(x: &mut [f64]) {
    let big = x.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if let Some(first) = x.iter().find(|v| v.abs() > 1e-8 * big) {
        if *first < 0.0 {
            x.iter_mut().for_each(|v| *v = -*v);
        }
    }
}

/// The `count` algebraically smallest eigenpairs of `(A + B_V) x = λ M x`.
pub fn lowest_eigenpairs(
    a: &CsrMatrix,
    b_v: &CsrMatrix,
    m: &CsrMatrix,
    count: usize,
    method: EigenMethod,
) -> Result<Eigenpairs> {
    let n = a.dim();
    if count > n {
        return Err(MpaError::InvalidArgument(format!(
            "requested {count} eigenpairs of a {n}-dimensional operator"
        )));
    }
    let k = a.add_scaled(1.0, b_v);
    let dense = match method {
        EigenMethod::Auto => n <= DENSE_LIMIT,
        EigenMethod::Dense => true,
        EigenMethod::SubspaceIteration => false,
    };
    let (values, mut vectors) = if dense || count == n {
        dense_eigenpairs(&k, m, count)?
    } else {
        subspace_iteration(&k, m, count)?
    };
    vectors.iter_mut().for_each(|v| fix_sign(v));
    let residuals: Vec<f64> = values
        .iter()
        .zip(&vectors)
        .map(|(&l, x)| residual(&k, m, l, x))
        .collect();
    if let Some((i, r)) = residuals
        .iter()
        .enumerate()
        .find(|(_, r)| !(**r <= RESIDUAL_TOL))
    {
        return Err(MpaError::NumericFailure(format!(
            "eigenpair {i} has relative residual {r:e} above {RESIDUAL_TOL:e}"
        )));
    }
    Ok(Eigenpairs {
        values,
        vectors,
        residuals,
    })
}

fn dense_eigenpairs(k: &CsrMatrix, m: &CsrMatrix, count: usize) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let kd = k.to_dense();
    let md = m.to_dense();
    let chol = md
        .cholesky()
        .ok_or_else(|| MpaError::NumericFailure("mass matrix is not positive definite".into()))?;
    let l = chol.l();
    // C = L⁻¹ K L⁻ᵀ
    let linv_k = l
        .solve_lower_triangular(&kd)
        .ok_or_else(|| MpaError::NumericFailure("singular mass factor".into()))?;
    let c = l
        .solve_lower_triangular(&linv_k.transpose())
        .ok_or_else(|| MpaError::NumericFailure("singular mass factor".into()))?;
    let c = (&c + c.transpose()) * 0.5;
    let eig = SymmetricEigen::new(c);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let lt = l.transpose();
    let mut values = Vec::with_capacity(count);
    let mut vectors = Vec::with_capacity(count);
    for &i in order.iter().take(count) {
        values.push(eig.eigenvalues[i]);
        let y = eig.eigenvectors.column(i).into_owned();
        let x = lt
            .solve_upper_triangular(&y)
            .ok_or_else(|| MpaError::NumericFailure("singular mass factor".into()))?;
        vectors.push(x.as_slice().to_vec());
    }
    Ok((values, vectors))
}

/// Finds a shift `σ` strictly below the spectrum so that `K − σM` is SPD,
/// then tightens it towards the lowest eigenvalue by bisection.
fn spd_shift(k: &CsrMatrix, m: &CsrMatrix) -> Result<(f64, SkylineCholesky)> {
    let try_shift = |s: f64| SkylineCholesky::factor(&k.add_scaled(-s, m)).ok();
    let mut lo = -1.0;
    let mut lo_chol = try_shift(lo);
    let mut hi = None;
    let mut guard = 0;
    while lo_chol.is_none() {
        hi = Some(lo);
        lo *= 4.0;
        lo_chol = try_shift(lo);
        guard += 1;
        if guard > 60 {
            return Err(MpaError::NumericFailure(
                "no shift makes the pencil positive definite".into(),
            ));
        }
    }
    let mut hi = match hi {
        Some(h) => h,
        None => {
            // −1 already works; walk upwards until factorization fails
            let mut h = 1.0;
            while try_shift(h).is_some() {
                lo = h;
                h *= 4.0;
                if h > 1e12 {
                    break;
                }
            }
            lo_chol = try_shift(lo);
            h
        }
    };
    for _ in 0..8 {
        let mid = 0.5 * (lo + hi);
        match try_shift(mid) {
            Some(c) => {
                lo = mid;
                lo_chol = Some(c);
            }
            None => hi = mid,
        }
    }
    // back off from the bracket so the factorization is comfortably definite
    let sigma = lo - 0.05 * (hi - lo).abs() - 1e-3 * lo.abs().max(1.0);
    let chol = try_shift(sigma).or(lo_chol).expect("shift below a definite shift is definite");
    Ok((sigma, chol))
}

/// Deterministic, well-spread start vectors.
fn start_block(n: usize, b: usize) -> Vec<Vec<f64>> {
    (0..b)
        .map(|j| {
            (0..n)
                .map(|i| {
                    let t = (i as f64 + 1.0) * (0.618_033_988_749_895 * (j as f64 + 1.0) + 0.137);
                    (t * std::f64::consts::TAU).sin() + 0.5 * ((i * (j + 3)) as f64 * 0.31).cos()
                })
                .collect()
        })
        .collect()
}

/// Shift-invert block iteration with Rayleigh–Ritz on the pencil `(K, M)`.
fn subspace_iteration(k: &CsrMatrix, m: &CsrMatrix, count: usize) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let n = k.dim();
    let b = (count + count.max(8)).min(n);
    let (sigma, chol) = spd_shift(k, m)?;
    let mut block = start_block(n, b);
    let mut last_worst = f64::INFINITY;
    for _ in 0..3000 {
        // Y = (K − σM)⁻¹ M X
        let y: Vec<Vec<f64>> = block.iter().map(|x| chol.solve(&m.mul_vec(x))).collect();
        let (values, vectors) = rayleigh_ritz(k, m, &y)?;
        let worst = values
            .iter()
            .zip(&vectors)
            .take(count)
            .map(|(&l, x)| residual(k, m, l, x))
            .fold(0.0, f64::max);
        block = vectors;
        if worst <= 0.1 * RESIDUAL_TOL || (worst <= RESIDUAL_TOL && worst >= 0.9 * last_worst) {
            return Ok((values[..count].to_vec(), block[..count].to_vec()));
        }
        last_worst = worst;
    }
    Err(MpaError::NumericFailure(format!(
        "subspace iteration (shift {sigma:e}) did not converge; worst residual {last_worst:e}"
    )))
}

fn rayleigh_ritz(k: &CsrMatrix, m: &CsrMatrix, y: &[Vec<f64>]) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let b = y.len();
    let ky: Vec<Vec<f64>> = y.iter().map(|v| k.mul_vec(v)).collect();
    let my: Vec<Vec<f64>> = y.iter().map(|v| m.mul_vec(v)).collect();
    let kr = DMatrix::from_fn(b, b, |i, j| 0.5 * (dot(&y[i], &ky[j]) + dot(&y[j], &ky[i])));
    let mr = DMatrix::from_fn(b, b, |i, j| 0.5 * (dot(&y[i], &my[j]) + dot(&y[j], &my[i])));
    let chol = mr
        .cholesky()
        .ok_or_else(|| MpaError::NumericFailure("subspace basis collapsed".into()))?;
    let l = chol.l();
    let linv_k = l.solve_lower_triangular(&kr).expect("definite factor");
    let c = l.solve_lower_triangular(&linv_k.transpose()).expect("definite factor");
    let eig = SymmetricEigen::new((&c + c.transpose()) * 0.5);
    let coeffs = l.transpose().solve_upper_triangular(&eig.eigenvectors).expect("definite factor");
    let mut order: Vec<usize> = (0..b).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let n = y[0].len();
    let mut values = Vec::with_capacity(b);
    let mut vectors = Vec::with_capacity(b);
    for &c in &order {
        values.push(eig.eigenvalues[c]);
        let mut x = vec![0.0; n];
        for (j, yj) in y.iter().enumerate() {
            let w = coeffs[(j, c)];
            x.iter_mut().zip(yj).for_each(|(xi, v)| *xi += w * v);
        }
        vectors.push(x);
    }
    Ok((values, vectors))
}

/// H-orthonormal basis of the negative eigenspace of `−Δ + V`.
#[derive(Debug, Clone)]
pub struct SpectralBasis {
    /// ascending, all negative
    pub eigenvalues: Vec<f64>,
    /// H-orthonormal (`eᵢᵀ A eⱼ = δᵢⱼ`)
    pub basis: Vec<Vec<f64>>,
    pub residuals: Vec<f64>,
    /// every eigenpair that was computed, including the first nonnegative ones
    pub spectrum: Eigenpairs,
}

impl SpectralBasis {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn empty() -> Self {
        Self {
            eigenvalues: Vec::new(),
            basis: Vec::new(),
            residuals: Vec::new(),
            spectrum: Eigenpairs {
                values: Vec::new(),
                vectors: Vec::new(),
                residuals: Vec::new(),
            },
        }
    }

    pub fn basis_fields(&self) -> Vec<Field> {
        self.basis.iter().map(|e| Field::scalar(e.clone())).collect()
    }

    /// Largest deviation of the Gram matrix `eᵢᵀ A eⱼ` from the identity.
    pub fn orthonormality_defect(&self, a: &CsrMatrix) -> f64 {
        let mut worst = 0.0f64;
        for (i, ei) in self.basis.iter().enumerate() {
            for (j, ej) in self.basis.iter().enumerate() {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((a.form(ei, ej) - target).abs());
            }
        }
        worst
    }
}

/// Modified Gram–Schmidt in the `A` inner product, applied twice.
pub fn h_orthonormalize(a: &CsrMatrix, vectors: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(vectors.len());
    for v in vectors {
        let mut w = v.clone();
        for _ in 0..2 {
            for q in &out {
                let c = a.form(q, &w);
                w.iter_mut().zip(q).for_each(|(wi, qi)| *wi -= c * qi);
            }
        }
        let nrm = a.form(&w, &w).sqrt();
        if !(nrm > 1e-12 * a.form(v, v).sqrt()) {
            return Err(MpaError::NumericFailure(
                "linearly dependent vectors in H-orthonormalization".into(),
            ));
        }
        w.iter_mut().for_each(|x| *x /= nrm);
        out.push(w);
    }
    Ok(out)
}

/// Negative eigenspace of `−Δ + V` on the mesh of `space`.
pub fn negative_eigenspace<V>(space: &P1Space, potential: V, method: EigenMethod) -> Result<SpectralBasis>
where
    V: Fn(f64, f64) -> f64,
{
    let mesh = space.mesh();
    let b_v = assemble_weighted_mass(mesh, potential)?;
    let m = assemble_mass(mesh);
    negative_eigenspace_from_operators(space.stiffness(), &b_v, &m, method)
}

pub fn negative_eigenspace_from_operators(
    a: &CsrMatrix,
    b_v: &CsrMatrix,
    m: &CsrMatrix,
    method: EigenMethod,
) -> Result<SpectralBasis> {
    let n = a.dim();
    let mut count = 6.min(n);
    let pairs = loop {
        let pairs = lowest_eigenpairs(a, b_v, m, count, method)?;
        let top = *pairs.values.last().expect("count ≥ 1");
        if top > GAP_TOL || count == n {
            break pairs;
        }
        count = (2 * count).min(n);
    };
    if let Some((i, &l)) = pairs.values.iter().enumerate().find(|(_, l)| l.abs() <= GAP_TOL) {
        return Err(MpaError::SpectralGapViolation {
            index: i,
            eigenvalue: l,
            tol: GAP_TOL,
        });
    }
    let neg = pairs.values.iter().take_while(|&&l| l < 0.0).count();
    let basis = h_orthonormalize(a, &pairs.vectors[..neg])?;
    Ok(SpectralBasis {
        eigenvalues: pairs.values[..neg].to_vec(),
        basis,
        residuals: pairs.residuals[..neg].to_vec(),
        spectrum: pairs,
    })
}
