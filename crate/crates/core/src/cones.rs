//! Projector cones and the peak selection `φ`.
//!
//! Two cone families are supported:
//!
//! * `Indefinite`: `C_u = E ⊕ ℝ⁺u` where `E` is the negative eigenspace and
//!   the single projector is the H-orthogonal projection onto `E^⊥`.
//! * `System`: `C_u = {(t₁u₁, …, t_k u_k) | tᵢ ≥ 0}` with `E = {0}` and the
//!   component projections as projectors.
//!
//! `φ(u)` maximizes the energy over `C_u`. The inner problem is solved with
//! the bounded quasi-Newton method in [`crate::optim`] over the coordinates
//! `(c, t)` of `Σ cⱼ eⱼ + Σ tᵢ ξᵢ(u)` where `ξᵢ(u) = Pᵢu / ‖Pᵢu‖_H`.

use crate::error::{MpaError, Result};
use crate::fem::{Field, P1Space};
use crate::optim::BoundedLbfgs;
use crate::problems::Problem;

/// Minimum projector norm for membership in the admissible set.
pub const DELTA_A: f64 = 1e-8;
/// Below this, a selected component is reported as nearly degenerate.
pub const DOMAIN_WARN: f64 = 1e-4;

/// What to do when a system component's ray coordinate reaches zero at the
/// cone maximum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum VanishingPolicy {
    /// Report a degenerate-ray error (the maximum lies on the cone boundary).
    #[default]
    Error,
    /// Freeze the component at zero and keep selecting on the remaining ones.
    Drop,
}

#[derive(Debug, Clone)]
pub enum ConeSpec {
    Indefinite {
        /// H-orthonormal basis of `E`
        basis: Vec<Vec<f64>>,
    },
    System {
        components: usize,
        vanishing: VanishingPolicy,
    },
}

#[derive(Debug, Clone)]
pub struct PeakOptions {
    pub delta_a: f64,
    pub inner: BoundedLbfgs,
    /// Re-solve from a perturbed start and warn when the energies disagree.
    pub restart_check: bool,
}

impl Default for PeakOptions {
    fn default() -> Self {
        Self {
            delta_a: DELTA_A,
            inner: BoundedLbfgs::default(),
            restart_check: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PeakResult {
    pub point: Field,
    pub energy: f64,
    /// coordinates along the `E` basis (empty for systems)
    pub coefficients: Vec<f64>,
    /// coordinates along the unit rays `ξᵢ(u)`; zero for dropped components
    pub rays: Vec<f64>,
    pub inner_grad_norm: f64,
    pub inner_iters: usize,
    pub warnings: Vec<String>,
}

impl PeakResult {
    /// Inner parameters in the order the optimizer uses them.
    pub fn parameters(&self) -> Vec<f64> {
        let mut p = self.coefficients.clone();
        p.extend(&self.rays);
        p
    }
}

#[derive(Debug, Clone)]
pub struct Cone {
    spec: ConeSpec,
    opts: PeakOptions,
}

impl Cone {
    pub fn new(spec: ConeSpec, opts: PeakOptions) -> Self {
        Self { spec, opts }
    }

    pub fn indefinite(basis: Vec<Vec<f64>>) -> Self {
        Self::new(ConeSpec::Indefinite { basis }, PeakOptions::default())
    }

    pub fn system(components: usize, vanishing: VanishingPolicy) -> Self {
        Self::new(
            ConeSpec::System {
                components,
                vanishing,
            },
            PeakOptions::default(),
        )
    }

    pub fn spec(&self) -> &ConeSpec {
        &self.spec
    }

    pub fn options(&self) -> &PeakOptions {
        &self.opts
    }

    pub fn options_mut(&mut self) -> &mut PeakOptions {
        &mut self.opts
    }

    /// `P₁u`, the H-orthogonal projection onto `E^⊥` (indefinite cones), or
    /// the field itself (system cones, where `E = {0}`).
    pub fn project_complement(&self, space: &P1Space, u: &Field) -> Field {
        match &self.spec {
            ConeSpec::Indefinite { basis } => {
                let mut w = u.component(0).to_vec();
                for e in basis {
                    let c = space.h_inner_scalar(e, &w);
                    w.iter_mut().zip(e).for_each(|(wi, ei)| *wi -= c * ei);
                }
                Field::scalar(w)
            }
            ConeSpec::System { .. } => u.clone(),
        }
    }

    /// Coordinates of `u` along the `E` basis.
    pub fn subspace_coefficients(&self, space: &P1Space, u: &Field) -> Vec<f64> {
        match &self.spec {
            ConeSpec::Indefinite { basis } => basis
                .iter()
                .map(|e| space.h_inner_scalar(e, u.component(0)))
                .collect(),
            ConeSpec::System { .. } => Vec::new(),
        }
    }

    /// Components taking part in the cone: for a system under the drop
    /// policy, components below `δ_A` are frozen at zero.
    fn active_components(&self, space: &P1Space, u: &Field) -> Result<Vec<bool>> {
        match &self.spec {
            ConeSpec::Indefinite { .. } => {
                let w = self.project_complement(space, u);
                let nrm = space.h_norm(&w);
                if !(nrm >= self.opts.delta_a) {
                    return Err(MpaError::DomainViolation(format!(
                        "‖P₁u‖_H = {nrm:e} is below δ_A = {:e}",
                        self.opts.delta_a
                    )));
                }
                Ok(vec![true])
            }
            ConeSpec::System {
                components,
                vanishing,
            } => {
                if u.components() != *components {
                    return Err(MpaError::InvalidArgument(format!(
                        "cone has {components} components, field has {}",
                        u.components()
                    )));
                }
                let norms: Vec<f64> = u.iter().map(|c| space.h_inner_scalar(c, c).sqrt()).collect();
                let active: Vec<bool> = norms.iter().map(|&n| n >= self.opts.delta_a).collect();
                match vanishing {
                    VanishingPolicy::Error => {
                        if let Some((i, n)) = norms.iter().enumerate().find(|(_, n)| !(**n >= self.opts.delta_a)) {
                            return Err(MpaError::DomainViolation(format!(
                                "‖u_{}‖_H = {n:e} is below δ_A = {:e}",
                                i + 1,
                                self.opts.delta_a
                            )));
                        }
                    }
                    VanishingPolicy::Drop => {
                        if !active.iter().any(|&a| a) {
                            return Err(MpaError::DomainViolation(
                                "every component is below δ_A".into(),
                            ));
                        }
                    }
                }
                Ok(active)
            }
        }
    }

    /// Unit rays `ξᵢ(u) = Pᵢu / ‖Pᵢu‖_H`, returned as one field (components of
    /// dropped system components are zero).
    pub fn project_ray(&self, space: &P1Space, u: &Field) -> Result<Field> {
        let active = self.active_components(space, u)?;
        let w = self.project_complement(space, u);
        let comps = w
            .into_components()
            .into_iter()
            .zip(&active)
            .map(|(mut c, &on)| {
                if on {
                    let n = space.h_inner_scalar(&c, &c).sqrt();
                    c.iter_mut().for_each(|v| *v /= n);
                } else {
                    c.iter_mut().for_each(|v| *v = 0.0);
                }
                c
            })
            .collect();
        Ok(Field::new(comps))
    }

    /// `Σ cⱼ eⱼ + Σ tᵢ ξᵢ`
    fn assemble(&self, coeffs: &[f64], rays: &[f64], xi: &Field) -> Field {
        match &self.spec {
            ConeSpec::Indefinite { basis } => {
                let mut v: Vec<f64> = xi.component(0).iter().map(|x| rays[0] * x).collect();
                for (c, e) in coeffs.iter().zip(basis) {
                    v.iter_mut().zip(e).for_each(|(vi, ei)| *vi += c * ei);
                }
                Field::scalar(v)
            }
            ConeSpec::System { .. } => Field::new(
                xi.iter()
                    .zip(rays)
                    .map(|(c, t)| c.iter().map(|x| t * x).collect())
                    .collect(),
            ),
        }
    }

    /// The peak selection `φ(u)`: the maximizer of `E` on `C_u`.
    pub fn peak_select<P: Problem + ?Sized>(
        &self,
        problem: &P,
        u: &Field,
        warm_start: Option<&[f64]>,
    ) -> Result<PeakResult> {
        problem.check_shape(u)?;
        let space = problem.space();
        let active = self.active_components(space, u)?;
        let xi = self.project_ray(space, u)?;
        let ncoef = match &self.spec {
            ConeSpec::Indefinite { basis } => basis.len(),
            ConeSpec::System { .. } => 0,
        };
        let nrays = xi.components();
        // free variables: all coefficients and the rays of active components
        let ray_slots: Vec<usize> = (0..nrays).filter(|&i| active[i]).collect();
        let default_start = {
            let mut x = self.subspace_coefficients(space, u);
            let w = self.project_complement(space, u);
            for &i in &ray_slots {
                x.push(space.h_inner_scalar(w.component(i), w.component(i)).sqrt());
            }
            x
        };
        let start: Vec<f64> = match warm_start {
            Some(ws) if ws.len() == ncoef + nrays => {
                let mut x = ws[..ncoef].to_vec();
                x.extend(ray_slots.iter().map(|&i| ws[ncoef + i].max(0.0)));
                x
            }
            _ => default_start,
        };
        let lower: Vec<Option<f64>> = (0..start.len())
            .map(|j| if j < ncoef { None } else { Some(0.0) })
            .collect();

        let split = |x: &[f64]| -> (Vec<f64>, Vec<f64>) {
            let mut rays = vec![0.0; nrays];
            for (slot, &i) in ray_slots.iter().enumerate() {
                rays[i] = x[ncoef + slot];
            }
            (x[..ncoef].to_vec(), rays)
        };
        let basis_fields: Vec<&[f64]> = match &self.spec {
            ConeSpec::Indefinite { basis } => basis.iter().map(Vec::as_slice).collect(),
            ConeSpec::System { .. } => Vec::new(),
        };
        let objective = |x: &[f64], g: &mut [f64]| -> Result<f64> {
            let (c, t) = split(x);
            let v = self.assemble(&c, &t, &xi);
            let (e, r) = problem.evaluate(&v, true)?;
            let r = r.expect("gradient requested");
            for (j, e) in basis_fields.iter().enumerate() {
                g[j] = -r.pair_component(0, e);
            }
            for (slot, &i) in ray_slots.iter().enumerate() {
                g[ncoef + slot] = -r.pair_component(i, xi.component(i));
            }
            Ok(-e)
        };
        let opt = self.opts.inner.minimize(objective, &start, &lower)?;
        let (coefficients, mut rays) = split(&opt.x);
        let mut warnings = Vec::new();

        for &i in &ray_slots {
            if rays[i] <= self.opts.delta_a {
                let drop = matches!(
                    self.spec,
                    ConeSpec::System {
                        vanishing: VanishingPolicy::Drop,
                        ..
                    }
                );
                if !drop {
                    return Err(MpaError::DegenerateRay {
                        component: i,
                        coordinate: rays[i],
                    });
                }
                rays[i] = 0.0;
                warnings.push(format!("component {} vanished at the cone maximum", i + 1));
            }
        }
        if rays.iter().all(|&t| t == 0.0) {
            return Err(MpaError::DegenerateRay {
                component: 0,
                coordinate: 0.0,
            });
        }
        let point = self.assemble(&coefficients, &rays, &xi);
        let energy = problem.energy(&point)?;
        for (i, &t) in rays.iter().enumerate() {
            if t > 0.0 && t < DOMAIN_WARN {
                warnings.push(format!("component {} has ray coordinate {t:e}", i + 1));
            }
        }
        if self.opts.restart_check {
            let perturbed: Vec<f64> = opt
                .x
                .iter()
                .enumerate()
                .map(|(j, v)| if j < ncoef { v + 0.5 } else { 1.5 * v + 0.5 })
                .collect();
            let mut second = self.clone();
            second.opts.restart_check = false;
            let mut ws = perturbed[..ncoef].to_vec();
            let mut full_rays = vec![0.0; nrays];
            for (slot, &i) in ray_slots.iter().enumerate() {
                full_rays[i] = perturbed[ncoef + slot];
            }
            ws.extend(full_rays);
            if let Ok(other) = second.peak_select(problem, u, Some(&ws)) {
                if (other.energy - energy).abs() > 1e-6 {
                    warnings.push(format!(
                        "restart reached energy {:.12} instead of {energy:.12}: inner maximum may not be unique",
                        other.energy
                    ));
                }
            }
        }
        Ok(PeakResult {
            point,
            energy,
            coefficients,
            rays,
            inner_grad_norm: opt.projected_grad_norm,
            inner_iters: opt.iterations,
            warnings,
        })
    }

    /// Nehari-type residuals. Systems: `dE(u)[uᵢeᵢ] = ∫|∇uᵢ|² − ∫∂ᵢF(u)uᵢ`
    /// per component. Indefinite: `dE(u)[u]` followed by `dE(u)[eⱼ]` for each
    /// basis vector of `E`.
    pub fn nehari_residuals<P: Problem + ?Sized>(&self, problem: &P, u: &Field) -> Result<Vec<f64>> {
        problem.check_shape(u)?;
        self.active_components(problem.space(), u)?;
        let r = problem.weak_gradient(u)?;
        Ok(match &self.spec {
            ConeSpec::Indefinite { basis } => {
                let mut out = vec![r.pair(u)];
                out.extend(basis.iter().map(|e| r.pair_component(0, e)));
                out
            }
            ConeSpec::System { .. } => (0..u.components())
                .map(|i| r.pair_component(i, u.component(i)))
                .collect(),
        })
    }
}
