//! The generalized mountain pass iteration
//! `u_{n+1} = φ(u_n − s_n ∇E(u_n)/‖∇E(u_n)‖)` with admissible stepsizes.

use std::collections::HashMap;
use std::io::Write;

use crate::cones::Cone;
use crate::error::{MpaError, Result};
use crate::fem::Field;
use crate::problems::Problem;

/// Gradient norms at or below this are treated as an exact critical point.
pub const CRITICAL_NORM: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StepRule {
    /// largest passing dyadic step, which is at least half the supremum
    #[default]
    S,
    /// as `S`, and the decrease must also hold at every dyadic fraction
    Tilde,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MpaConfig {
    pub eps_stop: f64,
    pub alpha: f64,
    pub s_init: f64,
    pub s_max: f64,
    pub s_min: f64,
    pub max_iters: usize,
    pub rule: StepRule,
    pub tilde_grid: u32,
}

impl Default for MpaConfig {
    fn default() -> Self {
        Self {
            eps_stop: 1e-4,
            alpha: 0.5,
            s_init: 1.0,
            s_max: 1e3,
            s_min: 1e-12,
            max_iters: 10_000,
            rule: StepRule::S,
            tilde_grid: 6,
        }
    }
}

impl MpaConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.alpha > 0.0
            && self.alpha < 1.0
            && self.s_min > 0.0
            && self.s_min < self.s_init
            && self.s_init <= self.s_max
            && self.eps_stop > 0.0
            && self.tilde_grid <= 20
            && [self.alpha, self.s_init, self.s_max, self.s_min, self.eps_stop]
                .iter()
                .all(|v| v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(MpaError::InvalidArgument(format!(
                "MPA settings need 0 < alpha < 1, 0 < s_min < s_init <= s_max, eps_stop > 0 and tilde_grid <= 20: {self:?}"
            )))
        }
    }
}

/// Energy landscape restricted to a family of cones, as seen by the outer
/// iteration.
pub trait Landscape {
    type Point: Clone;

    /// `φ(u)` with its energy; `Ok(None)` when `u` is outside the admissible set
    /// or the selection degenerates.
    fn select(&self, u: &Self::Point) -> Result<Option<Selection<Self::Point>>>;

    /// Riesz gradient at `u` and its H-norm.
    fn gradient(&self, u: &Self::Point) -> Result<(Self::Point, f64)>;

    /// `u + s · d`
    fn displace(&self, u: &Self::Point, s: f64, d: &Self::Point) -> Self::Point;

    /// `a / c`
    fn scale(&self, a: &Self::Point, c: f64) -> Self::Point;

    fn distance(&self, a: &Self::Point, b: &Self::Point) -> f64;
}

#[derive(Debug, Clone)]
pub struct Selection<P> {
    pub point: P,
    pub energy: f64,
    pub inner_iters: usize,
    pub warnings: Vec<String>,
}

/// A problem together with its cone family.
pub struct ConeLandscape<'a, P: Problem + ?Sized> {
    pub problem: &'a P,
    pub cone: &'a Cone,
}

impl<'a, P: Problem + ?Sized> ConeLandscape<'a, P> {
    pub fn new(problem: &'a P, cone: &'a Cone) -> Self {
        Self { problem, cone }
    }
}

impl<P: Problem + ?Sized> Landscape for ConeLandscape<'_, P> {
    type Point = Field;

    fn select(&self, u: &Field) -> Result<Option<Selection<Field>>> {
        match self.cone.peak_select(self.problem, u, None) {
            Ok(r) => Ok(Some(Selection {
                point: r.point,
                energy: r.energy,
                inner_iters: r.inner_iters,
                warnings: r.warnings,
            })),
            Err(MpaError::DomainViolation(_) | MpaError::DegenerateRay { .. }) => Ok(None),
            Err(e) => Err(e),
        }
    }

    fn gradient(&self, u: &Field) -> Result<(Field, f64)> {
        let g = self.problem.gradient(u)?;
        let n = self.problem.space().h_norm(&g);
        Ok((g, n))
    }

    fn displace(&self, u: &Field, s: f64, d: &Field) -> Field {
        let mut v = u.clone();
        v.axpy(s, d);
        v
    }

    fn scale(&self, a: &Field, c: f64) -> Field {
        a.scaled(1.0 / c)
    }

    fn distance(&self, a: &Field, b: &Field) -> f64 {
        self.problem.space().h_norm(&a.sub(b))
    }
}

/// Unit descent direction `−g/‖g‖_H`, or `None` at a critical point.
#[derive(Debug, Clone)]
pub struct Direction<P> {
    pub direction: Option<P>,
    pub grad_norm: f64,
}

pub fn steepest_direction<L: Landscape>(land: &L, u: &L::Point) -> Result<Direction<L::Point>> {
    let (g, norm) = land.gradient(u)?;
    if !norm.is_finite() {
        return Err(MpaError::NumericOverflow("gradient norm is not finite".into()));
    }
    let direction = (norm > CRITICAL_NORM).then(|| land.scale(&g, -norm));
    Ok(Direction {
        direction,
        grad_norm: norm,
    })
}

/// Outcome of a stepsize search.
#[derive(Debug, Clone)]
pub struct StepChoice<P> {
    pub step: f64,
    /// largest passing dyadic step seen (approximates `sup S*`)
    pub sup_estimate: f64,
    /// whether the search stopped at `s_max`
    pub capped: bool,
    pub selection: Selection<P>,
    /// peak selections evaluated during the search
    pub trials: usize,
}

/// Stepsize search over the dyadic ladder `s_init · 2^j`.
///
/// `trial(s)` returns the energy of `φ(u + s d)` (and the selection), or
/// `None` when that point is inadmissible. A step passes when
/// `E(φ(u_s)) − E(u) < −α s ‖∇E(u)‖`; under [`StepRule::Tilde`] it must also
/// pass at `s · j / 2^tilde_grid` for every `j`.
pub fn search_step<P, F>(cfg: &MpaConfig, energy: f64, grad_norm: f64, mut trial: F) -> Result<StepChoice<P>>
where
    P: Clone,
    F: FnMut(f64) -> Result<Option<Selection<P>>>,
{
    let mut cache: HashMap<u64, Option<Selection<P>>> = HashMap::new();
    let mut trials = 0usize;
    let mut eval = |s: f64, trials: &mut usize| -> Result<Option<Selection<P>>> {
        if let Some(hit) = cache.get(&s.to_bits()) {
            return Ok(hit.clone());
        }
        *trials += 1;
        let r = trial(s)?;
        cache.insert(s.to_bits(), r.clone());
        Ok(r)
    };
    let decreases = |sel: &Option<Selection<P>>, s: f64| {
        sel.as_ref()
            .is_some_and(|sel| sel.energy - energy < -cfg.alpha * s * grad_norm)
    };
    let mut passes = |s: f64, trials: &mut usize| -> Result<Option<Selection<P>>> {
        let at_s = eval(s, trials)?;
        if !decreases(&at_s, s) {
            return Ok(None);
        }
        if cfg.rule == StepRule::Tilde && cfg.tilde_grid > 0 {
            let parts = 1u64 << cfg.tilde_grid;
            for j in 1..parts {
                let sj = s * j as f64 / parts as f64;
                if !decreases(&eval(sj, trials)?, sj) {
                    return Ok(None);
                }
            }
        }
        Ok(at_s)
    };

    let mut s = cfg.s_init;
    let mut best = passes(s, &mut trials)?;
    let mut capped = false;
    if best.is_some() {
        loop {
            if s >= cfg.s_max {
                capped = true;
                break;
            }
            let next = (2.0 * s).min(cfg.s_max);
            match passes(next, &mut trials)? {
                Some(sel) => {
                    s = next;
                    best = Some(sel);
                }
                None => break,
            }
        }
    } else {
        while best.is_none() {
            s *= 0.5;
            if s < cfg.s_min {
                return Err(MpaError::StepsizeUnderflow {
                    grad_norm,
                    s_min: cfg.s_min,
                });
            }
            best = passes(s, &mut trials)?;
        }
    }
    Ok(StepChoice {
        step: s,
        sup_estimate: s,
        capped,
        selection: best.expect("loop exits with a passing step"),
        trials,
    })
}

/// One outer iteration as recorded in the trace.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    pub energy: f64,
    pub grad_norm: f64,
    pub step: f64,
    pub sup_s: f64,
    pub capped: bool,
    /// inner iterations of the accepted selection
    pub inner_iters: usize,
    /// peak selections evaluated by the stepsize search
    pub trials: usize,
    /// `E(u_{n+1}) − E(u_n) + α s_n ‖∇E(u_n)‖`, negative for admissible steps
    pub margin: f64,
    /// `‖u_{n+1} − u_n‖_H`
    pub increment: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    Converged,
    MaxIters,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MpaTrace {
    pub alpha: f64,
    pub records: Vec<IterationRecord>,
    pub final_energy: f64,
    pub final_grad_norm: f64,
    pub status: RunStatus,
    pub warnings: Vec<String>,
}

impl MpaTrace {
    pub fn steps(&self) -> usize {
        self.records.len()
    }

    /// Largest decrease margin over the run (must be negative).
    pub fn worst_margin(&self) -> f64 {
        self.records.iter().map(|r| r.margin).fold(f64::NEG_INFINITY, f64::max)
    }

    /// CSV with header `iter,energy,grad_norm,step,sup_s,inner_iters,margin`;
    /// the last row holds the final iterate with empty step columns.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "iter,energy,grad_norm,step,sup_s,inner_iters,margin")?;
        for r in &self.records {
            writeln!(
                out,
                "{},{:e},{:e},{:e},{:e},{},{:e}",
                r.iter, r.energy, r.grad_norm, r.step, r.sup_s, r.inner_iters, r.margin
            )?;
        }
        writeln!(
            out,
            "{},{:e},{:e},,,,",
            self.records.len(),
            self.final_energy,
            self.final_grad_norm
        )
    }
}

/// Runs the mountain pass iteration from `u0`, which is first mapped through
/// `φ` so that the iteration starts on the range of the peak selection.
pub fn run<L: Landscape>(land: &L, u0: &L::Point, cfg: &MpaConfig) -> Result<(L::Point, MpaTrace)> {
    cfg.validate()?;
    let first = land.select(u0)?.ok_or_else(|| {
        MpaError::DomainViolation("initial guess is outside the admissible set".into())
    })?;
    let mut warnings = first.warnings.clone();
    let mut u = first.point;
    let mut energy = first.energy;
    let mut records = Vec::new();
    loop {
        let dir = steepest_direction(land, &u)?;
        if dir.grad_norm <= cfg.eps_stop || dir.direction.is_none() {
            return Ok((
                u,
                MpaTrace {
                    alpha: cfg.alpha,
                    records,
                    final_energy: energy,
                    final_grad_norm: dir.grad_norm,
                    status: RunStatus::Converged,
                    warnings,
                },
            ));
        }
        if records.len() >= cfg.max_iters {
            return Ok((
                u,
                MpaTrace {
                    alpha: cfg.alpha,
                    records,
                    final_energy: energy,
                    final_grad_norm: dir.grad_norm,
                    status: RunStatus::MaxIters,
                    warnings,
                },
            ));
        }
        let d = dir.direction.expect("checked above");
        let choice = search_step(cfg, energy, dir.grad_norm, |s| land.select(&land.displace(&u, s, &d)))?;
        let next = choice.selection;
        let margin = next.energy - energy + cfg.alpha * choice.step * dir.grad_norm;
        let iter = records.len();
        warnings.extend(next.warnings.iter().map(|w| format!("iter {iter}: {w}")));
        records.push(IterationRecord {
            iter,
            energy,
            grad_norm: dir.grad_norm,
            step: choice.step,
            sup_s: choice.sup_estimate,
            capped: choice.capped,
            inner_iters: next.inner_iters,
            trials: choice.trials,
            margin,
            increment: land.distance(&next.point, &u),
        });
        u = next.point;
        energy = next.energy;
    }
}

/// [`run`] on a problem and cone.
pub fn run_mpa<P: Problem + ?Sized>(problem: &P, cone: &Cone, u0: &Field, cfg: &MpaConfig) -> Result<(Field, MpaTrace)> {
    run(&ConeLandscape::new(problem, cone), u0, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sel(e: f64) -> Result<Option<Selection<()>>> {
        Ok(Some(Selection {
            point: (),
            energy: e,
            inner_iters: 0,
            warnings: Vec::new(),
        }))
    }

    /// `E(φ(u_s)) − E(u) = −s + s²/2` for `s < 1`, flat afterwards.
    fn toy(s: f64) -> f64 {
        if s < 1.0 {
            -s + 0.5 * s * s
        } else {
            -0.5
        }
    }

    #[test]
    fn backtracks_into_admissible_range() {
        // α = ½: S* = (0, 1)
        let cfg = MpaConfig::default();
        let c = search_step(&cfg, 0.0, 1.0, |s| sel(toy(s))).unwrap();
        assert!(c.step >= 0.5 && c.step < 1.0, "{}", c.step);
        assert!(c.step >= 0.5 * c.sup_estimate);
    }

    #[test]
    fn strict_alpha_shrinks_steps() {
        // α = 0.99: −s + s²/2 < −0.99 s ⇔ s < 0.02
        let cfg = MpaConfig {
            alpha: 0.99,
            ..Default::default()
        };
        let c = search_step(&cfg, 0.0, 1.0, |s| sel(toy(s))).unwrap();
        assert!(c.step < 0.02 && c.step >= 0.01, "{}", c.step);
        assert!(c.step >= 0.5 * c.sup_estimate);
    }

    #[test]
    fn cap_at_s_max() {
        let cfg = MpaConfig {
            s_max: 16.0,
            ..Default::default()
        };
        let c = search_step(&cfg, 0.0, 1.0, |s| sel(-s)).unwrap();
        assert_eq!(c.step, 16.0);
        assert_eq!(c.sup_estimate, 16.0);
        assert!(c.capped);
    }

    #[test]
    fn underflow() {
        let cfg = MpaConfig::default();
        let err = search_step(&cfg, 0.0, 1.0, |_| sel(1.0)).unwrap_err();
        assert!(matches!(err, MpaError::StepsizeUnderflow { .. }));
        let err = search_step::<(), _>(&cfg, 0.0, 1.0, |_| Ok(None)).unwrap_err();
        assert!(matches!(err, MpaError::StepsizeUnderflow { .. }));
    }

    #[test]
    fn tilde_agrees_on_monotone_profile() {
        let s_cfg = MpaConfig::default();
        let t_cfg = MpaConfig {
            rule: StepRule::Tilde,
            ..Default::default()
        };
        let a = search_step(&s_cfg, 0.0, 1.0, |s| sel(toy(s))).unwrap();
        let b = search_step(&t_cfg, 0.0, 1.0, |s| sel(toy(s))).unwrap();
        assert_eq!(a.step, b.step);
    }

    #[test]
    fn tilde_rejects_a_bad_small_step() {
        // passes at s = 1 but not at s = 0.25
        let profile = |s: f64| if (s - 0.25).abs() < 1e-12 { 0.0 } else { -s };
        let cfg_s = MpaConfig {
            s_max: 1.0,
            ..Default::default()
        };
        let a = search_step(&cfg_s, 0.0, 1.0, |s| sel(profile(s))).unwrap();
        assert_eq!(a.step, 1.0);
        let cfg_t = MpaConfig {
            rule: StepRule::Tilde,
            tilde_grid: 2,
            ..cfg_s.clone()
        };
        let b = search_step(&cfg_t, 0.0, 1.0, |s| sel(profile(s))).unwrap();
        assert!(b.step < 0.25, "{}", b.step);
        // grid depth 0 is the plain rule
        let cfg_0 = MpaConfig {
            rule: StepRule::Tilde,
            tilde_grid: 0,
            ..cfg_s
        };
        let c = search_step(&cfg_0, 0.0, 1.0, |s| sel(profile(s))).unwrap();
        assert_eq!(c.step, a.step);
    }

    #[test]
    fn config_validation() {
        assert!(MpaConfig::default().validate().is_ok());
        for bad in [
            MpaConfig { alpha: 1.0, ..Default::default() },
            MpaConfig { alpha: 0.0, ..Default::default() },
            MpaConfig { s_min: 2.0, ..Default::default() },
            MpaConfig { s_max: 0.5, ..Default::default() },
            MpaConfig { eps_stop: 0.0, ..Default::default() },
        ] {
            assert!(bad.validate().is_err());
        }
    }

    /// `H = ℝ²`, `E(u) = ½|u|² − ¼|u|⁴`, `C_u = ℝ⁺u`, `φ(u) = u/|u|`.
    struct Circle;

    impl Landscape for Circle {
        type Point = [f64; 2];
        fn select(&self, u: &[f64; 2]) -> Result<Option<Selection<[f64; 2]>>> {
            let n = u[0].hypot(u[1]);
            if n == 0.0 {
                return Ok(None);
            }
            let p = [u[0] / n, u[1] / n];
            Ok(Some(Selection { point: p, energy: 0.25, inner_iters: 0, warnings: vec![] }))
        }
        fn gradient(&self, u: &[f64; 2]) -> Result<([f64; 2], f64)> {
            let r2 = u[0] * u[0] + u[1] * u[1];
            let g = [u[0] * (1.0 - r2), u[1] * (1.0 - r2)];
            Ok((g, g[0].hypot(g[1])))
        }
        fn displace(&self, u: &[f64; 2], s: f64, d: &[f64; 2]) -> [f64; 2] {
            [u[0] + s * d[0], u[1] + s * d[1]]
        }
        fn scale(&self, a: &[f64; 2], c: f64) -> [f64; 2] {
            [a[0] / c, a[1] / c]
        }
        fn distance(&self, a: &[f64; 2], b: &[f64; 2]) -> f64 {
            (a[0] - b[0]).hypot(a[1] - b[1])
        }
    }

    #[test]
    fn circle_toy_converges_immediately() {
        let (u, trace) = run(&Circle, &[3.0, -4.0], &MpaConfig::default()).unwrap();
        assert_eq!(trace.steps(), 0);
        assert_eq!(trace.status, RunStatus::Converged);
        assert!((u[0] - 0.6).abs() < 1e-15 && (u[1] + 0.8).abs() < 1e-15);
        assert!(trace.final_grad_norm < 1e-14);
    }
}
