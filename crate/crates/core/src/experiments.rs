//! Building and running configured experiments, writing their outputs, and
//! the two reference tables.

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use crate::cones::{Cone, VanishingPolicy};
use crate::config::{ProblemConfig, RunConfig, Seed};
use crate::error::{MpaError, Result};
use crate::fem::{assemble_mass, assemble_weighted_mass, Field, P1Space};
use crate::mesh::Mesh;
use crate::mpa::{run_mpa, MpaTrace, RunStatus};
use crate::problems::{symmetry_report, IndefiniteProblem, Problem, SymmetryReport, SystemProblem};
use crate::spectral::{lowest_eigenpairs, Eigenpairs};

/// A configured problem with its cone family.
pub enum Setup {
    Indefinite(IndefiniteProblem, Cone),
    System(SystemProblem, Cone),
}

impl Setup {
    pub fn build(cfg: &RunConfig) -> Result<Self> {
        let space = P1Space::new(Mesh::structured(cfg.mesh_n)?)?;
        Ok(match &cfg.problem {
            ProblemConfig::Indefinite { potential, exponent } => {
                let p = IndefiniteProblem::new(space, *potential, *exponent, cfg.eig_method)?;
                let cone = Cone::indefinite(p.spectral().basis.clone());
                Setup::Indefinite(p, cone)
            }
            ProblemConfig::System { mu, beta, vanishing } => {
                let p = SystemProblem::new(space, mu.clone(), beta.clone())?;
                let cone = Cone::system(mu.len(), *vanishing);
                Setup::System(p, cone)
            }
        })
    }

    pub fn problem(&self) -> &dyn Problem {
        match self {
            Setup::Indefinite(p, _) => p,
            Setup::System(p, _) => p,
        }
    }

    pub fn cone(&self) -> &Cone {
        match self {
            Setup::Indefinite(_, c) | Setup::System(_, c) => c,
        }
    }

    pub fn space(&self) -> &P1Space {
        self.problem().space()
    }

    /// `dim H⁽⁻⁾` for indefinite problems.
    pub fn negative_dim(&self) -> Option<usize> {
        match self {
            Setup::Indefinite(p, _) => Some(p.spectral().dim()),
            Setup::System(..) => None,
        }
    }
}

/// `xy(1−x)(1−y)`
pub fn poly_bump(x: f64, y: f64) -> f64 {
    x * y * (1.0 - x) * (1.0 - y)
}

/// `xy(x−1)(y−1)`
pub fn poly_bump_signed(x: f64, y: f64) -> f64 {
    x * y * (x - 1.0) * (y - 1.0)
}

/// Reads a vertex CSV (`x,y,u1[,u2,…]`) back into DOF coefficients.
pub fn read_field_csv(path: &Path, mesh: &Mesh, k: usize) -> Result<Field> {
    let text = fs::read_to_string(path)?;
    let rows: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
    if rows.len() != mesh.vertices().len() {
        return Err(MpaError::InvalidInput(format!(
            "{}: expected {} vertex rows, found {}",
            path.display(),
            mesh.vertices().len(),
            rows.len()
        )));
    }
    let mut comps = vec![vec![0.0; mesh.dofs()]; k];
    for (v, row) in rows.iter().enumerate() {
        let cells: Vec<f64> = row
            .split(',')
            .map(|c| c.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| MpaError::InvalidInput(format!("{}: row {}: {e}", path.display(), v + 1)))?;
        if cells.len() != 2 + k {
            return Err(MpaError::InvalidInput(format!(
                "{}: row {} has {} columns, expected {}",
                path.display(),
                v + 1,
                cells.len(),
                2 + k
            )));
        }
        if let Some(d) = mesh.dof_of_vertex(v) {
            for c in 0..k {
                comps[c][d] = cells[2 + c];
            }
        }
    }
    Ok(Field::new(comps))
}

pub fn initial_guess(cfg: &RunConfig, setup: &Setup) -> Result<Field> {
    let mesh = setup.space().mesh();
    let k = setup.problem().components();
    match &cfg.seed {
        Seed::PolyBump => mesh.interpolate_components(&vec![poly_bump; k]),
        Seed::PolyBumpSigned => mesh.interpolate_components(&vec![poly_bump_signed; k]),
        Seed::File(p) => read_field_csv(p, mesh, k),
    }
}

/// The stable summary of a solve.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub grad_norm: f64,
    pub steps: usize,
    pub energy: f64,
    /// componentwise maxima (systems only)
    pub maxima: Option<Vec<f64>>,
}

impl Summary {
    pub fn header(&self) -> String {
        let mut h = "grad_norm,steps,energy".to_string();
        if let Some(m) = &self.maxima {
            for i in 0..m.len() {
                h.push_str(&format!(",max_u{}", i + 1));
            }
        }
        h
    }

    pub fn line(&self) -> String {
        let mut s = format!("{:.3e},{},{:.6}", self.grad_norm, self.steps, self.energy);
        if let Some(m) = &self.maxima {
            for v in m {
                s.push_str(&format!(",{v:.6}"));
            }
        }
        s
    }
}

pub struct Outcome {
    pub setup: Setup,
    pub solution: Field,
    pub trace: MpaTrace,
    pub summary: Summary,
}

impl Outcome {
    pub fn symmetry(&self) -> SymmetryReport {
        symmetry_report(self.setup.space(), self.solution.component(0))
    }
}

pub fn solve(cfg: &RunConfig) -> Result<Outcome> {
    cfg.validate()?;
    let setup = Setup::build(cfg)?;
    let u0 = initial_guess(cfg, &setup)?;
    let (solution, trace) = run_mpa(setup.problem(), setup.cone(), &u0, &cfg.mpa)?;
    let maxima = matches!(setup, Setup::System(..)).then(|| solution.max());
    let summary = Summary {
        grad_norm: trace.final_grad_norm,
        steps: trace.steps(),
        energy: trace.final_energy,
        maxima,
    };
    Ok(Outcome {
        setup,
        solution,
        trace,
        summary,
    })
}

fn create_run_dir(cfg: &RunConfig) -> Result<PathBuf> {
    let dir = cfg.run_dir();
    fs::create_dir_all(&dir)?;
    fs::write(dir.join("config.txt"), cfg.to_text())?;
    Ok(dir)
}

/// Writes `config.txt`, `solution.csv`, `trace.csv` and `summary.txt` into the
/// run directory and returns it.
pub fn write_outputs(cfg: &RunConfig, out: &Outcome) -> Result<PathBuf> {
    let dir = create_run_dir(cfg)?;
    out.solution
        .write_csv(out.setup.space().mesh(), BufWriter::new(fs::File::create(dir.join("solution.csv"))?))?;
    out.trace
        .write_csv(BufWriter::new(fs::File::create(dir.join("trace.csv"))?))?;
    let status = match out.trace.status {
        RunStatus::Converged => "converged",
        RunStatus::MaxIters => "max_iters",
    };
    let mut text = format!("{}\n{}\nstatus={status}\n", out.summary.header(), out.summary.line());
    if let Some(d) = out.setup.negative_dim() {
        text.push_str(&format!("dim_negative={d}\n"));
    }
    fs::write(dir.join("summary.txt"), text)?;
    Ok(dir)
}

/// Lowest eigenpairs of `−Δ + V` for an indefinite config.
pub fn eigen_report(cfg: &RunConfig) -> Result<Eigenpairs> {
    let ProblemConfig::Indefinite { potential, .. } = cfg.problem else {
        return Err(MpaError::Config("eigenvalue reports need an indefinite problem".into()));
    };
    let space = P1Space::new(Mesh::structured(cfg.mesh_n)?)?;
    let b = assemble_weighted_mass(space.mesh(), |_, _| potential)?;
    let m = assemble_mass(space.mesh());
    let count = cfg.eig_count.min(space.dofs());
    lowest_eigenpairs(space.stiffness(), &b, &m, count, cfg.eig_method)
}

/// Writes `eigs.csv` (`index,lambda,residual`) and returns the run directory.
pub fn write_eigs(cfg: &RunConfig, pairs: &Eigenpairs) -> Result<PathBuf> {
    let dir = create_run_dir(cfg)?;
    let mut text = String::from("index,lambda,residual\n");
    for (i, (l, r)) in pairs.values.iter().zip(&pairs.residuals).enumerate() {
        text.push_str(&format!("{},{l:.12e},{r:.3e}\n", i + 1));
    }
    fs::write(dir.join("eigs.csv"), text)?;
    Ok(dir)
}

/// One row of a reference table.
#[derive(Debug, Clone)]
pub struct ReferenceRow {
    pub label: String,
    pub config: RunConfig,
    pub energy: f64,
    /// relative tolerance on the energy
    pub energy_tol: f64,
    /// reference maxima with relative tolerance (systems)
    pub maxima: Option<[f64; 2]>,
    pub maxima_tol: f64,
    pub negative_dim: Option<usize>,
}

pub const DESK_MESH: usize = 48;

/// Indefinite problem, `p = 4`, seed `xy(x−1)(y−1)`.
pub fn table1(n: usize) -> Vec<ReferenceRow> {
    [(0.0, 37.89, 0.03, 0), (-21.0, 70.43, 0.03, 1), (-50.0, 91.42, 0.04, 3), (-80.0, 35.06, 0.04, 4)]
        .into_iter()
        .map(|(v, e, tol, dim)| ReferenceRow {
            label: format!("V = {v}"),
            config: RunConfig::indefinite(v, n),
            energy: e,
            energy_tol: tol,
            maxima: None,
            maxima_tol: 0.0,
            negative_dim: Some(dim),
        })
        .collect()
}

/// Two-component system, seed `xy(1−x)(1−y)` in both components. A component
/// whose ray coordinate reaches zero is frozen, as happens for β = 1.2.
pub fn table2(n: usize) -> Vec<ReferenceRow> {
    [
        ((1.0, 4.0, -1.0), 88.4, Some([8.6, 5.4])),
        ((1.0, 4.0, 0.5), 40.4, None),
        ((1.0, 4.0, 1.2), 39.9, None),
    ]
    .into_iter()
    .map(|((m1, m2, b), e, maxima)| {
        let mut config = RunConfig::system(m1, m2, b, n);
        if let ProblemConfig::System { vanishing, .. } = &mut config.problem {
            *vanishing = VanishingPolicy::Drop;
        }
        ReferenceRow {
            label: format!("({m1}, {m2}, {b})"),
            config,
            energy: e,
            energy_tol: 0.05,
            maxima,
            maxima_tol: 0.10,
            negative_dim: None,
        }
    })
    .collect()
}

pub fn within(value: f64, reference: f64, rel: f64) -> bool {
    (value - reference).abs() <= rel * reference.abs()
}
