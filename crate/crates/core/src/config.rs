//! Flat `key = value` run configuration.
//!
//! ```text
//! # indefinite problem, V = -21
//! [problem]
//! kind = indefinite
//! potential = -21
//! exponent = 4
//!
//! [mesh]
//! n = 48
//! ```
//!
//! Keys are grouped in sections (`problem`, `mesh`, `mpa`, `seed`, `eig`,
//! `output`); a key may also be written fully qualified as `mpa.alpha = 0.5`
//! outside any section. Unknown keys are rejected.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use sha2::{Digest, Sha256};

use crate::cones::VanishingPolicy;
use crate::error::{MpaError, Result};
use crate::mpa::{MpaConfig, StepRule};
use crate::spectral::EigenMethod;

#[derive(Debug, Clone, PartialEq)]
pub enum ProblemConfig {
    Indefinite {
        potential: f64,
        exponent: f64,
    },
    System {
        mu: Vec<f64>,
        beta: Vec<Vec<f64>>,
        vanishing: VanishingPolicy,
    },
}

/// Initial guess.
#[derive(Debug, Clone, PartialEq)]
pub enum Seed {
    /// `xy(1−x)(1−y)` in every component
    PolyBump,
    /// `xy(x−1)(y−1)` in every component
    PolyBumpSigned,
    /// solution CSV (`x,y,u1[,u2,…]` over all vertices) from an earlier run
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub problem: ProblemConfig,
    pub mesh_n: usize,
    pub mpa: MpaConfig,
    pub seed: Seed,
    pub eig_count: usize,
    pub eig_method: EigenMethod,
    pub output_dir: PathBuf,
}

const KEYS: &[&str] = &[
    "problem.kind",
    "problem.potential",
    "problem.exponent",
    "problem.mu",
    "problem.beta",
    "problem.vanishing",
    "mesh.n",
    "mpa.eps_stop",
    "mpa.alpha",
    "mpa.s_init",
    "mpa.s_max",
    "mpa.s_min",
    "mpa.max_iters",
    "mpa.rule",
    "mpa.tilde_grid",
    "seed.u0",
    "eig.count",
    "eig.method",
    "output.dir",
];

fn err(line: usize, msg: impl std::fmt::Display) -> MpaError {
    MpaError::Config(format!("line {line}: {msg}"))
}

fn parse_f64(key: &str, v: &str) -> Result<f64> {
    let x: f64 = v
        .parse()
        .map_err(|_| MpaError::Config(format!("{key}: `{v}` is not a number")))?;
    if !x.is_finite() {
        return Err(MpaError::Config(format!("{key}: `{v}` is not finite")));
    }
    Ok(x)
}

fn parse_usize(key: &str, v: &str) -> Result<usize> {
    v.parse()
        .map_err(|_| MpaError::Config(format!("{key}: `{v}` is not a nonnegative integer")))
}

fn parse_list(key: &str, v: &str) -> Result<Vec<f64>> {
    v.split(',').map(|s| parse_f64(key, s.trim())).collect()
}

/// `β` as a single coupling (two components) or rows separated by `;`
/// (a trailing `;` is allowed).
fn parse_beta(v: &str, k: usize) -> Result<Vec<Vec<f64>>> {
    if !v.contains(';') {
        let b = parse_f64("problem.beta", v)?;
        if k != 2 {
            return Err(MpaError::Config(format!(
                "problem.beta: a single coupling needs 2 components, found {k}; give the full matrix with `;` between rows"
            )));
        }
        return Ok(vec![vec![0.0, b], vec![b, 0.0]]);
    }
    let rows: Vec<Vec<f64>> = v
        .split(';')
        .filter(|r| !r.trim().is_empty())
        .map(|r| {
            r.split(|c: char| c == ',' || c.is_whitespace())
                .filter(|s| !s.is_empty())
                .map(|s| parse_f64("problem.beta", s))
                .collect()
        })
        .collect::<Result<_>>()?;
    if rows.len() != k || rows.iter().any(|r| r.len() != k) {
        return Err(MpaError::Config(format!("problem.beta must be {k}x{k}")));
    }
    Ok(rows)
}

impl RunConfig {
    pub fn indefinite(potential: f64, n: usize) -> Self {
        Self {
            problem: ProblemConfig::Indefinite {
                potential,
                exponent: 4.0,
            },
            mesh_n: n,
            mpa: MpaConfig::default(),
            seed: Seed::PolyBumpSigned,
            eig_count: 6,
            eig_method: EigenMethod::Auto,
            output_dir: PathBuf::from("runs"),
        }
    }

    pub fn system(mu1: f64, mu2: f64, beta: f64, n: usize) -> Self {
        Self {
            problem: ProblemConfig::System {
                mu: vec![mu1, mu2],
                beta: vec![vec![0.0, beta], vec![beta, 0.0]],
                vanishing: VanishingPolicy::Error,
            },
            mesh_n: n,
            seed: Seed::PolyBump,
            ..Self::indefinite(0.0, n)
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut map: BTreeMap<String, (usize, String)> = BTreeMap::new();
        let mut section = String::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| err(line_no, "unterminated section header"))?
                    .trim();
                section = name.to_string();
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| err(line_no, format!("expected `key = value`, got `{line}`")))?;
            let k = k.trim();
            let key = if k.contains('.') || section.is_empty() {
                k.to_string()
            } else {
                format!("{section}.{k}")
            };
            if !KEYS.contains(&key.as_str()) {
                return Err(err(line_no, format!("unknown key `{key}`")));
            }
            if map.insert(key.clone(), (line_no, v.trim().to_string())).is_some() {
                return Err(err(line_no, format!("duplicate key `{key}`")));
            }
        }
        let get = |k: &str| map.get(k).map(|(_, v)| v.as_str());

        let kind = get("problem.kind").ok_or_else(|| MpaError::Config("missing problem.kind".into()))?;
        let mesh_n = get("mesh.n").map_or(Ok(48), |v| parse_usize("mesh.n", v))?;
        let mut cfg = match kind {
            "indefinite" => {
                for k in ["problem.mu", "problem.beta", "problem.vanishing"] {
                    if map.contains_key(k) {
                        return Err(MpaError::Config(format!("`{k}` does not apply to an indefinite problem")));
                    }
                }
                let potential = get("problem.potential").map_or(Ok(0.0), |v| parse_f64("problem.potential", v))?;
                let exponent = get("problem.exponent").map_or(Ok(4.0), |v| parse_f64("problem.exponent", v))?;
                let mut c = Self::indefinite(potential, mesh_n);
                c.problem = ProblemConfig::Indefinite { potential, exponent };
                c
            }
            "system" => {
                for k in ["problem.potential", "problem.exponent"] {
                    if map.contains_key(k) {
                        return Err(MpaError::Config(format!("`{k}` does not apply to a system")));
                    }
                }
                let mu = parse_list(
                    "problem.mu",
                    get("problem.mu").ok_or_else(|| MpaError::Config("missing problem.mu".into()))?,
                )?;
                let beta = match get("problem.beta") {
                    Some(v) => parse_beta(v, mu.len())?,
                    None => vec![vec![0.0; mu.len()]; mu.len()],
                };
                let vanishing = match get("problem.vanishing") {
                    None | Some("error") => VanishingPolicy::Error,
                    Some("drop") => VanishingPolicy::Drop,
                    Some(other) => {
                        return Err(MpaError::Config(format!(
                            "problem.vanishing must be `error` or `drop`, got `{other}`"
                        )))
                    }
                };
                let mut c = Self::system(1.0, 1.0, 0.0, mesh_n);
                c.problem = ProblemConfig::System { mu, beta, vanishing };
                c
            }
            other => {
                return Err(MpaError::Config(format!(
                    "problem.kind must be `indefinite` or `system`, got `{other}`"
                )))
            }
        };

        let m = &mut cfg.mpa;
        if let Some(v) = get("mpa.eps_stop") {
            m.eps_stop = parse_f64("mpa.eps_stop", v)?;
        }
        if let Some(v) = get("mpa.alpha") {
            m.alpha = parse_f64("mpa.alpha", v)?;
        }
        if let Some(v) = get("mpa.s_init") {
            m.s_init = parse_f64("mpa.s_init", v)?;
        }
        if let Some(v) = get("mpa.s_max") {
            m.s_max = parse_f64("mpa.s_max", v)?;
        }
        if let Some(v) = get("mpa.s_min") {
            m.s_min = parse_f64("mpa.s_min", v)?;
        }
        if let Some(v) = get("mpa.max_iters") {
            m.max_iters = parse_usize("mpa.max_iters", v)?;
        }
        if let Some(v) = get("mpa.rule") {
            m.rule = match v {
                "S" | "s" => StepRule::S,
                "tilde" => StepRule::Tilde,
                other => return Err(MpaError::Config(format!("mpa.rule must be `S` or `tilde`, got `{other}`"))),
            };
        }
        if let Some(v) = get("mpa.tilde_grid") {
            m.tilde_grid = parse_usize("mpa.tilde_grid", v)?
                .try_into()
                .map_err(|_| MpaError::Config("mpa.tilde_grid is too large".into()))?;
        }
        if let Some(v) = get("seed.u0") {
            cfg.seed = match v {
                "poly_bump" => Seed::PolyBump,
                "poly_bump_signed" => Seed::PolyBumpSigned,
                other => match other.strip_prefix("file:") {
                    Some(p) => Seed::File(PathBuf::from(p.trim())),
                    None => {
                        return Err(MpaError::Config(format!(
                            "seed.u0 must be `poly_bump`, `poly_bump_signed` or `file:<path>`, got `{other}`"
                        )))
                    }
                },
            };
        }
        if let Some(v) = get("eig.count") {
            cfg.eig_count = parse_usize("eig.count", v)?;
        }
        if let Some(v) = get("eig.method") {
            cfg.eig_method = match v {
                "auto" => EigenMethod::Auto,
                "dense" => EigenMethod::Dense,
                "subspace" => EigenMethod::SubspaceIteration,
                other => {
                    return Err(MpaError::Config(format!(
                        "eig.method must be `auto`, `dense` or `subspace`, got `{other}`"
                    )))
                }
            };
        }
        if let Some(v) = get("output.dir") {
            cfg.output_dir = PathBuf::from(v);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.mesh_n < 2 {
            return Err(MpaError::Config(format!("mesh.n must be at least 2, got {}", self.mesh_n)));
        }
        if self.eig_count == 0 {
            return Err(MpaError::Config("eig.count must be positive".into()));
        }
        match &self.problem {
            ProblemConfig::Indefinite { exponent, .. } => {
                if !(*exponent > 2.0) {
                    return Err(MpaError::Config(format!("problem.exponent must exceed 2, got {exponent}")));
                }
            }
            ProblemConfig::System { mu, beta, .. } => {
                if mu.is_empty() || mu.iter().any(|m| !(*m > 0.0)) {
                    return Err(MpaError::Config("problem.mu entries must be positive".into()));
                }
                let k = mu.len();
                for i in 0..k {
                    if beta[i][i] != 0.0 {
                        return Err(MpaError::Config("problem.beta must have a zero diagonal".into()));
                    }
                    for j in 0..k {
                        if beta[i][j] != beta[j][i] {
                            return Err(MpaError::Config("problem.beta must be symmetric".into()));
                        }
                    }
                }
            }
        }
        self.mpa
            .validate()
            .map_err(|e| MpaError::Config(e.to_string()))
    }

    /// Canonical text form; [`RunConfig::parse`] reads it back to an equal value.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        s.push_str("[problem]\n");
        match &self.problem {
            ProblemConfig::Indefinite { potential, exponent } => {
                let _ = writeln!(s, "kind = indefinite\npotential = {potential:?}\nexponent = {exponent:?}");
            }
            ProblemConfig::System { mu, beta, vanishing } => {
                let mu: Vec<String> = mu.iter().map(|m| format!("{m:?}")).collect();
                let rows: Vec<String> = beta
                    .iter()
                    .map(|r| r.iter().map(|b| format!("{b:?}")).collect::<Vec<_>>().join(" "))
                    .collect();
                let vanishing = match vanishing {
                    VanishingPolicy::Error => "error",
                    VanishingPolicy::Drop => "drop",
                };
                let _ = writeln!(
                    s,
                    "kind = system\nmu = {}\nbeta = {};\nvanishing = {vanishing}",
                    mu.join(", "),
                    rows.join("; ")
                );
            }
        }
        let m = &self.mpa;
        let rule = match m.rule {
            StepRule::S => "S",
            StepRule::Tilde => "tilde",
        };
        let seed = match &self.seed {
            Seed::PolyBump => "poly_bump".to_string(),
            Seed::PolyBumpSigned => "poly_bump_signed".to_string(),
            Seed::File(p) => format!("file:{}", p.display()),
        };
        let method = match self.eig_method {
            EigenMethod::Auto => "auto",
            EigenMethod::Dense => "dense",
            EigenMethod::SubspaceIteration => "subspace",
        };
        let _ = write!(
            s,
            "\n[mesh]\nn = {}\n\n[mpa]\neps_stop = {:?}\nalpha = {:?}\ns_init = {:?}\ns_max = {:?}\ns_min = {:?}\n\
             max_iters = {}\nrule = {rule}\ntilde_grid = {}\n\n[seed]\nu0 = {seed}\n\n[eig]\ncount = {}\nmethod = {method}\n\n\
             [output]\ndir = {}\n",
            self.mesh_n,
            m.eps_stop,
            m.alpha,
            m.s_init,
            m.s_max,
            m.s_min,
            m.max_iters,
            m.tilde_grid,
            self.eig_count,
            self.output_dir.display()
        );
        s
    }

    /// First 12 hex digits of the SHA-256 of the canonical text.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_text().as_bytes());
        digest.iter().take(6).map(|b| format!("{b:02x}")).collect()
    }

    /// `<output.dir>/<kind>-<hash>`
    pub fn run_dir(&self) -> PathBuf {
        let kind = match self.problem {
            ProblemConfig::Indefinite { .. } => "indefinite",
            ProblemConfig::System { .. } => "system",
        };
        self.output_dir.join(format!("{kind}-{}", self.hash()))
    }
}
