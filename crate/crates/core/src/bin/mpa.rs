use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use mpa_core::config::RunConfig;
use mpa_core::experiments::{self, within, ReferenceRow, DESK_MESH};
use mpa_core::spectral::negative_eigenspace;
use mpa_core::{MpaError, P1Space, Mesh, RunStatus};

const EXIT_RUNTIME: u8 = 1;
const EXIT_MAX_ITERS: u8 = 2;
const EXIT_USAGE: u8 = 64;

#[derive(Parser)]
#[command(name = "mpa", version, about = "Mountain pass solver for semilinear elliptic problems on the unit square")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the mountain pass algorithm described by a config file
    Solve { config: PathBuf },
    /// Report the lowest eigenvalues of −Δ + V and dim H⁽⁻⁾
    Eig { config: PathBuf },
    /// Rerun a reference table and compare against its values
    Reproduce {
        /// `table1` (indefinite problem) or `table2` (coupled system)
        table: String,
        /// subdivisions per side of the mesh
        #[arg(long, default_value_t = DESK_MESH)]
        n: usize,
        /// where the per-run directories go
        #[arg(long, default_value = "runs")]
        out: PathBuf,
    },
}

fn load(path: &Path) -> Result<RunConfig, ExitCode> {
    let text = fs::read_to_string(path).map_err(|e| {
        eprintln!("error: cannot read {}: {e}", path.display());
        ExitCode::from(EXIT_USAGE)
    })?;
    RunConfig::parse(&text).map_err(|e| {
        eprintln!("error: {}: {e}", path.display());
        ExitCode::from(EXIT_USAGE)
    })
}

fn runtime(e: MpaError) -> ExitCode {
    eprintln!("error: {e}");
    match e {
        MpaError::Config(_) => ExitCode::from(EXIT_USAGE),
        _ => ExitCode::from(EXIT_RUNTIME),
    }
}

fn cmd_solve(path: &Path) -> ExitCode {
    let cfg = match load(path) {
        Ok(c) => c,
        Err(code) => return code,
    };
    let outcome = match experiments::solve(&cfg) {
        Ok(o) => o,
        Err(e) => return runtime(e),
    };
    let dir = match experiments::write_outputs(&cfg, &outcome) {
        Ok(d) => d,
        Err(e) => return runtime(e),
    };
    for w in &outcome.trace.warnings {
        eprintln!("warning: {w}");
    }
    println!("{}", outcome.summary.header());
    println!("{}", outcome.summary.line());
    println!("output={}", dir.display());
    match outcome.trace.status {
        RunStatus::Converged => ExitCode::SUCCESS,
        RunStatus::MaxIters => {
            eprintln!("stopped at max_iters = {} before reaching eps_stop", cfg.mpa.max_iters);
            ExitCode::from(EXIT_MAX_ITERS)
        }
    }
}

fn cmd_eig(path: &Path) -> ExitCode {
    let cfg = match load(path) {
        Ok(c) => c,
        Err(code) => return code,
    };
    let pairs = match experiments::eigen_report(&cfg) {
        Ok(p) => p,
        Err(e) => return runtime(e),
    };
    let dir = match experiments::write_eigs(&cfg, &pairs) {
        Ok(d) => d,
        Err(e) => return runtime(e),
    };
    println!("index,lambda,residual");
    for (i, (l, r)) in pairs.values.iter().zip(&pairs.residuals).enumerate() {
        println!("{},{l:.12e},{r:.3e}", i + 1);
    }
    println!("output={}", dir.display());
    let mpa_core::config::ProblemConfig::Indefinite { potential, .. } = cfg.problem else {
        unreachable!("eigen_report rejects systems");
    };
    let basis = P1Space::new(Mesh::structured(cfg.mesh_n).expect("validated mesh size"))
        .and_then(|space| negative_eigenspace(&space, |_, _| potential, cfg.eig_method));
    match basis {
        Ok(b) => {
            println!("dim_negative={}", b.dim());
            ExitCode::SUCCESS
        }
        Err(e) => runtime(e),
    }
}

fn report_row(row: &ReferenceRow, out: &Path) -> Result<bool, MpaError> {
    let mut cfg = row.config.clone();
    cfg.output_dir = out.to_path_buf();
    let o = experiments::solve(&cfg)?;
    experiments::write_outputs(&cfg, &o)?;
    let mut ok = o.trace.status == RunStatus::Converged && o.summary.grad_norm <= cfg.mpa.eps_stop;
    let e_ok = within(o.summary.energy, row.energy, row.energy_tol);
    ok &= e_ok;
    let mut line = format!(
        "{:<16} |∇E| {:.2e}  steps {:>4}  E {:>9.4} (ref {:>6.2} ±{:>2.0}%) {}",
        row.label,
        o.summary.grad_norm,
        o.summary.steps,
        o.summary.energy,
        row.energy,
        100.0 * row.energy_tol,
        if e_ok { "ok" } else { "FAIL" }
    );
    if let Some(maxima) = &o.summary.maxima {
        line.push_str(&format!("  max u = ({:.3}, {:.3})", maxima[0], maxima[1]));
        if let Some(reference) = row.maxima {
            let m_ok = maxima
                .iter()
                .zip(reference)
                .all(|(v, r)| within(*v, r, row.maxima_tol));
            line.push_str(&format!(
                " (ref ({}, {}) ±{:.0}%) {}",
                reference[0],
                reference[1],
                100.0 * row.maxima_tol,
                if m_ok { "ok" } else { "FAIL" }
            ));
            ok &= m_ok;
        }
    }
    if let (Some(want), Some(got)) = (row.negative_dim, o.setup.negative_dim()) {
        line.push_str(&format!("  dim H- {got} (ref {want})"));
        ok &= got == want;
    }
    println!("{line}  => {}", if ok { "PASS" } else { "FAIL" });
    Ok(ok)
}

fn cmd_reproduce(table: &str, n: usize, out: &Path) -> ExitCode {
    let rows = match table {
        "table1" => experiments::table1(n),
        "table2" => experiments::table2(n),
        other => {
            eprintln!("error: unknown table `{other}` (expected table1 or table2)");
            return ExitCode::from(EXIT_USAGE);
        }
    };
    if n < 2 {
        eprintln!("error: --n must be at least 2");
        return ExitCode::from(EXIT_USAGE);
    }
    let mut all = true;
    for row in &rows {
        match report_row(row, out) {
            Ok(ok) => all &= ok,
            Err(e) => return runtime(e),
        }
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_RUNTIME)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match cli.command {
        Command::Solve { config } => cmd_solve(&config),
        Command::Eig { config } => cmd_eig(&config),
        Command::Reproduce { table, n, out } => cmd_reproduce(&table, n, &out),
    }
}
