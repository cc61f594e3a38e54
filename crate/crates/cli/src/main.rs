//! `spinrb`: train, evaluate and validate reduced-basis surrogates for
//! parametrized quantum spin models.

mod config;
mod output;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::RunConfig;
use spinrb_core::diagnostics;
use spinrb_core::modelfile;
use spinrb_core::offline::greedy_train;
use spinrb_core::online::{scan, ScanOptions};
use spinrb_core::Error as CoreError;

const EXIT_CONFIG: u8 = 2;
const EXIT_SOLVER: u8 = 3;

#[derive(Parser)]
#[command(
    name = "spinrb",
    version,
    about = "Reduced-basis surrogate models for parametrized quantum spin Hamiltonians",
    arg_required_else_help = true
)]
struct Cli {
    /// Print the default configuration (TOML, all keys) and exit.
    #[arg(long, global = true)]
    print_config: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Args)]
struct CommonArgs {
    /// Run configuration (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; overrides `out_dir` from the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker-thread cap for parallel sweeps (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Cold-start seed override.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Greedy offline training; writes the model file and a JSONL log.
    Offline {
        #[command(flatten)]
        common: CommonArgs,
        /// Do not store the basis block in the model file (smaller file;
        /// disables warm starts and occupation output downstream).
        #[arg(long)]
        no_store_basis: bool,
    },
    /// Sweep a parameter grid with a trained model; writes CSV + sidecar.
    Scan {
        /// Trained model file.
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Snapshot-matrix singular-value decay over a grid of truth solves.
    Svd {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Error metrics of a trained model against truth solves on the test
    /// grid, across hierarchical basis prefixes.
    Validate {
        /// Trained model file.
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Print the metadata header of a model file.
    ModelInfo {
        /// Trained model file.
        #[arg(long)]
        model: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.print_config {
        print!("{}", RunConfig::default().to_toml());
        println!();
        println!("# Triangle-lattice variant (3 parameter axes):");
        for line in RunConfig::default_for(config::ModelKind::Triangle)
            .to_toml()
            .lines()
        {
            println!("# {line}");
        }
        return ExitCode::SUCCESS;
    }
    let Some(command) = cli.command else {
        eprintln!("error: a subcommand is required (see --help)");
        return ExitCode::from(EXIT_CONFIG);
    };
    match run(command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(classify(&err))
        }
    }
}

/// Exit codes: 2 for configuration/usage problems, 3 for solver failures.
fn classify(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(core) = cause.downcast_ref::<CoreError>() {
            return match core {
                CoreError::SolverFailure { .. }
                | CoreError::DenseCapExceeded { .. }
                | CoreError::Conditioning { .. } => EXIT_SOLVER,
                _ => EXIT_CONFIG,
            };
        }
        if cause.downcast_ref::<SolverAbort>().is_some() {
            return EXIT_SOLVER;
        }
    }
    EXIT_CONFIG
}

#[derive(Debug)]
struct SolverAbort(String);

impl std::fmt::Display for SolverAbort {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "solver failure: {}", self.0)
    }
}

impl std::error::Error for SolverAbort {}

fn run(command: Command) -> anyhow::Result<()> {
    match command {
        Command::Offline {
            common,
            no_store_basis,
        } => cmd_offline(&common, no_store_basis),
        Command::Scan { model, common } => cmd_scan(&model, &common),
        Command::Svd { common } => cmd_svd(&common),
        Command::Validate { model, common } => cmd_validate(&model, &common),
        Command::ModelInfo { model } => cmd_model_info(&model),
    }
}

fn load_config(common: &CommonArgs, default_kind: Option<config::ModelKind>) -> anyhow::Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::from_path(path)?,
        None => RunConfig::default_for(default_kind.ok_or_else(|| {
            anyhow::anyhow!("--config is required for this subcommand")
        })?),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &common.out {
        cfg.out_dir = out.display().to_string();
    }
    init_threads(common.threads);
    Ok(cfg)
}

fn init_threads(threads: Option<usize>) {
    if let Some(n) = threads {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global();
    }
}

fn ensure_out_dir(cfg: &RunConfig) -> anyhow::Result<PathBuf> {
    let dir = PathBuf::from(&cfg.out_dir);
    std::fs::create_dir_all(&dir)
        .map_err(|e| anyhow::anyhow!("cannot create output directory {}: {e}", dir.display()))?;
    Ok(dir)
}

fn cmd_offline(common: &CommonArgs, no_store_basis: bool) -> anyhow::Result<()> {
    let cfg = load_config(common, None)?;
    let out_dir = ensure_out_dir(&cfg)?;
    let (op, _, obs, spec) = cfg.build_model()?;
    let greedy_cfg = cfg.greedy_config()?;

    let log_path = out_dir.join("train_log.jsonl");
    let mut log = BufWriter::new(File::create(&log_path)?);
    eprintln!(
        "offline: {} on a {}-point training grid (tol {:.1e}, budget {})",
        spec.label(),
        greedy_cfg.train_grid.len(),
        greedy_cfg.tol,
        greedy_cfg.max_truth_solves
    );
    let outcome = greedy_train(
        &op,
        Some(spec),
        std::slice::from_ref(&obs),
        &greedy_cfg,
        |rec| {
            let line = serde_json::to_string(rec).expect("record serializes");
            let _ = writeln!(log, "{line}");
            let _ = log.flush();
            eprintln!(
                "  iter {:>3}  N {:>4}  m {:>2}  max residual {:.3e}  mu {}",
                rec.iteration, rec.basis_size, rec.degeneracy, rec.max_residual, rec.mu
            );
        },
    )
    .map_err(anyhow::Error::from)?;

    output::write_residual_history_csv(&out_dir.join("residual_history.csv"), &outcome.rbm)?;
    if let Some(reason) = outcome.abort {
        // Keep partial artifacts under a .partial suffix and exit 3.
        let path = out_dir.join("model.rbm.partial");
        modelfile::save(&outcome.rbm, &path, !no_store_basis)?;
        return Err(SolverAbort(format!(
            "{reason}; partial model kept at {}",
            path.display()
        ))
        .into());
    }
    let path = out_dir.join("model.rbm");
    modelfile::save(&outcome.rbm, &path, !no_store_basis)?;
    eprintln!(
        "offline: done, N = {} from {} truth solves (converged: {}); model at {}",
        outcome.rbm.basis_size(),
        outcome.rbm.samples().len(),
        outcome.converged,
        path.display()
    );
    Ok(())
}

fn scan_momenta(cfg: &RunConfig, outputs: usize) -> anyhow::Result<Vec<usize>> {
    if cfg.scan.momenta.is_empty() {
        Ok((0..outputs).collect())
    } else {
        for &p in &cfg.scan.momenta {
            if p >= outputs {
                anyhow::bail!("momentum index {p} out of range (grid has {outputs})");
            }
        }
        Ok(cfg.scan.momenta.clone())
    }
}

fn cmd_scan(model_path: &Path, common: &CommonArgs) -> anyhow::Result<()> {
    let rbm = modelfile::load(model_path)?;
    let kind = match rbm.model() {
        Some(spinrb_core::ModelSpec::RydbergChain { .. }) => config::ModelKind::Rydberg,
        Some(spinrb_core::ModelSpec::TriangleLattice { .. }) => config::ModelKind::Triangle,
        None => anyhow::bail!("model file lacks a model descriptor"),
    };
    let cfg = load_config(common, Some(kind))?;
    let out_dir = ensure_out_dir(&cfg)?;
    let grid = cfg.scan_grid()?;
    let outputs = rbm.observables()[0].meta.outputs();
    let momenta = scan_momenta(&cfg, outputs)?;
    let opts = ScanOptions {
        occupation: cfg.scan.occupation && rbm.has_basis(),
        momenta: Some(momenta.clone()),
        observable: 0,
    };
    let rows = scan(&rbm, &grid, &opts)?;
    let flagged = rows.iter().filter(|r| r.flag.is_some()).count();
    output::write_scan_csv(
        &out_dir.join("scan.csv"),
        &rbm,
        &rows,
        &momenta,
        grid.dim(),
    )?;
    output::write_scan_sidecar(&out_dir.join("scan_meta.json"), &rbm)?;
    eprintln!(
        "scan: {} points, N = {}, {flagged} flagged rows -> {}",
        rows.len(),
        rbm.basis_size(),
        out_dir.join("scan.csv").display()
    );
    Ok(())
}

fn cmd_svd(common: &CommonArgs) -> anyhow::Result<()> {
    let cfg = load_config(common, None)?;
    let out_dir = ensure_out_dir(&cfg)?;
    let (op, lattice, _, spec) = cfg.build_model()?;
    let grid = cfg.svd_grid()?;
    let truth = cfg.truth_config();
    if lattice.hilbert_dim() > truth.dense_cap {
        anyhow::bail!(
            "svd needs exhaustive truth solves; Hilbert dimension {} exceeds the dense cap {} \
             (desk-scale sizes only)",
            lattice.hilbert_dim(),
            truth.dense_cap
        );
    }
    eprintln!(
        "svd: {} over {} truth solves",
        spec.label(),
        grid.len()
    );
    let decay = diagnostics::snapshot_svd(&op, &grid, &truth)?;
    output::write_svd_csv(&out_dir.join("svd_decay.csv"), &decay)?;
    let meta = serde_json::json!({
        "model": spec,
        "grid_points": decay.truth_points,
        "snapshot_columns": decay.columns,
        "truth_iterations": decay.truth_iterations,
        "basis_size_tol_1e-6": decay.basis_size_for(1e-6),
        "basis_size_tol_1e-8": decay.basis_size_for(1e-8),
        "basis_size_tol_1e-10": decay.basis_size_for(1e-10),
        "hilbert_dim": lattice.hilbert_dim(),
    });
    std::fs::write(
        out_dir.join("svd_meta.json"),
        serde_json::to_string_pretty(&meta)?,
    )?;
    eprintln!(
        "svd: {} columns -> {}",
        decay.columns,
        out_dir.join("svd_decay.csv").display()
    );
    Ok(())
}

fn cmd_validate(model_path: &Path, common: &CommonArgs) -> anyhow::Result<()> {
    let rbm = modelfile::load(model_path)?;
    let kind = match rbm.model() {
        Some(spinrb_core::ModelSpec::RydbergChain { .. }) => config::ModelKind::Rydberg,
        Some(spinrb_core::ModelSpec::TriangleLattice { .. }) => config::ModelKind::Triangle,
        None => anyhow::bail!("model file lacks a model descriptor"),
    };
    let cfg = load_config(common, Some(kind))?;
    let out_dir = ensure_out_dir(&cfg)?;
    let (op, lattice, obs, _) = cfg.build_model()?;
    let truth = cfg.truth_config();
    if lattice.hilbert_dim() > truth.dense_cap {
        anyhow::bail!(
            "validate needs exhaustive truth solves; Hilbert dimension {} exceeds the dense cap \
             {} (desk-scale sizes only)",
            lattice.hilbert_dim(),
            truth.dense_cap
        );
    }
    let grid = cfg.test_grid()?;
    let prefixes = (!cfg.validate.prefixes.is_empty()).then(|| cfg.validate.prefixes.clone());
    eprintln!(
        "validate: N = {} against {} truth solves",
        rbm.basis_size(),
        grid.len()
    );
    let report = diagnostics::validate(&rbm, &op, &obs, &grid, &truth, prefixes)?;
    output::write_validation_csv(&out_dir.join("validate_errors.csv"), &report)?;
    if cfg.validate.per_point {
        output::write_validation_points_csv(&out_dir.join("validate_points.csv"), &report)?;
    }
    std::fs::write(
        out_dir.join("validate_report.json"),
        serde_json::to_string_pretty(&report)?,
    )?;
    if let Some(last) = report.per_basis.last() {
        eprintln!(
            "validate: N = {}: err_val {:.3e}, err_vec {:.3e}, err_sf {:.3e}, max residual {:.3e}",
            last.basis_size, last.err_val, last.err_vec, last.err_sf, last.max_residual
        );
    }
    Ok(())
}

fn cmd_model_info(model_path: &Path) -> anyhow::Result<()> {
    let header = modelfile::load_header(model_path)?;
    let info = serde_json::json!({
        "schema_version": header.schema_version,
        "model": header.model,
        "domain": header.domain,
        "hilbert_dim": header.full_dim,
        "q_terms": header.q_terms,
        "basis_size": header.basis_size,
        "truth_solves": header.samples.len(),
        "basis_included": header.basis_included,
        "greedy_tol": header.greedy_tol,
        "compress_tol": header.compress_tol,
        "tol_degeneracy": header.tol_degeneracy,
        "final_max_residual": header.history.last().map(|r| r.max_residual),
        "observables": header.observables.iter().map(|o| &o.label).collect::<Vec<_>>(),
        "blocks": header.blocks.len(),
        "samples": header.samples,
    });
    println!("{}", serde_json::to_string_pretty(&info)?);
    Ok(())
}
