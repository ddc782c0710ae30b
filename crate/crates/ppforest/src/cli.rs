//! Command-line interface.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::net::{IpAddr, SocketAddr};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ppforest_core::diagnostics::Dissimilarity;
use ppforest_core::{BootstrapKind, ProximityMode};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::io;
use crate::registry::{default_root, train, Registry, TrainedModel, REGISTRY_ENV};
use crate::server::{serve, ServerConfig, TrainRequest};
use crate::views::{self, MdsParams};

#[derive(Debug, Parser)]
#[command(name = "ppforest", version, about = "Projection pursuit forests with diagnostics")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a forest on a CSV file and store it in the registry.
    Train(TrainArgs),
    /// Write one diagnostic of a stored model.
    Export(ExportArgs),
    /// Serve the registry over HTTP.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// CSV file with a header row.
    #[arg(long)]
    pub data: PathBuf,
    /// Name of the class column.
    #[arg(long)]
    pub label: String,
    #[arg(long, default_value_t = 500)]
    pub trees: usize,
    /// Variables sampled at each node [default: ceil(sqrt(p))].
    #[arg(long)]
    pub vars_per_node: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also fit an axis-aligned random forest for comparison.
    #[arg(long)]
    pub baseline: bool,
    /// Variables tried per split in the baseline forest [default: floor(sqrt(p))].
    #[arg(long)]
    pub mtry: Option<usize>,
    #[arg(long, value_enum, default_value_t = BootstrapArg::Stratified)]
    pub bootstrap: BootstrapArg,
    /// Fit on the raw variables instead of standardized ones.
    #[arg(long)]
    pub no_standardize: bool,
    /// Registry directory.
    #[arg(long, env = REGISTRY_ENV)]
    pub out: Option<PathBuf>,
    /// Model name [default: the data file stem].
    #[arg(long)]
    pub name: Option<String>,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BootstrapArg {
    Stratified,
    Plain,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum What {
    Votes,
    Proximity,
    Mds,
    Simplex,
    Importance,
    Roc,
    Trees,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    /// Binary, proximity only.
    Bin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    AllTrees,
    OobOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DissimilarityArg {
    OneMinus,
    SqrtOneMinus,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    /// Model id, as printed by `train`.
    #[arg(long)]
    pub model: String,
    #[arg(long, value_enum)]
    pub what: What,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Output file [default: stdout].
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, env = REGISTRY_ENV)]
    pub registry: Option<PathBuf>,
    /// MDS dimension [default: classes - 1].
    #[arg(long)]
    pub dims: Option<usize>,
    #[arg(long, value_enum, default_value_t = ModeArg::AllTrees)]
    pub proximity_mode: ModeArg,
    #[arg(long, value_enum, default_value_t = DissimilarityArg::OneMinus)]
    pub dissimilarity: DissimilarityArg,
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: IpAddr,
    #[arg(long, env = REGISTRY_ENV)]
    pub registry: Option<PathBuf>,
    /// Allowed CORS origin [default: any].
    #[arg(long)]
    pub cors_origin: Option<String>,
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(a) => run_train(a, &mut std::io::stdout().lock()),
        Command::Export(a) => run_export(a),
        Command::Serve(a) => run_serve(a),
    }
}

pub fn run_train(a: TrainArgs, out: &mut dyn Write) -> Result<()> {
    let d = io::load_csv(&a.data, &a.label)?;
    let name = match a.name {
        Some(n) => n,
        None => a.data.file_stem().and_then(|s| s.to_str()).unwrap_or("model").to_string(),
    };
    let req = TrainRequest {
        name,
        label: a.label,
        csv: None,
        path: None,
        trees: Some(a.trees),
        vars_per_node: a.vars_per_node,
        seed: Some(a.seed),
        bootstrap: Some(match a.bootstrap {
            BootstrapArg::Stratified => BootstrapKind::Stratified,
            BootstrapArg::Plain => BootstrapKind::Plain,
        }),
        standardize: Some(!a.no_standardize),
        baseline: a.baseline,
        mtry: a.mtry,
    };
    let spec = req.spec(d.p());
    let registry = Registry::open(a.out.unwrap_or_else(default_root))?;
    let m = train(&d, &spec, a.threads)?;
    registry.store(&m)?;
    let fmt = |e: Option<f64>| e.map_or_else(|| "n/a".to_string(), |e| format!("{e:.4}"));
    writeln!(out, "model {}", m.entry.model_id)?;
    writeln!(out, "cases {}  variables {}  classes {}", d.n(), d.p(), d.n_classes())?;
    writeln!(out, "PPF  trees {}  OOB error {}", spec.forest.n_trees, fmt(m.entry.oob_error))?;
    if let Some(b) = &spec.baseline {
        writeln!(out, "RF   trees {}  OOB error {}", b.n_trees, fmt(m.entry.rf_oob_error))?;
    }
    writeln!(out, "stored in {}", registry.model_dir(&m.entry.model_id)?.display())?;
    Ok(())
}

fn json_to(w: &mut dyn Write, v: &impl Serialize) -> Result<()> {
    serde_json::to_writer_pretty(&mut *w, v)?;
    writeln!(w)?;
    Ok(())
}

#[derive(Serialize)]
struct VotesExport<'a> {
    class_names: &'a [String],
    votes: &'a [Option<Vec<f64>>],
    oob_counts: &'a [usize],
}

pub fn run_export(a: ExportArgs) -> Result<()> {
    let registry = Registry::open(a.registry.clone().unwrap_or_else(default_root))?;
    if !registry.contains(&a.model) {
        return Err(Error::UnknownModel(a.model));
    }
    let m = registry.load(&a.model)?;
    match &a.out {
        Some(path) => {
            let mut w = BufWriter::new(File::create(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?);
            export(&m, &a, &mut w)?;
            w.flush()?;
        }
        None => export(&m, &a, &mut std::io::stdout().lock())?,
    }
    Ok(())
}

/// Writes the requested diagnostic of `m`.
pub fn export(m: &TrainedModel, a: &ExportArgs, w: &mut dyn Write) -> Result<()> {
    let b = &m.diagnostics;
    let mode = match a.proximity_mode {
        ModeArg::AllTrees => ProximityMode::AllTrees,
        ModeArg::OobOnly => ProximityMode::OobOnly,
    };
    if a.format == Format::Bin && a.what != What::Proximity {
        return Err(Error::Config("binary format is only available for proximity".into()));
    }
    match (a.what, a.format) {
        (What::Votes, Format::Json) => {
            json_to(w, &VotesExport { class_names: &b.class_names, votes: &b.votes, oob_counts: &b.oob_counts })
        }
        (What::Votes, _) => io::write_votes_csv(w, &b.class_names, &b.votes),
        (What::Proximity, Format::Json) => json_to(w, &views::proximity_view(m, mode, a.threads)?),
        (What::Proximity, f) => {
            let pm = views::forest_proximity(m, mode, a.threads)?;
            if f == Format::Csv { io::write_proximity_csv(w, &pm) } else { io::write_proximity_bin(w, &pm) }
        }
        (What::Mds, f) => {
            let params = MdsParams {
                dims: a.dims.unwrap_or(b.class_names.len() - 1),
                dissimilarity: match a.dissimilarity {
                    DissimilarityArg::OneMinus => Dissimilarity::OneMinus,
                    DissimilarityArg::SqrtOneMinus => Dissimilarity::SqrtOneMinus,
                },
                mode,
            };
            let r = views::mds_view(m, params, a.threads)?;
            if f == Format::Json { json_to(w, &r) } else { io::write_mds_csv(w, &r.mds) }
        }
        (What::Simplex, Format::Json) => json_to(w, &b.simplex),
        (What::Simplex, _) => io::write_simplex_csv(w, &b.simplex),
        (What::Importance, Format::Json) => json_to(w, &b.importance),
        (What::Importance, _) => io::write_importance_csv(w, &b.var_names, &b.importance),
        (What::Roc, Format::Json) => json_to(w, &views::roc_view(&m.entry, b, None)?),
        (What::Roc, _) => io::write_roc_csv(w, &b.class_names, &b.roc),
        (What::Trees, Format::Json) => json_to(w, &m.ppf.trees),
        (What::Trees, _) => io::write_trees_csv(w, &m.ppf.trees),
    }
}

pub fn run_serve(a: ServeArgs) -> Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .init();
    let config = ServerConfig {
        registry: a.registry.unwrap_or_else(default_root),
        threads: a.threads,
        cors_origin: a.cors_origin,
    };
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(serve(SocketAddr::new(a.host, a.port), config))
}

/// Parses arguments; usage errors exit with the configuration-error code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 3 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) if is_broken_pipe(&e) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}


// a closed stdout (e.g. piping into `head`) is not an error
fn is_broken_pipe(e: &Error) -> bool {
    let io = match e {
        Error::Io(io) => Some(io),
        Error::Csv(c) => match c.kind() {
            csv::ErrorKind::Io(io) => Some(io),
            _ => None,
        },
        Error::Json(j) => return j.io_error_kind() == Some(std::io::ErrorKind::BrokenPipe),
        _ => None,
    };
    io.is_some_and(|io| io.kind() == std::io::ErrorKind::BrokenPipe)
}
