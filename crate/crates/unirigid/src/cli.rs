//! The `unirigid` command line front end.
//!
//! Exit status: 0 on success, 1 when a pipeline fails or a certificate does
//! not verify, 2 when an input cannot be read or does not match its schema.

use std::ffi::OsString;
use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;
use unirigid_core::{self as core, rigidity, stress, Framework, OpSequence, Tolerances};

use crate::format::{
    self, CertificateDoc, FrameworkDoc, GraphDoc, SchemaError, SequenceDoc, VERSION,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_INPUT: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "unirigid",
    version,
    about = "Universal rigidity certificates for Hennenberg-built graphs"
)]
pub struct Cli {
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Relative zero threshold for stress-matrix eigenvalues.
    #[arg(long, global = true, default_value_t = 1e-8)]
    pub tol: f64,
    /// Retry budget for each degenerate random draw.
    #[arg(long, global = true, default_value_t = 16)]
    pub retries: usize,
    /// Output file (a directory when several inputs are given); standard
    /// output if absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads for batches of sequences.
    #[arg(long, global = true, default_value_t = 1)]
    pub jobs: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Replay a sequence and write the resulting graph.
    Build {
        /// Sequence file, or `-` for standard input. Without one, writes
        /// the complete graph on `dim + 2` vertices.
        sequence: Option<PathBuf>,
        /// Dimension; must match the sequence when both are given.
        #[arg(long)]
        dim: Option<usize>,
    },
    /// Certify that the graph of each sequence has a generic universally
    /// rigid framework.
    CertifyGur {
        #[arg(required = true)]
        sequences: Vec<PathBuf>,
    },
    /// Build a generic framework whose unique stress matrix is indefinite,
    /// together with a universally rigid framework of the same graph.
    WitnessSur {
        #[arg(required = true)]
        sequences: Vec<PathBuf>,
    },
    /// Report rigidity properties of a framework.
    Check { framework: PathBuf },
    /// Stress-space dimension of generic frameworks after every prefix of a
    /// sequence.
    AuditStressDim { sequence: PathBuf },
    /// Re-check a certificate's equilibrium and spectrum.
    Verify { certificate: PathBuf },
}

/// Why a command did not succeed.
#[derive(Debug)]
pub enum Failure {
    /// Unreadable or malformed input (exit 2).
    Input(String),
    /// A pipeline error (exit 1).
    Pipeline(core::Error),
    /// A certificate that does not verify, or an output that cannot be
    /// written (exit 1).
    Rejected(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Input(_) => EXIT_INPUT,
            Failure::Pipeline(_) | Failure::Rejected(_) => EXIT_FAILURE,
        }
    }

    fn message(&self) -> String {
        match self {
            Failure::Input(m) => format!("input error: {m}"),
            Failure::Pipeline(e) => format!("{}: {e}", e.name()),
            Failure::Rejected(m) => m.clone(),
        }
    }
}

impl From<core::Error> for Failure {
    fn from(e: core::Error) -> Self {
        Failure::Pipeline(e)
    }
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the exit status.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(stderr, "{}", e.render());
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    match execute(&cli, stdout, stderr) {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(stderr, "error: {}", f.message());
            f.exit_code()
        }
    }
}

fn tolerances(cli: &Cli) -> Result<Tolerances, Failure> {
    if !(cli.tol.is_finite() && cli.tol > 0.0) {
        return Err(Failure::Input(format!(
            "--tol must be positive, got {}",
            cli.tol
        )));
    }
    if cli.retries == 0 {
        return Err(Failure::Input("--retries must be at least 1".into()));
    }
    if cli.jobs == 0 {
        return Err(Failure::Input("--jobs must be at least 1".into()));
    }
    Ok(Tolerances::default()
        .with_spectral(cli.tol)
        .with_retries(cli.retries))
}

fn execute(cli: &Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<i32, Failure> {
    let tol = tolerances(cli)?;
    let out = cli.out.as_deref();
    match &cli.command {
        Command::Build { sequence, dim } => {
            let seq = match (sequence, dim) {
                (Some(path), _) => {
                    let seq = read_sequence(path)?;
                    if let Some(d) = dim.filter(|&d| d != seq.dimension) {
                        return Err(Failure::Input(format!(
                            "--dim {d} does not match the sequence dimension {}",
                            seq.dimension
                        )));
                    }
                    seq
                }
                (None, Some(0)) => return Err(Failure::Input("--dim must be positive".into())),
                (None, Some(d)) => OpSequence::new(*d),
                (None, None) => {
                    return Err(Failure::Input("build needs a sequence or --dim".into()))
                }
            };
            let g = core::build_graph(&seq)?;
            emit(out, stdout, &format::to_json(&GraphDoc::from(&g)))?;
            Ok(EXIT_OK)
        }
        Command::CertifyGur { sequences } => {
            batch(cli, sequences, &tol, stdout, stderr, Pipeline::Gur)
        }
        Command::WitnessSur { sequences } => {
            batch(cli, sequences, &tol, stdout, stderr, Pipeline::Sur)
        }
        Command::Check { framework } => {
            let f = read_doc::<FrameworkDoc>(framework)?
                .to_framework()
                .map_err(schema)?;
            let report = check_report(&f, &tol)?;
            emit(out, stdout, &format::to_json(&report))?;
            Ok(EXIT_OK)
        }
        Command::AuditStressDim { sequence } => {
            let seq = read_sequence(sequence)?;
            let dims = core::stress_dimension_audit(&seq, cli.seed, &tol)?;
            let doc = AuditDoc {
                version: VERSION,
                dimension: seq.dimension,
                stress_space_dimensions: dims,
            };
            emit(out, stdout, &format::to_json(&doc))?;
            Ok(EXIT_OK)
        }
        Command::Verify { certificate } => {
            let parts = read_doc::<CertificateDoc>(certificate)?
                .to_claim()
                .map_err(schema)?;
            let mut report = core::verify_claim(&parts.claim());
            report.checks.insert(
                0,
                core::Check {
                    name: "graph-field",
                    passed: parts.graph_matches,
                    detail: "top-level graph equals the framework's graph".into(),
                },
            );
            let doc = VerifyDoc {
                version: VERSION,
                passed: report.passed(),
                checks: report
                    .checks
                    .iter()
                    .map(|c| CheckDoc {
                        name: c.name.into(),
                        passed: c.passed,
                        detail: c.detail.clone(),
                    })
                    .collect(),
            };
            emit(out, stdout, &format::to_json(&doc))?;
            if report.passed() {
                Ok(EXIT_OK)
            } else {
                for c in report.failures() {
                    let _ = writeln!(stderr, "verification failed: {}: {}", c.name, c.detail);
                }
                Ok(EXIT_FAILURE)
            }
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Pipeline {
    Gur,
    Sur,
}

fn certify(
    path: &Path,
    seed: u64,
    tol: &Tolerances,
    pipeline: Pipeline,
) -> Result<String, Failure> {
    let seq = read_sequence(path)?;
    let cert = match pipeline {
        Pipeline::Gur => core::certify_gur(&seq, seed, tol)?,
        Pipeline::Sur => core::witness_sur(&seq, seed, tol)?,
    };
    Ok(format::to_json(&CertificateDoc::from(&cert)))
}

/// One input writes to `--out` or standard output; several inputs write
/// `<stem>.cert.json` files into the `--out` directory, `--jobs` at a time.
fn batch(
    cli: &Cli,
    inputs: &[PathBuf],
    tol: &Tolerances,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
    pipeline: Pipeline,
) -> Result<i32, Failure> {
    if let [single] = inputs {
        let json = certify(single, cli.seed, tol, pipeline)?;
        emit(cli.out.as_deref(), stdout, &json)?;
        return Ok(EXIT_OK);
    }
    let Some(dir) = cli.out.as_deref() else {
        return Err(Failure::Input("several inputs need --out DIR".into()));
    };
    fs::create_dir_all(dir)
        .map_err(|e| Failure::Rejected(format!("cannot create {}: {e}", dir.display())))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs)
        .build()
        .map_err(|e| Failure::Rejected(format!("cannot start workers: {e}")))?;
    let results: Vec<Result<(), Failure>> = pool.install(|| {
        inputs
            .par_iter()
            .map(|input| {
                let json = certify(input, cli.seed, tol, pipeline)?;
                let stem = input
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| "stdin".into());
                write_atomic(&dir.join(format!("{stem}.cert.json")), &json)
            })
            .collect()
    });
    let mut code = EXIT_OK;
    for (input, result) in inputs.iter().zip(results) {
        if let Err(f) = result {
            let _ = writeln!(stderr, "error: {}: {}", input.display(), f.message());
            code = code.max(f.exit_code());
        }
    }
    Ok(code)
}

fn schema(e: SchemaError) -> Failure {
    Failure::Input(e.0)
}

fn read_input(path: &Path) -> Result<String, Failure> {
    if path.as_os_str() == "-" {
        let mut s = String::new();
        io::stdin()
            .read_to_string(&mut s)
            .map_err(|e| Failure::Input(format!("standard input: {e}")))?;
        return Ok(s);
    }
    fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

/// Parses a document; the diagnostic carries the line and column from
/// `serde_json`, and names the field for missing or mistyped fields.
fn read_doc<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let text = read_input(path)?;
    serde_json::from_str(&text).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn read_sequence(path: &Path) -> Result<OpSequence, Failure> {
    read_doc::<SequenceDoc>(path)?
        .to_sequence()
        .map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn emit(out: Option<&Path>, stdout: &mut dyn Write, content: &str) -> Result<(), Failure> {
    match out {
        Some(path) => write_atomic(path, content),
        None => stdout
            .write_all(content.as_bytes())
            .map_err(|e| Failure::Rejected(format!("cannot write output: {e}"))),
    }
}

/// Writes through a temporary file in the target directory and renames it
/// into place, so readers never observe a partial file.
pub fn write_atomic(path: &Path, content: &str) -> Result<(), Failure> {
    let fail = |e: io::Error| Failure::Rejected(format!("cannot write {}: {e}", path.display()));
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(fail)?;
    tmp.write_all(content.as_bytes()).map_err(fail)?;
    tmp.as_file().sync_all().map_err(fail)?;
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        fs::set_permissions(tmp.path(), fs::Permissions::from_mode(0o644)).map_err(fail)?;
    }
    tmp.persist(path).map_err(|e| fail(e.error))?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct AuditDoc {
    version: u32,
    dimension: usize,
    stress_space_dimensions: Vec<usize>,
}

#[derive(Debug, Serialize)]
struct CheckDoc {
    name: String,
    passed: bool,
    detail: String,
}

#[derive(Debug, Serialize)]
struct VerifyDoc {
    version: u32,
    passed: bool,
    checks: Vec<CheckDoc>,
}

#[derive(Debug, Serialize)]
struct RankDoc {
    rank: usize,
    target: usize,
    rigid: bool,
}

#[derive(Debug, Serialize)]
struct RedundancyDoc {
    redundant: bool,
    methods_agree: bool,
    /// Edges whose removal loses infinitesimal rigidity.
    critical_edges: Vec<[usize; 2]>,
}

#[derive(Debug, Serialize)]
struct ConicDoc {
    q: Vec<Vec<f64>>,
    max_relative_residual: f64,
}

#[derive(Debug, Serialize)]
struct HendricksonDoc {
    redundant: bool,
    connectivity: usize,
    pass: bool,
}

#[derive(Debug, Serialize)]
struct CheckReportDoc {
    version: u32,
    num_vertices: usize,
    num_edges: usize,
    dimension: usize,
    infinitesimal_rigidity: RankDoc,
    /// `null` when the framework is not infinitesimally rigid.
    redundant_rigidity: Option<RedundancyDoc>,
    vertex_connectivity: usize,
    /// `null` when no conic at infinity contains every edge direction.
    conic_at_infinity: Option<ConicDoc>,
    stress_space_dimension: usize,
    hendrickson: HendricksonDoc,
}

fn check_report(f: &Framework, tol: &Tolerances) -> Result<CheckReportDoc, Failure> {
    let g = f.graph();
    let rank = rigidity::is_infinitesimally_rigid(f, tol.rank);
    let redundant_rigidity = match rigidity::is_redundantly_rigid(f, tol.rank) {
        Ok(r) => Some(RedundancyDoc {
            redundant: r.redundant,
            methods_agree: r.methods_agree,
            critical_edges: g
                .edges()
                .iter()
                .zip(&r.by_rank)
                .filter(|(_, &ok)| !ok)
                .map(|(e, _)| [e.i(), e.j()])
                .collect(),
        }),
        Err(core::Error::PreconditionViolation(_)) => None,
        Err(e) => return Err(e.into()),
    };
    let conic = rigidity::conic_at_infinity(f, tol.rank)?.map(|w| {
        let q = w.q_matrix();
        ConicDoc {
            q: (0..q.nrows())
                .map(|r| q.row(r).iter().copied().collect())
                .collect(),
            max_relative_residual: w.max_relative_residual(f),
        }
    });
    let h = core::verify_hendrickson(f, tol.rank);
    Ok(CheckReportDoc {
        version: VERSION,
        num_vertices: f.num_vertices(),
        num_edges: g.num_edges(),
        dimension: f.dimension(),
        infinitesimal_rigidity: RankDoc {
            rank: rank.rank,
            target: rank.target,
            rigid: rank.rigid,
        },
        redundant_rigidity,
        vertex_connectivity: rigidity::vertex_connectivity(g),
        conic_at_infinity: conic,
        stress_space_dimension: stress::stress_space_basis(f, tol.rank).len(),
        hendrickson: HendricksonDoc {
            redundant: h.redundant,
            connectivity: h.connectivity,
            pass: h.pass,
        },
    })
}
