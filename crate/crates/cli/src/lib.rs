//! Command-line front end: encode position files, render similarity
//! heatmaps, run the verification suites and the toy training tasks.

mod encode;
mod heatmap;
pub mod presets;
mod train;
pub mod verify;

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use fourier_pe::encoders::{load_checkpoint, parse_spec, serialize_spec, Encoder, EncoderSpec};
use fourier_pe::SeededRng;

pub use encode::EncodeArgs;
pub use heatmap::HeatmapArgs;
pub use train::TrainArgs;
pub use verify::VerifyArgs;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Input(String),
    #[error("{failed} of {total} checks failed")]
    ChecksFailed { failed: usize, total: usize },
    #[error(transparent)]
    Core(#[from] fourier_pe::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

impl CliError {
    /// 1 for failed checks and runtime failures, 2 for usage and input errors.
    pub fn exit_code(&self) -> i32 {
        use fourier_pe::Error as E;
        match self {
            CliError::Usage(_) | CliError::Input(_) => 2,
            CliError::Core(E::Config(_) | E::Shape { .. } | E::UnseenIndex { .. } | E::Checkpoint(_)) => 2,
            _ => 1,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(
    name = "fourier-pe",
    version,
    about = "Learnable Fourier feature positional encodings"
)]
pub struct Cli {
    /// Seed for every random draw.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Encoder config file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Named encoder preset (see `presets`).
    #[arg(long, global = true)]
    pub preset: Option<String>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Encode a CSV of positions.
    Encode(EncodeArgs),
    /// Write similarity heatmaps as PGM, CSV and a .meta sidecar.
    Heatmap(HeatmapArgs),
    /// Run invariant checks; exit status 1 if any fails.
    Verify(VerifyArgs),
    /// Fit a kernel or train the retrieval toy.
    Train(TrainArgs),
    /// List presets, or print one as a config file.
    Presets {
        /// Preset to print.
        name: Option<String>,
    },
}

pub struct Globals {
    pub seed: u64,
    pub config: Option<PathBuf>,
    pub preset: Option<String>,
    pub out: Option<PathBuf>,
}

impl Globals {
    /// The encoder named by `--config` or `--preset`, if either is given.
    pub fn spec(&self) -> CliResult<Option<EncoderSpec>> {
        match (&self.config, &self.preset) {
            (Some(_), Some(_)) => Err(CliError::Usage("give --config or --preset, not both".into())),
            (Some(path), None) => {
                let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
                parse_spec(&text)
                    .map(Some)
                    .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
            }
            (None, Some(name)) => presets::find(name)
                .map(|p| Some(p.spec()))
                .ok_or_else(|| CliError::Usage(format!("unknown preset `{name}`; run `fourier-pe presets`"))),
            (None, None) => Ok(None),
        }
    }

    pub fn require_spec(&self) -> CliResult<EncoderSpec> {
        self.spec()?
            .ok_or_else(|| CliError::Usage("an encoder is required: pass --config or --preset".into()))
    }

    /// A checkpoint if given, otherwise fresh parameters from `--seed`.
    pub fn encoder(&self, checkpoint: Option<&Path>) -> CliResult<Encoder> {
        let spec = self.spec()?;
        match checkpoint {
            Some(path) => {
                let file = fs::File::open(path).map_err(|e| io_err(path, e))?;
                let enc = load_checkpoint(io::BufReader::new(file))?;
                if let Some(s) = spec {
                    if s != enc.spec {
                        return Err(CliError::Input(format!(
                            "{} was saved for a different encoder than the one requested",
                            path.display()
                        )));
                    }
                }
                Ok(enc)
            }
            None => {
                let spec = spec.ok_or_else(|| CliError::Usage("pass --config, --preset or --checkpoint".into()))?;
                Ok(fresh_encoder(spec, self.seed, 0)?)
            }
        }
    }

    pub fn out_dir(&self) -> CliResult<PathBuf> {
        let dir = self.out.clone().unwrap_or_else(|| PathBuf::from("."));
        fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
        Ok(dir)
    }
}

/// Parameters for replicate `index` under `seed`.
pub fn fresh_encoder(spec: EncoderSpec, seed: u64, index: u64) -> fourier_pe::Result<Encoder> {
    Encoder::init(spec, &mut SeededRng::new(seed).fork(index))
}

pub(crate) fn io_err(path: &Path, source: io::Error) -> CliError {
    CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub(crate) fn create(path: &Path) -> CliResult<io::BufWriter<fs::File>> {
    fs::File::create(path)
        .map(io::BufWriter::new)
        .map_err(|e| io_err(path, e))
}

/// Creates `path` and runs `body` on it; I/O failures name the path.
pub(crate) fn write_file(path: &Path, body: impl FnOnce(&mut dyn Write) -> fourier_pe::Result<()>) -> CliResult<()> {
    let mut f = create(path)?;
    match body(&mut f).and_then(|_| f.flush().map_err(Into::into)) {
        Ok(()) => Ok(()),
        Err(fourier_pe::Error::Io(e)) => Err(io_err(path, e)),
        Err(e) => Err(e.into()),
    }
}

/// Runs one parsed command, writing reports to `stdout`.
pub fn run(cli: Cli, stdout: &mut dyn Write) -> CliResult<()> {
    let g = Globals {
        seed: cli.seed,
        config: cli.config,
        preset: cli.preset,
        out: cli.out,
    };
    let res = match cli.command {
        Command::Encode(a) => encode::run(&g, &a, stdout),
        Command::Heatmap(a) => heatmap::run(&g, &a, stdout),
        Command::Verify(a) => verify::run(&g, &a, stdout),
        Command::Train(a) => train::run(&g, &a, stdout),
        Command::Presets { name } => list_presets(name.as_deref(), stdout),
    };
    stdout.flush().map_err(|e| io_err(Path::new("<stdout>"), e))?;
    res
}

fn list_presets(name: Option<&str>, w: &mut dyn Write) -> CliResult<()> {
    let out = |e| io_err(Path::new("<stdout>"), e);
    match name {
        Some(n) => {
            let p = presets::find(n).ok_or_else(|| CliError::Usage(format!("unknown preset `{n}`")))?;
            writeln!(w, "# {}: {}", p.name, p.provenance).map_err(out)?;
            write!(w, "{}", serialize_spec(&p.spec())).map_err(out)?;
        }
        None => {
            for p in presets::PRESETS {
                writeln!(w, "{:<18} {:<18} {}", p.name, p.spec().kind(), p.provenance).map_err(out)?;
            }
        }
    }
    Ok(())
}
