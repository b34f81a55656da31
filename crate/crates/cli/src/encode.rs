use std::io::Write;
use std::path::{Path, PathBuf};

use clap::Args;
use fourier_pe::encoders::Mode;
use fourier_pe::Tensor;

use crate::{io_err, write_file, CliError, CliResult, Globals};

#[derive(Debug, Args)]
pub struct EncodeArgs {
    /// CSV of positions with a header row, one column per encoder input.
    pub input: PathBuf,
    /// Saved encoder parameters; otherwise parameters are drawn from --seed.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Output CSV. Defaults to `<out>/encodings.csv`, or stdout without --out.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

/// Reads an `[N, width]` matrix; errors name the 1-based file line.
pub(crate) fn read_positions(path: &Path, width: usize) -> CliResult<Tensor> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let mut data = Vec::new();
    let mut rows = 0;
    for record in reader.records() {
        let record = record.map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != width {
            return Err(CliError::Input(format!(
                "{} line {line}: expected {width} columns, found {}",
                path.display(),
                record.len()
            )));
        }
        for (col, field) in record.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| {
                CliError::Input(format!(
                    "{} line {line}, column {}: `{field}` is not a number",
                    path.display(),
                    col + 1
                ))
            })?;
            data.push(v);
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(CliError::Input(format!("{}: no positions", path.display())));
    }
    Tensor::new(vec![rows, width], data).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

pub(crate) fn write_matrix(m: &Tensor, prefix: &str, w: &mut dyn Write) -> std::io::Result<()> {
    let header: Vec<String> = (0..m.cols()).map(|c| format!("{prefix}{c}")).collect();
    writeln!(w, "{}", header.join(","))?;
    for r in 0..m.rows() {
        let row: Vec<String> = m.row(r).iter().map(f64::to_string).collect();
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

pub(crate) fn run(g: &Globals, a: &EncodeArgs, stdout: &mut dyn Write) -> CliResult<()> {
    let enc = g.encoder(a.checkpoint.as_deref())?;
    let x = read_positions(&a.input, enc.input_width())?;
    let y = enc.encode(&x, &mut Mode::Eval)?;
    let target = match (&a.output, &g.out) {
        (Some(p), _) => Some(p.clone()),
        (None, Some(_)) => Some(g.out_dir()?.join("encodings.csv")),
        (None, None) => None,
    };
    match target {
        Some(path) => write_file(&path, |w| Ok(write_matrix(&y, "e", w)?)),
        None => write_matrix(&y, "e", stdout).map_err(|e| io_err(Path::new("<stdout>"), e)),
    }
}
