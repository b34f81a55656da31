use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use fourier_pe::encoders::Stage;
use fourier_pe::kernels::{
    anisotropy_ratio, default_probes, similarity_heatmap, write_csv, write_meta, write_pgm, Grid, HeatmapGrid,
};

use crate::{fresh_encoder, io_err, write_file, CliError, CliResult, Globals};

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum StageArg {
    /// Fourier features only (MLP skipped).
    Fourier,
    /// Final encoder output.
    Full,
}

#[derive(Debug, Args)]
pub struct HeatmapArgs {
    #[arg(long, default_value_t = 64)]
    pub height: usize,
    #[arg(long, default_value_t = 64)]
    pub width: usize,
    /// Anchor cell `row,col`; repeatable. Defaults to five probes near the
    /// corners and the center.
    #[arg(long, value_parser = parse_anchor)]
    pub anchor: Vec<(usize, usize)>,
    #[arg(long, value_enum, default_value_t = StageArg::Fourier)]
    pub stage: StageArg,
    /// Average over this many independently initialized encoders.
    #[arg(long, default_value_t = 1)]
    pub seeds: u64,
    /// Radius for the anisotropy ratio in the sidecar.
    #[arg(long, default_value_t = 8.0)]
    pub radius: f64,
    /// Map coordinates into (0, 1) before encoding.
    #[arg(long)]
    pub normalize: bool,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// File name prefix inside the output directory.
    #[arg(long, default_value = "heatmap")]
    pub prefix: String,
}

fn parse_anchor(s: &str) -> Result<(usize, usize), String> {
    let (r, c) = s.split_once(',').ok_or("anchor must be `row,col`")?;
    let p = |v: &str| {
        v.trim()
            .parse::<usize>()
            .map_err(|_| format!("`{v}` is not a cell index"))
    };
    Ok((p(r)?, p(c)?))
}

fn write_outputs(h: &HeatmapGrid, stem: &Path, extra: &[(&str, String)]) -> CliResult<()> {
    let mut scaling = None;
    write_file(&stem.with_extension("pgm"), |w| {
        scaling = Some(write_pgm(h, w)?);
        Ok(())
    })?;
    write_file(&stem.with_extension("csv"), |w| write_csv(h, w))?;
    let scaling = scaling.expect("set by write_pgm");
    write_file(&stem.with_extension("meta"), |w| write_meta(&scaling, extra, w))
}

pub(crate) fn run(g: &Globals, a: &HeatmapArgs, stdout: &mut dyn Write) -> CliResult<()> {
    if a.seeds == 0 {
        return Err(CliError::Usage("--seeds must be at least 1".into()));
    }
    let encoders = match &a.checkpoint {
        Some(_) if a.seeds > 1 => {
            return Err(CliError::Usage(
                "--seeds > 1 draws fresh encoders and cannot use --checkpoint".into(),
            ))
        }
        Some(p) => vec![g.encoder(Some(p))?],
        None => {
            let spec = g.require_spec()?;
            (0..a.seeds)
                .map(|s| fresh_encoder(spec.clone(), g.seed, s))
                .collect::<fourier_pe::Result<Vec<_>>>()?
        }
    };
    let grid = Grid::new(a.height, a.width)?.normalized(a.normalize);
    let anchors: Vec<(String, (usize, usize))> = if a.anchor.is_empty() {
        default_probes(a.height, a.width)
            .into_iter()
            .map(|(n, c)| (n.to_string(), c))
            .collect()
    } else {
        a.anchor.iter().map(|&(r, c)| (format!("r{r}-c{c}"), (r, c))).collect()
    };
    let stage = match a.stage {
        StageArg::Fourier => Stage::Fourier,
        StageArg::Full => Stage::Full,
    };
    let dir = g.out_dir()?;
    let kind = encoders[0].spec.kind();
    for (name, anchor) in anchors {
        let maps = encoders
            .iter()
            .map(|e| similarity_heatmap(e, &grid, anchor, stage))
            .collect::<fourier_pe::Result<Vec<_>>>()?;
        let h = HeatmapGrid::mean(&maps)?;
        let ratio = match anisotropy_ratio(&h, a.radius) {
            Ok(r) => r.to_string(),
            Err(e) => format!("n/a ({e})"),
        };
        let (pr, pc) = h.argmax();
        let extra = [
            ("encoder", kind.to_string()),
            ("stage", format!("{:?}", a.stage).to_lowercase()),
            ("anchor", format!("{},{}", anchor.0, anchor.1)),
            ("seeds", a.seeds.to_string()),
            ("argmax", format!("{pr},{pc}")),
            ("anisotropy_radius", a.radius.to_string()),
            ("anisotropy_ratio", ratio.clone()),
        ];
        let stem = dir.join(format!("{}-{name}", a.prefix));
        write_outputs(&h, &stem, &extra)?;
        writeln!(
            stdout,
            "heatmap={} anchor={},{} argmax={pr},{pc} anisotropy_ratio={ratio}",
            stem.display(),
            anchor.0,
            anchor.1
        )
        .map_err(|e| io_err(Path::new("<stdout>"), e))?;
    }
    Ok(())
}
