use std::io::Write;
use std::path::Path;

use clap::{Args, ValueEnum};
use fourier_pe::attention_toy::{train_and_eval, write_instances_csv, write_results_csv, RetrievalTask, ToyConfig};
use fourier_pe::encoders::{save_checkpoint, EncoderParams, EncoderSpec};
use fourier_pe::kernels::gaussian_kernel;
use fourier_pe::training::{fit_kernel_target, write_trace_csv, AdamConfig, KernelFitConfig, KlRegConfig};
use fourier_pe::SeededRng;

use crate::{fresh_encoder, io_err, presets, write_file, CliError, CliResult, Globals};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Task {
    /// Fit encoder dot products to a Gaussian kernel on a lattice.
    KernelFit,
    /// Nearest-item retrieval with a held-out column band.
    Retrieval,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(value_enum)]
    pub task: Task,
    /// Optimizer steps (default: 2000 for kernel-fit, 3000 for retrieval).
    #[arg(long)]
    pub steps: Option<usize>,
    /// Adam learning rate (default: 1e-2 for kernel-fit, 3e-3 for retrieval).
    #[arg(long)]
    pub lr: Option<f64>,
    /// Kernel-fit lattice side.
    #[arg(long, default_value_t = 8)]
    pub grid_side: usize,
    /// Kernel-fit lattice spacing.
    #[arg(long, default_value_t = 1.0)]
    pub spacing: f64,
    /// Target kernel bandwidth; defaults to twice the encoder's gamma.
    #[arg(long)]
    pub target_gamma: Option<f64>,
    /// Weight of the KL penalty on W_r; 0 disables it.
    #[arg(long, default_value_t = 0.0)]
    pub alpha: f64,
    /// Keep the KL target variance fixed at gamma^-2.
    #[arg(long)]
    pub fixed_target: bool,
    /// Added to every W_r entry after initialization.
    #[arg(long, default_value_t = 0.0)]
    pub w_mean_shift: f64,
    /// Retrieval grid side.
    #[arg(long, default_value_t = 8)]
    pub grid: usize,
    /// Items per retrieval instance.
    #[arg(long, default_value_t = 3)]
    pub items: usize,
}

fn stdout_err(e: std::io::Error) -> CliError {
    io_err(Path::new("<stdout>"), e)
}

fn save(enc: &fourier_pe::encoders::Encoder, path: &Path) -> CliResult<()> {
    write_file(path, |w| save_checkpoint(enc, w))
}

fn kernel_fit(g: &Globals, a: &TrainArgs, stdout: &mut dyn Write) -> CliResult<()> {
    let spec = g.require_spec()?;
    let gamma = match &spec {
        EncoderSpec::Fourier(c) => Some(c.gamma),
        _ => None,
    };
    let target_gamma = a
        .target_gamma
        .or(gamma.map(|v| 2.0 * v))
        .ok_or_else(|| CliError::Usage("--target-gamma is required for encoders without gamma".into()))?;
    let mut enc = fresh_encoder(spec, g.seed, 0)?;
    if a.w_mean_shift != 0.0 {
        match &mut enc.params {
            EncoderParams::Fourier(p) => p.w_r.data_mut().iter_mut().for_each(|v| *v += a.w_mean_shift),
            _ => return Err(CliError::Usage("--w-mean-shift needs a Fourier encoder".into())),
        }
    }
    let kl = if a.alpha > 0.0 {
        let gamma = gamma.ok_or_else(|| CliError::Usage("--alpha needs a Fourier encoder".into()))?;
        let mut c = KlRegConfig::new(a.alpha, gamma)?;
        c.learn_target = !a.fixed_target;
        Some(c)
    } else {
        None
    };
    let cfg = KernelFitConfig {
        adam: AdamConfig::with_lr(a.lr.unwrap_or(1e-2)),
        kl,
        ..KernelFitConfig::new(a.grid_side, a.spacing, a.steps.unwrap_or(2000))
    };
    let target = |x: &[f64], y: &[f64]| gaussian_kernel(x, y, target_gamma).unwrap_or(f64::NAN);
    let r = fit_kernel_target(enc, target, &cfg, &mut SeededRng::new(g.seed).fork(1))?;
    let dir = g.out_dir()?;
    write_file(&dir.join("trace.csv"), |w| write_trace_csv(&r.trace, w))?;
    save(&r.encoder, &dir.join("checkpoint.fpec"))?;
    let last = r.trace.last().expect("trace has an evaluation row");
    let mut metrics = vec![
        ("initial_loss", r.initial_loss().to_string()),
        ("final_loss", r.final_loss().to_string()),
        ("loss_ratio", (r.final_loss() / r.initial_loss()).to_string()),
        ("target_gamma", target_gamma.to_string()),
    ];
    if let Some((m, v)) = last.w_moments {
        metrics.push(("w_r_mean", m.to_string()));
        metrics.push(("w_r_variance", v.to_string()));
    }
    if let Some(t) = last.target_variance {
        metrics.push(("target_variance", t.to_string()));
    }
    write_file(&dir.join("metrics.csv"), |w| {
        writeln!(w, "metric,value")?;
        for (k, v) in &metrics {
            writeln!(w, "{k},{v}")?;
        }
        Ok(())
    })?;
    for (k, v) in &metrics {
        writeln!(stdout, "{k}={v}").map_err(stdout_err)?;
    }
    Ok(())
}

fn retrieval(g: &Globals, a: &TrainArgs, stdout: &mut dyn Write) -> CliResult<()> {
    let runs: Vec<(String, EncoderSpec)> = match g.spec()? {
        Some(spec) => vec![(g.preset.clone().unwrap_or_else(|| spec.kind().to_string()), spec)],
        None => ["toy-fourier", "toy-embed", "toy-zero"]
            .iter()
            .map(|n| (n.to_string(), presets::find(n).expect("built-in preset").spec()))
            .collect(),
    };
    if a.grid < 4 {
        return Err(CliError::Usage("--grid must be at least 4".into()));
    }
    let task = RetrievalTask {
        height: a.grid,
        width: a.grid,
        held_out: (a.grid / 2 - 1, a.grid / 2 + 1),
        items: a.items,
        train_instances: 2000,
        test_instances: 500,
        reject_ties: true,
    };
    let cfg = ToyConfig {
        steps: a.steps.unwrap_or(3000),
        adam: AdamConfig::with_lr(a.lr.unwrap_or(3e-3)),
        ..ToyConfig::default()
    };
    let dir = g.out_dir()?;
    let mut rows = Vec::new();
    for (i, (name, spec)) in runs.iter().enumerate() {
        let r = train_and_eval(spec.clone(), &task, &cfg, &SeededRng::new(g.seed))?;
        if i == 0 {
            write_file(&dir.join("instances.csv"), |w| write_instances_csv(&r.dataset, w))?;
        }
        write_file(&dir.join(format!("trace-{name}.csv")), |w| {
            writeln!(w, "step,loss")?;
            for (s, l) in r.trace.iter().enumerate() {
                writeln!(w, "{s},{l}")?;
            }
            Ok(())
        })?;
        save(&r.encoder, &dir.join(format!("checkpoint-{name}.fpec")))?;
        write!(
            stdout,
            "encoder={name} seen_acc={} unseen_acc={}",
            r.seen_accuracy, r.unseen_accuracy
        )
        .map_err(stdout_err)?;
        if let Some(e) = &r.unseen_error {
            write!(stdout, " unseen_error=\"{e}\"").map_err(stdout_err)?;
        }
        writeln!(stdout).map_err(stdout_err)?;
        rows.push((name.clone(), g.seed, r.seen_accuracy, r.unseen_accuracy));
    }
    write_file(&dir.join("results.csv"), |w| write_results_csv(&rows, w))
}

pub(crate) fn run(g: &Globals, a: &TrainArgs, stdout: &mut dyn Write) -> CliResult<()> {
    match a.task {
        Task::KernelFit => kernel_fit(g, a, stdout),
        Task::Retrieval => retrieval(g, a, stdout),
    }
}
