//! Invariant suites. Each check prints one `check=... status=...` line.

use std::io::Write;
use std::path::Path;

use clap::{Args, ValueEnum};
use fourier_pe::encoders::{fourier_features, Encoder, EncoderSpec, FourierPEConfig, Mode, PositionBatch};
use fourier_pe::kernels::{kernel_monte_carlo, shift_fn};
use fourier_pe::numerics::{sample, Dist};
use fourier_pe::training::{backward_encode, finite_diff_grad};
use fourier_pe::{SeededRng, Tensor};

use crate::{io_err, CliError, CliResult, Globals};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Shift,
    Kernel,
    Grad,
    All,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(value_enum)]
    pub suite: Suite,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// `key=value` fields after the status.
    pub fields: Vec<(&'static str, String)>,
}

impl Check {
    fn new(name: String, passed: bool, fields: Vec<(&'static str, String)>) -> Self {
        Check { name, passed, fields }
    }

    pub fn line(&self) -> String {
        let mut s = format!(
            "check={} status={}",
            self.name,
            if self.passed { "pass" } else { "fail" }
        );
        for (k, v) in &self.fields {
            s.push_str(&format!(" {k}={v}"));
        }
        s
    }
}

pub const SHIFT_CASES: usize = 1000;
pub const SHIFT_TOL: f64 = 1e-9;
pub const SHIFT_FN_TOL: f64 = 1e-11;
pub const SELF_SIM_TOL: f64 = 1e-12;
pub const KERNEL_FOURIER_DIM: usize = 4096;
pub const KERNEL_SEEDS: usize = 100;
pub const GRAD_CONFIGS: usize = 20;
pub const GRAD_TOL: f64 = 1e-5;

fn normal(rng: &mut SeededRng, std: f64, shape: &[usize]) -> fourier_pe::Result<Tensor> {
    sample(rng, Dist::Normal { mean: 0.0, std }, shape)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn feats(x: &Tensor, w: &Tensor) -> fourier_pe::Result<Tensor> {
    let m = x.len();
    fourier_features(&PositionBatch::new(x.clone().reshape(&[1, 1, m])?)?, w)
}

/// Translation invariance, agreement with `shift_fn`, and `r_x·r_x = ½`,
/// for `M ∈ {1, 2, 4}`.
pub fn shift_suite(rng: &SeededRng) -> fourier_pe::Result<Vec<Check>> {
    let mut out = Vec::new();
    for (i, m) in [1usize, 2, 4].into_iter().enumerate() {
        let mut r = rng.fork(i as u64);
        let (mut gap, mut fn_err, mut self_err) = (0f64, 0f64, 0f64);
        for _ in 0..SHIFT_CASES {
            let gamma = r.uniform(0.5, 10.0);
            let w = normal(&mut r, 1.0 / gamma, &[32, m])?;
            let x = normal(&mut r, 10.0, &[m])?;
            let y = normal(&mut r, 10.0, &[m])?;
            let c = normal(&mut r, 50.0, &[m])?;
            let (fx, fy) = (feats(&x, &w)?, feats(&y, &w)?);
            let d = dot(fx.data(), fy.data());
            let shifted = dot(feats(&x.add(&c)?, &w)?.data(), feats(&y.add(&c)?, &w)?.data());
            gap = gap.max((d - shifted).abs());
            fn_err = fn_err.max((d - shift_fn(x.sub(&y)?.data(), &w)?).abs());
            self_err = self_err.max((dot(fx.data(), fx.data()) - 0.5).abs());
        }
        let n = SHIFT_CASES.to_string();
        out.push(Check::new(
            format!("shift.m{m}.translation"),
            gap < SHIFT_TOL,
            vec![
                ("cases", n.clone()),
                ("max_abs_err", format!("{gap:e}")),
                ("tol", format!("{SHIFT_TOL:e}")),
            ],
        ));
        out.push(Check::new(
            format!("shift.m{m}.shift_fn"),
            fn_err < SHIFT_FN_TOL,
            vec![
                ("cases", n.clone()),
                ("max_abs_err", format!("{fn_err:e}")),
                ("tol", format!("{SHIFT_FN_TOL:e}")),
            ],
        ));
        out.push(Check::new(
            format!("shift.m{m}.self_similarity"),
            self_err < SELF_SIM_TOL,
            vec![
                ("cases", n),
                ("max_abs_err", format!("{self_err:e}")),
                ("tol", format!("{SELF_SIM_TOL:e}")),
            ],
        ));
    }
    Ok(out)
}

/// Seed-averaged feature dot products against `½·exp(−‖δ‖²/2γ²)`.
pub fn kernel_suite(rng: &SeededRng) -> fourier_pe::Result<Vec<Check>> {
    let mut out = Vec::new();
    for (gi, gamma) in [1.0, 4.0, 100.0].into_iter().enumerate() {
        for (di, frac) in [0.0, 0.5, 1.0, 2.0].into_iter().enumerate() {
            let norm = frac * gamma;
            let delta = [0.6 * norm, 0.8 * norm];
            let est = kernel_monte_carlo(
                &delta,
                gamma,
                KERNEL_FOURIER_DIM,
                KERNEL_SEEDS,
                &rng.fork((gi * 4 + di) as u64),
            )?;
            out.push(Check::new(
                format!("kernel.gamma{gamma}.delta{frac}gamma"),
                est.within(3.0),
                vec![
                    ("mean", format!("{:e}", est.mean)),
                    ("expected", format!("{:e}", est.expected)),
                    ("std_err", format!("{:e}", est.std_err)),
                    ("seeds", KERNEL_SEEDS.to_string()),
                    ("fourier_dim", KERNEL_FOURIER_DIM.to_string()),
                ],
            ));
        }
    }
    Ok(out)
}

/// A small random Fourier encoder config; even-numbered configs use
/// LayerNorm.
pub fn grad_config(index: usize, rng: &mut SeededRng) -> FourierPEConfig {
    let g = 1 + rng.below(3);
    let m = 1 + rng.below(3);
    let half_f = 2 + rng.below(4);
    let h = 4 + rng.below(5);
    let per = 1 + rng.below(3);
    let gamma = rng.uniform(0.5, 5.0);
    FourierPEConfig::new(g, m, 2 * half_f, h, g * per, gamma)
        .expect("ranges give a valid config")
        .with_layer_norm(index.is_multiple_of(2))
}

/// Largest per-tensor relative error between the analytic gradient of
/// `sum(encode(x) ⊙ U)` and central differences.
pub fn encode_grad_error(cfg: FourierPEConfig, rng: &mut SeededRng) -> fourier_pe::Result<(f64, String)> {
    let (width, d, gamma) = (cfg.input_width(), cfg.encoding_dim, cfg.gamma);
    let enc = Encoder::init(EncoderSpec::Fourier(cfg), rng)?;
    let x = normal(rng, gamma, &[3, width])?;
    let up = normal(rng, 1.0, &[3, d])?;
    let (_, trace) = enc.encode_traced(&x, &mut Mode::Eval)?;
    let g = backward_encode(&enc, &trace, &up)?;
    let step = 1e-5 / x.max_abs().max(1.0);
    let fd = finite_diff_grad(|e: &Encoder| e.encode(&x, &mut Mode::Eval)?.dot(&up), &enc, step)?;
    let errs = g.relative_errors(&fd)?;
    let worst = errs
        .into_iter()
        .fold((0.0, String::new()), |acc, (n, e)| if e > acc.0 { (e, n) } else { acc });
    Ok(worst)
}

pub fn grad_suite(rng: &SeededRng) -> fourier_pe::Result<Vec<Check>> {
    let mut out = Vec::new();
    for i in 0..GRAD_CONFIGS {
        let mut r = rng.fork(i as u64);
        let cfg = grad_config(i, &mut r);
        let desc = format!(
            "G{}xM{}_F{}_H{}_D{}",
            cfg.groups, cfg.coords_per_group, cfg.fourier_dim, cfg.hidden_dim, cfg.encoding_dim
        );
        let ln = if cfg.use_layer_norm { "on" } else { "off" };
        let (err, worst) = encode_grad_error(cfg, &mut r)?;
        out.push(Check::new(
            format!("grad.config{i:02}"),
            err < GRAD_TOL,
            vec![
                ("shape", desc),
                ("layer_norm", ln.into()),
                ("max_rel_err", format!("{err:e}")),
                ("worst", worst),
                ("tol", format!("{GRAD_TOL:e}")),
            ],
        ));
    }
    Ok(out)
}

pub fn run_suite(suite: Suite, seed: u64) -> fourier_pe::Result<Vec<Check>> {
    let root = SeededRng::new(seed);
    let mut out = Vec::new();
    if matches!(suite, Suite::Shift | Suite::All) {
        out.extend(shift_suite(&root.fork(1))?);
    }
    if matches!(suite, Suite::Kernel | Suite::All) {
        out.extend(kernel_suite(&root.fork(2))?);
    }
    if matches!(suite, Suite::Grad | Suite::All) {
        out.extend(grad_suite(&root.fork(3))?);
    }
    Ok(out)
}

pub(crate) fn run(g: &Globals, a: &VerifyArgs, stdout: &mut dyn Write) -> CliResult<()> {
    let checks = run_suite(a.suite, g.seed)?;
    let failed = checks.iter().filter(|c| !c.passed).count();
    let w = |e| io_err(Path::new("<stdout>"), e);
    for c in &checks {
        writeln!(stdout, "{}", c.line()).map_err(w)?;
    }
    writeln!(
        stdout,
        "summary checks={} passed={} failed={failed}",
        checks.len(),
        checks.len() - failed
    )
    .map_err(w)?;
    if failed > 0 {
        return Err(CliError::ChecksFailed {
            failed,
            total: checks.len(),
        });
    }
    Ok(())
}
