//! Command-line front end: `demo`, `train`, `sweep`, `verify`, `welch` and
//! `train-eps`.
//!
//! Every training knob can come from a JSON file (`--config`) whose keys are
//! the long flag names in snake case; flags given on the command line win.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::border::{train_eps, EpsConfig, EpsSchedule};
use crate::error::{Error, Result};
use crate::harness::{export, sweep, SweepConfig, DF_NOTE};
use crate::model::BilinearScheme;
use crate::netgraph::{classical_network, strassen_pipeline, Network, PipelineStages};
use crate::scalar::{ratio, Rational, Scalar};
use crate::stats::{welch_one_tailed, SampleStats};
use crate::tensor::Tensor;
use crate::train::{train, TrainConfig};
use crate::verify::{
    default_grid, known_strassen, parse_grid_value, round_learned, verify_exact, verify_float,
    VerifyReport,
};

#[derive(Debug, Parser)]
#[command(name = "tensornet", version, about = "Tensor-network matrix multiplication toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the pipeline stages of a small worked example.
    Demo(DemoArgs),
    /// Train one bilinear scheme.
    Train(RunArgs),
    /// Train every (rank, repetition) pair and export statistics.
    Sweep(RunArgs),
    /// Check a scheme against the matrix-multiplication tensor.
    Verify(VerifyArgs),
    /// One-tailed Welch test from summary statistics.
    Welch(WelchArgs),
    /// Train an ε-polynomial scheme along a decaying ε schedule.
    TrainEps(RunArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum DemoKind {
    Classical2x2,
    Strassen2x2,
    /// Total and observed tensors of a network file (`--network`).
    Network,
}

#[derive(Debug, Args)]
pub struct DemoArgs {
    pub kind: DemoKind,
    /// Row-major entries of A, e.g. `1,2,3,4` or `1/2,0,0,1`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub a: Option<Vec<String>>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub b: Option<Vec<String>>,
    #[arg(long)]
    pub network: Option<PathBuf>,
}

/// Knobs shared by `train`, `sweep` and `train-eps`, and the schema of the
/// `--config` file.
#[derive(Clone, Debug, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Knobs {
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub r: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub clip: Option<f64>,
    #[arg(long)]
    pub train_size: Option<usize>,
    #[arg(long)]
    pub val_size: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Entry range as `lo,hi`.
    #[arg(long, value_parser = parse_range, allow_hyphen_values = true)]
    pub range: Option<[f64; 2]>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub resample: Option<bool>,
    #[arg(long)]
    pub beta1: Option<f64>,
    #[arg(long)]
    pub beta2: Option<f64>,
    #[arg(long)]
    pub adam_eps: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub ranks: Option<Vec<usize>>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub all_vs_top: Option<bool>,
    #[arg(long)]
    pub eps0: Option<f64>,
    #[arg(long)]
    pub decay: Option<f64>,
    #[arg(long)]
    pub eps_min: Option<f64>,
    #[arg(long)]
    pub d_max: Option<u32>,
    #[arg(long, allow_hyphen_values = true)]
    pub f_min: Option<i32>,
    #[arg(long)]
    pub probe_eps: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub quiet: Option<bool>,
}

macro_rules! overlay {
    ($dst:expr, $src:expr, $($f:ident),*) => {
        $( if $src.$f.is_some() { $dst.$f = $src.$f.clone(); } )*
    };
}

impl Knobs {
    /// Fields set in `top` replace those in `self`.
    pub fn overlay(mut self, top: &Knobs) -> Knobs {
        overlay!(
            self, top, n, r, epochs, batch_size, lr, clip, train_size, val_size, alpha, seed,
            range, resample, beta1, beta2, adam_eps, ranks, reps, threads, all_vs_top, eps0,
            decay, eps_min, d_max, f_min, probe_eps, out, quiet
        );
        self
    }

    pub fn train_config(&self) -> TrainConfig {
        let d = TrainConfig::default();
        TrainConfig {
            n: self.n.unwrap_or(d.n),
            r: self.r.unwrap_or(d.r),
            epochs: self.epochs.unwrap_or(d.epochs),
            batch_size: self.batch_size.unwrap_or(d.batch_size),
            lr: self.lr.unwrap_or(d.lr),
            clip: self.clip.unwrap_or(d.clip),
            train_size: self.train_size.unwrap_or(d.train_size),
            val_size: self.val_size.unwrap_or(d.val_size),
            alpha: self.alpha.unwrap_or(d.alpha),
            seed: self.seed.unwrap_or(d.seed),
            range: self.range.unwrap_or(d.range),
            resample: self.resample.unwrap_or(d.resample),
            beta1: self.beta1.unwrap_or(d.beta1),
            beta2: self.beta2.unwrap_or(d.beta2),
            adam_eps: self.adam_eps.unwrap_or(d.adam_eps),
        }
    }

    pub fn sweep_config(&self) -> SweepConfig {
        let d = SweepConfig::default();
        SweepConfig {
            ranks: self.ranks.clone().unwrap_or(d.ranks),
            reps: self.reps.unwrap_or(d.reps),
            base: self.train_config(),
            threads: self.threads.or(d.threads),
            all_vs_top: self.all_vs_top.unwrap_or(d.all_vs_top),
        }
    }

    pub fn eps_config(&self) -> EpsConfig {
        let d = EpsConfig::default();
        let s = EpsSchedule::default();
        EpsConfig {
            train: self.train_config(),
            schedule: EpsSchedule {
                eps0: self.eps0.unwrap_or(s.eps0),
                decay: self.decay.unwrap_or(s.decay),
                eps_min: self.eps_min.unwrap_or(s.eps_min),
            },
            d_max: self.d_max.unwrap_or(d.d_max),
            f_min: self.f_min.unwrap_or(d.f_min),
            probe_eps: self.probe_eps.unwrap_or(d.probe_eps),
        }
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("out"))
    }
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// JSON file of knob values; command-line flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub knobs: Knobs,
}

impl RunArgs {
    fn resolve(&self) -> Result<Knobs> {
        let file = match &self.config {
            Some(p) => serde_json::from_str::<Knobs>(&fs::read_to_string(p)?)?,
            None => Knobs::default(),
        };
        Ok(file.overlay(&self.knobs))
    }
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Scheme file; the built-in Strassen scheme when omitted.
    #[arg(long)]
    pub scheme: Option<PathBuf>,
    /// Verify in exact rational arithmetic.
    #[arg(long)]
    pub exact: bool,
    /// Normalise slots and snap entries to `--grid` before an exact check.
    #[arg(long)]
    pub round: bool,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub grid: Option<Vec<String>>,
    /// Residual tolerance in float mode.
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
    /// Write the rounded scheme here.
    #[arg(long)]
    pub write_rounded: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct WelchArgs {
    /// Group 1 as `mean,std,count`.
    #[arg(long, value_parser = parse_stats, allow_hyphen_values = true)]
    pub g1: SampleStats,
    #[arg(long, value_parser = parse_stats, allow_hyphen_values = true)]
    pub g2: SampleStats,
}

fn parse_range(s: &str) -> std::result::Result<[f64; 2], String> {
    let parts: Vec<&str> = s.split(',').collect();
    match parts.as_slice() {
        [lo, hi] => Ok([
            lo.trim().parse().map_err(|e| format!("{lo}: {e}"))?,
            hi.trim().parse().map_err(|e| format!("{hi}: {e}"))?,
        ]),
        _ => Err(format!("expected lo,hi, got {s}")),
    }
}

fn parse_stats(s: &str) -> std::result::Result<SampleStats, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let [m, sd, n] = parts.as_slice() else {
        return Err(format!("expected mean,std,count, got {s}"));
    };
    let mean: f64 = m.parse().map_err(|e| format!("{m}: {e}"))?;
    let std: f64 = sd.parse().map_err(|e| format!("{sd}: {e}"))?;
    let count: usize = n.parse().map_err(|e| format!("{n}: {e}"))?;
    SampleStats::new(mean, std, count).map_err(|e| e.to_string())
}

/// Parses `argv` (program name first) and runs the command, writing to
/// `out` and `err`. Returns the process exit code.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { write!(out, "{text}") } else { write!(err, "{text}") };
            return code;
        }
    };
    match dispatch(cli.command, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            1
        }
    }
}

fn dispatch(cmd: Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    match cmd {
        Command::Demo(a) => demo(&a, out),
        Command::Train(a) => cmd_train(&a.resolve()?, out, err),
        Command::Sweep(a) => cmd_sweep(&a.resolve()?, out, err),
        Command::Verify(a) => cmd_verify(&a, out),
        Command::Welch(a) => cmd_welch(&a, out),
        Command::TrainEps(a) => cmd_train_eps(&a.resolve()?, out, err),
    }
}

fn parse_matrix(entries: &Option<Vec<String>>, default: [i64; 4]) -> Result<Tensor<Rational>> {
    let data = match entries {
        Some(v) => v.iter().map(|s| parse_grid_value(s)).collect::<Result<Vec<_>>>()?,
        None => default.iter().map(|&x| ratio(x, 1)).collect(),
    };
    if data.len() != 4 {
        return Err(Error::InvalidConfig(format!("expected 4 entries, got {}", data.len())));
    }
    Tensor::new(vec![2, 2], data)
}

fn show<S: Scalar + std::fmt::Display>(out: &mut dyn Write, name: &str, t: &Tensor<S>) -> Result<()> {
    let vals: Vec<String> = t.data().iter().map(|x| x.to_string()).collect();
    writeln!(out, "{name} dims={:?} [{}]", t.dims(), vals.join(", "))?;
    Ok(())
}

fn show_stages(out: &mut dyn Write, st: &PipelineStages<Rational>) -> Result<()> {
    show(out, "stage1 left total", &st.s0_left)?;
    show(out, "stage1 right total", &st.s0_right)?;
    show(out, "stage1 left factors", &st.s_left)?;
    show(out, "stage1 right factors", &st.s_right)?;
    show(out, "stage2 left lifted", &st.sf_left)?;
    show(out, "stage2 right lifted", &st.sf_right)?;
    show(out, "stage2 F lifted", &st.f_lifted)?;
    show(out, "stage2 product", &st.product)?;
    show(out, "output", &st.output)
}

fn demo(a: &DemoArgs, out: &mut dyn Write) -> Result<i32> {
    let ma = parse_matrix(&a.a, [1, 2, 3, 4])?;
    let mb = parse_matrix(&a.b, [5, 6, 7, 8])?;
    let direct = ma.matmul(&mb)?;
    match a.kind {
        DemoKind::Classical2x2 => {
            let net = classical_network(&ma, &mb)?;
            show(out, "A", &ma)?;
            show(out, "B", &mb)?;
            for i in 0..net.node_count() {
                show(out, &format!("lift {i}"), &net.lift(i)?)?;
            }
            show(out, "total", &net.total_bmp()?)?;
            let obs = net.observed()?;
            show(out, "output", &obs)?;
            Ok(if obs == direct { 0 } else { 1 })
        }
        DemoKind::Strassen2x2 => {
            let st = strassen_pipeline(&ma, &mb, &known_strassen())?;
            show(out, "A", &ma)?;
            show(out, "B", &mb)?;
            show_stages(out, &st)?;
            let ok = st.output.data()[..4] == *direct.data();
            writeln!(out, "matches A·B: {ok}")?;
            Ok(if ok { 0 } else { 1 })
        }
        DemoKind::Network => {
            let path = a
                .network
                .as_ref()
                .ok_or_else(|| Error::InvalidConfig("demo network needs --network FILE".into()))?;
            let net: Network<f64> = serde_json::from_str(&fs::read_to_string(path)?)?;
            net.validate()?;
            for i in 0..net.node_count() {
                show(out, &format!("lift {i}"), &net.lift(i)?)?;
            }
            show(out, "total", &net.total_bmp()?)?;
            show(out, "observed", &net.observed()?)?;
            Ok(0)
        }
    }
}

#[derive(Serialize)]
struct Manifest<'a, C: Serialize> {
    command: &'a str,
    config: &'a C,
    files: Vec<String>,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn write_manifest<C: Serialize>(dir: &Path, command: &str, config: &C, files: &[PathBuf]) -> Result<PathBuf> {
    let rel = files
        .iter()
        .map(|f| f.strip_prefix(dir).unwrap_or(f).to_string_lossy().replace('\\', "/"))
        .collect();
    let path = dir.join("manifest.json");
    write_json(&path, &Manifest { command, config, files: rel })?;
    Ok(path)
}

fn cmd_train(k: &Knobs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let cfg = k.train_config();
    cfg.validate()?;
    let dir = k.out_dir();
    let rec = train(&cfg)?;
    if !k.quiet.unwrap_or(false) {
        writeln!(err, "trained n={} r={} seed={} in {:.2}s", cfg.n, cfg.r, cfg.seed, rec.seconds)?;
    }
    let record = dir.join("record.json");
    let scheme = dir.join("scheme.json");
    write_json(&record, &rec)?;
    write_json(&scheme, &rec.scheme)?;
    write_manifest(&dir, "train", &cfg, &[record, scheme])?;
    writeln!(out, "final train loss {:e}, final validation loss {:e}", rec.train_loss.last().unwrap_or(&f64::NAN), rec.final_val())?;
    Ok(0)
}

fn cmd_sweep(k: &Knobs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let cfg = k.sweep_config();
    cfg.validate()?;
    let dir = k.out_dir();
    if !k.quiet.unwrap_or(false) {
        writeln!(err, "sweeping ranks {:?} with {} repetitions", cfg.ranks, cfg.reps)?;
    }
    let runs = sweep(&cfg)?;
    fs::create_dir_all(&dir)?;
    let files = export(&runs, &dir, cfg.all_vs_top)?;
    write_manifest(&dir, "sweep", &cfg, &files)?;
    for (rank, losses) in crate::harness::final_losses(&runs) {
        let mean = losses.iter().sum::<f64>() / losses.len() as f64;
        writeln!(out, "r={rank} mean final validation loss {mean:e}")?;
    }
    Ok(0)
}

fn cmd_train_eps(k: &Knobs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let cfg = k.eps_config();
    cfg.validate()?;
    let dir = k.out_dir();
    let run = train_eps(&cfg)?;
    if !k.quiet.unwrap_or(false) {
        writeln!(err, "trained eps scheme n={} r={} in {:.2}s", cfg.train.n, cfg.train.r, run.record.seconds)?;
    }
    let record = dir.join("record.json");
    let scheme = dir.join("scheme.json");
    let eps_scheme = dir.join("eps_scheme.json");
    write_json(&record, &run.record)?;
    write_json(&scheme, &run.record.scheme)?;
    write_json(&eps_scheme, &run.eps_scheme)?;
    write_manifest(&dir, "train-eps", &cfg, &[record, scheme, eps_scheme])?;
    writeln!(
        out,
        "final eps {:e}, validation loss {:e}, probe loss {:e}",
        run.eps_scheme.eps,
        run.record.final_val(),
        run.record.probe_losses.as_ref().and_then(|p| p.last()).unwrap_or(&f64::NAN)
    )?;
    Ok(0)
}

fn load_scheme(path: &Option<PathBuf>) -> Result<BilinearScheme<f64>> {
    match path {
        Some(p) => Ok(serde_json::from_str(&fs::read_to_string(p)?)?),
        None => Ok(known_strassen().map(Scalar::to_f64)),
    }
}

fn cmd_verify(a: &VerifyArgs, out: &mut dyn Write) -> Result<i32> {
    let scheme = load_scheme(&a.scheme)?;
    let report: VerifyReport = if a.round {
        let grid = match &a.grid {
            Some(g) => g.iter().map(|s| parse_grid_value(s)).collect::<Result<Vec<_>>>()?,
            None => default_grid(),
        };
        let rounded = round_learned(&scheme, &grid)?;
        if let Some(p) = &a.write_rounded {
            write_json(p, &rounded.map(Scalar::to_f64))?;
        }
        verify_exact(&rounded)?
    } else if a.exact {
        verify_exact(&scheme.to_rational()?)?
    } else {
        verify_float(&scheme)?
    };
    writeln!(out, "{}", serde_json::to_string_pretty(&report)?)?;
    let ok = match report.exact {
        Some(e) => e,
        None => report.residual <= a.tol,
    };
    Ok(if ok { 0 } else { 1 })
}

#[derive(Serialize)]
struct WelchOutput {
    #[serde(flatten)]
    report: crate::stats::WelchReport,
    note: &'static str,
}

fn cmd_welch(a: &WelchArgs, out: &mut dyn Write) -> Result<i32> {
    let report = welch_one_tailed(&a.g1, &a.g2)?;
    writeln!(out, "{}", serde_json::to_string_pretty(&WelchOutput { report, note: DF_NOTE })?)?;
    Ok(0)
}
