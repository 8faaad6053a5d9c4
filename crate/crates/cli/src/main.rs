// SPDX-License-Identifier: Apache-2.0

//! `hypersense` command-line front end.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use hypersense_core::accel::{run_frame, SaConfig};
use hypersense_core::config::Config;
use hypersense_core::energy::{report_csv, EnergyParams, Scenario};
use hypersense_core::eval::{
    frame_roc, partial_auc, score_frames, sweep, top_k_mean, SweepGrid, SweepMetric, SweepOptions,
};
use hypersense_core::fragment::{FragmentModel, LabeledFrameSet};
use hypersense_core::hdc::EncoderParams;
use hypersense_core::io;
use hypersense_core::pipeline::{self, TrainOptions};
use hypersense_core::rng::{stream, SeededRng};
use hypersense_core::sense::{simulate_stream, GatePolicy, HdcDetector, HyperSenseConfig};
use hypersense_core::sliding::{
    encode_naive, encode_reuse, row_contributions, EncoderPath, FragmentGrid, Frame, OpCounter,
};
use hypersense_core::synth::{generate, SynthSpec};
use hypersense_core::{Error, Result};

const KNOWN_KEYS: &[&str] = &[
    "seed",
    "frames",
    "height",
    "width",
    "noise_sigma",
    "amplitude",
    "radius_min",
    "radius_max",
    "presence",
    "max_objects",
    "fragment",
    "dim",
    "per_frame",
    "val_fraction",
    "eta",
    "epochs",
    "stride",
    "t_score",
    "t_detection",
    "tpr_floor",
    "target_fpr",
    "path",
    "metric",
    "max_cells",
    "eval_fraction",
    "base_rate",
    "min_rate",
    "e_sense_hi",
    "e_sense_lo",
    "e_edge_infer",
    "e_tx",
    "e_cloud",
    "p",
    "min_rate_fraction",
    "t1",
    "t2",
    "fifo_capacity",
    "multipliers_per_pe",
    "classifier_latency",
    "frame_index",
];

#[derive(Parser, Debug)]
#[command(
    name = "hypersense",
    version,
    about = "HDC sensing: synthesis, training, evaluation and simulation"
)]
struct Cli {
    /// Flat key=value configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for output files (created if missing).
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate synthetic frames and labels.
    Synth(SynthArgs),
    /// Train a fragment model from labelled frames.
    Train(TrainArgs),
    /// Frame-level ROC and partial AUC of a model.
    Eval(EvalArgs),
    /// Hyperparameter grid sweep.
    Sweep(SweepArgs),
    /// Simulate ADC gating over a frame stream, with an energy report.
    Sense(SenseArgs),
    /// Naive versus reuse encoding counters and wall time.
    Bench(BenchArgs),
    /// Cycle-level systolic array simulation.
    Accsim(AccsimArgs),
}

#[derive(Args, Debug, Default)]
struct Inputs {
    /// Frame container (default: <out-dir>/frames.hsf).
    #[arg(long)]
    frames: Option<PathBuf>,
    /// Labels CSV (default: <out-dir>/labels.csv).
    #[arg(long)]
    labels: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long)]
    frames: Option<String>,
    #[arg(long)]
    height: Option<String>,
    #[arg(long)]
    width: Option<String>,
    #[arg(long)]
    noise_sigma: Option<String>,
    #[arg(long)]
    amplitude: Option<String>,
    #[arg(long)]
    radius_min: Option<String>,
    #[arg(long)]
    radius_max: Option<String>,
    #[arg(long)]
    presence: Option<String>,
    #[arg(long)]
    max_objects: Option<String>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[command(flatten)]
    inputs: Inputs,
    /// Output model path (default: <out-dir>/model.hsm).
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    fragment: Option<String>,
    #[arg(long)]
    dim: Option<String>,
    #[arg(long)]
    per_frame: Option<String>,
    #[arg(long)]
    val_fraction: Option<String>,
    #[arg(long)]
    eta: Option<String>,
    #[arg(long)]
    epochs: Option<String>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[command(flatten)]
    inputs: Inputs,
    /// Model path (default: <out-dir>/model.hsm).
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    stride: Option<String>,
    /// Comma-separated detection-count thresholds.
    #[arg(long)]
    t_detection: Option<String>,
    #[arg(long)]
    tpr_floor: Option<String>,
    #[arg(long)]
    target_fpr: Option<String>,
    /// naive or reuse.
    #[arg(long)]
    path: Option<String>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    inputs: Inputs,
    /// Comma-separated grids.
    #[arg(long)]
    t_score: Option<String>,
    #[arg(long)]
    t_detection: Option<String>,
    #[arg(long)]
    stride: Option<String>,
    #[arg(long)]
    fragment: Option<String>,
    #[arg(long)]
    dim: Option<String>,
    /// f1, pauc or max_tpr.
    #[arg(long)]
    metric: Option<String>,
    #[arg(long)]
    tpr_floor: Option<String>,
    #[arg(long)]
    target_fpr: Option<String>,
    #[arg(long)]
    max_cells: Option<String>,
    /// Trailing fraction of frames held out for scoring.
    #[arg(long)]
    eval_fraction: Option<String>,
    #[arg(long)]
    per_frame: Option<String>,
    #[arg(long)]
    eta: Option<String>,
    #[arg(long)]
    epochs: Option<String>,
    #[arg(long)]
    path: Option<String>,
}

#[derive(Args, Debug)]
struct SenseArgs {
    #[command(flatten)]
    inputs: Inputs,
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    stride: Option<String>,
    #[arg(long)]
    t_score: Option<String>,
    #[arg(long)]
    t_detection: Option<String>,
    #[arg(long)]
    base_rate: Option<String>,
    #[arg(long)]
    min_rate: Option<String>,
    #[arg(long)]
    path: Option<String>,
    #[arg(long)]
    p: Option<String>,
    #[arg(long)]
    min_rate_fraction: Option<String>,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[arg(long)]
    height: Option<String>,
    #[arg(long)]
    width: Option<String>,
    #[arg(long)]
    fragment: Option<String>,
    #[arg(long)]
    stride: Option<String>,
    #[arg(long)]
    dim: Option<String>,
}

#[derive(Args, Debug)]
struct AccsimArgs {
    /// Optional frame container; a seeded random frame is used otherwise.
    #[arg(long)]
    frames: Option<PathBuf>,
    #[arg(long)]
    frame_index: Option<String>,
    #[arg(long)]
    height: Option<String>,
    #[arg(long)]
    width: Option<String>,
    #[arg(long)]
    fragment: Option<String>,
    #[arg(long)]
    stride: Option<String>,
    #[arg(long)]
    dim: Option<String>,
    #[arg(long)]
    t1: Option<String>,
    #[arg(long)]
    t2: Option<String>,
    #[arg(long)]
    fifo_capacity: Option<String>,
    #[arg(long)]
    multipliers_per_pe: Option<String>,
    #[arg(long)]
    classifier_latency: Option<String>,
}

/// Copies the named `Option<String>` flags that are set into the config.
macro_rules! apply {
    ($cfg:expr, $args:expr, $($field:ident),*) => {{
        $(if let Some(v) = &$args.$field {
            $cfg.set(stringify!($field), v);
        })*
    }};
}

struct Ctx {
    cfg: Config,
    seed: u64,
    out_dir: PathBuf,
}

impl Ctx {
    fn out(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    fn write(&self, name: &str, text: &str) -> Result<()> {
        io::write_bytes(&self.out(name), text.as_bytes())
    }

    fn input(&self, given: &Option<PathBuf>, default: &str) -> PathBuf {
        given.clone().unwrap_or_else(|| self.out(default))
    }

    fn labeled(&self, inputs: &Inputs) -> Result<(LabeledFrameSet, String)> {
        let frames_path = self.input(&inputs.frames, "frames.hsf");
        let frames = io::read_frames(&frames_path)?;
        let labels = io::labels_from_csv(
            &io::read_text(&self.input(&inputs.labels, "labels.csv"))?,
            frames.len(),
        )?;
        let id = frames_path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        Ok((LabeledFrameSet::new(frames, labels)?, id))
    }

    fn path(&self) -> Result<EncoderPath> {
        self.cfg.get_or("path", "naive".to_string())?.parse()
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("hypersense: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => Config::parse(&io::read_text(p).map_err(|e| match e {
            Error::Data(m) => Error::Usage(m),
            other => other,
        })?)?,
        None => Config::default(),
    };
    if let Some(s) = cli.seed {
        cfg.set("seed", s);
    }
    match &cli.command {
        Command::Synth(a) => apply!(
            cfg,
            a,
            frames,
            height,
            width,
            noise_sigma,
            amplitude,
            radius_min,
            radius_max,
            presence,
            max_objects
        ),
        Command::Train(a) => apply!(cfg, a, fragment, dim, per_frame, val_fraction, eta, epochs),
        Command::Eval(a) => apply!(cfg, a, stride, t_detection, tpr_floor, target_fpr, path),
        Command::Sweep(a) => apply!(
            cfg,
            a,
            t_score,
            t_detection,
            stride,
            fragment,
            dim,
            metric,
            tpr_floor,
            target_fpr,
            max_cells,
            eval_fraction,
            per_frame,
            eta,
            epochs,
            path
        ),
        Command::Sense(a) => apply!(
            cfg,
            a,
            stride,
            t_score,
            t_detection,
            base_rate,
            min_rate,
            path,
            p,
            min_rate_fraction
        ),
        Command::Bench(a) => apply!(cfg, a, height, width, fragment, stride, dim),
        Command::Accsim(a) => apply!(
            cfg,
            a,
            frame_index,
            height,
            width,
            fragment,
            stride,
            dim,
            t1,
            t2,
            fifo_capacity,
            multipliers_per_pe,
            classifier_latency
        ),
    }
    cfg.check_known(KNOWN_KEYS)?;
    std::fs::create_dir_all(&cli.out_dir)
        .map_err(|e| Error::data(format!("cannot create {}: {e}", cli.out_dir.display())))?;
    let ctx = Ctx {
        seed: cfg.get_or("seed", 0)?,
        cfg,
        out_dir: cli.out_dir.clone(),
    };
    match &cli.command {
        Command::Synth(_) => cmd_synth(&ctx),
        Command::Train(a) => cmd_train(&ctx, a),
        Command::Eval(a) => cmd_eval(&ctx, a),
        Command::Sweep(a) => cmd_sweep(&ctx, a),
        Command::Sense(a) => cmd_sense(&ctx, a),
        Command::Bench(_) => cmd_bench(&ctx),
        Command::Accsim(a) => cmd_accsim(&ctx, a),
    }
}

/// Fragment size and dimension are left at their defaults when `shape` is
/// false (the sweep reads them as grids).
fn train_options(cfg: &Config, seed: u64, shape: bool) -> Result<TrainOptions> {
    let d = TrainOptions::default();
    Ok(TrainOptions {
        fragment: if shape {
            cfg.get_or("fragment", d.fragment)?
        } else {
            d.fragment
        },
        dim: if shape {
            cfg.get_or("dim", d.dim)?
        } else {
            d.dim
        },
        per_frame: cfg.get_or("per_frame", d.per_frame)?,
        val_fraction: cfg.get_or("val_fraction", d.val_fraction)?,
        eta: cfg.get_or("eta", d.eta)?,
        epochs: cfg.get_or("epochs", d.epochs)?,
        seed,
    })
}

fn cmd_synth(ctx: &Ctx) -> Result<()> {
    let d = SynthSpec::default();
    let c = &ctx.cfg;
    let spec = SynthSpec {
        frames: c.get_or("frames", d.frames)?,
        height: c.get_or("height", d.height)?,
        width: c.get_or("width", d.width)?,
        noise_sigma: c.get_or("noise_sigma", d.noise_sigma)?,
        amplitude: c.get_or("amplitude", d.amplitude)?,
        radius_min: c.get_or("radius_min", d.radius_min)?,
        radius_max: c.get_or("radius_max", d.radius_max)?,
        presence: c.get_or("presence", d.presence)?,
        max_objects: c.get_or("max_objects", d.max_objects)?,
        seed: ctx.seed,
    };
    let (frames, labels) = generate(&spec)?;
    io::write_bytes(&ctx.out("frames.hsf"), &io::encode_frames(&frames)?)?;
    ctx.write("labels.csv", &io::labels_to_csv(&labels))?;
    let occupied = labels.iter().filter(|b| !b.is_empty()).count();
    println!("frames,occupied\n{},{occupied}", frames.len());
    Ok(())
}

fn cmd_train(ctx: &Ctx, a: &TrainArgs) -> Result<()> {
    let (set, _) = ctx.labeled(&a.inputs)?;
    let opts = train_options(&ctx.cfg, ctx.seed, true)?;
    eprintln!(
        "training on {} frames: fragment {}, D {}, {} epochs",
        set.len(),
        opts.fragment,
        opts.dim,
        opts.epochs
    );
    let out = pipeline::train(&set, &opts)?;
    io::write_bytes(
        &ctx.input(&a.model, "model.hsm"),
        &io::encode_model(&out.model),
    )?;
    let meta = out.model.meta.clone().unwrap_or_default();
    let mut metrics = String::from("metric,value\n");
    for (k, v) in [
        ("train_items", out.train_items as f64),
        ("val_items", out.val_items as f64),
        ("initial_train_accuracy", out.train_initial.accuracy()),
        ("initial_val_accuracy", out.val_initial.accuracy()),
        ("initial_val_f1", out.val_initial.f1()),
        ("val_accuracy", out.val_final.accuracy()),
        ("val_f1", out.val_final.f1()),
        ("best_epoch", meta.best_epoch as f64),
    ] {
        let _ = writeln!(metrics, "{k},{v}");
    }
    ctx.write("train_metrics.csv", &metrics)?;
    let mut history = String::from("epoch,val_f1\n");
    for (e, f) in meta.val_f1.iter().enumerate() {
        let _ = writeln!(history, "{e},{f}");
    }
    ctx.write("train_history.csv", &history)?;
    print!("{metrics}");
    Ok(())
}

fn load_model(ctx: &Ctx, given: &Option<PathBuf>) -> Result<FragmentModel> {
    io::read_model(&ctx.input(given, "model.hsm"))
}

fn cmd_eval(ctx: &Ctx, a: &EvalArgs) -> Result<()> {
    let model = load_model(ctx, &a.model)?;
    let (set, _) = ctx.labeled(&a.inputs)?;
    let c = &ctx.cfg;
    let stride: usize = c.get_or("stride", 8)?;
    let tds: Vec<usize> = c.get_list("t_detection", vec![0, 1, 2])?;
    let floor: f64 = c.get_or("tpr_floor", 0.8)?;
    let target: f64 = c.get_or("target_fpr", 0.1)?;
    let scores = score_frames(&model, &set.frames, model.frag_h, stride, ctx.path()?)?;
    let truth = set.presence();
    let mut summary = String::from("t_detection,auc,pauc,max_tpr_at_fpr\n");
    for td in tds {
        let curve = frame_roc(&scores, &truth, td)?;
        ctx.write(&format!("roc_td{td}.csv"), &curve.to_csv())?;
        let _ = writeln!(
            summary,
            "{td},{},{},{}",
            curve.auc(),
            partial_auc(&curve, floor)?,
            curve.max_tpr_at_fpr(target)
        );
    }
    ctx.write("eval_summary.csv", &summary)?;
    print!("{summary}");
    Ok(())
}

fn cmd_sweep(ctx: &Ctx, a: &SweepArgs) -> Result<()> {
    let (set, dataset_id) = ctx.labeled(&a.inputs)?;
    let c = &ctx.cfg;
    let grid = SweepGrid {
        t_score: c.get_list("t_score", vec![0.0])?,
        t_detection: c.get_list("t_detection", vec![0, 1, 2])?,
        stride: c.get_list("stride", vec![8])?,
        fragment: c.get_list("fragment", vec![32])?,
        dim: c.get_list("dim", vec![4096])?,
    };
    let metric = match c.get_or("metric", "pauc".to_string())?.as_str() {
        "f1" => SweepMetric::F1,
        "pauc" => SweepMetric::PartialAuc {
            tpr_floor: c.get_or("tpr_floor", 0.8)?,
        },
        "max_tpr" => SweepMetric::MaxTprAtFpr {
            target: c.get_or("target_fpr", 0.1)?,
        },
        other => return Err(Error::usage(format!("unknown metric '{other}'"))),
    };
    let eval_fraction: f64 = c.get_or("eval_fraction", 0.2)?;
    if !(eval_fraction > 0.0 && eval_fraction < 1.0) {
        return Err(Error::usage("eval_fraction must be in (0, 1)"));
    }
    let cut = set.len() - ((set.len() as f64 * eval_fraction).round() as usize).max(1);
    let train_idx: Vec<usize> = (0..cut).collect();
    let eval_idx: Vec<usize> = (cut..set.len()).collect();
    let train_set = set.subset(&train_idx);
    let eval_set = set.subset(&eval_idx);
    let base = train_options(c, ctx.seed, false)?;
    let factory = |fragment: usize, dim: usize| {
        eprintln!("sweep: training fragment {fragment}, D {dim}");
        pipeline::train(
            &train_set,
            &TrainOptions {
                fragment,
                dim,
                ..base
            },
        )
        .map(|o| o.model)
    };
    let result = sweep(
        factory,
        &eval_set.frames,
        &eval_set.presence(),
        &grid,
        &SweepOptions {
            metric,
            max_cells: c.get_or("max_cells", 1000)?,
            path: ctx.path()?,
            seed: ctx.seed,
            dataset_id: &dataset_id,
        },
    )?;
    let csv = result.to_csv();
    ctx.write("sweep.csv", &csv)?;
    ctx.write(
        "sweep_meta.csv",
        &format!(
            "seed,dataset_id,cells,top10_mean\n{},{},{},{}\n",
            result.seed,
            result.dataset_id,
            result.cells.len(),
            top_k_mean(&result.metrics(), 10)
        ),
    )?;
    print!("{csv}");
    Ok(())
}

fn cmd_sense(ctx: &Ctx, a: &SenseArgs) -> Result<()> {
    let model = load_model(ctx, &a.model)?;
    let (set, _) = ctx.labeled(&a.inputs)?;
    let c = &ctx.cfg;
    let policy = GatePolicy::new(c.get_or("base_rate", 60.0)?, c.get_or("min_rate", 1.0)?)?;
    let mut detector = HdcDetector {
        model: &model,
        cfg: HyperSenseConfig {
            fragment: model.frag_h,
            stride: c.get_or("stride", 8)?,
            t_score: c.get_or("t_score", 0.0)?,
            t_detection: c.get_or("t_detection", 0)?,
        },
        path: ctx.path()?,
    };
    let truth = set.presence();
    let (log, s) = simulate_stream(&set.frames, &truth, &mut detector, &policy)?;
    ctx.write("gate_log.csv", &log.to_csv())?;
    let summary = format!(
        "frames,generated,ticks,tp,fp,tn,fn,tpr,fpr,gate_tp,gate_fp,gate_tn,gate_fn\n{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
        s.frames,
        s.generated,
        s.ticks,
        s.detector.tp,
        s.detector.fp,
        s.detector.tn,
        s.detector.fn_,
        s.detector.tpr(),
        s.detector.fpr(),
        s.gate.tp,
        s.gate.fp,
        s.gate.tn,
        s.gate.fn_
    );
    ctx.write("stream_summary.csv", &summary)?;
    let d = EnergyParams::default();
    let params = EnergyParams {
        e_sense_hi: c.get_or("e_sense_hi", d.e_sense_hi)?,
        e_sense_lo: c.get_or("e_sense_lo", d.e_sense_lo)?,
        e_edge_infer: c.get_or("e_edge_infer", d.e_edge_infer)?,
        e_tx: c.get_or("e_tx", d.e_tx)?,
        e_cloud: c.get_or("e_cloud", d.e_cloud)?,
    };
    let observed_p = truth.iter().filter(|&&t| t).count() as f64 / truth.len() as f64;
    let scenario = Scenario {
        p: c.get_or("p", observed_p)?,
        tpr: s.detector.tpr(),
        fpr: s.detector.fpr(),
        min_rate_fraction: c.get_or("min_rate_fraction", 1.0 / policy.tick_period() as f64)?,
    };
    let energy = report_csv(&params, &scenario)?;
    ctx.write("energy.csv", &energy)?;
    print!("{summary}\n{energy}");
    Ok(())
}

fn random_frame(height: usize, width: usize, seed: u64) -> Result<Frame> {
    let mut rng = SeededRng::new(seed, stream::SYNTH);
    Frame::new(
        height,
        width,
        (0..height * width).map(|_| rng.uniform() as f32).collect(),
    )
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn cmd_bench(ctx: &Ctx) -> Result<()> {
    let c = &ctx.cfg;
    let height: usize = c.get_or("height", 128)?;
    let width: usize = c.get_or("width", height)?;
    let fragment: usize = c.get_or("fragment", 32)?;
    let stride: usize = c.get_or("stride", 8)?;
    let dim: usize = c.get_or("dim", 4096)?;
    let frame = random_frame(height, width, ctx.seed)?;
    let enc = EncoderParams::generate(ctx.seed, fragment, fragment, dim)?;
    let grid = FragmentGrid::new(height, width, fragment, fragment, stride)?;

    let mut naive = OpCounter::default();
    let t0 = Instant::now();
    let hv_naive = encode_naive(&frame, &grid, &enc, &mut naive)?;
    let naive_ms = t0.elapsed().as_secs_f64() * 1e3;
    let mut reuse = OpCounter::default();
    let t0 = Instant::now();
    let hv_reuse = encode_reuse(&frame, &grid, &enc, &mut reuse)?;
    let reuse_ms = t0.elapsed().as_secs_f64() * 1e3;
    let max_diff = hv_naive
        .iter()
        .zip(&hv_reuse)
        .flat_map(|(a, b)| a.values().iter().zip(b.values()))
        .map(|(x, y)| (x - y).abs())
        .fold(0.0f32, f32::max);

    // Marginal cost of one more element in a single base row at stride 1.
    let w = fragment;
    let n = 3 * w;
    let row = frame.row(0);
    let marginal = if row.len() > n {
        let mut small = OpCounter::default();
        let mut large = OpCounter::default();
        let origins = |len: usize| (0..=len - w).collect::<Vec<_>>();
        row_contributions(&row[..n], enc.base(), 0, &origins(n), &mut small)?;
        row_contributions(&row[..n + 1], enc.base(), 0, &origins(n + 1), &mut large)?;
        Some(large.scalar_mults - small.scalar_mults)
    } else {
        None
    };

    let mut csv = String::from("path,scalar_mults,scalar_adds,reused_products,scaling_mults\n");
    for (name, k) in [("naive", &naive), ("reuse", &reuse)] {
        let _ = writeln!(
            csv,
            "{name},{},{},{},{}",
            k.scalar_mults, k.scalar_adds, k.reused_products, k.scaling_mults
        );
    }
    let _ = writeln!(
        csv,
        "\nframe_reuse_factor,max_abs_diff\n{},{max_diff}",
        naive.scalar_mults as f64 / reuse.scalar_mults as f64
    );
    if let Some(m) = marginal {
        let naive_marginal = (w * dim) as u64;
        let g = gcd(naive_marginal, m);
        let _ = writeln!(
            csv,
            "\nsteady_naive_mults_per_element,steady_reuse_mults_per_element,steady_reuse_factor,steady_reuse_factor_exact\n{naive_marginal},{m},{:.2},{}/{}",
            naive_marginal as f64 / m as f64,
            naive_marginal / g,
            m / g
        );
    }
    ctx.write("bench.csv", &csv)?;
    print!("{csv}");
    println!("\npath,wall_ms\nnaive,{naive_ms:.3}\nreuse,{reuse_ms:.3}");
    Ok(())
}

fn cmd_accsim(ctx: &Ctx, a: &AccsimArgs) -> Result<()> {
    let c = &ctx.cfg;
    let fragment: usize = c.get_or("fragment", 8)?;
    let dim: usize = c.get_or("dim", 64)?;
    let frame = match &a.frames {
        Some(p) => {
            let frames = io::read_frames(Path::new(p))?;
            let i: usize = c.get_or("frame_index", 0)?;
            frames
                .get(i)
                .cloned()
                .ok_or_else(|| Error::usage(format!("frame index {i} out of range")))?
        }
        None => {
            let height: usize = c.get_or("height", 32)?;
            random_frame(height, c.get_or("width", height)?, ctx.seed)?
        }
    };
    let d = SaConfig::new(fragment, fragment, dim);
    let sa = SaConfig {
        stride: c.get_or("stride", 1)?,
        t1: c.get_or("t1", d.t1)?,
        t2: c.get_or("t2", d.t2)?,
        fifo_capacity: c.get_or("fifo_capacity", d.fifo_capacity)?,
        multipliers_per_pe: c.get_or("multipliers_per_pe", d.multipliers_per_pe)?,
        classifier_latency: c.get_or("classifier_latency", d.classifier_latency)?,
        ..d
    };
    let enc = EncoderParams::generate(ctx.seed, fragment, fragment, dim)?;
    let run = run_frame(&frame, &sa, &enc, true)?;
    if let Some(trace) = &run.trace {
        ctx.write("trace.csv", &trace.to_csv())?;
    }
    let summary = run.summary.to_csv();
    ctx.write("accsim_summary.csv", &summary)?;
    print!("{summary}");
    Ok(())
}
