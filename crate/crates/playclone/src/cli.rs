//! Command-line front end. Every subcommand reads and writes only the
//! artifact formats of this crate; failures print one line
//! `error: kind=<kind> msg=<message>` and exit with the kind's code.

use std::ffi::OsString;
use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use playclone_core::agents::{collect_play, CollectPolicy, RandomPolicyStats};
use playclone_core::benchmark::{run_eval, run_sweep, summarize, EvalConfig, RunSeeds, SweepSpec};
use playclone_core::coverage::{build_grid, coverage_curve, coverage_rate};
use playclone_core::pipeline::{generate_cloned_play, PipelineError, Policy, Trainer};
use playclone_core::playdata::{compute_norm_stats, Dataset, Episode};
use playclone_core::rng::derive_named;
use playclone_core::scene::{Action, EnvState, OBS_NAMES};
use playclone_core::sim::step_state;

use crate::checkpoint::{self, CheckpointError};
use crate::config::{ConfigError, RunConfig};
use crate::dataset::{self, DatasetError};
use crate::play::{self, PlayError};
use crate::reports::{self, Series};
use crate::teleop;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorKind {
    Other,
    Usage,
    Missing,
    Schema,
    Config,
}

impl ErrorKind {
    pub fn code(self) -> i32 {
        match self {
            ErrorKind::Other => 1,
            ErrorKind::Usage => 2,
            ErrorKind::Missing => 3,
            ErrorKind::Schema => 4,
            ErrorKind::Config => 5,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ErrorKind::Other => "other",
            ErrorKind::Usage => "usage",
            ErrorKind::Missing => "missing",
            ErrorKind::Schema => "schema",
            ErrorKind::Config => "config",
        }
    }
}

#[derive(Debug)]
pub struct CliError {
    pub kind: ErrorKind,
    pub msg: String,
}

impl CliError {
    fn new(kind: ErrorKind, msg: impl fmt::Display) -> Self {
        CliError { kind, msg: msg.to_string() }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // Keep the line machine-parsable.
        write!(f, "error: kind={} msg={}", self.kind.name(), self.msg.replace('\n', " "))
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        let kind = match &e {
            ConfigError::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound => ErrorKind::Missing,
            _ => ErrorKind::Config,
        };
        CliError::new(kind, e)
    }
}

impl From<DatasetError> for CliError {
    fn from(e: DatasetError) -> Self {
        let kind = if e.is_missing() {
            ErrorKind::Missing
        } else if matches!(e, DatasetError::Io { .. }) {
            ErrorKind::Other
        } else {
            ErrorKind::Schema
        };
        CliError::new(kind, e)
    }
}

impl From<PlayError> for CliError {
    fn from(e: PlayError) -> Self {
        let kind = match &e {
            PlayError::Io(io) if io.kind() == std::io::ErrorKind::NotFound => ErrorKind::Missing,
            PlayError::Io(_) => ErrorKind::Other,
            _ => ErrorKind::Schema,
        };
        CliError::new(kind, e)
    }
}

impl From<CheckpointError> for CliError {
    fn from(e: CheckpointError) -> Self {
        let kind = match &e {
            CheckpointError::Io(io) if io.kind() == std::io::ErrorKind::NotFound => ErrorKind::Missing,
            CheckpointError::Io(_) => ErrorKind::Other,
            _ => ErrorKind::Schema,
        };
        CliError::new(kind, e)
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        let kind = match &e {
            PipelineError::Config(_) | PipelineError::EmptySource => ErrorKind::Config,
            PipelineError::PolicyKind { .. } => ErrorKind::Schema,
            _ => ErrorKind::Other,
        };
        CliError::new(kind, e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        let kind = if e.kind() == std::io::ErrorKind::NotFound { ErrorKind::Missing } else { ErrorKind::Other };
        CliError::new(kind, e)
    }
}

type CliResult<T = ()> = Result<T, CliError>;

#[derive(Parser, Debug)]
#[command(name = "playclone", version, about = "Play data collection, Play-BC cloning, LfP training and evaluation")]
pub struct Cli {
    /// Config file of `key=value` lines.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Override one config key, e.g. `--set lfp.steps=500`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub set: Vec<String>,
    /// Master seed (overrides `seed`).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Data root (overrides PLAYCLONE_ROOT and `paths.root`).
    #[arg(long, global = true)]
    pub root: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum CollectKind {
    Oracle,
    Random,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum PlotKind {
    Sweep,
    Coverage,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Training dataset directory.
    #[arg(long)]
    pub data: PathBuf,
    /// Output checkpoint.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub layers: Option<usize>,
    #[arg(long)]
    pub width: Option<usize>,
    /// Per-step CSV log (step, loss, grad_norm, wallclock).
    #[arg(long)]
    pub log: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Record play with the scripted oracle or the random policy.
    Collect {
        #[arg(long, value_enum, default_value = "oracle")]
        policy: CollectKind,
        #[arg(long)]
        minutes: Option<f64>,
        #[arg(long)]
        episode_minutes: Option<f64>,
        /// Reference dataset whose action statistics drive the random policy.
        #[arg(long)]
        reference: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the Play-BC policy π(a|s).
    TrainBc(TrainArgs),
    /// Generate cloned play by unrolling a Play-BC checkpoint.
    Clone {
        #[arg(long)]
        policy: PathBuf,
        /// Dataset whose frames provide the start states.
        #[arg(long)]
        source: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        episodes: Option<usize>,
        #[arg(long)]
        minutes: Option<f64>,
        #[arg(long)]
        greedy: bool,
    },
    /// Combine datasets into a new manifest that references their episodes.
    Merge {
        #[arg(long)]
        out: PathBuf,
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
    /// Train the goal-conditioned LfP policy on hindsight-relabeled windows.
    TrainLfp(TrainArgs),
    /// Evaluate a goal-conditioned checkpoint on the 18-task benchmark.
    Eval {
        #[arg(long)]
        policy: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        greedy: bool,
    },
    /// Cumulative unique-bin coverage of a reference dataset followed by more segments.
    Coverage {
        #[arg(long)]
        reference: PathBuf,
        /// Additional segment as `tag=dataset_dir`. Repeatable, streamed in order.
        #[arg(long = "segment", value_name = "TAG=DIR")]
        segments: Vec<String>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1000)]
        stride: usize,
    },
    /// Run a full-pipeline sweep over a grid and several seeds.
    Sweep {
        #[arg(long)]
        kind: Option<String>,
        /// Comma-separated grid points.
        #[arg(long)]
        grid: Option<String>,
        /// Comma-separated master seeds.
        #[arg(long)]
        seeds: Option<String>,
        /// Per-row CSV; the per-point summary goes to `<out stem>.summary.csv`.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the teleoperation WebSocket bridge.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8765")]
        addr: String,
        /// Dataset directory that recorded episodes are appended to.
        #[arg(long)]
        out: PathBuf,
    },
    /// Print an episode as CSV, or re-simulate it and compare.
    Replay {
        episode: PathBuf,
        /// Re-simulate from the first observation and require exact agreement.
        #[arg(long)]
        verify: bool,
        /// Print every n-th frame.
        #[arg(long, default_value_t = 1)]
        every: usize,
    },
    /// Check datasets, episode files or checkpoints.
    Validate {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
    },
    /// Render a sweep summary or coverage CSV as an SVG line chart.
    Plot {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum)]
        kind: PlotKind,
        #[arg(long)]
        title: Option<String>,
    },
    /// Print the effective configuration.
    ShowConfig,
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            if !usage {
                return 0;
            }
            eprintln!("{}", CliError::new(ErrorKind::Usage, e.kind()));
            return ErrorKind::Usage.code();
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{e}");
            e.kind.code()
        }
    }
}

struct Ctx {
    cfg: RunConfig,
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

impl Ctx {
    fn data(&self, p: &Path) -> PathBuf {
        resolve(&self.cfg.data_root(), p)
    }

    fn ckpt(&self, p: &Path) -> PathBuf {
        resolve(&self.cfg.checkpoint_dir(), p)
    }

    fn report(&self, p: &Path) -> PathBuf {
        resolve(&self.cfg.report_dir(), p)
    }

    fn seeds(&self) -> RunSeeds {
        RunSeeds::from_master(self.cfg.seed)
    }
}

fn load_config(cli: &Cli) -> CliResult<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::default(),
    };
    for kv in &cli.set {
        let (k, v) = kv.split_once('=').ok_or_else(|| CliError::new(ErrorKind::Usage, format!("--set expects KEY=VALUE, got {kv:?}")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(r) = &cli.root {
        cfg.root_flag = Some(std::path::absolute(r)?);
    }
    Ok(cfg)
}

fn set(cfg: &mut RunConfig, key: &str, value: Option<impl ToString>) -> CliResult {
    if let Some(v) = value {
        cfg.set(key, &v.to_string())?;
    }
    Ok(())
}

pub fn run(cli: Cli) -> CliResult {
    let mut cfg = load_config(&cli)?;
    match &cli.command {
        Command::TrainBc(a) | Command::TrainLfp(a) => {
            let sec = if matches!(cli.command, Command::TrainBc(_)) { "bc" } else { "lfp" };
            set(&mut cfg, &format!("{sec}.steps"), a.steps)?;
            set(&mut cfg, &format!("{sec}.layers"), a.layers)?;
            set(&mut cfg, &format!("{sec}.width"), a.width)?;
        }
        Command::Collect { minutes, episode_minutes, .. } => {
            set(&mut cfg, "collect.minutes", *minutes)?;
            set(&mut cfg, "collect.episode_minutes", *episode_minutes)?;
        }
        Command::Clone { episodes, minutes, greedy, .. } => {
            set(&mut cfg, "clone.episodes", *episodes)?;
            set(&mut cfg, "clone.minutes", *minutes)?;
            if *greedy {
                cfg.set("clone.greedy", "true")?;
            }
        }
        Command::Eval { trials, greedy, .. } => {
            set(&mut cfg, "eval.trials", *trials)?;
            if *greedy {
                cfg.set("eval.greedy", "true")?;
            }
        }
        Command::Sweep { kind, grid, seeds, .. } => {
            set(&mut cfg, "sweep.kind", kind.as_ref())?;
            set(&mut cfg, "sweep.grid", grid.as_ref())?;
            set(&mut cfg, "sweep.seeds", seeds.as_ref())?;
        }
        _ => {}
    }
    cfg.validate()?;
    let ctx = Ctx { cfg };
    match cli.command {
        Command::Collect { policy, reference, out, .. } => collect(&ctx, policy, reference.as_deref(), &out),
        Command::TrainBc(a) => train(&ctx, &a, false),
        Command::TrainLfp(a) => train(&ctx, &a, true),
        Command::Clone { policy, source, out, .. } => clone(&ctx, &policy, &source, &out),
        Command::Merge { out, inputs } => merge(&ctx, &out, &inputs),
        Command::Eval { policy, out, .. } => eval(&ctx, &policy, &out),
        Command::Coverage { reference, segments, out, stride } => coverage(&ctx, &reference, &segments, &out, stride),
        Command::Sweep { out, .. } => sweep(&ctx, &out),
        Command::Serve { addr, out } => {
            let e = &ctx.cfg.experiment;
            let sc = teleop::ServeConfig::new(e.scene.clone(), ctx.data(&out), ctx.cfg.seed);
            teleop::run(&addr, sc).map_err(|e| CliError::new(ErrorKind::Other, e))
        }
        Command::Replay { episode, verify, every } => replay(&ctx, &ctx.data(&episode), verify, every),
        Command::Validate { paths } => {
            for p in paths {
                validate_path(&ctx, &p)?;
            }
            Ok(())
        }
        Command::Plot { input, out, kind, title } => plot(&ctx.report(&input), &ctx.report(&out), kind, title),
        Command::ShowConfig => {
            print!("{}", ctx.cfg.to_text());
            Ok(())
        }
    }
}

fn load_data(dir: &Path) -> CliResult<Dataset> {
    Ok(dataset::load_dataset(dir)?)
}

fn collect(ctx: &Ctx, kind: CollectKind, reference: Option<&Path>, out: &Path) -> CliResult {
    let e = &ctx.cfg.experiment;
    let seeds = ctx.seeds();
    let (policy, seed) = match kind {
        CollectKind::Oracle => (CollectPolicy::Oracle(e.oracle.clone()), seeds.collect),
        CollectKind::Random => {
            let r = reference.ok_or_else(|| CliError::new(ErrorKind::Config, "random collection needs --reference"))?;
            let stats = compute_norm_stats(&load_data(&ctx.data(r))?).map_err(|e| CliError::new(ErrorKind::Config, e))?;
            (CollectPolicy::Random(RandomPolicyStats::from_norm_stats(&stats)), derive_named(seeds.collect, "random", 0))
        }
    };
    let d = collect_play(&e.scene, &policy, e.human_minutes, e.human_episode_minutes, seed);
    let dir = ctx.data(out);
    dataset::save_dataset(&dir, &d)?;
    println!("collected {} episodes, {} frames -> {}", d.episodes.len(), d.frame_count(), dir.display());
    Ok(())
}

fn train(ctx: &Ctx, a: &TrainArgs, goal: bool) -> CliResult {
    let e = &ctx.cfg.experiment;
    let seeds = ctx.seeds();
    let (kind, cfg) = if goal { ("lfp", e.lfp.clone()) } else { ("bc", e.bc.clone()) };
    let cfg = playclone_core::pipeline::TrainConfig { seed: if goal { seeds.lfp } else { seeds.bc }, ..cfg };
    let data = load_data(&ctx.data(&a.data))?;
    let t0 = Instant::now();
    let mut log = Vec::with_capacity(cfg.steps);
    let mut clock = Vec::with_capacity(cfg.steps);
    let policy = Trainer::new(&data, &cfg, goal)?.run(|s| {
        log.push(*s);
        clock.push(t0.elapsed().as_secs_f64());
        if s.step % 100 == 0 {
            log::info!("{kind} step {} loss {:.4} grad {:.3}", s.step, s.loss, s.grad_norm);
        }
    })?;
    let tail = playclone_core::pipeline::smoothed_loss(&log, 100).last().copied();
    let path = ctx.ckpt(&a.out);
    checkpoint::save(&path, &policy, &checkpoint::sidecar_text(kind, &cfg, data.frame_count(), tail))?;
    if let Some(l) = &a.log {
        let p = ctx.report(l);
        reports::save_csv(&p, |buf| reports::write_train_log(buf, &log, &clock))?;
    }
    match tail {
        Some(l) => println!("trained {kind} for {} steps, final loss {l:.4} -> {}", cfg.steps, path.display()),
        None => println!("wrote untrained {kind} policy -> {}", path.display()),
    }
    Ok(())
}

fn load_policy(ctx: &Ctx, p: &Path) -> CliResult<Policy> {
    Ok(checkpoint::load(&ctx.ckpt(p))?)
}

fn clone(ctx: &Ctx, policy: &Path, source: &Path, out: &Path) -> CliResult {
    let e = &ctx.cfg.experiment;
    let p = load_policy(ctx, policy)?;
    let src = load_data(&ctx.data(source))?;
    let cc = playclone_core::pipeline::CloneConfig { seed: ctx.seeds().clone, ..e.clone.clone() };
    let (d, warnings) = generate_cloned_play(&p, &e.scene, &src, &cc)?;
    for w in &warnings {
        log::warn!("episode {} skipped: start frame {} invalid ({})", w.episode, w.frame_index, w.error);
    }
    let dir = ctx.data(out);
    dataset::save_dataset(&dir, &d)?;
    println!("cloned {} episodes, {} frames -> {}", d.episodes.len(), d.frame_count(), dir.display());
    Ok(())
}

fn merge(ctx: &Ctx, out: &Path, inputs: &[PathBuf]) -> CliResult {
    let ins: Vec<PathBuf> = inputs.iter().map(|p| ctx.data(p)).collect();
    let refs: Vec<&Path> = ins.iter().map(PathBuf::as_path).collect();
    let dir = ctx.data(out);
    let totals = dataset::merge_datasets(&dir, &refs)?;
    dataset::write_totals(&totals, std::io::stdout())?;
    Ok(())
}

fn eval(ctx: &Ctx, policy: &Path, out: &Path) -> CliResult {
    let e = &ctx.cfg.experiment;
    let p = load_policy(ctx, policy)?;
    let cfg = EvalConfig { seed: ctx.seeds().eval, ..e.eval.clone() };
    let r = run_eval(&p, &e.scene, &cfg)?;
    let path = ctx.report(out);
    reports::save_csv(&path, |buf| reports::write_eval_report(buf, &r))?;
    println!("average {:.4} stderr {:.4} fingerprint {:016x} -> {}", r.average, r.stderr, r.fingerprint, path.display());
    Ok(())
}

fn coverage(ctx: &Ctx, reference: &Path, segments: &[String], out: &Path, stride: usize) -> CliResult {
    let reference = load_data(&ctx.data(reference))?;
    let grid = build_grid(&reference).map_err(|e| CliError::new(ErrorKind::Config, e))?;
    let mut owned = Vec::new();
    for s in segments {
        let (tag, dir) = s.split_once('=').ok_or_else(|| CliError::new(ErrorKind::Usage, format!("--segment expects TAG=DIR, got {s:?}")))?;
        owned.push((tag.to_string(), load_data(&ctx.data(Path::new(dir)))?));
    }
    let mut segs: Vec<(&str, &Dataset)> = vec![("reference", &reference)];
    segs.extend(owned.iter().map(|(t, d)| (t.as_str(), d)));
    let curve = coverage_curve(&segs, &grid, stride, ctx.cfg.experiment.scene.control_hz).map_err(|e| CliError::new(ErrorKind::Config, e))?;
    let path = ctx.report(out);
    reports::save_csv(&path, |buf| reports::write_coverage(buf, &curve))?;
    for s in &curve.segments {
        let rate = coverage_rate(&curve, &s.tag).map_or(f64::NAN, |r| r);
        println!("{} frames {} unique {} -> {} rate_per_hour {:.1}", s.tag, s.end_frame - s.start_frame, s.unique_before, s.unique_after, rate);
    }
    Ok(())
}

fn sweep(ctx: &Ctx, out: &Path) -> CliResult {
    let spec: &SweepSpec = &ctx.cfg.sweep;
    let path = ctx.report(out);
    let rows = run_sweep(spec, &ctx.cfg.experiment, |r| match &r.outcome {
        Ok(o) => println!("{} point {} seed {} average {:.4}", r.kind.name(), r.point, r.seed, o.report.average),
        Err(e) => println!("{} point {} seed {} failed: {e}", r.kind.name(), r.point, r.seed),
    })?;
    reports::save_csv(&path, |buf| reports::write_sweep_rows(buf, &rows))?;
    let summary = summarize(&rows);
    let spath = path.with_extension("summary.csv");
    reports::save_csv(&spath, |buf| reports::write_sweep_summary(buf, spec.kind.name(), &summary))?;
    for p in &summary {
        println!("point {} mean {:.4} stderr {:.4} seeds {} failed {}", p.point, p.mean, p.stderr, p.seeds, p.failed);
    }
    Ok(())
}

/// First index where re-simulation disagrees with the recording.
pub fn verify_episode(scene: &playclone_core::SceneConfig, e: &Episode) -> Option<usize> {
    for (t, w) in e.frames.windows(2).enumerate() {
        let s = EnvState::from_array(&w[0].obs);
        let next = step_state(scene, &s, &Action::from_array(&w[0].act));
        if next.to_array() != w[1].obs {
            return Some(t + 1);
        }
    }
    None
}

fn replay(ctx: &Ctx, path: &Path, verify: bool, every: usize) -> CliResult {
    let e = play::load_episode(path)?;
    if verify {
        return match verify_episode(&ctx.cfg.experiment.scene, &e) {
            None => {
                println!("replay ok: {} frames reproduce exactly", e.len());
                Ok(())
            }
            Some(t) => Err(CliError::new(ErrorKind::Schema, format!("frame {t} differs from re-simulation"))),
        };
    }
    let mut w = csv::Writer::from_writer(std::io::stdout());
    let mut head = vec!["frame".to_string()];
    head.extend(OBS_NAMES.iter().map(|s| s.to_string()));
    w.write_record(&head).map_err(|e| CliError::new(ErrorKind::Other, e))?;
    for (i, f) in e.frames.iter().enumerate().step_by(every.max(1)) {
        let mut row = vec![i.to_string()];
        row.extend(f.obs.iter().map(|x| format!("{x:?}")));
        w.write_record(&row).map_err(|e| CliError::new(ErrorKind::Other, e))?;
    }
    w.flush()?;
    Ok(())
}

fn validate_path(ctx: &Ctx, p: &Path) -> CliResult {
    let scene = &ctx.cfg.experiment.scene;
    let schema = |m: String| CliError::new(ErrorKind::Schema, m);
    if p.is_dir() {
        let d = load_data(p)?;
        for (i, e) in d.episodes.iter().enumerate() {
            e.validate_with_scene(scene).map_err(|err| schema(format!("{} episode {i}: {err}", p.display())))?;
        }
        println!("ok {} episodes {} frames {}", p.display(), d.episodes.len(), d.frame_count());
    } else if p.extension().is_some_and(|x| x == "play") {
        let e = play::load_episode(p)?;
        e.validate_with_scene(scene).map_err(|err| schema(format!("{}: {err}", p.display())))?;
        println!("ok {} frames {}", p.display(), e.len());
    } else if p.exists() {
        let c = checkpoint::load(p)?;
        let kind = if c.goal_conditioned() { "lfp" } else { "bc" };
        println!("ok {} {kind} policy {} parameters", p.display(), c.params.len());
    } else {
        return Err(CliError::new(ErrorKind::Missing, format!("{} does not exist", p.display())));
    }
    Ok(())
}

fn read_rows(path: &Path) -> CliResult<Vec<csv::StringRecord>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| match e.kind() {
        csv::ErrorKind::Io(io) if io.kind() == std::io::ErrorKind::NotFound => CliError::new(ErrorKind::Missing, format!("{}: not found", path.display())),
        _ => CliError::new(ErrorKind::Schema, e),
    })?;
    r.records().collect::<Result<_, _>>().map_err(|e| CliError::new(ErrorKind::Schema, e))
}

fn num(rec: &csv::StringRecord, i: usize) -> CliResult<f64> {
    rec.get(i).and_then(|s| s.parse().ok()).ok_or_else(|| CliError::new(ErrorKind::Schema, format!("column {i} is not a number in {rec:?}")))
}

fn plot(input: &Path, out: &Path, kind: PlotKind, title: Option<String>) -> CliResult {
    let rows = read_rows(input)?;
    let mut series: Vec<Series> = Vec::new();
    let (x_label, y_label) = match kind {
        // kind,point,mean,stderr,seeds,failed
        PlotKind::Sweep => {
            for r in &rows {
                let label = r.get(0).unwrap_or("").to_string();
                let (x, y, e) = (num(r, 1)?, num(r, 2)?, num(r, 3)?);
                match series.iter_mut().find(|s| s.label == label) {
                    Some(s) => {
                        s.points.push((x, y));
                        s.errors.get_or_insert_with(Vec::new).push(e);
                    }
                    None => series.push(Series { label, points: vec![(x, y)], errors: Some(vec![e]) }),
                }
            }
            ("grid point", "18-task success")
        }
        // frames,hours,cumulative_unique,segment_tag
        PlotKind::Coverage => {
            let mut s = Series { label: "cumulative unique bins".into(), points: Vec::new(), errors: None };
            for r in &rows {
                s.points.push((num(r, 1)?, num(r, 2)?));
            }
            series.push(s);
            ("hours", "unique bins")
        }
    };
    let title = title.unwrap_or_else(|| input.file_stem().map_or("plot".into(), |s| s.to_string_lossy().into_owned()));
    let svg = reports::svg_plot(&title, x_label, y_label, &series);
    if let Some(dir) = out.parent() {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(out, svg)?;
    println!("wrote {}", out.display());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn error_line_format() {
        let e = CliError::new(ErrorKind::Schema, "bad\nthing");
        assert_eq!(e.to_string(), "error: kind=schema msg=bad thing");
        assert_eq!(e.kind.code(), 4);
    }
}
