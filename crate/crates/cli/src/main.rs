#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use explore_core::bench::{
    aggregate, render_map, run_ablation, simulate, write_records_csv, write_report_json, AggregateReport,
    DepthMode, RunConfig, RunRecord, TraceEvent,
};
use explore_core::exec::Executor;
use explore_core::sim::{generate_scene, read_scene, write_scene, Scene, SceneGenSpec};

#[derive(Parser, Debug)]
#[command(name = "explore-bench", version, about = "Frontier exploration benchmark runner")]
struct Cli {
    /// JSON file mirroring RunConfig; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run single episodes on one scene.
    Run(RunArgs),
    /// Run the four-step enhancement ladder over a scene set.
    Ablation(AblationArgs),
    /// Generate a scene corpus.
    GenScenes(GenArgs),
    /// Render a scene or map file as a PPM image.
    Render(RenderArgs),
}

#[derive(Args, Debug, Default)]
struct Overrides {
    /// Comma separated run seeds.
    #[arg(short = 's', long = "seed", value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Episode length, s.
    #[arg(long)]
    duration: Option<f64>,
    #[arg(long)]
    bump_detector: bool,
    /// Max-pool downsampling and obstacle inflation before planning.
    #[arg(long)]
    inflate: bool,
    /// Enable the orientation cost term with this weight.
    #[arg(long, value_name = "GAMMA")]
    orientation_coef: Option<f64>,
    /// Close narrow openings in depth scans.
    #[arg(long)]
    corrupt_depth: bool,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    /// Run jobs one after another instead of on the worker pool.
    #[arg(long)]
    sequential: bool,
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Scene PGM file.
    #[arg(long)]
    scene: Option<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
    /// Output directory for records, report and final map renders.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write a JSONL event trace per run (requires --out).
    #[arg(long)]
    trace: bool,
}

#[derive(Args, Debug)]
struct AblationArgs {
    /// Directory of scene PGM files.
    #[arg(long)]
    scenes_dir: Option<PathBuf>,
    /// Scene PGM file; may be repeated.
    #[arg(long)]
    scene: Vec<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
    /// Output directory for records.csv and report.json.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum LayoutArg {
    Rooms,
    DoorwayRich,
}

#[derive(Args, Debug)]
struct GenArgs {
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Number of scenes.
    #[arg(long, default_value_t = 20)]
    count: usize,
    /// Smallest target area, m².
    #[arg(long, default_value_t = 28.0)]
    min_area: f64,
    /// Largest target area, m².
    #[arg(long, default_value_t = 160.0)]
    max_area: f64,
    #[arg(long, value_enum, default_value_t = LayoutArg::Rooms)]
    layout: LayoutArg,
    /// Seed of the first scene; scene i uses seed + i.
    #[arg(short = 's', long = "seed", default_value_t = 1000)]
    seed: u64,
}

#[derive(Args, Debug)]
struct RenderArgs {
    /// Scene or map PGM file.
    #[arg(long)]
    scene: PathBuf,
    /// Output PPM file.
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(0) => ExitCode::SUCCESS,
        Ok(failed) => {
            eprintln!("error: {failed} run(s) failed");
            ExitCode::FAILURE
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

/// Returns the number of failed runs.
fn dispatch(cli: &Cli) -> Result<usize> {
    match &cli.command {
        Command::Run(a) => cmd_run(cli.config.as_deref(), a),
        Command::Ablation(a) => cmd_ablation(cli.config.as_deref(), a),
        Command::GenScenes(a) => cmd_gen(a).map(|_| 0),
        Command::Render(a) => cmd_render(a).map(|_| 0),
    }
}

fn base_config(path: Option<&Path>) -> Result<RunConfig> {
    match path {
        Some(p) => RunConfig::from_json_file(p).with_context(|| format!("loading config {}", p.display())),
        None => Ok(RunConfig::default()),
    }
}

fn apply(mut cfg: RunConfig, o: &Overrides) -> Result<RunConfig> {
    if let Some(seeds) = &o.seeds {
        cfg.seeds = seeds.clone();
    }
    if let Some(d) = o.duration {
        cfg = cfg.with_duration(d);
    }
    cfg.enhancements.bump_detector |= o.bump_detector;
    cfg.enhancements.obstacle_expanding |= o.inflate;
    if let Some(g) = o.orientation_coef {
        cfg.enhancements.orientation_coef = true;
        cfg.cost.gamma = g;
    }
    if o.corrupt_depth {
        cfg.depth = DepthMode::CorruptedDepth;
    }
    if let Some(a) = o.alpha {
        cfg.cost.alpha = a;
    }
    if let Some(b) = o.beta {
        cfg.cost.beta = b;
    }
    cfg.validate()?;
    if cfg.seeds.is_empty() {
        bail!("no seeds given");
    }
    Ok(cfg)
}

fn executor(o: &Overrides) -> Executor {
    if o.sequential {
        Executor::Sequential
    } else {
        Executor::Parallel
    }
}

fn load_scene(path: &Path) -> Result<Scene> {
    read_scene(path).with_context(|| format!("reading scene {}", path.display()))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn cmd_run(config: Option<&Path>, a: &RunArgs) -> Result<usize> {
    let cfg = apply(base_config(config)?, &a.overrides)?;
    let scene_path = a
        .scene
        .clone()
        .or_else(|| cfg.scene.clone())
        .context("no scene given (use --scene or the config's scene field)")?;
    let scene = load_scene(&scene_path)?;
    if a.trace && a.out.is_none() {
        bail!("--trace needs --out");
    }
    if let Some(dir) = &a.out {
        create_dir(dir)?;
    }
    let outcomes = executor(&a.overrides).map(&cfg.seeds, |&seed| simulate(&scene, &cfg, seed, a.trace));
    let mut records = Vec::new();
    for (outcome, &seed) in outcomes.into_iter().zip(&cfg.seeds) {
        let o = outcome?;
        if let Some(dir) = &a.out {
            let stem = format!("{}_{}_{seed}", cfg.name, scene.name());
            render_map(&o.map, Some(&o.pose), o.path.as_ref(), &dir.join(format!("{stem}.ppm")))?;
            if a.trace {
                write_trace(&o.trace, &dir.join(format!("{stem}.jsonl")))?;
            }
        }
        records.push(o.record);
    }
    print_records(&records);
    if let Some(dir) = &a.out {
        write_outputs(&records, &aggregate(std::slice::from_ref(&cfg), &records), dir)?;
    }
    Ok(report_failures(&records))
}

fn write_trace(events: &[TraceEvent], path: &Path) -> Result<()> {
    let file = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = std::io::BufWriter::new(file);
    for e in events {
        writeln!(w, "{}", serde_json::to_string(e)?).with_context(|| format!("writing {}", path.display()))?;
    }
    w.flush().with_context(|| format!("writing {}", path.display()))
}

fn cmd_ablation(config: Option<&Path>, a: &AblationArgs) -> Result<usize> {
    let cfg = apply(base_config(config)?, &a.overrides)?;
    let mut paths = a.scene.clone();
    if let Some(dir) = &a.scenes_dir {
        paths.extend(scene_files(dir)?);
    }
    if paths.is_empty() {
        paths.extend(cfg.scene.clone());
    }
    if paths.is_empty() {
        bail!("no scenes given (use --scenes-dir or --scene)");
    }
    let scenes = paths.iter().map(|p| load_scene(p)).collect::<Result<Vec<_>>>()?;
    let ab = run_ablation(&scenes, &cfg, executor(&a.overrides))?;
    print_report(&ab.report);
    if let Some(dir) = &a.out {
        create_dir(dir)?;
        write_outputs(&ab.records, &ab.report, dir)?;
    }
    Ok(report_failures(&ab.records))
}

fn scene_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).with_context(|| format!("listing {}", dir.display()))? {
        let p = entry?.path();
        if p.extension().is_some_and(|e| e == "pgm") {
            out.push(p);
        }
    }
    out.sort();
    if out.is_empty() {
        bail!("no .pgm scenes in {}", dir.display());
    }
    Ok(out)
}

fn write_outputs(records: &[RunRecord], report: &AggregateReport, dir: &Path) -> Result<()> {
    write_records_csv(records, &dir.join("records.csv"))?;
    write_report_json(report, &dir.join("report.json"))?;
    Ok(())
}

fn report_failures(records: &[RunRecord]) -> usize {
    let failed: Vec<&RunRecord> = records.iter().filter(|r| r.failed()).collect();
    for r in &failed {
        eprintln!(
            "failed: config {} scene {} seed {} at t={:.1}: {}",
            r.config,
            r.scene,
            r.seed,
            r.end_time,
            r.error.as_deref().unwrap_or("unknown error")
        );
    }
    failed.len()
}

fn print_records(records: &[RunRecord]) {
    println!("{:<20} {:>6} {:>8} {:>7} {:>8} {:>7} {:>9}", "scene", "seed", "rel", "losses", "finish", "bumps", "end");
    for r in records {
        let rel = r.final_sample().map_or(0.0, |s| s.rel);
        let finish = r.finish_time.map_or("-".to_string(), |t| format!("{t:.1}"));
        let end = serde_json::to_value(r.end_reason).ok().and_then(|v| v.as_str().map(String::from));
        println!(
            "{:<20} {:>6} {:>8.3} {:>7} {:>8} {:>7} {:>9}",
            r.scene,
            r.seed,
            rel,
            r.tracking_losses,
            finish,
            r.bumps,
            end.unwrap_or_default()
        );
    }
}

fn print_report(report: &AggregateReport) {
    println!(
        "{:<20} {:>7} {:>9} {:>12} {:>9} {:>9} {:>9}",
        "config", "losses", "finished", "finish time", "rel", "rel large", "rel small"
    );
    let last = |v: &[f64]| v.last().copied().unwrap_or(f64::NAN);
    for c in &report.configs {
        let finish = c.all.mean_finish_time.map_or("-".to_string(), |t| format!("{t:.1}"));
        println!(
            "{:<20} {:>7.2} {:>9.2} {:>12} {:>9.3} {:>9.3} {:>9.3}",
            c.config,
            c.all.mean_tracking_losses,
            c.all.finished_mean,
            finish,
            last(&c.all.mean_rel),
            last(&c.large.mean_rel),
            last(&c.small.mean_rel)
        );
    }
}

fn cmd_gen(a: &GenArgs) -> Result<()> {
    if a.count == 0 {
        bail!("--count must be at least 1");
    }
    if !(a.min_area <= a.max_area) {
        bail!("--min-area must not exceed --max-area");
    }
    create_dir(&a.out)?;
    for i in 0..a.count {
        let area = if a.count == 1 {
            a.min_area
        } else {
            a.min_area + (a.max_area - a.min_area) * i as f64 / (a.count - 1) as f64
        };
        let spec = match a.layout {
            LayoutArg::Rooms => SceneGenSpec::rooms(area),
            LayoutArg::DoorwayRich => SceneGenSpec::doorway_rich(area),
        };
        let seed = a.seed + i as u64;
        let scene = generate_scene(&spec, seed).with_context(|| format!("scene {i} ({area:.0} m², seed {seed})"))?;
        let path = write_scene(&scene, &a.out)?;
        println!("{} {:.2} m²", path.display(), scene.area());
    }
    Ok(())
}

fn cmd_render(a: &RenderArgs) -> Result<()> {
    let sidecar = a.scene.with_extension("json");
    if sidecar.exists() {
        let scene = load_scene(&a.scene)?;
        let spawn = scene.spawn();
        render_map(scene.ground_truth(), Some(&spawn), None, &a.out)?;
    } else {
        let grid = explore_core::grid_map::read_map(&a.scene)
            .with_context(|| format!("reading map {}", a.scene.display()))?;
        render_map(&grid, None, None, &a.out)?;
    }
    println!("{}", a.out.display());
    Ok(())
}
