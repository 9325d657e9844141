use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{config_hash, Enhancements, RunConfig};
use super::episode::{run_episode, RunRecord};
use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::sim::Scene;

/// Scenes at least this large (m²) form the large size class.
pub const LARGE_SCENE_AREA: f64 = 60.0;

/// The cumulative ladder: baseline, then bump detection, then obstacle
/// expanding, then the orientation cost term.
pub fn ladder(base: &RunConfig) -> Vec<RunConfig> {
    let steps = [
        ("no", Enhancements::default()),
        (
            "bump_detection",
            Enhancements {
                bump_detector: true,
                ..Enhancements::default()
            },
        ),
        (
            "obstacle_expanding",
            Enhancements {
                bump_detector: true,
                obstacle_expanding: true,
                orientation_coef: false,
            },
        ),
        ("orientation_coef", Enhancements::all()),
    ];
    steps
        .into_iter()
        .map(|(name, enh)| base.clone().with_name(name).with_enhancements(enh))
        .collect()
}

/// One unit of work: configuration index, scene index, seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Job {
    pub config: usize,
    pub scene: usize,
    pub seed: u64,
}

/// Runs every (config, scene, seed) combination. Records come back sorted
/// by config order, scene name and seed regardless of the executor.
pub fn run_jobs(
    scenes: &[Scene],
    configs: &[RunConfig],
    executor: Executor,
) -> Result<Vec<RunRecord>> {
    if scenes.is_empty() {
        return Err(Error::Parameter("no scenes to run".into()));
    }
    for c in configs {
        c.validate()?;
        if c.seeds.is_empty() {
            return Err(Error::Parameter(format!("config {} has no seeds", c.name)));
        }
    }
    let mut order: Vec<usize> = (0..scenes.len()).collect();
    order.sort_by(|&a, &b| scenes[a].name().cmp(scenes[b].name()).then(a.cmp(&b)));
    let mut jobs = Vec::new();
    for (ci, c) in configs.iter().enumerate() {
        let mut seeds = c.seeds.clone();
        seeds.sort_unstable();
        seeds.dedup();
        for &si in &order {
            for &seed in &seeds {
                jobs.push(Job {
                    config: ci,
                    scene: si,
                    seed,
                });
            }
        }
    }
    let results = executor.map(&jobs, |j| run_episode(&scenes[j.scene], &configs[j.config], j.seed));
    results.into_iter().collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ablation {
    pub records: Vec<RunRecord>,
    pub report: AggregateReport,
}

/// Runs the four-step ladder over all scenes and the seeds of `base`.
pub fn run_ablation(scenes: &[Scene], base: &RunConfig, executor: Executor) -> Result<Ablation> {
    let configs = ladder(base);
    let records = run_jobs(scenes, &configs, executor)?;
    let report = aggregate(&configs, &records);
    Ok(Ablation { records, report })
}

/// Means over one group of runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassAggregate {
    pub runs: usize,
    pub failed_runs: usize,
    /// Mean relative coverage per sample (t = 0, then each checkpoint).
    pub mean_rel: Vec<f64>,
    /// Mean absolute coverage per sample, m².
    pub mean_abs_area: Vec<f64>,
    pub mean_tracking_losses: f64,
    pub mean_goal_switches: f64,
    /// Finished scenes per seed, averaged over seeds.
    pub finished_mean: f64,
    /// Finished scene count for each seed.
    pub finished_per_seed: BTreeMap<u64, usize>,
    /// Mean finish time over finished runs, s.
    pub mean_finish_time: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigAggregate {
    pub config: String,
    pub config_hash: String,
    pub sample_times: Vec<f64>,
    pub all: ClassAggregate,
    pub large: ClassAggregate,
    pub small: ClassAggregate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub large_scene_area: f64,
    pub configs: Vec<ConfigAggregate>,
}

impl AggregateReport {
    pub fn config(&self, name: &str) -> Option<&ConfigAggregate> {
        self.configs.iter().find(|c| c.config == name)
    }
}

/// Aggregates records per configuration, in the order of `configs`. The
/// result does not depend on the order of `records`.
pub fn aggregate(configs: &[RunConfig], records: &[RunRecord]) -> AggregateReport {
    let configs = configs
        .iter()
        .map(|c| {
            let hash = config_hash(c);
            let mut mine: Vec<&RunRecord> = records
                .iter()
                .filter(|r| r.config == c.name && r.config_hash == hash)
                .collect();
            mine.sort_by(|a, b| a.scene.cmp(&b.scene).then(a.seed.cmp(&b.seed)));
            let seeds: Vec<u64> = {
                let mut s: Vec<u64> = mine.iter().map(|r| r.seed).collect();
                s.sort_unstable();
                s.dedup();
                s
            };
            let class = |pred: &dyn Fn(&RunRecord) -> bool| {
                let subset: Vec<&RunRecord> = mine.iter().copied().filter(|r| pred(r)).collect();
                class_aggregate(&subset, &seeds)
            };
            let mut sample_times = vec![0.0];
            sample_times.extend(c.checkpoint_times.iter().copied().filter(|&t| t <= c.duration + 1e-9));
            ConfigAggregate {
                config: c.name.clone(),
                config_hash: hash,
                sample_times,
                all: class(&|_| true),
                large: class(&|r| r.scene_area >= LARGE_SCENE_AREA),
                small: class(&|r| r.scene_area < LARGE_SCENE_AREA),
            }
        })
        .collect();
    AggregateReport {
        large_scene_area: LARGE_SCENE_AREA,
        configs,
    }
}

fn mean(xs: impl Iterator<Item = f64>) -> Option<f64> {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| s / n as f64)
}

fn class_aggregate(records: &[&RunRecord], seeds: &[u64]) -> ClassAggregate {
    let ok: Vec<&RunRecord> = records.iter().copied().filter(|r| !r.failed()).collect();
    let n_samples = ok.iter().map(|r| r.samples.len()).min().unwrap_or(0);
    let per_sample = |f: &dyn Fn(&crate::grid_map::CoverageSample) -> f64| -> Vec<f64> {
        (0..n_samples)
            .map(|k| mean(ok.iter().map(|r| f(&r.samples[k]))).unwrap_or(0.0))
            .collect()
    };
    let finished_per_seed: BTreeMap<u64, usize> = seeds
        .iter()
        .map(|&s| (s, ok.iter().filter(|r| r.seed == s && r.finished).count()))
        .collect();
    ClassAggregate {
        runs: records.len(),
        failed_runs: records.len() - ok.len(),
        mean_rel: per_sample(&|s| s.rel),
        mean_abs_area: per_sample(&|s| s.abs_area),
        mean_tracking_losses: mean(ok.iter().map(|r| r.tracking_losses as f64)).unwrap_or(0.0),
        mean_goal_switches: mean(ok.iter().map(|r| r.goal_switches as f64)).unwrap_or(0.0),
        finished_mean: mean(finished_per_seed.values().map(|&c| c as f64)).unwrap_or(0.0),
        finished_per_seed,
        mean_finish_time: mean(ok.iter().filter_map(|r| r.finish_time)),
    }
}

/// Writes one CSV row per record, with one relative and one absolute
/// coverage column per sample time.
pub fn write_records_csv(records: &[RunRecord], path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
    let n_samples = records.iter().map(|r| r.samples.len()).max().unwrap_or(0);
    let times: Vec<f64> = records
        .iter()
        .find(|r| r.samples.len() == n_samples)
        .map(|r| r.samples.iter().map(|s| s.t).collect())
        .unwrap_or_default();
    let mut header: Vec<String> = [
        "config",
        "config_hash",
        "scene",
        "scene_area",
        "seed",
        "finished",
        "finish_time",
        "tracking_losses",
        "goal_switches",
        "bumps",
        "replans",
        "distance",
        "rotation",
        "end_time",
        "end_reason",
        "error",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    for t in &times {
        header.push(format!("rel_{t}"));
    }
    for t in &times {
        header.push(format!("abs_m2_{t}"));
    }
    w.write_record(&header)?;
    for r in records {
        let mut row = vec![
            r.config.clone(),
            r.config_hash.clone(),
            r.scene.clone(),
            format!("{:.4}", r.scene_area),
            r.seed.to_string(),
            r.finished.to_string(),
            r.finish_time.map(|t| format!("{t:.1}")).unwrap_or_default(),
            r.tracking_losses.to_string(),
            r.goal_switches.to_string(),
            r.bumps.to_string(),
            r.replans.to_string(),
            format!("{:.4}", r.distance),
            format!("{:.4}", r.rotation),
            format!("{:.1}", r.end_time),
            serde_json::to_value(r.end_reason)?.as_str().unwrap_or_default().to_string(),
            r.error.clone().unwrap_or_default(),
        ];
        for k in 0..times.len() {
            row.push(r.samples.get(k).map(|s| format!("{:.6}", s.rel)).unwrap_or_default());
        }
        for k in 0..times.len() {
            row.push(r.samples.get(k).map(|s| format!("{:.4}", s.abs_area)).unwrap_or_default());
        }
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn write_report_json(report: &AggregateReport, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(report)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid_map::CoverageSample;

    fn record(config: &RunConfig, scene: &str, area: f64, seed: u64, rel: f64, losses: u32) -> RunRecord {
        let sample = |t: f64, rel: f64| CoverageSample {
            t,
            abs_cells: (rel * 1000.0) as usize,
            abs_area: rel * 10.0,
            rel,
        };
        RunRecord {
            config: config.name.clone(),
            config_hash: config_hash(config),
            scene: scene.into(),
            scene_area: area,
            seed,
            samples: vec![sample(0.0, 0.0), sample(15.0, rel)],
            finished: rel >= 0.95,
            finish_time: (rel >= 0.95).then_some(10.0 * seed as f64 + 5.0),
            tracking_losses: losses,
            goal_switches: 2 * losses,
            bumps: 0,
            replans: 1,
            distance: 1.0,
            rotation: 1.0,
            end_time: 15.0,
            end_reason: super::super::EndReason::Duration,
            error: None,
        }
    }

    fn base() -> RunConfig {
        RunConfig::default().with_duration(15.0)
    }

    #[test]
    fn ladder_is_cumulative() {
        let l = ladder(&base());
        let names: Vec<&str> = l.iter().map(|c| c.name.as_str()).collect();
        assert_eq!(names, ["no", "bump_detection", "obstacle_expanding", "orientation_coef"]);
        assert_eq!(l[0].enhancements, Enhancements::default());
        assert_eq!(l[3].enhancements, Enhancements::all());
        assert!(l[1].enhancements.bump_detector && !l[1].enhancements.obstacle_expanding);
        assert!(l[2].enhancements.obstacle_expanding && !l[2].enhancements.orientation_coef);
    }

    #[test]
    fn singleton_aggregate_is_the_record() {
        let c = base();
        let r = record(&c, "a", 80.0, 3, 0.97, 4);
        let rep = aggregate(std::slice::from_ref(&c), std::slice::from_ref(&r));
        let agg = &rep.configs[0];
        assert_eq!(agg.sample_times, vec![0.0, 15.0]);
        assert_eq!(agg.all.runs, 1);
        assert_eq!(agg.all.mean_rel, vec![0.0, 0.97]);
        assert_eq!(agg.all.mean_tracking_losses, 4.0);
        assert_eq!(agg.all.mean_goal_switches, 8.0);
        assert_eq!(agg.all.finished_mean, 1.0);
        assert_eq!(agg.all.mean_finish_time, Some(35.0));
        assert_eq!(agg.large.runs, 1);
        assert_eq!(agg.small.runs, 0);
        assert_eq!(agg.small.finished_mean, 0.0);
        assert!(agg.small.mean_rel.is_empty());
    }

    #[test]
    fn aggregate_means_and_classes() {
        let c = base();
        let recs = vec![
            record(&c, "a", 30.0, 0, 0.5, 1),
            record(&c, "a", 30.0, 1, 0.96, 3),
            record(&c, "b", 90.0, 0, 0.8, 2),
            record(&c, "b", 90.0, 1, 0.99, 6),
        ];
        let rep = aggregate(std::slice::from_ref(&c), &recs);
        let agg = rep.config(&c.name).unwrap();
        assert!((agg.all.mean_rel[1] - (0.5 + 0.96 + 0.8 + 0.99) / 4.0).abs() < 1e-12);
        assert_eq!(agg.all.mean_tracking_losses, 3.0);
        assert_eq!(agg.all.finished_per_seed, BTreeMap::from([(0, 0), (1, 2)]));
        assert_eq!(agg.all.finished_mean, 1.0);
        assert_eq!(agg.all.mean_finish_time, Some(15.0));
        assert!((agg.large.mean_rel[1] - 0.895).abs() < 1e-12);
        assert!((agg.small.mean_rel[1] - 0.73).abs() < 1e-12);
        let mut failed = record(&c, "c", 30.0, 0, 0.0, 50);
        failed.end_reason = super::super::EndReason::Failed;
        let with_failed = aggregate(std::slice::from_ref(&c), &[recs.clone(), vec![failed]].concat());
        let a = with_failed.config(&c.name).unwrap();
        assert_eq!((a.all.runs, a.all.failed_runs), (5, 1));
        assert_eq!(a.all.mean_tracking_losses, 3.0);
    }

    #[test]
    fn aggregate_ignores_record_order_and_foreign_records() {
        let c = base();
        let other = base().with_name("other");
        let recs: Vec<RunRecord> = (0..12)
            .map(|k| record(&c, &format!("s{}", k % 4), 20.0 * k as f64, k / 4, 0.1 * (k % 9) as f64, k as u32))
            .chain(std::iter::once(record(&other, "s0", 10.0, 0, 0.2, 99)))
            .collect();
        let want = aggregate(std::slice::from_ref(&c), &recs);
        let mut shuffled = recs.clone();
        shuffled.reverse();
        shuffled.rotate_left(5);
        assert_eq!(aggregate(std::slice::from_ref(&c), &shuffled), want);
        assert_eq!(want.configs[0].all.runs, 12);
    }

    #[test]
    fn run_jobs_rejects_empty_inputs() {
        let c = base();
        assert!(run_jobs(&[], std::slice::from_ref(&c), Executor::Sequential).is_err());
        let scene = crate::sim::generate_scene(&crate::sim::SceneGenSpec::rooms(30.0), 0).unwrap();
        let none = RunConfig {
            seeds: vec![],
            ..base()
        };
        assert!(run_jobs(std::slice::from_ref(&scene), &[none], Executor::Sequential).is_err());
    }

    #[test]
    fn outputs_do_not_depend_on_the_executor() {
        let scenes: Vec<Scene> = [30.0, 64.0]
            .iter()
            .enumerate()
            .map(|(k, &a)| crate::sim::generate_scene(&crate::sim::SceneGenSpec::rooms(a), k as u64).unwrap())
            .collect();
        let mut base = RunConfig::default().with_duration(15.0);
        base.seeds = vec![1, 0, 1];
        let seq = run_ablation(&scenes, &base, Executor::Sequential).unwrap();
        let par = run_ablation(&scenes, &base, Executor::Parallel).unwrap();
        assert_eq!(seq, par);
        assert_eq!(seq.records.len(), 4 * 2 * 2);
        let dir = tempfile::tempdir().unwrap();
        let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
        write_records_csv(&seq.records, &a).unwrap();
        write_records_csv(&par.records, &b).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
        let text = std::fs::read_to_string(&a).unwrap();
        let header = text.lines().next().unwrap();
        assert!(header.starts_with("config,config_hash,scene"));
        assert!(header.ends_with("abs_m2_15"));
        assert_eq!(text.lines().count(), 1 + 16);
        write_report_json(&seq.report, &a).unwrap();
        let back: AggregateReport = serde_json::from_str(&std::fs::read_to_string(&a).unwrap()).unwrap();
        assert_eq!(back, seq.report);
    }
}
