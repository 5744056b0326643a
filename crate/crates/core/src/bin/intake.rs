use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use intake_core::bite::{
    pick_bite_events, roll_threshold_baseline, score_windows, ExternalScorer, OracleScorer,
    RollThresholdScorer, ScorerKind, WindowScorer,
};
use intake_core::chew::{
    activity_gate, aggregate_chews, apply_gate, audio_scores, fuse, ppg_scores, AudioInput,
};
use intake_core::config::{MealMethod, RunConfig};
use intake_core::eval::{
    aggregate, interval_eval, metrics, relaxed_bite_eval, strict_bite_eval, Aggregation, Confusion,
    MetricReport,
};
use intake_core::indicators::{
    all_day_indicators, classify_episode, in_meal_indicators, AllDayIndicators, DayRecord,
    EpisodeKind, InMealIndicators, MealRecord,
};
use intake_core::io::{self, OutputBatch, Signals};
use intake_core::meal::{dbscan_1d, fsm_segmentation, localize_meals};
use intake_core::preprocess::preprocess;
use intake_core::signal::{EventSet, IntervalSet, Label, ScoreSeries};
use intake_core::synth::{synth_generate, SynthConfig};

#[derive(Parser, Debug)]
#[command(
    name = "intake",
    version,
    about = "Eating-behavior detection and evaluation"
)]
struct Cli {
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Input files or directories.
    #[arg(long, global = true, num_args = 1..)]
    input: Vec<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Overrides the synthetic generator seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; 0 uses all cores.
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,
    #[arg(long, global = true, value_enum, default_value_t = Scheme::Strict)]
    scheme: Scheme,
    #[arg(long, global = true, value_enum, default_value_t = Agg::Loso)]
    agg: Agg,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Median and high-pass filter inertial recordings.
    Preprocess,
    /// Score windows and pick bite events.
    DetectBites,
    /// Localize meals from detected bites (or raw signals for `fsm`).
    DetectMeals,
    /// Fuse PPG and audio scores into chewing bouts and episodes.
    DetectChews,
    /// Compare detections with ground truth.
    Evaluate {
        #[arg(long, value_enum, default_value_t = Task::Bites)]
        task: Task,
    },
    /// Per-meal and per-day behavioral indicators.
    Indicators,
    /// Generate synthetic recordings with ground truth.
    Synth {
        /// Number of subjects; subject i uses seed + i.
        #[arg(long, default_value_t = 1)]
        subjects: usize,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Scheme {
    Strict,
    Relaxed,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Agg {
    Loso,
    Cumulative,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq)]
enum Task {
    Bites,
    Meals,
    Chews,
}

const SIGNALS: &str = "signals.csv";
const BITES: &str = "bites.jsonl";
const BITE_GT: &str = "bite_gt.jsonl";
const TRUTH: &str = "truth.jsonl";
const SCORES: &str = "scores.csv";
const BITE_SCORES: &str = "bite_scores.csv";
const DETECTED: &str = "detected_bites.jsonl";
const MEALS: &str = "meals.jsonl";
const CHEW_BOUTS: &str = "chew_bouts.jsonl";
const CHEW_EPISODES: &str = "chew_episodes.jsonl";

/// Input files grouped by subject, then by file kind (the name after the
/// subject prefix, e.g. `signals.csv`).
type Inputs = BTreeMap<String, BTreeMap<String, PathBuf>>;

fn collect_inputs(paths: &[PathBuf]) -> Result<Inputs> {
    let mut files = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut entries = std::fs::read_dir(p)
                .with_context(|| format!("reading directory {}", p.display()))?
                .map(|e| e.map(|e| e.path()))
                .collect::<std::io::Result<Vec<_>>>()?;
            entries.retain(|e| e.is_file());
            entries.sort();
            files.extend(entries);
        } else if p.is_file() {
            files.push(p.clone());
        } else {
            bail!("input {} does not exist", p.display());
        }
    }
    let mut out: Inputs = BTreeMap::new();
    for f in files {
        let name = f.file_name().and_then(|n| n.to_str()).unwrap_or_default();
        let Some((subject, kind)) = name.split_once('.') else {
            continue;
        };
        out.entry(subject.to_string())
            .or_default()
            .insert(kind.to_string(), f);
    }
    Ok(out)
}

fn output_dir(cli: &Cli) -> Result<PathBuf> {
    let dir = cli
        .output
        .clone()
        .ok_or_else(|| anyhow!("--output <dir> is required"))?;
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

fn subjects_with<'a>(
    inputs: &'a Inputs,
    kind: &str,
) -> Vec<(&'a String, &'a BTreeMap<String, PathBuf>)> {
    inputs
        .iter()
        .filter(|(_, k)| k.contains_key(kind))
        .collect()
}

fn need<'a>(files: &'a BTreeMap<String, PathBuf>, subject: &str, kind: &str) -> Result<&'a Path> {
    files
        .get(kind)
        .map(PathBuf::as_path)
        .ok_or_else(|| anyhow!("subject {subject}: missing {subject}.{kind}"))
}

fn run_synth(cli: &Cli, cfg: &RunConfig, subjects: usize) -> Result<OutputBatch> {
    let out = output_dir(cli)?;
    let base = SynthConfig {
        seed: cli.seed.unwrap_or(cfg.synth.seed),
        ..cfg.synth.clone()
    };
    let results = (0..subjects)
        .into_par_iter()
        .map(|i| {
            let sc = SynthConfig {
                seed: base.seed.wrapping_add(i as u64),
                subject_id: if subjects == 1 {
                    base.subject_id.clone()
                } else {
                    format!("{}_{:02}", base.subject_id, i + 1)
                },
                ..base.clone()
            };
            synth_generate(&sc).map(|r| (sc.subject_id, r))
        })
        .collect::<intake_core::Result<Vec<_>>>()?;
    let mut batch = OutputBatch::default();
    for (id, (rec, truth)) in results {
        batch.add(
            out.join(format!("{id}.{SIGNALS}")),
            io::format_inertial(&rec),
        );
        batch.add(
            out.join(format!("{id}.{BITES}")),
            io::format_events(&truth.bites),
        );
        batch.add(
            out.join(format!("{id}.{BITE_GT}")),
            io::format_intervals(&truth.bite_intervals),
        );
        batch.add(
            out.join(format!("{id}.{TRUTH}")),
            io::format_intervals(&truth.annotations()),
        );
    }
    Ok(batch)
}

fn run_preprocess(cli: &Cli, cfg: &RunConfig, inputs: &Inputs) -> Result<OutputBatch> {
    let out = output_dir(cli)?;
    let jobs = subjects_with(inputs, SIGNALS);
    if jobs.is_empty() {
        bail!("no *.{SIGNALS} inputs");
    }
    let results = jobs
        .par_iter()
        .map(|(s, files)| -> Result<(PathBuf, String)> {
            let src = need(files, s, SIGNALS)?;
            let rec = io::read_inertial(src)?;
            let clean = preprocess(&rec, &cfg.filter)?;
            let dst = out.join(format!("{s}.{SIGNALS}"));
            Ok((dst, io::format_inertial(&clean)))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut batch = OutputBatch::default();
    for (p, text) in results {
        batch.add(p, text);
    }
    Ok(batch)
}

fn detect_bites_one(
    cfg: &RunConfig,
    subject: &str,
    files: &BTreeMap<String, PathBuf>,
) -> Result<(ScoreSeries, EventSet)> {
    let mut rec = io::read_inertial(need(files, subject, SIGNALS)?)?;
    if cfg.preprocess_before_scoring {
        rec = preprocess(&rec, &cfg.filter)?;
    }
    let scorer: Box<dyn WindowScorer> = match cfg.scorer.kind {
        ScorerKind::ExternalScores => Box::new(ExternalScorer {
            scores: io::read_score_series(need(files, subject, SCORES)?)?,
        }),
        ScorerKind::OracleSynthetic => Box::new(OracleScorer::for_config(
            io::read_events(need(files, subject, BITES)?)?,
            &cfg.scorer,
        )),
        ScorerKind::RollThresholdBaseline => Box::new(RollThresholdScorer {
            cfg: cfg.roll_baseline,
        }),
    };
    let scores = score_windows(&rec, &cfg.scorer, scorer.as_ref())?;
    let events = match cfg.scorer.kind {
        ScorerKind::RollThresholdBaseline => roll_threshold_baseline(&rec, &cfg.roll_baseline)?,
        _ => pick_bite_events(&scores, &cfg.peaks)?,
    };
    Ok((scores, events))
}

fn run_detect_bites(cli: &Cli, cfg: &RunConfig, inputs: &Inputs) -> Result<OutputBatch> {
    let out = output_dir(cli)?;
    let jobs = subjects_with(inputs, SIGNALS);
    if jobs.is_empty() {
        bail!("no *.{SIGNALS} inputs");
    }
    let results = jobs
        .par_iter()
        .map(|(s, files)| detect_bites_one(cfg, s, files).map(|r| (s.to_string(), r)))
        .collect::<Result<Vec<_>>>()?;
    let mut batch = OutputBatch::default();
    for (s, (scores, events)) in results {
        batch.add(
            out.join(format!("{s}.{BITE_SCORES}")),
            io::format_score_series(&scores, "score"),
        );
        batch.add(
            out.join(format!("{s}.{DETECTED}")),
            io::format_events(&events),
        );
    }
    Ok(batch)
}

fn run_detect_meals(cli: &Cli, cfg: &RunConfig, inputs: &Inputs) -> Result<OutputBatch> {
    let out = output_dir(cli)?;
    let kind = if cfg.meal_method == MealMethod::Fsm {
        SIGNALS
    } else {
        DETECTED
    };
    let jobs = subjects_with(inputs, kind);
    if jobs.is_empty() {
        bail!("no *.{kind} inputs");
    }
    let results = jobs
        .par_iter()
        .map(|(s, files)| -> Result<(String, IntervalSet)> {
            let path = need(files, s, kind)?;
            let meals = match cfg.meal_method {
                MealMethod::Density => localize_meals(&io::read_events(path)?, &cfg.meal)?,
                MealMethod::Dbscan => dbscan_1d(&io::read_events(path)?, &cfg.dbscan)?,
                MealMethod::Fsm => fsm_segmentation(&io::read_inertial(path)?, &cfg.fsm)?,
            };
            Ok((s.to_string(), meals.relabeled(Label::Meal)))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut batch = OutputBatch::default();
    for (s, meals) in results {
        batch.add(
            out.join(format!("{s}.{MEALS}")),
            io::format_intervals(&meals),
        );
    }
    Ok(batch)
}

fn run_detect_chews(cli: &Cli, cfg: &RunConfig, inputs: &Inputs) -> Result<OutputBatch> {
    let out = output_dir(cli)?;
    let jobs = subjects_with(inputs, "ppg.csv");
    if jobs.is_empty() {
        bail!("no *.ppg.csv inputs");
    }
    let audio_model = cfg
        .audio_model
        .as_ref()
        .ok_or_else(|| anyhow!("detect-chews needs an [audio_model] section in the config"))?;
    let results = jobs
        .par_iter()
        .map(|(s, files)| -> Result<(String, IntervalSet, IntervalSet)> {
            let ppg = match io::read_signals(need(files, s, "ppg.csv")?)? {
                Signals::Uniform(u) => u,
                _ => bail!("subject {s}: ppg file must have columns t,ppg"),
            };
            let audio = match io::read_signals(need(files, s, "audio.csv")?)? {
                Signals::Uniform(u) => AudioInput::Raw(u),
                Signals::Features(f) => AudioInput::Features(f),
                _ => bail!("subject {s}: audio file must be a raw signal or a feature matrix"),
            };
            let s_ppg = ppg_scores(&ppg, &cfg.fusion, &cfg.ppg_model)?;
            let s_audio = audio_scores(&audio, &cfg.fusion, audio_model)?;
            let mut mask = fuse(&s_ppg, &s_audio, &cfg.fusion)?;
            if let Some(p) = files.get("accel.csv") {
                let accel = io::parse_accel(&io::read_text(p)?, p)?;
                mask = apply_gate(&mask, &activity_gate(&accel, &cfg.gate)?);
            }
            let (bouts, episodes) = aggregate_chews(&mask, &cfg.bout)?;
            Ok((s.to_string(), bouts, episodes))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut batch = OutputBatch::default();
    for (s, bouts, episodes) in results {
        batch.add(
            out.join(format!("{s}.{CHEW_BOUTS}")),
            io::format_intervals(&bouts),
        );
        batch.add(
            out.join(format!("{s}.{CHEW_EPISODES}")),
            io::format_intervals(&episodes),
        );
    }
    Ok(batch)
}

#[derive(Serialize)]
struct SubjectResult {
    subject: String,
    counts: Confusion,
    metrics: MetricReport,
}

/// Whole-recording span from the signals file, else the hull of truth and
/// detections.
fn eval_span(
    files: &BTreeMap<String, PathBuf>,
    gt: &IntervalSet,
    det: &IntervalSet,
) -> Result<(f64, f64)> {
    if let Some(p) = files.get(SIGNALS) {
        let rec = io::read_inertial(p)?;
        return Ok((rec.start_time, rec.end_time()));
    }
    let ivs = gt.iter().chain(det.iter());
    let lo = ivs.clone().map(|i| i.start).fold(f64::INFINITY, f64::min);
    let hi = ivs.map(|i| i.end).fold(f64::NEG_INFINITY, f64::max);
    if lo < hi {
        Ok((lo, hi))
    } else {
        bail!("cannot determine the evaluation span: no signals file and no intervals")
    }
}

fn run_evaluate(cli: &Cli, cfg: &RunConfig, inputs: &Inputs, task: Task) -> Result<OutputBatch> {
    let out = output_dir(cli)?;
    let (det_kind, gt_kind) = match task {
        Task::Bites => (DETECTED, BITE_GT),
        Task::Meals => (MEALS, TRUTH),
        Task::Chews => (CHEW_EPISODES, TRUTH),
    };
    let det: Vec<&String> = inputs
        .iter()
        .filter(|(_, f)| f.contains_key(det_kind))
        .map(|(s, _)| s)
        .collect();
    let gt: Vec<&String> = inputs
        .iter()
        .filter(|(_, f)| f.contains_key(gt_kind))
        .map(|(s, _)| s)
        .collect();
    if det.is_empty() {
        bail!("no *.{det_kind} detection inputs");
    }
    if let Some(s) = det.iter().find(|s| !gt.contains(s)) {
        bail!("subject {s} has detections ({det_kind}) but no ground truth ({gt_kind})");
    }
    if let Some(s) = gt.iter().find(|s| !det.contains(s)) {
        bail!("subject {s} has ground truth ({gt_kind}) but no detections ({det_kind})");
    }
    let per_subject = det
        .par_iter()
        .map(|s| -> Result<SubjectResult> {
            let files = &inputs[*s];
            let gt_path = need(files, s, gt_kind)?;
            let det_path = need(files, s, det_kind)?;
            let counts: Confusion = if task == Task::Bites {
                let gt = io::read_intervals(gt_path)?;
                let ev = io::read_events(det_path)?;
                match cli.scheme {
                    Scheme::Strict => strict_bite_eval(&gt, &ev).into(),
                    Scheme::Relaxed => relaxed_bite_eval(&gt, &ev).into(),
                }
            } else {
                let gt = io::read_intervals(gt_path)?.with_label(Label::Meal);
                let det = io::read_intervals(det_path)?.relabeled(Label::Meal);
                let span = eval_span(files, &gt, &det)?;
                interval_eval(&gt, &det, cfg.grid_step, span)?.into()
            };
            Ok(SubjectResult {
                subject: s.to_string(),
                counts,
                metrics: metrics(counts),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mode = match cli.agg {
        Agg::Loso => Aggregation::LosoMacro,
        Agg::Cumulative => Aggregation::CumulativeMicro,
    };
    let all: Vec<Confusion> = per_subject.iter().map(|r| r.counts).collect();
    let report = aggregate(&all, mode)?;
    let pooled = all.iter().copied().reduce(|a, b| a + b);
    let text = io::format_metrics(&report, pooled.as_ref());
    print!("{text}");
    let mut batch = OutputBatch::default();
    batch.add(out.join("metrics.txt"), text);
    batch.add(
        out.join("per_subject.jsonl"),
        io::format_jsonl(&per_subject)?,
    );
    Ok(batch)
}

#[derive(Serialize)]
#[serde(tag = "record", rename_all = "snake_case")]
enum IndicatorRecord {
    Episode {
        start: f64,
        end: f64,
        kind: EpisodeKind,
        #[serde(flatten)]
        values: InMealIndicators,
    },
    Day {
        date: String,
        #[serde(flatten)]
        values: AllDayIndicators,
    },
}

fn indicators_one(
    cfg: &RunConfig,
    subject: &str,
    files: &BTreeMap<String, PathBuf>,
) -> Result<Vec<IndicatorRecord>> {
    let meals = io::read_intervals(need(files, subject, MEALS)?)?;
    let bites = match files.get(DETECTED) {
        Some(p) => io::read_events(p)?,
        None => EventSet::empty(),
    };
    let bouts = files
        .get(CHEW_BOUTS)
        .map(|p| io::read_intervals(p))
        .transpose()?;
    let ic = &cfg.indicators;
    let mut records = Vec::new();
    let mut days: BTreeMap<_, (Vec<MealRecord>, Vec<MealRecord>)> = BTreeMap::new();
    for iv in &meals {
        let m = MealRecord::from_detections(*iv, &bites, bouts.as_ref());
        let kind = classify_episode(&m, ic);
        records.push(IndicatorRecord::Episode {
            start: iv.start,
            end: iv.end,
            kind,
            values: in_meal_indicators(&m),
        });
        let day = days.entry(ic.local_date(iv.start)).or_default();
        match kind {
            EpisodeKind::Meal => day.0.push(m),
            EpisodeKind::Snack => day.1.push(m),
        }
    }
    let history = days
        .into_iter()
        .map(|(date, (m, s))| DayRecord::new(date, m, s, ic))
        .collect::<intake_core::Result<Vec<_>>>()?;
    for d in &history {
        records.push(IndicatorRecord::Day {
            date: d.date.to_string(),
            values: all_day_indicators(d, ic, &history),
        });
    }
    Ok(records)
}

fn run_indicators(cli: &Cli, cfg: &RunConfig, inputs: &Inputs) -> Result<OutputBatch> {
    let out = output_dir(cli)?;
    let jobs = subjects_with(inputs, MEALS);
    if jobs.is_empty() {
        bail!("no *.{MEALS} inputs");
    }
    let results = jobs
        .par_iter()
        .map(|(s, files)| indicators_one(cfg, s, files).map(|r| (s.to_string(), r)))
        .collect::<Result<Vec<_>>>()?;
    let mut batch = OutputBatch::default();
    for (s, recs) in results {
        batch.add(
            out.join(format!("{s}.indicators.jsonl")),
            io::format_jsonl(&recs)?,
        );
    }
    Ok(batch)
}

fn run(cli: &Cli) -> Result<()> {
    if cli.workers > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.workers)
            .build_global()
            .context("configuring worker pool")?;
    }
    let cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let inputs = collect_inputs(&cli.input)?;
    let batch = match &cli.command {
        Command::Synth { subjects } => run_synth(cli, &cfg, *subjects)?,
        Command::Preprocess => run_preprocess(cli, &cfg, &inputs)?,
        Command::DetectBites => run_detect_bites(cli, &cfg, &inputs)?,
        Command::DetectMeals => run_detect_meals(cli, &cfg, &inputs)?,
        Command::DetectChews => run_detect_chews(cli, &cfg, &inputs)?,
        Command::Evaluate { task } => run_evaluate(cli, &cfg, &inputs, *task)?,
        Command::Indicators => run_indicators(cli, &cfg, &inputs)?,
    };
    let sources: Vec<PathBuf> = inputs
        .values()
        .flat_map(|f| f.values())
        .filter_map(|p| p.canonicalize().ok())
        .collect();
    for p in batch.paths() {
        if let Ok(c) = p.canonicalize() {
            if sources.contains(&c) {
                bail!("refusing to overwrite input {}", p.display());
            }
        }
    }
    batch.commit()?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
