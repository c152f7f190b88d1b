//! Pipeline steps behind each subcommand. Every step writes only inside
//! `config.out` and computes everything before writing, so a failed input
//! leaves no partial outputs.

use std::borrow::Cow;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use anyhow::{bail, ensure, Context, Result};
use dqlids::agent::{predict, Trainer, TrainingHistory};
use dqlids::data::{
    encode, fit_stats, read_records, read_snapshot, write_snapshot, ClassLabel, EncodeOptions,
    EncodedDataset, Taxonomy,
};
use dqlids::eval::{build_confusion, compute_metrics, MetricsReport};
use dqlids::nn::{Checkpoint, QNetwork};
use log::{info, warn};
use serde_json::json;

use crate::config::RunConfig;

pub const TRAIN_SNAPSHOT: &str = "train.enc";
pub const TEST_SNAPSHOT: &str = "test.enc";
pub const STATS_FILE: &str = "stats.json";
pub const CHECKPOINT_FILE: &str = "model.ckpt";
pub const LOSS_CSV: &str = "history_loss.csv";
pub const REWARD_CSV: &str = "history_rewards.csv";
pub const TIMING_CSV: &str = "timing.csv";
pub const METRICS_FILE: &str = "metrics.json";
pub const CONFUSION_CSV: &str = "confusion.csv";
pub const SWEEP_DIR: &str = "sweep";
pub const SWEEP_SUMMARY: &str = "sweep_summary.csv";

/// Encoded splits; `test` is absent when no test file was configured.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub train: EncodedDataset,
    pub test: Option<EncodedDataset>,
}

fn create_file(path: &Path) -> Result<BufWriter<File>> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(file))
}

fn write_with<F>(path: &Path, body: F) -> Result<()>
where
    F: FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
{
    let mut w = create_file(path)?;
    body(&mut w)
        .and_then(|_| w.flush())
        .with_context(|| format!("writing {}", path.display()))
}

fn taxonomy(cfg: &RunConfig) -> Result<Cow<'static, Taxonomy>> {
    match &cfg.taxonomy {
        Some(path) => Ok(Cow::Owned(
            Taxonomy::from_file(path)
                .with_context(|| format!("loading taxonomy {}", path.display()))?,
        )),
        None => Ok(Cow::Borrowed(Taxonomy::bundled())),
    }
}

/// Reads and encodes the raw files without touching the output directory.
pub fn encode_inputs(cfg: &RunConfig) -> Result<Prepared> {
    let Some(train_path) = &cfg.train_file else {
        bail!("no training file configured (use --train-file)");
    };
    let taxonomy = taxonomy(cfg)?;
    let opts = EncodeOptions {
        mode: cfg.encoding,
        unknown_category: cfg.unknown_category,
    };
    let train_raw =
        read_records(train_path).with_context(|| format!("reading {}", train_path.display()))?;
    let stats =
        fit_stats(&train_raw).with_context(|| format!("fitting {}", train_path.display()))?;
    let train = encode(&train_raw, &stats, &taxonomy, &opts)
        .with_context(|| format!("encoding {}", train_path.display()))?;
    drop(train_raw);
    let test = match &cfg.test_file {
        Some(path) => {
            let raw = read_records(path).with_context(|| format!("reading {}", path.display()))?;
            Some(
                encode(&raw, &stats, &taxonomy, &opts)
                    .with_context(|| format!("encoding {}", path.display()))?,
            )
        }
        None => None,
    };
    Ok(Prepared { train, test })
}

fn tallies_json(ds: &EncodedDataset) -> serde_json::Value {
    let tallies = ds.class_tallies();
    let map: serde_json::Map<String, serde_json::Value> = ClassLabel::ALL
        .iter()
        .map(|c| (c.name().to_string(), json!(tallies[c.code()])))
        .collect();
    serde_json::Value::Object(map)
}

pub fn print_tallies(name: &str, ds: &EncodedDataset) {
    let tallies = ds.class_tallies();
    println!("{name}: {} records x {} features", ds.len(), ds.width());
    for c in ClassLabel::ALL {
        println!("  {:<7}{:>9}", c.name(), tallies[c.code()]);
    }
}

/// Encodes the raw files and writes snapshots, `stats.json`, and the config echo.
pub fn preprocess(cfg: &RunConfig) -> Result<Prepared> {
    let prepared = encode_inputs(cfg)?;
    cfg.write_echo()?;
    write_with(&cfg.out.join(TRAIN_SNAPSHOT), |w| {
        write_snapshot(&prepared.train, w).map_err(std::io::Error::other)
    })?;
    if let Some(test) = &prepared.test {
        write_with(&cfg.out.join(TEST_SNAPSHOT), |w| {
            write_snapshot(test, w).map_err(std::io::Error::other)
        })?;
    }
    let mut tallies = serde_json::Map::new();
    tallies.insert("train".into(), tallies_json(&prepared.train));
    if let Some(test) = &prepared.test {
        tallies.insert("test".into(), tallies_json(test));
    }
    let doc = json!({
        "encoding": cfg.encoding,
        "width": prepared.train.width(),
        "stats": prepared.train.stats(),
        "tallies": tallies,
    });
    write_with(&cfg.out.join(STATS_FILE), |w| {
        serde_json::to_writer_pretty(&mut *w, &doc)?;
        writeln!(w)
    })?;
    Ok(prepared)
}

fn load_snapshot(path: &Path) -> Result<EncodedDataset> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    read_snapshot(&mut BufReader::new(file)).with_context(|| format!("reading {}", path.display()))
}

/// Raw files win when configured (they are re-encoded); otherwise the
/// snapshots already in the output directory are used.
pub fn load_or_prepare(cfg: &RunConfig) -> Result<Prepared> {
    if cfg.train_file.is_some() {
        return preprocess(cfg);
    }
    let train = load_snapshot(&cfg.out.join(TRAIN_SNAPSHOT))
        .context("no --train-file given and no encoded training snapshot found")?;
    let test_path = cfg.out.join(TEST_SNAPSHOT);
    let test = match test_path.exists() {
        true => Some(load_snapshot(&test_path)?),
        false => None,
    };
    Ok(Prepared { train, test })
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    pub history: TrainingHistory,
}

fn write_training_outputs(
    out: &Path,
    checkpoint: &Checkpoint,
    history: &TrainingHistory,
) -> Result<()> {
    let ckpt_path = out.join(CHECKPOINT_FILE);
    checkpoint
        .save(&ckpt_path)
        .with_context(|| format!("writing {}", ckpt_path.display()))?;
    write_with(&out.join(LOSS_CSV), |w| history.write_loss_csv(w))?;
    write_with(&out.join(REWARD_CSV), |w| history.write_reward_csv(w))?;
    write_with(&out.join(TIMING_CSV), |w| history.write_timing_csv(w))
}

/// Trains on `data` and writes the checkpoint and histories. On divergence
/// the last good checkpoint and the partial history are still written.
pub fn train_on(cfg: &RunConfig, data: &EncodedDataset) -> Result<TrainOutcome> {
    let shuffled;
    let data = if cfg.shuffle {
        shuffled = data.shuffled(cfg.hp.seed);
        &shuffled
    } else {
        data
    };
    let mut trainer = Trainer::new(cfg.hp.clone(), data.width())?;
    cfg.write_echo()?;
    let mut failure = None;
    for _ in 0..cfg.hp.num_episodes {
        let mut loss_sum = 0.0;
        let mut iterations = 0usize;
        let result = trainer.run_episode_with(data, &mut |rec| {
            loss_sum += rec.loss;
            iterations += 1;
        });
        if let Err(e) = result {
            failure = Some(e);
            break;
        }
        let ep = trainer.history().episodes.last().expect("episode logged");
        info!(
            "episode {:>4}: reward {:>8} mean loss {:.6} epsilon {:.4} ({:.2}s)",
            ep.episode,
            ep.cumulative_reward,
            loss_sum / iterations as f64,
            cfg.hp.epsilon_at(trainer.step()),
            ep.wall_clock_seconds
        );
    }
    let checkpoint = trainer.checkpoint();
    let history = trainer.history().clone();
    write_training_outputs(&cfg.out, &checkpoint, &history)?;
    if let Some(e) = failure {
        return Err(e).context("training stopped; the last good checkpoint was kept");
    }
    info!(
        "trained {} episodes in {:.2}s",
        history.episodes.len(),
        history.total_wall_clock_seconds()
    );
    Ok(TrainOutcome {
        checkpoint,
        history,
    })
}

pub fn train(cfg: &RunConfig) -> Result<TrainOutcome> {
    let prepared = load_or_prepare(cfg)?;
    train_on(cfg, &prepared.train)
}

/// Scores `net` on `data` and writes `metrics.json` and `confusion.csv`.
pub fn evaluate_network(
    cfg: &RunConfig,
    net: &QNetwork,
    data: &EncodedDataset,
) -> Result<MetricsReport> {
    ensure!(
        net.input_width() == data.width(),
        "the checkpoint expects {} input features but the dataset has {} (was it encoded with a different --encoding?)",
        net.input_width(),
        data.width()
    );
    ensure!(
        net.output_width() == ClassLabel::COUNT,
        "the checkpoint has {} outputs; expected {}",
        net.output_width(),
        ClassLabel::COUNT
    );
    let preds = predict(net, data.features())?;
    let report = compute_metrics(&build_confusion(&preds, data.labels())?)?;
    cfg.write_echo()?;
    write_with(&cfg.out.join(METRICS_FILE), |w| {
        serde_json::to_writer_pretty(&mut *w, &report)?;
        writeln!(w)
    })?;
    write_with(&cfg.out.join(CONFUSION_CSV), |w| {
        report.confusion.write_csv(w)
    })?;
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

/// Loads a checkpoint (default `out/model.ckpt`) and scores it on a split.
pub fn evaluate(cfg: &RunConfig, checkpoint: Option<&Path>, split: Split) -> Result<MetricsReport> {
    let default_path = cfg.out.join(CHECKPOINT_FILE);
    let path = checkpoint.unwrap_or(&default_path);
    let ckpt = Checkpoint::load(path).with_context(|| format!("loading {}", path.display()))?;
    let prepared = load_or_prepare(cfg)?;
    let data = match split {
        Split::Train => &prepared.train,
        Split::Test => prepared
            .test
            .as_ref()
            .context("no test data (use --test-file or run preprocess with one)")?,
    };
    evaluate_network(cfg, &ckpt.network, data)
}

pub fn print_metrics(report: &MetricsReport) {
    println!(
        "{:<8}{:>10}{:>10}{:>10}{:>10}{:>9}",
        "class", "precision", "recall", "f1", "accuracy", "support"
    );
    for m in &report.per_class {
        let note = if m.low_support { "  (low support)" } else { "" };
        println!(
            "{:<8}{:>10.4}{:>10.4}{:>10.4}{:>10.4}{:>9}{note}",
            m.class, m.precision, m.recall, m.f1, m.accuracy, m.support
        );
    }
    let a = &report.macro_avg;
    println!(
        "{:<8}{:>10.4}{:>10.4}{:>10.4}{:>10.4}{:>9}",
        "macro", a.precision, a.recall, a.f1, a.accuracy, report.total
    );
    println!("overall accuracy {:.4}", report.overall_accuracy);
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub gamma: f64,
    pub episodes: usize,
    pub accuracy: Option<f64>,
    pub macro_f1: Option<f64>,
    pub wall_clock_seconds: f64,
    /// `ok`, or the error that ended the run.
    pub status: String,
}

impl SweepRow {
    pub fn succeeded(&self) -> bool {
        self.status == "ok"
    }
}

pub fn sweep_run_dir(out: &Path, gamma: f64, episodes: usize) -> PathBuf {
    out.join(SWEEP_DIR)
        .join(format!("gamma-{gamma}_episodes-{episodes}"))
}

fn sweep_one(base: &RunConfig, prepared: &Prepared, gamma: f64, episodes: usize) -> SweepRow {
    let started = Instant::now();
    let mut cfg = base.clone();
    cfg.hp.gamma = gamma;
    cfg.hp.num_episodes = episodes;
    cfg.out = sweep_run_dir(&base.out, gamma, episodes);
    let result = (|| -> Result<MetricsReport> {
        cfg.hp.validate()?;
        let test = prepared.test.as_ref().context("sweep needs test data")?;
        let outcome = train_on(&cfg, &prepared.train)?;
        evaluate_network(&cfg, &outcome.checkpoint.network, test)
    })();
    let wall_clock_seconds = started.elapsed().as_secs_f64();
    match result {
        Ok(report) => SweepRow {
            gamma,
            episodes,
            accuracy: Some(report.overall_accuracy),
            macro_f1: Some(report.macro_avg.f1),
            wall_clock_seconds,
            status: "ok".into(),
        },
        Err(e) => {
            warn!("sweep run gamma={gamma} episodes={episodes} failed: {e:#}");
            SweepRow {
                gamma,
                episodes,
                accuracy: None,
                macro_f1: None,
                wall_clock_seconds,
                status: format!("failed: {e:#}").replace([',', '\n'], ";"),
            }
        }
    }
}

pub fn write_sweep_summary<W: Write>(rows: &[SweepRow], w: &mut W) -> std::io::Result<()> {
    let opt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
    writeln!(
        w,
        "gamma,episodes,accuracy,macro_f1,wall_clock_seconds,status"
    )?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{:.3},{}",
            r.gamma,
            r.episodes,
            opt(r.accuracy),
            opt(r.macro_f1),
            r.wall_clock_seconds,
            r.status
        )?;
    }
    Ok(())
}

/// Trains and evaluates every (gamma, episodes) pair, `jobs` at a time.
/// Rows come back in input order; failed runs are recorded, not fatal.
pub fn sweep(
    cfg: &RunConfig,
    gammas: &[f64],
    episodes: &[usize],
    jobs: usize,
) -> Result<Vec<SweepRow>> {
    ensure!(!gammas.is_empty(), "no gammas given");
    ensure!(!episodes.is_empty(), "no episode counts given");
    let prepared = load_or_prepare(cfg)?;
    ensure!(
        prepared.test.is_some(),
        "sweep needs test data (use --test-file)"
    );
    cfg.write_echo()?;
    let combos: Vec<(f64, usize)> = gammas
        .iter()
        .flat_map(|&g| episodes.iter().map(move |&e| (g, e)))
        .collect();
    let slots: Vec<Mutex<Option<SweepRow>>> = combos.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..jobs.clamp(1, combos.len()) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(&(g, e)) = combos.get(i) else { break };
                let row = sweep_one(cfg, &prepared, g, e);
                *slots[i].lock().unwrap() = Some(row);
            });
        }
    });
    let rows: Vec<SweepRow> = slots
        .into_iter()
        .map(|s| s.into_inner().unwrap().expect("every combination ran"))
        .collect();
    write_with(&cfg.out.join(SWEEP_SUMMARY), |w| {
        write_sweep_summary(&rows, w)
    })?;
    Ok(rows)
}
