use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use lungcnn::data::{load_samples, scan_dataset, split_holdout, DatasetSplit, Sample};
use lungcnn::metrics::MetricsReport;
use lungcnn::train::{evaluate, fit_with, EpochLog};

use crate::checkpoint::Checkpoint;
use crate::config::{Overrides, RunConfig};
use crate::error::{CliError, Result};
use crate::plot::{self, Metric};
use crate::report::{self, ModelEntry};
use crate::runlog::{read_runlog, LogWriter, RunRecord, TimingRecord};

pub const RUNLOG_FILE: &str = "runlog.jsonl";
pub const TIMINGS_FILE: &str = "timings.jsonl";
pub const BEST_CHECKPOINT: &str = "best.ckpt";
pub const FINAL_CHECKPOINT: &str = "final.ckpt";
pub const CONFIG_FILE: &str = "config.toml";
pub const LOCK_FILE: &str = ".lock";

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SplitName {
    Train,
    Val,
    Test,
}

impl SplitName {
    fn pick<T>(self, split: &DatasetSplit<T>) -> &[T] {
        match self {
            SplitName::Train => &split.train,
            SplitName::Val => &split.validation,
            SplitName::Test => &split.test,
        }
    }

    fn name(self) -> &'static str {
        match self {
            SplitName::Train => "train",
            SplitName::Val => "val",
            SplitName::Test => "test",
        }
    }
}

/// Exclusive ownership of an output directory for the life of the value.
struct RunLock(PathBuf);

impl RunLock {
    fn acquire(dir: &Path) -> Result<Self> {
        let path = dir.join(LOCK_FILE);
        match fs::OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(RunLock(path)),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(CliError::Usage(format!(
                "{} is locked by another run (remove {} if that run is gone)",
                dir.display(),
                path.display()
            ))),
            Err(e) => Err(CliError::io(&path)(e)),
        }
    }
}

impl Drop for RunLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.0);
    }
}

fn check_data_root(cfg: &RunConfig) -> Result<()> {
    if !cfg.data_root.is_dir() {
        return Err(CliError::Data(format!(
            "data root {} does not exist or is not a directory (set data_root in the config or pass --data-dir)",
            cfg.data_root.display()
        )));
    }
    Ok(())
}

/// Scans and splits, then decodes only the requested parts; the others are
/// left empty.
fn load_parts(cfg: &RunConfig, parts: &[SplitName]) -> Result<DatasetSplit<Sample>> {
    check_data_root(cfg)?;
    let scanned = scan_dataset(&cfg.data_root, &cfg.dataset)?;
    let split = split_holdout(scanned, cfg.split, cfg.train.seed)?;
    let load = |name: SplitName| -> Result<Vec<Sample>> {
        if parts.contains(&name) {
            Ok(load_samples(name.pick(&split), &cfg.preprocess)?)
        } else {
            Ok(Vec::new())
        }
    };
    Ok(DatasetSplit {
        train: load(SplitName::Train)?,
        validation: load(SplitName::Val)?,
        test: load(SplitName::Test)?,
        seed: split.seed,
        ratios: split.ratios,
    })
}

fn unix_seconds() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0.0, |d| d.as_secs_f64())
}

pub fn train(config: &Path, overrides: &Overrides) -> Result<()> {
    let mut cfg = RunConfig::load(config)?;
    cfg.apply(overrides);
    cfg.validate()?;
    let split = load_parts(&cfg, &[SplitName::Train, SplitName::Val, SplitName::Test])?;
    for (name, part) in [("train", &split.train), ("validation", &split.validation), ("test", &split.test)] {
        if part.len() < 2 {
            return Err(CliError::Data(format!(
                "{name} split has {} image(s); every split needs at least 2 ({} images found)",
                part.len(),
                split.len()
            )));
        }
    }
    eprintln!(
        "{} images: {} train, {} validation, {} test",
        split.len(),
        split.train.len(),
        split.validation.len(),
        split.test.len()
    );

    let out = cfg.output_dir.clone();
    fs::create_dir_all(&out).map_err(CliError::io(&out))?;
    let _lock = RunLock::acquire(&out)?;
    let run_id = cfg.run_id();
    let fingerprint = cfg.fingerprint();
    fs::write(out.join(CONFIG_FILE), cfg.to_toml()).map_err(CliError::io(out.join(CONFIG_FILE)))?;
    let mut runlog = LogWriter::create(&out.join(RUNLOG_FILE))?;
    let mut timings = LogWriter::create(&out.join(TIMINGS_FILE))?;

    let epochs = cfg.train.epochs;
    let mut write_error = None;
    let mut on_epoch = |log: &EpochLog| {
        eprintln!(
            "epoch {:>3}/{epochs}  loss {:.4}  acc {:.4}  val_loss {:.4}  val_acc {:.4}  ({:.1} s)",
            log.epoch, log.train.loss, log.train.accuracy, log.validation.loss, log.validation.accuracy, log.wall_time_s
        );
        let timing = TimingRecord {
            run_id: run_id.clone(),
            epoch: log.epoch,
            finished_at: unix_seconds(),
            wall_time_s: log.wall_time_s,
        };
        let mut result = timings.write(&timing);
        if log.epoch < epochs && result.is_ok() {
            result = runlog.write(&RunRecord::new(&run_id, &cfg.model_name, log, cfg.metrics));
        }
        if let Err(e) = result {
            write_error.get_or_insert(e);
        }
    };
    let outcome = fit_with(&cfg.model, &split, &cfg.train, cfg.metrics, &mut on_epoch)?;
    if let Some(e) = write_error {
        return Err(e);
    }

    let test = evaluate(&outcome.params, &split.test, cfg.metrics)?;
    let mut last = outcome.logs.last().expect("at least one epoch").clone();
    last.test = Some(test.summary);
    runlog.write(&RunRecord::new(&run_id, &cfg.model_name, &last, cfg.metrics))?;

    Checkpoint::from_params(&outcome.best, fingerprint).save(&out.join(BEST_CHECKPOINT))?;
    Checkpoint::from_params(&outcome.params, fingerprint).save(&out.join(FINAL_CHECKPOINT))?;
    eprintln!(
        "best validation accuracy at epoch {}; final test accuracy {:.4}, AUC {:.4}, recall {:.4}, loss {:.4}",
        outcome.best_epoch, test.summary.accuracy, test.summary.auc, test.summary.recall, test.summary.loss
    );
    println!("{}", out.display());
    Ok(())
}

pub fn format_report(report: &MetricsReport) -> String {
    let s = &report.summary;
    let mut out = String::new();
    let macro_auc = s.auc_macro.map_or("undefined".to_string(), |a| format!("{a:.4}"));
    out.push_str(&format!("samples        {}\n", report.samples));
    out.push_str(&format!("accuracy       {:.4}\n", s.accuracy));
    out.push_str(&format!(
        "auc            {:.4}  (micro {:.4}, macro {macro_auc})\n",
        s.auc, s.auc_micro
    ));
    out.push_str(&format!(
        "recall         {:.4}  (threshold {}; macro argmax {:.4})\n",
        s.recall, report.conventions.recall_threshold, s.recall_macro
    ));
    out.push_str(&format!("loss           {:.4}\n", s.loss));
    out.push_str("per class      support  recall  auc\n");
    for c in &report.per_class {
        let f = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.4}"));
        out.push_str(&format!("  {:<24} {:>5}  {:>6}  {:>6}\n", c.name, c.support, f(c.recall), f(c.auc)));
    }
    out.push_str("confusion (rows true, columns predicted)\n");
    for row in &report.confusion {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:>5}")).collect();
        out.push_str(&format!("  {}\n", cells.join(" ")));
    }
    out
}

/// Path of the JSON report written next to the checkpoint.
pub fn evaluation_path(checkpoint: &Path, split: SplitName) -> PathBuf {
    let stem = checkpoint.file_stem().map_or("checkpoint".into(), |s| s.to_string_lossy());
    checkpoint.with_file_name(format!("{stem}.{}.json", split.name()))
}

pub fn evaluate_checkpoint(checkpoint: &Path, config: &Path, split: SplitName) -> Result<MetricsReport> {
    let cfg = RunConfig::load(config)?;
    let ck = Checkpoint::load(checkpoint)?;
    if ck.fingerprint != cfg.fingerprint() {
        eprintln!(
            "warning: checkpoint fingerprint {} does not match config fingerprint {}; evaluating anyway",
            hex::encode(ck.fingerprint),
            hex::encode(cfg.fingerprint())
        );
    }
    let params = ck.into_params(&cfg.model)?;
    let parts = load_parts(&cfg, &[split])?;
    let samples = split.pick(&parts);
    if samples.is_empty() {
        return Err(CliError::Data(format!("{} split is empty", split.name())));
    }
    Ok(evaluate(&params, samples, cfg.metrics)?)
}

pub fn evaluate_cmd(checkpoint: &Path, config: &Path, split: SplitName) -> Result<()> {
    let report = evaluate_checkpoint(checkpoint, config, split)?;
    print!("{}", format_report(&report));
    let path = evaluation_path(checkpoint, split);
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    fs::write(&path, json + "\n").map_err(CliError::io(&path))?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

pub fn report_entries(runlogs: &[PathBuf], external: Option<&Path>) -> Result<Vec<ModelEntry>> {
    let mut entries = Vec::new();
    for path in runlogs {
        entries.push(ModelEntry::from_runlog(&read_runlog(path)?)?);
    }
    if let Some(path) = external {
        let text = fs::read_to_string(path).map_err(CliError::io(path))?;
        entries.extend(report::parse_extern(&text, &path.display().to_string())?);
    }
    report::disambiguate(&mut entries);
    Ok(entries)
}

pub fn report_cmd(runlogs: &[PathBuf], external: Option<&Path>, csv: Option<&Path>) -> Result<()> {
    let entries = report_entries(runlogs, external)?;
    print!("{}", report::render_text(&entries));
    if let Some(path) = csv {
        fs::write(path, report::render_csv(&entries)).map_err(CliError::io(path))?;
    }
    Ok(())
}

pub fn plot_cmd(runlog: &Path, metric: Metric, out: &Path) -> Result<()> {
    let records = read_runlog(runlog)?;
    fs::write(out, plot::render(&records, metric)).map_err(CliError::io(out))
}
