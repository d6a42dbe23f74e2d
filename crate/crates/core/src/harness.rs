//! Rank sweeps over repeated training runs and their statistical summary.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::mix_seed;
use crate::stats::{summarize, welch_one_tailed, SampleStats, WelchReport};
use crate::train::{train, RunRecord, TrainConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub ranks: Vec<usize>,
    pub reps: usize,
    /// Template for every run; `r` and `seed` are overwritten per run and
    /// `seed` acts as the base seed.
    pub base: TrainConfig,
    /// Worker threads; `None` uses all cores.
    pub threads: Option<usize>,
    /// Also compare the top rank against every other rank.
    pub all_vs_top: bool,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            ranks: vec![19, 20, 21, 22, 23],
            reps: 7,
            base: TrainConfig::default(),
            threads: None,
            all_vs_top: false,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.reps < 2 {
            return Err(Error::InvalidConfig(format!("reps must be at least 2, got {}", self.reps)));
        }
        if self.ranks.is_empty() {
            return Err(Error::InvalidConfig("rank list is empty".into()));
        }
        let mut sorted = self.ranks.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.ranks.len() {
            return Err(Error::InvalidConfig("ranks must be distinct".into()));
        }
        if self.threads == Some(0) {
            return Err(Error::InvalidConfig("threads must be positive".into()));
        }
        for &r in &self.ranks {
            self.run_config(r, 0).validate()?;
        }
        Ok(())
    }

    /// `mix_seed([base_seed, rank, rep])`.
    pub fn run_seed(&self, rank: usize, rep: usize) -> u64 {
        mix_seed(&[self.base.seed, rank as u64, rep as u64])
    }

    pub fn run_config(&self, rank: usize, rep: usize) -> TrainConfig {
        TrainConfig {
            r: rank,
            seed: self.run_seed(rank, rep),
            ..self.base.clone()
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepRun {
    pub rank: usize,
    pub rep: usize,
    pub record: RunRecord,
}

/// Trains every (rank, rep) pair, in parallel, returning runs sorted by
/// (rank, rep).
pub fn sweep(cfg: &SweepConfig) -> Result<Vec<SweepRun>> {
    cfg.validate()?;
    let jobs: Vec<(usize, usize)> = cfg
        .ranks
        .iter()
        .flat_map(|&r| (0..cfg.reps).map(move |rep| (r, rep)))
        .collect();
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = cfg.threads {
        builder = builder.num_threads(t);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    let mut runs = pool.install(|| {
        jobs.par_iter()
            .map(|&(rank, rep)| {
                train(&cfg.run_config(rank, rep)).map(|record| SweepRun { rank, rep, record })
            })
            .collect::<Result<Vec<_>>>()
    })?;
    runs.sort_by_key(|r| (r.rank, r.rep));
    Ok(runs)
}

/// Final validation losses grouped by rank, in rep order.
pub fn final_losses(runs: &[SweepRun]) -> BTreeMap<usize, Vec<f64>> {
    let mut sorted: Vec<&SweepRun> = runs.iter().collect();
    sorted.sort_by_key(|r| (r.rank, r.rep));
    let mut out: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for r in sorted {
        out.entry(r.rank).or_default().push(r.record.final_val());
    }
    out
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Comparison {
    pub label: String,
    /// Group 1: expected to reach the lower loss.
    pub rank1: usize,
    pub rank2: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<WelchReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WelchSummary {
    pub note: String,
    pub per_rank: BTreeMap<usize, SampleStats>,
    pub comparisons: Vec<Comparison>,
}

pub const DF_NOTE: &str = "df is the unrounded Welch-Satterthwaite value and p is evaluated at that df; \
figures computed with a rounded or differently approximated df will not match exactly";

/// Welch tests for each adjacent rank pair (higher rank as group 1), plus
/// top-vs-rest when `all_vs_top` is set.
pub fn compare_ranks(runs: &[SweepRun], all_vs_top: bool) -> Result<WelchSummary> {
    let losses = final_losses(runs);
    let mut per_rank = BTreeMap::new();
    for (&rank, v) in &losses {
        per_rank.insert(rank, summarize(v)?);
    }
    let ranks: Vec<usize> = losses.keys().rev().copied().collect();
    let mut pairs: Vec<(usize, usize)> = ranks.windows(2).map(|w| (w[0], w[1])).collect();
    if all_vs_top {
        for &other in ranks.iter().skip(2) {
            pairs.push((ranks[0], other));
        }
    }
    let comparisons = pairs
        .into_iter()
        .map(|(r1, r2)| {
            let res = welch_one_tailed(&per_rank[&r1], &per_rank[&r2]);
            Comparison {
                label: format!("{r1}v{r2}"),
                rank1: r1,
                rank2: r2,
                error: res.as_ref().err().map(|e| e.to_string()),
                report: res.ok(),
            }
        })
        .collect();
    Ok(WelchSummary {
        note: DF_NOTE.into(),
        per_rank,
        comparisons,
    })
}

#[derive(Serialize)]
struct CurveRow {
    epoch: usize,
    rank: usize,
    split: &'static str,
    mean: f64,
    std: f64,
}

#[derive(Serialize)]
struct HistRow {
    rank: usize,
    rep: usize,
    seed: u64,
    final_val_loss: f64,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    match summarize(values) {
        Ok(s) => (s.mean, s.std),
        Err(_) => (values.first().copied().unwrap_or(f64::NAN), 0.0),
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Writes `runs/r{rank}_rep{rep}.json`, `curves.csv`, `hist.csv` and
/// `welch.json` under `dir`, returning the paths written.
pub fn export(runs: &[SweepRun], dir: &Path, all_vs_top: bool) -> Result<Vec<PathBuf>> {
    if runs.is_empty() {
        return Err(Error::InvalidConfig("no runs to export".into()));
    }
    let mut sorted: Vec<&SweepRun> = runs.iter().collect();
    sorted.sort_by_key(|r| (r.rank, r.rep));
    let mut written = Vec::new();

    let run_dir = dir.join("runs");
    fs::create_dir_all(&run_dir)?;
    for r in &sorted {
        let p = run_dir.join(format!("r{}_rep{}.json", r.rank, r.rep));
        write_json(&p, &r.record)?;
        written.push(p);
    }

    let mut by_rank: BTreeMap<usize, Vec<&RunRecord>> = BTreeMap::new();
    for r in &sorted {
        by_rank.entry(r.rank).or_default().push(&r.record);
    }
    let curves = dir.join("curves.csv");
    let mut w = csv::Writer::from_path(&curves)?;
    for (&rank, recs) in &by_rank {
        let epochs = recs.iter().map(|r| r.val_loss.len()).min().unwrap_or(0);
        for split in ["train", "val"] {
            for epoch in 0..epochs {
                let vals: Vec<f64> = recs
                    .iter()
                    .map(|r| if split == "train" { r.train_loss[epoch] } else { r.val_loss[epoch] })
                    .collect();
                let (mean, std) = mean_std(&vals);
                w.serialize(CurveRow { epoch: epoch + 1, rank, split, mean, std })?;
            }
        }
    }
    w.flush()?;
    written.push(curves);

    let hist = dir.join("hist.csv");
    let mut w = csv::Writer::from_path(&hist)?;
    for r in &sorted {
        w.serialize(HistRow {
            rank: r.rank,
            rep: r.rep,
            seed: r.record.config.seed,
            final_val_loss: r.record.final_val(),
        })?;
    }
    w.flush()?;
    written.push(hist);

    let welch = dir.join("welch.json");
    let owned: Vec<SweepRun> = sorted.into_iter().cloned().collect();
    write_json(&welch, &compare_ranks(&owned, all_vs_top)?)?;
    written.push(welch);
    Ok(written)
}
