//! Grid sweeps over hyperparameters.
//!
//! Every combination of the grid values becomes one run seeded with the
//! base seed plus its index. Runs are independent and spread over worker
//! threads; results are ranked by mean eval episode reward.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::run::train_to_dir;
use super::{open_envs, RunConfig, TrainError};
use crate::env::BaselineCache;

/// Parameter name to candidate values, in key order.
pub type Grid = BTreeMap<String, Vec<toml::Value>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub rank: usize,
    pub index: usize,
    pub seed: u64,
    pub overrides: BTreeMap<String, String>,
    pub eval_mean_episode_reward: f64,
    pub frac_within_10: f64,
    pub dir: PathBuf,
}

/// Expands the grid into one config per combination, validating every
/// override before anything runs.
pub fn expand(base: &RunConfig, grid: &Grid) -> Result<Vec<(RunConfig, BTreeMap<String, String>)>, TrainError> {
    for (key, values) in grid {
        if values.is_empty() {
            return Err(TrainError::Config(format!("grid key `{key}` has no values")));
        }
    }
    let mut combos: Vec<Vec<(&String, &toml::Value)>> = vec![Vec::new()];
    for (key, values) in grid {
        combos = combos
            .into_iter()
            .flat_map(|c| {
                values.iter().map(move |v| {
                    let mut c = c.clone();
                    c.push((key, v));
                    c
                })
            })
            .collect();
    }
    combos
        .into_iter()
        .enumerate()
        .map(|(i, combo)| {
            let mut cfg = base.clone();
            let mut shown = BTreeMap::new();
            for (key, value) in combo {
                cfg.set(key, value)?;
                shown.insert(key.clone(), value.to_string());
            }
            cfg.run.seed = base.run.seed + i as u64;
            Ok((cfg, shown))
        })
        .collect()
}

/// Runs every grid point into `out/run-<index>` using up to `workers`
/// threads and returns the rows ranked best first.
pub fn sweep(base: &RunConfig, grid: &Grid, out: &Path, workers: usize) -> Result<Vec<SweepRow>, TrainError> {
    let runs = expand(base, grid)?;
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Result<SweepRow, TrainError>>> = Mutex::new(Vec::new());
    let cache = BaselineCache::new(base.run.baseline_cache_dir.clone());
    std::thread::scope(|s| {
        for _ in 0..workers.clamp(1, runs.len().max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some((cfg, overrides)) = runs.get(i) else { break };
                let dir = out.join(format!("run-{i:03}"));
                let result = open_envs(cfg, &cache)
                    .and_then(|mut envs| train_to_dir(cfg, &mut envs, &dir))
                    .map(|o| SweepRow {
                        rank: 0,
                        index: i,
                        seed: cfg.run.seed,
                        overrides: overrides.clone(),
                        eval_mean_episode_reward: o.metrics.mean_episode_reward,
                        frac_within_10: o.metrics.errors.frac_within_10,
                        dir,
                    });
                results.lock().expect("sweep results poisoned").push(result);
            });
        }
    });
    let mut rows = results
        .into_inner()
        .expect("sweep results poisoned")
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;
    rows.sort_by(|a, b| {
        b.eval_mean_episode_reward
            .total_cmp(&a.eval_mean_episode_reward)
            .then(a.index.cmp(&b.index))
    });
    for (rank, row) in rows.iter_mut().enumerate() {
        row.rank = rank + 1;
    }
    write_table(&out.join("sweep.csv"), &rows)?;
    Ok(rows)
}

fn write_table(path: &Path, rows: &[SweepRow]) -> Result<(), TrainError> {
    let mut text = String::from("rank,index,seed,overrides,eval_mean_episode_reward,frac_within_10,dir\n");
    for r in rows {
        let overrides: Vec<String> = r.overrides.iter().map(|(k, v)| format!("{k}={v}")).collect();
        text.push_str(&format!(
            "{},{},{},\"{}\",{},{},{}\n",
            r.rank,
            r.index,
            r.seed,
            overrides.join(";").replace('"', "\"\""),
            super::records::fmt_f64(r.eval_mean_episode_reward),
            super::records::fmt_f64(r.frac_within_10),
            r.dir.display()
        ));
    }
    std::fs::write(path, text).map_err(|e| TrainError::io(path, e))
}

/// Parses `key=v1,v2,...` grid entries.
pub fn parse_grid_entry(entry: &str) -> Result<(String, Vec<toml::Value>), TrainError> {
    let (key, values) = entry
        .split_once('=')
        .ok_or_else(|| TrainError::Config(format!("grid entry `{entry}` is not key=v1,v2")))?;
    let values = values
        .split(',')
        .map(|v| parse_value(v.trim()))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((key.trim().to_string(), values))
}

/// Reads a scalar as TOML, falling back to a bare string. Dates stay
/// strings, which is how the config spells them.
pub fn parse_value(text: &str) -> Result<toml::Value, TrainError> {
    if text.is_empty() {
        return Err(TrainError::Config("empty value".into()));
    }
    let doc: Result<toml::Table, _> = format!("v = {text}").parse();
    Ok(match doc {
        Ok(mut t) => match t.remove("v").expect("key present") {
            toml::Value::Datetime(d) => toml::Value::String(d.to_string()),
            v => v,
        },
        Err(_) => toml::Value::String(text.to_string()),
    })
}
