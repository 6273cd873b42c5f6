//! Result files: one CSV row per run and a JSON summary per experiment.

use std::fs::File;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::experiment::{ExperimentConfig, ExperimentResult, RunRecord};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub mean: f64,
    pub median: f64,
    pub min: f64,
    pub max: f64,
}

impl Stats {
    fn of(values: impl Iterator<Item = f64>) -> Option<Stats> {
        let mut v: Vec<f64> = values.filter(|x| x.is_finite()).collect();
        if v.is_empty() {
            return None;
        }
        v.sort_by(f64::total_cmp);
        let n = v.len();
        let median = if n % 2 == 1 { v[n / 2] } else { (v[n / 2 - 1] + v[n / 2]) / 2.0 };
        Some(Stats { mean: v.iter().sum::<f64>() / n as f64, median, min: v[0], max: v[n - 1] })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub benchmark: String,
    pub mode: String,
    pub runs: usize,
    pub recovered: usize,
    pub recovery_rate: f64,
    pub train_mse: Option<Stats>,
    pub test_mse: Option<Stats>,
    pub train_r2: Option<Stats>,
    pub test_r2: Option<Stats>,
    pub mean_generations: f64,
    pub total_wall_ms: u64,
    pub total_triples: u64,
    pub config: ExperimentConfig,
    /// Hex SHA-256 of the JSON-serialized `config`.
    pub config_hash: String,
}

pub fn config_hash(config: &ExperimentConfig) -> String {
    let bytes = serde_json::to_vec(config).expect("config serializes");
    hex::encode(Sha256::digest(bytes))
}

pub fn summarize(result: &ExperimentResult) -> Summary {
    let r = &result.records;
    Summary {
        benchmark: result.config.benchmark.name().to_string(),
        mode: result.config.mode.name().to_string(),
        runs: r.len(),
        recovered: result.recovered(),
        recovery_rate: result.recovery_rate(),
        train_mse: Stats::of(r.iter().map(|x| x.train_mse)),
        test_mse: Stats::of(r.iter().map(|x| x.test_mse)),
        train_r2: Stats::of(r.iter().map(|x| x.train_r2)),
        test_r2: Stats::of(r.iter().map(|x| x.test_r2)),
        mean_generations: r.iter().map(|x| x.generations as f64).sum::<f64>() / r.len().max(1) as f64,
        total_wall_ms: r.iter().map(|x| x.wall_ms).sum(),
        total_triples: r.iter().map(|x| x.triples_used).sum(),
        config: result.config.clone(),
        config_hash: config_hash(&result.config),
    }
}

pub fn write_csv<W: io::Write>(w: W, records: &[RunRecord]) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in records {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_csv<R: io::Read>(r: R) -> csv::Result<Vec<RunRecord>> {
    csv::Reader::from_reader(r).deserialize().collect()
}

/// Writes `<benchmark>_<mode>.csv` and `<benchmark>_<mode>.json` into `dir`.
pub fn write_results(dir: &Path, result: &ExperimentResult) -> io::Result<(PathBuf, PathBuf)> {
    std::fs::create_dir_all(dir)?;
    let stem = format!("{}_{}", result.config.benchmark.name(), result.config.mode.name());
    let csv_path = dir.join(format!("{stem}.csv"));
    let json_path = dir.join(format!("{stem}.json"));
    write_csv(File::create(&csv_path)?, &result.records).map_err(io::Error::other)?;
    serde_json::to_writer_pretty(File::create(&json_path)?, &summarize(result)).map_err(io::Error::other)?;
    Ok((csv_path, json_path))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(seed: u64) -> RunRecord {
        RunRecord {
            benchmark: "nguyen9".into(),
            mode: "secure".into(),
            seed,
            best_expr: "(+ (sin x1) (sin (* x2 x2)))".into(),
            train_mse: 1.2345678901234567e-7,
            test_mse: f64::INFINITY,
            train_r2: 0.9999,
            test_r2: -3.5,
            recovered: seed.is_multiple_of(2),
            generations: 17,
            wall_ms: 1234,
            triples_used: 987_654,
        }
    }

    #[test]
    fn csv_round_trip() {
        let records: Vec<RunRecord> = (0..5).map(record).collect();
        let mut buf = Vec::new();
        write_csv(&mut buf, &records).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(
            text.lines().next().unwrap(),
            "benchmark,mode,seed,best_expr,train_mse,test_mse,train_r2,test_r2,recovered,generations,wall_ms,triples_used"
        );
        assert_eq!(read_csv(&buf[..]).unwrap(), records);
    }

    #[test]
    fn stats_ignore_non_finite() {
        let s = Stats::of([3.0, 1.0, f64::INFINITY, 2.0].into_iter()).unwrap();
        assert_eq!((s.mean, s.median, s.min, s.max), (2.0, 2.0, 1.0, 3.0));
        assert!(Stats::of([f64::NAN].into_iter()).is_none());
    }
}
