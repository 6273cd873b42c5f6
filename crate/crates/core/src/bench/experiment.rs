use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::data::{generate_dataset, vertical_split, Benchmark, SplitError};
use crate::expr::equivalent;
use crate::gp::{evolve, fitness_mse, metric_r2, metric_rmse, GenerationStats, GpConfig, GpError, PlainOracle};
use crate::protocol::{run_secure_gp, ProtocolError, SessionConfig};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Gp(#[from] GpError),
    #[error(transparent)]
    Split(#[from] SplitError),
    #[error("run with seed {seed} failed: {source}")]
    Protocol { seed: u64, source: ProtocolError },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Plaintext,
    Secure,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Plaintext => "plaintext",
            Mode::Secure => "secure",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "plaintext" => Ok(Mode::Plaintext),
            "secure" => Ok(Mode::Secure),
            _ => Err(format!("unknown mode {s:?}")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub benchmark: Benchmark,
    pub mode: Mode,
    pub runs: usize,
    /// Run `i` uses seed `seed + i` for its data, its GP and its session.
    pub seed: u64,
    pub gp: GpConfig,
    /// Template for secure runs; per-run seeds are filled in.
    pub session: SessionConfig,
    /// Run independent seeds on the rayon pool.
    pub parallel: bool,
}

impl ExperimentConfig {
    pub fn new(benchmark: Benchmark, mode: Mode, runs: usize, seed: u64) -> Self {
        ExperimentConfig {
            benchmark,
            mode,
            runs,
            seed,
            gp: GpConfig::default(),
            session: SessionConfig::default(),
            parallel: true,
        }
    }

    pub fn run_seed(&self, i: usize) -> u64 {
        self.seed.wrapping_add(i as u64)
    }
}

/// One row of the results file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub benchmark: String,
    pub mode: String,
    pub seed: u64,
    pub best_expr: String,
    pub train_mse: f64,
    pub test_mse: f64,
    pub train_r2: f64,
    pub test_r2: f64,
    pub recovered: bool,
    pub generations: usize,
    pub wall_ms: u64,
    pub triples_used: u64,
}

impl RunRecord {
    pub fn train_rmse(&self) -> f64 {
        metric_rmse(self.train_mse)
    }

    pub fn test_rmse(&self) -> f64 {
        metric_rmse(self.test_mse)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub records: Vec<RunRecord>,
    /// Per-run best/mean fitness by generation.
    pub histories: Vec<Vec<GenerationStats>>,
}

impl ExperimentResult {
    pub fn recovered(&self) -> usize {
        self.records.iter().filter(|r| r.recovered).count()
    }

    pub fn recovery_rate(&self) -> f64 {
        if self.records.is_empty() {
            0.0
        } else {
            self.recovered() as f64 / self.records.len() as f64
        }
    }
}

fn r2(mse: f64, sst_over_m: f64) -> f64 {
    metric_r2(mse, sst_over_m).unwrap_or(f64::NAN)
}

/// Runs one seed end to end.
pub fn run_once(config: &ExperimentConfig, seed: u64) -> Result<(RunRecord, Vec<GenerationStats>), ExperimentError> {
    let spec = config.benchmark.spec();
    let (train, test) = generate_dataset(&spec, seed);
    let gp = GpConfig { rng_seed: seed, ..config.gp.clone() };
    let start = Instant::now();
    let (run, sst_over_m, triples_used) = match config.mode {
        Mode::Plaintext => {
            let run = match evolve(&gp, spec.n_vars, &mut PlainOracle { data: &train }) {
                Ok(run) => run,
                Err(e) => return Err(e.into_oracle().map_or_else(ExperimentError::Gp, |never| match never {})),
            };
            (run, train.sst_over_m(), 0)
        }
        Mode::Secure => {
            let clients = vertical_split(&train, &spec.assignment)?;
            let seeded = SessionConfig::seeded(seed);
            let session = SessionConfig {
                session_id: seed,
                dealer_seed: seeded.dealer_seed,
                share_seed: seeded.share_seed,
                ..config.session.clone()
            };
            let out = run_secure_gp(&session, &gp, &clients).map_err(|source| ExperimentError::Protocol { seed, source })?;
            (out.value, out.sst_over_m, out.compute[0].stats.triples_used)
        }
    };
    let wall_ms = start.elapsed().as_millis() as u64;
    let best = &run.best.tree;
    let train_mse = run.best.score();
    let test_mse = fitness_mse(best, &test).unwrap_or(f64::INFINITY);
    let record = RunRecord {
        benchmark: config.benchmark.name().to_string(),
        mode: config.mode.name().to_string(),
        seed,
        best_expr: best.to_string(),
        train_mse,
        test_mse,
        train_r2: r2(train_mse, sst_over_m),
        test_r2: r2(test_mse, test.sst_over_m()),
        recovered: equivalent(best, &spec.ground_truth, spec.n_vars),
        generations: run.generations,
        wall_ms,
        triples_used,
    };
    Ok((record, run.history))
}

/// Runs `config.runs` independent seeds and collects their records in seed order.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult, ExperimentError> {
    config.gp.validate()?;
    let seeds: Vec<u64> = (0..config.runs).map(|i| config.run_seed(i)).collect();
    let outcomes: Vec<_> = if config.parallel {
        seeds.par_iter().map(|&s| run_once(config, s)).collect()
    } else {
        seeds.iter().map(|&s| run_once(config, s)).collect()
    };
    let mut records = Vec::with_capacity(outcomes.len());
    let mut histories = Vec::with_capacity(outcomes.len());
    for o in outcomes {
        let (r, h) = o?;
        records.push(r);
        histories.push(h);
    }
    Ok(ExperimentResult { config: config.clone(), records, histories })
}
