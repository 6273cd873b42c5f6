use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{parse, Expr};
use crate::gp::Dataset;

/// Rows per generated dataset.
pub const SAMPLE_COUNT: usize = 20;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SplitError {
    #[error("variable x{0} is assigned to no client")]
    IncompletePartition(usize),
    #[error("variable x{0} is assigned more than once")]
    DuplicateVariable(usize),
    #[error("variable x{0} does not exist")]
    UnknownVariable(usize),
    #[error("at least two clients are required")]
    TooFewClients,
    #[error("clients disagree on the number of rows")]
    DimensionMismatch,
    #[error("exactly the last client must hold the target")]
    MisplacedTarget,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Benchmark {
    Nguyen9,
    Nguyen10,
    Nguyen12,
    Friedman2,
}

impl Benchmark {
    pub const ALL: [Benchmark; 4] = [Benchmark::Nguyen9, Benchmark::Nguyen10, Benchmark::Nguyen12, Benchmark::Friedman2];

    pub fn name(self) -> &'static str {
        match self {
            Benchmark::Nguyen9 => "nguyen9",
            Benchmark::Nguyen10 => "nguyen10",
            Benchmark::Nguyen12 => "nguyen12",
            Benchmark::Friedman2 => "friedman2",
        }
    }

    pub fn spec(self) -> BenchmarkSpec {
        let (n_vars, truth, assignment): (usize, &str, &[&[usize]]) = match self {
            Benchmark::Nguyen9 => (2, "(+ (sin x1) (sin (* x2 x2)))", &[&[1], &[2]]),
            Benchmark::Nguyen10 => (2, "(* (* 2 (sin x1)) (cos x2))", &[&[1], &[2]]),
            Benchmark::Nguyen12 => (
                2,
                "(+ (- (* (* x1 x1) (* x1 x1)) (* x1 (* x1 x1))) (- (* 0.5 (* x2 x2)) x2))",
                &[&[1], &[2]],
            ),
            Benchmark::Friedman2 => (
                5,
                "(+ (+ (* 10 (sin (* 3.14159265358979 (* x1 x2)))) (* 20 (* (- x3 0.5) (- x3 0.5)))) \
                 (+ (* 10 x4) (* 5 x5)))",
                &[&[1, 2, 3], &[4, 5]],
            ),
        };
        let mut ground_truth = parse(truth).expect("built-in ground truth parses");
        if self == Benchmark::Friedman2 {
            ground_truth = crate::expr::snap_constants(&ground_truth);
        }
        BenchmarkSpec {
            benchmark: self,
            n_vars,
            ground_truth,
            sample_count: SAMPLE_COUNT,
            domain: (0.0, 1.0),
            assignment: assignment.iter().map(|c| c.to_vec()).collect(),
        }
    }
}

impl fmt::Display for Benchmark {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Benchmark {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let key: String = s.chars().filter(|c| c.is_ascii_alphanumeric()).collect::<String>().to_lowercase();
        Benchmark::ALL.into_iter().find(|b| b.name() == key).ok_or_else(|| format!("unknown benchmark {s:?}"))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchmarkSpec {
    pub benchmark: Benchmark,
    pub n_vars: usize,
    pub ground_truth: Expr,
    pub sample_count: usize,
    /// Every variable is sampled uniformly from `[lo, hi)`.
    pub domain: (f64, f64),
    /// 1-based variable indices per client, in client order. The last client also holds `y`.
    pub assignment: Vec<Vec<usize>>,
}

impl BenchmarkSpec {
    fn sample(&self, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (lo, hi) = self.domain;
        let columns: Vec<Vec<f64>> =
            (0..self.n_vars).map(|_| (0..self.sample_count).map(|_| rng.gen_range(lo..hi)).collect()).collect();
        let x: Vec<Vec<f64>> = (0..self.sample_count).map(|i| columns.iter().map(|c| c[i]).collect()).collect();
        let y = x.iter().map(|r| self.ground_truth.eval(r)).collect();
        Dataset::new(x, y).expect("generated data is well formed")
    }
}

/// Training data from `seed`, test data from `seed ^ 1`.
pub fn generate_dataset(spec: &BenchmarkSpec, seed: u64) -> (Dataset, Dataset) {
    (spec.sample(seed), spec.sample(seed ^ 1))
}

/// One client's vertical slice of a dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClientDataset {
    /// 1-based global indices of the held columns.
    pub variables: Vec<usize>,
    /// Row-major, `rows x variables.len()`.
    pub x: Vec<Vec<f64>>,
    pub y: Option<Vec<f64>>,
}

impl ClientDataset {
    pub fn rows(&self) -> usize {
        self.x.len()
    }
}

fn check_assignment(n_vars: usize, assignment: &[Vec<usize>]) -> Result<(), SplitError> {
    if assignment.len() < 2 {
        return Err(SplitError::TooFewClients);
    }
    let mut seen = vec![false; n_vars];
    for &v in assignment.iter().flatten() {
        if v == 0 || v > n_vars {
            return Err(SplitError::UnknownVariable(v));
        }
        if std::mem::replace(&mut seen[v - 1], true) {
            return Err(SplitError::DuplicateVariable(v));
        }
    }
    match seen.iter().position(|s| !s) {
        Some(i) => Err(SplitError::IncompletePartition(i + 1)),
        None => Ok(()),
    }
}

/// Splits columns among clients; the last client receives `y`.
pub fn vertical_split(data: &Dataset, assignment: &[Vec<usize>]) -> Result<Vec<ClientDataset>, SplitError> {
    check_assignment(data.n_vars(), assignment)?;
    let k = assignment.len();
    Ok(assignment
        .iter()
        .enumerate()
        .map(|(j, vars)| ClientDataset {
            variables: vars.clone(),
            x: data.x().iter().map(|r| vars.iter().map(|&v| r[v - 1]).collect()).collect(),
            y: (j + 1 == k).then(|| data.y().to_vec()),
        })
        .collect())
}

/// Inverse of [`vertical_split`].
pub fn merge(clients: &[ClientDataset]) -> Result<Dataset, SplitError> {
    let n_vars = clients.iter().map(|c| c.variables.len()).sum();
    let assignment: Vec<Vec<usize>> = clients.iter().map(|c| c.variables.clone()).collect();
    check_assignment(n_vars, &assignment)?;
    let rows = clients[0].rows();
    if clients.iter().any(|c| c.rows() != rows) {
        return Err(SplitError::DimensionMismatch);
    }
    let k = clients.len();
    if clients.iter().enumerate().any(|(j, c)| c.y.is_some() != (j + 1 == k)) {
        return Err(SplitError::MisplacedTarget);
    }
    let y = clients[k - 1].y.clone().expect("checked above");
    if y.len() != rows {
        return Err(SplitError::DimensionMismatch);
    }
    let mut x = vec![vec![0.0; n_vars]; rows];
    for c in clients {
        for (row, part) in x.iter_mut().zip(&c.x) {
            for (&v, &val) in c.variables.iter().zip(part) {
                row[v - 1] = val;
            }
        }
    }
    Dataset::new(x, y).map_err(|_| SplitError::DimensionMismatch)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ground_truth_values() {
        let n12 = Benchmark::Nguyen12.spec().ground_truth;
        assert_eq!(n12.eval(&[1.0, 0.0]), 0.0);
        let f2 = Benchmark::Friedman2.spec().ground_truth;
        assert!((f2.eval(&[0.5; 5]) - 14.5711).abs() < 1e-4);
        let n10 = Benchmark::Nguyen10.spec().ground_truth;
        assert_eq!(n10.eval(&[0.3, 0.7]), 2.0 * 0.3f64.sin() * 0.7f64.cos());
        let n12_direct = |a: f64, b: f64| a.powi(4) - a.powi(3) + 0.5 * b * b - b;
        assert!((n12.eval(&[0.3, 0.8]) - n12_direct(0.3, 0.8)).abs() < 1e-15);
    }

    #[test]
    fn generated_data_shape_and_range() {
        for b in Benchmark::ALL {
            let spec = b.spec();
            let (train, test) = generate_dataset(&spec, 42);
            assert_eq!((train.rows(), train.n_vars()), (20, spec.n_vars));
            assert!(train.x().iter().flatten().all(|v| (0.0..1.0).contains(v)));
            assert_ne!(train, test);
            assert_eq!(generate_dataset(&spec, 42).0, train);
            for (row, y) in train.x().iter().zip(train.y()) {
                assert_eq!(spec.ground_truth.eval(row), *y);
            }
        }
    }

    #[test]
    fn split_and_merge() {
        let spec = Benchmark::Friedman2.spec();
        let (train, _) = generate_dataset(&spec, 7);
        let parts = vertical_split(&train, &spec.assignment).unwrap();
        assert_eq!(parts[0].variables, [1, 2, 3]);
        assert!(parts[0].y.is_none() && parts[1].y.is_some());
        assert_eq!(merge(&parts).unwrap(), train);
        assert_eq!(vertical_split(&train, &[vec![1, 2], vec![4, 5]]), Err(SplitError::IncompletePartition(3)));
        assert_eq!(vertical_split(&train, &[vec![1, 2, 3, 4, 5]]), Err(SplitError::TooFewClients));
        assert_eq!(vertical_split(&train, &[vec![1, 2, 3], vec![3, 4, 5]]), Err(SplitError::DuplicateVariable(3)));
    }

    #[test]
    fn parses_names() {
        assert_eq!("Nguyen-10".parse::<Benchmark>(), Ok(Benchmark::Nguyen10));
        assert_eq!("friedman2".parse::<Benchmark>(), Ok(Benchmark::Friedman2));
        assert!("nguyen1".parse::<Benchmark>().is_err());
    }
}
