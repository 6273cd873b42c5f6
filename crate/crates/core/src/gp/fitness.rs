use serde::{Deserialize, Serialize};

use super::GpError;
use crate::expr::Expr;

/// Row-major training data with one target per row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    x: Vec<Vec<f64>>,
    y: Vec<f64>,
}

impl Dataset {
    pub fn new(x: Vec<Vec<f64>>, y: Vec<f64>) -> Result<Self, GpError> {
        if x.is_empty() {
            return Err(GpError::InvalidDataset("no rows".into()));
        }
        if x.len() != y.len() {
            return Err(GpError::InvalidDataset(format!("{} rows but {} targets", x.len(), y.len())));
        }
        let n = x[0].len();
        if let Some(i) = x.iter().position(|r| r.len() != n) {
            return Err(GpError::InvalidDataset(format!("row {i} has {} columns, expected {n}", x[i].len())));
        }
        Ok(Dataset { x, y })
    }

    pub fn rows(&self) -> usize {
        self.y.len()
    }

    pub fn n_vars(&self) -> usize {
        self.x[0].len()
    }

    pub fn x(&self) -> &[Vec<f64>] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.x.iter().map(|r| r[j]).collect()
    }

    /// Total sum of squares divided by `m`, i.e. the population variance of `y`.
    pub fn sst_over_m(&self) -> f64 {
        let m = self.rows() as f64;
        let mean = self.y.iter().sum::<f64>() / m;
        self.y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / m
    }
}

/// Mean squared error of `tree` on `data`.
pub fn fitness_mse(tree: &Expr, data: &Dataset) -> Result<f64, GpError> {
    let mut sum = 0.0;
    for (row, y) in data.x.iter().zip(&data.y) {
        let r = y - tree.eval(row);
        sum += r * r;
    }
    let mse = sum / data.rows() as f64;
    if mse.is_finite() {
        Ok(mse)
    } else {
        Err(GpError::NonFinite)
    }
}

pub fn metric_rmse(mse: f64) -> f64 {
    mse.sqrt()
}

pub fn metric_r2(mse: f64, sst_over_m: f64) -> Result<f64, GpError> {
    if sst_over_m == 0.0 {
        return Err(GpError::DegenerateTarget);
    }
    Ok(1.0 - mse / sst_over_m)
}
