//! Weighted empirical complementary CDF shared by the income and energy
//! pipelines.

use serde::Serialize;

use crate::error::{Error, Result};

/// Levels sorted ascending with positive weights and the complementary
/// cumulative weight `C(v_n) = sum_{k >= n} w_k / sum_k w_k`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightedCdf {
    values: Vec<f64>,
    weights: Vec<f64>,
    ccdf: Vec<f64>,
}

impl WeightedCdf {
    /// Builds the CDF from `(value, weight)` pairs already sorted by value.
    /// Zero weights are allowed for interior levels; the total must be positive.
    pub fn from_sorted(pairs: &[(f64, f64)]) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::domain("empirical CDF needs at least one level"));
        }
        for w in pairs.windows(2) {
            if !(w[1].0 >= w[0].0) {
                return Err(Error::domain(format!(
                    "levels must be sorted ascending, found {} after {}",
                    w[1].0, w[0].0
                )));
            }
        }
        if let Some(&(v, w)) = pairs.iter().find(|&&(v, w)| !(w >= 0.0) || !v.is_finite()) {
            return Err(Error::domain(format!("invalid level ({v}, weight {w})")));
        }
        let total: f64 = pairs.iter().map(|p| p.1).sum();
        if !(total > 0.0) {
            return Err(Error::domain("total weight must be positive"));
        }
        let mut ccdf = vec![0.0; pairs.len()];
        let mut acc = 0.0;
        for (i, p) in pairs.iter().enumerate().rev() {
            acc += p.1;
            ccdf[i] = acc / total;
        }
        // exact 1 at the lowest level regardless of summation order
        ccdf[0] = 1.0;
        Ok(WeightedCdf {
            values: pairs.iter().map(|p| p.0).collect(),
            weights: pairs.iter().map(|p| p.1).collect(),
            ccdf,
        })
    }

    /// Builds the CDF directly from complementary counts
    /// (`counts[n]` = weight at or above `values[n]`).
    pub fn from_complementary(values: &[f64], at_or_above: &[f64]) -> Result<Self> {
        if values.is_empty() || values.len() != at_or_above.len() {
            return Err(Error::domain("levels and complementary counts must be non-empty and equal length"));
        }
        let total = at_or_above[0];
        if !(total > 0.0) {
            return Err(Error::domain("total count must be positive"));
        }
        let mut pairs = Vec::with_capacity(values.len());
        for i in 0..values.len() {
            let next = at_or_above.get(i + 1).copied().unwrap_or(0.0);
            pairs.push((values[i], at_or_above[i] - next));
        }
        let mut cdf = Self::from_sorted(&pairs)?;
        // use the reported complementary counts verbatim
        cdf.ccdf = at_or_above.iter().map(|c| c / total).collect();
        Ok(cdf)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn ccdf(&self) -> &[f64] {
        &self.ccdf
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// `(value, C)` pairs.
    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.values.iter().copied().zip(self.ccdf.iter().copied())
    }

    /// Weighted mean of the levels.
    pub fn weighted_mean(&self) -> f64 {
        let total = self.total_weight();
        self.values
            .iter()
            .zip(&self.weights)
            .map(|(v, w)| v * w)
            .sum::<f64>()
            / total
    }

    /// Step-function value `C(v)`: weight share at or above `v`.
    pub fn at(&self, v: f64) -> f64 {
        let i = self.values.partition_point(|&x| x < v);
        if i >= self.values.len() {
            0.0
        } else {
            self.ccdf[i]
        }
    }
}
