use rand::Rng;

use super::Scenario;
use crate::error::{invalid, Error, Result};
use crate::rng;

/// Observations sorted by feature value, with duplicate features merged.
///
/// Block `i` holds `weights[i]` draws at `xs[i]`, of which `ones[i]` carry the
/// label 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    xs: Vec<f64>,
    ones: Vec<u64>,
    weights: Vec<u64>,
}

impl Sample {
    /// Build from raw `(x, y)` pairs in any order.
    pub fn from_pairs(pairs: &[(f64, bool)]) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::EmptySample);
        }
        if let Some((x, _)) = pairs.iter().find(|(x, _)| !x.is_finite()) {
            return Err(invalid(format!("non-finite feature value {x}")));
        }
        let mut sorted = pairs.to_vec();
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(Self::from_sorted(sorted.into_iter()))
    }

    pub fn from_xy(xs: &[f64], ys: &[bool]) -> Result<Self> {
        if xs.len() != ys.len() {
            return Err(invalid("xs and ys differ in length"));
        }
        let pairs: Vec<_> = xs.iter().copied().zip(ys.iter().copied()).collect();
        Self::from_pairs(&pairs)
    }

    /// Build from already-aggregated blocks.
    pub fn from_blocks(xs: Vec<f64>, ones: Vec<u64>, weights: Vec<u64>) -> Result<Self> {
        if xs.is_empty() {
            return Err(Error::EmptySample);
        }
        if xs.len() != ones.len() || xs.len() != weights.len() {
            return Err(invalid("block columns differ in length"));
        }
        if xs.windows(2).any(|w| !(w[0] < w[1])) || xs.iter().any(|x| !x.is_finite()) {
            return Err(invalid("block features must be finite and strictly increasing"));
        }
        if weights.iter().zip(&ones).any(|(&w, &o)| w == 0 || o > w) {
            return Err(invalid("block weights must be positive and bound the count of ones"));
        }
        Ok(Self { xs, ones, weights })
    }

    fn from_sorted(pairs: impl Iterator<Item = (f64, bool)>) -> Self {
        let mut xs: Vec<f64> = Vec::new();
        let mut ones = Vec::new();
        let mut weights = Vec::new();
        for (x, y) in pairs {
            if xs.last() == Some(&x) {
                *weights.last_mut().unwrap() += 1;
                *ones.last_mut().unwrap() += y as u64;
            } else {
                xs.push(x);
                weights.push(1);
                ones.push(y as u64);
            }
        }
        Self { xs, ones, weights }
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn ones(&self) -> &[u64] {
        &self.ones
    }

    pub fn weights(&self) -> &[u64] {
        &self.weights
    }

    /// Number of distinct feature values.
    pub fn blocks(&self) -> usize {
        self.xs.len()
    }

    /// Total number of observations.
    pub fn n(&self) -> u64 {
        self.weights.iter().sum()
    }

    /// Empirical distribution function `F_n`.
    pub fn ecdf(&self, x: f64) -> f64 {
        let k = self.xs.partition_point(|&v| v <= x);
        let below: u64 = self.weights[..k].iter().sum();
        below as f64 / self.n() as f64
    }

    /// Expand blocks back into one `(x, y)` row per observation.
    pub fn rows(&self) -> impl Iterator<Item = (f64, bool)> + '_ {
        self.xs.iter().zip(self.ones.iter().zip(&self.weights)).flat_map(|(&x, (&o, &w))| {
            (0..w).map(move |j| (x, j < o))
        })
    }
}

/// Draw `n` observations from `scn` using the stream addressed by `seed`.
pub fn sample_dataset(scn: &Scenario, n: u64, seed: u64) -> Result<Sample> {
    let mut r = rng::stream(seed, rng::experiment::DATA, 0);
    sample_dataset_with(scn, n, &mut r)
}

/// Draw `n` observations: `X` by the quantile transform of a uniform,
/// then `Y ~ Bernoulli(Φ_n(X))`.
pub fn sample_dataset_with<R: Rng + ?Sized>(scn: &Scenario, n: u64, rng: &mut R) -> Result<Sample> {
    if n == 0 {
        return Err(Error::EmptySample);
    }
    let delta = scn.delta(n);
    let mut pairs: Vec<(f64, bool)> = (0..n)
        .map(|_| {
            let u: f64 = rng.random();
            let x = scn.law.quantile_unchecked(u);
            let v: f64 = rng.random();
            (x, v < scn.link.value(delta * x))
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(Sample::from_sorted(pairs.into_iter()))
}
