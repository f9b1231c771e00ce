//! Hermite polynomial chaos surrogates: basis, collocation designs,
//! full and LARS-sparsified regression, and surrogate sampling.

mod design;
mod model;
mod regression;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stochastic::{Marginal, RandomInputVector, StochasticModel};

pub use design::{
    axial_design, collocation_candidates, collocation_design, design_matrix, heredity_pairs, hermite_roots,
    sparse_design, DesignMatrix,
};
pub use model::{evaluate, surrogate_statistics, FitDiagnostics, PceModel, PceTerm, SurrogateStatistics};
pub use regression::{fit_full, fit_sparse, lars_path, main_effects, SparseTarget};

/// Probabilists' Hermite polynomial `He_k(x)`.
pub fn hermite_1d(k: usize, x: f64) -> f64 {
    let (mut prev, mut cur) = (1.0, x);
    if k == 0 {
        return prev;
    }
    for j in 1..k {
        let next = x * cur - j as f64 * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// `He_0(x) … He_p(x)`.
pub fn hermite_table(p: usize, x: f64) -> Vec<f64> {
    let mut t = Vec::with_capacity(p + 1);
    t.push(1.0);
    if p >= 1 {
        t.push(x);
    }
    for j in 1..p {
        t.push(x * t[j] - j as f64 * t[j - 1]);
    }
    t
}

/// Exponents of one multivariate Hermite basis function.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MultiIndex(pub Vec<u32>);

impl MultiIndex {
    pub fn zero(n: usize) -> Self {
        MultiIndex(vec![0; n])
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn dimension(&self) -> usize {
        self.0.len()
    }

    /// `E[H_α²] = Π αᵢ!` under the standard normal measure.
    pub fn norm_squared(&self) -> f64 {
        self.0
            .iter()
            .map(|&a| (1..=a).map(f64::from).product::<f64>())
            .product()
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .0
            .iter()
            .enumerate()
            .filter(|(_, a)| **a > 0)
            .map(|(i, a)| format!("He{a}(ξ{})", i + 1))
            .collect();
        if parts.is_empty() {
            f.write_str("1")
        } else {
            f.write_str(&parts.join("·"))
        }
    }
}

/// Product of univariate `He_{αᵢ}(ξᵢ)`.
pub fn hermite(index: &MultiIndex, xi: &[f64]) -> f64 {
    index
        .0
        .iter()
        .zip(xi)
        .filter(|(a, _)| **a > 0)
        .map(|(&a, &x)| hermite_1d(a as usize, x))
        .product()
}

/// Number of multi-indices in `n` dimensions with total degree ≤ `p`,
/// the binomial coefficient `(n + p choose p)`.
pub fn basis_size(n: usize, p: usize) -> usize {
    let mut k: u128 = 1;
    for j in 1..=p as u128 {
        k = k * (n as u128 + j) / j;
    }
    k as usize
}

/// All multi-indices of total degree ≤ `p`, graded by degree; within a
/// degree, larger exponents on earlier dimensions come first.
pub fn multi_indices(n: usize, p: usize) -> Vec<MultiIndex> {
    fn fill(n: usize, d: usize, prefix: &mut Vec<u32>, out: &mut Vec<MultiIndex>) {
        if prefix.len() == n - 1 {
            prefix.push(d as u32);
            out.push(MultiIndex(prefix.clone()));
            prefix.pop();
            return;
        }
        for a in (0..=d).rev() {
            prefix.push(a as u32);
            fill(n, d - a, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::with_capacity(basis_size(n, p));
    for d in 0..=p {
        fill(n, d, &mut Vec::with_capacity(n), &mut out);
    }
    out
}

/// Expansion setup: input dimension and total polynomial degree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PceConfig {
    pub n: usize,
    pub p: usize,
}

impl PceConfig {
    pub fn new(n: usize, p: usize) -> Result<Self> {
        if n == 0 || !(1..=3).contains(&p) {
            return Err(Error::Config(format!(
                "expansion needs n ≥ 1 and 1 ≤ p ≤ 3 (got n = {n}, p = {p})"
            )));
        }
        Ok(PceConfig { n, p })
    }

    pub fn basis_size(&self) -> usize {
        basis_size(self.n, self.p)
    }

    pub fn basis(&self) -> Vec<MultiIndex> {
        multi_indices(self.n, self.p)
    }
}

/// Maps a standard-normal point to a physical realization through each
/// marginal's inverse CDF.
pub fn quantile_transform(xi: &[f64], registry: &StochasticModel) -> Result<RandomInputVector> {
    let dists = registry.distributions();
    if xi.len() != dists.len() {
        return Err(Error::Config(format!(
            "point has dimension {} but the scenario registers {} inputs",
            xi.len(),
            dists.len()
        )));
    }
    let values: Vec<f64> = dists.iter().zip(xi).map(|(d, &x)| d.from_standard_normal(x)).collect();
    registry.realization(&values)
}
