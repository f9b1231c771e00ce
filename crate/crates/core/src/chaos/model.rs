use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{hermite_table, DesignMatrix, MultiIndex, PceConfig};
use crate::error::{Error, Result};
use crate::stats::{cdf_grid, confidence_interval, moments, sorted, ConfidenceInterval, Moments};
use crate::stochastic::standard_normal_points;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PceTerm {
    pub index: MultiIndex,
    pub coefficient: f64,
    /// Inactive terms were dropped by sparse selection; their coefficient is 0.
    pub active: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub method: String,
    pub rows: usize,
    /// Active terms, constant included.
    pub selected_terms: usize,
    pub residual_norm: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loo_error: Option<f64>,
}

/// A fitted expansion `y ≈ Σ c_α H_α(ξ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PceModel {
    pub config: PceConfig,
    pub terms: Vec<PceTerm>,
    pub diagnostics: FitDiagnostics,
}

impl PceModel {
    pub(crate) fn from_selection(
        design: &DesignMatrix,
        cols: &[usize],
        coefficients: &[f64],
        diagnostics: FitDiagnostics,
    ) -> Self {
        let mut terms: Vec<PceTerm> = design
            .basis
            .iter()
            .map(|index| PceTerm {
                index: index.clone(),
                coefficient: 0.0,
                active: false,
            })
            .collect();
        for (&c, &v) in cols.iter().zip(coefficients) {
            terms[c].coefficient = v;
            terms[c].active = true;
        }
        PceModel {
            config: design.config,
            terms,
            diagnostics,
        }
    }

    /// Builds a model from explicit terms; unlisted basis terms are inactive.
    pub fn from_terms(config: PceConfig, terms: &[(MultiIndex, f64)]) -> Result<Self> {
        let mut all: Vec<PceTerm> = config
            .basis()
            .into_iter()
            .map(|index| PceTerm {
                index,
                coefficient: 0.0,
                active: false,
            })
            .collect();
        for (index, c) in terms {
            let t = all
                .iter_mut()
                .find(|t| &t.index == index)
                .ok_or_else(|| Error::Config(format!("{index} is not in the degree-{} basis", config.p)))?;
            t.coefficient = *c;
            t.active = true;
        }
        let selected = all.iter().filter(|t| t.active).count();
        Ok(PceModel {
            config,
            terms: all,
            diagnostics: FitDiagnostics {
                method: "given".into(),
                rows: 0,
                selected_terms: selected,
                residual_norm: 0.0,
                loo_error: None,
            },
        })
    }

    pub fn coefficient(&self, index: &MultiIndex) -> f64 {
        self.terms
            .iter()
            .find(|t| &t.index == index)
            .map_or(0.0, |t| t.coefficient)
    }

    pub fn active_terms(&self) -> impl Iterator<Item = &PceTerm> {
        self.terms.iter().filter(|t| t.active)
    }

    pub fn active_count(&self) -> usize {
        self.active_terms().count()
    }

    /// `E[y] = c_0`.
    pub fn analytic_mean(&self) -> f64 {
        self.active_terms()
            .filter(|t| t.index.degree() == 0)
            .map(|t| t.coefficient)
            .sum()
    }

    /// `Var[y] = Σ_{α≠0} c_α² ‖H_α‖²`.
    pub fn analytic_variance(&self) -> f64 {
        self.active_terms()
            .filter(|t| t.index.degree() > 0)
            .map(|t| t.coefficient * t.coefficient * t.index.norm_squared())
            .sum()
    }

    pub fn evaluate_point(&self, xi: &[f64]) -> f64 {
        let tables: Vec<Vec<f64>> = xi.iter().map(|&x| hermite_table(self.config.p, x)).collect();
        self.active_terms()
            .map(|t| {
                t.coefficient
                    * t.index
                        .0
                        .iter()
                        .enumerate()
                        .filter(|(_, e)| **e > 0)
                        .map(|(d, &e)| tables[d][e as usize])
                        .product::<f64>()
            })
            .sum()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("models always serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(Error::parse)
    }
}

/// Surrogate values at each point, in point order.
pub fn evaluate(model: &PceModel, points: &[Vec<f64>]) -> Vec<f64> {
    points.par_iter().map(|xi| model.evaluate_point(xi)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateStatistics {
    pub moments: Moments,
    pub ci95: ConfidenceInterval,
    pub cdf: Vec<(f64, f64)>,
    pub analytic_mean: f64,
    pub analytic_variance: f64,
    /// Surrogate samples in draw order.
    #[serde(skip)]
    pub samples: Vec<f64>,
}

/// Samples the surrogate at `count` standard-normal points.
pub fn surrogate_statistics(model: &PceModel, count: usize, seed: u64) -> Result<SurrogateStatistics> {
    if count == 0 {
        return Err(Error::Config("surrogate sample count must be ≥ 1".into()));
    }
    let points = standard_normal_points(model.config.n, count, seed);
    let samples = evaluate(model, &points);
    let s = sorted(&samples);
    Ok(SurrogateStatistics {
        moments: moments(&samples),
        ci95: confidence_interval(&s, 0.95),
        cdf: cdf_grid(&s, 101),
        analytic_mean: model.analytic_mean(),
        analytic_variance: model.analytic_variance(),
        samples,
    })
}
