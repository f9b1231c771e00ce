//! End-to-end probabilistic ADC assessment: Monte Carlo over continuation
//! traces, and full or sparse chaos surrogates fitted on collocation runs.

mod report;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chaos::{
    axial_design, collocation_design, evaluate, fit_full, fit_sparse, heredity_pairs, main_effects,
    quantile_transform, sparse_design, DesignMatrix, FitDiagnostics, PceConfig, PceModel, SparseTarget,
};
use crate::continuation::{trace_adc, AdcResult, ContinuationOptions, LimitClass};
use crate::error::{Error, Result};
use crate::feeder::{build_admittance, AdmittanceMatrix, FeederModel};
use crate::stats::{cdf_grid, confidence_interval, moments, sorted, ConfidenceInterval, Moments};
use crate::stochastic::{assemble_variation, standard_normal_points, RandomInputVector, Scenario, StochasticModel};

pub use report::{compare, write_outputs, ClassComparison, Comparison};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Mcs,
    Pce,
    Spce,
    All,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Mcs => "mcs",
            Method::Pce => "pce",
            Method::Spce => "spce",
            Method::All => "all",
        }
    }

    fn expand(self) -> Vec<Method> {
        match self {
            Method::All => vec![Method::Mcs, Method::Pce, Method::Spce],
            m => vec![m],
        }
    }
}

/// Row selection for the sparse pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SparseDesign {
    /// The best-ranked rank-increasing collocation points.
    Ranked,
    /// Axial points first; the remaining rows go to pair points for the
    /// inputs with the largest products of main effects.
    Heredity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssessmentConfig {
    pub method: Method,
    /// Monte Carlo realizations, each one continuation trace.
    pub mcs_samples: usize,
    /// Standard-normal draws used to sample each surrogate.
    pub surrogate_samples: usize,
    pub sparse_target: SparseTarget,
    pub sparse_design: SparseDesign,
    /// Rows of the sparse design; defaults to `M_C` for a fixed target and
    /// ⌈K/3⌉ for the automatic rule.
    pub sparse_rows: Option<usize>,
    /// Rows of the full design; defaults to K.
    pub pce_rows: Option<usize>,
    pub degree: usize,
    pub seed: u64,
    /// Threads for independent traces; 0 uses the rayon default.
    pub workers: usize,
    pub output_dir: Option<PathBuf>,
    pub dump_trace: bool,
    #[serde(skip)]
    pub continuation: ContinuationOptions,
}

impl Default for AssessmentConfig {
    fn default() -> Self {
        AssessmentConfig {
            method: Method::All,
            mcs_samples: 10_000,
            surrogate_samples: 10_000,
            sparse_target: SparseTarget::Fixed(31),
            sparse_design: SparseDesign::Heredity,
            sparse_rows: None,
            pce_rows: None,
            degree: 2,
            seed: 42,
            workers: 0,
            output_dir: None,
            dump_trace: false,
            continuation: ContinuationOptions::default(),
        }
    }
}

impl AssessmentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.mcs_samples == 0 || self.surrogate_samples == 0 {
            return Err(Error::Config("sample counts must be ≥ 1".into()));
        }
        if let SparseTarget::Fixed(0) = self.sparse_target {
            return Err(Error::Config("M_C must be ≥ 1".into()));
        }
        Ok(())
    }
}

/// Statistics of one ADC response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassStatistics {
    pub moments: Moments,
    pub ci95: ConfidenceInterval,
    pub cdf: Vec<(f64, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub analytic_mean: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub analytic_variance: Option<f64>,
    /// Share of surrogate samples raised to zero.
    pub clip_fraction: f64,
    #[serde(skip)]
    pub samples: Vec<f64>,
}

impl ClassStatistics {
    fn from_samples(samples: Vec<f64>) -> Self {
        let s = sorted(&samples);
        ClassStatistics {
            moments: moments(&samples),
            ci95: confidence_interval(&s, 0.95),
            cdf: cdf_grid(&s, 101),
            analytic_mean: None,
            analytic_variance: None,
            clip_fraction: 0.0,
            samples,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailedTrace {
    pub sample: usize,
    pub reason: String,
}

/// Results of one method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodReport {
    pub method: Method,
    /// Continuation traces actually run.
    pub deterministic_solves: usize,
    pub failures: Vec<FailedTrace>,
    /// More than 1% of traces failed.
    pub unreliable: bool,
    /// Keys: voltage, thermal, collapse, overall.
    pub classes: BTreeMap<String, ClassStatistics>,
    pub overall_rule: String,
    /// How the collocation rows were chosen.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub design: Option<String>,
    /// Overall ADC taken from the surrogate of the class binding at the mean point.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub overall_binding_class: Option<ClassStatistics>,
    /// "element (class)" → count over traced realizations.
    pub binding_frequency: BTreeMap<String, usize>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub fits: BTreeMap<String, FitDiagnostics>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub models: BTreeMap<String, PceModel>,
    #[serde(skip)]
    pub wall_clock_s: f64,
}

impl MethodReport {
    pub fn class(&self, name: &str) -> Option<&ClassStatistics> {
        self.classes.get(name)
    }
}

/// Deterministic ADC at the mean realization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanPointSummary {
    pub adc_voltage_mw: f64,
    pub adc_thermal_mw: f64,
    pub adc_collapse_mw: f64,
    pub lambda_voltage: f64,
    pub lambda_thermal: f64,
    pub lambda_collapse: f64,
    pub load_increase_mw: f64,
    pub binding_limit: LimitClass,
    pub voltage_element: Option<String>,
    pub thermal_element: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdcReport {
    pub feeder: String,
    pub inputs: Vec<String>,
    pub config: AssessmentConfig,
    pub mean_point: MeanPointSummary,
    pub methods: Vec<MethodReport>,
    pub comparisons: Vec<Comparison>,
    #[serde(skip)]
    pub mean_trace: Option<AdcResult>,
}

impl AdcReport {
    pub fn method(&self, m: Method) -> Option<&MethodReport> {
        self.methods.iter().find(|r| r.method == m)
    }

    /// Serialized report; contains no timing, so it is reproducible.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports always serialize")
    }
}

pub const CLASS_NAMES: [&str; 4] = ["voltage", "thermal", "collapse", "overall"];

/// Everything the traces share: the feeder, its admittance and the input registry.
pub struct Problem<'a> {
    pub model: &'a FeederModel,
    pub ybus: AdmittanceMatrix,
    pub registry: StochasticModel,
    pub options: ContinuationOptions,
    solves: AtomicUsize,
}

impl<'a> Problem<'a> {
    pub fn new(model: &'a FeederModel, scenario: &Scenario, options: ContinuationOptions) -> Result<Self> {
        Ok(Problem {
            model,
            ybus: build_admittance(model)?,
            registry: StochasticModel::new(scenario, model)?,
            options,
            solves: AtomicUsize::new(0),
        })
    }

    /// One continuation trace for a realization. Every call is counted.
    pub fn trace(&self, u: &RandomInputVector) -> Result<AdcResult> {
        self.solves.fetch_add(1, Ordering::Relaxed);
        let b = assemble_variation(u, &self.registry)?;
        trace_adc(self.model, &self.ybus, &b, &self.options)
    }

    pub fn solve_count(&self) -> usize {
        self.solves.load(Ordering::Relaxed)
    }

    fn take_count(&self) -> usize {
        self.solves.swap(0, Ordering::Relaxed)
    }
}

fn binding_key(r: &AdcResult) -> String {
    match &r.binding_element {
        Some(e) => format!("{e} ({})", r.binding_limit),
        None => format!("nose ({})", r.binding_limit),
    }
}

fn class_samples(results: &[&AdcResult]) -> [Vec<f64>; 4] {
    [
        results.iter().map(|r| r.adc_voltage).collect(),
        results.iter().map(|r| r.adc_thermal).collect(),
        results.iter().map(|r| r.adc_collapse).collect(),
        results.iter().map(|r| r.adc_overall).collect(),
    ]
}

/// Monte Carlo: one trace per realization, failures excluded and counted.
pub fn run_mcs(problem: &Problem, samples: usize, seed: u64) -> Result<MethodReport> {
    let start = Instant::now();
    problem.take_count();
    let inputs = problem.registry.sample(samples, seed);
    let outcomes: Vec<Result<AdcResult>> = inputs.par_iter().map(|u| problem.trace(u)).collect();
    let mut ok = Vec::with_capacity(samples);
    let mut failures = Vec::new();
    for (i, o) in outcomes.iter().enumerate() {
        match o {
            Ok(r) => ok.push(r),
            Err(e) => failures.push(FailedTrace {
                sample: i,
                reason: e.to_string(),
            }),
        }
    }
    if ok.is_empty() {
        return Err(Error::Continuation(format!(
            "all {samples} Monte Carlo traces failed; first: {}",
            failures[0].reason
        )));
    }
    let mut binding_frequency = BTreeMap::new();
    for r in &ok {
        *binding_frequency.entry(binding_key(r)).or_insert(0) += 1;
    }
    let classes = CLASS_NAMES
        .iter()
        .zip(class_samples(&ok))
        .map(|(n, s)| (n.to_string(), ClassStatistics::from_samples(s)))
        .collect();
    Ok(MethodReport {
        method: Method::Mcs,
        deterministic_solves: problem.take_count(),
        unreliable: failures.len() * 100 > samples,
        failures,
        classes,
        overall_rule: "elementwise minimum of the three class ADCs per realization".into(),
        design: None,
        overall_binding_class: None,
        binding_frequency,
        fits: BTreeMap::new(),
        models: BTreeMap::new(),
        wall_clock_s: start.elapsed().as_secs_f64(),
    })
}

fn sparse_rows(config: &AssessmentConfig, k: usize) -> usize {
    config.sparse_rows.unwrap_or(match config.sparse_target {
        SparseTarget::Fixed(m) => m,
        SparseTarget::Auto => k.div_ceil(3),
    })
}

/// Collocation points for a chaos method that need no model runs to choose:
/// the full design, or the ranked sparse design.
pub fn design_points(config: &AssessmentConfig, n: usize, sparse: bool) -> Result<(PceConfig, Vec<Vec<f64>>)> {
    let pce = PceConfig::new(n, config.degree)?;
    let k = pce.basis_size();
    let points = if sparse {
        let rows = sparse_rows(config, k);
        if rows <= k {
            sparse_design(&pce, rows)?
        } else {
            collocation_design(&pce, Some(rows))?
        }
    } else {
        collocation_design(&pce, Some(config.pce_rows.unwrap_or(k)))?
    };
    Ok((pce, points))
}

/// Full or sparse chaos surrogate of each class, sampled on shared points.
pub fn run_pce(problem: &Problem, config: &AssessmentConfig, sparse: bool) -> Result<MethodReport> {
    let start = Instant::now();
    problem.take_count();
    let n = problem.registry.dimension();
    let (pce, points, traces) = if sparse && config.sparse_design == SparseDesign::Heredity {
        heredity_design(problem, config, n)?
    } else {
        let (pce, points) = design_points(config, n, sparse)?;
        let traces = trace_points(problem, &points)?;
        (pce, points, traces)
    };
    let axial = points.iter().filter(|p| p.iter().filter(|x| **x != 0.0).count() <= 1).count();
    let design_label = match (sparse, config.sparse_design) {
        (true, SparseDesign::Heredity) if axial < points.len() && axial == axial_design(&pce).len() => {
            format!("{axial} axial rows + {} pair rows chosen by main-effect products", points.len() - axial)
        }
        _ => format!("{} best-ranked collocation rows", points.len()),
    };
    let design = DesignMatrix::new(pce, points)?;

    let refs: Vec<&AdcResult> = traces.iter().collect();
    let responses = class_samples(&refs);
    let mut binding_frequency = BTreeMap::new();
    for r in &traces {
        *binding_frequency.entry(binding_key(r)).or_insert(0) += 1;
    }

    let xi = standard_normal_points(pce.n, config.surrogate_samples, surrogate_seed(config.seed));
    let mut classes = BTreeMap::new();
    let mut fits = BTreeMap::new();
    let mut models = BTreeMap::new();
    let mut values: Vec<Vec<f64>> = Vec::new();
    for (class, y) in LimitClass::ALL.iter().zip(&responses) {
        let model = if sparse {
            fit_sparse(&design, y, config.sparse_target)?
        } else {
            fit_full(&design, y)?
        };
        let raw = evaluate(&model, &xi);
        let clipped = raw.iter().filter(|v| **v < 0.0).count();
        let v: Vec<f64> = raw.into_iter().map(|v| v.max(0.0)).collect();
        let mut stats = ClassStatistics::from_samples(v.clone());
        stats.analytic_mean = Some(model.analytic_mean());
        stats.analytic_variance = Some(model.analytic_variance());
        stats.clip_fraction = clipped as f64 / xi.len() as f64;
        fits.insert(class.name().to_string(), model.diagnostics.clone());
        models.insert(class.name().to_string(), model);
        classes.insert(class.name().to_string(), stats);
        values.push(v);
    }
    let overall: Vec<f64> = (0..xi.len())
        .map(|i| values.iter().map(|v| v[i]).fold(f64::INFINITY, f64::min))
        .collect();
    classes.insert("overall".into(), ClassStatistics::from_samples(overall));

    let overall_binding_class = match mean_point(problem) {
        Ok(r) => classes.get(r.binding_limit.name()).cloned().map(|mut c| {
            c.analytic_mean = None;
            c.analytic_variance = None;
            c
        }),
        Err(_) => None,
    };
    Ok(MethodReport {
        method: if sparse { Method::Spce } else { Method::Pce },
        deterministic_solves: problem.take_count(),
        failures: Vec::new(),
        unreliable: false,
        classes,
        overall_rule: "elementwise minimum of the three class surrogates on shared samples; \
                       the class binding at the mean point is reported alongside"
            .into(),
        design: Some(design_label),
        overall_binding_class,
        binding_frequency,
        fits,
        models,
        wall_clock_s: start.elapsed().as_secs_f64(),
    })
}

fn trace_points(problem: &Problem, points: &[Vec<f64>]) -> Result<Vec<AdcResult>> {
    points
        .par_iter()
        .map(|xi| problem.trace(&quantile_transform(xi, &problem.registry)?))
        .collect()
}

/// Two-stage sparse design: the axial rows are traced first, then pair rows
/// are picked from the main effects of the class binding at the origin.
/// Falls back to the ranked design when the row budget does not exceed the
/// axial stage.
fn heredity_design(
    problem: &Problem,
    config: &AssessmentConfig,
    n: usize,
) -> Result<(PceConfig, Vec<Vec<f64>>, Vec<AdcResult>)> {
    let pce = PceConfig::new(n, config.degree)?;
    let rows = sparse_rows(config, pce.basis_size());
    let mut points = axial_design(&pce);
    if rows <= points.len() {
        let points = sparse_design(&pce, rows)?;
        let traces = trace_points(problem, &points)?;
        return Ok((pce, points, traces));
    }
    let mut traces = trace_points(problem, &points)?;
    let class = match points.iter().position(|p| p.iter().all(|x| *x == 0.0)) {
        Some(origin) => traces[origin].binding_limit,
        None => LimitClass::Voltage,
    };
    let y: Vec<f64> = traces.iter().map(|r| r.adc(class)).collect();
    let effects = main_effects(&DesignMatrix::new(pce, points.clone())?, &y)?;
    let pairs = heredity_pairs(&pce, &effects, rows - points.len())?;
    traces.extend(trace_points(problem, &pairs)?);
    points.extend(pairs);
    Ok((pce, points, traces))
}

fn surrogate_seed(seed: u64) -> u64 {
    seed ^ 0x5eed_5eed_5eed_5eed
}

/// Deterministic trace at the mean realization, with its curve kept. Not
/// counted as a method evaluation.
pub fn mean_point(problem: &Problem) -> Result<AdcResult> {
    let b = assemble_variation(&problem.registry.mean_realization(), &problem.registry)?;
    let options = ContinuationOptions {
        keep_trace: true,
        ..problem.options
    };
    trace_adc(problem.model, &problem.ybus, &b, &options)
}

/// Runs the configured methods and their comparisons.
pub fn assess(model: &FeederModel, scenario: &Scenario, config: &AssessmentConfig) -> Result<AdcReport> {
    config.validate()?;
    let problem = Problem::new(model, scenario, config.continuation)?;
    let run = || -> Result<AdcReport> {
        let mean = mean_point(&problem)?;
        let mut methods = Vec::new();
        for m in config.method.expand() {
            methods.push(match m {
                Method::Mcs => run_mcs(&problem, config.mcs_samples, config.seed)?,
                Method::Pce => run_pce(&problem, config, false)?,
                Method::Spce => run_pce(&problem, config, true)?,
                Method::All => unreachable!(),
            });
        }
        let comparisons = match methods.iter().position(|r| r.method == Method::Mcs) {
            Some(base) => methods
                .iter()
                .filter(|r| r.method != Method::Mcs)
                .map(|r| compare(&methods[base], r))
                .collect(),
            None if methods.len() > 1 => methods[1..].iter().map(|r| compare(&methods[0], r)).collect(),
            None => Vec::new(),
        };
        Ok(AdcReport {
            feeder: model.name().to_string(),
            inputs: problem.registry.input_labels(),
            config: config.clone(),
            mean_point: MeanPointSummary {
                adc_voltage_mw: mean.adc_voltage,
                adc_thermal_mw: mean.adc_thermal,
                adc_collapse_mw: mean.adc_collapse,
                lambda_voltage: mean.lambda_voltage,
                lambda_thermal: mean.lambda_thermal,
                lambda_collapse: mean.lambda_collapse,
                load_increase_mw: mean.load_increase_mw,
                binding_limit: mean.binding_limit,
                voltage_element: mean.voltage_element.clone(),
                thermal_element: mean.thermal_element.clone(),
            },
            methods,
            comparisons,
            mean_trace: Some(mean),
        })
    };
    if config.workers == 0 {
        run()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(config.workers)
            .build()
            .map_err(|e| Error::Config(format!("worker pool: {e}")))?
            .install(run)
    }
}
