//! Random inputs (wind speed, solar radiation, load active power), their
//! conversion to power injections, and the load-generation variation vector
//! that scales with the continuation parameter.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::feeder::{FeederModel, Phase, PhaseSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum QuantityKind {
    WindSpeed,
    SolarRadiation,
    LoadActivePower,
}

/// Normal forecast of one input: the mean is the forecast, the standard
/// deviation the forecasting error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForecastDistribution {
    pub mean: f64,
    pub std_dev: f64,
    pub kind: QuantityKind,
}

impl ForecastDistribution {
    pub fn new(mean: f64, std_dev: f64, kind: QuantityKind) -> Result<Self> {
        if !mean.is_finite() || !(std_dev >= 0.0) || !std_dev.is_finite() {
            return Err(Error::Config(format!(
                "invalid forecast distribution N({mean}, {std_dev})"
            )));
        }
        Ok(ForecastDistribution { mean, std_dev, kind })
    }

    /// Physical inputs cannot be negative; draws below zero are clamped.
    pub fn clamp(&self, raw: f64) -> f64 {
        raw.max(0.0)
    }
}

/// A marginal distribution usable by the quantile transform
/// `u = F⁻¹(Ψ(ξ))`.
pub trait Marginal {
    fn cdf(&self, x: f64) -> f64;
    fn inverse_cdf(&self, p: f64) -> f64;

    /// Maps a standard normal coordinate to this marginal.
    fn from_standard_normal(&self, xi: f64) -> f64 {
        let psi = Normal::standard().cdf(xi);
        self.inverse_cdf(psi)
    }
}

impl Marginal for ForecastDistribution {
    fn cdf(&self, x: f64) -> f64 {
        if self.std_dev == 0.0 {
            return if x < self.mean { 0.0 } else { 1.0 };
        }
        Normal::new(self.mean, self.std_dev)
            .expect("validated parameters")
            .cdf(x)
    }

    fn inverse_cdf(&self, p: f64) -> f64 {
        if self.std_dev == 0.0 {
            return self.mean;
        }
        Normal::new(self.mean, self.std_dev)
            .expect("validated parameters")
            .inverse_cdf(p)
    }

    // For a normal marginal the composition F⁻¹∘Ψ is exactly affine.
    fn from_standard_normal(&self, xi: f64) -> f64 {
        self.mean + self.std_dev * xi
    }
}

/// Standard normal density, used to rank collocation candidates.
pub fn standard_normal_pdf(x: f64) -> f64 {
    Normal::standard().pdf(x)
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindTurbineParams {
    pub bus: String,
    pub phases: PhaseSet,
    pub p_rated_kw: f64,
    pub v_in: f64,
    pub v_rated: f64,
    pub v_out: f64,
    /// Power factor angle, radians (positive injects reactive power).
    pub power_factor_angle: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolarPvParams {
    pub bus: String,
    pub phases: PhaseSet,
    pub p_rated_kw: f64,
    pub r_c: f64,
    pub r_std: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadVariationParams {
    pub bus: String,
    pub phase: Phase,
    pub power_factor_angle: f64,
}

/// Wind turbine output for wind speed `v` (m/s), kW.
pub fn wind_power(v: f64, params: &WindTurbineParams) -> f64 {
    let WindTurbineParams {
        v_in,
        v_rated,
        v_out,
        p_rated_kw,
        ..
    } = *params;
    if v <= v_in || v > v_out {
        0.0
    } else if v <= v_rated {
        (v - v_in) / (v_rated - v_in) * p_rated_kw
    } else {
        p_rated_kw
    }
}

/// Reactive output at constant power factor, kvar.
pub fn wind_reactive(p_kw: f64, power_factor_angle: f64) -> f64 {
    power_factor_angle.tan() * p_kw
}

/// PV output for radiation `r` (W/m²), kW: quadratic below `r_c`, linear up
/// to `r_std`, saturated above.
pub fn solar_power(r: f64, params: &SolarPvParams) -> f64 {
    let SolarPvParams {
        r_c,
        r_std,
        p_rated_kw,
        ..
    } = *params;
    if r <= 0.0 {
        0.0
    } else if r < r_c {
        r * r / (r_c * r_std) * p_rated_kw
    } else if r <= r_std {
        r / r_std * p_rated_kw
    } else {
        p_rated_kw
    }
}

pub fn load_reactive(delta_p_kw: f64, power_factor_angle: f64) -> f64 {
    power_factor_angle.tan() * delta_p_kw
}

fn default_power_factor() -> f64 {
    0.85
}

/// Scenario entry for one wind turbine; device columns follow the usual
/// turbine data-sheet names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindSpec {
    pub bus: String,
    pub phases: PhaseSet,
    /// Forecast wind speed, m/s.
    pub mean: f64,
    pub std: f64,
    pub p_r: f64,
    pub v_rate: f64,
    pub v_in: f64,
    pub v_out: f64,
    /// Carried for completeness; not used by the power curve.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v_0: Option<f64>,
    /// Lagging power factor (injecting vars).
    #[serde(default = "default_power_factor")]
    pub power_factor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolarSpec {
    pub bus: String,
    pub phases: PhaseSet,
    /// Forecast radiation, W/m².
    pub mean: f64,
    pub std: f64,
    pub p_r: f64,
    pub r_c: f64,
    pub r_std: f64,
    /// Carried for completeness; not used by the power curve.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_0: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadSpec {
    pub bus: String,
    pub phase: Phase,
    /// Forecast active power, kW.
    pub mean: f64,
    pub std: f64,
}

/// Scenario document: the stochastic components registered on a feeder.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub wind: Vec<WindSpec>,
    #[serde(default)]
    pub solar: Vec<SolarSpec>,
    #[serde(default)]
    pub loads_stochastic: Vec<LoadSpec>,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(Error::parse)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// One joint realization `u = [v, r, P_L]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomInputVector {
    pub wind_speeds: Vec<f64>,
    pub radiations: Vec<f64>,
    pub load_p: Vec<f64>,
}

impl RandomInputVector {
    pub fn dimension(&self) -> usize {
        self.wind_speeds.len() + self.radiations.len() + self.load_p.len()
    }

    pub fn values(&self) -> Vec<f64> {
        self.wind_speeds
            .iter()
            .chain(&self.radiations)
            .chain(&self.load_p)
            .copied()
            .collect()
    }
}

/// Load-generation variation per node, kW / kvar, plus the total load
/// increase used to express λ in MW.
#[derive(Debug, Clone, PartialEq)]
pub struct VariationVector {
    pub dp_kw: Vec<f64>,
    pub dq_kvar: Vec<f64>,
    pub load_increase_kw: f64,
}

impl VariationVector {
    pub fn zeros(nodes: usize) -> Self {
        VariationVector {
            dp_kw: vec![0.0; nodes],
            dq_kvar: vec![0.0; nodes],
            load_increase_kw: 0.0,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.dp_kw.iter().chain(&self.dq_kvar).all(|x| *x == 0.0)
    }

    /// Multiplies the direction by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        VariationVector {
            dp_kw: self.dp_kw.iter().map(|x| x * c).collect(),
            dq_kvar: self.dq_kvar.iter().map(|x| x * c).collect(),
            load_increase_kw: self.load_increase_kw * c,
        }
    }
}

#[derive(Debug, Clone)]
struct WindSource {
    params: WindTurbineParams,
    dist: ForecastDistribution,
    nodes: Vec<usize>,
}

#[derive(Debug, Clone)]
struct SolarSource {
    params: SolarPvParams,
    dist: ForecastDistribution,
    nodes: Vec<usize>,
}

#[derive(Debug, Clone)]
struct LoadSource {
    params: LoadVariationParams,
    dist: ForecastDistribution,
    node: usize,
}

/// Registry of the stochastic components of a scenario, bound to the nodes
/// of one feeder. Ordering of the random vector: wind turbines, PV units,
/// then varying loads, each in scenario order.
#[derive(Debug, Clone)]
pub struct StochasticModel {
    wind: Vec<WindSource>,
    solar: Vec<SolarSource>,
    loads: Vec<LoadSource>,
    delta_gen_p_kw: Vec<f64>,
    delta_gen_q_kvar: Vec<f64>,
}

fn nodes_of(feeder: &FeederModel, bus: &str, phases: PhaseSet, what: &str) -> Result<Vec<usize>> {
    if phases.is_empty() {
        return Err(Error::Config(format!("{what} on bus `{bus}` has no phases")));
    }
    phases
        .iter()
        .map(|p| {
            feeder.node_by_id(bus, p).ok_or_else(|| {
                Error::Config(format!("{what} references missing node {bus}.{p}"))
            })
        })
        .collect()
}

impl StochasticModel {
    pub fn new(scenario: &Scenario, feeder: &FeederModel) -> Result<Self> {
        let mut wind = Vec::new();
        for w in &scenario.wind {
            if !(0.0 < w.v_in && w.v_in < w.v_rate && w.v_rate < w.v_out) || !(w.p_r > 0.0) {
                return Err(Error::Config(format!(
                    "wind turbine on `{}` needs 0 < v_in < v_rate < v_out and p_r > 0",
                    w.bus
                )));
            }
            if !(w.power_factor > 0.0 && w.power_factor <= 1.0) {
                return Err(Error::Config(format!("wind turbine on `{}` has invalid power factor", w.bus)));
            }
            wind.push(WindSource {
                params: WindTurbineParams {
                    bus: w.bus.clone(),
                    phases: w.phases,
                    p_rated_kw: w.p_r,
                    v_in: w.v_in,
                    v_rated: w.v_rate,
                    v_out: w.v_out,
                    power_factor_angle: w.power_factor.acos(),
                },
                dist: ForecastDistribution::new(w.mean, w.std, QuantityKind::WindSpeed)?,
                nodes: nodes_of(feeder, &w.bus, w.phases, "wind turbine")?,
            });
        }
        let mut solar = Vec::new();
        for s in &scenario.solar {
            if !(0.0 < s.r_c && s.r_c < s.r_std) || !(s.p_r > 0.0) {
                return Err(Error::Config(format!(
                    "PV unit on `{}` needs 0 < r_c < r_std and p_r > 0",
                    s.bus
                )));
            }
            solar.push(SolarSource {
                params: SolarPvParams {
                    bus: s.bus.clone(),
                    phases: s.phases,
                    p_rated_kw: s.p_r,
                    r_c: s.r_c,
                    r_std: s.r_std,
                },
                dist: ForecastDistribution::new(s.mean, s.std, QuantityKind::SolarRadiation)?,
                nodes: nodes_of(feeder, &s.bus, s.phases, "PV unit")?,
            });
        }
        let mut loads = Vec::new();
        for l in &scenario.loads_stochastic {
            let node = nodes_of(feeder, &l.bus, PhaseSet::single(l.phase), "stochastic load")?[0];
            // constant power factor taken from the base spot loads at the node
            let (p, q) = feeder
                .loads()
                .iter()
                .filter(|b| b.bus == l.bus && b.phase == l.phase)
                .fold((0.0, 0.0), |(p, q), b| (p + b.p_kw, q + b.q_kvar));
            let angle = if p > 0.0 { (q / p).atan() } else { 0.0 };
            loads.push(LoadSource {
                params: LoadVariationParams {
                    bus: l.bus.clone(),
                    phase: l.phase,
                    power_factor_angle: angle,
                },
                dist: ForecastDistribution::new(l.mean, l.std, QuantityKind::LoadActivePower)?,
                node,
            });
        }
        let base = feeder.base_injections();
        Ok(StochasticModel {
            wind,
            solar,
            loads,
            delta_gen_p_kw: base.delta_gen_p_kw,
            delta_gen_q_kvar: base.delta_gen_q_kvar,
        })
    }

    pub fn dimension(&self) -> usize {
        self.wind.len() + self.solar.len() + self.loads.len()
    }

    pub fn node_count(&self) -> usize {
        self.delta_gen_p_kw.len()
    }

    pub fn distributions(&self) -> Vec<ForecastDistribution> {
        self.wind
            .iter()
            .map(|w| w.dist)
            .chain(self.solar.iter().map(|s| s.dist))
            .chain(self.loads.iter().map(|l| l.dist))
            .collect()
    }

    /// Labels of the random inputs, in vector order.
    pub fn input_labels(&self) -> Vec<String> {
        self.wind
            .iter()
            .map(|w| format!("wind@{}", w.params.bus))
            .chain(self.solar.iter().map(|s| format!("pv@{}", s.params.bus)))
            .chain(
                self.loads
                    .iter()
                    .map(|l| format!("load@{}.{}", l.params.bus, l.params.phase)),
            )
            .collect()
    }

    pub fn wind_params(&self) -> impl Iterator<Item = &WindTurbineParams> {
        self.wind.iter().map(|w| &w.params)
    }

    pub fn solar_params(&self) -> impl Iterator<Item = &SolarPvParams> {
        self.solar.iter().map(|s| &s.params)
    }

    pub fn load_params(&self) -> impl Iterator<Item = &LoadVariationParams> {
        self.loads.iter().map(|l| &l.params)
    }

    /// Splits a flat value vector (in registry order) into a realization,
    /// clamping negative physical values to zero.
    pub fn realization(&self, values: &[f64]) -> Result<RandomInputVector> {
        if values.len() != self.dimension() {
            return Err(Error::Config(format!(
                "random vector has dimension {} but the scenario registers {}",
                values.len(),
                self.dimension()
            )));
        }
        let dists = self.distributions();
        let clamped: Vec<f64> = values
            .iter()
            .zip(&dists)
            .map(|(v, d)| d.clamp(*v))
            .collect();
        let (nw, ns) = (self.wind.len(), self.solar.len());
        Ok(RandomInputVector {
            wind_speeds: clamped[..nw].to_vec(),
            radiations: clamped[nw..nw + ns].to_vec(),
            load_p: clamped[nw + ns..].to_vec(),
        })
    }

    pub fn mean_realization(&self) -> RandomInputVector {
        let means: Vec<f64> = self.distributions().iter().map(|d| d.mean).collect();
        self.realization(&means).expect("dimension matches")
    }

    /// Independent normal draws, one counter-based stream per sample.
    pub fn sample(&self, count: usize, seed: u64) -> Vec<RandomInputVector> {
        sample_inputs(&self.distributions(), count, seed)
            .into_iter()
            .map(|v| self.realization(&v).expect("dimension matches"))
            .collect()
    }
}

/// The variation vector `b(u)` for one realization.
///
/// Per node: `Δp = ΔP_G + P_w(v) + P_pv(r) − P_L` and
/// `Δq = ΔQ_G + tanθ_α·P_w(v) − tanθ_β·P_L`, where three-phase DG output is
/// split equally over its phases.
pub fn assemble_variation(u: &RandomInputVector, registry: &StochasticModel) -> Result<VariationVector> {
    if u.wind_speeds.len() != registry.wind.len()
        || u.radiations.len() != registry.solar.len()
        || u.load_p.len() != registry.loads.len()
    {
        return Err(Error::Config(format!(
            "realization of dimension {} does not match the {} registered inputs",
            u.dimension(),
            registry.dimension()
        )));
    }
    let mut b = VariationVector {
        dp_kw: registry.delta_gen_p_kw.clone(),
        dq_kvar: registry.delta_gen_q_kvar.clone(),
        load_increase_kw: 0.0,
    };
    for (src, &v) in registry.wind.iter().zip(&u.wind_speeds) {
        let p = wind_power(v, &src.params) / src.nodes.len() as f64;
        let q = wind_reactive(p, src.params.power_factor_angle);
        for &n in &src.nodes {
            b.dp_kw[n] += p;
            b.dq_kvar[n] += q;
        }
    }
    for (src, &r) in registry.solar.iter().zip(&u.radiations) {
        let p = solar_power(r, &src.params) / src.nodes.len() as f64;
        for &n in &src.nodes {
            b.dp_kw[n] += p;
        }
    }
    for (src, &p) in registry.loads.iter().zip(&u.load_p) {
        b.dp_kw[src.node] -= p;
        b.dq_kvar[src.node] -= load_reactive(p, src.params.power_factor_angle);
        b.load_increase_kw += p.max(0.0);
    }
    Ok(b)
}

/// Random stream for sample `index`: a fixed key with the sample index as
/// the stream id, so any worker can draw any sample.
pub fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Independent normal draws per component; negative values are clamped to
/// zero. Deterministic under a fixed seed.
pub fn sample_inputs(distributions: &[ForecastDistribution], count: usize, seed: u64) -> Vec<Vec<f64>> {
    standard_normal_points(distributions.len(), count, seed)
        .into_iter()
        .map(|xi| {
            xi.iter()
                .zip(distributions)
                .map(|(x, d)| d.clamp(d.from_standard_normal(*x)))
                .collect()
        })
        .collect()
}

/// `count` points of an `n`-dimensional standard normal vector.
pub fn standard_normal_points(n: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    (0..count)
        .map(|i| {
            let mut rng = sample_rng(seed, i as u64);
            (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn turbine_680() -> WindTurbineParams {
        WindTurbineParams {
            bus: "680".into(),
            phases: PhaseSet::ABC,
            p_rated_kw: 450.0,
            v_in: 4.0,
            v_rated: 15.0,
            v_out: 25.0,
            power_factor_angle: 0.85f64.acos(),
        }
    }

    fn pv_675() -> SolarPvParams {
        SolarPvParams {
            bus: "675".into(),
            phases: PhaseSet::ABC,
            p_rated_kw: 180.0,
            r_c: 150.0,
            r_std: 1000.0,
        }
    }

    #[test]
    fn wind_curve_cases() {
        let t = turbine_680();
        assert_eq!(wind_power(3.0, &t), 0.0);
        assert_eq!(wind_power(15.0, &t), 450.0);
        assert!((wind_power(10.0, &t) - 245.4545).abs() < 1e-4);
        assert_eq!(wind_power(25.0, &t), 450.0);
        assert_eq!(wind_power(25.0 + 1e-9, &t), 0.0);
    }

    #[test]
    fn reactive_conversions() {
        assert_eq!(wind_reactive(0.0, 0.3), 0.0);
        assert_eq!(wind_reactive(120.0, 0.0), 0.0);
        let q = wind_reactive(245.4545, 0.85f64.acos());
        // tan(acos 0.85) = sqrt(1 - 0.85²) / 0.85
        let oracle = 245.4545 * (1.0 - 0.85f64 * 0.85).sqrt() / 0.85;
        assert!((q - oracle).abs() < 1e-9);
        assert!((q - 152.119).abs() < 1e-3);
        assert_eq!(load_reactive(0.0, 0.4), 0.0);
        assert!((load_reactive(100.0, std::f64::consts::FRAC_PI_4) - 100.0).abs() < 1e-12);
    }

    #[test]
    fn solar_curve_cases() {
        let p = pv_675();
        assert!((solar_power(500.0, &p) - 90.0).abs() < 1e-12);
        assert_eq!(solar_power(0.0, &p), 0.0);
        assert_eq!(solar_power(1200.0, &p), 180.0);
        assert!((solar_power(100.0, &p) - 100.0 * 100.0 / (150.0 * 1000.0) * 180.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_sampling_returns_means() {
        let d = vec![
            ForecastDistribution::new(10.0, 0.0, QuantityKind::WindSpeed).unwrap(),
            ForecastDistribution::new(85.0, 0.0, QuantityKind::LoadActivePower).unwrap(),
        ];
        for s in sample_inputs(&d, 5, 7) {
            assert_eq!(s, vec![10.0, 85.0]);
        }
    }

    #[test]
    fn sampling_is_deterministic_and_clamped() {
        let d = vec![ForecastDistribution::new(0.1, 5.0, QuantityKind::SolarRadiation).unwrap()];
        let a = sample_inputs(&d, 200, 42);
        assert_eq!(a, sample_inputs(&d, 200, 42));
        assert_ne!(a, sample_inputs(&d, 200, 43));
        assert!(a.iter().all(|s| s[0] >= 0.0));
        assert!(a.iter().any(|s| s[0] == 0.0));
    }

    #[test]
    fn law_of_large_numbers() {
        let d = vec![ForecastDistribution::new(10.0, 0.6, QuantityKind::WindSpeed).unwrap()];
        let xs: Vec<f64> = sample_inputs(&d, 100_000, 2024).into_iter().map(|s| s[0]).collect();
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!((mean - 10.0).abs() < 0.01, "mean {mean}");
        assert!((var.sqrt() - 0.6).abs() < 0.01, "std {}", var.sqrt());
    }

    #[test]
    fn normal_quantile_composition_is_affine() {
        let d = ForecastDistribution::new(100.0, 5.0, QuantityKind::LoadActivePower).unwrap();
        assert!((d.from_standard_normal(3f64.sqrt()) - 108.6603).abs() < 1e-4);
        for xi in [-2.5, -1.0, 0.0, 0.7, 2.0] {
            let psi = Normal::standard().cdf(xi);
            let general = d.inverse_cdf(psi);
            assert!((general - d.from_standard_normal(xi)).abs() < 1e-6);
        }
    }
}
