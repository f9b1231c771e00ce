use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{AdcReport, MethodReport, CLASS_NAMES};
use crate::error::Result;
use crate::stats::{ks_distance, sorted};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassComparison {
    pub class: String,
    /// `(candidate − reference) / reference`.
    pub mean_rel_delta: f64,
    pub variance_rel_delta: f64,
    pub skewness_delta: f64,
    pub kurtosis_delta: f64,
    pub ks_distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub reference: String,
    pub candidate: String,
    /// Candidate solves over reference solves.
    pub solve_ratio: f64,
    pub classes: Vec<ClassComparison>,
}

fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b) / b.abs()
    }
}

/// Moment deltas and KS distance of `candidate` against `reference`, per class.
pub fn compare(reference: &MethodReport, candidate: &MethodReport) -> Comparison {
    let classes = CLASS_NAMES
        .iter()
        .filter_map(|name| {
            let (r, c) = (reference.classes.get(*name)?, candidate.classes.get(*name)?);
            let ks = if r.samples.is_empty() || c.samples.is_empty() {
                f64::NAN
            } else {
                ks_distance(&sorted(&r.samples), &sorted(&c.samples))
            };
            Some(ClassComparison {
                class: name.to_string(),
                mean_rel_delta: rel(c.moments.mean, r.moments.mean),
                variance_rel_delta: rel(c.moments.variance, r.moments.variance),
                skewness_delta: c.moments.skewness - r.moments.skewness,
                kurtosis_delta: c.moments.kurtosis - r.moments.kurtosis,
                ks_distance: ks,
            })
        })
        .collect();
    Comparison {
        reference: reference.method.name().into(),
        candidate: candidate.method.name().into(),
        solve_ratio: candidate.deterministic_solves as f64 / reference.deterministic_solves as f64,
        classes,
    }
}

/// Writes `report.json`, `report.md`, one CDF file per class and method,
/// `comparison.csv` when methods were compared, and `pv_curve.csv` when
/// the mean-point curve was kept and `dump_trace` is set.
pub fn write_outputs(report: &AdcReport, dir: &Path, dump_trace: bool) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("report.json"), report.to_json())?;
    fs::write(dir.join("report.md"), markdown(report))?;
    for m in &report.methods {
        for (class, stats) in &m.classes {
            let mut csv = String::from("adc_mw,cumulative_probability\n");
            for (x, p) in &stats.cdf {
                writeln!(csv, "{x:.9},{p:.6}").unwrap();
            }
            fs::write(dir.join(format!("cdf_{class}_{}.csv", m.method.name())), csv)?;
        }
    }
    if !report.comparisons.is_empty() {
        let mut csv = String::from(
            "reference,candidate,class,mean_rel_delta,variance_rel_delta,skewness_delta,kurtosis_delta,ks_distance,solve_ratio\n",
        );
        for c in &report.comparisons {
            for k in &c.classes {
                writeln!(
                    csv,
                    "{},{},{},{:.6e},{:.6e},{:.6e},{:.6e},{:.6},{:.6}",
                    c.reference,
                    c.candidate,
                    k.class,
                    k.mean_rel_delta,
                    k.variance_rel_delta,
                    k.skewness_delta,
                    k.kurtosis_delta,
                    k.ks_distance,
                    c.solve_ratio
                )
                .unwrap();
            }
        }
        fs::write(dir.join("comparison.csv"), csv)?;
    }
    if dump_trace {
        if let Some(trace) = report.mean_trace.as_ref().and_then(|r| r.trace.as_ref()) {
            let inc = report.mean_point.load_increase_mw;
            let mut csv = String::from("lambda,delivered_mw,min_voltage_pu,max_loading\n");
            for p in &trace.points {
                writeln!(
                    csv,
                    "{:.9},{:.9},{:.9},{:.9}",
                    p.lambda,
                    p.lambda * inc,
                    p.min_voltage(),
                    p.max_loading()
                )
                .unwrap();
            }
            fs::write(dir.join("pv_curve.csv"), csv)?;
        }
    }
    Ok(())
}

fn markdown(report: &AdcReport) -> String {
    let mut s = String::new();
    let mp = &report.mean_point;
    writeln!(s, "# ADC assessment: {}\n", report.feeder).unwrap();
    writeln!(s, "{} random inputs, seed {}.\n", report.inputs.len(), report.config.seed).unwrap();
    writeln!(s, "## Mean inputs\n").unwrap();
    writeln!(s, "| class | λ | ADC (MW) | element |").unwrap();
    writeln!(s, "|---|---|---|---|").unwrap();
    let none = "-".to_string();
    for (name, l, a, e) in [
        ("voltage", mp.lambda_voltage, mp.adc_voltage_mw, mp.voltage_element.as_ref().unwrap_or(&none)),
        ("thermal", mp.lambda_thermal, mp.adc_thermal_mw, mp.thermal_element.as_ref().unwrap_or(&none)),
        ("collapse", mp.lambda_collapse, mp.adc_collapse_mw, &none),
    ] {
        writeln!(s, "| {name} | {l:.6} | {a:.6} | {e} |").unwrap();
    }
    writeln!(s, "\nBinding limit: {}. Load increase along the direction: {:.6} MW.\n", mp.binding_limit, mp.load_increase_mw)
        .unwrap();

    writeln!(s, "## Statistics\n").unwrap();
    for class in CLASS_NAMES {
        writeln!(s, "### {class}\n").unwrap();
        writeln!(s, "| method | mean | variance | skewness | kurtosis | 95% interval |").unwrap();
        writeln!(s, "|---|---|---|---|---|---|").unwrap();
        for m in &report.methods {
            if let Some(c) = m.classes.get(class) {
                writeln!(
                    s,
                    "| {} | {:.6} | {:.6e} | {:.4} | {:.4} | [{:.6}, {:.6}] |",
                    m.method.name(),
                    c.moments.mean,
                    c.moments.variance,
                    c.moments.skewness,
                    c.moments.kurtosis,
                    c.ci95.lower,
                    c.ci95.upper
                )
                .unwrap();
            }
        }
        writeln!(s).unwrap();
    }

    writeln!(s, "## Cost\n").unwrap();
    writeln!(s, "| method | deterministic solves | failures | wall clock (s) |").unwrap();
    writeln!(s, "|---|---|---|---|").unwrap();
    for m in &report.methods {
        let flag = if m.unreliable { " (unreliable)" } else { "" };
        writeln!(
            s,
            "| {} | {} | {}{flag} | {:.2} |",
            m.method.name(),
            m.deterministic_solves,
            m.failures.len(),
            m.wall_clock_s
        )
        .unwrap();
    }
    for m in &report.methods {
        writeln!(s, "\n{} overall ADC: {}.", m.method.name(), m.overall_rule).unwrap();
        if let Some(d) = &m.design {
            writeln!(s, "Design: {d}.").unwrap();
        }
        let clipped: Vec<String> = m
            .classes
            .iter()
            .filter(|(_, c)| c.clip_fraction > 0.0)
            .map(|(k, c)| format!("{k} {:.4}", c.clip_fraction))
            .collect();
        if !clipped.is_empty() {
            writeln!(s, "Surrogate samples clipped at zero: {}.", clipped.join(", ")).unwrap();
        }
    }

    if !report.comparisons.is_empty() {
        writeln!(s, "\n## Comparison\n").unwrap();
        writeln!(s, "| reference | candidate | class | Δmean | Δvariance | Δskewness | Δkurtosis | KS |").unwrap();
        writeln!(s, "|---|---|---|---|---|---|---|---|").unwrap();
        for c in &report.comparisons {
            for k in &c.classes {
                writeln!(
                    s,
                    "| {} | {} | {} | {:+.4}% | {:+.2}% | {:+.4} | {:+.4} | {:.4} |",
                    c.reference,
                    c.candidate,
                    k.class,
                    100.0 * k.mean_rel_delta,
                    100.0 * k.variance_rel_delta,
                    k.skewness_delta,
                    k.kurtosis_delta,
                    k.ks_distance
                )
                .unwrap();
            }
        }
    }

    writeln!(s, "\n## Binding elements\n").unwrap();
    for m in &report.methods {
        let parts: Vec<String> = m.binding_frequency.iter().map(|(k, v)| format!("{k}: {v}")).collect();
        writeln!(s, "- {}: {}", m.method.name(), parts.join(", ")).unwrap();
    }
    s
}
