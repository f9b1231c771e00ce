//! Probabilistic ADC of the bundled feeder with all three methods. The
//! sample count is the first argument (default 2000); reports go to the
//! directory given second (default ./adc-report).
//!
//! cargo run --release --example probabilistic_adc -- 2000 out

use std::path::PathBuf;

use adc_core::assessment::{assess, write_outputs, AssessmentConfig, Method};
use adc_core::data::{ieee13_feeder, ieee13_scenario};

fn main() -> adc_core::Result<()> {
    let mut args = std::env::args().skip(1);
    let samples = args.next().and_then(|s| s.parse().ok()).unwrap_or(2000);
    let out = PathBuf::from(args.next().unwrap_or_else(|| "adc-report".into()));
    let config = AssessmentConfig {
        method: Method::All,
        mcs_samples: samples,
        surrogate_samples: 10_000,
        ..Default::default()
    };
    let report = assess(&ieee13_feeder()?, &ieee13_scenario()?, &config)?;
    write_outputs(&report, &out, false)?;

    println!("method  solves   voltage mean / std (MW)");
    for m in &report.methods {
        let v = &m.classes["voltage"];
        println!(
            "{:<7} {:>6}   {:.5} / {:.5}",
            m.method.name(),
            m.deterministic_solves,
            v.moments.mean,
            v.moments.variance.sqrt()
        );
    }
    for c in &report.comparisons {
        let v = c.classes.iter().find(|k| k.class == "voltage").unwrap();
        println!("{} vs {}: KS {:.4}", c.candidate, c.reference, v.ks_distance);
    }
    println!("reports in {}", out.display());
    Ok(())
}
