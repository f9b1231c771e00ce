//! Traces the PV curve of the bundled feeder at mean renewable output and
//! writes it as CSV to stdout, with the three ADC values on stderr.
//!
//! cargo run --release --example pv_curve > pv.csv

use adc_core::continuation::{trace_adc, ContinuationOptions};
use adc_core::data::{ieee13_feeder, ieee13_scenario};
use adc_core::feeder::build_admittance;
use adc_core::stochastic::{assemble_variation, StochasticModel};

fn main() -> adc_core::Result<()> {
    let model = ieee13_feeder()?;
    let y = build_admittance(&model)?;
    let sm = StochasticModel::new(&ieee13_scenario()?, &model)?;
    let b = assemble_variation(&sm.mean_realization(), &sm)?;
    let options = ContinuationOptions {
        keep_trace: true,
        ..Default::default()
    };
    let r = trace_adc(&model, &y, &b, &options)?;

    println!("lambda,delivered_mw,min_voltage_pu,max_loading");
    for p in &r.trace.as_ref().expect("trace kept").points {
        println!(
            "{:.6},{:.6},{:.6},{:.6}",
            p.lambda,
            p.lambda * r.load_increase_mw,
            p.min_voltage(),
            p.max_loading()
        );
    }
    eprintln!(
        "voltage {:.4} MW at {}, thermal {:.4} MW at {}, collapse {:.4} MW; binding {}",
        r.adc_voltage,
        r.voltage_element.as_deref().unwrap_or("-"),
        r.adc_thermal,
        r.thermal_element.as_deref().unwrap_or("-"),
        r.adc_collapse,
        r.binding_limit
    );
    eprintln!("{} corrector solves", r.corrector_solves);
    Ok(())
}
