//! Solves the bundled feeder at the base point and prints node voltages and
//! branch loadings.
//!
//! cargo run --example base_power_flow

use adc_core::data::ieee13_feeder;
use adc_core::feeder::build_admittance;
use adc_core::powerflow::{branch_currents, network_losses, PowerFlow, SolveOptions};
use adc_core::stochastic::VariationVector;

fn main() -> adc_core::Result<()> {
    let model = ieee13_feeder()?;
    let y = build_admittance(&model)?;
    let pf = PowerFlow::new(&model, &y, &VariationVector::zeros(model.node_count()))?;
    let out = pf.solve_detailed(0.0, None, &SolveOptions::default())?;
    let s = &out.state;
    let history: Vec<String> = out.history.iter().map(|m| format!("{m:.1e}")).collect();
    println!("converged in {} iterations, mismatch {}", out.iterations, history.join(" → "));

    println!("\nnode     |V| (p.u.)  angle (deg)");
    for i in 0..model.node_count() {
        println!("{:<8} {:>10.5} {:>12.3}", model.node_label(i), s.vm[i], s.theta[i].to_degrees());
    }
    let (node, vmin) = s.min_voltage();
    println!("\nlowest voltage {vmin:.5} p.u. at {}", model.node_label(node));

    println!("\nbranch  phase    amps   rating  loading");
    for c in branch_currents(&model, &y, s) {
        println!(
            "{:<7} {:>5?} {:>7.1} {:>8.1} {:>7.1}%",
            model.branches()[c.branch].id,
            c.phase,
            c.amps,
            c.ampacity,
            100.0 * c.loading()
        );
    }
    let losses = network_losses(&model, &y, s) * adc_core::feeder::BASE_KVA_PHASE;
    println!("\nlosses {:.2} kW + j{:.2} kvar", losses.re, losses.im);
    Ok(())
}
