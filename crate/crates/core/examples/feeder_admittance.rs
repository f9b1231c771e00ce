//! Loads the bundled feeder, builds its nodal admittance matrix and prints
//! the diagonal block of a chosen bus.
//!
//! cargo run --example feeder_admittance -- 671

use adc_core::data::ieee13_feeder;
use adc_core::feeder::{build_admittance, Phase};

fn main() -> adc_core::Result<()> {
    let bus = std::env::args().nth(1).unwrap_or_else(|| "671".into());
    let model = ieee13_feeder()?;
    let y = build_admittance(&model)?;
    let (p, q) = model.total_load();
    println!(
        "{}: {} buses, {} branches, {} nodes, {} stored entries",
        model.name(),
        model.buses().len(),
        model.branches().len(),
        model.node_count(),
        y.nonzeros()
    );
    println!("spot load {p:.3} MW + j{q:.3} Mvar");

    let nodes: Vec<usize> = Phase::ALL.iter().filter_map(|&ph| model.node_by_id(&bus, ph)).collect();
    if nodes.is_empty() {
        eprintln!("no bus {bus}");
        std::process::exit(1);
    }
    println!("\nY block of bus {bus} (p.u.):");
    for &i in &nodes {
        let row: Vec<String> = nodes
            .iter()
            .map(|&j| {
                let v = y.get(i, j);
                format!("{:>9.3}{:+9.3}j", v.re, v.im)
            })
            .collect();
        println!("  {:<6} {}", model.node_label(i), row.join("  "));
    }
    println!("\nneighbours of {}:", model.node_label(nodes[0]));
    for &(j, v) in y.row(nodes[0]) {
        if j != nodes[0] {
            println!("  {:<6} |y| = {:.3}", model.node_label(j), v.norm());
        }
    }
    Ok(())
}
