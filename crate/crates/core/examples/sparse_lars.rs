//! Recovers a sparse expansion in 12 dimensions from few samples with LARS,
//! for a fixed term budget and for the leave-one-out stopping rule.
//!
//! cargo run --example sparse_lars

use adc_core::chaos::{fit_sparse, hermite, DesignMatrix, PceConfig, SparseTarget};
use adc_core::stochastic::standard_normal_points;

fn main() -> adc_core::Result<()> {
    let config = PceConfig::new(12, 2)?;
    let basis = config.basis();
    let truth = [(0usize, 0.9), (1, 0.12), (5, -0.07), (13, 0.02), (40, 0.01)];
    let design = DesignMatrix::new(config, standard_normal_points(12, 40, 5))?;
    let y: Vec<f64> = design
        .points
        .iter()
        .map(|xi| truth.iter().map(|(k, c)| c * hermite(&basis[*k], xi)).sum())
        .collect();
    println!("{} candidate terms, {} samples", basis.len(), y.len());

    for target in [SparseTarget::Fixed(5), SparseTarget::Auto] {
        let m = fit_sparse(&design, &y, target)?;
        println!(
            "\n{target:?}: {} terms, loo error {:?}",
            m.active_count(),
            m.diagnostics.loo_error
        );
        for (k, c) in truth {
            println!("  {:?}  true {c:+.3}  fitted {:+.6}", basis[k].0, m.coefficient(&basis[k]));
        }
    }
    Ok(())
}
