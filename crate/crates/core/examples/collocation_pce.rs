//! Fits a full second-order chaos expansion to an analytic test function on
//! the collocation design and compares its moments with sampling.
//!
//! cargo run --example collocation_pce

use adc_core::chaos::{collocation_design, evaluate, fit_full, DesignMatrix, PceConfig};
use adc_core::stats::moments;
use adc_core::stochastic::standard_normal_points;

fn response(x: &[f64]) -> f64 {
    1.0 + 0.4 * x[0] - 0.3 * x[1] * x[2] + 0.05 * (0.8 * x[3]).exp()
}

fn main() -> adc_core::Result<()> {
    let config = PceConfig::new(4, 2)?;
    let points = collocation_design(&config, None)?;
    println!("{} basis terms, {} collocation rows", config.basis_size(), points.len());
    let design = DesignMatrix::new(config, points)?;
    let y: Vec<f64> = design.points.iter().map(|x| response(x)).collect();
    let model = fit_full(&design, &y)?;

    println!("\nlargest terms:");
    let mut terms: Vec<_> = model.active_terms().collect();
    terms.sort_by(|a, b| b.coefficient.abs().total_cmp(&a.coefficient.abs()));
    for t in terms.iter().take(6) {
        println!("  {:?} {:+.5}", t.index.0, t.coefficient);
    }

    let xi = standard_normal_points(4, 100_000, 1);
    let truth = moments(&xi.iter().map(|x| response(x)).collect::<Vec<_>>());
    let surrogate = moments(&evaluate(&model, &xi));
    println!("\n            mean      variance");
    println!("sampled   {:.5}   {:.5}", truth.mean, truth.variance);
    println!("surrogate {:.5}   {:.5}", surrogate.mean, surrogate.variance);
    println!("analytic  {:.5}   {:.5}", model.analytic_mean(), model.analytic_variance());
    Ok(())
}
