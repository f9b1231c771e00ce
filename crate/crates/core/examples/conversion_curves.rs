//! Tabulates the wind and solar conversion curves of the bundled scenario.
//!
//! cargo run --example conversion_curves

use adc_core::data::{ieee13_feeder, ieee13_scenario};
use adc_core::stochastic::{solar_power, wind_power, wind_reactive, StochasticModel};

fn main() -> adc_core::Result<()> {
    let model = ieee13_feeder()?;
    let sm = StochasticModel::new(&ieee13_scenario()?, &model)?;

    for w in sm.wind_params() {
        println!(
            "wind turbine at {} ({} kW, cut-in {} m/s, rated {} m/s, cut-out {} m/s)",
            w.bus, w.p_rated_kw, w.v_in, w.v_rated, w.v_out
        );
        println!("  v (m/s)     P (kW)    Q (kvar)");
        for v in [0.0, 4.0, 6.0, 8.0, 10.0, 12.0, 15.0, 20.0, 25.0, 26.0] {
            let p = wind_power(v, w);
            println!("  {v:>7.1} {p:>10.3} {:>11.3}", wind_reactive(p, w.power_factor_angle));
        }
    }
    for s in sm.solar_params() {
        println!(
            "\nPV array at {} ({} kW, knee {} W/m², rated at {} W/m²)",
            s.bus, s.p_rated_kw, s.r_c, s.r_std
        );
        println!("  r (W/m²)    P (kW)");
        for r in [0.0, 50.0, 150.0, 300.0, 500.0, 1000.0, 1200.0] {
            println!("  {r:>8.0} {:>9.3}", solar_power(r, s));
        }
    }
    Ok(())
}
