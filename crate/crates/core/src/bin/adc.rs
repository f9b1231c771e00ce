use std::path::PathBuf;
use std::process::ExitCode;

use adc_core::assessment::{assess, write_outputs, AssessmentConfig, Method};
use adc_core::chaos::SparseTarget;
use adc_core::feeder::FeederModel;
use adc_core::stochastic::Scenario;
use adc_core::Error;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "adc", about = "Probabilistic available delivery capability of a distribution feeder")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an assessment and write reports to the output directory.
    Run {
        #[arg(long)]
        feeder: PathBuf,
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, value_enum, default_value = "all")]
        method: Method,
        /// Monte Carlo realizations; also the surrogate sample count.
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Terms kept by the sparse fit (constant included), or `auto`.
        #[arg(long, default_value = "31", value_parser = parse_sparse)]
        sparse_terms: SparseTarget,
        /// Worker threads; 0 uses all cores.
        #[arg(long, default_value_t = 0)]
        workers: usize,
        /// Also write the mean-point PV curve.
        #[arg(long)]
        dump_trace: bool,
    },
}

fn parse_sparse(s: &str) -> Result<SparseTarget, String> {
    if s.eq_ignore_ascii_case("auto") {
        return Ok(SparseTarget::Auto);
    }
    match s.parse::<usize>() {
        Ok(m) if m >= 1 => Ok(SparseTarget::Fixed(m)),
        _ => Err(format!("expected a positive term count or `auto`, got `{s}`")),
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::BaseInfeasible(_) => 2,
        e if e.is_numerical() => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    env_logger::init();
    let Command::Run {
        feeder,
        scenario,
        method,
        samples,
        seed,
        out,
        sparse_terms,
        workers,
        dump_trace,
    } = Cli::parse().command;
    let result = (|| -> adc_core::Result<()> {
        let model = FeederModel::from_path(&feeder)?;
        let scenario = Scenario::from_path(&scenario)?;
        let config = AssessmentConfig {
            method,
            mcs_samples: samples,
            surrogate_samples: samples,
            sparse_target: sparse_terms,
            seed,
            workers,
            output_dir: Some(out.clone()),
            dump_trace,
            ..Default::default()
        };
        let report = assess(&model, &scenario, &config)?;
        write_outputs(&report, &out, dump_trace)?;
        for m in &report.methods {
            let o = &m.classes["overall"];
            println!(
                "{:<5} solves {:>6}  overall ADC mean {:.6} MW  var {:.3e}",
                m.method.name(),
                m.deterministic_solves,
                o.moments.mean,
                o.moments.variance
            );
        }
        println!("reports written to {}", out.display());
        Ok(())
    })();
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
