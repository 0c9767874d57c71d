//! Temporal convergence study against the manufactured solution.
//!
//! Defaults to the desk-scale setup (h = 1/32, k = 1/4 .. 1/32, horizon 1).
//! Pass `--paper` for the published resolution (h = 1/64); expect a long run.
//!
//! ```text
//! cargo run --release --example converge_time
//! ```

use acflow::output::convergence_table_text;
use acflow::verify::{run_convergence, StudyAxis, StudyConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let paper = std::env::args().any(|a| a == "--paper");
    let mut cfg = StudyConfig::desk_default(StudyAxis::Time);
    if paper {
        cfg.fixed_h = 1.0 / 64.0;
    }
    println!(
        "temporal study: h = {:.5}, k = {:?}, theta = {}, horizon = {}",
        cfg.fixed_h, cfg.levels, cfg.theta, cfg.horizon
    );
    let start = std::time::Instant::now();
    let table = run_convergence(&cfg)?;
    println!("finished in {:.1?}\n", start.elapsed());
    print!("{}", convergence_table_text(&table));
    println!(
        "fitted L2 rates: u {:.2}, phi {:.2} (second-order family, published run saw 2.28 / 1.93)",
        table.rate_l2("u"),
        table.rate_l2("phi"),
    );
    Ok(())
}
