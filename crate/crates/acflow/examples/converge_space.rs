//! Spatial convergence study against the manufactured solution.
//!
//! Desk scale by default: h in {1/8, 1/16, 1/32} at dt = 1e-4 over a short
//! horizon. `--paper` switches to the published protocol (h up to 1/128 at
//! dt = 1e-5, horizon 1) — hours, not minutes.
//!
//! ```text
//! cargo run --release --example converge_space
//! ```

use acflow::output::convergence_table_text;
use acflow::verify::{run_convergence, StudyAxis, StudyConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let paper = std::env::args().any(|a| a == "--paper");
    let mut cfg = StudyConfig::desk_default(StudyAxis::Space);
    if paper {
        cfg.levels = vec![1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0, 1.0 / 128.0];
        cfg.fixed_dt = 1e-5;
        cfg.horizon = 1.0;
    }
    println!(
        "spatial study: h = {:?}, dt = {:.1e}, horizon = {}",
        cfg.levels, cfg.fixed_dt, cfg.horizon
    );
    let start = std::time::Instant::now();
    let table = run_convergence(&cfg)?;
    println!("finished in {:.1?}\n", start.elapsed());
    print!("{}", convergence_table_text(&table));
    println!(
        "L2 rates: u {:.2} w {:.2} phi {:.2} (third order), xi {:.2} p {:.2} (second order)",
        table.rate_l2("u"),
        table.rate_l2("w"),
        table.rate_l2("phi"),
        table.rate_l2("xi"),
        table.rate_l2("p"),
    );
    println!(
        "H1 rates: u {:.2} phi {:.2} (second order), xi {:.2} p {:.2} (first order)",
        table.rate_h1("u"),
        table.rate_h1("phi"),
        table.rate_h1("xi"),
        table.rate_h1("p"),
    );
    Ok(())
}
