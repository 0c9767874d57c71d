//! A small bubble is absorbed by a large one on [0, 2π]² (curvature-driven
//! shrinking under the Allen-Cahn active-fluid dynamics).
//!
//! Desk default runs 32x32 cells to t = 1.2; `--paper` uses the 64x64 grid.
//!
//! ```text
//! cargo run --release --example bubble_shrink
//! ```

use acflow::config::RunConfig;
use acflow::driver::scenario_run;
use acflow::verify::ScenarioKind;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let paper = std::env::args().any(|a| a == "--paper");
    let config_text = if paper {
        "scenario = bubble_shrink\n"
    } else {
        "scenario = bubble_shrink\n[mesh]\nnx = 32\nny = 32\n"
    };
    let mut cfg = RunConfig::parse_str(config_text)?;
    cfg.scenario = Some(ScenarioKind::BubbleShrink);
    let resolved = cfg.resolve_scenario()?;
    let dir = cfg.output_dir("example-bubble-shrink");
    println!(
        "bubble shrink: {}x{} cells on [0,2pi]^2, radii 1.4 / 0.5, dt = {}, horizon = {}",
        resolved.nx, resolved.ny, resolved.scenario.dt, resolved.scenario.horizon
    );
    let start = std::time::Instant::now();
    let run = scenario_run(&resolved, false, Some(&dir), config_text)?;
    println!(
        "{} steps to t = {} in {:.1?}",
        run.result.accepted_steps,
        run.result.state.curr.t,
        start.elapsed()
    );
    // area fraction above the zero level set tracks the shrinking bubble
    let phi = &run.result.state.curr.phi;
    let frac = phi.iter().filter(|&&v| v > 0.0).count() as f64 / phi.len() as f64;
    println!("fraction of nodes with phi > 0 at final time: {frac:.3}");
    println!("outputs in {}", dir.display());
    Ok(())
}
