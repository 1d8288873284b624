// Return map and rotational cycles of the classic model with a lead-lag
// loop filter, where a stable and an unstable cycle coexist with the
// locked equilibrium.

use costas_lab::analysis::{find_limit_cycles, return_map, CycleSearch};
use costas_lab::experiments::{bistable_params, bistable_section_config, BISTABLE_SECTION};
use costas_lab::Result;

pub fn run() -> Result<()> {
    let p = bistable_params();
    let cfg = bistable_section_config();

    println!("x_in        P(x_in) - x_in");
    for i in 0..=8 {
        let x = 0.001 * i as f64;
        match return_map(&p, x, BISTABLE_SECTION, &cfg)?.x_out() {
            Some(y) => println!("{x:.4}      {:+.3e}", y - x),
            None => println!("{x:.4}      captured"),
        }
    }

    let search = CycleSearch {
        grid_points: 400,
        ..CycleSearch::default()
    };
    let report = find_limit_cycles(&p, (0.0, 0.02), BISTABLE_SECTION, &cfg, &search)?;
    for c in &report.cycles {
        println!(
            "{:?} cycle at x = {:.8}, multiplier {:.4}, period {:.4} s, residual {:.1e}",
            c.stability, c.fixed_point_x, c.multiplier, c.period, c.residual
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run()
}
