//! Compiles a pattern into a plot program and prints the job estimate.
//!
//!     cargo run -p mixel-core --example toolpath -- pattern.mixel.json

use mixel_core::io::read_pattern_file;
use mixel_core::pattern::sylvester_hadamard;
use mixel_core::toolpath::{
    compile_plot, compile_scan, emit_program, estimate_job, PowerModel, DEFAULT_FEED_MM_PER_MIN,
};

fn main() -> mixel_core::Result<()> {
    let grid = match std::env::args().nth(1) {
        Some(p) => read_pattern_file(p.as_ref())?.0,
        None => sylvester_hadamard(2)?,
    };
    let plot = compile_plot(&grid, (0.0, 0.0), DEFAULT_FEED_MM_PER_MIN);
    plot.validate()?;
    print!("{}", emit_program(&plot));

    let power = PowerModel::default();
    let est = estimate_job(&plot, &power)?;
    eprintln!(
        "plot: {} written, {} skipped, {:.1} s, {:.0} J",
        est.pixels_written, est.pixels_skipped, est.duration_s, est.energy_j
    );
    let scan = estimate_job(
        &compile_scan(
            grid.rows(),
            grid.cols(),
            (0.0, 0.0),
            DEFAULT_FEED_MM_PER_MIN,
        ),
        &power,
    )?;
    eprintln!("scan: {} reads, {:.1} s", scan.pixels_read, scan.duration_s);
    Ok(())
}
