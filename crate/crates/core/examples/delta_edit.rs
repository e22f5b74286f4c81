//! Saves a pattern, edits two pixels, and plots only the difference.
//!
//!     cargo run -p mixel-core --example delta_edit -- /tmp/mixel

use std::path::PathBuf;

use mixel_core::io::{diff_delta, read_pattern_file, write_pattern_file, Metadata};
use mixel_core::pattern::sylvester_hadamard;
use mixel_core::plotter::PlotterSession;
use mixel_core::toolpath::{
    compile_plot, emit_program, estimate_job, PowerModel, DEFAULT_FEED_MM_PER_MIN,
};

fn main() -> mixel_core::Result<()> {
    let dir = PathBuf::from(
        std::env::args()
            .nth(1)
            .unwrap_or_else(|| "target/delta_edit".into()),
    );
    std::fs::create_dir_all(&dir)?;
    let power = PowerModel::default();

    let original = sylvester_hadamard(8)?;
    let base = dir.join("base.mixel.json");
    write_pattern_file(
        &base,
        &original,
        &Metadata::from([("name".into(), "h8".into())]),
    )?;

    let mut device = PlotterSession::with_size(8, 8, 1)?;
    let full = compile_plot(&original, (0.0, 0.0), DEFAULT_FEED_MM_PER_MIN);
    device.run_program(&emit_program(&full));
    println!(
        "full plot: {:.1} s",
        estimate_job(&full, &power)?.duration_s
    );

    let (mut edited, _) = read_pattern_file(&base)?;
    edited.set(0, 0, -1.0)?;
    edited.set(4, 4, 0.0)?;
    let delta = diff_delta(&original, &edited)?;
    write_pattern_file(&dir.join("delta.mixel.json"), &delta, &Metadata::new())?;

    let job = compile_plot(&delta, (0.0, 0.0), DEFAULT_FEED_MM_PER_MIN);
    let est = estimate_job(&job, &power)?;
    device.run_program(&emit_program(&job));
    println!(
        "delta plot: {} written, {} skipped, {:.1} s",
        est.pixels_written, est.pixels_skipped, est.duration_s
    );
    println!("sheet matches edit: {}", device.snapshot_sheet() == edited);
    Ok(())
}
