//! Plots a pattern on the simulated plotter, scans it back and compares.
//!
//!     cargo run -p mixel-core --example virtual_plotter -- 0.18 7

use mixel_core::pattern::sylvester_hadamard;
use mixel_core::plotter::{parse_reading, HallSensorModel, PlotterSession, VirtualSheet};
use mixel_core::protocol::{parse_line, ProtocolLine};
use mixel_core::toolpath::{compile_plot, compile_scan, emit_program, DEFAULT_FEED_MM_PER_MIN};

fn main() -> mixel_core::Result<()> {
    let mut args = std::env::args().skip(1);
    let sigma: f64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(0.18);
    let seed: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(7);

    let target = sylvester_hadamard(8)?;
    let sheet = VirtualSheet::new(8, 8, (0.0, 0.0))?;
    let mut device = PlotterSession::new(sheet, HallSensorModel::with_sigma(sigma), seed);

    let plot = emit_program(&compile_plot(&target, (0.0, 0.0), DEFAULT_FEED_MM_PER_MIN));
    let errors = device
        .run_program(&plot)
        .into_iter()
        .filter(|r| r != "ok")
        .count();
    println!(
        "plotted {} lines, {errors} errors, {:.1} s of dwell",
        plot.lines().count(),
        device.dwell_s
    );

    let scan = emit_program(&compile_scan(8, 8, (0.0, 0.0), DEFAULT_FEED_MM_PER_MIN));
    let mut readings = [[0.0f64; 8]; 8];
    for line in scan.lines() {
        let reply = device.handle_command(line);
        if let Ok(ProtocolLine::Hall { row, col }) = parse_line(line) {
            readings[row][col] = parse_reading(&reply).unwrap_or(f64::NAN);
        }
    }
    let mut wrong = 0;
    for (r, row) in readings.iter().enumerate() {
        let text: Vec<String> = row.iter().map(|v| format!("{v:+.2}")).collect();
        println!("{}", text.join(" "));
        wrong += (0..8)
            .filter(|&c| row[c].signum() != target.get(r, c))
            .count();
    }
    println!("{wrong} of 64 pixels misread at sigma {sigma}");
    Ok(())
}
