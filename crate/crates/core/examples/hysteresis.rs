//! Electromagnet B-H sweep and sheet hysteresis loops, written as CSV.
//!
//!     cargo run -p mixel-core --example hysteresis -- /tmp/loops

use std::fs;
use std::path::PathBuf;

use mixel_core::magnet::{
    emag_field, program_pixel, trace_hysteresis_loop, ElectromagnetModel, PixelState, SheetModel,
};

fn main() -> mixel_core::Result<()> {
    let out = PathBuf::from(
        std::env::args()
            .nth(1)
            .unwrap_or_else(|| "target/hysteresis".into()),
    );
    fs::create_dir_all(&out)?;

    let head = ElectromagnetModel::default();
    println!("electromagnet:");
    for i in [0.0, 2.0, 4.0, 6.0, 8.0, 10.0] {
        println!("  {i:>4.1} A -> {:.4} T", emag_field(&head, i)?);
    }

    let sheet = SheetModel::default();
    println!("coercive current {:.3} A", sheet.i_coercive());
    for peak in [3.3, 6.6, 10.0] {
        let lp = trace_hysteresis_loop(&sheet, peak, 50)?;
        let path = out.join(format!("loop_{peak}A.csv"));
        fs::write(&path, lp.to_csv()?)?;
        println!(
            "loop to {peak:>4.1} A: remanence {:.3}, area {:.3}, {}",
            sheet.descending(peak, 0.0),
            lp.signed_area(),
            path.display()
        );
    }

    let mut px = PixelState::DEMAGNETIZED;
    for pulse in [10.0, -sheet.i_coercive(), -10.0, 3.3] {
        px = program_pixel(&sheet, px, pulse)?;
        println!(
            "pulse {pulse:+.3} A -> m {:+.3} ({:+.4} T)",
            px.m(),
            px.flux(&sheet)
        );
    }
    Ok(())
}
