//! Tiles a token into a canvas of attract / repel / agnostic metapixels.
//!
//!     cargo run -p mixel-core --example canvas

use mixel_core::interaction::Interaction::{self, Agnostic, Attract, Repel};
use mixel_core::pairs::canvas_compile;
use mixel_core::pattern::sylvester_hadamard;

fn main() -> mixel_core::Result<()> {
    let token = sylvester_hadamard(4)?;
    let layout: [[Interaction; 3]; 2] = [[Attract, Agnostic, Repel], [Repel, Attract, Agnostic]];
    let canvas = canvas_compile(&token, &layout)?;

    println!("{}x{} canvas", canvas.canvas.rows(), canvas.canvas.cols());
    for r in 0..canvas.meta_rows {
        for c in 0..canvas.meta_cols {
            println!(
                "block ({r}, {c}) {:?}: token ncc {:+.3}",
                canvas.assignment(r, c),
                canvas.measure_block(r, c)?
            );
        }
    }
    Ok(())
}
