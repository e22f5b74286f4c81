//! Prints the interaction map of two patterns as a text heatmap plus force.
//!
//!     cargo run -p mixel-core --example interaction_map -- checkerboard

use mixel_core::interaction::{
    classify, interaction_map, ForceModel, Interaction, DEFAULT_EPSILON,
};
use mixel_core::pattern::{checkerboard, complement, sylvester_hadamard};

fn glyph(v: f64) -> char {
    match classify(v, DEFAULT_EPSILON) {
        Interaction::Attract if v <= -0.75 => '#',
        Interaction::Attract => '+',
        Interaction::Repel if v >= 0.75 => 'X',
        Interaction::Repel => 'x',
        Interaction::Agnostic => '.',
    }
}

fn main() -> mixel_core::Result<()> {
    let which = std::env::args().nth(1).unwrap_or_else(|| "hadamard".into());
    let a = match which.as_str() {
        "checkerboard" => checkerboard(8, 8)?,
        _ => sylvester_hadamard(8)?,
    };
    let b = complement(&a);
    let map = interaction_map(&a, &b)?;

    println!(
        "{which} vs complement, dx {:?}, dy {:?}",
        map.dx_range(),
        map.dy_range()
    );
    println!("# strong attract, + attract, . agnostic, x repel, X strong repel");
    for dy in map.dy_range() {
        let line: String = map
            .dx_range()
            .map(|dx| glyph(map.get(dx, dy).unwrap()))
            .collect();
        println!("  {line}");
    }

    let model = ForceModel::default();
    for (dx, dy) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
        let f = model.between(&a, &b, dx, dy)?;
        println!(
            "offset ({dx}, {dy}): ncc {:+.3}, force {:+.3} N",
            map.get(dx, dy).unwrap(),
            f.newtons
        );
    }
    Ok(())
}
