//! Builds a Sylvester Hadamard key, its complement lock, and a small pair set.
//!
//!     cargo run -p mixel-core --example hadamard_pairs -- 8 3 64 1

use mixel_core::interaction::ncc_at;
use mixel_core::pairs::{generate_pair_set, PairMode};
use mixel_core::pattern::{complement, orthogonality_defect, sylvester_hadamard, PixelGrid};

fn show(label: &str, g: &PixelGrid) {
    println!("{label}:");
    for r in 0..g.rows() {
        let row: String = g
            .row(r)
            .iter()
            .map(|&v| if v > 0.0 { " +" } else { " -" })
            .collect();
        println!("  {row}");
    }
}

fn main() -> mixel_core::Result<()> {
    let args: Vec<usize> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let order = args.first().copied().unwrap_or(8);
    let k = args.get(1).copied().unwrap_or(3);
    let candidates = args.get(2).copied().unwrap_or(64);
    let seed = args.get(3).copied().unwrap_or(1) as u64;

    let key = sylvester_hadamard(order)?;
    let lock = complement(&key);
    show("key", &key);
    println!("orthogonality defect {:.3}", orthogonality_defect(&key)?);
    println!(
        "aligned ncc(key, lock) = {:+.3}",
        ncc_at(&key, &lock, 0, 0)?
    );
    println!(
        "ncc one pixel to the right = {:+.3}",
        ncc_at(&key, &lock, 1, 0)?
    );

    let set = generate_pair_set(k, order, candidates, PairMode::Attract, seed)?;
    println!(
        "\n{} pairs from {} candidates: worst off-target |ncc| {:.3}, mean {:.3}",
        set.pairs.len(),
        set.candidates,
        set.score,
        set.mean_off_target
    );
    for (i, p) in set.pairs.iter().enumerate() {
        println!("pair {i}: rows {:?}", p.permutation.as_slice());
    }
    Ok(())
}
