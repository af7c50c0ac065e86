//! Prints each figure panel's fraction under the reference and check seeds.
//!
//! `cargo run --release --example figure_references`

use noisectl::figures::{panels, CHECK_SEED, REFERENCE_SEED};

fn main() -> noisectl::Result<()> {
    println!("figure,label,metric,pinned,reference_seed,check_seed");
    for p in panels() {
        let a = p.fraction(REFERENCE_SEED, 0)?;
        let b = p.fraction(CHECK_SEED, 0)?;
        println!("{},{},{:?},{:.3},{a:.3},{b:.3}", p.figure, p.label, p.metric, p.reference);
    }
    Ok(())
}
