//! Combination matrices, activation tables and permutation codebooks.

use pmsim::permutation::{activation_table, combination_matrix, pm_codebook, rank_permutation, unrank_permutation, IndexMode};

fn main() -> pmsim::Result<()> {
    let c = combination_matrix(4, 2)?;
    println!("C(4,2), {} rows:", c.rows.len());
    for row in &c.rows {
        println!("  {row:?}");
    }

    for mode in [IndexMode::Nbc, IndexMode::Lut] {
        let t = activation_table(4, 2, mode, None)?;
        println!("{mode:?} activation (1-based), {} index bits: {:?}", t.index_bits(), t.one_based());
    }

    let t = activation_table(8, 3, IndexMode::Lut, None)?;
    let mut use_count = vec![0; 8];
    for v in &t.vectors {
        for &i in v {
            use_count[i] += 1;
        }
    }
    println!("LUT for (8,3): {} patterns, per-antenna use {use_count:?}", t.vectors.len());

    let book = pm_codebook(&[0.0, 1.0, 2.0], &[2, 1, 1])?;
    println!("permutations of (0,0,1,2): {} codewords", book.len());
    for cw in book.codewords.iter().take(5) {
        println!("  {cw:?}");
    }

    for rank in [0, 5, 23] {
        let p = unrank_permutation(rank, 4)?;
        println!("Lehmer rank {rank} -> {p:?} -> {}", rank_permutation(&p)?);
    }
    Ok(())
}
