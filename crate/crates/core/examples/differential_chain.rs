//! Differential encoding: data matrices, the S(i) = S(i-1) X(i) chain, and non-coherent detection.

use pmsim::detection::ml_differential;
use pmsim::numerics::{gauss_matrix, SimRng};
use pmsim::schemes::{DifferentialState, Scheme, SchemeConfig, SchemeKind};

fn main() -> pmsim::Result<()> {
    let bdsm = Scheme::build(&SchemeConfig { symbols: Some(1), l: 4, ..SchemeConfig::new(SchemeKind::Bdsm, 3) })?;
    let set = bdsm.dm_set.as_ref().expect("dispersion matrices");
    println!("BDSM M=3: {} permutation patterns, rate {}", set.q(), bdsm.rate());
    for (q, a) in set.matrices.iter().enumerate() {
        let rows: Vec<Vec<f64>> = (0..3).map(|r| (0..3).map(|c| a[(r, c)].re).collect()).collect();
        println!("  A{q} = {rows:?}");
    }

    let nc = Scheme::build(&SchemeConfig { n: 2, ..SchemeConfig::gstsk(SchemeKind::Ncgsm, 2, 2, 2, 4, 2) })?;
    let book = nc.codebook()?;
    let mut rng = SimRng::new(4);
    let mut state = DifferentialState::new(2);
    let h = gauss_matrix(&mut rng, 2, 2, 1.0);
    let sigma2 = 0.01;
    let mut y_prev = &(&h * &state.s) + &gauss_matrix(&mut rng, 2, 2, sigma2);
    let mut errors = 0;
    let blocks = 10_000;
    for _ in 0..blocks {
        let k = rng.below(book.len());
        let s = state.step(&book[k].s)?;
        let y = &(&h * &s) + &gauss_matrix(&mut rng, 2, 2, sigma2);
        if ml_differential(&y, &y_prev, &book)?.detected_index != k {
            errors += 1;
        }
        y_prev = y;
    }
    println!(
        "NCGSM(2,2,2,4,2) over a static channel: {errors} block errors in {blocks}, state unitarity defect {:.2e}",
        state.s.unitarity_defect()
    );
    Ok(())
}
