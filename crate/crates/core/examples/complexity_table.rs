//! Counted ML multiplications against the closed-form complexity expressions.

use pmsim::detection::{complexity_formula, ComplexityRow, SparseCodebook};
use pmsim::numerics::CMatrix;
use pmsim::schemes::{Scheme, SchemeConfig, SchemeKind};

fn main() -> pmsim::Result<()> {
    let cases = [
        SchemeConfig { l: 4, ..SchemeConfig::new(SchemeKind::Apsk, 1) },
        SchemeConfig { l: 4, n: 2, ..SchemeConfig::new(SchemeKind::Sm, 4) },
        SchemeConfig { p: Some(2), n: 2, ..SchemeConfig::new(SchemeKind::Gsm, 4) },
        SchemeConfig { n: 2, ..SchemeConfig::new(SchemeKind::Blast, 2) },
        SchemeConfig { dm_budget: 50, ..SchemeConfig::gstsk(SchemeKind::SquareGstsk, 2, 2, 2, 4, 2) },
        SchemeConfig { dm_budget: 50, ..SchemeConfig::gstsk(SchemeKind::Astsk, 4, 1, 2, 4, 1) },
        SchemeConfig { n: 2, ..SchemeConfig::new(SchemeKind::Bdsm, 2) },
        SchemeConfig { dm_budget: 50, ..SchemeConfig::gstsk(SchemeKind::Ncgsm, 2, 2, 2, 4, 2) },
        SchemeConfig { l: 4, ..SchemeConfig::new(SchemeKind::Dapsk, 1) },
    ];
    println!("{:<14} {:>5} {:>3} {:>10} {:>10}", "scheme", "R", "N", "counted", "formula");
    for cfg in cases {
        let s = Scheme::build(&cfg)?;
        let det = SparseCodebook::new(&s.codebook()?)?;
        let d = det.detect(&CMatrix::zeros(s.n(), s.t()), &CMatrix::zeros(s.n(), s.m()), &mut Vec::new())?;
        let row = ComplexityRow::for_scheme(s.kind())?;
        let want = complexity_formula(row, s.rate(), s.m(), s.n(), s.t(), s.p());
        println!("{:<14} {:>5} {:>3} {:>10} {:>10}", s.kind().name(), s.rate(), s.n(), d.mults_per_channel_use(s.t()), want);
    }
    Ok(())
}
