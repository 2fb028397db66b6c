//! Dispersion-matrix search under the three criteria, plus save and reload.

use pmsim::metrics::diversity_coding_gain;
use pmsim::numerics::SimRng;
use pmsim::schemes::{dm_optimize, DispersionMatrixSet, DmCriterion, Scheme, SchemeConfig, SchemeKind};

fn main() -> pmsim::Result<()> {
    let cfg = SchemeConfig { dm_budget: 1, ..SchemeConfig::gstsk(SchemeKind::Astsk, 2, 1, 2, 4, 1) };
    let mut scheme = Scheme::build(&cfg)?;
    for (criterion, budget) in [(DmCriterion::MinDet, 2000), (DmCriterion::Med, 2000), (DmCriterion::ConstrainedAmi, 40)] {
        let set = dm_optimize(&scheme, criterion, budget, &mut SimRng::new(7))?;
        scheme.dm_set = Some(set);
        let book = pmsim::harness::transmit_codebook(&scheme)?;
        let (d, g) = diversity_coding_gain(&book, 1)?;
        println!("{criterion:?} with {budget} candidates: diversity {d}, coding gain {g:.4}");
    }

    let path = std::env::temp_dir().join("pmsim-astsk.dm");
    let set = scheme.dm_set.as_ref().expect("set chosen above");
    set.save(&path)?;
    let back = DispersionMatrixSet::load(&path)?;
    println!("saved {} matrices to {}, reload identical: {}", back.q(), path.display(), &back == set);
    Ok(())
}
