//! Minimum Euclidean distance of several codebooks at unit power per channel use.

use pmsim::constellation::ConstellationKind;
use pmsim::metrics::{med, med_selector};
use pmsim::schemes::{Scheme, SchemeConfig, SchemeKind};

fn main() -> pmsim::Result<()> {
    let rows = [
        ("BLAST M=8 QPSK", SchemeConfig { l: 4, ..SchemeConfig::new(SchemeKind::Blast, 8) }),
        ("GSM(8,6) QPSK", SchemeConfig { l: 4, p: Some(6), ..SchemeConfig::new(SchemeKind::Gsm, 8) }),
        ("GSM(8,4) 16QAM", SchemeConfig { l: 16, p: Some(4), constellation: Some(ConstellationKind::Qam), ..SchemeConfig::new(SchemeKind::Gsm, 8) }),
        ("SM M=4 BPSK", SchemeConfig::new(SchemeKind::Sm, 4)),
        ("APSK 8PSK", SchemeConfig { l: 8, ..SchemeConfig::new(SchemeKind::Apsk, 1) }),
    ];
    println!("{:<18} {:>5} {:>10}", "scheme", "rate", "MED");
    for (name, cfg) in rows {
        let s = Scheme::build(&cfg)?;
        println!("{name:<18} {:>5} {:>10.4}", s.rate(), med_selector(&s)?);
    }

    // codebooks without selector structure go through the pairwise search
    let nc = Scheme::build(&SchemeConfig { dm_budget: 500, ..SchemeConfig::gstsk(SchemeKind::Ncgsm, 2, 1, 2, 4, 2) })?;
    let book = pmsim::harness::transmit_codebook(&nc)?;
    println!("{:<18} {:>5} {:>10.4}", "NCGSM(2,1,2,4,2)", nc.rate(), med(&book, None)?);
    Ok(())
}
