//! Pairwise error probability, the BER union bound and diversity analysis.

use pmsim::channels::{calibrate_power, snr_to_noise_variance};
use pmsim::metrics::{ber_union_bound, diversity_coding_gain, pep};
use pmsim::schemes::{Scheme, SchemeConfig, SchemeKind};

fn main() -> pmsim::Result<()> {
    let sm = Scheme::build(&SchemeConfig { n: 2, ..SchemeConfig::new(SchemeKind::Sm, 2) })?;
    let book = calibrate_power(&sm.codebook()?, sm.m(), sm.t())?;
    println!("SM(2,2) BPSK union bound:");
    for snr in [0.0, 10.0, 20.0, 30.0] {
        let s2 = snr_to_noise_variance(snr);
        println!("  {snr:>4} dB  {:.4e}   PEP(0,1) {:.4e}", ber_union_bound(&book, 2, s2)?, pep(&book[0].s, &book[1].s, 2, s2)?);
    }

    let cases = [
        ("BLAST M=2 BPSK, N=2", SchemeConfig { n: 2, ..SchemeConfig::new(SchemeKind::Blast, 2) }),
        ("ASTSK(2,1,2,4,1)", SchemeConfig { dm_budget: 500, ..SchemeConfig::gstsk(SchemeKind::Astsk, 2, 1, 2, 4, 1) }),
        ("NCGSM(2,2,2,4,2)", SchemeConfig { dm_budget: 500, ..SchemeConfig::gstsk(SchemeKind::Ncgsm, 2, 2, 2, 4, 2) }),
    ];
    for (name, cfg) in cases {
        let s = Scheme::build(&cfg)?;
        let book = pmsim::harness::transmit_codebook(&s)?;
        let (d, g) = diversity_coding_gain(&book, s.n())?;
        println!("{name:<22} diversity {d}, coding gain {g:.4}");
    }
    Ok(())
}
