//! Optical spatial modulation over a Lambertian link, with power-imbalance tuning.

use pmsim::channels::{mean_received_power, vlc_channel, vlc_noise_variance, ChannelSource, VlcGeometry};
use pmsim::metrics::constrained_ami;
use pmsim::numerics::SimRng;
use pmsim::schemes::{pi_osm_optimize, Scheme, SchemeConfig, SchemeKind};

fn main() -> pmsim::Result<()> {
    // a centred PD sees both LEDs equally, which defeats index detection
    let symmetric = vlc_channel(&VlcGeometry::default())?.h;
    println!("symmetric layout gains: {:.3e} {:.3e}", symmetric[(0, 0)].re, symmetric[(0, 1)].re);

    let geo = VlcGeometry { leds: vec![[-0.5, 0.0, 1.0], [0.5, 0.0, 1.0]], pds: vec![[0.25, 0.0, 0.0]], ..VlcGeometry::default() };
    let h = vlc_channel(&geo)?.h;
    println!("offset layout gains: {:.3e} {:.3e}", h[(0, 0)].re, h[(0, 1)].re);

    let snr_db = 20.0;
    let schemes = [
        ("OSM", SchemeConfig { l: 2, ..SchemeConfig::new(SchemeKind::Osm, 2) }),
        ("PI-OSM 3 dB", SchemeConfig { l: 2, pi_beta_db: Some(3.0), ..SchemeConfig::new(SchemeKind::PiOsm, 2) }),
        ("PAM-RC", SchemeConfig { l: 4, ..SchemeConfig::new(SchemeKind::PamRc, 2) }),
    ];
    for (name, cfg) in &schemes {
        let s = Scheme::build(cfg)?;
        let book = s.codebook()?;
        let sigma2 = vlc_noise_variance(snr_db, mean_received_power(&h, &book));
        let mut src = ChannelSource::Static(h.clone());
        let ami = constrained_ami(&book, &mut src, sigma2, 4000, 1, &mut SimRng::new(2))?;
        println!("{name:<12} {} bits, AMI at {snr_db} dB: {:.3}", s.bits_per_block(), ami.value);
    }

    let pi = Scheme::build(&schemes[1].1)?;
    let tuned = pi_osm_optimize(&pi, &h, snr_db, 4, 1000, 3)?;
    println!("tuned PA factors: {tuned:.3?}");
    Ok(())
}
