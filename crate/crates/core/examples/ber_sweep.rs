//! BER of coherent and differential BPSK over Rayleigh fading, run through the harness.

use pmsim::harness::{simulate_ber, ExperimentConfig};
use pmsim::metrics::snr_at_ber;

fn main() -> pmsim::Result<()> {
    let snr = "[0, 5, 10, 15, 20, 25, 30]";
    let mut curves = Vec::new();
    for kind in ["apsk", "dapsk"] {
        let cfg = ExperimentConfig::from_json(&format!(
            r#"{{"experiment": {{"kind": "ber", "snr_db": {snr}, "trials": 200000, "frame": 10000, "workers": 2}},
                "scheme": {{"kind": "{kind}", "m": 1}}}}"#
        ))?;
        curves.push(simulate_ber(&cfg)?);
    }
    println!("snr_db  coherent     differential");
    for (a, b) in curves[0].iter().zip(&curves[1]) {
        println!("{:>6}  {:.4e}  {:.4e}", a.snr_db, a.value, b.value);
    }
    let x: Vec<f64> = curves[0].iter().map(|r| r.snr_db).collect();
    let at = |i: usize| snr_at_ber(&x, &curves[i].iter().map(|r| r.value).collect::<Vec<_>>(), 1e-3);
    if let (Some(a), Some(b)) = (at(0), at(1)) {
        println!("SNR gap at BER 1e-3: {:.2} dB", b - a);
    }
    Ok(())
}
