//! Constrained AMI of 4-QAM SIM(4,1) against BPSK OFDM, both at one bit per subcarrier.

use pmsim::harness::{sweep_ami, ExperimentConfig};
use pmsim::metrics::snr_at_level;

fn curve(scheme: &str) -> pmsim::Result<(Vec<f64>, Vec<f64>)> {
    let cfg = ExperimentConfig::from_json(&format!(
        r#"{{"experiment": {{"kind": "ami_constrained", "snr_db": [-6, -4, -2, 0, 2, 4, 6, 8, 10], "trials": 5000}},
            "scheme": {scheme}, "channel": {{"model": "ofdm"}}}}"#
    ))?;
    let rows = sweep_ami(&cfg)?;
    Ok((rows.iter().map(|r| r.snr_db).collect(), rows.iter().map(|r| r.value).collect()))
}

fn main() -> pmsim::Result<()> {
    let (snr, sim) = curve(r#"{"kind": "sim", "m": 4, "p": 1, "l": 4, "constellation": "qam"}"#)?;
    let (_, ofdm) = curve(r#"{"kind": "ofdm", "m": 4}"#)?;
    println!("snr_db  sim     ofdm");
    for i in 0..snr.len() {
        println!("{:>6}  {:.4}  {:.4}", snr[i], sim[i], ofdm[i]);
    }
    for level in [0.5, 0.75] {
        if let (Some(a), Some(b)) = (snr_at_level(&snr, &sim, level), snr_at_level(&snr, &ofdm, level)) {
            println!("at {level} bits per subcarrier SIM needs {:.2} dB less", b - a);
        }
    }
    Ok(())
}
