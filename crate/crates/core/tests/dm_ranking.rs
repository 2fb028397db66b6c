//! Randomly drawn dispersion-matrix sets: a set with higher constrained AMI
//! should also show lower simulated BER.

use pmsim::harness::{run_experiment, ExperimentConfig};

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].partial_cmp(&v[b]).unwrap());
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0;
        for &k in &idx[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

fn spearman(a: &[f64], b: &[f64]) -> f64 {
    let (ra, rb) = (ranks(a), ranks(b));
    let n = a.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = ra.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

#[test]
fn spearman_helper() {
    assert!((spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]) + 1.0).abs() < 1e-12);
    assert_eq!(ranks(&[5.0, 1.0, 5.0]), vec![1.5, 0.0, 1.5]);
}

#[test]
fn ami_and_ber_are_negatively_rank_correlated() {
    let mut ami = Vec::new();
    let mut ber = Vec::new();
    for dm_seed in 0..200 {
        let scheme = format!(r#"{{"kind": "square_gstsk", "m": 2, "n": 1, "q": 4, "p": 1, "dm_budget": 1, "dm_seed": {dm_seed}}}"#);
        let run = |kind: &str, snr: f64, trials: u64| {
            let cfg = ExperimentConfig::from_json(&format!(
                r#"{{"experiment": {{"kind": "{kind}", "snr_db": [{snr}], "trials": {trials}, "frame": 1000, "seed": 5}},
                    "scheme": {scheme}}}"#
            ))
            .unwrap();
            run_experiment(&cfg).unwrap()[0].value
        };
        ami.push(run("ami_constrained", 5.0, 1000));
        ber.push(run("ber", 10.0, 10000));
    }
    let rho = spearman(&ami, &ber);
    println!("spearman rho over 200 DM sets: {rho:.3}");
    assert!(rho < -0.5, "rho = {rho}");
}
