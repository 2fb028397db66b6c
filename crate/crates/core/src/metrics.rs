//! Minimum Euclidean distance, mutual information estimators, pairwise error
//! probability and the union bound.

use std::f64::consts::{LN_2, PI};

use serde::{Deserialize, Serialize};

use crate::channels::{awgn, ChannelSource};
use crate::error::{Error, Result};
use crate::numerics::{hermitian_eig, integrate, CMatrix, SimRng};
use crate::schemes::{Scheme, SchemeKind, SpaceTimeCodeword};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    Ber,
    AmiConstrained,
    AmiUnconstrained,
    Med,
    Complexity,
    PepBound,
}

impl MetricKind {
    pub fn name(self) -> &'static str {
        match self {
            MetricKind::Ber => "ber",
            MetricKind::AmiConstrained => "ami_constrained",
            MetricKind::AmiUnconstrained => "ami_unconstrained",
            MetricKind::Med => "med",
            MetricKind::Complexity => "complexity",
            MetricKind::PepBound => "pep_bound",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricEstimate {
    pub value: f64,
    pub std_error: f64,
    pub trials: u64,
    pub kind: MetricKind,
}

/// Running first and second moments; merging is associative.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Moments {
    pub n: u64,
    pub sum: f64,
    pub sum_sq: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        self.sum += x;
        self.sum_sq += x * x;
    }

    pub fn merge(&mut self, other: &Moments) {
        self.n += other.n;
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
    }

    pub fn mean(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            self.sum / self.n as f64
        }
    }

    pub fn std_error(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        let n = self.n as f64;
        let var = ((self.sum_sq - self.sum * self.sum / n) / (n - 1.0)).max(0.0);
        (var / n).sqrt()
    }

    pub fn estimate(&self, kind: MetricKind, scale: f64) -> MetricEstimate {
        MetricEstimate {
            value: self.mean() * scale,
            std_error: self.std_error() * scale,
            trials: self.n,
            kind,
        }
    }
}

/// Scale factor bringing mean codeword power to the number of columns T, i.e.
/// unit total transmit power per channel use.
fn unit_power_scale(codebook: &[SpaceTimeCodeword]) -> Result<f64> {
    let t = codebook[0].s.cols() as f64;
    crate::channels::calibration_factor(codebook, t)
}

/// min_{f≠g} ‖H(S_f − S_g)‖² with the book normalised to unit power per
/// channel use. Returns 0 if two codewords coincide.
pub fn med(codebook: &[SpaceTimeCodeword], h: Option<&CMatrix>) -> Result<f64> {
    if codebook.len() < 2 {
        return Err(Error::Degenerate("MED needs at least two codewords".into()));
    }
    let k2 = unit_power_scale(codebook)?.powi(2);
    let images: Vec<CMatrix> = match h {
        Some(h) => codebook.iter().map(|c| h.matmul(&c.s)).collect::<Result<_>>()?,
        None => codebook.iter().map(|c| c.s.clone()).collect(),
    };
    let mut best = f64::INFINITY;
    for f in 0..images.len() {
        for g in f + 1..images.len() {
            let d: f64 = images[f]
                .as_slice()
                .iter()
                .zip(images[g].as_slice())
                .map(|(a, b)| (a - b).norm_sqr())
                .sum();
            best = best.min(d);
        }
    }
    if best == 0.0 {
        log::warn!("codebook contains duplicate codewords");
    }
    Ok(best * k2)
}

/// Exact MED of antenna-selection codebooks without enumerating pairs.
///
/// For codewords made of P active entries drawn independently from one
/// alphabet, the closest pair either shares its pattern and differs in one
/// symbol, or uses two patterns whose supports differ in as few positions as
/// possible with the smallest-power symbol on each of them.
pub fn med_selector(scheme: &Scheme) -> Result<f64> {
    use SchemeKind as K;
    if !matches!(scheme.kind(), K::Apsk | K::Sm | K::Ssk | K::Gsm | K::Gssk | K::Blast) {
        return Err(Error::Config(format!("{} is not an antenna-selection scheme", scheme.kind().name())));
    }
    let con = &scheme.constellations[0];
    let p = scheme.p() as f64;
    let mean_sym = con.mean_power();
    // per-entry amplitude² after normalising mean codeword power to 1
    let a2 = 1.0 / (p * mean_sym);
    let mut best = f64::INFINITY;
    if con.size() >= 2 {
        let mut dmin = f64::INFINITY;
        for i in 0..con.size() {
            for j in i + 1..con.size() {
                dmin = dmin.min((con.points[i] - con.points[j]).norm_sqr());
            }
        }
        best = best.min(a2 * dmin);
    }
    let patterns: Vec<Vec<usize>> = match &scheme.activation {
        Some(a) => a.vectors.clone(),
        None => vec![(0..scheme.m()).collect()],
    };
    if patterns.len() >= 2 {
        let min_pow = con.points.iter().map(|z| z.norm_sqr()).fold(f64::INFINITY, f64::min);
        let mut min_diff = usize::MAX;
        for f in 0..patterns.len() {
            for g in f + 1..patterns.len() {
                let shared = patterns[f].iter().filter(|i| patterns[g].contains(i)).count();
                min_diff = min_diff.min(patterns[f].len() + patterns[g].len() - 2 * shared);
            }
        }
        best = best.min(a2 * min_pow * min_diff as f64);
    }
    if !best.is_finite() {
        return Err(Error::Degenerate("single-codeword scheme has no MED".into()));
    }
    Ok(best)
}

/// Σ_i log₂(1 + μ_i ρ) averaged over channel draws, divided by `per`.
pub fn unconstrained_ami(source: &mut ChannelSource, rho: f64, trials: usize, per: usize, rng: &mut SimRng) -> Result<MetricEstimate> {
    let mut mom = Moments::default();
    for _ in 0..trials {
        let h = source.next(rng)?;
        mom.push(log_det_capacity(&h, rho)?);
    }
    Ok(mom.estimate(MetricKind::AmiUnconstrained, 1.0 / per as f64))
}

/// log₂ det(I + ρ Q) with Q the smaller Gram matrix of H.
pub fn log_det_capacity(h: &CMatrix, rho: f64) -> Result<f64> {
    let q = if h.rows() >= h.cols() { &h.adjoint() * h } else { h * &h.adjoint() };
    let eig = hermitian_eig(&q)?;
    Ok(eig.eigenvalues.iter().map(|&mu| (1.0 + mu.max(0.0) * rho).log2()).sum())
}

/// Discrete-input mutual information in bits per channel use.
pub fn constrained_ami(
    codebook: &[SpaceTimeCodeword],
    source: &mut ChannelSource,
    sigma2: f64,
    trials: usize,
    per: usize,
    rng: &mut SimRng,
) -> Result<MetricEstimate> {
    let mom = constrained_ami_moments(codebook, source, sigma2, trials, rng)?;
    Ok(mom.estimate(MetricKind::AmiConstrained, 1.0 / per as f64))
}

/// Per-sample values B − log₂ Σ_g exp η[f, g] with f drawn uniformly.
pub fn constrained_ami_moments(
    codebook: &[SpaceTimeCodeword],
    source: &mut ChannelSource,
    sigma2: f64,
    trials: usize,
    rng: &mut SimRng,
) -> Result<Moments> {
    let nc = codebook.len();
    if nc == 0 {
        return Err(Error::Degenerate("empty codebook".into()));
    }
    let b = (nc as f64).log2();
    let mut mom = Moments::default();
    let mut images: Vec<CMatrix> = Vec::with_capacity(nc);
    let mut eta = vec![0.0; nc];
    for _ in 0..trials {
        let h = source.next(rng)?;
        images.clear();
        for c in codebook {
            images.push(h.matmul(&c.s)?);
        }
        let f = rng.below(nc);
        let (rows, cols) = images[f].shape();
        let v = awgn(rows, cols, sigma2, rng);
        let vs = v.as_slice();
        let vv: f64 = vs.iter().map(|z| z.norm_sqr()).sum();
        let hf = images[f].as_slice();
        for (g, img) in images.iter().enumerate() {
            let d: f64 = hf
                .iter()
                .zip(img.as_slice())
                .zip(vs)
                .map(|((a, b), n)| (a - b + n).norm_sqr())
                .sum();
            eta[g] = (vv - d) / sigma2;
        }
        mom.push(b - log_sum_exp(&eta) / LN_2);
    }
    Ok(mom)
}

/// ln Σ exp(x_i) with max subtraction.
pub fn log_sum_exp(x: &[f64]) -> f64 {
    let m = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + x.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

/// Nonzero-relevant eigenvalues of (S_f − S_g)(S_f − S_g)ᴴ.
fn difference_eigenvalues(sf: &CMatrix, sg: &CMatrix) -> Result<Vec<f64>> {
    if sf.shape() != sg.shape() {
        return Err(Error::Shape("codewords differ in shape".into()));
    }
    let d = sf - sg;
    let g = if d.rows() <= d.cols() { &d * &d.adjoint() } else { &d.adjoint() * &d };
    if g.rows() == 1 {
        return Ok(vec![g[(0, 0)].re]);
    }
    Ok(hermitian_eig(&g)?.eigenvalues)
}

/// Exact Rayleigh pairwise error probability by quadrature.
pub fn pep(sf: &CMatrix, sg: &CMatrix, n_rx: usize, sigma2: f64) -> Result<f64> {
    let mu = difference_eigenvalues(sf, sg)?;
    pep_from_eigenvalues(&mu, n_rx, sigma2)
}

pub fn pep_from_eigenvalues(mu: &[f64], n_rx: usize, sigma2: f64) -> Result<f64> {
    let mu: Vec<f64> = mu.iter().copied().filter(|&m| m > 0.0).collect();
    if mu.is_empty() {
        return Ok(0.5);
    }
    let n = n_rx as i32;
    let integrand = |th: f64| {
        let s2 = th.sin().powi(2);
        mu.iter().map(|&m| (1.0 + m / (4.0 * sigma2 * s2)).powi(-n)).product::<f64>()
    };
    Ok(integrate(integrand, 0.0, PI / 2.0, 64)? / PI)
}

/// Union bound on BER with Hamming-weighted pairwise error probabilities.
pub fn ber_union_bound(codebook: &[SpaceTimeCodeword], n_rx: usize, sigma2: f64) -> Result<f64> {
    let nc = codebook.len();
    let b = codebook.first().map_or(0, |c| c.bits.len());
    if nc < 2 || b == 0 {
        return Err(Error::Degenerate("union bound needs labelled codewords".into()));
    }
    let mut acc = 0.0;
    for f in 0..nc {
        for g in f + 1..nc {
            let dh = codebook[f].bits.iter().zip(&codebook[g].bits).filter(|(a, b)| a != b).count();
            acc += 2.0 * dh as f64 * pep(&codebook[f].s, &codebook[g].s, n_rx, sigma2)?;
        }
    }
    Ok((acc / (b as f64 * nc as f64)).min(1.0))
}

/// (diversity order, coding gain) from the rank and determinant criteria.
pub fn diversity_coding_gain(codebook: &[SpaceTimeCodeword], n_rx: usize) -> Result<(usize, f64)> {
    if codebook.len() < 2 {
        return Err(Error::Degenerate("need at least two codewords".into()));
    }
    let mut best: Option<(usize, f64)> = None;
    for f in 0..codebook.len() {
        for g in f + 1..codebook.len() {
            let mu = difference_eigenvalues(&codebook[f].s, &codebook[g].s)?;
            let top = mu.iter().copied().fold(0.0, f64::max);
            let rank = if top > 0.0 { mu.iter().filter(|&&m| m > 1e-9 * top).count() } else { 0 };
            let gain: f64 = mu.iter().take(rank).map(|m| m.powi(n_rx as i32)).product();
            let gain = if rank == 0 { 0.0 } else { gain };
            best = Some(match best {
                None => (rank, gain),
                Some((r, _)) if rank < r => (rank, gain),
                Some((r, g0)) if rank == r => (r, g0.min(gain)),
                Some(cur) => cur,
            });
        }
    }
    let (rank, gain) = best.expect("at least one pair");
    Ok((rank * n_rx, gain))
}

/// Readout of the SNR at which a sampled curve first crosses `level`, by
/// linear interpolation between bracketing grid points.
pub fn snr_at_level(snr_db: &[f64], values: &[f64], level: f64) -> Option<f64> {
    for i in 1..snr_db.len().min(values.len()) {
        let (a, b) = (values[i - 1], values[i]);
        if (a - level) * (b - level) <= 0.0 && a != b {
            return Some(snr_db[i - 1] + (level - a) / (b - a) * (snr_db[i] - snr_db[i - 1]));
        }
    }
    None
}

/// Same readout in the log domain, for BER curves.
pub fn snr_at_ber(snr_db: &[f64], ber: &[f64], level: f64) -> Option<f64> {
    let logs: Vec<f64> = ber.iter().map(|b| b.max(1e-300).log10()).collect();
    snr_at_level(snr_db, &logs, level.log10())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::{calibrate_power, snr_to_noise_variance};
    use crate::constellation::ConstellationKind;
    use crate::numerics::{gauss_complex, C64};
    use crate::schemes::SchemeConfig;
    use proptest::prelude::*;

    fn bpsk_book() -> Vec<SpaceTimeCodeword> {
        Scheme::build(&SchemeConfig::new(SchemeKind::Apsk, 1)).unwrap().codebook().unwrap()
    }

    #[test]
    fn med_bpsk() {
        assert!((med(&bpsk_book(), None).unwrap() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn med_selector_agrees_with_brute_force() {
        let cfgs = [
            SchemeConfig { l: 4, ..SchemeConfig::new(SchemeKind::Blast, 3) },
            SchemeConfig { l: 4, p: Some(2), ..SchemeConfig::new(SchemeKind::Gsm, 4) },
            SchemeConfig { l: 2, p: Some(3), ..SchemeConfig::new(SchemeKind::Gsm, 5) },
            SchemeConfig { l: 8, ..SchemeConfig::new(SchemeKind::Sm, 4) },
            SchemeConfig { l: 16, constellation: Some(ConstellationKind::Qam), ..SchemeConfig::new(SchemeKind::Sm, 2) },
            SchemeConfig::new(SchemeKind::Ssk, 4),
            SchemeConfig { p: Some(2), ..SchemeConfig::new(SchemeKind::Gssk, 5) },
        ];
        for cfg in cfgs {
            let s = Scheme::build(&cfg).unwrap();
            let brute = med(&s.codebook().unwrap(), None).unwrap();
            let fast = med_selector(&s).unwrap();
            assert!((brute - fast).abs() < 1e-12, "{:?}: {brute} vs {fast}", cfg.kind);
        }
    }

    #[test]
    fn med_phase_invariant() {
        let s = Scheme::build(&SchemeConfig { l: 4, p: Some(2), ..SchemeConfig::new(SchemeKind::Gsm, 4) }).unwrap();
        let book = s.codebook().unwrap();
        let rot: Vec<SpaceTimeCodeword> = book
            .iter()
            .map(|c| SpaceTimeCodeword { s: c.s.scale(C64::from_polar(1.0, 0.7)), bits: c.bits.clone() })
            .collect();
        assert!((med(&book, None).unwrap() - med(&rot, None).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn unconstrained_examples() {
        let rho = 7.0;
        let mut eye = ChannelSource::Static(CMatrix::identity(2));
        let mut rng = SimRng::new(1);
        let v = unconstrained_ami(&mut eye, rho, 3, 1, &mut rng).unwrap();
        assert!((v.value - 2.0 * (1.0 + rho).log2()).abs() < 1e-12);
        let mut ones = ChannelSource::Static(CMatrix::from_real_rows(&[&[1.0, 1.0], &[1.0, 1.0]]));
        let v = unconstrained_ami(&mut ones, rho, 1, 1, &mut rng).unwrap();
        assert!((v.value - (1.0 + 4.0 * rho).log2()).abs() < 1e-12);

        let mut siso = ChannelSource::Rayleigh { n: 1, m: 1 };
        let mut r1 = SimRng::new(2);
        let est = unconstrained_ami(&mut siso, 10.0, 20000, 1, &mut r1).unwrap();
        let mut r2 = SimRng::new(99);
        let mut acc = Moments::default();
        for _ in 0..20000 {
            let h = gauss_complex(&mut r2, C64::new(0.0, 0.0), 1.0);
            acc.push((1.0 + 10.0 * h.norm_sqr()).log2());
        }
        let tol = 3.0 * (est.std_error.powi(2) + acc.std_error().powi(2)).sqrt();
        assert!((est.value - acc.mean()).abs() < tol);
    }

    #[test]
    fn constrained_limits() {
        let s = Scheme::build(&SchemeConfig { p: Some(2), n: 2, ..SchemeConfig::new(SchemeKind::Gsm, 4) }).unwrap();
        let book = calibrate_power(&s.codebook().unwrap(), 4, 1).unwrap();
        let mut src = ChannelSource::Rayleigh { n: 2, m: 4 };
        let mut rng = SimRng::new(3);
        let hi = constrained_ami(&book, &mut src, snr_to_noise_variance(60.0), 2000, 1, &mut rng).unwrap();
        assert!((hi.value - 4.0).abs() < 0.01, "{hi:?}");
        let lo = constrained_ami(&book, &mut src, snr_to_noise_variance(-40.0), 2000, 1, &mut rng).unwrap();
        assert!(lo.value.abs() < 0.01, "{lo:?}");
    }

    #[test]
    fn constrained_monotone_and_below_capacity() {
        let s = Scheme::build(&SchemeConfig { n: 1, ..SchemeConfig::new(SchemeKind::Sm, 2) }).unwrap();
        let book = calibrate_power(&s.codebook().unwrap(), 2, 1).unwrap();
        let mut prev = -1.0;
        for snr in (-10..=25).step_by(5) {
            let sigma2 = snr_to_noise_variance(snr as f64);
            let mut src = ChannelSource::Rayleigh { n: 1, m: 2 };
            let mut rng = SimRng::new(4);
            let d = constrained_ami(&book, &mut src, sigma2, 4000, 1, &mut rng).unwrap();
            let mut rng = SimRng::new(5);
            let c = unconstrained_ami(&mut src, 1.0 / sigma2, 4000, 1, &mut rng).unwrap();
            assert!(d.value <= c.value + 3.0 * (d.std_error.powi(2) + c.std_error.powi(2)).sqrt());
            assert!(d.value >= prev - 3.0 * d.std_error);
            prev = d.value;
        }
    }

    #[test]
    fn pep_examples() {
        let a = CMatrix::from_real_rows(&[&[1.0], &[0.0]]);
        assert_eq!(pep(&a, &a, 2, 0.1).unwrap(), 0.5);
        let b = CMatrix::from_real_rows(&[&[-1.0], &[0.0]]);
        assert!(pep(&a, &b, 1, 1e-8).unwrap() < 1e-6);
        for &s2 in &[1.0, 0.1, 0.01] {
            let c: f64 = 4.0 / (4.0 * s2);
            let closed = 0.5 * (1.0 - (c / (1.0 + c)).sqrt());
            assert!((pep(&a, &b, 1, s2).unwrap() - closed).abs() < 1e-8);
        }
    }

    #[test]
    fn union_bound_examples() {
        let book = bpsk_book();
        let s2 = 0.3;
        let bound = ber_union_bound(&book, 1, s2).unwrap();
        assert!((bound - pep(&book[0].s, &book[1].s, 1, s2).unwrap()).abs() < 1e-15);
        assert!(ber_union_bound(&book, 1, 1e-12).unwrap() < 1e-6);
    }

    #[test]
    fn diversity_examples() {
        assert_eq!(diversity_coding_gain(&bpsk_book(), 1).unwrap().0, 1);
        let blast = Scheme::build(&SchemeConfig::new(SchemeKind::Blast, 2)).unwrap().codebook().unwrap();
        assert_eq!(diversity_coding_gain(&blast, 2).unwrap().0, 2);
        let astsk = Scheme::build(&SchemeConfig { dm_budget: 200, ..SchemeConfig::gstsk(SchemeKind::Astsk, 2, 1, 2, 4, 1) }).unwrap();
        assert_eq!(diversity_coding_gain(&astsk.codebook().unwrap(), 1).unwrap().0, 2);
    }

    #[test]
    fn snr_readout() {
        let x = [0.0, 1.0, 2.0];
        let y = [0.0, 0.4, 0.8];
        assert!((snr_at_level(&x, &y, 0.6).unwrap() - 1.5).abs() < 1e-12);
        assert!(snr_at_level(&x, &y, 2.0).is_none());
        let b = [1e-1, 1e-2, 1e-3];
        assert!((snr_at_ber(&x, &b, 10f64.powf(-2.5)).unwrap() - 1.5).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn pep_symmetric(seed in any::<u64>()) {
            let mut rng = SimRng::new(seed);
            let a = crate::numerics::gauss_matrix(&mut rng, 2, 2, 1.0);
            let b = crate::numerics::gauss_matrix(&mut rng, 2, 2, 1.0);
            prop_assert_eq!(pep(&a, &b, 2, 0.2).unwrap(), pep(&b, &a, 2, 0.2).unwrap());
        }

        #[test]
        fn lse_is_stable(shift in -800.0f64..800.0) {
            let x = [shift, shift + 1.0, shift - 2.0];
            let want = shift + (1.0f64 + 1f64.exp() + (-2f64).exp()).ln();
            prop_assert!((log_sum_exp(&x) - want).abs() < 1e-9 * want.abs().max(1.0));
        }
    }
}
